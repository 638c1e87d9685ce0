"""Flat ``key = value`` text files used for modem configs and channel profiles."""
from __future__ import annotations

import math
from dataclasses import fields
from pathlib import Path


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def read_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def parse_number(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(t)


def parse_pairs(text: str) -> tuple[tuple[float, float], ...]:
    """``"20000:0.1, 21500:1.0"`` -> ((20000.0, 0.1), (21500.0, 1.0))."""
    text = text.strip()
    if not text or text.lower() == "none":
        return ()
    pairs = []
    for item in text.split(","):
        x, y = item.split(":")
        pairs.append((float(x), float(y)))
    return tuple(pairs)


def format_pairs(pairs) -> str:
    return ", ".join(f"{x:g}:{y:g}" for x, y in pairs) if pairs else "none"


def coerce(cls, raw: dict[str, str], converters: dict) -> dict:
    """Convert raw strings for dataclass ``cls``; unknown keys raise KeyError."""
    names = {f.name for f in fields(cls)}
    out = {}
    for key, value in raw.items():
        if key not in names:
            raise KeyError(f"unknown key {key!r}")
        out[key] = converters[key](value)
    return out

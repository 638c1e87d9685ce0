"""Exception types raised across the modem pipeline."""


class ModemError(Exception):
    """Base class for all modem errors."""


class ConfigInvalid(ModemError, ValueError):
    pass


class PayloadTooLong(ModemError, ValueError):
    pass


class BufferTooShort(ModemError, ValueError):
    pass


class ZeroMagnitude(ModemError, ValueError):
    pass


class BlockError(ModemError):
    """No CRC-valid candidate was found for a block within the flip budget."""

    def __init__(self, message, best_effort_bits=0):
        super().__init__(message)
        self.best_effort_bits = best_effort_bits


class HeaderError(ModemError):
    pass


class InvalidProfile(ModemError, ValueError):
    pass


class LengthMismatch(ModemError, ValueError):
    pass


class UnknownAxis(ModemError, ValueError):
    pass

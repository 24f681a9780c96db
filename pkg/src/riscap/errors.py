"""Exception types raised by the library."""


class RiscapError(Exception):
    """Base class for library errors."""


class InvalidParameter(RiscapError, ValueError):
    """A parameter or configuration value is out of its valid range."""


class NoDataSubBlocks(InvalidParameter):
    """Raised when every sub-block is spent on training (tau == ell)."""

    def __init__(self, tau: int, ell: int):
        super().__init__(f"no data sub-blocks: tau={tau} leaves nothing of ell={ell}")
        self.tau = tau
        self.ell = ell


class CapacityExceeded(RiscapError):
    """An enumeration would exceed the configured size cap."""

    def __init__(self, what: str, size: int, cap: int, advice: str = ""):
        msg = f"{what} has {size} elements, above the enumeration cap {cap}"
        if advice:
            msg += f"; {advice}"
        super().__init__(msg)
        self.size = size
        self.cap = cap

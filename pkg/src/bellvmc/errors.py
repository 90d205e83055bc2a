"""Exception types shared across the package."""


class BellVmcError(Exception):
    """Base class for bellvmc-specific failures."""


class CapacityError(BellVmcError):
    """A requested computation exceeds an enumeration/diagonalization cap."""


class NumericsError(BellVmcError):
    """A numeric procedure produced non-finite values or failed to converge."""

"""Exception types shared across the package."""


class TreeIsoError(Exception):
    """Base class for all package errors."""


class MalformedInstanceError(TreeIsoError):
    """Input data does not describe a valid weighted directed tree."""


class ContractViolationError(TreeIsoError):
    """An operation was called with arguments outside its contract."""


class CertificateError(TreeIsoError):
    """A solution or intermediate state failed certificate verification."""


class InternalInvariantError(TreeIsoError):
    """An internal consistency check failed.

    Raised when a bound or monotonicity property that the algorithm
    guarantees is observed to be violated, which indicates either a bug
    or a floating-point tolerance breakdown.  Never caught internally.
    """

"""Exception hierarchy shared by the library and the command line."""


class GroupCartError(Exception):
    """Base class for all errors raised by groupcart."""

    exit_code = 2


class ConfigError(GroupCartError):
    """A configuration refers to something that does not exist or is malformed."""


class DataError(GroupCartError):
    """Input data violates a documented invariant."""


class UsageError(GroupCartError, ValueError):
    """A function was called with arguments outside its contract."""


class InvariantError(GroupCartError):
    """An internal consistency check failed."""

    exit_code = 3

"""Exception hierarchy shared by every module."""


class RefuteLabError(Exception):
    """Base class for all errors raised by refutelab."""


class ConfigurationError(RefuteLabError, ValueError):
    """An object or experiment was configured inconsistently."""


class ArgumentError(RefuteLabError, ValueError):
    """A call received an argument outside its contract."""


class SizeCapError(RefuteLabError):
    """An enumeration would exceed the desk-scale size cap."""


class SampleBudgetError(RefuteLabError):
    """A sample source ran out of its draw budget."""


class RefuterError(RefuteLabError):
    """A refuter could not reach a verdict (e.g. its wrapped learner failed)."""


class BoostFailure(RefuteLabError):
    """Too many boosting rounds were skipped."""

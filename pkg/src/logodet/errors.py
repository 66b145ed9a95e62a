"""Package-wide error base class.

Every data-level failure raised by this package derives from LogodetError so
the CLI can map it to a single exit code while still printing the concrete
error name.
"""


class LogodetError(Exception):
    """Base class for all logodet data errors."""

"""
Exceptions raised by alarmsys.

Errors fall in two families. A :class:`ConfigError` means the caller asked
for something invalid (a bad schema, a negative cost, an empty grid). A
:class:`DataError` means the input data cannot be processed as requested.
The command line maps the first family to exit code 2 and the second to 3.
"""


class AlarmSysError(Exception):
    """Base class for all alarmsys errors."""
    def __init__(self, msg=""):
        self.msg = msg
    def __str__(self):
        return self.msg


class ConfigError(AlarmSysError):
    """Invalid configuration, arguments or parameters."""

class SchemaError(ConfigError):
    """The log schema is invalid, or a mandatory column is missing."""

class CostModelError(ConfigError):
    """Invalid cost function, effectiveness or alarm model."""

class PolicyError(ConfigError):
    """Invalid alarm policy parameters."""

class SearchSpaceError(ConfigError):
    """Invalid search space for threshold optimization."""


class DataError(AlarmSysError):
    """The data can not be processed as requested."""

class RowError(DataError):
    """A row of an input file can not be parsed."""
    def __init__(self, msg="", line=None):
        self.msg = msg
        self.line = line
        """1-based line number in the input file, header included."""

class LabelingError(DataError):
    """The outcome label of a case can not be determined."""

class EmptyLogError(DataError):
    """The operation requires a non-empty log."""

class SplitError(DataError):
    """The log can not be split into non-empty partitions."""

class FitError(DataError):
    """The estimator can not be fitted on the given data."""

class DimensionError(DataError):
    """A feature vector does not have the expected dimensionality."""

class ScoreFormatError(RowError):
    """A score file violates the score interchange format."""

class CostRangeError(DataError):
    """A prefix index lies outside 1..|trace|."""

class OptimizationError(DataError):
    """Not enough cases to run the optimization."""

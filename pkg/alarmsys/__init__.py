__all__ = ["log", "encoding", "estimator", "cost", "policy", "optimize",
           "experiment", "synthetic", "cli", "errors"]

# Documentation only automatically includes functions specified in __all__.
# If you add more modules, please manually include them in doc/index.rst.

VERSION = (1, 0, 0)
"""alarmsys version as tuple. The major and minor revision number are always
present, the patch identifier is only bumped for bug fix releases."""

def _get_version():
    """Return the alarmsys version as string."""
    return ".".join([str(v) for v in VERSION])

"""Exception hierarchy for the dynsfm pipeline.

Every error raised by library code derives from DynSfmError so callers
(and the CLI) can map failures to exit codes without matching strings.
"""


class DynSfmError(Exception):
    """Base class for all dynsfm errors."""


class NotSkewSymmetric(DynSfmError):
    pass


class NearPiAmbiguity(DynSfmError):
    """Rotation angle too close to pi for a well-defined principal log."""


class DegenerateMatrix(DynSfmError):
    pass


class TooFewPoints(DynSfmError):
    pass


class DegenerateScene(DynSfmError):
    pass


class BadSampling(DynSfmError):
    pass


class SingularInertia(DynSfmError):
    pass


class BadFilterSpec(DynSfmError):
    pass


class SeriesTooShort(DynSfmError):
    pass


class TooFewFramesOrPoints(DynSfmError):
    pass


class LengthMismatch(DynSfmError):
    pass


class RankDeficient(DynSfmError):
    pass


class SingularTransform(DynSfmError):
    pass


class IndefiniteQ(DynSfmError):
    pass


class DegenerateConfiguration(DynSfmError):
    pass


class DimensionMismatch(DynSfmError):
    pass


class ConfigError(DynSfmError):
    """Invalid run configuration; message names the offending field."""


class IllConditionedWarning(UserWarning):
    """A least-squares stage hit a normal-equation condition number > 1e12."""

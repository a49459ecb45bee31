"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it:
2 bad configuration, 3 I/O, 4 data invariant violation.
"""


class HyperdermError(Exception):
    exit_code = 4


class ConfigError(HyperdermError, ValueError):
    exit_code = 2


class IoFailure(HyperdermError, OSError):
    exit_code = 3


class MissingInput(IoFailure):
    pass


class ManifestIoFailure(IoFailure):
    pass


class DataError(HyperdermError, ValueError):
    """Input data violates a documented invariant or precondition."""


# cube-core
class MalformedHeader(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class UnsupportedVersion(DataError):
    pass


class InvalidCube(DataError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class EmptyWavelengthList(DataError):
    pass


class NonPositiveInput(DataError):
    pass


# calib
class EmptyInput(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class NonPositiveEpsilon(DataError):
    pass


# skinsim
class WavelengthOutOfRange(DataError):
    pass


class NonPositiveScattering(DataError):
    pass


class GeometryOutOfFrame(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class BoundsInverted(DataError):
    pass


# analysis
class WindowOutOfBounds(DataError):
    pass


class EvenWindow(DataError):
    pass


class BandMapMismatch(DataError):
    pass

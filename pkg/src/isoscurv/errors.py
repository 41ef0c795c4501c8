"""Exception hierarchy.

Geometric failures (a point outside a construction's domain, a singular
denominator) derive from :class:`GeometryError`; the CLI maps those to exit
code 3. Bad inputs derive from :class:`ParamError` and map to exit code 2.
"""


class IsoscurvError(Exception):
    pass


class ParamError(IsoscurvError, ValueError):
    pass


class GeometryError(IsoscurvError, ArithmeticError):
    pass


class DomainError(GeometryError):
    pass


class SingularMetricError(GeometryError):
    pass


class SingularPhiError(GeometryError):
    """phi - s phi' vanished, so Q is undefined."""


class SingularDeltaError(GeometryError):
    pass


class SingularGError(GeometryError):
    """Fundamental tensor not positive definite (regularity violated)."""


class SingularFrameError(GeometryError):
    pass


class RegularityError(GeometryError):
    pass


class NullVectorError(GeometryError):
    pass


class BZeroError(GeometryError):
    pass


class QuadratureError(GeometryError):
    pass


class DimensionError(ParamError):
    pass


# series engine
class SeriesError(IsoscurvError):
    pass


class OrderError(SeriesError):
    pass


class NonInvertibleError(SeriesError, ZeroDivisionError):
    pass


class SymbolDegreeError(SeriesError):
    """A product of two symbolic parameters was formed."""


class DegenerateSystemError(SeriesError):
    pass


class InconsistentSystemError(SeriesError):
    pass

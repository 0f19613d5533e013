"""
Exception hierarchy for chart input problems and numerical failures
"""
from typing import Iterable, List, Optional


class GeoscopeError(ValueError):
    """Base class for every error raised by the library"""


class InputError(GeoscopeError):
    """Bad input: chart files, expressions, configuration, selectors (exit code 1)"""


class NumericalError(GeoscopeError):
    """Numerical failure at evaluation time (exit code 2)"""


# Input errors

class ChartSyntaxError(InputError):
    """Expression syntax error with byte offset and expected tokens"""

    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset = offset
        self.expected = sorted(set(expected))
        detail = f"{message} at byte {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownIdentifierError(InputError):
    """Identifier that is neither a declared coordinate nor a known function"""

    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier '{name}' at byte {offset}")


class ChartFormatError(InputError):
    """Structural problem in a chart file"""

    def __init__(self, message: str, source: str = "<text>", line: Optional[int] = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class ConfigError(InputError):
    pass


class GridSpecError(InputError):
    pass


class SelectionError(InputError):
    """Stable-basis element index out of range"""


class TensorSlotError(InputError):
    """Tensor slot index out of range or incompatible signatures"""


# Numerical errors

class JetShapeError(NumericalError):
    """Jets with different dimension or truncation order combined"""


class JetDomainError(NumericalError):
    """Elementary function or division evaluated outside its domain"""

    def __init__(self, message: str, value: float):
        self.value = value
        super().__init__(f"{message} (value {value!r})")


class ExpressionDomainError(NumericalError):
    """Domain violation located inside a metric expression"""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        where = f" in '{text}'" if text else ""
        super().__init__(f"{message} at byte {offset}{where}")


class JetOrderError(NumericalError):
    """Differentiating a jet that has no derivative information left"""


class MetricDegenerateError(NumericalError):
    """Metric not positive definite at the evaluation point"""

    def __init__(self, point, smallest_eigenvalue: float):
        self.point = list(point)
        self.smallest_eigenvalue = smallest_eigenvalue
        super().__init__(
            f"metric not positive definite at {self.point}: "
            f"smallest eigenvalue {smallest_eigenvalue:.3e}"
        )


class ChartDomainError(NumericalError):
    """Point outside a declared coordinate domain"""


class TowerDepthError(NumericalError):
    """Curvature tower not deep enough for the requested operation"""


class StabilizationError(NumericalError):
    """Filtration did not stabilize before the hard cap"""

    def __init__(self, message: str, dims: List[int]):
        self.dims = list(dims)
        super().__init__(f"{message}; dims so far {self.dims}")


class TransportError(NumericalError):
    """Parallel transport failed (curve left the chart or bad step count)"""

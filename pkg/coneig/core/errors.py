"""
Error types shared by the operator, solver and CLI layers
"""

from typing import Any, List, Optional


class ConeigError(Exception):
    """Base class for every error raised by coneig"""


class DimensionMismatchError(ConeigError, ValueError):
    def __init__(self, expected: int, got: int, what: str = "vector"):
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class DenseCapExceededError(ConeigError):
    def __init__(self, dim: int, cap: int):
        super().__init__(
            f"Dense materialization of dimension {dim} exceeds the cap of {cap}; "
            f"use a smaller instance or raise the cap"
        )
        self.dim = dim
        self.cap = cap


class ProjectorError(ConeigError, ValueError):
    """Invalid projector input (non-binary mask, zero references, non-closed group, ...)"""


class DisconnectedDomainError(ConeigError, ValueError):
    """Active cells of a grid domain do not form one connected component"""


class FactorizationError(ConeigError):
    """A sparse or dense factorization broke down"""


class SingularShiftError(ConeigError):
    def __init__(self, shift: complex, detail: str = ""):
        message = f"Shift {shift} is (numerically) an eigenvalue"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.shift = shift
        self.detail = detail


class ConvergenceError(ConeigError):
    """Raised when an iterative solve stops short; carries whatever converged"""

    def __init__(self,
                 message: str,
                 partial: Optional[List[Any]] = None,
                 diagnostics: Any = None,
                 best_residual: Optional[float] = None):
        super().__init__(message)
        self.partial = partial or []
        self.diagnostics = diagnostics
        self.best_residual = best_residual


class ConfigError(ConeigError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location = f"{location}:{line}"
            location = f"{location}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line

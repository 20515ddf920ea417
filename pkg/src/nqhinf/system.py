"""Plant description, evaluable control policies, and toolkit-wide error types."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# CLI/process exit contract (stable for CI).
EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

_COND_LIMIT = 1e12


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ToolkitError):
    """A point lies outside a cost function's effective domain."""


class NumericalError(ToolkitError):
    """An iterative solve failed to converge; carries the final residual."""

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)
        self.residual = residual


class SynthesisError(ToolkitError):
    """A design is infeasible: no certificate exists for the requested data."""


class ConfigError(ToolkitError):
    """Malformed configuration, bad CLI usage, or unsatisfiable search bracket."""


@dataclass(frozen=True)
class SystemLTI:
    """Discrete-time plant x_{k+1} = A x_k + B u_k + w_k.

    A must be invertible (finite condition number) and B full rank; both are
    checked at construction.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise ConfigError(f"B must have {n} rows, got shape {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ConfigError("system matrices contain non-finite entries")
        if np.linalg.cond(A) > _COND_LIMIT:
            raise ConfigError("A is singular or too ill-conditioned (invertibility required)")
        if np.linalg.matrix_rank(B) < min(B.shape):
            raise ConfigError("B must be full rank")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    @property
    def scalar(self) -> bool:
        return self.n == 1 and self.d == 1

    def a_inv_t(self) -> np.ndarray:
        return np.linalg.inv(self.A).T

    def step(self, x, u, w):
        """One application of the plant recursion."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return self.A @ x + self.B @ u + w

    def to_spec(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist()}

    @staticmethod
    def from_spec(spec: dict) -> "SystemLTI":
        return SystemLTI(np.asarray(spec["A"], dtype=float), np.asarray(spec["B"], dtype=float))


@dataclass
class Controller:
    """Full-information policy u = f(x, w).

    The wrapped callable must accept state and disturbance arrays; policies
    built from scalar certificates broadcast elementwise, so batched rollouts
    can pass arrays of states/disturbances directly.
    """

    fn: callable
    kind: str = "central"
    meta: dict = field(default_factory=dict)

    def __call__(self, x, w):
        return self.fn(x, w)

    def evaluate(self, x, w):
        return self.fn(x, w)

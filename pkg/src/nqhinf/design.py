"""Offline design procedures: complete the missing cost from the given two.

Three routes, each shaped by one free positive-definite parameter:

* rs — given input cost r and disturbance cost s, fix m(x) = x'Mx and induce
  the storage p through its dual, then the state cost q = p - m.
* qs — given state cost q and disturbance cost s (fully/over-actuated plants),
  fix m and induce the input cost r through its dual.
* qr — given q and r, fix the pre-input cost g(x) = x'Gx and induce the
  disturbance cost s through its dual.

Every induced function is defined through a dual expression and materialized
by gradient inversion; each route re-verifies convexity on sampled grids and
re-certifies the assembled triple before anything is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import (
    Certificate,
    ball_samples,
    signed_log_grid,
    verify_certificate,
)
from .convex import (
    ConjugateFn,
    ConvexFn,
    InducedDifference,
    QuadraticFn,
    SumFn,
    bisect_increasing,
)
from .system import ConfigError, SynthesisError, SystemLTI

CONVEXITY_TOL = 1e-9
_EIG_FLOOR = 1e-10


def _as_spd(M, n: int, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape == (1, 1) and n > 1:
        M = M[0, 0] * np.eye(n)
    if M.shape != (n, n):
        raise ConfigError(f"{name} must be {n}x{n}")
    if np.max(np.abs(M - M.T)) > 1e-10 * (1.0 + np.max(np.abs(M))):
        raise ConfigError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(M)) <= 0:
        raise ConfigError(f"{name} must be positive definite")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class Bounds:
    """Declared curvature bounds for the feasibility programs (L <= hess <= U)."""

    L_r: float | None = None
    U_r: float | None = None
    L_s: float | None = None
    U_s: float | None = None
    L_q: float | None = None
    U_q: float | None = None

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"feasibility program needs declared bounds: {', '.join(missing)}")


@dataclass
class GridSpec:
    """Sampling grids for design verification; radii default to 10x envelope."""

    envelope: float = 1.0
    points: int = 41
    seed: int = 0

    @property
    def radius(self) -> float:
        return 10.0 * self.envelope

    def scalar_grid(self) -> np.ndarray:
        return signed_log_grid(self.radius, self.points)

    def vector_grid(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return ball_samples(self.radius, n, self.points, rng)

    def grid(self, n: int) -> np.ndarray:
        return self.scalar_grid() if n == 1 else self.vector_grid(n)


@dataclass
class DesignRS:
    r: ConvexFn
    s: ConvexFn
    M: np.ndarray
    gamma: float
    bounds: Bounds | None = None


@dataclass
class DesignQS:
    q: ConvexFn
    s: ConvexFn
    M: np.ndarray
    gamma: float
    bounds: Bounds | None = None


@dataclass
class DesignQR:
    q: ConvexFn
    r: ConvexFn
    G: np.ndarray
    gamma: float
    bounds: Bounds | None = None


# ---------------------------------------------------------------------------
# dual expressions


class _InputDualTerm:
    """r*(B'.) on a one-dimensional state space with d inputs, elementwise.

    For d = 1 the maps broadcast natively; otherwise each scalar argument
    needs one d-dimensional conjugate evaluation, applied pointwise.
    """

    def __init__(self, r: ConvexFn, B: np.ndarray):
        self.r = r
        self.row = B[0]  # (d,)
        self.fast = B.shape[1] == 1

    def value(self, xi):
        if self.fast:
            return self.r.conjugate_value(self.row[0] * np.asarray(xi, dtype=float))
        xiv = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.array([float(self.r.conjugate_value(self.row * t)) for t in xiv])
        return out if np.shape(xi) else float(out[0])

    def gradient(self, xi):
        if self.fast:
            return self.row[0] * self.r.conjugate_gradient(self.row[0] * np.asarray(xi, dtype=float))
        xiv = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.array([float(self.row @ np.atleast_1d(self.r.conjugate_gradient(self.row * t)))
                        for t in xiv])
        return out if np.shape(xi) else float(out[0])

    def hessian(self, xi):
        if self.fast:
            return self.row[0] ** 2 * self.r.conjugate_hessian(self.row[0] * np.asarray(xi, dtype=float))
        xiv = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.array([float(self.row @ np.atleast_2d(self.r.conjugate_hessian(self.row * t)) @ self.row)
                        for t in xiv])
        return out if np.shape(xi) else float(out[0])


class RsStorageDual(ConvexFn):
    """p*(xi) = -r*(B'xi) + xi'(A M^-1 A')xi / 4 + g^2 s*(xi/g^2)."""

    def __init__(self, r: ConvexFn, s: ConvexFn, M: np.ndarray, sys: SystemLTI, gamma: float):
        self.r = r
        self.s = s
        self.sys = sys
        self.g2 = float(gamma) ** 2
        self.AMA = sys.A @ np.linalg.solve(M, sys.A.T)
        self.dim = sys.n
        if self.dim == 1:
            self._rterm = _InputDualTerm(r, sys.B)
            self._ama = float(self.AMA[0, 0])

    def value(self, xi):
        if self.dim == 1:
            xi = np.asarray(xi, dtype=float)
            return (-self._rterm.value(xi)
                    + 0.25 * self._ama * xi * xi
                    + self.g2 * self.s.conjugate_value(xi / self.g2))
        xi = np.asarray(xi, dtype=float)
        return (-float(np.sum(self.r.conjugate_value(self.sys.B.T @ xi)))
                + 0.25 * float(xi @ self.AMA @ xi)
                + self.g2 * float(np.sum(self.s.conjugate_value(xi / self.g2))))

    def gradient(self, xi):
        if self.dim == 1:
            xi = np.asarray(xi, dtype=float)
            return (-self._rterm.gradient(xi)
                    + 0.5 * self._ama * xi
                    + self.s.conjugate_gradient(xi / self.g2))
        xi = np.asarray(xi, dtype=float)
        return (-self.sys.B @ np.atleast_1d(self.r.conjugate_gradient(self.sys.B.T @ xi))
                + 0.5 * self.AMA @ xi
                + np.atleast_1d(self.s.conjugate_gradient(xi / self.g2)))

    def hessian(self, xi):
        if self.dim == 1:
            xi = np.asarray(xi, dtype=float)
            return (-self._rterm.hessian(xi)
                    + 0.5 * self._ama
                    + self.s.conjugate_hessian(xi / self.g2) / self.g2)
        xi = np.asarray(xi, dtype=float)
        B = self.sys.B
        return (-B @ np.atleast_2d(self.r.conjugate_hessian(B.T @ xi)) @ B.T
                + 0.5 * self.AMA
                + np.atleast_2d(self.s.conjugate_hessian(xi / self.g2)) / self.g2)


class QsInputDual(ConvexFn):
    """r*(xi) = -p*(Bp'xi) + xi'Bp A M^-1 A' Bp' xi / 4 + g^2 s*(g^-2 Bp'xi),
    with Bp the right pseudo-inverse of B (d >= n)."""

    def __init__(self, p: ConvexFn, s: ConvexFn, M: np.ndarray, sys: SystemLTI, gamma: float):
        if sys.d < sys.n:
            raise ConfigError("the qs design requires a fully or over-actuated plant (d >= n)")
        self.p = p
        self.s = s
        self.sys = sys
        self.g2 = float(gamma) ** 2
        Bp = sys.B.T @ np.linalg.inv(sys.B @ sys.B.T)  # d x n, B Bp = I
        self.BpT = Bp.T                                 # n x d
        self.core = Bp @ sys.A @ np.linalg.solve(M, sys.A.T) @ Bp.T
        self.dim = sys.d
        self._scalar = sys.scalar
        if self._scalar:
            self._binv = 1.0 / sys.B[0, 0]
            self._core = float(self.core[0, 0])

    def value(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            z = self._binv * xi
            return (-self.p.conjugate_value(z)
                    + 0.25 * self._core * xi * xi
                    + self.g2 * self.s.conjugate_value(z / self.g2))
        xi = np.asarray(xi, dtype=float)
        z = self.BpT @ xi
        return (-float(np.sum(self.p.conjugate_value(z)))
                + 0.25 * float(xi @ self.core @ xi)
                + self.g2 * float(np.sum(self.s.conjugate_value(z / self.g2))))

    def gradient(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            z = self._binv * xi
            return (-self._binv * self.p.conjugate_gradient(z)
                    + 0.5 * self._core * xi
                    + self._binv * self.s.conjugate_gradient(z / self.g2))
        xi = np.asarray(xi, dtype=float)
        z = self.BpT @ xi
        Bp = self.BpT.T
        return (-Bp @ np.atleast_1d(self.p.conjugate_gradient(z))
                + 0.5 * self.core @ xi
                + Bp @ np.atleast_1d(self.s.conjugate_gradient(z / self.g2)))

    def hessian(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            z = self._binv * xi
            return (-self._binv**2 * self.p.conjugate_hessian(z)
                    + 0.5 * self._core
                    + self._binv**2 * self.s.conjugate_hessian(z / self.g2) / self.g2)
        xi = np.asarray(xi, dtype=float)
        z = self.BpT @ xi
        Bp = self.BpT.T
        return (-Bp @ np.atleast_2d(self.p.conjugate_hessian(z)) @ Bp.T
                + 0.5 * self.core
                + Bp @ np.atleast_2d(self.s.conjugate_hessian(z / self.g2)) @ Bp.T / self.g2)


class GDual(ConvexFn):
    """g*(xi) = m*(A'xi) + g^2 s*(xi/g^2) (dual of the pre-input cost)."""

    def __init__(self, m: ConvexFn, s: ConvexFn, sys: SystemLTI, gamma: float):
        self.m = m
        self.s = s
        self.sys = sys
        self.g2 = float(gamma) ** 2
        self.dim = sys.n
        self._scalar = sys.n == 1
        if self._scalar:
            self._a = sys.A[0, 0]

    def value(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            return self.m.conjugate_value(self._a * xi) + self.g2 * self.s.conjugate_value(xi / self.g2)
        xi = np.asarray(xi, dtype=float)
        return self.m.conjugate_value(self.sys.A.T @ xi) + self.g2 * self.s.conjugate_value(xi / self.g2)

    def gradient(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            return self._a * self.m.conjugate_gradient(self._a * xi) + self.s.conjugate_gradient(xi / self.g2)
        xi = np.asarray(xi, dtype=float)
        return (self.sys.A @ np.atleast_1d(self.m.conjugate_gradient(self.sys.A.T @ xi))
                + np.atleast_1d(self.s.conjugate_gradient(xi / self.g2)))

    def hessian(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            return self._a**2 * self.m.conjugate_hessian(self._a * xi) + self.s.conjugate_hessian(xi / self.g2) / self.g2
        xi = np.asarray(xi, dtype=float)
        A = self.sys.A
        return (A @ np.atleast_2d(self.m.conjugate_hessian(A.T @ xi)) @ A.T
                + np.atleast_2d(self.s.conjugate_hessian(xi / self.g2)) / self.g2)


class QrStorageDual(ConvexFn):
    """p*(z) = g*(z) - r*(B'z) for the qr route (g quadratic, fixed)."""

    def __init__(self, g: QuadraticFn, r: ConvexFn, sys: SystemLTI):
        self.g = g
        self.r = r
        self.sys = sys
        self.dim = sys.n
        if self.dim == 1:
            self._rterm = _InputDualTerm(r, sys.B)

    def value(self, z):
        if self.dim == 1:
            z = np.asarray(z, dtype=float)
            return self.g.conjugate_value(z) - self._rterm.value(z)
        z = np.asarray(z, dtype=float)
        return float(self.g.conjugate_value(z)) - float(np.sum(self.r.conjugate_value(self.sys.B.T @ z)))

    def gradient(self, z):
        if self.dim == 1:
            z = np.asarray(z, dtype=float)
            return self.g.conjugate_gradient(z) - self._rterm.gradient(z)
        z = np.asarray(z, dtype=float)
        return (np.atleast_1d(self.g.conjugate_gradient(z))
                - self.sys.B @ np.atleast_1d(self.r.conjugate_gradient(self.sys.B.T @ z)))

    def hessian(self, z):
        if self.dim == 1:
            z = np.asarray(z, dtype=float)
            return self.g.conjugate_hessian(z) - self._rterm.hessian(z)
        z = np.asarray(z, dtype=float)
        B = self.sys.B
        return (np.atleast_2d(self.g.conjugate_hessian(z))
                - B @ np.atleast_2d(self.r.conjugate_hessian(B.T @ z)) @ B.T)


class QrDisturbanceDual(ConvexFn):
    """s*(xi) = g^-2 [ g*(g^2 xi) - m*(g^2 A'xi) ] for the qr route."""

    def __init__(self, g: QuadraticFn, m: ConvexFn, sys: SystemLTI, gamma: float):
        self.g = g
        self.m = m
        self.sys = sys
        self.g2 = float(gamma) ** 2
        self.dim = sys.n
        self._scalar = sys.n == 1
        if self._scalar:
            self._a = sys.A[0, 0]

    def value(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            return (self.g.conjugate_value(self.g2 * xi) - self.m.conjugate_value(self.g2 * self._a * xi)) / self.g2
        xi = np.asarray(xi, dtype=float)
        return (self.g.conjugate_value(self.g2 * xi) - self.m.conjugate_value(self.g2 * (self.sys.A.T @ xi))) / self.g2

    def gradient(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            return self.g.conjugate_gradient(self.g2 * xi) - self._a * self.m.conjugate_gradient(self.g2 * self._a * xi)
        xi = np.asarray(xi, dtype=float)
        return (np.atleast_1d(self.g.conjugate_gradient(self.g2 * xi))
                - self.sys.A @ np.atleast_1d(self.m.conjugate_gradient(self.g2 * (self.sys.A.T @ xi))))

    def hessian(self, xi):
        if self._scalar:
            xi = np.asarray(xi, dtype=float)
            return self.g2 * (self.g.conjugate_hessian(self.g2 * xi)
                              - self._a**2 * self.m.conjugate_hessian(self.g2 * self._a * xi))
        xi = np.asarray(xi, dtype=float)
        A = self.sys.A
        return self.g2 * (np.atleast_2d(self.g.conjugate_hessian(self.g2 * xi))
                          - A @ np.atleast_2d(self.m.conjugate_hessian(self.g2 * (A.T @ xi))) @ A.T)


class QrInducedS(ConvexFn):
    """Scalar disturbance cost induced by the qr route.

    Primal evaluations run through a single monotone solve in the storage-dual
    variable z (every kernel is closed-form), so batched rollout costs stay
    cheap; the conjugate side delegates to the dual expression.
    """

    def __init__(self, g: QuadraticFn, m: InducedDifference, sys: SystemLTI, gamma: float):
        if not sys.scalar:
            raise ConfigError("QrInducedS is the scalar fast path")
        self.gbar = g
        self.m = m
        self.sys = sys
        self.g2 = float(gamma) ** 2
        self.a = sys.A[0, 0]
        self.dual = QrDisturbanceDual(g, m, sys, gamma)
        self.dim = 1

    # kernels, all closed-form in the storage-dual variable
    def _x_of(self, z):
        return self.m.dual.gradient(z)

    def _xim_of(self, z):
        return z - self.m.q.gradient(self._x_of(z))

    def _w_of(self, z):
        return self.gbar.conjugate_gradient(self._xim_of(z) / self.a) - self.a * self._x_of(z)

    def _solve(self, w):
        return bisect_increasing(self._w_of, w)

    def value(self, w):
        w = np.asarray(w, dtype=float)
        z = self._solve(w)
        x = self._x_of(z)
        xim = self._xim_of(z)
        xi = xim / (self.g2 * self.a)
        p_val = x * z - self.m.dual.value(z)
        m_star = x * xim - (p_val - self.m.q.value(x))
        s_star = (self.gbar.conjugate_value(xim / self.a) - m_star) / self.g2
        return w * xi - s_star

    def gradient(self, w):
        z = self._solve(np.asarray(w, dtype=float))
        return self._xim_of(z) / (self.g2 * self.a)

    def hessian(self, w):
        xi = self.gradient(w)
        return 1.0 / self.dual.hessian(xi)

    def conjugate_value(self, y):
        return self.dual.value(y)

    def conjugate_gradient(self, y):
        return self.dual.gradient(y)

    def conjugate_hessian(self, y):
        return self.dual.hessian(y)


# ---------------------------------------------------------------------------
# induction + certification


def make_g(m: ConvexFn, s: ConvexFn, sys: SystemLTI, gamma: float) -> ConvexFn:
    """The pre-input cost g from its dual g* = m*(A'.) + g^2 s*(. / g^2).

    Collapses to a quadratic when both m and s are quadratic.
    """
    if isinstance(m, QuadraticFn) and isinstance(s, QuadraticFn):
        AMA = sys.A @ np.linalg.solve(m.W, sys.A.T)
        W = np.linalg.inv(AMA + np.linalg.inv(s.W) / gamma**2)
        return QuadraticFn(0.5 * (W + W.T))
    return ConjugateFn(GDual(m, s, sys, gamma))


def grad_g_dual(sys: SystemLTI, M: np.ndarray, s: ConvexFn, gamma: float, xi):
    """grad g*(xi) = (A M^-1 A') xi / 2 + grad s*(xi / gamma^2): the closing
    formula of the rs/qs routes (g is recovered by inverting this map)."""
    AMA = sys.A @ np.linalg.solve(_as_spd(M, sys.n, "M"), sys.A.T)
    if sys.scalar:
        xi = np.asarray(xi, dtype=float)
        return 0.5 * float(AMA[0, 0]) * xi + s.conjugate_gradient(xi / gamma**2)
    xi = np.asarray(xi, dtype=float)
    return 0.5 * AMA @ xi + np.atleast_1d(s.conjugate_gradient(xi / gamma**2))


def _grid_min_curvature(fn: ConvexFn, grid) -> float:
    if fn.dim == 1:
        return float(np.min(fn.hessian(np.asarray(grid, dtype=float))))
    worst = np.inf
    for x in np.atleast_2d(grid):
        worst = min(worst, float(np.min(np.linalg.eigvalsh(np.atleast_2d(fn.hessian(x))))))
    return worst


def induce_p_from_rs(d: DesignRS, sys: SystemLTI) -> tuple[ConvexFn, ConvexFn]:
    """Storage p (through its dual) and state cost q = p - x'Mx."""
    M = _as_spd(d.M, sys.n, "M")
    p_star = RsStorageDual(d.r, d.s, M, sys, d.gamma)
    p = ConjugateFn(p_star)
    q = InducedDifference(p, QuadraticFn(M))
    return p, q


def induce_r_from_qs(d: DesignQS, sys: SystemLTI) -> tuple[ConvexFn, ConvexFn]:
    """Input cost r (through its dual) and the storage p = q + x'Mx."""
    M = _as_spd(d.M, sys.n, "M")
    p = SumFn(d.q, QuadraticFn(M))
    r = ConjugateFn(QsInputDual(p, d.s, M, sys, d.gamma))
    return r, p


def induce_s_from_qr(d: DesignQR, sys: SystemLTI) -> tuple[ConvexFn, ConvexFn, ConvexFn]:
    """Disturbance cost s (through its dual) plus the storage p and m = p - q."""
    if sys.d < sys.n:
        raise ConfigError("the qr design requires a fully or over-actuated plant (d >= n)")
    G = _as_spd(d.G, sys.n, "G")
    g = QuadraticFn(G)
    p = ConjugateFn(QrStorageDual(g, d.r, sys))
    m = InducedDifference(p, d.q)
    s = QrInducedS(g, m, sys, d.gamma) if sys.scalar else ConjugateFn(QrDisturbanceDual(g, m, sys, d.gamma))
    return s, p, m


@dataclass
class ConditionReport:
    """Eigenvalue margins of the design conditions on the sampled grids.

    Positive margins mean satisfied (amount of slack); `worst` is the most
    negative margin across all conditions.
    """

    margins: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def worst(self) -> float:
        return min(self.margins.values()) if self.margins else np.inf

    @property
    def passed(self) -> bool:
        return self.worst >= -1e-8

    def summary(self) -> str:
        lines = [f"  {k}: margin {v:+.3e}" for k, v in self.margins.items()]
        lines += [f"  note: {n}" for n in self.notes]
        lines.append(f"  worst margin {self.worst:+.3e} -> {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _shaping_condition_margin(sys, M, s, g, gamma, x_grid, w_grid) -> float:
    """Margin of g^-2 hess s*(g^-2 grad g(Ax+w)) + A M^-1 A'/2 >= g^-2 hess s*(grad s(w))."""
    g2 = gamma**2
    AMA = sys.A @ np.linalg.solve(M, sys.A.T)
    if sys.scalar:
        a = sys.A[0, 0]
        ama = float(AMA[0, 0])
        worst = np.inf
        w = np.asarray(w_grid, dtype=float)
        for x in np.atleast_1d(x_grid):
            lhs = s.conjugate_hessian(g.gradient(a * x + w) / g2) / g2 + 0.5 * ama
            rhs = s.conjugate_hessian(s.gradient(w)) / g2
            worst = min(worst, float(np.min(lhs - rhs)))
        return worst
    worst = np.inf
    for x in np.atleast_2d(x_grid):
        for w in np.atleast_2d(w_grid):
            z = sys.A @ x + w
            lhs = np.atleast_2d(s.conjugate_hessian(np.atleast_1d(g.gradient(z)) / g2)) / g2 + 0.5 * AMA
            rhs = np.atleast_2d(s.conjugate_hessian(np.atleast_1d(s.gradient(w)))) / g2
            worst = min(worst, float(np.min(np.linalg.eigvalsh(0.5 * ((lhs - rhs) + (lhs - rhs).T)))))
    return worst


def check_conditions_rs(d: DesignRS, sys: SystemLTI, grids: GridSpec) -> ConditionReport:
    """Sampled margins of the two-sided curvature window and the disturbance
    shaping condition for the rs route."""
    M = _as_spd(d.M, sys.n, "M")
    gamma = d.gamma
    g2 = gamma**2
    AMA = sys.A @ np.linalg.solve(M, sys.A.T)
    Minv = np.linalg.inv(M)
    L = 0.5 * (AMA - Minv)
    U = 0.5 * AMA
    rep = ConditionReport()
    xi_grid = grids.grid(sys.n)
    if sys.scalar:
        b = sys.B[0, 0]
        xi = np.asarray(xi_grid, dtype=float)
        T = b**2 * d.r.conjugate_hessian(b * xi) - d.s.conjugate_hessian(xi / g2) / g2
        rep.margins["curvature_window_lower"] = float(np.min(T - L[0, 0]))
        rep.margins["curvature_window_upper"] = float(np.min(U[0, 0] - T))
    else:
        B = sys.B
        lo = np.inf
        hi = np.inf
        for xi in np.atleast_2d(xi_grid):
            T = B @ np.atleast_2d(d.r.conjugate_hessian(B.T @ xi)) @ B.T \
                - np.atleast_2d(d.s.conjugate_hessian(xi / g2)) / g2
            lo = min(lo, float(np.min(np.linalg.eigvalsh(0.5 * ((T - L) + (T - L).T)))))
            hi = min(hi, float(np.min(np.linalg.eigvalsh(0.5 * ((U - T) + (U - T).T)))))
        rep.margins["curvature_window_lower"] = lo
        rep.margins["curvature_window_upper"] = hi
    g = make_g(QuadraticFn(M), d.s, sys, gamma)
    env = signed_log_grid(grids.envelope, 11) if sys.scalar else ball_samples(grids.envelope, sys.n, 8, np.random.default_rng(grids.seed))
    rep.margins["disturbance_shaping"] = _shaping_condition_margin(
        sys, M, d.s, g, gamma, env, grids.grid(sys.n))
    return rep


def check_conditions_qs(d: DesignQS, sys: SystemLTI, grids: GridSpec) -> ConditionReport:
    """Sampled margins for the qs route: the storage/input curvature product
    condition and the disturbance shaping condition."""
    M = _as_spd(d.M, sys.n, "M")
    gamma = d.gamma
    g2 = gamma**2
    AMA = sys.A @ np.linalg.solve(M, sys.A.T)
    rep = ConditionReport()
    x_grid = grids.grid(sys.n)
    if d.q.domain_radius is not None:
        lim = 0.98 * d.q.domain_radius
        x_grid = np.clip(x_grid, -lim, lim)
    if sys.scalar:
        x = np.asarray(x_grid, dtype=float)
        hp = d.q.hessian(x) + 2.0 * M[0, 0]
        grad_p = d.q.gradient(x) + 2.0 * M[0, 0] * x
        bracket = 0.5 * float(AMA[0, 0]) + d.s.conjugate_hessian(grad_p / g2) / g2
        rep.margins["input_convexity_product"] = float(np.min(hp * bracket - 1.0))
    else:
        worst = np.inf
        for x in np.atleast_2d(x_grid):
            hp = np.atleast_2d(d.q.hessian(x)) + 2.0 * M
            grad_p = np.atleast_1d(d.q.gradient(x)) + 2.0 * M @ x
            bracket = 0.5 * AMA + np.atleast_2d(d.s.conjugate_hessian(grad_p / g2)) / g2
            root = np.linalg.cholesky(0.5 * (hp + hp.T))
            sym = root.T @ bracket @ root
            worst = min(worst, float(np.min(np.linalg.eigvalsh(0.5 * (sym + sym.T)))) - 1.0)
        rep.margins["input_convexity_product"] = worst
    g = make_g(QuadraticFn(M), d.s, sys, gamma)
    env = signed_log_grid(grids.envelope, 11) if sys.scalar else ball_samples(grids.envelope, sys.n, 8, np.random.default_rng(grids.seed))
    rep.margins["disturbance_shaping"] = _shaping_condition_margin(
        sys, M, d.s, g, gamma, env, grids.grid(sys.n))
    return rep


def check_conditions_qr(d: DesignQR, sys: SystemLTI, grids: GridSpec) -> ConditionReport:
    """Sampled margins for the qr route: storage convexity, difference
    convexity, and induced-disturbance convexity."""
    G = _as_spd(d.G, sys.n, "G")
    rep = ConditionReport()
    grid = grids.grid(sys.n)
    p_star = QrStorageDual(QuadraticFn(G), d.r, sys)
    if sys.scalar:
        b = sys.B[0, 0]
        ginv2 = 0.5 / G[0, 0]
        z = np.asarray(grid, dtype=float)
        rep.margins["storage_convexity"] = float(np.min(ginv2 - b**2 * d.r.conjugate_hessian(b * z)))
        # difference convexity: hess p >= hess q via the dual curvature
        xs = p_star.gradient(z)  # x values swept as z sweeps the dual grid
        rep.margins["difference_convexity"] = float(np.min(1.0 / p_star.hessian(z) - d.q.hessian(xs)))
        # induced-disturbance convexity, stated on the swept storage-dual grid
        rho = b**2 * d.r.conjugate_hessian(b * z)
        hq = d.q.hessian(xs)
        a = sys.A[0, 0]
        Gs = G[0, 0]
        lhs = Gs + 2.0 * a**2 * Gs**2 * rho + hq * rho * Gs
        rhs = a**2 * Gs + 0.5 * hq
        rep.margins["disturbance_convexity"] = float(np.min(lhs - rhs))
    else:
        worst_p = np.inf
        worst_m = np.inf
        worst_s = np.inf
        Ginv = np.linalg.inv(G)
        for z in np.atleast_2d(grid):
            Hp_star = np.atleast_2d(p_star.hessian(z))
            worst_p = min(worst_p, float(np.min(np.linalg.eigvalsh(0.5 * (Hp_star + Hp_star.T)))))
            x = np.atleast_1d(p_star.gradient(z))
            Hp = np.linalg.inv(Hp_star)
            Hq = np.atleast_2d(d.q.hessian(x))
            worst_m = min(worst_m, float(np.min(np.linalg.eigvalsh(0.5 * ((Hp - Hq) + (Hp - Hq).T)))))
            rho = sys.B @ np.atleast_2d(d.r.conjugate_hessian(sys.B.T @ z)) @ sys.B.T
            lhs = G + 2.0 * sys.A.T @ G @ sys.A @ rho @ G + Hq @ rho @ G
            rhs = sys.A.T @ G @ sys.A + 0.5 * Hq
            diff = lhs - rhs
            worst_s = min(worst_s, float(np.min(np.linalg.eigvalsh(0.5 * (diff + diff.T)))))
        rep.margins["storage_convexity"] = worst_p
        rep.margins["difference_convexity"] = worst_m
        rep.margins["disturbance_convexity"] = worst_s
    return rep


def _certificate_grids(sys: SystemLTI, grids: GridSpec):
    if sys.scalar:
        g = grids.scalar_grid()
        return g, g, g
    g = grids.vector_grid(sys.n)
    return g, g, g


def _build(sys, q, r, s, p, m, g, gamma, grids: GridSpec, meta) -> Certificate:
    xi_g, x_g, w_g = _certificate_grids(sys, grids)
    cert = Certificate(system=sys, q=q, r=r, s=s, p=p, m=m, g=g, gamma=gamma,
                       xi_grid=xi_g, x_grid=x_g, w_grid=w_g, meta=meta)
    report = verify_certificate(cert)
    cert.meta["verify"] = report
    if not report.passed:
        raise SynthesisError("assembled design fails certification:\n" + report.summary())
    return cert


def build_rs(d: DesignRS, sys: SystemLTI, grids: GridSpec | None = None) -> Certificate:
    """Complete, check, and certify an rs design."""
    grids = grids or GridSpec()
    M = _as_spd(d.M, sys.n, "M")
    p_star = RsStorageDual(d.r, d.s, M, sys, d.gamma)
    curv = _grid_min_curvature(p_star, grids.grid(sys.n))
    if curv <= CONVEXITY_TOL:
        raise SynthesisError(f"induced storage dual is not convex on the grid "
                             f"(min curvature {curv:.3e}); M is infeasible")
    p = ConjugateFn(p_star)
    q = InducedDifference(p, QuadraticFn(M))
    x_grid = grids.grid(sys.n)
    q_curv = _grid_min_curvature(q, x_grid)
    if q_curv <= -CONVEXITY_TOL:
        raise SynthesisError(f"induced state cost is not convex on the grid "
                             f"(min curvature {q_curv:.3e}); M is infeasible")
    report = check_conditions_rs(d, sys, grids)
    if not report.passed:
        raise SynthesisError("rs design conditions fail on the grid:\n" + report.summary())
    m = QuadraticFn(M)
    g = make_g(m, d.s, sys, d.gamma)
    meta = {"mode": "rs", "conditions": report, "M": M}
    return _build(sys, q, d.r, d.s, p, m, g, d.gamma, grids, meta)


def build_qs(d: DesignQS, sys: SystemLTI, grids: GridSpec | None = None) -> Certificate:
    """Complete, check, and certify a qs design."""
    grids = grids or GridSpec()
    M = _as_spd(d.M, sys.n, "M")
    r, p = induce_r_from_qs(d, sys)
    r_curv = _grid_min_curvature(r.primal, grids.grid(sys.d))
    if r_curv <= CONVEXITY_TOL:
        raise SynthesisError(f"induced input dual is not convex on the grid "
                             f"(min curvature {r_curv:.3e}); M is infeasible")
    report = check_conditions_qs(d, sys, grids)
    if not report.passed:
        raise SynthesisError("qs design conditions fail on the grid:\n" + report.summary())
    m = QuadraticFn(M)
    g = make_g(m, d.s, sys, d.gamma)
    meta = {"mode": "qs", "conditions": report, "M": M}
    return _build(sys, d.q, r, d.s, p, m, g, d.gamma, grids, meta)


def build_qr(d: DesignQR, sys: SystemLTI, grids: GridSpec | None = None) -> Certificate:
    """Complete, check, and certify a qr design."""
    grids = grids or GridSpec()
    G = _as_spd(d.G, sys.n, "G")
    s, p, m = induce_s_from_qr(d, sys)
    report = check_conditions_qr(d, sys, grids)
    if not report.passed:
        raise SynthesisError("qr design conditions fail on the grid:\n" + report.summary())
    s_dual = s.dual if isinstance(s, QrInducedS) else s.primal
    s_curv = _grid_min_curvature(s_dual, grids.grid(sys.n))
    if s_curv <= CONVEXITY_TOL:
        raise SynthesisError(f"induced disturbance dual is not convex on the grid "
                             f"(min curvature {s_curv:.3e}); G is infeasible")
    g = QuadraticFn(G)
    meta = {"mode": "qr", "conditions": report, "G": G}
    return _build(sys, d.q, d.r, s, p, m, g, d.gamma, grids, meta)


# ---------------------------------------------------------------------------
# feasibility programs (search over the free shaping parameter)


@dataclass
class FeasibilityResult:
    """Outcome of a scalar/diagonal feasibility program.

    ``intervals`` lists closed feasible intervals for the scalar shaping
    parameter (per axis, for diagonal problems); empty means infeasible.
    """

    variable: str
    intervals: list
    notes: list = field(default_factory=list)
    violated: str | None = None

    @property
    def feasible(self) -> bool:
        return len(self.intervals) > 0

    def contains(self, value: float) -> bool:
        return any(lo - 1e-12 <= value <= hi + 1e-12 for lo, hi in self.intervals)

    def pick(self) -> float:
        if not self.feasible:
            raise SynthesisError(f"feasibility program has an empty {self.variable}-interval"
                                 + (f" (violated: {self.violated})" if self.violated else ""))
        lo, hi = self.intervals[0]
        if np.isinf(hi):
            return max(2.0 * lo, 1.0) if lo > 0 else 1.0
        return float(np.sqrt(max(lo, 1e-12) * hi)) if lo > 0 else 0.5 * hi


def _scalars(sys: SystemLTI):
    return float(sys.A[0, 0]), float(sys.B[0, 0])


def feasibility_rs(sys: SystemLTI, bounds: Bounds, gamma: float) -> FeasibilityResult:
    """Interval solve of the rs feasibility program for scalar plants.

    Works in mu = 1/m.  The curvature-gap constraint is independent of m and
    empties the interval outright when violated (in particular for gamma below
    the quadratic baseline's infimum with matching bounds).
    """
    bounds.require("L_r", "U_r", "L_s", "U_s")
    if not sys.scalar:
        raise ConfigError("interval feasibility is for scalar plants; use feasibility_rs_matrix")
    a, b = _scalars(sys)
    ig2 = 1.0 / gamma**2
    gap = b**2 / bounds.U_r - ig2 / bounds.L_s
    notes = []
    if gap <= 0:
        return FeasibilityResult("m", [], notes, violated="input-vs-disturbance curvature gap <= 0")
    mu_lo = 0.0
    mu_hi = np.inf
    if a**2 > 1.0:
        mu_hi = min(mu_hi, 2.0 * gap / (a**2 - 1.0))
    lo3 = 2.0 * (b**2 / bounds.L_r - ig2 / bounds.U_s) / a**2
    mu_lo = max(mu_lo, lo3)
    lo4 = 2.0 * ig2 * (1.0 / bounds.L_s - 1.0 / bounds.U_s) / a**2
    mu_lo = max(mu_lo, lo4)
    if mu_hi <= max(mu_lo, 0.0):
        return FeasibilityResult("m", [], notes, violated="stability-vs-window bound on 1/m")
    m_lo = 0.0 if np.isinf(mu_hi) else 1.0 / mu_hi
    m_hi = np.inf if mu_lo <= 0.0 else 1.0 / mu_lo
    if m_lo == 0.0:
        m_lo = np.nextafter(0.0, 1.0)
        notes.append("lower endpoint open at m -> 0+")
    return FeasibilityResult("m", [(m_lo, m_hi)], notes)


def feasibility_qs(sys: SystemLTI, bounds: Bounds, gamma: float) -> FeasibilityResult:
    """Interval solve of the qs feasibility program for scalar plants.

    The symbol pairing the quadratic disturbance term inside the upper bound
    is taken as U_s (the tightest quadratic upper bound on s); flagged in the
    notes.  An exactly quadratic s (L_s = U_s) degenerates the lower bound,
    which is handled as the vacuous limit and flagged.
    """
    bounds.require("L_q", "L_s", "U_s")
    if not sys.scalar:
        raise ConfigError("interval feasibility is for scalar plants")
    a, _ = _scalars(sys)
    g2 = gamma**2
    notes = ["quadratic disturbance weight in the upper bound taken as U_s"]
    D = 1.0 / bounds.L_s - 1.0 / bounds.U_s
    m_lo = 0.0
    if D <= 1e-15:
        notes.append("exact quadratic s: lower bound degenerates to 0 <= M (vacuous)")
    else:
        m_lo = 0.5 * g2 * a**2 / D
    S = bounds.U_s
    # Z(m) - m/a^2 >= 0 as an upward parabola in m
    c2 = 2.0 * S / a**2
    c1 = gamma**-2 * bounds.L_q / (bounds.U_s * a**2) + 1.0 - 1.0 / a**2
    c0 = 0.5 * bounds.L_q
    disc = c1 * c1 - 4.0 * c2 * c0
    holes = []
    if disc > 0:
        r1 = (-c1 - np.sqrt(disc)) / (2.0 * c2)
        r2 = (-c1 + np.sqrt(disc)) / (2.0 * c2)
        if r2 > 0:
            holes.append((max(r1, 0.0), r2))
    intervals = []
    start = m_lo if m_lo > 0 else np.nextafter(0.0, 1.0)
    if not holes:
        intervals.append((start, np.inf))
    else:
        h_lo, h_hi = holes[0]
        if start < h_lo:
            intervals.append((start, h_lo))
        intervals.append((max(start, h_hi), np.inf))
    intervals = [(lo, hi) for lo, hi in intervals if hi > lo]
    if not intervals:
        return FeasibilityResult("m", [], notes, violated="upper bound on A^-T M A^-1")
    return FeasibilityResult("m", intervals, notes)


def feasibility_qr(sys: SystemLTI, r: ConvexFn, bounds: Bounds, gamma: float,
                   x_envelope: float) -> FeasibilityResult:
    """Interval solve of the qr feasibility program for scalar plants.

    The pointwise ceiling on G uses the input-cost curvature over the declared
    state envelope; U_r should be its supremum over the same envelope.
    """
    bounds.require("L_q", "U_q", "U_r")
    if not sys.scalar:
        raise ConfigError("interval feasibility is for scalar plants")
    a, b = _scalars(sys)
    xs = np.linspace(-x_envelope, x_envelope, 4001)
    ceiling = float(np.min(r.hessian(b * xs))) / (2.0 * b**2)
    floor1 = 0.5 / (b**2 / bounds.U_r + 1.0 / bounds.U_q)
    # quadratic threshold from the growth condition
    c2 = 2.0 * a**2 * b**2 / bounds.U_r
    c1 = 1.0 - a**2 + bounds.L_q * b**2 / bounds.U_r
    c0 = -0.5 * bounds.U_q
    disc = c1 * c1 - 4.0 * c2 * c0
    floor2 = (-c1 + np.sqrt(disc)) / (2.0 * c2)
    lo = max(floor1, floor2, np.nextafter(0.0, 1.0))
    if lo > ceiling:
        return FeasibilityResult("g", [], violated="curvature ceiling over the envelope")
    return FeasibilityResult("g", [(lo, ceiling)])


def feasibility_rs_matrix(sys: SystemLTI, bounds: Bounds, gamma: float,
                          restarts: int = 20, iters: int = 500,
                          seed: int = 0) -> np.ndarray:
    """Small-n search for M in the rs program by alternating eigenvalue
    correction on X = M^-1, with exact re-verification of every inequality.

    A heuristic (not a proper SDP solver): failure to find a point is reported
    as infeasible, which may be conservative.
    """
    bounds.require("L_r", "U_r", "L_s", "U_s")
    n = sys.n
    if n > 4:
        raise ConfigError("matrix feasibility search is intended for n <= 4")
    A, B = sys.A, sys.B
    ig2 = 1.0 / gamma**2

    def bound_inv(v, k):
        if np.isscalar(v):
            return np.eye(k) / float(v)
        return np.linalg.inv(np.asarray(v, dtype=float))

    C2 = B @ bound_inv(bounds.U_r, sys.d) @ B.T - ig2 * bound_inv(bounds.L_s, n)
    D3 = B @ bound_inv(bounds.L_r, sys.d) @ B.T - ig2 * bound_inv(bounds.U_s, n)
    D4 = ig2 * (bound_inv(bounds.L_s, n) - bound_inv(bounds.U_s, n))
    if np.min(np.linalg.eigvalsh(C2)) <= 0:
        raise SynthesisError("rs matrix program infeasible: curvature gap not positive definite")

    def constraints(X):
        F1 = C2 - 0.5 * (A @ X @ A.T - X)
        F2 = 0.5 * A @ X @ A.T - D3
        F3 = 0.5 * A @ X @ A.T - D4
        return F1, F2, F3

    def eig_floor(Sym, floor=0.0):
        w, V = np.linalg.eigh(0.5 * (Sym + Sym.T))
        return V @ np.diag(np.maximum(w, floor)) @ V.T

    kron = np.kron(A, A) - np.eye(n * n)
    rng = np.random.default_rng(seed)
    A_inv = np.linalg.inv(A)
    for _ in range(restarts):
        W = rng.normal(size=(n, n))
        X = W @ W.T + 0.1 * np.eye(n)
        X *= rng.uniform(0.1, 10.0)
        for _ in range(iters):
            F1, F2, F3 = constraints(X)
            worst = min(np.min(np.linalg.eigvalsh(F1)), np.min(np.linalg.eigvalsh(F2)),
                        np.min(np.linalg.eigvalsh(F3)), np.min(np.linalg.eigvalsh(X)) - _EIG_FLOOR)
            if worst >= -1e-10:
                for lo_name, F in (("window", F1), ("upper", F2), ("shaping", F3)):
                    if np.min(np.linalg.eigvalsh(F)) < -1e-9:
                        break
                else:
                    return np.linalg.inv(0.5 * (X + X.T))
            updates = []
            if np.min(np.linalg.eigvalsh(F1)) < 0:
                target = eig_floor(F1, 1e-9)
                rhs = 2.0 * (C2 - target)
                Xn = np.linalg.solve(kron, rhs.reshape(-1)).reshape(n, n)
                updates.append(eig_floor(Xn, _EIG_FLOOR))
            if np.min(np.linalg.eigvalsh(F2)) < 0:
                target = eig_floor(F2, 1e-9)
                Xn = 2.0 * A_inv @ (target + D3) @ A_inv.T
                updates.append(eig_floor(Xn, _EIG_FLOOR))
            if np.min(np.linalg.eigvalsh(F3)) < 0:
                target = eig_floor(F3, 1e-9)
                Xn = 2.0 * A_inv @ (target + D4) @ A_inv.T
                updates.append(eig_floor(Xn, _EIG_FLOOR))
            if not updates:
                X = eig_floor(X, _EIG_FLOOR)
                continue
            X = eig_floor(0.5 * (X + sum(updates) / len(updates)), _EIG_FLOOR)
    raise SynthesisError("rs matrix feasibility search found no point "
                         "(reported as infeasible; the heuristic may be conservative)")

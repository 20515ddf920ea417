"""Quadratic worst-case-ratio baseline: finite-horizon recursion, stationary
inverse-form algebraic Riccati equation, existence tests, and the linear
central controller.  Serves both as a usable design path for quadratic costs
and as the oracle that the nonquadratic machinery must collapse to.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .system import ConfigError, Controller, NumericalError, SynthesisError, SystemLTI

PSD_TOL = 1e-9          # eigenvalue tolerance for all semidefiniteness tests
ARE_RESIDUAL_TOL = 1e-10
_LQR_MAX_ITER = 100_000
# The damped map stalls exactly at the infimal level (unit contraction rate);
# hitting the cap is reported as infeasible, which biases searches upward by
# at most their tolerance.
_ARE_MAX_ITER = 20_000


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _check_psd(M: np.ndarray, name: str):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if np.max(np.abs(M - M.T)) > 1e-10 * (1.0 + np.max(np.abs(M))):
        raise ConfigError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(M)) < -PSD_TOL:
        raise ConfigError(f"{name} must be positive semidefinite")
    return _sym(M)


@dataclass(frozen=True)
class QuadWeights:
    """Quadratic stage weights and the performance level gamma."""

    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    gamma: float
    P_terminal: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "Q", _check_psd(self.Q, "Q"))
        object.__setattr__(self, "R", _check_psd(self.R, "R"))
        object.__setattr__(self, "S", _check_psd(self.S, "S"))
        if self.P_terminal is not None:
            object.__setattr__(self, "P_terminal", _check_psd(self.P_terminal, "P_terminal"))
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")

    def with_gamma(self, gamma: float) -> "QuadWeights":
        return QuadWeights(self.Q, self.R, self.S, gamma, self.P_terminal)


@dataclass
class RiccatiRun:
    """Backward recursion output: P_T..P_0 plus per-step gains and tests."""

    P: list[np.ndarray]          # P[k] for k = 0..T+1 (P[T+1] is the terminal weight)
    gains: list[np.ndarray]      # combined (d+n) x n gain of the recursion, k = 0..T
    Re: list[np.ndarray]
    deltas: list[np.ndarray]     # existence-test blocks, k = 0..T
    feasible: bool = True

    @property
    def P0(self) -> np.ndarray:
        return self.P[0]


def riccati_backward(sys: SystemLTI, w: QuadWeights, T: int) -> RiccatiRun:
    """Run the backward recursion over horizon T (steps k = 0..T).

    Feasibility of the performance level is recorded via the per-step
    negativity test on the disturbance block.
    """
    if T < 0:
        raise ConfigError("horizon must be nonnegative")
    A, B = sys.A, sys.B
    n, d = sys.n, sys.d
    g2 = w.gamma**2
    P_next = w.P_terminal if w.P_terminal is not None else np.zeros((n, n))
    P_seq = [None] * (T + 2)
    P_seq[T + 1] = P_next
    gains = [None] * (T + 1)
    res = [None] * (T + 1)
    deltas = [None] * (T + 1)
    feasible = True
    stacked = np.vstack([B.T, np.eye(n)])
    for k in range(T, -1, -1):
        RB = w.R + B.T @ P_next @ B
        try:
            RB_inv = np.linalg.inv(RB)
        except np.linalg.LinAlgError:
            raise SynthesisError("singular input block R + B'PB in the backward recursion")
        delta = -g2 * w.S + P_next - P_next @ B @ RB_inv @ B.T @ P_next
        if np.max(np.linalg.eigvalsh(_sym(delta))) > PSD_TOL:
            feasible = False
        Re = np.block([[RB, B.T @ P_next], [P_next @ B, -g2 * w.S + P_next]])
        try:
            K = np.linalg.solve(Re, stacked @ P_next @ A)
        except np.linalg.LinAlgError:
            raise SynthesisError("singular closed-loop block in the backward recursion")
        P_k = A.T @ P_next @ A + w.Q - K.T @ Re @ K
        drift = np.max(np.abs(P_k - P_k.T))
        if drift > 1e-8 * (1.0 + np.max(np.abs(P_k))):
            raise NumericalError("recursion lost symmetry", residual=float(drift))
        P_k = _sym(P_k)
        P_seq[k] = P_k
        gains[k] = K
        res[k] = Re
        deltas[k] = delta
        P_next = P_k
    return RiccatiRun(P=P_seq, gains=gains, Re=res, deltas=deltas, feasible=feasible)


def lqr_stationary(sys: SystemLTI, Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Stabilizing solution of the discrete LQR equation by value iteration."""
    A, B = sys.A, sys.B
    P = np.asarray(Q, dtype=float).copy()
    for _ in range(_LQR_MAX_ITER):
        RB = R + B.T @ P @ B
        P_new = _sym(Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(RB, B.T @ P @ A))
        if np.max(np.abs(P_new - P)) <= 1e-13 * (1.0 + np.max(np.abs(P_new))):
            return P_new
        P = P_new
    raise NumericalError("LQR value iteration did not converge",
                         residual=float(np.max(np.abs(P_new - P))))


def _are_map(sys: SystemLTI, w: QuadWeights, P: np.ndarray) -> np.ndarray:
    """One application of P -> Q + A'(P^-1 + B R^-1 B' - g^-2 S^-1)^-1 A."""
    H = np.linalg.inv(P) + sys.B @ np.linalg.solve(w.R, sys.B.T) - np.linalg.inv(w.S) / w.gamma**2
    H = _sym(H)
    if np.min(np.linalg.eigvalsh(H)) <= 0:
        raise SynthesisError("inverse-form map lost positivity (gamma too small)")
    return _sym(w.Q + sys.A.T @ np.linalg.solve(H, sys.A))


def stationary_are(sys: SystemLTI, w: QuadWeights, damping: float = 0.5,
                   warm_start: np.ndarray | None = None) -> np.ndarray:
    """Stationary inverse-form solution P = Q + A'(P^-1 + BR^-1B' - g^-2 S^-1)^-1 A.

    Damped fixed-point iteration warm-started at the LQR solution (or the
    caller's ``warm_start``); divergence or loss of positivity is reported as
    an infeasible performance level.
    """
    if np.min(np.linalg.eigvalsh(w.R)) <= 0 or np.min(np.linalg.eigvalsh(w.S)) <= 0:
        raise ConfigError("stationary synthesis requires R and S positive definite")
    P = lqr_stationary(sys, w.Q, w.R) if warm_start is None else np.asarray(warm_start, dtype=float)
    floor = 1e-12 * (1.0 + np.max(np.abs(w.Q)))
    if np.min(np.linalg.eigvalsh(P)) <= floor:
        P = P + 10 * floor * np.eye(sys.n)
    residual = np.inf
    for _ in range(_ARE_MAX_ITER):
        target = _are_map(sys, w, P)
        residual = float(np.max(np.abs(target - P)))
        if residual <= ARE_RESIDUAL_TOL * (1.0 + np.max(np.abs(P))):
            P = target
            break
        P = _sym((1.0 - damping) * P + damping * target)
        if not np.all(np.isfinite(P)) or np.min(np.linalg.eigvalsh(P)) <= 0:
            raise SynthesisError("stationary iteration lost positive definiteness (gamma infeasible)")
    else:
        raise SynthesisError(f"stationary iteration did not converge (residual {residual:.2e}); "
                             "treating the performance level as infeasible")
    if np.min(np.linalg.eigvalsh(P)) <= 0:
        raise SynthesisError("stationary solution is not positive definite")
    return P


def negativity_test(P: np.ndarray, w: QuadWeights, sys: SystemLTI) -> bool:
    """Steady-state existence test: -g^2 S + P - PB(R + B'PB)^-1 B'P <= 0."""
    B = sys.B
    RB = w.R + B.T @ P @ B
    delta = -w.gamma**2 * w.S + P - P @ B @ np.linalg.solve(RB, B.T @ P)
    return bool(np.max(np.linalg.eigvalsh(_sym(delta))) <= PSD_TOL)


def shaping_matrix(P: np.ndarray, w: QuadWeights, sys: SystemLTI) -> np.ndarray:
    """G = (P^-1 + B R^-1 B')^-1, the quadratic weight of the pre-input cost."""
    return _sym(np.linalg.inv(np.linalg.inv(P) + sys.B @ np.linalg.solve(w.R, sys.B.T)))


def linear_central_controller(P: np.ndarray, w: QuadWeights, sys: SystemLTI) -> Controller:
    """u(x, w) = -(R + B'PB)^-1 B'P (Ax + w), the stationary full-information law."""
    A, B = sys.A, sys.B
    RB = w.R + B.T @ P @ B
    K = np.linalg.solve(RB, B.T @ P)

    def fn(x, wd):
        x = np.asarray(x, dtype=float)
        wd = np.asarray(wd, dtype=float)
        if sys.scalar:
            return -(K[0, 0]) * (A[0, 0] * x + wd)
        return -K @ (A @ x + wd)

    return Controller(fn, kind="linear", meta={"P": P, "gain": K})


def worst_case_gain(P: np.ndarray, w: QuadWeights, sys: SystemLTI) -> np.ndarray:
    """Disturbance block of the stationary combined gain: w_hat = W x.

    Rows d..d+n of the recursion gain evaluated at the stationary P.
    """
    stacked = np.vstack([sys.B.T, np.eye(sys.n)])
    Re = np.block([[w.R + sys.B.T @ P @ sys.B, sys.B.T @ P],
                   [P @ sys.B, -w.gamma**2 * w.S + P]])
    K = np.linalg.solve(Re, stacked @ P @ sys.A)
    return -K[sys.d:, :]


def gamma_search(sys: SystemLTI, w: QuadWeights, tol: float = 1e-6,
                 gamma_max: float = 1e9) -> float:
    """Bisect the infimal feasible performance level for quadratic weights.

    Feasibility means the stationary equation solves with the negativity test
    passing; feasible levels are up-closed, so bisection applies.  The LQR
    warm start is shared across probes (it does not depend on the level).
    """
    P_lqr = lqr_stationary(sys, w.Q, w.R)

    def feasible(g: float) -> bool:
        try:
            P = stationary_are(sys, w.with_gamma(g), warm_start=P_lqr)
        except (SynthesisError, NumericalError):
            return False
        return negativity_test(P, w.with_gamma(g), sys)

    hi = min(1.0, gamma_max)
    while not feasible(hi):
        hi *= 2.0
        if hi > gamma_max:
            raise ConfigError("no feasible performance level found below the search cap")
    lo = hi / 2.0
    while feasible(lo):
        lo /= 2.0
        if lo < 1e-8:
            return lo
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi

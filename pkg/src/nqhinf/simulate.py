"""Trajectory rollouts, disturbance models, performance metrics, CSV output.

Disturbance streams are deterministic functions of (kind, scale, seed), states
are stored as generated (never recomputed), and scalar certificates get a
batched rollout path that simulates thousands of runs with vectorized ops.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .certify import Certificate, worst_case_disturbance
from .system import ConfigError, Controller, DomainError, SystemLTI

STOCHASTIC_KINDS = ("white_gaussian", "uniform", "laplace")
WORST_CASE_KINDS = ("worst_case_central", "worst_case_quadratic")


@dataclass(frozen=True)
class DisturbanceModel:
    """Named disturbance source; stochastic kinds are reproducible by seed."""

    kind: str
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STOCHASTIC_KINDS + WORST_CASE_KINDS:
            raise ConfigError(f"unknown disturbance kind {self.kind!r}")

    @property
    def stochastic(self) -> bool:
        return self.kind in STOCHASTIC_KINDS

    def label(self) -> str:
        if self.stochastic:
            return f"{self.kind}_s{self.scale:g}"
        return self.kind


def noise_streams(model: DisturbanceModel, T: int, n: int, runs: int = 1) -> np.ndarray:
    """Disturbance array of shape (runs, T+1, n) for a stochastic model."""
    if not model.stochastic:
        raise ConfigError(f"{model.kind} is state-dependent, not a pre-drawn stream")
    rng = np.random.default_rng(model.seed)
    shape = (runs, T + 1, n)
    if model.kind == "white_gaussian":
        return model.scale * rng.standard_normal(shape)
    if model.kind == "uniform":
        return rng.uniform(-model.scale, model.scale, size=shape)
    return rng.laplace(0.0, model.scale, size=shape)


@dataclass
class Trajectory:
    """One closed-loop run: x_0 = 0, states stored exactly as generated."""

    xs: np.ndarray    # (T+2, n)
    us: np.ndarray    # (T+1, d)
    ws: np.ndarray    # (T+1, n)

    @property
    def horizon(self) -> int:
        return self.us.shape[0] - 1


@dataclass
class BatchRollout:
    """Vectorized scalar runs: row r is one trajectory."""

    xs: np.ndarray    # (runs, T+2)
    us: np.ndarray    # (runs, T+1)
    ws: np.ndarray    # (runs, T+1)


def _resolve_disturbance(model, cert, wc_gain):
    if model.kind == "worst_case_central":
        if cert is None:
            raise ConfigError("worst_case_central needs a certificate")
        return lambda x: np.atleast_1d(worst_case_disturbance(cert, x))
    if model.kind == "worst_case_quadratic":
        if wc_gain is None:
            raise ConfigError("worst_case_quadratic needs the baseline gain")
        W = np.atleast_2d(np.asarray(wc_gain, dtype=float))
        if W.shape == (1, 1):
            w11 = float(W[0, 0])
            return lambda x: w11 * np.asarray(x, dtype=float)
        return lambda x: W @ np.atleast_1d(x)
    return None


def rollout(sys: SystemLTI, controller: Controller, model: DisturbanceModel, T: int,
            cert: Certificate | None = None, wc_gain=None, initial_w=None) -> Trajectory:
    """Generate one closed loop over steps k = 0..T (so x runs to x_{T+1}).

    ``initial_w`` optionally overrides w_0 (used to inject initial conditions
    through the dynamics while keeping x_0 = 0).
    """
    n, d = sys.n, sys.d
    wc = _resolve_disturbance(model, cert, wc_gain)
    if wc is None:
        ws = noise_streams(model, T, n, runs=1)[0]
    else:
        ws = np.zeros((T + 1, n))
    xs = np.zeros((T + 2, n))
    us = np.zeros((T + 1, d))
    x = np.zeros(n)
    for k in range(T + 1):
        if wc is not None:
            ws[k] = wc(x)
        if k == 0 and initial_w is not None:
            ws[0] = np.atleast_1d(np.asarray(initial_w, dtype=float))
        w = ws[k]
        u = np.atleast_1d(np.asarray(controller(x if n > 1 else x[0], w if n > 1 else w[0]), dtype=float))
        if u.shape != (d,):
            u = u.reshape(d)
        us[k] = u
        x = sys.A @ x + sys.B @ u + w
        xs[k + 1] = x
    return Trajectory(xs=xs, us=us, ws=ws)


def rollout_batch(sys: SystemLTI, controller: Controller, model: DisturbanceModel, T: int,
                  runs: int, cert: Certificate | None = None, wc_gain=None,
                  initial_w=None) -> BatchRollout:
    """Vectorized rollouts for scalar plants; one row per run.

    ``initial_w`` optionally overrides w_0 per run (array of length runs).
    """
    if not sys.scalar:
        raise ConfigError("batched rollouts are implemented for scalar plants")
    a = sys.A[0, 0]
    b = sys.B[0, 0]
    wc = _resolve_disturbance(model, cert, wc_gain)
    if wc is None:
        ws = noise_streams(model, T, 1, runs=runs)[:, :, 0]
    else:
        ws = np.zeros((runs, T + 1))
    xs = np.zeros((runs, T + 2))
    us = np.zeros((runs, T + 1))
    x = np.zeros(runs)
    for k in range(T + 1):
        if wc is not None:
            ws[:, k] = np.asarray(wc(x), dtype=float).reshape(runs)
        if k == 0 and initial_w is not None:
            ws[:, 0] = np.asarray(initial_w, dtype=float).reshape(runs)
        w = ws[:, k]
        u = np.asarray(controller(x, w), dtype=float).reshape(runs)
        us[:, k] = u
        x = a * x + b * u + w
        xs[:, k + 1] = x
    return BatchRollout(xs=xs, us=us, ws=ws)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    margin: float          # sum-form performance margin (>= 0 certifies the run)
    ratio: float           # cost ratio (nan when the disturbance energy is zero)
    max_abs_x: float
    max_abs_u: float


def value_or_inf(fn, x) -> float:
    """Stage cost with the effective domain honored: +inf outside it.

    Lets trajectories from other controllers (the quadratic baseline, say) be
    scored under domain-bounded design costs they violate.
    """
    try:
        return float(np.sum(fn.value(x)))
    except DomainError:
        return float("inf")


def _stage_costs(cert: Certificate, traj: Trajectory):
    if cert.scalar:
        q = np.array([value_or_inf(cert.q, x) for x in traj.xs[:-1, 0]])
        r = np.array([value_or_inf(cert.r, u) for u in traj.us[:, 0]])
        s = np.asarray(cert.s.value(traj.ws[:, 0]), dtype=float)
        p_term = value_or_inf(cert.p, traj.xs[-1, 0])
    else:
        q = np.array([value_or_inf(cert.q, x) for x in traj.xs[:-1]])
        r = np.array([value_or_inf(cert.r, u if cert.r.dim > 1 else float(u[0])) for u in traj.us])
        s = np.array([float(cert.s.value(w)) for w in traj.ws])
        p_term = value_or_inf(cert.p, traj.xs[-1])
    return q, r, s, p_term


def metrics(traj: Trajectory, cert: Certificate) -> Metrics:
    """Performance margin and cost ratio of one completed run."""
    q, r, s, p_term = _stage_costs(cert, traj)
    g2 = cert.gamma**2
    margin = g2 * float(np.sum(s)) - float(np.sum(q)) - float(np.sum(r)) - p_term
    denom = float(np.sum(s))
    ratio = (p_term + float(np.sum(q)) + float(np.sum(r))) / denom if denom > 0 else float("nan")
    return Metrics(margin=margin, ratio=ratio,
                   max_abs_x=float(np.max(np.abs(traj.xs))),
                   max_abs_u=float(np.max(np.abs(traj.us))))


def batch_metrics(batch: BatchRollout, cert: Certificate):
    """Vectorized metrics for scalar batches: arrays (margin, ratio, max|x|, max|u|)."""
    g2 = cert.gamma**2
    q = np.asarray(cert.q.value(batch.xs[:, :-1]), dtype=float)
    r = np.asarray(cert.r.value(batch.us), dtype=float)
    s = np.asarray(cert.s.value(batch.ws), dtype=float)
    p_term = np.asarray(cert.p.value(batch.xs[:, -1]), dtype=float)
    qs, rs, ss = q.sum(axis=1), r.sum(axis=1), s.sum(axis=1)
    margin = g2 * ss - qs - rs - p_term
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ss > 0, (p_term + qs + rs) / np.where(ss > 0, ss, 1.0), np.nan)
    return margin, ratio, np.max(np.abs(batch.xs), axis=1), np.max(np.abs(batch.us), axis=1)


# ---------------------------------------------------------------------------
# CSV emission


def export_csv(traj: Trajectory, path, cert: Certificate) -> None:
    """Write `k,x_*,u_*,w_*,q,r,s,p` rows with 17-significant-digit text."""
    n = traj.xs.shape[1]
    d = traj.us.shape[1]
    cols = (["k"]
            + [f"x_{i+1}" for i in range(n)]
            + [f"u_{i+1}" for i in range(d)]
            + [f"w_{i+1}" for i in range(n)]
            + ["q", "r", "s", "p"])

    def fmt(v: float) -> str:
        return f"{v:.17g}"

    lines = [",".join(cols)]
    for k in range(traj.us.shape[0]):
        x, u, w = traj.xs[k], traj.us[k], traj.ws[k]
        qv = value_or_inf(cert.q, x if n > 1 else x[0])
        rv = value_or_inf(cert.r, u if d > 1 else u[0])
        sv = float(np.sum(cert.s.value(w if n > 1 else w[0])))
        pv = value_or_inf(cert.p, x if n > 1 else x[0])
        row = [str(k)] + [fmt(v) for v in x] + [fmt(v) for v in u] + [fmt(v) for v in w] \
            + [fmt(qv), fmt(rv), fmt(sv), fmt(pv)]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

"""Certificates for convex-cost worst-case-ratio control.

A certificate packages a plant, the three stage costs (q, r, s), the storage
function p, the difference m = p - q, the pre-input cost g (whose dual is
g* = p* + r*(B'.)), and the performance level gamma.  Validity means two
sampled conditions hold:

* the dual storage balance  p*(xi) + r*(B'xi) = m*(A'xi) + g^2 s*(xi/g^2),
* concavity of  -g^2 s(.) + g(Ax + .)  in the disturbance.

From a valid certificate the central policy u(x, w) and the worst-case
disturbance map follow in closed form, and every trajectory satisfies the
divergence decomposition of the performance margin, which this module checks
numerically step by step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convex import ConvexFn, bregman, bregman_dual_point, pair
from .system import Controller, DomainError, NumericalError, SystemLTI

RICCATI_TOL = 1e-7      # relative residual allowed in the dual storage balance
CONCAVITY_TOL = 1e-8    # largest eigenvalue allowed in the disturbance Hessian test
WC_MISMATCH_TOL = 1e-5  # formula-vs-ascent disagreement that invalidates a certificate
KINK_MARGIN = 1e-3


def signed_log_grid(radius: float, points: int = 41, decades: float = 4.0) -> np.ndarray:
    """Symmetric grid: zero plus +-logspace over `decades` below `radius`."""
    if radius <= 0:
        raise ValueError("grid radius must be positive")
    if points < 3:
        raise ValueError("grid needs at least 3 points")
    half = (points - 1) // 2
    pos = np.logspace(np.log10(radius) - decades, np.log10(radius), half)
    return np.concatenate([-pos[::-1], [0.0], pos])


def ball_samples(radius: float, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points in the radius-ball plus scaled axis points, shape (N, n)."""
    pts = rng.normal(size=(count, n))
    pts /= np.maximum(np.linalg.norm(pts, axis=1, keepdims=True), 1e-12)
    pts *= radius * rng.uniform(1e-3, 1.0, size=(count, 1)) ** (1.0 / n)
    axes = radius * np.vstack([np.eye(n), -np.eye(n), 0.1 * np.eye(n), np.zeros((1, n))])
    return np.vstack([pts, axes])


@dataclass
class Certificate:
    """A (p, m, g) triple with its costs, level, and verification grids."""

    system: SystemLTI
    q: ConvexFn
    r: ConvexFn
    s: ConvexFn
    p: ConvexFn
    m: ConvexFn
    g: ConvexFn
    gamma: float
    xi_grid: np.ndarray
    x_grid: np.ndarray
    w_grid: np.ndarray
    tol_riccati: float = RICCATI_TOL
    tol_concavity: float = CONCAVITY_TOL
    meta: dict = field(default_factory=dict)

    @property
    def scalar(self) -> bool:
        return self.system.scalar


# ---------------------------------------------------------------------------
# pointwise condition checks


def riccati_residual(cert: Certificate, xi) -> float:
    """Absolute residual of p*(xi) + r*(B'xi) - m*(A'xi) - g^2 s*(xi/g^2)."""
    lhs, rhs = riccati_sides(cert, xi)
    return float(np.max(np.abs(lhs - rhs)))


def riccati_sides(cert: Certificate, xi):
    """Both sides of the dual storage balance (for relative tolerances)."""
    g2 = cert.gamma**2
    if cert.scalar:
        a = cert.system.A[0, 0]
        b = cert.system.B[0, 0]
        xi = np.asarray(xi, dtype=float)
        lhs = cert.p.conjugate_value(xi) + cert.r.conjugate_value(b * xi)
        rhs = cert.m.conjugate_value(a * xi) + g2 * cert.s.conjugate_value(xi / g2)
        return lhs, rhs
    xi = np.asarray(xi, dtype=float)
    lhs = float(np.sum(cert.p.conjugate_value(xi))) \
        + float(np.sum(cert.r.conjugate_value(cert.system.B.T @ xi)))
    rhs = float(np.sum(cert.m.conjugate_value(cert.system.A.T @ xi))) \
        + g2 * float(np.sum(cert.s.conjugate_value(xi / g2)))
    return lhs, rhs


def concavity_margin(cert: Certificate, x, w_points) -> float:
    """max over the samples of lambda_max(hess g(Ax+w) - g^2 hess s(w)).

    Nonpositive (within tolerance) means the disturbance objective is concave
    at the sampled points.  Samples should stay clear of Hessian kinks; use
    `concavity_margin_midpoint` next to them.
    """
    g2 = cert.gamma**2
    if cert.scalar:
        a = cert.system.A[0, 0]
        x = np.asarray(x, dtype=float)
        w = np.asarray(w_points, dtype=float)
        vals = cert.g.hessian(a * x + w) - g2 * cert.s.hessian(w)
        return float(np.max(vals))
    worst = -np.inf
    Ax = cert.system.A @ np.asarray(x, dtype=float)
    for w in np.atleast_2d(w_points):
        H = np.atleast_2d(cert.g.hessian(Ax + w)) - g2 * np.atleast_2d(cert.s.hessian(w))
        worst = max(worst, float(np.max(np.linalg.eigvalsh(0.5 * (H + H.T)))))
    return worst


def concavity_margin_midpoint(cert: Certificate, x, w_pairs) -> float:
    """First-order concavity test h((w1+w2)/2) >= (h(w1)+h(w2))/2.

    Returns the worst violation (positive = concavity broken); value-only, so
    it is safe on kinked costs.
    """
    g2 = cert.gamma**2

    def h(w):
        if cert.scalar:
            a = cert.system.A[0, 0]
            return -g2 * cert.s.value(w) + cert.g.value(a * np.asarray(x, dtype=float) + w)
        return -g2 * cert.s.value(w) + cert.g.value(cert.system.A @ np.asarray(x, dtype=float) + w)

    worst = -np.inf
    for w1, w2 in w_pairs:
        viol = 0.5 * (h(w1) + h(w2)) - h(0.5 * (np.asarray(w1) + np.asarray(w2)))
        worst = max(worst, float(np.max(viol)))
    return worst


# ---------------------------------------------------------------------------
# policies


def central_controller(cert: Certificate) -> Controller:
    """u(x, w) = -grad r*(B' grad g(Ax + w)); elementwise for scalar plants."""
    r, g = cert.r, cert.g
    if cert.scalar:
        a = cert.system.A[0, 0]
        b = cert.system.B[0, 0]

        def fn(x, w):
            z = a * np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
            return -r.conjugate_gradient(b * g.gradient(z))
    else:
        A, B = cert.system.A, cert.system.B

        def fn(x, w):
            z = A @ np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
            return -np.atleast_1d(r.conjugate_gradient(B.T @ np.atleast_1d(g.gradient(z))))

    return Controller(fn, kind="central", meta={"gamma": cert.gamma})


def worst_case_disturbance(cert: Certificate, x):
    """w_hat(x) = grad s*(g^-2 A^-T grad m(x)), the disturbance attaining
    the maximum of -g^2 s(.) + g(Ax + .)."""
    g2 = cert.gamma**2
    if cert.scalar:
        a = cert.system.A[0, 0]
        arg = cert.m.gradient(np.asarray(x, dtype=float)) / (g2 * a)
        return cert.s.conjugate_gradient(arg)
    arg = cert.system.a_inv_t() @ np.atleast_1d(cert.m.gradient(np.asarray(x, dtype=float))) / g2
    return np.atleast_1d(cert.s.conjugate_gradient(arg))


def stationarity_residuals(cert: Certificate, x, w) -> tuple[float, float]:
    """Residuals of the two central-policy identities at (x, w):

    1. grad p(Ax + Bu* + w) - grad g(Ax + w)
    2. grad r(u*) + B' grad p(Ax + Bu* + w)   (KKT slack when u* is clipped)
    """
    r, g, p = cert.r, cert.g, cert.p
    if cert.scalar:
        a = cert.system.A[0, 0]
        b = cert.system.B[0, 0]
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        z = a * x + w
        xi = g.gradient(z)
        u = -r.conjugate_gradient(b * xi)
        xp = a * x + b * u + w
        res1 = float(np.max(np.abs(p.gradient(xp) - xi)))
        stat = r.gradient(u) + b * p.gradient(xp)
        if r.domain_radius is not None:
            t = r.domain_radius
            at_hi = u >= t * (1 - 1e-12)
            at_lo = u <= -t * (1 - 1e-12)
            viol = np.where(at_hi, np.maximum(stat, 0.0),
                            np.where(at_lo, np.maximum(-stat, 0.0), np.abs(stat)))
        else:
            viol = np.abs(stat)
        return res1, float(np.max(viol))
    A, B = cert.system.A, cert.system.B
    z = A @ np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
    xi = np.atleast_1d(g.gradient(z))
    u = -np.atleast_1d(r.conjugate_gradient(B.T @ xi))
    xp = A @ np.asarray(x, dtype=float) + B @ u + np.asarray(w, dtype=float)
    res1 = float(np.max(np.abs(np.atleast_1d(p.gradient(xp)) - xi)))
    res2 = float(np.max(np.abs(np.atleast_1d(r.gradient(u)) + B.T @ np.atleast_1d(p.gradient(xp)))))
    return res1, res2


def lyapunov_slack(cert: Certificate, x, w) -> float:
    """[g^2 s(w) - r(u*) - q(x)] - [p(Ax+Bu*+w) - p(x)]; >= 0 on valid loops."""
    ctrl = central_controller(cert)
    u = ctrl(x, w)
    if cert.scalar:
        a = cert.system.A[0, 0]
        b = cert.system.B[0, 0]
        xp = a * np.asarray(x, dtype=float) + b * u + np.asarray(w, dtype=float)
    else:
        xp = cert.system.A @ np.asarray(x, dtype=float) + cert.system.B @ np.atleast_1d(u) + np.asarray(w, dtype=float)
    g2 = cert.gamma**2
    rhs = g2 * cert.s.value(w) - cert.r.value(u) - cert.q.value(x)
    lhs = cert.p.value(xp) - cert.p.value(x)
    return float(np.min(rhs - lhs)) if cert.scalar else float(rhs - lhs)


# ---------------------------------------------------------------------------
# trajectory functionals


@dataclass
class IdentityGap:
    """Agreement between the sum-form and divergence-form margins."""

    total: float
    max_step: float
    margin_sum_form: float       # sum of g^2 s - q - r minus terminal storage
    margin_divergence_form: float


def trajectory_margin(cert: Certificate, xs, us, ws) -> float:
    """J = sum_k [g^2 s(w_k) - q(x_k) - r(u_k)] - p(x_{T+1}); >= 0 certifies."""
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    ws = np.asarray(ws, dtype=float)
    g2 = cert.gamma**2
    total = 0.0
    for k in range(len(us)):
        total += g2 * float(np.sum(cert.s.value(ws[k]))) - float(np.sum(cert.q.value(xs[k]))) \
            - float(np.sum(cert.r.value(us[k])))
    return total - float(np.sum(cert.p.value(xs[-1])))


def bregman_identity_gap(cert: Certificate, traj) -> IdentityGap:
    """Per-step agreement between the two margin forms.

    The divergence form measures deviations from the central policy and its
    worst-case disturbance; anchor (sub)gradients are taken at the dual points
    supplied by the construction, so boundary-clipped anchors are handled
    exactly.
    """
    xs, us, ws = np.asarray(traj.xs, dtype=float), np.asarray(traj.us, dtype=float), np.asarray(traj.ws, dtype=float)
    if np.max(np.abs(xs[0])) > 0:
        raise DomainError("trajectory identities require x_0 = 0")
    sysm = cert.system
    g2 = cert.gamma**2
    scalar = cert.scalar
    a = sysm.A[0, 0] if scalar else None
    b = sysm.B[0, 0] if scalar else None
    total_lhs = 0.0
    total_rhs = 0.0
    max_step = 0.0
    for k in range(len(us)):
        x, u, w, xplus = xs[k], us[k], ws[k], xs[k + 1]
        if scalar:
            z = a * x + w
            xi = cert.g.gradient(z)
            ustar = -cert.r.conjugate_gradient(b * xi)
            xps = a * x + b * ustar + w
            eta = -b * xi
        else:
            z = sysm.A @ x + w
            xi = np.atleast_1d(cert.g.gradient(z))
            ustar = -np.atleast_1d(cert.r.conjugate_gradient(sysm.B.T @ xi))
            xps = sysm.A @ x + sysm.B @ ustar + w
            eta = -sysm.B.T @ xi
        what = worst_case_disturbance(cert, x)
        zhat = (a * x + what) if scalar else sysm.A @ x + what
        sigma = g2 * cert.s.gradient(what)
        d_s = g2 * float(np.sum(bregman(cert.s, w, what)))
        d_g = float(np.sum(bregman_dual_point(cert.g, z, zhat, sigma)))
        d_r = float(np.sum(bregman_dual_point(cert.r, u, ustar, eta)))
        d_p = float(np.sum(bregman_dual_point(cert.p, xplus, xps, xi)))
        rhs = d_s - d_g - d_r - d_p
        lhs = g2 * float(np.sum(cert.s.value(w))) - float(np.sum(cert.q.value(x))) \
            - float(np.sum(cert.r.value(u))) + float(np.sum(cert.p.value(x))) - float(np.sum(cert.p.value(xplus)))
        max_step = max(max_step, abs(lhs - rhs))
        total_lhs += lhs
        total_rhs += rhs
    return IdentityGap(total=abs(total_lhs - total_rhs), max_step=max_step,
                       margin_sum_form=total_lhs, margin_divergence_form=total_rhs)


def performance_ratio(traj, cert: Certificate) -> float:
    """J_ratio = [p(x_{T+1}) + sum(q + r)] / sum(s); certified loops stay <= gamma^2."""
    xs, us, ws = np.asarray(traj.xs, dtype=float), np.asarray(traj.us, dtype=float), np.asarray(traj.ws, dtype=float)
    denom = 0.0
    num = float(np.sum(cert.p.value(xs[-1])))
    for k in range(len(us)):
        num += float(np.sum(cert.q.value(xs[k]))) + float(np.sum(cert.r.value(us[k])))
        denom += float(np.sum(cert.s.value(ws[k])))
    if denom <= 0.0:
        raise DomainError("zero disturbance energy: the cost ratio is undefined "
                          "(use the storage-decrease check instead)")
    return num / denom


# ---------------------------------------------------------------------------
# whole-certificate verification


@dataclass
class VerifyReport:
    riccati_max_abs: float
    riccati_max_rel: float
    concavity_margin: float
    concavity_midpoint_margin: float
    wc_arg_mismatch: float
    wc_value_gap: float
    p_zero_value: float
    p_min_curvature: float
    assumption_violations: list
    passed: bool

    def summary(self) -> str:
        lines = [
            f"storage-balance residual: max abs {self.riccati_max_abs:.3e}, max rel {self.riccati_max_rel:.3e}",
            f"disturbance concavity margin: {self.concavity_margin:.3e} (midpoint {self.concavity_midpoint_margin:.3e})",
            f"worst-case map cross-check: arg {self.wc_arg_mismatch:.3e}, value {self.wc_value_gap:.3e}",
            f"storage at origin {self.p_zero_value:.3e}, min curvature {self.p_min_curvature:.3e}",
            f"verdict: {'VALID' if self.passed else 'INVALID'}",
        ]
        if self.assumption_violations:
            lines.insert(-1, "assumption violations: " + "; ".join(self.assumption_violations))
        return "\n".join(lines)


def check_cost_assumptions(f: ConvexFn, name: str, points) -> list:
    """Sampled checks of the standing cost assumptions: even, zero value and
    gradient at the origin, positive elsewhere."""
    out = []
    zero = np.zeros(f.dim) if f.dim > 1 else 0.0
    if abs(float(np.sum(f.value(zero)))) > 1e-10:
        out.append(f"{name}(0) != 0")
    if float(np.max(np.abs(f.gradient(zero)))) > 1e-10:
        out.append(f"grad {name}(0) != 0")
    for x in np.atleast_1d(points) if f.dim == 1 else np.atleast_2d(points):
        try:
            v1, v2 = f.value(x), f.value(-x)
        except DomainError:
            continue
        scale = 1.0 + abs(float(np.sum(v1)))
        if abs(float(np.sum(v1)) - float(np.sum(v2))) > 1e-9 * scale:
            out.append(f"{name} is not even")
            break
        if float(np.min(v1)) < -1e-12:
            out.append(f"{name} takes negative values")
            break
    return out


def _refine_max(cert: Certificate, x: float, w0: float, radius: float) -> float:
    """Scalar ascent refinement of argmax_w -g^2 s(w) + g(ax + w) near w0."""
    a = cert.system.A[0, 0]
    g2 = cert.gamma**2

    def dphi(w):
        return -g2 * cert.s.gradient(w) + cert.g.gradient(a * x + w)

    lo, hi = w0 - radius, w0 + radius
    if cert.s.domain_radius is not None:
        lo = max(lo, -cert.s.domain_radius)
        hi = min(hi, cert.s.domain_radius)
    dlo, dhi = dphi(lo), dphi(hi)
    if dlo < 0 or dhi > 0:
        return w0  # derivative does not bracket a root locally; keep the grid point
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dphi(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * (1.0 + abs(lo) + abs(hi)):
            break
    return 0.5 * (lo + hi)


def cross_validate_worst_case(cert: Certificate, xs, w_radius: float, grid_step: float = 1e-3):
    """Compare the closed-form worst-case map against grid search + ascent.

    Returns (max argument mismatch, max value gap).  Scalar plants only.
    """
    if not cert.scalar:
        return 0.0, 0.0
    a = cert.system.A[0, 0]
    g2 = cert.gamma**2
    # the search range must cover the closed-form candidates, else the grid
    # oracle saturates at its own boundary
    cand = np.max(np.abs([float(np.asarray(worst_case_disturbance(cert, float(x))))
                          for x in np.atleast_1d(xs)])) if np.size(xs) else 0.0
    w_radius = max(w_radius, 2.0 * cand + 1.0)
    wgrid = np.arange(-w_radius, w_radius + grid_step, grid_step)
    if cert.s.domain_radius is not None:
        wgrid = wgrid[np.abs(wgrid) <= cert.s.domain_radius]
    s_vals = g2 * cert.s.value(wgrid)
    arg_mismatch = 0.0
    value_gap = 0.0
    for x in np.atleast_1d(xs):
        obj = -s_vals + cert.g.value(a * x + wgrid)
        w0 = float(wgrid[int(np.argmax(obj))])
        w_ref = _refine_max(cert, float(x), w0, 2 * grid_step)
        w_hat = float(np.asarray(worst_case_disturbance(cert, float(x))))
        arg_mismatch = max(arg_mismatch, abs(w_hat - w_ref))
        v_hat = -g2 * float(cert.s.value(w_hat)) + float(cert.g.value(a * x + w_hat))
        v_ref = -g2 * float(cert.s.value(w_ref)) + float(cert.g.value(a * x + w_ref))
        value_gap = max(value_gap, v_ref - v_hat)
    return arg_mismatch, value_gap


def verify_certificate(cert: Certificate, grid_scale: float = 1.0,
                       rng: np.random.Generator | None = None) -> VerifyReport:
    """Re-check every certificate condition on (optionally rescaled) grids."""
    rng = rng or np.random.default_rng(0)
    xi_grid = cert.xi_grid * grid_scale
    x_grid = cert.x_grid * grid_scale
    w_grid = cert.w_grid * grid_scale

    max_abs = 0.0
    max_rel = 0.0
    for xi in (xi_grid if not cert.scalar else np.atleast_1d(xi_grid)):
        lhs, rhs = riccati_sides(cert, xi)
        err = float(np.max(np.abs(lhs - rhs)))
        max_abs = max(max_abs, err)
        max_rel = max(max_rel, err / (1.0 + float(np.max(np.abs(lhs)))))

    # Hessian-based concavity away from kinks, midpoint test next to them.
    breaks = np.concatenate([cert.g.hessian_breaks(), cert.s.hessian_breaks()])
    margin = -np.inf
    mid_margin = -np.inf
    if cert.scalar:
        a = cert.system.A[0, 0]
        for x in np.atleast_1d(x_grid):
            w = np.asarray(w_grid, dtype=float)
            keep = np.ones(w.shape, dtype=bool)
            if len(breaks):
                keep &= np.min(np.abs(np.abs(w)[:, None] - breaks[None, :]), axis=1) > KINK_MARGIN
                keep &= np.min(np.abs(np.abs(a * x + w)[:, None] - breaks[None, :]), axis=1) > KINK_MARGIN
            if np.any(keep):
                margin = max(margin, concavity_margin(cert, x, w[keep]))
            if len(breaks):
                pairs = [(wb - KINK_MARGIN, wb + KINK_MARGIN) for wb in breaks if abs(wb) <= np.max(np.abs(w))]
                if pairs:
                    mid_margin = max(mid_margin, concavity_margin_midpoint(cert, x, pairs))
    else:
        for x in np.atleast_2d(x_grid):
            margin = max(margin, concavity_margin(cert, x, w_grid))
    if mid_margin == -np.inf:
        mid_margin = 0.0

    xs_wc = np.atleast_1d(x_grid)[:: max(1, len(np.atleast_1d(x_grid)) // 9)] if cert.scalar else []
    w_radius = float(np.max(np.abs(w_grid))) if np.size(w_grid) else 1.0
    wc_arg, wc_val = cross_validate_worst_case(cert, xs_wc, w_radius) if cert.scalar else (0.0, 0.0)

    p0 = abs(float(np.sum(cert.p.value(np.zeros(cert.system.n) if not cert.scalar else 0.0))))
    if cert.scalar:
        xs_c = np.atleast_1d(x_grid)
        keep = np.ones(xs_c.shape, dtype=bool)
        pb = cert.p.hessian_breaks()
        if len(pb):
            keep &= np.min(np.abs(np.abs(xs_c)[:, None] - pb[None, :]), axis=1) > KINK_MARGIN
        if cert.p.domain_radius is not None:
            keep &= np.abs(xs_c) < cert.p.domain_radius
        p_curv = float(np.min(cert.p.hessian(xs_c[keep]))) if np.any(keep) else np.nan
    else:
        p_curv = np.inf
        for x in np.atleast_2d(x_grid):
            p_curv = min(p_curv, float(np.min(np.linalg.eigvalsh(np.atleast_2d(cert.p.hessian(x))))))

    violations = []
    sample_pts = (np.atleast_1d(x_grid)[:7] if cert.scalar else np.atleast_2d(x_grid)[:7])
    for f, name in ((cert.q, "q"), (cert.r, "r"), (cert.s, "s")):
        pts = sample_pts if f.dim == cert.system.n or cert.scalar else ball_samples(1.0, f.dim, 5, rng)
        if f.domain_radius is not None:
            pts = np.clip(pts, -0.9 * f.domain_radius, 0.9 * f.domain_radius)
        violations += check_cost_assumptions(f, name, pts)

    passed = (
        max_rel <= cert.tol_riccati
        and margin <= cert.tol_concavity
        and mid_margin <= 1e-9
        and wc_arg <= WC_MISMATCH_TOL
        and p0 <= 1e-9
        and p_curv > 0
        and not violations
    )
    return VerifyReport(
        riccati_max_abs=max_abs,
        riccati_max_rel=max_rel,
        concavity_margin=margin,
        concavity_midpoint_margin=mid_margin,
        wc_arg_mismatch=wc_arg,
        wc_value_gap=wc_val,
        p_zero_value=p0,
        p_min_curvature=p_curv,
        assumption_violations=violations,
        passed=passed,
    )

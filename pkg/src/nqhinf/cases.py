"""Closed-form scalar designs and the three named presets.

Each case study pairs the generic design machinery with explicit closed forms
(piecewise-quadratic induced costs, branch-form controllers) so the two routes
can cross-validate each other.  The presets `fig1`/`fig2`/`fig3` expose the
exact parameter sets used by the simulation harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import Certificate, verify_certificate
from .convex import (
    BoundedQuadraticFn,
    PiecewiseQuadraticFn,
    QuadraticFn,
)
from .design import DesignQR, DesignQS, DesignRS, GridSpec, build_qr, check_conditions_qs, check_conditions_rs
from .system import Controller, SynthesisError, SystemLTI


def shaping_gain(a: float, s: float, m: float, gamma: float) -> float:
    """v = g^2 m s a^2 / (m + g^2 a^2 s), the scalar pre-input curvature scale."""
    g2 = gamma**2
    return g2 * m * s * a**2 / (m + g2 * a**2 * s)


@dataclass
class CaseStudy:
    name: str
    kind: str
    system: SystemLTI
    certificate: Certificate
    controller: Controller           # closed-form law (matches the generic central law)
    params: dict
    envelope: float
    sim: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return self.certificate.gamma


def _scalar_system(a: float, b: float) -> SystemLTI:
    return SystemLTI(np.array([[a]]), np.array([[b]]))


def _certificate(sys, q, r, s, p, m, g, gamma, envelope, meta) -> Certificate:
    grids = GridSpec(envelope=envelope)
    grid = grids.scalar_grid()
    cert = Certificate(system=sys, q=q, r=r, s=s, p=p, m=m, g=g, gamma=gamma,
                       xi_grid=grid, x_grid=grid, w_grid=grid, meta=meta)
    report = verify_certificate(cert)
    cert.meta["verify"] = report
    if not report.passed:
        raise SynthesisError(f"case study failed certification:\n{report.summary()}")
    return cert


# ---------------------------------------------------------------------------
# input-limited design (rs route): r = u^2 on |u| < t, s = s w^2, m = m x^2


def input_limited(a: float, b: float, s: float, m: float, t: float, gamma: float,
                  envelope: float = 2.0, name: str = "input_limited"):
    """Hard per-step input budget t; the clipped central law never exceeds it.

    Returns (induced state cost q, closed-form controller, case study).
    """
    if min(a, b, s, m, t, gamma) <= 0:
        raise SynthesisError("parameters must be positive")
    sys = _scalar_system(a, b)
    v = shaping_gain(a, s, m, gamma)
    denom = a**2 - b**2 * v
    if denom <= 0 or v / denom <= m:
        raise SynthesisError("infeasible (m, gamma): induced state cost is not convex")
    r = BoundedQuadraticFn(t)
    s_fn = QuadraticFn([[s]])
    m_fn = QuadraticFn([[m]])
    g_fn = QuadraticFn([[v / a**2]])

    cp = v / denom                      # storage curvature scale inside the linear region
    x0 = a**2 * t / (v * b) - t * b     # where the input saturates
    outer = (v / a**2, 2.0 * v * t * b / a**2, v * t**2 * b**2 / a**2 - t**2)
    p = PiecewiseQuadraticFn([(0.0, cp, 0.0, 0.0), (x0, *outer)])
    q = PiecewiseQuadraticFn([(0.0, cp - m, 0.0, 0.0), (x0, outer[0] - m, outer[1], outer[2])])

    rep = check_conditions_rs(DesignRS(r, s_fn, np.array([[m]]), gamma), sys, GridSpec(envelope=envelope))
    if not rep.passed:
        raise SynthesisError("input-limited design conditions fail:\n" + rep.summary())

    params = {"a": a, "b": b, "s": s, "m": m, "t": t, "gamma": gamma, "v": v}
    meta = {"mode": "preset", "preset": name, "kind": "input_limited",
            "params": {k: params[k] for k in ("a", "b", "s", "m", "t", "gamma")},
            "conditions": rep}
    cert = _certificate(sys, q, r, s_fn, p, m_fn, g_fn, gamma, envelope, meta)

    gain = b * v / a**2

    def law(x, w):
        z = a * np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
        return -np.clip(gain * z, -t, t)

    ctrl = Controller(law, kind="case:input_limited", meta=params)
    return q, ctrl, CaseStudy(name, "input_limited", sys, cert, ctrl, params, envelope)


# ---------------------------------------------------------------------------
# safety design (qs route): q = x^2 on |x| < t, s = s w^2, m = m x^2


def safety(a: float, b: float, s: float, m: float, t: float, gamma: float,
           envelope: float = 1.0, name: str = "safety"):
    """Hard state envelope |x| <= t; the induced input cost pays for clamping.

    Returns (induced input cost r, closed-form controller, case study).
    """
    if min(b, s, m, t, gamma) <= 0 or a == 0:
        raise SynthesisError("parameters must be positive (a nonzero)")
    sys = _scalar_system(a, b)
    v = shaping_gain(a, s, m, gamma)
    denom = (1.0 + m) * a**2 - v
    if denom <= 0:
        raise SynthesisError("infeasible (m, gamma): induced input cost is not convex")
    q = BoundedQuadraticFn(t, 1.0)
    p = BoundedQuadraticFn(t, 1.0 + m)
    s_fn = QuadraticFn([[s]])
    m_fn = QuadraticFn([[m]])
    g_fn = QuadraticFn([[v / a**2]])

    cr = b**2 * v * (1.0 + m) / denom
    u0 = (1.0 + m) * t * a**2 / (v * b) - t / b
    outer = (v * b**2 / a**2, 2.0 * v * b * t / a**2, v * t**2 / a**2 - (1.0 + m) * t**2)
    r = PiecewiseQuadraticFn([(0.0, cr, 0.0, 0.0), (u0, *outer)])

    rep = check_conditions_qs(DesignQS(q, s_fn, np.array([[m]]), gamma), sys, GridSpec(envelope=envelope))
    if not rep.passed:
        raise SynthesisError("safety design conditions fail:\n" + rep.summary())

    params = {"a": a, "b": b, "s": s, "m": m, "t": t, "gamma": gamma, "v": v}
    meta = {"mode": "preset", "preset": name, "kind": "safety",
            "params": {k: params[k] for k in ("a", "b", "s", "m", "t", "gamma")},
            "conditions": rep}
    cert = _certificate(sys, q, r, s_fn, p, m_fn, g_fn, gamma, envelope, meta)

    inner_gain = (a**2 - v / (1.0 + m)) / (a**2 * b)   # u = -inner_gain * z on the inner branch
    threshold = (1.0 + m) * t * a**2 / v               # |z| <= threshold keeps the state strictly inside

    def law(x, w):
        z = a * np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
        inner = -inner_gain * z
        clamp = (-z + t * np.sign(z)) / b
        return np.where(np.abs(z) <= threshold, inner, clamp)

    ctrl = Controller(law, kind="case:safety", meta=params)
    return r, ctrl, CaseStudy(name, "safety", sys, cert, ctrl, params, envelope)


def safety_branch_readings(cs: CaseStudy, x, w) -> dict:
    """Both printed readings of the clamped branch: sign of the state alone
    versus sign of the disturbance-shifted state x + w/a.  The generic central
    law matches the shifted reading (the other breaks continuity across 0)."""
    a = cs.params["a"]
    b = cs.params["b"]
    t = cs.params["t"]
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    zeta = x + w / a
    return {
        "sign_state": -(a / b) * zeta + (t / b) * np.sign(x),
        "sign_shifted": -(a / b) * zeta + (t / b) * np.sign(zeta),
    }


# ---------------------------------------------------------------------------
# exponential design (qr route): q = x^2, r = exp|u| - |u| - 1, g = G x^2


def exponential(a: float, b: float, g: float, gamma: float,
                envelope: float = 2.0, name: str = "exponential"):
    """Heavy exponential input penalty with a logarithmic central law.

    The disturbance cost and storage difference have no closed forms; they are
    induced numerically by the qr route and validated on grids only.
    Returns (controller, case study).
    """
    sys = _scalar_system(a, b)
    from .convex import ExpAbsFn  # local import keeps the module list tidy

    design = DesignQR(QuadraticFn([[1.0]]), ExpAbsFn(), np.array([[g]]), gamma)
    cert = build_qr(design, sys, GridSpec(envelope=envelope))
    params = {"a": a, "b": b, "g": g, "gamma": gamma}
    # mode stays "qr" so persistence re-derives s and m from the recipe
    cert.meta.update({"preset": name, "kind": "exponential", "params": params})

    def law(x, w):
        z = a * np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
        y = 2.0 * b * g * z
        return -np.sign(y) * np.log1p(np.abs(y))

    ctrl = Controller(law, kind="case:exponential", meta=params)
    return ctrl, CaseStudy(name, "exponential", sys, cert, ctrl, params, envelope)


# ---------------------------------------------------------------------------
# named presets (parameters of the three simulation studies)


_PRESET_SIM = {
    "fig1": {"T": 100, "noise_scales": [0.1, 0.3, 1.0],
             "noise_kinds": ["white_gaussian", "uniform", "laplace"],
             "extra_models": ["worst_case_central", "worst_case_quadratic"],
             "plot_models": ["worst_case_quadratic", "worst_case_central"],
             "overlay": {"input": 0.1}},
    "fig2": {"T": 100, "noise_scales": [0.05, 0.1, 0.3],
             "noise_kinds": ["white_gaussian", "uniform", "laplace"],
             "extra_models": ["worst_case_central", "worst_case_quadratic"],
             "plot_models": ["white_gaussian", "uniform", "laplace"],
             "overlay": {"state": 0.2}},
    "fig3": {"T": 100, "noise_scales": [0.1, 0.3, 1.0],
             "noise_kinds": ["white_gaussian", "uniform", "laplace"],
             "extra_models": ["worst_case_central", "worst_case_quadratic"],
             "plot_models": ["white_gaussian", "uniform", "laplace"],
             "overlay": {}},
}


def preset(name: str) -> CaseStudy:
    """Build one of the named case studies with its exact parameters."""
    if name == "fig1":
        _, _, cs = input_limited(a=0.6, b=1.0, s=1.0, m=0.11, t=0.1, gamma=1.32, name="fig1")
    elif name == "fig2":
        _, _, cs = safety(a=1.1, b=1.0, s=1.0, m=0.2, t=0.2, gamma=1.32, name="fig2")
    elif name == "fig3":
        _, cs = exponential(a=0.9, b=0.1, g=15.0, gamma=7.45, name="fig3")
    else:
        raise SynthesisError(f"unknown preset {name!r} (expected fig1|fig2|fig3)")
    cs.sim = dict(_PRESET_SIM[name])
    return cs


PRESET_NAMES = tuple(_PRESET_SIM)

"""Case studies: closed forms vs the generic machinery, structural bounds."""

import numpy as np
import pytest

from nqhinf.cases import (
    exponential,
    input_limited,
    preset,
    safety,
    safety_branch_readings,
    shaping_gain,
)
from nqhinf.certify import central_controller, trajectory_margin
from nqhinf.riccati import QuadWeights, gamma_search
from nqhinf.simulate import DisturbanceModel, rollout
from nqhinf.system import SynthesisError


def test_shaping_gain_value():
    v = shaping_gain(0.6, 1.0, 0.11, 1.32)
    assert v == pytest.approx(0.09359, abs=1e-5)
    # defining relation: 1/v = 1/(g^2 s a^2) + 1/m
    assert 1.0 / v == pytest.approx(1.0 / (1.32**2 * 0.36) + 1.0 / 0.11, rel=1e-14)


def test_closed_form_matches_generic_controller(fig1, fig2, fig3):
    rng = np.random.default_rng(0)
    for cs in (fig1, fig2, fig3):
        ctrl = central_controller(cs.certificate)
        xs = rng.uniform(-cs.envelope, cs.envelope, 10_000)
        ws = rng.uniform(-cs.envelope, cs.envelope, 10_000)
        if cs.kind == "safety":
            xs = np.clip(xs, -0.199, 0.199)
        diff = np.max(np.abs(np.asarray(ctrl(xs, ws)) - np.asarray(cs.controller(xs, ws))))
        assert diff < 1e-8, cs.name


def test_input_limit_is_structural(fig1):
    rng = np.random.default_rng(1)
    xs = rng.uniform(-100, 100, 5000)
    ws = rng.uniform(-100, 100, 5000)
    u = np.asarray(fig1.controller(xs, ws))
    assert np.max(np.abs(u)) <= 0.1


def test_input_limited_zero_point(fig1):
    assert float(fig1.controller(0.0, 0.0)) == 0.0


def test_input_limited_linear_region_gain(fig1):
    # inside the linear region the law is -(b v / a) x at w = 0
    v = fig1.params["v"]
    a, b = fig1.params["a"], fig1.params["b"]
    for x in (0.05, -0.1, 0.2):
        assert float(fig1.controller(x, 0.0)) == pytest.approx(-(b * v / a) * x, abs=1e-12)
    # and saturates exactly past |x| = a t / (b v)
    x_sat = a * fig1.params["t"] / (b * v)
    assert abs(float(fig1.controller(1.01 * x_sat, 0.0))) == pytest.approx(0.1, abs=1e-15)


def test_safety_branch_continuity(fig2):
    # both branch formulas agree at the switching threshold
    pr = fig2.params
    v, a, b, m, t = pr["v"], pr["a"], pr["b"], pr["m"], pr["t"]
    z_star = (1.0 + m) * t * a**2 / v
    inner_gain = (a**2 - v / (1.0 + m)) / (a**2 * b)
    for z in (z_star, -z_star):
        inner = -inner_gain * z
        clamp = (-z + t * np.sign(z)) / b
        assert inner == pytest.approx(clamp, abs=1e-9)


def test_safety_envelope_held_under_noise(fig2):
    ctrl = central_controller(fig2.certificate)
    for kind in ("white_gaussian", "uniform", "laplace"):
        for seed in (0, 1, 2):
            tr = rollout(fig2.system, ctrl, DisturbanceModel(kind, 0.3, seed), T=200,
                         cert=fig2.certificate)
            assert np.max(np.abs(tr.xs)) <= 0.2 + 1e-12


def test_safety_branch_reading_resolution(fig2):
    # outer branch engaged with x and x + w/a of opposite signs: only the
    # shifted-sign reading matches the generic law
    ctrl = central_controller(fig2.certificate)
    x, w = 0.15, -3.0
    readings = safety_branch_readings(fig2, x, w)
    u = float(ctrl(x, w))
    assert u == pytest.approx(float(readings["sign_shifted"]), abs=1e-12)
    assert abs(u - float(readings["sign_state"])) > 0.1


def test_exponential_controller_values(fig3):
    assert float(fig3.controller(1.0, 0.0)) == pytest.approx(-1.30833, abs=1e-5)
    assert float(fig3.controller(1.0, 0.0)) == pytest.approx(-np.log(3.7), abs=1e-10)
    assert float(fig3.controller(0.0, 0.0)) == 0.0


def test_exponential_odd_symmetry(fig3):
    rng = np.random.default_rng(2)
    xs = rng.uniform(-3, 3, 200)
    ws = rng.uniform(-3, 3, 200)
    u1 = np.asarray(fig3.controller(xs, ws))
    u2 = np.asarray(fig3.controller(-xs, -ws))
    np.testing.assert_allclose(u2, -u1, atol=1e-14)


def test_margins_nonnegative_all_presets(fig1, fig2, fig3):
    for cs in (fig1, fig2, fig3):
        ctrl = central_controller(cs.certificate)
        for kind in ("white_gaussian", "uniform", "laplace"):
            tr = rollout(cs.system, ctrl, DisturbanceModel(kind, 0.3, 5), T=50,
                         cert=cs.certificate)
            assert trajectory_margin(cs.certificate, tr.xs, tr.us, tr.ws) >= -1e-7, cs.name


def test_levels_exceed_quadratic_infimum(fig1, fig2, fig3):
    for cs in (fig1, fig2, fig3):
        w = QuadWeights(np.eye(1), np.eye(1), np.eye(1), 1.0)
        ginf = gamma_search(cs.system, w, tol=1e-3)
        assert cs.gamma > ginf, cs.name


def test_infeasible_parameters_raise():
    with pytest.raises(SynthesisError):
        input_limited(a=0.6, b=1.0, s=1.0, m=5.0, t=0.1, gamma=1.32)  # q loses convexity
    with pytest.raises(SynthesisError):
        exponential(a=0.9, b=0.1, g=80.0, gamma=7.45)  # above the curvature ceiling


def test_safety_feasible_at_any_level():
    # the clamping design prices its effort at the level itself: the induced
    # input cost stays convex for every gamma > 0 (v < m and v/a^2 < g^2 s)
    _, _, cs = safety(a=1.1, b=1.0, s=1.0, m=0.2, t=0.2, gamma=0.3)
    assert cs.certificate.meta["verify"].passed
    v = cs.params["v"]
    assert v < cs.params["m"]
    assert v / cs.params["a"] ** 2 < 0.3**2 * cs.params["s"]


def test_preset_parameters(fig1, fig2, fig3):
    assert fig1.params["gamma"] == 1.32 and fig1.params["t"] == 0.1 and fig1.params["m"] == 0.11
    assert fig2.params["gamma"] == 1.32 and fig2.params["t"] == 0.2 and fig2.params["m"] == 0.2
    assert fig3.params["gamma"] == 7.45 and fig3.params["g"] == 15.0
    assert fig1.sim["overlay"] == {"input": 0.1}
    assert fig2.sim["overlay"] == {"state": 0.2}

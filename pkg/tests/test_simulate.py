"""Rollouts: determinism, recursion fidelity, metrics, CSV format."""

import numpy as np
import pytest

from nqhinf.certify import central_controller
from nqhinf.riccati import QuadWeights, stationary_are, worst_case_gain
from nqhinf.simulate import (
    DisturbanceModel,
    batch_metrics,
    export_csv,
    file_sha256,
    metrics,
    noise_streams,
    rollout,
    rollout_batch,
)
from nqhinf.system import ConfigError


def test_noise_streams_deterministic():
    m = DisturbanceModel("laplace", 0.7, seed=42)
    a = noise_streams(m, 50, 1, runs=3)
    b = noise_streams(m, 50, 1, runs=3)
    assert np.array_equal(a, b)
    c = noise_streams(DisturbanceModel("laplace", 0.7, seed=43), 50, 1, runs=3)
    assert not np.array_equal(a, c)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        DisturbanceModel("pink", 1.0, 0)


def test_recursion_fidelity_exact(fig1):
    cert = fig1.certificate
    ctrl = central_controller(cert)
    tr = rollout(cert.system, ctrl, DisturbanceModel("white_gaussian", 0.5, 9), T=80, cert=cert)
    a = cert.system.A[0, 0]
    b = cert.system.B[0, 0]
    recon = a * tr.xs[:-1, 0] + b * tr.us[:, 0] + tr.ws[:, 0]
    assert np.max(np.abs(tr.xs[1:, 0] - recon)) == 0.0


def test_zero_horizon_zero_noise(fig1):
    cert = fig1.certificate
    ctrl = central_controller(cert)
    tr = rollout(cert.system, ctrl, DisturbanceModel("white_gaussian", 0.0, 0), T=0, cert=cert)
    assert tr.xs.shape == (2, 1)
    assert float(tr.xs[1, 0]) == 0.0


def test_worst_case_rollout_respects_input_budget(fig1):
    cert = fig1.certificate
    ctrl = central_controller(cert)
    tr = rollout(cert.system, ctrl, DisturbanceModel("worst_case_central"), T=100,
                 cert=cert, initial_w=1.0)
    assert np.max(np.abs(tr.us)) <= 0.1
    assert np.max(np.abs(tr.ws)) > 0


def test_worst_case_quadratic_model_uses_gain(fig1):
    cert = fig1.certificate
    w = QuadWeights(np.eye(1), np.eye(1), np.eye(1), cert.gamma)
    P = stationary_are(cert.system, w)
    W = worst_case_gain(P, w, cert.system)
    ctrl = central_controller(cert)
    tr = rollout(cert.system, ctrl, DisturbanceModel("worst_case_quadratic"), T=20,
                 cert=cert, wc_gain=W, initial_w=0.5)
    np.testing.assert_allclose(tr.ws[1:, 0], W[0, 0] * tr.xs[1:-1, 0], atol=1e-15)


def test_metrics_zero_noise_ratio_undefined(fig1):
    cert = fig1.certificate
    ctrl = central_controller(cert)
    tr = rollout(cert.system, ctrl, DisturbanceModel("white_gaussian", 0.0, 0), T=5, cert=cert)
    m = metrics(tr, cert)
    assert np.isnan(m.ratio)
    assert m.margin == 0.0


def test_batch_matches_single_run(fig1):
    cert = fig1.certificate
    ctrl = central_controller(cert)
    model = DisturbanceModel("uniform", 0.8, seed=3)
    single = rollout(cert.system, ctrl, model, T=40, cert=cert)
    batch = rollout_batch(cert.system, ctrl, model, T=40, runs=1, cert=cert)
    np.testing.assert_array_equal(batch.xs[0], single.xs[:, 0])
    np.testing.assert_array_equal(batch.us[0], single.us[:, 0])
    marg, ratio, mx, mu = batch_metrics(batch, cert)
    m = metrics(single, cert)
    assert marg[0] == pytest.approx(m.margin, rel=1e-12)
    assert ratio[0] == pytest.approx(m.ratio, rel=1e-12)


def test_csv_shape_and_determinism(tmp_path, fig1):
    cert = fig1.certificate
    ctrl = central_controller(cert)
    model = DisturbanceModel("white_gaussian", 0.4, seed=21)
    t1 = rollout(cert.system, ctrl, model, T=1, cert=cert)
    f1 = tmp_path / "one.csv"
    export_csv(t1, f1, cert)
    lines = f1.read_text().strip().split("\n")
    assert lines[0] == "k,x_1,u_1,w_1,q,r,s,p"
    assert len(lines) == 3  # header + rows k = 0, 1
    t2 = rollout(cert.system, ctrl, model, T=1, cert=cert)
    f2 = tmp_path / "two.csv"
    export_csv(t2, f2, cert)
    assert file_sha256(f1) == file_sha256(f2)


def test_csv_17_digit_round_trip(tmp_path, fig1):
    cert = fig1.certificate
    ctrl = central_controller(cert)
    tr = rollout(cert.system, ctrl, DisturbanceModel("laplace", 1.0, seed=2), T=30, cert=cert)
    f = tmp_path / "t.csv"
    export_csv(tr, f, cert)
    rows = np.genfromtxt(f, delimiter=",", names=True)
    np.testing.assert_array_equal(rows["x_1"], tr.xs[:-1, 0])
    np.testing.assert_array_equal(rows["u_1"], tr.us[:, 0])
    np.testing.assert_array_equal(rows["w_1"], tr.ws[:, 0])


def test_certified_bound_sampled(fig2):
    cert = fig2.certificate
    ctrl = central_controller(cert)
    g2 = cert.gamma**2
    for kind in ("white_gaussian", "uniform", "laplace"):
        batch = rollout_batch(cert.system, ctrl, DisturbanceModel(kind, 0.2, 5), T=60,
                              runs=200, cert=cert)
        marg, ratio, mx, mu = batch_metrics(batch, cert)
        assert marg.min() >= -1e-7
        assert np.nanmax(ratio) <= g2 + 1e-6
        assert mx.max() <= 0.2 + 1e-12

"""Command-line entry point: synthesize, verify, simulate, reproduce.

Exit codes are a stable contract: 0 success, 2 infeasible design or failed
verification, 3 numerical failure, 4 configuration/usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import cases
from .certify import Certificate, central_controller, verify_certificate
from .config import RunConfig, load_config
from .convex import QuadraticFn
from .design import (
    DesignQR,
    DesignQS,
    DesignRS,
    GridSpec,
    build_qr,
    build_qs,
    build_rs,
    feasibility_qr,
    feasibility_qs,
    feasibility_rs,
    feasibility_rs_matrix,
)
from .riccati import (
    QuadWeights,
    gamma_search,
    linear_central_controller,
    negativity_test,
    shaping_matrix,
    stationary_are,
    worst_case_gain,
)
from .simulate import DisturbanceModel, export_csv, file_sha256, metrics, rollout
from .store import load_certificate, save_certificate
from .system import (
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_NUMERICAL,
    EXIT_OK,
    ConfigError,
    DomainError,
    NumericalError,
    SynthesisError,
    SystemLTI,
)


class _Parser(argparse.ArgumentParser):
    # usage problems map to the config exit code instead of argparse's default
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nqhinf", description="Convex-cost worst-case-ratio controller toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    syn = sub.add_parser("synthesize", help="run a design from a config, certify, write the certificate")
    syn.add_argument("--config", required=True, help="JSON run configuration")
    syn.add_argument("--out", required=True, help="output directory")
    syn.add_argument("--grid-scale", type=float, default=1.0, help="scale verification grids")

    ver = sub.add_parser("verify", help="re-check a stored certificate")
    ver.add_argument("--cert", required=True, help="certificate JSON")
    ver.add_argument("--grid-scale", type=float, default=1.0, help="scale verification grids")

    sim = sub.add_parser("simulate", help="roll out the certified controller and the quadratic baseline")
    sim.add_argument("--cert", required=True, help="certificate JSON")
    sim.add_argument("--config", default=None, help="config with a simulation block (optional for presets)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=0, help="base seed for disturbance streams")

    rep = sub.add_parser("reproduce", help="run a named preset end to end")
    rep.add_argument("--preset", required=True, choices=cases.PRESET_NAMES)
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--seed", type=int, default=0, help="base seed for disturbance streams")
    rep.add_argument("--horizon", type=int, default=None, help="override the preset horizon")
    return p


def _resolve_gamma(cfg: RunConfig) -> float:
    if cfg.gamma is not None:
        return cfg.gamma
    spec = cfg.gamma_search
    if cfg.mode == "quadratic":
        w = QuadWeights(cfg.quad_weights["Q"], cfg.quad_weights["R"], cfg.quad_weights["S"], 1.0)
    else:
        n, d = cfg.system.n, cfg.system.d
        w = QuadWeights(np.eye(n), np.eye(d), np.eye(n), 1.0)
    ginf = gamma_search(cfg.system, w, tol=spec["tol"])
    return spec["margin"] * ginf


def quadratic_certificate(system: SystemLTI, Q, R, S, gamma: float,
                          grids: GridSpec | None = None) -> Certificate:
    """All-quadratic certificate from the stationary equation (baseline path)."""
    grids = grids or GridSpec()
    w = QuadWeights(Q, R, S, gamma)
    P = stationary_are(system, w)
    if not negativity_test(P, w, system):
        raise SynthesisError("quadratic design infeasible: negativity test fails at this level")
    M = P - np.asarray(Q, dtype=float)
    G = shaping_matrix(P, w, system)
    grid = grids.grid(system.n)
    cert = Certificate(
        system=system,
        q=QuadraticFn(Q), r=QuadraticFn(R), s=QuadraticFn(S),
        p=QuadraticFn(P), m=QuadraticFn(M), g=QuadraticFn(G),
        gamma=gamma, xi_grid=grid, x_grid=grid, w_grid=grid,
        meta={"mode": "quadratic", "P": P},
    )
    report = verify_certificate(cert)
    cert.meta["verify"] = report
    if not report.passed:
        raise SynthesisError("quadratic certificate failed verification:\n" + report.summary())
    return cert


def _search_shaping(cfg: RunConfig, gamma: float):
    if cfg.mode == "rs":
        if cfg.bounds is None:
            raise ConfigError("config.design.bounds: required when M is 'search'")
        if cfg.system.scalar:
            res = feasibility_rs(cfg.system, cfg.bounds, gamma)
            if not res.feasible:
                raise SynthesisError(f"rs feasibility program empty (violated: {res.violated})")
            return np.array([[res.pick()]])
        return feasibility_rs_matrix(cfg.system, cfg.bounds, gamma)
    if cfg.mode == "qs":
        if cfg.bounds is None:
            raise ConfigError("config.design.bounds: required when M is 'search'")
        res = feasibility_qs(cfg.system, cfg.bounds, gamma)
        if not res.feasible:
            raise SynthesisError(f"qs feasibility program empty (violated: {res.violated})")
        return np.array([[res.pick()]])
    if cfg.bounds is None:
        raise ConfigError("config.design.bounds: required when G is 'search'")
    res = feasibility_qr(cfg.system, cfg.functions["r"], cfg.bounds, gamma, cfg.grids.envelope)
    if not res.feasible:
        raise SynthesisError(f"qr feasibility program empty (violated: {res.violated})")
    return np.array([[res.pick()]])


def cmd_synthesize(args) -> int:
    cfg = load_config(args.config)
    grids = GridSpec(envelope=cfg.grids.envelope * args.grid_scale,
                     points=cfg.grids.points, seed=cfg.grids.seed)
    gamma = _resolve_gamma(cfg)
    if cfg.mode == "quadratic":
        cert = quadratic_certificate(cfg.system, cfg.quad_weights["Q"], cfg.quad_weights["R"],
                                     cfg.quad_weights["S"], gamma, grids)
    else:
        shaping = cfg.shaping
        if isinstance(shaping, str):
            shaping = _search_shaping(cfg, gamma)
        if cfg.mode == "rs":
            cert = build_rs(DesignRS(cfg.functions["r"], cfg.functions["s"], shaping, gamma, cfg.bounds),
                            cfg.system, grids)
        elif cfg.mode == "qs":
            cert = build_qs(DesignQS(cfg.functions["q"], cfg.functions["s"], shaping, gamma, cfg.bounds),
                            cfg.system, grids)
        else:
            cert = build_qr(DesignQR(cfg.functions["q"], cfg.functions["r"], shaping, gamma, cfg.bounds),
                            cfg.system, grids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cert_path = out / "certificate.json"
    save_certificate(cert, cert_path)
    report = cert.meta["verify"]
    lines = [f"design mode: {cfg.mode}", f"gamma: {gamma:.10g}", report.summary()]
    conditions = cert.meta.get("conditions")
    if conditions is not None:
        lines.append("design condition margins:")
        lines.append(conditions.summary())
    (out / "synthesis_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(f"certificate written to {cert_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cert = load_certificate(args.cert)
    report = verify_certificate(cert, grid_scale=args.grid_scale)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


def _baseline(cert: Certificate):
    n, d = cert.system.n, cert.system.d
    w = QuadWeights(np.eye(n), np.eye(d), np.eye(n), cert.gamma)
    P = stationary_are(cert.system, w)
    if not negativity_test(P, w, cert.system):
        raise SynthesisError("unit-weight quadratic baseline is infeasible at this level")
    return linear_central_controller(P, w, cert.system), worst_case_gain(P, w, cert.system), P


def _sim_models(cert: Certificate, cfg: RunConfig | None, seed: int):
    if cfg is not None and cfg.sim.models:
        T = cfg.sim.T
        kick = cfg.sim.kick
        models = [DisturbanceModel(m.kind, m.scale, m.seed + seed) if m.stochastic else m
                  for m in cfg.sim.models]
        return T, kick, models
    name = cert.meta.get("preset")
    if name is None:
        raise ConfigError("no simulation block in the config and the certificate is not a preset")
    defaults = cases._PRESET_SIM[name]
    models = []
    i = 0
    for kind in defaults["noise_kinds"]:
        for scale in defaults["noise_scales"]:
            models.append(DisturbanceModel(kind, scale, seed + i))
            i += 1
    for kind in defaults["extra_models"]:
        models.append(DisturbanceModel(kind))
    return defaults["T"], 1.0, models


def cmd_simulate(args, preset_horizon=None) -> int:
    cert = load_certificate(args.cert)
    cfg = load_config(args.config) if args.config else None
    T, kick, models = _sim_models(cert, cfg, args.seed)
    if preset_horizon:
        T = preset_horizon
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ours = central_controller(cert)
    baseline, wc_gain, P = _baseline(cert)
    g2 = cert.gamma**2
    manifest = {
        "certificate": str(Path(args.cert).name),
        "gamma": cert.gamma,
        "horizon": T,
        "seed": args.seed,
        "kick": kick,
        "baseline_P": np.asarray(P).tolist(),
        "preset": cert.meta.get("preset"),
        "models": [],
    }
    name = cert.meta.get("preset")
    if name is not None:
        manifest["overlay"] = cases._PRESET_SIM[name].get("overlay", {})
        manifest["plot_models"] = cases._PRESET_SIM[name].get("plot_models", [])
    for model in models:
        label = model.label()
        kick_w = None if model.stochastic else kick
        tr_ours = rollout(cert.system, ours, model, T, cert=cert, wc_gain=wc_gain, initial_w=kick_w)
        tr_quad = rollout(cert.system, baseline, model, T, cert=cert, wc_gain=wc_gain, initial_w=kick_w)
        f_ours = out / f"ours_{label}.csv"
        f_quad = out / f"quad_{label}.csv"
        export_csv(tr_ours, f_ours, cert)
        export_csv(tr_quad, f_quad, cert)
        m_ours = metrics(tr_ours, cert)
        m_quad = metrics(tr_quad, cert)
        entry = {
            "kind": model.kind, "scale": model.scale, "seed": model.seed, "label": label,
            "csv_ours": f_ours.name, "csv_quad": f_quad.name,
            "sha256_ours": file_sha256(f_ours), "sha256_quad": file_sha256(f_quad),
            "ours": {"margin": m_ours.margin, "ratio": m_ours.ratio,
                     "max_abs_x": m_ours.max_abs_x, "max_abs_u": m_ours.max_abs_u},
            "quad": {"margin": m_quad.margin, "ratio": m_quad.ratio,
                     "max_abs_x": m_quad.max_abs_x, "max_abs_u": m_quad.max_abs_u},
        }
        manifest["models"].append(entry)
        ratio = "n/a" if np.isnan(m_ours.ratio) else f"{m_ours.ratio:.6f}"
        print(f"{label}: ours margin {m_ours.margin:.4g}, ratio {ratio} "
              f"(gamma^2 = {g2:.6f}), max|u| {m_ours.max_abs_u:.4g}")
        if not np.isnan(m_ours.ratio) and m_ours.ratio > g2 + 1e-6:
            raise SynthesisError(f"certified bound violated on {label}: ratio {m_ours.ratio} > {g2}")
    blob = json.dumps(manifest, indent=1, sort_keys=True)
    manifest["manifest_sha256"] = hashlib.sha256(blob.encode()).hexdigest()
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                       encoding="utf-8")
    print(f"wrote {len(models)} model pair(s) and manifest.json to {out}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cs = cases.preset(args.preset)
    cert_path = out / "certificate.json"
    save_certificate(cs.certificate, cert_path)
    report = verify_certificate(cs.certificate)
    print(f"preset {args.preset}: gamma {cs.gamma}")
    print(report.summary())
    if not report.passed:
        raise SynthesisError("preset certificate failed verification")

    class _SimArgs:
        cert = str(cert_path)
        config = None
        seed = args.seed

    sim_args = _SimArgs()
    sim_args.out = str(out)
    return cmd_simulate(sim_args, preset_horizon=args.horizon)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "synthesize":
            return cmd_synthesize(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_reproduce(args)
    except ConfigError as e:
        print(f"config error: {e}", file=_sys.stderr)
        return EXIT_CONFIG
    except SynthesisError as e:
        print(f"infeasible: {e}", file=_sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalError, DomainError) as e:
        print(f"numerical failure: {e}", file=_sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())

"""Certificate persistence: JSON with function specs, grids, and a checksum.

Closed-form costs are stored as parameter specs; induced costs are stored as
derivation recipes (inputs plus the level they were derived at) and rebuilt on
load.  The checksum covers the system and function blocks so silently edited
parameters surface as an integrity error; the claimed level and the grids stay
outside it, so a tampered level is caught semantically by re-verification.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .certify import Certificate
from .convex import QuadraticFn, function_from_spec
from .design import (
    DesignQR,
    DesignQS,
    DesignRS,
    induce_p_from_rs,
    induce_r_from_qs,
    induce_s_from_qr,
    make_g,
)
from .system import ConfigError, SystemLTI

FORMAT = "nqhinf-certificate/1"


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _checksum(payload: dict) -> str:
    block = {"system": payload["system"], "functions": payload["functions"]}
    return "sha256:" + hashlib.sha256(_canonical(block).encode()).hexdigest()


def _function_entry(fn) -> dict:
    try:
        return fn.to_spec()
    except NotImplementedError:
        return None


def certificate_payload(cert: Certificate) -> dict:
    mode = cert.meta.get("mode", "explicit")
    functions = {}
    explicit = {}
    for name in ("q", "r", "s", "p", "m", "g"):
        spec = _function_entry(getattr(cert, name))
        if spec is not None:
            explicit[name] = spec
    if mode in ("rs", "qs", "qr"):
        recipe = {"mode": mode, "gamma": cert.gamma}
        if mode == "rs":
            recipe.update({"r": explicit["r"], "s": explicit["s"],
                           "M": np.asarray(cert.meta["M"], dtype=float).tolist()})
            keep = ("r", "s", "m", "g") if "g" in explicit else ("r", "s", "m")
        elif mode == "qs":
            recipe.update({"q": explicit["q"], "s": explicit["s"],
                           "M": np.asarray(cert.meta["M"], dtype=float).tolist()})
            keep = ("q", "s", "m", "g") if "g" in explicit else ("q", "s", "m")
        else:
            recipe.update({"q": explicit["q"], "r": explicit["r"],
                           "G": np.asarray(cert.meta["G"], dtype=float).tolist()})
            keep = ("q", "r", "g")
        for name in ("q", "r", "s", "p", "m", "g"):
            functions[name] = explicit[name] if name in keep else {"kind": "derived", "recipe": recipe}
    else:
        missing = [n for n in ("q", "r", "s", "p", "m", "g") if n not in explicit]
        if missing:
            raise ConfigError(f"certificate is not serializable: no closed form for {missing}")
        functions = explicit
    payload = {
        "format": FORMAT,
        "system": cert.system.to_spec(),
        "gamma": cert.gamma,
        "functions": functions,
        "design": {"mode": mode, "preset": cert.meta.get("preset")},
        "grids": {
            "xi": np.asarray(cert.xi_grid).tolist(),
            "x": np.asarray(cert.x_grid).tolist(),
            "w": np.asarray(cert.w_grid).tolist(),
        },
        "tolerances": {"riccati": cert.tol_riccati, "concavity": cert.tol_concavity},
    }
    report = cert.meta.get("verify")
    if report is not None:
        payload["report"] = {
            "riccati_max_abs": report.riccati_max_abs,
            "riccati_max_rel": report.riccati_max_rel,
            "concavity_margin": report.concavity_margin,
            "wc_arg_mismatch": report.wc_arg_mismatch,
            "passed": report.passed,
        }
    payload["checksum"] = _checksum(payload)
    return payload


def save_certificate(cert: Certificate, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(certificate_payload(cert), f, indent=1, sort_keys=True)
        f.write("\n")


def _rebuild_functions(functions: dict, sys: SystemLTI) -> dict:
    out = {}
    recipes = {}
    for name, spec in functions.items():
        if spec.get("kind") == "derived":
            recipes[name] = spec["recipe"]
        else:
            out[name] = function_from_spec(spec)
    if recipes:
        recipe = next(iter(recipes.values()))
        mode = recipe["mode"]
        gamma = float(recipe["gamma"])
        if mode == "rs":
            d = DesignRS(function_from_spec(recipe["r"]), function_from_spec(recipe["s"]),
                         np.asarray(recipe["M"], dtype=float), gamma)
            p, q = induce_p_from_rs(d, sys)
            derived = {"p": p, "q": q, "m": QuadraticFn(np.asarray(recipe["M"], dtype=float)),
                       "g": make_g(QuadraticFn(np.asarray(recipe["M"], dtype=float)), d.s, sys, gamma)}
        elif mode == "qs":
            d = DesignQS(function_from_spec(recipe["q"]), function_from_spec(recipe["s"]),
                         np.asarray(recipe["M"], dtype=float), gamma)
            r, p = induce_r_from_qs(d, sys)
            derived = {"r": r, "p": p, "m": QuadraticFn(np.asarray(recipe["M"], dtype=float)),
                       "g": make_g(QuadraticFn(np.asarray(recipe["M"], dtype=float)), d.s, sys, gamma)}
        elif mode == "qr":
            d = DesignQR(function_from_spec(recipe["q"]), function_from_spec(recipe["r"]),
                         np.asarray(recipe["G"], dtype=float), gamma)
            s, p, m = induce_s_from_qr(d, sys)
            derived = {"s": s, "p": p, "m": m,
                       "g": QuadraticFn(np.asarray(recipe["G"], dtype=float))}
        else:
            raise ConfigError(f"unknown derivation mode {mode!r} in certificate")
        for name in recipes:
            if name not in derived:
                raise ConfigError(f"certificate recipe cannot rebuild {name!r}")
            out[name] = derived[name]
    return out


def load_certificate(path) -> Certificate:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"certificate file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"certificate is not valid JSON: {e}")
    if payload.get("format") != FORMAT:
        raise ConfigError(f"not a certificate file (format {payload.get('format')!r})")
    if payload.get("checksum") != _checksum(payload):
        raise ConfigError("certificate integrity error: function parameters do not match the checksum")
    sys = SystemLTI.from_spec(payload["system"])
    fns = _rebuild_functions(payload["functions"], sys)
    grids = payload["grids"]
    tol = payload.get("tolerances", {})
    cert = Certificate(
        system=sys,
        q=fns["q"], r=fns["r"], s=fns["s"], p=fns["p"], m=fns["m"], g=fns["g"],
        gamma=float(payload["gamma"]),
        xi_grid=np.asarray(grids["xi"], dtype=float),
        x_grid=np.asarray(grids["x"], dtype=float),
        w_grid=np.asarray(grids["w"], dtype=float),
        tol_riccati=float(tol.get("riccati", 1e-7)),
        tol_concavity=float(tol.get("concavity", 1e-8)),
        meta={"mode": payload["design"]["mode"], "preset": payload["design"].get("preset"),
              "loaded_from": str(path)},
    )
    return cert

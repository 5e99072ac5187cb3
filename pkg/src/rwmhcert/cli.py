"""Command-line front end.

Subcommands ``verify``, ``bounds``, ``lower``, ``sample``, ``oracle`` and
``report``.  Exit codes: 0 success, 1 validation error, 2 numeric failure,
3 sandwich failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import oracle as oracle_mod
from . import report as rep
from .config import ConfigError, RunConfig, load_config
from .drift import DegenerateBracketError, drift_certificate
from .geometry import ConeParams, DegenerateConeError
from .glm import gaussian_prior, load_glm_csv, logistic_bundle, poisson_preset
from .grid import symmetric_grid
from .proposal import CubatureError, RadialProposal
from .rates import DegenerateDriftError, lower_bounds, rate_report
from .roots import InversionError
from .sampler import ChainConfig, run_chain, write_chain_csv
from .target import (ModeNotFoundError, gaussian_bundle, gaussian_mixture_bundle,
                     standard_normal_bundle, verify_assumptions)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_SANDWICH = 0, 1, 2, 3

NUMERIC_ERRORS = (ModeNotFoundError, CubatureError, DegenerateDriftError, DegenerateConeError,
                  DegenerateBracketError, InversionError, oracle_mod.GridTooCoarseError,
                  oracle_mod.OracleConvergenceError, ArithmeticError, np.linalg.LinAlgError,
                  RuntimeError)
VALIDATION_ERRORS = (ValueError, KeyError, OSError)

REPORT_INPUTS = ("assumptions.json", "cert.json", "lower.json", "oracle.json")


# ---------------------------------------------------------------------------
# pipeline construction


def build_bundle(cfg: RunConfig):
    t = cfg.target
    name = cfg.preset
    if name == "standard_normal":
        return standard_normal_bundle(t.get("dim", 1), t.get("eta", 0.99))
    if name == "gaussian":
        return gaussian_bundle(t.get("scale", 1.0), t.get("dim", 1), t.get("eta", 0.99))
    if name == "gaussian_mixture":
        return gaussian_mixture_bundle(t.get("a", 0.5), t.get("envelope_constant", "published"))
    data = load_glm_csv(cfg.data_path())
    kw = dict(log_norm=t.get("log_norm"), normalization=t.get("normalization", "auto"))
    if name == "logistic":
        bundle, _ = logistic_bundle(data.covariates, data.y, t.get("eta"),
                                    t.get("prior_precision", 1.0), **kw)
        return bundle
    prior = gaussian_prior(data.p, t.get("prior_precision", 1.0))
    bundle, _ = poisson_preset(data.covariates, data.y, prior, build_proposal(cfg, data.p), **kw)
    return bundle


def build_proposal(cfg: RunConfig, dim: int) -> RadialProposal:
    return RadialProposal(dim=dim, family=cfg.proposal["family"], scale=cfg.proposal["scale"])


def cone_params(cfg: RunConfig, bundle) -> ConeParams:
    pipe = cfg.pipeline
    if pipe["eps_alpha"] is not None:
        return ConeParams(eps_alpha=pipe["eps_alpha"], K=pipe["K"])
    return ConeParams.from_eta(bundle.curvature.eta, K=pipe["K"])


def certificate_and_rates(cfg, bundle, prop):
    if bundle.curvature is None or bundle.envelope is None:
        raise ValueError(f"cli: preset {cfg.preset!r} carries no curvature certificate or envelope; "
                         "the drift/minorization certificate is unavailable (use `lower`)")
    cert = drift_certificate(bundle, prop, cone_params(cfg, bundle))
    lows = compute_lower(cfg, bundle, prop)
    return cert, rate_report(cert, lows)


def compute_lower(cfg, bundle, prop):
    pipe = cfg.pipeline
    return lower_bounds(bundle, prop, candidates=pipe["candidates"], n_mc=pipe["mc"],
                        seed=cfg.seed, include_spectral=pipe["include_spectral"])


def _inputs(cfg, command):
    return {"command": command, **cfg.canonical()}


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(cfg, out, args):
    bundle = build_bundle(cfg)
    ar = verify_assumptions(bundle, cfg.pipeline["radii"], cfg.pipeline["n_directions"], cfg.seed)
    h = rep.inputs_hash(_inputs(cfg, "verify"))
    body = {"assumptions": rep.annotate(ar.to_dict(), "assumption_check", h)}
    rep.write_json(out / "assumptions.json", rep.envelope("verify", _inputs(cfg, "verify"), body))
    for name, c in ar.checks.items():
        state = "SKIP" if c.skipped else ("PASS" if c.passed else "FAIL")
        print(f"{name}: {state} ({c.n_failed}/{c.n_checked} violations)")
    print(f"assumptions: {'PASS' if ar.passed else 'FAIL'}")
    return EXIT_OK


def cmd_bounds(cfg, out, args):
    bundle = build_bundle(cfg)
    prop = build_proposal(cfg, bundle.dim)
    cert, rr = certificate_and_rates(cfg, bundle, prop)
    inputs = _inputs(cfg, "bounds")
    h = rep.inputs_hash(inputs)
    body = {"certificate": rep.certificate_json(cert, h), "rates": rep.rate_json(rr, h),
            "norm_quality": cert.norm_quality}
    rep.write_json(out / "cert.json", rep.envelope("bounds", inputs, body))
    rep.write_csv(out / "bounds.csv", ["quantity", "value", "vacuous", "formula"],
                  rep.bounds_rows(cert, rr))
    flag = " (vacuous)" if rr.upper_vacuous else ""
    print(f"upper t_R: {rr.upper_t_R!r}{flag}")
    for lb in rr.lower_bounds:
        print(f"lower {lb.method}: {lb.value!r}{' (vacuous)' if lb.vacuous else ''}")
    return EXIT_OK


def cmd_lower(cfg, out, args):
    bundle = build_bundle(cfg)
    prop = build_proposal(cfg, bundle.dim)
    lows = compute_lower(cfg, bundle, prop)
    inputs = _inputs(cfg, "lower")
    h = rep.inputs_hash(inputs)
    body = {"lower_bounds": [rep.lower_bound_entry(lb, h) for lb in lows],
            "norm_quality": bundle.norm_quality}
    rep.write_json(out / "lower.json", rep.envelope("lower", inputs, body))
    rep.write_csv(out / "lower.csv", ["method", "value", "vacuous", "metadata"], rep.lower_rows(lows))
    for lb in lows:
        print(f"lower {lb.method}: {lb.value!r}{' (vacuous)' if lb.vacuous else ''}")
    return EXIT_OK


def cmd_sample(cfg, out, args):
    bundle = build_bundle(cfg)
    prop = build_proposal(cfg, bundle.dim)
    ch = dict(cfg.pipeline["chain"] or {})
    init = ch.get("initial", bundle.mode.tolist())
    cc = ChainConfig(initial=np.asarray(init, dtype=float), steps=int(ch.get("steps", 10_000)),
                     seed=cfg.seed, record_every=int(ch.get("record_every", 1)),
                     chain_index=int(ch.get("chain_index", 0)))
    res = run_chain(bundle, prop, cc)
    write_chain_csv(out / "chain.csv", res)
    print(f"acceptance rate: {res.acceptance_rate!r} over {res.steps} steps ({res.backend})")
    return EXIT_OK


def cmd_oracle(cfg, out, args):
    bundle = build_bundle(cfg)
    if bundle.dim > 2:
        raise ValueError(f"oracle: dimension {bundle.dim} exceeds the p <= 2 limit")
    prop = build_proposal(cfg, bundle.dim)
    g = cfg.pipeline["grid"]
    if g is None:
        grid = oracle_mod.default_grid(bundle, prop)
    else:
        n = g.get("n")
        grid = symmetric_grid(bundle.dim, float(g.get("half_width", 8.0)),
                              tuple(n) if isinstance(n, list) else n)
    k = oracle_mod.discretize(bundle, prop, grid)
    pi, slem = oracle_mod.stationary_and_slem(k)
    ev = oracle_mod.spectrum(k, pi)
    tv = oracle_mod.tv_decay(k, 0, cfg.pipeline["tv_steps"], pi)
    cert, rr = certificate_and_rates(cfg, bundle, prop)
    verdict = oracle_mod.sandwich_check(rr, slem, cfg.pipeline["slack"])
    inputs = _inputs(cfg, "oracle")
    h = rep.inputs_hash(inputs)
    body = {"slem": rep.annotate(slem, "oracle.slem", h),
            "grid": {"n_cells": k.n, "cell_volume": rep.annotate(k.cell_volume, "oracle.grid", h)},
            "reversibility_residual": rep.annotate(oracle_mod.reversibility_residual(k, pi),
                                                   "oracle.reversibility", h),
            "sandwich": rep.annotate(verdict.to_dict(), "oracle.sandwich", h),
            "rates": rep.rate_json(rr, h), "certificate_vacuous": cert.vacuous}
    rep.write_json(out / "oracle.json", rep.envelope("oracle", inputs, body))
    rep.write_csv(out / "oracle_tv.csv", ["step", "tv"], enumerate(tv))
    rep.write_csv(out / "oracle_spectrum.csv", ["index", "eigenvalue"], enumerate(ev[::-1]))
    for row in verdict.rows:
        state = "skip" if row["passed"] is None else ("ok" if row["passed"] else "VIOLATED")
        print(f"  {row['side']:5s} {row['bound']:22s} {row['value']!r:>24} {state}")
    print(f"slem: {slem!r}")
    print(f"sandwich: {'PASS' if verdict.passed else 'FAIL'}")
    for note in verdict.notes:
        print(f"note: {note}")
    return EXIT_OK if verdict.passed else EXIT_SANDWICH


def cmd_report(cfg, out, args):
    merged = {}
    for name in REPORT_INPUTS:
        path = out / name
        if path.exists():
            merged[name.removesuffix(".json")] = json.loads(path.read_text(encoding="utf-8"))
    if not merged:
        raise ValueError(f"report: no prior outputs ({', '.join(REPORT_INPUTS)}) found in {out}")
    rep.write_json(out / "report.json", {"schema_version": rep.SCHEMA_VERSION, "command": "report",
                                         "sections": merged})
    print(f"report: merged {', '.join(sorted(merged))}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "bounds": cmd_bounds, "lower": cmd_lower, "sample": cmd_sample,
            "oracle": cmd_oracle, "report": cmd_report}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="rwmhcert",
                                 description="Geometric-ergodicity certificates for RWMH chains.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, required=name != "report", help="YAML run config")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="overrides RWMHCERT_SEED and the config")
        sp.add_argument("--slack", type=float, default=None, help="sandwich slack")
        sp.add_argument("--mc", type=int, default=None, help="Monte Carlo sample size")
    return ap


def _module_of(exc) -> str:
    # innermost frame inside this package names the failing module
    mod = type(exc).__module__
    name = mod if mod.startswith("rwmhcert") else "rwmhcert"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        fm = frame.f_globals.get("__name__", "")
        if fm.startswith("rwmhcert"):
            name = fm
    return name


def run_command(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg = None
            if args.config is not None:
                cfg = load_config(args.config, seed=args.seed)
                if args.mc is not None:
                    if args.mc < 10_000:
                        raise ConfigError("config: --mc must be at least 10000")
                    cfg.pipeline["mc"] = args.mc
                if args.slack is not None:
                    if not args.slack >= 0:
                        raise ConfigError("config: --slack must be non-negative")
                    cfg.pipeline["slack"] = args.slack
            out = args.out or Path((cfg.output.get("dir") if cfg else None) or "out")
            out.mkdir(parents=True, exist_ok=True)
            code = COMMANDS[args.command](cfg, out, args)
        for msg in sorted({str(w.message) for w in caught}):
            print(f"warning: {msg}", file=sys.stderr)
        return code
    except ConfigError as exc:
        print(f"error [rwmhcert.config]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure [{_module_of(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except VALIDATION_ERRORS as exc:
        print(f"error [{_module_of(exc)}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main(argv=None):
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()

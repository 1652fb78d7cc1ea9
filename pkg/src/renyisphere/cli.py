"""Command-line interface: ``renyisphere <subcommand> ...``.

Subcommands
    theory    theoretical T, alpha, f curves of a model family as CSV
    validate  sufficient-condition report for a model as JSON
    simulate  finite-product cascade written as a binary map file
    estimate  empirical T, alpha, f of a map as a result document
    fit       regress families on a result document or a (q,T) CSV
    selftest  run the acceptance suite

Errors exit with a distinct non-zero status and a one-line diagnostic on
stderr. ``RENYISPHERE_THREADS`` sets the default number of concurrent fits.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cascade import CascadeConfig, CovarianceSpec, simulate_cascade
from .errors import (DomainError, EstimationError, FitError, FormatError, GeometryError,
                     SimulationError)
from .estimator import (cell_masses, empirical_spectrum, empirical_T, preprocess_shift,
                        support_mask)
from .fitting import fit_family
from .io import (_jsonable, build_result, config_hash, read_curve_csv, read_map, read_map_csv, read_result,
                 write_curve_csv, write_map, write_result)
from .models import Family, ModelSpec, RenyiCurve, check_conditions, evaluate_curves
from .sphere import PixelGrid, Window, build_mesh

THREADS_ENV = "RENYISPHERE_THREADS"

EXIT_USAGE = 2
EXIT_CODES = [
    (FormatError, 3, "malformed input"),
    (DomainError, 4, "domain error"),
    (GeometryError, 5, "geometry error"),
    (EstimationError, 6, "estimation error"),
    (FitError, 7, "fit error"),
    (SimulationError, 8, "simulation error"),
    (OSError, 9, "i/o error"),
]


class UsageError(Exception):
    """Invalid flag combination."""


def parse_q(text: str) -> np.ndarray:
    """``start:stop:step`` (stop inclusive) or a single value."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad q range {text!r}; expected start:stop:step") from None
    if len(nums) == 1:
        return np.array(nums)
    if len(nums) != 3:
        raise UsageError(f"bad q range {text!r}; expected start:stop:step")
    start, stop, step = nums
    if not step > 0 or stop < start:
        raise UsageError(f"bad q range {text!r}; need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


# ---------------------------------------------------------------------------
# model flags

def _add_model_flags(p, required=True):
    p.add_argument("--model", required=required, choices=[f.value for f in Family])
    p.add_argument("--b", type=float, default=2.0, help="scaling factor (default 2)")
    p.add_argument("--sigma2", type=float, help="lognormal variance sigma_Y^2")
    p.add_argument("--lam", type=float, help="gamma rate lambda")
    p.add_argument("--beta", type=float, help="gamma shape beta")
    p.add_argument("--k", type=float, help="power / degrees of freedom k")
    p.add_argument("--eps", type=float, help="mixing weight epsilon")
    p.add_argument("--verbatim", action="store_true",
                   help="literal moment formula for evenpower/chisquarek instead of mean one")


def _model_from_args(args, sigma2_fallback=None) -> ModelSpec:
    fam = Family(args.model)
    given = {name: getattr(args, name) for name in ("sigma2", "lam", "beta", "k", "eps")}
    needs = {
        Family.LOGNORMAL: ("sigma2",),
        Family.LOGGAMMA: ("lam", "beta"),
        Family.LOGNEGINVGAMMA: ("lam", "beta"),
        Family.CHISQUARE: (),
        Family.EVENPOWER: ("k",),
        Family.CHISQUAREK: ("k",),
        Family.CHISQUAREEPS: ("eps",),
    }[fam]
    if fam is Family.LOGNORMAL and given["sigma2"] is None:
        given["sigma2"] = sigma2_fallback
    missing = [n for n in needs if given[n] is None]
    if missing:
        raise UsageError(f"--model {fam.value} requires " + ", ".join(f"--{n}" for n in missing))
    extra = [n for n, v in given.items() if v is not None and n not in needs
             and not (n == "sigma2" and fam is Family.LOGNORMAL)]
    if extra:
        raise UsageError(f"--model {fam.value} does not take " + ", ".join(f"--{n}" for n in extra))
    if args.verbatim and fam not in (Family.EVENPOWER, Family.CHISQUAREK):
        raise UsageError("--verbatim only applies to evenpower and chisquarek")
    b = args.b
    if fam is Family.LOGNORMAL:
        return ModelSpec.lognormal(b, given["sigma2"])
    if fam is Family.LOGGAMMA:
        return ModelSpec.loggamma(b, given["lam"], given["beta"])
    if fam is Family.LOGNEGINVGAMMA:
        return ModelSpec.logneginvgamma(b, given["lam"], given["beta"])
    if fam is Family.CHISQUARE:
        return ModelSpec.chisquare(b)
    if fam is Family.EVENPOWER:
        return ModelSpec.evenpower(b, given["k"], args.verbatim)
    if fam is Family.CHISQUAREK:
        return ModelSpec.chisquarek(b, given["k"], args.verbatim)
    return ModelSpec.chisquareeps(b, given["eps"])


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _emit_json(obj, path):
    text = json.dumps(_jsonable(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_theory(args) -> int:
    spec = _model_from_args(args)
    q = parse_q(args.q)
    T, S = evaluate_curves(spec, q)
    fh = _open_out(args.out)
    try:
        write_curve_csv(fh, {"q": q, "T": T.T, "alpha": S.alpha, "f": S.f})
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_validate(args) -> int:
    spec = _model_from_args(args)
    report = check_conditions(spec, C=args.C, gamma=args.gamma, extended=args.extended)
    out = {"model": spec.describe(), "C": args.C, "gamma": args.gamma, **report.as_dict()}
    _emit_json(out, args.out)
    return 0 if report.satisfied or not args.strict else 1


def _load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    return data


def cmd_simulate(args) -> int:
    if args.config:
        # config-file keys fill in flags that were not given on the command line
        for key, value in _load_config(args.config).items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise FormatError(f"{args.config}: unknown config key {key!r}")
            if getattr(args, attr) in (None, False):
                setattr(args, attr, value)
    if args.model is None:
        raise UsageError("simulate needs --model (flag or config file)")
    levels = 40 if args.levels is None else args.levels
    nside = 16 if args.nside is None else args.nside
    seed = 0 if args.seed is None else args.seed
    gamma = 1.0 if args.gamma is None else args.gamma
    spec = _model_from_args(args, sigma2_fallback=args.variance)
    variance = spec.gaussian_variance if args.variance is None else args.variance
    config = CascadeConfig(spec, CovarianceSpec(gamma, variance), int(levels),
                           PixelGrid(int(nside)), int(seed))
    sky = simulate_cascade(config)
    write_map(args.out, sky)
    return 0


def _file_sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_any_map(path, nside):
    if str(path).lower().endswith(".csv"):
        return read_map_csv(path, nside)
    return read_map(path)


def _window_from_args(args) -> Window:
    if args.window_area is None:
        if args.window_center is not None:
            raise UsageError("--window-center needs --window-area")
        return Window.full_sky()
    center = (0.0, 0.0)
    if args.window_center is not None:
        try:
            center = tuple(float(v) for v in args.window_center.split(","))
        except ValueError:
            raise UsageError("--window-center expects theta,phi in radians") from None
        if len(center) != 2:
            raise UsageError("--window-center expects theta,phi in radians")
    return Window.cap_from_area(center, args.window_area)


def cmd_estimate(args) -> int:
    sky = _read_any_map(args.map, args.nside)
    q = parse_q(args.q)
    window = _window_from_args(args)
    mesh = build_mesh(sky.grid, args.group_order)
    if not args.no_shift:
        sky = preprocess_shift(sky, support_mask(mesh, window))
    masses = cell_masses(sky, mesh, window)
    T = empirical_T(masses, q, args.area)
    S = empirical_spectrum(masses, q, args.mode, args.area)
    config = {
        "command": "estimate",
        "map_sha256": _file_sha(args.map),
        "group_order": args.group_order,
        "q": args.q,
        "window": {"kind": window.kind, "area": window.area,
                   "center": list(window.center) if window.center is not None else None},
        "mode": args.mode,
        "area": args.area,
        "shift": not args.no_shift,
    }
    prov = {"seed": None, "config": config, "config_hash": config_hash(config),
            "cells": int(masses.masses.size), "nside": sky.grid.nside}
    doc = build_result(q, T.T, S.alpha, S.f, provenance=prov)
    _write_doc(doc, args.out)
    return 0


def _write_doc(doc, out):
    if out in (None, "-"):
        sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n")
    else:
        write_result(out, doc)
        read_result(out)


def _parse_families(values) -> list[Family]:
    fams = []
    for item in values:
        for name in item.split(","):
            name = name.strip()
            if not name:
                continue
            try:
                fam = Family(name)
            except ValueError:
                raise UsageError(f"unknown family {name!r}") from None
            if fam is Family.CHISQUAREEPS:
                raise UsageError("chisquareeps has no fitting model")
            if fam not in fams:
                fams.append(fam)
    if not fams:
        raise UsageError("fit needs at least one --family")
    return fams


def cmd_fit(args) -> int:
    families = _parse_families(args.family)
    path = str(args.input)
    if path.lower().endswith(".csv"):
        curve = read_curve_csv(path)
        doc = None
    else:
        doc = read_result(path)
        curve = RenyiCurve(doc["q"], doc["T"])
    init = None
    if args.init is not None:
        if len(families) != 1:
            raise UsageError("--init needs exactly one --family")
        try:
            init = [float(v) for v in args.init.split(",")]
        except ValueError:
            raise UsageError("--init expects comma-separated numbers") from None
    threads = args.threads or default_threads()

    def run(fam):
        kwargs = {"b": args.b}
        if fam not in (Family.LOGNORMAL, Family.CHISQUARE):
            kwargs.update(starts=args.starts, init=init)
            if fam in (Family.EVENPOWER, Family.CHISQUAREK):
                kwargs["verbatim"] = args.verbatim
        return fit_family(curve, fam, **kwargs)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        fits = list(pool.map(run, families))

    fit_config = {"command": "fit", "input_sha256": _file_sha(path),
                  "families": [f.value for f in families], "starts": args.starts,
                  "verbatim": args.verbatim, "init": init, "b": args.b}
    if doc is None:
        prov = {"seed": None, "config": fit_config, "config_hash": config_hash(fit_config)}
        out = build_result(curve.q, curve.T, fits=fits, provenance=prov)
    else:
        prov = dict(doc["provenance"])
        prov["fit_config"] = fit_config
        prov["config_hash"] = config_hash({"base": doc["provenance"]["config_hash"], **fit_config})
        out = build_result(doc["q"], doc["T"], doc.get("alpha"), doc.get("f"),
                           fits=list(doc.get("fits", [])) + fits,
                           validity=doc.get("validity", []), provenance=prov)
    _write_doc(out, args.out)
    return 0


def cmd_selftest(args) -> int:
    try:
        import pytest
    except ImportError:
        raise UsageError("selftest needs pytest installed") from None
    suite = Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
    if args.suite:
        suite = Path(args.suite)
    if not suite.exists():
        raise FormatError(f"acceptance suite not found at {suite}")
    return int(pytest.main([str(suite), "-q", "-s"]))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renyisphere", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="theoretical curves as CSV")
    _add_model_flags(p)
    p.add_argument("--q", default="1:2:0.01", help="start:stop:step (default 1:2:0.01)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("validate", help="sufficient-condition report")
    _add_model_flags(p)
    p.add_argument("--C", type=float, default=1.0, help="covariance bound constant C")
    p.add_argument("--gamma", type=float, default=1.0, help="covariance decay rate gamma")
    p.add_argument("--extended", action="store_true", help="include the q in [1,4] bound")
    p.add_argument("--strict", action="store_true", help="exit 1 if any check fails")
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="simulate a cascade map")
    _add_model_flags(p, required=False)
    p.add_argument("--variance", type=float, help="Gaussian covariance variance")
    p.add_argument("--gamma", type=float, help="covariance decay rate (default 1)")
    p.add_argument("--levels", type=int, help="number of scaled factors after level 0 (default 40)")
    p.add_argument("--nside", type=int, help="grid resolution (default 16)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--config", help="JSON file with any of the flags above")
    p.add_argument("--out", required=True, help="output map file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="empirical Renyi function of a map")
    p.add_argument("map", help="map file, or CSV with pixel_index,value")
    p.add_argument("--nside", type=int, help="nside of a CSV map (inferred if omitted)")
    p.add_argument("--group-order", type=int, default=3, help="cells of 4^j pixels (default 3)")
    p.add_argument("--window-area", type=float, help="spherical cap area in steradians")
    p.add_argument("--window-center", help="cap center theta,phi in radians (default 0,0)")
    p.add_argument("--q", default="1:2:0.01", help="start:stop:step (default 1:2:0.01)")
    p.add_argument("--mode", choices=["default", "verbatim"], default="default")
    p.add_argument("--area", choices=["normalized", "steradian"], default="normalized")
    p.add_argument("--no-shift", action="store_true", help="skip subtracting the map minimum")
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fit", help="fit model families to a Renyi curve")
    p.add_argument("input", help="result document (JSON) or curve CSV with q,T")
    p.add_argument("--family", action="append", required=True,
                   help="family name; repeat or comma-separate")
    p.add_argument("--starts", type=int, default=8, help="multi-start count (default 8)")
    p.add_argument("--init", help="comma-separated initial parameters (single family)")
    p.add_argument("--verbatim", action="store_true", help="verbatim evenpower/chisquarek forms")
    p.add_argument("--b", type=float, help="known scaling factor, for natural parameters")
    p.add_argument("--threads", type=int, help=f"concurrent fits (default ${THREADS_ENV})")
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--suite", help="path to the acceptance test file")
    p.set_defaults(func=cmd_selftest)
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"renyisphere: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except tuple(e for e, _, _ in EXIT_CODES) as exc:
        for kind, code, label in EXIT_CODES:
            if isinstance(exc, kind):
                msg = str(exc).splitlines()[0] if str(exc) else kind.__name__
                print(f"renyisphere: {label}: {msg}", file=sys.stderr)
                return code
        raise


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()

"""Command-line front end.

Examples:
  qdetect design example --mode wc-posterior
  qdetect design example --mode wc-posterior-inconclusive --noise inconclusive:0.02
  qdetect sweep example --out fig4.csv
  qdetect sweep example --fixed-povm zero --out fig5.csv
  qdetect certify example report.json

Exit codes: 0 success, 1 input error, 2 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import closed_form as cf
from .certify import certify_avg_joint, certify_wc_posterior
from .design import (DesignSettings, SolverFailure, solve_avg_joint, solve_wc_posterior,
                     solve_wc_posterior_inconclusive, solve_wc_posterior_noisy)
from .ensemble import EnsembleError
from .io import (ScenarioError, bundled_path, clean, load_scenario, matrix_from_json, noise_from_json,
                 parse_povm, parse_scenario, povm_to_dict, random_scenario, read_json, report_to_dict,
                 round_sig, vector_from_json, write_json)
from .metrics import evaluate
from .osr import solve_fixed_povm_design
from .povm import NoiseModel, PovmError, projective_povm
from .sdp import SdpSettings
from .sweep import FAMILIES, run_sweep, rows_to_csv, zero_noise_povms

MODES = ("avg-joint", "wc-posterior", "wc-posterior-inconclusive")
CLOSED_FORMS = ("two-state-avg-joint", "single-pure-wc", "pure-residual-wc", "single-pure-wc-noisy",
                "beta-threshold", "gamma-equal-weights")
BUNDLED = {"example", "example_2state", "example_2state.json"}

INPUT_ERRORS = (ScenarioError, EnsembleError, PovmError, ValueError, np.linalg.LinAlgError)


class InputError(Exception):
    pass


def _scenario(args):
    src = args.scenario
    if src == "random":
        return random_scenario(args.seed, args.dim, args.count)
    if src in BUNDLED and not Path(src).exists():
        src = bundled_path("example_2state.json")
    return load_scenario(src)


def _noise(spec: str | None, scenario):
    """Path to a JSON matrix, or FAMILY:NU0 with FAMILY in binary/inconclusive/symmetric."""
    if spec is None:
        return scenario.noise
    if ":" in spec and not Path(spec).exists():
        fam, _, val = spec.partition(":")
        try:
            nu0 = float(val)
        except ValueError:
            raise InputError(f"--noise: cannot parse level {val!r}") from None
        if fam == "binary":
            return NoiseModel.binary(nu0)
        if fam == "inconclusive":
            return NoiseModel.inconclusive(nu0)
        if fam == "symmetric":
            return NoiseModel.symmetric(scenario.ensemble.count, nu0)
        raise InputError(f"--noise: unknown family {fam!r}")
    doc = read_json(spec)
    if isinstance(doc, dict) and "noise" in doc:
        return noise_from_json(doc["noise"], f"{spec}:$.noise")
    return noise_from_json(doc, f"{spec}:$")


def _settings(args, scenario) -> DesignSettings:
    solver = scenario.solver
    eps = args.eps if args.eps is not None else float(solver.get("eps", 1e-6))
    sdp = SdpSettings(**{k: float(solver[k]) for k in ("feas_tol", "gap_tol") if k in solver})
    if "max_iter" in solver:
        sdp.max_iter = int(solver["max_iter"])
    cert = solver.get("cert_tol")
    return DesignSettings(eps=eps, cert_tol=None if cert is None else float(cert), sdp=sdp)


def _emit(obj, out):
    text = write_json(obj, out)
    if out is None:
        sys.stdout.write(text)


def _log_summary(summary: dict, digits: int):
    parts = [f"{k}={v}" for k, v in summary.items()]
    print("summary: " + " ".join(parts), file=sys.stderr)


def cmd_design(args) -> int:
    sc = _scenario(args)
    mode = args.mode or ("wc-posterior-inconclusive" if sc.inconclusive else "wc-posterior")
    noise = _noise(args.noise, sc)
    st = _settings(args, sc)
    e = sc.ensemble
    if mode == "avg-joint":
        if noise is not None:
            raise InputError("avg-joint design does not take a noise model")
        rep = solve_avg_joint(e, settings=st)
    elif mode == "wc-posterior":
        if noise is None:
            rep = solve_wc_posterior(e, eps=st.eps, settings=st)
        else:
            rep = solve_wc_posterior_noisy(e, None, noise, eps=st.eps, settings=st)
    else:
        rep = solve_wc_posterior_inconclusive(e, eps=st.eps, nu=noise, settings=st)
    body = report_to_dict(rep, args.digits)
    _emit(body, args.out)
    _log_summary(body["summary"], args.digits)
    return 0


def cmd_certify(args) -> int:
    sc = _scenario(args)
    doc = read_json(args.povm)
    povm = parse_povm(doc, f"{args.povm}:$")
    noise = _noise(args.noise, sc)
    cert_doc = doc.get("certificate") if isinstance(doc, dict) else None
    delta = args.delta
    if delta is None and isinstance(cert_doc, dict):
        delta = cert_doc.get("delta")
    tol = args.tol
    if tol is None:
        tol = float(cert_doc["tol"]) if isinstance(cert_doc, dict) and cert_doc.get("tol") else 1e-6
    mode = args.mode or ("avg-joint" if isinstance(doc, dict) and doc.get("criterion") == "avg-joint"
                         else "wc-posterior")
    e = sc.ensemble
    if mode == "avg-joint":
        cert = certify_avg_joint(povm, e, tol=tol)
    else:
        if len(povm) != e.count + (1 if povm.has_inconclusive else 0):
            raise InputError(f"POVM has {len(povm)} elements for {e.count} states")
        cert = certify_wc_posterior(povm, e, delta=delta, nu=noise, tol=tol)
    rep = evaluate(povm, e, noise if mode != "avg-joint" else None)
    body = {
        "certificate": cert.summary(),
        "povm": povm_to_dict(povm),
        "posterior_diagonal": rep.posterior_diagonal(),
        "summary": {"passed": cert.passed, "failure_class": cert.failure_class,
                    "posterior_diagonal": [round_sig(v, args.digits) for v in rep.posterior_diagonal()]},
    }
    _emit(clean(body), args.out)
    _log_summary(body["summary"], args.digits)
    return 0


def _grid(spec: str | None):
    if spec is None:
        return None
    try:
        if ":" in spec:
            a, b, c = (float(x) for x in spec.split(":"))
            k = int(round((b - a) / c))
            return np.round(a + np.arange(k + 1) * c, 10)
        return np.array([float(x) for x in spec.split(",")])
    except ValueError:
        raise InputError(f"--grid: expected START:STOP:STEP or a comma list, got {spec!r}") from None


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    e = sc.ensemble
    if e.count != 2:
        raise InputError("sweeps use the two-outcome noise families and need exactly two states")
    fixed = None
    if args.fixed_povm == "zero":
        fixed = zero_noise_povms(e, args.eps or 1e-6)
    elif args.fixed_povm:
        doc = read_json(args.fixed_povm)
        if isinstance(doc, dict) and ("binary" in doc or "inconclusive" in doc):
            fixed = {k: parse_povm(doc[k], f"$.{k}") for k in ("binary", "inconclusive") if k in doc}
        else:
            p = parse_povm(doc)
            fixed = {"inconclusive" if p.has_inconclusive else "binary": p}
    rows = run_sweep(e, _grid(args.grid), args.family, fixed, args.eps or 1e-6, args.workers)
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        print(f"nu0={r.nu0}: {r.status}", file=sys.stderr)
    return 2 if len(failed) == len(rows) else 0


def _closed_form_input(path):
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ScenarioError("closed-form input must be an object", f"{path}:$")
    return doc


def cmd_closed_form(args) -> int:
    doc = _closed_form_input(args.input)
    kind = args.kind or doc.get("kind")
    if kind not in CLOSED_FORMS:
        raise InputError(f"closed-form kind must be one of {CLOSED_FORMS}, got {kind!r}")

    def vec(key):
        if key not in doc:
            raise ScenarioError(f"missing field '{key}'", "$")
        return vector_from_json(doc[key], f"$.{key}")

    def mat(key, n):
        v = doc.get(key, "maximally_mixed")
        if v == "maximally_mixed":
            return np.eye(n) / n
        return matrix_from_json(v, f"$.{key}", n)

    def num(key):
        if key not in doc or isinstance(doc[key], bool) or not isinstance(doc[key], (int, float)):
            raise ScenarioError(f"field '{key}' must be a number", f"$.{key}")
        return float(doc[key])

    if kind == "gamma-equal-weights":
        sc = parse_scenario(doc.get("scenario", doc))
        g = cf.gamma_equal_weights(sc.ensemble)
        body = {"kind": kind, "gamma": g.gamma, "index": g.index, "values": list(g.values),
                "single_active_plausible": g.single_active_plausible}
    elif kind == "beta-threshold":
        psi = vec("psi")
        body = {"kind": kind, "beta0": cf.beta_threshold(psi, mat("r", psi.size))}
    else:
        if kind == "two-state-avg-joint":
            psi = vec("psi")
            res = cf.two_state_avg_joint(psi, mat("r", psi.size), num("beta"))
        elif kind == "single-pure-wc":
            psi = vec("psi")
            res = cf.single_pure_wc(psi, mat("r", psi.size), num("beta"))
        elif kind == "pure-residual-wc":
            phi = vec("phi")
            res = cf.pure_residual_wc(mat("rho0", phi.size), phi, num("beta"))
        else:
            res = cf.single_pure_wc_noisy(vec("psi"), num("beta"), num("nu0"))
        rep = evaluate(res.povm, res.ensemble, res.noise, weights=res.weights)
        body = {"kind": kind, "objective": res.objective, "flags": res.flags, "povm": povm_to_dict(res.povm),
                "posterior_diagonal": rep.posterior_diagonal(),
                "extras": {k: v for k, v in res.extras.items() if np.ndim(v) < 2}}
    body["summary"] = {k: round_sig(body[k], args.digits) for k in ("objective", "gamma", "beta0") if k in body}
    _emit(clean(body), args.out)
    _log_summary(body["summary"], args.digits)
    return 0


def cmd_osr_design(args) -> int:
    sc = _scenario(args)
    e = sc.ensemble
    if args.povm:
        povm = parse_povm(read_json(args.povm), f"{args.povm}:$")
    else:
        if e.count != e.dim:
            raise InputError("default POVM is the computational basis and needs as many states as dimensions")
        povm = projective_povm(np.eye(e.dim))
    eps = args.eps or 1e-6
    d = solve_fixed_povm_design(e, None, povm, eta=args.eta, eps=eps, reduce=not args.no_reduce)
    body = {
        "objective": d.objective,
        "posteriors": d.posteriors,
        "flags": d.flags,
        "x": d.x.matrix,
        "x_top_fraction": d.x.top_fraction(),
        "kraus": [k for k in d.kraus.operators],
        "bisection": d.trace,
        "diagnostics": d.diagnostics,
    }
    body["summary"] = {"objective": round_sig(d.objective, args.digits), "rank": d.flags["rank"],
                       "tp_defect": round_sig(d.flags["tp_defect"], args.digits)}
    _emit(clean(body), args.out)
    _log_summary(body["summary"], args.digits)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdetect", description="Quantum detector design by semidefinite programming.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="scenario JSON path, 'example' for the bundled two-state "
                                            "ensemble, or 'random' (see --seed)")
            p.add_argument("--seed", type=int, default=0, help="seed for a 'random' scenario")
            p.add_argument("--dim", type=int, default=2, help="dimension of a 'random' scenario")
            p.add_argument("--count", type=int, default=2, help="number of states in a 'random' scenario")
        p.add_argument("--digits", type=int, default=2, help="significant digits in the summary")
        p.add_argument("--out", default=None, help="output path (stdout if omitted)")

    p = sub.add_parser("design", help="optimize a POVM")
    common(p)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--eps", type=float, default=None, help="bisection tolerance (default 1e-6)")
    p.add_argument("--noise", default=None, help="noise matrix JSON path or FAMILY:NU0")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("certify", help="check optimality conditions for a POVM or report")
    common(p)
    p.add_argument("povm", help="POVM JSON or a design report")
    p.add_argument("--mode", choices=("avg-joint", "wc-posterior"), default=None)
    p.add_argument("--noise", default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="noise sweep table as CSV")
    common(p)
    p.add_argument("--family", choices=FAMILIES, default="both")
    p.add_argument("--grid", default=None, help="START:STOP:STEP or comma list (default 0:0.2:0.02)")
    p.add_argument("--fixed-povm", default=None,
                   help="POVM JSON to evaluate instead of re-optimizing, or 'zero' for the noise-free designs")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--workers", type=int, default=None, help="process pool size (default: logical cores)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("closed-form", help="analytic two-state designs")
    common(p, scenario=False)
    p.add_argument("input", help="JSON with kind, psi, r, beta, nu0, rho0, phi or scenario fields")
    p.add_argument("--kind", choices=CLOSED_FORMS, default=None)
    p.set_defaults(func=cmd_closed_form)

    p = sub.add_parser("osr-design", help="design the channel in front of a fixed POVM")
    common(p)
    p.add_argument("--povm", default=None, help="fixed POVM JSON (default: computational basis)")
    p.add_argument("--eta", type=float, default=None, help="upper bound on Tr X")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--no-reduce", action="store_true", help="skip the rank reduction step")
    p.set_defaults(func=cmd_osr_design)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        for h in exc.history[-10:]:
            print("  " + " ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                                  for k, v in h.items()), file=sys.stderr)
        return 2
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

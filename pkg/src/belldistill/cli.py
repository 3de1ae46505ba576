"""Command-line front end.

Every invocation writes one JSON report to stdout (sorted keys, floats with
17 significant digits); human-readable summaries go to stderr.  Exit codes:
0 success, 1 reproduction failure or falsified invariant, 2 input error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bell import (
    CHSH,
    MBK,
    MBK_PRIME,
    SVETLICHNY,
    UFFINK,
    BellOperator,
    MeasurementSettings,
    chsh_operator,
    mbk_operator,
    mbk_prime,
    svetlichny_operator,
    uffink_best_gamma,
    uffink_operator,
    uffink_value,
    violation,
)
from .bounds import beta_gamma_of_r, beta_of_r, overlap_requirement, uffink_overlap_optimum
from .distill import (
    FalsificationError,
    PreconditionError,
    appendix_b_check,
    corollary1_full_distill,
    lemma1_project,
    npt_partitions,
    theorem1_protocol,
    theorem2_classify,
)
from .optimize import OptimizeOptions, optimize_ghz_overlap, optimize_settings
from .presets import mbk_optimal
from .qlinalg import ContractViolation, DensityMatrix, DimensionCapError, classify_eigenvalue, set_max_qubits
from .repro import TARGETS
from .serialize import (
    StateFile,
    StateFileError,
    canonical_dumps,
    certificate_document,
    decode_state_file,
    digest,
    loads_with_offset,
    parse_constructor,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

FAMILY_NAMES = {"mbk": MBK, "mbk-prime": MBK_PRIME, "uffink": UFFINK, "svetlichny": SVETLICHNY, "chsh": CHSH}
OPTIMIZABLE = {"mbk": MBK, "uffink": UFFINK, "svetlichny": SVETLICHNY, "chsh": CHSH}

PROVENANCE = {
    "eval": "normalized violation tr(rho B)/lv_bound; beta > 1 is a Bell violation",
    "classify": "group size p from 2^((N-p)/2) < beta <= 2^((N-p+1)/2); full distillability and security flag for beta > 2^((N-2)/2)",
    "optimize": "maximal MBK violation of GHZ_N is 2^((N-1)/2)",
    "bounds": "beta(r) = 2^((N-1)/2) sqrt(r^2 + (1-r)^2/(2^(N-1)-1))",
    "repro": "reference thresholds: r3 = (1+sqrt3)/4, rU ~ 0.628, Mermin threshold of rho_3(r) ~ 0.687, W-mixture Uffink crossing pi/8",
    "certify": "falsification checks of the distillation implications on one instance",
}


class InputError(Exception):
    pass


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


# --- inputs ------------------------------------------------------------------


def load_state(spec: str) -> StateFile:
    if os.path.isfile(spec):
        with open(spec, "rb") as fh:
            return decode_state_file(fh.read())
    if ":" in spec:
        return parse_constructor(spec)
    raise StateFileError(f"no such state file or constructor: {spec!r}", 0)


def _settings_from_file(path: str) -> MeasurementSettings:
    with open(path, "rb") as fh:
        obj = loads_with_offset(fh.read())
    try:
        return MeasurementSettings.from_dict(obj.get("settings", obj))
    except (KeyError, AttributeError, TypeError, ValueError) as exc:
        raise StateFileError(f"malformed settings file: {exc}", 0) from None


def parse_op(spec: str, rho: DensityMatrix, args) -> tuple[str, str, MeasurementSettings | None]:
    """``family:settings`` -> (family, mode, settings).  ``mode`` is ``fixed`` or ``auto``."""
    family_name, _, setting = spec.partition(":")
    if family_name not in FAMILY_NAMES:
        raise StateFileError(f"unknown operator family {family_name!r}", 0)
    family = FAMILY_NAMES[family_name]
    n = rho.n_qubits
    setting = setting or "optimal"
    if setting == "optimal":
        return family, "fixed", mbk_optimal(n)
    if setting == "auto":
        return family, "auto", None
    if setting.startswith("angles="):
        raw = setting[len("angles=") :].split(",")
        try:
            vals = [float(v) for v in raw]
        except ValueError:
            raise StateFileError("angles must be comma-separated numbers", len(family_name) + 8) from None
        if len(vals) != 2 * n:
            raise StateFileError(f"need {2 * n} angles (alpha_1..alpha_N, alpha'_1..alpha'_N)", len(family_name) + 8)
        return family, "fixed", MeasurementSettings.from_angles(vals[:n], vals[n:])
    if setting.startswith("file="):
        return family, "fixed", _settings_from_file(setting[len("file=") :])
    raise StateFileError(f"unknown settings spec {setting!r}", len(family_name) + 1)


def options_from(args, planar: bool | None = None) -> OptimizeOptions:
    return OptimizeOptions(restarts=args.restarts, tol=args.tol, seed=args.seed, planar=planar)


def _space(args) -> bool | None:
    return {"auto": None, "planar": True, "general": False}[getattr(args, "settings_space", "auto")]


def build_operator(family: str, settings: MeasurementSettings, gamma: float | None) -> BellOperator:
    if family == MBK:
        return mbk_operator(settings)
    if family == MBK_PRIME:
        return mbk_prime(settings)
    if family == CHSH:
        return chsh_operator(settings)
    if family == SVETLICHNY:
        return svetlichny_operator(settings)
    return uffink_operator(settings, 0.0 if gamma is None else gamma)


def resolve_operator(args, rho: DensityMatrix) -> tuple[str, MeasurementSettings, float | None, dict]:
    """Settings (optimized if requested) plus a description for the report."""
    family, mode, settings = parse_op(args.op, rho, args)
    info: dict[str, Any] = {"spec": args.op, "family": family, "mode": mode}
    gamma = args.gamma
    if mode == "auto":
        opt_family = MBK if family == MBK_PRIME else family
        res = optimize_settings(rho, opt_family, options_from(args, _space(args)))
        # M' at swapped settings is M at the optimized ones
        settings = res.settings.swapped() if family == MBK_PRIME else res.settings
        info["optimizer"] = {"restarts": args.restarts, "seed": args.seed, "tol": args.tol, "beta": res.beta}
    if settings.n_qubits != rho.n_qubits:
        raise StateFileError(f"operator has {settings.n_qubits} qubits, state has {rho.n_qubits}", 0)
    return family, settings, gamma, info


# --- commands ------------------------------------------------------------------


def cmd_eval(args) -> tuple[dict, int]:
    sf = load_state(args.state)
    rho = sf.to_density()
    family, settings, gamma, info = resolve_operator(args, rho)
    if family == UFFINK and gamma is None:
        value = uffink_value(rho, settings)
        results = {"beta": value / math.sqrt(2), "trace": value, "lv_bound": math.sqrt(2), "gamma": uffink_best_gamma(rho, settings)}
    else:
        op = build_operator(family, settings, gamma)
        val = violation(rho, op)
        results = {"beta": val.beta, "trace": val.trace, "lv_bound": val.lv_bound, "gamma": op.gamma}
    results["settings"] = settings.to_dict()
    results["violated"] = results["beta"] > 1
    _err(f"beta = {results['beta']:.12g}  (tr = {results['trace']:.12g}, lv bound = {results['lv_bound']:.12g})")
    return {"inputs": {"state": sf.to_json(), "operator": info}, "results": results}, EXIT_OK


def _npt_table(rho: DensityMatrix) -> list[dict]:
    return [
        {"partition": a.sorted(), "min_eigenvalue": x, "verdict": classify_eigenvalue(x)} for a, x in npt_partitions(rho)
    ]


def cmd_classify(args) -> tuple[dict, int]:
    if args.beta is not None:
        if args.n_qubits is None:
            raise StateFileError("--beta needs --n-qubits", 0)
        inputs = {"beta": args.beta, "n_qubits": args.n_qubits}
        if args.beta <= 1:
            results = {"beta": args.beta, "classification": "none"}
        else:
            c = theorem2_classify(args.beta, args.n_qubits)
            results = {"beta": args.beta, "classification": c._asdict()}
        _err(f"classification: {results['classification']}")
        return {"inputs": inputs, "results": results}, EXIT_OK

    if args.state is None:
        raise StateFileError("classify needs --state or --beta", 0)
    sf = load_state(args.state)
    rho = sf.to_density()
    if args.op is None:
        res = optimize_settings(rho, MBK, options_from(args, _space(args) if args.settings_space != "auto" else False))
        op = mbk_operator(res.settings)
        info = {"spec": "mbk:auto", "family": MBK, "mode": "auto", "optimizer": {"restarts": args.restarts, "seed": args.seed}}
    else:
        family, settings, gamma, info = resolve_operator(args, rho)
        if family == UFFINK and gamma is None:
            gamma = uffink_best_gamma(rho, settings)
        op = build_operator(family, settings, gamma)
    beta = violation(rho, op).beta
    results: dict[str, Any] = {"beta": beta, "settings": op.settings.to_dict(), "npt_partitions": _npt_table(rho)}
    if beta <= 1:
        results["classification"] = "none"
    else:
        results["classification"] = theorem2_classify(beta, rho.n_qubits)._asdict()
        report = theorem1_protocol(rho, op)
        block = report.bipartite_evidence
        results["theorem1"] = {
            "block": {"K": block.k, "K_prime": block.k_prime, "partition": block.partition.sorted(), "determinant": block.determinant},
            "trace": report.protocol_trace,
            "projected_min_pt": report.projected_min_pt,
        }
    _err(f"beta = {beta:.12g}; classification: {results['classification']}")
    for row in results["npt_partitions"]:
        _err(f"  T_{row['partition']}: min eig {row['min_eigenvalue']:+.3e} ({row['verdict']})")
    return {"inputs": {"state": sf.to_json(), "operator": info}, "results": results}, EXIT_OK


def cmd_optimize(args) -> tuple[dict, int]:
    sf = load_state(args.state)
    rho = sf.to_density()
    options = options_from(args, _space(args))
    if args.overlap:
        res = optimize_ghz_overlap(rho, options)
        results = {"r_max": res.r_max, "angles": res.angles, "unitaries": [u for u in res.unitaries]}
        _err(f"max GHZ overlap = {res.r_max:.12g}")
    else:
        res = optimize_settings(rho, OPTIMIZABLE[args.family], options)
        results = {
            "beta": res.beta,
            "gamma": res.gamma,
            "settings": res.settings.to_dict(),
            "restart_values": list(res.restart_values),
            "evaluations": res.evaluations,
        }
        _err(f"{args.family}: beta = {res.beta:.12g} over {args.restarts} restarts")
    inputs = {"state": sf.to_json(), "options": {"restarts": options.restarts, "tol": options.tol, "seed": options.seed, "planar": options.planar}}
    return {"inputs": inputs, "results": results}, EXIT_OK


def cmd_bounds(args) -> tuple[dict, int]:
    if args.kind == "beta-of-r":
        b = beta_of_r(args.n_qubits, args.r)
        results = b._asdict()
    elif args.kind == "requirement":
        r = overlap_requirement(args.n_qubits, args.p)
        results = {"r": r, "unconstrained": r is None}
    else:
        opt = uffink_overlap_optimum(args.r, args.grid)
        results = {"beta_gamma": opt.value, "normalized": opt.value / math.sqrt(2), "delta": opt.delta, "gamma": opt.gamma}
    _err(canonical_dumps(results).strip())
    return {"inputs": {"kind": args.kind, "n_qubits": args.n_qubits, "r": args.r, "p": args.p}, "results": results}, EXIT_OK


def cmd_repro(args) -> tuple[dict, int]:
    fn = TARGETS[args.target]
    if args.target in ("mermin-threshold",):
        res = fn(options=OptimizeOptions(restarts=min(args.restarts, 8), seed=args.seed, tol=args.tol))
    elif args.target == "w-uffink":
        res = fn(options=OptimizeOptions(restarts=min(args.restarts, 8), seed=args.seed, tol=args.tol, planar=False))
    elif args.target == "mbk-max":
        res = fn(options=OptimizeOptions(restarts=args.restarts, seed=args.seed, tol=args.tol, planar=True))
    elif args.target == "constraint-sum":
        res = fn(seed=args.seed)
    else:
        res = fn()
    verdict = "PASS" if res.passed else "FAIL"
    _err(f"{res.name}: obtained {res.value:.6f}, reference {res.reference:.6f}, tolerance {res.tolerance:g} -> {verdict}")
    results = {"value": res.value, "reference": res.reference, "tolerance": res.tolerance, "passed": res.passed, "details": res.details}
    return {"inputs": {"target": args.target}, "results": results}, EXIT_OK if res.passed else EXIT_FAIL


def cmd_certify(args) -> tuple[dict, int]:
    sf = load_state(args.state)
    rho = sf.to_density()
    family, settings, gamma, info = resolve_operator(args, rho)
    if family == UFFINK and gamma is None:
        gamma = uffink_best_gamma(rho, settings)
    op = build_operator(family, settings, gamma)
    beta = violation(rho, op).beta
    checks: list[dict] = []
    certificate = None

    def run(name, fn):
        nonlocal certificate
        try:
            fn()
            checks.append({"check": name, "status": "held"})
        except PreconditionError as exc:
            checks.append({"check": name, "status": "not-applicable", "reason": str(exc)})
        except FalsificationError as exc:
            checks.append({"check": name, "status": "falsified", "invariant": exc.invariant})
            if certificate is None:
                certificate = certificate_document(exc.certificate)

    run("theorem1", lambda: theorem1_protocol(rho, op))
    if rho.n_qubits >= 2:
        for q in range(1, rho.n_qubits + 1):
            if rho.n_qubits > 2:
                run(f"lemma1_qubit{q}", lambda q=q: lemma1_project(rho, op, q))
        if rho.n_qubits >= 3:
            run("corollary1", lambda: corollary1_full_distill(rho, op))
    if rho.n_qubits == 3:
        checks.append({"check": "appendix_b", "parties": [r._asdict() for r in appendix_b_check(rho)]})
    if beta > 1:
        table = npt_partitions(rho)
        ok = any(x < -1e-9 for _, x in table)
        if beta > 2 ** ((rho.n_qubits - 2) / 2):
            ok = ok and all(x < -1e-9 for _, x in table)
        checks.append({"check": "npt_coverage", "status": "held" if ok else "falsified"})
        if not ok and certificate is None:
            certificate = certificate_document(
                {"invariant": "npt_coverage", "state": rho.matrix, "operator": {"family": family, "settings": settings.to_dict()}, "details": {"beta": beta}}
            )
    if certificate is not None and args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(canonical_dumps(certificate))
    status = EXIT_FAIL if certificate is not None else EXIT_OK
    _err(f"beta = {beta:.12g}; " + ("FALSIFIED" if certificate else "all applicable invariants held"))
    results = {"beta": beta, "checks": checks, "certificate": certificate}
    return {"inputs": {"state": sf.to_json(), "operator": info}, "results": results}, status


COMMANDS = {
    "eval": cmd_eval,
    "classify": cmd_classify,
    "optimize": cmd_optimize,
    "bounds": cmd_bounds,
    "repro": cmd_repro,
    "certify": cmd_certify,
}


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    common.add_argument("--restarts", type=int, default=16, help="optimizer restarts (default 16)")
    common.add_argument("--tol", type=float, default=1e-6, help="optimizer angle tolerance in rad (default 1e-6)")
    common.add_argument("--json-out", help="also write the report to this path")
    common.add_argument("--max-qubits", type=int, help="qubit cap (overrides MAX_QUBITS)")

    p = argparse.ArgumentParser(prog="belldistill", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    state_help = "state file or constructor (ghz:N, mixed:N, rho-r:N:r, w-mixture:alpha, padded-ghz:N, noisy-ghz:N:v, random:N:seed[:rank])"
    op_help = "family:settings with family in mbk|mbk-prime|uffink|svetlichny|chsh and settings optimal|auto|angles=a1,..|file=path"

    e = sub.add_parser("eval", parents=[common], help="evaluate a Bell operator on a state")
    e.add_argument("--state", required=True, help=state_help)
    e.add_argument("--op", required=True, help=op_help)
    e.add_argument("--gamma", type=float, help="fixed Uffink angle (default: best gamma)")
    e.add_argument("--settings-space", choices=("auto", "planar", "general"), default="auto")

    c = sub.add_parser("classify", parents=[common], help="distillability classification")
    c.add_argument("--state", help=state_help)
    c.add_argument("--op", help=op_help + " (default: optimize MBK)")
    c.add_argument("--optimize", action="store_true", help="optimize MBK settings (the default without --op)")
    c.add_argument("--gamma", type=float)
    c.add_argument("--beta", type=float, help="classify a bare violation value")
    c.add_argument("--n-qubits", type=int)
    c.add_argument("--settings-space", choices=("auto", "planar", "general"), default="auto")

    o = sub.add_parser("optimize", parents=[common], help="maximize a violation or the GHZ overlap")
    o.add_argument("--state", required=True, help=state_help)
    o.add_argument("--family", choices=sorted(OPTIMIZABLE), default="mbk")
    o.add_argument("--overlap", action="store_true", help="maximize the GHZ overlap over local unitaries instead")
    o.add_argument("--settings-space", choices=("auto", "planar", "general"), default="auto")

    b = sub.add_parser("bounds", parents=[common], help="overlap bounds")
    b.add_argument("kind", choices=("beta-of-r", "requirement", "beta-gamma"))
    b.add_argument("--n-qubits", type=int, default=3)
    b.add_argument("--r", type=float, default=1.0)
    b.add_argument("--p", type=int, default=2)
    b.add_argument("--grid", type=int, default=64)

    r = sub.add_parser("repro", parents=[common], help="recompute a reference threshold or identity")
    r.add_argument("target", choices=sorted(TARGETS))

    f = sub.add_parser("certify", parents=[common], help="run falsification checks, dump a certificate on failure")
    f.add_argument("--state", required=True, help=state_help)
    f.add_argument("--op", default="mbk:auto", help=op_help)
    f.add_argument("--gamma", type=float)
    f.add_argument("--out", help="write the certificate here when an invariant fails")
    f.add_argument("--settings-space", choices=("auto", "planar", "general"), default="auto")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    report: dict[str, Any] = {"command": args.command, "argv": argv, "seed": args.seed, "version": __version__}
    try:
        if args.max_qubits is not None:
            set_max_qubits(args.max_qubits)
        body, status = COMMANDS[args.command](args)
        report.update(body)
        report["inputs_digest"] = digest(body.get("inputs", {}))
        report["provenance"] = PROVENANCE[args.command]
    except StateFileError as exc:
        _err(f"input error: {exc}")
        report.update({"error": str(exc), "error_offset": exc.offset})
        status = EXIT_INPUT
    except (ContractViolation, DimensionCapError, PreconditionError, OSError, ValueError) as exc:
        _err(f"input error: {exc}")
        report.update({"error": str(exc)})
        status = EXIT_INPUT
    finally:
        if args.max_qubits is not None:
            set_max_qubits(None)
    report["exit_status"] = status
    text = canonical_dumps(report)
    sys.stdout.write(text)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())

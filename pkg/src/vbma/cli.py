"""Command-line front end.

Exit codes: 0 success, 1 solver non-convergence, 2 input error,
3 verification failure.  ``solve`` and ``verify`` always leave a report in
their output directory, including on failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fubini_study, io, mav, positivity, vortex
from .errors import ConfigParseError, SchemaMismatch, SolverError, VbmaError

SCHEMA_VERSION = "vbma-1"
REPORT_FILE = "report.json"
VERIFY_FILE = "verify.json"

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_INPUT = 2
EXIT_VERIFY = 3

log = logging.getLogger("vbma")


def manifest(command: str, config, outputs: list[str], result: dict) -> dict:
    """RunManifest plus the command result; contains no timestamps or paths to temp state."""
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "outputs": outputs,
        "result": result,
    }


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        sys.stdout.write(io.dumps(payload))
    else:
        print(human)


def _fail_input(args, command: str, exc: Exception) -> int:
    reason = getattr(exc, "reason", "input_error")
    payload = manifest(command, None, [], {"ok": False, "reason": reason, "message": str(exc)})
    if args.json:
        sys.stdout.write(io.dumps(payload))
    print(f"error ({reason}): {exc}", file=sys.stderr)
    return EXIT_INPUT


# -- subcommands ----------------------------------------------------------------


def cmd_solve(args) -> int:
    try:
        cfg = io.load_config(args.config)
    except VbmaError as exc:
        return _fail_input(args, "solve", exc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = mav.continuity_solve(cfg)
        code = EXIT_OK
    except SolverError as exc:
        report = getattr(exc, "report", None) or mav.SolutionReport(cfg, False, reason=exc.reason,
                                                                     message=str(exc))
        code = EXIT_NONCONVERGED
    io.save_solution(out, report)
    outputs = [io.SOLUTION_HEADER, REPORT_FILE]
    if report.psi_final is not None:
        outputs.insert(1, io.PSI_FILE)
    if args.dump and report.psi_final is not None:
        outputs += dump_fields(out, out)
    payload = manifest("solve", cfg.to_json(), outputs, report.to_json())
    io.write_json(out / REPORT_FILE, payload)
    m = report.monitors
    if code == EXIT_OK:
        human = (f"converged: r1={cfg.r1} r2={cfg.r2} n={cfg.n}  juncture={m['juncture_value']:.12f} "
                 f"(target {m['juncture_target']:.12f})  max|phi|^2={m['max_phi2']:.6f}  "
                 f"residual={m['residual']:.2e}")
    else:
        human = f"not converged ({report.reason}): {report.message}"
    _emit(args, payload, human)
    return code


def dump_fields(solution_dir, out_dir) -> list[str]:
    """Write psi.csv, phi2.csv and residual.csv for a stored solution."""
    cfg, psi, header = io.load_solution(solution_dir)
    t = header.get("monitors", {}).get("t", 1.0)
    state = mav.make_state(t, psi, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fields = {
        "psi.csv": psi.values,
        "phi2.csv": state.phi2,
        "residual.csv": mav.mav_residual(state, cfg).values,
    }
    for name, values in fields.items():
        io.write_field_csv(out / name, psi.grid, values)
    return list(fields)


def cmd_dump(args) -> int:
    try:
        names = dump_fields(args.solution, args.out)
    except VbmaError as exc:
        return _fail_input(args, "dump", exc)
    payload = manifest("dump", None, names, {"ok": True})
    _emit(args, payload, "wrote " + ", ".join(names))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        cfg, psi, header = io.load_solution(args.solution)
    except VbmaError as exc:
        return _fail_input(args, "verify", exc)
    out = Path(args.solution)
    result: dict = {"ok": False}
    code = EXIT_VERIFY
    if not header.get("converged"):
        result.update(reason="not_converged", message="stored solution did not converge")
    else:
        try:
            sol = vortex.VortexSolution(cfg, psi, mav.recover_f2(psi, cfg))
        except SolverError as exc:
            result.update(reason=exc.reason, message=str(exc))
        else:
            samples = vortex.cp1_samples(args.cp1_samples, args.seed)
            result.update(vortex.verify(sol, samples))
            result["ok"] = vortex.verification_passed(result)
            if result["ok"]:
                code = EXIT_OK
            else:
                result["reason"] = "verification_failed"
    payload = manifest("verify", cfg.to_json(), [VERIFY_FILE], result)
    io.write_json(out / VERIFY_FILE, payload)
    if result["ok"]:
        human = (f"verified: reduced residuals {result['reduced_res'][0]:.2e}, {result['reduced_res'][1]:.2e}; "
                 f"Griffiths margin {result['griffiths_min_margin']:.4f}; "
                 f"Chern gap max {result['chern_gap_max']:.4f}")
    else:
        human = f"verification failed ({result.get('reason')})"
    _emit(args, payload, human)
    return code


def _parse_instance(obj) -> tuple[positivity.EndoForm11, dict]:
    if not isinstance(obj, dict):
        raise ConfigParseError("instance must be a JSON object")
    try:
        F = positivity.EndoForm11.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"malformed instance: {exc}") from exc
    opts = {"samples": obj.get("samples", 256), "seed": obj.get("seed", 0), "eta": obj.get("eta")}
    for key in ("samples", "seed"):
        if isinstance(opts[key], bool) or not isinstance(opts[key], int):
            raise ConfigParseError(f"{key} must be an integer")
    return F, opts


def cmd_positivity(args) -> int:
    try:
        F, opts = _parse_instance(io.read_json(args.input))
        griff = positivity.griffiths_check(F, samples=opts["samples"], seed=opts["seed"])
    except (VbmaError, ValueError) as exc:
        return _fail_input(args, "positivity", exc)
    M = positivity.wedge_square(F)
    result = {
        "nakano": positivity.nakano_check(F).to_json(),
        "ma": positivity.ma_check(F).to_json(),
        "griffiths": griff.to_json(),
        "wedge_square": [[[float(v.real), float(v.imag)] for v in row] for row in M],
    }
    if F.r == 2:
        result["chern_gap"] = positivity.chern_gap(F)
    if opts["eta"] is not None:
        result["vbma_residual"] = positivity.vbma_residual(F, float(opts["eta"]))
    payload = manifest("positivity", {"input": str(args.input)}, [], result)
    human = "  ".join(f"{k}: {'positive' if result[k]['positive'] else 'not positive'} "
                      f"(margin {result[k]['margin']:.6g})" for k in ("nakano", "ma", "griffiths"))
    _emit(args, payload, human)
    return EXIT_OK


def cmd_fs_check(args) -> int:
    try:
        origin = fubini_study.FSPoint.origin(args.n)
    except VbmaError as exc:
        return _fail_input(args, "fs-check", exc)
    rng = np.random.default_rng(args.seed)
    points = [origin] + [fubini_study.FSPoint(args.n, rng.normal(size=args.n) + 1j * rng.normal(size=args.n))
                         for _ in range(args.samples)]
    checks = [fubini_study.fs_power_check(args.n, p) for p in points]
    lams = [c.lam for c in checks]
    spread = max(lams) - min(lams)
    base = checks[0].to_json()
    result = {
        "n": args.n,
        "lambda": base["lambda"],
        "lambda_spread": spread,
        "max_off_identity_residual": max(c.off_identity_residual for c in checks),
        "claimed_constant": base["claimed_constant"],
        "derived_constant": base["derived_constant"],
        "matches_claimed": base["matches_claimed"],
        "matches_derived": base["matches_derived"],
        "discrepancy": base["discrepancy"],
        "points": len(points),
    }
    if args.n == 2:
        result["cp2_origin"] = {k: v.to_json() for k, v in fubini_study.fs_ma_nakano_check().items()}
    ok = result["max_off_identity_residual"] < 1e-12 and spread < 1e-10
    result["ok"] = ok
    payload = manifest("fs-check", {"n": args.n, "samples": args.samples, "seed": args.seed}, [], result)
    human = (f"CP^{args.n}: lambda = {result['lambda']:.12f} over {len(points)} points "
             f"(derived (n+1)/n = {result['derived_constant']:.12f}, stated 2)"
             + ("  [discrepancy with the stated constant]" if result["discrepancy"] else ""))
    _emit(args, payload, human)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_slopes(args) -> int:
    try:
        rec = vortex.ma_slopes(args.r1, args.r2)
    except ValueError as exc:
        return _fail_input(args, "slopes", exc)
    payload = rec.to_json()
    if args.json:
        sys.stdout.write(io.dumps(payload))
    else:
        print(f"mu_MA(S) = {rec.mu_ma_sub}, mu_MA(V) = {rec.mu_ma_total}, "
              f"{'MA-stable' if rec.ma_stable else 'not MA-stable'}, Mumford gap = {rec.mumford_gap}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vbma",
                                     description="Monge-Ampere vortex solver and positivity checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="run the continuity solver")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump", action="store_true", help="also write field CSVs")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], help="check a stored solution")
    p.add_argument("--solution", required=True)
    p.add_argument("--cp1-samples", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dump", parents=[common], help="write psi, phi2 and residual CSVs")
    p.add_argument("--solution", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("positivity", parents=[common], help="classify one curvature instance")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_positivity)

    p = sub.add_parser("fs-check", parents=[common], help="Fubini-Study power identity on CP^n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fs_check)

    p = sub.add_parser("slopes", parents=[common], help="MA and Mumford slopes of the vortex bundle")
    p.add_argument("--r1", type=int, required=True)
    p.add_argument("--r2", type=int, required=True)
    p.set_defaults(func=cmd_slopes)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SchemaMismatch as exc:
        return _fail_input(args, args.command, exc)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success or positive verdict, 1 validation failure, 2 I/O or
parse error, 3 negative soliton verdict.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .flows import (
    FlowError,
    integrate_bracket_flow,
    integrate_coupling,
    integrate_geometric_flow,
    normalized_bracket_flow,
    verify_equivalence,
)
from .integrate import IntegrationError, IntegratorConfig
from .lie import DimensionError, check_admissibility, jacobi_residual
from .problems import Problem, ProblemParseError, resolve
from .solitons import classify_A_dynamics, detect_fixed_point_up_to_scaling, frequencies, solve_semi_algebraic
from .tensors import InvariantTensor, adk_invariance_residual, exterior_differential, stabilizer_algebra, theta_action

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_NOT_SOLITON = 0, 1, 2, 3
EQUIVALENCE_TOL = 1e-5


@dataclass
class RunReport:
    source: str
    command: str
    exit_code: int = EXIT_OK
    admissibility: list = field(default_factory=list)
    certificate: str | None = None
    files: list = field(default_factory=list)
    halt_reason: str | None = None
    wall_time: float = 0.0

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "report.json"
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")
        return path


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _matrix(m: np.ndarray) -> str:
    m = np.where(np.abs(m) < 1e-12, 0.0, m) + 0.0  # no negative zeros
    return np.array2string(m, precision=6, suppress_small=True)


def _config(args, problem: Problem) -> IntegratorConfig:
    spec = problem.flow
    kw = {} if spec is None else dict(rel_tol=spec.rel_tol, abs_tol=spec.abs_tol, max_step=spec.max_step)
    if args.tol is not None:
        kw.update(rel_tol=args.tol, abs_tol=1e-2 * args.tol)
    if args.max_step is not None:
        kw["max_step"] = args.max_step
    return IntegratorConfig(**kw)


def _validate(problem: Problem, args, report: RunReport) -> int:
    tol = args.tol or 1e-9
    mu = problem.bracket()
    split = problem.split
    gamma = problem.gamma()
    jac = jacobi_residual(mu)
    adm = check_admissibility(mu, split, gamma, tol=tol)
    report.admissibility = adm.lines()
    for line in adm.lines():
        print(line)
    if split.k_dim:
        print(f"Ad(K)-invariance residual: {adk_invariance_residual(mu, split, gamma):.3e}")
    ok = adm.passed and jac <= tol * max(1.0, mu.norm() ** 2)
    rng = np.random.default_rng(args.seed)
    n = split.p_dim
    a, b = rng.standard_normal((2, n, n))
    lhs = theta_action(a @ b - b @ a, gamma).components
    rhs = (theta_action(a, theta_action(b, gamma)).components
           - theta_action(b, theta_action(a, gamma)).components)
    print(f"theta representation residual (seed {args.seed}): {np.max(np.abs(lhs - rhs)):.3e}")
    if split.k_dim == 0 and mu.total_dim >= 3:
        one_form = InvariantTensor(rng.standard_normal(n), r=1, kind="generic")
        dd = exterior_differential(mu, split, exterior_differential(mu, split, one_form))
        print(f"d(d alpha) residual on a random 1-form (seed {args.seed}): {np.max(np.abs(dd.components)):.3e}")
    print("VALID" if ok else "INVALID")
    return EXIT_OK if ok else EXIT_INVALID


def _soliton(problem: Problem, args, report: RunReport) -> int:
    mu = problem.bracket(validate=True)
    gamma = problem.gamma()
    cert = solve_semi_algebraic(mu, problem.split, gamma, problem.preferred_direction(), d00=args.d00)
    report.certificate = cert.to_record()
    if args.format == "record":
        print(cert.to_record())
    else:
        if not cert.is_soliton:
            print(f"NOT A SOLITON residual={cert.residual:.3e}")
        else:
            kind = "ALGEBRAIC SOLITON" if cert.is_algebraic else "SEMI-ALGEBRAIC SOLITON"
            scale = max(1.0, float(np.linalg.norm(cert.Q)))
            if np.linalg.norm(cert.D) <= 1e-10 * scale:
                print(f"{kind} {cert.soliton_type} (Einstein, D=0)")
            else:
                print(f"{kind} {cert.soliton_type} c'={_fmt(cert.c_prime)}")
        print(f"c' = {_fmt(cert.c_prime)}" + ("" if cert.c_prime_unique else " (not unique)"))
        print(f"flow constant c = {_fmt(cert.flow_constant_c)}")
        print(f"residual = {cert.residual:.3e}")
        print("D =")
        print(_matrix(cert.D))
        print("A (antisymmetric part of D_p) =")
        print(_matrix(cert.A))
    return EXIT_OK if cert.is_soliton else EXIT_NOT_SOLITON


def _flow(problem: Problem, args, report: RunReport, out_dir: Path) -> int:
    mu = problem.bracket(validate=True)
    split = problem.split
    gamma = problem.gamma()
    direction = problem.preferred_direction()
    which = args.which or (problem.flow.which if problem.flow else "bracket")
    t_span = (problem.flow.t_span if problem.flow else (0.0, 1.0))
    if args.t_end is not None:
        t_span = (t_span[0], args.t_end)
    cfg = _config(args, problem)
    try:
        if which == "geometric":
            traj = integrate_geometric_flow(gamma, mu, direction, t_span, cfg, split)
        elif which == "bracket":
            traj = integrate_bracket_flow(mu, split, gamma, direction, t_span, cfg)
        else:
            traj = normalized_bracket_flow(mu, split, gamma, direction, t_span, cfg)
    except FlowError as exc:
        print(f"flow aborted: {exc}")
        return EXIT_INVALID
    report.halt_reason = traj.halt_reason
    print(f"{which} flow over [{_fmt(t_span[0])}, {_fmt(t_span[1])}]")
    print(f"halt reason: {traj.halt_reason} at t={_fmt(traj.times[-1])}")
    print(f"accepted steps: {traj.step_stats.accepted}, rejected: {traj.step_stats.rejected}")
    if traj.blowup_exponent is not None:
        print(f"blow-up fit: exponent {traj.blowup_exponent:.4f}, time {_fmt(traj.blowup_time)}")
    if which == "normalized":
        limit = solve_semi_algebraic(traj.final, split, gamma, direction)
        print(f"terminal velocity: {np.linalg.norm(traj.derivatives[-1]):.3e}")
        print(f"limit certificate: {limit.soliton_type}, residual {limit.residual:.3e}")
    csv_path = Path(args.csv) if args.csv else out_dir / f"{problem.name or 'problem'}_{which}.csv"
    traj.to_csv(csv_path)
    report.files.append(str(csv_path))
    print(f"trajectory: {csv_path}")
    code = EXIT_OK
    if args.detect_fixed_point:
        btraj = traj if traj.kind == "bracket" else integrate_bracket_flow(mu, split, gamma, direction, t_span, cfg)
        fixed, dev = detect_fixed_point_up_to_scaling(btraj, split)
        print(f"FIXED POINT UP TO SCALING: {'yes' if fixed else 'no'} (deviation {dev:.3e})")
    if args.verify_equivalence:
        tg = integrate_coupling("tensor_side", mu, split, gamma, direction, t_span, cfg)
        tb = integrate_coupling("bracket_side", mu, split, gamma, direction, t_span, cfg)
        res_g, res_m = verify_equivalence(tg, tb, tg, mu, gamma, split)
        ok = max(res_g, res_m) < EQUIVALENCE_TOL
        print(f"equivalence residuals: tensor {res_g:.3e}, bracket {res_m:.3e} ({'ok' if ok else 'FAILED'})")
        code = EXIT_OK if ok else EXIT_INVALID
    return code


def _stabilizer(problem: Problem, args, report: RunReport) -> int:
    gamma = problem.gamma()
    dec = stabilizer_algebra(gamma)
    stab, comp = dec.dims
    print(f"kind: {gamma.kind}, p_dim: {gamma.p_dim}")
    print(f"stabilizer dimension: {stab}")
    print(f"complement dimension: {comp}")
    print(f"complement invariant under the stabilizer: {'yes' if dec.invariant_complement else 'not certified'}")
    return EXIT_OK


def _read_matrix(path: str) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
        a = np.asarray(data["A"] if isinstance(data, dict) else data, dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        try:
            a = np.loadtxt(io.StringIO(text), ndmin=2)
        except ValueError as exc:
            raise ProblemParseError(f"{path}: cannot read a matrix") from exc
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ProblemParseError(f"{path}: need a square matrix, got shape {a.shape}")
    return a


def _classify(path: str, args) -> int:
    a = _read_matrix(path)
    freqs = frequencies(a)
    print("frequencies: " + (", ".join(_fmt(f) for f in freqs) if len(freqs) else "none"))
    print(classify_A_dynamics(a))
    return EXIT_OK


def run_one(command: str, source: str, args, out_dir: Path) -> int:
    start = time.perf_counter()
    report = RunReport(source, command)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if command == "classify-A":
            report.exit_code = _classify(source, args)
        else:
            problem = resolve(source)
            if command == "validate":
                report.exit_code = _validate(problem, args, report)
            elif command == "soliton":
                report.exit_code = _soliton(problem, args, report)
            elif command == "flow":
                report.exit_code = _flow(problem, args, report, out_dir)
            else:
                report.exit_code = _stabilizer(problem, args, report)
    except (ProblemParseError, DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        report.exit_code = EXIT_IO
    except (ValueError, IntegrationError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        report.exit_code = EXIT_INVALID
    report.wall_time = time.perf_counter() - start
    if args.output_dir and report.exit_code != EXIT_IO:
        report.write(out_dir)
    return report.exit_code


def _batch_worker(command, source, args, out_dir):
    buf_out, buf_err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(buf_out), contextlib.redirect_stderr(buf_err):
        code = run_one(command, source, args, out_dir)
    return code, buf_out.getvalue(), buf_err.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="integrator relative tolerance for flows; check tolerance for validate")
    common.add_argument("--max-step", type=float, default=None)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--output-dir", default=None)
    common.add_argument("--batch", default=None, metavar="DIR",
                        help="run the command on every *.json problem in DIR concurrently")

    parser = argparse.ArgumentParser(prog="bracketflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    src_help = "problem file, or preset:NAME"
    p = sub.add_parser("validate", parents=[common], help="check Jacobi and admissibility")
    p.add_argument("source", nargs="?", help=src_help)
    p = sub.add_parser("soliton", parents=[common], help="solve for a soliton certificate")
    p.add_argument("source", nargs="?", help=src_help)
    p.add_argument("--d00", action=argparse.BooleanOptionalAction, default=None,
                   help="restrict to derivations vanishing on k (default: automatic)")
    p.add_argument("--format", choices=("text", "record"), default="text")
    p = sub.add_parser("flow", parents=[common], help="integrate a flow")
    p.add_argument("source", nargs="?", help=src_help)
    p.add_argument("--which", choices=("geometric", "bracket", "normalized"), default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--verify-equivalence", action="store_true")
    p.add_argument("--detect-fixed-point", action="store_true")
    p = sub.add_parser("stabilizer", parents=[common], help="stabilizer decomposition dimensions")
    p.add_argument("source", nargs="?", help=src_help)
    p = sub.add_parser("classify-A", parents=[common], help="periodic or quasi-periodic dynamics of exp(sA)")
    p.add_argument("source", nargs="?", help="matrix file (JSON or whitespace text)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    base = Path(args.output_dir or ".")
    if args.batch is None:
        if args.source is None:
            parser.error("a source is required unless --batch is given")
        return run_one(args.command, args.source, args, base)
    batch = Path(args.batch)
    if not batch.is_dir():
        print(f"error: {batch} is not a directory", file=sys.stderr)
        return EXIT_IO
    files = sorted(batch.glob("*.json"))
    if getattr(args, "csv", None):
        print("error: --csv names one file; use --output-dir with --batch", file=sys.stderr)
        return EXIT_IO
    workers = min(len(files), os.cpu_count() or 1) or 1
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_batch_worker, args.command, str(f), args, base / f.stem) for f in files]
        codes = []
        for f, fut in zip(files, futures):
            code, out, err = fut.result()
            print(f"== {f.name} (exit {code})")
            sys.stdout.write(out)
            sys.stderr.write(err)
            codes.append(code)
    return max(codes, default=EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

    corm check         --spec PATH [--out DIR]
    corm tails         --spec PATH [--grid LO:HI:N] [--tol T] [--force] [--out DIR]
    corm verify-thm4   --spec PATH [--d 2,3,4] [--tol T] [--seed N] [--points N] [--out DIR]
    corm simulate      --spec PATH [--reps R] [--seed N] [--eps E] [--max-atoms N]
                       [--thresholds 0.5,1,2,5] [--save-draws K] [--force] [--out DIR]

Exit codes: 0 success / WellPosed, 1 IllPosed, 2 Inconclusive, 3 a verification
or validation failed, 64 usage or spec-file errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .errors import CormError, IllPosedSpec, NonExponentialScores, SpecParseError, TruncationBias
from .expcorm import verify_theorem4
from .integrability import Posedness, check_corm
from .quad import QuadConfig
from .sim import Truncation, sample_corm, validate_tails
from .specfile import load_spec
from .tails import default_grid, verify_theorem3, write_tail_csv

EXIT_OK = 0
EXIT_ILL_POSED = 1
EXIT_INCONCLUSIVE = 2
EXIT_FAILED = 3
EXIT_USAGE = 64

POSEDNESS_EXIT = {
    Posedness.WELL_POSED: EXIT_OK,
    Posedness.ILL_POSED: EXIT_ILL_POSED,
    Posedness.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    Posedness.BOUNDARY: EXIT_INCONCLUSIVE,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def atomic_write(path: Path, write: Callable[[Path], None]) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text(path: Path, text: str) -> None:
    atomic_write(path, lambda p: p.write_text(text, encoding="utf-8"))


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    def write(p):
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    atomic_write(path, write)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=str) + "\n"


def write_manifest(out: Path, args: argparse.Namespace, command: str, config: QuadConfig, extra: dict | None = None) -> None:
    data = Path(args.spec).read_bytes()
    manifest = {
        "command": command,
        "argv": list(args.argv),
        "spec_path": str(args.spec),
        "spec_sha256": hashlib.sha256(data).hexdigest(),
        "version": __version__,
        "quad_config": config.to_dict(),
        "seed": getattr(args, "seed", None),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    _write_text(out / "manifest.json", _json(manifest))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_grid(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--grid expects LO:HI:N, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--grid expects LO:HI:N, got {text!r}") from None
    if n < 3 or not (0 < lo < hi) or not math.isfinite(hi):
        raise UsageError(f"--grid needs 0 < LO < HI and N >= 3, got {text!r}")
    return default_grid(lo, hi, n)


def _parse_list(text: str, kind=float, name="list"):
    try:
        items = [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects a comma separated list, got {text!r}") from None
    if not items:
        raise UsageError(f"--{name} is empty")
    return items


def _gate(spec, force: bool, config: QuadConfig) -> int | None:
    """Exit code when the spec is not WellPosed and --force was not given."""
    if force:
        return None
    verdict = check_corm(spec, config, direct=False).multivariate
    if verdict is Posedness.WELL_POSED:
        return None
    print(f"refusing {verdict.value} specification (use --force to override)", file=sys.stderr)
    return POSEDNESS_EXIT[verdict]


def cmd_check(args) -> int:
    config = QuadConfig()
    spec = load_spec(args.spec)
    verdict = check_corm(spec, config)
    out = _out_dir(args)
    rows = []
    for m in verdict.marginals:
        lv = m.levy_integral
        rows.append([
            m.j + 1,
            m.cond_6.verdict.value, repr(m.cond_6.value),
            m.cond_7.verdict.value, repr(m.cond_7.value),
            m.shortcut_10.status.value, m.shortcut_11.status.value,
            m.analytic.value if m.analytic else "",
            lv.verdict.value if lv else "", repr(lv.value) if lv else "",
            m.overall.value,
        ])
    header = ["j", "cond_6", "cond_6_value", "cond_7", "cond_7_value", "shortcut_10", "shortcut_11",
              "analytic", "levy_integral", "levy_integral_value", "overall"]
    _write_rows(out / "check.csv", header, rows)
    _write_text(out / "verdict.json", _json(verdict.to_dict()))
    write_manifest(out, args, "check", config, {"verdict": verdict.multivariate.value})
    print(f"{verdict.multivariate.value}")
    for row in rows:
        print(f"  j={row[0]}: cond_6 {row[1]}, cond_7 {row[3]}, shortcuts {row[5]}/{row[6]} -> {row[-1]}")
    if verdict.direct is not None:
        dc = verdict.direct
        print(f"  multivariate integral {dc.result.value:.6g} ({dc.result.verdict.value}), bound {dc.bound:.6g}")
    return POSEDNESS_EXIT[verdict.multivariate]


def cmd_tails(args) -> int:
    config = QuadConfig()
    grid = _parse_grid(args.grid)
    spec = load_spec(args.spec)
    code = _gate(spec, args.force, config)
    if code is not None:
        return code
    out = _out_dir(args)
    diag_rows = []
    ok = True
    for j, m in enumerate(spec.score.marginals):
        rep = verify_theorem3(m, spec.directing, grid, config, tol=args.tol)
        atomic_write(out / f"tails_j{j + 1}.csv", lambda p, t=rep.table: write_tail_csv(p, t))
        dg = rep.diagnostic
        expected = "" if rep.expected_factor is None else repr(rep.expected_factor)
        diag_rows.append([j + 1, repr(rep.sigma), repr(dg.sigma_hat), repr(dg.residual), repr(dg.slope_drift),
                          repr(min(r for *_, r in dg.ratio_table)), repr(max(r for *_, r in dg.ratio_table)),
                          repr(rep.factor_estimate), expected, dg.verdict, int(rep.passed)])
        ok &= rep.passed
        print(f"j={j + 1}: {dg.verdict} (directing index {rep.sigma:g}) {'ok' if rep.passed else 'FAILED'}")
    header = ["j", "sigma", "sigma_hat", "residual", "slope_drift", "ratio_min", "ratio_max",
              "factor_at_min_y", "expected_factor", "verdict", "passed"]
    _write_rows(out / "rv_diagnostic.csv", header, diag_rows)
    write_manifest(out, args, "tails", config, {"grid": args.grid, "tol": args.tol})
    return EXIT_OK if ok else EXIT_FAILED


def cmd_verify_thm4(args) -> int:
    config = QuadConfig()
    d_list = _parse_list(args.d, int, "d")
    if any(d < 1 for d in d_list):
        raise UsageError("--d entries must be positive")
    if args.points < 1:
        raise UsageError("--points must be positive")
    spec = load_spec(args.spec)
    if not spec.score.is_standard_exponential():
        raise NonExponentialScores("verify-thm4 needs iid standard exponential scores")
    report = verify_theorem4(spec.directing, d_list, tol=args.tol, config=config, n_points=args.points, seed=args.seed)
    out = _out_dir(args)
    atomic_write(out / "theorem4.csv", report.write_csv)
    write_manifest(out, args, "verify-thm4", config, {"d": d_list, "tol": args.tol, "points": args.points})
    for d in d_list:
        rows = [r for r in report.rows if r.d == d]
        fails = sum(not r.passed for r in rows)
        print(f"d={d}: max rel dev {max(r.rel_dev for r in rows):.3e}, {len(rows) - fails}/{len(rows)} pass ({rows[0].path})")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_simulate(args) -> int:
    config = QuadConfig()
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.save_draws < 0:
        raise UsageError("--save-draws must be non-negative")
    thresholds = _parse_list(args.thresholds, float, "thresholds")
    truncation = Truncation(eps=args.eps, max_atoms=args.max_atoms)
    spec = load_spec(args.spec)
    code = _gate(spec, args.force, config)
    if code is not None:
        return code
    out = _out_dir(args)
    meta = []
    for rep in range(min(args.save_draws, args.reps)):
        draw = sample_corm(spec, truncation, args.seed, rep, force=True)
        atomic_write(out / f"atoms_rep{rep}.csv", draw.write_csv)
        m = draw.metadata()
        meta.append([rep, m["n_atoms"], repr(m["eps"]), repr(m["eps_effective"]), m["stopped_by"]])
    if meta:
        _write_rows(out / "draws.csv", ["rep", "n_atoms", "eps", "eps_effective", "stopped_by"], meta)
    try:
        report = validate_tails(spec, thresholds, args.reps, args.seed, truncation, force=True, config=config)
    except TruncationBias as exc:
        print(f"validation impossible: {exc}", file=sys.stderr)
        write_manifest(out, args, "simulate", config, {"truncation": truncation.to_dict(), "reps": args.reps})
        return EXIT_FAILED
    atomic_write(out / "sim_report.csv", report.write_csv)
    write_manifest(out, args, "simulate", config,
                   {"truncation": truncation.to_dict(), "reps": args.reps, "thresholds": thresholds, "passed": report.passed})
    for r in report.rows:
        flag = "ok" if r.within else "OUTSIDE"
        if not r.valid:
            flag = "excluded"
        print(f"j={r.j + 1} y={r.y:g}: mean {r.mean_count:.4f} expected {r.expected:.4f} z={r.z_score:+.2f} {flag}")
    print("validation " + ("passed" if report.passed else "FAILED"))
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corm", description="Compound random measure checks, tails and simulation.")
    parser.add_argument("--version", action="version", version=f"corm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--spec", required=True, help="TOML specification file")
        p.add_argument("--out", default=".", help="output directory (default: current)")

    p = sub.add_parser("check", help="well-posedness verdict")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("tails", help="marginal tail table and regular-variation diagnostic")
    common(p)
    p.add_argument("--grid", default="1e-6:1e-1:50", help="log grid LO:HI:N (default 1e-6:1e-1:50)")
    p.add_argument("--tol", type=float, default=0.02, help="tolerance on the recovered index")
    p.add_argument("--force", action="store_true", help="run on specs that are not WellPosed")
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("verify-thm4", help="derivative form of the exponential-score intensity")
    common(p)
    p.add_argument("--d", default="2,3,4", help="comma separated dimensions")
    p.add_argument("--tol", type=float, default=None, help="pass iff rel_dev < TOL (default 1e-5 analytic, 1e-4 numeric)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=20, help="random points per dimension")
    p.set_defaults(func=cmd_verify_thm4)

    p = sub.add_parser("simulate", help="series simulation and tail validation")
    common(p)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-8, help="smallest retained directing jump")
    p.add_argument("--max-atoms", type=int, default=100_000)
    p.add_argument("--thresholds", default="0.5,1,2,5")
    p.add_argument("--save-draws", type=int, default=1, help="write atom CSVs for the first K replications")
    p.add_argument("--force", action="store_true", help="run on specs that are not WellPosed")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    try:
        return args.func(args)
    except (UsageError, SpecParseError, NonExponentialScores) as exc:
        print(f"corm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IllPosedSpec as exc:
        print(f"corm {args.command}: {exc}", file=sys.stderr)
        return EXIT_ILL_POSED
    except (CormError, ValueError) as exc:
        print(f"corm {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

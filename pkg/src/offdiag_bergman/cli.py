"""Command-line entry point: ``offdiag-bergman {verify-j2,model-run,fit,report}``.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .fit import FitError
from .harness import (
    ConfigError,
    SchemaError,
    consolidate,
    fit_and_report,
    full_report,
    load_config,
    model_run,
    read_csv,
    verify_j2,
    write_csv,
)

log = logging.getLogger("offdiag_bergman")


def _emit_paths(path: Path) -> tuple[Path, Path]:
    stem = path.with_suffix("")
    return stem.with_name(stem.name + ".computed.txt"), stem.with_name(stem.name + ".reference.txt")


def _print_checks(report: dict) -> None:
    for c in report.get("checks", []):
        status = "PASS" if c["passed"] else "FAIL"
        src = f"[{c['source']}] " if "source" in c else ""
        print(f"{status} {src}{c['id']}: measured={c['measured']!r} tol={c['tolerance']!r}")


def cmd_verify_j2(args) -> int:
    record, computed, reference = verify_j2(args.dim)
    if args.emit:
        path = Path(args.emit)
        path.write_text(json.dumps(record, indent=2))
        cpath, rpath = _emit_paths(path)
        cpath.write_text(computed)
        rpath.write_text(reference)
    _print_checks(record)
    for m in record["mismatches"]:
        print(f"mismatch at {m['monomial']}: computed {m['computed']} vs reference {m['reference']}")
    return 0 if record["passed"] else 1


def _config_from_args(args, **extra):
    return load_config(
        args.config,
        manifold=getattr(args, "manifold", None),
        ps=args.p,
        points=getattr(args, "points", None),
        sigma=getattr(args, "sigma", None),
        seed=getattr(args, "seed", None),
        workers=getattr(args, "workers", None),
        max_r=getattr(args, "max_r", None),
        **extra,
    )


def cmd_model_run(args) -> int:
    cfg = _config_from_args(args, csv_path=args.out)
    rows, errors = model_run(cfg)
    for e in errors:
        print(f"chart violation: {e}", file=sys.stderr)
    write_csv(rows, cfg.manifold, cfg.csv_path)
    print(f"wrote {len(rows)} rows to {cfg.csv_path}")
    return 0


def cmd_fit(args) -> int:
    cfg = _config_from_args(args, json_path=args.out)
    kind, groups = read_csv(args.input)
    try:
        report = fit_and_report(kind, groups, cfg)
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 1
    Path(cfg.json_path).write_text(json.dumps(report, indent=2))
    _print_checks(report)
    return 0 if report["passed"] else 1


def cmd_report(args) -> int:
    if args.inputs:
        reports = []
        for path in args.inputs:
            try:
                reports.append((path, json.loads(Path(path).read_text())))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read report {path}: {exc}") from exc
        summary = consolidate(reports)
        if args.out:
            Path(args.out).write_text(json.dumps(summary, indent=2))
    else:
        cfg = load_config(args.config, workers=args.workers)
        summary = full_report(args.out_dir, cfg)
    _print_checks(summary)
    print("OVERALL", "PASS" if summary["passed"] else "FAIL")
    return 0 if summary["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="offdiag-bergman", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-j2", help="derive J2 symbolically and compare with the closed form")
    p.add_argument("--dim", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--emit", help="JSON record path; polynomials go next to it")
    p.set_defaults(func=cmd_verify_j2)

    def sweep_options(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--p", type=int, nargs="+", help="tensor powers (>= 10)")
        p.add_argument("--max-r", dest="max_r", type=int)

    p = sub.add_parser("model-run", help="sample rescaled kernels on a model manifold")
    sweep_options(p)
    p.add_argument("--manifold", choices=("CP1", "torus"))
    p.add_argument("--points", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_model_run)

    p = sub.add_parser("fit", help="fit half-power coefficients and evaluate checks")
    sweep_options(p)
    p.add_argument("--in", dest="input", required=True, help="CSV from model-run")
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="consolidate reports, or run everything when none are given")
    p.add_argument("inputs", nargs="*", help="JSON reports from verify-j2 / fit")
    p.add_argument("--out", help="consolidated JSON path (with inputs)")
    p.add_argument("--out-dir", default="report", help="artifact directory for the full run")
    p.add_argument("--config", help="JSON config file for the full run")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

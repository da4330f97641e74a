"""Orchestration: symbolic verification, model sweeps, fits and reports.

Every check carries an identifier naming the claim it certifies, a
tolerance and the measured value, so a failing report points directly at
the statement that did not hold.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .expansion import (
    bundle_term,
    combined_p_inverse_coefficient,
    compute_J2,
    o2_tilde,
    o2_tilde_reordered,
    reference_bundle_image,
    reference_bundle_image_adjoint,
    reference_J2,
    reference_O2_tilde_image,
    reference_O2_tilde_image_adjoint,
    reference_O2_tilde_image_unsimplified,
    structure_check,
)
from .fit import DEFAULT_PS, FitError, fit_half_powers, rate_estimate
from .manifolds import ChartError, RescaledSample, get_manifold, numeric_curvature, rescaled_sample
from .model_calculus import OffDiagPolynomial, adjoint, evaluate, model_gaussian, resolve_against_P
from .tensor_ring import TensorScalar, bundle_curvature, scalar_curvature

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "SchemaError",
    "RunConfig",
    "load_config",
    "sample_points",
    "verify_j2",
    "model_run",
    "write_csv",
    "read_csv",
    "fit_and_report",
    "diagonal_check",
    "consolidate",
    "full_report",
]


class ConfigError(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass
class RunConfig:
    """Parameters of one model sweep and its fit.

    Defaults: perfect-square sweep 25..400, 8 sample pairs in the closed
    unit disk, seed 0.  ``max_r`` is the highest half power fitted for
    curved manifolds; ``flat_max_r`` and ``flat_p_min`` apply to the flat
    torus, whose coefficients are all zero so high fit orders only
    amplify round-off.
    """

    manifold: str = "CP1"
    ps: list[int] = field(default_factory=lambda: list(DEFAULT_PS))
    points: int = 8
    sigma: float = 1.0
    seed: int = 0
    x0: tuple[float, float] = (0.0, 0.0)
    workers: int = 1
    max_r: int = 8
    flat_max_r: int = 4
    flat_p_min: int = 30
    quadrature_nodes: int = 200
    fd_step: float = 1e-3
    csv_path: str | None = None
    json_path: str | None = None

    def validate(self) -> "RunConfig":
        if not 0 < self.sigma <= 1:
            raise ConfigError(f"sigma must lie in (0, 1], got {self.sigma}")
        if not self.ps or any(int(p) != p or p < 10 for p in self.ps):
            raise ConfigError(f"p values must be integers >= 10, got {self.ps}")
        if len(set(self.ps)) != len(self.ps):
            raise ConfigError("p values must be distinct")
        if self.points < 1:
            raise ConfigError("need at least one sample pair")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        get_manifold(self.manifold)
        for path in (self.csv_path, self.json_path):
            if path is not None:
                parent = Path(path).resolve().parent
                if not parent.is_dir():
                    raise ConfigError(f"output directory {parent} does not exist")
        self.ps = sorted(int(p) for p in self.ps)
        self.x0 = (float(self.x0[0]), float(self.x0[1]))
        return self

    @property
    def base_point(self) -> complex:
        return complex(*self.x0)


def load_config(path: str | None = None, **overrides: Any) -> RunConfig:
    """Read a JSON config file, apply non-None overrides, validate."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def sample_points(count: int, sigma: float, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic pairs ``(u, u')`` drawn uniformly from the disk of radius ``sigma``."""
    rng = np.random.default_rng(seed)

    def disk():
        r = sigma * math.sqrt(rng.uniform())
        a = rng.uniform(0, 2 * math.pi)
        return np.array([r * math.cos(a), r * math.sin(a)])

    return [(disk(), disk()) for _ in range(count)]


def _check(cid: str, description: str, tolerance: float, measured: float, passed: bool, **extra) -> dict:
    out = {
        "id": cid,
        "description": description,
        "tolerance": tolerance,
        "measured": float(measured),
        "passed": bool(passed),
    }
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Symbolic verification
# ---------------------------------------------------------------------------

def _mismatches(a: OffDiagPolynomial, b: OffDiagPolynomial) -> list[dict]:
    ta, tb = a.terms, b.terms
    out = []
    for key in sorted(set(ta) | set(tb)):
        ca, cb = ta.get(key, TensorScalar()), tb.get(key, TensorScalar())
        if ca != cb:
            out.append({"monomial": [list(e) for e in key], "computed": ca.render(), "reference": cb.render()})
    return out


def b1_symbolic(dim: int) -> TensorScalar:
    """``rbar/(8 pi) + (1/pi) sum_q RE_{q qbar}``."""
    total = scalar_curvature(dim) * TensorScalar.const(Fraction(1, 8), -1)
    for q in range(1, dim + 1):
        total = total + bundle_curvature(q, q, dim) * TensorScalar.const(1, -1)
    return total


def verify_j2(dim: int) -> tuple[dict, str, str]:
    """Compare the derived ``J2`` with the closed form plus intermediate identities.

    Returns the JSON record and the golden renderings of both polynomials.
    """
    if not 1 <= dim <= 3:
        raise ConfigError(f"dimension must be 1, 2 or 3, got {dim}")
    start = time.perf_counter()
    j2 = compute_J2(dim)
    ref = reference_J2(dim)
    elapsed = time.perf_counter() - start
    mism = _mismatches(j2, ref)

    image = resolve_against_P(o2_tilde(dim))
    e_image = -resolve_against_P(bundle_term(dim))
    structure = structure_check(j2, 2)
    combined = combined_p_inverse_coefficient(dim, j2, bundle=False)
    checks = [
        _check("j2-closed-form", "derived J2 equals the closed form coefficient-exactly", 0, len(mism), not mism),
        _check(
            "o2-reordering",
            "O2~ with b moved right normal-orders back to O2~",
            0,
            0 if o2_tilde_reordered(dim) == o2_tilde(dim) else 1,
            o2_tilde_reordered(dim) == o2_tilde(dim),
        ),
        _check(
            "o2-resolvent-image",
            "O2~ P resolves to both written forms of its bracket",
            0,
            len(_mismatches(image, reference_O2_tilde_image(dim))),
            image == reference_O2_tilde_image(dim) == reference_O2_tilde_image_unsimplified(dim),
        ),
        _check(
            "o2-resolvent-adjoint",
            "adjoint of the O2~ P bracket",
            0,
            len(_mismatches(adjoint(image), reference_O2_tilde_image_adjoint(dim))),
            adjoint(image) == reference_O2_tilde_image_adjoint(dim),
        ),
        _check(
            "bundle-resolvent-image",
            "bundle-curvature term resolved against P",
            0,
            len(_mismatches(e_image, reference_bundle_image(dim))),
            e_image == reference_bundle_image(dim),
        ),
        _check(
            "bundle-resolvent-adjoint",
            "adjoint of the bundle-curvature bracket",
            0,
            len(_mismatches(adjoint(e_image), reference_bundle_image_adjoint(dim))),
            adjoint(e_image) == reference_bundle_image_adjoint(dim),
        ),
        _check(
            "b1-scalar-curvature",
            "J2(0,0) = rbar/(8 pi) + (1/pi) RE_{q qbar}",
            0,
            0 if j2.constant_term() == b1_symbolic(dim) else 1,
            j2.constant_term() == b1_symbolic(dim),
        ),
        _check(
            "j2-structure",
            "J2 has even degrees bounded by 6",
            0,
            len(structure.violations),
            structure.passed,
            degrees=structure.degrees,
        ),
        _check(
            "combined-degree4-plus-constant",
            "with RE = 0 the combined 1/p coefficient has no degree-2 part",
            0,
            len(combined.homogeneous_part(2)),
            combined.degrees() <= {0, 4} and not combined.homogeneous_part(2),
            degrees=sorted(combined.degrees()),
        ),
        _check("hermitian", "J2 is self-adjoint", 0, 0 if adjoint(j2) == j2 else 1, adjoint(j2) == j2),
    ]
    record = {
        "dim": dim,
        "equal": not mism,
        "num_terms": len(j2),
        "mismatches": mism,
        "seconds": round(elapsed, 6),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    return record, j2.render(), ref.render()


# ---------------------------------------------------------------------------
# Model sweeps
# ---------------------------------------------------------------------------

CSV_FIELDS = [
    "point",
    "p",
    "ReZ1",
    "ReZ2",
    "ReZ1'",
    "ReZ2'",
    "re_value",
    "im_value",
    "model",
    "kappa_left",
    "kappa_right",
    "deviation",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _sample_task(args):
    kind, p, x0, u, up = args
    try:
        return rescaled_sample(get_manifold(kind), p, x0, u, up), None
    except ChartError as exc:
        return None, str(exc)


def model_run(cfg: RunConfig) -> tuple[list[tuple[int, RescaledSample]], list[str]]:
    """Sample the rescaled kernel for every (point, p); chart errors are collected."""
    pairs = sample_points(cfg.points, cfg.sigma, cfg.seed)
    tasks = [(cfg.manifold, p, cfg.base_point, u, up) for u, up in pairs for p in cfg.ps]
    labels = [i for i in range(len(pairs)) for _ in cfg.ps]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sample_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    else:
        results = [_sample_task(t) for t in tasks]
    rows, errors = [], []
    for label, task, (sample, err) in zip(labels, tasks, results):
        if err is not None:
            errors.append(f"point {label}, p={task[1]}: {err}")
        else:
            rows.append((label, sample))
    return rows, errors


def write_csv(rows: Sequence[tuple[int, RescaledSample]], manifold: str, path: str | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for label, s in rows:
        writer.writerow(
            [
                label,
                s.p,
                _fmt(s.u[0]),
                _fmt(s.u[1]),
                _fmt(s.up[0]),
                _fmt(s.up[1]),
                _fmt(s.value.real),
                _fmt(s.value.imag),
                manifold,
                _fmt(s.kappa_left),
                _fmt(s.kappa_right),
                _fmt(s.deviation),
            ]
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path: str) -> tuple[str, dict[int, list[RescaledSample]]]:
    """Parse a sweep CSV into per-point sample lists; validates the schema."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise SchemaError(f"{path} is empty")
    missing = [f for f in CSV_FIELDS if f not in reader.fieldnames]
    if missing:
        raise SchemaError(f"{path} lacks columns {missing}")
    groups: dict[int, list[RescaledSample]] = {}
    kinds = set()
    for lineno, row in enumerate(reader, start=2):
        try:
            u = (float(row["ReZ1"]), float(row["ReZ2"]))
            up = (float(row["ReZ1'"]), float(row["ReZ2'"]))
            sample = RescaledSample(
                int(row["p"]),
                u,
                up,
                complex(float(row["re_value"]), float(row["im_value"])),
                float(row["kappa_left"]),
                float(row["kappa_right"]),
                complex(model_gaussian(np.asarray(u), np.asarray(up))),
            )
            groups.setdefault(int(row["point"]), []).append(sample)
            kinds.add(row["model"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    if not groups:
        raise SchemaError(f"{path} has no data rows")
    if len(kinds) != 1:
        raise SchemaError(f"{path} mixes manifolds {sorted(kinds)}")
    kind = kinds.pop()
    get_manifold(kind)
    return kind, groups


# ---------------------------------------------------------------------------
# Fitting and checks
# ---------------------------------------------------------------------------

def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / abs(b) if b != 0 else math.inf


def _curved_point_checks(samples, prediction_combined, prediction_j2, cfg: RunConfig) -> tuple[dict, list[dict]]:
    raw = [(s.p, s.raw) for s in samples]
    corrected = [(s.p, s.value) for s in samples]
    model = samples[0].model
    fit_raw = fit_half_powers(raw, cfg.max_r)
    fit_cor = fit_half_powers(corrected, cfg.max_r)
    wider = fit_half_powers(raw, cfg.max_r + 1)
    c0, c1, c2 = fit_raw.coefficient(0), fit_raw.coefficient(1), fit_raw.coefficient(2)
    slope = rate_estimate([(s.p, s.deviation) for s in samples])
    stab = max(_rel(wider.coefficient(0), c0), _rel(wider.coefficient(2), c2))
    checks = [
        _check("c0-model-limit", "c0 equals P(u,u') (relative)", 1e-3, _rel(c0, model), _rel(c0, model) <= 1e-3),
        _check("c1-vanishes", "|c1| <= tol * |c0|", 1e-3, abs(c1) / abs(c0), abs(c1) <= 1e-3 * abs(c0)),
        _check(
            "c2-combined",
            "c2 of the uncorrected kernel equals the combined 1/p coefficient times P (relative)",
            0.02,
            _rel(c2, prediction_combined),
            _rel(c2, prediction_combined) <= 0.02,
        ),
        _check(
            "c2-j2",
            "c2 of the density-corrected kernel equals J2 times P (relative)",
            0.02,
            _rel(fit_cor.coefficient(2), prediction_j2),
            _rel(fit_cor.coefficient(2), prediction_j2) <= 0.02,
        ),
        _check("deviation-rate", "log-log slope of |rescaled - P| against p", -0.9, slope, slope <= -0.9),
        _check(
            "fit-stability",
            "one more half power changes c0 and c2 by less than tol (relative)",
            0.005,
            stab,
            stab <= 0.005,
        ),
    ]
    entry = {
        "c": [[z.real, z.imag] for z in fit_raw.coefficients],
        "c_corrected": [[z.real, z.imag] for z in fit_cor.coefficients],
        "residual": fit_raw.residual,
        "condition": fit_raw.condition,
        "prediction_combined": [prediction_combined.real, prediction_combined.imag],
        "prediction_j2": [prediction_j2.real, prediction_j2.imag],
    }
    return entry, checks


def _flat_point_checks(samples, cfg: RunConfig) -> tuple[dict, list[dict]]:
    usable = [s for s in samples if s.p >= cfg.flat_p_min]
    if not usable:
        raise FitError(f"no samples with p >= {cfg.flat_p_min}; add larger p values")
    dev = max(s.deviation for s in usable)
    fit = fit_half_powers([(s.p, s.value) for s in usable], cfg.flat_max_r)
    high = float(np.max(np.abs(fit.coefficients[1:]))) if len(fit.coefficients) > 1 else 0.0
    checks = [
        _check("flat-deviation", f"sup |rescaled - P| over p >= {cfg.flat_p_min}", 1e-8, dev, dev <= 1e-8),
        _check("flat-coefficients", "max |c_r| for r >= 1", 1e-6, high, high <= 1e-6),
        _check(
            "c0-model-limit",
            "c0 equals P(u,u') (absolute)",
            1e-6,
            abs(fit.coefficient(0) - samples[0].model),
            abs(fit.coefficient(0) - samples[0].model) <= 1e-6,
        ),
    ]
    entry = {
        "c": [[z.real, z.imag] for z in fit.coefficients],
        "residual": fit.residual,
        "condition": fit.condition,
    }
    return entry, checks


def fit_and_report(kind: str, groups: dict[int, list[RescaledSample]], cfg: RunConfig) -> dict:
    """Fit every sample point and evaluate the manifold's checks."""
    manifold = get_manifold(kind)
    flat = kind.lower() == "torus"
    if not flat:
        data = numeric_curvature(manifold, cfg.base_point, cfg.fd_step)
        combined = combined_p_inverse_coefficient(1)
        j2 = compute_J2(1)
    points = []
    for label in sorted(groups):
        samples = sorted(groups[label], key=lambda s: s.p)
        u, up = np.array(samples[0].u), np.array(samples[0].up)
        if flat:
            entry, checks = _flat_point_checks(samples, cfg)
        else:
            pred_c = evaluate(combined, data, u, up, with_gaussian=True)
            pred_j = evaluate(j2, data, u, up, with_gaussian=True)
            entry, checks = _curved_point_checks(samples, pred_c, pred_j, cfg)
        entry = {"point": label, "u": list(samples[0].u), "u_prime": list(samples[0].up), **entry}
        entry["checks"] = {c["id"]: c for c in checks}
        points.append(entry)
    summary = []
    for cid in points[0]["checks"]:
        results = [pt["checks"][cid] for pt in points]
        # every measured value here is "larger is worse", slopes included
        worst = max(results, key=lambda c: (not c["passed"], c["measured"]))
        summary.append(
            _check(
                cid,
                worst["description"],
                worst["tolerance"],
                worst["measured"],
                all(c["passed"] for c in results),
                scope=f"all {len(points)} points",
            )
        )
    return {
        "manifold": kind,
        "points": points,
        "checks": summary,
        "passed": all(c["passed"] for c in summary),
    }


def diagonal_check(ps: Iterable[int] = DEFAULT_PS, tol: float = 1e-12) -> dict:
    """CP1: rescaled diagonal kernel equals ``1 + 1/p`` and the FD curvature equals pi."""
    manifold = get_manifold("CP1")
    worst = max(abs(rescaled_sample(manifold, p, 0j, (0, 0), (0, 0)).value - (1 + 1 / p)) for p in ps)
    R = numeric_curvature(manifold).R[0, 0, 0, 0]
    return {
        "checks": [
            _check("diagonal-b1", "max |rescaled(0,0) - (1 + 1/p)|", tol, worst, worst <= tol),
            _check("curvature-fd", "|R_{1 1bar 1 1bar} - pi|", 1e-6, abs(R - math.pi), abs(R - math.pi) <= 1e-6),
        ]
    }


def consolidate(reports: Sequence[tuple[str, dict]]) -> dict:
    """Merge named reports; overall pass iff every listed check passed."""
    checks = []
    for name, rep in reports:
        for c in rep.get("checks", []):
            checks.append({"source": name, **c})
    return {"checks": checks, "passed": bool(checks) and all(c["passed"] for c in checks)}


def full_report(out_dir: str, cfg: RunConfig | None = None) -> dict:
    """Run the whole verification in-process and write artifacts into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = cfg or RunConfig().validate()
    reports = []
    for dim in (1, 2, 3):
        record, computed, reference = verify_j2(dim)
        (out / f"j2_dim{dim}.json").write_text(json.dumps(record, indent=2))
        (out / f"j2_dim{dim}.computed.txt").write_text(computed)
        (out / f"j2_dim{dim}.reference.txt").write_text(reference)
        reports.append((f"verify-j2 dim={dim}", record))
    for kind in ("CP1", "torus"):
        run_cfg = replace(cfg, manifold=kind)
        rows, errors = model_run(run_cfg)
        for e in errors:
            log.warning(e)
        csv_path = out / f"{kind}.csv"
        write_csv(rows, kind, str(csv_path))
        kind_read, groups = read_csv(str(csv_path))
        rep = fit_and_report(kind_read, groups, run_cfg)
        (out / f"{kind}_fit.json").write_text(json.dumps(rep, indent=2))
        reports.append((f"fit {kind}", rep))
    reports.append(("diagonal CP1", diagonal_check(cfg.ps)))
    summary = consolidate(reports)
    (out / "report.json").write_text(json.dumps(summary, indent=2))
    return summary

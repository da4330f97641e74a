"""Least-squares extraction of half-integer power coefficients in ``1/p``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["FitError", "ExpansionFit", "fit_half_powers", "rate_estimate", "DEFAULT_PS"]

#: perfect squares 25..400, so sqrt(p) is exact
DEFAULT_PS = tuple(k * k for k in range(5, 21))


class FitError(ValueError):
    """The p-sweep cannot determine the requested coefficients."""


@dataclass
class ExpansionFit:
    powers: list[float]
    coefficients: np.ndarray  # complex, one per power
    residual: float
    condition: float

    def coefficient(self, r: int) -> complex:
        return complex(self.coefficients[r])


def fit_half_powers(samples: Sequence[tuple[float, complex]], max_r: int) -> ExpansionFit:
    """Fit ``value(p) ~ sum_{r=0}^{max_r} c_r p^{-r/2}``.

    The design matrix is column-equilibrated and solved by SVD-based least
    squares.  ``condition`` is the 2-norm condition number of the scaled
    design matrix.
    """
    if max_r < 0:
        raise FitError("max_r must be non-negative")
    ps = np.array([float(p) for p, _ in samples])
    vals = np.array([complex(v) for _, v in samples])
    if len(set(ps.tolist())) != len(ps):
        raise FitError("p values must be distinct")
    if len(ps) < max_r + 2:
        raise FitError(
            f"{len(ps)} distinct p values cannot fit {max_r + 1} coefficients with a residual; "
            f"add at least {max_r + 2 - len(ps)} more p values"
        )
    if np.any(ps <= 0):
        raise FitError("p values must be positive")
    A = ps[:, None] ** (-np.arange(max_r + 1) / 2.0)[None, :]
    scale = np.abs(A).max(axis=0)
    As = A / scale
    sv = np.linalg.svd(As, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise FitError(
            f"design matrix is rank deficient (condition {cond:.3g}); "
            "spread the p values further apart or add p values"
        )
    sol, *_ = np.linalg.lstsq(As.astype(complex), vals, rcond=None)
    coef = sol / scale
    residual = float(np.max(np.abs(A @ coef - vals)))
    return ExpansionFit([r / 2 for r in range(max_r + 1)], coef, residual, cond)


def rate_estimate(samples: Sequence[tuple[float, float]], floor: float = 0.0) -> float:
    """Slope of ``log(deviation)`` against ``log(p)``.

    Deviations at or below ``floor`` are treated as noise and dropped.
    """
    pts = [(float(p), float(d)) for p, d in samples if d > floor]
    if len(pts) < 4:
        raise FitError(f"only {len(pts)} deviations above the noise floor; need at least 4")
    lp = np.log([p for p, _ in pts])
    ld = np.log([d for _, d in pts])
    slope, _ = np.polyfit(lp, ld, 1)
    return float(slope)

"""Finite-p Bergman kernels on model Kaehler curves.

Two model manifolds are provided, both of complex dimension one and both
normalized so that the Kaehler form is the curvature form of the
prequantum line bundle (total volume 1):

* :class:`CP1` -- the Riemann sphere with the area-1 Fubini-Study form,
  ``L = O(1)``, affine coordinate ``w``, ``|1|_h^2 = 1/(1+|w|^2)``.
* :class:`FlatTorus` -- ``C / (Z + iZ)`` with the flat form ``dx dy``,
  holomorphic sections of ``L^p`` realized as theta functions in the
  gauge ``|1|_h^2 = exp(-2 pi y^2)``.

Points are complex affine coordinates.  Tangent vectors at the base
point are real 2-vectors ``Z`` in an orthonormal frame, ``z = Z1 + i Z2``.
The trivialized kernel ``P_{p,x0}(Z, Z')`` uses unit frames parallel
transported along radial geodesics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .model_calculus import model_gaussian
from .tensor_ring import CurvatureData

__all__ = [
    "ChartError",
    "ModelManifold",
    "CP1",
    "FlatTorus",
    "HolomorphicFrame",
    "KernelSample",
    "RescaledSample",
    "get_manifold",
    "section_basis_norms",
    "bergman_kernel",
    "normal_chart",
    "transport_factor",
    "kappa",
    "trivialized_kernel",
    "rescaled_kernel",
    "rescaled_sample",
    "numeric_curvature",
]

SQRT_PI = math.sqrt(math.pi)


class ChartError(ValueError):
    """A tangent vector or point lies outside the chart where formulas hold."""


@dataclass(frozen=True)
class HolomorphicFrame:
    """Local frame ``g(w) * sigma^p`` of ``L^p`` with ``g`` holomorphic, nonvanishing.

    ``dlog`` is ``g'/g``.  Used to check that trivialized kernels do not
    depend on the frame used internally.
    """

    g: Callable[[complex], complex]
    dlog: Callable[[complex], complex]


def _as_z(Z) -> complex:
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (2,):
        raise ValueError(f"expected a real 2-vector, got shape {Z.shape}")
    return complex(Z[0], Z[1])


class ModelManifold:
    kind: str = ""
    n: int = 1
    #: radius in tangent space within which the normal chart is valid
    chart_radius: float = 0.0

    # -- geometry in the affine coordinate -----------------------------
    def metric(self, w):
        """``g_{w wbar}``; the Riemannian metric is ``2 g |dw|^2``."""
        raise NotImplementedError

    def log_frame_norm(self, w):
        """``log |sigma(w)|_h^2`` for the standard frame of ``L``."""
        raise NotImplementedError

    def connection(self, w, dw):
        """Connection form of the standard frame of ``L`` evaluated on ``dw``."""
        raise NotImplementedError

    # -- holomorphic sections ------------------------------------------
    def dimension(self, p: int) -> int:
        raise NotImplementedError

    def basis_norms(self, p: int) -> np.ndarray:
        raise NotImplementedError

    def sections(self, p: int, w) -> np.ndarray:
        """Basis sections in the standard frame, shape ``w.shape + (dim,)``."""
        raise NotImplementedError

    def unit_kernel(self, p: int, w, w2):
        """``k(w, w2) |sigma^p(w)| |sigma^p(w2)|`` computed without overflow."""
        raise NotImplementedError

    def frame_kernel(self, p: int, w, w2):
        """Kernel coefficient ``k(w, w2)`` in the standard frame ``sigma^p``."""
        norms = self.basis_norms(p)
        s1 = self.sections(p, np.asarray(w))
        s2 = self.sections(p, np.asarray(w2))
        return np.sum(s1 * np.conj(s2) / norms, axis=-1)

    # -- normal coordinates ---------------------------------------------
    def exp_map(self, x0: complex, z: complex) -> complex:
        raise NotImplementedError

    def exp_velocity(self, x0: complex, z: complex, t: float) -> tuple[complex, complex]:
        """Point and velocity of ``t -> exp_{x0}(t Z)``."""
        raise NotImplementedError

    def kappa(self, x0: complex, z: complex) -> float:
        raise NotImplementedError

    def transport_phase(self, p: int, x0: complex, z: complex) -> complex:
        """Closed-form unit ``u`` with ``sigma^p/|sigma^p| = u * e`` at ``exp_{x0}(Z)``."""
        raise NotImplementedError

    def quadrature(self, nodes: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes (affine coordinates) and weights for ``dv_X = omega``."""
        raise NotImplementedError

    def check_chart(self, z: complex) -> None:
        if abs(z) >= self.chart_radius:
            raise ChartError(f"|Z| = {abs(z):.6g} outside chart radius {self.chart_radius:.6g}")


class CP1(ModelManifold):
    kind = "CP1"
    # half the distance to the cut locus (the antipode sits at sqrt(pi)/2)
    chart_radius = SQRT_PI / 2

    def metric(self, w):
        return 1.0 / (2 * np.pi * (1 + np.abs(w) ** 2) ** 2)

    def log_frame_norm(self, w):
        return -np.log1p(np.abs(w) ** 2)

    def connection(self, w, dw):
        return -np.conj(w) * dw / (1 + np.abs(w) ** 2)

    def dimension(self, p):
        return p + 1

    def basis_norms(self, p):
        # ||w^j||^2 = j! (p-j)! / (p+1)!
        j = np.arange(p + 1)
        return np.exp(gammaln(j + 1) + gammaln(p - j + 1) - gammaln(p + 2))

    def sections(self, p, w):
        w = np.asarray(w, dtype=complex)
        return w[..., None] ** np.arange(p + 1)

    def unit_kernel(self, p, w, w2):
        w, w2 = np.asarray(w, complex), np.asarray(w2, complex)
        expo = np.log1p(w * np.conj(w2)) - 0.5 * (np.log1p(np.abs(w) ** 2) + np.log1p(np.abs(w2) ** 2))
        return (p + 1) * np.exp(p * expo)

    def closed_kernel(self, p, w, w2):
        return (p + 1) * (1 + np.asarray(w) * np.conj(w2)) ** p

    @staticmethod
    def _mobius(x0, v):
        # isometry of the sphere sending 0 to x0 with positive real derivative at 0
        return (v + x0) / (1 - np.conj(x0) * v)

    def exp_map(self, x0, z):
        self.check_chart(z)
        r = abs(z)
        v = 0j if r == 0 else math.tan(SQRT_PI * r) * z / r
        return complex(self._mobius(x0, v))

    def exp_velocity(self, x0, z, t):
        r = abs(z)
        if r == 0:
            return complex(x0), 0j
        s = SQRT_PI * r * t
        v = math.tan(s) * z / r
        dv = SQRT_PI * z / math.cos(s) ** 2
        w = self._mobius(x0, v)
        dw = (1 + abs(x0) ** 2) / (1 - np.conj(x0) * v) ** 2 * dv
        return complex(w), complex(dw)

    def kappa(self, x0, z):
        self.check_chart(z)
        s = 2 * SQRT_PI * abs(z)
        return 1.0 if s == 0 else math.sin(s) / s

    def transport_phase(self, p, x0, z):
        w = self.exp_map(x0, z)
        a = 1 + np.conj(x0) * w
        return complex((np.conj(a) / abs(a)) ** p)

    def quadrature(self, nodes):
        x, wt = np.polynomial.legendre.leggauss(nodes)
        theta = (x + 1) * np.pi / 2
        wtheta = wt * np.pi / 2
        m = 2 * nodes
        phi = 2 * np.pi * np.arange(m) / m
        T, F = np.meshgrid(theta, phi, indexing="ij")
        W = np.outer(wtheta * np.sin(theta), np.full(m, 2 * np.pi / m)) / (4 * np.pi)
        pts = np.tan(T / 2) * np.exp(1j * F)
        return pts.ravel(), W.ravel()


class FlatTorus(ModelManifold):
    """Square torus ``C/(Z + iZ)`` with one flux quantum per cell."""

    kind = "torus"
    chart_radius = 0.5

    def metric(self, w):
        return 0.5 * np.ones_like(np.real(w))

    def log_frame_norm(self, w):
        return -2 * np.pi * np.imag(w) ** 2

    def connection(self, w, dw):
        return 2j * np.pi * np.imag(w) * dw

    def dimension(self, p):
        return p

    def basis_norms(self, p):
        return np.full(p, 1 / math.sqrt(2 * p))

    def _theta_terms(self, p, w):
        # theta_j(w) = sum_{k = j mod p} exp(-pi k^2/p + 2 pi i k w); returns
        # the normalized values theta_j(w) * exp(-pi p y^2), terms < 1e-18 dropped
        w = np.atleast_1d(np.asarray(w, complex))
        y = w.imag
        half = int(math.ceil(math.sqrt(p * 18 * math.log(10) / math.pi))) + 2
        centre = np.rint(-p * y).astype(int)
        ks = centre[:, None] + np.arange(-half, half + 1)[None, :]
        expo = -np.pi * ks**2 / p + 2j * np.pi * ks * w[:, None] - np.pi * p * (y**2)[:, None]
        vals = np.exp(expo)
        out = np.zeros((w.size, p), complex)
        rows = np.repeat(np.arange(w.size), ks.shape[1])
        np.add.at(out, (rows, (ks % p).ravel()), vals.ravel())
        return out

    def sections(self, p, w):
        w = np.asarray(w, complex)
        unit = self._theta_terms(p, w.ravel())
        scale = np.exp(np.pi * p * np.imag(w.ravel()) ** 2)
        return (unit * scale[:, None]).reshape(w.shape + (p,))

    def unit_kernel(self, p, w, w2):
        w, w2 = np.broadcast_arrays(np.asarray(w, complex), np.asarray(w2, complex))
        a = self._theta_terms(p, w.ravel())
        b = self._theta_terms(p, w2.ravel())
        val = math.sqrt(2 * p) * np.sum(a * np.conj(b), axis=-1)
        return val.reshape(w.shape) if w.shape else complex(val[0])

    def exp_map(self, x0, z):
        self.check_chart(z)
        return complex(x0 + z)

    def exp_velocity(self, x0, z, t):
        return complex(x0 + t * z), complex(z)

    def kappa(self, x0, z):
        self.check_chart(z)
        return 1.0

    def transport_phase(self, p, x0, z):
        return complex(np.exp(2j * np.pi * p * z.real * (np.imag(x0) + z.imag / 2)))

    def quadrature(self, nodes):
        t = (np.arange(nodes) + 0.5) / nodes
        X, Y = np.meshgrid(t, t, indexing="ij")
        return (X + 1j * Y).ravel(), np.full(nodes * nodes, 1.0 / nodes**2)


_MANIFOLDS = {"CP1": CP1, "cp1": CP1, "torus": FlatTorus, "FlatTorus": FlatTorus}


def get_manifold(kind: str) -> ModelManifold:
    try:
        return _MANIFOLDS[kind]()
    except KeyError:
        raise ValueError(f"unknown manifold {kind!r}; choose CP1 or torus") from None


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def _check_p(p: int) -> None:
    if int(p) != p or p < 1:
        raise ValueError(f"tensor power must be an integer >= 1, got {p}")


def section_basis_norms(manifold: ModelManifold, p: int, method: str = "closed", nodes: int = 200) -> np.ndarray:
    """Squared L2 norms of the standard basis of ``H^0(X, L^p)``."""
    _check_p(p)
    if method == "closed":
        return manifold.basis_norms(p)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    pts, wts = manifold.quadrature(nodes)
    s = manifold.sections(p, pts)
    weight = np.exp(p * manifold.log_frame_norm(pts)) * wts
    return np.real(np.sum(np.abs(s) ** 2 * weight[:, None], axis=0))


def bergman_kernel(manifold: ModelManifold, p: int, x, y, method: str = "basis"):
    """``sum_j s_j(x) conj(s_j(y)) / ||s_j||^2`` in the standard frame of ``L^p``."""
    _check_p(p)
    if method == "basis":
        return manifold.frame_kernel(p, x, y)
    if method == "closed" and isinstance(manifold, CP1):
        return manifold.closed_kernel(p, x, y)
    raise ValueError(f"method {method!r} not available for {manifold.kind}")


def normal_chart(manifold: ModelManifold, x0: complex, Z) -> complex:
    """``exp_{x0}(Z)`` as an affine coordinate."""
    return manifold.exp_map(complex(x0), _as_z(Z))


def kappa(manifold: ModelManifold, x0: complex, Z) -> float:
    """Volume density of ``dv_X`` relative to Lebesgue measure in normal coordinates."""
    return manifold.kappa(complex(x0), _as_z(Z))


def _transport_ode(manifold, p, x0, z, frame: HolomorphicFrame | None, rtol=1e-13):
    """``log f`` at t=1 where the parallel unit frame is ``e = f * frame``."""
    def rhs(t, y):
        w, dw = manifold.exp_velocity(x0, z, t)
        val = -p * manifold.connection(w, dw)
        if frame is not None:
            val -= frame.dlog(w) * dw
        return [val.real, val.imag]

    log_norm0 = 0.5 * p * manifold.log_frame_norm(x0)
    if frame is not None:
        log_norm0 += math.log(abs(frame.g(x0)))
    sol = solve_ivp(rhs, (0.0, 1.0), [-log_norm0, 0.0], method="DOP853", rtol=rtol, atol=1e-15)
    return complex(sol.y[0, -1], sol.y[1, -1])


def transport_factor(manifold: ModelManifold, p: int, x0: complex, Z, method: str = "closed") -> complex:
    """Unit ``u`` with ``sigma^p/|sigma^p| = u * e(Z)`` at ``exp_{x0}(Z)``.

    ``e(Z)`` is the unit frame parallel transported from ``x0`` along the
    radial geodesic; ``sigma`` is the standard holomorphic frame.  With
    ``method="ode"`` the transport equation is integrated numerically.
    """
    _check_p(p)
    x0, z = complex(x0), _as_z(Z)
    manifold.check_chart(z)
    if method == "closed":
        return manifold.transport_phase(p, x0, z)
    if method != "ode":
        raise ValueError(f"unknown method {method!r}")
    w = manifold.exp_map(x0, z)
    log_f = _transport_ode(manifold, p, x0, z, None)
    # sigma^p = e / f, so sigma^p/|sigma^p| = e / (f |sigma^p|)
    return complex(np.exp(-log_f - 0.5 * p * manifold.log_frame_norm(w)))


def trivialized_kernel(
    manifold: ModelManifold,
    p: int,
    x0: complex,
    Z,
    Zp,
    frame: HolomorphicFrame | None = None,
) -> complex:
    """``P_{p,x0}(Z, Z')`` in the parallel unit frames.

    Without ``frame`` the closed-form transport is used.  With a frame the
    kernel is expressed in that frame and transported by integrating the
    connection ODE, which must give the same value.
    """
    _check_p(p)
    x0, z, zp = complex(x0), _as_z(Z), _as_z(Zp)
    w, wp = manifold.exp_map(x0, z), manifold.exp_map(x0, zp)
    if frame is None:
        u, up = manifold.transport_phase(p, x0, z), manifold.transport_phase(p, x0, zp)
        return complex(manifold.unit_kernel(p, w, wp) * u * np.conj(up))
    k = manifold.frame_kernel(p, w, wp) / (frame.g(w) * np.conj(frame.g(wp)))
    f, fp = _transport_ode(manifold, p, x0, z, frame), _transport_ode(manifold, p, x0, zp, frame)
    return complex(k * np.exp(-f - np.conj(fp)))


@dataclass(frozen=True)
class KernelSample:
    p: int
    x0: complex
    Z: tuple[float, float]
    Zp: tuple[float, float]
    value: complex


@dataclass(frozen=True)
class RescaledSample:
    p: int
    u: tuple[float, float]
    up: tuple[float, float]
    value: complex
    kappa_left: float
    kappa_right: float
    model: complex

    @property
    def raw(self) -> complex:
        """``p^{-n} P_{p,x0}(u/sqrt p, u'/sqrt p)`` without the density correction."""
        return self.value / math.sqrt(self.kappa_left * self.kappa_right)

    @property
    def deviation(self) -> float:
        return abs(self.value - self.model)


def rescaled_sample(manifold: ModelManifold, p: int, x0: complex, u, up) -> RescaledSample:
    _check_p(p)
    u, up = np.asarray(u, float), np.asarray(up, float)
    Z, Zp = u / math.sqrt(p), up / math.sqrt(p)
    kl, kr = kappa(manifold, x0, Z), kappa(manifold, x0, Zp)
    raw = trivialized_kernel(manifold, p, x0, Z, Zp) / p**manifold.n
    return RescaledSample(
        p,
        (float(u[0]), float(u[1])),
        (float(up[0]), float(up[1])),
        raw * math.sqrt(kl * kr),
        kl,
        kr,
        complex(model_gaussian(u, up)),
    )


def rescaled_kernel(manifold: ModelManifold, p: int, x0: complex, u, up) -> complex:
    """``p^{-n} kappa^{1/2}(Z) kappa^{1/2}(Z') P_{p,x0}(Z, Z')`` at ``Z = u/sqrt p``."""
    return rescaled_sample(manifold, p, x0, u, up).value


def _fd_derivatives(f: Callable[[float, float], float], h: float):
    """Fourth-order central first and pure second partials at the origin."""
    def one(h):
        fx = [f(k * h, 0.0) for k in (-2, -1, 1, 2)]
        fy = [f(0.0, k * h) for k in (-2, -1, 1, 2)]
        f0 = f(0.0, 0.0)
        d1 = lambda v: (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h)
        d2 = lambda v: (-v[0] + 16 * v[1] - 30 * f0 + 16 * v[2] - v[3]) / (12 * h * h)
        return np.array([d1(fx), d1(fy), d2(fx), d2(fy)])

    coarse, fine = one(h), one(h / 2)
    return (16 * fine - coarse) / 15


def numeric_curvature(manifold: ModelManifold, x0: complex = 0j, h: float = 1e-3) -> CurvatureData:
    """``R_{1 1bar 1 1bar}`` at ``x0`` in a unitary frame, by finite differences.

    Uses ``R = -d dbar g + |d g|^2 / g`` for the metric coefficient in the
    affine coordinate, then rescales to the frame with ``g_{z zbar} = 1/2``.
    """
    x0 = complex(x0)
    f = lambda a, b: float(manifold.metric(x0 + complex(a, b)))
    gx, gy, gxx, gyy = _fd_derivatives(f, h)
    g0 = f(0.0, 0.0)
    dg = 0.5 * (gx - 1j * gy)
    ddbar = 0.25 * (gxx + gyy)
    r_affine = -ddbar + abs(dg) ** 2 / g0
    r_unit = r_affine / (2 * g0) ** 2
    R = np.full((1, 1, 1, 1), r_unit, dtype=complex)
    return CurvatureData(1, R, np.zeros((1, 1), complex))

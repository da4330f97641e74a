"""Second-order off-diagonal coefficient ``J2`` of the Bergman kernel expansion.

The pipeline starts from the image of the second-order operator under
``L^{-1}`` projected off ``ker L``::

    G = {O2~ + (b_q / 4 pi) RE_{l qbar} z_l} P,
    O2~ = b_m b_q/(48 pi) R_{k mbar l qbar} z_k z_l
        + b_q/(3 pi) R_{l kbar k qbar} z_l
        - b_q/12 R_{k mbar l qbar} z_k z_l zbar'_m,

and forms ``J2 P = -G - G*``.  All repeated indices are summed over 1..n
before anything enters the coefficient ring.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from .model_calculus import (
    NormalOrderedKernel,
    OffDiagPolynomial,
    adjoint,
    normal_order,
    resolve_against_P,
)
from .tensor_ring import TensorScalar, bundle_curvature, riemann, scalar_curvature

__all__ = [
    "o2_tilde",
    "bundle_term",
    "build_L_inverse_image",
    "compute_J2",
    "reference_J2",
    "kappa_half_inverse_quadratic",
    "combined_p_inverse_coefficient",
    "structure_check",
    "StructureReport",
    "o2_tilde_reordered",
    "reference_O2_tilde_image",
    "reference_O2_tilde_image_unsimplified",
    "reference_O2_tilde_image_adjoint",
    "reference_bundle_image",
    "reference_bundle_image_adjoint",
    "ricci_form",
]


def _q(a: int, b: int = 1, pi: int = 0) -> TensorScalar:
    return TensorScalar.const(Fraction(a, b), pi)


def _idx(n: int, k: int):
    return product(range(1, n + 1), repeat=k)


def _mono(n, coeff, **kw) -> OffDiagPolynomial:
    return OffDiagPolynomial.monomial(n, coeff, **kw)


def o2_tilde(n: int) -> NormalOrderedKernel:
    """``O2~ P`` as a normal-ordered kernel (already b-left as written)."""
    K = NormalOrderedKernel(n)
    c1, c2, c3 = _q(1, 48, -1), _q(1, 3, -1), _q(-1, 12)
    for k, m, l, q in _idx(n, 4):
        R = riemann(k, m, l, q, n)
        K = K + NormalOrderedKernel.term(n, c1 * R, b=(m, q), z=(k, l))
        K = K + NormalOrderedKernel.term(n, c3 * R, b=(q,), z=(k, l), zbarp=(m,))
    for l, k, q in _idx(n, 3):
        K = K + NormalOrderedKernel.term(n, c2 * riemann(l, k, k, q, n), b=(q,), z=(l,))
    return K


def bundle_term(n: int) -> NormalOrderedKernel:
    """``(b_q / 4 pi) RE_{l qbar} z_l P``."""
    K = NormalOrderedKernel(n)
    for l, q in _idx(n, 2):
        K = K + NormalOrderedKernel.term(n, _q(1, 4, -1) * bundle_curvature(l, q, n), b=(q,), z=(l,))
    return K


def build_L_inverse_image(n: int) -> NormalOrderedKernel:
    """Normal-ordered ``{O2~ + (b_q/4 pi) RE_{l qbar} z_l} P``."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return o2_tilde(n) + bundle_term(n)


def o2_tilde_reordered(n: int) -> NormalOrderedKernel:
    """``O2~`` rewritten with every ``b`` to the right, normal-ordered back.

    Used to check the commutator bookkeeping: the result must equal
    :func:`o2_tilde`.
    """
    words = []
    for k, m, l, q in _idx(n, 4):
        R = riemann(k, m, l, q, n)
        base = [("z", k), ("z", l)]
        words.append((_q(1, 48, -1) * R, base + [("b", m), ("b", q)]))
        words.append((_q(-1, 12) * R, base + [("zbp", m), ("b", q)]))
    for k, l, q in _idx(n, 3):
        words.append((_q(1, 6, -1) * riemann(k, k, l, q, n), [("z", l), ("b", q)]))
    for k, m, q in _idx(n, 3):
        words.append((_q(1, 3) * riemann(k, m, q, q, n), [("z", k), ("zbp", m)]))
    for m, q in _idx(n, 2):
        words.append((_q(-1, 2, -1) * riemann(m, m, q, q, n), []))
    return normal_order(n, words)


def compute_J2(n: int) -> OffDiagPolynomial:
    """``J2 = -Q - Q*`` where ``Q P`` is the resolved ``L^{-1}``-image."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    Q = resolve_against_P(build_L_inverse_image(n))
    return -Q - adjoint(Q)


def reference_J2(n: int) -> OffDiagPolynomial:
    """Closed-form ``J2`` transcribed term by term with sums expanded."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    J = OffDiagPolynomial(n)
    riem = _q(-1, 12, 1)
    for k, m, l, q in _idx(n, 4):
        c = riem * riemann(k, m, l, q, n)
        J = (
            J
            + _mono(n, c, z=(k, l), zbar=(m, q))
            + _mono(n, c * 6, z=(k, l), zbarp=(m, q))
            + _mono(n, c * -4, z=(k, l), zbar=(m,), zbarp=(q,))
            + _mono(n, c * -4, z=(k,), zp=(l,), zbarp=(m, q))
            + _mono(n, c, zp=(k, l), zbarp=(m, q))
        )
    for k, m, q in _idx(n, 3):
        c = _q(-1, 3) * riemann(k, m, q, q, n)
        J = J + _mono(n, c, z=(k,), zbar=(m,)) + _mono(n, c, zp=(k,), zbarp=(m,))
    J = J + OffDiagPolynomial.constant(n, _q(1, 8, -1) * scalar_curvature(n))
    for q in range(1, n + 1):
        J = J + OffDiagPolynomial.constant(n, _q(1, 1, -1) * bundle_curvature(q, q, n))
    for l, q in _idx(n, 2):
        c = _q(-1, 2) * bundle_curvature(l, q, n)
        J = (
            J
            + _mono(n, c, z=(l,), zbar=(q,))
            + _mono(n, c * -2, z=(l,), zbarp=(q,))
            + _mono(n, c, zp=(l,), zbarp=(q,))
        )
    return J


def reference_O2_tilde_image_unsimplified(n: int) -> OffDiagPolynomial:
    """Bracket of ``O2~ P`` before merging the two Ricci-type terms."""
    Q = OffDiagPolynomial(n)
    for k, m, l, q in _idx(n, 4):
        c = _q(1, 12, 1) * riemann(k, m, l, q, n)
        # z_k z_l (zbar_m - 3 zbar'_m)(zbar_q - zbar'_q)
        Q = (
            Q
            + _mono(n, c, z=(k, l), zbar=(m, q))
            + _mono(n, c * -1, z=(k, l), zbar=(m,), zbarp=(q,))
            + _mono(n, c * -3, z=(k, l), zbar=(q,), zbarp=(m,))
            + _mono(n, c * 3, z=(k, l), zbarp=(m, q))
        )
    for k, l, q in _idx(n, 3):
        c = _q(1, 3) * riemann(k, k, l, q, n)
        Q = Q + _mono(n, c, z=(l,), zbar=(q,)) + _mono(n, -c, z=(l,), zbarp=(q,))
    for k, m, q in _idx(n, 3):
        Q = Q + _mono(n, _q(1, 3) * riemann(k, m, q, q, n), z=(k,), zbarp=(m,))
    for m, q in _idx(n, 2):
        Q = Q + OffDiagPolynomial.constant(n, _q(-1, 2, -1) * riemann(m, m, q, q, n))
    return Q


def reference_O2_tilde_image(n: int) -> OffDiagPolynomial:
    """Simplified bracket of ``O2~ P``."""
    Q = OffDiagPolynomial(n)
    for k, m, l, q in _idx(n, 4):
        c = _q(1, 12, 1) * riemann(k, m, l, q, n)
        Q = (
            Q
            + _mono(n, c, z=(k, l), zbar=(m, q))
            + _mono(n, c * -1, z=(k, l), zbar=(m,), zbarp=(q,))
            + _mono(n, c * -3, z=(k, l), zbar=(q,), zbarp=(m,))
            + _mono(n, c * 3, z=(k, l), zbarp=(m, q))
        )
    for k, m, q in _idx(n, 3):
        Q = Q + _mono(n, _q(1, 3) * riemann(k, m, q, q, n), z=(k,), zbar=(m,))
    for m, q in _idx(n, 2):
        Q = Q + OffDiagPolynomial.constant(n, _q(-1, 2, -1) * riemann(m, m, q, q, n))
    return Q


def reference_O2_tilde_image_adjoint(n: int) -> OffDiagPolynomial:
    """Bracket of ``(O2~ P)*``."""
    Q = OffDiagPolynomial(n)
    for k, m, l, q in _idx(n, 4):
        c = _q(1, 12, 1) * riemann(k, m, l, q, n)
        # zbar'_m zbar'_q (z'_k - 3 z_k)(z'_l - z_l)
        Q = (
            Q
            + _mono(n, c, zp=(k, l), zbarp=(m, q))
            + _mono(n, c * -1, z=(l,), zp=(k,), zbarp=(m, q))
            + _mono(n, c * -3, z=(k,), zp=(l,), zbarp=(m, q))
            + _mono(n, c * 3, z=(k, l), zbarp=(m, q))
        )
    for k, m, q in _idx(n, 3):
        Q = Q + _mono(n, _q(1, 3) * riemann(k, m, q, q, n), zp=(k,), zbarp=(m,))
    for m, q in _idx(n, 2):
        Q = Q + OffDiagPolynomial.constant(n, _q(-1, 2, -1) * riemann(m, m, q, q, n))
    return Q


def reference_bundle_image(n: int) -> OffDiagPolynomial:
    """Bracket of ``-((b_q / 4 pi) RE_{l qbar} z_l P)``."""
    Q = OffDiagPolynomial(n)
    for q in range(1, n + 1):
        Q = Q + OffDiagPolynomial.constant(n, _q(1, 2, -1) * bundle_curvature(q, q, n))
    for l, q in _idx(n, 2):
        c = _q(-1, 2) * bundle_curvature(l, q, n)
        Q = Q + _mono(n, c, z=(l,), zbar=(q,)) + _mono(n, -c, z=(l,), zbarp=(q,))
    return Q


def reference_bundle_image_adjoint(n: int) -> OffDiagPolynomial:
    """Bracket of ``-((b_q / 4 pi) RE_{l qbar} z_l P)*``."""
    Q = OffDiagPolynomial(n)
    for q in range(1, n + 1):
        Q = Q + OffDiagPolynomial.constant(n, _q(1, 2, -1) * bundle_curvature(q, q, n))
    for l, q in _idx(n, 2):
        c = _q(-1, 2) * bundle_curvature(q, l, n)
        # -1/2 zbar'_l (z'_q - z_q) RE_{q lbar}
        Q = Q + _mono(n, c, zp=(q,), zbarp=(l,)) + _mono(n, -c, z=(q,), zbarp=(l,))
    return Q


def ricci_form(n: int, primed: bool = False) -> OffDiagPolynomial:
    """``R_{l kbar k qbar} z_l zbar_q`` (or the primed variables)."""
    Q = OffDiagPolynomial(n)
    for l, k, q in _idx(n, 3):
        c = riemann(l, k, k, q, n)
        if primed:
            Q = Q + _mono(n, c, zp=(l,), zbarp=(q,))
        else:
            Q = Q + _mono(n, c, z=(l,), zbar=(q,))
    return Q


def kappa_half_inverse_quadratic(n: int) -> OffDiagPolynomial:
    """``kappa^{-1/2}`` through quadratic order: ``1 + (1/3) R_{l kbar k qbar} z_l zbar_q``."""
    return OffDiagPolynomial.constant(n, 1) + ricci_form(n) * _q(1, 3)


def combined_p_inverse_coefficient(
    n: int, j2: OffDiagPolynomial | None = None, bundle: bool = True
) -> OffDiagPolynomial:
    """Coefficient of ``1/p`` in ``p^{-n} P_p(u/sqrt p, u'/sqrt p)`` divided by ``P(u, u')``.

    Equals ``J2 + (1/3) R_{l kbar k qbar}(z_l zbar_q + z'_l zbar'_q)``; with
    ``bundle=False`` the bundle curvature is set to zero.
    """
    j2 = compute_J2(n) if j2 is None else j2
    out = j2 + (ricci_form(n) + ricci_form(n, primed=True)) * _q(1, 3)
    if not bundle:
        out = out.map_coefficients(TensorScalar.without_bundle)
    return out


@dataclass
class StructureReport:
    r: int
    passed: bool
    degrees: list[int]
    violations: list[str] = field(default_factory=list)


def structure_check(Q: OffDiagPolynomial, r: int) -> StructureReport:
    """Every monomial must have degree of the parity of ``r`` and at most ``3r``."""
    violations = []
    for key in sorted(Q.terms):
        deg = sum(map(sum, key))
        if deg % 2 != r % 2:
            violations.append(f"degree {deg} has wrong parity for r={r}: {key}")
        elif deg > 3 * r:
            violations.append(f"degree {deg} exceeds 3r={3 * r}: {key}")
    return StructureReport(r, not violations, sorted(Q.degrees()), violations)

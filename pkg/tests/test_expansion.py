import time
from fractions import Fraction

import numpy as np
import pytest

from offdiag_bergman.expansion import (
    build_L_inverse_image,
    bundle_term,
    combined_p_inverse_coefficient,
    compute_J2,
    kappa_half_inverse_quadratic,
    o2_tilde,
    o2_tilde_reordered,
    reference_J2,
    reference_O2_tilde_image,
    reference_O2_tilde_image_adjoint,
    reference_O2_tilde_image_unsimplified,
    reference_bundle_image,
    reference_bundle_image_adjoint,
    structure_check,
)
from offdiag_bergman.manifolds import CP1, kappa
from offdiag_bergman.model_calculus import OffDiagPolynomial, adjoint, evaluate, resolve_against_P
from offdiag_bergman.tensor_ring import (
    CurvatureData,
    TensorScalar,
    bundle_curvature,
    random_curvature,
    riemann,
    scalar_curvature,
    substitute,
)

CP1_DATA = CurvatureData(1, np.full((1, 1, 1, 1), np.pi), np.zeros((1, 1)))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_j2_matches_closed_form(n):
    start = time.perf_counter()
    assert compute_J2(n) == reference_J2(n)
    assert time.perf_counter() - start < 60


@pytest.mark.parametrize("n", [1, 2, 3])
def test_intermediate_brackets(n):
    assert o2_tilde_reordered(n) == o2_tilde(n)
    image = resolve_against_P(o2_tilde(n))
    assert image == reference_O2_tilde_image(n) == reference_O2_tilde_image_unsimplified(n)
    assert adjoint(image) == reference_O2_tilde_image_adjoint(n)
    e_image = -resolve_against_P(bundle_term(n))
    assert e_image == reference_bundle_image(n)
    assert adjoint(e_image) == reference_bundle_image_adjoint(n)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_diagonal_value_is_b1(n):
    expected = scalar_curvature(n) * TensorScalar.const(Fraction(1, 8), -1)
    for q in range(1, n + 1):
        expected = expected + bundle_curvature(q, q, n) * TensorScalar.const(1, -1)
    assert compute_J2(n).constant_term() == expected


def test_j2_one_dimensional_coefficients():
    J = compute_J2(1)
    R = riemann(1, 1, 1, 1, 1)
    c = TensorScalar.const(Fraction(-1, 12), 1) * R
    # |z|^4 coefficient and the z^2 zbar'^2 coefficient
    assert J.terms[((2,), (2,), (0,), (0,))] == c
    assert J.terms[((2,), (0,), (0,), (2,))] == c * 6
    assert J.constant_term() == R * TensorScalar.const(1, -1) + bundle_curvature(1, 1, 1) * TensorScalar.const(1, -1)
    assert substitute(J.constant_term(), CP1_DATA) == pytest.approx(1.0)


def test_zero_curvature_gives_zero():
    zero = CurvatureData.zero(2)
    Z, Zp = np.array([0.3, 0.1, -0.2, 0.5]), np.array([0.0, 0.4, 0.2, -0.1])
    assert evaluate(compute_J2(2), zero, Z, Zp) == 0
    assert evaluate(combined_p_inverse_coefficient(2), zero, Z, Zp) == 0
    K = build_L_inverse_image(2)
    assert all(substitute(c, zero) == 0 for c in K.terms.values())


@pytest.mark.parametrize("n", [1, 2, 3])
def test_structure(n):
    report = structure_check(reference_J2(n), 2)
    assert report.passed
    assert report.degrees == [0, 2, 4]
    assert structure_check(OffDiagPolynomial.constant(n, 1), 0).passed
    bad = structure_check(OffDiagPolynomial.monomial(n, 1, z=(1,)), 2)
    assert not bad.passed and bad.violations


@pytest.mark.parametrize("n", [1, 2, 3])
def test_combined_coefficient_has_no_quadratic_part_without_bundle(n):
    combined = combined_p_inverse_coefficient(n, bundle=False)
    assert combined.degrees() == {0, 4}
    assert combined.constant_term() == scalar_curvature(n) * TensorScalar.const(Fraction(1, 8), -1)
    # with bundle curvature the quadratic part survives
    assert combined_p_inverse_coefficient(n).homogeneous_part(2)


def test_j2_is_hermitian_numerically():
    data = random_curvature(2, np.random.default_rng(5))
    rng = np.random.default_rng(6)
    J = compute_J2(2)
    for _ in range(5):
        Z, Zp = rng.normal(size=4), rng.normal(size=4)
        assert evaluate(J, data, Z, Zp) == pytest.approx(np.conj(evaluate(J, data, Zp, Z)), rel=1e-12)


def test_kappa_quadratic_term():
    K = kappa_half_inverse_quadratic(1)
    expected = OffDiagPolynomial.constant(1, 1) + OffDiagPolynomial.monomial(
        1, riemann(1, 1, 1, 1, 1) * Fraction(1, 3), z=(1,), zbar=(1,)
    )
    assert K == expected
    assert evaluate(K, CurvatureData.zero(1), [0.7, 0.2], [0, 0]) == 1
    assert evaluate(K, CP1_DATA, [1.0, 0.0], [0, 0]) == pytest.approx(1 + np.pi / 3)


def test_kappa_quadratic_term_matches_manifold_density():
    # kappa^{-1/2}(r) = 1 + (pi/3) r^2 + O(r^4) on the sphere of area 1
    M = CP1()
    for r in (1e-2, 5e-3):
        k = kappa(M, 0j, np.array([r, 0.0]))
        assert (k**-0.5 - 1) / r**2 == pytest.approx(np.pi / 3, rel=5 * r)

import random
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from offdiag_bergman.model_calculus import (
    NormalOrderedKernel,
    OffDiagPolynomial,
    adjoint,
    apply_b,
    apply_b_plus,
    apply_L,
    evaluate,
    inverse_L_on_complement,
    normal_order,
    resolve_against_P,
)
from offdiag_bergman.tensor_ring import CurvatureData, TensorScalar, bundle_curvature, random_curvature, riemann

from oracle import ModelOracle, scalar_to_sympy

PI = TensorScalar.const(1, 1)


def random_kernel_term(rng, n, max_b=3, max_z=2):
    def exps(top):
        e = [0] * n
        for _ in range(rng.randint(0, top)):
            e[rng.randrange(n)] += 1
        return tuple(e)

    return exps(max_b), exps(max_z), exps(1), exps(1)


def test_apply_b_on_gaussian():
    P = NormalOrderedKernel.gaussian(2)
    assert apply_b(1, P) == NormalOrderedKernel.term(2, 1, b=(1,))


def test_apply_b_commutes_past_z_after_normal_ordering():
    # b_q R_{k kbar l qbar} z_l P  -  R z_l b_q P  = -2 R_{k kbar q qbar} P
    n = 2
    left = NormalOrderedKernel(n)
    words = []
    for k in range(1, n + 1):
        for l in range(1, n + 1):
            for q in range(1, n + 1):
                R = riemann(k, k, l, q, n)
                left = left + apply_b(q, NormalOrderedKernel.term(n, R, z=(l,)))
                words.append((R, [("z", l), ("b", q)]))
    reordered = normal_order(n, words)
    correction = NormalOrderedKernel(n)
    for k in range(1, n + 1):
        for q in range(1, n + 1):
            correction = correction + NormalOrderedKernel.term(n, riemann(k, k, q, q, n) * -2)
    assert left == reordered + correction


def test_b_plus_annihilates_gaussian():
    for i in (1, 2):
        assert apply_b_plus(i, NormalOrderedKernel.gaussian(2)) == NormalOrderedKernel(2)


@pytest.mark.parametrize("n", [1, 2])
def test_eigen_relation_against_differential_oracle(n):
    rng = random.Random(11 + n)
    oracle = ModelOracle(n)
    for _ in range(6):
        key = random_kernel_term(rng, n)
        K = NormalOrderedKernel(n, {key: TensorScalar.const(1)})
        order = sum(key[0])
        assert apply_L(K) == K * (PI * (4 * order))
        expr = oracle.kernel(K)
        assert sp.simplify((oracle.L(expr) - 4 * sp.pi * order * expr) / oracle.P) == 0


def test_inverse_L_examples():
    n = 2
    K = NormalOrderedKernel.term(n, 1, b=(2,), z=(1,))
    assert inverse_L_on_complement(K) == K * TensorScalar.const(Fraction(1, 4), -1)
    assert inverse_L_on_complement(NormalOrderedKernel.term(n, 1, z=(1,), zbarp=(2,))) == NormalOrderedKernel(n)
    K2 = NormalOrderedKernel.term(n, 1, b=(1, 2), z=(1, 1))
    assert inverse_L_on_complement(K2) == K2 * TensorScalar.const(Fraction(1, 8), -1)
    # L L^{-1} is the identity on the complement of the kernel
    assert apply_L(inverse_L_on_complement(K2)) == K2


def test_resolve_examples():
    n = 2
    q, l = 1, 2
    got = resolve_against_P(NormalOrderedKernel.term(n, 1, b=(q,), z=(l,)))
    want = (
        OffDiagPolynomial.monomial(n, PI * 2, z=(l,), zbar=(q,))
        - OffDiagPolynomial.monomial(n, PI * 2, z=(l,), zbarp=(q,))
    )
    assert got == want
    got = resolve_against_P(NormalOrderedKernel.term(n, 1, b=(1,), z=(1,)))
    assert got.constant_term() == TensorScalar.const(-2)
    assert resolve_against_P(NormalOrderedKernel.gaussian(n)) == OffDiagPolynomial.constant(n, 1)


@pytest.mark.parametrize("n", [1, 2])
def test_resolve_matches_differential_oracle(n):
    rng = random.Random(3 * n)
    oracle = ModelOracle(n)
    for _ in range(5):
        K = NormalOrderedKernel(n, {random_kernel_term(rng, n): TensorScalar.const(Fraction(rng.randint(1, 9), 7), rng.randint(-1, 1))})
        Q = resolve_against_P(K)
        assert sp.expand(oracle.kernel(K) / oracle.P - oracle.poly(Q)) == 0


LETTERS = ["b", "bp", "z", "zb", "zp", "zbp"]


@pytest.mark.parametrize("seed", range(5))
def test_normal_ordering_is_confluent_and_correct(seed):
    n = 2
    rng = random.Random(seed)
    words = []
    for _ in range(3):
        word = [(rng.choice(LETTERS), rng.randint(1, n)) for _ in range(rng.randint(1, 5))]
        words.append((TensorScalar.const(Fraction(rng.randint(-4, 4), rng.randint(1, 3))), word))
    reference = normal_order(n, words)
    for trial in range(4):
        assert normal_order(n, words, rng=random.Random(100 * seed + trial)) == reference
    oracle = ModelOracle(n)
    direct = sum(scalar_to_sympy(c) * oracle.apply_word(w) for c, w in words)
    assert sp.simplify((direct - oracle.kernel(reference)) / oracle.P) == 0


def test_normal_order_rejects_unknown_letters():
    with pytest.raises(ValueError):
        normal_order(1, [(1, [("x", 1)])])
    with pytest.raises(ValueError):
        normal_order(1, [(1, [("b", 2)])])


def random_poly(rng, n):
    Q = OffDiagPolynomial(n)
    for _ in range(6):
        exps = [[0] * n for _ in range(4)]
        for e in exps:
            for _ in range(rng.randint(0, 2)):
                e[rng.randrange(n)] += 1
        c = TensorScalar.const(Fraction(rng.randint(-5, 5), rng.randint(1, 4)), rng.randint(-1, 1))
        c = c * riemann(*[rng.randint(1, n) for _ in range(4)], n)
        if rng.random() < 0.3:
            c = c * bundle_curvature(rng.randint(1, n), rng.randint(1, n), n)
        Q = Q + OffDiagPolynomial(n, {tuple(map(tuple, exps)): c})
    return Q


@pytest.mark.parametrize("seed", range(4))
def test_adjoint_is_an_involution_and_conjugates_swapped_values(seed):
    n = 2
    rng = random.Random(seed)
    Q = random_poly(rng, n)
    assert adjoint(adjoint(Q)) == Q
    data = random_curvature(n, np.random.default_rng(seed))
    nrng = np.random.default_rng(seed + 50)
    Z, Zp = nrng.normal(size=2 * n), nrng.normal(size=2 * n)
    assert evaluate(adjoint(Q), data, Z, Zp) == pytest.approx(np.conj(evaluate(Q, data, Zp, Z)), rel=1e-12)


def test_adjoint_fixes_real_constants():
    c = OffDiagPolynomial.constant(2, TensorScalar.const(Fraction(5, 3), -1))
    assert adjoint(c) == c


@pytest.mark.parametrize("seed", range(4))
def test_symbolic_and_numeric_evaluation_agree(seed):
    n = 2
    rng = random.Random(seed)
    oracle = ModelOracle(n)
    K = NormalOrderedKernel(n)
    for _ in range(3):
        K = K + NormalOrderedKernel(n, {random_kernel_term(rng, n): TensorScalar.const(Fraction(rng.randint(1, 9), 5), rng.randint(-1, 1))})
    nrng = np.random.default_rng(seed)
    Z, Zp = nrng.uniform(-0.8, 0.8, 2 * n), nrng.uniform(-0.8, 0.8, 2 * n)
    numeric = evaluate(resolve_against_P(K), CurvatureData.zero(n), Z, Zp, with_gaussian=True)
    symbolic = oracle.numeric(oracle.kernel(K), Z, Zp)
    assert abs(numeric - symbolic) <= 1e-10 * max(1.0, abs(symbolic))


def test_evaluate_examples():
    one = OffDiagPolynomial.constant(1, 1)
    zero = CurvatureData.zero(1)
    assert evaluate(one, zero, [0.3, -0.2], [0.3, -0.2], with_gaussian=True) == pytest.approx(1.0)
    assert evaluate(one, zero, [1.0, 0.0], [0.0, 0.0], with_gaussian=True) == pytest.approx(np.exp(-np.pi / 2))
    with pytest.raises(ValueError):
        evaluate(one, zero, [1.0, 0.0, 0.0], [0.0, 0.0])

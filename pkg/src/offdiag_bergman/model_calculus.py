"""Normal-ordered operator calculus on the model space C^n.

Operators act on functions of ``Z`` (coordinates ``z``, ``zbar``) with the
second point ``Z'`` as a parameter:

    b_i  = -2 d/dz_i + pi zbar_i,        b+_i = 2 d/dzbar_i + pi z_i,
    P(Z, Z') = exp(-pi/2 sum(|z_i|^2 + |z'_i|^2 - 2 z_i zbar'_i)).

A :class:`NormalOrderedKernel` stores sums ``c * b^alpha z^beta z'^gamma
zbar'^delta P`` with every ``b`` standing to the left, i.e. the operator
``b^alpha`` applied to the function ``z^beta z'^gamma zbar'^delta P``.
Since ``b+`` annihilates that function, each term is an eigenfunction of
``L = sum_i b_i b+_i`` with eigenvalue ``4 pi |alpha|``.

Index arguments in the public API are 1-based.
"""
from __future__ import annotations

import random
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tensor_ring import CurvatureData, TensorScalar, conjugate, substitute

__all__ = [
    "OffDiagPolynomial",
    "NormalOrderedKernel",
    "ModelGaussian",
    "model_gaussian",
    "normal_order",
    "apply_b",
    "apply_b_plus",
    "apply_L",
    "inverse_L_on_complement",
    "resolve_against_P",
    "adjoint",
    "evaluate",
    "complex_coords",
]

Exps = tuple[int, ...]
PolyKey = tuple[Exps, Exps, Exps, Exps]  # z, zbar, z', zbar'
KernelKey = tuple[Exps, Exps, Exps, Exps]  # alpha (b), beta (z), gamma (z'), delta (zbar')

ONE = TensorScalar.const(1)


def _zeros(n: int) -> Exps:
    return (0,) * n


def _bump(e: Exps, i: int, by: int = 1) -> Exps:
    lst = list(e)
    lst[i] += by
    return tuple(lst)


def _add(a: Exps, b: Exps) -> Exps:
    return tuple(x + y for x, y in zip(a, b))


def _exps_from_indices(n: int, indices: Iterable[int]) -> Exps:
    e = [0] * n
    for i in indices:
        if not 1 <= i <= n:
            raise ValueError(f"index {i} out of range 1..{n}")
        e[i - 1] += 1
    return tuple(e)


def _as_scalar(c) -> TensorScalar:
    return c if isinstance(c, TensorScalar) else TensorScalar.const(c)


def _accumulate(target: dict, key, value: TensorScalar) -> None:
    total = target[key] + value if key in target else value
    if total:
        target[key] = total
    else:
        target.pop(key, None)


class OffDiagPolynomial:
    """Polynomial in ``z, zbar, z', zbar'`` with :class:`TensorScalar` coefficients."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[PolyKey, TensorScalar] | None = None):
        self.n = n
        self._terms: dict[PolyKey, TensorScalar] = {}
        for key, c in (terms or {}).items():
            c = _as_scalar(c)
            if any(len(e) != n for e in key):
                raise ValueError(f"monomial {key} does not match n={n}")
            _accumulate(self._terms, key, c)

    @classmethod
    def monomial(cls, n: int, coeff=1, z=(), zbar=(), zp=(), zbarp=()) -> "OffDiagPolynomial":
        """Build ``coeff * prod z_i * prod zbar_j * ...`` from 1-based index lists."""
        key = (
            _exps_from_indices(n, z),
            _exps_from_indices(n, zbar),
            _exps_from_indices(n, zp),
            _exps_from_indices(n, zbarp),
        )
        return cls(n, {key: _as_scalar(coeff)})

    @classmethod
    def constant(cls, n: int, coeff=1) -> "OffDiagPolynomial":
        return cls.monomial(n, coeff)

    @property
    def terms(self) -> dict[PolyKey, TensorScalar]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OffDiagPolynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def _check(self, other: "OffDiagPolynomial") -> None:
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} != {other.n}")

    def __add__(self, other: "OffDiagPolynomial") -> "OffDiagPolynomial":
        self._check(other)
        out = dict(self._terms)
        for key, c in other._terms.items():
            _accumulate(out, key, c)
        return _poly_raw(self.n, out)

    def __neg__(self) -> "OffDiagPolynomial":
        return _poly_raw(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: "OffDiagPolynomial") -> "OffDiagPolynomial":
        return self + (-other)

    def __mul__(self, other) -> "OffDiagPolynomial":
        if isinstance(other, OffDiagPolynomial):
            self._check(other)
            out: dict[PolyKey, TensorScalar] = {}
            for k1, c1 in self._terms.items():
                for k2, c2 in other._terms.items():
                    key = tuple(_add(a, b) for a, b in zip(k1, k2))
                    _accumulate(out, key, c1 * c2)
            return _poly_raw(self.n, out)
        c = _as_scalar(other)
        out = {}
        for key, v in self._terms.items():
            _accumulate(out, key, v * c)
        return _poly_raw(self.n, out)

    __rmul__ = __mul__

    def degrees(self) -> set[int]:
        return {sum(map(sum, key)) for key in self._terms}

    def homogeneous_part(self, degree: int) -> "OffDiagPolynomial":
        return _poly_raw(self.n, {k: c for k, c in self._terms.items() if sum(map(sum, k)) == degree})

    def constant_term(self) -> TensorScalar:
        z = _zeros(self.n)
        return self._terms.get((z, z, z, z), TensorScalar())

    def map_coefficients(self, fn) -> "OffDiagPolynomial":
        out = {}
        for key, c in self._terms.items():
            _accumulate(out, key, fn(c))
        return _poly_raw(self.n, out)

    def adjoint(self) -> "OffDiagPolynomial":
        return adjoint(self)

    def evaluate(self, data: CurvatureData, Z, Zp, with_gaussian: bool = False) -> complex:
        return evaluate(self, data, Z, Zp, with_gaussian)

    def render(self) -> str:
        """One term per line: ``coeff | z | zbar | z' | zbar'`` exponent vectors, sorted."""
        lines = []
        for key in sorted(self._terms):
            exps = " | ".join(",".join(map(str, e)) for e in key)
            lines.append(f"{self._terms[key].render()} | {exps}")
        return "\n".join(lines) + ("\n" if lines else "")

    def __repr__(self) -> str:
        return f"OffDiagPolynomial(n={self.n}, terms={len(self._terms)})"


def _poly_raw(n: int, terms: dict[PolyKey, TensorScalar]) -> OffDiagPolynomial:
    obj = OffDiagPolynomial.__new__(OffDiagPolynomial)
    obj.n = n
    obj._terms = terms
    return obj


class NormalOrderedKernel:
    """Finite sum ``c * b^alpha z^beta z'^gamma zbar'^delta P`` in normal form."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[KernelKey, TensorScalar] | None = None):
        self.n = n
        self._terms: dict[KernelKey, TensorScalar] = {}
        for key, c in (terms or {}).items():
            if any(len(e) != n for e in key):
                raise ValueError(f"term {key} does not match n={n}")
            _accumulate(self._terms, key, _as_scalar(c))

    @classmethod
    def term(cls, n: int, coeff=1, b=(), z=(), zp=(), zbarp=()) -> "NormalOrderedKernel":
        key = (
            _exps_from_indices(n, b),
            _exps_from_indices(n, z),
            _exps_from_indices(n, zp),
            _exps_from_indices(n, zbarp),
        )
        return cls(n, {key: _as_scalar(coeff)})

    @classmethod
    def gaussian(cls, n: int) -> "NormalOrderedKernel":
        """The model kernel ``P`` itself."""
        return cls.term(n)

    @property
    def terms(self) -> dict[KernelKey, TensorScalar]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormalOrderedKernel):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __add__(self, other: "NormalOrderedKernel") -> "NormalOrderedKernel":
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} != {other.n}")
        out = dict(self._terms)
        for key, c in other._terms.items():
            _accumulate(out, key, c)
        return _kernel_raw(self.n, out)

    def __neg__(self) -> "NormalOrderedKernel":
        return _kernel_raw(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: "NormalOrderedKernel") -> "NormalOrderedKernel":
        return self + (-other)

    def __mul__(self, c) -> "NormalOrderedKernel":
        c = _as_scalar(c)
        out = {}
        for key, v in self._terms.items():
            _accumulate(out, key, v * c)
        return _kernel_raw(self.n, out)

    __rmul__ = __mul__

    def map_coefficients(self, fn) -> "NormalOrderedKernel":
        out = {}
        for key, c in self._terms.items():
            _accumulate(out, key, fn(c))
        return _kernel_raw(self.n, out)

    def render(self) -> str:
        lines = []
        for key in sorted(self._terms):
            exps = " | ".join(",".join(map(str, e)) for e in key)
            lines.append(f"{self._terms[key].render()} | {exps}")
        return "\n".join(lines) + ("\n" if lines else "")

    def __repr__(self) -> str:
        return f"NormalOrderedKernel(n={self.n}, terms={len(self._terms)})"


def _kernel_raw(n: int, terms: dict[KernelKey, TensorScalar]) -> NormalOrderedKernel:
    obj = NormalOrderedKernel.__new__(NormalOrderedKernel)
    obj.n = n
    obj._terms = terms
    return obj


# ---------------------------------------------------------------------------
# Rewriting of arbitrary operator words into normal form
# ---------------------------------------------------------------------------

# Letters are (kind, i) with 0-based i. Kinds acting on Z: "b", "bp", "z", "zb".
# "zp" and "zbp" are parameters and are absorbed into gamma/delta directly.
Letter = tuple[str, int]
_HALF_OVER_PI = TensorScalar.const(Fraction(1, 2), -1)
_TWO = TensorScalar.const(2)
_FOUR_PI = TensorScalar.const(4, 1)


def _redexes(word: tuple[Letter, ...]) -> list[int]:
    """Positions where a rewrite applies; ``len(word) - 1`` may denote the last letter."""
    out = []
    for t in range(len(word) - 1):
        a, b = word[t][0], word[t + 1][0]
        if (a == "z" and b == "b") or (a == "zb" and b in ("b", "z")) or (a == "bp" and b in ("b", "z", "zb")):
            out.append(t)
    if word and word[-1][0] in ("zb", "bp"):
        out.append(-1)
    return out


def _rewrite(word, gamma, delta, pos):
    """Apply one rule; return list of (word, gamma, delta, factor)."""
    if pos == -1:
        kind, i = word[-1]
        if kind == "bp":
            return []  # b+_i P = 0
        # zbar_i P = (b_i / (2 pi) + zbar'_i) P
        rest = word[:-1]
        return [
            (rest + (("b", i),), gamma, delta, _HALF_OVER_PI),
            (rest, gamma, _bump(delta, i), ONE),
        ]
    (ka, i), (kb, j) = word[pos], word[pos + 1]
    head, tail = word[:pos], word[pos + 2:]
    swapped = (head + (word[pos + 1], word[pos]) + tail, gamma, delta, ONE)
    out = [swapped]
    if i == j:
        if ka == "z" and kb == "b":  # z_i b_i = b_i z_i + 2
            out.append((head + tail, gamma, delta, _TWO))
        elif ka == "bp" and kb == "b":  # b+_i b_i = b_i b+_i + 4 pi
            out.append((head + tail, gamma, delta, _FOUR_PI))
        elif ka == "bp" and kb == "zb":  # b+_i zbar_i = zbar_i b+_i + 2
            out.append((head + tail, gamma, delta, _TWO))
    return out


def _parse_word(n: int, word: Sequence) -> tuple[tuple[Letter, ...], Exps, Exps]:
    letters: list[Letter] = []
    gamma, delta = [0] * n, [0] * n
    for kind, i in word:
        if not 1 <= i <= n:
            raise ValueError(f"index {i} out of range 1..{n}")
        if kind == "zp":
            gamma[i - 1] += 1
        elif kind == "zbp":
            delta[i - 1] += 1
        elif kind in ("b", "bp", "z", "zb"):
            letters.append((kind, i - 1))
        else:
            raise ValueError(f"unknown letter {kind!r}")
    return tuple(letters), tuple(gamma), tuple(delta)


def normal_order(
    n: int,
    words: Iterable[tuple[object, Sequence]],
    rng: random.Random | None = None,
) -> NormalOrderedKernel:
    """Normal-order a sum of operator words applied to ``P``.

    ``words`` yields ``(coefficient, word)`` pairs; a word is a sequence of
    ``(kind, index)`` letters read left to right, kinds ``"b"``, ``"bp"``,
    ``"z"``, ``"zb"``, ``"zp"``, ``"zbp"``.  With ``rng`` the rewrite to
    apply next is chosen at random (used to check confluence).
    """
    pending: dict[tuple, TensorScalar] = {}
    for coeff, word in words:
        letters, gamma, delta = _parse_word(n, word)
        _accumulate(pending, (letters, gamma, delta), _as_scalar(coeff))

    done: dict[KernelKey, TensorScalar] = {}
    while pending:
        if rng is None:
            state = next(iter(pending))
        else:
            state = rng.choice(list(pending))
        coeff = pending.pop(state)
        word, gamma, delta = state
        spots = _redexes(word)
        if not spots:
            alpha, beta = [0] * n, [0] * n
            for kind, i in word:
                (alpha if kind == "b" else beta)[i] += 1
            _accumulate(done, (tuple(alpha), tuple(beta), gamma, delta), coeff)
            continue
        pos = spots[0] if rng is None else rng.choice(spots)
        for new_word, g, d, factor in _rewrite(word, gamma, delta, pos):
            _accumulate(pending, (new_word, g, d), coeff * factor)
    return _kernel_raw(n, done)


def _kernel_words(K: NormalOrderedKernel):
    for (alpha, beta, gamma, delta), c in K._terms.items():
        word = []
        for kind, e in (("b", alpha), ("z", beta), ("zp", gamma), ("zbp", delta)):
            for i, m in enumerate(e):
                word.extend([(kind, i + 1)] * m)
        yield c, word


def apply_b(i: int, K: NormalOrderedKernel) -> NormalOrderedKernel:
    """Left-multiply by ``b_i``.

    ``b`` factors commute among themselves and already stand leftmost, so
    the result is normal without any commutator corrections.
    """
    if not 1 <= i <= K.n:
        raise ValueError(f"index {i} out of range 1..{K.n}")
    return _kernel_raw(K.n, {(_bump(a, i - 1), b, g, d): c for (a, b, g, d), c in K._terms.items()})


def apply_b_plus(i: int, K: NormalOrderedKernel) -> NormalOrderedKernel:
    """Left-multiply by ``b+_i`` and normal-order with the rewrite rules."""
    if not 1 <= i <= K.n:
        raise ValueError(f"index {i} out of range 1..{K.n}")
    return normal_order(K.n, ((c, [("bp", i)] + w) for c, w in _kernel_words(K)))


def apply_L(K: NormalOrderedKernel) -> NormalOrderedKernel:
    """``L K = sum_i b_i b+_i K``."""
    total = NormalOrderedKernel(K.n)
    for i in range(1, K.n + 1):
        total = total + apply_b(i, apply_b_plus(i, K))
    return total


def inverse_L_on_complement(K: NormalOrderedKernel) -> NormalOrderedKernel:
    """Project out ``ker L`` (terms without ``b``) and divide by ``4 pi |alpha|``."""
    out = {}
    for key, c in K._terms.items():
        order = sum(key[0])
        if order:
            out[key] = c * Fraction(1, 4 * order) * TensorScalar.const(1, -1)
    return _kernel_raw(K.n, out)


# ---------------------------------------------------------------------------
# Resolution against the Gaussian
# ---------------------------------------------------------------------------

# Intermediate polynomials in (z, zbar, zbar') with constant (pi-power) coefficients.
_Small = dict[tuple[Exps, Exps, Exps], TensorScalar]


def _apply_b_small(poly: _Small, i: int) -> _Small:
    # b_i (Q P) = (2 pi (zbar_i - zbar'_i) Q - 2 dQ/dz_i) P
    two_pi = TensorScalar.const(2, 1)
    out: _Small = {}
    for (z, zb, zbp), c in poly.items():
        _accumulate(out, (z, _bump(zb, i), zbp), c * two_pi)
        _accumulate(out, (z, zb, _bump(zbp, i)), -(c * two_pi))
        if z[i]:
            _accumulate(out, (_bump(z, i, -1), zb, zbp), c * (-2 * z[i]))
    return out


@lru_cache(maxsize=None)
def _resolve_monomial(alpha: Exps, beta: Exps) -> tuple[tuple[tuple[Exps, Exps, Exps], TensorScalar], ...]:
    n = len(alpha)
    poly: _Small = {(beta, _zeros(n), _zeros(n)): ONE}
    for i, m in enumerate(alpha):
        for _ in range(m):
            poly = _apply_b_small(poly, i)
    return tuple(poly.items())


def resolve_against_P(K: NormalOrderedKernel) -> OffDiagPolynomial:
    """Return ``Q`` with ``K = Q * P`` by letting every ``b`` act on ``P``."""
    out: dict[PolyKey, TensorScalar] = {}
    for (alpha, beta, gamma, delta), c in K._terms.items():
        for (z, zb, zbp), v in _resolve_monomial(alpha, beta):
            _accumulate(out, (z, zb, gamma, _add(zbp, delta)), c * v)
    return _poly_raw(K.n, out)


def adjoint(Q: OffDiagPolynomial) -> OffDiagPolynomial:
    """Kernel adjoint ``T*(Z, Z') = conj(T(Z', Z))`` acting on the polynomial factor.

    ``z^a zbar^b z'^c zbar'^d`` maps to ``z^d zbar^c z'^b zbar'^a`` with the
    coefficient conjugated; ``P`` itself is self-adjoint.
    """
    out: dict[PolyKey, TensorScalar] = {}
    for (a, b, c, d), v in Q._terms.items():
        _accumulate(out, (d, c, b, a), conjugate(v))
    return _poly_raw(Q.n, out)


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------

def complex_coords(Z) -> np.ndarray:
    """``z_j = Z_{2j-1} + i Z_{2j}`` for a real 2n-vector (trailing axis)."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape[-1] % 2:
        raise ValueError("real coordinate vector must have even length")
    return Z[..., 0::2] + 1j * Z[..., 1::2]


def model_gaussian(Z, Zp) -> np.ndarray | complex:
    """``P(Z, Z')`` for real 2n-vectors (broadcast over leading axes)."""
    z, zp = complex_coords(Z), complex_coords(Zp)
    expo = np.abs(z) ** 2 + np.abs(zp) ** 2 - 2 * z * np.conj(zp)
    return np.exp(-np.pi / 2 * expo.sum(axis=-1))


class ModelGaussian:
    """Callable evaluator for the model kernel ``P`` in complex dimension ``n``."""

    def __init__(self, n: int):
        self.n = n

    def __call__(self, Z, Zp):
        Z, Zp = np.asarray(Z, float), np.asarray(Zp, float)
        if Z.shape[-1] != 2 * self.n or Zp.shape[-1] != 2 * self.n:
            raise ValueError(f"expected real {2 * self.n}-vectors")
        return model_gaussian(Z, Zp)


def evaluate(Q: OffDiagPolynomial, data: CurvatureData, Z, Zp, with_gaussian: bool = False) -> complex:
    """Numerically evaluate ``Q(Z, Z')`` (optionally times ``P(Z, Z')``)."""
    Z, Zp = np.asarray(Z, float), np.asarray(Zp, float)
    if Z.shape != (2 * Q.n,) or Zp.shape != (2 * Q.n,):
        raise ValueError(f"expected real {2 * Q.n}-vectors, got {Z.shape} and {Zp.shape}")
    if data.n != Q.n:
        raise ValueError(f"dimension mismatch: polynomial n={Q.n}, data n={data.n}")
    z, zp = complex_coords(Z), complex_coords(Zp)
    bases = (z, np.conj(z), zp, np.conj(zp))
    total = 0j
    for key, c in Q._terms.items():
        v = substitute(c, data)
        if v == 0:
            continue
        for base, e in zip(bases, key):
            v *= np.prod(base ** np.asarray(e))
        total += v
    if with_gaussian:
        total *= complex(model_gaussian(Z, Zp))
    return complex(total)

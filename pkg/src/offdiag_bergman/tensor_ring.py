"""Exact coefficient ring for curvature-valued polynomial coefficients.

An element is a finite sum of terms ``q * pi**k * m`` where ``q`` is a
rational number, ``k`` an integer and ``m`` a commutative monomial in the
formal symbols ``R(k,m,l,q)`` (Kaehler curvature, indices read as
``R_{k mbar l qbar}``) and ``RE(l,q)`` (curvature of the auxiliary bundle,
``RE_{l qbar}``).  Indices are 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Union

import numpy as np

__all__ = [
    "TensorSymbol",
    "TensorScalar",
    "CurvatureData",
    "canonicalize",
    "conjugate",
    "substitute",
    "riemann",
    "bundle_curvature",
    "scalar_curvature",
    "random_curvature",
]

Rational = Union[int, Fraction]


class TensorSymbol(NamedTuple):
    kind: str  # "R" or "RE"
    indices: tuple[int, ...]
    n: int

    def render(self) -> str:
        return f"{self.kind}({','.join(map(str, self.indices))})"


def _riemann_orbit(idx: tuple[int, ...]) -> list[tuple[int, ...]]:
    k, m, l, q = idx
    return [(k, m, l, q), (l, m, k, q), (k, q, l, m), (l, q, k, m)]


def canonicalize(sym: TensorSymbol) -> TensorSymbol:
    """Return the lexicographically least representative of ``sym``'s orbit.

    Riemann symbols are invariant under swapping the two unbarred indices
    and, independently, the two barred indices.  Bundle symbols have no
    symmetry and are returned unchanged (after range checking).
    """
    if sym.kind == "R":
        if len(sym.indices) != 4:
            raise ValueError(f"Riemann symbol needs 4 indices, got {sym.indices}")
    elif sym.kind == "RE":
        if len(sym.indices) != 2:
            raise ValueError(f"bundle symbol needs 2 indices, got {sym.indices}")
    else:
        raise ValueError(f"unknown symbol kind {sym.kind!r}")
    for i in sym.indices:
        if not 1 <= i <= sym.n:
            raise ValueError(f"index {i} out of range 1..{sym.n} in {sym.render()}")
    if sym.kind == "R":
        return TensorSymbol("R", min(_riemann_orbit(sym.indices)), sym.n)
    return sym


def _conj_symbol(sym: TensorSymbol) -> TensorSymbol:
    if sym.kind == "R":
        k, m, l, q = sym.indices
        return canonicalize(TensorSymbol("R", (m, k, q, l), sym.n))
    l, q = sym.indices
    return TensorSymbol("RE", (q, l), sym.n)


Monomial = tuple[TensorSymbol, ...]
TermKey = tuple[int, Monomial]


def _merge_n(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None or a == b:
        return a
    raise ValueError(f"dimension mismatch: {a} != {b}")


class TensorScalar:
    """Immutable element of the exact coefficient ring.

    Terms are stored as ``{(pi_exponent, monomial): Fraction}`` with
    monomials kept as sorted tuples of canonical symbols.
    """

    __slots__ = ("_terms", "_n", "_hash")

    def __init__(self, terms: Mapping[TermKey, Rational] | None = None, n: int | None = None):
        clean: dict[TermKey, Fraction] = {}
        for (k, mono), q in (terms or {}).items():
            q = Fraction(q)
            if q == 0:
                continue
            mono = tuple(sorted(canonicalize(s) for s in mono))
            for s in mono:
                n = _merge_n(n, s.n)
            if sum(1 for s in mono if s.kind == "RE") > 1:
                raise ValueError("a monomial may contain at most one bundle curvature factor")
            key = (int(k), mono)
            total = clean.get(key, Fraction(0)) + q
            if total == 0:
                clean.pop(key, None)
            else:
                clean[key] = total
        self._terms = clean
        self._n = n
        self._hash: int | None = None

    @classmethod
    def _raw(cls, terms: dict[TermKey, Fraction], n: int | None) -> "TensorScalar":
        # terms already canonical and free of zeros
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._n = n
        obj._hash = None
        return obj

    @classmethod
    def const(cls, q: Rational, pi_power: int = 0) -> "TensorScalar":
        return cls({(pi_power, ()): q})

    @property
    def terms(self) -> Mapping[TermKey, Fraction]:
        return dict(self._terms)

    @property
    def n(self) -> int | None:
        return self._n

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def _coerce(self, other) -> "TensorScalar":
        if isinstance(other, TensorScalar):
            return other
        if isinstance(other, (int, Fraction)):
            return TensorScalar.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = _merge_n(self._n, other._n)
        out = dict(self._terms)
        for key, q in other._terms.items():
            total = out.get(key, 0) + q
            if total:
                out[key] = total
            else:
                out.pop(key, None)
        return TensorScalar._raw(out, n)

    __radd__ = __add__

    def __neg__(self):
        return TensorScalar._raw({k: -q for k, q in self._terms.items()}, self._n)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return TensorScalar._raw({}, self._n)
            return TensorScalar._raw({k: q * other for k, q in self._terms.items()}, self._n)
        if not isinstance(other, TensorScalar):
            return NotImplemented
        n = _merge_n(self._n, other._n)
        out: dict[TermKey, Fraction] = {}
        for (k1, m1), q1 in self._terms.items():
            for (k2, m2), q2 in other._terms.items():
                mono = tuple(sorted(m1 + m2))
                if sum(1 for s in mono if s.kind == "RE") > 1:
                    raise ValueError("product would contain two bundle curvature factors")
                key = (k1 + k2, mono)
                total = out.get(key, 0) + q1 * q2
                if total:
                    out[key] = total
                else:
                    out.pop(key, None)
        return TensorScalar._raw(out, n)

    __rmul__ = __mul__

    def times_pi(self, power: int = 1) -> "TensorScalar":
        return TensorScalar._raw({(k + power, m): q for (k, m), q in self._terms.items()}, self._n)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = TensorScalar.const(other)
        if not isinstance(other, TensorScalar):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def conjugate(self) -> "TensorScalar":
        return conjugate(self)

    def without_bundle(self) -> "TensorScalar":
        """Set every bundle curvature symbol to zero."""
        kept = {k: q for k, q in self._terms.items() if all(s.kind != "RE" for s in k[1])}
        return TensorScalar._raw(kept, self._n)

    def substitute(self, data: "CurvatureData", pi_value: float = np.pi) -> complex:
        return substitute(self, data, pi_value)

    def sorted_terms(self) -> list[tuple[TermKey, Fraction]]:
        return sorted(self._terms.items(), key=lambda kv: (kv[0][0], kv[0][1]))

    def render(self) -> str:
        """Golden-file rendering, e.g. ``-1/12*pi^1*R(1,1,1,1)``."""
        if not self._terms:
            return "0"
        parts = []
        for (k, mono), q in self.sorted_terms():
            s = f"{q.numerator}/{q.denominator}*pi^{k}"
            for sym in mono:
                s += "*" + sym.render()
            parts.append(s)
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"TensorScalar({self.render()})"


def riemann(k: int, m: int, l: int, q: int, n: int) -> TensorScalar:
    """The symbol ``R_{k mbar l qbar}`` as a ring element."""
    return TensorScalar({(0, (TensorSymbol("R", (k, m, l, q), n),)): 1}, n)


def bundle_curvature(l: int, q: int, n: int) -> TensorScalar:
    """The symbol ``RE_{l qbar}`` as a ring element."""
    return TensorScalar({(0, (TensorSymbol("RE", (l, q), n),)): 1}, n)


def scalar_curvature(n: int) -> TensorScalar:
    """``rbar = 8 * sum_{m,q} R_{m qbar q mbar}``, expanded."""
    total = TensorScalar(n=n)
    for m in range(1, n + 1):
        for q in range(1, n + 1):
            total = total + riemann(m, q, q, m, n)
    return total * 8


def conjugate(s: TensorScalar) -> TensorScalar:
    """Complex conjugation; rationals and powers of pi are real."""
    out: dict[TermKey, Fraction] = {}
    for (k, mono), q in s._terms.items():
        key = (k, tuple(sorted(_conj_symbol(x) for x in mono)))
        out[key] = out.get(key, 0) + q
    return TensorScalar._raw({k: v for k, v in out.items() if v}, s.n)


@dataclass(frozen=True)
class CurvatureData:
    """Numeric curvature at a point, 0-based arrays ``R[k,m,l,q]`` and ``RE[l,q]``."""

    n: int
    R: np.ndarray
    RE: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=complex)
        RE = np.asarray(self.RE, dtype=complex)
        if R.shape != (self.n,) * 4 or RE.shape != (self.n,) * 2:
            raise ValueError(f"curvature arrays do not match n={self.n}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "RE", RE)

    @classmethod
    def zero(cls, n: int) -> "CurvatureData":
        return cls(n, np.zeros((n,) * 4, complex), np.zeros((n, n), complex))

    def symmetry_residual(self) -> float:
        R, RE = self.R, self.RE
        res = [
            np.abs(R - R.transpose(2, 1, 0, 3)).max(),
            np.abs(R - R.transpose(0, 3, 2, 1)).max(),
            np.abs(R.conj() - R.transpose(1, 0, 3, 2)).max(),
            np.abs(RE.conj() - RE.T).max(),
        ]
        return float(max(res))

    def symmetrized(self) -> "CurvatureData":
        """Project onto arrays that satisfy the curvature symmetries exactly."""
        R = self.R
        R = (R + R.transpose(2, 1, 0, 3)) / 2
        R = (R + R.transpose(0, 3, 2, 1)) / 2
        R = (R + R.transpose(1, 0, 3, 2).conj()) / 2
        RE = (self.RE + self.RE.conj().T) / 2
        return CurvatureData(self.n, R, RE)


def random_curvature(n: int, rng: np.random.Generator, with_bundle: bool = True) -> CurvatureData:
    """Random curvature data satisfying all symmetry invariants."""
    raw = rng.normal(size=(n,) * 4) + 1j * rng.normal(size=(n,) * 4)
    re = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    data = CurvatureData(n, raw, re if with_bundle else np.zeros((n, n)))
    return data.symmetrized()


def substitute(s: TensorScalar, data: CurvatureData, pi_value: float = np.pi) -> complex:
    """Evaluate ``s`` numerically with the given curvature tables."""
    if s.n is not None and s.n != data.n:
        raise ValueError(f"dimension mismatch: scalar has n={s.n}, data has n={data.n}")
    total = 0j
    for (k, mono), q in s._terms.items():
        v = complex(q.numerator / q.denominator) * pi_value**k
        for sym in mono:
            idx = tuple(i - 1 for i in sym.indices)
            v *= data.R[idx] if sym.kind == "R" else data.RE[idx]
        total += v
    return total


def sum_scalars(items: Iterable[TensorScalar]) -> TensorScalar:
    total = TensorScalar()
    for x in items:
        total = total + x
    return total

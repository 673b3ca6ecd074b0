"""Sparse multilinear polynomials over binary variables.

Every variable is assumed to take values in {0, 1}, so ``q * q == q`` and
each monomial is just a sorted tuple of distinct variable ids.  The empty
tuple is the constant term.
"""
from __future__ import annotations

import json
from typing import Iterable, Mapping

import numpy as np

Monomial = tuple[int, ...]

SERIAL_VERSION = 1


class MissingVariableError(KeyError):
    """Raised when an assignment does not cover every variable of a polynomial."""

    def __init__(self, missing: Iterable[int]):
        self.missing = sorted(missing)
        super().__init__(f"unassigned variables: {self.missing}")


def _union(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b or a == b:
        return a
    if a[-1] < b[0]:
        return a + b
    if b[-1] < a[0]:
        return b + a
    return tuple(sorted(set(a).union(b)))


class BinaryPolynomial:
    """Immutable sparse polynomial ``sum_m c_m * prod_{v in m} q_v``.

    Coefficients of exactly 0.0 are dropped; no epsilon pruning happens
    unless :meth:`compress` is called explicitly.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Iterable[int], float] | None = None):
        acc: dict[Monomial, float] = {}
        if terms:
            for vars_, c in terms.items():
                key = tuple(sorted(set(vars_)))
                acc[key] = acc.get(key, 0.0) + float(c)
        self._terms = {k: v for k, v in acc.items() if v != 0.0}

    @classmethod
    def _from_clean(cls, terms: dict[Monomial, float]) -> "BinaryPolynomial":
        p = cls.__new__(cls)
        p._terms = terms
        return p

    @classmethod
    def constant(cls, c: float) -> "BinaryPolynomial":
        return cls._from_clean({(): float(c)} if c != 0.0 else {})

    @classmethod
    def var(cls, v: int, coef: float = 1.0) -> "BinaryPolynomial":
        return cls._from_clean({(int(v),): float(coef)} if coef != 0.0 else {})

    @classmethod
    def linear(cls, coefs: Mapping[int, float], const: float = 0.0) -> "BinaryPolynomial":
        terms = {(int(v),): float(c) for v, c in coefs.items() if c != 0.0}
        if const != 0.0:
            terms[()] = float(const)
        return cls._from_clean(terms)

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def sorted_items(self) -> list[tuple[Monomial, float]]:
        return sorted(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __contains__(self, monomial) -> bool:
        return tuple(monomial) in self._terms

    def coefficient(self, monomial: Iterable[int]) -> float:
        return self._terms.get(tuple(sorted(set(monomial))), 0.0)

    @property
    def constant_term(self) -> float:
        return self._terms.get((), 0.0)

    def variables(self) -> list[int]:
        vs: set[int] = set()
        for m in self._terms:
            vs.update(m)
        return sorted(vs)

    def max_degree(self) -> int:
        return max((len(m) for m in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    # -- algebra ---------------------------------------------------------
    def __add__(self, other) -> "BinaryPolynomial":
        if not isinstance(other, BinaryPolynomial):
            other = BinaryPolynomial.constant(float(other))
        acc = dict(self._terms)
        for m, c in sorted(other._terms.items()):
            acc[m] = acc.get(m, 0.0) + c
        return BinaryPolynomial._from_clean({m: c for m, c in acc.items() if c != 0.0})

    __radd__ = __add__

    def __neg__(self) -> "BinaryPolynomial":
        return BinaryPolynomial._from_clean({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "BinaryPolynomial":
        if not isinstance(other, BinaryPolynomial):
            other = BinaryPolynomial.constant(float(other))
        return self + (-other)

    def __rsub__(self, other) -> "BinaryPolynomial":
        return (-self) + other

    def scale(self, k: float) -> "BinaryPolynomial":
        k = float(k)
        if k == 0.0:
            return BinaryPolynomial()
        return BinaryPolynomial._from_clean(
            {m: c * k for m, c in self._terms.items() if c * k != 0.0}
        )

    def __mul__(self, other) -> "BinaryPolynomial":
        if not isinstance(other, BinaryPolynomial):
            return self.scale(other)
        acc: dict[Monomial, float] = {}
        right = sorted(other._terms.items())
        for ma, ca in sorted(self._terms.items()):
            for mb, cb in right:
                key = _union(ma, mb)
                acc[key] = acc.get(key, 0.0) + ca * cb
        return BinaryPolynomial._from_clean({m: c for m, c in acc.items() if c != 0.0})

    def __rmul__(self, other) -> "BinaryPolynomial":
        return self.scale(other)

    def __pow__(self, n: int) -> "BinaryPolynomial":
        return power(self, n)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float)):
            other = BinaryPolynomial.constant(other)
        if not isinstance(other, BinaryPolynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self.sorted_items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "BinaryPolynomial(0)"
        parts = []
        for m, c in self.sorted_items():
            parts.append(f"{c:+g}" + "".join(f"*q{v}" for v in m))
        return "BinaryPolynomial(" + " ".join(parts) + ")"

    def allclose(self, other: "BinaryPolynomial", rtol: float = 1e-9, atol: float = 0.0) -> bool:
        keys = set(self._terms) | set(other._terms)
        for k in keys:
            a = self._terms.get(k, 0.0)
            b = other._terms.get(k, 0.0)
            if abs(a - b) > atol + rtol * max(abs(a), abs(b)):
                return False
        return True

    def compress(self, epsilon: float = 1e-12) -> "BinaryPolynomial":
        """Drop terms with ``|coefficient| <= epsilon``."""
        return BinaryPolynomial._from_clean(
            {m: c for m, c in self._terms.items() if abs(c) > epsilon}
        )

    def substitute(self, values: Mapping[int, int]) -> "BinaryPolynomial":
        """Fix some variables to 0/1 and return the residual polynomial."""
        acc: dict[Monomial, float] = {}
        for m, c in self._terms.items():
            keep = []
            zero = False
            for v in m:
                if v in values:
                    if not values[v]:
                        zero = True
                        break
                else:
                    keep.append(v)
            if zero:
                continue
            key = tuple(keep)
            acc[key] = acc.get(key, 0.0) + c
        return BinaryPolynomial._from_clean({m: c for m, c in acc.items() if c != 0.0})

    # -- evaluation ------------------------------------------------------
    def evaluate(self, assignment: Mapping[int, int]) -> float:
        return evaluate(self, assignment)

    def evaluate_many(self, order: list[int], X: np.ndarray) -> np.ndarray:
        """Evaluate at each row of ``X``; column ``k`` holds variable ``order[k]``."""
        X = np.asarray(X)
        pos = {v: k for k, v in enumerate(order)}
        missing = [v for v in self.variables() if v not in pos]
        if missing:
            raise MissingVariableError(missing)
        out = np.zeros(X.shape[0])
        Xb = X.astype(bool)
        for m, c in self.sorted_items():
            if not m:
                out += c
                continue
            mask = Xb[:, pos[m[0]]]
            for v in m[1:]:
                mask = mask & Xb[:, pos[v]]
            out += c * mask
        return out

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "version": SERIAL_VERSION,
            "terms": [{"vars": list(m), "c": c} for m, c in self.sorted_items()],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BinaryPolynomial":
        if d.get("version") != SERIAL_VERSION:
            raise ValueError(f"unsupported polynomial version {d.get('version')!r}")
        return cls({tuple(t["vars"]): t["c"] for t in d["terms"]})

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "BinaryPolynomial":
        return cls.from_dict(json.loads(s))


def add(a: BinaryPolynomial, b: BinaryPolynomial) -> BinaryPolynomial:
    return a + b


def multiply(a: BinaryPolynomial, b: BinaryPolynomial) -> BinaryPolynomial:
    return a * b


def power(a: BinaryPolynomial, n: int) -> BinaryPolynomial:
    if n < 0:
        raise ValueError("power requires n >= 0")
    result = BinaryPolynomial.constant(1.0)
    for _ in range(n):
        result = result * a
    return result


def evaluate(a: BinaryPolynomial, assignment: Mapping[int, int]) -> float:
    missing = [v for v in a.variables() if v not in assignment]
    if missing:
        raise MissingVariableError(missing)
    bad = [v for v in a.variables() if assignment[v] not in (0, 1)]
    if bad:
        raise ValueError(f"non-binary values for variables {bad}")
    total = 0.0
    for m, c in a.sorted_items():
        if all(assignment[v] for v in m):
            total += c
    return total


def max_degree(a: BinaryPolynomial) -> int:
    return a.max_degree()


def compress(a: BinaryPolynomial, epsilon: float = 1e-12) -> BinaryPolynomial:
    return a.compress(epsilon)


def sum_polynomials(polys: Iterable[BinaryPolynomial]) -> BinaryPolynomial:
    """Add many polynomials with one accumulation map (avoids quadratic copying)."""
    acc: dict[Monomial, float] = {}
    for p in polys:
        for m, c in p.sorted_items():
            acc[m] = acc.get(m, 0.0) + c
    return BinaryPolynomial._from_clean({m: c for m, c in acc.items() if c != 0.0})

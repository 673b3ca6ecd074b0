"""Signed radix-2 discretization of control points.

A control point ``P`` is approximated by ``sum_l 2**l * (q+_l - q-_l)`` for
``l`` in ``[low_exp, high_exp]``.  The minus bits are absent when the encoding is
unsigned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .binpoly import BinaryPolynomial, MissingVariableError


@dataclass(frozen=True)
class EncodingSpec:
    low_exp: int = -2
    high_exp: int = 0
    signed: bool = True

    def __post_init__(self):
        if self.low_exp > self.high_exp:
            raise ValueError(f"low_exp {self.low_exp} > high_exp {self.high_exp}")

    @property
    def n_exponents(self) -> int:
        return self.high_exp - self.low_exp + 1

    @property
    def bits_per_point(self) -> int:
        return self.n_exponents * (2 if self.signed else 1)

    @property
    def step(self) -> float:
        return 2.0 ** self.low_exp

    @property
    def max_value(self) -> float:
        return sum(2.0 ** l for l in range(self.low_exp, self.high_exp + 1))

    @property
    def min_value(self) -> float:
        return -self.max_value if self.signed else 0.0

    @property
    def max_units(self) -> int:
        """Largest magnitude in multiples of ``step``."""
        return 2 ** self.n_exponents - 1

    def weights(self) -> list[float]:
        return [2.0 ** l for l in range(self.low_exp, self.high_exp + 1)]

    def to_dict(self) -> dict:
        return {"low_exp": self.low_exp, "high_exp": self.high_exp, "signed": self.signed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EncodingSpec":
        return cls(int(d["low_exp"]), int(d["high_exp"]), bool(d["signed"]))


@dataclass(frozen=True)
class ControlPointCode:
    plus_bits: tuple[int, ...]
    minus_bits: tuple[int, ...] = ()

    def all_bits(self) -> tuple[int, ...]:
        return self.plus_bits + self.minus_bits

    def check(self, spec: EncodingSpec) -> None:
        if len(self.plus_bits) != spec.n_exponents:
            raise ValueError("plus_bits length does not match encoding")
        if len(self.minus_bits) != (spec.n_exponents if spec.signed else 0):
            raise ValueError("minus_bits length does not match encoding")
        if len(set(self.all_bits())) != len(self.all_bits()):
            raise ValueError("duplicate variable ids in control point code")


def expansion_polynomial(code: ControlPointCode, spec: EncodingSpec) -> BinaryPolynomial:
    code.check(spec)
    coefs: dict[int, float] = {}
    for w, v in zip(spec.weights(), code.plus_bits):
        coefs[v] = w
    for w, v in zip(spec.weights(), code.minus_bits):
        coefs[v] = -w
    return BinaryPolynomial.linear(coefs)


def decode(assignment: Mapping[int, int], code: ControlPointCode, spec: EncodingSpec) -> float:
    missing = [v for v in code.all_bits() if v not in assignment]
    if missing:
        raise MissingVariableError(missing)
    value = 0.0
    for w, v in zip(spec.weights(), code.plus_bits):
        if assignment[v]:
            value += w
    for w, v in zip(spec.weights(), code.minus_bits):
        if assignment[v]:
            value -= w
    return value


def decode_bits(plus: Sequence[int], minus: Sequence[int], spec: EncodingSpec) -> float:
    w = spec.weights()
    return sum(wi for wi, b in zip(w, plus) if b) - sum(wi for wi, b in zip(w, minus) if b)


def _bits_of(units: int, width: int) -> tuple[int, ...]:
    return tuple((units >> k) & 1 for k in range(width))


def _cheapest_split(units: int, spec: EncodingSpec) -> tuple[int, int]:
    """Pick (plus, minus) unit counts with plus - minus == units and fewest set bits."""
    K = spec.max_units
    if not spec.signed:
        return units, 0
    best = None
    lo = max(0, -units)
    hi = K - max(0, units)
    for minus in range(lo, hi + 1):
        plus = units + minus
        cost = bin(plus).count("1") + bin(minus).count("1")
        # strict < keeps the smallest minus on ties, i.e. prefers plus bits
        if best is None or cost < best[0]:
            best = (cost, plus, minus)
    return best[1], best[2]


def nearest_code(value: float, spec: EncodingSpec) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Closest representable code as ``(plus_bits, minus_bits)`` tuples of 0/1.

    Values outside the representable range are clamped.  Equidistant grid
    points are resolved toward fewer set bits, then toward positive values.
    """
    K = spec.max_units
    lo_units = -K if spec.signed else 0
    scaled = value / spec.step
    candidates = {min(max(math.floor(scaled), lo_units), K), min(max(math.ceil(scaled), lo_units), K)}
    width = spec.n_exponents
    best = None
    for units in sorted(candidates, reverse=True):
        plus, minus = _cheapest_split(units, spec)
        err = abs(units * spec.step - value)
        bits = bin(plus).count("1") + bin(minus).count("1")
        key = (err, bits)
        if best is None or key < best[0]:
            best = (key, plus, minus)
    _, plus, minus = best
    return _bits_of(plus, width), (_bits_of(minus, width) if spec.signed else ())


def code_assignment(code: ControlPointCode, plus: Sequence[int], minus: Sequence[int]) -> dict[int, int]:
    out = {v: int(b) for v, b in zip(code.plus_bits, plus)}
    out.update({v: int(b) for v, b in zip(code.minus_bits, minus)})
    return out

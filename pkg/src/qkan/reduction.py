"""Higher-order to quadratic reduction by pairwise auxiliary substitution."""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping

import numpy as np

from .binpoly import BinaryPolynomial, MissingVariableError

DEFAULT_W_FACTOR = 20.0


@dataclass(frozen=True)
class AuxEntry:
    aux: int
    left: int
    right: int


@dataclass
class QuboProblem:
    linear: dict[int, float]
    quadratic: dict[tuple[int, int], float]
    offset: float = 0.0
    registry: list[AuxEntry] = field(default_factory=list)
    penalty_weight: float = 0.0
    declared_vars: tuple[int, ...] = ()

    def __post_init__(self):
        for (i, j) in self.quadratic:
            if not i < j:
                raise ValueError(f"quadratic key {(i, j)} must satisfy i < j")

    def variables(self) -> list[int]:
        vs = set(self.linear) | set(self.declared_vars)
        for i, j in self.quadratic:
            vs.add(i)
            vs.add(j)
        for e in self.registry:
            vs.update((e.aux, e.left, e.right))
        return sorted(vs)

    @property
    def n_vars(self) -> int:
        return len(self.variables())

    def energy(self, assignment: Mapping[int, int]) -> float:
        missing = [v for v in self.variables() if v not in assignment]
        if missing:
            raise MissingVariableError(missing)
        e = self.offset
        for v, c in sorted(self.linear.items()):
            if assignment[v]:
                e += c
        for (i, j), c in sorted(self.quadratic.items()):
            if assignment[i] and assignment[j]:
                e += c
        return e

    def energies(self, order: list[int], X: np.ndarray) -> np.ndarray:
        pos = {v: k for k, v in enumerate(order)}
        X = np.asarray(X, dtype=float)
        h = np.zeros(len(order))
        for v, c in self.linear.items():
            h[pos[v]] += c
        out = self.offset + X @ h
        if self.quadratic:
            I = np.array([pos[i] for i, _ in self.quadratic])
            J = np.array([pos[j] for _, j in self.quadratic])
            C = np.array(list(self.quadratic.values()))
            out = out + (X[:, I] * X[:, J]) @ C
        return out

    def to_polynomial(self) -> BinaryPolynomial:
        terms = {(v,): c for v, c in self.linear.items()}
        terms.update({k: c for k, c in self.quadratic.items()})
        if self.offset:
            terms[()] = self.offset
        return BinaryPolynomial(terms)

    def aux_violations(self, assignment: Mapping[int, int]) -> int:
        return sum(
            1 for e in self.registry
            if int(assignment[e.aux]) != int(assignment[e.left]) * int(assignment[e.right])
        )

    def extend_consistent(self, assignment: Mapping[int, int]) -> dict[int, int]:
        """Fill in aux bits so every registry entry holds."""
        out = dict(assignment)
        for e in self.registry:  # registry order guarantees operands are set first
            out[e.aux] = int(out[e.left]) * int(out[e.right])
        return out

    def arrays(self, order: list[int] | None = None):
        """Dense-index view: ``(order, h, rows, cols, vals)`` with ``rows < cols``."""
        order = self.variables() if order is None else order
        pos = {v: k for k, v in enumerate(order)}
        h = np.zeros(len(order))
        for v, c in self.linear.items():
            h[pos[v]] += c
        items = sorted(self.quadratic.items())
        rows = np.array([pos[i] for (i, _), _ in items], dtype=np.int64)
        cols = np.array([pos[j] for (_, j), _ in items], dtype=np.int64)
        vals = np.array([c for _, c in items], dtype=float)
        return order, h, rows, cols, vals

    # -- export ------------------------------------------------------------
    def to_coo(self) -> str:
        lines = [f"{v} {v} {c!r}" for v, c in sorted(self.linear.items())]
        lines += [f"{i} {j} {c!r}" for (i, j), c in sorted(self.quadratic.items())]
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {
            "version": 1,
            "offset": self.offset,
            "penalty_weight": self.penalty_weight,
            "registry": [[e.aux, e.left, e.right] for e in self.registry],
            "declared_vars": list(self.declared_vars),
        }

    def save(self, coo_path, sidecar_path=None) -> None:
        coo_path = Path(coo_path)
        coo_path.write_text(self.to_coo())
        sidecar_path = Path(sidecar_path) if sidecar_path else coo_path.with_suffix(".json")
        sidecar_path.write_text(json.dumps(self.sidecar(), indent=2))

    @classmethod
    def load(cls, coo_path, sidecar_path=None) -> "QuboProblem":
        coo_path = Path(coo_path)
        sidecar_path = Path(sidecar_path) if sidecar_path else coo_path.with_suffix(".json")
        linear, quad = {}, {}
        for line in coo_path.read_text().splitlines():
            if not line.strip():
                continue
            i, j, c = line.split()
            i, j = int(i), int(j)
            if i == j:
                linear[i] = float(c)
            else:
                quad[(min(i, j), max(i, j))] = float(c)
        meta = json.loads(sidecar_path.read_text())
        reg = [AuxEntry(*r) for r in meta["registry"]]
        return cls(linear, quad, meta["offset"], reg, meta["penalty_weight"],
                   tuple(meta.get("declared_vars", ())))


def penalty(aux: int, p1: int, p2: int, w: float) -> BinaryPolynomial:
    """``w * (p1 p2 - 2 aux p1 - 2 aux p2 + 3 aux)``: zero iff ``aux == p1 * p2``."""
    if len({aux, p1, p2}) != 3:
        raise ValueError("penalty needs three distinct variables")
    if w <= 0:
        raise ValueError("penalty weight must be positive")
    return BinaryPolynomial({(p1, p2): w, (aux, p1): -2 * w, (aux, p2): -2 * w, (aux,): 3 * w})


def _pairs(m):
    return combinations(m, 2)


def reduce(h: BinaryPolynomial, w_factor: float = DEFAULT_W_FACTOR, first_aux: int | None = None,
           variables=()) -> QuboProblem:
    """Quadratize ``h`` greedily.

    Each round replaces the variable pair that occurs in the most monomials of
    degree >= 3 (smallest pair on ties) by a fresh auxiliary variable.
    ``variables`` lists ids that must appear in the problem even if every
    coefficient touching them vanished (e.g. all control bits of a layout).
    """
    if w_factor <= 0:
        raise ValueError("w_factor must be positive")
    terms: dict[tuple[int, ...], float] = dict(h.items())
    vars_ = h.variables()
    next_id = max([first_aux or 0] + [v + 1 for v in vars_] + [v + 1 for v in variables])

    counts: Counter = Counter()
    holders: dict[tuple[int, int], set] = defaultdict(set)

    def register(m):
        for p in _pairs(m):
            counts[p] += 1
            holders[p].add(m)

    def unregister(m):
        for p in _pairs(m):
            counts[p] -= 1
            if counts[p] == 0:
                del counts[p]
            holders[p].discard(m)
            if not holders[p]:
                del holders[p]

    for m in terms:
        if len(m) >= 3:
            register(m)

    registry: list[AuxEntry] = []
    while counts:
        pair = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        a, b = pair
        aux = next_id
        next_id += 1
        registry.append(AuxEntry(aux, a, b))
        for m in sorted(holders[pair]):
            c = terms.pop(m)
            unregister(m)
            new = tuple(v for v in m if v != a and v != b) + (aux,)
            existed = new in terms
            val = terms.get(new, 0.0) + c
            if existed and len(new) >= 3:
                unregister(new)
            if val != 0.0:
                terms[new] = val
                if len(new) >= 3:
                    register(new)
            elif existed:
                del terms[new]

    offset = terms.pop((), 0.0)
    linear = {m[0]: c for m, c in terms.items() if len(m) == 1}
    quadratic = {(m[0], m[1]): c for m, c in terms.items() if len(m) == 2}
    max_coef = max((abs(c) for c in terms.values()), default=0.0)
    w = w_factor * max_coef if max_coef > 0 else w_factor
    for e in registry:
        for m, c in penalty(e.aux, e.left, e.right, w).items():
            if len(m) == 1:
                linear[m[0]] = linear.get(m[0], 0.0) + c
            else:
                quadratic[m] = quadratic.get(m, 0.0) + c
    linear = {v: c for v, c in linear.items() if c != 0.0}
    quadratic = {k: c for k, c in quadratic.items() if c != 0.0}
    return QuboProblem(linear, quadratic, offset, registry, w, tuple(sorted(variables)))


def qubit_count(layout, registry) -> int:
    return layout.total_bits + len(registry)

"""Bézier Kolmogorov-Arnold networks: architecture, variable layout, forward passes.

Each edge ``(layer, j -> k)`` carries a Bézier curve of its own degree; a
node's value is the plain sum of its incoming edge curves.  Inner layers feed
the raw (unclamped) node value into the next curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .binpoly import BinaryPolynomial
from .encoding import ControlPointCode, EncodingSpec, decode, expansion_polynomial

MAX_DEGREE = 20

Edge = tuple[int, int, int]  # (layer, input node, output node)


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class KanSpec:
    widths: tuple[int, ...]
    degrees: Mapping[Edge, int] = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ValueError(f"invalid layer widths {self.widths}")
        degs = {tuple(int(x) for x in k): int(v) for k, v in dict(self.degrees).items()}
        expected = set(self._all_edges())
        if set(degs) != expected:
            raise ValueError(
                f"degree map must cover exactly the edges of {self.widths}; "
                f"missing {sorted(expected - set(degs))}, extra {sorted(set(degs) - expected)}"
            )
        for e, n in degs.items():
            if not 1 <= n <= MAX_DEGREE:
                raise ValueError(f"edge {e}: degree {n} outside [1, {MAX_DEGREE}]")
        object.__setattr__(self, "degrees", degs)

    def _all_edges(self) -> list[Edge]:
        return [
            (l, j, k)
            for l in range(len(self.widths) - 1)
            for k in range(self.widths[l + 1])
            for j in range(self.widths[l])
        ]

    def __hash__(self):
        return hash((self.widths, tuple(sorted(self.degrees.items()))))

    def __eq__(self, other):
        if not isinstance(other, KanSpec):
            return NotImplemented
        return self.widths == other.widths and dict(self.degrees) == dict(other.degrees)

    @classmethod
    def uniform(cls, widths: Sequence[int], degree: int = 1) -> "KanSpec":
        widths = tuple(widths)
        edges = [
            (l, j, k)
            for l in range(len(widths) - 1)
            for k in range(widths[l + 1])
            for j in range(widths[l])
        ]
        return cls(widths, {e: degree for e in edges})

    @classmethod
    def per_layer(cls, widths: Sequence[int], degrees: Sequence) -> "KanSpec":
        """``degrees[l]`` is an int (all edges of layer ``l``) or a list in edge order."""
        widths = tuple(widths)
        if len(degrees) != len(widths) - 1:
            raise ValueError("need one degree entry per layer")
        out = {}
        for l, d in enumerate(degrees):
            edges = [(l, j, k) for k in range(widths[l + 1]) for j in range(widths[l])]
            if isinstance(d, int):
                out.update({e: d for e in edges})
            else:
                if len(d) != len(edges):
                    raise ValueError(f"layer {l}: expected {len(edges)} edge degrees, got {len(d)}")
                out.update(dict(zip(edges, d)))
        return cls(widths, out)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_outputs(self) -> int:
        return self.widths[-1]

    def edges(self) -> list[Edge]:
        """Edges in layout order: ascending (layer, output node, input node)."""
        return self._all_edges()

    def layer_edges(self, layer: int) -> list[Edge]:
        return [e for e in self.edges() if e[0] == layer]

    def degree_bound(self) -> int:
        """Upper bound on the bit-degree of the symbolic network output."""
        d = 1
        for l in range(1, self.depth):
            d = max(self.degrees[e] for e in self.layer_edges(l)) * d + 1
        return d

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "degrees": {f"{l}:{j}:{k}": n for (l, j, k), n in sorted(self.degrees.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "KanSpec":
        degs = {}
        for key, n in d["degrees"].items():
            l, j, k = (int(x) for x in key.split(":"))
            degs[(l, j, k)] = int(n)
        return cls(tuple(d["widths"]), degs)


@dataclass(frozen=True)
class VariableLayout:
    spec: KanSpec
    encoding: EncodingSpec
    codes: Mapping[Edge, tuple[ControlPointCode, ...]] = field(hash=False, compare=False)

    @classmethod
    def build(cls, spec: KanSpec, encoding: EncodingSpec) -> "VariableLayout":
        nxt = 0
        codes = {}
        m = encoding.n_exponents
        for e in spec.edges():
            pts = []
            for _ in range(spec.degrees[e] + 1):
                plus = tuple(range(nxt, nxt + m))
                nxt += m
                minus = ()
                if encoding.signed:
                    minus = tuple(range(nxt, nxt + m))
                    nxt += m
                pts.append(ControlPointCode(plus, minus))
            codes[e] = tuple(pts)
        return cls(spec, encoding, codes)

    @property
    def total_control_vars(self) -> int:
        return sum(len(c) for c in self.codes.values())

    @property
    def total_bits(self) -> int:
        return self.total_control_vars * self.encoding.bits_per_point

    def all_codes(self) -> list[ControlPointCode]:
        return [c for e in self.spec.edges() for c in self.codes[e]]

    def bit_ids(self) -> list[int]:
        return list(range(self.total_bits))

    @cached_property
    def expansions(self) -> dict[Edge, tuple[BinaryPolynomial, ...]]:
        return {
            e: tuple(expansion_polynomial(c, self.encoding) for c in self.codes[e])
            for e in self.spec.edges()
        }


@dataclass
class DecodedModel:
    spec: KanSpec
    encoding: EncodingSpec
    control_points: dict[Edge, np.ndarray]
    bounds_low: np.ndarray | None = None
    bounds_high: np.ndarray | None = None

    @classmethod
    def from_vector(cls, spec, encoding, vec, bounds_low=None, bounds_high=None) -> "DecodedModel":
        vec = np.asarray(vec, dtype=float)
        cps, pos = {}, 0
        for e in spec.edges():
            n = spec.degrees[e] + 1
            cps[e] = vec[pos:pos + n].copy()
            pos += n
        if pos != vec.size:
            raise ValueError(f"expected {pos} control values, got {vec.size}")
        return cls(spec, encoding, cps, bounds_low, bounds_high)

    def vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.control_points[e], float) for e in self.spec.edges()])

    def normalize(self, X: np.ndarray, clip: bool = True) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.bounds_low is None:
            return X
        span = np.where(self.bounds_high > self.bounds_low, self.bounds_high - self.bounds_low, 1.0)
        Z = (X - self.bounds_low) / span
        return np.clip(Z, 0.0, 1.0) if clip else Z

    def predict(self, X_raw: np.ndarray) -> np.ndarray:
        """Forward pass on raw (unnormalized) inputs; returns ``(n, n_outputs)``."""
        return forward_batch(self.spec, self.control_points, self.normalize(X_raw))

    def to_dict(self) -> dict:
        d = {
            "spec": self.spec.to_dict(),
            "encoding": self.encoding.to_dict(),
            "control_points": {f"{l}:{j}:{k}": [float(x) for x in self.control_points[(l, j, k)]]
                               for (l, j, k) in self.spec.edges()},
        }
        if self.bounds_low is not None:
            d["bounds"] = {"low": [float(x) for x in self.bounds_low],
                           "high": [float(x) for x in self.bounds_high]}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DecodedModel":
        spec = KanSpec.from_dict(d["spec"])
        enc = EncodingSpec.from_dict(d["encoding"])
        cps = {}
        for key, vals in d["control_points"].items():
            l, j, k = (int(x) for x in key.split(":"))
            cps[(l, j, k)] = np.asarray(vals, dtype=float)
        b = d.get("bounds")
        low = np.asarray(b["low"], float) if b else None
        high = np.asarray(b["high"], float) if b else None
        return cls(spec, enc, cps, low, high)


def bernstein_weights(n: int, t: float) -> list[float]:
    if n < 1:
        raise ValueError("degree must be >= 1")
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    return [math.comb(n, i) * (1.0 - t) ** (n - i) * t ** i for i in range(n + 1)]


def bernstein_matrix(n: int, t: np.ndarray) -> np.ndarray:
    """``(len(t), n+1)`` Bernstein basis values, no domain check."""
    t = np.asarray(t, dtype=float)
    s = 1.0 - t
    return np.stack([math.comb(n, i) * s ** (n - i) * t ** i for i in range(n + 1)], axis=-1)


def bernstein_derivative(n: int, P: np.ndarray, t: np.ndarray) -> np.ndarray:
    """d/dt of the curve with control points ``P`` at ``t``."""
    if n == 0:
        return np.zeros_like(t)
    diffs = np.diff(P)
    return n * (bernstein_matrix(n - 1, t) @ diffs)


def forward_batch(spec: KanSpec, control_points: Mapping[Edge, np.ndarray], X: np.ndarray,
                  keep: bool = False):
    """Numeric forward pass on normalized inputs ``X`` of shape ``(n, widths[0])``.

    With ``keep=True`` also returns the node values of every layer.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.n_inputs:
        raise ValueError(f"expected {spec.n_inputs} features, got {X.shape[1]}")
    H = X
    layers = [H]
    for l in range(spec.depth):
        out = np.zeros((H.shape[0], spec.widths[l + 1]))
        for e in spec.layer_edges(l):
            _, j, k = e
            out[:, k] += bernstein_matrix(spec.degrees[e], H[:, j]) @ np.asarray(control_points[e], float)
        H = out
        layers.append(H)
    return (H, layers) if keep else H


def numeric_forward(model: DecodedModel, sample) -> np.ndarray:
    """Forward pass on already-normalized input(s); 1-D input gives a 1-D output."""
    x = np.asarray(sample, dtype=float)
    single = x.ndim == 1
    if single and x.shape[0] != model.spec.n_inputs:
        raise ValueError(f"expected {model.spec.n_inputs} features, got {x.shape[0]}")
    out = forward_batch(model.spec, model.control_points, np.atleast_2d(x))
    return out[0] if single else out


def symbolic_output(spec: KanSpec, layout: VariableLayout, sample) -> list[BinaryPolynomial]:
    """Network outputs at one known input, as polynomials in the control-point bits."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.shape[0] != spec.n_inputs:
        raise ValueError(f"expected {spec.n_inputs} features, got {x.shape[0]}")
    exps = layout.expansions

    nodes = [BinaryPolynomial() for _ in range(spec.widths[1])]
    for e in spec.layer_edges(0):
        _, j, k = e
        w = bernstein_weights(spec.degrees[e], float(x[j]))
        for wi, P in zip(w, exps[e]):
            nodes[k] = nodes[k] + P.scale(wi)

    for l in range(1, spec.depth):
        max_n = max(spec.degrees[e] for e in spec.layer_edges(l))
        u_pows, v_pows = [], []
        for u in nodes:
            v = 1.0 - u
            up, vp = [BinaryPolynomial.constant(1.0)], [BinaryPolynomial.constant(1.0)]
            for _ in range(max_n):
                up.append(up[-1] * u)
                vp.append(vp[-1] * v)
            u_pows.append(up)
            v_pows.append(vp)
        nxt = [BinaryPolynomial() for _ in range(spec.widths[l + 1])]
        for e in spec.layer_edges(l):
            _, j, k = e
            n = spec.degrees[e]
            for i, P in enumerate(exps[e]):
                basis = (v_pows[j][n - i] * u_pows[j][i]).scale(math.comb(n, i))
                nxt[k] = nxt[k] + basis * P
        nodes = nxt
    return nodes


def decode_model(assignment: Mapping[int, int], layout: VariableLayout,
                 bounds_low=None, bounds_high=None) -> DecodedModel:
    cps = {
        e: np.array([decode(assignment, c, layout.encoding) for c in layout.codes[e]])
        for e in layout.spec.edges()
    }
    return DecodedModel(layout.spec, layout.encoding, cps, bounds_low, bounds_high)

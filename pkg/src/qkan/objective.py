"""MSE objective as a binary polynomial, and the collapsed-moment fast path.

The network output at a known input is a polynomial in the control bits
whose coefficients are products of first-layer Bernstein weights.  Squaring
the residual therefore gives, per bit-monomial, a coefficient that is a
fixed polynomial in those weights and the targets.  Summing over samples
only needs the dataset sums of the distinct weight/target products (the
"moments"), which are computed once per dataset in a single pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .binpoly import BinaryPolynomial, sum_polynomials
from .encoding import EncodingSpec
from .network import Edge, KanSpec, VariableLayout, bernstein_matrix, symbolic_output

FeatKey = tuple[int, ...]  # sorted feature ids, repeated for powers
JointKey = tuple[tuple[int, ...], FeatKey]

_CHUNK = 8192


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveConfig:
    lambda_val: float = 1.0
    normalize_by_n: bool = True

    def __post_init__(self):
        if self.lambda_val < 0:
            raise ValueError("lambda_val must be >= 0")

    def to_dict(self) -> dict:
        return {"lambda_val": self.lambda_val, "normalize_by_n": self.normalize_by_n}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ObjectiveConfig":
        return cls(float(d.get("lambda_val", 1.0)), bool(d.get("normalize_by_n", True)))


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    kind: str = "train"

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        t = np.asarray(self.targets, dtype=float)
        if t.ndim == 1:
            t = t[:, None]
        self.targets = t
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets have different sample counts")
        if self.kind not in ("train", "validation", "test"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    def check_normalized(self) -> None:
        if self.n and (self.inputs.min() < 0.0 or self.inputs.max() > 1.0):
            raise ValueError("dataset inputs must lie in [0, 1]")

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.targets[idx], self.kind)

    @staticmethod
    def concat(a: "Dataset", b: "Dataset") -> "Dataset":
        return Dataset(np.vstack([a.inputs, b.inputs]), np.vstack([a.targets, b.targets]), a.kind)


# -- feature bookkeeping ---------------------------------------------------

@dataclass(frozen=True)
class FeatureMap:
    """Ids for the first-layer Bernstein weights and the targets."""

    spec: KanSpec
    offsets: Mapping[Edge, int] = field(hash=False, compare=False)
    n_basis: int = 0

    @classmethod
    def build(cls, spec: KanSpec) -> "FeatureMap":
        offsets, pos = {}, 0
        for e in spec.layer_edges(0):
            offsets[e] = pos
            pos += spec.degrees[e] + 1
        return cls(spec, offsets, pos)

    def target_id(self, k: int) -> int:
        return self.n_basis + k

    @property
    def n_features(self) -> int:
        return self.n_basis + self.spec.n_outputs

    def describe(self, fid: int) -> tuple:
        if fid >= self.n_basis:
            return ("y", fid - self.n_basis)
        for e, off in self.offsets.items():
            if off <= fid < off + self.spec.degrees[e] + 1:
                return (e, fid - off)
        raise KeyError(fid)

    def canonical(self, key: FeatKey) -> str:
        """Readable key: factors ``(edge, bernstein index, power)`` then target powers."""
        parts = []
        for fid in sorted(set(key)):
            pw = key.count(fid)
            d = self.describe(fid)
            if d[0] == "y":
                parts.append(f"y{d[1]}^{pw}")
            else:
                (l, j, k), i = d
                parts.append(f"e{l}:{j}:{k}/b{i}^{pw}")
        return "*".join(parts) or "1"

    def columns(self, data: Dataset) -> np.ndarray:
        """Per-sample feature values, shape ``(n, n_features)``."""
        X, Y = data.inputs, data.targets
        cols = np.empty((X.shape[0], self.n_features))
        for e, off in self.offsets.items():
            _, j, _ = e
            n = self.spec.degrees[e]
            cols[:, off:off + n + 1] = bernstein_matrix(n, X[:, j])
        cols[:, self.n_basis:] = Y
        return cols


# -- joint (bit x feature) polynomial algebra -------------------------------

def _merge(a: FeatKey, b: FeatKey) -> FeatKey:
    if not a:
        return b
    if not b:
        return a
    return tuple(sorted(a + b))


def _bunion(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    if not a:
        return b
    if not b or a == b:
        return a
    return tuple(sorted(set(a).union(b)))


def _jadd(a: dict, b: dict, k: float = 1.0) -> dict:
    out = dict(a)
    for key, c in b.items():
        out[key] = out.get(key, 0.0) + k * c
    return {key: c for key, c in out.items() if c != 0.0}


def _jmul(a: dict, b: dict) -> dict:
    out: dict[JointKey, float] = {}
    right = sorted(b.items())
    for (ba, fa), ca in sorted(a.items()):
        for (bb, fb), cb in right:
            key = (_bunion(ba, bb), _merge(fa, fb))
            out[key] = out.get(key, 0.0) + ca * cb
    return {key: c for key, c in out.items() if c != 0.0}


def _jconst(c: float) -> dict:
    return {((), ()): float(c)}


def _output_templates(layout: VariableLayout, fmap: FeatureMap) -> list[dict]:
    spec = layout.spec
    exps = {e: [{(m, ()): c for m, c in P.items()} for P in Ps] for e, Ps in layout.expansions.items()}
    nodes: list[dict] = [{} for _ in range(spec.widths[1])]
    for e in spec.layer_edges(0):
        _, j, k = e
        off = fmap.offsets[e]
        for i, P in enumerate(exps[e]):
            term = {(m, (off + i,)): c for (m, _), c in P.items()}
            nodes[k] = _jadd(nodes[k], term)
    for l in range(1, spec.depth):
        max_n = max(spec.degrees[e] for e in spec.layer_edges(l))
        pows = []
        for u in nodes:
            v = _jadd(_jconst(1.0), u, -1.0)
            up, vp = [_jconst(1.0)], [_jconst(1.0)]
            for _ in range(max_n):
                up.append(_jmul(up[-1], u))
                vp.append(_jmul(vp[-1], v))
            pows.append((up, vp))
        nxt: list[dict] = [{} for _ in range(spec.widths[l + 1])]
        for e in spec.layer_edges(l):
            _, j, k = e
            n = spec.degrees[e]
            up, vp = pows[j]
            for i, P in enumerate(exps[e]):
                basis = _jmul(vp[n - i], up[i])
                nxt[k] = _jadd(nxt[k], _jmul(basis, P), float(math.comb(n, i)))
        nodes = nxt
    return nodes


@dataclass(frozen=True)
class ObjectiveTemplate:
    """Squared-error template compiled to flat arrays.

    ``coef[r] * moment[feat_index[r]]`` contributes to bit monomial
    ``monomials[mono_index[r]]``.
    """

    fmap: FeatureMap
    monomials: tuple[tuple[int, ...], ...]
    keys: tuple[FeatKey, ...]
    mono_index: np.ndarray = field(compare=False)
    feat_index: np.ndarray = field(compare=False)
    coef: np.ndarray = field(compare=False)

    @property
    def n_moments(self) -> int:
        return len(self.keys)


@lru_cache(maxsize=32)
def objective_template(spec: KanSpec, encoding: EncodingSpec) -> ObjectiveTemplate:
    layout = VariableLayout.build(spec, encoding)
    fmap = FeatureMap.build(spec)
    outs = _output_templates(layout, fmap)
    total: dict = {}
    for k, out in enumerate(outs):
        resid = _jadd({((), (fmap.target_id(k),)): 1.0}, out, -1.0)
        total = _jadd(total, _jmul(resid, resid))
    items = sorted(total.items())
    monos = sorted({m for (m, _), _ in items})
    keys = sorted({f for (_, f), _ in items})
    mpos = {m: i for i, m in enumerate(monos)}
    kpos = {f: i for i, f in enumerate(keys)}
    return ObjectiveTemplate(
        fmap,
        tuple(monos),
        tuple(keys),
        np.array([mpos[m] for (m, _), _ in items], dtype=np.int64),
        np.array([kpos[f] for (_, f), _ in items], dtype=np.int64),
        np.array([c for _, c in items], dtype=float),
    )


# -- moments -----------------------------------------------------------------

@dataclass
class MomentTable:
    """Dataset sums of every feature product the objective needs, keyed canonically."""

    keys: tuple[FeatKey, ...]
    sums: np.ndarray
    count: int

    def as_dict(self) -> dict[FeatKey, float]:
        return dict(zip(self.keys, self.sums.tolist()))

    def __getitem__(self, key: FeatKey) -> float:
        return float(self.sums[self.keys.index(tuple(key))])

    def _check(self, other: "MomentTable") -> None:
        if self.keys != other.keys:
            raise ValueError("moment tables come from different architectures")

    def __add__(self, other: "MomentTable") -> "MomentTable":
        self._check(other)
        return MomentTable(self.keys, self.sums + other.sums, self.count + other.count)

    def __sub__(self, other: "MomentTable") -> "MomentTable":
        self._check(other)
        return MomentTable(self.keys, self.sums - other.sums, self.count - other.count)

    @classmethod
    def zeros(cls, keys) -> "MomentTable":
        return cls(tuple(keys), np.zeros(len(keys)), 0)


def _moment_sums(keys: tuple[FeatKey, ...], cols: np.ndarray) -> np.ndarray:
    # memoized prefix products: each distinct prefix is multiplied out once per chunk
    sums = np.zeros(len(keys))
    n = cols.shape[0]
    for start in range(0, n, _CHUNK):
        block = cols[start:start + _CHUNK]
        memo: dict[FeatKey, np.ndarray] = {(): np.ones(block.shape[0])}
        for r, key in enumerate(keys):
            for p in range(1, len(key) + 1):
                pre = key[:p]
                if pre not in memo:
                    memo[pre] = memo[key[:p - 1]] * block[:, key[p - 1]]
            sums[r] += memo[key].sum()
    return sums


def collapse_moments(spec: KanSpec, layout: VariableLayout, dataset: Dataset) -> MomentTable:
    tpl = objective_template(spec, layout.encoding)
    if dataset.n == 0:
        return MomentTable.zeros(tpl.keys)
    dataset.check_normalized()
    if dataset.inputs.shape[1] != spec.n_inputs or dataset.targets.shape[1] != spec.n_outputs:
        raise ValueError("dataset shape does not match network")
    cols = tpl.fmap.columns(dataset)
    return MomentTable(tpl.keys, _moment_sums(tpl.keys, cols), dataset.n)


def polynomial_from_moments(tpl: ObjectiveTemplate, sums: np.ndarray, scale: float = 1.0) -> BinaryPolynomial:
    vals = np.bincount(tpl.mono_index, weights=tpl.coef * sums[tpl.feat_index],
                       minlength=len(tpl.monomials))
    vals = vals * scale
    return BinaryPolynomial._from_clean(
        {m: float(v) for m, v in zip(tpl.monomials, vals) if v != 0.0}
    )


def objective_from_moments(spec: KanSpec, encoding: EncodingSpec, train: MomentTable,
                           val: MomentTable | None, cfg: ObjectiveConfig) -> BinaryPolynomial:
    if train.count <= 0:
        raise EmptyDatasetError("training objective has no samples")
    tpl = objective_template(spec, encoding)
    sums = train.sums * ((1.0 / train.count) if cfg.normalize_by_n else 1.0)
    if val is not None and val.count > 0:
        w = cfg.lambda_val / val.count if cfg.normalize_by_n else cfg.lambda_val
        sums = sums + w * val.sums
    elif val is not None and val.count < 0:
        raise EmptyDatasetError("validation count is negative")
    return polynomial_from_moments(tpl, sums)


def assemble(spec: KanSpec, layout: VariableLayout, train: Dataset, val: Dataset | None = None,
             cfg: ObjectiveConfig = ObjectiveConfig()) -> BinaryPolynomial:
    if train.n == 0:
        raise EmptyDatasetError("training set is empty")
    if val is not None and val.n == 0:
        raise EmptyDatasetError("validation set is empty")
    mt = collapse_moments(spec, layout, train)
    mv = collapse_moments(spec, layout, val) if val is not None else None
    return objective_from_moments(spec, layout.encoding, mt, mv, cfg)


# -- reference path ----------------------------------------------------------

def sample_objective(spec: KanSpec, layout: VariableLayout, sample, target) -> BinaryPolynomial:
    outs = symbolic_output(spec, layout, sample)
    y = np.atleast_1d(np.asarray(target, dtype=float))
    total = BinaryPolynomial()
    for k, out in enumerate(outs):
        r = BinaryPolynomial.constant(float(y[k])) - out
        total = total + r * r
    return total


def assemble_naive(spec: KanSpec, layout: VariableLayout, train: Dataset, val: Dataset | None = None,
                   cfg: ObjectiveConfig = ObjectiveConfig()) -> BinaryPolynomial:
    """Per-sample symbolic expansion summed directly; slow, used as an oracle."""
    if train.n == 0:
        raise EmptyDatasetError("training set is empty")
    parts = [sample_objective(spec, layout, x, y) for x, y in zip(train.inputs, train.targets)]
    obj = sum_polynomials(parts)
    if cfg.normalize_by_n:
        obj = obj.scale(1.0 / train.n)
    if val is not None:
        if val.n == 0:
            raise EmptyDatasetError("validation set is empty")
        vparts = sum_polynomials(sample_objective(spec, layout, x, y)
                                 for x, y in zip(val.inputs, val.targets))
        w = cfg.lambda_val / val.n if cfg.normalize_by_n else cfg.lambda_val
        obj = obj + vparts.scale(w)
    return obj

"""Persisted objective state and rapid retraining.

A state holds the *unnormalized* moment sums and sample counts for the
training (and optionally validation) partition.  New batches are folded in by
adding their moments, removed by subtracting them; already-seen samples are
never touched again.  The 1/n and lambda/n_v factors are applied only when an
objective is materialized for solving.
"""
from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .binpoly import BinaryPolynomial
from .encoding import EncodingSpec
from .network import DecodedModel, KanSpec, VariableLayout
from .objective import (
    Dataset,
    EmptyDatasetError,
    MomentTable,
    ObjectiveConfig,
    collapse_moments,
    objective_from_moments,
    objective_template,
)
from .reduction import DEFAULT_W_FACTOR, QuboProblem, qubit_count, reduce
from .solver import AnnealSchedule, SolveResult, decode_solution, polish, solve

STATE_VERSION = 1
MAGIC = b"QKST"
_DIGEST_BYTES = 8


class StateError(Exception):
    pass


class StateVersionError(StateError):
    pass


class StateDigestError(StateError):
    pass


class StateIOError(StateError):
    pass


class SchemaMismatchError(ValueError):
    pass


class OutOfRangeError(ValueError):
    pass


class CountUnderflowError(ValueError):
    pass


@dataclass(frozen=True)
class Normalizer:
    low: tuple[float, ...]
    high: tuple[float, ...]

    @classmethod
    def fit(cls, *arrays: np.ndarray) -> "Normalizer":
        X = np.vstack([np.atleast_2d(a) for a in arrays if len(a)])
        return cls(tuple(X.min(axis=0).tolist()), tuple(X.max(axis=0).tolist()))

    def transform(self, X: np.ndarray, strict: bool = True) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo, hi = np.asarray(self.low), np.asarray(self.high)
        if X.shape[1] != lo.size:
            raise SchemaMismatchError(f"expected {lo.size} input features, got {X.shape[1]}")
        span = np.where(hi > lo, hi - lo, 1.0)
        Z = (X - lo) / span
        if strict and Z.size and (Z.min() < 0.0 or Z.max() > 1.0):
            raise OutOfRangeError("inputs fall outside the stored normalization bounds")
        return np.clip(Z, 0.0, 1.0)


@dataclass(frozen=True)
class ObjectiveState:
    spec: KanSpec
    encoding: EncodingSpec
    config: ObjectiveConfig
    bounds: Normalizer
    train: MomentTable = field(compare=False)
    val: MomentTable | None = field(default=None, compare=False)
    version: int = STATE_VERSION

    @property
    def n_train(self) -> int:
        return self.train.count

    @property
    def n_val(self) -> int:
        return self.val.count if self.val is not None else 0

    @property
    def n_moments(self) -> int:
        return len(self.train.keys)

    def __eq__(self, other):
        if not isinstance(other, ObjectiveState):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return a.keys == b.keys and a.count == b.count and np.array_equal(a.sums, b.sums)

        return (self.spec == other.spec and self.encoding == other.encoding
                and self.config == other.config and self.bounds == other.bounds
                and self.version == other.version
                and same(self.train, other.train) and same(self.val, other.val))

    __hash__ = None

    def layout(self) -> VariableLayout:
        return VariableLayout.build(self.spec, self.encoding)

    def objective(self) -> BinaryPolynomial:
        return objective_from_moments(self.spec, self.encoding, self.train, self.val, self.config)

    @property
    def digest(self) -> str:
        return hashlib.blake2b(_pack_body(self), digest_size=_DIGEST_BYTES).hexdigest()


def build_state(spec: KanSpec, encoding: EncodingSpec, train: Dataset, val: Dataset | None = None,
                config: ObjectiveConfig = ObjectiveConfig(), bounds: Normalizer | None = None) -> ObjectiveState:
    """Initial forward pass: raw datasets in, unnormalized moments out."""
    if train.n == 0:
        raise EmptyDatasetError("training set is empty")
    if bounds is None:
        bounds = Normalizer.fit(train.inputs, *( [val.inputs] if val is not None else []))
    layout = VariableLayout.build(spec, encoding)
    mt = collapse_moments(spec, layout, _normalized(train, bounds))
    mv = collapse_moments(spec, layout, _normalized(val, bounds)) if val is not None else None
    return ObjectiveState(spec, encoding, config, bounds, mt, mv)


def _normalized(ds: Dataset, bounds: Normalizer) -> Dataset:
    if ds.n == 0:
        return ds
    return Dataset(bounds.transform(ds.inputs), ds.targets, ds.kind)


def _batch_moments(state: ObjectiveState, batch: Dataset) -> MomentTable:
    if batch.inputs.shape[1] != state.spec.n_inputs or batch.targets.shape[1] != state.spec.n_outputs:
        raise SchemaMismatchError(
            f"batch has {batch.inputs.shape[1]} inputs / {batch.targets.shape[1]} outputs; "
            f"network expects {state.spec.n_inputs} / {state.spec.n_outputs}"
        )
    return collapse_moments(state.spec, state.layout(), _normalized(batch, state.bounds))


def add_samples(state: ObjectiveState, batch: Dataset) -> ObjectiveState:
    """Fold a raw batch into the training (or, for ``kind='validation'``, validation) sums."""
    if batch.n == 0:
        return state
    m = _batch_moments(state, batch)
    if batch.kind == "validation":
        base = state.val if state.val is not None else MomentTable.zeros(m.keys)
        return replace(state, val=base + m)
    return replace(state, train=state.train + m)


def remove_samples(state: ObjectiveState, batch: Dataset) -> ObjectiveState:
    """Subtract a batch's moments.

    Only counts are checked: removing samples that were never added leaves
    moments that no longer correspond to any dataset.
    """
    if batch.n == 0:
        return state
    m = _batch_moments(state, batch)
    if batch.kind == "validation":
        if state.val is None or state.val.count < m.count:
            raise CountUnderflowError("removing more validation samples than were added")
        return replace(state, val=state.val - m)
    if state.train.count < m.count:
        raise CountUnderflowError("removing more training samples than were added")
    return replace(state, train=state.train - m)


# -- solving -----------------------------------------------------------------

@dataclass
class TrainReport:
    result: SolveResult
    qubo: QuboProblem
    hubo_terms: int
    hubo_degree: int
    qubits: int
    timings: dict[str, float] = field(default_factory=dict)


def solve_objective(h: BinaryPolynomial, layout: VariableLayout, bounds: Normalizer | None = None,
                    solver: str = "sa", schedule: AnnealSchedule | None = None,
                    w_factor: float = DEFAULT_W_FACTOR, polish_reads: bool = False,
                    timings: dict | None = None) -> tuple[DecodedModel, TrainReport]:
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    h = h.compress()
    q = reduce(h, w_factor, first_aux=layout.total_bits, variables=layout.bit_ids())
    t1 = time.perf_counter()
    res = solve(q, solver, {"schedule": schedule})
    if polish_reads and res.samples is not None:
        res = polish(res, h, q)
    t2 = time.perf_counter()
    timings["reduce"] = t1 - t0
    timings["solve"] = t2 - t1
    low = np.asarray(bounds.low) if bounds else None
    high = np.asarray(bounds.high) if bounds else None
    model = decode_solution(res, layout, q, low, high)
    report = TrainReport(res, q, len(h), h.max_degree(), qubit_count(layout, q.registry), timings)
    return model, report


def retrain(state: ObjectiveState, solver: str = "sa", schedule: AnnealSchedule | None = None,
            w_factor: float = DEFAULT_W_FACTOR, polish_reads: bool = False) -> tuple[DecodedModel, TrainReport]:
    """Normalize -> assemble -> reduce -> solve -> decode."""
    if state.n_train < 1:
        raise EmptyDatasetError("state has no training samples")
    t0 = time.perf_counter()
    h = state.objective()
    timings = {"assemble": time.perf_counter() - t0}
    return solve_objective(h, state.layout(), state.bounds, solver, schedule, w_factor,
                           polish_reads, timings)


# -- persistence -------------------------------------------------------------

def _header(state: ObjectiveState) -> bytes:
    tpl = objective_template(state.spec, state.encoding)
    head = {
        "version": state.version,
        "spec": state.spec.to_dict(),
        "encoding": state.encoding.to_dict(),
        "objective": state.config.to_dict(),
        "bounds": {"low": [float(x).hex() for x in state.bounds.low],
                   "high": [float(x).hex() for x in state.bounds.high]},
        "keys": [list(k) for k in state.train.keys],
        "moment_names": [tpl.fmap.canonical(k) for k in state.train.keys],
        "has_val": state.val is not None,
    }
    return json.dumps(head, sort_keys=True, separators=(",", ":")).encode()


def _pack_body(state: ObjectiveState) -> bytes:
    head = _header(state)
    parts = [MAGIC, struct.pack("<I", len(head)), head,
             struct.pack("<qq", state.train.count, state.val.count if state.val is not None else -1),
             np.asarray(state.train.sums, dtype="<f8").tobytes()]
    if state.val is not None:
        parts.append(np.asarray(state.val.sums, dtype="<f8").tobytes())
    return b"".join(parts)


def save_state(state: ObjectiveState, path) -> None:
    body = _pack_body(state)
    digest = hashlib.blake2b(body, digest_size=_DIGEST_BYTES).digest()
    try:
        Path(path).write_bytes(body + digest)
    except OSError as exc:
        raise StateIOError(f"cannot write state file {path}: {exc}") from exc


def load_state(path) -> ObjectiveState:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise StateIOError(f"cannot read state file {path}: {exc}") from exc
    if not raw.startswith(MAGIC):
        raise StateIOError(f"{path} is not an objective state file")
    if len(raw) < len(MAGIC) + 4 + _DIGEST_BYTES:
        raise StateDigestError("state file truncated")
    body, digest = raw[:-_DIGEST_BYTES], raw[-_DIGEST_BYTES:]
    if hashlib.blake2b(body, digest_size=_DIGEST_BYTES).digest() != digest:
        raise StateDigestError("state file digest mismatch (corrupt or truncated)")
    (hlen,) = struct.unpack_from("<I", body, 4)
    head = json.loads(body[8:8 + hlen])
    if head["version"] != STATE_VERSION:
        raise StateVersionError(f"state version {head['version']} not supported (expected {STATE_VERSION})")
    pos = 8 + hlen
    n_t, n_v = struct.unpack_from("<qq", body, pos)
    pos += 16
    keys = tuple(tuple(k) for k in head["keys"])
    k = len(keys)
    train = np.frombuffer(body, dtype="<f8", count=k, offset=pos).astype(float)
    pos += 8 * k
    val = None
    if head["has_val"]:
        val = MomentTable(keys, np.frombuffer(body, dtype="<f8", count=k, offset=pos).astype(float), n_v)
    bounds = Normalizer(tuple(float.fromhex(x) for x in head["bounds"]["low"]),
                        tuple(float.fromhex(x) for x in head["bounds"]["high"]))
    return ObjectiveState(
        KanSpec.from_dict(head["spec"]),
        EncodingSpec.from_dict(head["encoding"]),
        ObjectiveConfig.from_dict(head["objective"]),
        bounds,
        MomentTable(keys, train, n_t),
        val,
        head["version"],
    )

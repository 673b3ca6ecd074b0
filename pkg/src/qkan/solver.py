"""QUBO/HUBO solvers: exhaustive search and single-flip simulated annealing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from numba import njit

from .binpoly import BinaryPolynomial
from .network import DecodedModel, VariableLayout, decode_model
from .reduction import QuboProblem

MAX_BRUTE_FORCE_VARS = 24


class TooManyVariablesError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class AnnealSchedule:
    beta_start: float | None = None
    beta_end: float | None = None
    sweeps: int = 1000
    reads: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.reads < 1:
            raise ValueError("sweeps and reads must be positive")
        if self.beta_start is not None and self.beta_start <= 0:
            raise ValueError("beta_start must be positive")
        if (self.beta_start is not None and self.beta_end is not None
                and self.beta_start > self.beta_end):
            raise ValueError("beta_start must not exceed beta_end")

    def to_dict(self) -> dict:
        return {"beta_start": self.beta_start, "beta_end": self.beta_end,
                "sweeps": self.sweeps, "reads": self.reads, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnnealSchedule":
        return cls(d.get("beta_start"), d.get("beta_end"), int(d.get("sweeps", 1000)),
                   int(d.get("reads", 100)), int(d.get("seed", 0)))


@dataclass
class SolveResult:
    best_assignment: dict[int, int]
    best_energy: float
    energies_per_read: list[float] = field(default_factory=list)
    aux_violations: int = 0
    # per-read final states, rows aligned with ``order``; kept for post-processing
    samples: np.ndarray | None = field(default=None, repr=False)
    order: list[int] | None = field(default=None, repr=False)


def _as_qubo(problem) -> QuboProblem:
    if isinstance(problem, QuboProblem):
        return problem
    if problem.max_degree() > 2:
        raise ValueError("annealer needs a quadratic problem; call reduce() first")
    lin, quad, off = {}, {}, 0.0
    for m, c in problem.items():
        if len(m) == 0:
            off = c
        elif len(m) == 1:
            lin[m[0]] = c
        else:
            quad[m] = c
    return QuboProblem(lin, quad, off)


def _energy_of(problem, assignment) -> float:
    if isinstance(problem, QuboProblem):
        return problem.energy(assignment)
    return problem.evaluate(assignment)


def brute_force(problem: BinaryPolynomial | QuboProblem, chunk: int = 1 << 16) -> SolveResult:
    """Exhaustive argmin.

    Variable ``order[k]`` is bit ``k`` of the enumeration counter, so the first
    minimum found is the one with the smallest integer value.
    """
    order = problem.variables()
    n = len(order)
    if n > MAX_BRUTE_FORCE_VARS:
        raise TooManyVariablesError(f"{n} variables exceeds the {MAX_BRUTE_FORCE_VARS}-variable limit")
    total = 1 << n
    shifts = np.arange(n, dtype=np.int64)
    best_e, best_idx = math.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        X = ((idx[:, None] >> shifts) & 1).astype(np.int8)
        if isinstance(problem, QuboProblem):
            E = problem.energies(order, X)
        else:
            E = problem.evaluate_many(order, X)
        k = int(np.argmin(E))
        if E[k] < best_e:
            best_e, best_idx = float(E[k]), int(idx[k])
    assignment = {v: (best_idx >> k) & 1 for k, v in enumerate(order)}
    viol = problem.aux_violations(assignment) if isinstance(problem, QuboProblem) else 0
    return SolveResult(assignment, _energy_of(problem, assignment), [_energy_of(problem, assignment)], viol)


@njit(cache=True)
def _anneal_kernel(h, indptr, indices, data, betas, reads, seed, debug):
    n = h.shape[0]
    states = np.zeros((reads, n), dtype=np.int8)
    energies = np.empty(reads)
    mismatch = 0.0
    for r in range(reads):
        np.random.seed(seed + r)
        x = np.zeros(n, dtype=np.int8)
        if r > 0:
            for i in range(n):
                x[i] = np.random.randint(0, 2)
        f = h.copy()
        for i in range(n):
            if x[i]:
                for p in range(indptr[i], indptr[i + 1]):
                    f[indices[p]] += data[p]
        e = 0.0
        for i in range(n):
            if x[i]:
                e += 0.5 * (h[i] + f[i])
        best = e
        best_x = x.copy()
        for b in range(betas.shape[0]):
            beta = betas[b]
            for i in range(n):
                d = f[i] if x[i] == 0 else -f[i]
                bd = beta * d
                # exp(-30) ~ 1e-13: skip the draw for flips that are effectively forbidden
                if d <= 0.0 or (bd < 30.0 and np.random.random() < math.exp(-bd)):
                    x[i] = 1 - x[i]
                    e += d
                    s = 1.0 if x[i] else -1.0
                    for p in range(indptr[i], indptr[i + 1]):
                        f[indices[p]] += s * data[p]
            if debug:
                full = 0.0
                for i in range(n):
                    if x[i]:
                        full += h[i]
                        for p in range(indptr[i], indptr[i + 1]):
                            if indices[p] > i and x[indices[p]]:
                                full += data[p]
                err = abs(full - e) / (1.0 + abs(full))
                if err > mismatch:
                    mismatch = err
            if e < best:
                best = e
                best_x[:] = x
        states[r] = best_x
        energies[r] = best
    return states, energies, mismatch


def _symmetric_csr(n, rows, cols, vals):
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    v = np.concatenate([vals, vals])
    order = np.lexsort((c, r))
    r, c, v = r[order], c[order], v[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    return np.cumsum(indptr), c.astype(np.int64), v.astype(float)


def default_betas(q: QuboProblem) -> tuple[float, float]:
    """Hot/cold inverse temperatures from single-flip energy scales.

    The largest possible flip cost is bounded by ``|h_i| + sum_j |J_ij|``; the
    smallest nonzero one by the smallest nonzero coefficient.
    """
    _, h, rows, cols, vals = q.arrays()
    row_abs = np.abs(h).copy()
    np.add.at(row_abs, rows, np.abs(vals))
    np.add.at(row_abs, cols, np.abs(vals))
    mags = np.concatenate([np.abs(h), np.abs(vals)])
    mags = mags[mags > 0]
    if mags.size == 0:
        return 1.0, 10.0
    return 1.0 / float(row_abs.max()), 10.0 / float(mags.min())


def beta_schedule(beta_start: float, beta_end: float, sweeps: int) -> np.ndarray:
    if sweeps == 1:
        return np.array([beta_end])
    return np.geomspace(beta_start, beta_end, sweeps)


def anneal(problem: QuboProblem | BinaryPolynomial, schedule: AnnealSchedule | None = None,
           debug: bool = False) -> SolveResult:
    """Metropolis single-flip annealing, best of ``schedule.reads`` restarts.

    Read 0 starts from all zeros; later reads start from uniform random bits
    seeded with ``seed + read``.
    """
    s = schedule or AnnealSchedule()
    q = _as_qubo(problem)
    order, h, rows, cols, vals = q.arrays()
    n = len(order)
    if n == 0:
        return SolveResult({}, q.offset, [q.offset] * s.reads, 0)
    b0, b1 = default_betas(q)
    beta_start = s.beta_start if s.beta_start is not None else b0
    beta_end = s.beta_end if s.beta_end is not None else max(b1, beta_start)
    betas = beta_schedule(beta_start, beta_end, s.sweeps)
    indptr, indices, data = _symmetric_csr(n, rows, cols, vals)
    states, energies, mismatch = _anneal_kernel(h, indptr, indices, data, betas, s.reads,
                                                int(s.seed), debug)
    if debug and mismatch > 1e-9:
        raise SolverError(f"incremental energy drifted from full evaluation (rel {mismatch:.3g})")
    energies = energies + q.offset
    k = int(np.argmin(energies))  # first index wins ties: lowest read
    assignment = {v: int(states[k, i]) for i, v in enumerate(order)}
    return SolveResult(assignment, q.energy(assignment), energies.tolist(),
                       q.aux_violations(assignment), states, list(order))


def _hubo_arrays(h: BinaryPolynomial, order: list[int]):
    pos = {v: k for k, v in enumerate(order)}
    items = [(m, c) for m, c in h.sorted_items() if m]
    width = max((len(m) for m, _ in items), default=1)
    T = np.full((len(items), width), -1, dtype=np.int64)
    C = np.array([c for _, c in items], dtype=float)
    holders: list[list[int]] = [[] for _ in order]
    for k, (m, _) in enumerate(items):
        for s, v in enumerate(m):
            T[k, s] = pos[v]
            holders[pos[v]].append(k)
    ptr = np.zeros(len(order) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(x) for x in holders])
    idx = np.array([k for x in holders for k in x], dtype=np.int64)
    return T, C, ptr, idx


@njit(cache=True)
def _descend(T, C, ptr, idx, x, tol):
    n = x.shape[0]
    improved = True
    while improved:
        improved = False
        for i in range(n):
            g = 0.0
            for p in range(ptr[i], ptr[i + 1]):
                k = idx[p]
                prod = C[k]
                for s in range(T.shape[1]):
                    v = T[k, s]
                    if v < 0:
                        break
                    if v != i and x[v] == 0:
                        prod = 0.0
                        break
                g += prod
            d = g if x[i] == 0 else -g
            if d < -tol:
                x[i] = 1 - x[i]
                improved = True
    return x


def polish(result: SolveResult, hubo: BinaryPolynomial, qubo: QuboProblem) -> SolveResult:
    """Repair aux bits and descend on the original objective, read by read.

    Each read's non-aux bits are improved by single-flip steepest descent on
    ``hubo`` (no penalties involved), aux bits are then set to the products
    they stand for, and the best read is returned.
    """
    if result.samples is None or result.order is None:
        raise ValueError("polish needs per-read samples; use anneal()")
    hvars = sorted(set(hubo.variables()) | set(qubo.declared_vars) - {e.aux for e in qubo.registry})
    col = {v: i for i, v in enumerate(result.order)}
    T, C, ptr, idx = _hubo_arrays(hubo, hvars)
    tol = 1e-12 * max(1.0, float(np.abs(C).max()) if C.size else 1.0)
    sel = np.array([col[v] for v in hvars], dtype=np.int64)
    energies = []
    best = None
    for r in range(result.samples.shape[0]):
        x = _descend(T, C, ptr, idx, result.samples[r, sel].astype(np.int8).copy(), tol)
        a = {v: int(b) for v, b in zip(hvars, x)}
        e = hubo.evaluate(a)
        energies.append(e)
        if best is None or e < best[0]:
            best = (e, a)
    full = qubo.extend_consistent({v: best[1].get(v, 0) for v in result.order})
    return SolveResult(full, qubo.energy(full), energies, qubo.aux_violations(full),
                       result.samples, result.order)


def decode_solution(result: SolveResult, layout: VariableLayout, problem: QuboProblem | None = None,
                    bounds_low=None, bounds_high=None) -> DecodedModel:
    if problem is not None:
        result.aux_violations = problem.aux_violations(result.best_assignment)
    return decode_model(result.best_assignment, layout, bounds_low, bounds_high)


def _sa(problem, params: Mapping | None = None) -> SolveResult:
    sched = params.get("schedule") if params else None
    return anneal(problem, sched)


def _exact(problem, params: Mapping | None = None) -> SolveResult:
    return brute_force(problem)


SOLVERS: dict[str, Callable[..., SolveResult]] = {"sa": _sa, "exact": _exact}


def register_solver(name: str, fn: Callable[..., SolveResult]) -> None:
    """Make ``fn(problem, params) -> SolveResult`` available under ``name``."""
    SOLVERS[name] = fn


def solve(problem, solver: str = "sa", params: Mapping | None = None) -> SolveResult:
    try:
        fn = SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}") from None
    return fn(problem, params or {})

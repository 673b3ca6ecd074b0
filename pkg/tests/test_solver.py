import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkan.binpoly import BinaryPolynomial
from qkan.encoding import EncodingSpec
from qkan.network import KanSpec, VariableLayout
from qkan.objective import Dataset, assemble
from qkan.reduction import QuboProblem, reduce
from qkan.solver import (
    SOLVERS,
    AnnealSchedule,
    SolveResult,
    TooManyVariablesError,
    anneal,
    beta_schedule,
    brute_force,
    decode_solution,
    default_betas,
    polish,
    register_solver,
    solve,
)

from conftest import all_assignments

ONE_BIT = EncodingSpec(0, 0, False)


def random_qubo(seed, n):
    rng = np.random.default_rng(seed)
    lin = {i: float(rng.normal()) for i in range(n)}
    quad = {(i, j): float(rng.normal()) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5}
    return QuboProblem(lin, quad, float(rng.normal()))


def two_point_fit():
    spec = KanSpec.uniform((1, 1), 1)
    layout = VariableLayout.build(spec, ONE_BIT)
    h = assemble(spec, layout, Dataset([[0.0], [1.0]], [0.0, 1.0]))
    return layout, h


def test_brute_force_linear():
    r = brute_force(QuboProblem({1: 1.0, 2: -1.0}, {}))
    assert r.best_assignment == {1: 0, 2: 1}
    assert r.best_energy == -1.0


def test_brute_force_constant_picks_all_zeros():
    q = QuboProblem({}, {}, 4.0, declared_vars=(0, 1, 2))
    r = brute_force(q)
    assert r.best_assignment == {0: 0, 1: 0, 2: 0} and r.best_energy == 4.0
    assert brute_force(BinaryPolynomial.constant(2.5)).best_energy == 2.5


def test_brute_force_ties_break_to_lowest_integer():
    # q0 + q1 - 2 q0 q1 has minima at 00 and 11
    r = brute_force(BinaryPolynomial({(0,): 1.0, (1,): 1.0, (0, 1): -2.0}))
    assert r.best_assignment == {0: 0, 1: 0}


def test_two_point_fit_is_exact():
    layout, h = two_point_fit()
    r = brute_force(h)
    m = decode_solution(r, layout)
    assert list(m.control_points[(0, 0, 0)]) == [0.0, 1.0]
    assert r.best_energy == pytest.approx(0.0, abs=1e-15)


def test_brute_force_limit():
    q = QuboProblem({i: 1.0 for i in range(25)}, {})
    with pytest.raises(TooManyVariablesError):
        brute_force(q)


@given(st.integers(0, 1000), st.integers(1, 10))
def test_brute_force_matches_enumeration(seed, n):
    q = random_qubo(seed, n)
    best = min(q.energy(a) for a in all_assignments(range(n)))
    assert brute_force(q).best_energy == pytest.approx(best, abs=1e-12)


@given(st.integers(0, 1000), st.integers(1, 16))
def test_anneal_never_worse_than_all_zeros(seed, n):
    q = random_qubo(seed, n)
    r = anneal(q, AnnealSchedule(sweeps=50, reads=3, seed=seed))
    assert r.best_energy <= q.energy({i: 0 for i in range(n)}) + 1e-12
    assert r.best_energy == pytest.approx(min(r.energies_per_read))


def test_anneal_is_reproducible():
    q = random_qubo(3, 18)
    s = AnnealSchedule(sweeps=200, reads=10, seed=42)
    a, b = anneal(q, s), anneal(q, s)
    assert a.best_assignment == b.best_assignment
    assert a.energies_per_read == b.energies_per_read
    assert np.array_equal(a.samples, b.samples)


def test_debug_bookkeeping_matches_full_energy():
    for seed in range(5):
        anneal(random_qubo(seed, 20), AnnealSchedule(sweeps=100, reads=4, seed=seed), debug=True)


def test_anneal_finds_optimum_on_small_problems():
    for seed in range(10):
        q = random_qubo(100 + seed, 14)
        assert anneal(q, AnnealSchedule(reads=20, seed=seed)).best_energy == pytest.approx(
            brute_force(q).best_energy, abs=1e-9)


def test_anneal_rejects_higher_order():
    with pytest.raises(ValueError):
        anneal(BinaryPolynomial({(1, 2, 3): 1.0}))


def test_anneal_accepts_quadratic_polynomial():
    h = BinaryPolynomial({(1,): 1.0, (2,): -2.0, (1, 2): -1.0})
    assert anneal(h, AnnealSchedule(sweeps=20, reads=2)).best_energy == -2.0


def test_schedule_validation_and_betas():
    with pytest.raises(ValueError):
        AnnealSchedule(sweeps=0)
    with pytest.raises(ValueError):
        AnnealSchedule(beta_start=2.0, beta_end=1.0)
    q = QuboProblem({0: 1.0, 1: -4.0}, {(0, 1): 0.5})
    b0, b1 = default_betas(q)
    assert b0 == pytest.approx(1 / 4.5) and b1 == pytest.approx(10 / 0.5)
    sched = beta_schedule(0.1, 10.0, 5)
    assert sched[0] == pytest.approx(0.1) and sched[-1] == pytest.approx(10.0)
    assert np.all(np.diff(np.log(sched)) == pytest.approx(np.log(10.0) / 2))


def test_decode_solution_counts_violations():
    h = BinaryPolynomial({(0, 1, 2): -1.0, (0,): 0.1})
    q = reduce(h, variables=(0, 1, 2))
    layout = VariableLayout.build(KanSpec.uniform((1, 1), 2), ONE_BIT)  # ids 0..2
    good = q.extend_consistent({0: 1, 1: 1, 2: 1})
    r = SolveResult(good, q.energy(good))
    decode_solution(r, layout, q)
    assert r.aux_violations == 0
    bad = dict(good)
    bad[q.registry[0].aux] = 0
    r = SolveResult(bad, q.energy(bad))
    decode_solution(r, layout, q)
    assert r.aux_violations == 1


def test_polish_returns_consistent_assignment():
    spec = KanSpec.uniform((2, 1, 1), 1)
    layout = VariableLayout.build(spec, ONE_BIT)
    rng = np.random.default_rng(0)
    ds = Dataset(rng.uniform(0, 1, (30, 2)), rng.uniform(0, 1, 30))
    h = assemble(spec, layout, ds).compress()
    q = reduce(h, first_aux=layout.total_bits, variables=layout.bit_ids())
    raw = anneal(q, AnnealSchedule(sweeps=20, reads=5, seed=1))
    p = polish(raw, h, q)
    assert p.aux_violations == 0
    bits = {v: p.best_assignment[v] for v in layout.bit_ids()}
    assert p.best_energy == pytest.approx(h.evaluate(bits))
    assert p.best_energy == pytest.approx(min(p.energies_per_read))
    assert p.best_energy >= brute_force(h).best_energy - 1e-12


def test_solver_registry():
    calls = []

    def fake(problem, params):
        calls.append(params)
        return brute_force(problem)

    register_solver("fake", fake)
    try:
        r = solve(QuboProblem({0: -1.0}, {}), "fake", {"k": 1})
        assert r.best_energy == -1.0 and calls == [{"k": 1}]
    finally:
        SOLVERS.pop("fake")
    with pytest.raises(ValueError):
        solve(QuboProblem({0: -1.0}, {}), "nope")

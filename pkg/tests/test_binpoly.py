import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkan.binpoly import (
    BinaryPolynomial,
    MissingVariableError,
    add,
    compress,
    evaluate,
    max_degree,
    multiply,
    power,
    sum_polynomials,
)

from conftest import all_assignments

q = BinaryPolynomial.var
one = BinaryPolynomial.constant(1.0)

monomials = st.lists(st.integers(0, 5), max_size=4).map(lambda v: tuple(sorted(set(v))))
coefs = st.floats(-10, 10, allow_nan=False).filter(lambda c: c != 0.0)
polys = st.dictionaries(monomials, coefs, max_size=6).map(BinaryPolynomial)


def brute(p):
    """Truth table over variables 0..5."""
    return [p.evaluate(a) for a in all_assignments(range(6))]


def test_add_cancellation_to_constant():
    assert add(q(1) + 2.0, -q(1)) == BinaryPolynomial.constant(2.0)


def test_add_identity_and_like_terms():
    p = q(1) * q(2) + 3 * q(4)
    assert add(p, BinaryPolynomial()) == p
    assert add(q(1) * q(2), q(1) * q(2)) == BinaryPolynomial({(1, 2): 2.0})


def test_multiply_idempotent():
    assert multiply(q(1) + q(2), q(1)) == BinaryPolynomial({(1,): 1.0, (1, 2): 1.0})
    assert multiply(one - q(1), one - q(1)) == one - q(1)


def test_square_of_two_pair_terms_against_truth_table():
    # (2 qa qb + 4 qa qc)^2 with a,b,c = 0,1,2
    p = BinaryPolynomial({(0, 1): 2.0, (0, 2): 4.0})
    sq = p * p
    assert sq == BinaryPolynomial({(0, 1): 4.0, (0, 1, 2): 16.0, (0, 2): 16.0})
    for a in all_assignments(range(3)):
        assert sq.evaluate(a) == p.evaluate(a) ** 2


def test_power():
    assert power(q(1), 3) == q(1)
    assert power(q(1) + q(7), 0) == one
    sq = power(q(1) + q(2), 2)
    assert sq == BinaryPolynomial({(1,): 1.0, (2,): 1.0, (1, 2): 2.0})
    for a in all_assignments((1, 2)):
        assert sq.evaluate(a) == (a[1] + a[2]) ** 2
    with pytest.raises(ValueError):
        power(q(1), -1)


def test_evaluate_examples():
    p = BinaryPolynomial({(1, 2): 3.0, (): 1.0})
    assert evaluate(p, {1: 1, 2: 1}) == 4.0
    assert evaluate(p, {1: 0, 2: 0}) == p.constant_term


def test_evaluate_missing_variable():
    with pytest.raises(MissingVariableError) as ei:
        evaluate(q(1) * q(3), {1: 1})
    assert ei.value.missing == [3]


def test_evaluate_rejects_non_binary():
    with pytest.raises(ValueError):
        evaluate(q(1), {1: 2})


def test_max_degree():
    assert max_degree(q(1) * q(2) * q(3) + q(1)) == 3
    assert max_degree(BinaryPolynomial.constant(5.0)) == 0


def test_repeated_variables_collapse_on_construction():
    assert BinaryPolynomial({(3, 1, 3): 2.0}) == BinaryPolynomial({(1, 3): 2.0})


def test_compress_threshold():
    p = BinaryPolynomial({(1,): 1e-13, (2,): 1.0})
    assert compress(p) == q(2)
    assert len(p) == 2  # algebra itself never prunes non-zero values


def test_json_roundtrip_is_canonical():
    p = BinaryPolynomial({(2, 1): 0.1, (): -3.0, (5,): 1e-300})
    s = p.to_json()
    assert BinaryPolynomial.from_json(s) == p
    assert s == BinaryPolynomial.from_json(s).to_json()
    assert [t["vars"] for t in json.loads(s)["terms"]] == [[], [1, 2], [5]]


def test_sum_polynomials_matches_fold():
    ps = [q(i) * (i + 1.0) for i in range(5)]
    total = BinaryPolynomial()
    for p in ps:
        total = total + p
    assert sum_polynomials(ps) == total


@given(polys, polys)
def test_add_mul_are_homomorphisms(a, b):
    for x in all_assignments(range(6)):
        assert (a + b).evaluate(x) == pytest.approx(a.evaluate(x) + b.evaluate(x), rel=1e-12, abs=1e-12)
        assert (a * b).evaluate(x) == pytest.approx(a.evaluate(x) * b.evaluate(x), rel=1e-12, abs=1e-9)


@given(polys, st.integers(1, 4))
def test_power_matches_repeated_product(p, k):
    ref = one
    for _ in range(k):
        ref = ref * p
    assert power(p, k).allclose(ref, rtol=1e-12, atol=1e-9)


@given(polys)
def test_monomials_stay_multilinear(p):
    for m, _ in (p * p).items():
        assert list(m) == sorted(set(m))


@given(polys, polys)
def test_equal_functions_have_equal_terms(a, b):
    # the multilinear representation is unique: equal truth tables imply equal coefficients
    c = a * b + a
    d = b * a + a * one
    assert brute(c) == pytest.approx(brute(d), abs=1e-9)
    keys = set(dict(c.items())) | set(dict(d.items()))
    for k in keys:
        assert abs(c.coefficient(k) - d.coefficient(k)) <= 1e-12 * max(1.0, abs(c.coefficient(k)))


def test_truth_table_determines_coefficients():
    # Moebius inversion of an arbitrary truth table on 3 vars reproduces the same function
    import random
    rng = random.Random(3)
    table = {bits: rng.uniform(-1, 1) for bits in itertools.product((0, 1), repeat=3)}
    terms = {}
    for S in itertools.product((0, 1), repeat=3):
        mono = tuple(i for i in range(3) if S[i])
        c = 0.0
        for T in itertools.product((0, 1), repeat=3):
            if all(t <= s for t, s in zip(T, S)):
                c += (-1) ** (sum(S) - sum(T)) * table[T]
        terms[mono] = c
    p = BinaryPolynomial(terms)
    for bits, v in table.items():
        assert p.evaluate(dict(enumerate(bits))) == pytest.approx(v, abs=1e-12)

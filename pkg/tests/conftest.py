import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qkan.encoding import EncodingSpec
from qkan.network import KanSpec

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

# small encodings keep exhaustive oracles cheap
TWO_BIT = EncodingSpec(0, 1, False)
SIGNED_SMALL = EncodingSpec(-1, 0, True)

MATRIX = {
    "[1,1]": KanSpec.uniform((1, 1), 1),
    "[2,1]": KanSpec.uniform((2, 1), 2),
    "[1,1,1]": KanSpec.uniform((1, 1, 1), 1),
    "[2,2,1]": KanSpec.uniform((2, 2, 1), 1),
}


@pytest.fixture(params=sorted(MATRIX))
def arch(request):
    return MATRIX[request.param]


def all_assignments(variables):
    variables = list(variables)
    for bits in itertools.product((0, 1), repeat=len(variables)):
        yield dict(zip(variables, bits))


def rel_close(a, b, rel=1e-9, floor=1e-12):
    return abs(a - b) <= rel * max(abs(a), abs(b)) + floor


def coeffs_close(p, q, rel=1e-9, floor=1e-12):
    keys = set(dict(p.items())) | set(dict(q.items()))
    return all(rel_close(p.coefficient(k), q.coefficient(k), rel, floor) for k in keys)


def random_dataset(rng, spec, n, kind="train"):
    from qkan.objective import Dataset
    return Dataset(rng.uniform(0, 1, (n, spec.n_inputs)), rng.normal(size=(n, spec.n_outputs)), kind)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

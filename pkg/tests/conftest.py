import numpy as np
import pytest

from lurestab.problems import load_problem


@pytest.fixture(scope="session")
def example_a():
    return load_problem("example_a.json")


@pytest.fixture(scope="session")
def example_b():
    return load_problem("example_b.json")


@pytest.fixture
def rng():
    return np.random.default_rng(42)

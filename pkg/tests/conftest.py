import numpy as np
import pytest

CRITERIA = []


class IdentityModel:
    """Predicts the key itself; a perfect CDF model for keys in [0, 1]."""

    is_monotone = True
    n_neurons = 0

    def predict(self, X):
        return np.asarray(X, dtype=np.float64)


class ConstantModel:
    is_monotone = True
    n_neurons = 0

    def __init__(self, value):
        self.value = value

    def predict(self, X):
        return np.full(np.size(X), self.value, dtype=np.float64)


@pytest.fixture
def identity_model():
    return IdentityModel()


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, passed, detail)."""

    def record(number, passed, detail):
        CRITERIA.append((number, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

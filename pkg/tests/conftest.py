import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, n=30, p=8, m=4, signal_rows=3, rank=2, noise=0.5):
    X = rng.standard_normal((n, p))
    B = np.zeros((p, m))
    B[:signal_rows] = rng.standard_normal((signal_rows, rank)) @ rng.standard_normal((rank, m))
    Y = X @ B + noise * rng.standard_normal((n, m))
    return X - X.mean(0), Y - Y.mean(0)


def random_orthogonal(rng, k):
    Q, R = np.linalg.qr(rng.standard_normal((k, k)))
    return Q * np.sign(np.diag(R))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest


def taylor_expm(a, terms=30):
    """Scaled Taylor series with repeated squaring; independent of scipy."""
    norm = np.max(np.sum(np.abs(a), axis=1))
    s = max(0, int(np.ceil(np.log2(max(norm, 1e-300)))) + 1)
    x = a / 2**s
    out = np.eye(a.shape[0], dtype=np.result_type(a, float))
    term = out.copy()
    for k in range(1, terms):
        term = term @ x / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def ladder(n_max):
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

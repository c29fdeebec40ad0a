import numpy as np
import pytest

from famapprox import kernels


@pytest.fixture(params=kernels.BACKENDS)
def backend(request):
    """Run a test under every available kernel backend."""
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


@pytest.fixture
def python_kernels():
    """Bitwise-exact numpy kernels, for tests that assert exact zeros."""
    previous = kernels.use_backend("python")
    yield
    kernels.use_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(LINES):
            terminalreporter.write_line(LINES[number])

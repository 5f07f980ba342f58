import numpy as np
import pytest

from tcca.synth import P2dccaModel, generate

SIM_DIMS = (20, 15, 15, 20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sim_data():
    """Default synthetic model (k=2, lambda=0.9) with n=100 samples."""
    model = P2dccaModel.build(2, SIM_DIMS, 0.9, seed=7)
    X, Y = generate(model, 100, seed=8)
    return model, X, Y


def gaussian_pair(rng, n, dims_x, dims_y, shared=0.7):
    """Dense Gaussian tensors with a shared latent score (full-rank covariances)."""
    z = rng.standard_normal(n)
    X = rng.standard_normal((n,) + tuple(dims_x))
    Y = rng.standard_normal((n,) + tuple(dims_y))
    X += shared * z.reshape((n,) + (1,) * len(dims_x)) * rng.standard_normal(dims_x)
    Y += shared * z.reshape((n,) + (1,) * len(dims_y)) * rng.standard_normal(dims_y)
    return X, Y


_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    tr = request.config.pluginmanager.getplugin("terminalreporter")

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE[number] = line
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])

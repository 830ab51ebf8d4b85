import numpy as np
import pytest

from mtmvdr import _kernels_py, kernels


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hpd(rng, d, jitter=0.5):
    a = crandn(rng, d, d)
    return a @ a.conj().T + jitter * d * np.eye(d)


@pytest.fixture(params=["python", "compiled"])
def kernel_backend(request, monkeypatch):
    """Run a test against each available kernel backend."""
    if request.param == "compiled":
        if kernels.compiled_backend is None:
            pytest.skip("compiled kernels not built")
        impl = kernels.compiled_backend
    else:
        impl = _kernels_py
    monkeypatch.setattr(kernels, "_impl", impl)
    return request.param


# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abc")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<3} {'PASS' if ok else 'FAIL'}  {detail}")

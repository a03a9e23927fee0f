import numpy as np
import pytest

from schwinger_adapt import kernels

BACKENDS = ["python"]
try:
    kernels.get_backend("cython")
    BACKENDS.append("cython")
except ImportError:
    pass


@pytest.fixture(params=BACKENDS)
def kern(request):
    return kernels.get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, n, real=False):
    psi = rng.standard_normal(1 << n)
    if not real:
        psi = psi + 1j * rng.standard_normal(1 << n)
    psi = psi.astype(np.complex128)
    return psi / np.linalg.norm(psi)

import numpy as np
import pytest

from bimaff import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compile (or load the on-disk cache) before any timed assertions
    _kernels.warmup()


@pytest.fixture(params=sorted(_kernels.available_backends()))
def kernel_backend(request):
    """Run the decorated test once per available kernel backend."""
    previous = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)

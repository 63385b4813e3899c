"""Backend dispatch for the hot mask kernels.

Two interchangeable backends: numba-compiled loops (default) and a
vectorized numpy/scipy fallback. Selection order:

  1. ``BIMAFF_NO_NUMBA=1`` in the environment forces the fallback,
  2. otherwise numba is used when importable,
  3. otherwise the fallback.

``set_backend`` overrides the choice at runtime (tests and the kernel
benchmark exercise both paths through it).
"""

import os

from . import numpy_impl

_BACKENDS = {"numpy": numpy_impl}
_active_name = "numpy"

if os.environ.get("BIMAFF_NO_NUMBA", "").strip() not in ("1", "true", "yes"):
    try:
        from . import numba_impl

        _BACKENDS["numba"] = numba_impl
        _active_name = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

_active = _BACKENDS[_active_name]


def backend_name() -> str:
    return _active_name


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> str:
    """Switch the active kernel backend; returns the previous name."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(_BACKENDS)}")
    previous = _active_name
    _active_name = name
    _active = _BACKENDS[name]
    return previous


def erode(arr, iterations):
    return _active.erode(arr, iterations)


def dilate(arr, iterations):
    return _active.dilate(arr, iterations)


def label_components(arr):
    return _active.label_components(arr)


def directed_hausdorff_sq(a_yx, b_yx):
    return _active.directed_hausdorff_sq(a_yx, b_yx)


def warmup() -> None:
    impl = _BACKENDS.get("numba")
    if impl is not None:
        impl.warmup()

"""Backend selection for the N-vortex kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python twin.  Set ``POINTVORTEX_BACKEND=python`` to force the fallback
(``cython`` to require the extension).
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from .errors import CoincidentPointsError, OutsideDomainError

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _select(name: str | None):
    name = (name or os.environ.get("POINTVORTEX_BACKEND", "auto")).lower()
    if name == "auto":
        return ("cython", _ckernels) if _ckernels is not None else ("python", _kernels_py)
    if name not in _BACKENDS:
        raise ImportError(f"kernel backend {name!r} unavailable (have {available_backends()})")
    return name, _BACKENDS[name]


BACKEND, _impl = _select(None)


def _raise(code, bad, domain_name):
    if code == 1:
        i, j = int(bad[0]), int(bad[1])
        raise CoincidentPointsError(f"vortices {i} and {j} coincide", indices=(i, j))
    if code == 2:
        raise OutsideDomainError(f"vortex {int(bad[0])} lies outside the {domain_name}", index=int(bad[0]))


def velocities(kind: int, positions, intensities, out=None, backend: str | None = None) -> np.ndarray:
    """Velocities of all vortices for kernel ``kind`` (0 plane, 1 half-plane, 2 unit disk)."""
    impl = _impl if backend is None else _select(backend)[1]
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    a = np.ascontiguousarray(intensities, dtype=np.float64)
    if out is None:
        out = np.empty_like(pos)
    bad = np.zeros(2, dtype=np.intp)
    code = impl.velocities(kind, pos, a, out, bad)
    if code:
        _raise(code, bad, ("plane", "half-plane", "unit disk")[kind])
    return out


def hamiltonian(kind: int, positions, intensities, backend: str | None = None) -> float:
    impl = _impl if backend is None else _select(backend)[1]
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    a = np.ascontiguousarray(intensities, dtype=np.float64)
    bad = np.zeros(2, dtype=np.intp)
    code, value = impl.hamiltonian(kind, pos, a, bad)
    if code:
        _raise(code, bad, ("plane", "half-plane", "unit disk")[kind])
    return float(value)

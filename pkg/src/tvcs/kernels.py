"""Backend selection for the hot loops.

The compiled module ``tvcs._kernels`` is used when it imports cleanly.
Setting the environment variable ``TVCS_PURE_PYTHON=1`` before import forces
the numpy/scipy fallback, which is also used automatically when the
extension was not built.
"""
import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("TVCS_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def _c2(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def grad2d(x):
    """Forward differences (d1 along axis 0, d2 along axis 1), Neumann."""
    return _impl.grad2d(_c2(x))


def grad2d_adjoint(g1, g2):
    """Adjoint of :func:`grad2d`."""
    return _impl.grad2d_adjoint(_c2(g1), _c2(g2))


def shrink_iso(g1, g2, theta):
    """Isotropic shrinkage of the per-pixel pair (g1, g2)."""
    return _impl.shrink_iso(_c2(g1), _c2(g2), float(theta))


def shrink_soft(g, theta):
    """Entrywise complex soft threshold; keeps the input shape."""
    g = np.asarray(g)
    out = _impl.shrink_soft(_c2(g).ravel(), float(theta))
    return out.reshape(g.shape)


def label_components(open_mask):
    """Connected components of the graph with edges t -> t+e1, t -> t+e2
    for every pixel t where ``open_mask`` is true."""
    return _impl.label_components(np.ascontiguousarray(open_mask, dtype=np.uint8))


def backends():
    """Return the available implementations keyed by name."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out

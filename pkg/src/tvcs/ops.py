"""Fourier transforms, Neumann finite differences, TV norms and the
pseudoinverses of restricted difference operators.

Conventions
-----------
* Spatial samples are 0-based arrays. A 1D jump position ``t`` is the
  1-based row label of the difference operator, so ``(Dx)_t = x[t] - x[t-1]``
  and the jump separates samples ``t-1`` and ``t`` (0-based).
* Spectra are stored in *canonical order*: entry ``i`` along an axis holds
  frequency ``k = kmin(N) + i`` with ``kmin(N) = -floor(N/2) + 1``, so the
  axis covers ``{-floor(N/2)+1, ..., ceil(N/2)}``.
* The transform uses a positive exponent, ``A[k, j] = N^{-1/2} e^{2 pi i k j / N}``
  in 1D and ``N^{-1} e^{2 pi i (k1 j1 + k2 j2)/N}`` in 2D, which makes it unitary.
"""
from typing import NamedTuple

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Raised when an array has the wrong length or shape."""


class GradientField(NamedTuple):
    """Per-pixel forward differences of an ``N x N`` grid.

    ``d1`` differences along axis 0 (last row zero), ``d2`` along axis 1
    (last column zero).
    """

    d1: np.ndarray
    d2: np.ndarray

    def magnitude(self):
        return np.sqrt(np.abs(self.d1) ** 2 + np.abs(self.d2) ** 2)


# ---------------------------------------------------------------- validation


def as_vector(x, name="x"):
    """Return ``x`` as a finite complex 1D array of length at least 2."""
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise DimensionError(f"{name} must be a 1D array of length >= 2, got shape {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_grid(x, name="x"):
    """Return ``x`` as a finite complex square 2D array with side at least 2."""
    arr = np.asarray(x)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
        raise DimensionError(f"{name} must be a square N x N array with N >= 2, got shape {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_signal(x, name="x"):
    """Dispatch to :func:`as_vector` or :func:`as_grid` by dimension."""
    arr = np.asarray(x)
    if arr.ndim == 1:
        return as_vector(arr, name)
    if arr.ndim == 2:
        return as_grid(arr, name)
    raise DimensionError(f"{name} must be 1D or 2D, got {arr.ndim} dimensions")


# ------------------------------------------------------------ frequency grid


def kmin(n):
    """Smallest frequency on the canonical grid of size ``n``."""
    return -(n // 2) + 1


def freq_grid(n):
    """Canonical frequencies ``-floor(n/2)+1 .. ceil(n/2)`` in storage order."""
    return np.arange(kmin(n), kmin(n) + n)


def canonical_frequency(k, n):
    """Map any integer frequency to its representative on the canonical grid.

    This is how the alternative grid ``-floor(n/2) .. ceil(n/2)-1`` used for
    multilevel bands is folded onto the canonical one: only ``-n/2`` (even
    ``n``) moves, to ``+n/2``.
    """
    k = np.asarray(k)
    lo = kmin(n)
    return (k - lo) % n + lo


def freq_to_pos(k, n):
    """Storage position of canonical frequency ``k``; raises if out of range."""
    k = np.asarray(k)
    pos = k - kmin(n)
    if np.any((pos < 0) | (pos >= n)):
        raise IndexError(f"frequency outside the canonical grid for N={n}")
    return pos


def to_canonical(spec_fft):
    """Reorder a spectrum from numpy FFT order to canonical order."""
    spec_fft = np.asarray(spec_fft)
    shifts = tuple(-(kmin(s)) for s in spec_fft.shape)
    return np.roll(spec_fft, shift=shifts, axis=tuple(range(spec_fft.ndim)))


def to_fft_order(spec):
    """Inverse of :func:`to_canonical`."""
    spec = np.asarray(spec)
    shifts = tuple(kmin(s) for s in spec.shape)
    return np.roll(spec, shift=shifts, axis=tuple(range(spec.ndim)))


# ----------------------------------------------------------------- transforms


def dft_fft_order(x):
    """Unitary positive-exponent DFT, output in numpy FFT order."""
    return np.fft.ifftn(x, norm="ortho")


def dft_adjoint_fft_order(spec):
    """Adjoint of :func:`dft_fft_order`."""
    return np.fft.fftn(spec, norm="ortho")


def dft(x):
    """Unitary DFT of a signal or square image, in canonical frequency order.

    Parameters
    ----------
    x : array_like
        Length-``N`` vector or ``N x N`` grid.

    Returns
    -------
    numpy.ndarray
        Spectrum of the same shape; entry ``i`` along each axis corresponds to
        frequency ``freq_grid(N)[i]``.
    """
    x = as_signal(x)
    return to_canonical(dft_fft_order(x))


def dft_adjoint(spec):
    """Adjoint (and inverse) of :func:`dft`."""
    spec = as_signal(spec, "spectrum")
    return dft_adjoint_fft_order(to_fft_order(spec))


def dft_matrix(n):
    """Dense 1D transform matrix with rows in canonical frequency order."""
    k = freq_grid(n)
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, j) / n) / np.sqrt(n)


# ---------------------------------------------------------- finite differences


def diff_1d(x):
    """Forward differences ``(Dx)_t = x[t] - x[t-1]``, length ``N-1``."""
    x = as_vector(x)
    return x[1:] - x[:-1]


def diff_1d_adjoint(g, n=None):
    """Adjoint of :func:`diff_1d` applied to a length ``N-1`` vector."""
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim != 1:
        raise DimensionError("difference coefficients must be 1D")
    if n is not None and g.shape[0] != n - 1:
        raise DimensionError(f"expected {n - 1} coefficients, got {g.shape[0]}")
    out = np.zeros(g.shape[0] + 1, dtype=np.complex128)
    out[:-1] -= g
    out[1:] += g
    return out


def diff_matrix(n):
    """Dense ``(n-1) x n`` difference matrix."""
    return np.eye(n - 1, n, k=1) - np.eye(n - 1, n)


def grad_2d(x):
    """Neumann forward-difference gradient of an ``N x N`` grid."""
    x = as_grid(x)
    d1, d2 = kernels.grad2d(x)
    return GradientField(d1, d2)


def grad_2d_adjoint(g):
    """Adjoint ``D1* g1 + D2* g2`` of :func:`grad_2d`.

    Entries of ``g1`` on the last row and of ``g2`` on the last column are
    ignored, matching the zero rows of the operator.
    """
    g1, g2 = g
    g1 = as_grid(g1, "d1")
    g2 = as_grid(g2, "d2")
    if g1.shape != g2.shape:
        raise DimensionError("gradient components differ in shape")
    return kernels.grad2d_adjoint(g1, g2)


def gradient(x):
    """:func:`diff_1d` or :func:`grad_2d` depending on the dimension."""
    x = np.asarray(x)
    return diff_1d(x) if x.ndim == 1 else grad_2d(x)


def gradient_adjoint(g, n=None):
    """Adjoint matching :func:`gradient`."""
    if isinstance(g, GradientField) or (isinstance(g, tuple) and len(g) == 2):
        return grad_2d_adjoint(g)
    return diff_1d_adjoint(g, n)


# ------------------------------------------------------------------ TV norms

TV_FLAVORS = ("one_d", "iso_2d", "aniso_2d")


def tv_norm(x, flavor=None):
    """Total-variation norm.

    Parameters
    ----------
    x : array_like
        Signal (``one_d``) or grid (``iso_2d`` / ``aniso_2d``).
    flavor : str, optional
        Defaults to ``one_d`` for vectors and ``iso_2d`` for grids.
    """
    arr = np.asarray(x)
    if flavor is None:
        flavor = "one_d" if arr.ndim == 1 else "iso_2d"
    if flavor not in TV_FLAVORS:
        raise ValueError(f"unknown TV flavor {flavor!r}")
    if flavor == "one_d":
        if arr.ndim != 1:
            raise DimensionError("one_d TV needs a vector")
        return float(np.sum(np.abs(diff_1d(arr))))
    if arr.ndim != 2:
        raise DimensionError(f"{flavor} TV needs a square grid")
    g = grad_2d(arr)
    return tv_norm_of_gradient(g, flavor)


def tv_norm_of_gradient(g, flavor):
    """TV value of an already computed gradient (vector or GradientField)."""
    if flavor == "one_d":
        return float(np.sum(np.abs(g)))
    g1, g2 = g
    if flavor == "iso_2d":
        return float(np.sum(np.sqrt(np.abs(g1) ** 2 + np.abs(g2) ** 2)))
    if flavor == "aniso_2d":
        return float(np.sum(np.abs(g1)) + np.sum(np.abs(g2)))
    raise ValueError(f"unknown TV flavor {flavor!r}")


def indicator(pixels, n):
    """Boolean ``n x n`` mask from a mask or an ``(m, 2)`` array of pixels."""
    arr = np.asarray(pixels)
    if arr.dtype == bool:
        if arr.shape != (n, n):
            raise DimensionError(f"mask must have shape {(n, n)}")
        return arr
    arr = arr.reshape(-1, 2).astype(int)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise IndexError("pixel index outside the grid")
    mask = np.zeros((n, n), dtype=bool)
    mask[arr[:, 0], arr[:, 1]] = True
    return mask


def perimeter(J, n=None):
    """Perimeter ``Per(J) = ||1_J||_{TV,1}`` of a pixel set.

    ``J`` is either a boolean ``N x N`` mask or an ``(m, 2)`` array of pixel
    indices together with ``n``. The value counts grid-adjacent pairs with
    exactly one pixel inside ``J``.
    """
    arr = np.asarray(J)
    if arr.dtype == bool:
        mask = arr
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise DimensionError("mask must be square")
    else:
        if n is None:
            raise ValueError("n is required when J is given as pixel indices")
        mask = indicator(arr, n)
    m = mask.astype(np.int8)
    return float(np.count_nonzero(np.diff(m, axis=0)) + np.count_nonzero(np.diff(m, axis=1)))


def sgn(z):
    """Complex sign ``z/|z|`` with ``sgn(0) = 0``."""
    z = np.asarray(z, dtype=np.complex128)
    mag = np.abs(z)
    out = np.zeros_like(z)
    nz = mag > 0
    out[nz] = z[nz] / mag[nz]
    return out


def iso_sign(g):
    """Per-pixel isotropic sign field ``(Dx)_t / |(Dx)_t|`` of a GradientField."""
    mag = np.sqrt(np.abs(g[0]) ** 2 + np.abs(g[1]) ** 2)
    s1 = np.zeros_like(g[0], dtype=np.complex128)
    s2 = np.zeros_like(g[1], dtype=np.complex128)
    nz = mag > 0
    s1[nz] = g[0][nz] / mag[nz]
    s2[nz] = g[1][nz] / mag[nz]
    return GradientField(s1, s2)


# ------------------------------------------------------------ pseudoinverses


def pinv_diff_dense(n):
    """Closed-form pseudoinverse of the ``(n-1) x n`` difference matrix.

    Column ``c`` (1-based) equals ``c/n`` minus the indicator of rows
    ``1..c``, so the first column is ``(-(n-1)/n, 1/n, ..., 1/n)``.
    """
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    n = int(n)
    rows = np.arange(1, n + 1)[:, None]
    cols = np.arange(1, n)[None, :]
    return cols / n - (rows <= cols).astype(float)


def _block_bounds(jumps, n):
    jumps = np.asarray(jumps, dtype=int).ravel()
    if jumps.size and (jumps.min() < 1 or jumps.max() > n - 1):
        raise IndexError(f"jump positions must lie in 1..{n - 1}")
    if jumps.size and np.any(np.diff(jumps) <= 0):
        raise ValueError("jump positions must be strictly increasing")
    return np.concatenate([[0], jumps, [n]])


def apply_pinv_restricted(jumps, y, n):
    """Apply ``(P_Lambda D)^+`` in O(N), where Lambda removes the jump rows.

    Parameters
    ----------
    jumps : array_like of int
        Removed rows ``t`` (1-based labels in ``1..N-1``).
    y : array_like
        Length ``N-1`` coefficients indexed by difference rows. Entries on
        jump rows are ignored (those columns of the pseudoinverse vanish).
    n : int
        Signal length ``N``.

    Notes
    -----
    Within each block the result is the zero-mean antiderivative of the
    block's coefficients, which is what the block-diagonal closed form
    ``D_w^+`` computes.
    """
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (n - 1,):
        raise DimensionError(f"expected {n - 1} coefficients, got shape {y.shape}")
    bounds = _block_bounds(jumps, n)
    out = np.empty(n, dtype=np.complex128)
    for a, b in zip(bounds[:-1], bounds[1:]):
        # samples a..b-1; interior difference rows a+1..b-1 (1-based) -> y[a:b-1]
        seg = np.concatenate([[0.0], np.cumsum(y[a:b - 1])])
        out[a:b] = seg - seg.mean()
    return out


def pinv_restricted_dense(jumps, n):
    """Dense ``N x (N-1)`` matrix of ``(P_Lambda D)^+`` (zero jump columns)."""
    bounds = _block_bounds(jumps, n)
    out = np.zeros((n, n - 1))
    for a, b in zip(bounds[:-1], bounds[1:]):
        w = b - a
        if w >= 2:
            out[a:b, a:b - 1] = pinv_diff_dense(w)
    return out


def norm_1to2(mat):
    """``||M||_{1->2}``: the largest column 2-norm."""
    mat = np.asarray(mat)
    return float(np.max(np.linalg.norm(mat, axis=0))) if mat.size else 0.0


def pinv_restricted_norm_1to2(jumps, n):
    """``||(P_Lambda D)^+||_{1->2}`` from the block formula.

    Column ``c`` of ``D_w^+`` has squared norm ``c (w - c) / w``.
    """
    bounds = _block_bounds(jumps, n)
    best = 0.0
    for w in np.diff(bounds):
        if w >= 2:
            c = np.arange(1, w)
            best = max(best, float(np.max(c * (w - c) / w)))
    return float(np.sqrt(best))

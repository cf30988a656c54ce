"""Cosupport detection and the structure metrics active sparsity and fineness.

A 1D structure is a :class:`JumpSet` (the rows of ``D`` where the signal
jumps); a 2D structure is a :class:`ComponentPartition` of the pixel grid into
the regions on which the image is constant.
"""
from dataclasses import dataclass, field

import numpy as np
from typing import List, Optional, Tuple

import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels, ops


@dataclass(frozen=True)
class JumpSet:
    """Jump positions of a 1D piecewise-constant signal.

    Parameters
    ----------
    n : int
        Signal length ``N``.
    jumps : tuple of int
        Strictly increasing positions ``t`` in ``1..N-1``. A jump at ``t``
        means ``x[t] != x[t-1]`` (0-based samples).
    """

    n: int
    jumps: Tuple[int, ...] = ()

    def __post_init__(self):
        jumps = tuple(int(t) for t in self.jumps)
        if self.n < 2:
            raise ops.DimensionError("n must be >= 2")
        if any(t < 1 or t > self.n - 1 for t in jumps):
            raise IndexError(f"jump positions must lie in 1..{self.n - 1}")
        if any(b <= a for a, b in zip(jumps, jumps[1:])):
            raise ValueError("jump positions must be strictly increasing")
        object.__setattr__(self, "jumps", jumps)

    @classmethod
    def from_widths(cls, widths):
        widths = [int(w) for w in widths]
        if any(w < 1 for w in widths):
            raise ValueError("widths must be positive")
        return cls(sum(widths), tuple(np.cumsum(widths)[:-1].tolist()))

    @property
    def bounds(self):
        """``(t_0, ..., t_s)`` with ``t_0 = 0`` and ``t_s = N``."""
        return np.array((0,) + self.jumps + (self.n,))

    @property
    def widths(self):
        return np.diff(self.bounds)

    @property
    def n_blocks(self):
        return len(self.jumps) + 1

    @property
    def n_jumps(self):
        """``|Lambda^c|``."""
        return len(self.jumps)

    @property
    def cosupport_size(self):
        """``|Lambda|``: difference rows where the signal is flat."""
        return self.n - 1 - len(self.jumps)

    def blocks(self):
        """0-based half-open sample ranges ``(a, b)`` of each constant block."""
        b = self.bounds
        return list(zip(b[:-1].tolist(), b[1:].tolist()))

    def jump_mask(self):
        """Boolean mask of length ``N-1`` over difference rows, true on jumps."""
        mask = np.zeros(self.n - 1, dtype=bool)
        if self.jumps:
            mask[np.array(self.jumps) - 1] = True
        return mask

    def block_labels(self):
        """Block index of every sample."""
        return np.repeat(np.arange(self.n_blocks), self.widths)

    def signal(self, values):
        """Piecewise-constant signal taking ``values[j]`` on block ``j``."""
        values = np.asarray(values)
        if values.shape != (self.n_blocks,):
            raise ops.DimensionError(f"need {self.n_blocks} block values")
        return values[self.block_labels()]


@dataclass
class ComponentPartition:
    """Partition of the ``N x N`` grid into the regions where the image is
    constant.

    Attributes
    ----------
    n : int
        Side length.
    labels : ndarray of int, shape (n, n)
        Component index of every pixel, numbered by first occurrence in
        row-major order.
    areas, perimeters : ndarray
        ``|I_j|`` and ``Per(I_j)`` per component.
    jump_mask : ndarray of bool, shape (n, n)
        Pixels with a nonzero forward difference in either direction.
    flat_edges : tuple of two bool arrays, optional
        ``(down, right)`` masks of the gradient entries in ``Lambda``. When
        omitted the pixel rule applies: every entry of a pixel outside
        ``jump_mask`` is in ``Lambda``.
    """

    n: int
    labels: np.ndarray
    areas: np.ndarray
    perimeters: np.ndarray
    jump_mask: np.ndarray = field(repr=False)
    flat_edges: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    @property
    def n_components(self):
        return int(self.areas.size)

    @property
    def n_jumps(self):
        """``|Lambda^c|`` counted in pixels."""
        return int(np.count_nonzero(self.jump_mask))

    @property
    def rule(self):
        return "pixel" if self.flat_edges is None else "entry"

    def edge_masks(self):
        """``(down, right)`` masks of the gradient entries in ``Lambda``.

        The last row of ``down`` and last column of ``right`` are always false
        because those differences are identically zero.
        """
        if self.flat_edges is not None:
            return self.flat_edges
        flat = ~self.jump_mask
        down = np.zeros_like(flat)
        right = np.zeros_like(flat)
        down[:-1, :] = flat[:-1, :]
        right[:, :-1] = flat[:, :-1]
        return down, right

    def components(self):
        """List of ``(pixel_mask, area, perimeter)`` triples."""
        return [(self.labels == j, int(self.areas[j]), float(self.perimeters[j]))
                for j in range(self.n_components)]

    def image(self, values):
        values = np.asarray(values)
        if values.shape != (self.n_components,):
            raise ops.DimensionError(f"need {self.n_components} component values")
        return values[self.labels]


@dataclass
class StructureReport:
    """Fineness, ``|Lambda^c|`` and samples ``(p, S(Lambda, p))``."""

    fineness: float
    sparsity: int
    samples: List[Tuple[float, float]]

    def is_monotone(self, tol=1e-12):
        vals = [s for _, s in self.samples]
        return all(b <= a + tol for a, b in zip(vals, vals[1:]))


# ------------------------------------------------------------------ detection


def default_threshold(grad_magnitude):
    """``1e-8 * ||Dx||_inf``; zero for a flat input."""
    m = np.max(grad_magnitude) if np.size(grad_magnitude) else 0.0
    return 1e-8 * float(m)


def detect_cosupport_1d(x, tau=None):
    """Jumps ``{t : |(Dx)_t| > tau}`` of a 1D signal.

    ``tau=None`` uses :func:`default_threshold`; pass ``0`` for exact data.
    """
    dx = np.abs(ops.diff_1d(x))
    if tau is None:
        tau = default_threshold(dx)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return JumpSet(len(dx) + 1, tuple((np.nonzero(dx > tau)[0] + 1).tolist()))


def partition_from_jump_mask(jump_mask):
    """Build the partition whose components span ``N(P_Lambda D)``.

    Every pixel outside ``jump_mask`` is joined to its lower and right
    neighbours. Pixels in the mask get no outgoing edges, so a component can be
    a single pixel (for example on a one-pixel-wide line).
    """
    jump_mask = np.asarray(jump_mask, dtype=bool)
    n = jump_mask.shape[0]
    labels = kernels.label_components(~jump_mask)
    return _partition(n, labels, jump_mask)


def _partition(n, labels, jump_mask, flat_edges=None):
    n_comp = int(labels.max()) + 1
    areas = np.bincount(labels.ravel(), minlength=n_comp)
    perims = np.zeros(n_comp)
    for a, b in ((labels[:-1, :], labels[1:, :]), (labels[:, :-1], labels[:, 1:])):
        diff = a != b
        perims += np.bincount(a[diff], minlength=n_comp)
        perims += np.bincount(b[diff], minlength=n_comp)
    return ComponentPartition(n, labels, areas, perims, jump_mask, flat_edges)


def partition_from_flat_edges(down, right):
    """Partition whose components are joined by the given zero-difference
    entries (``down[i, j]`` links ``(i, j)`` to ``(i+1, j)``, ``right[i, j]``
    links it to ``(i, j+1)``)."""
    down = np.asarray(down, dtype=bool).copy()
    right = np.asarray(right, dtype=bool).copy()
    n = down.shape[0]
    down[-1, :] = False
    right[:, -1] = False
    idx = np.arange(n * n).reshape(n, n)
    rows = np.concatenate([idx[down], idx[right]])
    cols = np.concatenate([idx[down] + n, idx[right] + 1])
    graph = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n * n, n * n))
    _, raw = connected_components(graph, directed=False)
    _, first = np.unique(raw, return_index=True)
    remap = np.empty(first.size, dtype=np.intp)
    remap[np.argsort(first)] = np.arange(first.size)
    labels = remap[raw].reshape(n, n)
    # a pixel is a jump pixel when one of its existing differences is nonzero
    nz1 = np.zeros((n, n), dtype=bool)
    nz2 = np.zeros((n, n), dtype=bool)
    nz1[:-1, :] = ~down[:-1, :]
    nz2[:, :-1] = ~right[:, :-1]
    return _partition(n, labels, nz1 | nz2, (down, right))


COSUPPORT_RULES = ("pixel", "entry")


def detect_partition_2d(x, tau=None, rule="pixel"):
    """Partition an image into the regions where its gradient vanishes.

    ``rule="pixel"``: a pixel is in ``Lambda^c`` when either forward
    difference exceeds ``tau``, and both its entries leave ``Lambda`` (see
    :func:`partition_from_jump_mask`). ``rule="entry"``: each gradient entry
    is classified on its own, so components are exactly the connected
    constant regions.
    """
    if rule not in COSUPPORT_RULES:
        raise ValueError(f"rule must be one of {COSUPPORT_RULES}")
    g = ops.grad_2d(x)
    a1, a2 = np.abs(g.d1), np.abs(g.d2)
    if tau is None:
        tau = default_threshold(np.maximum(a1, a2))
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if rule == "entry":
        return partition_from_flat_edges(a1 <= tau, a2 <= tau)
    return partition_from_jump_mask((a1 > tau) | (a2 > tau))


def detect_structure(x, tau=None):
    """:func:`detect_cosupport_1d` or :func:`detect_partition_2d` by dimension."""
    x = np.asarray(x)
    return detect_cosupport_1d(x, tau) if x.ndim == 1 else detect_partition_2d(x, tau)


# -------------------------------------------------------------------- metrics


def _scale(n, p):
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0:
        return np.inf
    if np.isinf(p):
        return 0.0
    return n / p


def active_sparsity(structure, p):
    """Active sparsity ``S(Lambda, p)``.

    1D: ``(N/p) sum_{w_j > N/p} 1/w_j + #{j : w_j <= N/p}``.
    2D: ``(N/p) sum_{j not in Delta_p} Per_j^2/|I_j| + sum_{j in Delta_p} Per_j``
    with ``Delta_p = {j : |I_j|/Per_j <= N/p}``. ``p = 0`` gives ``N/p = inf``
    and ``p = inf`` gives ``N/p = 0``.
    """
    h = _scale(structure.n, p)
    if isinstance(structure, JumpSet):
        w = structure.widths.astype(float)
        wide = w > h
        head = h * np.sum(1.0 / w[wide]) if np.any(wide) else 0.0
        return float(head + np.count_nonzero(~wide))
    if isinstance(structure, ComponentPartition):
        area = structure.areas.astype(float)
        per = structure.perimeters
        with np.errstate(divide="ignore"):
            ratio = np.where(per > 0, area / np.where(per > 0, per, 1), np.inf)
        in_delta = ratio <= h
        outside = ~in_delta & (per > 0)
        head = h * np.sum(per[outside] ** 2 / area[outside]) if np.any(outside) else 0.0
        return float(head + np.sum(per[in_delta]))
    raise TypeError("structure must be a JumpSet or ComponentPartition")


def fineness(structure):
    """Fineness: ``sum_j 1/w_j`` (1D) or ``sum_j Per_j^2/|I_j|`` (2D)."""
    if isinstance(structure, JumpSet):
        return float(np.sum(1.0 / structure.widths))
    if isinstance(structure, ComponentPartition):
        return float(np.sum(structure.perimeters ** 2 / structure.areas))
    raise TypeError("structure must be a JumpSet or ComponentPartition")


def sparsity_curve(structure, p_grid):
    """Evaluate :func:`active_sparsity` on an ascending grid of ``p``."""
    p_grid = [float(p) for p in p_grid]
    if any(b < a for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p_grid must be sorted ascending")
    samples = [(p, active_sparsity(structure, p)) for p in p_grid]
    return StructureReport(fineness(structure), structure.n_jumps, samples)

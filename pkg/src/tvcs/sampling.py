"""Frequency sampling patterns and the per-level sample-count conditions.

Frequencies are integers on the canonical grid ``kmin(N) .. kmin(N)+N-1``
(1D) or pairs of them (2D). Patterns are stored sorted by storage position,
which for canonical frequencies is lexicographic order.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import ops, structure as st


def make_rng(seed):
    """Seeded PCG64 generator; the single RNG used by every draw."""
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


def full_grid(n, dim):
    """All canonical frequencies in storage order."""
    k = ops.freq_grid(n)
    if dim == 1:
        return k.copy()
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return np.stack([k1.ravel(), k2.ravel()], axis=1)


def _positions(freqs, n, dim):
    freqs = np.asarray(freqs, dtype=int)
    if dim == 1:
        return ops.freq_to_pos(freqs.reshape(-1), n)
    freqs = freqs.reshape(-1, 2)
    p = ops.freq_to_pos(freqs, n)
    return p[:, 0] * n + p[:, 1]


def _radius(freqs):
    freqs = np.asarray(freqs, dtype=float)
    return np.abs(freqs) if freqs.ndim == 1 else np.hypot(freqs[:, 0], freqs[:, 1])


@dataclass
class SamplingPattern:
    """A set ``Omega`` of canonical frequencies with optional level labels.

    Parameters
    ----------
    n : int
        Grid size ``N`` per axis.
    dimension : int
        1 or 2.
    freqs : ndarray
        Shape ``(m,)`` in 1D or ``(m, 2)`` in 2D.
    levels : ndarray of int, optional
        Level index of each frequency (0-based).
    """

    n: int
    dimension: int
    freqs: np.ndarray
    levels: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        shape = (-1,) if self.dimension == 1 else (-1, 2)
        freqs = np.asarray(self.freqs, dtype=int).reshape(shape)
        pos = _positions(freqs, self.n, self.dimension)
        order = np.argsort(pos, kind="stable")
        if np.any(np.diff(pos[order]) == 0):
            raise ValueError("duplicate frequencies in pattern")
        self.freqs = freqs[order]
        if self.levels is not None:
            levels = np.asarray(self.levels, dtype=int).reshape(-1)
            if levels.size != pos.size:
                raise ValueError("one level label per frequency is required")
            self.levels = levels[order]

    def __len__(self):
        return int(self.freqs.shape[0])

    @property
    def positions(self):
        """Flat storage positions in the canonical spectrum."""
        return _positions(self.freqs, self.n, self.dimension)

    @property
    def shape(self):
        return (self.n,) if self.dimension == 1 else (self.n, self.n)

    def mask(self, order="canonical"):
        """Boolean mask of the pattern in ``canonical`` or numpy ``fft`` order."""
        m = np.zeros(self.n ** self.dimension, dtype=bool)
        m[self.positions] = True
        m = m.reshape(self.shape)
        if order == "canonical":
            return m
        if order == "fft":
            return ops.to_fft_order(m)
        raise ValueError("order must be 'canonical' or 'fft'")

    @classmethod
    def from_mask(cls, mask, order="canonical"):
        mask = np.asarray(mask, dtype=bool)
        if order == "fft":
            mask = ops.to_canonical(mask)
        dim = mask.ndim
        grid = full_grid(mask.shape[0], dim)
        return cls(mask.shape[0], dim, grid[mask.ravel()])

    def contains_dc(self):
        if self.dimension == 1:
            return bool(np.any(self.freqs == 0))
        return bool(np.any(np.all(self.freqs == 0, axis=1)))

    def union(self, other):
        if (other.n, other.dimension) != (self.n, self.dimension):
            raise ValueError("patterns live on different grids")
        return SamplingPattern.from_mask(self.mask() | other.mask())

    def restrict(self, spectrum):
        """Values of a canonical-order spectrum at the pattern frequencies."""
        return np.asarray(spectrum).reshape(-1)[self.positions]


@dataclass
class LevelScheme:
    """A partition of the frequency grid into levels with budgets or rates.

    ``levels[k]`` lists the canonical frequencies of level ``k``. Exactly one
    of ``budgets`` (``m_k``, used by :func:`draw_multilevel`) and ``rates``
    (``q_k``, used by :func:`draw_bernoulli`) is normally set; if only
    budgets are given the rates are ``m_k/|Gamma_k|``.
    """

    n: int
    dimension: int
    levels: List[np.ndarray]
    budgets: Optional[Sequence[int]] = None
    rates: Optional[Sequence[float]] = None
    boundaries: Optional[Sequence[int]] = None
    seed: int = 0

    def __post_init__(self):
        shape = (-1,) if self.dimension == 1 else (-1, 2)
        self.levels = [np.asarray(g, dtype=int).reshape(shape) for g in self.levels]
        pos = np.concatenate([_positions(g, self.n, self.dimension) for g in self.levels])
        if pos.size != self.n ** self.dimension or np.unique(pos).size != pos.size:
            raise ValueError("levels must be disjoint and cover the frequency grid")
        if any(g.shape[0] == 0 for g in self.levels):
            raise ValueError("empty level")
        if self.budgets is not None:
            self.budgets = tuple(int(m) for m in self.budgets)
            if len(self.budgets) != len(self.levels):
                raise ValueError("one budget per level is required")
            for m, size in zip(self.budgets, self.sizes):
                if m < 0 or m > size:
                    raise ValueError(f"budget {m} outside 0..{size}")
        if self.rates is not None:
            self.rates = tuple(float(q) for q in self.rates)
            if len(self.rates) != len(self.levels):
                raise ValueError("one rate per level is required")
            if any(not 0.0 <= q <= 1.0 for q in self.rates):
                raise ValueError("rates must lie in [0, 1]")

    @property
    def sizes(self):
        return np.array([g.shape[0] for g in self.levels])

    @property
    def n_levels(self):
        return len(self.levels)

    def level_rates(self):
        if self.rates is not None:
            return np.array(self.rates)
        if self.budgets is not None:
            return np.array(self.budgets) / self.sizes
        raise ValueError("scheme has neither budgets nor rates")

    @property
    def q(self):
        """``min_k q_k``."""
        return float(np.min(self.level_rates()))

    def radii(self):
        """``(M_k^min, M_k^max)`` per level; ``M_k^min`` is floored at 1."""
        out = []
        for g in self.levels:
            r = _radius(g)
            out.append((max(float(r.min()), 1.0), float(r.max())))
        return out

    @classmethod
    def from_bands(cls, n, boundaries, budgets=None, rates=None, seed=0):
        return cls(n, 1, bands_1d(n, boundaries), budgets, rates, tuple(boundaries), seed)

    @classmethod
    def from_annuli(cls, n, radii, budgets=None, rates=None, seed=0):
        return cls(n, 2, annuli_2d(n, radii), budgets, rates, None, seed)


# ------------------------------------------------------------------- levels


def bands_1d(n, boundaries):
    """Frequency bands of a 1D multilevel scheme.

    Level ``k`` holds ``-floor(M_k/2) <= j <= -floor(M_{k-1}/2)-1`` and
    ``ceil(M_{k-1}/2) <= j <= ceil(M_k/2)-1`` (with ``M_0 = 0``), folded onto
    the canonical grid.
    """
    m = [int(v) for v in boundaries]
    if not m or m[-1] != n or m[0] <= 0 or any(b <= a for a, b in zip(m, m[1:])):
        raise ValueError("boundaries must be strictly increasing positive integers ending at N")
    out = []
    prev = 0
    for mk in m:
        neg = np.arange(-(mk // 2), -(prev // 2))
        pos = np.arange(-(-prev // 2), -(-mk // 2))
        band = ops.canonical_frequency(np.concatenate([neg, pos]), n)
        out.append(np.sort(band))
        prev = mk
    return out


def annuli_2d(n, radii):
    """Annular levels ``{m : r_{k-1} <= |m| < r_k}`` of the 2D grid.

    ``r_0 = 0``; the last level also takes every frequency beyond the last
    radius, so the corners are always covered. Empty annuli are dropped.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])) or (radii and radii[0] <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    grid = full_grid(n, 2)
    r = _radius(grid)
    edges = [0.0] + radii[:-1] + [np.inf]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r >= lo) & (r < hi)
        if np.any(sel):
            out.append(grid[sel])
    return out


def inside_out_budgets(sizes, total):
    """Split ``total`` samples across levels ordered from low to high frequency.

    Each level takes ``min(|Gamma_k|, half of what is left)``; the last level
    takes the rest, capped at its size. Low levels therefore saturate first.
    """
    sizes = [int(s) for s in sizes]
    if total < 0 or total > sum(sizes):
        raise ValueError("total must lie between 0 and the grid size")
    budgets, left = [], int(total)
    for k, size in enumerate(sizes):
        take = left if k == len(sizes) - 1 else min(size, left // 2)
        take = min(take, size)
        budgets.append(take)
        left -= take
    # push any overflow from a saturated last level back down the list
    for k in range(len(sizes) - 2, -1, -1):
        if left == 0:
            break
        extra = min(sizes[k] - budgets[k], left)
        budgets[k] += extra
        left -= extra
    return budgets


# -------------------------------------------------------------------- draws


def partial_fisher_yates(rng, size, m):
    """First ``m`` entries of a uniformly random permutation of ``range(size)``."""
    if m > size:
        raise ValueError(f"cannot draw {m} of {size} without replacement")
    perm = np.arange(size)
    for i in range(m):
        j = int(rng.integers(i, size))
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:m]


def draw_multilevel(scheme, seed=None):
    """Draw ``m_k`` frequencies uniformly without replacement from each level."""
    if scheme.budgets is None:
        raise ValueError("multilevel draws need per-level budgets")
    rng = make_rng(scheme.seed if seed is None else seed)
    freqs, labels = [], []
    for k, (g, m) in enumerate(zip(scheme.levels, scheme.budgets)):
        idx = partial_fisher_yates(rng, g.shape[0], m)
        freqs.append(g[idx])
        labels.append(np.full(m, k))
    return SamplingPattern(scheme.n, scheme.dimension, np.concatenate(freqs), np.concatenate(labels))


def draw_bernoulli(scheme, seed=None, rates=None):
    """Include each frequency of level ``k`` independently with probability ``q_k``."""
    q = np.asarray(scheme.level_rates() if rates is None else rates, dtype=float)
    if q.shape != (scheme.n_levels,) or np.any((q < 0) | (q > 1)):
        raise ValueError("need one rate in [0, 1] per level")
    rng = make_rng(scheme.seed if seed is None else seed)
    freqs, labels = [], []
    for k, g in enumerate(scheme.levels):
        keep = rng.random(g.shape[0]) < q[k]
        freqs.append(g[keep])
        labels.append(np.full(int(keep.sum()), k))
    return SamplingPattern(scheme.n, scheme.dimension, np.concatenate(freqs), np.concatenate(labels))


def _dc(dim):
    return np.zeros(1, dtype=int) if dim == 1 else np.zeros((1, 2), dtype=int)


def uniform_plus_dc(n, m, seed=0, dim=1):
    """``m`` uniform draws from the whole grid, plus the zero frequency.

    The draws may already hit DC, so ``|Omega|`` is ``m`` or ``m + 1``.
    """
    grid = full_grid(n, dim)
    if m < 0 or m >= grid.shape[0]:
        raise ValueError("m must satisfy 0 <= m < grid size")
    rng = make_rng(seed)
    picked = grid[partial_fisher_yates(rng, grid.shape[0], m)]
    pat = SamplingPattern(n, dim, picked) if m else SamplingPattern(n, dim, _dc(dim))
    return pat.union(SamplingPattern(n, dim, _dc(dim)))


def lowpass_block(n, n_low, dim=1):
    """Frequencies ``-floor(n_low/2) .. ceil(n_low/2)-1`` per axis."""
    if not 0 <= n_low <= n:
        raise ValueError("n_low must lie in 0..N")
    band = ops.canonical_frequency(np.arange(-(n_low // 2), -(-n_low // 2)), n)
    if dim == 1:
        return np.sort(band)
    b1, b2 = np.meshgrid(band, band, indexing="ij")
    return np.stack([b1.ravel(), b2.ravel()], axis=1)


def lowpass_plus_uniform(n, n_low, fraction, seed=0, dim=1):
    """Low-pass core plus a uniform random share of the remaining grid.

    Parameters
    ----------
    n_low : int
        Core size: ``n_low`` frequencies in 1D, an ``n_low x n_low`` block in 2D.
    fraction : float
        Share of the non-core frequencies drawn uniformly; the count is
        ``round(fraction * remaining)``.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    core = SamplingPattern(n, dim, lowpass_block(n, n_low, dim))
    rest_mask = ~core.mask().ravel()
    rest = full_grid(n, dim)[rest_mask]
    count = int(round(fraction * rest.shape[0]))
    rng = make_rng(seed)
    extra = rest[partial_fisher_yates(rng, rest.shape[0], count)]
    if count == 0:
        return core
    return core.union(SamplingPattern(n, dim, extra))


def _round_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def radial_lines(n, n_lines, seed=0, offset=None):
    """Union of ``n_lines`` lines through DC at equally spaced angles.

    Line ``l`` has angle ``offset + pi*l/n_lines``; ``offset`` is drawn from
    ``[0, pi/n_lines)`` with the seed unless given. Each line is rasterized by
    stepping the dominant axis over ``-floor(N/2) .. floor(N/2)`` and rounding
    the other coordinate half away from zero, so the set is symmetric under
    ``k -> -k`` once ``-N/2`` is folded onto ``+N/2``.
    """
    if n_lines < 1:
        raise ValueError("need at least one line")
    if offset is None:
        offset = make_rng(seed).random() * np.pi / n_lines
    half = n // 2
    t = np.arange(-half, half + 1)
    pts = []
    for l in range(n_lines):
        th = offset + np.pi * l / n_lines
        c, s = np.cos(th), np.sin(th)
        if abs(c) >= abs(s):
            k1, k2 = t, _round_away(t * s / c)
        else:
            k1, k2 = _round_away(t * c / s), t
        keep = (np.abs(k1) <= half) & (np.abs(k2) <= half)
        pts.append(np.stack([k1[keep], k2[keep]], axis=1).astype(int))
    pts = ops.canonical_frequency(np.concatenate(pts), n)
    pos = np.unique(_positions(pts, n, 2))
    return SamplingPattern(n, 2, full_grid(n, 2)[pos])


def variable_density(n, fraction, exponent=2.0, n_low=0, seed=0, dim=2):
    """Bernoulli pattern with inclusion probability ``min(1, c (1+|k|)^-a)``.

    ``c`` is chosen by bisection so the expected size is
    ``fraction * N^dim``; a low-pass core of size ``n_low`` is always kept.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    grid = full_grid(n, dim)
    base = (1.0 + _radius(grid)) ** (-float(exponent))
    target = fraction * grid.shape[0]
    lo, hi = 0.0, 1.0
    while np.minimum(1.0, hi * base).sum() < target:
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.minimum(1.0, mid * base).sum() < target:
            lo = mid
        else:
            hi = mid
    prob = np.minimum(1.0, hi * base)
    keep = make_rng(seed).random(grid.shape[0]) < prob
    pat = SamplingPattern(n, dim, grid[keep])
    if n_low:
        pat = pat.union(SamplingPattern(n, dim, lowpass_block(n, n_low, dim)))
    return pat


# --------------------------------------------------------------- conditions


def log_factor(s, eps, q, n, dim=1, b=1.0):
    """``(ln(s/eps) + 1) * ln(N^{3/2} sqrt(s) / q)`` in 1D; the 2D version uses
    ``N^2 B sqrt(s) / q`` inside the second logarithm."""
    if q <= 0:
        raise ValueError("q must be positive")
    inner = n ** 1.5 if dim == 1 else n ** 2 * b
    return (np.log(s / eps) + 1.0) * np.log(inner * np.sqrt(s) / q)


@dataclass
class LevelCondition:
    level: int
    size: int
    budget: Optional[int]
    rhs: float
    required: float
    feasible: bool
    satisfied: Optional[bool]


@dataclass
class ConditionReport:
    """Per-level evaluation of the sample-count conditions.

    ``rhs`` is the bracket of condition (i), ``required`` is
    ``C * log_factor * rhs * |Gamma_k|``. Condition (ii) is reported through
    ``ii_value``: the largest value of its sum over allocations
    ``{s_k}`` with ``sum s_k <= F``, evaluated at ``m_hat_k = m_k/(C L)``.
    """

    dimension: int
    s: float
    fineness: float
    eps: float
    q: float
    C: float
    log_factor: float
    levels: List[LevelCondition]
    ii_value: Optional[float] = None
    ii_allocations: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return all(lv.feasible for lv in self.levels)

    @property
    def ii_satisfied(self):
        return None if self.ii_value is None else bool(self.ii_value <= 1.0)


def _condition_ii(sizes, m_hat, coef_s, const, fine):
    # the sum is affine in the allocation; with sum s_k <= F the maximum sits
    # at a vertex: all budget on the level with the largest coefficient
    factor = sizes / m_hat - 1.0
    slope = factor * coef_s
    base = float(np.sum(factor * const))
    vertex = base + fine * max(0.0, float(np.max(slope)))
    spread = base + float(np.sum(slope * fine / len(sizes)))
    # water-filling: budget spread in proportion to the positive slopes
    pos = np.clip(slope, 0, None)
    water = base + (fine * float(np.sum(pos * pos)) / float(np.sum(pos)) if pos.sum() > 0 else 0.0)
    extremes = {f"all_in_level_{k}": base + fine * float(slope[k]) for k in range(len(sizes))}
    allocations = {"vertex_max": vertex, "uniform": spread, "water_filling": water, **extremes}
    return vertex, allocations


def required_rates(struct, scheme, eps, C=1.0, q=None, c=None, b=None):
    """Evaluate the per-level sample-count conditions for a structure.

    Parameters
    ----------
    struct : JumpSet or ComponentPartition
    scheme : LevelScheme
        Levels, with budgets when condition (ii) should be evaluated. In 1D
        the scheme must come from :meth:`LevelScheme.from_bands`.
    eps : float
        Failure probability.
    C : float
        Constant standing in for the implicit one in the ``>~`` relations.
    q : float, optional
        ``min_k m_k/|Gamma_k|``; taken from the budgets when present, else 1.
    c : sequence of float, optional
        2D level constants ``c_k``; defaults to 1 per level, which is their
        lower bound. :func:`tvcs.analysis.level_constants` computes them.
    b : float, optional
        2D ``||(P_Lambda D)^+||_{1->2}``; computed from the partition when omitted.
    """
    if struct.n_jumps == 0 and isinstance(struct, st.ComponentPartition):
        raise ValueError("structure has no gradient support")
    n = scheme.n
    sizes = scheme.sizes.astype(float)
    budgets = None if scheme.budgets is None else np.array(scheme.budgets, dtype=float)
    if q is None:
        q = float(np.min(budgets / sizes)) if budgets is not None else 1.0
    s = st.active_sparsity(struct, 1.0)
    fine = st.fineness(struct)
    r = scheme.n_levels
    if scheme.dimension == 1:
        if scheme.boundaries is None:
            raise ValueError("1D conditions need band boundaries")
        bnd = [0] + list(scheme.boundaries)
        lf = log_factor(s, eps, q, n)
        rhs, coef_s, const = [], [], []
        for k in range(1, r + 1):
            lo = max(bnd[k - 1], 1)
            rhs.append(st.active_sparsity(struct, lo) / lo + bnd[k] / lo * (s - 1) / n)
            coef_s.append(n / max(bnd[k - 1] ** 2, 1))
            const.append((s - 1) / n * (bnd[k] / lo) ** 2)
    else:
        if b is None:
            from .analysis import pinv_norm_1to2_2d
            b = pinv_norm_1to2_2d(struct)
        lf = log_factor(s, eps, q, n, dim=2, b=b)
        c = np.ones(r) if c is None else np.asarray(c, dtype=float)
        rhs, coef_s, const = [], [], []
        for k, (mmin, mmax) in enumerate(scheme.radii()):
            rhs.append(c[k] * (st.active_sparsity(struct, mmin) / (n * mmin) + s / n**2 * mmax / mmin))
            coef_s.append(c[k] ** 2 / mmin**2)
            const.append(c[k] ** 2 * s / n**2 * (mmax / mmin) ** 2)
    rhs = np.array(rhs)
    levels = []
    for k in range(r):
        req = C * lf * rhs[k] * sizes[k]
        m_k = None if budgets is None else int(budgets[k])
        levels.append(LevelCondition(k, int(sizes[k]), m_k, float(rhs[k]), float(req),
                                     bool(req <= sizes[k]), None if m_k is None else bool(m_k >= req)))
    report = ConditionReport(scheme.dimension, float(s), fine, float(eps), float(q), float(C), float(lf), levels)
    if budgets is not None and np.all(budgets > 0):
        m_hat = budgets / (C * lf)
        report.ii_value, report.ii_allocations = _condition_ii(
            sizes, m_hat, np.array(coef_s), np.array(const), fine)
    return report

"""Synthetic test assets.

``blocky1d``/``spiky1d`` share a jump count but differ in how fine the blocks
are; ``nested_squares``/``thin_lines`` share the number of pixels with a
nonzero gradient but differ in fineness. ``shepp_logan`` rasterizes the
modified 10-ellipse head phantom.
"""
import numpy as np

from . import ops
from .sampling import make_rng

ASSET_KINDS = ("blocky1d", "spiky1d", "nested_squares", "thin_lines", "shepp_logan")
N_JUMPS_1D = 16

# intensity, semi-axis a (x), semi-axis b (y), centre x, centre y, angle (deg)
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def _block_values(rng, n_blocks, min_step=0.2):
    # neighbouring blocks differ by at least min_step so every jump is real
    vals = [rng.uniform(0.0, 1.0)]
    for _ in range(n_blocks - 1):
        while True:
            v = rng.uniform(0.0, 1.0)
            if abs(v - vals[-1]) >= min_step:
                break
        vals.append(v)
    return np.array(vals)


def blocky_1d(n, seed=0, n_jumps=N_JUMPS_1D):
    """Piecewise-constant signal with ``n_jumps`` jumps and blocks at least
    ``ceil(N/20)`` wide."""
    min_w = int(np.ceil(n / 20))
    blocks = n_jumps + 1
    if blocks * min_w > n:
        raise ValueError(f"N={n} too small for {n_jumps} jumps with width >= {min_w}")
    rng = make_rng(seed)
    extra = rng.multinomial(n - blocks * min_w, np.full(blocks, 1.0 / blocks))
    widths = min_w + extra
    return np.repeat(_block_values(rng, blocks), widths)


def spiky_1d(n, seed=0, n_jumps=N_JUMPS_1D):
    """Zero background with a cluster of ``n_jumps - 1`` narrow blocks
    (widths 1 or 2) starting at a random position."""
    rng = make_rng(seed)
    inner = rng.integers(1, 3, size=n_jumps - 1)
    span = int(inner.sum())
    if span + 2 > n:
        raise ValueError(f"N={n} too small for {n_jumps} clustered jumps")
    start = int(rng.integers(1, n - span))
    x = np.zeros(n)
    vals = _block_values(rng, n_jumps + 1)
    vals[0] = vals[-1] = 0.0
    # alternate high and low levels so the cluster oscillates; every level
    # stays at least 0.2 away from its neighbours and from the background
    for j in range(1, n_jumps):
        vals[j] = rng.uniform(0.65, 1.0) if j % 2 else rng.uniform(0.2, 0.4)
    pos = start
    for j, w in enumerate(inner, start=1):
        x[pos:pos + w] = vals[j]
        pos += w
    return x


def gradient_support(x):
    """Number of pixels with a nonzero forward difference in either direction."""
    g = ops.grad_2d(x)
    return int(np.count_nonzero((np.abs(g.d1) > 0) | (np.abs(g.d2) > 0)))


def nested_squares(n, seed=0, n_squares=4):
    """Concentric axis-aligned squares with distinct intensities."""
    if n < 16:
        raise ValueError("N must be at least 16")
    rng = make_rng(seed)
    x = np.zeros((n, n))
    vals = _block_values(rng, n_squares + 1)
    centre = n // 2 + int(rng.integers(-n // 16, n // 16 + 1))
    for i in range(n_squares):
        half = int(round((n * 0.4) * (n_squares - i) / n_squares))
        half = max(half, 1)
        lo, hi = max(centre - half, 1), min(centre + half, n - 1)
        x[lo:hi, lo:hi] = vals[i + 1]
    return x


def _line_count(length):
    # isolated horizontal line away from the border: the line itself, the row
    # above it and the pixel left of its start
    return 2 * length + 1


def thin_lines(n, seed=0, target=None):
    """One-pixel-wide horizontal lines whose gradient support equals ``target``
    (default: that of ``nested_squares(n, seed)``)."""
    if target is None:
        target = gradient_support(nested_squares(n, seed))
    rng = make_rng(seed + 1)
    x = np.zeros((n, n))
    rows = list(range(2, n - 2, 3))
    rng.shuffle(rows)
    max_len = n - 4
    remaining = target
    for r in rows:
        if remaining <= 0:
            break
        if remaining > _line_count(max_len) + 3:
            length = int(rng.integers(max_len // 2, max_len + 1))
            if remaining - _line_count(length) < 3:
                length = max_len // 2
        else:
            if remaining % 2 == 1:
                length = (remaining - 1) // 2
            else:
                # an even remainder needs one more line; peel off a short one
                length = 1
        start = int(rng.integers(2, n - 1 - length)) if n - 1 - length > 2 else 2
        x[r, start:start + length] = rng.uniform(0.3, 1.0)
        remaining -= _line_count(length)
    if remaining != 0 or gradient_support(x) != target:
        raise ValueError(f"could not match gradient support {target} at N={n}")
    return x


def shepp_logan(n):
    """Modified Shepp-Logan phantom on ``[-1, 1]^2`` sampled at pixel centres.

    Row 0 is the top (``y = 1``). Intensities are rounded to 12 decimals so
    overlapping ellipses give exactly constant regions, then clipped to [0, 1].
    """
    if n < 16:
        raise ValueError("N must be at least 16")
    c = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    X, Y = np.meshgrid(c, -c)
    img = np.zeros((n, n))
    for val, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        t = np.deg2rad(phi)
        xr = (X - x0) * np.cos(t) + (Y - y0) * np.sin(t)
        yr = -(X - x0) * np.sin(t) + (Y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    return np.clip(np.round(img, 12), 0.0, 1.0)


def gen_asset(kind, n, seed=0):
    """Generate a named asset of size ``N`` (``N x N`` for images)."""
    if n < 16:
        raise ValueError("N must be at least 16")
    if kind == "blocky1d":
        return blocky_1d(n, seed)
    if kind == "spiky1d":
        return spiky_1d(n, seed)
    if kind == "nested_squares":
        return nested_squares(n, seed)
    if kind == "thin_lines":
        return thin_lines(n, seed)
    if kind == "shepp_logan":
        return shepp_logan(n)
    raise ValueError(f"unknown asset kind {kind!r}; choose from {ASSET_KINDS}")

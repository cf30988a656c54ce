"""Dual-certificate machinery: the W-frame and weights, coherence reports,
identifiability and balancing residuals, the golfing construction and the
error-bound evaluator.

Dense matrices are only formed at desk scale. In 2D the pseudoinverse of the
restricted gradient is applied through the graph Laplacian of the
flat-pixel graph: with ``B`` the incidence matrix of the edges leaving
pixels of ``Lambda`` and ``L = B^T B``, ``(P_Lambda D)^+ = L^+ B^T``.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.linalg import splu

from . import ops, structure as st
from .sampling import LevelScheme, SamplingPattern, full_grid, make_rng

IDENTIFIABILITY_LIMIT = 1.0 / 16.0


# ===================================================================== frame


@dataclass
class WFrame:
    """Orthonormal basis of ``W_Lambda`` plus the weights ``lam``.

    The first ``n_blocks`` columns are normalized indicators of the blocks
    (1D) or components (2D); when ``xi`` is nonzero one more column
    ``xi/||xi||`` follows.

    Attributes
    ----------
    labels : ndarray of int
        Block/component index per sample or pixel.
    sizes : ndarray
        Block widths or component areas.
    xi : ndarray
        ``D* P_{Lambda^c} sgn`` minus its projection onto the indicators.
    lam : ndarray
        One weight per column.
    """

    dimension: int
    n: int
    labels: np.ndarray
    sizes: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    has_xi: bool

    @property
    def n_blocks(self):
        return int(self.sizes.size)

    @property
    def n_cols(self):
        return self.n_blocks + int(self.has_xi)

    @property
    def xi_norm(self):
        return float(np.linalg.norm(self.xi))

    @property
    def shape(self):
        return self.labels.shape

    def apply(self, alpha):
        """``W alpha``."""
        alpha = np.asarray(alpha, dtype=np.complex128)
        out = (alpha[: self.n_blocks] / np.sqrt(self.sizes))[self.labels]
        if self.has_xi:
            out = out + alpha[self.n_blocks] * self.xi / self.xi_norm
        return out

    def adjoint(self, v):
        """``W* v``."""
        v = np.asarray(v, dtype=np.complex128)
        sums = np.bincount(self.labels.ravel(), weights=v.real.ravel(), minlength=self.n_blocks) \
            + 1j * np.bincount(self.labels.ravel(), weights=v.imag.ravel(), minlength=self.n_blocks)
        out = sums / np.sqrt(self.sizes)
        if self.has_xi:
            out = np.append(out, np.vdot(self.xi / self.xi_norm, v))
        return out

    def project(self, v):
        """``Q_W v``."""
        return self.apply(self.adjoint(v))

    def project_perp(self, v):
        return np.asarray(v) - self.project(v)

    def matrix(self):
        """Dense ``N^d x n_cols`` matrix with columns over flattened samples."""
        eye = np.eye(self.n_cols)
        return np.stack([self.apply(e).ravel() for e in eye], axis=1)

    def drop_xi(self):
        """The frame spanned by the indicators only."""
        return WFrame(self.dimension, self.n, self.labels, self.sizes, self.xi,
                      self.lam[: self.n_blocks], False)


def jump_signs(struct, x):
    """``P_{Lambda^c} sgn(Dx)``: the 1D sign on jump rows, or the isotropic
    sign field zeroed on the entries in ``Lambda``."""
    if isinstance(struct, st.JumpSet):
        z = ops.sgn(ops.diff_1d(x))
        z[~struct.jump_mask()] = 0
        return z
    sigma = ops.iso_sign(ops.grad_2d(x))
    down, right = struct.edge_masks()
    return ops.GradientField(np.where(down, 0, sigma.d1), np.where(right, 0, sigma.d2))


def sign_divergence(struct, x):
    """``zeta = D* P_{Lambda^c} sgn(Dx)``."""
    z = jump_signs(struct, x)
    if isinstance(struct, st.JumpSet):
        return ops.diff_1d_adjoint(z)
    return ops.grad_2d_adjoint(z)


def build_wframe(struct, x, tol=1e-12):
    """Construct the frame, ``xi`` and the weights for a structure and signal.

    1D weights are ``sqrt(w_l)/2`` on blocks; 2D weights are
    ``sqrt(|I_j|)/Per(I_j)``. The ``xi`` column gets weight ``1/||xi||``.

    Raises
    ------
    ValueError
        In 2D when ``Lambda^c`` is empty (every perimeter would be zero).
    """
    x = np.asarray(x)
    if isinstance(struct, st.JumpSet):
        if x.shape != (struct.n,):
            raise ops.DimensionError("signal length does not match the structure")
        labels = struct.block_labels()
        sizes = struct.widths.astype(float)
        lam = np.sqrt(sizes) / 2.0
        dim = 1
    elif isinstance(struct, st.ComponentPartition):
        if x.shape != (struct.n, struct.n):
            raise ops.DimensionError("image shape does not match the structure")
        if struct.n_jumps == 0:
            raise ValueError("the frame needs a nonempty Lambda^c in 2D")
        labels = struct.labels
        sizes = struct.areas.astype(float)
        lam = np.sqrt(sizes) / struct.perimeters
        dim = 2
    else:
        raise TypeError("structure must be a JumpSet or ComponentPartition")
    zeta = sign_divergence(struct, x)
    means = np.bincount(labels.ravel(), weights=zeta.real.ravel(), minlength=sizes.size) \
        + 1j * np.bincount(labels.ravel(), weights=zeta.imag.ravel(), minlength=sizes.size)
    xi = zeta - (means / sizes)[labels]
    scale = max(1.0, float(np.linalg.norm(zeta)))
    has_xi = bool(np.linalg.norm(xi) > tol * scale)
    if not has_xi:
        xi = np.zeros_like(xi)
    else:
        lam = np.append(lam, 1.0 / np.linalg.norm(xi))
    return WFrame(dim, struct.n, labels, sizes, xi, lam, has_xi)


def xi_block_norms(frame):
    """``||P_{block} xi||_2`` for every block or component."""
    sq = np.bincount(frame.labels.ravel(), weights=np.abs(frame.xi.ravel()) ** 2,
                     minlength=frame.n_blocks)
    return np.sqrt(sq)


def weighted_sign_coefficients(frame, struct, x):
    """``lam o W* D* P_{Lambda^c} sgn(Dx)``; its sup norm is at most 1."""
    return frame.lam * frame.adjoint(sign_divergence(struct, x))


# ============================================================= 2D graph ops


class FlatGraph:
    """Graph on the pixels with one edge per gradient entry in ``Lambda``, and
    the pseudoinverse of the restricted gradient.

    Edge ``e`` corresponds to gradient entry ``(axis, i, j)``: ``axis`` 0 is
    ``d1`` (down), 1 is ``d2`` (right).
    """

    def __init__(self, partition):
        n = partition.n
        self.n = n
        down, right = partition.edge_masks()
        idx = np.arange(n * n).reshape(n, n)
        tails = np.concatenate([idx[down], idx[right]])
        heads = np.concatenate([idx[down] + n, idx[right] + 1])
        self.edge_axis = np.concatenate([np.zeros(down.sum(), int), np.ones(right.sum(), int)])
        self.edge_pixel = tails
        self.n_edges = tails.size
        e = np.arange(self.n_edges)
        self.B = sp.csr_matrix(
            (np.concatenate([np.ones(self.n_edges), -np.ones(self.n_edges)]),
             (np.concatenate([e, e]), np.concatenate([heads, tails]))),
            shape=(self.n_edges, n * n))
        self.labels = partition.labels.ravel()
        self.n_comp = partition.n_components
        self.sizes = partition.areas.astype(float)
        lap = (self.B.T @ self.B).tocsr()
        # ground the first pixel of every component so the system is regular
        first = np.full(self.n_comp, -1)
        for p in range(n * n - 1, -1, -1):
            first[self.labels[p]] = p
        self.ground = first
        ground_mask = np.zeros(n * n, dtype=bool)
        ground_mask[first] = True
        lap = lap.tolil()
        for g in first:
            lap.rows[g] = [g]
            lap.data[g] = [1.0]
        lap = lap.tocsc()
        keep = sp.diags((~ground_mask).astype(float))
        lap = (lap @ keep + sp.diags(ground_mask.astype(float))).tocsc()
        self._ground_mask = ground_mask
        self._lu = splu(lap)

    def _comp_mean(self, v):
        s = np.stack([np.bincount(self.labels, weights=v[:, c], minlength=self.n_comp)
                      for c in range(v.shape[1])], axis=1)
        return s / self.sizes[:, None]

    def lap_pinv(self, v):
        """``L^+ v`` for real ``v`` of shape ``(N^2, m)``."""
        v = v - self._comp_mean(v)[self.labels]
        v[self._ground_mask] = 0.0
        z = self._lu.solve(np.ascontiguousarray(v))
        return z - self._comp_mean(z)[self.labels]

    def lap_pinv_complex(self, v):
        v = np.asarray(v)
        if v.ndim == 1:
            return self.lap_pinv_complex(v[:, None])[:, 0]
        if np.iscomplexobj(v):
            return self.lap_pinv(v.real.copy()) + 1j * self.lap_pinv(v.imag.copy())
        return self.lap_pinv(v.astype(float))

    def pinv(self, g_edges):
        """``(P_Lambda D)^+`` applied to edge coefficients; returns pixels."""
        return self.lap_pinv_complex(self.B.T @ g_edges)

    def pinv_adjoint(self, v):
        """``(D* P_Lambda)^+`` applied to a flattened image; returns edges."""
        return self.B @ self.lap_pinv_complex(v)

    def edges_to_field(self, g_edges):
        n = self.n
        d1 = np.zeros(n * n, dtype=np.complex128)
        d2 = np.zeros(n * n, dtype=np.complex128)
        a = self.edge_axis == 0
        d1[self.edge_pixel[a]] = g_edges[a]
        d2[self.edge_pixel[~a]] = g_edges[~a]
        return ops.GradientField(d1.reshape(n, n), d2.reshape(n, n))

    def column_norms(self, chunk=512):
        """2-norms of the columns of ``L^+ B^T`` (one per edge)."""
        out = np.empty(self.n_edges)
        bt = self.B.T.tocsc()
        for a in range(0, self.n_edges, chunk):
            cols = bt[:, a:a + chunk].toarray()
            out[a:a + chunk] = np.linalg.norm(self.lap_pinv(cols), axis=0)
        return out


def pinv_norm_1to2_2d(partition):
    """``B = ||(P_Lambda D)^+||_{1->2}`` for a 2D partition."""
    g = FlatGraph(partition)
    return float(g.column_norms().max()) if g.n_edges else 0.0


def pinv_norm_1to2(struct):
    if isinstance(struct, st.JumpSet):
        return ops.pinv_restricted_norm_1to2(struct.jumps, struct.n)
    return pinv_norm_1to2_2d(struct)


# ================================================================ coherence


def coherence(block):
    """Largest absolute entry of a matrix block."""
    block = np.asarray(block)
    if block.size == 0:
        raise ValueError("empty block")
    return float(np.max(np.abs(block)))


@dataclass
class CoherenceReport:
    """Entry-magnitude profiles of ``U = A Q_W^perp (P_Lambda D)^+``.

    ``row_max[k]`` is ``max_j |U_{k,j}|`` over canonical frequencies (same
    shape as a spectrum); ``col_max`` is ``max_k |U_{k,j}|`` per column.
    ``level_mu`` holds ``mu_k`` for each level and ``level_c`` the 2D
    constants ``c_k`` when levels are given.
    """

    dimension: int
    n: int
    row_max: np.ndarray
    col_max: np.ndarray
    pinv_norm: float
    level_mu: Optional[List[float]] = None
    level_c: Optional[List[float]] = None
    sign_ratio: Optional[float] = None

    def decay_violations(self, const=2.0):
        """Frequencies with ``row_max > const/|k|`` (``k != 0``)."""
        grid = full_grid(self.n, self.dimension)
        r = np.abs(grid) if self.dimension == 1 else np.hypot(grid[:, 0], grid[:, 1])
        rm = self.row_max.ravel()
        nz = r > 0
        bad = nz.copy()
        bad[nz] = rm[nz] > const / r[nz]
        return grid[bad]

    def max_decay_ratio(self):
        """``max_{k != 0} |k| * row_max[k]``."""
        grid = full_grid(self.n, self.dimension)
        r = np.abs(grid) if self.dimension == 1 else np.hypot(grid[:, 0], grid[:, 1])
        nz = r > 0
        return float(np.max(r[nz] * self.row_max.ravel()[nz]))


def incoherence_matrix_1d(struct, x, frame=None):
    """Dense ``U = A Q_W^perp (P_Lambda D)^+`` (rows canonical frequencies)."""
    frame = frame or build_wframe(struct, x)
    P = ops.pinv_restricted_dense(struct.jumps, struct.n).astype(np.complex128)
    Wm = frame.matrix()
    Qp = P - Wm @ (Wm.conj().T @ P)
    return ops.dft_matrix(struct.n) @ Qp


def _level_rows(levels, n, dim):
    pos = []
    for g in levels:
        g = np.asarray(g)
        if dim == 1:
            pos.append(ops.freq_to_pos(g, n))
        else:
            p = ops.freq_to_pos(g, n)
            pos.append(p[:, 0] * n + p[:, 1])
    return pos


def incoherence_report(struct, x, levels=None, frame=None, chunk=256):
    """Row and column maxima of ``U``, the norm ``B`` and per-level values.

    Parameters
    ----------
    levels : LevelScheme or list of frequency arrays, optional
        When given, ``level_mu[k]`` is the coherence of the rows in level
        ``k``; in 2D ``level_c[k] = max(1, ||D*s||_1/||D*s||_2^2, mu_k M_k^min)``.
    chunk : int
        Frequencies per sparse solve batch in 2D.
    """
    frame = frame or build_wframe(struct, x)
    level_list = levels.levels if isinstance(levels, LevelScheme) else levels
    if isinstance(struct, st.JumpSet):
        U = incoherence_matrix_1d(struct, x, frame)
        absU = np.abs(U)
        report = CoherenceReport(1, struct.n, absU.max(axis=1), absU.max(axis=0),
                                 ops.pinv_restricted_norm_1to2(struct.jumps, struct.n))
        if level_list is not None:
            rows = _level_rows(level_list, struct.n, 1)
            report.level_mu = [float(report.row_max[r].max()) for r in rows]
        return report
    report = _incoherence_2d(struct, x, frame, chunk)
    if level_list is not None:
        rows = _level_rows(level_list, struct.n, 2)
        rm = report.row_max.ravel()
        report.level_mu = [float(rm[r].max()) for r in rows]
        zeta = sign_divergence(struct, x)
        ratio = float(np.sum(np.abs(zeta)) / np.sum(np.abs(zeta) ** 2))
        report.sign_ratio = ratio
        report.level_c = []
        for mu_k, g in zip(report.level_mu, level_list):
            g = np.asarray(g)
            mmin = max(float(np.hypot(g[:, 0], g[:, 1]).min()), 1.0)
            report.level_c.append(max(1.0, ratio, mu_k * mmin))
    return report


def level_constants(struct, x, scheme):
    """2D level constants ``c_k`` for :func:`tvcs.sampling.required_rates`."""
    return incoherence_report(struct, x, scheme).level_c


def _incoherence_2d(part, x, frame, chunk):
    n = part.n
    g = FlatGraph(part)
    grid = full_grid(n, 2)
    npix = n * n
    jj = np.arange(n)
    ii = np.arange(n)
    f = (frame.xi / frame.xi_norm).ravel() if frame.has_xi else np.zeros(npix)
    # rank-one correction from the xi column: L^+ annihilates the indicators
    corr_vec = g.B @ g.lap_pinv_complex(f)
    real_input = not np.iscomplexobj(f) or np.allclose(np.imag(f), 0)
    # rows k and -k are complex conjugates when f is real, so only half is solved
    pos = np.arange(npix)
    if real_input:
        neg = ops.canonical_frequency(-grid, n)
        p_neg = ops.freq_to_pos(neg, n)
        neg_pos = p_neg[:, 0] * n + p_neg[:, 1]
        todo = pos[pos <= neg_pos]
    else:
        neg_pos = None
        todo = pos
    row_max = np.zeros(npix)
    col_max = np.zeros(g.n_edges)
    col_sq = np.zeros(g.n_edges)
    for a in range(0, todo.size, chunk):
        sel = todo[a:a + chunk]
        k = grid[sel]
        # row k of A as a column vector over pixels (row-major)
        ph1 = np.exp(2j * np.pi * np.outer(ii, k[:, 0]) / n)
        ph2 = np.exp(2j * np.pi * np.outer(jj, k[:, 1]) / n)
        V = (ph1[:, None, :] * ph2[None, :, :]).reshape(npix, -1) / n
        rows = (g.B @ g.lap_pinv_complex(V)).T
        coef = V.T @ np.conj(f)
        rows = rows - np.outer(coef, corr_vec)
        # Parseval accumulates column norms of L^+ B^T from the uncorrected rows
        raw = np.abs(rows + np.outer(coef, corr_vec)) ** 2
        mag = np.abs(rows)
        rmax = mag.max(axis=1) if g.n_edges else np.zeros(sel.size)
        row_max[sel] = rmax
        col_max = np.maximum(col_max, mag.max(axis=0)) if g.n_edges else col_max
        if real_input:
            twin = neg_pos[sel]
            row_max[twin] = rmax
            weight = np.where(twin == sel, 1.0, 2.0)
            col_sq += (weight[:, None] * raw).sum(axis=0)
        else:
            col_sq += raw.sum(axis=0)
    field_max = g.edges_to_field(col_max)
    pinv_norm = float(np.sqrt(col_sq.max())) if g.n_edges else 0.0
    report = CoherenceReport(2, n, row_max.reshape(n, n),
                             np.stack([np.abs(field_max.d1), np.abs(field_max.d2)]), pinv_norm)
    return report


# ------------------------------------------------- incoherence lemma checks


def lemma_bounds_1d(struct, x, frame=None):
    """Worst ratios of entry magnitude to the 1D incoherence bounds.

    Returns a dict with

    * ``frame_decay``: ``|<A W e_m, e_k>| / min(sqrt(w/N), sqrt(N)/(|k| sqrt(w)))``
      over blocks ``m`` (any ``k``);
    * ``pinv_decay``: ``|<A (P D)^+ e_j, e_k>| / (sqrt(N)/|k|)``, ``k != 0``;
    * ``projected_pinv``: ``sqrt(N) * |(A Q_W (P D)^+)_{k,j}|``.

    The proof constants are 2, sqrt(2) and 24.
    """
    n = struct.n
    frame = frame or build_wframe(struct, x)
    A = ops.dft_matrix(n)
    k = np.abs(ops.freq_grid(n)).astype(float)
    w = frame.sizes
    AW = A @ frame.matrix()[:, : frame.n_blocks]
    with np.errstate(divide="ignore"):
        second = np.sqrt(n) / (k[:, None] * np.sqrt(w)[None, :])
    bound_i = np.minimum(np.sqrt(w / n)[None, :], second)
    r_i = float(np.max(np.abs(AW) / bound_i))
    P = ops.pinv_restricted_dense(struct.jumps, n)
    AP = A @ P
    nz = k > 0
    r_ii = float(np.max(np.abs(AP[nz]) * (k[nz, None] / np.sqrt(n)))) if P.size else 0.0
    Wm = frame.matrix()
    AQP = A @ (Wm @ (Wm.conj().T @ P))
    r_iii = float(np.max(np.abs(AQP)) * np.sqrt(n)) if P.size else 0.0
    return {"frame_decay": r_i, "pinv_decay": r_ii, "projected_pinv": r_iii}


def lemma_bounds_2d(part):
    """Worst ratio of ``|(A f_j)_k|`` to ``min(Per/(|k| sqrt|I|), sqrt|I|/N)``."""
    n = part.n
    grid = full_grid(n, 2)
    r = np.hypot(grid[:, 0], grid[:, 1]).reshape(n, n)
    worst = 0.0
    for j in range(part.n_components):
        f = (part.labels == j) / np.sqrt(part.areas[j])
        af = np.abs(ops.dft(f))
        area, per = part.areas[j], part.perimeters[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            first = np.where(r > 0, per / (r * np.sqrt(area)), np.inf)
        bound = np.minimum(first, np.sqrt(area) / n)
        worst = max(worst, float(np.max(af / bound)))
    return worst


# =========================================================== identifiability


def _null_space_operator(struct):
    """Real sparse matrix of ``D* P_Lambda`` on the Lambda-edge coordinates."""
    if isinstance(struct, st.JumpSet):
        keep = ~struct.jump_mask()
        Dt = sp.csr_matrix(ops.diff_matrix(struct.n).T)
        return Dt[:, np.nonzero(keep)[0]]
    return FlatGraph(struct).B.T.tocsr()


def _pinv_adjoint_coeffs(struct, v):
    """``(D* P_Lambda)^+ v`` restricted to the Lambda rows/edges."""
    if isinstance(struct, st.JumpSet):
        P = ops.pinv_restricted_dense(struct.jumps, struct.n)
        g = P.T @ v
        return g[~struct.jump_mask()]
    return FlatGraph(struct).pinv_adjoint(np.asarray(v).ravel())


def min_sup_over_null(g, M, n_dirs=64):
    """``min_u ||g - u||_inf`` subject to ``M u = 0``, solved as an LP.

    Real ``g`` gives the exact value. Complex ``g`` replaces the modulus by
    its largest projection onto ``n_dirs`` equally spaced directions, so the
    result lies between ``cos(pi/n_dirs)`` times the exact value and the
    exact value.
    """
    g = np.asarray(g)
    m = g.size
    if m == 0:
        return 0.0
    M = sp.csr_matrix(M)
    if not np.iscomplexobj(g) or np.allclose(g.imag, 0):
        g = np.real(g)
        I = sp.identity(m, format="csr")
        one = sp.csr_matrix(np.ones((m, 1)))
        A_ub = sp.vstack([sp.hstack([-I, -one]), sp.hstack([I, -one])])
        b_ub = np.concatenate([-g, g])
        A_eq = sp.hstack([M, sp.csr_matrix((M.shape[0], 1))])
        c = np.zeros(m + 1)
        c[-1] = 1.0
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.zeros(M.shape[0]),
                      bounds=[(None, None)] * m + [(0, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"LP failed: {res.message}")
        return float(res.fun)
    # variables (ur, ui, t); Re((g - u) e^{-i th}) <= t for every direction
    th = 2 * np.pi * np.arange(n_dirs) / n_dirs
    rows, rhs = [], []
    I = sp.identity(m, format="csr")
    one = sp.csr_matrix(np.ones((m, 1)))
    for t in th:
        c, s = np.cos(t), np.sin(t)
        rows.append(sp.hstack([-c * I, -s * I, -one]))
        rhs.append(-(g.real * c + g.imag * s))
    A_ub = sp.vstack(rows)
    b_ub = np.concatenate(rhs)
    Z = sp.csr_matrix((M.shape[0], m))
    A_eq = sp.vstack([sp.hstack([M, Z, sp.csr_matrix((M.shape[0], 1))]),
                      sp.hstack([Z, M, sp.csr_matrix((M.shape[0], 1))])])
    c = np.zeros(2 * m + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.zeros(2 * M.shape[0]),
                  bounds=[(None, None)] * (2 * m) + [(0, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.fun)


def identifiability_check(struct, x, frame=None):
    """``inf_{u in N(D* P_Lambda)} ||(D* P_Lambda)^+ Q_W^perp D* P_{Lambda^c} sgn(Dx) - u||_inf``.

    Compare the value with :data:`IDENTIFIABILITY_LIMIT`.
    """
    x = np.asarray(x)
    if not np.any(x):
        return 0.0
    frame = frame or build_wframe(struct, x)
    v = frame.project_perp(sign_divergence(struct, x))
    if np.linalg.norm(v) == 0:
        return 0.0
    g = _pinv_adjoint_coeffs(struct, v.ravel())
    return min_sup_over_null(g, _null_space_operator(struct))


# ================================================================ balancing


def band_rows(n, M, dim):
    """Flat canonical positions of ``P_[M]``.

    1D: the band ``-floor(M/2) .. ceil(M/2)-1``. 2D: the ``M`` frequencies of
    smallest ``|k|`` (ties broken by storage order).
    """
    if dim == 1:
        band = ops.canonical_frequency(np.arange(-(M // 2), -(-M // 2)), n)
        return ops.freq_to_pos(band, n)
    grid = full_grid(n, 2)
    r = np.hypot(grid[:, 0], grid[:, 1])
    return np.argsort(r, kind="stable")[:M]


def _apply_A_cols(mat, shape):
    # columns are flattened signals; returns flattened canonical spectra
    out = np.empty(mat.shape, dtype=np.complex128)
    for c in range(mat.shape[1]):
        out[:, c] = ops.dft(mat[:, c].reshape(shape)).ravel()
    return out


def _apply_At_cols(mat, shape):
    out = np.empty(mat.shape, dtype=np.complex128)
    for c in range(mat.shape[1]):
        out[:, c] = ops.dft_adjoint(mat[:, c].reshape(shape)).ravel()
    return out


def _pinv_adjoint_matrix(struct, V):
    """``(D* P_Lambda)^+`` applied to every column of ``V``; returns all rows."""
    if isinstance(struct, st.JumpSet):
        return ops.pinv_restricted_dense(struct.jumps, struct.n).T @ V
    g = FlatGraph(struct)
    return g.B @ g.lap_pinv_complex(V)


def frame_dimension_s(frame):
    return frame.n_cols


def c_star(frame, b, x_norm=1.0):
    """``C_* = ||lam^-1||_inf * max(1, B ||X||)``."""
    return float(np.max(1.0 / frame.lam) * max(1.0, b * x_norm))


@dataclass
class BalancingResult:
    M: int
    restr_X: float
    restr_X2: float
    restr_D: float
    threshold_X2: float
    c_star: float

    @property
    def satisfied(self):
        return (self.restr_X <= 1 / 8 and self.restr_X2 <= self.threshold_X2
                and self.restr_D <= 1 / 16)


def balancing_check(frame, struct, M, q=1.0):
    """Residuals of the three balancing inequalities with ``X = Q_W``.

    ``restr_X = ||W* A* P_[M] A W - I||_2``,
    ``restr_X2 = ||diag(lam)(W* A* P_[M] A W - I)diag(1/lam)||_{inf->inf}``,
    ``restr_D = ||(D* P_Lambda)^+ Q_W^perp A* P_[M] A W diag(1/lam)||_{inf->inf}``.
    """
    dim = frame.dimension
    total = frame.n ** dim
    if not 1 <= M <= total:
        raise ValueError(f"M must lie in 1..{total}")
    shape = frame.shape
    Wm = frame.matrix()
    AW = _apply_A_cols(Wm, shape)
    rows = band_rows(frame.n, M, dim)
    PAW = np.zeros_like(AW)
    PAW[rows] = AW[rows]
    G = AW.conj().T @ PAW
    E = G - np.eye(frame.n_cols)
    r1 = float(np.linalg.norm(E, 2))
    lam = frame.lam
    r2 = float(np.max(np.sum(np.abs(lam[:, None] * E / lam[None, :]), axis=1)))
    V = _apply_At_cols(PAW, shape)
    V = V - Wm @ (Wm.conj().T @ V)
    R = _pinv_adjoint_matrix(struct, V) / lam[None, :]
    r3 = float(np.max(np.sum(np.abs(R), axis=1))) if R.size else 0.0
    b = pinv_norm_1to2(struct)
    cs = c_star(frame, b)
    thr = 1.0 / (4.0 * np.sqrt(np.log2(4 * cs * M * np.sqrt(frame.n_cols) / q)))
    return BalancingResult(M, r1, r2, r3, float(thr), cs)


# ================================================================= golfing


@dataclass
class RoundRecord:
    index: int
    accepted: bool
    a_value: float
    a_limit: float
    b_value: float
    b_limit: float
    loose_beta_only: bool = False


@dataclass
class CertificateResult:
    """Outcome of the golfing construction.

    ``cond_i``, ``cond_ii`` and ``cond_iii`` are the achieved values of
    ``||Q_W zeta - Q_W rho||_2``, ``||(D* P_Lambda)^+ Q_W^perp rho||_inf``
    and ``||w||_2``; the ``*_limit`` fields hold the bounds they are
    compared against.
    """

    success: bool
    event_b4: bool
    cond_i: float
    cond_i_limit: float
    cond_ii: float
    cond_ii_limit: float
    cond_iii: float
    cond_iii_limit: float
    rho: np.ndarray
    w: np.ndarray
    accepted: List[int]
    nu: int
    mu: int
    c_star: float
    c2: float
    q: float
    events: dict
    rounds: List[RoundRecord] = field(default_factory=list)
    pattern: Optional[SamplingPattern] = None
    loose_beta_flag: bool = False

    def summary(self):
        return {
            "success": self.success,
            "event_b4": self.event_b4,
            "cond_i": [self.cond_i, self.cond_i_limit],
            "cond_ii": [self.cond_ii, self.cond_ii_limit],
            "cond_iii": [self.cond_iii, self.cond_iii_limit],
            "accepted_rounds": len(self.accepted),
            "nu": self.nu,
            "mu": self.mu,
            "c_star": self.c_star,
            "c2": self.c2,
            "q": self.q,
            "events": self.events,
            "loose_beta_flag": self.loose_beta_flag,
        }


def golfing_schedule(c_star_value, M, s, q, eps):
    """``(nu, mu, L)`` with ``L = log2(4 C_* M sqrt(s)/q)``,
    ``nu = ceil(log2(8 C_* M sqrt(s)/q))`` and
    ``mu = 8 ceil(3 nu + ln(6/eps))``."""
    base = c_star_value * M * np.sqrt(s) / q
    L = float(np.log2(4 * base))
    nu = int(np.ceil(np.log2(8 * base)))
    mu = int(8 * np.ceil(3 * nu + np.log(6.0 / eps)))
    return nu, mu, L


def round_rates(q_k, mu, first_fraction=0.25):
    """Per-round Bernoulli rates: ``f q_k`` for rounds 1 and 2 and the common
    rate of the remaining ``mu - 2`` rounds, chosen so that
    ``prod_j (1 - q_k^j) = 1 - q_k``.

    Raises
    ------
    ValueError
        If the first two rounds alone would exceed ``q_k`` on some level
        (``(1 - f q_k)^2 < 1 - q_k``), which leaves no valid later rate.
    """
    q_k = np.asarray(q_k, dtype=float)
    if not 0.0 < first_fraction <= 1.0:
        raise ValueError("first_fraction must lie in (0, 1]")
    first = first_fraction * q_k
    if np.any((q_k < 1.0) & ((1.0 - first) ** 2 < 1.0 - q_k)):
        raise ValueError("first two rounds exceed the level rate; lower first_fraction")
    late = np.empty_like(q_k)
    for i, (q, f) in enumerate(zip(q_k, first)):
        if q >= 1.0:
            late[i] = 1.0
        else:
            late[i] = 1.0 - ((1.0 - q) / (1.0 - f) ** 2) ** (1.0 / (mu - 2))
    return first, late


def _weights_fft(levels_pos, total, draw, rates, shape):
    # P_{Omega, q} as a weight array over canonical positions, then fft order
    w = np.zeros(total)
    for pos, keep, q in zip(levels_pos, draw, rates):
        if q > 0:
            w[pos[keep]] = 1.0 / q
    return ops.to_fft_order(w.reshape(shape))


def _scheme_for(struct, rates):
    dim = 1 if isinstance(struct, st.JumpSet) else 2
    if isinstance(rates, LevelScheme):
        return rates
    r = np.atleast_1d(np.asarray(rates, dtype=float))
    if r.size != 1:
        raise ValueError("pass a LevelScheme for per-level rates")
    grid = full_grid(struct.n, dim)
    return LevelScheme(struct.n, dim, [grid], rates=(float(r[0]),))


def golfing_certificate(struct, x, rates, eps, seed=0, first_fraction=0.25, frame=None):
    """Run the golfing construction of a dual certificate.

    Parameters
    ----------
    struct : JumpSet or ComponentPartition
    x : ndarray
        The signal whose sign pattern is certified.
    rates : float or LevelScheme
        Bernoulli rates ``q_k`` (a scalar means one level covering the grid).
    eps : float
        Failure probability; ``gamma = eps/6``.
    first_fraction : float
        Rounds 1 and 2 sample at ``first_fraction * q_k``. The construction
        analysed in the literature uses 1/4.

    Notes
    -----
    ``X = Q_W`` and ``M`` is the full grid size. ``C_*`` uses
    ``B = ||(P_Lambda D)^+||_{1->2}`` in place of the certificate constant
    ``c2``, which depends on the drawn pattern. All ``mu`` rounds are drawn
    up front; a rejected round leaves ``Z`` unchanged. Rounds 1 and 2 are
    always accepted and their tests are recorded as events ``A1, A2, B1, B2``
    (evaluated on ``Z_{i-1}``, the vector the round acts on).
    """
    if isinstance(struct, st.JumpSet) and struct.n_jumps == 0:
        raise ValueError("degenerate structure: no jumps")
    scheme = _scheme_for(struct, rates)
    q_k = scheme.level_rates()
    if np.any(q_k <= 0) or np.any(q_k > 1):
        raise ValueError("rates must lie in (0, 1]")
    frame = frame or build_wframe(struct, x)
    dim = frame.dimension
    n = frame.n
    shape = frame.shape
    total = n ** dim
    q = float(q_k.min())
    s = frame.n_cols
    b = pinv_norm_1to2(struct)
    cs = c_star(frame, b)
    nu, mu, L = golfing_schedule(cs, total, s, q, eps)
    first, late = round_rates(q_k, mu, first_fraction)
    alpha = [1.0 / (2.0 * np.sqrt(L))] * 2 + [0.5] * (mu - 2)
    beta = [1.0 / 8.0] * 2 + [L / 8.0] * (mu - 2)

    levels_pos = _level_rows(scheme.levels, n, dim)
    rng = make_rng(seed)
    draws = []
    for j in range(mu):
        r = first if j < 2 else late
        draws.append([rng.random(p.size) < r[k] for k, p in enumerate(levels_pos)])

    lam = frame.lam
    zeta = sign_divergence(struct, x)
    Z0 = frame.project(zeta)
    graph = FlatGraph(struct) if dim == 2 else None
    Pd = None if dim == 2 else ops.pinv_restricted_dense(struct.jumps, n)

    def pinv_adj(v):
        if dim == 1:
            return Pd.T @ v
        return graph.pinv_adjoint(v.ravel())

    def weighted(z):
        return float(np.max(np.abs(lam * frame.adjoint(z))))

    Y = np.zeros(shape, dtype=np.complex128)
    w_fft = np.zeros(shape, dtype=np.complex128)
    Z = Z0.copy()
    accepted, rounds, events = [], [], {}
    rho = None
    w_at_nu = None
    loose_flag = False
    for j in range(mu):
        rate = first if j < 2 else late
        weights = _weights_fft(levels_pos, total, draws[j], rate, shape)
        az = ops.dft_fft_order(Z)
        step = ops.dft_adjoint_fft_order(weights * az)
        ref = weighted(Z)
        a_val = float(np.max(np.abs(lam * (frame.adjoint(Z) - frame.adjoint(step)))))
        b_val = float(np.max(np.abs(pinv_adj(frame.project_perp(step)))))
        a_ok = a_val <= alpha[j] * ref + 1e-14
        b_ok = b_val <= beta[j] * ref + 1e-14
        if j < 2:
            events[f"A{j + 1}"] = bool(a_ok)
            events[f"B{j + 1}"] = bool(b_ok)
            ok = True
        else:
            ok = a_ok and b_ok
        loose = bool(ok and j >= 2 and b_val > ref / 8.0 + 1e-14)
        rounds.append(RoundRecord(j + 1, ok, a_val, alpha[j] * ref, b_val, beta[j] * ref, loose))
        if ok:
            accepted.append(j + 1)
            Y = Y + step
            w_fft = w_fft + weights * az
            Z = Z0 - frame.project(Y)
            if len(accepted) == nu:
                rho = Y.copy()
                w_at_nu = w_fft.copy()
                loose_flag = any(r.loose_beta_only for r in rounds if r.accepted)
    events["B3"] = len(accepted) >= nu
    b4 = all(events[k] for k in ("A1", "A2", "B1", "B2", "B3"))
    if not b4 or rho is None:
        rho = np.zeros(shape, dtype=np.complex128)
        w_at_nu = np.zeros(shape, dtype=np.complex128)

    # sampled set: union over rounds, used for c2 and returned for recovery
    union = [np.zeros(p.size, dtype=bool) for p in levels_pos]
    for d in draws:
        for k in range(len(union)):
            union[k] |= d[k]
    pos = np.concatenate([p[u] for p, u in zip(levels_pos, union)])
    grid = full_grid(n, dim)
    pattern = SamplingPattern(n, dim, grid[pos]) if pos.size else None
    c2 = _c2(struct, frame, levels_pos, union, q_k)

    x_norm = 1.0
    cond_i = float(np.linalg.norm(Z0 - frame.project(rho)))
    lim_i = q / 8.0 * min(1.0, 1.0 / (c2 * x_norm)) if c2 > 0 else q / 8.0
    cond_ii = float(np.max(np.abs(pinv_adj(frame.project_perp(rho))))) if rho.size else 0.0
    lim_ii = 1.0 / 8.0
    w_canon = ops.to_canonical(w_at_nu)
    cond_iii = float(np.linalg.norm(w_canon))
    lg = np.log(1.0 / eps) + np.log(8 * total * cs * np.sqrt(s) / q)
    lim_iii = float(np.sqrt(s / q) * np.max(1.0 / lam) *
                    np.sqrt(lg / np.log2(5 * total * cs * np.sqrt(s) / q)))
    success = bool(b4 and cond_i <= lim_i and cond_ii <= lim_ii and cond_iii <= lim_iii)
    return CertificateResult(
        success=success, event_b4=bool(b4), cond_i=cond_i, cond_i_limit=float(lim_i),
        cond_ii=cond_ii, cond_ii_limit=lim_ii, cond_iii=cond_iii, cond_iii_limit=lim_iii,
        rho=rho, w=w_canon, accepted=accepted, nu=nu, mu=mu,
        c_star=cs, c2=c2, q=q, events=events, rounds=rounds, pattern=pattern,
        loose_beta_flag=loose_flag)


def _c2(struct, frame, levels_pos, union, q_k):
    """``max_j ||P_{Omega, sqrt q} A Q_W^perp (P_Lambda D)^+ e_j||_2``."""
    n = frame.n
    dim = frame.dimension
    total = n ** dim
    wts = np.zeros(total)
    for pos, u, q in zip(levels_pos, union, q_k):
        wts[pos[u]] = 1.0 / np.sqrt(q)
    if dim == 1:
        U = incoherence_matrix_1d(struct, None, frame)
        return float(np.max(np.linalg.norm(wts[:, None] * U, axis=0))) if U.size else 0.0
    g = FlatGraph(struct)
    best = 0.0
    bt = g.B.T.tocsc()
    for a in range(0, g.n_edges, 256):
        cols = g.lap_pinv(bt[:, a:a + 256].toarray())
        cols = cols - frame.matrix() @ (frame.matrix().conj().T @ cols)
        spec = _apply_A_cols(cols, frame.shape)
        best = max(best, float(np.max(np.linalg.norm(wts[:, None] * spec, axis=0))))
    return best


# ============================================================== error bound


@dataclass
class ErrorBoundReport:
    """Right-hand side of the recovery error bound and its ingredients.

    1D: ``(1 + sqrt(s) L) delta/sqrt(q) + ||P_Lambda D x||_1`` bounds
    ``||x - x_hat||_2 / sqrt(N)``. 2D: ``B`` times the same expression (with
    ``N^2`` in ``L``) bounds ``||x - x_hat||_2``.
    """

    dimension: int
    bound: float
    L: float
    q: float
    log_factor: float
    s: float
    delta: float
    eps: float
    cosparse_residual: float
    pinv_norm: Optional[float] = None

    def absolute_bound(self, n):
        """Bound on ``||x - x_hat||_2`` (undoes the 1D ``sqrt(N)`` scaling)."""
        return self.bound * (np.sqrt(n) if self.dimension == 1 else 1.0)


def error_bound_report(struct, q, delta, eps, x=None, b=None):
    """Evaluate the error bound for a structure, rate ``q`` and noise ``delta``.

    ``s = S(Lambda, 1)``. ``x`` supplies ``||P_Lambda D x||_1`` (zero if
    omitted). In 2D ``b`` defaults to ``||(P_Lambda D)^+||_{1->2}``.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    if delta < 0 or not 0 < eps <= 1:
        raise ValueError("need delta >= 0 and eps in (0, 1]")
    n = struct.n
    s = st.active_sparsity(struct, 1.0)
    dim = 1 if isinstance(struct, st.JumpSet) else 2
    big = n if dim == 1 else n * n
    L = float(np.sqrt((np.log(1.0 / eps) + np.log2(8 * big * np.sqrt(s) / q))
                      / np.log2(4 * big * np.sqrt(s) / q)))
    resid = 0.0
    if x is not None:
        if dim == 1:
            d = ops.diff_1d(x)
            resid = float(np.sum(np.abs(d[~struct.jump_mask()])))
        else:
            g = ops.grad_2d(x)
            down, right = struct.edge_masks()
            resid = float(np.sum(np.abs(g.d1[down])) + np.sum(np.abs(g.d2[right])))
    core = (1.0 + np.sqrt(s) * L) * delta / np.sqrt(q) + resid
    from .sampling import log_factor
    if dim == 1:
        return ErrorBoundReport(1, float(core), L, float(q), float(log_factor(s, eps, q, n)),
                                float(s), float(delta), float(eps), resid)
    b = pinv_norm_1to2_2d(struct) if b is None else b
    return ErrorBoundReport(2, float(b * core), L, float(q),
                            float(log_factor(s, eps, q, n, dim=2, b=b)), float(s),
                            float(delta), float(eps), resid, float(b))

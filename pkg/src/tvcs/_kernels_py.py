"""Pure numpy/scipy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


def grad2d(x):
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    d1[:-1, :] = x[1:, :] - x[:-1, :]
    d2[:, :-1] = x[:, 1:] - x[:, :-1]
    return d1, d2


def grad2d_adjoint(g1, g2):
    out = np.zeros_like(g1)
    out[:-1, :] -= g1[:-1, :]
    out[1:, :] += g1[:-1, :]
    out[:, :-1] -= g2[:, :-1]
    out[:, 1:] += g2[:, :-1]
    return out


def shrink_iso(g1, g2, theta):
    mag = np.sqrt(np.abs(g1) ** 2 + np.abs(g2) ** 2)
    scale = np.zeros_like(mag)
    keep = mag > theta
    scale[keep] = (mag[keep] - theta) / mag[keep]
    return g1 * scale, g2 * scale


def shrink_soft(g, theta):
    mag = np.abs(g)
    scale = np.zeros_like(mag)
    keep = mag > theta
    scale[keep] = (mag[keep] - theta) / mag[keep]
    return g * scale


def label_components(open_mask):
    n0, n1 = open_mask.shape
    idx = np.arange(n0 * n1).reshape(n0, n1)
    open_mask = open_mask.astype(bool)
    down = open_mask[:-1, :]
    right = open_mask[:, :-1]
    rows = np.concatenate([idx[:-1, :][down], idx[:, :-1][right]])
    cols = np.concatenate([idx[1:, :][down], idx[:, 1:][right]])
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n0 * n1, n0 * n1))
    _, raw = connected_components(graph, directed=False)
    # renumber by first occurrence so both backends agree exactly
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[raw].reshape(n0, n1).astype(np.intp)

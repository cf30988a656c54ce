# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the 2D gradient, its adjoint, shrinkage and
component labelling.

Every function here has a numpy/scipy twin in ``_kernels_py`` with the same
signature; ``tvcs.kernels`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef double complex cplx


cdef inline double cabs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


def grad2d(const cplx[:, ::1] x):
    """Forward differences along both axes with the last row/column zero."""
    cdef Py_ssize_t n0 = x.shape[0], n1 = x.shape[1], i, j
    out1 = np.zeros((n0, n1), dtype=np.complex128)
    out2 = np.zeros((n0, n1), dtype=np.complex128)
    cdef cplx[:, ::1] d1 = out1
    cdef cplx[:, ::1] d2 = out2
    with nogil:
        for i in range(n0):
            for j in range(n1):
                if i + 1 < n0:
                    d1[i, j] = x[i + 1, j] - x[i, j]
                if j + 1 < n1:
                    d2[i, j] = x[i, j + 1] - x[i, j]
    return out1, out2


def grad2d_adjoint(const cplx[:, ::1] g1, const cplx[:, ::1] g2):
    """Adjoint of ``grad2d``: D1* g1 + D2* g2 (rows/columns beyond the
    truncation are ignored)."""
    cdef Py_ssize_t n0 = g1.shape[0], n1 = g1.shape[1], i, j
    res = np.zeros((n0, n1), dtype=np.complex128)
    cdef cplx[:, ::1] out = res
    cdef cplx v
    with nogil:
        for i in range(n0):
            for j in range(n1):
                v = 0
                if i + 1 < n0:
                    v = v - g1[i, j]
                if i > 0:
                    v = v + g1[i - 1, j]
                if j + 1 < n1:
                    v = v - g2[i, j]
                if j > 0:
                    v = v + g2[i, j - 1]
                out[i, j] = v
    return res


def shrink_iso(const cplx[:, ::1] g1, const cplx[:, ::1] g2, double theta):
    """Pixelwise shrinkage of the complex 2-vector (g1, g2) by ``theta``."""
    cdef Py_ssize_t n0 = g1.shape[0], n1 = g1.shape[1], i, j
    r1 = np.zeros((n0, n1), dtype=np.complex128)
    r2 = np.zeros((n0, n1), dtype=np.complex128)
    cdef cplx[:, ::1] u1 = r1
    cdef cplx[:, ::1] u2 = r2
    cdef double mag, scale
    with nogil:
        for i in range(n0):
            for j in range(n1):
                mag = sqrt(cabs2(g1[i, j]) + cabs2(g2[i, j]))
                if mag > theta:
                    scale = (mag - theta) / mag
                    u1[i, j] = g1[i, j] * scale
                    u2[i, j] = g2[i, j] * scale
    return r1, r2


def shrink_soft(const cplx[::1] g, double theta):
    """Entrywise complex soft thresholding of a flat array."""
    cdef Py_ssize_t n = g.shape[0], i
    res = np.zeros(n, dtype=np.complex128)
    cdef cplx[::1] u = res
    cdef double mag
    with nogil:
        for i in range(n):
            mag = sqrt(cabs2(g[i]))
            if mag > theta:
                u[i] = g[i] * ((mag - theta) / mag)
    return res


cdef Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t a) nogil:
    cdef Py_ssize_t root = a, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


def label_components(const cnp.uint8_t[:, ::1] open_mask):
    """Label the graph whose edges leave every pixel with ``open_mask`` set
    towards its lower and right neighbour.

    Labels are consecutive integers ordered by first occurrence in
    row-major order.
    """
    cdef Py_ssize_t n0 = open_mask.shape[0], n1 = open_mask.shape[1]
    cdef Py_ssize_t n = n0 * n1, i, j, p, ra, rb, nxt_label = 0
    parent_arr = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    labels_arr = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] labels = labels_arr
    root_label_arr = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] root_label = root_label_arr
    with nogil:
        for i in range(n0):
            for j in range(n1):
                if not open_mask[i, j]:
                    continue
                p = i * n1 + j
                if i + 1 < n0:
                    ra = _find(parent, p)
                    rb = _find(parent, p + n1)
                    if ra != rb:
                        if ra < rb:
                            parent[rb] = ra
                        else:
                            parent[ra] = rb
                if j + 1 < n1:
                    ra = _find(parent, p)
                    rb = _find(parent, p + 1)
                    if ra != rb:
                        if ra < rb:
                            parent[rb] = ra
                        else:
                            parent[ra] = rb
        for p in range(n):
            ra = _find(parent, p)
            if root_label[ra] < 0:
                root_label[ra] = nxt_label
                nxt_label += 1
            labels[p] = root_label[ra]
    return labels_arr.reshape(n0, n1)

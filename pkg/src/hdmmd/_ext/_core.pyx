# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: blocked Gram matrices and kernel row sums (OpenMP)."""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()


cdef extern from "hd_kernels.h" nogil:
    int HD_TILE
    int HD_BLOCK_ROWS
    void hd_dot_tile(const double *A, Py_ssize_t lda, int na,
                     const double *B, Py_ssize_t ldb, int nb,
                     Py_ssize_t p, double *out, Py_ssize_t ldo)
    double hd_row_kernel_sum(const double *G, Py_ssize_t ldg, Py_ssize_t i,
                             Py_ssize_t j0, Py_ssize_t j1, int family,
                             double param, double gamma)


cdef extern from *:
    """
    #ifdef _OPENMP
    #include <omp.h>
    static int hd_openmp(void) { return 1; }
    #else
    static int hd_openmp(void) { return 0; }
    #endif
    """
    int hd_openmp() nogil


OPENMP = bool(hd_openmp())


def gram(const double[:, ::1] A, const double[:, ::1] B=None, int nthreads=1):
    """Inner-product matrix ``A @ B.T`` (``A @ A.T`` when ``B`` is None).

    The symmetric case computes upper tiles only and mirrors them.
    """
    cdef bint sym = B is None
    if sym:
        B = A
    if A.shape[1] != B.shape[1]:
        raise ValueError("column count mismatch")
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], p = A.shape[1]
    out_arr = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if na == 0 or nb == 0:
        return out_arr
    cdef Py_ssize_t tiles_a = (na + HD_TILE - 1) // HD_TILE
    cdef Py_ssize_t tiles_b = (nb + HD_TILE - 1) // HD_TILE
    cdef Py_ssize_t per_block = HD_BLOCK_ROWS // HD_TILE
    cdef Py_ssize_t nblocks = (tiles_a + per_block - 1) // per_block
    cdef Py_ssize_t blk, ta, ta0, ta1, tb, i0, j0, i, j
    cdef int ra, rb
    cdef double *po = &out[0, 0]
    cdef const double *pa = &A[0, 0]
    cdef const double *pb = &B[0, 0]
    if nthreads < 1:
        nthreads = 1

    # A block of HD_BLOCK_ROWS rows of A stays in cache while each tile of B
    # is applied to all of it; every output element is still produced by a
    # single hd_dot_tile call, so the blocking does not change any bits.
    for blk in prange(nblocks, nogil=True, schedule="dynamic", num_threads=nthreads):
        ta0 = blk * per_block
        ta1 = min(ta0 + per_block, tiles_a)
        tb = ta0 if sym else 0
        while tb < tiles_b:
            j0 = tb * HD_TILE
            rb = <int>min(HD_TILE, nb - j0)
            ta = ta0
            while ta < ta1 and not (sym and ta > tb):
                i0 = ta * HD_TILE
                ra = <int>min(HD_TILE, na - i0)
                hd_dot_tile(pa + i0 * p, p, ra, pb + j0 * p, p, rb, p,
                            po + i0 * nb + j0, nb)
                ta = ta + 1
            tb = tb + 1

    if sym:
        with nogil:
            for i in range(na):
                for j in range(i + 1, na):
                    out[j, i] = out[i, j]
    return out_arr


def kernel_row_sums(const double[:, ::1] G, Py_ssize_t n, int family,
                    double param, double gamma, int nthreads=1):
    """Per-row kernel sums over a pooled Gram matrix.

    Rows ``0..n-1`` belong to the first sample, the rest to the second.
    Returns ``(within, cross)``: ``within[i]`` sums the kernel over later rows
    of the same sample, ``cross[i]`` over every row of the other sample.
    """
    cdef Py_ssize_t N = G.shape[0]
    if G.shape[1] != N:
        raise ValueError("Gram matrix must be square")
    if not 0 <= n <= N:
        raise ValueError("split index out of range")
    within_arr = np.zeros(N, dtype=np.float64)
    cross_arr = np.zeros(N, dtype=np.float64)
    cdef double[::1] within = within_arr
    cdef double[::1] cross = cross_arr
    if N == 0:
        return within_arr, cross_arr
    cdef const double *pg = &G[0, 0]
    cdef Py_ssize_t i, end
    if nthreads < 1:
        nthreads = 1

    for i in prange(N, nogil=True, schedule="dynamic", chunksize=8,
                    num_threads=nthreads):
        if i < n:
            end = n
            within[i] = hd_row_kernel_sum(pg, N, i, i + 1, end, family, param, gamma)
            cross[i] = hd_row_kernel_sum(pg, N, i, n, N, family, param, gamma)
        else:
            within[i] = hd_row_kernel_sum(pg, N, i, i + 1, N, family, param, gamma)
            cross[i] = hd_row_kernel_sum(pg, N, i, 0, n, family, param, gamma)
    return within_arr, cross_arr


def sq_norms(const double[:, ::1] A):
    """Squared row norms ``|a_i|^2``."""
    cdef Py_ssize_t n = A.shape[0], p = A.shape[1], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    if n == 0:
        return out_arr
    cdef const double *pa = &A[0, 0]
    with nogil:
        for i in range(n):
            hd_dot_tile(pa + i * p, p, 1, pa + i * p, p, 1, p, &out[i], 1)
    return out_arr


def sqdist_from_gram(const double[:, ::1] C, const double[::1] na2,
                     const double[::1] nb2):
    """Clamped squared distances ``|a|^2 + |b|^2 - 2 <a, b>``."""
    cdef Py_ssize_t r = C.shape[0], c = C.shape[1], i, j
    out_arr = np.empty((r, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double d
    with nogil:
        for i in range(r):
            for j in range(c):
                d = (na2[i] + nb2[j]) - 2.0 * C[i, j]
                out[i, j] = d if d > 0.0 else 0.0
    return out_arr

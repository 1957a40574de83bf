"""Pure-numpy implementations of the compiled kernels in ``_ext._core``.

Same signatures and return conventions; used when the extension is not built
or when ``HD_MMD_BACKEND=python``.  Thread arguments are accepted and ignored.
"""

import numpy as np

OPENMP = False

_BLOCK = 256


def _f(family, x, param):
    if family == 0:
        return np.exp(-x)
    if family == 1:
        return np.exp(-np.sqrt(x))
    if family == 2:
        return (1.0 + x) ** (-param)
    if family == 3:
        return -np.sqrt(x)
    return -x


def gram(A, B=None, nthreads=1):
    A = np.ascontiguousarray(A, dtype=np.float64)
    if B is None:
        return A @ A.T
    B = np.ascontiguousarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise ValueError("column count mismatch")
    return A @ B.T


def kernel_row_sums(G, n, family, param, gamma, nthreads=1):
    G = np.asarray(G, dtype=np.float64)
    N = G.shape[0]
    if G.shape[1] != N:
        raise ValueError("Gram matrix must be square")
    if not 0 <= n <= N:
        raise ValueError("split index out of range")
    diag = np.diagonal(G).copy()
    within = np.zeros(N)
    cross = np.zeros(N)
    # Row blocks bound the temporary to _BLOCK x N.
    for r0 in range(0, N, _BLOCK):
        r1 = min(N, r0 + _BLOCK)
        D = diag[r0:r1, None] + diag[None, :] - 2.0 * G[r0:r1]
        np.maximum(D, 0.0, out=D)
        K = _f(family, D / gamma, param)
        rows = np.arange(r0, r1)
        cols = np.arange(N)
        same = (rows[:, None] < n) == (cols[None, :] < n)
        upper = cols[None, :] > rows[:, None]
        within[r0:r1] = np.where(same & upper, K, 0.0).sum(axis=1)
        cross[r0:r1] = np.where(~same, K, 0.0).sum(axis=1)
    return within, cross


def sq_norms(A):
    A = np.asarray(A, dtype=np.float64)
    return np.einsum("ij,ij->i", A, A)


def sqdist_from_gram(C, na2, nb2):
    D = np.asarray(na2)[:, None] + np.asarray(nb2)[None, :] - 2.0 * np.asarray(C)
    np.maximum(D, 0.0, out=D)
    return D

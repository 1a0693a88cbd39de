"""NumPy implementation of the RBF kernels.

Used when the compiled core is unavailable or disabled. Matrix assembly
goes through the expanded form ``|a|^2 + |b|^2 - 2 a.b`` so the inner
products hit BLAS; fused mean/gradient evaluation is chunked over test
rows to bound the temporary kernel block.
"""
import numpy as np

_CHUNK_ENTRIES = 1 << 22


def sq_distances(A, B):
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def rbf_matrix(A, B, length_scale):
    d2 = sq_distances(A, B)
    return np.exp(d2 * (-0.5 / length_scale**2))


def _chunks(m, n):
    step = max(1, _CHUNK_ENTRIES // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(start + step, m))


def rbf_mean(T, X, alpha, length_scale):
    out = np.empty(T.shape[0])
    for sl in _chunks(T.shape[0], X.shape[0]):
        out[sl] = rbf_matrix(T[sl], X, length_scale) @ alpha
    return out


def rbf_mean_grad(T, X, alpha, length_scale):
    # d/dt_j sum_i k(t, x_i) a_i = -(t_j mu - sum_i k_i a_i x_ij) / ls^2
    mean = np.empty(T.shape[0])
    grad = np.empty_like(T)
    for sl in _chunks(T.shape[0], X.shape[0]):
        W = rbf_matrix(T[sl], X, length_scale) * alpha
        mu = W.sum(axis=1)
        mean[sl] = mu
        grad[sl] = -(T[sl] * mu[:, None] - W @ X) / length_scale**2
    return mean, grad

import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def naive_contract(a, b, axes):
    """Contraction by explicit loops over every output and summed index."""
    ax_a = [p[0] for p in axes]
    ax_b = [p[1] for p in axes]
    free_a = [k for k in range(a.ndim) if k not in ax_a]
    free_b = [k for k in range(b.ndim) if k not in ax_b]
    out_shape = [a.shape[k] for k in free_a] + [b.shape[k] for k in free_b]
    summed = [a.shape[k] for k in ax_a]
    out = np.zeros(out_shape)
    for out_idx in itertools.product(*[range(s) for s in out_shape]):
        ia = [0] * a.ndim
        ib = [0] * b.ndim
        for k, v in zip(free_a, out_idx[: len(free_a)]):
            ia[k] = v
        for k, v in zip(free_b, out_idx[len(free_a) :]):
            ib[k] = v
        acc = 0.0
        for s_idx in itertools.product(*[range(s) for s in summed]):
            for ka, kb, v in zip(ax_a, ax_b, s_idx):
                ia[ka] = v
                ib[kb] = v
            acc += a[tuple(ia)] * b[tuple(ib)]
        out[out_idx] = acc
    return out


def naive_conv(X, W):
    """Valid stride-1 convolution, one scalar product at a time."""
    Wd, Hd, C_in = X.shape
    C_out, _, K, _ = W.shape
    Y = np.zeros((Wd - K + 1, Hd - K + 1, C_out))
    for w in range(Wd - K + 1):
        for h in range(Hd - K + 1):
            for i in range(C_out):
                acc = 0.0
                for p in range(K):
                    for q in range(K):
                        for j in range(C_in):
                            acc += W[i, j, p, q] * X[w + p, h + q, j]
                Y[w, h, i] = acc
    return Y


def rel(a, b):
    denom = np.linalg.norm(np.ravel(b))
    return np.linalg.norm(np.ravel(a) - np.ravel(b)) / (denom if denom else 1.0)

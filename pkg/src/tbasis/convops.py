"""Convolution through a T-Basis layer: reference, decompress-then-convolve, direct.

All kernels compute a valid convolution with stride 1 on a single feature map
``X`` of shape ``(W, H, C_in)``. Linear layers are treated as 1x1
convolutions. Every kernel accepts an optional :class:`OpCounter` that is
incremented with the number of multiply-adds performed; :func:`flops`
predicts the same number in closed form. Synthesis of cores from the basis is
shared by both low-rank paths and is not counted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import LayerParams, TBasis, synth_cores, synth_weight
from .exceptions import ShapeMismatch
from .tring import pairing_plan

PATHS = ("reference", "decompress", "direct")


class OpCounter:
    """Per-call multiply-add tally."""

    def __init__(self):
        self.multiply_adds = 0

    def add(self, count: int) -> None:
        self.multiply_adds += int(count)


@dataclass(frozen=True)
class OpCount:
    multiply_adds: int
    path: str


def _tensordot(a, b, axes, counter: Optional[OpCounter]):
    out = np.tensordot(a, b, axes=axes)
    if counter is not None:
        inner = int(np.prod([a.shape[i] for i in axes[0]], dtype=np.int64))
        counter.add(out.size * inner)
    return out


def conv2d_reference(X: np.ndarray, W: np.ndarray, counter: Optional[OpCounter] = None) -> np.ndarray:
    """``Y(w, h, i) = sum_{p, q, j} W(i, j, p, q) X(w + p, h + q, j)``."""
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 2:
        W = W[:, :, None, None]
    if X.ndim != 3 or W.ndim != 4 or W.shape[2] != W.shape[3]:
        raise ShapeMismatch(f"expected X (W, H, C) and W (C_out, C_in, K, K), got {X.shape}, {W.shape}")
    C_out, C_in, K, _ = W.shape
    if X.shape[2] != C_in:
        raise ShapeMismatch(f"input has {X.shape[2]} channels, weight expects {C_in}")
    if X.shape[0] < K or X.shape[1] < K:
        raise ShapeMismatch(f"input {X.shape[:2]} smaller than kernel {K}")
    Wo, Ho = X.shape[0] - K + 1, X.shape[1] - K + 1
    Y = np.zeros((Wo, Ho, C_out))
    for p in range(K):
        for q in range(K):
            Y += _tensordot(X[p : p + Wo, q : q + Ho, :], W[:, :, p, q], ([2], [1]), counter)
    return Y


def _check_input(X: np.ndarray, params: LayerParams) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    spec = params.plan.spec
    if X.ndim != 3 or X.shape[2] != spec.C_in:
        raise ShapeMismatch(f"layer {spec.name!r}: expected input (W, H, {spec.C_in}), got {X.shape}")
    if X.shape[0] < spec.K or X.shape[1] < spec.K:
        raise ShapeMismatch(f"layer {spec.name!r}: input {X.shape[:2]} smaller than kernel {spec.K}")
    return X


def conv2d_decompress(X, basis: TBasis, params: LayerParams, counter: Optional[OpCounter] = None) -> np.ndarray:
    X = _check_input(X, params)
    return conv2d_reference(X, synth_weight(basis, params, counter=counter), counter)


def conv2d_direct(X, basis: TBasis, params: LayerParams, counter: Optional[OpCounter] = None) -> np.ndarray:
    """Convolve against the TR cores one at a time without forming the weight.

    The running array after step ``k`` has axes
    ``(w, h, i_1..i_k, j_{k+1}..j_d, r_1, r_{k+1})``; step ``k`` sums over
    ``j_k`` and ``r_k``. The spatial core then sums over ``p, q`` and closes
    the ring over ``r_1``.
    """
    X = _check_input(X, params)
    plan = params.plan
    n, d, R = plan.n, plan.d, basis.R
    Wd, Hd = X.shape[:2]
    cores = synth_cores(basis, params.alpha)
    rho = params.adapters
    folded = rho[:, :, None, None] * cores
    if counter is not None:
        counter.add(cores.size)

    Xp = np.zeros((Wd, Hd, plan.side))
    Xp[:, :, : plan.spec.C_in] = X
    Y = Xp.reshape((Wd, Hd) + (n,) * d)

    # core 1: (r1, i1, j1, r2); contract j1 only
    C = folded[0].reshape(R, n, n, R)
    Y = _tensordot(Y, C, ([2], [2]), counter)  # (w, h, j2..jd, r1, i1, r2)
    Y = np.moveaxis(Y, -2, 2)
    for k in range(1, d):
        C = folded[k].reshape(R, n, n, R)  # (r_k, i_k, j_k, r_{k+1})
        # Y axes: (w, h, i_1..i_k-1 [k of them], j_k.., r1, r_k)
        Y = _tensordot(Y, C, ([2 + k, Y.ndim - 1], [2, 0]), counter)
        Y = np.moveaxis(Y, -2, 2 + k)
    # Y axes: (w, h, i_1..i_d, r1, r_{d+1})

    if plan.has_spatial:
        K = plan.spec.K
        Wo, Ho = Wd - K + 1, Hd - K + 1
        S = folded[d].reshape(R, n, n, R)  # (r_{d+1}, p, q, r1)
        out = np.zeros((Wo, Ho) + (n,) * d)
        for p in range(K):
            for q in range(K):
                win = Y[p : p + Wo, q : q + Ho]
                out += _tensordot(win, S[:, p, q, :], ([win.ndim - 2, win.ndim - 1], [1, 0]), counter)
    else:
        Wo, Ho = Wd, Hd
        out = np.trace(Y, axis1=Y.ndim - 2, axis2=Y.ndim - 1)
        if counter is not None:
            counter.add(out.size * R)
    return np.ascontiguousarray(out.reshape(Wo, Ho, plan.side)[:, :, : plan.spec.C_out])


def conv2d(X, basis: TBasis, params: LayerParams, path: str = "direct", counter=None) -> np.ndarray:
    if path == "direct":
        return conv2d_direct(X, basis, params, counter)
    if path == "decompress":
        return conv2d_decompress(X, basis, params, counter)
    if path == "reference":
        X = _check_input(X, params)
        return conv2d_reference(X, synth_weight(basis, params), counter)
    raise ValueError(f"unknown path {path!r}; expected one of {PATHS}")


def _reference_count(W: int, H: int, C_in: int, C_out: int, K: int) -> int:
    return (W - K + 1) * (H - K + 1) * C_out * C_in * K * K


def assembly_count(core_count: int, N: int, R: int) -> int:
    """Multiply-adds of adapter folding, pairwise merging and ring closure."""
    total = core_count * R * R * N
    sizes = [N] * core_count
    for groups in pairing_plan(core_count):
        nxt = []
        for g in groups:
            if len(g) == 2:
                a, b = sizes[g[0]], sizes[g[1]]
                total += R**3 * a * b
                nxt.append(a * b)
            else:
                nxt.append(sizes[g[0]])
        sizes = nxt
    if len(sizes) == 1:
        total += R * sizes[0]
    else:
        total += R * R * sizes[0] * sizes[1]
    return total


def flops(path: str, dims, kind: str = "conv") -> OpCount:
    """Closed-form multiply-add count matching the instrumented kernels.

    ``dims`` is ``(W, H, C_in, C_out, K, n, d, R)``; ``kind`` selects a conv
    layer (spatial core present) or a linear layer.
    """
    W, H, C_in, C_out, K, n, d, R = (int(v) for v in dims)
    spatial = kind == "conv"
    cc = d + 1 if spatial else d
    N = n * n
    if path == "reference":
        total = _reference_count(W, H, C_in, C_out, K)
    elif path == "decompress":
        total = assembly_count(cc, N, R) + _reference_count(W, H, C_in, C_out, K)
    elif path == "direct":
        total = cc * R * R * N
        total += W * H * R * R * n ** (d + 1)
        total += (d - 1) * W * H * R**3 * n ** (d + 1)
        if spatial:
            total += (W - K + 1) * (H - K + 1) * K * K * R * R * n**d
        else:
            total += W * H * n**d * R
    else:
        raise ValueError(f"unknown path {path!r}; expected one of {PATHS}")
    return OpCount(int(total), path)


def measure(path: str, X, basis: TBasis, params: LayerParams) -> tuple[np.ndarray, OpCount]:
    """Run one path with a fresh counter."""
    counter = OpCounter()
    Y = conv2d(X, basis, params, path, counter)
    return Y, OpCount(counter.multiply_adds, path)

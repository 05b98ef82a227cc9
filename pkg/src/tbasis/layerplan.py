"""Tensorization recipes: padding to an envelope, digit interleaving, pair merging.

A conv weight ``W`` of shape ``(C_out, C_in, K, K)`` is zero-padded to the
envelope ``(n**d, n**d, n, n)``, the channel indices are split into base-``n``
digits (big-endian), output and input digits are interleaved as
``(i_1, j_1, ..., i_d, j_d, p, q)`` and adjacent pairs are merged, giving
``d + 1`` modes of size ``n**2``. Within a merged pair the first digit is the
major one. Linear layers skip the spatial pair and have ``d`` modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import BadConfig, IndexOutOfRange, ShapeMismatch, UnsupportedBase
from .tensor import permute, reshape

KINDS = ("conv", "linear")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    C_out: int
    C_in: int
    K: int = 1
    gain: float = 2.0
    compress: bool = True
    buffers: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadConfig(f"layer {self.name!r}: kind must be one of {KINDS}, got {self.kind!r}")
        if self.C_out < 1 or self.C_in < 1 or self.K < 1:
            raise BadConfig(f"layer {self.name!r}: channels and K must be >= 1")
        if self.kind == "linear" and self.K != 1:
            raise BadConfig(f"layer {self.name!r}: linear layers have K == 1")
        if self.gain <= 0:
            raise BadConfig(f"layer {self.name!r}: gain must be positive")

    @property
    def natural_shape(self) -> tuple[int, ...]:
        if self.kind == "linear":
            return (self.C_out, self.C_in)
        return (self.C_out, self.C_in, self.K, self.K)

    @property
    def size(self) -> int:
        return int(np.prod(self.natural_shape))


def ceil_log(value: int, base: int) -> int:
    """Smallest ``e >= 0`` with ``base**e >= value`` (exact integer arithmetic)."""
    e, p = 0, 1
    while p < value:
        p *= base
        e += 1
    return e


@dataclass(frozen=True)
class LayerPlan:
    spec: LayerSpec
    n: int
    d: int

    @property
    def N(self) -> int:
        return self.n * self.n

    @property
    def has_spatial(self) -> bool:
        return self.spec.kind == "conv"

    @property
    def core_count(self) -> int:
        return self.d + 1 if self.has_spatial else self.d

    @property
    def side(self) -> int:
        return self.n**self.d

    @property
    def envelope_shape(self) -> tuple[int, ...]:
        if self.has_spatial:
            return (self.side, self.side, self.n, self.n)
        return (self.side, self.side)

    @property
    def crop(self) -> tuple[int, ...]:
        return self.spec.natural_shape

    @property
    def tensorized_shape(self) -> tuple[int, ...]:
        return (self.N,) * self.core_count

    @property
    def padding_waste(self) -> float:
        env = int(np.prod(self.envelope_shape))
        return 1.0 - self.spec.size / env


def plan_layer(spec: LayerSpec, n: int) -> LayerPlan:
    if n < 2:
        raise BadConfig(f"layer {spec.name!r}: base n must be >= 2, got {n}")
    if spec.kind == "conv" and n < spec.K:
        raise UnsupportedBase(f"layer {spec.name!r}: base n={n} is smaller than kernel K={spec.K}")
    d = max(ceil_log(spec.C_out, n), ceil_log(spec.C_in, n), 1)
    return LayerPlan(spec, n, d)


def default_base(specs: Sequence[LayerSpec]) -> int:
    """``n = max(K, 2)`` over the compressed layers."""
    ks = [s.K for s in specs if s.compress]
    return max([2] + ks)


def encode_index(digits: Sequence[int], n: int) -> int:
    """Big-endian base-``n`` digits (0-based) to a flat index."""
    i = 0
    for x in digits:
        if not 0 <= x < n:
            raise IndexOutOfRange(f"digit {x} outside [0, {n})")
        i = i * n + int(x)
    return i


def decode_index(i: int, n: int, d: int) -> tuple[int, ...]:
    if not 0 <= i < n**d:
        raise IndexOutOfRange(f"index {i} outside [0, {n**d})")
    digits = []
    for _ in range(d):
        i, r = divmod(i, n)
        digits.append(r)
    return tuple(reversed(digits))


def _interleave_perm(plan: LayerPlan) -> tuple[int, ...]:
    d = plan.d
    perm = []
    for k in range(d):
        perm += [k, d + k]
    if plan.has_spatial:
        perm += [2 * d, 2 * d + 1]
    return tuple(perm)


def _digit_shape(plan: LayerPlan) -> tuple[int, ...]:
    return (plan.n,) * (2 * plan.d + (2 if plan.has_spatial else 0))


def tensorize(W_env: np.ndarray, plan: LayerPlan) -> np.ndarray:
    if W_env.shape != plan.envelope_shape:
        raise ShapeMismatch(f"expected envelope {plan.envelope_shape}, got {W_env.shape}")
    digits = reshape(W_env, _digit_shape(plan))
    return reshape(permute(digits, _interleave_perm(plan)), plan.tensorized_shape)


def untensorize(W_t: np.ndarray, plan: LayerPlan) -> np.ndarray:
    if W_t.shape != plan.tensorized_shape:
        raise ShapeMismatch(f"expected tensorized {plan.tensorized_shape}, got {W_t.shape}")
    perm = _interleave_perm(plan)
    inv = [0] * len(perm)
    for k, p in enumerate(perm):
        inv[p] = k
    digits = permute(reshape(W_t, _digit_shape(plan)), inv)
    return reshape(digits, plan.envelope_shape)


def pad(W: np.ndarray, plan: LayerPlan) -> np.ndarray:
    if W.shape != plan.crop:
        raise ShapeMismatch(f"layer {plan.spec.name!r}: expected {plan.crop}, got {W.shape}")
    out = np.zeros(plan.envelope_shape)
    out[tuple(slice(0, s) for s in plan.crop)] = W
    return out


def crop(W_env: np.ndarray, plan: LayerPlan) -> np.ndarray:
    if W_env.shape != plan.envelope_shape:
        raise ShapeMismatch(f"expected envelope {plan.envelope_shape}, got {W_env.shape}")
    return np.ascontiguousarray(W_env[tuple(slice(0, s) for s in plan.crop)])


def pad_crop(W: np.ndarray, plan: LayerPlan, direction: str) -> np.ndarray:
    if direction == "pad":
        return pad(W, plan)
    if direction == "crop":
        return crop(W, plan)
    raise ValueError(f"direction must be 'pad' or 'crop', got {direction!r}")

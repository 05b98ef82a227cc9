"""The shared T-Basis, per-layer coefficients, synthesis and initialization."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .exceptions import BadConfig, SizeMismatch
from .layerplan import LayerPlan, crop, untensorize
from .tring import TRCores, tr_assemble_pairwise

MODES = ("learned", "prng")


@dataclass(frozen=True)
class TBasis:
    """``B`` shared tensors of shape ``(R, N, R)`` stored as one ``(B, R, N, R)`` array."""

    tensors: np.ndarray
    mode: str = "learned"
    seed: int = 0
    generator_version: int = rng.GENERATOR_VERSION

    def __post_init__(self):
        t = np.asarray(self.tensors, dtype=np.float64)
        if t.ndim != 4 or t.shape[1] != t.shape[3]:
            raise SizeMismatch(f"basis must have shape (B, R, N, R), got {t.shape}")
        if self.mode not in MODES:
            raise BadConfig(f"basis mode must be one of {MODES}, got {self.mode!r}")
        _check_basis_size(t.shape[0], t.shape[1], t.shape[2])
        object.__setattr__(self, "tensors", t)

    @property
    def B(self) -> int:
        return self.tensors.shape[0]

    @property
    def R(self) -> int:
        return self.tensors.shape[1]

    @property
    def N(self) -> int:
        return self.tensors.shape[2]

    @property
    def trainable(self) -> bool:
        return self.mode == "learned"

    def with_tensors(self, tensors: np.ndarray) -> "TBasis":
        return replace(self, tensors=tensors)


@dataclass(frozen=True)
class LayerParams:
    """Coefficients ``alpha`` (cores x B) and adapter pre-activations ``theta`` (cores x R)."""

    plan: LayerPlan
    alpha: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        theta = np.asarray(self.theta, dtype=np.float64)
        cc = self.plan.core_count
        if alpha.ndim != 2 or alpha.shape[0] != cc:
            raise SizeMismatch(f"layer {self.name!r}: alpha must have {cc} rows, got {alpha.shape}")
        if theta.ndim != 2 or theta.shape[0] != cc:
            raise SizeMismatch(f"layer {self.name!r}: theta must have {cc} rows, got {theta.shape}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)

    @property
    def name(self) -> str:
        return self.plan.spec.name

    @property
    def adapters(self) -> np.ndarray:
        return np.exp(self.theta)


@dataclass(frozen=True)
class InitSpec:
    basis_variance: float
    layer_variance: float
    alpha_variance: float


def _check_basis_size(B: int, R: int, N: int) -> None:
    if B < 1 or R < 1 or N < 1:
        raise BadConfig(f"B, R, N must be positive, got B={B}, R={R}, N={N}")
    if B > N * R * R:
        raise BadConfig(f"basis size B={B} exceeds N*R^2={N * R * R}")


def _check_compatible(basis: TBasis, params: LayerParams) -> None:
    if params.alpha.shape[1] != basis.B:
        raise SizeMismatch(f"layer {params.name!r}: alpha has {params.alpha.shape[1]} columns, basis has B={basis.B}")
    if params.theta.shape[1] != basis.R:
        raise SizeMismatch(f"layer {params.name!r}: theta has {params.theta.shape[1]} columns, basis has R={basis.R}")
    if params.plan.N != basis.N:
        raise SizeMismatch(f"layer {params.name!r}: plan N={params.plan.N}, basis N={basis.N}")


def synth_core(basis: TBasis, coeff_row) -> np.ndarray:
    coeff_row = np.asarray(coeff_row, dtype=np.float64)
    if coeff_row.shape != (basis.B,):
        raise SizeMismatch(f"coefficient row of shape {coeff_row.shape}, expected ({basis.B},)")
    return np.tensordot(coeff_row, basis.tensors, axes=1)


def synth_cores(basis: TBasis, alpha: np.ndarray) -> np.ndarray:
    """All cores of one layer at once, shape ``(cores, R, N, R)``."""
    return np.tensordot(alpha, basis.tensors, axes=1)


def synth_layer(basis: TBasis, params: LayerParams) -> TRCores:
    _check_compatible(basis, params)
    cores = synth_cores(basis, params.alpha)
    return TRCores(tuple(cores), tuple(params.adapters))


def synth_weight(basis: TBasis, params: LayerParams, counter=None) -> np.ndarray:
    """Decompress a layer to its natural (cropped) weight shape."""
    tr = synth_layer(basis, params)
    W_t = tr_assemble_pairwise(tr, counter=counter)
    return crop(untensorize(W_t, params.plan), params.plan)


def init_tbasis(B: int, R: int, N: int, seed: int = 0, mode: str = "learned") -> TBasis:
    """Basis entries i.i.d. ``Normal(0, 1/(B R))`` from the portable generator."""
    _check_basis_size(B, R, N)
    std = np.sqrt(1.0 / (B * R))
    tensors = rng.normal(seed, (B, R, N, R), std=std)
    return TBasis(tensors, mode=mode, seed=int(seed))


def layer_variance(plan: LayerPlan) -> float:
    """He fan-in target: ``gain / (C_in K^2)``."""
    s = plan.spec
    return s.gain / (s.C_in * s.K * s.K)


def init_spec(plan: LayerPlan, basis: TBasis) -> InitSpec:
    sigma2 = layer_variance(plan)
    return InitSpec(
        basis_variance=1.0 / (basis.B * basis.R),
        layer_variance=sigma2,
        alpha_variance=sigma2 ** (1.0 / plan.core_count),
    )


def init_layer_params(plan: LayerPlan, basis: TBasis, seed: int, correct: bool = True) -> LayerParams:
    """Draw coefficients for one layer, then rescale them to hit the target variance.

    The correction synthesizes the layer, measures the variance over the
    valid (cropped) region and scales ``alpha`` by
    ``(target / measured) ** (1 / (2 * cores))``; the weight is homogeneous
    of degree ``cores`` in ``alpha``, so the corrected variance is exact.
    """
    spec = init_spec(plan, basis)
    cc = plan.core_count
    alpha = rng.normal(seed, (cc, basis.B), std=np.sqrt(spec.alpha_variance))
    params = LayerParams(plan, alpha, np.zeros((cc, basis.R)))
    if not correct:
        return params
    measured = float(np.var(synth_weight(basis, params)))
    if measured > 0 and np.isfinite(measured):
        scale = (spec.layer_variance / measured) ** (1.0 / (2 * cc))
        params = replace(params, alpha=alpha * scale)
    return params


@dataclass(frozen=True)
class TBasisModel:
    """A basis plus the parameters of every compressed layer."""

    basis: TBasis
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        names = [lp.name for lp in layers]
        if len(set(names)) != len(names):
            raise BadConfig(f"duplicate layer names in {names}")
        for lp in layers:
            _check_compatible(self.basis, lp)
        object.__setattr__(self, "layers", layers)

    def layer(self, name: str) -> LayerParams:
        for lp in self.layers:
            if lp.name == name:
                return lp
        raise KeyError(f"no layer named {name!r}; have {[lp.name for lp in self.layers]}")


def init_model(plans, B: int, R: int, seed: int = 0, mode: str = "learned") -> TBasisModel:
    """Basis and variance-corrected layer parameters, all seeded from ``seed``."""
    plans = [p for p in plans if p.spec.compress]
    if not plans:
        raise BadConfig("network has no compressed layers")
    N = plans[0].N
    basis = init_tbasis(B, R, N, rng.derive_seed(seed, "basis"), mode)
    layers = tuple(init_layer_params(p, basis, rng.derive_seed(seed, f"layer:{p.spec.name}")) for p in plans)
    return TBasisModel(basis, layers)

"""Fitting a shared basis and per-layer coefficients to a set of target weights.

The objective is::

    J = sum_l ||crop(S_l) - T_l||^2 + reg_weight * sum_l ||crop(S_l)||^2

where ``S_l`` is the synthesized envelope of layer ``l``. Gradients are
propagated by hand through the fixed synthesis graph: linear combination of
basis tensors, adapter scaling, ring contraction, relabeling and crop.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .basis import LayerParams, TBasis, synth_cores
from .exceptions import BadConfig, NonFinite, ShapeMismatch
from .layerplan import crop, pad, tensorize, untensorize
from .tensor import frobenius
from .tring import TRCores, tr_assemble_pairwise

DEFAULT_REG_WEIGHT = 3e-4


@dataclass(frozen=True)
class FitProblem:
    basis: TBasis
    layers: tuple
    targets: tuple
    reg_weight: float = DEFAULT_REG_WEIGHT
    train_basis: bool = True
    # False freezes theta; with theta = 0 the rings run without rank adapters
    train_adapters: bool = True

    def __post_init__(self):
        layers = tuple(self.layers)
        targets = tuple(np.asarray(t, dtype=np.float64) for t in self.targets)
        if len(layers) != len(targets):
            raise ShapeMismatch(f"{len(layers)} layers but {len(targets)} targets")
        for lp, t in zip(layers, targets):
            if t.shape != lp.plan.crop:
                raise ShapeMismatch(f"layer {lp.name!r}: target shape {t.shape}, expected {lp.plan.crop}")
        if self.reg_weight < 0:
            raise BadConfig("reg_weight must be >= 0")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "targets", targets)

    @property
    def basis_free(self) -> bool:
        return self.train_basis and self.basis.trainable

    # flat parameter vector: [basis?] + per layer [alpha, theta?]
    def vector(self) -> np.ndarray:
        parts = [self.basis.tensors.ravel()] if self.basis_free else []
        for lp in self.layers:
            parts.append(lp.alpha.ravel())
            if self.train_adapters:
                parts.append(lp.theta.ravel())
        return np.concatenate(parts)

    def with_vector(self, vec: np.ndarray) -> "FitProblem":
        pos = 0
        basis = self.basis
        if self.basis_free:
            size = basis.tensors.size
            basis = basis.with_tensors(vec[pos : pos + size].reshape(basis.tensors.shape).copy())
            pos += size
        layers = []
        for lp in self.layers:
            a, t = lp.alpha.size, lp.theta.size
            alpha = vec[pos : pos + a].reshape(lp.alpha.shape).copy()
            pos += a
            theta = lp.theta
            if self.train_adapters:
                theta = vec[pos : pos + t].reshape(lp.theta.shape).copy()
                pos += t
            layers.append(replace(lp, alpha=alpha, theta=theta))
        return replace(self, basis=basis, layers=tuple(layers))


@dataclass
class Gradients:
    basis: np.ndarray
    alpha: list
    theta: list

    def vector(self, include_basis: bool, include_theta: bool = True) -> np.ndarray:
        parts = [self.basis.ravel()] if include_basis else []
        for a, t in zip(self.alpha, self.theta):
            parts += [a.ravel(), t.ravel()] if include_theta else [a.ravel()]
        return np.concatenate(parts)


def _checked_adapters(lp: LayerParams) -> np.ndarray:
    with np.errstate(over="ignore", under="ignore"):
        rho = lp.adapters
    # exp over/underflow during a diverging run
    if not np.all(np.isfinite(rho)) or np.any(rho == 0):
        raise NonFinite(f"rank adapters of layer {lp.name!r} left floating-point range")
    return rho


def synthesize(basis: TBasis, lp: LayerParams) -> np.ndarray:
    cores = synth_cores(basis, lp.alpha)
    W_t = tr_assemble_pairwise(TRCores(tuple(cores), tuple(_checked_adapters(lp))))
    return crop(untensorize(W_t, lp.plan), lp.plan)


def _layer_terms(p: FitProblem):
    for lp, target in zip(p.layers, p.targets):
        S = synthesize(p.basis, lp)
        yield lp, S, target


def loss(p: FitProblem) -> float:
    total = 0.0
    for _, S, T in _layer_terms(p):
        total += float(np.sum((S - T) ** 2)) + p.reg_weight * float(np.sum(S**2))
    if not np.isfinite(total):
        raise NonFinite("objective is not finite; synthesis diverged")
    return total


def _ring_core_grads(folded: Sequence[np.ndarray], G: np.ndarray) -> list:
    """Gradient w.r.t. each folded core of ``<G, ring(folded)>``."""
    D = len(folded)
    R = folded[0].shape[0]
    if D == 1:
        return [np.einsum("i,ab->aib", G, np.eye(R))]

    def chain(seq):
        block = seq[0]
        for c in seq[1:]:
            block = np.tensordot(block, c, axes=([block.ndim - 1], [0]))
        return block

    prefix = [None] * D  # prefix[k] = F_0 x .. x F_{k-1}
    acc = None
    for k in range(D - 1):
        prefix[k] = acc
        acc = folded[k] if acc is None else np.tensordot(acc, folded[k], axes=([acc.ndim - 1], [0]))
    prefix[D - 1] = acc
    suffix = [None] * D  # suffix[k] = F_{k+1} x .. x F_{D-1}
    acc = None
    for k in range(D - 1, 0, -1):
        suffix[k] = acc
        acc = folded[k] if acc is None else np.tensordot(folded[k], acc, axes=([2], [0]))
    suffix[0] = acc

    grads = []
    for k in range(D):
        if suffix[k] is None:
            env = prefix[k]
        elif prefix[k] is None:
            env = suffix[k]
        else:
            env = chain([suffix[k], prefix[k]])
        # env: (r_{k+1}, i_{k+1}.., i_{k-1}, r_k)
        order = list(range(k, D)) + list(range(k))
        Gk = np.transpose(G, order)
        rest = list(range(1, D))
        g = np.tensordot(Gk, env, axes=(rest, rest))  # (i_k, r_{k+1}, r_k)
        grads.append(np.transpose(g, (2, 0, 1)))
    return grads


def loss_and_grad(p: FitProblem) -> tuple[float, Gradients]:
    basis = p.basis
    dB = np.zeros_like(basis.tensors)
    d_alpha, d_theta = [], []
    total = 0.0
    for lp, T in zip(p.layers, p.targets):
        cores = synth_cores(basis, lp.alpha)  # (cc, R, N, R)
        rho = _checked_adapters(lp)
        folded = rho[:, :, None, None] * cores
        W_t = tr_assemble_pairwise(TRCores(tuple(folded)))
        S = crop(untensorize(W_t, lp.plan), lp.plan)
        resid = S - T
        total += float(np.sum(resid**2)) + p.reg_weight * float(np.sum(S**2))
        dS = 2.0 * resid + 2.0 * p.reg_weight * S
        G = tensorize(pad(dS, lp.plan), lp.plan)
        dF = np.stack(_ring_core_grads(list(folded), G))
        dC = rho[:, :, None, None] * dF
        d_theta.append(np.sum(dF * folded, axis=(2, 3)))
        d_alpha.append(np.tensordot(dC, basis.tensors, axes=([1, 2, 3], [1, 2, 3])))
        dB += np.tensordot(lp.alpha.T, dC, axes=1)
    if not np.isfinite(total):
        raise NonFinite("objective is not finite; synthesis diverged")
    if not p.basis_free:
        dB = np.zeros_like(dB)
    return total, Gradients(dB, d_alpha, d_theta)


def grad(p: FitProblem) -> Gradients:
    return loss_and_grad(p)[1]


def fd_check(p: FitProblem, eps: float = 1e-5, samples: int = 100, seed: int = 0) -> float:
    """Largest relative gap between analytic and central-difference partials.

    ``samples`` coordinates of the free-parameter vector are drawn without
    replacement (all of them if the vector is shorter).
    """
    if eps <= 0:
        raise BadConfig("eps must be positive")
    x0 = p.vector()
    analytic = grad(p).vector(p.basis_free, p.train_adapters)
    rng = np.random.default_rng(seed)
    idx = rng.choice(x0.size, size=min(samples, x0.size), replace=False)
    worst = 0.0
    for i in idx:
        xp, xm = x0.copy(), x0.copy()
        xp[i] += eps
        xm[i] -= eps
        numeric = (loss(p.with_vector(xp)) - loss(p.with_vector(xm))) / (2 * eps)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), 1e-12)
        worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class FitConfig:
    optimizer: str = "adam"
    lr: float = 3e-3
    iterations: int = 1000
    seed: int = 0
    warmup_steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_check_samples: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise BadConfig(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.lr <= 0:
            raise BadConfig("lr must be positive")
        if self.iterations < 0 or self.warmup_steps < 0:
            raise BadConfig("iterations and warmup_steps must be >= 0")


@dataclass
class FitReport:
    history: list = field(default_factory=list)
    layer_errors: dict = field(default_factory=dict)
    best_loss: float = float("nan")
    grad_check: Optional[dict] = None
    aborted: bool = False
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def layer_errors(p: FitProblem) -> dict:
    out = {}
    for lp, S, T in _layer_terms(p):
        denom = frobenius(T)
        diff = frobenius(S - T)
        out[lp.name] = diff / denom if denom > 0 else diff
    return out


def _lr_at(cfg: FitConfig, step: int) -> float:
    if cfg.warmup_steps == 0:
        return cfg.lr
    return cfg.lr * min(1.0, (step + 1) / cfg.warmup_steps)


def fit(p: FitProblem, cfg: FitConfig = FitConfig()) -> tuple[FitProblem, FitReport]:
    """Minimize the objective; returns the best model seen and a report."""
    start = time.perf_counter()
    report = FitReport()
    x = p.vector()
    best_x, best_loss = x.copy(), np.inf
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t in range(cfg.iterations):
        try:
            value, g = loss_and_grad(p.with_vector(x))
        except NonFinite:
            report.aborted = True
            break
        report.history.append(value)
        if value < best_loss:
            best_loss, best_x = value, x.copy()
        gv = g.vector(p.basis_free, p.train_adapters)
        lr = _lr_at(cfg, t)
        if cfg.optimizer == "sgd":
            x = x - lr * gv
        else:
            m = cfg.beta1 * m + (1 - cfg.beta1) * gv
            v = cfg.beta2 * v + (1 - cfg.beta2) * gv * gv
            m_hat = m / (1 - cfg.beta1 ** (t + 1))
            v_hat = v / (1 - cfg.beta2 ** (t + 1))
            x = x - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    if not report.aborted:
        try:
            value = loss(p.with_vector(x))
            if value < best_loss:
                best_loss, best_x = value, x
        except NonFinite:
            report.aborted = True
    if cfg.iterations == 0:
        best_loss = loss(p)
    result = p.with_vector(best_x)
    report.best_loss = float(best_loss)
    report.layer_errors = layer_errors(result)
    if cfg.grad_check_samples:
        report.grad_check = {
            "eps": 1e-5,
            "samples": cfg.grad_check_samples,
            "max_rel_error": fd_check(result, 1e-5, cfg.grad_check_samples, cfg.seed),
        }
    report.wall_time = time.perf_counter() - start
    return result, report

"""scikit-learn style front end.

``TBasisCompressor`` learns a shared basis for a set of weight tensors
(``fit``), encodes weights as per-layer coefficients against the learned
basis (``transform``), and decodes coefficients back to dense weights
(``inverse_transform``).
"""

from __future__ import annotations


import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .basis import TBasisModel, init_layer_params, init_model, synth_weight
from .exceptions import ShapeMismatch
from .fit import FitConfig, FitProblem, fit
from .layerplan import default_base, plan_layer
from .rng import derive_seed
from .tensor import relative_error
from .validation import check_positive_int, check_weight_set, specs_from_weights


class TBasisCompressor(TransformerMixin, BaseEstimator):
    """Compress a set of weight tensors with a shared Tensor Ring basis.

    Parameters
    ----------
    basis_size : int
        Number of basis tensors ``B``; must not exceed ``N * rank**2``.
    rank : int
        Tensor Ring rank ``R``. Raising the rank usually pays off before
        raising the basis size.
    base : int or None
        Tensorization base ``n`` (mode size ``N = n**2``). ``None`` picks
        ``max(K, 2)`` over the input weights.
    basis_mode : {"learned", "prng"}
        ``"prng"`` freezes the basis to a seeded pseudo-random draw.
    optimizer, learning_rate, max_iter, warmup_steps, reg_weight
        Fitting controls; see :class:`tbasis.fit.FitConfig`.
    gain : float
        Initialization gain of the He fan-in rule.
    random_state : int
    """

    def __init__(
        self,
        basis_size=8,
        rank=4,
        base=None,
        basis_mode="learned",
        optimizer="adam",
        learning_rate=3e-3,
        max_iter=1000,
        warmup_steps=2000,
        reg_weight=3e-4,
        gain=2.0,
        random_state=0,
    ):
        self.basis_size = basis_size
        self.rank = rank
        self.base = base
        self.basis_mode = basis_mode
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.warmup_steps = warmup_steps
        self.reg_weight = reg_weight
        self.gain = gain
        self.random_state = random_state

    def _config(self) -> FitConfig:
        return FitConfig(
            optimizer=self.optimizer,
            lr=self.learning_rate,
            iterations=self.max_iter,
            seed=self.random_state,
            warmup_steps=self.warmup_steps,
        )

    def fit(self, X, y=None):
        weights = check_weight_set(X)
        B = check_positive_int(self.basis_size, "basis_size")
        R = check_positive_int(self.rank, "rank")
        specs = specs_from_weights(weights, gain=self.gain)
        n = self.base if self.base is not None else default_base(specs)
        plans = [plan_layer(s, n) for s in specs]
        model = init_model(plans, B, R, seed=self.random_state, mode=self.basis_mode)
        problem = FitProblem(model.basis, model.layers, weights, reg_weight=self.reg_weight)
        problem, self.report_ = fit(problem, self._config())
        self.model_ = TBasisModel(problem.basis, problem.layers)
        self.basis_ = problem.basis
        self.base_ = n
        self.n_layers_ = len(weights)
        return self

    def transform(self, X):
        """Fit coefficients for ``X`` against the learned (frozen) basis."""
        check_is_fitted(self, "model_")
        weights = check_weight_set(X)
        specs = specs_from_weights(weights, gain=self.gain)
        plans = [plan_layer(s, self.base_) for s in specs]
        layers = tuple(
            init_layer_params(p, self.basis_, derive_seed(self.random_state, f"transform:{k}"))
            for k, p in enumerate(plans)
        )
        problem = FitProblem(self.basis_, layers, weights, reg_weight=self.reg_weight, train_basis=False)
        problem, _ = fit(problem, self._config())
        return list(problem.layers)

    def inverse_transform(self, codes):
        check_is_fitted(self, "model_")
        return [synth_weight(self.basis_, lp) for lp in codes]

    def reconstruct(self):
        """Dense approximations of the weights seen by ``fit``."""
        check_is_fitted(self, "model_")
        return [synth_weight(self.basis_, lp) for lp in self.model_.layers]

    def score(self, X, y=None):
        """Negative mean relative Frobenius error of the training reconstruction."""
        check_is_fitted(self, "model_")
        weights = check_weight_set(X)
        if len(weights) != self.n_layers_:
            raise ShapeMismatch(f"expected {self.n_layers_} weights, got {len(weights)}")
        errs = [relative_error(w_hat, w) for w_hat, w in zip(self.reconstruct(), weights)]
        return -float(np.mean(errs))

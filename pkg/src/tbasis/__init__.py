"""Compact representation of weight-tensor sets with a shared Tensor Ring basis."""

from .basis import (
    LayerParams,
    TBasis,
    TBasisModel,
    init_layer_params,
    init_model,
    init_tbasis,
    synth_core,
    synth_layer,
    synth_weight,
)
from .convops import conv2d_decompress, conv2d_direct, conv2d_reference, flops
from .estimator import TBasisCompressor
from .fit import FitConfig, FitProblem, fd_check, fit
from .layerplan import LayerPlan, LayerSpec, plan_layer
from .metrics import stats
from .tring import TRCores, tr_assemble_pairwise, tr_entry, tr_param_count, tr_reconstruct

__version__ = "0.1.0"

__all__ = [
    "FitConfig",
    "FitProblem",
    "LayerParams",
    "LayerPlan",
    "LayerSpec",
    "TBasis",
    "TBasisCompressor",
    "TBasisModel",
    "TRCores",
    "conv2d_decompress",
    "conv2d_direct",
    "conv2d_reference",
    "fd_check",
    "fit",
    "flops",
    "init_layer_params",
    "init_model",
    "init_tbasis",
    "plan_layer",
    "stats",
    "synth_core",
    "synth_layer",
    "synth_weight",
    "tr_assemble_pairwise",
    "tr_entry",
    "tr_param_count",
    "tr_reconstruct",
]

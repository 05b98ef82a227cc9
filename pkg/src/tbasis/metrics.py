"""Storage accounting and complexity summaries."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .layerplan import LayerPlan, LayerSpec, plan_layer


@dataclass
class LayerStats:
    name: str
    compressed: bool
    core_count: int
    uncompressed: int
    plain_tr: int
    coefficients: int
    adapters: int
    buffers: int = 0


@dataclass
class CompressionStats:
    B: int
    R: int
    N: int
    layers: list = field(default_factory=list)
    uncompressed: int = 0
    plain_tr: int = 0
    tbasis_with_basis: int = 0
    tbasis_without_basis: int = 0
    basis: int = 0
    incompressible: int = 0
    buffers: int = 0
    r_alpha: float = 0.0
    r_rho: float = 0.0
    r_basis: float = 0.0
    r_total: float = 0.0
    compression_with_basis: float = 0.0
    compression_without_basis: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def stats(
    network: Sequence[LayerSpec | LayerPlan],
    B: int,
    R: int,
    N: int,
    n: int | None = None,
    include_buffers: bool = False,
) -> CompressionStats:
    """Exact parameter counts for a network under a (B, R, N) T-Basis.

    ``network`` items are plans, or specs planned with base ``n``. Layers
    flagged ``compress=False`` count as incompressible. The storage ratio
    ``r`` compares coefficients + adapters + basis against plain Tensor Ring
    cores of the same layers.
    """
    out = CompressionStats(B=B, R=R, N=N)
    total_cores = 0
    for item in network:
        spec = item.spec if isinstance(item, LayerPlan) else item
        buffers = spec.buffers if include_buffers else 0
        out.buffers += buffers
        if not spec.compress:
            out.layers.append(LayerStats(spec.name, False, 0, spec.size, 0, 0, 0, buffers))
            out.incompressible += spec.size
            out.uncompressed += spec.size
            continue
        plan = item if isinstance(item, LayerPlan) else plan_layer(spec, n)
        cc = plan.core_count
        total_cores += cc
        ls = LayerStats(spec.name, True, cc, spec.size, cc * N * R * R, cc * B, cc * R, buffers)
        out.layers.append(ls)
        out.uncompressed += spec.size
        out.plain_tr += ls.plain_tr
    coeffs = sum(ls.coefficients + ls.adapters for ls in out.layers)
    out.basis = B * N * R * R if total_cores else 0
    out.tbasis_without_basis = coeffs + out.incompressible + out.buffers
    out.tbasis_with_basis = out.tbasis_without_basis + out.basis
    if total_cores:
        denom = total_cores * N * R * R
        out.r_alpha = total_cores * B / denom
        out.r_rho = total_cores * R / denom
        out.r_basis = out.basis / denom
        out.r_total = (total_cores * B + total_cores * R + out.basis) / denom
    base = out.uncompressed + out.buffers
    if base:
        out.compression_with_basis = out.tbasis_with_basis / base
        out.compression_without_basis = out.tbasis_without_basis / base
    return out


def closed_form_ratio(L: int, d: int, B: int, R: int, N: int) -> tuple[float, float, float, float]:
    """``(r_alpha, r_rho, r_basis, r)`` for ``L`` layers of ``d`` cores each."""
    r_alpha = B / (N * R * R)
    r_rho = 1.0 / (N * R)
    r_basis = B / (d * L)
    total = (L * d * B + L * d * R + B * N * R * R) / (d * L * N * R * R)
    return r_alpha, r_rho, r_basis, total


REMARK_CONSTANT = 3


def remark_bound(plans: Sequence[LayerPlan], B: int, R: int) -> tuple[int, float]:
    """Coefficient + adapter storage against ``3 (B + R) L log_n S``.

    ``S`` is the weight count of the largest layer. The constant 3 is our
    choice; the asymptotic statement does not fix one.
    """
    plans = [p for p in plans if p.spec.compress]
    if not plans:
        return 0, 0.0
    actual = sum(p.core_count * (B + R) for p in plans)
    n = plans[0].n
    S = max(p.spec.size for p in plans)
    bound = REMARK_CONSTANT * (B + R) * len(plans) * math.log(S, n) if S > 1 else 0.0
    return actual, bound


def format_table(s: CompressionStats) -> str:
    rows = [("layer", "cores", "uncompressed", "plain_tr", "coeffs", "adapters", "buffers")]
    for ls in s.layers:
        cores = str(ls.core_count) if ls.compressed else "-"
        rows.append((ls.name, cores, str(ls.uncompressed), str(ls.plain_tr), str(ls.coefficients), str(ls.adapters), str(ls.buffers)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in rows]
    lines.append("")
    for key in ("uncompressed", "plain_tr", "basis", "incompressible", "tbasis_with_basis", "tbasis_without_basis"):
        lines.append(f"{key:<26}{getattr(s, key)}")
    for key in ("r_alpha", "r_rho", "r_basis", "r_total", "compression_with_basis", "compression_without_basis"):
        lines.append(f"{key:<26}{getattr(s, key):.6f}")
    return "\n".join(lines)

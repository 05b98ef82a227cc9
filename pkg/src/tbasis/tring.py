"""Tensor Ring cores, brute-force evaluation and full reconstruction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import BadConfig, IndexOutOfRange, ShapeMismatch
from .tensor import contract


@dataclass(frozen=True)
class TRCores:
    """A ring of 3-mode cores ``C_k`` of shape ``(R, N_k, R)``.

    ``adapters[k]`` is the positive diagonal of the rank adapter acting on the
    left rank index of core ``k`` (the link shared with core ``k - 1``).
    """

    cores: tuple
    adapters: Optional[tuple] = None
    rank: int = field(init=False)

    def __post_init__(self):
        cores = tuple(np.asarray(c, dtype=np.float64) for c in self.cores)
        if not cores:
            raise BadConfig("a tensor ring needs at least one core")
        R = cores[0].shape[0]
        for k, c in enumerate(cores):
            if c.ndim != 3 or c.shape[0] != R or c.shape[2] != R:
                raise ShapeMismatch(f"core {k} has shape {c.shape}, expected ({R}, N, {R})")
        object.__setattr__(self, "cores", cores)
        object.__setattr__(self, "rank", R)
        if self.adapters is not None:
            adapters = tuple(np.asarray(a, dtype=np.float64) for a in self.adapters)
            if len(adapters) != len(cores):
                raise ShapeMismatch(f"{len(adapters)} adapters for {len(cores)} cores")
            for a in adapters:
                if a.shape != (R,):
                    raise ShapeMismatch(f"adapter of shape {a.shape}, expected ({R},)")
                if not np.all(a > 0):
                    raise BadConfig("rank adapters must be strictly positive")
            object.__setattr__(self, "adapters", adapters)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    def __len__(self) -> int:
        return len(self.cores)

    def folded_cores(self) -> tuple:
        """Cores with each adapter absorbed into the left rank index."""
        if self.adapters is None:
            return self.cores
        return tuple(a[:, None, None] * c for a, c in zip(self.adapters, self.cores))

    def roll(self, shift: int) -> "TRCores":
        """Cyclically shift cores (and adapters) left by ``shift``."""
        d = len(self.cores)
        order = [(k + shift) % d for k in range(d)]
        cores = tuple(self.cores[k] for k in order)
        adapters = None if self.adapters is None else tuple(self.adapters[k] for k in order)
        return TRCores(cores, adapters)


def tr_entry(tr: TRCores, index: Sequence[int]) -> float:
    """Evaluate one entry by summing the ring product over every rank path.

    This is the definitional sum and deliberately does not reorder the
    computation; it exists as an oracle for the faster routines.
    """
    index = tuple(int(i) for i in index)
    d = len(tr)
    if len(index) != d:
        raise IndexOutOfRange(f"index has {len(index)} entries for {d} cores")
    for k, (i, n) in enumerate(zip(index, tr.shape)):
        if not 0 <= i < n:
            raise IndexOutOfRange(f"index {i} out of range for mode {k} of size {n}")
    R = tr.rank
    # factor k as a d-way array over (r_1..r_d), broadcast on axes k and k+1 (mod d)
    total = np.ones((R,) * d)
    for k in range(d):
        s = tr.cores[k][:, index[k], :]
        if tr.adapters is not None:
            s = tr.adapters[k][:, None] * s
        if d == 1:
            factor = np.diag(s)
        else:
            shape = [1] * d
            shape[k] = R
            nxt = (k + 1) % d
            shape[nxt] = R
            factor = s if k < nxt else s.T
            factor = factor.reshape(shape)
        total = total * factor
    return float(total.sum())


def tr_entry_loops(tr: TRCores, index: Sequence[int]) -> float:
    """Pure-Python version of :func:`tr_entry` for tiny rings."""
    d, R = len(tr), tr.rank
    acc = 0.0
    for path in itertools.product(range(R), repeat=d):
        term = 1.0
        for k in range(d):
            r, r_next = path[k], path[(k + 1) % d]
            rho = 1.0 if tr.adapters is None else tr.adapters[k][r]
            term *= rho * tr.cores[k][r, index[k], r_next]
        acc += term
    return acc


def tr_reconstruct(tr: TRCores) -> np.ndarray:
    """Full tensor via left-to-right contraction followed by the ring trace."""
    cores = tr.folded_cores()
    block = cores[0]
    for core in cores[1:]:
        block = contract(block, core, [(block.ndim - 1, 0)])
    return np.trace(block, axis1=0, axis2=block.ndim - 1)


def pairing_plan(d: int) -> list[list[tuple[int, ...]]]:
    """Greedy left-to-right pairing levels for ``d`` blocks.

    Each level lists groups of block indices of the previous level; a leftover
    block is carried to the next level as a singleton group. Levels stop when
    at most two blocks remain.
    """
    levels = []
    count = d
    while count > 2:
        groups = [(i, i + 1) for i in range(0, count - 1, 2)]
        if count % 2:
            groups.append((count - 1,))
        levels.append(groups)
        count = len(groups)
    return levels


def _merge(a: np.ndarray, b: np.ndarray, counter=None) -> np.ndarray:
    """(A x B): contract last rank mode of ``a`` with the first of ``b``."""
    out = contract(a, b, [(a.ndim - 1, 0)])
    if counter is not None:
        counter.add(a.size * b.size // a.shape[-1])
    return out


def close_ring(a: np.ndarray, b: Optional[np.ndarray] = None, counter=None) -> np.ndarray:
    """Trace the outer rank modes of one block, or of the pair ``(a, b)``."""
    if b is None:
        if counter is not None:
            counter.add(a.size // a.shape[0])
        return np.trace(a, axis1=0, axis2=a.ndim - 1)
    # W(I, J) = sum_{x, y} a(x, I, y) b(y, J, x)
    out = contract(a, b, [(a.ndim - 1, 0), (0, b.ndim - 1)])
    if counter is not None:
        counter.add(a.size * b.size // (a.shape[0] * a.shape[-1]))
    return out


def tr_assemble_pairwise(tr: TRCores, counter=None) -> np.ndarray:
    """Full tensor via multilevel pairwise contraction of neighbouring cores.

    Adapters are folded into their cores first. ``counter`` (any object with
    an ``add(int)`` method) receives the multiply-add count of every step.
    """
    if tr.adapters is None:
        blocks = list(tr.cores)
    else:
        blocks = []
        for a, c in zip(tr.adapters, tr.cores):
            blocks.append(a[:, None, None] * c)
            if counter is not None:
                counter.add(c.size)
    for groups in pairing_plan(len(blocks)):
        nxt = []
        for g in groups:
            if len(g) == 2:
                nxt.append(_merge(blocks[g[0]], blocks[g[1]], counter))
            else:
                nxt.append(blocks[g[0]])
        blocks = nxt
    if len(blocks) == 1:
        return close_ring(blocks[0], counter=counter)
    return close_ring(blocks[0], blocks[1], counter=counter)


def tr_param_count(shape: Sequence[int], rank: int) -> int:
    return sum(rank * int(n) * rank for n in shape)


def random_tr(shape: Sequence[int], rank: int, rng: np.random.Generator, adapters: bool = False) -> TRCores:
    cores = tuple(rng.standard_normal((rank, n, rank)) for n in shape)
    rho = None
    if adapters:
        rho = tuple(np.exp(rng.uniform(-0.5, 0.5, size=rank)) for _ in shape)
    return TRCores(cores, rho)

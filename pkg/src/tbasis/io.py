"""File formats: TBM1 model files, JSON network descriptions, atomic writes.

TBM1 layout (all integers little-endian)::

    b"TBM1"
    u32 generator_version
    u32 B, u32 R, u32 N, u32 n
    u8  basis mode (0 = learned, 1 = prng)
    u64 seed                         # key of the basis generator stream
    u32 layer count
    B x DTF1 (R, N, R)               # omitted for prng mode
    per layer:
        u32 name length, utf-8 name
        u8  kind (0 = conv, 1 = linear)
        u32 C_out, u32 C_in, u32 K, f64 gain, u32 d
        DTF1 alpha (cores, B), DTF1 theta (cores, R)

A prng basis is regenerated from (B, R, N, seed) on load; a file written with
a different generator version is rejected.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import jsonschema
import numpy as np

from . import rng
from .basis import LayerParams, TBasis, TBasisModel, init_tbasis
from .exceptions import BadConfig, FormatError, ShapeMismatch, SizeMismatch
from .fit import DEFAULT_REG_WEIGHT, FitConfig
from .layerplan import LayerPlan, LayerSpec, default_base, plan_layer
from .tensor import read_dtf, write_dtf

TBM_MAGIC = b"TBM1"
_KIND_CODES = {"conv": 0, "linear": 1}
_MODE_CODES = {"learned": 0, "prng": 1}


def _inv(d):
    return {v: k for k, v in d.items()}


def write_model(fh: BinaryIO, model: TBasisModel) -> None:
    b = model.basis
    n = model.layers[0].plan.n
    fh.write(TBM_MAGIC)
    fh.write(struct.pack("<5I", b.generator_version, b.B, b.R, b.N, n))
    fh.write(struct.pack("<BQ", _MODE_CODES[b.mode], b.seed))
    fh.write(struct.pack("<I", len(model.layers)))
    if b.mode == "learned":
        for t in b.tensors:
            write_dtf(fh, t)
    for lp in model.layers:
        s = lp.plan.spec
        name = s.name.encode("utf-8")
        fh.write(struct.pack("<I", len(name)) + name)
        fh.write(struct.pack("<B3IdI", _KIND_CODES[s.kind], s.C_out, s.C_in, s.K, s.gain, lp.plan.d))
        write_dtf(fh, lp.alpha)
        write_dtf(fh, lp.theta)


def _unpack(fh: BinaryIO, fmt: str):
    size = struct.calcsize(fmt)
    raw = fh.read(size)
    if len(raw) != size:
        raise FormatError("truncated TBM1 file")
    return struct.unpack(fmt, raw)


def read_model(fh: BinaryIO) -> TBasisModel:
    if fh.read(4) != TBM_MAGIC:
        raise FormatError("not a TBM1 model file")
    version, B, R, N, n = _unpack(fh, "<5I")
    mode_code, seed = _unpack(fh, "<BQ")
    (count,) = _unpack(fh, "<I")
    mode = _inv(_MODE_CODES).get(mode_code)
    if mode is None:
        raise FormatError(f"unknown basis mode code {mode_code}")
    if mode == "prng":
        if version != rng.GENERATOR_VERSION:
            raise FormatError(f"prng basis written by generator v{version}, this build has v{rng.GENERATOR_VERSION}")
        basis = init_tbasis(B, R, N, seed, "prng")
    else:
        tensors = np.stack([read_dtf(fh) for _ in range(B)])
        basis = TBasis(tensors, mode="learned", seed=seed, generator_version=version)
    if basis.tensors.shape != (B, R, N, R):
        raise FormatError(f"basis shape {basis.tensors.shape} does not match header")
    layers = []
    for _ in range(count):
        (length,) = _unpack(fh, "<I")
        raw = fh.read(length)
        if len(raw) != length:
            raise FormatError("truncated TBM1 file")
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("layer name is not valid utf-8") from None
        kind_code, C_out, C_in, K, gain, d = _unpack(fh, "<B3IdI")
        kind = _inv(_KIND_CODES).get(kind_code)
        if kind is None:
            raise FormatError(f"unknown layer kind code {kind_code}")
        try:
            plan = plan_layer(LayerSpec(name, kind, C_out, C_in, K, gain), n)
        except BadConfig as exc:
            raise FormatError(f"invalid layer record: {exc}") from None
        if plan.d != d:
            raise FormatError(f"layer {name!r}: stored d={d}, planned d={plan.d}")
        alpha, theta = read_dtf(fh), read_dtf(fh)
        try:
            layers.append(LayerParams(plan, alpha, theta))
        except (SizeMismatch, ShapeMismatch) as exc:
            raise FormatError(f"invalid layer record: {exc}") from None
    if fh.read(1):
        raise FormatError("trailing bytes after TBM1 model")
    try:
        return TBasisModel(basis, tuple(layers))
    except (BadConfig, SizeMismatch, ShapeMismatch) as exc:
        raise FormatError(f"inconsistent TBM1 model: {exc}") from None


def model_bytes(model: TBasisModel) -> bytes:
    buf = io.BytesIO()
    write_model(buf, model)
    return buf.getvalue()


def model_from_bytes(raw: bytes) -> TBasisModel:
    return read_model(io.BytesIO(raw))


def atomic_write(path, payload: bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- network description ---------------------------------------------------

NETWORK_SCHEMA = {
    "type": "object",
    "required": ["B", "R", "layers"],
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "B": {"type": "integer", "minimum": 1},
        "R": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "basis_mode": {"enum": ["learned", "prng"]},
        "layers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "kind", "C_out", "C_in"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "kind": {"enum": ["conv", "linear"]},
                    "C_out": {"type": "integer", "minimum": 1},
                    "C_in": {"type": "integer", "minimum": 1},
                    "K": {"type": "integer", "minimum": 1},
                    "gain": {"type": "number", "exclusiveMinimum": 0},
                    "compress": {"type": "boolean"},
                    "buffers": {"type": "integer", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "fit": {
            "type": "object",
            "properties": {
                "optimizer": {"enum": ["adam", "sgd"]},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "iterations": {"type": "integer", "minimum": 0},
                "warmup_steps": {"type": "integer", "minimum": 0},
                "reg_weight": {"type": "number", "minimum": 0},
                "train_basis": {"type": "boolean"},
                "train_adapters": {"type": "boolean"},
                "grad_check_samples": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class NetworkDescription:
    B: int
    R: int
    layers: list
    n: int
    seed: int = 0
    basis_mode: str = "learned"
    fit: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.n * self.n

    def plans(self, compressed_only: bool = True) -> list[LayerPlan]:
        return [plan_layer(s, self.n) for s in self.layers if s.compress or not compressed_only]

    def fit_config(self, **overrides) -> tuple[FitConfig, dict]:
        """Optimizer settings plus the keyword options of ``FitProblem``."""
        cfg = {**self.fit, **{k: v for k, v in overrides.items() if v is not None}}
        options = {
            "reg_weight": cfg.pop("reg_weight", DEFAULT_REG_WEIGHT),
            "train_basis": cfg.pop("train_basis", True),
            "train_adapters": cfg.pop("train_adapters", True),
        }
        cfg.setdefault("seed", self.seed)
        return FitConfig(**cfg), options


def parse_network(doc: dict) -> NetworkDescription:
    try:
        jsonschema.validate(doc, NETWORK_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise BadConfig(f"network description invalid at {where}: {exc.message}") from None
    layers = []
    for entry in doc["layers"]:
        kind = entry["kind"]
        layers.append(
            LayerSpec(
                name=entry["name"],
                kind=kind,
                C_out=entry["C_out"],
                C_in=entry["C_in"],
                K=entry.get("K", 1 if kind == "linear" else 3),
                gain=entry.get("gain", 2.0),
                compress=entry.get("compress", True),
                buffers=entry.get("buffers", 0),
            )
        )
    names = [s.name for s in layers]
    dupes = sorted({x for x in names if names.count(x) > 1})
    if dupes:
        raise BadConfig(f"duplicate layer names: {dupes}")
    n = doc.get("n", default_base(layers))
    return NetworkDescription(
        B=doc["B"],
        R=doc["R"],
        layers=layers,
        n=n,
        seed=doc.get("seed", 0),
        basis_mode=doc.get("basis_mode", "learned"),
        fit=dict(doc.get("fit", {})),
    )


def load_network(path) -> NetworkDescription:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BadConfig(f"{path}: not valid JSON ({exc})") from None
    return parse_network(doc)

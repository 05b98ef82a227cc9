import json
import struct

import numpy as np
import pytest

from tbasis import rng as tbrng
from tbasis.basis import init_model
from tbasis.exceptions import BadConfig, FormatError
from tbasis.io import atomic_write, load_network, model_bytes, model_from_bytes, parse_network, read_model, write_model
from tbasis.layerplan import LayerSpec, plan_layer


def small_model(mode="learned", seed=5):
    specs = [LayerSpec("conv_a", "conv", 6, 4, 3), LayerSpec("fc", "linear", 10, 12, gain=1.0)]
    return init_model([plan_layer(s, 3) for s in specs], B=4, R=2, seed=seed, mode=mode)


def assert_models_equal(a, b):
    assert np.array_equal(a.basis.tensors, b.basis.tensors)
    assert (a.basis.mode, a.basis.seed) == (b.basis.mode, b.basis.seed)
    for x, y in zip(a.layers, b.layers, strict=True):
        assert x.plan == y.plan
        assert np.array_equal(x.alpha, y.alpha) and np.array_equal(x.theta, y.theta)


@pytest.mark.parametrize("mode", ["learned", "prng"])
def test_roundtrip_is_bitwise(mode):
    m = small_model(mode)
    raw = model_bytes(m)
    back = model_from_bytes(raw)
    assert_models_equal(m, back)
    assert model_bytes(back) == raw


def test_prng_basis_not_stored():
    learned, prng = model_bytes(small_model("learned")), model_bytes(small_model("prng"))
    basis_bytes = sum(4 + 4 + 3 * 8 + 2 * 9 * 2 * 8 for _ in range(4))
    assert len(learned) - len(prng) == basis_bytes


def test_file_roundtrip(tmp_path):
    m = small_model()
    path = tmp_path / "m.tbm"
    with open(path, "wb") as fh:
        write_model(fh, m)
    with open(path, "rb") as fh:
        assert_models_equal(m, read_model(fh))


def test_generator_version_mismatch_rejected():
    raw = bytearray(model_bytes(small_model("prng")))
    struct.pack_into("<I", raw, 4, tbrng.GENERATOR_VERSION + 1)
    with pytest.raises(FormatError, match="generator"):
        model_from_bytes(bytes(raw))


def test_bad_magic():
    with pytest.raises(FormatError):
        model_from_bytes(b"TBM2" + model_bytes(small_model())[4:])


@pytest.mark.parametrize("mode", ["learned", "prng"])
def test_every_truncation_is_rejected(mode):
    raw = model_bytes(small_model(mode))
    for cut in range(len(raw)):
        with pytest.raises(FormatError):
            model_from_bytes(raw[:cut])


def test_trailing_bytes_rejected():
    with pytest.raises(FormatError):
        model_from_bytes(model_bytes(small_model()) + b"\0")


def test_atomic_write_replaces(tmp_path):
    path = tmp_path / "out.bin"
    path.write_bytes(b"old")
    atomic_write(path, b"new contents")
    assert path.read_bytes() == b"new contents"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.bin"]


def test_atomic_write_leaves_target_on_failure(tmp_path):
    path = tmp_path / "out.bin"
    path.write_bytes(b"old")
    with pytest.raises(TypeError):
        atomic_write(path, "not bytes")
    assert path.read_bytes() == b"old"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.bin"]


BASE_DOC = {"n": 3, "B": 4, "R": 2, "layers": [{"name": "a", "kind": "conv", "C_out": 4, "C_in": 3}]}


def test_parse_defaults():
    net = parse_network(BASE_DOC)
    (spec,) = net.layers
    assert (spec.K, spec.gain, spec.compress, spec.buffers) == (3, 2.0, True, 0)
    assert net.seed == 0 and net.basis_mode == "learned" and net.N == 9


def test_default_base_from_kernels():
    doc = {"B": 4, "R": 2, "layers": [{"name": "a", "kind": "conv", "C_out": 4, "C_in": 3, "K": 5}]}
    assert parse_network(doc).n == 5


@pytest.mark.parametrize(
    "patch",
    [
        {"B": 0},
        {"R": "two"},
        {"layers": []},
        {"layers": [{"name": "a", "kind": "pool", "C_out": 4, "C_in": 3}]},
        {"layers": [{"name": "a", "kind": "conv", "C_out": 0, "C_in": 3}]},
        {"layers": [{"kind": "conv", "C_out": 4, "C_in": 3}]},
        {"basis_mode": "random"},
        {"surprise": 1},
        {"layers": [{"name": "a", "kind": "linear", "C_out": 4, "C_in": 3}] * 2},
    ],
)
def test_invalid_descriptions(patch):
    with pytest.raises(BadConfig):
        parse_network({**BASE_DOC, **patch})


def test_load_network_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(BadConfig, match="not valid JSON"):
        load_network(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(BASE_DOC))
    assert load_network(good).layers[0].name == "a"


def test_fit_config_overrides():
    net = parse_network({**BASE_DOC, "seed": 9, "fit": {"lr": 0.01, "iterations": 5, "reg_weight": 0.0}})
    cfg, options = net.fit_config(iterations=7, lr=None)
    assert (cfg.lr, cfg.iterations, cfg.seed) == (0.01, 7, 9)
    assert options == {"reg_weight": 0.0, "train_basis": True, "train_adapters": True}

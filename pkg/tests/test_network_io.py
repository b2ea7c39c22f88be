import json

import numpy as np
import pytest

from gridverify import (
    ComposedNetwork,
    ManifestError,
    NetworkSpec,
    forward,
    forward_composed,
    load_composed,
    load_network,
    save_composed,
    save_network,
)
from gridverify.fixtures import (
    conv_regressor,
    identity_composed,
    image_decoder,
    pool_regressor,
)
from gridverify.layers import Activation, Dense


def _read(path):
    return path.read_bytes()


def test_manifest_blob_round_trip_bytes(tmp_path):
    net = conv_regressor(descale=(-2.63, -0.37), seed=17)
    p1 = tmp_path / "net.json"
    save_network(net, p1)
    loaded = load_network(p1)
    p2 = tmp_path / "again.json"
    save_network(loaded, p2)
    assert _read(p1) == _read(p2).replace(b"again.bin", b"net.bin")
    assert _read(tmp_path / "net.bin") == _read(tmp_path / "again.bin")


def test_loaded_weights_are_widened_f32(tmp_path):
    net = image_decoder(seed=4)
    save_network(net, tmp_path / "dec.json")
    loaded = load_network(tmp_path / "dec.json")
    orig = net.layers[0].weight
    got = loaded.layers[0].weight
    assert got.dtype == np.float64
    assert np.array_equal(got, orig.astype(np.float32).astype(np.float64))


def test_round_trip_preserves_forward(tmp_path):
    net = pool_regressor(seed=9)
    save_network(net, tmp_path / "reg.json")
    loaded = load_network(tmp_path / "reg.json")
    save_network(loaded, tmp_path / "reg2.json")
    reloaded = load_network(tmp_path / "reg2.json")
    rng = np.random.default_rng(0)
    for _ in range(10):
        img = rng.random((16, 16))
        # 32-bit storage is lossy once, then stable
        assert forward(loaded, img).tobytes() == forward(reloaded, img).tobytes()


def test_loader_rejects_disagreeing_offsets(tmp_path):
    save_network(image_decoder(seed=1), tmp_path / "net.json")
    doc = json.loads((tmp_path / "net.json").read_text())
    doc["layers"][0]["params"][0]["offset"] = 4
    (tmp_path / "net.json").write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match="offset"):
        load_network(tmp_path / "net.json")


def test_loader_rejects_truncated_blob(tmp_path):
    save_network(image_decoder(seed=1), tmp_path / "net.json")
    blob = (tmp_path / "net.bin").read_bytes()
    (tmp_path / "net.bin").write_bytes(blob[:-8])
    with pytest.raises(ManifestError):
        load_network(tmp_path / "net.json")


def test_loader_rejects_oversized_blob(tmp_path):
    save_network(image_decoder(seed=1), tmp_path / "net.json")
    blob = (tmp_path / "net.bin").read_bytes()
    (tmp_path / "net.bin").write_bytes(blob + b"\x00" * 16)
    with pytest.raises(ManifestError, match="blob"):
        load_network(tmp_path / "net.json")


def test_loader_rejects_wrong_format(tmp_path):
    (tmp_path / "net.json").write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ManifestError, match="not a network manifest"):
        load_network(tmp_path / "net.json")


def test_loader_rejects_unknown_version(tmp_path):
    save_network(image_decoder(seed=1), tmp_path / "net.json")
    doc = json.loads((tmp_path / "net.json").read_text())
    doc["version"] = 99
    (tmp_path / "net.json").write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match="version"):
        load_network(tmp_path / "net.json")


def test_descale_requires_sigmoid_regressor():
    with pytest.raises(ValueError, match="descale"):
        NetworkSpec(
            name="bad",
            input_shape=(2,),
            role="regressor",
            descale=(1.0, 0.0),
            layers=[Dense(np.zeros((1, 2)), np.zeros(1))],
        )


def test_sigmoid_regressor_requires_descale():
    with pytest.raises(ValueError, match="descale"):
        NetworkSpec(
            name="bad",
            input_shape=(2,),
            role="regressor",
            layers=[Dense(np.zeros((1, 2)), np.zeros(1)), Activation("sigmoid")],
        )


def test_descale_round_trips_and_applies(tmp_path):
    net = conv_regressor(descale=(-2.5, -0.25), seed=2)
    save_network(net, tmp_path / "reg.json")
    loaded = load_network(tmp_path / "reg.json")
    assert loaded.descale == (-2.5, -0.25)
    img = np.zeros((16, 16))
    out = forward(loaded, img)
    # sigmoid output s in (0,1) mapped to -2.5*s - 0.25
    assert -2.75 < out[0] < -0.25


def test_composed_round_trip(tmp_path):
    net = identity_composed()
    save_composed(net, tmp_path / "composed.json")
    loaded = load_composed(tmp_path / "composed.json")
    assert forward_composed(loaded, np.array([-1.25, 0.1])) == -1.25
    save_composed(loaded, tmp_path / "composed2.json")
    a = (tmp_path / "composed.json").read_bytes()
    b = (tmp_path / "composed2.json").read_bytes().replace(b"composed2-", b"composed-")
    assert a == b


def test_composed_loader_rejects_single_network(tmp_path):
    save_network(image_decoder(seed=1), tmp_path / "dec.json")
    with pytest.raises(ManifestError, match="composed"):
        load_composed(tmp_path / "dec.json")


def test_composed_shape_mismatch_rejected():
    dec = image_decoder(seed=1)
    small_reg = NetworkSpec(
        name="reg",
        input_shape=(8, 8),
        layers=[],
        role="regressor",
    )
    with pytest.raises(Exception, match="decoder output"):
        ComposedNetwork(dec, small_reg)

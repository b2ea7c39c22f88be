"""Sequential network specs, composed decoder+regressor evaluation, and the
manifest + weight-blob file format.

A network is stored as two files: a JSON manifest (layer kinds, hyperparameters,
byte offsets) and a companion blob of little-endian 32-bit floats holding, per
parameterized layer, weights then bias in row-major order. The manifest loader
rejects files whose declared offsets disagree with the blob length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layers import (
    Activation,
    AvgPool2D,
    Conv2D,
    Dense,
    Layer,
    Reshape,
    ShapeError,
    TransposedConv2D,
    forward_layer,
    output_shape,
)

__all__ = [
    "ManifestError",
    "NetworkSpec",
    "ComposedNetwork",
    "forward",
    "forward_composed",
    "save_network",
    "load_network",
    "save_composed",
    "load_composed",
]

MANIFEST_FORMAT = "gridverify-network"
COMPOSED_FORMAT = "gridverify-composed"
FORMAT_VERSION = 1


class ManifestError(ValueError):
    """A network manifest or weight blob is malformed or inconsistent."""


@dataclass
class NetworkSpec:
    """An ordered chain of layers with a fixed input shape.

    `role` is "decoder", "regressor", or "encoder". `descale` is an affine
    (scale, offset) applied to the final output; it is mandatory for (and
    restricted to) regressors whose last activation is a sigmoid, turning the
    scaled estimate back into meters.
    """

    name: str
    input_shape: tuple
    layers: list[Layer] = field(default_factory=list)
    role: str = "regressor"
    descale: tuple[float, float] | None = None

    def __post_init__(self):
        self.input_shape = tuple(int(n) for n in self.input_shape)
        if any(n < 1 for n in self.input_shape):
            raise ShapeError("input extents must be positive")
        if self.role not in ("decoder", "regressor", "encoder"):
            raise ValueError(f"unknown network role {self.role!r}")
        if self.descale is not None:
            self.descale = (float(self.descale[0]), float(self.descale[1]))
        self._validate_chain()
        self._validate_descale()

    def _validate_chain(self):
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = output_shape(layer, shape)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({layer.kind}): {e}") from None
        self._output_shape = shape

    def _validate_descale(self):
        ends_sigmoid = bool(
            self.layers
            and isinstance(self.layers[-1], Activation)
            and self.layers[-1].fn == "sigmoid"
        )
        sigmoid_regressor = ends_sigmoid and self.role == "regressor"
        if self.descale is not None and not sigmoid_regressor:
            raise ValueError("descale is only valid on a sigmoid-terminated regressor")
        if sigmoid_regressor and self.descale is None:
            raise ValueError("a sigmoid-terminated regressor requires descale constants")

    @property
    def output_shape(self) -> tuple:
        return self._output_shape


@dataclass
class ComposedNetwork:
    """A decoder feeding a regressor; the object the solver reasons about."""

    decoder: NetworkSpec
    regressor: NetworkSpec
    name: str = "composed"

    def __post_init__(self):
        if self.decoder.output_shape != self.regressor.input_shape:
            raise ShapeError(
                f"decoder output {self.decoder.output_shape} != "
                f"regressor input {self.regressor.input_shape}"
            )

    @property
    def input_dim(self) -> int:
        if len(self.decoder.input_shape) != 1:
            raise ShapeError("composed network expects a 1-D configuration input")
        return self.decoder.input_shape[0]


def forward(net: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """Exact layer-by-layer evaluation of `net` on `x`, de-scaling applied last."""
    x = np.asarray(x, dtype=np.float64)
    if tuple(x.shape) != net.input_shape:
        raise ShapeError(f"input shape {tuple(x.shape)} != expected {net.input_shape}")
    for i, layer in enumerate(net.layers):
        try:
            x = forward_layer(layer, x)
        except ShapeError as e:
            raise ShapeError(f"layer {i} ({layer.kind}): {e}") from None
    if net.descale is not None:
        a, b = net.descale
        x = a * x + b
    return x


def forward_composed(net: ComposedNetwork, c: np.ndarray) -> float:
    """Scalar distance estimate of the regressor on the decoded image of `c`."""
    out = forward(net.regressor, forward(net.decoder, c))
    if out.size != 1:
        raise ShapeError(f"regressor output has {out.size} elements, expected a scalar")
    return float(out.reshape(()))


# ------------------------------------------------------------------ file format

def _params_of(layer: Layer) -> list[np.ndarray]:
    if isinstance(layer, Dense):
        return [layer.weight, layer.bias]
    if isinstance(layer, (Conv2D, TransposedConv2D)):
        return [layer.kernel, np.array([layer.bias])]
    return []


def _layer_entry(layer: Layer, offset: int) -> tuple[dict, int]:
    """Manifest entry for one layer plus the blob offset after its parameters."""
    entry: dict = {"kind": layer.kind}
    if isinstance(layer, Dense):
        entry["out_features"], entry["in_features"] = (int(n) for n in layer.weight.shape)
    elif isinstance(layer, Conv2D):
        entry["kernel_size"] = int(layer.kernel.shape[0])
        entry["stride"] = layer.stride
        entry["padding"] = layer.padding
    elif isinstance(layer, TransposedConv2D):
        entry["kernel_size"] = int(layer.kernel.shape[0])
        entry["stride"] = layer.stride
    elif isinstance(layer, AvgPool2D):
        entry["window"] = layer.window
        entry["stride"] = layer.stride
    elif isinstance(layer, Activation):
        entry["fn"] = layer.fn
    elif isinstance(layer, Reshape):
        entry["shape"] = list(layer.shape)
    else:
        raise ManifestError(f"unsupported layer kind {type(layer).__name__}")
    params = _params_of(layer)
    if params:
        entry["params"] = []
        for p in params:
            entry["params"].append({"offset": offset, "count": int(p.size)})
            offset += 4 * p.size
    return entry, offset


def save_network(net: NetworkSpec, manifest_path) -> None:
    """Write `<path>` (JSON manifest) and its companion `.bin` weight blob."""
    manifest_path = Path(manifest_path)
    blob_name = manifest_path.stem + ".bin"
    layers = []
    offset = 0
    chunks = []
    for layer in net.layers:
        entry, offset = _layer_entry(layer, offset)
        layers.append(entry)
        for p in _params_of(layer):
            chunks.append(np.ascontiguousarray(p, dtype="<f4").tobytes())
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": FORMAT_VERSION,
        "name": net.name,
        "role": net.role,
        "input_shape": list(net.input_shape),
        "blob": blob_name,
        "blob_bytes": offset,
        "descale": None if net.descale is None else {"scale": net.descale[0], "offset": net.descale[1]},
        "layers": layers,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (manifest_path.parent / blob_name).write_bytes(b"".join(chunks))


def _take(blob: np.ndarray, spec: dict, expect_offset: int, what: str) -> tuple[np.ndarray, int]:
    offset, count = int(spec["offset"]), int(spec["count"])
    if offset != expect_offset:
        raise ManifestError(f"{what}: declared offset {offset} != expected {expect_offset}")
    if offset % 4 != 0:
        raise ManifestError(f"{what}: offset {offset} not float-aligned")
    idx = offset // 4
    if idx + count > blob.size:
        raise ManifestError(f"{what}: parameters run past the end of the blob")
    return blob[idx : idx + count], offset + 4 * count


def load_network(manifest_path) -> NetworkSpec:
    """Load a manifest + blob pair, widening stored 32-bit weights to float64."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read manifest {manifest_path}: {e}") from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ManifestError(f"{manifest_path}: not a network manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise ManifestError(f"{manifest_path}: unsupported version {manifest.get('version')}")

    blob_path = manifest_path.parent / manifest["blob"]
    raw = blob_path.read_bytes()
    if len(raw) % 4 != 0:
        raise ManifestError(f"{blob_path}: blob length {len(raw)} is not a multiple of 4")
    blob = np.frombuffer(raw, dtype="<f4").astype(np.float64)

    layers: list[Layer] = []
    offset = 0
    for i, entry in enumerate(manifest["layers"]):
        kind = entry.get("kind")
        what = f"layer {i} ({kind})"
        try:
            if kind == "dense":
                rows, cols = int(entry["out_features"]), int(entry["in_features"])
                w, offset = _take(blob, entry["params"][0], offset, what)
                b, offset = _take(blob, entry["params"][1], offset, what)
                if w.size != rows * cols or b.size != rows:
                    raise ManifestError(f"{what}: parameter counts disagree with features")
                layers.append(Dense(w.reshape(rows, cols), b))
            elif kind == "conv2d":
                k = int(entry["kernel_size"])
                w, offset = _take(blob, entry["params"][0], offset, what)
                b, offset = _take(blob, entry["params"][1], offset, what)
                if w.size != k * k or b.size != 1:
                    raise ManifestError(f"{what}: parameter counts disagree with kernel_size")
                layers.append(
                    Conv2D(w.reshape(k, k), int(entry["stride"]), int(entry["padding"]), float(b[0]))
                )
            elif kind == "tconv2d":
                k = int(entry["kernel_size"])
                w, offset = _take(blob, entry["params"][0], offset, what)
                b, offset = _take(blob, entry["params"][1], offset, what)
                if w.size != k * k or b.size != 1:
                    raise ManifestError(f"{what}: parameter counts disagree with kernel_size")
                layers.append(TransposedConv2D(w.reshape(k, k), int(entry["stride"]), float(b[0])))
            elif kind == "avgpool2d":
                layers.append(AvgPool2D(int(entry["window"]), int(entry["stride"])))
            elif kind == "activation":
                layers.append(Activation(entry["fn"]))
            elif kind == "reshape":
                layers.append(Reshape(tuple(entry["shape"])))
            else:
                raise ManifestError(f"{what}: unknown layer kind")
        except KeyError as e:
            raise ManifestError(f"{what}: missing field {e}") from None
    declared = manifest.get("blob_bytes", offset)
    if offset != len(raw) or declared != len(raw):
        raise ManifestError(
            f"{manifest_path}: declared offsets cover {max(offset, declared)} bytes "
            f"but blob has {len(raw)}"
        )

    descale = manifest.get("descale")
    if descale is not None:
        descale = (float(descale["scale"]), float(descale["offset"]))
    return NetworkSpec(
        name=manifest["name"],
        input_shape=tuple(manifest["input_shape"]),
        layers=layers,
        role=manifest.get("role", "regressor"),
        descale=descale,
    )


def save_composed(net: ComposedNetwork, manifest_path) -> None:
    """Write a composed-network manifest plus its two component networks."""
    manifest_path = Path(manifest_path)
    dec_name = manifest_path.stem + "-decoder.json"
    reg_name = manifest_path.stem + "-regressor.json"
    save_network(net.decoder, manifest_path.parent / dec_name)
    save_network(net.regressor, manifest_path.parent / reg_name)
    manifest = {
        "format": COMPOSED_FORMAT,
        "version": FORMAT_VERSION,
        "name": net.name,
        "decoder": dec_name,
        "regressor": reg_name,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_composed(manifest_path) -> ComposedNetwork:
    """Load a composed network, following relative paths to its components."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read manifest {manifest_path}: {e}") from None
    if manifest.get("format") == MANIFEST_FORMAT:
        raise ManifestError(
            f"{manifest_path} is a single-network manifest; a composed manifest is required"
        )
    if manifest.get("format") != COMPOSED_FORMAT:
        raise ManifestError(f"{manifest_path}: not a composed-network manifest")
    decoder = load_network(manifest_path.parent / manifest["decoder"])
    regressor = load_network(manifest_path.parent / manifest["regressor"])
    return ComposedNetwork(decoder, regressor, name=manifest.get("name", "composed"))

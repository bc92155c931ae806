"""Weight and input ingestion.

Weight tensors live one per CSV file, named ``<ref>.weight.csv`` and
``<ref>.bias.csv``. The first line is the comma-separated shape; the
remaining lines hold the row-major values. Images are accepted either as
CSV tensors in the same format or as raw IDX dataset files.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeMismatch, WeightFormatError
from .netgraph import NetworkSpec


@dataclass
class WeightStore:
    """Named tensors plus the manifest of the files they came from."""

    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    source_manifest: list[dict] = field(default_factory=list)

    def has(self, name: str) -> bool:
        return name in self.tensors

    def get(self, name: str) -> np.ndarray:
        if name not in self.tensors:
            raise WeightFormatError(f"missing weight tensor {name!r}")
        return self.tensors[name]

    def put(self, name: str, values: np.ndarray):
        if name in self.tensors:
            raise WeightFormatError(f"duplicate weight tensor {name!r}")
        self.tensors[name] = np.asarray(values, dtype=np.float64)


def expected_tensors(net: NetworkSpec) -> dict[str, tuple]:
    """Required tensor shapes per weights_ref, derived from the graph.

    Bias tensors are optional at load time; their shapes are listed under
    ``<ref>.bias`` so generators and validators agree on them.
    """
    shapes = net.shape_chain()
    out: dict[str, tuple] = {}
    prev: tuple = tuple(net.input_shape)
    for ly in net.layers:
        cur = shapes[ly.input_from] if ly.input_from is not None else prev
        if ly.kind == "conv2d":
            out[ly.weights_ref + ".weight"] = (
                ly.out_channels, cur[0], ly.kernel, ly.kernel,
            )
            out[ly.weights_ref + ".bias"] = (ly.out_channels,)
        elif ly.kind == "fully_connected":
            out[ly.weights_ref + ".weight"] = (ly.out_channels, int(np.prod(cur)))
            out[ly.weights_ref + ".bias"] = (ly.out_channels,)
        elif ly.kind == "batchnorm_folded":
            if ly.weights_ref:
                out[ly.weights_ref + ".weight"] = (cur[0],)
                out[ly.weights_ref + ".bias"] = (cur[0],)
        prev = shapes[ly.name]
    return out


# -- CSV tensors --------------------------------------------------------------


def load_tensor_csv(path) -> np.ndarray:
    """One tensor: shape header line, then row-major values."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise WeightFormatError(f"{path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise WeightFormatError(f"{path}: empty file")
    try:
        shape = tuple(int(tok) for tok in lines[0].split(","))
        values = [float(tok) for ln in lines[1:] for tok in ln.split(",") if tok.strip()]
    except ValueError as exc:
        raise WeightFormatError(f"{path}: non-numeric cell ({exc})") from exc
    if any(s < 1 for s in shape):
        raise WeightFormatError(f"{path}: invalid shape header {shape}")
    count = int(np.prod(shape))
    if len(values) != count:
        raise WeightFormatError(
            f"{path}: shape {shape} needs {count} values, file has {len(values)}"
        )
    return np.array(values, dtype=np.float64).reshape(shape)


def save_tensor_csv(path, tensor: np.ndarray):
    tensor = np.asarray(tensor, dtype=np.float64)
    rows = tensor.reshape(tensor.shape[0], -1) if tensor.ndim > 1 else tensor.reshape(1, -1)
    lines = [",".join(str(s) for s in tensor.shape)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_weights_csv(directory, net: NetworkSpec) -> WeightStore:
    """Load and validate every tensor the network references."""
    directory = Path(directory)
    if not directory.is_dir():
        raise WeightFormatError(f"weight directory {directory} does not exist")
    store = WeightStore()
    for name, shape in expected_tensors(net).items():
        path = directory / f"{name}.csv"
        if not path.exists():
            if name.endswith(".bias"):
                continue
            raise WeightFormatError(f"missing weight file {path}")
        tensor = load_tensor_csv(path)
        if tensor.shape != shape:
            raise WeightFormatError(
                f"{path}: expected shape {shape}, got {tensor.shape}"
            )
        store.put(name, tensor)
        store.source_manifest.append({"path": str(path), "sha256": _sha256(path)})
    return store


def save_weights_csv(directory, store: WeightStore) -> list[str]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(store.tensors):
        path = directory / f"{name}.csv"
        save_tensor_csv(path, store.tensors[name])
        written.append(str(path))
    return written


def gen_fixtures(seed: int, net: NetworkSpec, out_dir) -> dict:
    """Deterministic pseudo-random weights in the CSV format.

    Weights use the He-init scale std = sqrt(2 / fan_in); biases are zero;
    folded-batchnorm scales are one. The same seed yields byte-identical
    files.
    """
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for name, shape in sorted(expected_tensors(net).items()):
        if name.endswith(".bias"):
            store.put(name, np.zeros(shape))
        elif len(shape) == 1:  # folded batchnorm scale
            store.put(name, np.ones(shape))
        else:
            fan_in = int(np.prod(shape[1:]))
            store.put(name, rng.normal(0.0, np.sqrt(2.0 / fan_in), shape))
    out_dir = Path(out_dir)
    written = save_weights_csv(out_dir, store)
    return {
        "seed": seed,
        "files": [{"path": p, "sha256": _sha256(p)} for p in written],
    }


# -- image inputs -------------------------------------------------------------


def load_idx(path) -> np.ndarray:
    """A raw IDX file (the MNIST/CIFAR-style binary container)."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 4 or data[0] != 0 or data[1] != 0:
        raise ConfigError(f"{path}: not an IDX file")
    dtype_code, ndim = data[2], data[3]
    dtypes = {
        0x08: np.uint8, 0x09: np.int8, 0x0B: np.dtype(">i2"),
        0x0C: np.dtype(">i4"), 0x0D: np.dtype(">f4"), 0x0E: np.dtype(">f8"),
    }
    if dtype_code not in dtypes:
        raise ConfigError(f"{path}: unknown IDX dtype 0x{dtype_code:02x}")
    header = 4 + 4 * ndim
    dims = struct.unpack(f">{ndim}I", data[4:header])
    arr = np.frombuffer(data, dtype=dtypes[dtype_code], offset=header)
    if arr.size != int(np.prod(dims)):
        raise ConfigError(f"{path}: payload size does not match dimensions {dims}")
    return arr.reshape(dims).astype(np.float64)


def _find_idx_pair(directory: Path) -> tuple[Path, Path | None]:
    images = sorted(
        p for p in directory.iterdir()
        if "idx3" in p.name or "images" in p.name.lower()
    )
    labels = sorted(
        p for p in directory.iterdir()
        if "idx1" in p.name or "labels" in p.name.lower()
    )
    labels = [p for p in labels if p not in images]
    if not images:
        raise ConfigError(f"no IDX image file found in {directory}")
    return images[0], labels[0] if labels else None


def load_inputs(
    source, net: NetworkSpec, samples: int, seed: int | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Images + optional labels from a CSV file, an IDX directory, or random.

    ``source`` is a CSV tensor path (one image or a batch), a directory of
    raw IDX files, or None for seeded random images. Pixel data stored as
    integers in [0, 255] is rescaled to [0, 1].
    """
    shape = tuple(net.input_shape)
    if source is None:
        rng = np.random.default_rng(seed)
        return rng.uniform(-1.0, 1.0, (samples,) + shape), None
    source = Path(source)
    if source.is_dir():
        img_path, lbl_path = _find_idx_pair(source)
        images = load_idx(img_path)
        labels = load_idx(lbl_path).astype(np.int64) if lbl_path else None
    else:
        images = load_tensor_csv(source)
        labels = None
    if images.shape == shape:  # single image
        images = images[None, ...]
    elif shape[0] == 1 and images.shape == shape[1:]:  # single 2-D grayscale
        images = images[None, None, ...]
    elif shape[0] == 1 and images.ndim == 3 and images.shape[1:] == shape[1:]:
        images = images[:, None, :, :]  # (N, H, W) batch for a 1-channel net
    if images.ndim != len(shape) + 1 or images.shape[1:] != shape:
        raise ShapeMismatch(f"images {images.shape} != network input {shape}")
    if images.max(initial=0.0) > 2.0:  # raw 0..255 pixel bytes
        images = images / 255.0
    images = images[:samples]
    if labels is not None:
        labels = labels[:samples]
    if len(images) < samples:
        raise ConfigError(f"requested {samples} samples, source has {len(images)}")
    return np.ascontiguousarray(images, dtype=np.float64), labels

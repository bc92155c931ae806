"""Batchnorm folding, CSV weight export, and the export manifest.

The CSV format is the one the inference CLI loads: first line is the
comma-separated tensor shape, following lines hold the row-major values.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .models import LeNet5, ResNet20


def save_tensor_csv(path, tensor: np.ndarray):
    tensor = np.asarray(tensor, dtype=np.float64)
    rows = tensor.reshape(tensor.shape[0], -1) if tensor.ndim > 1 else tensor.reshape(1, -1)
    lines = [",".join(str(s) for s in tensor.shape)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def fold_bn(conv: nn.Conv2d, bn: nn.BatchNorm2d) -> tuple[np.ndarray, np.ndarray]:
    """Fold a batchnorm into the preceding convolution's weight and bias."""
    with torch.no_grad():
        scale = bn.weight / torch.sqrt(bn.running_var + bn.eps)
        weight = conv.weight * scale[:, None, None, None]
        bias = bn.bias - bn.running_mean * scale
        if conv.bias is not None:
            bias = bias + conv.bias * scale
    return weight.numpy().astype(np.float64), bias.numpy().astype(np.float64)


def folded_tensors(model: nn.Module) -> dict[str, np.ndarray]:
    """All exportable tensors, batchnorms folded, keyed by weight-file name."""
    out: dict[str, np.ndarray] = {}
    if isinstance(model, LeNet5):
        for name in ("conv1", "conv2", "fc1", "fc2", "fc3"):
            layer = getattr(model, name)
            out[f"{name}.weight"] = layer.weight.detach().numpy().astype(np.float64)
            out[f"{name}.bias"] = layer.bias.detach().numpy().astype(np.float64)
        return out
    if isinstance(model, ResNet20):
        w, b = fold_bn(model.stem, model.stem_bn)
        out["stem.weight"], out["stem.bias"] = w, b
        for tag, block in model.blocks.items():
            w, b = fold_bn(block.conv1, block.bn1)
            out[f"{tag}.conv1.weight"], out[f"{tag}.conv1.bias"] = w, b
            w, b = fold_bn(block.conv2, block.bn2)
            out[f"{tag}.conv2.weight"], out[f"{tag}.conv2.bias"] = w, b
            if block.down is not None:
                w, b = fold_bn(block.down, block.down_bn)
                out[f"{tag}.down.weight"], out[f"{tag}.down.bias"] = w, b
        out["fc.weight"] = model.fc.weight.detach().numpy().astype(np.float64)
        out["fc.bias"] = model.fc.bias.detach().numpy().astype(np.float64)
        return out
    raise ValueError(f"cannot export model of type {type(model).__name__}")


class FoldedResNet20(nn.Module):
    """Functional equivalent of a ResNet20 with its batchnorms folded;
    used to verify folding correctness against the original."""

    def __init__(self, model: ResNet20):
        super().__init__()
        self.tensors = {k: torch.tensor(v, dtype=torch.float32) for k, v in folded_tensors(model).items()}
        self.act = model.stem_act
        self.blocks = model.blocks

    def _conv(self, x, name, stride, padding):
        import torch.nn.functional as F

        return F.conv2d(x, self.tensors[f"{name}.weight"], self.tensors[f"{name}.bias"], stride, padding)

    def forward(self, x):
        import torch.nn.functional as F

        x = self.act(self._conv(x, "stem", 1, 1))
        for tag, block in self.blocks.items():
            stride = 2 if block.down is not None else 1
            out = block.act1(self._conv(x, f"{tag}.conv1", stride, 1))
            out = self._conv(out, f"{tag}.conv2", 1, 1)
            shortcut = self._conv(x, f"{tag}.down", 2, 0) if block.down is not None else x
            x = block.act2(out + shortcut)
        x = torch.flatten(F.avg_pool2d(x, 8), 1)
        return F.linear(x, self.tensors["fc.weight"], self.tensors["fc.bias"])


def calibrate_betas(model: nn.Module, batch: torch.Tensor, margin: float = 1.2) -> dict[str, float]:
    """Per activation site: margin times the max absolute pre-activation."""
    bounds: dict[str, float] = {}
    hooks = []
    for name, module in model.named_modules():
        if isinstance(module, (nn.ReLU,)) or type(module).__name__ == "Square":
            def capture(mod, inputs, _out, key=name):
                bounds[key] = max(bounds.get(key, 0.0), float(inputs[0].abs().max()))

            hooks.append(module.register_forward_hook(capture))
    model.eval()
    with torch.no_grad():
        model(batch)
    for h in hooks:
        h.remove()
    return {k: margin * v for k, v in sorted(bounds.items())}


def export_csv(model: nn.Module, out_dir, betas: dict | None = None, metadata: dict | None = None) -> dict:
    """Write one CSV per folded tensor plus a manifest JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, tensor in sorted(folded_tensors(model).items()):
        path = out_dir / f"{name}.csv"
        save_tensor_csv(path, tensor)
        files.append(
            {
                "path": path.name,
                "shape": list(tensor.shape),
                "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
            }
        )
    manifest = {
        "model": type(model).__name__,
        "activation": getattr(model, "activation_name", None),
        "files": files,
        "betas": betas or {},
        "metadata": metadata or {},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest

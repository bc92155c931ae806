"""Training loops, dataset access, and the export pipeline.

Datasets are read from a local root (--data flag or FHEACT_DATA env var,
default ./data) and are never downloaded. Training aborts with
DatasetMissing when the files are absent.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from .export import calibrate_betas, export_csv
from .models import build_model


class DatasetMissing(RuntimeError):
    pass


def data_root(override=None) -> Path:
    return Path(override or os.environ.get("FHEACT_DATA", "data"))


def _load_torchvision(name: str, root: Path, train: bool):
    try:
        from torchvision import datasets, transforms
    except ImportError as exc:
        raise DatasetMissing("torchvision is not installed") from exc
    tfm = transforms.ToTensor()
    try:
        if name == "mnist":
            ds = datasets.MNIST(root, train=train, download=False, transform=tfm)
        else:
            ds = datasets.CIFAR10(root, train=train, download=False, transform=tfm)
    except RuntimeError as exc:
        raise DatasetMissing(f"{name} not found under {root}") from exc
    return ds


def _train_epochs(model, loader, epochs, lr, clip=None, device="cpu"):
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    model.train()
    for _ in range(epochs):
        for xb, yb in loader:
            xb, yb = xb.to(device), yb.to(device)
            opt.zero_grad()
            loss = loss_fn(model(xb), yb)
            loss.backward()
            if clip is not None:
                nn.utils.clip_grad_norm_(model.parameters(), clip)
            opt.step()
    return model


def _accuracy(model, loader, device="cpu") -> float:
    model.eval()
    correct = total = 0
    with torch.no_grad():
        for xb, yb in loader:
            pred = model(xb.to(device)).argmax(dim=1).cpu()
            correct += int((pred == yb).sum())
            total += len(yb)
    return correct / total


def train_lenet5(activation: str, seed: int, out_dir, data=None, epochs: int = 10) -> dict:
    """LeNet-5 on MNIST; the square variant needs gradient clipping and a
    smaller learning rate to stay stable."""
    torch.manual_seed(seed)
    root = data_root(data)
    train_ds = _load_torchvision("mnist", root, train=True)
    val_ds = _load_torchvision("mnist", root, train=False)
    train_loader = DataLoader(train_ds, batch_size=128, shuffle=True)
    val_loader = DataLoader(val_ds, batch_size=512)
    model = build_model("lenet5", activation)
    if activation == "square":
        _train_epochs(model, train_loader, epochs, lr=3e-4, clip=1.0)
    else:
        _train_epochs(model, train_loader, epochs, lr=1e-3)
    acc = _accuracy(model, val_loader)
    calib = torch.stack([val_ds[i][0] for i in range(512)])
    betas = calibrate_betas(model, calib)
    return export_csv(
        model, out_dir, betas,
        {"seed": seed, "epochs": epochs, "val_accuracy": acc, "dataset": "mnist"},
    )


def train_resnet20(seed: int, out_dir, data=None, epochs: int = 60) -> dict:
    """ResNet-20 with ReLU on CIFAR-10, beta calibration on 512 images."""
    torch.manual_seed(seed)
    root = data_root(data)
    train_ds = _load_torchvision("cifar10", root, train=True)
    val_ds = _load_torchvision("cifar10", root, train=False)
    train_loader = DataLoader(train_ds, batch_size=128, shuffle=True)
    val_loader = DataLoader(val_ds, batch_size=512)
    model = build_model("resnet20", "relu")
    _train_epochs(model, train_loader, epochs, lr=1e-3)
    acc = _accuracy(model, val_loader)
    calib = torch.stack([val_ds[i][0] for i in range(512)])
    betas = calibrate_betas(model, calib)
    return export_csv(
        model, out_dir, betas,
        {"seed": seed, "epochs": epochs, "val_accuracy": acc, "dataset": "cifar10"},
    )


def square_resnet_divergence(seed: int = 0, epochs: int = 5, samples: int = 512) -> dict:
    """Demonstrates that square-activation ResNet-20 training diverges.

    Runs on synthetic data so it needs no dataset. Divergence is any
    non-finite loss or gradient (the squared activations overflow through
    twenty layers), or a final loss above the initial one.
    """
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    xs = torch.tensor(rng.normal(0, 1, (samples, 3, 32, 32)), dtype=torch.float32)
    ys = torch.tensor(rng.integers(0, 10, samples))
    loader = DataLoader(TensorDataset(xs, ys), batch_size=64, shuffle=True)
    model = build_model("resnet20", "square")
    loss_fn = nn.CrossEntropyLoss()
    model.eval()
    with torch.no_grad():
        initial = float(loss_fn(model(xs[:64]), ys[:64]))
    opt = torch.optim.SGD(model.parameters(), lr=1e-3)
    nonfinite_losses = nonfinite_grads = 0
    final = initial
    model.train()
    for _ in range(epochs):
        for xb, yb in loader:
            opt.zero_grad()
            loss = loss_fn(model(xb), yb)
            if not torch.isfinite(loss):
                nonfinite_losses += 1
                continue
            loss.backward()
            grads = [p.grad for p in model.parameters() if p.grad is not None]
            if any(not torch.isfinite(g).all() for g in grads):
                nonfinite_grads += 1
                continue
            opt.step()
            final = float(loss.detach())
    diverged = (
        not np.isfinite(initial)
        or nonfinite_losses > 0
        or nonfinite_grads > 0
        or final > initial
    )
    return {
        "initial_loss": initial,
        "final_loss": final,
        "nonfinite_losses": nonfinite_losses,
        "nonfinite_gradients": nonfinite_grads,
        "diverged": diverged,
    }

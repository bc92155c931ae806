"""Reference model definitions.

Layer names mirror the weight-file names the inference CLI expects:
LeNet-5 uses conv1, conv2, fc1, fc2, fc3; ResNet-20 uses stem,
s{1..3}b{1..3}.conv1/.conv2/.down, and fc.
"""

from __future__ import annotations

import torch
from torch import nn


class Square(nn.Module):
    def forward(self, x):
        return x * x


def _activation(name: str) -> nn.Module:
    if name == "relu":
        return nn.ReLU()
    if name == "square":
        return Square()
    raise ValueError(f"unknown activation {name!r}")


class LeNet5(nn.Module):
    """Canonical LeNet-5 for 28x28 inputs with average pooling."""

    def __init__(self, activation: str = "relu"):
        super().__init__()
        self.activation_name = activation
        self.conv1 = nn.Conv2d(1, 6, 5, padding=2)
        self.conv2 = nn.Conv2d(6, 16, 5)
        self.pool = nn.AvgPool2d(2, 2)
        self.fc1 = nn.Linear(400, 120)
        self.fc2 = nn.Linear(120, 84)
        self.fc3 = nn.Linear(84, 10)
        self.act1 = _activation(activation)
        self.act2 = _activation(activation)
        self.act3 = _activation(activation)
        self.act4 = _activation(activation)

    def forward(self, x):
        x = self.pool(self.act1(self.conv1(x)))
        x = self.pool(self.act2(self.conv2(x)))
        x = torch.flatten(x, 1)
        x = self.act3(self.fc1(x))
        x = self.act4(self.fc2(x))
        return self.fc3(x)


class BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int, activation: str):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.act1 = _activation(activation)
        self.act2 = _activation(activation)
        self.down = None
        self.down_bn = None
        if stride != 1 or c_in != c_out:
            self.down = nn.Conv2d(c_in, c_out, 1, stride, bias=False)
            self.down_bn = nn.BatchNorm2d(c_out)

    def forward(self, x):
        out = self.act1(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        shortcut = self.down_bn(self.down(x)) if self.down is not None else x
        return self.act2(out + shortcut)


class ResNet20(nn.Module):
    """Standard CIFAR ResNet-20: stem + 3 stages of 3 blocks + fc."""

    def __init__(self, activation: str = "relu"):
        super().__init__()
        self.activation_name = activation
        self.stem = nn.Conv2d(3, 16, 3, 1, 1, bias=False)
        self.stem_bn = nn.BatchNorm2d(16)
        self.stem_act = _activation(activation)
        blocks = {}
        c_in = 16
        for stage, c_out in ((1, 16), (2, 32), (3, 64)):
            for block in (1, 2, 3):
                stride = 2 if stage > 1 and block == 1 else 1
                blocks[f"s{stage}b{block}"] = BasicBlock(c_in, c_out, stride, activation)
                c_in = c_out
        self.blocks = nn.ModuleDict(blocks)
        self.pool = nn.AvgPool2d(8)
        self.fc = nn.Linear(64, 10)

    def forward(self, x):
        x = self.stem_act(self.stem_bn(self.stem(x)))
        for block in self.blocks.values():
            x = block(x)
        x = torch.flatten(self.pool(x), 1)
        return self.fc(x)


def build_model(name: str, activation: str) -> nn.Module:
    if name == "lenet5":
        return LeNet5(activation)
    if name == "resnet20":
        return ResNet20(activation)
    raise ValueError(f"unknown model {name!r}")

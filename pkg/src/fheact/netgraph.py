"""Network graphs over the emulator: layer specs, slot packing, depth
costing, bootstrap planning, and the encrypted inference runner.

Packing is channel-major with strided spatial layouts: each channel owns a
fixed block of slots sized by the input image, and stride-2 layers leave
their outputs at stride-2 physical positions instead of repacking. Every
weighted layer then reduces to a set of (rotate, plaintext-mask, accumulate)
diagonal ops with constant rotation offsets, consuming exactly one level.

Average pooling is computed as a rotate-and-add window sum; the divisor is
folded into the next weighted layer's masks, so pooling consumes no level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .activations import ActivationKind, act_apply, identity
from .errors import ConfigError, DepthExhausted, ShapeMismatch, UnschedulableLayer
from .he_core import HeContext, SimdCiphertext
from .ledger import OpLedger
from .params import SchemeParams, profile

LAYER_KINDS = (
    "conv2d",
    "avgpool2d",
    "fully_connected",
    "batchnorm_folded",
    "residual_add",
    "flatten",
)
_WEIGHTED = ("conv2d", "fully_connected", "batchnorm_folded")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    activation: ActivationKind = field(default_factory=identity)
    in_channels: int | None = None
    out_channels: int | None = None
    kernel: int | None = None
    stride: int = 1
    padding: int = 0
    weights_ref: str | None = None
    input_from: str | None = None  # default: previous layer's output
    source: str | None = None  # residual_add only: the other operand

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv2d", "fully_connected") and not self.weights_ref:
            raise ConfigError(f"{self.name}: {self.kind} requires weights_ref")
        if self.kind in ("avgpool2d", "flatten", "residual_add") and self.weights_ref:
            raise ConfigError(f"{self.name}: {self.kind} takes no weights_ref")
        if self.kind == "residual_add" and not self.source:
            raise ConfigError(f"{self.name}: residual_add requires a source layer")
        if self.kind in ("conv2d", "avgpool2d") and not self.kernel:
            raise ConfigError(f"{self.name}: kernel size required")


def _spatial_out(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


@dataclass(frozen=True)
class Layout:
    """Slot positions of a logical tensor.

    Spatial tensors: slot(c, r, col) = (c % ch_per_ct) * ch_block
    + r * rpitch + col * cpitch, ciphertext index c // ch_per_ct.
    Flat tensors: n values dense from slot 0 of ciphertext 0.
    """

    shape: tuple  # (C, H, W) or (n,)
    ch_block: int = 0
    ch_per_ct: int = 1
    rpitch: int = 0
    cpitch: int = 1

    @property
    def flat(self) -> bool:
        return len(self.shape) == 1

    @property
    def ct_count(self) -> int:
        if self.flat:
            return 1
        return -(-self.shape[0] // self.ch_per_ct)

    def slot_of(self, *idx) -> tuple[int, int]:
        if self.flat:
            return 0, idx[0]
        c, r, col = idx
        return c // self.ch_per_ct, (c % self.ch_per_ct) * self.ch_block + r * self.rpitch + col * self.cpitch

    def active_slots(self, ct_index: int) -> int:
        """Contiguous span holding this ciphertext's payload."""
        if self.flat:
            return self.shape[0]
        c_total = self.shape[0]
        ch_here = min(self.ch_per_ct, c_total - ct_index * self.ch_per_ct)
        return ch_here * self.ch_block

    def positions(self):
        """(logical flat index, ct index, slot) in row-major (c, r, col) order."""
        if self.flat:
            for i in range(self.shape[0]):
                yield i, 0, i
        else:
            c_dim, h_dim, w_dim = self.shape
            i = 0
            for c in range(c_dim):
                for r in range(h_dim):
                    for col in range(w_dim):
                        ct, slot = self.slot_of(c, r, col)
                        yield i, ct, slot
                        i += 1


@dataclass
class PackedTensor:
    ciphertexts: list[SimdCiphertext]
    layout: Layout

    @property
    def level(self) -> int:
        return min(ct.level for ct in self.ciphertexts)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int]
    params_profile: str = "lenet"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        names = [ly.name for ly in self.layers]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate layer names")
        self.shape_chain()  # validates end to end

    def params(self, **overrides) -> SchemeParams:
        return profile(self.params_profile, **overrides)

    def shape_chain(self) -> dict[str, tuple]:
        """Logical output shape per layer; raises on any inconsistency."""
        shapes: dict[str, tuple] = {}
        prev: tuple = tuple(self.input_shape)
        prev_name = None
        seen = set()
        for ly in self.layers:
            if ly.input_from is not None:
                if ly.input_from not in seen:
                    raise ConfigError(f"{ly.name}: input_from {ly.input_from!r} not defined yet")
                cur = shapes[ly.input_from]
            else:
                cur = prev
            if ly.kind == "conv2d":
                if len(cur) != 3:
                    raise ShapeMismatch(f"{ly.name}: conv2d needs a (C,H,W) input, got {cur}")
                c, h, w = cur
                if ly.in_channels and ly.in_channels != c:
                    raise ShapeMismatch(f"{ly.name}: expects {ly.in_channels} channels, got {c}")
                out = (
                    ly.out_channels,
                    _spatial_out(h, ly.kernel, ly.stride, ly.padding),
                    _spatial_out(w, ly.kernel, ly.stride, ly.padding),
                )
                if out[1] < 1 or out[2] < 1:
                    raise ShapeMismatch(f"{ly.name}: empty spatial output {out}")
            elif ly.kind == "avgpool2d":
                c, h, w = cur
                out = (
                    c,
                    _spatial_out(h, ly.kernel, ly.stride, ly.padding),
                    _spatial_out(w, ly.kernel, ly.stride, ly.padding),
                )
            elif ly.kind == "flatten":
                out = (int(np.prod(cur)),)
            elif ly.kind == "fully_connected":
                if len(cur) != 1:
                    raise ShapeMismatch(f"{ly.name}: fully_connected needs a flat input, got {cur}")
                if not ly.out_channels:
                    raise ConfigError(f"{ly.name}: out_channels (output size) required")
                out = (ly.out_channels,)
            elif ly.kind == "batchnorm_folded":
                out = cur
            else:  # residual_add
                if ly.source not in seen:
                    raise ConfigError(f"{ly.name}: source {ly.source!r} not defined yet")
                if shapes[ly.source] != cur:
                    raise ShapeMismatch(
                        f"{ly.name}: residual shapes differ: {cur} vs {shapes[ly.source]}"
                    )
                out = cur
            shapes[ly.name] = out
            seen.add(ly.name)
            prev = out
        return shapes

    @property
    def output_size(self) -> int:
        chain = self.shape_chain()
        return int(np.prod(chain[self.layers[-1].name]))

    # -- JSON ------------------------------------------------------------

    def to_dict(self) -> dict:
        layers = []
        for ly in self.layers:
            entry: dict = {"name": ly.name, "kind": ly.kind}
            for f in ("in_channels", "out_channels", "kernel"):
                if getattr(ly, f) is not None:
                    entry[f] = getattr(ly, f)
            if ly.kind in ("conv2d", "avgpool2d"):
                entry["stride"] = ly.stride
                entry["padding"] = ly.padding
            for f in ("weights_ref", "input_from", "source"):
                if getattr(ly, f) is not None:
                    entry[f] = getattr(ly, f)
            entry["activation"] = ly.activation.tag
            if ly.activation.tag == "relu_approx":
                entry["beta"] = ly.activation.config.beta
                entry["degree"] = ly.activation.config.degree
            layers.append(entry)
        return {
            "input_shape": list(self.input_shape),
            "params_profile": self.params_profile,
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        from .activations import relu_approx, relu_switch, square

        layers = []
        for entry in data["layers"]:
            tag = entry.get("activation", "identity")
            if tag == "relu_approx":
                act = relu_approx(entry.get("beta", 1.0), entry.get("degree", 50))
            elif tag == "square":
                act = square()
            elif tag == "relu_switch":
                act = relu_switch()
            elif tag == "identity":
                act = identity()
            else:
                raise ConfigError(f"unknown activation {tag!r}")
            kwargs = {
                k: entry[k]
                for k in (
                    "name",
                    "kind",
                    "in_channels",
                    "out_channels",
                    "kernel",
                    "stride",
                    "padding",
                    "weights_ref",
                    "input_from",
                    "source",
                )
                if k in entry
            }
            layers.append(LayerSpec(activation=act, **kwargs))
        return cls(
            layers=tuple(layers),
            input_shape=tuple(data["input_shape"]),
            params_profile=data.get("params_profile", "lenet"),
        )

    @classmethod
    def from_json(cls, path) -> "NetworkSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- built-in architectures --------------------------------------------------


def builtin_lenet5(activation: ActivationKind) -> NetworkSpec:
    """Canonical LeNet-5 for 28x28 single-channel inputs."""
    act = activation
    layers = [
        LayerSpec("conv1", "conv2d", act, 1, 6, 5, 1, 2, weights_ref="conv1"),
        LayerSpec("pool1", "avgpool2d", kernel=2, stride=2),
        LayerSpec("conv2", "conv2d", act, 6, 16, 5, 1, 0, weights_ref="conv2"),
        LayerSpec("pool2", "avgpool2d", kernel=2, stride=2),
        LayerSpec("flatten", "flatten"),
        LayerSpec("fc1", "fully_connected", act, out_channels=120, weights_ref="fc1"),
        LayerSpec("fc2", "fully_connected", act, out_channels=84, weights_ref="fc2"),
        LayerSpec("fc3", "fully_connected", out_channels=10, weights_ref="fc3"),
    ]
    return NetworkSpec(tuple(layers), (1, 28, 28), "lenet")


def builtin_resnet20(activation: ActivationKind) -> NetworkSpec:
    """Standard CIFAR ResNet-20: stem + 3 stages x 3 blocks + pool + fc."""
    if activation.tag == "square":
        raise ConfigError(
            "ResNet-20 cannot use the square activation: training deep residual "
            "networks with it diverges (exploding gradients), so no square "
            "weights exist for this architecture"
        )
    act = activation
    layers = [LayerSpec("stem", "conv2d", act, 3, 16, 3, 1, 1, weights_ref="stem")]
    channels = {1: 16, 2: 32, 3: 64}
    prev_out = "stem"
    for stage in (1, 2, 3):
        c_out = channels[stage]
        for block in (1, 2, 3):
            tag = f"s{stage}b{block}"
            first = block == 1 and stage > 1
            stride = 2 if first else 1
            c_in = channels[stage - 1] if first else c_out
            block_input = prev_out
            layers.append(
                LayerSpec(
                    f"{tag}.conv1", "conv2d", act, c_in, c_out, 3, stride, 1,
                    weights_ref=f"{tag}.conv1",
                )
            )
            layers.append(
                LayerSpec(
                    f"{tag}.conv2", "conv2d", identity(), c_out, c_out, 3, 1, 1,
                    weights_ref=f"{tag}.conv2",
                )
            )
            shortcut = block_input
            if first:
                layers.append(
                    LayerSpec(
                        f"{tag}.down", "conv2d", identity(), c_in, c_out, 1, 2, 0,
                        weights_ref=f"{tag}.down", input_from=block_input,
                    )
                )
                shortcut = f"{tag}.down"
            layers.append(
                LayerSpec(
                    f"{tag}.add", "residual_add", act,
                    input_from=f"{tag}.conv2" if first else None,
                    source=shortcut,
                )
            )
            prev_out = f"{tag}.add"
    layers.append(LayerSpec("gap", "avgpool2d", kernel=8, stride=8))
    layers.append(LayerSpec("flatten", "flatten"))
    layers.append(LayerSpec("fc", "fully_connected", out_channels=10, weights_ref="fc"))
    return NetworkSpec(tuple(layers), (3, 32, 32), "resnet")


BUILTINS = {"lenet5": builtin_lenet5, "resnet20": builtin_resnet20}


# -- depth costing and bootstrap planning ------------------------------------


def layer_depth_cost(layer: LayerSpec) -> int:
    """Levels one layer consumes, activation included.

    Average pooling costs nothing: the window sum is rotate-and-add and the
    divisor folds into the next weighted layer's plaintext masks. (A pool
    carrying a non-identity activation would need one extra level to
    materialize the divisor first; built-ins never do that.)
    """
    if layer.kind in _WEIGHTED:
        base = 1
    elif layer.kind == "avgpool2d":
        base = 1 if layer.activation.tag != "identity" else 0
    else:
        base = 0
    return base + layer.activation.depth_cost


@dataclass
class BootstrapPlan:
    insert_before: tuple[str, ...]
    predicted_depth_trace: list[tuple[str, int, int]]
    bootstrap_count: int

    def to_dict(self) -> dict:
        return {
            "insert_before": list(self.insert_before),
            "bootstrap_count": self.bootstrap_count,
            "predicted_depth_trace": [
                {"layer": name, "level_in": li, "level_out": lo}
                for name, li, lo in self.predicted_depth_trace
            ],
        }


def plan_bootstraps(net: NetworkSpec, params: SchemeParams | None = None) -> BootstrapPlan:
    """Greedy forward scan: refresh before any layer that cannot fit."""
    params = params or net.params()
    budget = params.depth_after_bootstrap
    for ly in net.layers:
        cost = layer_depth_cost(ly)
        if cost > budget:
            raise UnschedulableLayer(
                f"layer {ly.name} needs {cost} levels, but a fresh ciphertext has {budget}"
            )
    insert: list[str] = []
    trace: list[tuple[str, int, int]] = []
    levels: dict[str, int] = {}
    level = budget
    for ly in net.layers:
        cost = layer_depth_cost(ly)
        level_in = levels[ly.input_from] if ly.input_from is not None else level
        if ly.kind == "residual_add":
            level_in = min(level_in, levels[ly.source])
        if level_in < cost:
            insert.append(ly.name)
            level_in = budget
        trace.append((ly.name, level_in, level_in - cost))
        level = level_in - cost
        levels[ly.name] = level
    return BootstrapPlan(tuple(insert), trace, len(insert))


# -- compilation to diagonal programs ----------------------------------------


@dataclass
class _DiagOp:
    in_ct: int
    out_ct: int
    rotation: int
    out_idx: np.ndarray  # unique slot indices in the output ciphertext
    values: np.ndarray  # plaintext mask values at those slots


@dataclass
class _CompiledLayer:
    spec: LayerSpec
    in_layout: Layout
    out_layout: Layout
    diag_ops: list[_DiagOp] = field(default_factory=list)
    pool_rotations: list[int] = field(default_factory=list)  # avgpool window offsets
    biases: dict[int, np.ndarray] = field(default_factory=dict)  # out ct -> dense bias
    materialize_scale: float | None = None  # pre-activation divisor materialization


def _consolidate(groups: dict, slot_count: int) -> list[_DiagOp]:
    ops = []
    for (in_ct, out_ct, k), cells in sorted(groups.items()):
        idx = np.fromiter(cells.keys(), dtype=np.int64, count=len(cells))
        order = np.argsort(idx)
        idx = idx[order]
        val = np.fromiter(cells.values(), dtype=np.float64, count=len(cells))[order]
        ops.append(_DiagOp(in_ct, out_ct, k % slot_count, idx, val))
    return ops


class CompiledNetwork:
    """Weight-bound executable form of a NetworkSpec."""

    def __init__(self, net: NetworkSpec, weights, params: SchemeParams | None = None):
        self.net = net
        self.params = params or net.params()
        self.weights = weights
        self.layers: list[_CompiledLayer] = []
        self.layouts: dict[str, Layout] = {}
        self._compile()

    # .. layout propagation ..

    def _initial_layout(self) -> Layout:
        c, h, w = self.net.input_shape
        ch_block = h * w
        ch_per_ct = max(1, self.params.slot_count // ch_block)
        if ch_block > self.params.slot_count:
            raise ShapeMismatch("one channel does not fit in a ciphertext")
        return Layout((c, h, w), ch_block, ch_per_ct, w, 1)

    def _compile(self):
        shapes = self.net.shape_chain()
        cur = self._initial_layout()
        pending = 1.0  # divisor waiting to be folded into the next weighted layer
        pendings: dict[str, float] = {}
        for ly in self.net.layers:
            if ly.input_from is not None:
                in_layout = self.layouts[ly.input_from]
                in_pending = pendings[ly.input_from]
            else:
                in_layout = cur
                in_pending = pending
            cl = _CompiledLayer(ly, in_layout, in_layout)
            if ly.kind == "conv2d":
                cl.out_layout = self._compile_conv(cl, shapes[ly.name], in_pending)
                out_pending = 1.0
            elif ly.kind == "fully_connected":
                cl.out_layout = self._compile_fc(cl, shapes[ly.name], in_pending)
                out_pending = 1.0
            elif ly.kind == "batchnorm_folded":
                cl.out_layout = self._compile_bn(cl, in_pending)
                out_pending = 1.0
            elif ly.kind == "avgpool2d":
                cl.out_layout = self._compile_pool(cl)
                out_pending = in_pending / (ly.kernel * ly.kernel)
            elif ly.kind == "flatten":
                cl.out_layout = in_layout  # metadata only; positions() gives the order
                out_pending = in_pending
            else:  # residual_add
                src_pending = pendings[ly.source]
                if abs(src_pending - in_pending) > 1e-15:
                    raise ConfigError(
                        f"{ly.name}: residual operands carry different pending scales"
                    )
                if self.layouts[ly.source] != in_layout:
                    raise ShapeMismatch(f"{ly.name}: residual layouts differ")
                cl.out_layout = in_layout
                out_pending = in_pending
            if ly.activation.tag != "identity" and out_pending != 1.0:
                cl.materialize_scale = out_pending
                out_pending = 1.0
            self.layers.append(cl)
            self.layouts[ly.name] = cl.out_layout
            pendings[ly.name] = out_pending
            cur = cl.out_layout
            pending = out_pending
        self.final_layout = cur
        self.final_pending = pending

    def _tensor(self, ref: str, shape: tuple) -> np.ndarray:
        arr = self.weights.get(ref)
        if arr.shape != shape:
            raise ShapeMismatch(f"weight {ref!r}: expected shape {shape}, got {arr.shape}")
        return arr

    def _bias(self, cl: _CompiledLayer, per_channel: np.ndarray, layout: Layout):
        """Spread per-output-channel (or per-unit) biases over slot positions."""
        n_slots = self.params.slot_count
        if layout.flat:
            dense = np.zeros(n_slots)
            dense[: len(per_channel)] = per_channel
            cl.biases[0] = dense
            return
        c_dim, h_dim, w_dim = layout.shape
        for c in range(c_dim):
            ct, base = layout.slot_of(c, 0, 0)
            dense = cl.biases.setdefault(ct, np.zeros(n_slots))
            for r in range(h_dim):
                row = base + r * layout.rpitch
                dense[row : row + w_dim * layout.cpitch : layout.cpitch] = per_channel[c]

    def _compile_conv(self, cl: _CompiledLayer, out_shape: tuple, pending: float) -> Layout:
        ly = cl.spec
        lin = cl.in_layout
        c_in, h_in, w_in = lin.shape
        c_out, h_out, w_out = out_shape
        k, s, p = ly.kernel, ly.stride, ly.padding
        w = self._tensor(ly.weights_ref + ".weight", (c_out, c_in, k, k)) * pending
        out_layout = Layout(
            out_shape, lin.ch_block, lin.ch_per_ct, lin.rpitch * s, lin.cpitch * s
        )
        groups: dict = {}
        for co in range(c_out):
            oct_, lo = co // lin.ch_per_ct, co % lin.ch_per_ct
            for ci in range(c_in):
                ict, li = ci // lin.ch_per_ct, ci % lin.ch_per_ct
                base_k = (li - lo) * lin.ch_block
                for dr in range(k):
                    for dc in range(k):
                        wv = w[co, ci, dr, dc]
                        rot = base_k + (dr - p) * lin.rpitch + (dc - p) * lin.cpitch
                        cells = groups.setdefault((ict, oct_, rot), {})
                        # valid output positions: input row/col in bounds
                        r0 = max(0, math.ceil((p - dr) / s))
                        r1 = min(h_out - 1, (h_in - 1 + p - dr) // s)
                        c0 = max(0, math.ceil((p - dc) / s))
                        c1 = min(w_out - 1, (w_in - 1 + p - dc) // s)
                        for r in range(r0, r1 + 1):
                            row = lo * lin.ch_block + r * out_layout.rpitch
                            for col in range(c0, c1 + 1):
                                slot = row + col * out_layout.cpitch
                                cells[slot] = cells.get(slot, 0.0) + wv
        cl.diag_ops = _consolidate(groups, self.params.slot_count)
        if self.weights.has(ly.weights_ref + ".bias"):
            bias = self._tensor(ly.weights_ref + ".bias", (c_out,))
            self._bias(cl, bias, out_layout)
        return out_layout

    def _compile_fc(self, cl: _CompiledLayer, out_shape: tuple, pending: float) -> Layout:
        ly = cl.spec
        lin = cl.in_layout
        n_in = int(np.prod(lin.shape))
        n_out = out_shape[0]
        if n_out > self.params.slot_count:
            raise ShapeMismatch(f"{ly.name}: {n_out} outputs exceed slot capacity")
        w = self._tensor(ly.weights_ref + ".weight", (n_out, n_in)) * pending
        groups: dict = {}
        for j, ict, slot in lin.positions():
            col = w[:, j]
            for i in range(n_out):
                rot = slot - i
                cells = groups.setdefault((ict, 0, rot), {})
                cells[i] = cells.get(i, 0.0) + col[i]
        cl.diag_ops = _consolidate(groups, self.params.slot_count)
        out_layout = Layout((n_out,))
        if self.weights.has(ly.weights_ref + ".bias"):
            bias = self._tensor(ly.weights_ref + ".bias", (n_out,))
            self._bias(cl, bias, out_layout)
        return out_layout

    def _compile_bn(self, cl: _CompiledLayer, pending: float) -> Layout:
        ly = cl.spec
        lin = cl.in_layout
        c_dim = lin.shape[0]
        scale = self._tensor(ly.weights_ref + ".weight", (c_dim,)) * pending
        groups: dict = {}
        c_all, h_dim, w_dim = lin.shape
        for c in range(c_all):
            ct, base = lin.slot_of(c, 0, 0)
            cells = groups.setdefault((ct, ct, 0), {})
            for r in range(h_dim):
                for col in range(w_dim):
                    cells[base + r * lin.rpitch + col * lin.cpitch] = scale[c]
        cl.diag_ops = _consolidate(groups, self.params.slot_count)
        if self.weights.has(ly.weights_ref + ".bias"):
            shift = self._tensor(ly.weights_ref + ".bias", (c_dim,))
            self._bias(cl, shift, lin)
        return lin

    def _compile_pool(self, cl: _CompiledLayer) -> Layout:
        ly = cl.spec
        lin = cl.in_layout
        c_dim, h_in, w_in = lin.shape
        out_layout = Layout(
            (c_dim, _spatial_out(h_in, ly.kernel, ly.stride, ly.padding),
             _spatial_out(w_in, ly.kernel, ly.stride, ly.padding)),
            lin.ch_block,
            lin.ch_per_ct,
            lin.rpitch * ly.stride,
            lin.cpitch * ly.stride,
        )
        cl.pool_rotations = [
            dr * lin.rpitch + dc * lin.cpitch
            for dr in range(ly.kernel)
            for dc in range(ly.kernel)
            if (dr, dc) != (0, 0)
        ]
        return out_layout

    # .. execution ..

    def pack(self, ctx: HeContext, image: np.ndarray) -> PackedTensor:
        image = np.asarray(image, dtype=np.float64)
        if image.shape != tuple(self.net.input_shape):
            raise ShapeMismatch(
                f"input shape {image.shape} != network input {self.net.input_shape}"
            )
        layout = self._initial_layout()
        n = self.params.slot_count
        cts = []
        for ct_i in range(layout.ct_count):
            buf = np.zeros(n)
            lo = ct_i * layout.ch_per_ct
            hi = min(layout.shape[0], lo + layout.ch_per_ct)
            for c in range(lo, hi):
                _, base = layout.slot_of(c, 0, 0)
                for r in range(layout.shape[1]):
                    row = base + r * layout.rpitch
                    buf[row : row + layout.shape[2]] = image[c, r, :]
            cts.append(ctx.encode_encrypt(buf))
        return PackedTensor(cts, layout)

    def unpack(self, ctx: HeContext, tensor: PackedTensor) -> np.ndarray:
        layout = self.final_layout
        flat = np.zeros(int(np.prod(layout.shape)))
        decoded = [ctx.decrypt_decode(ct) for ct in tensor.ciphertexts]
        for i, ct_i, slot in layout.positions():
            flat[i] = decoded[ct_i][slot]
        return flat * self.final_pending

    def _run_diag_layer(self, ctx: HeContext, cl: _CompiledLayer, cts: list) -> list:
        n = self.params.slot_count
        out_count = cl.out_layout.ct_count
        in_level = min(ct.level for ct in cts)
        if in_level < 1:
            raise DepthExhausted(f"{cl.spec.name}: plaintext multiplication at level 0")
        bufs = [np.zeros(n) for _ in range(out_count)]
        for op in cl.diag_ops:
            src = cts[op.in_ct]
            if op.rotation % n:
                ctx.ledger.record("rotate", src.level, src.level)
            ctx.ledger.record("mult_pt", src.level, src.level - 1)
            ctx.ledger.record("add", src.level - 1, src.level - 1)
            kernels.sparse_rot_mac(bufs[op.out_ct], src.slots, op.rotation, op.out_idx, op.values)
        out = []
        for i, buf in enumerate(bufs):
            if ctx.params.noise_sigma > 0:
                buf = buf + ctx._rng.normal(0.0, ctx.params.noise_sigma, n)
            ct = SimdCiphertext(buf, in_level - 1, ctx.params_id)
            bias = cl.biases.get(i)
            if bias is not None:
                ct = ctx.add(ct, bias)
            out.append(ct)
        return out

    def _run_pool(self, ctx: HeContext, cl: _CompiledLayer, cts: list) -> list:
        out = []
        for ct in cts:
            acc = ct
            for k in cl.pool_rotations:
                acc = ctx.add(acc, ctx.rotate(ct, k))
            out.append(acc)
        return out

    def run(
        self,
        ctx: HeContext,
        image: np.ndarray,
        plan: BootstrapPlan | None = None,
    ) -> tuple[np.ndarray, "CostReport"]:
        if plan is None:
            plan = plan_bootstraps(self.net, self.params)
        bootstrap_sites = set(plan.insert_before)
        tensor = self.pack(ctx, image)
        saved: dict[str, PackedTensor] = {}
        trace = []
        sites_hit = 0
        for cl in self.layers:
            ly = cl.spec
            cur = saved[ly.input_from] if ly.input_from is not None else tensor
            operands = [cur]
            if ly.kind == "residual_add":
                operands.append(saved[ly.source])
            if ly.name in bootstrap_sites:
                sites_hit += 1
                operands = [
                    PackedTensor([ctx.bootstrap(ct) for ct in t.ciphertexts], t.layout)
                    for t in operands
                ]
            cur = operands[0]
            level_in = min(t.level for t in operands)
            if ly.kind in _WEIGHTED:
                cts = self._run_diag_layer(ctx, cl, cur.ciphertexts)
            elif ly.kind == "avgpool2d":
                cts = self._run_pool(ctx, cl, cur.ciphertexts)
            elif ly.kind == "flatten":
                cts = list(cur.ciphertexts)
            else:  # residual_add
                other = operands[1]
                cts = [ctx.add(a, b) for a, b in zip(cur.ciphertexts, other.ciphertexts)]
            if cl.materialize_scale is not None:
                cts = [ctx.mult(ct, cl.materialize_scale) for ct in cts]
            if ly.activation.tag != "identity":
                cts = [
                    act_apply(ctx, ly.activation, ct, cl.out_layout.active_slots(i))
                    for i, ct in enumerate(cts)
                ]
            level_out = min(ct.level for ct in cts)
            cts = [ctx.level_to(ct, level_out) for ct in cts]
            tensor = PackedTensor(cts, cl.out_layout)
            saved[ly.name] = tensor
            trace.append((ly.name, level_in, level_out, ly.name in bootstrap_sites))
        logits = self.unpack(ctx, tensor)
        report = CostReport(
            op_counts=dict(ctx.ledger.counters),
            cost_units=ctx.ledger.cost_units,
            bootstrap_count=sites_hit,
            depth_trace=trace,
        )
        return logits, report

    # .. static accounting ..

    def static_op_counts(self, plan: BootstrapPlan | None = None) -> dict:
        """Expected ledger counters for one inference, derived without running."""
        from collections import Counter

        if plan is None:
            plan = plan_bootstraps(self.net, self.params)
        counts: Counter = Counter()
        n = self.params.slot_count
        counts["encrypt"] += self._initial_layout().ct_count
        site_set = set(plan.insert_before)
        for cl in self.layers:
            ly = cl.spec
            ct_in = cl.in_layout.ct_count
            ct_out = cl.out_layout.ct_count
            if ly.name in site_set:
                boots = ct_in
                if ly.kind == "residual_add":
                    boots += self.layouts[ly.source].ct_count
                counts["bootstrap"] += boots
            if ly.kind in _WEIGHTED:
                for op in cl.diag_ops:
                    if op.rotation % n:
                        counts["rotate"] += 1
                    counts["mult_pt"] += 1
                    counts["add"] += 1
                counts["add"] += len(cl.biases)
            elif ly.kind == "avgpool2d":
                counts["rotate"] += len(cl.pool_rotations) * ct_in
                counts["add"] += len(cl.pool_rotations) * ct_in
            elif ly.kind == "residual_add":
                counts["add"] += ct_in
            if cl.materialize_scale is not None:
                counts["mult_pt"] += ct_out
            tag = ly.activation.tag
            if tag == "square":
                counts["mult_ct"] += ct_out
            elif tag == "relu_switch":
                for i in range(ct_out):
                    active = cl.out_layout.active_slots(i)
                    counts["encrypt"] += 1
                    counts["gate_switch"] += 2 * active
                    counts["gate_compare"] += active
                    counts["gate_unswitch"] += active
                    counts["add"] += 1
                    counts["mult_ct"] += 1
            elif tag == "relu_approx":
                per_ct = _approx_op_profile(ly.activation, self.params)
                for op, c in per_ct.items():
                    counts[op] += c * ct_out
        counts["decrypt"] += self.final_layout.ct_count
        return dict(counts)


def _approx_op_profile(kind: ActivationKind, params: SchemeParams) -> dict:
    """Per-ciphertext op counts of one approx-ReLU application (dry run)."""
    from .activations import act_relu_approx

    probe_params = params.replace(noise_sigma=0.0)
    ctx = HeContext(probe_params)
    ct = ctx.encode_encrypt(np.zeros(4))
    before = dict(ctx.ledger.counters)
    act_relu_approx(ctx, ct, kind.config)
    after = ctx.ledger.counters
    return {op: after[op] - before.get(op, 0) for op in after if after[op] != before.get(op, 0)}


@dataclass
class CostReport:
    op_counts: dict
    cost_units: float
    bootstrap_count: int
    depth_trace: list[tuple[str, int, int, bool]]

    def to_dict(self) -> dict:
        return {
            "op_counts": self.op_counts,
            "cost_units": self.cost_units,
            "bootstrap_count": self.bootstrap_count,
            "depth_trace": [
                {"layer": n, "level_in": li, "level_out": lo, "bootstrapped": b}
                for n, li, lo, b in self.depth_trace
            ],
        }

    def trace_csv(self) -> str:
        lines = ["layer,level_in,level_out,bootstrapped"]
        for name, li, lo, b in self.depth_trace:
            lines.append(f"{name},{li},{lo},{int(b)}")
        return "\n".join(lines) + "\n"


def run_inference(
    net: NetworkSpec,
    weights,
    image: np.ndarray,
    plan: BootstrapPlan | None = None,
    params: SchemeParams | None = None,
    seed: int | None = None,
) -> tuple[np.ndarray, CostReport]:
    """Pack, execute, and decode one image; returns logits and the report."""
    params = params or net.params()
    compiled = CompiledNetwork(net, weights, params)
    ctx = HeContext(params, seed=seed)
    return compiled.run(ctx, image, plan)


# -- plaintext oracle ---------------------------------------------------------


def _plain_conv(x: np.ndarray, w: np.ndarray, b, stride: int, pad: int) -> np.ndarray:
    c_out, c_in, k, _ = w.shape
    _, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    h_out = _spatial_out(h, k, stride, pad)
    w_out = _spatial_out(wd, k, stride, pad)
    out = np.zeros((c_out, h_out, w_out))
    for r in range(h_out):
        for col in range(w_out):
            patch = xp[:, r * stride : r * stride + k, col * stride : col * stride + k]
            out[:, r, col] = np.tensordot(w, patch, axes=3)
    if b is not None:
        out += b[:, None, None]
    return out


def _plain_pool(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    c, h, w = x.shape
    h_out = _spatial_out(h, k, stride, 0)
    w_out = _spatial_out(w, k, stride, 0)
    out = np.zeros((c, h_out, w_out))
    for r in range(h_out):
        for col in range(w_out):
            out[:, r, col] = x[:, r * stride : r * stride + k, col * stride : col * stride + k].mean(
                axis=(1, 2)
            )
    return out


def _plain_activation(kind: ActivationKind, x: np.ndarray, exact_relu: bool) -> np.ndarray:
    from . import cheb

    if kind.tag == "identity":
        return x
    if kind.tag == "square":
        return x * x
    if kind.tag == "relu_switch" or exact_relu:
        return np.maximum(x, 0.0)
    cfg = kind.config
    scaled = x / cfg.beta if cfg.beta > 1.0 else x
    return cheb.cheb_eval_plain(cfg.series_cache, scaled, check_domain=False)


def plaintext_reference(
    net: NetworkSpec,
    weights,
    image: np.ndarray,
    exact_relu: bool = False,
    on_preactivation=None,
) -> np.ndarray:
    """The same network over plain reals; ReLU is exact or the series.

    ``on_preactivation(layer_name, values)`` is called right before every
    non-identity activation; beta calibration hooks in here.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.shape != tuple(net.input_shape):
        raise ShapeMismatch(f"input shape {image.shape} != network input {net.input_shape}")
    outputs: dict[str, np.ndarray] = {}
    cur = image
    for ly in net.layers:
        x = outputs[ly.input_from] if ly.input_from is not None else cur
        if ly.kind == "conv2d":
            w = weights.get(ly.weights_ref + ".weight")
            b = weights.get(ly.weights_ref + ".bias") if weights.has(ly.weights_ref + ".bias") else None
            x = _plain_conv(x, w, b, ly.stride, ly.padding)
        elif ly.kind == "avgpool2d":
            x = _plain_pool(x, ly.kernel, ly.stride)
        elif ly.kind == "flatten":
            x = x.reshape(-1)
        elif ly.kind == "fully_connected":
            w = weights.get(ly.weights_ref + ".weight")
            x = w @ x
            if weights.has(ly.weights_ref + ".bias"):
                x = x + weights.get(ly.weights_ref + ".bias")
        elif ly.kind == "batchnorm_folded":
            scale = weights.get(ly.weights_ref + ".weight")
            x = x * scale[:, None, None]
            if weights.has(ly.weights_ref + ".bias"):
                x = x + weights.get(ly.weights_ref + ".bias")[:, None, None]
        else:  # residual_add
            x = x + outputs[ly.source]
        if on_preactivation is not None and ly.activation.tag != "identity":
            on_preactivation(ly.name, x)
        x = _plain_activation(ly.activation, x, exact_relu)
        outputs[ly.name] = x
        cur = x
    return cur


def calibrate_beta(net: NetworkSpec, weights, images, margin: float = 1.2) -> float:
    """Smallest scaled-ReLU bound covering every pre-activation value seen
    on the given images, widened by the safety margin."""
    bound = 0.0

    def track(_, values):
        nonlocal bound
        bound = max(bound, float(np.max(np.abs(values))))

    for image in images:
        plaintext_reference(net, weights, image, exact_relu=True, on_preactivation=track)
    return max(1.0, margin * bound)

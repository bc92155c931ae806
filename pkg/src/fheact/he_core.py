"""Emulated leveled SIMD homomorphic arithmetic.

A ciphertext here is its plaintext slot vector plus accounting metadata:
remaining multiplicative depth (level) and an informational noise estimate.
Multiplication and rescaling are fused, so every multiplication (ciphertext
or plaintext operand) consumes exactly one level. The gate domain models a
bit-exact boolean scheme: per-slot quantized integers on which comparisons
are exact, at a per-slot cost (no SIMD batching).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import CapacityError, DepthExhausted, ParamsMismatch, ShapeMismatch
from .ledger import OpLedger
from .params import SchemeParams

_context_ids = itertools.count(1)


@dataclass
class SimdCiphertext:
    """Slot vector + remaining depth. Treated as an immutable value."""

    slots: np.ndarray
    level: int
    params_id: int
    lineage_noise: float = 0.0

    def __len__(self):
        return len(self.slots)


@dataclass
class GateCiphertext:
    """Per-slot signed integers in the gate domain.

    ``encoding`` is "fixed" for quantized reals and "indicator" for exact
    0/1 comparison outputs.
    """

    quantized_slots: np.ndarray
    params_id: int
    encoding: str = "fixed"

    def __len__(self):
        return len(self.quantized_slots)


@dataclass
class HeContext:
    """Operation engine bound to one parameter set and one ledger."""

    params: SchemeParams
    seed: int | None = None
    ledger: OpLedger = field(init=False)
    params_id: int = field(init=False)

    def __post_init__(self):
        self.ledger = OpLedger(self.params)
        self.params_id = next(_context_ids)
        self._rng = np.random.default_rng(self.seed)

    # -- helpers ----------------------------------------------------------

    def _perturb(self, values: np.ndarray) -> np.ndarray:
        if self.params.noise_sigma > 0:
            return values + self._rng.normal(0.0, self.params.noise_sigma, len(values))
        return values

    def _noise_after(self, *cts: SimdCiphertext) -> float:
        base = math.sqrt(sum(ct.lineage_noise**2 for ct in cts))
        return math.hypot(base, self.params.noise_sigma)

    def _check_pair(self, a: SimdCiphertext, b: SimdCiphertext):
        if a.params_id != b.params_id:
            raise ParamsMismatch("ciphertexts come from different contexts")
        if len(a) != len(b):
            raise ShapeMismatch(f"slot lengths differ: {len(a)} vs {len(b)}")

    def _own(self, ct):
        if ct.params_id != self.params_id:
            raise ParamsMismatch("ciphertext does not belong to this context")

    def _as_plain(self, operand, length: int) -> np.ndarray:
        arr = np.asarray(operand, dtype=np.float64)
        if arr.ndim == 0:
            return np.full(length, float(arr))
        if arr.shape != (length,):
            raise ShapeMismatch(f"plaintext operand length {arr.shape} != {length}")
        return arr

    # -- encode / decode --------------------------------------------------

    def encode_encrypt(self, values) -> SimdCiphertext:
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or len(arr) == 0:
            raise CapacityError("ciphertexts must hold at least one slot")
        if len(arr) > self.params.slot_count:
            raise CapacityError(
                f"{len(arr)} values exceed slot capacity {self.params.slot_count}"
            )
        level = self.params.depth_after_bootstrap
        self.ledger.record("encrypt", level, level)
        return SimdCiphertext(
            self._perturb(arr.copy()), level, self.params_id, self.params.noise_sigma
        )

    def decrypt_decode(self, ct: SimdCiphertext) -> np.ndarray:
        self._own(ct)
        self.ledger.record("decrypt", ct.level, ct.level)
        return ct.slots.copy()

    # -- arithmetic --------------------------------------------------------

    def add(self, a: SimdCiphertext, b) -> SimdCiphertext:
        return self._add_sub(a, b, +1.0)

    def sub(self, a: SimdCiphertext, b) -> SimdCiphertext:
        return self._add_sub(a, b, -1.0)

    def sub_from_plain(self, plain, b: SimdCiphertext) -> SimdCiphertext:
        """plain - b, e.g. the all-ones mask minus a comparison result."""
        self._own(b)
        values = self._as_plain(plain, len(b)) - b.slots
        self.ledger.record("add", b.level, b.level)
        return SimdCiphertext(
            self._perturb(values), b.level, self.params_id, self._noise_after(b)
        )

    def _add_sub(self, a: SimdCiphertext, b, sign: float) -> SimdCiphertext:
        self._own(a)
        # junk slots outside the packed layout may overflow; that is expected
        if isinstance(b, SimdCiphertext):
            self._check_pair(a, b)
            with np.errstate(over="ignore", invalid="ignore"):
                values = a.slots + sign * b.slots
            level = min(a.level, b.level)
            noise = self._noise_after(a, b)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                values = a.slots + sign * self._as_plain(b, len(a))
            level = a.level
            noise = self._noise_after(a)
        self.ledger.record("add", level, level)
        return SimdCiphertext(self._perturb(values), level, self.params_id, noise)

    def mult(self, a: SimdCiphertext, b) -> SimdCiphertext:
        self._own(a)
        if isinstance(b, SimdCiphertext):
            self._check_pair(a, b)
            level = min(a.level, b.level)
            if level < 1:
                raise DepthExhausted("ciphertext multiplication at level 0")
            with np.errstate(over="ignore", invalid="ignore"):
                values = a.slots * b.slots
            op, noise = "mult_ct", self._noise_after(a, b)
        else:
            level = a.level
            if level < 1:
                raise DepthExhausted("plaintext multiplication at level 0")
            with np.errstate(over="ignore", invalid="ignore"):
                values = a.slots * self._as_plain(b, len(a))
            op, noise = "mult_pt", self._noise_after(a)
        self.ledger.record(op, level, level - 1)
        return SimdCiphertext(self._perturb(values), level - 1, self.params_id, noise)

    def rotate(self, ct: SimdCiphertext, k: int) -> SimdCiphertext:
        self._own(ct)
        self.ledger.record("rotate", ct.level, ct.level)
        values = np.roll(ct.slots, -k) if k % len(ct) else ct.slots.copy()
        return SimdCiphertext(values, ct.level, self.params_id, ct.lineage_noise)

    def bootstrap(self, ct: SimdCiphertext) -> SimdCiphertext:
        self._own(ct)
        level = self.params.depth_after_bootstrap
        self.ledger.record("bootstrap", ct.level, level)
        return SimdCiphertext(
            self._perturb(ct.slots.copy()), level, self.params_id, self._noise_after(ct)
        )

    def level_to(self, ct: SimdCiphertext, level: int) -> SimdCiphertext:
        """Modulus-switch down to a lower level. Free, metadata-only."""
        self._own(ct)
        if level > ct.level:
            raise DepthExhausted(f"cannot raise level {ct.level} -> {level} without bootstrap")
        if level == ct.level:
            return ct
        return SimdCiphertext(ct.slots.copy(), level, self.params_id, ct.lineage_noise)

    def rot_mac(
        self, acc: SimdCiphertext | None, src: SimdCiphertext, k: int, mask: np.ndarray
    ) -> SimdCiphertext:
        """Fused acc += rotate(src, k) * mask, the linear-layer hot path.

        Accounting is identical to rotate + plaintext mult + add, but the
        accumulator buffer is reused. The caller must own ``acc`` exclusively.
        """
        self._own(src)
        if src.level < 1:
            raise DepthExhausted("plaintext multiplication at level 0")
        self.ledger.record("rotate", src.level, src.level)
        self.ledger.record("mult_pt", src.level, src.level - 1)
        if acc is None:
            buf = np.zeros(len(src))
            kernels.rot_mac(buf, src.slots, k, mask)
            out = SimdCiphertext(buf, src.level - 1, self.params_id, self._noise_after(src))
        else:
            self._own(acc)
            if len(acc) != len(src):
                raise ShapeMismatch("accumulator length mismatch")
            self.ledger.record("add", min(acc.level, src.level - 1), min(acc.level, src.level - 1))
            kernels.rot_mac(acc.slots, src.slots, k, mask)
            out = acc
            out.level = min(acc.level, src.level - 1)
            out.lineage_noise = self._noise_after(acc, src)
        if self.params.noise_sigma > 0:
            out.slots += self._rng.normal(0.0, self.params.noise_sigma, len(out))
        return out

    # -- gate domain -------------------------------------------------------

    def switch_to_gate(self, ct: SimdCiphertext, n: int | None = None) -> GateCiphertext:
        self._own(ct)
        if n is None:
            n = len(ct)
        if n < 1:
            raise CapacityError("gate switch needs at least one active slot")
        if n > len(ct):
            raise ShapeMismatch(f"active slot count {n} exceeds ciphertext length {len(ct)}")
        q = kernels.quantize_saturate(
            np.ascontiguousarray(ct.slots[:n]), self.params.gate_scale, self.params.gate_qmax
        )
        self.ledger.record("gate_switch", ct.level, ct.level, count=n)
        return GateCiphertext(q, self.params_id)

    def gate_compare_less(
        self, a: GateCiphertext, b: GateCiphertext, n: int | None = None
    ) -> GateCiphertext:
        if a.params_id != b.params_id:
            raise ParamsMismatch("gate ciphertexts come from different contexts")
        if len(a) != len(b):
            raise ShapeMismatch(f"gate lengths differ: {len(a)} vs {len(b)}")
        if n is None:
            n = len(a)
        if n > len(a):
            raise ShapeMismatch(f"compare count {n} exceeds length {len(a)}")
        bits = kernels.compare_less(
            np.ascontiguousarray(a.quantized_slots[:n]),
            np.ascontiguousarray(b.quantized_slots[:n]),
        )
        self.ledger.record("gate_compare", 0, 0, count=n)
        return GateCiphertext(bits, self.params_id, encoding="indicator")

    def switch_to_simd(
        self,
        gc: GateCiphertext,
        level: int | None = None,
        pad_to: int | None = None,
    ) -> SimdCiphertext:
        if gc.params_id != self.params_id:
            raise ParamsMismatch("gate ciphertext does not belong to this context")
        n = len(gc)
        if n < 1:
            raise CapacityError("gate ciphertext has no active slots")
        if level is None:
            level = self.params.depth_after_bootstrap
        if gc.encoding == "indicator":
            values = gc.quantized_slots.astype(np.float64)
        else:
            values = kernels.dequantize(
                np.ascontiguousarray(gc.quantized_slots), self.params.gate_scale
            )
        if pad_to is not None:
            if pad_to < n:
                raise ShapeMismatch("pad_to is smaller than the active region")
            values = np.concatenate([values, np.zeros(pad_to - n)])
        self.ledger.record("gate_unswitch", level, level, count=n)
        return SimdCiphertext(self._perturb(values), level, self.params_id, self.params.noise_sigma)

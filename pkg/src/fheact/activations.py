"""The three encrypted activation strategies and their dispatch.

- square: one ciphertext multiplication, exactly one level.
- relu_approx: optional 1/beta input scaling (one level when beta > 1)
  followed by a degree-D Chebyshev series of beta * max(0, z) on [-1, 1].
- relu_switch: per-slot switch to the exact gate domain, strict less-than
  comparison against zero, and a sign-mask multiplication back in the SIMD
  domain; exactly one level of the input ciphertext.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import cheb
from .errors import ConfigError, DepthExhausted
from .he_core import HeContext, SimdCiphertext

ACTIVATION_TAGS = ("square", "relu_approx", "relu_switch", "identity")


@dataclass(frozen=True)
class ApproxReluConfig:
    """Scaled-ReLU series cache: g(z) = beta * max(0, z) on [-1, 1]."""

    beta: float = 1.0
    degree: int = 50
    series_cache: cheb.ChebyshevSeries = field(init=False, compare=False)

    def __post_init__(self):
        if self.beta < 1.0:
            raise ConfigError("beta must be >= 1")
        if self.degree < 1:
            raise ConfigError("approximation degree must be >= 1")
        series = cheb.cheb_interpolate(
            lambda z: self.beta * max(0.0, z), self.degree, (-1.0, 1.0)
        )
        object.__setattr__(self, "series_cache", series)

    @property
    def depth_cost(self) -> int:
        scale_cost = 1 if self.beta > 1.0 else 0
        return scale_cost + cheb.encrypted_depth_cost(self.degree)


@dataclass(frozen=True)
class ActivationKind:
    tag: str
    config: ApproxReluConfig | None = None

    def __post_init__(self):
        if self.tag not in ACTIVATION_TAGS:
            raise ConfigError(f"unknown activation {self.tag!r}")
        if self.tag == "relu_approx" and self.config is None:
            raise ConfigError("relu_approx requires an ApproxReluConfig")
        if self.tag != "relu_approx" and self.config is not None:
            raise ConfigError(f"{self.tag} takes no config")

    @property
    def depth_cost(self) -> int:
        if self.tag == "identity":
            return 0
        if self.tag in ("square", "relu_switch"):
            return 1
        return self.config.depth_cost


def identity() -> ActivationKind:
    return ActivationKind("identity")


def square() -> ActivationKind:
    return ActivationKind("square")


def relu_switch() -> ActivationKind:
    return ActivationKind("relu_switch")


def relu_approx(beta: float = 1.0, degree: int = 50) -> ActivationKind:
    return ActivationKind("relu_approx", ApproxReluConfig(beta, degree))


def act_square(ctx: HeContext, ct: SimdCiphertext) -> SimdCiphertext:
    """f(x) = x^2, slot-wise; consumes exactly one level."""
    return ctx.mult(ct, ct)


def act_relu_approx(
    ctx: HeContext, ct: SimdCiphertext, cfg: ApproxReluConfig
) -> SimdCiphertext:
    """Chebyshev-approximated ReLU for slot values in [-beta, beta]."""
    if cfg is None:
        raise ConfigError("relu_approx requires a config")
    if ct.level < cfg.depth_cost:
        raise DepthExhausted(
            f"approx ReLU needs {cfg.depth_cost} levels, ciphertext has {ct.level}"
        )
    scaled = ctx.mult(ct, 1.0 / cfg.beta) if cfg.beta > 1.0 else ct
    return cheb.cheb_eval_encrypted(ctx, cfg.series_cache, scaled)


def act_relu_switch(ctx: HeContext, ct: SimdCiphertext, n: int | None = None) -> SimdCiphertext:
    """Exact ReLU through the gate domain; one level of the input.

    Slots with |x| below one gate quantization step may keep their (tiny)
    negative value: the sign decision is made on the quantized integers.
    """
    if n is None:
        n = len(ct)
    tc = ctx.switch_to_gate(ct, n)
    zeros = ctx.encode_encrypt([0.0] * n)
    tz = ctx.switch_to_gate(zeros, n)
    comp = ctx.gate_compare_less(tc, tz, n)
    comp_simd = ctx.switch_to_simd(comp, pad_to=len(ct))
    sign = ctx.sub_from_plain(1.0, comp_simd)
    return ctx.mult(sign, ct)


def act_apply(
    ctx: HeContext, kind: ActivationKind, ct: SimdCiphertext, n: int | None = None
) -> SimdCiphertext:
    if kind.tag == "identity":
        return ct
    if kind.tag == "square":
        return act_square(ctx, ct)
    if kind.tag == "relu_switch":
        return act_relu_switch(ctx, ct, n)
    return act_relu_approx(ctx, ct, kind.config)

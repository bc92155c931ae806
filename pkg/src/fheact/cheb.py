"""Chebyshev machinery: basis, interpolation, plain and low-depth encrypted
evaluation, and error-vs-degree analysis.

Encrypted evaluation uses a baby-step/giant-step split of the series so that
the ciphertext-multiplication depth grows logarithmically in the degree. The
budget charged for a degree-D evaluation is ceil(log2(D+1)) + 2 levels (the
accounting real leveled libraries exhibit); a degree-50 series therefore
consumes 8 levels. The internal recursion can finish slightly shallower, in
which case the result is modulus-switched down to the declared budget so the
consumption contract is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DepthExhausted, FheactError
from .he_core import HeContext, SimdCiphertext


class DomainError(FheactError):
    """Argument outside the series' interval."""


@dataclass(frozen=True)
class ChebyshevSeries:
    """Coefficients c_0..c_D over basis T_0..T_D on an interval [a, b]."""

    coefficients: np.ndarray
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        a, b = self.domain
        if not a < b:
            raise ConfigError(f"invalid domain [{a}, {b}]")
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=np.float64)
        )
        if self.coefficients.ndim != 1 or len(self.coefficients) == 0:
            raise ConfigError("coefficients must be a non-empty vector")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def unit_domain(self) -> bool:
        return self.domain == (-1.0, 1.0)

    def to_unit(self, x):
        a, b = self.domain
        return (2.0 * np.asarray(x, dtype=np.float64) - (a + b)) / (b - a)


@dataclass(frozen=True)
class NodeSet:
    """First-kind Chebyshev roots, strictly decreasing in [-1, 1]."""

    degree: int
    nodes: np.ndarray


def cheb_basis(n: int, x: float) -> float:
    """T_n(x) via the three-term recurrence."""
    if n < 0:
        raise ConfigError("basis order must be non-negative")
    if abs(x) > 1.0 + 1e-12:
        raise DomainError(f"x={x} outside [-1, 1]")
    if n == 0:
        return 1.0
    t_prev, t_cur = 1.0, x
    for _ in range(n - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return t_cur


def cheb_nodes(n: int) -> NodeSet:
    """The n roots of T_n: cos((k + 1/2) * pi / n), k = 0..n-1."""
    if n < 1:
        raise ConfigError("need at least one node")
    k = np.arange(n)
    return NodeSet(n, np.cos((k + 0.5) * np.pi / n))


def cheb_interpolate(f, degree: int, domain=(-1.0, 1.0)) -> ChebyshevSeries:
    """Degree-D interpolation of f at the D+1 first-kind nodes.

    c_j = (2 - [j=0]) / (D+1) * sum_k f(x_k) * T_j(x_k), with the nodes
    mapped affinely onto the target interval.
    """
    if degree < 0:
        raise ConfigError("degree must be non-negative")
    a, b = domain
    if not a < b:
        raise ConfigError(f"invalid domain [{a}, {b}]")
    n = degree + 1
    theta = (np.arange(n) + 0.5) * np.pi / n
    nodes = np.cos(theta)
    mapped = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    fvals = np.array([f(x) for x in mapped], dtype=np.float64)
    # T_j(cos theta_k) = cos(j * theta_k)
    j = np.arange(n)[:, None]
    coeffs = (2.0 / n) * np.cos(j * theta[None, :]) @ fvals
    coeffs[0] *= 0.5
    return ChebyshevSeries(coeffs, (float(a), float(b)))


def _clenshaw(coeffs: np.ndarray, t):
    t = np.asarray(t, dtype=np.float64)
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for c in coeffs[:0:-1]:
        b1, b2 = 2.0 * t * b1 - b2 + c, b1
    return t * b1 - b2 + coeffs[0]


def cheb_eval_plain(series: ChebyshevSeries, x, check_domain: bool = True):
    """Clenshaw evaluation at x (scalar or array) inside the domain."""
    a, b = series.domain
    arr = np.asarray(x, dtype=np.float64)
    if check_domain and (np.any(arr < a - 1e-12) or np.any(arr > b + 1e-12)):
        raise DomainError(f"argument outside [{a}, {b}]")
    out = _clenshaw(series.coefficients, series.to_unit(arr))
    return float(out) if np.ndim(x) == 0 else out


def encrypted_depth_cost(degree: int, unit_domain: bool = True) -> int:
    """Levels consumed by cheb_eval_encrypted for a degree-D series."""
    if degree <= 0:
        base = 0
    elif degree == 1:
        base = 1
    else:
        base = math.ceil(math.log2(degree + 1)) + 2
    return base + (0 if unit_domain else 1)


# -- baby-step / giant-step evaluation --------------------------------------


def _baby_giant_orders(degree: int) -> tuple[int, list[int]]:
    levels = math.ceil(math.log2(degree + 1))
    bs = 2 ** max(1, math.ceil(levels / 2))
    giants = []
    g = bs
    while g <= degree:
        giants.append(g)
        g *= 2
    return bs, giants


def _divide_by_tg(coeffs: np.ndarray, g: int) -> tuple[np.ndarray, np.ndarray]:
    """Split p = q * T_g + r in the Chebyshev basis, deg p <= 2g - 1."""
    n = len(coeffs) - 1
    q = np.zeros(n - g + 1)
    q[0] = coeffs[g]
    q[1:] = 2.0 * coeffs[g + 1 :]
    r = coeffs[:g].copy()
    for j in range(1, n - g + 1):
        r[g - j] -= coeffs[g + j]
    return q, r


def cheb_eval_encrypted(
    ctx: HeContext, series: ChebyshevSeries, ct: SimdCiphertext
) -> SimdCiphertext:
    """Slot-wise series evaluation with logarithmic multiplication depth.

    Values outside the domain produce finite but unspecified results, the
    same semantics as evaluating the polynomial there.
    """
    degree = series.degree
    cost = encrypted_depth_cost(degree, series.unit_domain)
    if ct.level < cost:
        raise DepthExhausted(
            f"degree-{degree} series needs {cost} levels, ciphertext has {ct.level}"
        )
    target_level = ct.level - cost

    t = ct
    if not series.unit_domain:
        a, b = series.domain
        t = ctx.mult(t, 2.0 / (b - a))
        t = ctx.add(t, -(a + b) / (b - a))

    coeffs = series.coefficients
    if degree == 0:
        zero = ctx.sub(t, t)
        return ctx.level_to(ctx.add(zero, coeffs[0]), target_level)
    if degree == 1:
        out = ctx.mult(t, coeffs[1])
        return ctx.level_to(ctx.add(out, coeffs[0]), target_level)

    bs, giants = _baby_giant_orders(degree)

    def double_prod(a, b):
        # 2ab computed as ab + ab: one multiplicative level, no scalar mult
        prod = ctx.mult(a, b)
        return ctx.add(prod, prod)

    # Baby steps T_1 .. T_{bs-1}; product identity T_{a+b} = 2 T_a T_b - T_{a-b}
    basis: dict[int, SimdCiphertext] = {1: t}
    for j in range(2, bs):
        lo, hi = j // 2, j - j // 2
        prod = double_prod(basis[lo], basis[hi])
        basis[j] = ctx.sub(prod, 1.0) if lo == hi else ctx.sub(prod, basis[hi - lo])
    # Giant steps T_bs, T_2bs, ... via T_2n = 2 T_n^2 - 1
    for g in giants:
        basis[g] = ctx.sub(double_prod(basis[g // 2], basis[g // 2]), 1.0)

    def eval_chunk(c: np.ndarray):
        out = None
        for j in range(len(c) - 1, 0, -1):
            term = ctx.mult(basis[j], float(c[j]))
            out = term if out is None else ctx.add(out, term)
        if out is None:
            return float(c[0])  # pure constant, folded by the caller
        return ctx.add(out, float(c[0]))

    def eval_rec(c: np.ndarray):
        n = len(c) - 1
        if n < bs:
            return eval_chunk(c)
        g = max(gg for gg in giants if gg <= n)
        q, r = _divide_by_tg(c, g)
        vq = eval_rec(q)
        if isinstance(vq, float):
            term = ctx.mult(basis[g], vq)
        else:
            term = ctx.mult(vq, basis[g])
        vr = eval_rec(r)
        if isinstance(vr, float):
            return ctx.add(term, vr)
        return ctx.add(term, vr)

    out = eval_rec(coeffs)
    if isinstance(out, float):
        zero = ctx.sub(t, t)
        out = ctx.add(zero, out)
    if out.level < target_level:
        raise DepthExhausted("series evaluation exceeded its declared budget")
    return ctx.level_to(out, target_level)


def degree_sweep(f, degrees, domain=(-1.0, 1.0), grid: int = 10001):
    """Max grid interpolation error and encrypted depth cost per degree."""
    degrees = list(degrees)
    if not degrees:
        raise ConfigError("empty degree list")
    if grid < 2:
        raise ConfigError("grid must have at least 2 points")
    a, b = domain
    xs = np.linspace(a, b, grid)
    fx = np.array([f(x) for x in xs], dtype=np.float64)
    rows = []
    unit = (float(a), float(b)) == (-1.0, 1.0)
    for d in degrees:
        series = cheb_interpolate(f, d, domain)
        err = float(np.max(np.abs(cheb_eval_plain(series, xs) - fx)))
        rows.append((d, err, encrypted_depth_cost(d, unit)))
    return rows

#!/usr/bin/env python3
"""Brute-force measurement of the max grid error of the degree-D Chebyshev
interpolant of ReLU on [-1, 1].

Independent of the library: coefficients come from the plain cosine-sum
formula at first-kind nodes, evaluation from the naive three-term recurrence.
The D=50 value printed here is the one pinned in fheact/constants.py.
"""
import argparse
import math


def relu(x):
    return x if x > 0.0 else 0.0


def interpolate(degree):
    n = degree + 1
    nodes = [math.cos((k + 0.5) * math.pi / n) for k in range(n)]
    fvals = [relu(x) for x in nodes]
    coeffs = []
    for j in range(n):
        s = sum(fvals[k] * math.cos(j * (k + 0.5) * math.pi / n) for k in range(n))
        coeffs.append((1.0 if j == 0 else 2.0) * s / n)
    return coeffs


def eval_naive(coeffs, x):
    # T_0 = 1, T_1 = x, T_n = 2x T_{n-1} - T_{n-2}
    total = coeffs[0]
    tprev, tcur = 1.0, x
    for c in coeffs[1:]:
        total += c * tcur
        tprev, tcur = tcur, 2.0 * x * tcur - tprev
    return total


def max_grid_error(degree, grid=10001):
    coeffs = interpolate(degree)
    worst = 0.0
    for i in range(grid):
        x = -1.0 + 2.0 * i / (grid - 1)
        err = abs(eval_naive(coeffs, x) - relu(x))
        if err > worst:
            worst = err
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--degrees", type=int, nargs="*", default=[50])
    ap.add_argument("--grid", type=int, default=10001)
    args = ap.parse_args()
    for d in args.degrees:
        print(f"degree {d}: max grid error = {max_grid_error(d, args.grid):.17e}")

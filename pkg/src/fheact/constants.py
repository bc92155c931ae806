"""Pinned reference constants.

RELU_EPS_50 is the max grid error (10,001 uniform points on [-1, 1]) of the
degree-50 Chebyshev interpolant of ReLU, measured once by the independent
brute-force script scripts/measure_relu_series_error.py. The library must
reproduce it to 1e-10.
"""

RELU_SERIES_DEGREE = 50
RELU_EPS_50 = 5.85399490202107454e-03
EPS_GRID_POINTS = 10001

"""Pure numpy implementations of the hot slot kernels."""

import numpy as np


def rot_mac(acc, src, k, mask):
    """acc[j] += src[(j + k) % n] * mask[j], in place."""
    if k:
        acc += np.roll(src, -k) * mask
    else:
        acc += src * mask
    return acc


def sparse_rot_mac(acc, src, k, idx, val):
    """acc[idx[i]] += src[(idx[i] + k) % n] * val[i], in place.

    The sparse form of rot_mac for masks that touch few slots.
    """
    n = len(src)
    acc[idx] += src[(idx + k) % n] * val
    return acc


def quantize_saturate(x, scale, qmax):
    """Round-half-away-from-zero fixed-point quantization with saturation.

    Maps reals to integers in [-(qmax + 1), qmax].
    """
    v = np.asarray(x, dtype=np.float64) * scale
    q = np.copysign(np.floor(np.abs(v) + 0.5), v)
    return np.clip(q, -(qmax + 1), qmax).astype(np.int64)


def dequantize(q, scale):
    return np.asarray(q, dtype=np.float64) / scale


def compare_less(a, b):
    """Element-wise indicator a < b on quantized integers."""
    return (np.asarray(a) < np.asarray(b)).astype(np.int64)

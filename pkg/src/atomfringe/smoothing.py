"""Savitzky-Golay least-squares smoothing.

Each output sample is the value at the window centre of a polynomial fitted to
the surrounding window.  Samples near the array ends are smoothed with the
window truncated to the available data rather than with padded values, so a
polynomial of degree <= ``poly_order`` is reproduced exactly everywhere.
"""

from __future__ import annotations

import numpy as np

__all__ = ["savitzky_golay", "savgol_center_coefficients"]


def savgol_center_coefficients(window: int, poly_order: int) -> np.ndarray:
    """Convolution coefficients evaluating the window-centre polynomial fit.

    The squared norm of this vector is the white-noise variance reduction
    factor of the interior filter.
    """
    _validate(window, poly_order)
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(offsets, poly_order + 1, increasing=True)
    # first row of the pseudoinverse: evaluation of the fit at offset 0
    coeffs = np.linalg.pinv(vander)[0]
    return coeffs


def savitzky_golay(signal, window: int, poly_order: int) -> np.ndarray:
    """Smooth a 1-D signal with a local least-squares polynomial fit.

    Parameters
    ----------
    signal : array_like
        Samples on a uniform grid.
    window : int
        Odd number of samples in the fit window.
    poly_order : int
        Degree of the local polynomial, must be smaller than ``window``.
    """
    _validate(window, poly_order)
    y = np.asarray(signal, dtype=float)
    if y.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    n = y.size
    if n < window:
        raise ValueError(f"signal length {n} is shorter than the window {window}")

    half = window // 2
    coeffs = savgol_center_coefficients(window, poly_order)
    out = np.empty_like(y)
    # interior: plain correlation with the centre coefficients
    out[half : n - half] = np.convolve(y, coeffs[::-1], mode="valid")

    # ends: refit with the window truncated to the available samples
    for i in range(half):
        for idx in (i, n - 1 - i):
            lo = max(0, idx - half)
            hi = min(n, idx + half + 1)
            offsets = np.arange(lo, hi, dtype=float) - idx
            order = min(poly_order, hi - lo - 1)
            vander = np.vander(offsets, order + 1, increasing=True)
            sol, *_ = np.linalg.lstsq(vander, y[lo:hi], rcond=None)
            out[idx] = sol[0]
    return out


def _validate(window: int, poly_order: int):
    if int(window) != window or window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if int(poly_order) != poly_order or poly_order < 0 or poly_order >= window:
        raise ValueError(f"poly_order must satisfy 0 <= poly_order < window, got {poly_order}")

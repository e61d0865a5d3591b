"""Savitzky-Golay derivative filters and series differentiation.

Filter taps are kept in "dot" orientation: the derivative estimate at the
window centre is taps @ window_samples / t_s**deriv. Interior samples use
the centred window; the first and last half-window samples fall back to a
one-sided polynomial fit of the same order, so outputs keep full length.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadFilterSpec, SeriesTooShort
from .simulate import euler_omega_dot


@dataclass(frozen=True)
class DerivFilter:
    """Polynomial least-squares derivative filter."""
    taps: np.ndarray
    order: int
    window: int
    deriv: int


def _poly_fit_weights(order, window):
    """Least-squares weights mapping window samples to polynomial
    coefficients of the fit y(k) = sum_j c_j k^j, k = 0..window-1."""
    V = np.vander(np.arange(window, dtype=float), order + 1, increasing=True)
    return np.linalg.pinv(V)


def _taps_at(order, window, deriv, pos):
    """Derivative-of-fit weights evaluated at sample index `pos` within
    the window (pos = window//2 gives the classic centred taps)."""
    coeff_w = _poly_fit_weights(order, window)
    taps = np.zeros(window)
    for j in range(deriv, order + 1):
        scale = math.factorial(j) / math.factorial(j - deriv)
        taps += scale * pos ** (j - deriv) * coeff_w[j]
    return taps


def savgol_filter(order, window, deriv):
    """Centred Savitzky-Golay derivative filter.

    Requires deriv <= order < window and an odd window.
    """
    if window % 2 == 0 or window < 1:
        raise BadFilterSpec(f"window must be odd and positive, got {window}")
    if not (0 <= deriv <= order < window):
        raise BadFilterSpec(
            f"need deriv <= order < window, got deriv={deriv} order={order} "
            f"window={window}")
    taps = _taps_at(order, window, deriv, window // 2)
    return DerivFilter(taps=taps, order=order, window=window, deriv=deriv)


def differentiate_series(series, t_s, filt):
    """Apply a DerivFilter along axis 0 of an (F, d) or (F,) series.

    Interior samples are the centred taps divided by t_s**deriv; the
    half-window boundary samples re-use the one-sided polynomial fit of
    the same order anchored at the series ends, so the output has the
    same length F as the input.
    """
    y = np.asarray(series, dtype=float)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    F = y.shape[0]
    w, half = filt.window, filt.window // 2
    if F < w:
        raise SeriesTooShort(f"series length {F} < window {w}")
    scale = 1.0 / t_s ** filt.deriv
    out = np.empty_like(y)
    # interior: correlation with the centred taps
    stacked = np.stack([y[i:F - w + 1 + i] for i in range(w)])
    out[half:F - half] = np.einsum("k,kfd->fd", filt.taps, stacked) * scale
    # boundaries: same-order fit on the first/last window, evaluated off-centre
    for i in range(half):
        out[i] = _taps_at(filt.order, w, filt.deriv, i) @ y[:w] * scale
        pos = w - half + i
        out[F - half + i] = _taps_at(filt.order, w, filt.deriv, pos) @ y[-w:] * scale
    return out[:, 0] if squeeze else out


def differentiate_tracks(tracks, t_s, filt1, filt2):
    """First and second derivatives of an (F, P, 2) track array."""
    tracks = np.asarray(tracks, dtype=float)
    F, P, _ = tracks.shape
    flat = tracks.reshape(F, 2 * P)
    flows = differentiate_series(flat, t_s, filt1).reshape(F, P, 2)
    dflows = differentiate_series(flat, t_s, filt2).reshape(F, P, 2)
    return flows, dflows


def omega_dot_series(omega, mode, t_s, inertia=None, torque=None, filt=None):
    """Angular-acceleration series from gyro samples.

    mode "euler" applies the rigid-body equation of motion (needs inertia
    and torque), "zero" assumes constant angular velocity, "numeric"
    differentiates the gyro series with `filt` (default order 2, window 5).
    """
    omega = np.asarray(omega, dtype=float)
    if mode == "zero":
        return np.zeros_like(omega)
    if mode == "euler":
        if inertia is None or torque is None:
            raise BadFilterSpec("euler mode needs inertia and torque")
        return euler_omega_dot(inertia, torque, omega)
    if mode == "numeric":
        if filt is None:
            filt = savgol_filter(2, 5, 1)
        return differentiate_series(omega, t_s, filt)
    raise BadFilterSpec(f"unknown omega_dot mode {mode!r}")

"""Frequency extraction from probe time series."""

import numpy as np
from scipy.signal import find_peaks
from scipy.signal.windows import hann

from ..errors import AmbiguousSpectrum

MIN_SAMPLES = 2048
AMBIGUITY_RATIO = 0.5
PAD = 4


def measure_dispersion(series, dt, min_samples=MIN_SAMPLES):
    """Dominant angular frequency of a single-mode signal.

    The mean is removed (a constant signal gives 0).  Hann-windowed,
    zero-padded real FFT; the peak is refined by a parabola through the log
    magnitudes of the three bins around the maximum.

    Raises
    ------
    ValueError
        Too few samples or non-positive ``dt``.
    AmbiguousSpectrum
        A second local peak reaches half the height of the largest one.
    """
    x = np.asarray(series, float).ravel()
    if x.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {x.size}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if np.ptp(x) <= 1e-14 * np.max(np.abs(x)) or not np.any(x):
        return 0.0
    x = x - x.mean()
    nfft = PAD * x.size
    mag = np.abs(np.fft.rfft(x * hann(x.size, sym=False), nfft))
    # mirror bin 0 so a DC peak is detected and refined symmetrically
    ext = np.concatenate([mag[1:2], mag])
    peaks, _ = find_peaks(ext)
    peaks = peaks - 1
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(mag))])
    heights = mag[peaks]
    order = np.argsort(heights)[::-1]
    top = peaks[order[0]]
    if peaks.size > 1:
        # sidelobes of the main peak lie within a few padded bins of it
        far = [p for p in peaks[order[1:]] if abs(p - top) > 2 * PAD]
        if far and mag[far[0]] >= AMBIGUITY_RATIO * mag[top]:
            raise AmbiguousSpectrum(
                f"peaks at bins {top} and {far[0]} have comparable height "
                f"({mag[far[0]] / mag[top]:.2f})")
    if top == 0:
        return 0.0
    shift = 0.0
    if top < mag.size - 1:
        a, b, c = np.log(mag[top - 1:top + 2] + 1e-300)
        den = a - 2.0 * b + c
        if den < 0:
            shift = 0.5 * (a - c) / den
    return float(2.0 * np.pi * (top + shift) / (nfft * dt))

"""Kaiser-window FIR low-pass design and the filtering helpers built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .signalcore import as_signal


class BadBand(ValueError):
    pass


class BadFactor(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FirFilter:
    """Symmetric (type I) low-pass FIR.

    ``cutoff_hz`` is the passband edge; the stopband starts at
    ``cutoff_hz + transition_hz``.
    """

    taps: np.ndarray
    cutoff_hz: float
    transition_hz: float
    atten_db: float
    fs_hz: float
    beta: float

    @property
    def numtaps(self) -> int:
        return self.taps.size

    @property
    def stopband_hz(self) -> float:
        return self.cutoff_hz + self.transition_hz

    def frequency_response(self, n_points=4096):
        """Amplitude response sampled on ``n_points`` frequencies in [0, fs/2]."""
        freqs = np.linspace(0.0, self.fs_hz / 2.0, n_points)
        half = (self.numtaps - 1) // 2
        k = np.arange(self.numtaps) - half
        # zero-phase amplitude of a symmetric filter is real
        amp = np.cos(2 * np.pi * np.outer(freqs / self.fs_hz, k)) @ self.taps
        return freqs, amp


def kaiser_beta(atten_db: float) -> float:
    a = float(atten_db)
    if a > 50:
        return 0.1102 * (a - 8.7)
    if a >= 21:
        return 0.5842 * (a - 21) ** 0.4 + 0.07886 * (a - 21)
    return 0.0


def kaiser_numtaps(atten_db: float, transition_hz: float, fs_hz: float) -> int:
    """Odd tap count of the minimum-order design.

    The order estimate ``(A - 8) / (2.285 * dw)`` is rounded up and bumped to
    the next odd integer so the filter has an integer group delay.
    """
    dw = 2 * np.pi * transition_hz / fs_hz
    n = max(int(math.ceil((atten_db - 8.0) / (2.285 * dw))), 1)
    if n % 2 == 0:
        n += 1
    return n


def _kaiser_taps(numtaps, fc, beta):
    half = (numtaps - 1) // 2
    k = np.arange(numtaps) - half
    h = 2 * fc * np.sinc(2 * fc * k) * np.kaiser(numtaps, beta)
    h = 0.5 * (h + h[::-1])
    return h / math.fsum(h)


def stopband_attenuation_db(f: FirFilter, n_points=4096) -> float:
    """Worst measured attenuation at or beyond the stopband edge."""
    freqs, amp = f.frequency_response(n_points)
    # grid points that land on the edge may round to just below it
    stop = np.abs(amp[freqs >= f.stopband_hz * (1 - 1e-12)])
    if stop.size == 0:
        return np.inf
    peak = stop.max()
    return np.inf if peak == 0 else float(-20 * np.log10(peak))


def design_kaiser_lowpass(fs_hz, cutoff_hz, transition_hz=5.0, atten_db=60.0) -> FirFilter:
    """Minimum-order Kaiser-window low-pass with unit DC gain.

    Parameters
    ----------
    fs_hz : float
        Sampling rate.
    cutoff_hz : float
        Passband edge.
    transition_hz : float
        Width of the transition band; the ideal sinc cuts at its centre.
    atten_db : float
        Design stopband attenuation.

    The Kaiser order estimate is only approximate, so the tap count is
    raised two at a time until the response sampled on 4096 frequencies
    reaches ``atten_db`` beyond the stopband edge.
    """
    fs_hz = float(fs_hz)
    nyq = fs_hz / 2.0
    if not (cutoff_hz > 0 and transition_hz > 0 and atten_db > 0):
        raise BadBand("cutoff, transition width and attenuation must be positive")
    if cutoff_hz + transition_hz / 2.0 >= nyq:
        raise BadBand(
            f"band edge {cutoff_hz + transition_hz / 2.0} Hz reaches Nyquist {nyq} Hz"
        )
    numtaps = kaiser_numtaps(atten_db, transition_hz, fs_hz)
    beta = kaiser_beta(atten_db)
    fc = (cutoff_hz + transition_hz / 2.0) / fs_hz
    limit = 2 * numtaps + 64
    while True:
        h = _kaiser_taps(numtaps, fc, beta)
        h.setflags(write=False)
        f = FirFilter(h, float(cutoff_hz), float(transition_hz), float(atten_db), fs_hz, beta)
        if numtaps >= limit or stopband_attenuation_db(f) >= atten_db:
            return f
        numtaps += 2


def apply_zero_phase(f: FirFilter, x) -> np.ndarray:
    """Filter without delay, reflecting the signal at both ends.

    The output sample ``n`` is the tap-weighted sum centred on input sample
    ``n``, so an impulse comes back as the tap sequence centred on it.
    """
    taps = f.taps if isinstance(f, FirFilter) else np.asarray(f, dtype=np.float64)
    x = as_signal(x)
    half = (taps.size - 1) // 2
    if half == 0:
        return x * taps[0]
    if x.size == 1:
        padded = np.full(2 * half + 1, x[0])
    else:
        padded = np.pad(x, half, mode="reflect")
    return np.convolve(padded, taps, mode="valid")


def apply_causal(f: FirFilter, x) -> np.ndarray:
    """Plain causal filtering; output delayed by ``(L - 1) / 2`` samples."""
    return np.convolve(as_signal(x), f.taps)[: np.size(x)]


def estimate_max_frequency(x, fs_hz, energy_fraction=0.999) -> float:
    """Smallest DFT-bin frequency holding ``energy_fraction`` of the energy.

    An all-zero signal has no spectrum to speak of and returns 0.
    """
    x = as_signal(x)
    if x.size < 2:
        raise ValueError("need at least two samples")
    power = np.abs(np.fft.rfft(x)) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    cum = np.cumsum(power)
    idx = int(np.searchsorted(cum, energy_fraction * total, side="left"))
    idx = min(idx, power.size - 1)
    return float(np.fft.rfftfreq(x.size, d=1.0 / fs_hz)[idx])


def rational_factors(up: int, down: int) -> tuple[int, int]:
    if up < 1 or down < 1:
        raise BadFactor(f"resampling factors must be positive, got {up}/{down}")
    frac = Fraction(int(up), int(down))
    return frac.numerator, frac.denominator


def resample_filter(fs_hz, up: int, down: int, atten_db=60.0, passband=0.8) -> FirFilter:
    """Anti-imaging / anti-aliasing low-pass at the upsampled rate ``fs * up``.

    The stopband starts at the lower of the two Nyquist frequencies and the
    passband ends at ``passband`` times that.
    """
    fs_up = fs_hz * up
    stop = min(fs_hz, fs_hz * up / down) / 2.0
    cutoff = passband * stop
    return design_kaiser_lowpass(fs_up, cutoff, stop - cutoff, atten_db)


def resample_rational(x, fs_hz, up: int, down: int):
    """Change the rate by ``up / down`` with zero stuffing and decimation.

    Returns the resampled signal and its rate.  Edges are handled like
    :func:`apply_zero_phase`: the input is mirrored before stuffing so
    the mirrored samples land on the upsampled grid.
    """
    up, down = rational_factors(up, down)
    x = as_signal(x)
    new_fs = fs_hz * up / down
    if up == 1 and down == 1:
        return x.copy(), float(fs_hz)
    f = resample_filter(fs_hz, up, down)
    half = (f.numtaps - 1) // 2
    n = x.size
    pad = half // up + 1
    xp = np.pad(x, pad, mode="reflect") if n > 1 else np.full(n + 2 * pad, x[0])
    stuffed = np.zeros(xp.size * up)
    stuffed[::up] = xp
    y = np.convolve(stuffed, f.taps * up)
    # "full" output index k + half corresponds to stuffed index k
    start = pad * up + half
    y = y[start : start + n * up]
    out_len = -(-n * up // down)
    return y[::down][:out_len].copy(), float(new_fs)

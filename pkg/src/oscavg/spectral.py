"""PSD and autocorrelation estimation from simulated ensembles.

Welch averaging with a hann window and 50% overlap is the default; the
estimator is normalized as a two-sided density so unit-variance white
noise gives a flat 1/fs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sps

from .analytic import to_dbc_hz
from .stochastic import ParameterError, Waveform


class SpectralShapeError(ValueError):
    """Segment/lag request incompatible with the data length."""


@dataclass(frozen=True)
class SpectrumEstimate:
    """Estimated PSD on a frequency grid (Hz, offset from carrier)."""

    freqs: np.ndarray
    psd: np.ndarray
    n_segments: int
    fs: float
    sidedness: str = "two"

    def __post_init__(self):
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=float))
        object.__setattr__(self, "psd", np.asarray(self.psd, dtype=float))
        if self.freqs.shape != self.psd.shape:
            raise ParameterError("frequency grid and PSD shape mismatch")
        if self.sidedness not in ("one", "two"):
            raise ParameterError("sidedness must be 'one' or 'two'")

    def dbc_hz(self) -> np.ndarray:
        return to_dbc_hz(np.maximum(self.psd, np.finfo(float).tiny))

    def total_power(self) -> float:
        return float(np.trapezoid(self.psd, self.freqs))

    def interp(self, freqs) -> np.ndarray:
        return np.interp(freqs, self.freqs, self.psd)


def _as_array(w) -> tuple[np.ndarray, float]:
    if isinstance(w, Waveform):
        return w.samples, w.fs
    raise ParameterError("pass a Waveform or use welch_psd(x, fs=...)")


def welch_psd(x, fs: Optional[float] = None, segment_len: int = 1024,
              overlap: float = 0.5, window: str = "hann") -> SpectrumEstimate:
    """Two-sided Welch density estimate of a real or complex sequence.

    `x` is a Waveform or an array (then `fs` is required). The grid is
    centered (fftshift order) with frequencies as offsets from the carrier
    for baseband inputs.
    """
    if isinstance(x, Waveform):
        data, fs = x.samples, x.fs
    else:
        if fs is None:
            raise ParameterError("fs required for raw arrays")
        data = np.asarray(x)
    if segment_len > data.size:
        raise SpectralShapeError(f"segment_len={segment_len} exceeds data length {data.size}")
    if not 0 <= overlap < 1:
        raise ParameterError("overlap must be in [0, 1)")
    if window not in ("hann", "rect"):
        raise ParameterError("window must be 'hann' or 'rect'")
    win = sps.get_window("hann", segment_len) if window == "hann" else np.ones(segment_len)
    noverlap = int(segment_len * overlap)
    freqs, psd = sps.welch(data, fs=fs, window=win, nperseg=segment_len,
                           noverlap=noverlap, detrend=False,
                           return_onesided=False, scaling="density")
    freqs = np.fft.fftshift(freqs)
    psd = np.fft.fftshift(psd)
    step = segment_len - noverlap
    n_segments = max(1, (data.size - noverlap) // step)
    return SpectrumEstimate(freqs=freqs, psd=psd, n_segments=n_segments, fs=fs)


def ensemble_welch(sequences: np.ndarray, fs: float, segment_len: int = 1024,
                   overlap: float = 0.5, window: str = "hann") -> SpectrumEstimate:
    """Welch estimate averaged over an ensemble, one sequence per row.

    Per-row estimates are computed independently and reduced by an
    associative mean, so the reduction order only moves the result at the
    float-rounding level.
    """
    sequences = np.atleast_2d(sequences)
    if sequences.shape[0] == 0:
        raise ParameterError("empty ensemble")
    first = welch_psd(sequences[0], fs=fs, segment_len=segment_len,
                      overlap=overlap, window=window)
    acc = np.array(first.psd)
    for row in sequences[1:]:
        acc += welch_psd(row, fs=fs, segment_len=segment_len,
                         overlap=overlap, window=window).psd
    return SpectrumEstimate(freqs=first.freqs, psd=acc / sequences.shape[0],
                            n_segments=first.n_segments * sequences.shape[0], fs=fs)


def autocorr_estimate(sequences: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (normalized-by-N) ensemble-averaged estimate of
    E[x_t conj(x_{t+lag})] for lag = 0..max_lag.

    `sequences` has one complex sequence per row; returns a complex array of
    length max_lag + 1.
    """
    sequences = np.atleast_2d(np.asarray(sequences))
    if sequences.shape[0] == 0 or sequences.size == 0:
        raise ParameterError("empty ensemble")
    n = sequences.shape[1]
    if max_lag >= n:
        raise SpectralShapeError(f"max_lag={max_lag} >= sequence length {n}")
    out = np.empty(max_lag + 1, dtype=complex)
    for lag in range(max_lag + 1):
        if lag == 0:
            # real by construction; avoids a spurious imaginary residue
            prod = sequences.real**2 + sequences.imag**2
        else:
            prod = sequences[:, :-lag] * np.conj(sequences[:, lag:])
        out[lag] = prod.sum(axis=1).mean() / n
    return out


def autocorr_per_path(sequences: np.ndarray, lags: Sequence[int]) -> np.ndarray:
    """Per-path time-averaged autocorrelation at the given lags, for
    Monte Carlo standard errors. Shape (n_paths, n_lags), complex."""
    sequences = np.atleast_2d(np.asarray(sequences))
    n = sequences.shape[1]
    out = np.empty((sequences.shape[0], len(lags)), dtype=complex)
    for j, lag in enumerate(lags):
        if lag >= n:
            raise SpectralShapeError(f"lag {lag} >= sequence length {n}")
        if lag == 0:
            out[:, j] = np.mean(sequences.real**2 + sequences.imag**2, axis=1)
        else:
            out[:, j] = np.mean(sequences[:, :-lag] * np.conj(sequences[:, lag:]), axis=1)
    return out


def psd_of_phase_shift(phase_ensemble: np.ndarray, dt: float,
                       segment_len: int = 1024, overlap: float = 0.5,
                       window: str = "hann") -> SpectrumEstimate:
    """Welch PSD of exp(j*theta) per path, averaged over the ensemble.

    The frequency grid is the offset from the carrier in Hz.
    """
    phase_ensemble = np.atleast_2d(np.asarray(phase_ensemble, dtype=float))
    u = np.exp(1j * phase_ensemble)
    return ensemble_welch(u, fs=1.0 / dt, segment_len=segment_len,
                          overlap=overlap, window=window)

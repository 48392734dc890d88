"""Wiener phase-noise paths, frequency offsets, and oscillator waveforms.

All randomness flows through (master_seed, path_index) pairs mapped onto
independent PCG64 streams via numpy's SeedSequence spawning, so ensembles
are reproducible regardless of generation order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * np.pi

# stream tags keep the phase path and the offset draw of one oscillator
# on disjoint RNG streams
_STREAM_PHASE = 0
_STREAM_OFFSET = 1


class ParameterError(ValueError):
    """Invalid model or sampling parameter."""


class SamplingError(ValueError):
    """Requested sample rate cannot represent the signal content."""


def path_rng(seed_id: Tuple[int, int], stream: int = _STREAM_PHASE) -> np.random.Generator:
    """Independent generator for one (master seed, path index) pair."""
    master, index = seed_id
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class OffsetDist:
    """Frequency-offset distribution: fixed value, uniform on +-half_width,
    or zero-mean normal with std sigma (all Hz, relative to nominal)."""

    kind: str  # "delta" | "uniform" | "normal"
    param: float

    def __post_init__(self):
        if self.kind not in ("delta", "uniform", "normal"):
            raise ParameterError(f"unknown offset distribution {self.kind!r}")
        if not np.isfinite(self.param):
            raise ParameterError("offset parameter must be finite")
        if self.kind in ("uniform", "normal") and self.param < 0:
            raise ParameterError(f"{self.kind} offset parameter must be >= 0")

    @classmethod
    def delta(cls, value: float = 0.0) -> "OffsetDist":
        return cls("delta", value)

    @classmethod
    def uniform(cls, half_width: float) -> "OffsetDist":
        return cls("uniform", half_width)

    @classmethod
    def normal(cls, sigma: float) -> "OffsetDist":
        return cls("normal", sigma)

    def variance(self) -> float:
        if self.kind == "delta":
            return 0.0
        if self.kind == "uniform":
            return self.param**2 / 3.0
        return self.param**2


@dataclass(frozen=True)
class OscillatorSpec:
    """Parameters of one oscillator: nominal frequency, offset distribution,
    diffusion rate of the phase random walk, initial phase."""

    f_c: float
    offset_dist: OffsetDist = field(default_factory=OffsetDist.delta)
    beta: float = 0.0
    theta0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.f_c) and self.f_c > 0):
            raise ParameterError("f_c must be finite and > 0")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ParameterError("beta must be finite and >= 0")
        # initial phase stored wrapped to [0, 2*pi); mod can round up to 2*pi
        wrapped = float(np.mod(self.theta0, TWO_PI))
        if wrapped >= TWO_PI:
            wrapped = 0.0
        object.__setattr__(self, "theta0", wrapped)


@dataclass(frozen=True)
class PhasePath:
    """One uniformly sampled phase realization, stored unwrapped (radians)."""

    dt: float
    samples: np.ndarray
    seed_id: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ParameterError("dt must be finite and > 0")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError("samples must be a non-empty 1-d array")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def wrapped(self) -> np.ndarray:
        return np.mod(self.samples, TWO_PI)

    def phase_shift(self) -> np.ndarray:
        """Unit-modulus complex representation exp(j*theta)."""
        return np.exp(1j * self.samples)


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real signal."""

    fs: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise ParameterError("fs must be finite and > 0")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs


def wiener_path(beta: float, theta0: float, dt: float, n: int,
                seed_id: Tuple[int, int]) -> PhasePath:
    """Sample a phase random walk with diffusion rate beta.

    Increments between consecutive samples are i.i.d. zero-mean Gaussian
    with variance 2*pi*beta*dt, which is exact for this process at any
    step size. samples[0] equals theta0 (unwrapped).
    """
    if not (np.isfinite(beta) and beta >= 0):
        raise ParameterError("beta must be finite and >= 0")
    if not (np.isfinite(dt) and dt > 0):
        raise ParameterError("dt must be finite and > 0")
    if n < 1:
        raise ParameterError("n must be >= 1")
    theta = np.empty(n, dtype=float)
    theta[0] = theta0
    if n > 1:
        if beta == 0.0:
            theta[1:] = theta0
        else:
            rng = path_rng(seed_id, _STREAM_PHASE)
            incr = rng.normal(0.0, np.sqrt(TWO_PI * beta * dt), size=n - 1)
            theta[1:] = theta0 + np.cumsum(incr)
    return PhasePath(dt=dt, samples=theta, seed_id=seed_id)


def sample_offset(offset_dist: OffsetDist, seed_id: Tuple[int, int]) -> float:
    """Draw one frequency offset (Hz) from the given distribution."""
    if offset_dist.kind == "delta":
        return float(offset_dist.param)
    rng = path_rng(seed_id, _STREAM_OFFSET)
    if offset_dist.kind == "uniform":
        return float(rng.uniform(-offset_dist.param, offset_dist.param))
    return float(rng.normal(0.0, offset_dist.param))


def oscillator_waveform(spec: OscillatorSpec, f_i: float, phase: PhasePath,
                        fs: float, n: int) -> Waveform:
    """Sampled oscillator output cos(2*pi*(f_c + f_i)*t + theta_t).

    Requires fs >= 8*(f_c + |f_i|) so downstream mixing products near
    4*f_c remain representable.
    """
    f_inst = spec.f_c + abs(f_i)
    min_fs = 8.0 * f_inst
    if fs < min_fs:
        raise SamplingError(
            f"fs={fs:g} Hz too low for carrier {f_inst:g} Hz; need fs >= {min_fs:g}")
    if len(phase) < n:
        raise ParameterError("phase path shorter than requested waveform")
    if not np.isclose(phase.dt, 1.0 / fs, rtol=1e-9):
        raise ParameterError("phase path dt inconsistent with fs")
    k = np.arange(n)
    samples = np.cos(TWO_PI * (spec.f_c + f_i) * k / fs + phase.samples[:n])
    return Waveform(fs=fs, samples=samples)


def wiener_ensemble(beta: float, theta0: float, dt: float, n: int,
                    master_seed: int, n_paths: int,
                    first_index: int = 0) -> np.ndarray:
    """Stack of n_paths independent walks, shape (n_paths, n)."""
    out = np.empty((n_paths, n), dtype=float)
    for i in range(n_paths):
        out[i] = wiener_path(beta, theta0, dt, n, (master_seed, first_index + i)).samples
    return out


def phase_shift_autocorr_mc(paths: Sequence[PhasePath] | np.ndarray, tau: float,
                            dt: Optional[float] = None) -> complex:
    """Ensemble-and-time averaged E[u_t * conj(u_{t+tau})] with u = exp(j*theta).

    `paths` is either a sequence of PhasePath (sharing dt) or a 2-d array of
    phase samples with `dt` given. tau must be a multiple of dt within the
    path length.
    """
    if isinstance(paths, np.ndarray):
        if dt is None:
            raise ParameterError("dt required when passing a raw array")
        theta = paths
    else:
        if not paths:
            raise ParameterError("empty ensemble")
        dt = paths[0].dt
        theta = np.stack([p.samples for p in paths])
    lag = tau / dt
    lag_i = int(round(lag))
    if not np.isclose(lag, lag_i, atol=1e-6):
        raise ParameterError(f"tau={tau:g} is not a multiple of dt={dt:g}")
    n = theta.shape[1]
    if lag_i < 0 or lag_i >= n:
        raise IndexError(f"lag {lag_i} outside path length {n}")
    u = np.exp(1j * theta)
    if lag_i == 0:
        return complex(1.0)
    prod = u[:, :-lag_i] * np.conj(u[:, lag_i:])
    return complex(prod.mean())

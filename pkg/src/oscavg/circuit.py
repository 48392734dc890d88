"""Oscillator-averaging circuits: mixers, ideal filters, divider loops.

Each circuit exists in two interoperable modes. The symbolic mode applies
the steady-state solution directly to phase paths (`steady_state_average`,
`divider_steady_state`). The waveform mode builds the sampled signal chain
(mix, filter, divider resolved at its fixed point) and is checked against
the symbolic mode through the demodulation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from .stochastic import (
    TWO_PI,
    OscillatorSpec,
    ParameterError,
    PhasePath,
    SamplingError,
    Waveform,
    oscillator_waveform,
    sample_offset,
    wiener_path,
)


class ShapeError(ValueError):
    """Incompatible waveform lengths or sample rates."""


class ConfigurationError(ValueError):
    """Circuit configuration (cutoffs, delays) inconsistent with the inputs."""


# ---------------------------------------------------------------------------
# elementary blocks


def mix(a: Waveform, b: Waveform) -> Waveform:
    """Pointwise product of two waveforms (ideal mixer)."""
    if a.fs != b.fs:
        raise ShapeError(f"sample rates differ: {a.fs:g} vs {b.fs:g}")
    if len(a) != len(b):
        raise ShapeError(f"lengths differ: {len(a)} vs {len(b)}")
    return Waveform(fs=a.fs, samples=a.samples * b.samples, t0=a.t0)


def ideal_filter(w: Waveform, kind: str, f_cut: float, mode: str = "brickwall",
                 numtaps: int = 1025) -> Waveform:
    """High- or low-pass filter.

    mode="brickwall": zero-phase frequency-domain mask (1 in the passband,
    0 outside). mode="fir": linear-phase windowed-sinc (Blackman-Harris
    window); the group delay of (numtaps-1)/2 samples is compensated so the
    output is time-aligned, with edge regions of numtaps//2 samples invalid.
    """
    if kind not in ("highpass", "lowpass"):
        raise ParameterError(f"unknown filter kind {kind!r}")
    if not (0 < f_cut < w.fs / 2):
        raise ParameterError(f"f_cut={f_cut:g} must lie in (0, fs/2={w.fs / 2:g})")
    if mode == "brickwall":
        spec = np.fft.rfft(w.samples)
        freqs = np.fft.rfftfreq(len(w), d=1.0 / w.fs)
        if kind == "lowpass":
            mask = freqs <= f_cut
        else:
            mask = freqs >= f_cut
        out = np.fft.irfft(spec * mask, n=len(w))
        return Waveform(fs=w.fs, samples=out, t0=w.t0)
    if mode == "fir":
        if numtaps % 2 == 0:
            numtaps += 1
        taps = sps.firwin(numtaps, f_cut, fs=w.fs, window="blackmanharris",
                          pass_zero=(kind == "lowpass"))
        out = np.convolve(w.samples, taps, mode="same")  # 'same' centers: delay compensated
        return Waveform(fs=w.fs, samples=out, t0=w.t0)
    raise ParameterError(f"unknown filter mode {mode!r}")


def delay_block(w: Waveform, delta: float) -> Waveform:
    """Delay by an integer number of samples, zero-padded at the start."""
    lag = delta * w.fs
    lag_i = int(round(lag))
    if not math.isclose(lag, lag_i, abs_tol=1e-6):
        raise ParameterError(f"delay {delta:g} s is not a multiple of 1/fs")
    out = np.zeros(len(w))
    if lag_i < len(w):
        out[lag_i:] = w.samples[: len(w) - lag_i]
    return Waveform(fs=w.fs, samples=out, t0=w.t0)


def demodulate_phase(w: Waveform, f0: float, f_cut: Optional[float] = None
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Instantaneous phase measurement: complex downconversion at f0 plus a
    brick-wall lowpass.

    Returns (phase_deviation, amplitude): phase_deviation[k] is the unwrapped
    phase of the signal relative to the 2*pi*f0*t ramp, amplitude[k] the
    envelope. A measurement device for tests and oracles, not a circuit block.
    Edge samples carry spectral-leakage error; callers should trim.
    """
    if f_cut is None:
        f_cut = f0 / 2.0
    if not (0 < f_cut < w.fs / 2):
        raise ParameterError("demodulation cutoff outside (0, fs/2)")
    k = np.arange(len(w))
    z = w.samples * np.exp(-1j * TWO_PI * f0 * k / w.fs)
    spec = np.fft.fft(z)
    freqs = np.fft.fftfreq(len(w), d=1.0 / w.fs)
    spec[np.abs(freqs) > f_cut] = 0.0
    base = np.fft.ifft(spec)
    return np.unwrap(np.angle(base)), 2.0 * np.abs(base)


def edge_trim(fs: float, f_cut: float, numtaps: int = 0) -> int:
    """Samples to drop at each end before comparing filtered signals."""
    return int(max(numtaps, 4.0 / f_cut * fs))


# ---------------------------------------------------------------------------
# steady-state (symbolic) mode


@dataclass(frozen=True)
class SteadyStateResult:
    """Fixed-point solution of an averaging loop."""

    omega_prime: float
    phase_path_prime: PhasePath
    amplitude: float


def steady_state_average(phases: Sequence[PhasePath], omegas: Sequence[float]
                         ) -> SteadyStateResult:
    """Fixed point of the n-oscillator averaging chain: the output frequency
    and phase path are the arithmetic means of the inputs; amplitude 1/2."""
    if len(phases) < 2:
        raise ParameterError("need at least 2 oscillators")
    if len(phases) != len(omegas):
        raise ShapeError("phases and omegas length mismatch")
    dt = phases[0].dt
    n = len(phases[0])
    for p in phases[1:]:
        if p.dt != dt or len(p) != n:
            raise ShapeError("phase paths must share dt and length")
    mean_phase = np.mean(np.stack([p.samples for p in phases]), axis=0)
    return SteadyStateResult(
        omega_prime=float(np.mean(omegas)),
        phase_path_prime=PhasePath(dt=dt, samples=mean_phase),
        amplitude=0.5,
    )


def divider_steady_state(omega_in: float, phase_in: PhasePath, n: int
                         ) -> SteadyStateResult:
    """Fixed point of the regenerative n-divider: frequency and phase scale
    by exactly 1/n."""
    if n < 2:
        raise ParameterError("divider ratio must be >= 2")
    return SteadyStateResult(
        omega_prime=omega_in / n,
        phase_path_prime=PhasePath(dt=phase_in.dt, samples=phase_in.samples / n,
                                   seed_id=phase_in.seed_id),
        amplitude=0.5,
    )


def steady_state_residual(omega_prime: float, phase_prime: np.ndarray,
                          omega_sum: float, phase_sum: np.ndarray,
                          dt: float) -> float:
    """Max per-sample residual of the divider fixed-point equation
    w'*t + p'_t = (w_sum - w')*t + (p_sum_t - p'_t)."""
    t = np.arange(phase_prime.size) * dt
    lhs = omega_prime * t + phase_prime
    rhs = (omega_sum - omega_prime) * t + (phase_sum - phase_prime)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# waveform-mode simulations


@dataclass(frozen=True)
class SimulationResult:
    """Waveform-mode circuit output plus the symbolic-mode prediction."""

    output: Waveform
    expected: SteadyStateResult
    phases: Tuple[PhasePath, ...]
    omegas: Tuple[float, ...]
    residual: float
    measured_total_phase: Optional[np.ndarray] = None
    prefilter: Optional[Waveform] = None


def _draw_oscillator(spec: OscillatorSpec, fs: float, n: int,
                     seed_id: Tuple[int, int]) -> Tuple[Waveform, PhasePath, float]:
    f_i = sample_offset(spec.offset_dist, seed_id)
    path = wiener_path(spec.beta, spec.theta0, 1.0 / fs, n, seed_id)
    wave = oscillator_waveform(spec, f_i, path, fs, n)
    return wave, path, TWO_PI * (spec.f_c + f_i)


def _check_rate(fs: float, f_top: float):
    if fs < 8.0 * f_top:
        raise SamplingError(f"fs={fs:g} too low; need >= {8.0 * f_top:g} "
                            f"to cover products near {f_top:g} Hz")


def simulate_pair_average(spec1: OscillatorSpec, spec2: OscillatorSpec, fs: float,
                          duration: float, seed: int,
                          filter_mode: str = "brickwall") -> SimulationResult:
    """Two-oscillator averaging chain: mix, highpass at f_c, regenerative
    2-divider resolved at its steady state. Output ~ (1/2)cos(w't + theta'_t)
    with w' and theta'_t the means of the inputs."""
    if spec1.f_c != spec2.f_c:
        raise ConfigurationError("oscillators must share the nominal frequency")
    f_c = spec1.f_c
    _check_rate(fs, 2.0 * f_c)
    n = int(round(duration * fs))
    if n < 16:
        raise ParameterError("duration too short")
    w1, p1, om1 = _draw_oscillator(spec1, fs, n, (seed, 0))
    w2, p2, om2 = _draw_oscillator(spec2, fs, n, (seed, 1))

    mixed = mix(w1, w2)
    # sum band near 2*f_c survives; difference band near f1-f2 is removed
    summed = ideal_filter(mixed, "highpass", f_c, mode=filter_mode)

    # regenerative divider at its fixed point: output phase is half the
    # measured sum-band phase
    dev, _amp = demodulate_phase(summed, 2.0 * f_c)
    k = np.arange(n)
    phase_sum_total = TWO_PI * 2.0 * f_c * k / fs + dev
    phase_out_total = 0.5 * phase_sum_total
    out = Waveform(fs=fs, samples=0.5 * np.cos(phase_out_total))

    # substitution check of the fixed point on the measured quantities
    residual = float(np.max(np.abs(phase_sum_total - 2.0 * phase_out_total)))

    expected = steady_state_average([p1, p2], [om1, om2])
    return SimulationResult(output=out, expected=expected, phases=(p1, p2),
                            omegas=(om1, om2), residual=residual,
                            measured_total_phase=phase_out_total)


def simulate_mixing_tree(specs: Sequence[OscillatorSpec], fs: float,
                         duration: float, seed: int,
                         filter_mode: str = "brickwall") -> SimulationResult:
    """Four-oscillator mixing stage: two pairwise mixers feeding a third,
    highpass at 3*f_c keeping the component near 4*f_c with phase equal to
    the sum of the input phases and amplitude 1/8."""
    if len(specs) != 4:
        raise ParameterError("mixing tree takes exactly 4 oscillators")
    f_c = specs[0].f_c
    if any(s.f_c != f_c for s in specs):
        raise ConfigurationError("oscillators must share the nominal frequency")
    _check_rate(fs, 4.0 * f_c)
    n = int(round(duration * fs))
    waves, paths, omegas = [], [], []
    for i, s in enumerate(specs):
        w, p, om = _draw_oscillator(s, fs, n, (seed, i))
        waves.append(w)
        paths.append(p)
        omegas.append(om)
    pre = mix(mix(waves[0], waves[1]), mix(waves[2], waves[3]))
    out = ideal_filter(pre, "highpass", 3.0 * f_c, mode=filter_mode)
    dev, _amp = demodulate_phase(out, 4.0 * f_c, f_cut=f_c)
    k = np.arange(n)
    measured = TWO_PI * 4.0 * f_c * k / fs + dev

    sum_phase = np.sum(np.stack([p.samples for p in paths]), axis=0)
    expected = SteadyStateResult(
        omega_prime=float(np.sum(omegas)),
        phase_path_prime=PhasePath(dt=1.0 / fs, samples=sum_phase),
        amplitude=0.125,
    )
    return SimulationResult(output=out, expected=expected, phases=tuple(paths),
                            omegas=tuple(omegas), residual=0.0,
                            measured_total_phase=measured, prefilter=pre)


def simulate_delayed_self_average(spec: OscillatorSpec, delta: float, fs: float,
                                  duration: float, seed: int,
                                  filter_mode: str = "brickwall") -> SimulationResult:
    """Average an oscillator with its own output delayed by delta: delay
    block, then the two-input averaging chain. Output phase is
    (theta_t + theta_{t-delta})/2.

    delta must be an integer number of samples; the first delta seconds of
    the output are start-up and excluded from the symbolic comparison window.
    """
    lag = delta * fs
    lag_i = int(round(lag))
    if not math.isclose(lag, lag_i, abs_tol=1e-6):
        raise ParameterError(f"delta={delta:g} s is not a multiple of 1/fs")
    f_c = spec.f_c
    _check_rate(fs, 2.0 * f_c)
    n = int(round(duration * fs))
    if lag_i >= n // 4:
        raise ParameterError("duration must be much longer than the delay")
    w, p, om = _draw_oscillator(spec, fs, n, (seed, 0))
    wd = delay_block(w, delta)

    mixed = mix(w, wd)
    summed = ideal_filter(mixed, "highpass", f_c, mode=filter_mode)
    dev, _amp = demodulate_phase(summed, 2.0 * f_c)
    k = np.arange(n)
    phase_sum_total = TWO_PI * 2.0 * f_c * k / fs + dev
    phase_out_total = 0.5 * phase_sum_total
    out = Waveform(fs=fs, samples=0.5 * np.cos(phase_out_total))
    residual = float(np.max(np.abs(phase_sum_total - 2.0 * phase_out_total)))

    # symbolic mode: delayed samples held at theta[0] before t = delta
    delayed = np.concatenate([np.full(lag_i, p.samples[0]), p.samples[: n - lag_i]]) \
        if lag_i > 0 else p.samples
    avg = 0.5 * (p.samples + delayed)
    expected = SteadyStateResult(
        omega_prime=om,
        phase_path_prime=PhasePath(dt=1.0 / fs, samples=avg),
        amplitude=0.5,
    )
    return SimulationResult(output=out, expected=expected, phases=(p,),
                            omegas=(om, om), residual=residual,
                            measured_total_phase=phase_out_total)


def averaged_phase_ensemble(beta: float, delta: float, dt: float, n: int,
                            master_seed: int, n_paths: int) -> np.ndarray:
    """Symbolic-mode ensemble of delayed self-averaged phases,
    shape (n_paths, n). Each row is (theta_t + theta_{t-delta})/2 sampled in
    the stationary region (the underlying walk is extended backwards by
    delta so no start-up transient appears)."""
    lag = delta / dt
    lag_i = int(round(lag))
    if not math.isclose(lag, lag_i, abs_tol=1e-6):
        raise ParameterError("delta must be a multiple of dt")
    total = n + lag_i
    out = np.empty((n_paths, n))
    for i in range(n_paths):
        theta = wiener_path(beta, 0.0, dt, total, (master_seed, i)).samples
        out[i] = 0.5 * (theta[lag_i:] + theta[:n])
    return out


# ---------------------------------------------------------------------------
# declarative block-graph description

_BLOCK_KINDS = {
    "mixer": (),
    "highpass": ("f_cut",),
    "lowpass": ("f_cut",),
    "amplifier": ("gain",),
    "delay": ("delta",),
    "freq_multiplier": ("factor",),
}


@dataclass(frozen=True)
class Block:
    name: str
    kind: str
    params: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.kind not in _BLOCK_KINDS:
            raise ParameterError(f"unknown block kind {self.kind!r}")
        expected = _BLOCK_KINDS[self.kind]
        got = tuple(k for k, _ in self.params)
        if got != expected:
            raise ParameterError(f"{self.kind} expects params {expected}, got {got}")


@dataclass(frozen=True)
class BlockGraph:
    """Declarative description of a circuit: sources, blocks, directed edges.

    Must be connected from every source to the single output; cycles are only
    allowed through a divider loop (mixer -> lowpass -> amplifier or
    freq_multiplier -> back to the mixer).
    """

    sources: Tuple[str, ...]
    blocks: Tuple[Block, ...]
    edges: Tuple[Tuple[str, str], ...]
    output: str

    def __post_init__(self):
        names = set(self.sources) | {b.name for b in self.blocks}
        if len(names) != len(self.sources) + len(self.blocks):
            raise ParameterError("duplicate node names")
        for a, b in self.edges:
            if a not in names or b not in names:
                raise ParameterError(f"edge ({a}, {b}) references unknown node")
        if self.output not in names:
            raise ParameterError("output references unknown node")
        self._check_connectivity()
        self._check_cycles()

    def _adjacency(self) -> Dict[str, List[str]]:
        adj: Dict[str, List[str]] = {}
        for a, b in self.edges:
            adj.setdefault(a, []).append(b)
        return adj

    def _check_connectivity(self):
        adj = self._adjacency()
        for src in self.sources:
            seen = {src}
            stack = [src]
            while stack:
                for nxt in adj.get(stack.pop(), []):
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            if self.output not in seen:
                raise ParameterError(f"source {src!r} not connected to the output")

    def _check_cycles(self):
        kinds = {b.name: b.kind for b in self.blocks}
        for src in self.sources:
            kinds[src] = "source"
        adj = self._adjacency()
        # DFS cycle extraction; every cycle must look like a divider loop
        color: Dict[str, int] = {}
        stack_path: List[str] = []

        def visit(node: str):
            color[node] = 1
            stack_path.append(node)
            for nxt in adj.get(node, []):
                if color.get(nxt, 0) == 1:
                    cycle = stack_path[stack_path.index(nxt):]
                    self._validate_loop([kinds[n] for n in cycle])
                elif color.get(nxt, 0) == 0:
                    visit(nxt)
            stack_path.pop()
            color[node] = 2

        for src in self.sources:
            if color.get(src, 0) == 0:
                visit(src)

    @staticmethod
    def _validate_loop(kinds_in_cycle: List[str]):
        ks = set(kinds_in_cycle)
        if "mixer" not in ks or "lowpass" not in ks:
            raise ParameterError("feedback cycles must run through a divider "
                                 "loop (mixer and lowpass)")
        allowed = {"mixer", "lowpass", "amplifier", "freq_multiplier"}
        if not ks <= allowed:
            raise ParameterError(f"blocks {ks - allowed} not allowed in a feedback loop")

    def to_text(self) -> str:
        lines = ["# blockgraph v1"]
        for s in self.sources:
            lines.append(f"source {s}")
        for b in self.blocks:
            params = " ".join(f"{k}={v:g}" for k, v in b.params)
            lines.append(f"block {b.name} {b.kind}" + (f" {params}" if params else ""))
        for a, b in self.edges:
            lines.append(f"edge {a} {b}")
        lines.append(f"output {self.output}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BlockGraph":
        sources: List[str] = []
        blocks: List[Block] = []
        edges: List[Tuple[str, str]] = []
        output = None
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "source" and len(parts) == 2:
                sources.append(parts[1])
            elif parts[0] == "block" and len(parts) >= 3:
                params = []
                for kv in parts[3:]:
                    key, _, val = kv.partition("=")
                    params.append((key, float(val)))
                blocks.append(Block(parts[1], parts[2], tuple(params)))
            elif parts[0] == "edge" and len(parts) == 3:
                edges.append((parts[1], parts[2]))
            elif parts[0] == "output" and len(parts) == 2:
                output = parts[1]
            else:
                raise ParameterError(f"cannot parse line {raw!r}")
        if output is None:
            raise ParameterError("missing output declaration")
        return cls(tuple(sources), tuple(blocks), tuple(edges), output)


def pair_average_graph(f_c: float) -> BlockGraph:
    """Graph of the two-oscillator averaging circuit."""
    return BlockGraph(
        sources=("osc1", "osc2"),
        blocks=(
            Block("m1", "mixer"),
            Block("hpf", "highpass", (("f_cut", f_c),)),
            Block("m2", "mixer"),
            Block("lpf", "lowpass", (("f_cut", 2.0 * f_c),)),
            Block("amp", "amplifier", (("gain", 4.0),)),
        ),
        edges=(("osc1", "m1"), ("osc2", "m1"), ("m1", "hpf"), ("hpf", "m2"),
               ("m2", "lpf"), ("lpf", "amp"), ("amp", "m2")),
        output="lpf",
    )


def mixing_tree_graph(f_c: float) -> BlockGraph:
    """Graph of the four-oscillator mixing stage."""
    return BlockGraph(
        sources=("osc1", "osc2", "osc3", "osc4"),
        blocks=(
            Block("m1", "mixer"),
            Block("m2", "mixer"),
            Block("m3", "mixer"),
            Block("hpf", "highpass", (("f_cut", 3.0 * f_c),)),
        ),
        edges=(("osc1", "m1"), ("osc2", "m1"), ("osc3", "m2"), ("osc4", "m2"),
               ("m1", "m3"), ("m2", "m3"), ("m3", "hpf")),
        output="hpf",
    )


def delayed_self_graph(f_c: float, delta: float) -> BlockGraph:
    """Graph of the delayed self-averaging circuit."""
    return BlockGraph(
        sources=("osc",),
        blocks=(
            Block("dly", "delay", (("delta", delta),)),
            Block("m1", "mixer"),
            Block("hpf", "highpass", (("f_cut", f_c),)),
            Block("m2", "mixer"),
            Block("lpf", "lowpass", (("f_cut", 2.0 * f_c),)),
            Block("amp", "amplifier", (("gain", 4.0),)),
        ),
        edges=(("osc", "dly"), ("osc", "m1"), ("dly", "m1"), ("m1", "hpf"),
               ("hpf", "m2"), ("m2", "lpf"), ("lpf", "amp"), ("amp", "m2")),
        output="lpf",
    )

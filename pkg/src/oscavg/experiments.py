"""Figure-data generation and the self-check battery behind the CLI.

Figure runs emit plot-ready two-column text tables (offset Hz vs dBc/Hz).
Each curve produces an analytic table `<name>.data` and a Welch-estimated
companion `<name>.est.data`. Absolute levels depend on the configured
diffusion rate; the shapes and relative separations are the reproducible
content.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import analytic, circuit, spectral, stochastic
from .analytic import DelayedAvgParams
from .config import ExperimentConfig
from .stochastic import TWO_PI, ParameterError

LOG_GRID = (1e3, 1e7, 200)   # offset range and point count of the log sweep
LIN_BAND = 2.5e6             # half-width of the linear sweep
LIN_POINTS = 501


def delta_tag(delta: float) -> str:
    """File-name tag for a delay value: 1e-06 -> '1em6'."""
    mant, exp = f"{delta:.6e}".split("e")
    mant = mant.rstrip("0").rstrip(".")
    exp_i = int(exp)
    mant = mant.replace(".", "p").replace("-", "m")
    sign = "m" if exp_i < 0 else "p"
    return f"{mant}e{sign}{abs(exp_i)}"


# ---------------------------------------------------------------------------
# analytic curves per scenario


def base_psd(beta: float, omega):
    """Two-sided PSD of the single-oscillator phase shift (transform of its
    exponential autocorrelation)."""
    return analytic.phase_shift_psd(beta, omega)


def independent_avg_psd(beta: float, omega):
    """PSD after averaging two independent oscillators: the averaged phase
    is a walk with half the diffusion rate."""
    return analytic.phase_shift_psd(beta / 2.0, omega)


def delayed_psd(beta: float, delta: float, omega):
    return analytic.delayed_avg_psd(DelayedAvgParams(beta, delta), omega)


# ---------------------------------------------------------------------------
# estimated curves (Welch over symbolic-mode phase ensembles)


def _estimate_psd(cfg: ExperimentConfig, dt: float,
                  phase_for_path: Callable[[int], np.ndarray],
                  ) -> spectral.SpectrumEstimate:
    """Accumulate per-path Welch estimates without holding the ensemble."""
    acc = None
    freqs = None
    n_seg = 0
    for i in range(cfg.n_paths):
        u = np.exp(1j * phase_for_path(i))
        est = spectral.welch_psd(u, fs=1.0 / dt, segment_len=cfg.segment_len,
                                 overlap=cfg.overlap, window=cfg.window)
        if acc is None:
            acc, freqs, n_seg = np.array(est.psd), est.freqs, est.n_segments
        else:
            acc += est.psd
    return spectral.SpectrumEstimate(freqs=freqs, psd=acc / cfg.n_paths,
                                     n_segments=n_seg * cfg.n_paths, fs=1.0 / dt)


def _path_len(cfg: ExperimentConfig) -> int:
    return 4 * cfg.segment_len


def estimate_base(cfg: ExperimentConfig, dt: float, seed_offset: int = 0
                  ) -> spectral.SpectrumEstimate:
    n = _path_len(cfg)

    def phase(i: int) -> np.ndarray:
        return stochastic.wiener_path(cfg.beta, 0.0, dt, n,
                                      (cfg.seed, seed_offset + i)).samples

    return _estimate_psd(cfg, dt, phase)


def estimate_independent(cfg: ExperimentConfig, dt: float, seed_offset: int = 10**6
                         ) -> spectral.SpectrumEstimate:
    n = _path_len(cfg)

    def phase(i: int) -> np.ndarray:
        a = stochastic.wiener_path(cfg.beta, 0.0, dt, n,
                                   (cfg.seed, seed_offset + 2 * i)).samples
        b = stochastic.wiener_path(cfg.beta, 0.0, dt, n,
                                   (cfg.seed, seed_offset + 2 * i + 1)).samples
        return 0.5 * (a + b)

    return _estimate_psd(cfg, dt, phase)


def estimate_delayed(cfg: ExperimentConfig, delta: float, dt: float,
                     seed_offset: int = 2 * 10**6) -> spectral.SpectrumEstimate:
    n = _path_len(cfg)
    lag = delta / dt
    lag_i = int(round(lag))
    if not math.isclose(lag, lag_i, abs_tol=1e-6):
        raise ParameterError(f"delta={delta:g} not a multiple of dt={dt:g}")

    def phase(i: int) -> np.ndarray:
        theta = stochastic.wiener_path(cfg.beta, 0.0, dt, n + lag_i,
                                       (cfg.seed, seed_offset + i)).samples
        return 0.5 * (theta[lag_i:] + theta[:n])

    return _estimate_psd(cfg, dt, phase)


# ---------------------------------------------------------------------------
# table output


def _write_table(path: Path, header: List[str], x: np.ndarray, y: np.ndarray):
    lines = [f"# {h}" for h in header]
    for xi, yi in zip(x, y):
        if not (np.isfinite(xi) and np.isfinite(yi)):
            raise ParameterError("non-finite value in output table")
        lines.append(f"{xi:.10e} {yi:.10e}")
    path.write_text("\n".join(lines) + "\n")


def _emit_curve(out: Path, name: str, cfg_hash: str, grid_hz: np.ndarray,
                analytic_vals: np.ndarray,
                est: Optional[spectral.SpectrumEstimate]) -> List[str]:
    written = []
    header = [f"oscavg table {name}", f"config {cfg_hash}",
              "columns: offset_hz psd_dbc_hz"]
    _write_table(out / f"{name}.data", header + ["kind analytic"],
                 grid_hz, analytic.to_dbc_hz(analytic_vals))
    written.append(f"{name}.data")
    if est is not None:
        vals = np.maximum(est.interp(grid_hz), np.finfo(float).tiny)
        _write_table(out / f"{name}.est.data", header + ["kind estimated"],
                     grid_hz, analytic.to_dbc_hz(vals))
        written.append(f"{name}.est.data")
    return written


def run_figure_log(cfg: ExperimentConfig, out_dir=None, estimates: bool = True
                   ) -> Dict[str, List[str]]:
    """Log-frequency PSD sweep: base oscillator, averaged independent pair,
    and one delayed-self curve per configured delay."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lo, hi, npts = LOG_GRID
    grid = np.logspace(np.log10(lo), np.log10(hi), npts)
    omega = TWO_PI * grid
    cfg_hash = cfg.content_hash()
    dt = 1.0 / (4.0 * hi)  # baseband rate covering the top plotted offset
    written: Dict[str, List[str]] = {}

    est = estimate_base(cfg, dt) if estimates else None
    written["base"] = _emit_curve(out, "psd_log_base", cfg_hash, grid,
                                  base_psd(cfg.beta, omega), est)

    est = estimate_independent(cfg, dt) if estimates else None
    written["independent"] = _emit_curve(out, "psd_log_ind", cfg_hash, grid,
                                         independent_avg_psd(cfg.beta, omega), est)

    for j, delta in enumerate(cfg.deltas):
        est = (estimate_delayed(cfg, delta, dt,
                                seed_offset=(2 + j) * 10**6) if estimates else None)
        name = f"psd_log_delta_{delta_tag(delta)}"
        written[f"delta_{delta_tag(delta)}"] = _emit_curve(
            out, name, cfg_hash, grid, delayed_psd(cfg.beta, delta, omega), est)
    return written


def find_notches(grid_hz: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Strict local minima of a curve, returned as their grid positions."""
    v = np.asarray(values)
    idx = np.nonzero((v[1:-1] < v[:-2]) & (v[1:-1] < v[2:]))[0] + 1
    return np.asarray(grid_hz)[idx]


def run_figure_linear(cfg: ExperimentConfig, out_dir=None, estimates: bool = True
                      ) -> Dict[str, List[str]]:
    """Linear-band PSD sweep over +-2.5 MHz with a notch-position sidecar."""
    if not cfg.deltas:
        raise ParameterError("linear figure requires at least one delay")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(-LIN_BAND, LIN_BAND, LIN_POINTS)
    omega = TWO_PI * grid
    cfg_hash = cfg.content_hash()
    dt = 1.0 / (4.0 * LIN_BAND * 2.0)
    written: Dict[str, List[str]] = {}

    est = estimate_base(cfg, dt) if estimates else None
    written["base"] = _emit_curve(out, "psd_lin_base", cfg_hash, grid,
                                  base_psd(cfg.beta, omega), est)
    est = estimate_independent(cfg, dt) if estimates else None
    written["independent"] = _emit_curve(out, "psd_lin_ind", cfg_hash, grid,
                                         independent_avg_psd(cfg.beta, omega), est)

    notch_summary = {}
    for j, delta in enumerate(cfg.deltas):
        vals = delayed_psd(cfg.beta, delta, omega)
        est = (estimate_delayed(cfg, delta, dt,
                                seed_offset=(2 + j) * 10**6) if estimates else None)
        name = f"psd_lin_delta_{delta_tag(delta)}"
        written[f"delta_{delta_tag(delta)}"] = _emit_curve(out, name, cfg_hash,
                                                          grid, vals, est)
        pos = grid > 0
        notches = find_notches(grid[pos], analytic.to_dbc_hz(vals[pos]))
        notch_summary[delta_tag(delta)] = {
            "delta_s": delta,
            "notch_offsets_hz": [float(x) for x in notches],
            "mean_spacing_hz": float(np.mean(np.diff(notches))) if len(notches) > 1 else None,
        }
    (out / "notches.json").write_text(
        json.dumps({"config": cfg_hash, "notches": notch_summary},
                   indent=2, sort_keys=True) + "\n")
    written["notches"] = ["notches.json"]
    return written


def run_simulate(cfg: ExperimentConfig, out_dir=None) -> List[str]:
    """Raw waveform dump of the configured circuit scenario."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = stochastic.OscillatorSpec(f_c=cfg.f_c_scaled, offset_dist=cfg.offsets,
                                     beta=cfg.beta)
    if cfg.scenario == "base":
        f_i = stochastic.sample_offset(cfg.offsets, (cfg.seed, 0))
        n = int(round(cfg.duration * cfg.fs))
        path = stochastic.wiener_path(cfg.beta, 0.0, 1.0 / cfg.fs, n, (cfg.seed, 0))
        wave = stochastic.oscillator_waveform(spec, f_i, path, cfg.fs, n)
    elif cfg.scenario == "averaged_independent":
        wave = circuit.simulate_pair_average(spec, spec, cfg.fs, cfg.duration,
                                             cfg.seed).output
    elif cfg.scenario == "averaged_n":
        if cfg.n_oscillators != 4:
            raise ParameterError("waveform mode supports n_oscillators=4")
        wave = circuit.simulate_mixing_tree([spec] * 4, cfg.fs, cfg.duration,
                                            cfg.seed).output
    else:
        wave = circuit.simulate_delayed_self_average(spec, cfg.delta, cfg.fs,
                                                     cfg.duration, cfg.seed).output
    path_out = out / f"waveform_{cfg.scenario}.data"
    _write_table(path_out, [f"oscavg waveform {cfg.scenario}",
                            f"config {cfg.content_hash()}",
                            "columns: time_s amplitude"],
                 wave.times(), wave.samples)
    return [path_out.name]


# ---------------------------------------------------------------------------
# acceptance battery (CLI-facing quick checks; the pytest suite runs the
# full-size versions)


def _rel_err(measured: float, target: float) -> float:
    return abs(measured - target) / abs(target)


def run_acceptance(cfg: ExperimentConfig, out_dir=None) -> Dict:
    """Run the property battery and write a machine-readable report.

    Returns the report dict; report['passed'] reflects overall status.
    """
    if cfg.beta <= 0:
        raise ParameterError("acceptance battery requires beta > 0")
    beta, seed = cfg.beta, cfg.seed
    checks: List[Dict] = []

    def record(name: str, measured: float, tolerance: float, ok: bool):
        checks.append({"name": name, "measured": float(measured),
                       "tolerance": float(tolerance), "passed": bool(ok),
                       "seed": seed})

    dt, n = 1e-6, 101
    ens = stochastic.wiener_ensemble(beta, 0.0, dt, n, seed, 2000)
    t = np.arange(n) * dt
    var = np.var(ens - ens[:, :1], axis=0)
    slope = np.polyfit(t[1:], var[1:], 1)[0]
    err = _rel_err(slope, TWO_PI * beta)
    record("wiener-variance-slope", err, 0.05, err < 0.05)

    lags = np.array([5, 10, 20])
    u = np.exp(1j * ens)
    ac = spectral.autocorr_per_path(u, lags.tolist())
    mean_ac = ac.real.mean(axis=0)
    target = np.exp(-np.pi * beta * lags * dt)
    err = float(np.max(np.abs(mean_ac - target)))
    record("phase-shift-autocorr", err, 0.02, err < 0.02)

    draws = np.array([stochastic.sample_offset(stochastic.OffsetDist.uniform(100.0),
                                               (seed, i)) for i in range(20000)])
    err = _rel_err(np.var(draws), 100.0**2 / 3.0)
    record("uniform-offset-variance", err, 0.05, err < 0.05)

    draws = np.array([stochastic.sample_offset(stochastic.OffsetDist.normal(50.0),
                                               (seed, i)) for i in range(20000)])
    err = _rel_err(np.std(draws), 50.0)
    record("normal-offset-std", err, 0.03, err < 0.03)

    ens2 = stochastic.wiener_ensemble(beta, 0.0, dt, n, seed + 1, 2000)
    avg = 0.5 * (ens + ens2)
    ratio = np.var(avg[:, -1] - avg[:, 0]) / np.var(ens[:, -1] - ens[:, 0])
    err = _rel_err(ratio, 0.5)
    record("pair-averaging-variance-halving", err, 0.10, err < 0.10)

    ens3 = stochastic.wiener_ensemble(beta, 0.0, dt, n, seed + 2, 2000)
    ens4 = stochastic.wiener_ensemble(beta, 0.0, dt, n, seed + 3, 2000)
    avg4 = 0.25 * (ens + ens2 + ens3 + ens4)
    ratio = np.var(avg4[:, -1] - avg4[:, 0]) / np.var(ens[:, -1] - ens[:, 0])
    err = _rel_err(ratio, 0.25)
    record("quad-averaging-variance-quartering", err, 0.10, err < 0.10)

    phase = stochastic.wiener_path(beta, 0.3, dt, 64, (seed, 7))
    div = circuit.divider_steady_state(TWO_PI * 4e9, phase, 4)
    chain = circuit.divider_steady_state(
        circuit.divider_steady_state(TWO_PI * 4e9, phase, 2).omega_prime,
        circuit.divider_steady_state(TWO_PI * 4e9, phase, 2).phase_path_prime, 2)
    err = float(np.max(np.abs(div.phase_path_prime.samples
                              - chain.phase_path_prime.samples)))
    record("divider-chaining-exact", err, 1e-12, err < 1e-12)

    p = DelayedAvgParams(beta, 1e-6)
    gap = abs(analytic.delayed_avg_autocorr(p, p.delta * (1 - 1e-12))
              - analytic.delayed_avg_autocorr(p, p.delta))
    record("delayed-autocorr-continuity", gap, 1e-9, gap < 1e-9)

    omegas = TWO_PI * np.array([1e3, 1e5, 1e6])
    worst = 0.0
    for om in omegas:
        closed = analytic.delayed_avg_psd(p, om)
        quad = analytic.psd_by_quadrature(
            lambda tau: analytic.delayed_avg_autocorr(p, tau), om,
            tail_rate=np.pi * beta, breakpoint=p.delta)
        worst = max(worst, _rel_err(quad, closed))
    record("delayed-psd-vs-quadrature", worst, 1e-3, worst < 1e-3)

    small = DelayedAvgParams(beta, 0.0)
    om = TWO_PI * 1e4
    err = _rel_err(analytic.delayed_avg_psd(small, om), base_psd(beta, om))
    record("delayed-psd-zero-delay-limit", err, 1e-9, err < 1e-9)

    large = DelayedAvgParams(beta, 100.0 / (np.pi * beta))
    err = _rel_err(analytic.delayed_avg_psd(large, om),
                   analytic.lorentzian_psd(beta, om))
    record("delayed-psd-large-delay-limit", err, 1e-6, err < 1e-6)

    xs = np.linspace(-100.0, 100.0, 20001)
    total = np.trapezoid(analytic.bates2_pdf(100.0, xs), xs)
    err = abs(total - 1.0)
    record("bates2-normalization", err, 1e-6, err < 1e-6)

    om_grid = TWO_PI * np.linspace(-1e7, 1e7, 400001)
    power = np.trapezoid(analytic.lorentzian_psd(beta, om_grid), om_grid) / TWO_PI
    err = abs(power - 1.0)
    record("lorentzian-unit-power", err, 1e-2, err < 1e-2)

    rng = stochastic.path_rng((seed, 99))
    white = rng.normal(size=2**16)
    est = spectral.welch_psd(white, fs=1e6, segment_len=1024)
    err = _rel_err(float(np.mean(est.psd)) * 1e6, float(np.var(white)) * 1.0)
    record("welch-white-normalization", err, 0.05, err < 0.05)

    k = np.arange(2**14)
    tone = np.exp(1j * TWO_PI * 0.1 * k)
    est = spectral.welch_psd(tone, fs=1.0, segment_len=1024)
    err = _rel_err(est.total_power(), 1.0)
    record("welch-tone-power", err, 0.02, err < 0.02)

    report = {
        "config": cfg.content_hash(),
        "seed": seed,
        "n_checks": len(checks),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    if out_dir is not None or cfg.output_dir:
        out = Path(out_dir if out_dir is not None else cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "acceptance_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report

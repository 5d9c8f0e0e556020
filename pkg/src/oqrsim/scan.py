"""Experiment drivers: parameter scans, single simulations, Magnus order studies."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .config import ConfigError, Grid, ScanConfig
from .integrate import NonConvergence
from .magnus import ORDERS, SUPPORTED_STATES, magnus_kernels, model_trajectory, truncated_propagator
from .observables import (
    OqrReport,
    OrientationTrace,
    PhaseReport,
    ThermalEnsemble,
    build_ensemble,
    oqr_amplitude,
    populations_and_phases,
    thermal_density,
    thermal_trace,
)
from .propagator import BasisSpec, TruncationLeak, auto_truncate, propagate
from .pulse import PulseParams, spectrum
from .rotor import RotLabel, boltzmann_weights, revival_time

NUMERICAL_ERRORS = (NonConvergence, TruncationLeak, np.linalg.LinAlgError, FloatingPointError)


def _check_model(cfg: ScanConfig):
    if cfg.model is None:
        return
    if cfg.thermal:
        raise ConfigError("Magnus models cover single |00>, |10>, |1+-1> starts, not thermal ensembles")
    if (cfg.initial.J, cfg.initial.M) not in SUPPORTED_STATES:
        raise ConfigError(f"Magnus models do not support the initial state {cfg.initial}")


def _trajectory(cfg: ScanConfig, label: RotLabel, p: PulseParams, t_eval=None):
    mol = cfg.molecule
    if cfg.model is not None:
        return model_trajectory(label, p, mol, cfg.model, cfg.standard_third_order)
    if cfg.J_max == "auto":
        basis = auto_truncate(label, p, mol, cfg.tol)
    else:
        basis = BasisSpec(label.M, cfg.J_max)
    return propagate(label, p, mol, basis, cfg.tol, t_eval=t_eval)


def build_ensemble_for(cfg: ScanConfig, p: PulseParams, t_eval=None) -> ThermalEnsemble:
    """Ensemble (thermal or single-state) for one pulse under cfg's model."""
    if cfg.thermal:
        table = boltzmann_weights(cfg.temperature, cfg.molecule, cfg.cutoff)
        return build_ensemble(table, lambda lab: _trajectory(cfg, lab, p, t_eval))
    return ThermalEnsemble.single(_trajectory(cfg, cfg.initial, p, t_eval))


def _nfev(e: ThermalEnsemble) -> int:
    seen = {id(m.trajectory): m.trajectory.stats.nfev for m in e.members}
    return sum(seen.values())


# -- scans ---------------------------------------------------------------


@dataclass(frozen=True)
class PointResult:
    E0: float
    delta1: float
    report: OqrReport | None
    phases: PhaseReport | None
    error: str | None = None
    nfev: int = 0

    @property
    def amplitude(self) -> float:
        return self.report.amplitude if self.report is not None else math.nan


def evaluate_point(cfg: ScanConfig, E0: float, delta1: float) -> PointResult:
    """A_OQR and final phases at one grid point; failures are captured."""
    try:
        p = cfg.pulse(E0, delta1)
        e = build_ensemble_for(cfg, p)
        rep = oqr_amplitude(e)
        lead = e.members[0].trajectory
        ph = populations_and_phases(lead.final, lead.end_time, cfg.molecule)
        return PointResult(E0, delta1, rep, ph, None, _nfev(e))
    except NUMERICAL_ERRORS + (ValueError,) as exc:
        return PointResult(E0, delta1, None, None, f"{type(exc).__name__}: {exc}")


def _eval_task(args):
    cfg, E0, d = args
    return evaluate_point(cfg, E0, d)


@dataclass
class ScanResult:
    E0: np.ndarray
    delta1: np.ndarray  # THz
    points: list  # row-major, E0 outer
    config: ScanConfig
    wall_time: float = 0.0
    kind: str = "scan"

    @property
    def amplitude(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.points]).reshape(len(self.E0), len(self.delta1))

    def point(self, i: int, j: int) -> PointResult:
        return self.points[i * len(self.delta1) + j]

    @property
    def errors(self) -> list:
        return [p for p in self.points if p.error is not None]

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "version": __version__,
            "config": self.config.document,
            "wall_time_s": self.wall_time,
            "solver": {"nfev": int(sum(p.nfev for p in self.points))},
            "grid": {"E0_count": len(self.E0), "delta1_count": len(self.delta1)},
            "failed_points": [{"E0": p.E0, "delta1_THz": p.delta1, "error": p.error} for p in self.errors],
        }

    def tables(self) -> dict:
        mat_rows = []
        for i, E0 in enumerate(self.E0):
            row = [float(E0)]
            for j in range(len(self.delta1)):
                pt = self.point(i, j)
                row.append("error" if pt.error else pt.amplitude)
            mat_rows.append(row)
        tables = {"aoqr": (["E0_V_per_m"] + [float(d) for d in self.delta1], mat_rows)}

        nJ = max((len(p.phases.populations) for p in self.points if p.phases is not None), default=0)
        Js = next((p.phases.Js for p in self.points if p.phases is not None), np.arange(nJ))
        header = (["E0", "delta1_THz", "A_OQR", "cos_max", "cos_min", "abs_cos_max", "t_max_ps", "t_min_ps"]
                  + [f"pop_J{J}" for J in Js] + [f"phi_J{J}" for J in Js[:-1]] + ["error"])
        rows = []
        for p in self.points:
            if p.error:
                rows.append([p.E0, p.delta1] + ["error"] * (len(header) - 3) + [p.error])
                continue
            r = p.report
            rows.append([p.E0, p.delta1, r.amplitude, r.max_value, r.min_value, r.abs_max, r.t_max, r.t_min]
                        + list(p.phases.populations) + list(p.phases.phases) + [""])
        tables["points"] = (header, rows)
        return tables


def run_scan(cfg: ScanConfig, threads: int | None = None) -> ScanResult:
    """Evaluate A_OQR on the (E0, delta1) grid.

    Points are statically assigned to workers and gathered into
    pre-indexed slots, so the result does not depend on ``threads``.
    """
    _check_model(cfg)
    threads = cfg.threads if threads is None else threads
    E0s = cfg.E0_grid.values
    ds = cfg.delta1_grid.values
    tasks = [(cfg, float(E0), float(d)) for E0 in E0s for d in ds]
    start = time.perf_counter()
    if threads <= 1 or len(tasks) == 1:
        points = [_eval_task(t) for t in tasks]
    else:
        slots = [None] * len(tasks)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunk = max(1, len(tasks) // (4 * threads))
            for k, res in enumerate(pool.map(_eval_task, tasks, chunksize=chunk)):
                slots[k] = res
        points = slots
    return ScanResult(E0s, ds, points, cfg, time.perf_counter() - start)


def run_sweep(cfg: ScanConfig, threads: int | None = None) -> ScanResult:
    """E0 sweep at the configured carrier frequency (one delta1 column)."""
    d = cfg.freq_THz - cfg.f0_THz
    res = run_scan(replace(cfg, delta1_grid=Grid(d, d, 1)), threads)
    res.kind = "sweep"
    return res


# -- single simulation ---------------------------------------------------


@dataclass
class SimulationResult:
    trace: OrientationTrace
    density_times: np.ndarray
    theta: np.ndarray
    density: np.ndarray  # (len(density_times), len(theta))
    report: OqrReport
    phases: list  # (RotLabel, PhaseReport) per distinct member
    ensemble: ThermalEnsemble = field(repr=False)
    config: ScanConfig = field(repr=False)
    wall_time: float = 0.0

    def metadata(self) -> dict:
        r = self.report
        return {
            "kind": "simulate",
            "version": __version__,
            "config": self.config.document,
            "wall_time_s": self.wall_time,
            "solver": {"nfev": _nfev(self.ensemble)},
            "pulse_duration_ps": self.ensemble.pulse.T,
            "revival_time_ps": revival_time(self.config.molecule),
            "oqr": {"cos_max": r.max_value, "cos_min": r.min_value, "A_OQR": r.amplitude,
                    "t_max_ps": r.t_max, "t_min_ps": r.t_min, "abs_cos_max": r.abs_max},
        }

    def tables(self) -> dict:
        tables = {"trace": (["t_ps", "cos_theta"], [[float(t), float(v)] for t, v in
                                                     zip(self.trace.times, self.trace.values)])}
        rows = []
        for i, t in enumerate(self.density_times):
            for j, th in enumerate(self.theta):
                rows.append([float(t), float(th), float(self.density[i, j])])
        tables["density"] = (["t_ps", "theta_rad", "density"], rows)
        nJ = max(len(ph.populations) for _, ph in self.phases)
        header = ["J0", "M", "E0"] + [f"pop_{k}" for k in range(nJ)] + [f"phi_{k}" for k in range(nJ - 1)]
        prow = []
        for lab, ph in self.phases:
            pops = list(ph.populations) + [""] * (nJ - len(ph.populations))
            phis = list(ph.phases) + [""] * (nJ - 1 - len(ph.phases))
            prow.append([lab.J, lab.M, self.ensemble.pulse.E0] + pops + phis)
        tables["phases"] = (header, prow)
        return tables


def run_simulate(cfg: ScanConfig) -> SimulationResult:
    """Trace over [0, T + revivals * tau], density map, OQR report, phases."""
    _check_model(cfg)
    start = time.perf_counter()
    p = cfg.pulse()
    tau = revival_time(cfg.molecule)
    t_end = p.T + cfg.revivals * tau
    times = np.linspace(0.0, t_end, cfg.n_times)
    d_times = np.linspace(0.0, t_end, cfg.density_times)
    if cfg.model is None:
        inside = np.unique(np.concatenate([times[times < p.T], d_times[d_times < p.T]]))
        e = build_ensemble_for(cfg, p, t_eval=inside)
    else:
        # Magnus models only provide the post-pulse state
        e = build_ensemble_for(cfg, p)
        times = times[times >= p.T]
        d_times = d_times[d_times >= p.T]
    trace = thermal_trace(e, times)
    theta = np.linspace(0.0, math.pi, cfg.n_theta)
    dens = np.array([thermal_density(e, t, theta) for t in d_times]).reshape(len(d_times), len(theta))
    report = oqr_amplitude(e)
    phases = []
    seen = set()
    for m in e.members:
        key = (m.initial.J, abs(m.initial.M))
        if key in seen:
            continue
        seen.add(key)
        tr = m.trajectory
        phases.append((RotLabel(*key), populations_and_phases(tr.final, tr.end_time, cfg.molecule)))
    return SimulationResult(trace, d_times, theta, dens, report, phases, e, cfg,
                            time.perf_counter() - start)


# -- Magnus order study --------------------------------------------------

ORDER_TAGS = {"1": (1,), "2": (2,), "3": (3,), "1+2+3": (1, 2, 3)}


@dataclass
class MagnusOrdersResult:
    times: np.ndarray
    time_pops: dict  # tag -> (n_times, 3)
    E0: np.ndarray
    final_pops: dict  # tag -> (len(E0), 3)
    config: ScanConfig = field(repr=False)
    wall_time: float = 0.0

    def metadata(self) -> dict:
        return {"kind": "magnus-orders", "version": __version__, "config": self.config.document,
                "wall_time_s": self.wall_time, "E0_time_resolved": self.config.E0}

    def tables(self) -> dict:
        rows = []
        for tag in ORDER_TAGS:
            for t, pops in zip(self.times, self.time_pops[tag]):
                rows.append([float(t), tag] + [float(x) for x in pops])
        frows = []
        for tag in ORDER_TAGS:
            for E0, pops in zip(self.E0, self.final_pops[tag]):
                frows.append([float(E0), tag] + [float(x) for x in pops])
        return {
            "magnus_orders": (["t_ps", "order_tag", "pop_J0", "pop_J1", "pop_J2"], rows),
            "magnus_orders_final": (["E0", "order_tag", "pop_J0", "pop_J1", "pop_J2"], frows),
        }


def order_populations(p: PulseParams, cfg: ScanConfig, label: RotLabel, times) -> dict:
    """Block populations under each single order and their union at ``times``."""
    ks = magnus_kernels(p, cfg.molecule, label.M, times, cfg.standard_third_order)
    e = np.zeros(3, dtype=complex)
    e[label.J] = 1.0
    out = {}
    for tag, orders in ORDER_TAGS.items():
        out[tag] = np.array([np.abs(truncated_propagator(orders, k) @ e) ** 2 for k in ks])
    return out


def run_magnus_orders(cfg: ScanConfig) -> MagnusOrdersResult:
    if cfg.thermal or (cfg.initial.J, cfg.initial.M) not in SUPPORTED_STATES:
        raise ConfigError("magnus-orders needs a single |00>, |10> or |1+-1> initial state")
    start = time.perf_counter()
    label = cfg.initial
    p = cfg.pulse()
    times = np.linspace(0.0, p.T, cfg.n_times)
    time_pops = order_populations(p, cfg, label, times)
    E0s = cfg.E0_grid.values
    final = {tag: np.zeros((len(E0s), 3)) for tag in ORDER_TAGS}
    for i, E0 in enumerate(E0s):
        pops = order_populations(p.with_E0(float(E0)), cfg, label, [p.T])
        for tag in ORDER_TAGS:
            final[tag][i] = pops[tag][0]
    return MagnusOrdersResult(times, time_pops, E0s, final, cfg, time.perf_counter() - start)


# -- spectrum ------------------------------------------------------------


@dataclass
class SpectrumResult:
    freq_THz: np.ndarray
    amplitude: np.ndarray  # complex, V/m * ps
    config: ScanConfig = field(repr=False)

    def metadata(self) -> dict:
        return {"kind": "spectrum", "version": __version__, "config": self.config.document}

    def tables(self) -> dict:
        rows = [[float(f), float(abs(a))] for f, a in zip(self.freq_THz, self.amplitude)]
        return {"spectrum": (["omega_THz", "abs_A"], rows)}


def run_spectrum(cfg: ScanConfig) -> SpectrumResult:
    p = cfg.pulse()
    omega = np.linspace(0.0, cfg.spectrum_max_ratio * p.omega_c, cfg.spectrum_count)
    return SpectrumResult(omega / (2 * math.pi), spectrum(p, omega), cfg)


__all__ = [
    "ORDERS",
    "PointResult",
    "ScanResult",
    "SimulationResult",
    "MagnusOrdersResult",
    "SpectrumResult",
    "evaluate_point",
    "run_scan",
    "run_sweep",
    "run_simulate",
    "run_magnus_orders",
    "run_spectrum",
    "build_ensemble_for",
]

"""Experiment configuration: YAML document plus ``key.path=value`` overrides."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .constants import UnitSystem
from .pulse import PulseParams
from .rotor import MoleculeSpec, RotLabel, molecule


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "molecule": "HCN",
    "initial": {"mode": "single", "state": [0, 0], "temperature_K": 2.0, "cutoff": 1e-6},
    "pulse": {"E0_V_per_m": 7.0e6, "freq_THz": None, "phi_c_rad": math.pi / 2},
    "grid": {
        "E0_min": 1.0e5, "E0_max": 8.0e6, "E0_count": 40,
        "delta1_min_THz": -0.018, "delta1_max_THz": 0.018, "delta1_count": 40,
    },
    "model": "exact",
    "magnus": {"standard_third_order": False},
    "basis": {"J_max": 10},
    "solver": {"tol": 1e-10},
    "simulate": {"revivals": 2, "n_times": 2001, "n_theta": 181, "density_times": 401},
    "spectrum": {"max_ratio": 3.0, "count": 301},
    "output": {"dir": "out", "format": "csv", "plot_scripts": True},
    "threads": 1,
}

FULL_RESOLUTION = 100


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def set_path(doc: dict, dotted: str, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override must look like key.path=value, got {text!r}")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def load(path=None, overrides=()) -> dict:
    doc = {}
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    doc = _merge(DEFAULTS, doc)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        set_path(doc, key, value)
    return doc


@dataclass(frozen=True)
class Grid:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ConfigError(f"grid count must be a positive integer, got {self.count}")
        if self.max < self.min:
            raise ConfigError(f"grid max {self.max} below min {self.min}")

    @property
    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.min)])
        return np.linspace(self.min, self.max, int(self.count))


def parse_model(model) -> frozenset | None:
    """'exact' -> None; 'magnus:1,2,3' or [1, 2, 3] -> frozenset of orders."""
    if isinstance(model, str):
        text = model.strip().lower()
        if text == "exact":
            return None
        if text.startswith("magnus:"):
            try:
                orders = [int(x) for x in text[len("magnus:"):].split(",") if x.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad model selector {model!r}") from exc
        else:
            raise ConfigError(f"model must be 'exact' or 'magnus:<orders>', got {model!r}")
    else:
        orders = list(model)
    if not orders or any(n not in (1, 2, 3) for n in orders):
        raise ConfigError(f"Magnus orders must be a non-empty subset of {{1, 2, 3}}, got {model!r}")
    return frozenset(orders)


@dataclass(frozen=True)
class ScanConfig:
    """Validated, resolved experiment settings."""

    molecule: MoleculeSpec
    initial: RotLabel | None  # None selects the thermal ensemble
    temperature: float
    cutoff: float
    E0: float
    freq_THz: float  # carrier frequency of the single-point pulse
    phi_c: float
    E0_grid: Grid
    delta1_grid: Grid  # THz, ordinary frequency
    model: frozenset | None
    standard_third_order: bool
    J_max: int | str
    tol: float
    out_dir: str
    fmt: str
    plot_scripts: bool
    threads: int
    revivals: int
    n_times: int
    n_theta: int
    density_times: int
    spectrum_max_ratio: float
    spectrum_count: int
    document: dict  # the resolved document, echoed into metadata

    @property
    def thermal(self) -> bool:
        return self.initial is None

    @property
    def f0_THz(self) -> float:
        return UnitSystem.to_thz(self.molecule.omega0)

    def pulse(self, E0: float | None = None, delta1_THz: float | None = None) -> PulseParams:
        f = self.freq_THz if delta1_THz is None else self.f0_THz + delta1_THz
        return PulseParams.from_lab(self.E0 if E0 is None else E0, f, self.phi_c)


def _molecule(spec) -> MoleculeSpec:
    if isinstance(spec, str):
        try:
            return molecule(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    if isinstance(spec, dict):
        try:
            return MoleculeSpec.from_lab(float(spec["B_cm"]), float(spec["mu_debye"]), spec.get("name", "custom"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"molecule needs B_cm and mu_debye: {exc}") from exc
    raise ConfigError(f"bad molecule entry {spec!r}")


def resolve(doc: dict) -> ScanConfig:
    """Turn a loaded document into a ScanConfig, raising ConfigError on any problem."""
    try:
        mol = _molecule(doc["molecule"])
        ini = doc["initial"]
        mode = ini.get("mode", "single")
        if mode == "single":
            J, M = ini["state"]
            initial = RotLabel(int(J), int(M))
        elif mode == "thermal":
            initial = None
        else:
            raise ConfigError(f"initial.mode must be 'single' or 'thermal', got {mode!r}")
        temperature = float(ini.get("temperature_K", 2.0))
        cutoff = float(ini.get("cutoff", 1e-6))
        if initial is None and not temperature > 0:
            raise ConfigError("initial.temperature_K must be positive")
        if not 0 < cutoff < 1:
            raise ConfigError("initial.cutoff must lie in (0, 1)")

        pl = doc["pulse"]
        f = pl.get("freq_THz")
        freq = UnitSystem.to_thz(mol.omega0) if f is None else float(f)
        if not freq > 0:
            raise ConfigError("pulse.freq_THz must be positive")
        E0 = float(pl["E0_V_per_m"])
        if E0 < 0:
            raise ConfigError("pulse.E0_V_per_m must be non-negative")
        phi_c = float(pl.get("phi_c_rad", math.pi / 2))

        g = doc["grid"]
        E0_grid = Grid(float(g["E0_min"]), float(g["E0_max"]), g["E0_count"])
        if E0_grid.min < 0:
            raise ConfigError("grid.E0_min must be non-negative")
        d_grid = Grid(float(g["delta1_min_THz"]), float(g["delta1_max_THz"]), g["delta1_count"])
        f0 = UnitSystem.to_thz(mol.omega0)
        if f0 + d_grid.min <= 0:
            raise ConfigError("grid.delta1_min_THz gives a non-positive carrier frequency")

        J_max = doc["basis"]["J_max"]
        if J_max != "auto":
            J_max = int(J_max)
            if initial is not None and J_max < max(abs(initial.M) + 2, initial.J):
                raise ConfigError(f"basis.J_max={J_max} too small for {initial}")
        tol = float(doc["solver"]["tol"])
        if not 0 < tol < 1:
            raise ConfigError("solver.tol must lie in (0, 1)")
        fmt = doc["output"].get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"output.format must be csv or json, got {fmt!r}")
        threads = int(doc.get("threads", 1))
        if threads < 1:
            raise ConfigError("threads must be at least 1")
        sim = doc["simulate"]
        spec = doc["spectrum"]
        return ScanConfig(
            molecule=mol, initial=initial, temperature=temperature, cutoff=cutoff,
            E0=E0, freq_THz=freq, phi_c=phi_c, E0_grid=E0_grid, delta1_grid=d_grid,
            model=parse_model(doc.get("model", "exact")),
            standard_third_order=bool(doc["magnus"].get("standard_third_order", False)),
            J_max=J_max, tol=tol, out_dir=str(doc["output"].get("dir", "out")), fmt=fmt,
            plot_scripts=bool(doc["output"].get("plot_scripts", True)), threads=threads,
            revivals=int(sim["revivals"]), n_times=int(sim["n_times"]), n_theta=int(sim["n_theta"]),
            density_times=int(sim["density_times"]), spectrum_max_ratio=float(spec["max_ratio"]),
            spectrum_count=int(spec["count"]), document=copy.deepcopy(doc),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc

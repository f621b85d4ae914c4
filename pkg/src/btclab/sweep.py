"""Parameter sweeps over (N, omega/kappa) with CSV output and on-disk caching.

Each sweep cell computes only the requested tasks and is cached individually,
keyed by (N, omega/kappa, task, tolerance-hash), so changing a tolerance or
the finite-difference step invalidates exactly the affected entries.  Output
rows are sorted by (N, omega) and formatted to 12 significant digits, making
re-runs byte-identical.
"""

import hashlib
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from btclab.dicke import build_basis, spin_operator
from btclab.liouvillian import (
    ModelParams,
    build_liouvillian,
    dominant_decay_rate,
    expectation,
    steady_state,
)
from btclab.metrology import make_steady_fn, optimize_cfi, qfi_fidelity

__all__ = [
    "SweepConfig",
    "SweepRecord",
    "ConfigError",
    "run_sweep",
    "write_csv",
    "read_csv",
    "CSV_HEADER",
]

ALL_TASKS = ("magnetization", "qfi", "cfi", "spectrum")
CSV_HEADER = "n,omega_over_kappa,sz_ss_per_n,qfi,cfi_max,theta_opt,phi_opt,e2_abs"
CSV_FIELDS = CSV_HEADER.split(",")

DEFAULT_N_LIST = (6, 10, 20, 40, 80, 120, 160, 200)


class ConfigError(ValueError):
    """Invalid sweep configuration."""


@dataclass
class SweepConfig:
    n_list: tuple
    omega_grid: tuple
    kappa: float = 1.0
    tasks: tuple = ("magnetization",)
    delta_omega: float = 1e-3
    theta_points: int = 61
    phi_points: int = 31
    out_dir: str = "results"
    workers: int = 1
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_list = tuple(int(n) for n in self.n_list)
        self.omega_grid = tuple(float(w) for w in self.omega_grid)
        self.tasks = tuple(self.tasks)
        if not self.n_list:
            raise ConfigError("n_list must be nonempty")
        if not self.omega_grid:
            raise ConfigError("omega_grid must be nonempty")
        if any(n < 1 for n in self.n_list):
            raise ConfigError("all N must be >= 1")
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        unknown = set(self.tasks) - set(ALL_TASKS)
        if unknown:
            raise ConfigError(f"unknown tasks {sorted(unknown)}; valid: {ALL_TASKS}")
        if self.delta_omega <= 0:
            raise ConfigError("delta_omega must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_json(cls, path, **overrides):
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw.update({k: v for k, v in overrides.items() if v is not None})
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def tolerance_hash(self) -> str:
        payload = json.dumps(
            {
                "kappa": self.kappa,
                "delta_omega": self.delta_omega,
                "theta_points": self.theta_points,
                "phi_points": self.phi_points,
                "tolerances": self.tolerances,
            },
            sort_keys=True,
        )
        return hashlib.sha1(payload.encode()).hexdigest()[:10]

    @property
    def cache_dir(self) -> Path:
        return Path(self.out_dir) / "cache"


@dataclass
class SweepRecord:
    n_spins: int
    omega_over_kappa: float
    sz_ss_per_n: float = None
    qfi: float = None
    cfi_max: float = None
    theta_opt: float = None
    phi_opt: float = None
    e2_abs: float = None
    errors: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.errors)


def _cache_path(cache_dir: Path, n, omega, task, tolhash) -> Path:
    return cache_dir / f"{task}_N{n}_w{omega:.8f}_{tolhash}.npz"


def _cache_store(path: Path, payload: dict, config_meta: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{k: np.asarray(v) for k, v in payload.items()})
    sidecar = dict(config_meta)
    sidecar["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def _cache_load(path: Path):
    if not path.exists():
        return None
    with np.load(path) as data:
        return {k: float(data[k]) for k in data.files}


def _task_fields(task):
    return {
        "magnetization": ("sz_ss_per_n",),
        "qfi": ("qfi",),
        "cfi": ("cfi_max", "theta_opt", "phi_opt"),
        "spectrum": ("e2_abs",),
    }[task]


def compute_cell(n, omega, config: SweepConfig, force: bool = False) -> SweepRecord:
    """Compute (or load from cache) all requested tasks for one (N, omega)."""
    record = SweepRecord(n_spins=n, omega_over_kappa=omega / config.kappa)
    tolhash = config.tolerance_hash()
    meta = {
        "n": n,
        "omega_over_kappa": omega / config.kappa,
        "kappa": config.kappa,
        "delta_omega": config.delta_omega,
        "tolerances": config.tolerances,
        "solver": "sparse-lu/row-replacement",
    }
    state_cache: dict = {}
    steady_fn = make_steady_fn(n, config.kappa, cache=state_cache)
    params = ModelParams(omega, config.kappa, n)

    for task in config.tasks:
        path = _cache_path(config.cache_dir, n, omega, task, tolhash)
        if not force:
            cached = _cache_load(path)
            if cached is not None:
                for name in _task_fields(task):
                    setattr(record, name, cached[name])
                continue
        try:
            payload = {}
            if task == "magnetization":
                rho = steady_fn(omega)
                sz = spin_operator(build_basis(n), "z")
                payload["sz_ss_per_n"] = expectation(rho, sz) / n
            elif task == "qfi":
                result = qfi_fidelity(
                    params, delta_omega=config.delta_omega, steady_fn=steady_fn
                )
                payload["qfi"] = result.value
            elif task == "cfi":
                theta_grid = np.linspace(0.0, np.pi, config.theta_points)
                phi_grid = np.linspace(0.0, np.pi, config.phi_points)
                setting, result = optimize_cfi(
                    params,
                    theta_grid=theta_grid,
                    phi_grid=phi_grid,
                    delta_omega=config.delta_omega,
                    steady_fn=steady_fn,
                )
                payload["cfi_max"] = result.value
                payload["theta_opt"] = setting.theta
                payload["phi_opt"] = setting.phi
            elif task == "spectrum":
                rate = dominant_decay_rate(build_liouvillian(params))
                payload["e2_abs"] = rate.e2_abs
            for name, value in payload.items():
                setattr(record, name, float(value))
            _cache_store(path, payload, meta)
        except Exception as exc:  # per-task failure must not abort the sweep
            record.errors[task] = f"{type(exc).__name__}: {exc}"
    return record


def _job(args):
    n, omega, config_dict, force = args
    config = SweepConfig(**config_dict)
    try:
        return compute_cell(n, omega, config, force=force)
    except Exception:
        rec = SweepRecord(n_spins=n, omega_over_kappa=omega / config_dict["kappa"])
        rec.errors["cell"] = traceback.format_exc(limit=3)
        return rec


def run_sweep(config: SweepConfig, force: bool = False):
    """Run all (N, omega) cells, write sweep.csv, and return the records.

    Returns ``(records, n_failed)``; per-task failures are recorded in-row
    without aborting the sweep.
    """
    jobs = [
        (n, omega, asdict(config), force)
        for n in config.n_list
        for omega in config.omega_grid
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_job, jobs))
    else:
        records = [_job(args) for args in jobs]
    records.sort(key=lambda r: (r.n_spins, r.omega_over_kappa))
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", records)
    n_failed = sum(1 for r in records if r.failed)
    return records, n_failed


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    return f"{value:.12g}"


def write_csv(path, records):
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.n_spins),
                    _fmt(r.omega_over_kappa),
                    _fmt(r.sz_ss_per_n),
                    _fmt(r.qfi),
                    _fmt(r.cfi_max),
                    _fmt(r.theta_opt),
                    _fmt(r.phi_opt),
                    _fmt(r.e2_abs),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Read a sweep.csv back into SweepRecord objects."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        rec = SweepRecord(
            n_spins=int(cells[0]),
            omega_over_kappa=float(cells[1]),
        )
        for name, cell in zip(CSV_FIELDS[2:], cells[2:]):
            setattr(rec, name, float(cell) if cell else None)
        records.append(rec)
    return records

"""Mid-level recipes shared by the CLI: single-point runs, peak scans,
collapse fits, and the finite-time bound check.

File formats written here:
    trajectory_N{n}_w{omega}.csv   header ``t,sz_per_n``
    spectrum_N{n}_w{omega}.json    list of [re, im] pairs
    collapse_<kind>.json           collapse parameters, errors, quality
    fit_<model>.json               power-law parameters, errors, r^2
"""

import json
from pathlib import Path

import numpy as np

from btclab.dicke import build_basis, spin_operator
from btclab.liouvillian import (
    ModelParams,
    build_liouvillian,
    dominant_decay_rate,
    evolve,
    expectation,
    ground_state_down,
    maximally_mixed,
    spectrum,
)
from btclab.metrology import qfi_fidelity, qfi_rate_trajectory, qfi_time_bound
from btclab.scaling import (
    CollapseFit,
    ScalingDataset,
    find_peak,
    fit_collapse,
)
from btclab.sweep import SweepConfig, compute_cell

__all__ = [
    "initial_state",
    "run_trajectory",
    "run_spectrum",
    "envelope_decay_rate",
    "qfi_peak_scan",
    "dataset_from_records",
    "run_collapse",
    "run_bound_check",
    "fmt_tag",
]

INITIAL_STATES = ("down", "up", "mixed")


def fmt_tag(value: float) -> str:
    return f"{value:g}"


def initial_state(basis, which: str = "down"):
    """Named initial states for trajectory runs (default: all spins down)."""
    if which == "down":
        return ground_state_down(basis)
    if which == "up":
        rho = np.zeros((basis.dim, basis.dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    if which == "mixed":
        return maximally_mixed(basis)
    raise ValueError(f"unknown initial state {which!r}; expected one of {INITIAL_STATES}")


def run_trajectory(
    n, omega, kappa=1.0, t_max=10.0, points=201, initial="down", out_dir=None
):
    """Evolve <Sz>(t)/N and optionally persist it as a two-column CSV."""
    basis = build_basis(n)
    sup = build_liouvillian(ModelParams(omega, kappa, n))
    times = np.linspace(0.0, t_max, points)
    traj = evolve(sup, initial_state(basis, initial), times)
    sz = spin_operator(basis, "z")
    values = np.array([expectation(rho, sz) / n for rho in traj.states])
    if out_dir is not None:
        path = Path(out_dir) / f"trajectory_N{n}_w{fmt_tag(omega / kappa)}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["t,sz_per_n"]
        lines += [f"{t:.12g},{v:.12g}" for t, v in zip(times, values)]
        path.write_text("\n".join(lines) + "\n")
    return times, values


def run_spectrum(n, omega, kappa=1.0, k=9, out_dir=None):
    """Slowest k Liouvillian eigenvalues, optionally persisted as JSON."""
    sup = build_liouvillian(ModelParams(omega, kappa, n))
    spec = spectrum(sup, k)
    if out_dir is not None:
        path = Path(out_dir) / f"spectrum_N{n}_w{fmt_tag(omega / kappa)}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        pairs = [[float(e.real), float(e.imag)] for e in spec.eigenvalues]
        path.write_text(json.dumps(pairs, indent=1))
    return spec


def envelope_decay_rate(times, values, settle_fraction=0.1):
    """Decay rate of the oscillation envelope of <Sz>(t)/N.

    Takes the local extrema of the signal relative to its final value and
    fits log|amplitude| linearly in time; returns the positive decay rate.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    final = values[-1]
    dev = values - final
    start = int(settle_fraction * times.size)
    peaks_t, peaks_a = [], []
    for i in range(max(start, 1), times.size - 1):
        if abs(dev[i]) >= abs(dev[i - 1]) and abs(dev[i]) > abs(dev[i + 1]):
            peaks_t.append(times[i])
            peaks_a.append(abs(dev[i]))
    peaks_t, peaks_a = np.array(peaks_t), np.array(peaks_a)
    keep = peaks_a > 1e-12
    if keep.sum() < 3:
        raise ValueError("too few envelope extrema to fit a decay rate")
    slope = np.polyfit(peaks_t[keep], np.log(peaks_a[keep]), 1)[0]
    return -slope


def qfi_peak_scan(
    n,
    coarse_grid,
    kappa=1.0,
    delta_omega=1e-3,
    refine_points=21,
    config: SweepConfig | None = None,
    force=False,
):
    """QFI over a coarse omega grid plus a local refinement around the peak.

    Returns ``(omegas, qfi_values, peak)`` where peak is a PeakEstimate and
    the refinement adds ``refine_points`` samples within one coarse spacing of
    the grid maximum.  Cells are cached through the sweep layer when a config
    is supplied.
    """
    coarse_grid = np.asarray(coarse_grid, dtype=float)

    def qfi_at(omega):
        if config is not None:
            rec = compute_cell(n, omega, config, force=force)
            if rec.errors:
                raise RuntimeError(f"QFI cell failed: {rec.errors}")
            return rec.qfi
        params = ModelParams(omega, kappa, n)
        return qfi_fidelity(params, delta_omega=delta_omega).value

    values = np.array([qfi_at(w) for w in coarse_grid])
    i = int(np.argmax(values))
    lo = coarse_grid[max(i - 1, 0)]
    hi = coarse_grid[min(i + 1, coarse_grid.size - 1)]
    fine = np.linspace(lo, hi, refine_points)
    fine_values = np.array([qfi_at(w) for w in fine])
    omegas = np.concatenate([coarse_grid, fine])
    qfis = np.concatenate([values, fine_values])
    order = np.argsort(omegas)
    omegas, qfis = omegas[order], qfis[order]
    keep = np.concatenate([[True], np.diff(omegas) > 1e-12])
    omegas, qfis = omegas[keep], qfis[keep]
    peak = find_peak(omegas, qfis)
    return omegas, qfis, peak


def dataset_from_records(records, kind, x_window=None, dy_rel=0.005) -> ScalingDataset:
    """Build a ScalingDataset from sweep records of the given observable kind.

    Sweep records carry no scatter estimate, so each point is assigned a
    relative uncertainty ``dy_rel`` standing in for solver and
    finite-difference discretization error; it sets the scale of the
    collapse-quality statistic and of the quoted parameter uncertainties.
    """
    ns, xs, ys = [], [], []
    for rec in records:
        if kind == "magnetization":
            y = rec.sz_ss_per_n
            if y is None:
                continue
            y = abs(y) * rec.n_spins  # un-normalized |<Sz>|
        else:
            y = rec.qfi
            if y is None:
                continue
        if x_window is not None and not (x_window[0] <= rec.omega_over_kappa <= x_window[1]):
            continue
        ns.append(rec.n_spins)
        xs.append(rec.omega_over_kappa)
        ys.append(y)
    ys = np.array(ys)
    return ScalingDataset(
        n_spins=np.array(ns), x=np.array(xs), y=ys,
        dy=dy_rel * np.abs(ys), observable_kind=kind,
    )


DEFAULT_COLLAPSE_GUESS = {
    "magnetization": (1.0, 1.5, 0.5),
    "qfi": (1.0, 1.5, 2.0),
}


def run_collapse(dataset: ScalingDataset, initial_guess=None, out_dir=None) -> CollapseFit:
    """Fit the data collapse and optionally persist collapse_<kind>.json."""
    if initial_guess is None:
        initial_guess = DEFAULT_COLLAPSE_GUESS[dataset.observable_kind]
    fit = fit_collapse(dataset, initial_guess)
    if out_dir is not None:
        path = Path(out_dir) / f"collapse_{dataset.observable_kind}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        shape_name = "beta" if dataset.observable_kind == "magnetization" else "eta"
        path.write_text(
            json.dumps(
                {
                    "kind": dataset.observable_kind,
                    "omega_c": fit.omega_c,
                    "nu": fit.nu,
                    shape_name: fit.shape_exponent,
                    "quality": fit.quality,
                    "uncertainties": fit.uncertainties,
                    "converged": fit.converged,
                    "boundary_pinned": fit.boundary_pinned,
                },
                indent=2,
            )
        )
    return fit


def write_fit_json(fit, out_dir, model_name=None):
    name = model_name or fit.model
    path = Path(out_dir) / f"fit_{name}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(
            {
                "model": fit.model,
                "params": fit.params,
                "stderr": fit.stderr,
                "r_squared": fit.r_squared,
            },
            indent=2,
        )
    )
    return path


def run_bound_check(n, omega, kappa=1.0, delta_omega=1e-3, time_factor=2.0):
    """Finite-time QFI rate against the N/(2 kappa) bound at T = 2/|E2|.

    Returns a dict with the trajectory rate, the steady-state QFI divided by
    the same T, the bound, and the pass flag.
    """
    params = ModelParams(omega, kappa, n)
    sup = build_liouvillian(params)
    rate_info = dominant_decay_rate(sup)
    total_time = time_factor * rate_info.tau
    basis = build_basis(n)
    rate, satisfied = qfi_rate_trajectory(
        params, ground_state_down(basis), total_time, delta_omega=delta_omega
    )
    steady_qfi = qfi_fidelity(params, delta_omega=delta_omega).value
    return {
        "n": n,
        "omega_over_kappa": omega / kappa,
        "e2_abs": rate_info.e2_abs,
        "total_time": total_time,
        "trajectory_rate": rate,
        "steady_rate": steady_qfi / total_time,
        "bound": qfi_time_bound(n, kappa),
        "satisfied": satisfied,
    }

"""Finite-size-scaling collapse, peak finding, and power-law fits.

The collapse quality is the local-linear cross-size prediction statistic: for
each scaled point, the points of the *other* sizes in a window are fitted by a
weighted straight line and the reduced chi-square of all such predictions is
the quality.  Quality near one means the curves collapse within their errors.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit, minimize

__all__ = [
    "ScalingDataset",
    "CollapseFit",
    "PowerLawFit",
    "PeakEstimate",
    "scale_dataset",
    "collapse_quality",
    "fit_collapse",
    "find_peak",
    "fit_power_law",
    "check_exponent_consistency",
]

OBSERVABLE_KINDS = ("magnetization", "qfi")
POWER_LAW_MODELS = ("power", "pareto", "decay_offset")
COLLAPSE_WINDOW = 6  # nearest foreign points used for the local linear fit


@dataclass
class ScalingDataset:
    """Records (N, x = omega/kappa, y, dy) for a finite-size-scaling analysis.

    For the magnetization kind ``y`` is the un-normalized steady-state
    magnetization |<Sz>|; for the qfi kind it is the QFI itself.
    """

    n_spins: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray = None
    observable_kind: str = "magnetization"

    def __post_init__(self):
        self.n_spins = np.asarray(self.n_spins, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.observable_kind not in OBSERVABLE_KINDS:
            raise ValueError(f"unknown observable kind {self.observable_kind!r}")
        if not (self.n_spins.shape == self.x.shape == self.y.shape):
            raise ValueError("n_spins, x, y must have matching shapes")
        if self.dy is None:
            self.dy = np.full_like(self.y, 1e-9 * max(np.max(np.abs(self.y)), 1.0))
        else:
            self.dy = np.asarray(self.dy, dtype=float)
            floor = 1e-9 * max(np.max(np.abs(self.y)), 1.0)
            self.dy = np.maximum(self.dy, floor)
        if np.any(self.dy <= 0):
            raise ValueError("uncertainties must be positive")
        pairs = set(zip(self.n_spins.tolist(), self.x.tolist()))
        if len(pairs) != self.n_spins.size:
            raise ValueError("duplicate (N, x) records")

    @property
    def sizes(self):
        return np.unique(self.n_spins)


@dataclass
class CollapseFit:
    omega_c: float
    nu: float
    shape_exponent: float  # beta for magnetization, eta for qfi
    quality: float
    uncertainties: dict = field(default_factory=dict)
    observable_kind: str = "magnetization"
    n_iterations: int = 0
    converged: bool = True
    boundary_pinned: bool = False


@dataclass
class PowerLawFit:
    model: str
    params: dict
    stderr: dict
    r_squared: float
    residuals: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class PeakEstimate:
    x_max: float
    y_max: float
    interior: bool


def _shape_power(kind: str, nu: float, shape_exponent: float) -> float:
    # exponent applied to N in the vertical rescaling
    if kind == "magnetization":
        return shape_exponent / nu - 1.0
    return -shape_exponent / nu


def scale_dataset(dataset: ScalingDataset, omega_c: float, nu: float, shape_exponent: float):
    """Rescale to (u, v, dv): u = N^(1/nu) (x - omega_c), v = y * N^p.

    p = beta/nu - 1 for magnetization, p = -eta/nu for the QFI; dv scales
    identically to v.  Returns a list of (N, u, v, dv) tuples, one per size.
    """
    p = _shape_power(dataset.observable_kind, nu, shape_exponent)
    out = []
    for n in dataset.sizes:
        sel = dataset.n_spins == n
        u = n ** (1.0 / nu) * (dataset.x[sel] - omega_c)
        v = dataset.y[sel] * n**p
        dv = dataset.dy[sel] * n**p
        order = np.argsort(u)
        out.append((float(n), u[order], v[order], dv[order]))
    return out


def collapse_quality(scaled, window: int = COLLAPSE_WINDOW) -> float:
    """Reduced chi-square of local-linear cross-size predictions.

    Each point is predicted from a weighted linear fit through the nearest
    ``window`` points of the other sizes in u; points falling outside the
    foreign u-range are skipped.  Raises if fewer than 3 sizes or if too few
    points can be cross-predicted.
    """
    if len(scaled) < 2:
        raise ValueError("collapse quality needs at least two system sizes")
    chi2 = 0.0
    count = 0
    for idx, (_, u_i, v_i, dv_i) in enumerate(scaled):
        fu = np.concatenate([s[1] for j, s in enumerate(scaled) if j != idx])
        fv = np.concatenate([s[2] for j, s in enumerate(scaled) if j != idx])
        fdv = np.concatenate([s[3] for j, s in enumerate(scaled) if j != idx])
        if fu.size < 2:
            continue
        lo, hi = fu.min(), fu.max()
        for u, v, dv in zip(u_i, v_i, dv_i):
            if u < lo or u > hi:
                continue
            near = np.argsort(np.abs(fu - u))[:window]
            uu, vv, ss = fu[near], fv[near], fdv[near]
            w = 1.0 / ss**2
            # weighted straight-line prediction at u with its variance
            k0, k1, k2 = w.sum(), (w * uu).sum(), (w * uu**2).sum()
            b0, b1 = (w * vv).sum(), (w * uu * vv).sum()
            det = k0 * k2 - k1 * k1
            if det <= 0 or not np.isfinite(det):
                continue
            a = (k2 * b0 - k1 * b1) / det  # intercept
            b = (k0 * b1 - k1 * b0) / det  # slope
            pred = a + b * u
            var_pred = (k2 - 2 * u * k1 + u * u * k0) / det
            chi2 += (v - pred) ** 2 / (dv**2 + var_pred)
            count += 1
    if count < 2 * len(scaled):
        raise ValueError(
            f"insufficient overlap in u: only {count} cross-predictable points"
        )
    return chi2 / count


def fit_collapse(
    dataset: ScalingDataset,
    initial_guess,
    bounds=None,
    max_iterations: int = 2000,
    tol: float = 1e-6,
) -> CollapseFit:
    """Optimize (omega_c, nu, shape_exponent) for the best data collapse.

    Derivative-free simplex descent on the collapse quality; parameter
    uncertainties are quoted as the half-widths at which the quality rises by
    one above its minimum (single-parameter scans).
    """
    if len(dataset.sizes) < 4:
        raise ValueError("collapse fit needs at least 4 system sizes")
    x0 = np.asarray(initial_guess, dtype=float)
    if x0.shape != (3,):
        raise ValueError("initial_guess must be (omega_c, nu, shape_exponent)")
    if bounds is None:
        bounds = [(None, None), (1e-3, None), (None, None)]

    def clipped(p):
        q = p.copy()
        for i, (lo, hi) in enumerate(bounds):
            if lo is not None:
                q[i] = max(q[i], lo)
            if hi is not None:
                q[i] = min(q[i], hi)
        return q

    def objective(p):
        q = clipped(p)
        penalty = float(np.sum((p - q) ** 2)) * 1e6
        if q[1] <= 0:
            return 1e12
        try:
            quality = collapse_quality(scale_dataset(dataset, q[0], q[1], q[2]))
        except (ValueError, FloatingPointError):
            return 1e12
        return quality + penalty

    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": max_iterations,
            "xatol": tol,
            "fatol": tol,
            "adaptive": True,
        },
    )
    best = clipped(res.x)
    q_min = objective(best)
    pinned = bool(np.any(np.abs(best - res.x) > 1e-12))
    if pinned:
        warnings.warn(f"collapse fit pinned at parameter bounds: {res.x} -> {best}")

    def halfwidth(i):
        # scan outward until quality exceeds q_min + 1, then bisect
        scale = max(abs(best[i]) * 0.05, 1e-3)
        target = q_min + 1.0

        def q_at(delta):
            p = best.copy()
            p[i] += delta
            return objective(p)

        widths = []
        for sign in (+1.0, -1.0):
            step = scale
            for _ in range(60):
                if q_at(sign * step) >= target:
                    break
                step *= 1.6
            else:
                widths.append(np.inf)
                continue
            lo_w, hi_w = step / 1.6 if step > scale else 0.0, step
            for _ in range(40):
                mid = 0.5 * (lo_w + hi_w)
                if q_at(sign * mid) >= target:
                    hi_w = mid
                else:
                    lo_w = mid
            widths.append(0.5 * (lo_w + hi_w))
        return 0.5 * (widths[0] + widths[1])

    names = ("omega_c", "nu", "shape_exponent")
    uncertainties = {name: float(halfwidth(i)) for i, name in enumerate(names)}
    return CollapseFit(
        omega_c=float(best[0]),
        nu=float(best[1]),
        shape_exponent=float(best[2]),
        quality=float(q_min),
        uncertainties=uncertainties,
        observable_kind=dataset.observable_kind,
        n_iterations=int(res.nit),
        converged=bool(res.success),
        boundary_pinned=pinned,
    )


def find_peak(x_grid, y_values) -> PeakEstimate:
    """Interpolated maximum via a 3-point parabola through the best sample.

    At a boundary the grid maximum is returned with ``interior=False``.
    """
    x = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_values, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 grid points")
    i = int(np.argmax(y))
    if i == 0 or i == x.size - 1:
        return PeakEstimate(float(x[i]), float(y[i]), interior=False)
    coeffs = np.polyfit(x[i - 1:i + 2], y[i - 1:i + 2], 2)
    if coeffs[0] >= 0:  # degenerate parabola, keep the sample
        return PeakEstimate(float(x[i]), float(y[i]), interior=True)
    x_max = -coeffs[1] / (2.0 * coeffs[0])
    x_max = float(np.clip(x_max, x[i - 1], x[i + 1]))
    y_max = float(np.polyval(coeffs, x_max))
    return PeakEstimate(x_max, max(y_max, float(y[i])), interior=True)


def _power_model(n, a, b):
    return a * n**b


def _pareto_model(n, amp, c):
    return amp * (1.0 - n ** (-c))


def _pareto_jac(n, amp, c):
    return np.stack([1.0 - n ** (-c), amp * n ** (-c) * np.log(n)], axis=-1)


def _decay_offset_model(n, a, b, c):
    return a * n ** (-b) + c


def _decay_offset_jac(n, a, b, c):
    return np.stack(
        [n ** (-b), -a * n ** (-b) * np.log(n), np.ones_like(n)], axis=-1
    )


def fit_power_law(ns, ys, model: str = "power") -> PowerLawFit:
    """Fit one of the scaling models to (N, y) data.

    'power':        y = a N^b, least squares in log-log space
    'pareto':       y = amp (1 - N^(-c)), nonlinear with analytic Jacobian
    'decay_offset': y = a N^(-b) + c, nonlinear with analytic Jacobian
    """
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ns.size < 4:
        raise ValueError("need at least 4 sizes")
    if model not in POWER_LAW_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {POWER_LAW_MODELS}")

    if model == "power":
        if np.any(ys <= 0) or np.any(ns <= 0):
            raise ValueError("log-log fit requires positive inputs")
        ln_n, ln_y = np.log(ns), np.log(ys)
        coeffs, cov = np.polyfit(ln_n, ln_y, 1, cov=True)
        b, ln_a = coeffs
        a = np.exp(ln_a)
        params = {"a": float(a), "b": float(b)}
        stderr = {
            "a": float(a * np.sqrt(cov[1, 1])),
            "b": float(np.sqrt(cov[0, 0])),
        }
        fitted = _power_model(ns, a, b)
    else:
        if model == "pareto":
            fn, jac = _pareto_model, _pareto_jac
            p0 = (float(np.max(ys)), 0.5)
            names = ("amplitude", "c")
        else:
            fn, jac = _decay_offset_model, _decay_offset_jac
            span = max(float(ys[0] - ys[-1]), 1e-12)
            p0 = (span * ns[0] ** 0.5, 0.5, float(np.min(ys)) * 0.5)
            names = ("a", "b", "c")
        popt, pcov = curve_fit(fn, ns, ys, p0=p0, jac=jac, maxfev=20000)
        perr = np.sqrt(np.diag(pcov))
        params = {name: float(v) for name, v in zip(names, popt)}
        stderr = {name: float(e) for name, e in zip(names, perr)}
        fitted = fn(ns, *popt)

    residuals = ys - fitted
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r_squared = float(np.clip(r_squared, 0.0, 1.0))
    return PowerLawFit(
        model=model, params=params, stderr=stderr, r_squared=r_squared,
        residuals=residuals,
    )


def check_exponent_consistency(
    power_fit: PowerLawFit, collapse: CollapseFit, n_sigma: float = 1.0
) -> dict:
    """Compare the peak-scaling exponent b with eta/nu from the QFI collapse.

    The two exponents come from independent analyses of the same transition
    and must agree; the report carries their difference and the combined
    propagated uncertainty.
    """
    if power_fit.model != "power":
        raise ValueError("consistency check expects the 'power' model fit")
    b = power_fit.params["b"]
    sigma_b = power_fit.stderr["b"]
    eta, nu = collapse.shape_exponent, collapse.nu
    ratio = eta / nu
    s_eta = collapse.uncertainties.get("shape_exponent", 0.0)
    s_nu = collapse.uncertainties.get("nu", 0.0)
    sigma_ratio = abs(ratio) * np.sqrt(
        (s_eta / eta) ** 2 + (s_nu / nu) ** 2
    ) if eta != 0 else 0.0
    diff = abs(b - ratio)
    combined = float(np.hypot(sigma_b, sigma_ratio))
    return {
        "b": float(b),
        "sigma_b": float(sigma_b),
        "eta_over_nu": float(ratio),
        "sigma_eta_over_nu": float(sigma_ratio),
        "difference": float(diff),
        "combined_error": combined,
        "passes": bool(diff <= n_sigma * combined),
    }

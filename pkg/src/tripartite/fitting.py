"""Least-squares fits of pump-intensity scans to the mean-photon dynamics.

A scan varies one squared coupling (``x``) while the other stays fixed, and
records the detected means of arm 1 and of arms 2+3.  The model is::

    M1(x)   = eta1    * mu_scale * N1(x)
    Msum(x) = eta_sum * mu_scale * (N2 + N3)(x)

Both series share the shape ``N1 = N2 + N3``; only their amplitude
differs.  ``eta1``, ``eta_sum`` and ``mu_scale`` therefore enter only
through the two products ``eta1 * mu_scale`` and ``eta_sum * mu_scale``,
and a spec freeing all three is rejected as unidentifiable.

The optimiser is a bounded Nelder-Mead simplex followed by a golden-section
polish along each coordinate, repeated until a full cycle improves the
objective by less than ``CYCLE_RTOL`` relative.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import mode_means_arrays
from .errors import ConfigError, ConvergenceError, InvalidParameterError

PARAMETERS = ("coupling", "eta1", "eta_sum", "mu_scale")
DEFAULT_BOUNDS = {
    "coupling": (0.0, math.inf),
    "eta1": (0.0, 1.0),
    "eta_sum": (0.0, 1.0),
    "mu_scale": (0.0, math.inf),
}
#: Relative objective improvement per cycle below which the fit has converged.
CYCLE_RTOL = 1e-10
#: Normalised objective treated as an exact fit.
OBJECTIVE_FLOOR = 1e-30
#: Maximum number of simplex + polish cycles.
MAX_CYCLES = 60
#: Simplex iterations allowed per cycle, per free parameter.
SIMPLEX_ITER_PER_DIM = 600
GOLDEN_ITERATIONS = 80
BOOTSTRAP_RESAMPLES = 200

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class ScanData:
    """Detected means of arm 1 and arms 2+3 along a pump scan.

    ``scanned_axis`` names the coupling held in ``x`` (``"g1_sq"`` or
    ``"g2_sq"``); the other coupling is the ``coupling`` fit parameter.
    """

    x: np.ndarray
    m1: np.ndarray
    msum: np.ndarray
    scanned_axis: str = "g1_sq"
    z: float = 1.0

    def __post_init__(self):
        arrays = [np.array(a, dtype=float).ravel() for a in (self.x, self.m1, self.msum)]
        x, m1, msum = arrays
        if not (len(x) == len(m1) == len(msum)):
            raise InvalidParameterError("x, M1 and Msum must have equal length")
        if self.scanned_axis not in ("g1_sq", "g2_sq"):
            raise InvalidParameterError(f"scanned_axis must be g1_sq or g2_sq, got {self.scanned_axis!r}")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise InvalidParameterError("scan values must be finite")
        if len(x) > 1 and np.all(x == x[0]):
            raise InvalidParameterError("degenerate scan: all x values are equal")
        if np.any(np.diff(x) <= 0):
            raise InvalidParameterError("x must be strictly increasing")
        if np.any(x < 0) or np.any(m1 < 0) or np.any(msum < 0):
            raise InvalidParameterError("couplings and means must be >= 0")
        if not (math.isfinite(self.z) and self.z > 0):
            raise InvalidParameterError("z must be positive")
        for name, a in zip(("x", "m1", "msum"), arrays):
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        object.__setattr__(self, "z", float(self.z))

    def __len__(self) -> int:
        return len(self.x)


def scan_model(params: dict, x, scanned_axis: str, z: float) -> tuple[np.ndarray, np.ndarray]:
    """Predicted ``(M1, Msum)`` for full parameter dict ``params``."""
    if scanned_axis == "g1_sq":
        n1, _, _ = mode_means_arrays(x, params["coupling"], z)
    else:
        n1, _, _ = mode_means_arrays(params["coupling"], x, z)
    scale = params["mu_scale"] * n1
    return params["eta1"] * scale, params["eta_sum"] * scale


def synthesize_scan(
    x, coupling: float, eta1: float, eta_sum: float, mu_scale: float = 1.0,
    scanned_axis: str = "g1_sq", z: float = 1.0,
    rel_noise: float = 0.0, rng: Optional[np.random.Generator] = None,
) -> ScanData:
    """Noiseless (or multiplicatively perturbed) scan from known parameters."""
    params = dict(coupling=coupling, eta1=eta1, eta_sum=eta_sum, mu_scale=mu_scale)
    m1, msum = scan_model(params, np.asarray(x, dtype=float), scanned_axis, z)
    if rel_noise > 0:
        if rng is None:
            raise InvalidParameterError("rel_noise needs an rng")
        m1 = m1 * (1 + rel_noise * rng.standard_normal(m1.shape))
        msum = msum * (1 + rel_noise * rng.standard_normal(msum.shape))
        m1, msum = np.abs(m1), np.abs(msum)
    return ScanData(x, m1, msum, scanned_axis, z)


@dataclass(frozen=True)
class FitSpec:
    """Which parameters float, where they start and how they are bounded.

    ``initial`` must give a value for every parameter; fixed ones keep it.
    """

    free: tuple = ("coupling", "eta1", "eta_sum")
    initial: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        free = tuple(self.free)
        object.__setattr__(self, "free", free)
        unknown = set(free) | set(self.initial) | set(self.bounds)
        unknown -= set(PARAMETERS)
        if unknown:
            raise ConfigError(f"unknown fit parameters: {sorted(unknown)}")
        if not free:
            raise ConfigError("at least one parameter must be free")
        if len(set(free)) != len(free):
            raise ConfigError("duplicate free parameters")
        if {"eta1", "eta_sum", "mu_scale"} <= set(free):
            raise ConfigError(
                "eta1, eta_sum and mu_scale cannot all be free: only the products "
                "eta1*mu_scale and eta_sum*mu_scale are identifiable"
            )
        missing = [p for p in PARAMETERS if p not in self.initial]
        if missing:
            raise ConfigError(f"initial values missing for {missing}")
        for p in PARAMETERS:
            lo, hi = self.bound(p)
            v = self.initial[p]
            if not (lo <= v <= hi) or not math.isfinite(v):
                raise ConfigError(f"initial {p}={v!r} outside bounds [{lo}, {hi}]")

    def bound(self, name: str) -> tuple[float, float]:
        lo, hi = self.bounds.get(name, DEFAULT_BOUNDS[name])
        dlo, dhi = DEFAULT_BOUNDS[name]
        return max(lo, dlo), min(hi, dhi)


@dataclass
class FitResult:
    """Outcome of :func:`fit_pump_scan`.

    ``params`` holds every model parameter (fitted or fixed); ``ci`` maps
    free parameters to 95 % residual-bootstrap intervals when requested.
    """

    params: dict
    free: tuple
    rss: float
    rss_relative: float
    residuals_m1: np.ndarray
    residuals_msum: np.ndarray
    converged: bool
    cycles: int
    n_evals: int
    ci: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "free": list(self.free),
            "rss": self.rss,
            "rss_relative": self.rss_relative,
            "converged": self.converged,
            "cycles": self.cycles,
            "n_evals": self.n_evals,
            "ci": {k: [float(a), float(b)] for k, (a, b) in self.ci.items()},
            "residuals_m1": [float(v) for v in self.residuals_m1],
            "residuals_msum": [float(v) for v in self.residuals_msum],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class _Objective:
    """Normalised joint sum of squares in scaled coordinates ``theta = p / p0``."""

    def __init__(self, data: ScanData, spec: FitSpec):
        self.data = data
        self.spec = spec
        self.names = spec.free
        self.base = dict(spec.initial)
        self.p0 = np.array([spec.initial[p] if spec.initial[p] != 0 else 1.0 for p in self.names])
        lo, hi = zip(*(spec.bound(p) for p in self.names))
        self.lo = np.array(lo) / self.p0
        self.hi = np.array(hi) / self.p0
        scale = np.concatenate([data.m1, data.msum])
        self.norm = float(np.sum(scale**2)) or 1.0
        self.n_evals = 0

    def params(self, theta) -> dict:
        p = dict(self.base)
        for name, t, s in zip(self.names, theta, self.p0):
            p[name] = float(t * s)
        return p

    def project(self, theta) -> np.ndarray:
        return np.clip(theta, self.lo, self.hi)

    def residuals(self, params: dict) -> tuple[np.ndarray, np.ndarray]:
        d = self.data
        m1, msum = scan_model(params, d.x, d.scanned_axis, d.z)
        return m1 - d.m1, msum - d.msum

    def __call__(self, theta) -> float:
        self.n_evals += 1
        r1, r2 = self.residuals(self.params(theta))
        with np.errstate(over="ignore", invalid="ignore"):
            f = (float(r1 @ r1) + float(r2 @ r2)) / self.norm
        return f if math.isfinite(f) else math.inf


def nelder_mead(
    f: Callable, x0: np.ndarray, project: Callable, step: float = 0.05,
    max_iter: int = 2000, ftol: float = 1e-13, xtol: float = 1e-12,
    history: Optional[list] = None,
) -> tuple[np.ndarray, float]:
    """Bounded Nelder-Mead; every trial point is projected onto the box.

    The best vertex value never increases.  Stops when the spread of
    vertex values is below ``ftol`` relative to the best value, when the
    simplex has shrunk below ``xtol`` (relative), or once every value sits
    below ``OBJECTIVE_FLOOR``.
    """
    dim = len(x0)
    simplex = [project(np.array(x0, dtype=float))]
    for i in range(dim):
        v = simplex[0].copy()
        v[i] = v[i] * (1 + step) if v[i] != 0 else step
        v = project(v)
        if np.array_equal(v, simplex[0]):
            v[i] = simplex[0][i] * (1 - step) if simplex[0][i] != 0 else -step
            v = project(v)
        simplex.append(v)
    values = [f(v) for v in simplex]

    for _ in range(max_iter):
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if history is not None:
            history.append(values[0])
        best, worst = values[0], values[-1]
        if worst <= OBJECTIVE_FLOOR or (worst - best) <= ftol * max(abs(best), OBJECTIVE_FLOOR):
            break
        size = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:])
        if size <= xtol * max(np.max(np.abs(simplex[0])), 1.0):
            break

        centroid = np.mean(simplex[:-1], axis=0)
        xr = project(centroid + (centroid - simplex[-1]))
        fr = f(xr)
        if fr < values[0]:
            xe = project(centroid + 2.0 * (centroid - simplex[-1]))
            fe = f(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = project(centroid + 0.5 * (xr - centroid))
            else:
                xc = project(centroid + 0.5 * (simplex[-1] - centroid))
            fc = f(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                for i in range(1, dim + 1):
                    simplex[i] = project(simplex[0] + 0.5 * (simplex[i] - simplex[0]))
                    values[i] = f(simplex[i])
    i_best = int(np.argmin(values))
    return simplex[i_best], values[i_best]


def golden_section(
    g: Callable, a: float, b: float, iterations: int = GOLDEN_ITERATIONS, rtol: float = 1e-13
) -> tuple[float, float]:
    """Minimise a unimodal scalar function on ``[a, b]``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(iterations):
        if (b - a) <= rtol * max(abs(a), abs(b), 1e-300):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = g(d)
    return (c, fc) if fc <= fd else (d, fd)


def _polish(obj: _Objective, theta: np.ndarray, fval: float, width: float) -> tuple[np.ndarray, float]:
    theta = theta.copy()
    for i in range(len(theta)):
        h = width * max(abs(theta[i]), 1e-12)
        a, b = max(obj.lo[i], theta[i] - h), min(obj.hi[i], theta[i] + h)
        if not b > a:
            continue

        def g(t, i=i):
            trial = theta.copy()
            trial[i] = t
            return obj(trial)

        t_new, f_new = golden_section(g, a, b)
        if f_new < fval:
            theta[i], fval = t_new, f_new
    return theta, fval


def _minimise(obj: _Objective, theta0: np.ndarray, max_cycles: int, history: list):
    dim = len(theta0)
    theta = obj.project(theta0)
    fval = obj(theta)
    step, width = 0.05, 0.02
    converged = False
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        f_start = fval
        t_nm, f_nm = nelder_mead(
            obj, theta, obj.project, step=step, max_iter=SIMPLEX_ITER_PER_DIM * dim, history=history
        )
        if f_nm < fval:
            theta, fval = t_nm, f_nm
        theta, fval = _polish(obj, theta, fval, width)
        history.append(fval)
        if fval <= OBJECTIVE_FLOOR or (f_start - fval) <= CYCLE_RTOL * f_start:
            converged = True
            break
        # later cycles restart with tighter simplices around the incumbent
        step = max(step * 0.3, 1e-9)
        width = max(width * 0.3, 1e-9)
    return theta, fval, converged, cycles


def fit_pump_scan(
    data: ScanData,
    spec: FitSpec,
    n_bootstrap: int = 0,
    seed: int = 0,
    max_cycles: int = MAX_CYCLES,
    strict: bool = True,
) -> FitResult:
    """Fit the two detected-mean series of a pump scan.

    Parameters
    ----------
    data : ScanData
        At least four scan points.
    spec : FitSpec
        Free parameters, initial values and bounds.
    n_bootstrap : int
        Residual-bootstrap resamples for confidence intervals (0 skips them).
    seed : int
        Seed of the bootstrap resampling.
    max_cycles : int
        Iteration cap on simplex + polish cycles.
    strict : bool
        Raise :class:`ConvergenceError` when the cap is hit; otherwise
        return the result with ``converged=False`` and warn.
    """
    if len(data) < 4:
        raise InvalidParameterError(f"need at least 4 scan points, got {len(data)}")
    obj = _Objective(data, spec)
    history: list = []
    theta0 = np.ones(len(spec.free))
    theta, fval, converged, cycles = _minimise(obj, theta0, max_cycles, history)
    params = obj.params(theta)
    r1, r2 = obj.residuals(params)
    result = FitResult(
        params=params,
        free=spec.free,
        rss=float(r1 @ r1 + r2 @ r2),
        rss_relative=fval,
        residuals_m1=r1,
        residuals_msum=r2,
        converged=converged,
        cycles=cycles,
        n_evals=obj.n_evals,
        history=history,
    )
    if not converged:
        msg = f"fit did not converge within {max_cycles} cycles"
        if strict:
            err = ConvergenceError(msg)
            err.result = result
            raise err
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if n_bootstrap > 0:
        result.ci = _residual_bootstrap(data, spec, result, n_bootstrap, seed, max_cycles)
    return result


def _residual_bootstrap(data, spec, result, n_boot, seed, max_cycles) -> dict:
    rng = np.random.default_rng(seed)
    fit_m1 = data.m1 + result.residuals_m1
    fit_msum = data.msum + result.residuals_msum
    start = dict(spec.initial)
    start.update(result.params)
    boot_spec = FitSpec(free=spec.free, initial=start, bounds=spec.bounds)
    samples = {p: [] for p in spec.free}
    n = len(data)
    for _ in range(n_boot):
        i1 = rng.integers(0, n, n)
        i2 = rng.integers(0, n, n)
        m1 = np.abs(fit_m1 - result.residuals_m1[i1])
        msum = np.abs(fit_msum - result.residuals_msum[i2])
        resampled = ScanData(data.x, m1, msum, data.scanned_axis, data.z)
        obj = _Objective(resampled, boot_spec)
        theta, _, _, _ = _minimise(obj, np.ones(len(spec.free)), max_cycles, [])
        for p, v in obj.params(theta).items():
            if p in samples:
                samples[p].append(v)
    return {p: (float(np.percentile(v, 2.5)), float(np.percentile(v, 97.5))) for p, v in samples.items()}


SCAN_HEADER = "x,M1,Msum"


def write_scan(data: ScanData, path) -> None:
    """Write ``x,M1,Msum`` CSV and a JSON sidecar with the axis and ``z``."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(SCAN_HEADER + "\n")
        for x, a, b in zip(data.x, data.m1, data.msum):
            fh.write(f"{x:.17g},{a:.17g},{b:.17g}\n")
    meta = {"scanned_axis": data.scanned_axis, "z": data.z}
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_scan(path, scanned_axis: Optional[str] = None, z: Optional[float] = None) -> ScanData:
    """Read a scan CSV; explicit arguments override the sidecar."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if header != SCAN_HEADER:
            raise InvalidParameterError(f"unexpected scan header {header!r}")
        arr = np.loadtxt(fh, delimiter=",", ndmin=2)
    meta_path = path.with_name(path.name + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    axis = scanned_axis or meta.get("scanned_axis", "g1_sq")
    zz = z if z is not None else meta.get("z", 1.0)
    return ScanData(arr[:, 0], arr[:, 1], arr[:, 2], axis, zz)

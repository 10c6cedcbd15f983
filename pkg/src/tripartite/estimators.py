"""Sample estimators for recorded or simulated shot sets.

Standard errors come from a non-overlapping block bootstrap: the run is
cut into contiguous blocks, whole blocks are resampled with replacement,
and every estimate is recomputed on each replicate.  Per-block centred
moment sums make a replicate cost O(blocks) instead of O(shots).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, OverSubtractionError, UndefinedCorrelationError
from .sampling import ShotSet
from .statistics import ALL_GROUPINGS, Grouping, MomentSet

#: Number of contiguous blocks used by the bootstrap.
BOOTSTRAP_BLOCKS = 200
#: Number of bootstrap replicates.
BOOTSTRAP_REPLICATES = 400
_BOOTSTRAP_STREAM = 0xB007


@dataclass
class EstimateReport:
    """Estimated means, correlations and noise reductions of one run.

    ``eps_hat`` and ``r_hat`` are keyed by grouping strings such as
    ``"1,2+3"``; groupings whose estimate is undefined are absent from
    ``eps_hat``/``r_hat`` and explained in ``undefined``.
    """

    mean: np.ndarray
    cov: np.ndarray
    eps_hat: dict
    r_hat: dict
    stderr: dict
    dark_corrected: bool
    shots_used: int
    undefined: dict = field(default_factory=dict)

    def eps(self, grouping) -> float:
        key = Grouping.parse(grouping).value
        if key not in self.eps_hat:
            raise UndefinedCorrelationError(self.undefined.get("eps_" + key, key))
        return self.eps_hat[key]

    def r(self, grouping) -> float:
        key = Grouping.parse(grouping).value
        if key not in self.r_hat:
            raise UndefinedCorrelationError(self.undefined.get("R_" + key, key))
        return self.r_hat[key]

    @property
    def m_sum(self) -> float:
        return float(self.mean[1] + self.mean[2])

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "cov": [[float(v) for v in row] for row in self.cov],
            "eps_hat": dict(self.eps_hat),
            "r_hat": dict(self.r_hat),
            "stderr": dict(self.stderr),
            "dark_corrected": self.dark_corrected,
            "shots_used": self.shots_used,
            "undefined": dict(self.undefined),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    CSV_COLUMNS = (
        "shots", "dark_corrected", "M1", "M2", "M3",
        *(f"eps_{g.slug}" for g in ALL_GROUPINGS),
        *(f"R_{g.slug}" for g in ALL_GROUPINGS),
        "stderr_R_1_23", "stderr_eps_1_23",
    )

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.CSV_COLUMNS)

    def csv_row(self) -> str:
        def fmt(x):
            return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.17g}"

        vals = [str(self.shots_used), str(int(self.dark_corrected))]
        vals += [fmt(float(v)) for v in self.mean]
        vals += [fmt(self.eps_hat.get(g.value)) for g in ALL_GROUPINGS]
        vals += [fmt(self.r_hat.get(g.value)) for g in ALL_GROUPINGS]
        vals += [fmt(self.stderr.get("R_1,2+3")), fmt(self.stderr.get("eps_1,2+3"))]
        return ",".join(vals)


def _block_sums(x: np.ndarray, n_blocks: int):
    """Counts, centred sums and centred cross-products per contiguous block."""
    centre = x.mean(axis=0)
    xc = x - centre
    bounds = np.linspace(0, len(x), n_blocks + 1).round().astype(int)
    counts = np.diff(bounds).astype(float)
    sums = np.add.reduceat(xc, bounds[:-1], axis=0)
    prods = np.add.reduceat(xc[:, :, None] * xc[:, None, :], bounds[:-1], axis=0)
    return centre, counts, sums, prods


def _moments_from_sums(centre, n, s, q):
    """Mean and unbiased covariance from (possibly weighted) centred sums."""
    mu_c = s / n[..., None]
    cov = (q - n[..., None, None] * mu_c[..., :, None] * mu_c[..., None, :]) / (n[..., None, None] - 1)
    return centre + mu_c, cov


def _quantities(mean, cov, dark_corrected: bool):
    """Vectorised estimates over leading replicate axes.

    Returns a dict of arrays with NaN wherever an estimate is undefined.
    """
    out = {}
    for j in range(3):
        out[f"M{j + 1}"] = mean[..., j]
    out["Msum"] = mean[..., 1] + mean[..., 2]
    for g in ALL_GROUPINGS:
        a, b = g.weights
        va = np.einsum("i,...ij,j->...", a, cov, a)
        vb = np.einsum("i,...ij,j->...", b, cov, b)
        cab = np.einsum("i,...ij,j->...", a, cov, b)
        w = a - b
        vd = np.einsum("i,...ij,j->...", w, cov, w)
        denom = mean @ (a + b)
        with np.errstate(divide="ignore", invalid="ignore"):
            eps = np.where((va > 0) & (vb > 0), cab / np.sqrt(np.abs(va * vb)), np.nan)
            r = np.where(denom > 0, vd / denom, np.nan)
        out["eps_" + g.value] = np.clip(eps, -1.0, 1.0)
        out["R_" + g.value] = r
    return out


def _check_corrected(mean: np.ndarray, cov: np.ndarray) -> None:
    var = np.diag(cov)
    for j in range(3):
        if var[j] <= 0:
            raise OverSubtractionError(f"dark-corrected variance of arm {j + 1} is {var[j]:.6g} <= 0")
    for g in ALL_GROUPINGS:
        a, b = g.weights
        w = a - b
        vd = float(w @ cov @ w)
        if vd <= 0:
            raise OverSubtractionError(
                f"dark-corrected difference variance for {g.value} is {vd:.6g} <= 0"
            )
        if float(mean @ (a + b)) <= 0:
            raise OverSubtractionError(f"dark-corrected mean for {g.value} is not positive")


def sample_moments(s: ShotSet) -> MomentSet:
    """Sample means and unbiased covariance of a shot set."""
    if s.shots < 2:
        raise InvalidParameterError("at least two shots are needed for sample covariances")
    return MomentSet(s.records.mean(axis=0), np.cov(s.records, rowvar=False, ddof=1))


def estimate_statistics(
    s: ShotSet,
    dark: Optional[ShotSet] = None,
    n_blocks: int = BOOTSTRAP_BLOCKS,
    n_replicates: int = BOOTSTRAP_REPLICATES,
    seed: Optional[int] = None,
) -> EstimateReport:
    """Estimate means, correlation coefficients and noise reductions.

    When a dark run is supplied its per-arm means are subtracted from the
    signal means and its covariance matrix from the signal covariance, which
    removes the electronic contribution from every arm variance and every
    difference-photocurrent variance.

    Parameters
    ----------
    s : ShotSet
        Signal run.
    dark : ShotSet, optional
        Run acquired without light under the same electronic conditions.
    n_blocks, n_replicates : int
        Block-bootstrap layout; set ``n_replicates=0`` to skip errors.
    seed : int, optional
        Bootstrap seed; defaults to the signal run's seed (or 0).

    Raises
    ------
    InvalidParameterError
        Empty shot set.
    OverSubtractionError
        A dark-corrected variance or mean is not positive.
    """
    if s is None or s.shots == 0:
        raise InvalidParameterError("shot set is empty")
    if dark is not None and dark.shots == 0:
        raise InvalidParameterError("dark shot set is empty")

    x = s.records
    n = x.shape[0]
    if n == 1:
        mean = x[0].copy()
        cov = np.zeros((3, 3))
    else:
        mean = x.mean(axis=0)
        cov = np.cov(x, rowvar=False, ddof=1)
    if dark is not None:
        dx = dark.records
        d_mean = dx.mean(axis=0)
        d_cov = np.cov(dx, rowvar=False, ddof=1) if dx.shape[0] > 1 else np.zeros((3, 3))
        mean = mean - d_mean
        cov = cov - d_cov
        _check_corrected(mean, cov)

    point = _quantities(mean, cov, dark is not None)
    eps_hat, r_hat, undefined = {}, {}, {}
    for g in ALL_GROUPINGS:
        e = float(point["eps_" + g.value])
        r = float(point["R_" + g.value])
        if math.isnan(e):
            undefined["eps_" + g.value] = f"zero variance in grouping {g.value}"
        else:
            eps_hat[g.value] = e
        if math.isnan(r):
            undefined["R_" + g.value] = f"zero total mean in grouping {g.value}"
        else:
            r_hat[g.value] = r

    stderr = {}
    if n_replicates > 0 and n >= 2:
        stderr = _bootstrap_stderr(s, dark, n_blocks, n_replicates, seed)

    return EstimateReport(
        mean=mean,
        cov=cov,
        eps_hat=eps_hat,
        r_hat=r_hat,
        stderr=stderr,
        dark_corrected=dark is not None,
        shots_used=n,
        undefined=undefined,
    )


def _bootstrap_stderr(s, dark, n_blocks, n_replicates, seed) -> dict:
    if seed is None:
        seed = s.seed if s.seed is not None else 0
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(_BOOTSTRAP_STREAM,)))
    )

    def replicate_moments(x):
        b = min(n_blocks, x.shape[0] // 2)
        centre, counts, sums, prods = _block_sums(x, b)
        w = rng.multinomial(b, np.full(b, 1.0 / b), size=n_replicates).astype(float)
        return _moments_from_sums(centre, w @ counts, w @ sums, np.einsum("rb,bij->rij", w, prods))

    mean, cov = replicate_moments(s.records)
    if dark is not None and dark.shots >= 4:
        d_mean, d_cov = replicate_moments(dark.records)
        mean, cov = mean - d_mean, cov - d_cov
    reps = _quantities(mean, cov, dark is not None)
    out = {}
    for key, vals in reps.items():
        good = vals[np.isfinite(vals)]
        if good.size > 1:
            out[key] = float(np.std(good, ddof=1))
    return out

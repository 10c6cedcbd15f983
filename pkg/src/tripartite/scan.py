"""Parameter sweeps over the two couplings with Monte Carlo estimation.

Each grid point is simulated independently with its own seed derived from
the scan seed and the point index, so rows are reproducible and can be
computed concurrently; they are always emitted in grid order.
"""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import CouplingConfig, mode_means
from .detection import DetectionConfig, detected_correlation, noise_reduction
from .errors import ConfigError, TripartiteError
from .estimators import estimate_statistics
from .sampling import CoherenceMismatch, NoiseModel, expected_moments, sample_dark_run, sample_run

COLUMNS = (
    "g1_sq", "g2_sq", "M1", "Msum", "eps_1_23", "R_1_23", "stderr_R",
    "M1_analytic", "Msum_analytic", "eps_1_23_analytic", "R_1_23_analytic",
    "R_1_23_model", "error",
)
MIN_SHOTS = 100


@dataclass(frozen=True)
class ScanConfig:
    """Grid, detector and noise settings of a coupling sweep.

    ``mismatch``, when set, replaces the noise model at each point by
    ``mismatch.noise_at(g1_sq, noise)``.
    """

    g1_grid: Sequence[float]
    g2_grid: Sequence[float]
    z: float = 1.0
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    shots: int = 50_000
    seed: int = 0
    out: Optional[str] = None
    mismatch: Optional[CoherenceMismatch] = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "g1_grid", tuple(float(v) for v in self.g1_grid))
        object.__setattr__(self, "g2_grid", tuple(float(v) for v in self.g2_grid))
        if not self.g1_grid or not self.g2_grid:
            raise ConfigError("scan grids must be non-empty")
        if int(self.shots) < MIN_SHOTS:
            raise ConfigError(f"shots per grid point must be >= {MIN_SHOTS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def points(self) -> list[tuple[float, float]]:
        return [(g1, g2) for g1 in self.g1_grid for g2 in self.g2_grid]


def point_seed(seed: int, index: int, tag: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(0x5CA, int(index), int(tag)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _run_point(cfg: ScanConfig, index: int, g1: float, g2: float) -> dict:
    row = {"g1_sq": g1, "g2_sq": g2}
    try:
        coupling = CouplingConfig(g1, g2, cfg.z)
        m = mode_means(coupling)
        d = cfg.detection
        nm = cfg.mismatch.noise_at(g1, cfg.noise) if cfg.mismatch else cfg.noise
        mu = nm.mu
        row["M1_analytic"] = mu * d.eta_1 * m.n1
        row["Msum_analytic"] = mu * (d.eta_2 * m.n2 + d.eta_3 * m.n3)
        row["eps_1_23_analytic"] = detected_correlation(m, d, "1,2+3")
        row["R_1_23_analytic"] = noise_reduction(m, d, "1,2+3")
        row["R_1_23_model"] = expected_moments(m, d, nm).noise_reduction("1,2+3")

        s = sample_run(m, d, nm, cfg.shots, point_seed(cfg.seed, index, 0), coupling=coupling)
        dark = None
        if any(nm.sigma_el):
            dark = sample_dark_run(d, nm, cfg.shots, point_seed(cfg.seed, index, 1))
        rep = estimate_statistics(s, dark)
        row["M1"] = float(rep.mean[0])
        row["Msum"] = rep.m_sum
        row["eps_1_23"] = rep.eps("1,2+3")
        row["R_1_23"] = rep.r("1,2+3")
        row["stderr_R"] = rep.stderr.get("R_1,2+3")
    except TripartiteError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_scan(cfg: ScanConfig) -> list[dict]:
    """Simulate and estimate every grid point; rows follow grid order.

    Analytic columns are the ideal-detector, infinite-shot values and never
    depend on ``shots`` or ``seed``; ``R_1_23_model`` is the infinite-shot
    value under the full noise model.  Errors at a point are reported in
    its ``error`` column without aborting the scan.
    """
    pts = cfg.points()
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(lambda a: _run_point(cfg, a[0], *a[1]), enumerate(pts)))
    else:
        rows = [_run_point(cfg, i, g1, g2) for i, (g1, g2) in enumerate(pts)]
    if cfg.out:
        Path(cfg.out).write_text(format_rows(rows))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return '"' + v.replace('"', "'") + '"'
    return f"{float(v):.17g}"


def format_rows(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(",".join(COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row.get(c)) for c in COLUMNS) + "\n")
    return buf.getvalue()

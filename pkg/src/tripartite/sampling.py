"""Seeded Monte Carlo generation of detected photocurrent triplets.

Shots are produced in fixed-size blocks.  Block ``b`` of a run draws from
its own Philox stream keyed by ``(seed, stream, b)``, so a run is a pure
function of its inputs however the blocks are scheduled across threads.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .core import CouplingConfig, ModeMeans
from .detection import DetectionConfig, thin_moments
from .errors import InvalidParameterError
from .statistics import MomentSet, photon_moments

#: Shots per random substream; part of the reproducibility contract.
BLOCK_SIZE = 8192

SIGNAL_STREAM = 0
DARK_STREAM = 1


def _triple(name: str, value, lo: float, hi: float = math.inf, lo_open=False) -> tuple:
    if np.ndim(value) == 0:
        value = (value,) * 3
    vals = tuple(float(v) for v in value)
    if len(vals) != 3:
        raise InvalidParameterError(f"{name} needs one or three values, got {value!r}")
    for v in vals:
        bad_lo = v <= lo if lo_open else v < lo
        if not math.isfinite(v) or bad_lo or v > hi:
            raise InvalidParameterError(f"{name} value {v!r} out of range")
    return vals


@dataclass(frozen=True)
class NoiseModel:
    """Experimental imperfections applied on top of the ideal state.

    Attributes
    ----------
    mu : int
        Number of independent temporal modes summed in one shot.
    sigma_el : tuple of float
        Standard deviation of the additive Gaussian electronic noise per arm,
        in photon-equivalent units.
    spurious : tuple of float
        Mean uncorrelated thermal photons per temporal mode added to each arm
        before detection.
    collect : tuple of float
        Fraction of the correlated light passing each pin-hole, in (0, 1].
    """

    mu: int = 1
    sigma_el: tuple = (0.0, 0.0, 0.0)
    spurious: tuple = (0.0, 0.0, 0.0)
    collect: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if isinstance(self.mu, bool) or int(self.mu) != self.mu or self.mu < 1:
            raise InvalidParameterError(f"mu must be an integer >= 1, got {self.mu!r}")
        object.__setattr__(self, "mu", int(self.mu))
        object.__setattr__(self, "sigma_el", _triple("sigma_el", self.sigma_el, 0.0))
        object.__setattr__(self, "spurious", _triple("spurious", self.spurious, 0.0))
        object.__setattr__(self, "collect", _triple("collect", self.collect, 0.0, 1.0, lo_open=True))

    @property
    def is_ideal(self) -> bool:
        return (
            not any(self.sigma_el)
            and not any(self.spurious)
            and all(c == 1.0 for c in self.collect)
        )

    def replace(self, **changes) -> "NoiseModel":
        return NoiseModel(**{**asdict(self), **changes})


@dataclass(frozen=True)
class CoherenceMismatch:
    """Phenomenological pin-hole versus coherence-area mismatch along a pump scan.

    Raising the downconversion pump widens the coherence areas, so a fixed
    pin-hole passes only part of the correlated light; lowering it shrinks
    them and lets uncorrelated light from neighbouring areas through.  With
    ``a = g1_sq / matched_g1_sq``:

    * ``a > 1``: arms in ``collect_arms`` keep a fraction ``a ** -collect_exponent``
    * ``a < 1``: every arm gains ``spurious_scale * (1/a - 1)`` thermal photons per mode
    """

    matched_g1_sq: float
    collect_exponent: float = 1.0
    spurious_scale: float = 1.0
    collect_arms: tuple = (0,)

    def __post_init__(self):
        if not self.matched_g1_sq > 0:
            raise InvalidParameterError("matched_g1_sq must be positive")
        if self.collect_exponent < 0 or self.spurious_scale < 0:
            raise InvalidParameterError("mismatch exponents and scales must be >= 0")

    def noise_at(self, g1_sq: float, base: NoiseModel) -> NoiseModel:
        a = g1_sq / self.matched_g1_sq
        collect = list(base.collect)
        spurious = list(base.spurious)
        if a > 1:
            for arm in self.collect_arms:
                collect[arm] = collect[arm] * a ** (-self.collect_exponent)
        elif a < 1:
            extra = self.spurious_scale * (1.0 / a - 1.0)
            spurious = [s + extra for s in spurious]
        return base.replace(collect=tuple(collect), spurious=tuple(spurious))


def expected_moments(m: ModeMeans, d: DetectionConfig, nm: NoiseModel) -> MomentSet:
    """Exact per-shot moments of the simulated photocurrents.

    This is the infinite-shot limit of what :func:`sample_run` produces,
    including every term of the noise model.
    """
    etas = d.etas
    corr = thin_moments(photon_moments(m), etas * np.array(nm.collect))
    spur_mean = etas * np.array(nm.spurious)
    mean = nm.mu * (corr.mean + spur_mean)
    cov = nm.mu * (corr.cov + np.diag(spur_mean * (1 + spur_mean)))
    cov = cov + np.diag(np.square(nm.sigma_el))
    return MomentSet(mean, cov)


class ShotRecord(NamedTuple):
    m1: float
    m2: float
    m3: float


def _draw_block(
    rng: np.random.Generator, size: int, means: ModeMeans, d: DetectionConfig, nm: NoiseModel
) -> np.ndarray:
    # draw order is part of the reproducibility contract; do not reorder
    n1 = means.n1
    if n1 > 0:
        # sum over mu modes of geometric(mean n1) draws
        total1 = rng.negative_binomial(nm.mu, 1.0 / (1.0 + n1), size=size)
        n2 = rng.binomial(total1, min(1.0, means.n2 / n1))
        counts = np.stack([total1, n2, total1 - n2], axis=1)
    else:
        counts = np.zeros((size, 3), dtype=np.int64)

    keep = d.etas * np.array(nm.collect)
    detected = rng.binomial(counts, keep)

    for j, s in enumerate(nm.spurious):
        if s > 0:
            extra = rng.negative_binomial(nm.mu, 1.0 / (1.0 + s), size=size)
            detected[:, j] += rng.binomial(extra, d.etas[j])

    out = detected.astype(float)
    for j, sig in enumerate(nm.sigma_el):
        if sig > 0:
            out[:, j] += rng.normal(0.0, sig, size=size)
    return out


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of one run."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def sample_shot(
    m: ModeMeans, d: DetectionConfig, nm: NoiseModel, rng: np.random.Generator
) -> ShotRecord:
    """Draw a single detected triplet using the caller's generator."""
    return ShotRecord(*(float(v) for v in _draw_block(rng, 1, m, d, nm)[0]))


@dataclass(frozen=True, eq=False)
class ShotSet:
    """Immutable run of detected triplets plus the parameters that made it."""

    records: np.ndarray
    means: Optional[ModeMeans] = None
    detection: Optional[DetectionConfig] = None
    noise: Optional[NoiseModel] = None
    seed: Optional[int] = None
    coupling: Optional[CouplingConfig] = None
    kind: str = "signal"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        rec = np.array(self.records, dtype=float)
        if rec.ndim != 2 or rec.shape[1] != 3:
            raise InvalidParameterError(f"records must have shape (n, 3), got {rec.shape}")
        if not np.all(np.isfinite(rec)):
            raise InvalidParameterError("records must be finite")
        rec.flags.writeable = False
        object.__setattr__(self, "records", rec)

    @property
    def shots(self) -> int:
        return self.records.shape[0]

    def __len__(self) -> int:
        return self.shots

    def __iter__(self) -> Iterator[ShotRecord]:
        for row in self.records:
            yield ShotRecord(*(float(v) for v in row))

    def __getitem__(self, i) -> ShotRecord:
        return ShotRecord(*(float(v) for v in self.records[i]))

    def metadata(self) -> dict:
        meta = {"kind": self.kind, "shots": self.shots, "seed": self.seed}
        if self.coupling is not None:
            meta["coupling"] = asdict(self.coupling)
        if self.means is not None:
            meta["mode_means"] = asdict(self.means)
        if self.detection is not None:
            meta["detection"] = asdict(self.detection)
        if self.noise is not None:
            meta["noise"] = asdict(self.noise)
        meta.update(self.extra)
        return meta


def sample_run(
    m: ModeMeans,
    d: DetectionConfig,
    nm: NoiseModel,
    shots: int,
    seed: int,
    workers: int = 1,
    coupling: Optional[CouplingConfig] = None,
    _stream: int = SIGNAL_STREAM,
) -> ShotSet:
    """Generate ``shots`` detected triplets.

    The output is bit-identical for identical inputs and seed, whatever
    the number of ``workers``.
    """
    shots = int(shots)
    if shots < 1:
        raise InvalidParameterError("shots must be >= 1")
    n_blocks = -(-shots // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, shots - b * BLOCK_SIZE) for b in range(n_blocks)]

    def work(b: int) -> np.ndarray:
        return _draw_block(block_rng(seed, _stream, b), sizes[b], m, d, nm)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(work, range(n_blocks)))
    else:
        blocks = [work(b) for b in range(n_blocks)]
    kind = "dark" if _stream == DARK_STREAM else "signal"
    return ShotSet(np.concatenate(blocks), m, d, nm, int(seed), coupling, kind)


def sample_dark_run(
    d: DetectionConfig, nm: NoiseModel, shots: int, seed: int, workers: int = 1
) -> ShotSet:
    """Acquisition without light: only the electronic noise survives."""
    dark_noise = nm.replace(spurious=(0.0, 0.0, 0.0))
    return sample_run(
        ModeMeans(0.0, 0.0, 0.0), d, dark_noise, shots, seed, workers, _stream=DARK_STREAM
    )


CSV_HEADER = "shot,m1,m2,m3"


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_shotset(s: ShotSet, path) -> None:
    """Write ``shot,m1,m2,m3`` CSV plus a JSON metadata sidecar."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(CSV_HEADER + "\n")
        for i, (a, b, c) in enumerate(s.records):
            fh.write(f"{i},{a:.17g},{b:.17g},{c:.17g}\n")
    sidecar_path(path).write_text(json.dumps(s.metadata(), indent=2, sort_keys=True) + "\n")


def _from_meta(cls, data):
    return None if data is None else cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


def read_shotset(path) -> ShotSet:
    """Inverse of :func:`write_shotset`; the sidecar is optional."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise InvalidParameterError(f"unexpected CSV header {header!r} in {path}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise InvalidParameterError(f"{path} holds no shots")
    records = data[:, 1:4]
    meta_file = sidecar_path(path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    known = {"kind", "shots", "seed", "coupling", "mode_means", "detection", "noise"}
    if "shots" in meta and meta["shots"] != records.shape[0]:
        raise InvalidParameterError("shot count in sidecar does not match CSV")
    return ShotSet(
        records,
        means=_from_meta(ModeMeans, meta.get("mode_means")),
        detection=_from_meta(DetectionConfig, meta.get("detection")),
        noise=_from_meta(NoiseModel, meta.get("noise")),
        seed=meta.get("seed"),
        coupling=_from_meta(CouplingConfig, meta.get("coupling")),
        kind=meta.get("kind", "signal"),
        extra={k: v for k, v in meta.items() if k not in known},
    )

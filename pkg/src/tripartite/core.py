"""Couplings and mean-photon dynamics of the two interlinked interactions.

The downconversion link (coupling ``g1``) creates photon pairs in modes 1
and 3; the upconversion link (coupling ``g2``) moves photons from mode 3 to
mode 2.  Starting from vacuum, the mean photon numbers obey
``n1 = n2 + n3`` at all times.

The evolution parameter is exposed as an interaction length ``z``.  Time
and length are interchangeable: ``sqrt(g2 - g1) * t`` maps onto
``sqrt(gamma2 - gamma1) * z`` with the couplings then measured in
inverse squared length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameterError

#: Relative width of the band around ``g1_sq == g2_sq`` classified as degenerate.
DEGENERATE_TOL = 1e-7
#: Relative tolerance on ``|n1 - n2 - n3|`` accepted by consistency checks.
CONSERVATION_TOL = 1e-9
# below this |Omega z|^2 the power series is used; 14 terms reach round-off
_SERIES_SWITCH = 0.5
_SERIES_TERMS = 14


class Regime(str, Enum):
    OSCILLATORY = "oscillatory"
    EXPONENTIAL = "exponential"
    DEGENERATE = "degenerate"


def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InvalidParameterError(f"{name} must be finite and >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class CouplingConfig:
    """Squared couplings of both links and the interaction length.

    Attributes
    ----------
    g1_sq : float
        Squared downconversion coupling (m^-2).
    g2_sq : float
        Squared upconversion coupling (m^-2).
    z : float
        Effective interaction length (m).
    """

    g1_sq: float
    g2_sq: float
    z: float = 1.0

    def __post_init__(self):
        for name in ("g1_sq", "g2_sq", "z"):
            object.__setattr__(self, name, _check_nonneg(name, getattr(self, name)))

    @property
    def omega_sq(self) -> float:
        """Signed ``g2_sq - g1_sq``; positive means oscillatory dynamics."""
        return self.g2_sq - self.g1_sq

    @property
    def omega(self) -> float:
        """Oscillation (or growth) rate ``sqrt(|g2_sq - g1_sq|)``."""
        return math.sqrt(abs(self.omega_sq))

    @property
    def regime(self) -> Regime:
        return classify_regime(self.g1_sq, self.g2_sq)


def classify_regime(g1_sq: float, g2_sq: float) -> Regime:
    if abs(g2_sq - g1_sq) <= DEGENERATE_TOL * max(g1_sq, g2_sq, 1.0):
        return Regime.DEGENERATE
    return Regime.OSCILLATORY if g2_sq > g1_sq else Regime.EXPONENTIAL


@dataclass(frozen=True)
class ModeMeans:
    """Mean photon numbers per temporal mode of the three generated fields."""

    n1: float
    n2: float
    n3: float

    def __post_init__(self):
        for name in ("n1", "n2", "n3"):
            object.__setattr__(self, name, _check_nonneg(name, getattr(self, name)))

    @classmethod
    def from_pair(cls, n2: float, n3: float) -> "ModeMeans":
        """Build the vacuum-seeded triple ``(n2 + n3, n2, n3)``."""
        return cls(n2 + n3, n2, n3)

    @property
    def total(self) -> float:
        return self.n1 + self.n2 + self.n3

    @property
    def fractions(self) -> tuple[float, float, float]:
        """Photon fractions ``n_j / total``; raises for the vacuum."""
        tot = self.total
        if tot <= 0:
            raise InvalidParameterError("fractions undefined for zero total photon number")
        return (self.n1 / tot, self.n2 / tot, self.n3 / tot)

    @property
    def conservation_defect(self) -> float:
        return conservation_defect(self)

    def is_consistent(self, tol: float = CONSERVATION_TOL) -> bool:
        return self.conservation_defect <= tol * (1.0 + self.n1)

    def as_array(self) -> np.ndarray:
        return np.array([self.n1, self.n2, self.n3])


def conservation_defect(m: ModeMeans) -> float:
    """Violation ``|n1 - n2 - n3|`` of the constant of motion."""
    return abs(m.n1 - m.n2 - m.n3)


def _shape_factors(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``sin(x)/x`` and ``(1 - cos x)/x**2`` with ``x**2 = u``.

    Negative ``u`` continues analytically to the hyperbolic functions.  Both
    factors are entire in ``u``, so the power series takes over near zero
    where the closed forms cancel catastrophically.
    """
    u = np.asarray(u, dtype=float)
    s1 = np.empty_like(u)
    s2 = np.empty_like(u)

    small = np.abs(u) < _SERIES_SWITCH
    if np.any(small):
        us = u[small]
        term1 = np.ones_like(us)
        term2 = np.full_like(us, 0.5)
        acc1 = term1.copy()
        acc2 = term2.copy()
        for k in range(1, _SERIES_TERMS):
            term1 = term1 * (-us) / ((2 * k) * (2 * k + 1))
            term2 = term2 * (-us) / ((2 * k + 1) * (2 * k + 2))
            acc1 += term1
            acc2 += term2
        s1[small] = acc1
        s2[small] = acc2

    osc = (~small) & (u > 0)
    if np.any(osc):
        x = np.sqrt(u[osc])
        s1[osc] = np.sin(x) / x
        s2[osc] = 2.0 * np.sin(0.5 * x) ** 2 / u[osc]

    exp_ = (~small) & (u < 0)
    if np.any(exp_):
        x = np.sqrt(-u[exp_])
        with np.errstate(over="ignore"):
            s1[exp_] = np.sinh(x) / x
            s2[exp_] = 2.0 * np.sinh(0.5 * x) ** 2 / x**2
    return s1, s2


def mode_means_arrays(g1_sq, g2_sq, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised ``(n1, n2, n3)`` over broadcastable coupling arrays.

    No validation is performed; overflowing configurations yield ``inf``.
    """
    g1 = np.asarray(g1_sq, dtype=float)
    g2 = np.asarray(g2_sq, dtype=float)
    z = np.asarray(z, dtype=float)
    g1, g2, z = np.broadcast_arrays(g1, g2, z)
    z2 = z * z
    s1, s2 = _shape_factors((g2 - g1) * z2)
    with np.errstate(over="ignore", invalid="ignore"):
        n3 = g1 * z2 * s1 * s1
        n2 = g1 * g2 * (z2 * s2) ** 2
    return n2 + n3, n2, n3


def mode_means(c: CouplingConfig) -> ModeMeans:
    """Mean photon numbers after evolving the vacuum over length ``c.z``.

    With ``W**2 = g2_sq - g1_sq`` the closed forms are
    ``n3 = g1_sq sin^2(W z) / W^2`` and
    ``n2 = g1_sq g2_sq (cos(W z) - 1)^2 / W^4``; for ``g1_sq > g2_sq`` the
    trigonometric functions become hyperbolic, and at ``W = 0`` the limits
    ``n3 = g1_sq z^2``, ``n2 = g1_sq g2_sq z^4 / 4`` hold.

    Raises
    ------
    InvalidParameterError
        If the configuration overflows double precision.
    """
    n1, n2, n3 = (float(a) for a in mode_means_arrays(c.g1_sq, c.g2_sq, c.z))
    if not (math.isfinite(n1) and math.isfinite(n2) and math.isfinite(n3)):
        raise InvalidParameterError(f"mean photon numbers overflow for {c}")
    return ModeMeans(n1, n2, n3)

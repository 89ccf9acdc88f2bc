"""Pure-loss and thermal-loss fiber channel parameters (shot-noise units)."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, SingularityError

DEFAULT_KAPPA = 0.2  # dB/km


@dataclass(frozen=True)
class ChannelParams:
    """Beam-splitter channel of transmissivity ``eta`` with excess noise ``epsilon``.

    ``eta`` is derived from ``distance_km`` and ``kappa_db_per_km`` on demand.
    The thermal part is emulated by an entangling cloner injecting a thermal
    state with ``nbar_eps`` photons into the free beam-splitter port.
    """

    distance_km: float
    kappa_db_per_km: float = DEFAULT_KAPPA
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.distance_km >= 0:
            raise DomainError(f"distance must be >= 0 km, got {self.distance_km!r}")
        if not self.kappa_db_per_km > 0:
            raise DomainError(f"kappa must be > 0, got {self.kappa_db_per_km!r}")
        if not self.epsilon >= 0:
            raise DomainError(f"excess noise must be >= 0, got {self.epsilon!r}")
        if self.epsilon > 0 and self.distance_km == 0:
            raise SingularityError("excess noise needs eta < 1 (distance > 0)")

    @property
    def eta(self) -> float:
        return 10.0 ** (-0.1 * self.kappa_db_per_km * self.distance_km)

    @property
    def nbar_eps(self) -> float:
        if self.epsilon == 0:
            return 0.0
        eta = self.eta
        return eta * self.epsilon / (2.0 * (1.0 - eta))

    @property
    def v_eps(self) -> float:
        """Quadrature variance of each arm of the cloner's TMSV."""
        return 1.0 + 2.0 * self.nbar_eps

    @property
    def sigma_eps_sq(self) -> float:
        """Bob's homodyne variance given the symbol: 1 + eta * epsilon."""
        return 1.0 + self.eta * self.epsilon

    @property
    def is_pure_loss(self) -> bool:
        return self.epsilon == 0

    def with_distance(self, distance_km: float) -> "ChannelParams":
        return ChannelParams(distance_km, self.kappa_db_per_km, self.epsilon)


def from_distance(d_km: float, kappa: float = DEFAULT_KAPPA, epsilon: float = 0.0) -> ChannelParams:
    return ChannelParams(float(d_km), float(kappa), float(epsilon))


def distance_for_eta(eta: float, kappa: float = DEFAULT_KAPPA) -> float:
    """Inverse of ``eta = 10**(-0.1 kappa d)``."""
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta!r}")
    return -10.0 * math.log10(eta) / kappa

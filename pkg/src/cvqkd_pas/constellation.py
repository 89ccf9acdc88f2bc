"""Discrete QAM/PSK constellations and the Gaussian (GG02) source descriptor.

Amplitudes are coherent-state amplitudes ``x + iy`` in shot-noise units, so a
symbol ``x + iy`` has mean photon number ``x**2 + y**2`` and q-quadrature mean
``2x``.  The QAM lattice has spacing ``delta`` between adjacent points (not
``2*delta`` as in the usual communications convention).

Probabilistic shaping uses Maxwell-Boltzmann weights ``exp(-beta z**2)``.
Since ``z = n*delta`` the weights only depend on ``nu = beta*delta**2``; fixing
``nu`` first turns the energy constraint into a closed form for ``delta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import DomainError

QAM_UNIFORM = "QAM-uniform"
QAM_MB = "QAM-MB"
PSK = "PSK"
GG02 = "GG02-descriptor"

KINDS = (QAM_UNIFORM, QAM_MB, PSK, GG02)


def _check_levels(M: int) -> None:
    if not isinstance(M, (int, np.integer)) or M < 2 or (M & (M - 1)) != 0:
        raise DomainError(f"M must be a power of two >= 2, got {M!r}")


def lattice_indices(M: int) -> list[Fraction]:
    """Half-integer lattice indices -(M-1)/2, ..., (M-1)/2 as exact rationals."""
    _check_levels(M)
    return [Fraction(2 * i - (M - 1), 2) for i in range(M)]


@dataclass(frozen=True)
class Lattice1D:
    M: int
    delta: float

    def __post_init__(self):
        _check_levels(self.M)
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta!r}")

    @cached_property
    def indices(self) -> np.ndarray:
        return np.array([float(n) for n in lattice_indices(self.M)])

    @cached_property
    def points(self) -> np.ndarray:
        # scale exact rationals once, so the lattice is exactly symmetric
        return np.array([float(n) * self.delta for n in lattice_indices(self.M)])


@dataclass(frozen=True)
class ShapedDistribution1D:
    """Maxwell-Boltzmann weights over the M lattice levels."""

    weights: np.ndarray
    beta: float
    nu: float

    @property
    def M(self) -> int:
        return len(self.weights)

    def second_moment_index(self) -> float:
        """E[n**2] under the weights, with n the half-integer level index."""
        n = np.array([float(k) for k in lattice_indices(self.M)])
        return float(np.dot(self.weights, n * n))


def mb_weights(nu: float, M: int) -> ShapedDistribution1D:
    """Maxwell-Boltzmann weights ``w_n ~ exp(-nu n**2)`` over the M levels.

    ``beta`` is left as NaN here; it is fixed once the spacing is known
    (see :func:`solve_delta_mb`).
    """
    if not nu >= 0:
        raise DomainError(f"nu must be >= 0, got {nu!r}")
    _check_levels(M)
    n = np.array([float(k) for k in lattice_indices(M)])
    # shift by the smallest exponent (n = +-1/2) so large nu cannot underflow
    logw = -nu * (n * n - 0.25)
    w = np.exp(logw)
    w /= w.sum()
    # enforce exact mirror symmetry
    w = 0.5 * (w + w[::-1])
    w /= w.sum()
    return ShapedDistribution1D(weights=w, beta=float("nan"), nu=float(nu))


def solve_delta_uniform(M: int, nbar: float) -> float:
    """Spacing for uniform QAM with mean energy ``nbar``: sqrt(6 nbar / (M^2 - 1))."""
    _check_levels(M)
    if not nbar > 0:
        raise DomainError(f"nbar must be positive, got {nbar!r}")
    return float(np.sqrt(6.0 * nbar / (M * M - 1)))


def solve_delta_mb(nu: float, M: int, nbar: float) -> tuple[float, float]:
    """Spacing and inverse temperature meeting the MB energy constraint.

    Per quadrature the variance must be ``nbar/2``, i.e.
    ``delta**2 * E_nu[n**2] = nbar/2``.

    Returns
    -------
    delta, beta : float
        ``beta = nu / delta**2``.
    """
    if not nbar > 0:
        raise DomainError(f"nbar must be positive, got {nbar!r}")
    dist = mb_weights(nu, M)
    en2 = dist.second_moment_index()
    delta = float(np.sqrt(nbar / (2.0 * en2)))
    return delta, float(nu) / delta**2


@dataclass(frozen=True)
class Constellation:
    """Symbols with their emission probabilities.

    For ``kind == GG02`` the symbol list is empty and ``mean_energy`` holds
    ``nbar = 2 Sigma**2`` of the Gaussian source.
    """

    symbols: np.ndarray
    probs: np.ndarray
    kind: str
    mean_energy: float
    M: int = 0
    delta: float = float("nan")
    beta: float = 0.0
    nu: float = 0.0

    @property
    def is_discrete(self) -> bool:
        return self.kind != GG02

    def __len__(self) -> int:
        return len(self.symbols)

    @cached_property
    def x_marginal(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct real parts and their summed probabilities.

        Homodyne of q only sees the real part of the amplitude, so this is
        all the classical side needs.
        """
        if not self.is_discrete:
            raise DomainError("GG02 descriptor has no discrete symbols")
        x = np.round(self.symbols.real, 12)
        xs, inv = np.unique(x, return_inverse=True)
        px = np.zeros(len(xs))
        np.add.at(px, inv, self.probs)
        # representative exact value per class
        rep = np.zeros(len(xs))
        rep[inv] = self.symbols.real
        return rep, px

    def energy(self) -> float:
        if not self.is_discrete:
            return self.mean_energy
        return float(np.dot(self.probs, np.abs(self.symbols) ** 2))


def build_qam(M: int, nbar: float, nu: float = 0.0) -> Constellation:
    """Square M x M QAM with product Maxwell-Boltzmann probabilities.

    ``nu = 0`` gives the uniform constellation with the closed-form spacing.
    """
    if nu == 0:
        delta = solve_delta_uniform(M, nbar)
        w = np.full(M, 1.0 / M)
        beta = 0.0
        kind = QAM_UNIFORM
    else:
        delta, beta = solve_delta_mb(nu, M, nbar)
        w = mb_weights(nu, M).weights
        kind = QAM_MB
    z = Lattice1D(M, delta).points
    x, y = np.meshgrid(z, z, indexing="ij")
    symbols = (x + 1j * y).ravel()
    probs = np.outer(w, w).ravel()
    return Constellation(
        symbols=symbols,
        probs=probs,
        kind=kind,
        mean_energy=float(nbar),
        M=M,
        delta=delta,
        beta=beta,
        nu=float(nu),
    )


def build_psk(N: int, nbar: float) -> Constellation:
    """N-PSK at phases (2k+1) pi / N with modulus sqrt(nbar), uniform probabilities."""
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise DomainError(f"PSK needs N >= 2 symbols, got {N!r}")
    if not nbar > 0:
        raise DomainError(f"nbar must be positive, got {nbar!r}")
    k = np.arange(N)
    symbols = np.sqrt(nbar) * np.exp(1j * (2 * k + 1) * np.pi / N)
    return Constellation(
        symbols=symbols,
        probs=np.full(N, 1.0 / N),
        kind=PSK,
        mean_energy=float(nbar),
        M=N,
    )


def gg02_source(nbar: float) -> Constellation:
    """Gaussian-modulated source; a thermal state with mean photon number nbar."""
    if not nbar >= 0:
        raise DomainError(f"nbar must be >= 0, got {nbar!r}")
    return Constellation(
        symbols=np.zeros(0, dtype=complex),
        probs=np.zeros(0),
        kind=GG02,
        mean_energy=float(nbar),
    )


def single_symbol(alpha: complex = 0.0) -> Constellation:
    """Degenerate one-symbol constellation; mainly a test fixture."""
    return Constellation(
        symbols=np.array([complex(alpha)]),
        probs=np.array([1.0]),
        kind=PSK,
        mean_energy=abs(alpha) ** 2,
        M=1,
    )

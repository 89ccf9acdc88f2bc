"""Truncated Fock-space density matrices and von Neumann entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CutoffError, DomainError, PhysicalityError
from .gaussian_engine import DEFAULT_CUTOFF_CAP, poisson_cutoff

EIG_CLAMP = 1e-9
MAX_TRACE_DEFICIT = 1e-6


@dataclass(frozen=True)
class FockDensityMatrix:
    mat: np.ndarray
    trace_deficit: float
    cutoff: int

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


def coherent_vector(alpha: complex, cutoff: int) -> np.ndarray:
    """Fock amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)`` for n = 0..cutoff."""
    if cutoff < 0:
        raise DomainError("cutoff must be >= 0")
    v = np.empty(cutoff + 1, dtype=complex)
    v[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, cutoff + 1):
        v[n] = v[n - 1] * alpha / math.sqrt(n)
    return v


def coherent_overlap(alpha, beta):
    """``<alpha|beta>`` in closed form (broadcasts)."""
    alpha, beta = np.asarray(alpha), np.asarray(beta)
    return np.exp(-0.5 * np.abs(alpha) ** 2 - 0.5 * np.abs(beta) ** 2 + np.conj(alpha) * beta)


def displacement_matrix(delta, cutoff: int) -> np.ndarray:
    """``<m|D(delta)|n>`` for m, n <= cutoff; ``delta`` may be an array.

    Uses ``D a D^dag = a - delta`` and its adjoint, column by column, which
    never forms factorials.
    """
    delta = np.asarray(delta, dtype=complex)
    c = cutoff + 1
    out = np.zeros(delta.shape + (c, c), dtype=complex)
    out[..., 0, 0] = np.exp(-0.5 * np.abs(delta) ** 2)
    for m in range(1, c):
        out[..., m, 0] = out[..., m - 1, 0] * delta / math.sqrt(m)
    dc = np.conj(delta)[..., None]
    sq = np.sqrt(np.arange(c, dtype=float))
    for n in range(c - 1):
        col = -dc * out[..., :, n]
        col[..., 1:] += sq[1:] * out[..., :-1, n]
        out[..., :, n + 1] = col / math.sqrt(n + 1)
    return out


def _auto_cutoff(amplitudes: np.ndarray, cap: int) -> int:
    mu = float(np.max(np.abs(amplitudes) ** 2)) if len(amplitudes) else 0.0
    return poisson_cutoff(mu, cap)


def mixture_of_coherent(
    amplitudes: Sequence[complex],
    weights: Sequence[float],
    cutoff: int | None = None,
    cap: int = 4 * DEFAULT_CUTOFF_CAP,
    max_deficit: float = MAX_TRACE_DEFICIT,
) -> FockDensityMatrix:
    """``sum_i w_i |a_i><a_i|`` truncated at ``cutoff`` photons.

    With ``cutoff=None`` the cutoff follows the photon-number rule for the
    largest amplitude and is raised once by 50% if the deficit is too large.
    """
    amps = np.asarray(amplitudes, dtype=complex).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if amps.shape != w.shape:
        raise DomainError("amplitudes and weights differ in length")
    if np.any(w < 0) or w.sum() > 1 + 1e-12:
        raise DomainError("weights must be nonnegative and sum to at most 1")
    auto = cutoff is None
    if auto:
        cutoff = _auto_cutoff(amps, cap)
    for attempt in range(2):
        vecs = np.stack([coherent_vector(a, cutoff) for a in amps]) if len(amps) else np.zeros((0, cutoff + 1))
        mat = (vecs.T * w) @ vecs.conj()
        deficit = float(w.sum() - np.trace(mat).real)
        if deficit <= max_deficit or not auto or attempt == 1:
            break
        cutoff = int(math.ceil(1.5 * cutoff))
    if deficit > max_deficit:
        raise CutoffError(
            f"trace deficit {deficit:.3e} exceeds {max_deficit:.0e} at cutoff {cutoff}",
            suggested_cutoff=int(math.ceil(1.5 * cutoff)),
        )
    return FockDensityMatrix(mat=mat, trace_deficit=max(deficit, 0.0), cutoff=cutoff)


def entropy_from_eigenvalues(evals: np.ndarray) -> np.ndarray:
    """Entropy in bits of (stacked) spectra along the last axis.

    Values in ``[-EIG_CLAMP, 0)`` are rounding noise and count as zero;
    anything more negative is unphysical.
    """
    evals = np.asarray(evals, dtype=float)
    if np.any(evals < -EIG_CLAMP):
        raise PhysicalityError(f"eigenvalue {evals.min():.3e} below -{EIG_CLAMP}")
    lam = np.where(evals > 0, evals, 1.0)
    return -np.sum(np.where(evals > 0, evals * np.log2(lam), 0.0), axis=-1)


def von_neumann_entropy(rho) -> float:
    """``-Tr(rho log2 rho)`` via Hermitian eigendecomposition."""
    mat = rho.mat if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    mat = 0.5 * (mat + mat.conj().T)
    return float(entropy_from_eigenvalues(np.linalg.eigvalsh(mat)))


def thermal_entropy(nbar: float) -> float:
    """``g(n) = (n+1) log2(n+1) - n log2 n``."""
    if nbar <= 0:
        return 0.0
    return (nbar + 1) * math.log2(nbar + 1) - nbar * math.log2(nbar)


def trace_distance(rho, sigma) -> float:
    a = rho.mat if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    b = sigma.mat if isinstance(sigma, FockDensityMatrix) else np.asarray(sigma)
    d = a - b
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))

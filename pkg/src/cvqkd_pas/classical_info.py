"""Bob's homodyne statistics and the Alice-Bob mutual information."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .constellation import Constellation
from .errors import NumericalError, UnsupportedError
from .numerics import DEFAULT_GRID, GridPolicy, QuadratureGrid, xlog2x


@dataclass(frozen=True)
class MutualInfoResult:
    i_ab: float
    h_b: float
    h_b_given_a: float


def p_b_given_a(x_b, x_a, channel: ChannelParams):
    """Density of Bob's q outcome given Alice's real amplitude ``x_a``."""
    var = channel.sigma_eps_sq
    mean = 2.0 * math.sqrt(channel.eta) * np.asarray(x_a)
    return np.exp(-((np.asarray(x_b) - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _require_discrete(constellation: Constellation) -> None:
    if not constellation.is_discrete:
        raise UnsupportedError("GG02 descriptor: use the closed-form routines")


def p_b(x_b, constellation: Constellation, channel: ChannelParams):
    """Bob's outcome density averaged over the constellation."""
    _require_discrete(constellation)
    xs, px = constellation.x_marginal
    x_b = np.asarray(x_b, dtype=float)
    cond = p_b_given_a(x_b[..., None], xs, channel)
    return cond @ px


def bob_grid(
    constellation: Constellation, channel: ChannelParams, policy: GridPolicy = DEFAULT_GRID
) -> QuadratureGrid:
    xs, _ = constellation.x_marginal
    scale = 2.0 * math.sqrt(channel.eta)
    return policy.grid(scale * xs.min(), scale * xs.max(), math.sqrt(channel.sigma_eps_sq))


def conditional_table(
    constellation: Constellation, channel: ChannelParams, grid: QuadratureGrid
) -> np.ndarray:
    """``p(x_B | x_A)`` for every distinct real amplitude (rows) and grid node (columns)."""
    xs, _ = constellation.x_marginal
    return p_b_given_a(grid.points[None, :], xs[:, None], channel)


def mutual_information(
    constellation: Constellation,
    channel: ChannelParams,
    grid_policy: GridPolicy = DEFAULT_GRID,
) -> MutualInfoResult:
    """Alice-Bob mutual information in bits for homodyne detection of q.

    ``H(B|A)`` is the entropy of a Gaussian of variance ``1 + eta*eps``; the
    output entropy is integrated with composite Simpson on a grid covering all
    symbol means plus ``tail_sigmas`` standard deviations.
    """
    _require_discrete(constellation)
    grid = bob_grid(constellation, channel, grid_policy)
    _, px = constellation.x_marginal
    pb = px @ conditional_table(constellation, channel, grid)
    if not np.all(np.isfinite(pb)):
        raise NumericalError("non-finite output density on the quadrature grid")
    h_b = -grid.integrate(xlog2x(pb))
    h_ba = 0.5 * math.log2(2.0 * math.pi * math.e * channel.sigma_eps_sq)
    i_ab = h_b - h_ba
    if -1e-9 <= i_ab < 0:
        i_ab = 0.0
    return MutualInfoResult(i_ab=i_ab, h_b=h_b, h_b_given_a=h_ba)


def gg02_mutual_information(nbar: float, channel: ChannelParams) -> float:
    """Gaussian-modulation mutual information, 0.5 log2(1 + 2 eta nbar)."""
    if not channel.is_pure_loss:
        raise UnsupportedError("GG02 closed form is only provided for the pure-loss channel")
    return 0.5 * math.log2(1.0 + 2.0 * channel.eta * nbar)


def awgn_capacity(nbar: float, channel: ChannelParams) -> float:
    """Homodyne capacity ceiling 0.5 log2(1 + 2 eta nbar / sigma_eps^2)."""
    return 0.5 * math.log2(1.0 + 2.0 * channel.eta * nbar / channel.sigma_eps_sq)

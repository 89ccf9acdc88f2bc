"""Eve's Holevo information on Bob's homodyne data (reverse reconciliation).

Every state Eve holds, conditioned or not, is a mixture of one base state
displaced per symbol: ``rho = sum_j w_j D(a_j) rho_0 D(a_j)^dag``.  Writing
``rho_0 = sum_k l_k |phi_k><phi_k|`` the vectors ``sqrt(w_j l_k) D(a_j)|phi_k>``
purify ``rho`` and their Gram matrix has the same nonzero spectrum.  Overlaps
only need ``<phi_k| D(a_j' - a_j) |phi_k'>`` on the small support of the base
state, so no large Fock cutoff is required for far-displaced symbols.

Conditioning on Bob's outcome only reweights the symbols (plus a displacement
common to all of them, which leaves the spectrum unchanged), so the overlap
matrix is built once per operating point and reused at every quadrature node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gaussian_engine as ge
from .channel import ChannelParams
from .classical_info import bob_grid, p_b_given_a
from .constellation import Constellation
from .errors import CutoffError, DomainError, UnsupportedError
from .fock_space import (
    coherent_overlap,
    coherent_vector,
    displacement_matrix,
    entropy_from_eigenvalues,
    mixture_of_coherent,
)
from .numerics import DEFAULT_GRID, GridPolicy

NODE_DROP = 1e-12  # relative to max p_B
BASE_EIG_FLOOR = 1e-13
_NODE_CHUNK = 128


@dataclass(frozen=True)
class HolevoResult:
    chi: float
    s_total: float
    s_cond_avg: float
    cutoff_used: int
    grid_points: int


def _finish(s_total: float, s_cond: float, cutoff: int, nodes: int) -> HolevoResult:
    chi = s_total - s_cond
    if -1e-9 <= chi < 0:
        chi = 0.0
    return HolevoResult(chi=chi, s_total=s_total, s_cond_avg=s_cond, cutoff_used=cutoff, grid_points=nodes)


def _gram_entropy(overlap: np.ndarray, weights: np.ndarray) -> float:
    """Entropy of ``sum_j w_j rho_j`` from the member overlap tensor ``(N, K, N, K)``."""
    n, k = overlap.shape[:2]
    s = np.repeat(np.sqrt(weights), k)
    g = overlap.reshape(n * k, n * k) * np.outer(s, s)
    return float(entropy_from_eigenvalues(np.linalg.eigvalsh(g)))


def _conditional_entropies(overlap: np.ndarray, node_weights: np.ndarray) -> np.ndarray:
    """Entropies for each row of ``node_weights`` (nodes x N)."""
    n, k = overlap.shape[:2]
    g0 = overlap.reshape(n * k, n * k)
    out = np.empty(node_weights.shape[0])
    for lo in range(0, node_weights.shape[0], _NODE_CHUNK):
        s = np.repeat(np.sqrt(node_weights[lo : lo + _NODE_CHUNK]), k, axis=1)
        g = g0[None, :, :] * s[:, :, None] * s[:, None, :]
        out[lo : lo + _NODE_CHUNK] = entropy_from_eigenvalues(np.linalg.eigvalsh(g))
    return out


def _node_weights(constellation: Constellation, channel: ChannelParams, grid_points: np.ndarray, var: float | None = None):
    """Per-node posterior symbol weights and ``p_B`` on the kept nodes."""
    x = constellation.symbols.real
    mean = 2.0 * math.sqrt(channel.eta) * x
    var = channel.sigma_eps_sq if var is None else var
    like = np.exp(-((grid_points[None, :] - mean[:, None]) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    joint = constellation.probs[:, None] * like
    pb = joint.sum(axis=0)
    keep = pb >= NODE_DROP * pb.max()
    post = (joint[:, keep] / pb[keep]).T
    return post, pb, keep


def _average_conditional(overlap, constellation, channel, grid_policy) -> tuple[float, int]:
    grid = bob_grid(constellation, channel, grid_policy)
    post, pb, keep = _node_weights(constellation, channel, grid.points)
    s_nodes = _conditional_entropies(overlap, post)
    s_cond = float(np.dot(grid.weights[keep] * pb[keep], s_nodes))
    return s_cond, grid.n_points


# ---------------------------------------------------------------------------
# pure-loss channel


def eve_amplitudes_pure_loss(constellation: Constellation, channel: ChannelParams) -> np.ndarray:
    return math.sqrt(1.0 - channel.eta) * constellation.symbols


def holevo_pure_loss(
    constellation: Constellation,
    channel: ChannelParams,
    grid_policy: GridPolicy = DEFAULT_GRID,
    method: str = "gram",
    cutoff: int | None = None,
) -> HolevoResult:
    """Holevo information for the pure-loss wiretap channel.

    Eve holds ``|sqrt(1-eta) alpha>`` for each symbol.  ``method="gram"`` uses
    closed-form coherent overlaps (exact, no truncation); ``method="fock"``
    builds truncated Fock matrices and is kept as an independent check.
    """
    if not constellation.is_discrete:
        raise UnsupportedError("use gg02_holevo for the Gaussian source")
    if not channel.is_pure_loss:
        raise DomainError("holevo_pure_loss needs epsilon = 0")
    amps = eve_amplitudes_pure_loss(constellation, channel)
    if method == "gram":
        overlap = coherent_overlap(amps[:, None], amps[None, :])[:, None, :, None]
        s_total = _gram_entropy(overlap, constellation.probs)
        s_cond, nodes = _average_conditional(overlap, constellation, channel, grid_policy)
        return _finish(s_total, s_cond, 0, nodes)
    if method == "fock":
        return _holevo_pure_loss_fock(constellation, channel, grid_policy, amps, cutoff)
    raise DomainError(f"unknown method {method!r}")


def _holevo_pure_loss_fock(constellation, channel, grid_policy, amps, cutoff) -> HolevoResult:
    rho_e = mixture_of_coherent(amps, constellation.probs, cutoff=cutoff)
    c = rho_e.cutoff
    s_total = float(entropy_from_eigenvalues(np.linalg.eigvalsh(rho_e.mat)))
    vecs = np.stack([coherent_vector(a, c) for a in amps])
    grid = bob_grid(constellation, channel, grid_policy)
    post, pb, keep = _node_weights(constellation, channel, grid.points)
    s_nodes = np.empty(post.shape[0])
    for lo in range(0, post.shape[0], _NODE_CHUNK):
        w = post[lo : lo + _NODE_CHUNK]
        rho = np.einsum("xj,ja,jb->xab", w, vecs, vecs.conj())
        s_nodes[lo : lo + _NODE_CHUNK] = entropy_from_eigenvalues(np.linalg.eigvalsh(rho))
    s_cond = float(np.dot(grid.weights[keep] * pb[keep], s_nodes))
    return _finish(s_total, s_cond, c, grid.n_points)


def eve_conditional_pure_loss_fock(constellation, channel, x_b: float, cutoff: int):
    """``rho_{E|x_B}`` and ``p_B(x_B)`` in a truncated Fock basis (test helper)."""
    amps = eve_amplitudes_pure_loss(constellation, channel)
    like = p_b_given_a(x_b, constellation.symbols.real, channel)
    joint = constellation.probs * like
    pb = float(joint.sum())
    vecs = np.stack([coherent_vector(a, cutoff) for a in amps])
    return (vecs.T * (joint / pb)) @ vecs.conj(), pb


# ---------------------------------------------------------------------------
# thermal-loss channel (entangling cloner)


def eve_states_thermal(x_a: float, y_a: float, channel: ChannelParams):
    """Eve's two-mode state for one symbol and the homodyne conditioning map.

    Modes are (Bob, E1, E2): Alice's coherent state meets arm E1 of the
    cloner's TMSV on the channel beam splitter; Eve keeps the reflected E1
    and the untouched E2.

    Returns
    -------
    rho_e : GaussianState
        Eve's unconditional state (modes E1, E2).
    update : HomodyneUpdate
        Conditioning map for a q-homodyne outcome of Bob; ``update.state(x)``
        is Eve's conditional state, ``update.density(x)`` the outcome density.
    """
    if channel.epsilon <= 0 or channel.eta >= 1:
        raise DomainError("the entangling cloner needs epsilon > 0 and eta < 1")
    joint = ge.direct_sum(ge.coherent(x_a, y_a), ge.tmsv(channel.v_eps))
    joint = ge.evolve(joint, ge.beam_splitter(channel.eta, 3, (0, 1)))
    return joint.reduced([1, 2]), ge.homodyne_q_update(joint, 0)


def _base_decomposition(cm: np.ndarray, cap: int):
    """Eigen-decomposition of the zero-mean Gaussian state with covariance ``cm``."""
    base = ge.GaussianState(np.zeros(cm.shape[0]), cm)
    rho, cuts = ge.fock_density_matrix_auto(base, cap=cap)
    lam, vec = np.linalg.eigh(rho)
    keep = lam > BASE_EIG_FLOOR * lam.max()
    lam, vec = lam[keep], vec[:, keep]
    phis = vec.T.reshape((len(lam),) + tuple(c + 1 for c in cuts))
    return lam, phis, cuts


def _displaced_overlap(lam: np.ndarray, phis: np.ndarray, amps: np.ndarray, cuts) -> np.ndarray:
    """``sqrt(l_k l_k') <phi_k| D(a_j)^dag D(a_j') |phi_k'>`` as an (N, K, N, K) tensor."""
    n_modes = amps.shape[1]
    diff = amps[None, :, :] - amps[:, None, :]
    phase = np.exp(1j * np.imag(np.sum(np.conj(amps)[:, None, :] * amps[None, :, :], axis=-1)))
    n, k = amps.shape[0], phis.shape[0]
    dmats = [displacement_matrix(diff[:, :, m], cuts[m]).reshape((n * n,) + (cuts[m] + 1,) * 2) for m in range(n_modes)]
    if n_modes == 1:
        t = phis.conj() @ dmats[0]  # (nn, K, c)
    elif n_modes == 2:
        # sum_a D1[a, c] conj(phi)[k, a, b] -> (nn, K, c, b), then b -> d with D2
        t = np.swapaxes(dmats[0], 1, 2)[:, None] @ phis.conj()[None]
        t = t @ dmats[1][:, None]
    else:
        raise DomainError("only one- and two-mode ensembles are supported")
    ov = t.reshape(n * n, k, -1) @ phis.reshape(k, -1).T
    ov = ov.reshape(n, n, k, k).transpose(0, 2, 1, 3)
    sl = np.sqrt(lam)
    ov = ov * phase[:, None, :, None] * sl[None, :, None, None] * sl[None, None, None, :]
    # Hermitian by construction; symmetrize rounding
    g = ov.reshape(n * k, n * k)
    g = 0.5 * (g + g.conj().T)
    return g.reshape(n, k, n, k)


@dataclass(frozen=True)
class ThermalEnsemble:
    """Displacements and base states describing Eve's thermal-channel ensemble."""

    uncond_amps: np.ndarray  # (N, 2) complex
    cond_amps: np.ndarray  # (N, 2) complex, common x_B shift removed
    uncond_cm: np.ndarray
    cond_cm: np.ndarray
    q_var: float


def thermal_ensemble(constellation: Constellation, channel: ChannelParams) -> ThermalEnsemble:
    ua, ca = [], []
    ref_e, ref_u = eve_states_thermal(0.0, 0.0, channel)
    for s in constellation.symbols:
        rho_e, upd = eve_states_thermal(s.real, s.imag, channel)
        ua.append(rho_e.complex_amplitudes())
        shifted = upd.fm_rest - upd.gain * upd.q_mean
        ca.append(0.5 * (shifted[0::2] + 1j * shifted[1::2]))
    return ThermalEnsemble(
        uncond_amps=np.array(ua),
        cond_amps=np.array(ca),
        uncond_cm=ref_e.cm,
        cond_cm=ref_u.cond_cm,
        q_var=ref_u.q_var,
    )


def holevo_thermal(
    constellation: Constellation,
    channel: ChannelParams,
    grid_policy: GridPolicy = DEFAULT_GRID,
    cutoff_cap: int = ge.DEFAULT_CUTOFF_CAP,
) -> HolevoResult:
    """Holevo information under the entangling-cloner attack (epsilon > 0)."""
    if not constellation.is_discrete:
        raise UnsupportedError("thermal GG02 is not provided")
    ens = thermal_ensemble(constellation, channel)
    try:
        lam_u, phi_u, cut_u = _base_decomposition(ens.uncond_cm, cutoff_cap)
        lam_c, phi_c, cut_c = _base_decomposition(ens.cond_cm, cutoff_cap)
    except CutoffError as exc:
        raise CutoffError(f"Eve's base state does not fit the Fock cutoff cap: {exc}", exc.suggested_cutoff) from exc
    ov_u = _displaced_overlap(lam_u, phi_u, ens.uncond_amps, cut_u)
    ov_c = _displaced_overlap(lam_c, phi_c, ens.cond_amps, cut_c)
    s_total = _gram_entropy(ov_u, constellation.probs)
    s_cond, nodes = _average_conditional(ov_c, constellation, channel, grid_policy)
    return _finish(s_total, s_cond, int(max(cut_u + cut_c)), nodes)


def eve_thermal_fock(constellation: Constellation, channel: ChannelParams, x_nodes, cutoffs):
    """Eve's unconditional and per-node conditional Fock matrices (test helper).

    Builds every member state by direct Fock expansion, so it is slow but
    shares nothing with the Gram route beyond the Gaussian states themselves.
    Returns ``(rho_E, [rho_{E|x} for x in x_nodes], p_B(x_nodes))``.
    """
    rho_e = 0
    states = []
    for s, p in zip(constellation.symbols, constellation.probs):
        st, upd = eve_states_thermal(s.real, s.imag, channel)
        rho_e = rho_e + p * ge.fock_density_matrix(st, cutoffs)
        states.append((p, upd))
    conds, pbs = [], []
    for x in np.atleast_1d(x_nodes):
        acc, pb = 0, 0.0
        for p, upd in states:
            w = p * float(upd.density(x))
            pb += w
            acc = acc + w * ge.fock_density_matrix(upd.state(x), cutoffs)
        conds.append(acc / pb)
        pbs.append(pb)
    return rho_e, conds, np.array(pbs)


# ---------------------------------------------------------------------------
# Gaussian modulation


def _h(v: float) -> float:
    """``(v-1)/2 log2((v+1)/(v-1))`` with its limit 0 at v = 1."""
    if v <= 1.0:
        return 0.0
    return 0.5 * (v - 1.0) * math.log2((v + 1.0) / (v - 1.0))


def gg02_eve_variances(nbar: float, channel: ChannelParams) -> tuple[float, float]:
    """Eve's unconditional variance and conditional symplectic eigenvalue."""
    eta = channel.eta
    v = 1.0 + 2.0 * nbar
    v_e = 1.0 + 2.0 * (1.0 - eta) * nbar
    vbar_e = math.sqrt((eta + (1.0 - eta) * v) / (1.0 - eta + eta * v) * v)
    return v_e, vbar_e


def gg02_holevo(nbar: float, channel: ChannelParams) -> float:
    """Closed-form Holevo information of Gaussian modulation, pure-loss channel."""
    if not channel.is_pure_loss:
        raise UnsupportedError("GG02 closed form is only provided for the pure-loss channel")
    v_e, vbar_e = gg02_eve_variances(nbar, channel)
    return math.log2((v_e + 1.0) / (vbar_e + 1.0)) + _h(v_e) - _h(vbar_e)

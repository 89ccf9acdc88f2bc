"""Gaussian states in shot-noise units: phase-space dynamics and Fock expansion.

Quadratures are ordered ``(q1, p1, q2, p2, ...)`` with ``q = a + a^dagger`` so
the vacuum covariance matrix is the identity and a coherent state ``|alpha>``
has first moments ``(2 Re alpha, 2 Im alpha)``.

Fock matrix elements follow the generating-function form

    rho_mk = T_mk * d^k/d alpha  d^m/d alpha* exp(alpha^T A alpha / 2 + gamma^T alpha) |_0

with ``alpha = (a1, a1*, a2, a2*, ...)``.  The derivatives satisfy

    D[c + e_s] = gamma_s D[c] + sum_t A_st c_t D[c - e_t],

which is evaluated on the table ``E[c] = D[c] / sqrt(c!)``; that absorbs the
``1/sqrt(k! m!)`` of ``T_mk`` so no factorial is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CutoffError, DomainError, NumericalError, PhysicalityError

PHYSICALITY_TOL = 1e-9
DEFAULT_CUTOFF_CAP = 64

_U1 = 0.5 * np.array([[1.0, 1.0j], [1.0, -1.0j]])


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class GaussianState:
    fm: np.ndarray
    cm: np.ndarray

    def __post_init__(self):
        fm = np.asarray(self.fm, dtype=float).reshape(-1)
        cm = np.asarray(self.cm, dtype=float)
        if cm.shape != (fm.size, fm.size) or fm.size % 2:
            raise DomainError(f"inconsistent shapes fm{fm.shape} cm{cm.shape}")
        if not np.allclose(cm, cm.T, atol=1e-12, rtol=0):
            raise DomainError("covariance matrix is not symmetric")
        object.__setattr__(self, "fm", fm)
        object.__setattr__(self, "cm", 0.5 * (cm + cm.T))

    @property
    def n_modes(self) -> int:
        return self.fm.size // 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(1j * symplectic_form(self.n_modes) @ self.cm)
        return np.sort(np.abs(ev.real))[::2]

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return bool(np.all(self.symplectic_eigenvalues() >= 1.0 - tol))

    def reduced(self, modes: Sequence[int]) -> "GaussianState":
        idx = _quad_index(modes)
        return GaussianState(self.fm[idx], self.cm[np.ix_(idx, idx)])

    def mean_photons(self) -> np.ndarray:
        """Per-mode mean photon number ``(var_q + var_p - 2)/4 + |fm|^2/4``."""
        out = np.empty(self.n_modes)
        for j in range(self.n_modes):
            q, p = 2 * j, 2 * j + 1
            out[j] = (self.cm[q, q] + self.cm[p, p] - 2.0) / 4.0 + (self.fm[q] ** 2 + self.fm[p] ** 2) / 4.0
        return out

    def complex_amplitudes(self) -> np.ndarray:
        """Displacement ``alpha_j = (q_j + i p_j)/2`` of each mode."""
        return 0.5 * (self.fm[0::2] + 1j * self.fm[1::2])

    def displaced(self, delta_fm) -> "GaussianState":
        return GaussianState(self.fm + np.asarray(delta_fm, dtype=float), self.cm)


def _quad_index(modes: Sequence[int]) -> list[int]:
    return [i for m in modes for i in (2 * m, 2 * m + 1)]


def direct_sum(*states: GaussianState) -> GaussianState:
    """Product state of independent Gaussian states (mode order preserved)."""
    fm = np.concatenate([s.fm for s in states])
    n = fm.size
    cm = np.zeros((n, n))
    i = 0
    for s in states:
        k = s.fm.size
        cm[i : i + k, i : i + k] = s.cm
        i += k
    return GaussianState(fm, cm)


def vacuum(n_modes: int = 1) -> GaussianState:
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes))


def coherent(x_a: float, y_a: float = 0.0) -> GaussianState:
    """Coherent state ``|x_a + i y_a>``: fm = (2 x_a, 2 y_a), cm = identity."""
    return GaussianState(np.array([2.0 * x_a, 2.0 * y_a]), np.eye(2))


def thermal(nbar: float) -> GaussianState:
    if nbar < 0:
        raise DomainError(f"thermal photon number must be >= 0, got {nbar}")
    return GaussianState(np.zeros(2), (2.0 * nbar + 1.0) * np.eye(2))


def tmsv(v_eps: float) -> GaussianState:
    """Two-mode squeezed vacuum with single-arm quadrature variance ``v_eps``."""
    if not v_eps >= 1.0:
        raise DomainError(f"TMSV variance must be >= 1, got {v_eps}")
    z = math.sqrt(max(v_eps * v_eps - 1.0, 0.0))
    sz = np.diag([1.0, -1.0])
    cm = np.block([[v_eps * np.eye(2), z * sz], [z * sz, v_eps * np.eye(2)]])
    return GaussianState(np.zeros(4), cm)


@dataclass(frozen=True)
class SymplecticMap:
    matrix: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=float)
        n = s.shape[0]
        if s.shape != (n, n) or n % 2:
            raise DomainError(f"bad symplectic matrix shape {s.shape}")
        om = symplectic_form(n // 2)
        if not np.allclose(s @ om @ s.T, om, atol=1e-10, rtol=0):
            raise DomainError("matrix does not preserve the symplectic form")
        object.__setattr__(self, "matrix", s)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2


def beam_splitter(eta: float, n_modes: int = 2, modes: tuple[int, int] = (0, 1)) -> SymplecticMap:
    """Beam splitter of transmissivity ``eta`` mixing ``modes``.

    The first output is ``sqrt(eta) a + sqrt(1-eta) b`` and the second
    ``-sqrt(1-eta) a + sqrt(eta) b``; other modes are left alone.
    """
    if not 0 < eta <= 1:
        raise DomainError(f"transmissivity must lie in (0, 1], got {eta}")
    t, r = math.sqrt(eta), math.sqrt(1.0 - eta)
    s = np.eye(2 * n_modes)
    i, j = _quad_index([modes[0]]), _quad_index([modes[1]])
    I2 = np.eye(2)
    s[np.ix_(i, i)] = t * I2
    s[np.ix_(i, j)] = r * I2
    s[np.ix_(j, i)] = -r * I2
    s[np.ix_(j, j)] = t * I2
    return SymplecticMap(s)


def evolve(state: GaussianState, smap: SymplecticMap) -> GaussianState:
    if smap.n_modes != state.n_modes:
        raise DomainError(f"map acts on {smap.n_modes} modes, state has {state.n_modes}")
    s = smap.matrix
    return GaussianState(s @ state.fm, s @ state.cm @ s.T)


@dataclass(frozen=True)
class HomodyneUpdate:
    """Affine form of q-homodyne conditioning on one mode.

    Conditional state of the other modes for outcome ``x``:
    ``fm = fm_rest + gain * (x - q_mean)`` and ``cm = cond_cm`` (outcome
    independent).  The outcome is Gaussian with ``q_mean`` and ``q_var``.
    """

    fm_rest: np.ndarray
    gain: np.ndarray
    cond_cm: np.ndarray
    q_mean: float
    q_var: float

    def density(self, x):
        return np.exp(-((np.asarray(x) - self.q_mean) ** 2) / (2 * self.q_var)) / math.sqrt(2 * math.pi * self.q_var)

    def state(self, x: float) -> GaussianState:
        return GaussianState(self.fm_rest + self.gain * (x - self.q_mean), self.cond_cm)


def homodyne_q_update(state: GaussianState, measured_mode: int) -> HomodyneUpdate:
    """Ideal q-homodyne limit: the pseudo-inverse of the q-projected block."""
    if state.n_modes < 2:
        raise DomainError("homodyne conditioning needs at least two modes")
    a = _quad_index([measured_mode])
    rest = [i for i in range(2 * state.n_modes) if i not in a]
    var_q = state.cm[a[0], a[0]]
    if not var_q > 0:
        raise NumericalError(f"degenerate q variance {var_q}")
    corr = state.cm[a[0], rest]
    cond_cm = state.cm[np.ix_(rest, rest)] - np.outer(corr, corr) / var_q
    return HomodyneUpdate(
        fm_rest=state.fm[rest].copy(),
        gain=corr / var_q,
        cond_cm=cond_cm,
        q_mean=float(state.fm[a[0]]),
        q_var=float(var_q),
    )


def condition_on_homodyne_q(state: GaussianState, measured_mode: int, x_b: float) -> tuple[GaussianState, float]:
    """Conditional state of the unmeasured modes and the outcome density at ``x_b``."""
    upd = homodyne_q_update(state, measured_mode)
    return upd.state(x_b), float(upd.density(x_b))


# ---------------------------------------------------------------------------
# complex basis and Fock expansion


def complex_transform(n_modes: int) -> np.ndarray:
    """Block-diagonal ``U = U1 (+) U1 ...`` mapping quadratures to (alpha, alpha*)."""
    return np.kron(np.eye(n_modes), _U1)


def to_complex_basis(state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    u = complex_transform(state.n_modes)
    return u @ state.fm, u @ state.cm @ u.conj().T


def from_complex_basis(beta: np.ndarray, sigma_tilde: np.ndarray) -> GaussianState:
    uinv = np.linalg.inv(complex_transform(len(beta) // 2))
    fm = uinv @ beta
    cm = uinv @ sigma_tilde @ uinv.conj().T
    return GaussianState(fm.real, cm.real)


@dataclass(frozen=True)
class FockExpansionParams:
    sigma_q: np.ndarray
    a_mat: np.ndarray
    gamma: np.ndarray
    log_prefactor: complex

    @property
    def prefactor(self) -> complex:
        return complex(np.exp(self.log_prefactor))


def fock_expansion_params(state: GaussianState) -> FockExpansionParams:
    n = state.n_modes
    beta, sig_t = to_complex_basis(state)
    sigma_q = sig_t + 0.5 * np.eye(2 * n)
    try:
        sq_inv = np.linalg.inv(sigma_q)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("sigma_Q is singular") from exc
    x = np.kron(np.eye(n), np.array([[0.0, 1.0], [1.0, 0.0]]))
    a_mat = x @ (np.eye(2 * n) - sq_inv)
    a_mat = 0.5 * (a_mat + a_mat.T)
    gamma = sq_inv.T @ beta.conj()
    det = np.linalg.det(sigma_q)
    if not det.real > 0:
        raise NumericalError(f"det(sigma_Q) = {det} is not positive")
    quad = beta.conj() @ sq_inv @ beta
    log_pref = -0.5 * quad - 0.5 * np.log(det.real)
    return FockExpansionParams(sigma_q, a_mat, gamma, complex(log_pref.real))


def _normalized_derivative_table(a_mat: np.ndarray, gamma: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Table ``E[c] = D[c]/sqrt(c!)`` of generating-function derivatives.

    Filled one axis at a time from the last: when recursing along axis ``s``
    every earlier index is zero, so only ``t >= s`` terms survive and the
    update is vectorized over the trailing axes.
    """
    ndim = len(shape)
    E = np.zeros(tuple(shape), dtype=complex)
    E[(0,) * ndim] = 1.0
    sq = [np.sqrt(np.arange(n, dtype=float)) for n in shape]
    for s in range(ndim - 1, -1, -1):
        head = (0,) * s
        for a in range(shape[s] - 1):
            cur = E[head + (a,)]
            new = gamma[s] * cur
            if a > 0:
                new = new + a_mat[s, s] * sq[s][a] * E[head + (a - 1,)]
            for t in range(s + 1, ndim):
                ax = t - s - 1
                shifted = np.zeros_like(cur)
                dst = [slice(None)] * cur.ndim
                src = [slice(None)] * cur.ndim
                dst[ax] = slice(1, None)
                src[ax] = slice(None, -1)
                bshape = [1] * cur.ndim
                bshape[ax] = shape[t] - 1
                shifted[tuple(dst)] = sq[t][1:].reshape(bshape) * cur[tuple(src)]
                new = new + a_mat[s, t] * shifted
            E[head + (a + 1,)] = new / math.sqrt(a + 1)
    return E


def fock_density_matrix(state: GaussianState, cutoffs: int | Sequence[int]) -> np.ndarray:
    """Truncated Fock density matrix, modes flattened in row-major order.

    ``cutoffs`` gives the maximum photon number per mode.
    """
    n = state.n_modes
    if np.isscalar(cutoffs):
        cutoffs = [int(cutoffs)] * n
    cutoffs = [int(c) for c in cutoffs]
    if len(cutoffs) != n:
        raise DomainError(f"need {n} cutoffs, got {len(cutoffs)}")
    params = fock_expansion_params(state)
    shape = [c + 1 for c in cutoffs for _ in range(2)]
    E = _normalized_derivative_table(params.a_mat, params.gamma, shape)
    # axes (k1, m1, k2, m2, ...) -> (m1, m2, ..., k1, k2, ...)
    perm = [2 * j + 1 for j in range(n)] + [2 * j for j in range(n)]
    dim = int(np.prod([c + 1 for c in cutoffs]))
    rho = params.prefactor * np.transpose(E, perm).reshape(dim, dim)
    return 0.5 * (rho + rho.conj().T)


def fock_matrix_element(state: GaussianState, m: Sequence[int], k: Sequence[int], cutoff: int | None = None) -> complex:
    """Single element ``<m|rho|k>`` (multi-indices over modes)."""
    m, k = list(np.atleast_1d(m)), list(np.atleast_1d(k))
    if len(m) != state.n_modes or len(k) != state.n_modes:
        raise DomainError("multi-index length must equal the number of modes")
    top = [max(a, b) for a, b in zip(m, k)]
    if cutoff is not None and max(top) > cutoff:
        raise DomainError(f"index {top} beyond cutoff {cutoff}")
    params = fock_expansion_params(state)
    shape = [t + 1 for t in top for _ in range(2)]
    E = _normalized_derivative_table(params.a_mat, params.gamma, shape)
    idx = tuple(x for pair in zip(k, m) for x in pair)
    return complex(params.prefactor * E[idx])


def poisson_cutoff(mu: float, cap: int = DEFAULT_CUTOFF_CAP) -> int:
    """Cutoff ``ceil(mu + 7 sqrt(mu) + 10)`` capped at ``cap``."""
    mu = max(float(mu), 0.0)
    return int(min(math.ceil(mu + 7.0 * math.sqrt(mu) + 10.0), cap))


def auto_cutoffs(state: GaussianState, cap: int = DEFAULT_CUTOFF_CAP) -> list[int]:
    return [poisson_cutoff(mu, cap) for mu in state.mean_photons()]


def fock_density_matrix_auto(
    state: GaussianState, cap: int = DEFAULT_CUTOFF_CAP, max_deficit: float = 1e-8
) -> tuple[np.ndarray, list[int]]:
    """Fock matrix with per-mode cutoffs from the photon-number rule.

    Raises :class:`CutoffError` when the trace deficit stays above
    ``max_deficit`` even at the cap.
    """
    cuts = auto_cutoffs(state, cap)
    rho = fock_density_matrix(state, cuts)
    deficit = 1.0 - float(np.trace(rho).real)
    if deficit > max_deficit:
        bigger = [min(cap, int(math.ceil(1.5 * c))) for c in cuts]
        if bigger != cuts:
            cuts = bigger
            rho = fock_density_matrix(state, cuts)
            deficit = 1.0 - float(np.trace(rho).real)
        if deficit > max_deficit:
            raise CutoffError(
                f"trace deficit {deficit:.3e} at cutoffs {cuts}",
                suggested_cutoff=[int(math.ceil(1.5 * c)) for c in cuts],
            )
    return rho, cuts


def check_physical(state: GaussianState) -> None:
    nu = state.symplectic_eigenvalues()
    if np.any(nu < 1.0 - PHYSICALITY_TOL):
        raise PhysicalityError(f"symplectic eigenvalues {nu} violate the uncertainty relation")

"""Key generation rate ``K = zeta I_AB - chi_BE`` and its optimizations.

Three shaping objectives are supported:

``uniform``
    nu = 0 (uniform QAM, or PSK).
``mutual-info``
    nu maximizes I_AB alone; chi_BE is evaluated afterwards.
``kgr``
    nu maximizes K directly (each probe evaluates chi_BE).

On top of that, :func:`optimize_energy` scans the mean photon number for the
largest K, and :func:`ratio_pas_gain` / :func:`find_d_max` sweep distance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .cache import CachedValue, EvaluationCache, cache_key
from .channel import ChannelParams
from .classical_info import gg02_mutual_information, mutual_information
from .constellation import Constellation, build_psk, build_qam, gg02_source
from .errors import DomainError, UnsupportedError
from .gaussian_engine import DEFAULT_CUTOFF_CAP
from .holevo import gg02_holevo, holevo_pure_loss, holevo_thermal
from .numerics import GridPolicy, golden_section_max

log = logging.getLogger(__name__)

UNIFORM = "uniform"
MUTUAL_INFO = "mutual-info"
KGR = "kgr"
OBJECTIVES = (UNIFORM, MUTUAL_INFO, KGR)


@dataclass(frozen=True)
class Numerics:
    """Knobs shared by every evaluation; part of the cache key."""

    simpson_points: int = 1201
    tail_sigmas: float = 8.0
    cutoff_cap: int = DEFAULT_CUTOFF_CAP
    nu_hi: float = 80.0
    nu_tol: float = 1e-4
    nu_scan_points: int = 12
    nbar_lo: float = 0.01
    nbar_hi: float = 50.0
    nbar_points: int = 25
    nbar_rtol: float = 1e-3

    @property
    def grid(self) -> GridPolicy:
        return GridPolicy(self.simpson_points, self.tail_sigmas)


DEFAULT_NUMERICS = Numerics()


@dataclass(frozen=True)
class Modulation:
    """``qam`` with ``size`` levels per quadrature, ``psk`` with ``size`` symbols, or ``gg02``."""

    kind: str
    size: int = 0

    def __post_init__(self):
        if self.kind not in ("qam", "psk", "gg02"):
            raise DomainError(f"unknown modulation {self.kind!r}")
        if self.kind != "gg02" and self.size < 2:
            raise DomainError(f"{self.kind} needs size >= 2")

    @classmethod
    def parse(cls, text: str) -> "Modulation":
        kind, _, size = text.strip().lower().partition(":")
        return cls(kind, int(size) if size else 0)

    @property
    def label(self) -> str:
        return self.kind if self.kind == "gg02" else f"{self.kind}:{self.size}"

    @property
    def shapeable(self) -> bool:
        return self.kind == "qam"

    def build(self, nbar: float, nu: float = 0.0) -> Constellation:
        if self.kind == "qam":
            return build_qam(self.size, nbar, nu)
        if self.kind == "psk":
            return build_psk(self.size, nbar)
        return gg02_source(nbar)


def _as_modulation(m) -> Modulation:
    if isinstance(m, Modulation):
        return m
    if isinstance(m, str):
        return Modulation.parse(m)
    return Modulation("qam", int(m))


@dataclass(frozen=True)
class KgrPoint:
    channel: ChannelParams
    nbar: float
    nu: float
    beta: float
    delta: float
    i_ab: float
    chi_be: float
    k: float
    zeta: float
    cutoff_used: int = 0
    grid_points: int = 0


@dataclass(frozen=True)
class OptimumRecord:
    k_max: float
    nbar_max: float
    nu_opt: float
    objective: str
    point: KgrPoint | None = None
    scan: tuple[KgrPoint, ...] = field(default=(), repr=False)

    @property
    def feasible(self) -> bool:
        return self.k_max > 0


def _check_zeta(zeta: float) -> None:
    if not 0 < zeta <= 1:
        raise DomainError(f"reconciliation efficiency must lie in (0, 1], got {zeta}")


def holevo_for(constellation: Constellation, channel: ChannelParams, numerics: Numerics = DEFAULT_NUMERICS):
    if channel.is_pure_loss:
        return holevo_pure_loss(constellation, channel, numerics.grid)
    return holevo_thermal(constellation, channel, numerics.grid, numerics.cutoff_cap)


def point_key(constellation: Constellation, channel: ChannelParams, numerics: Numerics, objective: str) -> str:
    size = constellation.M if constellation.kind.startswith("QAM") else len(constellation)
    return cache_key(
        {
            "modulation": f"{constellation.kind}:{size}",
            "objective": objective,
            "d_km": float(channel.distance_km),
            "kappa": float(channel.kappa_db_per_km),
            "epsilon": float(channel.epsilon),
            "nbar": float(constellation.mean_energy),
            "nu": float(constellation.nu),
            "numerics": asdict(numerics),
        }
    )


def _evaluate(constellation, channel, numerics) -> CachedValue:
    i_ab = mutual_information(constellation, channel, numerics.grid).i_ab
    h = holevo_for(constellation, channel, numerics)
    return CachedValue(i_ab, h.chi, h.cutoff_used, h.grid_points)


def kgr_at(
    constellation: Constellation,
    channel: ChannelParams,
    zeta: float,
    numerics: Numerics = DEFAULT_NUMERICS,
    cache: EvaluationCache | None = None,
    objective: str = "",
) -> KgrPoint:
    """K for one constellation; pure-loss or thermal pipeline chosen by epsilon.

    With a ``cache`` the (I_AB, chi_BE) pair is looked up first; ``objective``
    only enters the cache key.
    """
    _check_zeta(zeta)
    if not constellation.is_discrete:
        return gg02_kgr(constellation.mean_energy, channel, zeta)
    val = None
    if cache is not None:
        key = point_key(constellation, channel, numerics, objective)
        val = cache.get(key)
    if val is None:
        val = _evaluate(constellation, channel, numerics)
        if cache is not None:
            cache.put(key, val)
    return KgrPoint(
        channel=channel,
        nbar=constellation.mean_energy,
        nu=constellation.nu,
        beta=constellation.beta,
        delta=constellation.delta,
        i_ab=val.i_ab,
        chi_be=val.chi_be,
        k=zeta * val.i_ab - val.chi_be,
        zeta=zeta,
        cutoff_used=val.cutoff_used,
        grid_points=val.grid_points,
    )


def gg02_kgr(nbar: float, channel: ChannelParams, zeta: float) -> KgrPoint:
    _check_zeta(zeta)
    i_ab = gg02_mutual_information(nbar, channel)
    chi = gg02_holevo(nbar, channel)
    return KgrPoint(
        channel=channel,
        nbar=nbar,
        nu=float("nan"),
        beta=float("nan"),
        delta=float("nan"),
        i_ab=i_ab,
        chi_be=chi,
        k=zeta * i_ab - chi,
        zeta=zeta,
    )


def _best_of(f, candidates: Iterable[float]) -> tuple[float, float]:
    best_x, best_f = None, -math.inf
    for x in candidates:
        fx = f(x)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _search_nu(f, numerics: Numerics, extra: Sequence[float] = ()) -> float:
    """Golden-section in [0, nu_hi] after a coarse log-spaced bracketing scan.

    Both objectives flatten into a plateau for large nu (outer levels carry
    no weight), where rounding noise would steer a bare golden search away
    from the peak.  The scan picks the best node and the golden step refines
    between its neighbours; scanned nodes stay candidates.
    """
    cache: dict[float, float] = {}

    def g(nu):
        if nu not in cache:
            cache[nu] = f(nu)
        return cache[nu]

    nodes = [0.0]
    if numerics.nu_scan_points > 1:
        nodes += list(np.geomspace(numerics.nu_hi / 2 ** (numerics.nu_scan_points - 1), numerics.nu_hi, numerics.nu_scan_points))
    else:
        nodes.append(numerics.nu_hi)
    i = max(range(len(nodes)), key=lambda j: (g(nodes[j]), -j))
    lo, hi = nodes[max(i - 1, 0)], nodes[min(i + 1, len(nodes) - 1)]
    x, _ = golden_section_max(g, lo, hi, numerics.nu_tol)
    # ascending order: exact ties go to the smaller nu
    nu, _ = _best_of(g, sorted({x, *nodes, *extra}))
    return nu


def optimize_nu_mutual_info(M: int, nbar: float, channel: ChannelParams, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """nu maximizing I_AB for M-level QAM at mean energy ``nbar``."""
    if not nbar > 0:
        raise DomainError("nbar must be positive")
    return _search_nu(lambda nu: mutual_information(build_qam(M, nbar, nu), channel, numerics.grid).i_ab, numerics)


def optimize_nu_kgr(
    M: int,
    nbar: float,
    channel: ChannelParams,
    zeta: float,
    numerics: Numerics = DEFAULT_NUMERICS,
    cache: EvaluationCache | None = None,
) -> float:
    """nu maximizing K itself; every probe pays for a Holevo evaluation."""
    if not nbar > 0:
        raise DomainError("nbar must be positive")
    _check_zeta(zeta)
    return _search_nu(lambda nu: kgr_at(build_qam(M, nbar, nu), channel, zeta, numerics, cache, KGR).k, numerics)


def point_for(
    modulation,
    objective: str,
    nbar: float,
    channel: ChannelParams,
    zeta: float,
    numerics: Numerics = DEFAULT_NUMERICS,
    cache: EvaluationCache | None = None,
) -> KgrPoint:
    """K at energy ``nbar`` with nu chosen according to ``objective``."""
    mod = _as_modulation(modulation)
    if objective not in OBJECTIVES:
        raise DomainError(f"unknown objective {objective!r}")
    if mod.kind == "gg02":
        return gg02_kgr(nbar, channel, zeta)
    nu = 0.0
    if mod.shapeable and objective == MUTUAL_INFO:
        nu = optimize_nu_mutual_info(mod.size, nbar, channel, numerics)
    elif mod.shapeable and objective == KGR:
        nu = optimize_nu_kgr(mod.size, nbar, channel, zeta, numerics, cache)
    return kgr_at(mod.build(nbar, nu), channel, zeta, numerics, cache, objective)


def optimize_energy(
    modulation,
    channel: ChannelParams,
    zeta: float,
    objective: str = UNIFORM,
    numerics: Numerics = DEFAULT_NUMERICS,
    cache: EvaluationCache | None = None,
) -> OptimumRecord:
    """Maximum K over the mean photon number.

    A log-spaced scan locates the best energy; golden-section search on
    ``log(nbar)`` between its neighbours refines it to ``nbar_rtol``.
    """
    mod = _as_modulation(modulation)
    grid = np.geomspace(numerics.nbar_lo, numerics.nbar_hi, numerics.nbar_points)
    scan = [point_for(mod, objective, float(n), channel, zeta, numerics, cache) for n in grid]
    ks = np.array([p.k for p in scan])
    i = int(np.argmax(ks))
    best = scan[i]
    lo = math.log(grid[max(i - 1, 0)])
    hi = math.log(grid[min(i + 1, len(grid) - 1)])
    evaluated: dict[float, KgrPoint] = {}

    def f(u):
        p = point_for(mod, objective, math.exp(u), channel, zeta, numerics, cache)
        evaluated[u] = p
        return p.k

    golden_section_max(f, lo, hi, math.log1p(numerics.nbar_rtol))
    for p in evaluated.values():
        if p.k > best.k:
            best = p
    rec = OptimumRecord(
        k_max=best.k,
        nbar_max=best.nbar,
        nu_opt=best.nu,
        objective=objective,
        point=best,
        scan=tuple(scan),
    )
    if not rec.feasible:
        log.warning("no positive key rate for %s at d=%.3g km", mod.label, channel.distance_km)
    return rec


@dataclass(frozen=True)
class RatioResult:
    distances: tuple[float, ...]
    ratios: tuple[float, ...]
    uniform: tuple[OptimumRecord, ...]
    shaped: tuple[OptimumRecord, ...]
    mean_ratio: float
    averaging_from_km: float


def ratio_pas_gain(
    M: int,
    d_range: Sequence[float],
    zeta: float,
    numerics: Numerics = DEFAULT_NUMERICS,
    objective: str = MUTUAL_INFO,
    reference: str = UNIFORM,
    average_from_km: float = 80.0,
    kappa: float = 0.2,
    cache: EvaluationCache | None = None,
) -> RatioResult:
    """PAS gain ``R = K_max(objective) / K_max(reference)`` per distance.

    The summary is the mean of R over distances ``>= average_from_km``
    (all distances if none qualify); infeasible points are skipped.
    """
    if len(d_range) == 0:
        raise DomainError("empty distance range")
    ds, rs, us, ss = [], [], [], []
    for d in d_range:
        ch = ChannelParams(float(d), kappa)
        u = optimize_energy(M, ch, zeta, reference, numerics, cache)
        s = optimize_energy(M, ch, zeta, objective, numerics, cache)
        us.append(u)
        ss.append(s)
        ds.append(float(d))
        if u.feasible and s.feasible:
            rs.append(s.k_max / u.k_max)
        else:
            log.warning("skipping infeasible distance %.3g km in ratio", d)
            rs.append(float("nan"))
    r = np.array(rs)
    dd = np.array(ds)
    sel = (dd >= average_from_km) & np.isfinite(r)
    if not sel.any():
        sel = np.isfinite(r)
    mean = float(r[sel].mean()) if sel.any() else float("nan")
    return RatioResult(tuple(ds), tuple(rs), tuple(us), tuple(ss), mean, average_from_km)


@dataclass(frozen=True)
class DmaxResult:
    d_max: float
    bounded: bool
    bracket: tuple[float, float]
    evaluations: tuple[tuple[float, float], ...]


def find_d_max(
    modulation,
    channel_template: ChannelParams,
    zeta: float,
    objective: str = UNIFORM,
    numerics: Numerics = DEFAULT_NUMERICS,
    step_km: float = 10.0,
    d_limit: float = 400.0,
    tol_km: float = 1.0,
    d_start: float | None = None,
    cache: EvaluationCache | None = None,
) -> DmaxResult:
    """Largest distance with positive optimized K under excess noise.

    Marches outward in ``step_km`` steps until K_max turns non-positive, then
    bisects the last bracket to ``tol_km``.
    """
    if channel_template.epsilon <= 0:
        raise DomainError("d_max needs excess noise epsilon > 0")
    evals: list[tuple[float, float]] = []

    def kmax(d):
        ch = replace(channel_template, distance_km=float(d))
        k = optimize_energy(modulation, ch, zeta, objective, numerics, cache).k_max
        evals.append((float(d), k))
        return k

    d_lo = step_km if d_start is None else d_start
    if kmax(d_lo) <= 0:
        # march inwards; distance 0 is singular with excess noise
        hi = d_lo
        lo = d_lo / 2
        while kmax(lo) <= 0:
            hi, lo = lo, lo / 2
            if lo < tol_km:
                return DmaxResult(0.0, True, (0.0, hi), tuple(evals))
        d_lo, d_hi = lo, hi
    else:
        d_hi = d_lo + step_km
        while kmax(d_hi) > 0:
            d_lo = d_hi
            d_hi += step_km
            if d_hi > d_limit:
                return DmaxResult(float("inf"), False, (d_lo, d_limit), tuple(evals))
    while d_hi - d_lo > tol_km:
        mid = 0.5 * (d_lo + d_hi)
        if kmax(mid) > 0:
            d_lo = mid
        else:
            d_hi = mid
    return DmaxResult(0.5 * (d_lo + d_hi), True, (d_lo, d_hi), tuple(evals))

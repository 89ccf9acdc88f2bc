"""Batch front-end: sweeps, optimizations and d_max searches written to CSV.

Settings come from built-in defaults, then an optional ``key = value``
config file, then command-line flags.  Every run writes one CSV row per
evaluated point and a JSON manifest next to it.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import kgr_optimizer as ko
from .cache import EvaluationCache, default_cache_dir
from .channel import ChannelParams
from .errors import CvqkdError, DomainError, UnsupportedError

log = logging.getLogger("cvqkd_pas")

SCENARIOS = ("sweep-energy", "sweep-distance", "optimize", "ratio", "dmax", "gg02")
SHAPINGS = {"uniform": ko.UNIFORM, "mb-mutualinfo": ko.MUTUAL_INFO, "mb-kgr": ko.KGR}
COLUMNS = (
    "scenario",
    "modulation",
    "shaping",
    "d_km",
    "eta",
    "epsilon",
    "nbar",
    "nu",
    "beta",
    "delta",
    "i_ab_bits",
    "chi_be_bits",
    "k_bits",
    "zeta",
    "cutoff_used",
    "grid_points",
    "wall_ms",
)
CSV_SCHEMA = "cvqkd-pas-csv/1"


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsers


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_grid(text: str) -> list[float]:
    """``a``, ``a,b,c``, ``a:b:step`` (inclusive) or ``geom:a:b:n``."""
    text = text.strip()
    if text.startswith("geom:"):
        a, b, n = text[5:].split(":")
        if int(n) < 1:
            raise ValueError("geom grid needs n >= 1")
        return [float(x) for x in np.geomspace(float(a), float(b), int(n))]
    if ":" in text:
        a, b, step = (float(x) for x in text.split(":"))
        if not step > 0 or b < a:
            raise ValueError(f"bad range {text!r}")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return [a + i * step for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def _modulation(text: str) -> str:
    return ko.Modulation.parse(text).label


def _shaping(text: str) -> str:
    t = text.strip().lower()
    if t not in SHAPINGS:
        raise ValueError(f"shaping must be one of {', '.join(SHAPINGS)}")
    return t


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any
    help: str
    check: Callable[[Any], bool] = lambda v: True
    bounds: str = ""
    affects_results: bool = True


FIELDS: dict[str, Field] = {
    "modulation": Field(_modulation, "qam:4", "qam:M | psk:N | gg02"),
    "shaping": Field(_shaping, "uniform", "uniform | mb-mutualinfo | mb-kgr"),
    "d": Field(parse_grid, None, "distances in km: list, a:b:step or geom:a:b:n",
               lambda v: len(v) > 0 and all(0 <= x <= 1000 for x in v), "0 <= d <= 1000"),
    "nbar": Field(parse_grid, None, "mean photon numbers (same syntax as d)",
                  lambda v: len(v) > 0 and all(0 < x <= 1e4 for x in v), "0 < nbar <= 1e4"),
    "zeta": Field(_float, 0.95, "reconciliation efficiency", lambda v: 0 < v <= 1, "0 < zeta <= 1"),
    "epsilon": Field(_float, 0.0, "excess noise (shot-noise units)", lambda v: 0 <= v <= 10, "0 <= epsilon <= 10"),
    "kappa": Field(_float, 0.2, "fibre loss in dB/km", lambda v: 0 < v <= 10, "0 < kappa <= 10"),
    "simpson_points": Field(_int, 1201, "Simpson nodes on Bob's grid",
                            lambda v: 3 <= v <= 200001 and v % 2 == 1, "odd, 3..200001"),
    "tail_sigmas": Field(_float, 8.0, "grid half-width beyond the outer means, in sigma", lambda v: 1 <= v <= 40, "1..40"),
    "cutoff_cap": Field(_int, 64, "largest Fock cutoff per mode", lambda v: 4 <= v <= 256, "4..256"),
    "nu_hi": Field(_float, 80.0, "upper end of the nu bracket", lambda v: 0 < v <= 1000, "0 < nu_hi <= 1000"),
    "nu_tol": Field(_float, 1e-4, "golden-section tolerance on nu", lambda v: 0 < v < 1, "0 < nu_tol < 1"),
    "nu_scan_points": Field(_int, 12, "coarse nu nodes before golden section", lambda v: 1 <= v <= 200, "1..200"),
    "nbar_lo": Field(_float, 0.01, "energy scan lower end", lambda v: v > 0, "> 0"),
    "nbar_hi": Field(_float, 50.0, "energy scan upper end", lambda v: v > 0, "> 0"),
    "nbar_points": Field(_int, 25, "energy scan nodes", lambda v: 3 <= v <= 1000, "3..1000"),
    "nbar_rtol": Field(_float, 1e-3, "relative tolerance of the energy refinement", lambda v: 0 < v < 1, "0 < nbar_rtol < 1"),
    "average_from_km": Field(_float, 80.0, "ratio: average R over d >= this", lambda v: v >= 0, ">= 0"),
    "step_km": Field(_float, 10.0, "dmax: march step", lambda v: 0 < v <= 500, "0 < step_km <= 500"),
    "d_limit": Field(_float, 400.0, "dmax: give up beyond this distance", lambda v: 0 < v <= 2000, "0 < d_limit <= 2000"),
    "tol_km": Field(_float, 1.0, "dmax: bisection tolerance", lambda v: 0 < v <= 100, "0 < tol_km <= 100"),
    "output": Field(str, "-", "CSV path ('-' for stdout)", affects_results=False),
    "manifest": Field(str, "", "manifest path (default: <output>.manifest.json)", affects_results=False),
    "workers": Field(_int, 1, "worker processes", lambda v: 1 <= v <= 256, "1..256", affects_results=False),
    "cache": Field(_bool, True, "use the on-disk evaluation cache", affects_results=False),
    "cache_dir": Field(str, "", "cache directory (default from $CVQKD_PAS_CACHE)", affects_results=False),
    "timing": Field(_bool, True, "fill the wall_ms column", affects_results=False),
}


def read_config_file(path: str) -> dict[str, tuple[Any, int]]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, tuple[Any, int]] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        if key == "scenario":
            v = value.strip()
            if v not in SCENARIOS:
                raise ConfigError(f"{path}:{no}: unknown scenario {v!r}")
            out[key] = (v, no)
            continue
        if key not in FIELDS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{path}:{no}: duplicate key {key!r}")
        try:
            out[key] = (FIELDS[key].parse(value.strip()), no)
        except ValueError as exc:
            raise ConfigError(f"{path}:{no}: invalid value for {key}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# resolved configuration


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    values: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def numerics(self) -> ko.Numerics:
        names = {f.name for f in dataclasses.fields(ko.Numerics)}
        return ko.Numerics(**{k: v for k, v in self.values.items() if k in names})

    @property
    def objective(self) -> str:
        return SHAPINGS[self.values["shaping"]]

    def hashable(self) -> dict:
        keep = {k: v for k, v in self.values.items() if FIELDS[k].affects_results}
        return {"scenario": self.scenario, **keep}

    def config_hash(self) -> str:
        blob = json.dumps(self.hashable(), sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


def _where(origin: dict, key: str) -> str:
    return origin.get(key, f"--{key.replace('_', '-')}")


def resolve(scenario: str | None, file_values: dict, flag_values: dict, config_path: str | None) -> RunConfig:
    values = {k: f.default for k, f in FIELDS.items()}
    origin: dict[str, str] = {}
    for k, (v, no) in file_values.items():
        if k == "scenario":
            continue
        values[k] = v
        origin[k] = f"{config_path}:{no}"
    for k, v in flag_values.items():
        if v is not None:
            values[k] = v
            origin.pop(k, None)
    if scenario is None:
        if "scenario" not in file_values:
            raise ConfigError("no scenario given (subcommand or 'scenario =' in the config)")
        scenario = file_values["scenario"][0]

    for k, f in FIELDS.items():
        v = values[k]
        if v is not None and not f.check(v):
            raise ConfigError(f"{_where(origin, k)}: {k} = {v!r} out of bounds ({f.bounds})")
    if values["nbar_lo"] >= values["nbar_hi"]:
        raise ConfigError(f"{_where(origin, 'nbar_hi')}: nbar_hi must exceed nbar_lo")

    mod = ko.Modulation.parse(values["modulation"])
    shaping = values["shaping"]
    if shaping != "uniform" and not mod.shapeable:
        raise ConfigError(f"{_where(origin, 'shaping')}: shaping {shaping} needs a qam modulation")
    if scenario == "gg02":
        values["modulation"] = "gg02"
        mod = ko.Modulation("gg02")
        values["shaping"] = "uniform"
    if mod.kind == "gg02" and values["epsilon"] > 0:
        raise ConfigError(f"{_where(origin, 'epsilon')}: gg02 is only available for epsilon = 0")
    if scenario in ("sweep-energy", "sweep-distance", "optimize", "ratio", "gg02") and values["d"] is None:
        raise ConfigError(f"scenario {scenario} needs distances (d)")
    if scenario == "sweep-distance" and values["nbar"] is None:
        raise ConfigError("scenario sweep-distance needs nbar")
    if scenario in ("sweep-energy", "gg02") and values["nbar"] is None:
        values["nbar"] = parse_grid(f"geom:{values['nbar_lo']}:{values['nbar_hi']}:{values['nbar_points']}")
    if scenario == "ratio" and (mod.kind != "qam" or shaping == "uniform"):
        raise ConfigError(f"{_where(origin, 'shaping')}: ratio needs qam with mb-mutualinfo or mb-kgr shaping")
    if scenario == "dmax" and values["epsilon"] <= 0:
        raise ConfigError(f"{_where(origin, 'epsilon')}: dmax needs epsilon > 0")
    if values["epsilon"] > 0 and values["d"] is not None and min(values["d"]) <= 0:
        raise ConfigError(f"{_where(origin, 'd')}: excess noise needs d > 0")
    return RunConfig(scenario, values)


# ---------------------------------------------------------------------------
# evaluation


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _row(cfg: RunConfig, point: ko.KgrPoint | None, wall_ms: float | None, **over) -> dict:
    row = dict.fromkeys(COLUMNS)
    row.update(scenario=cfg.scenario, modulation=cfg.modulation, shaping=cfg.shaping, zeta=cfg.zeta, epsilon=cfg.epsilon)
    if point is not None:
        row.update(
            d_km=point.channel.distance_km,
            eta=point.channel.eta,
            nbar=point.nbar,
            nu=point.nu,
            beta=point.beta,
            delta=point.delta,
            i_ab_bits=point.i_ab,
            chi_be_bits=point.chi_be,
            k_bits=point.k,
            cutoff_used=point.cutoff_used,
            grid_points=point.grid_points,
        )
    row["wall_ms"] = wall_ms if cfg.timing else None
    row.update(over)
    return row


def _channel(cfg: RunConfig, d: float) -> ChannelParams:
    return ChannelParams(float(d), cfg.kappa, cfg.epsilon)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - t0) * 1e3


def _task_point(cfg, cache, d, nbar):
    p, ms = _timed(lambda: ko.point_for(cfg.modulation, cfg.objective, nbar, _channel(cfg, d), cfg.zeta, cfg.numerics, cache))
    return [_row(cfg, p, ms)]


def _task_optimize(cfg, cache, d):
    rec, ms = _timed(lambda: ko.optimize_energy(cfg.modulation, _channel(cfg, d), cfg.zeta, cfg.objective, cfg.numerics, cache))
    return [_row(cfg, rec.point, ms)]


def _task_ratio(cfg, cache, d):
    ch = _channel(cfg, d)
    rows = []
    for shaping in ("uniform", cfg.shaping):
        rec, ms = _timed(lambda: ko.optimize_energy(cfg.modulation, ch, cfg.zeta, SHAPINGS[shaping], cfg.numerics, cache))
        rows.append(_row(cfg, rec.point, ms, shaping=shaping))
    return rows


def _task_dmax(cfg, cache):
    template = ChannelParams(cfg.step_km, cfg.kappa, cfg.epsilon)
    res, ms = _timed(
        lambda: ko.find_d_max(
            cfg.modulation, template, cfg.zeta, cfg.objective, cfg.numerics,
            step_km=cfg.step_km, d_limit=cfg.d_limit, tol_km=cfg.tol_km, cache=cache,
        )
    )
    eta = ChannelParams(res.d_max, cfg.kappa).eta if math.isfinite(res.d_max) else None
    return [_row(cfg, None, ms, d_km=res.d_max, eta=eta)]


def _task_gg02(cfg, cache, d, nbar):
    p, ms = _timed(lambda: ko.gg02_kgr(nbar, _channel(cfg, d), cfg.zeta))
    return [_row(cfg, p, ms, nu=None, beta=None, delta=None, cutoff_used=None, grid_points=None)]


_TASKS = {
    "point": _task_point,
    "optimize": _task_optimize,
    "ratio": _task_ratio,
    "dmax": _task_dmax,
    "gg02": _task_gg02,
}


def plan(cfg: RunConfig) -> list[tuple]:
    s = cfg.scenario
    if s == "sweep-energy":
        return [("point", d, n) for d in cfg.d for n in cfg.nbar]
    if s == "sweep-distance":
        return [("point", d, n) for n in cfg.nbar for d in cfg.d]
    if s == "optimize":
        return [("optimize", d) for d in cfg.d]
    if s == "ratio":
        return [("ratio", d) for d in cfg.d]
    if s == "dmax":
        return [("dmax",)]
    return [("gg02", d, n) for d in cfg.d for n in cfg.nbar]


def _describe(cfg: RunConfig, task: tuple) -> str:
    kind, *args = task
    names = {"point": ("d", "nbar"), "gg02": ("d", "nbar"), "optimize": ("d",), "ratio": ("d",), "dmax": ()}[kind]
    parts = [f"{n}={a:g}" for n, a in zip(names, args)]
    return f"{cfg.scenario} {cfg.modulation} {cfg.shaping} " + " ".join(parts)


def run_task(args: tuple) -> dict:
    """Worker entry point; never raises, failures are returned."""
    cfg, task, cache_dir = args
    cache = EvaluationCache(cache_dir) if cache_dir else None
    try:
        rows = _TASKS[task[0]](cfg, cache, *task[1:])
    except (DomainError, UnsupportedError) as exc:
        return {"error": "config", "where": _describe(cfg, task), "message": str(exc)}
    except (CvqkdError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return {"error": "numerical", "where": _describe(cfg, task), "message": f"{type(exc).__name__}: {exc}"}
    stats = cache.stats if cache else None
    return {
        "rows": rows,
        "lookups": stats.lookups if stats else 0,
        "hits": stats.hits if stats else 0,
    }


def ratio_summary(cfg: RunConfig, rows: list[dict]) -> dict:
    """Mean of R = K_max(shaped)/K_max(uniform) over d >= average_from_km."""
    by_d: dict[float, dict[str, float]] = {}
    for r in rows:
        by_d.setdefault(r["d_km"], {})[r["shaping"]] = r["k_bits"]
    ratios = []
    for d, ks in by_d.items():
        u, s = ks.get("uniform"), ks.get(cfg.shaping)
        if u is not None and s is not None and u > 0 and s > 0:
            ratios.append((d, s / u))
    sel = [r for d, r in ratios if d >= cfg.average_from_km] or [r for _, r in ratios]
    mean = float(np.mean(sel)) if sel else float("nan")
    return _row(cfg, None, None, shaping=f"R:{cfg.shaping}/uniform", k_bits=mean)


def write_csv(rows: list[dict], fh) -> None:
    fh.write(",".join(COLUMNS) + "\n")
    for r in rows:
        fh.write(",".join(_fmt(r[c]) for c in COLUMNS) + "\n")


def execute(cfg: RunConfig) -> tuple[list[dict], dict]:
    tasks = plan(cfg)
    cache_dir = ""
    if cfg.cache:
        cache_dir = str(Path(cfg.cache_dir) if cfg.cache_dir else default_cache_dir())
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
    payload = [(cfg, t, cache_dir) for t in tasks]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_task, payload))
    else:
        results = [run_task(p) for p in payload]
    rows, per_point = [], []
    for res in results:
        if "error" in res:
            raise RunFailure(res)
        rows.extend(res["rows"])
        per_point.append({"lookups": res["lookups"], "hits": res["hits"]})
    if cfg.scenario == "ratio":
        rows.append(ratio_summary(cfg, rows))
    cache_info = {
        "enabled": bool(cfg.cache),
        "directory": cache_dir or None,
        "lookups": sum(p["lookups"] for p in per_point),
        "hits": sum(p["hits"] for p in per_point),
        "per_point": per_point,
    }
    return rows, cache_info


class RunFailure(Exception):
    def __init__(self, info: dict):
        super().__init__(info["message"])
        self.info = info


# ---------------------------------------------------------------------------
# command line


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvqkd-pas", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--no-cache", dest="cache", action="store_const", const=False, default=None,
                        help="skip the evaluation cache")
    common.add_argument("--no-timing", dest="timing", action="store_const", const=False, default=None,
                        help="leave wall_ms empty (byte-stable CSV)")
    common.add_argument("-v", "--verbose", action="store_true")
    for key, f in FIELDS.items():
        if key in ("cache", "timing"):
            continue
        flag = "--" + key.replace("_", "-")
        common.add_argument(flag, dest=key, default=None, metavar=key.upper(), help=f.help)
    sub = ap.add_subparsers(dest="scenario")
    for s in SCENARIOS:
        sub.add_parser(s, parents=[common], help=f"run the {s} scenario")
    ap.add_argument("--config", dest="top_config", help=argparse.SUPPRESS)
    return ap


def _parse_flags(ns: argparse.Namespace) -> dict:
    out = {}
    for key, f in FIELDS.items():
        raw = getattr(ns, key, None)
        if raw is None or key in ("cache", "timing"):
            out[key] = raw
            continue
        try:
            out[key] = f.parse(raw)
        except ValueError as exc:
            raise ConfigError(f"--{key.replace('_', '-')}: invalid value {raw!r}: {exc}") from exc
    return out


def _manifest(cfg: RunConfig, rows: list[dict], cache_info: dict, csv_path: str, argv: list[str]) -> dict:
    return {
        "tool": "cvqkd-pas",
        "version": __version__,
        "csv_schema": CSV_SCHEMA,
        "scenario": cfg.scenario,
        "config_hash": cfg.config_hash(),
        "config": cfg.hashable(),
        "argv": argv,
        "csv": csv_path,
        "rows": len(rows),
        "cache": cache_info,
    }


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    config_path = getattr(ns, "config", None) or ns.top_config
    try:
        file_values = read_config_file(config_path) if config_path else {}
        cfg = resolve(ns.scenario, file_values, _parse_flags(ns) if ns.scenario else {}, config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        rows, cache_info = execute(cfg)
    except RunFailure as exc:
        code = 2 if exc.info["error"] == "config" else 3
        kind = "invalid point" if code == 2 else "numerical failure"
        print(f"error: {kind} at {exc.info['where']}: {exc.info['message']}", file=sys.stderr)
        return code
    if cfg.output == "-":
        write_csv(rows, sys.stdout)
        sys.stdout.flush()
    else:
        with open(cfg.output, "w", newline="") as fh:
            write_csv(rows, fh)
    manifest_path = cfg.manifest or (f"{cfg.output}.manifest.json" if cfg.output != "-" else "")
    if manifest_path:
        Path(manifest_path).write_text(
            json.dumps(_manifest(cfg, rows, cache_info, cfg.output, argv), indent=2, default=repr) + "\n"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())

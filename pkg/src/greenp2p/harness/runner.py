"""Scheduler, metrics and strategy comparison."""

from __future__ import annotations

import csv
import io
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import engine
from .config import STRATEGIES, SimConfig, deviations, strategy
from .world import WorldState, init_world, refresh_friend_dbs, snapshot_hash


@dataclass(frozen=True)
class CycleMetrics:
    experimental_cycle: int
    authentic_downloads: int
    total_downloads: int
    fraction_authentic: float | None
    failed_queries: int
    polluted_accepted: int
    detected: int
    genuine_queries: int
    corrupted_attempts: int
    corrupted_accepted: int
    rep_evaluations: int
    quick_estimates: int

    @classmethod
    def from_counters(cls, index: int, delta: np.ndarray) -> "CycleMetrics":
        g = lambda name: int(delta[engine.C[name]])  # noqa: E731
        auth, poll = g("authentic_accepted"), g("polluted_accepted")
        total = auth + poll
        return cls(
            experimental_cycle=index,
            authentic_downloads=auth,
            total_downloads=total,
            fraction_authentic=auth / total if total else None,
            failed_queries=g("failed_queries"),
            polluted_accepted=poll,
            detected=g("detected"),
            genuine_queries=g("genuine_queries"),
            corrupted_attempts=g("corrupted_attempts"),
            corrupted_accepted=g("corrupted_accepted"),
            rep_evaluations=g("rep_evaluations"),
            quick_estimates=g("quick_estimates"),
        )


METRIC_FIELDS = list(CycleMetrics.__dataclass_fields__)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _advance(world: WorldState, stop: int, events: np.ndarray | None = None) -> None:
    """Run query cycles up to ``stop``, refreshing friend dbs on schedule."""
    cfg = world.config
    period = cfg.friend_db_refresh_period
    a = world.arrays
    while world.cycle < stop:
        c = world.cycle
        if c > 0 and c % period == 0 and world.refreshes < c // period:
            refresh_friend_dbs(world)
        end = min(stop, (c // period + 1) * period)
        buf = events if events is not None and len(events) >= end - c else np.zeros(
            (end - c, engine.N_EVENT), np.int64)
        engine.run_cycles(
            c, end, world.ip, world.fp,
            a["is_pol"], a["file_cdf"], a["fv"], a["fvn"], a["decoy"], a["fcomp"], a["vcomp"],
            a["L"], a["E"], a["FS"], a["QS"], a["QC"], a["S"],
            a["prov"], a["prov_n"], a["holder"], a["vot"], a["vot_n"], a["cmask"],
            world.counters, buf,
        )
        world.cycle = end


def run_query_cycle(world: WorldState) -> dict:
    """Advance the world by one query cycle and return what happened.

    The cycle's random draws are a function of the root seed and the cycle
    index only, so replaying a world cycle by cycle matches a batch run.
    """
    events = np.zeros((1, engine.N_EVENT), np.int64)
    before = world.counters.copy()
    _advance(world, world.cycle + 1, events)
    ev = dict(zip(engine.EVENT_FIELDS, (int(x) for x in events[0])))
    ev["version_id"] = world.version_ids[ev["last_version"]].hex() if ev["last_version"] >= 0 else None
    ev["counters"] = {
        name: int(world.counters[i] - before[i])
        for i, name in enumerate(engine.COUNTERS)
        if world.counters[i] != before[i]
    }
    return ev


@dataclass
class ExperimentResult:
    config: SimConfig
    metrics: list[CycleMetrics]
    report: dict
    world: WorldState | None = None

    @property
    def final_fraction(self) -> float | None:
        return self.metrics[-1].fraction_authentic if self.metrics else None

    def totals(self) -> dict[str, int]:
        return self.report["counters"]

    def csv_text(self) -> str:
        return metrics_csv(self.metrics)


def metrics_csv(metrics: Sequence[CycleMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_FIELDS)
    for m in metrics:
        d = asdict(m)
        w.writerow([_fmt(d[k]) for k in METRIC_FIELDS])
    return buf.getvalue()


def environment() -> dict:
    import numba
    import scipy

    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def run_experiment(
    cfg: SimConfig,
    out_dir: str | Path | None = None,
    *,
    keep_world: bool = False,
    progress: Callable[[CycleMetrics], None] | None = None,
) -> ExperimentResult:
    t0 = time.perf_counter()
    world = init_world(cfg)
    t_init = time.perf_counter() - t0
    metrics = []
    q = cfg.query_cycles_per_experimental_cycle
    t1 = time.perf_counter()
    for e in range(cfg.experimental_cycles):
        before = world.counters.copy()
        _advance(world, (e + 1) * q)
        m = CycleMetrics.from_counters(e, world.counters - before)
        metrics.append(m)
        if progress:
            progress(m)
    t_run = time.perf_counter() - t1
    strat = strategy(cfg.strategy)
    report = {
        "config": cfg.to_dict(),
        "strategy": asdict(strat),
        "effective_m": cfg.effective_m(),
        "download_sources": cfg.sources,
        "deviations_from_full_scale": {k: list(v) for k, v in deviations(cfg).items()},
        "world": {
            "users": world.users,
            "polluters": int(world.arrays["is_pol"].sum()),
            "versions": len(world.version_ids),
            "friend_links": int(world.graph.graph.number_of_edges()),
            "v_min": int(world.ip[engine.P_VMIN]),
        },
        "counters": {name: int(world.counters[i]) for i, name in enumerate(engine.COUNTERS)},
        "final_fraction_authentic": metrics[-1].fraction_authentic if metrics else None,
        "friend_db_refreshes": world.refreshes,
        "snapshot": snapshot_hash(world),
        "environment": environment(),
        "timings_s": {"init": round(t_init, 3), "run": round(t_run, 3)},
    }
    result = ExperimentResult(cfg, metrics, report, world if keep_world else None)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(result.csv_text())
        (out / "report.json").write_text(json.dumps(report, indent=2))
    return result


def compare_strategies(
    cfg: SimConfig,
    strategies: Iterable[str],
    seeds: Sequence[int] | None = None,
    out_dir: str | Path | None = None,
) -> list[dict]:
    """Run each strategy on identically seeded worlds; long-format rows."""
    names = list(strategies)
    if len(names) < 2:
        raise ValueError("compare needs at least two strategies")
    for n in names:
        strategy(n)
    rows = []
    reports = {}
    for seed in seeds or [cfg.seed]:
        for n in names:
            res = run_experiment(cfg.replace(strategy=n, seed=seed))
            reports[f"{n}/{seed}"] = res.report
            for m in res.metrics:
                rows.append({"strategy": n, "seed": seed, **asdict(m)})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.csv").write_text(comparison_csv(rows))
        (out / "comparison.json").write_text(json.dumps(
            {"strategies": {n: asdict(STRATEGIES[n]) for n in names}, "runs": reports}, indent=2))
    return rows


def comparison_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fields = ["strategy", "seed"] + METRIC_FIELDS
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in fields])
    return buf.getvalue()


def final_fractions(rows: Sequence[dict]) -> dict[tuple[str, int], float | None]:
    last: dict[tuple[str, int], dict] = {}
    for r in rows:
        key = (r["strategy"], r["seed"])
        if key not in last or r["experimental_cycle"] > last[key]["experimental_cycle"]:
            last[key] = r
    return {k: v["fraction_authentic"] for k, v in last.items()}

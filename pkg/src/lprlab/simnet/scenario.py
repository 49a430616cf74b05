"""Randomized delivery scenarios and their aggregate metrics.

A scenario draws, per trial, a topology from a small pre-built pool, a
source node, an hour of the week, a ranked list of candidate cells, and
the target's true cell. The true cell equals the rank-i candidate with
the probability that rank i is the first hit under the time-of-day
regularity model; with the leftover probability the target is in a
uniform non-candidate cell. A configured strategy then attempts
delivery, and an oracle route to the true cell records whether the
target was reachable at all.

Trials are independent and fully determined by (config, trial index),
so work can be split across processes and merged in any order. Traffic
is normalized by a baseline round trip measured on an independent
stream: one copy sent to a uniform random cell.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from ..analytic import (
    HOURS_PER_WEEK,
    Grouping,
    RegularityModel,
    ghls_breakeven,
    mean_traffic,
    sequential_hit_pmf,
)
from .delivery import (
    DeliveryOutcome,
    _leg_ttl,
    _round_trip,
    build_ghls_binding,
    ghls_deliver,
    ghls_update,
    lpr_deliver,
)
from .gpsr import gpsr_route
from .topology import Topology, build_topology

__all__ = [
    "GhlsComparison",
    "MetricsRecord",
    "ScenarioConfig",
    "TrialRow",
    "aggregate",
    "build_pool",
    "compare_ghls",
    "load_scenario",
    "measure_baseline",
    "run_scenario",
    "run_trials",
]

_STRATEGIES = ("lpr", "oracle", "ghls")
_BASELINE_TRIALS = 2000
_DEFAULT_SWEEP = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 280
    field_size: float = 2500.0
    radio_range: float = 400.0
    pool_size: int = 10
    grid_cells: int = 12
    trials: int = 1000
    n_candidates: int = 12
    strategy: str = "lpr"
    grouping: Grouping | None = None
    f_over_r: tuple[float, ...] = _DEFAULT_SWEEP
    seed: int = 0
    # Candidate, wander, home, and baseline cells stay this many cells
    # away from the field edge; boundary cells often have no node within
    # the acceptance radius, and those failed legs cost face tours.
    cell_margin: int = 1

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.field_size <= 0 or self.radio_range <= 0:
            raise ValueError("field_size and radio_range must be positive")
        if self.pool_size < 1:
            raise ValueError("pool_size must be at least 1")
        if self.grid_cells < 1:
            raise ValueError("grid_cells must be at least 1")
        if self.trials < 0:
            raise ValueError("trials must be non-negative")
        if not 0 <= 2 * self.cell_margin < self.grid_cells:
            raise ValueError("cell_margin must leave at least one eligible cell")
        n_eligible = (self.grid_cells - 2 * self.cell_margin) ** 2
        if not 1 <= self.n_candidates < n_eligible:
            raise ValueError(
                "n_candidates must leave at least one eligible non-candidate cell"
            )
        if self.strategy not in _STRATEGIES:
            raise ValueError(f"strategy must be one of {_STRATEGIES}")
        if self.strategy == "lpr":
            if self.grouping is None:
                raise ValueError("lpr strategy requires a grouping")
            if self.grouping.k > self.n_candidates:
                raise ValueError("grouping covers more ranks than n_candidates")
        if any(f < 0 for f in self.f_over_r):
            raise ValueError("f_over_r values must be non-negative")

    @property
    def cell_size(self) -> float:
        return self.field_size / self.grid_cells

    @property
    def n_cells(self) -> int:
        return self.grid_cells * self.grid_cells

    def cell_center(self, cell_index: int) -> tuple[float, float]:
        x = cell_index % self.grid_cells
        y = cell_index // self.grid_cells
        return ((x + 0.5) * self.cell_size, (y + 0.5) * self.cell_size)

    def eligible_cells(self) -> np.ndarray:
        m = self.cell_margin
        side = np.arange(m, self.grid_cells - m)
        return (side[:, None] * self.grid_cells + side[None, :]).ravel()


def _get(parser: configparser.ConfigParser, section: str, key: str, conv, default):
    if not parser.has_option(section, key):
        if default is not None:
            return default
        raise ValueError(f"missing required option [{section}] {key}")
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad value for [{section}] {key}: {raw!r}") from exc


def load_scenario(path: str) -> ScenarioConfig:
    """Parse a scenario description from an INI file.

    Sections: [topology] n, field_size, radio_range, pool, grid_cells,
    cell_margin; [traffic] trials, n_candidates; [strategy] kind plus
    either grouping (stage sizes joined by '|') or k (fully serial);
    optional [ghls] f_over_r (comma-separated sweep); [seeds] seed.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read scenario file: {path}")
    for section in ("topology", "traffic", "strategy"):
        if not parser.has_section(section):
            raise ValueError(f"missing required section [{section}]")

    kind = _get(parser, "strategy", "kind", str, None).strip().lower()
    grouping = None
    has_grouping = parser.has_option("strategy", "grouping")
    has_k = parser.has_option("strategy", "k")
    if has_grouping and has_k:
        raise ValueError("give [strategy] grouping or k, not both")
    if has_grouping:
        grouping = _get(parser, "strategy", "grouping", Grouping.parse, None)
    elif has_k:
        grouping = Grouping.serial(_get(parser, "strategy", "k", int, None))

    sweep: tuple[float, ...] = _DEFAULT_SWEEP
    if parser.has_option("ghls", "f_over_r"):
        raw = parser.get("ghls", "f_over_r")
        try:
            sweep = tuple(float(part) for part in raw.split(",") if part.strip())
        except ValueError as exc:
            raise ValueError(f"bad value for [ghls] f_over_r: {raw!r}") from exc
        if not sweep:
            raise ValueError("[ghls] f_over_r must list at least one value")

    seed = 0
    if parser.has_section("seeds"):
        seed = _get(parser, "seeds", "seed", int, 0)

    try:
        return ScenarioConfig(
            n=_get(parser, "topology", "n", int, None),
            field_size=_get(parser, "topology", "field_size", float, None),
            radio_range=_get(parser, "topology", "radio_range", float, None),
            pool_size=_get(parser, "topology", "pool", int, 10),
            grid_cells=_get(parser, "topology", "grid_cells", int, 12),
            cell_margin=_get(parser, "topology", "cell_margin", int, 1),
            trials=_get(parser, "traffic", "trials", int, None),
            n_candidates=_get(parser, "traffic", "n_candidates", int, None),
            strategy=kind,
            grouping=grouping,
            f_over_r=sweep,
            seed=seed,
        )
    except ValueError:
        raise


@dataclass(frozen=True)
class TrialRow:
    index: int
    hour: int
    true_rank: int
    reachable: bool
    success: bool
    latency_factor: float
    transmissions: int
    update_hops: int = -1


@dataclass(frozen=True)
class MetricsRecord:
    n_trials: int
    n_success: int = 0
    n_reachable: int = 0
    delivery_ratio: float | None = None
    reachability: float | None = None
    ratio_vs_reachability: float | None = None
    mean_latency_factor: float | None = None
    p50_latency_factor: float | None = None
    p90_latency_factor: float | None = None
    mean_transmissions: float | None = None
    baseline_rtt: float | None = None
    traffic_factor: float | None = None
    wander_fraction: float | None = None
    mean_update_hops: float | None = None

    def as_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "n_success": self.n_success,
            "n_reachable": self.n_reachable,
            "delivery_ratio": self.delivery_ratio,
            "reachability": self.reachability,
            "ratio_vs_reachability": self.ratio_vs_reachability,
            "mean_latency_factor": self.mean_latency_factor,
            "p50_latency_factor": self.p50_latency_factor,
            "p90_latency_factor": self.p90_latency_factor,
            "mean_transmissions": self.mean_transmissions,
            "baseline_rtt": self.baseline_rtt,
            "traffic_factor": self.traffic_factor,
            "wander_fraction": self.wander_fraction,
            "mean_update_hops": self.mean_update_hops,
        }


def build_pool(config: ScenarioConfig) -> list[Topology]:
    """Deterministic pool of connected topologies for a scenario."""
    pool: list[Topology] = []
    attempt = 0
    while len(pool) < config.pool_size:
        if attempt >= 10000:
            raise RuntimeError("could not build enough connected topologies")
        topo = build_topology(
            config.n,
            config.field_size,
            config.radio_range,
            seed=[config.seed, 101, attempt],
        )
        attempt += 1
        if topo.connected:
            pool.append(topo)
    return pool


def _run_one(config: ScenarioConfig, pool: Sequence[Topology], index: int) -> TrialRow:
    rng = np.random.default_rng([config.seed, 7, index])
    topo = pool[index % len(pool)]
    src = int(rng.integers(topo.n))
    hour = int(rng.integers(HOURS_PER_WEEK))
    eligible = config.eligible_cells()
    cand_idx = rng.choice(eligible, size=config.n_candidates, replace=False)

    model = RegularityModel()
    pmf = sequential_hit_pmf(model(hour + 0.5), config.n_candidates)
    u = float(rng.random())
    true_rank = 0
    cum = 0.0
    for i, mass in enumerate(pmf, start=1):
        cum += mass
        if u < cum:
            true_rank = i
            break
    if true_rank > 0:
        true_cell = int(cand_idx[true_rank - 1])
    else:
        outside = np.setdiff1d(eligible, cand_idx)
        true_cell = int(rng.choice(outside))
    true_position = config.cell_center(true_cell)
    radius = config.cell_size

    oracle_route = gpsr_route(topo, src, true_position, radius, ttl=_leg_ttl(topo))
    reachable = oracle_route.success
    update_hops = -1

    if config.strategy == "oracle":
        transmissions = oracle_route.hops
        if reachable:
            resp = gpsr_route(
                topo, oracle_route.path[-1], topo.position(src), 0.0, ttl=_leg_ttl(topo)
            )
            transmissions += resp.hops
        outcome = DeliveryOutcome(reachable, 1.0, transmissions, 1)
    elif config.strategy == "lpr":
        assert config.grouping is not None
        positions = [config.cell_center(int(c)) for c in cand_idx]
        outcome = lpr_deliver(
            topo,
            src,
            positions,
            config.grouping,
            true_position=true_position,
            acceptance_radius=radius,
        )
    else:
        binding = build_ghls_binding(
            topo,
            index,
            true_position,
            config.grid_cells,
            config.cell_size,
            margin=config.cell_margin,
        )
        outcome = ghls_deliver(
            topo,
            src,
            binding,
            true_position=true_position,
            acceptance_radius=radius,
        )
        updater = int(rng.integers(topo.n))
        update_hops = ghls_update(topo, updater, binding, radius)

    return TrialRow(
        index=index,
        hour=hour,
        true_rank=true_rank,
        reachable=reachable,
        success=outcome.success,
        latency_factor=outcome.latency_factor,
        transmissions=outcome.transmissions,
        update_hops=update_hops,
    )


def run_trials(
    config: ScenarioConfig,
    indices: Iterable[int],
    pool: Sequence[Topology] | None = None,
) -> list[TrialRow]:
    """Run the given trial indices; any disjoint split merges cleanly."""
    if pool is None:
        pool = build_pool(config)
    return [_run_one(config, pool, int(i)) for i in indices]


def measure_baseline(
    config: ScenarioConfig, pool: Sequence[Topology] | None = None
) -> float | None:
    """Mean round-trip transmissions of one copy to a uniform random cell.

    Measured on an RNG stream independent of the trial stream, so the
    normalization never reuses scenario randomness.
    """
    if config.trials == 0:
        return None
    if pool is None:
        pool = build_pool(config)
    n_probes = min(config.trials, _BASELINE_TRIALS)
    eligible = config.eligible_cells()
    total = 0
    for b in range(n_probes):
        rng = np.random.default_rng([config.seed, 13, b])
        topo = pool[b % len(pool)]
        src = int(rng.integers(topo.n))
        cell = int(eligible[rng.integers(len(eligible))])
        _, _, cost = _round_trip(
            topo, src, config.cell_center(cell), config.cell_size
        )
        total += cost
    return total / n_probes


def aggregate(
    rows: Sequence[TrialRow], baseline_rtt: float | None
) -> MetricsRecord:
    """Order-independent reduction of trial rows to summary metrics."""
    n = len(rows)
    if n == 0:
        return MetricsRecord(n_trials=0)
    n_success = sum(1 for r in rows if r.success)
    n_reachable = sum(1 for r in rows if r.reachable)
    delivery = n_success / n
    reachability = n_reachable / n
    ratio = delivery / reachability if reachability > 0 else None
    latencies = np.array([r.latency_factor for r in rows], dtype=float)
    mean_tx = float(np.mean([r.transmissions for r in rows]))
    traffic = None
    if baseline_rtt is not None and baseline_rtt > 0:
        traffic = mean_tx / baseline_rtt
    updates = [r.update_hops for r in rows if r.update_hops >= 0]
    return MetricsRecord(
        n_trials=n,
        n_success=n_success,
        n_reachable=n_reachable,
        delivery_ratio=delivery,
        reachability=reachability,
        ratio_vs_reachability=ratio,
        mean_latency_factor=float(latencies.mean()),
        p50_latency_factor=float(np.percentile(latencies, 50)),
        p90_latency_factor=float(np.percentile(latencies, 90)),
        mean_transmissions=mean_tx,
        baseline_rtt=baseline_rtt,
        traffic_factor=traffic,
        wander_fraction=sum(1 for r in rows if r.true_rank == 0) / n,
        mean_update_hops=(sum(updates) / len(updates)) if updates else None,
    )


def run_scenario(config: ScenarioConfig) -> tuple[MetricsRecord, list[TrialRow]]:
    pool = build_pool(config)
    rows = run_trials(config, range(config.trials), pool)
    baseline = measure_baseline(config, pool)
    return aggregate(rows, baseline), rows


@dataclass(frozen=True)
class GhlsComparison:
    f_over_r: tuple[float, ...]
    lpr_totals: tuple[float, ...]
    ghls_totals: tuple[float, ...]
    crossover: float | None
    analytic_crossover: float
    s_hat: float
    p_hat: float
    t_bar: float
    lpr_request_cost: float
    ghls_request_cost: float
    update_cost: float
    n_trials: int

    def as_dict(self) -> dict:
        return {
            "f_over_r": list(self.f_over_r),
            "lpr_totals": list(self.lpr_totals),
            "ghls_totals": list(self.ghls_totals),
            "crossover": self.crossover,
            "analytic_crossover": self.analytic_crossover,
            "s_hat": self.s_hat,
            "p_hat": self.p_hat,
            "t_bar": self.t_bar,
            "lpr_request_cost": self.lpr_request_cost,
            "ghls_request_cost": self.ghls_request_cost,
            "update_cost": self.update_cost,
            "n_trials": self.n_trials,
        }


def compare_ghls(
    config: ScenarioConfig,
    runner: Callable[[ScenarioConfig], tuple[MetricsRecord, list[TrialRow]]]
    | None = None,
) -> GhlsComparison:
    """Paired profile-vs-location-service traffic totals over a rate sweep.

    Both strategies see identical trial draws. Totals are transmissions
    per location request with the update rate folded in: the profile
    side pays nothing per update, the service side pays one update route
    per f/r. The crossover is the f/r where the totals meet. A runner
    (same contract as run_scenario) lets callers parallelize the trials.
    """
    if config.grouping is None:
        raise ValueError("compare_ghls requires a grouping")
    if config.trials == 0:
        raise ValueError("compare_ghls requires at least one trial")
    run = run_scenario if runner is None else runner
    lpr_record, _ = run(replace(config, strategy="lpr"))
    ghls_record, _ = run(replace(config, strategy="ghls"))
    m_lpr = lpr_record.mean_transmissions
    m_ghls = ghls_record.mean_transmissions
    m_update = ghls_record.mean_update_hops
    assert m_lpr is not None and m_ghls is not None and m_update is not None
    baseline = lpr_record.baseline_rtt
    assert baseline is not None
    s_hat = m_update
    p_hat = baseline / 2.0
    t_bar = mean_traffic(config.grouping)
    crossover = (m_lpr - m_ghls) / m_update if m_update > 0 else None
    lpr_totals = tuple(m_lpr for _ in config.f_over_r)
    ghls_totals = tuple(fr * m_update + m_ghls for fr in config.f_over_r)
    return GhlsComparison(
        f_over_r=config.f_over_r,
        lpr_totals=lpr_totals,
        ghls_totals=ghls_totals,
        crossover=crossover,
        analytic_crossover=ghls_breakeven(p_hat / s_hat, t_bar),
        s_hat=s_hat,
        p_hat=p_hat,
        t_bar=t_bar,
        lpr_request_cost=m_lpr,
        ghls_request_cost=m_ghls,
        update_cost=m_update,
        n_trials=config.trials,
    )

"""Synthetic human-mobility traces with calibrated marginal statistics.

The generator reproduces three empirical regularities: the hour-of-week
top-location regularity R(t), the ranked-location success model behind the
closed-form curves, and a floor of unpredictable visits (uniform random
cells, 7% by default). Each user gets N home cells in a random rank order;
each hour the user either wanders (floor mass) or occupies one of its home
cells with rank masses drawn from the same sequential first-hit family the
analytic module integrates. That choice makes success-after-k statistics
on generated traces line up with the closed-form curves by construction;
the rank masses are a modeling choice, since only the marginals are
specified by the models being matched.

Also here: empirical measurement of regularity and of success-after-k on
arbitrary traces, used to validate generated data against the models.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .analytic import HOURS_PER_WEEK, RegularityModel, regularity, sequential_hit_pmf
from .profile import CellId, ObservationTrace, SlotConfig, build_profile, top_k

__all__ = [
    "CellGrid",
    "MobilityParams",
    "generate_trace",
    "empirical_regularity",
    "empirical_success_after_k",
    "empirical_rank_frequencies",
]

logger = logging.getLogger(__name__)

_MIN_REGULARITY = 1e-9


@dataclass(frozen=True)
class CellGrid:
    """Rectangular cell grid; cell_size is meters per cell edge."""

    width: int = 50
    height: int = 50
    cell_size: float = 1000.0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def cell_of_index(self, flat: int) -> CellId:
        return CellId(flat % self.width, flat // self.width)


@dataclass(frozen=True)
class MobilityParams:
    n_users: int = 40
    n_weeks: int = 6
    n_locations: int = 40  # home cells per user; k <= 12 is far from truncation
    regularity_model: RegularityModel = field(default_factory=RegularityModel)
    unpredictable_floor: float = 0.07
    grid: CellGrid = field(default_factory=CellGrid)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_users < 1:
            raise ValueError(f"n_users must be >= 1, got {self.n_users}")
        if self.n_weeks < 1:
            raise ValueError(f"n_weeks must be >= 1, got {self.n_weeks}")
        if self.n_locations < 2:
            raise ValueError(f"n_locations must be >= 2, got {self.n_locations}")
        if not 0.0 <= self.unpredictable_floor <= 0.3:
            raise ValueError(
                f"unpredictable_floor must be in [0, 0.3], got {self.unpredictable_floor}"
            )
        if self.n_locations > self.grid.n_cells:
            raise ValueError("n_locations exceeds grid cell count")


def _slot_rank_cdf(params: MobilityParams) -> np.ndarray:
    """Cumulative conditional rank masses, one row per hour of week.

    Row t holds the within-home-branch CDF over ranks 1..N for hour t. The
    raw first-hit masses are taken at the floor-adjusted regularity and
    scaled up by 1/(1 - floor) so that the unconditional top-1 mass lands
    exactly on R(t); the running sum is capped at 1 and any remainder
    (small floors only) is pushed onto the last rank so each row is a
    proper distribution.
    """
    n = params.n_locations
    floor = params.unpredictable_floor
    floor_per_cell = floor / params.grid.n_cells
    table = np.empty((HOURS_PER_WEEK, n))
    clamped = 0
    for t in range(HOURS_PER_WEEK):
        r = regularity(t + 0.5, params.regularity_model) - floor_per_cell
        if not _MIN_REGULARITY <= r <= 1.0 - _MIN_REGULARITY:
            clamped += 1
            r = min(max(r, _MIN_REGULARITY), 1.0 - _MIN_REGULARITY)
        masses = np.array(sequential_hit_pmf(r, n))
        if floor < 1.0:
            masses /= 1.0 - floor
        cum = np.minimum(np.cumsum(masses), 1.0)
        cum[-1] = 1.0
        table[t] = cum
    if clamped:
        logger.warning(
            "regularity target out of (0, 1) for %d hours; clamped", clamped
        )
    return table


def generate_trace(params: MobilityParams) -> list[ObservationTrace]:
    """One trace per user, hourly observations over n_weeks.

    Deterministic for a given params.seed, and per-user streams are split
    from the seed independently, so any parallel or reordered execution
    yields identical traces.
    """
    grid = params.grid
    n_slots = params.n_weeks * HOURS_PER_WEEK
    rank_cdf = _slot_rank_cdf(params)
    sow = np.arange(n_slots, dtype=np.int64) % HOURS_PER_WEEK
    slot_cdf = rank_cdf[sow]  # (n_slots, N)

    traces = []
    for user in range(params.n_users):
        rng = np.random.default_rng([params.seed, user])
        home_flat = rng.choice(grid.n_cells, size=params.n_locations, replace=False)
        branch = rng.random(n_slots)
        rank_u = rng.random(n_slots)
        wander_flat = rng.integers(0, grid.n_cells, size=n_slots)

        ranks = (rank_u[:, None] >= slot_cdf).sum(axis=1)  # 0-based rank index
        flat = home_flat[ranks]
        unpredictable = branch < params.unpredictable_floor
        flat = np.where(unpredictable, wander_flat, flat)

        cells = np.column_stack([flat % grid.width, flat // grid.width]).astype(
            np.int32
        )
        traces.append(
            ObservationTrace(f"u{user:04d}", np.arange(n_slots, dtype=np.int64), cells)
        )
    return traces


def _modal_hits_per_slot(
    trace: ObservationTrace, slot_config: SlotConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per slot-of-week: observations matching this user's modal cell, and totals."""
    spw = slot_config.slots_per_week
    sow = (trace.slots % spw).astype(np.int64)
    rows = np.column_stack(
        [sow, trace.cells[:, 0].astype(np.int64), trace.cells[:, 1].astype(np.int64)]
    )
    urows, counts = np.unique(rows, axis=0, return_counts=True)
    slot_col = urows[:, 0]
    hits = np.zeros(spw, dtype=np.int64)
    np.maximum.at(hits, slot_col, counts)  # modal cell count per slot
    totals = np.bincount(sow, minlength=spw).astype(np.int64)
    hits[totals == 0] = 0
    return hits, totals


def empirical_regularity(
    traces: list[ObservationTrace], slot_config: SlotConfig | None = None
) -> np.ndarray:
    """Fraction of observations at the user's modal cell, per slot of week.

    Slots with no observations at all come back as NaN.
    """
    if not traces:
        raise ValueError("need at least one trace")
    if slot_config is None:
        slot_config = SlotConfig()
    spw = slot_config.slots_per_week
    hits = np.zeros(spw, dtype=np.int64)
    totals = np.zeros(spw, dtype=np.int64)
    for trace in traces:
        h, t = _modal_hits_per_slot(trace, slot_config)
        hits += h
        totals += t
    with np.errstate(invalid="ignore"):
        return np.where(totals > 0, hits / np.maximum(totals, 1), np.nan)


def empirical_success_after_k(
    traces: list[ObservationTrace],
    k: int,
    slot_config: SlotConfig | None = None,
) -> float:
    """Held-out success rate of top-k prediction from per-user profiles.

    The first half of each trace trains an order-1 profile; the second
    half is scored: an observation counts as a hit when its cell is among
    the profile's top k for that slot of week.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not traces:
        raise ValueError("need at least one trace")
    if slot_config is None:
        slot_config = SlotConfig()
    spw = slot_config.slots_per_week

    hits = 0
    total = 0
    for trace in traces:
        split = len(trace) // 2
        if split == 0 or split == len(trace):
            continue
        train = ObservationTrace(
            trace.node_id, trace.slots[:split], trace.cells[:split]
        )
        prof = build_profile(train, order=1, slot_config=slot_config)
        top_by_sow: dict[int, set[CellId]] = {}
        test_slots = trace.slots[split:]
        test_cells = trace.cells[split:]
        for i in range(len(test_slots)):
            sow = int(test_slots[i]) % spw
            if sow not in top_by_sow:
                top_by_sow[sow] = set(top_k(prof, sow, k))
            cell = CellId(int(test_cells[i, 0]), int(test_cells[i, 1]))
            hits += cell in top_by_sow[sow]
            total += 1
    if total == 0:
        raise ValueError("traces too short to split into train and test halves")
    return hits / total


def empirical_rank_frequencies(
    traces: list[ObservationTrace], n_ranks: int
) -> np.ndarray:
    """Pooled visit counts by per-user frequency rank, most visited first.

    Each user's cells are ranked by that user's own visit counts; counts
    are then summed across users rank by rank. Length is n_ranks, zero
    padded when a user has fewer distinct cells.
    """
    if not traces:
        raise ValueError("need at least one trace")
    pooled = np.zeros(n_ranks, dtype=np.int64)
    for trace in traces:
        flat = trace.cells[:, 0].astype(np.int64) * (2**21) + trace.cells[:, 1]
        _, counts = np.unique(flat, return_counts=True)
        counts = np.sort(counts)[::-1][:n_ranks]
        pooled[: len(counts)] += counts
    return pooled

"""Closed-form models for location-profile query success and cost.

A node's visited locations, ranked by how often they are visited, follow a
truncated Zipf law whose rank-1 mass is the node's regularity. Querying the
top-k ranked locations one after another then succeeds with a probability
that has a closed form: the rank of the currently occupied location behaves
like the first success of a sequence of trials whose success probability is
itself Beta-distributed, which telescopes into a ratio of Beta functions.

Three layers build on each other here:

- zeroth order: constant regularity ``c``, success CDF over k,
- time dependence: a sinusoidal hour-of-week regularity model,
- first order: the zeroth-order form averaged over a traffic density on
  the hour-of-week, evaluated as a midpoint sum over 168 hourly bins.

On top of the CDF sit the grouping cost model (mean latency factor and mean
transmission factor of a partition of the top-k candidates into serial
stages of parallel probes), exhaustive Pareto enumeration over groupings,
and the break-even comparison against a home-server scheme that pays
per-movement location updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

__all__ = [
    "DEFAULT_C",
    "DEFAULT_C1",
    "DEFAULT_C2",
    "DEFAULT_C3",
    "HOURS_PER_WEEK",
    "ZipfModel",
    "BetaGeometricModel",
    "RegularityModel",
    "TrafficDensity",
    "Grouping",
    "ParetoPoint",
    "GhlsCostModel",
    "log_beta",
    "zeroth_order_cdf",
    "zeroth_order_pmf",
    "regularity",
    "first_order_cdf",
    "first_order_pmf",
    "conditional_cdf_at_time",
    "sequential_hit_pmf",
    "group_try_probability",
    "mean_latency",
    "mean_traffic",
    "enumerate_groupings",
    "pareto_front",
    "knee_point",
    "ghls_breakeven",
    "ghls_total_cost",
    "lpr_total_cost",
]

# Calibrated constants: rank-1 Zipf mass and the three regularity
# coefficients (two sinusoid amplitudes and the weekly mean).
DEFAULT_C = 0.48
DEFAULT_C1 = 0.148
DEFAULT_C2 = 0.077
DEFAULT_C3 = 0.657

HOURS_PER_WEEK = 168

_MAX_GROUPING_K = 20  # 2**(k-1) compositions; keeps enumeration tractable


def log_beta(a: float, b: float) -> float:
    """Natural log of the Beta function, via log-gamma.

    Direct gamma ratios overflow near k ~ 170; the log form is stable for
    every k this module evaluates.
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"log_beta requires positive arguments, got ({a}, {b})")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@dataclass(frozen=True)
class ZipfModel:
    """Truncated Zipf location popularity: rank i carries mass c/i.

    With the default ``c`` the masses are taken as-is (they do not sum to 1
    over any finite truncation; the remainder is the unpredictable visit
    mass). ``n_truncation`` bounds the ranks that carry candidate mass.
    """

    c: float = DEFAULT_C
    n_truncation: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.c < 1:
            raise ValueError(f"c must be in (0, 1), got {self.c}")
        if self.n_truncation is not None and self.n_truncation < 1:
            raise ValueError(f"n_truncation must be >= 1, got {self.n_truncation}")

    def mass(self, rank: int) -> float:
        """Raw mass c/rank for 1-based rank."""
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        if self.n_truncation is not None and rank > self.n_truncation:
            return 0.0
        return self.c / rank


@dataclass(frozen=True)
class BetaGeometricModel:
    """Success-rank distribution: K ~ Geometric(L), L ~ Beta(a, b).

    The default shapes (a, b) = (c, 1 - c) reproduce the Zipf-consistent
    form exactly: survival(k) = 1 / (k * B(k, 1 - c)). Alternative shapes
    can be supplied for refitted variants.
    """

    c: float = DEFAULT_C
    a: float | None = None
    b: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.c < 1:
            raise ValueError(f"c must be in (0, 1), got {self.c}")
        if (self.a is None) != (self.b is None):
            raise ValueError("a and b must be supplied together")
        if self.a is not None and (self.a <= 0 or self.b <= 0):
            raise ValueError(f"shape parameters must be positive, got ({self.a}, {self.b})")

    @property
    def shape_a(self) -> float:
        return self.c if self.a is None else self.a

    @property
    def shape_b(self) -> float:
        return 1.0 - self.c if self.b is None else self.b

    def survival(self, k: int) -> float:
        """P(K > k) = B(a, b + k) / B(a, b)."""
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")
        if k == 0:
            return 1.0
        a, b = self.shape_a, self.shape_b
        return math.exp(log_beta(a, b + k) - log_beta(a, b))

    def cdf(self, k: int) -> float:
        """P(K <= k), success probability after probing the top k ranks."""
        return 1.0 - self.survival(k)


def zeroth_order_cdf(k: int, model: BetaGeometricModel | None = None) -> float:
    """Success probability after k ranked probes at constant regularity.

    For the Zipf-consistent shapes this is 1 - 1/(k * B(k, 1 - c)). k = 0
    means no probes and returns 0.
    """
    if not isinstance(k, int) or isinstance(k, bool):
        raise ValueError(f"k must be an integer, got {k!r}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return 0.0
    if model is None:
        model = BetaGeometricModel()
    if model.a is None:
        if k == 1:
            # B(1, 1 - c) = 1/(1 - c), so the formula collapses to c; skip
            # the exp/log round trip to keep it exact.
            return model.c
        # Canonical form; identical to the survival ratio but written the
        # way the model is usually quoted.
        return 1.0 - math.exp(-math.log(k) - log_beta(k, 1.0 - model.c))
    return model.cdf(k)


def zeroth_order_pmf(k: int, model: BetaGeometricModel | None = None) -> float:
    """Probability that probe k is the first success; telescopes from the CDF."""
    if not isinstance(k, int) or isinstance(k, bool):
        raise ValueError(f"k must be an integer, got {k!r}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return zeroth_order_cdf(k, model) - zeroth_order_cdf(k - 1, model)


@dataclass(frozen=True)
class RegularityModel:
    """Hour-of-week regularity R(t), two sinusoids plus a constant mean.

    t = 0 is Monday 00:00; the daily and half-daily periods make every day
    of the week identical.
    """

    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2
    c3: float = DEFAULT_C3

    def __call__(self, t: float) -> float:
        return regularity(t, self)


def regularity(t: float, model: RegularityModel | None = None) -> float:
    """R(t) for hour-of-week t in [0, 168)."""
    if model is None:
        model = RegularityModel()
    if not 0 <= t < HOURS_PER_WEEK:
        raise ValueError(f"t must be in [0, {HOURS_PER_WEEK}), got {t}")
    return (
        model.c1 * math.sin(2.0 * math.pi * t / 24.0 + 2.0 * math.pi / 8.0)
        + model.c2 * math.sin(2.0 * math.pi * t / 12.0 - 2.0 * math.pi / 24.0)
        + model.c3
    )


@dataclass(frozen=True)
class TrafficDensity:
    """Query arrival density over the 168 hour-of-week bins.

    Weights must be non-negative and sum to 1 within 1e-9. The default is
    uniform: queries are equally likely at any hour.
    """

    weights: tuple[float, ...] = field(
        default_factory=lambda: (1.0 / HOURS_PER_WEEK,) * HOURS_PER_WEEK
    )

    def __post_init__(self) -> None:
        if len(self.weights) != HOURS_PER_WEEK:
            raise ValueError(
                f"density needs {HOURS_PER_WEEK} weights, got {len(self.weights)}"
            )
        if any(w < 0 for w in self.weights):
            raise ValueError("density weights must be non-negative")
        total = sum(self.weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"density weights must sum to 1, got {total}")

    @classmethod
    def uniform(cls) -> "TrafficDensity":
        return cls()


def _conditional_cdf(k: int, r: float) -> float:
    """Success CDF after k probes given instantaneous regularity r."""
    if k == 0:
        return 0.0
    return 1.0 - math.exp(-math.log(k) - log_beta(k, 1.0 - r))


def conditional_cdf_at_time(
    k: int, t: float, model: RegularityModel | None = None
) -> float:
    """Success probability after k probes for a query arriving at hour t."""
    if not isinstance(k, int) or isinstance(k, bool):
        raise ValueError(f"k must be an integer, got {k!r}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return _conditional_cdf(k, regularity(t, model))


def first_order_cdf(
    k: int,
    model: RegularityModel | None = None,
    density: TrafficDensity | None = None,
) -> float:
    """Traffic-weighted success probability after k ranked probes.

    Averages the conditional CDF over the hour-of-week, evaluating each of
    the 168 hourly bins at its midpoint t + 0.5 and weighting by the traffic
    density. The midpoint sum is the fixed quadrature; quoted values refer
    to it rather than to the underlying integral.
    """
    if not isinstance(k, int) or isinstance(k, bool):
        raise ValueError(f"k must be an integer, got {k!r}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return 0.0
    if model is None:
        model = RegularityModel()
    if density is None:
        density = TrafficDensity.uniform()
    total = 0.0
    for t in range(HOURS_PER_WEEK):
        total += density.weights[t] * _conditional_cdf(k, regularity(t + 0.5, model))
    return total


def first_order_pmf(
    k: int,
    model: RegularityModel | None = None,
    density: TrafficDensity | None = None,
) -> float:
    """Probability that probe k is the first success, traffic-weighted."""
    if not isinstance(k, int) or isinstance(k, bool):
        raise ValueError(f"k must be an integer, got {k!r}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return first_order_cdf(k, model, density) - first_order_cdf(k - 1, model, density)


def sequential_hit_pmf(r: float, n: int) -> list[float]:
    """Per-rank hit masses for n ranked candidates at regularity r.

    Element i (0-based) is the probability that the node sits at its rank
    i+1 location: the first-success mass cdf(i+1) - cdf(i). The masses sum
    to cdf(n) < 1; the remainder is the unpredictable visit mass. Shared by
    the trace generator and the simulator's target placement.
    """
    if not 0 < r < 1:
        raise ValueError(f"regularity must be in (0, 1), got {r}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cdf_prev = 0.0
    masses = []
    for k in range(1, n + 1):
        cdf_k = _conditional_cdf(k, r)
        masses.append(cdf_k - cdf_prev)
        cdf_prev = cdf_k
    return masses


@dataclass(frozen=True)
class Grouping:
    """Ordered partition of the top-k candidates into serial stages.

    Stage sizes are probed left to right; all candidates inside one stage
    are probed in parallel. sizes = (k,) is fully parallel, (1,) * k is
    fully serial.
    """

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sizes:
            raise ValueError("grouping needs at least one stage")
        if any(not isinstance(s, int) or isinstance(s, bool) or s < 1 for s in self.sizes):
            raise ValueError(f"stage sizes must be positive integers, got {self.sizes}")

    @property
    def k(self) -> int:
        return sum(self.sizes)

    def start_rank(self, g_index: int) -> int:
        """1-based rank of the first candidate probed by stage g_index."""
        if not 0 <= g_index < len(self.sizes):
            raise ValueError(f"stage index out of range: {g_index}")
        return 1 + sum(self.sizes[:g_index])

    @classmethod
    def serial(cls, k: int) -> "Grouping":
        return cls((1,) * k)

    @classmethod
    def parallel(cls, k: int) -> "Grouping":
        return cls((k,))

    @classmethod
    def parse(cls, text: str) -> "Grouping":
        """Parse a '|'-separated size list, e.g. '1|2|9'."""
        try:
            sizes = tuple(int(part) for part in text.split("|"))
        except ValueError as exc:
            raise ValueError(f"bad grouping text {text!r}") from exc
        return cls(sizes)

    def __str__(self) -> str:
        return "|".join(str(s) for s in self.sizes)


def group_try_probability(
    g_index: int,
    grouping: Grouping,
    model: RegularityModel | None = None,
    density: TrafficDensity | None = None,
) -> float:
    """Probability that stage g_index (0-based) is actually probed.

    A stage runs exactly when every earlier rank missed: 1 - cdf(start - 1)
    where start is the stage's first rank. Stage 0 always runs.
    """
    start = grouping.start_rank(g_index)
    return 1.0 - first_order_cdf(start - 1, model, density)


def mean_latency(
    grouping: Grouping,
    model: RegularityModel | None = None,
    density: TrafficDensity | None = None,
) -> float:
    """Expected number of serial stages paid, in units of one stage RTT.

    Sum over stages of the probability the stage runs. Misses pay every
    stage; the fully parallel grouping has latency factor 1.
    """
    return sum(
        group_try_probability(i, grouping, model, density)
        for i in range(len(grouping.sizes))
    )


def mean_traffic(
    grouping: Grouping,
    model: RegularityModel | None = None,
    density: TrafficDensity | None = None,
) -> float:
    """Expected number of candidate probes sent, in units of one probe.

    Sum over stages of size times the probability the stage runs. Fully
    serial sends the fewest probes, fully parallel sends all k.
    """
    return sum(
        size * group_try_probability(i, grouping, model, density)
        for i, size in enumerate(grouping.sizes)
    )


def enumerate_groupings(k: int) -> list[Grouping]:
    """All ordered stage partitions of k, lexicographic by size tuple.

    There are 2**(k-1) of them; k is capped to keep that in check.
    """
    if not isinstance(k, int) or isinstance(k, bool):
        raise ValueError(f"k must be an integer, got {k!r}")
    if not 1 <= k <= _MAX_GROUPING_K:
        raise ValueError(f"k must be in [1, {_MAX_GROUPING_K}], got {k}")

    def compose(remaining: int) -> Iterator[tuple[int, ...]]:
        if remaining == 0:
            yield ()
            return
        for first in range(1, remaining + 1):
            for rest in compose(remaining - first):
                yield (first, *rest)

    return [Grouping(sizes) for sizes in compose(k)]


class ParetoPoint(NamedTuple):
    grouping: Grouping
    latency: float
    traffic: float


def pareto_front(
    k: int,
    model: RegularityModel | None = None,
    density: TrafficDensity | None = None,
) -> list[ParetoPoint]:
    """Non-dominated (latency, traffic) groupings for top-k probing.

    A point is kept when no other grouping is at least as good on both
    means and strictly better on one. Sorted by latency ascending; ties
    broken by fewer stages, then lexicographic sizes. The fully parallel
    grouping (latency 1) is always present.
    """
    # The stage-start CDF values are shared across groupings; precompute.
    cdf = [first_order_cdf(i, model, density) for i in range(k + 1)]

    points = []
    for grouping in enumerate_groupings(k):
        lat = 0.0
        traf = 0.0
        start = 1
        for size in grouping.sizes:
            p_try = 1.0 - cdf[start - 1]
            lat += p_try
            traf += size * p_try
            start += size
        points.append(ParetoPoint(grouping, lat, traf))

    eps = 1e-12  # tolerate float noise when comparing equal means
    front = []
    for p in points:
        dominated = False
        for q in points:
            if (
                q.latency <= p.latency + eps
                and q.traffic <= p.traffic + eps
                and (q.latency < p.latency - eps or q.traffic < p.traffic - eps)
            ):
                dominated = True
                break
        if not dominated:
            front.append(p)
    front.sort(key=lambda p: (p.latency, len(p.grouping.sizes), p.grouping.sizes))
    return front


def knee_point(front: Sequence[ParetoPoint]) -> ParetoPoint:
    """Balanced point of a front: minimal sum of normalized means.

    Latency is normalized to [0, 1] over the front's own range above the
    floor of 1; traffic likewise over [1, k]. Ties prefer fewer stages,
    then lexicographic sizes.
    """
    if not front:
        raise ValueError("front is empty")
    lat_span = max(p.latency for p in front) - 1.0
    traf_span = max(p.traffic for p in front) - 1.0

    def score(p: ParetoPoint) -> tuple[float, int, tuple[int, ...]]:
        ln = (p.latency - 1.0) / lat_span if lat_span > 0 else 0.0
        tn = (p.traffic - 1.0) / traf_span if traf_span > 0 else 0.0
        return (ln + tn, len(p.grouping.sizes), p.grouping.sizes)

    return min(front, key=score)


@dataclass(frozen=True)
class GhlsCostModel:
    """Per-node cost terms for the home-server comparison.

    f: movement events per query interval (location updates sent),
    r: queries per interval,
    s: mean hop count of a one-way leg to the home server,
    p: mean hop count of a one-way leg to the target area,
    t_bar: mean transmission factor of the profile-based strategy.
    """

    f: float
    r: float
    s: float
    p: float
    t_bar: float

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if self.f < 0 or self.s < 0 or self.p < 0:
            raise ValueError("f, s, p must be non-negative")
        if self.t_bar < 1:
            raise ValueError(f"t_bar must be >= 1, got {self.t_bar}")


def ghls_total_cost(m: GhlsCostModel) -> float:
    """Home-server transmissions per query interval.

    f updates of s hops, plus per query a 2s round trip to the server and
    a 2p round trip to the target.
    """
    return m.f * m.s + m.r * (2.0 * m.s + 2.0 * m.p)


def lpr_total_cost(m: GhlsCostModel) -> float:
    """Profile-routing transmissions per query interval: 2p per probe."""
    return m.r * 2.0 * m.t_bar * m.p


def ghls_breakeven(p_over_s: float, t_bar: float) -> float:
    """Update-to-query ratio f/r above which the home server costs more.

    Setting the two totals equal and solving for f/r gives
    (p/s) * (2 t_bar - 2) - 2. Negative means the home server costs more
    at any update rate.
    """
    if p_over_s <= 0:
        raise ValueError(f"p_over_s must be positive, got {p_over_s}")
    if t_bar < 1:
        raise ValueError(f"t_bar must be >= 1, got {t_bar}")
    return p_over_s * (2.0 * t_bar - 2.0) - 2.0

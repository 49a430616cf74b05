"""Topology, routing, staged delivery, and scenario tests.

The statistical checks at the bottom build one per-trial leg table and
reuse it to score every frontier grouping against the closed-form
latency and traffic means, so the whole frontier costs a single
simulation pass.
"""

import json
import math
import random
from dataclasses import replace

import numpy as np
import pytest

from lprlab.analytic import (
    Grouping,
    RegularityModel,
    mean_latency,
    mean_traffic,
    pareto_front,
    sequential_hit_pmf,
)
from lprlab.profile import CellId, ObservationTrace, build_profile
from lprlab.simnet import (
    GhlsBinding,
    ScenarioConfig,
    build_ghls_binding,
    build_topology,
    candidates_from_profile,
    compare_ghls,
    default_ttl,
    ghls_deliver,
    ghls_query,
    ghls_update,
    gpsr_route,
    load_scenario,
    lpr_deliver,
    run_scenario,
    topology_from_positions,
)
from lprlab.simnet.delivery import _leg_ttl, hashed_home_position
from lprlab.simnet.scenario import (
    aggregate,
    build_pool,
    measure_baseline,
    run_trials,
)

# A gap in the middle of the field: node 1 faces the destination but
# both rim nodes sit farther from it, so greedy strands there and only
# a walk along the upper rim (1 -> 2 -> 4) recovers.
VOID_POSITIONS = [
    (0.0, 0.0),
    (3.0, 0.0),
    (3.0, 3.0),
    (3.0, -3.0),
    (7.0, 2.5),
    (7.0, -2.5),
    (10.0, 0.0),
]
VOID_RANGE = 4.2
VOID_DEST = (10.0, 0.0)


def _void_topology():
    return topology_from_positions(VOID_POSITIONS, VOID_RANGE)


def _two_clusters():
    left = [(float(i % 3), float(i // 3)) for i in range(6)]
    right = [(x + 50.0, y) for x, y in left]
    return topology_from_positions(left + right, 2.0)


def _connected_topologies(sizes, seeds, field, radio):
    out = []
    for n in sizes:
        for seed in seeds:
            topo = build_topology(n, field, radio, seed=seed)
            if topo.connected:
                out.append(topo)
    return out


class TestTopology:
    def test_collinear_short_range_is_path(self):
        topo = topology_from_positions([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 1.5)
        assert [sorted(a) for a in topo.adjacency] == [[1], [0, 2], [1]]
        assert [sorted(a) for a in topo.planar_adjacency] == [[1], [0, 2], [1]]
        assert topo.connected

    def test_collinear_long_range_drops_spanned_link(self):
        # The middle node sits inside the long link's diameter disk.
        topo = topology_from_positions([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 2.5)
        assert [sorted(a) for a in topo.adjacency] == [[1, 2], [0, 2], [0, 1]]
        assert [sorted(a) for a in topo.planar_adjacency] == [[1], [0, 2], [1]]

    def test_unit_square_diagonals_removed(self):
        corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        topo = topology_from_positions(corners, math.sqrt(2.0) + 1e-6)
        assert all(len(a) == 3 for a in topo.adjacency)
        # Sides survive, crossing diagonals do not.
        assert [sorted(a) for a in topo.planar_adjacency] == [
            [1, 2],
            [0, 3],
            [0, 3],
            [1, 2],
        ]

    def test_planar_witness_rule(self):
        # Kept links have no common neighbor inside their diameter disk;
        # every dropped link has one.
        for seed in range(6):
            topo = build_topology(30, 1000.0, 320.0, seed=seed)
            full = [set(a) for a in topo.adjacency]
            planar = [set(a) for a in topo.planar_adjacency]
            for u in range(topo.n):
                assert planar[u] <= full[u]
                pu = topo.position(u)
                for v in full[u]:
                    if v < u:
                        continue
                    pv = topo.position(v)
                    mid = ((pu[0] + pv[0]) / 2.0, (pu[1] + pv[1]) / 2.0)
                    r2 = ((pu[0] - pv[0]) ** 2 + (pu[1] - pv[1]) ** 2) / 4.0
                    witnesses = [
                        w
                        for w in full[u] & full[v]
                        if (topo.position(w)[0] - mid[0]) ** 2
                        + (topo.position(w)[1] - mid[1]) ** 2
                        <= r2 + 1e-12
                    ]
                    if v in planar[u]:
                        assert not witnesses
                    else:
                        assert witnesses

    def test_planar_preserves_connectivity(self):
        for seed in range(8):
            topo = build_topology(40, 1000.0, 300.0, seed=seed)
            if not topo.connected:
                continue
            seen = {0}
            stack = [0]
            while stack:
                u = stack.pop()
                for v in topo.planar_adjacency[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            assert len(seen) == topo.n

    def test_disconnected_flag(self):
        assert not _two_clusters().connected

    def test_build_is_deterministic_per_seed(self):
        a = build_topology(40, 1000.0, 250.0, seed=3)
        b = build_topology(40, 1000.0, 250.0, seed=3)
        c = build_topology(40, 1000.0, 250.0, seed=4)
        assert np.array_equal(a.positions, b.positions)
        assert a.adjacency == b.adjacency
        assert a.planar_adjacency == b.planar_adjacency
        assert not np.array_equal(a.positions, c.positions)

    def test_node_helpers(self):
        corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        topo = topology_from_positions(corners, math.sqrt(2.0) + 1e-6)
        assert topo.avg_degree() == 3.0
        assert topo.nearest_node((0.1, 0.2)) == 0
        assert topo.nearest_node((0.9, 0.9)) == 3
        assert topo.distance_to(0, (3.0, 4.0)) == 5.0

    def test_validation(self):
        with pytest.raises(ValueError):
            build_topology(1, 100.0, 50.0)
        with pytest.raises(ValueError):
            topology_from_positions([(0.0, 0.0), (1.0, 0.0)], 0.0)
        with pytest.raises(ValueError):
            topology_from_positions(np.zeros((3, 3)), 1.0)

    def test_eight_neighbor_density_connectivity(self):
        # 500 nodes at a density giving eight expected neighbors each
        # should almost always come up connected. Measured over 40
        # seeds; boundary effects thin the realized degree, and this
        # density sits below the connectivity threshold in practice.
        n, field = 500, 3000.0
        radio = math.sqrt(8.0 * field * field / ((n - 1) * math.pi))
        connected = sum(
            build_topology(n, field, radio, seed=s).connected for s in range(40)
        )
        assert connected / 40 > 0.95


class TestGpsr:
    def test_straight_chain_all_greedy(self):
        topo = topology_from_positions([(float(i), 0.0) for i in range(6)], 1.5)
        route = gpsr_route(topo, 0, (5.0, 0.0))
        assert route.success
        assert route.path == [0, 1, 2, 3, 4, 5]
        assert route.hops == 5
        assert route.perimeter_hops == 0
        assert route.perimeter_steps == (False,) * 5

    def test_source_within_radius_takes_zero_hops(self):
        topo = topology_from_positions([(float(i), 0.0) for i in range(6)], 1.5)
        route = gpsr_route(topo, 2, (4.9, 0.0), acceptance_radius=3.0)
        assert route.success
        assert route.path == [2]
        assert route.hops == 0

    def test_void_recovery_uses_perimeter(self):
        topo = _void_topology()
        # Node 1 is a local minimum: every neighbor sits farther from
        # the destination than it does.
        d1 = topo.distance_to(1, VOID_DEST)
        assert all(
            topo.distance_to(v, VOID_DEST) > d1 for v in topo.adjacency[1]
        )
        route = gpsr_route(topo, 0, VOID_DEST)
        assert route.success
        assert route.path == [0, 1, 2, 4, 6]
        assert route.perimeter_steps == (False, True, True, False)
        assert route.perimeter_hops == 2

    def test_unreachable_destination_fails_cleanly(self):
        topo = _two_clusters()
        route = gpsr_route(topo, 0, (51.0, 1.0), ttl=10000)
        assert not route.success
        assert route.hops < 50

    def test_exhaustive_all_pairs_on_connected_graphs(self):
        topos = _connected_topologies((8, 16, 24, 30), range(5), 800.0, 260.0)
        assert len(topos) >= 8
        routed = 0
        for topo in topos:
            for s in range(topo.n):
                for d in range(topo.n):
                    if s == d:
                        continue
                    dest = tuple(topo.position(d))
                    route = gpsr_route(topo, s, dest, ttl=10 * topo.n)
                    assert route.success, (topo.n, s, d)
                    assert route.path[0] == s and route.path[-1] == d
                    routed += 1
        assert routed > 2000

    def test_step_invariants(self):
        # Greedy steps strictly shrink the distance to the destination;
        # perimeter steps only ever cross planar links.
        rng = random.Random(7)
        topos = _connected_topologies((12, 20, 28), range(4), 800.0, 240.0)
        checked_perimeter = 0
        for topo in topos:
            for _ in range(40):
                s = rng.randrange(topo.n)
                d = rng.randrange(topo.n)
                if s == d:
                    continue
                dest = tuple(topo.position(d))
                route = gpsr_route(topo, s, dest, ttl=10 * topo.n)
                assert len(route.perimeter_steps) == route.hops
                for i, on_perimeter in enumerate(route.perimeter_steps):
                    a, b = route.path[i], route.path[i + 1]
                    assert b in topo.adjacency[a]
                    if on_perimeter:
                        assert b in topo.planar_adjacency[a]
                        checked_perimeter += 1
                    else:
                        assert topo.distance_to(b, dest) < topo.distance_to(a, dest)
        assert checked_perimeter > 0

    def test_ttl_budget_enforced(self):
        chain = topology_from_positions([(float(i), 0.0) for i in range(30)], 1.5)
        route = gpsr_route(chain, 0, (29.0, 0.0), ttl=3)
        assert not route.success
        assert route.hops == 3

    def test_default_ttl_values_and_truncation(self):
        assert default_ttl(50) == 29
        assert default_ttl(4) == 8
        chain = topology_from_positions([(float(i), 0.0) for i in range(30)], 1.5)
        short = gpsr_route(chain, 0, (29.0, 0.0))
        assert not short.success
        assert short.hops == default_ttl(30) == 22
        full = gpsr_route(chain, 0, (29.0, 0.0), ttl=29)
        assert full.success and full.hops == 29

    def test_validation(self):
        topo = _void_topology()
        with pytest.raises(ValueError):
            gpsr_route(topo, -1, VOID_DEST)
        with pytest.raises(ValueError):
            gpsr_route(topo, topo.n, VOID_DEST)
        with pytest.raises(ValueError):
            gpsr_route(topo, 0, VOID_DEST, acceptance_radius=-1.0)


@pytest.fixture(scope="module")
def topo():
    topo = build_topology(120, 1000.0, 250.0, seed=2)
    assert topo.connected
    return topo


class TestDelivery:
    def _round_trip_recount(self, topo, src, position, radius):
        # Independent re-derivation of the charging rule: forward hops
        # always count, the response leg only runs after a reached
        # forward and is charged even if it fails.
        ttl = _leg_ttl(topo)
        fwd = gpsr_route(topo, src, position, radius, ttl=ttl)
        if not fwd.success:
            return False, fwd.path[-1], fwd.hops
        resp = gpsr_route(topo, fwd.path[-1], tuple(topo.position(src)), 0.0, ttl=ttl)
        return True, fwd.path[-1], fwd.hops + resp.hops

    def test_first_candidate_hit_is_one_stage(self, topo):
        true_pos = tuple(topo.position(90))
        candidates = [true_pos, (100.0, 100.0), (900.0, 100.0)]
        out = lpr_deliver(
            topo, 0, candidates, Grouping((1, 2)),
            true_position=true_pos, acceptance_radius=100.0,
        )
        assert out.success
        assert out.latency_factor == 1.0
        assert out.groups_tried == 1

    def test_parallel_stage_conservation(self, topo):
        radius = 100.0
        candidates = [
            tuple(topo.position(30)),
            tuple(topo.position(60)),
            tuple(topo.position(90)),
        ]
        out = lpr_deliver(
            topo, 5, candidates, Grouping((3,)),
            true_position=candidates[2], acceptance_radius=radius,
        )
        assert out.success
        assert out.latency_factor == 1.0
        assert out.groups_tried == 1
        expected = sum(
            self._round_trip_recount(topo, 5, pos, radius)[2] for pos in candidates
        )
        assert out.transmissions == expected

    def test_all_stage_miss_pays_everything(self, topo):
        radius = 50.0
        candidates = [
            tuple(topo.position(30)),
            tuple(topo.position(60)),
            tuple(topo.position(90)),
        ]
        # True position far from every candidate, so reached nodes
        # cannot fall inside its acceptance disk.
        true_pos = min(
            ((x, y) for x in (150.0, 850.0) for y in (150.0, 850.0)),
            key=lambda p: -min(
                math.dist(p, c) for c in candidates
            ),
        )
        assert min(math.dist(true_pos, c) for c in candidates) > 3 * radius
        out = lpr_deliver(
            topo, 5, candidates, Grouping.serial(3),
            true_position=true_pos, acceptance_radius=radius,
        )
        assert not out.success
        assert out.latency_factor == 3.0
        assert out.groups_tried == 3
        expected = sum(
            self._round_trip_recount(topo, 5, pos, radius)[2] for pos in candidates
        )
        assert out.transmissions == expected

    def test_staged_and_parallel_agree_on_charges(self, topo):
        radius = 80.0
        candidates = [tuple(topo.position(i)) for i in (10, 40, 70, 100)]
        true_pos = candidates[3]
        serial = lpr_deliver(
            topo, 0, candidates, Grouping.serial(4),
            true_position=true_pos, acceptance_radius=radius,
        )
        flat = lpr_deliver(
            topo, 0, candidates, Grouping((4,)),
            true_position=true_pos, acceptance_radius=radius,
        )
        assert serial.success and flat.success
        assert serial.latency_factor == 4.0 and flat.latency_factor == 1.0
        # Same candidates attempted either way, so equal total charges.
        assert serial.transmissions == flat.transmissions

    def test_candidates_from_profile_ranked_centers(self):
        slots = np.array([9, 177, 345, 513, 681])
        cells = np.array([[2, 3], [2, 3], [2, 3], [4, 1], [2, 3]])
        profile = build_profile(ObservationTrace("n0", slots, cells), order=1)
        cands = candidates_from_profile(profile, 9, 2, 100.0)
        assert cands == [(250.0, 350.0), (450.0, 150.0)]
        with_context = candidates_from_profile(
            profile, 9, 2, 100.0, prev_cell=CellId(2, 3)
        )
        assert with_context[0] == (250.0, 350.0)

    def test_too_few_candidates_rejected(self, topo):
        with pytest.raises(ValueError):
            lpr_deliver(
                topo, 0, [(100.0, 100.0)], Grouping((1, 2)),
                true_position=(100.0, 100.0), acceptance_radius=50.0,
            )

    def test_hashed_home_is_deterministic_and_interior(self):
        for margin in (0, 1, 2):
            for target in (0, 7, "abc"):
                a = hashed_home_position(target, 12, 100.0, margin=margin)
                b = hashed_home_position(target, 12, 100.0, margin=margin)
                assert a == b
                for coord in a:
                    assert margin * 100.0 < coord < (12 - margin) * 100.0
        assert hashed_home_position(0, 12, 100.0) != hashed_home_position(1, 12, 100.0)
        with pytest.raises(ValueError):
            hashed_home_position(0, 4, 100.0, margin=2)

    def test_ghls_server_answers_its_own_lookup(self, topo):
        cell = 100.0
        binding = build_ghls_binding(topo, 7, (430.0, 610.0), 10, cell, margin=1)
        assert topo.distance_to(binding.server_node, binding.home_position) <= cell
        pos, cost = ghls_query(topo, binding.server_node, binding, cell)
        assert pos == binding.bound_position
        assert cost == 0
        assert ghls_update(topo, binding.server_node, binding, cell) == 0

    def test_ghls_delivery_accounting(self, topo):
        cell = 100.0
        bound = tuple(topo.position(40))
        binding = build_ghls_binding(topo, 3, bound, 10, cell, margin=1)
        src = 110
        out = ghls_deliver(
            topo, src, binding, true_position=bound, acceptance_radius=cell
        )
        assert out.success
        assert out.latency_factor == 2.0
        assert out.groups_tried == 1
        _, query_cost = ghls_query(topo, src, binding, cell)
        _, _, data_cost = self._round_trip_recount(topo, src, bound, cell)
        assert out.transmissions == query_cost + data_cost

    def test_ghls_unreachable_home_region_fails(self):
        topo = _two_clusters()
        binding = GhlsBinding(
            target_id=0,
            home_position=(51.0, 1.0),
            server_node=topo.nearest_node((51.0, 1.0)),
            bound_position=(50.5, 0.5),
        )
        pos, cost = ghls_query(topo, 0, binding, 1.0)
        assert pos is None
        assert cost > 0
        out = ghls_deliver(
            topo, 0, binding, true_position=(50.5, 0.5), acceptance_radius=1.0
        )
        assert not out.success
        assert out.latency_factor == 2.0
        assert out.groups_tried == 1


SMALL = ScenarioConfig(
    n=80,
    field_size=1200.0,
    radio_range=300.0,
    pool_size=2,
    grid_cells=8,
    trials=40,
    n_candidates=12,
    strategy="oracle",
    seed=5,
)


class TestScenarioConfig:
    def test_defaults_round(self):
        cfg = ScenarioConfig(strategy="oracle")
        assert cfg.cell_size == pytest.approx(2500.0 / 12)
        assert cfg.n_cells == 144
        assert cfg.cell_center(0) == pytest.approx((cfg.cell_size / 2,) * 2)

    def test_eligible_cells_respect_margin(self):
        cfg = replace(SMALL, grid_cells=6, cell_margin=1)
        cells = cfg.eligible_cells()
        assert len(cells) == 16
        for c in cells:
            x, y = int(c) % 6, int(c) // 6
            assert 1 <= x <= 4 and 1 <= y <= 4

    def test_validation(self):
        with pytest.raises(ValueError):
            replace(SMALL, n=1)
        with pytest.raises(ValueError):
            replace(SMALL, radio_range=0.0)
        with pytest.raises(ValueError):
            replace(SMALL, trials=-1)
        with pytest.raises(ValueError):
            replace(SMALL, cell_margin=4)
        with pytest.raises(ValueError):
            replace(SMALL, n_candidates=36)
        with pytest.raises(ValueError):
            replace(SMALL, strategy="flood")
        with pytest.raises(ValueError):
            replace(SMALL, strategy="lpr")
        with pytest.raises(ValueError):
            replace(SMALL, strategy="lpr", grouping=Grouping.serial(13))
        with pytest.raises(ValueError):
            replace(SMALL, f_over_r=(1.0, -0.5))


class TestScenarioFile:
    def _write(self, tmp_path, text):
        path = tmp_path / "scenario.ini"
        path.write_text(text)
        return str(path)

    def test_full_round_trip(self, tmp_path):
        path = self._write(
            tmp_path,
            """
[topology]
n = 80
field_size = 1200
radio_range = 300
pool = 2
grid_cells = 8
cell_margin = 1

[traffic]
trials = 40
n_candidates = 5

[strategy]
kind = lpr
grouping = 2|3

[ghls]
f_over_r = 0.5, 1.5, 2.5

[seeds]
seed = 11
""",
        )
        cfg = load_scenario(path)
        assert cfg.n == 80
        assert cfg.field_size == 1200.0
        assert cfg.pool_size == 2
        assert cfg.trials == 40
        assert cfg.strategy == "lpr"
        assert cfg.grouping == Grouping((2, 3))
        assert cfg.f_over_r == (0.5, 1.5, 2.5)
        assert cfg.seed == 11
        assert cfg.cell_margin == 1

    def test_serial_k_shorthand_and_defaults(self, tmp_path):
        path = self._write(
            tmp_path,
            """
[topology]
n = 80
field_size = 1200
radio_range = 300
grid_cells = 8

[traffic]
trials = 10
n_candidates = 5

[strategy]
kind = lpr
k = 3
""",
        )
        cfg = load_scenario(path)
        assert cfg.grouping == Grouping((1, 1, 1))
        assert cfg.pool_size == 10
        assert cfg.seed == 0
        assert cfg.cell_margin == 1
        assert len(cfg.f_over_r) == 6

    def test_missing_section(self, tmp_path):
        path = self._write(tmp_path, "[topology]\nn = 10\n")
        with pytest.raises(ValueError, match=r"missing required section \[traffic\]"):
            load_scenario(path)

    def test_missing_option_and_bad_value(self, tmp_path):
        base = """
[topology]
n = {n}
field_size = 1200
radio_range = 300
grid_cells = 8

[traffic]
trials = 10
n_candidates = 5

[strategy]
kind = oracle
"""
        with pytest.raises(ValueError, match=r"bad value for \[topology\] n"):
            load_scenario(self._write(tmp_path, base.format(n="eighty")))
        no_trials = base.format(n="80").replace("trials = 10\n", "")
        with pytest.raises(ValueError, match=r"missing required option \[traffic\] trials"):
            load_scenario(self._write(tmp_path, no_trials))

    def test_grouping_and_k_conflict(self, tmp_path):
        path = self._write(
            tmp_path,
            """
[topology]
n = 80
field_size = 1200
radio_range = 300

[traffic]
trials = 10
n_candidates = 5

[strategy]
kind = lpr
grouping = 2|3
k = 5
""",
        )
        with pytest.raises(ValueError, match="not both"):
            load_scenario(path)

    def test_unreadable_path(self, tmp_path):
        with pytest.raises(ValueError, match="cannot read"):
            load_scenario(str(tmp_path / "nope.ini"))


class TestScenarioRuns:
    def test_zero_trials(self):
        record, rows = run_scenario(replace(SMALL, trials=0))
        assert record.n_trials == 0
        assert rows == []
        assert record.delivery_ratio is None
        json.dumps(record.as_dict())

    def test_deterministic_reruns(self):
        rec1, rows1 = run_scenario(SMALL)
        rec2, rows2 = run_scenario(SMALL)
        assert rec1 == rec2
        assert rows1 == rows2

    def test_split_merge_matches_single_pass(self):
        _, rows = run_scenario(SMALL)
        pool = build_pool(SMALL)
        chunks = run_trials(SMALL, range(0, 17), pool) + run_trials(
            SMALL, range(17, 40), pool
        )
        assert chunks == rows
        baseline = measure_baseline(SMALL, pool)
        direct = aggregate(rows, baseline)
        shuffled = rows[:]
        random.Random(3).shuffle(shuffled)
        merged = aggregate(shuffled, baseline)
        for key, value in direct.as_dict().items():
            other = merged.as_dict()[key]
            if isinstance(value, float):
                assert other == pytest.approx(value, rel=1e-12)
            else:
                assert other == value

    def test_oracle_latency_and_ratio(self):
        record, rows = run_scenario(replace(SMALL, trials=120))
        assert record.mean_latency_factor == 1.0
        assert record.delivery_ratio == record.reachability
        assert record.ratio_vs_reachability == 1.0
        assert record.mean_update_hops is None
        assert all(row.success == row.reachable for row in rows)

    def test_trial_rows_record_strategy_fields(self):
        cfg = replace(
            SMALL, strategy="lpr", grouping=Grouping((2, 3)), n_candidates=5
        )
        _, rows = run_scenario(cfg)
        assert all(row.update_hops == -1 for row in rows)
        assert all(1.0 <= row.latency_factor <= 2.0 for row in rows)
        ghls_cfg = replace(SMALL, strategy="ghls")
        record, ghls_rows = run_scenario(ghls_cfg)
        assert all(row.update_hops >= 0 for row in ghls_rows)
        assert record.mean_latency_factor == 2.0

    def test_wander_fraction_in_range(self):
        record, rows = run_scenario(replace(SMALL, trials=200))
        assert 0.0 < record.wander_fraction < 0.25
        assert record.wander_fraction == pytest.approx(
            sum(row.true_rank == 0 for row in rows) / 200
        )

    def test_ghls_comparison_shape(self):
        cfg = ScenarioConfig(
            trials=600,
            grouping=Grouping((1, 2, 6, 3)),
            seed=42,
            f_over_r=(0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
        )
        comp = compare_ghls(cfg)
        assert len(comp.ghls_totals) == len(cfg.f_over_r)
        assert len(set(comp.lpr_totals)) == 1
        assert comp.lpr_totals[0] == pytest.approx(comp.lpr_request_cost)
        assert comp.ghls_totals[0] == pytest.approx(comp.ghls_request_cost)
        for fr, total in zip(cfg.f_over_r, comp.ghls_totals):
            assert total == pytest.approx(
                comp.ghls_request_cost + fr * comp.update_cost
            )
        assert comp.crossover is not None
        assert 1.4 < comp.crossover < 2.6
        assert 1.6 < comp.analytic_crossover < 2.5
        json.dumps(comp.as_dict())


def _leg_tables(config, pool, trials):
    """Replay the scenario draws, recording one round trip per rank."""
    eligible = config.eligible_cells()
    model = RegularityModel()
    radius = config.cell_size
    nc = config.n_candidates
    hits = np.zeros((trials, nc), dtype=bool)
    costs = np.zeros((trials, nc), dtype=np.int64)
    from lprlab.simnet.delivery import _round_trip

    for index in range(trials):
        rng = np.random.default_rng([config.seed, 7, index])
        topo = pool[index % len(pool)]
        src = int(rng.integers(topo.n))
        hour = int(rng.integers(168))
        cand = rng.choice(eligible, size=nc, replace=False)
        pmf = sequential_hit_pmf(model(hour + 0.5), nc)
        u = float(rng.random())
        true_rank = 0
        cum = 0.0
        for i, mass in enumerate(pmf, start=1):
            cum += mass
            if u < cum:
                true_rank = i
                break
        if true_rank > 0:
            true_cell = int(cand[true_rank - 1])
        else:
            true_cell = int(rng.choice(np.setdiff1d(eligible, cand)))
        true_pos = config.cell_center(true_cell)
        for rank in range(nc):
            reached_ok, reached, cost = _round_trip(
                topo, src, config.cell_center(int(cand[rank])), radius
            )
            costs[index, rank] = cost
            hits[index, rank] = (
                reached_ok and topo.distance_to(reached, true_pos) <= radius
            )
    return hits, costs


def _walk_grouping(grouping, hits, costs):
    """Stage walk over precomputed legs; mirrors the delivery charging."""
    n = len(hits)
    n_stages = len(grouping.sizes)
    latency = np.full(n, float(n_stages))
    tx = np.zeros(n, dtype=np.int64)
    stage_of_hit = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    start = 0
    for stage, size in enumerate(grouping.sizes, start=1):
        active = ~done
        tx[active] += costs[active, start : start + size].sum(axis=1)
        stage_hit = hits[:, start : start + size].any(axis=1)
        newly = active & stage_hit
        latency[newly] = float(stage)
        stage_of_hit[newly] = stage
        done |= newly
        start += size
    return done, latency, tx, stage_of_hit


AGREEMENT_TRIALS = 10_000


@pytest.fixture(scope="module")
def tables():
    config = ScenarioConfig(
        trials=AGREEMENT_TRIALS,
        n_candidates=12,
        grouping=Grouping.serial(12),
        seed=42,
    )
    pool = build_pool(config)
    hits, costs = _leg_tables(config, pool, AGREEMENT_TRIALS)
    baseline = measure_baseline(config, pool)
    return config, pool, hits, costs, baseline


class TestSimulationMatchesModels:
    """Every frontier grouping, scored against its closed-form means."""

    def test_every_frontier_grouping_within_five_percent(self, tables):
        config, _, hits, costs, baseline = tables
        groupings = [p.grouping for p in pareto_front(5)]
        groupings += [p.grouping for p in pareto_front(12)]
        assert len(groupings) == 12 + 102
        worst = 0.0
        for grouping in groupings:
            _, latency, tx, _ = _walk_grouping(grouping, hits, costs)
            lat_err = abs(latency.mean() / mean_latency(grouping) - 1.0)
            traffic = tx.mean() / baseline
            traf_err = abs(traffic / mean_traffic(grouping) - 1.0)
            worst = max(worst, lat_err, traf_err)
            assert lat_err <= 0.05, (grouping, lat_err)
            assert traf_err <= 0.05, (grouping, traf_err)
        assert worst < 0.05

    def test_walk_agrees_with_direct_delivery(self, tables):
        config, pool, hits, costs, _ = tables
        for sizes in ((2, 10), (1, 2, 4, 4, 1), (2, 3)):
            grouping = Grouping(sizes)
            cfg = replace(config, grouping=grouping, trials=200)
            rows = run_trials(cfg, range(200), pool)
            success, latency, tx, stages = _walk_grouping(
                grouping, hits[:200], costs[:200]
            )
            for i, row in enumerate(rows):
                assert row.success == bool(success[i])
                assert row.latency_factor == latency[i]
                assert row.transmissions == tx[i]

import numpy as np

from channelqc.dbscan import CylinderGeometry
from channelqc.fuzzy import compute_priority
from channelqc.priority import (
    DbscanParams,
    priorities_for_all,
    rank_faults,
    read_priorities,
    read_ranking,
    write_priorities,
    write_ranking,
)


def grid_geometry(per_ring=192, rings=16):
    n = per_ring * rings
    idx = np.arange(n)
    return CylinderGeometry(ring_idx=idx % per_ring, axial_idx=idx // per_ring,
                            per_ring=per_ring)


def channel_at(g, ring, axial):
    return int(axial * g.per_ring + ring)


class TestRankFaults:
    def test_empty_fault_list(self, fuzzy_cfg):
        assert rank_faults([], grid_geometry(), fuzzy_cfg) == []

    def test_clustered_outranks_isolated(self, fuzzy_cfg):
        g = grid_geometry()
        block = [channel_at(g, r, a) for a in range(5) for r in range(9)]  # 45 members
        isolated = channel_at(g, 100, 10)
        channels = [(c, 0.5) for c in block] + [(isolated, 0.1)]
        ranked = rank_faults(channels, g, fuzzy_cfg)
        assert len(ranked) == 46
        assert ranked[0].channel in set(block)
        assert ranked[0].cluster_size == 45
        isolated_row = next(r for r in ranked if r.channel == isolated)
        assert isolated_row.cluster_size == 1
        assert isolated_row.cluster_id == -1
        assert ranked[0].priority > isolated_row.priority

    def test_equal_priority_breaks_by_channel_id(self, fuzzy_cfg):
        g = grid_geometry()
        a = channel_at(g, 10, 2)
        b = channel_at(g, 100, 9)
        ranked = rank_faults([(b, 0.4), (a, 0.4)], g, fuzzy_cfg)
        assert ranked[0].priority == ranked[1].priority
        assert [r.channel for r in ranked] == sorted([a, b])

    def test_priority_matches_direct_computation(self, fuzzy_cfg):
        g = grid_geometry()
        block = [channel_at(g, r, 3) for r in range(6)]
        channels = [(c, 0.3) for c in block]
        ranked = rank_faults(channels, g, fuzzy_cfg, DbscanParams(eps=1.5, min_pts=3))
        for row in ranked:
            assert row.priority == compute_priority(0.3, row.cluster_size, fuzzy_cfg)

    def test_sorted_descending(self, fuzzy_cfg):
        g = grid_geometry()
        rng = np.random.default_rng(5)
        channels = [(int(c), float(h)) for c, h in zip(
            rng.choice(g.n_channels, 40, replace=False), rng.uniform(0, 1, 40))]
        ranked = rank_faults(channels, g, fuzzy_cfg)
        priorities = [r.priority for r in ranked]
        assert priorities == sorted(priorities, reverse=True)


class TestPrioritiesForAll:
    def test_covers_every_channel(self, fuzzy_cfg):
        g = grid_geometry(16, 4)
        healths = {c: 1.0 for c in range(g.n_channels)}
        healths[3] = 0.2
        healths[4] = 0.2
        healths[5] = 0.2
        out = priorities_for_all(healths, [3, 4, 5], g, fuzzy_cfg)
        assert set(out) == set(range(g.n_channels))
        assert out[3].cluster_size == 3
        assert out[10].cluster_size == 1
        assert out[10].cluster_id == -1
        assert out[3].priority > out[10].priority


class TestExports:
    def test_ranking_roundtrip(self, fuzzy_cfg, tmp_path):
        g = grid_geometry()
        channels = [(channel_at(g, r, 3), 0.4) for r in range(5)]
        ranked = rank_faults(channels, g, fuzzy_cfg)
        write_ranking(ranked, tmp_path / "ranking.csv", "hash", "parent")
        assert read_ranking(tmp_path / "ranking.csv") == ranked

    def test_priorities_roundtrip(self, fuzzy_cfg, tmp_path):
        g = grid_geometry(16, 4)
        healths = {c: 0.9 for c in range(g.n_channels)}
        out = priorities_for_all(healths, [1, 2, 3], g, fuzzy_cfg)
        write_priorities(out, tmp_path / "priorities.csv")
        assert read_priorities(tmp_path / "priorities.csv") == out

    def test_header_only_when_empty(self, fuzzy_cfg, tmp_path):
        write_ranking([], tmp_path / "ranking.csv", "h")
        lines = (tmp_path / "ranking.csv").read_text().splitlines()
        assert lines[0].startswith("# manifest_hash: h")
        assert lines[1] == "rank,channel_id,priority,cluster_id,cluster_size,health"
        assert len(lines) == 2

"""Rank detected channel faults by fuzzy priority.

Detected faults are clustered on the scanner grid first; each channel's
priority combines its health with the size of the cluster it belongs to
(noise points count as clusters of one).  Ranking is by descending priority
with channel id breaking ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .csvio import format_float, read_csv, write_csv
from .dbscan import CylinderGeometry, cluster_failed
from .fuzzy import FuzzyConfig, compute_priority


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 1.5  # grid cells; 1.5 reaches the 8 surrounding cells
    min_pts: int = 3


@dataclass(frozen=True)
class RankedFault:
    channel: int
    priority: float
    cluster_id: int  # -1 for noise points
    cluster_size: int
    health: float


def assign_clusters(detected: Sequence[int], geometry: CylinderGeometry,
                    params: DbscanParams = DbscanParams()) -> dict[int, tuple[int, int]]:
    """Map each detected channel to (cluster_id, effective cluster size)."""
    clusters, noise = cluster_failed(detected, geometry, params.eps, params.min_pts)
    assignment: dict[int, tuple[int, int]] = {}
    for cid, cluster in enumerate(clusters):
        for channel in cluster.members:
            assignment[channel] = (cid, cluster.size)
    for channel in noise:
        assignment[channel] = (-1, 1)
    return assignment


def rank_faults(channels: Sequence[tuple[int, float]], geometry: CylinderGeometry,
                cfg: FuzzyConfig,
                params: DbscanParams = DbscanParams()) -> list[RankedFault]:
    """Priority-sorted fault list for the channels flagged by detection."""
    assignment = assign_clusters([c for c, _ in channels], geometry, params)
    ranked = []
    for channel, health in channels:
        cid, size = assignment[channel]
        ranked.append(RankedFault(
            channel=channel,
            priority=compute_priority(health, size, cfg),
            cluster_id=cid,
            cluster_size=size,
            health=health,
        ))
    ranked.sort(key=lambda r: (-r.priority, r.channel))
    return ranked


def priorities_for_all(healths: Mapping[int, float], detected: Sequence[int],
                       geometry: CylinderGeometry, cfg: FuzzyConfig,
                       params: DbscanParams = DbscanParams()) -> dict[int, RankedFault]:
    """Priority for every channel, not only detected ones.

    Channels outside the detected set are treated as isolated (cluster size 1);
    clustering still runs on the detected set only.
    """
    assignment = assign_clusters(detected, geometry, params)
    out = {}
    for channel, health in healths.items():
        cid, size = assignment.get(channel, (-1, 1))
        out[channel] = RankedFault(
            channel=channel,
            priority=compute_priority(health, size, cfg),
            cluster_id=cid,
            cluster_size=size,
            health=health,
        )
    return out


RANKING_HEADER = ["rank", "channel_id", "priority", "cluster_id", "cluster_size", "health"]
PRIORITIES_HEADER = ["channel_id", "priority", "cluster_id", "cluster_size", "health"]


def write_ranking(ranked: Sequence[RankedFault], path, manifest_hash: str | None = None,
                  parent_hash: str | None = None) -> None:
    rows = (
        [str(i + 1), str(r.channel), format_float(r.priority), str(r.cluster_id),
         str(r.cluster_size), format_float(r.health)]
        for i, r in enumerate(ranked)
    )
    write_csv(path, RANKING_HEADER, rows, manifest_hash, parent_hash)


def read_ranking(path) -> list[RankedFault]:
    _, rows, _, _ = read_csv(path, RANKING_HEADER)
    return [
        RankedFault(channel=int(r[1]), priority=float(r[2]), cluster_id=int(r[3]),
                    cluster_size=int(r[4]), health=float(r[5]))
        for r in rows
    ]


def write_priorities(priorities: Mapping[int, RankedFault], path,
                     manifest_hash: str | None = None,
                     parent_hash: str | None = None) -> None:
    rows = (
        [str(c), format_float(r.priority), str(r.cluster_id), str(r.cluster_size),
         format_float(r.health)]
        for c, r in sorted(priorities.items())
    )
    write_csv(path, PRIORITIES_HEADER, rows, manifest_hash, parent_hash)


def read_priorities(path) -> dict[int, RankedFault]:
    _, rows, _, _ = read_csv(path, PRIORITIES_HEADER)
    return {
        int(r[0]): RankedFault(channel=int(r[0]), priority=float(r[1]), cluster_id=int(r[2]),
                               cluster_size=int(r[3]), health=float(r[4]))
        for r in rows
    }

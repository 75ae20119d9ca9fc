"""Density-based clustering of failed channels on the scanner cylinder.

Distances are Euclidean on the (ring, axial) grid with the ring coordinate
wrapping around the cylinder.  Classic DBSCAN assigns border points to
whichever cluster reaches them first, which depends on scan order; here border
points always join the candidate cluster whose smallest core-member channel id
is lowest, so results are independent of input ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .scanner import ScannerConfigTable, ScannerModel


class GeometryError(ValueError):
    """Channel id with no geometry."""


@dataclass(frozen=True)
class CylinderGeometry:
    """Grid positions of every channel; ring index wraps, axial does not."""

    ring_idx: np.ndarray
    axial_idx: np.ndarray
    per_ring: int
    wrap: bool = True

    @classmethod
    def from_model(cls, model: ScannerModel) -> "CylinderGeometry":
        return cls(model.ring_idx, model.axial_idx, model.per_ring)

    @classmethod
    def from_config(cls, table: ScannerConfigTable) -> "CylinderGeometry":
        return cls(table.ring_idx, table.axial_idx, table.per_ring)

    @property
    def n_channels(self) -> int:
        return len(self.ring_idx)

    def check_channel(self, channel: int) -> None:
        if not 0 <= channel < self.n_channels:
            raise GeometryError(f"unknown channel id {channel}")

    def distance(self, a: int, b: int) -> float:
        dr = abs(float(self.ring_idx[a]) - float(self.ring_idx[b]))
        if self.wrap:
            dr = min(dr, self.per_ring - dr)
        da = float(self.axial_idx[a]) - float(self.axial_idx[b])
        return float(np.hypot(dr, da))

    def pairwise_distances(self, channels: np.ndarray) -> np.ndarray:
        r = self.ring_idx[channels].astype(float)
        a = self.axial_idx[channels].astype(float)
        dr = np.abs(r[:, None] - r[None, :])
        if self.wrap:
            dr = np.minimum(dr, self.per_ring - dr)
        da = a[:, None] - a[None, :]
        return np.hypot(dr, da)


@dataclass(frozen=True)
class FaultCluster:
    members: frozenset[int]

    @property
    def size(self) -> int:
        return len(self.members)


def cluster_failed(failed: Iterable[int], geometry: CylinderGeometry, eps: float,
                   min_pts: int) -> tuple[list[FaultCluster], set[int]]:
    """DBSCAN over the failed set; returns (clusters, noise channel ids).

    Clusters are returned sorted by their smallest member id.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    points = np.array(sorted(set(failed)), dtype=np.int64)
    for c in points:
        geometry.check_channel(int(c))
    n = len(points)
    if n == 0:
        return [], set()

    dist = geometry.pairwise_distances(points)
    adjacency = dist <= eps  # includes self (distance 0)
    neighbor_counts = adjacency.sum(axis=1)
    core = neighbor_counts >= min_pts

    # Connected components over core points.
    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        stack = [i]
        labels[i] = next_label
        while stack:
            j = stack.pop()
            for k in np.nonzero(adjacency[j] & core)[0]:
                if labels[k] == -1:
                    labels[k] = next_label
                    stack.append(int(k))
        next_label += 1

    # Smallest core-member channel id per cluster, for the border tie-break.
    min_core_id = {}
    for lbl in range(next_label):
        members = points[(labels == lbl)]
        min_core_id[lbl] = int(members.min())

    noise: set[int] = set()
    for i in range(n):
        if core[i]:
            continue
        candidate_labels = {int(labels[k]) for k in np.nonzero(adjacency[i] & core)[0]}
        if candidate_labels:
            labels[i] = min(candidate_labels, key=lambda lbl: min_core_id[lbl])
        else:
            noise.add(int(points[i]))

    clusters = []
    for lbl in range(next_label):
        members = frozenset(int(c) for c in points[labels == lbl])
        clusters.append(FaultCluster(members))
    clusters.sort(key=lambda cl: min(cl.members))
    return clusters, noise

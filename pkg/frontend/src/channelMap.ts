// Channel grid heat view: one cell per channel, health as color, detected
// clusters outlined.  The grid is a cylinder, so cluster outlines respect the
// wrap-around of the ring coordinate: a cluster crossing ring 0 stays visually
// contiguous (no outline drawn across the seam between members of the same
// cluster).

import type { MapChannel, MapPayload } from './types.js';

export class MapPayloadError extends Error {}

export function healthColor(health: number | null): string {
  if (health === null) {
    return '#777777';
  }
  const clamped = Math.min(Math.max(health, 0), 1);
  // red (sick) to green (healthy) ramp
  const hue = Math.round(120 * clamped);
  return `hsl(${hue}, 70%, 45%)`;
}

type Grid = (MapChannel | undefined)[][];

function buildGrid(payload: MapPayload): Grid {
  const grid: Grid = Array.from({ length: payload.rings }, () =>
    new Array<MapChannel | undefined>(payload.channels_per_ring),
  );
  for (const cell of payload.channels) {
    if (
      cell.axial < 0 ||
      cell.axial >= payload.rings ||
      cell.ring < 0 ||
      cell.ring >= payload.channels_per_ring
    ) {
      throw new MapPayloadError(
        `channel ${cell.channel} at (ring ${cell.ring}, axial ${cell.axial}) is ` +
          `outside the ${payload.channels_per_ring}x${payload.rings} grid`,
      );
    }
    if (grid[cell.axial][cell.ring] !== undefined) {
      throw new MapPayloadError(
        `grid cell (ring ${cell.ring}, axial ${cell.axial}) is claimed twice`,
      );
    }
    grid[cell.axial][cell.ring] = cell;
  }
  for (let axial = 0; axial < payload.rings; axial += 1) {
    for (let ring = 0; ring < payload.channels_per_ring; ring += 1) {
      if (grid[axial][ring] === undefined) {
        throw new MapPayloadError(
          `grid cell (ring ${ring}, axial ${axial}) has no channel`,
        );
      }
    }
  }
  return grid;
}

function neighborCluster(
  grid: Grid,
  payload: MapPayload,
  ring: number,
  axial: number,
  dRing: number,
  dAxial: number,
): number | null {
  const a = axial + dAxial;
  if (a < 0 || a >= payload.rings) {
    return null;
  }
  let r = ring + dRing;
  if (payload.wrap) {
    r = (r + payload.channels_per_ring) % payload.channels_per_ring;
  } else if (r < 0 || r >= payload.channels_per_ring) {
    return null;
  }
  const cell = grid[a][r];
  return cell === undefined ? null : cell.cluster_id;
}

/** Border sides where a cluster cell meets a different cluster (or none). */
export function clusterOutlineSides(
  payload: MapPayload,
  cell: MapChannel,
  grid?: Grid,
): string[] {
  if (cell.cluster_id === null) {
    return [];
  }
  const g = grid ?? buildGrid(payload);
  const sides: string[] = [];
  const checks: Array<[string, number, number]> = [
    ['left', -1, 0],
    ['right', 1, 0],
    ['top', 0, -1],
    ['bottom', 0, 1],
  ];
  for (const [side, dRing, dAxial] of checks) {
    if (
      neighborCluster(g, payload, cell.ring, cell.axial, dRing, dAxial) !==
      cell.cluster_id
    ) {
      sides.push(side);
    }
  }
  return sides;
}

export function renderChannelMap(doc: Document, payload: MapPayload): HTMLElement {
  const grid = buildGrid(payload); // throws MapPayloadError on mismatch
  const container = doc.createElement('div');
  container.className = 'channel-map';
  container.style.display = 'grid';
  container.style.gridTemplateColumns = `repeat(${payload.channels_per_ring}, 6px)`;
  for (let axial = 0; axial < payload.rings; axial += 1) {
    for (let ring = 0; ring < payload.channels_per_ring; ring += 1) {
      const cell = grid[axial][ring]!;
      const div = doc.createElement('div');
      div.className = 'map-cell';
      div.dataset.channel = String(cell.channel);
      div.dataset.ring = String(ring);
      div.dataset.axial = String(axial);
      div.style.backgroundColor = healthColor(cell.health);
      if (cell.detected) {
        div.classList.add('detected');
      }
      if (cell.cluster_id !== null) {
        div.dataset.clusterId = String(cell.cluster_id);
        for (const side of clusterOutlineSides(payload, cell, grid)) {
          div.classList.add(`outline-${side}`);
        }
      }
      div.title = `channel ${cell.channel}`;
      container.appendChild(div);
    }
  }
  return container;
}

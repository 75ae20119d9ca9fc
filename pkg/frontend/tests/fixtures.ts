import type { DiagnosisAction, FaultRow, MapPayload, MapChannel } from '../src/types.js';

const ACTIONS: DiagnosisAction[] = [
  'INCREASE_BIAS',
  'DECREASE_BIAS',
  'INCREASE_NOISE_THRESHOLD',
  'DECREASE_NOISE_THRESHOLD',
];

/** Deterministic list of `n` fault rows sorted by descending priority, the way
 *  the service serves them. */
export function faultFixture(n: number): FaultRow[] {
  const rows: FaultRow[] = [];
  for (let i = 0; i < n; i += 1) {
    rows.push({
      channel: 7 + i * 3,
      case_id: i + 1,
      priority: Number((0.95 - (0.9 * i) / n).toFixed(6)),
      cluster_id: i % 5 === 0 ? -1 : i % 5,
      cluster_size: i % 5 === 0 ? 1 : 4 + (i % 7),
      health: Number((0.05 + (0.9 * i) / n).toFixed(6)),
      class: ACTIONS[i % ACTIONS.length],
      severity: (i % 5) + 1,
      probability: Number((1 - (0.3 * i) / n).toFixed(6)),
      explanation: `channel ${7 + i * 3} misbehaves; additional detail ${i}`,
      verdict: 'UNREVIEWED',
    });
  }
  return rows;
}

export function mapFixture(perRing = 8, rings = 4): MapPayload {
  const channels: MapChannel[] = [];
  for (let axial = 0; axial < rings; axial += 1) {
    for (let ring = 0; ring < perRing; ring += 1) {
      channels.push({
        channel: axial * perRing + ring,
        ring,
        axial,
        health: 1.0,
        priority: 0.12,
        detected: false,
        cluster_id: null,
      });
    }
  }
  return { channels_per_ring: perRing, rings, wrap: true, channels };
}

export function markCluster(payload: MapPayload, cells: Array<[number, number]>,
                            clusterId: number): void {
  for (const [ring, axial] of cells) {
    const cell = payload.channels.find((c) => c.ring === ring && c.axial === axial);
    if (!cell) throw new Error(`no cell at (${ring}, ${axial})`);
    cell.detected = true;
    cell.cluster_id = clusterId;
    cell.health = 0.2;
  }
}

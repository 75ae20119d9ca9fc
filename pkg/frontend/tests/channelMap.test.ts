import { describe, expect, it } from 'vitest';

import {
  clusterOutlineSides,
  healthColor,
  MapPayloadError,
  renderChannelMap,
} from '../src/channelMap.js';
import { mapFixture, markCluster } from './fixtures.js';

describe('renderChannelMap', () => {
  it('renders one cell per channel', () => {
    const payload = mapFixture(8, 4);
    const map = renderChannelMap(document, payload);
    expect(map.querySelectorAll('.map-cell')).toHaveLength(32);
  });

  it('uniform healthy map has no outlines or detected marks', () => {
    const map = renderChannelMap(document, mapFixture(8, 4));
    expect(map.querySelectorAll('.detected')).toHaveLength(0);
    expect(map.querySelectorAll('[class*="outline-"]')).toHaveLength(0);
  });

  it('single noise-point fault is outlined on all four sides', () => {
    const payload = mapFixture(8, 4);
    markCluster(payload, [[3, 2]], -1);
    // noise points carry cluster_id -1 from the service; they are still a
    // one-cell outline
    const map = renderChannelMap(document, payload);
    const cell = map.querySelector('[data-ring="3"][data-axial="2"]') as HTMLElement;
    for (const side of ['left', 'right', 'top', 'bottom']) {
      expect(cell.classList.contains(`outline-${side}`)).toBe(true);
    }
  });

  it('cluster spanning the ring seam stays contiguous (no inner outline)', () => {
    const payload = mapFixture(8, 4);
    // cells at ring 7 and ring 0 are neighbours on the cylinder
    markCluster(payload, [[7, 1], [0, 1]], 3);
    const map = renderChannelMap(document, payload);
    const left = map.querySelector('[data-ring="7"][data-axial="1"]') as HTMLElement;
    const right = map.querySelector('[data-ring="0"][data-axial="1"]') as HTMLElement;
    // the shared seam edge is interior to the cluster, so not outlined
    expect(left.classList.contains('outline-right')).toBe(false);
    expect(right.classList.contains('outline-left')).toBe(false);
    // the far edges are boundaries
    expect(left.classList.contains('outline-left')).toBe(true);
    expect(right.classList.contains('outline-right')).toBe(true);
  });

  it('without wrap the seam is a boundary', () => {
    const payload = mapFixture(8, 4);
    payload.wrap = false;
    markCluster(payload, [[7, 1], [0, 1]], 3);
    const cellA = payload.channels.find((c) => c.ring === 7 && c.axial === 1)!;
    expect(clusterOutlineSides(payload, cellA)).toContain('right');
  });

  it('rejects payloads with missing cells', () => {
    const payload = mapFixture(8, 4);
    payload.channels.pop();
    expect(() => renderChannelMap(document, payload)).toThrow(MapPayloadError);
  });

  it('rejects out-of-grid channels', () => {
    const payload = mapFixture(8, 4);
    payload.channels[0].ring = 11;
    expect(() => renderChannelMap(document, payload)).toThrow(MapPayloadError);
  });

  it('health colors span red to green', () => {
    expect(healthColor(1)).toBe('hsl(120, 70%, 45%)');
    expect(healthColor(0)).toBe('hsl(0, 70%, 45%)');
    expect(healthColor(null)).toBe('#777777');
  });
});

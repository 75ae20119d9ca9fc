// End-to-end check against the real QC service: artifacts are produced with
// the Python CLI, the service is spawned on a local port, and the UI modules
// are exercised against live payloads.  Skips when the Python package is not
// installed.

import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { renderFaultTable, tableChannelOrder } from '../src/faultTable.js';
import { renderChannelMap } from '../src/channelMap.js';
import { initialReviewState, VerdictController } from '../src/verdict.js';
import type { FaultRow } from '../src/types.js';

const PYTHON = process.env.CHANNELQC_PYTHON ?? 'python3';

function pythonAvailable(): boolean {
  try {
    execFileSync(PYTHON, ['-c', 'import channelqc'], { stdio: 'ignore' });
    return true;
  } catch {
    return false;
  }
}

const available = pythonAvailable();
const suite = available ? describe : describe.skip;

suite('against the live service', () => {
  let workdir: string;
  let server: ChildProcess | null = null;
  let base: string;
  let api: ApiClient;

  function cli(...args: string[]): void {
    execFileSync(PYTHON, ['-m', 'channelqc.cli', ...args], { stdio: 'pipe' });
  }

  beforeAll(async () => {
    workdir = mkdtempSync(join(tmpdir(), 'channelqc-ui-'));
    const sim = join(workdir, 'sim');
    const trained = join(workdir, 'trained');
    const run = join(workdir, 'run');
    const history = join(workdir, 'history.jsonl');
    // 100 major faults so the served fault list is the 100-fault fixture
    cli('simulate', '--channels', '512', '--rings', '8', '--major', '100',
        '--seed', '42', '--out-dir', sim);
    cli('train', '--channels', '512', '--rings', '8', '--major', '40',
        '--per-level', '8', '--trees', '40', '--seed', '7',
        '--out-dir', trained, '--history', history);
    cli('run', '--in-dir', sim, '--forest', join(trained, 'forest.json'),
        '--out-dir', run, '--seed', '42');

    const port = 21000 + Math.floor(Math.random() * 20000);
    base = `http://127.0.0.1:${port}`;
    server = spawn(PYTHON, [
      '-m', 'channelqc.cli', 'serve', '--run-dir', run, '--history', history,
      '--forest', join(trained, 'forest.json'), '--port', String(port),
      '--auto-retrain', '0',
    ], { stdio: 'pipe' });
    api = new ApiClient(base);

    const deadline = Date.now() + 60_000;
    for (;;) {
      try {
        await api.faults();
        break;
      } catch {
        if (Date.now() > deadline) {
          throw new Error('service did not come up');
        }
        await new Promise((resolve) => setTimeout(resolve, 300));
      }
    }
  });

  afterAll(() => {
    server?.kill();
    if (workdir) {
      rmSync(workdir, { recursive: true, force: true });
    }
  });

  it('fault table order equals GET /api/faults order', async () => {
    const rows = await api.faults();
    expect(rows.length).toBeGreaterThanOrEqual(95); // ~100 major faults detected
    const priorities = rows.map((r) => r.priority);
    expect(priorities).toEqual([...priorities].sort((a, b) => b - a));
    const table = renderFaultTable(document, rows);
    expect(tableChannelOrder(table)).toEqual(rows.map((r) => r.channel));
  });

  it('channel map renders the full served geometry', async () => {
    const payload = await api.map();
    expect(payload.channels).toHaveLength(512);
    const map = renderChannelMap(document, payload);
    expect(map.querySelectorAll('.map-cell')).toHaveLength(512);
    expect(map.querySelectorAll('.detected').length).toBeGreaterThan(0);
  });

  it('confirm and infirm-with-correction grow the training view', async () => {
    const before = (await api.retrain()).n_examples;
    const rows = await api.faults();
    const [first, second] = rows.filter((r) => r.verdict === 'UNREVIEWED');

    const confirm = new VerdictController(
      api, initialReviewState(first.case_id as number, 'UNREVIEWED'));
    expect(await confirm.submit({ verdict: 'CONFIRMED' })).toBe(true);
    expect((await api.retrain()).n_examples).toBe(before + 1);

    const infirm = new VerdictController(
      api, initialReviewState(second.case_id as number, 'UNREVIEWED'));
    expect(
      await infirm.submit({
        verdict: 'INFIRMED',
        correctedAction: 'DECREASE_NOISE_THRESHOLD',
        correctedSeverity: 2,
      }),
    ).toBe(true);
    expect((await api.retrain()).n_examples).toBe(before + 2);

    const refreshed = await api.faults();
    const byCase = new Map(refreshed.map((r: FaultRow) => [r.case_id, r.verdict]));
    expect(byCase.get(first.case_id)).toBe('CONFIRMED');
    expect(byCase.get(second.case_id)).toBe('INFIRMED');
  });

  it('infirm without correction is blocked client-side and rejected server-side',
     async () => {
    const rows = await api.faults();
    const target = rows.find((r) => r.verdict === 'UNREVIEWED')!;

    // client side: the controller refuses to send anything
    const fetchSpy = vi.spyOn(globalThis, 'fetch');
    const controller = new VerdictController(
      api, initialReviewState(target.case_id as number, 'UNREVIEWED'));
    expect(await controller.submit({ verdict: 'INFIRMED' })).toBe(false);
    expect(fetchSpy).not.toHaveBeenCalled();
    fetchSpy.mockRestore();

    // server side: a raw request without the corrected label gets a 422
    const resp = await fetch(`${base}/api/cases/${target.case_id}/verdict`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ verdict: 'INFIRMED' }),
    });
    expect(resp.status).toBe(422);
    const body = await resp.json();
    expect(JSON.stringify(body)).toContain('corrected_label');
    const after = await api.faults();
    expect(after.find((r) => r.case_id === target.case_id)?.verdict).toBe('UNREVIEWED');
  });
});

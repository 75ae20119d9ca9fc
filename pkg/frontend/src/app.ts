// Dashboard wiring: fault table, channel heat map, explanation panel and the
// verdict form.  All numbers shown come from the service; the client only
// formats them.

import { ApiClient } from './api.js';
import { renderChannelMap } from './channelMap.js';
import { applyFilter, NO_FILTER, renderFaultTable, type FaultFilter } from './faultTable.js';
import { actionPhrase, diagnosisHeadline, formatProbability } from './format.js';
import type { DiagnosisAction, FaultRow } from './types.js';
import {
  FAULT_ACTIONS,
  initialReviewState,
  VerdictController,
  type VerdictSelection,
} from './verdict.js';

interface AppState {
  rows: FaultRow[];
  filter: FaultFilter;
  selected: FaultRow | null;
}

export function splitSentences(explanation: string): string[] {
  return explanation
    .split(';')
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
}

export function startApp(doc: Document, api: ApiClient = new ApiClient()): void {
  const state: AppState = { rows: [], filter: { ...NO_FILTER }, selected: null };
  const root = doc.getElementById('app');
  if (!root) {
    throw new Error('missing #app container');
  }
  root.innerHTML = `
    <div id="banner" class="banner hidden"></div>
    <header>
      <h1>Channel QC fault triage</h1>
      <div class="filters">
        <label>Diagnosis
          <select id="filter-class">
            <option value="ALL">all</option>
            ${FAULT_ACTIONS.map((a) => `<option value="${a}">${actionPhrase(a)}</option>`).join('')}
          </select>
        </label>
        <label>Min priority
          <input id="filter-priority" type="number" min="0" max="1" step="0.05" value="0">
        </label>
        <button id="retrain">Retrain forest</button>
        <span id="retrain-status"></span>
      </div>
    </header>
    <main>
      <section id="table-pane"></section>
      <aside id="detail-pane"><p class="placeholder">Select a fault to review.</p></aside>
    </main>
    <section id="map-pane"><h2>Channel map</h2></section>
  `;

  const banner = root.querySelector('#banner') as HTMLElement;
  const tablePane = root.querySelector('#table-pane') as HTMLElement;
  const detailPane = root.querySelector('#detail-pane') as HTMLElement;
  const mapPane = root.querySelector('#map-pane') as HTMLElement;

  function showBanner(message: string, retry: () => void): void {
    banner.classList.remove('hidden');
    banner.innerHTML = '';
    const text = doc.createElement('span');
    text.textContent = message;
    const button = doc.createElement('button');
    button.textContent = 'Retry';
    button.addEventListener('click', retry);
    banner.append(text, button);
  }

  function hideBanner(): void {
    banner.classList.add('hidden');
    banner.innerHTML = '';
  }

  function renderTable(): void {
    tablePane.innerHTML = '';
    if (state.rows.length === 0) {
      const empty = doc.createElement('p');
      empty.className = 'empty-state';
      empty.textContent = 'No faults detected. All channels look healthy.';
      tablePane.appendChild(empty);
      return;
    }
    const table = renderFaultTable(doc, state.rows, state.filter, (row) => {
      state.selected = row;
      renderDetail(row);
    });
    tablePane.appendChild(table);
    const count = doc.createElement('p');
    count.className = 'row-count';
    const visible = applyFilter(state.rows, state.filter).length;
    count.textContent = `${visible} of ${state.rows.length} faults shown`;
    tablePane.appendChild(count);
  }

  function renderDetail(row: FaultRow): void {
    detailPane.innerHTML = '';
    const heading = doc.createElement('h2');
    heading.textContent = `Channel ${row.channel}`;
    const headline = doc.createElement('p');
    headline.className = 'headline';
    headline.textContent = diagnosisHeadline(row.class, row.probability);

    // forest posterior bar and rule sentences side by side
    const duo = doc.createElement('div');
    duo.className = 'explanation-duo';
    const bar = doc.createElement('div');
    bar.className = 'posterior-bar';
    const fill = doc.createElement('div');
    fill.className = 'posterior-fill';
    fill.style.width = `${row.probability * 100}%`;
    fill.title = formatProbability(row.probability);
    bar.appendChild(fill);
    const barLabel = doc.createElement('p');
    barLabel.textContent = `forest posterior: ${formatProbability(row.probability)}`;
    const sentences = doc.createElement('ul');
    sentences.className = 'es-sentences';
    for (const sentence of splitSentences(row.explanation)) {
      const li = doc.createElement('li');
      li.textContent = sentence;
      sentences.appendChild(li);
    }
    const barBox = doc.createElement('div');
    barBox.append(bar, barLabel);
    duo.append(barBox, sentences);

    detailPane.append(heading, headline, duo);
    if (row.case_id !== null) {
      detailPane.appendChild(buildVerdictForm(row));
    }
  }

  function buildVerdictForm(row: FaultRow): HTMLElement {
    const form = doc.createElement('div');
    form.className = 'verdict-form';
    form.innerHTML = `
      <h3>Operator verdict</h3>
      <div class="verdict-status" id="verdict-status">${row.verdict ?? 'UNREVIEWED'}</div>
      <button id="confirm">Confirm diagnosis</button>
      <div class="infirm-block">
        <button id="infirm">Infirm with correction:</button>
        <select id="corrected-action">
          <option value="">choose action</option>
          ${FAULT_ACTIONS.concat(['HEALTHY']).map((a) => `<option value="${a}">${actionPhrase(a as DiagnosisAction)}</option>`).join('')}
        </select>
        <select id="corrected-severity">
          <option value="">severity</option>
          ${[1, 2, 3, 4, 5].map((s) => `<option value="${s}">L${s}</option>`).join('')}
        </select>
      </div>
      <div class="form-error" id="form-error"></div>
    `;
    const status = form.querySelector('#verdict-status') as HTMLElement;
    const errorBox = form.querySelector('#form-error') as HTMLElement;
    const controller = new VerdictController(
      api,
      initialReviewState(row.case_id as number, row.verdict ?? 'UNREVIEWED'),
      (s) => {
        status.textContent = s.pending ? `${s.displayVerdict} (saving…)` : s.displayVerdict;
        status.classList.toggle('unsent', s.unsent);
        errorBox.textContent = s.validationError ?? s.serverError ?? '';
        row.verdict = s.verdict;
      },
    );
    const submit = async (selection: VerdictSelection) => {
      const ok = await controller.submit(selection);
      if (ok) {
        renderTable();
      }
    };
    (form.querySelector('#confirm') as HTMLButtonElement).addEventListener('click', () =>
      submit({ verdict: 'CONFIRMED' }),
    );
    (form.querySelector('#infirm') as HTMLButtonElement).addEventListener('click', () => {
      const action = (form.querySelector('#corrected-action') as HTMLSelectElement).value;
      const severityRaw = (form.querySelector('#corrected-severity') as HTMLSelectElement)
        .value;
      void submit({
        verdict: 'INFIRMED',
        correctedAction: (action || null) as DiagnosisAction | null,
        correctedSeverity: severityRaw ? Number(severityRaw) : null,
      });
    });
    return form;
  }

  async function loadFaults(): Promise<void> {
    try {
      state.rows = await api.faults();
      hideBanner();
      renderTable();
    } catch {
      showBanner('Cannot reach the QC service.', () => void loadFaults());
    }
  }

  async function loadMap(): Promise<void> {
    try {
      const payload = await api.map();
      mapPane.querySelectorAll('.channel-map, .map-error').forEach((el) => el.remove());
      mapPane.appendChild(renderChannelMap(doc, payload));
    } catch (err) {
      const msg = doc.createElement('p');
      msg.className = 'map-error';
      msg.textContent = `Channel map unavailable: ${String(err)}`;
      mapPane.appendChild(msg);
    }
  }

  (root.querySelector('#filter-class') as HTMLSelectElement).addEventListener(
    'change',
    (ev) => {
      state.filter.faultClass = (ev.target as HTMLSelectElement).value as
        | DiagnosisAction
        | 'ALL';
      renderTable();
    },
  );
  (root.querySelector('#filter-priority') as HTMLInputElement).addEventListener(
    'change',
    (ev) => {
      state.filter.minPriority = Number((ev.target as HTMLInputElement).value) || 0;
      renderTable();
    },
  );
  (root.querySelector('#retrain') as HTMLButtonElement).addEventListener('click', () => {
    const status = root.querySelector('#retrain-status') as HTMLElement;
    status.textContent = 'retraining…';
    api
      .retrain()
      .then((r) => {
        status.textContent = `retrained on ${r.n_examples} labeled cases`;
      })
      .catch((err) => {
        status.textContent = `retrain failed: ${String(err)}`;
      });
  });

  void loadFaults();
  void loadMap();
}

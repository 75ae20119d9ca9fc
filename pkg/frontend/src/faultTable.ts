// Prioritized fault list.  The server already ranks faults by priority; the
// table preserves that order unconditionally, and client-side filters only
// hide rows, never reorder them.

import { diagnosisHeadline, formatPriority, formatSeverity } from './format.js';
import type { DiagnosisAction, FaultRow } from './types.js';

export interface FaultFilter {
  faultClass: DiagnosisAction | 'ALL';
  minPriority: number;
}

export const NO_FILTER: FaultFilter = { faultClass: 'ALL', minPriority: 0 };

export function applyFilter(rows: FaultRow[], filter: FaultFilter): FaultRow[] {
  return rows.filter(
    (row) =>
      (filter.faultClass === 'ALL' || row.class === filter.faultClass) &&
      row.priority >= filter.minPriority,
  );
}

function shortExplanation(text: string, limit = 90): string {
  return text.length <= limit ? text : `${text.slice(0, limit - 1)}…`;
}

export function renderFaultTable(
  doc: Document,
  rows: FaultRow[],
  filter: FaultFilter = NO_FILTER,
  onSelect?: (row: FaultRow) => void,
): HTMLTableElement {
  const table = doc.createElement('table');
  table.className = 'fault-table';
  const head = doc.createElement('thead');
  head.innerHTML =
    '<tr><th>#</th><th>Channel</th><th>Priority</th><th>Cluster</th>' +
    '<th>Diagnosis</th><th>Severity</th><th>Explanation</th><th>Review</th></tr>';
  table.appendChild(head);

  const body = doc.createElement('tbody');
  const visible = applyFilter(rows, filter);
  visible.forEach((row, index) => {
    const tr = doc.createElement('tr');
    tr.dataset.channel = String(row.channel);
    tr.dataset.caseId = row.case_id === null ? '' : String(row.case_id);
    tr.dataset.priority = String(row.priority);
    tr.dataset.probability = String(row.probability);

    const cells = [
      String(index + 1),
      String(row.channel),
      formatPriority(row.priority),
      row.cluster_size > 1 ? `${row.cluster_size} ch` : 'isolated',
      diagnosisHeadline(row.class, row.probability),
      formatSeverity(row.severity),
      shortExplanation(row.explanation),
      row.verdict && row.verdict !== 'UNREVIEWED' ? row.verdict.toLowerCase() : '',
    ];
    for (const text of cells) {
      const td = doc.createElement('td');
      td.textContent = text;
      tr.appendChild(td);
    }
    if (row.verdict && row.verdict !== 'UNREVIEWED') {
      tr.classList.add('reviewed');
    }
    if (onSelect) {
      tr.addEventListener('click', () => onSelect(row));
    }
    body.appendChild(tr);
  });
  table.appendChild(body);
  return table;
}

export function tableChannelOrder(table: HTMLTableElement): number[] {
  return Array.from(table.querySelectorAll('tbody tr')).map((tr) =>
    Number((tr as HTMLTableRowElement).dataset.channel),
  );
}

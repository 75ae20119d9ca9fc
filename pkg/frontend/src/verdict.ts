// Confirm / infirm review flow.  Infirming requires a corrected label, which
// is enforced twice: here before any request leaves the client, and by the
// service (422).  Updates are optimistic and rolled back on any failure; a
// network failure additionally flags the verdict as unsent so the operator
// knows nothing was recorded.

import { ApiError, ApiClient } from './api.js';
import type { CorrectedLabel, DiagnosisAction, VerdictValue } from './types.js';

export const FAULT_ACTIONS: DiagnosisAction[] = [
  'INCREASE_BIAS',
  'DECREASE_BIAS',
  'INCREASE_NOISE_THRESHOLD',
  'DECREASE_NOISE_THRESHOLD',
];

export interface VerdictSelection {
  verdict: VerdictValue;
  correctedAction?: DiagnosisAction | null;
  correctedSeverity?: number | null;
}

export function validateSelection(selection: VerdictSelection): string | null {
  if (selection.verdict === 'INFIRMED') {
    if (!selection.correctedAction) {
      return 'infirming a diagnosis requires choosing the corrected action';
    }
    if (selection.correctedAction === 'HEALTHY') {
      return null; // healthy carries no severity
    }
    const severity = selection.correctedSeverity;
    if (severity === null || severity === undefined || severity < 1 || severity > 5) {
      return 'infirming a diagnosis requires a corrected severity (1..5)';
    }
  }
  return null;
}

export function correctedLabelOf(selection: VerdictSelection): CorrectedLabel | undefined {
  if (selection.verdict !== 'INFIRMED' || !selection.correctedAction) {
    return undefined;
  }
  return {
    action: selection.correctedAction,
    severity:
      selection.correctedAction === 'HEALTHY' ? 0 : selection.correctedSeverity ?? 0,
  };
}

export interface ReviewState {
  caseId: number;
  verdict: VerdictValue; // last server-acknowledged verdict
  displayVerdict: VerdictValue; // optimistic view
  pending: boolean;
  unsent: boolean; // a submission never reached the server
  validationError: string | null;
  serverError: string | null;
}

export function initialReviewState(caseId: number, verdict: VerdictValue): ReviewState {
  return {
    caseId,
    verdict,
    displayVerdict: verdict,
    pending: false,
    unsent: false,
    validationError: null,
    serverError: null,
  };
}

export class VerdictController {
  constructor(
    private api: ApiClient,
    public state: ReviewState,
    private onChange: (state: ReviewState) => void = () => {},
  ) {}

  private update(patch: Partial<ReviewState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  /** Returns true when the verdict was accepted by the server. */
  async submit(selection: VerdictSelection): Promise<boolean> {
    const validationError = validateSelection(selection);
    if (validationError) {
      // blocked client-side: no request leaves the browser
      this.update({ validationError, serverError: null });
      return false;
    }
    const rollback = this.state.verdict;
    this.update({
      validationError: null,
      serverError: null,
      displayVerdict: selection.verdict,
      pending: true,
      unsent: false,
    });
    try {
      const record = await this.api.submitVerdict(
        this.state.caseId,
        selection.verdict,
        correctedLabelOf(selection),
      );
      this.update({
        verdict: record.verdict,
        displayVerdict: record.verdict,
        pending: false,
      });
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.update({
          displayVerdict: rollback,
          pending: false,
          serverError: `rejected by service (${err.status}): ${JSON.stringify(err.detail)}`,
        });
      } else {
        this.update({
          displayVerdict: rollback,
          pending: false,
          unsent: true,
          serverError: 'network failure: verdict not sent',
        });
      }
      return false;
    }
  }
}

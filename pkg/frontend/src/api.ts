import type {
  CaseRecord,
  ChannelDetail,
  CorrectedLabel,
  FaultRow,
  MapPayload,
  VerdictValue,
} from './types.js';

export class ApiError extends Error {
  constructor(public status: number, public detail: unknown) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = '') {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, await safeBody(resp));
    }
    return (await resp.json()) as T;
  }

  faults(): Promise<FaultRow[]> {
    return this.getJson<FaultRow[]>('/api/faults');
  }

  cases(): Promise<CaseRecord[]> {
    return this.getJson<CaseRecord[]>('/api/cases');
  }

  channel(id: number): Promise<ChannelDetail> {
    return this.getJson<ChannelDetail>(`/api/channels/${id}`);
  }

  map(): Promise<MapPayload> {
    return this.getJson<MapPayload>('/api/map');
  }

  async submitVerdict(
    caseId: number,
    verdict: VerdictValue,
    correctedLabel?: CorrectedLabel,
  ): Promise<CaseRecord> {
    const body: Record<string, unknown> = { verdict };
    if (correctedLabel) {
      body.corrected_label = correctedLabel;
    }
    const resp = await fetch(`${this.baseUrl}/api/cases/${caseId}/verdict`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await safeBody(resp));
    }
    return (await resp.json()) as CaseRecord;
  }

  async retrain(): Promise<{ trained: boolean; n_examples: number }> {
    const resp = await fetch(`${this.baseUrl}/api/retrain`, { method: 'POST' });
    if (!resp.ok) {
      throw new ApiError(resp.status, await safeBody(resp));
    }
    return (await resp.json()) as { trained: boolean; n_examples: number };
  }
}

async function safeBody(resp: Response): Promise<unknown> {
  try {
    return await resp.json();
  } catch {
    return resp.statusText;
  }
}

// Payload shapes of the channelqc operator service.  The UI displays these
// verbatim; it never derives priorities, diagnoses or statistics on its own.

export type DiagnosisAction =
  | 'INCREASE_BIAS'
  | 'DECREASE_BIAS'
  | 'INCREASE_NOISE_THRESHOLD'
  | 'DECREASE_NOISE_THRESHOLD'
  | 'HEALTHY';

export type VerdictValue = 'UNREVIEWED' | 'CONFIRMED' | 'INFIRMED';

export interface FaultRow {
  channel: number;
  case_id: number | null;
  priority: number;
  cluster_id: number;
  cluster_size: number;
  health: number;
  class: DiagnosisAction;
  severity: number | null;
  probability: number;
  explanation: string;
  verdict: VerdictValue | null;
}

export interface CorrectedLabel {
  action: DiagnosisAction;
  severity: number;
}

export interface CaseRecord {
  case_id: number;
  channel: number;
  proposed: {
    class: DiagnosisAction;
    severity: number;
    probability: number;
    explanation: string;
  };
  verdict: VerdictValue;
  corrected_label: CorrectedLabel | null;
  timestamp: number;
  origin: string;
}

export interface MapChannel {
  channel: number;
  ring: number;
  axial: number;
  health: number | null;
  priority: number | null;
  detected: boolean;
  cluster_id: number | null;
}

export interface MapPayload {
  channels_per_ring: number;
  rings: number;
  wrap: boolean;
  channels: MapChannel[];
}

export interface ChannelDetail {
  channel: number;
  geometry: { ring: number; axial: number };
  diagnosis: {
    class: DiagnosisAction;
    severity: number | null;
    probability: number;
    detected: boolean;
    explanation: string;
  };
  priority: number | null;
  cluster_id: number | null;
  cluster_size: number | null;
  features: number[] | null;
  case_id: number | null;
}

import type { DiagnosisAction } from './types.js';

const ACTION_PHRASES: Record<DiagnosisAction, string> = {
  INCREASE_BIAS: 'Increase Polarization',
  DECREASE_BIAS: 'Decrease Polarization',
  INCREASE_NOISE_THRESHOLD: 'Increase Noise Threshold',
  DECREASE_NOISE_THRESHOLD: 'Decrease Noise Threshold',
  HEALTHY: 'Healthy',
};

/** Server probabilities render as one-decimal percent, e.g. 0.96 -> "96.0%". */
export function formatProbability(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export function actionPhrase(action: DiagnosisAction): string {
  return ACTION_PHRASES[action];
}

export function diagnosisHeadline(action: DiagnosisAction, probability: number): string {
  return `${actionPhrase(action)} (${formatProbability(probability)})`;
}

export function formatSeverity(severity: number | null): string {
  return severity === null || severity === 0 ? '-' : `L${severity}`;
}

export function formatPriority(p: number): string {
  return p.toFixed(3);
}

"""Per-channel diagnosis: forest posterior merged with rule conclusions.

The forest supplies the diagnosis class (the corrective action) and its
posterior probability; the expert system supplies sentences explaining what it
found.  The merge keeps everything: rule conclusions matching the forest class
become the explanation, the rest are carried along as additional findings, so
neither source can silently erase the other.

Detection itself is a probability threshold on the forest posterior of the
winning non-healthy class (0.70 by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .csvio import format_bool, format_float, parse_bool, read_csv, write_csv
from .features import ExtractedParameters, PerformanceIndicators, SaturationStatus, Status
from .forest import Forest, train_forest
from .rules import InferenceResult, RuleSet, infer_rules
from .scanner import MAJOR, ChannelObservables, FaultType


class DetectionError(ValueError):
    """Invalid detection threshold."""


class DiagnosisClass(Enum):
    """Corrective action; declaration order is the vote tie-break, HEALTHY last."""

    INCREASE_BIAS = "INCREASE_BIAS"
    DECREASE_BIAS = "DECREASE_BIAS"
    INCREASE_NOISE_THRESHOLD = "INCREASE_NOISE_THRESHOLD"
    DECREASE_NOISE_THRESHOLD = "DECREASE_NOISE_THRESHOLD"
    HEALTHY = "HEALTHY"


CLASS_ORDER = tuple(DiagnosisClass)
CLASS_PHRASES = {
    DiagnosisClass.INCREASE_BIAS: "Increase Polarization",
    DiagnosisClass.DECREASE_BIAS: "Decrease Polarization",
    DiagnosisClass.INCREASE_NOISE_THRESHOLD: "Increase Noise Threshold",
    DiagnosisClass.DECREASE_NOISE_THRESHOLD: "Decrease Noise Threshold",
    DiagnosisClass.HEALTHY: "Healthy",
}

SEVERITY_NONE = 0
MAX_SEVERITY = 5


def expected_action(fault_type: FaultType, direction: str) -> DiagnosisClass:
    """The corrective action that inverts an injected fault."""
    if fault_type is FaultType.BIAS_SHIFT:
        return (DiagnosisClass.INCREASE_BIAS if direction == "decrease"
                else DiagnosisClass.DECREASE_BIAS)
    return (DiagnosisClass.INCREASE_NOISE_THRESHOLD if direction == "decrease"
            else DiagnosisClass.DECREASE_NOISE_THRESHOLD)


def truth_severity(level: int | str) -> int:
    """Training severity for an injected level; MAJOR counts as the worst level."""
    return MAX_SEVERITY if level == MAJOR else int(level)


FEATURE_NAMES = (
    "drift", "strength", "ident_pass", "energy_pass", "saturated",
    "health", "photopeak_adc", "count_rate", "energy_res_pct",
)


@dataclass(frozen=True)
class FeatureVector:
    drift: float
    strength: float
    ident_pass: float  # 0/1
    energy_pass: float  # 0/1
    saturated: float  # 0/1
    health: float
    photopeak_adc: float
    count_rate: float
    energy_res_pct: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)

    def facts(self) -> dict[str, float | bool]:
        """Fact view for the rule engine; 0/1 gates become booleans."""
        return {
            "drift": self.drift,
            "strength": self.strength,
            "ident_pass": bool(self.ident_pass),
            "energy_pass": bool(self.energy_pass),
            "saturated": bool(self.saturated),
            "health": self.health,
            "photopeak_adc": self.photopeak_adc,
            "count_rate": self.count_rate,
            "energy_res_pct": self.energy_res_pct,
        }

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {len(values)}")
        return cls(*[float(v) for v in values])


def build_feature_vector(obs: ChannelObservables, params: ExtractedParameters,
                         indicators: PerformanceIndicators) -> FeatureVector:
    return FeatureVector(
        drift=params.photopeak_drift,
        strength=params.strength,
        ident_pass=float(params.identification_status is Status.PASS),
        energy_pass=float(params.energy_status is Status.PASS),
        saturated=float(params.saturation_status is SaturationStatus.SATURATED),
        health=indicators.health,
        photopeak_adc=obs.photopeak_position,
        count_rate=obs.count_rate,
        energy_res_pct=obs.energy_resolution,
    )


# ---------------------------------------------------------------------------
# Label encoding: forest leaves carry (action, severity) pairs.

def encode_label(action: DiagnosisClass, severity: int) -> str:
    return f"{action.value}:{severity}"


def decode_label(label: str) -> tuple[DiagnosisClass, int]:
    action, severity = label.rsplit(":", 1)
    return DiagnosisClass(action), int(severity)


def label_vocabulary() -> tuple[str, ...]:
    """All (action, severity) labels in canonical tie-break order."""
    labels = []
    for action in CLASS_ORDER:
        if action is DiagnosisClass.HEALTHY:
            continue
        for severity in range(1, MAX_SEVERITY + 1):
            labels.append(encode_label(action, severity))
    labels.append(encode_label(DiagnosisClass.HEALTHY, SEVERITY_NONE))
    return tuple(labels)


def train_diagnosis_forest(examples: Sequence[tuple[FeatureVector, DiagnosisClass, int]],
                           n_trees: int = 100, seed: int = 0,
                           max_features: int | str | None = "sqrt",
                           bootstrap: bool = True) -> Forest:
    vocab = label_vocabulary()
    index = {name: i for i, name in enumerate(vocab)}
    X = np.array([fv.to_array() for fv, _, _ in examples], dtype=float)
    y = np.array([index[encode_label(action, severity)]
                  for _, action, severity in examples], dtype=np.int64)
    return train_forest(X, y, vocab, n_trees=n_trees, seed=seed,
                        max_features=max_features, bootstrap=bootstrap)


@dataclass(frozen=True)
class ClassifierOutput:
    posterior: dict[DiagnosisClass, float]
    predicted: DiagnosisClass
    severity: int

    @property
    def probability(self) -> float:
        return self.posterior[self.predicted]


def classify(forest: Forest, x: FeatureVector) -> ClassifierOutput:
    return classify_batch(forest, [x])[0]


def classify_batch(forest: Forest, xs: Sequence[FeatureVector]) -> list[ClassifierOutput]:
    X = np.array([x.to_array() for x in xs], dtype=float)
    votes = forest.label_votes(X)
    decoded = [decode_label(name) for name in forest.label_names]
    outputs = []
    for row in votes:
        action_votes = {action: 0 for action in CLASS_ORDER}
        severity_votes: dict[DiagnosisClass, dict[int, int]] = {a: {} for a in CLASS_ORDER}
        for (action, severity), count in zip(decoded, row):
            if count == 0:
                continue
            action_votes[action] += int(count)
            severity_votes[action][severity] = severity_votes[action].get(severity, 0) + int(count)
        n = forest.n_trees
        posterior = {action: action_votes[action] / n for action in CLASS_ORDER}
        # argmax with declaration-order tie-break (HEALTHY last)
        predicted = max(CLASS_ORDER, key=lambda a: (posterior[a], -CLASS_ORDER.index(a)))
        sev_counts = severity_votes[predicted]
        if sev_counts:
            severity = max(sev_counts, key=lambda s: (sev_counts[s], s))  # ties: higher
        else:
            severity = SEVERITY_NONE
        outputs.append(ClassifierOutput(posterior=posterior, predicted=predicted,
                                        severity=severity))
    return outputs


# ---------------------------------------------------------------------------
# Merge and detection

@dataclass(frozen=True)
class Finding:
    """Rule conclusion kept alongside the main class."""

    action: DiagnosisClass
    probability: float  # forest posterior of this action
    sentences: tuple[str, ...]


@dataclass(frozen=True)
class Diagnosis:
    channel: int
    diagnosis_class: DiagnosisClass
    severity: int  # 1..5, SEVERITY_NONE for healthy
    probability: float
    explanation: str
    from_forest: bool
    from_rules: bool
    findings: tuple[Finding, ...] = ()

    def headline(self) -> str:
        return f"{CLASS_PHRASES[self.diagnosis_class]} ({self.probability:.1%})"

    def render(self) -> str:
        return f"{self.headline()}: {self.explanation}"


def merge(channel: int, rf: ClassifierOutput, es: InferenceResult) -> Diagnosis:
    """Combine forest and rule outputs, keeping both sources' conclusions."""
    main_class = rf.predicted
    severity = rf.severity if main_class is not DiagnosisClass.HEALTHY else SEVERITY_NONE
    consistent_sentences: list[str] = []
    findings: list[Finding] = []
    for conclusion in es.conclusions:
        action = DiagnosisClass(conclusion.action)
        if action is main_class:
            consistent_sentences.extend(conclusion.sentences)
        else:
            findings.append(Finding(
                action=action,
                probability=rf.posterior[action],
                sentences=conclusion.sentences,
            ))

    parts = []
    if consistent_sentences:
        parts.append(", ".join(consistent_sentences))
    for finding in findings:
        body = ", ".join(finding.sentences)
        parts.append(
            f"additional findings: {CLASS_PHRASES[finding.action]} "
            f"({finding.probability:.1%}): {body}")
    if not parts:
        parts.append("no findings")
    return Diagnosis(
        channel=channel,
        diagnosis_class=main_class,
        severity=severity,
        probability=rf.probability,
        explanation="; ".join(parts),
        from_forest=True,
        from_rules=bool(es.conclusions),
        findings=tuple(findings),
    )


DEFAULT_DETECTION_THRESHOLD = 0.70


def detect(d: Diagnosis, threshold: float = DEFAULT_DETECTION_THRESHOLD) -> bool:
    if not 0.0 < threshold <= 1.0:
        raise DetectionError(f"detection threshold must be in (0, 1], got {threshold}")
    return d.diagnosis_class is not DiagnosisClass.HEALTHY and d.probability >= threshold


def diagnose_all(features: Mapping[int, FeatureVector], forest: Forest, ruleset: RuleSet,
                 threshold: float = DEFAULT_DETECTION_THRESHOLD,
                 ) -> tuple[list[int], dict[int, Diagnosis]]:
    """Diagnose every channel; the fault list is the detected subset."""
    if not 0.0 < threshold <= 1.0:
        raise DetectionError(f"detection threshold must be in (0, 1], got {threshold}")
    channels = sorted(features)
    outputs = classify_batch(forest, [features[c] for c in channels])
    diagnoses = {}
    detected = []
    for channel, rf in zip(channels, outputs):
        es = infer_rules(ruleset, features[channel].facts())
        d = merge(channel, rf, es)
        diagnoses[channel] = d
        if detect(d, threshold):
            detected.append(channel)
    return detected, diagnoses


# ---------------------------------------------------------------------------
# File format

DIAGNOSIS_HEADER = ["channel_id", "class", "severity", "probability", "detected",
                    "explanation"]
FEATURES_HEADER = ["channel_id", *FEATURE_NAMES]


def write_features(features: Mapping[int, FeatureVector], path,
                   manifest_hash: str | None = None,
                   parent_hash: str | None = None) -> None:
    rows = (
        [str(c), *(format_float(v) for v in features[c].to_array())]
        for c in sorted(features)
    )
    write_csv(path, FEATURES_HEADER, rows, manifest_hash, parent_hash)


def read_features(path) -> dict[int, FeatureVector]:
    _, rows, _, _ = read_csv(path, FEATURES_HEADER)
    return {int(r[0]): FeatureVector.from_array([float(v) for v in r[1:]]) for r in rows}


def write_diagnoses(diagnoses: Mapping[int, Diagnosis], detected: Sequence[int], path,
                    manifest_hash: str | None = None,
                    parent_hash: str | None = None) -> None:
    detected_set = set(detected)
    rows = (
        [str(c), d.diagnosis_class.value,
         "NONE" if d.severity == SEVERITY_NONE else str(d.severity),
         format_float(d.probability), format_bool(c in detected_set), d.explanation]
        for c, d in sorted(diagnoses.items())
    )
    write_csv(path, DIAGNOSIS_HEADER, rows, manifest_hash, parent_hash)


@dataclass(frozen=True)
class DiagnosisRow:
    channel: int
    diagnosis_class: DiagnosisClass
    severity: int
    probability: float
    detected: bool
    explanation: str


def read_diagnoses(path) -> tuple[dict[int, DiagnosisRow], str | None, str | None]:
    _, rows, manifest_hash, parent_hash = read_csv(path, DIAGNOSIS_HEADER)
    out = {}
    for r in rows:
        c = int(r[0])
        out[c] = DiagnosisRow(
            channel=c,
            diagnosis_class=DiagnosisClass(r[1]),
            severity=SEVERITY_NONE if r[2] == "NONE" else int(r[2]),
            probability=float(r[3]),
            detected=parse_bool(r[4]),
            explanation=r[5],
        )
    return out, manifest_hash, parent_hash

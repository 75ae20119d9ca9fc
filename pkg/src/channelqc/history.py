"""Append-only fault history: labeled cases and operator verdicts.

The store is a JSON-lines log with a schema header.  Cases are never mutated
in place; verdicts are appended as amendment records and resolved at read time
(last verdict wins).  A crash mid-append leaves a trailing partial line, which
the loader drops; any other malformed line is a hard error naming it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .diagnosis import FEATURE_NAMES, DiagnosisClass, FeatureVector

SCHEMA_VERSION = 1


class StoreError(Exception):
    """History store failure."""


class CorruptStoreError(StoreError):
    def __init__(self, path, lineno: int, reason: str):
        super().__init__(f"{path}:{lineno}: corrupt history record ({reason})")
        self.path = str(path)
        self.lineno = lineno


class VerdictError(ValueError):
    """Invalid operator verdict."""


class Verdict(str, Enum):
    UNREVIEWED = "UNREVIEWED"
    CONFIRMED = "CONFIRMED"
    INFIRMED = "INFIRMED"


@dataclass(frozen=True)
class FaultRecord:
    case_id: int
    channel: int
    features: FeatureVector
    proposed_class: DiagnosisClass
    proposed_severity: int
    proposed_probability: float
    explanation: str
    verdict: Verdict
    corrected_label: tuple[DiagnosisClass, int] | None
    timestamp: int
    origin: str  # "operator" or "bootstrap"

    def training_label(self) -> tuple[DiagnosisClass, int] | None:
        if self.verdict is Verdict.CONFIRMED:
            return self.proposed_class, self.proposed_severity
        if self.verdict is Verdict.INFIRMED:
            return self.corrected_label
        return None


def _record_to_json(record: FaultRecord) -> dict:
    corrected = None
    if record.corrected_label is not None:
        corrected = {"class": record.corrected_label[0].value,
                     "severity": record.corrected_label[1]}
    return {
        "type": "case",
        "case_id": record.case_id,
        "channel": record.channel,
        "features": {name: getattr(record.features, name) for name in FEATURE_NAMES},
        "proposed": {
            "class": record.proposed_class.value,
            "severity": record.proposed_severity,
            "probability": record.proposed_probability,
            "explanation": record.explanation,
        },
        "verdict": record.verdict.value,
        "corrected": corrected,
        "ts": record.timestamp,
        "origin": record.origin,
    }


def _record_from_json(obj: dict) -> FaultRecord:
    corrected = None
    if obj.get("corrected") is not None:
        corrected = (DiagnosisClass(obj["corrected"]["class"]),
                     int(obj["corrected"]["severity"]))
    proposed = obj["proposed"]
    return FaultRecord(
        case_id=int(obj["case_id"]),
        channel=int(obj["channel"]),
        features=FeatureVector(**{k: float(v) for k, v in obj["features"].items()}),
        proposed_class=DiagnosisClass(proposed["class"]),
        proposed_severity=int(proposed["severity"]),
        proposed_probability=float(proposed["probability"]),
        explanation=proposed.get("explanation", ""),
        verdict=Verdict(obj["verdict"]),
        corrected_label=corrected,
        timestamp=int(obj["ts"]),
        origin=obj.get("origin", "operator"),
    )


class HistoryStore:
    """Single-writer JSONL store of fault cases and verdict amendments."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._records: dict[int, FaultRecord] = {}
        self._next_case_id = 1
        if os.path.exists(self.path):
            self._load()
        else:
            with open(self.path, "w") as fh:
                fh.write(json.dumps({"schema": SCHEMA_VERSION}) + "\n")

    def _load(self) -> None:
        with open(self.path, "r") as fh:
            content = fh.read()
        lines = content.split("\n")
        incomplete_tail = not content.endswith("\n") and lines[-1] != ""
        if content.endswith("\n") or lines[-1] == "":
            lines = lines[:-1]
        body = lines[:-1] if incomplete_tail else lines
        if not body:
            raise CorruptStoreError(self.path, 1, "missing schema header")
        try:
            header = json.loads(body[0])
        except json.JSONDecodeError as e:
            raise CorruptStoreError(self.path, 1, f"bad header: {e}")
        if header.get("schema") != SCHEMA_VERSION:
            raise CorruptStoreError(self.path, 1,
                                    f"unsupported schema {header.get('schema')!r}")
        for lineno, line in enumerate(body[1:], start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorruptStoreError(self.path, lineno, str(e))
            try:
                self._apply(obj)
            except (KeyError, ValueError) as e:
                raise CorruptStoreError(self.path, lineno, str(e))

    def _apply(self, obj: dict) -> None:
        kind = obj.get("type")
        if kind == "case":
            record = _record_from_json(obj)
            self._records[record.case_id] = record
            self._next_case_id = max(self._next_case_id, record.case_id + 1)
        elif kind == "verdict":
            case_id = int(obj["case_id"])
            if case_id not in self._records:
                raise ValueError(f"amendment references unknown case {case_id}")
            corrected = None
            if obj.get("corrected") is not None:
                corrected = (DiagnosisClass(obj["corrected"]["class"]),
                             int(obj["corrected"]["severity"]))
            self._records[case_id] = replace(
                self._records[case_id],
                verdict=Verdict(obj["verdict"]),
                corrected_label=corrected,
                timestamp=int(obj["ts"]),
            )
        else:
            raise ValueError(f"unknown record type {kind!r}")

    def _append(self, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True) + "\n"
        with open(self.path, "a") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    # -- write API ----------------------------------------------------------

    def record_case(self, channel: int, features: FeatureVector,
                    proposed_class: DiagnosisClass, proposed_severity: int,
                    proposed_probability: float, explanation: str, timestamp: int,
                    verdict: Verdict = Verdict.UNREVIEWED,
                    corrected_label: tuple[DiagnosisClass, int] | None = None,
                    origin: str = "operator") -> int:
        arr = features.to_array()
        if not np.isfinite(arr).all():
            raise StoreError(f"channel {channel}: features must be finite")
        if verdict is Verdict.INFIRMED and corrected_label is None:
            raise VerdictError("INFIRMED cases need a corrected label")
        record = FaultRecord(
            case_id=self._next_case_id,
            channel=channel,
            features=features,
            proposed_class=proposed_class,
            proposed_severity=proposed_severity,
            proposed_probability=proposed_probability,
            explanation=explanation,
            verdict=verdict,
            corrected_label=corrected_label,
            timestamp=timestamp,
            origin=origin,
        )
        self._append(_record_to_json(record))
        self._records[record.case_id] = record
        self._next_case_id += 1
        return record.case_id

    def add_bootstrap_example(self, features: FeatureVector, label: DiagnosisClass,
                              severity: int, timestamp: int, channel: int = -1) -> int:
        """Seed the store with a ground-truth labeled example from a campaign."""
        return self.record_case(
            channel=channel, features=features, proposed_class=label,
            proposed_severity=severity, proposed_probability=1.0,
            explanation="bootstrap campaign ground truth", timestamp=timestamp,
            verdict=Verdict.CONFIRMED, origin="bootstrap")

    def apply_verdict(self, case_id: int, verdict: Verdict,
                      corrected_label: tuple[DiagnosisClass, int] | None = None,
                      timestamp: int = 0) -> FaultRecord:
        if case_id not in self._records:
            raise KeyError(f"unknown case {case_id}")
        if verdict is Verdict.INFIRMED and corrected_label is None:
            raise VerdictError("infirming a diagnosis requires a corrected label")
        if verdict is Verdict.CONFIRMED:
            corrected_label = None
        current = self._records[case_id]
        if current.verdict is verdict and current.corrected_label == corrected_label:
            return current  # idempotent repeat, nothing to append
        corrected = None
        if corrected_label is not None:
            corrected = {"class": corrected_label[0].value, "severity": corrected_label[1]}
        self._append({
            "type": "verdict",
            "case_id": case_id,
            "verdict": verdict.value,
            "corrected": corrected,
            "ts": timestamp,
        })
        self._records[case_id] = replace(current, verdict=verdict,
                                         corrected_label=corrected_label,
                                         timestamp=timestamp)
        return self._records[case_id]

    # -- read API -----------------------------------------------------------

    def get(self, case_id: int) -> FaultRecord:
        if case_id not in self._records:
            raise KeyError(f"unknown case {case_id}")
        return self._records[case_id]

    def cases(self) -> list[FaultRecord]:
        return [self._records[cid] for cid in sorted(self._records)]

    def __len__(self) -> int:
        return len(self._records)

    def labeled_count(self) -> int:
        return sum(1 for r in self._records.values() if r.verdict is not Verdict.UNREVIEWED)

    def training_view(self) -> list[tuple[FeatureVector, DiagnosisClass, int]]:
        """Labeled examples only: bootstrap plus reviewed operator cases."""
        view = []
        for record in self.cases():
            label = record.training_label()
            if label is not None:
                view.append((record.features, label[0], label[1]))
        return view

"""HTTP/JSON service for the operator review loop.

Serves the prioritized fault list, per-channel diagnoses and the channel map
from a finished run, takes confirm/infirm verdicts into the history store, and
retrains the forest on demand (or automatically every N new labels).  All
mutations funnel through one lock; the forest swap is atomic, so readers see
the old or the new forest, never a partial one.
"""

from __future__ import annotations

import os
import threading
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import scanner as sc
from .cli import (
    DIAGNOSIS_FILE,
    FEATURES_FILE,
    PRIORITIES_FILE,
    RANKING_FILE,
    SCANNER_CONFIG_FILE,
)
from .diagnosis import (
    DiagnosisClass,
    SEVERITY_NONE,
    read_diagnoses,
    read_features,
    train_diagnosis_forest,
)
from .forest import TrainingError, forest_hash, load_forest, save_forest
from .history import HistoryStore, Verdict, VerdictError
from .priority import read_priorities, read_ranking


class CorrectedLabel(BaseModel):
    action: str
    severity: int = Field(ge=0, le=5)


class VerdictRequest(BaseModel):
    verdict: str
    corrected_label: Optional[CorrectedLabel] = None


class ServiceState:
    """Run artifacts, history store and the live forest behind one lock."""

    def __init__(self, run_dir: str, history_path: str, forest_path: str,
                 auto_retrain_every: int = 50):
        run = Path(run_dir)
        for name in (DIAGNOSIS_FILE, RANKING_FILE, PRIORITIES_FILE, FEATURES_FILE,
                     SCANNER_CONFIG_FILE):
            if not (run / name).exists():
                raise FileNotFoundError(f"{run / name}: run artifact not found")
        if not Path(forest_path).exists():
            raise FileNotFoundError(f"{forest_path}: forest file not found")
        self.diagnoses, _, _ = read_diagnoses(run / DIAGNOSIS_FILE)
        self.ranking = read_ranking(run / RANKING_FILE)
        self.priorities = read_priorities(run / PRIORITIES_FILE)
        self.features = read_features(run / FEATURES_FILE)
        self.table = sc.read_scanner_config(run / SCANNER_CONFIG_FILE)
        self.forest_path = str(forest_path)
        self.forest = load_forest(forest_path)
        self.store = HistoryStore(history_path)  # may raise CorruptStoreError
        self.auto_retrain_every = auto_retrain_every
        self.lock = threading.Lock()
        self._labels_since_retrain = 0
        self._case_by_channel: dict[int, int] = {}
        for record in self.store.cases():
            if record.origin == "operator":
                self._case_by_channel[record.channel] = record.case_id
        self._seed_cases()

    def _seed_cases(self) -> None:
        """Every detected fault becomes a reviewable case, once."""
        now = int(time.time())
        for fault in self.ranking:
            channel = fault.channel
            if channel in self._case_by_channel:
                continue
            d = self.diagnoses[channel]
            case_id = self.store.record_case(
                channel=channel,
                features=self.features[channel],
                proposed_class=d.diagnosis_class,
                proposed_severity=d.severity,
                proposed_probability=d.probability,
                explanation=d.explanation,
                timestamp=now,
            )
            self._case_by_channel[channel] = case_id

    # -- payload builders ----------------------------------------------------

    def fault_rows(self) -> list[dict]:
        rows = []
        for fault in self.ranking:
            d = self.diagnoses[fault.channel]
            case_id = self._case_by_channel.get(fault.channel)
            record = self.store.get(case_id) if case_id is not None else None
            rows.append({
                "channel": fault.channel,
                "case_id": case_id,
                "priority": fault.priority,
                "cluster_id": fault.cluster_id,
                "cluster_size": fault.cluster_size,
                "health": fault.health,
                "class": d.diagnosis_class.value,
                "severity": None if d.severity == SEVERITY_NONE else d.severity,
                "probability": d.probability,
                "explanation": d.explanation,
                "verdict": record.verdict.value if record else None,
            })
        return rows

    def channel_payload(self, channel: int) -> dict:
        if channel not in self.diagnoses:
            raise KeyError(channel)
        d = self.diagnoses[channel]
        p = self.priorities.get(channel)
        fv = self.features.get(channel)
        idx = list(self.table.channel_ids).index(channel)
        return {
            "channel": channel,
            "geometry": {"ring": int(self.table.ring_idx[idx]),
                         "axial": int(self.table.axial_idx[idx])},
            "diagnosis": {
                "class": d.diagnosis_class.value,
                "severity": None if d.severity == SEVERITY_NONE else d.severity,
                "probability": d.probability,
                "detected": d.detected,
                "explanation": d.explanation,
            },
            "priority": p.priority if p else None,
            "cluster_id": p.cluster_id if p else None,
            "cluster_size": p.cluster_size if p else None,
            "features": fv.to_array().tolist() if fv else None,
            "case_id": self._case_by_channel.get(channel),
        }

    def map_payload(self) -> dict:
        channels = []
        for i, channel in enumerate(self.table.channel_ids):
            c = int(channel)
            p = self.priorities.get(c)
            d = self.diagnoses.get(c)
            channels.append({
                "channel": c,
                "ring": int(self.table.ring_idx[i]),
                "axial": int(self.table.axial_idx[i]),
                "health": p.health if p else None,
                "priority": p.priority if p else None,
                "detected": bool(d.detected) if d else False,
                "cluster_id": p.cluster_id if p and d and d.detected else None,
            })
        return {
            "channels_per_ring": self.table.per_ring,
            "rings": int(self.table.axial_idx.max()) + 1 if len(channels) else 0,
            "wrap": True,
            "channels": channels,
        }

    def case_payload(self, record) -> dict:
        corrected = None
        if record.corrected_label is not None:
            corrected = {"action": record.corrected_label[0].value,
                         "severity": record.corrected_label[1]}
        return {
            "case_id": record.case_id,
            "channel": record.channel,
            "proposed": {
                "class": record.proposed_class.value,
                "severity": record.proposed_severity,
                "probability": record.proposed_probability,
                "explanation": record.explanation,
            },
            "verdict": record.verdict.value,
            "corrected_label": corrected,
            "timestamp": record.timestamp,
            "origin": record.origin,
        }

    # -- mutations ------------------------------------------------------------

    def apply_verdict(self, case_id: int, request: VerdictRequest) -> dict:
        try:
            verdict = Verdict(request.verdict)
        except ValueError:
            raise HTTPException(422, detail=f"unknown verdict {request.verdict!r}")
        if verdict is Verdict.INFIRMED and request.corrected_label is None:
            raise HTTPException(
                422, detail={"field": "corrected_label",
                             "error": "infirming a diagnosis requires a corrected label"})
        corrected = None
        if request.corrected_label is not None:
            try:
                action = DiagnosisClass(request.corrected_label.action)
            except ValueError:
                raise HTTPException(
                    422, detail={"field": "corrected_label.action",
                                 "error": f"unknown action {request.corrected_label.action!r}"})
            corrected = (action, request.corrected_label.severity)
        with self.lock:
            try:
                before = self.store.get(case_id).verdict
            except KeyError:
                raise HTTPException(404, detail=f"unknown case {case_id}")
            try:
                record = self.store.apply_verdict(case_id, verdict, corrected,
                                                  timestamp=int(time.time()))
            except VerdictError as e:
                raise HTTPException(422, detail=str(e))
            if verdict is not Verdict.UNREVIEWED and before is Verdict.UNREVIEWED:
                self._labels_since_retrain += 1
            retrained = False
            if (self.auto_retrain_every > 0
                    and self._labels_since_retrain >= self.auto_retrain_every):
                self._retrain_locked()
                retrained = True
        payload = self.case_payload(record)
        payload["retrained"] = retrained
        return payload

    def retrain(self) -> dict:
        with self.lock:
            return self._retrain_locked()

    def _retrain_locked(self) -> dict:
        view = self.store.training_view()
        if not view:
            raise HTTPException(409, detail="history store has no labeled examples yet")
        try:
            new_forest = train_diagnosis_forest(view, n_trees=self.forest.n_trees,
                                                seed=self.forest.seed)
        except TrainingError as e:
            raise HTTPException(409, detail=str(e))
        tmp = self.forest_path + ".tmp"
        save_forest(new_forest, tmp)
        os.replace(tmp, self.forest_path)  # atomic swap on disk
        self.forest = new_forest
        self._labels_since_retrain = 0
        return {
            "trained": True,
            "n_examples": len(view),
            "n_trees": new_forest.n_trees,
            "forest_hash": forest_hash(new_forest),
        }


def build_app(run_dir: str, history_path: str, forest_path: str,
              config_dir: str | None = None, auto_retrain_every: int = 50) -> FastAPI:
    state = ServiceState(run_dir, history_path, forest_path,
                         auto_retrain_every=auto_retrain_every)
    app = FastAPI(title="channelqc operator service")
    # The dashboard is served separately from the API (static files), so the
    # browser needs CORS headers.  Single-user local tool: allow everything.
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    app.state.qc = state

    @app.get("/api/faults")
    def get_faults():
        return state.fault_rows()

    @app.get("/api/channels/{channel_id}")
    def get_channel(channel_id: int):
        try:
            return state.channel_payload(channel_id)
        except KeyError:
            raise HTTPException(404, detail=f"unknown channel {channel_id}")

    @app.get("/api/map")
    def get_map():
        return state.map_payload()

    @app.get("/api/cases")
    def get_cases():
        return [state.case_payload(r) for r in state.store.cases()
                if r.origin == "operator"]

    @app.post("/api/cases/{case_id}/verdict")
    def post_verdict(case_id: int, request: VerdictRequest):
        return state.apply_verdict(case_id, request)

    @app.post("/api/retrain")
    def post_retrain():
        return state.retrain()

    return app

import json

import pytest

from channelqc.diagnosis import DiagnosisClass, FeatureVector, SEVERITY_NONE
from channelqc.history import (
    CorruptStoreError,
    HistoryStore,
    Verdict,
    VerdictError,
)


def fv(drift=0.0):
    return FeatureVector(drift, 1.0, 1.0, 1.0, 0.0, 1.0, 256.0, 1600.0, 14.0)


def new_case(store, channel=1, cls=DiagnosisClass.INCREASE_BIAS, severity=3, ts=100):
    return store.record_case(
        channel=channel, features=fv(), proposed_class=cls, proposed_severity=severity,
        proposed_probability=0.9, explanation="something is off", timestamp=ts)


class TestRecordCase:
    def test_first_case_id_is_one(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        assert new_case(store) == 1

    def test_ids_are_sequential(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        assert new_case(store) == 1
        assert new_case(store, channel=2) == 2

    def test_nonfinite_features_rejected(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        bad = FeatureVector(float("nan"), 1, 1, 1, 0, 1, 256, 1600, 14)
        with pytest.raises(Exception, match="finite"):
            store.record_case(channel=1, features=bad,
                              proposed_class=DiagnosisClass.HEALTHY,
                              proposed_severity=SEVERITY_NONE,
                              proposed_probability=1.0, explanation="", timestamp=0)

    def test_reload_after_many_appends(self, tmp_path):
        path = tmp_path / "h.jsonl"
        store = HistoryStore(path)
        for i in range(1000):
            store.record_case(channel=i, features=fv(drift=i / 1000.0),
                              proposed_class=DiagnosisClass.DECREASE_BIAS,
                              proposed_severity=(i % 5) + 1,
                              proposed_probability=0.5 + (i % 100) / 250.0,
                              explanation=f"case {i}", timestamp=i)
        reloaded = HistoryStore(path)
        assert len(reloaded) == 1000
        assert reloaded.cases() == store.cases()


class TestCrashTolerance:
    def test_partial_trailing_line_dropped(self, tmp_path):
        path = tmp_path / "h.jsonl"
        store = HistoryStore(path)
        new_case(store)
        new_case(store, channel=2)
        with open(path, "a") as fh:
            fh.write('{"type": "case", "case_id": 3, "chan')  # crash mid-append
        reloaded = HistoryStore(path)
        assert len(reloaded) == 2

    def test_corrupt_interior_line_named(self, tmp_path):
        path = tmp_path / "h.jsonl"
        store = HistoryStore(path)
        new_case(store)
        lines = path.read_text().splitlines()
        lines.insert(1, "this is not json")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptStoreError, match=r"h\.jsonl:2"):
            HistoryStore(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "h.jsonl"
        path.write_text('{"schema": 99}\n')
        with pytest.raises(CorruptStoreError, match="schema"):
            HistoryStore(path)

    def test_amendment_for_unknown_case_rejected(self, tmp_path):
        path = tmp_path / "h.jsonl"
        HistoryStore(path)
        with open(path, "a") as fh:
            fh.write(json.dumps({"type": "verdict", "case_id": 9, "verdict": "CONFIRMED",
                                 "corrected": None, "ts": 0}) + "\n")
        with pytest.raises(CorruptStoreError, match="unknown case"):
            HistoryStore(path)


class TestVerdicts:
    def test_confirm_sets_training_label(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        cid = new_case(store)
        record = store.apply_verdict(cid, Verdict.CONFIRMED, timestamp=5)
        assert record.verdict is Verdict.CONFIRMED
        assert record.training_label() == (DiagnosisClass.INCREASE_BIAS, 3)

    def test_infirm_replaces_label(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        cid = new_case(store)
        record = store.apply_verdict(cid, Verdict.INFIRMED,
                                     (DiagnosisClass.DECREASE_BIAS, 2), timestamp=5)
        assert record.training_label() == (DiagnosisClass.DECREASE_BIAS, 2)

    def test_infirm_without_correction_rejected(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        cid = new_case(store)
        with pytest.raises(VerdictError):
            store.apply_verdict(cid, Verdict.INFIRMED)
        assert store.get(cid).verdict is Verdict.UNREVIEWED

    def test_unknown_case(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        with pytest.raises(KeyError):
            store.apply_verdict(42, Verdict.CONFIRMED)

    def test_amendments_survive_reload_last_wins(self, tmp_path):
        path = tmp_path / "h.jsonl"
        store = HistoryStore(path)
        cid = new_case(store)
        store.apply_verdict(cid, Verdict.CONFIRMED, timestamp=5)
        store.apply_verdict(cid, Verdict.INFIRMED,
                            (DiagnosisClass.INCREASE_NOISE_THRESHOLD, 1), timestamp=6)
        reloaded = HistoryStore(path)
        record = reloaded.get(cid)
        assert record.verdict is Verdict.INFIRMED
        assert record.training_label() == (DiagnosisClass.INCREASE_NOISE_THRESHOLD, 1)

    def test_original_case_line_never_rewritten(self, tmp_path):
        path = tmp_path / "h.jsonl"
        store = HistoryStore(path)
        cid = new_case(store)
        first_lines = path.read_text().splitlines()
        store.apply_verdict(cid, Verdict.CONFIRMED, timestamp=9)
        after_lines = path.read_text().splitlines()
        assert after_lines[:len(first_lines)] == first_lines
        assert len(after_lines) == len(first_lines) + 1

    def test_idempotent_repeat_appends_nothing(self, tmp_path):
        path = tmp_path / "h.jsonl"
        store = HistoryStore(path)
        cid = new_case(store)
        store.apply_verdict(cid, Verdict.CONFIRMED, timestamp=5)
        size = path.stat().st_size
        store.apply_verdict(cid, Verdict.CONFIRMED, timestamp=6)
        assert path.stat().st_size == size


class TestTrainingView:
    def test_empty_store_empty_view(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        assert store.training_view() == []

    def test_unreviewed_excluded(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        ids = [new_case(store, channel=i) for i in range(10)]
        for cid in ids[:4]:
            store.apply_verdict(cid, Verdict.CONFIRMED, timestamp=1)
        assert len(store.training_view()) == 4

    def test_view_contains_corrected_label(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        cid = new_case(store)
        store.apply_verdict(cid, Verdict.INFIRMED, (DiagnosisClass.DECREASE_BIAS, 2),
                            timestamp=1)
        view = store.training_view()
        assert view == [(fv(), DiagnosisClass.DECREASE_BIAS, 2)]

    def test_bootstrap_examples_count_as_labeled(self, tmp_path):
        store = HistoryStore(tmp_path / "h.jsonl")
        store.add_bootstrap_example(fv(), DiagnosisClass.HEALTHY, SEVERITY_NONE,
                                    timestamp=0)
        store.add_bootstrap_example(fv(drift=-0.8), DiagnosisClass.INCREASE_BIAS, 5,
                                    timestamp=0)
        assert len(store.training_view()) == 2
        assert store.labeled_count() == 2

    def test_class_coverage_only_grows(self, tmp_path):
        # verdicts on operator cases never remove bootstrap label coverage
        store = HistoryStore(tmp_path / "h.jsonl")
        store.add_bootstrap_example(fv(), DiagnosisClass.HEALTHY, SEVERITY_NONE, 0)
        store.add_bootstrap_example(fv(drift=-0.8), DiagnosisClass.INCREASE_BIAS, 5, 0)
        baseline_classes = {cls for _, cls, _ in store.training_view()}
        cid = new_case(store)
        store.apply_verdict(cid, Verdict.INFIRMED,
                            (DiagnosisClass.DECREASE_NOISE_THRESHOLD, 1), timestamp=2)
        grown_classes = {cls for _, cls, _ in store.training_view()}
        assert baseline_classes <= grown_classes

"""Classification test statistics for fault detection and diagnosis runs.

Sensitivity, specificity and balanced accuracy follow the usual confusion
table definitions.  Confidence intervals default to the Wald normal
approximation (Wilson available behind a flag).  Spearman correlation is
Pearson on average ranks with a two-sided t-approximation p-value; an exact
permutation p-value is available for tiny samples.  Boxplot statistics use
linear interpolation between closest ranks and, deliberately, flag outliers
farther than 1.5 IQR from the *median* (the quartile-based convention is an
option).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .diagnosis import DiagnosisClass, expected_action, truth_severity
from .scanner import MAJOR, FaultType, LabelRow


class UndefinedMetricError(ValueError):
    """Metric whose denominator is empty."""


class MetricInputError(ValueError):
    """Inconsistent metric inputs."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise MetricInputError(f"{name} must be non-negative")

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp


def sensitivity(c: ConfusionCounts) -> float:
    if c.positives == 0:
        raise UndefinedMetricError("sensitivity is undefined without positive conditions")
    return c.tp / c.positives


def specificity(c: ConfusionCounts) -> float:
    if c.negatives == 0:
        raise UndefinedMetricError("specificity is undefined without negative conditions")
    return c.tn / c.negatives


def balanced_accuracy(sens: float, spec: float) -> float:
    if not (0.0 <= sens <= 1.0 and 0.0 <= spec <= 1.0):
        raise MetricInputError(f"rates must be in [0, 1]: {sens}, {spec}")
    return (sens + spec) / 2.0


def wald_ci(p_hat: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation interval, clamped to [0, 1].

    Degenerates to a zero-width interval at p_hat in {0, 1}.
    """
    if n < 1:
        raise MetricInputError(f"sample size must be >= 1, got {n}")
    if not 0.0 <= p_hat <= 1.0:
        raise MetricInputError(f"proportion must be in [0, 1], got {p_hat}")
    z = float(_scipy_stats.norm.ppf(0.5 + level / 2.0))
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n)
    return max(p_hat - half, 0.0), min(p_hat + half, 1.0)


def wilson_ci(p_hat: float, n: int, level: float = 0.95) -> tuple[float, float]:
    if n < 1:
        raise MetricInputError(f"sample size must be >= 1, got {n}")
    z = float(_scipy_stats.norm.ppf(0.5 + level / 2.0))
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


# ---------------------------------------------------------------------------
# Spearman rank correlation

@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    order = np.argsort(a, kind="stable")
    ranks = np.empty(len(a), dtype=float)
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
            j += 1
        # 1-based ranks; ties share the average rank of their block.
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    if len(xs) != len(ys):
        raise MetricInputError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 3:
        raise MetricInputError(f"need at least 3 pairs, got {n}")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    cx = rx - rx.mean()
    cy = ry - ry.mean()
    vx = float(cx @ cx)
    vy = float(cy @ cy)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedMetricError("rank correlation is undefined for constant input")
    rho = float(cx @ cy) / math.sqrt(vx * vy)
    rho = max(min(rho, 1.0), -1.0)
    if 1.0 - rho * rho <= 0.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = 2.0 * float(_scipy_stats.t.sf(abs(t), df=n - 2))
    return CorrelationResult(rho=rho, p_value=min(p, 1.0), n=n)


def spearman_exact_pvalue(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Two-sided permutation p-value of rho; exact, so n is capped at 10."""
    n = len(xs)
    if n > 10:
        raise MetricInputError(f"exact permutation p-value is limited to n <= 10, got {n}")
    observed = abs(spearman(xs, ys).rho)
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    cx = rx - rx.mean()
    denom = math.sqrt(float(cx @ cx) * float((ry - ry.mean()) @ (ry - ry.mean())))
    count = 0
    total = 0
    for perm in itertools.permutations(range(n)):
        cy = ry[list(perm)] - ry.mean()
        rho = float(cx @ cy) / denom
        if abs(rho) >= observed - 1e-12:
            count += 1
        total += 1
    return count / total


# ---------------------------------------------------------------------------
# Boxplot statistics

@dataclass(frozen=True)
class BoxplotStats:
    q1: float
    median: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]
    n: int


def _quantile(sorted_values: np.ndarray, p: float) -> float:
    """Linear interpolation between closest ranks: h = (n - 1) p + 1."""
    n = len(sorted_values)
    if n == 1:
        return float(sorted_values[0])
    h = (n - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    frac = h - lo
    return float(sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac)


def boxplot_stats(values: Sequence[float], outlier_rule: str = "median") -> BoxplotStats:
    if len(values) == 0:
        raise MetricInputError("boxplot statistics need at least one value")
    a = np.sort(np.asarray(values, dtype=float))
    q1 = _quantile(a, 0.25)
    med = _quantile(a, 0.50)
    q3 = _quantile(a, 0.75)
    iqr = q3 - q1
    if outlier_rule == "median":
        is_outlier = np.abs(a - med) > 1.5 * iqr
    elif outlier_rule == "quartile":
        is_outlier = (a < q1 - 1.5 * iqr) | (a > q3 + 1.5 * iqr)
    else:
        raise MetricInputError(f"unknown outlier rule {outlier_rule!r}")
    inliers = a[~is_outlier]
    return BoxplotStats(
        q1=q1, median=med, q3=q3, iqr=iqr,
        whisker_low=float(inliers.min()),
        whisker_high=float(inliers.max()),
        outliers=tuple(float(v) for v in a[is_outlier]),
        n=len(a),
    )


# ---------------------------------------------------------------------------
# FDD tables over a campaign

@dataclass(frozen=True)
class DetectionOutcome:
    """What the pipeline said about one channel, as needed for scoring."""

    detected: bool
    action: DiagnosisClass
    severity: int


@dataclass(frozen=True)
class SensitivityRow:
    fault_type: str
    direction: str  # "increase", "decrease" or "both"
    level: int | str
    n: int
    correct: int
    sensitivity: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class SeverityRow:
    fault_type: str
    direction: str
    level: int | str
    n_correct_diagnoses: int
    n_exact_severity: int
    sensitivity: float
    ci_low: float
    ci_high: float


def _is_correct(outcome: DetectionOutcome, truth: LabelRow) -> bool:
    return outcome.detected and outcome.action is expected_action(truth.fault_type,
                                                                  truth.direction)


def global_confusion(outcomes: Mapping[int, DetectionOutcome],
                     truth: Mapping[int, LabelRow]) -> ConfusionCounts:
    missing = sorted(set(truth) - set(outcomes))
    if missing:
        raise MetricInputError(
            f"no diagnosis for {len(missing)} labeled channels, e.g. {missing[:5]}")
    tp = fp = tn = fn = 0
    for channel, outcome in outcomes.items():
        if channel in truth:
            if _is_correct(outcome, truth[channel]):
                tp += 1
            else:
                fn += 1
        else:
            if outcome.detected:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _level_sort_key(level: int | str):
    return (1, 0) if level == MAJOR else (0, int(level))


def fdd_sensitivity_per_level(outcomes: Mapping[int, DetectionOutcome],
                              truth: Mapping[int, LabelRow],
                              ci_level: float = 0.95) -> list[SensitivityRow]:
    """Correct-diagnosis rate per (fault type, direction, level), plus pooled
    rows with direction="both"."""
    groups: dict[tuple[str, str, int | str], list[bool]] = {}
    for channel, label in truth.items():
        if channel not in outcomes:
            raise MetricInputError(f"no diagnosis for labeled channel {channel}")
        ok = _is_correct(outcomes[channel], label)
        groups.setdefault((label.fault_type.value, label.direction, label.level),
                          []).append(ok)
        groups.setdefault((label.fault_type.value, "both", label.level), []).append(ok)
    rows = []
    for (ftype, direction, level), hits in sorted(
            groups.items(), key=lambda kv: (kv[0][0], kv[0][1], _level_sort_key(kv[0][2]))):
        n = len(hits)
        rate = sum(hits) / n
        lo, hi = wald_ci(rate, n, ci_level)
        rows.append(SensitivityRow(ftype, direction, level, n, sum(hits), rate, lo, hi))
    return rows


def severity_sensitivity(outcomes: Mapping[int, DetectionOutcome],
                         truth: Mapping[int, LabelRow],
                         ci_level: float = 0.95) -> list[SeverityRow]:
    """Exact-severity rate among correctly diagnosed faults only.

    Conditioning on correct diagnoses makes small denominators (and wide
    intervals) normal at low severities; empty rows are omitted with a warning.
    MAJOR faults have no 1..5 severity of their own and are excluded.
    """
    groups: dict[tuple[str, str, int | str], list[bool]] = {}
    for channel, label in truth.items():
        if label.level == MAJOR:
            continue
        if channel not in outcomes:
            raise MetricInputError(f"no diagnosis for labeled channel {channel}")
        # Seed every injected group so an all-miss group shows up as empty.
        groups.setdefault((label.fault_type.value, label.direction, label.level), [])
        groups.setdefault((label.fault_type.value, "both", label.level), [])
        outcome = outcomes[channel]
        if not _is_correct(outcome, label):
            continue
        exact = outcome.severity == truth_severity(label.level)
        groups[(label.fault_type.value, label.direction, label.level)].append(exact)
        groups[(label.fault_type.value, "both", label.level)].append(exact)
    rows = []
    for (ftype, direction, level), hits in sorted(
            groups.items(), key=lambda kv: (kv[0][0], kv[0][1], _level_sort_key(kv[0][2]))):
        n = len(hits)
        if n == 0:
            warnings.warn(f"no correct diagnoses for {ftype}/{direction}/level {level}; "
                          f"row omitted")
            continue
        rate = sum(hits) / n
        lo, hi = wald_ci(rate, n, ci_level)
        rows.append(SeverityRow(ftype, direction, level, n, sum(hits), rate, lo, hi))
    return rows


# ---------------------------------------------------------------------------
# Whole-campaign evaluation report

@dataclass(frozen=True)
class EvaluationReport:
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return self.data


def build_evaluation_report(outcomes: Mapping[int, DetectionOutcome],
                            truth: Mapping[int, LabelRow],
                            priorities: Mapping[int, float] | None = None,
                            manifest_hash: str | None = None,
                            campaign_seed: int | None = None,
                            ci_level: float = 0.95) -> EvaluationReport:
    confusion = global_confusion(outcomes, truth)
    global_section: dict = {
        "n_channels": len(outcomes),
        "n_faulted": confusion.positives,
        "confusion": {"tp": confusion.tp, "fp": confusion.fp,
                      "tn": confusion.tn, "fn": confusion.fn},
    }
    sens = spec = None
    if confusion.positives > 0:
        sens = sensitivity(confusion)
        lo, hi = wald_ci(sens, confusion.positives, ci_level)
        global_section["sensitivity"] = sens
        global_section["sensitivity_ci"] = [lo, hi]
    else:
        global_section["sensitivity"] = None
        global_section["note"] = "sensitivity undefined: campaign injected no faults"
    if confusion.negatives > 0:
        spec = specificity(confusion)
        lo, hi = wald_ci(spec, confusion.negatives, ci_level)
        global_section["specificity"] = spec
        global_section["specificity_ci"] = [lo, hi]
    else:
        global_section["specificity"] = None
    if sens is not None and spec is not None:
        global_section["balanced_accuracy"] = balanced_accuracy(sens, spec)

    per_level = [row.__dict__ for row in fdd_sensitivity_per_level(outcomes, truth,
                                                                   ci_level)]
    severity = [row.__dict__ for row in severity_sensitivity(outcomes, truth, ci_level)]

    correlation: dict = {}
    boxplots: list[dict] = []
    if priorities is not None:
        for ftype in (FaultType.BIAS_SHIFT, FaultType.NOISE_THRESHOLD_SHIFT):
            pairs = [(truth_severity(label.level), priorities[c])
                     for c, label in truth.items()
                     if label.fault_type is ftype and label.level != MAJOR
                     and c in priorities]
            if len(pairs) >= 3:
                try:
                    result = spearman([p[0] for p in pairs], [p[1] for p in pairs])
                    correlation[ftype.value] = {
                        "rho": result.rho, "p_value": result.p_value, "n": result.n}
                except UndefinedMetricError as e:
                    correlation[ftype.value] = {"error": str(e)}
            levels = sorted({label.level for label in truth.values()
                             if label.fault_type is ftype and label.level != MAJOR})
            for level in levels:
                values = [priorities[c] for c, label in truth.items()
                          if label.fault_type is ftype and label.level == level
                          and c in priorities]
                if values:
                    boxplots.append({"fault_type": ftype.value, "level": level,
                                     **boxplot_stats(values).__dict__})
        reference = [priorities[c] for c in priorities if c not in truth]
        if reference:
            boxplots.append({"fault_type": "Ref", "level": 0,
                             **boxplot_stats(reference).__dict__})

    data = {
        "schema": 1,
        "manifest_hash": manifest_hash,
        "campaign_seed": campaign_seed,
        "global": global_section,
        "per_level": per_level,
        "severity": severity,
        "priority_correlation": correlation,
        "boxplots": boxplots,
    }
    return EvaluationReport(data)

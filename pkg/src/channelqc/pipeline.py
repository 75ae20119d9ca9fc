"""End-to-end wiring: simulate, bootstrap-train, run the FDD chain, evaluate.

This is the glue the CLI and service sit on.  The flow mirrors the deployed
loop: a seeded fault campaign produces labeled training data, the forest is
bootstrapped from it, and later runs extract features, diagnose every channel,
detect faults by posterior threshold, and rank them by fuzzy priority.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from . import scanner as sc
from .dbscan import CylinderGeometry
from .diagnosis import (
    Diagnosis,
    DiagnosisClass,
    FeatureVector,
    SEVERITY_NONE,
    build_feature_vector,
    diagnose_all,
    truth_severity,
    expected_action,
    train_diagnosis_forest,
)
from .features import (
    HealthWeights,
    ReferenceBaseline,
    extract_all,
    reference_baseline,
)
from .forest import Forest
from .fuzzy import FuzzyConfig
from .metrics import DetectionOutcome
from .priority import DbscanParams, RankedFault, priorities_for_all, rank_faults
from .rules import RuleSet


@dataclass(frozen=True)
class SimulatedCampaign:
    model: sc.ScannerModel
    observables: dict[int, sc.ChannelObservables]
    plan: sc.CampaignPlan


def simulate_campaign(n_channels: int, rings: int, seed: int,
                      plan: sc.CampaignPlan) -> SimulatedCampaign:
    """Build a scanner, inject the planned faults, measure observables."""
    model = sc.build_scanner(n_channels, rings, seed)
    assignments = sc.plan_campaign(plan, model)
    model = sc.apply_campaign(model, assignments)
    observables = sc.simulate_observables(model, seed)
    return SimulatedCampaign(model=model, observables=observables, plan=plan)


def campaign_features(campaign: SimulatedCampaign,
                      weights: HealthWeights = HealthWeights(),
                      ) -> dict[int, FeatureVector]:
    baseline = reference_baseline(campaign.model)
    params, indicators = extract_all(campaign.observables, baseline, weights)
    return {
        c: build_feature_vector(campaign.observables[c], params[c], indicators[c])
        for c in sorted(campaign.observables)
    }


def campaign_training_examples(campaign: SimulatedCampaign,
                               ) -> list[tuple[FeatureVector, DiagnosisClass, int]]:
    """Ground-truth labeled examples: the bootstrap training material."""
    features = campaign_features(campaign)
    examples = []
    for channel in sorted(features):
        truth = campaign.model.faults.get(channel)
        if truth is None:
            examples.append((features[channel], DiagnosisClass.HEALTHY, SEVERITY_NONE))
        else:
            examples.append((features[channel],
                             expected_action(truth.fault_type, truth.direction),
                             truth_severity(truth.level)))
    return examples


DEFAULT_TRAINING_PLAN = sc.CampaignPlan(
    seed=0, major_fault_count=200, per_level_per_type_count=60)


def bootstrap_forest(n_channels: int, rings: int, seed: int,
                     plan: sc.CampaignPlan | None = None, n_trees: int = 100,
                     forest_seed: int | None = None,
                     ) -> tuple[Forest, list[tuple[FeatureVector, DiagnosisClass, int]]]:
    """Train the initial forest from a seeded simulated campaign."""
    if plan is None:
        plan = sc.CampaignPlan(seed=seed,
                               major_fault_count=DEFAULT_TRAINING_PLAN.major_fault_count,
                               per_level_per_type_count=(
                                   DEFAULT_TRAINING_PLAN.per_level_per_type_count))
    campaign = simulate_campaign(n_channels, rings, seed, plan)
    examples = campaign_training_examples(campaign)
    forest = train_diagnosis_forest(
        examples, n_trees=n_trees, seed=seed if forest_seed is None else forest_seed)
    return forest, examples


@dataclass(frozen=True)
class RunResult:
    features: dict[int, FeatureVector]
    diagnoses: dict[int, Diagnosis]
    detected: list[int]
    ranking: list[RankedFault]
    priorities: dict[int, RankedFault]

    def outcomes(self) -> dict[int, DetectionOutcome]:
        detected = set(self.detected)
        return {
            c: DetectionOutcome(detected=c in detected,
                                action=d.diagnosis_class,
                                severity=d.severity)
            for c, d in self.diagnoses.items()
        }

    def priority_values(self) -> dict[int, float]:
        return {c: r.priority for c, r in self.priorities.items()}


def run_fdd(features: Mapping[int, FeatureVector], geometry: CylinderGeometry,
            forest: Forest, ruleset: RuleSet, fuzzy_cfg: FuzzyConfig,
            threshold: float = 0.70,
            dbscan_params: DbscanParams = DbscanParams()) -> RunResult:
    """Diagnose every channel, then prioritize.

    All channels get a priority (isolated ones count as clusters of one); the
    ranking covers the detected fault list only.
    """
    detected, diagnoses = diagnose_all(features, forest, ruleset, threshold)
    healths = {c: fv.health for c, fv in features.items()}
    ranking = rank_faults([(c, healths[c]) for c in detected], geometry, fuzzy_cfg,
                          dbscan_params)
    priorities = priorities_for_all(healths, detected, geometry, fuzzy_cfg, dbscan_params)
    return RunResult(features=dict(features), diagnoses=diagnoses, detected=detected,
                     ranking=ranking, priorities=priorities)


def run_campaign(campaign: SimulatedCampaign, forest: Forest, ruleset: RuleSet,
                 fuzzy_cfg: FuzzyConfig, threshold: float = 0.70,
                 weights: HealthWeights = HealthWeights(),
                 dbscan_params: DbscanParams = DbscanParams()) -> RunResult:
    features = campaign_features(campaign, weights)
    geometry = CylinderGeometry.from_model(campaign.model)
    return run_fdd(features, geometry, forest, ruleset, fuzzy_cfg, threshold,
                   dbscan_params)


def campaign_truth(campaign: SimulatedCampaign) -> dict[int, sc.LabelRow]:
    return {
        c: sc.LabelRow(truth.fault_type, truth.direction, truth.level)
        for c, truth in campaign.model.faults.items()
    }

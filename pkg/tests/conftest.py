import pytest

from channelqc import scanner as sc
from channelqc.diagnosis import FEATURE_NAMES
from channelqc.fuzzy import default_fuzzy_config
from channelqc.pipeline import bootstrap_forest
from channelqc.rules import DEFAULT_RULES_TEXT, parse_rules


@pytest.fixture(scope="session")
def fuzzy_cfg():
    return default_fuzzy_config()


@pytest.fixture(scope="session")
def ruleset():
    return parse_rules(DEFAULT_RULES_TEXT, FEATURE_NAMES)


@pytest.fixture(scope="session")
def small_forest():
    """Forest trained on a small seeded campaign; enough for unit tests."""
    forest, _ = bootstrap_forest(
        512, 8, seed=11,
        plan=sc.CampaignPlan(seed=11, major_fault_count=40, per_level_per_type_count=10),
        n_trees=30)
    return forest

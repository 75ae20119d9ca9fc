"""Forward-chaining rule engine that explains channel diagnoses.

Rules are restricted conjunctions over the channel facts (the feature vector
fields plus facts derived by other rules).  Firing a rule either asserts an
intermediate fact or concludes a corrective action; every fired rule renders a
human-readable sentence, and each conclusion carries the sentences of its
whole derivation so operators can see why.

Rule file grammar, one rule per line:

    RULE <id>: IF <atom> AND <atom> ... THEN <fact|ACTION> EXPLAIN "<template>"

Atoms are either `<name> <op> <number>` with op one of < <= > >= == !=, or
`<name> IS <true|false>`.  Templates may reference fact names in {braces}.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Mapping

ACTION_NAMES = (
    "INCREASE_BIAS",
    "DECREASE_BIAS",
    "INCREASE_NOISE_THRESHOLD",
    "DECREASE_NOISE_THRESHOLD",
)

_COMPARATORS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


class RuleConfigError(ValueError):
    """Rule file that cannot be loaded."""


class InferenceError(RuntimeError):
    """Inference failure at runtime."""


@dataclass(frozen=True)
class Atom:
    name: str
    op: str  # comparator symbol, or "IS"
    value: float | bool

    def holds(self, facts: Mapping[str, float | bool]) -> bool:
        if self.name not in facts:
            return False
        actual = facts[self.name]
        if self.op == "IS":
            return bool(actual) is self.value
        return _COMPARATORS[self.op](float(actual), float(self.value))

    def describe(self) -> str:
        if self.op == "IS":
            return f"{self.name} IS {'true' if self.value else 'false'}"
        return f"{self.name} {self.op} {self.value:g}"


@dataclass(frozen=True)
class Rule:
    rule_id: str
    conditions: tuple[Atom, ...]
    conclusion: str  # fact name or one of ACTION_NAMES
    explanation_template: str

    @property
    def concludes_action(self) -> bool:
        return self.conclusion in ACTION_NAMES

    def render(self, facts: Mapping[str, float | bool]) -> str:
        return self.explanation_template.format_map(_RenderMap(facts))


class _RenderMap(dict):
    def __init__(self, facts: Mapping[str, float | bool]):
        super().__init__(facts)

    def __missing__(self, key):
        raise InferenceError(f"explanation template references unknown fact {key!r}")


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    base_facts: tuple[str, ...]

    def by_id(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)


@dataclass(frozen=True)
class FiredRule:
    rule_id: str
    conclusion: str
    sentence: str


@dataclass(frozen=True)
class Conclusion:
    action: str
    rule_id: str
    sentences: tuple[str, ...]  # own sentence first, then supporting facts
    fired_ids: tuple[str, ...]


@dataclass(frozen=True)
class InferenceResult:
    conclusions: tuple[Conclusion, ...]
    fired: tuple[FiredRule, ...]

    @property
    def concluded_actions(self) -> tuple[str, ...]:
        return tuple(c.action for c in self.conclusions)


_RULE_RE = re.compile(
    r"^RULE\s+(?P<id>[A-Za-z_][\w-]*)\s*:\s*IF\s+(?P<conds>.+?)\s+THEN\s+"
    r"(?P<conclusion>[A-Za-z_]\w*)\s+EXPLAIN\s+\"(?P<template>.*)\"\s*$"
)
_ATOM_RE = re.compile(
    r"^(?P<name>[A-Za-z_]\w*)\s+(?P<op>IS|<=|>=|==|!=|<|>)\s+(?P<value>\S+)$"
)


def parse_rules(text: str, base_facts: tuple[str, ...], source: str = "<rules>") -> RuleSet:
    rules: list[Rule] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        m = _RULE_RE.match(line)
        if not m:
            raise RuleConfigError(f"{where}: does not match the RULE grammar")
        atoms = []
        for part in re.split(r"\s+AND\s+", m.group("conds")):
            am = _ATOM_RE.match(part.strip())
            if not am:
                raise RuleConfigError(f"{where}: malformed condition {part.strip()!r}")
            name, op, value = am.group("name"), am.group("op"), am.group("value")
            if op == "IS":
                if value not in ("true", "false"):
                    raise RuleConfigError(
                        f"{where}: IS conditions take true or false, got {value!r}")
                atoms.append(Atom(name, op, value == "true"))
            else:
                try:
                    atoms.append(Atom(name, op, float(value)))
                except ValueError:
                    raise RuleConfigError(f"{where}: bad numeric constant {value!r}")
        if not atoms:
            raise RuleConfigError(f"{where}: rule has no conditions")
        rules.append(Rule(m.group("id"), tuple(atoms), m.group("conclusion"),
                          m.group("template")))
    ruleset = RuleSet(tuple(rules), tuple(base_facts))
    validate_rules(ruleset, source)
    return ruleset


def load_rules(path, base_facts: tuple[str, ...]) -> RuleSet:
    with open(path) as fh:
        return parse_rules(fh.read(), base_facts, source=str(path))


def validate_rules(ruleset: RuleSet, source: str = "<rules>") -> None:
    ids = [r.rule_id for r in ruleset.rules]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        raise RuleConfigError(f"{source}: duplicate rule ids {sorted(dupes)}")

    derived = {r.conclusion for r in ruleset.rules if not r.concludes_action}
    known = set(ruleset.base_facts) | derived
    formatter = string.Formatter()
    for rule in ruleset.rules:
        for atom in rule.conditions:
            if atom.name not in known:
                raise RuleConfigError(
                    f"{source}: rule {rule.rule_id} tests unknown fact {atom.name!r}")
        for _, name, _, _ in formatter.parse(rule.explanation_template):
            if name and name.split(".")[0].split("[")[0] not in known:
                raise RuleConfigError(
                    f"{source}: rule {rule.rule_id} template references unknown fact "
                    f"{name!r}")

    # Every derived fact must be reachable from the base facts; anything left
    # over sits on a dependency cycle (or depends on one).
    reachable = set(ruleset.base_facts)
    changed = True
    while changed:
        changed = False
        for rule in ruleset.rules:
            if rule.concludes_action or rule.conclusion in reachable:
                continue
            if all(a.name in reachable for a in rule.conditions):
                reachable.add(rule.conclusion)
                changed = True
    stuck = derived - reachable
    if stuck:
        raise RuleConfigError(
            f"{source}: facts {sorted(stuck)} can never be derived; their rules form a "
            f"dependency cycle with no base-fact entry")


def infer_rules(ruleset: RuleSet, facts: Mapping[str, float | bool]) -> InferenceResult:
    """Forward-chain to fixpoint; no rule fires twice."""
    working = dict(facts)
    fired: list[FiredRule] = []
    fired_ids: set[str] = set()
    producer: dict[str, str] = {}  # derived fact -> rule id that set it

    progressed = True
    while progressed:
        progressed = False
        for rule in ruleset.rules:
            if rule.rule_id in fired_ids:
                continue
            if all(atom.holds(working) for atom in rule.conditions):
                sentence = rule.render(working)
                fired.append(FiredRule(rule.rule_id, rule.conclusion, sentence))
                fired_ids.add(rule.rule_id)
                if not rule.concludes_action:
                    if rule.conclusion not in producer:
                        producer[rule.conclusion] = rule.rule_id
                    working[rule.conclusion] = True
                progressed = True

    sentence_of = {f.rule_id: f.sentence for f in fired}

    def closure(rule_id: str, seen: set[str]) -> list[str]:
        if rule_id in seen:
            return []
        seen.add(rule_id)
        ids = [rule_id]
        rule = ruleset.by_id(rule_id)
        for atom in rule.conditions:
            prod = producer.get(atom.name)
            if prod is not None:
                ids.extend(closure(prod, seen))
        return ids

    conclusions = []
    for f in fired:
        if f.conclusion in ACTION_NAMES:
            ids = closure(f.rule_id, set())
            conclusions.append(Conclusion(
                action=f.conclusion,
                rule_id=f.rule_id,
                sentences=tuple(sentence_of[i] for i in ids),
                fired_ids=tuple(ids),
            ))
    return InferenceResult(tuple(conclusions), tuple(fired))


DEFAULT_RULES_TEXT = """\
# Channel diagnosis rules, written the way scanner operators reason.
# Facts available: drift, strength, ident_pass, energy_pass, saturated,
# health, photopeak_adc, count_rate, energy_res_pct.

RULE drift_low: IF drift <= -0.3 THEN low_gain EXPLAIN "channel photopeak drift is high (drift {drift:.2f})"
RULE drift_high: IF drift >= 0.3 THEN high_gain EXPLAIN "channel photopeak has drifted upward (drift {drift:+.2f})"
RULE weak_channel: IF strength <= 0.3 AND ident_pass IS false AND energy_pass IS false THEN weak EXPLAIN "channel is weak (strength is low, identification is failed, energy is failed)"
RULE calibration_problem: IF weak IS true AND low_gain IS true AND saturated IS false THEN INCREASE_BIAS EXPLAIN "Channel has a calibration problem, channel is not saturated and polarization increase is safe"
RULE gain_too_high: IF high_gain IS true AND saturated IS false THEN DECREASE_BIAS EXPLAIN "channel gain is too high, lowering the polarization restores the photopeak position"
RULE flooded: IF saturated IS true THEN INCREASE_NOISE_THRESHOLD EXPLAIN "channel is flooded with noise counts (count rate saturated), raising the noise threshold is safe"
RULE quiet_channel: IF strength <= 0.88 AND drift > -0.1 AND drift < 0.1 AND ident_pass IS true AND saturated IS false THEN DECREASE_NOISE_THRESHOLD EXPLAIN "channel count rate is low while the photopeak is nominal, the noise threshold is likely set too high"
"""

"""Mamdani fuzzy inference for the channel fault priority indicator.

Inputs are the channel health score and the size of the failed-channel cluster
the channel sits in; the output is a priority in [0, 1].  Inference uses min
for- AND, max aggregation and exact centroid defuzzification over the
piecewise-linear aggregate (no sampling grid, so results are reproducible to
machine precision).

The rule base and membership knots live in a small text config; see
DEFAULT_CONFIG_TEXT for the shipped one.  A huge cluster saturates at 45
channels, the point where grouped failures start to visibly damage
reconstructed images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence


class FuzzyConfigError(ValueError):
    """Invalid priority inference configuration."""


class FuzzyInferenceError(RuntimeError):
    """No rule produced output mass for an input (config coverage hole)."""


@dataclass(frozen=True)
class Trapezoid:
    """Trapezoidal membership; triangles have b == c, shoulders use inf knots."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise FuzzyConfigError(f"trapezoid knots must be ordered: {self}")

    def membership(self, x: float) -> float:
        if x < self.a or x > self.d:
            return 0.0
        if x < self.b:
            return (x - self.a) / (self.b - self.a)
        if x <= self.c:
            return 1.0
        if self.d == self.c:
            return 1.0
        return (self.d - x) / (self.d - self.c)

    def clipped_pieces(self, strength: float, lo: float, hi: float):
        """Linear pieces of min(strength, membership) over [lo, hi].

        Returns (x0, x1, y0, y1) tuples with y linear in between; zero pieces
        are omitted.
        """
        if strength <= 0.0:
            return []
        pieces = []

        def emit(x0, x1):
            x0, x1 = max(x0, lo), min(x1, hi)
            if x1 <= x0:
                return
            pieces.append((x0, x1, self._clipped_at(x0, strength), self._clipped_at(x1, strength)))

        # Rising edge, split where the clip level crosses it.
        if math.isfinite(self.a) and self.b > self.a:
            x_hit = self.a + strength * (self.b - self.a)
            emit(self.a, min(x_hit, self.b))
            emit(x_hit, self.b)
        # Plateau.
        plateau_lo = self.b if math.isfinite(self.b) else lo
        plateau_hi = self.c if math.isfinite(self.c) else hi
        emit(plateau_lo, plateau_hi)
        # Falling edge.
        if math.isfinite(self.d) and self.d > self.c:
            x_hit = self.d - strength * (self.d - self.c)
            emit(self.c, x_hit)
            emit(max(x_hit, self.c), self.d)
        return pieces

    def _clipped_at(self, x: float, strength: float) -> float:
        return min(self.membership(x), strength)


@dataclass(frozen=True)
class FuzzyVariable:
    name: str
    lo: float
    hi: float
    terms: dict[str, Trapezoid]

    def membership(self, term: str, x: float) -> float:
        return self.terms[term].membership(x)

    def memberships(self, x: float) -> dict[str, float]:
        return {t: mf.membership(x) for t, mf in self.terms.items()}


@dataclass(frozen=True)
class FuzzyRule:
    antecedents: tuple[tuple[str, str], ...]  # (variable, term)
    consequent: tuple[str, str]

    def describe(self) -> str:
        cond = " AND ".join(f"{v} IS {t}" for v, t in self.antecedents)
        return f"IF {cond} THEN {self.consequent[0]} IS {self.consequent[1]}"


@dataclass(frozen=True)
class FuzzyConfig:
    inputs: dict[str, FuzzyVariable]
    output: FuzzyVariable
    rules: tuple[FuzzyRule, ...]
    defuzzification: str = "centroid"


HEALTH_TERMS = ("LOW", "MEDIUM", "HIGH")
SIZE_TERMS = ("SMALL", "MEDIUM", "LARGE", "HUGE")
PRIORITY_TERMS = ("LOW", "MEDIUM", "HIGH", "CRITICAL")
HUGE_CLUSTER_ANCHOR = 45

DEFAULT_CONFIG_TEXT = """\
# Channel fault priority inference.
#
# Size terms: SMALL holds 1 at cluster sizes 1..3, MEDIUM plateaus up to 12,
# the MEDIUM/LARGE ramps are complementary across 12..25, and HUGE saturates
# at 45 channels.  Adjacent terms that conclude the same priority overlap at
# full membership so the defuzzified priority never dips along either input
# (centroid defuzzification of clipped edge shapes is otherwise non-monotone).
INPUT health RANGE 0 1
  TERM LOW tri 0 0 0.5
  TERM MEDIUM tri 0 0.5 1
  TERM HIGH tri 0.5 1 1
INPUT size RANGE 1 60
  TERM SMALL trap 0 0 3 13
  TERM MEDIUM trap 1 2 12 25
  TERM LARGE trap 12 25 45 46
  TERM HUGE trap 25 45 inf inf
OUTPUT priority RANGE 0 1
  TERM LOW tri 0.025 0.125 0.225
  TERM MEDIUM tri 0.275 0.375 0.475
  TERM HIGH tri 0.525 0.625 0.725
  TERM CRITICAL tri 0.775 0.875 0.975
DEFUZZIFY centroid
RULE IF health IS LOW AND size IS SMALL THEN priority IS HIGH
RULE IF health IS LOW AND size IS MEDIUM THEN priority IS HIGH
RULE IF health IS LOW AND size IS LARGE THEN priority IS CRITICAL
RULE IF health IS LOW AND size IS HUGE THEN priority IS CRITICAL
RULE IF health IS MEDIUM AND size IS SMALL THEN priority IS MEDIUM
RULE IF health IS MEDIUM AND size IS MEDIUM THEN priority IS MEDIUM
RULE IF health IS MEDIUM AND size IS LARGE THEN priority IS HIGH
RULE IF health IS MEDIUM AND size IS HUGE THEN priority IS HIGH
RULE IF health IS HIGH AND size IS SMALL THEN priority IS LOW
RULE IF health IS HIGH AND size IS MEDIUM THEN priority IS LOW
RULE IF health IS HIGH AND size IS LARGE THEN priority IS MEDIUM
RULE IF health IS HIGH AND size IS HUGE THEN priority IS MEDIUM
"""


def _parse_knot(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise FuzzyConfigError(f"{where}: bad knot value {token!r}")


def parse_fuzzy_config(text: str, source: str = "<config>") -> FuzzyConfig:
    inputs: dict[str, FuzzyVariable] = {}
    output: FuzzyVariable | None = None
    rules: list[FuzzyRule] = []
    defuzz = "centroid"
    current: dict | None = None
    variables: list[dict] = []

    def close_variable():
        nonlocal output
        if current is None:
            return
        var = FuzzyVariable(current["name"], current["lo"], current["hi"],
                            dict(current["terms"]))
        if not var.terms:
            raise FuzzyConfigError(f"{source}: variable {var.name} declares no terms")
        if current["kind"] == "input":
            inputs[var.name] = var
        else:
            if output is not None:
                raise FuzzyConfigError(f"{source}: multiple OUTPUT variables")
            output = var

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        where = f"{source}:{lineno}"
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        keyword = tokens[0].upper()
        if keyword in ("INPUT", "OUTPUT"):
            if len(tokens) != 5 or tokens[2].upper() != "RANGE":
                raise FuzzyConfigError(f"{where}: expected '{keyword} <name> RANGE <lo> <hi>'")
            close_variable()
            current = {
                "kind": keyword.lower(),
                "name": tokens[1],
                "lo": _parse_knot(tokens[3], where),
                "hi": _parse_knot(tokens[4], where),
                "terms": {},
            }
            variables.append(current)
        elif keyword == "TERM":
            if current is None:
                raise FuzzyConfigError(f"{where}: TERM outside a variable block")
            name, shape = tokens[1], tokens[2].lower()
            knots = [_parse_knot(t, where) for t in tokens[3:]]
            if shape == "tri" and len(knots) == 3:
                mf = Trapezoid(knots[0], knots[1], knots[1], knots[2])
            elif shape == "trap" and len(knots) == 4:
                mf = Trapezoid(*knots)
            else:
                raise FuzzyConfigError(f"{where}: expected 'TERM <name> tri a b c' or "
                                       f"'TERM <name> trap a b c d'")
            current["terms"][name] = mf
        elif keyword == "DEFUZZIFY":
            if len(tokens) != 2:
                raise FuzzyConfigError(f"{where}: expected 'DEFUZZIFY <method>'")
            defuzz = tokens[1].lower()
        elif keyword == "RULE":
            rules.append(_parse_rule(tokens[1:], where))
        else:
            raise FuzzyConfigError(f"{where}: unknown directive {tokens[0]!r}")
    close_variable()

    if output is None:
        raise FuzzyConfigError(f"{source}: no OUTPUT variable declared")
    cfg = FuzzyConfig(inputs=inputs, output=output, rules=tuple(rules), defuzzification=defuzz)
    validate_config(cfg, source)
    return cfg


def _parse_rule(tokens: Sequence[str], where: str) -> FuzzyRule:
    # IF a IS x (AND b IS y)* THEN out IS z
    words = [t for t in tokens]
    if not words or words[0].upper() != "IF":
        raise FuzzyConfigError(f"{where}: rule must start with IF")
    try:
        then_at = [w.upper() for w in words].index("THEN")
    except ValueError:
        raise FuzzyConfigError(f"{where}: rule is missing THEN")
    antecedents = []
    clause = words[1:then_at]
    while clause:
        if len(clause) < 3 or clause[1].upper() != "IS":
            raise FuzzyConfigError(f"{where}: malformed condition near {' '.join(clause)!r}")
        antecedents.append((clause[0], clause[2]))
        clause = clause[3:]
        if clause:
            if clause[0].upper() != "AND":
                raise FuzzyConfigError(f"{where}: conditions must be joined with AND")
            clause = clause[1:]
    tail = words[then_at + 1:]
    if len(tail) != 3 or tail[1].upper() != "IS":
        raise FuzzyConfigError(f"{where}: rule must end with 'THEN <var> IS <term>'")
    if not antecedents:
        raise FuzzyConfigError(f"{where}: rule has no conditions")
    return FuzzyRule(tuple(antecedents), (tail[0], tail[2]))


def validate_config(cfg: FuzzyConfig, source: str = "<config>") -> None:
    """Structural checks: term references, domain coverage, rule completeness."""
    if cfg.defuzzification != "centroid":
        raise FuzzyConfigError(
            f"{source}: unsupported defuzzification {cfg.defuzzification!r} (only centroid)")
    for expected, var_name in (("health", "health"), ("size", "size")):
        if var_name not in cfg.inputs:
            raise FuzzyConfigError(f"{source}: missing INPUT variable {expected!r}")
    for term in HEALTH_TERMS:
        if term not in cfg.inputs["health"].terms:
            raise FuzzyConfigError(f"{source}: health variable is missing term {term}")
    for term in SIZE_TERMS:
        if term not in cfg.inputs["size"].terms:
            raise FuzzyConfigError(f"{source}: size variable is missing term {term}")
    for term in PRIORITY_TERMS:
        if term not in cfg.output.terms:
            raise FuzzyConfigError(f"{source}: output variable is missing term {term}")
    huge = cfg.inputs["size"].membership("HUGE", HUGE_CLUSTER_ANCHOR)
    if huge != 1.0:
        raise FuzzyConfigError(
            f"{source}: HUGE cluster membership must saturate at {HUGE_CLUSTER_ANCHOR} "
            f"channels (got {huge})")

    for rule in cfg.rules:
        for var, term in rule.antecedents:
            if var not in cfg.inputs:
                raise FuzzyConfigError(f"{source}: rule references unknown input {var!r}")
            if term not in cfg.inputs[var].terms:
                raise FuzzyConfigError(
                    f"{source}: rule references unknown term {var} IS {term}")
        ovar, oterm = rule.consequent
        if ovar != cfg.output.name:
            raise FuzzyConfigError(f"{source}: rule concludes on unknown output {ovar!r}")
        if oterm not in cfg.output.terms:
            raise FuzzyConfigError(f"{source}: rule concludes unknown term {oterm!r}")

    for var in cfg.inputs.values():
        _check_coverage(var, source)

    combos = {(h, s) for h in cfg.inputs["health"].terms for s in cfg.inputs["size"].terms}
    covered = set()
    for rule in cfg.rules:
        cond = dict(rule.antecedents)
        if set(cond) == {"health", "size"}:
            covered.add((cond["health"], cond["size"]))
    missing = sorted(combos - covered)
    if missing:
        pretty = ", ".join(f"(health {h}, size {s})" for h, s in missing)
        raise FuzzyConfigError(f"{source}: rule table leaves input combinations uncovered: "
                               f"{pretty}")


def _check_coverage(var: FuzzyVariable, source: str, samples: int = 2001) -> None:
    for i in range(samples):
        x = var.lo + (var.hi - var.lo) * i / (samples - 1)
        if all(mf.membership(x) == 0.0 for mf in var.terms.values()):
            raise FuzzyConfigError(
                f"{source}: variable {var.name} has no membership at {x:.6g}; "
                f"terms must cover the whole range [{var.lo}, {var.hi}]")


def load_fuzzy_config(path) -> FuzzyConfig:
    with open(path) as fh:
        return parse_fuzzy_config(fh.read(), source=str(path))


def default_fuzzy_config() -> FuzzyConfig:
    return parse_fuzzy_config(DEFAULT_CONFIG_TEXT, source="<default>")


# ---------------------------------------------------------------------------
# Inference

def fuzzify_cluster_size(size: int, cfg: FuzzyConfig) -> dict[str, float]:
    if size < 1:
        raise ValueError(f"cluster size must be >= 1, got {size}")
    var = cfg.inputs["size"]
    x = min(max(float(size), var.lo), var.hi)
    return var.memberships(x)


def infer(cfg: FuzzyConfig, values: Mapping[str, float]) -> float:
    """Mamdani min/max inference, exact centroid of the aggregated output."""
    strengths: list[tuple[float, Trapezoid]] = []
    for rule in cfg.rules:
        strength = 1.0
        for var, term in rule.antecedents:
            v = cfg.inputs[var]
            x = min(max(values[var], v.lo), v.hi)
            strength = min(strength, v.membership(term, x))
            if strength == 0.0:
                break
        if strength > 0.0:
            strengths.append((strength, cfg.output.terms[rule.consequent[1]]))
    if not strengths:
        raise FuzzyInferenceError(f"no rule fired for inputs {dict(values)!r}")
    centroid = _centroid_of_max(strengths, cfg.output.lo, cfg.output.hi)
    return (centroid - cfg.output.lo) / (cfg.output.hi - cfg.output.lo)


def _centroid_of_max(clipped: list[tuple[float, Trapezoid]], lo: float, hi: float) -> float:
    pieces = []
    for strength, mf in clipped:
        pieces.extend(mf.clipped_pieces(strength, lo, hi))
    if not pieces:
        raise FuzzyInferenceError("aggregated output has no area")

    breaks = {lo, hi}
    for x0, x1, _, _ in pieces:
        breaks.add(x0)
        breaks.add(x1)
    # Pairwise intersections of the linear pieces refine the envelope breakpoints.
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            x = _segment_intersection(pieces[i], pieces[j])
            if x is not None:
                breaks.add(x)
    xs = sorted(b for b in breaks if lo <= b <= hi)

    area = 0.0
    moment = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        if x1 <= x0:
            continue
        # Between refined breakpoints the envelope follows a single linear
        # piece; pick it at the midpoint and integrate that line exactly.
        w = x1 - x0
        xm = 0.5 * (x0 + x1)
        best_ym = 0.0
        y0 = y1 = 0.0
        for px0, px1, py0, py1 in pieces:
            if px0 <= xm <= px1:
                slope = (py1 - py0) / (px1 - px0)
                ym = py0 + slope * (xm - px0)
                if ym > best_ym:
                    best_ym = ym
                    y0 = py0 + slope * (x0 - px0)
                    y1 = py0 + slope * (x1 - px0)
        area += 0.5 * (y0 + y1) * w
        moment += w * (y0 * (2 * x0 + x1) + y1 * (x0 + 2 * x1)) / 6.0
    if area <= 0.0:
        raise FuzzyInferenceError("aggregated output has no area")
    return moment / area


def _segment_intersection(p, q) -> float | None:
    x0 = max(p[0], q[0])
    x1 = min(p[1], q[1])
    if x1 <= x0:
        return None

    def line(piece):
        px0, px1, py0, py1 = piece
        slope = 0.0 if px1 == px0 else (py1 - py0) / (px1 - px0)
        return slope, py0 - slope * px0

    s1, b1 = line(p)
    s2, b2 = line(q)
    if s1 == s2:
        return None
    x = (b2 - b1) / (s1 - s2)
    if x0 < x < x1:
        return x
    return None


def compute_priority(health: float, cluster_size: int, cfg: FuzzyConfig) -> float:
    if not 0.0 <= health <= 1.0:
        raise ValueError(f"health must be in [0, 1], got {health}")
    if cluster_size < 1:
        raise ValueError(f"cluster size must be >= 1, got {cluster_size}")
    value = infer(cfg, {"health": float(health), "size": float(cluster_size)})
    return min(max(value, 0.0), 1.0)

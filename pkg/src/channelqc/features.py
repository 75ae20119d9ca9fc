"""Turn raw channel observables into normalized parameters and a health score.

The health indicator formula is a declared stand-in (the construction used on
the real instrument is not published): a weighted sum of photopeak drift,
normalized count strength and the two pass/fail gates, clamped to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .csvio import format_bool, format_float, parse_bool, read_csv, write_csv
from .scanner import ChannelObservables, ScannerModel, noise_free_response


class ExtractionError(ValueError):
    """Observable that cannot be turned into parameters."""


class Status(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"


class SaturationStatus(str, Enum):
    OK = "OK"
    SATURATED = "SATURATED"


@dataclass(frozen=True)
class ExtractedParameters:
    photopeak_drift: float  # signed relative deviation from reference
    strength: float  # count rate vs reference, clamped to [0, 1]
    identification_status: Status
    energy_status: Status
    saturation_status: SaturationStatus


@dataclass(frozen=True)
class PerformanceIndicators:
    health: float  # 1.0 = fully healthy


@dataclass(frozen=True)
class ChannelReference:
    photopeak: float
    count_rate: float
    energy_res_bound: float

    def __post_init__(self):
        if self.photopeak <= 0 or self.count_rate <= 0 or self.energy_res_bound <= 0:
            raise ExtractionError(f"reference values must be positive: {self}")


@dataclass(frozen=True)
class ReferenceBaseline:
    """Per-channel golden values the extraction compares against."""

    references: dict[int, ChannelReference]

    def __getitem__(self, channel: int) -> ChannelReference:
        return self.references[channel]

    def __len__(self) -> int:
        return len(self.references)


ENERGY_BOUND_FACTOR = 1.5


def reference_baseline(model: ScannerModel,
                       energy_bound_factor: float = ENERGY_BOUND_FACTOR) -> ReferenceBaseline:
    """Baseline from the nominal (pre-fault) configuration, noise-free."""
    import dataclasses as _dc

    nominal = _dc.replace(model, bias=model.nominal_bias, threshold=model.nominal_threshold,
                          faults={})
    free = noise_free_response(nominal)
    refs = {
        c: ChannelReference(
            photopeak=float(free["photopeak"][c]),
            count_rate=float(free["count_rate"][c]),
            energy_res_bound=energy_bound_factor * float(free["energy_res"][c]),
        )
        for c in range(model.n_channels)
    }
    return ReferenceBaseline(refs)


def extract_parameters(obs: ChannelObservables, ref: ChannelReference,
                       channel: int | None = None) -> ExtractedParameters:
    label = "" if channel is None else f"channel {channel} "
    for name, value in (
        ("photopeak_position", obs.photopeak_position),
        ("count_rate", obs.count_rate),
        ("energy_resolution", obs.energy_resolution),
    ):
        if not math.isfinite(value):
            raise ExtractionError(f"{label}{name} is not finite: {value!r}")
    drift = (obs.photopeak_position - ref.photopeak) / ref.photopeak
    strength = min(max(obs.count_rate / ref.count_rate, 0.0), 1.0)
    return ExtractedParameters(
        photopeak_drift=drift,
        strength=strength,
        identification_status=Status.PASS if obs.identification_pass else Status.FAIL,
        energy_status=Status.PASS if obs.energy_resolution <= ref.energy_res_bound else Status.FAIL,
        saturation_status=SaturationStatus.SATURATED if obs.saturated else SaturationStatus.OK,
    )


@dataclass(frozen=True)
class HealthWeights:
    """Configurable weights of the health indicator terms."""

    drift: float = 0.3
    strength: float = 0.3
    identification: float = 0.2
    energy: float = 0.2


def compute_health(p: ExtractedParameters,
                   weights: HealthWeights = HealthWeights()) -> PerformanceIndicators:
    value = (
        weights.drift * (1.0 - min(abs(p.photopeak_drift), 1.0))
        + weights.strength * p.strength
        + weights.identification * (p.identification_status is Status.PASS)
        + weights.energy * (p.energy_status is Status.PASS)
    )
    return PerformanceIndicators(health=min(max(value, 0.0), 1.0))


def extract_all(observables: Mapping[int, ChannelObservables], baseline: ReferenceBaseline,
                weights: HealthWeights = HealthWeights(),
                ) -> tuple[dict[int, ExtractedParameters], dict[int, PerformanceIndicators]]:
    params = {}
    indicators = {}
    for channel, obs in observables.items():
        p = extract_parameters(obs, baseline[channel], channel)
        params[channel] = p
        indicators[channel] = compute_health(p, weights)
    return params, indicators


# ---------------------------------------------------------------------------
# File formats

EXTRACTED_HEADER = ["channel_id", "drift", "strength", "ident_pass", "energy_pass",
                    "saturated", "health"]
BASELINE_HEADER = ["channel_id", "ref_photopeak_adc", "ref_count_rate_cps",
                   "energy_res_bound_pct"]


def write_extracted(params: Mapping[int, ExtractedParameters],
                    indicators: Mapping[int, PerformanceIndicators], path,
                    manifest_hash: str | None = None, parent_hash: str | None = None) -> None:
    rows = (
        [str(c), format_float(p.photopeak_drift), format_float(p.strength),
         format_bool(p.identification_status is Status.PASS),
         format_bool(p.energy_status is Status.PASS),
         format_bool(p.saturation_status is SaturationStatus.SATURATED),
         format_float(indicators[c].health)]
        for c, p in sorted(params.items())
    )
    write_csv(path, EXTRACTED_HEADER, rows, manifest_hash, parent_hash)


def write_baseline(baseline: ReferenceBaseline, path,
                   manifest_hash: str | None = None) -> None:
    rows = (
        [str(c), format_float(r.photopeak), format_float(r.count_rate),
         format_float(r.energy_res_bound)]
        for c, r in sorted(baseline.references.items())
    )
    write_csv(path, BASELINE_HEADER, rows, manifest_hash)


def read_baseline(path) -> ReferenceBaseline:
    _, rows, _, _ = read_csv(path, BASELINE_HEADER)
    return ReferenceBaseline({
        int(r[0]): ChannelReference(float(r[1]), float(r[2]), float(r[3])) for r in rows
    })


def read_extracted(path) -> tuple[dict[int, ExtractedParameters], dict[int, PerformanceIndicators]]:
    _, rows, _, _ = read_csv(path, EXTRACTED_HEADER)
    params = {}
    indicators = {}
    for r in rows:
        c = int(r[0])
        params[c] = ExtractedParameters(
            photopeak_drift=float(r[1]),
            strength=float(r[2]),
            identification_status=Status.PASS if parse_bool(r[3]) else Status.FAIL,
            energy_status=Status.PASS if parse_bool(r[4]) else Status.FAIL,
            saturation_status=SaturationStatus.SATURATED if parse_bool(r[5])
            else SaturationStatus.OK,
        )
        indicators[c] = PerformanceIndicators(health=float(r[6]))
    return params, indicators

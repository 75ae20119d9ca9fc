"""Simulated many-channel scanner with configuration fault injection.

The scanner is a cylinder of `rings` transaxial rings with n/rings channels per
ring.  Each channel carries a configuration (APD bias voltage, noise threshold)
and responds through a fixed analytic model; faults are injected by shifting
configuration values, exactly the way a miscalibrated channel would drift.

The response model is invented but frozen (the real instrument this mimics is
not available here):

    photopeak   = P0_c * exp(GAIN_K * (bias - V0_c))
    energy_res  = R0 * sqrt(P0_c / photopeak)
    count_rate  = TRUE_RATE * exp(-SHARPNESS * (threshold/photopeak)^2)
                  + NOISE_RATE_FLOOR * exp((NOISE_FLOOR - threshold) / NOISE_TAU)
    capped at SATURATION_CAP; identification passes while photopeak >= 2*threshold.

All randomness (nominal per-channel jitter, campaign channel selection,
measurement noise) is derived from explicit seeds, so identical inputs produce
byte-identical artifacts.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .csvio import format_bool, format_float, parse_bool, read_csv, write_csv

# Sub-stream tags so one user-facing seed cannot collide across purposes.
_TAG_SCANNER = 101
_TAG_CAMPAIGN = 102
_TAG_OBSERVABLES = 103

MAJOR = "MAJOR"
MAJOR_BIAS_DELTA_V = -50.0


class LayoutError(ValueError):
    """Scanner geometry that cannot be laid out."""


class FaultError(ValueError):
    """Invalid fault injection request."""


class CampaignError(ValueError):
    """Campaign plan that does not fit the scanner."""


class FaultType(str, Enum):
    BIAS_SHIFT = "BiasShift"
    NOISE_THRESHOLD_SHIFT = "NoiseThresholdShift"


@dataclass(frozen=True)
class FaultSpec:
    """A single configuration fault: what to shift, by how much."""

    fault_type: FaultType
    delta: float
    severity_level: int | str  # 1..5, or MAJOR

    def __post_init__(self):
        if self.severity_level == MAJOR:
            if self.fault_type is not FaultType.BIAS_SHIFT or self.delta != MAJOR_BIAS_DELTA_V:
                raise FaultError(
                    f"MAJOR faults are a {MAJOR_BIAS_DELTA_V} V bias shift, got "
                    f"{self.fault_type.value} delta={self.delta}"
                )
        else:
            level = self.severity_level
            if not isinstance(level, int) or not 1 <= level <= 5:
                raise FaultError(f"severity level must be 1..5 or MAJOR, got {level!r}")
            if abs(self.delta) != 5 * level:
                raise FaultError(
                    f"severity level {level} requires |delta| = {5 * level}, got {self.delta}"
                )

    @property
    def direction(self) -> str:
        return "increase" if self.delta > 0 else "decrease"


def major_fault() -> FaultSpec:
    return FaultSpec(FaultType.BIAS_SHIFT, MAJOR_BIAS_DELTA_V, MAJOR)


def severity_fault(fault_type: FaultType, level: int, direction: str,
                   magnitude: float | None = None) -> FaultSpec:
    mag = 5.0 * level if magnitude is None else float(magnitude)
    delta = mag if direction == "increase" else -mag
    return FaultSpec(fault_type, delta, level)


@dataclass(frozen=True)
class GroundTruth:
    """Recorded truth for one injected fault, kept for evaluation."""

    fault_type: FaultType
    direction: str
    level: int | str
    delta: float
    clamped: bool = False

    def reconstruct_delta(self) -> float:
        if self.level == MAJOR:
            return MAJOR_BIAS_DELTA_V
        magnitude = 5.0 * self.level
        return magnitude if self.direction == "increase" else -magnitude


@dataclass(frozen=True)
class ResponseModel:
    """Frozen constants of the analytic channel response."""

    photopeak_anchor: float = 256.0  # ADC bins at nominal bias
    gain_k: float = 0.04  # 1/V
    energy_res_nominal: float = 14.0  # percent FWHM
    nominal_bias_v: float = 300.0
    nominal_threshold_bins: int = 64
    true_rate_cps: float = 2000.0
    spectrum_sharpness: float = 4.0
    noise_floor_bins: float = 40.0
    noise_tau_bins: float = 4.0
    noise_rate_at_floor_cps: float = 20000.0
    saturation_cap_cps: float = 10000.0
    measurement_sigma: float = 0.03
    p0_jitter: float = 0.01
    v0_jitter_v: float = 0.5


@dataclass(frozen=True)
class ChannelObservables:
    """Quantities a control panel would report for one channel."""

    photopeak_position: float  # ADC bins
    count_rate: float  # counts/s
    energy_resolution: float  # percent FWHM
    identification_pass: bool
    saturated: bool


@dataclass(frozen=True)
class ScannerModel:
    """Immutable scanner state: geometry, nominal and current configuration."""

    n_channels: int
    rings: int
    per_ring: int
    ring_idx: np.ndarray  # transaxial position within the ring, wraps
    axial_idx: np.ndarray  # which ring along the axis
    nominal_bias: np.ndarray
    nominal_p0: np.ndarray
    nominal_threshold: np.ndarray
    bias: np.ndarray
    threshold: np.ndarray
    response: ResponseModel
    seed: int
    faults: dict[int, GroundTruth] = field(default_factory=dict)

    def geometry_coords(self, channel: int) -> tuple[float, float]:
        return float(self.ring_idx[channel]), float(self.axial_idx[channel])

    def check_channel(self, channel: int) -> None:
        if not 0 <= channel < self.n_channels:
            raise FaultError(f"channel {channel} outside [0, {self.n_channels})")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_scanner(n_channels: int, rings: int, seed: int,
                  response: ResponseModel | None = None) -> ScannerModel:
    """Build a nominal scanner; per-channel jitter on gain anchor and bias."""
    if n_channels < 1:
        raise LayoutError(f"need at least one channel, got {n_channels}")
    if rings < 1 or n_channels % rings != 0:
        raise LayoutError(f"{n_channels} channels do not divide into {rings} rings")
    response = response or ResponseModel()
    per_ring = n_channels // rings
    idx = np.arange(n_channels)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_SCANNER]))
    p0 = response.photopeak_anchor * (
        1.0 + rng.uniform(-response.p0_jitter, response.p0_jitter, n_channels)
    )
    v0 = response.nominal_bias_v + rng.uniform(
        -response.v0_jitter_v, response.v0_jitter_v, n_channels
    )
    threshold = np.full(n_channels, response.nominal_threshold_bins, dtype=np.int64)
    return ScannerModel(
        n_channels=n_channels,
        rings=rings,
        per_ring=per_ring,
        ring_idx=_freeze(idx % per_ring),
        axial_idx=_freeze(idx // per_ring),
        nominal_bias=_freeze(v0),
        nominal_p0=_freeze(p0),
        nominal_threshold=_freeze(threshold.copy()),
        bias=_freeze(v0.copy()),
        threshold=_freeze(threshold),
        response=response,
        seed=seed,
    )


def inject_fault(model: ScannerModel, channel: int, fault: FaultSpec) -> ScannerModel:
    """Return a new model with the fault applied and its truth recorded."""
    model.check_channel(channel)
    if channel in model.faults:
        raise FaultError(f"channel {channel} already carries a fault in this campaign")
    bias = model.bias
    threshold = model.threshold
    clamped = False
    if fault.fault_type is FaultType.BIAS_SHIFT:
        bias = bias.copy()
        bias[channel] += fault.delta
        if bias[channel] <= 0:
            raise FaultError(f"bias shift {fault.delta} V drives channel {channel} non-positive")
        _freeze(bias)
    else:
        threshold = threshold.copy()
        shifted = threshold[channel] + int(fault.delta)
        if shifted < 0:
            shifted = 0
            clamped = True
        threshold[channel] = shifted
        _freeze(threshold)
    truth = GroundTruth(
        fault_type=fault.fault_type,
        direction=fault.direction,
        level=fault.severity_level,
        delta=fault.delta,
        clamped=clamped,
    )
    faults = dict(model.faults)
    faults[channel] = truth
    return dataclasses.replace(model, bias=bias, threshold=threshold, faults=faults)


@dataclass(frozen=True)
class CampaignPlan:
    """How many faults of which kind to inject, reproducibly from `seed`."""

    seed: int
    major_fault_count: int = 0
    per_level_per_type_count: int = 0
    level_magnitudes: Sequence[int] = (5, 10, 15, 20, 25)
    direction_split: float = 0.5  # fraction of each (level, type) block shifted upward

    def total_faults(self) -> int:
        return self.major_fault_count + self.per_level_per_type_count * 2 * len(
            self.level_magnitudes
        )


def plan_campaign(plan: CampaignPlan, model: ScannerModel) -> list[tuple[int, FaultSpec]]:
    """Assign disjoint channels to every planned fault.

    Severity blocks are laid out in fixed order (bias then noise threshold,
    level 1 upward) and each block is split between increase / decrease
    directions by `direction_split`.
    """
    total = plan.total_faults()
    if total > model.n_channels:
        raise CampaignError(
            f"plan needs {total} channels but the scanner has {model.n_channels}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, _TAG_CAMPAIGN]))
    order = rng.permutation(model.n_channels)
    cursor = 0
    assignments: list[tuple[int, FaultSpec]] = []
    for _ in range(plan.major_fault_count):
        assignments.append((int(order[cursor]), major_fault()))
        cursor += 1
    for fault_type in (FaultType.BIAS_SHIFT, FaultType.NOISE_THRESHOLD_SHIFT):
        for level, magnitude in enumerate(plan.level_magnitudes, start=1):
            count = plan.per_level_per_type_count
            n_up = int(round(count * plan.direction_split))
            for k in range(count):
                direction = "increase" if k < n_up else "decrease"
                spec = severity_fault(fault_type, level, direction, magnitude)
                assignments.append((int(order[cursor]), spec))
                cursor += 1
    return assignments


def apply_campaign(model: ScannerModel,
                   assignments: Iterable[tuple[int, FaultSpec]]) -> ScannerModel:
    for channel, fault in assignments:
        model = inject_fault(model, channel, fault)
    return model


# ---------------------------------------------------------------------------
# Response evaluation

def noise_free_response(model: ScannerModel) -> dict[str, np.ndarray]:
    """Evaluate the analytic response without measurement noise."""
    r = model.response
    photopeak = model.nominal_p0 * np.exp(r.gain_k * (model.bias - model.nominal_bias))
    energy_res = r.energy_res_nominal * np.sqrt(model.nominal_p0 / photopeak)
    thr = model.threshold.astype(float)
    phi = np.exp(-r.spectrum_sharpness * (thr / photopeak) ** 2)
    c_noise = r.noise_rate_at_floor_cps * np.exp((r.noise_floor_bins - thr) / r.noise_tau_bins)
    count = r.true_rate_cps * phi + c_noise
    capped = np.minimum(count, r.saturation_cap_cps)
    return {
        "photopeak": photopeak,
        "energy_res": energy_res,
        "count_rate": capped,
        "count_rate_uncapped": count,
        "identification": photopeak >= 2.0 * thr,
        "saturated": count >= r.saturation_cap_cps,
    }


def simulate_observables(model: ScannerModel, seed: int) -> dict[int, ChannelObservables]:
    """Noise-free response plus seeded multiplicative measurement noise."""
    r = model.response
    free = noise_free_response(model)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_OBSERVABLES]))
    eps = rng.normal(0.0, r.measurement_sigma, size=(model.n_channels, 3))
    photopeak = np.maximum(free["photopeak"] * (1.0 + eps[:, 0]), 0.0)
    count = np.clip(free["count_rate_uncapped"] * (1.0 + eps[:, 1]), 0.0, r.saturation_cap_cps)
    energy = np.maximum(free["energy_res"] * (1.0 + eps[:, 2]), 0.0)
    ident = photopeak >= 2.0 * model.threshold
    saturated = count >= r.saturation_cap_cps
    return {
        c: ChannelObservables(
            photopeak_position=float(photopeak[c]),
            count_rate=float(count[c]),
            energy_resolution=float(energy[c]),
            identification_pass=bool(ident[c]),
            saturated=bool(saturated[c]),
        )
        for c in range(model.n_channels)
    }


# ---------------------------------------------------------------------------
# File formats

SCANNER_CONFIG_HEADER = ["channel_id", "ring", "axial", "apd_bias_v", "noise_threshold_bins"]
OBSERVABLES_HEADER = [
    "channel_id", "photopeak_adc", "count_rate_cps", "energy_res_pct",
    "identification_pass", "saturated",
]
LABELS_HEADER = ["channel_id", "fault_type", "direction", "level"]


def write_scanner_config(model: ScannerModel, path, manifest_hash: str | None = None) -> None:
    rows = (
        [str(c), str(int(model.ring_idx[c])), str(int(model.axial_idx[c])),
         format_float(model.bias[c]), str(int(model.threshold[c]))]
        for c in range(model.n_channels)
    )
    write_csv(path, SCANNER_CONFIG_HEADER, rows, manifest_hash)


@dataclass(frozen=True)
class ScannerConfigTable:
    """Per-channel geometry and configuration as read back from file."""

    channel_ids: np.ndarray
    ring_idx: np.ndarray
    axial_idx: np.ndarray
    bias: np.ndarray
    threshold: np.ndarray
    manifest_hash: str | None

    @property
    def per_ring(self) -> int:
        return int(self.ring_idx.max()) + 1

    @property
    def n_channels(self) -> int:
        return len(self.channel_ids)


def read_scanner_config(path) -> ScannerConfigTable:
    _, rows, manifest_hash, _ = read_csv(path, SCANNER_CONFIG_HEADER)
    ids = np.array([int(r[0]) for r in rows])
    return ScannerConfigTable(
        channel_ids=ids,
        ring_idx=np.array([int(r[1]) for r in rows]),
        axial_idx=np.array([int(r[2]) for r in rows]),
        bias=np.array([float(r[3]) for r in rows]),
        threshold=np.array([int(r[4]) for r in rows]),
        manifest_hash=manifest_hash,
    )


def write_observables(observables: Mapping[int, ChannelObservables], path,
                      manifest_hash: str | None = None) -> None:
    rows = (
        [str(c), format_float(o.photopeak_position), format_float(o.count_rate),
         format_float(o.energy_resolution), format_bool(o.identification_pass),
         format_bool(o.saturated)]
        for c, o in sorted(observables.items())
    )
    write_csv(path, OBSERVABLES_HEADER, rows, manifest_hash)


def read_observables(path) -> dict[int, ChannelObservables]:
    _, rows, _, _ = read_csv(path, OBSERVABLES_HEADER)
    return {
        int(r[0]): ChannelObservables(
            photopeak_position=float(r[1]),
            count_rate=float(r[2]),
            energy_resolution=float(r[3]),
            identification_pass=parse_bool(r[4]),
            saturated=parse_bool(r[5]),
        )
        for r in rows
    }


def write_labels(model: ScannerModel, path, manifest_hash: str | None = None) -> None:
    rows = (
        [str(c), truth.fault_type.value, truth.direction, str(truth.level)]
        for c, truth in sorted(model.faults.items())
    )
    write_csv(path, LABELS_HEADER, rows, manifest_hash)


@dataclass(frozen=True)
class LabelRow:
    fault_type: FaultType
    direction: str
    level: int | str


def read_labels(path) -> tuple[dict[int, LabelRow], str | None]:
    _, rows, manifest_hash, _ = read_csv(path, LABELS_HEADER)
    labels = {}
    for r in rows:
        level: int | str = MAJOR if r[3] == MAJOR else int(r[3])
        labels[int(r[0])] = LabelRow(FaultType(r[1]), r[2], level)
    return labels, manifest_hash

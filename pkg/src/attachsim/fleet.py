"""Device-model catalog, radio camping rule, and over-the-air latency.

Thirteen builtin profiles cover nine phones and four SIM-gateway setups
(local SIM vs relayed SIM, two vendor families).  Each profile carries
per-step latency moments, the optional-step mask, a receiver sensitivity
threshold, and the SIM-channel kind backing its authentication step.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as chan
from .aka import XOR_TEST, AuthAlgorithm, SubscriberKey
from .core import ConfigError, RngStream
from .protocol import ATTACH_SEQUENCE, OPTIONAL_STEPS, AttachStep

_SENSITIVITY_RANGE = (-130.0, -60.0)
_RSRP_RANGE = (-130.0, -40.0)


class CampDecision(enum.Enum):
    Proceed = "Proceed"
    CampRefused = "CampRefused"


@dataclass(frozen=True)
class RadioEnvironment:
    """Downlink signal quality at the device location."""

    rsrp_dbm: float

    def __post_init__(self):
        lo, hi = _RSRP_RANGE
        if not lo <= self.rsrp_dbm <= hi:
            raise ConfigError(f"rsrp {self.rsrp_dbm} dBm outside [{lo}, {hi}]")

    @property
    def label(self) -> str:
        if self.rsrp_dbm >= -80.0:
            return "Excellent"
        if self.rsrp_dbm >= -95.0:
            return "Medium"
        if self.rsrp_dbm >= -110.0:
            return "Poor"
        return "CellEdge"


@dataclass(frozen=True)
class TransmissionModel:
    """Over-the-air component of the authentication step.

    Deliberately independent of RSRP: signal quality gates whether a
    device camps at all, not how fast the radio leg runs once attached.
    A small outlier component produces the occasional ~100-200 ms spike.
    """

    median_ms: float = 2.0
    sigma: float = 0.4
    outlier_prob: float = 0.01
    outlier_max_ms: float = 200.0

    def __post_init__(self):
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ConfigError("outlier probability must be within [0, 1]")
        if self.median_ms < 0 or self.outlier_max_ms < 0:
            raise ConfigError("transmission latencies must be non-negative")

    def sample(self, rng: RngStream) -> float:
        value = self.median_ms * float(np.exp(rng.normal(0.0, self.sigma)))
        if rng.random() < self.outlier_prob:
            value += rng.uniform(0.0, self.outlier_max_ms)
        return value


def transmission_latency(env: RadioEnvironment, rng: RngStream,
                         model: TransmissionModel | None = None) -> float:
    """Sample the radio-leg latency; distribution does not depend on env."""
    if not isinstance(env, RadioEnvironment):
        raise ConfigError("transmission latency requires a RadioEnvironment")
    return (model or TransmissionModel()).sample(rng)


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    step_latency: dict[AttachStep, tuple[float, float]]
    optional_steps: frozenset[AttachStep]
    channel_kind: str
    sensitivity_rsrp: float
    auth_alg: AuthAlgorithm = XOR_TEST
    subscriber_key: SubscriberKey | None = None
    # remote profiles: target mean for the derived authentication latency
    calibration_target_ms: float | None = None
    # catalog bookkeeping: the published per-profile total, for cross-checks
    expected_total_ms: float | None = None
    auth_misconfigured: bool = False
    device_id: str | None = None

    def __post_init__(self):
        lo, hi = _SENSITIVITY_RANGE
        if not lo <= self.sensitivity_rsrp <= hi:
            raise ConfigError(
                f"{self.name}: sensitivity {self.sensitivity_rsrp} outside [{lo}, {hi}]")
        if not self.optional_steps <= OPTIONAL_STEPS:
            raise ConfigError(f"{self.name}: mask contains non-optional steps")
        if self.channel_kind not in chan.CHANNEL_KINDS:
            raise ConfigError(f"{self.name}: unknown channel kind "
                              f"{self.channel_kind!r}")
        missing = [s.name for s in self.enabled_steps if s not in self.step_latency]
        if missing:
            raise ConfigError(f"{self.name}: no latency entry for {missing}")
        if self.subscriber_key is None:
            # stable per-profile default key
            digest = hashlib.sha256(self.name.encode()).digest()
            object.__setattr__(self, "subscriber_key", SubscriberKey(digest[:16]))

    @property
    def enabled_steps(self) -> tuple[AttachStep, ...]:
        return tuple(s for s in ATTACH_SEQUENCE
                     if s not in OPTIONAL_STEPS or s in self.optional_steps)

    @property
    def is_remote(self) -> bool:
        return self.channel_kind in (chan.REMOTE_TCP, chan.REMOTE_UDP)

    def sim_side_key(self) -> SubscriberKey:
        if not self.auth_misconfigured:
            return self.subscriber_key
        flipped = bytes([self.subscriber_key.k[0] ^ 0xFF]) + self.subscriber_key.k[1:]
        return SubscriberKey(flipped)

    def for_device(self, device_id: str) -> "DeviceProfile":
        return replace(self, device_id=device_id)


def attempt_camp(profile: DeviceProfile, env: RadioEnvironment) -> CampDecision:
    """A device camps iff signal power reaches its sensitivity threshold."""
    if env.rsrp_dbm < profile.sensitivity_rsrp:
        return CampDecision.CampRefused
    return CampDecision.Proceed


# Builtin catalog.  Cells are (mean ms, std ms) per step index; omitted
# indices are steps the device never runs.  The published totals ride
# along for transcription cross-checks.  Sensitivity: the three models
# that still attached under heavy attenuation get -120 dBm, the rest -85.
_ALL_OPT = frozenset(OPTIONAL_STEPS)
_NO_ESM = frozenset({AttachStep.IdentityRequest, AttachStep.IdentityResponse})
_NO_OPT: frozenset[AttachStep] = frozenset()

_CATALOG: dict[str, dict] = {
    "FairPhone5G": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (31.0, 0.0), 3: (1.0, 0.0),
               4: (57.6, 11.4), 5: (1.0, 0.0), 6: (20.5, 3.2), 7: (1.0, 0.0),
               8: (19.0, 0.0), 9: (50.4, 4.8), 10: (32.4, 1.9)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=215.0),
    "GalaxyA90": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (27.0, 6.0), 3: (1.0, 0.0),
               4: (74.1, 22.1), 5: (1.0, 0.0), 6: (19.3, 1.6), 7: (1.0, 0.0),
               8: (19.7, 2.6), 9: (48.7, 2.5), 10: (32.8, 3.4)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=225.6),
    "GalaxyNote4": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (38.3, 2.3), 3: (1.0, 0.3),
               4: (84.5, 36.5), 5: (1.0, 0.0), 6: (37.0, 6.3), 7: (0.9, 0.2),
               8: (37.3, 5.5), 9: (66.2, 6.8), 10: (49.7, 7.1)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-120.0,
        total=316.8),
    "GalaxyS3": dict(
        steps={0: (0.0, 0.0), 1: (0.9, 0.3), 2: (31.0, 10.4), 3: (1.0, 0.0),
               4: (67.9, 12.2), 5: (1.0, 0.1), 6: (33.0, 9.5),
               9: (56.9, 8.7), 10: (60.1, 1.1)},
        optional=_NO_ESM, channel=chan.COUPLED_SERIAL, sensitivity=-120.0,
        total=251.9),
    "GalaxyZFold25G": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (31.0, 0.0), 3: (1.0, 0.0),
               4: (70.2, 18.2), 5: (1.0, 0.1), 6: (21.8, 14.3), 7: (1.0, 0.0),
               8: (22.8, 21.4), 9: (50.0, 4.4), 10: (34.3, 6.0)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-120.0,
        total=234.2),
    "OnePlusNord": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (31.8, 2.4), 3: (1.0, 0.0),
               4: (69.8, 10.0), 5: (1.0, 0.0), 6: (31.3, 12.5), 7: (1.0, 0.0),
               8: (26.2, 9.3), 9: (66.5, 14.3), 10: (35.5, 8.2)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=265.1),
    "SonyXPERIA": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (25.0, 6.4), 3: (1.0, 0.0),
               4: (69.1, 5.9), 5: (1.0, 0.0), 6: (19.6, 2.6), 7: (1.0, 0.0),
               8: (19.6, 2.3), 9: (50.9, 5.9), 10: (54.5, 6.4)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=242.8),
    "Xiaomi10Lite5G": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (31.0, 0.0), 3: (1.0, 0.0),
               4: (69.9, 8.2), 5: (1.0, 0.0), 6: (21.9, 4.6), 7: (1.0, 0.0),
               8: (22.6, 5.6), 9: (48.8, 3.9), 10: (38.8, 3.9)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=237.1),
    "Xiaomi9Pro5G": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (31.0, 0.0), 3: (1.0, 0.0),
               4: (67.9, 16.2), 5: (1.0, 0.0), 6: (21.8, 10.5), 7: (0.9, 0.1),
               8: (20.7, 4.2), 9: (49.3, 4.3), 10: (33.5, 4.1)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=228.2),
    "SMBHyb_loc": dict(
        steps={0: (0.0, 0.0), 1: (1.0, 0.0), 2: (31.8, 3.5), 3: (1.0, 0.0),
               4: (71.7, 10.8), 5: (1.0, 0.0), 6: (22.4, 5.9), 7: (1.0, 0.0),
               8: (22.9, 5.8), 9: (46.9, 10.3), 10: (57.3, 10.1)},
        optional=_ALL_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=257.1),
    "SMBHyb_rem": dict(
        steps={0: (0.0, 0.0), 1: (0.9, 0.2), 2: (31.0, 4.3), 3: (0.9, 0.3),
               4: (2122.7, 309.9), 5: (0.9, 0.3), 6: (20.1, 3.7), 7: (1.0, 0.0),
               8: (20.6, 3.9), 9: (43.7, 9.3), 10: (53.2, 9.5)},
        optional=_ALL_OPT, channel=chan.REMOTE_TCP, sensitivity=-85.0,
        total=2295.5, target=2122.7),
    "SMBPor_loc": dict(
        steps={0: (0.0, 0.0), 3: (0.9, 0.1), 4: (71.2, 10.7), 5: (1.0, 0.0),
               6: (19.7, 2.7), 9: (50.7, 6.8), 10: (78.5, 6.8)},
        optional=_NO_OPT, channel=chan.COUPLED_SERIAL, sensitivity=-85.0,
        total=253.9),
    "SMBPor_rem": dict(
        steps={0: (0.0, 0.0), 3: (1.0, 0.0), 4: (1640.2, 286.7), 5: (1.0, 0.0),
               6: (21.1, 5.8), 9: (57.9, 26.1), 10: (52.2, 4.7)},
        optional=_NO_OPT, channel=chan.REMOTE_UDP, sensitivity=-85.0,
        total=1773.5, target=1640.2),
}

PHONE_MODELS: tuple[str, ...] = (
    "FairPhone5G", "GalaxyA90", "GalaxyNote4", "GalaxyS3", "GalaxyZFold25G",
    "OnePlusNord", "SonyXPERIA", "Xiaomi10Lite5G", "Xiaomi9Pro5G")
SIMBOX_MODELS: tuple[str, ...] = (
    "SMBHyb_loc", "SMBHyb_rem", "SMBPor_loc", "SMBPor_rem")


def builtin_profiles() -> dict[str, DeviceProfile]:
    """All builtin device models, keyed by catalog name."""
    out: dict[str, DeviceProfile] = {}
    for name, row in _CATALOG.items():
        out[name] = DeviceProfile(
            name=name,
            step_latency={AttachStep(i): (m, s) for i, (m, s) in row["steps"].items()},
            optional_steps=row["optional"],
            channel_kind=row["channel"],
            sensitivity_rsrp=row["sensitivity"],
            calibration_target_ms=row.get("target"),
            expected_total_ms=row["total"],
        )
    return out


def _parse_rtt(spec: dict) -> chan.RttDistribution:
    kind = spec.get("kind")
    known = {"kind", "value", "median", "sigma", "path"}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown rtt keys {sorted(unknown)}")
    if kind == "constant":
        return chan.RttDistribution.constant(float(spec["value"]))
    if kind == "lognormal":
        return chan.RttDistribution.lognormal(
            float(spec["median"]), float(spec.get("sigma", 0.35)))
    if kind == "empirical":
        return chan.RttDistribution.from_file(spec["path"])
    raise ConfigError(f"unknown rtt kind {kind!r}")


_CHANNEL_KEYS = {
    chan.COUPLED_SERIAL: {"serial_mean_ms", "serial_std_ms", "sessions_auth"},
    chan.REMOTE_TCP: {"rtt", "sessions_auth", "packets_per_session",
                      "ack_cost_ms", "online"},
    chan.REMOTE_UDP: {"rtt", "sessions_auth", "packets_per_session",
                      "loss_prob", "retransmit_timeout_ms", "online"},
}


def channel_for(profile: DeviceProfile, overrides: dict | None = None,
                calibrate: bool = True) -> chan.SimChannel:
    """Build (and optionally calibrate) the SIM channel a profile expects.

    Calibration scales the remote channel's processing phases so that the
    simulated mean authentication latency lands on the profile's target.
    """
    kind = profile.channel_kind
    kwargs: dict = {}
    if overrides:
        allowed = _CHANNEL_KEYS[kind]
        unknown = set(overrides) - allowed
        if unknown:
            raise ConfigError(
                f"unknown channel keys for {kind}: {sorted(unknown)}")
        kwargs = dict(overrides)
        if "rtt" in kwargs:
            kwargs["rtt"] = _parse_rtt(kwargs["rtt"])
        if "online" in kwargs:
            online = dict(kwargs["online"])
            unknown = set(online) - {"enabled", "mean_ms", "std_ms"}
            if unknown:
                raise ConfigError(f"unknown online keys {sorted(unknown)}")
            kwargs["online"] = chan.online_server_penalty(
                bool(online.get("enabled", True)),
                float(online.get("mean_ms", 460.0)),
                float(online.get("std_ms", 60.0)))
    built = chan.build_channel(kind, **kwargs)
    if calibrate and built.is_remote and profile.calibration_target_ms is not None:
        built = chan.calibrate_processing(built, profile.calibration_target_ms)
    return built

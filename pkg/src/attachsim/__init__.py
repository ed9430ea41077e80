"""Deterministic LTE attach-signaling simulator with latency-based
detection of remotely associated SIMs."""

from .aka import (
    XOR_TEST,
    AuthChallenge,
    AuthFailure,
    AuthResponse,
    SubscriberKey,
    algorithm_named,
    compute_response,
    generate_challenge,
    register_algorithm,
    verify,
)
from .channel import (
    ChannelBreakdown,
    OnlinePenalty,
    RttDistribution,
    SimChannel,
    auth_channel_elapsed,
    build_channel,
    builtin_remote_rtt,
    calibrate_processing,
    coupled_serial,
    min_transfer_floor,
    online_server_penalty,
    remote_tcp,
    remote_udp,
    transfer_session,
)
from .core import (
    ConfigError,
    DegenerateInput,
    EmptyWindow,
    EventClock,
    MalformedRecord,
    ParseError,
    RngStream,
)
from .fleet import (
    CampDecision,
    DeviceProfile,
    RadioEnvironment,
    TransmissionModel,
    attempt_camp,
    builtin_profiles,
    channel_for,
    transmission_latency,
)
from .monitor import (
    Decision,
    DetectPolicy,
    LatencySample,
    LatencyStats,
    ReauthPolicy,
    TTestResult,
    Verdict,
    aggregate_auth_latency,
    classify,
    compute_step_latencies,
    schedule_reauth,
    welch_t,
)
from .protocol import (
    ATTACH_SEQUENCE,
    AttachRecord,
    AttachStep,
    NetworkConfig,
    Outcome,
    SignalingMessage,
    ValidationReport,
    network_auth_timer,
    run_attach,
    step_named,
    validate_sequence,
)
from .scenario import (
    DetectionResult,
    FleetEntry,
    ScenarioArtifacts,
    ScenarioConfig,
    emit_distribution,
    load_config,
    parse_config,
    parse_logs,
    run_detection,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "ATTACH_SEQUENCE",
    "AttachRecord",
    "AttachStep",
    "AuthChallenge",
    "AuthFailure",
    "AuthResponse",
    "CampDecision",
    "ChannelBreakdown",
    "ConfigError",
    "Decision",
    "DegenerateInput",
    "DetectPolicy",
    "DetectionResult",
    "DeviceProfile",
    "EmptyWindow",
    "EventClock",
    "FleetEntry",
    "LatencySample",
    "LatencyStats",
    "MalformedRecord",
    "NetworkConfig",
    "OnlinePenalty",
    "Outcome",
    "ParseError",
    "RadioEnvironment",
    "ReauthPolicy",
    "RngStream",
    "RttDistribution",
    "ScenarioArtifacts",
    "ScenarioConfig",
    "SignalingMessage",
    "SimChannel",
    "SubscriberKey",
    "TTestResult",
    "TransmissionModel",
    "ValidationReport",
    "Verdict",
    "XOR_TEST",
    "aggregate_auth_latency",
    "algorithm_named",
    "attempt_camp",
    "auth_channel_elapsed",
    "build_channel",
    "builtin_profiles",
    "builtin_remote_rtt",
    "calibrate_processing",
    "channel_for",
    "classify",
    "compute_response",
    "compute_step_latencies",
    "coupled_serial",
    "emit_distribution",
    "generate_challenge",
    "load_config",
    "min_transfer_floor",
    "network_auth_timer",
    "online_server_penalty",
    "parse_config",
    "parse_logs",
    "register_algorithm",
    "remote_tcp",
    "remote_udp",
    "run_attach",
    "run_detection",
    "run_scenario",
    "schedule_reauth",
    "step_named",
    "transfer_session",
    "transmission_latency",
    "validate_sequence",
    "verify",
    "welch_t",
]

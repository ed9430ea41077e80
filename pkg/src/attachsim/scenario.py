"""Scenario configuration, batch simulation, log export, and detection runs.

Configs are versioned JSON documents validated fail-closed: any key the
schema does not know is an error.  All artifacts are deterministic
functions of (config, seed): logs are merged in (time, device, step)
order, report rows are sorted by device, and floats are rendered through
fixed formats, so reruns are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import monitor
from .aka import SubscriberKey, algorithm_named
from .channel import SimChannel
from .core import ConfigError, EmptyWindow, EventClock, ParseError, RngStream
from .fleet import (
    CampDecision,
    DeviceProfile,
    RadioEnvironment,
    TransmissionModel,
    attempt_camp,
    builtin_profiles,
    channel_for,
)
from .monitor import (
    DetectPolicy,
    LatencySample,
    ReauthPolicy,
    Verdict,
    aggregate_auth_latency,
    classify,
    compute_step_latencies,
    schedule_reauth,
)
from .protocol import (
    ATTACH_SEQUENCE,
    AttachRecord,
    AttachStep,
    NetworkConfig,
    Outcome,
    SignalingMessage,
    run_attach,
    step_named,
)

DAY_MS = 86_400_000.0


def _check_keys(obj: dict, allowed: set[str], required: set[str], ctx: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{ctx}: missing keys {sorted(missing)}")


@dataclass(frozen=True)
class FleetEntry:
    profile: str | dict
    count: int
    wrong_key: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("fleet entry count must be at least 1")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    fleet: tuple[FleetEntry, ...]
    rsrp_dbm: float = -71.0
    attaches_per_device: int = 50
    day_span_ms: float = DAY_MS
    min_spacing_ms: float = 10_000.0
    auth_timer_ms: float = 6000.0
    calibrate: bool = True
    channels: dict = field(default_factory=dict)
    transmission: TransmissionModel = field(default_factory=TransmissionModel)
    detect: DetectPolicy = field(default_factory=DetectPolicy)

    def __post_init__(self):
        if not self.fleet:
            raise ConfigError("fleet must not be empty")
        if self.attaches_per_device < 1:
            raise ConfigError("attaches_per_device must be at least 1")


def _parse_inline_profile(raw: dict) -> DeviceProfile:
    ctx = f"inline profile {raw.get('name', '?')!r}"
    _check_keys(raw, {"name", "steps", "optional_steps", "channel_kind",
                      "sensitivity_rsrp", "calibration_target_ms",
                      "auth_algorithm", "subscriber_key"},
                {"name", "steps", "channel_kind", "sensitivity_rsrp"}, ctx)
    steps: dict[AttachStep, tuple[float, float]] = {}
    for name, pair in raw["steps"].items():
        if (not isinstance(pair, (list, tuple))) or len(pair) != 2:
            raise ConfigError(f"{ctx}: step {name} needs [mean, std]")
        steps[step_named(name)] = (float(pair[0]), float(pair[1]))
    optional = frozenset(step_named(n) for n in raw.get("optional_steps", []))
    alg = None
    if "auth_algorithm" in raw:
        spec = raw["auth_algorithm"]
        _check_keys(spec, {"name", "latency_mean_ms", "latency_std_ms"},
                    {"name"}, f"{ctx} auth_algorithm")
        alg = algorithm_named(spec["name"],
                              float(spec.get("latency_mean_ms", 0.0)),
                              float(spec.get("latency_std_ms", 0.0)))
    key = None
    if "subscriber_key" in raw:
        key = SubscriberKey.from_hex(raw["subscriber_key"])
    kwargs = dict(
        name=str(raw["name"]), step_latency=steps, optional_steps=optional,
        channel_kind=str(raw["channel_kind"]),
        sensitivity_rsrp=float(raw["sensitivity_rsrp"]),
        calibration_target_ms=(float(raw["calibration_target_ms"])
                               if "calibration_target_ms" in raw else None))
    if alg is not None:
        kwargs["auth_alg"] = alg
    if key is not None:
        kwargs["subscriber_key"] = key
    return DeviceProfile(**kwargs)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(raw, ctx=str(path))


def parse_config(raw: dict, ctx: str = "config") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{ctx}: document must be an object")
    _check_keys(raw, {"version", "seed", "fleet", "rsrp_dbm",
                      "attaches_per_device", "day_span_ms", "min_spacing_ms",
                      "auth_timer_ms", "calibrate", "channels", "transmission",
                      "detect"},
                {"version", "seed", "fleet"}, ctx)
    if raw["version"] != 1:
        raise ConfigError(f"{ctx}: unsupported config version {raw['version']!r}")

    entries = []
    for i, item in enumerate(raw["fleet"]):
        ectx = f"{ctx} fleet[{i}]"
        _check_keys(item, {"profile", "count", "wrong_key"}, {"profile", "count"},
                    ectx)
        profile = item["profile"]
        if isinstance(profile, dict):
            profile = _parse_inline_profile(profile)
        elif not isinstance(profile, str):
            raise ConfigError(f"{ectx}: profile must be a name or an object")
        entries.append(FleetEntry(profile=profile, count=int(item["count"]),
                                  wrong_key=bool(item.get("wrong_key", False))))

    tx_kwargs = {}
    if "transmission" in raw:
        _check_keys(raw["transmission"],
                    {"median_ms", "sigma", "outlier_prob", "outlier_max_ms"},
                    set(), f"{ctx} transmission")
        tx_kwargs = {k: float(v) for k, v in raw["transmission"].items()}

    detect = DetectPolicy()
    if "detect" in raw:
        _check_keys(raw["detect"], {"critical", "statistic"}, set(),
                    f"{ctx} detect")
        detect = DetectPolicy(
            critical=float(raw["detect"].get("critical", 1.65)),
            statistic=str(raw["detect"].get("statistic", "welch")))

    channels = raw.get("channels", {})
    for kind in channels:
        if kind not in ("coupled_serial", "remote_tcp", "remote_udp"):
            raise ConfigError(f"{ctx}: unknown channel section {kind!r}")

    return ScenarioConfig(
        seed=int(raw["seed"]),
        fleet=tuple(entries),
        rsrp_dbm=float(raw.get("rsrp_dbm", -71.0)),
        attaches_per_device=int(raw.get("attaches_per_device", 50)),
        day_span_ms=float(raw.get("day_span_ms", DAY_MS)),
        min_spacing_ms=float(raw.get("min_spacing_ms", 10_000.0)),
        auth_timer_ms=float(raw.get("auth_timer_ms", 6000.0)),
        calibrate=bool(raw.get("calibrate", True)),
        channels=dict(channels),
        transmission=TransmissionModel(**tx_kwargs),
        detect=detect,
    )


@dataclass(frozen=True)
class ScenarioArtifacts:
    out_dir: Path
    logs_path: Path
    records_path: Path
    summary_path: Path
    records: dict[str, list[AttachRecord]]


def _resolve_profile(entry: FleetEntry, catalog: dict[str, DeviceProfile]
                     ) -> DeviceProfile:
    if isinstance(entry.profile, DeviceProfile):
        profile = entry.profile
    elif isinstance(entry.profile, str):
        if entry.profile not in catalog:
            raise ConfigError(f"unknown profile {entry.profile!r}; builtin: "
                              f"{sorted(catalog)}")
        profile = catalog[entry.profile]
    else:
        profile = _parse_inline_profile(entry.profile)
    if entry.wrong_key:
        profile = replace(profile, auth_misconfigured=True)
    return profile


def run_scenario(config: ScenarioConfig, out_dir: str | Path) -> ScenarioArtifacts:
    """Simulate the configured fleet and write logs, records, and summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = RadioEnvironment(config.rsrp_dbm)
    network = NetworkConfig(auth_timer_ms=config.auth_timer_ms,
                            transmission=config.transmission)
    catalog = builtin_profiles()
    root = RngStream(config.seed)

    channel_cache: dict[str, SimChannel] = {}

    def channel_of(profile: DeviceProfile) -> SimChannel:
        if profile.name not in channel_cache:
            channel_cache[profile.name] = channel_for(
                profile, config.channels.get(profile.channel_kind),
                calibrate=config.calibrate)
        return channel_cache[profile.name]

    records: dict[str, list[AttachRecord]] = {}
    model_order: list[str] = []
    per_model_count: dict[str, int] = {}
    device_index = 0
    for entry in config.fleet:
        base_profile = _resolve_profile(entry, catalog)
        if base_profile.name not in model_order:
            model_order.append(base_profile.name)
        channel = channel_of(base_profile)
        for _ in range(entry.count):
            ordinal = per_model_count.get(base_profile.name, 0)
            per_model_count[base_profile.name] = ordinal + 1
            device_id = f"{base_profile.name}-{ordinal:03d}"
            profile = base_profile.for_device(device_id)
            rng = root.substream(device_index)
            device_index += 1
            schedule = schedule_reauth(
                ReauthPolicy(config.attaches_per_device, config.min_spacing_ms),
                (0.0, config.day_span_ms), rng)
            recs: list[AttachRecord] = []
            for seq, start in enumerate(schedule):
                if attempt_camp(profile, env) is CampDecision.CampRefused:
                    recs.append(AttachRecord(device_id=device_id, messages=[],
                                             outcome=Outcome.CampRefused,
                                             attach_seq=seq))
                    continue
                clock = EventClock(start)
                recs.append(run_attach(profile, channel, network, clock, rng,
                                       attach_seq=seq))
            records[device_id] = recs

    logs_path = out / "logs.jsonl"
    records_path = out / "records.jsonl"
    summary_path = out / "summary.csv"
    _write_logs(logs_path, records)
    _write_records(records_path, records)
    _write_summary(summary_path, records, model_order)
    return ScenarioArtifacts(out_dir=out, logs_path=logs_path,
                             records_path=records_path,
                             summary_path=summary_path, records=records)


def _write_logs(path: Path, records: dict[str, list[AttachRecord]]) -> None:
    messages: list[SignalingMessage] = []
    for recs in records.values():
        for rec in recs:
            messages.extend(rec.messages)
    messages.sort(key=lambda m: (m.time, m.device_id, m.step.value))
    with path.open("w") as f:
        for msg in messages:
            f.write(msg.to_json_line())
            f.write("\n")


def _write_records(path: Path, records: dict[str, list[AttachRecord]]) -> None:
    with path.open("w") as f:
        for device_id in sorted(records):
            for rec in records[device_id]:
                steps = {}
                prev = None
                for msg in rec.messages:
                    steps[msg.message] = (0.0 if prev is None
                                          else msg.time - prev)
                    prev = msg.time
                row = {
                    "device_id": rec.device_id,
                    "attach_seq": rec.attach_seq,
                    "outcome": rec.outcome.value,
                    "start_ms": rec.messages[0].time if rec.messages else None,
                    "end_ms": rec.messages[-1].time if rec.messages else None,
                    "steps": steps,
                    "auth_transfer_ms": rec.auth_transfer_ms,
                    "auth_processing_ms": rec.auth_processing_ms,
                }
                f.write(json.dumps(row))
                f.write("\n")


def _write_summary(path: Path, records: dict[str, list[AttachRecord]],
                   model_order: list[str]) -> None:
    """Latency table: one row per step plus totals, one column per model."""
    per_model: dict[str, dict[AttachStep, list[float]]] = {m: {} for m in model_order}
    totals: dict[str, list[float]] = {m: [] for m in model_order}
    enabled: dict[str, set[AttachStep]] = {m: set() for m in model_order}
    for device_id, recs in records.items():
        model = device_id.rsplit("-", 1)[0]
        for rec in recs:
            if not rec.messages:
                continue
            enabled[model].update(rec.steps)
            for sample in compute_step_latencies(rec):
                per_model[model].setdefault(sample.step, []).append(sample.latency)
            if rec.outcome is Outcome.Completed:
                totals[model].append(rec.span_ms)

    def cell(values: list[float]) -> str:
        arr = np.asarray(values)
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        return f"{float(np.mean(arr)):.1f}±{std:.1f}"

    lines = ["step,message,direction," + ",".join(model_order)]
    for step in ATTACH_SEQUENCE:
        cells = []
        for model in model_order:
            if step not in enabled[model]:
                cells.append("/")
            elif step == AttachStep.AttachRequest:
                cells.append("0.0±0.0")
            else:
                cells.append(cell(per_model[model].get(step, [])))
        lines.append(f"{step.value},{step.name},{step.direction}," + ",".join(cells))
    total_cells = [cell(totals[m]) if totals[m] else "/" for m in model_order]
    lines.append("-,Total,-," + ",".join(total_cells))
    path.write_text("\n".join(lines) + "\n")


_LOG_KEYS = {"time", "layer", "direction", "device_id", "message"}


def parse_logs(path: str | Path) -> dict[str, list[AttachRecord]]:
    """Reconstruct per-device attach records from a JSONL signaling log.

    Fail-closed: any malformed line raises ParseError with its 1-based
    line number.  Records are split when the step index stops increasing;
    every record must begin with the first step of the sequence.
    """
    open_records: dict[str, list[SignalingMessage]] = {}
    done: dict[str, list[AttachRecord]] = {}
    seq_counter: dict[str, int] = {}
    last_line_for: dict[str, int] = {}

    def close(device_id: str) -> None:
        msgs = open_records.pop(device_id, None)
        if not msgs:
            return
        last = msgs[-1].step
        if last == AttachStep.AttachComplete:
            outcome = Outcome.Completed
        elif last == AttachStep.AuthenticationResponse:
            outcome = Outcome.AuthTimeout
        elif last == AttachStep.AuthenticationRequest:
            outcome = Outcome.AuthReject
        else:
            raise ParseError(f"record for {device_id} truncated at {last.name}",
                             last_line_for[device_id])
        seq = seq_counter.get(device_id, 0)
        seq_counter[device_id] = seq + 1
        done.setdefault(device_id, []).append(AttachRecord(
            device_id=device_id, messages=msgs, outcome=outcome, attach_seq=seq))

    with Path(path).open() as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                raise ParseError("blank line", lineno)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict) or set(obj) != _LOG_KEYS:
                raise ParseError(f"expected exactly keys {sorted(_LOG_KEYS)}",
                                 lineno)
            try:
                step = step_named(str(obj["message"]))
            except ConfigError:
                raise ParseError(f"unknown message {obj['message']!r}",
                                 lineno) from None
            if obj["layer"] != "NAS":
                raise ParseError(f"unexpected layer {obj['layer']!r}", lineno)
            if obj["direction"] != step.direction:
                raise ParseError(
                    f"{step.name} must be {step.direction}", lineno)
            try:
                time = float(obj["time"])
            except (TypeError, ValueError):
                raise ParseError(f"bad time {obj['time']!r}", lineno) from None
            if time < 0:
                raise ParseError("negative timestamp", lineno)
            device_id = str(obj["device_id"])
            msg = SignalingMessage(time=time, direction=str(obj["direction"]),
                                   device_id=device_id, message=step.name)

            pending = open_records.get(device_id)
            if pending and step <= pending[-1].step:
                close(device_id)
                pending = None
            if not pending and step != AttachStep.AttachRequest:
                raise ParseError(
                    f"record for {device_id} starts at {step.name}", lineno)
            if pending and time < pending[-1].time:
                raise ParseError(f"time went backwards for {device_id}", lineno)
            open_records.setdefault(device_id, []).append(msg)
            last_line_for[device_id] = lineno

    for device_id in sorted(open_records):
        close(device_id)
    return done


def _device_samples(records: dict[str, list[AttachRecord]]
                    ) -> dict[str, list[LatencySample]]:
    out: dict[str, list[LatencySample]] = {}
    for device_id, recs in records.items():
        samples: list[LatencySample] = []
        for rec in recs:
            samples.extend(compute_step_latencies(rec))
        out[device_id] = samples
    return out


@dataclass(frozen=True)
class DetectionResult:
    verdicts: list[Verdict]
    skipped: list[str]
    flagged: bool
    csv_path: Path
    json_path: Path


def run_detection(logs_path: str | Path, baseline_path: str | Path,
                  policy: DetectPolicy, report_path: str | Path
                  ) -> DetectionResult:
    """Score every device in the logs against the baseline population."""
    device_samples = _device_samples(parse_logs(logs_path))
    baseline_samples = _device_samples(parse_logs(baseline_path))

    baseline_values = [
        s.latency for samples in baseline_samples.values() for s in samples
        if s.step == AttachStep.AuthenticationResponse]
    if not baseline_values:
        raise EmptyWindow("baseline logs contain no authentication samples")
    baseline = monitor.LatencyStats.from_samples(baseline_values)

    verdicts: list[Verdict] = []
    skipped: list[str] = []
    for device_id in sorted(device_samples):
        try:
            stats = aggregate_auth_latency(device_samples[device_id], device_id)
        except EmptyWindow:
            skipped.append(device_id)
            continue
        if stats.n < 2:
            skipped.append(device_id)
            continue
        verdicts.append(classify(stats, baseline, policy, device_id=device_id))

    report_path = Path(report_path)
    csv_path = report_path
    json_path = report_path.with_suffix(".json")
    _write_detection_reports(csv_path, json_path, verdicts, skipped, baseline,
                             policy)
    flagged = any(v.decision is monitor.Decision.Flagged for v in verdicts)
    return DetectionResult(verdicts=verdicts, skipped=skipped, flagged=flagged,
                           csv_path=csv_path, json_path=json_path)


def _write_detection_reports(csv_path: Path, json_path: Path,
                             verdicts: list[Verdict], skipped: list[str],
                             baseline: monitor.LatencyStats,
                             policy: DetectPolicy) -> None:
    lines = ["device_id,n,mean,std,median,t,p,decision"]
    for v in verdicts:
        stat = v.ttest.t if policy.statistic == "double" else v.ttest.t_welch
        lines.append(
            f"{v.device_id},{v.stats.n},{v.stats.mean:.3f},{v.stats.std:.3f},"
            f"{v.stats.median:.3f},{stat:.4f},{v.ttest.p_value:.3e},"
            f"{v.decision.value}")
    csv_path.write_text("\n".join(lines) + "\n")

    payload = {
        "policy": {"critical": policy.critical, "statistic": policy.statistic},
        "baseline": {"n": baseline.n, "mean": baseline.mean,
                     "std": baseline.std, "median": baseline.median,
                     "min": baseline.min, "max": baseline.max},
        "verdicts": [
            {
                "device_id": v.device_id,
                "decision": v.decision.value,
                "n": v.stats.n,
                "mean": v.stats.mean,
                "std": v.stats.std,
                "median": v.stats.median,
                "se": v.ttest.se,
                "t_double": v.ttest.t,
                "t_welch": v.ttest.t_welch,
                "t_ratio": v.ttest.t_ratio,
                "df": v.ttest.df,
                "p_value": v.ttest.p_value,
            }
            for v in verdicts
        ],
        "skipped_devices": skipped,
    }
    json_path.write_text(json.dumps(payload, indent=2) + "\n")


def emit_distribution(logs_path: str | Path, step: AttachStep | str | int,
                      out_path: str | Path, bins: int = 60) -> Path:
    """Histogram of one step's latencies, as CSV points for plotting."""
    if isinstance(step, str):
        step = step_named(step)
    elif isinstance(step, int):
        step = AttachStep(step)
    values = [
        s.latency
        for samples in _device_samples(parse_logs(logs_path)).values()
        for s in samples if s.step == step]
    if not values:
        raise EmptyWindow(f"no samples for step {step.name}")
    counts, edges = np.histogram(np.asarray(values), bins=bins)
    total = float(len(values))
    out_path = Path(out_path)
    lines = ["bin_low,bin_high,count,density"]
    for i, count in enumerate(counts):
        width = edges[i + 1] - edges[i]
        density = count / (total * width) if width > 0 else 0.0
        lines.append(f"{edges[i]:.6f},{edges[i + 1]:.6f},{int(count)},"
                     f"{density:.8g}")
    out_path.write_text("\n".join(lines) + "\n")
    return out_path

import pytest
from hypothesis import HealthCheck, settings

from attachsim import (
    DeviceProfile,
    EventClock,
    NetworkConfig,
    RngStream,
    builtin_profiles,
    channel_for,
    coupled_serial,
    run_attach,
)

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def profiles() -> dict[str, DeviceProfile]:
    return builtin_profiles()


@pytest.fixture(scope="session")
def channels(profiles):
    """One calibrated channel per builtin profile, built once."""
    return {name: channel_for(p) for name, p in profiles.items()}


@pytest.fixture(scope="session")
def attach_once(profiles, channels):
    """Factory: run one attach for a builtin profile at a given seed."""

    def run(name: str, seed: int = 1, network: NetworkConfig | None = None,
            start_ms: float = 0.0):
        profile = profiles[name].for_device(f"{name}-000")
        return run_attach(profile, channels[name],
                          network or NetworkConfig(),
                          EventClock(start_ms), RngStream(seed))

    return run


@pytest.fixture()
def plain_channel():
    return coupled_serial()

"""Shared primitives: error types, seeded RNG streams, quantized time."""

from __future__ import annotations

import math

import numpy as np


class ConfigError(ValueError):
    """Rejected configuration value or file."""


class ParseError(ValueError):
    """Malformed log input; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MalformedRecord(ValueError):
    """Attach record violates its ordering guarantees."""


class EmptyWindow(ValueError):
    """No samples fell inside the requested window."""


class DegenerateInput(ValueError):
    """Statistic undefined for the given inputs."""


# Timestamps and per-step latencies live on a 2**-10 ms lattice.  Lattice
# values are scaled integers far below 2**53, so float addition and
# subtraction on them is exact: per-step latencies telescope to the record
# span with zero rounding error.  They also have at most ten fractional
# decimal digits, so a %.10f rendering round-trips bit-for-bit through logs.
TIME_QUANTUM_MS = 1.0 / 1024.0


def quantize_ms(value: float) -> float:
    """Nearest lattice point to a millisecond value."""
    return round(value * 1024.0) / 1024.0


def quantize_ceil_ms(value: float) -> float:
    """Smallest lattice point >= value; used for latency floors."""
    return math.ceil(value * 1024.0) / 1024.0


def fmt_ms(value: float) -> str:
    """Exact decimal rendering of a lattice timestamp."""
    return f"{value:.10f}"


class RngStream:
    """Deterministic random stream addressed by (seed, *path).

    Substreams are derived through SeedSequence spawn keys, so any
    (seed, path) pair reconstructs the same generator regardless of how
    many sibling streams were created before it.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.default_rng(ss)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"

    def substream(self, *path: int) -> "RngStream":
        return RngStream(self.seed, self.path + path)

    @property
    def gen(self) -> np.random.Generator:
        return self._gen

    def normal(self, mean: float, std: float) -> float:
        return float(self._gen.normal(mean, std))

    def uniform(self, low: float, high: float) -> float:
        return float(self._gen.uniform(low, high))

    def random(self) -> float:
        return float(self._gen.random())

    def bytes(self, n: int) -> bytes:
        return self._gen.bytes(n)

    def integers(self, low: int, high: int) -> int:
        return int(self._gen.integers(low, high))


def clamped_normal(rng: RngStream, mean: float, std: float, floor: float) -> float:
    """Normal sample clamped from below.

    Clamping (rather than redrawing) keeps the long-run mean close to the
    nominal one even when the floor cuts well into the left tail.
    """
    draw = rng.normal(mean, std)
    return draw if draw > floor else floor


class EventClock:
    """Monotonic simulation clock on the quantized millisecond lattice."""

    def __init__(self, start_ms: float = 0.0):
        self._now = quantize_ms(float(start_ms))

    @property
    def now(self) -> float:
        return self._now

    def advance(self, delta_ms: float) -> float:
        """Move forward by a non-negative, already-quantized delta."""
        if delta_ms < 0:
            raise ValueError(f"clock cannot move backwards (delta {delta_ms})")
        self._now += delta_ms
        return self._now

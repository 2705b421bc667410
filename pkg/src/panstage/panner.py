"""Constant-power amplitude panning over the listener-corrected speaker ring.

Speaker directions are recomputed in the listener frame on every call, so
the sweet spot follows the tracked listener.  spread 0 is the classic
pairwise 2D solve (invert the 2x2 base of the bracketing speaker unit
vectors); spread > 0 fans the source over replica directions so that more
buses become active, which is how early reflections get their width.

Everything here is pure float math on a handful of speakers: no
allocations beyond small lists, safe to call per block on the render path.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .errors import DegenerateGeometry, InvalidLayout
from .geometry import ListenerPose, LoudspeakerLayout, relative_azimuth, wrap_angle

#: Reference distance for the inverse-distance direct-sound law, meters.
REFERENCE_DISTANCE = 1.0

#: Replica offsets for spread > 0, as fractions of the spread half-angle.
#: Eight replicas plus the center direction; spread 100 maps to a 90 degree
#: half-angle, so spread 50 fans +/-45 degrees around the source.
_REPLICA_FRACTIONS = (-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0)

_DEGENERATE_BASE = 1e-12


def _closer(d: float, t1: float, t2: float, i: int, j: int) -> int:
    """Index of whichever bracketing direction is angularly closer to d."""
    return i if abs(wrap_angle(d - t1)) <= abs(wrap_angle(d - t2)) else j


@dataclass(frozen=True)
class SpreadParam:
    """Source spreading width on the 0..100 scale (0 = pairwise panning)."""

    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"spread must be in [0, 100], got {self.value}")

    @property
    def half_angle(self) -> float:
        return self.value * (math.pi / 200.0)


@dataclass(frozen=True)
class PanGains:
    """Per-bus gains, power-normalized so that sum(g^2) == 1."""

    gains: tuple[float, ...]

    def __post_init__(self):
        power = sum(g * g for g in self.gains)
        if abs(power - 1.0) > 1e-9:
            raise ValueError(f"pan gains must be power-normalized, got sum g^2 = {power}")
        if any(g < 0.0 for g in self.gains):
            raise ValueError("pan gains must be non-negative")

    def active_buses(self, threshold: float = 1e-12) -> list[int]:
        return [b for b, g in enumerate(self.gains) if g > threshold]


def direct_level(distance: float) -> float:
    """Inverse-distance gain for the direct path, clamped inside 1 m."""
    if distance < 0:
        raise ValueError("distance must be >= 0")
    return REFERENCE_DISTANCE / max(distance, REFERENCE_DISTANCE)


def pan(
    source_azimuth: float,
    listener: ListenerPose,
    layout: LoudspeakerLayout,
    spread: SpreadParam = SpreadParam(0.0),
) -> PanGains:
    """Pan a source direction over the layout, corrected to the listener.

    Raises DegenerateGeometry if any panning speaker sits on top of the
    listener's horizontal position.
    """
    if not math.isfinite(source_azimuth):
        raise ValueError("source azimuth must be finite")
    speakers = layout.panning_speakers()
    if len({sp.bus for sp in speakers}) < 2:
        raise InvalidLayout("panning needs at least 2 distinct buses")

    entries = sorted(
        (relative_azimuth(listener, sp.position), sp.bus) for sp in speakers
    )
    angles = [a for a, _ in entries]
    buses = [b for _, b in entries]
    n = len(entries)

    acc = [0.0] * n  # amplitude accumulation per speaker over replicas
    half = spread.half_angle
    if half == 0.0:
        directions = (wrap_angle(source_azimuth),)
    else:
        directions = tuple(
            wrap_angle(source_azimuth + f * half) for f in _REPLICA_FRACTIONS
        )

    for d in directions:
        i = bisect_right(angles, d) - 1
        if i < 0:
            i = n - 1  # source below the lowest angle: wrap through +/-pi
        j = (i + 1) % n
        t1, t2 = angles[i], angles[j]
        det = math.sin(t1 - t2)
        if abs(det) < _DEGENERATE_BASE:
            # Collapsed base (duplicate or antipodal pair directions).
            acc[_closer(d, t1, t2, i, j)] += 1.0
            continue
        g1 = math.sin(d - t2) / det
        g2 = math.sin(t1 - d) / det
        # A source outside the bracketing pair's cone (numerical edges, or
        # a coverage hole wider than pi when the listener leaves the ring's
        # hull) yields negative gains: clamp, falling back to the nearest
        # speaker when both legs collapse.
        g1 = max(g1, 0.0)
        g2 = max(g2, 0.0)
        norm = math.hypot(g1, g2)
        if norm <= 0.0:
            acc[_closer(d, t1, t2, i, j)] += 1.0
            continue
        acc[i] += g1 / norm
        acc[j] += g2 / norm

    # Speakers sharing a bus feed one output: the bus gain is the power sum
    # of its member speakers, preserving radiated power.
    bus_power = [0.0] * layout.bus_count
    for k in range(n):
        bus_power[buses[k]] += acc[k] * acc[k]
    total = sum(bus_power)
    scale = 1.0 / math.sqrt(total)
    return PanGains(gains=tuple(math.sqrt(p) * scale for p in bus_power))

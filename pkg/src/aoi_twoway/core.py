"""Shared primitives for the two-way-delay status-update toolkit.

Time advances in unit slots.  A controller pulls fresh samples from a remote
source through two geometric servers: a request travels over the reverse link
(per-slot completion probability ``gamma``), and the sample it triggers
travels back over the forward link (per-slot completion probability ``mu``).
Everything downstream — closed forms, decision-process kernels, simulation —
builds on the few types and helpers defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "ServiceRates",
    "AgeCap",
    "CycleRecord",
    "cap_value",
    "clamp_age",
    "sample_geometric",
    "average_aoi_from_cycles",
]


@dataclass(frozen=True)
class ServiceRates:
    """Per-slot completion probabilities of the two servers.

    ``gamma`` drives the request (reverse-link) server, ``mu`` the update
    (forward-link) server.  Service times are geometric on {1, 2, ...} with
    means ``1/gamma`` and ``1/mu`` slots.
    """

    gamma: float
    mu: float

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")

    @property
    def gamma_bar(self) -> float:
        return 1.0 - self.gamma

    @property
    def mu_bar(self) -> float:
        return 1.0 - self.mu

    @property
    def deterministic(self) -> bool:
        """True when both services always finish in a single slot."""
        return self.gamma == 1.0 and self.mu == 1.0


@dataclass(frozen=True)
class AgeCap:
    """Saturation bound on tracked ages; keeps decision state spaces finite."""

    cap: int

    def __post_init__(self) -> None:
        if self.cap < 2:
            raise ValueError(f"age cap must be >= 2, got {self.cap}")


def cap_value(cap: AgeCap | int) -> int:
    """Normalise an ``AgeCap`` or plain int to a validated integer bound."""
    value = cap.cap if isinstance(cap, AgeCap) else int(cap)
    if value < 2:
        raise ValueError(f"age cap must be >= 2, got {value}")
    return value


@dataclass(frozen=True)
class CycleRecord:
    """Interarrival gap and system time of one delivered update.

    ``interarrival`` is the spacing (in slots) between the generation instants
    of this update and the previous delivered one; ``system_time`` is the
    delay from generation to delivery.
    """

    interarrival: int
    system_time: int

    def __post_init__(self) -> None:
        if self.interarrival < 1:
            raise ValueError(f"interarrival must be >= 1, got {self.interarrival}")
        if self.system_time < 1:
            raise ValueError(f"system_time must be >= 1, got {self.system_time}")


def clamp_age(age: int, cap: AgeCap | int) -> int:
    """Advance ``age`` by one slot, saturating at the cap."""
    if age < 0:
        raise ValueError(f"age must be nonnegative, got {age}")
    limit = cap.cap if isinstance(cap, AgeCap) else cap
    return age + 1 if age + 1 < limit else limit


def sample_geometric(p: float, rng: np.random.Generator) -> int:
    """Draw a geometric service time on {1, 2, ...} with mean ``1/p``.

    Uses the inverse-CDF transform of a single uniform draw, so a fixed
    generator seed reproduces the exact sample path.  Generators are
    single-owner: parallel workers must each construct their own with a
    distinct seed.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"success probability must lie in (0, 1], got {p}")
    if p == 1.0:
        return 1
    u = rng.random()
    k = math.ceil(math.log1p(-u) / math.log1p(-p))
    return k if k > 1 else 1


def average_aoi_from_cycles(records: Iterable[CycleRecord]) -> float:
    """Average age of information implied by a batch of delivery cycles.

    Each cycle with interarrival ``I`` and system time ``T`` contributes a
    sawtooth area of ``I**2/2 + I*T``; the average age is the mean area over
    the mean interarrival, minus the half-slot discretisation offset.
    """
    total_gap = 0.0
    total_area = 0.0
    count = 0
    for rec in records:
        gap = float(rec.interarrival)
        sys_time = float(rec.system_time)
        total_gap += gap
        total_area += 0.5 * gap * gap + gap * sys_time
        count += 1
    if count == 0:
        raise ValueError("cannot average an empty batch of cycle records")
    return total_area / total_gap - 0.5

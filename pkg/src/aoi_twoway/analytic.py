"""Closed-form average age of information for the fixed request policies.

Three request disciplines admit exact expressions:

* ``zw1`` — send a new request the moment the loop is empty, at most one
  update in flight.
* ``zw2`` — keep up to two requests/updates in flight, re-requesting as soon
  as fewer than two are active.
* ``wait1`` — like ``zw1`` but insert a deliberate pause after each delivery
  so that consecutive deliveries are at least ``beta`` slots apart at the
  sampler.

Every result is packaged as an :class:`AoiBreakdown` carrying the first two
interarrival moments and the interarrival/system-time cross term, which pin
the average age through the sawtooth-area identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ServiceRates

__all__ = [
    "WaitThreshold",
    "AoiBreakdown",
    "aoi_zw1",
    "p_busy",
    "expected_x_given_busy",
    "aoi_zw2",
    "mean_wait",
    "ezy",
    "ez2",
    "aoi_wait1",
    "beta_max",
    "optimal_beta",
    "zw2_beats_zw1",
    "waiting_beneficial",
    "sweep_grid",
]


@dataclass(frozen=True)
class WaitThreshold:
    """Minimum spacing (slots) enforced between consecutive request sends."""

    beta: int

    def __post_init__(self) -> None:
        if self.beta < 1:
            raise ValueError(f"wait threshold must be >= 1, got {self.beta}")


@dataclass(frozen=True)
class AoiBreakdown:
    """Interarrival moments and average age for one policy at one rate pair.

    Satisfies ``average_aoi == (second_moment/2 + cross_term)/mean_interarrival - 1/2``
    up to floating-point error.
    """

    mean_interarrival: float
    second_moment: float
    cross_term: float
    average_aoi: float


def _pow_int(base: float, exponent: int) -> float:
    # Exponentiation by squaring: deterministic across platforms, exact for
    # exponent 0/1, and free of libm pow quirks in long beta sweeps.
    if exponent < 0:
        raise ValueError("exponent must be nonnegative")
    result = 1.0
    term = base
    e = exponent
    while e > 0:
        if e & 1:
            result *= term
        term *= term
        e >>= 1
    return result


def aoi_zw1(rates: ServiceRates) -> AoiBreakdown:
    """Average age under the one-in-flight zero-wait discipline."""
    g, m = rates.gamma, rates.mu
    mean_i = 1.0 / m + 1.0 / g
    second = (2.0 - m) / (m * m) + (2.0 - g) / (g * g) + 2.0 / (m * g)
    cross = mean_i / m
    delta = 2.0 / m + m / (g * (m + g)) - 1.0
    return AoiBreakdown(mean_i, second, cross, delta)


def p_busy(rates: ServiceRates) -> float:
    """Probability that an update arrives while the forward server still
    serves its predecessor, under the two-in-flight discipline."""
    g, m = rates.gamma, rates.mu
    return g * (1.0 - m) / (m + g * (1.0 - m))


def expected_x_given_busy(rates: ServiceRates) -> float:
    """Mean residual request time given the arriving update found the forward
    server busy (two-in-flight discipline).  Undefined at ``mu == 1`` where
    the busy event has probability zero."""
    g, m = rates.gamma, rates.mu
    if m == 1.0:
        raise ValueError("busy arrivals have probability zero at mu = 1; "
                         "the conditional residual time is undefined")
    return 1.0 / (m + g * (1.0 - m))


def aoi_zw2(rates: ServiceRates) -> AoiBreakdown:
    """Average age under the two-in-flight zero-wait discipline."""
    g, m = rates.gamma, rates.mu
    pb = p_busy(rates)
    mean_i = 1.0 / g + pb / m
    second = (2.0 / g - 1.0) * mean_i + 2.0 * pb / (m * m)
    cross = mean_i / m + pb / (m * m)
    delta = (1.0 / g + 1.0 / m - 1.0
             + 2.0 * g * g * (1.0 - m)
             / (m * (g * (1.0 - m) * (g + m) + m * m)))
    return AoiBreakdown(mean_i, second, cross, delta)


def mean_wait(rates: ServiceRates, wait: WaitThreshold) -> float:
    """Mean inserted pause: E[(beta - Y)^+] for geometric service Y."""
    m = rates.mu
    b = wait.beta
    return (b * m + _pow_int(1.0 - m, b) - 1.0) / m


def ezy(rates: ServiceRates, wait: WaitThreshold) -> float:
    """Cross moment E[(beta - Y)^+ * Y] of pause and service time."""
    m = rates.mu
    b = wait.beta
    mbar_b = _pow_int(1.0 - m, b)
    return (m + b * m + mbar_b * (2.0 - m + b * m) - 2.0) / (m * m)


def ez2(rates: ServiceRates, wait: WaitThreshold) -> float:
    """Second moment E[((beta - Y)^+)^2] of the inserted pause."""
    m = rates.mu
    b = wait.beta
    mbar_b = _pow_int(1.0 - m, b)
    return -(m + 2.0 * b * m + mbar_b * (2.0 - m) - b * b * m * m - 2.0) / (m * m)


def aoi_wait1(rates: ServiceRates, wait: WaitThreshold) -> AoiBreakdown:
    """Average age under the one-in-flight discipline with inserted pauses.

    At ``beta == 1`` the pause is always zero and the result coincides with
    :func:`aoi_zw1`.
    """
    g, m = rates.gamma, rates.mu
    b = wait.beta
    mbar_b = _pow_int(1.0 - m, b)
    ez = mean_wait(rates, wait)
    mean_i = 1.0 / m + ez + 1.0 / g
    second = ((2.0 - m) / (m * m) + (2.0 - g) / (g * g) + 2.0 / (g * m)
              + 2.0 * ezy(rates, wait) + 2.0 * ez / g + ez2(rates, wait))
    cross = mean_i / m
    delta = ((b * m * (-b * g + g - 2.0) - 2.0 * (b * g + 1.0))
             / (2.0 * (g * (mbar_b + b * m) + m))
             + b + 1.0 / g + 2.0 / m - 1.0)
    return AoiBreakdown(mean_i, second, cross, delta)


def beta_max(rates: ServiceRates) -> int:
    """Largest spacing threshold that can still beat plain zero-wait.

    Beyond this value the pause-vs-freshness quadratic is positive, so no
    larger threshold can lower the average age; the search in
    :func:`optimal_beta` stops here.
    """
    g, m = rates.gamma, rates.mu
    a = m * m + g * m

    def q(b: int) -> float:
        return a * b * b + (a - 2.0 * g) * b - 2.0

    root = (2.0 * g + math.sqrt((a - 2.0 * g) ** 2 + 8.0 * a)) / (2.0 * a) - 0.5
    best = max(1, math.floor(root))
    # the root can land exactly on an integer (q == 0); nudge across any
    # floating-point noise so the boundary threshold is kept, not dropped
    tol = 1e-9 * max(1.0, a * best * best)
    while q(best + 1) <= tol:
        best += 1
    while best > 1 and q(best) > tol:
        best -= 1
    return best


def optimal_beta(rates: ServiceRates) -> tuple[int, float]:
    """Best spacing threshold and its average age.

    Exhaustive scan over ``1..beta_max``; ties resolve to the smaller
    threshold.
    """
    best_beta = 1
    best = aoi_wait1(rates, WaitThreshold(1)).average_aoi
    for b in range(2, beta_max(rates) + 1):
        value = aoi_wait1(rates, WaitThreshold(b)).average_aoi
        if value < best:
            best = value
            best_beta = b
    return best_beta, best


def zw2_beats_zw1(rates: ServiceRates) -> bool:
    """True where the two-in-flight discipline has average age no larger than
    the one-in-flight discipline."""
    g, m = rates.gamma, rates.mu
    mu_branch = m >= g * ((1.0 - g) + math.sqrt((g + 1.0) ** 2 + 4.0)) / (2.0 * (g + 1.0))
    gamma_branch = g <= m * (-(1.0 - m) + math.sqrt((1.0 - m) * (5.0 - m))) / (2.0 + (1.0 - m))
    return mu_branch or gamma_branch


def waiting_beneficial(rates: ServiceRates) -> bool:
    """True where some spacing threshold beta >= 2 strictly beats zero-wait."""
    g, m = rates.gamma, rates.mu
    mu_branch = m <= (-g + math.sqrt(g * g + 2.0 * g)) / 2.0
    # Equivalent rate form of the same boundary; only meaningful while the
    # denominator 1 - 2*mu stays positive.
    gamma_branch = m < 0.5 and g >= 2.0 * m * m / (1.0 - 2.0 * m)
    return mu_branch or gamma_branch


def sweep_grid(gammas, mus) -> list[dict]:
    """Evaluate every closed form over a rate grid.

    Returns one row dict per (gamma, mu) pair with keys matching the CSV
    schema used by the command-line ``analytic`` export.
    """
    rows = []
    for g in gammas:
        for m in mus:
            rates = ServiceRates(g, m)
            best_b, best_delta = optimal_beta(rates)
            rows.append({
                "gamma": g,
                "mu": m,
                "delta_zw1": aoi_zw1(rates).average_aoi,
                "delta_zw2": aoi_zw2(rates).average_aoi,
                "beta_star": best_b,
                "delta_wait1_star": best_delta,
                "zw2_beats_zw1": int(zw2_beats_zw1(rates)),
                "waiting_beneficial": int(waiting_beneficial(rates)),
            })
    return rows

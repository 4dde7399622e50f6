"""Decision process for the loop that allows one active request at a time.

State ``(aoi, ctrl_busy, smp_busy, smp_age)``: the controller-side age of the
freshest delivered sample, whether a request is in reverse-link service,
whether an update is in forward-link service, and — only while one is — the
age of the sample being forwarded.  Ages saturate at the cap so the space is
finite; the cost of a step is the expected next age.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import AgeCap, ServiceRates, cap_value, clamp_age
from .rvi import FiniteMdp, build_finite_mdp

__all__ = [
    "Action",
    "IDLE",
    "SEND",
    "State1P",
    "state_is_valid_1p",
    "n_states_1p",
    "state_index_1p",
    "enumerate_states_1p",
    "admissible_actions_1p",
    "transitions_1p",
    "expected_cost_1p",
    "build_mdp_1p",
]

Action = int
IDLE: Action = 0
SEND: Action = 1

DETERMINISTIC_RATES_MESSAGE = (
    "(gamma, mu) = (1, 1) is rejected: with both links deterministic every "
    "policy induces a periodic chain without a single recurrent class, so "
    "the average-cost fixed point is not well defined")


@dataclass(frozen=True)
class State1P:
    """One observable state of the single-request loop."""

    aoi: int
    ctrl_busy: int
    smp_busy: int
    smp_age: int | None = None


def state_is_valid_1p(state: State1P, cap: AgeCap | int) -> bool:
    """Structural validity: flags are bits, at most one stage is occupied,
    the forwarded-sample age exists exactly while the forward server is busy,
    and all ages respect the cap."""
    c = cap_value(cap)
    if not 1 <= state.aoi <= c:
        return False
    if state.ctrl_busy not in (0, 1) or state.smp_busy not in (0, 1):
        return False
    if state.ctrl_busy and state.smp_busy:
        return False
    if state.smp_busy:
        return state.smp_age is not None and 0 <= state.smp_age <= c
    return state.smp_age is None


def n_states_1p(cap: AgeCap | int) -> int:
    c = cap_value(cap)
    return c * (c + 3)


def state_index_1p(state: State1P, cap: AgeCap | int) -> int:
    """Position of ``state`` in the canonical enumeration order."""
    c = cap_value(cap)
    if state.smp_busy == 0:
        if state.ctrl_busy == 0:
            return state.aoi - 1
        return c + state.aoi - 1
    return 2 * c + (state.aoi - 1) * (c + 1) + state.smp_age


def enumerate_states_1p(cap: AgeCap | int) -> list[State1P]:
    """All states, ordered by occupancy family, then age, then sample age.

    The forwarded-sample age ranges over the full ``0..cap`` rectangle: the
    dynamics started from fresh states never produce ``smp_age > aoi``, but
    the solver does not rely on that and the rectangle keeps indexing
    arithmetic trivial.
    """
    c = cap_value(cap)
    states: list[State1P] = []
    for aoi in range(1, c + 1):
        states.append(State1P(aoi, 0, 0, None))
    for aoi in range(1, c + 1):
        states.append(State1P(aoi, 1, 0, None))
    for aoi in range(1, c + 1):
        for age in range(c + 1):
            states.append(State1P(aoi, 0, 1, age))
    return states


def admissible_actions_1p(state: State1P) -> tuple[Action, ...]:
    """Sending is allowed only while the whole loop is empty."""
    if state.ctrl_busy == 0 and state.smp_busy == 0:
        return (IDLE, SEND)
    return (IDLE,)


def _request_in_service_rows(aoi_next: int, rates: ServiceRates) -> dict[State1P, float]:
    # A request occupies the reverse link this slot: on completion the sample
    # it triggers enters forward service next slot at age zero.
    rows = {State1P(aoi_next, 0, 1, 0): rates.gamma}
    if rates.gamma < 1.0:
        rows[State1P(aoi_next, 1, 0, None)] = rates.gamma_bar
    return rows


def transitions_1p(state: State1P, action: Action, rates: ServiceRates,
                   cap: AgeCap | int) -> dict[State1P, float]:
    """Exact one-step successor distribution (zero-probability rows omitted)."""
    c = cap_value(cap)
    if not state_is_valid_1p(state, c):
        raise ValueError(f"invalid state {state!r} for cap {c}")
    if action not in admissible_actions_1p(state):
        raise ValueError(f"action {action} not admissible in {state!r}")
    aoi_next = clamp_age(state.aoi, c)

    if state.smp_busy:
        fresh = clamp_age(state.smp_age, c)
        rows = {State1P(fresh, 0, 0, None): rates.mu}
        if rates.mu < 1.0:
            rows[State1P(aoi_next, 0, 1, fresh)] = rates.mu_bar
        return rows
    if state.ctrl_busy or action == SEND:
        return _request_in_service_rows(aoi_next, rates)
    return {State1P(aoi_next, 0, 0, None): 1.0}


def _expected_next_aoi(transitions: dict) -> float:
    total = 0.0
    for succ, prob in transitions.items():
        total += prob * succ.aoi
    return total


def expected_cost_1p(state: State1P, action: Action, rates: ServiceRates,
                     cap: AgeCap | int) -> float:
    """One-step cost: the expected age after the transition."""
    return _expected_next_aoi(transitions_1p(state, action, rates, cap))


def build_mdp_1p(rates: ServiceRates, cap: AgeCap | int) -> FiniteMdp:
    """Compile the full decision process for the average-cost solver."""
    if rates.deterministic:
        raise ValueError(DETERMINISTIC_RATES_MESSAGE)
    c = cap_value(cap)
    return build_finite_mdp(
        enumerate_states_1p(c),
        admissible_actions_1p,
        lambda s, a: transitions_1p(s, a, rates, c),
        lambda s, a, trans: _expected_next_aoi(trans),
    )

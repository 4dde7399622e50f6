"""Decision process for the loop that allows two active requests at a time.

State ``(aoi, ctrl_buf, ctrl_busy, smp_buf, smp_busy, buf_age, smp_age)``:
besides the controller-side age, each link has a single-slot buffer in front
of its server, so at most two requests/updates are in flight.  Only six
occupancy patterns are reachable; updates queue in order, so a buffered
sample is always younger than the one in service (``buf_age <= smp_age``).
The step cost is again the expected next age.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import AgeCap, ServiceRates, cap_value, clamp_age
from .mdp_one import Action, IDLE, SEND, DETERMINISTIC_RATES_MESSAGE
from .rvi import FiniteMdp, build_finite_mdp

__all__ = [
    "State2P",
    "FAMILIES",
    "family_of",
    "state_is_valid_2p",
    "n_states_2p",
    "state_index_2p",
    "enumerate_states_2p",
    "admissible_actions_2p",
    "transitions_2p",
    "expected_cost_2p",
    "build_mdp_2p",
]

# Reachable occupancy patterns (ctrl_buf, ctrl_busy, smp_buf, smp_busy), in
# canonical enumeration order.
FAMILIES: tuple[tuple[int, int, int, int], ...] = (
    (0, 0, 0, 0),
    (1, 1, 0, 0),
    (0, 1, 0, 0),
    (0, 1, 0, 1),
    (0, 0, 1, 1),
    (0, 0, 0, 1),
)


@dataclass(frozen=True)
class State2P:
    """One observable state of the two-request loop."""

    aoi: int
    ctrl_buf: int
    ctrl_busy: int
    smp_buf: int
    smp_busy: int
    buf_age: int | None = None
    smp_age: int | None = None


def family_of(state: State2P) -> int:
    """Index of the state's occupancy pattern in :data:`FAMILIES`."""
    key = (state.ctrl_buf, state.ctrl_busy, state.smp_buf, state.smp_busy)
    try:
        return FAMILIES.index(key)
    except ValueError:
        raise ValueError(f"unreachable occupancy pattern {key} in {state!r}") from None


def state_is_valid_2p(state: State2P, cap: AgeCap | int) -> bool:
    """Structural validity: a reachable occupancy pattern, ages tracked
    exactly for the stages that hold an update, and a buffered sample no
    older than the one in service."""
    c = cap_value(cap)
    if not 1 <= state.aoi <= c:
        return False
    key = (state.ctrl_buf, state.ctrl_busy, state.smp_buf, state.smp_busy)
    if key not in FAMILIES:
        return False
    if state.smp_busy:
        if state.smp_age is None or not 0 <= state.smp_age <= c:
            return False
    elif state.smp_age is not None:
        return False
    if state.smp_buf:
        if state.buf_age is None or not 0 <= state.buf_age <= c:
            return False
        if state.buf_age > state.smp_age:
            return False
    elif state.buf_age is not None:
        return False
    return True


def _triangle_size(c: int) -> int:
    return (c + 1) * (c + 2) // 2


def _triangle_index(low: int, high: int, c: int) -> int:
    # Pairs (low, high) with 0 <= low <= high <= c, ordered lexicographically.
    return low * (c + 1) - low * (low - 1) // 2 + (high - low)


def n_states_2p(cap: AgeCap | int) -> int:
    c = cap_value(cap)
    return c * (3 + 2 * (c + 1) + _triangle_size(c))


def state_index_2p(state: State2P, cap: AgeCap | int) -> int:
    """Position of ``state`` in the canonical enumeration order."""
    c = cap_value(cap)
    ages = c + 1
    if state.smp_busy == 0:
        if state.ctrl_buf == 1:
            return c + state.aoi - 1
        if state.ctrl_busy == 1:
            return 2 * c + state.aoi - 1
        return state.aoi - 1
    if state.ctrl_busy == 1:
        return 3 * c + (state.aoi - 1) * ages + state.smp_age
    base = 3 * c + c * ages
    if state.smp_buf == 1:
        return (base + (state.aoi - 1) * _triangle_size(c)
                + _triangle_index(state.buf_age, state.smp_age, c))
    return base + c * _triangle_size(c) + (state.aoi - 1) * ages + state.smp_age


def enumerate_states_2p(cap: AgeCap | int) -> list[State2P]:
    """All states, ordered by family, then age, then tracked sample ages."""
    c = cap_value(cap)
    states: list[State2P] = []
    for aoi in range(1, c + 1):
        states.append(State2P(aoi, 0, 0, 0, 0))
    for aoi in range(1, c + 1):
        states.append(State2P(aoi, 1, 1, 0, 0))
    for aoi in range(1, c + 1):
        states.append(State2P(aoi, 0, 1, 0, 0))
    for aoi in range(1, c + 1):
        for age in range(c + 1):
            states.append(State2P(aoi, 0, 1, 0, 1, None, age))
    for aoi in range(1, c + 1):
        for low in range(c + 1):
            for high in range(low, c + 1):
                states.append(State2P(aoi, 0, 0, 1, 1, low, high))
    for aoi in range(1, c + 1):
        for age in range(c + 1):
            states.append(State2P(aoi, 0, 0, 0, 1, None, age))
    return states


def admissible_actions_2p(state: State2P) -> tuple[Action, ...]:
    """Sending is allowed while fewer than two requests/updates are active."""
    active = state.ctrl_buf + state.ctrl_busy + state.smp_buf + state.smp_busy
    if active < 2:
        return (IDLE, SEND)
    return (IDLE,)


def _single_request_rows(aoi_next: int, rates: ServiceRates) -> dict[State2P, float]:
    # One request on the reverse link, sampler side empty.
    rows = {State2P(aoi_next, 0, 0, 0, 1, None, 0): rates.gamma}
    if rates.gamma < 1.0:
        rows[State2P(aoi_next, 0, 1, 0, 0)] = rates.gamma_bar
    return rows


def _request_pair_rows(aoi_next: int, rates: ServiceRates) -> dict[State2P, float]:
    # Two requests on the reverse link (server + buffer); the buffered one
    # moves up when the first completes.
    rows = {State2P(aoi_next, 0, 1, 0, 1, None, 0): rates.gamma}
    if rates.gamma < 1.0:
        rows[State2P(aoi_next, 1, 1, 0, 0)] = rates.gamma_bar
    return rows


def _request_and_update_rows(aoi_next: int, age_next: int,
                             rates: ServiceRates) -> dict[State2P, float]:
    # One request in reverse service and one update in forward service; the
    # four completion combinations each land in a different family.
    g, m = rates.gamma, rates.mu
    rows: dict[State2P, float] = {}
    if g < 1.0 and m < 1.0:
        rows[State2P(aoi_next, 0, 1, 0, 1, None, age_next)] = rates.gamma_bar * rates.mu_bar
    if m < 1.0:
        rows[State2P(aoi_next, 0, 0, 1, 1, 0, age_next)] = g * rates.mu_bar
    if g < 1.0:
        rows[State2P(age_next, 0, 1, 0, 0)] = rates.gamma_bar * m
    rows[State2P(age_next, 0, 0, 0, 1, None, 0)] = g * m
    return rows


def transitions_2p(state: State2P, action: Action, rates: ServiceRates,
                   cap: AgeCap | int) -> dict[State2P, float]:
    """Exact one-step successor distribution (zero-probability rows omitted)."""
    c = cap_value(cap)
    if not state_is_valid_2p(state, c):
        raise ValueError(f"invalid state {state!r} for cap {c}")
    if action not in admissible_actions_2p(state):
        raise ValueError(f"action {action} not admissible in {state!r}")
    family = family_of(state)
    aoi_next = clamp_age(state.aoi, c)

    if family == 0:  # everything empty
        if action == IDLE:
            return {State2P(aoi_next, 0, 0, 0, 0): 1.0}
        return _single_request_rows(aoi_next, rates)
    if family == 1:  # two requests on the reverse link
        return _request_pair_rows(aoi_next, rates)
    if family == 2:  # one request in reverse service
        if action == SEND:
            return _request_pair_rows(aoi_next, rates)
        return _single_request_rows(aoi_next, rates)
    if family == 3:  # request in reverse service + update in forward service
        return _request_and_update_rows(aoi_next, clamp_age(state.smp_age, c), rates)
    if family == 4:  # update in forward service + one queued behind it
        fresh = clamp_age(state.smp_age, c)
        promoted = clamp_age(state.buf_age, c)
        rows = {State2P(fresh, 0, 0, 0, 1, None, promoted): rates.mu}
        if rates.mu < 1.0:
            rows[State2P(aoi_next, 0, 0, 1, 1, promoted, fresh)] = rates.mu_bar
        return rows
    # family 5: update in forward service only
    age_next = clamp_age(state.smp_age, c)
    if action == SEND:
        return _request_and_update_rows(aoi_next, age_next, rates)
    rows = {}
    if rates.mu < 1.0:
        rows[State2P(aoi_next, 0, 0, 0, 1, None, age_next)] = rates.mu_bar
    rows[State2P(age_next, 0, 0, 0, 0)] = rates.mu
    return rows


def _expected_next_aoi(transitions: dict) -> float:
    total = 0.0
    for succ, prob in transitions.items():
        total += prob * succ.aoi
    return total


def expected_cost_2p(state: State2P, action: Action, rates: ServiceRates,
                     cap: AgeCap | int) -> float:
    """One-step cost: the expected age after the transition."""
    return _expected_next_aoi(transitions_2p(state, action, rates, cap))


def build_mdp_2p(rates: ServiceRates, cap: AgeCap | int) -> FiniteMdp:
    """Compile the full decision process for the average-cost solver."""
    if rates.deterministic:
        raise ValueError(DETERMINISTIC_RATES_MESSAGE)
    c = cap_value(cap)
    return build_finite_mdp(
        enumerate_states_2p(c),
        admissible_actions_2p,
        lambda s, a: transitions_2p(s, a, rates, c),
        lambda s, a, trans: _expected_next_aoi(trans),
    )

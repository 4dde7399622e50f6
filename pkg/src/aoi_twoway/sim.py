"""Seeded slot-level simulation of the two-server status-update loop.

The slot loop is compiled with numba and drives both system sizes: at the
start of each slot the request policy observes the state and may inject one
request; busy servers then complete independently with their per-slot
probabilities.  A request completing in slot ``t`` samples the source so the
sample sits in the forward stage with age zero at slot ``t+1``; an update
completing in slot ``t`` resets the controller-side age at slot ``t+1`` to
the sample's age plus one.

Randomness comes from a self-contained 64-bit SplitMix generator seeded
directly with the run's seed, so results are bit-for-bit reproducible across
runs, platforms, and compiler versions.  Time averages cover slots
``warmup <= t < horizon``; delivery cycles count once their delivery slot
passes the warmup.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

from .analytic import WaitThreshold
from .core import AgeCap, CycleRecord, ServiceRates, cap_value
from .mdp_one import (admissible_actions_1p, enumerate_states_1p,
                      n_states_1p, transitions_1p)
from .mdp_two import (admissible_actions_2p, enumerate_states_2p,
                      n_states_2p, transitions_2p)
from .rvi import Solution

__all__ = [
    "SystemConfig",
    "PolicySpec",
    "SimResult",
    "Trajectory",
    "KernelCheckReport",
    "run_simulation",
    "run_table_policy",
    "simulate_trajectory",
    "extract_cycles",
    "empirical_kernel_check",
    "write_trajectory_csv",
]

_KIND_ZW1 = 0
_KIND_ZW2 = 1
_KIND_WAIT1 = 2
_KIND_TABLE = 3

_EMPTY_I64 = np.empty(0, dtype=np.int64)
_EMPTY_I8 = np.empty(0, dtype=np.int8)
_EMPTY_SUCC = np.empty((0, 2, 4), dtype=np.int64)
_EMPTY_COUNTS = np.empty((0, 2, 5), dtype=np.int64)


@dataclass(frozen=True)
class SystemConfig:
    """Physical and run-length parameters of one simulation."""

    rates: ServiceRates
    capacity: int = 1
    horizon: int = 1_000_000
    warmup: int = 1_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.capacity not in (1, 2):
            raise ValueError(f"capacity must be 1 or 2, got {self.capacity}")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")
        if self.horizon <= self.warmup:
            raise ValueError("horizon must exceed warmup")


@dataclass(frozen=True)
class PolicySpec:
    """Which request discipline the simulated controller follows."""

    variant: str
    wait: WaitThreshold | None = None
    table: np.ndarray | None = None
    table_cap: int | None = None
    table_capacity: int | None = None

    @staticmethod
    def zw1() -> "PolicySpec":
        """Send whenever the loop is empty (one in flight)."""
        return PolicySpec("zw1")

    @staticmethod
    def zw2() -> "PolicySpec":
        """Send whenever fewer than two requests/updates are active."""
        return PolicySpec("zw2")

    @staticmethod
    def wait1(wait: WaitThreshold) -> "PolicySpec":
        """One in flight, with deliveries spaced at least ``beta`` apart."""
        return PolicySpec("wait1", wait=wait)

    @staticmethod
    def from_solution(solution: Solution, cap: AgeCap | int,
                      capacity: int) -> "PolicySpec":
        """Follow a solved state-feedback table on the capped observation."""
        return PolicySpec("table",
                          table=np.asarray(solution.policy, dtype=np.int8),
                          table_cap=cap_value(cap),
                          table_capacity=capacity)


@dataclass(frozen=True)
class SimResult:
    """Post-warmup estimators of one run.

    ``time_avg_aoi`` averages the instantaneous age over counted slots;
    ``cycle_aoi`` rebuilds the same quantity from per-delivery cycles via the
    sawtooth-area identity.  ``busy_fraction`` is the share of updates that
    found the forward server still serving their predecessor (NaN when no
    update arrived).
    """

    time_avg_aoi: float
    cycle_aoi: float
    cycles: int
    mean_interarrival: float
    mean_interarrival_sq: float
    mean_cross: float
    busy_fraction: float
    seed: int
    horizon: int
    warmup: int


@dataclass(frozen=True)
class Trajectory:
    """Per-slot recording of a run; absent ages are stored as -1."""

    aoi: np.ndarray
    ctrl_buf: np.ndarray
    ctrl_busy: np.ndarray
    smp_buf: np.ndarray
    smp_busy: np.ndarray
    buf_age: np.ndarray
    smp_age: np.ndarray
    action: np.ndarray
    delivered: np.ndarray


@dataclass(frozen=True)
class KernelCheckReport:
    """Outcome of comparing simulated transition frequencies to a kernel."""

    cells_tested: int
    flagged: tuple
    inconclusive: int
    support_violations: int

    @property
    def flagged_count(self) -> int:
        return len(self.flagged)

    @property
    def flagged_fraction(self) -> float:
        if self.cells_tested == 0:
            return 0.0
        return len(self.flagged) / self.cells_tested


@njit(cache=True, inline="always")
def _mix64(state):
    # SplitMix64: one 64-bit state, full-period, passes BigCrush; tiny and
    # identical on every platform, which keeps seeded runs bit-stable.
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True, inline="always")
def _to_uniform(z):
    return np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _index_1p(aoi, ctrl_busy, smp_busy, smp_age, cap):
    if smp_busy == 0:
        if ctrl_busy == 0:
            return aoi - 1
        return cap + aoi - 1
    return 2 * cap + (aoi - 1) * (cap + 1) + smp_age


@njit(cache=True)
def _index_2p(aoi, ctrl_buf, ctrl_busy, smp_buf, smp_busy, buf_age, smp_age, cap):
    if smp_busy == 0:
        if ctrl_buf == 1:
            return cap + aoi - 1
        if ctrl_busy == 1:
            return 2 * cap + aoi - 1
        return aoi - 1
    ages = cap + 1
    if ctrl_busy == 1:
        return 3 * cap + (aoi - 1) * ages + smp_age
    tri = (cap + 1) * (cap + 2) // 2
    base = 3 * cap + cap * ages
    if smp_buf == 1:
        return (base + (aoi - 1) * tri
                + buf_age * (cap + 1) - buf_age * (buf_age - 1) // 2
                + (smp_age - buf_age))
    return base + cap * tri + (aoi - 1) * ages + smp_age


@njit(cache=True)
def _run_slots(gamma, mu, capacity, horizon, warmup, seed,
               kind, beta, table, obs_cap,
               rec_aoi, rec_cb, rec_cs, rec_sb, rec_ss,
               rec_ba, rec_sa, rec_act, rec_del,
               succ_idx, counts):
    rng_state = seed

    aoi = 1
    ctrl_buf = 0
    ctrl_busy = 0
    smp_buf = 0
    smp_busy = 0
    buf_age = -1
    smp_age = -1

    earliest_send = 0
    prev_gen = 0
    have_prev_gen = False

    aoi_sum = 0.0
    n_cycles = 0
    sum_i = 0.0
    sum_i2 = 0.0
    sum_it = 0.0
    arrivals = 0
    busy_arrivals = 0

    recording = rec_aoi.size > 0
    counting = counts.shape[0] > 0
    prev_sidx = -1
    prev_action = 0
    delivered_prev = 0

    for t in range(horizon):
        active = ctrl_buf + ctrl_busy + smp_buf + smp_busy

        sidx = -1
        if kind == 3 or counting:
            o_aoi = aoi if aoi < obs_cap else obs_cap
            o_smp = smp_age if smp_age < obs_cap else obs_cap
            o_buf = buf_age if buf_age < obs_cap else obs_cap
            if capacity == 1:
                sidx = _index_1p(o_aoi, ctrl_busy, smp_busy, o_smp, obs_cap)
            else:
                sidx = _index_2p(o_aoi, ctrl_buf, ctrl_busy, smp_buf, smp_busy,
                                 o_buf, o_smp, obs_cap)

        if kind == 0:
            action = 1 if active == 0 else 0
        elif kind == 1:
            action = 1 if active < 2 else 0
        elif kind == 2:
            action = 1 if (active == 0 and t >= earliest_send) else 0
        else:
            action = int(table[sidx])
        if action == 1 and active >= capacity:
            action = 0

        if counting and t > warmup and prev_sidx >= 0:
            hit = 4
            for k in range(4):
                if succ_idx[prev_sidx, prev_action, k] == sidx:
                    hit = k
                    break
            counts[prev_sidx, prev_action, hit] += 1

        if recording:
            rec_aoi[t] = aoi
            rec_cb[t] = ctrl_buf
            rec_cs[t] = ctrl_busy
            rec_sb[t] = smp_buf
            rec_ss[t] = smp_busy
            rec_ba[t] = buf_age
            rec_sa[t] = smp_age
            rec_act[t] = action
            rec_del[t] = delivered_prev

        if t >= warmup:
            aoi_sum += aoi

        if action == 1:
            if ctrl_busy == 0:
                ctrl_busy = 1
            else:
                ctrl_buf = 1

        ctrl_done = False
        smp_done = False
        if ctrl_busy == 1:
            rng_state, z = _mix64(rng_state)
            ctrl_done = _to_uniform(z) < gamma
        if smp_busy == 1:
            rng_state, z = _mix64(rng_state)
            smp_done = _to_uniform(z) < mu

        delivered_prev = 0
        new_aoi = aoi + 1
        if smp_done:
            sys_time = smp_age + 1
            gen = (t + 1) - sys_time
            new_aoi = sys_time
            delivered_prev = 1
            if have_prev_gen and (t + 1) > warmup:
                gap = float(gen - prev_gen)
                n_cycles += 1
                sum_i += gap
                sum_i2 += gap * gap
                sum_it += gap * float(sys_time)
            prev_gen = gen
            have_prev_gen = True
            if kind == 2:
                pause = beta - sys_time
                if pause < 0:
                    pause = 0
                earliest_send = (t + 1) + pause
            if smp_buf == 1:
                smp_buf = 0
                smp_age = buf_age + 1
                buf_age = -1
            else:
                smp_busy = 0
                smp_age = -1
        else:
            if smp_busy == 1:
                smp_age += 1
            if smp_buf == 1:
                buf_age += 1

        if ctrl_done:
            if (t + 1) > warmup:
                arrivals += 1
            if smp_busy == 0:
                smp_busy = 1
                smp_age = 0
            else:
                smp_buf = 1
                buf_age = 0
                if (t + 1) > warmup:
                    busy_arrivals += 1
            ctrl_busy = ctrl_buf
            ctrl_buf = 0

        aoi = new_aoi
        prev_sidx = sidx
        prev_action = action

    return (aoi_sum, n_cycles, sum_i, sum_i2, sum_it,
            arrivals, busy_arrivals)


def _policy_code(config: SystemConfig, policy: PolicySpec) -> tuple[int, int, np.ndarray, int]:
    if policy.variant == "zw1":
        if config.capacity != 1:
            raise ValueError("the one-in-flight zero-wait policy needs capacity 1")
        return _KIND_ZW1, 1, _EMPTY_I8, 2
    if policy.variant == "zw2":
        if config.capacity != 2:
            raise ValueError("the two-in-flight zero-wait policy needs capacity 2")
        return _KIND_ZW2, 1, _EMPTY_I8, 2
    if policy.variant == "wait1":
        if config.capacity != 1:
            raise ValueError("the spaced-delivery policy needs capacity 1")
        if policy.wait is None:
            raise ValueError("wait1 policy needs a WaitThreshold")
        return _KIND_WAIT1, policy.wait.beta, _EMPTY_I8, 2
    if policy.variant == "table":
        if policy.table is None or policy.table_cap is None:
            raise ValueError("table policy needs a table and its age cap")
        if policy.table_capacity != config.capacity:
            raise ValueError(
                f"table was solved for capacity {policy.table_capacity}, "
                f"but the run is capacity {config.capacity}")
        expected = (n_states_1p(policy.table_cap) if config.capacity == 1
                    else n_states_2p(policy.table_cap))
        if policy.table.shape != (expected,):
            raise ValueError(
                f"table length {policy.table.shape} does not match the "
                f"capacity-{config.capacity} state space at cap {policy.table_cap}")
        return (_KIND_TABLE, 1,
                np.ascontiguousarray(policy.table, dtype=np.int8),
                policy.table_cap)
    raise ValueError(f"unknown policy variant {policy.variant!r}")


def _seed64(seed: int) -> np.uint64:
    return np.uint64(seed & 0xFFFFFFFFFFFFFFFF)


def _assemble(config: SystemConfig, raw) -> SimResult:
    aoi_sum, n_cycles, sum_i, sum_i2, sum_it, arrivals, busy_arrivals = raw
    slots = config.horizon - config.warmup
    time_avg = aoi_sum / slots
    if n_cycles > 0:
        mean_i = sum_i / n_cycles
        mean_i2 = sum_i2 / n_cycles
        mean_it = sum_it / n_cycles
        cycle_aoi = (0.5 * sum_i2 + sum_it) / sum_i - 0.5
    else:
        mean_i = mean_i2 = mean_it = cycle_aoi = float("nan")
    busy = busy_arrivals / arrivals if arrivals > 0 else float("nan")
    return SimResult(
        time_avg_aoi=time_avg,
        cycle_aoi=cycle_aoi,
        cycles=int(n_cycles),
        mean_interarrival=mean_i,
        mean_interarrival_sq=mean_i2,
        mean_cross=mean_it,
        busy_fraction=busy,
        seed=config.seed,
        horizon=config.horizon,
        warmup=config.warmup,
    )


def run_simulation(config: SystemConfig, policy: PolicySpec) -> SimResult:
    """Run one seeded simulation and return its post-warmup estimators."""
    kind, beta, table, obs_cap = _policy_code(config, policy)
    raw = _run_slots(config.rates.gamma, config.rates.mu, config.capacity,
                     config.horizon, config.warmup, _seed64(config.seed),
                     kind, beta, table, obs_cap,
                     _EMPTY_I64, _EMPTY_I64, _EMPTY_I64, _EMPTY_I64,
                     _EMPTY_I64, _EMPTY_I64, _EMPTY_I64, _EMPTY_I64,
                     _EMPTY_I64, _EMPTY_SUCC, _EMPTY_COUNTS)
    return _assemble(config, raw)


def run_table_policy(config: SystemConfig, solution: Solution,
                     cap: AgeCap | int) -> SimResult:
    """Simulate a solved state-feedback table on its matching capacity."""
    policy = PolicySpec.from_solution(solution, cap, config.capacity)
    return run_simulation(config, policy)


def simulate_trajectory(config: SystemConfig,
                        policy: PolicySpec) -> tuple[Trajectory, SimResult]:
    """Run with full per-slot recording (memory scales with the horizon)."""
    kind, beta, table, obs_cap = _policy_code(config, policy)
    h = config.horizon
    arrays = [np.empty(h, dtype=np.int64) for _ in range(9)]
    raw = _run_slots(config.rates.gamma, config.rates.mu, config.capacity,
                     config.horizon, config.warmup, _seed64(config.seed),
                     kind, beta, table, obs_cap,
                     *arrays, _EMPTY_SUCC, _EMPTY_COUNTS)
    traj = Trajectory(*arrays)
    return traj, _assemble(config, raw)


def extract_cycles(trajectory: Trajectory) -> list[CycleRecord]:
    """Rebuild delivery cycles from a recorded trajectory.

    The age at a delivery slot equals the delivered sample's system time, and
    the slot minus that age is its generation instant; gaps between
    consecutive generation instants are the interarrivals.  Needs at least
    two deliveries.
    """
    slots = np.flatnonzero(trajectory.delivered == 1)
    if slots.size < 2:
        raise ValueError(
            f"need at least two deliveries to form a cycle, got {slots.size}")
    sys_times = trajectory.aoi[slots]
    gens = slots - sys_times
    records = []
    for k in range(1, slots.size):
        records.append(CycleRecord(int(gens[k] - gens[k - 1]),
                                   int(sys_times[k])))
    return records


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Dump a recorded trajectory, one row per slot; absent ages are blank."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slot", "aoi", "ctrl_buf", "ctrl_busy", "smp_buf",
                         "smp_busy", "buf_age", "smp_age", "action",
                         "delivered"])
        for t in range(trajectory.aoi.size):
            buf_age = trajectory.buf_age[t]
            smp_age = trajectory.smp_age[t]
            writer.writerow([
                t, int(trajectory.aoi[t]),
                int(trajectory.ctrl_buf[t]), int(trajectory.ctrl_busy[t]),
                int(trajectory.smp_buf[t]), int(trajectory.smp_busy[t]),
                "" if buf_age < 0 else int(buf_age),
                "" if smp_age < 0 else int(smp_age),
                int(trajectory.action[t]), int(trajectory.delivered[t]),
            ])


def _kernel_tables(config: SystemConfig, cap: int):
    """Successor-id and probability tables of the exact kernel, indexed by
    (state_id, action, row)."""
    rates = config.rates
    if config.capacity == 1:
        states = enumerate_states_1p(cap)
        admissible = admissible_actions_1p
        transitions = lambda s, a: transitions_1p(s, a, rates, cap)
        index_of = {s: i for i, s in enumerate(states)}
    else:
        states = enumerate_states_2p(cap)
        admissible = admissible_actions_2p
        transitions = lambda s, a: transitions_2p(s, a, rates, cap)
        index_of = {s: i for i, s in enumerate(states)}
    n = len(states)
    succ_idx = np.full((n, 2, 4), -1, dtype=np.int64)
    succ_prob = np.zeros((n, 2, 4))
    for i, s in enumerate(states):
        for a in admissible(s):
            for k, (succ, prob) in enumerate(transitions(s, a).items()):
                succ_idx[i, a, k] = index_of[succ]
                succ_prob[i, a, k] = prob
    return succ_idx, succ_prob


def empirical_kernel_check(config: SystemConfig, policy: PolicySpec,
                           cap: AgeCap | int, *, confidence: float = 0.99,
                           min_expected: float = 5.0) -> KernelCheckReport:
    """Compare simulated one-step transition frequencies to the exact kernel.

    Counts capped-observation transitions per (state, action) over the
    post-warmup trajectory, then runs a goodness-of-fit test per cell at the
    given confidence.  Cells whose expected counts are too small for the test
    are reported as inconclusive rather than tested; any observed transition
    outside the kernel's support flags its cell outright.
    """
    c = cap_value(cap)
    kind, beta, table, obs_cap = _policy_code(config, policy)
    if policy.variant == "table" and obs_cap != c:
        raise ValueError("kernel check cap must match the table's cap")
    obs_cap = c
    succ_idx, succ_prob = _kernel_tables(config, c)
    counts = np.zeros((succ_idx.shape[0], 2, 5), dtype=np.int64)
    _run_slots(config.rates.gamma, config.rates.mu, config.capacity,
               config.horizon, config.warmup, _seed64(config.seed),
               kind, beta, table, obs_cap,
               _EMPTY_I64, _EMPTY_I64, _EMPTY_I64, _EMPTY_I64,
               _EMPTY_I64, _EMPTY_I64, _EMPTY_I64, _EMPTY_I64,
               _EMPTY_I64, succ_idx, counts)

    cells_tested = 0
    inconclusive = 0
    support_violations = 0
    flagged = []
    visited = np.flatnonzero(counts.sum(axis=2).ravel())
    for flat in visited:
        i, a = divmod(int(flat), 2)
        row_counts = counts[i, a]
        support = succ_idx[i, a] >= 0
        k = int(support.sum())
        observed = row_counts[:4][support]
        total = int(row_counts.sum())
        if row_counts[4] > 0 or (k == 0 and total > 0):
            support_violations += 1
            cells_tested += 1
            flagged.append((i, a))
            continue
        probs = succ_prob[i, a][support]
        expected = total * probs
        if k == 1:
            cells_tested += 1
            continue
        if expected.min() < min_expected:
            inconclusive += 1
            continue
        statistic = float(((observed - expected) ** 2 / expected).sum())
        threshold = float(stats.chi2.ppf(confidence, k - 1))
        cells_tested += 1
        if statistic > threshold:
            flagged.append((i, a))
    return KernelCheckReport(
        cells_tested=cells_tested,
        flagged=tuple(flagged),
        inconclusive=inconclusive,
        support_violations=support_violations,
    )

"""Average-cost solver for finite decision processes.

Holds the generic pieces shared by both system sizes: the compiled
:class:`FiniteMdp` representation (per-action sparse kernels and cost
vectors), relative value iteration for the optimal gain/bias/policy, exact
stationary evaluation of a fixed policy, and CSV exports of kernels and
solutions.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

__all__ = [
    "FiniteMdp",
    "SolveConfig",
    "Solution",
    "ConvergenceError",
    "ChainStructureError",
    "MdpInvariantError",
    "build_finite_mdp",
    "solve_rvi",
    "evaluate_policy_exact",
    "write_kernel_csv",
    "write_solution_csv",
    "DEFAULT_AGE_CAP",
    "DEFAULT_EPSILON",
    "PRECISE_AGE_CAP",
    "PRECISE_EPSILON",
]

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12

# Everyday preset: plenty for policy structure and sub-percent gains.
DEFAULT_AGE_CAP = 50
DEFAULT_EPSILON = 5e-4
# High-precision preset for comparisons against closed forms.
PRECISE_AGE_CAP = 100
PRECISE_EPSILON = 1e-6

_PROGRESS_EVERY = 1000


class MdpInvariantError(ValueError):
    """A structural invariant of the decision process failed at build time."""


class ConvergenceError(RuntimeError):
    """Value iteration hit its iteration budget before the span tolerance."""

    def __init__(self, message: str, span: float, iterations: int) -> None:
        super().__init__(message)
        self.span = span
        self.iterations = iterations


class ChainStructureError(RuntimeError):
    """The chain induced by a fixed policy is not unichain (or is otherwise
    degenerate), so its stationary distribution is not well defined."""


@dataclass(frozen=True)
class SolveConfig:
    """Tolerances and bookkeeping knobs for relative value iteration."""

    epsilon: float = DEFAULT_EPSILON
    reference_state: int = 0
    max_iterations: int = 10 ** 6

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.reference_state < 0:
            raise ValueError("reference_state must be a valid state id")


@dataclass(frozen=True)
class FiniteMdp:
    """A finite average-cost decision process in compiled form.

    ``kernels[a]`` is a CSR matrix whose row ``s`` is the successor
    distribution of action ``a`` in state ``s`` (all-zero when ``a`` is not
    admissible there); ``costs[a][s]`` is the one-step cost (``+inf`` when
    inadmissible).  Instances are immutable after construction and safe to
    share across threads.
    """

    states: tuple
    admissible: np.ndarray
    kernels: tuple
    costs: tuple
    index: dict

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.kernels)

    def actions_of(self, state_id: int) -> tuple[int, ...]:
        return tuple(int(a) for a in np.flatnonzero(self.admissible[state_id]))


@dataclass(frozen=True)
class Solution:
    """Output of :func:`solve_rvi`: greedy policy, gain, and bias vector.

    ``span`` is the spread (max minus min) of the one-step value
    improvements at the final sweep; ``residual`` is the Bellman residual
    of the returned (policy, gain, bias) triple, which equals ``span / 2``
    and is therefore at most ``epsilon / 2``.
    """

    policy: np.ndarray
    gain: float
    bias: np.ndarray
    iterations: int
    span: float
    residual: float
    epsilon: float
    reference_state: int


def build_finite_mdp(
    states: Sequence[Hashable],
    admissible_fn: Callable[[Hashable], Iterable[int]],
    transitions_fn: Callable[[Hashable, int], dict],
    cost_fn: Callable[[Hashable, int, dict], float],
    n_actions: int = 2,
) -> FiniteMdp:
    """Compile callables into a :class:`FiniteMdp`, checking invariants.

    Every state needs at least one admissible action, successors must stay
    inside the state list, and each transition row must sum to one within
    ``ROW_SUM_TOL``.
    """
    state_tuple = tuple(states)
    index = {s: i for i, s in enumerate(state_tuple)}
    n = len(state_tuple)
    if len(index) != n:
        raise MdpInvariantError("duplicate states in enumeration")
    if n == 0:
        raise MdpInvariantError("empty state space")

    admissible = np.zeros((n, n_actions), dtype=bool)
    costs = [np.full(n, np.inf) for _ in range(n_actions)]
    rows: list[list[int]] = [[] for _ in range(n_actions)]
    cols: list[list[int]] = [[] for _ in range(n_actions)]
    vals: list[list[float]] = [[] for _ in range(n_actions)]

    for i, s in enumerate(state_tuple):
        actions = tuple(admissible_fn(s))
        if not actions:
            raise MdpInvariantError(f"state {s!r} has no admissible action")
        for a in actions:
            if not 0 <= a < n_actions:
                raise MdpInvariantError(f"action {a} out of range for state {s!r}")
            trans = transitions_fn(s, a)
            total = 0.0
            for succ, prob in trans.items():
                j = index.get(succ)
                if j is None:
                    raise MdpInvariantError(
                        f"transition from {s!r} under action {a} leaves the "
                        f"state space (successor {succ!r})")
                if prob < 0.0:
                    raise MdpInvariantError(
                        f"negative probability {prob} from {s!r} action {a}")
                rows[a].append(i)
                cols[a].append(j)
                vals[a].append(prob)
                total += prob
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise MdpInvariantError(
                    f"transition row of {s!r} under action {a} sums to {total!r}")
            admissible[i, a] = True
            costs[a][i] = cost_fn(s, a, trans)

    kernels = tuple(
        sparse.csr_matrix(
            (np.asarray(vals[a]), (np.asarray(rows[a]), np.asarray(cols[a]))),
            shape=(n, n),
        )
        for a in range(n_actions)
    )
    return FiniteMdp(
        states=state_tuple,
        admissible=admissible,
        kernels=kernels,
        costs=tuple(costs),
        index=index,
    )


def _greedy(mdp: FiniteMdp, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous backup: per-state minimising action and its Q-value.

    ``np.argmin`` keeps the first minimiser, so exact ties resolve to the
    smaller action (idle before send).
    """
    q = np.empty((mdp.n_actions, mdp.n_states))
    for a in range(mdp.n_actions):
        q[a] = mdp.costs[a] + mdp.kernels[a].dot(values)
    policy = np.argmin(q, axis=0)
    return policy.astype(np.int8), np.min(q, axis=0)


def solve_rvi(mdp: FiniteMdp, config: SolveConfig | None = None) -> Solution:
    """Relative value iteration for the optimal average cost.

    Synchronous sweeps: each iteration backs up every state against the
    previous value vector and re-anchors at the reference state to keep the
    iterates bounded.  Convergence is certified by the spread (max minus
    min) of the one-step improvements ``T(v) - v``: once it drops to
    ``epsilon``, the optimal gain and the average cost of the final greedy
    policy both lie inside that spread, so reporting its midpoint bounds
    both errors by ``epsilon / 2``.  Raises :class:`ConvergenceError` if
    the iteration budget runs out.
    """
    cfg = config or SolveConfig()
    n = mdp.n_states
    if not 0 <= cfg.reference_state < n:
        raise ValueError(
            f"reference_state {cfg.reference_state} out of range for {n} states")

    values = np.zeros(n)
    policy = np.zeros(n, dtype=np.int8)
    span = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        policy, backed_up = _greedy(mdp, values)
        diff = backed_up - values
        lo, hi = float(diff.min()), float(diff.max())
        span = hi - lo
        if span <= cfg.epsilon:
            gain = (hi + lo) / 2.0
            residual = float(np.max(np.abs(diff - gain)))
            bias = values - values[cfg.reference_state]
            logger.debug(
                "rvi converged: %d iterations, gain %.6f, residual %.3e",
                iterations, gain, residual)
            return Solution(
                policy=policy,
                gain=gain,
                bias=bias,
                iterations=iterations,
                span=span,
                residual=residual,
                epsilon=cfg.epsilon,
                reference_state=cfg.reference_state,
            )
        values = backed_up - backed_up[cfg.reference_state]
        if iterations % _PROGRESS_EVERY == 0:
            logger.debug("rvi iteration %d span %.3e", iterations, span)

    raise ConvergenceError(
        f"no convergence after {cfg.max_iterations} iterations "
        f"(span {span:.3e} > epsilon {cfg.epsilon:.3e})",
        span=span,
        iterations=cfg.max_iterations,
    )


def _induced_chain(mdp: FiniteMdp, policy: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray]:
    pol = np.asarray(policy, dtype=np.int64)
    if pol.shape != (mdp.n_states,):
        raise ValueError("policy length does not match the state space")
    chain = None
    cost = np.empty(mdp.n_states)
    for a in range(mdp.n_actions):
        mask = pol == a
        if not np.any(mask):
            continue
        if not np.all(mdp.admissible[mask, a]):
            bad = int(np.flatnonzero(mask & ~mdp.admissible[:, a])[0])
            raise ValueError(
                f"policy picks inadmissible action {a} in state "
                f"{mdp.states[bad]!r}")
        selector = sparse.diags(mask.astype(float))
        part = selector.dot(mdp.kernels[a])
        chain = part if chain is None else chain + part
        cost[mask] = mdp.costs[a][mask]
    return chain.tocsr(), cost


def evaluate_policy_exact(mdp: FiniteMdp, policy: np.ndarray) -> float:
    """Exact average cost of a fixed policy via its stationary distribution.

    Verifies the induced chain has exactly one closed communicating class
    (unichain) before solving the stationary linear system; raises
    :class:`ChainStructureError` otherwise.
    """
    chain, cost = _induced_chain(mdp, policy)
    n = mdp.n_states

    n_comp, labels = csgraph.connected_components(
        chain, directed=True, connection="strong")
    leaves = np.zeros(n_comp, dtype=bool)
    coo = chain.tocoo()
    cross = labels[coo.row] != labels[coo.col]
    leaves[np.unique(labels[coo.row[cross]])] = True
    closed = np.flatnonzero(~leaves)
    if closed.size != 1:
        raise ChainStructureError(
            f"induced chain has {closed.size} closed communicating classes; "
            "exactly one is required for a well-defined stationary average")

    recurrent_state = int(np.flatnonzero(labels == closed[0])[0])
    system = (chain.T - sparse.identity(n, format="csr")).tolil()
    system[recurrent_state, :] = 1.0
    rhs = np.zeros(n)
    rhs[recurrent_state] = 1.0
    pi = spsolve(system.tocsc(), rhs)
    if not np.all(np.isfinite(pi)):
        raise ChainStructureError(
            "stationary system is singular; the induced chain is degenerate")
    pi = np.clip(pi, 0.0, None)
    total = pi.sum()
    if total <= 0.0:
        raise ChainStructureError("stationary distribution collapsed to zero")
    pi /= total
    return float(pi.dot(cost))


def _state_header(state) -> list[str]:
    if dataclasses.is_dataclass(state):
        return [f.name for f in dataclasses.fields(state)]
    return ["state"]


def _state_row(state) -> list:
    if dataclasses.is_dataclass(state):
        return ["" if getattr(state, f.name) is None else getattr(state, f.name)
                for f in dataclasses.fields(state)]
    return [state]


def write_kernel_csv(mdp: FiniteMdp, path) -> None:
    """Dump every transition as (state_id, action, next_state_id, probability)."""
    triples = []
    for a, kernel in enumerate(mdp.kernels):
        coo = kernel.tocoo()
        triples.extend(zip(coo.row.tolist(), [a] * coo.nnz, coo.col.tolist(),
                           coo.data.tolist()))
    triples.sort(key=lambda t: t[:3])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["state_id", "action", "next_state_id", "probability"])
        for i, a, j, p in triples:
            writer.writerow([i, a, j, format(float(p), ".17g")])


def write_solution_csv(mdp: FiniteMdp, solution: Solution, path) -> None:
    """Dump a solved policy: one row per state with chosen action and bias.

    The first line is a comment carrying the gain, tolerance, and iteration
    count; the CSV header follows.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# gain={format(solution.gain, '.12g')}"
                 f" epsilon={format(solution.epsilon, '.12g')}"
                 f" iterations={solution.iterations}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["state_id", *_state_header(mdp.states[0]),
                         "action", "bias"])
        for i, state in enumerate(mdp.states):
            writer.writerow([i, *_state_row(state), int(solution.policy[i]),
                             format(float(solution.bias[i]), ".12g")])

"""Command-line front end.

Subcommands
-----------
``analytic``   closed forms at single points or over rate grids
``solve``      average-cost solution of either decision process
``simulate``   seeded slot-level simulation of any request policy
``sweep``      solver gain across a range of age caps
``figure``     CSV + SVG bundles for the six standard views

Every long option may also be supplied through a JSON ``--config`` file whose
keys are the option names; explicit flags win over file values.  The seed
falls back to the ``AOI_TWOWAY_SEED`` environment variable.  Exit codes:
0 success, 2 usage or parameter error, 3 solver non-convergence, 4 violated
structural invariant.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analytic import (WaitThreshold, aoi_wait1, aoi_zw1, aoi_zw2, beta_max,
                       optimal_beta, sweep_grid, waiting_beneficial,
                       zw2_beats_zw1)
from .core import ServiceRates
from .mdp_one import build_mdp_1p, state_index_1p, State1P
from .mdp_two import build_mdp_2p, state_index_2p, State2P
from .rvi import (DEFAULT_AGE_CAP, DEFAULT_EPSILON, PRECISE_AGE_CAP,
                  PRECISE_EPSILON, ChainStructureError, ConvergenceError,
                  MdpInvariantError, SolveConfig, solve_rvi, write_kernel_csv,
                  write_solution_csv)
from .sim import (PolicySpec, SystemConfig, run_simulation,
                  simulate_trajectory, write_trajectory_csv)
from .svgplot import Series, heat_grid, line_chart

logger = logging.getLogger(__name__)

DEFAULT_SEED = 12345
_CELL_FMT = ".12g"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, _CELL_FMT)
    return str(value)


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _floats(text: str) -> list[float]:
    return [float(part) for part in str(text).split(",") if part != ""]


def _caps_list(text: str) -> list[int]:
    """Parse ``lo:hi:step`` (inclusive) or a comma list of cap values."""
    text = str(text)
    if ":" in text:
        lo, hi, step = (int(p) for p in text.split(":"))
        if step <= 0 or hi < lo:
            raise ValueError(f"bad cap range {text!r}")
        return list(range(lo, hi + 1, step))
    return [int(p) for p in text.split(",") if p != ""]


def _load_config(ns) -> dict:
    path = getattr(ns, "config", None)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object of option values")
    return data


def _opt(ns, cfg: dict, name: str, default):
    value = getattr(ns, name, None)
    if value is not None:
        return value
    if name in cfg:
        return cfg[name]
    return default


def _resolve_seed(ns, cfg) -> int:
    value = _opt(ns, cfg, "seed", None)
    if value is not None:
        return int(value)
    env = os.environ.get("AOI_TWOWAY_SEED")
    if env is not None:
        return int(env)
    return DEFAULT_SEED


def _default_mu_grid() -> list[float]:
    return [round(0.1 * i, 1) for i in range(2, 11)]


def _solve_for(capacity: int, rates: ServiceRates, cap: int, epsilon: float):
    mdp = build_mdp_1p(rates, cap) if capacity == 1 else build_mdp_2p(rates, cap)
    return mdp, solve_rvi(mdp, SolveConfig(epsilon=epsilon))


def _gain_job(args):
    capacity, gamma, mu, cap, epsilon = args
    _, solution = _solve_for(capacity, ServiceRates(gamma, mu), cap, epsilon)
    return capacity, gamma, mu, cap, solution.gain, solution.iterations


def _run_jobs(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_gain_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_gain_job, jobs))


# ---------------------------------------------------------------- analytic

def cmd_analytic(ns) -> int:
    cfg = _load_config(ns)
    gammas = _floats(_opt(ns, cfg, "gamma", "0.4"))
    mus = _floats(_opt(ns, cfg, "mu", "0.2,0.4,0.6,0.8,1.0"))
    policy = _opt(ns, cfg, "policy", None)
    out = _opt(ns, cfg, "out", None)

    if policy is None:
        rows = sweep_grid(gammas, mus)
        header = ["gamma", "mu", "delta_zw1", "delta_zw2", "beta_star",
                  "delta_wait1_star", "zw2_beats_zw1", "waiting_beneficial"]
        table = [[r[k] for k in header] for r in rows]
        if out:
            _write_csv(out, header, table)
        for r in rows:
            print(f"gamma={_fmt(r['gamma'])} mu={_fmt(r['mu'])} "
                  f"zw1={_fmt(r['delta_zw1'])} zw2={_fmt(r['delta_zw2'])} "
                  f"wait1*={_fmt(r['delta_wait1_star'])} "
                  f"(beta*={r['beta_star']})")
        return 0

    beta = int(_opt(ns, cfg, "beta", 1))
    rows = []
    for g in gammas:
        for m in mus:
            rates = ServiceRates(g, m)
            if policy == "zw1":
                br = aoi_zw1(rates)
            elif policy == "zw2":
                br = aoi_zw2(rates)
            elif policy == "wait1":
                br = aoi_wait1(rates, WaitThreshold(beta))
            else:
                raise ValueError(f"unknown policy {policy!r}")
            rows.append([g, m, beta if policy == "wait1" else "",
                         br.mean_interarrival, br.second_moment,
                         br.cross_term, br.average_aoi])
    header = ["gamma", "mu", "beta", "mean_interarrival", "second_moment",
              "cross_term", "average_aoi"]
    if out:
        _write_csv(out, header, rows)
    if len(rows) == 1:
        print(_fmt(rows[0][-1]))
    else:
        for row in rows:
            print(f"gamma={_fmt(row[0])} mu={_fmt(row[1])} "
                  f"average_aoi={_fmt(row[-1])}")
    return 0


# ------------------------------------------------------------------- solve

def cmd_solve(ns) -> int:
    cfg = _load_config(ns)
    capacity = int(_opt(ns, cfg, "capacity", 1))
    if capacity not in (1, 2):
        raise ValueError(f"capacity must be 1 or 2, got {capacity}")
    gamma = float(_opt(ns, cfg, "gamma", 0.4))
    mu = float(_opt(ns, cfg, "mu", 0.5))
    cap = int(_opt(ns, cfg, "cap", DEFAULT_AGE_CAP))
    epsilon = float(_opt(ns, cfg, "epsilon", DEFAULT_EPSILON))
    out = _opt(ns, cfg, "out", None)
    kernel_out = _opt(ns, cfg, "kernel_out", None)

    mdp, solution = _solve_for(capacity, ServiceRates(gamma, mu), cap, epsilon)
    print(f"gain={_fmt(solution.gain)} iterations={solution.iterations} "
          f"span={_fmt(solution.span)} residual={_fmt(solution.residual)}")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_solution_csv(mdp, solution, out)
    if kernel_out:
        Path(kernel_out).parent.mkdir(parents=True, exist_ok=True)
        write_kernel_csv(mdp, kernel_out)
    return 0


# ---------------------------------------------------------------- simulate

def cmd_simulate(ns) -> int:
    cfg = _load_config(ns)
    policy_name = _opt(ns, cfg, "policy", "zw1")
    capacity = _opt(ns, cfg, "capacity", None)
    if capacity is None:
        capacity = 2 if policy_name == "zw2" else 1
    capacity = int(capacity)
    gamma = float(_opt(ns, cfg, "gamma", 0.4))
    mu = float(_opt(ns, cfg, "mu", 0.5))
    horizon = int(_opt(ns, cfg, "horizon", 1_000_000))
    warmup = int(_opt(ns, cfg, "warmup", 1_000))
    seed = _resolve_seed(ns, cfg)
    out = _opt(ns, cfg, "out", None)
    traj_out = _opt(ns, cfg, "trajectory_out", None)

    rates = ServiceRates(gamma, mu)
    config = SystemConfig(rates=rates, capacity=capacity, horizon=horizon,
                          warmup=warmup, seed=seed)
    beta = int(_opt(ns, cfg, "beta", 1))
    if policy_name == "zw1":
        policy = PolicySpec.zw1()
    elif policy_name == "zw2":
        policy = PolicySpec.zw2()
    elif policy_name == "wait1":
        policy = PolicySpec.wait1(WaitThreshold(beta))
    elif policy_name == "table":
        cap = int(_opt(ns, cfg, "cap", DEFAULT_AGE_CAP))
        epsilon = float(_opt(ns, cfg, "epsilon", DEFAULT_EPSILON))
        _, solution = _solve_for(capacity, rates, cap, epsilon)
        policy = PolicySpec.from_solution(solution, cap, capacity)
    else:
        raise ValueError(f"unknown policy {policy_name!r}")

    if traj_out:
        trajectory, result = simulate_trajectory(config, policy)
        Path(traj_out).parent.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(trajectory, traj_out)
    else:
        result = run_simulation(config, policy)

    print(f"time_avg_aoi={_fmt(result.time_avg_aoi)} "
          f"cycle_aoi={_fmt(result.cycle_aoi)} cycles={result.cycles} "
          f"busy_fraction={_fmt(result.busy_fraction)}")
    if out:
        header = ["gamma", "mu", "capacity", "policy", "beta", "horizon",
                  "warmup", "seed", "time_avg_aoi", "cycle_aoi", "cycles",
                  "mean_interarrival", "mean_interarrival_sq", "mean_cross",
                  "busy_fraction"]
        row = [gamma, mu, capacity, policy_name,
               beta if policy_name == "wait1" else "", horizon, warmup, seed,
               result.time_avg_aoi, result.cycle_aoi, result.cycles,
               result.mean_interarrival, result.mean_interarrival_sq,
               result.mean_cross, result.busy_fraction]
        _write_csv(out, header, [row])
    return 0


# ------------------------------------------------------------------- sweep

def cmd_sweep(ns) -> int:
    cfg = _load_config(ns)
    capacity = int(_opt(ns, cfg, "capacity", 1))
    gamma = float(_opt(ns, cfg, "gamma", 0.4))
    mu = float(_opt(ns, cfg, "mu", 0.2))
    caps = _caps_list(_opt(ns, cfg, "caps", "5:100:5"))
    epsilon = float(_opt(ns, cfg, "epsilon", DEFAULT_EPSILON))
    workers = int(_opt(ns, cfg, "workers", 1))
    out = _opt(ns, cfg, "out", None)

    jobs = [(capacity, gamma, mu, cap, epsilon) for cap in caps]
    results = sorted(_run_jobs(jobs, workers), key=lambda r: r[3])
    rows = [[gamma, mu, cap, gain, iters]
            for _, gamma, mu, cap, gain, iters in results]
    for row in rows:
        print(f"cap={row[2]} gain={_fmt(row[3])} iterations={row[4]}")
    if out:
        _write_csv(out, ["gamma", "mu", "cap", "gain", "iterations"], rows)
    return 0


# ------------------------------------------------------------------ figure

def _figure_region(ns, cfg, outdir: Path) -> None:
    n = int(_opt(ns, cfg, "grid", 200))
    axis = [i / n for i in range(1, n + 1)]
    rows = []
    grid = []
    for g in axis:
        line = []
        for m in axis:
            rates = ServiceRates(g, m)
            flag = int(zw2_beats_zw1(rates))
            rows.append([g, m, aoi_zw1(rates).average_aoi,
                         aoi_zw2(rates).average_aoi, flag])
            line.append(flag)
        grid.append(line)
    _write_csv(outdir / "region.csv",
               ["gamma", "mu", "delta_zw1", "delta_zw2", "zw2_beats_zw1"],
               rows)
    svg = heat_grid(grid, axis, axis,
                    title="Where two in flight beat one in flight",
                    xlabel="mu", ylabel="gamma")
    (outdir / "region.svg").write_text(svg, encoding="utf-8")


def _figure_structure_1p(ns, cfg, outdir: Path) -> None:
    gamma = float(_opt(ns, cfg, "gamma", 0.4))
    mus = _floats(_opt(ns, cfg, "mu", ",".join(map(str, _default_mu_grid()))))
    cap = int(_opt(ns, cfg, "cap", DEFAULT_AGE_CAP))
    epsilon = float(_opt(ns, cfg, "epsilon", DEFAULT_EPSILON))
    rows = []
    grid = [[0] * len(mus) for _ in range(cap)]
    used_mus = []
    for j, mu in enumerate(mus):
        rates = ServiceRates(gamma, mu)
        if rates.deterministic:
            logger.warning("skipping (gamma, mu) = (1, 1): solver undefined")
            continue
        used_mus.append(mu)
        _, solution = _solve_for(1, rates, cap, epsilon)
        for aoi in range(1, cap + 1):
            action = int(solution.policy[state_index_1p(
                State1P(aoi, 0, 0, None), cap)])
            rows.append([mu, aoi, action])
            grid[aoi - 1][len(used_mus) - 1] = action
    grid = [line[:len(used_mus)] for line in grid]
    _write_csv(outdir / "structure_1p.csv", ["mu", "aoi", "action"], rows)
    svg = heat_grid(grid, used_mus, list(range(1, cap + 1)),
                    title=f"Send/idle regions, one in flight (gamma={gamma})",
                    xlabel="mu", ylabel="age")
    (outdir / "structure_1p.svg").write_text(svg, encoding="utf-8")


def _figure_structure_2p(ns, cfg, outdir: Path) -> None:
    gamma = float(_opt(ns, cfg, "gamma", 0.4))
    mus = _floats(_opt(ns, cfg, "mu", ",".join(map(str, _default_mu_grid()))))
    cap = int(_opt(ns, cfg, "cap", DEFAULT_AGE_CAP))
    epsilon = float(_opt(ns, cfg, "epsilon", DEFAULT_EPSILON))
    aoi = int(_opt(ns, cfg, "delta", cap))
    rows = []
    grid = [[0] * len(mus) for _ in range(cap + 1)]
    used_mus = []
    for j, mu in enumerate(mus):
        rates = ServiceRates(gamma, mu)
        if rates.deterministic:
            logger.warning("skipping (gamma, mu) = (1, 1): solver undefined")
            continue
        used_mus.append(mu)
        _, solution = _solve_for(2, rates, cap, epsilon)
        for age in range(cap + 1):
            action = int(solution.policy[state_index_2p(
                State2P(aoi, 0, 0, 0, 1, None, age), cap)])
            rows.append([mu, age, action])
            grid[age][len(used_mus) - 1] = action
    grid = [line[:len(used_mus)] for line in grid]
    _write_csv(outdir / "structure_2p.csv", ["mu", "smp_age", "action"], rows)
    svg = heat_grid(grid, used_mus, list(range(cap + 1)),
                    title=(f"Send/idle vs in-service sample age "
                           f"(gamma={gamma}, age={aoi})"),
                    xlabel="mu", ylabel="in-service sample age")
    (outdir / "structure_2p.svg").write_text(svg, encoding="utf-8")


def _figure_beta(ns, cfg, outdir: Path) -> None:
    gamma = float(_opt(ns, cfg, "gamma", 0.4))
    mu = float(_opt(ns, cfg, "mu", 0.1))
    rates = ServiceRates(gamma, mu)
    top = beta_max(rates) + 4
    betas = list(range(1, top + 1))
    deltas = [aoi_wait1(rates, WaitThreshold(b)).average_aoi for b in betas]
    _, solution = _solve_for(1, rates, PRECISE_AGE_CAP, PRECISE_EPSILON)
    zw1 = aoi_zw1(rates).average_aoi
    rows = [[b, d, solution.gain, zw1] for b, d in zip(betas, deltas)]
    _write_csv(outdir / "beta.csv",
               ["beta", "delta_wait1", "gain_1p", "delta_zw1"], rows)
    svg = line_chart(
        [Series("spaced deliveries", tuple(betas), tuple(deltas)),
         Series("solver optimum", (betas[0], betas[-1]),
                (solution.gain, solution.gain), dashed=True)],
        title=f"Average age vs spacing threshold (gamma={gamma}, mu={mu})",
        xlabel="spacing threshold", ylabel="average age")
    (outdir / "beta.svg").write_text(svg, encoding="utf-8")


def _figure_cap_sweep(ns, cfg, outdir: Path) -> None:
    capacity = int(_opt(ns, cfg, "capacity", 1))
    gamma = float(_opt(ns, cfg, "gamma", 0.4))
    mu = float(_opt(ns, cfg, "mu", 0.2))
    caps = _caps_list(_opt(ns, cfg, "caps", "5:100:5"))
    epsilon = float(_opt(ns, cfg, "epsilon", DEFAULT_EPSILON))
    workers = int(_opt(ns, cfg, "workers", 1))
    jobs = [(capacity, gamma, mu, cap, epsilon) for cap in caps]
    results = sorted(_run_jobs(jobs, workers), key=lambda r: r[3])
    rows = [[gamma, mu, cap, gain, iters]
            for _, gamma, mu, cap, gain, iters in results]
    _write_csv(outdir / "cap_sweep.csv",
               ["gamma", "mu", "cap", "gain", "iterations"], rows)
    svg = line_chart(
        [Series(f"gamma={gamma}, mu={mu}",
                tuple(r[2] for r in rows), tuple(r[3] for r in rows))],
        title="Solver gain vs age cap", xlabel="age cap",
        ylabel="average age")
    (outdir / "cap_sweep.svg").write_text(svg, encoding="utf-8")


def _figure_comparison(ns, cfg, outdir: Path) -> None:
    gammas = _floats(_opt(ns, cfg, "gamma", "0.4,0.7,1.0"))
    mus = _floats(_opt(ns, cfg, "mu", ",".join(map(str, _default_mu_grid()))))
    cap = int(_opt(ns, cfg, "cap", DEFAULT_AGE_CAP))
    epsilon = float(_opt(ns, cfg, "epsilon", DEFAULT_EPSILON))
    workers = int(_opt(ns, cfg, "workers", 1))

    jobs = []
    for g in gammas:
        for m in mus:
            if ServiceRates(g, m).deterministic:
                continue
            jobs.append((1, g, m, cap, epsilon))
            jobs.append((2, g, m, cap, epsilon))
    gains = {(c, g, m): gain for c, g, m, _, gain, _ in _run_jobs(jobs, workers)}

    header = ["gamma", "mu", "delta_zw1", "delta_zw2", "beta_star",
              "delta_wait1_star", "gain_1p", "gain_2p"]
    rows = []
    for g in gammas:
        for m in mus:
            rates = ServiceRates(g, m)
            best_b, best = optimal_beta(rates)
            rows.append([g, m, aoi_zw1(rates).average_aoi,
                         aoi_zw2(rates).average_aoi, best_b, best,
                         gains.get((1, g, m)), gains.get((2, g, m))])
    _write_csv(outdir / "comparison.csv", header, rows)

    for g in gammas:
        sub = [r for r in rows if r[0] == g]
        xs = tuple(r[1] for r in sub)
        series = [
            Series("one in flight, zero wait", xs, tuple(r[2] for r in sub)),
            Series("two in flight, zero wait", xs, tuple(r[3] for r in sub)),
            Series("best spaced deliveries", xs, tuple(r[5] for r in sub)),
            Series("solver, one request", xs,
                   tuple(r[6] if r[6] is not None else float("nan") for r in sub),
                   dashed=True),
            Series("solver, two requests", xs,
                   tuple(r[7] if r[7] is not None else float("nan") for r in sub),
                   dashed=True),
        ]
        svg = line_chart(series,
                         title=f"Average age of every policy (gamma={g})",
                         xlabel="mu", ylabel="average age")
        tag = _fmt(g).replace(".", "p")
        (outdir / f"comparison_gamma{tag}.svg").write_text(svg,
                                                           encoding="utf-8")


_FIGURES = {
    "region": _figure_region,
    "structure-1p": _figure_structure_1p,
    "structure-2p": _figure_structure_2p,
    "beta": _figure_beta,
    "cap-sweep": _figure_cap_sweep,
    "comparison": _figure_comparison,
}


def cmd_figure(ns) -> int:
    cfg = _load_config(ns)
    outdir = Path(_opt(ns, cfg, "out", "figures"))
    outdir.mkdir(parents=True, exist_ok=True)
    _FIGURES[ns.which](ns, cfg, outdir)
    print(f"wrote {ns.which} bundle to {outdir}")
    return 0


# ------------------------------------------------------------------ parser

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file of option defaults")
    sub.add_argument("--gamma", help="request-link rate(s), comma separated")
    sub.add_argument("--mu", help="update-link rate(s), comma separated")
    sub.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoi-twoway",
        description="Age-of-information tools for a pull loop with "
                    "two-way random delay")
    parser.add_argument("--verbose", action="store_true",
                        help="enable debug logging")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analytic", help="closed-form averages")
    _add_common(p)
    p.add_argument("--policy", choices=["zw1", "zw2", "wait1"])
    p.add_argument("--beta", type=int, help="spacing threshold for wait1")
    p.set_defaults(func=cmd_analytic)

    p = subs.add_parser("solve", help="average-cost solution")
    _add_common(p)
    p.add_argument("--capacity", type=int, choices=[1, 2])
    p.add_argument("--cap", type=int, help="age cap")
    p.add_argument("--epsilon", type=float, help="span tolerance")
    p.add_argument("--kernel-out", dest="kernel_out",
                   help="also export the transition kernel CSV")
    p.set_defaults(func=cmd_solve)

    p = subs.add_parser("simulate", help="seeded slot-level simulation")
    _add_common(p)
    p.add_argument("--capacity", type=int, choices=[1, 2])
    p.add_argument("--policy", choices=["zw1", "zw2", "wait1", "table"])
    p.add_argument("--beta", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cap", type=int, help="age cap for table policies")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--trajectory-out", dest="trajectory_out",
                   help="record and dump the full per-slot trajectory")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("sweep", help="gain across age caps")
    _add_common(p)
    p.add_argument("--capacity", type=int, choices=[1, 2])
    p.add_argument("--caps", help="lo:hi:step or comma list")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("figure", help="CSV + SVG bundles")
    p.add_argument("which", choices=sorted(_FIGURES))
    _add_common(p)
    p.add_argument("--grid", type=int, help="region grid resolution")
    p.add_argument("--cap", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=int, help="age row for structure-2p")
    p.add_argument("--capacity", type=int, choices=[1, 2])
    p.add_argument("--caps", help="lo:hi:step or comma list")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_figure)

    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if ns.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (MdpInvariantError, ChainStructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Simulator tests: hand-stepped traces, closed-form oracles, determinism."""

from __future__ import annotations

import math

import numpy as np
import pytest

from aoi_twoway import (PolicySpec, ServiceRates, State1P, State2P,
                        SystemConfig, WaitThreshold, aoi_wait1, aoi_zw1,
                        aoi_zw2, average_aoi_from_cycles, build_mdp_1p,
                        build_mdp_2p, extract_cycles, run_simulation,
                        run_table_policy, simulate_trajectory, solve_rvi,
                        state_index_1p, state_index_2p, write_trajectory_csv)
from aoi_twoway.analytic import p_busy
from aoi_twoway.mdp_one import enumerate_states_1p
from aoi_twoway.mdp_two import enumerate_states_2p
from aoi_twoway.rvi import SolveConfig
from aoi_twoway.sim import _index_1p, _index_2p

UNIT = ServiceRates(1.0, 1.0)
HALF = ServiceRates(0.5, 0.5)


def cfg(rates, capacity=1, horizon=100_000, warmup=1_000, seed=0):
    return SystemConfig(rates=rates, capacity=capacity, horizon=horizon,
                        warmup=warmup, seed=seed)


class TestDeterministicTraces:
    def test_zero_wait_single(self):
        res = run_simulation(cfg(UNIT, horizon=10_000, warmup=100),
                             PolicySpec.zw1())
        # age alternates 1, 2 forever: I = 2, T = 1
        assert res.time_avg_aoi == pytest.approx(1.5, abs=1e-12)
        assert res.cycle_aoi == pytest.approx(1.5, abs=1e-12)
        assert res.mean_interarrival == pytest.approx(2.0, abs=1e-12)

    def test_zero_wait_pipelined(self):
        res = run_simulation(cfg(UNIT, capacity=2, horizon=10_000, warmup=100),
                             PolicySpec.zw2())
        assert res.time_avg_aoi == pytest.approx(1.0, abs=1e-12)
        assert res.mean_interarrival == pytest.approx(1.0, abs=1e-12)
        assert res.busy_fraction == pytest.approx(0.0)

    def test_spaced_deliveries(self):
        res = run_simulation(cfg(UNIT, horizon=10_000, warmup=96),
                             PolicySpec.wait1(WaitThreshold(3)))
        # service takes 1 slot, pause 2 slots, request 1 slot: I = 4, T = 1
        assert res.mean_interarrival == pytest.approx(4.0, abs=1e-12)
        assert res.time_avg_aoi == pytest.approx(2.5, abs=1e-12)

    def test_trace_cycles_single(self):
        traj, _ = simulate_trajectory(cfg(UNIT, horizon=50, warmup=0),
                                      PolicySpec.zw1())
        records = extract_cycles(traj)
        assert all(r.interarrival == 2 and r.system_time == 1 for r in records)

    def test_trace_cycles_pipelined(self):
        traj, _ = simulate_trajectory(
            cfg(UNIT, capacity=2, horizon=50, warmup=0), PolicySpec.zw2())
        records = extract_cycles(traj)
        assert all(r.interarrival == 1 and r.system_time == 1 for r in records)

    def test_trace_cycles_spaced(self):
        traj, _ = simulate_trajectory(cfg(UNIT, horizon=100, warmup=0),
                                      PolicySpec.wait1(WaitThreshold(3)))
        records = extract_cycles(traj)
        assert all(r.interarrival == 4 and r.system_time == 1 for r in records)


class TestClosedFormAgreement:
    def test_zero_wait_single_moments(self):
        rates = ServiceRates(0.5, 0.4)
        res = run_simulation(cfg(rates, horizon=4_000_000, warmup=10_000,
                                 seed=42), PolicySpec.zw1())
        exact = aoi_zw1(rates)
        n = res.cycles
        assert n > 100_000
        # mean interarrival: var(I) <= E[I^2], use 3 sigma
        se_i = math.sqrt(exact.second_moment / n)
        assert abs(res.mean_interarrival - exact.mean_interarrival) <= 3 * se_i
        assert abs(res.time_avg_aoi / exact.average_aoi - 1) <= 0.01
        assert abs(res.cycle_aoi / exact.average_aoi - 1) <= 0.01
        assert abs(res.mean_interarrival_sq / exact.second_moment - 1) <= 0.03
        assert abs(res.mean_cross / exact.cross_term - 1) <= 0.03

    def test_zero_wait_pipelined_moments(self):
        rates = ServiceRates(0.5, 0.5)
        res = run_simulation(cfg(rates, capacity=2, horizon=4_000_000,
                                 warmup=10_000, seed=9), PolicySpec.zw2())
        exact = aoi_zw2(rates)
        assert abs(res.time_avg_aoi / exact.average_aoi - 1) <= 0.01
        assert abs(res.mean_interarrival / exact.mean_interarrival - 1) <= 0.01
        assert abs(res.mean_interarrival_sq / exact.second_moment - 1) <= 0.03
        assert abs(res.mean_cross / exact.cross_term - 1) <= 0.03

    def test_busy_fraction_matches_partition(self):
        rates = ServiceRates(0.5, 0.5)
        res = run_simulation(cfg(rates, capacity=2, horizon=4_000_000,
                                 warmup=10_000, seed=3), PolicySpec.zw2())
        pb = p_busy(rates)
        arrivals = res.cycles  # deliveries track arrivals one-for-one
        se = math.sqrt(pb * (1 - pb) / arrivals)
        assert abs(res.busy_fraction - pb) <= 3 * se

    def test_spaced_deliveries_curve(self):
        rates = ServiceRates(0.5, 0.2)
        for beta, seed in ((2, 11), (4, 12), (8, 13)):
            res = run_simulation(cfg(rates, horizon=4_000_000, warmup=10_000,
                                     seed=seed),
                                 PolicySpec.wait1(WaitThreshold(beta)))
            exact = aoi_wait1(rates, WaitThreshold(beta))
            assert abs(res.time_avg_aoi / exact.average_aoi - 1) <= 0.01

    def test_estimators_agree(self):
        for seed in (1, 2):
            res = run_simulation(cfg(HALF, horizon=200_000, warmup=1_000,
                                     seed=seed), PolicySpec.zw1())
            assert abs(res.time_avg_aoi - res.cycle_aoi) <= max(
                0.01 * res.time_avg_aoi, 3 * 50 / res.horizon)


class TestDeterminism:
    def test_bit_identical_reruns(self):
        a = run_simulation(cfg(HALF, seed=77), PolicySpec.zw1())
        b = run_simulation(cfg(HALF, seed=77), PolicySpec.zw1())
        assert a == b

    def test_seed_changes_stream(self):
        a = run_simulation(cfg(HALF, seed=1), PolicySpec.zw1())
        b = run_simulation(cfg(HALF, seed=2), PolicySpec.zw1())
        assert a.time_avg_aoi != b.time_avg_aoi

    def test_trajectory_consistent_with_result(self):
        traj, res = simulate_trajectory(cfg(HALF, horizon=5_000, warmup=500,
                                            seed=5), PolicySpec.zw1())
        direct = run_simulation(cfg(HALF, horizon=5_000, warmup=500, seed=5),
                                PolicySpec.zw1())
        assert res == direct
        assert traj.aoi[500:].mean() == pytest.approx(res.time_avg_aoi)

    def test_cycle_identity_on_trajectory(self):
        traj, _ = simulate_trajectory(cfg(HALF, horizon=20_000, warmup=0,
                                          seed=8), PolicySpec.zw1())
        records = extract_cycles(traj)
        direct = average_aoi_from_cycles(records)
        assert direct == pytest.approx(traj.aoi.mean(), rel=0.02)


class TestTablePolicies:
    def test_solved_single_request_table(self):
        rates = ServiceRates(0.9, 0.9)
        mdp = build_mdp_1p(rates, 50)
        sol = solve_rvi(mdp, SolveConfig(epsilon=1e-6))
        res = run_table_policy(cfg(rates, horizon=2_000_000, warmup=10_000,
                                   seed=21), sol, 50)
        assert abs(res.time_avg_aoi - 1.778) <= 0.018

    def test_solved_double_request_table_beats_fixed_discipline(self):
        rates = ServiceRates(0.8, 0.8)
        mdp = build_mdp_2p(rates, 50)
        sol = solve_rvi(mdp, SolveConfig(epsilon=1e-6))
        table = run_table_policy(cfg(rates, capacity=2, horizon=2_000_000,
                                     warmup=10_000, seed=22), sol, 50)
        fixed = run_simulation(cfg(rates, capacity=2, horizon=2_000_000,
                                   warmup=10_000, seed=23), PolicySpec.zw2())
        sigma = aoi_zw2(rates).average_aoi / math.sqrt(fixed.cycles)
        assert table.time_avg_aoi <= fixed.time_avg_aoi + 2 * sigma

    def test_never_sampling_lets_age_run_away(self):
        mdp = build_mdp_1p(HALF, 10)
        sol = solve_rvi(mdp, SolveConfig(epsilon=1e-4))
        idle = type(sol)(policy=np.zeros(mdp.n_states, dtype=np.int8),
                         gain=sol.gain, bias=sol.bias,
                         iterations=sol.iterations, span=sol.span,
                         residual=sol.residual, epsilon=sol.epsilon,
                         reference_state=sol.reference_state)
        horizon = 100_000
        res = run_table_policy(SystemConfig(rates=HALF, capacity=1,
                                            horizon=horizon, warmup=0,
                                            seed=1), idle, 10)
        assert res.time_avg_aoi == pytest.approx(horizon / 2, rel=0.001)
        assert res.cycles == 0
        assert math.isnan(res.cycle_aoi)


class TestValidation:
    def test_policy_capacity_mismatch(self):
        with pytest.raises(ValueError):
            run_simulation(cfg(HALF, capacity=2), PolicySpec.zw1())
        with pytest.raises(ValueError):
            run_simulation(cfg(HALF, capacity=1), PolicySpec.zw2())
        with pytest.raises(ValueError):
            run_simulation(cfg(HALF, capacity=2),
                           PolicySpec.wait1(WaitThreshold(2)))

    def test_table_capacity_mismatch(self):
        mdp = build_mdp_1p(HALF, 5)
        sol = solve_rvi(mdp, SolveConfig(epsilon=1e-4))
        with pytest.raises(ValueError):
            run_simulation(cfg(HALF, capacity=2),
                           PolicySpec.from_solution(sol, 5, capacity=1))
        # wrong cap for the table length
        with pytest.raises(ValueError):
            run_table_policy(cfg(HALF), sol, 6)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SystemConfig(rates=HALF, capacity=3)
        with pytest.raises(ValueError):
            SystemConfig(rates=HALF, horizon=100, warmup=100)
        with pytest.raises(ValueError):
            SystemConfig(rates=HALF, warmup=-1)

    def test_too_few_deliveries_for_cycles(self):
        traj, _ = simulate_trajectory(cfg(UNIT, horizon=2, warmup=0),
                                      PolicySpec.zw1())
        with pytest.raises(ValueError):
            extract_cycles(traj)


class TestObservationIndexing:
    def test_single_request_index_matches_reference(self):
        capx = 5
        for s in enumerate_states_1p(capx):
            age = -1 if s.smp_age is None else s.smp_age
            assert _index_1p(s.aoi, s.ctrl_busy, s.smp_busy, age, capx) == \
                state_index_1p(s, capx)

    def test_double_request_index_matches_reference(self):
        capx = 4
        for s in enumerate_states_2p(capx):
            b = -1 if s.buf_age is None else s.buf_age
            a = -1 if s.smp_age is None else s.smp_age
            assert _index_2p(s.aoi, s.ctrl_buf, s.ctrl_busy, s.smp_buf,
                             s.smp_busy, b, a, capx) == state_index_2p(s, capx)


class TestTrajectoryExport:
    def test_csv_shape_and_blanks(self, tmp_path):
        traj, _ = simulate_trajectory(cfg(HALF, horizon=200, warmup=0, seed=4),
                                      PolicySpec.zw1())
        path = tmp_path / "run.csv"
        write_trajectory_csv(traj, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("slot,aoi,ctrl_buf,ctrl_busy,smp_buf,smp_busy,"
                            "buf_age,smp_age,action,delivered")
        assert len(lines) == 201
        # ages are blank whenever the matching server is idle
        for line in lines[1:]:
            parts = line.split(",")
            assert (parts[7] == "") == (parts[5] == "0")
        # re-export is byte-identical
        path2 = tmp_path / "run2.csv"
        write_trajectory_csv(traj, path2)
        assert path.read_bytes() == path2.read_bytes()

import math
import os

import numpy as np
import pytest

from netexp.channel import bsc, identity_channel, ksym, make_dmc
from netexp.errors import AlphabetTooLarge, InsufficientData, ParameterOutOfRange
from netexp.flow import make_channel_graph
from netexp.harness import (
    SimConfig,
    SimResult,
    SimRow,
    analyze,
    counterexample_channel,
    counterexample_experiment,
    counterexample_graph,
    fit_exponent,
    oracle_exponent_1hop,
    simulate,
    wilson_interval,
)
from conftest import rand_dmc, rand_channel_graph

DB_BSC01 = -math.log(0.6)


def synthetic_result(points, trials=10**6):
    rows = tuple(
        SimRow(n=n, message=1, errors=int(round(p * trials)), trials=trials,
               p_hat=p, ci_lo=0.0, ci_hi=1.0)
        for n, p in points
    )
    cfg = SimConfig(seed=0, trials=trials, horizons=tuple(n for n, _ in points), B=2, M=2)
    usable = [(n, p) for n, p in points if p > 0]
    return SimResult(config=cfg, rows=rows, aggregate=tuple(points), fitted=None,
                     skipped_horizons=tuple(n for n, p in points if p == 0))


class TestWilson:
    def test_zero_errors(self):
        lo, hi = wilson_interval(0, 1000)
        assert lo == 0.0 and 0 < hi < 0.01

    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(37, 500)
        assert lo < 37 / 500 < hi

    def test_all_errors(self):
        lo, hi = wilson_interval(100, 100)
        assert hi == 1.0 and lo > 0.95


class TestAnalyze:
    def test_series_bsc(self):
        G = make_channel_graph(3, 0, 2, [(0, 1, bsc(0.1)), (1, 2, bsc(0.2))])
        rep = analyze(G, 2)
        assert abs(rep.maxflow_tilde - (-math.log(0.8))) < 1e-9
        assert abs(rep.maxflow_two - rep.maxflow_tilde) < 1e-9
        assert abs(rep.ratio_two_over_tilde - 1.0) < 1e-9
        assert rep.all_reversible
        assert rep.backedge_free_mincut_exists is True

    def test_counterexample_m3(self):
        rep = analyze(counterexample_graph(0.01), 3)
        tern = -math.log(2 * math.sqrt(0.01 * 0.98) + 0.01)
        bsc3 = -(2.0 / 3.0) * math.log(2 * math.sqrt(0.01 * 0.99))
        assert abs(rep.maxflow_tilde - (tern + bsc3)) < 1e-9
        assert rep.backedge_free_mincut_exists is False
        assert rep.all_reversible

    def test_z_channel_edge_not_reversible(self):
        Z = make_dmc([[1.0, 0.0], [0.5, 0.5]])
        G = make_channel_graph(3, 0, 2, [(0, 1, Z), (1, 2, bsc(0.1))])
        rep = analyze(G, 2)
        assert not rep.edges[0].reversible
        assert rep.edges[1].reversible
        assert not rep.all_reversible
        # tilde weight on the Z edge is the Bhattacharyya value, below Chernoff
        assert rep.edges[0].exp_tilde < rep.edges[0].exp_two - 1e-6

    def test_random_graphs_sandwich(self, rng):
        for _ in range(30):
            M = int(rng.integers(2, 5))
            G = rand_channel_graph(rng, lambda r: rand_dmc(r, max_in=4, max_out=4))
            rep = analyze(G, M)  # invariants asserted inside
            assert rep.maxflow_tilde <= rep.maxflow_two + 1e-9

    def test_json_obj_shape(self):
        G = make_channel_graph(3, 0, 2, [(0, 1, bsc(0.1)), (1, 2, bsc(0.2))])
        obj = analyze(G, 2).to_json_obj()
        assert set(obj) >= {
            "messages", "edges", "maxflow_tilde", "maxflow_two",
            "maxflow_zero_rate", "ratio_two_over_tilde", "all_reversible",
            "backedge_free_mincut_exists",
        }
        assert obj["edges"][0]["exponent_two"] == pytest.approx(0.510825623766)


class TestSimulate:
    def test_noiseless_zero_errors(self):
        G = make_channel_graph(
            3, 0, 2, [(0, 1, identity_channel(2)), (1, 2, identity_channel(2))]
        )
        cfg = SimConfig(seed=1, trials=500, horizons=(12, 16), B=4, M=2, decoder="heuristic")
        res = simulate(G, cfg)
        assert all(r.errors == 0 for r in res.rows)
        assert res.fitted is None and len(res.skipped_horizons) == 2

    def test_single_hop_single_block_matches_oracle(self):
        from netexp.protocol import build_network_plan, exact_block_distribution, ml_error_probs

        G = make_channel_graph(2, 0, 1, [(0, 1, bsc(0.1))])
        cfg = SimConfig(seed=11, trials=10**5, horizons=(8,), B=4, M=2, decoder="exact")
        res = simulate(G, cfg)
        plan = build_network_plan(G, 2, 4)
        exact = ml_error_probs(exact_block_distribution(plan.paths[0].spec))
        for r in res.rows:
            want = exact[r.message - 1]
            sigma = math.sqrt(want * (1 - want) / r.trials)
            assert abs(r.p_hat - want) <= 3 * sigma + 1e-12

    def test_thread_count_reproducibility(self):
        G = make_channel_graph(3, 0, 2, [(0, 1, bsc(0.1)), (1, 2, bsc(0.1))])
        cfg = SimConfig(seed=3, trials=5000, horizons=(12, 16), B=4, M=2, decoder="heuristic")
        old = os.environ.get("NETEXP_THREADS")
        try:
            os.environ["NETEXP_THREADS"] = "1"
            r1 = simulate(G, cfg)
            os.environ["NETEXP_THREADS"] = "4"
            r2 = simulate(G, cfg)
        finally:
            if old is None:
                os.environ.pop("NETEXP_THREADS", None)
            else:
                os.environ["NETEXP_THREADS"] = old
        assert r1.rows == r2.rows

    def test_config_validation(self):
        with pytest.raises(ParameterOutOfRange, match="block size must be even"):
            SimConfig(seed=0, trials=10, horizons=(10,), B=3, M=2)
        with pytest.raises(ParameterOutOfRange):
            SimConfig(seed=0, trials=10, horizons=(10, 10), B=2, M=2)
        with pytest.raises(ParameterOutOfRange):
            SimConfig(seed=0, trials=10, horizons=(10,), B=2, M=2, decoder="magic")

    def test_exact_decoder_guard_translated(self):
        from netexp.errors import DistributionUnavailable

        # M=3 reduction has 2^6 outputs per reduced use; B=4 blows the
        # exact-enumeration guard, so the exact decoder must refuse
        G = make_channel_graph(2, 0, 1, [(0, 1, bsc(0.1))])
        cfg = SimConfig(seed=0, trials=10, horizons=(36,), B=24, M=3, decoder="exact")
        with pytest.raises(DistributionUnavailable):
            simulate(G, cfg)

    def test_uniform_aggregation(self):
        G = make_channel_graph(3, 0, 2, [(0, 1, bsc(0.1)), (1, 2, bsc(0.1))])
        cfg = SimConfig(seed=3, trials=3000, horizons=(12, 16, 20), B=4, M=2,
                        decoder="heuristic", messages="uniform")
        res = simulate(G, cfg)
        for n, agg in res.aggregate:
            ps = [r.p_hat for r in res.rows if r.n == n]
            assert agg == pytest.approx(sum(ps) / len(ps))

    def test_heuristic_error_rate_trend(self):
        # worst-case heuristic error is non-increasing in n (2 sigma slack)
        G = make_channel_graph(3, 0, 2, [(0, 1, bsc(0.05)), (1, 2, bsc(0.05))])
        cfg = SimConfig(seed=7, trials=30000, horizons=(12, 16, 20, 24), B=4, M=2,
                        decoder="heuristic")
        res = simulate(G, cfg)
        for (n1, p1), (n2, p2) in zip(res.aggregate, res.aggregate[1:]):
            s1 = math.sqrt(max(p1 * (1 - p1), 1e-12) / cfg.trials)
            s2 = math.sqrt(max(p2 * (1 - p2), 1e-12) / cfg.trials)
            assert p2 <= p1 + 2 * math.hypot(s1, s2)


class TestFitExponent:
    def test_exact_log_linear(self):
        res = synthetic_result([(n, math.exp(-0.3 * n)) for n in (10, 20, 30, 40)])
        slope, stderr = fit_exponent(res)
        assert abs(slope - 0.3) < 1e-12
        assert stderr < 1e-12

    def test_noisy_synthetic_within_3_stderr(self, rng):
        trials = 10**5
        points = []
        for n in (10, 20, 30, 40, 50):
            p = math.exp(-0.12 * n)
            k = rng.binomial(trials, p)
            points.append((n, max(k, 1) / trials))
        slope, stderr = fit_exponent(synthetic_result(points, trials))
        assert abs(slope - 0.12) <= 3 * max(stderr, 1e-4)

    def test_zero_horizons_excluded(self):
        res = synthetic_result([(10, 1e-2), (20, 1e-3), (30, 1e-4), (40, 0.0)])
        slope, _ = fit_exponent(res)
        assert slope > 0
        assert res.skipped_horizons == (40,)

    def test_insufficient_data(self):
        res = synthetic_result([(10, 0.0), (20, 0.0), (30, 0.0)])
        with pytest.raises(InsufficientData):
            fit_exponent(res)


class TestCounterexample:
    def test_rows_sum_to_one_exactly(self):
        for p in (0.01, 0.2, 1 / 3 - 1e-6):
            Q = counterexample_channel(p)
            assert np.abs(Q.probs.sum(axis=1) - 1.0).max() < 1e-12

    def test_channel_entries(self):
        p = 0.01
        Q = counterexample_channel(p)
        assert Q.probs[0, 0] == pytest.approx((1 - 2 * p) * (1 - p))
        assert Q.probs[0, 1] == pytest.approx(p * p)
        assert Q.probs[0, 3] == pytest.approx((1 - 2 * p) * p)
        assert Q.probs[0, 4] == pytest.approx(p * (1 - p))

    def test_p001_beats_both_bounds(self):
        row = counterexample_experiment([0.01])[0]
        assert row.min_db_q == pytest.approx(3.0078, abs=1e-3)
        assert row.maxflow_bound == pytest.approx(2.6466, abs=1e-3)
        assert row.min_db_q > row.maxflow_bound
        assert row.min_db_q > row.maxflow_feedback_bound
        assert row.maxflow_feedback_bound > row.maxflow_bound

    def test_min_db_matches_closed_form(self):
        # sum of sqrt(Q0 Q1) collapses to 4 p sqrt((1-2p)(1-p)) + p
        for p in (0.01, 0.001):
            row = counterexample_experiment([p])[0]
            want = -math.log(4 * p * math.sqrt((1 - 2 * p) * (1 - p)) + p)
            assert row.min_db_q == pytest.approx(want, abs=1e-12)

    def test_grid_validation(self):
        with pytest.raises(ParameterOutOfRange):
            counterexample_experiment([])
        with pytest.raises(ParameterOutOfRange):
            counterexample_experiment([0.4])


class TestOracle1Hop:
    def test_single_use(self):
        assert oracle_exponent_1hop(bsc(0.1), 2, 1) == pytest.approx(0.1, abs=1e-12)

    def test_repetition_3(self):
        # majority vote: p^3 + 3 p^2 (1-p)
        assert oracle_exponent_1hop(bsc(0.1), 2, 3) == pytest.approx(0.028, abs=1e-12)

    def test_n15_enumerated(self):
        # frozen from the enumeration; the finite-n exponent sits 34% above
        # the asymptotic Bhattacharyya value at this length
        p_err = oracle_exponent_1hop(bsc(0.1), 2, 15)
        assert p_err == pytest.approx(3.3624888e-05, rel=1e-6)
        exponent = -math.log(p_err) / 15
        assert abs(exponent - DB_BSC01) / DB_BSC01 < 0.4

    def test_guard(self):
        with pytest.raises(AlphabetTooLarge):
            oracle_exponent_1hop(ksym(10, 0.01), 2, 8)


class TestKaryEquality:
    def test_all_ksym_graphs_match(self, rng):
        for _ in range(15):
            M = int(rng.integers(2, 4))

            def kchan(r):
                K = int(r.integers(M, 6))
                return ksym(K, float(r.uniform(0.01, 0.9 / (K - 1))))

            G = rand_channel_graph(rng, kchan)
            rep = analyze(G, M)
            assert abs(rep.maxflow_tilde - rep.maxflow_two) < 1e-9

import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lse_lab.constellations import Circle, Disk, FullComplex, Mpsk
from lse_lab.errors import BracketError, DomainError, ExperimentError
from lse_lab.experiments import (SWEEP_COLUMNS, McConfig, SweepRow, draw_instance,
                                 monte_carlo_distortion, ofdm_equivalence, power_decay_fit,
                                 power_for_distortion, rate_lower_bound, rzf_rate_at,
                                 sweep_row, tune_constellation, tune_rzf, union_bound_epsilon,
                                 worker_count, write_manifest, write_sweep_csv)
from lse_lab.replica_core import RsConfig, solve_rs_rzf
from lse_lab.spectra import MarchenkoPasturIid


class TestRateBound:
    def test_values(self):
        assert rate_lower_bound(4.0, 1.0, 0.5, 0.5) == pytest.approx(2.0)
        assert rate_lower_bound(1.0, 1.0, 1.0, 1.0) == pytest.approx(-1.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            rate_lower_bound(1.0, 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            rate_lower_bound(0.0, 1.0, 1.0, 0.1)

    def test_tuned_point_is_local_maximum(self):
        t = tune_rzf(1.0, 1.0, 1.0)
        for d in (-0.1, 0.1):
            assert t.rate_bound > rzf_rate_at(t.chi_opt + d, 1.0, 1.0, 1.0)


class TestTuneRzf:
    def test_golden_ratio_point(self):
        t = tune_rzf(1.0, 1.0, 1.0)
        assert t.s == -1.0
        assert t.chi_opt == pytest.approx((np.sqrt(5) - 1) / 2, abs=1e-15)
        assert t.lambda_opt == pytest.approx(1.0, abs=1e-14)

    def test_regulariser_formula(self):
        # 2/(s + r) - 2/(alpha (2 + s + r)) with r = sqrt(s^2 + 4 alpha q / sigma_n2)
        for alpha, q, s2 in [(2.0, 1.0, 0.5), (0.7, 2.0, 1.0), (5.0, 0.1, 3.0)]:
            t = tune_rzf(alpha, q, s2)
            r = np.sqrt(t.s ** 2 + 4 * alpha * q / s2)
            ref = 2 / (t.s + r) - 2 / (alpha * (2 + t.s + r))
            assert t.lambda_opt == pytest.approx(ref, rel=1e-12)

    def test_consistent_with_rs(self):
        # the tuned (lam, gamma) reproduce power q and the reported chi, D
        alpha, q = 2.5, 0.8
        t = tune_rzf(alpha, q, 0.4, sigma_u2=1.3)
        sol = solve_rs_rzf(RsConfig(MarchenkoPasturIid(alpha), gamma=t.gamma, sigma_u2=1.3,
                                    lam=t.lambda_opt))
        assert sol.q == pytest.approx(q, rel=1e-10)
        assert sol.chi == pytest.approx(t.chi_opt, rel=1e-10)
        assert sol.distortion == pytest.approx(t.distortion, rel=1e-10)

    def test_noiseless_limit(self):
        t = tune_rzf(2.0, 1.0, 1e-9)
        assert t.chi_opt == pytest.approx(t.s, rel=1e-6)
        assert t.lambda_opt < 1e-8

    def test_grid_never_beats_closed_form(self):
        for alpha, q, s2 in [(1.0, 1.0, 1.0), (3.0, 0.5, 0.1), (0.5, 2.0, 2.0)]:
            t = tune_rzf(alpha, q, s2)
            with np.errstate(invalid="ignore"):
                # for alpha < 1 large chi needs a negative gain and the bound is undefined
                grid = rzf_rate_at(np.linspace(0.01, 50, 200), alpha, q, s2)
            assert np.nanmax(grid) <= t.rate_bound + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 20), st.floats(0.01, 10), st.floats(0.01, 10))
    def test_positive_susceptibility(self, alpha, q, s2):
        t = tune_rzf(alpha, q, s2)
        assert t.chi_opt > 0
        resid = t.chi_opt ** 2 - t.s * t.chi_opt - alpha * q / s2
        assert resid == pytest.approx(0, abs=1e-9 * (1 + t.chi_opt ** 2 + alpha * q / s2))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.2, 10), st.floats(0.05, 5), st.floats(0.05, 5))
    def test_maximises_bound(self, alpha, q, s2):
        t = tune_rzf(alpha, q, s2)
        for f in (0.9, 0.99, 1.01, 1.1):
            assert rzf_rate_at(f * t.chi_opt, alpha, q, s2) <= t.rate_bound + 1e-12

    def test_invalid(self):
        with pytest.raises(ValueError):
            tune_rzf(0.0, 1.0, 1.0)


class TestTuneConstellation:
    def test_full_complex_matches_closed_form(self):
        ref = tune_rzf(2.0, 1.0, 1.0)
        t = tune_constellation(FullComplex(), 2.0, 1.0, 1.0)
        assert t.rate_bound == pytest.approx(ref.rate_bound, abs=1e-6)
        assert t.gamma == pytest.approx(ref.gamma, rel=1e-4)
        assert t.lam == pytest.approx(ref.lambda_opt, rel=1e-4)
        assert t.q == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.slow
    def test_disk_close_to_unconstrained(self):
        P = 1.0 * 10 ** 0.3
        t = tune_constellation(Disk(P), 5.0, 1.0, 1.0)
        assert abs(t.rate_bound - tune_rzf(5.0, 1.0, 1.0).rate_bound) < 0.2
        assert t.q == pytest.approx(1.0, rel=1e-6)

    def test_constant_envelope_keeps_symbol_power(self):
        t = tune_constellation(Circle(1.0), 5.0, 1.0, 1.0)
        assert t.lam == 0.0
        assert t.q == pytest.approx(1.0)
        assert t.rate_bound < tune_rzf(5.0, 1.0, 1.0).rate_bound


class TestUnionBound:
    def test_value(self):
        r = union_bound_epsilon(2.0, 2)
        assert r.rhs == pytest.approx(np.log(2) + 1)
        assert r.epsilon_star == pytest.approx(0.20366, abs=1e-5)
        e = r.epsilon_star
        assert e / 2 - np.log(e) == pytest.approx(r.rhs, abs=1e-10)

    def test_small_load_limit(self):
        # the left side falls to its minimum 1 - ln 2 at eps = 2
        eps = [union_bound_epsilon(a, 2).epsilon_star for a in (1e-1, 1e-2, 1e-4)]
        assert eps[0] < eps[1] < eps[2] < 2.0
        assert eps[2] > 1.95

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.2, 10), st.floats(0.01, 2), st.integers(2, 64))
    def test_decreasing(self, alpha, da, M):
        e = union_bound_epsilon(alpha, M).epsilon_star
        assert union_bound_epsilon(alpha + da, M).epsilon_star < e
        assert union_bound_epsilon(alpha, M + 1).epsilon_star < e
        assert 0 < e < 2

    def test_invalid(self):
        with pytest.raises(ValueError):
            union_bound_epsilon(1.0, 1)


class TestOfdm:
    def test_single_subcarrier(self):
        # the same matrix up to rounding, which can move the KS distance by one sample
        r = ofdm_equivalence(1, 16, 8, seed=3)
        np.testing.assert_allclose(r.eig_ofdm, r.eig_flat, atol=1e-12)
        assert r.ks_distance <= 1 / 16

    def test_dense_and_structured_agree(self):
        a = ofdm_equivalence(8, 12, 10, seed=1, method="dense")
        b = ofdm_equivalence(8, 12, 10, seed=1, method="structured")
        np.testing.assert_allclose(a.eig_ofdm, b.eig_ofdm, atol=1e-10)
        assert abs(a.ks_distance - b.ks_distance) <= 2 / 96
        assert a.unitarity_error < 1e-12

    def test_memory_guard(self):
        with pytest.raises(MemoryError):
            ofdm_equivalence(16, 32, 32, method="dense", max_entries=1000)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ofdm_equivalence(0, 4, 4)


class TestMonteCarlo:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            McConfig(K=0, alpha=2.0)
        with pytest.raises(ValueError):
            McConfig(K=10, alpha=2.0, solver="other")
        with pytest.raises(ValueError):
            McConfig(K=1, alpha=0.1)
        assert McConfig(K=100, alpha=1.5).N == 150

    def test_channel_normalisation(self):
        cfg = McConfig(K=200, alpha=2.0)
        H, u = draw_instance(cfg, 0)
        assert H.shape == (200, 400)
        assert np.mean(np.abs(H) ** 2) * 400 == pytest.approx(1.0, rel=0.02)
        np.testing.assert_array_equal(draw_instance(cfg, 5)[0], draw_instance(cfg, 5)[0])

    def test_null_solver(self):
        cfg = McConfig(K=50, alpha=2.0, trials=40, gamma=1.5, solver="null")
        res = monte_carlo_distortion(cfg)
        assert abs(res.mean - 1.5) < 3 * res.stderr

    def test_rzf_matches_replica(self):
        cfg = McConfig(K=100, alpha=2.0, trials=50, lam=0.1)
        res = monte_carlo_distortion(cfg)
        assert abs(res.mean - 0.03452) < max(3 * res.stderr, 0.05 * 0.03452)

    def test_order_independent(self):
        cfg = McConfig(K=12, alpha=2.0, trials=8, constellation=Mpsk(4), restarts=3)
        a = monte_carlo_distortion(cfg, workers=1)
        b = monte_carlo_distortion(cfg, workers=4)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_thread_variable(self, monkeypatch):
        monkeypatch.setenv("LSE_LAB_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("LSE_LAB_THREADS", "-1")
        with pytest.raises(ValueError):
            worker_count()

    def test_too_many_failures(self):
        cfg = McConfig(K=4, alpha=2.0, trials=5, constellation=Disk(0.01), solver="pgd")
        import lse_lab.experiments as ex
        orig = ex.precode_projected_gradient
        ex.precode_projected_gradient = lambda inst: orig(inst, max_iter=1, tol=0.0)
        try:
            with pytest.raises(ExperimentError):
                monte_carlo_distortion(cfg, workers=1)
        finally:
            ex.precode_projected_gradient = orig


class TestPowerDecay:
    def test_power_hits_target(self):
        q = power_for_distortion(0.1, 10.0, 1.0)
        assert 0 < q < 1.0

    def test_unreachable(self):
        with pytest.raises(BracketError):
            power_for_distortion(0.01, 1.0, 0.01)
        with pytest.raises(ValueError):
            power_for_distortion(2.0, 2.0, 1.0)

    def test_infeasible_loads_reported(self):
        r = power_decay_fit(0.1, [0.5, 10.0, 20.0], 0.2)
        assert [b["alpha"] for b in r.infeasible] == [0.5]
        assert r.alphas == [10.0, 20.0]

    def test_large_load_exponent(self):
        r = power_decay_fit(0.1, [20.0, 40.0, 80.0], 1.0)
        assert r.kappa == pytest.approx(-1.0, abs=0.1)
        r2 = power_decay_fit(0.1, [20.0, 40.0, 80.0], 2.0)
        assert r2.kappa == pytest.approx(r.kappa, abs=0.05)

    def test_too_few_loads(self):
        with pytest.raises(ExperimentError):
            power_decay_fit(0.1, [0.5, 10.0], 0.05)


GOLDEN_HEADER = ("alpha,set,P,M,p,gamma,sigma_u2,sigma_n2,lam,K,N,trials,seed,restarts,"
                 "D_replica_rs,rs_status,D_replica_rsb,D_mc_mean,D_mc_stderr,rate_bound,"
                 "entropy0")


class TestSweepOutput:
    def test_golden_header(self):
        assert ",".join(SWEEP_COLUMNS) == GOLDEN_HEADER
        fh = io.StringIO()
        write_sweep_csv([], fh)
        assert fh.getvalue() == GOLDEN_HEADER + "\n"

    def test_row_values(self):
        row = sweep_row(2.0, FullComplex(), lam=0.1)
        assert row.D_replica_rs == pytest.approx(0.03452, abs=1e-5)
        assert row.rs_status == "ok"
        fh = io.StringIO()
        write_sweep_csv([row], fh)
        line = fh.getvalue().splitlines()[1].split(",")
        assert line[0] == "2.0" and line[1] == "full"
        assert "np." not in fh.getvalue()

    def test_divergent_branch_flagged(self):
        row = sweep_row(7.0, Mpsk(2))
        assert row.rs_status == "divergent"
        assert row.D_replica_rs is None
        assert union_bound_epsilon(7.0, 2).epsilon_star > 0

    def test_monte_carlo_columns(self):
        row = sweep_row(2.0, Mpsk(2), K=8, trials=3, restarts=2)
        assert row.N == 16 and row.restarts == 2
        assert row.D_mc_stderr >= 0

    def test_manifest(self, tmp_path):
        path = tmp_path / "m.json"
        write_manifest(path, {"alpha": 2.0}, [0, 1], 0.5)
        data = json.loads(path.read_text())
        assert data["config"] == {"alpha": 2.0}
        assert set(data["versions"]) == {"lse_lab", "python", "numpy", "scipy"}
        assert data["seeds"] == [0, 1]

    def test_empty_row_formats(self):
        fh = io.StringIO()
        write_sweep_csv([SweepRow(alpha=1.0, set="disk")], fh)
        assert fh.getvalue().splitlines()[1].startswith("1.0,disk,,")

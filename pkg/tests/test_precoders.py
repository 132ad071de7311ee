import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lse_lab.constellations import Circle, Disk, FullComplex, Mpsk
from lse_lab.errors import DomainError, EnumerationLimitError
from lse_lab.precoders import (PrecodingInstance, empirical_distortion, exhaustive_oracle,
                               objective, precode_coordinate_descent,
                               precode_projected_gradient, rzf_precode, spectral_norm_sq)


def random_instance(K, N, seed, constellation=FullComplex(), gamma=1.0, lam=0.0):
    rng = np.random.default_rng(seed)
    H = (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) / np.sqrt(2 * N)
    u = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.sqrt(2)
    return PrecodingInstance(H, u, gamma, lam, constellation)


class TestInstance:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            PrecodingInstance(np.ones((2, 3)), np.ones(3))

    def test_negative_parameters(self):
        with pytest.raises(ValueError):
            PrecodingInstance(np.ones((1, 1)), np.ones(1), lam=-1.0)

    def test_penalty_dropped_on_constant_modulus(self):
        inst = PrecodingInstance(np.ones((1, 1)), np.ones(1), lam=3.0, constellation=Circle(1.0))
        assert inst.effective_lam == 0.0


class TestRzf:
    def test_scalar(self):
        inst = PrecodingInstance([[1.0]], [2.0], gamma=1.0, lam=1.0)
        res = rzf_precode(inst)
        np.testing.assert_allclose(res.v, [1.0])
        assert res.objective == pytest.approx(2.0)

    def test_singular_without_regulariser(self):
        inst = PrecodingInstance(np.ones((2, 2)), np.ones(2))
        with pytest.raises(DomainError, match="lam"):
            rzf_precode(inst)

    def test_large_regulariser_shrinks(self):
        inst = random_instance(4, 8, 1, lam=1e8)
        v = rzf_precode(inst).v
        bound = np.linalg.norm(inst.target) * np.linalg.norm(inst.H, 2) / inst.lam
        assert np.linalg.norm(v) <= bound

    def test_stationary_point(self):
        inst = random_instance(4, 8, 2, lam=0.3)
        v = rzf_precode(inst).v
        grad = 2 * (inst.H.conj().T @ (inst.H @ v - inst.target) + inst.lam * v)
        assert np.max(np.abs(grad)) < 1e-8
        # finite-difference check of the real gradient
        h = 1e-6
        for i in range(3):
            e = np.zeros(8, complex)
            e[i] = h
            fd = (objective(inst, v + e) - objective(inst, v - e)) / (2 * h)
            assert abs(fd) < 1e-6

    def test_objective_matches_direct_evaluation(self):
        inst = random_instance(5, 9, 3, lam=0.2)
        res = rzf_precode(inst)
        r = inst.H @ res.v - inst.target
        direct = np.linalg.norm(r) ** 2 + inst.lam * np.linalg.norm(res.v) ** 2
        assert res.objective == pytest.approx(direct, rel=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.1, 10.0), st.integers(0, 1000))
    def test_scaling_covariance(self, t, seed):
        inst = random_instance(3, 6, seed, lam=0.1)
        scaled = PrecodingInstance(inst.H, t * inst.u, inst.gamma, inst.lam)
        a, b = rzf_precode(inst), rzf_precode(scaled)
        np.testing.assert_allclose(b.v, t * a.v, rtol=1e-9, atol=1e-12)
        assert b.objective == pytest.approx(t * t * a.objective, rel=1e-9)


class TestSpectralNorm:
    def test_against_svd(self):
        inst = random_instance(8, 16, 4)
        ref = np.linalg.norm(inst.H, 2) ** 2
        assert spectral_norm_sq(inst.H) == pytest.approx(ref, rel=1e-6)


class TestProjectedGradient:
    def test_scalar_projection(self):
        inst = PrecodingInstance([[1.0]], [3.0], constellation=Disk(1.0))
        res = precode_projected_gradient(inst)
        np.testing.assert_allclose(res.v, [1.0], atol=1e-12)
        assert res.objective == pytest.approx(4.0)

    def test_loose_peak_matches_rzf(self):
        inst = random_instance(8, 16, 5, constellation=Disk(1e6), lam=0.1)
        ref = rzf_precode(PrecodingInstance(inst.H, inst.u, inst.gamma, inst.lam))
        res = precode_projected_gradient(inst, tol=1e-14, max_iter=100000)
        assert res.objective == pytest.approx(ref.objective, rel=1e-6)

    def test_fixed_point_residual(self):
        inst = random_instance(8, 16, 6, constellation=Disk(0.05), lam=0.05)
        res = precode_projected_gradient(inst, tol=1e-14, max_iter=100000)
        assert np.all(np.abs(res.v) <= np.sqrt(0.05) + 1e-15)
        L = 2 * (inst.lam + spectral_norm_sq(inst.H))
        grad = 2 * (inst.H.conj().T @ (inst.H @ res.v - inst.target) + inst.lam * res.v)
        step = Disk(0.05).project(res.v - grad / L)
        assert np.max(np.abs(step - res.v)) < 1e-6

    def test_monotone_objective(self):
        inst = random_instance(6, 12, 7, constellation=Disk(0.1))
        objs = [precode_projected_gradient(inst, max_iter=k, tol=0.0).objective
                for k in range(1, 30)]
        assert np.all(np.diff(objs) <= 1e-14)

    def test_unconverged_flag(self):
        inst = random_instance(6, 12, 8, constellation=Disk(0.1))
        res = precode_projected_gradient(inst, max_iter=1, tol=0.0)
        assert not res.converged

    def test_restart_invariance(self):
        inst = random_instance(6, 12, 9, constellation=Disk(0.1), lam=0.01)
        rng = np.random.default_rng(0)
        objs = [precode_projected_gradient(inst, tol=1e-15, max_iter=200000,
                                           v0=rng.standard_normal(12)).objective
                for _ in range(5)]
        assert max(objs) - min(objs) < 1e-8 * min(objs)

    def test_rejects_nonconvex(self):
        with pytest.raises(ValueError):
            precode_projected_gradient(random_instance(2, 2, 0, constellation=Circle(1.0)))


class TestCoordinateDescent:
    def test_bpsk_two_antennas(self):
        inst = PrecodingInstance([[1.0, 1.0]], [2.0], constellation=Mpsk(2))
        res = precode_coordinate_descent(inst, seed=0)
        np.testing.assert_array_equal(res.v, [1.0, 1.0])
        assert res.objective == pytest.approx(0.0, abs=1e-24)
        assert exhaustive_oracle(inst).objective == pytest.approx(res.objective, abs=1e-24)

    def test_circle_phase_alignment(self):
        inst = PrecodingInstance([[1.0]], [2j], constellation=Circle(1.0))
        res = precode_coordinate_descent(inst, seed=0)
        np.testing.assert_allclose(res.v, [1j], atol=1e-12)
        assert res.objective == pytest.approx(1.0)

    def test_circle_feasibility(self):
        inst = random_instance(10, 20, 10, constellation=Circle(2.0))
        res = precode_coordinate_descent(inst, restarts=3, seed=1)
        np.testing.assert_allclose(np.abs(res.v) ** 2, 2.0, atol=1e-12)

    def test_mpsk_grid_membership(self):
        c = Mpsk(8, 1.5)
        inst = random_instance(10, 20, 11, constellation=c)
        res = precode_coordinate_descent(inst, restarts=3, seed=2)
        assert all(np.any(x == c.points) for x in res.v)

    def test_zero_column_skipped(self):
        H = np.array([[1.0, 0.0]])
        inst = PrecodingInstance(H, [1.0], constellation=Mpsk(2))
        res = precode_coordinate_descent(inst, seed=3)
        assert res.v[0] == 1.0

    def test_disk_matches_projected_gradient(self):
        inst = random_instance(6, 12, 12, constellation=Disk(0.1), lam=0.05)
        a = precode_coordinate_descent(inst, restarts=2, seed=0, tol=1e-14)
        b = precode_projected_gradient(inst, tol=1e-15, max_iter=200000)
        assert a.objective == pytest.approx(b.objective, rel=1e-7)

    def test_reproducible(self):
        inst = random_instance(8, 16, 13, constellation=Mpsk(4))
        a = precode_coordinate_descent(inst, restarts=5, seed=42)
        b = precode_coordinate_descent(inst, restarts=5, seed=42)
        np.testing.assert_array_equal(a.v, b.v)

    def test_restarts_counted(self):
        inst = random_instance(4, 8, 14, constellation=Mpsk(2))
        assert precode_coordinate_descent(inst, restarts=7, seed=0).restarts_used == 7
        assert precode_coordinate_descent(inst, restarts=7, seed=0,
                                          v0=np.ones(8)).restarts_used == 8

    def test_near_exhaustive_on_small_bpsk(self):
        hits = 0
        for seed in range(100):
            inst = random_instance(6, 12, 1000 + seed, constellation=Mpsk(2))
            cd = precode_coordinate_descent(inst, seed=seed).objective
            ex = exhaustive_oracle(inst).objective
            assert ex <= cd * (1 + 1e-12) + 1e-14
            hits += cd <= ex * (1 + 1e-9) + 1e-14
        assert hits >= 95


class TestExhaustive:
    def test_matches_brute_force(self):
        c = Mpsk(3)
        inst = random_instance(3, 5, 15, constellation=c)
        best = min(objective(inst, np.array(x)) for x in itertools.product(c.points, repeat=5))
        assert exhaustive_oracle(inst).objective == pytest.approx(best, rel=1e-12)

    def test_beats_random_points(self):
        c = Mpsk(2)
        inst = random_instance(5, 10, 16, constellation=c)
        opt = exhaustive_oracle(inst).objective
        rng = np.random.default_rng(0)
        assert all(opt <= objective(inst, c.sample(rng, 10)) for _ in range(1000))

    def test_rotation_symmetry(self):
        M = 4
        c = Mpsk(M)
        inst = random_instance(4, 8, 17, constellation=c)
        rot = PrecodingInstance(inst.H, inst.u * np.exp(2j * np.pi / M), constellation=c)
        assert exhaustive_oracle(rot).objective == pytest.approx(
            exhaustive_oracle(inst).objective, rel=1e-10)

    def test_tie_break_lexicographic(self):
        # both candidates give zero residual; index 0 (symbol m=1) comes first
        inst = PrecodingInstance(np.zeros((1, 1)), [0.0], constellation=Mpsk(2))
        np.testing.assert_array_equal(exhaustive_oracle(inst).v, Mpsk(2).points[:1])

    def test_limit(self):
        inst = random_instance(2, 30, 18, constellation=Mpsk(2))
        with pytest.raises(EnumerationLimitError) as err:
            exhaustive_oracle(inst)
        assert err.value.required == 2 ** 30

    def test_requires_mpsk(self):
        with pytest.raises(ValueError):
            exhaustive_oracle(random_instance(2, 2, 0, constellation=Circle(1.0)))


class TestEmpiricalDistortion:
    def test_perfect_precoding(self):
        inst = random_instance(3, 6, 19)
        v = np.linalg.pinv(inst.H) @ inst.target
        assert empirical_distortion(inst.H, inst.u, v, 1.0) == pytest.approx(0.0, abs=1e-20)

    def test_no_transmission(self):
        inst = random_instance(3, 6, 20)
        d = empirical_distortion(inst.H, inst.u, np.zeros(6), 2.0)
        assert d == pytest.approx(2.0 * np.linalg.norm(inst.u) ** 2 / 3)

    def test_scalar_rzf(self):
        assert empirical_distortion([[1.0]], [2.0], np.array([1.0]), 1.0) == pytest.approx(1.0)

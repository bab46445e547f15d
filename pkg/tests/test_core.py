import math

import numpy as np
import pytest

import vibench as vb
from conftest import linear_finite_sum

THE_CAP = 1.0 / 16.0


class TestLipschitzData:
    def test_from_components(self):
        lip = vb.LipschitzData.from_components(1.0, [3.0, 4.0])
        assert lip.l_bar == pytest.approx(math.sqrt(12.5), rel=1e-15)

    def test_lbar_consistency_enforced(self):
        with pytest.raises(ValueError, match="l_bar"):
            vb.LipschitzData(l_full=1.0, per_component=(1.0, 1.0), l_bar=2.0)

    def test_l_cannot_exceed_lbar(self):
        with pytest.raises(ValueError, match="exceed"):
            vb.LipschitzData.from_components(3.0, [1.0, 1.0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            vb.LipschitzData.from_components(-1.0, [1.0])

    def test_all_zero_allowed(self):
        lip = vb.LipschitzData.from_components(0.0, [0.0, 0.0])
        assert lip.l_bar == 0.0


class TestSolverParams:
    def test_validation(self):
        good = dict(eta=0.1, gamma=0.5, prob=0.5, batch=1, max_iters=10)
        vb.SolverParams(**good)
        for field, bad in [("eta", 0.0), ("gamma", 1.5), ("gamma", -0.1),
                           ("prob", 0.0), ("prob", 1.5), ("batch", 0),
                           ("max_iters", -1), ("seed", -1), ("seed", 2 ** 64)]:
            with pytest.raises(ValueError):
                vb.SolverParams(**{**good, field: bad})

    def test_gamma_zero_and_one_admitted(self):
        vb.SolverParams(eta=0.1, gamma=0.0, prob=1.0, batch=1, max_iters=1)
        vb.SolverParams(eta=0.1, gamma=1.0, prob=1.0, batch=1, max_iters=1)


class TestTuneParams:
    def test_unit_constants_single_batch(self):
        p = vb.tune_params(1.0, 1.0, 1, THE_CAP, num_components=1)
        assert p.eta == 1.0 / 32.0
        assert p.gamma == p.prob == THE_CAP

    def test_large_batch_hits_spectral_cap(self):
        p = vb.tune_params(1.0, 1.0, 64, THE_CAP, num_components=64)
        assert p.eta == 1.0 / 8.0

    def test_oracle_optimal_probability(self):
        p = vb.tune_params(1.0, 1.0, 4, num_components=100, oracle_optimal=True)
        assert p.prob == p.gamma == 0.04
        assert not any("clamp" in w for w in p.warnings)

    def test_oracle_optimal_clamped(self):
        p = vb.tune_params(1.0, 1.0, 50, num_components=100, oracle_optimal=True)
        assert p.prob == p.gamma == THE_CAP
        assert any("clamp" in w for w in p.warnings)

    def test_min_semantics_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            l_full = float(rng.uniform(0.1, 10))
            l_bar = l_full * float(rng.uniform(1.0, 20))
            m = int(rng.integers(1, 50))
            b = int(rng.integers(1, m + 1))
            gamma = float(rng.uniform(1e-3, THE_CAP))
            p = vb.tune_params(l_full, l_bar, b, gamma, num_components=m)
            assert p.eta == min(math.sqrt(gamma * b) / (8 * l_bar),
                                1 / (8 * l_full))
            assert p.eta <= 1 / (8 * l_full)
            assert p.eta <= math.sqrt(gamma * b) / (8 * l_bar)

    def test_monotone_in_batch(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            l_full = float(rng.uniform(0.1, 5))
            l_bar = l_full * float(rng.uniform(1.0, 10))
            gamma = float(rng.uniform(1e-3, THE_CAP))
            etas = [vb.tune_params(l_full, l_bar, b, gamma,
                                   num_components=64).eta
                    for b in range(1, 65)]
            assert all(e2 >= e1 for e1, e2 in zip(etas, etas[1:]))

    def test_batch_domination_warning(self):
        # l_bar*sqrt(M)/l_full = 8, so b = 64 is flagged and b = 4 is not
        p = vb.tune_params(1.0, 1.0, 64, THE_CAP, num_components=64)
        assert any("dominates" in w for w in p.warnings)
        p = vb.tune_params(1.0, 1.0, 4, THE_CAP, num_components=64)
        assert not any("dominates" in w for w in p.warnings)

    def test_rejects_bad_gamma_and_constants(self):
        with pytest.raises(ValueError):
            vb.tune_params(1.0, 1.0, 1, 0.2, num_components=4)
        with pytest.raises(ValueError):
            vb.tune_params(1.0, 1.0, 1, 0.0, num_components=4)
        with pytest.raises(ValueError):
            vb.tune_params(0.0, 1.0, 1, num_components=4)
        with pytest.raises(ValueError):
            vb.tune_params(1.0, 1.0, 5, num_components=4)

    def test_empirical_mode_scales_variance_branch(self):
        m = 100
        p_wc = vb.tune_params(1e-3, 1.0, 1, THE_CAP, num_components=m)
        p_emp = vb.tune_params(1e-3, 1.0, 1, THE_CAP, num_components=m,
                               constant_mode="empirical")
        assert p_emp.eta == pytest.approx(p_wc.eta * math.sqrt(m), rel=1e-12)
        assert any("empirical" in w for w in p_emp.warnings)


class TestMakeMinimizationProblem:
    def test_quadratic_finite_sum_solved_end_to_end(self):
        # f_m(x) = 0.5*||x - a_m||^2 averages to a quadratic minimized at
        # mean(a); the reduction plus the batched solver must find it
        rng = np.random.default_rng(31)
        anchors = [rng.standard_normal(3) for _ in range(6)]
        target = np.mean(anchors, axis=0)
        lip = vb.LipschitzData.from_components(1.0, [1.0] * 6)
        prob = vb.make_minimization_problem(
            [lambda z, a=a: z - a for a in anchors],
            vb.zero_function(), dim=3, lipschitz=lip)
        report = vb.verify_problem(prob, probes=15, rng_seed=2)
        assert report.passed, str(report)
        params = vb.tune_params(1.0, 1.0, batch=2, num_components=6,
                                oracle_optimal=True, max_iters=4000, seed=5)
        trace = vb.run_ommb(prob, params, cadence=500,
                            x0=np.zeros(3) + 5.0)
        # last iterate sits on the minimizer; the ergodic average trails it
        # at the O(1/K) rate because of the far-away start
        assert np.linalg.norm(trace.x_last - target) <= 1e-10
        assert vb.prox_residual(prob, trace.x_last, 0.5) <= 1e-10
        assert np.linalg.norm(trace.x_avg - target) <= 0.1
        assert np.isnan(trace.rows[-1].gap_avg)  # no closed-form gap off-game

    def test_stationarity_matches_minimizer(self):
        prob = vb.make_minimization_problem(
            [lambda z: 2.0 * (z - 1.0)], vb.zero_function(), dim=2)
        assert np.linalg.norm(prob.full_eval(np.ones(2))) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError, match="at least one"):
            vb.make_minimization_problem([], vb.zero_function(), dim=2)
        prob = vb.make_minimization_problem(
            [lambda z: np.zeros(3)], vb.zero_function(), dim=2)
        with pytest.raises(ValueError, match="shape"):
            prob.full_eval(np.zeros(2))


class TestMakeSaddleProblem:
    def test_scalar_bilinear(self):
        # f(x, y) = x*y: stacked operator is (y, -x)
        prob = vb.make_saddle_problem(
            grad_x=lambda x, y: y, grad_y=lambda x, y: x,
            g1=vb.zero_function(), g2=vb.zero_function(),
            dim_x=1, dim_y=1)
        z = np.array([2.0, 3.0])
        assert np.array_equal(prob.full_eval(z), np.array([3.0, -2.0]))

    def test_zero_objective(self):
        prob = vb.make_saddle_problem(
            grad_x=lambda x, y: np.zeros(2), grad_y=lambda x, y: np.zeros(3),
            g1=vb.zero_function(), g2=vb.zero_function(), dim_x=2, dim_y=3)
        z = np.arange(5.0)
        assert np.array_equal(prob.full_eval(z), np.zeros(5))
        # every feasible point is stationary for the zero operator
        assert vb.prox_residual(prob, z, 0.5) == 0.0

    def test_matches_matrix_game_operator(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((4, 4))
        game = vb.MatrixGame(A)
        prob = vb.make_saddle_problem(
            grad_x=lambda x, y: A @ y, grad_y=lambda x, y: A.T @ x,
            g1=vb.zero_function(), g2=vb.zero_function(), dim_x=4, dim_y=4)
        for _ in range(20):
            z = rng.standard_normal(8)
            diff = prob.full_eval(z) - game.full_operator(z)
            assert np.linalg.norm(diff) <= 1e-12

    def test_interior_stationary_point(self):
        # f(x, y) = (x-1)^2/2 - (y+2)^2/2 has gradient zero at (1, -2)
        prob = vb.make_saddle_problem(
            grad_x=lambda x, y: x - 1.0, grad_y=lambda x, y: -(y + 2.0),
            g1=vb.zero_function(), g2=vb.zero_function(), dim_x=1, dim_y=1)
        z_star = np.array([1.0, -2.0])
        assert np.linalg.norm(prob.full_eval(z_star)) == 0.0

    def test_dimension_mismatch_raises(self):
        prob = vb.make_saddle_problem(
            grad_x=lambda x, y: np.zeros(3), grad_y=lambda x, y: np.zeros(1),
            g1=vb.zero_function(), g2=vb.zero_function(), dim_x=2, dim_y=1)
        with pytest.raises(ValueError, match="block dims"):
            prob.full_eval(np.zeros(3))

    def test_product_prox(self):
        dom = vb.SimplexDomain(2)
        prob = vb.make_saddle_problem(
            grad_x=lambda x, y: y, grad_y=lambda x, y: x,
            g1=vb.simplex_product_function([dom]),
            g2=vb.simplex_product_function([dom]),
            dim_x=2, dim_y=2)
        out = prob.prox.prox_map(1.0, np.zeros(4))
        assert np.allclose(out, np.full(4, 0.5))
        assert prob.prox.domain_test(out)


class TestProblemType:
    def test_mean_consistency_over_probes(self):
        rng = np.random.default_rng(2)
        prob = linear_finite_sum(rng)
        for _ in range(100):
            z = rng.standard_normal(prob.dim)
            full = prob.full_eval(z)
            mean = prob.component_mean(z)
            assert np.linalg.norm(full - mean) <= 1e-10 * max(
                np.linalg.norm(full), 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            vb.FiniteSumProblem(dim=0, num_components=1,
                                component_eval=lambda j, z: z,
                                full_eval=lambda z: z, prox=vb.zero_function())
        with pytest.raises(ValueError):
            vb.FiniteSumProblem(dim=2, num_components=2,
                                component_eval=lambda j, z: z,
                                full_eval=lambda z: z, prox=vb.zero_function(),
                                lipschitz=vb.LipschitzData.from_components(1, [1]))


class TestVerifyProblem:
    def test_two_component_split_passes(self):
        # components 2x and 0 average to x
        prob = vb.FiniteSumProblem(
            dim=3, num_components=2,
            component_eval=lambda j, z: 2.0 * z if j == 0 else np.zeros(3),
            full_eval=lambda z: np.asarray(z, dtype=float).copy(),
            prox=vb.zero_function(),
            lipschitz=vb.LipschitzData.from_components(math.sqrt(2.0), [2.0, 0.0]))
        report = vb.verify_problem(prob, probes=20, rng_seed=0)
        assert report.passed, str(report)

    def test_understated_component_constant_fails(self):
        lie = vb.LipschitzData.from_components(math.sqrt(0.5), [1.0, 0.0])
        prob = vb.FiniteSumProblem(
            dim=3, num_components=2,
            component_eval=lambda j, z: 2.0 * z if j == 0 else np.zeros(3),
            full_eval=lambda z: np.asarray(z, dtype=float).copy(),
            prox=vb.zero_function(), lipschitz=lie)
        report = vb.verify_problem(prob, probes=10, rng_seed=0)
        assert not report.passed
        failing = [c.name for c in report.checks if not c.passed]
        assert failing == ["component-lipschitz"]

    def test_nonmonotone_operator_fails(self):
        prob = vb.FiniteSumProblem(
            dim=2, num_components=1,
            component_eval=lambda j, z: -np.asarray(z, dtype=float),
            full_eval=lambda z: -np.asarray(z, dtype=float),
            prox=vb.zero_function(),
            lipschitz=vb.LipschitzData.from_components(1.0, [1.0]))
        report = vb.verify_problem(prob, probes=10, rng_seed=0)
        failing = [c.name for c in report.checks if not c.passed]
        assert "monotonicity" in failing

    def test_game_problem_passes(self):
        game = vb.make_game(vb.GeneratorSpec("seeded_gaussian", dim=5, seed=3))
        report = vb.verify_problem(game.problem(), probes=25, rng_seed=1)
        assert report.passed, str(report)

    def test_probe_count_validated(self):
        game = vb.make_game(vb.GeneratorSpec("seeded_gaussian", dim=3, seed=0))
        with pytest.raises(ValueError):
            vb.verify_problem(game.problem(), probes=0)

import numpy as np
import pytest

import vibench as vb
from conftest import sort_threshold_projection


class TestProjectSimplex:
    def test_center_of_zero_vector(self, backend):
        out = vb.project_simplex(np.zeros(3), backend=backend)
        np.testing.assert_allclose(out, np.full(3, 1 / 3), atol=1e-15)

    def test_idempotent_on_feasible_points(self, backend):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = rng.dirichlet(np.ones(6))
            out = vb.project_simplex(v, backend=backend)
            np.testing.assert_allclose(out, v, atol=1e-12)
            again = vb.project_simplex(out, backend=backend)
            np.testing.assert_allclose(again, out, atol=1e-12)

    def test_two_point_example_matches_oracle(self, backend):
        v = np.array([1.5, 0.5])
        expected = sort_threshold_projection(v)
        np.testing.assert_allclose(expected, [1.0, 0.0], atol=1e-15)
        out = vb.project_simplex(v, backend=backend)
        np.testing.assert_allclose(out, expected, atol=1e-15)

    @pytest.mark.parametrize("dim", [1, 2, 3, 10, 137])
    def test_matches_sort_oracle_random(self, backend, dim):
        rng = np.random.default_rng(dim)
        for scale in (1.0, 1e-6, 1e6):
            for _ in range(40):
                v = rng.standard_normal(dim) * scale
                out = vb.project_simplex(v, backend=backend)
                ref = sort_threshold_projection(v)
                assert np.max(np.abs(out - ref)) <= 1e-10 * max(1.0, scale)
                assert abs(out.sum() - 1.0) <= 1e-10
                assert out.min() >= 0.0

    def test_ties_and_structured_inputs(self, backend):
        cases = [
            np.array([5.0, 5.0, 5.0, 5.0]),
            np.array([1.0, 1.0, 0.0, 0.0]),
            np.array([-3.0, -3.0, -3.0]),
            np.arange(10.0),
            np.arange(10.0)[::-1].copy(),
            np.array([0.3, 0.3, 0.4]),
            np.array([1e12, 0.0, -1e12]),
        ]
        for v in cases:
            out = vb.project_simplex(v, backend=backend)
            ref = sort_threshold_projection(v)
            scale = max(1.0, np.max(np.abs(v)))
            assert np.max(np.abs(out - ref)) <= 1e-10 * scale

    def test_nonexpansive(self, backend):
        rng = np.random.default_rng(3)
        for _ in range(200):
            u = rng.standard_normal(8)
            v = rng.standard_normal(8)
            pu = vb.project_simplex(u, backend=backend)
            pv = vb.project_simplex(v, backend=backend)
            assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-12

    def test_normal_cone_inequality_at_vertices(self, backend):
        # x - y must lie in the normal cone at y: <x - y, u - y> <= 0 for
        # every feasible u; vertices suffice by linearity.
        rng = np.random.default_rng(4)
        for _ in range(100):
            x = rng.standard_normal(5) * 3
            y = vb.project_simplex(x, backend=backend)
            for i in range(5):
                u = np.zeros(5)
                u[i] = 1.0
                assert float((x - y) @ (u - y)) <= 1e-10

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            vb.project_simplex(np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            vb.project_simplex(np.array([np.inf, 0.0]))
        with pytest.raises(ValueError):
            vb.project_simplex(np.zeros((2, 2)))


class TestSimplexDomain:
    def test_membership(self):
        dom = vb.SimplexDomain(3)
        assert dom.contains(np.array([0.2, 0.3, 0.5]))
        assert dom.contains(np.array([0.2 - 1e-13, 0.3, 0.5 + 1e-13]))
        assert not dom.contains(np.array([0.5, 0.6, -0.1]))
        assert not dom.contains(np.array([0.2, 0.3, 0.4]))
        assert not dom.contains(np.zeros(2))

    def test_dim_validated(self):
        with pytest.raises(ValueError):
            vb.SimplexDomain(0)


class TestProxIndicatorProduct:
    def test_feasible_blocks_unchanged(self):
        doms = [vb.SimplexDomain(2), vb.SimplexDomain(3)]
        z = np.array([0.5, 0.5, 0.2, 0.3, 0.5])
        out = vb.prox_indicator_product(doms, 1.0, z)
        np.testing.assert_allclose(out, z, atol=1e-12)

    def test_alpha_free(self):
        doms = [vb.SimplexDomain(4), vb.SimplexDomain(4)]
        rng = np.random.default_rng(9)
        z = rng.standard_normal(8)
        a = vb.prox_indicator_product(doms, 1.0, z)
        b = vb.prox_indicator_product(doms, 100.0, z)
        assert np.array_equal(a, b)

    def test_blockwise_values_match_oracle(self):
        doms = [vb.SimplexDomain(2), vb.SimplexDomain(2)]
        z = np.array([0.0, 0.0, 2.0, 0.0])
        out = vb.prox_indicator_product(doms, 1.0, z)
        expected = np.concatenate([sort_threshold_projection(z[:2]),
                                   sort_threshold_projection(z[2:])])
        np.testing.assert_allclose(out, expected, atol=1e-15)
        np.testing.assert_allclose(out, [0.5, 0.5, 1.0, 0.0], atol=1e-15)

    def test_partition_mismatch(self):
        with pytest.raises(ValueError, match="partition"):
            vb.prox_indicator_product([vb.SimplexDomain(2)], 1.0, np.zeros(3))


class TestProxZero:
    def test_identity(self):
        z = np.array([3.0, -2.0, 0.0])
        out = vb.prox_zero(1e6, z)
        assert np.array_equal(out, z)
        assert out is not z  # fresh array, caller owns it

    def test_zero_function_bundle(self):
        g = vb.zero_function()
        assert g.value(np.ones(3)) == 0.0
        assert g.domain_test(np.full(3, -5.0))


class TestProxResidual:
    def test_scalar_example(self):
        from conftest import scalar_problem
        prob = scalar_problem(1.0)
        assert vb.prox_residual(prob, np.array([1.0]), 0.1) == pytest.approx(0.1)

    def test_zero_operator_zero_residual(self):
        prob = vb.make_saddle_problem(
            grad_x=lambda x, y: np.zeros(2), grad_y=lambda x, y: np.zeros(2),
            g1=vb.zero_function(), g2=vb.zero_function(), dim_x=2, dim_y=2)
        assert vb.prox_residual(prob, np.arange(4.0), 1.0) == 0.0

    def test_zero_at_exact_saddle(self):
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        game = vb.MatrixGame(A)
        x, y, _ = vb.exact_small_game_solution(A)
        z = np.concatenate([x, y])
        assert vb.prox_residual(game.problem(), z, 0.3) <= 1e-10

    def test_eta_validated(self):
        from conftest import scalar_problem
        with pytest.raises(ValueError):
            vb.prox_residual(scalar_problem(), np.array([1.0]), 0.0)

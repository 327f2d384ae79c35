"""Projection tests: KKT conditions, oracles, firm nonexpansiveness."""

import numpy as np
import pytest
from scipy.optimize import lsq_linear, minimize_scalar

from chemotax.errors import Infeasible, NewtonStall
from chemotax.grid import GridSpec, gradient, inner_product, l2_norm, laplacian, total_mass
from chemotax.linsolve import SpectralPlan
from chemotax.projection import (clip_positive_l2, project_h1_positive,
                                 project_l2_mass_positive)


@pytest.fixture(scope="module")
def plan8():
    return SpectralPlan(GridSpec(8))


def h1_inner(u, v, h):
    gu, gv = gradient(u, h), gradient(v, h)
    return (inner_product(u, v, h) + inner_product(gu.x, gv.x, h)
            + inner_product(gu.y, gv.y, h))


class TestClipPositive:
    def test_nonnegative_input_identity(self):
        u = np.abs(np.random.default_rng(0).standard_normal((8, 8)))
        out = clip_positive_l2(u)
        assert np.array_equal(out.corrected, u)
        assert np.all(out.multiplier_lambda == 0)
        assert out.max_violation_before == 0.0

    def test_constant_negative(self):
        out = clip_positive_l2(np.full((4, 4), -1.0))
        assert np.all(out.corrected == 0.0)
        assert np.all(out.multiplier_lambda == 1.0)
        assert out.max_violation_before == 1.0

    def test_matches_per_node_minimization_oracle(self):
        u = np.random.default_rng(1).standard_normal((4, 4))
        out = clip_positive_l2(u)
        for idx in np.ndindex(4, 4):
            res = minimize_scalar(lambda x: (x - u[idx]) ** 2,
                                  bounds=(0.0, 10.0), method="bounded",
                                  options={"xatol": 1e-12})
            assert out.corrected[idx] == pytest.approx(res.x, abs=1e-8)

    def test_kkt_exact(self):
        u = np.random.default_rng(2).standard_normal((8, 8))
        out = clip_positive_l2(u)
        assert np.all(out.corrected >= 0)
        assert np.all(out.multiplier_lambda >= 0)
        assert np.all(out.corrected * out.multiplier_lambda == 0.0)
        assert np.array_equal(out.corrected,
                              u + out.multiplier_lambda)


class TestH1Positive:
    def test_nonnegative_identity_zero_iterations(self, plan8):
        p = np.abs(np.random.default_rng(3).standard_normal((8, 8)))
        out = project_h1_positive(p, plan8)
        assert out.newton_iterations == 0
        assert np.array_equal(out.corrected, p)
        assert np.all(out.multiplier_zeta == 0)

    def test_constant_negative(self, plan8):
        c = 2.5
        out = project_h1_positive(np.full((8, 8), -c), plan8)
        assert np.allclose(out.corrected, 0.0, atol=1e-12)
        assert np.allclose(out.multiplier_zeta, c, atol=1e-10)

    def test_kkt_system_satisfied(self, plan8):
        h = plan8.spec.h
        pt = np.random.default_rng(4).standard_normal((8, 8)) * 0.5
        out = project_h1_positive(pt, plan8)
        p, zeta = out.corrected, out.multiplier_zeta
        resid = (p - laplacian(p, h)) - (pt - laplacian(pt, h)) - zeta
        scale = l2_norm(pt - laplacian(pt, h), h)
        assert l2_norm(resid, h) <= 1e-9 * scale
        assert np.min(p) >= -1e-12
        assert np.min(zeta) >= -1e-12
        assert np.max(np.abs(p * zeta)) <= 1e-10 * max(1.0, np.max(np.abs(pt)))

    def test_matches_dense_qp_oracle(self, plan8):
        # independent oracle: bounded-variable least squares on the Cholesky
        # factor of the H1 Gram matrix
        n = 8
        h = plan8.spec.h
        lap = np.zeros((n * n, n * n))
        for i in range(n):
            for j in range(n):
                r = i * n + j
                lap[r, r] -= 4 / h ** 2
                for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                    lap[r, (a % n) * n + (b % n)] += 1 / h ** 2
        gram = np.eye(n * n) - lap
        factor = np.linalg.cholesky(gram).T
        for seed in range(25):
            pt = np.random.default_rng(seed).standard_normal((n, n)) * 0.4
            out = project_h1_positive(pt, plan8)
            oracle = lsq_linear(factor, factor @ pt.ravel(),
                                bounds=(0.0, np.inf), method="bvls",
                                tol=1e-14)
            assert np.max(np.abs(out.corrected.ravel() - oracle.x)) <= 1e-7

    def test_stall_raises(self, plan8):
        pt = np.random.default_rng(5).standard_normal((8, 8))
        with pytest.raises(NewtonStall):
            project_h1_positive(pt, plan8, max_newton=1, tol=1e-14)


def random_mass_instance(seed, n=4, m=8):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((m, n, n)) * 0.4 + 0.3
    h = 1.0 / n
    target = total_mass(np.maximum(psi, 0.0), h) * (0.5 + 0.4 * rng.random())
    return psi, target, h


class TestMassPositive:
    def test_feasible_input_identity(self):
        psi = np.abs(np.random.default_rng(6).standard_normal((8, 4, 4)))
        h = 0.25
        out = project_l2_mass_positive(psi, total_mass(psi, h), h)
        assert out.multiplier_xi == pytest.approx(0.0, abs=1e-14)
        assert np.allclose(out.corrected, psi)

    def test_uniform_excess_shifts_by_eighth(self):
        # eight constant compartments, excess mass eps over a unit domain
        psi = np.arange(1.0, 9.0)[:, None, None] * np.ones((1, 4, 4))
        h = 0.25
        eps = 0.08
        out = project_l2_mass_positive(psi, total_mass(psi, h) - eps, h)
        assert out.multiplier_xi == pytest.approx(eps / 8.0, rel=1e-10)

    def test_xi_matches_bisection_oracle(self):
        for seed in range(20):
            psi, target, h = random_mass_instance(seed)
            out = project_l2_mass_positive(psi, target, h)

            def residual(xi):
                return h * h * np.sum(np.maximum(psi - xi, 0.0)) - target

            lo, hi = -np.max(np.abs(psi)) - target, float(np.max(psi))
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if residual(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            assert out.multiplier_xi == pytest.approx(0.5 * (lo + hi),
                                                      abs=1e-12)
            mass = total_mass(out.corrected, h)
            assert abs(mass - target) <= 1e-11 * target

    def test_negative_nodes_rebalanced(self):
        rng = np.random.default_rng(7)
        psi = rng.standard_normal((8, 4, 4)) * 0.2 + 0.25
        psi[1, 0, 0] = -0.9
        h = 0.25
        target = 0.8 * total_mass(np.maximum(psi, 0), h)
        out = project_l2_mass_positive(psi, target, h)
        assert np.all(out.corrected >= 0)
        assert np.all(out.multiplier_lambda >= -1e-14)
        compl = np.abs(out.corrected * out.multiplier_lambda)
        assert np.max(compl) <= 1e-10
        assert abs(total_mass(out.corrected, h) - target) <= 1e-11 * target

    def test_infeasible_target(self):
        psi = np.ones((8, 4, 4))
        with pytest.raises(Infeasible):
            project_l2_mass_positive(psi, -1.0, 0.25)
        with pytest.raises(Infeasible):
            project_l2_mass_positive(psi, 0.0, 0.25)

    def test_newton_iteration_budget(self):
        for seed in range(50):
            psi, target, h = random_mass_instance(seed + 100)
            out = project_l2_mass_positive(psi, target, h)
            assert out.newton_iterations <= 5


class TestFirmProjection:
    """|P(u) - v|^2 + |P(u) - u|^2 <= |u - v|^2 for admissible v."""

    def test_clip_l2(self):
        rng = np.random.default_rng(8)
        h = 0.25
        for _ in range(200):
            u = rng.standard_normal((4, 4))
            v = np.abs(rng.standard_normal((4, 4)))
            pu = clip_positive_l2(u).corrected
            lhs = l2_norm(pu - v, h) ** 2 + l2_norm(pu - u, h) ** 2
            rhs = l2_norm(u - v, h) ** 2
            assert lhs <= rhs + 1e-12

    def test_h1(self, plan8):
        rng = np.random.default_rng(9)
        h = plan8.spec.h
        for _ in range(30):
            u = rng.standard_normal((8, 8)) * 0.5
            v = np.abs(rng.standard_normal((8, 8)))
            pu = project_h1_positive(u, plan8).corrected
            lhs = h1_inner(pu - v, pu - v, h) + h1_inner(pu - u, pu - u, h)
            rhs = h1_inner(u - v, u - v, h)
            assert lhs <= rhs + 1e-9 * max(rhs, 1.0)

    def test_mass(self):
        rng = np.random.default_rng(10)
        h = 0.25
        for _ in range(100):
            u = rng.standard_normal((8, 4, 4)) * 0.3 + 0.3
            target = total_mass(np.maximum(u, 0), h) * 0.9
            v = np.abs(rng.standard_normal((8, 4, 4)))
            v *= target / total_mass(v, h)  # admissible: v >= 0, right mass
            pu = project_l2_mass_positive(u, target, h).corrected
            lhs = l2_norm(pu - v, h) ** 2 + l2_norm(pu - u, h) ** 2
            rhs = l2_norm(u - v, h) ** 2
            assert lhs <= rhs + 1e-11 * max(rhs, 1.0)


class TestIdempotence:
    def test_all_projections(self, plan8):
        rng = np.random.default_rng(11)
        u = rng.standard_normal((8, 8))
        once = clip_positive_l2(u).corrected
        assert np.array_equal(clip_positive_l2(once).corrected, once)

        p1 = project_h1_positive(u * 0.4, plan8).corrected
        p2 = project_h1_positive(p1, plan8).corrected
        assert np.max(np.abs(p2 - p1)) <= 1e-12

        psi = rng.standard_normal((8, 8, 8)) * 0.3 + 0.3
        h = 0.125
        target = 0.9 * total_mass(np.maximum(psi, 0), h)
        m1 = project_l2_mass_positive(psi, target, h).corrected
        m2 = project_l2_mass_positive(m1, target, h).corrected
        assert np.max(np.abs(m2 - m1)) <= 1e-12

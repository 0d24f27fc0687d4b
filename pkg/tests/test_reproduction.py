import numpy as np
import pytest

from iwskill.batch import SkillModel, SkillStepModel
from iwskill.environment import Environment, Sphere, build_sdf
from iwskill.prior import GaussianState, build_joint_prior
from iwskill.reproduction import (ObstacleFactor, OptimizerOptions, ReproductionProblem,
                                  Solution, StateAnchor, negative_log_posterior,
                                  obstacle_cost, optimize_map, solution_csv,
                                  solution_summary)

from test_prior import random_init, random_model


def dense_map_oracle(prior, anchors):
    """Closed-form MAP for anchors-only problems, solved densely in
    information form."""
    d = prior.dim
    lam = prior.dense_precision()
    rhs = lam @ prior.stacked_mean
    for a in anchors:
        sl = slice(a.index * d, (a.index + 1) * d)
        info = np.linalg.inv(a.sigma)
        lam[sl, sl] += info
        rhs[sl] += info @ a.target
    return np.linalg.solve(lam, rhs)


def conditional_given_start(prior, x0):
    """Gaussian conditional mean of the joint prior given the first node."""
    d = prior.dim
    cov = prior.dense_covariance()
    mean = prior.stacked_mean
    delta = np.linalg.solve(cov[:d, :d], x0 - mean[:d])
    rest = mean[d:] + cov[d:, :d] @ delta
    return np.concatenate([x0, rest])


@pytest.fixture
def disc_sdf():
    env = Environment(dimension=2, obstacles=[Sphere(center=np.array([0.5, 0.0]), radius=0.2)])
    return build_sdf(env, [-1.0, -1.0], [2.0, 1.0], resolution=0.02)


class TestObstacleCost:
    def test_far_state_is_free(self, disc_sdf):
        cost, grad = obstacle_cost(np.array([1.8, 0.8, 0.0, 0.0]), disc_sdf, eps_repro=0.1)
        assert cost == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_half_band_cost(self, disc_sdf):
        eps = 0.1
        # place the position at distance eps/2 from the surface
        state = np.array([0.5 + 0.2 + eps / 2, 0.0, 0.0, 0.0])
        cost, grad = obstacle_cost(state, disc_sdf, eps_repro=eps)
        assert cost == pytest.approx(eps / 2, abs=2e-3)  # SDF interpolation error
        assert np.any(grad[:2] != 0.0)
        np.testing.assert_array_equal(grad[2:], 0.0)

    def test_gradient_matches_finite_differences(self, disc_sdf):
        eps = 0.15
        rng = np.random.default_rng(0)
        h = 1e-7
        checked = 0
        while checked < 200:
            angle = rng.uniform(0, 2 * np.pi)
            radius = 0.2 + rng.uniform(0.2, 0.8) * eps
            pos = np.array([0.5, 0.0]) + radius * np.array([np.cos(angle), np.sin(angle)])
            frac = (pos - disc_sdf.origin) / disc_sdf.resolution % 1.0
            if np.any(frac < 0.03) or np.any(frac > 0.97):
                continue
            state = np.concatenate([pos, rng.normal(size=2)])
            cost, grad = obstacle_cost(state, disc_sdf, eps)
            if not 0.01 * eps < cost < 0.99 * eps:
                continue  # stay away from the hinge kink
            for k in range(2):
                e = np.zeros(4)
                e[k] = h
                c_hi, _ = obstacle_cost(state + e, disc_sdf, eps)
                c_lo, _ = obstacle_cost(state - e, disc_sdf, eps)
                fd = (c_hi - c_lo) / (2 * h)
                assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-8)
            checked += 1

    def test_out_of_bounds(self, disc_sdf):
        with pytest.raises(ValueError, match="outside"):
            obstacle_cost(np.array([5.0, 5.0, 0.0, 0.0]), disc_sdf, 0.1)


class TestNegativeLogPosterior:
    def test_prior_mean_no_factors(self):
        rng = np.random.default_rng(1)
        prior = build_joint_prior(random_model(rng), random_init(rng))
        problem = ReproductionProblem(prior=prior, factors=[])
        assert negative_log_posterior(prior.stacked_mean, problem) == pytest.approx(0.0, abs=1e-12)

    def test_anchor_at_its_own_mean(self):
        rng = np.random.default_rng(2)
        prior = build_joint_prior(random_model(rng), random_init(rng))
        anchor = StateAnchor(index=2, target=prior.means[2].copy(), sigma=np.asarray(0.1))
        problem = ReproductionProblem(prior=prior, factors=[anchor])
        assert negative_log_posterior(prior.stacked_mean, problem) == pytest.approx(0.0, abs=1e-12)

    def test_matches_dense_evaluation(self):
        rng = np.random.default_rng(3)
        prior = build_joint_prior(random_model(rng, n_steps=4), random_init(rng))
        anchors = [StateAnchor(index=0, target=rng.normal(size=2), sigma=np.asarray(0.3)),
                   StateAnchor(index=4, target=rng.normal(size=2), sigma=np.asarray(0.05))]
        problem = ReproductionProblem(prior=prior, factors=anchors)
        lam = prior.dense_precision()
        for _ in range(5):
            x = rng.normal(size=10)
            r = x - prior.stacked_mean
            expected = 0.5 * r @ lam @ r
            for a in anchors:
                ra = x[a.index * 2:(a.index + 1) * 2] - a.target
                expected += 0.5 * ra @ np.linalg.solve(a.sigma, ra)
            assert negative_log_posterior(x, problem) == pytest.approx(expected, rel=1e-9)

    def test_obstacle_factor_only_penalizes_collision(self, disc_sdf):
        step = SkillStepModel(Phi_tilde=np.hstack([np.zeros((4, 1)), np.eye(4)]),
                              Q=0.01 * np.eye(4))
        model = SkillModel(steps=[step] * 2, dt=0.1)
        clear = build_joint_prior(model, GaussianState(
            mean=np.array([1.5, 0.8, 0.0, 0.0]), cov=0.01 * np.eye(4)))
        colliding = build_joint_prior(model, GaussianState(
            mean=np.array([0.5, 0.25, 0.0, 0.0]), cov=0.01 * np.eye(4)))
        for prior, should_increase in ((clear, False), (colliding, True)):
            factors = [ObstacleFactor(index=i, sdf=disc_sdf, eps_repro=0.1, sigma_repro=0.05)
                       for i in range(3)]
            with_obs = negative_log_posterior(prior.stacked_mean,
                                              ReproductionProblem(prior=prior, factors=factors))
            without = negative_log_posterior(prior.stacked_mean,
                                             ReproductionProblem(prior=prior, factors=[]))
            if should_increase:
                assert with_obs > without
            else:
                assert with_obs == pytest.approx(without, abs=1e-12)


class TestOptimizeMap:
    def test_no_factors_returns_mean_immediately(self):
        rng = np.random.default_rng(4)
        prior = build_joint_prior(random_model(rng), random_init(rng))
        sol = optimize_map(ReproductionProblem(prior=prior, factors=[]))
        assert sol.converged and sol.iterations <= 1
        np.testing.assert_allclose(sol.trajectory.states.reshape(-1), prior.stacked_mean,
                                   atol=1e-12)

    def test_anchors_match_dense_information_solve(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            n = int(rng.integers(3, 10))
            prior = build_joint_prior(random_model(rng, dim=2, n_steps=n),
                                      random_init(rng, dim=2))
            anchors = [StateAnchor(index=0, target=rng.normal(size=2), sigma=np.asarray(0.1)),
                       StateAnchor(index=n, target=rng.normal(size=2), sigma=np.asarray(0.2))]
            sol = optimize_map(ReproductionProblem(prior=prior, factors=anchors))
            expected = dense_map_oracle(prior, anchors)
            assert sol.converged
            np.testing.assert_allclose(sol.trajectory.states.reshape(-1), expected, atol=1e-6)

    def test_tight_start_anchor_matches_gaussian_conditioning(self):
        rng = np.random.default_rng(6)
        prior = build_joint_prior(random_model(rng, dim=2, n_steps=8),
                                  random_init(rng, dim=2))
        new_start = prior.means[0] + np.array([0.3, -0.2])
        anchor = StateAnchor(index=0, target=new_start, sigma=np.asarray(1e-7))
        sol = optimize_map(ReproductionProblem(prior=prior, factors=[anchor]))
        expected = conditional_given_start(prior, new_start)
        np.testing.assert_allclose(sol.trajectory.states.reshape(-1), expected, atol=1e-5)

    def test_two_node_scalar_hand_solve(self):
        # 1-D state, one interval; anchors on both nodes. The posterior
        # information is the prior information plus 1/sigma^2 on each node.
        phi, u, q = 0.8, 0.1, 0.05
        p0 = 0.2
        step = SkillStepModel(Phi_tilde=np.array([[u, phi]]), Q=np.array([[q]]))
        model = SkillModel(steps=[step], dt=1.0)
        prior = build_joint_prior(model, GaussianState(mean=np.array([0.5]),
                                                       cov=np.array([[p0]])))
        t0, t1, s0, s1 = -0.2, 1.4, 0.3, 0.15
        anchors = [StateAnchor(index=0, target=np.array([t0]), sigma=np.asarray(s0)),
                   StateAnchor(index=1, target=np.array([t1]), sigma=np.asarray(s1))]
        sol = optimize_map(ReproductionProblem(prior=prior, factors=anchors))
        lam_prior = np.array([[1 / p0 + phi ** 2 / q, -phi / q], [-phi / q, 1 / q]])
        mu = np.array([0.5, phi * 0.5 + u])
        lam_post = lam_prior + np.diag([1 / s0 ** 2, 1 / s1 ** 2])
        rhs = lam_prior @ mu + np.array([t0 / s0 ** 2, t1 / s1 ** 2])
        expected = np.linalg.solve(lam_post, rhs)
        np.testing.assert_allclose(sol.trajectory.states.reshape(-1), expected,
                                   rtol=1e-8, atol=1e-8)

    @pytest.mark.parametrize("sigma", [1e-2, 1e-4, 1e-6])
    def test_anchor_converges_to_target_as_sigma_shrinks(self, sigma):
        rng = np.random.default_rng(7)
        prior = build_joint_prior(random_model(rng, dim=2, n_steps=5),
                                  random_init(rng, dim=2))
        target = prior.means[3] + np.array([0.5, 0.4])
        anchor = StateAnchor(index=3, target=target, sigma=np.asarray(sigma))
        sol = optimize_map(ReproductionProblem(prior=prior, factors=[anchor]))
        scale = 1.0 + float(np.linalg.norm(target))
        assert np.linalg.norm(sol.trajectory.states[3] - target) <= 10 * sigma * scale

    def test_objective_history_nonincreasing(self, disc_sdf):
        rng = np.random.default_rng(8)
        prior = build_joint_prior(random_model(rng, dim=4, n_steps=6, contraction=0.7),
                                  GaussianState(mean=np.array([0.2, 0.0, 0.1, 0.0]),
                                                cov=0.05 * np.eye(4)))
        factors = [ObstacleFactor(index=i, sdf=disc_sdf, eps_repro=0.12, sigma_repro=0.05)
                   for i in range(7)]
        factors.append(StateAnchor(index=0, target=np.array([0.1, -0.3, 0.0, 0.0]),
                                   sigma=np.asarray(1e-3)))
        sol = optimize_map(ReproductionProblem(prior=prior, factors=factors))
        assert len(sol.objective_history) >= 2
        assert np.all(np.diff(sol.objective_history) <= 0)

    def test_max_iterations_returns_best_iterate(self):
        rng = np.random.default_rng(9)
        prior = build_joint_prior(random_model(rng, dim=2, n_steps=5),
                                  random_init(rng, dim=2))
        anchors = [StateAnchor(index=5, target=rng.normal(size=2) + 5.0,
                               sigma=np.asarray(1e-6))]
        opts = OptimizerOptions(max_iters=1, lm_damping_init=1e6)
        sol = optimize_map(ReproductionProblem(prior=prior, factors=anchors, options=opts))
        assert not sol.converged
        assert sol.iterations == 1

    def test_factor_index_validation(self):
        rng = np.random.default_rng(10)
        prior = build_joint_prior(random_model(rng, dim=2, n_steps=3), random_init(rng, 2))
        with pytest.raises(ValueError, match="outside"):
            ReproductionProblem(prior=prior,
                                factors=[StateAnchor(index=7, target=np.zeros(2),
                                                     sigma=np.asarray(0.1))])

    def test_infeasible_solution_flagged(self, disc_sdf):
        # anchor a node deep inside the obstacle with huge confidence; the
        # optimizer cannot clear it and must say so
        step = SkillStepModel(Phi_tilde=np.hstack([np.zeros((4, 1)), np.eye(4)]),
                              Q=0.001 * np.eye(4))
        model = SkillModel(steps=[step] * 2, dt=0.1)
        prior = build_joint_prior(model, GaussianState(
            mean=np.array([0.5, 0.0, 0.0, 0.0]), cov=1e-6 * np.eye(4)))
        factors = [StateAnchor(index=i, target=np.array([0.5, 0.0, 0.0, 0.0]),
                               sigma=np.asarray(1e-6)) for i in range(3)]
        factors.append(ObstacleFactor(index=1, sdf=disc_sdf, eps_repro=0.1, sigma_repro=1.0))
        sol = optimize_map(ReproductionProblem(prior=prior, factors=factors))
        assert not sol.feasible
        assert sol.min_clearance < 0.0

    def test_clear_solution_feasible(self, disc_sdf):
        rng = np.random.default_rng(11)
        prior = build_joint_prior(random_model(rng, dim=4, n_steps=4, contraction=0.5),
                                  GaussianState(mean=np.array([1.5, 0.7, 0.0, 0.0]),
                                                cov=0.01 * np.eye(4)))
        factors = [ObstacleFactor(index=i, sdf=disc_sdf, eps_repro=0.1, sigma_repro=0.05)
                   for i in range(5)]
        sol = optimize_map(ReproductionProblem(prior=prior, factors=factors))
        assert sol.feasible
        assert sol.min_clearance >= 0.1 - 0.01


def test_solution_exports():
    traj_states = np.arange(8.0).reshape(2, 4)
    from iwskill.demos import StateTrajectory
    sol = Solution(trajectory=StateTrajectory(dt=0.5, states=traj_states),
                   objective=1.25, iterations=3, converged=True, feasible=True,
                   min_clearance=0.42)
    csv_text = solution_csv(sol)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "t,x_1,x_2,x_3,x_4"
    assert len(lines) == 3
    summary = solution_summary(sol)
    assert summary == {"objective": 1.25, "iterations": 3, "converged": True,
                       "feasible": True, "min_clearance": 0.42}

"""MAP trajectory reproduction: condition the learned prior on scene factors.

The posterior combines the trajectory prior with event factors: state
anchors (new start/goal/via constraints) and per-node obstacle factors built
on a signed distance field. The negative log posterior is minimized with
Levenberg-Marquardt; because every factor touches a single node, the damped
Gauss-Newton systems keep the prior's block-tridiagonal sparsity and are
solved by block Cholesky.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .demos import StateTrajectory
from .environment import NO_OBSTACLE_DISTANCE, SignedDistanceField
from .linalg import BlockTridiagCholesky, block_tridiag_matvec
from .prior import GaussianTrajectoryPrior


class SingularNormalEquationsError(RuntimeError):
    """Damping escalation failed to make the normal equations factorizable."""


@dataclass(frozen=True)
class StateAnchor:
    """Soft equality factor pinning node `index` to `target` with covariance
    `sigma` (full D x D, or built from a scalar / diagonal)."""

    index: int
    target: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float)
        d = target.shape[0]
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 0:
            sigma = float(sigma) ** 2 * np.eye(d)
        elif sigma.ndim == 1:
            sigma = np.diag(sigma.astype(float) ** 2)
        if sigma.shape != (d, d):
            raise ValueError("anchor sigma must be scalar, per-dimension, or D x D")
        if np.any(np.linalg.eigvalsh((sigma + sigma.T) / 2.0) <= 0):
            raise ValueError("anchor covariance must be positive definite")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class ObstacleFactor:
    """Hinge collision factor at node `index`: active within `eps_repro` of
    an obstacle surface, scaled by `sigma_repro`."""

    index: int
    sdf: SignedDistanceField
    eps_repro: float = 0.1
    sigma_repro: float = 0.05

    def __post_init__(self):
        if self.eps_repro < 0:
            raise ValueError("eps_repro must be >= 0")
        if not self.sigma_repro > 0:
            raise ValueError("sigma_repro must be positive")


@dataclass(frozen=True)
class OptimizerOptions:
    max_iters: int = 100
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    lm_damping_init: float = 1e-4
    lm_damping_max: float = 1e12
    tol_clear: float = 0.01


@dataclass(frozen=True)
class ReproductionProblem:
    prior: GaussianTrajectoryPrior
    factors: list
    options: OptimizerOptions = field(default_factory=OptimizerOptions)

    def __post_init__(self):
        n = self.prior.n_steps
        for f in self.factors:
            if not 0 <= f.index <= n:
                raise ValueError(f"factor index {f.index} outside 0..{n}")


@dataclass
class Solution:
    trajectory: StateTrajectory
    objective: float
    iterations: int
    converged: bool
    feasible: bool
    min_clearance: float
    # objective after the start point and after each accepted step; nonincreasing
    objective_history: list = field(default_factory=list)


def obstacle_cost(state: np.ndarray, sdf: SignedDistanceField,
                  eps_repro: float) -> tuple[float, np.ndarray]:
    """Hinge collision cost of one state and its gradient.

    The cost is hinge(d(p), eps_repro) on the position components p; the
    gradient is -grad d(p) from the interpolated field while inside the
    band, zero outside and on all velocity components.
    """
    state = np.asarray(state, dtype=float)
    pos = state[: sdf.dim]
    d = sdf.query(pos)
    grad = np.zeros(state.shape[0])
    if d > eps_repro:
        return 0.0, grad
    grad[: sdf.dim] = -sdf.gradient(pos)
    return eps_repro - d, grad


def negative_log_posterior(x: np.ndarray, problem: ReproductionProblem) -> float:
    """0.5 * prior Mahalanobis term plus 0.5 * every factor's weighted
    squared residual."""
    x = np.asarray(x, dtype=float).reshape(-1)
    total = 0.5 * problem.prior.quad_form(x)
    d = problem.prior.dim
    for f in problem.factors:
        node = x[f.index * d:(f.index + 1) * d]
        if isinstance(f, StateAnchor):
            r = node - f.target
            total += 0.5 * float(r @ np.linalg.solve(f.sigma, r))
        else:
            c, _ = obstacle_cost(node, f.sdf, f.eps_repro)
            total += 0.5 * c * c / f.sigma_repro ** 2
    return float(total)


def _gradient_and_gn_blocks(x: np.ndarray, problem: ReproductionProblem):
    """Gradient of the objective and the Gauss-Newton Hessian blocks.

    The prior contributes its precision; each factor adds J^T S^{-1} J to its
    node's diagonal block and J^T S^{-1} r to the gradient, so the system
    stays block tridiagonal.
    """
    prior = problem.prior
    d = prior.dim
    r = x - prior.stacked_mean
    grad = block_tridiag_matvec(prior.prec_diag, prior.prec_off, r)
    h_diag = prior.prec_diag.copy()
    for f in problem.factors:
        sl = slice(f.index * d, (f.index + 1) * d)
        node = x[sl]
        if isinstance(f, StateAnchor):
            info = np.linalg.inv(f.sigma)
            grad[sl] += info @ (node - f.target)
            h_diag[f.index] += info
        else:
            c, jac = obstacle_cost(node, f.sdf, f.eps_repro)
            inv_s2 = 1.0 / f.sigma_repro ** 2
            grad[sl] += inv_s2 * c * jac
            h_diag[f.index] += inv_s2 * np.outer(jac, jac)
    return grad, h_diag


def _solution(problem, x, objective, iterations, converged, history) -> Solution:
    prior = problem.prior
    d = prior.dim
    states = x.reshape(prior.n_steps + 1, d)
    min_clear = NO_OBSTACLE_DISTANCE
    feasible = True
    for f in problem.factors:
        if isinstance(f, ObstacleFactor):
            dist = f.sdf.query(states[f.index][: f.sdf.dim])
            min_clear = min(min_clear, dist)
            if dist < f.eps_repro - problem.options.tol_clear:
                feasible = False
    return Solution(trajectory=StateTrajectory(dt=prior.dt, states=states),
                    objective=objective, iterations=iterations,
                    converged=converged, feasible=feasible, min_clearance=min_clear,
                    objective_history=history)


def optimize_map(problem: ReproductionProblem) -> Solution:
    """Levenberg-Marquardt from the prior mean.

    Damped Gauss-Newton steps are solved through the block-tridiagonal
    Cholesky; damping shrinks by 10x on accepted steps and grows by 10x on
    rejections. Convergence: gradient norm below abs_tol, or an accepted
    step whose relative objective decrease falls below rel_tol. Hitting
    max_iters returns the best iterate with converged=False.
    """
    opts = problem.options
    x = problem.prior.stacked_mean.copy()
    obj = negative_log_posterior(x, problem)
    history = [obj]
    damping = opts.lm_damping_init
    eye = np.eye(problem.prior.dim)

    iterations = 0
    converged = False
    for _ in range(opts.max_iters):
        grad, h_diag = _gradient_and_gn_blocks(x, problem)
        if np.linalg.norm(grad) < opts.abs_tol:
            converged = True
            break
        while True:
            damped = h_diag + damping * eye[None, :, :]
            try:
                chol = BlockTridiagCholesky(damped, problem.prior.prec_off)
                step = chol.solve(-grad)
                break
            except np.linalg.LinAlgError:
                damping *= 10.0
                if damping > opts.lm_damping_max:
                    raise SingularNormalEquationsError(
                        f"normal equations not positive definite at damping {damping:.1e}")
        x_new = x + step
        obj_new = negative_log_posterior(x_new, problem)
        iterations += 1
        if obj_new < obj:
            rel_drop = (obj - obj_new) / max(abs(obj), 1e-300)
            x, obj = x_new, obj_new
            history.append(obj)
            assert history[-1] <= history[-2], "accepted step increased the objective"
            damping = max(damping / 10.0, 1e-12)
            if rel_drop < opts.rel_tol:
                converged = True
                break
        else:
            damping *= 10.0
            if damping > opts.lm_damping_max:
                # step size has collapsed; no further descent possible
                converged = True
                break
    return _solution(problem, x, obj, iterations, converged, history)


def solution_csv(solution: Solution) -> str:
    """CSV rows `t, x_1..x_D` of the reproduced trajectory."""
    traj = solution.trajectory
    out = io.StringIO()
    out.write(",".join(["t"] + [f"x_{j + 1}" for j in range(traj.dim)]) + "\n")
    for i in range(traj.n_steps + 1):
        row = [repr(float(i * traj.dt))] + [repr(float(v)) for v in traj.states[i]]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def solution_summary(solution: Solution) -> dict:
    return {
        "objective": solution.objective,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "feasible": solution.feasible,
        "min_clearance": solution.min_clearance,
    }

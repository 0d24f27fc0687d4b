"""Gaussian trajectory priors induced by the learned stochastic dynamics.

Rolling the per-interval linear-Gaussian dynamics forward from an initial
state Gaussian gives marginal moments; the joint distribution over the whole
stacked trajectory is kept in information form, whose precision is exactly
block tridiagonal thanks to the Markov structure.
"""

import io
from dataclasses import dataclass

import numpy as np

from .batch import SkillModel
from .demos import DemoSet, StateTrajectory
from .linalg import (BlockTridiagCholesky, block_tridiag_dense, block_tridiag_matvec,
                     psd_sqrt)

_JITTER = 1e-10


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        d = mean.shape[0]
        if cov.shape != (d, d) or not np.allclose(cov, cov.T, atol=1e-9):
            raise ValueError("covariance must be a symmetric D x D matrix")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def initial_state_distribution(demos: DemoSet) -> GaussianState:
    """Gaussian over the demonstrations' start states (population moments,
    regularized by 1e-8 I so single-demo sets stay usable)."""
    starts = np.stack([traj.states[0] for traj in demos.demos])
    mean = starts.mean(axis=0)
    centered = starts - mean
    cov = centered.T @ centered / starts.shape[0] + 1e-8 * np.eye(demos.dim)
    return GaussianState(mean=mean, cov=cov)


def rollout_moments(model: SkillModel, init: GaussianState) -> list:
    """Propagate mean and covariance through every interval:
    mu' = Phi mu + u, P' = Phi P Phi^T + Q."""
    if init.mean.shape[0] != model.dim:
        raise ValueError(f"initial state dimension {init.mean.shape[0]} != model dim {model.dim}")
    out = [GaussianState(mean=init.mean.copy(), cov=init.cov.copy())]
    for step in model.steps:
        mu = step.predict(out[-1].mean)
        cov = step.transition @ out[-1].cov @ step.transition.T + step.Q
        out.append(GaussianState(mean=mu, cov=(cov + cov.T) / 2.0))
    return out


class GaussianTrajectoryPrior:
    """Joint Gaussian over the stacked trajectory.

    Stores marginal moments plus the block-tridiagonal precision (diagonal
    blocks `prec_diag`, sub-diagonal blocks `prec_off`); the dense joint
    covariance is only materialized on request for small problems.
    """

    def __init__(self, model: SkillModel, init: GaussianState):
        self.model = model
        self.init = init
        self.dt = model.dt
        self.dim = model.dim
        marginals = rollout_moments(model, init)
        self.means = np.stack([g.mean for g in marginals])
        self.covs = np.stack([g.cov for g in marginals])
        self._assemble_precision()

    @property
    def n_steps(self) -> int:
        return self.model.n_steps

    @property
    def stacked_mean(self) -> np.ndarray:
        return self.means.reshape(-1)

    def _assemble_precision(self) -> None:
        d = self.dim
        n = self.n_steps
        eye = np.eye(d)
        q_inv = []
        for step in self.model.steps:
            q_inv.append(np.linalg.inv(step.Q + _JITTER * eye))
        p0_inv = np.linalg.inv(self.init.cov + _JITTER * eye)

        diag = np.zeros((n + 1, d, d))
        off = np.zeros((n, d, d))
        diag[0] = p0_inv
        for i, step in enumerate(self.model.steps):
            phi = step.transition
            diag[i] += phi.T @ q_inv[i] @ phi
            diag[i + 1] += q_inv[i]
            off[i] = -q_inv[i] @ phi
        self.prec_diag = diag
        self.prec_off = off
        self._chol = None

    def precision_cholesky(self) -> BlockTridiagCholesky:
        if self._chol is None:
            self._chol = BlockTridiagCholesky(self.prec_diag, self.prec_off)
        return self._chol

    def quad_form(self, x: np.ndarray) -> float:
        """(x - mu)^T K^{-1} (x - mu) through the sparse precision."""
        r = np.asarray(x, dtype=float).reshape(-1) - self.stacked_mean
        return float(r @ block_tridiag_matvec(self.prec_diag, self.prec_off, r))

    def dense_precision(self) -> np.ndarray:
        return block_tridiag_dense(self.prec_diag, self.prec_off)

    def dense_covariance(self) -> np.ndarray:
        """Full (N+1)D joint covariance from the Markov cross-covariance
        recursion. Debug path, refused for large N."""
        if self.n_steps > 50:
            raise ValueError("dense covariance is a debug path, limited to N <= 50")
        n, d = self.n_steps, self.dim
        blocks = [[None] * (n + 1) for _ in range(n + 1)]
        for j in range(n + 1):
            blocks[j][j] = self.covs[j]
            for i in range(j + 1, n + 1):
                blocks[i][j] = self.model.steps[i - 1].transition @ blocks[i - 1][j]
                blocks[j][i] = blocks[i][j].T
        return np.block(blocks)


def build_joint_prior(model: SkillModel, init: GaussianState) -> GaussianTrajectoryPrior:
    return GaussianTrajectoryPrior(model, init)


def sample_trajectories(prior: GaussianTrajectoryPrior, n: int, seed: int) -> list:
    """Draw n trajectories by forward-simulating the stochastic dynamics.
    Deterministic for a fixed seed."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    d = prior.dim
    sqrt0 = psd_sqrt(prior.init.cov)
    state = prior.init.mean + rng.standard_normal((n, d)) @ sqrt0.T
    nodes = [state]
    for step in prior.model.steps:
        noise = rng.standard_normal((n, d)) @ psd_sqrt(step.Q).T
        state = state @ step.transition.T + step.bias + noise
        nodes.append(state)
    stacked = np.stack(nodes, axis=1)  # (n, N+1, D)
    return [StateTrajectory(dt=prior.dt, states=stacked[s]) for s in range(n)]


def prior_band_csv(prior: GaussianTrajectoryPrior) -> str:
    """CSV rows `t, mean_1..mean_D, std_1..std_D` for mean +/- one-sigma plots."""
    d = prior.dim
    out = io.StringIO()
    header = ["t"] + [f"mean_{j + 1}" for j in range(d)] + [f"std_{j + 1}" for j in range(d)]
    out.write(",".join(header) + "\n")
    for i in range(prior.n_steps + 1):
        std = np.sqrt(np.clip(np.diag(prior.covs[i]), 0.0, None))
        row = [repr(float(i * prior.dt))] + [repr(float(v)) for v in prior.means[i]] \
            + [repr(float(v)) for v in std]
        out.write(",".join(row) + "\n")
    return out.getvalue()

"""Importance-weighted skill learning from obstacle-influenced demonstrations.

Demonstrations recorded in cluttered scenes are discounted near obstacles,
so the learned stochastic skill dynamics capture the intended motion rather
than incidental detours. The learned dynamics induce a Gaussian trajectory
prior with a block-tridiagonal precision; reproduction conditions that prior
on start/goal anchors and obstacle factors by MAP inference.
"""

from .batch import (SingularSystemError, SkillModel, SkillStepModel, StepData,
                    assemble_step_data, batch_estimate_step, effective_sample_size,
                    learn_batch, learn_batch_weighted, load_model, save_model)
from .demos import (DemoSet, RawDemo, StateTrajectory, dtw_align, estimate_states,
                    fit_cubic_spline, ingest, load_raw_demo, save_raw_demo)
from .environment import (Box, Environment, SignedDistanceField, Sphere, WeightParams,
                          build_sdf, hinge_cost, importance_weight, load_environment,
                          signed_distance, weight_trajectory)
from .incremental import (IncrementalLearner, MNIWState, assimilate_demo, extract_map,
                          init_prior, load_checkpoint, save_checkpoint)
from .prior import (GaussianState, GaussianTrajectoryPrior, build_joint_prior,
                    initial_state_distribution, rollout_moments, sample_trajectories)
from .reproduction import (ObstacleFactor, OptimizerOptions, ReproductionProblem,
                           SingularNormalEquationsError, Solution, StateAnchor,
                           negative_log_posterior, obstacle_cost, optimize_map)

__version__ = "0.1.0"

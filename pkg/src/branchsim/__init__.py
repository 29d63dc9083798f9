"""Branch deformation simulation and Bayesian spring-parameter inference.

Builds coarse fractal tree models out of cylindrical links joined by
torsional spring-damper joints, rolls out planar deformation trajectories
under applied tip forces, and infers the posterior density over per-joint
stiffness/damping gains with Stein variational gradient descent, learnt
inequality priors, and Monte Carlo baselines.
"""

from .dynamics import (
    ForceProfile,
    JointState,
    SimParams,
    SimulationDiverged,
    Trajectory,
    batch_rollout,
    joint_torques,
    rest_pose,
    rollout,
    step,
)
from .evaluation import (
    CoverageReport,
    TrajectoryBand,
    coverage,
    coverage_many,
    kde_1d,
    kfold_splits,
    trajectory_band,
)
from .geometry import (
    BranchLink,
    DegenerateGeometryError,
    TreeModel,
    TreeSpec,
    export_urdf,
    generate_tree,
    joint_inertia,
    link_mass,
)
from .inference import (
    Episode,
    GroundTruthSet,
    InferenceConfig,
    InferenceResult,
    ParticleSet,
    fd_gradient,
    log_posterior,
    loss,
    rbf_kernel,
    run_mcmh,
    run_sghmc,
    run_sgld,
    run_svgd,
    svgd_step,
)
from .priors import (
    ParameterPrior,
    PriorNet,
    PriorTrainingError,
    SmoothBox,
    inequality_labels,
    load_prior_net,
    nn_log_prior,
    save_prior_net,
    smooth_box_log_prior,
    train_prior_net,
)

__version__ = "0.1.0"

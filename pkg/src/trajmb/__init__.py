"""Track-before-detect multi-target tracking over superpositional sensors.

The package implements a trajectory multi-Bernoulli filter bank for raw
intensity-map measurements, where every cell's return depends on the sum of
all target contributions.  Per-target updates stay tractable through an
information exchange step: when one target is updated, the others are
summarised as Gaussian corrections to the measurement model.  Updates run
iterated statistical linearisation (or a single unscented pass), and
trajectories keep an L-scan window of jointly smoothed states.
"""

from .filter import (
    BernoulliTrajectory,
    BirthComponent,
    BirthModel,
    CorrectionMoments,
    FilterConfig,
    MotionModel,
    TmbDensity,
    TmbFilter,
    TrajectoryEstimate,
    all_correction_moments,
    conditional_moments,
    correction_moments,
    estimate,
    existence_likelihoods,
    iplf_update,
    marginalize_current,
    per_target_moments,
    predict,
    prune_and_terminate,
    slr_generalized,
    tmb_from_dict,
    tmb_to_dict,
    update,
    update_bernoulli_alive,
    update_bernoulli_all,
)
from .gaussian import (
    AffineLikelihood,
    GaussianDensity,
    NonPsdCovarianceError,
    SigmaPointSet,
    SingularInnovationError,
    clamp_psd,
    condition_past_states,
    draw_sigma_points,
    gaussian_eval,
    gaussian_log_eval,
    kf_update,
    kld_gaussians,
    symmetrize,
)
from .measurement import (
    LinearGaussianModel,
    RayleighAmplitudeModel,
    RicianGridModel,
    SuperpositionalModel,
    grid_cell_centers,
    kummer_m,
    psf_return,
    rayleigh_moments,
    rician_mean,
    rician_mean_jacobian,
    rician_variance,
    sample_rician,
)
from .metrics import (
    LabeledTrajectory,
    LabeledTrajectorySet,
    MetricConfig,
    MetricResult,
    assign_step,
    evaluate,
    load_trajectories,
    rms_over_runs,
    rms_over_time,
    save_trajectories,
    step_cost_breakdown,
    truncate_to,
    write_metric_csv,
)
from .sim import (
    FilterSpec,
    RunRecord,
    Scenario,
    TargetSpec,
    default_scenario,
    generate_measurements,
    generate_truth,
    make_birth,
    make_model,
    make_motion,
    ncv_noise,
    ncv_transition,
    run_monte_carlo,
    run_single,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

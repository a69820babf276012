"""Spectral compressed sensing via structured low-rank matrix completion.

The package recovers spectrally sparse signals (sums of K-dimensional
complex sinusoids) from a subset of time-domain samples.  The samples
are arranged into a K-fold Hankel "enhanced" matrix, which is low rank
under the sinusoid model; recovery proceeds by nuclear-norm-driven
singular value thresholding over that structure.  Companion modules
evaluate incoherence measures of a signal instance and numerically
verify the dual-certificate machinery behind the recovery guarantee on
small instances.
"""

from .model import (
    SpectralSignal,
    ObservationSet,
    synthesize,
    sample_uniform,
    sample_iid,
    add_noise,
    make_observations,
    derive_rng,
)
from .hankel import (
    PencilShape,
    EnhancementMap,
    default_pencils,
    enhance,
    dehance,
    group_sums,
    structure_project,
    basis_matrix,
    implicit_matvec,
    implicit_rmatvec,
    EnhancedOperator,
    lowrank_group_sums,
)
from .solver import (
    ThresholdSchedule,
    SolverConfig,
    RecoveryResult,
    svd_shrink,
    threshold,
    svt_recover,
    noisy_stability_bound,
)
from .incoherence import (
    aspect_constant,
    gram_matrices,
    gram_incoherence,
    enhanced_frames,
    skew_mean_incoherence,
    tangent_cross_incoherence,
    projection_mass_incoherence,
    SampleComplexityReport,
    sample_complexity_report,
    incoherence_report,
    IncoherenceReport,
)
from .certificate import (
    TangentSpace,
    tangent_project,
    normal_project,
    apply_sampling,
    sampling_operator_matrices,
    concentration_norm,
    GateResult,
    certificate_gate,
    GolfingPlan,
    make_golfing_plan,
    golfing_certificate,
    GolfingReport,
)
from .experiments import (
    PhaseCell,
    draw_trial_signal,
    run_recovery_trial,
    phase_transition,
    phase_threshold_profile,
    fit_threshold_line,
    NoisyDemoReport,
    noisy_demo,
    SuperresSpec,
    SuperresResult,
    make_random_sources,
    superres_signal,
    render_image,
    detect_peaks,
    superres_demo,
)

__version__ = "0.1.0"

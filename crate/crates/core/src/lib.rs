//! Dynamic generalized odds ratios (dGOR) for comparing embedded treatment
//! regimes of sequential multiple-assignment randomized trials (SMARTs) with
//! ordinal outcomes.
//!
//! The crate covers exact computation ([`engine`]), estimation from trial data
//! ([`estimation`]), asymptotic inference and sample-size planning
//! ([`inference`]), Monte Carlo replication studies ([`simulation`]) and a
//! sequential search for the best regime in a finite class ([`policy`]).

pub mod engine;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod model;
pub mod policy;
pub mod simulation;

pub use engine::{
    dgor_kstage, dgor_matrix_form, dgor_shared_path, dgor_two_stage, dor_binary,
    theorem_conditions, DgorResult, SharedPathModel, TheoremReport, Warning,
};
pub use error::{DgorError, Result};
pub use estimation::{
    estimate_dgor_concordance, estimate_dgor_plugin, estimate_p_ustat, fit_mle, FittedSmartModel,
    PairWeights, RateSource, RegimeSpec, UStatEstimate,
};
pub use inference::{
    asymptotic_variance_dp, asymptotic_variance_keyed, asymptotic_variance_kstage,
    asymptotic_variance_sp, asymptotic_variance_two_stage, critical_value, design_weights,
    inverse_normal_cdf, normal_cdf, planning_weights, sample_size, sample_size_from_models,
    shared_from_regimes, wald_from_se, wald_inference, DesignWeights, InferenceResult,
    PlanningResult, WeightSource,
};
pub use model::{
    small_cell_flags, validate_pmf, Arm, ArmKey, Stratum, ContinuousDataset, ContinuousTrajectory,
    KStageRegimeModel, OrdinalPmf, SmartDataset, SmartDesign, Trajectory, TwoStageRegimeModel,
};
pub use policy::{find_optimal, find_optimal_in_data, Correction, PolicySearch, RegimeClass, TestRecord};
pub use simulation::{
    barycentric_coords, embedding_design, generate_trial, kstage_planning_weights,
    population_dgor_oracle, run_study, run_study_with, write_coords_csv, Execution,
    OracleEstimate, OutcomeSampler, ScenarioRegimes, SmartTruth, StudyReport, StudyScenario,
};

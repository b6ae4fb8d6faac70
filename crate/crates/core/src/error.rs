use thiserror::Error;

/// Errors raised by the dGOR library.
///
/// Every variant maps to a stable, machine-readable code (see [`DgorError::code`])
/// that the CLI and HTTP service surface to callers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DgorError {
    #[error("probability vector is empty")]
    EmptyPmf,
    #[error("category {index} has negative or non-finite probability {value}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    SumNotOne { sum: f64 },
    #[error("an ordinal outcome needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("models disagree on the number of outcome categories ({left} vs {right})")]
    MismatchedJ { left: usize, right: usize },
    #[error("binary dynamic odds ratio needs J = 2, got J = {0}")]
    NotBinary(usize),
    #[error("response rate {0} is outside [0, 1]")]
    InvalidRate(f64),
    #[error("K-stage model is malformed: {0}")]
    InvalidStageModel(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("trajectory {patient_id} is inconsistent with the design: {reason}")]
    InconsistentTrajectory { patient_id: String, reason: String },
    #[error("outcome {outcome} for patient {patient_id} is outside 1..={categories}")]
    OutcomeOutOfRange {
        patient_id: String,
        outcome: usize,
        categories: usize,
    },
    #[error("dataset has no trajectories")]
    EmptyDataset,
    #[error("arm {0} has no patients")]
    EmptyArm(String),
    #[error("arm {0} is not present in the fitted model")]
    MissingArm(String),
    #[error("P(Y_g < Y_g') is zero; the dGOR is infinite")]
    DegenerateDenominator,
    #[error("log dGOR is undefined for dGOR = {0}")]
    UndefinedLog(f64),
    #[error("probability {0} is outside the open interval (0, 1)")]
    OutOfRange(f64),
    #[error("no response rate for stage-1 treatment {0}")]
    MissingRate(String),
    #[error("arm {0} is unreachable under the design (zero allocation weight)")]
    UnreachableArm(String),
    #[error("allocation weight for arm {0} is zero or missing")]
    ZeroWeight(String),
    #[error("effect size is zero; no finite sample size achieves the requested power")]
    ZeroEffect,
    #[error("estimate is not finite and positive: {0}")]
    NonFiniteEstimate(f64),
    #[error("barycentric coordinates need J = 3, got J = {0}")]
    NotThreeCategories(usize),
    #[error("simulation truth is incomplete: {0}")]
    IncompleteTruth(String),
    #[error("all {0} replications were degenerate")]
    AllReplicationsFailed(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("data error: {0}")]
    Data(String),
}

impl DgorError {
    /// Stable dotted error code, e.g. `pmf.negative_entry`.
    pub fn code(&self) -> &'static str {
        use DgorError::*;
        match self {
            EmptyPmf => "pmf.empty",
            NegativeEntry { .. } => "pmf.negative_entry",
            SumNotOne { .. } => "pmf.sum_not_one",
            TooFewCategories(_) => "pmf.too_few_categories",
            MismatchedJ { .. } => "model.mismatched_j",
            NotBinary(_) => "model.not_binary",
            InvalidRate(_) => "model.invalid_rate",
            InvalidStageModel(_) => "model.invalid_stage_model",
            InvalidDesign(_) => "design.invalid",
            InconsistentTrajectory { .. } => "data.inconsistent_trajectory",
            OutcomeOutOfRange { .. } => "data.outcome_out_of_range",
            EmptyDataset => "data.empty_dataset",
            EmptyArm(_) => "data.empty_arm",
            MissingArm(_) => "estimate.missing_arm",
            DegenerateDenominator => "dgor.degenerate_denominator",
            UndefinedLog(_) => "dgor.undefined_log",
            OutOfRange(_) => "inference.out_of_range",
            MissingRate(_) => "inference.missing_rate",
            UnreachableArm(_) => "inference.unreachable_arm",
            ZeroWeight(_) => "inference.zero_weight",
            ZeroEffect => "inference.zero_effect",
            NonFiniteEstimate(_) => "inference.non_finite_estimate",
            NotThreeCategories(_) => "coords.not_three_categories",
            IncompleteTruth(_) => "simulation.incomplete_truth",
            AllReplicationsFailed(_) => "simulation.all_replications_failed",
            InvalidParameter(_) => "request.invalid_parameter",
            Unsupported(_) => "request.unsupported",
            Data(_) => "data.malformed",
        }
    }
}

pub type Result<T> = std::result::Result<T, DgorError>;

//! Request and response bodies shared by the command line and the HTTP
//! service. Both front ends render results through [`render_json`], so equal
//! inputs produce byte-identical output.

use std::collections::BTreeMap;

use dgor_core::{
    asymptotic_variance_kstage, asymptotic_variance_two_stage, barycentric_coords, dgor_kstage,
    dgor_two_stage, estimate_dgor_concordance, estimate_dgor_plugin, estimate_p_ustat, fit_mle,
    kstage_planning_weights, planning_weights, sample_size, sample_size_from_models,
    shared_from_regimes, validate_pmf, wald_inference, ContinuousDataset, DesignWeights,
    DgorError, DgorResult, InferenceResult, KStageRegimeModel, PairWeights, RateSource,
    RegimeSpec, SmartDataset, TwoStageRegimeModel,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_POWER: f64 = 0.8;

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_power() -> f64 {
    DEFAULT_POWER
}

/// Pretty JSON with a trailing newline.
pub fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = serde_json::to_string_pretty(value)?;
    out.push('\n');
    Ok(out)
}

/// A two-stage regime with raw (unvalidated) pmfs. Labels are optional and
/// default to `A`/`E` for the reference regime and `B`/`E` (distinct path)
/// or `A`/`F` (shared path) for the compared one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2: Option<String>,
    pub response_rate: f64,
    pub responder_pmf: Vec<f64>,
    pub nonresponder_pmf: Vec<f64>,
}

impl RegimeInput {
    pub fn to_model(&self, stage1: &str, stage2: &str) -> std::result::Result<TwoStageRegimeModel, DgorError> {
        TwoStageRegimeModel::from_raw(
            self.stage1.as_deref().unwrap_or(stage1),
            self.stage2.as_deref().unwrap_or(stage2),
            self.response_rate,
            &self.responder_pmf,
            &self.nonresponder_pmf,
        )
    }
}

impl From<&TwoStageRegimeModel> for RegimeInput {
    fn from(m: &TwoStageRegimeModel) -> Self {
        Self {
            stage1: Some(m.stage1.clone()),
            stage2: Some(m.stage2.clone()),
            response_rate: m.response_rate,
            responder_pmf: m.responder_pmf.probs().to_vec(),
            nonresponder_pmf: m.nonresponder_pmf.probs().to_vec(),
        }
    }
}

/// Builds `(g, g')` from inputs, checking shared-path consistency.
fn regime_models(
    g: &RegimeInput,
    gprime: &RegimeInput,
    shared: bool,
) -> std::result::Result<(TwoStageRegimeModel, TwoStageRegimeModel), DgorError> {
    let gp = gprime.to_model("A", "E")?;
    let g = if shared {
        g.to_model(&gp.stage1, "F")?
    } else {
        g.to_model("B", "E")?
    };
    if shared {
        shared_from_regimes(&g, &gp)?;
    }
    Ok((g, gp))
}

/// `POST /api/v1/dgor` and `dgor compute`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgorRequest {
    /// Reference regime (the denominator side).
    pub gprime: RegimeInput,
    /// Compared regime (the numerator side).
    pub g: RegimeInput,
    #[serde(default)]
    pub shared: bool,
    /// Total trial size; when given, Wald inference is added.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inference {
    /// Variance of `√N (η̂ - η)` under planning allocation.
    pub sigma2_eta: f64,
    #[serde(flatten)]
    pub wald: InferenceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgorResponse {
    #[serde(flatten)]
    pub result: DgorResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inference: Option<Inference>,
}

pub fn compute(req: &DgorRequest) -> std::result::Result<DgorResponse, DgorError> {
    let (g, gp) = regime_models(&req.g, &req.gprime, req.shared)?;
    let result = dgor_two_stage(&g, &gp)?;
    let inference = match req.n {
        Some(n) => {
            let sigma2 = asymptotic_variance_two_stage(&g, &gp, &planning_weights(&g, &gp))?;
            Some(inference_for(&result, sigma2, n, req.alpha)?)
        }
        None => None,
    };
    Ok(DgorResponse { result, inference })
}

/// K-stage counterpart of [`compute`], with the 1:1 sequential allocation
/// used by K-stage studies.
pub fn compute_kstage(
    g: &KStageRegimeModel,
    gprime: &KStageRegimeModel,
    n: Option<u64>,
    alpha: f64,
) -> std::result::Result<DgorResponse, DgorError> {
    let result = dgor_kstage(g, gprime)?;
    let inference = match n {
        Some(n) => {
            let w = kstage_planning_weights(&[g, gprime]);
            let sigma2 = asymptotic_variance_kstage(g, gprime, &w)?;
            Some(inference_for(&result, sigma2, n, alpha)?)
        }
        None => None,
    };
    Ok(DgorResponse { result, inference })
}

fn inference_for(
    result: &DgorResult,
    sigma2_eta: f64,
    n: u64,
    alpha: f64,
) -> std::result::Result<Inference, DgorError> {
    let log = result.log_dgor()?;
    Ok(Inference {
        sigma2_eta,
        wald: wald_inference(log, sigma2_eta, result.dgor, n, alpha)?,
    })
}

/// `POST /api/v1/samplesize` and `dgor samplesize`: either an effect size or
/// a pair of regime models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub es: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gprime: Option<RegimeInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<RegimeInput>,
    #[serde(default)]
    pub shared: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_power")]
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizeResponse {
    pub n: u64,
    pub es: f64,
    pub alpha: f64,
    pub power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_log: Option<f64>,
}

pub fn samplesize(req: &SampleSizeRequest) -> std::result::Result<SampleSizeResponse, DgorError> {
    match (req.es, &req.g, &req.gprime) {
        (Some(es), None, None) => Ok(SampleSizeResponse {
            n: sample_size(es, req.alpha, req.power)?,
            es,
            alpha: req.alpha,
            power: req.power,
            eta: None,
            log_eta: None,
            sigma2_eta: None,
            sigma_log: None,
        }),
        (None, Some(g), Some(gp)) => {
            let (g, gp) = regime_models(g, gp, req.shared)?;
            let plan = sample_size_from_models(&g, &gp, req.shared, req.alpha, req.power, None)?;
            Ok(SampleSizeResponse {
                n: plan.n,
                es: plan.effect_size,
                alpha: req.alpha,
                power: req.power,
                eta: Some(plan.eta),
                log_eta: Some(plan.log_eta),
                sigma2_eta: Some(plan.sigma2_eta),
                sigma_log: Some(plan.sigma_log),
            })
        }
        _ => Err(DgorError::InvalidParameter(
            "give either `es` or both `g` and `gprime`".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPmf {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub pmf: Vec<f64>,
}

/// `POST /api/v1/coords` and `dgor coords`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordsRequest {
    pub pmfs: Vec<LabeledPmf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordsResponse {
    pub points: Vec<Point>,
}

pub fn coords(req: &CoordsRequest) -> std::result::Result<CoordsResponse, DgorError> {
    let points = req
        .pmfs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (x, y) = barycentric_coords(&validate_pmf(&p.pmf)?)?;
            Ok(Point {
                label: p.label.clone().unwrap_or_else(|| format!("pmf{}", i + 1)),
                x,
                y,
            })
        })
        .collect::<std::result::Result<_, DgorError>>()?;
    Ok(CoordsResponse { points })
}

/// How `dgor estimate` turns data into a dGOR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Maximum likelihood plug-in.
    Plugin,
    /// Concordant/discordant pairs with design pair weights.
    Concordance,
    /// Concordant/discordant pairs with observed-count pair weights.
    ConcordanceObserved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResponse {
    pub method: EstimateMethod,
    pub g: String,
    pub gprime: String,
    pub n: u64,
    #[serde(flatten)]
    pub result: DgorResult,
    /// Arm sizes used by the variance.
    pub arm_counts: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inference: Option<Inference>,
}

/// Estimate with Wald inference from observed allocation.
pub fn estimate(
    data: &SmartDataset,
    g: &RegimeSpec,
    gprime: &RegimeSpec,
    method: EstimateMethod,
    alpha: f64,
) -> std::result::Result<EstimateResponse, DgorError> {
    let fit = fit_mle(data)?;
    let result = match method {
        EstimateMethod::Plugin => estimate_dgor_plugin(&fit, g, gprime)?,
        EstimateMethod::Concordance => {
            estimate_dgor_concordance(data, g, gprime, PairWeights::Design)?
        }
        EstimateMethod::ConcordanceObserved => {
            estimate_dgor_concordance(data, g, gprime, PairWeights::Observed)?
        }
    };
    let mg = fit.regime_model(g)?;
    let mp = fit.regime_model(gprime)?;
    let weights = DesignWeights::from_counts(&fit.arm_counts)?;
    let inference = if result.log_dgor().is_ok() {
        let sigma2 = asymptotic_variance_two_stage(&mg, &mp, &weights)?;
        Some(inference_for(&result, sigma2, fit.total_n, alpha)?)
    } else {
        None
    };
    let arm_counts = [&mg, &mp]
        .iter()
        .flat_map(|m| [m.responder_arm(), m.nonresponder_arm()])
        .map(|arm| (arm.to_string(), fit.count(&arm)))
        .collect();
    Ok(EstimateResponse {
        method,
        g: g.to_string(),
        gprime: gprime.to_string(),
        n: fit.total_n,
        result,
        arm_counts,
        inference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UStatResponse {
    pub g: String,
    pub gprime: String,
    pub p_gt: f64,
    pub tie_fraction: f64,
    #[serde(flatten)]
    pub result: DgorResult,
}

pub fn estimate_ustat(
    data: &ContinuousDataset,
    g: &RegimeSpec,
    gprime: &RegimeSpec,
    rates: &RateSource,
) -> std::result::Result<UStatResponse, DgorError> {
    let est = estimate_p_ustat(data, g, gprime, rates)?;
    Ok(UStatResponse {
        g: g.to_string(),
        gprime: gprime.to_string(),
        p_gt: est.p_gt,
        tie_fraction: est.tie_fraction,
        result: est.result,
    })
}

/// RFC 7807 style error body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(rename = "type")]
    pub kind: String,
    pub title: String,
    pub status: u16,
    pub code: String,
    pub detail: String,
}

impl Problem {
    pub fn new(status: u16, err: &CliError) -> Self {
        let title = match status {
            400 => "Bad Request",
            422 => "Unprocessable Entity",
            _ => "Error",
        };
        Self {
            kind: "about:blank".into(),
            title: title.into(),
            status,
            code: err.code().into(),
            detail: err.to_string(),
        }
    }
}

/// Parses a request body, keeping serde's message for the caller.
pub fn parse_request<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T> {
    Ok(serde_json::from_slice(body)?)
}

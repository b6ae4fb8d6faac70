//! Domain types shared by the rest of the crate: ordinal outcome
//! distributions, embedded-regime models, SMART designs and trial datasets.
//!
//! Outcome categories are the integers `1..=J`, ascending = better.
//! Treatment labels are opaque strings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{DgorError, Result};

/// Ingest tolerance on `|sum - 1|` for user-supplied probability vectors.
pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// Default threshold below which a cell probability is considered small.
pub const SMALL_CELL_THRESHOLD: f64 = 0.05;

/// Probability vector over `J >= 2` ordered categories (category 1 = worst).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrdinalPmf {
    probs: Vec<f64>,
}

impl OrdinalPmf {
    /// Validates `probs` and renormalizes so the stored entries sum to 1.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_pmf(&probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of categories `J`.
    pub fn categories(&self) -> usize {
        self.probs.len()
    }

    /// Probability of category `j` (1-based).
    pub fn prob(&self, j: usize) -> f64 {
        self.probs[j - 1]
    }

    /// `J` equal probabilities.
    pub fn uniform(categories: usize) -> Result<Self> {
        if categories < 2 {
            return Err(DgorError::TooFewCategories(categories));
        }
        Ok(Self {
            probs: vec![1.0 / categories as f64; categories],
        })
    }

    /// Builds a pmf from category counts (index 0 = category 1).
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(DgorError::Data("cannot form a pmf from zero counts".into()));
        }
        if counts.len() < 2 {
            return Err(DgorError::TooFewCategories(counts.len()));
        }
        let n = total as f64;
        Ok(Self {
            probs: counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }

    /// Cumulative probabilities `P(Y <= j)` for `j = 1..=J`.
    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    pub fn approx_eq(&self, other: &OrdinalPmf, tol: f64) -> bool {
        self.categories() == other.categories()
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl TryFrom<Vec<f64>> for OrdinalPmf {
    type Error = DgorError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        OrdinalPmf::new(value)
    }
}

impl From<OrdinalPmf> for Vec<f64> {
    fn from(value: OrdinalPmf) -> Self {
        value.probs
    }
}

/// Validates a raw probability vector and returns the renormalized pmf.
pub fn validate_pmf(probs: &[f64]) -> Result<OrdinalPmf> {
    if probs.is_empty() {
        return Err(DgorError::EmptyPmf);
    }
    if let Some((index, &value)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(DgorError::NegativeEntry {
            index: index + 1,
            value,
        });
    }
    if probs.len() < 2 {
        return Err(DgorError::TooFewCategories(probs.len()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
        return Err(DgorError::SumNotOne { sum });
    }
    if probs.iter().any(|&p| p > 1.0) {
        return Err(DgorError::SumNotOne { sum });
    }
    // input already normalized up to rounding is kept bit for bit
    let rounding = probs.len() as f64 * f64::EPSILON;
    let probs = if (sum - 1.0).abs() <= rounding {
        probs.to_vec()
    } else {
        probs.iter().map(|p| p / sum).collect()
    };
    Ok(OrdinalPmf { probs })
}

/// 1-based indices of categories whose probability is below `threshold`.
pub fn small_cell_flags(pmf: &OrdinalPmf, threshold: f64) -> Vec<usize> {
    pmf.probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p < threshold)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Identity of one treatment-sequence arm `(stage-1 treatment, response, stage-2 treatment)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Arm {
    pub stage1: String,
    pub responder: bool,
    pub stage2: String,
}

impl Arm {
    pub fn responder(stage1: &str) -> Self {
        Arm {
            stage1: stage1.to_string(),
            responder: true,
            stage2: stage1.to_string(),
        }
    }

    pub fn nonresponder(stage1: &str, stage2: &str) -> Self {
        Arm {
            stage1: stage1.to_string(),
            responder: false,
            stage2: stage2.to_string(),
        }
    }

    pub fn key(&self) -> ArmKey {
        ArmKey(self.to_string())
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.responder {
            write!(f, "{},{}(R)", self.stage1, self.stage2)
        } else {
            write!(f, "{},{}", self.stage1, self.stage2)
        }
    }
}

/// Opaque arm identifier used to pool score contributions and allocation
/// weights across regimes. Two strata with the same key are the same arm.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmKey(pub String);

impl fmt::Display for ArmKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&Arm> for ArmKey {
    fn from(arm: &Arm) -> Self {
        arm.key()
    }
}

/// A terminal stratum of a regime: the arm, its path probability, and its outcome pmf.
#[derive(Debug, Clone, Copy)]
pub struct Stratum<'a> {
    pub weight: f64,
    pub pmf: &'a OrdinalPmf,
}

/// An embedded two-stage regime `(t1, t1^R t2^(1-R))` of a restricted SMART.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageRegimeModel {
    /// Stage-1 treatment.
    pub stage1: String,
    /// Stage-2 treatment given to non-responders.
    pub stage2: String,
    pub response_rate: f64,
    pub responder_pmf: OrdinalPmf,
    pub nonresponder_pmf: OrdinalPmf,
}

impl TwoStageRegimeModel {
    pub fn new(
        stage1: impl Into<String>,
        stage2: impl Into<String>,
        response_rate: f64,
        responder_pmf: OrdinalPmf,
        nonresponder_pmf: OrdinalPmf,
    ) -> Result<Self> {
        let model = Self {
            stage1: stage1.into(),
            stage2: stage2.into(),
            response_rate,
            responder_pmf,
            nonresponder_pmf,
        };
        model.validate()?;
        Ok(model)
    }

    /// Convenience constructor from raw probability slices.
    pub fn from_raw(
        stage1: &str,
        stage2: &str,
        response_rate: f64,
        responder: &[f64],
        nonresponder: &[f64],
    ) -> Result<Self> {
        Self::new(
            stage1,
            stage2,
            response_rate,
            validate_pmf(responder)?,
            validate_pmf(nonresponder)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.response_rate) {
            return Err(DgorError::InvalidRate(self.response_rate));
        }
        let (left, right) = (
            self.responder_pmf.categories(),
            self.nonresponder_pmf.categories(),
        );
        if left != right {
            return Err(DgorError::MismatchedJ { left, right });
        }
        Ok(())
    }

    pub fn categories(&self) -> usize {
        self.responder_pmf.categories()
    }

    pub fn responder_arm(&self) -> Arm {
        Arm::responder(&self.stage1)
    }

    pub fn nonresponder_arm(&self) -> Arm {
        Arm::nonresponder(&self.stage1, &self.stage2)
    }

    /// Responder stratum first, then non-responder.
    pub fn strata(&self) -> [Stratum<'_>; 2] {
        [
            Stratum {
                weight: self.response_rate,
                pmf: &self.responder_pmf,
            },
            Stratum {
                weight: 1.0 - self.response_rate,
                pmf: &self.nonresponder_pmf,
            },
        ]
    }

    pub fn keyed_strata(&self) -> Vec<(ArmKey, Stratum<'_>)> {
        let [r, nr] = self.strata();
        vec![
            (self.responder_arm().key(), r),
            (self.nonresponder_arm().key(), nr),
        ]
    }

    pub fn to_kstage(&self) -> KStageRegimeModel {
        KStageRegimeModel {
            labels: vec![self.stage1.clone(), self.stage2.clone()],
            stage_response_rates: vec![self.response_rate],
            terminal_pmfs: vec![self.responder_pmf.clone(), self.nonresponder_pmf.clone()],
        }
    }

    /// Marginal outcome pmf of a patient following this regime.
    pub fn marginal_pmf(&self) -> Vec<f64> {
        let g = self.response_rate;
        self.responder_pmf
            .probs()
            .iter()
            .zip(self.nonresponder_pmf.probs())
            .map(|(r, n)| g * r + (1.0 - g) * n)
            .collect()
    }
}

/// A K-stage embedded regime: keep the current treatment on response,
/// switch to the next stage's treatment on non-response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStageRegimeModel {
    /// Treatment at each stage, `labels[k]` is given at stage `k + 1`.
    pub labels: Vec<String>,
    /// `K - 1` response rates, one per non-terminal stage.
    pub stage_response_rates: Vec<f64>,
    /// `K` pmfs: entry `k < K-1` for patients first responding after stage
    /// `k + 1`, the last entry for patients who never respond.
    pub terminal_pmfs: Vec<OrdinalPmf>,
}

impl KStageRegimeModel {
    pub fn new(
        labels: Vec<String>,
        stage_response_rates: Vec<f64>,
        terminal_pmfs: Vec<OrdinalPmf>,
    ) -> Result<Self> {
        let model = Self {
            labels,
            stage_response_rates,
            terminal_pmfs,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.terminal_pmfs.len();
        if k < 2 {
            return Err(DgorError::InvalidStageModel(format!(
                "need K >= 2 stages, got {k}"
            )));
        }
        if self.stage_response_rates.len() != k - 1 {
            return Err(DgorError::InvalidStageModel(format!(
                "{} response rates for K = {k}; expected {}",
                self.stage_response_rates.len(),
                k - 1
            )));
        }
        if self.labels.len() != k {
            return Err(DgorError::InvalidStageModel(format!(
                "{} treatment labels for K = {k}",
                self.labels.len()
            )));
        }
        if let Some(&g) = self
            .stage_response_rates
            .iter()
            .find(|g| !(0.0..=1.0).contains(*g))
        {
            return Err(DgorError::InvalidRate(g));
        }
        let j = self.terminal_pmfs[0].categories();
        if let Some(other) = self.terminal_pmfs.iter().find(|p| p.categories() != j) {
            return Err(DgorError::MismatchedJ {
                left: j,
                right: other.categories(),
            });
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.terminal_pmfs.len()
    }

    pub fn categories(&self) -> usize {
        self.terminal_pmfs[0].categories()
    }

    /// Path probability of each terminal stratum: first response after stage
    /// `k` has weight `γ_k ∏_{j<k} (1 - γ_j)`; never responding has weight
    /// `∏_{j<K} (1 - γ_j)`.
    pub fn stratum_weights(&self) -> Vec<f64> {
        let mut survive = 1.0;
        let mut weights = Vec::with_capacity(self.stages());
        for &g in &self.stage_response_rates {
            weights.push(survive * g);
            survive *= 1.0 - g;
        }
        weights.push(survive);
        weights
    }

    pub fn strata(&self) -> Vec<Stratum<'_>> {
        self.stratum_weights()
            .into_iter()
            .zip(&self.terminal_pmfs)
            .map(|(weight, pmf)| Stratum { weight, pmf })
            .collect()
    }

    /// Arm key of terminal stratum `index` (0-based). With K = 2 these agree
    /// with [`TwoStageRegimeModel`]'s responder and non-responder arm keys.
    pub fn arm_key(&self, index: usize) -> ArmKey {
        let k = self.stages();
        if index + 1 == k {
            ArmKey(self.labels.join(","))
        } else {
            let path = self.labels[..=index].join(",");
            ArmKey(format!("{path},{}(R)", self.labels[index]))
        }
    }

    pub fn keyed_strata(&self) -> Vec<(ArmKey, Stratum<'_>)> {
        self.strata()
            .into_iter()
            .enumerate()
            .map(|(i, s)| (self.arm_key(i), s))
            .collect()
    }

    /// Inverse of [`TwoStageRegimeModel::to_kstage`]; fails unless K = 2.
    pub fn to_two_stage(&self) -> Result<TwoStageRegimeModel> {
        if self.stages() != 2 {
            return Err(DgorError::InvalidStageModel(format!(
                "cannot convert K = {} to a two-stage model",
                self.stages()
            )));
        }
        TwoStageRegimeModel::new(
            self.labels[0].clone(),
            self.labels[1].clone(),
            self.stage_response_rates[0],
            self.terminal_pmfs[0].clone(),
            self.terminal_pmfs[1].clone(),
        )
    }
}

/// A two-stage restricted SMART design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartDesign {
    pub stage1_arms: Vec<String>,
    /// Stage-2 options for non-responders, keyed by stage-1 treatment.
    pub stage2_options: BTreeMap<String, Vec<String>>,
    /// Responders continue their stage-1 treatment without re-randomization.
    #[serde(default = "default_true")]
    pub restricted: bool,
    /// Stage-1 randomization probabilities; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_probs: Option<BTreeMap<String, f64>>,
    /// Stage-2 randomization probabilities per stage-1 arm; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2_probs: Option<BTreeMap<String, BTreeMap<String, f64>>>,
}

fn default_true() -> bool {
    true
}

impl SmartDesign {
    /// Uniformly randomized restricted design where every stage-1 arm offers
    /// the same stage-2 options to its non-responders.
    pub fn uniform<S: AsRef<str>>(stage1: &[S], stage2: &[S]) -> Self {
        let options: Vec<String> = stage2.iter().map(|s| s.as_ref().to_string()).collect();
        Self {
            stage1_arms: stage1.iter().map(|s| s.as_ref().to_string()).collect(),
            stage2_options: stage1
                .iter()
                .map(|s| (s.as_ref().to_string(), options.clone()))
                .collect(),
            restricted: true,
            stage1_probs: None,
            stage2_probs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage1_arms.is_empty() {
            return Err(DgorError::InvalidDesign("no stage-1 arms".into()));
        }
        let unique: BTreeSet<_> = self.stage1_arms.iter().collect();
        if unique.len() != self.stage1_arms.len() {
            return Err(DgorError::InvalidDesign("duplicate stage-1 arm".into()));
        }
        for t1 in &self.stage1_arms {
            match self.stage2_options.get(t1) {
                Some(opts) if !opts.is_empty() => {}
                _ => {
                    return Err(DgorError::InvalidDesign(format!(
                        "stage-1 arm {t1} has no stage-2 options"
                    )))
                }
            }
        }
        if let Some(p) = &self.stage1_probs {
            check_probs("stage-1", p, &self.stage1_arms)?;
        }
        if let Some(all) = &self.stage2_probs {
            for (t1, p) in all {
                let opts = self.stage2_options.get(t1).ok_or_else(|| {
                    DgorError::InvalidDesign(format!("stage-2 probabilities for unknown arm {t1}"))
                })?;
                check_probs(&format!("stage-2 ({t1})"), p, opts)?;
            }
        }
        Ok(())
    }

    pub fn stage1_prob(&self, t1: &str) -> f64 {
        match &self.stage1_probs {
            Some(p) => p.get(t1).copied().unwrap_or(0.0),
            None if self.stage1_arms.iter().any(|a| a == t1) => 1.0 / self.stage1_arms.len() as f64,
            None => 0.0,
        }
    }

    /// Probability that a non-responder to `t1` is randomized to `t2`.
    pub fn stage2_prob(&self, t1: &str, t2: &str) -> f64 {
        if let Some(p) = self.stage2_probs.as_ref().and_then(|all| all.get(t1)) {
            return p.get(t2).copied().unwrap_or(0.0);
        }
        match self.stage2_options.get(t1) {
            Some(opts) if opts.iter().any(|o| o == t2) => 1.0 / opts.len() as f64,
            _ => 0.0,
        }
    }

    /// Every arm reachable in the design.
    pub fn arms(&self) -> Vec<Arm> {
        let mut arms = Vec::new();
        for t1 in &self.stage1_arms {
            arms.push(Arm::responder(t1));
            for t2 in self.stage2_options.get(t1).into_iter().flatten() {
                arms.push(Arm::nonresponder(t1, t2));
            }
        }
        arms
    }

    /// Infers a uniform restricted design from observed trajectories.
    pub fn infer(trajectories: &[Trajectory]) -> Self {
        let mut stage1: Vec<String> = Vec::new();
        let mut options: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for t in trajectories {
            if !stage1.contains(&t.stage1) {
                stage1.push(t.stage1.clone());
                options.insert(t.stage1.clone(), Vec::new());
            }
            if !t.responder {
                let opts = options.get_mut(&t.stage1).expect("inserted above");
                if !opts.contains(&t.stage2) {
                    opts.push(t.stage2.clone());
                }
            }
        }
        stage1.sort();
        for opts in options.values_mut() {
            opts.sort();
        }
        Self {
            stage1_arms: stage1,
            stage2_options: options,
            restricted: true,
            stage1_probs: None,
            stage2_probs: None,
        }
    }

    fn allows(&self, t: &Trajectory) -> std::result::Result<(), String> {
        if !self.stage1_arms.contains(&t.stage1) {
            return Err(format!("unknown stage-1 treatment {}", t.stage1));
        }
        if t.responder {
            if self.restricted && t.stage2 != t.stage1 {
                return Err(format!(
                    "responder must continue {} in a restricted design, got {}",
                    t.stage1, t.stage2
                ));
            }
        } else if !self.stage2_options[&t.stage1].contains(&t.stage2) {
            return Err(format!(
                "stage-2 treatment {} is not an option after {}",
                t.stage2, t.stage1
            ));
        }
        Ok(())
    }
}

fn check_probs(what: &str, probs: &BTreeMap<String, f64>, labels: &[String]) -> Result<()> {
    let sum: f64 = probs.values().sum();
    if (sum - 1.0).abs() > PMF_SUM_TOLERANCE || probs.values().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(DgorError::InvalidDesign(format!(
            "{what} randomization probabilities must lie in [0, 1] and sum to 1 (sum = {sum})"
        )));
    }
    if let Some(extra) = probs.keys().find(|k| !labels.contains(k)) {
        return Err(DgorError::InvalidDesign(format!(
            "{what} probability given for unknown treatment {extra}"
        )));
    }
    Ok(())
}

/// One patient's path through a two-stage SMART.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub patient_id: String,
    pub stage1: String,
    pub responder: bool,
    pub stage2: String,
    /// Outcome category in `1..=J`.
    pub outcome: usize,
}

impl Trajectory {
    pub fn arm(&self) -> Arm {
        Arm {
            stage1: self.stage1.clone(),
            responder: self.responder,
            stage2: self.stage2.clone(),
        }
    }
}

/// Per-patient SMART data with a validated design.
#[derive(Debug, Clone, PartialEq)]
pub struct SmartDataset {
    design: SmartDesign,
    trajectories: Vec<Trajectory>,
    categories: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow<Y> {
    patient_id: String,
    stage1: String,
    responder: u8,
    stage2: String,
    outcome: Y,
}

impl SmartDataset {
    pub fn new(design: SmartDesign, trajectories: Vec<Trajectory>, categories: usize) -> Result<Self> {
        design.validate()?;
        if trajectories.is_empty() {
            return Err(DgorError::EmptyDataset);
        }
        if categories < 2 {
            return Err(DgorError::TooFewCategories(categories));
        }
        for t in &trajectories {
            design
                .allows(t)
                .map_err(|reason| DgorError::InconsistentTrajectory {
                    patient_id: t.patient_id.clone(),
                    reason,
                })?;
            if t.outcome == 0 || t.outcome > categories {
                return Err(DgorError::OutcomeOutOfRange {
                    patient_id: t.patient_id.clone(),
                    outcome: t.outcome,
                    categories,
                });
            }
        }
        Ok(Self {
            design,
            trajectories,
            categories,
        })
    }

    pub fn design(&self) -> &SmartDesign {
        &self.design
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    /// Number of outcome categories `J`.
    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Reads the `patient_id,stage1,responder,stage2,outcome` schema.
    ///
    /// When `design` is `None` a uniform restricted design is inferred from
    /// the data; when `categories` is `None`, `J` is the largest observed
    /// outcome (at least 2).
    pub fn read_csv<R: Read>(
        reader: R,
        design: Option<SmartDesign>,
        categories: Option<usize>,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut trajectories = Vec::new();
        for (line, row) in rdr.deserialize::<CsvRow<usize>>().enumerate() {
            let row = row.map_err(|e| DgorError::Data(format!("row {}: {e}", line + 1)))?;
            trajectories.push(Trajectory {
                responder: parse_responder(row.responder, &row.patient_id)?,
                patient_id: row.patient_id,
                stage1: row.stage1,
                stage2: row.stage2,
                outcome: row.outcome,
            });
        }
        if trajectories.is_empty() {
            return Err(DgorError::EmptyDataset);
        }
        let categories = categories
            .unwrap_or_else(|| trajectories.iter().map(|t| t.outcome).max().unwrap_or(2).max(2));
        let design = design.unwrap_or_else(|| SmartDesign::infer(&trajectories));
        Self::new(design, trajectories, categories)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for t in &self.trajectories {
            wtr.serialize(CsvRow {
                patient_id: t.patient_id.clone(),
                stage1: t.stage1.clone(),
                responder: u8::from(t.responder),
                stage2: t.stage2.clone(),
                outcome: t.outcome,
            })
            .map_err(|e| DgorError::Data(e.to_string()))?;
        }
        wtr.flush().map_err(|e| DgorError::Data(e.to_string()))?;
        Ok(())
    }
}

fn parse_responder(flag: u8, patient_id: &str) -> Result<bool> {
    match flag {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(DgorError::Data(format!(
            "responder flag for {patient_id} must be 0 or 1, got {other}"
        ))),
    }
}

/// A trajectory with a real-valued outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousTrajectory {
    pub patient_id: String,
    pub stage1: String,
    pub responder: bool,
    pub stage2: String,
    pub outcome: f64,
}

impl ContinuousTrajectory {
    pub fn arm(&self) -> Arm {
        Arm {
            stage1: self.stage1.clone(),
            responder: self.responder,
            stage2: self.stage2.clone(),
        }
    }
}

/// SMART data with a continuous outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDataset {
    trajectories: Vec<ContinuousTrajectory>,
}

impl ContinuousDataset {
    pub fn new(trajectories: Vec<ContinuousTrajectory>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(DgorError::EmptyDataset);
        }
        if let Some(t) = trajectories.iter().find(|t| !t.outcome.is_finite()) {
            return Err(DgorError::Data(format!(
                "outcome for {} is not finite",
                t.patient_id
            )));
        }
        Ok(Self { trajectories })
    }

    pub fn trajectories(&self) -> &[ContinuousTrajectory] {
        &self.trajectories
    }

    /// Same schema as [`SmartDataset::read_csv`] with a real-valued outcome column.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut trajectories = Vec::new();
        for (line, row) in rdr.deserialize::<CsvRow<f64>>().enumerate() {
            let row = row.map_err(|e| DgorError::Data(format!("row {}: {e}", line + 1)))?;
            trajectories.push(ContinuousTrajectory {
                responder: parse_responder(row.responder, &row.patient_id)?,
                patient_id: row.patient_id,
                stage1: row.stage1,
                stage2: row.stage2,
                outcome: row.outcome,
            });
        }
        Self::new(trajectories)
    }
}

//! Synthetic SMART trials, Monte Carlo population oracles and replication
//! studies of the plug-in estimator and its Wald test.
//!
//! Every replication draws from its own ChaCha8 stream (`seed`, replication
//! index), so serial and parallel runs produce identical reports.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{dgor_kstage, dgor_two_stage};
use crate::error::{DgorError, Result};
use crate::estimation::{FittedSmartModel, RegimeSpec};
use crate::inference::{
    asymptotic_variance_kstage, asymptotic_variance_two_stage, critical_value, sample_size,
    sample_size_from_models, wald_inference, DesignWeights, WeightSource,
};
use crate::model::{
    Arm, ArmKey, KStageRegimeModel, OrdinalPmf, SmartDataset, SmartDesign, Trajectory,
    TwoStageRegimeModel,
};

/// True response rates and outcome pmfs for every arm of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartTruth {
    pub design: SmartDesign,
    pub response_rates: BTreeMap<String, f64>,
    pub arm_pmfs: BTreeMap<ArmKey, OrdinalPmf>,
}

impl SmartTruth {
    /// Truth for a design in which two regimes are embedded. Arms outside both
    /// regimes reuse a non-responder pmf of the same stage-1 treatment, and
    /// stage-1 treatments outside both regimes get rate 0.5 and a uniform pmf.
    /// Neither choice affects estimates for the two regimes.
    pub fn from_regimes(
        design: &SmartDesign,
        regimes: &[&TwoStageRegimeModel],
    ) -> Result<Self> {
        design.validate()?;
        let j = regimes
            .first()
            .map(|m| m.categories())
            .ok_or_else(|| DgorError::IncompleteTruth("no regimes".into()))?;
        let mut response_rates = BTreeMap::new();
        let mut arm_pmfs = BTreeMap::new();
        for m in regimes {
            if m.categories() != j {
                return Err(DgorError::MismatchedJ {
                    left: j,
                    right: m.categories(),
                });
            }
            for arm in [m.responder_arm(), m.nonresponder_arm()] {
                if !design.arms().contains(&arm) {
                    return Err(DgorError::IncompleteTruth(format!(
                        "arm {arm} is not part of the design"
                    )));
                }
            }
            if let Some(&old) = response_rates.get(&m.stage1) {
                if old != m.response_rate {
                    return Err(DgorError::InvalidParameter(format!(
                        "conflicting response rates for {}",
                        m.stage1
                    )));
                }
            }
            response_rates.insert(m.stage1.clone(), m.response_rate);
            arm_pmfs.insert(m.responder_arm().key(), m.responder_pmf.clone());
            arm_pmfs.insert(m.nonresponder_arm().key(), m.nonresponder_pmf.clone());
        }
        for t1 in &design.stage1_arms {
            if !response_rates.contains_key(t1) {
                response_rates.insert(t1.clone(), 0.5);
            }
            let filler = regimes
                .iter()
                .find(|m| &m.stage1 == t1)
                .map(|m| m.nonresponder_pmf.clone());
            for arm in design.arms().into_iter().filter(|a| &a.stage1 == t1) {
                if let std::collections::btree_map::Entry::Vacant(slot) = arm_pmfs.entry(arm.key()) {
                    slot.insert(match &filler {
                        Some(p) => p.clone(),
                        None => OrdinalPmf::uniform(j)?,
                    });
                }
            }
        }
        Ok(Self {
            design: design.clone(),
            response_rates,
            arm_pmfs,
        })
    }

    pub fn categories(&self) -> usize {
        self.arm_pmfs
            .values()
            .next()
            .map(|p| p.categories())
            .unwrap_or(0)
    }
}

/// Smallest design embedding two regimes: two stage-1 arms (a placeholder arm
/// is added for shared-path pairs) with two non-responder options each.
pub fn embedding_design(g: &TwoStageRegimeModel, gprime: &TwoStageRegimeModel) -> SmartDesign {
    let mut stage1: Vec<String> = vec![gprime.stage1.clone()];
    if g.stage1 != gprime.stage1 {
        stage1.push(g.stage1.clone());
    }
    let mut n = 2;
    while stage1.len() < 2 {
        let candidate = format!("T{n}");
        if !stage1.contains(&candidate) {
            stage1.push(candidate);
        }
        n += 1;
    }
    let mut options = BTreeMap::new();
    for t1 in &stage1 {
        let mut opts: Vec<String> = [gprime, g]
            .iter()
            .filter(|m| &m.stage1 == t1)
            .map(|m| m.stage2.clone())
            .collect();
        opts.dedup();
        let mut k = 1;
        while opts.len() < 2 {
            let candidate = format!("S{k}");
            if !opts.contains(&candidate) {
                opts.push(candidate);
            }
            k += 1;
        }
        options.insert(t1.clone(), opts);
    }
    SmartDesign {
        stage1_arms: stage1,
        stage2_options: options,
        restricted: true,
        stage1_probs: None,
        stage2_probs: None,
    }
}

fn cdf_of(pmf: &OrdinalPmf) -> Vec<f64> {
    pmf.cdf()
}

fn draw_category<R: Rng + ?Sized>(rng: &mut R, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn draw_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

struct Stage1Node {
    label: String,
    rate: f64,
    responder_cdf: Vec<f64>,
    options: Vec<String>,
    option_probs: Vec<f64>,
    option_cdfs: Vec<Vec<f64>>,
}

/// Compiled form of a [`SmartTruth`] for fast patient draws.
struct PatientSampler {
    stage1_probs: Vec<f64>,
    nodes: Vec<Stage1Node>,
    categories: usize,
}

/// `(stage-1 index, slot, 0-based category)`; slot 0 is the responder arm,
/// slot `i + 1` the i-th non-responder option.
type Draw = (usize, usize, usize);

impl PatientSampler {
    fn new(truth: &SmartTruth) -> Result<Self> {
        let design = &truth.design;
        design.validate()?;
        let mut nodes = Vec::new();
        for t1 in &design.stage1_arms {
            let rate = *truth
                .response_rates
                .get(t1)
                .ok_or_else(|| DgorError::IncompleteTruth(format!("no response rate for {t1}")))?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(DgorError::InvalidRate(rate));
            }
            let pmf = |arm: Arm| {
                truth
                    .arm_pmfs
                    .get(&arm.key())
                    .ok_or_else(|| DgorError::IncompleteTruth(format!("no pmf for arm {arm}")))
            };
            let responder_cdf = cdf_of(pmf(Arm::responder(t1))?);
            let options = design.stage2_options[t1].clone();
            let mut option_cdfs = Vec::new();
            for t2 in &options {
                option_cdfs.push(cdf_of(pmf(Arm::nonresponder(t1, t2))?));
            }
            nodes.push(Stage1Node {
                label: t1.clone(),
                rate,
                responder_cdf,
                option_probs: options.iter().map(|t2| design.stage2_prob(t1, t2)).collect(),
                options,
                option_cdfs,
            });
        }
        let categories = truth.categories();
        if truth.arm_pmfs.values().any(|p| p.categories() != categories) {
            return Err(DgorError::IncompleteTruth(
                "arm pmfs disagree on the number of categories".into(),
            ));
        }
        Ok(Self {
            stage1_probs: design
                .stage1_arms
                .iter()
                .map(|t| design.stage1_prob(t))
                .collect(),
            nodes,
            categories,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let s1 = draw_index(rng, &self.stage1_probs);
        let node = &self.nodes[s1];
        if rng.random::<f64>() < node.rate {
            (s1, 0, draw_category(rng, &node.responder_cdf))
        } else {
            let opt = draw_index(rng, &node.option_probs);
            (s1, opt + 1, draw_category(rng, &node.option_cdfs[opt]))
        }
    }

    fn arm(&self, s1: usize, slot: usize) -> Arm {
        let node = &self.nodes[s1];
        if slot == 0 {
            Arm::responder(&node.label)
        } else {
            Arm::nonresponder(&node.label, &node.options[slot - 1])
        }
    }

    /// Simulates `n` patients and returns the counting fit.
    fn simulate_fit<R: Rng + ?Sized>(&self, rng: &mut R, n: u64) -> Result<FittedSmartModel> {
        let j = self.categories;
        let mut counts: Vec<Vec<Vec<u64>>> = self
            .nodes
            .iter()
            .map(|node| vec![vec![0u64; j]; node.options.len() + 1])
            .collect();
        for _ in 0..n {
            let (s1, slot, y) = self.draw(rng);
            counts[s1][slot][y] += 1;
        }
        let mut fit = FittedSmartModel {
            response_rates: BTreeMap::new(),
            stage1_counts: BTreeMap::new(),
            arm_pmfs: BTreeMap::new(),
            arm_counts: BTreeMap::new(),
            category_counts: BTreeMap::new(),
            total_n: n,
            categories: j,
        };
        for (s1, node) in self.nodes.iter().enumerate() {
            let mut n1 = 0;
            for (slot, c) in counts[s1].iter().enumerate() {
                let key = self.arm(s1, slot).key();
                let total: u64 = c.iter().sum();
                n1 += total;
                if total > 0 {
                    fit.arm_pmfs.insert(key.clone(), OrdinalPmf::from_counts(c)?);
                }
                fit.arm_counts.insert(key.clone(), total);
                fit.category_counts.insert(key, c.clone());
            }
            fit.stage1_counts.insert(node.label.clone(), n1);
            if n1 > 0 {
                let responders: u64 = counts[s1][0].iter().sum();
                fit.response_rates
                    .insert(node.label.clone(), responders as f64 / n1 as f64);
            }
        }
        Ok(fit)
    }
}

/// Simulates a trial of `n` patients. Deterministic in `seed`.
pub fn generate_trial(truth: &SmartTruth, n: usize, seed: u64) -> Result<SmartDataset> {
    if n < 2 {
        return Err(DgorError::InvalidParameter(format!(
            "a trial needs at least 2 patients, got {n}"
        )));
    }
    let sampler = PatientSampler::new(truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories = (0..n)
        .map(|i| {
            let (s1, slot, y) = sampler.draw(&mut rng);
            let arm = sampler.arm(s1, slot);
            Trajectory {
                patient_id: format!("P{:06}", i + 1),
                stage1: arm.stage1,
                responder: arm.responder,
                stage2: arm.stage2,
                outcome: y + 1,
            }
        })
        .collect();
    SmartDataset::new(truth.design.clone(), trajectories, sampler.categories)
}

/// Something that can draw one patient's outcome category (1-based) under a regime.
pub trait OutcomeSampler {
    fn categories(&self) -> usize;
    fn sample_outcome<R: Rng + ?Sized>(&self, rng: &mut R) -> usize;
}

impl OutcomeSampler for TwoStageRegimeModel {
    fn categories(&self) -> usize {
        TwoStageRegimeModel::categories(self)
    }

    fn sample_outcome<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let pmf = if rng.random::<f64>() < self.response_rate {
            &self.responder_pmf
        } else {
            &self.nonresponder_pmf
        };
        draw_category(rng, &pmf.cdf()) + 1
    }
}

impl OutcomeSampler for KStageRegimeModel {
    fn categories(&self) -> usize {
        KStageRegimeModel::categories(self)
    }

    fn sample_outcome<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let last = self.stages() - 1;
        let stratum = self
            .stage_response_rates
            .iter()
            .position(|&g| rng.random::<f64>() < g)
            .unwrap_or(last);
        draw_category(rng, &self.terminal_pmfs[stratum].cdf()) + 1
    }
}

/// Monte Carlo estimate of a population dGOR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub dgor: f64,
    /// Delta-method Monte Carlo standard error of `dgor`.
    pub se: f64,
    pub greater: u64,
    pub less: u64,
    pub pop_size: u64,
}

/// Draws `pop_size` independent `(Y_g, Y_g')` pairs and returns the ratio of
/// strictly greater to strictly smaller counts. Shared-path pairs need no
/// special handling: the two outcomes belong to different patients.
pub fn population_dgor_oracle<G: OutcomeSampler, H: OutcomeSampler>(
    g: &G,
    gprime: &H,
    pop_size: u64,
    seed: u64,
) -> Result<OracleEstimate> {
    if pop_size < 10_000 {
        return Err(DgorError::InvalidParameter(format!(
            "oracle population must be at least 10^4, got {pop_size}"
        )));
    }
    if g.categories() != gprime.categories() {
        return Err(DgorError::MismatchedJ {
            left: g.categories(),
            right: gprime.categories(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut greater, mut less) = (0u64, 0u64);
    for _ in 0..pop_size {
        let a = g.sample_outcome(&mut rng);
        let b = gprime.sample_outcome(&mut rng);
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => greater += 1,
            std::cmp::Ordering::Less => less += 1,
            std::cmp::Ordering::Equal => {}
        }
    }
    let dgor = greater as f64 / less as f64;
    let se = dgor * (1.0 / greater as f64 + 1.0 / less as f64).sqrt();
    Ok(OracleEstimate {
        dgor,
        se,
        greater,
        less,
        pop_size,
    })
}

/// The pair of regimes a study compares; `[reference g', compared g]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRegimes {
    TwoStage([TwoStageRegimeModel; 2]),
    KStage([KStageRegimeModel; 2]),
}

fn default_alpha() -> f64 {
    0.05
}

fn default_power() -> f64 {
    0.8
}

fn default_replications() -> usize {
    5000
}

/// A Monte Carlo replication study of one comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyScenario {
    pub regimes: ScenarioRegimes,
    #[serde(default)]
    pub shared: bool,
    /// Two-stage only; defaults to [`embedding_design`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<SmartDesign>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_power", alias = "power_target")]
    pub power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_override: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

impl StudyScenario {
    pub fn two_stage(gprime: TwoStageRegimeModel, g: TwoStageRegimeModel, shared: bool) -> Self {
        Self {
            regimes: ScenarioRegimes::TwoStage([gprime, g]),
            shared,
            design: None,
            alpha: default_alpha(),
            power: default_power(),
            n_override: None,
            replications: default_replications(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(DgorError::InvalidParameter("replications must be >= 1".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("power", self.power)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(DgorError::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        match &self.regimes {
            ScenarioRegimes::TwoStage(m) => {
                m[0].validate()?;
                m[1].validate()?;
            }
            ScenarioRegimes::KStage(m) => {
                m[0].validate()?;
                m[1].validate()?;
                if self.design.is_some() {
                    return Err(DgorError::Unsupported(
                        "custom designs are only supported for two-stage studies".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Summary of a replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub true_dgor: f64,
    pub n_used: u64,
    pub replications: usize,
    pub mean_dgor_hat: f64,
    /// Sample standard deviation of the estimates.
    pub sse: f64,
    /// Mean formula standard error of the estimate.
    pub mean_ase: f64,
    /// Rejection fraction over all replications (failures count as non-rejections).
    pub power_hat: f64,
    /// Fraction of successful replications whose interval covers the truth.
    pub coverage_hat: f64,
    pub failures: usize,
}

/// How replications are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

#[derive(Debug, Clone, Copy)]
struct Replicate {
    eta_hat: f64,
    ase: f64,
    reject: bool,
    covered: bool,
}

fn replicate_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn run_replications<F>(reps: usize, seed: u64, execution: Execution, f: F) -> Vec<Option<Replicate>>
where
    F: Fn(&mut ChaCha8Rng) -> Option<Replicate> + Sync,
{
    let one = |rep: usize| f(&mut replicate_rng(seed, rep));
    match execution {
        Execution::Parallel => (0..reps).into_par_iter().map(one).collect(),
        Execution::Serial => (0..reps).map(one).collect(),
    }
}

fn summarize(true_dgor: f64, n: u64, results: &[Option<Replicate>]) -> Result<StudyReport> {
    let ok: Vec<&Replicate> = results.iter().flatten().collect();
    if ok.is_empty() {
        return Err(DgorError::AllReplicationsFailed(results.len()));
    }
    let m = ok.len() as f64;
    let mean = ok.iter().map(|r| r.eta_hat).sum::<f64>() / m;
    let sse = if ok.len() > 1 {
        (ok.iter().map(|r| (r.eta_hat - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(StudyReport {
        true_dgor,
        n_used: n,
        replications: results.len(),
        mean_dgor_hat: mean,
        sse,
        mean_ase: ok.iter().map(|r| r.ase).sum::<f64>() / m,
        power_hat: ok.iter().filter(|r| r.reject).count() as f64 / results.len() as f64,
        coverage_hat: ok.iter().filter(|r| r.covered).count() as f64 / m,
        failures: results.len() - ok.len(),
    })
}

fn wald_replicate(
    eta_hat: f64,
    sigma2: f64,
    n: u64,
    alpha: f64,
    z_crit: f64,
    log_truth: f64,
) -> Option<Replicate> {
    if !(eta_hat.is_finite() && eta_hat > 0.0) {
        return None;
    }
    let inf = wald_inference(eta_hat.ln(), sigma2, eta_hat, n, alpha).ok()?;
    Some(Replicate {
        eta_hat,
        ase: (sigma2 / n as f64).sqrt(),
        reject: inf.reject,
        covered: (inf.log_dgor_hat - log_truth).abs() <= z_crit * inf.se_log,
    })
}

/// Runs a replication study in parallel.
pub fn run_study(scenario: &StudyScenario) -> Result<StudyReport> {
    run_study_with(scenario, Execution::Parallel)
}

pub fn run_study_with(scenario: &StudyScenario, execution: Execution) -> Result<StudyReport> {
    scenario.validate()?;
    match &scenario.regimes {
        ScenarioRegimes::TwoStage([gprime, g]) => {
            run_two_stage_study(scenario, g, gprime, execution)
        }
        ScenarioRegimes::KStage([gprime, g]) => run_kstage_study(scenario, g, gprime, execution),
    }
}

fn run_two_stage_study(
    scenario: &StudyScenario,
    g: &TwoStageRegimeModel,
    gprime: &TwoStageRegimeModel,
    execution: Execution,
) -> Result<StudyReport> {
    let design = scenario
        .design
        .clone()
        .unwrap_or_else(|| embedding_design(g, gprime));
    let truth = SmartTruth::from_regimes(&design, &[gprime, g])?;
    let sampler = PatientSampler::new(&truth)?;
    let true_dgor = dgor_two_stage(g, gprime)?.dgor;
    if !(true_dgor.is_finite() && true_dgor > 0.0) {
        return Err(DgorError::UndefinedLog(true_dgor));
    }
    let n = match scenario.n_override {
        Some(n) => n,
        None => {
            sample_size_from_models(g, gprime, scenario.shared, scenario.alpha, scenario.power, None)?
                .n
        }
    };
    let (spec_g, spec_gp) = (
        RegimeSpec::new(&g.stage1, &g.stage2),
        RegimeSpec::new(&gprime.stage1, &gprime.stage2),
    );
    let z_crit = critical_value(scenario.alpha)?;
    let log_truth = true_dgor.ln();
    let results = run_replications(scenario.replications, scenario.seed, execution, |rng| {
        let fit = sampler.simulate_fit(rng, n).ok()?;
        let mg = fit.regime_model(&spec_g).ok()?;
        let mp = fit.regime_model(&spec_gp).ok()?;
        let eta_hat = dgor_two_stage(&mg, &mp).ok()?.dgor;
        let weights = DesignWeights::from_counts(&fit.arm_counts).ok()?;
        let sigma2 = asymptotic_variance_two_stage(&mg, &mp, &weights).ok()?;
        wald_replicate(eta_hat, sigma2, n, scenario.alpha, z_crit, log_truth)
    });
    summarize(true_dgor, n, &results)
}

/// Allocation of a K-stage SMART that randomizes the first stage 1:1 and
/// every later non-responder 1:1 between continuing the regime or leaving it.
pub fn kstage_planning_weights(models: &[&KStageRegimeModel]) -> DesignWeights {
    let mut weights = BTreeMap::new();
    for m in models {
        let path = m.stratum_weights();
        for (k, w) in path.iter().enumerate() {
            // k later randomizations precede stratum k
            weights.insert(m.arm_key(k), 0.5 * w * 0.5f64.powi(k as i32));
        }
    }
    DesignWeights {
        weights,
        source: WeightSource::DesignBased,
    }
}

fn simulate_kstage_fit<R: Rng + ?Sized>(
    rng: &mut R,
    models: [&KStageRegimeModel; 2],
    cdfs: &[Vec<Vec<f64>>; 2],
    n: u64,
) -> Option<([KStageRegimeModel; 2], DesignWeights)> {
    let j = models[0].categories();
    // per side: counts per stratum and category, plus (reached, responded) per stage
    let mut counts: [Vec<Vec<u64>>; 2] = [
        vec![vec![0; j]; models[0].stages()],
        vec![vec![0; j]; models[1].stages()],
    ];
    let mut stages: [Vec<(u64, u64)>; 2] = [
        vec![(0, 0); models[0].stages() - 1],
        vec![(0, 0); models[1].stages() - 1],
    ];
    for _ in 0..n {
        let side = usize::from(rng.random::<bool>());
        let m = models[side];
        let last = m.stages() - 1;
        let mut stratum = Some(last);
        for (k, (reached, responded)) in stages[side].iter_mut().enumerate() {
            *reached += 1;
            if rng.random::<f64>() < m.stage_response_rates[k] {
                *responded += 1;
                stratum = Some(k);
                break;
            }
            if !rng.random::<bool>() {
                stratum = None;
                break;
            }
        }
        if let Some(s) = stratum {
            counts[side][s][draw_category(rng, &cdfs[side][s])] += 1;
        }
    }
    let mut fitted = Vec::with_capacity(2);
    let mut weights = BTreeMap::new();
    for side in 0..2 {
        let m = models[side];
        let rates: Vec<f64> = stages[side]
            .iter()
            .map(|&(reached, resp)| {
                if reached == 0 {
                    f64::NAN
                } else {
                    resp as f64 / reached as f64
                }
            })
            .collect();
        if rates.iter().any(|r| r.is_nan()) {
            return None;
        }
        let mut pmfs = Vec::with_capacity(m.stages());
        for (k, c) in counts[side].iter().enumerate() {
            let total: u64 = c.iter().sum();
            weights.insert(m.arm_key(k), total as f64 / n as f64);
            pmfs.push(if total > 0 {
                OrdinalPmf::from_counts(c).ok()?
            } else {
                OrdinalPmf::uniform(j).ok()?
            });
        }
        let fit = KStageRegimeModel {
            labels: m.labels.clone(),
            stage_response_rates: rates,
            terminal_pmfs: pmfs,
        };
        // a stratum with positive estimated weight needs patients
        for (k, w) in fit.stratum_weights().iter().enumerate() {
            if *w > 0.0 && counts[side][k].iter().sum::<u64>() == 0 {
                return None;
            }
        }
        fitted.push(fit);
    }
    let second = fitted.pop()?;
    let first = fitted.pop()?;
    Some((
        [first, second],
        DesignWeights {
            weights,
            source: WeightSource::ObservedCounts,
        },
    ))
}

fn run_kstage_study(
    scenario: &StudyScenario,
    g: &KStageRegimeModel,
    gprime: &KStageRegimeModel,
    execution: Execution,
) -> Result<StudyReport> {
    if g.labels[0] == gprime.labels[0] {
        return Err(DgorError::Unsupported(
            "K-stage studies compare regimes with different first treatments".into(),
        ));
    }
    let true_dgor = dgor_kstage(g, gprime)?.dgor;
    if !(true_dgor.is_finite() && true_dgor > 0.0) {
        return Err(DgorError::UndefinedLog(true_dgor));
    }
    let n = match scenario.n_override {
        Some(n) => n,
        None => {
            let w = kstage_planning_weights(&[g, gprime]);
            let sigma2 = asymptotic_variance_kstage(g, gprime, &w)?;
            let es = true_dgor.ln() / (sigma2.sqrt() / true_dgor);
            sample_size(es, scenario.alpha, scenario.power)?
        }
    };
    let cdfs = [g, gprime].map(|m| m.terminal_pmfs.iter().map(|p| p.cdf()).collect::<Vec<_>>());
    let z_crit = critical_value(scenario.alpha)?;
    let log_truth = true_dgor.ln();
    let results = run_replications(scenario.replications, scenario.seed, execution, |rng| {
        let ([mg, mp], weights) = simulate_kstage_fit(rng, [g, gprime], &cdfs, n)?;
        let eta_hat = dgor_kstage(&mg, &mp).ok()?.dgor;
        let sigma2 = asymptotic_variance_kstage(&mg, &mp, &weights).ok()?;
        wald_replicate(eta_hat, sigma2, n, scenario.alpha, z_crit, log_truth)
    });
    summarize(true_dgor, n, &results)
}

/// Position of a three-category pmf in an equilateral triangle with vertices
/// `(1,0,0) -> (0,0)`, `(0,1,0) -> (1,0)` and `(0,0,1) -> (1/2, √3/2)`.
pub fn barycentric_coords(pmf: &OrdinalPmf) -> Result<(f64, f64)> {
    if pmf.categories() != 3 {
        return Err(DgorError::NotThreeCategories(pmf.categories()));
    }
    let p = pmf.probs();
    Ok((p[1] + 0.5 * p[2], 3f64.sqrt() / 2.0 * p[2]))
}

/// Writes `label,x,y` rows.
pub fn write_coords_csv<W: Write>(writer: W, rows: &[(String, (f64, f64))]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["label", "x", "y"])
        .map_err(|e| DgorError::Data(e.to_string()))?;
    for (label, (x, y)) in rows {
        wtr.write_record([label.as_str(), &x.to_string(), &y.to_string()])
            .map_err(|e| DgorError::Data(e.to_string()))?;
    }
    wtr.flush().map_err(|e| DgorError::Data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_pmf;

    fn regime(s1: &str, s2: &str, g: f64, r: &[f64], n: &[f64]) -> TwoStageRegimeModel {
        TwoStageRegimeModel::from_raw(s1, s2, g, r, n).unwrap()
    }

    fn dp_row1() -> (TwoStageRegimeModel, TwoStageRegimeModel) {
        (
            regime("B", "E", 0.4, &[0.31, 0.50, 0.19], &[0.14, 0.47, 0.39]),
            regime("A", "E", 0.3, &[0.23, 0.51, 0.26], &[0.50, 0.41, 0.09]),
        )
    }

    fn truth() -> SmartTruth {
        let (g, gp) = dp_row1();
        SmartTruth::from_regimes(&SmartDesign::uniform(&["A", "B"], &["E", "F"]), &[&gp, &g])
            .unwrap()
    }

    #[test]
    fn trials_are_deterministic() {
        let t = truth();
        let a = generate_trial(&t, 500, 7).unwrap();
        let b = generate_trial(&t, 500, 7).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        assert_ne!(generate_trial(&t, 500, 8).unwrap(), a);
    }

    #[test]
    fn responder_fraction_concentrates() {
        let data = generate_trial(&truth(), 100_000, 11).unwrap();
        let on_a: Vec<_> = data.trajectories().iter().filter(|t| t.stage1 == "A").collect();
        let frac = on_a.iter().filter(|t| t.responder).count() as f64 / on_a.len() as f64;
        assert!((frac - 0.3).abs() < 0.006, "{frac}");
    }

    #[test]
    fn minimal_trial() {
        let data = generate_trial(&truth(), 2, 1).unwrap();
        assert_eq!(data.len(), 2);
        let mut out = Vec::new();
        data.write_csv(&mut out).unwrap();
        let back = SmartDataset::read_csv(out.as_slice(), Some(data.design().clone()), Some(3))
            .unwrap();
        assert_eq!(back, data);
        assert!(generate_trial(&truth(), 1, 1).is_err());
    }

    #[test]
    fn incomplete_truth() {
        let mut t = truth();
        t.arm_pmfs.remove(&ArmKey("B,F".into()));
        assert!(matches!(
            generate_trial(&t, 10, 1),
            Err(DgorError::IncompleteTruth(_))
        ));
    }

    #[test]
    fn oracle_identical_regimes() {
        let (g, _) = dp_row1();
        let o = population_dgor_oracle(&g, &g, 1_000_000, 3).unwrap();
        assert!((o.dgor - 1.0).abs() < 0.01);
        assert!(population_dgor_oracle(&g, &g, 100, 3).is_err());
    }

    #[test]
    fn barycentric() {
        let c = |p: &[f64]| barycentric_coords(&validate_pmf(p).unwrap()).unwrap();
        assert_eq!(c(&[1.0, 0.0, 0.0]), (0.0, 0.0));
        let (x, y) = c(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert!((x - 0.5).abs() < 1e-12 && (y - 3f64.sqrt() / 6.0).abs() < 1e-12);
        let (x, y) = c(&[0.5, 0.5, 0.0]);
        assert!((x - 0.5).abs() < 1e-12 && y.abs() < 1e-12);
        assert_eq!(
            barycentric_coords(&validate_pmf(&[0.5, 0.5]).unwrap()),
            Err(DgorError::NotThreeCategories(2))
        );
        let mut out = Vec::new();
        write_coords_csv(&mut out, &[("AA".into(), (0.25, 0.5))]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "label,x,y\nAA,0.25,0.5\n");
    }

    #[test]
    fn embedding_design_pads_shared_pairs() {
        let g = regime("A", "F", 0.3, &[0.2, 0.8], &[0.5, 0.5]);
        let gp = regime("A", "E", 0.3, &[0.2, 0.8], &[0.4, 0.6]);
        let d = embedding_design(&g, &gp);
        assert_eq!(d.stage1_arms.len(), 2);
        assert_eq!(d.stage2_options["A"], vec!["E", "F"]);
        d.validate().unwrap();
    }

    #[test]
    fn small_study_runs() {
        let (g, gp) = dp_row1();
        let mut s = StudyScenario::two_stage(gp, g, false);
        s.replications = 50;
        s.seed = 5;
        let r = run_study(&s).unwrap();
        assert_eq!(r.n_used, 173);
        assert!(r.power_hat >= 0.0 && r.power_hat <= 1.0);
        assert_eq!(r, run_study_with(&s, Execution::Serial).unwrap());
    }

    #[test]
    fn scenario_json_defaults() {
        let json = r#"{"regimes": [
            {"stage1":"A","stage2":"E","response_rate":0.3,
             "responder_pmf":[0.2,0.8],"nonresponder_pmf":[0.5,0.5]},
            {"stage1":"B","stage2":"E","response_rate":0.4,
             "responder_pmf":[0.1,0.9],"nonresponder_pmf":[0.3,0.7]}]}"#;
        let s: StudyScenario = serde_json::from_str(json).unwrap();
        assert_eq!(s.replications, 5000);
        assert_eq!(s.alpha, 0.05);
        assert!(matches!(s.regimes, ScenarioRegimes::TwoStage(_)));
    }
}

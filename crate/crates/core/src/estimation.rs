//! Estimating regime models and dGORs from SMART data.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{dgor_two_stage, DgorResult, Warning};
use crate::error::{DgorError, Result};
use crate::model::{
    Arm, ArmKey, ContinuousDataset, OrdinalPmf, SmartDataset, TwoStageRegimeModel,
};

/// An embedded two-stage regime: start with `stage1`, keep it on response,
/// switch non-responders to `stage2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub stage1: String,
    pub stage2: String,
}

impl RegimeSpec {
    pub fn new(stage1: impl Into<String>, stage2: impl Into<String>) -> Self {
        Self {
            stage1: stage1.into(),
            stage2: stage2.into(),
        }
    }

    pub fn responder_arm(&self) -> Arm {
        Arm::responder(&self.stage1)
    }

    pub fn nonresponder_arm(&self) -> Arm {
        Arm::nonresponder(&self.stage1, &self.stage2)
    }
}

impl fmt::Display for RegimeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}/{})", self.stage1, self.stage1, self.stage2)
    }
}

/// Closed-form maximum likelihood fit of a two-stage SMART.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSmartModel {
    /// Responder fraction per stage-1 treatment.
    pub response_rates: BTreeMap<String, f64>,
    /// Patients per stage-1 treatment.
    pub stage1_counts: BTreeMap<String, u64>,
    /// Category frequencies of every arm with at least one patient.
    pub arm_pmfs: BTreeMap<ArmKey, OrdinalPmf>,
    /// Patients per arm, including design arms with no patients.
    pub arm_counts: BTreeMap<ArmKey, u64>,
    /// Category counts per arm (index 0 = category 1).
    pub category_counts: BTreeMap<ArmKey, Vec<u64>>,
    pub total_n: u64,
    pub categories: usize,
}

impl FittedSmartModel {
    /// Patients on the responder arm (`true`) or the non-responder arm of a regime.
    pub fn count(&self, arm: &Arm) -> u64 {
        self.arm_counts.get(&arm.key()).copied().unwrap_or(0)
    }

    fn nonresponders(&self, stage1: &str) -> u64 {
        self.stage1_counts.get(stage1).copied().unwrap_or(0)
            - self.count(&Arm::responder(stage1))
    }

    fn arm_pmf(&self, arm: &Arm) -> Result<OrdinalPmf> {
        if !self.arm_counts.contains_key(&arm.key()) {
            return Err(DgorError::MissingArm(arm.to_string()));
        }
        self.arm_pmfs
            .get(&arm.key())
            .cloned()
            .ok_or_else(|| DgorError::EmptyArm(arm.to_string()))
    }

    /// Plug-in regime model. An arm whose stratum has zero estimated weight
    /// may be empty; its pmf is then irrelevant and set to uniform.
    pub fn regime_model(&self, spec: &RegimeSpec) -> Result<TwoStageRegimeModel> {
        let gamma = *self
            .response_rates
            .get(&spec.stage1)
            .ok_or_else(|| DgorError::MissingArm(spec.stage1.clone()))?;
        let placeholder = || OrdinalPmf::uniform(self.categories);
        let responder = if gamma > 0.0 {
            self.arm_pmf(&spec.responder_arm())?
        } else {
            placeholder()?
        };
        let nonresponder = if gamma < 1.0 {
            self.arm_pmf(&spec.nonresponder_arm())?
        } else {
            if !self.arm_counts.contains_key(&spec.nonresponder_arm().key()) {
                return Err(DgorError::MissingArm(spec.nonresponder_arm().to_string()));
            }
            placeholder()?
        };
        TwoStageRegimeModel::new(
            spec.stage1.clone(),
            spec.stage2.clone(),
            gamma,
            responder,
            nonresponder,
        )
    }
}

/// Counts responders per stage-1 treatment and categories per arm.
pub fn fit_mle(data: &SmartDataset) -> Result<FittedSmartModel> {
    if data.is_empty() {
        return Err(DgorError::EmptyDataset);
    }
    let j = data.categories();
    let mut category_counts: BTreeMap<ArmKey, Vec<u64>> = data
        .design()
        .arms()
        .iter()
        .map(|a| (a.key(), vec![0; j]))
        .collect();
    let mut stage1_counts: BTreeMap<String, u64> = data
        .design()
        .stage1_arms
        .iter()
        .map(|t| (t.clone(), 0))
        .collect();
    let mut responders: BTreeMap<String, u64> = BTreeMap::new();
    for t in data.trajectories() {
        *stage1_counts.entry(t.stage1.clone()).or_default() += 1;
        if t.responder {
            *responders.entry(t.stage1.clone()).or_default() += 1;
        }
        category_counts
            .entry(t.arm().key())
            .or_insert_with(|| vec![0; j])[t.outcome - 1] += 1;
    }
    let response_rates = stage1_counts
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(t, &n)| {
            let r = responders.get(t).copied().unwrap_or(0);
            (t.clone(), r as f64 / n as f64)
        })
        .collect();
    let arm_counts: BTreeMap<ArmKey, u64> = category_counts
        .iter()
        .map(|(k, c)| (k.clone(), c.iter().sum()))
        .collect();
    let mut arm_pmfs = BTreeMap::new();
    for (k, c) in &category_counts {
        if arm_counts[k] > 0 {
            arm_pmfs.insert(k.clone(), OrdinalPmf::from_counts(c)?);
        }
    }
    Ok(FittedSmartModel {
        response_rates,
        stage1_counts,
        arm_pmfs,
        arm_counts,
        category_counts,
        total_n: data.len() as u64,
        categories: j,
    })
}

/// Plug-in dGOR of regime `g` over regime `gprime` using the fitted response
/// rates and arm frequencies.
pub fn estimate_dgor_plugin(
    fit: &FittedSmartModel,
    g: &RegimeSpec,
    gprime: &RegimeSpec,
) -> Result<DgorResult> {
    let mg = fit.regime_model(g)?;
    let mp = fit.regime_model(gprime)?;
    dgor_two_stage(&mg, &mp)
}

/// Per-patient weights of the pair-counting estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairWeights {
    /// Inverse randomization probability: responders 1, non-responders
    /// `1 / s` (2 under uniform randomization), giving pair weights 1, 2, 2, 4.
    #[default]
    Design,
    /// Inverse observed stage-2 allocation fraction among non-responders.
    /// Reproduces the plug-in estimate exactly on every dataset.
    Observed,
}

/// Weighted concordant over discordant cross-regime patient pairs.
pub fn estimate_dgor_concordance(
    data: &SmartDataset,
    g: &RegimeSpec,
    gprime: &RegimeSpec,
    weights: PairWeights,
) -> Result<DgorResult> {
    if !data.design().restricted {
        return Err(DgorError::Unsupported(
            "pair weights assume responders are not re-randomized".into(),
        ));
    }
    let fit = fit_mle(data)?;
    let side_g = weighted_histograms(data, &fit, g, weights)?;
    let side_gp = weighted_histograms(data, &fit, gprime, weights)?;

    let (mut conc, mut disc, mut tied) = (0.0, 0.0, 0.0);
    for (wa, ha) in &side_g {
        for (wb, hb) in &side_gp {
            let w = wa * wb;
            // running count of g' patients strictly below category s
            let mut below = 0.0;
            let mut above: f64 = hb.iter().map(|&c| c as f64).sum();
            for (&ca, &cb) in ha.iter().zip(hb.iter()) {
                let (ca, cb) = (ca as f64, cb as f64);
                above -= cb;
                conc += w * ca * below;
                disc += w * ca * above;
                tied += w * ca * cb;
                below += cb;
            }
        }
    }
    let total = conc + disc + tied;
    let mut result = DgorResult::from_probabilities(conc / total, disc / total, tied / total);
    if disc == 0.0 && conc > 0.0 {
        result.warnings.push(Warning::new(
            "estimate.zero_discordant",
            "no discordant pairs; the estimate is infinite",
        ));
    }
    let mg = fit.regime_model(g)?;
    let mp = fit.regime_model(gprime)?;
    result
        .warnings
        .extend(dgor_two_stage(&mg, &mp)?.warnings.into_iter().filter(|w| w.code == "small_cell"));
    Ok(result)
}

/// `(patient weight, category histogram)` for the arms of one regime.
fn weighted_histograms<'a>(
    data: &SmartDataset,
    fit: &'a FittedSmartModel,
    spec: &RegimeSpec,
    weights: PairWeights,
) -> Result<Vec<(f64, &'a Vec<u64>)>> {
    let n1 = fit.stage1_counts.get(&spec.stage1).copied().unwrap_or(0);
    if n1 == 0 {
        return Err(DgorError::EmptyArm(spec.stage1.clone()));
    }
    let histogram = |arm: &Arm| {
        fit.category_counts
            .get(&arm.key())
            .ok_or_else(|| DgorError::MissingArm(arm.to_string()))
    };
    let mut out = Vec::with_capacity(2);
    let resp = spec.responder_arm();
    let h = histogram(&resp)?;
    if fit.count(&resp) > 0 {
        out.push((1.0, h));
    }
    let nonresp = spec.nonresponder_arm();
    let h = histogram(&nonresp)?;
    let n_arm = fit.count(&nonresp);
    let n_nonresp = fit.nonresponders(&spec.stage1);
    if n_nonresp > 0 {
        if n_arm == 0 {
            return Err(DgorError::EmptyArm(nonresp.to_string()));
        }
        let w = match weights {
            PairWeights::Design => {
                1.0 / data.design().stage2_prob(&spec.stage1, &spec.stage2)
            }
            PairWeights::Observed => n_nonresp as f64 / n_arm as f64,
        };
        out.push((w, h));
    }
    Ok(out)
}

/// Where the U-statistic takes its response rates from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Responder fractions of the same dataset.
    #[default]
    Observed,
    /// Externally fixed rates per stage-1 treatment.
    Fixed(BTreeMap<String, f64>),
}

/// Output of [`estimate_p_ustat`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UStatEstimate {
    /// Estimate of `P(Y_g > Y_g')`.
    pub p_gt: f64,
    /// Fraction of all compared pairs that were exact ties.
    pub tie_fraction: f64,
    /// dGOR as `p / (1 - p)`; ties are counted on the discordant side.
    pub result: DgorResult,
}

/// Stratified two-sample U-statistic for real-valued outcomes.
pub fn estimate_p_ustat(
    data: &ContinuousDataset,
    g: &RegimeSpec,
    gprime: &RegimeSpec,
    rates: &RateSource,
) -> Result<UStatEstimate> {
    let mut arms: BTreeMap<ArmKey, Vec<f64>> = BTreeMap::new();
    let mut stage1: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for t in data.trajectories() {
        arms.entry(t.arm().key()).or_default().push(t.outcome);
        let e = stage1.entry(t.stage1.as_str()).or_default();
        e.0 += 1;
        e.1 += u64::from(t.responder);
    }
    for v in arms.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    let rate = |t1: &str| -> Result<f64> {
        match rates {
            RateSource::Observed => match stage1.get(t1) {
                Some(&(n, r)) if n > 0 => Ok(r as f64 / n as f64),
                _ => Err(DgorError::EmptyArm(t1.to_string())),
            },
            RateSource::Fixed(map) => {
                let g = *map
                    .get(t1)
                    .ok_or_else(|| DgorError::MissingRate(t1.to_string()))?;
                if !(0.0..=1.0).contains(&g) {
                    return Err(DgorError::InvalidRate(g));
                }
                Ok(g)
            }
        }
    };
    let strata = |spec: &RegimeSpec| -> Result<[(f64, Arm); 2]> {
        let gamma = rate(&spec.stage1)?;
        Ok([
            (gamma, spec.responder_arm()),
            (1.0 - gamma, spec.nonresponder_arm()),
        ])
    };
    let (sg, sp) = (strata(g)?, strata(gprime)?);

    let (mut p, mut ties, mut pairs) = (0.0, 0u128, 0u128);
    for (wa, arm_a) in &sg {
        for (wb, arm_b) in &sp {
            let w = wa * wb;
            if w == 0.0 {
                continue;
            }
            let a = arms
                .get(&arm_a.key())
                .ok_or_else(|| DgorError::EmptyArm(arm_a.to_string()))?;
            let b = arms
                .get(&arm_b.key())
                .ok_or_else(|| DgorError::EmptyArm(arm_b.to_string()))?;
            let (mut greater, mut equal) = (0u128, 0u128);
            for &y in a {
                let lo = b.partition_point(|&x| x < y);
                let hi = b.partition_point(|&x| x <= y);
                greater += lo as u128;
                equal += (hi - lo) as u128;
            }
            let n_pairs = (a.len() * b.len()) as u128;
            p += w * greater as f64 / n_pairs as f64;
            ties += equal;
            pairs += n_pairs;
        }
    }
    let tie_fraction = if pairs > 0 {
        ties as f64 / pairs as f64
    } else {
        0.0
    };
    let mut result = DgorResult::from_probabilities(p, 1.0 - p, 0.0);
    if tie_fraction > 0.5 {
        result.warnings.push(Warning::new(
            "estimate.ties_dominant",
            format!("{:.1}% of compared pairs are exact ties", 100.0 * tie_fraction),
        ));
    }
    Ok(UStatEstimate {
        p_gt: p,
        tie_fraction,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContinuousTrajectory, SmartDesign, Trajectory};

    fn traj(id: usize, s1: &str, r: bool, s2: &str, y: usize) -> Trajectory {
        Trajectory {
            patient_id: format!("p{id}"),
            stage1: s1.into(),
            responder: r,
            stage2: s2.into(),
            outcome: y,
        }
    }

    fn four_patients() -> SmartDataset {
        let design = SmartDesign::uniform(&["A"], &["E"]);
        SmartDataset::new(
            design,
            vec![
                traj(1, "A", true, "A", 2),
                traj(2, "A", false, "E", 1),
                traj(3, "A", false, "E", 3),
                traj(4, "A", true, "A", 2),
            ],
            3,
        )
        .unwrap()
    }

    #[test]
    fn counting_fit() {
        let fit = fit_mle(&four_patients()).unwrap();
        assert_eq!(fit.response_rates["A"], 0.5);
        assert_eq!(fit.arm_pmfs[&ArmKey("A,A(R)".into())].probs(), &[0.0, 1.0, 0.0]);
        assert_eq!(fit.arm_pmfs[&ArmKey("A,E".into())].probs(), &[0.5, 0.0, 0.5]);
        assert_eq!(fit.arm_counts.values().sum::<u64>(), fit.total_n);
    }

    #[test]
    fn empty_arm_is_named() {
        let design = SmartDesign::uniform(&["A", "B"], &["E", "F"]);
        let data = SmartDataset::new(
            design,
            vec![
                traj(1, "A", true, "A", 2),
                traj(2, "A", false, "F", 1),
                traj(3, "B", false, "E", 3),
            ],
            3,
        )
        .unwrap();
        let fit = fit_mle(&data).unwrap();
        assert_eq!(
            fit.regime_model(&RegimeSpec::new("A", "E")),
            Err(DgorError::EmptyArm("A,E".into()))
        );
        assert!(matches!(
            fit.regime_model(&RegimeSpec::new("A", "Z")),
            Err(DgorError::MissingArm(_))
        ));
    }

    #[test]
    fn plugin_matches_hand_computation() {
        let design = SmartDesign::uniform(&["A", "B"], &["E"]);
        let mut rows = four_patients().trajectories().to_vec();
        rows.push(traj(5, "B", true, "B", 3));
        rows.push(traj(6, "B", false, "E", 1));
        rows.push(traj(7, "B", false, "E", 2));
        let data = SmartDataset::new(design, rows, 3).unwrap();
        let fit = fit_mle(&data).unwrap();
        let r = estimate_dgor_plugin(&fit, &RegimeSpec::new("B", "E"), &RegimeSpec::new("A", "E"))
            .unwrap();
        // B: γ = 1/3, resp (0,0,1), nonresp (1/2,1/2,0) -> mixture (1/3,1/3,1/3)
        // A: γ = 1/2, resp (0,1,0), nonresp (1/2,0,1/2) -> mixture (1/4,1/2,1/4)
        let gt = 1.0 / 3.0 * 0.25 + 1.0 / 3.0 * 0.75;
        let lt = 1.0 / 3.0 * 0.75 + 1.0 / 3.0 * 0.25;
        assert!((r.p_gt - gt).abs() < 1e-12);
        assert!((r.p_lt - lt).abs() < 1e-12);
        assert!((r.dgor - 1.0).abs() < 1e-12);
        let same = estimate_dgor_plugin(&fit, &RegimeSpec::new("A", "E"), &RegimeSpec::new("A", "E"))
            .unwrap();
        assert_eq!(same.dgor, 1.0);
    }

    #[test]
    fn small_cells_are_flagged() {
        let mut rows = Vec::new();
        let mut id = 0;
        let mut push = |s1: &str, r: bool, s2: &str, y: usize, n: usize| {
            for _ in 0..n {
                id += 1;
                rows.push(traj(id, s1, r, s2, y));
            }
        };
        push("A", false, "E", 1, 95);
        push("A", false, "E", 2, 3);
        push("A", false, "E", 3, 2);
        push("A", true, "A", 2, 40);
        push("B", true, "B", 3, 30);
        push("B", false, "E", 1, 30);
        push("B", false, "E", 2, 40);
        push("B", false, "E", 3, 30);
        let data = SmartDataset::new(SmartDesign::uniform(&["A", "B"], &["E"]), rows, 3).unwrap();
        let fit = fit_mle(&data).unwrap();
        let r = estimate_dgor_plugin(&fit, &RegimeSpec::new("B", "E"), &RegimeSpec::new("A", "E"))
            .unwrap();
        assert!(r.warnings.iter().any(|w| w.code == "small_cell" && w.message.contains("A,E")));
    }

    #[test]
    fn minimal_concordance_dataset() {
        let design = SmartDesign::uniform(&["A", "B"], &["E"]);
        let data = SmartDataset::new(
            design,
            vec![traj(1, "B", true, "B", 2), traj(2, "A", true, "A", 1)],
            3,
        )
        .unwrap();
        let r = estimate_dgor_concordance(
            &data,
            &RegimeSpec::new("B", "E"),
            &RegimeSpec::new("A", "E"),
            PairWeights::Design,
        )
        .unwrap();
        assert!(r.dgor.is_infinite());
        assert!(r.has_warning("estimate.zero_discordant"));
    }

    #[test]
    fn ustat_all_ties() {
        let rows = ["A", "B"]
            .iter()
            .flat_map(|s1| {
                [true, false].map(|r| ContinuousTrajectory {
                    patient_id: format!("{s1}{r}"),
                    stage1: s1.to_string(),
                    responder: r,
                    stage2: if r { s1.to_string() } else { "E".into() },
                    outcome: 0.0,
                })
            })
            .collect();
        let data = ContinuousDataset::new(rows).unwrap();
        let u = estimate_p_ustat(
            &data,
            &RegimeSpec::new("B", "E"),
            &RegimeSpec::new("A", "E"),
            &RateSource::Observed,
        )
        .unwrap();
        assert_eq!(u.p_gt, 0.0);
        assert_eq!(u.result.dgor, 0.0);
        assert!(u.result.has_warning("estimate.ties_dominant"));
    }

    #[test]
    fn ustat_complete_separation() {
        let row = |s1: &str, r: bool, y: f64| ContinuousTrajectory {
            patient_id: format!("{s1}{r}"),
            stage1: s1.into(),
            responder: r,
            stage2: if r { s1.into() } else { "E".into() },
            outcome: y,
        };
        let data = ContinuousDataset::new(vec![
            row("B", true, 2.0),
            row("B", false, 2.0),
            row("A", true, 1.0),
            row("A", false, 1.0),
        ])
        .unwrap();
        let rates = RateSource::Fixed(BTreeMap::from([("A".into(), 0.5), ("B".into(), 0.5)]));
        let u = estimate_p_ustat(&data, &RegimeSpec::new("B", "E"), &RegimeSpec::new("A", "E"), &rates)
            .unwrap();
        assert_eq!(u.p_gt, 1.0);
        assert!(u.result.dgor.is_infinite());
    }
}

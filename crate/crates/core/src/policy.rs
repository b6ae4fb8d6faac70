//! Sequential champion/challenger search for the best regime in a finite class.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{DgorError, Result};
use crate::estimation::{estimate_dgor_plugin, fit_mle, FittedSmartModel, RegimeSpec};
use crate::inference::{asymptotic_variance_two_stage, wald_inference, DesignWeights};
use crate::model::SmartDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    Bonferroni,
    None,
}

/// Candidate regimes, tested in the given order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub members: Vec<RegimeSpec>,
    pub alpha_family: f64,
    #[serde(default)]
    pub correction: Correction,
}

impl RegimeClass {
    pub fn new(members: Vec<RegimeSpec>, alpha_family: f64, correction: Correction) -> Result<Self> {
        let class = Self {
            members,
            alpha_family,
            correction,
        };
        class.validate()?;
        Ok(class)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(DgorError::InvalidParameter("regime class is empty".into()));
        }
        let unique: BTreeSet<_> = self.members.iter().collect();
        if unique.len() != self.members.len() {
            return Err(DgorError::InvalidParameter(
                "regime class contains duplicates".into(),
            ));
        }
        if !(self.alpha_family > 0.0 && self.alpha_family < 1.0) {
            return Err(DgorError::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha_family
            )));
        }
        Ok(())
    }

    /// Two-sided level of each pairwise test.
    pub fn per_test_alpha(&self) -> f64 {
        let tests = self.members.len().saturating_sub(1).max(1);
        match self.correction {
            Correction::Bonferroni => self.alpha_family / tests as f64,
            Correction::None => self.alpha_family,
        }
    }
}

/// One champion-versus-challenger test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub champion: RegimeSpec,
    pub challenger: RegimeSpec,
    /// Estimated dGOR of the champion over the challenger.
    pub dgor_hat: f64,
    pub log_dgor_hat: f64,
    pub se_log: f64,
    pub ci: (f64, f64),
    pub dgor_ci: (f64, f64),
    pub level: f64,
    /// The champion is significantly better (`ci.0 > 0`).
    pub significant: bool,
    /// The challenger took over after a non-significant test.
    pub replaced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySearch {
    pub winner: RegimeSpec,
    pub trace: Vec<TestRecord>,
}

/// Runs `M - 1` sequential tests. The champion stays only when its dGOR over
/// the challenger is significantly above 1; otherwise the challenger becomes
/// champion. Every challenger is examined exactly once.
pub fn find_optimal(class: &RegimeClass, fit: &FittedSmartModel) -> Result<PolicySearch> {
    class.validate()?;
    let level = class.per_test_alpha();
    let weights = DesignWeights::from_counts(&fit.arm_counts)?;
    for m in &class.members {
        fit.regime_model(m)?;
    }
    let mut champion = class.members[0].clone();
    let mut trace = Vec::with_capacity(class.members.len() - 1);
    for challenger in &class.members[1..] {
        let result = estimate_dgor_plugin(fit, &champion, challenger)?;
        let eta = result.dgor;
        if !(eta.is_finite() && eta > 0.0) {
            return Err(DgorError::NonFiniteEstimate(eta));
        }
        let mc = fit.regime_model(&champion)?;
        let mh = fit.regime_model(challenger)?;
        let sigma2 = asymptotic_variance_two_stage(&mc, &mh, &weights)?;
        let inf = wald_inference(eta.ln(), sigma2, eta, fit.total_n, level)?;
        let significant = inf.ci.0 > 0.0;
        let record = TestRecord {
            champion: champion.clone(),
            challenger: challenger.clone(),
            dgor_hat: eta,
            log_dgor_hat: inf.log_dgor_hat,
            se_log: inf.se_log,
            ci: inf.ci,
            dgor_ci: inf.dgor_ci,
            level,
            significant,
            replaced: !significant,
        };
        if !significant {
            champion = challenger.clone();
        }
        trace.push(record);
    }
    Ok(PolicySearch {
        winner: champion,
        trace,
    })
}

/// [`find_optimal`] on the counting fit of a dataset.
pub fn find_optimal_in_data(class: &RegimeClass, data: &SmartDataset) -> Result<PolicySearch> {
    find_optimal(class, &fit_mle(data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SmartDesign, Trajectory};

    fn data() -> SmartDataset {
        let mut rows = Vec::new();
        let mut add = |s1: &str, r: bool, s2: &str, ys: &[usize]| {
            for &y in ys {
                rows.push(Trajectory {
                    patient_id: format!("p{}", rows.len()),
                    stage1: s1.into(),
                    responder: r,
                    stage2: s2.into(),
                    outcome: y,
                });
            }
        };
        add("A", true, "A", &[1, 2, 3, 2]);
        add("A", false, "E", &[1, 2, 3, 3]);
        add("A", false, "F", &[1, 2, 3, 1]);
        add("B", true, "B", &[2, 3, 3, 1]);
        add("B", false, "E", &[1, 2, 2, 3]);
        add("B", false, "F", &[2, 3, 1, 1]);
        SmartDataset::new(SmartDesign::uniform(&["A", "B"], &["E", "F"]), rows, 3).unwrap()
    }

    #[test]
    fn singleton_class() {
        let class = RegimeClass::new(vec![RegimeSpec::new("A", "E")], 0.05, Correction::Bonferroni)
            .unwrap();
        let r = find_optimal_in_data(&class, &data()).unwrap();
        assert_eq!(r.winner, RegimeSpec::new("A", "E"));
        assert!(r.trace.is_empty());
    }

    #[test]
    fn identical_regimes_hand_over() {
        let class = RegimeClass {
            members: vec![RegimeSpec::new("A", "E"), RegimeSpec::new("A", "E")],
            alpha_family: 0.05,
            correction: Correction::None,
        };
        assert!(class.validate().is_err());
        // equal data under two labels
        let class = RegimeClass::new(
            vec![RegimeSpec::new("A", "E"), RegimeSpec::new("A", "F")],
            0.05,
            Correction::None,
        )
        .unwrap();
        let r = find_optimal_in_data(&class, &data()).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert!(!r.trace[0].significant);
        assert!(r.trace[0].replaced);
        assert_eq!(r.winner, RegimeSpec::new("A", "F"));
    }

    #[test]
    fn bonferroni_level() {
        let members = vec![
            RegimeSpec::new("A", "E"),
            RegimeSpec::new("A", "F"),
            RegimeSpec::new("B", "E"),
            RegimeSpec::new("B", "F"),
        ];
        let class = RegimeClass::new(members, 0.06, Correction::Bonferroni).unwrap();
        let r = find_optimal_in_data(&class, &data()).unwrap();
        assert_eq!(r.trace.len(), 3);
        assert!(r.trace.iter().all(|t| (t.level - 0.02).abs() < 1e-15));
    }

    #[test]
    fn missing_arm() {
        let class = RegimeClass::new(
            vec![RegimeSpec::new("A", "E"), RegimeSpec::new("A", "Z")],
            0.05,
            Correction::None,
        )
        .unwrap();
        assert!(matches!(
            find_optimal_in_data(&class, &data()),
            Err(DgorError::MissingArm(_))
        ));
    }
}

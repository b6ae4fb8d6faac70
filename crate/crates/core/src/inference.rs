//! Asymptotic variance of the estimated dGOR, Wald tests and sample-size
//! planning.
//!
//! Variances are for `√N (η̂ - η)` with response rates held fixed; the
//! log-scale standard deviation is `σ_η / η`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::engine::{dgor_two_stage, mixture, SharedPathModel};
use crate::error::{DgorError, Result};
use crate::model::{ArmKey, KStageRegimeModel, SmartDesign, Stratum, TwoStageRegimeModel};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Quantile of the standard normal distribution.
///
/// Rational approximation followed by one Halley step against the exact CDF.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DgorError::OutOfRange(p));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    DesignBased,
    ObservedCounts,
}

/// Allocation fraction `ω_a` of each arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignWeights {
    pub weights: BTreeMap<ArmKey, f64>,
    pub source: WeightSource,
}

impl DesignWeights {
    /// `ω_a = N_a / N` from arm counts.
    pub fn from_counts(counts: &BTreeMap<ArmKey, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(DgorError::EmptyDataset);
        }
        let n = total as f64;
        Ok(Self {
            weights: counts
                .iter()
                .map(|(k, &c)| (k.clone(), c as f64 / n))
                .collect(),
            source: WeightSource::ObservedCounts,
        })
    }

    /// Weight of `arm`, failing when it is missing or not positive.
    pub fn get(&self, arm: &ArmKey) -> Result<f64> {
        match self.weights.get(arm) {
            Some(&w) if w > 0.0 => Ok(w),
            _ => Err(DgorError::ZeroWeight(arm.0.clone())),
        }
    }
}

/// Path-probability allocation of a restricted design: the responder arm of
/// `t1` gets `r(t1) γ(t1)`, each non-responder arm `r(t1) (1 - γ(t1)) s(t1, t2)`.
pub fn design_weights(
    design: &SmartDesign,
    response_rates: &BTreeMap<String, f64>,
) -> Result<DesignWeights> {
    design.validate()?;
    let mut weights = BTreeMap::new();
    for arm in design.arms() {
        let gamma = *response_rates
            .get(&arm.stage1)
            .ok_or_else(|| DgorError::MissingRate(arm.stage1.clone()))?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(DgorError::InvalidRate(gamma));
        }
        let r = design.stage1_prob(&arm.stage1);
        let w = if arm.responder {
            r * gamma
        } else {
            r * (1.0 - gamma) * design.stage2_prob(&arm.stage1, &arm.stage2)
        };
        if w <= 0.0 {
            return Err(DgorError::UnreachableArm(arm.to_string()));
        }
        weights.insert(arm.key(), w);
    }
    Ok(DesignWeights {
        weights,
        source: WeightSource::DesignBased,
    })
}

/// Design weights for just the arms of two regimes, assuming a two-arm first
/// stage and two non-responder options per arm, both uniformly randomized.
pub fn planning_weights(g: &TwoStageRegimeModel, gprime: &TwoStageRegimeModel) -> DesignWeights {
    let mut weights = BTreeMap::new();
    for m in [g, gprime] {
        weights.insert(m.responder_arm().key(), 0.5 * m.response_rate);
        weights.insert(
            m.nonresponder_arm().key(),
            0.5 * (1.0 - m.response_rate) * 0.5,
        );
    }
    DesignWeights {
        weights,
        source: WeightSource::DesignBased,
    }
}

/// Per-cell derivatives of the concordance (`nu`) and discordance (`de`)
/// probabilities with respect to one arm's pmf.
struct ArmGradient<'a> {
    key: ArmKey,
    pmf: &'a [f64],
    nu: Vec<f64>,
    de: Vec<f64>,
}

/// `Σ_a (1/ω_a) Var_a(∂Nu - η ∂De) / De²`.
fn delta_method_variance(
    arms: &[ArmGradient<'_>],
    p_gt: f64,
    p_lt: f64,
    weights: &DesignWeights,
) -> Result<f64> {
    if p_lt <= 0.0 {
        return Err(DgorError::DegenerateDenominator);
    }
    let eta = p_gt / p_lt;
    let mut total = 0.0;
    for arm in arms {
        let omega = weights.get(&arm.key)?;
        let (mut first, mut second) = (0.0, 0.0);
        for ((p, dn), dd) in arm.pmf.iter().zip(&arm.nu).zip(&arm.de) {
            let d = dn - eta * dd;
            first += p * d;
            second += p * d * d;
        }
        total += (second - first * first) / omega;
    }
    Ok(total / (p_lt * p_lt))
}

/// `P(Y < b)` and `P(Y > b)` for every category `b` of a pmf.
fn below_above(pmf: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let j = pmf.len();
    let mut below = vec![0.0; j];
    let mut above = vec![0.0; j];
    for b in 1..j {
        below[b] = below[b - 1] + pmf[b - 1];
    }
    for b in (0..j - 1).rev() {
        above[b] = above[b + 1] + pmf[b + 1];
    }
    (below, above)
}

fn scaled(w: f64, v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| w * x).collect()
}

/// Variance of `√N (η̂ - η)` for two regimes with different stage-1
/// treatments (four distinct arms).
pub fn asymptotic_variance_dp(
    g: &TwoStageRegimeModel,
    gprime: &TwoStageRegimeModel,
    weights: &DesignWeights,
) -> Result<f64> {
    if g.stage1 == gprime.stage1 {
        return Err(DgorError::InvalidParameter(format!(
            "regimes share stage-1 treatment {}; use the shared-path variance",
            g.stage1
        )));
    }
    let r = dgor_two_stage(g, gprime)?;
    let j = g.categories();
    let mix_g = mixture(&g.strata(), j);
    let mix_gp = mixture(&gprime.strata(), j);
    let (gp_below, gp_above) = below_above(&mix_gp);
    let (g_below, g_above) = below_above(&mix_g);
    let (gb, ga) = (g.response_rate, gprime.response_rate);

    let arms = [
        ArmGradient {
            key: g.responder_arm().key(),
            pmf: g.responder_pmf.probs(),
            nu: scaled(gb, &gp_below),
            de: scaled(gb, &gp_above),
        },
        ArmGradient {
            key: g.nonresponder_arm().key(),
            pmf: g.nonresponder_pmf.probs(),
            nu: scaled(1.0 - gb, &gp_below),
            de: scaled(1.0 - gb, &gp_above),
        },
        ArmGradient {
            key: gprime.responder_arm().key(),
            pmf: gprime.responder_pmf.probs(),
            nu: scaled(ga, &g_above),
            de: scaled(ga, &g_below),
        },
        ArmGradient {
            key: gprime.nonresponder_arm().key(),
            pmf: gprime.nonresponder_pmf.probs(),
            nu: scaled(1.0 - ga, &g_above),
            de: scaled(1.0 - ga, &g_below),
        },
    ];
    delta_method_variance(&arms, r.p_gt, r.p_lt, weights)
}

/// Variance of `√N (η̂ - η)` for two regimes sharing their stage-1 treatment.
/// The shared responder arm accumulates its derivative from both regimes.
pub fn asymptotic_variance_sp(model: &SharedPathModel, weights: &DesignWeights) -> Result<f64> {
    let (g, gprime) = model.regimes()?;
    if g.stage2 == gprime.stage2 {
        return Err(DgorError::InvalidParameter(format!(
            "both regimes give non-responders {}",
            g.stage2
        )));
    }
    let r = dgor_two_stage(&g, &gprime)?;
    let j = g.categories();
    let gamma = model.response_rate;
    let mix_g = mixture(&g.strata(), j);
    let mix_gp = mixture(&gprime.strata(), j);
    let (gp_below, gp_above) = below_above(&mix_gp);
    let (g_below, g_above) = below_above(&mix_g);

    let shared_nu: Vec<f64> = gp_below
        .iter()
        .zip(&g_above)
        .map(|(a, b)| gamma * (a + b))
        .collect();
    let shared_de: Vec<f64> = gp_above
        .iter()
        .zip(&g_below)
        .map(|(a, b)| gamma * (a + b))
        .collect();
    let arms = [
        ArmGradient {
            key: g.responder_arm().key(),
            pmf: model.responder_pmf.probs(),
            nu: shared_nu,
            de: shared_de,
        },
        ArmGradient {
            key: g.nonresponder_arm().key(),
            pmf: g.nonresponder_pmf.probs(),
            nu: scaled(1.0 - gamma, &gp_below),
            de: scaled(1.0 - gamma, &gp_above),
        },
        ArmGradient {
            key: gprime.nonresponder_arm().key(),
            pmf: gprime.nonresponder_pmf.probs(),
            nu: scaled(1.0 - gamma, &g_above),
            de: scaled(1.0 - gamma, &g_below),
        },
    ];
    delta_method_variance(&arms, r.p_gt, r.p_lt, weights)
}

/// Variance for arbitrary keyed strata. Strata that share an arm key are
/// pooled into one arm, so shared responders are handled automatically.
pub fn asymptotic_variance_keyed(
    g: &[(ArmKey, Stratum<'_>)],
    gprime: &[(ArmKey, Stratum<'_>)],
    weights: &DesignWeights,
) -> Result<f64> {
    let j = match (g.first(), gprime.first()) {
        (Some(a), Some(b)) => {
            let (left, right) = (a.1.pmf.categories(), b.1.pmf.categories());
            if left != right {
                return Err(DgorError::MismatchedJ { left, right });
            }
            left
        }
        _ => return Err(DgorError::InvalidParameter("regime without strata".into())),
    };
    let mix_g = mixture(&g.iter().map(|(_, s)| *s).collect::<Vec<_>>(), j);
    let mix_gp = mixture(&gprime.iter().map(|(_, s)| *s).collect::<Vec<_>>(), j);
    let (gt, lt, _) = crate::engine::compare_pmfs(&mix_g, &mix_gp);
    let (gp_below, gp_above) = below_above(&mix_gp);
    let (g_below, g_above) = below_above(&mix_g);

    let contributions = g
        .iter()
        .map(|(k, s)| (k, s, &gp_below, &gp_above))
        .chain(gprime.iter().map(|(k, s)| (k, s, &g_above, &g_below)));
    let mut arms: Vec<ArmGradient<'_>> = Vec::new();
    for (key, s, nu, de) in contributions {
        let idx = match arms.iter().position(|a| &a.key == key) {
            Some(i) => i,
            None => {
                arms.push(ArmGradient {
                    key: key.clone(),
                    pmf: s.pmf.probs(),
                    nu: vec![0.0; j],
                    de: vec![0.0; j],
                });
                arms.len() - 1
            }
        };
        let arm = &mut arms[idx];
        for b in 0..j {
            arm.nu[b] += s.weight * nu[b];
            arm.de[b] += s.weight * de[b];
        }
    }
    // strata with zero path probability carry no information
    arms.retain(|a| a.nu.iter().chain(&a.de).any(|&x| x != 0.0));
    delta_method_variance(&arms, gt, lt, weights)
}

/// Variance for two-stage regimes of either kind, chosen by arm identity.
pub fn asymptotic_variance_two_stage(
    g: &TwoStageRegimeModel,
    gprime: &TwoStageRegimeModel,
    weights: &DesignWeights,
) -> Result<f64> {
    if g.categories() != gprime.categories() {
        return Err(DgorError::MismatchedJ {
            left: g.categories(),
            right: gprime.categories(),
        });
    }
    asymptotic_variance_keyed(&g.keyed_strata(), &gprime.keyed_strata(), weights)
}

/// Variance of `√N (η̂ - η)` for K-stage regimes.
pub fn asymptotic_variance_kstage(
    g: &KStageRegimeModel,
    gprime: &KStageRegimeModel,
    weights: &DesignWeights,
) -> Result<f64> {
    g.validate()?;
    gprime.validate()?;
    asymptotic_variance_keyed(&g.keyed_strata(), &gprime.keyed_strata(), weights)
}

/// Wald test of `log η = 0` with a log-scale confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub log_dgor_hat: f64,
    pub se_log: f64,
    pub z_stat: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub ci: (f64, f64),
    pub dgor_ci: (f64, f64),
    pub reject: bool,
}

/// Wald inference from the η-scale variance `sigma2_eta` of `√N (η̂ - η)`.
pub fn wald_inference(
    log_dgor_hat: f64,
    sigma2_eta: f64,
    eta_hat: f64,
    n: u64,
    alpha: f64,
) -> Result<InferenceResult> {
    if !(eta_hat.is_finite() && eta_hat > 0.0) {
        return Err(DgorError::NonFiniteEstimate(eta_hat));
    }
    if n == 0 {
        return Err(DgorError::InvalidParameter("n must be positive".into()));
    }
    if !(sigma2_eta.is_finite() && sigma2_eta > 0.0) {
        return Err(DgorError::InvalidParameter(format!(
            "variance must be positive and finite, got {sigma2_eta}"
        )));
    }
    let se_log = sigma2_eta.sqrt() / eta_hat / (n as f64).sqrt();
    wald_from_se(log_dgor_hat, se_log, alpha)
}

/// Wald inference from a log-scale standard error.
pub fn wald_from_se(log_dgor_hat: f64, se_log: f64, alpha: f64) -> Result<InferenceResult> {
    if !log_dgor_hat.is_finite() {
        return Err(DgorError::NonFiniteEstimate(log_dgor_hat));
    }
    if !(se_log.is_finite() && se_log > 0.0) {
        return Err(DgorError::InvalidParameter(format!(
            "standard error must be positive and finite, got {se_log}"
        )));
    }
    let z_crit = critical_value(alpha)?;
    let z_stat = log_dgor_hat / se_log;
    let ci = (log_dgor_hat - z_crit * se_log, log_dgor_hat + z_crit * se_log);
    Ok(InferenceResult {
        log_dgor_hat,
        se_log,
        z_stat,
        p_value: two_sided_p_value(z_stat),
        alpha,
        ci,
        dgor_ci: (ci.0.exp(), ci.1.exp()),
        reject: z_stat.abs() > z_crit,
    })
}

/// `z_{1 - α/2}`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DgorError::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    inverse_normal_cdf(1.0 - alpha / 2.0)
}

/// Total trial size `ceil((z_{1-α/2} + z_{power})² / ES²)`.
pub fn sample_size(effect_size: f64, alpha: f64, power: f64) -> Result<u64> {
    if !effect_size.is_finite() {
        return Err(DgorError::InvalidParameter(format!(
            "effect size must be finite, got {effect_size}"
        )));
    }
    if effect_size == 0.0 {
        return Err(DgorError::ZeroEffect);
    }
    if !(power > 0.0 && power < 1.0) {
        return Err(DgorError::InvalidParameter(format!(
            "power must lie in (0, 1), got {power}"
        )));
    }
    let z = critical_value(alpha)? + inverse_normal_cdf(power)?;
    Ok((z * z / (effect_size * effect_size)).ceil() as u64)
}

/// Intermediate quantities of a model-based sample-size calculation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningResult {
    pub eta: f64,
    pub log_eta: f64,
    pub sigma2_eta: f64,
    pub sigma_log: f64,
    pub effect_size: f64,
    pub n: u64,
}

/// Sample size from full regime models. `weights` defaults to
/// [`planning_weights`].
pub fn sample_size_from_models(
    g: &TwoStageRegimeModel,
    gprime: &TwoStageRegimeModel,
    shared: bool,
    alpha: f64,
    power: f64,
    weights: Option<&DesignWeights>,
) -> Result<PlanningResult> {
    let default = planning_weights(g, gprime);
    let weights = weights.unwrap_or(&default);
    let eta = dgor_two_stage(g, gprime)?.dgor;
    if !eta.is_finite() {
        return Err(DgorError::DegenerateDenominator);
    }
    if eta <= 0.0 {
        return Err(DgorError::UndefinedLog(eta));
    }
    if (eta - 1.0).abs() < 1e-12 {
        return Err(DgorError::ZeroEffect);
    }
    let sigma2_eta = if shared {
        let shared_model = shared_from_regimes(g, gprime)?;
        asymptotic_variance_sp(&shared_model, weights)?
    } else {
        asymptotic_variance_dp(g, gprime, weights)?
    };
    let sigma_log = sigma2_eta.sqrt() / eta;
    let effect_size = eta.ln() / sigma_log;
    Ok(PlanningResult {
        eta,
        log_eta: eta.ln(),
        sigma2_eta,
        sigma_log,
        effect_size,
        n: sample_size(effect_size, alpha, power)?,
    })
}

/// Reassembles a shared-path pair, checking that the shared parts agree.
pub fn shared_from_regimes(
    g: &TwoStageRegimeModel,
    gprime: &TwoStageRegimeModel,
) -> Result<SharedPathModel> {
    if g.stage1 != gprime.stage1 {
        return Err(DgorError::InvalidParameter(
            "shared-path regimes must start with the same treatment".into(),
        ));
    }
    if g.response_rate != gprime.response_rate
        || !g.responder_pmf.approx_eq(&gprime.responder_pmf, 1e-12)
    {
        return Err(DgorError::InvalidParameter(
            "shared-path regimes must share the response rate and responder pmf".into(),
        ));
    }
    Ok(SharedPathModel {
        stage1: g.stage1.clone(),
        response_rate: g.response_rate,
        responder_pmf: g.responder_pmf.clone(),
        stage2_gprime: gprime.stage2.clone(),
        nonresponder_gprime: gprime.nonresponder_pmf.clone(),
        stage2_g: g.stage2.clone(),
        nonresponder_g: g.nonresponder_pmf.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_pmf;

    fn regime(s1: &str, s2: &str, g: f64, r: &[f64], n: &[f64]) -> TwoStageRegimeModel {
        TwoStageRegimeModel::from_raw(s1, s2, g, r, n).unwrap()
    }

    #[test]
    fn quantiles() {
        assert!((inverse_normal_cdf(0.975).unwrap() - 1.959_964).abs() < 1e-5);
        assert!(inverse_normal_cdf(0.5).unwrap().abs() < 1e-15);
        assert!((inverse_normal_cdf(0.8).unwrap() - 0.841_621).abs() < 1e-5);
        for p in [1e-10, 1e-4, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-6] {
            let z = inverse_normal_cdf(p).unwrap();
            assert!((normal_cdf(z) - p).abs() < 1e-12, "p = {p}");
        }
        assert_eq!(inverse_normal_cdf(0.0), Err(DgorError::OutOfRange(0.0)));
        assert_eq!(inverse_normal_cdf(1.0), Err(DgorError::OutOfRange(1.0)));
    }

    #[test]
    fn uniform_design_weights() {
        let design = SmartDesign::uniform(&["A", "B"], &["E", "F"]);
        let rates = BTreeMap::from([("A".to_string(), 0.3), ("B".to_string(), 0.4)]);
        let w = design_weights(&design, &rates).unwrap();
        let get = |s: &str| w.weights[&ArmKey(s.to_string())];
        assert!((get("A,A(R)") - 0.15).abs() < 1e-15);
        assert!((get("A,E") - 0.175).abs() < 1e-15);
        assert!((get("A,F") - 0.175).abs() < 1e-15);
        assert!((get("B,B(R)") - 0.20).abs() < 1e-15);
        assert!((get("B,E") - 0.15).abs() < 1e-15);
        assert!((get("B,F") - 0.15).abs() < 1e-15);
        assert!((w.weights.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_design_weights() {
        let design = SmartDesign::uniform(&["A", "B"], &["E", "F"]);
        let rates = BTreeMap::from([("A".to_string(), 1.0), ("B".to_string(), 0.4)]);
        assert!(matches!(
            design_weights(&design, &rates),
            Err(DgorError::UnreachableArm(_))
        ));
        let rates = BTreeMap::from([("A".to_string(), 0.3)]);
        assert_eq!(
            design_weights(&design, &rates),
            Err(DgorError::MissingRate("B".into()))
        );
    }

    #[test]
    fn observed_weights() {
        let keys = ["A,A(R)", "A,E", "A,F", "B,B(R)", "B,E", "B,F"];
        let counts: BTreeMap<ArmKey, u64> = keys
            .iter()
            .zip([30, 35, 35, 40, 30, 30])
            .map(|(k, c)| (ArmKey(k.to_string()), c))
            .collect();
        let w = DesignWeights::from_counts(&counts).unwrap();
        assert_eq!(w.source, WeightSource::ObservedCounts);
        assert_eq!(w.weights[&ArmKey("A,E".into())], 35.0 / 200.0);
        assert_eq!(w.weights[&ArmKey("B,B(R)".into())], 40.0 / 200.0);
    }

    #[test]
    fn null_comparison_has_positive_variance() {
        let g = regime("B", "E", 0.3, &[0.2, 0.5, 0.3], &[0.4, 0.4, 0.2]);
        let gp = regime("A", "E", 0.3, &[0.2, 0.5, 0.3], &[0.4, 0.4, 0.2]);
        let w = planning_weights(&g, &gp);
        let v = asymptotic_variance_dp(&g, &gp, &w).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert_eq!(
            sample_size_from_models(&g, &gp, false, 0.05, 0.8, None),
            Err(DgorError::ZeroEffect)
        );
    }

    #[test]
    fn two_stage_variance_routes_agree() {
        let g = regime("B", "E", 0.4, &[0.31, 0.50, 0.19], &[0.14, 0.47, 0.39]);
        let gp = regime("A", "E", 0.3, &[0.23, 0.51, 0.26], &[0.50, 0.41, 0.09]);
        let w = planning_weights(&g, &gp);
        let dp = asymptotic_variance_dp(&g, &gp, &w).unwrap();
        let keyed = asymptotic_variance_two_stage(&g, &gp, &w).unwrap();
        let k = asymptotic_variance_kstage(&g.to_kstage(), &gp.to_kstage(), &w).unwrap();
        assert!((dp - keyed).abs() < 1e-10 * dp);
        assert!((dp - k).abs() < 1e-10 * dp);

        let sp = SharedPathModel::new(
            0.3,
            validate_pmf(&[0.24, 0.52, 0.24]).unwrap(),
            validate_pmf(&[0.63, 0.33, 0.04]).unwrap(),
            validate_pmf(&[0.38, 0.49, 0.13]).unwrap(),
        );
        let (sg, sgp) = sp.regimes().unwrap();
        let w = planning_weights(&sg, &sgp);
        let a = asymptotic_variance_sp(&sp, &w).unwrap();
        let b = asymptotic_variance_two_stage(&sg, &sgp, &w).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn zero_weight_is_rejected() {
        let g = regime("B", "E", 0.4, &[0.31, 0.50, 0.19], &[0.14, 0.47, 0.39]);
        let gp = regime("A", "E", 0.3, &[0.23, 0.51, 0.26], &[0.50, 0.41, 0.09]);
        let mut w = planning_weights(&g, &gp);
        w.weights.remove(&ArmKey("A,E".into()));
        assert_eq!(
            asymptotic_variance_dp(&g, &gp, &w),
            Err(DgorError::ZeroWeight("A,E".into()))
        );
    }

    #[test]
    fn wald_examples() {
        let r = wald_from_se(0.36, 0.153, 0.05).unwrap();
        assert!((r.ci.0 - 0.06).abs() < 0.005 && (r.ci.1 - 0.66).abs() < 0.005);
        assert!(r.reject);
        let r = wald_from_se(-0.04, 0.1327, 0.05).unwrap();
        assert!((r.ci.0 + 0.30).abs() < 0.005 && (r.ci.1 - 0.22).abs() < 0.005);
        assert!(!r.reject);
        let r = wald_from_se(0.0, 0.2, 0.05).unwrap();
        assert_eq!(r.z_stat, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-15);
        assert!((r.ci.0 + r.ci.1).abs() < 1e-15);
        assert!(matches!(
            wald_inference(0.1, 1.0, f64::INFINITY, 10, 0.05),
            Err(DgorError::NonFiniteEstimate(_))
        ));
    }

    #[test]
    fn delta_method_identity() {
        let r = wald_inference(0.5, 4.0, 1.6487, 100, 0.05).unwrap();
        assert!((r.se_log * 1.6487 * 10.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sample_sizes() {
        assert_eq!(sample_size(0.219, 0.05, 0.80).unwrap(), 164);
        assert_eq!(sample_size(1.0, 0.05, 0.80).unwrap(), 8);
        assert_eq!(sample_size(0.161, 0.05, 0.80).unwrap(), 303);
        assert_eq!(sample_size(-0.219, 0.05, 0.80).unwrap(), 164);
        assert_eq!(sample_size(0.0, 0.05, 0.80), Err(DgorError::ZeroEffect));
    }
}

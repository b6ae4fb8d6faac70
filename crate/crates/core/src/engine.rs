//! Exact dGOR computation for embedded regimes.
//!
//! For regimes `g` and `g'` the dGOR is `P(Y_g > Y_g') / P(Y_g < Y_g')`, where each
//! potential outcome is a mixture over the regime's terminal strata. Ties count
//! toward neither side and are reported separately.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{DgorError, Result};
use crate::model::{
    small_cell_flags, KStageRegimeModel, OrdinalPmf, Stratum, TwoStageRegimeModel,
    SMALL_CELL_THRESHOLD,
};

/// Tolerance used when comparing pmfs or deciding the sign of a log dGOR.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// A non-fatal diagnostic attached to a result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn small_cell(arm: &str, categories: &[usize]) -> Self {
        let list = categories
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        Self::new(
            "small_cell",
            format!("arm {arm} has categories below {SMALL_CELL_THRESHOLD}: {list}"),
        )
    }
}

/// Concordance, discordance and tie probabilities plus the resulting dGOR.
#[derive(Debug, Clone, PartialEq)]
pub struct DgorResult {
    /// `P(Y_g > Y_g')`
    pub p_gt: f64,
    /// `P(Y_g < Y_g')`
    pub p_lt: f64,
    /// `P(Y_g = Y_g')`
    pub p_eq: f64,
    /// `p_gt / p_lt`, `+inf` when `p_lt = 0`.
    pub dgor: f64,
    pub warnings: Vec<Warning>,
}

impl DgorResult {
    /// Builds a result from the three probabilities, applying the degenerate
    /// denominator rules.
    pub fn from_probabilities(p_gt: f64, p_lt: f64, p_eq: f64) -> Self {
        let mut warnings = Vec::new();
        let dgor = if p_lt > 0.0 {
            p_gt / p_lt
        } else if p_gt > 0.0 {
            warnings.push(Warning::new(
                DgorError::DegenerateDenominator.code(),
                DgorError::DegenerateDenominator.to_string(),
            ));
            f64::INFINITY
        } else {
            warnings.push(Warning::new(
                "dgor.all_ties",
                "every outcome pair is tied; the dGOR is taken as 1",
            ));
            1.0
        };
        Self {
            p_gt,
            p_lt,
            p_eq,
            dgor,
            warnings,
        }
    }

    pub fn log_dgor(&self) -> Result<f64> {
        if self.dgor.is_finite() && self.dgor > 0.0 {
            Ok(self.dgor.ln())
        } else {
            Err(DgorError::UndefinedLog(self.dgor))
        }
    }

    pub fn has_warning(&self, code: &str) -> bool {
        self.warnings.iter().any(|w| w.code == code)
    }
}

// Non-finite values have no JSON representation; they are written as null.
impl Serialize for DgorResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let finite = |v: f64| v.is_finite().then_some(v);
        let mut s = serializer.serialize_struct("DgorResult", 6)?;
        s.serialize_field("p_gt", &self.p_gt)?;
        s.serialize_field("p_lt", &self.p_lt)?;
        s.serialize_field("p_eq", &self.p_eq)?;
        s.serialize_field("dgor", &finite(self.dgor))?;
        s.serialize_field("log_dgor", &self.log_dgor().ok())?;
        s.serialize_field("warnings", &self.warnings)?;
        s.end()
    }
}

fn check_same_j(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(DgorError::MismatchedJ { left, right });
    }
    Ok(())
}

fn small_cell_warnings<'a>(
    strata: impl IntoIterator<Item = (String, Stratum<'a>)>,
) -> Vec<Warning> {
    let mut out: Vec<Warning> = Vec::new();
    for (name, stratum) in strata {
        if stratum.weight <= 0.0 {
            continue;
        }
        let flags = small_cell_flags(stratum.pmf, SMALL_CELL_THRESHOLD);
        let warning = Warning::small_cell(&name, &flags);
        if !flags.is_empty() && !out.contains(&warning) {
            out.push(warning);
        }
    }
    out
}

fn two_stage_warnings(g: &TwoStageRegimeModel, gp: &TwoStageRegimeModel) -> Vec<Warning> {
    fn named(m: &TwoStageRegimeModel) -> [(String, Stratum<'_>); 2] {
        let [r, n] = m.strata();
        [
            (m.responder_arm().to_string(), r),
            (m.nonresponder_arm().to_string(), n),
        ]
    }
    let mut all = named(g).to_vec();
    all.extend(named(gp));
    small_cell_warnings(all)
}

/// Stratified sum: every pair of terminal strata, every pair of categories.
fn stratified_sum(g: &[Stratum<'_>], gp: &[Stratum<'_>]) -> (f64, f64, f64) {
    let (mut gt, mut lt, mut eq) = (0.0, 0.0, 0.0);
    for sg in g {
        for sp in gp {
            let w = sg.weight * sp.weight;
            if w == 0.0 {
                continue;
            }
            let (mut above, mut below, mut tied) = (0.0, 0.0, 0.0);
            for (u, pu) in sp.pmf.probs().iter().enumerate() {
                for (s, ps) in sg.pmf.probs().iter().enumerate() {
                    let term = pu * ps;
                    match u.cmp(&s) {
                        std::cmp::Ordering::Less => above += term,
                        std::cmp::Ordering::Greater => below += term,
                        std::cmp::Ordering::Equal => tied += term,
                    }
                }
            }
            gt += w * above;
            lt += w * below;
            eq += w * tied;
        }
    }
    (gt, lt, eq)
}

/// Strict upper and lower triangle sums and trace of the outer product
/// `a b^T` (rows indexed by `a`).
pub fn outer_triangles(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let j = a.len();
    let mut outer = vec![0.0; j * b.len()];
    for (r, ar) in a.iter().enumerate() {
        for (c, bc) in b.iter().enumerate() {
            outer[r * b.len() + c] = ar * bc;
        }
    }
    let mut upper = 0.0;
    let mut lower = 0.0;
    let mut diag = 0.0;
    for r in 0..j {
        for c in 0..b.len() {
            let v = outer[r * b.len() + c];
            if c > r {
                upper += v;
            } else if c < r {
                lower += v;
            } else {
                diag += v;
            }
        }
    }
    (upper, lower, diag)
}

/// Distinct-path (and, via identical shared components, shared-path) dGOR of
/// regime `g` over regime `gprime`.
pub fn dgor_two_stage(g: &TwoStageRegimeModel, gprime: &TwoStageRegimeModel) -> Result<DgorResult> {
    check_same_j(g.categories(), gprime.categories())?;
    let (gt, lt, eq) = stratified_sum(&g.strata(), &gprime.strata());
    let mut result = DgorResult::from_probabilities(gt, lt, eq);
    result.warnings.extend(two_stage_warnings(g, gprime));
    Ok(result)
}

/// Same quantity as [`dgor_two_stage`] computed from the J x J outer products
/// of each stratum pair (rows = `gprime` categories, columns = `g` categories).
pub fn dgor_matrix_form(
    g: &TwoStageRegimeModel,
    gprime: &TwoStageRegimeModel,
) -> Result<DgorResult> {
    check_same_j(g.categories(), gprime.categories())?;
    let (mut gt, mut lt, mut eq) = (0.0, 0.0, 0.0);
    for sp in gprime.strata() {
        for sg in g.strata() {
            let (upper, lower, diag) = outer_triangles(sp.pmf.probs(), sg.pmf.probs());
            let w = sp.weight * sg.weight;
            gt += w * upper;
            lt += w * lower;
            eq += w * diag;
        }
    }
    let mut result = DgorResult::from_probabilities(gt, lt, eq);
    result.warnings.extend(two_stage_warnings(g, gprime));
    Ok(result)
}

/// Two regimes sharing their stage-1 treatment and therefore their responders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedPathModel {
    pub stage1: String,
    pub response_rate: f64,
    pub responder_pmf: OrdinalPmf,
    /// Non-responder treatment and pmf under the reference regime `g'`.
    pub stage2_gprime: String,
    pub nonresponder_gprime: OrdinalPmf,
    /// Non-responder treatment and pmf under the compared regime `g`.
    pub stage2_g: String,
    pub nonresponder_g: OrdinalPmf,
}

impl SharedPathModel {
    /// Shared-path pair with default labels `A`, `E` (for `g'`) and `F` (for `g`).
    pub fn new(
        response_rate: f64,
        responder_pmf: OrdinalPmf,
        nonresponder_gprime: OrdinalPmf,
        nonresponder_g: OrdinalPmf,
    ) -> Self {
        Self {
            stage1: "A".into(),
            response_rate,
            responder_pmf,
            stage2_gprime: "E".into(),
            nonresponder_gprime,
            stage2_g: "F".into(),
            nonresponder_g,
        }
    }

    /// Returns `(g, g')`.
    pub fn regimes(&self) -> Result<(TwoStageRegimeModel, TwoStageRegimeModel)> {
        let g = TwoStageRegimeModel::new(
            self.stage1.clone(),
            self.stage2_g.clone(),
            self.response_rate,
            self.responder_pmf.clone(),
            self.nonresponder_g.clone(),
        )?;
        let gp = TwoStageRegimeModel::new(
            self.stage1.clone(),
            self.stage2_gprime.clone(),
            self.response_rate,
            self.responder_pmf.clone(),
            self.nonresponder_gprime.clone(),
        )?;
        Ok((g, gp))
    }
}

/// Shared-path dGOR: the distinct-path computation applied to regimes that
/// share the response rate and the responder pmf.
pub fn dgor_shared_path(model: &SharedPathModel) -> Result<DgorResult> {
    let (g, gp) = model.regimes()?;
    dgor_two_stage(&g, &gp)
}

/// Binary-outcome dynamic odds ratio.
pub fn dor_binary(g: &TwoStageRegimeModel, gprime: &TwoStageRegimeModel) -> Result<DgorResult> {
    for j in [g.categories(), gprime.categories()] {
        if j != 2 {
            return Err(DgorError::NotBinary(j));
        }
    }
    // P(Y = 2) under each regime
    let success = |m: &TwoStageRegimeModel| {
        m.response_rate * m.responder_pmf.prob(2)
            + (1.0 - m.response_rate) * m.nonresponder_pmf.prob(2)
    };
    let (sg, sp) = (success(g), success(gprime));
    let p_gt = sg * (1.0 - sp);
    let p_lt = (1.0 - sg) * sp;
    let p_eq = sg * sp + (1.0 - sg) * (1.0 - sp);
    let mut result = DgorResult::from_probabilities(p_gt, p_lt, p_eq);
    result.warnings.extend(two_stage_warnings(g, gprime));
    Ok(result)
}

/// Mixture pmf of a list of strata.
pub fn mixture(strata: &[Stratum<'_>], categories: usize) -> Vec<f64> {
    let mut out = vec![0.0; categories];
    for s in strata {
        for (o, p) in out.iter_mut().zip(s.pmf.probs()) {
            *o += s.weight * p;
        }
    }
    out
}

/// `(P(X > Y), P(X < Y), P(X = Y))` for independent `X ~ x`, `Y ~ y`.
pub fn compare_pmfs(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut below = 0.0; // P(Y < current category)
    let (mut gt, mut eq) = (0.0, 0.0);
    for (px, py) in x.iter().zip(y) {
        gt += px * below;
        eq += px * py;
        below += py;
    }
    let lt = x
        .iter()
        .zip(y)
        .rev()
        .scan(0.0, |above, (px, py)| {
            let term = px * *above;
            *above += py;
            Some(term)
        })
        .sum();
    (gt, lt, eq)
}

/// K-stage dGOR. The two regimes may have different numbers of stages.
pub fn dgor_kstage(g: &KStageRegimeModel, gprime: &KStageRegimeModel) -> Result<DgorResult> {
    g.validate()?;
    gprime.validate()?;
    check_same_j(g.categories(), gprime.categories())?;
    let j = g.categories();
    let mg = mixture(&g.strata(), j);
    let mp = mixture(&gprime.strata(), j);
    let (gt, lt, eq) = compare_pmfs(&mg, &mp);
    let mut result = DgorResult::from_probabilities(gt, lt, eq);
    let keyed = g
        .keyed_strata()
        .into_iter()
        .chain(gprime.keyed_strata())
        .map(|(k, s)| (k.0, s));
    result.warnings.extend(small_cell_warnings(keyed));
    Ok(result)
}

/// Which closed-form sign rule applies to a pair of two-stage regimes.
///
/// With `g' = (A, ...)` and `g = (B, ...)`:
/// * equal responder pmfs and equal non-responder pmfs give
///   `P(Y_g > Y_g') - P(Y_g < Y_g') = d (γ_A - γ_B)`,
/// * crossed pmfs (`Π_AA = Π_BE`, `Π_AE = Π_BB`) give `d (γ_A + γ_B - 1)`,
///
/// where `d = P(P < Q) - P(P > Q)` for `P ~ Π_AA` and `Q` the other pmf.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub equal_arms: bool,
    pub crossed_arms: bool,
    /// `d` for whichever condition holds.
    pub triangle_difference: Option<f64>,
    /// Sign of log dGOR implied by the closed form (-1, 0, 1).
    pub implied_sign: Option<i8>,
    pub computed_sign: i8,
}

fn sign(x: f64) -> i8 {
    if x > EXACT_TOLERANCE {
        1
    } else if x < -EXACT_TOLERANCE {
        -1
    } else {
        0
    }
}

pub fn theorem_conditions(
    g: &TwoStageRegimeModel,
    gprime: &TwoStageRegimeModel,
) -> Result<TheoremReport> {
    let result = dgor_two_stage(g, gprime)?;
    let computed_sign = sign(result.p_gt - result.p_lt);
    let (aa, ae) = (&gprime.responder_pmf, &gprime.nonresponder_pmf);
    let (bb, be) = (&g.responder_pmf, &g.nonresponder_pmf);
    let (gamma_a, gamma_b) = (gprime.response_rate, g.response_rate);

    let equal_arms = aa.approx_eq(bb, EXACT_TOLERANCE) && ae.approx_eq(be, EXACT_TOLERANCE);
    let crossed_arms = aa.approx_eq(be, EXACT_TOLERANCE) && ae.approx_eq(bb, EXACT_TOLERANCE);
    let difference = |q: &OrdinalPmf| {
        let (upper, lower, _) = outer_triangles(aa.probs(), q.probs());
        upper - lower
    };
    let (triangle_difference, implied_sign) = if equal_arms {
        let d = difference(be);
        (Some(d), Some(sign(d) * sign(gamma_a - gamma_b)))
    } else if crossed_arms {
        let d = difference(bb);
        (Some(d), Some(sign(d) * sign(gamma_a + gamma_b - 1.0)))
    } else {
        (None, None)
    };
    Ok(TheoremReport {
        equal_arms,
        crossed_arms,
        triangle_difference,
        implied_sign,
        computed_sign,
    })
}

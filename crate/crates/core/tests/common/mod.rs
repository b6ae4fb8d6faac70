#![allow(dead_code)]

use dgor_core::{OrdinalPmf, SharedPathModel, TwoStageRegimeModel};
use rand::Rng;

/// One row of the distinct-path simulation table: `gamma_a`, `gamma_b` and the
/// arm pmfs `AA`, `AE`, `BB`, `BE`, plus the printed summary columns.
#[derive(Debug, Clone, Copy)]
pub struct DistinctRow {
    pub label: &'static str,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub aa: [f64; 3],
    pub ae: [f64; 3],
    pub bb: [f64; 3],
    pub be: [f64; 3],
    pub printed: Printed,
}

/// One row of the shared-path simulation table: common `gamma`, the shared
/// responder pmf `AA` and non-responder pmfs `AE` (g') and `AF` (g).
#[derive(Debug, Clone, Copy)]
pub struct SharedRow {
    pub label: &'static str,
    pub gamma: f64,
    pub aa: [f64; 3],
    pub ae: [f64; 3],
    pub af: [f64; 3],
    pub printed: Printed,
}

/// Printed columns; `None` where the table leaves a cell blank.
#[derive(Debug, Clone, Copy)]
pub struct Printed {
    pub es: f64,
    pub eta: f64,
    pub n: u64,
    pub eta_hat: Option<f64>,
    pub sse: Option<f64>,
    pub ase: Option<f64>,
    pub power: f64,
    pub coverage: f64,
}

#[allow(clippy::too_many_arguments)]
const fn printed(
    es: f64,
    eta: f64,
    n: u64,
    eta_hat: Option<f64>,
    sse: Option<f64>,
    ase: Option<f64>,
    power: f64,
    coverage: f64,
) -> Printed {
    Printed {
        es,
        eta,
        n,
        eta_hat,
        sse,
        ase,
        power,
        coverage,
    }
}

pub const DISTINCT_ROWS: [DistinctRow; 6] = [
    DistinctRow {
        label: "distinct 1",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.23, 0.51, 0.26],
        ae: [0.50, 0.41, 0.09],
        bb: [0.31, 0.50, 0.19],
        be: [0.14, 0.47, 0.39],
        printed: printed(0.219, 2.55, 164, Some(2.72), Some(1.06), Some(1.14), 0.78, 0.94),
    },
    DistinctRow {
        label: "distinct 2",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.41, 0.23, 0.36],
        ae: [0.58, 0.20, 0.22],
        bb: [0.50, 0.22, 0.28],
        be: [0.27, 0.22, 0.51],
        printed: printed(0.147, 1.86, 366, Some(1.89), Some(0.43), Some(0.43), 0.78, 0.95),
    },
    DistinctRow {
        label: "distinct 3",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.21, 0.40, 0.39],
        ae: [0.30, 0.41, 0.29],
        bb: [0.28, 0.41, 0.31],
        be: [0.12, 0.34, 0.54],
        printed: printed(0.117, 1.64, 571, Some(1.66), Some(0.29), Some(0.30), 0.79, 0.95),
    },
    DistinctRow {
        label: "distinct 4",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.13, 0.22, 0.65],
        ae: [0.09, 0.18, 0.73],
        bb: [0.10, 0.19, 0.71],
        be: [0.20, 0.26, 0.54],
        printed: printed(-0.085, 0.66, 1096, Some(0.67), Some(0.10), Some(0.10), 0.78, 0.95),
    },
    DistinctRow {
        label: "distinct 5",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.12, 0.24, 0.64],
        ae: [0.07, 0.18, 0.75],
        bb: [0.09, 0.21, 0.70],
        be: [0.18, 0.28, 0.54],
        printed: printed(-0.099, 0.61, 797, Some(0.61), Some(0.12), Some(0.11), 0.82, 0.95),
    },
    DistinctRow {
        label: "distinct 6",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.28, 0.52, 0.20],
        ae: [0.08, 0.43, 0.49],
        bb: [0.34, 0.50, 0.16],
        be: [0.20, 0.52, 0.28],
        printed: printed(-0.161, 0.50, 305, Some(0.53), Some(0.26), Some(0.16), 0.81, 0.94),
    },
];

pub const SHARED_ROWS: [SharedRow; 6] = [
    SharedRow {
        label: "shared 1",
        gamma: 0.3,
        aa: [0.24, 0.52, 0.24],
        ae: [0.63, 0.33, 0.04],
        af: [0.38, 0.49, 0.13],
        printed: printed(0.161, 1.88, 304, None, Some(0.44), Some(0.49), 0.77, 0.97),
    },
    SharedRow {
        label: "shared 2",
        gamma: 0.3,
        aa: [0.03, 0.66, 0.31],
        ae: [0.19, 0.74, 0.07],
        af: [0.07, 0.75, 0.18],
        printed: printed(0.148, 1.96, 357, None, Some(0.54), Some(0.51), 0.77, 0.94),
    },
    SharedRow {
        label: "shared 3",
        gamma: 0.3,
        aa: [0.43, 0.17, 0.40],
        ae: [0.73, 0.12, 0.15],
        af: [0.56, 0.16, 0.28],
        printed: printed(0.109, 1.56, 659, None, Some(0.26), Some(0.27), 0.81, 0.96),
    },
    SharedRow {
        label: "shared 4",
        gamma: 0.3,
        aa: [0.36, 0.36, 0.28],
        ae: [0.40, 0.35, 0.25],
        af: [0.52, 0.32, 0.16],
        printed: printed(-0.080, 0.73, 1218, None, Some(0.08), Some(0.09), 0.80, 0.95),
    },
    SharedRow {
        label: "shared 5",
        gamma: 0.3,
        aa: [0.17, 0.10, 0.73],
        ae: [0.15, 0.10, 0.75],
        af: [0.29, 0.13, 0.58],
        printed: printed(-0.113, 0.58, 618, None, Some(0.12), Some(0.12), 0.82, 0.94),
    },
    SharedRow {
        label: "shared 6",
        gamma: 0.3,
        aa: [0.24, 0.35, 0.41],
        ae: [0.16, 0.32, 0.52],
        af: [0.38, 0.35, 0.27],
        printed: printed(-0.181, 0.50, 241, None, Some(0.13), Some(0.14), 0.80, 0.96),
    },
];

/// Small-cell scenarios. Distinct rows 1-3, then shared rows 1-2.
pub const SMALL_CELL_DISTINCT: [DistinctRow; 3] = [
    DistinctRow {
        label: "small-cell distinct 1",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.04, 0.87, 0.09],
        ae: [0.06, 0.88, 0.06],
        bb: [0.07, 0.88, 0.05],
        be: [0.02, 0.82, 0.16],
        printed: printed(0.072, 1.68, 1506, None, None, None, 0.77, 0.92),
    },
    DistinctRow {
        label: "small-cell distinct 2",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.06, 0.55, 0.39],
        ae: [0.02, 0.40, 0.58],
        bb: [0.04, 0.49, 0.47],
        be: [0.12, 0.63, 0.26],
        printed: printed(-0.156, 0.48, 322, None, None, None, 0.79, 0.56),
    },
    DistinctRow {
        label: "small-cell distinct 3",
        gamma_a: 0.3,
        gamma_b: 0.4,
        aa: [0.81, 0.11, 0.08],
        ae: [0.95, 0.03, 0.02],
        bb: [0.87, 0.08, 0.05],
        be: [0.69, 0.16, 0.15],
        printed: printed(0.170, 3.23, 272, Some(3.63), None, None, 0.39, 0.97),
    },
];

pub const SMALL_CELL_SHARED: [SharedRow; 2] = [
    SharedRow {
        label: "small-cell shared 1",
        gamma: 0.3,
        aa: [0.03, 0.82, 0.15],
        ae: [0.19, 0.79, 0.02],
        af: [0.06, 0.86, 0.08],
        printed: printed(0.137, 2.23, 420, None, None, None, 0.74, 0.87),
    },
    SharedRow {
        label: "small-cell shared 2",
        gamma: 0.3,
        aa: [0.06, 0.47, 0.47],
        ae: [0.02, 0.33, 0.65],
        af: [0.12, 0.57, 0.31],
        printed: printed(-0.219, 0.38, 164, Some(1.87), None, None, 0.74, 0.43),
    },
];

impl DistinctRow {
    /// `(g, g')` with `g = (B, E)` compared against `g' = (A, E)`.
    pub fn regimes(&self) -> (TwoStageRegimeModel, TwoStageRegimeModel) {
        let g = TwoStageRegimeModel::from_raw("B", "E", self.gamma_b, &self.bb, &self.be).unwrap();
        let gp = TwoStageRegimeModel::from_raw("A", "E", self.gamma_a, &self.aa, &self.ae).unwrap();
        (g, gp)
    }
}

impl SharedRow {
    /// `(g, g')` with `g = (A, F)` compared against `g' = (A, E)`.
    pub fn regimes(&self) -> (TwoStageRegimeModel, TwoStageRegimeModel) {
        let g = TwoStageRegimeModel::from_raw("A", "F", self.gamma, &self.aa, &self.af).unwrap();
        let gp = TwoStageRegimeModel::from_raw("A", "E", self.gamma, &self.aa, &self.ae).unwrap();
        (g, gp)
    }

    pub fn model(&self) -> SharedPathModel {
        SharedPathModel::new(self.gamma, pmf(&self.aa), pmf(&self.ae), pmf(&self.af))
    }
}

pub fn pmf(p: &[f64]) -> OrdinalPmf {
    dgor_core::validate_pmf(p).unwrap()
}

pub const GAMMA_M: f64 = 0.32;
pub const GAMMA_C: f64 = 0.45;
pub const M_RESPONDER: [f64; 3] = [0.08, 0.33, 0.59];
pub const M_THEN_M: [f64; 3] = [0.50, 0.34, 0.16];
pub const M_THEN_C: [f64; 3] = [0.39, 0.25, 0.36];
pub const C_RESPONDER: [f64; 3] = [0.10, 0.30, 0.60];
pub const C_THEN_M: [f64; 3] = [0.41, 0.39, 0.20];
/// Printed as (0.46, 0.32, 0.21), which sums to 0.99; stored renormalized.
pub const C_THEN_C: [f64; 3] = [0.46 / 0.99, 0.32 / 0.99, 0.21 / 0.99];

/// The four embedded regimes of the depression trial, keyed `(stage1, stage2)`.
pub fn stard_regime(stage1: &str, stage2: &str) -> TwoStageRegimeModel {
    let (gamma, resp) = match stage1 {
        "M" => (GAMMA_M, M_RESPONDER),
        "C" => (GAMMA_C, C_RESPONDER),
        other => panic!("unknown stage-1 treatment {other}"),
    };
    let nonresp = match (stage1, stage2) {
        ("M", "M") => M_THEN_M,
        ("M", "C") => M_THEN_C,
        ("C", "M") => C_THEN_M,
        ("C", "C") => C_THEN_C,
        other => panic!("unknown regime {other:?}"),
    };
    TwoStageRegimeModel::from_raw(stage1, stage2, gamma, &resp, &nonresp).unwrap()
}

/// Random strictly positive pmf with `j` categories.
pub fn random_pmf<R: Rng>(rng: &mut R, j: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..j).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

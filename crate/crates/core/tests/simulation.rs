mod common;

use common::{random_pmf, DISTINCT_ROWS};
use dgor_core::{
    asymptotic_variance_kstage, dgor_kstage, generate_trial, kstage_planning_weights,
    population_dgor_oracle, run_study, run_study_with, validate_pmf, Execution,
    KStageRegimeModel, ScenarioRegimes, SmartDesign, SmartTruth, StudyScenario,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn three_stage_pair(seed: u64) -> (KStageRegimeModel, KStageRegimeModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pmfs = || {
        (0..3)
            .map(|_| validate_pmf(&random_pmf(&mut rng, 3)).unwrap())
            .collect::<Vec<_>>()
    };
    let labels = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let gprime = KStageRegimeModel::new(labels(&["A", "E", "G"]), vec![0.3, 0.3], pmfs()).unwrap();
    let g = KStageRegimeModel::new(labels(&["B", "E", "G"]), vec![0.4, 0.4], pmfs()).unwrap();
    (g, gprime)
}

#[test]
fn three_stage_value_matches_oracle() {
    let (g, gp) = three_stage_pair(3);
    let exact = dgor_kstage(&g, &gp).unwrap().dgor;
    let oracle = population_dgor_oracle(&g, &gp, 10_000_000, 17).unwrap();
    assert!(
        (oracle.dgor - exact).abs() < 3.0 * oracle.se,
        "oracle {} ± {} vs exact {exact}",
        oracle.dgor,
        oracle.se
    );
}

#[test]
fn three_stage_symmetric_variance_is_positive() {
    let (g, _) = three_stage_pair(5);
    let mut other = g.clone();
    other.labels[0] = "A".into();
    assert_eq!(dgor_kstage(&g, &other).unwrap().dgor, 1.0);
    let w = kstage_planning_weights(&[&g, &other]);
    let s2 = asymptotic_variance_kstage(&g, &other, &w).unwrap();
    assert!(s2.is_finite() && s2 > 0.0);
}

#[test]
fn three_stage_ase_tracks_sse() {
    let (g, gp) = three_stage_pair(3);
    let scenario = StudyScenario {
        regimes: ScenarioRegimes::KStage([gp, g]),
        shared: false,
        design: None,
        alpha: 0.05,
        power: 0.8,
        n_override: Some(1_000),
        replications: 2_000,
        seed: 41,
    };
    let report = run_study(&scenario).unwrap();
    let ratio = report.mean_ase / report.sse;
    assert!((ratio - 1.0).abs() <= 0.10, "ASE/SSE = {ratio} ({report:?})");
}

#[test]
fn same_seed_gives_identical_trials() {
    let (g, gp) = DISTINCT_ROWS[0].regimes();
    let design = SmartDesign::uniform(&["A", "B"], &["E", "F"]);
    let truth = SmartTruth::from_regimes(&design, &[&gp, &g]).unwrap();
    let csv = |seed| {
        let mut out = Vec::new();
        generate_trial(&truth, 500, seed).unwrap().write_csv(&mut out).unwrap();
        out
    };
    assert_eq!(csv(8), csv(8));
    assert_ne!(csv(8), csv(9));
}

#[test]
fn parallel_and_serial_reports_agree() {
    let (g, gp) = DISTINCT_ROWS[2].regimes();
    let mut scenario = StudyScenario::two_stage(gp, g, false);
    scenario.replications = 300;
    scenario.seed = 5;
    let parallel = run_study_with(&scenario, Execution::Parallel).unwrap();
    let serial = run_study_with(&scenario, Execution::Serial).unwrap();
    assert_eq!(parallel, serial);
    let (g, gp) = three_stage_pair(3);
    scenario.regimes = ScenarioRegimes::KStage([gp, g]);
    scenario.n_override = Some(400);
    assert_eq!(
        run_study_with(&scenario, Execution::Parallel).unwrap(),
        run_study_with(&scenario, Execution::Serial).unwrap()
    );
}

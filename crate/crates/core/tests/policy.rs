mod common;

use common::stard_regime;
use dgor_core::{
    find_optimal_in_data, generate_trial, Correction, RegimeClass, RegimeSpec, SmartDesign,
    SmartTruth,
};

fn stard_truth() -> SmartTruth {
    let design = SmartDesign::uniform(&["M", "C"], &["M", "C"]);
    let regimes = [("M", "M"), ("M", "C"), ("C", "M"), ("C", "C")].map(|(a, b)| stard_regime(a, b));
    let refs: Vec<_> = regimes.iter().collect();
    SmartTruth::from_regimes(&design, &refs).unwrap()
}

#[test]
fn dominated_regime_never_wins() {
    let truth = stard_truth();
    let class = RegimeClass::new(
        vec![
            RegimeSpec::new("M", "M"),
            RegimeSpec::new("M", "C"),
            RegimeSpec::new("C", "M"),
            RegimeSpec::new("C", "C"),
        ],
        0.05,
        Correction::Bonferroni,
    )
    .unwrap();
    let loser = RegimeSpec::new("M", "M");
    for seed in [1, 2, 3, 4, 5] {
        let data = generate_trial(&truth, 4_000, seed).unwrap();
        let search = find_optimal_in_data(&class, &data).unwrap();
        assert_ne!(search.winner, loser, "seed {seed}: {:?}", search.trace);
        assert_eq!(search.trace.len(), 3);
        for record in &search.trace {
            assert!((record.level - 0.05 / 3.0).abs() < 1e-15);
        }
    }
}

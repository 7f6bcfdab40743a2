use proptest::prelude::*;

use stlcalib_core::trace::{split_dataset, synthesize};
use stlcalib_core::tuning::grid_search;
use stlcalib_core::{Dataset, FormulaKind, GridSpec, Strategy, SynthConfig};

fn data(seed: u64) -> Dataset {
    let cfg = SynthConfig {
        count: 120,
        accuracy: 0.4,
        seed,
        ..SynthConfig::default()
    };
    split_dataset(&synthesize(&cfg).unwrap(), 0.5, seed).unwrap()
}

fn ascending(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extra_grid_point_never_hurts(
        seed in 0u64..1000,
        mut taus in prop::collection::vec(0.05..0.95f64, 1..4),
        extra in 0.05..0.95f64,
    ) {
        let d = data(seed);
        ascending(&mut taus);
        let mut spec = GridSpec::new(FormulaKind::Stl1, Strategy::Cms);
        spec.tau_grid = taus.clone();
        spec.delta_grid = vec![0.1];
        let base = grid_search(&d, &spec).unwrap();
        taus.push(extra);
        ascending(&mut taus);
        spec.tau_grid = taus;
        let wider = grid_search(&d, &spec).unwrap();
        prop_assert!(wider.best_ece <= base.best_ece);
    }

    #[test]
    fn reruns_are_identical(seed in 0u64..1000) {
        let d = data(seed);
        let mut spec = GridSpec::new(FormulaKind::Stl1, Strategy::Gs);
        spec.tau_grid = vec![0.5, 0.7];
        let a = grid_search(&d, &spec).unwrap();
        let b = grid_search(&d, &spec).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(a.evaluations.len(), 8);
    }
}

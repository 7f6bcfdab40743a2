//! Deterministic inputs shared by the benchmarks.

use stlcalib_core::calibration::Prediction;
use stlcalib_core::trace::{split_dataset, synthesize};
use stlcalib_core::{Dataset, Signal, SynthConfig};

/// Synthetic dataset split 20/80 into validation and test.
pub fn dataset(count: usize, seed: u64) -> Dataset {
    let cfg = SynthConfig {
        count,
        accuracy: 0.3,
        seed,
        ..SynthConfig::default()
    };
    split_dataset(&synthesize(&cfg).expect("valid config"), 0.2, seed).expect("both partitions")
}

/// A zig-zag signal of `len` samples inside [0, 1].
pub fn signal(len: usize) -> Signal {
    let samples = (0..len)
        .map(|i| 0.5 + 0.4 * ((i as f64) * 0.7).sin())
        .collect();
    Signal::new(samples).expect("samples in range")
}

/// `n` predictions with confidences spread over [0, 1].
pub fn predictions(n: usize) -> Vec<Prediction> {
    (0..n)
        .map(|i| {
            let c = (i as f64 * 0.618_033_988_75).fract();
            Prediction::new(format!("p{i}"), c, i % 3 == 0).expect("valid confidence")
        })
        .collect()
}

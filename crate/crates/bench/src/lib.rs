//! Fixtures shared by the benchmarks.

use pickfreeze::models::ishigami_model;
use pickfreeze::sampling::{generate_pick_freeze, Design, PickFreezeSample};

/// Ishigami sample on the singletons `{1}, ..., {k}` (`k <= 3`).
pub fn ishigami_sample(n: usize, k: usize, seed: u64) -> PickFreezeSample {
    let model = ishigami_model(false);
    let design = Design::new((1..=k).map(|i| vec![i]).collect()).expect("k is at most 3");
    generate_pick_freeze(&model.spec, &design, n, seed).expect("valid design")
}

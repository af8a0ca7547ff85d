//! Fixtures shared by the criterion benches.

use mvdrc_core::{DroInstance, FiniteDistribution};

/// Deterministic `n`-atom instance with spread-out costs and weights.
pub fn dro_instance(n: usize, gamma: f64) -> DroInstance {
    let raw: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let tail: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - tail;
    let atoms = (0..n).map(|i| vec![i as f64]).collect();
    let reference = FiniteDistribution::new(atoms, weights).expect("valid weights");
    let costs = (0..n).map(|i| ((i * 104_729) % 1000) as f64 / 100.0).collect();
    DroInstance::new(reference, costs, gamma).expect("valid instance")
}

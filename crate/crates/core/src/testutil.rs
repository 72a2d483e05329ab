//! Deterministic random states for unit tests.

use num_complex::Complex64 as C64;

use crate::statespace::{dagger, trace, CMatrix, DensityOperator, SpaceConfig};

/// A full-rank oscillator state from a linear congruential sequence.
pub(crate) fn random_density(space: &SpaceConfig, seed: u64) -> DensityOperator {
    let n = space.fock_dim();
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let a = CMatrix::from_shape_fn((n, n), |_| C64::new(next(), next()));
    let rho = a.dot(&dagger(&a));
    let tr = trace(&rho);
    DensityOperator::new(rho.mapv(|c| c / tr), crate::statespace::SpaceTag::Oscillator).expect("valid state")
}

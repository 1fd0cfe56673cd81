//! Gaussian-process view of a dictionary: each atom's coefficient row is an
//! observation vector and the covariance of those rows is the kernel. The
//! module provides the closed-form conditional variance and entropy, plus the
//! compact-support structure used to skip near-zero covariances.

mod kernel;

pub use kernel::{kernel_from_codes, kernel_linear, KernelMatrix, KernelParams};

use std::f64::consts::{E, PI};

/// Conditional variances are clamped to this before taking logs.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Differential entropy of a 1-D Gaussian: `0.5 ln(2 pi e v)`.
pub fn entropy_from_variance(v: f64) -> f64 {
    0.5 * (2.0 * PI * E * v.max(VARIANCE_FLOOR)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_reference_values() {
        assert!((entropy_from_variance(1.0) - 1.41894).abs() < 1e-5);
        assert!((entropy_from_variance(1.0) - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-15);
        assert!(entropy_from_variance(1.0 / (2.0 * PI * E)).abs() < 1e-15);
        assert!(entropy_from_variance(2.0) > entropy_from_variance(1.5));
    }
}

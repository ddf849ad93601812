//! The twisted Laplacian on a circle of length `L`: an exactly solvable
//! model of the trace formula and of the Bloch decomposition of cyclic covers.
//!
//! At twist `theta` the spectral parameters are `t_k = 2 pi (k + theta) / L`,
//! and Poisson summation gives
//! `sum_k Hhat(t_k) = L (H(0) + 2 sum_{m >= 1} H(mL) cos(2 pi m theta))`.

use std::f64::consts::TAU;

use super::{compensated_sum, GeometricSide, IdentityTerm, TraceError, TraceForm, WeightedLength};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleOracle {
    pub length: f64,
}

impl CircleOracle {
    pub fn new(length: f64) -> Result<Self, TraceError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(TraceError::InvalidTestFunction(format!(
                "circle length must be positive, got {length}"
            )));
        }
        Ok(CircleOracle { length })
    }

    /// `t_k` for `k` in `-count..=count`.
    pub fn spectrum(&self, theta: f64, count: usize) -> Vec<f64> {
        let c = count as i64;
        (-c..=c).map(|k| TAU * (k as f64 + theta) / self.length).collect()
    }

    /// Smallest `|t_k|` at a twist.
    pub fn lowest_parameter(&self, theta: f64) -> f64 {
        let frac = theta.rem_euclid(1.0);
        TAU * frac.min(1.0 - frac) / self.length
    }

    /// `sum_k Hhat(t_k)` over the window `-count..=count`.
    pub fn spectral_sum(&self, theta: f64, form: &dyn TraceForm, count: usize) -> f64 {
        compensated_sum(self.spectrum(theta, count).into_iter().map(|t| form.h_hat(t)))
    }

    /// `L (H(0) + 2 sum_{m >= 1} H(mL) cos(2 pi m theta))`.
    pub fn geometric_sum(&self, theta: f64, form: &dyn TraceForm) -> f64 {
        let l = self.length;
        let mut values = vec![l * form.h(0.0)];
        let mut m = 1.0;
        while m * l < form.support() {
            values.push(2.0 * l * form.h(m * l) * (TAU * m * theta).cos());
            m += 1.0;
        }
        compensated_sum(values)
    }

    /// Both sides of the Poisson identity at one twist.
    pub fn trace_check(&self, theta: f64, form: &dyn TraceForm, count: usize) -> (f64, f64) {
        (self.spectral_sum(theta, form, count), self.geometric_sum(theta, form))
    }
}

/// Window size so that the neglected tail of `sum_k Hhat(t_k)` stays below
/// `tolerance`, using `Hhat(t) <= C^2 / t^4` with `C = 2 sum_k |a_k| w_k`
/// for the seed family.
pub fn truncation_count(length: f64, seed: &super::TestFunction, tolerance: f64) -> usize {
    let c: f64 = 2.0 * seed.coeffs().iter().zip(seed.frequencies()).map(|(a, w)| a.abs() * w).sum::<f64>();
    // also covers |fhat| <= sum |a| 2R away from the asymptotic regime
    let c = c.max(1e-300) * 4.0;
    let spacing = TAU / length;
    // sum over |t| > T of C^2/t^4 <= 2 (C^2 / (3 T^3)) / spacing + boundary term
    let t_cut = (2.0 * c * c / (3.0 * spacing * tolerance)).cbrt().max(10.0 * seed.frequencies()[seed.coeffs().len() - 1]);
    (t_cut / spacing).ceil() as usize + 1
}

impl GeometricSide for CircleOracle {
    /// `1/2 sum_k Hhat(t_k) = (L/2) H(0) + sum_m L H(mL) cos(2 pi m theta)`,
    /// matching the `1/2 sum` normalisation of the 3-manifold formula.
    fn identity(&self) -> IdentityTerm {
        IdentityTerm::Point(0.5 * self.length)
    }

    fn terms(&self, support: f64) -> Result<Vec<WeightedLength>, TraceError> {
        let mut out = Vec::new();
        let mut m = 1u64;
        while (m as f64) * self.length < support {
            out.push(WeightedLength { degree: m, length: m as f64 * self.length, weight: self.length });
            m += 1;
        }
        Ok(out)
    }
}

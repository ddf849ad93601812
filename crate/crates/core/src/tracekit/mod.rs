//! Both sides of the twisted trace formula for coexact 1-forms,
//!
//! ```text
//! 1/2 sum_j Hhat(sqrt(lambda_j))
//!   = vol/(2 pi) (H(0) - H''(0))
//!   + sum_gamma l(gamma_0) cos(hol gamma) cos(2 pi n(gamma) theta) H(l(gamma))
//!             / (|1 - e^{Cl(gamma)}| |1 - e^{-Cl(gamma)}|),
//! ```
//!
//! for the character sending the generator of `H_1/torsion` to `e^{2 pi i theta}`.
//! The geometric side is kept as a finite cosine series in `theta`
//! ([`GroupRingSeries`]) so one pass over the geodesics serves every twist.

pub mod circle;
pub mod testfn;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::spectra::{GeodesicTerm, SpectrumDataset};
pub use circle::CircleOracle;
pub use testfn::{
    BandTestFunction, DerivativeForm, ModulatedTestFunction, TestFunction, TraceForm, MAX_COEFFS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("invalid band [{lo}, {hi}]: need 0 < lo < hi")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("test function support {support} exceeds the geodesic cutoff {cutoff}")]
    SupportExceedsCutoff { support: f64, cutoff: f64 },
    #[error("degenerate normalisation Hhat_x(x) = {0:e}")]
    DegenerateNormalization(f64),
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `G(theta) = A + sum_n C_n cos(2 pi n theta)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupRingSeries {
    pub constant: f64,
    pub cosine_coeffs: BTreeMap<u64, f64>,
}

impl GroupRingSeries {
    pub fn eval(&self, theta: f64) -> f64 {
        let tail = self
            .cosine_coeffs
            .iter()
            .map(|(&n, c)| c * (TAU * n as f64 * theta).cos());
        compensated_sum(std::iter::once(self.constant).chain(tail))
    }

    /// Upper bound on `|dG/dtheta|`.
    pub fn lipschitz_bound(&self) -> f64 {
        TAU * self.cosine_coeffs.iter().map(|(&n, c)| n as f64 * c.abs()).sum::<f64>()
    }

    /// `|A| + sum |C_n|`, the size of the cancellation behind `G`.
    pub fn abs_scale(&self) -> f64 {
        self.constant.abs() + self.cosine_coeffs.values().map(|c| c.abs()).sum::<f64>()
    }

    pub fn add_term(&mut self, degree: u64, value: f64) {
        if degree == 0 {
            self.constant += value;
        } else {
            *self.cosine_coeffs.entry(degree).or_insert(0.0) += value;
        }
    }

    /// `sum_i w_i s_i` over series sharing no structure.
    pub fn linear_combination(parts: &[(f64, &GroupRingSeries)]) -> GroupRingSeries {
        let mut out = GroupRingSeries::default();
        for (w, s) in parts {
            out.constant += w * s.constant;
            for (&n, c) in &s.cosine_coeffs {
                *out.cosine_coeffs.entry(n).or_insert(0.0) += w * c;
            }
        }
        out
    }
}

/// How the identity contribution depends on the test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdentityTerm {
    /// `c (H(0) - H''(0))`, the hyperbolic 3-manifold case with `c = vol / 2 pi`.
    Hodge(f64),
    /// `c H(0)`, the flat circle.
    Point(f64),
}

impl IdentityTerm {
    pub fn evaluate(&self, form: &dyn TraceForm) -> f64 {
        match *self {
            IdentityTerm::Hodge(c) => c * form.identity_term(),
            IdentityTerm::Point(c) => c * form.h(0.0),
        }
    }
}

/// A closed geodesic reduced to what the geometric side needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedLength {
    /// `|n(gamma)|`.
    pub degree: u64,
    pub length: f64,
    /// Weight including the holonomy cosine.
    pub weight: f64,
}

/// A source of geometric-side data: a hyperbolic mapping torus or a model.
pub trait GeometricSide: Sync {
    fn identity(&self) -> IdentityTerm;

    /// Every term with `length < support`; errors when the data cannot cover
    /// the requested support.
    fn terms(&self, support: f64) -> Result<Vec<WeightedLength>, TraceError>;

    /// Whether every coexact eigenvalue has even multiplicity.
    fn even_multiplicity(&self) -> bool {
        false
    }

    /// Largest test-function support the data can serve, if bounded.
    fn cutoff(&self) -> Option<f64> {
        None
    }

    /// Geometric side `G(theta)` of a test function as a cosine series.
    fn series(&self, form: &dyn TraceForm) -> Result<GroupRingSeries, TraceError> {
        let mut s = GroupRingSeries { constant: self.identity().evaluate(form), ..Default::default() };
        for t in self.terms(form.support())? {
            s.add_term(t.degree, t.weight * form.h(t.length));
        }
        Ok(s)
    }
}

/// Geometric side built from a validated spectrum dataset.
#[derive(Debug, Clone)]
pub struct SpectralGeometry {
    pub volume: f64,
    pub cutoff: f64,
    pub even_multiplicity: bool,
    terms: Vec<WeightedLength>,
}

impl SpectralGeometry {
    pub fn new(dataset: &SpectrumDataset) -> Self {
        let (d, _) = dataset.normalized();
        let mut terms: Vec<WeightedLength> =
            d.expand_powers().iter().map(weighted_length).collect();
        terms.sort_by(|a, b| a.length.total_cmp(&b.length));
        SpectralGeometry {
            volume: d.volume,
            cutoff: d.cutoff_r,
            even_multiplicity: d.even_multiplicity,
            terms,
        }
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

fn weighted_length(t: &GeodesicTerm) -> WeightedLength {
    WeightedLength {
        degree: t.degree.unsigned_abs(),
        length: t.length,
        weight: t.weight * t.holonomy.cos(),
    }
}

impl GeometricSide for SpectralGeometry {
    fn identity(&self) -> IdentityTerm {
        IdentityTerm::Hodge(self.volume / (2.0 * PI))
    }

    fn terms(&self, support: f64) -> Result<Vec<WeightedLength>, TraceError> {
        if support > self.cutoff * (1.0 + 1e-12) {
            return Err(TraceError::SupportExceedsCutoff { support, cutoff: self.cutoff });
        }
        Ok(self.terms.iter().take_while(|t| t.length < support).copied().collect())
    }

    fn even_multiplicity(&self) -> bool {
        self.even_multiplicity
    }

    fn cutoff(&self) -> Option<f64> {
        Some(self.cutoff)
    }
}

/// Geometric side of the trace formula from expanded geodesic terms.
pub fn geometric_series(
    terms: &[GeodesicTerm],
    form: &dyn TraceForm,
    volume: f64,
    cutoff: f64,
) -> Result<GroupRingSeries, TraceError> {
    if form.support() > cutoff * (1.0 + 1e-12) {
        return Err(TraceError::SupportExceedsCutoff { support: form.support(), cutoff });
    }
    let mut s = GroupRingSeries {
        constant: volume / (2.0 * PI) * form.identity_term(),
        ..Default::default()
    };
    for t in terms {
        let w = weighted_length(t);
        s.add_term(w.degree, w.weight * form.h(w.length));
    }
    Ok(s)
}

/// `1/2 sum_j Hhat(t_j)` over supplied spectral parameters.
pub fn spectral_side(params: &[f64], form: &dyn TraceForm) -> f64 {
    0.5 * compensated_sum(params.iter().map(|&t| form.h_hat(t)))
}

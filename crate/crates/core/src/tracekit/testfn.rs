//! Even, compactly supported test functions with closed-form transforms.
//!
//! A seed `f(x) = sum_k a_k cos(w_k x)` on `[-R1, R1]` with `w_k = (k + 1/2) pi / R1`
//! vanishes at the endpoints, and so does `f''`. The test function is the
//! autocorrelation `H = f * f(-.)`, supported in `[-2 R1, 2 R1]`, with
//! `Hhat = fhat^2 >= 0` under `Hhat(t) = int H(x) e^{-itx} dx`.
//!
//! Derivatives of `H` are autocorrelations of derivatives of `f`:
//! `H'' = -f' * f'` always, and `H'''' = f'' * f''` when `f'` is continuous,
//! which for this basis is the single linear condition
//! `sum_k (-1)^k (2k + 1) a_k = 0` (see [`TestFunction::is_regular`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::TraceError;

/// Largest supported number of seed coefficients.
pub const MAX_COEFFS: usize = 8;

/// Anything that can be fed to both sides of the trace formula.
pub trait TraceForm: Sync {
    /// Time-domain value `H(l)`; even in `l`.
    fn h(&self, l: f64) -> f64;
    /// `H(0) - H''(0)`, the factor multiplying `vol / 2 pi`.
    fn identity_term(&self) -> f64;
    /// Fourier transform `Hhat(t)`.
    fn h_hat(&self, t: f64) -> f64;
    /// `H` vanishes for `|l| >= support()`.
    fn support(&self) -> f64;
}

/// `sin(u) / u` with a Taylor switchover near zero.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Basis {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    half_support: f64,
    coeffs: Vec<f64>,
    #[serde(skip)]
    freqs: Vec<f64>,
}

impl TestFunction {
    pub fn new(half_support: f64, coeffs: Vec<f64>) -> Result<Self, TraceError> {
        if !(half_support.is_finite() && half_support > 0.0) {
            return Err(TraceError::InvalidTestFunction(format!(
                "half support must be positive, got {half_support}"
            )));
        }
        if coeffs.is_empty() || coeffs.len() > MAX_COEFFS {
            return Err(TraceError::InvalidTestFunction(format!(
                "need between 1 and {MAX_COEFFS} coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || coeffs.iter().all(|&c| c == 0.0) {
            return Err(TraceError::InvalidTestFunction(
                "coefficients must be finite and not all zero".into(),
            ));
        }
        let freqs = (0..coeffs.len())
            .map(|k| (k as f64 + 0.5) * PI / half_support)
            .collect();
        Ok(TestFunction { half_support, coeffs, freqs })
    }

    /// The single-term seed `cos(pi x / (2 R1))`.
    pub fn fejer(half_support: f64) -> Self {
        Self::new(half_support, vec![1.0]).expect("positive half support")
    }

    /// Default two-term seed with continuous derivative: `a = (1, 1/3)`.
    pub fn smooth(half_support: f64) -> Self {
        Self::new(half_support, vec![1.0, 1.0 / 3.0]).expect("positive half support")
    }

    pub fn half_support(&self) -> f64 {
        self.half_support
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self, TraceError> {
        Self::new(self.half_support, coeffs)
    }

    /// Seed `f(x)`.
    pub fn seed(&self, x: f64) -> f64 {
        if x.abs() >= self.half_support {
            return 0.0;
        }
        self.coeffs.iter().zip(&self.freqs).map(|(a, w)| a * (w * x).cos()).sum()
    }

    /// One-sided derivative `f'(R1-)`; zero exactly for regular seeds.
    pub fn boundary_slope(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.freqs)
            .enumerate()
            .map(|(k, (a, w))| if k % 2 == 0 { -a * w } else { a * w })
            .sum()
    }

    /// Whether `f'` is continuous across `+-R1`, so that `H` has four
    /// continuous derivatives and band functions are admissible.
    pub fn is_regular(&self) -> bool {
        let scale: f64 = self.coeffs.iter().zip(&self.freqs).map(|(a, w)| (a * w).abs()).sum();
        self.boundary_slope().abs() <= 1e-12 * scale
    }

    /// Orthogonal projection of the coefficients onto the regular subspace.
    pub fn regularized(&self) -> Result<Self, TraceError> {
        let v: Vec<f64> = (0..self.coeffs.len())
            .map(|k| if k % 2 == 0 { (2 * k + 1) as f64 } else { -((2 * k + 1) as f64) })
            .collect();
        let dot: f64 = self.coeffs.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm: f64 = v.iter().map(|b| b * b).sum();
        let projected: Vec<f64> = self.coeffs.iter().zip(&v).map(|(a, b)| a - dot / norm * b).collect();
        let tf = self.with_coeffs(projected).map_err(|_| {
            TraceError::InvalidTestFunction("seed has no regular component".into())
        })?;
        Ok(tf)
    }

    /// `fhat(t) = int f(x) cos(tx) dx`, closed form.
    pub fn f_hat(&self, t: f64) -> f64 {
        let r = self.half_support;
        self.coeffs
            .iter()
            .zip(&self.freqs)
            .map(|(a, w)| a * r * (sinc((w - t) * r) + sinc((w + t) * r)))
            .sum()
    }

    /// `H(0) = R1 sum a_k^2`, `H''(0) = -R1 sum a_k^2 w_k^2`, etc.
    /// Returns `H^(2m)(0)`; valid for `m <= 1` always and `m <= 3` for regular seeds.
    pub fn even_derivative_at_zero(&self, m: u32) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&self.freqs)
            .map(|(a, w)| a * a * w.powi(2 * m as i32))
            .sum();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.half_support * s
    }

    /// `(H(0), H''(0))`.
    pub fn h_derivs_at_zero(&self) -> (f64, f64) {
        (self.even_derivative_at_zero(0), self.even_derivative_at_zero(1))
    }

    /// Second derivative `H''(l)`.
    pub fn h2(&self, l: f64) -> f64 {
        let w: Vec<f64> = self.coeffs.iter().zip(&self.freqs).map(|(a, w)| a * w).collect();
        -self.correlate(&w, Basis::Sin, l)
    }

    /// Fourth derivative `H''''(l)`; meaningful for regular seeds only.
    pub fn h4(&self, l: f64) -> f64 {
        let w: Vec<f64> = self.coeffs.iter().zip(&self.freqs).map(|(a, w)| a * w * w).collect();
        self.correlate(&w, Basis::Cos, l)
    }

    /// `int_{-R1}^{R1 - l} u(y) u(y + l) dy` for `u = sum_k c_k basis(w_k y)`.
    fn correlate(&self, c: &[f64], basis: Basis, l: f64) -> f64 {
        let r = self.half_support;
        let l = l.abs();
        if l >= 2.0 * r {
            return 0.0;
        }
        let span = 2.0 * r - l;
        let mid = -0.5 * l;
        let sum_sign = match basis {
            Basis::Cos => 1.0,
            Basis::Sin => -1.0,
        };
        let mut total = 0.0;
        for (j, (cj, wj)) in c.iter().zip(&self.freqs).enumerate() {
            for (k, (ck, wk)) in c.iter().zip(&self.freqs).enumerate() {
                // cos(a y + b) integrated over [mid - span/2, mid + span/2]
                let integral = |alpha: f64, beta: f64| {
                    span * (alpha * mid + beta).cos() * sinc(0.5 * alpha * span)
                };
                let diff = if j == k { span * (-wk * l).cos() } else { integral(wj - wk, -wk * l) };
                let sum = integral(wj + wk, wk * l);
                total += cj * ck * 0.5 * (diff + sum_sign * sum);
            }
        }
        total
    }
}

impl TraceForm for TestFunction {
    fn h(&self, l: f64) -> f64 {
        self.correlate(&self.coeffs, Basis::Cos, l)
    }

    fn identity_term(&self) -> f64 {
        let (h0, h2) = self.h_derivs_at_zero();
        h0 - h2
    }

    fn h_hat(&self, t: f64) -> f64 {
        let f = self.f_hat(t);
        f * f
    }

    fn support(&self) -> f64 {
        2.0 * self.half_support
    }
}

/// `H_x(l) = H(l) cos(x l)`, transform `(Hhat(t - x) + Hhat(t + x)) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedTestFunction<'a> {
    pub base: &'a TestFunction,
    pub center: f64,
}

impl<'a> ModulatedTestFunction<'a> {
    pub fn new(base: &'a TestFunction, center: f64) -> Self {
        ModulatedTestFunction { base, center }
    }

    /// `Hhat_x(x) = (Hhat(0) + Hhat(2x)) / 2`, the normalisation of `J`.
    pub fn peak(&self) -> f64 {
        self.h_hat(self.center)
    }
}

impl TraceForm for ModulatedTestFunction<'_> {
    fn h(&self, l: f64) -> f64 {
        self.base.h(l) * (self.center * l).cos()
    }

    fn identity_term(&self) -> f64 {
        // (H cos(x.))'' at 0 = H''(0) - x^2 H(0)
        let (h0, h2) = self.base.h_derivs_at_zero();
        h0 * (1.0 + self.center * self.center) - h2
    }

    fn h_hat(&self, t: f64) -> f64 {
        0.5 * (self.base.h_hat(t - self.center) + self.base.h_hat(t + self.center))
    }

    fn support(&self) -> f64 {
        self.base.support()
    }
}

/// `Hhat_ex(t) = (b^2 - t^2)(t^2 - a^2) Hhat(t)`: non-positive off the band
/// `a <= |t| <= b`. Time domain `-H'''' - (a^2 + b^2) H'' - a^2 b^2 H`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTestFunction<'a> {
    base: &'a TestFunction,
    lo: f64,
    hi: f64,
}

impl<'a> BandTestFunction<'a> {
    pub fn new(base: &'a TestFunction, lo: f64, hi: f64) -> Result<Self, TraceError> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(TraceError::InvalidBand { lo, hi });
        }
        if !base.is_regular() {
            return Err(TraceError::InvalidTestFunction(
                "band functions need a seed with continuous derivative".into(),
            ));
        }
        Ok(BandTestFunction { base, lo, hi })
    }

    pub fn band(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Coefficients `(c4, c2, c0)` of `H_ex = c4 H'''' + c2 H'' + c0 H`.
    pub fn derivative_weights(&self) -> (f64, f64, f64) {
        band_weights(self.lo, self.hi)
    }
}

pub fn band_weights(lo: f64, hi: f64) -> (f64, f64, f64) {
    let (a2, b2) = (lo * lo, hi * hi);
    (-1.0, -(a2 + b2), -a2 * b2)
}

impl TraceForm for BandTestFunction<'_> {
    fn h(&self, l: f64) -> f64 {
        let (c4, c2, c0) = self.derivative_weights();
        c4 * self.base.h4(l) + c2 * self.base.h2(l) + c0 * self.base.h(l)
    }

    fn identity_term(&self) -> f64 {
        let (c4, c2, c0) = self.derivative_weights();
        let d = |m| self.base.even_derivative_at_zero(m);
        let at_zero = c4 * d(2) + c2 * d(1) + c0 * d(0);
        let second = c4 * d(3) + c2 * d(2) + c0 * d(1);
        at_zero - second
    }

    fn h_hat(&self, t: f64) -> f64 {
        let t2 = t * t;
        (self.hi * self.hi - t2) * (t2 - self.lo * self.lo) * self.base.h_hat(t)
    }

    fn support(&self) -> f64 {
        self.base.support()
    }
}

/// A single even derivative `H^(2m)` of a seed autocorrelation, so that
/// band functions can be assembled linearly from three precomputed series.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeForm<'a> {
    pub base: &'a TestFunction,
    /// 0, 1 or 2 for `H`, `H''`, `H''''`.
    pub half_order: u32,
}

impl TraceForm for DerivativeForm<'_> {
    fn h(&self, l: f64) -> f64 {
        match self.half_order {
            0 => self.base.h(l),
            1 => self.base.h2(l),
            2 => self.base.h4(l),
            m => panic!("unsupported derivative order {}", 2 * m),
        }
    }

    fn identity_term(&self) -> f64 {
        let m = self.half_order;
        self.base.even_derivative_at_zero(m) - self.base.even_derivative_at_zero(m + 1)
    }

    fn h_hat(&self, t: f64) -> f64 {
        let m = self.half_order as i32;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * t.powi(2 * m) * self.base.h_hat(t)
    }

    fn support(&self) -> f64 {
        self.base.support()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson rule on `[a, b]` with `n` (even) panels.
    pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn fhat_at_zero() {
        let tf = TestFunction::fejer(1.7);
        assert!((tf.f_hat(0.0) - 4.0 * 1.7 / PI).abs() < 1e-14);
    }

    #[test]
    fn fhat_continuous_at_removable_singularity() {
        let tf = TestFunction::new(2.0, vec![1.0, -0.4, 0.25]).unwrap();
        for &w in tf.frequencies() {
            let quad = simpson(|x| tf.seed(x) * (w * x).cos(), -2.0, 2.0, 200_000);
            assert!((tf.f_hat(w) - quad).abs() < 1e-10, "{} vs {}", tf.f_hat(w), quad);
            let near = tf.f_hat(w + 1e-7);
            assert!((near - tf.f_hat(w)).abs() < 1e-6);
        }
    }

    #[test]
    fn autocorrelation_closed_forms() {
        let tf = TestFunction::fejer(1.0);
        assert!((tf.h(0.0) - 1.0).abs() < 1e-14);
        assert!((tf.h2(0.0) + PI * PI / 4.0).abs() < 1e-13);
        assert_eq!(tf.h(2.0), 0.0);
        assert!(tf.h(2.0 - 1e-9).abs() < 1e-12);
        let (h0, h2) = tf.h_derivs_at_zero();
        assert!((h0 - 1.0).abs() < 1e-15 && (h2 + PI * PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn h_matches_direct_autocorrelation() {
        let tf = TestFunction::new(1.5, vec![0.7, 0.2, -0.3, 0.05]).unwrap();
        for &l in &[0.0, 0.3, 1.1, 2.2, 2.9] {
            let quad = simpson(|y| tf.seed(y) * tf.seed(y + l), -1.5, 1.5 - l, 100_000);
            assert!((tf.h(l) - quad).abs() < 1e-10, "l = {l}");
            assert!((tf.h(-l) - tf.h(l)).abs() < 1e-15);
        }
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let h = 1e-4;
        let fd = |tf: &TestFunction, l: f64, h: f64| (tf.h(l + h) - 2.0 * tf.h(l) + tf.h(l - h)) / (h * h);
        let regular = TestFunction::new(2.0, vec![1.0, 0.3, -0.2, 0.1]).unwrap().regularized().unwrap();
        let exact = regular.h_derivs_at_zero().1;
        assert!(((fd(&regular, 0.0, h) - exact) / exact).abs() < 1e-6);
        // a kinked seed leaves a |l|^3 term in H, so the centred difference is
        // first order; one Richardson step removes it
        let kinked = TestFunction::new(2.0, vec![1.0, 0.3, -0.2, 0.1]).unwrap();
        let exact = kinked.h_derivs_at_zero().1;
        let rich = 2.0 * fd(&kinked, 0.0, h / 2.0) - fd(&kinked, 0.0, h);
        assert!(((rich - exact) / exact).abs() < 1e-6, "{rich} vs {exact}");
        for &l in &[0.5, 1.3, 3.1] {
            assert!((fd(&kinked, l, h) - kinked.h2(l)).abs() < 1e-6 * exact.abs());
        }
    }

    #[test]
    fn fourth_derivative_matches_finite_differences_for_regular_seed() {
        let tf = TestFunction::new(2.0, vec![1.0, 0.5, -0.2]).unwrap().regularized().unwrap();
        assert!(tf.is_regular());
        let h = 1e-3;
        for &l in &[0.4, 1.0, 2.5, 3.3] {
            let fd = (tf.h2(l + h) - 2.0 * tf.h2(l) + tf.h2(l - h)) / (h * h);
            assert!((fd - tf.h4(l)).abs() < 1e-5 * tf.h4(0.0).abs(), "l = {l}");
        }
        assert!((tf.h4(0.0) - tf.even_derivative_at_zero(2)).abs() < 1e-10 * tf.h4(0.0).abs());
    }

    #[test]
    fn regularization() {
        assert!(TestFunction::smooth(1.0).is_regular());
        assert!(!TestFunction::fejer(1.0).is_regular());
        assert!(TestFunction::fejer(1.0).regularized().is_err());
        assert!(BandTestFunction::new(&TestFunction::fejer(1.0), 1.0, 2.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TestFunction::new(0.0, vec![1.0]).is_err());
        assert!(TestFunction::new(1.0, vec![]).is_err());
        assert!(TestFunction::new(1.0, vec![0.0, 0.0]).is_err());
        assert!(TestFunction::new(1.0, vec![1.0; 9]).is_err());
        let tf = TestFunction::smooth(1.0);
        assert!(matches!(BandTestFunction::new(&tf, 1.0, 1.0), Err(TraceError::InvalidBand { .. })));
        assert!(BandTestFunction::new(&tf, 0.0, 1.0).is_err());
    }

    #[test]
    fn hhat_is_non_negative_on_grid() {
        for tf in [
            TestFunction::fejer(2.0),
            TestFunction::new(1.3, vec![1.0, -0.8, 0.6, -0.4]).unwrap(),
        ] {
            let modulated = ModulatedTestFunction::new(&tf, 0.9);
            for i in 0..=50_000 {
                let t = i as f64 * 1e-3;
                assert!(tf.h_hat(t) >= -1e-12);
                assert!(modulated.h_hat(t) >= -1e-12);
            }
        }
    }

    #[test]
    fn band_sign_outside_band() {
        let tf = TestFunction::new(2.5, vec![1.0, 0.2, 0.1]).unwrap().regularized().unwrap();
        let band = BandTestFunction::new(&tf, 0.8, 1.1).unwrap();
        for i in 0..=20_000 {
            let t = i as f64 * 1e-3;
            if !(0.8..=1.1).contains(&t) {
                assert!(band.h_hat(t) <= 1e-12, "t = {t}");
            }
        }
        assert!(band.h_hat(0.95) > 0.0);
        assert_eq!(band.h(5.0), 0.0);
        assert_eq!(band.h(6.0), 0.0);
    }

    #[test]
    fn band_function_is_linear_in_derivative_forms() {
        let tf = TestFunction::new(2.0, vec![1.0, 0.4, -0.1]).unwrap().regularized().unwrap();
        let band = BandTestFunction::new(&tf, 0.7, 1.3).unwrap();
        let (c4, c2, c0) = band.derivative_weights();
        let parts: Vec<DerivativeForm> =
            (0..3).map(|m| DerivativeForm { base: &tf, half_order: m }).collect();
        for &l in &[0.0, 0.6, 2.0, 3.7] {
            let lin = c0 * parts[0].h(l) + c2 * parts[1].h(l) + c4 * parts[2].h(l);
            assert!((lin - band.h(l)).abs() < 1e-12 * band.h(0.0).abs().max(1.0));
        }
        let lin_id = c0 * parts[0].identity_term() + c2 * parts[1].identity_term() + c4 * parts[2].identity_term();
        assert!((lin_id - band.identity_term()).abs() < 1e-10 * lin_id.abs());
    }

    fn tf_strategy() -> impl Strategy<Value = TestFunction> {
        (0.5f64..3.0, proptest::collection::vec(-1.0f64..1.0, 1..=4))
            .prop_filter_map("nonzero", |(r, mut c)| {
                c[0] += 1.5;
                TestFunction::new(r, c).ok()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fourier_pair_by_quadrature(tf in tf_strategy(), t in 0.0f64..12.0) {
            let s = tf.support();
            let quad = 2.0 * simpson(|x| tf.h(x) * (t * x).cos(), 0.0, s, 40_000);
            prop_assert!((quad - tf.h_hat(t)).abs() < 1e-8, "{} vs {}", quad, tf.h_hat(t));
        }

        #[test]
        fn fhat_is_even(tf in tf_strategy(), t in -30.0f64..30.0) {
            prop_assert!((tf.f_hat(t) - tf.f_hat(-t)).abs() <= 1e-14 * tf.f_hat(0.0).abs().max(1.0));
        }

        #[test]
        fn support_is_exact(tf in tf_strategy(), extra in 0.0f64..5.0) {
            prop_assert_eq!(tf.h(tf.support() + extra), 0.0);
            prop_assert_eq!(tf.h(-tf.support() - extra), 0.0);
        }
    }
}

//! Built-in consistency suite: the circle trace identity and its Bloch
//! decomposition, Fourier-pair checks of the test-function family, and the
//! known torsion of five mapping tori.
//!
//! Every check reports an outcome; none of them panics on a mismatch, so a
//! deliberately broken tolerance or convention shows up as a failed line.

use serde::Serialize;

use crate::homology::{word_action_with, HomologyReport, TwistConvention, TWIST_CONVENTION};
use crate::tracekit::circle::truncation_count;
use crate::tracekit::{CircleOracle, TestFunction, TraceForm};
use crate::words::TwistWord;

/// Words with known torsion in `H_1` of the mapping torus.
pub const TORSION_TABLE: [(&str, usize, &[u64]); 5] = [
    ("bcbeccadcd", 2, &[13]),
    ("CeBCdcbCDaC", 2, &[5]),
    ("dcbaBBcDDedcb", 2, &[15]),
    ("DaCaEabcdeAeCeB", 2, &[5]),
    ("EEBCFDfGCEAbDBEFCC", 3, &[2, 10]),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelftestOptions {
    /// Allowed `|spectral - geometric|` in the circle identities.
    pub trace_tolerance: f64,
    pub convention: TwistConvention,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { trace_tolerance: 1e-9, convention: TWIST_CONVENTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckOutcome>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn outcome(name: impl Into<String>, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.into(), passed, detail }
}

pub fn run(opts: &SelftestOptions) -> SelftestReport {
    let mut checks = Vec::new();
    checks.push(poisson_grid(opts.trace_tolerance));
    for n in [2, 3, 5] {
        checks.push(bloch(n, opts.trace_tolerance));
    }
    checks.extend(fourier_checks());
    for (word, genus, expected) in TORSION_TABLE {
        checks.push(torsion(word, genus, expected, opts.convention));
    }
    SelftestReport { checks }
}

fn seeds() -> [Vec<f64>; 3] {
    [vec![1.0], vec![1.0, 1.0 / 3.0], vec![1.0, -0.4, 0.2, 0.05]]
}

fn poisson_grid(tol: f64) -> CheckOutcome {
    let mut worst = 0.0f64;
    for l in [0.5, 1.0, 2.3, 5.0] {
        for theta in [0.0, 0.17, 0.5, 0.83] {
            for a in seeds() {
                let tf = TestFunction::new(2.4, a).expect("valid seed");
                let c = CircleOracle::new(l).expect("positive length");
                let (s, g) = c.trace_check(theta, &tf, truncation_count(l, &tf, 1e-13));
                worst = worst.max((s - g).abs());
            }
        }
    }
    outcome(
        "circle trace identity",
        worst < tol,
        format!("max |spectral - geometric| = {worst:.3e}, tolerance {tol:.1e}"),
    )
}

fn bloch(n: u32, tol: f64) -> CheckOutcome {
    let l = 0.8;
    let tf = TestFunction::new(2.0, vec![1.0, 0.25, -0.1]).expect("valid seed");
    let base = CircleOracle::new(l).expect("positive length");
    let cover = CircleOracle::new(n as f64 * l).expect("positive length");
    let count = truncation_count(l, &tf, 1e-13);
    let twisted: f64 = (0..n).map(|k| base.spectral_sum(k as f64 / n as f64, &tf, count)).sum();
    let direct = cover.spectral_sum(0.0, &tf, n as usize * count + n as usize);
    let err = (twisted - direct).abs();
    outcome(
        format!("Bloch decomposition n = {n}"),
        err < tol,
        format!("|cover - sum of twists| = {err:.3e}, tolerance {tol:.1e}"),
    )
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64)).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn fourier_checks() -> Vec<CheckOutcome> {
    let tf = TestFunction::new(1.5, vec![1.0, -0.3, 0.2, 0.1]).expect("valid seed");
    let r2 = tf.support();
    let mut worst = 0.0f64;
    for t in [0.0, 0.7, 2.1, 5.3] {
        // H is even and kinked only at 0 and the support edge, both endpoints here
        let quad = 2.0 * simpson(|x| tf.h(x) * (t * x).cos(), 0.0, r2, 20_000);
        worst = worst.max((quad - tf.h_hat(t)).abs());
    }
    let pair = outcome(
        "Fourier pair",
        worst < 1e-8,
        format!("max |quadrature - fhat^2| = {worst:.3e}"),
    );

    let regular = tf.regularized().expect("regular component");
    let h = 1e-4;
    let fd = (regular.h(h) - 2.0 * regular.h(0.0) + regular.h(-h)) / (h * h);
    let exact = regular.h_derivs_at_zero().1;
    let rel = ((fd - exact) / exact).abs();
    let second = outcome(
        "H''(0) finite difference",
        rel < 1e-6,
        format!("relative error {rel:.3e} at h = 1e-4"),
    );

    let min = (0..=50_000)
        .map(|i| tf.h_hat(i as f64 * 1e-3))
        .fold(f64::INFINITY, f64::min);
    let nonneg = outcome("Hhat nonnegative", min >= -1e-12, format!("min on [0, 50] = {min:.3e}"));
    vec![pair, second, nonneg]
}

fn torsion(word: &str, genus: usize, expected: &[u64], convention: TwistConvention) -> CheckOutcome {
    let name = format!("torsion of {word}");
    let w = match TwistWord::parse(word, genus) {
        Ok(w) => w,
        Err(e) => return outcome(name, false, e.to_string()),
    };
    match HomologyReport::from_action(&word_action_with(convention, &w)) {
        Ok(report) => {
            let got = report.torsion_u64();
            let passed = got.as_deref() == Some(expected);
            let got = report.torsion_factors.iter().map(ToString::to_string).collect::<Vec<_>>();
            outcome(name, passed, format!("expected {expected:?}, got [{}]", got.join(", ")))
        }
        Err(e) => outcome(name, false, e.to_string()),
    }
}

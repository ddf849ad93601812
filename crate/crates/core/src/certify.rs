//! The `J` majorant and the certificates built on it.
//!
//! For a test function `H` and a centre `x`, the modulated function
//! `H_x = H cos(x .)` has a nonnegative transform, so every term of the
//! spectral side is nonnegative and the term at `t = x` alone is bounded by
//! the whole sum:
//!
//! ```text
//! J_theta(x) = 2 G_theta(H_x) / Hhat_x(x)  >=  multiplicity of x^2.
//! ```
//!
//! A gap certificate is a `(t, theta)` grid on which `J` stays at or below
//! `m_min - margin`. It is a statement about that grid, not an
//! interval-arithmetic proof; the reported `theta`-Lipschitz bound of `J`
//! says how much room the grid spacing leaves.
//!
//! An existence certificate is a band function `(b^2 - t^2)(t^2 - a^2) Hhat`,
//! which is non-positive off `[a, b]`: a positive geometric side forces a
//! spectral parameter inside the band.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracekit::testfn::band_weights;
use crate::tracekit::{
    BandTestFunction, DerivativeForm, GeometricSide, GroupRingSeries, ModulatedTestFunction,
    TestFunction, TraceError,
};

/// Existence certificates need `G > POSITIVITY * (|A| + sum |C_n|)`.
pub const POSITIVITY: f64 = 1e-9;

/// `Hhat_x(x)` below this makes `J` meaningless.
pub const MIN_NORMALIZATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub t_max: f64,
    pub t_step: f64,
    pub theta_step: f64,
    pub margin: f64,
    /// 1, or 2 when every eigenvalue is known to have even multiplicity.
    pub m_min: u32,
    /// Twisting angles `lo, lo + theta_step, ...` up to `hi`, at most one period.
    pub theta_window: [f64; 2],
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            t_max: 1.2,
            t_step: 1e-3,
            theta_step: 1.0 / 2048.0,
            margin: 0.05,
            m_min: 1,
            theta_window: [0.0, 1.0],
        }
    }
}

impl SweepConfig {
    /// Defaults, with `m_min = 2` when the data guarantee even multiplicity.
    pub fn for_side(side: &dyn GeometricSide) -> Self {
        SweepConfig { m_min: if side.even_multiplicity() { 2 } else { 1 }, ..Default::default() }
    }

    /// Restricts the sweep to a single twisting angle.
    pub fn at_theta(mut self, theta: f64) -> Self {
        self.theta_window = [theta, theta];
        self
    }

    pub fn validate(&self) -> Result<(), CertifyError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CertifyError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("t_max", self.t_max)?;
        positive("t_step", self.t_step)?;
        positive("theta_step", self.theta_step)?;
        positive("margin", self.margin)?;
        if !(self.m_min == 1 || self.m_min == 2) {
            return Err(CertifyError::Config(format!("m_min must be 1 or 2, got {}", self.m_min)));
        }
        let [lo, hi] = self.theta_window;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(CertifyError::Config(format!(
                "theta window [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
            )));
        }
        Ok(())
    }

    /// `J` above this fails a gap certificate.
    pub fn threshold(&self) -> f64 {
        self.m_min as f64 - self.margin
    }

    /// `0, t_step, 2 t_step, ...` up to `t_max`.
    pub fn t_grid(&self) -> Vec<f64> {
        uniform_grid(self.t_step, self.t_max)
    }

    pub fn theta_grid(&self) -> Vec<f64> {
        theta_grid(self.theta_step, self.theta_window)
    }
}

fn uniform_grid(step: f64, upto: f64) -> Vec<f64> {
    let n = (upto / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn theta_grid(step: f64, [lo, hi]: [f64; 2]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let th = lo + k as f64 * step;
        if th > hi + 1e-12 || th - lo >= 1.0 - 1e-12 {
            break;
        }
        out.push(th);
        k += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertKind {
    GapLowerBound,
    EigenvalueExists,
    DeltaInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    Certified,
    Inconclusive,
}

/// `[lo, hi]`; an open upper end is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub theta: f64,
    pub t: Option<f64>,
    pub value: f64,
}

/// A grid location and the value of `J` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub theta: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub initial_objective: f64,
    pub objective: f64,
    pub objective_band: [f64; 2],
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertResult {
    pub kind: CertKind,
    pub status: CertStatus,
    /// Spectral-parameter units `sqrt(lambda)`.
    pub interval: Interval,
    /// Eigenvalue units, for `delta_interval`.
    pub eigenvalue_interval: Option<Interval>,
    pub witness: Option<Witness>,
    pub grid_max: Option<GridPoint>,
    /// Upper bound on `|dJ/dtheta|` over the swept `t`.
    pub theta_lipschitz: Option<f64>,
    pub threshold: Option<f64>,
    pub test_function: TestFunction,
    /// Regular seed used by the band certificate, when different.
    pub band_test_function: Option<TestFunction>,
    pub optimization: Option<OptimizeSummary>,
    pub config: Option<SweepConfig>,
}

impl CertResult {
    pub fn is_certified(&self) -> bool {
        self.status == CertStatus::Certified
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialise")
    }
}

/// Series of `H_x` and the normalisation `Hhat_x(x)`.
fn modulated_series(
    side: &dyn GeometricSide,
    tf: &TestFunction,
    x: f64,
) -> Result<(GroupRingSeries, f64), TraceError> {
    let m = ModulatedTestFunction::new(tf, x);
    let peak = m.peak();
    if !(peak > MIN_NORMALIZATION) {
        return Err(TraceError::DegenerateNormalization(peak));
    }
    Ok((side.series(&m)?, peak))
}

pub fn j_value(
    side: &dyn GeometricSide,
    tf: &TestFunction,
    x: f64,
    theta: f64,
) -> Result<f64, CertifyError> {
    let (s, peak) = modulated_series(side, tf, x)?;
    Ok(2.0 * s.eval(theta) / peak)
}

/// `J` on a `t x theta` grid, rows indexed by `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub ts: Vec<f64>,
    pub thetas: Vec<f64>,
    values: Vec<f64>,
    /// Per-`t` maximum over `theta`.
    pub row_max: Vec<GridPoint>,
    pub theta_lipschitz: f64,
}

impl SweepTable {
    pub fn value(&self, ti: usize, thi: usize) -> f64 {
        self.values[ti * self.thetas.len() + thi]
    }

    pub fn row(&self, ti: usize) -> &[f64] {
        let n = self.thetas.len();
        &self.values[ti * n..(ti + 1) * n]
    }

    pub fn max(&self) -> Option<GridPoint> {
        self.row_max.iter().copied().reduce(|a, b| if b.j > a.j || b.j.is_nan() { b } else { a })
    }

    /// Number of leading rows whose maximum passes the threshold.
    pub fn passing_prefix(&self, threshold: f64) -> usize {
        self.row_max.iter().take_while(|p| p.j <= threshold).count()
    }

    /// CSV with columns `t,theta,J`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,theta,J")?;
        for (i, t) in self.ts.iter().enumerate() {
            for (j, th) in self.thetas.iter().enumerate() {
                writeln!(w, "{t},{th},{}", self.value(i, j))?;
            }
        }
        Ok(())
    }
}

fn sweep_grid(
    side: &dyn GeometricSide,
    tf: &TestFunction,
    ts: Vec<f64>,
    thetas: Vec<f64>,
) -> Result<SweepTable, CertifyError> {
    let rows: Vec<(Vec<f64>, GridPoint, f64)> = ts
        .par_iter()
        .map(|&t| {
            let (s, peak) = modulated_series(side, tf, t)?;
            let row: Vec<f64> = thetas.iter().map(|&th| 2.0 * s.eval(th) / peak).collect();
            let mut best = GridPoint { t, theta: f64::NAN, j: f64::NEG_INFINITY };
            for (&th, &j) in thetas.iter().zip(&row) {
                // NaN never passes a certificate
                if j > best.j || j.is_nan() {
                    best = GridPoint { t, theta: th, j };
                    if j.is_nan() {
                        break;
                    }
                }
            }
            Ok((row, best, 2.0 * s.lipschitz_bound() / peak))
        })
        .collect::<Result<_, TraceError>>()?;
    let mut values = Vec::with_capacity(ts.len() * thetas.len());
    let mut row_max = Vec::with_capacity(ts.len());
    let mut theta_lipschitz = 0.0f64;
    for (row, best, lip) in rows {
        values.extend(row);
        row_max.push(best);
        theta_lipschitz = theta_lipschitz.max(lip);
    }
    Ok(SweepTable { ts, thetas, values, row_max, theta_lipschitz })
}

/// `J` over `t in [0, t_max]` and the configured twisting angles. One
/// geometric pass per `t`; the resulting series serves every `theta`.
pub fn j_sweep(
    side: &dyn GeometricSide,
    tf: &TestFunction,
    cfg: &SweepConfig,
) -> Result<SweepTable, CertifyError> {
    cfg.validate()?;
    sweep_grid(side, tf, cfg.t_grid(), cfg.theta_grid())
}

/// Certifies `lambda >= delta_candidate` for every coexact eigenvalue at
/// every swept twist. The `t` grid runs up to and includes `sqrt(delta)`.
pub fn certify_gap(
    side: &dyn GeometricSide,
    tf: &TestFunction,
    delta_candidate: f64,
    cfg: &SweepConfig,
) -> Result<CertResult, CertifyError> {
    cfg.validate()?;
    if !(delta_candidate >= 0.0 && delta_candidate.is_finite()) {
        return Err(CertifyError::Precondition(format!(
            "delta candidate must be non-negative, got {delta_candidate}"
        )));
    }
    let root = delta_candidate.sqrt();
    let mut result = CertResult {
        kind: CertKind::GapLowerBound,
        status: CertStatus::Certified,
        interval: Interval { lo: root, hi: None },
        eigenvalue_interval: Some(Interval { lo: delta_candidate, hi: None }),
        witness: None,
        grid_max: None,
        theta_lipschitz: None,
        threshold: Some(cfg.threshold()),
        test_function: tf.clone(),
        band_test_function: None,
        optimization: None,
        config: Some(cfg.clone()),
    };
    if delta_candidate == 0.0 {
        // nothing to check: every eigenvalue is >= 0
        return Ok(result);
    }
    let mut ts: Vec<f64> = uniform_grid(cfg.t_step, root).into_iter().filter(|&t| t < root).collect();
    ts.push(root);
    let table = sweep_grid(side, tf, ts, cfg.theta_grid())?;
    let max = table.max();
    result.grid_max = max;
    result.theta_lipschitz = Some(table.theta_lipschitz);
    result.witness = max.map(|p| Witness { theta: p.theta, t: Some(p.t), value: p.j });
    if table.passing_prefix(cfg.threshold()) < table.ts.len() {
        result.status = CertStatus::Inconclusive;
    }
    Ok(result)
}

fn band_series(
    side: &dyn GeometricSide,
    base: &TestFunction,
) -> Result<[GroupRingSeries; 3], TraceError> {
    let s = |half_order| side.series(&DerivativeForm { base, half_order });
    Ok([s(0)?, s(1)?, s(2)?])
}

/// Certifies a coexact eigenvalue with `sqrt(lambda)` in `[a, b]` at twist `theta`.
/// The seed must have a continuous derivative.
pub fn certify_existence(
    side: &dyn GeometricSide,
    tf: &TestFunction,
    band: (f64, f64),
    theta: f64,
) -> Result<CertResult, CertifyError> {
    let (a, b) = band;
    let form = BandTestFunction::new(tf, a, b)?;
    let series = side.series(&form)?;
    let value = series.eval(theta);
    let certified = value > POSITIVITY * series.abs_scale();
    Ok(CertResult {
        kind: CertKind::EigenvalueExists,
        status: if certified { CertStatus::Certified } else { CertStatus::Inconclusive },
        interval: Interval { lo: a, hi: Some(b) },
        eigenvalue_interval: Some(Interval { lo: a * a, hi: Some(b * b) }),
        witness: Some(Witness { theta, t: None, value }),
        grid_max: None,
        theta_lipschitz: Some(series.lipschitz_bound()),
        threshold: Some(POSITIVITY * series.abs_scale()),
        test_function: tf.clone(),
        band_test_function: None,
        optimization: None,
        config: None,
    })
}

/// Knobs of the coefficient search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Coordinate passes per start.
    pub max_passes: usize,
    pub initial_step: f64,
    pub min_step: f64,
    /// Coarse grid used for the objective.
    pub t_step: f64,
    pub theta_step: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            seed: 0x5eed,
            restarts: 3,
            max_passes: 30,
            initial_step: 0.25,
            min_step: 1e-3,
            t_step: 1e-2,
            theta_step: 1.0 / 128.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub test_function: TestFunction,
    pub summary: OptimizeSummary,
}

/// Minimises the grid maximum of `J` over `t` in `objective_band` and the
/// configured twists, by coordinate descent with seeded random restarts,
/// starting from `start`. Keeps the best point seen, so the objective never
/// exceeds that of `start`.
pub fn optimize_coeffs(
    side: &dyn GeometricSide,
    start: &TestFunction,
    objective_band: (f64, f64),
    cfg: &SweepConfig,
    opt: &OptimizeConfig,
) -> Result<OptimizeResult, CertifyError> {
    cfg.validate()?;
    let (lo, hi) = objective_band;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(CertifyError::Precondition(format!("objective band [{lo}, {hi}] is empty")));
    }
    let mut ts: Vec<f64> = uniform_grid(opt.t_step, hi - lo).into_iter().map(|t| lo + t).collect();
    if ts.last().map_or(true, |&t| t < hi) {
        ts.push(hi);
    }
    let thetas = theta_grid(opt.theta_step, cfg.theta_window);
    let mut evaluations = 0usize;
    let mut objective = |coeffs: &[f64]| -> f64 {
        evaluations += 1;
        start
            .with_coeffs(coeffs.to_vec())
            .ok()
            .and_then(|tf| sweep_grid(side, &tf, ts.clone(), thetas.clone()).ok())
            .and_then(|table| table.max())
            .map(|p| if p.j.is_nan() { f64::INFINITY } else { p.j })
            .unwrap_or(f64::INFINITY)
    };

    let initial_objective = objective(start.coeffs());
    let mut best = (start.coeffs().to_vec(), initial_objective);
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    for restart in 0..=opt.restarts {
        let mut x = best.0.clone();
        if restart > 0 {
            for c in x.iter_mut() {
                *c += rng.gen_range(-0.5..0.5);
            }
        }
        normalize(&mut x);
        let mut fx = objective(&x);
        let mut step = opt.initial_step;
        for _ in 0..opt.max_passes {
            let mut improved = false;
            for i in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += dir * step;
                    normalize(&mut y);
                    let fy = objective(&y);
                    if fy < fx {
                        (x, fx, improved) = (y, fy, true);
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < opt.min_step {
                    break;
                }
            }
        }
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let test_function = start.with_coeffs(best.0)?;
    Ok(OptimizeResult {
        test_function,
        summary: OptimizeSummary {
            initial_objective,
            objective: best.1,
            objective_band: [lo, hi],
            evaluations,
        },
    })
}

/// Scale so the largest coefficient has modulus one; `J` does not see it.
fn normalize(c: &mut [f64]) {
    let m = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        c.iter_mut().for_each(|v| *v /= m);
    }
}

/// Settings for the full two-sided pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaOptions {
    /// `R1`; defaults to half the geodesic cutoff.
    pub half_support: Option<f64>,
    pub coeff_count: usize,
    pub optimizer: OptimizeConfig,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions { half_support: None, coeff_count: 4, optimizer: OptimizeConfig::default() }
    }
}

/// Lower band endpoints tried as fractions of the upper one.
const BAND_FRACTIONS: [f64; 5] = [0.25, 0.5, 0.75, 0.9, 0.97];

/// Two-sided interval for the infimum over the swept twists of the first
/// coexact eigenvalue.
///
/// The lower end is the last `t` on the sweep grid up to which every row of
/// `J` passes (the largest `delta` that `certify_gap` certifies on this
/// grid); the upper end is the smallest `b^2` over band certificates found by
/// scanning `theta` and `b` along the sweep grid.
pub fn delta_interval(
    side: &dyn GeometricSide,
    cfg: &SweepConfig,
    opts: &DeltaOptions,
) -> Result<CertResult, CertifyError> {
    cfg.validate()?;
    let half_support = match (opts.half_support, side.cutoff()) {
        (Some(r), _) => r,
        (None, Some(c)) => 0.5 * c,
        (None, None) => {
            return Err(CertifyError::Precondition(
                "the geometric side has no cutoff; give a half support".into(),
            ))
        }
    };
    let mut coeffs = vec![0.0; opts.coeff_count.max(1)];
    coeffs[0] = 1.0;
    let start = TestFunction::new(half_support, coeffs)?;

    // 1. coefficients
    let coarse = sweep_grid(
        side,
        &start,
        uniform_grid(opts.optimizer.t_step, cfg.t_max),
        theta_grid(opts.optimizer.theta_step, cfg.theta_window),
    )?;
    let pass = coarse.passing_prefix(cfg.threshold());
    let band_hi = coarse.ts[pass.min(coarse.ts.len() - 1)];
    let optimized = optimize_coeffs(side, &start, (0.0, band_hi), cfg, &opts.optimizer)?;

    // 2. lower end: whichever seed certifies further on the full grid
    let thetas = cfg.theta_grid();
    let mut best: Option<(SweepTable, TestFunction, usize)> = None;
    for tf in [&optimized.test_function, &start] {
        let table = sweep_grid(side, tf, cfg.t_grid(), thetas.clone())?;
        let pass = table.passing_prefix(cfg.threshold());
        if best.as_ref().map_or(true, |(_, _, p)| pass > *p) {
            best = Some((table, tf.clone(), pass));
        }
    }
    let (table, gap_tf, pass) = best.expect("two candidates");
    let root_lo = if pass == 0 { 0.0 } else { table.ts[pass - 1] };
    let lo_max = table.row_max[..pass].iter().copied().reduce(|a, b| if b.j > a.j { b } else { a });

    // 3. upper end
    let band_tf = gap_tf
        .regularized()
        .or_else(|_| optimized.test_function.regularized())
        .unwrap_or_else(|_| TestFunction::smooth(half_support));
    let upper = smallest_band(side, &band_tf, &table.ts, &thetas)?;

    let mut result = CertResult {
        kind: CertKind::DeltaInterval,
        status: CertStatus::Inconclusive,
        interval: Interval { lo: root_lo, hi: None },
        eigenvalue_interval: Some(Interval { lo: root_lo * root_lo, hi: None }),
        witness: None,
        grid_max: lo_max,
        theta_lipschitz: Some(table.theta_lipschitz),
        threshold: Some(cfg.threshold()),
        test_function: gap_tf,
        band_test_function: Some(band_tf),
        optimization: Some(optimized.summary),
        config: Some(cfg.clone()),
    };
    if let Some(cert) = upper {
        let b = cert.interval.hi.expect("band certificates are bounded");
        result.status = CertStatus::Certified;
        result.interval.hi = Some(b);
        result.eigenvalue_interval = Some(Interval { lo: root_lo * root_lo, hi: Some(b * b) });
        result.witness = cert.witness.map(|w| Witness { t: Some(b), ..w });
    }
    Ok(result)
}

/// Band certificate with the smallest upper end `b` from the grid `ts`.
fn smallest_band(
    side: &dyn GeometricSide,
    base: &TestFunction,
    ts: &[f64],
    thetas: &[f64],
) -> Result<Option<CertResult>, CertifyError> {
    let [s0, s2, s4] = band_series(side, base)?;
    let scales = [s0.abs_scale(), s2.abs_scale(), s4.abs_scale()];
    // per theta, the first b that passes under a conservative scale bound
    let mut candidates: Vec<(f64, f64, f64)> = thetas
        .par_iter()
        .filter_map(|&theta| {
            let g = [s0.eval(theta), s2.eval(theta), s4.eval(theta)];
            ts.iter().filter(|&&b| b > 0.0).find_map(|&b| {
                BAND_FRACTIONS.iter().find_map(|&f| {
                    let (c4, c2, c0) = band_weights(f * b, b);
                    let value = c0 * g[0] + c2 * g[1] + c4 * g[2];
                    let bound = c0.abs() * scales[0] + c2.abs() * scales[1] + c4.abs() * scales[2];
                    (value > POSITIVITY * bound).then_some((b, f * b, theta))
                })
            })
        })
        .collect();
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.total_cmp(&y.2)));
    for (b, a, theta) in candidates {
        let cert = certify_existence(side, base, (a, b), theta)?;
        if cert.is_certified() {
            return Ok(Some(cert));
        }
    }
    Ok(None)
}

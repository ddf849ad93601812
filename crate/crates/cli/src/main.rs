//! `gapcert`: word screening, dataset validation, gap certification and the
//! built-in self-test.
//!
//! Exit codes: 0 success or certified, 1 screen failure or inconclusive,
//! 2 usage or validation error.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gapcert::certify::{
    certify_existence, certify_gap, delta_interval, j_sweep, CertResult, DeltaOptions,
    OptimizeConfig, SweepConfig,
};
use gapcert::homology::{screen, ScreenReport};
use gapcert::selftest::{self, SelftestOptions};
use gapcert::spectra::SpectrumDataset;
use gapcert::tracekit::{CircleOracle, GeometricSide, SpectralGeometry, TestFunction};
use gapcert::words::TwistWord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(name = "gapcert", version, about = "Certified coexact spectral gaps of mapping-torus covers")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Screen a twist word: reverse-palindromic test, homology action, torsion.
    WordCheck {
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 2)]
        genus: usize,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print random reverse-palindromic words that pass the screen.
    WordSearch {
        #[arg(long, default_value_t = 2)]
        genus: usize,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Give up after this many draws per requested word.
        #[arg(long, default_value_t = 10_000)]
        attempts: usize,
    },
    /// Load and check a spectrum dataset, optionally against a word's homology.
    Validate {
        #[arg(long)]
        spectrum: PathBuf,
        /// Cross-check `torsion_order` against this word's screen.
        #[arg(long)]
        word: Option<String>,
        #[arg(long, default_value_t = 2)]
        genus: usize,
    },
    /// Gap, existence or two-sided certificates.
    Certify(CertifyArgs),
    /// Circle-model identities, Fourier-pair checks and known torsion.
    Selftest {
        /// Tolerance for the circle identities.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Gap,
    Exists,
    Delta,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Spectrum dataset (text or JSON).
    #[arg(long, conflicts_with = "circle", required_unless_present = "circle")]
    spectrum: Option<PathBuf>,
    /// Use the exactly solvable circle of this length instead of a dataset.
    #[arg(long)]
    circle: Option<f64>,
    /// Eigenvalue candidate for `gap` mode.
    #[arg(long)]
    delta: Option<f64>,
    /// Band `a,b` in spectral-parameter units for `exists` mode.
    #[arg(long, value_delimiter = ',')]
    band: Option<Vec<f64>>,
    /// Single twisting angle.
    #[arg(long, conflicts_with = "theta_window")]
    theta: Option<f64>,
    /// Twisting-angle window `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    theta_window: Option<Vec<f64>>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    tstep: Option<f64>,
    #[arg(long)]
    theta_step: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    mmin: Option<u32>,
    /// `R1`, half the test-function support (default: half the cutoff).
    #[arg(long)]
    half_support: Option<f64>,
    /// Seed coefficients `a_0,a_1,...` for `gap` and `exists`.
    #[arg(long, value_delimiter = ',')]
    coeffs: Option<Vec<f64>>,
    /// Number of coefficients optimised in `delta` mode.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write the result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the `t,theta,J` sweep table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(PathBuf, io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("pool builds once");
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::WordCheck { word, genus, out } => word_check(&word, genus, out.as_deref()),
        Command::WordSearch { genus, length, count, seed, attempts } => {
            word_search(genus, length, count, seed, attempts)
        }
        Command::Validate { spectrum, word, genus } => validate(&spectrum, word.as_deref(), genus),
        Command::Certify(args) => certify(args),
        Command::Selftest { tolerance } => {
            let report = selftest::run(&SelftestOptions { trace_tolerance: tolerance, ..Default::default() });
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn print_screen(r: &ScreenReport) {
    println!("word: {}", if r.word.is_empty() { "(identity)" } else { &r.word });
    println!("genus: {}", r.genus);
    println!("reverse palindromic: {}", r.reverse_palindromic);
    println!("phi_* on H_1:");
    for row in r.action.to_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>4}")).collect();
        println!("  [{}]", cells.join(" "));
    }
    let torsion: Vec<String> = r.homology.torsion_factors.iter().map(ToString::to_string).collect();
    println!("torsion factors: [{}]", torsion.join(", "));
    println!("b1 of mapping torus is 1: {}", r.homology.b1_cover_ok);
    println!("no eigenvalues on the unit circle: {}", r.homology.unit_circle_free);
    println!("conjugation identity: {}", r.conjugation_identity);
    println!("screen: {}", if r.pass() { "pass" } else { "fail" });
}

fn word_check(word: &str, genus: usize, out: Option<&Path>) -> Result<u8, CliError> {
    let w = TwistWord::parse(word, genus).map_err(usage)?;
    let report = screen(&w);
    print_screen(&report);
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(&report).expect("report serialises");
        write_file(p, &text)?;
    }
    Ok(if report.pass() { 0 } else { 1 })
}

fn word_search(genus: usize, length: usize, count: usize, seed: u64, attempts: usize) -> Result<u8, CliError> {
    if length == 0 && count > 0 {
        return Err(CliError::Usage("--length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let budget = attempts.saturating_mul(count);
    let mut draws = 0;
    while seen.len() < count && draws < budget {
        draws += 1;
        let w = TwistWord::random_reverse_palindromic_with(genus, length, &mut rng).map_err(usage)?;
        if seen.contains(&w) {
            continue;
        }
        let r = screen(&w);
        if r.pass() {
            let torsion: Vec<String> = r.homology.torsion_factors.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{w}\ttorsion=[{}]", torsion.join(","));
            let _ = out.flush();
            seen.insert(w);
        }
    }
    if seen.len() < count {
        eprintln!("found {} of {count} words in {draws} draws", seen.len());
        return Ok(1);
    }
    Ok(0)
}

fn load_dataset(path: &Path) -> Result<SpectrumDataset, CliError> {
    let f = File::open(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    SpectrumDataset::load(f).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn validate(path: &Path, word: Option<&str>, genus: usize) -> Result<u8, CliError> {
    let d = load_dataset(path)?;
    if let Some(word) = word {
        let report = screen(&TwistWord::parse(word, genus).map_err(usage)?);
        if !report.homology.b1_cover_ok {
            return Err(CliError::Usage(format!("{word}: mapping torus has b1 > 1")));
        }
        let order = report.homology.det_abs.to_string();
        match d.torsion_order {
            Some(t) if t.to_string() != order => {
                return Err(CliError::Usage(format!(
                    "torsion_order {t} disagrees with |H_1 torsion| = {order} of {word}"
                )))
            }
            Some(_) => println!("torsion order matches {word}: {order}"),
            None => println!("dataset has no torsion_order; {word} gives {order}"),
        }
    }
    let (n, warnings) = d.normalized();
    println!("name: {}", n.name);
    println!("volume: {}", n.volume);
    println!("cutoff_R: {}", n.cutoff_r);
    println!("even multiplicity: {}", n.even_multiplicity);
    println!("primitive geodesics: {}", n.primitives.len());
    println!("expanded terms: {}", n.expand_powers().len());
    for w in warnings {
        println!("warning: {w}");
    }
    Ok(0)
}

fn sweep_config(args: &CertifyArgs, side: &dyn GeometricSide) -> Result<SweepConfig, CliError> {
    let mut cfg = SweepConfig::for_side(side);
    if let Some(v) = args.tmax {
        cfg.t_max = v;
    }
    if let Some(v) = args.tstep {
        cfg.t_step = v;
    }
    if let Some(v) = args.theta_step {
        cfg.theta_step = v;
    }
    if let Some(v) = args.margin {
        cfg.margin = v;
    }
    if let Some(m) = args.mmin {
        if m == 2 && !side.even_multiplicity() {
            return Err(CliError::Usage(
                "--mmin 2 requires a dataset with even_multiplicity = true".into(),
            ));
        }
        cfg.m_min = m;
    }
    if let Some(th) = args.theta {
        if !(0.0..1.0).contains(&th) {
            return Err(CliError::Usage(format!("--theta must lie in [0, 1), got {th}")));
        }
        cfg = cfg.at_theta(th);
    }
    if let Some(w) = &args.theta_window {
        let [lo, hi] = w[..] else {
            return Err(CliError::Usage("--theta-window takes two values lo,hi".into()));
        };
        cfg.theta_window = [lo, hi];
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn test_function(args: &CertifyArgs, side: &dyn GeometricSide, regular: bool) -> Result<TestFunction, CliError> {
    let r = match (args.half_support, side.cutoff()) {
        (Some(r), _) => r,
        (None, Some(c)) => 0.5 * c,
        (None, None) => return Err(CliError::Usage("--half-support is required with --circle".into())),
    };
    let tf = match &args.coeffs {
        Some(c) => TestFunction::new(r, c.clone()).map_err(usage)?,
        None => TestFunction::smooth(r),
    };
    if regular && !tf.is_regular() {
        return Err(CliError::Usage(
            "band certificates need coefficients with sum (-1)^k (2k+1) a_k = 0".into(),
        ));
    }
    Ok(tf)
}

fn certify(args: CertifyArgs) -> Result<u8, CliError> {
    let dataset = args.spectrum.as_deref().map(load_dataset).transpose()?;
    let side: Box<dyn GeometricSide> = match (&dataset, args.circle) {
        (Some(d), _) => Box::new(SpectralGeometry::new(d)),
        (None, Some(l)) => Box::new(CircleOracle::new(l).map_err(usage)?),
        (None, None) => unreachable!("clap requires one input"),
    };
    let side = side.as_ref();
    let cfg = sweep_config(&args, side)?;

    let result: CertResult = match args.mode {
        Mode::Gap => {
            let delta = args.delta.ok_or_else(|| CliError::Usage("gap mode needs --delta".into()))?;
            let tf = test_function(&args, side, false)?;
            certify_gap(side, &tf, delta, &cfg).map_err(usage)?
        }
        Mode::Exists => {
            let band = match args.band.as_deref() {
                Some(&[a, b]) if a > 0.0 && b > a => (a, b),
                Some(_) => return Err(CliError::Usage("--band needs a,b with 0 < a < b".into())),
                None => return Err(CliError::Usage("exists mode needs --band a,b".into())),
            };
            let theta = args.theta.ok_or_else(|| CliError::Usage("exists mode needs --theta".into()))?;
            let tf = test_function(&args, side, true)?;
            certify_existence(side, &tf, band, theta).map_err(usage)?
        }
        Mode::Delta => {
            let opts = DeltaOptions {
                half_support: args.half_support,
                coeff_count: args.k,
                optimizer: OptimizeConfig { seed: args.seed, ..Default::default() },
            };
            if args.half_support.is_none() && side.cutoff().is_none() {
                return Err(CliError::Usage("--half-support is required with --circle".into()));
            }
            delta_interval(side, &cfg, &opts).map_err(usage)?
        }
    };

    if let Some(path) = &args.csv {
        let table = j_sweep(side, &result.test_function, &cfg).map_err(usage)?;
        let f = File::create(path).map_err(|e| CliError::Io(path.clone(), e))?;
        table.write_csv(BufWriter::new(f)).map_err(|e| CliError::Io(path.clone(), e))?;
    }

    let input = match (&args.spectrum, args.circle) {
        (Some(p), _) => json!({ "spectrum": p.display().to_string() }),
        (None, Some(l)) => json!({ "circle_length": l }),
        _ => json!(null),
    };
    let doc = json!({ "input": input, "mode": format!("{:?}", args.mode).to_lowercase(), "seed": args.seed, "result": result });
    let text = serde_json::to_string_pretty(&doc).expect("result serialises");
    match &args.out {
        Some(p) => write_file(p, &text)?,
        None => println!("{text}"),
    }
    print_summary(&result);
    Ok(if result.is_certified() { 0 } else { 1 })
}

fn print_summary(r: &CertResult) {
    let hi = r.interval.hi.map_or("inf".to_string(), |h| format!("{h:.6}"));
    eprintln!(
        "{:?}: {:?}, sqrt(lambda) in [{:.6}, {hi}]",
        r.kind, r.status, r.interval.lo
    );
}

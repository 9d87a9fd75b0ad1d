//! `bergman-lab`: generate sequences, measure densities and norms, solve
//! interpolation problems, estimate frame bounds, run the inequality suite and
//! the density-dichotomy experiments.
//!
//! Structured output goes to files under `--out`; stdout carries a short human
//! summary. Exit codes: 0 ran, 1 invariant violation detected, 2 usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bergman_lab::experiment::{
    interpolation_dichotomy, sampling_dichotomy, separation_necessity, ExperimentBody,
    ExperimentConfig, ExperimentReport,
};
use bergman_lab::funcspace::{
    config_hash, mixed_norm, triple_norm, write_norm_csv, AnalyticFunction, NormRecord, QuadConfig,
    SpaceParams,
};
use bergman_lab::hyperbolic::{DiscPoint, Partition};
use bergman_lab::interp::{
    build_g_system, contraction_norm, default_exponent, iterative_interpolant, SeriesSolver,
};
use bergman_lab::sampling::frame_bounds;
use bergman_lab::seqlab::{
    density, discreteness_report, generate_lattice_with, DensityKind, PointSequence, RingOffset,
    ZetaStrategy, DEFAULT_SCHEDULE,
};
use bergman_lab::verify::{run_suite, write_summary_csv, SuiteCheck};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lab(#[from] bergman_lab::Error),
    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use bergman_lab::Error as E;
        match self {
            CliError::Usage(_) | CliError::File { .. } => 2,
            CliError::Lab(E::InvalidParameter(_) | E::ParameterViolation(_) | E::EmptySchedule) => {
                2
            }
            CliError::Lab(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "bergman-lab",
    version,
    about = "Interpolation and sampling in mixed-norm Bergman spaces"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Inner (angular) exponent [default: 2].
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Outer (radial) exponent [default: 2].
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Partition base, rings at `1 - L^-j` [default: 2].
    #[arg(long = "L", global = true)]
    l: Option<u32>,
    /// Number of rings [default: 16].
    #[arg(long, global = true)]
    levels: Option<u32>,
    /// [default: 1]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Degree schedule, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// Density targets in units of `1/q`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    target: Option<Vec<f64>>,
    /// Tolerance: calibration tolerance (units of `1/q`) or residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

impl Global {
    fn p(&self) -> f64 {
        self.p.unwrap_or(2.0)
    }

    fn q(&self) -> f64 {
        self.q.unwrap_or(2.0)
    }

    fn l(&self) -> u32 {
        self.l.unwrap_or(2)
    }

    fn levels(&self) -> u32 {
        self.levels.unwrap_or(16)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn r_max(&self) -> f64 {
        1.0 - (self.l() as f64).powi(-(self.levels() as i32))
    }

    /// Flags given on the command line override `cfg`.
    fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(q) = self.q {
            cfg.q = q;
        }
        if let Some(l) = self.l {
            cfg.l = l;
        }
        if let Some(levels) = self.levels {
            cfg.levels = levels;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(s) = &self.schedule {
            cfg.degree_schedule = s.clone();
        }
        if let Some(t) = &self.target {
            cfg.density_targets = t.clone();
        }
        if let Some(t) = self.tol {
            cfg.tolerance = t;
        }
        cfg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a lattice, or calibrate one to a single `--target`.
    Gen {
        #[arg(long, default_value_t = 0.8)]
        sigma: f64,
        /// Lattice constant; ignored when `--target` is given.
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, value_enum, default_value_t = Offset::Golden)]
        offset: Offset,
        /// Density the target refers to.
        #[arg(long, value_enum, default_value_t = Kind::Upper)]
        kind: Kind,
    },
    /// Upper or lower density of a sequence.
    Density {
        sequence: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Upper)]
        kind: Kind,
        /// Radii of the extrapolation schedule; fitted to the truncation when omitted.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Separation constant and the discreteness bounds.
    Separation {
        sequence: PathBuf,
        #[arg(long, default_value_t = 200)]
        probes: usize,
    },
    /// Mixed and discrete norms of a function.
    Norm { function: PathBuf },
    /// Interpolate data on a sequence with the corrected kernel series.
    Interpolate {
        sequence: PathBuf,
        /// JSON list of `[re, im]` values, one per point of the sequence file.
        data: PathBuf,
        /// Growth exponent of the g-system.
        #[arg(long, default_value_t = 0.5)]
        n: f64,
        #[arg(long, default_value_t = 0.95)]
        r_cut: f64,
        /// Kernel exponent; the smallest certified one when omitted.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Also write the interpolant to `function.json`.
        #[arg(long)]
        function: bool,
    },
    /// Frame bounds of a sequence over the degree schedule.
    Sample {
        sequence: PathBuf,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Inequality suite, or the named checks.
    Verify { checks: Vec<String> },
    /// Density-dichotomy experiments.
    Experiment {
        #[arg(value_enum)]
        which: Which,
        /// Full configuration file; flags given on the command line override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Offset {
    Alternating,
    Golden,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Upper,
    Lower,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Interp,
    Sampling,
    Separation,
}

impl From<Offset> for RingOffset {
    fn from(o: Offset) -> Self {
        match o {
            Offset::Alternating => RingOffset::Alternating,
            Offset::Golden => RingOffset::Golden,
        }
    }
}

impl From<Kind> for DensityKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Upper => DensityKind::Upper,
            Kind::Lower => DensityKind::Lower,
        }
    }
}

/// Whether a command detected an invariant violation.
enum Outcome {
    Ran,
    Violation(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ran) => ExitCode::SUCCESS,
        Ok(Outcome::Violation(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<Outcome> {
    let g = &cli.global;
    let sp = SpaceParams::new(g.p(), g.q())?;
    if g.l() < 2 || g.levels() < 1 || g.levels() > 60 {
        return Err(CliError::Usage(
            "need --L >= 2 and 1 <= --levels <= 60".into(),
        ));
    }
    fs::create_dir_all(&g.out).map_err(|e| file_err(&g.out, e))?;
    match cli.command {
        Command::Gen {
            sigma,
            c,
            offset,
            kind,
        } => gen(g, sigma, c, offset.into(), kind.into()),
        Command::Density {
            sequence,
            kind,
            radii,
        } => cmd_density(g, &sequence, kind.into(), radii),
        Command::Separation { sequence, probes } => cmd_separation(g, &sequence, probes),
        Command::Norm { function } => cmd_norm(g, &sp, &function),
        Command::Interpolate {
            sequence,
            data,
            n,
            r_cut,
            s,
            max_iter,
            function,
        } => cmd_interpolate(g, &sp, &sequence, &data, n, r_cut, s, max_iter, function),
        Command::Sample { sequence, trials } => cmd_sample(g, &sp, &sequence, trials),
        Command::Verify { checks } => cmd_verify(g, &sp, &checks),
        Command::Experiment {
            which,
            config,
            trials,
        } => cmd_experiment(g, which, config, trials),
    }
}

fn file_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::File {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| file_err(path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| file_err(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value).map_err(|e| file_err(&path, e))?;
    Ok(path)
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| file_err(&path, e))
}

fn gen(
    g: &Global,
    sigma: f64,
    c: f64,
    offset: RingOffset,
    kind: DensityKind,
) -> CliResult<Outcome> {
    let seq = match g.target.as_deref() {
        None => {
            let seq = generate_lattice_with(sigma, c, g.r_max(), offset)?;
            if g.l() == 2 {
                seq
            } else {
                PointSequence::new(
                    Partition::covering(g.l(), g.r_max())?,
                    seq.points().to_vec(),
                )?
                .with_truncation(g.r_max())?
            }
        }
        Some([t]) => {
            let cfg = g.apply(ExperimentConfig {
                sigma,
                offset,
                ..Default::default()
            });
            cfg.validate()?;
            let cal = cfg.lattice(*t, kind)?;
            println!(
                "calibrated c = {:.6}, measured density {:.4}/q",
                cal.c, cal.measured
            );
            cal.sequence
        }
        Some(_) => return Err(CliError::Usage("gen takes a single --target".into())),
    };
    let path = write_json(&g.out, "sequence.json", &seq)?;
    println!(
        "{} points up to |z| = {:.6} -> {}",
        seq.len(),
        g.r_max(),
        path.display()
    );
    Ok(Outcome::Ran)
}

/// The standard radii below the truncation, or halvings of `1 - t` when fewer
/// than three of them fit.
fn fitted_radii(t: f64) -> Vec<f64> {
    let fit: Vec<f64> = DEFAULT_SCHEDULE
        .iter()
        .copied()
        .filter(|&r| r < t)
        .collect();
    if fit.len() >= 3 {
        return fit;
    }
    (1..=5)
        .map(|k| 1.0 - (1.0 - t) * 2f64.powi(6 - k))
        .filter(|&r| r > 0.5)
        .collect()
}

fn cmd_density(
    g: &Global,
    path: &Path,
    kind: DensityKind,
    radii: Option<Vec<f64>>,
) -> CliResult<Outcome> {
    let seq: PointSequence = read_json(path)?;
    let t = seq
        .truncation()
        .unwrap_or_else(|| seq.partition().last_ring());
    let radii = radii.unwrap_or_else(|| fitted_radii(t));
    let rep = density(&seq, kind, &radii, &ZetaStrategy::default())?;
    write_json(&g.out, "density.json", &rep)?;
    rep.write_csv(create(&g.out, "density.csv")?)?;
    println!(
        "{:?} density {:.5} (= {:.4}/q), fit residual {:.2e}, {} centers",
        kind,
        rep.extrapolated,
        rep.extrapolated * g.q(),
        rep.fit_residual,
        rep.zeta_candidates_used
    );
    Ok(Outcome::Ran)
}

fn cmd_separation(g: &Global, path: &Path, probes: usize) -> CliResult<Outcome> {
    let seq: PointSequence = read_json(path)?;
    let rep = discreteness_report(&seq, probes, g.seed())?;
    write_json(&g.out, "separation.json", &rep)?;
    match rep.delta {
        Some(d) => println!(
            "separation {d:.6}; mass {:.4} <= {:.4}; counting violations {}/{}",
            rep.mass_sum,
            rep.mass_bound.unwrap_or(f64::INFINITY),
            rep.counting_violations,
            rep.counting_probes
        ),
        None => println!("single point; separation undefined"),
    }
    if rep.counting_violations > 0 || rep.mass_bound.is_some_and(|b| rep.mass_sum > b) {
        return Ok(Outcome::Violation("discreteness bound exceeded".into()));
    }
    Ok(Outcome::Ran)
}

fn cmd_norm(g: &Global, sp: &SpaceParams, path: &Path) -> CliResult<Outcome> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let f = AnalyticFunction::from_json(&text)?;
    let cfg = QuadConfig::default();
    let part = Partition::new(g.l(), g.levels())?;
    let hash = config_hash(&(sp, &part, &cfg));
    let records = vec![
        NormRecord {
            norm_kind: "mixed".into(),
            p: sp.p,
            q: sp.q,
            value: mixed_norm(&f, sp, &cfg)?,
            config_hash: hash.clone(),
        },
        NormRecord {
            norm_kind: "triple".into(),
            p: sp.p,
            q: sp.q,
            value: triple_norm(&f, sp, &part, &cfg)?,
            config_hash: hash,
        },
    ];
    write_norm_csv(&records, create(&g.out, "norms.csv")?)?;
    write_json(&g.out, "norms.json", &records)?;
    for r in &records {
        println!(
            "{} norm in A({}, {}): {:.10}",
            r.norm_kind, r.p, r.q, r.value
        );
    }
    Ok(Outcome::Ran)
}

#[derive(Serialize)]
struct InterpolationSummary {
    norm_f: f64,
    residual: f64,
    iterations: usize,
    gamma: f64,
    s: f64,
    n: f64,
    residual_trace: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_interpolate(
    g: &Global,
    sp: &SpaceParams,
    seq_path: &Path,
    data_path: &Path,
    n: f64,
    r_cut: f64,
    s: Option<f64>,
    max_iter: usize,
    write_function: bool,
) -> CliResult<Outcome> {
    // data follow the order of the file, the sequence is stored sorted
    #[derive(serde::Deserialize)]
    struct RawPoints {
        points: Vec<DiscPoint>,
    }
    let raw: RawPoints = read_json(seq_path)?;
    let gamma: PointSequence = read_json(seq_path)?;
    let values: Vec<Complex64> = read_json(data_path)?;
    if values.len() != raw.points.len() {
        return Err(CliError::Usage(format!(
            "{} data values for {} points",
            values.len(),
            raw.points.len()
        )));
    }
    let mut a = vec![Complex64::new(0.0, 0.0); gamma.len()];
    for (z, v) in raw.points.iter().zip(values) {
        let i = gamma.position(*z).expect("point of the same file");
        a[i] = v;
    }
    let tol = g.tol.unwrap_or(1e-8);
    let gs = build_g_system(&gamma, n, r_cut)?;
    let s = match s {
        Some(s) => s,
        None => default_exponent(&gamma, &a, n)?,
    };
    let solver = SeriesSolver {
        gs: &gs,
        s,
        trunc_radius: 1.0,
    };
    let gamma_op = contraction_norm(&gamma, &solver)?;
    let res = iterative_interpolant(&gamma, &a, &solver, sp, tol, max_iter)?;
    let summary = InterpolationSummary {
        norm_f: res.norm_f,
        residual: res.residual,
        iterations: res.iterations,
        gamma: gamma_op,
        s,
        n,
        residual_trace: res.residual_trace.clone(),
    };
    write_json(&g.out, "interpolation.json", &summary)?;
    if write_function {
        write_json(&g.out, "function.json", &res.f)?;
    }
    println!(
        "{} points, n = {n}, s = {s}: gamma {gamma_op:.4}, {} iterations, residual {:.3e}, ||f|| = {:.6}",
        gamma.len(),
        res.iterations,
        res.residual,
        res.norm_f
    );
    // the step bound is measured in l^{2,2}, where gamma is an operator norm
    if sp.p == 2.0 && sp.q == 2.0 {
        let worst = res
            .residual_trace
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max);
        if worst > gamma_op + 1e-6 {
            return Ok(Outcome::Violation(format!(
                "residual step ratio {worst:.6} above contraction {gamma_op:.6}"
            )));
        }
    }
    Ok(Outcome::Ran)
}

fn cmd_sample(g: &Global, sp: &SpaceParams, path: &Path, trials: usize) -> CliResult<Outcome> {
    let gamma: PointSequence = read_json(path)?;
    let degrees = g.schedule.clone().unwrap_or_else(|| vec![30, 60, 90]);
    let rep = frame_bounds(&gamma, sp, &degrees, trials, g.seed())?;
    write_json(&g.out, "frame.json", &rep)?;
    rep.write_csv(create(&g.out, "frame.csv")?)?;
    for ((d, a), b) in rep.degrees.iter().zip(&rep.k1_trace).zip(&rep.k2_trace) {
        println!("degree {d:>4}: K1 {a:.6}  K2 {b:.6}");
    }
    if rep.k1_trace.iter().zip(&rep.k2_trace).any(|(a, b)| a > b) {
        return Ok(Outcome::Violation("K1 above K2".into()));
    }
    Ok(Outcome::Ran)
}

fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    while s.ends_with('_') {
        s.pop();
    }
    s
}

fn cmd_verify(g: &Global, sp: &SpaceParams, names: &[String]) -> CliResult<Outcome> {
    let checks = names
        .iter()
        .map(|n| n.parse::<SuiteCheck>())
        .collect::<Result<Vec<_>, _>>()?;
    let reports = run_suite(&checks, sp, g.seed())?;
    for (k, r) in reports.iter().enumerate() {
        write_json(&g.out, &format!("verify_{k:02}_{}.json", slug(&r.name)), r)?;
        println!(
            "{:<40} C = {:<12.6e} worst {:.4} (tol {:.2}) violations {}",
            r.name, r.c_fitted, r.worst_ratio, r.tolerance, r.violations
        );
    }
    write_summary_csv(&reports, create(&g.out, "verify_summary.csv")?)?;
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Ok(Outcome::Violation(format!(
            "{failed} checks with violations"
        )));
    }
    Ok(Outcome::Ran)
}

fn print_report(rep: &ExperimentReport) {
    println!("config {} (version {})", rep.config_hash, rep.version);
    match &rep.body {
        ExperimentBody::Interpolation { rows } | ExperimentBody::Sampling { rows, .. } => {
            for r in rows {
                let trace: Vec<String> = r.primary.iter().map(|x| format!("{x:.4}")).collect();
                println!(
                    "target {:.2}/q (measured {:.3}/q): [{}] variation {:.3} growth {:.3}{}{}",
                    r.target,
                    r.measured_density,
                    trace.join(", "),
                    r.summary.variation,
                    r.summary.growth,
                    r.verdict.map(|v| format!(" {v:?}")).unwrap_or_default(),
                    if r.consistent { "" } else { " (inconsistent)" }
                );
            }
            if let ExperimentBody::Sampling { k2_band, .. } = &rep.body {
                println!("K2 band {k2_band:.4}");
            }
        }
        ExperimentBody::Separation {
            rows, collision, ..
        } => {
            for r in rows {
                println!(
                    "eps {:<8} M separating {:.4e}  M equal {:.4e}",
                    r.eps, r.m_separating, r.m_equal
                );
            }
            println!("collision: {collision}");
        }
    }
    println!("consistent: {}", rep.consistent);
}

fn cmd_experiment(
    g: &Global,
    which: Which,
    config: Option<PathBuf>,
    trials: Option<usize>,
) -> CliResult<Outcome> {
    let base = match (&config, which) {
        (Some(p), _) => read_json(p)?,
        (None, Which::Interp) => ExperimentConfig::default(),
        (None, Which::Sampling) => ExperimentConfig::sampling(),
        (None, Which::Separation) => ExperimentConfig::separation(),
    };
    let mut cfg = g.apply(base);
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let (rep, name) = match which {
        Which::Interp => (interpolation_dichotomy(&cfg)?, "experiment_interp"),
        Which::Sampling => (sampling_dichotomy(&cfg)?, "experiment_sampling"),
        Which::Separation => (separation_necessity(&cfg)?, "experiment_separation"),
    };
    rep.write_json(create(&g.out, &format!("{name}.json"))?)?;
    rep.write_csv(create(&g.out, &format!("{name}.csv"))?)?;
    print_report(&rep);
    if !rep.consistent {
        return Ok(Outcome::Violation(
            "experiment outcome disagrees with the density threshold".into(),
        ));
    }
    Ok(Outcome::Ran)
}

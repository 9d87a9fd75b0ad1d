//! The density-dichotomy experiments and the colliding-pair experiment,
//! with reproducible reports.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::funcspace::{config_hash, lpq_norm, SpaceParams};
use crate::hyperbolic::{mobius, DiscPoint, Partition};
use crate::interp::{
    interpolation_constant, interpolation_constant_at, least_squares_interpolant, ConstantOptions,
    MinNormSystem, Objective,
};
use crate::sampling::frame_bounds;
use crate::seqlab::{
    calibrate_lattice, separation, DensityKind, LatticeOptions, PointSequence, RingOffset,
    DEFAULT_SCHEDULE,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "L")]
    pub l: u32,
    /// Lattices are truncated at `1 - L^-levels`.
    pub levels: u32,
    /// Density targets as multiples of `1/q`.
    pub density_targets: Vec<f64>,
    pub degree_schedule: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Calibration tolerance, also in units of `1/q`.
    pub tolerance: f64,
    /// Radial ratio of the lattice rings.
    pub sigma: f64,
    pub offset: RingOffset,
    /// Interpolation at degree `N` keeps the points with `1 - |z| >= kappa / N`.
    pub kappa: f64,
    /// Sampling keeps the points with `1 - |z| >= 1 / (depth * N_max)`.
    pub sampling_depth: f64,
    /// Pair distances of the colliding-pair experiment.
    pub pair_distances: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p: 2.0,
            q: 2.0,
            l: 2,
            levels: 16,
            density_targets: vec![0.35, 0.7, 1.4],
            degree_schedule: vec![30, 60, 90],
            trials: 50,
            seed: 1,
            tolerance: 0.02,
            sigma: 0.8,
            offset: RingOffset::Golden,
            kappa: 2.0,
            sampling_depth: 64.0,
            pair_distances: vec![0.1, 0.01, 0.001],
        }
    }
}

impl ExperimentConfig {
    /// Defaults for the sampling dichotomy: targets on both sides of `1/q`
    /// for the lower density.
    pub fn sampling() -> Self {
        ExperimentConfig {
            density_targets: vec![0.6, 1.4],
            ..Default::default()
        }
    }

    /// Defaults for the colliding pair: one sub-threshold lattice.
    pub fn separation() -> Self {
        ExperimentConfig {
            density_targets: vec![0.35],
            ..Default::default()
        }
    }

    pub fn space(&self) -> Result<SpaceParams> {
        SpaceParams::new(self.p, self.q)
    }

    pub fn r_max(&self) -> f64 {
        1.0 - (self.l as f64).powi(-(self.levels as i32))
    }

    pub fn validate(&self) -> Result<()> {
        self.space()?;
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.l < 2 || self.levels < 1 {
            return bad("need L >= 2 and levels >= 1");
        }
        if self.density_targets.is_empty() || self.density_targets.iter().any(|&t| !(t > 0.0)) {
            return bad("density targets must be positive");
        }
        if self.degree_schedule.is_empty()
            || self.degree_schedule[0] == 0
            || self.degree_schedule.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("degree schedule must be positive and increasing");
        }
        if self.trials == 0
            || !(self.tolerance > 0.0)
            || !(self.kappa > 0.0)
            || !(self.sampling_depth > 0.0)
        {
            return bad("trials, tolerance, kappa and sampling depth must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("sigma must lie in (0, 1)");
        }
        if self.pair_distances.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("pair distances must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    fn lattice_options(&self) -> LatticeOptions {
        LatticeOptions {
            sigma: self.sigma,
            r_max: self.r_max(),
            r_schedule: DEFAULT_SCHEDULE.to_vec(),
            offset: self.offset,
            ..Default::default()
        }
    }

    /// Calibrated lattice on the configured partition.
    pub fn lattice(&self, target: f64, kind: DensityKind) -> Result<Calibrated> {
        let cal = calibrate_lattice(
            target / self.q,
            kind,
            self.tolerance / self.q,
            &self.lattice_options(),
        )?;
        let r_max = self.r_max();
        let sequence = if self.l == 2 {
            cal.sequence
        } else {
            PointSequence::new(
                Partition::covering(self.l, r_max)?,
                cal.sequence.points().to_vec(),
            )?
            .with_truncation(r_max)?
        };
        Ok(Calibrated {
            measured: cal.measured * self.q,
            c: cal.c,
            sequence,
        })
    }
}

pub struct Calibrated {
    pub sequence: PointSequence,
    pub c: f64,
    /// Measured density in units of `1/q`.
    pub measured: f64,
}

/// Git-style object hash of a sequence's JSON form (`blob <len>\0<content>`,
/// SHA-256 object format).
pub fn sequence_hash(gamma: &PointSequence) -> String {
    let json = serde_json::to_vec(gamma).expect("sequence serializes");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", json.len()).as_bytes());
    h.update(&json);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Plateau,
    Growth,
    Unclear,
}

/// One density target of a dichotomy experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    /// Target and measured density, in units of `1/q`.
    pub target: f64,
    pub measured_density: f64,
    pub lattice_c: f64,
    pub sequence_hash: String,
    pub degrees: Vec<usize>,
    pub points_used: Vec<usize>,
    /// `M` per degree for interpolation, `K1` for sampling.
    pub primary: Vec<f64>,
    /// `K2` per degree for sampling, empty otherwise.
    pub secondary: Vec<f64>,
    pub summary: TraceSummary,
    /// Interpolation only; sampling traces are reported without a verdict
    /// since no finite truncation certifies a frame inequality.
    pub verdict: Option<Verdict>,
    /// Interpolation: the verdict is the one the density predicts.
    /// Sampling: `K1 <= K2` at every degree.
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// `max / min - 1`
    pub variation: f64,
    /// `last / first`
    pub growth: f64,
    pub strictly_decreasing: bool,
}

impl TraceSummary {
    pub fn of(trace: &[f64]) -> Self {
        TraceSummary {
            variation: relative_variation(trace),
            growth: trace[trace.len() - 1] / trace[0],
            strictly_decreasing: trace.windows(2).all(|w| w[1] < w[0]),
        }
    }
}

/// `max / min - 1`
pub fn relative_variation(trace: &[f64]) -> f64 {
    let mx = trace.iter().copied().fold(0.0, f64::max);
    let mn = trace.iter().copied().fold(f64::INFINITY, f64::min);
    mx / mn - 1.0
}

/// Plateau below 50% variation, growth at 2x from first to last degree.
pub fn interpolation_verdict(trace: &[f64]) -> Verdict {
    let (first, last) = (trace[0], trace[trace.len() - 1]);
    if last >= 2.0 * first {
        Verdict::Growth
    } else if relative_variation(trace) < 0.5 {
        Verdict::Plateau
    } else {
        Verdict::Unclear
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationRow {
    pub eps: f64,
    /// `||f|| / ||a||` for data `+1, -1` on the pair and zero elsewhere.
    pub m_separating: f64,
    /// Same with `+1, +1` on the pair.
    pub m_equal: f64,
    pub m_estimate: f64,
    pub separation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentBody {
    Interpolation {
        rows: Vec<TraceRow>,
    },
    Sampling {
        rows: Vec<TraceRow>,
        /// `max K2 / min K2` over all targets and degrees.
        k2_band: f64,
    },
    Separation {
        target: f64,
        measured_density: f64,
        degree: usize,
        rows: Vec<SeparationRow>,
        /// Outcome of the solve with the pair collapsed onto one point.
        collision: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub sequence_hashes: Vec<String>,
    #[serde(flatten)]
    pub body: ExperimentBody,
    pub consistent: bool,
}

impl ExperimentReport {
    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        match &self.body {
            ExperimentBody::Interpolation { rows } | ExperimentBody::Sampling { rows, .. } => {
                wr.write_record([
                    "target",
                    "measured_density",
                    "degree",
                    "points_used",
                    "primary",
                    "secondary",
                    "verdict",
                ])
                .map_err(io)?;
                for r in rows {
                    let verdict = match r.verdict {
                        Some(v) => serde_json::to_value(v)?
                            .as_str()
                            .unwrap_or_default()
                            .to_string(),
                        None => String::new(),
                    };
                    for (k, d) in r.degrees.iter().enumerate() {
                        wr.write_record([
                            r.target.to_string(),
                            r.measured_density.to_string(),
                            d.to_string(),
                            r.points_used[k].to_string(),
                            r.primary[k].to_string(),
                            r.secondary
                                .get(k)
                                .map(|x| x.to_string())
                                .unwrap_or_default(),
                            verdict.clone(),
                        ])
                        .map_err(io)?;
                    }
                }
            }
            ExperimentBody::Separation { rows, .. } => {
                wr.write_record(["eps", "m_separating", "m_equal", "m_estimate", "separation"])
                    .map_err(io)?;
                for r in rows {
                    wr.write_record(
                        [r.eps, r.m_separating, r.m_equal, r.m_estimate, r.separation]
                            .map(|x| x.to_string()),
                    )
                    .map_err(io)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn report(
    cfg: &ExperimentConfig,
    hashes: Vec<String>,
    body: ExperimentBody,
    consistent: bool,
) -> ExperimentReport {
    ExperimentReport {
        version: VERSION.to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        sequence_hashes: hashes,
        body,
        consistent,
    }
}

/// Calibrates one lattice per target against the upper density and traces
/// the interpolation constant over the degree schedule.
pub fn interpolation_dichotomy(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sp = cfg.space()?;
    let opts = ConstantOptions {
        objective: Objective::Mixed,
        kappa: Some(cfg.kappa),
        ..Default::default()
    };
    let rows = cfg
        .density_targets
        .par_iter()
        .map(|&t| {
            let cal = cfg.lattice(t, DensityKind::Upper)?;
            let trace = interpolation_constant(
                &cal.sequence,
                &sp,
                cfg.trials.max(20),
                &cfg.degree_schedule,
                cfg.seed,
                &opts,
            )?;
            let verdict = interpolation_verdict(&trace.m_values);
            let expected = if t < 1.0 {
                Verdict::Plateau
            } else {
                Verdict::Growth
            };
            Ok(TraceRow {
                target: t,
                measured_density: cal.measured,
                lattice_c: cal.c,
                sequence_hash: sequence_hash(&cal.sequence),
                degrees: trace.degrees,
                points_used: trace.points_used,
                summary: TraceSummary::of(&trace.m_values),
                primary: trace.m_values,
                secondary: Vec::new(),
                verdict: Some(verdict),
                consistent: verdict == expected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let consistent = rows.iter().all(|r| r.consistent);
    let hashes = rows.iter().map(|r| r.sequence_hash.clone()).collect();
    Ok(report(
        cfg,
        hashes,
        ExperimentBody::Interpolation { rows },
        consistent,
    ))
}

/// Calibrates one lattice per target against the lower density and traces
/// the frame bounds over the degree schedule on a fixed truncation.
pub fn sampling_dichotomy(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sp = cfg.space()?;
    let n_max = *cfg.degree_schedule.last().expect("validated") as f64;
    let rows = cfg
        .density_targets
        .par_iter()
        .map(|&t| {
            let cal = cfg.lattice(t, DensityKind::Lower)?;
            let gamma = cal
                .sequence
                .filter(|z| 1.0 - z.modulus() >= 1.0 / (cfg.sampling_depth * n_max))?;
            let fr = frame_bounds(
                &gamma,
                &sp,
                &cfg.degree_schedule,
                cfg.trials.max(50),
                cfg.seed,
            )?;
            let consistent = fr.k1_trace.iter().zip(&fr.k2_trace).all(|(a, b)| a <= b);
            Ok(TraceRow {
                target: t,
                measured_density: cal.measured,
                lattice_c: cal.c,
                sequence_hash: sequence_hash(&gamma),
                points_used: vec![gamma.len(); fr.degrees.len()],
                degrees: fr.degrees,
                summary: TraceSummary::of(&fr.k1_trace),
                primary: fr.k1_trace,
                secondary: fr.k2_trace,
                verdict: None,
                consistent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k2: Vec<f64> = rows
        .iter()
        .flat_map(|r| r.secondary.iter().copied())
        .collect();
    let k2_band = relative_variation(&k2) + 1.0;
    let consistent = rows.iter().all(|r| r.consistent);
    let hashes = rows.iter().map(|r| r.sequence_hash.clone()).collect();
    Ok(report(
        cfg,
        hashes,
        ExperimentBody::Sampling { rows, k2_band },
        consistent,
    ))
}

/// The lattice point that receives the partner, picked near `|z| = 1/2`.
fn pair_anchor(gamma: &PointSequence) -> Result<DiscPoint> {
    gamma
        .points()
        .iter()
        .copied()
        .min_by(|a, b| {
            (a.modulus() - 0.5)
                .abs()
                .total_cmp(&(b.modulus() - 0.5).abs())
        })
        .ok_or(Error::TooFewPoints)
}

/// `M_{z0}(eps e^{i phi})`, a point at pseudohyperbolic distance `eps` from `z0`.
pub fn partner(z0: DiscPoint, eps: f64, phi: f64) -> Result<DiscPoint> {
    Ok(mobius(z0, DiscPoint::from_polar(eps, phi)?))
}

/// Injects a partner at each pair distance next to one point of a
/// sub-threshold lattice and measures the interpolation cost of data that
/// separates the pair, at the last degree of the schedule.
pub fn separation_necessity(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sp = cfg.space()?;
    let target = cfg.density_targets[0];
    let degree = *cfg.degree_schedule.last().expect("validated");
    let cal = cfg.lattice(target, DensityKind::Upper)?;
    let base = cal
        .sequence
        .filter(|z| 1.0 - z.modulus() >= cfg.kappa / degree as f64)?;
    let z0 = pair_anchor(&base)?;
    // tangential partner, away from the radial neighbours
    let phi = z0.angle() + 0.5 * PI;
    let opts = ConstantOptions::default();
    let mut hashes = vec![sequence_hash(&base)];
    let mut rows = Vec::new();
    for &eps in &cfg.pair_distances {
        let gamma = base.with_points(&[partner(z0, eps, phi)?])?;
        hashes.push(sequence_hash(&gamma));
        let i0 = gamma.position(z0).ok_or(Error::TooFewPoints)?;
        let i1 = gamma
            .position(partner(z0, eps, phi)?)
            .ok_or(Error::TooFewPoints)?;
        let ratio = |s: f64| -> Result<f64> {
            let mut a = vec![Complex64::new(0.0, 0.0); gamma.len()];
            a[i0] = Complex64::new(1.0, 0.0);
            a[i1] = Complex64::new(s, 0.0);
            let res = least_squares_interpolant(&gamma, &a, degree, &sp, Objective::Mixed)?;
            Ok(res.norm_f / lpq_norm(&a, &gamma, &sp)?)
        };
        rows.push(SeparationRow {
            eps,
            m_separating: ratio(-1.0)?,
            m_equal: ratio(1.0)?,
            m_estimate: interpolation_constant_at(
                &gamma,
                &sp,
                degree,
                cfg.trials.max(20),
                cfg.seed,
                &opts,
            )?,
            separation: separation(&gamma)?,
        });
    }
    // the pair collapsed: the same point twice in the constraint rows
    let mut doubled = base.points().to_vec();
    doubled.push(z0);
    let w = Objective::Mixed.weights(&sp, base.partition(), degree);
    let collision = match MinNormSystem::new(&doubled, &w) {
        Err(e) => e.to_string(),
        Ok(_) => "solved".to_string(),
    };
    let consistent = separation_consistent(&rows) && collision.contains("rank deficient");
    Ok(report(
        cfg,
        hashes,
        ExperimentBody::Separation {
            target,
            measured_density: cal.measured,
            degree,
            rows,
            collision,
        },
        consistent,
    ))
}

/// The separating-data cost grows as the pair closes, by at least half the
/// ratio of the extreme distances.
pub fn separation_consistent(rows: &[SeparationRow]) -> bool {
    let mut sorted: Vec<&SeparationRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let (Some(first), Some(last)) = (sorted.first(), sorted.last()) else {
        return false;
    };
    sorted
        .windows(2)
        .all(|w| w[1].m_separating > w[0].m_separating)
        && last.m_separating / first.m_separating >= 0.5 * first.eps / last.eps
}

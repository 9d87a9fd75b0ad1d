//! Point sequences in the disc: double indexing, separation, counting,
//! Seip densities, lattice generation and perturbation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{
    hyperbolic_disk, mobius, pseudo_distance_c, CellIndex, DiscPoint, Partition,
};

/// Angle-sorted buckets, one per annulus of the partition.
#[derive(Debug, Clone, Default)]
struct SpatialIndex {
    buckets: Vec<Vec<(f64, usize)>>,
}

impl SpatialIndex {
    fn build(part: &Partition, points: &[DiscPoint], annulus: &[u32]) -> Self {
        let mut buckets = vec![Vec::new(); part.levels() as usize];
        for (i, (z, &j)) in points.iter().zip(annulus).enumerate() {
            buckets[j as usize].push((z.angle(), i));
        }
        for b in &mut buckets {
            b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        }
        SpatialIndex { buckets }
    }

    /// Indices of points that may lie in the Euclidean disk `|z - c| < radius`.
    fn candidates(&self, part: &Partition, c: Complex64, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let m = c.norm();
        let (lo, hi) = (m - radius, m + radius);
        let full = radius >= m;
        let (phi, hw) = if full {
            (0.0, PI)
        } else {
            let t = c.im.atan2(c.re);
            (t.rem_euclid(2.0 * PI), (radius / m).asin() + 1e-12)
        };
        for (j, bucket) in self.buckets.iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let j = j as u32;
            if part.ring(j + 1) <= lo || part.ring(j) >= hi {
                continue;
            }
            if full || hw >= PI {
                out.extend(bucket.iter().map(|&(_, i)| i));
                continue;
            }
            let mut push_range = |a: f64, b: f64| {
                let s = bucket.partition_point(|e| e.0 < a);
                let e = bucket.partition_point(|e| e.0 <= b);
                out.extend(bucket[s..e].iter().map(|&(_, i)| i));
            };
            let (a, b) = (phi - hw, phi + hw);
            if a < 0.0 {
                push_range(a + 2.0 * PI, 2.0 * PI);
                push_range(0.0, b);
            } else if b >= 2.0 * PI {
                push_range(a, 2.0 * PI);
                push_range(0.0, b - 2.0 * PI);
            } else {
                push_range(a, b);
            }
        }
    }
}

/// A point sequence sorted by modulus and doubly indexed against a partition.
///
/// `truncation`, when set, marks the sequence as the part of a larger
/// sequence lying in `|z| <= truncation`; density estimates only use
/// pseudohyperbolic disks that fit inside that window.
#[derive(Debug, Clone)]
pub struct PointSequence {
    partition: Partition,
    points: Vec<DiscPoint>,
    annulus: Vec<u32>,
    ordinal: Vec<usize>,
    cells: Vec<CellIndex>,
    truncation: Option<f64>,
    index: SpatialIndex,
}

#[derive(Serialize, Deserialize)]
struct SequenceFile {
    partition: Partition,
    points: Vec<DiscPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<f64>,
}

impl Serialize for PointSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SequenceFile {
            partition: self.partition,
            points: self.points.clone(),
            truncation: self.truncation,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = SequenceFile::deserialize(d)?;
        let seq = PointSequence::new(f.partition, f.points).map_err(serde::de::Error::custom)?;
        match f.truncation {
            Some(t) => seq.with_truncation(t).map_err(serde::de::Error::custom),
            None => Ok(seq),
        }
    }
}

impl PointSequence {
    pub fn new(partition: Partition, mut points: Vec<DiscPoint>) -> Result<Self> {
        points.sort_by(|a, b| {
            a.modulus()
                .total_cmp(&b.modulus())
                .then(a.angle().total_cmp(&b.angle()))
        });
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("repeated point in sequence".into()));
        }
        let cells = points
            .iter()
            .map(|&z| partition.cell_index(z))
            .collect::<Result<Vec<_>>>()?;
        let annulus: Vec<u32> = cells.iter().map(|c| c.j).collect();
        let mut ordinal = Vec::with_capacity(points.len());
        let mut count = vec![0usize; partition.levels() as usize];
        for &j in &annulus {
            count[j as usize] += 1;
            ordinal.push(count[j as usize]);
        }
        let index = SpatialIndex::build(&partition, &points, &annulus);
        Ok(PointSequence {
            partition,
            points,
            annulus,
            ordinal,
            cells,
            truncation: None,
            index,
        })
    }

    /// Builds a sequence on the smallest `L = 2` partition covering the points.
    pub fn from_points(points: Vec<DiscPoint>) -> Result<Self> {
        let m = points.iter().map(|z| z.modulus()).fold(0.0, f64::max);
        PointSequence::new(Partition::covering(2, m)?, points)
    }

    pub fn with_truncation(mut self, t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("truncation {t}")));
        }
        self.truncation = Some(t);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DiscPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> DiscPoint {
        self.points[i]
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    /// Annulus `j` of point `i`.
    pub fn annulus(&self, i: usize) -> u32 {
        self.annulus[i]
    }

    /// Double index `(j, k)`: annulus and 1-based position within it.
    pub fn double_index(&self, i: usize) -> (u32, usize) {
        (self.annulus[i], self.ordinal[i])
    }

    /// Polar rectangle holding point `i`.
    pub fn cell(&self, i: usize) -> CellIndex {
        self.cells[i]
    }

    /// Same partition and truncation, keeping the points that satisfy `keep`.
    pub fn filter<F: Fn(DiscPoint) -> bool>(&self, keep: F) -> Result<Self> {
        let pts = self.points.iter().copied().filter(|&z| keep(z)).collect();
        let mut s = PointSequence::new(self.partition, pts)?;
        s.truncation = self.truncation;
        Ok(s)
    }

    pub fn rotate(&self, phi: f64) -> Result<Self> {
        let pts = self.points.iter().map(|z| z.rotate(phi)).collect();
        let mut s = PointSequence::new(self.partition, pts)?;
        s.truncation = self.truncation;
        Ok(s)
    }

    /// Union of two sequences on this sequence's partition.
    pub fn union(&self, other: &PointSequence) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        let mut s = PointSequence::new(self.partition, pts)?;
        s.truncation = match (self.truncation, other.truncation) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        Ok(s)
    }

    pub fn with_points(&self, extra: &[DiscPoint]) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(extra);
        let mut s = PointSequence::new(self.partition, pts)?;
        s.truncation = self.truncation;
        Ok(s)
    }

    /// Position of `z` in the sequence.
    pub fn position(&self, z: DiscPoint) -> Option<usize> {
        self.points.iter().position(|&w| w == z)
    }

    /// Points with `rho(z, .) < r`, as `(index, rho)` in index order.
    pub fn within(&self, z: DiscPoint, r: f64) -> Vec<(usize, f64)> {
        let mut cand = Vec::new();
        self.within_into(z.z(), r, &mut cand)
    }

    fn within_into(&self, z: Complex64, r: f64, cand: &mut Vec<usize>) -> Vec<(usize, f64)> {
        let disk = match DiscPoint::from_complex(z).and_then(|p| hyperbolic_disk(p, r)) {
            Ok(d) => d,
            Err(_) => return Vec::new(),
        };
        // a hair of slack so boundary points are not lost to rounding
        let radius = disk.radius * (1.0 + 1e-9) + 1e-15;
        self.index
            .candidates(&self.partition, disk.center.z(), radius, cand);
        cand.sort_unstable();
        cand.iter()
            .filter_map(|&i| {
                let d = pseudo_distance_c(z, self.points[i].z());
                (d < r).then_some((i, d))
            })
            .collect()
    }
}

/// Minimum pairwise pseudohyperbolic distance.
pub fn separation(gamma: &PointSequence) -> Result<f64> {
    nearest_neighbours(gamma).map(|nn| nn.into_iter().fold(f64::INFINITY, f64::min))
}

/// Distance from each point to its nearest neighbour in the sequence.
pub fn nearest_neighbours(gamma: &PointSequence) -> Result<Vec<f64>> {
    if gamma.len() < 2 {
        return Err(Error::TooFewPoints);
    }
    const RADII: [f64; 4] = [0.5, 0.9, 0.99, 0.999];
    let nn = (0..gamma.len())
        .into_par_iter()
        .map_init(Vec::new, |cand, i| {
            let z = gamma.points[i].z();
            for r in RADII {
                let best = gamma
                    .within_into(z, r, cand)
                    .into_iter()
                    .filter(|&(k, _)| k != i)
                    .map(|(_, d)| d)
                    .fold(f64::INFINITY, f64::min);
                if best.is_finite() {
                    return best;
                }
            }
            gamma
                .points
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, w)| pseudo_distance_c(z, w.z()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(nn)
}

/// Brute-force minimum over all pairs.
pub fn separation_brute_force(gamma: &PointSequence) -> Result<f64> {
    if gamma.len() < 2 {
        return Err(Error::TooFewPoints);
    }
    let pts = gamma.points();
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(pseudo_distance_c(pts[i].z(), pts[j].z()));
        }
    }
    Ok(best)
}

/// `#(Gamma ∩ E(z, r))` with the strict inequality `rho < r`.
pub fn counting(gamma: &PointSequence, z: DiscPoint, r: f64) -> Result<usize> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("radius {r} not in (0,1)")));
    }
    Ok(gamma.within(z, r).len())
}

/// Bound `(2/delta + 1)^2 / (1 - r^2)` on the number of points in `E(z, r)`.
pub fn counting_bound(delta: f64, r: f64) -> f64 {
    (2.0 / delta + 1.0).powi(2) / (1.0 - r * r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscretenessReport {
    /// `None` for a single point.
    pub delta: Option<f64>,
    pub mass_sum: f64,
    /// `4 / delta^2`; `None` when vacuous.
    pub mass_bound: Option<f64>,
    pub counting_probes: usize,
    pub counting_violations: usize,
}

/// Checks the mass and counting bounds implied by uniform discreteness.
pub fn discreteness_report(
    gamma: &PointSequence,
    probes: usize,
    seed: u64,
) -> Result<DiscretenessReport> {
    let mass_sum: f64 = gamma.points().iter().map(|z| z.weight().powi(2)).sum();
    if gamma.len() < 2 {
        return Ok(DiscretenessReport {
            delta: None,
            mass_sum,
            mass_bound: None,
            counting_probes: 0,
            counting_violations: 0,
        });
    }
    let delta = separation(gamma)?;
    if delta <= 0.0 {
        return Err(Error::NotSeparated(delta));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let reach = gamma.partition().last_ring();
    let mut violations = 0;
    for _ in 0..probes {
        let z =
            DiscPoint::from_polar(reach * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * 2.0 * PI)?;
        let r = rng.gen_range(0.05..0.99);
        if counting(gamma, z, r)? as f64 > counting_bound(delta, r) {
            violations += 1;
        }
    }
    Ok(DiscretenessReport {
        delta: Some(delta),
        mass_sum,
        mass_bound: Some(4.0 / (delta * delta)),
        counting_probes: probes,
        counting_violations: violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    Upper,
    Lower,
}

impl std::str::FromStr for DensityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(DensityKind::Upper),
            "lower" => Ok(DensityKind::Lower),
            _ => Err(Error::InvalidParameter(format!("density kind {s}"))),
        }
    }
}

/// Which finite-`r` quotient to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DensityForm {
    /// `sum_{1/2 < rho < r} log(1/rho) / log(1/(1-r))`
    #[default]
    Logarithmic,
    /// `int_0^r n(s) ds / (2 int_0^r a(E(0,s)) ds)`, hyperbolic area normalized by `pi`.
    Integral,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZetaStrategy {
    /// Approximate size of the hyperbolic grid of centers.
    pub grid_size: usize,
    /// Also use the sequence's own points as centers.
    pub include_points: bool,
    pub form: DensityForm,
}

impl Default for ZetaStrategy {
    fn default() -> Self {
        ZetaStrategy {
            grid_size: 400,
            include_points: true,
            form: DensityForm::Logarithmic,
        }
    }
}

pub const DEFAULT_SCHEDULE: [f64; 5] = [0.99, 0.995, 0.9975, 0.99875, 0.999375];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub kind: DensityKind,
    pub r_schedule: Vec<f64>,
    pub values: Vec<f64>,
    pub extrapolated: f64,
    pub fit_residual: f64,
    pub zeta_candidates_used: usize,
}

impl DensityReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "D_r", "kind"]).map_err(csv_err)?;
        let kind = match self.kind {
            DensityKind::Upper => "upper",
            DensityKind::Lower => "lower",
        };
        for (r, d) in self.r_schedule.iter().zip(&self.values) {
            wr.write_record([r.to_string(), d.to_string(), kind.to_string()])
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Largest `|zeta|` whose disk `E(zeta, r)` stays inside `|z| <= t`.
pub fn admissible_radius(t: f64, r: f64) -> Option<f64> {
    (t > r).then(|| (t - r) / (1.0 - r * t))
}

/// Roughly `size` centers spread uniformly in hyperbolic area over `|zeta| <= cap`.
pub fn hyperbolic_grid(cap: f64, size: usize) -> Vec<DiscPoint> {
    let rings = 12usize;
    let smax = cap.atanh();
    let h = smax / rings as f64;
    let weight: f64 = (1..=rings).map(|i| (2.0 * i as f64 * h).sinh()).sum();
    let scale = (size.saturating_sub(1)) as f64 / weight;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out = vec![DiscPoint::origin()];
    for i in 1..=rings {
        let s = i as f64 * h;
        let n = ((scale * (2.0 * s).sinh()).round() as usize).max(1);
        let rad = s.tanh().min(cap);
        for k in 0..n {
            let t = golden * i as f64 + 2.0 * PI * k as f64 / n as f64;
            if let Ok(z) = DiscPoint::from_polar(rad, t) {
                out.push(z);
            }
        }
    }
    out
}

fn quotient(rhos: &[f64], r: f64, form: DensityForm) -> f64 {
    match form {
        DensityForm::Logarithmic => {
            let num: f64 = rhos
                .iter()
                .filter(|&&d| d > 0.5 && d < r)
                .map(|d| -d.ln())
                .sum();
            num / -(1.0 - r).ln()
        }
        DensityForm::Integral => {
            let num: f64 = rhos.iter().filter(|&&d| d < r).map(|d| r - d).sum();
            num / (2.0 * (r.atanh() - r))
        }
    }
}

/// Least-squares fit `y = a + b x`; returns `(a, b, rms residual)`.
pub fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    if x.len() == 1 {
        return (y[0], 0.0, 0.0);
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let res = (x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - a - b * xi).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (a, b, res)
}

/// Seip density estimate: per-`r` extremum over candidate centers, then an
/// affine extrapolation in `1 / log(1/(1-r))`.
pub fn density(
    gamma: &PointSequence,
    kind: DensityKind,
    r_schedule: &[f64],
    strategy: &ZetaStrategy,
) -> Result<DensityReport> {
    if r_schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    if gamma.is_empty() {
        return Err(Error::InvalidParameter("empty sequence".into()));
    }
    if r_schedule.windows(2).any(|w| w[0] >= w[1])
        || r_schedule.iter().any(|&r| !(r > 0.5 && r < 1.0))
    {
        return Err(Error::InvalidParameter(
            "r schedule must increase inside (1/2, 1)".into(),
        ));
    }
    let r_last = *r_schedule.last().unwrap();
    let cap = match gamma.truncation() {
        Some(t) => admissible_radius(t, r_last).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "schedule radius {r_last} reaches past the truncation {t}"
            ))
        })?,
        None => r_last,
    };
    let mut centers = hyperbolic_grid(cap, strategy.grid_size);
    if strategy.include_points {
        centers.extend(gamma.points().iter().filter(|z| z.modulus() <= cap));
    }
    let rows: Vec<Vec<f64>> = centers
        .par_iter()
        .map_init(Vec::new, |cand, zeta| {
            let rhos: Vec<f64> = gamma
                .within_into(zeta.z(), r_last, cand)
                .into_iter()
                .map(|(_, d)| d)
                .collect();
            r_schedule
                .iter()
                .map(|&r| quotient(&rhos, r, strategy.form))
                .collect()
        })
        .collect();
    let values: Vec<f64> = (0..r_schedule.len())
        .map(|k| {
            let it = rows.iter().map(|row| row[k]);
            match kind {
                DensityKind::Upper => it.fold(f64::NEG_INFINITY, f64::max),
                DensityKind::Lower => it.fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let x: Vec<f64> = r_schedule.iter().map(|&r| 1.0 / -(1.0 - r).ln()).collect();
    let (a, _, res) = affine_fit(&x, &values);
    Ok(DensityReport {
        kind,
        r_schedule: r_schedule.to_vec(),
        values,
        extrapolated: a,
        fit_residual: res,
        zeta_candidates_used: centers.len(),
    })
}

/// Angular phase of each lattice ring, as a fraction of the ring's step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingOffset {
    /// Odd rings shifted by half a step.
    #[default]
    Alternating,
    /// Ring `i` shifted by `frac(i / phi)`, so no two rings line up radially.
    Golden,
}

impl RingOffset {
    fn phase(self, i: i32) -> f64 {
        match self {
            RingOffset::Alternating => {
                if i % 2 == 1 {
                    0.5
                } else {
                    0.0
                }
            }
            RingOffset::Golden => (i as f64 * (5f64.sqrt() - 1.0) / 2.0).fract(),
        }
    }
}

/// Rings at `1 - sigma^i`, `i >= 1`, up to `r_max`, ring `i` holding
/// `ceil(c / sigma^i)` equally spaced points, odd rings offset by half a step.
pub fn generate_lattice(sigma: f64, c: f64, r_max: f64) -> Result<PointSequence> {
    generate_lattice_with(sigma, c, r_max, RingOffset::Alternating)
}

/// [`generate_lattice`] with a chosen ring phase.
pub fn generate_lattice_with(
    sigma: f64,
    c: f64,
    r_max: f64,
    offset: RingOffset,
) -> Result<PointSequence> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma {sigma} not in (0,1)"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("c = {c} must be positive")));
    }
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "r_max {r_max} not in (0,1)"
        )));
    }
    let mut pts = Vec::new();
    let mut i = 1;
    loop {
        let gap = sigma.powi(i);
        let r = 1.0 - gap;
        if r > r_max {
            break;
        }
        let m = (c / gap).ceil() as usize;
        if m > 5_000_000 {
            return Err(Error::InvalidParameter("lattice too large".into()));
        }
        let off = offset.phase(i);
        for k in 0..m {
            pts.push(DiscPoint::from_polar(
                r,
                2.0 * PI * (k as f64 + off) / m as f64,
            )?);
        }
        i += 1;
    }
    let part = Partition::covering(2, r_max)?;
    let seq = PointSequence::new(part, pts)?.with_truncation(r_max)?;
    if seq.len() >= 2 {
        let d = separation(&seq)?;
        if d < 1e-3 {
            return Err(Error::TooDense(d));
        }
    }
    Ok(seq)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeOptions {
    pub sigma: f64,
    pub r_max: f64,
    pub r_schedule: Vec<f64>,
    pub strategy: ZetaStrategy,
    #[serde(default)]
    pub offset: RingOffset,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        LatticeOptions {
            sigma: 0.5,
            r_max: 1.0 - 0.5f64.powi(16),
            r_schedule: DEFAULT_SCHEDULE.to_vec(),
            strategy: ZetaStrategy::default(),
            offset: RingOffset::Alternating,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub sequence: PointSequence,
    pub c: f64,
    pub measured: f64,
    /// `(c, measured density)` per bisection step.
    pub trace: Vec<(f64, f64)>,
}

/// Bisection on the lattice constant `c` until the measured density is
/// within `tol` of `target`.
pub fn calibrate_lattice(
    target: f64,
    kind: DensityKind,
    tol: f64,
    opts: &LatticeOptions,
) -> Result<Calibration> {
    if !(target > 0.02 && target < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "target density {target} outside (0.02, 2)"
        )));
    }
    let measure = |c: f64| -> Result<(PointSequence, f64)> {
        let seq = generate_lattice_with(opts.sigma, c, opts.r_max, opts.offset)?;
        let d = density(&seq, kind, &opts.r_schedule, &opts.strategy)?.extrapolated;
        Ok((seq, d))
    };
    let c0 = target * (1.0 / opts.sigma).ln();
    let (mut lo, mut hi) = (0.5 * c0, 2.0 * c0);
    let mut trace = Vec::new();
    for step in 0..40 {
        let c = if step == 0 { c0 } else { 0.5 * (lo + hi) };
        let (seq, d) = measure(c)?;
        trace.push((c, d));
        if (d - target).abs() <= tol {
            return Ok(Calibration {
                sequence: seq,
                c,
                measured: d,
                trace,
            });
        }
        if d < target {
            lo = c;
            if step > 0 && hi - lo < 1e-9 * c {
                hi *= 2.0;
            }
        } else {
            hi = c;
        }
    }
    Err(Error::NoConvergence(40))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    RadialOut,
    RandomJitter,
}

impl std::str::FromStr for PerturbMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radial_out" => Ok(PerturbMode::RadialOut),
            "random_jitter" => Ok(PerturbMode::RandomJitter),
            _ => Err(Error::InvalidParameter(format!("perturb mode {s}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub sequence: PointSequence,
    /// `source[i]` is the index in the original sequence of new point `i`.
    pub source: Vec<usize>,
}

impl Perturbation {
    /// Reorders values indexed like the original sequence to the new order.
    pub fn carry<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.source.iter().map(|&i| values[i]).collect()
    }
}

/// Moves every point by at most `delta` in the pseudohyperbolic metric.
pub fn perturb(
    gamma: &PointSequence,
    delta: f64,
    mode: PerturbMode,
    seed: u64,
) -> Result<Perturbation> {
    let limit = (1.0 / 20.0f64).min(gamma.partition().beta() / 2.0);
    if !(0.0..limit).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} must lie in [0, {limit})"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let moved: Vec<DiscPoint> = gamma
        .points()
        .iter()
        .map(|&z| {
            let w = match mode {
                PerturbMode::RadialOut => {
                    let t = if z.modulus() > 0.0 { z.angle() } else { 0.0 };
                    Complex64::from_polar(-delta, t)
                }
                PerturbMode::RandomJitter => {
                    let s = delta * rng.gen::<f64>().sqrt();
                    Complex64::from_polar(s, rng.gen::<f64>() * 2.0 * PI)
                }
            };
            mobius(z, DiscPoint::from_complex(w).expect("|w| < 1"))
        })
        .collect();
    let mut order: Vec<usize> = (0..moved.len()).collect();
    order.sort_by(|&a, &b| {
        moved[a]
            .modulus()
            .total_cmp(&moved[b].modulus())
            .then(moved[a].angle().total_cmp(&moved[b].angle()))
    });
    let mut seq = PointSequence::new(*gamma.partition(), moved)?;
    seq.truncation = gamma.truncation;
    Ok(Perturbation {
        sequence: seq,
        source: order,
    })
}

//! Sampling diagnostics: cell occupancy, frame-bound traces, the Berezin
//! inequality with its good/bad split, the Schur test and kernel comparison
//! inside cells.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{abs_pow, lpq_norm, restrict, AnalyticFunction, QuadConfig, SpaceParams};
use crate::hyperbolic::{cell_pseudo_radii, mobius_c, DiscPoint, Partition};
use crate::interp::{function_norm, standard_normal, CoefficientWeights};
use crate::quadrature::{gauss_legendre, RadialRule};
use crate::seqlab::PointSequence;

/// Largest number of points of `gamma` in a single cell of `part`.
pub fn bounded_density_check(gamma: &PointSequence, part: &Partition) -> Result<usize> {
    let mut cells: Vec<(u32, u64)> = gamma
        .points()
        .iter()
        .map(|&z| part.cell_index(z).map(|c| (c.j, c.k)))
        .collect::<Result<_>>()?;
    cells.sort_unstable();
    let mut best = 0;
    let mut run = 0;
    for (i, c) in cells.iter().enumerate() {
        run = if i > 0 && cells[i - 1] == *c {
            run + 1
        } else {
            1
        };
        best = best.max(run);
    }
    Ok(best)
}

/// Weights `d_i` making `sum d_i |a_i|^2` a Hilbert proxy of `||a||_{l^{p,q}}^2`;
/// exact for `p = q = 2`.
pub(crate) fn lpq_proxy_weights(gamma: &PointSequence, sp: &SpaceParams) -> Vec<f64> {
    let part = gamma.partition();
    (0..gamma.len())
        .map(|i| part.gap(gamma.annulus(i)).powf(2.0 / sp.q + 2.0 / sp.p))
        .collect()
}

/// `D^{1/2} V W^{-1/2}`, zero-padded to at least as many rows as columns so
/// the SVD exposes a full set of right singular vectors.
fn restriction_matrix(
    gamma: &PointSequence,
    w: &CoefficientWeights,
    d: &[f64],
) -> DMatrix<Complex64> {
    let m = gamma.len();
    let n = w.degree() + 1;
    let ws = w.as_slice();
    DMatrix::from_fn(m.max(n), n, |i, k| {
        if i < m {
            gamma.point(i).z().powu(k as u32) * (d[i] / ws[k]).sqrt()
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn restriction_ratio(f: &AnalyticFunction, gamma: &PointSequence, sp: &SpaceParams) -> Result<f64> {
    let nf = function_norm(f, sp, &QuadConfig::default())?;
    if nf == 0.0 {
        return Err(Error::InvalidParameter("zero function".into()));
    }
    Ok(lpq_norm(&restrict(f, gamma), gamma, sp)? / nf)
}

/// Extreme singular directions of the restriction map on degree-`N` polynomials.
fn extreme_directions(
    gamma: &PointSequence,
    degree: usize,
    sp: &SpaceParams,
) -> (Vec<Complex64>, f64, Vec<Complex64>, Vec<Vec<Complex64>>) {
    let w = CoefficientWeights::mixed(sp, degree);
    let d = lpq_proxy_weights(gamma, sp);
    let c = restriction_matrix(gamma, &w, &d);
    let svd = c.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let scale: Vec<f64> = w.as_slice().iter().map(|x| 1.0 / x.sqrt()).collect();
    let coeffs = |k: usize| -> Vec<Complex64> {
        vt.row(k)
            .iter()
            .zip(&scale)
            .map(|(x, s)| x.conj() * *s)
            .collect()
    };
    let smallest = coeffs(order[0]);
    let largest = coeffs(*order.last().unwrap());
    let low: Vec<Vec<Complex64>> = order.iter().take(6).map(|&k| coeffs(k)).collect();
    (smallest, svd.singular_values[order[0]], largest, low)
}

/// Degree-`N` polynomial (approximately) minimizing `||R f|| / ||f||`.
///
/// For `p = q = 2` this is the exact smallest singular direction. Otherwise
/// the Hilbert-proxy solution seeds a pattern search over the span of the
/// six weakest proxy directions, stopped at relative step `1e-6`.
pub fn min_restriction_function(
    gamma: &PointSequence,
    degree: usize,
    sp: &SpaceParams,
) -> Result<(AnalyticFunction, f64)> {
    if degree < 1 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    let (smallest, sigma, _, low) = extreme_directions(gamma, degree, sp);
    if gamma.len() <= degree {
        // the restriction has a kernel; sigma is zero up to rounding
        let f = AnalyticFunction::polynomial(smallest);
        let r = restriction_ratio(&f, gamma, sp)?;
        return Ok((f, r));
    }
    if sp.p == 2.0 && sp.q == 2.0 {
        let f = AnalyticFunction::polynomial(smallest);
        let r = restriction_ratio(&f, gamma, sp)?;
        debug_assert!((r - sigma).abs() <= 1e-6 * sigma.max(1e-300) || sigma < 1e-12);
        return Ok((f, r));
    }
    let combine = |x: &[f64]| -> AnalyticFunction {
        let mut c = vec![Complex64::new(0.0, 0.0); degree + 1];
        for (b, basis) in low.iter().enumerate() {
            let t = Complex64::new(x[2 * b], x[2 * b + 1]);
            for (ci, bi) in c.iter_mut().zip(basis) {
                *ci += t * bi;
            }
        }
        AnalyticFunction::polynomial(c)
    };
    let mut x = vec![0.0; 2 * low.len()];
    x[0] = 1.0;
    let eval = |x: &[f64]| restriction_ratio(&combine(x), gamma, sp).unwrap_or(f64::INFINITY);
    let mut best = eval(&x);
    let mut step = 0.25;
    let mut evals = 0;
    while step > 1e-6 && evals < 400 {
        let mut moved = false;
        for i in 1..x.len() {
            for sgn in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sgn * step;
                let v = eval(&y);
                evals += 1;
                if v < best {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((combine(&x), best))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameReport {
    #[serde(rename = "K1_estimate")]
    pub k1_estimate: f64,
    #[serde(rename = "K2_estimate")]
    pub k2_estimate: f64,
    pub degrees: Vec<usize>,
    #[serde(rename = "K1_trace")]
    pub k1_trace: Vec<f64>,
    #[serde(rename = "K2_trace")]
    pub k2_trace: Vec<f64>,
    pub test_corpus_size: usize,
}

impl FrameReport {
    /// CSV rows `degree,K1,K2`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["degree", "K1", "K2"])
            .map_err(crate::seqlab::csv_err)?;
        for ((d, a), b) in self.degrees.iter().zip(&self.k1_trace).zip(&self.k2_trace) {
            wr.write_record([d.to_string(), a.to_string(), b.to_string()])
                .map_err(crate::seqlab::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Random degree-`N` polynomial with every monomial carrying comparable norm.
pub fn random_polynomial(degree: usize, sp: &SpaceParams, rng: &mut StdRng) -> AnalyticFunction {
    let w = CoefficientWeights::mixed(sp, degree);
    AnalyticFunction::polynomial(
        w.as_slice()
            .iter()
            .map(|wk| Complex64::new(standard_normal(rng), standard_normal(rng)) / wk.sqrt())
            .collect(),
    )
}

/// Restriction ratios `||R f||_{l^{p,q}} / ||f||_{A(p,q)}` over a random corpus
/// plus the extreme singular directions, reduced per degree.
pub fn frame_bounds(
    gamma: &PointSequence,
    sp: &SpaceParams,
    degrees: &[usize],
    trials: usize,
    seed: u64,
) -> Result<FrameReport> {
    if trials < 50 {
        return Err(Error::InvalidParameter(format!(
            "{trials} trials; need at least 50"
        )));
    }
    let mut k1_trace = Vec::new();
    let mut k2_trace = Vec::new();
    for (di, &n) in degrees.iter().enumerate() {
        let mut rng = StdRng::seed_from_u64(seed.wrapping_add(di as u64));
        let mut corpus: Vec<AnalyticFunction> = (0..trials)
            .map(|_| random_polynomial(n, sp, &mut rng))
            .collect();
        let (_, _, largest, _) = extreme_directions(gamma, n.max(1), sp);
        corpus.push(AnalyticFunction::polynomial(largest));
        let ratios = corpus
            .par_iter()
            .map(|f| restriction_ratio(f, gamma, sp))
            .collect::<Result<Vec<f64>>>()?;
        let rmin = if n >= 1 {
            min_restriction_function(gamma, n, sp)?.1
        } else {
            f64::INFINITY
        };
        let k1 = ratios.iter().copied().fold(rmin, f64::min);
        let k2 = ratios.iter().copied().fold(0.0, f64::max);
        k1_trace.push(k1);
        k2_trace.push(k2);
    }
    Ok(FrameReport {
        k1_estimate: k1_trace.iter().copied().fold(f64::INFINITY, f64::min),
        k2_estimate: k2_trace.iter().copied().fold(0.0, f64::max),
        degrees: degrees.to_vec(),
        k1_trace,
        k2_trace,
        test_corpus_size: trials + 2,
    })
}

/// `alpha` and the exponent `r` of the Berezin inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha: f64,
    pub r_exp: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, r_exp: f64) -> Result<Self> {
        if !(alpha > -1.0) || !(r_exp > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha {alpha}, r {r_exp}")));
        }
        Ok(KernelParams { alpha, r_exp })
    }

    /// `alpha > r/q - 1`
    pub fn admissible(&self, sp: &SpaceParams) -> bool {
        self.alpha > self.r_exp / sp.q - 1.0
    }

    /// `K_alpha(zeta, z) = (1-|zeta|^2)^{2+alpha} (1-|z|^2)^alpha / |1 - conj(z) zeta|^{4+2alpha}`
    pub fn kernel(&self, zeta: DiscPoint, z: DiscPoint) -> f64 {
        let a = self.alpha;
        zeta.weight().powf(2.0 + a) * z.weight().powf(a)
            / (1.0 - z.z().conj() * zeta.z()).norm().powf(4.0 + 2.0 * a)
    }
}

/// `((alpha+1)/pi) int |f(w)|^r K_alpha(z, w) dA(w)`, evaluated after the
/// substitution `w = M_z(u)` which turns it into
/// `((alpha+1)/pi) int |f(M_z(u))|^r (1-|u|^2)^alpha dA(u)`.
pub fn berezin_integral(f: &AnalyticFunction, kp: &KernelParams, z: DiscPoint) -> f64 {
    let gap = 1.0 - z.modulus();
    let d = f.degree_hint().max(1) as f64;
    let n_theta = ((6.0 * (d + 4.0) / gap).ceil() as usize).clamp(256, 1 << 14);
    let edge = (1.0 / gap).log2().ceil() as usize + 8;
    let rule = RadialRule::new(16, edge, kp.alpha);
    let circle: Vec<Complex64> = (0..n_theta)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n_theta as f64))
        .collect();
    let zc = z.z();
    let total: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&rho, &w)| {
            let mean = circle
                .iter()
                .map(|&u| abs_pow(f.eval(mobius_c(zc, u * rho)), kp.r_exp))
                .sum::<f64>()
                / n_theta as f64;
            w * rho * (1.0 + rho).powf(kp.alpha) * mean
        })
        .sum();
    // (alpha+1)/pi * 2 pi
    2.0 * (kp.alpha + 1.0) * total
}

/// The same integral by raw polar quadrature in `w`, for cross-checking.
pub fn berezin_integral_direct(
    f: &AnalyticFunction,
    kp: &KernelParams,
    z: DiscPoint,
    n_theta: usize,
) -> f64 {
    let rule = RadialRule::new(16, 40, kp.alpha);
    let a = kp.alpha;
    let zc = z.z();
    let wz = z.weight().powf(2.0 + a);
    let total: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&rho, &w)| {
            let mean = (0..n_theta)
                .map(|k| {
                    let u = Complex64::from_polar(rho, 2.0 * PI * k as f64 / n_theta as f64);
                    abs_pow(f.eval(u), kp.r_exp) / (1.0 - u.conj() * zc).norm().powf(4.0 + 2.0 * a)
                })
                .sum::<f64>()
                / n_theta as f64;
            w * rho * (1.0 + rho).powf(a) * mean
        })
        .sum();
    2.0 * (a + 1.0) * wz * total
}

/// `max (|f(z)|^r - RHS) / |f(z)|^r` over the grid (points with `f(z) = 0` skipped).
pub fn berezin_check(f: &AnalyticFunction, kp: &KernelParams, grid: &[DiscPoint]) -> Result<f64> {
    let worst = grid
        .par_iter()
        .filter_map(|&z| {
            let lhs = abs_pow(f.eval(z.z()), kp.r_exp);
            (lhs > 0.0).then(|| (lhs - berezin_integral(f, kp, z)) / lhs)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(worst)
}

/// Polar grid for `L(p,q)` norms restricted to `|z| <= r_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitGrid {
    pub radii: Vec<f64>,
    /// Radial weights including the `2r dr` factor.
    pub weights: Vec<f64>,
    pub n_theta: usize,
}

impl SplitGrid {
    /// Gauss panels `[0, 1/2], [1/2, 3/4], ...` out to `1 - 2^-panels`.
    pub fn new(panels: usize, nodes: usize, n_theta: usize) -> Self {
        let (x, w) = gauss_legendre(nodes);
        let mut radii = Vec::new();
        let mut weights = Vec::new();
        for i in 0..panels {
            let a = if i == 0 {
                0.0
            } else {
                1.0 - 0.5f64.powi(i as i32)
            };
            let b = 1.0 - 0.5f64.powi(i as i32 + 1);
            let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
            for (&t, &wt) in x.iter().zip(&w) {
                let r = m + h * t;
                radii.push(r);
                weights.push(wt * h * 2.0 * r);
            }
        }
        SplitGrid {
            radii,
            weights,
            n_theta,
        }
    }

    pub fn r_max(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for SplitGrid {
    fn default() -> Self {
        SplitGrid::new(4, 6, 32)
    }
}

/// Pointwise data for the good/bad split of one function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodBadProfile {
    pub p: f64,
    pub q: f64,
    pub radial_weights: Vec<f64>,
    pub n_theta: usize,
    /// `|f(z)|^p` per grid point, radius-major.
    pub values: Vec<f64>,
    /// `|f(z)|^r / Berezin(z)` per grid point.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitRecord {
    pub eps: f64,
    pub bad_fraction_norm: f64,
    pub good_norm_ratio: f64,
    pub bad_points: usize,
    pub grid_points: usize,
}

/// Bad set `B_eps = { |f(z)|^r <= eps * Berezin(z) }`, where `Berezin` carries
/// the `(alpha+1)/pi` factor so `eps` lives on the scale where `eps = 1`
/// marks every point bad.
pub fn good_bad_profile(
    f: &AnalyticFunction,
    kp: &KernelParams,
    sp: &SpaceParams,
    grid: &SplitGrid,
) -> Result<GoodBadProfile> {
    if !(kp.r_exp < sp.p.min(sp.q)) {
        return Err(Error::ParameterViolation(format!(
            "r = {} must be below min(p, q)",
            kp.r_exp
        )));
    }
    if !kp.admissible(sp) {
        return Err(Error::ParameterViolation(format!(
            "alpha = {} must exceed r/q - 1",
            kp.alpha
        )));
    }
    let pts: Vec<Complex64> = grid
        .radii
        .iter()
        .flat_map(|&r| {
            (0..grid.n_theta)
                .map(move |k| Complex64::from_polar(r, 2.0 * PI * k as f64 / grid.n_theta as f64))
        })
        .collect();
    let (values, ratios): (Vec<f64>, Vec<f64>) = pts
        .par_iter()
        .map(|&z| {
            let fz = f.eval(z);
            let lhs = abs_pow(fz, kp.r_exp);
            let ratio = if lhs == 0.0 {
                0.0
            } else {
                lhs / berezin_integral(f, kp, DiscPoint(z))
            };
            (abs_pow(fz, sp.p), ratio)
        })
        .unzip();
    Ok(GoodBadProfile {
        p: sp.p,
        q: sp.q,
        radial_weights: grid.weights.clone(),
        n_theta: grid.n_theta,
        values,
        ratios,
    })
}

impl GoodBadProfile {
    fn norm_where<F: Fn(usize) -> bool>(&self, keep: F) -> f64 {
        let mut total = 0.0;
        for (i, w) in self.radial_weights.iter().enumerate() {
            let base = i * self.n_theta;
            let mean = (base..base + self.n_theta)
                .filter(|&k| keep(k))
                .map(|k| self.values[k])
                .sum::<f64>()
                / self.n_theta as f64;
            total += w * mean.powf(self.q / self.p);
        }
        total.powf(1.0 / self.q)
    }

    pub fn split(&self, eps: f64) -> SplitRecord {
        let full = self.norm_where(|_| true);
        let bad = |k: usize| eps > 0.0 && self.ratios[k] <= eps;
        let nb = self.norm_where(bad);
        let ng = self.norm_where(|k| !bad(k));
        let (b, g) = if full > 0.0 {
            (nb / full, ng / full)
        } else {
            (0.0, 1.0)
        };
        SplitRecord {
            eps,
            bad_fraction_norm: b,
            good_norm_ratio: g,
            bad_points: (0..self.ratios.len()).filter(|&k| bad(k)).count(),
            grid_points: self.ratios.len(),
        }
    }
}

/// Split with the `L(p,q)` norms taken over the grid (so over `|z| <= r_max`).
/// With `eps = 0` the bad set is empty.
pub fn good_bad_split(
    f: &AnalyticFunction,
    kp: &KernelParams,
    eps: f64,
    sp: &SpaceParams,
    grid: &SplitGrid,
) -> Result<SplitRecord> {
    Ok(good_bad_profile(f, kp, sp, grid)?.split(eps))
}

/// Largest `eps` in `[0, 1]` keeping `good_norm_ratio >= 1/2` for every profile.
pub fn locate_eps0(profiles: &[GoodBadProfile]) -> f64 {
    let ok = |e: f64| profiles.iter().all(|pr| pr.split(e).good_norm_ratio >= 0.5);
    if ok(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchurReport {
    pub alpha: f64,
    pub q: f64,
    pub eps: f64,
    pub window: (f64, f64),
    pub feasible: bool,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub bound: f64,
    pub empirical_norm: f64,
}

/// Open interval of admissible test-function exponents:
/// `max(-(2+alpha)/q', -alpha/q) < eps < min((1+alpha)/q', (3+alpha)/q)`.
pub fn schur_window(alpha: f64, q: f64) -> Result<(f64, f64)> {
    if !(q > 1.0) || !(alpha > -1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha}, q {q}")));
    }
    let qp = q / (q - 1.0);
    let lo = (-(2.0 + alpha) / qp).max(-alpha / q);
    let hi = ((1.0 + alpha) / qp).min((3.0 + alpha) / q);
    // the window closes exactly at alpha = 1/q - 1; absorb rounding there
    if hi - lo <= 1e-12 * (1.0 + lo.abs() + hi.abs()) {
        return Err(Error::InfeasibleWindow { alpha, q });
    }
    Ok((lo, hi))
}

/// `k(r, rho) = (1-r^2)^{2+alpha} (1-rho^2)^alpha / (1 - r rho)^{3+2alpha}` in
/// terms of `u = 1 - r`, `v = 1 - rho`.
fn radial_kernel(alpha: f64, u: f64, v: f64) -> f64 {
    let one_minus = u + v - u * v;
    (u * (2.0 - u)).powf(2.0 + alpha) * (v * (2.0 - v)).powf(alpha)
        / one_minus.powf(3.0 + 2.0 * alpha)
}

/// Gaps `1 - r` where the Schur suprema are sampled, down to `2^-40`.
fn schur_probe_gaps() -> Vec<f64> {
    (0..=160).map(|k| 0.5f64.powf(k as f64 / 4.0)).collect()
}

/// Schur constants for `h(rho) = (1 - rho^2)^{-eps}` and the radial operator
/// `Kg(r) = int k(r, rho) g(rho) 2 rho d rho` on `L^q(2r dr)`.
pub fn schur_test(alpha: f64, q: f64, eps: f64) -> Result<SchurReport> {
    let window = schur_window(alpha, q)?;
    let empirical_norm = discretized_operator_norm(alpha, q, 20, 20);
    let feasible = eps > window.0 && eps < window.1;
    if !feasible {
        return Ok(SchurReport {
            alpha,
            q,
            eps,
            window,
            feasible,
            c1: f64::INFINITY,
            c2: f64::INFINITY,
            bound: f64::INFINITY,
            empirical_norm,
        });
    }
    let qp = q / (q - 1.0);
    // int (1-rho^2)^{alpha - eps q'} ... : weight exponent a1 on (1-rho)
    let a1 = alpha - eps * qp;
    let a2 = 2.0 + alpha - eps * q;
    let rule1 = RadialRule::new(16, 64, a1);
    let rule2 = RadialRule::new(16, 64, a2);
    let probes = schur_probe_gaps();
    let c1 = probes
        .par_iter()
        .map(|&u| {
            let wr = u * (2.0 - u);
            let integral: f64 = rule1
                .gaps
                .iter()
                .zip(&rule1.weights)
                .map(|(&v, &w)| {
                    let rho = 1.0 - v;
                    w * (2.0 - v).powf(a1) * wr.powf(2.0 + alpha) * 2.0 * rho
                        / (u + v - u * v).powf(3.0 + 2.0 * alpha)
                })
                .sum();
            integral * wr.powf(eps * qp)
        })
        .reduce(|| 0.0, f64::max);
    let c2 = probes
        .par_iter()
        .map(|&v| {
            let wrho = v * (2.0 - v);
            let integral: f64 = rule2
                .gaps
                .iter()
                .zip(&rule2.weights)
                .map(|(&u, &w)| {
                    let r = 1.0 - u;
                    w * (2.0 - u).powf(a2) * wrho.powf(alpha) * 2.0 * r
                        / (u + v - u * v).powf(3.0 + 2.0 * alpha)
                })
                .sum();
            integral * wrho.powf(eps * q)
        })
        .reduce(|| 0.0, f64::max);
    Ok(SchurReport {
        alpha,
        q,
        eps,
        window,
        feasible,
        c1,
        c2,
        bound: c1.powf(1.0 / qp) * c2.powf(1.0 / q),
        empirical_norm,
    })
}

/// `||K||` on `L^q(2r dr)` for the operator discretized on Gauss panels in
/// `u = 1 - r` (`panels * nodes` points), by Boyd's power iteration.
pub fn discretized_operator_norm(alpha: f64, q: f64, panels: usize, nodes: usize) -> f64 {
    let (x, w) = gauss_legendre(nodes);
    let mut u = Vec::new();
    let mut mu = Vec::new();
    for i in 0..panels {
        let hi = 0.5f64.powi(i as i32);
        let lo = if i + 1 == panels { 0.0 } else { 0.5 * hi };
        let (h, m) = (0.5 * (hi - lo), 0.5 * (hi + lo));
        for (&t, &wt) in x.iter().zip(&w) {
            let g = m + h * t;
            u.push(g);
            mu.push(wt * h * 2.0 * (1.0 - g));
        }
    }
    let n = u.len();
    // plain l^q form: A~_ij = mu_i^{1/q} k(r_i, rho_j) mu_j^{1 - 1/q}
    let a = DMatrix::from_fn(n, n, |i, j| {
        mu[i].powf(1.0 / q) * radial_kernel(alpha, u[i], u[j]) * mu[j].powf(1.0 - 1.0 / q)
    });
    if q == 2.0 {
        return a.singular_values().max();
    }
    boyd_norm(&a, q)
}

/// Power iteration for `||A||_{q -> q}` with `A` entrywise nonnegative.
pub fn boyd_norm(a: &DMatrix<f64>, q: f64) -> f64 {
    let qp = q / (q - 1.0);
    let psi = |v: f64, s: f64| v.abs().powf(s - 1.0).copysign(v);
    let lq = |v: &[f64], s: f64| v.iter().map(|x| x.abs().powf(s)).sum::<f64>().powf(1.0 / s);
    let n = a.ncols();
    let mut x = vec![1.0; n];
    let nx = lq(&x, q);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut est = 0.0;
    for _ in 0..500 {
        let y: Vec<f64> = (0..a.nrows())
            .map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum())
            .collect();
        let next_est = lq(&y, q);
        let yp: Vec<f64> = y.iter().map(|&v| psi(v, q)).collect();
        let z: Vec<f64> = (0..n)
            .map(|j| (0..a.nrows()).map(|i| a[(i, j)] * yp[i]).sum())
            .collect();
        let mut xn: Vec<f64> = z.iter().map(|&v| psi(v, qp)).collect();
        let nn = lq(&xn, q);
        if nn == 0.0 {
            return 0.0;
        }
        xn.iter_mut().for_each(|v| *v /= nn);
        x = xn;
        if (next_est - est).abs() <= 1e-12 * next_est {
            return next_est;
        }
        est = next_est;
    }
    est
}

/// Ratios `K_alpha(zeta, z) / K_alpha(zeta, w)` for `z, w` in a common cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: u32,
    pub samples: usize,
    pub c_fitted: f64,
    /// `beta^{-|alpha|} ((1+R)/(1-R))^{4+2alpha}` with `R` the cell circumradius.
    pub c_theory: f64,
}

pub fn kernel_monotonicity(
    alpha: f64,
    part: &Partition,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let kp = KernelParams::new(alpha, 1.0)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut c_fitted: f64 = 0.0;
    for s in 0..samples {
        let j = rng.gen_range(0..part.levels());
        let k = rng.gen_range(0..part.cells_in(j));
        let in_cell = |rng: &mut StdRng| {
            let r = part.ring(j) + (part.ring(j + 1) - part.ring(j)) * rng.gen::<f64>();
            let t = part.cell_width(j) * (k as f64 + rng.gen::<f64>());
            DiscPoint::from_polar(r, t)
        };
        let z = in_cell(&mut rng)?;
        let w = in_cell(&mut rng)?;
        // half the probes sit hyperbolically close to the cell, where the ratio is largest
        let zeta = if s % 2 == 0 {
            let u =
                Complex64::from_polar(0.99 * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>());
            DiscPoint::from_complex(mobius_c(z.z(), u))?
        } else {
            DiscPoint::from_polar(
                0.9999 * rng.gen::<f64>().sqrt(),
                2.0 * PI * rng.gen::<f64>(),
            )?
        };
        c_fitted = c_fitted.max(kp.kernel(zeta, z) / kp.kernel(zeta, w));
    }
    let big_r = cell_pseudo_radii(part).big_r_beta;
    let c_theory =
        part.beta().powf(-alpha.abs()) * ((1.0 + big_r) / (1.0 - big_r)).powf(4.0 + 2.0 * alpha);
    Ok(MonotonicityReport {
        alpha,
        l: part.l(),
        samples,
        c_fitted,
        c_theory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqlab::generate_lattice;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn pt(a: f64, b: f64) -> DiscPoint {
        DiscPoint::new(a, b).unwrap()
    }

    #[test]
    fn occupancy_examples() {
        let part = Partition::new(2, 10).unwrap();
        let one = PointSequence::from_points(vec![pt(0.1, 0.1)]).unwrap();
        assert_eq!(bounded_density_check(&one, &part).unwrap(), 1);
        let two = PointSequence::from_points(vec![pt(0.1, 0.1), pt(0.12, 0.1)]).unwrap();
        assert_eq!(bounded_density_check(&two, &part).unwrap(), 2);
    }

    #[test]
    fn lattice_occupancy_respects_counting_bound() {
        let gamma = generate_lattice(0.5, 0.5, 0.999).unwrap();
        let delta = crate::seqlab::separation(&gamma).unwrap();
        let part = Partition::new(2, 12).unwrap();
        let m = bounded_density_check(&gamma, &part).unwrap();
        // a cell sits inside E(z, R) of any of its points
        let big_r = cell_pseudo_radii(&part).big_r_beta;
        let bound = crate::seqlab::counting_bound(delta, big_r);
        assert!(m >= 1 && (m as f64) <= bound, "{m} vs {bound}");
    }

    #[test]
    fn restriction_kernel_gives_zero_ratio() {
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let one = PointSequence::from_points(vec![DiscPoint::origin()]).unwrap();
        let (f, r) = min_restriction_function(&one, 1, &sp).unwrap();
        assert!(r < 1e-14);
        // minimizer vanishes at the origin, so it is a multiple of z
        if let AnalyticFunction::Polynomial { coeffs } = f {
            assert!(coeffs[0].norm() < 1e-14 && coeffs[1].norm() > 0.5);
        }
        let three =
            PointSequence::from_points(vec![pt(0.1, 0.0), pt(0.0, 0.5), pt(-0.3, -0.3)]).unwrap();
        assert!(min_restriction_function(&three, 3, &sp).unwrap().1 < 1e-12);
    }

    #[test]
    fn exact_minimizer_matches_dense_oracle() {
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        let pts: Vec<DiscPoint> = (0..20)
            .map(|_| {
                DiscPoint::from_polar(0.95 * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>())
                    .unwrap()
            })
            .collect();
        let gamma = PointSequence::from_points(pts).unwrap();
        let n = 12;
        let (_, ratio) = min_restriction_function(&gamma, n, &sp).unwrap();
        // Hermitian generalized eigenproblem V* D V c = lambda W c
        let w = CoefficientWeights::mixed(&sp, n);
        let d = lpq_proxy_weights(&gamma, &sp);
        let h = DMatrix::from_fn(n + 1, n + 1, |k, l| {
            (0..gamma.len())
                .map(|i| {
                    let z = gamma.point(i).z();
                    z.conj().powu(k as u32) * z.powu(l as u32) * d[i]
                })
                .sum::<Complex64>()
                / (w.as_slice()[k] * w.as_slice()[l]).sqrt()
        });
        let lmin = h.symmetric_eigenvalues().min();
        assert_relative_eq!(ratio, lmin.sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn frame_trace_vanishes_below_point_count() {
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let gamma =
            PointSequence::from_points(vec![pt(0.1, 0.0), pt(0.0, 0.5), pt(-0.3, -0.3)]).unwrap();
        let rep = frame_bounds(&gamma, &sp, &[1, 3, 6], 50, 1).unwrap();
        assert!(rep.k1_trace[0] > 1e-6);
        assert!(rep.k1_trace[1] < 1e-12 && rep.k1_trace[2] < 1e-12);
        assert!(rep.k1_estimate <= rep.k2_estimate);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn upper_frame_bound_does_not_grow_with_corpus() {
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let gamma = generate_lattice(0.5, 0.5, 0.99).unwrap();
        let a = frame_bounds(&gamma, &sp, &[20], 50, 2).unwrap();
        let b = frame_bounds(&gamma, &sp, &[20], 200, 3).unwrap();
        // the top singular direction is in both corpora
        assert_relative_eq!(a.k2_estimate, b.k2_estimate, max_relative = 1e-9);
    }

    #[test]
    fn general_exponent_minimizer_improves_on_proxy() {
        let sp = SpaceParams::new(2.0, 3.0).unwrap();
        let gamma = generate_lattice(0.5, 0.5, 0.97).unwrap();
        let (f, r) = min_restriction_function(&gamma, 8, &sp).unwrap();
        assert_relative_eq!(
            r,
            restriction_ratio(&f, &gamma, &sp).unwrap(),
            max_relative = 1e-12
        );
        let (proxy, ..) = extreme_directions(&gamma, 8, &sp);
        let r0 = restriction_ratio(&AnalyticFunction::polynomial(proxy), &gamma, &sp).unwrap();
        assert!(r <= r0);
    }

    #[test]
    fn berezin_equality_for_constants_at_origin() {
        let kp = KernelParams::new(0.0, 1.0).unwrap();
        let v = berezin_integral(&AnalyticFunction::constant(1.0), &kp, DiscPoint::origin());
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        // |f(z)| = 1 everywhere only for constants; the identity holds at any z
        for a in [0.0, 0.5, 2.0] {
            let kp = KernelParams::new(a, 0.7).unwrap();
            let v = berezin_integral(&AnalyticFunction::constant(1.0), &kp, pt(0.6, -0.3));
            assert_relative_eq!(v, 1.0, max_relative = 1e-10);
        }
        let z = pt(0.3, 0.2);
        let f = AnalyticFunction::polynomial(vec![-z.z(), Complex64::new(1.0, 0.0)]);
        assert!(berezin_check(&f, &kp, &[z]).unwrap() == f64::NEG_INFINITY);
    }

    #[test]
    fn berezin_substitution_matches_direct_quadrature() {
        let f = AnalyticFunction::real_polynomial(&[1.0, -0.5, 0.25, 2.0]);
        for (a, r) in [(0.0, 1.0), (0.5, 0.5), (1.0, 2.0)] {
            let kp = KernelParams::new(a, r).unwrap();
            for z in [pt(0.0, 0.0), pt(0.5, 0.3), pt(-0.8, 0.1)] {
                let x = berezin_integral(&f, &kp, z);
                let y = berezin_integral_direct(&f, &kp, z, 2048);
                // |f|^r has cusps at the zeros of f, which caps both rules well above 1e-8
                assert_relative_eq!(x, y, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn berezin_inequality_on_random_polynomials() {
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let grid: Vec<DiscPoint> = (0..6)
            .map(|_| {
                DiscPoint::from_polar(0.9 * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>())
                    .unwrap()
            })
            .collect();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..50 {
            let f = random_polynomial(1 + i % 8, &sp, &mut rng);
            let kp = KernelParams::new([0.0, 0.5][i % 2], [0.5, 1.0][(i / 2) % 2]).unwrap();
            worst = worst.max(berezin_check(&f, &kp, &grid).unwrap());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn good_bad_split_examples() {
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let kp = KernelParams::new(0.0, 1.0).unwrap();
        let grid = SplitGrid::new(3, 4, 16);
        let one = AnalyticFunction::constant(1.0);
        let prof = good_bad_profile(&one, &kp, &sp, &grid).unwrap();
        assert_relative_eq!(prof.split(0.0).good_norm_ratio, 1.0);
        // f = 1 gives equality, so every point is good for eps < 1
        assert_relative_eq!(prof.split(0.999).good_norm_ratio, 1.0);
        let f = AnalyticFunction::real_polynomial(&[0.1, 0.0, 0.0, 1.0]);
        let prof = good_bad_profile(&f, &kp, &sp, &grid).unwrap();
        let mut prev = 1.0;
        for eps in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let s = prof.split(eps);
            assert!(s.good_norm_ratio <= prev + 1e-15);
            prev = s.good_norm_ratio;
        }
        assert!(locate_eps0(&[prof]) > 0.0);
        let bad = KernelParams::new(-0.9, 1.0).unwrap();
        assert!(good_bad_profile(&f, &bad, &sp, &grid).is_err());
    }

    #[test]
    fn schur_window_examples() {
        let (lo, hi) = schur_window(0.0, 2.0).unwrap();
        assert_relative_eq!(lo, 0.0);
        assert_relative_eq!(hi, 0.5);
        for q in [1.5, 2.0, 3.0] {
            assert!(matches!(
                schur_window(1.0 / q - 1.0, q),
                Err(Error::InfeasibleWindow { .. })
            ));
        }
        let rep = schur_test(0.0, 2.0, 0.75).unwrap();
        assert!(!rep.feasible);
    }

    #[test]
    fn schur_bound_dominates_discretized_norm() {
        for (alpha, q, eps) in [(0.0, 2.0, 0.25), (0.5, 3.0, 0.3), (-0.2, 1.5, 0.2)] {
            let rep = schur_test(alpha, q, eps).unwrap();
            assert!(rep.feasible);
            assert!(rep.bound.is_finite());
            assert!(rep.bound >= rep.empirical_norm, "{rep:?}");
        }
    }

    #[test]
    fn boyd_matches_svd_for_q_two() {
        let a = DMatrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + 2.0 * j as f64));
        assert_relative_eq!(
            boyd_norm(&a, 2.0),
            a.singular_values().max(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn kernel_ratio_is_bounded_within_cells() {
        let part = Partition::new(2, 10).unwrap();
        for alpha in [0.0, 0.5, -0.5] {
            let a = kernel_monotonicity(alpha, &part, 200, 1).unwrap();
            let b = kernel_monotonicity(alpha, &part, 200, 2).unwrap();
            assert!(a.c_fitted >= 1.0 && a.c_fitted <= a.c_theory);
            assert!(b.c_fitted <= a.c_theory);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn min_ratio_nonincreasing_in_degree(seed in 0u64..1000) {
            let sp = SpaceParams::new(2.0, 2.0).unwrap();
            let mut rng = StdRng::seed_from_u64(seed);
            let pts: Vec<DiscPoint> = (0..15)
                .map(|_| DiscPoint::from_polar(0.9 * rng.gen::<f64>(), 2.0 * PI * rng.gen::<f64>()).unwrap())
                .collect();
            let gamma = PointSequence::from_points(pts).unwrap();
            let mut prev = f64::INFINITY;
            for n in [2, 5, 9, 14] {
                let (_, r) = min_restriction_function(&gamma, n, &sp).unwrap();
                prop_assert!(r <= prev * (1.0 + 1e-9) + 1e-13);
                prev = r;
            }
        }
    }
}

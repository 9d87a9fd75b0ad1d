//! Constructive interpolation: truncated Blaschke g-systems, the kernel
//! series, the correction iteration and minimal-norm polynomial solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{
    growth_norm, lpq_norm, mixed_norm, polynomial_norm_p2, restrict, AnalyticFunction, QuadConfig,
    SpaceParams,
};
use crate::hyperbolic::{mobius_c, DiscPoint, Partition};
use crate::seqlab::{separation, PointSequence};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Box–Muller standard normal.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen::<f64>();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// One growth-space function per point, normalized at its own point and
/// vanishing at the neighbours closer than the cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GSystem {
    pub gamma: PointSequence,
    pub n: f64,
    pub r_cut: f64,
    pub functions: Vec<AnalyticFunction>,
    /// `max |g_m(z_m')| (1 - |z_m'|^2)^n` over distinct pairs.
    pub offdiag_residual: f64,
    /// Largest growth norm among the `g_m`.
    pub growth_bound: f64,
}

/// `g_m(z) = (1-|z_m|^2)^{-n} prod_{rho(z_m', z_m) < R} M_{z_m'}(z) / M_{z_m'}(z_m)`
/// times `((1-|z_m|^2) / (1 - conj(z_m) z))^{2n}`.
///
/// The second factor is the Möbius transport of the growth space, so
/// `(1-|z|^2)^n |g_m(z)| = (1 - rho(z, z_m)^2)^n |B_m(z) / B_m(z_m)|` stays bounded
/// independently of `m` and decays away from `z_m`.
pub fn build_g_system(gamma: &PointSequence, n: f64, r_cut: f64) -> Result<GSystem> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("growth exponent {n}")));
    }
    if !(r_cut > 0.0 && r_cut < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff {r_cut} not in (0,1)"
        )));
    }
    if gamma.len() >= 2 {
        let d = separation(gamma)?;
        if d <= 0.0 {
            return Err(Error::NotSeparated(d));
        }
    }
    let functions: Vec<AnalyticFunction> = (0..gamma.len())
        .map(|m| {
            let zm = gamma.point(m);
            let nodes: Vec<DiscPoint> = gamma
                .within(zm, r_cut)
                .into_iter()
                .filter(|&(k, _)| k != m)
                .map(|(k, _)| gamma.point(k))
                .collect();
            let at_self = nodes
                .iter()
                .fold(ONE, |acc, w| acc * mobius_c(w.z(), zm.z()));
            let scale = zm.weight().powf(-n) / at_self;
            // transport factor (M'_{z_m})^n up to sign, equal to 1 at z_m
            let transport = AnalyticFunction::kernel_term(zm, 2.0 * n, ONE, 2.0 * n)?;
            Ok(AnalyticFunction::Product {
                factors: vec![AnalyticFunction::blaschke(nodes, scale), transport],
            })
        })
        .collect::<Result<_>>()?;
    let offdiag_residual = (0..gamma.len())
        .into_par_iter()
        .map(|m| {
            let g = &functions[m];
            (0..gamma.len())
                .filter(|&k| k != m)
                .map(|k| {
                    let z = gamma.point(k);
                    g.eval(z.z()).norm() * z.weight().powf(n)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let growth_bound = functions
        .par_iter()
        .map(|g| growth_norm(g, n, 2))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(GSystem {
        gamma: gamma.clone(),
        n,
        r_cut,
        functions,
        offdiag_residual,
        growth_bound,
    })
}

/// Per-annulus sums `S_j = sum |a_m| (1 - |z_m|^2)^{n+s}` and their tail ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummabilityCertificate {
    pub s: f64,
    pub annulus_sums: Vec<f64>,
    /// Largest ratio `S_{j'} / S_j` between consecutive occupied annuli in the
    /// outer half; below one means the terms decay geometrically outward.
    pub tail_ratio: f64,
}

pub fn summability_certificate(
    gamma: &PointSequence,
    a: &[Complex64],
    n: f64,
    s: f64,
    trunc_radius: f64,
) -> Result<SummabilityCertificate> {
    if a.len() != gamma.len() {
        return Err(Error::LengthMismatch {
            expected: gamma.len(),
            got: a.len(),
        });
    }
    let mut sums = vec![0.0; gamma.partition().levels() as usize];
    for (m, v) in a.iter().enumerate() {
        let z = gamma.point(m);
        if z.modulus() <= trunc_radius {
            sums[gamma.annulus(m) as usize] += v.norm() * z.weight().powf(n + s);
        }
    }
    let occupied: Vec<f64> = sums.iter().copied().filter(|&x| x > 0.0).collect();
    let k = occupied.len();
    let tail_ratio = if k < 2 {
        0.0
    } else {
        let start = (k / 2).min(k - 2);
        occupied[start..]
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    };
    Ok(SummabilityCertificate {
        s,
        annulus_sums: sums,
        tail_ratio,
    })
}

/// `f(z) = sum a_m g_m(z) (1 - |z_m|^2)^{n+s} / (1 - conj(z_m) z)^s` over `|z_m| <= trunc_radius`.
pub fn series_interpolant(
    gamma: &PointSequence,
    a: &[Complex64],
    gs: &GSystem,
    s: f64,
    trunc_radius: f64,
) -> Result<AnalyticFunction> {
    let cert = summability_certificate(gamma, a, gs.n, s, trunc_radius)?;
    if cert.tail_ratio >= 1.0 {
        return Err(Error::SummabilityFailure(cert.tail_ratio));
    }
    series_terms(gamma, a, gs, s, trunc_radius)
}

fn series_terms(
    gamma: &PointSequence,
    a: &[Complex64],
    gs: &GSystem,
    s: f64,
    trunc_radius: f64,
) -> Result<AnalyticFunction> {
    if gs.gamma.points() != gamma.points() {
        return Err(Error::InvalidParameter(
            "g-system built for another sequence".into(),
        ));
    }
    let mut parts = Vec::new();
    for (m, &v) in a.iter().enumerate() {
        let z = gamma.point(m);
        if v == ZERO || z.modulus() > trunc_radius {
            continue;
        }
        let kernel = AnalyticFunction::kernel_term(z, s, v, gs.n + s)?;
        parts.push(AnalyticFunction::Product {
            factors: vec![gs.functions[m].clone(), kernel],
        });
    }
    Ok(AnalyticFunction::Sum { parts })
}

/// Smallest `s` in `{2, 3, 4, 6, 8}` whose certificate ratio is at most 1/2.
pub fn default_exponent(gamma: &PointSequence, a: &[Complex64], n: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in [2.0, 3.0, 4.0, 6.0, 8.0] {
        let c = summability_certificate(gamma, a, n, s, 1.0)?;
        if c.tail_ratio <= 0.5 {
            return Ok(s);
        }
        worst = c.tail_ratio;
    }
    Err(Error::SummabilityFailure(worst))
}

/// A linear solver producing approximate interpolants from data on a sequence.
pub trait BaseSolver: Sync {
    fn solve(&self, values: &[Complex64]) -> Result<AnalyticFunction>;
}

/// The kernel series with a fixed g-system and exponent.
pub struct SeriesSolver<'a> {
    pub gs: &'a GSystem,
    pub s: f64,
    pub trunc_radius: f64,
}

impl BaseSolver for SeriesSolver<'_> {
    fn solve(&self, values: &[Complex64]) -> Result<AnalyticFunction> {
        series_terms(&self.gs.gamma, values, self.gs, self.s, self.trunc_radius)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolationResult {
    pub f: AnalyticFunction,
    /// `||a - R f||_{l^{p,q}}`
    pub residual: f64,
    pub iterations: usize,
    pub gamma_contraction: f64,
    pub norm_f: f64,
    /// Residual norm after each correction step, starting with `||a||`.
    pub residual_trace: Vec<f64>,
}

/// Mixed norm, through Parseval when possible.
pub fn function_norm(f: &AnalyticFunction, sp: &SpaceParams, cfg: &QuadConfig) -> Result<f64> {
    match f {
        AnalyticFunction::Polynomial { coeffs } if sp.p == 2.0 => {
            polynomial_norm_p2(coeffs, sp.q, cfg)
        }
        _ => mixed_norm(f, sp, cfg),
    }
}

/// Repeatedly solves for the current residual and subtracts its trace on the
/// sequence: `v_{m+1} = v_m - R S v_m`, `f = sum S v_m = S (sum v_m)`.
pub fn iterative_interpolant(
    gamma: &PointSequence,
    a: &[Complex64],
    base: &dyn BaseSolver,
    sp: &SpaceParams,
    tol: f64,
    max_iter: usize,
) -> Result<InterpolationResult> {
    let a_norm = lpq_norm(a, gamma, sp)?;
    if a_norm == 0.0 {
        return Ok(InterpolationResult {
            f: AnalyticFunction::constant(0.0),
            residual: 0.0,
            iterations: 0,
            gamma_contraction: 0.0,
            norm_f: 0.0,
            residual_trace: vec![0.0],
        });
    }
    let mut v = a.to_vec();
    // base solvers are linear, so the corrections can be summed as data
    let mut total = vec![ZERO; a.len()];
    let mut trace = vec![a_norm];
    let mut gamma_max: f64 = 0.0;
    let mut stalled = 0;
    let mut iterations = 0;
    loop {
        let rv = restrict(&base.solve(&v)?, gamma);
        for ((x, t), y) in v.iter_mut().zip(total.iter_mut()).zip(&rv) {
            *t += *x;
            *x -= y;
        }
        iterations += 1;
        let res = lpq_norm(&v, gamma, sp)?;
        let ratio = res / trace.last().unwrap();
        gamma_max = gamma_max.max(ratio);
        trace.push(res);
        if res <= tol * a_norm {
            break;
        }
        stalled = if ratio >= 1.0 { stalled + 1 } else { 0 };
        if stalled >= 3 {
            return Err(Error::NoContraction(ratio));
        }
        if iterations >= max_iter {
            return Err(Error::NoConvergence(max_iter));
        }
    }
    let f = base.solve(&total)?;
    let rf = restrict(&f, gamma);
    let diff: Vec<Complex64> = a.iter().zip(&rf).map(|(x, y)| x - y).collect();
    let residual = lpq_norm(&diff, gamma, sp)?;
    let norm_f = function_norm(&f, sp, &QuadConfig::default())?;
    Ok(InterpolationResult {
        f,
        residual,
        iterations,
        gamma_contraction: gamma_max,
        norm_f,
        residual_trace: trace,
    })
}

/// Operator norm of `I - R S` on `l^{2,2}` with weights `(1 - r_j)^2`,
/// assembled column by column from the solver's action on unit vectors.
pub fn contraction_norm(gamma: &PointSequence, base: &dyn BaseSolver) -> Result<f64> {
    let m = gamma.len();
    let part = gamma.partition();
    let w: Vec<f64> = (0..m).map(|i| part.gap(gamma.annulus(i))).collect();
    let cols: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut e = vec![ZERO; m];
            e[k] = ONE;
            let f = base.solve(&e)?;
            let rf = restrict(&f, gamma);
            Ok(e.iter().zip(&rf).map(|(x, y)| x - y).collect())
        })
        .collect::<Result<_>>()?;
    let mat = DMatrix::from_fn(m, m, |i, k| cols[k][i] * (w[i] / w[k]));
    Ok(mat.singular_values().max())
}

/// Weights `w_k` of a diagonal quadratic form `sum w_k |c_k|^2` on coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientWeights(Vec<f64>);

impl CoefficientWeights {
    /// `w_k = ||z^k||^2_{A(p,q)} = (2/(kq+2))^{2/q}`; exact for `p = q = 2`.
    pub fn mixed(sp: &SpaceParams, degree: usize) -> Self {
        CoefficientWeights(
            (0..=degree)
                .map(|k| (2.0 / (k as f64 * sp.q + 2.0)).powf(2.0 / sp.q))
                .collect(),
        )
    }

    /// Square of the discrete norm for `p = q = 2`:
    /// `w_k = sum_n beta^n (r_{n+1}^{2k+2} - r_n^{2k+2}) / ((k+1)(r_{n+1}^2 - r_n^2))`.
    pub fn triple(part: &Partition, degree: usize) -> Self {
        CoefficientWeights(
            (0..=degree)
                .map(|k| {
                    let e = 2 * k as i32 + 2;
                    (1..part.levels())
                        .map(|n| {
                            let (a, b) = (part.ring(n), part.ring(n + 1));
                            part.gap(n) * (b.powi(e) - a.powi(e))
                                / ((k as f64 + 1.0) * (b * b - a * a))
                        })
                        .sum()
                })
                .collect(),
        )
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Monomial norms of the mixed norm.
    #[default]
    Mixed,
    /// Cell-averaged discrete norm (`p = q = 2`).
    Triple,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Objective::Mixed),
            "triple" => Ok(Objective::Triple),
            _ => Err(Error::InvalidParameter(format!("objective {s}"))),
        }
    }
}

impl Objective {
    pub fn weights(&self, sp: &SpaceParams, part: &Partition, degree: usize) -> CoefficientWeights {
        match self {
            Objective::Mixed => CoefficientWeights::mixed(sp, degree),
            Objective::Triple => CoefficientWeights::triple(part, degree),
        }
    }
}

/// Minimal weighted-norm polynomial interpolation on a fixed point set:
/// `c = W^{-1/2} B^+ a` with `B = V W^{-1/2}`, `V` the Vandermonde matrix.
pub struct MinNormSystem {
    scale: Vec<f64>,
    u: DMatrix<Complex64>,
    sigma: Vec<f64>,
    v_t: DMatrix<Complex64>,
}

impl MinNormSystem {
    pub fn new(points: &[DiscPoint], weights: &CoefficientWeights) -> Result<Self> {
        let m = points.len();
        let dim = weights.degree() + 1;
        if m > dim {
            return Err(Error::RankDeficient(format!(
                "{m} constraints exceed basis size {dim}"
            )));
        }
        let scale: Vec<f64> = weights.as_slice().iter().map(|w| 1.0 / w.sqrt()).collect();
        let b = DMatrix::from_fn(m, dim, |i, k| points[i].z().powu(k as u32) * scale[k]);
        let svd = b.svd(true, true);
        let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        let smax = sigma.iter().copied().fold(0.0, f64::max);
        let smin = sigma.iter().copied().fold(f64::INFINITY, f64::min);
        if m > 0 && !(smin > 1e-13 * smax) {
            return Err(Error::RankDeficient(format!(
                "singular values span {smax:.3e} to {smin:.3e}"
            )));
        }
        Ok(MinNormSystem {
            scale,
            u: svd.u.expect("requested"),
            sigma,
            v_t: svd.v_t.expect("requested"),
        })
    }

    /// Coefficients of the minimal-norm interpolant of `a`.
    pub fn solve(&self, a: &[Complex64]) -> Vec<Complex64> {
        let av = DVector::from_column_slice(a);
        let mut y = self.u.adjoint() * av;
        for (yi, s) in y.iter_mut().zip(&self.sigma) {
            *yi /= *s;
        }
        let c = self.v_t.adjoint() * y;
        c.iter().zip(&self.scale).map(|(x, s)| x * *s).collect()
    }

    /// Smallest singular value of `B` and its left singular vector.
    pub fn weakest_direction(&self) -> (f64, Vec<Complex64>) {
        let (k, s) = self
            .sigma
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc },
            );
        (s, self.u.column(k).iter().copied().collect())
    }
}

/// Minimal-norm polynomial of degree `degree` matching `a` on `gamma`.
pub fn least_squares_interpolant(
    gamma: &PointSequence,
    a: &[Complex64],
    degree: usize,
    sp: &SpaceParams,
    objective: Objective,
) -> Result<InterpolationResult> {
    if a.len() != gamma.len() {
        return Err(Error::LengthMismatch {
            expected: gamma.len(),
            got: a.len(),
        });
    }
    let w = objective.weights(sp, gamma.partition(), degree);
    let sys = MinNormSystem::new(gamma.points(), &w)?;
    let f = AnalyticFunction::polynomial(sys.solve(a));
    let rf = restrict(&f, gamma);
    let diff: Vec<Complex64> = a.iter().zip(&rf).map(|(x, y)| x - y).collect();
    let residual = lpq_norm(&diff, gamma, sp)?;
    let a_norm = lpq_norm(a, gamma, sp)?;
    let norm_f = function_norm(&f, sp, &QuadConfig::default())?;
    Ok(InterpolationResult {
        f,
        residual,
        iterations: usize::from(a_norm > 0.0),
        gamma_contraction: if a_norm > 0.0 { residual / a_norm } else { 0.0 },
        norm_f,
        residual_trace: vec![a_norm, residual],
    })
}

/// Base solver backed by a minimal-norm polynomial system.
pub struct LeastSquaresSolver {
    system: MinNormSystem,
}

impl LeastSquaresSolver {
    pub fn new(
        gamma: &PointSequence,
        degree: usize,
        sp: &SpaceParams,
        objective: Objective,
    ) -> Result<Self> {
        let w = objective.weights(sp, gamma.partition(), degree);
        Ok(LeastSquaresSolver {
            system: MinNormSystem::new(gamma.points(), &w)?,
        })
    }
}

impl BaseSolver for LeastSquaresSolver {
    fn solve(&self, values: &[Complex64]) -> Result<AnalyticFunction> {
        Ok(AnalyticFunction::polynomial(self.system.solve(values)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantOptions {
    pub objective: Objective,
    /// Keep only points with `1 - |z| >= kappa / N` at degree `N`.
    pub kappa: Option<f64>,
    pub include_unit_vectors: bool,
    pub include_worst_direction: bool,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        ConstantOptions {
            objective: Objective::Mixed,
            kappa: None,
            include_unit_vectors: true,
            include_worst_direction: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantTrace {
    pub degrees: Vec<usize>,
    pub points_used: Vec<usize>,
    pub m_values: Vec<f64>,
    pub estimate: f64,
}

/// Random complex data with each annulus scaled by `(1 - r_j)^{-(1+q/p)/q}`.
pub fn random_data(gamma: &PointSequence, sp: &SpaceParams, rng: &mut StdRng) -> Vec<Complex64> {
    (0..gamma.len())
        .map(|i| {
            let s = gamma
                .partition()
                .gap(gamma.annulus(i))
                .powf(-(1.0 + sp.q / sp.p) / sp.q);
            Complex64::new(standard_normal(rng), standard_normal(rng)) * s
        })
        .collect()
}

/// `M(Gamma_N) = max ||f|| / ||a||` over candidate data at one degree.
pub fn interpolation_constant_at(
    gamma: &PointSequence,
    sp: &SpaceParams,
    degree: usize,
    trials: usize,
    seed: u64,
    opts: &ConstantOptions,
) -> Result<f64> {
    if gamma.is_empty() {
        return Ok(0.0);
    }
    let w = opts.objective.weights(sp, gamma.partition(), degree);
    let sys = MinNormSystem::new(gamma.points(), &w)?;
    let m = gamma.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cands: Vec<Vec<Complex64>> = (0..trials)
        .map(|_| random_data(gamma, sp, &mut rng))
        .collect();
    if opts.include_unit_vectors {
        for k in 0..m {
            let mut e = vec![ZERO; m];
            e[k] = ONE;
            cands.push(e);
        }
    }
    if opts.include_worst_direction {
        // weakest direction of D^{1/2} B with D the Hilbert proxy of the l^{p,q} weights
        let part = gamma.partition();
        let d: Vec<f64> = (0..m)
            .map(|i| part.gap(gamma.annulus(i)).powf(2.0 / sp.q + 2.0 / sp.p))
            .collect();
        let wscale: Vec<f64> = w.as_slice().iter().map(|x| 1.0 / x.sqrt()).collect();
        let c = DMatrix::from_fn(m, w.degree() + 1, |i, k| {
            gamma.point(i).z().powu(k as u32) * wscale[k] * d[i].sqrt()
        });
        let svd = c.svd(true, false);
        let u = svd.u.expect("requested");
        let (k, _) =
            svd.singular_values
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc },
                );
        cands.push(
            u.column(k)
                .iter()
                .zip(&d)
                .map(|(x, di)| x / di.sqrt())
                .collect(),
        );
    }
    let cfg = QuadConfig::default();
    let ratios = cands
        .par_iter()
        .map(|a| {
            let an = lpq_norm(a, gamma, sp)?;
            if an == 0.0 {
                return Ok(0.0);
            }
            let f = AnalyticFunction::polynomial(sys.solve(a));
            Ok(function_norm(&f, sp, &cfg)? / an)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Interpolation-constant trace over a degree schedule.
pub fn interpolation_constant(
    gamma: &PointSequence,
    sp: &SpaceParams,
    trials: usize,
    degrees: &[usize],
    seed: u64,
    opts: &ConstantOptions,
) -> Result<ConstantTrace> {
    if trials < 20 {
        return Err(Error::InvalidParameter(format!(
            "{trials} trials; need at least 20"
        )));
    }
    let mut points_used = Vec::new();
    let mut m_values = Vec::new();
    for (i, &n) in degrees.iter().enumerate() {
        let g = match opts.kappa {
            Some(kappa) => gamma.filter(|z| 1.0 - z.modulus() >= kappa / n as f64)?,
            None => gamma.clone(),
        };
        points_used.push(g.len());
        m_values.push(interpolation_constant_at(
            &g,
            sp,
            n,
            trials,
            seed.wrapping_add(i as u64),
            opts,
        )?);
    }
    let estimate = m_values.iter().copied().fold(0.0, f64::max);
    Ok(ConstantTrace {
        degrees: degrees.to_vec(),
        points_used,
        m_values,
        estimate,
    })
}

/// `int_{E(w,r)} |f|^p (1 - |zeta|^2)^{-2} dA`, pulled back through `M_w` so the
/// domain becomes the centred disk `|u| < r`.
pub fn invariant_disk_integral(f: &AnalyticFunction, w: DiscPoint, r: f64, p: f64) -> f64 {
    let (x, wt) = crate::quadrature::gauss_legendre(24);
    let n_theta = 96;
    x.iter()
        .zip(&wt)
        .map(|(&t, &g)| {
            let s = 0.5 * r * (t + 1.0);
            let ring: f64 = (0..n_theta)
                .map(|k| {
                    let u = Complex64::from_polar(
                        s,
                        2.0 * std::f64::consts::PI * k as f64 / n_theta as f64,
                    );
                    crate::funcspace::abs_pow(f.eval(mobius_c(w.z(), u)), p)
                })
                .sum::<f64>()
                * (2.0 * std::f64::consts::PI / n_theta as f64);
            0.5 * r * g * s * ring / (1.0 - s * s).powi(2)
        })
        .sum()
}

/// `|f(z) - f(w)|^p / (rho(z, w)^p int_{E(w,r)} |f|^p dlambda)`.
pub fn oscillation_ratio(f: &AnalyticFunction, z: DiscPoint, w: DiscPoint, r: f64, p: f64) -> f64 {
    let rho = crate::hyperbolic::pseudo_distance(z, w);
    let lhs = crate::funcspace::abs_pow(f.eval(z.z()) - f.eval(w.z()), p);
    if lhs == 0.0 {
        return 0.0;
    }
    lhs / (rho.powf(p) * invariant_disk_integral(f, w, r, p))
}

/// Empirical constant of the oscillation estimate for one `(p, r)`: pairs with
/// `rho(z, w) <= r/2` are drawn at random; the first half fits `C`, the rest
/// verifies it.
pub fn oscillation_constant(
    corpus: &[AnalyticFunction],
    p: f64,
    r: f64,
    pairs: usize,
    seed: u64,
) -> Result<crate::verify::InequalityReport> {
    if !(p > 0.0) || !(r > 0.0 && r < 1.0) {
        return Err(Error::ParameterViolation(format!("p = {p}, r = {r}")));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let samples: Vec<(usize, DiscPoint, DiscPoint)> = (0..pairs)
        .map(|_| {
            let w = DiscPoint::from_polar(
                0.95 * rng.gen::<f64>().sqrt(),
                2.0 * std::f64::consts::PI * rng.gen::<f64>(),
            )?;
            let u = Complex64::from_polar(
                0.5 * r * rng.gen::<f64>().max(1e-3),
                2.0 * std::f64::consts::PI * rng.gen::<f64>(),
            );
            let z = DiscPoint::from_complex(mobius_c(w.z(), u))?;
            Ok((rng.gen_range(0..corpus.len()), z, w))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|&(i, z, w)| oscillation_ratio(&corpus[i], z, w, r, p))
        .collect();
    let half = ratios.len() / 2;
    Ok(crate::verify::InequalityReport::fitted(
        &format!("oscillation(p={p},r={r})"),
        &ratios[..half],
        &ratios[half..],
        false,
        1.1,
    ))
}

//! Analytic functions on the disc and the norms of the mixed-norm spaces.
//!
//! Area measure is normalized to `dA/pi` and circle measure to `dtheta/(2 pi)`,
//! so the constant function has norm one in every space.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hyperbolic::{DiscPoint, Partition};
use crate::quadrature::{gauss_legendre, tail_fraction, RadialRule};
use crate::seqlab::PointSequence;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const MAX_ANGULAR_NODES: usize = 1 << 16;

/// A function analytic in the open unit disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticFunction {
    /// `sum_k coeffs[k] z^k`
    Polynomial {
        coeffs: Vec<Complex64>,
    },
    /// `scale (1 - |w|^2)^growth_power / (1 - conj(w) z)^exponent`
    KernelTerm {
        node: DiscPoint,
        exponent: f64,
        scale: Complex64,
        growth_power: f64,
    },
    /// `scale * prod_i M_{w_i}(z)`
    BlaschkeProduct {
        nodes: Vec<DiscPoint>,
        scale: Complex64,
    },
    /// Quotient of polynomials whose denominator has no zeros in the open disc.
    Rational {
        numerator: Vec<Complex64>,
        denominator: Vec<Complex64>,
    },
    Product {
        factors: Vec<AnalyticFunction>,
    },
    Sum {
        parts: Vec<AnalyticFunction>,
    },
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn trimmed(coeffs: &[Complex64]) -> &[Complex64] {
    let n = coeffs
        .iter()
        .rposition(|c| c.norm() > 0.0)
        .map_or(0, |i| i + 1);
    &coeffs[..n]
}

/// Roots of a polynomial given in ascending order (Durand–Kerner).
pub fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let c = trimmed(coeffs);
    if c.len() < 2 {
        return Vec::new();
    }
    let lead = *c.last().unwrap();
    let monic: Vec<Complex64> = c.iter().map(|&a| a / lead).collect();
    let d = monic.len() - 1;
    let bound = 1.0 + monic[..d].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..2000 {
        let mut change: f64 = 0.0;
        for i in 0..d {
            let num = horner(&monic, roots[i]);
            let den = (0..d)
                .filter(|&k| k != i)
                .fold(ONE, |acc, k| acc * (roots[i] - roots[k]));
            if den.norm() == 0.0 {
                roots[i] += Complex64::new(1e-9, 1e-9);
                continue;
            }
            let step = num / den;
            roots[i] -= step;
            change = change.max(step.norm());
        }
        if change < 1e-15 * bound {
            break;
        }
    }
    roots
}

impl AnalyticFunction {
    pub fn polynomial(coeffs: Vec<Complex64>) -> Self {
        AnalyticFunction::Polynomial { coeffs }
    }

    pub fn real_polynomial(coeffs: &[f64]) -> Self {
        Self::polynomial(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: f64) -> Self {
        Self::real_polynomial(&[c])
    }

    pub fn monomial(n: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[n] = ONE;
        Self::polynomial(c)
    }

    pub fn kernel_term(
        node: DiscPoint,
        exponent: f64,
        scale: Complex64,
        growth_power: f64,
    ) -> Result<Self> {
        let f = AnalyticFunction::KernelTerm {
            node,
            exponent,
            scale,
            growth_power,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn blaschke(nodes: Vec<DiscPoint>, scale: Complex64) -> Self {
        AnalyticFunction::BlaschkeProduct { nodes, scale }
    }

    pub fn rational(numerator: Vec<Complex64>, denominator: Vec<Complex64>) -> Result<Self> {
        let f = AnalyticFunction::Rational {
            numerator,
            denominator,
        };
        f.validate()?;
        Ok(f)
    }

    /// `1 / (1 - z)`, analytic in the disc with a pole on the circle.
    pub fn cauchy_kernel_at_one() -> Self {
        AnalyticFunction::Rational {
            numerator: vec![ONE],
            denominator: vec![ONE, -ONE],
        }
    }

    /// Parses and validates a JSON function description.
    pub fn from_json(s: &str) -> Result<Self> {
        let f: AnalyticFunction = serde_json::from_str(s)?;
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticFunction::Polynomial { coeffs } => {
                if coeffs
                    .iter()
                    .any(|c| !c.re.is_finite() || !c.im.is_finite())
                {
                    return Err(Error::InvalidParameter("non-finite coefficient".into()));
                }
            }
            AnalyticFunction::KernelTerm {
                exponent,
                growth_power,
                scale,
                ..
            } => {
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::InvalidParameter(format!("exponent {exponent}")));
                }
                if !(*growth_power >= 0.0 && growth_power.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "growth power {growth_power}"
                    )));
                }
                if !scale.re.is_finite() || !scale.im.is_finite() {
                    return Err(Error::InvalidParameter("non-finite scale".into()));
                }
            }
            AnalyticFunction::BlaschkeProduct { scale, .. } => {
                if !scale.re.is_finite() || !scale.im.is_finite() {
                    return Err(Error::InvalidParameter("non-finite scale".into()));
                }
            }
            AnalyticFunction::Rational {
                numerator,
                denominator,
            } => {
                let den = trimmed(denominator);
                if den.is_empty() {
                    return Err(Error::InvalidParameter("zero denominator".into()));
                }
                if numerator
                    .iter()
                    .chain(den)
                    .any(|c| !c.re.is_finite() || !c.im.is_finite())
                {
                    return Err(Error::InvalidParameter("non-finite coefficient".into()));
                }
                if let Some(r) = polynomial_roots(den)
                    .into_iter()
                    .find(|r| r.norm() < 1.0 - 1e-9)
                {
                    return Err(Error::OutsideDisc(format!(
                        "denominator vanishes at {r} inside the disc"
                    )));
                }
            }
            AnalyticFunction::Product { factors: fs } | AnalyticFunction::Sum { parts: fs } => {
                for f in fs {
                    f.validate()?;
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            AnalyticFunction::Polynomial { coeffs } => horner(coeffs, z),
            AnalyticFunction::KernelTerm {
                node,
                exponent,
                scale,
                growth_power,
            } => {
                let w = node.z();
                let base = ONE - w.conj() * z;
                let pow = if exponent.fract() == 0.0 && *exponent <= 64.0 {
                    base.powi(-(*exponent as i32))
                } else {
                    (-exponent * base.ln()).exp()
                };
                let g = if *growth_power == 0.0 {
                    1.0
                } else {
                    node.weight().powf(*growth_power)
                };
                scale * g * pow
            }
            AnalyticFunction::BlaschkeProduct { nodes, scale } => {
                let (mut num, mut den) = (*scale, ONE);
                for w in nodes {
                    let a = w.z();
                    num *= a - z;
                    den *= ONE - a.conj() * z;
                }
                num / den
            }
            AnalyticFunction::Rational {
                numerator,
                denominator,
            } => horner(numerator, z) / horner(denominator, z),
            AnalyticFunction::Product { factors } => {
                factors.iter().fold(ONE, |acc, f| acc * f.eval(z))
            }
            AnalyticFunction::Sum { parts } => parts
                .iter()
                .fold(Complex64::new(0.0, 0.0), |acc, f| acc + f.eval(z)),
        }
    }

    /// Rough polynomial degree, used to size quadrature.
    pub fn degree_hint(&self) -> usize {
        match self {
            AnalyticFunction::Polynomial { coeffs } => trimmed(coeffs).len().saturating_sub(1),
            AnalyticFunction::KernelTerm { .. } => 0,
            AnalyticFunction::BlaschkeProduct { nodes, .. } => nodes.len(),
            AnalyticFunction::Rational {
                numerator,
                denominator,
            } => trimmed(numerator).len() + trimmed(denominator).len(),
            AnalyticFunction::Product { factors } => factors.iter().map(|f| f.degree_hint()).sum(),
            AnalyticFunction::Sum { parts } => {
                parts.iter().map(|f| f.degree_hint()).max().unwrap_or(0)
            }
        }
    }

    /// Distance from the unit circle to the nearest singularity or node, capped at 1.
    pub fn boundary_gap(&self) -> f64 {
        match self {
            AnalyticFunction::Polynomial { .. } => 1.0,
            AnalyticFunction::KernelTerm { node, .. } => 1.0 - node.modulus(),
            AnalyticFunction::BlaschkeProduct { nodes, .. } => {
                nodes.iter().map(|w| 1.0 - w.modulus()).fold(1.0, f64::min)
            }
            AnalyticFunction::Rational { denominator, .. } => polynomial_roots(denominator)
                .iter()
                .map(|r| r.norm() - 1.0)
                .fold(1.0, f64::min)
                .max(0.0),
            AnalyticFunction::Product { factors: fs } | AnalyticFunction::Sum { parts: fs } => {
                fs.iter().map(|f| f.boundary_gap()).fold(1.0, f64::min)
            }
        }
    }

    /// Angular trapezoid size for this function under `cfg`.
    pub fn angular_nodes(&self, cfg: &QuadConfig) -> usize {
        let by_degree = 4 * (self.degree_hint() + 1);
        let by_gap = (16.0 / self.boundary_gap().max(1e-3)).ceil() as usize;
        let n = cfg
            .n_theta
            .max(by_degree)
            .max(by_gap)
            .min(MAX_ANGULAR_NODES);
        n.div_ceil(8) * 8
    }
}

/// Evaluates `f` at a point of the disc.
pub fn evaluate(f: &AnalyticFunction, z: DiscPoint) -> Complex64 {
    f.eval(z.z())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub p: f64,
    pub q: f64,
}

impl SpaceParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite() && q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p}, q = {q}")));
        }
        Ok(SpaceParams { p, q })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub n_theta: usize,
    pub radial_nodes: usize,
    pub edge_refinement: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            n_theta: 512,
            radial_nodes: 16,
            edge_refinement: 40,
        }
    }
}

impl QuadConfig {
    pub fn new(n_theta: usize, radial_nodes: usize, edge_refinement: usize) -> Result<Self> {
        let c = QuadConfig {
            n_theta,
            radial_nodes,
            edge_refinement,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 8 || self.radial_nodes < 8 || self.edge_refinement < 2 {
            return Err(Error::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// First 16 hex digits of the SHA-256 of a value's JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

fn unit_circle(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
        .collect()
}

#[inline]
pub(crate) fn abs_pow(z: Complex64, p: f64) -> f64 {
    if p == 2.0 {
        z.norm_sqr()
    } else if p == 1.0 {
        z.norm()
    } else {
        z.norm_sqr().powf(0.5 * p)
    }
}

/// `(1/n) sum |f(r e^{i theta_k})|^p` over the trapezoid nodes.
fn mean_pow(f: &AnalyticFunction, r: f64, p: f64, circle: &[Complex64]) -> f64 {
    circle
        .iter()
        .map(|&u| abs_pow(f.eval(u * r), p))
        .sum::<f64>()
        / circle.len() as f64
}

/// Integral mean `M_p(r, f)` with normalized angular measure.
pub fn integral_mean(f: &AnalyticFunction, r: f64, p: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!("radius {r} not in [0,1)")));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p = {p}")));
    }
    let circle = unit_circle(f.angular_nodes(cfg));
    Ok(mean_pow(f, r, p, &circle).powf(1.0 / p))
}

fn subpanels(f: &AnalyticFunction, p: f64, width: f64) -> usize {
    1 + ((f.degree_hint() as f64 * p.max(1.0) * width) / 16.0).ceil() as usize
}

/// `int_0^1 g(r) (1-r)^a dr` on the geometric panels, each further split to
/// resolve the degree of `f`; returns per-panel contributions.
fn radial_panels<G: FnMut(f64) -> f64>(
    f: &AnalyticFunction,
    p: f64,
    cfg: &QuadConfig,
    a: f64,
    mut g: G,
) -> Vec<f64> {
    let (x, w) = gauss_legendre(cfg.radial_nodes);
    let e = cfg.edge_refinement;
    let mut sums = vec![0.0; e + 1];
    for (i, sum) in sums.iter_mut().enumerate().take(e) {
        let hi = 0.5f64.powi(i as i32);
        let lo = 0.5 * hi;
        let m = subpanels(f, p, hi - lo);
        let width = (hi - lo) / m as f64;
        for s in 0..m {
            let l = lo + s as f64 * width;
            let (h, c) = (0.5 * width, l + 0.5 * width);
            for (&t, &wt) in x.iter().zip(&w) {
                let u = c + h * t;
                *sum += wt * h * u.powf(a) * g(1.0 - u);
            }
        }
    }
    let tail = RadialRule::new(cfg.radial_nodes, e, a);
    let start = tail.nodes.len() - cfg.radial_nodes;
    for k in start..tail.nodes.len() {
        sums[e] += tail.weights[k] * g(tail.nodes[k]);
    }
    sums
}

fn finish_radial(sums: &[f64], what: &str) -> Result<f64> {
    let total: f64 = sums.iter().sum();
    if !total.is_finite() {
        return Err(Error::Diverged(format!("{what}: non-finite quadrature")));
    }
    let tail = tail_fraction(sums);
    if tail > 1e-3 {
        return Err(Error::Diverged(format!(
            "{what}: last refinements carry {tail:.3e} of the integral"
        )));
    }
    Ok(total)
}

/// `||f||_{A(p,q)} = [ int_0^1 M_p(r,f)^q 2r dr ]^{1/q}`.
pub fn mixed_norm(f: &AnalyticFunction, sp: &SpaceParams, cfg: &QuadConfig) -> Result<f64> {
    cfg.validate()?;
    let circle = unit_circle(f.angular_nodes(cfg));
    let sums = radial_panels(f, sp.p, cfg, 0.0, |r| {
        mean_pow(f, r, sp.p, &circle).powf(sp.q / sp.p) * 2.0 * r
    });
    Ok(finish_radial(&sums, "mixed norm")?.powf(1.0 / sp.q))
}

/// `M_2(r)^2 = sum |a_k|^2 r^{2k}` for a coefficient vector.
pub fn parseval_mean_square(coeffs: &[Complex64], r: f64) -> f64 {
    let r2 = r * r;
    coeffs
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * r2 + c.norm_sqr())
}

/// `||f||_{A(2,q)}` of a polynomial through Parseval's identity on each circle.
pub fn polynomial_norm_p2(coeffs: &[Complex64], q: f64, cfg: &QuadConfig) -> Result<f64> {
    let f = AnalyticFunction::Polynomial {
        coeffs: coeffs.to_vec(),
    };
    let sums = radial_panels(&f, 2.0, cfg, 0.0, |r| {
        parseval_mean_square(coeffs, r).powf(0.5 * q) * 2.0 * r
    });
    Ok(finish_radial(&sums, "mixed norm")?.powf(1.0 / q))
}

/// Average of `|f|^p` over the annulus `a <= |z| < b` (raw or normalized area agree).
fn annulus_average(
    f: &AnalyticFunction,
    p: f64,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
    circle: &[Complex64],
) -> f64 {
    let (x, w) = gauss_legendre(cfg.radial_nodes);
    let m = subpanels(f, p, b - a);
    let width = (b - a) / m as f64;
    let mut total = 0.0;
    for s in 0..m {
        let l = a + s as f64 * width;
        let (h, c) = (0.5 * width, l + 0.5 * width);
        for (&t, &wt) in x.iter().zip(&w) {
            let r = c + h * t;
            total += wt * h * mean_pow(f, r, p, circle) * 2.0 * r;
        }
    }
    total / (b * b - a * a)
}

/// Discrete equivalent norm
/// `(sum_{n=1}^{J-1} (1 - r_n) (avg_{A_n} |f|^p)^{q/p})^{1/q}`.
pub fn triple_norm(
    f: &AnalyticFunction,
    sp: &SpaceParams,
    part: &Partition,
    cfg: &QuadConfig,
) -> Result<f64> {
    cfg.validate()?;
    let circle = unit_circle(f.angular_nodes(cfg));
    let mut total = 0.0;
    for n in 1..part.levels() {
        let avg = annulus_average(f, sp.p, part.ring(n), part.ring(n + 1), cfg, &circle);
        total += part.gap(n) * avg.powf(sp.q / sp.p);
    }
    if !total.is_finite() {
        return Err(Error::Diverged("triple norm".into()));
    }
    Ok(total.powf(1.0 / sp.q))
}

/// Lower estimate of `sup (1 - |z|^2)^n |f(z)|` from a hyperbolic grid with
/// local pattern-search refinement around the best grid points.
pub fn growth_norm(f: &AnalyticFunction, n: f64, grid_density: usize) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("growth exponent {n}")));
    }
    let density = grid_density.max(1) as f64;
    // hyperbolic radius s with |z| = tanh s; cap |z| at 1 - 1e-6
    let smax = (1.0f64 - 1e-6).atanh();
    let value = |s: f64, t: f64| -> f64 {
        let r = s.clamp(0.0, smax).tanh();
        let z = Complex64::from_polar(r, t);
        (1.0 - r * r).powf(n) * f.eval(z).norm()
    };
    let rings = (smax * density).ceil() as usize;
    let mut best: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..=rings {
        let s = smax * i as f64 / rings as f64;
        let m = ((2.0 * PI * (2.0 * s).sinh() * density).ceil() as usize).clamp(8, 4096);
        for k in 0..m {
            let t = 2.0 * PI * k as f64 / m as f64;
            best.push((value(s, t), s, t));
        }
    }
    best.sort_by(|a, b| b.0.total_cmp(&a.0));
    best.truncate(5);
    let mut top = best.first().map_or(0.0, |b| b.0);
    for &(v0, s0, t0) in &best {
        let (mut v, mut s, mut t) = (v0, s0, t0);
        let mut hs = 1.0 / density;
        let mut ht = 2.0 * PI / 64.0;
        while hs > 1e-12 || ht > 1e-12 {
            let mut moved = false;
            for (ds, dt) in [(hs, 0.0), (-hs, 0.0), (0.0, ht), (0.0, -ht)] {
                let (s2, t2) = ((s + ds).clamp(0.0, smax), t + dt);
                let v2 = value(s2, t2);
                if v2 > v {
                    v = v2;
                    s = s2;
                    t = t2;
                    moved = true;
                }
            }
            if !moved {
                hs *= 0.5;
                ht *= 0.5;
            }
        }
        top = top.max(v);
    }
    Ok(top)
}

/// `( int |f|^p (1 - |z|^2)^alpha dA/pi )^{1/p}`.
pub fn weighted_bergman_norm(
    f: &AnalyticFunction,
    p: f64,
    alpha: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(alpha > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must exceed -1"
        )));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p = {p}")));
    }
    cfg.validate()?;
    let circle = unit_circle(f.angular_nodes(cfg));
    // (1 - r^2)^alpha = (1 - r)^alpha (1 + r)^alpha
    let sums = radial_panels(f, p, cfg, alpha, |r| {
        mean_pow(f, r, p, &circle) * (1.0 + r).powf(alpha) * 2.0 * r
    });
    Ok(finish_radial(&sums, "weighted Bergman norm")?.powf(1.0 / p))
}

/// `R_Gamma f = (f(z_m))` in the sequence's order.
pub fn restrict(f: &AnalyticFunction, gamma: &PointSequence) -> Vec<Complex64> {
    gamma.points().iter().map(|z| f.eval(z.z())).collect()
}

/// `(sum_j (1 - r_j)^{1 + q/p} (sum_k |a_jk|^p)^{q/p})^{1/q}`.
pub fn lpq_norm(values: &[Complex64], gamma: &PointSequence, sp: &SpaceParams) -> Result<f64> {
    if values.len() != gamma.len() {
        return Err(Error::LengthMismatch {
            expected: gamma.len(),
            got: values.len(),
        });
    }
    let part = gamma.partition();
    let mut per = vec![0.0; part.levels() as usize];
    for (i, v) in values.iter().enumerate() {
        per[gamma.annulus(i) as usize] += abs_pow(*v, sp.p);
    }
    let total: f64 = per
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(j, &s)| part.gap(j as u32).powf(1.0 + sp.q / sp.p) * s.powf(sp.q / sp.p))
        .sum();
    Ok(total.powf(1.0 / sp.q))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormRecord {
    pub norm_kind: String,
    pub p: f64,
    pub q: f64,
    pub value: f64,
    pub config_hash: String,
}

pub fn write_norm_csv<W: std::io::Write>(records: &[NormRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r).map_err(crate::seqlab::csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_poly(rng: &mut StdRng, deg: usize) -> AnalyticFunction {
        AnalyticFunction::polynomial(
            (0..=deg)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }

    #[test]
    fn evaluation_examples() {
        let z = DiscPoint::new(0.5, 0.0).unwrap();
        assert_eq!(
            evaluate(&AnalyticFunction::real_polynomial(&[1.0, 1.0]), z),
            c(1.5)
        );
        let k = AnalyticFunction::kernel_term(DiscPoint::origin(), 2.0, c(1.0), 0.0).unwrap();
        assert_eq!(evaluate(&k, DiscPoint::new(0.3, 0.7).unwrap()), c(1.0));
        let b = AnalyticFunction::blaschke(vec![z], c(1.0));
        assert_eq!(evaluate(&b, z).norm(), 0.0);
    }

    #[test]
    fn fractional_kernel_uses_principal_branch() {
        let w = DiscPoint::new(0.6, 0.3).unwrap();
        let k = AnalyticFunction::kernel_term(w, 2.5, c(1.0), 1.5).unwrap();
        let z = Complex64::new(-0.4, 0.5);
        let base = ONE - w.z().conj() * z;
        let expected = w.weight().powf(1.5) / (base.sqrt() * base * base);
        assert!((k.eval(z) - expected).norm() < 1e-13);
        assert!(AnalyticFunction::kernel_term(w, 0.0, c(1.0), 0.0).is_err());
    }

    #[test]
    fn rational_requires_poles_off_the_disc() {
        assert!(AnalyticFunction::rational(vec![ONE], vec![c(0.25), c(-1.0)]).is_err());
        let f = AnalyticFunction::cauchy_kernel_at_one();
        f.validate().unwrap();
        assert_relative_eq!(f.eval(c(0.5)).re, 2.0);
        let roots = polynomial_roots(&[c(2.0), c(-3.0), c(1.0)]);
        let mut re: Vec<f64> = roots.iter().map(|r| r.re).collect();
        re.sort_by(f64::total_cmp);
        assert_relative_eq!(re[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(re[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn json_is_tagged() {
        let f = AnalyticFunction::Sum {
            parts: vec![
                AnalyticFunction::real_polynomial(&[1.0, 2.0]),
                AnalyticFunction::kernel_term(DiscPoint::new(0.1, 0.2).unwrap(), 3.0, c(1.0), 0.5)
                    .unwrap(),
            ],
        };
        let s = serde_json::to_string(&f).unwrap();
        assert!(
            s.contains(r#""kind":"polynomial","coeffs":[[1.0,0.0],[2.0,0.0]]"#),
            "{s}"
        );
        assert_eq!(AnalyticFunction::from_json(&s).unwrap(), f);
        let bad = r#"{"kind":"kernel_term","node":[0.1,0.0],"exponent":-1.0,"scale":[1.0,0.0],"growth_power":0.0}"#;
        assert!(AnalyticFunction::from_json(bad).is_err());
    }

    #[test]
    fn integral_mean_examples() {
        let cfg = QuadConfig::default();
        for p in [0.5, 1.0, 3.0] {
            assert_relative_eq!(
                integral_mean(&AnalyticFunction::monomial(3), 0.7, p, &cfg).unwrap(),
                0.343,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                integral_mean(&AnalyticFunction::constant(1.0), 0.3, p, &cfg).unwrap(),
                1.0,
                max_relative = 1e-14
            );
        }
        let f = AnalyticFunction::real_polynomial(&[1.0, 1.0]);
        let r: f64 = 0.8;
        assert_relative_eq!(
            integral_mean(&f, r, 2.0, &cfg).unwrap(),
            (1.0 + r * r).sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn integral_means_increase_with_radius() {
        let cfg = QuadConfig::default();
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..200 {
            let deg = rng.gen_range(0..12);
            let f = random_poly(&mut rng, deg);
            let p = [0.5, 1.0, 2.0, 4.0][rng.gen_range(0..4)];
            let mut prev = 0.0;
            for k in 0..10 {
                let m = integral_mean(&f, 0.1 * k as f64, p, &cfg).unwrap();
                assert!(m >= prev * (1.0 - 1e-12));
                prev = m;
            }
        }
    }

    #[test]
    fn mixed_norm_oracles() {
        let cfg = QuadConfig::default();
        for (p, q) in [(2.0, 2.0), (1.0, 1.0), (0.5, 4.0)] {
            let sp = SpaceParams::new(p, q).unwrap();
            assert_relative_eq!(
                mixed_norm(&AnalyticFunction::constant(1.0), &sp, &cfg).unwrap(),
                1.0,
                max_relative = 1e-12
            );
        }
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        assert_relative_eq!(
            mixed_norm(&AnalyticFunction::monomial(1), &sp, &cfg).unwrap(),
            0.5f64.sqrt(),
            max_relative = 1e-12
        );
        let sp = SpaceParams::new(1.0, 1.0).unwrap();
        assert_relative_eq!(
            mixed_norm(&AnalyticFunction::monomial(1), &sp, &cfg).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn divergent_functions_are_flagged() {
        let cfg = QuadConfig::default();
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let f = AnalyticFunction::cauchy_kernel_at_one();
        assert!(matches!(mixed_norm(&f, &sp, &cfg), Err(Error::Diverged(_))));
        assert!(matches!(
            weighted_bergman_norm(&f, 2.0, 0.0, &cfg),
            Err(Error::Diverged(_))
        ));
        // 1/(1-z) lies in A(1,1): M_1 grows like log(1/(1-r))
        let sp = SpaceParams::new(1.0, 1.0).unwrap();
        assert!(mixed_norm(&f, &sp, &cfg).is_ok());
    }

    #[test]
    fn parseval_path_agrees_with_general_path() {
        let cfg = QuadConfig::default();
        let mut rng = StdRng::seed_from_u64(4);
        for q in [1.0, 2.0, 4.0] {
            let f = random_poly(&mut rng, 15);
            let coeffs = match &f {
                AnalyticFunction::Polynomial { coeffs } => coeffs.clone(),
                _ => unreachable!(),
            };
            let sp = SpaceParams::new(2.0, q).unwrap();
            assert_relative_eq!(
                polynomial_norm_p2(&coeffs, q, &cfg).unwrap(),
                mixed_norm(&f, &sp, &cfg).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn triple_norm_of_constant_and_tail() {
        let cfg = QuadConfig::default();
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let part = Partition::new(2, 20).unwrap();
        let one = triple_norm(&AnalyticFunction::constant(1.0), &sp, &part, &cfg).unwrap();
        assert_relative_eq!(one * one, 1.0 - 0.5f64.powi(19), max_relative = 1e-12);
        assert!(one > 0.25 && one < 4.0);
        // the truncation error is the geometric tail sum_{n >= J} beta^n avg_n
        let f = AnalyticFunction::monomial(5);
        let a = triple_norm(&f, &sp, &part, &cfg).unwrap();
        let b = triple_norm(&f, &sp, &Partition::new(2, 24).unwrap(), &cfg).unwrap();
        assert!(b > a);
        assert!(b * b - a * a <= 0.5f64.powi(19) * (1.0 + 1e-9));
    }

    #[test]
    fn triple_norm_is_equivalent_to_mixed_norm() {
        let cfg = QuadConfig::default();
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let part = Partition::new(2, 20).unwrap();
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..50 {
            let deg = rng.gen_range(0..=10);
            let f = random_poly(&mut rng, deg);
            let ratio =
                triple_norm(&f, &sp, &part, &cfg).unwrap() / mixed_norm(&f, &sp, &cfg).unwrap();
            assert!(ratio > 1.0 / 8.0 && ratio < 8.0, "{ratio}");
        }
    }

    #[test]
    fn growth_norm_examples() {
        assert_relative_eq!(
            growth_norm(&AnalyticFunction::constant(1.0), 0.7, 8).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let g = growth_norm(&AnalyticFunction::cauchy_kernel_at_one(), 1.0, 8).unwrap();
        assert!(g > 1.999 && g < 2.0, "{g}");
        // max_r r (1 - r^2)^{1/2} = 1/2 at r^2 = 1/2
        let g = growth_norm(&AnalyticFunction::monomial(1), 0.5, 8).unwrap();
        assert_relative_eq!(g, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn weighted_bergman_examples() {
        let cfg = QuadConfig::default();
        let one = AnalyticFunction::constant(1.0);
        assert_relative_eq!(
            weighted_bergman_norm(&one, 3.0, 0.0, &cfg).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            weighted_bergman_norm(&one, 2.0, 1.0, &cfg).unwrap(),
            0.5f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            weighted_bergman_norm(&AnalyticFunction::monomial(1), 2.0, 0.0, &cfg).unwrap(),
            0.5f64.sqrt(),
            max_relative = 1e-12
        );
        // (1 - r^2)^{-1/2}: int 2r (1-r^2)^{-1/2} dr = 2
        assert_relative_eq!(
            weighted_bergman_norm(&one, 1.0, -0.5, &cfg).unwrap(),
            2.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn mixed_and_weighted_agree_when_p_equals_q() {
        let cfg = QuadConfig::default();
        let mut rng = StdRng::seed_from_u64(13);
        for p in [1.0, 2.0, 3.0] {
            let f = random_poly(&mut rng, 8);
            let sp = SpaceParams::new(p, p).unwrap();
            assert_relative_eq!(
                mixed_norm(&f, &sp, &cfg).unwrap(),
                weighted_bergman_norm(&f, p, 0.0, &cfg).unwrap(),
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn restriction_and_sequence_norm() {
        let pts = vec![
            DiscPoint::new(0.5, 0.0).unwrap(),
            DiscPoint::new(-0.5, 0.0).unwrap(),
        ];
        let g = PointSequence::from_points(pts.clone()).unwrap();
        let vals = restrict(&AnalyticFunction::monomial(1), &g);
        assert_eq!(vals.iter().map(|v| v.re).sum::<f64>(), 0.0);
        assert!(restrict(&AnalyticFunction::blaschke(pts, ONE), &g)
            .iter()
            .all(|v| v.norm() < 1e-15));
        let sp = SpaceParams::new(2.0, 2.0).unwrap();
        let one = PointSequence::from_points(vec![DiscPoint::new(0.1, 0.0).unwrap()]).unwrap();
        assert_relative_eq!(lpq_norm(&[ONE], &one, &sp).unwrap(), 1.0);
        let j1 = PointSequence::from_points(vec![DiscPoint::new(0.6, 0.0).unwrap()]).unwrap();
        assert_relative_eq!(lpq_norm(&[ONE], &j1, &sp).unwrap(), 0.5);
        let two = PointSequence::from_points(vec![
            DiscPoint::new(0.1, 0.0).unwrap(),
            DiscPoint::new(-0.2, 0.0).unwrap(),
        ])
        .unwrap();
        assert_relative_eq!(lpq_norm(&[ONE, ONE], &two, &sp).unwrap(), 2f64.sqrt());
        assert!(matches!(
            lpq_norm(&[ONE], &two, &sp),
            Err(Error::LengthMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn norm_csv_has_expected_columns() {
        let mut buf = Vec::new();
        let rec = NormRecord {
            norm_kind: "mixed".into(),
            p: 2.0,
            q: 2.0,
            value: 1.0,
            config_hash: QuadConfig::default().hash(),
        };
        write_norm_csv(&[rec], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("norm_kind,p,q,value,config_hash\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn monomial_norms_match_closed_form(n in 0usize..=20, qi in 0usize..4, pi in 0usize..3) {
            let q = [0.5, 1.0, 2.0, 4.0][qi];
            let p = [1.0, 2.0, 3.0][pi];
            let sp = SpaceParams::new(p, q).unwrap();
            let got = mixed_norm(&AnalyticFunction::monomial(n), &sp, &QuadConfig::default()).unwrap();
            let exact = (2.0 / (n as f64 * q + 2.0)).powf(1.0 / q);
            prop_assert!((got / exact - 1.0).abs() < 1e-6);
        }

        #[test]
        fn sequence_norm_vanishes_only_at_zero(vals in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let g = PointSequence::from_points(vec![
                DiscPoint::new(0.1, 0.0).unwrap(),
                DiscPoint::new(0.6, 0.1).unwrap(),
                DiscPoint::new(-0.9, 0.0).unwrap(),
            ]).unwrap();
            let v: Vec<Complex64> = vals.iter().map(|&x| c(x)).collect();
            let n = lpq_norm(&v, &g, &SpaceParams::new(2.0, 3.0).unwrap()).unwrap();
            prop_assert!(n >= 0.0);
            prop_assert_eq!(n == 0.0, vals.iter().all(|&x| x == 0.0));
        }
    }
}

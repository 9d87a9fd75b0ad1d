//! Pseudohyperbolic geometry of the unit disc and the annular partition.
//!
//! The partition with parameter `L` (and `beta = 1/L`) splits the disc into
//! annuli `A_j = { r_j <= |z| < r_{j+1} }`, `r_j = 1 - beta^j`, and each annulus
//! into `2 L^j` polar rectangles of angular width `beta^j * pi`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A point of the open unit disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscPoint(pub(crate) Complex64);

impl DiscPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        Self::from_complex(Complex64::new(re, im))
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        if z.re.is_finite() && z.im.is_finite() && z.norm_sqr() < 1.0 {
            Ok(DiscPoint(z))
        } else {
            Err(Error::OutsideDisc(format!("{z}")))
        }
    }

    pub fn from_polar(r: f64, theta: f64) -> Result<Self> {
        Self::from_complex(Complex64::from_polar(r, theta))
    }

    pub const fn origin() -> Self {
        DiscPoint(Complex64::new(0.0, 0.0))
    }

    #[inline]
    pub fn z(&self) -> Complex64 {
        self.0
    }

    #[inline]
    pub fn re(&self) -> f64 {
        self.0.re
    }

    #[inline]
    pub fn im(&self) -> f64 {
        self.0.im
    }

    #[inline]
    pub fn modulus(&self) -> f64 {
        self.0.norm()
    }

    /// Argument normalized to `[0, 2*pi)`.
    pub fn angle(&self) -> f64 {
        let t = self.0.im.atan2(self.0.re);
        if t >= 0.0 {
            return t;
        }
        // ties at 2 pi wrap to 0
        let u = t + 2.0 * PI;
        if u >= 2.0 * PI {
            0.0
        } else {
            u
        }
    }

    /// `1 - |z|^2`
    #[inline]
    pub fn weight(&self) -> f64 {
        1.0 - self.0.norm_sqr()
    }

    pub fn rotate(&self, phi: f64) -> Self {
        DiscPoint(self.0 * Complex64::from_polar(1.0, phi))
    }
}

impl Serialize for DiscPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        DiscPoint::new(re, im).map_err(serde::de::Error::custom)
    }
}

/// Pseudohyperbolic distance `|z - w| / |1 - conj(w) z|`.
#[inline]
pub fn pseudo_distance(z: DiscPoint, w: DiscPoint) -> f64 {
    pseudo_distance_c(z.0, w.0)
}

#[inline]
pub(crate) fn pseudo_distance_c(z: Complex64, w: Complex64) -> f64 {
    let num = (z - w).norm();
    if num == 0.0 {
        return 0.0;
    }
    let den = (Complex64::new(1.0, 0.0) - w.conj() * z).norm();
    (num / den).min(1.0 - f64::EPSILON)
}

/// The disc automorphism `M_a(z) = (a - z) / (1 - conj(a) z)`.
pub fn mobius(a: DiscPoint, z: DiscPoint) -> DiscPoint {
    let w = mobius_c(a.0, z.0);
    // |M_a(z)| < 1 in exact arithmetic; rounding can only touch the boundary
    // when z is already within an ulp of it.
    if w.norm_sqr() < 1.0 {
        DiscPoint(w)
    } else {
        DiscPoint(w / (w.norm() * (1.0 + f64::EPSILON)))
    }
}

#[inline]
pub(crate) fn mobius_c(a: Complex64, z: Complex64) -> Complex64 {
    (a - z) / (Complex64::new(1.0, 0.0) - a.conj() * z)
}

/// A Euclidean disk inside the closed unit disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EuclideanDisk {
    pub center: DiscPoint,
    pub radius: f64,
}

impl EuclideanDisk {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center.z()).norm() < self.radius
    }

    /// Largest modulus reached by the closed disk.
    pub fn outer_modulus(&self) -> f64 {
        self.center.modulus() + self.radius
    }
}

/// The pseudohyperbolic disk `E(z, r)` expressed as a Euclidean disk.
pub fn hyperbolic_disk(z: DiscPoint, r: f64) -> Result<EuclideanDisk> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("radius {r} not in (0,1)")));
    }
    let a2 = z.z().norm_sqr();
    let den = 1.0 - r * r * a2;
    let center = z.z() * ((1.0 - r * r) / den);
    let radius = r * (1.0 - a2) / den;
    Ok(EuclideanDisk {
        center: DiscPoint(center),
        radius,
    })
}

/// Index of a polar rectangle `Q_{j,k}`; `k` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub j: u32,
    pub k: u64,
}

/// Partition of the disc into annuli and polar rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    #[serde(rename = "L")]
    l: u32,
    levels: u32,
}

impl Partition {
    pub fn new(l: u32, levels: u32) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidParameter(format!("L = {l} must be >= 2")));
        }
        if levels < 1 {
            return Err(Error::InvalidParameter("levels must be >= 1".into()));
        }
        // beta^levels must stay representable as a gap below 1.
        if (levels as f64) * (l as f64).ln() > 50.0 * std::f64::consts::LN_2 {
            return Err(Error::InvalidParameter(format!(
                "L^levels = {l}^{levels} exceeds double-precision resolution"
            )));
        }
        Ok(Partition { l, levels })
    }

    /// Smallest partition with ratio `l` whose last ring exceeds `modulus`.
    pub fn covering(l: u32, modulus: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&modulus) {
            return Err(Error::InvalidParameter(format!("modulus {modulus}")));
        }
        let mut levels = 1;
        let p = Partition::new(l, 1)?;
        while p.ring(levels) <= modulus {
            levels += 1;
            if levels > 200 {
                break;
            }
        }
        Partition::new(l, levels)
    }

    #[inline]
    pub fn l(&self) -> u32 {
        self.l
    }

    #[inline]
    pub fn levels(&self) -> u32 {
        self.levels
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        1.0 / self.l as f64
    }

    /// `r_j = 1 - beta^j`
    #[inline]
    pub fn ring(&self, j: u32) -> f64 {
        1.0 - self.gap(j)
    }

    /// `1 - r_j = beta^j`
    #[inline]
    pub fn gap(&self, j: u32) -> f64 {
        self.beta().powi(j as i32)
    }

    /// `r_0, ..., r_J`
    pub fn ring_radii(&self) -> Vec<f64> {
        (0..=self.levels).map(|j| self.ring(j)).collect()
    }

    pub fn last_ring(&self) -> f64 {
        self.ring(self.levels)
    }

    /// Number of polar rectangles in annulus `j`.
    pub fn cells_in(&self, j: u32) -> u64 {
        2 * (self.l as u64).pow(j)
    }

    /// Angular width `beta^j * pi` of the cells in annulus `j`.
    pub fn cell_width(&self, j: u32) -> f64 {
        self.gap(j) * PI
    }

    /// Annulus containing a modulus, ignoring the level cap.
    pub fn annulus_of(&self, modulus: f64) -> u32 {
        if modulus <= 0.0 {
            return 0;
        }
        let gap = 1.0 - modulus;
        let mut j = (gap.ln() / self.beta().ln()).floor().max(0.0) as u32;
        while j > 0 && self.ring(j) > modulus {
            j -= 1;
        }
        while self.ring(j + 1) <= modulus {
            j += 1;
        }
        j
    }

    /// Cell `Q_{j,k}` holding `z`, with lower edges included.
    pub fn cell_index(&self, z: DiscPoint) -> Result<CellIndex> {
        let m = z.modulus();
        if m >= self.last_ring() {
            return Err(Error::OutOfRange {
                modulus: m,
                r_last: self.last_ring(),
            });
        }
        let j = self.annulus_of(m);
        let n = self.cells_in(j);
        let width = self.cell_width(j);
        let theta = z.angle();
        let mut k = (theta / width).floor() as u64;
        // lower edge included: nudge back when rounding put us one cell too far
        if k > 0 && (k as f64) * width > theta {
            k -= 1;
        }
        let k = k % n;
        Ok(CellIndex { j, k: k + 1 })
    }

    /// Area of one cell of annulus `j` (raw Lebesgue measure).
    pub fn cell_area(&self, j: u32) -> f64 {
        let (a, b) = (self.ring(j), self.ring(j + 1));
        0.5 * (b * b - a * a) * self.cell_width(j)
    }
}

/// Pseudohyperbolic in/circumradius estimates for the cells of one annulus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelRadii {
    pub j: u32,
    pub inradius: f64,
    pub circumradius: f64,
    pub witness: DiscPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRadii {
    /// Largest `r` such that every sampled level admits some `E(z, r)` inside a cell.
    pub r_beta: f64,
    /// Smallest `R` such that each cell lies in the closed `E(z, R)` of any of its points.
    pub big_r_beta: f64,
    pub levels: Vec<LevelRadii>,
}

const CELL_GRID: usize = 65;
const EDGE_SAMPLES: usize = 257;

fn cell_point(part: &Partition, j: u32, s: f64, t: f64) -> Complex64 {
    let (a, b) = (part.ring(j), part.ring(j + 1));
    Complex64::from_polar(a + (b - a) * s, part.cell_width(j) * t)
}

fn cell_boundary(part: &Partition, j: u32, per_side: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(4 * per_side);
    for i in 0..per_side {
        let u = i as f64 / (per_side - 1) as f64;
        out.push(cell_point(part, j, u, 0.0));
        out.push(cell_point(part, j, u, 1.0));
        out.push(cell_point(part, j, 0.0, u));
        out.push(cell_point(part, j, 1.0, u));
    }
    out
}

/// Grid-search the pseudohyperbolic radii of the cells in annulus `j`.
///
/// All cells of an annulus are rotations of `Q_{j,1}`, so only that one is
/// searched. The circumradius is a maximum of `rho` over boundary pairs since
/// `w -> |M_z(w)|` attains its maximum over a closed cell on the boundary.
pub fn cell_pseudo_radii_at(part: &Partition, j: u32) -> LevelRadii {
    let perimeter = cell_boundary(part, j, CELL_GRID);
    let mut circumradius: f64 = 0.0;
    for (i, &z) in perimeter.iter().enumerate() {
        for &w in &perimeter[i + 1..] {
            circumradius = circumradius.max(pseudo_distance_c(z, w));
        }
    }

    let fine = cell_boundary(part, j, EDGE_SAMPLES);
    let mut inradius = 0.0;
    let mut witness = cell_point(part, j, 0.5, 0.5);
    for a in 1..CELL_GRID - 1 {
        for b in 1..CELL_GRID - 1 {
            let s = a as f64 / (CELL_GRID - 1) as f64;
            let t = b as f64 / (CELL_GRID - 1) as f64;
            let z = cell_point(part, j, s, t);
            let d = fine
                .iter()
                .map(|&w| pseudo_distance_c(z, w))
                .fold(f64::INFINITY, f64::min);
            if d > inradius {
                inradius = d;
                witness = z;
            }
        }
    }
    LevelRadii {
        j,
        inradius,
        circumradius,
        witness: DiscPoint(witness),
    }
}

/// Cell radii aggregated over annuli `0..=min(J-1, 8)`.
pub fn cell_pseudo_radii(part: &Partition) -> CellRadii {
    let top = part.levels().saturating_sub(1).min(8);
    let levels: Vec<LevelRadii> = (0..=top).map(|j| cell_pseudo_radii_at(part, j)).collect();
    let r_beta = levels
        .iter()
        .map(|l| l.inradius)
        .fold(f64::INFINITY, f64::min);
    let big_r_beta = levels.iter().map(|l| l.circumradius).fold(0.0, f64::max);
    CellRadii {
        r_beta,
        big_r_beta,
        levels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn p(re: f64, im: f64) -> DiscPoint {
        DiscPoint::new(re, im).unwrap()
    }

    fn random_point(rng: &mut StdRng) -> DiscPoint {
        let r = rng.gen::<f64>().sqrt() * 0.999;
        DiscPoint::from_polar(r, rng.gen::<f64>() * 2.0 * PI).unwrap()
    }

    #[test]
    fn rejects_points_outside() {
        assert!(DiscPoint::new(1.0, 0.0).is_err());
        assert!(DiscPoint::new(0.8, 0.7).is_err());
        assert!(DiscPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn pseudo_distance_examples() {
        let w = p(0.3, -0.4);
        assert_relative_eq!(
            pseudo_distance(DiscPoint::origin(), w),
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            pseudo_distance(p(0.5, 0.0), p(-0.5, 0.0)),
            0.8,
            epsilon = 1e-15
        );
        let a = p(0.3, 0.0);
        let (z, w) = (p(0.1, 0.0), p(0.0, 0.2));
        assert_relative_eq!(
            pseudo_distance(mobius(a, z), mobius(a, w)),
            pseudo_distance(z, w),
            epsilon = 1e-12
        );
        assert_eq!(pseudo_distance(z, z), 0.0);
    }

    #[test]
    fn mobius_examples() {
        let a = p(0.2, 0.6);
        assert!(mobius(a, a).modulus() < 1e-15);
        assert_relative_eq!(mobius(a, DiscPoint::origin()).z().re, 0.2, epsilon = 1e-15);
        let z = p(0.4, -0.1);
        let m = mobius(DiscPoint::origin(), z);
        assert_eq!(m.z(), -z.z());
    }

    #[test]
    fn mobius_is_an_involution() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let (a, z) = (random_point(&mut rng), random_point(&mut rng));
            let back = mobius(a, mobius(a, z));
            assert!((back.z() - z.z()).norm() < 1e-12);
        }
    }

    #[test]
    fn composition_bound_on_random_triples() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..2000 {
            let (z, u, w) = (
                random_point(&mut rng),
                random_point(&mut rng),
                random_point(&mut rng),
            );
            let (a, b) = (pseudo_distance(z, u), pseudo_distance(u, w));
            assert!(pseudo_distance(z, w) <= (a + b) / (1.0 + a * b) + 1e-12);
            assert_relative_eq!(
                pseudo_distance(z, w),
                pseudo_distance(w, z),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn half_plus_half_stays_within_four_fifths() {
        // points at rho = 1/2 from the rim of a rho = 1/2 disk
        let c = p(0.6, 0.3);
        for i in 0..64 {
            let t = i as f64 * PI / 32.0;
            let u = mobius(c, DiscPoint::from_polar(0.5, t).unwrap());
            for m in 0..16 {
                let s = m as f64 * PI / 8.0;
                let w = mobius(u, DiscPoint::from_polar(0.5, s).unwrap());
                assert!(pseudo_distance(c, w) <= 0.8 + 1e-12);
            }
        }
        assert_relative_eq!((0.5 + 0.5) / (1.0 + 0.25), 0.8);
    }

    #[test]
    fn hyperbolic_disk_examples() {
        let d = hyperbolic_disk(DiscPoint::origin(), 0.3).unwrap();
        assert_eq!(d.center.z(), Complex64::new(0.0, 0.0));
        assert_relative_eq!(d.radius, 0.3);
        let d = hyperbolic_disk(p(0.5, 0.0), 0.5).unwrap();
        assert_relative_eq!(d.center.re(), 0.4, epsilon = 1e-15);
        assert_relative_eq!(d.radius, 0.4, epsilon = 1e-15);
        let z = p(0.3, 0.2);
        let d = hyperbolic_disk(z, 0.6).unwrap();
        for i in 0..20 {
            let w = d.center.z() + Complex64::from_polar(d.radius, i as f64 * PI / 10.0);
            let w = DiscPoint::from_complex(w).unwrap();
            assert!((pseudo_distance(z, w) - 0.6).abs() < 1e-10);
        }
        assert!(hyperbolic_disk(z, 1.0).is_err());
    }

    #[test]
    fn cell_index_examples() {
        let part = Partition::new(2, 10).unwrap();
        assert_eq!(
            part.cell_index(p(0.1, 0.0)).unwrap(),
            CellIndex { j: 0, k: 1 }
        );
        assert_eq!(part.cell_index(p(0.75, 0.0)).unwrap().j, 2);
        assert_eq!(part.cells_in(2), 8);
        // lower angular edge belongs to the cell
        let z = DiscPoint::from_polar(0.6, PI / 2.0).unwrap();
        assert_eq!(part.cell_index(z).unwrap(), CellIndex { j: 1, k: 2 });
        let z = DiscPoint::from_polar(0.6, -1e-17).unwrap();
        assert_eq!(part.cell_index(z).unwrap().k, 1);
        let far = p(0.9999, 0.0);
        assert!(matches!(
            part.cell_index(far),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn partition_rings() {
        let part = Partition::new(3, 4).unwrap();
        let r = part.ring_radii();
        assert_eq!(r[0], 0.0);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
        assert!(*r.last().unwrap() < 1.0);
        assert!(Partition::new(1, 3).is_err());
        let json = serde_json::to_string(&part).unwrap();
        assert_eq!(json, r#"{"L":3,"levels":4}"#);
    }

    #[test]
    fn cells_cover_and_have_equal_area() {
        let part = Partition::new(2, 8).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..2000 {
            let r = rng.gen::<f64>() * part.last_ring();
            let t = rng.gen::<f64>() * 2.0 * PI;
            let z = DiscPoint::from_polar(r, t).unwrap();
            let c = part.cell_index(z).unwrap();
            let (a, b) = (part.ring(c.j), part.ring(c.j + 1));
            assert!(a <= z.modulus() && z.modulus() < b);
            let lo = (c.k - 1) as f64 * part.cell_width(c.j);
            assert!(z.angle() >= lo - 1e-12 && z.angle() < lo + part.cell_width(c.j) + 1e-12);
        }
        for j in 0..8 {
            let total = part.cell_area(j) * part.cells_in(j) as f64;
            let exact = PI * (part.ring(j + 1).powi(2) - part.ring(j).powi(2));
            assert_relative_eq!(total, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn cell_radii_are_scale_stable() {
        let part = Partition::new(2, 10).unwrap();
        // cells approach a limiting shape; the first annuli are radially thicker
        let a = cell_pseudo_radii_at(&part, 4);
        let b = cell_pseudo_radii_at(&part, 8);
        assert!(a.inradius <= a.circumradius && a.circumradius < 1.0);
        assert!((a.circumradius / b.circumradius - 1.0).abs() < 0.05);
        assert!((a.inradius / b.inradius - 1.0).abs() < 0.05, "{a:?} {b:?}");
    }
}

//! Gauss–Legendre rules and a radial rule refined geometrically toward `r = 1`.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = t;
                p0 = 1.0;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `n`-point Gauss–Legendre approximation of `int_a^b f`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
    x.iter()
        .zip(&w)
        .map(|(&t, &wt)| wt * f(m + h * t))
        .sum::<f64>()
        * h
}

/// Composite Gauss–Legendre over `panels` equal pieces of `[a, b]`.
pub fn integrate_composite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
    panels: usize,
) -> f64 {
    let (x, w) = gauss_legendre(n);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let (h, m) = (0.5 * width, lo + 0.5 * width);
        total += x
            .iter()
            .zip(&w)
            .map(|(&t, &wt)| wt * f(m + h * t))
            .sum::<f64>()
            * h;
    }
    total
}

/// Rule for `int_0^1 g(r) (1 - r)^a dr` on panels `u = 1 - r in [2^-(i+1), 2^-i]`,
/// `i < edge_refinement`, plus a tail panel `[0, 2^-edge_refinement]`.
///
/// The weight `(1-r)^a` is folded into the weights. On the tail panel the
/// substitution `u = b t^(1/(a+1))` removes the endpoint singularity.
#[derive(Debug, Clone)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    /// `1 - nodes[i]`, kept exactly since it can fall below machine epsilon
    pub gaps: Vec<f64>,
    pub weights: Vec<f64>,
    pub panel: Vec<usize>,
    pub panels: usize,
}

impl RadialRule {
    pub fn new(nodes_per_panel: usize, edge_refinement: usize, a: f64) -> Self {
        assert!(a > -1.0, "endpoint exponent must exceed -1");
        let (x, w) = gauss_legendre(nodes_per_panel);
        let mut nodes = Vec::new();
        let mut gaps = Vec::new();
        let mut weights = Vec::new();
        let mut panel = Vec::new();
        for i in 0..edge_refinement {
            let hi = 0.5f64.powi(i as i32);
            let lo = 0.5 * hi;
            let (h, m) = (0.5 * (hi - lo), 0.5 * (hi + lo));
            for (&t, &wt) in x.iter().zip(&w) {
                let u = m + h * t;
                nodes.push(1.0 - u);
                gaps.push(u);
                weights.push(wt * h * u.powf(a));
                panel.push(i);
            }
        }
        let b = 0.5f64.powi(edge_refinement as i32);
        let e = 1.0 / (a + 1.0);
        for (&t, &wt) in x.iter().zip(&w) {
            let s = 0.5 * (t + 1.0);
            let u = b * s.powf(e);
            nodes.push(1.0 - u);
            gaps.push(u);
            weights.push(0.5 * wt * b.powf(a + 1.0) / (a + 1.0));
            panel.push(edge_refinement);
        }
        RadialRule {
            nodes,
            gaps,
            weights,
            panel,
            panels: edge_refinement + 1,
        }
    }

    /// Per-panel contributions of `sum w_i g(r_i)`, ordered from the inner panel out.
    pub fn panel_sums(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.panels];
        for ((&v, &w), &p) in values.iter().zip(&self.weights).zip(&self.panel) {
            out[p] += w * v;
        }
        out
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * g(r))
            .sum()
    }
}

/// Relative size of the last two refinements' contribution to a panel sum.
pub fn tail_fraction(panel_sums: &[f64]) -> f64 {
    let total: f64 = panel_sums.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let k = panel_sums.len();
    let tail: f64 = panel_sums[k.saturating_sub(2)..].iter().sum();
    (tail / total).abs()
}

/// Evenly spaced angles `2 pi k / n`.
pub fn trapezoid_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_is_exact_to_degree_2n_minus_1() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for d in 0..(2 * n) {
                let got: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&t, &wt)| wt * t.powi(d as i32))
                    .sum();
                let exact = if d % 2 == 1 {
                    0.0
                } else {
                    2.0 / (d as f64 + 1.0)
                };
                assert!((got - exact).abs() < 1e-12, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn radial_rule_handles_endpoint_singularity() {
        for a in [-0.9, -0.5, 0.0, 0.5, 2.0] {
            let rule = RadialRule::new(16, 40, a);
            let got = rule.integrate(|_| 1.0);
            assert_relative_eq!(got, 1.0 / (a + 1.0), max_relative = 1e-12);
            // int_0^1 r (1-r)^a dr = 1/((a+1)(a+2))
            let got = rule.integrate(|r| r);
            assert_relative_eq!(got, 1.0 / ((a + 1.0) * (a + 2.0)), max_relative = 1e-12);
        }
    }

    #[test]
    fn peaked_integrand_near_one() {
        let rule = RadialRule::new(16, 40, 0.0);
        // int_0^1 dr / (1 - 0.9999 r)^2 = 1 / (1 - 0.9999)
        let got = rule.integrate(|r| (1.0 - 0.9999 * r).powi(-2));
        assert_relative_eq!(got, 1e4, max_relative = 1e-10);
    }

    #[test]
    fn tail_fraction_flags_log_divergence() {
        let rule = RadialRule::new(16, 40, 0.0);
        let vals: Vec<f64> = rule.nodes.iter().map(|&r| 1.0 / (1.0 - r)).collect();
        assert!(tail_fraction(&rule.panel_sums(&vals)) > 1e-3);
        let vals: Vec<f64> = rule.nodes.iter().map(|&r| r * r).collect();
        assert!(tail_fraction(&rule.panel_sums(&vals)) < 1e-10);
    }

    #[test]
    fn composite_matches_closed_form() {
        let got = integrate_composite(|x| x.exp(), 0.0, 40.0, 16, 8);
        assert_relative_eq!(got, 40f64.exp() - 1.0, max_relative = 1e-12);
        assert_relative_eq!(integrate(|x| x * x, 0.0, 3.0, 4), 9.0, epsilon = 1e-12);
    }
}

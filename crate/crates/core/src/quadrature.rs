//! Gauss–Legendre rules and composite panel quadrature.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots of `P_n` are found by Newton iteration from the Chebyshev-like
/// initial guess; weights follow from `P_n'` at the roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed composite rule: flattened nodes and weights over a list of panels.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// Build a composite rule with `per_panel` Gauss–Legendre nodes on each
    /// interval between consecutive `breakpoints` (which must be increasing).
    pub fn new(breakpoints: &[f64], per_panel: usize) -> Self {
        let (ref_nodes, ref_weights) = gauss_legendre(per_panel);
        let mut nodes = Vec::with_capacity(breakpoints.len() * per_panel);
        let mut weights = Vec::with_capacity(breakpoints.len() * per_panel);
        for pair in breakpoints.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        CompositeRule { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Breakpoints covering `[lo, hi]` with every `forced` point inside the range
/// included and no panel longer than `max_len`.
pub fn panel_breakpoints(lo: f64, hi: f64, forced: &[f64], max_len: f64) -> Vec<f64> {
    let mut anchors: Vec<f64> = forced.iter().copied().filter(|&x| x > lo && x < hi).collect();
    anchors.push(lo);
    anchors.push(hi);
    anchors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    anchors.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * (1.0 + b.abs()));
    let mut out = vec![anchors[0]];
    for pair in anchors.windows(2) {
        let len = pair[1] - pair[0];
        let pieces = (len / max_len).ceil().max(1.0) as usize;
        for j in 1..=pieces {
            out.push(pair[0] + len * j as f64 / pieces as f64);
        }
        *out.last_mut().unwrap() = pair[1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_point_rule_matches_tabulated_values() {
        let (x, w) = gauss_legendre(8);
        assert!((x[7] - 0.960_289_856_497_536_2).abs() < 1e-15);
        assert!((w[7] - 0.101_228_536_290_376_3).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_degree_fifteen() {
        let (x, w) = gauss_legendre(8);
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((approx - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_on_split_panels() {
        let bp = panel_breakpoints(0.0, PI, &[1.0, 2.0], 0.3);
        assert!(bp.contains(&1.0));
        assert!(bp.windows(2).all(|p| p[1] - p[0] <= 0.3 + 1e-12));
        let rule = CompositeRule::new(&bp, 8);
        assert!((rule.integrate(f64::sin) - 2.0).abs() < 1e-14);
    }
}

//! Quadrature rules used as independent oracles in the test-suite and for the
//! NIG jump-moment cross-check.
//!
//! Gauss–Hermite nodes come from the Golub–Welsch eigenvalues, polished by
//! Newton steps on the normalized recurrence; weights use the Christoffel sum
//! so that the tiny tail weights keep full relative precision.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule for the probabilists' weight `exp(-x²/2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Hermite rule needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let off = (k as f64).sqrt();
            jacobi[(k, k - 1)] = off;
            jacobi[(k - 1, k)] = off;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..4 {
                let (hn, hn1, _) = normalized_hermite(n, *x);
                let step = hn / ((n as f64).sqrt() * hn1);
                if !step.is_finite() {
                    break;
                }
                *x -= step;
            }
            let (_, _, sq) = normalized_hermite(n, *x);
            weights.push((2.0 * PI).sqrt() / sq);
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f(x) exp(-x²/2) dx`
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Returns `(h_n(x), h_{n-1}(x), Σ_{k<n} h_k(x)²)` with `h_k = He_k / sqrt(k!)`.
fn normalized_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sq = 0.0;
    for k in 0..n {
        sq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sq)
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    /// `∫_a^b f(x) dx`
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Composite 20-point Gauss–Legendre over `panels` equal panels of `[a, b]`.
pub fn integrate_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = GaussLegendre::new(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| rule.integrate(&f, a + i as f64 * h, a + (i + 1) as f64 * h))
        .sum()
}

/// Adaptive bisection with a 15-point Gauss–Legendre rule: a panel is
/// accepted once it agrees with the sum of its two halves to `tol` (relative
/// to the running magnitude).
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate_adaptive_abs(f, a, b, tol, 0.0)
}

/// As [`integrate_adaptive`], but a panel is also accepted once its error
/// estimate drops below its share of the absolute tolerance `abs_tol`.
pub fn integrate_adaptive_abs(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, abs_tol: f64) -> f64 {
    let rule = GaussLegendre::new(15);
    let whole = rule.integrate(&f, a, b);
    // error budget shared across subintervals in proportion to their width,
    // so roundoff-level integrands do not force a full-depth recursion
    let budget = (tol * whole.abs()).max(abs_tol).max(f64::MIN_POSITIVE) / (b - a).abs().max(f64::MIN_POSITIVE);
    adapt(&rule, &f, a, b, whole, tol, budget, 0)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    rule: &GaussLegendre,
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    budget: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let split = left + right;
    let err = (split - whole).abs();
    if depth >= 30 || !split.is_finite() || err <= tol * split.abs() || err <= budget * (b - a).abs() {
        return split;
    }
    adapt(rule, f, a, mid, left, tol, budget, depth + 1) + adapt(rule, f, mid, b, right, tol, budget, depth + 1)
}

/// `∫_a^∞ f` for an integrand with (at least) exponential decay: adaptive
/// integration over doubling panels until a panel adds less than `tol`
/// relative to the total.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    let mut lo = a;
    let mut width = 1.0;
    let mut total = 0.0f64;
    for _ in 0..200 {
        let piece = integrate_adaptive_abs(&f, lo, lo + width, tol, 1e-3 * tol * total.abs());
        total += piece;
        if !piece.is_finite() || piece.abs() <= tol * total.abs() * 1e-3 {
            break;
        }
        lo += width;
        width *= 2.0;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_rule_integrates_even_moments() {
        let rule = GaussHermite::new(200);
        let norm = (2.0 * PI).sqrt();
        assert_relative_eq!(rule.integrate(|_| 1.0), norm, max_relative = 1e-13);
        // E[Z^{2k}] = (2k-1)!!
        let mut dfact = 1.0;
        for k in 1..=30 {
            dfact *= (2 * k - 1) as f64;
            let q = rule.integrate(|x| x.powi(2 * k as i32)) / norm;
            assert_relative_eq!(q, dfact, max_relative = 1e-12);
        }
    }

    #[test]
    fn hermite_rule_is_symmetric() {
        let rule = GaussHermite::new(41);
        let n = rule.nodes().len();
        for i in 0..n {
            assert_relative_eq!(rule.nodes()[i], -rule.nodes()[n - 1 - i], epsilon = 1e-12);
        }
    }

    #[test]
    fn legendre_rules() {
        let rule = GaussLegendre::new(12);
        assert_relative_eq!(
            rule.integrate(|x| x.powi(22), -1.0, 1.0),
            2.0 / 23.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(integrate_composite(f64::sin, 0.0, PI, 4), 2.0, max_relative = 1e-14);
        assert_relative_eq!(
            integrate_adaptive(|x| x.sqrt(), 0.0, 1.0, 1e-13),
            2.0 / 3.0,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-14),
            1.0,
            max_relative = 1e-12
        );
    }
}

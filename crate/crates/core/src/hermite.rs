//! Probabilists' Hermite polynomials, their drift/scale generalization, the
//! monomial change of basis and the Hermite series of the call payoff.
//!
//! `q_n` satisfies `q_{n+1}(x) = x q_n(x) - n q_{n-1}(x)`, and the generalized
//! family is `q_n^{a,b}(x) = b^{-n} q_n((x - a) / b)`, orthogonal under the
//! weight `w_{a,b}(x) = exp(-(x - a)² / 2b²)`.

use std::f64::consts::PI;

use libm::lgamma as ln_gamma;
use nalgebra::DMatrix;

use crate::bench::{std_normal, std_normal_sf};
use crate::{Error, Result};

/// Largest order accepted for dense change-of-basis matrices. Above it the
/// monomial coefficients of `q_n` leave the double range.
pub const MAX_BASIS_ORDER: usize = 200;

/// Default horizon of the truncated L² tail sum.
pub const L2_TAIL_HORIZON: usize = 160;

/// `q_n(x)` by the three-term recurrence. Overflows to ±inf for extreme
/// `n`, `x`.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `Q_N(x) = (q_0(x), ..., q_N(x))`.
pub fn hermite_values(order: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(1.0);
    if order >= 1 {
        out.push(x);
    }
    for k in 1..order {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// Drift `a`, scale `b > 0` and truncation order `N` of a generalized Hermite
/// family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhpBasis {
    drift: f64,
    scale: f64,
    order: usize,
}

impl GhpBasis {
    pub fn new(drift: f64, scale: f64, order: usize) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::InvalidParameter(format!("drift must be finite, got {drift}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("scale must be > 0, got {scale}")));
        }
        Ok(Self { drift, scale, order })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn with_order(self, order: usize) -> Self {
        Self { order, ..self }
    }

    /// `(x - a) / b`
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.drift) / self.scale
    }

    /// `w_{a,b}(x)`
    pub fn weight(&self, x: f64) -> f64 {
        let z = self.standardize(x);
        (-0.5 * z * z).exp()
    }

    /// `q_n^{a,b}(x) = b^{-n} q_n((x - a) / b)`.
    ///
    /// # Panics
    /// If `n` exceeds the basis order.
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        assert!(n <= self.order, "degree {n} above basis order {}", self.order);
        hermite_eval(n, self.standardize(x)) * self.scale.powi(-(n as i32))
    }

    /// `‖q_n^{a,b}‖² = sqrt(2π) n! / b^{2n-1}`, in log space above `n = 20`.
    ///
    /// # Panics
    /// If `n` exceeds the basis order.
    pub fn norm_sq(&self, n: usize) -> f64 {
        assert!(n <= self.order, "degree {n} above basis order {}", self.order);
        let exponent = 2.0 * n as f64 - 1.0;
        if n <= 20 {
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            (2.0 * PI).sqrt() * fact / self.scale.powf(exponent)
        } else {
            let log = 0.5 * (2.0 * PI).ln() + ln_gamma(n as f64 + 1.0) - exponent * self.scale.ln();
            log.exp()
        }
    }
}

/// Free-function form of [`GhpBasis::eval`].
pub fn ghp_eval(basis: &GhpBasis, n: usize, x: f64) -> f64 {
    basis.eval(n, x)
}

/// Free-function form of [`GhpBasis::norm_sq`].
pub fn ghp_norm_sq(basis: &GhpBasis, n: usize) -> f64 {
    basis.norm_sq(n)
}

/// `M_N` with `M_N H_N(x) = Q_N(x)`: row `n` holds the monomial coefficients
/// of `q_n`. Lower triangular with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeOfBasis {
    order: usize,
    matrix: DMatrix<f64>,
}

pub fn change_of_basis(order: usize) -> Result<ChangeOfBasis> {
    ChangeOfBasis::new(order)
}

impl ChangeOfBasis {
    pub fn new(order: usize) -> Result<Self> {
        if order > MAX_BASIS_ORDER {
            return Err(Error::InvalidParameter(format!(
                "change of basis limited to order {MAX_BASIS_ORDER}, got {order}"
            )));
        }
        let dim = order + 1;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        m[(0, 0)] = 1.0;
        if order >= 1 {
            m[(1, 1)] = 1.0;
        }
        for n in 1..order {
            for j in 0..=n + 1 {
                let shifted = if j > 0 { m[(n, j - 1)] } else { 0.0 };
                m[(n + 1, j)] = shifted - n as f64 * m[(n - 1, j)];
            }
        }
        Ok(Self { order, matrix: m })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `M_N^{-1}`, mapping Hermite values back to monomials.
    pub fn inverse(&self) -> DMatrix<f64> {
        let dim = self.order + 1;
        self.matrix
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .expect("unit lower-triangular matrix is invertible")
    }

    /// `M_N H_N(x)`
    pub fn apply_to_monomials(&self, x: f64) -> Vec<f64> {
        let h: Vec<f64> = monomials(self.order, x);
        (0..=self.order)
            .map(|n| (0..=n).map(|j| self.matrix[(n, j)] * h[j]).sum())
            .collect()
    }
}

/// `H_n(x) = (1, x, ..., x^n)`.
pub fn monomials(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut p = 1.0;
    for _ in 0..=n {
        out.push(p);
        p *= x;
    }
    out
}

/// Coefficients `β_0..β_N` of the truncated call-payoff series
/// `φ_{K,N}^{a,b}(x) = Σ β_n q_n((x - a) / b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffExpansion {
    strike: f64,
    basis: GhpBasis,
    beta: Vec<f64>,
}

/// Closed-form Hermite coefficients of `max(x - K, 0)` with `d = (K - a) / b`:
///
/// * `β_0 = b φ(d) + (a - K)(1 - Φ(d))`
/// * `β_1 = b (1 - Φ(d))`
/// * `β_n = b φ(d) q_{n-2}(d) / n!` for `n ≥ 2`
///
/// `q_{n-2}(d) / n!` is carried as a single scaled recurrence, so no
/// factorial is ever formed.
pub fn payoff_coefficients(strike: f64, basis: &GhpBasis) -> Result<PayoffExpansion> {
    if !(strike >= 0.0) || !strike.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "strike must be finite and non-negative, got {strike}"
        )));
    }
    let order = basis.order();
    let b = basis.scale();
    let d = (strike - basis.drift()) / b;
    let (pdf, _) = std_normal(d);
    let tail = std_normal_sf(d);

    let mut beta = Vec::with_capacity(order + 1);
    beta.push(b * pdf + (basis.drift() - strike) * tail);
    if order >= 1 {
        beta.push(b * tail);
    }
    // r_k = q_k(d) / k!
    let (mut r_prev, mut r_cur) = (0.0, 1.0);
    for n in 2..=order {
        let k = n - 2;
        beta.push(b * pdf * r_cur / (n * (n - 1)) as f64);
        let next = (d * r_cur - r_prev) / (k + 1) as f64;
        r_prev = r_cur;
        r_cur = next;
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("non-finite payoff coefficient".into()));
    }
    Ok(PayoffExpansion {
        strike,
        basis: *basis,
        beta,
    })
}

impl PayoffExpansion {
    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn basis(&self) -> &GhpBasis {
        &self.basis
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    /// `β̂_N = β_Nᵀ M_N`: coefficients of the series in powers of
    /// `(x - a) / b`.
    pub fn monomial_coefficients(&self, cob: &ChangeOfBasis) -> Vec<f64> {
        let order = self.order();
        assert!(
            cob.order() >= order,
            "change of basis of order {} too small",
            cob.order()
        );
        let m = cob.matrix();
        (0..=order)
            .map(|k| (k..=order).map(|n| self.beta[n] * m[(n, k)]).sum())
            .collect()
    }
}

/// `φ_{K,N}^{a,b}(x) = Σ_{n≤N} β_n q_n((x - a) / b)`.
pub fn payoff_series_eval(exp: &PayoffExpansion, x: f64) -> f64 {
    let z = exp.basis.standardize(x);
    hermite_values(exp.order(), z)
        .iter()
        .zip(&exp.beta)
        .map(|(q, b)| q * b)
        .sum()
}

/// `n! β_n² / (b φ(d))²` for the payoff series, `n ≥ 2`, through the
/// normalized recurrence `h_k = q_k / sqrt(k!)`:
/// `q_{n-2}(d)² / n! = h_{n-2}(d)² / (n (n-1))`.
struct TailTerms {
    d: f64,
    k: usize,
    h_prev: f64,
    h_cur: f64,
}

impl TailTerms {
    fn new(d: f64) -> Self {
        Self {
            d,
            k: 0,
            h_prev: 0.0,
            h_cur: 1.0,
        }
    }
}

impl Iterator for TailTerms {
    /// `(n, q_{n-2}(d)² / n!)` starting at `n = 2`.
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.k + 2;
        let term = self.h_cur * self.h_cur / (n * (n - 1)) as f64;
        let k = self.k as f64;
        let next = (self.d * self.h_cur - k.sqrt() * self.h_prev) / (k + 1.0).sqrt();
        self.h_prev = self.h_cur;
        self.h_cur = next;
        self.k += 1;
        Some((n, term))
    }
}

/// L²_{a,b} norm of `φ_K - φ_{K,N}^{a,b}` from Parseval, with the tail
/// summed over the `tail_terms` orders `N+1 ..= N+tail_terms`:
///
/// `‖φ_K - φ_{K,N}‖² = sqrt(2π) b Σ_{n>N} n! β_n²
///                  = sqrt(2π) b³ φ(d)² Σ_{n>N} q_{n-2}(d)² / n!`   (n ≥ 2).
///
/// The tail decays only polynomially (terms ~ n^{-5/2}), so truncation
/// underestimates; [`payoff_l2_error_exact`] gives the untruncated value.
pub fn payoff_l2_error(exp: &PayoffExpansion, tail_terms: usize) -> Result<f64> {
    if tail_terms == 0 {
        return Err(Error::InvalidParameter("tail_terms must be >= 1".into()));
    }
    let order = exp.order();
    let b = exp.basis.scale();
    let d = (exp.strike - exp.basis.drift()) / b;
    let (pdf, _) = std_normal(d);
    let root = (2.0 * PI).sqrt();

    let first = order + 1;
    let last = order + tail_terms;
    // n = 1 is outside the q_{n-2} family: β_1 = b (1 - Φ(d))
    let lead = if first == 1 {
        let t = b * std_normal_sf(d);
        t * t
    } else {
        0.0
    };
    let mut sum = 0.0;
    for (n, term) in TailTerms::new(d) {
        if n > last {
            break;
        }
        if n < first {
            continue;
        }
        if !term.is_finite() {
            return Err(Error::Overflow(format!("L2 tail term at n = {n} is not finite")));
        }
        sum += term;
    }
    let err_sq = root * b * (lead + b * b * pdf * pdf * sum);
    if !err_sq.is_finite() {
        return Err(Error::Overflow("L2 error is not finite".into()));
    }
    Ok(err_sq.sqrt())
}

/// [`payoff_l2_error`] with the default horizon (`160 - N` tail terms, at
/// least one).
pub fn payoff_l2_error_default(exp: &PayoffExpansion) -> Result<f64> {
    let tail = L2_TAIL_HORIZON.saturating_sub(exp.order()).max(1);
    payoff_l2_error(exp, tail)
}

/// Untruncated L² error: `‖φ_K‖² - Σ_{n≤N} n! β_n² sqrt(2π) b`, with
/// `‖φ_K‖² = sqrt(2π) b³ [(1 + d²)(1 - Φ(d)) - d φ(d)]`.
pub fn payoff_l2_error_exact(exp: &PayoffExpansion) -> f64 {
    let b = exp.basis.scale();
    let d = (exp.strike - exp.basis.drift()) / b;
    let (pdf, _) = std_normal(d);
    let sf = std_normal_sf(d);
    let root = (2.0 * PI).sqrt();
    let full = root * b.powi(3) * ((1.0 + d * d) * sf - d * pdf);

    let mut head = exp.beta[0] * exp.beta[0];
    if exp.order() >= 1 {
        head += exp.beta[1] * exp.beta[1];
    }
    let scaled: f64 = TailTerms::new(d)
        .take_while(|&(n, _)| n <= exp.order())
        .map(|(_, t)| t)
        .sum();
    head += b * b * pdf * pdf * scaled;
    (full - root * b * head).max(0.0).sqrt()
}

//! Normal inverse Gaussian jump measure and its polynomial moments
//! `c_m = ∫ z^m ν(dz)`.

use std::f64::consts::PI;

use crate::quadrature::integrate_to_infinity;
use crate::{Error, Result};

/// Orders at and below which [`levy_moments`] re-derives `c_m` by
/// quadrature.
pub const CROSS_CHECK_ORDER: usize = 10;

const CROSS_CHECK_TOL: f64 = 1e-7;

/// NIG parameters `(α, β, μ, δ)` with `|β| < α`, `δ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigParams {
    alpha: f64,
    beta: f64,
    mu: f64,
    delta: f64,
}

impl NigParams {
    pub fn new(alpha: f64, beta: f64, mu: f64, delta: f64) -> Result<Self> {
        let finite = [alpha, beta, mu, delta].iter().all(|v| v.is_finite());
        if !finite || !(alpha > 0.0) || !(beta.abs() < alpha) || !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "NIG parameters need alpha > |beta| and delta > 0, got \
                 (alpha, beta, mu, delta) = ({alpha}, {beta}, {mu}, {delta})"
            )));
        }
        Ok(Self { alpha, beta, mu, delta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `γ = sqrt(α² - β²)`
    pub fn gamma(&self) -> f64 {
        (self.alpha * self.alpha - self.beta * self.beta).sqrt()
    }

    /// Mean of the NIG law at unit time, `μ + δβ/γ`.
    pub fn mean(&self) -> f64 {
        self.mu + self.delta * self.beta / self.gamma()
    }
}

/// `c[m] = ∫ z^m ν(dz)` for `m = 2..=n_max`; entries 0 and 1 are stored as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyMoments {
    c: Vec<f64>,
}

impl LevyMoments {
    pub fn get(&self, m: usize) -> f64 {
        self.c[m]
    }

    pub fn n_max(&self) -> usize {
        self.c.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }
}

/// Cumulant route: `ψ(u) = μu + δ(γ - sqrt(α² - (β + u)²))`, so for `m ≥ 2`
/// `c_m = ψ^{(m)}(0) = -δ m! s_m` with `s_m` the power-series coefficients of
/// `sqrt(w(u))`, `w(u) = γ² - 2βu - u²`. Entries that leave the double range
/// are stored as `inf`.
pub(crate) fn cumulant_moments(p: &NigParams, n_max: usize) -> Vec<f64> {
    let w = [p.gamma() * p.gamma(), -2.0 * p.beta, -1.0];
    let mut s = vec![0.0; n_max + 1];
    s[0] = p.gamma();
    for k in 1..=n_max {
        let wk = if k < 3 { w[k] } else { 0.0 };
        let conv: f64 = (1..k).map(|j| s[j] * s[k - j]).sum();
        s[k] = (wk - conv) / (2.0 * s[0]);
    }
    let mut c = vec![0.0; n_max + 1];
    let mut log_fact = 0.0f64;
    for m in 1..=n_max {
        log_fact += (m as f64).ln();
        if m >= 2 {
            c[m] = if s[m] == 0.0 {
                0.0
            } else {
                -p.delta * s[m].signum() * (log_fact + s[m].abs().ln()).exp()
            };
        }
    }
    c
}

/// Quadrature route: with `ν(dz) = (δα/π) e^{βz} K_1(α|z|)/|z| dz` and
/// `K_1(x) = ∫_0^∞ e^{-x cosh t} cosh t dt`, the `z`-integral is done in
/// closed form:
/// `c_m = (δα/π)(m-1)! ∫_0^∞ cosh t [(α cosh t - β)^{-m} + (-1)^m (α cosh t + β)^{-m}] dt`.
pub fn levy_moment_quadrature(p: &NigParams, m: usize) -> f64 {
    assert!(m >= 2, "jump moments start at order 2");
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let (a, b) = (p.alpha, p.beta);
    let f = |t: f64| {
        // written in powers of 1/cosh so the tail underflows to zero cleanly
        let w = 1.0 / t.cosh();
        w.powi(m as i32 - 1) * ((a - b * w).powi(-(m as i32)) + sign * (a + b * w).powi(-(m as i32)))
    };
    let fact: f64 = (1..m).map(|k| k as f64).product();
    p.delta * a / PI * fact * integrate_to_infinity(f, 0.0, 1e-13)
}

/// Jump moments up to `n_max` from the cumulants, cross-checked against
/// quadrature for orders up to [`CROSS_CHECK_ORDER`].
pub fn levy_moments(p: &NigParams, n_max: usize) -> Result<LevyMoments> {
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "levy moments need n_max >= 2, got {n_max}"
        )));
    }
    let c = cumulant_moments(p, n_max);
    for m in 2..=n_max.min(CROSS_CHECK_ORDER) {
        let q = levy_moment_quadrature(p, m);
        let scale = c[m].abs().max(q.abs());
        if (c[m] - q).abs() > CROSS_CHECK_TOL * scale && (c[m] - q).abs() > 1e-300 {
            return Err(Error::Numerical(format!(
                "jump moment c_{m}: cumulant value {} disagrees with quadrature {q}",
                c[m]
            )));
        }
    }
    if let Some(m) = c.iter().position(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("jump moment c_{m} is not finite")));
    }
    Ok(LevyMoments { c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_examples() {
        let p = NigParams::new(1.0, 0.0, 0.0, 0.05).unwrap();
        let c = levy_moments(&p, 10).unwrap();
        assert_relative_eq!(c.get(2), 0.05, max_relative = 1e-15);
        assert_eq!(c.get(3), 0.0);
        assert_relative_eq!(c.get(4), 0.15, max_relative = 1e-14);
        for m in (3..=10).step_by(2) {
            assert_eq!(c.get(m), 0.0);
        }
    }

    #[test]
    fn skewed_low_cumulants() {
        let (a, b, d) = (2.0f64, 0.7f64, 0.3f64);
        let p = NigParams::new(a, b, 0.1, d).unwrap();
        let c = levy_moments(&p, 10).unwrap();
        let g2 = a * a - b * b;
        assert_relative_eq!(c.get(2), d * a * a / g2.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(c.get(3), 3.0 * d * a * a * b / g2.powf(2.5), max_relative = 1e-14);
        assert_relative_eq!(
            c.get(4),
            3.0 * d * a * a * (a * a + 4.0 * b * b) / g2.powf(3.5),
            max_relative = 1e-14
        );
    }

    #[test]
    fn quadrature_agrees_on_experiment_parameters() {
        let p = NigParams::new(1.0, 0.0, 0.0, 0.05).unwrap();
        let c = cumulant_moments(&p, 10);
        for m in 2..=10 {
            assert_relative_eq!(
                levy_moment_quadrature(&p, m),
                c[m],
                max_relative = 1e-7,
                epsilon = 1e-300
            );
        }
        let skew = NigParams::new(1.5, -0.6, 0.0, 0.2).unwrap();
        let c = cumulant_moments(&skew, 10);
        for m in 2..=10 {
            assert_relative_eq!(levy_moment_quadrature(&skew, m), c[m], max_relative = 1e-7);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(NigParams::new(1.0, 1.0, 0.0, 0.05).is_err());
        assert!(NigParams::new(1.0, -1.2, 0.0, 0.05).is_err());
        assert!(NigParams::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(NigParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        let p = NigParams::new(1.0, 0.0, 0.0, 0.05).unwrap();
        assert!(levy_moments(&p, 1).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let p = NigParams::new(0.5, 0.0, 0.0, 1.0).unwrap();
        assert!(matches!(levy_moments(&p, 200), Err(Error::Overflow(_))));
    }
}

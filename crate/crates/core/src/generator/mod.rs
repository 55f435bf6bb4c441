//! Polynomial jump-diffusion models
//! `dY = (b0 + b1 Y) dt + sqrt(σ0) dB + ∫ z Ñ(dt, dz)` and their generator
//! matrices on the monomial basis `H_n(x) = (1, x, ..., x^n)`.
//!
//! The generator acts on `x^k` as
//! `(b0 + b1 x) k x^{k-1} + (σ0/2) k(k-1) x^{k-2} + Σ_{j=2}^{k} C(k,j) c_j x^{k-j}`,
//! so `G_n` is lower triangular and `G_n` is the leading block of every
//! `G_{n'}`, `n' ≥ n`.

mod expm;
mod levy;

use nalgebra::{DMatrix, DVector};

pub use expm::matrix_exponential;
pub use levy::{levy_moment_quadrature, levy_moments, LevyMoments, NigParams, CROSS_CHECK_ORDER};

use crate::hermite::monomials;
use crate::{Error, Result};

/// Largest generator order accepted.
pub const MAX_GENERATOR_ORDER: usize = 200;

/// Model parameters `(b0, b1, σ0)` plus an optional state-independent NIG
/// jump measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    drift_const: f64,
    drift_lin: f64,
    diff_sq: f64,
    jumps: Option<NigParams>,
    jump_moments: Vec<f64>,
}

impl ModelSpec {
    /// Gaussian OU (Brownian motion with drift when `b1 = 0`).
    pub fn ou(drift_const: f64, drift_lin: f64, diff_sq: f64) -> Result<Self> {
        let finite = [drift_const, drift_lin, diff_sq].iter().all(|v| v.is_finite());
        if !finite || diff_sq < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "model needs finite (b0, b1) and sigma0 >= 0, got ({drift_const}, {drift_lin}, {diff_sq})"
            )));
        }
        Ok(Self {
            drift_const,
            drift_lin,
            diff_sq,
            jumps: None,
            jump_moments: Vec::new(),
        })
    }

    /// Standard Brownian motion.
    pub fn brownian() -> Self {
        Self::ou(0.0, 0.0, 1.0).expect("valid constants")
    }

    /// Adds the compensated NIG jump measure. Jump moments are taken from
    /// the cumulants; run [`levy_moments`] for the quadrature cross-check.
    pub fn with_jumps(mut self, p: NigParams) -> Self {
        self.jump_moments = levy::cumulant_moments(&p, MAX_GENERATOR_ORDER);
        self.jumps = Some(p);
        self
    }

    pub fn drift_const(&self) -> f64 {
        self.drift_const
    }

    pub fn drift_lin(&self) -> f64 {
        self.drift_lin
    }

    pub fn diff_sq(&self) -> f64 {
        self.diff_sq
    }

    pub fn jumps(&self) -> Option<&NigParams> {
        self.jumps.as_ref()
    }

    /// `c_m`, zero without jumps.
    pub fn jump_moment(&self, m: usize) -> f64 {
        self.jump_moments.get(m).copied().unwrap_or(0.0)
    }

    /// Deterministic flow `ŷ(τ)` of `dy = (b0 + b1 y) dτ` from `y`.
    pub fn drift_flow(&self, y: f64, tau: f64) -> f64 {
        let x = self.drift_lin * tau;
        y * x.exp() + self.drift_const * tau * crate::bench::exprel(x)
    }

    /// `E[Y(t + τ) | Y(t) = y]`. Jumps are compensated, so this is the
    /// drift flow for every model in the class.
    pub fn mean(&self, y: f64, tau: f64) -> f64 {
        self.drift_flow(y, tau)
    }

    /// Short label such as `ou(b0=-0.02,b1=0.01,sigma0=0.98)`.
    pub fn describe(&self) -> String {
        let base = format!("b0={},b1={},sigma0={}", self.drift_const, self.drift_lin, self.diff_sq);
        match &self.jumps {
            None => format!("ou({base})"),
            Some(p) => format!(
                "nig-jd({base},alpha={},beta={},mu={},delta={})",
                p.alpha(),
                p.beta(),
                p.mu(),
                p.delta()
            ),
        }
    }
}

/// `G_n` with `G x^k = Σ_j G_n[k, j] x^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    n: usize,
    matrix: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `e^{G_n τ}`
    pub fn exp(&self, tau: f64) -> Result<DMatrix<f64>> {
        matrix_exponential(&(&self.matrix * tau))
    }
}

/// Builds `G_n` for `spec`.
pub fn generator_matrix(spec: &ModelSpec, n: usize) -> Result<GeneratorMatrix> {
    if n > MAX_GENERATOR_ORDER {
        return Err(Error::InvalidParameter(format!(
            "generator order limited to {MAX_GENERATOR_ORDER}, got {n}"
        )));
    }
    let dim = n + 1;
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for k in 1..dim {
        let kf = k as f64;
        g[(k, k)] += spec.drift_lin * kf;
        g[(k, k - 1)] += spec.drift_const * kf;
        if k >= 2 {
            g[(k, k - 2)] += 0.5 * spec.diff_sq * kf * (kf - 1.0);
        }
    }
    if spec.jumps.is_some() {
        for k in 2..dim {
            // C(k, j) built incrementally from C(k, 1) = k
            let mut binom = k as f64;
            for j in 2..=k {
                binom *= (k - j + 1) as f64 / j as f64;
                let c = spec.jump_moment(j);
                if c != 0.0 {
                    g[(k, k - j)] += binom * c;
                }
            }
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!(
            "generator matrix of order {n} has non-finite entries (jump moments overflow)"
        )));
    }
    Ok(GeneratorMatrix { n, matrix: g })
}

/// `E[Y(T)^k | Y(t) = y]` for `k = 0..=n` as `e^{G_n (T-t)} H_n(y)`.
pub fn moment_vector(spec: &ModelSpec, n: usize, t: f64, maturity: f64, y: f64) -> Result<Vec<f64>> {
    if !(maturity >= t) {
        return Err(Error::TimeOrdering(format!("need T >= t, got t = {t}, T = {maturity}")));
    }
    let g = generator_matrix(spec, n)?;
    let e = g.exp(maturity - t)?;
    let h = DVector::from_vec(monomials(n, y));
    Ok((e * h).iter().copied().collect())
}

/// `E[Y(T)^n | Y(t) = y]`: last row of `e^{G_n (T-t)}` applied to `H_n(y)`.
pub fn moment(spec: &ModelSpec, n: usize, t: f64, maturity: f64, y: f64) -> Result<f64> {
    Ok(moment_vector(spec, n, t, maturity, y)?[n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ou_law;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ou_spec() -> ModelSpec {
        ModelSpec::ou(-0.02, 0.01, 0.98).unwrap()
    }

    fn nig_spec() -> ModelSpec {
        ModelSpec::ou(-0.02, 0.01, 0.49)
            .unwrap()
            .with_jumps(NigParams::new(1.0, 0.0, 0.0, 0.05).unwrap())
    }

    #[test]
    fn generator_examples() {
        let bm = generator_matrix(&ModelSpec::brownian(), 2).unwrap();
        assert_eq!(
            bm.matrix(),
            &DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );

        let ou = generator_matrix(&ou_spec(), 2).unwrap();
        let row: Vec<f64> = ou.matrix().row(2).iter().copied().collect();
        assert_relative_eq!(row[0], 0.98, epsilon = 1e-15);
        assert_relative_eq!(row[1], -0.04, epsilon = 1e-15);
        assert_relative_eq!(row[2], 0.02, epsilon = 1e-15);

        let plain = generator_matrix(&ModelSpec::ou(-0.02, 0.01, 0.49).unwrap(), 4).unwrap();
        let jumpy = generator_matrix(&nig_spec(), 4).unwrap();
        let diff = jumpy.matrix() - plain.matrix();
        assert_relative_eq!(diff[(4, 2)], 0.3, epsilon = 1e-15);
        assert_relative_eq!(diff[(4, 0)], 0.15, epsilon = 1e-14);
        assert_eq!(diff[(4, 1)], 0.0);
    }

    #[test]
    fn generator_structure() {
        for spec in [ModelSpec::brownian(), ou_spec(), nig_spec()] {
            let g = generator_matrix(&spec, 12).unwrap();
            assert!(g.matrix().row(0).iter().all(|&v| v == 0.0));
            for i in 0..=12 {
                for j in i + 1..=12 {
                    assert_eq!(g.matrix()[(i, j)], 0.0);
                }
            }
            let small = generator_matrix(&spec, 5).unwrap();
            assert_eq!(g.matrix().view((0, 0), (6, 6)), small.matrix().view((0, 0), (6, 6)));
        }
        assert!(generator_matrix(&ou_spec(), MAX_GENERATOR_ORDER + 1).is_err());
    }

    fn gaussian_moment(mean: f64, std: f64, n: usize) -> f64 {
        // Σ_{j even} C(n,j) μ^{n-j} σ^j (j-1)!!
        let mut sum = 0.0;
        let mut binom = 1.0;
        let mut dfact = 1.0;
        for j in 0..=n {
            if j > 0 {
                binom *= (n - j + 1) as f64 / j as f64;
            }
            if j % 2 == 0 {
                if j >= 2 {
                    dfact *= (j - 1) as f64;
                }
                sum += binom * mean.powi((n - j) as i32) * std.powi(j as i32) * dfact;
            }
        }
        sum
    }

    #[test]
    fn moment_examples() {
        assert_relative_eq!(
            moment(&ModelSpec::brownian(), 2, 0.0, 0.5, 0.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let spec = ou_spec();
        let b1 = 0.01f64;
        let expected = 2.0 * (b1 * 2.0).exp() + (-0.02 / b1) * ((b1 * 2.0).exp() - 1.0);
        assert_relative_eq!(moment(&spec, 1, 0.0, 2.0, 2.0).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 2.0, epsilon = 1e-12);
        for s in [ModelSpec::brownian(), ou_spec(), nig_spec()] {
            assert_eq!(moment(&s, 0, 0.3, 1.7, 4.2).unwrap(), 1.0);
        }
        assert!(moment(&spec, 2, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn gaussian_moment_consistency() {
        for spec in [ModelSpec::brownian(), ou_spec(), ModelSpec::ou(0.4, -0.7, 0.3).unwrap()] {
            for &(tau, y) in &[(0.5, 0.0), (2.0, 2.0), (1.3, -0.8)] {
                let law = ou_law(&spec, 0.0, y, tau).unwrap();
                for n in 0..=10 {
                    let m = moment(&spec, n, 0.0, tau, y).unwrap();
                    let oracle = gaussian_moment(law.mean(), law.std(), n);
                    assert_relative_eq!(m, oracle, max_relative = 1e-9, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn martingale_with_jumps() {
        let spec = ModelSpec::ou(0.0, 0.0, 0.49)
            .unwrap()
            .with_jumps(NigParams::new(1.0, 0.4, 0.0, 0.05).unwrap());
        for &y in &[-3.0, 0.0, 1.7] {
            assert_eq!(moment(&spec, 1, 0.0, 2.5, y).unwrap(), y);
        }
    }

    #[test]
    fn nig_second_moment() {
        // Var = (σ0 + c2) τ for b1 = 0
        let spec = ModelSpec::ou(0.1, 0.0, 0.49)
            .unwrap()
            .with_jumps(NigParams::new(1.0, 0.0, 0.0, 0.05).unwrap());
        let (y, tau) = (2.0, 2.0);
        let mean = y + 0.1 * tau;
        let expected = mean * mean + (0.49 + 0.05) * tau;
        assert_relative_eq!(moment(&spec, 2, 0.0, tau, y).unwrap(), expected, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn semigroup(s in 0.01f64..2.0, t in 0.01f64..2.0, n in 1usize..=10, which in 0usize..3) {
            let spec = [ModelSpec::brownian(), ou_spec(), nig_spec()][which].clone();
            let g = generator_matrix(&spec, n).unwrap();
            let lhs = g.exp(s).unwrap() * g.exp(t).unwrap();
            let rhs = g.exp(s + t).unwrap();
            let err = (&lhs - &rhs).abs().max();
            prop_assert!(err <= 1e-9 * rhs.abs().max());
        }
    }

    #[test]
    fn describe_labels() {
        assert_eq!(ou_spec().describe(), "ou(b0=-0.02,b1=0.01,sigma0=0.98)");
        assert!(nig_spec().describe().starts_with("nig-jd("));
    }
}

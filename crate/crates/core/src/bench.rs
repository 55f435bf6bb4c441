//! Gaussian closed forms used as benchmarks: the Bachelier-type call price,
//! exact OU laws (single time and discrete average), the error-bound constant
//! of the Hermite price approximation and the accuracy metric γ.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;

use crate::generator::ModelSpec;
use crate::hermite::GhpBasis;
use crate::{Error, Result};

/// `1 / sqrt(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Reporting clamp for γ and γ̃; beyond double precision they are noise.
pub const GAMMA_CLAMP: f64 = 16.0;

/// Standard normal density and distribution function at `x`.
///
/// The cdf goes through `erfc`, so the upper tail keeps full relative
/// precision and `Φ(x)` is accurate to ~1e-16 absolute everywhere.
pub fn std_normal(x: f64) -> (f64, f64) {
    let pdf = INV_SQRT_2PI * (-0.5 * x * x).exp();
    let cdf = 0.5 * erfc(-x / SQRT_2);
    (pdf, cdf)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `expm1(x) / x`, continuous at 0.
pub(crate) fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x * (1.0 + x / 3.0)
    } else {
        x.exp_m1() / x
    }
}

/// Normal law of `X(T)` given `F_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    mean: f64,
    std: f64,
}

impl GaussianLaw {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !(std > 0.0) || !std.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian law needs finite mean and std > 0, got ({mean}, {std})"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }
}

/// `E[max(X - K, 0)]` for `X ~ N(μ, σ²)`:
/// `σ φ(d) - (K - μ)(1 - Φ(d))` with `d = (K - μ) / σ`. Undiscounted.
pub fn gaussian_call(law: &GaussianLaw, strike: f64) -> f64 {
    let d = (strike - law.mean) / law.std;
    let (pdf, _) = std_normal(d);
    law.std * pdf - (strike - law.mean) * std_normal_sf(d)
}

/// Law of `Y(T)` given `Y(t) = y_t` for the Gaussian OU
/// `dY = (b0 + b1 Y) dt + sqrt(σ0) dB` (Brownian motion when `b0 = b1 = 0`).
pub fn ou_law(spec: &ModelSpec, t: f64, y_t: f64, maturity: f64) -> Result<GaussianLaw> {
    ou_asian_law(spec, t, y_t, &[maturity])
}

/// Exact law of the discrete average `(1/(m+1)) Σ Y(s_j)` for the Gaussian OU.
///
/// The average is rewritten as a sum of independent increments over
/// `(s_{j-1}, s_j]` (with `s_{-1} = t`); each contributes
/// `σ0 (Σ_{k≥j} e^{b1 (s_k - v)})²` integrated over its interval.
/// `b1 = 0` is handled through `expm1(x)/x`, never by dividing by `b1`.
pub fn ou_asian_law(spec: &ModelSpec, t: f64, y_t: f64, times: &[f64]) -> Result<GaussianLaw> {
    if spec.jumps().is_some() {
        return Err(Error::InvalidParameter(
            "the OU closed form does not cover jump models".into(),
        ));
    }
    if !(spec.diff_sq() > 0.0) {
        return Err(Error::InvalidParameter("the OU closed form needs sigma0 > 0".into()));
    }
    crate::correlator::check_times(t, times)?;
    let (b0, b1, s0) = (spec.drift_const(), spec.drift_lin(), spec.diff_sq());
    let count = times.len() as f64;

    let mean = times
        .iter()
        .map(|&s| {
            let tau = s - t;
            y_t * (b1 * tau).exp() + b0 * tau * exprel(b1 * tau)
        })
        .sum::<f64>()
        / count;

    let mut var = 0.0;
    let mut prev = t;
    for (j, &sj) in times.iter().enumerate() {
        let dt = sj - prev;
        let tail: f64 = times[j..].iter().map(|&sk| (b1 * (sk - sj)).exp()).sum();
        var += tail * tail * dt * exprel(2.0 * b1 * dt);
        prev = sj;
    }
    var *= s0 / (count * count);

    GaussianLaw::new(mean, var.sqrt())
}

/// Inputs of the error-bound constant `C_{a,b}` for a Gaussian `X(T)`.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBoundInputs {
    pub basis: GhpBasis,
    pub law: GaussianLaw,
}

/// `C_{a,b} = (∫ ψ² / w_{a,b})^{1/2}` for Gaussian ψ:
/// `C² = b / sqrt(2πσ²) · exp((a-μ)² / (2b² - σ²)) / sqrt(2b² - σ²)`.
///
/// Exists only for `b > σ/√2`.
pub fn error_constant(inp: &ErrorBoundInputs) -> Result<f64> {
    let b = inp.basis.scale();
    let a = inp.basis.drift();
    let sigma = inp.law.std();
    let mu = inp.law.mean();
    if b <= scale_floor(sigma) {
        return Err(Error::Domain(format!(
            "error constant requires b > sigma/sqrt(2) = {}, got b = {b}",
            scale_floor(sigma)
        )));
    }
    let gap = 2.0 * b * b - sigma * sigma;
    let c2 = b / (2.0 * PI * sigma * sigma).sqrt() * ((a - mu).powi(2) / gap).exp() / gap.sqrt();
    Ok(c2.sqrt())
}

/// Scale floor `b̲_σ = σ / √2` below which `C_{a,b}` does not exist.
pub fn scale_floor(sigma: f64) -> f64 {
    sigma / SQRT_2
}

/// Accuracy `γ = -log10(|Π - Π_N| / |Π|)`, clamped to `[-16, 16]`.
///
/// Negative values (divergence) are kept.
pub fn accuracy_gamma(exact: f64, approx: f64) -> Result<f64> {
    if exact == 0.0 || !exact.is_finite() {
        return Err(Error::Domain(format!(
            "accuracy needs a finite non-zero benchmark, got {exact}"
        )));
    }
    Ok(clamped_neg_log10((exact - approx).abs() / exact.abs()))
}

pub(crate) fn clamped_neg_log10(rel: f64) -> f64 {
    if rel.is_nan() {
        return -GAMMA_CLAMP;
    }
    (-rel.log10()).clamp(-GAMMA_CLAMP, GAMMA_CLAMP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn std_normal_reference_points() {
        let (pdf, cdf) = std_normal(0.0);
        assert_relative_eq!(pdf, 0.398_942_280_4, epsilon = 1e-10);
        assert_eq!(cdf, 0.5);

        let (pdf, cdf) = std_normal(40.0);
        assert_eq!(pdf, 0.0);
        assert_eq!(cdf, 1.0);

        // reference values from an independent high-precision implementation
        let reference = [
            (-6.0, 9.865_876_450_376_946e-10, 0.999_999_999_013_412_3),
            (-2.5, 0.006_209_665_325_776_132, 0.993_790_334_674_223_8),
            (-1.0, 0.158_655_253_931_457_07, 0.841_344_746_068_542_9),
            (0.3, 0.617_911_422_188_952_6, 0.382_088_577_811_047_4),
            (1.96, 0.975_002_104_851_779_5, 0.024_997_895_148_220_435),
            (4.0, 0.999_968_328_758_166_9, 3.167_124_183_311_986e-5),
            (8.0, 0.999_999_999_999_999_3, 6.220_960_574_271_74e-16),
        ];
        for &(x, cdf, sf) in &reference {
            assert_relative_eq!(std_normal(x).1, cdf, max_relative = 1e-14);
            assert_relative_eq!(std_normal_sf(x), sf, max_relative = 1e-14);
        }
        assert_relative_eq!(std_normal(1.96).1, 0.975_002_1, epsilon = 1e-7);
    }

    #[test]
    fn gaussian_call_limits() {
        let law = GaussianLaw::new(1.3, 0.8).unwrap();
        assert_relative_eq!(gaussian_call(&law, 1.3), 0.8 * INV_SQRT_2PI, epsilon = 1e-15);

        let tight = GaussianLaw::new(2.0, 1e-9).unwrap();
        assert_relative_eq!(gaussian_call(&tight, 1.5), 0.5, epsilon = 1e-12);

        let bm = GaussianLaw::new(0.0, 0.5f64.sqrt()).unwrap();
        let d = 0.2 / 0.5f64.sqrt();
        let (pdf, cdf) = std_normal(d);
        assert_relative_eq!(
            gaussian_call(&bm, 0.2),
            0.5f64.sqrt() * pdf - 0.2 * (1.0 - cdf),
            epsilon = 1e-15
        );
    }

    #[test]
    fn gaussian_call_shape_on_grid() {
        let strikes: Vec<f64> = (0..60).map(|i| -2.0 + 0.1 * i as f64).collect();
        for &sigma in &[0.3, 1.0, 2.5] {
            let law = GaussianLaw::new(0.5, sigma).unwrap();
            let prices: Vec<f64> = strikes.iter().map(|&k| gaussian_call(&law, k)).collect();
            for w in prices.windows(3) {
                assert!(w[1] < w[0]);
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-15);
            }
        }
        for &k in &strikes {
            let lo = gaussian_call(&GaussianLaw::new(0.5, 0.7).unwrap(), k);
            let hi = gaussian_call(&GaussianLaw::new(0.5, 0.9).unwrap(), k);
            assert!(hi > lo);
        }
    }

    #[test]
    fn single_time_ou_law_matches_textbook() {
        let spec = ModelSpec::ou(-0.02, 0.01, 0.98).unwrap();
        let law = ou_law(&spec, 0.0, 2.0, 2.0).unwrap();
        assert_relative_eq!(law.mean(), 2.0, epsilon = 1e-14);
        let var = 0.98 / 0.02 * ((0.04f64).exp() - 1.0);
        assert_relative_eq!(law.variance(), var, max_relative = 1e-14);
        assert_relative_eq!(law.std(), 1.414, epsilon = 1e-2);

        let bm = ModelSpec::brownian();
        let law = ou_law(&bm, 0.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(law.std(), 0.5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn asian_law_reduces_and_has_b1_limit() {
        let spec = ModelSpec::ou(0.3, -0.4, 0.5).unwrap();
        let one = ou_asian_law(&spec, 0.0, 1.2, &[1.5]).unwrap();
        let direct = ou_law(&spec, 0.0, 1.2, 1.5).unwrap();
        assert_eq!(one, direct);

        // b1 -> 0: Brownian motion with drift b0.
        let times = [0.5, 1.0, 2.0];
        let limit = ou_asian_law(&ModelSpec::ou(0.3, 0.0, 0.5).unwrap(), 0.0, 1.0, &times).unwrap();
        let mean = 1.0 + 0.3 * times.iter().sum::<f64>() / 3.0;
        assert_relative_eq!(limit.mean(), mean, epsilon = 1e-14);
        // Var of the average of a BM: (σ0/9) Σ_ij min(s_i, s_j)
        let mut cov = 0.0;
        for &a in &times {
            for &b in &times {
                cov += f64::min(a, b);
            }
        }
        assert_relative_eq!(limit.variance(), 0.5 * cov / 9.0, max_relative = 1e-14);

        let near = ou_asian_law(&ModelSpec::ou(0.3, 1e-10, 0.5).unwrap(), 0.0, 1.0, &times).unwrap();
        assert_relative_eq!(near.variance(), limit.variance(), max_relative = 1e-8);
    }

    #[test]
    fn asian_law_variance_increases_with_sigma0() {
        let times = [0.4, 0.9, 1.3];
        let mut last = 0.0;
        for s0 in [0.1, 0.5, 1.0, 2.0] {
            let law = ou_asian_law(&ModelSpec::ou(-0.02, 0.01, s0).unwrap(), 0.0, 2.0, &times).unwrap();
            assert!(law.variance() > last);
            last = law.variance();
        }
    }

    #[test]
    fn asian_law_rejects_jumps() {
        let spec = ModelSpec::ou(0.0, 0.0, 1.0)
            .unwrap()
            .with_jumps(crate::generator::NigParams::new(1.0, 0.0, 0.0, 0.05).unwrap());
        assert!(ou_asian_law(&spec, 0.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn error_constant_values() {
        let law = GaussianLaw::new(0.0, 1.0).unwrap();
        let c = error_constant(&ErrorBoundInputs {
            basis: GhpBasis::new(0.0, 1.0, 4).unwrap(),
            law,
        })
        .unwrap();
        assert_relative_eq!(c * c, INV_SQRT_2PI, epsilon = 1e-15);
        assert_relative_eq!(c, 0.63161, epsilon = 1e-5);

        let far = error_constant(&ErrorBoundInputs {
            basis: GhpBasis::new(0.0, 1e6, 4).unwrap(),
            law,
        })
        .unwrap();
        assert_relative_eq!(far, (4.0 * PI).powf(-0.25), max_relative = 1e-9);

        let below = ErrorBoundInputs {
            basis: GhpBasis::new(0.0, 0.9 / SQRT_2, 4).unwrap(),
            law,
        };
        assert!(matches!(error_constant(&below), Err(Error::Domain(_))));
    }

    #[test]
    fn error_constant_matches_quadrature() {
        let law = GaussianLaw::new(0.4, 0.7).unwrap();
        let basis = GhpBasis::new(-0.1, 0.9, 2).unwrap();
        let c = error_constant(&ErrorBoundInputs { basis, law }).unwrap();
        let integrand = |x: f64| {
            let z = (x - law.mean()) / law.std();
            let psi = INV_SQRT_2PI * (-0.5 * z * z).exp() / law.std();
            psi * psi * ((x - basis.drift()).powi(2) / (2.0 * basis.scale().powi(2))).exp()
        };
        let q = crate::quadrature::integrate_composite(integrand, -15.0, 15.0, 200);
        assert_relative_eq!(c * c, q, max_relative = 1e-11);
    }

    #[test]
    fn error_constant_decreases_in_scale() {
        let law = GaussianLaw::new(1.0, 0.8).unwrap();
        let grid: Vec<f64> = (1..80).map(|i| scale_floor(0.8) + 0.05 * i as f64).collect();
        let cs: Vec<f64> = grid
            .iter()
            .map(|&b| {
                error_constant(&ErrorBoundInputs {
                    basis: GhpBasis::new(1.0, b, 2).unwrap(),
                    law,
                })
                .unwrap()
            })
            .collect();
        assert!(cs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn scale_floor_examples() {
        assert_relative_eq!(scale_floor(1.41), 0.997, epsilon = 1e-3);
        assert_relative_eq!(scale_floor(SQRT_2), 1.0, epsilon = 1e-15);
        assert_relative_eq!(scale_floor(1.0), 0.7071, epsilon = 1e-4);
    }

    #[test]
    fn gamma_metric() {
        assert_relative_eq!(accuracy_gamma(1.0, 0.999).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(accuracy_gamma(2.5, 2.5).unwrap(), GAMMA_CLAMP);
        assert!(accuracy_gamma(1.0, 10.0).unwrap() < 0.0);
        assert!(accuracy_gamma(0.0, 1.0).is_err());
    }
}

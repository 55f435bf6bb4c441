//! European and discretely sampled Asian call prices from the truncated
//! Hermite series, their partial sums per truncation, the γ̃ stopping rule,
//! and delta / theta.
//!
//! With `Z = (X - a)/b` and `β̂_N = β_Nᵀ M_N`, the truncated price is
//! `Π_N = e^{-r(T-t)} Σ_k β̂_{N,k} E[Z^k]`, where
//! `E[Z^k] = b^{-k} Σ_i C(k,i) (-a)^{k-i} E[X^i]` and, for the average
//! `X = (1/(m+1)) Σ_j Y(s_j)`,
//! `E[X^i] = (m+1)^{-i} Σ_{|κ|=i} i!/(κ_0!···κ_m!) E[Y(s_0)^{κ_0}···Y(s_m)^{κ_m}]`.
//! The moments of `X` do not depend on `K`, `a` or `b`, so one
//! [`CorrelatorEngine`] serves a whole strike/basis grid.

use std::f64::consts::SQRT_2;

use crate::bench::clamped_neg_log10;
use crate::correlator::{check_times, CorrelatorEngine, Sensitivity};
use crate::generator::{moment_vector, ModelSpec};
use crate::hermite::{change_of_basis, payoff_coefficients, ChangeOfBasis, GhpBasis, PayoffExpansion};
use crate::summation::{sum_with, Accumulation};
use crate::{Error, Result};

/// Default γ̃ threshold of the stopping rule.
pub const DEFAULT_THRESHOLD: f64 = 4.0;

/// Default limit on the number of multi-indices per moment order.
pub const DEFAULT_TERM_CAP: usize = 10_000_000;

/// A single pricing problem. `basis.order()` is the largest truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRequest {
    pub strike: f64,
    pub rate: f64,
    pub t: f64,
    pub times: Vec<f64>,
    pub basis: GhpBasis,
    pub model: ModelSpec,
    pub y_t: f64,
    pub accumulation: Accumulation,
}

impl PriceRequest {
    pub fn new(
        model: ModelSpec,
        t: f64,
        y_t: f64,
        times: Vec<f64>,
        strike: f64,
        rate: f64,
        basis: GhpBasis,
    ) -> Result<Self> {
        let req = Self {
            strike,
            rate,
            t,
            times,
            basis,
            model,
            y_t,
            accumulation: Accumulation::Plain,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_accumulation(mut self, mode: Accumulation) -> Self {
        self.accumulation = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_times(self.t, &self.times)?;
        if !(self.strike >= 0.0) || !self.strike.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "strike must be finite and non-negative, got {}",
                self.strike
            )));
        }
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rate must be finite and non-negative, got {}",
                self.rate
            )));
        }
        if !self.y_t.is_finite() {
            return Err(Error::InvalidParameter(format!("y_t must be finite, got {}", self.y_t)));
        }
        Ok(())
    }

    /// `T = s_m`
    pub fn maturity(&self) -> f64 {
        *self.times.last().expect("validated non-empty grid")
    }

    pub fn m(&self) -> usize {
        self.times.len() - 1
    }

    /// `e^{-r(T-t)}`
    pub fn discount(&self) -> f64 {
        (-self.rate * (self.maturity() - self.t)).exp()
    }
}

/// One term `coeff · E[Π_j Y(s_j)^{k_j}]` of the expansion of `E[(Σ_j Y(s_j))^i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexTerm {
    pub k: Vec<usize>,
    pub coeff: f64,
}

/// All `κ` with `|κ| = i` over `m+1` slots, in lexicographic order, with
/// multinomial weights `i!/(κ_0!···κ_m!)`.
pub fn multinomial_expand(i: usize, m: usize) -> Result<Vec<MultiIndexTerm>> {
    multinomial_expand_with_cap(i, m, DEFAULT_TERM_CAP)
}

pub fn multinomial_expand_with_cap(i: usize, m: usize, cap: usize) -> Result<Vec<MultiIndexTerm>> {
    // C(i+m, m) computed incrementally; stop as soon as it passes the cap
    let mut count: u128 = 1;
    for j in 1..=m as u128 {
        count = count * (i as u128 + j) / j;
        if count > cap as u128 {
            return Err(Error::SizeCap {
                what: "multinomial expansion",
                requested: count,
                cap,
            });
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut k = vec![0usize; m + 1];
    fill(&mut k, 0, i, &mut out);
    Ok(out)
}

fn fill(k: &mut Vec<usize>, slot: usize, left: usize, out: &mut Vec<MultiIndexTerm>) {
    let last = k.len() - 1;
    if slot == last {
        k[slot] = left;
        out.push(MultiIndexTerm {
            k: k.clone(),
            coeff: multinomial(k),
        });
        return;
    }
    for v in (0..=left).rev() {
        k[slot] = v;
        fill(k, slot + 1, left - v, out);
    }
}

/// `(Σκ)!/Πκ_j!` as a product of binomials.
fn multinomial(k: &[usize]) -> f64 {
    let mut total = 0usize;
    let mut coeff = 1.0;
    for &kj in k {
        for step in 1..=kj {
            coeff *= (total + step) as f64 / step as f64;
        }
        total += kj;
    }
    coeff.round()
}

/// `E[X^i | F_t]` (or its sensitivity) for `i = 0..=i_max`.
pub fn average_moments(engine: &CorrelatorEngine, i_max: usize, mode: Accumulation) -> Result<Vec<f64>> {
    average_moment_sensitivities(engine, i_max, Sensitivity::Value, mode)
}

pub fn average_moment_sensitivities(
    engine: &CorrelatorEngine,
    i_max: usize,
    wrt: Sensitivity,
    mode: Accumulation,
) -> Result<Vec<f64>> {
    let m = engine.m();
    engine.reserve(i_max)?;
    let mut out = Vec::with_capacity(i_max + 1);
    for i in 0..=i_max {
        let terms = multinomial_expand(i, m)?;
        let ks: Vec<Vec<usize>> = terms.iter().map(|t| t.k.clone()).collect();
        let corr = engine.evaluate_many(&ks, wrt)?;
        let sum = sum_with(mode, terms.iter().zip(&corr).map(|(t, c)| t.coeff * c));
        let value = sum / ((m + 1) as f64).powi(i as i32);
        if !value.is_finite() {
            return Err(Error::Overflow(format!("E[X^{i}] is not finite")));
        }
        out.push(value);
    }
    Ok(out)
}

/// Undiscounted partial sums `Π_0, ..., Π_N` from the moments
/// `E[X^0..=X^N]`, each through its own `β̂_{N'} = β_{N'}ᵀ M_{N'}`.
/// Linear in `x_moments`, so it also maps moment sensitivities to price
/// sensitivities.
pub fn partial_prices(
    x_moments: &[f64],
    exp: &PayoffExpansion,
    cob: &ChangeOfBasis,
    mode: Accumulation,
) -> Result<Vec<f64>> {
    let order = exp.order();
    if x_moments.len() < order + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} moments for truncation order {order}",
            x_moments.len()
        )));
    }
    let a = exp.basis().drift();
    let b = exp.basis().scale();

    let mut z_moments = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut binom = 1.0;
        let terms = (0..=k).map(|i| {
            if i > 0 {
                binom *= (k - i + 1) as f64 / i as f64;
            }
            binom * (-a).powi((k - i) as i32) * x_moments[i]
        });
        let s = sum_with(mode, terms.collect::<Vec<_>>());
        z_moments.push(s * b.powi(-(k as i32)));
    }

    let beta = exp.beta();
    let m = cob.matrix();
    let mut out = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let hat: Vec<f64> = (0..=n)
            .map(|k| sum_with(mode, (k..=n).map(|j| beta[j] * m[(j, k)])))
            .collect();
        out.push(sum_with(mode, hat.iter().zip(&z_moments).map(|(h, z)| h * z)));
    }
    Ok(out)
}

/// Partial prices per truncation plus the stopping decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    price_by_n: Vec<f64>,
    gamma_tilde: Vec<f64>,
    chosen_n: usize,
    converged: bool,
}

impl PriceReport {
    /// Builds the report and applies [`stopping_criterion`] at `threshold`.
    pub fn from_partial_sums(price_by_n: Vec<f64>, threshold: f64) -> Self {
        let gamma_tilde = gamma_tilde_trace(&price_by_n);
        let (chosen_n, converged) = match stopping_criterion(&price_by_n, threshold) {
            Ok(stop) => (stop.n, stop.converged),
            Err(_) => (price_by_n.len() - 1, false),
        };
        Self {
            price_by_n,
            gamma_tilde,
            chosen_n,
            converged,
        }
    }

    /// Discounted `Π_0..=Π_N`.
    pub fn price_by_n(&self) -> &[f64] {
        &self.price_by_n
    }

    /// `γ̃_N` for `N = 0..=N_max`; entry 0 and entries with `Π_{N-1} = 0`
    /// are NaN.
    pub fn gamma_tilde(&self) -> &[f64] {
        &self.gamma_tilde
    }

    pub fn chosen_n(&self) -> usize {
        self.chosen_n
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Price at the largest truncation.
    pub fn price(&self) -> f64 {
        *self.price_by_n.last().expect("non-empty")
    }

    /// Price at the stopping point.
    pub fn stopped_price(&self) -> f64 {
        self.price_by_n[self.chosen_n]
    }

    /// Re-applies the stopping rule with another threshold.
    pub fn restop(&self, threshold: f64) -> Self {
        Self::from_partial_sums(self.price_by_n.clone(), threshold)
    }
}

/// `γ̃ = -log10(|Π_{N-1} - Π_N| / |Π_{N-1}|)`, clamped to `±16`.
pub fn gamma_tilde(prev: f64, cur: f64) -> Result<f64> {
    if prev == 0.0 || !prev.is_finite() {
        return Err(Error::Domain(format!(
            "gamma tilde undefined for previous partial sum {prev}"
        )));
    }
    Ok(clamped_neg_log10((prev - cur).abs() / prev.abs()))
}

fn gamma_tilde_trace(partial: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; partial.len()];
    for n in 1..partial.len() {
        out[n] = gamma_tilde(partial[n - 1], partial[n]).unwrap_or(f64::NAN);
    }
    out
}

/// Outcome of the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stop {
    pub n: usize,
    pub converged: bool,
}

/// Increments smaller than this fraction of a neighbouring increment are
/// treated as vanishing by symmetry rather than as evidence of convergence.
pub const VANISHING_RATIO: f64 = 1e-6;

/// Smallest `N ≥ 1` with `γ̃_N > threshold` whose increment is not
/// vanishing; otherwise the last `N`, not converged.
///
/// When `a` sits at the centre of a symmetric law every odd-order increment
/// is zero up to roundoff, and taking those steps at face value would stop
/// at `N = 1`. An increment is vanishing when it is below
/// [`VANISHING_RATIO`] times the increment before or after it; constant
/// partial sums have no non-zero neighbour and still stop at `N = 1`.
pub fn stopping_criterion(partial: &[f64], threshold: f64) -> Result<Stop> {
    if partial.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "stopping rule needs at least 2 partial sums, got {}",
            partial.len()
        )));
    }
    let g = gamma_tilde_trace(partial);
    let last = partial.len() - 1;
    let step = |n: usize| (partial[n] - partial[n - 1]).abs();
    let vanishing = |n: usize| {
        let prev = if n >= 2 { step(n - 1) } else { 0.0 };
        let next = if n < last { step(n + 1) } else { 0.0 };
        step(n) < VANISHING_RATIO * prev.max(next)
    };
    for n in 1..=last {
        if g[n] > threshold && !vanishing(n) {
            return Ok(Stop { n, converged: true });
        }
    }
    Ok(Stop {
        n: last,
        converged: false,
    })
}

fn report_from_moments(req: &PriceRequest, x_moments: &[f64]) -> Result<PriceReport> {
    let exp = payoff_coefficients(req.strike, &req.basis)?;
    let cob = change_of_basis(req.basis.order())?;
    let disc = req.discount();
    let partial: Vec<f64> = partial_prices(x_moments, &exp, &cob, req.accumulation)?
        .into_iter()
        .map(|p| p * disc)
        .collect();
    if partial.len() < 2 {
        return Ok(PriceReport {
            gamma_tilde: vec![f64::NAN],
            chosen_n: 0,
            converged: false,
            price_by_n: partial,
        });
    }
    Ok(PriceReport::from_partial_sums(partial, DEFAULT_THRESHOLD))
}

/// European call on `Y(T)` from the moment formula.
pub fn european_price(req: &PriceRequest) -> Result<PriceReport> {
    req.validate()?;
    if req.times.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "european price needs a single maturity, got {} sampling times",
            req.times.len()
        )));
    }
    let moments = moment_vector(&req.model, req.basis.order(), req.t, req.maturity(), req.y_t)?;
    report_from_moments(req, &moments)
}

/// Discretely sampled arithmetic Asian call.
pub fn asian_price(req: &PriceRequest) -> Result<PriceReport> {
    req.validate()?;
    let engine = CorrelatorEngine::new(&req.model, req.t, req.y_t, &req.times)?;
    asian_price_with(&engine, req)
}

/// [`asian_price`] reusing an engine bound to the same model, state and grid.
pub fn asian_price_with(engine: &CorrelatorEngine, req: &PriceRequest) -> Result<PriceReport> {
    check_engine(engine, req)?;
    let moments = average_moments(engine, req.basis.order(), req.accumulation)?;
    report_from_moments(req, &moments)
}

fn check_engine(engine: &CorrelatorEngine, req: &PriceRequest) -> Result<()> {
    req.validate()?;
    if engine.spec() != &req.model || engine.t() != req.t || engine.y_t() != req.y_t || engine.times() != req.times {
        return Err(Error::InvalidParameter(
            "correlator engine is bound to a different model, state or grid".into(),
        ));
    }
    Ok(())
}

fn sensitivity_by_n(engine: &CorrelatorEngine, req: &PriceRequest, wrt: Sensitivity) -> Result<Vec<f64>> {
    let exp = payoff_coefficients(req.strike, &req.basis)?;
    let cob = change_of_basis(req.basis.order())?;
    let dm = average_moment_sensitivities(engine, req.basis.order(), wrt, req.accumulation)?;
    partial_prices(&dm, &exp, &cob, req.accumulation)
}

/// `∂Π_N/∂y_t` at `N = basis.order()`, basis held fixed.
pub fn delta(req: &PriceRequest) -> Result<f64> {
    let engine = CorrelatorEngine::new(&req.model, req.t, req.y_t, &req.times)?;
    delta_with(&engine, req)
}

pub fn delta_with(engine: &CorrelatorEngine, req: &PriceRequest) -> Result<f64> {
    check_engine(engine, req)?;
    let d = sensitivity_by_n(engine, req, Sensitivity::State)?;
    Ok(req.discount() * d[req.basis.order()])
}

/// `∂Π_N/∂s_j` at `N = basis.order()`, basis held fixed. For `j = m` the
/// discount factor's dependence on `T = s_m` is included.
pub fn theta(req: &PriceRequest, j: usize) -> Result<f64> {
    let engine = CorrelatorEngine::new(&req.model, req.t, req.y_t, &req.times)?;
    theta_with(&engine, req, j)
}

pub fn theta_with(engine: &CorrelatorEngine, req: &PriceRequest, j: usize) -> Result<f64> {
    check_engine(engine, req)?;
    if j > req.m() {
        return Err(Error::InvalidParameter(format!(
            "theta index {j} outside the sampling grid of {} points",
            req.times.len()
        )));
    }
    let order = req.basis.order();
    let d = sensitivity_by_n(engine, req, Sensitivity::Time(j))?;
    let disc = req.discount();
    let mut value = disc * d[order];
    if j == req.m() && req.rate != 0.0 {
        let moments = average_moments(engine, order, req.accumulation)?;
        let exp = payoff_coefficients(req.strike, &req.basis)?;
        let cob = change_of_basis(order)?;
        let undiscounted = partial_prices(&moments, &exp, &cob, req.accumulation)?[order];
        value -= req.rate * disc * undiscounted;
    }
    Ok(value)
}

/// How the drift `a` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftPolicy {
    Fixed(f64),
    /// `a = μ_X = E[X | F_t]`
    Mean,
}

/// How the scale `b` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalePolicy {
    Fixed(f64),
    /// `b = ratio · σ_X / √2`
    FloorRatio(f64),
}

/// `(μ_X, σ_X)` of the average from its first two moments.
pub fn average_mean_std(engine: &CorrelatorEngine) -> Result<(f64, f64)> {
    let mom = average_moments(engine, 2, Accumulation::Compensated)?;
    let var = mom[2] - mom[1] * mom[1];
    if !(var > 0.0) {
        return Err(Error::Domain(format!(
            "the average has non-positive variance {var}; no data-driven scale"
        )));
    }
    Ok((mom[1], var.sqrt()))
}

/// Turns drift/scale policies into a concrete basis of the given order.
pub fn resolve_basis(
    engine: &CorrelatorEngine,
    drift: DriftPolicy,
    scale: ScalePolicy,
    order: usize,
) -> Result<GhpBasis> {
    let needs_law = matches!(drift, DriftPolicy::Mean) || matches!(scale, ScalePolicy::FloorRatio(_));
    let law = if needs_law {
        Some(average_mean_std(engine)?)
    } else {
        None
    };
    let a = match drift {
        DriftPolicy::Fixed(a) => a,
        DriftPolicy::Mean => law.expect("computed").0,
    };
    let b = match scale {
        ScalePolicy::Fixed(b) => b,
        ScalePolicy::FloorRatio(r) => {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("scale ratio must be > 0, got {r}")));
            }
            r * law.expect("computed").1 / SQRT_2
        }
    };
    GhpBasis::new(a, b, order)
}

/// Uniform grid `s_j = t + (j+1)(T-t)/(m+1)`, `j = 0..=m`.
pub fn uniform_grid(t: f64, maturity: f64, m: usize) -> Vec<f64> {
    let step = (maturity - t) / (m + 1) as f64;
    (0..=m)
        .map(|j| if j == m { maturity } else { t + (j + 1) as f64 * step })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{gaussian_call, ou_asian_law, ou_law, std_normal, GaussianLaw, GAMMA_CLAMP};
    use approx::assert_relative_eq;

    fn ou() -> ModelSpec {
        ModelSpec::ou(-0.02, 0.01, 0.98).unwrap()
    }

    #[test]
    fn multinomial_examples() {
        let t = multinomial_expand(2, 1).unwrap();
        let pairs: Vec<(Vec<usize>, f64)> = t.into_iter().map(|t| (t.k, t.coeff)).collect();
        assert_eq!(pairs, vec![(vec![2, 0], 1.0), (vec![1, 1], 2.0), (vec![0, 2], 1.0)]);
        let zero = multinomial_expand(0, 3).unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[0].coeff, 1.0);
        let three = multinomial_expand(3, 2).unwrap();
        assert_eq!(three.len(), 10);
        assert_eq!(three.iter().map(|t| t.coeff).sum::<f64>(), 27.0);
        assert!(matches!(
            multinomial_expand_with_cap(50, 4, 1000),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn multinomial_completeness() {
        for m in 0..4 {
            for i in 0..12 {
                let s: f64 = multinomial_expand(i, m).unwrap().iter().map(|t| t.coeff).sum();
                assert_relative_eq!(s / ((m + 1) as f64).powi(i as i32), 1.0, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn constant_process_average_moments() {
        let spec = ModelSpec::ou(0.0, 0.0, 0.0).unwrap();
        let c = 1.7f64;
        let engine = CorrelatorEngine::new(&spec, 0.0, c, &[0.5, 1.0, 1.5]).unwrap();
        let mom = average_moments(&engine, 8, Accumulation::Plain).unwrap();
        for (i, v) in mom.iter().enumerate() {
            assert_relative_eq!(*v, c.powi(i as i32), max_relative = 1e-13);
        }
    }

    #[test]
    fn stopping_examples() {
        let s = stopping_criterion(&[1.0, 0.999, 0.99905], 4.0).unwrap();
        assert_eq!(s, Stop { n: 2, converged: true });
        assert_relative_eq!(gamma_tilde(0.999, 0.99905).unwrap(), 4.3, epsilon = 0.01);

        let s = stopping_criterion(&[2.0, 2.0, 2.0], 4.0).unwrap();
        assert_eq!(s, Stop { n: 1, converged: true });
        assert_eq!(gamma_tilde(2.0, 2.0).unwrap(), GAMMA_CLAMP);

        let osc = [1.0, 1.2, 0.9, 1.15, 0.92, 1.1];
        let s = stopping_criterion(&osc, 4.0).unwrap();
        assert_eq!(s, Stop { n: 5, converged: false });

        assert!(gamma_tilde(0.0, 1.0).is_err());
        assert!(stopping_criterion(&[1.0], 4.0).is_err());
    }

    #[test]
    fn stopping_skips_vanishing_odd_increments() {
        // odd increments exactly zero, even ones decay
        let partial = [0.5, 0.5, 0.51, 0.51, 0.5101, 0.5101, 0.510_101, 0.510_101];
        let s = stopping_criterion(&partial, 4.0).unwrap();
        assert_eq!(s, Stop { n: 6, converged: true });
    }

    fn bm_request(k: f64, a: f64, b: f64, order: usize) -> PriceRequest {
        PriceRequest::new(
            ModelSpec::brownian(),
            0.0,
            0.0,
            vec![0.5],
            k,
            0.0,
            GhpBasis::new(a, b, order).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn european_first_order_is_bachelier() {
        let sigma = 0.5f64.sqrt();
        let req = bm_request(0.2, 0.0, sigma, 1);
        let rep = european_price(&req).unwrap();
        let exact = gaussian_call(&GaussianLaw::new(0.0, sigma).unwrap(), 0.2);
        assert_relative_eq!(rep.price_by_n()[1], exact, max_relative = 1e-14);
    }

    #[test]
    fn european_converges_for_bm() {
        let req = bm_request(0.2, 0.0, 0.6, 60);
        let rep = european_price(&req).unwrap();
        let exact = gaussian_call(&GaussianLaw::new(0.0, 0.5f64.sqrt()).unwrap(), 0.2);
        let best = rep
            .price_by_n()
            .iter()
            .map(|p| ((p - exact) / exact).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "best relative error {best}");
    }

    #[test]
    fn european_deep_out_of_the_money() {
        let rep = european_price(&bm_request(40.0, 0.0, 0.7, 10)).unwrap();
        assert!(rep.price().abs() < 1e-100);
    }

    #[test]
    fn discounted_forward_for_tiny_strike() {
        let spec = ou();
        let law = ou_law(&spec, 0.0, 2.0, 2.0).unwrap();
        let basis = GhpBasis::new(40.0, law.std(), 1).unwrap();
        let req = PriceRequest::new(spec, 0.0, 2.0, vec![2.0], 1e-3, 0.05, basis).unwrap();
        let rep = european_price(&req).unwrap();
        assert_relative_eq!(
            rep.price_by_n()[1],
            (-0.1f64).exp() * (law.mean() - 1e-3),
            max_relative = 1e-12
        );
    }

    #[test]
    fn asian_m0_equals_european() {
        for spec in [ModelSpec::brownian(), ou()] {
            let req = PriceRequest::new(
                spec,
                0.0,
                2.0,
                vec![2.0],
                2.3,
                0.03,
                GhpBasis::new(2.0, 1.7, 25).unwrap(),
            )
            .unwrap();
            let e = european_price(&req).unwrap();
            let a = asian_price(&req).unwrap();
            for (x, y) in e.price_by_n().iter().zip(a.price_by_n()) {
                assert_relative_eq!(*x, *y, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn asian_ou_matches_closed_form() {
        let spec = ou();
        let times = uniform_grid(0.0, 2.0, 1);
        let engine = CorrelatorEngine::new(&spec, 0.0, 2.0, &times).unwrap();
        let law = ou_asian_law(&spec, 0.0, 2.0, &times).unwrap();
        let basis = resolve_basis(&engine, DriftPolicy::Mean, ScalePolicy::FloorRatio(2.0), 30).unwrap();
        assert_relative_eq!(basis.drift(), law.mean(), max_relative = 1e-12);
        assert_relative_eq!(basis.scale(), 2.0 * law.std() / SQRT_2, max_relative = 1e-10);
        let req = PriceRequest::new(spec, 0.0, 2.0, times, 2.0, 0.0, basis).unwrap();
        let rep = asian_price_with(&engine, &req).unwrap();
        assert!(rep.converged());
        let exact = gaussian_call(&law, 2.0);
        assert_relative_eq!(rep.stopped_price(), exact, max_relative = 1e-4);
    }

    #[test]
    fn european_delta_first_order() {
        let sigma = 0.5f64.sqrt();
        let req = bm_request(0.2, 0.0, sigma, 1);
        let d = delta(&req).unwrap();
        let (_, cdf) = std_normal(0.2 / sigma);
        assert_relative_eq!(d, 1.0 - cdf, max_relative = 1e-13);
    }

    #[test]
    fn greeks_match_finite_differences() {
        let spec = ou();
        let times = vec![1.0, 2.0];
        let basis = GhpBasis::new(2.0, 1.5, 8).unwrap();
        let req = PriceRequest::new(spec.clone(), 0.0, 2.0, times.clone(), 2.2, 0.04, basis).unwrap();
        let price = |y: f64, times: Vec<f64>| {
            let r = PriceRequest::new(spec.clone(), 0.0, y, times, 2.2, 0.04, basis).unwrap();
            asian_price(&r).unwrap().price()
        };
        let h = 1e-4 * 2.0;
        let fd = (price(2.0 + h, times.clone()) - price(2.0 - h, times.clone())) / (2.0 * h);
        assert_relative_eq!(delta(&req).unwrap(), fd, max_relative = 1e-5);
        for j in 0..2 {
            let hs = 1e-4;
            let mut up = times.clone();
            let mut dn = times.clone();
            up[j] += hs;
            dn[j] -= hs;
            let fd = (price(2.0, up) - price(2.0, dn)) / (2.0 * hs);
            assert_relative_eq!(theta(&req, j).unwrap(), fd, max_relative = 1e-5);
        }
        assert!(theta(&req, 2).is_err());
    }

    #[test]
    fn compensated_accumulation_agrees_when_benign() {
        let req = bm_request(0.2, 0.0, 1.0, 20);
        let plain = european_price(&req).unwrap();
        let comp = european_price(&req.clone().with_accumulation(Accumulation::Compensated)).unwrap();
        for (x, y) in plain.price_by_n().iter().zip(comp.price_by_n()) {
            assert_relative_eq!(*x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniform_grid_hits_maturity() {
        let g = uniform_grid(0.0, 2.0, 2);
        assert_eq!(g.len(), 3);
        assert_eq!(g[2], 2.0);
        assert_relative_eq!(g[0], 2.0 / 3.0, epsilon = 1e-15);
    }
}

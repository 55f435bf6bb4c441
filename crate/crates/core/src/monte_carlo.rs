//! Monte Carlo benchmark for the discrete average.
//!
//! Gaussian models use exact OU transitions between sampling times. Jump
//! models take Euler steps for drift and diffusion, each step adding an
//! exactly sampled NIG increment (inverse-Gaussian subordination) minus its
//! mean, so the jump part is the compensated martingale of the model.
//!
//! Every path owns a ChaCha8 stream (`seed`, stream = global path index), so
//! results do not depend on the thread schedule; batch means are combined in
//! batch order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bench::exprel;
use crate::correlator::check_times;
use crate::generator::{ModelSpec, NigParams};
use crate::pricer::PriceRequest;
use crate::{Error, Result};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Exact Gaussian OU transitions; no jumps allowed.
    ExactOu,
    /// Euler drift/diffusion plus exact NIG increments per substep.
    EulerJump,
}

impl Scheme {
    /// Exact OU for models without jumps, Euler with jumps otherwise.
    pub fn for_model(spec: &ModelSpec) -> Self {
        if spec.jumps().is_some() {
            Scheme::EulerJump
        } else {
            Scheme::ExactOu
        }
    }
}

/// Simulation settings: `batches` independent batches of `paths` paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub batches: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Euler substeps per sampling interval.
    pub substeps: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 20_000,
            batches: 100,
            seed: 0,
            scheme: Scheme::ExactOu,
            substeps: 100,
        }
    }
}

impl McConfig {
    /// Defaults with the scheme matched to `spec`.
    pub fn for_model(spec: &ModelSpec, seed: u64) -> Self {
        Self {
            seed,
            scheme: Scheme::for_model(spec),
            ..Self::default()
        }
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.paths == 0 || self.batches == 0 || self.substeps == 0 {
            return Err(Error::InvalidParameter(format!(
                "monte carlo needs paths, batches and substeps >= 1, got ({}, {}, {})",
                self.paths, self.batches, self.substeps
            )));
        }
        if self.scheme == Scheme::ExactOu && spec.jumps().is_some() {
            return Err(Error::InvalidParameter("exact OU scheme cannot simulate jumps".into()));
        }
        Ok(())
    }
}

/// Mean, standard error and 95% interval `mean ± 1.96 se`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
}

impl McEstimate {
    fn new(mean: f64, std_error: f64) -> Self {
        Self {
            mean,
            std_error,
            ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.ci95.0 && x <= self.ci95.1
    }
}

/// Inverse Gaussian draw (Michael–Schucany–Haas) with mean `mu` and shape
/// `lambda`, written as `μ / (1 + r + sqrt(r² + 2r))`, `r = μν²/(2λ)`, which
/// avoids the cancellation of the textbook root when `μ/λ` is large.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, mu: f64, lambda: f64) -> f64 {
    let nu: f64 = rng.sample(StandardNormal);
    let r = mu * nu * nu / (2.0 * lambda);
    let x = mu / (1.0 + r + (r * r + 2.0 * r).sqrt());
    let u: f64 = rng.random();
    if u * (mu + x) <= mu {
        x
    } else {
        mu * mu / x
    }
}

/// NIG increment over a time step `h`: `μh + βV + sqrt(V) Z` with
/// `V ~ IG(δh/γ, (δh)²)`.
pub fn sample_nig_increment<R: Rng + ?Sized>(rng: &mut R, p: &NigParams, h: f64) -> f64 {
    let dh = p.delta() * h;
    let v = sample_inverse_gaussian(rng, dh / p.gamma(), dh * dh);
    let z: f64 = rng.sample(StandardNormal);
    p.mu() * h + p.beta() * v + v.sqrt() * z
}

struct Stepper<'a> {
    spec: &'a ModelSpec,
    scheme: Scheme,
    substeps: usize,
}

impl Stepper<'_> {
    fn advance<R: Rng + ?Sized>(&self, rng: &mut R, y: f64, dt: f64) -> f64 {
        let (b0, b1, s0) = (self.spec.drift_const(), self.spec.drift_lin(), self.spec.diff_sq());
        match self.scheme {
            Scheme::ExactOu => {
                let mean = self.spec.drift_flow(y, dt);
                if s0 == 0.0 {
                    return mean;
                }
                let var = s0 * dt * exprel(2.0 * b1 * dt);
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            Scheme::EulerJump => {
                let h = dt / self.substeps as f64;
                let sd = (s0 * h).sqrt();
                let jumps = self.spec.jumps();
                let comp = jumps.map(|p| p.mean() * h).unwrap_or(0.0);
                let mut y = y;
                for _ in 0..self.substeps {
                    let mut dy = (b0 + b1 * y) * h;
                    if s0 > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        dy += sd * z;
                    }
                    if let Some(p) = jumps {
                        dy += sample_nig_increment(rng, p, h) - comp;
                    }
                    y += dy;
                }
                y
            }
        }
    }

    fn path(&self, seed: u64, index: u64, t: f64, y_t: f64, times: &[f64], out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut y = y_t;
        let mut prev = t;
        for (slot, &s) in out.iter_mut().zip(times) {
            y = self.advance(&mut rng, y, s - prev);
            *slot = y;
            prev = s;
        }
    }
}

/// All `paths · batches` paths, one row per path, columns `Y(s_0..=s_m)`.
pub fn simulate_paths(spec: &ModelSpec, t: f64, y_t: f64, times: &[f64], cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    check_times(t, times)?;
    cfg.validate(spec)?;
    let stepper = Stepper {
        spec,
        scheme: cfg.scheme,
        substeps: cfg.substeps,
    };
    let total = cfg.paths * cfg.batches;
    Ok((0..total)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; times.len()];
            stepper.path(cfg.seed, i as u64, t, y_t, times, &mut row);
            row
        })
        .collect())
}

/// Discounted call on the discrete average; standard error from the spread
/// of batch means (from the path spread when there is a single batch).
pub fn mc_price(spec: &ModelSpec, req: &PriceRequest, cfg: &McConfig) -> Result<McEstimate> {
    req.validate()?;
    let est = mc_price_strikes(spec, req.t, req.y_t, &req.times, req.rate, &[req.strike], cfg)?;
    Ok(est[0])
}

/// [`mc_price`] for several strikes on one set of paths.
pub fn mc_price_strikes(
    spec: &ModelSpec,
    t: f64,
    y_t: f64,
    times: &[f64],
    rate: f64,
    strikes: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    check_times(t, times)?;
    cfg.validate(spec)?;
    if let Some(k) = strikes.iter().find(|k| !k.is_finite()) {
        return Err(Error::InvalidParameter(format!("strike must be finite, got {k}")));
    }
    let stepper = Stepper {
        spec,
        scheme: cfg.scheme,
        substeps: cfg.substeps,
    };
    let maturity = *times.last().expect("checked non-empty");
    let disc = (-rate * (maturity - t)).exp();
    let count = times.len() as f64;
    let nk = strikes.len();
    // per batch: (Σ payoff, Σ payoff²) for every strike
    let batch_stats: Vec<Vec<(f64, f64)>> = (0..cfg.batches)
        .into_par_iter()
        .map(|b| {
            let mut row = vec![0.0; times.len()];
            let mut acc = vec![(0.0, 0.0); nk];
            for p in 0..cfg.paths {
                let index = (b * cfg.paths + p) as u64;
                stepper.path(cfg.seed, index, t, y_t, times, &mut row);
                let avg = row.iter().sum::<f64>() / count;
                for (a, &k) in acc.iter_mut().zip(strikes) {
                    let payoff = disc * (avg - k).max(0.0);
                    a.0 += payoff;
                    a.1 += payoff * payoff;
                }
            }
            let np = cfg.paths as f64;
            acc.into_iter().map(|(s, s2)| (s / np, s2 / np)).collect()
        })
        .collect();

    let nb = cfg.batches as f64;
    Ok((0..nk)
        .map(|k| {
            let mean = batch_stats.iter().map(|s| s[k].0).sum::<f64>() / nb;
            let std_error = if cfg.batches >= 2 {
                let var = batch_stats.iter().map(|s| (s[k].0 - mean).powi(2)).sum::<f64>() / (nb - 1.0);
                (var / nb).sqrt()
            } else if cfg.paths >= 2 {
                let (m1, m2) = batch_stats[0][k];
                let np = cfg.paths as f64;
                ((m2 - m1 * m1).max(0.0) * np / (np - 1.0) / np).sqrt()
            } else {
                f64::NAN
            };
            McEstimate::new(mean, std_error)
        })
        .collect())
}

/// Sample mean and standard error of `f` over the rows of `paths`.
pub fn sample_mean(paths: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let n = paths.len() as f64;
    let vals: Vec<f64> = paths.iter().map(|p| f(p)).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

//! `price`: one contract, full γ̃ trace, optional Greeks and MC check.

use std::fmt::Write as _;
use std::str::FromStr;

use asian_hermite::correlator::CorrelatorEngine;
use asian_hermite::monte_carlo::mc_price_strikes;
use asian_hermite::pricer::{
    asian_price_with, delta_with, resolve_basis, theta_with, uniform_grid, DriftPolicy, PriceRequest, ScalePolicy,
};
use clap::Args;

use crate::config::{Family, ModelConfig, NigConfig};
use crate::CliError;

/// `--a`: a number or `mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftArg(pub DriftPolicy);

impl FromStr for DriftArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("mean") {
            return Ok(DriftArg(DriftPolicy::Mean));
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| DriftArg(DriftPolicy::Fixed(v)))
            .ok_or_else(|| format!("expected a number or `mean`, got {s:?}"))
    }
}

/// `--b`: a positive number or `ratio:X` for `X · b̲_σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleArg(pub ScalePolicy);

impl FromStr for ScaleArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (ratio, body) = match s.strip_prefix("ratio:") {
            Some(r) => (true, r),
            None => (false, s),
        };
        let v: f64 = body
            .parse()
            .ok()
            .filter(|v: &f64| *v > 0.0 && v.is_finite())
            .ok_or_else(|| format!("expected a positive number or `ratio:X`, got {s:?}"))?;
        Ok(ScaleArg(if ratio {
            ScalePolicy::FloorRatio(v)
        } else {
            ScalePolicy::Fixed(v)
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyArg {
    Bm,
    Ou,
    Jd,
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    /// Model family; `jd` is OU plus compensated NIG jumps.
    #[arg(long, value_enum, default_value = "ou")]
    pub model: FamilyArg,
    /// Constant drift b0 (default -0.02 for ou/jd, 0 for bm).
    #[arg(long, allow_hyphen_values = true)]
    pub b0: Option<f64>,
    /// Linear drift b1 (default 0.01 for ou/jd, 0 for bm).
    #[arg(long, allow_hyphen_values = true)]
    pub b1: Option<f64>,
    /// Squared diffusion sigma0 (default 0.98 ou, 0.49 jd, 1 bm).
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// State Y(t) (default 2 for ou/jd, 0 for bm).
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long, default_value_t = 2.0)]
    pub maturity: f64,
    /// Number of sampling points minus one; 0 prices the European call.
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    #[arg(long, short = 'K')]
    pub strike: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rate: f64,
    /// Drift of the basis: a number or `mean`.
    #[arg(long, default_value = "mean", allow_hyphen_values = true)]
    pub a: DriftArg,
    /// Scale of the basis: a number or `ratio:X` meaning X times sigma_X/sqrt(2).
    #[arg(long, default_value = "ratio:2.0")]
    pub b: ScaleArg,
    /// Fixed truncation.
    #[arg(long, short = 'n', conflicts_with = "auto_n")]
    pub n: Option<usize>,
    /// Pick N with the stopping criterion (the default when --n is absent).
    #[arg(long)]
    pub auto_n: bool,
    /// Largest N searched by --auto-n.
    #[arg(long, default_value_t = 60)]
    pub n_max: usize,
    #[arg(long, default_value_t = asian_hermite::pricer::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Also report delta and theta at the chosen N.
    #[arg(long)]
    pub greeks: bool,
    /// Compare against a Monte Carlo 95% interval.
    #[arg(long)]
    pub mc_check: bool,
    #[arg(long, default_value_t = 100)]
    pub mc_batches: usize,
    #[arg(long, default_value_t = 20_000)]
    pub mc_paths: usize,
    #[arg(long, default_value_t = 100)]
    pub mc_substeps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with code 4 when the stopping rule does not fire.
    #[arg(long)]
    pub strict: bool,
}

impl PriceArgs {
    pub fn model_config(&self) -> ModelConfig {
        let (family, b0, b1, s0, y0) = match self.model {
            FamilyArg::Bm => (Family::Bm, 0.0, 0.0, 1.0, 0.0),
            FamilyArg::Ou => (Family::Ou, -0.02, 0.01, 0.98, 2.0),
            FamilyArg::Jd => (Family::JumpDiffusion, -0.02, 0.01, 0.49, 2.0),
        };
        ModelConfig {
            family,
            b0: self.b0.unwrap_or(b0),
            b1: self.b1.unwrap_or(b1),
            sigma0: self.sigma0.unwrap_or(s0),
            y0: self.y0.unwrap_or(y0),
            t: self.t,
            maturity: self.maturity,
            rate: self.rate,
            nig: (family == Family::JumpDiffusion).then_some(NigConfig {
                alpha: self.alpha,
                beta: self.beta,
                mu: self.mu,
                delta: self.delta,
            }),
        }
    }
}

/// Result of the `price` command; `render` formats it for the terminal.
#[derive(Debug, Clone)]
pub struct PriceOutcome {
    pub model: String,
    pub a: f64,
    pub b: f64,
    pub chosen_n: usize,
    pub converged: bool,
    pub auto: bool,
    pub price: f64,
    pub price_by_n: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
    pub delta: Option<f64>,
    pub theta: Option<Vec<f64>>,
    pub mc: Option<(f64, f64, f64, bool)>,
}

pub fn price_command(args: &PriceArgs) -> Result<PriceOutcome, CliError> {
    let model = args.model_config();
    model.validate()?;
    if !(args.strike >= 0.0 && args.strike.is_finite()) {
        return Err(CliError::Config(format!(
            "--strike: must be finite and >= 0, got {}",
            args.strike
        )));
    }
    if !args.threshold.is_finite() {
        return Err(CliError::Config("--threshold: must be finite".into()));
    }
    let spec = model.spec()?;
    let auto = args.n.is_none();
    let order = args.n.unwrap_or(args.n_max);
    let times = uniform_grid(model.t, model.maturity, args.m);
    let engine = CorrelatorEngine::new(&spec, model.t, model.y0, &times)?;
    let basis = resolve_basis(&engine, args.a.0, args.b.0, order)?;
    let req = PriceRequest::new(
        spec.clone(),
        model.t,
        model.y0,
        times.clone(),
        args.strike,
        model.rate,
        basis,
    )?;
    let report = asian_price_with(&engine, &req)?.restop(args.threshold);
    let (chosen_n, converged) = if auto {
        (report.chosen_n(), report.converged())
    } else {
        (order, true)
    };
    let price = report.price_by_n()[chosen_n];

    let (delta, theta) = if args.greeks {
        let at = PriceRequest::new(
            spec.clone(),
            model.t,
            model.y0,
            times.clone(),
            args.strike,
            model.rate,
            basis.with_order(chosen_n),
        )?;
        let d = delta_with(&engine, &at)?;
        let th = (0..=args.m)
            .map(|j| theta_with(&engine, &at, j))
            .collect::<Result<Vec<_>, _>>()?;
        (Some(d), Some(th))
    } else {
        (None, None)
    };

    let mc = if args.mc_check {
        let mut cfg = asian_hermite::monte_carlo::McConfig::for_model(&spec, args.seed);
        cfg.batches = args.mc_batches;
        cfg.paths = args.mc_paths;
        cfg.substeps = args.mc_substeps;
        let est = mc_price_strikes(&spec, model.t, model.y0, &times, model.rate, &[args.strike], &cfg)?[0];
        Some((est.mean, est.ci95.0, est.ci95.1, est.contains(price)))
    } else {
        None
    };

    Ok(PriceOutcome {
        model: model.label()?,
        a: basis.drift(),
        b: basis.scale(),
        chosen_n,
        converged,
        auto,
        price,
        price_by_n: report.price_by_n().to_vec(),
        gamma_tilde: report.gamma_tilde().to_vec(),
        delta,
        theta,
        mc,
    })
}

impl PriceOutcome {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model      {}", self.model);
        let _ = writeln!(s, "basis      a = {}, b = {}", self.a, self.b);
        let how = match (self.auto, self.converged) {
            (false, _) => "fixed",
            (true, true) => "stopping rule",
            (true, false) => "NOT CONVERGED, largest N",
        };
        let _ = writeln!(s, "N          {} ({how})", self.chosen_n);
        let _ = writeln!(s, "price      {}", self.price);
        if let Some(d) = self.delta {
            let _ = writeln!(s, "delta      {d}");
        }
        if let Some(th) = &self.theta {
            for (j, v) in th.iter().enumerate() {
                let _ = writeln!(s, "theta[{j}]   {v}");
            }
        }
        if let Some((mean, lo, hi, inside)) = self.mc {
            let flag = if inside { "in" } else { "out" };
            let _ = writeln!(s, "mc         {mean} ci95 [{lo}, {hi}] {flag}");
        }
        let _ = writeln!(s, "trace      N  price  gamma_tilde");
        for (n, (p, g)) in self.price_by_n.iter().zip(&self.gamma_tilde).enumerate() {
            let mark = if n == self.chosen_n { " *" } else { "" };
            let _ = writeln!(s, "  {n:>3}  {p:.12e}  {g:>6.2}{mark}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_and_scale_flags_parse() {
        assert_eq!("mean".parse::<DriftArg>().unwrap().0, DriftPolicy::Mean);
        assert_eq!("-1.5".parse::<DriftArg>().unwrap().0, DriftPolicy::Fixed(-1.5));
        assert!("avg".parse::<DriftArg>().is_err());
        assert_eq!("ratio:2.0".parse::<ScaleArg>().unwrap().0, ScalePolicy::FloorRatio(2.0));
        assert_eq!("0.6".parse::<ScaleArg>().unwrap().0, ScalePolicy::Fixed(0.6));
        assert!("ratio:-1".parse::<ScaleArg>().is_err());
        assert!("0".parse::<ScaleArg>().is_err());
    }
}

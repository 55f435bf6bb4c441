//! Conditional correlators `E[Y(s_0)^{k_0} ··· Y(s_m)^{k_m} | Y(t) = y]`.
//!
//! With `n = max k_j` the compressed formula reads, for `r = m, m-1, ..., 0`,
//! `D^{(r)} e^{G_{n(r+1)} Δ} E^{(r)}` acting on `vec(X_n^{(r)})`-shaped
//! vectors, where after each propagation `vec⁻¹` and a unit vector pick the
//! power of the current sampling time. Here the chain is run as column
//! vectors (the transpose of the row-vector product): the selectors are
//! applied by gathering, and each row-extraction followed by the next
//! elimination is fused into one index table per `(n, r, k)`, so nothing of
//! length `(n+1)^{m+1}` survives plan construction.
//!
//! [`correlator_tower_oracle`] evaluates the same quantity by backward
//! iteration of the single-time moment formula; it shares no code with the
//! compressed path beyond [`generator_matrix`].

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::generator::{generator_matrix, matrix_exponential, GeneratorMatrix, ModelSpec, MAX_GENERATOR_ORDER};
use crate::hermite::monomials;
use crate::kronecker::{kron_size, mth_selectors_with_cap, vec, x_matrix, MthSelector, Selector, DEFAULT_SIZE_CAP};
use crate::{Error, Result};

/// Validates `t < s_0 < ... < s_m`, all finite.
pub(crate) fn check_times(t: f64, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::TimeOrdering("no sampling times".into()));
    }
    if !t.is_finite() || times.iter().any(|s| !s.is_finite()) {
        return Err(Error::TimeOrdering("non-finite time".into()));
    }
    let mut prev = t;
    for (j, &s) in times.iter().enumerate() {
        if !(s > prev) {
            return Err(Error::TimeOrdering(format!("s_{j} = {s} is not after {prev}")));
        }
        prev = s;
    }
    Ok(())
}

/// Conditioning time and state, sampling grid and powers (`k_j` at `s_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorQuery {
    pub t: f64,
    pub y_t: f64,
    pub times: Vec<f64>,
    pub powers: Vec<usize>,
}

impl CorrelatorQuery {
    pub fn new(t: f64, y_t: f64, times: Vec<f64>, powers: Vec<usize>) -> Result<Self> {
        let q = Self { t, y_t, times, powers };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        check_times(self.t, &self.times)?;
        if !self.y_t.is_finite() {
            return Err(Error::InvalidParameter(format!("y_t must be finite, got {}", self.y_t)));
        }
        if self.powers.len() != self.times.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} powers for {} sampling times",
                self.powers.len(),
                self.times.len()
            )));
        }
        Ok(())
    }
}

/// `D^{(r)} e^{G_{n(r+1)} τ} E^{(r)}`, i.e. `e^{G̃_n^{(r)} τ}` on the range of
/// `D^{(r)}`, without forming `G̃`.
#[derive(Debug, Clone)]
pub struct CompressedPropagator {
    r: usize,
    base: GeneratorMatrix,
    selectors: Option<MthSelector>,
}

impl CompressedPropagator {
    pub fn new(spec: &ModelSpec, n: usize, r: usize) -> Result<Self> {
        let base = generator_matrix(spec, n * (r + 1))?;
        let selectors = if r == 0 {
            None
        } else {
            Some(mth_selectors_with_cap(n, r, DEFAULT_SIZE_CAP)?)
        };
        Ok(Self { r, base, selectors })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn base(&self) -> &GeneratorMatrix {
        &self.base
    }

    fn e(&self) -> Selector {
        match &self.selectors {
            Some(s) => s.eliminating().clone(),
            None => Selector::identity(self.base.n() + 1),
        }
    }

    fn d(&self) -> Selector {
        match &self.selectors {
            Some(s) => s.duplicating().clone(),
            None => Selector::identity(self.base.n() + 1),
        }
    }

    /// `D e^{Gτ} E v` for `v` of length `(n+1)^{r+1}`.
    pub fn apply(&self, tau: f64, v: &[f64]) -> Result<Vec<f64>> {
        let g = self.e().apply(v)?;
        let e = self.base.exp(tau)?;
        let h: Vec<f64> = (e * nalgebra::DVector::from_vec(g)).iter().copied().collect();
        self.d().apply(&h)
    }

    /// Dense `G̃ = D G E`; test-size only.
    pub fn dense_generator(&self) -> DMatrix<f64> {
        self.d().to_dense() * self.base.matrix() * self.e().to_dense()
    }
}

/// Which derivative of a correlator to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sensitivity {
    /// The correlator itself.
    Value,
    /// `∂/∂y_t`
    State,
    /// `∂/∂s_j`
    Time(usize),
}

/// Per-`n` data for the compressed chain.
struct Plan {
    /// `E^{(m)} vec(X_n^{(m)}(y))`
    init: Vec<f64>,
    /// `E^{(m)} ∂_y vec(X_n^{(m)}(y))` by the product rule over Kronecker factors.
    init_dy: Vec<f64>,
    /// `gather[r][k][p] = D^{(r+1)}[E^{(r)}[p] (n+1) + k]`, `r = 0..m`.
    gather: Vec<Vec<Vec<u32>>>,
}

struct ExpCache {
    dim: usize,
    generator: Arc<DMatrix<f64>>,
    exps: HashMap<u64, Arc<DMatrix<f64>>>,
}

/// Correlator evaluator bound to one model, conditioning state and sampling
/// grid. Generator exponentials are cached per time step at the largest
/// dimension requested so far; smaller problems use the leading block, which
/// is exact because every `G_n` is lower triangular and nested. Correlator
/// values are memoized per (powers, sensitivity).
pub struct CorrelatorEngine {
    spec: ModelSpec,
    t: f64,
    y_t: f64,
    times: Vec<f64>,
    deltas: Vec<f64>,
    cap: usize,
    exps: RwLock<ExpCache>,
    plans: RwLock<HashMap<usize, Arc<Plan>>>,
    memo: RwLock<HashMap<(Vec<u32>, Sensitivity), f64>>,
}

impl std::fmt::Debug for CorrelatorEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorrelatorEngine")
            .field("spec", &self.spec)
            .field("t", &self.t)
            .field("y_t", &self.y_t)
            .field("times", &self.times)
            .finish_non_exhaustive()
    }
}

impl CorrelatorEngine {
    pub fn new(spec: &ModelSpec, t: f64, y_t: f64, times: &[f64]) -> Result<Self> {
        check_times(t, times)?;
        if !y_t.is_finite() {
            return Err(Error::InvalidParameter(format!("y_t must be finite, got {y_t}")));
        }
        let mut deltas = Vec::with_capacity(times.len());
        let mut prev = t;
        for &s in times {
            deltas.push(s - prev);
            prev = s;
        }
        Ok(Self {
            spec: spec.clone(),
            t,
            y_t,
            times: times.to_vec(),
            deltas,
            cap: DEFAULT_SIZE_CAP,
            exps: RwLock::new(ExpCache {
                dim: 0,
                generator: Arc::new(DMatrix::zeros(0, 0)),
                exps: HashMap::new(),
            }),
            plans: RwLock::new(HashMap::new()),
            memo: RwLock::new(HashMap::new()),
        })
    }

    /// Overrides the limit on `(n+1)^{m+1}`.
    pub fn with_size_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y_t(&self) -> f64 {
        self.y_t
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `m`, the number of sampling times minus one.
    pub fn m(&self) -> usize {
        self.times.len() - 1
    }

    /// Sizes the exponential cache for powers up to `n_max` so that every
    /// later correlator shares the same exponentials.
    pub fn reserve(&self, n_max: usize) -> Result<()> {
        self.ensure_dim(n_max * (self.m() + 1) + 1)
    }

    fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.exps.read().expect("cache lock").dim >= dim {
            return Ok(());
        }
        if dim - 1 > MAX_GENERATOR_ORDER {
            return Err(Error::InvalidParameter(format!(
                "correlator needs generator order {}, limit is {MAX_GENERATOR_ORDER}",
                dim - 1
            )));
        }
        let g = generator_matrix(&self.spec, dim - 1)?;
        let mut cache = self.exps.write().expect("cache lock");
        if cache.dim < dim {
            cache.dim = dim;
            cache.generator = Arc::new(g.matrix().clone());
            cache.exps.clear();
        }
        Ok(())
    }

    fn exp(&self, delta: f64, dim: usize) -> Result<(Arc<DMatrix<f64>>, Arc<DMatrix<f64>>)> {
        self.ensure_dim(dim)?;
        {
            let cache = self.exps.read().expect("cache lock");
            if let Some(e) = cache.exps.get(&delta.to_bits()) {
                return Ok((e.clone(), cache.generator.clone()));
            }
        }
        let mut cache = self.exps.write().expect("cache lock");
        if let Some(e) = cache.exps.get(&delta.to_bits()) {
            return Ok((e.clone(), cache.generator.clone()));
        }
        let e = Arc::new(matrix_exponential(&(cache.generator.as_ref() * delta))?);
        cache.exps.insert(delta.to_bits(), e.clone());
        Ok((e, cache.generator.clone()))
    }

    fn plan(&self, n: usize) -> Result<Arc<Plan>> {
        if let Some(p) = self.plans.read().expect("plan lock").get(&n) {
            return Ok(p.clone());
        }
        let plan = Arc::new(self.build_plan(n)?);
        self.plans
            .write()
            .expect("plan lock")
            .entry(n)
            .or_insert_with(|| plan.clone());
        Ok(plan)
    }

    fn build_plan(&self, n: usize) -> Result<Plan> {
        let m = self.m();
        kron_size(n, m, self.cap)?;
        let dim = n * (m + 1) + 1;
        let width = n + 1;
        let y = self.y_t;

        // selectors of orders 1..=m; order 0 is the identity
        let mut sel: Vec<(Selector, Selector)> = vec![(Selector::identity(width), Selector::identity(width))];
        for r in 1..=m {
            let s = mth_selectors_with_cap(n, r, self.cap)?;
            sel.push((s.eliminating().clone(), s.duplicating().clone()));
        }

        let (init, init_dy) = if m == 0 {
            let h = monomials(n, y);
            let dh = monomial_derivatives(n, y);
            (h, dh)
        } else {
            let vx = vec(&x_matrix(n, m, y));
            let dvx = kron_product_rule(n, m, y);
            let e = &sel[m].0;
            (e.apply(vx.as_slice())?, e.apply(&dvx)?)
        };
        debug_assert_eq!(init.len(), dim);

        let mut gather = Vec::with_capacity(m);
        for r in 0..m {
            let e = &sel[r].0;
            let d = &sel[r + 1].1;
            let per_k: Vec<Vec<u32>> = (0..=n)
                .map(|k| e.map().iter().map(|&c| d.map()[c * width + k] as u32).collect())
                .collect();
            gather.push(per_k);
        }
        Ok(Plan { init, init_dy, gather })
    }

    fn propagate(&self, delta: f64, v: &[f64], differentiate: bool) -> Result<Vec<f64>> {
        let dim = v.len();
        let (e, g) = self.exp(delta, dim)?;
        let mut h = lower_matvec(&e, v);
        if differentiate {
            h = lower_matvec(&g, &h);
        }
        Ok(h)
    }

    /// Correlator for `powers` (`k_j` at `s_j`).
    pub fn correlator(&self, powers: &[usize]) -> Result<f64> {
        self.evaluate(powers, Sensitivity::Value)
    }

    /// Correlator or one of its partial derivatives.
    pub fn evaluate(&self, powers: &[usize], wrt: Sensitivity) -> Result<f64> {
        let m = self.m();
        if powers.len() != m + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} powers for {} sampling times",
                powers.len(),
                m + 1
            )));
        }
        if let Sensitivity::Time(j) = wrt {
            if j > m {
                return Err(Error::InvalidParameter(format!("no sampling time s_{j}")));
            }
        }
        let key: Vec<u32> = powers.iter().map(|&k| k as u32).collect();
        if let Some(&v) = self.memo.read().expect("memo lock").get(&(key.clone(), wrt)) {
            return Ok(v);
        }
        let value = match wrt {
            Sensitivity::Value => self.chain(powers, false, None)?,
            Sensitivity::State => self.chain(powers, true, None)?,
            Sensitivity::Time(j) => {
                let mut v = self.chain(powers, false, Some(j))?;
                if j < m {
                    v -= self.chain(powers, false, Some(j + 1))?;
                }
                v
            }
        };
        self.memo.write().expect("memo lock").insert((key, wrt), value);
        Ok(value)
    }

    /// Runs the chain; `d_state` swaps in the y-derivative of the initial
    /// vector, `d_step = Some(i)` differentiates the exponential of step `i`.
    fn chain(&self, powers: &[usize], d_state: bool, d_step: Option<usize>) -> Result<f64> {
        let m = self.m();
        // all-zero powers still run through the smallest (n = 1) plan
        let n = powers.iter().copied().max().unwrap_or(0).max(1);
        let plan = self.plan(n)?;
        let init = if d_state { &plan.init_dy } else { &plan.init };
        let mut h = self.propagate(self.deltas[0], init, d_step == Some(0))?;
        for j in 1..=m {
            let r = m - j;
            let table = &plan.gather[r][powers[j - 1]];
            let g: Vec<f64> = table.iter().map(|&i| h[i as usize]).collect();
            h = self.propagate(self.deltas[j], &g, d_step == Some(j))?;
        }
        Ok(h[powers[m]])
    }

    /// Evaluates many correlators (in parallel) in input order.
    pub fn evaluate_many(&self, items: &[Vec<usize>], wrt: Sensitivity) -> Result<Vec<f64>> {
        if let Some(n) = items.iter().flat_map(|k| k.iter().copied()).max() {
            self.reserve(n.max(1))?;
            let mut ns: Vec<usize> = items
                .iter()
                .map(|k| k.iter().copied().max().unwrap_or(0).max(1))
                .collect();
            ns.sort_unstable();
            ns.dedup();
            ns.par_iter().try_for_each(|&n| self.plan(n).map(|_| ()))?;
        }
        items.par_iter().map(|k| self.evaluate(k, wrt)).collect()
    }
}

/// `h = L v` for lower-triangular `L`, using the leading `len(v)` block.
fn lower_matvec(l: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let dim = v.len();
    let mut out = vec![0.0; dim];
    // column-major: accumulate column by column
    for (p, &vp) in v.iter().enumerate() {
        if vp == 0.0 {
            continue;
        }
        let col = l.column(p);
        for q in p..dim {
            out[q] += col[q] * vp;
        }
    }
    out
}

/// `(0, 1, 2x, ..., n x^{n-1})`
fn monomial_derivatives(n: usize, x: f64) -> Vec<f64> {
    let h = monomials(n, x);
    (0..=n)
        .map(|k| if k == 0 { 0.0 } else { k as f64 * h[k - 1] })
        .collect()
}

/// `∂_x vec(H(x)ᵀ ⊗^m H(x)) = Σ_f vec(factor f replaced by H'(x))`.
fn kron_product_rule(n: usize, m: usize, x: f64) -> Vec<f64> {
    let h = DMatrix::from_column_slice(n + 1, 1, &monomials(n, x));
    let dh = DMatrix::from_column_slice(n + 1, 1, &monomial_derivatives(n, x));
    let mut total = vec![0.0; (n + 1).pow(m as u32 + 1)];
    for f in 0..=m {
        // factors 0..m-1 are transposed rows, factor m the trailing column
        let pick = |i: usize| if i == f { &dh } else { &h };
        let mut acc = pick(m).clone();
        for i in (0..m).rev() {
            acc = pick(i).transpose().kronecker(&acc);
        }
        for (t, v) in total.iter_mut().zip(acc.as_slice()) {
            *t += v;
        }
    }
    total
}

/// One-shot compressed correlator.
pub fn correlator(spec: &ModelSpec, q: &CorrelatorQuery) -> Result<f64> {
    q.validate()?;
    let n = q.powers.iter().copied().max().unwrap_or(0);
    kron_size(n, q.times.len() - 1, DEFAULT_SIZE_CAP)?;
    CorrelatorEngine::new(spec, q.t, q.y_t, &q.times)?.correlator(&q.powers)
}

/// Backward tower-rule evaluation: start from `x^{k_m}` at `s_m`, map the
/// coefficient vector through `(e^{G Δ_j})ᵀ`, multiply by `x^{k_{j-1}}`, and
/// finally evaluate `e^{G (s_0 - t)}` at `y_t`. Each exponential is computed
/// afresh at the exact degree in play.
pub fn correlator_tower_oracle(spec: &ModelSpec, q: &CorrelatorQuery) -> Result<f64> {
    q.validate()?;
    let total: usize = q.powers.iter().sum();
    if total > MAX_GENERATOR_ORDER {
        return Err(Error::InvalidParameter(format!(
            "tower oracle degree {total} exceeds {MAX_GENERATOR_ORDER}"
        )));
    }
    let m = q.times.len() - 1;
    let mut coeffs = vec![0.0; q.powers[m] + 1];
    coeffs[q.powers[m]] = 1.0;
    for j in (1..=m).rev() {
        let deg = coeffs.len() - 1;
        let e = generator_matrix(spec, deg)?.exp(q.times[j] - q.times[j - 1])?;
        let pulled = e.transpose() * nalgebra::DVector::from_column_slice(&coeffs);
        let shift = q.powers[j - 1];
        let mut next = vec![0.0; deg + shift + 1];
        for (i, c) in pulled.iter().enumerate() {
            next[i + shift] = *c;
        }
        coeffs = next;
    }
    let deg = coeffs.len() - 1;
    let e = generator_matrix(spec, deg)?.exp(q.times[0] - q.t)?;
    let moments = e * nalgebra::DVector::from_vec(monomials(deg, q.y_t));
    Ok(coeffs.iter().zip(moments.iter()).map(|(c, v)| c * v).sum())
}

//! Maximum-a-posteriori fitting by stochastic gradient ascent.
//!
//! The rates are integrated out by Monte Carlo: for each observation, `M`
//! draws `λ̃_jk ~ Gamma(r_jk, 1)` give
//! `log p_i ≈ log (1/M) Σ_m p_t^{(m)} p_y^{(m)}` with the rate of atom `(j,k)`
//! equal to `λ̃_jk e^{x'β_jk}`. Gradients in `(a, β)` differentiate the
//! estimate with the draws held fixed; the gradient in `r` is the
//! self-normalized score-function estimate
//! `Σ_m w_m (ln λ̃_jk^{(m)} - ψ(r_jk))` with `w_m ∝ p^{(m)}`.
//!
//! `a` and `r` are optimized on the log scale. Coefficients get independent
//! Student-t priors, `a` a flat prior, and `r` one of [`RPrior`].

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, TimeStatus};
use crate::dist::{gamma_unchecked, standard_normal};
use crate::error::{Error, Result};
use crate::model::{dot, ModelState};
use crate::num::{log_sum_exp, Real};
use crate::rng::RngStream;
use crate::special::{digamma, gamma_log_pdf, ln_gamma};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RPrior<T> {
    /// `Gamma(shape, scale)` on each weight.
    Gamma { shape: T, scale: T },
    /// Penalty `-weight · ‖r‖₂` over all weights.
    L2 { weight: T },
}

impl<T: Real> RPrior<T> {
    /// `Gamma(0.01/K, 1/0.01)`.
    pub fn sparse_gamma(k: usize) -> Self {
        RPrior::Gamma {
            shape: T::lit(0.01 / k as f64),
            scale: T::lit(100.0),
        }
    }

    /// `Gamma(1/K, 1)`.
    pub fn unit_gamma(k: usize) -> Self {
        RPrior::Gamma {
            shape: T::lit(1.0 / k as f64),
            scale: T::one(),
        }
    }

    /// `-0.001 ‖r‖₂`.
    pub fn l2() -> Self {
        RPrior::L2 { weight: T::lit(0.001) }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Step `lr / √epoch` times the clipped gradient.
    #[default]
    Sgd,
    /// Per-coordinate steps `lr / √(Σ g²)`.
    Adagrad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConfig<T> {
    /// Monte-Carlo draws per observation.
    pub n_mc: usize,
    pub learning_rate: T,
    pub optimizer: Optimizer,
    pub minibatch_size: usize,
    pub n_epochs: usize,
    pub prior_r: RPrior<T>,
    pub student_t_dof: T,
    /// Gradients are rescaled to at most this L2 norm.
    pub clip_norm: T,
    pub k: usize,
    pub seed: u64,
}

impl<T: Real> MapConfig<T> {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            n_mc: 10,
            learning_rate: T::lit(0.01),
            optimizer: Optimizer::Sgd,
            minibatch_size: 100,
            n_epochs: 40,
            prior_r: RPrior::l2(),
            student_t_dof: T::lit(3.0),
            clip_norm: T::lit(100.0),
            k,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 2 {
            return Err(Error::param("at least two Monte-Carlo draws are required"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::param("minibatch size must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::param("K must be at least 1"));
        }
        if !(self.learning_rate >= T::zero()) {
            return Err(Error::param("learning rate must be nonnegative"));
        }
        if !(self.student_t_dof > T::zero() && self.clip_norm > T::zero()) {
            return Err(Error::param("degrees of freedom and clip norm must be positive"));
        }
        match self.prior_r {
            RPrior::Gamma { shape, scale } if !(shape > T::zero() && scale > T::zero()) => {
                Err(Error::param("r prior parameters must be positive"))
            }
            RPrior::L2 { weight } if !(weight >= T::zero()) => {
                Err(Error::param("L2 weight must be nonnegative"))
            }
            _ => Ok(()),
        }
    }
}

/// Point estimate; `a` and `r` are stored on the log scale.
#[derive(Clone, Debug, PartialEq)]
pub struct MapParams<T> {
    pub log_a: T,
    /// `[j][k][g]`.
    pub beta: Vec<Vec<Vec<T>>>,
    /// `[j][k]`.
    pub log_r: Vec<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
struct ParamsJson<T> {
    a: T,
    r: Vec<Vec<T>>,
    beta: Vec<Vec<Vec<T>>>,
    active: Vec<Vec<bool>>,
}

impl<T: Real> MapParams<T> {
    pub fn new(n_risks: usize, k: usize, dim: usize) -> Self {
        Self {
            log_a: T::zero(),
            beta: vec![vec![vec![T::zero(); dim]; k]; n_risks],
            log_r: vec![vec![T::zero(); k]; n_risks],
        }
    }

    pub fn a(&self) -> T {
        self.log_a.exp()
    }

    pub fn r(&self, j: usize, k: usize) -> T {
        self.log_r[j][k].exp()
    }

    pub fn n_risks(&self) -> usize {
        self.log_r.len()
    }

    pub fn k(&self) -> usize {
        self.log_r.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.beta.first().and_then(|b| b.first()).map_or(0, Vec::len)
    }

    fn cells(&self) -> usize {
        self.n_risks() * self.k()
    }

    /// A model state with every atom active and unit hyperparameters.
    pub fn to_state(&self) -> ModelState<T> {
        let mut s = ModelState::neutral(self.n_risks(), self.k(), self.dim());
        s.a = self.a();
        s.r = self
            .log_r
            .iter()
            .map(|row| row.iter().map(|v| v.exp()).collect())
            .collect();
        s.beta = self.beta.clone();
        s
    }

    pub fn from_state(state: &ModelState<T>) -> Self {
        Self {
            log_a: state.a.ln(),
            beta: state.beta.clone(),
            log_r: state
                .r
                .iter()
                .map(|row| row.iter().map(|v| v.ln()).collect())
                .collect(),
        }
    }

    /// Same layout as a model state, without `alpha`, `gamma0` and `c0`.
    pub fn to_json(&self) -> Result<String> {
        let s = self.to_state();
        Ok(serde_json::to_string_pretty(&ParamsJson {
            a: s.a,
            r: s.r,
            beta: s.beta,
            active: s.active,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::from_state(&ModelState::from_json(text)?))
    }
}

/// `ln λ̃` for a batch, indexed `[(b * M + m) * cells + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaDraws<T> {
    pub n_mc: usize,
    pub cells: usize,
    pub log_lambda: Vec<T>,
}

impl<T: Real> LambdaDraws<T> {
    pub fn draw<R: Rng + ?Sized>(params: &MapParams<T>, batch_len: usize, n_mc: usize, rng: &mut R) -> Self {
        let r: Vec<T> = params.log_r.iter().flatten().map(|v| v.exp()).collect();
        let mut log_lambda = Vec::with_capacity(batch_len * n_mc * r.len());
        for _ in 0..batch_len * n_mc {
            log_lambda.extend(r.iter().map(|&rc| gamma_unchecked(rc, T::one(), rng).ln()));
        }
        Self {
            n_mc,
            cells: r.len(),
            log_lambda,
        }
    }

    fn draw_slice(&self, b: usize, m: usize) -> &[T] {
        let start = (b * self.n_mc + m) * self.cells;
        &self.log_lambda[start..start + self.cells]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Case<T> {
    Uncensored { t: T, y: Option<usize> },
    Censored { t: T },
    MissingTime { y: usize },
}

fn case_of<T: Real>(o: &Observation<T>) -> Result<Case<T>> {
    match (o.time, o.event_index()) {
        (TimeStatus::Observed(t), y) => Ok(Case::Uncensored { t, y }),
        (TimeStatus::RightCensored(t), _) => Ok(Case::Censored { t }),
        (TimeStatus::Missing, Some(y)) => Ok(Case::MissingTime { y }),
        (TimeStatus::Missing, None) => Err(Error::Data(
            "rows with both time and type missing cannot be used for MAP fitting".into(),
        )),
    }
}

/// `ln Σ_{c ∈ cells of j} u_c` from per-cell `ln u`.
fn log_event_total<T: Real>(log_u: &[T], j: usize, k: usize) -> T {
    log_sum_exp(&log_u[j * k..(j + 1) * k])
}

/// `(ln p_t, ln p_y)` for one observation and one draw `ln λ̃` (per cell,
/// `j * K + k` order).
pub fn per_observation_likelihood_terms<T: Real>(
    params: &MapParams<T>,
    observation: &Observation<T>,
    log_lambda: &[T],
) -> Result<(T, T)> {
    let case = case_of(observation)?;
    let k = params.k();
    let log_u: Vec<T> = params
        .beta
        .iter()
        .flatten()
        .zip(log_lambda)
        .map(|(b, &ll)| ll + dot(&observation.x, b))
        .collect();
    Ok(case_terms(case, params.a(), k, &log_u))
}

fn case_terms<T: Real>(case: Case<T>, a: T, k: usize, log_u: &[T]) -> (T, T) {
    let log_total = log_sum_exp(log_u);
    let log_py = |y: usize| log_event_total(log_u, y, k) - log_total;
    match case {
        Case::Uncensored { t, y } => {
            let s = (a * t.ln() + log_total).exp();
            let log_pt = a.ln() + (a - T::one()) * t.ln() + log_total - s;
            (log_pt, y.map_or(T::zero(), log_py))
        }
        Case::Censored { t } => {
            if t > T::zero() {
                (-(a * t.ln() + log_total).exp(), T::zero())
            } else {
                (T::zero(), T::zero())
            }
        }
        Case::MissingTime { y } => (T::zero(), log_py(y)),
    }
}

/// Gradient in natural coordinates `(a, β, r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    pub a: T,
    pub beta: Vec<Vec<Vec<T>>>,
    pub r: Vec<Vec<T>>,
}

impl<T: Real> Gradient<T> {
    fn zeros(params: &MapParams<T>) -> Self {
        Self {
            a: T::zero(),
            beta: vec![vec![vec![T::zero(); params.dim()]; params.k()]; params.n_risks()],
            r: vec![vec![T::zero(); params.k()]; params.n_risks()],
        }
    }

    /// The gradient in `(ln a, β, ln r)`.
    pub fn to_unconstrained(&self, params: &MapParams<T>) -> Self {
        Self {
            a: self.a * params.a(),
            beta: self.beta.clone(),
            r: self
                .r
                .iter()
                .zip(&params.log_r)
                .map(|(g, lr)| g.iter().zip(lr).map(|(&gv, &l)| gv * l.exp()).collect())
                .collect(),
        }
    }

    fn flat_mut(&mut self) -> impl Iterator<Item = &mut T> {
        std::iter::once(&mut self.a)
            .chain(self.beta.iter_mut().flatten().flatten())
            .chain(self.r.iter_mut().flatten())
    }

    pub fn norm(&self) -> T {
        let mut s = self.a * self.a;
        for v in self.beta.iter().flatten().flatten().chain(self.r.iter().flatten()) {
            s = s + *v * *v;
        }
        s.sqrt()
    }
}

/// Log prior of the parameters (flat in `a`).
pub fn log_prior<T: Real>(params: &MapParams<T>, config: &MapConfig<T>) -> T {
    let nu = config.student_t_dof;
    let half = T::half();
    let t_const = ln_gamma((nu + T::one()) * half) - ln_gamma(nu * half) - half * (nu * T::PI()).ln();
    let mut lp = T::zero();
    for &b in params.beta.iter().flatten().flatten() {
        lp = lp + t_const - (nu + T::one()) * half * (b * b / nu).ln_1p();
    }
    match config.prior_r {
        RPrior::Gamma { shape, scale } => {
            for &l in params.log_r.iter().flatten() {
                lp = lp + gamma_log_pdf(l.exp(), shape, scale);
            }
        }
        RPrior::L2 { weight } => {
            let sq = params
                .log_r
                .iter()
                .flatten()
                .fold(T::zero(), |s, &l| s + (l + l).exp());
            lp = lp - weight * sq.sqrt();
        }
    }
    lp
}

fn add_prior_gradient<T: Real>(params: &MapParams<T>, config: &MapConfig<T>, g: &mut Gradient<T>) {
    let nu = config.student_t_dof;
    for (gb, &b) in g
        .beta
        .iter_mut()
        .flatten()
        .flatten()
        .zip(params.beta.iter().flatten().flatten())
    {
        *gb = *gb - (nu + T::one()) * b / (nu + b * b);
    }
    match config.prior_r {
        RPrior::Gamma { shape, scale } => {
            for (gr, &l) in g.r.iter_mut().flatten().zip(params.log_r.iter().flatten()) {
                *gr = *gr + (shape - T::one()) / l.exp() - T::one() / scale;
            }
        }
        RPrior::L2 { weight } => {
            let sq = params
                .log_r
                .iter()
                .flatten()
                .fold(T::zero(), |s, &l| s + (l + l).exp());
            let norm = sq.sqrt();
            if norm > T::zero() {
                for (gr, &l) in g.r.iter_mut().flatten().zip(params.log_r.iter().flatten()) {
                    *gr = *gr - weight * l.exp() / norm;
                }
            }
        }
    }
}

/// Data term and (optionally) its gradient for a batch with frozen draws.
/// Observations whose draws all underflow are skipped.
fn evaluate<T: Real>(
    params: &MapParams<T>,
    data: &Dataset<T>,
    batch: &[usize],
    draws: &LambdaDraws<T>,
    mut grad: Option<&mut Gradient<T>>,
) -> Result<(T, usize)> {
    let (nj, k, cells) = (params.n_risks(), params.k(), params.cells());
    if draws.cells != cells || draws.log_lambda.len() != batch.len() * draws.n_mc * cells {
        return Err(Error::param("draws do not match the batch and parameter shapes"));
    }
    let a = params.a();
    let r: Vec<T> = params.log_r.iter().flatten().map(|v| v.exp()).collect();
    let psi: Vec<T> = r.iter().map(|&v| digamma(v)).collect();
    let ln_m = T::from_usize(draws.n_mc).expect("M fits in a float").ln();
    let mut total = T::zero();
    let mut skipped = 0;
    let mut log_u = vec![T::zero(); cells];
    let mut ell = vec![T::zero(); draws.n_mc];
    let mut d_eta = vec![T::zero(); cells];
    for (b, &i) in batch.iter().enumerate() {
        let obs = &data.observations[i];
        let case = case_of(obs)?;
        let eta: Vec<T> = params.beta.iter().flatten().map(|bc| dot(&obs.x, bc)).collect();
        for (m, l) in ell.iter_mut().enumerate() {
            for ((lu, &ll), &e) in log_u.iter_mut().zip(draws.draw_slice(b, m)).zip(&eta) {
                *lu = ll + e;
            }
            let (pt, py) = case_terms(case, a, k, &log_u);
            *l = pt + py;
        }
        let lse = log_sum_exp(&ell);
        if !lse.is_finite() {
            skipped += 1;
            continue;
        }
        total = total + lse - ln_m;
        let Some(g) = grad.as_deref_mut() else {
            continue;
        };
        for m in 0..draws.n_mc {
            let w = (ell[m] - lse).exp();
            if w == T::zero() {
                continue;
            }
            let ll = draws.draw_slice(b, m);
            for ((lu, &l), &e) in log_u.iter_mut().zip(ll).zip(&eta) {
                *lu = l + e;
            }
            let log_total = log_sum_exp(&log_u);
            let share = |c: usize| (log_u[c] - log_total).exp();
            let share_in = |c: usize, y: usize| {
                if c / k == y {
                    (log_u[c] - log_event_total(&log_u, y, k)).exp()
                } else {
                    T::zero()
                }
            };
            let d_a;
            match case {
                Case::Uncensored { t, y } => {
                    let lt = t.ln();
                    let s_log = a * lt;
                    for c in 0..cells {
                        let su = (s_log + log_u[c]).exp();
                        let first = match y {
                            Some(y) => share_in(c, y),
                            None => share(c),
                        };
                        d_eta[c] = first - su;
                    }
                    d_a = T::one() / a + lt - (s_log + log_total).exp() * lt;
                }
                Case::Censored { t } => {
                    if t > T::zero() {
                        let lt = t.ln();
                        for c in 0..cells {
                            d_eta[c] = -(a * lt + log_u[c]).exp();
                        }
                        d_a = -(a * lt + log_total).exp() * lt;
                    } else {
                        d_eta.iter_mut().for_each(|v| *v = T::zero());
                        d_a = T::zero();
                    }
                }
                Case::MissingTime { y } => {
                    for c in 0..cells {
                        d_eta[c] = share_in(c, y) - share(c);
                    }
                    d_a = T::zero();
                }
            }
            g.a = g.a + w * d_a;
            for c in 0..cells {
                let (j, kk) = (c / k, c % k);
                let coef = w * d_eta[c];
                for (gb, &x) in g.beta[j][kk].iter_mut().zip(&obs.x) {
                    *gb = *gb + coef * x;
                }
                g.r[j][kk] = g.r[j][kk] + w * (ll[c] - psi[c]);
            }
        }
    }
    debug_assert_eq!(nj * k, cells);
    Ok((total, skipped))
}

fn batch_scale<T: Real>(data: &Dataset<T>, batch: &[usize]) -> T {
    T::from_usize(data.len()).expect("n fits in a float") / T::from_usize(batch.len()).expect("batch fits in a float")
}

/// `(n/|B|) Σ_{i∈B} log p̂_i + log prior` with the given draws.
pub fn log_posterior_with_draws<T: Real>(
    params: &MapParams<T>,
    data: &Dataset<T>,
    batch: &[usize],
    draws: &LambdaDraws<T>,
    config: &MapConfig<T>,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::param("empty minibatch"));
    }
    let (data_term, _) = evaluate(params, data, batch, draws, None)?;
    Ok(batch_scale(data, batch) * data_term + log_prior(params, config))
}

/// [`log_posterior_with_draws`] with fresh draws.
pub fn log_posterior_estimate<T: Real, R: Rng + ?Sized>(
    params: &MapParams<T>,
    data: &Dataset<T>,
    batch: &[usize],
    config: &MapConfig<T>,
    rng: &mut R,
) -> Result<T> {
    let draws = LambdaDraws::draw(params, batch.len(), config.n_mc, rng);
    log_posterior_with_draws(params, data, batch, &draws, config)
}

/// Full natural-coordinate gradient of the log posterior estimate: exact in
/// `(a, β)` for the frozen draws, score-function in `r`.
pub fn gradient<T: Real>(
    params: &MapParams<T>,
    data: &Dataset<T>,
    batch: &[usize],
    draws: &LambdaDraws<T>,
    config: &MapConfig<T>,
) -> Result<Gradient<T>> {
    if batch.is_empty() {
        return Err(Error::param("empty minibatch"));
    }
    let mut g = Gradient::zeros(params);
    evaluate(params, data, batch, draws, Some(&mut g))?;
    let scale = batch_scale(data, batch);
    g.flat_mut().for_each(|v| *v = *v * scale);
    add_prior_gradient(params, config, &mut g);
    Ok(g)
}

/// `(∂/∂a, ∂/∂β)`.
pub fn grad_a_beta<T: Real>(
    params: &MapParams<T>,
    data: &Dataset<T>,
    batch: &[usize],
    draws: &LambdaDraws<T>,
    config: &MapConfig<T>,
) -> Result<(T, Vec<Vec<Vec<T>>>)> {
    let g = gradient(params, data, batch, draws, config)?;
    Ok((g.a, g.beta))
}

/// `∂/∂r`.
pub fn grad_r<T: Real>(
    params: &MapParams<T>,
    data: &Dataset<T>,
    batch: &[usize],
    draws: &LambdaDraws<T>,
    config: &MapConfig<T>,
) -> Result<Vec<Vec<T>>> {
    Ok(gradient(params, data, batch, draws, config)?.r)
}

/// Self-normalized weights `w_m` of one observation for the given draws.
pub fn importance_weights<T: Real>(
    params: &MapParams<T>,
    observation: &Observation<T>,
    draws: &LambdaDraws<T>,
    b: usize,
) -> Result<Vec<T>> {
    let ell = (0..draws.n_mc)
        .map(|m| {
            per_observation_likelihood_terms(params, observation, draws.draw_slice(b, m))
                .map(|(pt, py)| pt + py)
        })
        .collect::<Result<Vec<T>>>()?;
    let lse = log_sum_exp(&ell);
    Ok(ell.iter().map(|&l| (l - lse).exp()).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapFit<T> {
    pub params: MapParams<T>,
    /// Estimated log posterior on the full data after each epoch.
    pub trace: Vec<T>,
}

/// Starting point: `a = 1`, `r = 1`, small random coefficients.
pub fn initial_params<T: Real, R: Rng + ?Sized>(n_risks: usize, k: usize, dim: usize, rng: &mut R) -> MapParams<T> {
    let mut p = MapParams::new(n_risks, k, dim);
    for b in p.beta.iter_mut().flatten().flatten() {
        *b = T::lit(0.1) * standard_normal::<T, _>(rng);
    }
    p
}

pub fn fit_map<T: Real>(data: &Dataset<T>, config: &MapConfig<T>) -> Result<MapFit<T>> {
    let mut rng = RngStream::new(config.seed, 0);
    let init = initial_params(data.n_risks, config.k, data.dim(), &mut rng);
    fit_map_from(data, config, init, &mut rng)
}

pub fn fit_map_from<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    config: &MapConfig<T>,
    init: MapParams<T>,
    rng: &mut R,
) -> Result<MapFit<T>> {
    config.validate()?;
    data.check_map_valid()?;
    if data.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    if init.n_risks() != data.n_risks || init.dim() != data.dim() {
        return Err(Error::param("initial parameters do not match the data"));
    }
    let mut params = init;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let all: Vec<usize> = order.clone();
    let mut trace = Vec::with_capacity(config.n_epochs);
    let mut accum: Option<Gradient<T>> = None;
    for epoch in 1..=config.n_epochs {
        order.shuffle(rng);
        let lr = config.learning_rate / T::from_usize(epoch).expect("epoch fits").sqrt();
        for batch in order.chunks(config.minibatch_size) {
            let draws = LambdaDraws::draw(&params, batch.len(), config.n_mc, rng);
            let mut g = gradient(&params, data, batch, &draws, config)?.to_unconstrained(&params);
            let norm = g.norm();
            if !norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "gradient diverged in epoch {epoch}; log posterior trace {trace:?}"
                )));
            }
            if norm > config.clip_norm {
                let f = config.clip_norm / norm;
                g.flat_mut().for_each(|v| *v = *v * f);
            }
            let steps: Vec<T> = match config.optimizer {
                Optimizer::Sgd => {
                    let mut g = g;
                    g.flat_mut().map(|v| lr * *v).collect()
                }
                Optimizer::Adagrad => {
                    let acc = accum.get_or_insert_with(|| Gradient::zeros(&params));
                    let mut g = g;
                    acc.flat_mut()
                        .zip(g.flat_mut())
                        .map(|(s, v)| {
                            *s = *s + *v * *v;
                            config.learning_rate * *v / (s.sqrt() + T::lit(1e-8))
                        })
                        .collect()
                }
            };
            let targets = std::iter::once(&mut params.log_a)
                .chain(params.beta.iter_mut().flatten().flatten())
                .chain(params.log_r.iter_mut().flatten());
            for (p, s) in targets.zip(steps) {
                *p = *p + s;
            }
        }
        let lp = log_posterior_estimate(&params, data, &all, config, rng)?;
        trace.push(lp);
        if !lp.is_finite() {
            return Err(Error::Numeric(format!(
                "log posterior diverged in epoch {epoch}; trace {trace:?}"
            )));
        }
    }
    Ok(MapFit { params, trace })
}

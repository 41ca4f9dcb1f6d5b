//! Gibbs sampler for the delegate-racing model.
//!
//! One sweep refreshes the rates `λ` first and then runs sub-event assignment,
//! pruning, time augmentation, and the updates of `a`, `β`, `α`, `(r, γ0)` and
//! `c0`. The updates of `a`, `β` and `(r, γ0)` integrate `λ` out, so `λ` is
//! redrawn at the head of every sweep before anything conditions on it again.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeStatus};
use crate::dist::{
    gamma_unchecked, polya_gamma_unchecked, sample_categorical_linear, sample_crt,
    sample_mvn_from_precision, sample_truncated_weibull, standard_normal, SliceSampler,
};
use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::model::{dot, total_rate, AugmentedState, HyperParams, ModelState};
use crate::num::{softplus, Real};
use crate::rng::RngStream;

const P_CLAMP: f64 = 1.0 - 1e-12;

/// What happens to atoms left without observations after sub-event assignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruning {
    /// Every atom stays in the model; the sampler targets the exact posterior.
    Off,
    /// An emptied atom gets zero rate from then on and never returns.
    #[default]
    Permanent,
    /// An emptied atom is excluded for the rest of the sweep but its rate is
    /// redrawn next sweep, so it can be reassigned observations.
    Revivable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    pub pruning: Pruning,
}

impl McmcConfig {
    /// 20,000 sweeps, 15,000 burn-in, thin 5.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            n_iterations: 20_000,
            n_burnin: 15_000,
            thin: 5,
            seed,
            n_chains: 1,
            pruning: Pruning::Permanent,
        }
    }

    /// 200,000 sweeps, 195,000 burn-in, thin 5.
    pub fn paper_scale(seed: u64) -> Self {
        Self {
            n_iterations: 200_000,
            n_burnin: 195_000,
            ..Self::desk_scale(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::param("thin must be at least 1"));
        }
        if self.n_burnin > self.n_iterations {
            return Err(Error::param(format!(
                "burn-in {} exceeds the {} iterations",
                self.n_burnin, self.n_iterations
            )));
        }
        if self.n_chains == 0 {
            return Err(Error::param("at least one chain is required"));
        }
        Ok(())
    }

    pub fn n_retained(&self) -> usize {
        (self.n_iterations - self.n_burnin).div_ceil(self.thin)
    }
}

/// Per-sweep scalars kept for trace plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary<T> {
    pub iteration: usize,
    pub a: T,
    pub r_sum: Vec<T>,
    pub active_counts: Vec<usize>,
    /// `m_jk` after sub-event assignment.
    pub occupancy: Vec<Vec<usize>>,
    pub log_joint: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw<T> {
    pub iteration: usize,
    pub log_joint: T,
    pub state: ModelState<T>,
}

/// Posterior mean and equal-tailed 95% interval of a scalar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalSummary {
    pub fn from_samples(values: &mut [f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let q = |p: f64| {
            let pos = p * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
        };
        Some(Self {
            mean: values.iter().sum::<f64>() / n as f64,
            lower: q(0.025),
            upper: q(0.975),
        })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws<T> {
    pub draws: Vec<Draw<T>>,
    pub trace: Vec<SweepSummary<T>>,
    pub n_burnin: usize,
}

impl<T: Real> PosteriorDraws<T> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &ModelState<T>> {
        self.draws.iter().map(|d| &d.state)
    }

    /// Pools the retained draws of several chains (trace of the first chain kept).
    pub fn pool(chains: Vec<Self>) -> Self {
        let mut it = chains.into_iter();
        let mut first = it.next().unwrap_or(Self {
            draws: Vec::new(),
            trace: Vec::new(),
            n_burnin: 0,
        });
        for c in it {
            first.draws.extend(c.draws);
        }
        first
    }

    pub fn shape_summary(&self) -> Option<IntervalSummary> {
        let mut a: Vec<f64> = self.states().map(|s| s.a.as_f64()).collect();
        IntervalSummary::from_samples(&mut a)
    }

    /// Per event, the number of atoms holding observations in more than half of
    /// the post-burn-in sweeps.
    pub fn majority_active_counts(&self) -> Vec<usize> {
        let post: Vec<&SweepSummary<T>> = self
            .trace
            .iter()
            .filter(|s| s.iteration >= self.n_burnin)
            .collect();
        let Some(first) = post.first() else {
            return Vec::new();
        };
        first
            .occupancy
            .iter()
            .enumerate()
            .map(|(j, row)| {
                (0..row.len())
                    .filter(|&k| {
                        let on = post.iter().filter(|s| s.occupancy[j][k] > 0).count();
                        2 * on > post.len()
                    })
                    .count()
            })
            .collect()
    }

    /// Per event, the number of atoms whose posterior-mean share of the total
    /// weight `Σ_k r_jk` over active atoms is at least `threshold`. Inactive
    /// atoms count as zero weight in a draw.
    pub fn weight_active_counts(&self, threshold: f64) -> Vec<usize> {
        let Some(first) = self.draws.first() else {
            return Vec::new();
        };
        let (nj, k) = (first.state.n_risks(), first.state.k());
        let mut share = vec![vec![0.0; k]; nj];
        for s in self.states() {
            for j in 0..nj {
                let w = |kk: usize| if s.active[j][kk] { s.r[j][kk].as_f64() } else { 0.0 };
                let tot: f64 = (0..k).map(w).sum();
                if tot > 0.0 {
                    for kk in 0..k {
                        share[j][kk] += w(kk) / tot;
                    }
                }
            }
        }
        let n = self.len() as f64;
        share
            .iter()
            .map(|row| row.iter().filter(|&&v| v / n >= threshold).count())
            .collect()
    }

    /// Writes one JSON record per retained draw.
    pub fn write_trace_ndjson<W: Write>(&self, mut writer: W, include_beta: bool) -> Result<()> {
        #[derive(Serialize)]
        struct Record<'a, T> {
            iteration: usize,
            a: T,
            r: &'a [Vec<T>],
            active: &'a [Vec<bool>],
            log_joint: T,
            #[serde(skip_serializing_if = "Option::is_none")]
            beta: Option<&'a [Vec<Vec<T>>]>,
        }
        for d in &self.draws {
            let rec = Record {
                iteration: d.iteration,
                a: d.state.a,
                r: &d.state.r,
                active: &d.state.active,
                log_joint: d.log_joint,
                beta: include_beta.then_some(d.state.beta.as_slice()),
            };
            serde_json::to_writer(&mut writer, &rec)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Per-observation facts the sampler needs every sweep.
#[derive(Clone, Copy, Debug)]
struct ObsInfo<T> {
    observed_time: Option<T>,
    lower: T,
    event: Option<usize>,
}

/// Starting point: `a = 1`, unit `γ0`, `c0`, `r` and `α`, standard normal `β`.
pub fn initial_state<T: Real, R: Rng + ?Sized>(
    hyper: &HyperParams<T>,
    dim: usize,
    rng: &mut R,
) -> ModelState<T> {
    let mut s = ModelState::neutral(hyper.n_risks, hyper.k, dim);
    for b in s.beta.iter_mut().flatten().flatten() {
        *b = standard_normal(rng);
    }
    s
}

pub struct GibbsSampler<'a, T: Real> {
    data: &'a Dataset<T>,
    hyper: HyperParams<T>,
    pruning: Pruning,
    state: ModelState<T>,
    aug: AugmentedState<T>,
    info: Vec<ObsInfo<T>>,
    log_t: Vec<T>,
    /// `x_i' β_jk`, laid out like `aug.lambda`.
    eta: Vec<T>,
    active: Vec<bool>,
    slice: SliceSampler<T>,
    rng: RngStream,
}

impl<'a, T: Real> GibbsSampler<'a, T> {
    /// Builds a sampler from a parameter state: rates are drawn from their prior
    /// and then sub-events and missing times are imputed.
    pub fn new(
        data: &'a Dataset<T>,
        hyper: HyperParams<T>,
        state: ModelState<T>,
        pruning: Pruning,
        rng: RngStream,
    ) -> Result<Self> {
        let aug = AugmentedState::new(data.len(), hyper.n_risks, hyper.k);
        let mut s = Self::assemble(data, hyper, state, aug, pruning, rng)?;
        let cells = s.aug.cells();
        for i in 0..data.len() {
            for c in 0..cells {
                let idx = i * cells + c;
                let r = s.state.r[c / s.hyper.k][c % s.hyper.k];
                s.aug.lambda[idx] = gamma_unchecked(r, s.eta[idx].exp(), &mut s.rng);
            }
        }
        s.step_subevent_assignment()?;
        s.step_prune();
        s.step_augment_time()?;
        Ok(s)
    }

    /// Builds a sampler around a complete latent state without drawing anything.
    pub fn from_parts(
        data: &'a Dataset<T>,
        hyper: HyperParams<T>,
        state: ModelState<T>,
        aug: AugmentedState<T>,
        pruning: Pruning,
        rng: RngStream,
    ) -> Result<Self> {
        let mut s = Self::assemble(data, hyper, state, aug, pruning, rng)?;
        s.aug.recount();
        s.step_prune();
        Ok(s)
    }

    fn assemble(
        data: &'a Dataset<T>,
        hyper: HyperParams<T>,
        mut state: ModelState<T>,
        aug: AugmentedState<T>,
        pruning: Pruning,
        rng: RngStream,
    ) -> Result<Self> {
        hyper.validate()?;
        state.validate()?;
        if state.n_risks() != hyper.n_risks || data.n_risks != hyper.n_risks {
            return Err(Error::param("number of risks differs between data, state and hyperparameters"));
        }
        if state.k() != hyper.k || aug.k != hyper.k || aug.n_risks != hyper.n_risks {
            return Err(Error::param("truncation level differs between state and hyperparameters"));
        }
        if state.dim() != data.dim() {
            return Err(Error::param(format!(
                "state has {} coefficients per atom but data has {} covariates",
                state.dim(),
                data.dim()
            )));
        }
        if aug.len() != data.len() {
            return Err(Error::param("augmented state does not match the dataset"));
        }
        let info = data
            .observations
            .iter()
            .map(|o| ObsInfo {
                observed_time: o.observed_time(),
                lower: match o.time {
                    TimeStatus::RightCensored(c) => c,
                    _ => T::zero(),
                },
                event: o.event_index(),
            })
            .collect();
        let cells = hyper.n_risks * hyper.k;
        if pruning == Pruning::Off {
            state.active = vec![vec![true; hyper.k]; hyper.n_risks];
        }
        let active = state.active_flat();
        let mut s = Self {
            data,
            hyper,
            pruning,
            state,
            log_t: aug.t.iter().map(|t| t.ln()).collect(),
            aug,
            info,
            eta: vec![T::zero(); data.len() * cells],
            active,
            slice: SliceSampler::default(),
            rng,
        };
        for (i, inf) in s.info.iter().enumerate() {
            if let Some(t) = inf.observed_time {
                s.aug.t[i] = t;
                s.log_t[i] = t.ln();
            }
        }
        for c in 0..cells {
            s.refresh_eta(c);
        }
        Ok(s)
    }

    pub fn state(&self) -> &ModelState<T> {
        &self.state
    }

    pub fn augmented(&self) -> &AugmentedState<T> {
        &self.aug
    }

    pub fn hyper(&self) -> &HyperParams<T> {
        &self.hyper
    }

    pub fn dataset(&self) -> &Dataset<T> {
        self.data
    }

    /// Replaces the parameter state, e.g. to hold some blocks fixed in tests.
    pub fn set_state(&mut self, mut state: ModelState<T>) -> Result<()> {
        state.validate()?;
        if self.pruning == Pruning::Off {
            state.active = vec![vec![true; self.hyper.k]; self.hyper.n_risks];
        }
        self.active = state.active_flat();
        self.state = state;
        for c in 0..self.aug.cells() {
            self.refresh_eta(c);
        }
        Ok(())
    }

    /// Replaces the latent state, keeping observed times fixed.
    pub fn set_augmented(&mut self, aug: AugmentedState<T>) -> Result<()> {
        if aug.len() != self.data.len() || aug.cells() != self.aug.cells() {
            return Err(Error::param("augmented state has the wrong shape"));
        }
        self.aug = aug;
        for i in 0..self.data.len() {
            if let Some(t) = self.info[i].observed_time {
                self.aug.t[i] = t;
            }
            self.log_t[i] = self.aug.t[i].ln();
        }
        self.aug.recount();
        Ok(())
    }

    pub fn into_parts(self) -> (ModelState<T>, AugmentedState<T>) {
        (self.state, self.aug)
    }

    fn refresh_eta(&mut self, c: usize) {
        let (j, k) = (c / self.hyper.k, c % self.hyper.k);
        let cells = self.aug.cells();
        let beta = &self.state.beta[j][k];
        for (i, obs) in self.data.observations.iter().enumerate() {
            self.eta[i * cells + c] = dot(&obs.x, beta);
        }
    }

    fn kf(&self) -> T {
        T::from_usize(self.hyper.k).expect("K fits in a float")
    }

    /// Rates `λ_ijk ~ Gamma(r_jk + n_ijk, e^{η}/(1 + t^a e^{η}))`. Permanently
    /// pruned atoms keep rate zero; revivable ones are redrawn like the rest.
    pub fn step_sample_lambda(&mut self) {
        let cells = self.aug.cells();
        let a = self.state.a;
        let r: Vec<T> = self.state.r.iter().flatten().copied().collect();
        let live: Vec<bool> = match self.pruning {
            Pruning::Permanent => self.active.clone(),
            Pruning::Off | Pruning::Revivable => vec![true; cells],
        };
        for i in 0..self.data.len() {
            let at = a * self.log_t[i];
            let win = self.aug.y[i] * self.hyper.k + self.aug.kappa[i];
            for c in 0..cells {
                let idx = i * cells + c;
                if !live[c] {
                    self.aug.lambda[idx] = T::zero();
                    continue;
                }
                let eta = self.eta[idx];
                let scale = (eta - softplus(at + eta)).exp();
                let shape = if c == win { r[c] + T::one() } else { r[c] };
                self.aug.lambda[idx] = gamma_unchecked(shape, scale, &mut self.rng);
            }
        }
    }

    /// Sub-event (and, when the type is missing, event) assignment proportional
    /// to the rates.
    pub fn step_subevent_assignment(&mut self) -> Result<()> {
        let cells = self.aug.cells();
        let k = self.hyper.k;
        for i in 0..self.data.len() {
            let rates = &self.aug.lambda[i * cells..(i + 1) * cells];
            match self.info[i].event {
                Some(j) => {
                    let kk = sample_categorical_linear(&rates[j * k..(j + 1) * k], &mut self.rng)
                        .map_err(|e| Error::Degenerate(format!("observation {i}: {e}")))?;
                    self.aug.y[i] = j;
                    self.aug.kappa[i] = kk;
                }
                None => {
                    let c = sample_categorical_linear(rates, &mut self.rng)
                        .map_err(|e| Error::Degenerate(format!("observation {i}: {e}")))?;
                    self.aug.y[i] = c / k;
                    self.aug.kappa[i] = c % k;
                }
            }
        }
        self.aug.recount();
        Ok(())
    }

    /// Marks atoms without assigned observations inactive and zeroes their rates.
    pub fn step_prune(&mut self) {
        let k = self.hyper.k;
        for c in 0..self.aug.cells() {
            let on = match self.pruning {
                Pruning::Off => true,
                Pruning::Permanent => self.active[c] && self.aug.m[c] > 0,
                Pruning::Revivable => self.aug.m[c] > 0,
            };
            if !on {
                let cells = self.aug.cells();
                for i in 0..self.data.len() {
                    self.aug.lambda[i * cells + c] = T::zero();
                }
            }
            self.active[c] = on;
            self.state.active[c / k][c % k] = on;
        }
    }

    /// Imputes unobserved times from the Weibull law truncated below at the
    /// censoring time (zero when the time is missing).
    pub fn step_augment_time(&mut self) -> Result<()> {
        let cells = self.aug.cells();
        let a = self.state.a;
        for i in 0..self.data.len() {
            if self.info[i].observed_time.is_some() {
                continue;
            }
            let rate = total_rate(&self.aug.lambda[i * cells..(i + 1) * cells], &self.active);
            let t = sample_truncated_weibull(a, rate, self.info[i].lower, T::infinity(), &mut self.rng)
                .map_err(|e| Error::Numeric(format!("time augmentation of observation {i}: {e}")))?;
            self.aug.t[i] = t;
            self.log_t[i] = t.ln();
        }
        Ok(())
    }

    /// Log full conditional of the shape `a` with the rates integrated out, up
    /// to a constant: `n log a + (a-1) Σ log t_i - Σ_{i,j,k} (n_ijk + r_jk) log(1 + t_i^a e^{η_ijk})`.
    pub fn shape_log_conditional(&self, a: T) -> T {
        let (value, _) = self.shape_terms(a, false);
        value
    }

    /// Derivative of [`Self::shape_log_conditional`] in `a`.
    pub fn shape_log_conditional_derivative(&self, a: T) -> T {
        let (_, d) = self.shape_terms(a, true);
        d
    }

    fn shape_terms(&self, a: T, derivative: bool) -> (T, T) {
        let cells = self.aug.cells();
        let k = self.hyper.k;
        let n = T::from_usize(self.data.len()).expect("n fits in a float");
        let on: Vec<(usize, T)> = (0..cells)
            .filter(|&c| self.active[c])
            .map(|c| (c, self.state.r[c / k][c % k]))
            .collect();
        let mut value = n * a.ln();
        let mut d = n / a;
        for i in 0..self.data.len() {
            let lt = self.log_t[i];
            let at = a * lt;
            let base = i * cells;
            let win = self.aug.y[i] * k + self.aug.kappa[i];
            value += (a - T::one()) * lt;
            d += lt;
            for &(c, r) in &on {
                let psi = at + self.eta[base + c];
                let w = if c == win { r + T::one() } else { r };
                value -= w * softplus(psi);
                if derivative {
                    d -= w * crate::num::sigmoid(psi) * lt;
                }
            }
        }
        if let Some(p) = self.hyper.shape_prior {
            value += p.log_density(a);
            d += (p.shape - T::one()) / a - T::one() / p.scale;
        }
        (value, d)
    }

    /// One slice-sampling transition for `a`.
    pub fn step_sample_shape(&mut self) -> Result<()> {
        let a0 = self.state.a;
        let slice = self.slice;
        let mut rng = std::mem::replace(&mut self.rng, RngStream::new(0, 0));
        let result = slice.sample(|a| self.shape_log_conditional(a), a0, &mut rng);
        self.rng = rng;
        self.state.a = result?;
        Ok(())
    }

    /// Coefficients by Pólya-Gamma augmentation. Inactive atoms, which have no
    /// data attached, are drawn from their prior.
    pub fn step_sample_beta(&mut self) -> Result<()> {
        let cells = self.aug.cells();
        let k = self.hyper.k;
        let p = self.data.dim();
        let a = self.state.a;
        let half = T::half();
        for c in 0..cells {
            let (j, kk) = (c / k, c % k);
            let alpha = &self.state.alpha[j][kk];
            if !self.active[c] {
                for g in 0..p {
                    let z: T = standard_normal(&mut self.rng);
                    self.state.beta[j][kk][g] = z / alpha[g].sqrt();
                }
                for i in 0..self.data.len() {
                    self.aug.omega[i * cells + c] = T::zero();
                }
                // a permanently pruned atom's predictor is never read again
                if self.pruning != Pruning::Permanent {
                    self.refresh_eta(c);
                }
                continue;
            }
            let r = self.state.r[j][kk];
            let mut precision = SquareMatrix::zeros(p);
            precision.add_diagonal(alpha);
            let mut h = vec![T::zero(); p];
            for (i, obs) in self.data.observations.iter().enumerate() {
                let idx = i * cells + c;
                let n_ijk = if self.aug.y[i] == j && self.aug.kappa[i] == kk {
                    T::one()
                } else {
                    T::zero()
                };
                let alt = a * self.log_t[i];
                let omega = polya_gamma_unchecked(r + n_ijk, self.eta[idx] + alt, &mut self.rng);
                self.aug.omega[idx] = omega;
                precision.add_outer(&obs.x, omega);
                let coef = (n_ijk - r) * half - omega * alt;
                for (hg, &xg) in h.iter_mut().zip(&obs.x) {
                    *hg += coef * xg;
                }
            }
            let beta = sample_mvn_from_precision(&h, &precision, &mut self.rng)?;
            self.state.beta[j][kk] = beta;
            self.refresh_eta(c);
        }
        Ok(())
    }

    /// ARD precisions `α ~ Gamma(a0 + 1/2, 1/(b0 + β²/2))`.
    pub fn step_sample_alpha(&mut self) {
        let (a0, b0) = (self.hyper.a0, self.hyper.b0);
        let half = T::half();
        for (alpha_jk, beta_jk) in self
            .state
            .alpha
            .iter_mut()
            .flatten()
            .zip(self.state.beta.iter().flatten())
        {
            for (al, &b) in alpha_jk.iter_mut().zip(beta_jk) {
                *al = gamma_unchecked(a0 + half, T::one() / (b0 + half * b * b), &mut self.rng);
            }
        }
    }

    /// Table augmentation for the gamma-process weights and concentration.
    /// `γ0_j` is drawn with `r_j·` integrated out and then `r_j·` given the new
    /// `γ0_j`. Inactive atoms carry no observations, so their weight is a
    /// prior draw.
    pub fn step_sample_r_gamma0(&mut self) -> Result<()> {
        let cells = self.aug.cells();
        let k = self.hyper.k;
        let kf = self.kf();
        let a = self.state.a;
        let clamp = T::lit(P_CLAMP);

        let mut q = vec![T::zero(); cells];
        for i in 0..self.data.len() {
            let at = a * self.log_t[i];
            let base = i * cells;
            for c in 0..cells {
                if self.active[c] {
                    q[c] += softplus(at + self.eta[base + c]);
                }
            }
        }

        for j in 0..self.hyper.n_risks {
            let g0 = self.state.gamma0[j];
            let c0 = self.state.c0[j];
            let mut tables = 0u64;
            let mut log1m_p_sum = T::zero();
            for kk in 0..k {
                let c = j * k + kk;
                // n_ijk is 0 or 1, and CRT(1, r) = 1, so Σ_i n2_ijk = m_jk
                let customers = self.aug.m[c];
                let l = sample_crt(customers as u64, g0 / kf, &mut self.rng)?;
                self.aug.crt_customers[c] = customers;
                self.aug.crt_tables[c] = l as usize;
                tables += l;
                log1m_p_sum -= (q[c] / c0).ln_1p();
                self.aug.p[c] = (q[c] / (c0 + q[c])).min(clamp);
            }
            let shape = self.hyper.e0 + T::from_u64(tables).expect("count fits");
            let rate = self.hyper.f0 - log1m_p_sum / kf;
            let g0 = gamma_unchecked(shape, T::one() / rate, &mut self.rng);
            self.state.gamma0[j] = g0;
            for kk in 0..k {
                let c = j * k + kk;
                let shape = T::from_usize(self.aug.crt_customers[c]).expect("count fits") + g0 / kf;
                self.state.r[j][kk] = gamma_unchecked(shape, T::one() / (c0 + q[c]), &mut self.rng);
            }
        }
        Ok(())
    }

    /// `c0_j ~ Gamma(e1 + γ0_j, 1/(f1 + Σ_k r_jk))`.
    pub fn step_sample_c0(&mut self) {
        for j in 0..self.hyper.n_risks {
            let rsum = self.state.r[j].iter().fold(T::zero(), |acc, &v| acc + v);
            self.state.c0[j] = gamma_unchecked(
                self.hyper.e1 + self.state.gamma0[j],
                T::one() / (self.hyper.f1 + rsum),
                &mut self.rng,
            );
        }
    }

    /// One full sweep.
    pub fn sweep(&mut self) -> Result<()> {
        self.step_sample_lambda();
        self.step_subevent_assignment()?;
        self.step_prune();
        self.step_augment_time()?;
        self.step_sample_shape()?;
        self.step_sample_beta()?;
        self.step_sample_alpha();
        self.step_sample_r_gamma0()?;
        self.step_sample_c0();
        Ok(())
    }

    pub fn log_joint(&self) -> Result<T> {
        crate::model::log_joint_likelihood(&self.state, &self.aug, self.data)
    }

    fn summary(&self, iteration: usize) -> Result<SweepSummary<T>> {
        let log_joint = self.log_joint()?;
        if !log_joint.is_finite() {
            return Err(Error::Numeric(format!("log joint is {log_joint}")));
        }
        let k = self.hyper.k;
        Ok(SweepSummary {
            iteration,
            a: self.state.a,
            r_sum: self
                .state
                .r
                .iter()
                .map(|row| row.iter().fold(T::zero(), |acc, &v| acc + v))
                .collect(),
            active_counts: self.state.active_counts(),
            occupancy: self.aug.m.chunks(k).map(<[usize]>::to_vec).collect(),
            log_joint,
        })
    }
}

/// Runs one chain from [`initial_state`].
pub fn run_chain<T: Real>(
    config: &McmcConfig,
    hyper: &HyperParams<T>,
    dataset: &Dataset<T>,
    mut rng: RngStream,
) -> Result<PosteriorDraws<T>> {
    config.validate()?;
    let init = initial_state(hyper, dataset.dim(), &mut rng);
    run_chain_from(config, hyper, dataset, init, rng)
}

pub fn run_chain_from<T: Real>(
    config: &McmcConfig,
    hyper: &HyperParams<T>,
    dataset: &Dataset<T>,
    init: ModelState<T>,
    rng: RngStream,
) -> Result<PosteriorDraws<T>> {
    config.validate()?;
    let mut sampler = GibbsSampler::new(dataset, hyper.clone(), init, config.pruning, rng)
        .map_err(|e| Error::Sweep {
            sweep: 0,
            source: Box::new(e),
        })?;
    let mut out = PosteriorDraws {
        draws: Vec::with_capacity(config.n_retained()),
        trace: Vec::with_capacity(config.n_iterations),
        n_burnin: config.n_burnin,
    };
    for it in 0..config.n_iterations {
        let wrap = |e| Error::Sweep {
            sweep: it,
            source: Box::new(e),
        };
        sampler.sweep().map_err(wrap)?;
        let summary = sampler.summary(it).map_err(wrap)?;
        if it >= config.n_burnin && (it - config.n_burnin) % config.thin == 0 {
            out.draws.push(Draw {
                iteration: it,
                log_joint: summary.log_joint,
                state: sampler.state.clone(),
            });
        }
        out.trace.push(summary);
    }
    Ok(out)
}

/// Runs `config.n_chains` chains in parallel; chain `c` uses stream `c` of the
/// configured seed.
pub fn run_chains<T: Real>(
    config: &McmcConfig,
    hyper: &HyperParams<T>,
    dataset: &Dataset<T>,
) -> Result<Vec<PosteriorDraws<T>>> {
    config.validate()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.n_chains)
            .map(|c| {
                scope.spawn(move || {
                    run_chain(config, hyper, dataset, RngStream::new(config.seed, c as u64))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}

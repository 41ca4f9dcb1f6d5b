//! Parameter containers and closed-form model functions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dist::{gamma_unchecked, sample_gamma, standard_normal};
use crate::error::{Error, Result};
use crate::num::{sigmoid, softplus, Real};

/// `Gamma(shape, scale)` prior, mean `shape * scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior<T> {
    pub shape: T,
    pub scale: T,
}

impl<T: Real> GammaPrior<T> {
    pub fn log_density(&self, x: T) -> T {
        crate::special::gamma_log_pdf(x, self.shape, self.scale)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams<T> {
    /// ARD precision prior `Gamma(a0, 1/b0)`.
    pub a0: T,
    pub b0: T,
    /// Concentration prior `Gamma(e0, 1/f0)`.
    pub e0: T,
    pub f0: T,
    /// Gamma-process scale prior `Gamma(e1, 1/f1)`.
    pub e1: T,
    pub f1: T,
    /// Truncation level of each gamma process.
    pub k: usize,
    pub n_risks: usize,
    /// Prior on the Weibull shape; `None` is the flat prior on `(0, ∞)`.
    #[serde(default)]
    pub shape_prior: Option<GammaPrior<T>>,
}

impl<T: Real> HyperParams<T> {
    pub fn new(n_risks: usize, k: usize) -> Self {
        Self {
            a0: T::one(),
            b0: T::one(),
            e0: T::lit(0.01),
            f0: T::lit(0.01),
            e1: T::lit(0.01),
            f1: T::lit(0.01),
            k,
            n_risks,
            shape_prior: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if ![self.a0, self.b0, self.e0, self.f0, self.e1, self.f1]
            .into_iter()
            .all(pos)
        {
            return Err(Error::param("hyperparameters must be positive and finite"));
        }
        if self.k == 0 || self.n_risks == 0 {
            return Err(Error::param("K and J must be at least 1"));
        }
        if let Some(p) = self.shape_prior {
            if !(pos(p.shape) && pos(p.scale)) {
                return Err(Error::param("shape prior parameters must be positive"));
            }
        }
        Ok(())
    }
}

/// All model parameters. Arrays are indexed `[j][k]` and `[j][k][g]`.
///
/// In JSON, `alpha`, `gamma0` and `c0` may be absent (point estimates carry
/// none); they are then filled with ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState<T> {
    pub a: T,
    pub r: Vec<Vec<T>>,
    pub beta: Vec<Vec<Vec<T>>>,
    #[serde(default = "Vec::new")]
    pub alpha: Vec<Vec<Vec<T>>>,
    #[serde(default = "Vec::new")]
    pub gamma0: Vec<T>,
    #[serde(default = "Vec::new")]
    pub c0: Vec<T>,
    pub active: Vec<Vec<bool>>,
}

impl<T: Real> ModelState<T> {
    /// A state with unit weights, zero coefficients and unit precisions.
    pub fn neutral(n_risks: usize, k: usize, dim: usize) -> Self {
        Self {
            a: T::one(),
            r: vec![vec![T::one(); k]; n_risks],
            beta: vec![vec![vec![T::zero(); dim]; k]; n_risks],
            alpha: vec![vec![vec![T::one(); dim]; k]; n_risks],
            gamma0: vec![T::one(); n_risks],
            c0: vec![T::one(); n_risks],
            active: vec![vec![true; k]; n_risks],
        }
    }

    pub fn n_risks(&self) -> usize {
        self.r.len()
    }

    pub fn k(&self) -> usize {
        self.r.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.beta
            .first()
            .and_then(|b| b.first())
            .map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let (j, k, p) = (self.n_risks(), self.k(), self.dim());
        let shape_ok = self.r.iter().all(|v| v.len() == k)
            && self.beta.len() == j
            && self.alpha.len() == j
            && self.active.len() == j
            && self.active.iter().all(|v| v.len() == k)
            && self.gamma0.len() == j
            && self.c0.len() == j
            && self
                .beta
                .iter()
                .chain(&self.alpha)
                .all(|bj| bj.len() == k && bj.iter().all(|b| b.len() == p));
        if !shape_ok {
            return Err(Error::param("model state arrays have inconsistent shapes"));
        }
        let pos = |v: &T| *v > T::zero() && v.is_finite();
        if !(pos(&self.a)
            && self.r.iter().flatten().all(pos)
            && self.alpha.iter().flatten().flatten().all(pos)
            && self.gamma0.iter().all(pos)
            && self.c0.iter().all(pos))
        {
            return Err(Error::param("a, r, alpha, gamma0 and c0 must be positive"));
        }
        if !self.beta.iter().flatten().flatten().all(|b| b.is_finite()) {
            return Err(Error::param("coefficients must be finite"));
        }
        Ok(())
    }

    /// `x' β_jk`.
    #[inline]
    pub fn linear_predictor(&self, x: &[T], j: usize, k: usize) -> T {
        dot(x, &self.beta[j][k])
    }

    /// Active mask flattened in `j * K + k` order.
    pub fn active_flat(&self) -> Vec<bool> {
        self.active.iter().flatten().copied().collect()
    }

    pub fn active_counts(&self) -> Vec<usize> {
        self.active
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut state: Self = serde_json::from_str(s)?;
        state.fill_missing_hyper();
        state.validate()?;
        Ok(state)
    }

    /// Fills empty `alpha`, `gamma0` and `c0` with ones.
    pub fn fill_missing_hyper(&mut self) {
        let (j, k, p) = (self.n_risks(), self.k(), self.dim());
        if self.alpha.is_empty() {
            self.alpha = vec![vec![vec![T::one(); p]; k]; j];
        }
        if self.gamma0.is_empty() {
            self.gamma0 = vec![T::one(); j];
        }
        if self.c0.is_empty() {
            self.c0 = vec![T::one(); j];
        }
    }
}

#[inline]
pub(crate) fn dot<T: Real>(x: &[T], b: &[T]) -> T {
    x.iter().zip(b).fold(T::zero(), |acc, (&u, &v)| acc + u * v)
}

/// Latent variables of the augmented model. Per-observation arrays over cells
/// are flat with index `(i * J + j) * K + k`; per-cell arrays use `j * K + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState<T> {
    pub n_risks: usize,
    pub k: usize,
    /// Observed or imputed event time.
    pub t: Vec<T>,
    /// Observed or imputed event index (zero-based).
    pub y: Vec<usize>,
    /// Winning sub-event within `y` (zero-based).
    pub kappa: Vec<usize>,
    pub lambda: Vec<T>,
    pub omega: Vec<T>,
    /// `m_jk = Σ_i n_ijk`.
    pub m: Vec<usize>,
    /// `Σ_i n2_ijk` from the table augmentation.
    pub crt_customers: Vec<usize>,
    /// `l_jk`.
    pub crt_tables: Vec<usize>,
    pub p: Vec<T>,
}

impl<T: Real> AugmentedState<T> {
    pub fn new(n: usize, n_risks: usize, k: usize) -> Self {
        let cells = n_risks * k;
        Self {
            n_risks,
            k,
            t: vec![T::one(); n],
            y: vec![0; n],
            kappa: vec![0; n],
            lambda: vec![T::one(); n * cells],
            omega: vec![T::zero(); n * cells],
            m: vec![0; cells],
            crt_customers: vec![0; cells],
            crt_tables: vec![0; cells],
            p: vec![T::lit(0.5); cells],
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n_risks * self.k
    }

    #[inline]
    pub fn cell(&self, j: usize, k: usize) -> usize {
        j * self.k + k
    }

    /// The `J*K` rates of observation `i`.
    #[inline]
    pub fn rates(&self, i: usize) -> &[T] {
        let c = self.cells();
        &self.lambda[i * c..(i + 1) * c]
    }

    /// `n_ijk` as 0/1.
    #[inline]
    pub fn n_ijk(&self, i: usize, j: usize, k: usize) -> usize {
        usize::from(self.y[i] == j && self.kappa[i] == k)
    }

    /// Recomputes `m` from `y` and `kappa`.
    pub fn recount(&mut self) {
        self.m.iter_mut().for_each(|v| *v = 0);
        for i in 0..self.t.len() {
            let c = self.y[i] * self.k + self.kappa[i];
            self.m[c] += 1;
        }
    }
}

/// `Σ_{j,k} λ_ijk` over active cells. Every path that needs the total rate of an
/// observation (likelihood, time augmentation, prediction) goes through here.
#[inline]
pub fn total_rate<T: Real>(rates: &[T], active: &[bool]) -> T {
    rates
        .iter()
        .zip(active)
        .filter(|(_, &on)| on)
        .fold(T::zero(), |acc, (&l, _)| acc + l)
}

/// Complete-data log likelihood `Σ_i [log λ_{i y_i κ_i} + log a + (a-1) log t_i - t_i^a Σ λ_i]`.
pub fn log_joint_likelihood<T: Real>(
    state: &ModelState<T>,
    aug: &AugmentedState<T>,
    dataset: &Dataset<T>,
) -> Result<T> {
    if aug.len() != dataset.len() {
        return Err(Error::param("augmented state does not match the dataset"));
    }
    let active = state.active_flat();
    let a = state.a;
    let log_a = a.ln();
    let mut acc = T::zero();
    for i in 0..aug.len() {
        let t = aug.t[i];
        if !(t > T::zero() && t.is_finite()) {
            return Err(Error::Numeric(format!("time {t} of observation {i} is not positive")));
        }
        let rates = aug.rates(i);
        let winner = rates[aug.cell(aug.y[i], aug.kappa[i])];
        let lt = t.ln();
        acc += winner.ln() + log_a + (a - T::one()) * lt - (a * lt).exp() * total_rate(rates, &active);
    }
    Ok(acc)
}

/// `S_j(t) = Π_k (1 + t^a e^{x'β_jk})^{-r_jk}` over active atoms.
pub fn survival_function<T: Real>(x: &[T], t: T, state: &ModelState<T>, j: usize) -> T {
    if t <= T::zero() {
        return T::one();
    }
    let at = state.a * t.ln();
    let mut log_s = T::zero();
    for k in 0..state.k() {
        if state.active[j][k] {
            log_s -= state.r[j][k] * softplus(at + state.linear_predictor(x, j, k));
        }
    }
    log_s.exp()
}

/// `h_j(t) = Σ_k a r_jk t^{a-1} / (t^a + e^{-x'β_jk})` over active atoms.
/// At `t = 0` this is `+∞` for `a < 1`, `Σ_k r_jk e^{x'β_jk}` for `a = 1` and 0 for `a > 1`.
pub fn hazard_function<T: Real>(x: &[T], t: T, state: &ModelState<T>, j: usize) -> T {
    let a = state.a;
    let atoms = (0..state.k()).filter(|&k| state.active[j][k]);
    if t <= T::zero() {
        return if a < T::one() {
            if atoms.clone().next().is_some() {
                T::infinity()
            } else {
                T::zero()
            }
        } else if a == T::one() {
            atoms.fold(T::zero(), |acc, k| {
                acc + state.r[j][k] * state.linear_predictor(x, j, k).exp()
            })
        } else {
            T::zero()
        };
    }
    let at = a * t.ln();
    atoms.fold(T::zero(), |acc, k| {
        acc + a * state.r[j][k] * sigmoid(at + state.linear_predictor(x, j, k)) / t
    })
}

/// `dh_j/dt = Σ_k a r_jk t^{a-2} [(a-1) e^{-x'β} - t^a] / (t^a + e^{-x'β})²`, for `t > 0`.
pub fn hazard_derivative<T: Real>(x: &[T], t: T, state: &ModelState<T>, j: usize) -> T {
    let a = state.a;
    let at = a * t.ln();
    let mut acc = T::zero();
    for k in 0..state.k() {
        if state.active[j][k] {
            let s = sigmoid(at + state.linear_predictor(x, j, k));
            acc += a * state.r[j][k] * s * ((a - T::one()) * (T::one() - s) - s);
        }
    }
    acc / (t * t)
}

/// Draws all parameters from the prior. The shape `a` is 1 under the flat
/// prior and a prior draw when a proper shape prior is configured.
pub fn sample_from_prior<T: Real, R: Rng + ?Sized>(
    hyper: &HyperParams<T>,
    dim: usize,
    rng: &mut R,
) -> Result<ModelState<T>> {
    hyper.validate()?;
    let (nj, k) = (hyper.n_risks, hyper.k);
    let kf = T::from_usize(k).expect("K fits in a float");
    let a = match hyper.shape_prior {
        Some(p) => sample_gamma(p.shape, p.scale, rng)?,
        None => T::one(),
    };
    let mut state = ModelState::neutral(nj, k, dim);
    state.a = a;
    for j in 0..nj {
        state.gamma0[j] = gamma_unchecked(hyper.e0, T::one() / hyper.f0, rng);
        state.c0[j] = gamma_unchecked(hyper.e1, T::one() / hyper.f1, rng);
        for kk in 0..k {
            state.r[j][kk] = gamma_unchecked(state.gamma0[j] / kf, T::one() / state.c0[j], rng);
            for g in 0..dim {
                let al = gamma_unchecked(hyper.a0, T::one() / hyper.b0, rng);
                state.alpha[j][kk][g] = al;
                state.beta[j][kk][g] = standard_normal::<T, _>(rng) / al.sqrt();
            }
        }
    }
    Ok(state)
}

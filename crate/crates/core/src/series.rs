//! Event-time distribution of a single observation as a gamma convolution.
//!
//! Given the atoms, `t^a` is exponential with rate `Λ = Σ_t λ_t` and each
//! `λ_t ~ Gamma(r_t, rate b_t)`. Writing the law of `Λ` as a mixture of
//! `Gamma(ρ + m, rate b₁)` with `b₁ = max b_t` gives
//!
//! `P(T ≤ q) = 1 - c Σ_m δ_m (b₁ / (q^a + b₁))^{ρ+m}`
//!
//! with `c = Π (b_t/b₁)^{r_t}`, `δ_0 = 1`,
//! `δ_{m+1} = 1/(m+1) Σ_{h=1}^{m+1} h γ_h δ_{m+1-h}` and
//! `γ_h = Σ_t r_t (1 - b_t/b₁)^h / h`. The weights `c δ_m` sum to one, so the
//! series is cut at the first `M` whose partial mass reaches the target.
//! Everything is held in log space.

use rand::Rng;

use crate::dist::open01;
use crate::error::{Error, Result};
use crate::model::{dot, ModelState};
use crate::num::Real;

pub const DEFAULT_MASS_TARGET: f64 = 0.9999;
pub const DEFAULT_TERM_CAP: usize = 10_000;
const BISECTION_STEPS: usize = 80;
const MAX_DOUBLINGS: usize = 2_000;

/// Truncated mixture weights of the gamma convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesCdfState<T> {
    /// `ρ = Σ r_t`.
    pub rho: T,
    /// `ln c`.
    pub log_c: T,
    /// `b₁`, the largest rate.
    pub b_max: T,
    /// `ln δ_m` for `m = 0..=M`.
    pub log_delta: Vec<T>,
    /// `ln γ_h` for `h = 1..=M` (index `h - 1`).
    pub log_gamma: Vec<T>,
    /// `ln(c δ_m)`, the mixture weights.
    log_weight: Vec<T>,
}

impl<T: Real> SeriesCdfState<T> {
    /// Builds the series for shapes `r` and rates `b`, extending it until the
    /// mixture weights sum to at least `mass_target`.
    pub fn new(r: &[T], b: &[T], mass_target: T, cap: usize) -> Result<Self> {
        if r.is_empty() || r.len() != b.len() {
            return Err(Error::param("need equally many shapes and rates, at least one"));
        }
        if r.iter().chain(b).any(|&v| !(v > T::zero() && v.is_finite())) {
            return Err(Error::param("shapes and rates must be positive and finite"));
        }
        if !(mass_target > T::zero() && mass_target < T::one()) {
            return Err(Error::param(format!("mass target must lie in (0, 1), got {mass_target}")));
        }
        let b_max = b.iter().copied().fold(T::zero(), T::max);
        let rho = r.iter().copied().fold(T::zero(), |s, v| s + v);
        let log_c = r
            .iter()
            .zip(b)
            .fold(T::zero(), |s, (&ri, &bi)| s + ri * (bi.ln() - b_max.ln()));
        // (ln r_t, ln(1 - b_t/b₁)) for atoms that contribute to γ
        let terms: Vec<(T, T)> = r
            .iter()
            .zip(b)
            .filter(|&(_, &bi)| bi < b_max)
            .map(|(&ri, &bi)| (ri.ln(), (-(bi / b_max)).ln_1p()))
            .collect();

        let mut state = Self {
            rho,
            log_c,
            b_max,
            log_delta: vec![T::zero()],
            log_gamma: Vec::new(),
            log_weight: vec![log_c],
        };
        let log_target = mass_target.ln();
        let mut log_mass = log_c;
        let mut scratch = Vec::new();
        while log_mass < log_target {
            let m = state.log_delta.len();
            if m > cap {
                return Err(Error::Convergence {
                    cap,
                    target: mass_target.as_f64(),
                });
            }
            let h = T::from_usize(m).expect("term index fits in a float");
            scratch.clear();
            scratch.extend(terms.iter().map(|&(lr, lu)| lr + h * lu));
            let lg = if scratch.is_empty() {
                T::neg_infinity()
            } else {
                crate::num::log_sum_exp(&scratch) - h.ln()
            };
            state.log_gamma.push(lg);
            // δ_m = 1/m Σ_{h=1}^{m} h γ_h δ_{m-h}
            scratch.clear();
            for hh in 1..=m {
                let hf = T::from_usize(hh).expect("term index fits in a float");
                scratch.push(hf.ln() + state.log_gamma[hh - 1] + state.log_delta[m - hh]);
            }
            let ld = crate::num::log_sum_exp(&scratch) - h.ln();
            if !(ld > T::neg_infinity()) {
                // equal rates: the first term already carries all the mass
                break;
            }
            state.log_delta.push(ld);
            state.log_weight.push(log_c + ld);
            log_mass = crate::num::log_sum_exp(&[log_mass, log_c + ld]);
        }
        Ok(state)
    }

    /// Truncation point `M`.
    pub fn n_terms(&self) -> usize {
        self.log_delta.len() - 1
    }

    /// `c Σ_{m ≤ M} δ_m`.
    pub fn mass(&self) -> T {
        crate::num::log_sum_exp(&self.log_weight).exp()
    }

    /// `P(T ≤ q)` for Weibull shape `a`.
    pub fn cdf(&self, q: T, a: T) -> T {
        if !(q > T::zero()) {
            return T::zero();
        }
        if q.is_infinite() {
            return T::one();
        }
        let s = q.powf(a);
        // ln(b₁ / (s + b₁)) = -ln(1 + s/b₁)
        let log_ratio = -(s / self.b_max).ln_1p();
        let mut terms = Vec::with_capacity(self.log_weight.len());
        for (m, &lw) in self.log_weight.iter().enumerate() {
            let e = self.rho + T::from_usize(m).expect("term index fits in a float");
            terms.push(lw + e * log_ratio);
        }
        let survival = crate::num::log_sum_exp(&terms).exp();
        (T::one() - survival).max(T::zero()).min(T::one())
    }

    /// Inverse of [`Self::cdf`] at `u` by bracket doubling and bisection.
    pub fn quantile(&self, u: T, a: T) -> Result<T> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::param(format!("quantile level must lie in (0, 1), got {u}")));
        }
        let mut lo = T::zero();
        let mut hi = T::one();
        let mut doublings = 0;
        while self.cdf(hi, a) < u {
            lo = hi;
            hi = hi + hi;
            doublings += 1;
            if doublings > MAX_DOUBLINGS || hi.is_infinite() {
                return Err(Error::Numeric(format!("no finite bracket for quantile {u}")));
            }
        }
        for _ in 0..BISECTION_STEPS {
            let mid = T::half() * (lo + hi);
            if self.cdf(mid, a) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(T::half() * (lo + hi))
    }

    /// Series for the event time of covariates `x` under `state`, over
    /// active atoms: `r_t = r_jk`, `b_t = e^{-x'β_jk}`.
    pub fn for_observation(state: &ModelState<T>, x: &[T], mass_target: T) -> Result<Self> {
        let mut r = Vec::new();
        let mut b = Vec::new();
        for j in 0..state.n_risks() {
            for k in 0..state.k() {
                if state.active[j][k] {
                    r.push(state.r[j][k]);
                    b.push((-dot(x, &state.beta[j][k])).exp());
                }
            }
        }
        Self::new(&r, &b, mass_target, DEFAULT_TERM_CAP)
    }
}

/// `P(T ≤ q)` for the gamma convolution with shapes `r` and rates `b`.
pub fn gamma_convolution_cdf<T: Real>(q: T, a: T, r: &[T], b: &[T], mass_target: T) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::param(format!("Weibull shape must be positive, got {a}")));
    }
    if q < T::zero() {
        return Err(Error::param(format!("time must be nonnegative, got {q}")));
    }
    Ok(SeriesCdfState::new(r, b, mass_target, DEFAULT_TERM_CAP)?.cdf(q, a))
}

/// Inverse-CDF draw of the event time.
pub fn sample_event_time_series<T: Real, R: Rng + ?Sized>(
    a: T,
    r: &[T],
    b: &[T],
    rng: &mut R,
) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::param(format!("Weibull shape must be positive, got {a}")));
    }
    let state = SeriesCdfState::new(r, b, T::lit(DEFAULT_MASS_TARGET), DEFAULT_TERM_CAP)?;
    state.quantile(open01(rng), a)
}

//! Cumulative incidence and event-type probabilities.
//!
//! For one parameter draw, rates `λ_jk ~ Gamma(r_jk, e^{x'β_jk})` are
//! simulated over active atoms and
//! `CIF_j(t) = (Σ_k λ_jk / Σ λ) (1 - exp(-t^a Σ λ))`. Estimates average over
//! posterior draws (or a single MAP state) and `n_mc` simulations each. All
//! times and events share the same simulated rates, so curves are monotone in
//! `t` and the event probabilities sum to one.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::gamma_unchecked;
use crate::error::{Error, Result};
use crate::model::{dot, ModelState};
use crate::num::Real;

pub const DEFAULT_N_MC: usize = 200;
pub const CLASSIFICATION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Mcmc,
    Map,
}

/// Monte-Carlo mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McValue<T> {
    pub value: T,
    pub mc_se: T,
}

/// CIF values for a set of rows: `values[i][j][g]` at `grid[g]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CifEstimate<T> {
    pub grid: Vec<T>,
    pub values: Vec<Vec<Vec<McValue<T>>>>,
    pub n_mc: usize,
    pub source: PredictionSource,
}

impl<T: Real> CifEstimate<T> {
    /// One row per (observation, event, time): `row,time,event,value,mc_se`,
    /// events numbered from 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row", "time", "event", "value", "mc_se"])?;
        for (i, per_event) in self.values.iter().enumerate() {
            for (j, curve) in per_event.iter().enumerate() {
                for (t, v) in self.grid.iter().zip(curve) {
                    w.write_record([
                        i.to_string(),
                        t.to_string(),
                        (j + 1).to_string(),
                        v.value.to_string(),
                        v.mc_se.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `values[i][j][g].value` for all rows at one event and grid index.
    pub fn column(&self, j: usize, g: usize) -> Vec<T> {
        self.values.iter().map(|row| row[j][g].value).collect()
    }
}

fn check_draws<T: Real>(draws: &[ModelState<T>], x: &[T]) -> Result<()> {
    let Some(first) = draws.first() else {
        return Err(Error::param("at least one parameter draw is required"));
    };
    if x.len() != first.dim() {
        return Err(Error::Data(format!(
            "covariate length {} does not match the model dimension {}",
            x.len(),
            first.dim()
        )));
    }
    if draws.iter().flat_map(|s| s.active.iter().flatten()).all(|&a| !a) {
        return Err(Error::Degenerate("no active atoms".into()));
    }
    Ok(())
}

/// Calls `f(a, log_share_j, log_total)` once per simulation, where the shares
/// are `ln(Σ_k λ_jk / Σ λ)` and `log_total = ln Σ λ`.
fn simulate<T, R, F>(x: &[T], draws: &[ModelState<T>], n_mc: usize, rng: &mut R, mut f: F)
where
    T: Real,
    R: Rng + ?Sized,
    F: FnMut(T, &[T], T),
{
    let nj = draws[0].n_risks();
    let mut log_rates = Vec::new();
    let mut shares = vec![T::zero(); nj];
    for state in draws {
        let k = state.k();
        let z: Vec<(usize, T, T)> = (0..nj)
            .flat_map(|j| (0..k).map(move |kk| (j, kk)))
            .filter(|&(j, kk)| state.active[j][kk])
            .map(|(j, kk)| (j, state.r[j][kk], dot(x, &state.beta[j][kk])))
            .collect();
        if z.is_empty() {
            continue;
        }
        for _ in 0..n_mc {
            log_rates.clear();
            log_rates.extend(
                z.iter()
                    .map(|&(_, r, eta)| gamma_unchecked(r, T::one(), rng).ln() + eta),
            );
            let total = crate::num::log_sum_exp(&log_rates);
            for (j, s) in shares.iter_mut().enumerate() {
                let part: Vec<T> = z
                    .iter()
                    .zip(&log_rates)
                    .filter(|((jj, _, _), _)| *jj == j)
                    .map(|(_, &l)| l)
                    .collect();
                *s = if part.is_empty() {
                    T::neg_infinity()
                } else {
                    crate::num::log_sum_exp(&part) - total
                };
            }
            f(state.a, &shares, total);
        }
    }
}

fn mc_value<T: Real>(sum: f64, sum_sq: f64, n: usize) -> McValue<T> {
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    McValue {
        value: T::lit(mean),
        mc_se: T::lit((var / nf).sqrt()),
    }
}

/// `CIF_j(x, t)` for every event `j` and grid time `t`, as `[j][g]`.
pub fn cif_curves<T: Real, R: Rng + ?Sized>(
    x: &[T],
    grid: &[T],
    draws: &[ModelState<T>],
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<Vec<McValue<T>>>> {
    check_draws(draws, x)?;
    if n_mc == 0 {
        return Err(Error::param("n_mc must be at least 1"));
    }
    if let Some(t) = grid.iter().find(|t| !(**t >= T::zero())) {
        return Err(Error::param(format!("evaluation times must be nonnegative, got {t}")));
    }
    let nj = draws[0].n_risks();
    let mut sum = vec![vec![0.0; grid.len()]; nj];
    let mut sum_sq = sum.clone();
    let mut n = 0;
    simulate(x, draws, n_mc, rng, |a, shares, log_total| {
        n += 1;
        for (g, &t) in grid.iter().enumerate() {
            // 1 - exp(-t^a Λ)
            let hit = if t > T::zero() {
                let expo = (a * t.ln() + log_total).exp();
                -(-expo).exp_m1()
            } else {
                T::zero()
            };
            for j in 0..nj {
                let v = (shares[j].exp() * hit).as_f64();
                sum[j][g] += v;
                sum_sq[j][g] += v * v;
            }
        }
    });
    Ok((0..nj)
        .map(|j| (0..grid.len()).map(|g| mc_value(sum[j][g], sum_sq[j][g], n)).collect())
        .collect())
}

/// `CIF_j(x, t)` for one event.
pub fn estimate_cif<T: Real, R: Rng + ?Sized>(
    x: &[T],
    t: T,
    draws: &[ModelState<T>],
    j: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<T> {
    let curves = cif_curves(x, &[t], draws, n_mc, rng)?;
    curves
        .get(j)
        .map(|c| c[0].value)
        .ok_or_else(|| Error::param(format!("event index {j} out of range")))
}

/// CIF curves for every row of a covariate matrix.
pub fn predict_cif<T: Real, R: Rng + ?Sized>(
    xs: &[Vec<T>],
    grid: &[T],
    draws: &[ModelState<T>],
    n_mc: usize,
    source: PredictionSource,
    rng: &mut R,
) -> Result<CifEstimate<T>> {
    let values = xs
        .iter()
        .map(|x| cif_curves(x, grid, draws, n_mc, rng))
        .collect::<Result<_>>()?;
    Ok(CifEstimate {
        grid: grid.to_vec(),
        values,
        n_mc,
        source,
    })
}

/// `P(y = j | x)` for every event, the `t → ∞` limit of the CIF.
pub fn event_probabilities<T: Real, R: Rng + ?Sized>(
    x: &[T],
    draws: &[ModelState<T>],
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    check_draws(draws, x)?;
    if n_mc == 0 {
        return Err(Error::param("n_mc must be at least 1"));
    }
    let nj = draws[0].n_risks();
    let mut sum = vec![0.0; nj];
    let mut n = 0usize;
    simulate(x, draws, n_mc, rng, |_, shares, _| {
        n += 1;
        for (s, v) in sum.iter_mut().zip(shares) {
            *s += v.exp().as_f64();
        }
    });
    // renormalize away rounding so the probabilities sum to one
    let tot: f64 = sum.iter().sum();
    Ok(sum.iter().map(|s| T::lit(s / tot)).collect())
}

pub fn event_probability<T: Real, R: Rng + ?Sized>(
    x: &[T],
    draws: &[ModelState<T>],
    j: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<T> {
    event_probabilities(x, draws, n_mc, rng)?
        .get(j)
        .copied()
        .ok_or_else(|| Error::param(format!("event index {j} out of range")))
}

/// Predicted event index (0-based). With two events, event 0 is chosen when
/// its probability reaches `threshold`; otherwise the most probable event.
pub fn classify<T: Real>(probabilities: &[T], threshold: T) -> usize {
    if probabilities.len() == 2 {
        return if probabilities[0] >= threshold { 0 } else { 1 };
    }
    probabilities
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |best, (j, &p)| if p > best.1 { (j, p) } else { best })
        .0
}

//! Synthetic Weibull-racing data.
//!
//! Covariates are iid `Uniform(0, 1)`; each risk `j` has latent time
//! `t_j ~ Weibull(a, rate_j(x))` and the observation is the minimum of the
//! latent times and a fixed censoring time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{train_test_split, Dataset, EventStatus, TimeStatus};
use crate::dist::{open01, weibull_inverse_cdf};
use crate::error::{Error, Result};
use crate::model::dot;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMap {
    Exp,
    Cosh,
    AbsSinh,
}

impl RateMap {
    pub fn apply<T: Real>(self, z: T) -> T {
        match self {
            RateMap::Exp => z.exp(),
            RateMap::Cosh => z.cosh(),
            RateMap::AbsSinh => z.sinh().abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec<T> {
    pub rate: RateMap,
    /// Coefficients on the raw covariates (no intercept).
    pub beta: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec<T> {
    pub name: String,
    pub n: usize,
    pub a: T,
    pub dim: usize,
    pub censor_time: T,
    pub risks: Vec<RiskSpec<T>>,
    /// Prepend an intercept column to the generated dataset.
    pub includes_intercept: bool,
    /// Times at which predictions are evaluated.
    pub grid: Vec<T>,
}

fn default_betas<T: Real>() -> (Vec<T>, Vec<T>) {
    (
        vec![T::lit(1.0), T::lit(-1.0), T::lit(0.5)],
        vec![T::lit(-0.5), T::lit(1.0), T::lit(-1.0)],
    )
}

impl<T: Real> ScenarioSpec<T> {
    /// Two log-linear risks, `a = 2`, censoring at 2.1.
    pub fn scenario1() -> Self {
        let (b1, b2) = default_betas();
        Self {
            name: "scenario1".into(),
            n: 2000,
            a: T::two(),
            dim: 3,
            censor_time: T::lit(2.1),
            risks: vec![
                RiskSpec { rate: RateMap::Exp, beta: b1 },
                RiskSpec { rate: RateMap::Exp, beta: b2 },
            ],
            includes_intercept: true,
            grid: [0.4, 0.8, 1.2, 1.6, 2.0].map(T::lit).to_vec(),
        }
    }

    /// Rates `cosh(x'β1)` and `|sinh(x'β2)|`, `a = 2`, censoring at 1.3.
    pub fn scenario2() -> Self {
        let (b1, b2) = default_betas();
        Self {
            name: "scenario2".into(),
            n: 2000,
            a: T::two(),
            dim: 3,
            censor_time: T::lit(1.3),
            risks: vec![
                RiskSpec { rate: RateMap::Cosh, beta: b1 },
                RiskSpec { rate: RateMap::AbsSinh, beta: b2 },
            ],
            includes_intercept: true,
            grid: [0.4, 0.6, 0.8, 1.0, 1.2].map(T::lit).to_vec(),
        }
    }

    pub fn by_number(scenario: u32) -> Result<Self> {
        match scenario {
            1 => Ok(Self::scenario1()),
            2 => Ok(Self::scenario2()),
            other => Err(Error::param(format!("unknown scenario {other}; expected 1 or 2"))),
        }
    }

    pub fn n_risks(&self) -> usize {
        self.risks.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.censor_time > T::zero()) {
            return Err(Error::param("censoring time must be positive"));
        }
        if !(self.a > T::zero()) {
            return Err(Error::param("Weibull shape must be positive"));
        }
        if self.risks.is_empty() {
            return Err(Error::param("at least one risk is required"));
        }
        if self.risks.iter().any(|r| r.beta.len() != self.dim) {
            return Err(Error::param("coefficient length must equal the covariate dimension"));
        }
        Ok(())
    }

    /// True rate of each risk at raw covariates `x`.
    pub fn rates(&self, x: &[T]) -> Vec<T> {
        self.risks
            .iter()
            .map(|r| r.rate.apply(dot(x, &r.beta)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Latent quantities behind a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T> {
    /// Raw covariates, one row per observation.
    pub x: Vec<Vec<T>>,
    /// `latent_times[i][j]`.
    pub latent_times: Vec<Vec<T>>,
    /// Argmin over risks before censoring, numbered from 1.
    pub true_event: Vec<usize>,
    pub rates: Vec<Vec<T>>,
}

/// Simulates the scenario with its configured rate maps.
pub fn generate<T: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    rng: &mut R,
) -> Result<(Dataset<T>, GroundTruth<T>)> {
    generate_with(spec, |x, j| spec.risks[j].rate.apply(dot(x, &spec.risks[j].beta)), rng)
}

/// Simulates with an arbitrary positive rate function `rate(x, j)`; the rate
/// maps and coefficients in `spec` are ignored except for the risk count.
pub fn generate_with<T, R, F>(
    spec: &ScenarioSpec<T>,
    rate: F,
    rng: &mut R,
) -> Result<(Dataset<T>, GroundTruth<T>)>
where
    T: Real,
    R: Rng + ?Sized,
    F: Fn(&[T], usize) -> T,
{
    spec.validate()?;
    let nj = spec.n_risks();
    let mut truth = GroundTruth {
        x: Vec::with_capacity(spec.n),
        latent_times: Vec::with_capacity(spec.n),
        true_event: Vec::with_capacity(spec.n),
        rates: Vec::with_capacity(spec.n),
    };
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<T> = (0..spec.dim).map(|_| open01(rng)).collect();
        let rates: Vec<T> = (0..nj).map(|j| rate(&x, j)).collect();
        let times: Vec<T> = rates
            .iter()
            .map(|&l| {
                let u = open01(rng);
                if l > T::zero() {
                    weibull_inverse_cdf(spec.a, l, u)
                } else {
                    T::infinity()
                }
            })
            .collect();
        let (winner, tmin) = times
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |best, (j, &t)| if t < best.1 { (j, t) } else { best });
        let (time, event) = if tmin < spec.censor_time {
            (TimeStatus::Observed(tmin), EventStatus::Known(winner + 1))
        } else {
            (TimeStatus::RightCensored(spec.censor_time), EventStatus::Missing)
        };
        rows.push((x.clone(), time, event));
        truth.x.push(x);
        truth.latent_times.push(times);
        truth.true_event.push(winner + 1);
        truth.rates.push(rates);
    }
    let names = (1..=spec.dim).map(|g| format!("x{g}")).collect();
    let ds = Dataset::from_raw(rows, nj, names, spec.includes_intercept)?;
    Ok((ds, truth))
}

/// A simulated dataset with repeated random train/test partitions.
#[derive(Clone, Debug)]
pub struct Protocol<T> {
    pub dataset: Dataset<T>,
    pub truth: GroundTruth<T>,
    pub partitions: Vec<(Dataset<T>, Dataset<T>)>,
    pub grid: Vec<T>,
}

/// Simulates `spec.n` rows once and draws `n_partitions` splits with
/// `n_test` uncensored test rows each (200 of 2000 in the standard setup).
pub fn replicate_paper_protocol<T: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    n_partitions: usize,
    n_test: usize,
    rng: &mut R,
) -> Result<Protocol<T>> {
    let (dataset, truth) = generate(spec, rng)?;
    let partitions = (0..n_partitions)
        .map(|_| train_test_split(&dataset, n_test, rng, true))
        .collect::<Result<Vec<_>>>()?;
    Ok(Protocol {
        dataset,
        truth,
        partitions,
        grid: spec.grid.clone(),
    })
}

/// Sidecar written next to a simulated CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar<T> {
    pub seed: u64,
    pub scenario: ScenarioSpec<T>,
    pub censored_fraction: f64,
}

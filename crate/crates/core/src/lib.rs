//! Weibull delegate racing for competing-risks survival analysis.
//!
//! Each event type `j` is a race between up to `K` latent sub-events whose
//! rates `λ_jk ~ Gamma(r_jk, e^{x'β_jk})` share one Weibull shape `a`; the
//! observed time is the minimum and the observed type is the winner's event.
//! The weights `r_jk` come from a truncated gamma process, so unneeded
//! sub-events are shrunk away.
//!
//! * [`gibbs`] samples the posterior, [`map`] finds a point estimate.
//! * [`predict`] turns either into cumulative incidence curves and event-type
//!   probabilities; [`metrics`] scores them.
//! * [`synth`] simulates racing data; [`data`] reads and writes CSV.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar.

pub mod data;
pub mod dist;
pub mod error;
pub mod gibbs;
pub mod linalg;
pub mod map;
pub mod metrics;
pub mod model;
pub mod num;
pub mod predict;
pub mod rng;
pub mod series;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub use num::Real;
pub use rng::RngStream;

pub type Dataset = data::Dataset<f64>;
pub type ModelState = model::ModelState<f64>;
pub type HyperParams = model::HyperParams<f64>;
pub type PosteriorDraws = gibbs::PosteriorDraws<f64>;
pub type MapParams = map::MapParams<f64>;
pub type MapConfig = map::MapConfig<f64>;
pub type CifEstimate = predict::CifEstimate<f64>;
pub type ScenarioSpec = synth::ScenarioSpec<f64>;

pub type Dataset32 = data::Dataset<f32>;
pub type ModelState32 = model::ModelState<f32>;
pub type HyperParams32 = model::HyperParams<f32>;
pub type PosteriorDraws32 = gibbs::PosteriorDraws<f32>;
pub type MapParams32 = map::MapParams<f32>;
pub type MapConfig32 = map::MapConfig<f32>;
pub type CifEstimate32 = predict::CifEstimate<f32>;
pub type ScenarioSpec32 = synth::ScenarioSpec<f32>;

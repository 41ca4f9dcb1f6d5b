//! Checks behind the numbered acceptance criteria 4 to 8. Each returns named
//! checks so the acceptance runner can report them and the topic test files
//! can assert them.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma as GammaOracle};
use statrs::distribution::{ContinuousCDF, Gamma as GammaCdf};
use statrs::function::gamma::{digamma as digamma_oracle, ln_gamma as ln_gamma_oracle};
use wdr::data::{Dataset, EventStatus, TimeStatus};
use wdr::dist::{sample_categorical_linear, sample_gamma, sample_weibull};
use wdr::gibbs::{GibbsSampler, Pruning};
use wdr::map::{gradient, log_posterior_with_draws, LambdaDraws, MapConfig, MapParams, RPrior};
use wdr::metrics::{brier_score, c_index, classification_metrics};
use wdr::model::{sample_from_prior, AugmentedState, GammaPrior, HyperParams, ModelState};
use wdr::series::{gamma_convolution_cdf, SeriesCdfState, DEFAULT_MASS_TARGET, DEFAULT_TERM_CAP};
use wdr::RngStream;

use crate::common::{ks_one_sample, ks_two_sample, mean_var};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub fn assert_all(checks: &[Check]) {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    assert!(failed.is_empty(), "failed checks:\n{}", failed.join("\n"));
}

fn ks_check(name: String, samples: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Check {
    let (d, p) = ks_one_sample(samples, cdf);
    Check::new(name, p > alpha, format!("D = {d:.4}, p = {p:.4}"))
}

fn moment_check(name: String, samples: &[f64], target: f64, k_se: f64) -> Check {
    let (m, v) = mean_var(samples);
    let se = (v / samples.len() as f64).sqrt();
    Check::new(
        name,
        (m - target).abs() <= k_se * se,
        format!("mean {m:.5} vs {target:.5} ({:.2} s.e.)", (m - target) / se),
    )
}

/// `Gamma(shape, scale)` CDF from statrs, which takes a rate.
fn gamma_cdf(shape: f64, scale: f64) -> impl Fn(f64) -> f64 {
    let g = GammaCdf::new(shape, 1.0 / scale).unwrap();
    move |x| g.cdf(x)
}

// ---------------------------------------------------------------------------
// Criterion 4: the Weibull racing law.

pub fn property1() -> Vec<Check> {
    const N: usize = 100_000;
    const ALPHA: f64 = 0.01;
    let mut rng = RngStream::new(401, 0);
    let configs: [(f64, &[f64]); 3] = [(2.0, &[1.0, 3.0]), (0.7, &[0.5, 1.0, 2.0]), (1.5, &[2.0, 2.0])];
    let mut checks = Vec::new();
    for (a, lambdas) in configs {
        let total: f64 = lambdas.iter().sum();
        let mut by_winner: Vec<Vec<f64>> = vec![Vec::new(); lambdas.len()];
        let mut all = Vec::with_capacity(N);
        for _ in 0..N {
            let (mut tmin, mut jmin) = (f64::INFINITY, 0);
            for (j, &l) in lambdas.iter().enumerate() {
                let t = sample_weibull(a, l, &mut rng).unwrap();
                if t < tmin {
                    tmin = t;
                    jmin = j;
                }
            }
            by_winner[jmin].push(tmin);
            all.push(tmin);
        }
        let tag = format!("a={a}, λ={lambdas:?}");
        for (j, &l) in lambdas.iter().enumerate() {
            let p = by_winner[j].len() as f64 / N as f64;
            checks.push(Check::new(
                format!("P(y={}) [{tag}]", j + 1),
                (p - l / total).abs() < 0.01,
                format!("{p:.4} vs {:.4}", l / total),
            ));
        }
        for j in 1..lambdas.len() {
            let (d, p) = ks_two_sample(&by_winner[0], &by_winner[j]);
            checks.push(Check::new(
                format!("t | y=1 vs t | y={} [{tag}]", j + 1),
                p > ALPHA,
                format!("D = {d:.4}, p = {p:.4}"),
            ));
        }
        checks.push(ks_check(
            format!("t ~ Weibull(a, Σλ) [{tag}]"),
            &all,
            |t| 1.0 - (-total * t.powf(a)).exp(),
            ALPHA,
        ));
    }
    checks
}

// ---------------------------------------------------------------------------
// Criterion 5: Gibbs conditionals and the joint-distribution test.

/// Eight rows with two risks: observed rows of both types, a censored row, a
/// row with missing type and a row with missing time.
fn toy_dataset() -> Dataset<f64> {
    let rows = vec![
        (vec![0.2], TimeStatus::Observed(0.8), EventStatus::Known(1)),
        (vec![0.9], TimeStatus::Observed(0.3), EventStatus::Known(2)),
        (vec![0.5], TimeStatus::Observed(1.4), EventStatus::Known(1)),
        (vec![0.1], TimeStatus::Observed(0.6), EventStatus::Known(2)),
        (vec![0.7], TimeStatus::RightCensored(1.1), EventStatus::Missing),
        (vec![0.4], TimeStatus::Observed(0.9), EventStatus::Missing),
        (vec![0.6], TimeStatus::Missing, EventStatus::Known(1)),
        (vec![0.3], TimeStatus::Observed(0.5), EventStatus::Known(1)),
    ];
    Dataset::from_raw(rows, 2, vec!["x".into()], true).unwrap()
}

const CENSORED_ROW: usize = 4;
const UNTYPED_ROW: usize = 5;
const UNTIMED_ROW: usize = 6;

fn toy_hyper() -> HyperParams<f64> {
    let mut h = HyperParams::new(2, 2);
    h.e0 = 0.5;
    h.f0 = 0.5;
    h.e1 = 2.0;
    h.f1 = 1.5;
    h
}

fn toy_state() -> ModelState<f64> {
    let mut s = ModelState::neutral(2, 2, 2);
    s.a = 1.3;
    s.r = vec![vec![0.8, 1.7], vec![2.2, 0.4]];
    s.beta = vec![
        vec![vec![0.3, -0.5], vec![-0.2, 0.9]],
        vec![vec![0.1, 0.4], vec![-0.6, -0.3]],
    ];
    s.alpha = vec![vec![vec![1.5, 0.7], vec![2.0, 0.9]], vec![vec![0.6, 1.1], vec![1.3, 0.8]]];
    s.gamma0 = vec![1.4, 0.9];
    s.c0 = vec![0.8, 1.2];
    s
}

/// Latent state consistent with the toy data: every cell has observations.
fn toy_augmented(ds: &Dataset<f64>) -> AugmentedState<f64> {
    let mut aug = AugmentedState::new(ds.len(), 2, 2);
    let assign = [(0, 0), (1, 1), (0, 1), (1, 0), (1, 1), (0, 0), (0, 1), (0, 0)];
    for (i, o) in ds.observations.iter().enumerate() {
        aug.t[i] = match o.time {
            TimeStatus::Observed(t) => t,
            TimeStatus::RightCensored(c) => c + 0.4,
            TimeStatus::Missing => 0.7,
        };
        (aug.y[i], aug.kappa[i]) = assign[i];
    }
    for (c, l) in aug.lambda.iter_mut().enumerate() {
        *l = 0.3 + 0.1 * (c % 7) as f64;
    }
    aug.recount();
    aug
}

fn eta(state: &ModelState<f64>, x: &[f64], c: usize) -> f64 {
    let b = &state.beta[c / 2][c % 2];
    x.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Unnormalized log density on a grid, turned into a CDF by the trapezoid rule.
struct GridCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridCdf {
    fn new(lo: f64, hi: f64, n: usize, log_density: impl Fn(f64) -> f64) -> Self {
        let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let ld: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
        let top = ld.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d: Vec<f64> = ld.iter().map(|v| (v - top).exp()).collect();
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (d[i] + d[i - 1]) * (xs[i] - xs[i - 1]);
        }
        let z = cdf[xs.len() - 1];
        cdf.iter_mut().for_each(|v| *v /= z);
        Self { xs, cdf }
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        let i = self.xs.partition_point(|&v| v < x).min(self.xs.len() - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        self.cdf[i - 1] + (self.cdf[i] - self.cdf[i - 1]) * (x - x0) / (x1 - x0)
    }

    fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&v| v < u).clamp(1, self.xs.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + f * (self.xs[i] - self.xs[i - 1])
    }
}

fn sampler<'a>(ds: &'a Dataset<f64>, state: ModelState<f64>, aug: AugmentedState<f64>, seed: u64) -> GibbsSampler<'a, f64> {
    GibbsSampler::from_parts(ds, toy_hyper(), state, aug, Pruning::Off, RngStream::new(seed, 0)).unwrap()
}

fn check_rates(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let state = toy_state();
    let aug = toy_augmented(&ds);
    let mut s = sampler(&ds, state.clone(), aug.clone(), 501);
    let picks = [(0usize, 0usize), (0, 3), (CENSORED_ROW, 3), (UNTYPED_ROW, 2)];
    let mut samples = vec![Vec::new(); picks.len()];
    for _ in 0..20_000 {
        s.step_sample_lambda();
        for (v, &(i, c)) in samples.iter_mut().zip(&picks) {
            v.push(s.augmented().lambda[i * 4 + c]);
        }
    }
    for (v, &(i, c)) in samples.iter().zip(&picks) {
        let e = eta(&state, &ds.observations[i].x, c);
        let t = aug.t[i];
        let n = usize::from(aug.y[i] * 2 + aug.kappa[i] == c) as f64;
        let shape = state.r[c / 2][c % 2] + n;
        let scale = e.exp() / (1.0 + t.powf(state.a) * e.exp());
        checks.push(ks_check(format!("step 3: λ[{i},{c}]"), v, gamma_cdf(shape, scale), 0.01));
    }
}

fn check_assignment(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let aug = toy_augmented(&ds);
    let mut s = sampler(&ds, toy_state(), aug.clone(), 502);
    let n = 40_000;
    let mut typed = [0usize; 2];
    let mut untyped = [0usize; 4];
    for _ in 0..n {
        s.step_subevent_assignment().unwrap();
        let a = s.augmented();
        assert_eq!(a.y[0], 0, "known type must be kept");
        typed[a.kappa[0]] += 1;
        untyped[a.y[UNTYPED_ROW] * 2 + a.kappa[UNTYPED_ROW]] += 1;
        assert_eq!(a.m.iter().sum::<usize>(), ds.len());
    }
    let rates = |i: usize| &aug.lambda[i * 4..(i + 1) * 4];
    let r0 = rates(0);
    for (k, &count) in typed.iter().enumerate() {
        let p = r0[k] / (r0[0] + r0[1]);
        let f = count as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        checks.push(Check::new(
            format!("step 1: sub-event {k} of a typed row"),
            (f - p).abs() <= 3.0 * se,
            format!("{f:.4} vs {p:.4}"),
        ));
    }
    let ru = rates(UNTYPED_ROW);
    let tot: f64 = ru.iter().sum();
    for (c, &count) in untyped.iter().enumerate() {
        let p = ru[c] / tot;
        let f = count as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        checks.push(Check::new(
            format!("step 1: cell {c} of an untyped row"),
            (f - p).abs() <= 3.0 * se,
            format!("{f:.4} vs {p:.4}"),
        ));
    }
}

fn check_time_augmentation(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let aug = toy_augmented(&ds);
    let state = toy_state();
    let mut s = sampler(&ds, state.clone(), aug.clone(), 503);
    let mut cens = Vec::new();
    let mut untimed = Vec::new();
    for _ in 0..20_000 {
        s.step_augment_time().unwrap();
        cens.push(s.augmented().t[CENSORED_ROW]);
        untimed.push(s.augmented().t[UNTIMED_ROW]);
    }
    let a = state.a;
    let total = |i: usize| aug.lambda[i * 4..(i + 1) * 4].iter().sum::<f64>();
    let (lc, lu) = (total(CENSORED_ROW), total(UNTIMED_ROW));
    let lower = 1.1_f64;
    checks.push(Check::new(
        "step 2: censored draws exceed the censoring time",
        cens.iter().all(|&t| t > lower),
        "",
    ));
    checks.push(ks_check(
        "step 2: censored row".into(),
        &cens,
        |t| 1.0 - (-lc * (t.powf(a) - lower.powf(a))).exp(),
        0.01,
    ));
    checks.push(ks_check(
        "step 2: row with missing time".into(),
        &untimed,
        |t| 1.0 - (-lu * t.powf(a)).exp(),
        0.01,
    ));
}

/// `Σ_i [ln a + (a-1) ln t_i] - Σ_{i,c} (n_ic + r_c) ln(1 + t_i^a e^{η_ic})`.
fn shape_log_density(ds: &Dataset<f64>, state: &ModelState<f64>, aug: &AugmentedState<f64>, a: f64) -> f64 {
    let mut v = 0.0;
    for (i, o) in ds.observations.iter().enumerate() {
        let lt = aug.t[i].ln();
        v += a.ln() + (a - 1.0) * lt;
        for c in 0..4 {
            let n = usize::from(aug.y[i] * 2 + aug.kappa[i] == c) as f64;
            v -= (n + state.r[c / 2][c % 2]) * softplus(a * lt + eta(state, &o.x, c));
        }
    }
    v
}

fn check_shape(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let aug = toy_augmented(&ds);
    let state = toy_state();
    let mut s = sampler(&ds, state.clone(), aug.clone(), 504);
    // the sampler's log conditional agrees with the one above up to a constant
    let (a1, a2) = (0.7, 2.1);
    let lib = s.shape_log_conditional(a2) - s.shape_log_conditional(a1);
    let own = shape_log_density(&ds, &state, &aug, a2) - shape_log_density(&ds, &state, &aug, a1);
    checks.push(Check::new(
        "step 4: log conditional of a",
        (lib - own).abs() < 1e-9 * own.abs().max(1.0),
        format!("{lib} vs {own}"),
    ));
    // one transition from exact draws preserves the law
    let grid = GridCdf::new(1e-6, 8.0, 40_000, |a| shape_log_density(&ds, &state, &aug, a));
    let mut rng = RngStream::new(505, 0);
    let mut out = Vec::new();
    for _ in 0..10_000 {
        let mut st = state.clone();
        st.a = grid.quantile(rng.random::<f64>());
        s.set_state(st).unwrap();
        s.step_sample_shape().unwrap();
        out.push(s.state().a);
    }
    checks.push(ks_check("step 4: slice transition for a".into(), &out, |x| grid.eval(x), 0.01));
}

fn check_beta(checks: &mut Vec<Check>) {
    // one risk, one atom, intercept only, so the conditional is univariate
    let rows = vec![
        (vec![], TimeStatus::Observed(0.5), EventStatus::Known(1)),
        (vec![], TimeStatus::Observed(1.2), EventStatus::Known(1)),
        (vec![], TimeStatus::Observed(0.9), EventStatus::Known(1)),
        (vec![], TimeStatus::Observed(2.0), EventStatus::Known(1)),
    ];
    let ds = Dataset::from_raw(rows, 1, vec![], true).unwrap();
    let hyper = HyperParams::new(1, 1);
    let mut state = ModelState::neutral(1, 1, 1);
    state.a = 1.4;
    state.r = vec![vec![1.6]];
    state.alpha = vec![vec![vec![0.8]]];
    let mut aug = AugmentedState::new(ds.len(), 1, 1);
    for (i, o) in ds.observations.iter().enumerate() {
        aug.t[i] = o.observed_time().unwrap();
    }
    aug.recount();
    let (a, r, alpha) = (1.4_f64, 1.6_f64, 0.8_f64);
    let ts: Vec<f64> = aug.t.clone();
    // p(β) ∝ N(0, 1/α) Π_i e^{β} (1 + t_i^a e^{β})^{-(1 + r)}
    let log_density = |b: f64| {
        -0.5 * alpha * b * b
            + ts.iter().map(|&t| b - (1.0 + r) * softplus(a * t.ln() + b)).sum::<f64>()
    };
    let grid = GridCdf::new(-12.0, 12.0, 60_000, log_density);
    let mut s = GibbsSampler::from_parts(&ds, hyper, state.clone(), aug, Pruning::Off, RngStream::new(506, 0)).unwrap();
    let mut rng = RngStream::new(507, 0);
    let mut out = Vec::new();
    for _ in 0..10_000 {
        let mut st = state.clone();
        st.beta[0][0][0] = grid.quantile(rng.random::<f64>());
        s.set_state(st).unwrap();
        s.step_sample_beta().unwrap();
        out.push(s.state().beta[0][0][0]);
    }
    checks.push(ks_check("step 5: Pólya-Gamma transition for β".into(), &out, |x| grid.eval(x), 0.01));
}

fn check_alpha(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let state = toy_state();
    let hyper = toy_hyper();
    let mut s = sampler(&ds, state.clone(), toy_augmented(&ds), 508);
    let mut v = Vec::new();
    for _ in 0..20_000 {
        s.step_sample_alpha();
        v.push(s.state().alpha[1][0][1]);
    }
    let b = state.beta[1][0][1];
    checks.push(ks_check(
        "step 6: ARD precision".into(),
        &v,
        gamma_cdf(hyper.a0 + 0.5, 1.0 / (hyper.b0 + 0.5 * b * b)),
        0.01,
    ));
}

fn check_weights(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let state = toy_state();
    let aug = toy_augmented(&ds);
    let hyper = toy_hyper();
    let k = 2.0;
    let q: Vec<f64> = (0..4)
        .map(|c| {
            ds.observations
                .iter()
                .enumerate()
                .map(|(i, o)| softplus(state.a * aug.t[i].ln() + eta(&state, &o.x, c)))
                .sum()
        })
        .collect();
    let m: Vec<f64> = aug.m.iter().map(|&v| v as f64).collect();
    let j = 1;
    let c0 = state.c0[j];
    // γ0 | m, q, c0 with the weights integrated out
    let log_density = |g: f64| {
        let mut v = (hyper.e0 - 1.0) * g.ln() - hyper.f0 * g;
        for kk in 0..2 {
            let c = j * 2 + kk;
            v += ln_gamma_oracle(m[c] + g / k) - ln_gamma_oracle(g / k) + g / k * (c0 / (c0 + q[c])).ln();
        }
        v
    };
    let grid = GridCdf::new(1e-9, 40.0, 200_000, log_density);
    let mut s = sampler(&ds, state.clone(), aug.clone(), 509);
    let mut rng = RngStream::new(510, 0);
    let mut g_out = Vec::new();
    let mut pit = Vec::new();
    for _ in 0..10_000 {
        let mut st = state.clone();
        st.gamma0[j] = grid.quantile(rng.random::<f64>());
        s.set_state(st).unwrap();
        s.step_sample_r_gamma0().unwrap();
        let g = s.state().gamma0[j];
        g_out.push(g);
        let c = j * 2;
        pit.push(gamma_cdf(m[c] + g / k, 1.0 / (c0 + q[c]))(s.state().r[j][0]));
    }
    checks.push(ks_check("step 7: concentration γ0".into(), &g_out, |x| grid.eval(x), 0.01));
    checks.push(ks_check("step 7: weight r given γ0".into(), &pit, |u| u.clamp(0.0, 1.0), 0.01));
}

fn check_c0(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let state = toy_state();
    let hyper = toy_hyper();
    let mut s = sampler(&ds, state.clone(), toy_augmented(&ds), 511);
    let mut v = Vec::new();
    for _ in 0..20_000 {
        s.step_sample_c0();
        v.push(s.state().c0[0]);
    }
    let rsum: f64 = state.r[0].iter().sum();
    checks.push(ks_check(
        "step 8: gamma-process scale c0".into(),
        &v,
        gamma_cdf(hyper.e1 + state.gamma0[0], 1.0 / (hyper.f1 + rsum)),
        0.01,
    ));
}

fn check_pruning(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let mut aug = toy_augmented(&ds);
    // empty cell (1, 0)
    for i in 0..ds.len() {
        if aug.y[i] == 1 && aug.kappa[i] == 0 {
            aug.kappa[i] = 1;
        }
    }
    aug.recount();
    for (mode, expect_dead) in [(Pruning::Off, false), (Pruning::Revivable, true), (Pruning::Permanent, true)] {
        let s = GibbsSampler::from_parts(&ds, toy_hyper(), toy_state(), aug.clone(), mode, RngStream::new(512, 0)).unwrap();
        let dead = !s.state().active[1][0];
        let zeroed = (0..ds.len()).all(|i| s.augmented().lambda[i * 4 + 2] == 0.0);
        checks.push(Check::new(
            format!("step 9: empty atom under {mode:?}"),
            dead == expect_dead && (!dead || zeroed) && s.state().active[0].iter().all(|&v| v),
            format!("inactive = {dead}"),
        ));
    }
}

fn check_sweep_invariants(checks: &mut Vec<Check>) {
    let ds = toy_dataset();
    let mut s = GibbsSampler::new(&ds, toy_hyper(), toy_state(), Pruning::Permanent, RngStream::new(513, 0)).unwrap();
    let mut ok = true;
    for _ in 0..2_000 {
        s.sweep().unwrap();
        let a = s.augmented();
        ok &= a.m.iter().sum::<usize>() == ds.len();
        ok &= s.log_joint().unwrap().is_finite();
    }
    checks.push(Check::new("every sweep: one winner per row, finite log joint", ok, ""));
}

pub fn gibbs_conditionals() -> Vec<Check> {
    let mut checks = Vec::new();
    check_rates(&mut checks);
    check_assignment(&mut checks);
    check_time_augmentation(&mut checks);
    check_shape(&mut checks);
    check_beta(&mut checks);
    check_alpha(&mut checks);
    check_weights(&mut checks);
    check_c0(&mut checks);
    check_pruning(&mut checks);
    check_sweep_invariants(&mut checks);
    checks
}

/// Successive-conditional simulation: alternate drawing data (and latent
/// rates) given the parameters with one sweep given the data. The parameter
/// marginals must stay at the prior.
pub fn geweke() -> Vec<Check> {
    const CYCLES: usize = 10_000;
    const THIN: usize = 10;
    const ALPHA: f64 = 0.005;
    let (nj, k, n) = (2, 2, 20);
    let mut hyper = HyperParams::new(nj, k);
    hyper.a0 = 5.0;
    hyper.b0 = 5.0;
    hyper.e0 = 10.0;
    hyper.f0 = 10.0;
    hyper.e1 = 10.0;
    hyper.f1 = 10.0;
    let prior_a = GammaPrior { shape: 20.0, scale: 0.05 };
    hyper.shape_prior = Some(prior_a);

    let mut rng = RngStream::new(520, 0);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, rng.random::<f64>()]).collect();
    let mut state = sample_from_prior(&hyper, 2, &mut rng).unwrap();
    let (mut a_s, mut g0_s, mut g1_s) = (Vec::new(), Vec::new(), Vec::new());
    for cycle in 0..CYCLES {
        let cells = nj * k;
        let mut aug = AugmentedState::new(n, nj, k);
        let mut rows = Vec::with_capacity(n);
        for (i, x) in xs.iter().enumerate() {
            let rates = &mut aug.lambda[i * cells..(i + 1) * cells];
            for (c, l) in rates.iter_mut().enumerate() {
                let e: f64 = x.iter().zip(&state.beta[c / k][c % k]).map(|(u, v)| u * v).sum();
                *l = sample_gamma(state.r[c / k][c % k], e.exp(), &mut rng).unwrap().max(1e-300);
            }
            let total: f64 = rates.iter().sum();
            let t = sample_weibull(state.a, total, &mut rng).unwrap().max(1e-300);
            let c = sample_categorical_linear(rates, &mut rng).unwrap();
            aug.t[i] = t;
            aug.y[i] = c / k;
            aug.kappa[i] = c % k;
            rows.push((x[1..].to_vec(), TimeStatus::Observed(t), EventStatus::Known(c / k + 1)));
        }
        let ds = Dataset::from_raw(rows, nj, vec!["x".into()], true).unwrap();
        let mut s = GibbsSampler::from_parts(&ds, hyper.clone(), state, aug, Pruning::Off, rng.substream(cycle as u64)).unwrap();
        s.sweep().unwrap();
        state = s.into_parts().0;
        if cycle % THIN == 0 {
            a_s.push(state.a);
            g0_s.push(state.gamma0[0]);
            g1_s.push(state.gamma0[1]);
        }
    }
    vec![
        ks_check("Geweke: shape a".into(), &a_s, gamma_cdf(prior_a.shape, prior_a.scale), ALPHA),
        ks_check("Geweke: γ0 of event 1".into(), &g0_s, gamma_cdf(hyper.e0, 1.0 / hyper.f0), ALPHA),
        ks_check("Geweke: γ0 of event 2".into(), &g1_s, gamma_cdf(hyper.e0, 1.0 / hyper.f0), ALPHA),
    ]
}

// ---------------------------------------------------------------------------
// Criterion 6: the series CDF against simulation.

pub fn series_oracle() -> Vec<Check> {
    const N: usize = 1_000_000;
    let mut rng = RngStream::new(601, 0);
    let mut checks = Vec::new();
    for cfg in 0..10 {
        let atoms = rng.random_range(2..=4);
        let r: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.2..3.0)).collect();
        let b: Vec<f64> = (0..atoms).map(|_| rng.random_range(-1.0f64..1.0).exp()).collect();
        let a: f64 = rng.random_range(0.5..3.0);
        let gammas: Vec<GammaOracle<f64>> = r.iter().zip(&b).map(|(&ri, &bi)| GammaOracle::new(ri, 1.0 / bi).unwrap()).collect();
        let mut ts: Vec<f64> = (0..N)
            .map(|_| {
                let total: f64 = gammas.iter().map(|g| g.sample(&mut rng)).sum();
                let e: f64 = Exp1.sample(&mut rng);
                (e / total).powf(1.0 / a)
            })
            .collect();
        ts.sort_by(f64::total_cmp);
        let m = SeriesCdfState::new(&r, &b, DEFAULT_MASS_TARGET, DEFAULT_TERM_CAP).unwrap().n_terms();
        let mut worst: f64 = 0.0;
        for p in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let q = ts[(p * N as f64) as usize];
            let f = gamma_convolution_cdf(q, a, &r, &b, DEFAULT_MASS_TARGET).unwrap();
            worst = worst.max((f - p).abs());
        }
        checks.push(Check::new(
            format!("config {cfg}: {atoms} atoms, a = {a:.2}"),
            worst < 0.005 && m <= 100,
            format!("max |F - p| = {worst:.5}, M = {m}"),
        ));
    }
    checks
}

// ---------------------------------------------------------------------------
// Criterion 7: MAP gradients.

fn map_toy() -> Dataset<f64> {
    let rows = vec![
        (vec![0.3, 1.0], TimeStatus::Observed(0.7), EventStatus::Known(1)),
        (vec![0.8, 0.0], TimeStatus::Observed(1.3), EventStatus::Known(2)),
        (vec![0.5, 1.0], TimeStatus::RightCensored(1.0), EventStatus::Missing),
        (vec![0.1, 0.0], TimeStatus::Missing, EventStatus::Known(2)),
        (vec![0.9, 1.0], TimeStatus::Observed(0.4), EventStatus::Missing),
    ];
    Dataset::from_raw(rows, 2, vec!["x1".into(), "x2".into()], true).unwrap()
}

fn rel_err(num: f64, exact: f64) -> f64 {
    (num - exact).abs() / exact.abs().max(1e-3)
}

fn check_frozen_draw_gradients(checks: &mut Vec<Check>) {
    let ds = map_toy();
    let mut config = MapConfig::<f64>::new(2, 0);
    config.prior_r = RPrior::sparse_gamma(2);
    let mut params = MapParams::<f64>::new(2, 2, 3);
    params.log_a = 0.3;
    let mut rng = RngStream::new(701, 0);
    for b in params.beta.iter_mut().flatten().flatten() {
        *b = rng.random_range(-0.8..0.8);
    }
    for l in params.log_r.iter_mut().flatten() {
        *l = rng.random_range(-0.5..0.5);
    }
    let batch: Vec<usize> = (0..ds.len()).collect();
    let draws = LambdaDraws::draw(&params, batch.len(), 10, &mut rng);
    let g = gradient(&params, &ds, &batch, &draws, &config).unwrap();
    let f = |p: &MapParams<f64>| log_posterior_with_draws(p, &ds, &batch, &draws, &config).unwrap();
    let h = 1e-5;

    // a, through its log
    let mut worst: f64 = 0.0;
    {
        let a = params.a();
        let (mut up, mut dn) = (params.clone(), params.clone());
        up.log_a = (a + h).ln();
        dn.log_a = (a - h).ln();
        worst = worst.max(rel_err((f(&up) - f(&dn)) / (2.0 * h), g.a));
    }
    for j in 0..2 {
        for kk in 0..2 {
            for v in 0..3 {
                let (mut up, mut dn) = (params.clone(), params.clone());
                up.beta[j][kk][v] += h;
                dn.beta[j][kk][v] -= h;
                worst = worst.max(rel_err((f(&up) - f(&dn)) / (2.0 * h), g.beta[j][kk][v]));
            }
        }
    }
    checks.push(Check::new(
        "(a, β) gradient vs central differences, frozen draws",
        worst < 1e-5,
        format!("max relative error {worst:.2e}"),
    ));

    // log-scale gradients are natural gradients times the variable
    let u = g.to_unconstrained(&params);
    let ok = (u.a - g.a * params.a()).abs() < 1e-12 * (1.0 + u.a.abs())
        && (0..2).all(|j| (0..2).all(|kk| (u.r[j][kk] - g.r[j][kk] * params.r(j, kk)).abs() < 1e-12 * (1.0 + u.r[j][kk].abs())));
    checks.push(Check::new("log-scale chain rule", ok, ""));
}

/// `ln ∫ p(λ̃) Gamma(λ̃; r, 1) dλ̃` by the trapezoid rule in `s = ln λ̃`.
fn log_expectation(r: f64, log_p: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi, n) = (-60.0, 8.0, 40_000);
    let hstep = (hi - lo) / n as f64;
    let terms: Vec<f64> = (0..=n)
        .map(|i| {
            let s = lo + hstep * i as f64;
            // Gamma(r, 1) density in s: exp(r s - e^s) / Γ(r)
            let w: f64 = if i == 0 || i == n { 0.5 } else { 1.0 };
            w.ln() + r * s - s.exp() - ln_gamma_oracle(r) + log_p(s.exp())
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln() + hstep.ln()
}

fn check_r_gradient(checks: &mut Vec<Check>) {
    // one risk, one atom, three rows
    let rows = vec![
        (vec![0.4], TimeStatus::Observed(0.7), EventStatus::Known(1)),
        (vec![0.9], TimeStatus::Observed(1.5), EventStatus::Known(1)),
        (vec![0.2], TimeStatus::RightCensored(1.0), EventStatus::Missing),
    ];
    let ds = Dataset::from_raw(rows, 1, vec!["x".into()], true).unwrap();
    let mut config = MapConfig::<f64>::new(1, 0);
    config.prior_r = RPrior::unit_gamma(1);
    let mut params = MapParams::<f64>::new(1, 1, 2);
    params.log_a = 1.2_f64.ln();
    params.beta[0][0] = vec![-0.3, 0.6];
    params.log_r[0][0] = 1.7_f64.ln();
    let a = params.a();

    let exact_log_post = |r: f64| {
        let mut lp = 0.0;
        for o in &ds.observations {
            let e: f64 = o.x.iter().zip(&params.beta[0][0]).map(|(u, v)| u * v).sum();
            let log_p = |lam: f64| {
                let u = lam * e.exp();
                match o.time {
                    TimeStatus::Observed(t) => a.ln() + (a - 1.0) * t.ln() + u.ln() - t.powf(a) * u,
                    TimeStatus::RightCensored(c) => -c.powf(a) * u,
                    TimeStatus::Missing => 0.0,
                }
            };
            lp += log_expectation(r, log_p);
        }
        // the unit gamma prior, Gamma(1, 1): -r
        lp - r
    };
    let r0 = params.r(0, 0);
    let h = 1e-4;
    let oracle = (exact_log_post(r0 + h) - exact_log_post(r0 - h)) / (2.0 * h);
    // closed form of the same quantity, as a check on the quadrature
    let closed: f64 = ds
        .observations
        .iter()
        .map(|o| {
            let e: f64 = o.x.iter().zip(&params.beta[0][0]).map(|(u, v)| u * v).sum();
            match o.time {
                TimeStatus::Observed(t) => 1.0 / r0 - (1.0 + t.powf(a) * e.exp()).ln(),
                TimeStatus::RightCensored(c) => -(1.0 + c.powf(a) * e.exp()).ln(),
                TimeStatus::Missing => 0.0,
            }
        })
        .sum::<f64>()
        - 1.0;
    checks.push(Check::new(
        "quadrature oracle agrees with the closed form",
        rel_err(oracle, closed) < 1e-6,
        format!("{oracle:.8} vs {closed:.8}"),
    ));

    let mut rng = RngStream::new(702, 0);
    let batch = [0usize, 1, 2];
    let reps = 100_000;
    let mut sum = 0.0;
    for _ in 0..reps {
        let draws = LambdaDraws::draw(&params, 3, config.n_mc, &mut rng);
        sum += gradient(&params, &ds, &batch, &draws, &config).unwrap().r[0][0];
    }
    let mean = sum / reps as f64;
    checks.push(Check::new(
        format!("score-function r gradient, M = {}, mean of {reps}", config.n_mc),
        rel_err(mean, oracle) < 0.05,
        format!("{mean:.5} vs {oracle:.5} (relative error {:.3})", rel_err(mean, oracle)),
    ));

    // ψ from the library's special functions is not involved in the oracle;
    // confirm the score at M = 1 is the plain score ln λ̃ - ψ(r)
    let draws = LambdaDraws::draw(&params, 3, 1, &mut rng);
    let mut one = config.clone();
    one.n_mc = 1;
    let g = gradient(&params, &ds, &batch, &draws, &one).unwrap().r[0][0];
    let plain: f64 = draws.log_lambda.iter().map(|l| l - digamma_oracle(r0)).sum::<f64>() - 1.0;
    checks.push(Check::new("M = 1 reduces to the plain score", (g - plain).abs() < 1e-9, format!("{g} vs {plain}")));
}

pub fn map_gradients() -> Vec<Check> {
    let mut checks = Vec::new();
    check_frozen_draw_gradients(&mut checks);
    check_r_gradient(&mut checks);
    checks
}

// ---------------------------------------------------------------------------
// Criterion 8: metrics against brute force and permutation nulls.

/// Random rows: mostly observed with a type, some censored, a few with a
/// missing type.
fn random_rows(n: usize, rng: &mut RngStream) -> Dataset<f64> {
    let rows = (0..n)
        .map(|_| {
            let t = (rng.random_range(1..40) as f64) / 10.0;
            let u: f64 = rng.random();
            let (time, event) = if u < 0.15 {
                (TimeStatus::RightCensored(t), EventStatus::Missing)
            } else if u < 0.2 {
                (TimeStatus::Observed(t), EventStatus::Missing)
            } else {
                (TimeStatus::Observed(t), EventStatus::Known(rng.random_range(1..=2)))
            };
            (vec![], time, event)
        })
        .collect();
    Dataset::from_raw(rows, 2, vec![], false).unwrap()
}

fn brute_brier(cif: &[f64], ds: &Dataset<f64>, j: usize, t: f64) -> Option<f64> {
    let mut terms = Vec::new();
    for (o, &p) in ds.observations.iter().zip(cif) {
        let known: Option<f64> = match (o.time, o.event) {
            (TimeStatus::Observed(ti), EventStatus::Known(y)) => Some(f64::from(ti <= t && y == j + 1)),
            (TimeStatus::Observed(ti), EventStatus::Missing) if ti > t => Some(0.0),
            (TimeStatus::RightCensored(c), _) if c >= t => Some(0.0),
            _ => None,
        };
        if let Some(ind) = known {
            terms.push((ind - p).powi(2));
        }
    }
    (!terms.is_empty()).then(|| terms.iter().sum::<f64>() / terms.len() as f64)
}

fn brute_c_index(scores: &[f64], ds: &Dataset<f64>, j: usize, t: f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    let obs = &ds.observations;
    for i in 0..obs.len() {
        for ip in 0..obs.len() {
            if i == ip {
                continue;
            }
            let TimeStatus::Observed(ti) = obs[i].time else { continue };
            if obs[i].event != EventStatus::Known(j + 1) || ti > t {
                continue;
            }
            let (tp, other_type) = match (obs[ip].time, obs[ip].event) {
                (TimeStatus::Missing, _) => continue,
                (TimeStatus::Observed(tp), EventStatus::Known(y)) => (tp, y != j + 1),
                (TimeStatus::Observed(tp), EventStatus::Missing) => (tp, false),
                (TimeStatus::RightCensored(tp), _) => (tp, false),
            };
            if ti < tp || other_type {
                den += 1.0;
                num += if scores[i] > scores[ip] {
                    1.0
                } else if scores[i] == scores[ip] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn brute_auc(p: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..p.len() {
        for k in 0..p.len() {
            if labels[i] && !labels[k] {
                den += 1.0;
                num += if p[i] > p[k] { 1.0 } else if p[i] == p[k] { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

pub fn metrics_oracles() -> Vec<Check> {
    let mut rng = RngStream::new(801, 0);
    let mut exact = true;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let ds = random_rows(50, &mut rng);
        // coarse values so that ties occur
        let pred: Vec<f64> = (0..50).map(|_| rng.random_range(0..10) as f64 / 10.0).collect();
        for j in 0..2 {
            for t in [0.5, 1.0, 2.0, 3.5] {
                let lib = brier_score(&pred, &ds, j, t).ok();
                let own = brute_brier(&pred, &ds, j, t);
                match (lib, own) {
                    (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
                    (None, None) => {}
                    _ => exact = false,
                }
                let lib = c_index(&pred, &ds, j, t).ok();
                let own = brute_c_index(&pred, &ds, j, t);
                match (lib, own) {
                    (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
                    (None, None) => {}
                    _ => exact = false,
                }
            }
        }
        let labels: Vec<bool> = (0..50).map(|_| rng.random::<bool>()).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            let auc = classification_metrics(&pred, &labels).unwrap().auc;
            worst = worst.max((auc - brute_auc(&pred, &labels)).abs());
        }
    }
    let mut checks = vec![Check::new(
        "Brier, C-index, AUC vs O(n²) enumeration on 50-row instances",
        exact && worst < 1e-12,
        format!("max difference {worst:.1e}"),
    )];

    let trials = 10_000;
    let (mut c_sum, mut c_n, mut auc_sum) = (0.0, 0, 0.0);
    for _ in 0..trials {
        let ds = random_rows(50, &mut rng);
        let scores: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        if let Ok(c) = c_index(&scores, &ds, 0, 2.0) {
            c_sum += c;
            c_n += 1;
        }
        let labels: Vec<bool> = ds.observations.iter().map(|o| o.event == EventStatus::Known(1)).collect();
        auc_sum += classification_metrics(&scores, &labels).unwrap().auc;
    }
    let c_mean = c_sum / c_n as f64;
    let auc_mean = auc_sum / trials as f64;
    checks.push(Check::new(
        "permutation null: mean C-index",
        (0.45..=0.55).contains(&c_mean),
        format!("{c_mean:.4} over {c_n} trials"),
    ));
    checks.push(Check::new(
        "permutation null: mean AUC",
        (0.45..=0.55).contains(&auc_mean),
        format!("{auc_mean:.4} over {trials} trials"),
    ));
    checks
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use wdr::data::{load_csv, CsvSchema};
use wdr::gibbs::{run_chains, McmcConfig, Pruning};
use wdr::map::{fit_map, MapConfig, Optimizer, RPrior};
use wdr::metrics::{brier_score, c_index, classification_metrics};
use wdr::predict::{event_probabilities, predict_cif, PredictionSource};
use wdr::synth::{generate, ScenarioSpec, Sidecar};
use wdr::{Dataset, HyperParams, ModelState, PosteriorDraws, RngStream};

use crate::config::{KeySpec, Settings};
use crate::error::CliError;
use crate::model_io::{read_models, write_draws, write_point, ModelHeader};

/// `<path without extension><suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.with_extension("");
    PathBuf::from(format!("{}{suffix}", stem.display()))
}

fn with_suffix(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

fn parse_bool(s: &Settings, key: &str) -> Result<bool, CliError> {
    s.get::<bool>(key)
}

fn parse_categorical(s: &Settings) -> Result<Vec<(String, String)>, CliError> {
    s.list::<String>("categorical")?
        .into_iter()
        .map(|entry| {
            entry
                .split_once(':')
                .map(|(c, b)| (c.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| CliError::Config(format!("categorical entry {entry:?} must be column:baseline")))
        })
        .collect()
}

fn grid(s: &Settings) -> Result<Vec<f64>, CliError> {
    let g: Vec<f64> = s.list("grid")?;
    if g.is_empty() {
        return Err(CliError::Config("missing required setting --grid".into()));
    }
    if g.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(CliError::Config("grid times must be finite and nonnegative".into()));
    }
    Ok(g)
}

pub const SIMULATE_KEYS: &[KeySpec] = &[
    ("scenario", Some("1")),
    ("n", Some("2000")),
    ("seed", None),
    ("out", None),
    ("censor_time", None),
];

pub fn simulate(s: &mut Settings) -> Result<(), CliError> {
    let seed: u64 = s.get("seed")?;
    let out = PathBuf::from(s.require("out")?);
    let mut spec = ScenarioSpec::by_number(s.get("scenario")?)?;
    spec.n = s.get("n")?;
    match s.get_opt::<f64>("censor_time")? {
        Some(c) => spec.censor_time = c,
        None => s.set("censor_time", spec.censor_time.to_string()),
    }
    let (data, _) = generate(&spec, &mut RngStream::new(seed, 0))?;
    data.save_csv(&out)?;
    let sidecar = Sidecar {
        seed,
        censored_fraction: data.censored_fraction(),
        scenario: spec,
    };
    std::fs::write(sibling(&out, ".truth.json"), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    s.write_snapshot(&sibling(&out, ".config.ini"))?;
    println!(
        "wrote {} rows to {} ({:.1}% censored)",
        data.len(),
        out.display(),
        100.0 * sidecar.censored_fraction
    );
    Ok(())
}

pub const FIT_KEYS: &[KeySpec] = &[
    ("data", None),
    ("out", None),
    ("seed", None),
    ("method", Some("mcmc")),
    ("n_risks", Some("2")),
    ("intercept", Some("true")),
    ("categorical", Some("")),
    ("k", Some("10")),
    ("iters", Some("20000")),
    ("burnin", Some("15000")),
    ("thin", Some("5")),
    ("chains", Some("1")),
    ("paper_scale", Some("false")),
    ("pruning", Some("permanent")),
    ("trace_beta", Some("false")),
    ("m", Some("10")),
    ("epochs", Some("40")),
    ("lr", Some("0.01")),
    ("minibatch", Some("100")),
    ("optimizer", Some("sgd")),
    ("prior_r", Some("l2")),
    ("dof", Some("3")),
];

fn training_schema(s: &Settings) -> Result<CsvSchema, CliError> {
    Ok(CsvSchema {
        n_risks: s.get("n_risks")?,
        includes_intercept: parse_bool(s, "intercept")?,
        categorical: parse_categorical(s)?,
        feature_names: None,
    })
}

pub fn fit(s: &mut Settings) -> Result<(), CliError> {
    let seed: u64 = s.get("seed")?;
    let out = s.require("out")?.to_string();
    let schema = training_schema(s)?;
    let data: Dataset = load_csv(s.require("data")?, &schema)?;
    if data.is_empty() {
        return Err(CliError::Config("training data has no rows".into()));
    }
    let k: usize = s.get("k")?;
    match s.require("method")? {
        "mcmc" => {
            if parse_bool(s, "paper_scale")? {
                let paper = McmcConfig::paper_scale(seed);
                s.set("iters", paper.n_iterations.to_string());
                s.set("burnin", paper.n_burnin.to_string());
            }
            let pruning = match s.require("pruning")? {
                "permanent" => Pruning::Permanent,
                "revivable" => Pruning::Revivable,
                "off" => Pruning::Off,
                other => return Err(CliError::Config(format!("unknown pruning mode {other:?}"))),
            };
            let config = McmcConfig {
                n_iterations: s.get("iters")?,
                n_burnin: s.get("burnin")?,
                thin: s.get("thin")?,
                seed,
                n_chains: s.get("chains")?,
                pruning,
            };
            config.validate()?;
            s.write_snapshot(&with_suffix(&out, ".config.ini"))?;
            let hyper = HyperParams::new(data.n_risks, k);
            let chains = run_chains(&config, &hyper, &data)?;
            let header = ModelHeader::new("mcmc", &data, &schema);
            let trace_beta = parse_bool(s, "trace_beta")?;
            let single = chains.len() == 1;
            for (c, draws) in chains.iter().enumerate() {
                let tag = if single { String::new() } else { format!(".chain{c}") };
                let trace = File::create(with_suffix(&out, &format!("{tag}.trace.ndjson")))?;
                draws.write_trace_ndjson(BufWriter::new(trace), trace_beta)?;
                write_draws(&with_suffix(&out, &format!("{tag}.draws.ndjson")), &header, draws.states())?;
            }
            report_mcmc(&PosteriorDraws::pool(chains));
        }
        "map" => {
            let mut config = MapConfig::new(k, seed);
            config.n_mc = s.get("m")?;
            config.n_epochs = s.get("epochs")?;
            config.learning_rate = s.get("lr")?;
            config.minibatch_size = s.get("minibatch")?;
            config.student_t_dof = s.get("dof")?;
            config.optimizer = match s.require("optimizer")? {
                "sgd" => Optimizer::Sgd,
                "adagrad" => Optimizer::Adagrad,
                other => return Err(CliError::Config(format!("unknown optimizer {other:?}"))),
            };
            config.prior_r = match s.require("prior_r")? {
                "l2" => RPrior::l2(),
                "gamma_sparse" => RPrior::sparse_gamma(k),
                "gamma_unit" => RPrior::unit_gamma(k),
                other => return Err(CliError::Config(format!("unknown r prior {other:?}"))),
            };
            config.validate()?;
            s.write_snapshot(&with_suffix(&out, ".config.ini"))?;
            let fit = fit_map(&data, &config)?;
            let header = ModelHeader::new("map", &data, &schema);
            write_point(&with_suffix(&out, ".params.json"), &header, &fit.params.to_json()?)?;
            let mut w = BufWriter::new(File::create(with_suffix(&out, ".map_trace.csv"))?);
            writeln!(w, "epoch,log_posterior")?;
            for (e, v) in fit.trace.iter().enumerate() {
                writeln!(w, "{},{v}", e + 1)?;
            }
            w.flush()?;
            println!("a = {:.4}", fit.params.a());
        }
        other => return Err(CliError::Config(format!("unknown method {other:?}; expected mcmc or map"))),
    }
    Ok(())
}

fn report_mcmc(draws: &PosteriorDraws) {
    println!("{} retained draws", draws.len());
    if let Some(a) = draws.shape_summary() {
        println!("a: mean {:.4}, 95% interval [{:.4}, {:.4}]", a.mean, a.lower, a.upper);
    }
    println!("active sub-events (occupancy majority): {:?}", draws.majority_active_counts());
    println!("active sub-events (weight share >= 0.05): {:?}", draws.weight_active_counts(0.05));
}

pub const PREDICT_KEYS: &[KeySpec] = &[
    ("data", None),
    ("model", None),
    ("out", None),
    ("grid", None),
    ("n_mc", Some("200")),
    ("seed", Some("0")),
    ("event_probability", Some("false")),
];

fn load_for_model(s: &Settings) -> Result<(ModelHeader, Vec<ModelState>, Dataset), CliError> {
    let (header, states) = read_models(&s.list::<String>("model")?)?;
    let data: Dataset = load_csv(s.require("data")?, &header.schema())?;
    if data.is_empty() {
        return Err(CliError::Config("data file has no rows".into()));
    }
    Ok((header, states, data))
}

fn source(header: &ModelHeader) -> PredictionSource {
    if header.method == "map" {
        PredictionSource::Map
    } else {
        PredictionSource::Mcmc
    }
}

pub fn predict(s: &mut Settings) -> Result<(), CliError> {
    let out = PathBuf::from(s.require("out")?);
    let n_mc: usize = s.get("n_mc")?;
    let mut rng = RngStream::new(s.get("seed")?, 0);
    let (header, states, data) = load_for_model(s)?;
    let xs: Vec<Vec<f64>> = data.observations.iter().map(|o| o.x.clone()).collect();
    if parse_bool(s, "event_probability")? {
        let mut w = BufWriter::new(File::create(&out)?);
        let cols: Vec<String> = (1..=header.n_risks).map(|j| format!("p_event{j}")).collect();
        writeln!(w, "row,{},predicted_event", cols.join(","))?;
        for (i, x) in xs.iter().enumerate() {
            let p = event_probabilities(x, &states, n_mc, &mut rng)?;
            let label = wdr::predict::classify(&p, wdr::predict::CLASSIFICATION_THRESHOLD) + 1;
            let ps: Vec<String> = p.iter().map(f64::to_string).collect();
            writeln!(w, "{i},{},{label}", ps.join(","))?;
        }
        w.flush()?;
    } else {
        let g = grid(s)?;
        let cif = predict_cif(&xs, &g, &states, n_mc, source(&header), &mut rng)?;
        cif.write_csv(BufWriter::new(File::create(&out)?))?;
    }
    s.write_snapshot(&sibling(&out, ".config.ini"))?;
    Ok(())
}

pub const EVALUATE_KEYS: &[KeySpec] = &[
    ("data", None),
    ("model", None),
    ("out", None),
    ("grid", None),
    ("n_mc", Some("200")),
    ("seed", Some("0")),
];

pub fn evaluate(s: &mut Settings) -> Result<(), CliError> {
    let out = PathBuf::from(s.require("out")?);
    let n_mc: usize = s.get("n_mc")?;
    let g = grid(s)?;
    let mut rng = RngStream::new(s.get("seed")?, 0);
    let (header, states, data) = load_for_model(s)?;
    let xs: Vec<Vec<f64>> = data.observations.iter().map(|o| o.x.clone()).collect();
    let cif = predict_cif(&xs, &g, &states, n_mc, source(&header), &mut rng)?;

    let mut w = BufWriter::new(File::create(&out)?);
    writeln!(w, "metric,event,time,value")?;
    let fmt = |r: wdr::Result<f64>| match r {
        Ok(v) => Ok(v.to_string()),
        Err(wdr::Error::UndefinedMetric(_)) => Ok("NA".to_string()),
        Err(e) => Err(e),
    };
    for j in 0..header.n_risks {
        for (gi, &t) in g.iter().enumerate() {
            let col = cif.column(j, gi);
            writeln!(w, "brier,{},{t},{}", j + 1, fmt(brier_score(&col, &data, j, t))?)?;
            writeln!(w, "c_index,{},{t},{}", j + 1, fmt(c_index(&col, &data, j, t))?)?;
        }
    }
    // event-type classification on rows with a known type
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for (o, x) in data.observations.iter().zip(&xs) {
        if let Some(y) = o.event_index() {
            let p = event_probabilities(x, &states, n_mc, &mut rng)?;
            probs.push(p);
            labels.push(y);
        }
    }
    if !labels.is_empty() {
        let correct = probs
            .iter()
            .zip(&labels)
            .filter(|(p, &y)| wdr::predict::classify(p, wdr::predict::CLASSIFICATION_THRESHOLD) == y)
            .count();
        writeln!(w, "accuracy,all,inf,{}", correct as f64 / labels.len() as f64)?;
        if header.n_risks == 2 {
            let p1: Vec<f64> = probs.iter().map(|p| p[0]).collect();
            let is1: Vec<bool> = labels.iter().map(|&y| y == 0).collect();
            let auc = classification_metrics(&p1, &is1).map(|m| m.auc);
            writeln!(w, "auc,1,inf,{}", fmt(auc)?)?;
        }
    }
    w.flush()?;
    s.write_snapshot(&sibling(&out, ".config.ini"))?;
    Ok(())
}

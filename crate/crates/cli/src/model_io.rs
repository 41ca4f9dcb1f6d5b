//! Fitted-model files.
//!
//! MCMC draws are NDJSON: a header line `{"model": ...}` followed by one model
//! state per retained draw. A MAP fit is a single JSON object with the model
//! state fields plus the same `model` header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use wdr::data::CsvSchema;
use wdr::{Dataset, ModelState};

use crate::error::CliError;

/// What a model needs to read new data the way it was trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub method: String,
    pub n_risks: usize,
    pub includes_intercept: bool,
    /// Raw feature names (without the intercept), in model order.
    pub feature_names: Vec<String>,
    pub categorical: Vec<(String, String)>,
}

impl ModelHeader {
    pub fn new(method: &str, data: &Dataset, schema: &CsvSchema) -> Self {
        Self {
            method: method.to_string(),
            n_risks: data.n_risks,
            includes_intercept: data.includes_intercept,
            feature_names: data.raw_feature_names().to_vec(),
            categorical: schema.categorical.clone(),
        }
    }

    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            n_risks: self.n_risks,
            includes_intercept: self.includes_intercept,
            categorical: self.categorical.clone(),
            feature_names: Some(self.feature_names.clone()),
        }
    }

    fn dim(&self) -> usize {
        self.feature_names.len() + usize::from(self.includes_intercept)
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    model: ModelHeader,
}

pub fn write_draws<'a>(
    path: &Path,
    header: &ModelHeader,
    states: impl Iterator<Item = &'a ModelState>,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &HeaderLine { model: header.clone() })?;
    writeln!(w)?;
    for s in states {
        serde_json::to_writer(&mut w, s)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_point(path: &Path, header: &ModelHeader, params_json: &str) -> Result<(), CliError> {
    let mut value: serde_json::Value = serde_json::from_str(params_json)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("model".into(), serde_json::to_value(header)?);
    }
    std::fs::write(path, serde_json::to_string_pretty(&value)? + "\n")?;
    Ok(())
}

fn is_ndjson(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "ndjson")
}

/// Reads one model file: its header and the parameter states it holds.
pub fn read_model(path: &Path) -> Result<(ModelHeader, Vec<ModelState>), CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open model file {}: {e}", path.display())))?;
    let bad = |msg: &str| CliError::Config(format!("{}: {msg}", path.display()));
    if is_ndjson(path) {
        let mut lines = BufReader::new(file).lines();
        let first = lines.next().ok_or_else(|| bad("empty model file"))??;
        let header: HeaderLine = serde_json::from_str(&first).map_err(|_| bad("missing model header line"))?;
        let mut states = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            states.push(ModelState::from_json(&line)?);
        }
        if states.is_empty() {
            return Err(bad("no draws"));
        }
        check_dims(&header.model, &states).map_err(|m| bad(&m))?;
        Ok((header.model, states))
    } else {
        let text = std::io::read_to_string(file)?;
        let header: HeaderLine = serde_json::from_str(&text).map_err(|_| bad("missing model header"))?;
        let state = ModelState::from_json(&text)?;
        let states = vec![state];
        check_dims(&header.model, &states).map_err(|m| bad(&m))?;
        Ok((header.model, states))
    }
}

fn check_dims(header: &ModelHeader, states: &[ModelState]) -> Result<(), String> {
    for s in states {
        if s.dim() != header.dim() || s.n_risks() != header.n_risks {
            return Err("parameter shapes do not match the header".into());
        }
    }
    Ok(())
}

/// Reads and pools several model files, which must share a header.
pub fn read_models(paths: &[String]) -> Result<(ModelHeader, Vec<ModelState>), CliError> {
    let mut header: Option<ModelHeader> = None;
    let mut all = Vec::new();
    for p in paths {
        let (h, states) = read_model(Path::new(p))?;
        match &header {
            Some(prev) if prev.feature_names != h.feature_names || prev.n_risks != h.n_risks => {
                return Err(CliError::Config(format!("{p}: model files disagree on features")));
            }
            None => header = Some(h),
            _ => {}
        }
        all.extend(states);
    }
    let header = header.ok_or_else(|| CliError::Config("missing required setting --model".into()))?;
    Ok((header, all))
}

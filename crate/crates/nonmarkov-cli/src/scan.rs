//! Parameter scans over one or two axes.
//!
//! Points are evaluated in parallel chunk by chunk; each chunk is written in
//! index order and flushed before the next one starts, so the file is always
//! a prefix of the final output and its bytes do not depend on the thread
//! count. A rerun with the same config keeps the complete rows already on
//! disk and continues after them.

use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use nonmarkov::dynamics::OpenSystem;
use nonmarkov::Error;

use crate::commands::{analyze, bond, build_model, steady_fields, Failure, IoContext, Outputs, STEADY_COLUMNS};
use crate::config::{axis_values, Config, ModelConfig, SchemaError};
use crate::output::{config_hash, num, previous_hash, Manifest};

const CHUNK: usize = 64;

/// Sets a named scan parameter on a copy of the model.
pub fn with_parameter(model: &ModelConfig, name: &str, v: f64) -> Result<ModelConfig, String> {
    let mut m = model.clone();
    let ok = match &mut m {
        ModelConfig::TightBinding(tb) => match name {
            "bias" => {
                tb.left.mu = v / 2.0;
                tb.right.mu = -v / 2.0;
                true
            }
            "mu_left" => {
                tb.left.mu = v;
                true
            }
            "mu_right" => {
                tb.right.mu = v;
                true
            }
            "temperature" => {
                tb.left.temperature.0 = v;
                tb.right.temperature.0 = v;
                true
            }
            "temperature_left" => {
                tb.left.temperature.0 = v;
                true
            }
            "temperature_right" => {
                tb.right.temperature.0 = v;
                true
            }
            "gamma" => {
                tb.gamma_left = v;
                tb.gamma_right = v;
                true
            }
            "gamma_left" => {
                tb.gamma_left = v;
                true
            }
            "gamma_right" => {
                tb.gamma_right = v;
                true
            }
            _ => false,
        },
        ModelConfig::Xy(xy) => match name {
            "field" => {
                xy.field = v;
                true
            }
            "delta_h" => {
                xy.delta_h = v;
                true
            }
            "anisotropy" => {
                xy.anisotropy = v;
                true
            }
            "coupling" => {
                xy.coupling = v;
                true
            }
            "temperature" => {
                xy.temperature_left.0 = v;
                xy.temperature_right.0 = v;
                true
            }
            "gamma" => {
                xy.gamma_left = v;
                xy.gamma_right = v;
                true
            }
            "gamma_left" => {
                xy.gamma_left = v;
                true
            }
            "gamma_right" => {
                xy.gamma_right = v;
                true
            }
            _ => false,
        },
        ModelConfig::Matrices(_) => false,
    };
    if ok {
        Ok(m)
    } else {
        let kind = match model {
            ModelConfig::TightBinding(_) => "tight_binding",
            ModelConfig::Xy(_) => "xy",
            ModelConfig::Matrices(_) => "matrices",
        };
        Err(format!("unknown scan parameter `{name}` for model kind `{kind}`"))
    }
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::Reservoir { source, .. } => status_of(source),
        Error::NoSteadyState { .. } => "no_steady_state",
        Error::IllConditionedSteadyState { .. } => "ill_conditioned",
        Error::Residual { .. } => "residual",
        Error::InvariantViolation { .. } => "invariant_violation",
        Error::Defective { .. } => "defective",
        e if e.is_input() => "invalid_input",
        _ => "numerical_failure",
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["index", "x", "y", "status"].iter().map(|s| s.to_string()).collect();
    h.extend(STEADY_COLUMNS.iter().map(|s| s.to_string()));
    h
}

fn evaluate(cfg: &Config, bond: Option<usize>, index: usize, x: f64, y: Option<f64>, x_name: &str, y_name: Option<&str>) -> String {
    let mut fields = vec![index.to_string(), num(x), y.map(num).unwrap_or_default()];
    let result = (|| -> Result<Vec<String>, Error> {
        let mut model = with_parameter(&cfg.model, x_name, x).map_err(Error::InvalidParameter)?;
        if let (Some(name), Some(v)) = (y_name, y) {
            model = with_parameter(&model, name, v).map_err(Error::InvalidParameter)?;
        }
        let built = build_model(&model).map_err(|f| match f {
            Failure::Schema(e) => Error::InvalidParameter(e.to_string()),
            Failure::Numerical { error, .. } => error,
            Failure::Io(p, e) => Error::InvalidParameter(format!("{}: {e}", p.display())),
        })?;
        let system = OpenSystem::new(built)?;
        Ok(steady_fields(&analyze(&model, &system, cfg, bond)?))
    })();
    match result {
        Ok(values) => {
            fields.push("ok".into());
            fields.extend(values);
        }
        Err(e) => {
            fields.push(status_of(&e).into());
            fields.extend(std::iter::repeat(String::new()).take(STEADY_COLUMNS.len()));
        }
    }
    fields.join(",")
}

/// Number of complete rows already on disk and the byte length they span.
/// Only an exact prefix `0, 1, 2, …` with the right header is accepted.
fn resume_point(path: &Path, header: &str) -> (usize, u64) {
    let Ok(text) = std::fs::read_to_string(path) else {
        return (0, 0);
    };
    let first = format!("{header}\n");
    if !text.starts_with(&first) {
        return (0, 0);
    }
    let columns = header.split(',').count();
    let mut done = 0usize;
    let mut len = first.len();
    let mut rest = &text[first.len()..];
    while let Some(pos) = rest.find('\n') {
        let line = &rest[..pos];
        let ok = line.split(',').count() == columns && line.split(',').next() == Some(done.to_string().as_str());
        if !ok {
            break;
        }
        done += 1;
        len += pos + 1;
        rest = &rest[pos + 1..];
    }
    (done, len as u64)
}

pub fn scan(cfg: &Config, out: &Path) -> Result<Outputs, Failure> {
    let Some(sc) = &cfg.scan else {
        return Err(SchemaError::new("scan", "the scan command needs a `scan` section").into());
    };
    let xs = axis_values("scan.x", &sc.x)?;
    let ys: Vec<Option<f64>> = match &sc.y {
        Some(a) => axis_values("scan.y", a)?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    with_parameter(&cfg.model, &sc.x.parameter, xs[0]).map_err(|m| SchemaError::new("scan.x.parameter", m))?;
    if let Some(a) = &sc.y {
        with_parameter(&cfg.model, &a.parameter, xs[0]).map_err(|m| SchemaError::new("scan.y.parameter", m))?;
    }
    let b = bond(cfg)?;
    let points: Vec<(usize, f64, Option<f64>)> =
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).enumerate().map(|(i, (x, y))| (i, x, y)).collect();

    let path = out.join("scan.csv");
    let head = header().join(",");
    let same_config = previous_hash(out).as_deref() == Some(config_hash(cfg).as_str());
    let (done, len) = if same_config { resume_point(&path, &head) } else { (0, 0) };
    Manifest::new("scan", cfg, "running").write(out).at(&out.join("manifest.json"))?;
    let file = if done == 0 {
        let mut f = std::fs::File::create(&path).at(&path)?;
        writeln!(f, "{head}").at(&path)?;
        f
    } else {
        eprintln!("resuming scan after {done} of {} points", points.len());
        let f = OpenOptions::new().write(true).open(&path).at(&path)?;
        f.set_len(len).at(&path)?;
        let mut f = OpenOptions::new().append(true).open(&path).at(&path)?;
        f.flush().at(&path)?;
        f
    };
    let mut w = BufWriter::new(file);
    let x_name = sc.x.parameter.as_str();
    let y_name = sc.y.as_ref().map(|a| a.parameter.as_str());
    for chunk in points[done.min(points.len())..].chunks(CHUNK) {
        let rows: Vec<String> = chunk.par_iter().map(|&(i, x, y)| evaluate(cfg, b, i, x, y, x_name, y_name)).collect();
        for r in rows {
            writeln!(w, "{r}").at(&path)?;
        }
        w.flush().at(&path)?;
    }
    drop(w);

    let text = std::fs::read_to_string(&path).at(&path)?;
    let mut ok = 0usize;
    let mut failed = 0usize;
    let mut max_residual = 0.0f64;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[3] == "ok" {
            ok += 1;
            if let Ok(r) = f[9].parse::<f64>() {
                max_residual = max_residual.max(r);
            }
        } else {
            failed += 1;
        }
    }
    Ok(Outputs {
        files: vec![path],
        invariants: json!({ "points": points.len(), "ok": ok, "failed": failed, "max_residual": max_residual }),
    })
}

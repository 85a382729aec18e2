//! Writing results, with a guard against non-finite numbers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use ftrl_exploit::{Error, Result};

/// Keys whose value may legitimately be absent.
const OPTIONAL_KEYS: &[&str] = &[
    "vag",
    "lag_discrete",
    "lag_continuous",
    "saturation_time",
    "surplus",
    "bound",
    "met",
    "delta_min",
    "delta_max",
    "score",
];

/// Fails on any number serde turned into `null` (NaN or infinity).
pub fn check_json(v: &Value, key: &str) -> Result<()> {
    match v {
        Value::Null if !OPTIONAL_KEYS.contains(&key) => {
            Err(Error::Domain(format!("non-finite value in output field `{key}`")))
        }
        Value::Array(items) => items.iter().try_for_each(|x| check_json(x, key)),
        Value::Object(map) => map.iter().try_for_each(|(k, x)| check_json(x, k)),
        _ => Ok(()),
    }
}

pub fn check_csv(text: &str) -> Result<()> {
    for (line_no, line) in text.lines().enumerate() {
        for field in line.split(',') {
            if let Ok(x) = field.parse::<f64>() {
                if !x.is_finite() {
                    return Err(Error::Domain(format!("non-finite value `{field}` on CSV line {}", line_no + 1)));
                }
            }
        }
    }
    Ok(())
}

pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let v = serde_json::to_value(value)?;
    check_json(&v, "")?;
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, &v)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Renders CSV through `render`, checks it and writes it out.
pub fn emit_csv(path: Option<&Path>, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    let text = String::from_utf8(buf).map_err(|e| Error::Domain(e.to_string()))?;
    check_csv(&text)?;
    let mut out = sink(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

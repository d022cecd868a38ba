//! Flat `key = value` run files and SNR grid parsing.

use std::collections::BTreeMap;
use std::path::Path;

use istbc::{Error, Result};

/// Parses `start:step:stop` (inclusive), a single value, or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("bad number {t:?} in SNR grid {s:?}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(Error::InvalidParameter(format!(
                    "SNR grid {s:?} needs a positive step and stop >= start"
                )));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 10_000 {
                return Err(Error::InvalidParameter(format!("SNR grid {s:?} has too many points")));
            }
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        [single] => single.split(',').map(num).collect(),
        _ => Err(Error::InvalidParameter(format!(
            "SNR grid {s:?} must be start:step:stop or a comma list"
        ))),
    }
}

/// Reads a run file. Blank lines and lines starting with `#` are ignored.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidParameter(format!(
                "line {}: expected key = value, got {line:?}",
                i + 1
            )));
        };
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "line {}: unknown key {key:?} (known: {})",
                i + 1,
                KNOWN_KEYS.join(", ")
            )));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub const KNOWN_KEYS: &[&str] = &[
    "design",
    "n",
    "m",
    "snr_db",
    "axis",
    "decoder",
    "encoder",
    "seed",
    "max_trials",
    "target_errors",
    "confidence",
];

//! Text spectrum files and canonical JSON reports.
//!
//! Spectrum file, version 1:
//!
//! ```text
//! #schmidt-spectrum 1
//! #family tmss
//! #q 0.5
//! -1.2493873660829995e-1
//! -7.2699872793626159e-1
//! ```
//!
//! The header line is mandatory, `#key value` metadata lines follow, then one
//! `log10 λ_n` per line. The tail mass is stored as `tail_bound` (linear) and
//! `log10_tail_bound` (lossless, `-inf` for exact states); the latter wins
//! when both are present.

use std::f64::consts::LN_10;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::spectrum::{Metadata, SchmidtSpectrum, SpectrumError};

pub const HEADER: &str = "#schmidt-spectrum 1";
const TAIL_KEY: &str = "tail_bound";
const LOG10_TAIL_KEY: &str = "log10_tail_bound";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid spectrum: {0}")]
    Validation(#[from] SpectrumError),
}

/// Formats a float with 17 significant digits; negative zero prints as zero.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        format!("{:.16e}", 0.0)
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn spectrum_to_string<T: Scalar>(s: &SchmidtSpectrum<T>) -> String {
    let mut meta: Metadata = s.metadata().clone();
    let log_tail = s.log_tail().to_f64().unwrap_or(f64::NAN);
    meta.insert(TAIL_KEY.into(), format_float(log_tail.exp()));
    meta.insert(LOG10_TAIL_KEY.into(), format_float(log_tail / LN_10));

    let mut out = String::with_capacity(24 * (s.len() + meta.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for (k, v) in &meta {
        let _ = writeln!(out, "#{k} {v}");
    }
    for &w in s.log_weights() {
        out.push_str(&format_float(w.to_f64().unwrap_or(f64::NAN) / LN_10));
        out.push('\n');
    }
    out
}

pub fn parse_spectrum<T: Scalar>(text: &str) -> Result<SchmidtSpectrum<T>, IoError> {
    let parse_err = |line: usize, message: String| IoError::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((_, other)) => {
            return Err(parse_err(
                1,
                format!("expected '{HEADER}', found '{other}'"),
            ));
        }
        None => return Err(parse_err(1, "empty file".into())),
    }

    let mut meta = Metadata::new();
    let mut meta_lines = std::collections::BTreeMap::new();
    let mut logs = Vec::new();
    for (line, content) in lines {
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('#') {
            if !logs.is_empty() {
                return Err(parse_err(line, "metadata after weights".into()));
            }
            let (key, value) = rest
                .split_once(char::is_whitespace)
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .ok_or_else(|| parse_err(line, format!("malformed metadata '{content}'")))?;
            meta.insert(key.to_string(), value.to_string());
            meta_lines.insert(key.to_string(), line);
            continue;
        }
        let v: f64 = content
            .parse()
            .map_err(|_| parse_err(line, format!("invalid number '{content}'")))?;
        logs.push(T::lit(v * LN_10));
    }

    let parse_meta = |key: &str| -> Result<Option<f64>, IoError> {
        meta.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(meta_lines[key], format!("invalid {key} '{v}'")))
            })
            .transpose()
    };
    let log_tail = match (parse_meta(LOG10_TAIL_KEY)?, parse_meta(TAIL_KEY)?) {
        (Some(l10), _) => l10 * LN_10,
        (None, Some(t)) if t >= 0.0 => t.ln(),
        (None, Some(t)) => return Err(SpectrumError::InvalidTail(format!("tail_bound {t}")).into()),
        (None, None) => f64::NEG_INFINITY,
    };
    meta.remove(TAIL_KEY);
    meta.remove(LOG10_TAIL_KEY);
    Ok(SchmidtSpectrum::from_log_weights(
        logs,
        T::lit(log_tail),
        meta,
    )?)
}

pub fn write_spectrum<T: Scalar>(s: &SchmidtSpectrum<T>, path: &Path) -> Result<(), IoError> {
    fs::write(path, spectrum_to_string(s)).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_spectrum<T: Scalar>(path: &Path) -> Result<SchmidtSpectrum<T>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spectrum(&text)
}

/// Serializes with sorted keys, two-space indentation, every float in
/// 17-significant-digit exponent form and a trailing newline. Non-finite
/// floats become `null`.
pub fn to_canonical_json<S: Serialize>(value: &S) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |out: &mut String, d: usize| {
        for _ in 0..d {
            out.push_str("  ");
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(item, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*k], depth + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{psi, tmss, OffsetSearch};

    #[test]
    fn round_trip_geometric() {
        let s = tmss(0.5, 100).unwrap();
        let text = spectrum_to_string(&s);
        assert!(text.starts_with("#schmidt-spectrum 1\n#delta "));
        let back: SchmidtSpectrum<f64> = parse_spectrum(&text).unwrap();
        assert_eq!(back.metadata(), s.metadata());
        assert_eq!(spectrum_to_string(&back), text);
        for (a, b) in back.log_weights().iter().zip(s.log_weights()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        }
    }

    #[test]
    fn round_trip_keeps_tiny_tail() {
        let s = psi(2, 1e6, 50, &OffsetSearch::default()).unwrap();
        let back: SchmidtSpectrum<f64> = parse_spectrum(&spectrum_to_string(&s)).unwrap();
        assert!(back.log_tail() < -4.9e7);
        assert!((back.log_tail() - s.log_tail()).abs() < 1e-6);
        let exact: SchmidtSpectrum<f64> = SchmidtSpectrum::build(&[0.5, 0.5], true).unwrap();
        let text = spectrum_to_string(&exact);
        assert!(text.contains("#log10_tail_bound -inf\n#tail_bound 0.0000000000000000e0\n"));
        assert!(parse_spectrum::<f64>(&text).unwrap().is_exact());
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_spectrum::<f64>("-0.3\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
        let err =
            parse_spectrum::<f64>("#schmidt-spectrum 1\n#family x\n-0.30103\nabc\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 4, .. }));
        let err =
            parse_spectrum::<f64>("#schmidt-spectrum 1\n#q 1\n#tail_bound x\n0\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 3, .. }));
        let err = parse_spectrum::<f64>("#schmidt-spectrum 1\n-0.1\n").unwrap_err();
        assert!(matches!(
            err,
            IoError::Validation(SpectrumError::NotNormalized { .. })
        ));
    }

    #[test]
    fn accepts_long_literals_and_linear_tail() {
        let text = "#schmidt-spectrum 1\n#tail_bound 0.5\n-0.301029995663981195213738894\n";
        let s: SchmidtSpectrum<f64> = parse_spectrum(text).unwrap();
        assert!((s.weight(0) - 0.5).abs() < 1e-15);
        assert!((s.tail_bound() - 0.5).abs() < 1e-15);
        assert!(s.metadata().is_empty());
    }

    #[test]
    fn canonical_json_layout() {
        #[derive(Serialize)]
        struct R {
            zeta: f64,
            alpha: Vec<u32>,
            band: Vec<f64>,
            name: &'static str,
            nothing: Option<f64>,
        }
        let text = to_canonical_json(&R {
            zeta: 1.0 / 3.0,
            alpha: vec![2, 1],
            band: vec![],
            name: "a\"b",
            nothing: None,
        })
        .unwrap();
        let expected = "{\n  \"alpha\": [\n    2,\n    1\n  ],\n  \"band\": [],\n  \"name\": \"a\\\"b\",\n  \"nothing\": null,\n  \"zeta\": 3.3333333333333331e-1\n}\n";
        assert_eq!(text, expected);
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["zeta"].as_f64().unwrap(), 1.0 / 3.0);
    }
}

//! Text formats: network specifications as JSON and correlation curves as
//! CSV.
//!
//! A curve file holds one or more blocks of the form
//!
//! ```text
//! kind,concentration,bin_width
//! intensity,100,0.001
//! abscissa,value
//! 0.001,1
//! 0.002,0.93
//! ```
//!
//! `bin_width` is left empty for turnover curves. Lines starting with `#`
//! are comments.

use std::fmt::Write as _;

use crate::continuum::CorrelationCurve;
use crate::correlation::MixtureKind;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;

/// Parses a network specification, reporting the line and column of
/// syntax errors.
pub fn parse_network_spec(text: &str) -> Result<NetworkSpec> {
    serde_json::from_str(text).map_err(|e| {
        if e.is_data() && e.line() == 0 {
            Error::Parse(e.to_string())
        } else {
            Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
        }
    })
}

pub fn network_spec_to_json(spec: &NetworkSpec) -> String {
    serde_json::to_string_pretty(spec).expect("specs always serialize")
}

fn parse_error(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn parse_number(line: u64, field: &str, what: &str) -> Result<f64> {
    let x: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(line, format!("{what} '{field}' is not a number")))?;
    if !x.is_finite() {
        return Err(parse_error(line, format!("{what} must be finite")));
    }
    Ok(x)
}

struct Block {
    line: u64,
    kind: MixtureKind,
    concentration: f64,
    bin_width: Option<f64>,
    abscissa: Vec<f64>,
    values: Vec<f64>,
    data_header_seen: bool,
}

impl Block {
    fn finish(self) -> Result<CorrelationCurve> {
        if !self.data_header_seen {
            return Err(parse_error(self.line, "curve block has no 'abscissa,value' header"));
        }
        let curve = CorrelationCurve {
            kind: self.kind,
            concentration: self.concentration,
            abscissa: self.abscissa,
            values: self.values,
            bin_width: self.bin_width,
        };
        curve
            .validate()
            .map_err(|e| parse_error(self.line, format!("invalid curve: {e}")))?;
        Ok(curve)
    }
}

/// Parses every curve block in a CSV document.
pub fn parse_curves(text: &str) -> Result<Vec<CorrelationCurve>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut curves = Vec::new();
    let mut block: Option<Block> = None;
    let mut expect_meta: Option<u64> = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(line, e)
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let first = rec.get(0).unwrap_or("");
        if let Some(header_line) = expect_meta.take() {
            if rec.len() != 3 {
                return Err(parse_error(line, "expected 'kind,concentration,bin_width' values"));
            }
            let kind = match first {
                "turnover" => MixtureKind::Turnover,
                "intensity" => MixtureKind::Intensity,
                other => return Err(parse_error(line, format!("unknown curve kind '{other}'"))),
            };
            let concentration = parse_number(line, &rec[1], "concentration")?;
            let bin_width = if rec[2].is_empty() {
                None
            } else {
                Some(parse_number(line, &rec[2], "bin_width")?)
            };
            block = Some(Block {
                line: header_line,
                kind,
                concentration,
                bin_width,
                abscissa: vec![],
                values: vec![],
                data_header_seen: false,
            });
            continue;
        }
        if first == "kind" {
            if rec.len() != 3 || &rec[1] != "concentration" || &rec[2] != "bin_width" {
                return Err(parse_error(line, "expected header 'kind,concentration,bin_width'"));
            }
            if let Some(b) = block.take() {
                curves.push(b.finish()?);
            }
            expect_meta = Some(line);
            continue;
        }
        let Some(b) = block.as_mut() else {
            return Err(parse_error(line, "expected header 'kind,concentration,bin_width'"));
        };
        if first == "abscissa" {
            if rec.len() != 2 || &rec[1] != "value" || b.data_header_seen {
                return Err(parse_error(line, "expected a single header 'abscissa,value'"));
            }
            b.data_header_seen = true;
            continue;
        }
        if !b.data_header_seen {
            return Err(parse_error(line, "data row before the 'abscissa,value' header"));
        }
        if rec.len() != 2 {
            return Err(parse_error(line, format!("expected 2 fields, found {}", rec.len())));
        }
        b.abscissa.push(parse_number(line, &rec[0], "abscissa")?);
        b.values.push(parse_number(line, &rec[1], "value")?);
    }
    if let Some(line) = expect_meta {
        return Err(parse_error(line, "curve header without values"));
    }
    if let Some(b) = block {
        curves.push(b.finish()?);
    }
    if curves.is_empty() {
        return Err(Error::Parse("no curves found".into()));
    }
    Ok(curves)
}

/// Writes curves in the format read by [`parse_curves`].
pub fn curves_to_csv(curves: &[CorrelationCurve]) -> String {
    let mut out = String::new();
    for c in curves {
        let kind = match c.kind {
            MixtureKind::Turnover => "turnover",
            MixtureKind::Intensity => "intensity",
        };
        let bw = c.bin_width.map(|b| format!("{b:e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "kind,concentration,bin_width\n{kind},{:e},{bw}\nabscissa,value",
            c.concentration
        );
        for (x, y) in c.abscissa.iter().zip(&c.values) {
            let _ = writeln!(out, "{x:e},{y:e}");
        }
    }
    out
}

//! Readers and writers for the CSV, JSON and SVG artifacts.
//!
//! Floats are rounded to 12 decimal places and printed in shortest
//! round-trip form, with negative zero written as `0`, so exports stay
//! byte-stable across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::contour::FamilyContour;
use crate::ipa::Phoneme;
use crate::projection::Projection;
use crate::selection::SelectionResult;
use crate::stats::{GlobalVocabulary, PhonemeDistribution, SimilarityMatrix, StatsError};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Matrix(#[from] StatsError),
}

/// Rounds to 12 decimals and formats without a trailing `.0` noise.
pub fn fmt_f64(x: f64) -> String {
    format!("{}", round12(x))
}

pub fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r = (x * 1e12).round() / 1e12;
    let r = if r.is_finite() { r } else { x };
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn write_distributions(
    out: impl Write,
    vocab: &GlobalVocabulary,
    dists: &[PhonemeDistribution],
) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["lang".to_string()];
    header.extend(vocab.phonemes().iter().map(|p| p.as_str().to_string()));
    w.write_record(&header)?;
    for d in dists {
        let mut row = vec![d.language_code.clone()];
        row.extend(d.probabilities.iter().map(|&p| fmt_f64(p)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix(out: impl Write, m: &SimilarityMatrix) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["lang".to_string()];
    header.extend(m.codes().iter().cloned());
    w.write_record(&header)?;
    for (code, row) in m.codes().iter().zip(m.values()) {
        let mut rec = vec![code.clone()];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A labelled numeric table: first column ids, header row column names.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRows {
    pub columns: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_labeled_rows(input: impl Read) -> Result<LabeledRows, ExportError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let columns: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        ids.push(rec.get(0).unwrap_or("").to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().map_err(|_| ExportError::Format {
                    line,
                    message: format!("'{v}' is not a number"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(LabeledRows { columns, ids, rows })
}

pub fn read_matrix(input: impl Read) -> Result<SimilarityMatrix, ExportError> {
    let t = read_labeled_rows(input)?;
    if t.columns != t.ids {
        return Err(ExportError::Format {
            line: 1,
            message: "matrix header and row labels differ".into(),
        });
    }
    Ok(SimilarityMatrix::from_values(t.ids, t.rows)?)
}

/// Writes `id,x,y,ev1,ev2`, plus a trailing `family` column when given.
pub fn write_coords(
    out: impl Write,
    p: &Projection,
    families: Option<&BTreeMap<String, String>>,
) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id", "x", "y", "ev1", "ev2"];
    if families.is_some() {
        header.push("family");
    }
    w.write_record(&header)?;
    let ev = |k: usize| fmt_f64(p.explained_variance.get(k).copied().unwrap_or(0.0));
    for (id, (x, y)) in p.ids.iter().zip(p.xy()) {
        let mut rec = vec![id.clone(), fmt_f64(x), fmt_f64(y), ev(0), ev(1)];
        if let Some(f) = families {
            rec.push(f.get(id).cloned().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordRow {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

pub fn read_coords(input: impl Read) -> Result<Vec<CoordRow>, ExportError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(ci), Some(cx), Some(cy)) = (col("id"), col("x"), col("y")) else {
        return Err(ExportError::Format {
            line: 1,
            message: "coordinates need id, x and y columns".into(),
        });
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| {
            let v = rec.get(i).unwrap_or("");
            v.parse::<f64>().map_err(|_| ExportError::Format {
                line,
                message: format!("'{v}' is not a number"),
            })
        };
        out.push(CoordRow {
            id: rec.get(ci).unwrap_or("").to_string(),
            x: num(cx)?,
            y: num(cy)?,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct ContourJson<'a> {
    family: &'a str,
    level: f64,
    members: &'a [String],
    h_x: f64,
    h_y: f64,
    below_level: bool,
    polylines: Vec<PolylineJson>,
}

#[derive(Serialize)]
struct PolylineJson {
    closed: bool,
    points: Vec<[f64; 2]>,
}

pub fn contours_json(families: &[FamilyContour]) -> Result<String, ExportError> {
    let objs: Vec<ContourJson> = families
        .iter()
        .map(|f| ContourJson {
            family: &f.contours.family,
            level: round12(f.contours.level),
            members: &f.members,
            h_x: round12(f.h_x),
            h_y: round12(f.h_y),
            below_level: f.contours.below_level,
            polylines: f
                .contours
                .polylines
                .iter()
                .map(|p| PolylineJson {
                    closed: p.closed,
                    points: p
                        .points
                        .iter()
                        .map(|&(x, y)| [round12(x), round12(y)])
                        .collect(),
                })
                .collect(),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&objs)?;
    s.push('\n');
    Ok(s)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Plots language points colored by family with their contours overlaid.
pub fn contours_svg(points: &[(String, String, f64, f64)], families: &[FamilyContour]) -> String {
    let mut xs: Vec<f64> = points.iter().map(|p| p.2).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.3).collect();
    for f in families {
        for pl in &f.contours.polylines {
            xs.extend(pl.points.iter().map(|p| p.0));
            ys.extend(pl.points.iter().map(|p| p.1));
        }
    }
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else {
            (-1.0, 1.0)
        }
    };
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let (size, margin) = (600.0, 40.0);
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (size - 2.0 * margin);
    let sy = |y: f64| size - margin - (y - y0) / (y1 - y0) * (size - 2.0 * margin);

    let mut family_names: Vec<&str> = points.iter().map(|p| p.1.as_str()).collect();
    family_names.extend(families.iter().map(|f| f.contours.family.as_str()));
    family_names.sort_unstable();
    family_names.dedup();
    let color = |fam: &str| {
        let i = family_names.iter().position(|f| *f == fam).unwrap_or(0);
        PALETTE[i % PALETTE.len()]
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for f in families {
        for pl in &f.contours.polylines {
            let pts: Vec<String> = pl
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                color(&f.contours.family),
                pts.join(" ")
            );
        }
    }
    for (id, fam, x, y) in points {
        let (px, py) = (sx(*x), sy(*y));
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="{}"><title>{} ({})</title></circle>"#,
            color(fam),
            xml_escape(id),
            xml_escape(fam)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">{}</text>"#,
            px + 6.0,
            py - 6.0,
            xml_escape(id)
        );
    }
    for (i, fam) in family_names.iter().enumerate() {
        let y = 20.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="10" y="{y:.0}" font-size="12" font-family="sans-serif" fill="{}">{}</text>"#,
            color(fam),
            xml_escape(fam)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Space-separated phoneme line for inventories.
/// The selection report as pretty JSON with rounded scores.
pub fn selection_json(sel: &SelectionResult) -> Result<String, ExportError> {
    let mut sel = sel.clone();
    for s in &mut sel.sources {
        s.similarity = s.similarity.map(round12);
    }
    let mut s = serde_json::to_string_pretty(&sel)?;
    s.push('\n');
    Ok(s)
}

/// A string-keyed map of scores as pretty JSON with rounded values.
pub fn scores_json(scores: &BTreeMap<String, f64>) -> Result<String, ExportError> {
    let rounded: BTreeMap<&str, f64> = scores
        .iter()
        .map(|(k, &v)| (k.as_str(), round12(v)))
        .collect();
    let mut s = serde_json::to_string_pretty(&rounded)?;
    s.push('\n');
    Ok(s)
}

pub fn join_phonemes<'a>(ps: impl IntoIterator<Item = &'a Phoneme>) -> String {
    ps.into_iter()
        .map(Phoneme::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

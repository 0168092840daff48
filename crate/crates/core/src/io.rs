//! Output files: CSV tables and JSON-lines streams.
//!
//! Every file opens with a comment line `# config_sha256=<hex> version=<v>`.
//! CSV floats are written with 17 significant digits so values survive a
//! round trip.

use std::io::{BufRead, Write};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::circle::{FourierDensity, GridDensity};
use crate::diagnostics::EnsembleSummary;
use crate::invariant::CorrelationProfile;
use crate::models::{JumpEvent, State};
use crate::oracle::{JointDensity, Marginal};
use crate::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn provenance_line(config_sha256: &str) -> String {
    format!("# config_sha256={config_sha256} version={VERSION}")
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Field::Int(v) => write!(f, "{v}"),
            Field::Float(v) => f.write_str(&fmt_float(*v)),
            Field::Text(s) => f.write_str(s),
            Field::Empty => Ok(()),
        }
    }
}

pub struct CsvWriter<W: Write> {
    out: W,
    width: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, provenance: &str, header: &[&str]) -> Result<Self> {
        writeln!(out, "{provenance}")?;
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter {
            out,
            width: header.len(),
        })
    }

    pub fn row(&mut self, fields: &[Field]) -> Result<()> {
        assert_eq!(fields.len(), self.width, "row width does not match header");
        let line: Vec<String> = fields.iter().map(Field::to_string).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// One line of a snapshot stream: `{"replica", "t", "angles" | "velocities"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub replica: usize,
    pub t: f64,
    #[serde(flatten)]
    pub state: State,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub replica: usize,
    #[serde(flatten)]
    pub event: JumpEvent,
}

pub fn write_jsonl<W: Write, T: Serialize>(
    mut out: W,
    provenance: &str,
    records: impl IntoIterator<Item = T>,
) -> Result<W> {
    writeln!(out, "{provenance}")?;
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(out)
}

/// Parses a JSON-lines stream, skipping comment and blank lines.
pub fn read_jsonl<R: BufRead, T: DeserializeOwned>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(trimmed)?);
    }
    Ok(out)
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "t", "k", "re_f1", "im_f1", "se_f1", "re_C", "im_C", "se_C", "z_kinetic",
];

/// Rows for every checkpoint and `k = 0..=K`; `z[c][k-1]` fills the last
/// column when given.
pub fn write_summary_csv<W: Write>(
    out: W,
    provenance: &str,
    summary: &EnsembleSummary,
    z: Option<&[Vec<f64>]>,
) -> Result<W> {
    let mut w = CsvWriter::new(out, provenance, &SUMMARY_HEADER)?;
    for (c, cp) in summary.checkpoints.iter().enumerate() {
        for k in 0..cp.f1.len() {
            let zk = match z {
                Some(z) if k >= 1 => z[c].get(k - 1).map_or(Field::Empty, |v| Field::Float(*v)),
                _ => Field::Empty,
            };
            w.row(&[
                cp.t.into(),
                k.into(),
                cp.f1[k].re.into(),
                cp.f1[k].im.into(),
                cp.f1_se[k].into(),
                cp.pair[k].into(),
                0.0.into(),
                cp.pair_se[k].into(),
                zk,
            ])?;
        }
    }
    w.finish()
}

pub fn write_fourier_solution_csv<W: Write>(
    out: W,
    provenance: &str,
    times: &[f64],
    solutions: &[FourierDensity],
) -> Result<W> {
    let mut w = CsvWriter::new(out, provenance, &["t", "k", "re", "im"])?;
    for (t, f) in times.iter().zip(solutions) {
        for (k, c) in f.coeffs().iter().enumerate() {
            w.row(&[(*t).into(), k.into(), c.re.into(), c.im.into()])?;
        }
    }
    w.finish()
}

pub fn write_grid_solution_csv<W: Write>(
    out: W,
    provenance: &str,
    times: &[f64],
    solutions: &[GridDensity],
) -> Result<W> {
    let mut w = CsvWriter::new(out, provenance, &["t", "theta", "value"])?;
    for (t, f) in times.iter().zip(solutions) {
        for (m, v) in f.values().iter().enumerate() {
            w.row(&[(*t).into(), f.angle(m).into(), (*v).into()])?;
        }
    }
    w.finish()
}

pub fn write_correlation_csv<W: Write>(
    out: W,
    provenance: &str,
    finite: &CorrelationProfile,
    limit: &CorrelationProfile,
    gamma: &[f64],
) -> Result<W> {
    let mut w = CsvWriter::new(out, provenance, &["k", "Fhat_N", "Fhat_limit", "gamma_N"])?;
    for k in 0..finite.values.len() {
        w.row(&[
            k.into(),
            finite.values[k].into(),
            limit.values[k].into(),
            gamma[k].into(),
        ])?;
    }
    w.finish()
}

/// Full joint density, one row per grid state.
pub fn write_joint_csv<W: Write>(out: W, provenance: &str, d: &JointDensity) -> Result<W> {
    let names: Vec<String> = (0..d.particles()).map(|i| format!("m{i}")).collect();
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push("probability");
    let mut w = CsvWriter::new(out, provenance, &header)?;
    let m = d.grid();
    for (s, p) in d.weights().iter().enumerate() {
        let mut row = vec![Field::Empty; d.particles() + 1];
        let mut rest = s;
        for i in (0..d.particles()).rev() {
            row[i] = (rest % m).into();
            rest /= m;
        }
        row[d.particles()] = (*p).into();
        w.row(&row)?;
    }
    w.finish()
}

pub fn write_marginal_csv<W: Write>(out: W, provenance: &str, marg: &Marginal) -> Result<W> {
    let names: Vec<String> = marg.coords.iter().map(|c| format!("m{c}")).collect();
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push("probability");
    let mut w = CsvWriter::new(out, provenance, &header)?;
    let m = marg.grid;
    let width = marg.coords.len();
    for (s, p) in marg.weights.iter().enumerate() {
        let mut row = vec![Field::Empty; width + 1];
        let mut rest = s;
        for i in (0..width).rev() {
            row[i] = (rest % m).into();
            rest /= m;
        }
        row[width] = (*p).into();
        w.row(&row)?;
    }
    w.finish()
}

//! Bit-stable result emission: the time-series CSV with its pinned
//! column order, the JSON summary echoing the resolved configuration,
//! and the reader the fit command uses to get columns back.  All floats
//! go through one formatter with 17 significant digits, so re-running a
//! command writes byte-identical files.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::ResolvedRun;
use crate::diagnostics::{fit_decay, DiagnosticRecord, RunReport};
use crate::error::{Error, Result};

/// `%.16e`: one leading digit plus sixteen after the point, enough to
/// reproduce any f64 exactly on reparse.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct SciPretty<'a> {
    inner: PrettyFormatter<'a>,
}

impl<'a> Formatter for SciPretty<'a> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{}", fmt_float(value))
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object_value(writer)
    }
}

/// Pretty JSON with deterministic float formatting and a trailing
/// newline.  Non-finite floats come out as null.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let formatter = SciPretty { inner: PrettyFormatter::new() };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(format!("json serialization failed: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::Io(format!("json output was not utf-8: {e}")))
}

/// Column order of series.csv.  Per component: energy, the two
/// energy-ladder norms, the two cone-weighted ladders, the ghost
/// integral and the interior norm; then the time-weighted script norms,
/// the composite sup-norm bracket, the three pointwise sup families per
/// component, the support radius and the blow-up flag.
pub const SERIES_COLUMNS: [&str; 38] = [
    "t",
    "e_1",
    "n3_1",
    "n4_1",
    "m3_1",
    "m4_1",
    "g_1",
    "l_1",
    "e_2",
    "n3_2",
    "n4_2",
    "m3_2",
    "m4_2",
    "g_2",
    "l_2",
    "e_3",
    "n3_3",
    "n4_3",
    "m3_3",
    "m4_3",
    "g_3",
    "l_3",
    "script_n3",
    "script_n4",
    "script_m3",
    "script_m4",
    "bracket",
    "sup_rcone_1",
    "sup_cone_1",
    "sup_d_1",
    "sup_rcone_2",
    "sup_cone_2",
    "sup_d_2",
    "sup_rcone_3",
    "sup_cone_3",
    "sup_d_3",
    "support_radius",
    "blowup",
];

fn record_row(rec: &DiagnosticRecord) -> Vec<f64> {
    let mut row = Vec::with_capacity(SERIES_COLUMNS.len());
    row.push(rec.t);
    for c in &rec.components {
        row.extend([c.energy, c.n3, c.n4, c.m3, c.m4, c.ghost, c.interior]);
    }
    row.extend([rec.script_n3, rec.script_n4, rec.script_m3, rec.script_m4]);
    row.push(rec.bracket.as_ref().map_or(f64::NAN, |b| b.total));
    for c in &rec.components {
        row.extend([c.sup_r_cone_deriv, c.sup_cone_deriv, c.sup_deriv]);
    }
    row.push(rec.support_radius);
    row.push(if rec.blown_up { 1.0 } else { 0.0 });
    row
}

/// The full time series as CSV text, one row per diagnostic record.
pub fn series_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&SERIES_COLUMNS.join(","));
    out.push('\n');
    for rec in &report.records {
        let row = record_row(rec);
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            if k + 1 == row.len() {
                out.push_str(if *v == 1.0 { "1" } else { "0" });
            } else {
                out.push_str(&fmt_float(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// One configured pass/fail judgement recorded in the summary.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
}

/// Fitted power-law exponent of one column over a time window; None
/// when the window holds too few positive samples to fit.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub column: String,
    pub window: [f64; 2],
    pub exponent: Option<f64>,
}

/// Largest finite value each headline column reached during the run.
#[derive(Debug, Clone, Serialize)]
pub struct PeakNorms {
    pub script_n3: f64,
    pub script_n4: f64,
    pub script_m3: f64,
    pub script_m4: f64,
    pub bracket: f64,
    pub sup_d: [f64; 3],
    pub support_radius: f64,
}

/// Everything summary.json holds about one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema: u32,
    pub config: ResolvedRun,
    pub dt: f64,
    pub steps: usize,
    pub blow_up: Option<f64>,
    pub data_norm: f64,
    pub peak: PeakNorms,
    pub decay: Vec<DecayFit>,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
}

fn finite_max(values: impl Iterator<Item = f64>) -> f64 {
    values.filter(|v| v.is_finite()).fold(0.0, f64::max)
}

/// Assemble the summary for one finished run: peak norms over the
/// records, sup-derivative decay fits over the trailing two thirds of
/// the horizon, and the global-existence assertion when configured.
pub fn summarize(config: &ResolvedRun, report: &RunReport) -> RunSummary {
    let recs = &report.records;
    let peak = PeakNorms {
        script_n3: finite_max(recs.iter().map(|r| r.script_n3)),
        script_n4: finite_max(recs.iter().map(|r| r.script_n4)),
        script_m3: finite_max(recs.iter().map(|r| r.script_m3)),
        script_m4: finite_max(recs.iter().map(|r| r.script_m4)),
        bracket: finite_max(recs.iter().filter_map(|r| r.bracket.as_ref().map(|b| b.total))),
        sup_d: [0, 1, 2]
            .map(|i| finite_max(recs.iter().map(|r| r.components[i].sup_deriv))),
        support_radius: finite_max(recs.iter().map(|r| r.support_radius)),
    };
    let window = (config.t_max / 3.0, config.t_max);
    let ts: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let decay = (0..3)
        .map(|i| {
            let ys: Vec<f64> = recs.iter().map(|r| r.components[i].sup_deriv).collect();
            DecayFit {
                column: format!("sup_d_{}", i + 1),
                window: [window.0, window.1],
                exponent: fit_decay(&ts, &ys, window).ok(),
            }
        })
        .collect();
    let mut assertions = Vec::new();
    if config.expect_global {
        assertions.push(Assertion {
            name: "no blow-up through the horizon".to_string(),
            pass: report.blow_up.is_none(),
        });
    }
    let pass = assertions.iter().all(|a| a.pass);
    RunSummary {
        schema: config.schema,
        config: config.clone(),
        dt: report.dt,
        steps: report.steps,
        blow_up: report.blow_up,
        data_norm: report.data_norm,
        peak,
        decay,
        assertions,
        pass,
    }
}

/// A parsed series.csv: the header and the numeric rows.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn from_path(path: &Path) -> Result<SeriesTable> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        SeriesTable::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> Result<SeriesTable> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Diagnostics("series file is empty".to_string()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::Diagnostics(format!("row {}: bad number {s:?}: {e}", k + 2))
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != columns.len() {
                return Err(Error::Diagnostics(format!(
                    "row {} has {} fields, header has {}",
                    k + 2,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(SeriesTable { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name).ok_or_else(|| {
            Error::Diagnostics(format!(
                "no column named {name:?}; available: {}",
                self.columns.join(", ")
            ))
        })?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.column("t")
    }
}

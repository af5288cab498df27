use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub index: usize,
    /// Length of the best solution when it is feasible.
    pub objective: Option<f64>,
    pub relaxed_cost: f64,
    pub feasible: bool,
    pub time_s: f64,
    pub solution: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub method: Method,
    pub rows: Vec<BenchRow>,
    /// Mean objective over feasible instances.
    pub obj: Option<f64>,
    /// Mean percentage gap over instances feasible for both sides.
    pub gap: Option<f64>,
    pub gap_instances: usize,
    /// Instances dropped from the gap for lack of a feasible side.
    pub gap_excluded: usize,
    pub infeasible_pct: f64,
    pub time_s: f64,
}

impl BenchReport {
    pub fn new(method: Method, rows: Vec<BenchRow>, reference: Option<&[Option<f64>]>, time_s: f64) -> Self {
        let feasible: Vec<f64> = rows.iter().filter_map(|r| r.objective).collect();
        let obj = (!feasible.is_empty()).then(|| feasible.iter().sum::<f64>() / feasible.len() as f64);
        let infeasible_pct = if rows.is_empty() { 0.0 } else { 100.0 * rows.iter().filter(|r| !r.feasible).count() as f64 / rows.len() as f64 };
        let (mut gap, mut gap_instances, mut gap_excluded) = (None, 0, 0);
        if let Some(reference) = reference {
            let mut total = 0.0;
            for (row, r) in rows.iter().zip(reference) {
                match (row.objective, r) {
                    (Some(o), Some(b)) if *b > 0.0 => {
                        total += 100.0 * (o - b) / b;
                        gap_instances += 1;
                    }
                    _ => gap_excluded += 1,
                }
            }
            if gap_instances > 0 {
                gap = Some(total / gap_instances as f64);
            }
        }
        BenchReport { method, rows, obj, gap, gap_instances, gap_excluded, infeasible_pct, time_s }
    }

    /// Everything except wall-clock fields.
    pub fn same_results(&self, other: &BenchReport) -> bool {
        let strip = |r: &BenchReport| {
            let mut r = r.clone();
            r.time_s = 0.0;
            r.rows.iter_mut().for_each(|x| x.time_s = 0.0);
            r
        };
        strip(self) == strip(other)
    }

    pub fn objectives(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// One-line CSV summary with a header.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        let res = (|| {
            w.write_record(["Method", "Instances", "Obj", "Gap", "GapInstances", "GapExcluded", "Infsb%", "Time"])?;
            w.write_record([
                self.method.name().to_string(),
                self.rows.len().to_string(),
                f(self.obj),
                f(self.gap),
                self.gap_instances.to_string(),
                self.gap_excluded.to_string(),
                format!("{:.2}", self.infeasible_pct),
                format!("{:.3}", self.time_s),
            ])?;
            w.flush()?;
            Ok::<_, csv::Error>(())
        })();
        res.map_err(|e| Error::Config(format!("csv write failed: {e}")))
    }

    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        }
        w.flush().map_err(|e| Error::Config(format!("csv write failed: {e}")))
    }

    pub fn summary(&self) -> String {
        let f = |v: Option<f64>, unit: &str| v.map_or("n/a".to_string(), |x| format!("{x:.4}{unit}"));
        format!(
            "{}: {} instances, Obj {}, Gap {} ({} compared, {} excluded), Infsb {:.2}%, Time {:.2}s",
            self.method,
            self.rows.len(),
            f(self.obj, ""),
            f(self.gap, "%"),
            self.gap_instances,
            self.gap_excluded,
            self.infeasible_pct,
            self.time_s
        )
    }
}

#[derive(Serialize, Deserialize)]
struct RefRecord {
    instance_index: usize,
    objective: Option<f64>,
}

/// Reference objectives, `instance_index,objective` (empty when infeasible).
pub fn write_reference<W: Write>(out: W, objectives: &[Option<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, o) in objectives.iter().enumerate() {
        w.serialize(RefRecord { instance_index: i, objective: *o }).map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv write failed: {e}")))
}

/// Reads a reference file; indices must run `0..len` in order.
pub fn read_reference<R: Read>(input: R) -> Result<Vec<Option<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (line, rec) in r.deserialize::<RefRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: line + 2, msg: e.to_string() })?;
        if rec.instance_index != out.len() {
            return Err(Error::Alignment(format!("reference line {} has index {}, expected {}", line + 2, rec.instance_index, out.len())));
        }
        out.push(rec.objective);
    }
    Ok(out)
}

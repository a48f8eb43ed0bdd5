//! CSV and JSON sweep reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Format, PointReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Histogram columns in the CSV are `hist_b0..=hist_b{hist_overflow}`,
    /// the last one collecting every count at or above it.
    pub hist_overflow: usize,
    pub points: Vec<PointReport>,
}

impl SweepReport {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "baud_hz",
            "snr_db",
            "distance_m",
            "frame_len",
            "sync_len",
            "frames_sent",
            "dropped",
            "p_bse",
            "reliability",
            "measured_ser",
            "analytic_ber",
            "analytic_ser",
            "analytic_pfail",
            "analytic_perr",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((0..=self.hist_overflow).map(|k| format!("hist_b{k}")));
        h.push("duty_pos_pct".into());
        h.push("seed".into());
        h
    }

    fn csv_row(&self, r: &PointReport) -> Vec<String> {
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let p = &r.point;
        let mut row = vec![
            p.baud.to_string(),
            num(r.snr_db),
            num(p.distance_m),
            p.frame_len.to_string(),
            p.sync_len.to_string(),
        ];
        let stats = r.stats.as_ref();
        let an = r.analytic.as_ref();
        row.push(stats.map(|s| s.frames_sent.to_string()).unwrap_or_default());
        row.push(stats.map(|s| s.dropped.to_string()).unwrap_or_default());
        row.push(num(stats.map(|s| s.p_bse)));
        row.push(num(stats.map(|s| s.reliability)));
        row.push(num(stats.map(|s| s.measured_ser)));
        row.push(num(an.map(|a| a.ber)));
        row.push(num(an.map(|a| a.ser)));
        row.push(num(an.map(|a| a.p_fail)));
        row.push(num(an.map(|a| a.p_err)));
        match stats {
            Some(s) => row.extend(s.histogram.capped_bins(self.hist_overflow).iter().map(u64::to_string)),
            None => row.extend((0..=self.hist_overflow).map(|_| String::new())),
        }
        row.push(num(stats.and_then(|s| s.duty_pos_pct)));
        row.push(r.seed.to_string());
        row
    }
}

pub fn write_csv<W: Write>(r: &SweepReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(r.csv_header())?;
    for p in &r.points {
        w.write_record(r.csv_row(p))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_json<W: Write>(r: &SweepReport, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, r)?;
    Ok(())
}

pub fn read_json(text: &str) -> Result<SweepReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn emit_report(r: &SweepReport, format: Format, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(r, &mut out),
        Format::Json => write_json(r, &mut out),
    }
    .map_err(|e| match e {
        Error::Json(j) if j.is_io() => Error::io(path, std::io::Error::other(j.to_string())),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

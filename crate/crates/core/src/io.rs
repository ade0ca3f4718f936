//! CSV and JSON file formats.
//!
//! Numbers are written in Rust's shortest round-trip representation, so a
//! write followed by a read returns bit-identical values. Output never
//! depends on the locale.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{bland_altman_pairs, reference, reference_table, EvalReport};
use crate::pipeline::{HrSeries, HrWindow};
use crate::signal::{MultiAxisSignal, SampledSignal};
use crate::stft::Spectrogram;

pub const RECORDING_COLUMNS: [&str; 5] = ["ppg1", "ppg2", "acc_x", "acc_y", "acc_z"];
pub const HR_HEADER: [&str; 7] = [
    "window_index",
    "start_s",
    "hr_bpm",
    "f_oa_hz",
    "se_p",
    "rel_err_energy",
    "collision",
];

/// Maximum deviation of the time column from uniform spacing, in seconds.
pub const TIME_SPACING_TOL_S: f64 = 1e-6;

/// Locale-independent shortest round-trip formatting.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A dual-channel PPG recording with three accelerometer axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub ppg1: SampledSignal,
    pub ppg2: SampledSignal,
    pub acc: MultiAxisSignal,
}

impl Recording {
    pub fn sample_rate_hz(&self) -> f64 {
        self.ppg1.sample_rate_hz()
    }

    pub fn len(&self) -> usize {
        self.ppg1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppg1.is_empty()
    }

    /// PPG channel by 1-based index.
    pub fn ppg(&self, channel: usize) -> Result<&SampledSignal> {
        match channel {
            1 => Ok(&self.ppg1),
            2 => Ok(&self.ppg2),
            other => Err(Error::InvalidParameter(format!(
                "PPG channel must be 1 or 2, got {other}"
            ))),
        }
    }
}

fn parse_cell(value: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column `{column}`: `{value}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column `{column}`: non-finite value `{value}`"),
        });
    }
    Ok(v)
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Reads a recording CSV with header `t,ppg1,ppg2,acc_x,acc_y,acc_z`.
/// Column order is free, extra columns (e.g. `ecg`) are ignored and `t` is
/// optional. With `t` present the sample rate comes from its spacing;
/// otherwise `fallback_rate_hz` is used.
pub fn read_recording<R: Read>(reader: R, fallback_rate_hz: Option<f64>) -> Result<Recording> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(RECORDING_COLUMNS) {
        *slot = column_index(&headers, name).ok_or_else(|| Error::MissingColumn(name.into()))?;
    }
    let t_idx = column_index(&headers, "t");
    let mut channels: [Vec<f64>; 5] = Default::default();
    let mut times = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record_line(&record, row + 2);
        let cell = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing value for column `{name}`"),
            })?;
            parse_cell(raw, line, name)
        };
        for (k, name) in RECORDING_COLUMNS.iter().enumerate() {
            channels[k].push(cell(idx[k], name)?);
        }
        if let Some(ti) = t_idx {
            times.push(cell(ti, "t")?);
        }
    }
    let fs = match (t_idx, fallback_rate_hz) {
        (Some(_), _) => rate_from_times(&times)?,
        (None, Some(fs)) => fs,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "no `t` column: the sample rate must be given".into(),
            ))
        }
    };
    let [p1, p2, ax, ay, az] = channels;
    Ok(Recording {
        ppg1: SampledSignal::new(p1, fs)?,
        ppg2: SampledSignal::new(p2, fs)?,
        acc: MultiAxisSignal::new(
            SampledSignal::new(ax, fs)?,
            SampledSignal::new(ay, fs)?,
            SampledSignal::new(az, fs)?,
        )?,
    })
}

fn rate_from_times(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two samples to derive the sample rate".into(),
        ));
    }
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("time column must increase".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if (t - expected).abs() > TIME_SPACING_TOL_S {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("non-uniform sample spacing: t = {t}, expected {expected}"),
            });
        }
    }
    let fs = 1.0 / dt;
    // Snap to an integer rate when the spacing is uniform to rounding error.
    let rounded = fs.round();
    Ok(if (fs - rounded).abs() <= 1e-6 * fs {
        rounded
    } else {
        fs
    })
}

pub fn write_recording<W: Write>(writer: W, rec: &Recording, with_time: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = Vec::with_capacity(6);
    if with_time {
        header.push("t");
    }
    header.extend(RECORDING_COLUMNS);
    w.write_record(&header)?;
    let fs = rec.sample_rate_hz();
    let cols = [
        rec.ppg1.samples(),
        rec.ppg2.samples(),
        rec.acc.axis(0).samples(),
        rec.acc.axis(1).samples(),
        rec.acc.axis(2).samples(),
    ];
    for n in 0..rec.len() {
        let mut row: Vec<String> = Vec::with_capacity(6);
        if with_time {
            row.push(fmt_f64(n as f64 / fs));
        }
        row.extend(cols.iter().map(|c| fmt_f64(c[n])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `window_index,bpm`; indices must run 0, 1, 2, ...
pub fn read_truth<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let wi = column_index(&headers, "window_index")
        .ok_or_else(|| Error::MissingColumn("window_index".into()))?;
    let bi = column_index(&headers, "bpm").ok_or_else(|| Error::MissingColumn("bpm".into()))?;
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record_line(&record, row + 2);
        let index = record.get(wi).unwrap_or("").trim();
        if index.parse::<usize>().ok() != Some(row) {
            return Err(Error::Parse {
                line,
                message: format!("window_index must be {row}, got `{index}`"),
            });
        }
        let bpm = parse_cell(record.get(bi).unwrap_or(""), line, "bpm")?;
        if bpm <= 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("bpm must be positive, got {bpm}"),
            });
        }
        out.push(bpm);
    }
    Ok(out)
}

pub fn write_truth<W: Write>(writer: W, bpm: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window_index", "bpm"])?;
    for (i, v) in bpm.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hr_series<W: Write>(writer: W, series: &HrSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HR_HEADER)?;
    for win in &series.windows {
        w.write_record([
            win.index.to_string(),
            fmt_f64(win.start_time_s),
            fmt_f64(win.hr_bpm),
            fmt_f64(win.f_oa_hz),
            fmt_f64(win.se_p),
            fmt_f64(win.relative_error_energy),
            u8::from(win.collision_flag).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_hr_series<R: Read>(reader: R) -> Result<HrSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(HR_HEADER) {
        *slot = column_index(&headers, name).ok_or_else(|| Error::MissingColumn(name.into()))?;
    }
    let mut windows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record_line(&record, row + 2);
        let raw = |k: usize| record.get(idx[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            raw(k).parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: `{}` is not a number", HR_HEADER[k], raw(k)),
            })
        };
        let index = raw(0).parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("bad window_index `{}`", raw(0)),
        })?;
        let collision_flag = match raw(6) {
            "0" | "false" => false,
            "1" | "true" => true,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("collision must be 0 or 1, got `{other}`"),
                })
            }
        };
        let hr_bpm = num(2)?;
        if !hr_bpm.is_finite() {
            return Err(Error::Parse {
                line,
                message: "hr_bpm is not finite".into(),
            });
        }
        windows.push(HrWindow {
            index,
            start_time_s: num(1)?,
            hr_bpm,
            f_oa_hz: num(3)?,
            se_p: num(4)?,
            relative_error_energy: num(5)?,
            collision_flag,
        });
    }
    Ok(HrSeries { windows })
}

/// Long-format `window_index,bin_hz,magnitude`.
pub fn write_spectrogram<W: Write>(writer: W, spec: &Spectrogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window_index", "bin_hz", "magnitude"])?;
    for (i, mags) in spec.magnitudes.iter().enumerate() {
        for (f, m) in spec.bin_hz.iter().zip(mags) {
            w.write_record([i.to_string(), fmt_f64(*f), fmt_f64(*m)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_bland_altman_pairs<W: Write>(writer: W, estimates: &[f64], truth: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["mean", "diff"])?;
    for (m, d) in bland_altman_pairs(estimates, truth) {
        w.write_record([fmt_f64(m), fmt_f64(d)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub name: String,
    pub report: EvalReport,
}

/// Evaluation output: one report per recording, plus an optional pooled one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub recordings: Vec<NamedReport>,
    pub pooled: Option<EvalReport>,
}

pub fn write_report_json<W: Write>(writer: W, doc: &EvaluationDocument) -> Result<()> {
    serde_json::to_writer_pretty(writer, doc)?;
    Ok(())
}

pub fn read_report_json<R: Read>(reader: R) -> Result<EvaluationDocument> {
    Ok(serde_json::from_reader(reader)?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"))
}

fn render_one(out: &mut String, title: &str, r: &EvalReport) {
    use std::fmt::Write as _;
    let ba = &r.bland_altman;
    let _ = writeln!(out, "== {title} ({} windows)", r.n);
    let _ = writeln!(out, "MAE            {:.4} BPM", r.mae_bpm);
    let _ = writeln!(out, "std |error|    {:.4} BPM", r.std_abs_err_bpm);
    let _ = writeln!(out, "std error      {:.4} BPM", r.std_signed_err_bpm);
    let _ = writeln!(
        out,
        "Bland-Altman   mean {:.4}, sd {:.4}, LOA [{:.4}, {:.4}], {:.1}% within",
        ba.mean_diff,
        ba.sd_diff,
        ba.loa_low,
        ba.loa_high,
        100.0 * ba.fraction_within_loa
    );
    let _ = writeln!(out, "Pearson r      {}", opt(r.pearson_r));
    let _ = writeln!(out, "Spearman rho   {}", opt(r.spearman_rho));
}

/// Plain-text report with the reference comparison table.
pub fn render_report_text(doc: &EvaluationDocument) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for r in &doc.recordings {
        render_one(&mut out, &r.name, &r.report);
        out.push('\n');
    }
    if let Some(p) = &doc.pooled {
        render_one(&mut out, "pooled", p);
        let _ = writeln!(
            out,
            "reference      MAE {} (std {}), LOA +/-{}, r {}, rho {}",
            reference::HSUM_MEDIAN_MAE_BPM,
            reference::HSUM_MEDIAN_STD_BPM,
            reference::LOA_HALF_WIDTH_BPM,
            reference::PEARSON_R,
            reference::SPEARMAN_RHO
        );
        let _ = writeln!(
            out,
            "check r        {} vs reference {}",
            opt(p.pearson_r),
            reference::PEARSON_R
        );
        out.push('\n');
    }
    let _ = writeln!(out, "== reference MAE per subject (BPM)");
    let _ = write!(out, "{:<12}", "method");
    for s in 1..=12 {
        let _ = write!(out, "{:>8}", format!("S{s}"));
    }
    out.push('\n');
    for row in reference_table() {
        let _ = write!(out, "{:<12}", row.method.label());
        for v in row.mae_bpm {
            let _ = write!(out, "{v:>8.3}");
        }
        out.push('\n');
    }
    if !doc.recordings.is_empty() {
        let _ = write!(out, "{:<12}", "this run");
        for r in doc.recordings.iter().take(12) {
            let _ = write!(out, "{:>8.3}", r.report.mae_bpm);
        }
        out.push('\n');
    }
    out
}

//! CSV and JSON file formats for records, counts, Stokes series, g2
//! histograms and key-rate sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::g2::CorrelationHistogram;
use crate::analysis::qber::SlotCounts;
use crate::analysis::stability::StokesSeries;
use crate::error::{Error, Result};
use crate::polarization::{Bb84Symbol, StokesVector};
use crate::simulation::{DetectionEvent, DetectionRecord, RecordMetadata};
use crate::skr::SkrPoint;

pub const EVENTS_HEADER: [&str; 4] = ["slot_index", "seq_pos", "channel", "time_ps"];
pub const COUNTS_HEADER: [&str; 5] = ["seq_pos", "c_D", "c_A", "c_R", "c_L"];
pub const STOKES_HEADER: [&str; 4] = ["t_s", "s1", "s2", "s3"];
pub const G2_HEADER: [&str; 2] = ["t_ns", "counts"];
pub const SKR_HEADER: [&str; 7] = ["distance_km", "loss_db", "skr_bps", "p_c", "e_tot", "e1_bar", "pc1_lower"];

/// Metadata sidecar next to an events file: `events.csv` -> `events.json`.
pub fn sidecar_path(events_path: &Path) -> PathBuf {
    events_path.with_extension("json")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a headed CSV file with the named columns extracted in order.
struct Table {
    path: PathBuf,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path, columns: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
        let idx = columns
            .iter()
            .map(|c| {
                headers.iter().position(|h| h == *c).ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: c.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let vals = idx
                .iter()
                .map(|&i| rec.get(i).unwrap_or("").to_string())
                .collect();
            rows.push((line, vals));
        }
        Ok(Table {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn parse<T: std::str::FromStr>(&self, line: u64, column: &str, v: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        v.parse::<T>().map_err(|e| Error::Parse {
            path: self.path.clone(),
            line,
            message: format!("column `{column}`: cannot parse `{v}`: {e}"),
        })
    }
}

fn parse_f64_rows(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let t = Table::read(path, columns)?;
    t.rows
        .iter()
        .map(|(line, vals)| {
            vals.iter()
                .zip(columns)
                .map(|(v, c)| t.parse::<f64>(*line, c, v))
                .collect()
        })
        .collect()
}

pub fn write_events(path: &Path, events: &[DetectionEvent]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EVENTS_HEADER).map_err(|e| csv_err(path, e))?;
    for ev in events {
        w.write_record([
            ev.slot_index.to_string(),
            ev.seq_pos.to_string(),
            ev.channel.letter().to_string(),
            ev.time_ps.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_events(path: &Path) -> Result<Vec<DetectionEvent>> {
    let t = Table::read(path, &EVENTS_HEADER)?;
    t.rows
        .iter()
        .map(|(line, v)| {
            let time_ps: f64 = t.parse(*line, "time_ps", &v[3])?;
            if !time_ps.is_finite() {
                return Err(Error::Parse {
                    path: t.path.clone(),
                    line: *line,
                    message: format!("column `time_ps`: non-finite value `{}`", v[3]),
                });
            }
            Ok(DetectionEvent {
                slot_index: t.parse(*line, "slot_index", &v[0])?,
                seq_pos: t.parse(*line, "seq_pos", &v[1])?,
                channel: t.parse::<Bb84Symbol>(*line, "channel", &v[2])?,
                time_ps,
                is_dark: None,
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_metadata(path: &Path) -> Result<RecordMetadata> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Writes the events CSV and its metadata sidecar.
pub fn write_record(events_path: &Path, record: &DetectionRecord) -> Result<()> {
    write_events(events_path, &record.events)?;
    write_json(&sidecar_path(events_path), &record.metadata)
}

pub fn read_record(events_path: &Path) -> Result<DetectionRecord> {
    let events = read_events(events_path)?;
    let metadata = read_metadata(&sidecar_path(events_path))?;
    Ok(DetectionRecord { events, metadata })
}

pub fn write_slot_counts(path: &Path, counts: &SlotCounts) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(COUNTS_HEADER).map_err(|e| csv_err(path, e))?;
    for (i, row) in counts.rows().iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Rows must list every sequence position once, in order.
pub fn read_slot_counts(path: &Path) -> Result<SlotCounts> {
    let t = Table::read(path, &COUNTS_HEADER)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (k, (line, v)) in t.rows.iter().enumerate() {
        let pos: usize = t.parse(*line, "seq_pos", &v[0])?;
        if pos != k {
            return Err(Error::Parse {
                path: t.path.clone(),
                line: *line,
                message: format!("expected seq_pos {k}, found {pos}"),
            });
        }
        let mut row = [0u64; 4];
        for c in 0..4 {
            row[c] = t.parse(*line, COUNTS_HEADER[c + 1], &v[c + 1])?;
        }
        rows.push(row);
    }
    Ok(SlotCounts::new(rows))
}

pub fn write_stokes(path: &Path, series: &StokesSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(STOKES_HEADER).map_err(|e| csv_err(path, e))?;
    for (t, v) in series.times().iter().zip(series.vectors()) {
        w.write_record([t.to_string(), v.s1.to_string(), v.s2.to_string(), v.s3.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_stokes(path: &Path) -> Result<StokesSeries> {
    let rows = parse_f64_rows(path, &STOKES_HEADER)?;
    let times = rows.iter().map(|r| r[0]).collect();
    let vectors = rows.iter().map(|r| StokesVector::new(r[1], r[2], r[3])).collect();
    StokesSeries::new(times, vectors)
}

pub fn write_g2_histogram(path: &Path, hist: &CorrelationHistogram) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(G2_HEADER).map_err(|e| csv_err(path, e))?;
    for (t, c) in hist.t_ns.iter().zip(&hist.counts) {
        w.write_record([t.to_string(), c.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_g2_histogram(path: &Path) -> Result<CorrelationHistogram> {
    let rows = parse_f64_rows(path, &G2_HEADER)?;
    CorrelationHistogram::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
}

pub fn write_skr_sweep(path: &Path, points: &[SkrPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SKR_HEADER).map_err(|e| csv_err(path, e))?;
    for p in points {
        w.write_record(
            [p.distance_km, p.loss_db, p.skr_bps, p.p_c, p.e_tot, p.e1_bar, p.pc1_lower].map(|v| v.to_string()),
        )
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

//! Aligned 15-minute building time series and its CSV format.
//!
//! ```text
//! timestamp,T_in,T_out,Q_solar,u_heat
//! 2024-01-01T00:00:00,19,3.12,0,1.5
//! ```
//!
//! Timestamps are ISO-8601 without offset, numbers use a decimal point and the
//! shortest representation that round-trips.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};

use crate::error::{ensure, Error, Result};
use crate::rc::{Forcings, ThermalParams, SAMPLE_SECONDS};

pub const SAMPLES_PER_DAY: usize = 96;
pub const CSV_HEADER: [&str; 5] = ["timestamp", "T_in", "T_out", "Q_solar", "u_heat"];
const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Debug, PartialEq)]
pub struct BuildingSeries {
    pub start: NaiveDateTime,
    pub t_in: Vec<f64>,
    pub t_out: Vec<f64>,
    pub q_solar: Vec<f64>,
    pub u_heat: Vec<f64>,
    /// Generating parameters, known for synthetic data only.
    pub truth: Option<ThermalParams>,
}

/// Default start of synthetic series: midnight, 1 January.
pub fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

fn step() -> Duration {
    Duration::seconds(SAMPLE_SECONDS as i64)
}

impl BuildingSeries {
    pub fn new(
        start: NaiveDateTime,
        t_in: Vec<f64>,
        t_out: Vec<f64>,
        q_solar: Vec<f64>,
        u_heat: Vec<f64>,
    ) -> Result<Self> {
        let n = t_in.len();
        ensure!(n > 0, "series is empty");
        ensure!(
            t_out.len() == n && q_solar.len() == n && u_heat.len() == n,
            "series columns differ in length"
        );
        ensure!(
            t_in.iter().chain(&t_out).chain(&q_solar).chain(&u_heat).all(|x| x.is_finite()),
            "series contains non-finite values"
        );
        ensure!(q_solar.iter().all(|q| *q >= 0.0), "Q_solar must be non-negative");
        ensure!(u_heat.iter().all(|u| *u >= 0.0), "u_heat must be non-negative");
        Ok(BuildingSeries {
            start,
            t_in,
            t_out,
            q_solar,
            u_heat,
            truth: None,
        })
    }

    pub fn len(&self) -> usize {
        self.t_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_in.is_empty()
    }

    pub fn days(&self) -> f64 {
        self.len() as f64 / SAMPLES_PER_DAY as f64
    }

    pub fn forcings(&self) -> Forcings<'_> {
        Forcings::new(&self.t_out, &self.q_solar, &self.u_heat)
            .expect("series invariants imply valid forcings")
    }

    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        self.start + step() * k as i32
    }

    /// Hour of day (fractional) of sample `k`.
    pub fn hour_of_day(&self, k: usize) -> f64 {
        use chrono::Timelike;
        let t = self.timestamp(k);
        t.hour() as f64 + t.minute() as f64 / 60.0
    }

    /// Contiguous sub-series `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<BuildingSeries> {
        ensure!(len > 0, "empty slice requested");
        ensure!(
            start + len <= self.len(),
            "slice {start}..{} exceeds series length {}",
            start + len,
            self.len()
        );
        let r = start..start + len;
        Ok(BuildingSeries {
            start: self.timestamp(start),
            t_in: self.t_in[r.clone()].to_vec(),
            t_out: self.t_out[r.clone()].to_vec(),
            q_solar: self.q_solar[r.clone()].to_vec(),
            u_heat: self.u_heat[r].to_vec(),
            truth: self.truth,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{}", CSV_HEADER.join(",")).map_err(io)?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.timestamp(k).format(TIME_FORMAT),
                self.t_in[k],
                self.t_out[k],
                self.q_solar[k],
                self.u_heat[k]
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<BuildingSeries> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if names != CSV_HEADER {
            return Err(parse_err(
                1,
                format!("expected header {:?}, found {:?}", CSV_HEADER.join(","), names.join(",")),
            ));
        }

        let (mut t_in, mut t_out, mut q_solar, mut u_heat) = (vec![], vec![], vec![], vec![]);
        let mut start = None;
        let mut prev: Option<NaiveDateTime> = None;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != 5 {
                return Err(parse_err(line, format!("expected 5 fields, found {}", rec.len())));
            }
            let ts = NaiveDateTime::parse_from_str(rec[0].trim(), TIME_FORMAT)
                .map_err(|e| parse_err(line, format!("bad timestamp {:?}: {e}", &rec[0])))?;
            if let Some(p) = prev {
                if ts - p != step() {
                    return Err(parse_err(line, format!("timestamp {ts} breaks the 15-minute cadence")));
                }
            } else {
                start = Some(ts);
            }
            prev = Some(ts);
            let mut vals = [0.0; 4];
            for (i, v) in vals.iter_mut().enumerate() {
                let field = rec[i + 1].trim();
                *v = field.parse::<f64>().map_err(|_| {
                    parse_err(line, format!("column {} is not a number: {field:?}", CSV_HEADER[i + 1]))
                })?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column {} is not finite", CSV_HEADER[i + 1])));
                }
            }
            if vals[2] < 0.0 || vals[3] < 0.0 {
                return Err(parse_err(line, "Q_solar and u_heat must be non-negative".into()));
            }
            t_in.push(vals[0]);
            t_out.push(vals[1]);
            q_solar.push(vals[2]);
            u_heat.push(vals[3]);
        }
        let start = start.ok_or_else(|| parse_err(2, "no data rows".into()))?;
        BuildingSeries::new(start, t_in, t_out, q_solar, u_heat)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

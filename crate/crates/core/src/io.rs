//! Event files: CSV with header `time[,component][,price]` plus an optional
//! `<file>.meta.json` sidecar carrying the horizon.
//!
//! Components are `1..=M` on disk and `0..M` in memory.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::series::EventSeries;
use crate::simulate::SimulationRecord;

/// Rows of an events file before any cleaning. Times are only required to
/// be non-decreasing, so clock-quantised data with repeated stamps fits here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawEvents {
    pub times: Vec<f64>,
    pub components: Option<Vec<usize>>,
    pub prices: Option<Vec<f64>>,
}

impl RawEvents {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Strict series with horizon `horizon` (default: the last event).
    pub fn into_series(self, horizon: Option<f64>) -> Result<EventSeries> {
        let horizon = horizon.unwrap_or_else(|| self.times.last().copied().unwrap_or(0.0));
        match self.components {
            Some(c) => EventSeries::with_components(self.times, c, horizon),
            None => EventSeries::new(self.times, horizon),
        }
    }
}

/// Sidecar metadata written next to an events file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsMeta {
    pub horizon: f64,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EventsMeta {
    pub fn for_series(series: &EventSeries) -> Self {
        Self { horizon: series.horizon(), dimension: series.dimension(), burn_in_time: None, raw_count: None, seed: None }
    }

    pub fn for_record(rec: &SimulationRecord) -> Self {
        Self {
            burn_in_time: Some(rec.burn_in_time),
            raw_count: Some(rec.raw_count),
            seed: rec.seed,
            ..Self::for_series(&rec.series)
        }
    }
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Parses events CSV text. Blank input (no header) is an empty file.
pub fn parse_events<R: Read>(reader: R) -> Result<RawEvents> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(RawEvents::default());
    }
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let time_col = find("time").ok_or_else(|| HawkesError::Parse {
        line: 1,
        message: format!("header must contain a `time` column, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
    })?;
    let comp_col = find("component");
    let price_col = find("price");

    let mut out = RawEvents {
        times: Vec::new(),
        components: comp_col.map(|_| Vec::new()),
        prices: price_col.map(|_| Vec::new()),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize, what: &str| -> Result<&str> {
            rec.get(col).ok_or_else(|| HawkesError::Parse { line, message: format!("missing {what} field") })
        };
        let t: f64 = field(time_col, "time")?
            .parse()
            .map_err(|_| HawkesError::Parse { line, message: format!("invalid time `{}`", &rec[time_col]) })?;
        if !t.is_finite() || t < 0.0 {
            return Err(HawkesError::Parse { line, message: format!("time must be finite and >= 0, got {t}") });
        }
        if let Some(&prev) = out.times.last() {
            if t < prev {
                return Err(HawkesError::Parse { line, message: format!("time {t} is earlier than the previous row ({prev})") });
            }
        }
        out.times.push(t);
        if let (Some(col), Some(c)) = (comp_col, out.components.as_mut()) {
            let raw = field(col, "component")?;
            let label: usize = raw
                .parse()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| HawkesError::Parse { line, message: format!("component must be an integer >= 1, got `{raw}`") })?;
            c.push(label - 1);
        }
        if let (Some(col), Some(p)) = (price_col, out.prices.as_mut()) {
            let raw = field(col, "price")?;
            p.push(raw.parse().map_err(|_| HawkesError::Parse { line, message: format!("invalid price `{raw}`") })?);
        }
    }
    Ok(out)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> HawkesError {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HawkesError::Io(io.to_string()),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => HawkesError::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => HawkesError::Parse { line, message: format!("{other:?}") },
    }
}

pub fn read_raw_events(path: &Path) -> Result<RawEvents> {
    parse_events(File::open(path).map_err(|e| HawkesError::Io(format!("{}: {e}", path.display())))?)
}

pub fn read_meta(csv: &Path) -> Result<Option<EventsMeta>> {
    let p = meta_path(csv);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p)?;
    Ok(Some(serde_json::from_str(&text)?))
}

/// Reads a strictly increasing series. The horizon is `horizon` if given,
/// else the sidecar's, else the last event time.
pub fn read_events(path: &Path, horizon: Option<f64>) -> Result<EventSeries> {
    let raw = read_raw_events(path)?;
    let horizon = match horizon {
        Some(h) => Some(h),
        None => read_meta(path)?.map(|m| m.horizon),
    };
    raw.into_series(horizon)
}

/// Shortest decimal with at least 9 fractional digits that parses back to `x`.
pub fn format_time(x: f64) -> String {
    let shortest = format!("{x}");
    let frac = shortest.split_once('.').map_or(0, |(_, f)| f.len());
    if frac >= 9 {
        shortest
    } else {
        // the 9-digit rounding is at least as close as the shortest form
        format!("{x:.9}")
    }
}

pub fn write_events_to<W: Write>(w: W, series: &EventSeries) -> Result<()> {
    let mut w = BufWriter::new(w);
    let labelled = series.components().is_some();
    writeln!(w, "{}", if labelled { "time,component" } else { "time" })?;
    for (i, &t) in series.times().iter().enumerate() {
        if labelled {
            writeln!(w, "{},{}", format_time(t), series.component(i) + 1)?;
        } else {
            writeln!(w, "{}", format_time(t))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV and its `.meta.json` sidecar.
pub fn write_events(path: &Path, series: &EventSeries, meta: &EventsMeta) -> Result<()> {
    write_events_to(File::create(path)?, series)?;
    std::fs::write(meta_path(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

/// Writes raw rows with `decimals` fractional digits (used for clock-quantised data).
pub fn write_raw_events(path: &Path, raw: &RawEvents, decimals: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = vec!["time"];
    if raw.components.is_some() {
        header.push("component");
    }
    if raw.prices.is_some() {
        header.push("price");
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, t) in raw.times.iter().enumerate() {
        write!(w, "{t:.decimals$}")?;
        if let Some(c) = &raw.components {
            write!(w, ",{}", c[i] + 1)?;
        }
        if let Some(p) = &raw.prices {
            write!(w, ",{}", p[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

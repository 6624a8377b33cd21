//! Experiment orchestration: synthetic forward/backward sweeps and the
//! windowed fitting pipeline for recorded event files.

mod empirical;
mod sweep;

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use empirical::{
    arrow_verdict, empirical_pipeline, jitter_timestamps, synthetic_market_day, table_rows_csv, ArrowScore,
    window_label, write_table, EmpiricalConfig, JitterOutcome, MarketDayConfig, Verdict, WindowFit, WindowReport,
    WindowRow,
};
pub use sweep::{
    run_sweep, run_sweep_with, write_sweep_outputs, FitAggregate, FitPair, FitRecord, InvalidFitFilter,
    LevelAggregate, NpRecord, PPair, ParamAggregate, Rejection, ReversalReport, RunRecord, SweepConfig, SweepModel,
    TraceData,
};

/// Arrow of time of a fitted series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Backward];
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            _ => Err(format!("unknown direction `{s}` (expected forward or backward)")),
        }
    }
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Standard error of the mean; 0 for fewer than two values.
    pub std_error: f64,
}

impl Summary {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self { count: 0, mean: 0.0, std_error: 0.0 };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { count: n, mean, std_error }
    }
}

/// One point of a figure series: `y` is a mean over runs, `ylo`/`yhi` one
/// standard error either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigurePoint {
    pub x: f64,
    pub y: f64,
    pub ylo: f64,
    pub yhi: f64,
    pub count: usize,
}

impl FigurePoint {
    pub fn new(x: f64, s: Summary) -> Self {
        Self { x, y: s.mean, ylo: s.mean - s.std_error, yhi: s.mean + s.std_error, count: s.count }
    }
}

pub fn write_figure_csv(path: &Path, points: &[FigurePoint]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y,ylo,yhi")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.x, p.y, p.ylo, p.yhi)?;
    }
    w.flush()?;
    Ok(())
}

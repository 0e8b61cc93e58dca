//! CSV training and evaluation logs.
//!
//! Floating-point fields are written with nine significant digits;
//! fields that do not apply to an agent (actor loss for the discretized
//! baseline) are written as `NaN`. Smoothing is applied at report time
//! only; logs always hold raw per-step values.

use super::evaluate::EvalReport;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

/// Nine significant digits, `NaN` for not-applicable.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.8e}")
    }
}

pub const TRAIN_HEADER: &str =
    "step,episode,ep_len,ep_reward,loss_q,loss_theta,epsilon,lr_omega,lr_theta";
pub const EVAL_HEADER: &str = "step,trials,mean_reward,goal_rate,mean_len";

#[derive(Clone, Copy, Debug)]
pub struct TrainRow {
    pub step: u64,
    pub episode: u64,
    pub ep_len: u32,
    pub ep_reward: f64,
    pub loss_q: f64,
    pub loss_theta: f64,
    pub epsilon: f64,
    pub lr_omega: f64,
    pub lr_theta: f64,
}

pub struct CsvLogger {
    out: BufWriter<File>,
}

impl CsvLogger {
    /// Creates the file and writes `header`, or appends without a header
    /// when resuming an existing log.
    pub fn open(path: &Path, header: &str, append: bool) -> std::io::Result<Self> {
        let exists = path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(append)
            .write(true)
            .truncate(!append)
            .open(path)?;
        let mut out = BufWriter::new(file);
        if !(append && exists) {
            writeln!(out, "{header}")?;
        }
        Ok(Self { out })
    }

    pub fn train_row(&mut self, row: &TrainRow) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{}",
            row.step,
            row.episode,
            row.ep_len,
            fmt_f64(row.ep_reward),
            fmt_f64(row.loss_q),
            fmt_f64(row.loss_theta),
            fmt_f64(row.epsilon),
            fmt_f64(row.lr_omega),
            fmt_f64(row.lr_theta),
        )
    }

    pub fn eval_row(&mut self, report: &EvalReport) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            report.step,
            report.trials,
            fmt_f64(report.mean_reward),
            fmt_f64(report.goal_rate),
            fmt_f64(report.mean_len),
        )
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

/// Trailing moving average over `window` points.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "smoothing window must be positive");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / window.min(i + 1) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_nine_significant_digits() {
        assert_eq!(fmt_f64(0.55), "5.50000000e-1");
        assert_eq!(fmt_f64(123456789.123), "1.23456789e8");
        assert_eq!(fmt_f64(-1.0), "-1.00000000e0");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn round_trips_through_parse() {
        for v in [0.1, -3.25e-7, 123456.0, 1.0 / 3.0] {
            let parsed: f64 = fmt_f64(v).parse().unwrap();
            let rel = ((parsed - v) / v).abs();
            assert!(rel < 1e-8, "{v} -> {} -> {parsed}", fmt_f64(v));
        }
    }

    #[test]
    fn smooth_is_a_trailing_mean() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(smooth(&xs, 2), vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(smooth(&xs, 10), vec![1.0, 1.5, 2.0, 2.5]);
    }

    #[test]
    fn logger_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let row = TrainRow {
            step: 1,
            episode: 0,
            ep_len: 1,
            ep_reward: 0.5,
            loss_q: f64::NAN,
            loss_theta: f64::NAN,
            epsilon: 1.0,
            lr_omega: 1e-3,
            lr_theta: 1e-3,
        };
        {
            let mut log = CsvLogger::open(&path, TRAIN_HEADER, false).unwrap();
            log.train_row(&row).unwrap();
            log.flush().unwrap();
        }
        {
            let mut log = CsvLogger::open(&path, TRAIN_HEADER, true).unwrap();
            log.train_row(&TrainRow { step: 2, ..row }).unwrap();
            log.flush().unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], TRAIN_HEADER);
        assert!(lines[1].starts_with("1,0,1,5.00000000e-1,NaN,NaN,"));
        assert!(lines[2].starts_with("2,"));
    }
}

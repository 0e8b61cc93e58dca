//! Step-indexed hyperparameter schedules.

use super::MathError;

/// A non-negative scalar schedule over training steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Linear interpolation from `start` at step 0 to `end` at step
    /// `horizon`, clamped to `end` afterwards.
    Linear { start: f64, end: f64, horizon: u64 },
}

impl Schedule {
    pub fn constant(value: f64) -> Result<Self, MathError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(MathError::InvalidHyperparameter(format!(
                "schedule value must be finite and non-negative, got {value}"
            )));
        }
        Ok(Schedule::Constant(value))
    }

    pub fn linear(start: f64, end: f64, horizon: u64) -> Result<Self, MathError> {
        for v in [start, end] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MathError::InvalidHyperparameter(format!(
                    "schedule endpoints must be finite and non-negative, got {v}"
                )));
            }
        }
        if horizon == 0 {
            return Err(MathError::InvalidHyperparameter(
                "schedule horizon must be positive".into(),
            ));
        }
        Ok(Schedule::Linear { start, end, horizon })
    }

    pub fn value(&self, t: u64) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::Linear { start, end, horizon } => {
                if t >= horizon {
                    end
                } else {
                    start + (end - start) * (t as f64 / horizon as f64)
                }
            }
        }
    }

    /// The same schedule with both endpoints multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, MathError> {
        match *self {
            Schedule::Constant(v) => Schedule::constant(v * factor),
            Schedule::Linear { start, end, horizon } => {
                Schedule::linear(start * factor, end * factor, horizon)
            }
        }
    }
}

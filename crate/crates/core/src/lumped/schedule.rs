//! Piecewise-constant and periodic square-wave input schedules (SI units).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule has no points")]
    Empty,
    #[error("schedule breakpoints must be strictly increasing")]
    Unsorted,
    #[error("square wave needs period > 0 and duty in [0, 1]")]
    BadSquareWave,
    #[error("schedule value is not finite")]
    NonFinite,
}

/// A heat-flow schedule `Q'(t)` in W with `t` in seconds.
///
/// All variants are right-continuous: at a breakpoint the new value applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// `(t_start, value)` pairs. Before the first start the first value holds.
    Piecewise {
        points: Vec<(f64, f64)>,
    },
    /// `high` on `[start + kT, start + kT + duty·T)`, `low` otherwise.
    Square {
        period: f64,
        high: f64,
        low: f64,
        duty: f64,
        #[serde(default)]
        start: f64,
    },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn step(before: f64, at: f64, after: f64) -> Self {
        Schedule::Piecewise {
            points: vec![(0.0, before), (at, after)],
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        match self {
            Schedule::Constant { value } => {
                if !value.is_finite() {
                    return Err(ScheduleError::NonFinite);
                }
            }
            Schedule::Piecewise { points } => {
                if points.is_empty() {
                    return Err(ScheduleError::Empty);
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(ScheduleError::Unsorted);
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(ScheduleError::NonFinite);
                }
            }
            Schedule::Square {
                period,
                high,
                low,
                duty,
                start,
            } => {
                if !(*period > 0.0) || !(0.0..=1.0).contains(duty) {
                    return Err(ScheduleError::BadSquareWave);
                }
                if !high.is_finite() || !low.is_finite() || !start.is_finite() {
                    return Err(ScheduleError::NonFinite);
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Piecewise { points } => {
                let idx = points.partition_point(|(s, _)| *s <= t);
                points[idx.saturating_sub(1)].1
            }
            Schedule::Square {
                period,
                high,
                low,
                duty,
                start,
            } => {
                if *duty <= 0.0 {
                    return *low;
                }
                if *duty >= 1.0 {
                    return *high;
                }
                let phase = ((t - start) / period).rem_euclid(1.0);
                if phase < *duty {
                    *high
                } else {
                    *low
                }
            }
        }
    }

    /// Discontinuities strictly inside `(t0, t1)`, sorted.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            Schedule::Constant { .. } => Vec::new(),
            Schedule::Piecewise { points } => points
                .windows(2)
                .filter(|w| w[0].1 != w[1].1)
                .map(|w| w[1].0)
                .filter(|t| *t > t0 && *t < t1)
                .collect(),
            Schedule::Square {
                period,
                duty,
                start,
                high,
                low,
            } => {
                if *duty <= 0.0 || *duty >= 1.0 || high == low {
                    return Vec::new();
                }
                let mut out = Vec::new();
                let mut k = ((t0 - start) / period).floor() - 1.0;
                loop {
                    let base = start + k * period;
                    if base > t1 {
                        break;
                    }
                    for t in [base, base + duty * period] {
                        if t > t0 && t < t1 {
                            out.push(t);
                        }
                    }
                    k += 1.0;
                }
                out
            }
        }
    }
}

/// Union of the breakpoints of several schedules inside `(t0, t1)`.
pub fn merged_breakpoints<'a>(
    schedules: impl IntoIterator<Item = &'a Schedule>,
    t0: f64,
    t1: f64,
) -> Vec<f64> {
    let mut all: Vec<f64> = schedules
        .into_iter()
        .flat_map(|s| s.breakpoints(t0, t1))
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_right_continuous() {
        let s = Schedule::step(5e6, 10.0, 6e6);
        assert_eq!(s.value(9.99), 5e6);
        assert_eq!(s.value(10.0), 6e6);
        assert_eq!(s.value(-1.0), 5e6);
        assert_eq!(s.breakpoints(0.0, 60.0), vec![10.0]);
        assert!(s.breakpoints(10.0, 60.0).is_empty());
    }

    #[test]
    fn square_wave_phases() {
        let s = Schedule::Square {
            period: 600.0,
            high: 7e6,
            low: 5e6,
            duty: 0.5,
            start: 0.0,
        };
        assert_eq!(s.value(150.0), 7e6);
        assert_eq!(s.value(450.0), 5e6);
        assert_eq!(s.value(300.0), 5e6);
        assert_eq!(s.value(600.0), 7e6);
        assert_eq!(s.breakpoints(0.0, 1300.0), vec![300.0, 600.0, 900.0, 1200.0]);
    }

    #[test]
    fn zero_duty_is_constant_low() {
        let s = Schedule::Square {
            period: 10.0,
            high: 2.0,
            low: 1.0,
            duty: 0.0,
            start: 0.0,
        };
        for t in [0.0, 3.0, 7.5, 100.0] {
            assert_eq!(s.value(t), 1.0);
        }
        assert!(s.breakpoints(0.0, 100.0).is_empty());
    }

    #[test]
    fn validation() {
        assert_eq!(
            Schedule::Piecewise {
                points: vec![(1.0, 0.0), (0.5, 1.0)]
            }
            .validate(),
            Err(ScheduleError::Unsorted)
        );
        assert_eq!(
            Schedule::Piecewise { points: vec![] }.validate(),
            Err(ScheduleError::Empty)
        );
        assert!(Schedule::constant(1.0).validate().is_ok());
    }

    #[test]
    fn merged_breakpoints_dedup() {
        let a = Schedule::step(0.0, 10.0, 1.0);
        let b = Schedule::step(0.0, 10.0, 2.0);
        assert_eq!(merged_breakpoints([&a, &b], 0.0, 20.0), vec![10.0]);
    }
}

//! Dormand–Prince 5(4) with step-size control and cubic Hermite dense output.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step (same time unit as the integration).
    pub max_step: f64,
    /// Steps shorter than `min_step_rel · max(|t|, 1)` abort the solve.
    pub min_step_rel: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: f64::INFINITY,
            min_step_rel: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl std::ops::AddAssign for OdeStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError<E> {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("right-hand side failed at t = {t}")]
    Rhs { t: f64, source: E },
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order minus embedded 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1 ≥ t0`.
///
/// `samples` must be sorted; every sample in `[t0, t1]` is reported through
/// `emit` (a sample equal to `t0` receives `y0` exactly, one equal to `t1`
/// the final state). Returns the state at `t1`.
#[allow(clippy::too_many_arguments)]
pub fn dopri5<F, RhsErr, G>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
    samples: &[f64],
    mut emit: G,
    stats: &mut OdeStats,
) -> Result<Vec<f64>, OdeError<RhsErr>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsErr>,
    G: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut next_sample = samples.partition_point(|s| *s < t0);
    let mut y = y0.to_vec();
    while next_sample < samples.len() && samples[next_sample] == t0 {
        emit(t0, &y);
        next_sample += 1;
    }
    if t1 <= t0 {
        return Ok(y);
    }
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut t = t0;
    f(t, &y, &mut k[0]).map_err(|source| OdeError::Rhs { t, source })?;
    stats.rhs_evals += 1;

    let weight = |a: &[f64], b: &[f64], i: usize| opts.atol + opts.rtol * a[i].abs().max(b[i].abs());
    // initial step (Hairer, Nørsett & Wanner II.4)
    let mut h = {
        let d0 = rms((0..n).map(|i| y[i] / weight(&y, &y, i)));
        let d1 = rms((0..n).map(|i| k[0][i] / weight(&y, &y, i)));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(opts.max_step).min(t1 - t0)
    };
    let mut reject_run = 0usize;
    while t < t1 {
        let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        let min_h = opts.min_step_rel * t.abs().max(1.0);
        if h < min_h && !last {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let mut stage_err = None;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                tmp[i] = y[i] + h * acc;
            }
            let (_, rest) = k.split_at_mut(s);
            stats.rhs_evals += 1;
            if let Err(e) = f(t + C[s] * h, &tmp, &mut rest[0]) {
                stage_err = Some((t + C[s] * h, e));
                break;
            }
            if s == 6 {
                y_new.copy_from_slice(&tmp);
            }
        }
        if let Some((ts, e)) = stage_err {
            // a trial stage left the admissible region; retry shorter
            reject_run += 1;
            stats.rejected += 1;
            if reject_run > 30 || h * 0.25 < min_h {
                return Err(OdeError::Rhs { t: ts, source: e });
            }
            h *= 0.25;
            continue;
        }
        let err = rms((0..n).map(|i| {
            let mut e = 0.0;
            for (j, c) in E.iter().enumerate() {
                e += c * k[j][i];
            }
            h * e / weight(&y, &y_new, i)
        }));
        if !err.is_finite() || err > 1.0 {
            reject_run += 1;
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h *= fac;
            if h < min_h {
                return Err(OdeError::StepUnderflow { t, h });
            }
            continue;
        }
        reject_run = 0;
        stats.accepted += 1;
        let t_new = if last { t1 } else { t + h };
        while next_sample < samples.len() && samples[next_sample] <= t_new {
            let ts = samples[next_sample];
            if ts == t_new {
                emit(ts, &y_new);
            } else {
                hermite(t, &y, &k[0], t_new, &y_new, &k[6], ts, &mut tmp);
                emit(ts, &tmp);
            }
            next_sample += 1;
        }
        std::mem::swap(&mut y, &mut y_new);
        let (first, rest) = k.split_at_mut(6);
        first[0].copy_from_slice(&rest[0]);
        t = t_new;
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * fac).min(opts.max_step);
    }
    Ok(y)
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = it.fold((0.0, 0usize), |(s, c), x| (s + x * x, c + 1));
    if c == 0 {
        0.0
    } else {
        (s / c as f64).sqrt()
    }
}

#[allow(clippy::too_many_arguments)]
fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

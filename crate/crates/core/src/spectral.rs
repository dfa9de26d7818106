//! Linearization of the inner-limit model about its equilibrium line, the
//! normal-hyperbolicity certificate, and relaxation-based tracing of the slow
//! manifold of the full model.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::inner_limit::{EquilibriumSet, InnerLimitSystem};
use crate::lumped::{FullModel, ModelError, SystemParams, SystemState};
use crate::network::null_space;
use crate::ode::{dopri5, OdeError, OdeOptions, OdeStats};
use crate::par::{self, Execution};

/// Default magnitude below which an eigenvalue counts as zero.
pub const TOL_ZERO: f64 = 1e-8;
/// Largest admissible angle (rad) between the center eigenvector and `(1, 0)`.
pub const CENTER_ANGLE_TOL: f64 = 1e-6;

/// `A = [[0, -G⁻¹R], [H⁻¹Rᵀ, -H⁻¹Df(q*)]]`.
pub fn linearize(sys: &InnerLimitSystem, eq: &EquilibriumSet) -> DMatrix<f64> {
    let n = sys.n();
    let m = sys.m();
    let slope = sys.friction_slope(&eq.q_star);
    let mut a = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..m {
            let r = sys.r[(i, j)];
            if r != 0.0 {
                a[(i, n + j)] = -r / sys.g[i];
                a[(n + j, i)] = r / sys.h[j];
            }
        }
    }
    for j in 0..m {
        a[(n + j, n + j)] = -slope[j] / sys.h[j];
    }
    a
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigenvalue iteration did not converge")]
    Eigensolver,
    #[error("matrix is {rows}x{cols}, expected square of size {expected}")]
    Shape { rows: usize, cols: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub a: DMatrix<f64>,
    /// Eigenvalues with multiplicity, sorted by decreasing real part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub tol_zero: f64,
    pub zero_count: usize,
    /// Unit kernel vector of `A` when the kernel is one-dimensional.
    pub center_eigenvector: Option<Vec<f64>>,
    /// Angle between the center eigenvector and `(1,…,1,0,…,0)`.
    pub center_angle: Option<f64>,
    pub rank: usize,
    pub df_nonsingular: bool,
    pub no_pure_imaginary: bool,
    pub center_is_one_dim: bool,
    pub center_tangent_to_ones: bool,
    /// All non-zero eigenvalues in the open left half-plane.
    pub transverse_stable: bool,
    pub certified: bool,
    pub reasons: Vec<String>,
}

/// Eigen-analysis of `A` at equilibrium `eq` with `n` vertex coordinates.
pub fn nhim_certificate(
    a: &DMatrix<f64>,
    eq: &EquilibriumSet,
    tol_zero: f64,
) -> Result<SpectralReport, SpectralError> {
    let n = eq.psi0.len();
    let m = eq.q_star.len();
    if a.nrows() != n + m || a.ncols() != n + m {
        return Err(SpectralError::Shape {
            rows: a.nrows(),
            cols: a.ncols(),
            expected: n + m,
        });
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or(SpectralError::Eigensolver)?;
    let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap().then(y.im.partial_cmp(&x.im).unwrap()));

    let zero_count = eigenvalues.iter().filter(|l| l.norm() < tol_zero).count();
    let no_pure_imaginary = !eigenvalues
        .iter()
        .any(|l| l.re.abs() < tol_zero && l.im.abs() >= tol_zero);
    let transverse_stable = eigenvalues
        .iter()
        .filter(|l| l.norm() >= tol_zero)
        .all(|l| l.re < 0.0);
    let df_nonsingular = eq.q_star.iter().all(|q| q.abs() > tol_zero);

    let (kernel, rank, _, _, _) = null_space(a);
    let (center_eigenvector, center_angle) = if kernel.ncols() == 1 {
        let v: DVector<f64> = kernel.column(0).normalize();
        let mut ones = DVector::zeros(n + m);
        ones.rows_mut(0, n).fill(1.0 / (n as f64).sqrt());
        let along = v.dot(&ones);
        let across = (&v - &ones * along).norm();
        (Some(v.iter().copied().collect()), Some(across.atan2(along.abs())))
    } else {
        (None, None)
    };
    let center_is_one_dim = zero_count == 1 && rank + 1 == n + m;
    let center_tangent_to_ones = center_angle.is_some_and(|t| t < CENTER_ANGLE_TOL);

    let mut reasons = Vec::new();
    if !df_nonsingular {
        reasons.push("Df(q*) is singular: some equilibrium flow is zero".to_string());
    }
    if !no_pure_imaginary {
        reasons.push("pure-imaginary eigenvalues present".to_string());
    }
    if !center_is_one_dim {
        reasons.push(format!(
            "center subspace is not one-dimensional ({zero_count} zero eigenvalues, rank {rank} of {})",
            n + m
        ));
    }
    if !center_tangent_to_ones {
        reasons.push("center eigenvector is not parallel to (1,…,1,0,…,0)".to_string());
    }
    Ok(SpectralReport {
        a: a.clone(),
        eigenvalues,
        tol_zero,
        zero_count,
        center_eigenvector,
        center_angle,
        rank,
        df_nonsingular,
        no_pure_imaginary,
        center_is_one_dim,
        center_tangent_to_ones,
        transverse_stable,
        certified: reasons.is_empty(),
        reasons,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Relaxation stops when the fast rates fall below this (dimensionless).
    pub tol: f64,
    /// Give up on a sample after this much model time (s).
    pub max_time_s: f64,
    pub exec: Execution,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_time_s: 4000.0,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSample {
    pub mean_pressure_pa: f64,
    pub pressures_pa: Vec<f64>,
    pub velocities_mps: Vec<f64>,
    pub converged: bool,
    /// Fast residual `max(‖du/dt‖∞, max_l |d(p_tail - p_head)/dt| / ε)`.
    pub residual: f64,
    pub relax_time_s: f64,
    /// Uniform pressure drift rate on the manifold (Pa/s).
    pub drift_pa_per_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldTrace {
    /// Ordered by increasing mean pressure.
    pub samples: Vec<ManifoldSample>,
    /// Input time at which the heat schedules were frozen (s).
    pub inputs_at_s: f64,
    pub stats: OdeStats,
}

impl ManifoldTrace {
    /// Fast coordinates `(p_tail - p_head, u)` for each link at each sample.
    pub fn fast_coordinates(&self, params: &SystemParams) -> Vec<Vec<(f64, f64)>> {
        self.samples
            .iter()
            .map(|s| {
                params
                    .network
                    .pipes()
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (s.pressures_pa[p.tail] - s.pressures_pa[p.head], s.velocities_mps[j]))
                    .collect()
            })
            .collect()
    }

    /// Linear interpolation of the fast coordinates at mean pressure `p_pa`
    /// (clamped to the traced range).
    pub fn fast_at(&self, params: &SystemParams, p_pa: f64) -> Option<Vec<(f64, f64)>> {
        let fc = self.fast_coordinates(params);
        let xs: Vec<f64> = self.samples.iter().map(|s| s.mean_pressure_pa).collect();
        if xs.is_empty() {
            return None;
        }
        let k = xs.partition_point(|x| *x <= p_pa);
        if k == 0 {
            return Some(fc[0].clone());
        }
        if k == xs.len() {
            return Some(fc[k - 1].clone());
        }
        let w = (p_pa - xs[k - 1]) / (xs[k] - xs[k - 1]);
        Some(
            fc[k - 1]
                .iter()
                .zip(&fc[k])
                .map(|(a, b)| (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1)))
                .collect(),
        )
    }

    /// Largest relative spread `(max - min)/max|·|` of any fast coordinate
    /// over the trace.
    pub fn fast_spread(&self, params: &SystemParams) -> f64 {
        let fc = self.fast_coordinates(params);
        let Some(first) = fc.first() else {
            return 0.0;
        };
        let mut worst: f64 = 0.0;
        for j in 0..first.len() {
            for pick in [|c: &(f64, f64)| c.0, |c: &(f64, f64)| c.1] {
                let v: Vec<f64> = fc.iter().map(|r| pick(&r[j])).collect();
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let scale = lo.abs().max(hi.abs());
                if scale > 0.0 {
                    worst = worst.max((hi - lo) / scale);
                }
            }
        }
        worst
    }
}

/// Locates points of the full model's slow manifold for mean pressures evenly
/// spread over `range_pa`, with the inputs in force at `t_s`.
///
/// Each sample is found by integrating the full model with the uniform
/// pressure drift removed, so the mean pressure stays at its target while the
/// fast variables relax. At the limit every vertex pressure drifts at the same
/// rate and `du/dt = 0`: the fast residual vanishes.
pub fn trace_manifold(
    params: &SystemParams,
    t_s: f64,
    range_pa: (f64, f64),
    count: usize,
    opts: &TraceOptions,
) -> Result<ManifoldTrace, ModelError> {
    params.validate()?;
    let targets: Vec<f64> = match count {
        0 => Vec::new(),
        1 => vec![0.5 * (range_pa.0 + range_pa.1)],
        _ => (0..count)
            .map(|k| range_pa.0 + (range_pa.1 - range_pa.0) * k as f64 / (count - 1) as f64)
            .collect(),
    };
    let results = par::map(opts.exec, &targets, |p| relax_to_manifold(params, t_s, *p, opts));
    let mut samples = Vec::with_capacity(count);
    let mut stats = OdeStats::default();
    for r in results {
        let (s, st) = r?;
        samples.push(s);
        stats += st;
    }
    samples.sort_by(|a, b| a.mean_pressure_pa.partial_cmp(&b.mean_pressure_pa).unwrap());
    Ok(ManifoldTrace {
        samples,
        inputs_at_s: t_s,
        stats,
    })
}

/// `max(‖du/dt‖∞, max_l |d(p_tail − p_head)/dt| / ε)` and the mean `dp/dt`.
fn fast_residual(model: &FullModel, params: &SystemParams, y: &[f64], sources: &[f64]) -> Result<(f64, f64), ModelError> {
    let n = model.n();
    let mut dy = vec![0.0; y.len()];
    model.rhs(y, sources, &mut dy)?;
    let mut r = dy[n..].iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for p in params.network.pipes() {
        r = r.max((dy[p.tail] - dy[p.head]).abs() / model.epsilon());
    }
    Ok((r, dy[..n].iter().sum::<f64>() / n as f64))
}

fn relax_to_manifold(
    params: &SystemParams,
    t_s: f64,
    target_pa: f64,
    opts: &TraceOptions,
) -> Result<(ManifoldSample, OdeStats), ModelError> {
    let model = FullModel::new(params);
    let refs = &params.refs;
    let n = model.n();
    let m = model.m();
    let sources = params.net_sources(t_s);
    let mut y = SystemState::uniform(target_pa / refs.pressure, n, m).to_vec();
    let ode = OdeOptions {
        rtol: 1e-11,
        atol: 1e-13,
        ..OdeOptions::default()
    };
    let chunk = 1.0;
    let t_max = opts.max_time_s / refs.time();
    let mut t = 0.0;
    let mut stats = OdeStats::default();
    let (mut residual, mut drift) = fast_residual(&model, params, &y, &sources)?;
    while residual >= opts.tol && t < t_max {
        y = dopri5(
            |_, y, dy| {
                model.rhs(y, &sources, dy)?;
                let mean = dy[..n].iter().sum::<f64>() / n as f64;
                dy[..n].iter_mut().for_each(|d| *d -= mean);
                Ok::<(), ModelError>(())
            },
            t,
            &y,
            t + chunk,
            &ode,
            &[],
            |_, _| {},
            &mut stats,
        )
        .map_err(|e| match e {
            OdeError::Rhs { source, .. } => source,
            OdeError::StepUnderflow { .. } => ModelError::BadEpsilon(model.epsilon()),
        })?;
        t += chunk;
        (residual, drift) = fast_residual(&model, params, &y, &sources)?;
    }
    let state = SystemState::from_slice(&y, n);
    let pressures_pa = state.pressures_pa(refs);
    Ok((
        ManifoldSample {
            mean_pressure_pa: pressures_pa.iter().sum::<f64>() / n as f64,
            pressures_pa,
            velocities_mps: state.velocities_mps(refs),
            converged: residual < opts.tol,
            residual,
            relax_time_s: t * refs.time(),
            drift_pa_per_s: drift * refs.pressure / refs.time(),
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner_limit::{build_inner, solve_equilibrium};
    use crate::lumped::Schedule;

    fn step_params(q: (f64, f64)) -> SystemParams {
        SystemParams::two_site_default()
            .with_schedules(
                vec![Schedule::constant(q.0), Schedule::constant(q.1)],
                vec![Schedule::constant(5e6); 2],
            )
            .unwrap()
    }

    #[test]
    fn two_site_block_pattern() {
        let sys = build_inner(&step_params((6e6, 4e6)), 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        let a = linearize(&sys, &eq);
        let g = sys.g[0];
        assert_eq!(a[(0, 0)], 0.0);
        assert_eq!(a[(0, 2)], -1.0 / g);
        assert_eq!(a[(1, 2)], 1.0 / g);
        assert_eq!(a[(2, 0)], 1.0 / sys.h[0]);
        assert_eq!(a[(2, 1)], -1.0 / sys.h[0]);
        assert!(a[(2, 2)] < 0.0);
        let ones = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert!((&a * ones).amax() <= 1e-12);
    }

    #[test]
    fn two_site_certified() {
        let sys = build_inner(&step_params((6e6, 4e6)), 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        let rep = nhim_certificate(&linearize(&sys, &eq), &eq, TOL_ZERO).unwrap();
        assert!(rep.certified, "{:?}", rep.reasons);
        assert_eq!(rep.eigenvalues.len(), 3);
        assert_eq!(rep.zero_count, 1);
        assert!(rep.transverse_stable);
        let v = rep.center_eigenvector.unwrap();
        assert!(v[2].abs() < 1e-12);
        for tol in [1e-10, 1e-6] {
            assert_eq!(nhim_certificate(&rep.a, &eq, tol).unwrap().zero_count, 1);
        }
    }

    #[test]
    fn zero_flow_is_not_certified() {
        let sys = build_inner(&step_params((5e6, 5e6)), 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        let a = linearize(&sys, &eq);
        assert_eq!(a[(2, 2)], 0.0);
        let rep = nhim_certificate(&a, &eq, TOL_ZERO).unwrap();
        assert!(!rep.df_nonsingular);
        assert!(!rep.certified);
        assert!(rep.reasons.iter().any(|r| r.contains("singular")));
    }

    #[test]
    fn eigenvalues_come_in_conjugate_pairs() {
        let sys = build_inner(&step_params((6e6, 4e6)), 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        let rep = nhim_certificate(&linearize(&sys, &eq), &eq, TOL_ZERO).unwrap();
        for l in rep.eigenvalues.iter().filter(|l| l.im.abs() > 1e-12) {
            assert!(rep.eigenvalues.iter().any(|k| (k - l.conj()).norm() < 1e-9));
        }
    }

    #[test]
    fn symmetric_manifold_is_at_rest() {
        let params = step_params((5e6, 5e6));
        let opts = TraceOptions {
            exec: Execution::Sequential,
            ..TraceOptions::default()
        };
        let tr = trace_manifold(&params, 0.0, (780e3, 820e3), 3, &opts).unwrap();
        assert_eq!(tr.samples.len(), 3);
        for s in &tr.samples {
            assert!(s.converged);
            assert!(s.velocities_mps[0].abs() < 1e-12);
            assert!((s.pressures_pa[0] - s.pressures_pa[1]).abs() < 1e-6);
        }
        assert!(tr.samples.windows(2).all(|w| w[0].mean_pressure_pa < w[1].mean_pressure_pa));
    }

    #[test]
    fn balanced_manifold_matches_inner_equilibrium() {
        let params = step_params((6e6, 4e6));
        let tr = trace_manifold(&params, 0.0, (800e3, 800e3), 1, &TraceOptions::default()).unwrap();
        let s = &tr.samples[0];
        assert!(s.converged, "residual {}", s.residual);
        let sys = build_inner(&params, 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        let u_inner = sys.velocity(0, eq.q_star[0]) * params.refs.velocity;
        // the inner limit is the leading-order approximation: O(ε) relative
        assert!((s.velocities_mps[0] - u_inner).abs() < 0.02 * u_inner);
        assert!(s.drift_pa_per_s.abs() < 50.0);
    }
}

//! Inner-limit (fast time scale, leading order) network model and its
//! equilibrium set.
//!
//! With `ψ` the first-order pressure correction per vertex and `q` the
//! leading-order volumetric flow per link,
//!
//! ```text
//! G dψ/dt = -R q + s
//! H dq/dt =  Rᵀ ψ - f(q),      f_l(q) = c_l q_l |q_l|
//! ```
//!
//! Equilibria satisfy `R q* = s` and `Rᵀ ψ* = f(q*)`. Because `1 ∈ Ker(Rᵀ)`
//! they form the line `{ψ₀ + c·1} × {q*}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lumped::{FullModel, ModelError, SystemParams};
use crate::network::null_space;

/// Newton iteration cap for the loop-flow solve.
pub const MAX_NEWTON_ITER: usize = 50;
/// `|q|` floor in the Newton Jacobian `2 c |q|`.
pub const JACOBIAN_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct InnerLimitSystem {
    /// Leading-order uniform pressure (dimensionless).
    pub p0: f64,
    /// Diagonal of `G`: `e_i(p0) / (h_c(p0) ρ_s(p0))`.
    pub g: Vec<f64>,
    /// Diagonal of `H`: `4 ρ_s(p0) L_l / (π d_l²)`.
    pub h: Vec<f64>,
    pub r: DMatrix<f64>,
    /// Source vector `(Q'_i - Q'_{Li}) / (h_c(p0) ρ_s(p0))`.
    pub s: Vec<f64>,
    /// Friction coefficients `8 λ_l L_l ρ_s(p0) / (π² d_l⁵)`.
    pub f_coeffs: Vec<f64>,
    /// Flow areas `π d_l² / 4`, mapping velocity to volumetric flow.
    pub area: Vec<f64>,
    /// `h_c(p0) ρ_s(p0)`.
    pub transport: f64,
    tails: Vec<usize>,
    heads: Vec<usize>,
    tree: Vec<(usize, usize)>,
}

impl InnerLimitSystem {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }

    /// `f(q)` componentwise.
    pub fn friction(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.f_coeffs)
            .map(|(q, c)| c * q * q.abs())
            .collect()
    }

    /// Diagonal of `Df(q)`: `2 c_l |q_l|`.
    pub fn friction_slope(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.f_coeffs)
            .map(|(q, c)| 2.0 * c * q.abs())
            .collect()
    }

    /// Replaces the source vector by `(Q' - Q'_L)/(h_c ρ_s)` for new inputs.
    pub fn set_sources(&mut self, net_sources: &[f64]) {
        self.s = net_sources.iter().map(|x| x / self.transport).collect();
    }

    /// Velocity of link `l` for volumetric flow `q_l`.
    pub fn velocity(&self, link: usize, q: f64) -> f64 {
        q / self.area[link]
    }
}

/// Builds the inner-limit system at uniform pressure `p0` with the inputs in
/// force at `t_s` (s).
pub fn build_inner(params: &SystemParams, p0: f64, t_s: f64) -> Result<InnerLimitSystem, ModelError> {
    let model = FullModel::new(params);
    let refs = &params.refs;
    let n = params.network.n_sites();
    let thermo: Vec<_> = (0..n)
        .map(|v| model.vertex_thermo(v, p0))
        .collect::<Result<_, _>>()?;
    let transport = thermo[0].transport;
    let rho = thermo[0].rho_s;
    let g = thermo.iter().map(|t| t.e / transport).collect();
    let mut h = Vec::new();
    let mut f_coeffs = Vec::new();
    let mut area = Vec::new();
    for pipe in params.network.pipes() {
        let d = pipe.params.diameter / refs.diameter;
        let len = pipe.params.length / refs.length;
        let lam = pipe.params.friction / refs.friction();
        h.push(4.0 * rho * len / (PI * d * d));
        f_coeffs.push(8.0 * lam * len * rho / (PI * PI * d.powi(5)));
        area.push(PI * d * d / 4.0);
    }
    let mut sys = InnerLimitSystem {
        p0,
        g,
        h,
        r: params.network.incidence_matrix(),
        s: Vec::new(),
        f_coeffs,
        area,
        transport,
        tails: params.network.pipes().iter().map(|p| p.tail).collect(),
        heads: params.network.pipes().iter().map(|p| p.head).collect(),
        tree: params.network.spanning_tree(),
    };
    sys.set_sources(&params.net_sources(t_s));
    Ok(sys)
}

/// `(dψ/dt, dq/dt)` of the inner-limit model.
pub fn rhs_inner(psi: &[f64], q: &[f64], sys: &InnerLimitSystem) -> (Vec<f64>, Vec<f64>) {
    let mut dpsi = sys.s.clone();
    let mut dq = sys.friction(q);
    dq.iter_mut().for_each(|x| *x = -*x);
    for (j, (&t, &hd)) in sys.tails.iter().zip(&sys.heads).enumerate() {
        dpsi[t] -= q[j];
        dpsi[hd] += q[j];
        dq[j] += psi[t] - psi[hd];
    }
    for (x, g) in dpsi.iter_mut().zip(&sys.g) {
        *x /= g;
    }
    for (x, h) in dq.iter_mut().zip(&sys.h) {
        *x /= h;
    }
    (dpsi, dq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatBalance {
    /// `1ᵀ s`.
    pub total_source: f64,
    /// `(Σ s_i) / (Σ G_ii)`: uniform drift of `ψ` when unbalanced.
    pub drift_rate: f64,
    pub balanced: bool,
}

/// Relative threshold on `|1ᵀs| / Σ|s_i|` below which inputs count as balanced.
pub const BALANCE_TOL: f64 = 1e-12;

pub fn check_heat_balance(sys: &InnerLimitSystem) -> HeatBalance {
    let total: f64 = sys.s.iter().sum();
    let scale: f64 = sys.s.iter().map(|x| x.abs()).sum();
    let balanced = total.abs() <= BALANCE_TOL * scale.max(f64::MIN_POSITIVE);
    HeatBalance {
        total_source: total,
        drift_rate: if balanced {
            0.0
        } else {
            total / sys.g.iter().sum::<f64>()
        },
        balanced,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("inputs are not balanced (sum of sources {total}); remove the uniform drift first")]
    Unbalanced { total: f64 },
    #[error("source vector is not in the image of R (residual {residual})")]
    Infeasible { residual: f64 },
    #[error("loop-flow Newton did not converge in {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// The line of equilibria `{ψ₀ + c·1} × {q*}`.
#[derive(Debug, Clone)]
pub struct EquilibriumSet {
    pub q_star: Vec<f64>,
    /// Mean-zero representative of the pressure corrections.
    pub psi0: Vec<f64>,
    pub kernel_direction: Vec<f64>,
    pub feasible: bool,
    /// `f` is strictly monotone, so `q*` is unique whenever it exists.
    pub unique: bool,
    pub newton_iterations: usize,
    /// `‖R q* - s‖∞`
    pub flow_residual: f64,
    /// `‖Rᵀ ψ₀ - f(q*)‖∞`
    pub tension_residual: f64,
}

impl EquilibriumSet {
    /// Member of the equilibrium line with gauge offset `c`.
    pub fn psi_at(&self, c: f64) -> Vec<f64> {
        self.psi0.iter().map(|p| p + c).collect()
    }
}

/// Particular solution of `R q = s` on a BFS spanning tree (chords carry 0).
fn tree_flows(sys: &InnerLimitSystem) -> Vec<f64> {
    let mut remaining = sys.s.clone();
    let mut q = vec![0.0; sys.m()];
    for &(w, j) in sys.tree.iter().rev() {
        // R_wj q_j must supply whatever the subtree below w still needs
        let (sign, p) = if sys.tails[j] == w {
            (1.0, sys.heads[j])
        } else {
            (-1.0, sys.tails[j])
        };
        q[j] = remaining[w] / sign;
        remaining[p] += sign * q[j];
        remaining[w] = 0.0;
    }
    q
}

fn inf_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Locates the equilibrium line. Requires balanced inputs (`1ᵀ s = 0`).
pub fn solve_equilibrium(sys: &InnerLimitSystem) -> Result<EquilibriumSet, EquilibriumError> {
    let balance = check_heat_balance(sys);
    if !balance.balanced {
        return Err(EquilibriumError::Unbalanced {
            total: balance.total_source,
        });
    }
    let r = &sys.r;
    let s = DVector::from_column_slice(&sys.s);
    let q_part = DVector::from_vec(tree_flows(sys));
    let s_scale = inf_norm(sys.s.iter().copied()).max(1.0);
    let part_res = inf_norm((r * &q_part - &s).iter().copied());
    if part_res > 1e-9 * s_scale {
        return Err(EquilibriumError::Infeasible { residual: part_res });
    }

    let (k, _, _, _, _) = null_space(r);
    let mut q = q_part.clone();
    let mut iterations = 0;
    if k.ncols() > 0 {
        // minimise Φ(z) = Σ c_l |q_l|³ / 3 over q = q_p + K z; ∇Φ = Kᵀ f(q)
        let potential = |q: &DVector<f64>| -> f64 {
            q.iter()
                .zip(&sys.f_coeffs)
                .map(|(q, c)| c * q.abs().powi(3) / 3.0)
                .sum()
        };
        let mut z = DVector::zeros(k.ncols());
        let mut last_residual = f64::INFINITY;
        loop {
            q = &q_part + &k * &z;
            let f = DVector::from_vec(sys.friction(q.as_slice()));
            let grad = k.transpose() * &f;
            let residual = inf_norm(grad.iter().copied());
            // scale-relative stop; a non-contracting step near the rounding floor also ends it
            let f_scale = f.amax().max(f64::MIN_POSITIVE);
            if residual <= 1e-13 * f_scale
                || (residual >= 0.5 * last_residual && residual <= 1e-10 * f_scale)
            {
                break;
            }
            last_residual = residual;
            if iterations >= MAX_NEWTON_ITER {
                return Err(EquilibriumError::NoConvergence {
                    iterations,
                    residual,
                });
            }
            iterations += 1;
            let slope: Vec<f64> = q
                .iter()
                .zip(&sys.f_coeffs)
                .map(|(q, c)| 2.0 * c * q.abs().max(JACOBIAN_FLOOR))
                .collect();
            let jac = k.transpose() * DMatrix::from_diagonal(&DVector::from_vec(slope)) * &k;
            let Some(step) = jac.cholesky().map(|c| c.solve(&grad)) else {
                return Err(EquilibriumError::NoConvergence {
                    iterations,
                    residual,
                });
            };
            let phi0 = potential(&q);
            let decrease = grad.dot(&step);
            let mut t = 1.0;
            loop {
                let trial = &z - &step * t;
                let qt = &q_part + &k * &trial;
                let phi = potential(&qt);
                // Φ differences drown in rounding near the optimum; a shrinking gradient also counts
                let grad_t = k.transpose() * DVector::from_vec(sys.friction(qt.as_slice()));
                if phi <= phi0 - 1e-4 * t * decrease
                    || inf_norm(grad_t.iter().copied()) < 0.5 * residual
                    || t < 1e-10
                {
                    z = trial;
                    break;
                }
                t *= 0.5;
            }
        }
    }

    let fq = DVector::from_vec(sys.friction(q.as_slice()));
    let rt = r.transpose();
    // normal equations R Rᵀ ψ = R f with the gauge fixed by the rank-one term 11ᵀ/n
    let n = sys.n();
    let lap = r * &rt + DMatrix::from_element(n, n, 1.0 / n as f64);
    let mut psi = lap
        .cholesky()
        .expect("graph Laplacian plus gauge term is positive definite for connected networks")
        .solve(&(r * &fq));
    let mean = psi.mean();
    psi.add_scalar_mut(-mean);
    let flow_residual = inf_norm((r * &q - &s).iter().copied());
    let tension_residual = inf_norm((&rt * &psi - &fq).iter().copied());
    Ok(EquilibriumSet {
        q_star: q.iter().copied().collect(),
        psi0: psi.iter().copied().collect(),
        kernel_direction: vec![1.0; sys.n()],
        feasible: flow_residual <= 1e-10 * s_scale && tension_residual <= 1e-8 * fq.amax().max(1.0),
        unique: true,
        newton_iterations: iterations,
        flow_residual,
        tension_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lumped::Schedule;
    use crate::network::{Network, PipeParams};
    use crate::thermo::BoilerParams;
    use std::sync::Arc;

    fn two_site(q1: f64, q2: f64) -> SystemParams {
        SystemParams::two_site_default()
            .with_schedules(
                vec![Schedule::constant(q1), Schedule::constant(q2)],
                vec![Schedule::constant(5e6); 2],
            )
            .unwrap()
    }

    pub(crate) fn triangle_params(heat: [f64; 3], loads: [f64; 3]) -> SystemParams {
        let mut net = Network::new();
        for id in ["a", "b", "c"] {
            net.add_site(id, BoilerParams::table_default());
        }
        net.add_pipe("ab", "a", "b", PipeParams::table_default());
        net.add_pipe("bc", "b", "c", PipeParams::table_default());
        net.add_pipe(
            "ac",
            "a",
            "c",
            PipeParams {
                length: 300.0,
                diameter: 0.25,
                friction: 0.02,
            },
        );
        SystemParams::new(
            net,
            Arc::new(crate::thermo::SaturationCurve::standard()),
            crate::lumped::ReferenceQuantities::table_default(),
            heat.iter().map(|v| Schedule::constant(*v)).collect(),
            loads.iter().map(|v| Schedule::constant(*v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_site_matrices() {
        let sys = build_inner(&two_site(5e6, 5e6), 1.0, 0.0).unwrap();
        assert_eq!(sys.g[0], sys.g[1]);
        // e ≈ 1.85, h_c ρ_s ≈ 10.6
        assert!((sys.g[0] - 1.847 / 10.65).abs() < 2e-3, "g = {}", sys.g[0]);
        assert!(sys.s.iter().all(|x| *x == 0.0));
        assert_eq!(sys.friction(&[0.0]), vec![0.0]);
        assert!(sys.h[0] > 0.0 && sys.f_coeffs[0] > 0.0);
    }

    #[test]
    fn gauge_shift_leaves_rhs_unchanged() {
        let sys = build_inner(&two_site(6e6, 4e6), 1.0, 0.0).unwrap();
        let (a, b) = rhs_inner(&[0.3, -0.1], &[0.05], &sys);
        let (c, d) = rhs_inner(&[10.3, 9.9], &[0.05], &sys);
        assert_eq!(a, c);
        for (x, y) in b.iter().zip(&d) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rest_state_with_sources() {
        let sys = build_inner(&two_site(6e6, 4e6), 1.0, 0.0).unwrap();
        let (dpsi, dq) = rhs_inner(&[0.0, 0.0], &[0.0], &sys);
        assert_eq!(dq, vec![0.0]);
        for i in 0..2 {
            assert!((dpsi[i] - sys.s[i] / sys.g[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn heat_balance_cases() {
        let b = check_heat_balance(&build_inner(&two_site(6e6, 4e6), 1.0, 0.0).unwrap());
        assert!(b.balanced);
        let b = check_heat_balance(&build_inner(&two_site(7e6, 4e6), 1.0, 0.0).unwrap());
        assert!(!b.balanced && b.drift_rate > 0.0);
        let b = check_heat_balance(&build_inner(&two_site(5e6, 5e6), 1.0, 0.0).unwrap());
        assert!(b.balanced && b.drift_rate == 0.0);
    }

    #[test]
    fn two_site_closed_form() {
        let sys = build_inner(&two_site(6e6, 4e6), 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        let sigma = sys.s[0];
        assert!(sigma > 0.0);
        assert!((eq.q_star[0] - sigma).abs() < 1e-14);
        let diff = eq.psi0[0] - eq.psi0[1];
        assert!((diff - sys.friction(&[sigma])[0]).abs() < 1e-12);
        assert!(eq.psi0.iter().sum::<f64>().abs() < 1e-14);
        let (dpsi, dq) = rhs_inner(&eq.psi0, &eq.q_star, &sys);
        assert!(inf_norm(dpsi.into_iter().chain(dq)) < 1e-12);
    }

    #[test]
    fn zero_sources_give_zero_equilibrium() {
        let sys = build_inner(&triangle_params([5e6; 3], [5e6; 3]), 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        assert!(inf_norm(eq.q_star.iter().copied()) < 1e-12);
        assert!(inf_norm(eq.psi0.iter().copied()) < 1e-12);
    }

    #[test]
    fn unbalanced_is_rejected() {
        let sys = build_inner(&two_site(7e6, 4e6), 1.0, 0.0).unwrap();
        assert!(matches!(
            solve_equilibrium(&sys),
            Err(EquilibriumError::Unbalanced { .. })
        ));
    }

    #[test]
    fn triangle_loop_newton_matches_grid_search() {
        let params = triangle_params([6e6, 4e6, 5e6], [5e6; 3]);
        let sys = build_inner(&params, 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        assert!(eq.flow_residual <= 1e-10);
        assert!(eq.tension_residual <= 1e-8);
        assert!(eq.newton_iterations > 0);

        // oracle: every solution of R q = s is q_p + z (1, 1, -1); scan z on a
        // 1e-3 grid for the smallest loop tension |Σ_loop ± f(q)|
        let s = &sys.s;
        let qp = [s[0], 0.0, -s[2]];
        let lim = 2.0 * s.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let mut best = (f64::INFINITY, 0.0);
        let steps = (2.0 * lim / 1e-3) as i64;
        for i in 0..=steps {
            let z = -lim + i as f64 * 1e-3;
            let q = [qp[0] + z, qp[1] + z, qp[2] - z];
            let f = sys.friction(&q);
            let loop_tension = (f[0] + f[1] - f[2]).abs();
            if loop_tension < best.0 {
                best = (loop_tension, z);
            }
        }
        let z = best.1;
        let grid_q = [qp[0] + z, qp[1] + z, qp[2] - z];
        for (a, b) in eq.q_star.iter().zip(grid_q) {
            assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
        }
    }
}

mod common;

use common::{balanced_params, random_network};
use nalgebra::DVector;
use proptest::prelude::*;
use steamnet::inner_limit::{build_inner, rhs_inner, solve_equilibrium};
use steamnet::network::{kirchhoff_matrix, subspace_analysis};
use steamnet::spectral::linearize;

fn parallel_to_ones(basis: &nalgebra::DMatrix<f64>) -> bool {
    if basis.ncols() != 1 {
        return false;
    }
    let v = basis.column(0);
    let n = v.len() as f64;
    v.iter().all(|x| (x.abs() - 1.0 / n.sqrt()).abs() < 1e-10) && v.iter().all(|x| x.signum() == v[0].signum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn incidence_subspaces(n in 2usize..14, chords in 0usize..8, seed in any::<u64>()) {
        let net = random_network(seed, n, chords);
        let m = net.n_pipes();
        let rep = subspace_analysis(&net.incidence_matrix());
        prop_assert_eq!(rep.ker_r.ncols() + n, m + 1);
        prop_assert_eq!(rep.rank, n - 1);
        prop_assert!(parallel_to_ones(&rep.ker_rt));
        prop_assert!(!rep.ambiguous);
    }

    #[test]
    fn kirchhoff_kernel_is_ones(n in 2usize..14, chords in 0usize..8, seed in any::<u64>(),
                                 w in proptest::collection::vec(0.01f64..100.0, 24)) {
        let net = random_network(seed, n, chords);
        let r = net.incidence_matrix();
        let k = kirchhoff_matrix(&r, &w[..net.n_pipes()]).unwrap();
        prop_assert!(parallel_to_ones(&subspace_analysis(&k).ker_r));
    }

    #[test]
    fn linearization_annihilates_gauge_direction(n in 2usize..10, chords in 0usize..5, seed in any::<u64>()) {
        let params = balanced_params(random_network(seed, n, chords), seed);
        let sys = build_inner(&params, 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        let a = linearize(&sys, &eq);
        let mut x = DVector::zeros(a.ncols());
        x.rows_mut(0, n).fill(1.0);
        prop_assert!((&a * x).amax() <= 1e-12);
    }

    #[test]
    fn equilibria_on_random_graphs(n in 2usize..10, chords in 0usize..5, seed in any::<u64>()) {
        let params = balanced_params(random_network(seed, n, chords), seed);
        let sys = build_inner(&params, 1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&sys).unwrap();
        prop_assert!(eq.feasible, "flow {:e} tension {:e} s {:?}", eq.flow_residual, eq.tension_residual, sys.s);
        prop_assert!(eq.flow_residual <= 1e-10);
        prop_assert!(eq.tension_residual <= 1e-8);
        prop_assert!(eq.psi0.iter().sum::<f64>().abs() <= 1e-10);
        let (dpsi, dq) = rhs_inner(&eq.psi0, &eq.q_star, &sys);
        let scale = sys.s.iter().map(|s| s.abs()).fold(1.0, f64::max);
        for (d, g) in dpsi.iter().zip(&sys.g) {
            prop_assert!((d * g).abs() <= 1e-10 * scale);
        }
        for (d, h) in dq.iter().zip(&sys.h) {
            prop_assert!((d * h).abs() <= 1e-8);
        }
    }

    #[test]
    fn gauge_invariance_and_aggregate_balance(n in 2usize..10, chords in 0usize..5, seed in any::<u64>(),
                                              c in -10.0f64..10.0) {
        let params = balanced_params(random_network(seed, n, chords), seed);
        let sys = build_inner(&params, 1.0, 0.0).unwrap();
        let psi: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let q: Vec<f64> = (0..sys.m()).map(|j| (j as f64 * 0.91).cos() * 0.1).collect();
        let (a, b) = rhs_inner(&psi, &q, &sys);
        let shifted: Vec<f64> = psi.iter().map(|p| p + c).collect();
        let (a2, b2) = rhs_inner(&shifted, &q, &sys);
        prop_assert_eq!(a.clone(), a2);
        for (x, y) in b.iter().zip(&b2) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        // 1ᵀG dψ/dt = 1ᵀs because 1ᵀR = 0
        let lhs: f64 = a.iter().zip(&sys.g).map(|(d, g)| d * g).sum();
        let rhs: f64 = sys.s.iter().sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }
}

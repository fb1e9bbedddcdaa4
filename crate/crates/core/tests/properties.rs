mod common;

use linx::diagonal::{check_uniform_optimality, solve_diagonal_linx, CaseTag};
use linx::exact::{exact_mesp, logdet_submatrix};
use linx::instance::{validate, Instance, Mask, SymMatrix};
use linx::linx::{
    linx_gradient, linx_objective, lmo_capped_simplex, solve_linx, FeasiblePoint, SolverOptions,
};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_gram, sorted_desc};

fn instance(seed: u64, n: usize, s: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    validate(random_gram(&mut rng, n, n), s).unwrap()
}

/// Random point of `P(n, s)` from a seed.
fn feasible(rng: &mut ChaCha8Rng, n: usize, s: usize) -> FeasiblePoint {
    // start at the uniform point and apply random mass-preserving swaps
    let mut x = vec![s as f64 / n as f64; n];
    for _ in 0..4 * n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let room = (1.0 - x[i]).min(x[j]);
        let t = rng.random_range(0.0..=1.0) * room;
        x[i] += t;
        x[j] -= t;
    }
    FeasiblePoint::new(x, s).unwrap()
}

fn n_and_s() -> impl Strategy<Value = (usize, usize)> {
    (3usize..=8).prop_flat_map(|n| (Just(n), 1..n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_decomposition_is_orthogonal_and_sorted(seed in any::<u64>(), (n, s) in n_and_s(), r in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = validate(random_gram(&mut rng, n, r.min(n)), s).unwrap();
        let q = inst.eigvecs();
        let err = (q.transpose() * q - nalgebra::DMatrix::identity(n, n)).amax();
        prop_assert!(err <= 1e-8);
        prop_assert!(inst.eigvals().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(inst.rank(), r.min(n));
    }

    #[test]
    fn exact_scaling_identity(seed in any::<u64>(), (n, s) in n_and_s(), lg in -2.0f64..2.0) {
        let gamma = lg.exp();
        let inst = instance(seed, n, s);
        let scaled = validate(inst.matrix().scaled(gamma), s).unwrap();
        let a = exact_mesp(&inst, s).unwrap().value;
        let b = exact_mesp(&scaled, s).unwrap().value - s as f64 * gamma.ln();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn objective_exact_on_binary_points(seed in any::<u64>(), (n, s) in n_and_s(), lg in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = validate(random_gram(&mut rng, n, n), s).unwrap();
        let mut subset = sample(&mut rng, n, s).into_vec();
        subset.sort_unstable();
        let exact = logdet_submatrix(inst.matrix(), &subset);
        prop_assume!(exact.is_finite());
        let v = linx_objective(&inst, &Mask::all_ones(n), lg.exp(), &FeasiblePoint::indicator(n, &subset)).unwrap();
        prop_assert!((v - exact).abs() <= 1e-9, "{} vs {}", v, exact);
    }

    #[test]
    fn objective_scaling_identity(seed in any::<u64>(), (n, s) in n_and_s(), lg in -2.0f64..2.0) {
        let gamma = lg.exp();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = validate(random_gram(&mut rng, n, n), s).unwrap();
        let x = feasible(&mut rng, n, s);
        let root = validate(inst.matrix().scaled(gamma.sqrt()), s).unwrap();
        let lhs = linx_objective(&inst, &Mask::all_ones(n), gamma, &x).unwrap();
        let rhs = linx_objective(&root, &Mask::all_ones(n), 1.0, &x).unwrap() - 0.5 * s as f64 * gamma.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn objective_concave(seed in any::<u64>(), (n, s) in n_and_s(), lam in 0.0f64..=1.0, masked in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = validate(random_gram(&mut rng, n, n), s).unwrap();
        let mask = if masked { Mask::identity(n) } else { Mask::all_ones(n) };
        let x = feasible(&mut rng, n, s);
        let y = feasible(&mut rng, n, s);
        let z: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let z = FeasiblePoint::new(z, s).unwrap();
        let f = |p: &FeasiblePoint| linx_objective(&inst, &mask, 1.0, p).unwrap();
        prop_assert!(f(&z) >= lam * f(&x) + (1.0 - lam) * f(&y) - 1e-10);
    }

    #[test]
    fn bound_dominates_exact(seed in any::<u64>(), (n, s) in n_and_s(), which in 0usize..3, masked in any::<bool>()) {
        let inst = instance(seed, n, s);
        let gamma = [0.25, 1.0, 4.0][which];
        let mask = if masked { Mask::identity(n) } else { Mask::all_ones(n) };
        let z = exact_mesp(&inst, s).unwrap().value;
        let v = solve_linx(&inst, s, &mask, gamma, &SolverOptions::default()).unwrap().value;
        prop_assert!(v >= z - 1e-8, "{} < {}", v, z);
    }

    #[test]
    fn diagonal_gradient_sign(d in prop::collection::vec(0.2f64..3.0, 3..8), seed in any::<u64>()) {
        let n = d.len();
        let s = n / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = feasible(&mut rng, n, s);
        let inst = validate(SymMatrix::from_diagonal(&d), s).unwrap();
        let g = linx_gradient(&inst, &Mask::all_ones(n), 1.0, &x).unwrap();
        for (gi, di) in g.iter().zip(&d) {
            prop_assert_eq!(gi.partial_cmp(&0.0), di.partial_cmp(&1.0));
        }
    }

    #[test]
    fn lmo_is_top_s(g in prop::collection::vec(-5.0f64..5.0, 2..12), frac in 0.0f64..1.0) {
        let n = g.len();
        let s = 1 + ((n - 1) as f64 * frac) as usize;
        let v = lmo_capped_simplex(&g, s.min(n));
        prop_assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), s.min(n));
        prop_assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
        let chosen_min = g.iter().zip(&v).filter(|(_, &x)| x == 1.0).map(|(a, _)| *a).fold(f64::INFINITY, f64::min);
        let other_max = g.iter().zip(&v).filter(|(_, &x)| x == 0.0).map(|(a, _)| *a).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(chosen_min >= other_max);
    }

    #[test]
    fn diagonal_solution_first_order(d in prop::collection::vec(0.2f64..3.0, 2..12), frac in 0.0f64..1.0) {
        let n = d.len();
        let s = 1 + ((n - 2) as f64 * frac) as usize;
        let sol = solve_diagonal_linx(&d, s).unwrap();
        let (ds, perm) = sorted_desc(&d);
        let xs: Vec<f64> = perm.iter().map(|&i| sol.x_hat.as_slice()[i]).collect();
        prop_assert!(check_uniform_optimality(&ds, s, &FeasiblePoint::new(xs, s).unwrap()));
        // a pivot is reported exactly when the sub-problem is interior
        match sol.pivot_value {
            Some(p) => prop_assert!(p > 0.0 && p < 1.0),
            None => prop_assert!(sol.case_tag != CaseTag::InteriorCase),
        }
    }
}

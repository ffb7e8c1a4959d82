//! Randomized invariance properties of the path index: refinement and
//! conjugation invariance, the loop shift law, the rotation staircase, and
//! concatenation across hyperbolic junctions.
//!
//! Endpoints the index implementation refuses (eigenvalue-1 crossings while
//! shrinking the stretch part) are discarded, not asserted around.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rfhkit::sympindex::{cz_index, j0, maslov_loop_index, rot, SymplecticPath};
use std::f64::consts::TAU;

const COUNT: usize = 361;

fn symmetric(n2: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n2, n2);
    let mut it = entries.iter().cycle();
    for i in 0..n2 {
        for j in i..n2 {
            let v = *it.next().unwrap();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// `exp(t·J₀S)` with `S` symmetric is a symplectic path from the identity.
fn generator(n: usize, entries: &[f64]) -> DMatrix<f64> {
    j0(n) * symmetric(2 * n, entries)
}

fn exp_path(n: usize, a: &DMatrix<f64>, count: usize) -> SymplecticPath {
    SymplecticPath::from_fn(n, count, |t| (a * t).exp()).unwrap()
}

fn entry_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, len..=len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn index_is_stable_under_refinement(
        n in 1usize..=2,
        entries in entry_strategy(10),
    ) {
        let a = generator(n, &entries);
        let results = [
            cz_index(&exp_path(n, &a, 181), true),
            cz_index(&exp_path(n, &a, 361), true),
            cz_index(&exp_path(n, &a, 721), true),
        ];
        prop_assume!(results.iter().all(|r| r.is_ok()));
        let [coarse, medium, fine] = results.map(|r| r.unwrap());
        prop_assert_eq!(coarse, medium);
        prop_assert_eq!(medium, fine);
    }

    #[test]
    fn index_is_invariant_under_symplectic_conjugation(
        n in 1usize..=2,
        entries in entry_strategy(10),
        conj_entries in entry_strategy(10),
    ) {
        let a = generator(n, &entries);
        let g = generator(n, &conj_entries).exp();
        let g_inv = g.clone().try_inverse().unwrap();
        let plain = exp_path(n, &a, COUNT);
        let conjugated =
            SymplecticPath::from_fn(n, COUNT, |t| &g_inv * (&a * t).exp() * &g).unwrap();
        let results = [cz_index(&plain, true), cz_index(&conjugated, true)];
        prop_assume!(results.iter().all(|r| r.is_ok()));
        let [base, conj] = results.map(|r| r.unwrap());
        prop_assert_eq!(conj, base);
    }

    #[test]
    fn prepending_a_loop_shifts_by_twice_its_winding(
        n in 1usize..=2,
        entries in entry_strategy(10),
        k in -3i64..=3,
    ) {
        let a = generator(n, &entries);
        let base = exp_path(n, &a, 721);
        let product = SymplecticPath::from_fn(n, 721, |t| {
            rot(n, TAU * k as f64 * t) * (&a * t).exp()
        })
        .unwrap();
        let loop_path = SymplecticPath::from_fn(n, 721, |t| rot(n, TAU * k as f64 * t)).unwrap();
        prop_assert_eq!(maslov_loop_index(&loop_path).unwrap(), n as i64 * k);
        let results = [cz_index(&base, true), cz_index(&product, true)];
        prop_assume!(results.iter().all(|r| r.is_ok()));
        let [plain, shifted] = results.map(|r| r.unwrap());
        prop_assert_eq!(shifted, plain + 2 * n as i64 * k);
    }

    #[test]
    fn planar_rotation_index_follows_the_odd_staircase(theta in -15.0f64..15.0) {
        let winding = theta / TAU;
        prop_assume!((winding - winding.round()).abs() > 0.03);
        let path = SymplecticPath::from_fn(1, 512, |t| rot(1, theta * t)).unwrap();
        prop_assert_eq!(
            cz_index(&path, false).unwrap(),
            2 * winding.floor() as i64 + 1
        );
    }

    #[test]
    fn concatenation_is_additive_across_hyperbolic_junctions(
        lambda in 1.3f64..4.0,
        theta in 0.3f64..6.0,
    ) {
        let winding = theta / TAU;
        prop_assume!((winding - winding.round()).abs() > 0.03);
        let stretch = SymplecticPath::from_fn(1, 256, |t| {
            DMatrix::from_diagonal(&nalgebra::dvector![
                lambda.powf(t),
                lambda.powf(-t)
            ])
        })
        .unwrap();
        let turn = SymplecticPath::from_fn(1, 512, |t| rot(1, theta * t)).unwrap();
        let joined = stretch.concat(&turn).unwrap();
        let results = [
            cz_index(&stretch, false),
            cz_index(&turn, false),
            cz_index(&joined, false),
        ];
        prop_assume!(results.iter().all(|r| r.is_ok()));
        let [first, second, total] = results.map(|r| r.unwrap());
        prop_assert_eq!(total, first + second);
    }

    #[test]
    fn degenerate_flag_agrees_at_nondegenerate_endpoints(
        n in 1usize..=2,
        entries in entry_strategy(10),
    ) {
        let a = generator(n, &entries);
        let path = exp_path(n, &a, COUNT);
        let gap = (path.endpoint() - DMatrix::<f64>::identity(2 * n, 2 * n))
            .determinant()
            .abs();
        prop_assume!(gap > 1e-3);
        let results = [cz_index(&path, true), cz_index(&path, false)];
        prop_assume!(results.iter().all(|r| r.is_ok()));
        let [averaged, direct] = results.map(|r| r.unwrap());
        prop_assert_eq!(averaged, direct);
    }
}

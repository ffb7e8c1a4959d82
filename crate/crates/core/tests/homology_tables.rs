//! Cross-checks of the periodic pearl complexes: full homology tables over a
//! grid of dimensions and covering orders, brute-force verification of the
//! quotient windows, and the vanishing of the unquotiented ladder interior.

use rfhkit::mbhomology::{
    ladder_all_ones, ladder_cyclic, rfh_lens_homology, rfh_sphere_complex,
    rfh_sphere_complex_even_linking, rope_ladder_complex, RfhSphereSpec,
};
use rfhkit::z2complex::DegreeAction;

fn cyclic_shift_action(n: usize, m: usize) -> DegreeAction {
    let perm: Vec<usize> = (0..m).map(|i| (i + 1) % m).collect();
    DegreeAction::uniform(m, 0..=(2 * n as i64 - 1), perm)
}

#[test]
fn lens_homology_grid() {
    for n in [2usize, 3] {
        for m in 1..=6usize {
            let spec = RfhSphereSpec::standard(n, m);
            let dims = rfh_lens_homology(&spec).unwrap();
            let degrees: Vec<i64> = dims.keys().copied().collect();
            assert_eq!(degrees, (0..2 * n as i64).collect::<Vec<_>>(), "n={n} m={m}");
            let expected = if m % 2 == 0 { 1 } else { 0 };
            for (&k, &d) in &dims {
                assert_eq!(d, expected, "n={n} m={m} degree {k}");
            }
        }
    }
}

#[test]
fn quotient_window_agrees_with_bruteforce() {
    for (n, m) in [(2usize, 2usize), (2, 3), (2, 5)] {
        let ladder = rope_ladder_complex(n, m).unwrap();
        let quotient = ladder.quotient_by_action(&cyclic_shift_action(n, m)).unwrap();
        // One generator per degree, so a three-period window stays under the
        // brute-force cap.
        let window = quotient.assemble_window(-1, 1);
        assert_eq!(
            window.homology_dims_bruteforce().unwrap(),
            window.homology_dims(),
            "n={n} m={m}"
        );
    }
}

#[test]
fn unquotiented_ladder_interior_vanishes() {
    for n in [2usize, 3] {
        for m in 1..=4usize {
            let ladder = rope_ladder_complex(n, m).unwrap();
            let period = 2 * n as i64;
            let dims = ladder.periodic_homology_dims(-period, 2 * period - 1).unwrap();
            for (&k, &d) in &dims {
                assert_eq!(d, 0, "n={n} m={m} degree {k}");
            }
        }
    }
}

#[test]
fn even_linking_control_leaves_classes_at_pearl_ends() {
    for n in [2usize, 3] {
        for m in [1usize, 2, 4] {
            let spec = RfhSphereSpec::standard(n, m);
            let complex = rfh_sphere_complex_even_linking(&spec).unwrap();
            let period = 2 * n as i64;
            let dims = complex.periodic_homology_dims(-period, 2 * period - 1).unwrap();
            assert!(dims.len() >= 2 * period as usize, "n={n} m={m}");
            for (&k, &d) in &dims {
                let r = k.rem_euclid(period);
                let expected = usize::from(r == 0 || r == period - 1);
                assert_eq!(d, expected, "n={n} m={m} degree {k}");
            }
        }
    }
}

#[test]
fn pearl_window_has_generators_only_at_period_ends() {
    let spec = RfhSphereSpec::standard(3, 2);
    let complex = rfh_sphere_complex(&spec).unwrap();
    let window = complex.assemble_window(0, 2);
    for k in window.lo()..=window.hi() {
        let r = k.rem_euclid(6);
        let expected = usize::from(r == 0 || r == 5);
        assert_eq!(window.dim(k), expected, "degree {k}");
    }
}

#[test]
fn ladder_matrices_compose_to_zero_for_larger_orders() {
    for m in 1..=16usize {
        let a = ladder_cyclic(m);
        let ones = ladder_all_ones(m);
        assert!(a.mul(&ones).is_zero(), "m={m}");
        assert!(ones.mul(&a).is_zero(), "m={m}");
        assert_eq!(a.rank(), m - 1, "m={m}");
        assert_eq!(ones.rank(), 1, "m={m}");
        // Exactness of the two-periodic ladder column: im ∂ = ker ∂ in both
        // orders, which is what kills the interior homology.
        assert_eq!(a.rank() + ones.rank(), m, "m={m}");
    }
}

#[test]
fn exponent_twists_do_not_change_the_table() {
    // Coprime exponents are absorbed by an equivariant relabelling, so the
    // quotient table only depends on (n, m).
    for (m, exps) in [(2usize, vec![1i64, 3]), (4, vec![1, -1]), (5, vec![2, 3])] {
        let spec = RfhSphereSpec { n: 2, m, exponents: exps };
        let dims = rfh_lens_homology(&spec).unwrap();
        let expected = if m % 2 == 0 { 1 } else { 0 };
        assert!(dims.values().all(|&d| d == expected), "m={m}");
    }
}

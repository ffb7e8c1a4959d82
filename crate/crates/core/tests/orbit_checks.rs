//! End-to-end checks for twisted-orbit shooting: spectrum membership,
//! period–action equality, monodromy kernels, deck indices, and solver
//! convergence quality.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfhkit::hamflow::{build_defining_hamiltonian, bumpy_radius, round_sphere, HamiltonianModel};
use rfhkit::twistorbit::{
    monodromy_kernel, monodromy_kernel_level, shoot, shoot_level_set, spectrum_sphere,
    tangent_basis, OrbitReport, TwistSpec,
};

fn random_near_sphere(rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0f64));
    while x.norm() < 1e-3 {
        x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0f64));
    }
    let scale = rng.gen_range(0.96..1.04f64) / x.norm();
    x * scale
}

#[test]
fn twisted_shooting_hits_spectrum_with_period_action() {
    let surf = round_sphere(2, 1.0);
    let tw = TwistSpec::rotation(2, &[1, 1]).unwrap();
    let spectrum = spectrum_sphere(2, -4..=6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..8 {
        let seed_x = random_near_sphere(&mut rng);
        let seed_tau = rng.gen_range(0.8..5.5f64);
        let orbit = shoot(&surf, &tw, &seed_x, seed_tau)
            .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        let dist = spectrum
            .iter()
            .map(|t| (orbit.tau - t).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(dist < 1e-8, "trial {trial}: tau = {} off-spectrum", orbit.tau);
        assert!(orbit.residual < 1e-9, "trial {trial}");
        assert!((orbit.action - orbit.tau).abs() < 1e-6, "trial {trial}");
        assert!(surf.base().h(&orbit.x0).abs() < 1e-9, "trial {trial}");
    }
}

#[test]
fn newton_residuals_decrease_quadratically() {
    let surf = round_sphere(2, 1.0);
    let tw = TwistSpec::rotation(2, &[1, 1]).unwrap();
    let seed = DVector::from_row_slice(&[0.71, 0.18, 0.52, 0.31]);
    let seed = &seed / seed.norm() * 1.02;
    let orbit = shoot(&surf, &tw, &seed, 1.3).unwrap();
    let rs = &orbit.newton_residuals;
    assert!(rs.len() >= 3, "history too short: {rs:?}");
    let (a, b, c) = (rs[rs.len() - 3], rs[rs.len() - 2], rs[rs.len() - 1]);
    // Quadratic contraction from the penultimate pair, slack factor 10.
    assert!(
        c <= 10.0 * b * b * b / (a * a) + 1e-13,
        "no quadratic tail: {rs:?}"
    );
}

#[test]
fn reeb_direction_lies_in_monodromy_kernel() {
    let surf = round_sphere(2, 1.0);
    let tw = TwistSpec::rotation(2, &[1, 1]).unwrap();
    let seed = DVector::from_row_slice(&[0.3, -0.75, 0.5, 0.32]);
    let seed = &seed / seed.norm();
    let orbit = shoot(&surf, &tw, &seed, 1.5).unwrap();
    let (kd, m) = monodromy_kernel(&surf, &tw, &orbit.x0, orbit.tau).unwrap();
    assert_eq!(kd, 3);
    let basis = tangent_basis(&surf.base().grad(&orbit.x0));
    let mut v = basis.transpose() * surf.base().hamiltonian_vector_field(&orbit.x0);
    v /= v.norm();
    let moved = &m * &v - &v;
    assert!(moved.norm() < 1e-6, "Reeb direction moved by {}", moved.norm());
}

#[test]
fn orbit_report_deck_and_symmetry() {
    let surf = round_sphere(2, 1.0);
    let tw = TwistSpec::rotation(3, &[1, 1]).unwrap();
    let seed = DVector::from_row_slice(&[0.77, 0.2, -0.5, 0.35]);
    let seed = &seed / seed.norm() * 0.99;
    let report = OrbitReport::from_surface(&surf, &tw, &seed, 2.0, None).unwrap();
    assert!((report.orbit.tau - 2.0 * PI / 3.0).abs() < 1e-9);
    assert_eq!(report.deck_index, 1);
    assert_eq!(report.kernel_dim, 3);

    // The twist maps solutions to solutions with the same period.
    let x1 = tw.apply(&report.orbit.x0);
    let end = surf.flow_endpoint(&x1, report.orbit.tau).unwrap();
    assert!((end - tw.apply(&x1)).norm() < 1e-9);

    let summary = report.summary();
    let js = serde_json::to_string(&summary).unwrap();
    let back: rfhkit::twistorbit::OrbitSummary = serde_json::from_str(&js).unwrap();
    assert_eq!(summary, back);
}

#[test]
fn constant_orbit_report_is_trivial() {
    let surf = round_sphere(2, 1.0);
    let tw = TwistSpec::rotation(2, &[1, 0]).unwrap();
    let seed = DVector::from_row_slice(&[0.0, 0.998, 0.0, 0.03]);
    let report = OrbitReport::from_surface(&surf, &tw, &seed, 0.0, None).unwrap();
    assert!(report.orbit.tau.abs() < 1e-9);
    assert!(report.orbit.action.abs() < 1e-9);
    assert_eq!(report.deck_index, 0);
    assert_eq!(report.kernel_dim, 1);
}

#[test]
fn untwisted_orbit_on_bumpy_star_surface() {
    // Rotation-invariant star-shaped surface; the z₁ circle has radius
    // ρ₁ = 1.1 and the full orbit closes at τ = π·ρ₁².
    let surf = build_defining_hamiltonian(2, bumpy_radius(1.0, vec![0.1, -0.05]), 1.0).unwrap();
    let tw = TwistSpec::identity(4);
    let rho1 = 1.1f64;
    let seed = DVector::from_row_slice(&[rho1 * 0.999, 0.01, 0.02, -0.01]);
    let orbit = shoot(&surf, &tw, &seed, 3.7).unwrap();
    assert!(orbit.residual < 1e-9);
    assert!(surf.base().h(&orbit.x0).abs() < 1e-9);
    assert!((orbit.tau - PI * rho1 * rho1).abs() < 1e-6, "tau = {}", orbit.tau);
    assert!((orbit.action - orbit.tau).abs() < 1e-6);
}

#[test]
fn ellipsoid_short_orbit_and_kernel() {
    let a1 = 1.0f64;
    let a2 = 1.2720196495140690f64; // a₂² = golden ratio, incommensurate axes
    let model = HamiltonianModel::ellipsoid(&[a1, a2]);
    let tw = TwistSpec::identity(4);
    let seed = DVector::from_row_slice(&[1.01 * a1, 0.01, 0.015, -0.01]);
    let orbit = shoot_level_set(&model, &tw, &seed, 3.0).unwrap();
    assert!((orbit.tau - PI * a1 * a1).abs() < 1e-8, "tau = {}", orbit.tau);
    assert!(orbit.residual < 1e-9);
    assert!((orbit.action - orbit.tau).abs() < 1e-6);
    let (kd, _) = monodromy_kernel_level(&model, &tw, &orbit.x0, orbit.tau).unwrap();
    assert_eq!(kd, 1);
}

#[test]
fn monodromy_restriction_matrix_shape() {
    let surf = round_sphere(2, 1.0);
    let tw = TwistSpec::rotation(2, &[1, 1]).unwrap();
    let x0 = DVector::from_row_slice(&[0.6, 0.0, 0.8, 0.0]);
    let (_, m) = monodromy_kernel(&surf, &tw, &x0, PI / 2.0).unwrap();
    assert_eq!((m.nrows(), m.ncols()), (3, 3));
    assert!((m - DMatrix::identity(3, 3)).amax() < 1e-5);
}

//! Twisted closed characteristics: finite-order phase-space twists, Newton
//! shooting with a phase condition, monodromy kernels, deck-index lifting of
//! quotient loops, and closed-form magnetic and displacement-energy checks.
//!
//! A `φ`-twisted orbit of period `τ` is a point `x` on the energy surface with
//! `φ^R_τ(x) = φ(x)`; for `φ = id` these are ordinary closed characteristics.

use std::f64::consts::PI;
use std::ops::RangeInclusive;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamflow::{
    closed_flow_magnetic_torus, lambda_form, rotation_block, FlowError, HamiltonianModel,
    HypersurfaceModel, Trajectory,
};
use crate::sympindex::{cz_index, rot, SymplecticPath, SympError};
use crate::tolerances::{
    FD_STEP, KERNEL_TOL, PINV_TRUNC, SHOOT_MAX_ITER, SHOOT_TOL, TOL_MAGNETIC,
};

pub type StateMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type StateJacobian = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Seeds must start within this energy window of the surface.
const SEED_ENERGY_WINDOW: f64 = 0.1;
/// Samples stored for a converged orbit trajectory.
const TRAJ_STEPS: usize = 2000;
/// Distance ties below this are resolved by point coincidence when lifting.
const LIFT_TIE_TOL: f64 = 1e-12;
/// Candidate preimages closer than this count as the same geometric point.
const LIFT_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("twist order must be at least 1")]
    BadOrder,
    #[error("twist needs at least one rotation exponent")]
    NoExponents,
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("map is not periodic of the declared order (defect {0:.3e})")]
    NotPeriodic(f64),
    #[error("seed energy {0:.3e} is outside the shooting window")]
    SeedOffSurface(f64),
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("empty sample list")]
    EmptyLoop,
    #[error("loop samples too coarse for unambiguous lifting at index {0}")]
    SamplesTooCoarse(usize),
    #[error("nearest preimage is ambiguous at index {0}")]
    AmbiguousLift(usize),
    #[error("shape parameter must be positive, got {0}")]
    BadShapeParameter(f64),
    #[error("period interval is reversed: {lo} > {hi}")]
    ReversedInterval { lo: f64, hi: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Index(#[from] SympError),
}

/// Finite-order symplectomorphism of phase space, with its Jacobian.
#[derive(Clone)]
pub struct TwistSpec {
    dim: usize,
    order: usize,
    map: StateMap,
    jac: StateJacobian,
}

impl TwistSpec {
    /// Wraps a map after checking `φ^order = id` on a deterministic probe set.
    pub fn from_parts(
        dim: usize,
        order: usize,
        map: StateMap,
        jac: StateJacobian,
    ) -> Result<Self, OrbitError> {
        if order == 0 {
            return Err(OrbitError::BadOrder);
        }
        let spec = TwistSpec {
            dim,
            order,
            map,
            jac,
        };
        let mut worst: f64 = 0.0;
        for k in 0..8 {
            let mut x = DVector::from_fn(dim, |i, _| ((k * (i + 2) + i) as f64 + 0.3).sin());
            x /= x.norm();
            let y = spec.iterate(&x, order);
            worst = worst.max((&y - &x).amax());
        }
        if worst > 1e-8 {
            return Err(OrbitError::NotPeriodic(worst));
        }
        Ok(spec)
    }

    /// Identity twist (untwisted orbits).
    pub fn identity(dim: usize) -> Self {
        TwistSpec {
            dim,
            order: 1,
            map: Arc::new(|x: &DVector<f64>| x.clone()),
            jac: Arc::new(|x: &DVector<f64>| DMatrix::identity(x.len(), x.len())),
        }
    }

    /// Diagonal rotation `z_j ↦ e^{2πi k_j/m} z_j`; linear, so it preserves
    /// the primitive one-form exactly.
    pub fn rotation(order: usize, exponents: &[i64]) -> Result<Self, OrbitError> {
        if order == 0 {
            return Err(OrbitError::BadOrder);
        }
        if exponents.is_empty() {
            return Err(OrbitError::NoExponents);
        }
        let angles: Vec<f64> = exponents
            .iter()
            .map(|k| 2.0 * PI * *k as f64 / order as f64)
            .collect();
        let mat = rotation_block(&angles);
        let mat_jac = mat.clone();
        Self::from_parts(
            2 * exponents.len(),
            order,
            Arc::new(move |x: &DVector<f64>| &mat * x),
            Arc::new(move |_: &DVector<f64>| mat_jac.clone()),
        )
    }

    /// Cotangent lift of the quarter-turn isometry `ψ(q₁,q₂) = (q₂,-q₁)` of
    /// the 2-torus: `(q,p) ↦ (ψq, (Dψ⁻¹)ᵀ p)`, order 4.
    pub fn torus_quarter_turn() -> Self {
        let map: StateMap = Arc::new(|x: &DVector<f64>| {
            DVector::from_row_slice(&[x[1], -x[0], x[3], -x[2]])
        });
        let jac: StateJacobian = Arc::new(|_: &DVector<f64>| {
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0, 1.0, 0.0, 0.0, //
                    -1.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0, //
                    0.0, 0.0, -1.0, 0.0,
                ],
            )
        });
        Self::from_parts(4, 4, map, jac).expect("exact quarter turn")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.map)(x)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.jac)(x)
    }

    /// `φ^k(x)` by iterated application; `k` is reduced mod the order.
    pub fn apply_power(&self, x: &DVector<f64>, k: usize) -> DVector<f64> {
        self.iterate(x, k % self.order.max(1))
    }

    /// `φ^k(x)` with no order reduction.
    fn iterate(&self, x: &DVector<f64>, k: usize) -> DVector<f64> {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.apply(&y);
        }
        y
    }
}

/// Converged twisted orbit with solver diagnostics.
#[derive(Debug, Clone)]
pub struct TwistedOrbit {
    pub x0: DVector<f64>,
    pub tau: f64,
    /// `‖φ^R_τ(x0) − φ(x0)‖` at the accepted solution.
    pub residual: f64,
    /// `∫ γ*λ` along the stored trajectory.
    pub action: f64,
    pub trajectory: Trajectory,
    /// Newton residual norms, one per iterate including the accepted one.
    pub newton_residuals: Vec<f64>,
    /// Numerical rank of the last shooting Jacobian.
    pub jacobian_rank: usize,
}

/// Orbit plus its linearized invariants.
#[derive(Debug, Clone)]
pub struct OrbitReport {
    pub orbit: TwistedOrbit,
    pub kernel_dim: usize,
    pub cz_index: Option<i64>,
    pub deck_index: usize,
}

/// Flat serialization of an [`OrbitReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub x0: Vec<f64>,
    pub tau: f64,
    pub residual: f64,
    pub action: f64,
    pub kernel_dim: usize,
    pub deck_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cz_index: Option<i64>,
}

impl OrbitReport {
    /// Shoots and assembles kernel dimension and deck index on a star-shaped
    /// surface.
    pub fn from_surface(
        surface: &HypersurfaceModel,
        twist: &TwistSpec,
        seed_x: &DVector<f64>,
        seed_tau: f64,
        cz_index: Option<i64>,
    ) -> Result<Self, OrbitError> {
        let orbit = shoot(surface, twist, seed_x, seed_tau)?;
        let (kernel_dim, _) = monodromy_kernel(surface, twist, &orbit.x0, orbit.tau)?;
        let deck_index = deck_of_trajectory(&orbit.trajectory, twist)?;
        Ok(OrbitReport {
            orbit,
            kernel_dim,
            cz_index,
            deck_index,
        })
    }

    pub fn summary(&self) -> OrbitSummary {
        OrbitSummary {
            x0: self.orbit.x0.iter().copied().collect(),
            tau: self.orbit.tau,
            residual: self.orbit.residual,
            action: self.orbit.action,
            kernel_dim: self.kernel_dim,
            deck_index: self.deck_index,
            cz_index: self.cz_index,
        }
    }
}

/// Default RK4 step for level-set flows of signed duration `t`.
fn level_step(t: f64) -> f64 {
    t.abs().max(0.5) / 2000.0
}

/// Newton shooting for `F(x,τ) = (φ^R_τ(x) − φ(x), H(x), ⟨x − x_seed, R_seed⟩)`
/// with a truncated-SVD (minimum-norm) step and backtracking.
fn newton_shoot<F>(
    model: &HamiltonianModel,
    flow: F,
    twist: &TwistSpec,
    seed_x: &DVector<f64>,
    seed_tau: f64,
) -> Result<(DVector<f64>, f64, Vec<f64>, usize), OrbitError>
where
    F: Fn(&DVector<f64>, f64) -> Result<DVector<f64>, FlowError>,
{
    let dim = model.dim();
    if twist.dim() != dim || seed_x.len() != dim {
        return Err(OrbitError::DimensionMismatch {
            expected: dim,
            got: seed_x.len(),
        });
    }
    let h_seed = model.h(seed_x);
    if h_seed.abs() >= SEED_ENERGY_WINDOW {
        return Err(OrbitError::SeedOffSurface(h_seed));
    }
    let r_seed = model.hamiltonian_vector_field(seed_x);

    let f_eval = |x: &DVector<f64>, tau: f64| -> Result<DVector<f64>, FlowError> {
        let end = flow(x, tau)?;
        let img = twist.apply(x);
        let mut f = DVector::zeros(dim + 2);
        f.rows_mut(0, dim).copy_from(&(end - img));
        f[dim] = model.h(x);
        f[dim + 1] = (x - seed_x).dot(&r_seed);
        Ok(f)
    };

    let mut x = seed_x.clone();
    let mut tau = seed_tau;
    let mut residuals = Vec::new();
    let mut rank = dim + 1;
    let mut f = f_eval(&x, tau)?;
    for iter in 0..SHOOT_MAX_ITER {
        let f_norm = f.norm();
        residuals.push(f_norm);
        if f_norm < SHOOT_TOL {
            return Ok((x, tau, residuals, rank));
        }

        let mut jac = DMatrix::zeros(dim + 2, dim + 1);
        let step = FD_STEP * (1.0 + x.amax());
        for i in 0..dim {
            let mut fwd = x.clone();
            let mut bwd = x.clone();
            fwd[i] += step;
            bwd[i] -= step;
            let col = (f_eval(&fwd, tau)? - f_eval(&bwd, tau)?) / (2.0 * step);
            jac.column_mut(i).copy_from(&col);
        }
        // ∂F/∂τ = X_H at the flow endpoint; the energy and phase rows do not
        // depend on τ.
        let end = flow(&x, tau)?;
        jac.view_mut((0, dim), (dim, 1))
            .copy_from(&model.hamiltonian_vector_field(&end));

        let svd = jac.svd(true, true);
        rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > PINV_TRUNC)
            .count();
        let delta = svd
            .solve(&(-&f), PINV_TRUNC)
            .map_err(|_| OrbitError::NoConvergence {
                iterations: iter,
                residual: f_norm,
            })?;

        let mut alpha = 1.0f64;
        let mut accepted = false;
        for _ in 0..30 {
            let x_try = &x + alpha * delta.rows(0, dim);
            let tau_try = tau + alpha * delta[dim];
            if let Ok(f_try) = f_eval(&x_try, tau_try) {
                if f_try.norm() < (1.0 - 1e-4 * alpha) * f_norm {
                    x = x_try;
                    tau = tau_try;
                    f = f_try;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(OrbitError::NoConvergence {
                iterations: iter,
                residual: f_norm,
            });
        }
    }
    Err(OrbitError::NoConvergence {
        iterations: SHOOT_MAX_ITER,
        residual: f.norm(),
    })
}

/// Shoots for a twisted orbit on a star-shaped surface, using its closed-form
/// flow when available.
pub fn shoot(
    surface: &HypersurfaceModel,
    twist: &TwistSpec,
    seed_x: &DVector<f64>,
    seed_tau: f64,
) -> Result<TwistedOrbit, OrbitError> {
    let model = surface.base();
    let (x, tau, residuals, rank) = newton_shoot(
        model,
        |x, t| surface.flow_endpoint(x, t),
        twist,
        seed_x,
        seed_tau,
    )?;
    let trajectory = surface.flow_trajectory(&x, tau, TRAJ_STEPS)?;
    finish_orbit(model, twist, x, tau, trajectory, residuals, rank)
}

/// Shoots on the zero level set of an arbitrary model via RK4.
pub fn shoot_level_set(
    model: &HamiltonianModel,
    twist: &TwistSpec,
    seed_x: &DVector<f64>,
    seed_tau: f64,
) -> Result<TwistedOrbit, OrbitError> {
    let (x, tau, residuals, rank) = newton_shoot(
        model,
        |x, t| model.flow_map(x, t, level_step(t)),
        twist,
        seed_x,
        seed_tau,
    )?;
    let trajectory = if tau == 0.0 {
        Trajectory {
            times: vec![0.0],
            states: vec![x.clone()],
            energy_drift: 0.0,
        }
    } else {
        model.flow(&x, tau, tau.abs() / TRAJ_STEPS as f64)?
    };
    finish_orbit(model, twist, x, tau, trajectory, residuals, rank)
}

fn finish_orbit(
    model: &HamiltonianModel,
    twist: &TwistSpec,
    x: DVector<f64>,
    tau: f64,
    trajectory: Trajectory,
    newton_residuals: Vec<f64>,
    jacobian_rank: usize,
) -> Result<TwistedOrbit, OrbitError> {
    let residual = (trajectory.endpoint() - twist.apply(&x)).norm();
    let action = action_value(&trajectory, model);
    Ok(TwistedOrbit {
        x0: x,
        tau,
        residual,
        action,
        trajectory,
        newton_residuals,
        jacobian_rank,
    })
}

/// `∫ γ*λ` by trapezoidal quadrature of `λ(X_H)` along the trajectory; for a
/// Reeb-normalized surface this equals the period.
pub fn action_value(traj: &Trajectory, model: &HamiltonianModel) -> f64 {
    if traj.states.len() < 2 {
        return 0.0;
    }
    let f: Vec<f64> = traj
        .states
        .iter()
        .map(|x| lambda_form(x, &model.hamiltonian_vector_field(x)))
        .collect();
    let mut acc = 0.0;
    for i in 0..f.len() - 1 {
        acc += 0.5 * (f[i] + f[i + 1]) * (traj.times[i + 1] - traj.times[i]);
    }
    acc
}

/// Twisted periods on the round sphere: `τ_k = (π/m)(mk − 1)`.
pub fn spectrum_sphere(m: usize, ks: RangeInclusive<i64>) -> Result<Vec<f64>, OrbitError> {
    if m == 0 {
        return Err(OrbitError::BadOrder);
    }
    Ok(ks
        .map(|k| PI / m as f64 * (m as f64 * k as f64 - 1.0))
        .collect())
}

/// Orthonormal basis of the hyperplane orthogonal to `grad`, as columns;
/// the frame in which restricted monodromies are expressed.
pub fn tangent_basis(grad: &DVector<f64>) -> DMatrix<f64> {
    let dim = grad.len();
    let nhat = grad / grad.norm();
    let skip = nhat.iamax();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(dim - 1);
    for i in 0..dim {
        if i == skip {
            continue;
        }
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v -= &nhat * nhat[i];
        for b in &cols {
            let c = b.dot(&v);
            v -= b * c;
        }
        let n = v.norm();
        cols.push(v / n);
    }
    DMatrix::from_columns(&cols)
}

fn monodromy_core<F>(
    model: &HamiltonianModel,
    flow: F,
    twist: &TwistSpec,
    x0: &DVector<f64>,
    tau: f64,
) -> Result<(usize, DMatrix<f64>), OrbitError>
where
    F: Fn(&DVector<f64>, f64) -> Result<DVector<f64>, FlowError>,
{
    let dim = model.dim();
    if twist.dim() != dim || x0.len() != dim {
        return Err(OrbitError::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    let g_map = |x: &DVector<f64>| -> Result<DVector<f64>, FlowError> {
        flow(&twist.apply(x), -tau)
    };
    let step = FD_STEP * (1.0 + x0.amax());
    let mut m_full = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let mut fwd = x0.clone();
        let mut bwd = x0.clone();
        fwd[i] += step;
        bwd[i] -= step;
        let col = (g_map(&fwd)? - g_map(&bwd)?) / (2.0 * step);
        m_full.column_mut(i).copy_from(&col);
    }
    let basis = tangent_basis(&model.grad(x0));
    let m_r = basis.transpose() * m_full * &basis;
    let norm = m_r.clone().svd(false, false).singular_values.max();
    let shifted = &m_r - DMatrix::identity(dim - 1, dim - 1);
    let kernel_dim = shifted
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|s| **s < KERNEL_TOL * norm.max(1.0))
        .count();
    Ok((kernel_dim, m_r))
}

/// Monodromy `D(φ^R_{-τ} ∘ φ)` restricted to the surface tangent space, and
/// the dimension of its fixed subspace.
pub fn monodromy_kernel(
    surface: &HypersurfaceModel,
    twist: &TwistSpec,
    x0: &DVector<f64>,
    tau: f64,
) -> Result<(usize, DMatrix<f64>), OrbitError> {
    monodromy_core(
        surface.base(),
        |x, t| surface.flow_endpoint(x, t),
        twist,
        x0,
        tau,
    )
}

/// [`monodromy_kernel`] on the zero level set of an arbitrary model.
pub fn monodromy_kernel_level(
    model: &HamiltonianModel,
    twist: &TwistSpec,
    x0: &DVector<f64>,
    tau: f64,
) -> Result<(usize, DMatrix<f64>), OrbitError> {
    monodromy_core(
        model,
        |x, t| model.flow_map(x, t, level_step(t)),
        twist,
        x0,
        tau,
    )
}

/// Transverse linearization of a twisted orbit on S³: the contact-frame
/// coefficient winds `e^{i·4τ_k·t}`, so the path is `rot(4τ_k t)` in Sp(2).
pub fn sphere_transverse_path(
    m: usize,
    k: i64,
    samples: usize,
) -> Result<SymplecticPath, OrbitError> {
    if m == 0 {
        return Err(OrbitError::BadOrder);
    }
    let tau = PI / m as f64 * (m as f64 * k as f64 - 1.0);
    let angle = 4.0 * tau;
    let count = samples.max((angle.abs() / 0.4).ceil() as usize + 2);
    Ok(SymplecticPath::from_fn(1, count, |t| rot(1, angle * t))?)
}

/// Index of the S³ orbit with period `τ_k` in the transverse contact frame,
/// with the degenerate (two-sided mean) endpoint convention.
pub fn sphere_orbit_cz(m: usize, k: i64) -> Result<i64, OrbitError> {
    let path = sphere_transverse_path(m, k, 64)?;
    Ok(cz_index(&path, true)?)
}

/// Deck index of the loop traced by a trajectory, using the orbit's own twist.
fn deck_of_trajectory(traj: &Trajectory, twist: &TwistSpec) -> Result<usize, OrbitError> {
    let stride = (traj.states.len() / 400).max(1);
    let mut pts: Vec<DVector<f64>> = traj.states.iter().step_by(stride).cloned().collect();
    if let Some(last) = traj.states.last() {
        if pts.last() != Some(last) {
            pts.push(last.clone());
        }
    }
    lift_loop(&pts, twist)
}

/// Lifts a loop given by representatives in the quotient by the cyclic group
/// generated by `twist`, returning the deck power `k` with the lifted endpoint
/// at `φ^k(start)`. Consecutive samples must stay within half the injectivity
/// separation of the action.
pub fn lift_loop(samples: &[DVector<f64>], twist: &TwistSpec) -> Result<usize, OrbitError> {
    if samples.is_empty() {
        return Err(OrbitError::EmptyLoop);
    }
    let m = twist.order();
    if m <= 1 {
        return Ok(0);
    }
    let mut lift = samples[0].clone();
    let mut deck = 0usize;
    for idx in 1..=samples.len() {
        let target = if idx == samples.len() {
            &samples[0]
        } else {
            &samples[idx]
        };
        // Injectivity separation of the current lift under the group.
        let sep = (1..m)
            .map(|j| (twist.apply_power(&lift, j) - &lift).norm())
            .fold(f64::INFINITY, f64::min);

        let candidates: Vec<(DVector<f64>, f64)> = (0..m)
            .map(|j| {
                let cand = twist.apply_power(target, j);
                let d = (&cand - &lift).norm();
                (cand, d)
            })
            .collect();
        // Strictly-smaller comparison keeps the lowest power among coincident
        // preimages (e.g. at fixed points of the action).
        let mut best_j = 0usize;
        for (j, (_, d)) in candidates.iter().enumerate() {
            if *d < candidates[best_j].1 {
                best_j = j;
            }
        }
        let (ref best_cand, best_d) = candidates[best_j];
        for (j, (cand, d)) in candidates.iter().enumerate() {
            if j != best_j && *d < best_d + LIFT_TIE_TOL && (cand - best_cand).norm() > LIFT_POINT_TOL
            {
                return Err(OrbitError::AmbiguousLift(idx));
            }
        }
        let best_pt = Some(best_cand.clone());
        let guard_ok = if sep > LIFT_TIE_TOL {
            best_d < 0.5 * sep
        } else {
            // The lift sits at a fixed point; only coincident samples are safe.
            best_d <= LIFT_POINT_TOL
        };
        if !guard_ok {
            return Err(OrbitError::SamplesTooCoarse(idx));
        }
        lift = best_pt.expect("at least one candidate");
        deck = best_j;
    }
    Ok(deck)
}

/// Closed-form test for (possibly twisted) closed magnetic characteristics on
/// T*T² at energy `c`: `p(t) = e^{tJ}p`, `q(t) = q + ∫₀ᵗ e^{sJ}p ds`.
///
/// Untwisted: the kernel component of `p` vanishes, `e^{τJ}p = p`, `‖p‖² = 2c`.
/// Twisted by a cotangent-lifted isometry `φ`: `q(τ) ≡ ψ(q) mod Z²`,
/// `e^{τJ}p = (Dψ⁻¹)ᵀp`, `‖p‖² = 2c`.
pub fn magnetic_orbit_check(
    q: &DVector<f64>,
    p: &DVector<f64>,
    tau: f64,
    c: f64,
    j: &DMatrix<f64>,
    twist: Option<&TwistSpec>,
) -> Result<bool, OrbitError> {
    let n = q.len();
    if p.len() != n || j.nrows() != n || j.ncols() != n {
        return Err(OrbitError::DimensionMismatch {
            expected: n,
            got: p.len().max(j.nrows()),
        });
    }
    match twist {
        None => {
            // Split p along ker J and its complement via SVD.
            let svd = j.clone().svd(false, true);
            let v_t = svd.v_t.expect("requested");
            let mut p_perp = DVector::zeros(n);
            for (i, s) in svd.singular_values.iter().enumerate() {
                if *s < 1e-12 {
                    let row = v_t.row(i).transpose();
                    p_perp += &row * row.dot(p);
                }
            }
            let p_par = p - &p_perp;
            let e_tj = (tau * j).exp();
            let closes = p_perp.norm() <= TOL_MAGNETIC
                && (&e_tj * &p_par - &p_par).norm() <= TOL_MAGNETIC
                && (p_par.norm_squared() - 2.0 * c).abs() <= TOL_MAGNETIC;
            Ok(closes)
        }
        Some(tw) => {
            if tw.dim() != 2 * n {
                return Err(OrbitError::DimensionMismatch {
                    expected: 2 * n,
                    got: tw.dim(),
                });
            }
            let mut state = DVector::zeros(2 * n);
            state.rows_mut(0, n).copy_from(q);
            state.rows_mut(n, n).copy_from(p);
            let img = tw.apply(&state);
            let (q_end, p_end) = closed_flow_magnetic_torus(q, p, tau, j);
            let base_match = (0..n).all(|i| {
                let d = (q_end[i] - img[i]).rem_euclid(1.0);
                d.min(1.0 - d) <= TOL_MAGNETIC
            });
            let fiber_match = (&p_end - img.rows(n, n)).norm() <= TOL_MAGNETIC;
            let energy_match = (p.norm_squared() - 2.0 * c).abs() <= TOL_MAGNETIC;
            Ok(base_match && fiber_match && energy_match)
        }
    }
}

/// Gap bound for the period interval of a magnetic level: the forcing
/// threshold is the displacement energy `2πc` of the level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingReport {
    pub gap: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

pub fn forcing_gap(c: f64, tau_minus: f64, tau_plus: f64) -> Result<ForcingReport, OrbitError> {
    if c <= 0.0 {
        return Err(OrbitError::BadShapeParameter(c));
    }
    if tau_plus < tau_minus {
        return Err(OrbitError::ReversedInterval {
            lo: tau_minus,
            hi: tau_plus,
        });
    }
    let gap = c * (tau_plus - tau_minus);
    let threshold = 2.0 * PI * c;
    Ok(ForcingReport {
        gap,
        threshold,
        satisfied: gap <= threshold + 1e-12,
    })
}

/// Regions with a closed-form displacement energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Ball { radius: f64 },
    MagneticTorusLevel { c: f64 },
}

pub fn displacement_energy(shape: Shape) -> Result<f64, OrbitError> {
    match shape {
        Shape::Ball { radius } => {
            if radius <= 0.0 {
                return Err(OrbitError::BadShapeParameter(radius));
            }
            Ok(PI * radius * radius)
        }
        Shape::MagneticTorusLevel { c } => {
            if c <= 0.0 {
                return Err(OrbitError::BadShapeParameter(c));
            }
            Ok(2.0 * PI * c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{round_sphere, state_to_complex};
    use nalgebra::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(vals: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(vals)
    }

    fn torus_j() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    #[test]
    fn rotation_twist_is_periodic_and_preserves_lambda() {
        let tw = TwistSpec::rotation(3, &[1, 2]).unwrap();
        assert_eq!(tw.order(), 3);
        assert_eq!(tw.dim(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0f64));
            let v = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0f64));
            let jx = tw.jacobian(&x);
            assert!(
                (lambda_form(&tw.apply(&x), &(&jx * &v)) - lambda_form(&x, &v)).abs() < 1e-12
            );
            assert!((tw.apply_power(&x, 3) - &x).amax() < 1e-12);
        }
    }

    #[test]
    fn bad_twists_are_rejected() {
        assert!(matches!(
            TwistSpec::rotation(0, &[1]),
            Err(OrbitError::BadOrder)
        ));
        assert!(matches!(
            TwistSpec::rotation(2, &[]),
            Err(OrbitError::NoExponents)
        ));
        // Declared order 3 but the map is a half turn.
        let half = TwistSpec::rotation(2, &[1, 1]).unwrap();
        let map = half.map.clone();
        let jac = half.jac.clone();
        assert!(matches!(
            TwistSpec::from_parts(4, 3, map, jac),
            Err(OrbitError::NotPeriodic(_))
        ));
    }

    #[test]
    fn quarter_turn_lift_has_order_four() {
        let tw = TwistSpec::torus_quarter_turn();
        assert_eq!(tw.order(), 4);
        let x = dv(&[0.2, 0.7, -0.3, 1.1]);
        assert_eq!(tw.apply(&x), dv(&[0.7, -0.2, 1.1, 0.3]));
        assert!((tw.apply_power(&x, 4) - &x).amax() < 1e-15);
    }

    #[test]
    fn spectrum_matches_closed_form() {
        let s = spectrum_sphere(2, 0..=2).unwrap();
        assert!((s[0] + PI / 2.0).abs() < 1e-15);
        assert!((s[1] - PI / 2.0).abs() < 1e-15);
        assert!((s[2] - 3.0 * PI / 2.0).abs() < 1e-15);
        let s3 = spectrum_sphere(3, 1..=1).unwrap();
        assert!((s3[0] - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!(spectrum_sphere(0, 0..=1).is_err());
    }

    #[test]
    fn transverse_index_on_sphere_orbits() {
        // k = 1 generator orbit: one full positive transverse loop.
        assert_eq!(sphere_orbit_cz(2, 1).unwrap(), 2);
        assert_eq!(sphere_orbit_cz(2, 2).unwrap(), 6);
        assert_eq!(sphere_orbit_cz(2, 0).unwrap(), -2);
    }

    #[test]
    fn forcing_examples() {
        let r = forcing_gap(1.0, 0.0, 2.0 * PI).unwrap();
        assert!((r.gap - r.threshold).abs() < 1e-12 && r.satisfied);
        let r0 = forcing_gap(0.5, 1.0, 1.0).unwrap();
        assert_eq!(r0.gap, 0.0);
        assert!(r0.satisfied);
        let big = forcing_gap(2.0, 0.0, 4.0 * PI).unwrap();
        assert!((big.gap - 8.0 * PI).abs() < 1e-12);
        assert!(!big.satisfied);
        assert!(forcing_gap(-1.0, 0.0, 1.0).is_err());
        assert!(forcing_gap(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn displacement_energy_closed_forms() {
        assert!((displacement_energy(Shape::Ball { radius: 1.0 }).unwrap() - PI).abs() < 1e-15);
        let c = 0.7f64;
        let ball = displacement_energy(Shape::Ball {
            radius: (2.0 * c).sqrt(),
        })
        .unwrap();
        let level = displacement_energy(Shape::MagneticTorusLevel { c }).unwrap();
        assert!((ball - level).abs() < 1e-12);
        assert!((level - 2.0 * PI * c).abs() < 1e-15);
        assert!(displacement_energy(Shape::Ball { radius: 0.0 }).is_err());
    }

    #[test]
    fn magnetic_untwisted_examples() {
        let j = torus_j();
        let q = dv(&[0.3, 0.4]);
        let p = dv(&[0.0, 1.0]);
        assert!(magnetic_orbit_check(&q, &p, 2.0 * PI, 0.5, &j, None).unwrap());
        assert!(!magnetic_orbit_check(&q, &p, PI, 0.5, &j, None).unwrap());
        // Wrong energy.
        assert!(!magnetic_orbit_check(&q, &p, 2.0 * PI, 0.6, &j, None).unwrap());
    }

    #[test]
    fn magnetic_twisted_family() {
        let j = torus_j();
        let tw = TwistSpec::torus_quarter_turn();
        for &c in &[0.5f64, 1.0, 2.0] {
            let s = (2.0 * c).sqrt();
            // v(t) = √(2c)(sin t, cos t, cos t, −sin t) at t = 0.
            let q = dv(&[0.0, s]);
            let p = dv(&[s, 0.0]);
            for &tau in &[PI / 2.0, PI / 2.0 + 2.0 * PI] {
                assert!(
                    magnetic_orbit_check(&q, &p, tau, c, &j, Some(&tw)).unwrap(),
                    "c = {c}, tau = {tau}"
                );
            }
            assert!(!magnetic_orbit_check(&q, &p, PI, c, &j, Some(&tw)).unwrap());
        }
    }

    #[test]
    fn lift_loop_reads_deck_index() {
        let gen = TwistSpec::rotation(2, &[1, 1]).unwrap();
        let x0 = dv(&[1.0, 0.0, 0.0, 0.0]);
        // Twisted generator orbit: τ₁ = π/2, endpoint −x0.
        let tau = PI / 2.0;
        let loop_pts: Vec<DVector<f64>> = (0..=100)
            .map(|i| {
                let t = tau * i as f64 / 100.0;
                let z = state_to_complex(&x0)
                    .iter()
                    .map(|w| w * Complex::from_polar(1.0, -2.0 * t))
                    .collect::<Vec<_>>();
                crate::hamflow::complex_to_state(&z)
            })
            .collect();
        assert_eq!(lift_loop(&loop_pts, &gen).unwrap(), 1);

        // Constant loop.
        let constant = vec![x0.clone(); 5];
        assert_eq!(lift_loop(&constant, &gen).unwrap(), 0);

        // Full untwisted circle (period π) is a closed loop upstairs.
        let full: Vec<DVector<f64>> = (0..=200)
            .map(|i| {
                let t = PI * i as f64 / 200.0;
                let z = state_to_complex(&x0)
                    .iter()
                    .map(|w| w * Complex::from_polar(1.0, -2.0 * t))
                    .collect::<Vec<_>>();
                crate::hamflow::complex_to_state(&z)
            })
            .collect();
        assert_eq!(lift_loop(&full, &gen).unwrap(), 0);

        // A 1.2-rad jump exceeds half the antipodal separation (= 1) for both
        // preimages, so the lift must refuse rather than guess.
        let coarse = vec![
            x0.clone(),
            dv(&[(1.2f64).cos(), 0.0, -(1.2f64).sin(), 0.0]),
        ];
        assert!(matches!(
            lift_loop(&coarse, &gen),
            Err(OrbitError::SamplesTooCoarse(_))
        ));

        // A quarter turn is exactly equidistant from both preimages.
        let quarter = vec![x0, dv(&[0.0, 0.0, -1.0, 0.0])];
        assert!(matches!(
            lift_loop(&quarter, &gen),
            Err(OrbitError::AmbiguousLift(_)) | Err(OrbitError::SamplesTooCoarse(_))
        ));
    }

    #[test]
    fn lift_loop_all_generator_powers() {
        for m in 2..=5usize {
            let gen = TwistSpec::rotation(m, &[1, 1]).unwrap();
            for j in 0..m {
                let tau = PI * (1.0 - j as f64 / m as f64);
                let x0 = dv(&[0.8, 0.0, 0.6, 0.0]);
                let pts: Vec<DVector<f64>> = (0..=400)
                    .map(|i| {
                        let t = tau * i as f64 / 400.0;
                        let z = state_to_complex(&x0)
                            .iter()
                            .map(|w| w * Complex::from_polar(1.0, -2.0 * t))
                            .collect::<Vec<_>>();
                        crate::hamflow::complex_to_state(&z)
                    })
                    .collect();
                let got = lift_loop(&pts, &gen);
                assert!(got.is_ok(), "m = {m}, j = {j}: {got:?}");
                assert_eq!(got.unwrap(), j, "m = {m}, j = {j}");
            }
        }
    }

    #[test]
    fn orbit_summary_round_trips() {
        let s = OrbitSummary {
            x0: vec![1.0, 0.0, 0.0, 0.0],
            tau: PI / 2.0,
            residual: 1e-12,
            action: PI / 2.0,
            kernel_dim: 3,
            deck_index: 1,
            cz_index: Some(2),
        };
        let js = serde_json::to_string(&s).unwrap();
        let back: OrbitSummary = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
        let no_cz = OrbitSummary {
            cz_index: None,
            ..s.clone()
        };
        let js2 = serde_json::to_string(&no_cz).unwrap();
        assert!(!js2.contains("cz_index"));
        assert_eq!(no_cz, serde_json::from_str(&js2).unwrap());
    }

    #[test]
    fn shoot_finds_twisted_generator_orbit() {
        let surf = round_sphere(2, 1.0);
        let tw = TwistSpec::rotation(2, &[1, 1]).unwrap();
        let seed = dv(&[0.78, 0.12, 0.55, 0.25]);
        let seed = &seed / seed.norm() * 1.01;
        let orbit = shoot(&surf, &tw, &seed, 1.5).unwrap();
        assert!((orbit.tau - PI / 2.0).abs() < 1e-9, "tau = {}", orbit.tau);
        assert!(orbit.residual < SHOOT_TOL);
        assert!(surf.base().h(&orbit.x0).abs() < 1e-9);
        assert!((orbit.action - orbit.tau).abs() < 1e-6);
    }

    #[test]
    fn shoot_untwisted_finds_pi_orbit() {
        let surf = round_sphere(2, 1.0);
        let tw = TwistSpec::identity(4);
        let seed = dv(&[0.6, -0.3, 0.65, 0.33]);
        let seed = &seed / seed.norm() * 0.99;
        let orbit = shoot(&surf, &tw, &seed, 3.0).unwrap();
        assert!((orbit.tau - PI).abs() < 1e-9);
        assert!((orbit.action - PI).abs() < 1e-6);
    }

    #[test]
    fn shoot_rejects_far_seeds() {
        let surf = round_sphere(2, 1.0);
        let tw = TwistSpec::identity(4);
        let seed = dv(&[0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(
            shoot(&surf, &tw, &seed, 3.0),
            Err(OrbitError::SeedOffSurface(_))
        ));
    }

    #[test]
    fn constant_orbit_at_fixed_point() {
        let surf = round_sphere(2, 1.0);
        // Half turn in z₁ only: the z₂ circle is fixed.
        let tw = TwistSpec::rotation(2, &[1, 0]).unwrap();
        let seed = dv(&[0.0, 0.995, 0.0, 0.05]);
        let orbit = shoot(&surf, &tw, &seed, 0.0).unwrap();
        assert!(orbit.tau.abs() < 1e-9);
        assert!(orbit.residual < SHOOT_TOL);
        assert!(orbit.action.abs() < 1e-9);
        // Fixed circle of φ|Σ is one-dimensional.
        let (kd, _) = monodromy_kernel(&surf, &tw, &orbit.x0, orbit.tau).unwrap();
        assert_eq!(kd, 1);
    }

    #[test]
    fn monodromy_kernel_is_full_on_round_sphere() {
        let surf = round_sphere(2, 1.0);
        let tw = TwistSpec::rotation(2, &[1, 1]).unwrap();
        let x0 = dv(&[1.0, 0.0, 0.0, 0.0]);
        let (kd, m) = monodromy_kernel(&surf, &tw, &x0, PI / 2.0).unwrap();
        assert_eq!(kd, 3);
        assert!((m - DMatrix::identity(3, 3)).amax() < 1e-5);
    }

    #[test]
    fn monodromy_kernel_is_one_on_incommensurate_ellipsoid() {
        // Short simple orbit of the z₁ circle; the transverse multiplier is a
        // rotation by an irrational angle, so only the flow direction is fixed.
        let a1 = 1.0f64;
        let a2 = 1.2720196495140690f64; // a₂² = golden ratio
        let model = HamiltonianModel::ellipsoid(&[a1, a2]);
        let tw = TwistSpec::identity(4);
        let x0 = dv(&[a1, 0.0, 0.0, 0.0]);
        let tau = PI * a1 * a1;
        let (kd, _) = monodromy_kernel_level(&model, &tw, &x0, tau).unwrap();
        assert_eq!(kd, 1);
    }
}

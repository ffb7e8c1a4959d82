//! Hamiltonian models, flows, cotangent lifts, and defining Hamiltonians.
//!
//! Phase space is R^{2n} in block layout `(q_1..q_n, p_1..p_n)`. Complex
//! models on C^m identify `z_j = q_j + i p_j`. The sign convention couples
//! `i_{X_H}ω = -dH` with the primitive `λ = ½Σ(p dq - q dp)`, so that
//! `X_H = (∂H/∂p, -∂H/∂q)` and the round-sphere model `H = |z|² - 1` has
//! Reeb flow `z ↦ e^{-2it}z` with `λ(X_H) = 1` on the level set.
//!
//! Magnetic models on T*T^n replace the p-equation by
//! `ṗ = σ·∂H/∂p - ∂H/∂q` for a constant antisymmetric σ.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::tolerances::{
    BLOWUP_NORM, COLLAR_MAX_ITER, COLLAR_TOL, FD_STEP, TOL_GRAD,
};

pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Time-parametrised state map, used for closed-form flows.
pub type TimeMap = Arc<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync>;

/// Tolerance for membership of a point on the unit sphere.
const SPHERE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("phase dimension must be even and positive, got {0}")]
    OddDimension(usize),
    #[error("magnetic structure needs an antisymmetric n×n matrix (n = base dimension)")]
    BadSigma,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("trajectory blew up at t = {t:.6} (|x| = {norm:.3e})")]
    BlowUp { t: f64, norm: f64 },
    #[error("point is off the unit sphere by {0:.3e}")]
    NotOnSphere(f64),
    #[error("base map has a singular Jacobian at the given point")]
    SingularJacobian,
    #[error("radius function is not positive; the domain is not star-shaped")]
    NonStarShaped,
    #[error("collar coordinate iteration failed to converge")]
    CollarDiverged,
    #[error("analytic gradient disagrees with finite differences by {0:.3e}")]
    GradientInconsistent(f64),
}

/// Symplectic structure of a model.
#[derive(Clone)]
pub enum Structure {
    Standard,
    /// Constant antisymmetric n×n twist on the base of T*T^n.
    Magnetic(DMatrix<f64>),
}

/// Hamiltonian with optional analytic gradient; finite differences fill in.
#[derive(Clone)]
pub struct HamiltonianModel {
    dim: usize,
    h: ScalarField,
    grad_h: Option<VectorField>,
    structure: Structure,
}

impl HamiltonianModel {
    pub fn new(
        dim: usize,
        h: ScalarField,
        grad_h: Option<VectorField>,
        structure: Structure,
    ) -> Result<Self, FlowError> {
        if dim == 0 || dim % 2 != 0 {
            return Err(FlowError::OddDimension(dim));
        }
        if let Structure::Magnetic(sigma) = &structure {
            let n = dim / 2;
            let skew = sigma + sigma.transpose();
            if sigma.nrows() != n || sigma.ncols() != n || skew.amax() > 1e-12 {
                return Err(FlowError::BadSigma);
            }
        }
        Ok(HamiltonianModel {
            dim,
            h,
            grad_h,
            structure,
        })
    }

    /// Round sphere: `H = |z|² - 1` on C^n, flow `e^{-2it}z`.
    pub fn sphere(n: usize) -> Self {
        HamiltonianModel {
            dim: 2 * n,
            h: Arc::new(|x| x.norm_squared() - 1.0),
            grad_h: Some(Arc::new(|x| 2.0 * x)),
            structure: Structure::Standard,
        }
    }

    /// Ellipsoid `H = Σ |z_j|²/a_j² - 1`, flow `z_j ↦ e^{-2it/a_j²} z_j`.
    pub fn ellipsoid(semiaxes: &[f64]) -> Self {
        let n = semiaxes.len();
        let a: Vec<f64> = semiaxes.to_vec();
        let a2 = a.clone();
        HamiltonianModel {
            dim: 2 * n,
            h: Arc::new(move |x| {
                (0..n)
                    .map(|j| (x[j] * x[j] + x[n + j] * x[n + j]) / (a[j] * a[j]))
                    .sum::<f64>()
                    - 1.0
            }),
            grad_h: Some(Arc::new(move |x| {
                DVector::from_fn(2 * n, |i, _| 2.0 * x[i] / (a2[i % n] * a2[i % n]))
            })),
            structure: Structure::Standard,
        }
    }

    /// Kinetic Hamiltonian `H = ½|p|²` on T*T² with constant magnetic twist.
    pub fn magnetic_torus(sigma: DMatrix<f64>) -> Result<Self, FlowError> {
        let n = sigma.nrows();
        Self::new(
            2 * n,
            Arc::new(move |x| 0.5 * x.rows(n, n).norm_squared()),
            Some(Arc::new(move |x| {
                let mut g = DVector::zeros(2 * n);
                g.rows_mut(n, n).copy_from(&x.rows(n, n));
                g
            })),
            Structure::Magnetic(sigma),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn h(&self, x: &DVector<f64>) -> f64 {
        (self.h)(x)
    }

    /// Central finite-difference gradient with a point-relative step.
    pub fn fd_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let scale = 1.0 + x.amax();
        let step = FD_STEP * scale;
        DVector::from_fn(self.dim, |i, _| {
            let mut fwd = x.clone();
            let mut bwd = x.clone();
            fwd[i] += step;
            bwd[i] -= step;
            ((self.h)(&fwd) - (self.h)(&bwd)) / (2.0 * step)
        })
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.grad_h {
            Some(g) => g(x),
            None => self.fd_grad(x),
        }
    }

    /// Checks the analytic gradient against finite differences.
    pub fn check_gradient(&self, x: &DVector<f64>) -> Result<(), FlowError> {
        if let Some(g) = &self.grad_h {
            let defect = (g(x) - self.fd_grad(x)).amax();
            if defect > TOL_GRAD {
                return Err(FlowError::GradientInconsistent(defect));
            }
        }
        Ok(())
    }

    /// `X_H` from `i_{X_H}ω = -dH`, with the magnetic correction when σ is
    /// present.
    pub fn hamiltonian_vector_field(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim / 2;
        let g = self.grad(x);
        let dq = g.rows(0, n);
        let dp = g.rows(n, n);
        let mut v = DVector::zeros(self.dim);
        v.rows_mut(0, n).copy_from(&dp);
        match &self.structure {
            Structure::Standard => v.rows_mut(n, n).copy_from(&(-dq)),
            Structure::Magnetic(sigma) => {
                v.rows_mut(n, n).copy_from(&(sigma * dp - dq));
            }
        }
        v
    }

    /// Fixed-step RK4 over signed time `t_final` with step `dt`; the last
    /// step is shortened to land exactly on `t_final`.
    pub fn flow(&self, x0: &DVector<f64>, t_final: f64, dt: f64) -> Result<Trajectory, FlowError> {
        if dt <= 0.0 {
            return Err(FlowError::NonPositiveStep(dt));
        }
        let h0 = self.h(x0);
        let mut times = vec![0.0];
        let mut states = vec![x0.clone()];
        let mut drift: f64 = 0.0;
        let direction = t_final.signum();
        let total = t_final.abs();
        let mut t = 0.0;
        let mut x = x0.clone();
        while t < total - 1e-15 {
            let step = dt.min(total - t) * direction;
            let k1 = self.hamiltonian_vector_field(&x);
            let k2 = self.hamiltonian_vector_field(&(&x + 0.5 * step * &k1));
            let k3 = self.hamiltonian_vector_field(&(&x + 0.5 * step * &k2));
            let k4 = self.hamiltonian_vector_field(&(&x + step * &k3));
            x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += step.abs();
            if x.norm() > BLOWUP_NORM {
                return Err(FlowError::BlowUp {
                    t: t * direction,
                    norm: x.norm(),
                });
            }
            drift = drift.max((self.h(&x) - h0).abs());
            times.push(t * direction);
            states.push(x.clone());
        }
        Ok(Trajectory {
            times,
            states,
            energy_drift: drift,
        })
    }

    /// Endpoint of [`Self::flow`].
    pub fn flow_map(
        &self,
        x0: &DVector<f64>,
        t_final: f64,
        dt: f64,
    ) -> Result<DVector<f64>, FlowError> {
        Ok(self.flow(x0, t_final, dt)?.states.last().unwrap().clone())
    }

    /// Central finite-difference Jacobian of the time-`t_final` flow map.
    pub fn flow_jacobian(
        &self,
        x0: &DVector<f64>,
        t_final: f64,
        dt: f64,
    ) -> Result<DMatrix<f64>, FlowError> {
        let step = FD_STEP * (1.0 + x0.amax());
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let mut fwd = x0.clone();
            let mut bwd = x0.clone();
            fwd[i] += step;
            bwd[i] -= step;
            let col = (self.flow_map(&fwd, t_final, dt)? - self.flow_map(&bwd, t_final, dt)?)
                / (2.0 * step);
            jac.set_column(i, &col);
        }
        Ok(jac)
    }
}

/// Integrated orbit segment with its recorded energy drift.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub energy_drift: f64,
}

impl Trajectory {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }

    /// CSV rows `t, x_1, ..., x_2n, H`.
    pub fn to_csv(&self, model: &HamiltonianModel) -> String {
        let dim = self.states[0].len();
        let mut out = String::from("t");
        for i in 0..dim {
            out.push_str(&format!(",x{}", i + 1));
        }
        out.push_str(",H\n");
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.12e}"));
            for v in x.iter() {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push_str(&format!(",{:.12e}\n", model.h(x)));
        }
        out
    }
}

/// Block state `(q, p)` to complex components `z_j = q_j + i p_j`.
pub fn state_to_complex(x: &DVector<f64>) -> Vec<Complex<f64>> {
    let n = x.len() / 2;
    (0..n).map(|j| Complex::new(x[j], x[n + j])).collect()
}

pub fn complex_to_state(z: &[Complex<f64>]) -> DVector<f64> {
    let n = z.len();
    DVector::from_fn(2 * n, |i, _| if i < n { z[i].re } else { z[i - n].im })
}

/// Closed-form Reeb flow of the round sphere: `z ↦ e^{-2it}z`.
pub fn closed_flow_sphere(z: &[Complex<f64>], t: f64) -> Result<Vec<Complex<f64>>, FlowError> {
    let norm2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
    let defect = (norm2 - 1.0).abs();
    if defect > SPHERE_TOL {
        return Err(FlowError::NotOnSphere(defect));
    }
    let phase = Complex::from_polar(1.0, -2.0 * t);
    Ok(z.iter().map(|w| w * phase).collect())
}

/// `e^{tJ}` together with `∫₀ᵗ e^{sJ} ds`, via one augmented exponential.
fn exp_and_integral(j: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = j.nrows();
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(j * t));
    aug.view_mut((0, n), (n, n))
        .copy_from(&(DMatrix::identity(n, n) * t));
    let e = aug.exp();
    (
        e.view((0, 0), (n, n)).into(),
        e.view((0, n), (n, n)).into(),
    )
}

/// Closed-form magnetic flow on T*T^n with constant twist `J`:
/// `p' = e^{tJ}p`, `q' = q + ∫₀ᵗ e^{sJ}p ds`, q reduced mod 1.
pub fn closed_flow_magnetic_torus(
    q: &DVector<f64>,
    p: &DVector<f64>,
    t: f64,
    j: &DMatrix<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let (e_tj, integral) = exp_and_integral(j, t);
    let q_new = (q + integral * p).map(|v| v.rem_euclid(1.0));
    (q_new, e_tj * p)
}

/// Base diffeomorphism with its Jacobian, for cotangent lifting.
#[derive(Clone)]
pub struct BaseMap {
    pub map: VectorField,
    pub jacobian: Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>,
}

/// `(q, p) ↦ (φ(q), p ∘ Dφ⁻¹)`: the new covector solves `Dφ(q)ᵀ p' = p`.
pub fn cotangent_lift(
    map: &BaseMap,
    q: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), FlowError> {
    let jac_t = (map.jacobian)(q).transpose();
    let p_new = jac_t
        .lu()
        .solve(p)
        .ok_or(FlowError::SingularJacobian)?;
    Ok(((map.map)(q), p_new))
}

/// Lift of a holomorphic base map: `(z, w) ↦ (φ(z), w / conj(φ'(z)))`,
/// covectors paired by `⟨w, v⟩ = Re(w̄ v)`.
pub fn holomorphic_lift(
    phi: impl Fn(Complex<f64>) -> Complex<f64>,
    dphi: impl Fn(Complex<f64>) -> Complex<f64>,
    z: Complex<f64>,
    w: Complex<f64>,
) -> Result<(Complex<f64>, Complex<f64>), FlowError> {
    let d = dphi(z);
    if d.norm() < 1e-14 {
        return Err(FlowError::SingularJacobian);
    }
    Ok((phi(z), w / d.conj()))
}

/// Double cover of the plane branched at ±1.
pub fn birkhoff_map(z: Complex<f64>) -> Complex<f64> {
    (z * z + 1.0) / (2.0 * z)
}

pub fn birkhoff_map_derivative(z: Complex<f64>) -> Complex<f64> {
    (z * z - 1.0) / (2.0 * z * z)
}

/// Conformal factor `|z²-1|² / (4|z|⁴)` relating the two charts.
pub fn birkhoff_conformal_factor(z: Complex<f64>) -> f64 {
    (z * z - 1.0).norm_sqr() / (4.0 * z.norm_sqr() * z.norm_sqr())
}

/// Two-center Hamiltonian `½|p|² - μ₊/|q-1| - μ₋/|q+1| + V₀(q)` on C × C in
/// block layout `(Re q, Im q, Re p, Im p)`.
pub fn two_center_hamiltonian(
    mu_plus: f64,
    mu_minus: f64,
    v0: Arc<dyn Fn(Complex<f64>) -> f64 + Send + Sync>,
) -> HamiltonianModel {
    HamiltonianModel {
        dim: 4,
        h: Arc::new(move |x| {
            let q = Complex::new(x[0], x[1]);
            let p = Complex::new(x[2], x[3]);
            0.5 * p.norm_sqr() - mu_plus / (q - 1.0).norm() - mu_minus / (q + 1.0).norm() + v0(q)
        }),
        grad_h: None,
        structure: Structure::Standard,
    }
}

/// Regularized two-center energy in the covering chart:
/// `K = ρ·(H∘DB† - c)` composed in closed form.
pub fn birkhoff_regularized_k(
    z: Complex<f64>,
    w: Complex<f64>,
    mu_plus: f64,
    mu_minus: f64,
    v0: impl Fn(Complex<f64>) -> f64,
    c: f64,
) -> f64 {
    let r = z.norm();
    0.5 * w.norm_sqr() - mu_plus * (z + 1.0).norm_sqr() / (2.0 * r.powi(3))
        - mu_minus * (z - 1.0).norm_sqr() / (2.0 * r.powi(3))
        + (v0(birkhoff_map(z)) - c) * (z * z - 1.0).norm_sqr() / (4.0 * r.powi(4))
}

/// Quintic smoothstep and its antiderivative.
fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

fn smoothstep_integral(u: f64) -> f64 {
    u.powi(4) * (2.5 + u * (-3.0 + u))
}

/// Odd mollification of `r ↦ clamp(r, ±δ/2)`: identity on the core, exactly
/// constant ±δ/2 beyond the blend margins of width 2μ, μ = δ/20.
#[derive(Debug, Clone, Copy)]
pub struct MollifiedH {
    delta: f64,
    mu: f64,
}

impl MollifiedH {
    pub fn new(delta: f64) -> Self {
        assert!(delta > 0.0);
        MollifiedH {
            delta,
            mu: delta / 20.0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn h(&self, r: f64) -> f64 {
        if r < 0.0 {
            return -self.h(-r);
        }
        let a = self.delta / 2.0;
        if r <= a - self.mu {
            r
        } else if r >= a + self.mu {
            a
        } else {
            let u = (r - (a - self.mu)) / (2.0 * self.mu);
            r - 2.0 * self.mu * smoothstep_integral(u)
        }
    }

    pub fn h_prime(&self, r: f64) -> f64 {
        let r = r.abs();
        let a = self.delta / 2.0;
        if r <= a - self.mu {
            1.0
        } else if r >= a + self.mu {
            0.0
        } else {
            1.0 - smoothstep((r - (a - self.mu)) / (2.0 * self.mu))
        }
    }
}

/// Star-shaped hypersurface in C^n given by a positive radius over unit
/// directions, with its mollified defining Hamiltonian.
pub struct HypersurfaceModel {
    base: HamiltonianModel,
    mollifier: MollifiedH,
    radius: ScalarField,
    n: usize,
    closed_flow: Option<TimeMap>,
}

/// Liouville primitive `λ = ½Σ(p dq - q dp)` evaluated at `x` on `v`.
pub fn lambda_form(x: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = x.len() / 2;
    (0..n)
        .map(|j| 0.5 * (x[n + j] * v[j] - x[j] * v[n + j]))
        .sum()
}

/// Canonical cotangent form `Σ p dq`; this is the form cotangent lifts
/// preserve exactly.
pub fn canonical_one_form(x: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = x.len() / 2;
    (0..n).map(|j| x[n + j] * v[j]).sum()
}

/// Radial Liouville field `X = x/2`, satisfying `i_X dλ = λ`.
pub fn liouville_field(x: &DVector<f64>) -> DVector<f64> {
    0.5 * x
}

impl HypersurfaceModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &HamiltonianModel {
        &self.base
    }

    pub fn mollifier(&self) -> &MollifiedH {
        &self.mollifier
    }

    /// Radius of the surface in direction `u` (unit vector).
    pub fn radius(&self, u: &DVector<f64>) -> f64 {
        (self.radius)(u)
    }

    /// Scales a nonzero point onto the surface along its ray.
    pub fn project_to_surface(&self, x: &DVector<f64>) -> DVector<f64> {
        let u = x / x.norm();
        (self.radius)(&u) * u
    }

    /// Endpoint of the defining-Hamiltonian flow, using the closed form when
    /// the surface carries one and fixed-step RK4 otherwise.
    pub fn flow_endpoint(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>, FlowError> {
        match &self.closed_flow {
            Some(cf) => Ok(cf(x, t)),
            None => self.base.flow_map(x, t, auto_step(t)),
        }
    }

    /// Sampled trajectory of the defining-Hamiltonian flow over `[0, t]`.
    pub fn flow_trajectory(
        &self,
        x: &DVector<f64>,
        t: f64,
        steps: usize,
    ) -> Result<Trajectory, FlowError> {
        match &self.closed_flow {
            Some(cf) => {
                let h0 = self.base.h(x);
                let mut times = Vec::with_capacity(steps + 1);
                let mut states = Vec::with_capacity(steps + 1);
                let mut drift: f64 = 0.0;
                times.push(0.0);
                states.push(x.clone());
                if t != 0.0 {
                    for i in 1..=steps {
                        let ti = t * i as f64 / steps as f64;
                        let xi = cf(x, ti);
                        drift = drift.max((self.base.h(&xi) - h0).abs());
                        times.push(ti);
                        states.push(xi);
                    }
                }
                Ok(Trajectory {
                    times,
                    states,
                    energy_drift: drift,
                })
            }
            None => {
                if t == 0.0 {
                    return Ok(Trajectory {
                        times: vec![0.0],
                        states: vec![x.clone()],
                        energy_drift: 0.0,
                    });
                }
                self.base.flow(x, t, t.abs() / steps as f64)
            }
        }
    }

    /// Liouville collar coordinate: the `r` with `φ^X_{-r}(x) ∈ Σ`. The flow
    /// is radial, so `e^{r/2}·ρ(u) = |x|`; solved by Newton from r = 0.
    pub fn collar(&self, x: &DVector<f64>) -> Result<f64, FlowError> {
        let norm = x.norm();
        if norm < 1e-12 {
            return Err(FlowError::CollarDiverged);
        }
        let rho = (self.radius)(&(x / norm));
        let mut r = 0.0f64;
        for _ in 0..COLLAR_MAX_ITER {
            let f = (0.5 * r).exp() * rho - norm;
            if f.abs() <= COLLAR_TOL * norm.max(1.0) {
                return Ok(r);
            }
            r -= f / (0.5 * (0.5 * r).exp() * rho);
        }
        Err(FlowError::CollarDiverged)
    }
}

/// Builds the mollified defining Hamiltonian `H = h(r)` of a star-shaped
/// surface; `H` vanishes exactly on the surface, is negative inside,
/// positive outside, and constant ±δ/2 beyond the collar.
pub fn build_defining_hamiltonian(
    n: usize,
    radius: ScalarField,
    delta: f64,
) -> Result<HypersurfaceModel, FlowError> {
    // Positivity is sampled over a deterministic direction sweep.
    for k in 0..64 {
        let mut u = DVector::from_fn(2 * n, |i, _| ((k * (i + 3) + i * i) as f64 + 0.7).sin());
        u /= u.norm();
        if radius(&u) <= 0.0 {
            return Err(FlowError::NonStarShaped);
        }
    }
    let mollifier = MollifiedH::new(delta);
    let radius_for_h = radius.clone();
    let h: ScalarField = Arc::new(move |x: &DVector<f64>| {
        let norm = x.norm();
        if norm < 1e-12 {
            return -mollifier.delta() / 2.0;
        }
        let rho = radius_for_h(&(x / norm));
        mollifier.h(2.0 * (norm / rho).ln())
    });
    let base = HamiltonianModel::new(2 * n, h, None, Structure::Standard)?;
    Ok(HypersurfaceModel {
        base,
        mollifier,
        radius,
        n,
        closed_flow: None,
    })
}

/// Default RK4 step for a flow of signed duration `t`.
fn auto_step(t: f64) -> f64 {
    t.abs().max(0.5) / 2000.0
}

/// Round unit sphere S^{2n-1} with its mollified defining Hamiltonian,
/// analytic gradient, and exact flow `z ↦ e^{-2i h'(r) t / |x|²} z`
/// (r = 2 ln|x| is constant along the flow).
pub fn round_sphere(n: usize, delta: f64) -> HypersurfaceModel {
    let mollifier = MollifiedH::new(delta);
    let h: ScalarField = Arc::new(move |x: &DVector<f64>| {
        let norm = x.norm();
        if norm < 1e-12 {
            return -mollifier.delta() / 2.0;
        }
        mollifier.h(2.0 * norm.ln())
    });
    let grad: VectorField = Arc::new(move |x: &DVector<f64>| {
        let ns = x.norm_squared();
        if ns < 1e-24 {
            return DVector::zeros(x.len());
        }
        (2.0 * mollifier.h_prime(ns.ln()) / ns) * x
    });
    let cf: TimeMap = Arc::new(move |x: &DVector<f64>, t: f64| {
        let ns = x.norm_squared();
        if ns < 1e-24 {
            return x.clone();
        }
        let theta = -2.0 * mollifier.h_prime(ns.ln()) * t / ns;
        rotation_block(&vec![theta; x.len() / 2]) * x
    });
    let base = HamiltonianModel::new(2 * n, h, Some(grad), Structure::Standard)
        .expect("even dimension by construction");
    HypersurfaceModel {
        base,
        mollifier,
        radius: unit_radius(),
        n,
        closed_flow: Some(cf),
    }
}

/// Unit-radius function for the round sphere.
pub fn unit_radius() -> ScalarField {
    Arc::new(|_| 1.0)
}

/// Rotation-invariant bumpy radius `ρ(u) = base·(1 + Σ c_j |w_j(u)|²)` with
/// `w_j` the complex components of the direction.
pub fn bumpy_radius(base: f64, coeffs: Vec<f64>) -> ScalarField {
    Arc::new(move |u: &DVector<f64>| {
        let n = coeffs.len();
        let bump: f64 = (0..n)
            .map(|j| coeffs[j] * (u[j] * u[j] + u[n + j] * u[n + j]))
            .sum();
        base * (1.0 + bump)
    })
}

/// Diagonal rotation `z_j ↦ e^{iθ_j} z_j` as a real block matrix.
pub fn rotation_block(angles: &[f64]) -> DMatrix<f64> {
    let n = angles.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (j, th) in angles.iter().enumerate() {
        let (s, c) = th.sin_cos();
        m[(j, j)] = c;
        m[(j, n + j)] = -s;
        m[(n + j, j)] = s;
        m[(n + j, n + j)] = c;
    }
    m
}

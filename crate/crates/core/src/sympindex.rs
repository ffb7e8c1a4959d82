//! Symplectic matrices, discretized symplectic paths, and rotation-number
//! indices.
//!
//! Conventions. Coordinates are interleaved pairs `(x_1, y_1, ..., x_n, y_n)`.
//! The standard form is `Ω₀ = blockdiag([[0,-1],[1,0]])` and the compatible
//! complex structure is `J₀ = -Ω₀`, which acts as multiplication by `i` under
//! the identification `w_j = x_j - i·y_j`. A unitary symplectic matrix then
//! corresponds to a complex unitary `u` with block `[[Re u, Im u],[-Im u, Re u]]`
//! per coordinate pair, and `rot(θ)` below is the real matrix of `w ↦ e^{iθ}w`.
//!
//! The path index is computed by the rotation-number method: the argument of
//! the complex determinant of the unitary polar part is tracked continuously
//! along the samples, and an endpoint correction rotates the polar part to a
//! normal form. Degenerate endpoints are handled by averaging the two
//! opposite ε-rotation perturbations of the path; this is the convention that
//! assigns a full unitary loop of angle 2πN the index 2N and the constant
//! path the index 0.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::tolerances::{CZ_EPS, STEP_BOUND, TOL_SYMP};

/// Relative determinant threshold below which `Ψ(1) - I` counts as singular.
const DEGENERACY_TOL: f64 = 1e-6;
/// Allowed deviation of `(Δ + c)/π` from the nearest integer.
const INDEX_ROUND_TOL: f64 = 1e-3;
/// Samples along the polar shrink path used by the endpoint-class guard.
const SHRINK_SAMPLES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SympError {
    #[error("matrix is not square with even dimension")]
    NotSquareEven,
    #[error("sample {0} is not symplectic within tolerance (defect {1:.3e})")]
    NotSymplectic(usize, f64),
    #[error("path needs at least two samples")]
    PathTooShort,
    #[error("path does not start at the identity (defect {0:.3e})")]
    StartNotIdentity(f64),
    #[error("path resolution too coarse at step {index} (jump {norm:.3} exceeds bound {bound})")]
    StepTooCoarse { index: usize, norm: f64, bound: f64 },
    #[error("endpoint has an eigenvalue 1 within tolerance; pass the degenerate flag")]
    DegenerateEndpoint,
    #[error("endpoint class unsupported by the rotation-number correction (shrink path crosses an eigenvalue 1)")]
    UnsupportedEndpoint,
    #[error("path is not a loop (closure defect {0:.3e})")]
    NotALoop(f64),
    #[error("accumulated index {0} is not within {1} of an integer; refine the path")]
    NonIntegerIndex(f64, f64),
    #[error("index parity disagrees with sign(det(I - Ψ(1))); refine the path")]
    ParityMismatch,
    #[error("degenerate-endpoint perturbation did not stabilize (got {0} at ε and {1} at ε/2)")]
    PerturbationUnstable(i64, i64),
    #[error("two-sided degenerate index is the half-integer {0}; no integer convention applies")]
    HalfIntegerIndex(f64),
}

/// Standard symplectic form on interleaved pairs.
pub fn omega0(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(2 * j, 2 * j + 1)] = -1.0;
        m[(2 * j + 1, 2 * j)] = 1.0;
    }
    m
}

/// Compatible complex structure `J₀ = -Ω₀`.
pub fn j0(n: usize) -> DMatrix<f64> {
    -omega0(n)
}

/// Real matrix of `w ↦ e^{iθ}w` on every coordinate pair.
pub fn rot(n: usize, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(2 * j, 2 * j)] = c;
        m[(2 * j, 2 * j + 1)] = s;
        m[(2 * j + 1, 2 * j)] = -s;
        m[(2 * j + 1, 2 * j + 1)] = c;
    }
    m
}

/// `‖MᵀΩ₀M − Ω₀‖` as the largest absolute entry.
pub fn symplectic_defect(m: &DMatrix<f64>) -> Result<f64, SympError> {
    if !m.is_square() || m.nrows() % 2 != 0 || m.nrows() == 0 {
        return Err(SympError::NotSquareEven);
    }
    let n = m.nrows() / 2;
    let om = omega0(n);
    let defect = m.transpose() * &om * m - om;
    Ok(defect.iter().fold(0.0, |a: f64, &x| a.max(x.abs())))
}

/// True iff `‖MᵀΩ₀M − Ω₀‖∞ ≤ tol`.
pub fn check_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<bool, SympError> {
    Ok(symplectic_defect(m)? <= tol)
}

/// Validated symplectic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl SymplecticMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self, SympError> {
        let defect = symplectic_defect(&entries)?;
        if defect > TOL_SYMP {
            return Err(SympError::NotSymplectic(0, defect));
        }
        Ok(SymplecticMatrix {
            n: entries.nrows() / 2,
            entries,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Discretized path in Sp(2n) at uniform times in [0,1], starting at the
/// identity, with consecutive samples closer than the step bound in operator
/// norm.
#[derive(Debug, Clone)]
pub struct SymplecticPath {
    n: usize,
    samples: Vec<DMatrix<f64>>,
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

impl SymplecticPath {
    pub fn from_samples(n: usize, samples: Vec<DMatrix<f64>>) -> Result<Self, SympError> {
        if samples.len() < 2 {
            return Err(SympError::PathTooShort);
        }
        for (i, s) in samples.iter().enumerate() {
            if s.nrows() != 2 * n || s.ncols() != 2 * n {
                return Err(SympError::NotSquareEven);
            }
            let defect = symplectic_defect(s)?;
            if defect > TOL_SYMP {
                return Err(SympError::NotSymplectic(i, defect));
            }
        }
        let id_defect = op_norm(&(&samples[0] - DMatrix::identity(2 * n, 2 * n)));
        if id_defect > TOL_SYMP {
            return Err(SympError::StartNotIdentity(id_defect));
        }
        for i in 0..samples.len() - 1 {
            let norm = op_norm(&(&samples[i + 1] - &samples[i]));
            if norm > STEP_BOUND {
                return Err(SympError::StepTooCoarse {
                    index: i,
                    norm,
                    bound: STEP_BOUND,
                });
            }
        }
        Ok(SymplecticPath { n, samples })
    }

    /// Samples `f(i/(count-1))` for `i = 0..count`.
    pub fn from_fn(
        n: usize,
        count: usize,
        f: impl Fn(f64) -> DMatrix<f64>,
    ) -> Result<Self, SympError> {
        assert!(count >= 2);
        let samples = (0..count)
            .map(|i| f(i as f64 / (count - 1) as f64))
            .collect();
        Self::from_samples(n, samples)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[DMatrix<f64>] {
        &self.samples
    }

    pub fn endpoint(&self) -> &DMatrix<f64> {
        self.samples.last().unwrap()
    }

    /// Pointwise product with the ε-rotation `t ↦ rot(sign·ε·t)`.
    fn perturbed(&self, eps: f64) -> SymplecticPath {
        let last = (self.samples.len() - 1) as f64;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, m)| m * rot(self.n, eps * i as f64 / last))
            .collect();
        SymplecticPath {
            n: self.n,
            samples,
        }
    }

    /// Concatenation reparametrized to [0,1]; the second path is translated
    /// to start at this path's endpoint.
    pub fn concat(&self, other: &SymplecticPath) -> Result<SymplecticPath, SympError> {
        assert_eq!(self.n, other.n);
        let junction = self.endpoint().clone();
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().skip(1).map(|m| &junction * m));
        Self::from_samples(self.n, samples)
    }
}

/// Unitary polar factor `U = V·Wᵀ` from the SVD `M = V·Σ·Wᵀ`.
fn polar_unitary(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Symmetric positive factor `P = W·Σ·Wᵀ`, with `M = U·P`.
fn polar_positive(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let v_t = svd.v_t.unwrap();
    v_t.transpose() * DMatrix::from_diagonal(&svd.singular_values) * v_t
}

/// Complex matrix of a unitary symplectic matrix under `w_j = x_j - i·y_j`.
fn complexify_unitary(u: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    let n = u.nrows() / 2;
    DMatrix::from_fn(n, n, |j, k| {
        Complex::new(u[(2 * j, 2 * k)], u[(2 * j, 2 * k + 1)])
    })
}

fn det_c(u: &DMatrix<f64>) -> Complex<f64> {
    complexify_unitary(u).determinant()
}

/// Continuous winding of `arg det_C` of the unitary polar part along the
/// samples, accumulated by principal-value steps.
fn polar_winding(samples: &[DMatrix<f64>]) -> Result<f64, SympError> {
    let mut total = 0.0;
    let mut prev = det_c(&polar_unitary(&samples[0]));
    for (i, s) in samples.iter().enumerate().skip(1) {
        let cur = det_c(&polar_unitary(s));
        let step = (cur / prev).arg();
        // A near-π jump of the determinant argument is unresolvable winding.
        if step.abs() > 0.9 * std::f64::consts::PI {
            return Err(SympError::StepTooCoarse {
                index: i - 1,
                norm: step.abs(),
                bound: 0.9 * std::f64::consts::PI,
            });
        }
        total += step;
        prev = cur;
    }
    Ok(total)
}

/// Signed rotation angles of the unitary polar factor, one per complex
/// eigenvalue pair off the real axis, in (0, 2π). The sign comes from the
/// symplectic orientation of the invariant 2-plane.
fn signed_rotation_angles(u: &DMatrix<f64>) -> Vec<f64> {
    use std::f64::consts::TAU;
    let dim = u.nrows();
    let om = omega0(dim / 2);
    let (q, t) = u.clone().schur().unpack();
    let mut angles = Vec::new();
    let mut i = 0;
    while i < dim {
        let off = if i + 1 < dim { t[(i + 1, i)].abs() } else { 0.0 };
        if off > 1e-9 {
            let c = 0.5 * (t[(i, i)] + t[(i + 1, i + 1)]);
            let s = 0.5 * (t[(i + 1, i)] - t[(i, i + 1)]);
            let alpha = s.atan2(c);
            if alpha.abs() > 1e-9 {
                let q1 = q.column(i);
                let q2 = q.column(i + 1);
                let orient = (q1.transpose() * &om * q2)[(0, 0)];
                let signed = alpha * orient.signum();
                angles.push(signed.rem_euclid(TAU));
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    angles
}

/// Endpoint-class guard: the correction below is valid only if shrinking the
/// positive polar factor to the identity never crosses an eigenvalue 1.
fn shrink_path_stays_nondegenerate(u: &DMatrix<f64>, p: &DMatrix<f64>) -> bool {
    let dim = u.nrows();
    let id = DMatrix::identity(dim, dim);
    if op_norm(&(p - &id)) < 1e-9 {
        return true;
    }
    let eig = nalgebra::SymmetricEigen::new(p.clone());
    let mut prev_sign = ((u * p - &id).determinant()).signum();
    for k in 1..SHRINK_SAMPLES {
        let s = k as f64 / SHRINK_SAMPLES as f64;
        let powered = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(1.0 - s)));
        let p_s = &eig.eigenvectors * powered * eig.eigenvectors.transpose();
        let det = (u * p_s - &id).determinant();
        // A sign change or a collapse of the gap means an eigenvalue 1 was
        // crossed while shrinking the stretch part.
        if det.signum() != prev_sign || det.abs().powf(1.0 / dim as f64) < DEGENERACY_TOL {
            return false;
        }
        prev_sign = det.signum();
    }
    true
}

fn cz_nondegenerate(path: &SymplecticPath) -> Result<i64, SympError> {
    use std::f64::consts::PI;
    let n = path.n;
    let m = path.endpoint();
    let id = DMatrix::identity(2 * n, 2 * n);
    // |det(I−M)|^(1/2n) gauges the distance of the nearest eigenvalue to 1.
    let det_gap = (&id - m).determinant();
    if det_gap.abs().powf(1.0 / (2 * n) as f64) < DEGENERACY_TOL {
        return Err(SympError::DegenerateEndpoint);
    }
    let delta = polar_winding(&path.samples)?;
    let u = polar_unitary(m);
    let p = polar_positive(m);
    if !shrink_path_stays_nondegenerate(&u, &p) {
        return Err(SympError::UnsupportedEndpoint);
    }
    let correction: f64 = signed_rotation_angles(&u).iter().map(|phi| PI - phi).sum();
    let raw = (delta + correction) / PI;
    let index = raw.round();
    if (raw - index).abs() > INDEX_ROUND_TOL {
        return Err(SympError::NonIntegerIndex(raw, INDEX_ROUND_TOL));
    }
    let index = index as i64;
    // (-1)^(μ-n) = sign det(I - Ψ(1)); a mismatch means lost winding.
    let parity_ok = if det_gap > 0.0 {
        (index - n as i64).rem_euclid(2) == 0
    } else {
        (index - n as i64).rem_euclid(2) == 1
    };
    if !parity_ok {
        return Err(SympError::ParityMismatch);
    }
    Ok(index)
}

/// Conley–Zehnder index of a symplectic path.
///
/// Without the flag the endpoint must have no eigenvalue 1. With the flag the
/// index is the mean of the two opposite ε-rotation perturbations, computed
/// at ε and ε/2 and required to agree; the mean must land on an integer.
pub fn cz_index(path: &SymplecticPath, degenerate: bool) -> Result<i64, SympError> {
    if !degenerate {
        return cz_nondegenerate(path);
    }
    let side = |sign: f64| -> Result<i64, SympError> {
        let at = cz_nondegenerate(&path.perturbed(sign * CZ_EPS))?;
        let at_half = cz_nondegenerate(&path.perturbed(sign * CZ_EPS / 2.0))?;
        if at != at_half {
            return Err(SympError::PerturbationUnstable(at, at_half));
        }
        Ok(at)
    };
    let plus = side(1.0)?;
    let minus = side(-1.0)?;
    if (plus + minus) % 2 != 0 {
        return Err(SympError::HalfIntegerIndex((plus + minus) as f64 / 2.0));
    }
    Ok((plus + minus) / 2)
}

/// Difference of the two absolute indices; both paths may be degenerate.
pub fn cz_index_relative(
    reference: &SymplecticPath,
    path: &SymplecticPath,
    degenerate: bool,
) -> Result<i64, SympError> {
    Ok(cz_index(path, degenerate)? - cz_index(reference, degenerate)?)
}

/// Winding number of `det_C` of the unitary polar part around a loop.
pub fn maslov_loop_index(path: &SymplecticPath) -> Result<i64, SympError> {
    use std::f64::consts::TAU;
    let closure = op_norm(&(path.endpoint() - &path.samples[0]));
    if closure > TOL_SYMP {
        return Err(SympError::NotALoop(closure));
    }
    let delta = polar_winding(&path.samples)?;
    let raw = delta / TAU;
    let index = raw.round();
    if (raw - index).abs() > INDEX_ROUND_TOL {
        return Err(SympError::NonIntegerIndex(raw, INDEX_ROUND_TOL));
    }
    Ok(index as i64)
}

mod serde_impl {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    /// Wire format: `{"n":N,"samples":[[row-major 2N×2N floats],...]}`.
    #[derive(Serialize, Deserialize)]
    struct PathDto {
        n: usize,
        samples: Vec<Vec<f64>>,
    }

    impl Serialize for SymplecticPath {
        fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
            PathDto {
                n: self.n,
                samples: self
                    .samples
                    .iter()
                    .map(|m| m.transpose().as_slice().to_vec())
                    .collect(),
            }
            .serialize(serializer)
        }
    }

    impl<'de> Deserialize<'de> for SymplecticPath {
        fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
            let dto = PathDto::deserialize(deserializer)?;
            let dim = 2 * dto.n;
            let samples = dto
                .samples
                .into_iter()
                .map(|flat| {
                    if flat.len() != dim * dim {
                        return Err(D::Error::custom(format!(
                            "sample has {} entries, expected {}",
                            flat.len(),
                            dim * dim
                        )));
                    }
                    Ok(DMatrix::from_row_slice(dim, dim, &flat))
                })
                .collect::<Result<Vec<_>, _>>()?;
            SymplecticPath::from_samples(dto.n, samples).map_err(D::Error::custom)
        }
    }
}

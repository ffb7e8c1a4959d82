//! Numerical toolkit for Morse–Bott chain complexes over GF(2), symplectic
//! path indices, Hamiltonian flows, and twisted closed-orbit shooting.
//!
//! The crate is organized in five independent layers:
//!
//! * [`z2complex`] — packed GF(2) matrices, graded and periodic chain
//!   complexes, homology, and quotients by free cyclic actions.
//! * [`sympindex`] — Conley–Zehnder and Maslov indices of sampled paths of
//!   symplectic matrices.
//! * [`hamflow`] — Hamiltonian models (standard and magnetic), RK4 and
//!   closed-form flows, cotangent lifts, and defining Hamiltonians for
//!   star-shaped hypersurfaces.
//! * [`twistorbit`] — Newton shooting for twisted closed Reeb orbits, action
//!   and monodromy diagnostics, covering-loop lifting, and displacement
//!   energy identities.
//! * [`mbhomology`] — assembly of cascade chain complexes from critical
//!   data and the equivariant homology tables built on top of them.

pub mod hamflow;
pub mod mbhomology;
pub mod sympindex;
pub mod tolerances;
pub mod twistorbit;
pub mod z2complex;

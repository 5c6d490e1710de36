//! Coefficient spaces and the Galerkin operator algebra.
//!
//! Unknowns are stored as expansion coefficients. Galerkin matrices map them
//! to L² pairings, which differ from expansion coefficients by r_i² on sphere
//! i; the "operator" forms divide that factor back out.
//!
//! With G = diag(r²), D = diag(|κ−κ0|/κ0 · ℓ/r) and V the single-layer
//! Galerkin matrix, the reduced systems are
//!
//! ```text
//! Ã      : G + s·V·D
//! Ã^sym  : G + s·D^½·V·D^½        (s = +1 if κ > κ0, −1 if κ < κ0)
//! A*     : G − C·DtN·V            (C = (κ0−κ)/κ0, full space)
//! ```

mod coeff;
mod galerkin;
mod single_layer;
mod theory;

pub use coeff::{triple_norm, triple_norm_dual, CoeffVector, Repr, Space};
pub use galerkin::{
    apply_a_star_full, apply_a_star_with_contrasts, apply_a_sym, apply_a_tilde, apply_dtn,
    apply_v, assemble_rhs, dtn_kappa_diagonal, reconstruct_nu, sign_of, uniform_free_charge,
    ASymGalerkin, AStarGalerkin, ATildeGalerkin, DiagonalOperator, DiagonalRole,
};
pub use single_layer::{MatvecMode, SingleLayer, DIRECT_MAX_SPHERES};
pub use theory::{compute_theory_constants, estimate_c_v, TheoryConstants};

//! Explicit dense matrices of the Galerkin operators for small problems.
//!
//! Everything here is O(M²) memory and exists to check the matrix-free
//! operators, the similarity transform and the spectral bounds.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::harmonics::{degrees, sh_count, translation_block, BlockMethod};
use crate::krylov::LinearMap;
use crate::operators::{dtn_kappa_diagonal, sign_of, DiagonalRole, Space};

/// Largest dense dimension these helpers will allocate.
pub const DENSE_MAX_DIM: usize = 6000;

fn guard(dim: usize) -> Result<()> {
    if dim > DENSE_MAX_DIM {
        return Err(Error::ResourceGuard(format!("dense dimension {dim} exceeds {DENSE_MAX_DIM}")));
    }
    Ok(())
}

/// Full-space Galerkin matrix of V (pairings × expansion coefficients).
pub fn single_layer_matrix(config: &Configuration, lmax: usize, method: BlockMethod) -> Result<DMatrix<f64>> {
    let n = config.len();
    let k = sh_count(lmax);
    guard(n * k)?;
    let mut m = DMatrix::zeros(n * k, n * k);
    for i in 0..n {
        for j in 0..n {
            let b = translation_block(config, j, i, lmax, method)?;
            for t in 0..k {
                for s in 0..k {
                    m[(i * k + t, j * k + s)] = b.get(t, s);
                }
            }
        }
    }
    Ok(m)
}

/// Drop the ℓ = 0 rows and columns.
pub fn reduce(full: &DMatrix<f64>, n: usize, lmax: usize) -> DMatrix<f64> {
    let keep = reduced_indices(n, lmax);
    DMatrix::from_fn(keep.len(), keep.len(), |r, c| full[(keep[r], keep[c])])
}

fn reduced_indices(n: usize, lmax: usize) -> Vec<usize> {
    let k = sh_count(lmax);
    (0..n).flat_map(|i| (1..k).map(move |t| i * k + t)).collect()
}

fn r2(config: &Configuration, lmax: usize, space: Space) -> DVector<f64> {
    let k = space.per_sphere(lmax);
    DVector::from_iterator(
        config.len() * k,
        config.spheres.iter().flat_map(|s| std::iter::repeat(s.radius * s.radius).take(k)),
    )
}

fn diag(config: &Configuration, lmax: usize, role: DiagonalRole) -> DVector<f64> {
    DVector::from_vec(dtn_kappa_diagonal(config, lmax, Space::Reduced, role).values)
}

/// Reduced Galerkin matrix G + s·V·D.
pub fn a_tilde_matrix(config: &Configuration, v_full: &DMatrix<f64>, lmax: usize) -> Result<DMatrix<f64>> {
    let s = sign_of(config)?;
    let v = reduce(v_full, config.len(), lmax);
    let d = diag(config, lmax, DiagonalRole::DtnKappa);
    let mut a = v * DMatrix::from_diagonal(&d) * s;
    a.set_diagonal(&(a.diagonal() + r2(config, lmax, Space::Reduced)));
    Ok(a)
}

/// Symmetric Galerkin matrix G + s·D^½·V·D^½.
pub fn a_sym_matrix(config: &Configuration, v_full: &DMatrix<f64>, lmax: usize) -> Result<DMatrix<f64>> {
    let s = sign_of(config)?;
    let v = reduce(v_full, config.len(), lmax);
    let h = DMatrix::from_diagonal(&diag(config, lmax, DiagonalRole::DtnKappaSqrt));
    let mut a = &h * v * &h * s;
    a.set_diagonal(&(a.diagonal() + r2(config, lmax, Space::Reduced)));
    Ok(a)
}

/// Full-space Galerkin matrix G − C·DtN·V.
pub fn a_star_matrix(config: &Configuration, v_full: &DMatrix<f64>, lmax: usize) -> DMatrix<f64> {
    let deg = degrees(lmax);
    let cd = DVector::from_iterator(
        v_full.nrows(),
        config.spheres.iter().flat_map(|s| {
            let c = (config.kappa0 - s.kappa) / config.kappa0;
            deg.iter().map(move |&l| c * l as f64 / s.radius)
        }),
    );
    let mut a = -(DMatrix::from_diagonal(&cd) * v_full);
    a.set_diagonal(&(a.diagonal() + r2(config, lmax, Space::Full)));
    a
}

/// D^½ on the reduced space: the similarity between Ã and Ã^sym for any radii.
pub fn dtn_kappa_sqrt_matrix(config: &Configuration, lmax: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&diag(config, lmax, DiagonalRole::DtnKappaSqrt))
}

/// The DtN^κ matrix in the pairing convention, |Δκ/κ0|^½ · r² · (ℓ/r)^½.
pub fn dtn_kappa_pairing_matrix(config: &Configuration, lmax: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&diag(config, lmax, DiagonalRole::DtnKappaMatrix))
}

/// ‖A − T⁻¹·B·T‖_F / ‖A‖_F for a diagonal T.
pub fn similarity_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    let tinv = DMatrix::from_diagonal(&t.diagonal().map(|v| 1.0 / v));
    (a - tinv * b * t).norm() / a.norm()
}

/// Eigenvalues of the pencil (A, G) for symmetric A and diagonal G > 0, ascending.
pub fn pencil_eigenvalues(a: &DMatrix<f64>, g: &DVector<f64>) -> Vec<f64> {
    let w = g.map(|v| 1.0 / v.sqrt());
    let wm = DMatrix::from_diagonal(&w);
    let s = &wm * a * &wm;
    let sym = (&s + s.transpose()) * 0.5;
    let mut e: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Diagonal of G on the reduced space.
pub fn reduced_mass(config: &Configuration, lmax: usize) -> DVector<f64> {
    r2(config, lmax, Space::Reduced)
}

/// Diagonal of G on the full space.
pub fn full_mass(config: &Configuration, lmax: usize) -> DVector<f64> {
    r2(config, lmax, Space::Full)
}

/// Dense matrix as a linear map.
#[derive(Debug, Clone)]
pub struct DenseMap {
    pub matrix: DMatrix<f64>,
    pub symmetric: bool,
}

impl LinearMap for DenseMap {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let r = &self.matrix * DVector::from_column_slice(x);
        y.copy_from_slice(r.as_slice());
    }
    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Solve A x = b by LU.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    a.clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .map(|v| v.as_slice().to_vec())
        .ok_or_else(|| Error::Domain("singular dense matrix".into()))
}

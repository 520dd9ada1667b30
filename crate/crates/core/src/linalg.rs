//! Complex linear algebra and Grassmann-manifold geometry.
//!
//! Decompositions are backed by `nalgebra`; this module adds the contract
//! the rest of the crate relies on: sorted spectra, a canonical column phase
//! (largest-magnitude entry real and positive), and validated subspaces.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};

use crate::{Error, Result};

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Orthonormality tolerance for bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Hermitian symmetry tolerance (relative to the largest entry).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalue gap under which the centroid is reported as non-unique.
pub const EIGEN_TIE_TOL: f64 = 1e-9;

const SOLVER_EPS: f64 = 1e-15;
const SOLVER_MAX_ITERS: usize = 10_000;

/// Thin SVD `M = U diag(σ) V^H` with `r = min(rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

/// An `n`-dimensional subspace of `C^m`, stored as an `m × n` orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: ComplexMatrix,
}

impl Subspace {
    /// Wraps a basis, checking `B^H B = I` within [`ORTHONORMAL_TOL`].
    pub fn new(basis: ComplexMatrix) -> Result<Self> {
        check_finite(&basis)?;
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::dims(format!(
                "subspace basis must be tall with at least one column, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let err = orthonormality_error(&basis);
        if err > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "basis columns not orthonormal (max |B^H B - I| = {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalises the columns of `m` (modified Gram-Schmidt) and wraps the result.
    pub fn orthonormalize(m: &ComplexMatrix) -> Result<Self> {
        check_finite(m)?;
        let q = gram_schmidt(m)?;
        Self::new(q)
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn into_basis(self) -> ComplexMatrix {
        self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `B B^H`.
    pub fn projector(&self) -> ComplexMatrix {
        &self.basis * self.basis.adjoint()
    }
}

pub(crate) fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("matrix contains non-finite entries"))
    }
}

/// `max |B^H B - I|` over all entries.
pub fn orthonormality_error(b: &ComplexMatrix) -> f64 {
    let gram = b.adjoint() * b;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

fn gram_schmidt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        // two passes keep the columns orthonormal to working precision
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i).clone_owned();
                let proj = qi.dotc(&q.column(j));
                q.column_mut(j).axpy(-proj, &qi, C64::new(1.0, 0.0));
            }
        }
        let norm = q.column(j).norm();
        if norm < 1e-12 {
            return Err(Error::NumericalFailure(
                "rank-deficient input to orthonormalisation".into(),
            ));
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Ok(q)
}

/// Rotates the column so its largest-magnitude entry is real and positive.
/// Returns the unit phase the column was multiplied by.
fn canonical_phase(col: &[C64]) -> C64 {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return C64::new(1.0, 0.0);
    }
    col[best].conj() / best_mag
}

fn canonicalize_columns(m: &mut ComplexMatrix) -> Vec<C64> {
    (0..m.ncols())
        .map(|j| {
            let col: Vec<C64> = m.column(j).iter().copied().collect();
            let phase = canonical_phase(&col);
            m.column_mut(j).iter_mut().for_each(|z| *z *= phase);
            phase
        })
        .collect()
}

/// Thin singular value decomposition with nonincreasing singular values and
/// canonical column phases on `U` (the same phase is applied to `V`).
pub fn svd(matrix: &ComplexMatrix) -> Result<SvdTriple> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    check_finite(matrix)?;
    let dec = SVD::try_new(matrix.clone(), true, true, SOLVER_EPS, SOLVER_MAX_ITERS)
        .ok_or_else(|| Error::NumericalFailure("SVD iteration did not converge".into()))?;
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let sigma = dec.singular_values;

    let r = sigma.len();
    let mut order: Vec<usize> = (0..r).collect();
    // stable: equal singular values keep solver order
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut u_sorted = ComplexMatrix::zeros(matrix.nrows(), r);
    let mut v_sorted = ComplexMatrix::zeros(matrix.ncols(), r);
    let mut values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v_t.row(src).adjoint());
        values.push(sigma[src].max(0.0));
    }
    let phases = canonicalize_columns(&mut u_sorted);
    for (j, p) in phases.into_iter().enumerate() {
        v_sorted.column_mut(j).iter_mut().for_each(|z| *z *= p);
    }
    Ok(SvdTriple {
        u: u_sorted,
        singular_values: values,
        v: v_sorted,
    })
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigen {
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

pub fn hermitian_eig(g: &ComplexMatrix) -> Result<HermitianEigen> {
    if !g.is_square() || g.nrows() == 0 {
        return Err(Error::invalid(format!(
            "hermitian_eig needs a nonempty square matrix, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    check_finite(g)?;
    let scale = g.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let asym = (g - g.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian (max |G - G^H| = {asym:e})"
        )));
    }
    let sym = (g + g.adjoint()).scale(0.5);
    let dec = SymmetricEigen::try_new(sym, SOLVER_EPS, SOLVER_MAX_ITERS)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigen iteration did not converge".into()))?;

    let n = g.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[b].total_cmp(&dec.eigenvalues[a]));
    let mut vecs = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &dec.eigenvectors.column(src));
        values.push(dec.eigenvalues[src]);
    }
    let mut vecs = gram_schmidt(&vecs)?;
    canonicalize_columns(&mut vecs);
    Ok(HermitianEigen {
        eigenvalues: values,
        eigenvectors: vecs,
    })
}

fn check_same_shape(u: &Subspace, a: &Subspace) -> Result<()> {
    if u.ambient_dim() != a.ambient_dim() || u.dim() != a.dim() {
        return Err(Error::dims(format!(
            "subspaces of Gr({}, {}) and Gr({}, {})",
            u.dim(),
            u.ambient_dim(),
            a.dim(),
            a.ambient_dim()
        )));
    }
    Ok(())
}

/// Projection 2-norm distance `‖UU^H − AA^H‖_2`.
pub fn proj_dist_2(u: &Subspace, a: &Subspace) -> Result<f64> {
    check_same_shape(u, a)?;
    let diff = u.projector() - a.projector();
    // Hermitian: spectral norm is the largest eigenvalue magnitude
    let eig = hermitian_eig(&diff)?;
    let first = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let last = eig.eigenvalues.last().copied().unwrap_or(0.0);
    Ok(first.abs().max(last.abs()))
}

/// Projection Frobenius distance `‖UU^H − AA^H‖_F`.
pub fn proj_dist_fro(u: &Subspace, a: &Subspace) -> Result<f64> {
    check_same_shape(u, a)?;
    Ok((u.projector() - a.projector()).norm())
}

/// Grassmann centroid under the projection Frobenius distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub subspace: Subspace,
    /// Full spectrum of `G = Σ_k U_k U_k^H`, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Set when `λ_N = λ_{N+1}` within [`EIGEN_TIE_TOL`]: the optimum is not unique.
    pub non_unique: bool,
}

impl Centroid {
    /// `Σ_k d_PF²(U_k, A*) = 2(NK − Σ_{i≤N} λ_i)` for `k` input subspaces.
    pub fn objective(&self, k: usize) -> f64 {
        let n = self.subspace.dim();
        let top: f64 = self.eigenvalues.iter().take(n).sum();
        2.0 * ((n * k) as f64 - top)
    }
}

/// First `n` principal eigenvectors of `G = Σ_k U_k U_k^H`; minimises
/// `Σ_k d_PF²(U_k, A)` over all tall unitary `A`.
pub fn grassmann_centroid(subspaces: &[Subspace], n: usize) -> Result<Centroid> {
    let first = subspaces
        .first()
        .ok_or_else(|| Error::invalid("grassmann_centroid of an empty set"))?;
    let m = first.ambient_dim();
    if n == 0 || n > m {
        return Err(Error::dims(format!("centroid dimension {n} must lie in 1..={m}")));
    }
    let mut g = ComplexMatrix::zeros(m, m);
    for s in subspaces {
        if s.ambient_dim() != m {
            return Err(Error::dims(format!(
                "ambient dimensions differ: {} vs {m}",
                s.ambient_dim()
            )));
        }
        g += s.projector();
    }
    let eig = hermitian_eig(&g)?;
    let non_unique = n < m && (eig.eigenvalues[n - 1] - eig.eigenvalues[n]).abs() <= EIGEN_TIE_TOL;
    let basis = eig.eigenvectors.columns(0, n).clone_owned();
    Ok(Centroid {
        subspace: Subspace::new(basis)?,
        eigenvalues: eig.eigenvalues,
        non_unique,
    })
}

//! Dense operators on the 2^N-dimensional spin-1/2 Hilbert space.
//!
//! Basis convention: site 1 is the leftmost tensor factor, so site `j`
//! occupies bit `N - j` of the basis index. A zero bit is spin up
//! (Z eigenvalue +1).

use std::ops::Range;

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Entry-wise tolerance for Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Tolerance on the trace and on negative eigenvalues of density matrices.
pub const DENSITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Hermitian matrix acting on `n_sites` spins.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    n_sites: usize,
    mat: Mat<c64>,
}

fn dim_of(n_sites: usize) -> usize {
    1usize << n_sites
}

pub(crate) fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..d {
        for i in 0..=j {
            let e = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(e);
        }
    }
    worst
}

fn symmetrized(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i == j {
            c64::new(m[(i, i)].re, 0.0)
        } else {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }
    })
}

/// Tr(AB) for square matrices of equal size.
pub(crate) fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let d = a.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub(crate) fn frobenius(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

impl HermitianOperator {
    /// Wraps a dense matrix after checking its shape and Hermiticity.
    /// The stored matrix is the exact Hermitian part of the input.
    pub fn from_matrix(n_sites: usize, mat: Mat<c64>) -> Result<Self> {
        let d = dim_of(n_sites);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: mat.nrows().max(mat.ncols()),
            });
        }
        let defect = hermiticity_defect(mat.as_ref());
        if defect > HERMITICITY_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self {
            n_sites,
            mat: symmetrized(mat.as_ref()),
        })
    }

    pub(crate) fn from_matrix_unchecked(n_sites: usize, mat: Mat<c64>) -> Self {
        debug_assert_eq!(mat.nrows(), dim_of(n_sites));
        Self { n_sites, mat }
    }

    pub fn zeros(n_sites: usize) -> Self {
        let d = dim_of(n_sites);
        Self {
            n_sites,
            mat: Mat::zeros(d, d),
        }
    }

    pub fn identity(n_sites: usize) -> Self {
        let d = dim_of(n_sites);
        Self {
            n_sites,
            mat: Mat::identity(d, d),
        }
    }

    /// Real diagonal operator.
    pub fn from_diagonal(n_sites: usize, diag: &[f64]) -> Result<Self> {
        let d = dim_of(n_sites);
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: diag.len(),
            });
        }
        let mut mat = Mat::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            mat[(i, i)] = c64::new(x, 0.0);
        }
        Ok(Self { n_sites, mat })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.mat
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.mat[(i, j)] == c64::new(0.0, 0.0)))
    }

    /// True when every entry has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| self.mat[(i, j)].im == 0.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mat = Mat::from_fn(self.dim(), self.dim(), |i, j| {
            self.mat[(i, j)] + other.mat[(i, j)] * s
        });
        Ok(Self {
            n_sites: self.n_sites,
            mat,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mat = Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * s);
        Self {
            n_sites: self.n_sites,
            mat,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Hilbert–Schmidt inner product Tr(A B) (real for Hermitian A, B).
    pub fn hs_inner(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(trace_product(self.matrix(), other.matrix()).re)
    }

    pub fn hs_norm(&self) -> f64 {
        frobenius(self.matrix())
    }

    /// Dense commutator `AB - BA` (anti-Hermitian).
    pub fn commutator(&self, other: &Self) -> Result<Mat<c64>> {
        self.check_same(other)?;
        let ab = &self.mat * &other.mat;
        let ba = &other.mat * &self.mat;
        Ok(ab - ba)
    }

    /// Matrix product, returned as a bare matrix since it need not be Hermitian.
    pub fn product(&self, other: &Self) -> Result<Mat<c64>> {
        self.check_same(other)?;
        Ok(&self.mat * &other.mat)
    }
}

/// Adds `coef * P` to `mat` for the Pauli string `P` given as (site, axis) factors.
pub(crate) fn add_pauli_string(
    mat: &mut Mat<c64>,
    n_sites: usize,
    coef: c64,
    factors: &[(usize, Pauli)],
) -> Result<()> {
    let mut seen = 0usize;
    let mut flip = 0usize;
    for &(site, _) in factors {
        if site == 0 || site > n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites });
        }
        let bit = 1usize << (n_sites - site);
        if seen & bit != 0 {
            return Err(Error::DuplicateSite(site));
        }
        seen |= bit;
    }
    for &(site, axis) in factors {
        if matches!(axis, Pauli::X | Pauli::Y) {
            flip |= 1usize << (n_sites - site);
        }
    }
    let d = dim_of(n_sites);
    let i_unit = c64::new(0.0, 1.0);
    for b in 0..d {
        let mut phase = c64::new(1.0, 0.0);
        for &(site, axis) in factors {
            let down = (b >> (n_sites - site)) & 1 == 1;
            match (axis, down) {
                (Pauli::X, _) => {}
                (Pauli::Y, false) => phase *= i_unit,
                (Pauli::Y, true) => phase *= -i_unit,
                (Pauli::Z, false) => {}
                (Pauli::Z, true) => phase = -phase,
            }
        }
        mat[(b ^ flip, b)] += coef * phase;
    }
    Ok(())
}

/// Tensor product of single-site Pauli matrices with identity on the
/// remaining sites. Sites are 1-based.
pub fn build_pauli_string(n_sites: usize, factors: &[(usize, Pauli)]) -> Result<HermitianOperator> {
    let d = dim_of(n_sites);
    let mut mat = Mat::zeros(d, d);
    add_pauli_string(&mut mat, n_sites, c64::new(1.0, 0.0), factors)?;
    Ok(HermitianOperator::from_matrix_unchecked(n_sites, mat))
}

/// ‖[A, B]‖_HS, evaluated from the dense commutator.
pub fn commutator_hs_norm(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    Ok(frobenius(a.commutator(b)?.as_ref()))
}

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<c64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn spectral_span(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    /// Eigenvalues closer than this are treated as one degenerate block.
    pub fn degeneracy_tolerance(&self) -> f64 {
        1e-9 * self.spectral_span()
    }

    /// Index ranges of degenerate blocks, in ascending energy.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let tol = self.degeneracy_tolerance();
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.dim() {
            if k == self.dim() || self.eigenvalues[k] - self.eigenvalues[start] > tol {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Multiplicity of the lowest eigenvalue.
    pub fn ground_multiplicity(&self) -> usize {
        self.blocks()[0].len()
    }

    /// Matrix elements U† A U in the eigenbasis.
    pub fn to_eigenbasis(&self, a: &HermitianOperator) -> Result<Mat<c64>> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: a.dim(),
            });
        }
        let au = a.matrix() * &self.eigenvectors;
        Ok(self.eigenvectors.adjoint() * au)
    }

    /// U diag(E) U†.
    pub fn reconstruct(&self) -> Mat<c64> {
        spectral_sum(&self.eigenvalues, self.eigenvectors.as_ref())
    }

    /// Rotates each degenerate block so that the block of `v` is diagonal.
    /// Within a block, columns are ordered by ascending eigenvalue of P V P.
    pub fn resolve_degenerate_blocks(&self, v: &HermitianOperator) -> Result<Self> {
        let mut vectors = self.eigenvectors.clone();
        for block in self.blocks() {
            if block.len() < 2 {
                continue;
            }
            let cols = self.eigenvectors.subcols(block.start, block.len());
            let vp = cols.adjoint() * (v.matrix() * cols);
            let vp = symmetrized(vp.as_ref());
            let small = eigh_matrix(vp.as_ref())?;
            let rotated = cols * &small.eigenvectors;
            vectors
                .subcols_mut(block.start, block.len())
                .copy_from(&rotated);
        }
        Ok(Self {
            eigenvalues: self.eigenvalues.clone(),
            eigenvectors: vectors,
        })
    }
}

/// Σ_k w_k |u_k⟩⟨u_k| for the columns of `u`.
pub(crate) fn spectral_sum(weights: &[f64], u: MatRef<'_, c64>) -> Mat<c64> {
    let scaled = Mat::from_fn(u.nrows(), u.ncols(), |i, k| u[(i, k)] * weights[k]);
    let out = &scaled * u.adjoint();
    symmetrized(out.as_ref())
}

fn eigh_diagonal(diag: &[f64]) -> SpectralDecomposition {
    let d = diag.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let eigenvalues = order.iter().map(|&k| diag[k]).collect();
    let mut eigenvectors = Mat::zeros(d, d);
    for (col, &row) in order.iter().enumerate() {
        eigenvectors[(row, col)] = c64::new(1.0, 0.0);
    }
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Real symmetric eigensolve returning ascending eigenvalues.
pub(crate) fn eigh_real(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenNonConvergence)?;
    let s = e.S().column_vector();
    let vals = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

fn is_diagonal_matrix(m: MatRef<'_, c64>) -> bool {
    let d = m.nrows();
    (0..d).all(|j| (0..d).all(|i| i == j || m[(i, j)] == c64::new(0.0, 0.0)))
}

pub(crate) fn is_real_matrix(m: MatRef<'_, c64>) -> bool {
    let d = m.nrows();
    (0..d).all(|j| (0..d).all(|i| m[(i, j)].im == 0.0))
}

/// Eigendecomposition of a Hermitian matrix with exact fast paths for
/// diagonal and real-symmetric inputs.
pub(crate) fn eigh_matrix(m: MatRef<'_, c64>) -> Result<SpectralDecomposition> {
    let d = m.nrows();
    if is_diagonal_matrix(m) {
        let diag: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
        return Ok(eigh_diagonal(&diag));
    }
    if is_real_matrix(m) {
        let re = Mat::from_fn(d, d, |i, j| m[(i, j)].re);
        let (eigenvalues, u) = eigh_real(re.as_ref())?;
        let eigenvectors = Mat::from_fn(d, d, |i, j| c64::new(u[(i, j)], 0.0));
        return Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        });
    }
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenNonConvergence)?;
    let s = e.S().column_vector();
    let eigenvalues = (0..d).map(|i| s[i].re).collect();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: e.U().to_owned(),
    })
}

pub fn eigh(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    eigh_matrix(h.matrix())
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: Mat<c64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity before wrapping.
    pub fn new(mat: Mat<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                left: mat.nrows(),
                right: mat.ncols(),
            });
        }
        let defect = hermiticity_defect(mat.as_ref());
        if defect > HERMITICITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "Hermiticity defect {defect:e}"
            )));
        }
        let mat = symmetrized(mat.as_ref());
        let tr: f64 = (0..mat.nrows()).map(|i| mat[(i, i)].re).sum();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let spec = eigh_matrix(mat.as_ref())?;
        if spec.eigenvalues[0] < -DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {:e}",
                spec.eigenvalues[0]
            )));
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_matrix_unchecked(mat: Mat<c64>) -> Self {
        Self { mat }
    }

    /// Σ_k p_k |u_k⟩⟨u_k|; `weights` must be non-negative and sum to one.
    pub(crate) fn from_weights(weights: &[f64], vectors: MatRef<'_, c64>) -> Self {
        Self {
            mat: spectral_sum(weights, vectors),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut mat = Mat::zeros(dim, dim);
        for i in 0..dim {
            mat[(i, i)] = c64::new(1.0 / dim as f64, 0.0);
        }
        Self { mat }
    }

    /// |ψ⟩⟨ψ| for the normalized version of `psi`.
    pub fn pure(psi: &[c64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        let d = psi.len();
        let mat = Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self {
            mat: symmetrized(mat.as_ref()),
        })
    }

    /// Computational basis projector |k⟩⟨k|.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut mat = Mat::zeros(dim, dim);
        mat[(k, k)] = c64::new(1.0, 0.0);
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn purity(&self) -> f64 {
        frobenius(self.matrix()).powi(2)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(self.matrix())
    }

    /// Tr(ρσ).
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(trace_product(self.matrix(), other.matrix()).re)
    }

    /// ‖ρ − σ‖_HS.
    pub fn hs_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(frobenius((&self.mat - &other.mat).as_ref()))
    }

    pub fn spectrum(&self) -> Result<SpectralDecomposition> {
        eigh_matrix(self.matrix())
    }
}

/// (Tr ρσ)² / (Tr ρ² Tr σ²), clamped to [0, 1].
pub fn hs_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let s = rho.overlap(sigma)?;
    let f = s * s / (rho.purity() * sigma.purity());
    Ok(f.clamp(0.0, 1.0))
}

/// arccos √F, in [0, π/2].
///
/// Evaluated as the angle between ρ₀/‖ρ₀‖ and ρ/‖ρ‖ through
/// 2 atan2(‖a − b‖, ‖a + b‖), which keeps full precision near F = 1.
/// The two forms agree because Tr ρ₀ρ ≥ 0 for positive operators.
pub fn hs_angle(rho0: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    if rho0.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: rho.dim(),
        });
    }
    let na = frobenius(rho0.matrix());
    let nb = frobenius(rho.matrix());
    let d = rho0.dim();
    let mut diff = 0.0;
    let mut sum = 0.0;
    for j in 0..d {
        for i in 0..d {
            let a = rho0.mat[(i, j)] / na;
            let b = rho.mat[(i, j)] / nb;
            diff += (a - b).norm_sqr();
            sum += (a + b).norm_sqr();
        }
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).min(std::f64::consts::FRAC_PI_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn max_entry(m: MatRef<'_, c64>) -> f64 {
        m.norm_max()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> Mat<c64> {
        let a = Mat::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let ah = a.adjoint().to_owned();
        (a + ah) * faer::Scale(c(0.5, 0.0))
    }

    fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> Mat<c64> {
        eigh_matrix(random_hermitian(rng, d).as_ref()).unwrap().eigenvectors
    }

    fn random_density(rng: &mut ChaCha8Rng, d: usize) -> DensityMatrix {
        let u = random_unitary(rng, d);
        let mut w: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        if rng.random::<f64>() < 0.3 {
            w[0] = 0.0;
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        DensityMatrix::from_weights(&w, u.as_ref())
    }

    #[test]
    fn single_site_z() {
        let z = build_pauli_string(1, &[(1, Pauli::Z)]).unwrap();
        assert_eq!(z.matrix()[(0, 0)], c(1.0, 0.0));
        assert_eq!(z.matrix()[(1, 1)], c(-1.0, 0.0));
        assert_eq!(z.matrix()[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn empty_product_is_identity() {
        let id = build_pauli_string(2, &[]).unwrap();
        assert_eq!(max_entry((id.matrix() - Mat::<c64>::identity(4, 4)).as_ref()), 0.0);
    }

    #[test]
    fn xx_is_antidiagonal() {
        let xx = build_pauli_string(2, &[(1, Pauli::X), (2, Pauli::X)]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i + j == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx.matrix()[(i, j)], c(want, 0.0));
            }
        }
    }

    #[test]
    fn y_matches_textbook_matrix() {
        let y = build_pauli_string(1, &[(1, Pauli::Y)]).unwrap();
        assert_eq!(y.matrix()[(0, 1)], c(0.0, -1.0));
        assert_eq!(y.matrix()[(1, 0)], c(0.0, 1.0));
    }

    #[test]
    fn site_ordering_is_big_endian() {
        // Z on site 1 of two sites: diag(1, 1, -1, -1).
        let z1 = build_pauli_string(2, &[(1, Pauli::Z)]).unwrap();
        assert_eq!(z1.diagonal(), vec![1.0, 1.0, -1.0, -1.0]);
        let z2 = build_pauli_string(2, &[(2, Pauli::Z)]).unwrap();
        assert_eq!(z2.diagonal(), vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn pauli_string_errors() {
        assert_eq!(
            build_pauli_string(2, &[(1, Pauli::X), (1, Pauli::Z)]).unwrap_err(),
            Error::DuplicateSite(1)
        );
        assert_eq!(
            build_pauli_string(2, &[(3, Pauli::X)]).unwrap_err(),
            Error::SiteOutOfRange { site: 3, n_sites: 2 }
        );
        assert!(build_pauli_string(2, &[(0, Pauli::X)]).is_err());
    }

    #[test]
    fn xyz_product_identity() {
        // XY = iZ on one site, so X1 Y1 as a product equals i Z1.
        let x = build_pauli_string(3, &[(2, Pauli::X)]).unwrap();
        let y = build_pauli_string(3, &[(2, Pauli::Y)]).unwrap();
        let z = build_pauli_string(3, &[(2, Pauli::Z)]).unwrap();
        let xy = x.product(&y).unwrap();
        let iz = z.matrix() * faer::Scale(c(0.0, 1.0));
        assert!(max_entry((xy - iz).as_ref()) < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let p0 = DensityMatrix::basis_state(2, 0);
        let p1 = DensityMatrix::basis_state(2, 1);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_eq!(hs_fidelity(&p0, &p0).unwrap(), 1.0);
        assert_eq!(hs_fidelity(&p0, &p1).unwrap(), 0.0);
        assert_abs_diff_eq!(hs_fidelity(&mixed, &p0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(hs_angle(&p0, &p0).unwrap(), 0.0);
        assert_abs_diff_eq!(hs_angle(&p0, &p1).unwrap(), std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(
            hs_angle(&mixed, &p0).unwrap(),
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-15
        );
        let p2 = DensityMatrix::basis_state(4, 0);
        assert!(matches!(
            hs_fidelity(&p0, &p2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_validation() {
        let bad_trace = Mat::<c64>::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let mut neg = Mat::<c64>::zeros(2, 2);
        neg[(0, 0)] = c(1.5, 0.0);
        neg[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(neg).is_err());
        let mut nonherm = Mat::<c64>::zeros(2, 2);
        nonherm[(0, 0)] = c(0.5, 0.0);
        nonherm[(1, 1)] = c(0.5, 0.0);
        nonherm[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(nonherm).is_err());
        let ok = DensityMatrix::maximally_mixed(4).matrix().to_owned();
        assert!(DensityMatrix::new(ok).is_ok());
    }

    #[test]
    fn hermitian_check_rejects_asymmetric() {
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 1)] = c(0.0, 1.0);
        m[(1, 0)] = c(0.0, 1.0);
        assert!(matches!(
            HermitianOperator::from_matrix(1, m),
            Err(Error::NotHermitian(_))
        ));
        assert!(HermitianOperator::from_matrix(2, Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn eigh_examples() {
        let d = HermitianOperator::from_diagonal(1, &[3.0, 1.0]).unwrap();
        assert_eq!(eigh(&d).unwrap().eigenvalues, vec![1.0, 3.0]);
        let x = build_pauli_string(1, &[(1, Pauli::X)]).unwrap();
        let e = eigh(&x).unwrap().eigenvalues;
        assert_abs_diff_eq!(e[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigh_complex_path_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [2usize, 8, 32] {
            let n = d.trailing_zeros() as usize;
            let h = HermitianOperator::from_matrix(n, random_hermitian(&mut rng, d)).unwrap();
            let s = eigh(&h).unwrap();
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let rec = s.reconstruct();
            assert!(frobenius((rec - h.matrix()).as_ref()) <= 1e-10 * h.hs_norm());
            let gram = s.eigenvectors.adjoint() * &s.eigenvectors;
            assert!(max_entry((gram - Mat::<c64>::identity(d, d)).as_ref()) <= 1e-12);
        }
    }

    #[test]
    fn commutator_norm_examples() {
        let z = build_pauli_string(1, &[(1, Pauli::Z)]).unwrap();
        let x = build_pauli_string(1, &[(1, Pauli::X)]).unwrap();
        assert_abs_diff_eq!(
            commutator_hs_norm(&z, &x).unwrap(),
            2.0 * 2f64.sqrt(),
            epsilon = 1e-14
        );
        let z2 = z.scaled(3.0);
        assert_eq!(commutator_hs_norm(&z, &z2).unwrap(), 0.0);
    }

    #[test]
    fn commutator_norm_matches_trace_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = HermitianOperator::from_matrix(3, random_hermitian(&mut rng, 8)).unwrap();
        let b = HermitianOperator::from_matrix(3, random_hermitian(&mut rng, 8)).unwrap();
        let a2 = a.product(&a).unwrap();
        let b2 = b.product(&b).unwrap();
        let ab = a.product(&b).unwrap();
        let t1 = trace_product(a2.as_ref(), b2.as_ref()).re;
        let t2 = trace_product(ab.as_ref(), ab.as_ref()).re;
        let oracle = (2.0 * t1 - 2.0 * t2).sqrt();
        assert_abs_diff_eq!(commutator_hs_norm(&a, &b).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn resolve_blocks_diagonalizes_projected_v() {
        let h = HermitianOperator::from_diagonal(2, &[0.0, 1.0, 1.0, 2.0]).unwrap();
        let x = build_pauli_string(2, &[(1, Pauli::X)]).unwrap();
        let xx = build_pauli_string(2, &[(1, Pauli::X), (2, Pauli::X)]).unwrap();
        let v = x.add_scaled(1.0, &xx).unwrap();
        let s = eigh(&h).unwrap().resolve_degenerate_blocks(&v).unwrap();
        let vt = s.to_eigenbasis(&v).unwrap();
        assert!(vt[(1, 2)].norm() < 1e-14);
        assert!(vt[(1, 1)].re <= vt[(2, 2)].re);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fidelity_bounded_and_symmetric(seed in any::<u64>(), n in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 1 << n;
            let r = random_density(&mut rng, d);
            let s = random_density(&mut rng, d);
            let f = hs_fidelity(&r, &s).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - hs_fidelity(&s, &r).unwrap()).abs() < 1e-15);
            prop_assert!((hs_fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-12);
            if (1.0 - f).abs() < 1e-14 {
                prop_assert!(r.hs_distance(&s).unwrap() <= 1e-10);
            }
        }

        #[test]
        fn angle_matches_arccos_form(seed in any::<u64>(), n in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 1 << n;
            let r = random_density(&mut rng, d);
            let s = random_density(&mut rng, d);
            let want = hs_fidelity(&r, &s).unwrap().sqrt().acos();
            prop_assert!((hs_angle(&r, &s).unwrap() - want).abs() <= 1e-7);
            prop_assert_eq!(hs_angle(&r, &r).unwrap(), 0.0);
        }

        #[test]
        fn fidelity_unitary_invariant(seed in any::<u64>(), n in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 1 << n;
            let r = random_density(&mut rng, d);
            let s = random_density(&mut rng, d);
            let u = random_unitary(&mut rng, d);
            let conj = |m: &DensityMatrix| {
                DensityMatrix::from_matrix_unchecked(&u * m.matrix() * u.adjoint())
            };
            let f0 = hs_fidelity(&r, &s).unwrap();
            let f1 = hs_fidelity(&conj(&r), &conj(&s)).unwrap();
            prop_assert!((f0 - f1).abs() <= 1e-12);
        }

        #[test]
        fn eigh_invariants(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 1 << n;
            let h = HermitianOperator::from_matrix(n, random_hermitian(&mut rng, d)).unwrap();
            let s = eigh(&h).unwrap();
            prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let rec = s.reconstruct();
            prop_assert!(frobenius((rec - h.matrix()).as_ref()) <= 1e-10 * h.hs_norm());
            let gram = s.eigenvectors.adjoint() * &s.eigenvectors;
            prop_assert!(max_entry((gram - Mat::<c64>::identity(d, d)).as_ref()) <= 1e-12);
        }

        #[test]
        fn commutator_norm_symmetric_and_zero_iff_commuting(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = HermitianOperator::from_matrix(2, random_hermitian(&mut rng, 4)).unwrap();
            let b = HermitianOperator::from_matrix(2, random_hermitian(&mut rng, 4)).unwrap();
            let ab = commutator_hs_norm(&a, &b).unwrap();
            prop_assert!((ab - commutator_hs_norm(&b, &a).unwrap()).abs() < 1e-14);
            let dense = a.commutator(&b).unwrap();
            prop_assert_eq!(ab == 0.0, max_entry(dense.as_ref()) == 0.0);
            // A polynomial in A commutes with A.
            let a2 = HermitianOperator::from_matrix(2, a.product(&a).unwrap()).unwrap();
            let p = a2.add_scaled(0.5, &a).unwrap();
            prop_assert!(commutator_hs_norm(&a, &p).unwrap() <= 1e-12);
            prop_assert!(max_entry(a.commutator(&p).unwrap().as_ref()) <= 1e-12);
        }
    }
}

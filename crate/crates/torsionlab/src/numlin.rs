//! Dense complex linear algebra used by every other module.
//!
//! All routines are deterministic given identical input bits.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use std::cmp::Ordering;
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative threshold for rank and kernel decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative residual allowed when checking that two bases span the same subspace.
pub const DEFAULT_SPAN_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumlinError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bases do not span the same subspace (relative residual {residual:.3e})")]
    SpanMismatch { residual: f64 },
    #[error("basis is not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("vectors are linearly dependent (condition ratio {ratio:.3e})")]
    Dependent { ratio: f64 },
}

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Ordered list of linearly independent vectors, stored as matrix columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    vectors: CMatrix,
}

impl Basis {
    /// Wraps the columns of `vectors`, rejecting dependent families.
    pub fn new(vectors: CMatrix, tol: f64) -> Result<Self, NumlinError> {
        if vectors.ncols() > vectors.nrows() {
            return Err(NumlinError::DimensionMismatch(format!(
                "{} vectors in dimension {}",
                vectors.ncols(),
                vectors.nrows()
            )));
        }
        if vectors.ncols() > 0 {
            let sv = singular_values(&vectors);
            let ratio = sv.last().copied().unwrap_or(0.0) / sv[0].max(f64::MIN_POSITIVE);
            // Negated so that NaN counts as dependent.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(ratio > tol) {
                return Err(NumlinError::Dependent { ratio });
            }
        }
        Ok(Self { vectors })
    }

    /// Wraps columns already known to be independent.
    pub fn from_matrix(vectors: CMatrix) -> Self {
        Self { vectors }
    }

    pub fn empty(ambient_dim: usize) -> Self {
        Self { vectors: CMatrix::zeros(ambient_dim, 0) }
    }

    pub fn standard(dim: usize) -> Self {
        Self { vectors: CMatrix::identity(dim, dim) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn into_matrix(self) -> CMatrix {
        self.vectors
    }

    /// Appends the vectors of `other` after those of `self`.
    pub fn concat(&self, other: &Basis) -> Basis {
        Basis { vectors: hcat(&self.vectors, &other.vectors) }
    }

    pub fn scaled(&self, factor: C64) -> Basis {
        Basis { vectors: &self.vectors * factor }
    }

    /// Image of the basis under a linear map.
    pub fn mapped(&self, map: &CMatrix) -> Basis {
        Basis { vectors: map * &self.vectors }
    }

    /// Frobenius norm of `B*B - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        (self.vectors.adjoint() * &self.vectors - CMatrix::identity(n, n)).norm()
    }
}

/// Horizontal concatenation of two matrices with equal row counts.
pub fn hcat(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows(), "hcat row mismatch");
    let mut out = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Singular values below this are zero whatever the scale of the matrix.
pub const ABSOLUTE_ZERO: f64 = 1e-12;

/// Numerical rank: singular values with σ² > tol·σ_max² and σ above [`ABSOLUTE_ZERO`].
pub fn rank(a: &CMatrix, tol: f64) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&top) if top > ABSOLUTE_ZERO => sv.iter().filter(|&&s| s * s > tol * top * top && s > ABSOLUTE_ZERO).count(),
        _ => 0,
    }
}

struct FullSvd {
    u: CMatrix,
    sigma: Vec<f64>,
    /// Columns are right singular vectors, full square.
    v: CMatrix,
}

/// SVD with full square `v`, ordered by descending singular value.
/// Wide matrices are zero-padded to square so that all right singular vectors are returned.
fn full_svd(a: &CMatrix) -> FullSvd {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u_raw = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = CMatrix::zeros(cols, order.len());
    let mut u = CMatrix::zeros(rows, order.len());
    for (dst, &src) in order.iter().enumerate() {
        v.set_column(dst, &vt.row(src).adjoint());
        u.set_column(dst, &u_raw.column(src).rows(0, rows));
    }
    FullSvd { u, sigma, v }
}

/// Orthonormal basis of the numerical kernel of `a`.
///
/// A right singular vector is kept when its eigenvalue of `A*A` is below `tol·λ_max`.
pub fn kernel_basis(a: &CMatrix, tol: f64) -> Basis {
    let cols = a.ncols();
    if cols == 0 {
        return Basis::empty(0);
    }
    if a.nrows() == 0 {
        return Basis::standard(cols);
    }
    let svd = full_svd(a);
    let top = svd.sigma[0];
    let keep: Vec<usize> = (0..cols)
        .filter(|&i| {
            let s = svd.sigma.get(i).copied().unwrap_or(0.0);
            top <= ABSOLUTE_ZERO || s * s <= tol * top * top || s <= ABSOLUTE_ZERO
        })
        .collect();
    let mut out = CMatrix::zeros(cols, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        out.set_column(dst, &normalize_phase(svd.v.column(src).into_owned()));
    }
    Basis::from_matrix(out)
}

/// Orthonormal basis of the column space of `a`.
pub fn range_basis(a: &CMatrix, tol: f64) -> Basis {
    let rows = a.nrows();
    if a.ncols() == 0 || rows == 0 {
        return Basis::empty(rows);
    }
    let r = rank(a, tol);
    let svd = full_svd(a);
    let mut out = CMatrix::zeros(rows, r);
    for i in 0..r {
        out.set_column(i, &svd.u.column(i));
    }
    Basis::from_matrix(out)
}

/// Orthonormal basis of `(ker a)^⊥`, the row space of `a` inside the domain.
pub fn coimage_basis(a: &CMatrix, tol: f64) -> Basis {
    let cols = a.ncols();
    if cols == 0 || a.nrows() == 0 {
        return Basis::empty(cols);
    }
    let r = rank(a, tol);
    let svd = full_svd(a);
    let mut out = CMatrix::zeros(cols, r);
    for i in 0..r {
        out.set_column(i, &svd.v.column(i));
    }
    Basis::from_matrix(out)
}

/// Orthonormal basis of the orthogonal complement of the span of `b`.
pub fn orthogonal_complement(b: &Basis, tol: f64) -> Basis {
    if b.is_empty() {
        return Basis::standard(b.ambient_dim());
    }
    kernel_basis(&b.matrix().adjoint(), tol)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn least_squares(a: &CMatrix, b: &CMatrix, tol: f64) -> CMatrix {
    if a.ncols() == 0 {
        return CMatrix::zeros(0, b.ncols());
    }
    if a.nrows() == 0 {
        return CMatrix::zeros(a.ncols(), b.ncols());
    }
    let svd = full_svd(a);
    let top = svd.sigma[0];
    let mut x = CMatrix::zeros(a.ncols(), b.ncols());
    for (i, &s) in svd.sigma.iter().enumerate() {
        if top == 0.0 || s * s <= tol * top * top || i >= a.nrows() {
            continue;
        }
        let ui = svd.u.column(i);
        let vi = svd.v.column(i);
        let coeff = ui.adjoint() * b / C64::from(s);
        x += vi * coeff;
    }
    x
}

/// Determinant of the coordinate change `L` with `v_i = Σ_j L_ij w_j`.
pub fn coordinate_change_det(v: &Basis, w: &Basis) -> Result<C64, NumlinError> {
    coordinate_change_det_tol(v, w, DEFAULT_SPAN_TOL)
}

pub fn coordinate_change_det_tol(v: &Basis, w: &Basis, span_tol: f64) -> Result<C64, NumlinError> {
    if v.len() != w.len() || v.ambient_dim() != w.ambient_dim() {
        return Err(NumlinError::DimensionMismatch(format!(
            "{}x{} against {}x{}",
            v.ambient_dim(),
            v.len(),
            w.ambient_dim(),
            w.len()
        )));
    }
    if v.is_empty() {
        return Ok(C64::from(1.0));
    }
    // V = W Lᵀ
    let lt = least_squares(w.matrix(), v.matrix(), DEFAULT_RANK_TOL * DEFAULT_RANK_TOL);
    let residual = (w.matrix() * &lt - v.matrix()).norm() / v.matrix().norm().max(f64::MIN_POSITIVE);
    if residual > span_tol {
        return Err(NumlinError::SpanMismatch { residual });
    }
    Ok(lt.determinant())
}

/// Rotates two orthonormal families by a common phase so that the change from `v` becomes real positive.
///
/// Returns `(w', u')` with `[w', u' / v]` real and strictly positive.
pub fn phase_corrected_bases(w: &Basis, u: &Basis, v: &Basis) -> Result<(Basis, Basis), NumlinError> {
    let joint = w.concat(u);
    let defect = joint.orthonormality_defect();
    if defect > 1e-10 * (1.0 + joint.len() as f64) {
        return Err(NumlinError::NotOrthonormal { defect });
    }
    let det = coordinate_change_det(&joint, v)?;
    let dim = joint.len();
    if dim == 0 {
        return Ok((w.clone(), u.clone()));
    }
    let phase = det.arg();
    if phase == 0.0 {
        return Ok((w.clone(), u.clone()));
    }
    let rot = C64::from_polar(1.0, -phase / dim as f64);
    Ok((w.scaled(rot), u.scaled(rot)))
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

pub fn hermitian_spectrum(a: &CMatrix, tol: f64) -> Result<Spectrum, NumlinError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(NumlinError::DimensionMismatch(format!("{}x{} is not square", n, a.ncols())));
    }
    if n == 0 {
        return Ok(Spectrum { values: Vec::new(), vectors: CMatrix::zeros(0, 0) });
    }
    let scale = a.norm();
    let defect = (a - a.adjoint()).norm();
    if defect > tol * scale.max(f64::MIN_POSITIVE) && defect > 0.0 {
        return Err(NumlinError::NotHermitian { defect });
    }
    let sym = (a + a.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(sym);
    let vectors: Vec<CVector> = (0..n).map(|i| normalize_phase(eig.eigenvectors.column(i).into_owned())).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let tie = tol.sqrt() * scale.max(1.0);
    order.sort_by(|&i, &j| {
        let (li, lj) = (eig.eigenvalues[i], eig.eigenvalues[j]);
        if (li - lj).abs() <= tie {
            lex_cmp(&vectors[i], &vectors[j])
        } else {
            li.total_cmp(&lj)
        }
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut out = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        out.set_column(dst, &vectors[src]);
    }
    Ok(Spectrum { values, vectors: out })
}

fn lex_cmp(a: &CVector, b: &CVector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Makes the first entry of non-negligible modulus real and positive.
fn normalize_phase(mut v: CVector) -> CVector {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(pivot) = v.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
        let rot = pivot.conj() / pivot.norm();
        v *= rot;
    }
    v
}

/// Both sides of the dual-map identity `[f(v)/w] = [f*(w*)/v*]`.
///
/// Functionals are row vectors; `v*` and `w*` are the dual bases and `f*` is
/// precomposition with `f`. Bases must be square (spanning).
pub fn dual_map_identity(f: &CMatrix, v: &Basis, w: &Basis) -> Result<(C64, C64), NumlinError> {
    let fv = v.mapped(f);
    let left = coordinate_change_det(&fv, w)?;
    let v_inv = v
        .matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| NumlinError::DimensionMismatch("v must be a square invertible basis".into()))?;
    let w_inv = w
        .matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| NumlinError::DimensionMismatch("w must be a square invertible basis".into()))?;
    // Rows of w_inv are w*; the pulled-back functionals are rows of w_inv·f.
    // Columns after transposition let the same coordinate-change routine apply.
    let pulled = Basis::from_matrix((w_inv * f).transpose());
    let dual_v = Basis::from_matrix(v_inv.transpose());
    let right = coordinate_change_det(&pulled, &dual_v)?;
    Ok((left, right))
}

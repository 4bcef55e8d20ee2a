//! Dense complex kernels: PSD square roots, range bases, pseudo-inverses,
//! norms and the matrix JSON carrier.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{GmlError, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Orthonormality tolerance for subspace bases.
pub const TOL_ORTHO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_exact: f64,
    pub tol_rank: f64,
    pub tol_trunc_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tol_exact: 1e-10, tol_rank: 1e-10, tol_trunc_factor: 10.0 }
    }
}

impl Tolerances {
    pub fn new(tol_exact: f64, tol_rank: f64, tol_trunc_factor: f64) -> Result<Self> {
        let t = Tolerances { tol_exact, tol_rank, tol_trunc_factor };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("tol_exact", self.tol_exact), ("tol_rank", self.tol_rank), ("tol_trunc_factor", self.tol_trunc_factor)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(GmlError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_exact(mut self, tol_exact: f64) -> Self {
        self.tol_exact = tol_exact;
        self
    }
}

/// Subspace of C^ambient_dim carried by an orthonormal basis (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    pub ambient_dim: usize,
    pub basis: CMatrix,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Subspace { ambient_dim, basis: CMatrix::zeros(ambient_dim, 0) }
    }

    pub fn whole(ambient_dim: usize) -> Self {
        Subspace { ambient_dim, basis: CMatrix::identity(ambient_dim, ambient_dim) }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Coordinates of the columns of `m` in this basis.
    pub fn coords(&self, m: &CMatrix) -> CMatrix {
        self.basis.adjoint() * m
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self, tol: &Tolerances) -> Subspace {
        let p = CMatrix::identity(self.ambient_dim, self.ambient_dim) - self.projector();
        range_basis(&p, tol)
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.dim();
        if k == 0 {
            return 0.0;
        }
        spectral_norm(&(self.basis.adjoint() * &self.basis - CMatrix::identity(k, k)))
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag(entries: &[C64]) -> CMatrix {
    let n = entries.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, e) in entries.iter().enumerate() {
        m[(i, i)] = *e;
    }
    m
}

pub fn diag_real(entries: &[f64]) -> CMatrix {
    diag(&entries.iter().map(|&x| cr(x)).collect::<Vec<_>>())
}

pub fn scale(m: &CMatrix, s: C64) -> CMatrix {
    m.map(|x| x * s)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Singular values and (optionally) singular vectors, sorted in decreasing order.
pub struct SortedSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v_t: CMatrix,
}

fn to_faer(m: &CMatrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD. nalgebra's complex SVD can return a wrong factorization (seen on
/// small rank-deficient Hermitian inputs), so this goes through faer.
pub fn svd_sorted(m: &CMatrix) -> SortedSvd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return SortedSvd { u: CMatrix::zeros(r, 0), s: vec![], v_t: CMatrix::zeros(0, c) };
    }
    let svd = to_faer(m).thin_svd().expect("svd converges");
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let sv: Vec<f64> = (0..k).map(|i| fs[i].re).collect();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let s = idx.iter().map(|&i| sv[i]).collect();
    let u = CMatrix::from_fn(r, k, |i, j| fu[(i, idx[j])]);
    let v_t = CMatrix::from_fn(k, c, |i, j| fv[(j, idx[i])].conj());
    SortedSvd { u, s, v_t }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = to_faer(m).singular_values().expect("svd converges");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    spectral_norm(&(m - m.adjoint()))
}

/// Spectral radius via Schur eigenvalues.
pub fn spectral_radius(m: &CMatrix) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    if m.nrows() == 0 {
        return vec![];
    }
    to_faer(m).eigenvalues().expect("eigenvalues converge")
}

/// Hermitian eigendecomposition of (M + Mᴴ)/2, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], CMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = to_faer(&h).self_adjoint_eigen(faer::Side::Lower).expect("eigendecomposition converges");
    let (ev, fv) = (eig.S().column_vector(), eig.U());
    let raw: Vec<f64> = (0..n).map(|i| ev[i].re).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let vals = idx.iter().map(|&i| raw[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| fv[(i, idx[j])]);
    (vals, vecs)
}

fn check_hermitian(m: &CMatrix, tol: &Tolerances) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(GmlError::DimensionMismatch(format!("expected square matrix, got {:?}", m.shape())));
    }
    let norm = spectral_norm(m);
    let asym = hermitian_defect(m);
    if asym > tol.tol_exact * norm.max(1.0) {
        return Err(GmlError::NotHermitian { asymmetry: asym });
    }
    Ok(norm)
}

/// PSD square root. Eigenvalues with |λ| ≤ tol_rank·‖M‖ are set to zero.
pub fn herm_sqrt(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let norm = check_hermitian(m, tol)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let (vals, vecs) = hermitian_eigen(m);
    let cut = tol.tol_rank * norm;
    if let Some(&lo) = vals.first() {
        if lo < -cut {
            return Err(GmlError::NotPsd { min_eigenvalue: lo });
        }
    }
    let roots: Vec<C64> = vals.iter().map(|&l| cr(if l <= cut { 0.0 } else { l.sqrt() })).collect();
    let r = &vecs * diag(&roots) * vecs.adjoint();
    Ok((&r + r.adjoint()).map(|z| z * 0.5))
}

/// Orthonormal basis of the column space of `m`.
///
/// The basis is canonical: it depends only on the subspace, not on the
/// SVD's choice of vectors. Columns are produced by pivoted Gram-Schmidt on
/// the projected coordinate vectors, so coordinate subspaces come back as
/// the matching standard basis vectors.
pub fn range_basis(m: &CMatrix, tol: &Tolerances) -> Subspace {
    let n = m.nrows();
    let svd = svd_sorted(m);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Subspace::zero(n);
    }
    let rank = svd.s.iter().filter(|&&s| s > tol.tol_rank * smax).count();
    let ur = svd.u.columns(0, rank).into_owned();
    Subspace { ambient_dim: n, basis: canonical_span(&ur) }
}

/// Canonical orthonormal basis for the span of the orthonormal columns `q`.
pub fn canonical_span(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let k = q.ncols();
    let p = q * q.adjoint();
    let mut out = CMatrix::zeros(n, k);
    let mut residuals: Vec<nalgebra::DVector<C64>> = (0..n).map(|j| p.column(j).into_owned()).collect();
    let mut used = vec![false; n];
    for col in 0..k {
        let norms: Vec<f64> = residuals.iter().map(|r| r.norm()).collect();
        let best = (0..n).filter(|&j| !used[j]).map(|j| norms[j]).fold(0.0, f64::max);
        // lowest index among near-ties keeps the choice stable under rounding
        let pick = (0..n).find(|&j| !used[j] && norms[j] >= best * (1.0 - 1e-8)).expect("rank bound");
        used[pick] = true;
        let mut v = residuals[pick].clone();
        for prev in 0..col {
            let b = out.column(prev).into_owned();
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let nv = v.norm();
        v /= cr(nv);
        // pivot entry real positive
        let ph = v[pick];
        if ph.norm() > 0.0 {
            v *= ph.conj() / ph.norm();
        }
        out.set_column(col, &v);
        for r in residuals.iter_mut() {
            let proj = v.dotc(r);
            *r -= &v * proj;
        }
    }
    out
}

/// Kernel of `m` as a subspace of the domain.
pub fn null_basis(m: &CMatrix, tol: &Tolerances) -> Subspace {
    let c = m.ncols();
    let r = range_basis(&m.adjoint(), tol);
    let p = eye(c) - r.projector();
    if frobenius_norm(&p) < 0.5 {
        return Subspace::zero(c);
    }
    range_basis(&p, tol)
}

/// Intersection of two subspaces of the same ambient space.
pub fn intersect(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Subspace {
    let n = a.ambient_dim;
    let stacked = {
        let pa = eye(n) - a.projector();
        let pb = eye(n) - b.projector();
        let mut s = CMatrix::zeros(2 * n, n);
        s.view_mut((0, 0), (n, n)).copy_from(&pa);
        s.view_mut((n, 0), (n, n)).copy_from(&pb);
        s
    };
    null_basis(&stacked, tol)
}

pub fn pinv(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    let (r, c) = m.shape();
    let svd = svd_sorted(m);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let mut out = CMatrix::zeros(c, r);
    if smax == 0.0 {
        return out;
    }
    for (i, &s) in svd.s.iter().enumerate() {
        if s > tol.tol_rank * smax {
            let ui = svd.u.column(i);
            let vi = svd.v_t.row(i).adjoint();
            out += vi * ui.adjoint() * cr(1.0 / s);
        }
    }
    out
}

/// Residuals of the four Penrose identities.
pub fn penrose_residuals(m: &CMatrix, p: &CMatrix) -> [f64; 4] {
    let mp = m * p;
    let pm = p * m;
    [spectral_norm(&(&mp * m - m)), spectral_norm(&(&pm * p - p)), hermitian_defect(&mp), hermitian_defect(&pm)]
}

/// Unitary polar factor U Vᴴ of a square matrix.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = svd_sorted(m);
    &svd.u * &svd.v_t
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    let m = u.nrows();
    spectral_norm(&(u.adjoint() * u - eye(n))).max(spectral_norm(&(u * u.adjoint() - eye(m))))
}

pub fn isometry_defect(v: &CMatrix) -> f64 {
    let n = v.ncols();
    if n == 0 {
        return 0.0;
    }
    spectral_norm(&(v.adjoint() * v - eye(n)))
}

/// Kronecker product with the left factor indexing the outer (block) level.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn adj(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn matrix_power(m: &CMatrix, k: usize) -> CMatrix {
    let mut out = eye(m.nrows());
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    out
}

/// Row-major matrix JSON carrier: `{"rows","cols","re","im"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixJson { rows, cols, re, im }
    }
}

impl TryFrom<&MatrixJson> for CMatrix {
    type Error = GmlError;

    fn try_from(j: &MatrixJson) -> Result<CMatrix> {
        let n = j.rows.checked_mul(j.cols).ok_or_else(|| GmlError::InvalidInput("matrix too large".into()))?;
        if j.re.len() != n || j.im.len() != n {
            return Err(GmlError::InvalidInput(format!(
                "expected {n} entries for a {}x{} matrix, got re={} im={}",
                j.rows,
                j.cols,
                j.re.len(),
                j.im.len()
            )));
        }
        if j.re.iter().chain(j.im.iter()).any(|x| !x.is_finite()) {
            return Err(GmlError::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(CMatrix::from_fn(j.rows, j.cols, |r, c| C64::new(j.re[r * j.cols + c], j.im[r * j.cols + c])))
    }
}

pub fn matrix_to_json(m: &CMatrix) -> String {
    serde_json::to_string(&MatrixJson::from(m)).expect("matrix serializes")
}

pub fn matrix_from_json(s: &str) -> Result<CMatrix> {
    let j: MatrixJson = serde_json::from_str(s).map_err(|e| GmlError::InvalidInput(e.to_string()))?;
    CMatrix::try_from(&j)
}

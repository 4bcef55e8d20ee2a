//! Defect operators, unitary/c.n.u. splitting and the asymptotic operators
//! A, A_*, V, Q of a single contraction.

use crate::error::{GmlError, Result};
use crate::matrixcore::{
    canonical_span, cr, diag, eye, frobenius_norm, hermitian_eigen, intersect, matrix_power, pinv, range_basis,
    singular_values, spectral_norm, CMatrix, Subspace, Tolerances,
};

/// Smallest singular value of Q below which a SingularQ warning is attached.
pub const SINGULAR_Q_WARN: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug)]
pub struct ContractionData {
    pub t: CMatrix,
    pub d_t: CMatrix,
    pub d_tstar: CMatrix,
    pub defect_space: Subspace,
    pub defect_space_star: Subspace,
    pub is_pure: bool,
    pub is_cnu: bool,
}

impl ContractionData {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Data for T*, obtained by swapping the two defect sides.
    pub fn adjoint(&self) -> ContractionData {
        ContractionData {
            t: self.t.adjoint(),
            d_t: self.d_tstar.clone(),
            d_tstar: self.d_t.clone(),
            defect_space: self.defect_space_star.clone(),
            defect_space_star: self.defect_space.clone(),
            is_pure: self.is_pure,
            is_cnu: self.is_cnu,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AsymptoticData {
    pub a: CMatrix,
    pub a_star: CMatrix,
    pub a_half: CMatrix,
    pub ran_a: Subspace,
    pub v: CMatrix,
    pub q: CMatrix,
    pub iterations: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl AsymptoticData {
    pub fn q_min_singular(&self) -> Option<f64> {
        singular_values(&self.q).last().copied()
    }
}

fn check_contraction(t: &CMatrix, tol: &Tolerances) -> Result<()> {
    if t.nrows() != t.ncols() {
        return Err(GmlError::DimensionMismatch(format!("contraction must be square, got {:?}", t.shape())));
    }
    let norm = spectral_norm(t);
    if norm > 1.0 + tol.tol_exact {
        return Err(GmlError::NotAContraction { norm });
    }
    Ok(())
}

/// (I - M)^{1/2} for 0 ≤ M ≤ I (up to `slack`), clipped at tol_rank.
fn defect_root(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let n = m.nrows();
    let (vals, vecs) = hermitian_eigen(&(eye(n) - m));
    let slack = 3.0 * tol.tol_exact + tol.tol_rank;
    if let Some(&lo) = vals.first() {
        if lo < -slack {
            return Err(GmlError::NotPsd { min_eigenvalue: lo });
        }
    }
    let roots: Vec<_> = vals.iter().map(|&l| cr(if l <= tol.tol_rank { 0.0 } else { l.sqrt() })).collect();
    let r = &vecs * diag(&roots) * vecs.adjoint();
    Ok((&r + r.adjoint()).map(|z| z * 0.5))
}

/// D_T = (I - T*T)^{1/2}.
pub fn defect_operator(t: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    check_contraction(t, tol)?;
    defect_root(&(t.adjoint() * t), tol)
}

/// Eigenvectors of the Hermitian `h` with eigenvalue ≤ cut.
fn low_spectral_subspace(h: &CMatrix, cut: f64) -> Subspace {
    let n = h.nrows();
    let (vals, vecs) = hermitian_eigen(h);
    let k = vals.iter().filter(|&&l| l <= cut).count();
    if k == 0 {
        return Subspace::zero(n);
    }
    Subspace { ambient_dim: n, basis: canonical_span(&vecs.columns(0, k).into_owned()) }
}

/// Maximal reducing subspace on which T is unitary.
///
/// Uses {h : ‖Tⁿh‖ = ‖h‖ = ‖T*ⁿh‖} with n = dim, which is exact in finite
/// dimensions because the Krylov chain of kernels stabilizes by then.
fn unitary_subspace(t: &CMatrix, tol: &Tolerances) -> Subspace {
    let n = t.nrows();
    if n == 0 {
        return Subspace::zero(0);
    }
    let p = matrix_power(t, n);
    let cut = tol.tol_exact * n as f64;
    let iso = low_spectral_subspace(&(eye(n) - p.adjoint() * &p), cut);
    if iso.is_zero() {
        return iso;
    }
    let coiso = low_spectral_subspace(&(eye(n) - &p * p.adjoint()), cut);
    intersect(&iso, &coiso, tol)
}

pub fn analyze_contraction(t: &CMatrix, tol: &Tolerances) -> Result<ContractionData> {
    check_contraction(t, tol)?;
    let d_t = defect_root(&(t.adjoint() * t), tol)?;
    let d_tstar = defect_root(&(t * t.adjoint()), tol)?;
    let defect_space = range_basis(&d_t, tol);
    let defect_space_star = range_basis(&d_tstar, tol);
    // finite dimensions: pure ⟺ c.n.u. ⟺ no unitary part
    let cnu = unitary_subspace(t, tol).is_zero();
    Ok(ContractionData { t: t.clone(), d_t, d_tstar, defect_space, defect_space_star, is_pure: cnu, is_cnu: cnu })
}

pub fn canonical_decomposition(t: &CMatrix, tol: &Tolerances) -> Result<(Subspace, Subspace)> {
    check_contraction(t, tol)?;
    let u = unitary_subspace(t, tol);
    let c = u.complement(tol);
    Ok((u, c))
}

/// Without a window the limit is taken over T^{2^k} (repeated squaring), so
/// slow decay close to the unit circle still converges in few steps. With a
/// window the plain recursion M_{n+1} = T* M_n T is used, since the squares of
/// a finite section lose the interior much faster than its powers do.
fn iterate_limit(
    t: &CMatrix,
    tol: &Tolerances,
    max_iter: usize,
    window: Option<usize>,
) -> Result<(CMatrix, usize, f64)> {
    let n = t.nrows();
    let mut residual = f64::INFINITY;
    match window {
        Some(w) => {
            let td = t.adjoint();
            let mut m = eye(n);
            for it in 1..=max_iter {
                let next = &td * &m * t;
                residual = frobenius_norm(&(&next - &m).view((0, 0), (w, w)).into_owned());
                m = next;
                if residual < tol.tol_exact {
                    return Ok((m, it, residual));
                }
            }
        }
        None => {
            let mut p = t.clone();
            let mut m = p.adjoint() * &p;
            for it in 1..=max_iter {
                p = &p * &p;
                let next = p.adjoint() * &p;
                residual = frobenius_norm(&(&next - &m));
                m = next;
                if residual < tol.tol_exact {
                    return Ok((m, it, residual));
                }
            }
        }
    }
    Err(GmlError::NoConvergence { iterations: max_iter, residual })
}

fn finish(
    t: &CMatrix,
    a: CMatrix,
    a_star: CMatrix,
    iterations: usize,
    residual: f64,
    tol: &Tolerances,
) -> Result<AsymptoticData> {
    let n = t.nrows();
    let a = (&a + a.adjoint()).map(|z| z * 0.5);
    let a_star = (&a_star + a_star.adjoint()).map(|z| z * 0.5);
    let a_half = defect_root(&(eye(n) - &a), tol)?;
    let ran_a = range_basis(&a_half, tol);
    let ba = &ran_a.basis;
    let x = ba.adjoint() * &a_half;
    let v = &x * t * pinv(&x, tol);
    let inner = &a_half * &a_star * &a_half;
    let q_full = defect_root(&inner, tol)?;
    let q = ba.adjoint() * q_full * ba;
    let mut warnings = Vec::new();
    if let Some(&smin) = singular_values(&q).last() {
        if smin < SINGULAR_Q_WARN {
            warnings.push(format!("SingularQ: smallest singular value of Q is {smin:.3e}"));
        }
    }
    Ok(AsymptoticData { a, a_star, a_half, ran_a, v, q, iterations, residual, warnings })
}

/// A = lim T*ⁿTⁿ and A_* = lim TⁿT*ⁿ, then V and Q on ran A.
pub fn asymptotic(t: &CMatrix, tol: &Tolerances, max_iter: usize) -> Result<AsymptoticData> {
    check_contraction(t, tol)?;
    let (a, i1, r1) = iterate_limit(t, tol, max_iter, None)?;
    let (a_star, i2, r2) = iterate_limit(&t.adjoint(), tol, max_iter, None)?;
    finish(t, a, a_star, i1.max(i2), r1.max(r2), tol)
}

/// Like [`asymptotic`], but convergence is monitored on the leading
/// `interior` × `interior` block only.
///
/// Meant for finite sections of operators on ℓ²(ℕ): the section is usually
/// nilpotent, so its true limit vanishes, while the interior block settles on
/// the values of the untruncated operator after a few steps.
pub fn asymptotic_windowed(t: &CMatrix, tol: &Tolerances, max_iter: usize, interior: usize) -> Result<AsymptoticData> {
    check_contraction(t, tol)?;
    let w = interior.min(t.nrows());
    let (a, i1, r1) = iterate_limit(t, tol, max_iter, Some(w))?;
    let (a_star, i2, r2) = iterate_limit(&t.adjoint(), tol, max_iter, Some(w))?;
    finish(t, a, a_star, i1.max(i2), r1.max(r2), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::{c, diag_real, polar_unitary, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jordan(n: usize) -> CMatrix {
        let mut j = CMatrix::zeros(n, n);
        for i in 0..n - 1 {
            j[(i, i + 1)] = cr(1.0);
        }
        j
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        polar_unitary(&CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
    }

    #[test]
    fn zero_operator() {
        let t = Tolerances::default();
        let d = analyze_contraction(&CMatrix::zeros(3, 3), &t).unwrap();
        assert!(spectral_norm(&(d.d_t - eye(3))) < 1e-14);
        assert!(d.is_pure && d.is_cnu);
        assert_eq!(d.defect_space.dim(), 3);
    }

    #[test]
    fn unitary_operator() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(&mut rng, 2);
        let d = analyze_contraction(&u, &t).unwrap();
        assert!(spectral_norm(&d.d_t) < 1e-7);
        assert!(!d.is_pure && !d.is_cnu);
        assert_eq!(d.defect_space.dim(), 0);
        let (up, cp) = canonical_decomposition(&u, &t).unwrap();
        assert_eq!((up.dim(), cp.dim()), (2, 0));
    }

    #[test]
    fn jordan_block_defect() {
        let t = Tolerances::default();
        let j = jordan(3);
        let d = analyze_contraction(&j, &t).unwrap();
        // I - J*J = diag(1,0,0) for the upper shift
        let oracle = eye(3) - j.adjoint() * &j;
        assert!(spectral_norm(&(&d.d_t * &d.d_t - oracle)) < 1e-14);
        assert!(d.is_pure);
        let (up, _) = canonical_decomposition(&j, &t).unwrap();
        assert_eq!(up.dim(), 0);
    }

    #[test]
    fn diag_one_half_split() {
        let t = Tolerances::default();
        let m = diag_real(&[1.0, 0.5]);
        let (up, cp) = canonical_decomposition(&m, &t).unwrap();
        assert_eq!((up.dim(), cp.dim()), (1, 1));
        assert!((up.basis[(0, 0)].re - 1.0).abs() < 1e-12);
        // power-iteration oracle
        let mut m_n = eye(2);
        for _ in 0..200 {
            m_n = m.adjoint() * &m_n * &m;
        }
        let a = asymptotic(&m, &t, DEFAULT_MAX_ITER).unwrap();
        assert!(spectral_norm(&(a.a - m_n)) < 1e-10);
    }

    #[test]
    fn defect_identities_hold() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let m = CMatrix::from_fn(4, 4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let m = m.map(|z| z / C64::from(spectral_norm(&m)));
            let d = analyze_contraction(&m, &t).unwrap();
            assert!(spectral_norm(&(&d.d_t * &d.d_t + m.adjoint() * &m - eye(4))) < 1e-10);
            assert!(spectral_norm(&(&d.d_tstar * &d.d_tstar + &m * m.adjoint() - eye(4))) < 1e-10);
            assert!(spectral_norm(&(&m * &d.d_t - &d.d_tstar * &m)) < 1e-10);
        }
    }

    #[test]
    fn rejects_expansive() {
        let t = Tolerances::default();
        assert!(matches!(analyze_contraction(&diag_real(&[1.5]), &t), Err(GmlError::NotAContraction { .. })));
    }

    #[test]
    fn asymptotic_of_unitary_and_strict() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(&mut rng, 3);
        let a = asymptotic(&u, &t, DEFAULT_MAX_ITER).unwrap();
        assert!(spectral_norm(&(&a.a - eye(3))) < 1e-10);
        assert!(spectral_norm(&(&a.a_star - eye(3))) < 1e-10);
        assert_eq!(a.ran_a.dim(), 3);
        // ran A is all of C^3 with the canonical basis, so V is T itself
        assert!(spectral_norm(&(&a.v - &u)) < 1e-9);
        let s = diag_real(&[0.5, 0.3]);
        let a = asymptotic(&s, &t, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(a.ran_a.dim(), 0);
        assert!(spectral_norm(&a.a) < 1e-10);
    }

    #[test]
    fn no_convergence_is_reported() {
        let t = Tolerances::default();
        let m = diag_real(&[0.999999]);
        assert!(matches!(asymptotic(&m, &t, 5), Err(GmlError::NoConvergence { iterations: 5, .. })));
    }
}

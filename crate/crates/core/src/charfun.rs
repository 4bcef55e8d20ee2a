//! Characteristic functions and coincidence.
//!
//! Θ_T(z) = -T + z D_{T*} (I - z T*)^{-1} D_T restricted to the defect space,
//! in orthonormal defect coordinates. Taylor coefficients: c0 = -T,
//! c_n = D_{T*} T*^{n-1} D_T.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contraction::ContractionData;
use crate::error::{GmlError, Result};
use crate::fundamental::IdentityReport;
use crate::matrixcore::{
    eye, null_basis, polar_unitary, spectral_norm, unitarity_defect, CMatrix, Subspace, Tolerances, C64,
};

pub const DEFAULT_ORDER: usize = 6;

pub fn theta_eval(cd: &ContractionData, z: C64) -> Result<CMatrix> {
    if z.norm() >= 1.0 {
        return Err(GmlError::OutsideDisk { modulus: z.norm() });
    }
    let b = &cd.defect_space.basis;
    let bs = &cd.defect_space_star.basis;
    let n = cd.dim();
    let resolvent_arg = eye(n) - cd.t.adjoint() * z;
    let rhs = &cd.d_t * b;
    let solved = resolvent_arg.lu().solve(&rhs).expect("I - zT* is invertible inside the disk");
    let full = -(&cd.t * b) + &cd.d_tstar * solved * z;
    Ok(bs.adjoint() * full)
}

#[derive(Clone, Debug)]
pub struct OperatorSeries {
    pub coeffs: Vec<CMatrix>,
    pub source: Subspace,
    pub target: Subspace,
}

impl OperatorSeries {
    pub fn partial_sum(&self, z: C64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.target.dim(), self.source.dim());
        let mut zn = C64::new(1.0, 0.0);
        for c in &self.coeffs {
            acc += c * zn;
            zn *= z;
        }
        acc
    }
}

/// Coefficients c_0..=c_order.
pub fn theta_coeffs(cd: &ContractionData, order: usize) -> OperatorSeries {
    let b = &cd.defect_space.basis;
    let bs = &cd.defect_space_star.basis;
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(-(bs.adjoint() * &cd.t * b));
    let ts = cd.t.adjoint();
    let mut pow_d = &cd.d_t * b;
    for _ in 1..=order {
        coeffs.push(bs.adjoint() * &cd.d_tstar * &pow_d);
        pow_d = &ts * pow_d;
    }
    OperatorSeries { coeffs, source: cd.defect_space.clone(), target: cd.defect_space_star.clone() }
}

#[derive(Clone, Debug)]
pub struct CoincidencePair {
    /// 𝒟_T → 𝒟_{T'}
    pub u: CMatrix,
    /// 𝒟_{T*} → 𝒟_{T'*}
    pub u_star: CMatrix,
}

/// Grid used when no explicit grid is given: 3 radii times 8 angles.
pub fn default_grid() -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0)];
    for r in [0.3, 0.6, 0.9] {
        for k in 0..8 {
            g.push(C64::from_polar(r, std::f64::consts::TAU * (k as f64 + 0.25) / 8.0));
        }
    }
    g
}

pub fn verify_coincidence(
    a: &ContractionData,
    b: &ContractionData,
    pair: &CoincidencePair,
    grid: &[C64],
    tol: f64,
) -> Result<IdentityReport> {
    let du = unitarity_defect(&pair.u).max(unitarity_defect(&pair.u_star));
    if du > tol.max(1e-10) {
        return Err(GmlError::NotUnitary { defect: du });
    }
    let dims_ok = pair.u.ncols() == a.defect_space.dim()
        && pair.u.nrows() == b.defect_space.dim()
        && pair.u_star.ncols() == a.defect_space_star.dim()
        && pair.u_star.nrows() == b.defect_space_star.dim();
    if !dims_ok {
        return Err(GmlError::DimensionMismatch("coincidence pair does not fit the defect spaces".into()));
    }
    let mut worst: f64 = 0.0;
    for &z in grid {
        let lhs = &pair.u_star * theta_eval(a, z)?;
        let rhs = theta_eval(b, z)? * &pair.u;
        worst = worst.max(spectral_norm(&(lhs - rhs)));
    }
    Ok(IdentityReport {
        id: "coincidence".into(),
        norm: worst,
        pass: worst <= tol,
        notes: format!("{} grid points", grid.len()),
        applicable: true,
    })
}

/// Applies the stacked intertwining map to (U, U*).
///
/// Both U* c_k = c'_k U and its adjoint companion U c_kᴴ = c'_kᴴ U* are
/// imposed, so the solution space is closed under adjoints and the polar
/// factor of a generic solution is again a solution.
fn intertwining_residual(ca: &[CMatrix], cb: &[CMatrix], u: &CMatrix, us: &CMatrix) -> Vec<C64> {
    let mut out = Vec::new();
    for (x, y) in ca.iter().zip(cb) {
        out.extend((us * x - y * u).iter().copied());
        out.extend((u * x.adjoint() - y.adjoint() * us).iter().copied());
    }
    out
}

pub fn search_coincidence(
    a: &ContractionData,
    b: &ContractionData,
    order: usize,
    tol: &Tolerances,
) -> Option<CoincidencePair> {
    let (d, ds) = (a.defect_space.dim(), a.defect_space_star.dim());
    if d != b.defect_space.dim() || ds != b.defect_space_star.dim() {
        return None;
    }
    let ca = theta_coeffs(a, order).coeffs;
    let cb = theta_coeffs(b, order).coeffs;
    let unknowns = d * d + ds * ds;
    let split = |v: &[C64]| {
        let u = CMatrix::from_column_slice(d, d, &v[..d * d]);
        let us = CMatrix::from_column_slice(ds, ds, &v[d * d..]);
        (u, us)
    };
    let pair = if unknowns == 0 {
        CoincidencePair { u: CMatrix::zeros(0, 0), u_star: CMatrix::zeros(0, 0) }
    } else {
        let mut columns = Vec::with_capacity(unknowns);
        for j in 0..unknowns {
            let mut e = vec![C64::new(0.0, 0.0); unknowns];
            e[j] = C64::new(1.0, 0.0);
            let (u, us) = split(&e);
            columns.push(intertwining_residual(&ca, &cb, &u, &us));
        }
        let rows = columns[0].len();
        let sys = CMatrix::from_fn(rows, unknowns, |i, j| columns[j][i]);
        let null_tol = Tolerances { tol_rank: tol.tol_rank.max(1e-9), ..*tol };
        let null = null_basis(&sys, &null_tol);
        if null.is_zero() {
            return None;
        }
        // fixed pseudo-random combination of the nullspace basis
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let coeffs =
            CMatrix::from_fn(null.dim(), 1, |_, _| C64::new(rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5)));
        let v = &null.basis * coeffs;
        let (u, us) = split(v.as_slice());
        CoincidencePair { u: polar_unitary(&u), u_star: polar_unitary(&us) }
    };
    let check_tol = 1e-8_f64.max(tol.tol_exact * 100.0);
    match verify_coincidence(a, b, &pair, &default_grid(), check_tol) {
        Ok(r) if r.pass => Some(pair),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contraction::analyze_contraction;
    use crate::matrixcore::{c, cr, diag_real};

    fn scalar(t: f64) -> ContractionData {
        analyze_contraction(&CMatrix::from_element(1, 1, cr(t)), &Tolerances::default()).unwrap()
    }

    #[test]
    fn scalar_mobius() {
        let cd = scalar(0.6);
        assert!((theta_eval(&cd, cr(0.0)).unwrap()[(0, 0)] - cr(-0.6)).norm() < 1e-14);
        let v = theta_eval(&cd, cr(0.5)).unwrap()[(0, 0)];
        assert!((v - cr(-0.1 / 0.7)).norm() < 1e-14);
        assert!(matches!(theta_eval(&cd, cr(1.0)), Err(GmlError::OutsideDisk { .. })));
    }

    #[test]
    fn unitary_gives_empty() {
        let cd = analyze_contraction(&eye(3), &Tolerances::default()).unwrap();
        let th = theta_eval(&cd, c(0.1, 0.2)).unwrap();
        assert_eq!((th.nrows(), th.ncols()), (0, 0));
    }

    #[test]
    fn coefficients() {
        let s = theta_coeffs(&scalar(0.6), 3).coeffs;
        let expect = [-0.6, 0.64, 0.64 * 0.6, 0.64 * 0.36];
        for (a, e) in s.iter().zip(expect) {
            assert!((a[(0, 0)] - cr(e)).norm() < 1e-14);
        }
        let tol = Tolerances::default();
        let zero = analyze_contraction(&CMatrix::zeros(2, 2), &tol).unwrap();
        let s = theta_coeffs(&zero, 3).coeffs;
        assert_eq!(s[1], eye(2));
        assert!(s[0].iter().chain(s[2].iter()).chain(s[3].iter()).all(|x| x.norm() == 0.0));
        let mut j = CMatrix::zeros(2, 2);
        j[(1, 0)] = cr(1.0);
        let s = theta_coeffs(&analyze_contraction(&j, &tol).unwrap(), 5).coeffs;
        assert!(s[3..].iter().all(|m| spectral_norm(m) < 1e-15));
    }

    #[test]
    fn scalar_pairs_do_not_coincide() {
        let tol = Tolerances::default();
        assert!(search_coincidence(&scalar(0.5), &scalar(0.7), DEFAULT_ORDER, &tol).is_none());
        let p = search_coincidence(&scalar(0.5), &scalar(0.5), DEFAULT_ORDER, &tol).unwrap();
        let r = verify_coincidence(&scalar(0.5), &scalar(0.5), &p, &default_grid(), 1e-12).unwrap();
        assert!(r.pass && r.norm < 1e-14);
    }

    #[test]
    fn phases_do_not_help() {
        let pair = CoincidencePair {
            u: CMatrix::from_element(1, 1, C64::from_polar(1.0, 0.3)),
            u_star: CMatrix::from_element(1, 1, C64::from_polar(1.0, -1.1)),
        };
        let r = verify_coincidence(&scalar(0.5), &scalar(0.7), &pair, &default_grid(), 1e-8).unwrap();
        assert!(!r.pass && r.norm >= 0.2 - 1e-12);
    }

    #[test]
    fn diagonal_permutation_coincides() {
        let tol = Tolerances::default();
        let a = analyze_contraction(&diag_real(&[0.2, 0.7]), &tol).unwrap();
        let b = analyze_contraction(&diag_real(&[0.7, 0.2]), &tol).unwrap();
        let p = search_coincidence(&a, &b, DEFAULT_ORDER, &tol).unwrap();
        assert!(unitarity_defect(&p.u) < 1e-12);
    }
}

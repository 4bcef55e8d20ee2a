//! The weighted shift T_α and the tuples built from it, on which the c.n.u.
//! model breaks down because the distinguished entry does not commute with
//! the adjoints of the others.
//!
//! T_α e0 = α e1, T_α e_k = e_{k+1}. On H² this is f ↦ α a0 ζ + a1 ζ² + ...
//! The section on e0..e_{N-1} is T*-invariant, so every quantity built from
//! T T* is exact there. The asymptotic limit lim T*ⁿTⁿ is not: it is taken
//! on a padded section and compared on the interior only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contraction::{asymptotic_windowed, DEFAULT_MAX_ITER};
use crate::error::{GmlError, Result};
use crate::fundamental::solve_fundamental;
use crate::kind::Kind;
use crate::matrixcore::{c, cr, eye, spectral_norm, CMatrix, Tolerances, C64};
use crate::models::build_cnu_model;
use crate::tuples::{verify_tuple, GammaTuple};

pub const MIN_DIM: usize = 6;

#[derive(Clone, Debug)]
pub struct TalphaInstance {
    pub alpha: C64,
    pub dim: usize,
    pub t: CMatrix,
}

pub fn build_talpha(alpha: C64, dim: usize) -> Result<TalphaInstance> {
    if alpha.norm() >= 1.0 {
        return Err(GmlError::AlphaNotInDisk { modulus: alpha.norm() });
    }
    if dim < MIN_DIM {
        return Err(GmlError::InvalidInput(format!("T_alpha needs dim >= {MIN_DIM}, got {dim}")));
    }
    Ok(TalphaInstance { alpha, dim, t: talpha_matrix(alpha, dim) })
}

fn talpha_matrix(alpha: C64, dim: usize) -> CMatrix {
    let mut t = CMatrix::zeros(dim, dim);
    t[(1, 0)] = alpha;
    for k in 1..dim - 1 {
        t[(k + 1, k)] = cr(1.0);
    }
    t
}

/// Entries of the tuple as (first, distinguished) positions filled with T, T².
///
/// tetrablock (T, T, T²), g333 (T, 0, 0, 0, 0, T, T²), g312 (T, 0, T², 0, T).
pub fn talpha_tuple(kind: Kind, t: &CMatrix, tol: &Tolerances) -> Result<GammaTuple> {
    let n = t.nrows();
    let z = CMatrix::zeros(n, n);
    let t2 = t * t;
    let ops = match kind {
        Kind::Tetrablock => vec![t.clone(), t.clone(), t2],
        Kind::G333 => vec![t.clone(), z.clone(), z.clone(), z.clone(), z, t.clone(), t2],
        Kind::G312 => vec![t.clone(), z.clone(), t2, z, t.clone()],
    };
    GammaTuple::new(kind, ops, tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub kind: Kind,
    pub alpha: [f64; 2],
    pub dim: usize,
    pub mismatch: f64,
    pub expected_mismatch: f64,
    /// Residuals of the closed-form checks on interior coordinates.
    pub checks: BTreeMap<String, f64>,
    pub tuple_valid: bool,
    pub hypothesis_violated: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

fn basis(n: usize, k: usize) -> CMatrix {
    let mut v = CMatrix::zeros(n, 1);
    v[(k, 0)] = cr(1.0);
    v
}

fn leading(m: &CMatrix, rows: usize, cols: usize) -> CMatrix {
    m.view((0, 0), (rows, cols)).into_owned()
}

fn diag_prefix(n: usize, prefix: &[C64]) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for (k, &v) in prefix.iter().enumerate() {
        m[(k, k)] = v;
    }
    m
}

pub fn run_counterexample(kind: Kind, alpha: C64, dim: usize, tol: &Tolerances) -> Result<CounterexampleReport> {
    if alpha.norm() == 0.0 {
        return Err(GmlError::DegenerateAlpha);
    }
    let inst = build_talpha(alpha, dim)?;
    let n = dim;
    let t = &inst.t;
    let a = alpha.norm();
    let rho = (1.0 - a * a).sqrt();
    // coefficients a0..a_{N-4}
    let inner = n - 3;
    let mut checks = BTreeMap::new();
    let mut cmp = |name: &str, got: &CMatrix, want: &CMatrix| {
        checks.insert(name.to_string(), spectral_norm(&(got - want)));
    };

    // T*e1 = conj(α) e0, T*e_k = e_{k-1}; T² e0 = α e2
    let mut adj = CMatrix::zeros(n, n);
    adj[(0, 1)] = alpha.conj();
    for k in 2..n {
        adj[(k - 1, k)] = cr(1.0);
    }
    cmp("adjoint", &t.adjoint(), &adj);
    cmp("square_e0", &(t * t * basis(n, 0)), &(basis(n, 2) * alpha));

    let tuple = talpha_tuple(kind, t, tol)?;
    let verdict = verify_tuple(&tuple, tol)?;
    let cd = tuple.contraction()?;

    // D_{R3}: √(1-|α|²) a0; D_{R3*}: a0 + a1ζ + √(1-|α|²) a2ζ²
    let d_closed = diag_prefix(n, &[cr(rho)]);
    cmp("defect", &leading(&cd.d_t, inner, inner), &leading(&d_closed, inner, inner));
    let ds_closed = diag_prefix(n, &[cr(1.0), cr(1.0), cr(rho)]);
    cmp("defect_star", &leading(&cd.d_tstar, inner, inner), &leading(&ds_closed, inner, inner));

    // asymptotic data of R3 on a padded section
    let padded = talpha_matrix(alpha, 3 * n);
    let r3p = &padded * &padded;
    let asy = asymptotic_windowed(&r3p, tol, DEFAULT_MAX_ITER, n)?;
    let a_n = leading(&asy.a, n, n);
    let a_closed = {
        let mut m = eye(n);
        m[(0, 0)] = cr(a * a);
        m
    };
    let ah_closed = {
        let mut m = eye(n);
        m[(0, 0)] = cr(a);
        m
    };
    cmp("asymptotic", &a_n, &a_closed);
    cmp("asymptotic_root", &leading(&asy.a_half, n, n), &ah_closed);
    cmp("asymptotic_star", &leading(&asy.a_star, n, n), &CMatrix::zeros(n, n));
    let q_amb = &asy.ran_a.basis * &asy.q * asy.ran_a.basis.adjoint();
    cmp("q", &leading(&q_amb, n, n), &eye(n));

    // adjoint fundamental operators: the slots holding T are G, the rest vanish
    // G(a0 + a1ζ + a2ζ²) = conj(α) a1 + √(1-|α|²) a2 ζ
    let fs_star = solve_fundamental(&tuple.adjoint(), tol)?;
    let mut g_closed = CMatrix::zeros(n, n);
    g_closed[(0, 1)] = alpha.conj();
    g_closed[(1, 2)] = cr(rho);
    let zero = CMatrix::zeros(n, n);
    for (&i, y) in kind.op_indices().iter().zip(fs_star.ambient()) {
        let want = if spectral_norm(&tuple.ops[i]) > 0.0 { &g_closed } else { &zero };
        cmp(&format!("adjoint_fundamental_{}", kind.op_names()[i]), &y, want);
    }

    // constant terms of D_{R3*} R1 A and D_{R3*} A R1 on e0, e1
    let r1 = &tuple.ops[0];
    let m1 = &cd.d_tstar * r1 * &a_n;
    let m2 = &cd.d_tstar * &a_n * r1;
    let e0 = basis(n, 0);
    let e1 = basis(n, 1);
    let e2 = basis(n, 2);
    cmp("first_on_e0", &(&m1 * &e0), &(&e1 * (alpha * a * a)));
    cmp("second_on_e0", &(&m2 * &e0), &(&e1 * alpha));
    cmp("first_on_e1", &(&m1 * &e1), &(&e2 * cr(rho)));
    cmp("second_on_e1", &(&m2 * &e1), &(&e2 * cr(rho)));
    let mismatch = spectral_norm(&((&m1 - &m2) * &e0));
    let expected = a * (1.0 - a * a);

    let fs = solve_fundamental(&tuple, tol)?;
    let hypothesis_violated =
        matches!(build_cnu_model(&tuple, &fs, &fs_star, n, tol), Err(GmlError::HypothesisViolated { .. }));

    let checks_ok = checks.values().all(|&r| r <= tol.tol_exact * n as f64);
    let pass =
        checks_ok && (mismatch - expected).abs() <= tol.tol_exact && hypothesis_violated && verdict.structural_ok();
    let mut notes = vec![format!("asymptotic limit on a {}-dim section, {} iterations", 3 * n, asy.iterations)];
    if !verdict.notes.is_empty() {
        notes.extend(verdict.notes.iter().cloned());
    }
    Ok(CounterexampleReport {
        kind,
        alpha: [alpha.re, alpha.im],
        dim,
        mismatch,
        expected_mismatch: expected,
        checks,
        tuple_valid: verdict.structural_ok(),
        hypothesis_violated,
        pass,
        notes,
    })
}

/// Convenience for real α.
pub fn run_counterexample_real(kind: Kind, alpha: f64, dim: usize, tol: &Tolerances) -> Result<CounterexampleReport> {
    run_counterexample(kind, c(alpha, 0.0), dim, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kind::ALL_KINDS;

    #[test]
    fn talpha_matrix_shape() {
        let z = build_talpha(cr(0.0), 8).unwrap();
        assert!(spectral_norm(&(z.t.clone() * basis(8, 0))) == 0.0);
        assert_eq!(z.t[(3, 2)], cr(1.0));
        let h = build_talpha(cr(0.5), 8).unwrap();
        assert_eq!(&h.t * &h.t * basis(8, 0), basis(8, 2) * cr(0.5));
        assert!(matches!(build_talpha(cr(1.0), 8), Err(GmlError::AlphaNotInDisk { .. })));
        assert!(build_talpha(cr(0.5), 5).is_err());
    }

    #[test]
    fn mismatch_one_half() {
        let tol = Tolerances::default();
        for kind in ALL_KINDS {
            let r = run_counterexample_real(kind, 0.5, 8, &tol).unwrap();
            assert!((r.mismatch - 0.375).abs() < 1e-12, "{kind}: {r:?}");
            assert!(r.pass, "{kind}: {r:?}");
        }
    }

    #[test]
    fn complex_alpha() {
        let tol = Tolerances::default();
        let al = C64::from_polar(0.7, 1.1);
        let r = run_counterexample(Kind::G312, al, 10, &tol).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.mismatch - 0.7 * 0.51).abs() < 1e-12);
    }

    #[test]
    fn degenerate_alpha() {
        let tol = Tolerances::default();
        assert!(matches!(run_counterexample_real(Kind::G333, 0.0, 8, &tol), Err(GmlError::DegenerateAlpha)));
    }
}

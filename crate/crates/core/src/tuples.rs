//! Tuple containers, necessary-condition verdicts and fixture generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contraction::{analyze_contraction, ContractionData};
use crate::error::{GmlError, Result};
use crate::fundamental::{check_pencil_commutativity, identity_tolerance, solve_fundamental, FundamentalSet};
use crate::kind::Kind;
use crate::matrixcore::{
    c, commutator, cr, diag, eye, is_finite, kron, polar_unitary, spectral_norm, CMatrix, MatrixJson, Tolerances, C64,
};
use crate::mu::{coord_map, mu_for_kind, DEFAULT_PRECISION};

#[derive(Clone, Debug)]
pub struct GammaTuple {
    pub kind: Kind,
    pub ops: Vec<CMatrix>,
    /// `None` when the distinguished operator is not a contraction.
    pub last_contraction: Option<ContractionData>,
}

impl GammaTuple {
    pub fn new(kind: Kind, ops: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        if ops.len() != kind.arity() {
            return Err(GmlError::DimensionMismatch(format!(
                "{kind} tuple needs {} operators, got {}",
                kind.arity(),
                ops.len()
            )));
        }
        let n = ops[0].nrows();
        for (i, op) in ops.iter().enumerate() {
            if op.shape() != (n, n) {
                return Err(GmlError::DimensionMismatch(format!(
                    "operator {} has shape {:?}, expected {n}x{n}",
                    kind.op_names()[i],
                    op.shape()
                )));
            }
            if !is_finite(op) {
                return Err(GmlError::InvalidInput(format!("operator {} has non-finite entries", kind.op_names()[i])));
            }
        }
        let last_contraction = analyze_contraction(&ops[kind.distinguished()], tol).ok();
        Ok(GammaTuple { kind, ops, last_contraction })
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn distinguished(&self) -> &CMatrix {
        &self.ops[self.kind.distinguished()]
    }

    /// Largest operator norm in the tuple.
    pub fn norm(&self) -> f64 {
        self.ops.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    pub fn contraction(&self) -> Result<&ContractionData> {
        self.last_contraction.as_ref().ok_or(GmlError::NotAContraction { norm: spectral_norm(self.distinguished()) })
    }

    /// Entrywise adjoint tuple.
    pub fn adjoint(&self) -> GammaTuple {
        GammaTuple {
            kind: self.kind,
            ops: self.ops.iter().map(|m| m.adjoint()).collect(),
            last_contraction: self.last_contraction.as_ref().map(ContractionData::adjoint),
        }
    }

    pub fn to_json(&self) -> TupleJson {
        TupleJson { kind: self.kind, ops: self.ops.iter().map(MatrixJson::from).collect() }
    }

    pub fn from_json(j: &TupleJson, tol: &Tolerances) -> Result<Self> {
        let ops = j.ops.iter().map(CMatrix::try_from).collect::<Result<Vec<_>>>()?;
        GammaTuple::new(j.kind, ops, tol)
    }
}

/// Tuple JSON: `{"kind": .., "ops": [matrix, ..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleJson {
    pub kind: Kind,
    pub ops: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleVerdict {
    pub commuting: bool,
    pub distinguished_contraction: bool,
    pub fundamental_solvable: bool,
    pub purity: bool,
    pub cnu: bool,
    /// Necessary conditions on the induced tetrablock triples.
    pub subtuples: bool,
    pub notes: Vec<String>,
}

impl TupleVerdict {
    /// Structural checks that make the tuple a candidate (purity and c.n.u. are classifications).
    pub fn structural_ok(&self) -> bool {
        self.commuting && self.distinguished_contraction && self.fundamental_solvable && self.subtuples
    }
}

fn max_commutator(ops: &[CMatrix]) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let n = spectral_norm(&commutator(&ops[i], &ops[j]));
            if n > worst.0 {
                worst = (n, i, j);
            }
        }
    }
    worst
}

/// The tetrablock triples induced by a larger tuple, with labels.
pub fn induced_triples(t: &GammaTuple) -> Vec<(String, [CMatrix; 3])> {
    let o = &t.ops;
    let half = |m: &CMatrix| m.map(|z| z * 0.5);
    match t.kind {
        Kind::Tetrablock => vec![],
        Kind::G333 => [(0, 5), (1, 4), (2, 3)]
            .iter()
            .map(|&(a, b)| (format!("(T{}, T{}, T7)", a + 1, b + 1), [o[a].clone(), o[b].clone(), o[6].clone()]))
            .collect(),
        Kind::G312 => vec![
            ("(S1, S~2, S3)".to_string(), [o[0].clone(), o[4].clone(), o[2].clone()]),
            ("(S~1/2, S2/2, S3)".to_string(), [half(&o[3]), half(&o[1]), o[2].clone()]),
            ("(S2/2, S~1/2, S3)".to_string(), [half(&o[1]), half(&o[3]), o[2].clone()]),
        ],
    }
}

pub fn verify_tuple(t: &GammaTuple, tol: &Tolerances) -> Result<TupleVerdict> {
    let n = t.dim();
    if t.ops.iter().any(|m| m.shape() != (n, n)) || t.ops.len() != t.kind.arity() {
        return Err(GmlError::DimensionMismatch("inconsistent tuple shapes".into()));
    }
    let bound = identity_tolerance(t, tol);
    let mut notes = Vec::new();

    let (cn, ci, cj) = max_commutator(&t.ops);
    let commuting = cn <= bound;
    if !commuting {
        let names = t.kind.op_names();
        notes.push(format!("[{}, {}] has norm {cn:.3e}", names[ci], names[cj]));
    }
    if t.kind == Kind::G312 {
        notes.push("g312: all ten pairs are required to commute".into());
    }

    let dnorm = spectral_norm(t.distinguished());
    let distinguished_contraction = t.last_contraction.is_some();
    if !distinguished_contraction {
        notes.push(format!("distinguished operator has norm {dnorm:.12}"));
    }

    let fundamental_solvable = if distinguished_contraction {
        match solve_fundamental(t, tol) {
            Ok(_) => true,
            Err(e) => {
                notes.push(format!("fundamental equations: {e}"));
                false
            }
        }
    } else {
        false
    };

    let (purity, cnu) = match &t.last_contraction {
        Some(cd) => (cd.is_pure, cd.is_cnu),
        None => (false, false),
    };

    let mut subtuples = true;
    for (label, ops) in induced_triples(t) {
        let norms: Vec<f64> = ops.iter().map(spectral_norm).collect();
        if norms.iter().any(|&x| x > 1.0 + tol.tol_exact) {
            subtuples = false;
            notes.push(format!("{label}: operator norms {norms:.6?} exceed one"));
            continue;
        }
        let sub = GammaTuple::new(Kind::Tetrablock, ops.to_vec(), tol)?;
        let (scn, _, _) = max_commutator(&sub.ops);
        if scn > bound {
            subtuples = false;
            notes.push(format!("{label}: not commuting ({scn:.3e})"));
        }
        if sub.last_contraction.is_some() {
            if let Err(e) = solve_fundamental(&sub, tol) {
                subtuples = false;
                notes.push(format!("{label}: {e}"));
            }
        }
    }

    Ok(TupleVerdict { commuting, distinguished_contraction, fundamental_solvable, purity, cnu, subtuples, notes })
}

/// Coordinates of A times the identity of size `dim`.
pub fn make_scalar_tuple(kind: Kind, a: &CMatrix, dim: usize, tol: &Tolerances) -> Result<GammaTuple> {
    let mu = mu_for_kind(a, kind)?;
    if mu > 1.0 + 2.0 * DEFAULT_PRECISION {
        return Err(GmlError::MuExceedsOne { mu });
    }
    let p = coord_map(a, kind)?;
    let ops = p.coords.iter().map(|&x| eye(dim) * x).collect();
    GammaTuple::new(kind, ops, tol)
}

/// Truncated forward shift on `modes` Fourier coefficients; the top mode goes to 0.
pub fn truncated_shift(modes: usize) -> CMatrix {
    let mut s = CMatrix::zeros(modes, modes);
    for k in 0..modes.saturating_sub(1) {
        s[(k + 1, k)] = cr(1.0);
    }
    s
}

/// Multiplication tuple with symbols X_j* + X_{p(j)} z on the first `modes`
/// Hardy coefficients, fibre C^fiber_dim, mode-major indexing.
pub fn make_pure_isometry_tuple(
    kind: Kind,
    family: &FundamentalSet,
    fiber_dim: usize,
    modes: usize,
    tol: &Tolerances,
) -> Result<GammaTuple> {
    if family.kind != kind || family.ops_on_defect.len() != kind.num_fundamental() {
        return Err(GmlError::DimensionMismatch(format!("family does not fit a {kind} tuple")));
    }
    if family.ops_on_defect.iter().any(|x| x.shape() != (fiber_dim, fiber_dim)) {
        return Err(GmlError::DimensionMismatch(format!("family ops must be {fiber_dim}x{fiber_dim}")));
    }
    let failed: Vec<String> = check_pencil_commutativity(kind, family, tol)
        .into_iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} (norm {:.3e})", r.id, r.norm))
        .collect();
    if !failed.is_empty() {
        return Err(GmlError::ConditionsViolated(failed.join(", ")));
    }
    let s = truncated_shift(modes);
    let id = eye(modes);
    let x = &family.ops_on_defect;
    let mut ops = Vec::with_capacity(kind.arity());
    for i in 0..kind.arity() {
        if i == kind.distinguished() {
            ops.push(kron(&s, &eye(fiber_dim)));
        } else {
            let k = kind.slot(i);
            let kp = kind.partner_slot(k);
            ops.push(kron(&id, &x[k].adjoint()) + kron(&s, &x[kp]));
        }
    }
    GammaTuple::new(kind, ops, tol)
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    polar_unitary(&CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
}

/// Commuting normal family X_k = U diag(λ_k) U* with |λ_k| + |λ_{p(k)}| ≤ 1.
pub fn random_normal_family(kind: Kind, fiber_dim: usize, seed: u64) -> FundamentalSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(&mut rng, fiber_dim);
    let m = kind.num_fundamental();
    let lambdas: Vec<Vec<C64>> = (0..m)
        .map(|_| {
            (0..fiber_dim)
                .map(|_| C64::from_polar(0.5 * rng.random::<f64>(), std::f64::consts::TAU * rng.random::<f64>()))
                .collect()
        })
        .collect();
    let ops = lambdas.iter().map(|l| &u * diag(l) * u.adjoint()).collect();
    FundamentalSet::from_family(kind, ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::matrix_power;

    fn t_alpha(alpha: f64, n: usize) -> CMatrix {
        let mut t = truncated_shift(n);
        t[(1, 0)] = cr(alpha);
        t
    }

    #[test]
    fn zero_tuple_passes() {
        let tol = Tolerances::default();
        let t = GammaTuple::new(Kind::G333, vec![CMatrix::zeros(3, 3); 7], &tol).unwrap();
        let v = verify_tuple(&t, &tol).unwrap();
        assert!(v.structural_ok() && v.purity && v.cnu);
    }

    #[test]
    fn weighted_shift_tetrablock() {
        let tol = Tolerances::default();
        let r = t_alpha(0.5, 8);
        let t = GammaTuple::new(Kind::Tetrablock, vec![r.clone(), r.clone(), matrix_power(&r, 2)], &tol).unwrap();
        let v = verify_tuple(&t, &tol).unwrap();
        assert!(v.commuting && v.distinguished_contraction && v.fundamental_solvable, "{v:?}");
    }

    #[test]
    fn random_entries_do_not_commute() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = (0..7)
            .map(|_| CMatrix::from_fn(3, 3, |_, _| c(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))))
            .collect();
        let t = GammaTuple::new(Kind::G333, ops, &tol).unwrap();
        assert!(!verify_tuple(&t, &tol).unwrap().commuting);
    }

    #[test]
    fn shape_errors() {
        let tol = Tolerances::default();
        assert!(matches!(GammaTuple::new(Kind::G312, vec![eye(2); 4], &tol), Err(GmlError::DimensionMismatch(_))));
        let mut ops = vec![eye(2); 3];
        ops[1] = eye(3);
        assert!(GammaTuple::new(Kind::Tetrablock, ops, &tol).is_err());
    }

    #[test]
    fn scalar_tuples() {
        let tol = Tolerances::default();
        let z = make_scalar_tuple(Kind::G333, &CMatrix::zeros(3, 3), 2, &tol).unwrap();
        assert!(z.ops.iter().all(|m| m.iter().all(|x| *x == cr(0.0))));
        let (a, b, cc) = (c(0.5, 0.0), c(0.0, -0.3), c(-0.2, 0.1));
        let t = make_scalar_tuple(Kind::G333, &diag(&[a, b, cc]), 2, &tol).unwrap();
        let expect = [a, b, a * b, cc, a * cc, b * cc, a * b * cc];
        for (m, e) in t.ops.iter().zip(expect) {
            assert_eq!(m[(0, 0)], e);
            assert_eq!(m[(0, 1)], cr(0.0));
        }
        assert!(verify_tuple(&t, &tol).unwrap().structural_ok());
        assert!(matches!(
            make_scalar_tuple(Kind::Tetrablock, &(eye(2) * cr(2.0)), 2, &tol),
            Err(GmlError::MuExceedsOne { .. })
        ));
    }

    #[test]
    fn zero_family_gives_shift() {
        let tol = Tolerances::default();
        let fam = FundamentalSet::from_family(Kind::G333, vec![CMatrix::zeros(2, 2); 6]);
        let t = make_pure_isometry_tuple(Kind::G333, &fam, 2, 8, &tol).unwrap();
        assert!(t.ops[..6].iter().all(|m| spectral_norm(m) == 0.0));
        assert_eq!(t.ops[6], kron(&truncated_shift(8), &eye(2)));
        assert!(t.contraction().unwrap().is_pure);
    }

    #[test]
    fn scalar_family_is_toeplitz() {
        let tol = Tolerances::default();
        let f: Vec<CMatrix> = (0..2).map(|k| CMatrix::from_element(1, 1, c(0.2 + 0.1 * k as f64, 0.1))).collect();
        let fam = FundamentalSet::from_family(Kind::Tetrablock, f.clone());
        let t = make_pure_isometry_tuple(Kind::Tetrablock, &fam, 1, 6, &tol).unwrap();
        // symbol f_j* + f_{p(j)} z: diagonal conj(f_j), first subdiagonal f_{p(j)}
        for j in 0..2 {
            let m = &t.ops[j];
            for r in 0..6 {
                for col in 0..6 {
                    let expect = if r == col {
                        f[j][(0, 0)].conj()
                    } else if r == col + 1 {
                        f[1 - j][(0, 0)]
                    } else {
                        cr(0.0)
                    };
                    assert_eq!(m[(r, col)], expect);
                }
            }
        }
    }

    #[test]
    fn non_commuting_family_rejected() {
        let tol = Tolerances::default();
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = cr(0.4);
        let b = diag(&[cr(0.3), cr(-0.3)]);
        let fam = FundamentalSet::from_family(Kind::Tetrablock, vec![a, b]);
        assert!(matches!(
            make_pure_isometry_tuple(Kind::Tetrablock, &fam, 2, 8, &tol),
            Err(GmlError::ConditionsViolated(_))
        ));
    }

    #[test]
    fn generated_tuples_verify() {
        let tol = Tolerances::default();
        for kind in crate::kind::ALL_KINDS {
            let fam = random_normal_family(kind, 2, 5);
            let t = make_pure_isometry_tuple(kind, &fam, 2, 12, &tol).unwrap();
            let v = verify_tuple(&t, &tol).unwrap();
            assert!(v.structural_ok() && v.purity, "{kind}: {v:?}");
        }
    }
}

//! Fundamental operators and the identity catalog.
//!
//! For every kind the defining equations have the uniform shape
//! `Op_j - Op_{p(j)}^* Dist = D X_j D` with `p` the partner map of
//! [`Kind::partner`]. For g312 this means the stored operators are
//! `(G1, 2 G2, 2 G~1, G~2)`: the halves in the second pair of equations are
//! absorbed into the stored values, and every identity below is stated for
//! the stored values directly.
//!
//! Identity ids are opaque strings taken from the external interface.

use serde::{Deserialize, Serialize};

use crate::charfun::theta_eval;
use crate::contraction::{asymptotic, ContractionData, DEFAULT_MAX_ITER};
use crate::error::{GmlError, Result};
use crate::kind::Kind;
use crate::matrixcore::{commutator, eye, kron, pinv, singular_values, spectral_norm, CMatrix, Tolerances, C64};
use crate::tuples::GammaTuple;

#[derive(Clone, Debug)]
pub struct FundamentalSet {
    pub kind: Kind,
    /// One operator per non-distinguished tuple entry, in tuple order, on defect coordinates.
    pub ops_on_defect: Vec<CMatrix>,
    pub residuals: Vec<f64>,
    /// Orthonormal basis of the defect space used for the coordinates.
    pub defect_basis: CMatrix,
}

impl FundamentalSet {
    /// A family given directly in coordinates of C^d.
    pub fn from_family(kind: Kind, ops: Vec<CMatrix>) -> Self {
        let d = ops.first().map(|m| m.nrows()).unwrap_or(0);
        let residuals = vec![0.0; ops.len()];
        FundamentalSet { kind, ops_on_defect: ops, residuals, defect_basis: eye(d) }
    }

    pub fn defect_dim(&self) -> usize {
        self.defect_basis.ncols()
    }

    /// B X Bᴴ: the operators extended by zero to the ambient space.
    pub fn ambient(&self) -> Vec<CMatrix> {
        let b = &self.defect_basis;
        self.ops_on_defect.iter().map(|x| b * x * b.adjoint()).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Default identity tolerance tol_exact·(1+‖t‖)·dim.
pub fn identity_tolerance(t: &GammaTuple, tol: &Tolerances) -> f64 {
    tol.tol_exact * (1.0 + t.norm()) * t.dim().max(1) as f64
}

/// Op_j - Op_{p(j)}^* Dist for tuple index j.
pub fn fundamental_rhs(t: &GammaTuple, j: usize) -> CMatrix {
    let p = t.kind.partner(j);
    &t.ops[j] - t.ops[p].adjoint() * t.distinguished()
}

fn solvability_bound(t: &GammaTuple, tol: &Tolerances) -> f64 {
    tol.tol_exact * (1.0 + t.norm())
}

fn finish_solve(t: &GammaTuple, cd: &ContractionData, ops: Vec<CMatrix>, tol: &Tolerances) -> Result<FundamentalSet> {
    let b = cd.defect_space.basis.clone();
    let d = &cd.d_t;
    let mut residuals = Vec::with_capacity(ops.len());
    for (x, &j) in ops.iter().zip(t.kind.op_indices().iter()) {
        let rhs = fundamental_rhs(t, j);
        residuals.push(spectral_norm(&(d * &b * x * b.adjoint() * d - rhs)));
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let bound = solvability_bound(t, tol);
    if worst > bound {
        return Err(GmlError::NotSolvable { residual: worst, tolerance: bound });
    }
    Ok(FundamentalSet { kind: t.kind, ops_on_defect: ops, residuals, defect_basis: b })
}

/// Sandwich solve: X_j = Bᴴ D⁺ RHS_j D⁺ B.
pub fn solve_fundamental(t: &GammaTuple, tol: &Tolerances) -> Result<FundamentalSet> {
    let cd = t.contraction()?;
    let b = &cd.defect_space.basis;
    let dp = pinv(&cd.d_t, tol);
    let left = b.adjoint() * &dp;
    let right = &dp * b;
    let ops = t.kind.op_indices().iter().map(|&j| &left * fundamental_rhs(t, j) * &right).collect();
    finish_solve(t, cd, ops, tol)
}

/// Least-squares solve of the vectorized system ((BᴴD)ᵀ ⊗ DB) vec X = vec RHS.
pub fn solve_fundamental_lstsq(t: &GammaTuple, tol: &Tolerances) -> Result<FundamentalSet> {
    let cd = t.contraction()?;
    let b = &cd.defect_space.basis;
    let r = b.ncols();
    let n = t.dim();
    let db = &cd.d_t * b;
    let bd = b.adjoint() * &cd.d_t;
    let sys = kron(&bd.transpose(), &db);
    let sys_pinv = pinv(&sys, tol);
    let mut ops = Vec::new();
    for &j in &t.kind.op_indices() {
        let rhs = fundamental_rhs(t, j);
        // column-major vec
        let v = CMatrix::from_iterator(n * n, 1, rhs.iter().copied());
        let x = &sys_pinv * v;
        ops.push(CMatrix::from_iterator(r, r, x.iter().copied()));
    }
    finish_solve(t, cd, ops, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub id: String,
    pub norm: f64,
    pub pass: bool,
    pub notes: String,
    /// False when a stated hypothesis of the identity fails for this tuple.
    pub applicable: bool,
}

impl IdentityReport {
    fn new(id: &str, norm: f64, bound: f64, applicable: bool, notes: String) -> Self {
        IdentityReport { id: id.to_string(), norm, pass: norm <= bound, notes, applicable }
    }
}

pub fn catalog(kind: Kind) -> Vec<&'static str> {
    match kind {
        Kind::G333 => vec![
            "P2.2-rep",
            "L2.3-diff",
            "P2.4-1",
            "P2.4-2",
            "P2.4-3",
            "T2.5-1",
            "T2.5-2",
            "T2.5-3",
            "T2.8-pencil",
            "P5.1-1",
            "P5.1-2",
        ],
        Kind::G312 => vec![
            "P2.11-rep",
            "P2.12-diff",
            "P2.13-1",
            "P2.13-2",
            "P2.13-3",
            "P2.13-4",
            "P2.13-5",
            "T2.14-1",
            "T2.14-2",
            "T2.14-3",
            "T2.16-1",
            "T2.16-2",
            "T2.16-3",
            "T2.16-4",
            "P5.10-1",
            "P5.10-2",
        ],
        Kind::Tetrablock => vec!["P2.2-rep", "P2.4-1", "P2.4-2", "P2.4-3", "T2.8-pencil", "P5.6-1", "P5.6-2"],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Check {
    Rep,
    Diff,
    DefectShift,
    Intertwine,
    StarSide(Option<usize>),
    AdjointCommute,
    SelfCommutator,
    AdjointSelfCommutator,
    Pencil(Option<usize>),
    AsymptoticRange,
    AsymptoticShift,
}

fn resolve(kind: Kind, id: &str) -> Option<Check> {
    let generic = match id {
        "P2.2-rep" | "P2.11-rep" => Some(Check::Rep),
        "L2.3-diff" | "P2.12-diff" => Some(Check::Diff),
        "P2.4-1" => Some(Check::DefectShift),
        "P2.4-2" | "P2.13-1" => Some(Check::Intertwine),
        "P2.4-3" => Some(Check::StarSide(None)),
        "P2.13-2" => Some(Check::StarSide(Some(0))),
        "P2.13-3" => Some(Check::StarSide(Some(1))),
        "P2.13-4" => Some(Check::StarSide(Some(2))),
        "P2.13-5" => Some(Check::StarSide(Some(3))),
        "T2.5-1" | "T2.14-1" => Some(Check::AdjointCommute),
        "T2.5-2" | "T2.14-2" => Some(Check::SelfCommutator),
        "T2.5-3" | "T2.14-3" => Some(Check::AdjointSelfCommutator),
        "T2.8-pencil" => Some(Check::Pencil(None)),
        "T2.16-1" => Some(Check::Pencil(Some(0))),
        "T2.16-2" => Some(Check::Pencil(Some(1))),
        "T2.16-3" => Some(Check::Pencil(Some(2))),
        "T2.16-4" => Some(Check::Pencil(Some(3))),
        "P5.1-1" | "P5.6-1" | "P5.10-1" => Some(Check::AsymptoticRange),
        "P5.1-2" | "P5.6-2" | "P5.10-2" => Some(Check::AsymptoticShift),
        _ => None,
    };
    generic.filter(|_| catalog(kind).contains(&id))
}

/// 20 deterministic points with |z| ≤ 0.9.
pub fn pencil_grid() -> Vec<C64> {
    let mut out = Vec::with_capacity(20);
    for (ri, r) in [0.225, 0.45, 0.675, 0.9].iter().enumerate() {
        for k in 0..5 {
            let theta = std::f64::consts::TAU * (k as f64 + 0.37 * ri as f64) / 5.0;
            out.push(C64::from_polar(*r, theta));
        }
    }
    out
}

struct Ctx<'a> {
    t: &'a GammaTuple,
    cd: &'a ContractionData,
    x: Vec<CMatrix>,
    y: Vec<CMatrix>,
    fs: &'a FundamentalSet,
    fs_star: &'a FundamentalSet,
    bound: f64,
    tol: &'a Tolerances,
}

fn max_over(slots: impl Iterator<Item = usize>, f: impl Fn(usize) -> f64) -> (f64, usize) {
    slots.map(|k| (f(k), k)).fold((0.0, 0), |acc, v| if v.0 > acc.0 { v } else { acc })
}

fn max_pair_commutator(ops: &[CMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            worst = worst.max(spectral_norm(&commutator(&ops[i], &ops[j])));
        }
    }
    worst
}

impl Ctx<'_> {
    fn op(&self, k: usize) -> &CMatrix {
        &self.t.ops[self.t.kind.op_indices()[k]]
    }

    fn slot_name(&self, k: usize) -> &'static str {
        self.t.kind.op_names()[self.t.kind.op_indices()[k]]
    }

    fn m(&self) -> usize {
        self.t.kind.num_fundamental()
    }

    fn evaluate(&self, id: &str, check: Check) -> IdentityReport {
        let kind = self.t.kind;
        let cd = self.cd;
        let p = &cd.t;
        let d = &cd.d_t;
        let ds = &cd.d_tstar;
        let b = &cd.defect_space.basis;
        let bs = &cd.defect_space_star.basis;
        let ps = p.adjoint();
        let pp = kind.partner_slot(0);
        let _ = pp;
        let m = self.m();
        let worst_note = |k: usize| format!("worst at {}", self.slot_name(k));
        match check {
            Check::Rep => {
                let (n, k) = max_over(0..m, |k| {
                    let kp = kind.partner_slot(k);
                    spectral_norm(&(d * self.op(k) - &self.x[k] * d - self.x[kp].adjoint() * d * p))
                });
                IdentityReport::new(id, n, self.bound, true, worst_note(k))
            }
            Check::Diff => {
                let comm = max_pair_commutator(&self.fs.ops_on_defect);
                let applicable = comm <= self.bound;
                let (n, k) = max_over(0..m, |k| {
                    let kp = kind.partner_slot(k);
                    let lhs = self.op(k).adjoint() * self.op(k) - self.op(kp).adjoint() * self.op(kp);
                    let rhs = d * (self.x[k].adjoint() * &self.x[k] - self.x[kp].adjoint() * &self.x[kp]) * d;
                    spectral_norm(&(lhs - rhs))
                });
                IdentityReport::new(
                    id,
                    n,
                    self.bound,
                    applicable,
                    format!("{}; max fundamental commutator {comm:.3e}", worst_note(k)),
                )
            }
            Check::DefectShift => {
                let (n, k) = max_over(0..m, |k| {
                    let kp = kind.partner_slot(k);
                    spectral_norm(&((d * &self.x[k] - self.op(k) * d + ds * &self.y[kp] * p) * b))
                });
                IdentityReport::new(id, n, self.bound, true, worst_note(k))
            }
            Check::Intertwine => {
                let (n, k) = max_over(0..m, |k| spectral_norm(&((p * &self.x[k] - self.y[k].adjoint() * p) * b)));
                IdentityReport::new(id, n, self.bound, true, worst_note(k))
            }
            Check::StarSide(slot) => {
                let f = |k: usize| {
                    let kp = kind.partner_slot(k);
                    let lhs = (self.x[k].adjoint() * d * ds - &self.x[kp] * &ps) * bs;
                    let rhs = (d * ds * &self.y[k] - &ps * self.y[kp].adjoint()) * bs;
                    spectral_norm(&(lhs - rhs))
                };
                let (n, k) = match slot {
                    Some(k) => (f(k), k),
                    None => max_over(0..m, f),
                };
                IdentityReport::new(id, n, self.bound, true, worst_note(k))
            }
            Check::AdjointCommute | Check::SelfCommutator | Check::AdjointSelfCommutator => {
                let comm = max_pair_commutator(&self.fs.ops_on_defect);
                let smin = singular_values(p).last().copied().unwrap_or(0.0);
                let applicable = comm <= self.bound && smin > self.tol.tol_rank;
                let notes = format!("max [F_i,F_j] {comm:.3e}; smallest singular value of distinguished {smin:.3e}");
                let self_comm = |ops: &[CMatrix], k: usize| {
                    let kp = kind.partner_slot(k);
                    spectral_norm(&(commutator(&ops[k], &ops[k].adjoint()) - commutator(&ops[kp], &ops[kp].adjoint())))
                };
                let n = match check {
                    Check::AdjointCommute => max_pair_commutator(&self.fs_star.ops_on_defect),
                    Check::SelfCommutator => max_over(0..m, |k| self_comm(&self.fs.ops_on_defect, k)).0,
                    _ => max_over(0..m, |k| self_comm(&self.fs_star.ops_on_defect, k)).0,
                };
                IdentityReport::new(id, n, self.bound, applicable, notes)
            }
            Check::Pencil(slot) => {
                let adj = cd.adjoint();
                let thetas: Vec<(C64, CMatrix)> = pencil_grid()
                    .into_iter()
                    .map(|z| (z, theta_eval(&adj, z).expect("grid inside the disk")))
                    .collect();
                let fx = &self.fs.ops_on_defect;
                let fy = &self.fs_star.ops_on_defect;
                let f = |k: usize| {
                    let kp = kind.partner_slot(k);
                    thetas
                        .iter()
                        .map(|(z, th)| {
                            let left = (fx[k].adjoint() + &fx[kp] * *z) * th;
                            let right = th * (&fy[k] + fy[kp].adjoint() * *z);
                            spectral_norm(&(left - right))
                        })
                        .fold(0.0, f64::max)
                };
                let (n, k) = match slot {
                    Some(k) => (f(k), k),
                    None => max_over(0..m, f),
                };
                IdentityReport::new(id, n, self.bound * 10.0, true, format!("{}; 20 points |z| <= 0.9", worst_note(k)))
            }
            Check::AsymptoticRange => match asymptotic(p, self.tol, DEFAULT_MAX_ITER) {
                Ok(asy) => {
                    let ba = &asy.ran_a.basis;
                    let ah = &asy.a_half * ba;
                    let pps = p * &ps;
                    let (n, k) = max_over(0..m, |k| {
                        let kp = kind.partner_slot(k);
                        let lhs = self.y[k].adjoint() * ds * &ah + &pps * &self.y[kp] * ds * &ah * &asy.v;
                        spectral_norm(&(lhs - ds * self.op(k) * &ah))
                    });
                    IdentityReport::new(
                        id,
                        n,
                        self.bound,
                        true,
                        format!("{}; dim ran A = {}", worst_note(k), asy.ran_a.dim()),
                    )
                }
                Err(e) => IdentityReport {
                    id: id.to_string(),
                    norm: f64::NAN,
                    pass: false,
                    notes: format!("asymptotic limit unavailable: {e}"),
                    applicable: false,
                },
            },
            Check::AsymptoticShift => {
                let pps = p * &ps;
                let (n, k) = max_over(0..m, |k| {
                    let kp = kind.partner_slot(k);
                    let lhs = self.y[k].adjoint() * ds * &ps + &pps * &self.y[kp] * ds;
                    spectral_norm(&(lhs - ds * self.op(k) * &ps))
                });
                IdentityReport::new(id, n, self.bound, true, worst_note(k))
            }
        }
    }
}

fn context<'a>(
    t: &'a GammaTuple,
    fs: &'a FundamentalSet,
    fs_star: &'a FundamentalSet,
    tol: &'a Tolerances,
) -> Result<Ctx<'a>> {
    let cd = t.contraction()?;
    let m = t.kind.num_fundamental();
    if fs.ops_on_defect.len() != m || fs_star.ops_on_defect.len() != m || fs.kind != t.kind || fs_star.kind != t.kind {
        return Err(GmlError::DimensionMismatch("fundamental sets do not match the tuple".into()));
    }
    if fs.defect_basis.nrows() != t.dim() || fs_star.defect_basis.nrows() != t.dim() {
        return Err(GmlError::DimensionMismatch("fundamental sets live on a different space".into()));
    }
    Ok(Ctx { t, cd, x: fs.ambient(), y: fs_star.ambient(), fs, fs_star, bound: identity_tolerance(t, tol), tol })
}

pub fn check_identity(
    id: &str,
    t: &GammaTuple,
    fs: &FundamentalSet,
    fs_star: &FundamentalSet,
    tol: &Tolerances,
) -> Result<IdentityReport> {
    let check = resolve(t.kind, id).ok_or_else(|| GmlError::UnknownIdentity(id.to_string()))?;
    let ctx = context(t, fs, fs_star, tol)?;
    Ok(ctx.evaluate(id, check))
}

/// Every catalog identity for the tuple's kind, sorted by id.
pub fn check_catalog(
    t: &GammaTuple,
    fs: &FundamentalSet,
    fs_star: &FundamentalSet,
    tol: &Tolerances,
) -> Result<Vec<IdentityReport>> {
    let ctx = context(t, fs, fs_star, tol)?;
    let mut ids = catalog(t.kind);
    ids.sort_unstable();
    Ok(ids.into_iter().map(|id| ctx.evaluate(id, resolve(t.kind, id).expect("catalog id"))).collect())
}

/// Solves both fundamental sets and evaluates the whole catalog.
pub fn solve_and_check(
    t: &GammaTuple,
    tol: &Tolerances,
) -> Result<(FundamentalSet, FundamentalSet, Vec<IdentityReport>)> {
    let fs = solve_fundamental(t, tol)?;
    let fs_star = solve_fundamental(&t.adjoint(), tol)?;
    let reports = check_catalog(t, &fs, &fs_star, tol)?;
    Ok((fs, fs_star, reports))
}

/// Commutativity conditions on a family Y that make the pencils
/// Y_j* + Y_{p(j)} z commute: [Y_i, Y_j] = 0 and [Y_i*, Y_{p(j)}] = [Y_j*, Y_{p(i)}].
pub fn check_pencil_commutativity(kind: Kind, fs_star: &FundamentalSet, tol: &Tolerances) -> Vec<IdentityReport> {
    let y = &fs_star.ops_on_defect;
    let scale = 1.0 + y.iter().map(spectral_norm).fold(0.0, f64::max);
    let bound = tol.tol_exact * scale * scale * fs_star.defect_dim().max(1) as f64;
    let prefix = if kind == Kind::G312 { "T3.8" } else { "T3.3" };
    let m = y.len();
    let mut commute: f64 = 0.0;
    let mut cross: f64 = 0.0;
    let mut worst = (0, 0);
    for i in 0..m {
        for j in 0..m {
            commute = commute.max(spectral_norm(&commutator(&y[i], &y[j])));
            let pi = kind.partner_slot(i);
            let pj = kind.partner_slot(j);
            let c = spectral_norm(&(commutator(&y[i].adjoint(), &y[pj]) - commutator(&y[j].adjoint(), &y[pi])));
            if c > cross {
                cross = c;
                worst = (i, j);
            }
        }
    }
    let names = kind.op_names();
    let idx = kind.op_indices();
    vec![
        IdentityReport::new(&format!("{prefix}-1"), commute, bound, true, "max ||[Y_i, Y_j]||".into()),
        IdentityReport::new(
            &format!("{prefix}-2"),
            cross,
            bound,
            true,
            format!(
                "max ||[Y_i*, Y_p(j)] - [Y_j*, Y_p(i)]||, worst at ({}, {})",
                names[idx[worst.0]], names[idx[worst.1]]
            ),
        ),
    ]
}

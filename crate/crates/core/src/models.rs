//! Truncated Hardy and L² spaces and the functional models.
//!
//! Vectors of H²⊗E are stored mode-major: coordinate `n * dim E + j` is
//! z^n ⊗ e_j. Identities that involve the backward shift lose the top
//! modes, so they are compared on the leading `modes - BUFFER` modes only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::charfun::theta_coeffs;
use crate::contraction::{asymptotic, ContractionData, DEFAULT_MAX_ITER, SINGULAR_Q_WARN};
use crate::error::{GmlError, Result};
use crate::fundamental::{catalog, check_identity, check_pencil_commutativity, FundamentalSet, IdentityReport};
use crate::matrixcore::{eye, isometry_defect, kron, matrix_power, spectral_norm, CMatrix, Subspace, Tolerances};
use crate::tuples::{truncated_shift, GammaTuple};

pub const BUFFER: usize = 2;

#[derive(Clone, Debug)]
pub struct TruncatedHardy {
    pub modes: usize,
    pub fiber: Subspace,
    /// M_z on modes 0..modes, the top mode is sent to 0.
    pub shift: CMatrix,
}

impl TruncatedHardy {
    pub fn new(modes: usize, fiber: Subspace) -> Self {
        let shift = kron(&truncated_shift(modes), &eye(fiber.dim()));
        TruncatedHardy { modes, fiber, shift }
    }

    pub fn dim(&self) -> usize {
        self.modes * self.fiber.dim()
    }

    /// Number of leading coordinates outside the edge buffer.
    pub fn interior(&self) -> usize {
        self.modes.saturating_sub(BUFFER) * self.fiber.dim()
    }

    /// I ⊗ a + M_z ⊗ b.
    pub fn pencil(&self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        kron(&eye(self.modes), a) + kron(&truncated_shift(self.modes), b)
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedL2 {
    /// Modes run over -modes..=modes.
    pub modes: usize,
    pub fiber: Subspace,
    /// M_{e^{it}}; the top mode is sent to 0.
    pub shift: CMatrix,
}

impl TruncatedL2 {
    pub fn new(modes: usize, fiber: Subspace) -> Self {
        let shift = kron(&truncated_shift(2 * modes + 1), &eye(fiber.dim()));
        TruncatedL2 { modes, fiber, shift }
    }

    pub fn dim(&self) -> usize {
        (2 * self.modes + 1) * self.fiber.dim()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ModelReport {
    pub residuals: BTreeMap<String, f64>,
    pub truncation_bound: f64,
    pub pass: bool,
    pub notes: Vec<String>,
    /// Side conditions reported separately from `pass`.
    pub conditions: Vec<IdentityReport>,
}

impl ModelReport {
    fn settle(&mut self, tol: &Tolerances) {
        let bound = tol.tol_trunc_factor * self.truncation_bound + tol.tol_exact;
        self.pass = self.residuals.values().all(|&r| r <= bound);
    }
}

fn top_rows(m: &CMatrix, rows: usize) -> CMatrix {
    m.rows(0, rows.min(m.nrows())).into_owned()
}

/// W h = Σ z^n ⊗ D_{T*} T*^n h on N modes, fiber 𝒟_{T*}.
pub fn embed_w(cd: &ContractionData, modes: usize) -> Result<CMatrix> {
    if !cd.is_pure {
        return Err(GmlError::NotPure);
    }
    if modes < 2 {
        return Err(GmlError::InvalidInput(format!("need at least 2 modes, got {modes}")));
    }
    Ok(orbit_embedding(&cd.defect_space_star.basis, &cd.d_tstar, &cd.t.adjoint(), modes))
}

/// Blocks Bᴴ D Xⁿ for n < modes.
fn orbit_embedding(basis: &CMatrix, d: &CMatrix, x: &CMatrix, modes: usize) -> CMatrix {
    let f = basis.ncols();
    let n = x.nrows();
    let mut w = CMatrix::zeros(modes * f, n);
    let mut block = basis.adjoint() * d;
    for k in 0..modes {
        w.view_mut((k * f, 0), (f, n)).copy_from(&block);
        block = &block * x;
    }
    w
}

/// Block lower-triangular Toeplitz matrix of M_Θ on N modes.
pub fn multiplication_operator(cd: &ContractionData, modes: usize) -> CMatrix {
    let coeffs = theta_coeffs(cd, modes.saturating_sub(1)).coeffs;
    let (r, c) = (cd.defect_space_star.dim(), cd.defect_space.dim());
    let mut m = CMatrix::zeros(modes * r, modes * c);
    for i in 0..modes {
        for j in 0..=i {
            m.view_mut((i * r, j * c), (r, c)).copy_from(&coeffs[i - j]);
        }
    }
    m
}

/// WW* + M_Θ M_Θ* = I on the interior modes, and the isometry defect of W.
pub fn check_lemma_3_1(cd: &ContractionData, modes: usize, tol: &Tolerances) -> Result<ModelReport> {
    let w = embed_w(cd, modes)?;
    let m = multiplication_operator(cd, modes);
    let h = TruncatedHardy::new(modes, cd.defect_space_star.clone());
    let k = h.interior();
    let full = &w * w.adjoint() + &m * m.adjoint() - eye(h.dim());
    let mut rep = ModelReport { truncation_bound: spectral_norm(&matrix_power(&cd.t, modes)), ..Default::default() };
    rep.residuals.insert("projection".into(), spectral_norm(&full.view((0, 0), (k, k)).into_owned()));
    rep.residuals.insert("isometry".into(), isometry_defect(&w));
    rep.notes.push(format!("{modes} modes, interior {} modes", modes.saturating_sub(BUFFER)));
    rep.settle(tol);
    Ok(rep)
}

fn check_family(t: &GammaTuple, fs: &FundamentalSet, basis: &Subspace, what: &str) -> Result<()> {
    if fs.kind != t.kind || fs.ops_on_defect.len() != t.kind.num_fundamental() {
        return Err(GmlError::DimensionMismatch(format!("{what} does not match the tuple kind")));
    }
    if fs.defect_dim() != basis.dim() || fs.ops_on_defect.iter().any(|x| x.nrows() != basis.dim()) {
        return Err(GmlError::DimensionMismatch(format!(
            "{what} has dimension {}, defect space has {}",
            fs.defect_dim(),
            basis.dim()
        )));
    }
    Ok(())
}

/// Model for a tuple whose distinguished entry is pure.
///
/// The model operators are I⊗Y_k* + M_z⊗Y_p(k) and M_z⊗I on H²⊗𝒟_{P*},
/// Y the adjoint fundamental family. Unitary equivalence with the tuple is
/// checked through W* M_k = T_k W*, i.e. W T_k* = M_k* W, on interior rows.
pub fn build_pure_model(
    t: &GammaTuple,
    fs_star: &FundamentalSet,
    modes: usize,
    tol: &Tolerances,
) -> Result<ModelReport> {
    let cd = t.contraction()?;
    check_family(t, fs_star, &cd.defect_space_star, "adjoint fundamental family")?;
    let w = embed_w(cd, modes)?;
    let h = TruncatedHardy::new(modes, cd.defect_space_star.clone());
    let k = h.interior();
    let kind = t.kind;
    let y = &fs_star.ops_on_defect;
    let mut rep = ModelReport { truncation_bound: spectral_norm(&matrix_power(&cd.t, modes)), ..Default::default() };
    for (slot, &i) in kind.op_indices().iter().enumerate() {
        let model = h.pencil(&y[slot].adjoint(), &y[kind.partner_slot(slot)]);
        let r = top_rows(&(&w * t.ops[i].adjoint() - model.adjoint() * &w), k);
        rep.residuals.insert(kind.op_names()[i].to_string(), spectral_norm(&r));
    }
    let d = kind.distinguished();
    let r = top_rows(&(&w * t.ops[d].adjoint() - h.shift.adjoint() * &w), k);
    rep.residuals.insert(kind.op_names()[d].to_string(), spectral_norm(&r));
    rep.residuals.insert("isometry".into(), isometry_defect(&w).max(0.0));
    rep.conditions = check_pencil_commutativity(kind, fs_star, tol);
    rep.notes.push(format!("{modes} modes, fiber dim {}", h.fiber.dim()));
    rep.settle(tol);
    Ok(rep)
}

/// max_k ‖T_k* P - P T_k*‖ over the non-distinguished entries.
pub fn adjoint_commutation_defect(t: &GammaTuple) -> f64 {
    let p = t.distinguished();
    t.kind
        .op_indices()
        .iter()
        .map(|&i| spectral_norm(&(t.ops[i].adjoint() * p - p * t.ops[i].adjoint())))
        .fold(0.0, f64::max)
}

/// Model for a tuple whose distinguished entry is c.n.u. and commutes with
/// the adjoints of the other entries.
///
/// W = (W1, W2) with W1 h = Σ z^n ⊗ D_P Pⁿ h into H²⊗𝒟_P and W2 into
/// L²⊗𝒟_{P*} built from ran A. The model operators on the Hardy part are
/// I⊗F_k + M_z*⊗F_p(k)* and M_z*. In finite dimension a c.n.u. contraction
/// has spectral radius < 1, so A = 0 and W2 vanishes; the L² part is kept
/// at its declared size so the report shape does not depend on that.
pub fn build_cnu_model(
    t: &GammaTuple,
    fs: &FundamentalSet,
    fs_star: &FundamentalSet,
    modes: usize,
    tol: &Tolerances,
) -> Result<ModelReport> {
    let cd = t.contraction()?;
    let defect = adjoint_commutation_defect(t);
    let scale = 1.0 + t.norm();
    if defect > tol.tol_exact * scale * scale {
        return Err(GmlError::HypothesisViolated { defect });
    }
    if !cd.is_cnu {
        return Err(GmlError::NotCnu);
    }
    if modes < 2 {
        return Err(GmlError::InvalidInput(format!("need at least 2 modes, got {modes}")));
    }
    check_family(t, fs, &cd.defect_space, "fundamental family")?;
    check_family(t, fs_star, &cd.defect_space_star, "adjoint fundamental family")?;
    let asy = asymptotic(&cd.t, tol, DEFAULT_MAX_ITER)?;
    if let Some(smin) = asy.q_min_singular() {
        if smin < SINGULAR_Q_WARN {
            return Err(GmlError::SingularQ { min_singular: smin });
        }
    }
    let hardy = TruncatedHardy::new(modes, cd.defect_space.clone());
    let l2 = TruncatedL2::new(modes, cd.defect_space_star.clone());
    let w1 = orbit_embedding(&cd.defect_space.basis, &cd.d_t, &cd.t, modes);
    let n = t.dim();
    let hd = hardy.dim();
    let mut w = CMatrix::zeros(hd + l2.dim(), n);
    w.view_mut((0, 0), (hd, n)).copy_from(&w1);
    if asy.ran_a.dim() > 0 {
        // unreachable for c.n.u. matrices; reported rather than modelled
        return Err(GmlError::NotCnu);
    }
    let k = hardy.interior();
    let kind = t.kind;
    let x = &fs.ops_on_defect;
    let mut rep = ModelReport { truncation_bound: spectral_norm(&matrix_power(&cd.t, modes)), ..Default::default() };
    for (slot, &i) in kind.op_indices().iter().enumerate() {
        let kp = kind.partner_slot(slot);
        let model = kron(&eye(modes), &x[slot]) + kron(&truncated_shift(modes).adjoint(), &x[kp].adjoint());
        let r = top_rows(&(&w1 * &t.ops[i] - model * &w1), k);
        rep.residuals.insert(kind.op_names()[i].to_string(), spectral_norm(&r));
    }
    let d = kind.distinguished();
    let r = top_rows(&(&w1 * &t.ops[d] - hardy.shift.adjoint() * &w1), k);
    rep.residuals.insert(kind.op_names()[d].to_string(), spectral_norm(&r));
    // W*W = I - P*^N P^N, so the defect is ‖P^N‖²
    rep.residuals.insert("isometry".into(), isometry_defect(&w));
    for id in catalog(kind).into_iter().filter(|id| id.starts_with("P5.")) {
        rep.conditions.push(check_identity(id, t, fs, fs_star, tol)?);
    }
    rep.notes.push("H0 = H".into());
    rep.notes.push(format!("adjoint commutation defect {defect:.3e}"));
    rep.notes.push(format!("dim ran A = {}, L2 part vanishes", asy.ran_a.dim()));
    rep.settle(tol);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contraction::analyze_contraction;
    use crate::fundamental::solve_fundamental;
    use crate::kind::{Kind, ALL_KINDS};
    use crate::matrixcore::{cr, diag, diag_real};
    use crate::tuples::{make_pure_isometry_tuple, make_scalar_tuple, random_normal_family};

    fn jordan(n: usize) -> CMatrix {
        truncated_shift(n)
    }

    #[test]
    fn w_is_isometric() {
        let tol = Tolerances::default();
        let zero = analyze_contraction(&CMatrix::zeros(2, 2), &tol).unwrap();
        assert_eq!(isometry_defect(&embed_w(&zero, 3).unwrap()), 0.0);
        let j = analyze_contraction(&jordan(3), &tol).unwrap();
        assert!(isometry_defect(&embed_w(&j, 5).unwrap()) < 1e-14);
        let s = analyze_contraction(&diag_real(&[0.5]), &tol).unwrap();
        assert!(isometry_defect(&embed_w(&s, 40).unwrap()) < 0.5f64.powi(80) + 1e-15);
        let u = analyze_contraction(&eye(2), &tol).unwrap();
        assert!(matches!(embed_w(&u, 4), Err(GmlError::NotPure)));
        assert!(matches!(check_lemma_3_1(&u, 4, &tol), Err(GmlError::NotPure)));
    }

    #[test]
    fn projection_identity_on_zero_and_scalar() {
        let tol = Tolerances::default();
        let zero = analyze_contraction(&CMatrix::zeros(2, 2), &tol).unwrap();
        let m = multiplication_operator(&zero, 4);
        assert!(spectral_norm(&(m - kron(&truncated_shift(4), &eye(2)))) == 0.0);
        let r = check_lemma_3_1(&zero, 6, &tol).unwrap();
        assert!(r.pass, "{r:?}");
        let s = analyze_contraction(&diag_real(&[0.6]), &tol).unwrap();
        assert!(check_lemma_3_1(&s, 30, &tol).unwrap().pass);
    }

    #[test]
    fn pure_model_cases() {
        let tol = Tolerances::default();
        let zero = GammaTuple::new(Kind::G333, vec![CMatrix::zeros(2, 2); 7], &tol).unwrap();
        let fz = solve_fundamental(&zero.adjoint(), &tol).unwrap();
        let r = build_pure_model(&zero, &fz, 8, &tol).unwrap();
        assert!(r.residuals.values().all(|&v| v == 0.0) && r.pass);

        let t = make_scalar_tuple(Kind::G333, &diag_real(&[0.3, 0.4, 0.5]), 1, &tol).unwrap();
        let fs = solve_fundamental(&t.adjoint(), &tol).unwrap();
        let r = build_pure_model(&t, &fs, 50, &tol).unwrap();
        assert!(r.pass, "{r:?}");

        for kind in ALL_KINDS {
            let fam = random_normal_family(kind, 2, 3);
            let t = make_pure_isometry_tuple(kind, &fam, 2, 10, &tol).unwrap();
            let fs = solve_fundamental(&t.adjoint(), &tol).unwrap();
            let r = build_pure_model(&t, &fs, 24, &tol).unwrap();
            assert!(r.residuals.values().all(|&v| v < 1e-8), "{kind}: {r:?}");
            assert!(r.conditions.iter().all(|c| c.pass));
        }
    }

    #[test]
    fn cnu_model_cases() {
        let tol = Tolerances::default();
        let t = make_scalar_tuple(Kind::G333, &diag(&[cr(0.2), cr(-0.3), cr(0.5)]), 2, &tol).unwrap();
        let fs = solve_fundamental(&t, &tol).unwrap();
        let fss = solve_fundamental(&t.adjoint(), &tol).unwrap();
        let r = build_cnu_model(&t, &fs, &fss, 40, &tol).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.conditions.iter().all(|c| c.pass), "{:?}", r.conditions);

        let u =
            GammaTuple::new(Kind::Tetrablock, vec![CMatrix::zeros(2, 2), CMatrix::zeros(2, 2), eye(2)], &tol).unwrap();
        let fu = solve_fundamental(&u, &tol).unwrap();
        assert!(matches!(build_cnu_model(&u, &fu, &fu, 8, &tol), Err(GmlError::NotCnu)));
    }
}

//! Structured singular value for block-diagonal scalar scalings and the
//! forward coordinate maps of the three domains.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GmlError, Result};
use crate::kind::Kind;
use crate::matrixcore::{c, spectral_radius, CMatrix, C64};

pub const DEFAULT_PRECISION: f64 = 1e-4;
const GRID: usize = 64;
const LEVELS: usize = 3;
const ZOOM_HALF: usize = 4;
const CANDIDATES: usize = 4;

/// E(n; s; r1, .., rs): matrices diag(z1 I_r1, .., zs I_rs).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalingSubspace {
    pub n: usize,
    pub s: usize,
    pub r: Vec<usize>,
}

impl ScalingSubspace {
    pub fn new(n: usize, s: usize, r: Vec<usize>) -> Result<Self> {
        if s == 0 || r.len() != s || r.contains(&0) || r.iter().sum::<usize>() != n {
            return Err(GmlError::InvalidInput(format!("invalid block structure n={n} s={s} r={r:?}")));
        }
        Ok(ScalingSubspace { n, s, r })
    }

    pub fn for_kind(kind: Kind) -> Self {
        let r = kind.block_sizes();
        ScalingSubspace { n: kind.matrix_size(), s: r.len(), r }
    }

    /// diag(z_1 I_{r_1}, ..) as a matrix.
    pub fn embed(&self, z: &[C64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        let mut k = 0;
        for (b, &rb) in self.r.iter().enumerate() {
            for _ in 0..rb {
                m[(k, k)] = z[b];
                k += 1;
            }
        }
        m
    }
}

impl fmt::Display for ScalingSubspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r: Vec<String> = self.r.iter().map(|x| x.to_string()).collect();
        write!(f, "{}:{}:{}", self.n, self.s, r.join(","))
    }
}

impl FromStr for ScalingSubspace {
    type Err = GmlError;

    /// Parses `n:s:r1,r2,..`.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || GmlError::InvalidInput(format!("structure `{text}` is not of the form n:s:r1,r2,.."));
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = parts[0].trim().parse().map_err(|_| bad())?;
        let s = parts[1].trim().parse().map_err(|_| bad())?;
        let r = parts[2]
            .split(',')
            .map(|x| x.trim().parse())
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| bad())?;
        ScalingSubspace::new(n, s, r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainPoint {
    pub kind: Kind,
    pub coords: Vec<C64>,
}

fn rho_at(a: &CMatrix, e: &ScalingSubspace, phases: &[f64]) -> f64 {
    let mut z = Vec::with_capacity(e.s);
    z.push(c(1.0, 0.0));
    z.extend(phases.iter().map(|&t| C64::from_polar(1.0, t)));
    // right-multiplying by a diagonal scales columns
    let mut aq = a.clone();
    let mut k = 0;
    for (b, &rb) in e.r.iter().enumerate() {
        for _ in 0..rb {
            let zb = z[b];
            aq.column_mut(k).iter_mut().for_each(|x| *x *= zb);
            k += 1;
        }
    }
    spectral_radius(&aq)
}

fn grid_point(index: usize, dims: usize) -> Vec<f64> {
    let step = std::f64::consts::TAU / GRID as f64;
    let mut rem = index;
    (0..dims)
        .map(|_| {
            let i = rem % GRID;
            rem /= GRID;
            i as f64 * step
        })
        .collect()
}

/// Keeps the `CANDIDATES` best (value, point) pairs; earlier entries win ties.
fn push_candidate(best: &mut Vec<(f64, Vec<f64>)>, value: f64, point: Vec<f64>) {
    let pos = best.iter().position(|(v, _)| value > *v).unwrap_or(best.len());
    if pos < CANDIDATES {
        best.insert(pos, (value, point));
        best.truncate(CANDIDATES);
    }
}

fn coarse_search(a: &CMatrix, e: &ScalingSubspace, dims: usize) -> Vec<(f64, Vec<f64>)> {
    let mut best = Vec::new();
    if dims <= 2 {
        for idx in 0..GRID.pow(dims as u32) {
            let p = grid_point(idx, dims);
            push_candidate(&mut best, rho_at(a, e, &p), p);
        }
    } else {
        // coordinate sweeps from a few deterministic starts
        for start in 0..CANDIDATES {
            let mut p: Vec<f64> = (0..dims).map(|d| (start * (d + 1)) as f64 * 0.7).collect();
            let mut val = rho_at(a, e, &p);
            for _ in 0..4 {
                for d in 0..dims {
                    for g in 0..GRID {
                        let mut q = p.clone();
                        q[d] = g as f64 * std::f64::consts::TAU / GRID as f64;
                        let v = rho_at(a, e, &q);
                        if v > val {
                            val = v;
                            p = q;
                        }
                    }
                }
            }
            push_candidate(&mut best, val, p);
        }
    }
    best
}

fn zoom(a: &CMatrix, e: &ScalingSubspace, mut center: Vec<f64>, mut val: f64) -> (f64, Vec<f64>) {
    let dims = center.len();
    let mut half = std::f64::consts::TAU / GRID as f64;
    let side = 2 * ZOOM_HALF + 1;
    for _ in 0..LEVELS {
        let spacing = half / ZOOM_HALF as f64;
        let (mut bv, mut bp) = (val, center.clone());
        for idx in 0..side.pow(dims as u32) {
            let mut rem = idx;
            let p: Vec<f64> = center
                .iter()
                .map(|&c0| {
                    let i = rem % side;
                    rem /= side;
                    c0 + (i as f64 - ZOOM_HALF as f64) * spacing
                })
                .collect();
            let v = rho_at(a, e, &p);
            if v > bv {
                bv = v;
                bp = p;
            }
        }
        val = bv;
        center = bp;
        half = spacing;
    }
    (val, center)
}

fn compass(a: &CMatrix, e: &ScalingSubspace, mut p: Vec<f64>, mut val: f64, precision: f64) -> f64 {
    let mut h = std::f64::consts::TAU / (GRID as f64 * (ZOOM_HALF as f64).powi(LEVELS as i32));
    let floor = (precision * 1e-3).max(1e-12);
    while h > floor {
        let mut improved = false;
        for d in 0..p.len() {
            for sign in [1.0, -1.0] {
                let mut q = p.clone();
                q[d] += sign * h;
                let v = rho_at(a, e, &q);
                if v > val {
                    val = v;
                    p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    val
}

/// μ_E(A) = max over unitary Q in E of ρ(AQ).
///
/// The phase of the first block is fixed (ρ is invariant under a common
/// phase). Phases are searched on a 64-point grid, zoomed three levels around
/// the best candidates and finished with a compass search.
pub fn mu(a: &CMatrix, e: &ScalingSubspace, precision: f64) -> Result<f64> {
    if a.nrows() != e.n || a.ncols() != e.n {
        return Err(GmlError::DimensionMismatch(format!(
            "matrix is {}x{}, structure expects {}x{}",
            a.nrows(),
            a.ncols(),
            e.n,
            e.n
        )));
    }
    let dims = e.s - 1;
    if dims == 0 {
        return Ok(spectral_radius(a));
    }
    let mut best = 0.0_f64;
    for (v, p) in coarse_search(a, e, dims) {
        let (zv, zp) = zoom(a, e, p, v);
        best = best.max(compass(a, e, zp, zv, precision));
    }
    Ok(best)
}

pub fn mu_for_kind(a: &CMatrix, kind: Kind) -> Result<f64> {
    mu(a, &ScalingSubspace::for_kind(kind), DEFAULT_PRECISION)
}

/// Leibniz expansion; exact on sparse inputs, unlike an LU determinant.
fn det3(a: &CMatrix) -> C64 {
    a[(0, 0)] * a[(1, 1)] * a[(2, 2)] + a[(0, 1)] * a[(1, 2)] * a[(2, 0)] + a[(0, 2)] * a[(1, 0)] * a[(2, 1)]
        - a[(0, 2)] * a[(1, 1)] * a[(2, 0)]
        - a[(0, 0)] * a[(1, 2)] * a[(2, 1)]
        - a[(0, 1)] * a[(1, 0)] * a[(2, 2)]
}

fn minor2(a: &CMatrix, i: usize, j: usize) -> C64 {
    a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(j, i)]
}

pub fn coord_map(a: &CMatrix, kind: Kind) -> Result<DomainPoint> {
    let n = kind.matrix_size();
    if a.shape() != (n, n) {
        return Err(GmlError::DimensionMismatch(format!("{kind} needs a {n}x{n} matrix, got {:?}", a.shape())));
    }
    let coords = match kind {
        Kind::Tetrablock => vec![a[(0, 0)], a[(1, 1)], minor2(a, 0, 1)],
        Kind::G333 => vec![a[(0, 0)], a[(1, 1)], minor2(a, 0, 1), a[(2, 2)], minor2(a, 0, 2), minor2(a, 1, 2), det3(a)],
        Kind::G312 => {
            vec![a[(0, 0)], minor2(a, 0, 1) + minor2(a, 0, 2), det3(a), a[(1, 1)] + a[(2, 2)], minor2(a, 1, 2)]
        }
    };
    Ok(DomainPoint { kind, coords })
}

/// Forward samples of the domain: random matrices rescaled to μ ≤ radius_cap.
pub fn sample_domain(kind: Kind, count: usize, radius_cap: f64, seed: u64) -> Result<Vec<DomainPoint>> {
    if count == 0 {
        return Err(GmlError::InvalidInput("count must be at least 1".into()));
    }
    if !(radius_cap > 0.0 && radius_cap <= 1.0) {
        return Err(GmlError::InvalidInput(format!("radius_cap must lie in (0, 1], got {radius_cap}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = kind.matrix_size();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut a = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let target = radius_cap * rng.random::<f64>();
        let m = mu_for_kind(&a, kind)?;
        if m > 0.0 {
            a *= C64::from(target / m);
        }
        out.push(coord_map(&a, kind)?);
    }
    Ok(out)
}

//! Middle convolution: from a rank-(n−1) Fuchsian Pfaffian system with
//! rank-one residues back to a rank-n Okubo system, and the truncation that
//! produces such a system from an Okubo snapshot.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::flatcore::{track_path, CompiledSaito, PathPoint};
use crate::isomono::{residue_family, residues_at, IsoError, OkuboNumeric, RANK_TOL};
use crate::linalg::{self, cr, CMat};
use crate::p6::stencil;
use crate::ring::Ring;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MidconvError {
    #[error("need at least two singular points (n >= 2), got {0}")]
    TooSmall(usize),
    #[error("condition {condition} violated: {detail}")]
    ConditionDViolation {
        condition: &'static str,
        detail: String,
    },
    #[error("lambda = {0} is resonant (0 or an eigenvalue of Gamma_inf)")]
    ResonantLambda(Complex64),
    #[error("no column j with all a_ij bounded away from zero")]
    PivotColumnNotFound,
    #[error("completed P and P^-1 disagree ({0:.3e})")]
    InverseMismatch(f64),
    #[error(transparent)]
    Iso(#[from] IsoError),
}

const D_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-8;

/// `Γ^(z) = Σ_j Γ_j / (z − z_j)` with `Γ_j = −b_j a_j Γ_∞`, matrices of size
/// `n−1`. Derivatives in the deformation variables are optional; they are
/// only needed by [`invariant_subspace_check`].
#[derive(Clone, Debug)]
pub struct RankOneSystem {
    pub n: usize,
    pub residues: Vec<CMat>,
    /// `(n−1) × n`, column `j` is `b_j`.
    pub b: CMat,
    /// `n × (n−1)`, row `j` is `a_j`.
    pub a: CMat,
    pub lambda: Vec<Complex64>,
    pub z: Vec<Complex64>,
    /// `dz[k][j] = ∂z_j/∂x_k`.
    pub dz: Vec<Vec<Complex64>>,
    /// `dresidues[k][j] = ∂Γ_j/∂x_k`.
    pub dresidues: Vec<Vec<CMat>>,
}

impl RankOneSystem {
    pub fn gamma_inf(&self) -> CMat {
        linalg::diag(&self.lambda)
    }

    pub fn traces(&self) -> Vec<Complex64> {
        self.residues.iter().map(|g| g.trace()).collect()
    }

    pub fn connection_at(&self, x: Complex64) -> CMat {
        let m = self.n - 1;
        self.residues
            .iter()
            .zip(&self.z)
            .fold(CMat::zeros(m, m), |acc, (g, zj)| acc + g / (x - zj))
    }

    /// `|Σ Γ_j + Γ_∞|`.
    pub fn sum_defect(&self) -> f64 {
        let s = self
            .residues
            .iter()
            .fold(self.gamma_inf(), |acc, g| acc + g);
        linalg::max_abs(&s)
    }

    fn validate(&self) -> Result<(), MidconvError> {
        let viol = |condition, detail: String| {
            Err(MidconvError::ConditionDViolation { condition, detail })
        };
        if let Some(i) = self.lambda.iter().position(|l| l.norm() < D_TOL) {
            return viol("D4", format!("lambda_{} = 0", i + 1));
        }
        let sd = self.sum_defect();
        if sd > D_TOL * (1.0 + self.lambda.iter().map(|l| l.norm()).fold(0.0, f64::max)) {
            return viol("D4", format!("|sum Gamma_j + Gamma_inf| = {sd:.3e}"));
        }
        if linalg::min_separation(&self.z) < 1e-9 {
            return viol("D1", "singular points collide".into());
        }
        for (j, g) in self.residues.iter().enumerate() {
            let s = linalg::singular_values(g);
            if s[0] < D_TOL || s.get(1).is_some_and(|&s1| s1 > RANK_TOL * s[0]) {
                return viol("D3", format!("rank Gamma_{} != 1", j + 1));
            }
            let tr = g.trace();
            if (tr - 1.0).norm() < 1e-6 || (tr + 1.0).norm() < 1e-6 {
                return viol("D3", format!("tr Gamma_{} = ±1", j + 1));
            }
        }
        Ok(())
    }
}

/// `M = b a` for a rank-one `M`, scaled so that `a` has a unit entry.
fn rank_one_factor(m: &CMat) -> (Vec<Complex64>, Vec<Complex64>) {
    let (rows, cols) = m.shape();
    let k = (0..cols)
        .max_by(|&p, &q| m.column(p).norm().total_cmp(&m.column(q).norm()))
        .unwrap_or(0);
    let r = (0..rows)
        .max_by(|&p, &q| m[(p, k)].norm().total_cmp(&m[(q, k)].norm()))
        .unwrap_or(0);
    let b: Vec<Complex64> = m.column(k).iter().copied().collect();
    let a: Vec<Complex64> = m.row(r).iter().map(|x| x / m[(r, k)]).collect();
    (b, a)
}

fn from_residues(
    residues: Vec<CMat>,
    lambda: Vec<Complex64>,
    z: Vec<Complex64>,
) -> Result<RankOneSystem, MidconvError> {
    let n = residues.len();
    if n < 2 {
        return Err(MidconvError::TooSmall(n));
    }
    let m = n - 1;
    if let Some(i) = lambda.iter().position(|l| l.norm() < D_TOL) {
        return Err(MidconvError::ConditionDViolation {
            condition: "D4",
            detail: format!("lambda_{} = 0", i + 1),
        });
    }
    let ginv = linalg::diag(&lambda.iter().map(|l| l.inv()).collect::<Vec<_>>());
    let mut b = CMat::zeros(m, n);
    let mut a = CMat::zeros(n, m);
    for (j, g) in residues.iter().enumerate() {
        let (bj, aj) = rank_one_factor(&(-(g * &ginv)));
        for r in 0..m {
            b[(r, j)] = bj[r];
            a[(j, r)] = aj[r];
        }
    }
    let sys = RankOneSystem {
        n,
        residues,
        b,
        a,
        lambda,
        z,
        dz: Vec::new(),
        dresidues: Vec::new(),
    };
    sys.validate()?;
    Ok(sys)
}

/// Leading `(n−1)`-blocks of an Okubo snapshot whose last `B_∞` entry is 0.
pub fn truncate_okubo(ok: &OkuboNumeric) -> Result<RankOneSystem, MidconvError> {
    let n = ok.n;
    if n < 2 {
        return Err(MidconvError::TooSmall(n));
    }
    let lam_n = ok.binf[(n - 1, n - 1)];
    if lam_n.norm() > D_TOL {
        return Err(MidconvError::ConditionDViolation {
            condition: "D4",
            detail: format!("lambda_n = {lam_n} must be shifted to 0"),
        });
    }
    let m = n - 1;
    let residues: Vec<CMat> = ok
        .residues
        .iter()
        .map(|r| r.view((0, 0), (m, m)).into_owned())
        .collect();
    let lambda: Vec<Complex64> = (0..m).map(|i| ok.binf[(i, i)]).collect();
    from_residues(residues, lambda, ok.z.clone())
}

/// Truncation with derivatives in the deformation variables, by a
/// five-point stencil of width `h`. `snapshot(x, order)` must return the
/// shifted Okubo data at `x` with poles matched to `order`.
pub fn truncate_with_derivatives(
    snapshot: impl Fn(&[Complex64], Option<&[Complex64]>) -> Result<OkuboNumeric, IsoError>,
    x: &[Complex64],
    h: f64,
) -> Result<RankOneSystem, MidconvError> {
    let center = snapshot(x, None)?;
    let mut sys = truncate_okubo(&center)?;
    for k in 0..x.len() {
        let mut zs = Vec::with_capacity(4);
        let mut gs = Vec::with_capacity(4);
        for off in [-2.0, -1.0, 1.0, 2.0] {
            let mut xp = x.to_vec();
            xp[k] += cr(off * h);
            let ok = snapshot(&xp, Some(&center.z))?;
            let m = sys.n - 1;
            zs.push(ok.z.clone());
            gs.push(
                ok.residues
                    .iter()
                    .map(|r| r.view((0, 0), (m, m)).into_owned())
                    .collect::<Vec<_>>(),
            );
        }
        let d = |f: [Complex64; 4]| (f[0] - f[1] * 8.0 + f[2] * 8.0 - f[3]) / (12.0 * h);
        sys.dz.push(
            (0..sys.n)
                .map(|j| d([zs[0][j], zs[1][j], zs[2][j], zs[3][j]]))
                .collect(),
        );
        sys.dresidues.push(
            (0..sys.n)
                .map(|j| {
                    CMat::from_fn(sys.n - 1, sys.n - 1, |r, c| {
                        d([
                            gs[0][j][(r, c)],
                            gs[1][j][(r, c)],
                            gs[2][j][(r, c)],
                            gs[3][j][(r, c)],
                        ])
                    })
                })
                .collect(),
        );
    }
    Ok(sys)
}

#[derive(Clone, Debug)]
pub struct ConvolutionResult {
    pub lambda: Complex64,
    pub residues: Vec<CMat>,
    pub hat_inf: Vec<Complex64>,
    pub z: Vec<Complex64>,
    pub p: CMat,
    pub pinv: CMat,
    /// Column `j` with every `a_{i,j}` away from zero (0-based).
    pub pivot: usize,
    /// Component of the appended row `b_n` normalised to 1 (the ε gauge).
    pub gauge_index: usize,
}

impl ConvolutionResult {
    pub fn traces(&self) -> Vec<Complex64> {
        self.residues.iter().map(|g| g.trace()).collect()
    }

    pub fn sum_defect(&self) -> f64 {
        let s = self
            .residues
            .iter()
            .fold(linalg::diag(&self.hat_inf), |acc, g| acc + g);
        linalg::max_abs(&s)
    }

    pub fn max_rank_ratio(&self) -> f64 {
        self.residues
            .iter()
            .map(|g| {
                let s = linalg::singular_values(g);
                if s[0] == 0.0 {
                    f64::INFINITY
                } else {
                    s[1] / s[0]
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn connection_at(&self, x: Complex64) -> CMat {
        let n = self.z.len();
        self.residues
            .iter()
            .zip(&self.z)
            .fold(CMat::zeros(n, n), |acc, (g, zj)| acc + g / (x - zj))
    }
}

/// Closed-form middle convolution with parameter `lambda`.
pub fn middle_convolution(
    sys: &RankOneSystem,
    lambda: Complex64,
) -> Result<ConvolutionResult, MidconvError> {
    middle_convolution_gauged(sys, lambda, None)
}

/// As [`middle_convolution`], fixing the ε gauge by `b_{n,g} = 1` for the
/// given `g` (default: the largest component at this point).
pub fn middle_convolution_gauged(
    sys: &RankOneSystem,
    lambda: Complex64,
    gauge_index: Option<usize>,
) -> Result<ConvolutionResult, MidconvError> {
    let n = sys.n;
    let m = n - 1;
    let scale = 1.0 + sys.lambda.iter().map(|l| l.norm()).fold(0.0, f64::max);
    if lambda.norm() < 1e-12 * scale
        || sys
            .lambda
            .iter()
            .any(|l| (l - lambda).norm() < 1e-12 * scale)
    {
        return Err(MidconvError::ResonantLambda(lambda));
    }
    let pivot = (0..m)
        .find(|&j| (0..n).all(|i| sys.a[(i, j)].norm() > PIVOT_TOL))
        .ok_or(MidconvError::PivotColumnNotFound)?;

    // append b_n spanning the left kernel of a, then invert
    let kernel = linalg::null_space(&sys.a.transpose(), 1e-10);
    if kernel.ncols() != 1 {
        return Err(MidconvError::ConditionDViolation {
            condition: "D4",
            detail: format!(
                "rows a_j do not complete to an invertible matrix (kernel dim {})",
                kernel.ncols()
            ),
        });
    }
    let mut bn: Vec<Complex64> = kernel.column(0).iter().copied().collect();
    let g = gauge_index.unwrap_or_else(|| {
        (0..n)
            .max_by(|&p, &q| bn[p].norm().total_cmp(&bn[q].norm()))
            .unwrap()
    });
    if bn[g].norm() < PIVOT_TOL {
        return Err(MidconvError::ConditionDViolation {
            condition: "D4",
            detail: format!("gauge component {g} vanishes"),
        });
    }
    let s = bn[g];
    bn.iter_mut().for_each(|x| *x /= s);
    let p = CMat::from_fn(n, n, |r, c| if r < m { sys.b[(r, c)] } else { bn[c] });
    let pinv = linalg::inverse(&p).ok_or(MidconvError::InverseMismatch(f64::INFINITY))?;
    let mismatch = linalg::max_abs(&(pinv.columns(0, m) - &sys.a));
    if mismatch > 1e-8 * (1.0 + linalg::max_abs(&sys.a)) {
        return Err(MidconvError::InverseMismatch(mismatch));
    }

    let mut hat_inf: Vec<Complex64> = sys.lambda.iter().map(|l| l - lambda).collect();
    hat_inf.push(-lambda);
    let ginf = linalg::diag(&hat_inf);
    let residues = (0..n)
        .map(|j| -(p.column(j) * pinv.row(j)) * &ginf)
        .collect();
    Ok(ConvolutionResult {
        lambda,
        residues,
        hat_inf,
        z: sys.z.clone(),
        p,
        pinv,
        pivot,
        gauge_index: g,
    })
}

/// `G^(z)` at spectral point `x`, size `n(n−1)`.
pub fn g_z(sys: &RankOneSystem, lambda: Complex64, x: Complex64) -> CMat {
    let (n, m) = (sys.n, sys.n - 1);
    let id = CMat::identity(m, m);
    let mut g = CMat::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..n {
            let mut blk = sys.residues[j].clone();
            if i == j {
                blk += &id * lambda;
            }
            g.view_mut((i * m, j * m), (m, m))
                .copy_from(&(blk / (x - sys.z[i])));
        }
    }
    g
}

/// `G^(k)` at spectral point `x`.
pub fn g_k(sys: &RankOneSystem, lambda: Complex64, k: usize, x: Complex64) -> CMat {
    let (n, m) = (sys.n, sys.n - 1);
    let dz = &sys.dz[k];
    let z = &sys.z;
    let id = CMat::identity(m, m);
    let mut g = CMat::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..n {
            let gj = &sys.residues[j];
            let blk = if i != j {
                -(gj * (dz[i] / (x - z[i]))) - gj * ((dz[i] - dz[j]) / (z[i] - z[j]))
            } else {
                let mut b = -((gj + &id * lambda) * (dz[i] / (x - z[i])));
                for l in (0..n).filter(|&l| l != i) {
                    b += &sys.residues[l] * ((dz[i] - dz[l]) / (z[i] - z[l]));
                }
                b
            };
            g.view_mut((i * m, j * m), (m, m)).copy_from(&blk);
        }
    }
    g
}

/// Block matrix whose kernel is `L`.
fn l_matrix(residues: &[CMat], lambda: Complex64) -> CMat {
    let n = residues.len();
    let m = n - 1;
    let mut out = CMat::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..n {
            let mut blk = residues[j].clone();
            if i == j {
                blk += CMat::identity(m, m) * lambda;
            }
            out.view_mut((i * m, j * m), (m, m)).copy_from(&blk);
        }
    }
    out
}

fn k_basis(sys: &RankOneSystem) -> CMat {
    let (n, m) = (sys.n, sys.n - 1);
    let mut cols = Vec::new();
    for (i, g) in sys.residues.iter().enumerate() {
        let ker = linalg::null_space(g, 1e-9);
        for c in 0..ker.ncols() {
            let mut v = linalg::CVec::zeros(n * m);
            v.rows_mut(i * m, m).copy_from(&ker.column(c));
            cols.push(v);
        }
    }
    if cols.is_empty() {
        CMat::zeros(n * m, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceReport {
    pub dim_k: usize,
    pub dim_l: usize,
    pub expected_dim_k: usize,
    /// Max over `K`, `L`, the sample points and all directions of the
    /// component of `(∂ − G)v` leaving the subspace.
    pub max_defect: f64,
    pub derivatives_available: bool,
}

/// Checks that `K = ⊕ ker Γ_i` and `L` are invariant under `∂ − G`.
/// The `x`-directions need the derivative data of `sys`; the component
/// leaving the subspace is independent of how its basis moves, since
/// `Γ_i ∂v_i = −(∂Γ_i) v_i` for any smooth `v_i ∈ ker Γ_i`.
pub fn invariant_subspace_check(
    sys: &RankOneSystem,
    lambda: Complex64,
    samples: &[Complex64],
) -> SubspaceReport {
    let (n, m) = (sys.n, sys.n - 1);
    let kb = k_basis(sys);
    let lmat = l_matrix(&sys.residues, lambda);
    let lb = linalg::null_space(&lmat, 1e-9);
    let derivs = sys.dz.len() == sys.dresidues.len() && !sys.dz.is_empty();

    // projection onto the complement of K: block-diagonal Γ_i
    let mut kproj = CMat::zeros(n * m, n * m);
    for (i, g) in sys.residues.iter().enumerate() {
        kproj.view_mut((i * m, i * m), (m, m)).copy_from(g);
    }
    let scale = sys.residues.iter().map(linalg::max_abs).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for &x in samples {
        let gz = g_z(sys, lambda, x);
        for c in 0..kb.ncols() {
            worst = worst.max((&kproj * (&gz * kb.column(c))).camax() / scale);
        }
        for c in 0..lb.ncols() {
            worst = worst.max((&lmat * (&gz * lb.column(c))).camax() / scale);
        }
        if !derivs {
            continue;
        }
        for k in 0..sys.dz.len() {
            let gk = g_k(sys, lambda, k, x);
            let mut dkproj = CMat::zeros(n * m, n * m);
            for (i, dg) in sys.dresidues[k].iter().enumerate() {
                dkproj.view_mut((i * m, i * m), (m, m)).copy_from(dg);
            }
            for c in 0..kb.ncols() {
                let v = kb.column(c);
                let d = -(&dkproj * v) - &kproj * (&gk * v);
                worst = worst.max(d.camax() / scale);
            }
            let dl = l_matrix(&sys.dresidues[k], Complex64::default());
            for c in 0..lb.ncols() {
                let v = lb.column(c);
                let d = -(&dl * v) - &lmat * (&gk * v);
                worst = worst.max(d.camax() / scale);
            }
        }
    }
    SubspaceReport {
        dim_k: kb.ncols(),
        dim_l: lb.ncols(),
        expected_dim_k: n * (n - 2),
        max_defect: worst,
        derivatives_available: derivs,
    }
}

/// Schlesinger defect of a family of convolution outputs, allowing for the
/// ε-gauge term `c(s)[E_nn, Γ̂_j]` (one fitted scalar per sample).
pub fn gauged_schlesinger_defect(
    family: &[ConvolutionResult],
    ds: f64,
) -> Result<f64, MidconvError> {
    let len = family.len();
    if len < 5 {
        return Err(IsoError::InsufficientSnapshots(len).into());
    }
    let n = family[0].z.len();
    let series = |f: &dyn Fn(usize) -> Complex64| -> Vec<Complex64> { (0..len).map(f).collect() };
    let dz: Vec<Vec<Complex64>> = (0..n)
        .map(|i| stencil(&series(&|k| family[k].z[i]), ds).0)
        .collect();
    let mut db = vec![vec![CMat::zeros(n, n); n]; len];
    for i in 0..n {
        for r in 0..n {
            for c in 0..n {
                let d = stencil(&series(&|k| family[k].residues[i][(r, c)]), ds).0;
                for k in 0..len {
                    db[k][i][(r, c)] = d[k];
                }
            }
        }
    }
    let mut enn = CMat::zeros(n, n);
    enn[(n - 1, n - 1)] = cr(1.0);
    let mut worst: f64 = 0.0;
    for k in 2..len - 2 {
        let f = &family[k];
        let mut res = Vec::with_capacity(n);
        let mut gen = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = db[k][i].clone();
            for j in (0..n).filter(|&j| j != i) {
                let w = (dz[i][k] - dz[j][k]) / (f.z[i] - f.z[j]);
                r -= linalg::commutator(&f.residues[j], &f.residues[i]) * w;
            }
            res.push(r);
            gen.push(linalg::commutator(&enn, &f.residues[i]));
        }
        let num: Complex64 = res.iter().zip(&gen).map(|(r, g)| g.dotc(r)).sum();
        let den: f64 = gen.iter().map(|g| g.norm_squared()).sum();
        let c = if den > 0.0 {
            num / den
        } else {
            Complex64::default()
        };
        for (r, g) in res.iter().zip(&gen) {
            worst = worst.max(linalg::max_abs(&(r - g * c)));
        }
    }
    Ok(worst)
}

/// Middle-convolution round trip of an Okubo family: at each of the `picks`
/// the snapshot with `B_∞ − λ_n` is truncated and convolved with `−λ_n`.
#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub points: usize,
    /// Max gap between output and original residue traces.
    pub trace_error: f64,
    /// Max gap between `Γ̂_∞` and the original `B_∞`.
    pub inf_error: f64,
    pub rank_ratio: f64,
    pub sum_defect: f64,
    pub dim_k: usize,
    pub dim_l: usize,
    pub expected_dim_k: usize,
    pub subspace_defect: f64,
    /// Schlesinger defect of the output on a short segment, up to the
    /// ε-gauge term.
    pub output_schlesinger: f64,
}

impl RoundTripReport {
    pub fn failures(&self, identity: f64, trace: f64, subspace: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.trace_error >= trace {
            out.push(format!(
                "middle convolution residue traces differ by {:.3e}",
                self.trace_error
            ));
        }
        if self.inf_error >= trace {
            out.push(format!(
                "middle convolution Gamma_inf differs by {:.3e}",
                self.inf_error
            ));
        }
        if self.rank_ratio > RANK_TOL {
            out.push(format!(
                "middle convolution residue not rank one ({:.3e})",
                self.rank_ratio
            ));
        }
        if self.sum_defect >= identity {
            out.push(format!(
                "middle convolution residue sum defect {:.3e}",
                self.sum_defect
            ));
        }
        if self.dim_k != self.expected_dim_k || self.dim_l != 0 {
            out.push(format!("dim K = {}, dim L = {}", self.dim_k, self.dim_l));
        }
        if self.subspace_defect >= subspace {
            out.push(format!(
                "invariant subspace defect {:.3e}",
                self.subspace_defect
            ));
        }
        if self.output_schlesinger >= trace {
            out.push(format!(
                "middle convolution output not integrable ({:.3e})",
                self.output_schlesinger
            ));
        }
        out
    }
}

pub fn okubo_roundtrip(
    cs: &CompiledSaito,
    ring: &Ring,
    points: &[PathPoint],
    picks: &[usize],
    lambda: &[Complex64],
) -> Result<RoundTripReport, MidconvError> {
    let n = lambda.len();
    let last = lambda[n - 1];
    let lam_shift: Vec<Complex64> = lambda.iter().map(|l| l - last).collect();
    let undo = -last;
    let goto = |base: &PathPoint, x: &[Complex64]| -> Result<PathPoint, IsoError> {
        if x == base.t.as_slice() {
            return Ok(base.clone());
        }
        let tracked = track_path(ring, &[base.t.clone(), x.to_vec()], base.z)
            .map_err(|e| IsoError::Continuation(e.to_string()))?;
        Ok(tracked[1].clone())
    };
    let mut rep = RoundTripReport {
        points: picks.len(),
        trace_error: 0.0,
        inf_error: 0.0,
        rank_ratio: 0.0,
        sum_defect: 0.0,
        dim_k: 0,
        dim_l: 0,
        expected_dim_k: n * (n - 2),
        subspace_defect: 0.0,
        output_schlesinger: 0.0,
    };
    for &k in picks {
        let base = &points[k];
        let orig = residues_at(cs, base, lambda, None)?;
        let snapshot = |x: &[Complex64], order: Option<&[Complex64]>| {
            residues_at(cs, &goto(base, x)?, &lam_shift, order)
        };
        let sys = truncate_with_derivatives(snapshot, &base.t, 1e-3)?;
        let out = middle_convolution(&sys, undo)?;
        // both decompositions sort their poles the same way
        let perm = linalg::match_to(&orig.z, &out.z);
        for (i, &j) in perm.iter().enumerate() {
            rep.trace_error = rep
                .trace_error
                .max((out.traces()[j] - orig.traces[i]).norm());
        }
        for (a, b) in out.hat_inf.iter().zip(lambda) {
            rep.inf_error = rep.inf_error.max((a - b).norm());
        }
        rep.rank_ratio = rep.rank_ratio.max(out.max_rank_ratio());
        rep.sum_defect = rep.sum_defect.max(out.sum_defect());
        let centre = sys.z.iter().sum::<Complex64>() / sys.z.len() as f64;
        let spread = sys
            .z
            .iter()
            .map(|z| (z - centre).norm())
            .fold(0.0, f64::max)
            .max(1.0);
        let samples = [
            centre + Complex64::new(0.3, 1.1) * spread,
            centre + Complex64::new(-1.7, 0.4) * spread,
        ];
        let sub = invariant_subspace_check(&sys, undo, &samples);
        rep.dim_k = sub.dim_k;
        rep.dim_l = sub.dim_l;
        rep.subspace_defect = rep.subspace_defect.max(sub.max_defect);
    }

    // integrability of the output on a short segment around the middle pick
    let mid = &points[picks[picks.len() / 2]];
    let h = 1e-3;
    let seg: Vec<Vec<Complex64>> = (-4..=4)
        .map(|k| {
            let mut t = mid.t.clone();
            t[1] += cr(k as f64 * h);
            t
        })
        .collect();
    let seg = track_path(ring, &seg, mid.z).map_err(|e| IsoError::Continuation(e.to_string()))?;
    let family = residue_family(cs, &seg, &lam_shift)?;
    let mut outs = Vec::with_capacity(family.len());
    let mut gauge = None;
    for ok in &family {
        let out = middle_convolution_gauged(&truncate_okubo(ok)?, undo, gauge)?;
        gauge = Some(out.gauge_index);
        outs.push(out);
    }
    rep.output_schlesinger = gauged_schlesinger_defect(&outs, h)?;
    Ok(rep)
}

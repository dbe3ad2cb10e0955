//! Numeric Okubo systems: residues, integrability, Pfaffian integration,
//! Schlesinger residuals and the rank-2 Jimbo–Miwa reconstruction.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::exprio::{cmatrix_json, complex_json};
use crate::flatcore::{
    saito_relation_failures, track_path, CompiledSaito, PathPoint, SaitoMatrices,
};
use crate::linalg::{self, cr, CMat};
use crate::p6::stencil;
use crate::ring::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsoError {
    #[error("eigenvalues of T collide (separation {separation:.3e})")]
    EigenvalueCollision { separation: f64 },
    #[error("residue {index} has numerical rank >= 2 (sigma2/sigma1 = {ratio:.3e})")]
    RankViolation { index: usize, ratio: f64 },
    #[error("residue trace {index} is within 1e-6 of ±1")]
    TraceResonance { index: usize },
    #[error("step size underflow at s = {at}")]
    StepUnderflow { at: f64 },
    #[error("solution blew up at t = {at}")]
    BlowUp { at: Complex64 },
    #[error("residue tracking lost between snapshots {0} and {1}")]
    TrackingLost(usize, usize),
    #[error("generator continuation failed: {0}")]
    Continuation(String),
    #[error("need at least 5 snapshots, got {0}")]
    InsufficientSnapshots(usize),
    #[error("rank-one factorization of residue {0} failed")]
    FactorizationFailed(usize),
    #[error("assembled P and P^-1 disagree ({defect:.3e})")]
    InverseMismatch { defect: f64 },
    #[error("B_inf has a zero diagonal entry")]
    ZeroLambda,
    #[error("theta_inf = kappa1 - kappa2 vanishes")]
    DegenerateTheta,
    #[error("y = {0} hits a pole in {{0, 1, t}}")]
    PoleAtY(Complex64),
    #[error("kappa1 + kappa2 + theta0 + theta1 + thetat = {0}, not 0")]
    KappaConstraint(Complex64),
}

pub const RANK_TOL: f64 = 1e-9;

/// Okubo data at one point: `B^(z) = Σ B_i / (z − z_i)`.
#[derive(Clone, Debug)]
pub struct OkuboNumeric {
    pub n: usize,
    pub t: CMat,
    pub btilde: Vec<CMat>,
    pub binf: CMat,
    pub z: Vec<Complex64>,
    pub p: CMat,
    pub residues: Vec<CMat>,
    pub traces: Vec<Complex64>,
}

impl OkuboNumeric {
    /// `|Σ B_i + B_∞|`.
    pub fn sum_defect(&self) -> f64 {
        let s = self
            .residues
            .iter()
            .fold(self.binf.clone(), |acc, b| acc + b);
        linalg::max_abs(&s)
    }

    /// `B^(z)` at a spectral point `x`.
    pub fn connection_at(&self, x: Complex64) -> CMat {
        self.residues
            .iter()
            .zip(&self.z)
            .fold(linalg::zeros(self.n), |acc, (b, zi)| acc + b / (x - zi))
    }
}

fn rank_ratio(m: &CMat) -> f64 {
    let s = linalg::singular_values(m);
    if s.len() < 2 || s[0] == 0.0 {
        0.0
    } else {
        s[1] / s[0]
    }
}

/// Decompose `−(zI − T)⁻¹ B_∞` into rank-one residues at the eigenvalues of
/// `T`. With `order`, eigenvalues are matched to it; otherwise sorted.
pub fn residue_decomposition(
    t: &CMat,
    btilde: Vec<CMat>,
    lambda: &[Complex64],
    order: Option<&[Complex64]>,
) -> Result<OkuboNumeric, IsoError> {
    let n = t.nrows();
    let (mu, pm) = linalg::eig(t);
    let sep = linalg::min_separation(&mu);
    if n > 1 && sep < 1e-9 {
        return Err(IsoError::EigenvalueCollision { separation: sep });
    }
    let perm = match order {
        Some(prev) => linalg::match_to(prev, &mu),
        None => linalg::sort_order(&mu),
    };
    let z: Vec<Complex64> = perm.iter().map(|&k| mu[k]).collect();
    let p = CMat::from_fn(n, n, |r, k| pm[(r, perm[k])]);
    let pinv = linalg::inverse(&p).ok_or(IsoError::EigenvalueCollision { separation: 0.0 })?;
    let binf = linalg::diag(lambda);
    let mut residues = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    for i in 0..n {
        let b = -(p.column(i) * pinv.row(i)) * &binf;
        let ratio = rank_ratio(&b);
        if ratio > RANK_TOL {
            return Err(IsoError::RankViolation {
                index: i + 1,
                ratio,
            });
        }
        traces.push(b.trace());
        residues.push(b);
    }
    Ok(OkuboNumeric {
        n,
        t: t.clone(),
        btilde,
        binf,
        z,
        p,
        residues,
        traces,
    })
}

/// Residues at a path point from compiled Saito data.
pub fn residues_at(
    cs: &CompiledSaito,
    point: &PathPoint,
    lambda: &[Complex64],
    order: Option<&[Complex64]>,
) -> Result<OkuboNumeric, IsoError> {
    residue_decomposition(&cs.t_at(point), cs.btilde_at(point), lambda, order)
}

/// Residue traces avoid ±1 (needed for the rank-one theory).
pub fn check_trace_condition(ok: &OkuboNumeric) -> Result<(), IsoError> {
    for (i, r) in ok.traces.iter().enumerate() {
        if (r - 1.0).norm() < 1e-6 || (r + 1.0).norm() < 1e-6 {
            return Err(IsoError::TraceResonance { index: i + 1 });
        }
    }
    Ok(())
}

/// Residues along a path, eigenvalues tracked from point to point.
pub fn residue_family(
    cs: &CompiledSaito,
    path: &[PathPoint],
    lambda: &[Complex64],
) -> Result<Vec<OkuboNumeric>, IsoError> {
    let mut out: Vec<OkuboNumeric> = Vec::with_capacity(path.len());
    for p in path {
        let prev = out.last().map(|o| o.z.clone());
        out.push(residues_at(cs, p, lambda, prev.as_deref())?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct IntegrabilityReport {
    pub commute: bool,
    pub ci1: bool,
    pub ci3: bool,
    pub failures: Vec<String>,
}

impl IntegrabilityReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `[T, B̃^(i)] = [B̃^(i), B̃^(j)] = 0`, `∂_i T + B̃^(i) + [B̃^(i), B_∞] = 0`
/// and `∂_j B̃^(i) = ∂_i B̃^(j)`, exactly, with `B_∞ = diag(w) − shift`.
pub fn check_integrability(m: &SaitoMatrices, shift: &Rational) -> IntegrabilityReport {
    let binf: Vec<Rational> = m.binf.iter().map(|w| w - shift).collect();
    let failures = saito_relation_failures(m, &binf);
    let has = |s: &str| failures.iter().any(|f| f.contains(s));
    IntegrabilityReport {
        commute: !has("[B~(i), B~(j)]") && !has("[T, B~(i)]"),
        ci1: !has("dT/dt_i"),
        ci3: !has("mixed derivatives"),
        failures,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Rk4Options {
    /// Local error allowed per unit of the independent variable.
    pub tol: f64,
    pub min_step: f64,
}

impl Default for Rk4Options {
    fn default() -> Self {
        Rk4Options {
            tol: 1e-10,
            min_step: 1e-12,
        }
    }
}

fn rk4_step(f: &impl Fn(f64, &CMat) -> CMat, s: f64, y: &CMat, h: f64) -> CMat {
    let k1 = f(s, y);
    let k2 = f(s + h / 2.0, &(y + &k1 * cr(h / 2.0)));
    let k3 = f(s + h / 2.0, &(y + &k2 * cr(h / 2.0)));
    let k4 = f(s + h, &(y + &k3 * cr(h)));
    y + (k1 + k2 * cr(2.0) + k3 * cr(2.0) + k4) * cr(h / 6.0)
}

/// Adaptive RK4 (step doubling with Richardson correction) for `Y' = f(s, Y)`
/// from `s0` to `s1`.
pub fn rk4_adaptive(
    f: &impl Fn(f64, &CMat) -> CMat,
    s0: f64,
    s1: f64,
    y0: &CMat,
    opts: Rk4Options,
) -> Result<CMat, IsoError> {
    let mut s = s0;
    let mut y = y0.clone();
    let span = s1 - s0;
    if span == 0.0 {
        return Ok(y);
    }
    let dir = span.signum();
    let mut h = span / 4.0;
    while (s1 - s) * dir > 0.0 {
        if (s + h - s1) * dir > 0.0 {
            h = s1 - s;
        }
        let full = rk4_step(f, s, &y, h);
        let half = rk4_step(f, s, &y, h / 2.0);
        let two = rk4_step(f, s + h / 2.0, &half, h / 2.0);
        let err = linalg::max_abs(&(&two - &full)) / 15.0;
        let scale = 1.0 + linalg::max_abs(&two);
        if !err.is_finite() || err > opts.tol * h.abs() * scale {
            h /= 2.0;
            if h.abs() < opts.min_step {
                return Err(IsoError::StepUnderflow { at: s });
            }
            continue;
        }
        y = &two + (&two - &full) / cr(15.0);
        s += h;
        if err < opts.tol * h.abs() * scale / 64.0 {
            h *= 2.0;
        }
    }
    Ok(y)
}

#[derive(Clone, Debug)]
pub struct PfaffianSolution {
    pub s: Vec<f64>,
    pub y: Vec<CMat>,
    /// Max relative gap between `det Y` and `det Y_0 · exp(∫ tr A)`.
    pub liouville_defect: f64,
}

/// Integrate `dY/ds = A(s) Y` through the sample parameters `s`, where
/// `A(s)` is the connection form pulled back to the path.
pub fn integrate_pfaffian(
    connection: impl Fn(f64) -> CMat,
    s: &[f64],
    y0: &CMat,
    opts: Rk4Options,
) -> Result<PfaffianSolution, IsoError> {
    let n = y0.nrows();
    // carry exp(∫ tr A) in an extra diagonal slot
    let f = |s: f64, y: &CMat| {
        let a = connection(s);
        let mut big = CMat::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n)).copy_from(&a);
        big[(n, n)] = a.trace();
        big * y
    };
    let mut cur = CMat::zeros(n + 1, n + 1);
    cur.view_mut((0, 0), (n, n)).copy_from(y0);
    cur[(n, n)] = cr(1.0);
    let d0 = linalg::det(y0);
    let mut ys = vec![y0.clone()];
    let mut defect: f64 = 0.0;
    for w in s.windows(2) {
        cur = rk4_adaptive(&f, w[0], w[1], &cur, opts)?;
        let y = cur.view((0, 0), (n, n)).into_owned();
        let expected = d0 * cur[(n, n)];
        defect = defect.max((linalg::det(&y) - expected).norm() / expected.norm().max(1e-300));
        ys.push(y);
    }
    Ok(PfaffianSolution {
        s: s.to_vec(),
        y: ys,
        liouville_defect: defect,
    })
}

/// Max defect of `dB_i/ds = Σ_{j≠i} [B_j, B_i] d/ds log(z_i − z_j)` on a
/// uniform grid of step `ds`, five-point stencil.
pub fn schlesinger_defect(
    residues: &[Vec<CMat>],
    poles: &[Vec<Complex64>],
    ds: f64,
) -> Result<f64, IsoError> {
    let m = residues.len();
    if m < 5 {
        return Err(IsoError::InsufficientSnapshots(m));
    }
    let n = residues[0].len();
    let (dim_r, dim_c) = residues[0][0].shape();
    let series = |f: &dyn Fn(usize) -> Complex64| -> Vec<Complex64> { (0..m).map(f).collect() };
    let dz: Vec<Vec<Complex64>> = (0..n)
        .map(|i| stencil(&series(&|k| poles[k][i]), ds).0)
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut db = vec![CMat::zeros(dim_r, dim_c); m];
        for r in 0..dim_r {
            for c in 0..dim_c {
                let d = stencil(&series(&|k| residues[k][i][(r, c)]), ds).0;
                for k in 0..m {
                    db[k][(r, c)] = d[k];
                }
            }
        }
        for k in 2..m - 2 {
            let b = &residues[k];
            let mut rhs = CMat::zeros(dim_r, dim_c);
            for j in 0..n {
                if j != i {
                    let w = (dz[i][k] - dz[j][k]) / (poles[k][i] - poles[k][j]);
                    rhs += linalg::commutator(&b[j], &b[i]) * w;
                }
            }
            worst = worst.max(linalg::max_abs(&(&db[k] - rhs)));
        }
    }
    Ok(worst)
}

/// Schlesinger residual of an Okubo residue family sampled with step `ds`.
pub fn schlesinger_residual(family: &[OkuboNumeric], ds: f64) -> Result<f64, IsoError> {
    for (k, w) in family.windows(2).enumerate() {
        let perm = linalg::match_to(&w[0].z, &w[1].z);
        if perm.iter().enumerate().any(|(a, b)| a != *b) {
            return Err(IsoError::TrackingLost(k, k + 1));
        }
    }
    let residues: Vec<Vec<CMat>> = family.iter().map(|o| o.residues.clone()).collect();
    let poles: Vec<Vec<Complex64>> = family.iter().map(|o| o.z.clone()).collect();
    schlesinger_defect(&residues, &poles, ds)
}

/// Schlesinger residual for rank-2 systems with poles `0, 1, t(s)`.
pub fn schlesinger_residual_2x2(systems: &[JMSystem], ds: f64) -> Result<f64, IsoError> {
    let residues: Vec<Vec<CMat>> = systems
        .iter()
        .map(|s| vec![s.a0.clone(), s.a1.clone(), s.at.clone()])
        .collect();
    let poles: Vec<Vec<Complex64>> = systems
        .iter()
        .map(|s| vec![cr(0.0), cr(1.0), s.t])
        .collect();
    schlesinger_defect(&residues, &poles, ds)
}

#[derive(Clone, Debug)]
pub struct OkuboForm {
    pub p: CMat,
    pub pinv: CMat,
    /// `P⁻¹ B'_∞ P`.
    pub binf_conj: CMat,
    pub poles: Vec<Complex64>,
}

impl OkuboForm {
    /// `−(x − diag(z_i))⁻¹ P⁻¹ B'_∞ P`.
    pub fn connection_at(&self, x: Complex64) -> CMat {
        let n = self.p.nrows();
        CMat::from_fn(n, n, |i, j| -self.binf_conj[(i, j)] / (x - self.poles[i]))
    }
}

/// Gauge a Fuchsian system with rank-one residues `B'_i = −b_i a_i B'_∞`
/// into Okubo form: `P = (b_1 … b_n)`, `P⁻¹` has rows `a_i`.
pub fn okubo_normal_form(
    residues: &[CMat],
    binf: &[Complex64],
    poles: &[Complex64],
) -> Result<OkuboForm, IsoError> {
    let n = residues.len();
    if binf.iter().any(|l| l.norm() < 1e-14) {
        return Err(IsoError::ZeroLambda);
    }
    let inv = linalg::diag(&binf.iter().map(|l| l.inv()).collect::<Vec<_>>());
    let mut p = CMat::zeros(n, n);
    let mut a = CMat::zeros(n, n);
    for (i, b) in residues.iter().enumerate() {
        let m = -(b * &inv);
        if rank_ratio(&m) > RANK_TOL {
            return Err(IsoError::FactorizationFailed(i + 1));
        }
        let (col, cnorm) = (0..n)
            .map(|c| (c, m.column(c).norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if cnorm == 0.0 {
            return Err(IsoError::FactorizationFailed(i + 1));
        }
        let bcol = m.column(col).into_owned();
        let (row, _) = (0..n)
            .map(|r| (r, bcol[r].norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let arow = m.row(row) / bcol[row];
        p.set_column(i, &bcol);
        a.set_row(i, &arow);
    }
    let defect = linalg::max_abs(&(&p * &a - CMat::identity(n, n)));
    if defect > 1e-10 {
        return Err(IsoError::InverseMismatch { defect });
    }
    let binf_conj = &a * linalg::diag(binf) * &p;
    Ok(OkuboForm {
        p,
        pinv: a,
        binf_conj,
        poles: poles.to_vec(),
    })
}

/// Rank-2 Fuchsian system with poles `0, 1, t` and its Jimbo–Miwa data.
#[derive(Clone, Debug)]
pub struct JMSystem {
    pub a0: CMat,
    pub a1: CMat,
    pub at: CMat,
    pub thetas: [Complex64; 3],
    pub kappas: [Complex64; 2],
    pub y: Complex64,
    pub ztilde: Complex64,
    pub k: Complex64,
    pub t: Complex64,
    pub u: Complex64,
    pub v: Complex64,
    pub w: Complex64,
    pub z0: Complex64,
    pub z1: Complex64,
    pub zt: Complex64,
}

impl JMSystem {
    pub fn to_json(&self) -> serde_json::Value {
        let cj = complex_json;
        serde_json::json!({
            "A0": cmatrix_json(&self.a0),
            "A1": cmatrix_json(&self.a1),
            "At": cmatrix_json(&self.at),
            "thetas": self.thetas.iter().map(|x| cj(*x)).collect::<Vec<_>>(),
            "kappas": self.kappas.iter().map(|x| cj(*x)).collect::<Vec<_>>(),
            "auxiliary": {"y": cj(self.y), "ztilde": cj(self.ztilde), "k": cj(self.k), "t": cj(self.t)},
            "internal": {"u": cj(self.u), "v": cj(self.v), "w": cj(self.w), "z0": cj(self.z0), "z1": cj(self.z1), "zt": cj(self.zt)},
        })
    }

    pub fn a_inf(&self) -> CMat {
        -(&self.a0 + &self.a1 + &self.at)
    }

    /// `A(x) = A_0/x + A_1/(x−1) + A_t/(x−t)`.
    pub fn a_at(&self, x: Complex64) -> CMat {
        &self.a0 / x + &self.a1 / (x - 1.0) + &self.at / (x - self.t)
    }

    /// Largest of `|tr A_i − θ_i|` and `|A_∞ − diag(κ)|`.
    pub fn invariant_defect(&self) -> f64 {
        let tr = [self.a0.trace(), self.a1.trace(), self.at.trace()];
        let d1 = tr
            .iter()
            .zip(&self.thetas)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let d2 = linalg::max_abs(&(self.a_inf() - linalg::diag(&self.kappas)));
        d1.max(d2)
    }
}

fn check_admissible(
    thetas: &[Complex64; 3],
    kappas: &[Complex64; 2],
) -> Result<Complex64, IsoError> {
    let sum = kappas[0] + kappas[1] + thetas.iter().sum::<Complex64>();
    if sum.norm() > 1e-12 * (1.0 + kappas[0].norm() + kappas[1].norm()) {
        return Err(IsoError::KappaConstraint(sum));
    }
    let thinf = kappas[0] - kappas[1];
    if thinf.norm() < 1e-14 {
        return Err(IsoError::DegenerateTheta);
    }
    Ok(thinf)
}

/// Assemble `A_0, A_1, A_t` from `(y, z̃, k)` and the local exponents.
pub fn jm_build(
    y: Complex64,
    ztilde: Complex64,
    k: Complex64,
    thetas: [Complex64; 3],
    kappas: [Complex64; 2],
    t: Complex64,
) -> Result<JMSystem, IsoError> {
    let thinf = check_admissible(&thetas, &kappas)?;
    let [th0, th1, tht] = thetas;
    let [k1, k2] = kappas;
    let one = cr(1.0);
    if y.norm() < 1e-12 || (y - one).norm() < 1e-12 || (y - t).norm() < 1e-12 {
        return Err(IsoError::PoleAtY(y));
    }
    let zz = ztilde - th0 / y - th1 / (y - one) - tht / (y - t);
    let cubic = y * (y - one) * (y - t) * zz * zz;
    let two = cr(2.0);
    let z0 = y / (t * thinf)
        * (cubic
            + (th1 * (y - t) + t * tht * (y - one) - two * k2 * (y - one) * (y - t)) * zz
            + k2 * k2 * (y - t - one)
            - k2 * (th1 + t * tht));
    let z1 = -(y - one) / ((t - one) * thinf)
        * (cubic
            + ((th1 + thinf) * (y - t) + t * tht * (y - one) - two * k2 * (y - one) * (y - t))
                * zz
            + k2 * k2 * (y - t)
            - k2 * (th1 + t * tht)
            - k1 * k2);
    let zt = (y - t) / (t * (t - one) * thinf)
        * (cubic
            + (th1 * (y - t) + t * (tht + thinf) * (y - one) - two * k2 * (y - one) * (y - t))
                * zz
            + k2 * k2 * (y - one)
            - k2 * (th1 + t * tht)
            - t * k1 * k2);
    let u = k * y / (t * z0);
    let v = -k * (y - one) / ((t - one) * z1);
    let w = k * (y - t) / (t * (t - one) * zt);
    let block = |z: Complex64, th: Complex64, g: Complex64| {
        CMat::from_row_slice(2, 2, &[z + th, -g * z, (z + th) / g, -z])
    };
    let sys = JMSystem {
        a0: block(z0, th0, u),
        a1: block(z1, th1, v),
        at: block(zt, tht, w),
        thetas,
        kappas,
        y,
        ztilde,
        k,
        t,
        u,
        v,
        w,
        z0,
        z1,
        zt,
    };
    if !sys
        .a0
        .iter()
        .chain(sys.a1.iter())
        .chain(sys.at.iter())
        .all(|x| x.is_finite())
    {
        return Err(IsoError::PoleAtY(y));
    }
    Ok(sys)
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct HamiltonianState {
    pub t: Complex64,
    pub y: Complex64,
    pub ztilde: Complex64,
    pub k: Complex64,
}

/// `d/dt (y, z̃, k)` of the Painlevé VI Hamiltonian system.
pub fn hamiltonian_rhs(
    thetas: [Complex64; 3],
    kappas: [Complex64; 2],
    t: Complex64,
    s: [Complex64; 3],
) -> [Complex64; 3] {
    let [th0, th1, tht] = thetas;
    let [k1, k2] = kappas;
    let thinf = k1 - k2;
    let [y, zt, k] = s;
    let one = cr(1.0);
    let tt = t * (t - one);
    let dy = y * (y - one) * (y - t) / tt
        * (cr(2.0) * zt - th0 / y - th1 / (y - one) - (tht - one) / (y - t));
    let dz = ((-3.0 * y * y + 2.0 * (one + t) * y - t) * zt * zt
        + ((2.0 * y - one - t) * th0 + (2.0 * y - t) * th1 + (2.0 * y - one) * (tht - one)) * zt
        - k1 * (k2 + one))
        / tt;
    let dk = k * (thinf - one) * (y - t) / tt;
    [dy, dz, dk]
}

/// RK4 trajectory of `(y, z̃, k)` through the points of `t_path`
/// (straight segments in the complex `t`-plane).
pub fn integrate_p6_hamiltonian(
    thetas: [Complex64; 3],
    kappas: [Complex64; 2],
    init: HamiltonianState,
    t_path: &[Complex64],
    opts: Rk4Options,
) -> Result<Vec<HamiltonianState>, IsoError> {
    check_admissible(&thetas, &kappas)?;
    let mut state = CMat::from_column_slice(3, 1, &[init.y, init.ztilde, init.k]);
    let mut t = init.t;
    let mut out = Vec::with_capacity(t_path.len());
    for &target in t_path {
        let dt = target - t;
        let t0 = t;
        let f = |s: f64, y: &CMat| {
            let r = hamiltonian_rhs(thetas, kappas, t0 + dt * s, [y[0], y[1], y[2]]);
            CMat::from_column_slice(3, 1, &[r[0] * dt, r[1] * dt, r[2] * dt])
        };
        state = rk4_adaptive(&f, 0.0, 1.0, &state, opts)
            .map_err(|_| IsoError::StepUnderflow { at: target.re })?;
        t = target;
        let (y, zt, k) = (state[0], state[1], state[2]);
        if !(y.is_finite() && zt.is_finite() && k.is_finite()) || y.norm() > 1e8 {
            return Err(IsoError::BlowUp { at: t });
        }
        out.push(HamiltonianState {
            t,
            y,
            ztilde: zt,
            k,
        });
    }
    Ok(out)
}

/// `(y, t)` series of a Hamiltonian trajectory as PVI samples on a uniform
/// grid of step `ds`.
pub fn trajectory_samples(traj: &[HamiltonianState], ds: f64) -> Vec<crate::p6::P6Sample> {
    let ts: Vec<Complex64> = traj.iter().map(|s| s.t).collect();
    let ys: Vec<Complex64> = traj.iter().map(|s| s.y).collect();
    let points: Vec<Vec<Complex64>> = ts.iter().map(|t| vec![*t]).collect();
    crate::p6::samples_from_series(&points, &ts, &ys, ds)
}

#[derive(Clone, Debug, Serialize)]
pub struct JMRoundTrip {
    pub samples: usize,
    pub schlesinger_residual: f64,
    pub p6_residual: f64,
    pub invariant_defect: f64,
    pub params: crate::p6::P6Params,
}

/// Integrate the Hamiltonian system from `init` along the straight segment
/// to `t_end` (`samples` uniform steps), rebuild the Fuchsian system at every
/// step and measure Schlesinger and PVI residuals.
pub fn jm_roundtrip(
    thetas: [Complex64; 3],
    kappas: [Complex64; 2],
    init: HamiltonianState,
    t_end: Complex64,
    samples: usize,
    opts: Rk4Options,
) -> Result<JMRoundTrip, IsoError> {
    if samples < 5 {
        return Err(IsoError::InsufficientSnapshots(samples));
    }
    let thinf = check_admissible(&thetas, &kappas)?;
    let dt = (t_end - init.t) / (samples - 1) as f64;
    let t_path: Vec<Complex64> = (1..samples).map(|k| init.t + dt * k as f64).collect();
    let mut traj = vec![init];
    traj.extend(integrate_p6_hamiltonian(
        thetas, kappas, init, &t_path, opts,
    )?);
    let systems = traj
        .iter()
        .map(|s| jm_build(s.y, s.ztilde, s.k, thetas, kappas, s.t))
        .collect::<Result<Vec<_>, _>>()?;
    let invariant_defect = systems
        .iter()
        .map(JMSystem::invariant_defect)
        .fold(0.0, f64::max);

    // stencils in the real parameter s = |t − t_0|
    let ds = dt.norm();
    let schl = schlesinger_residual_2x2(&systems, ds)?;
    let samples = trajectory_samples(&traj, ds);
    let params = crate::p6::P6Params::from_thetas(thetas, thinf, [Complex64::default(); 3]);
    let p6 = crate::p6::p6_residual(&samples, &params)
        .map_err(|_| IsoError::InsufficientSnapshots(traj.len()))?;
    Ok(JMRoundTrip {
        samples: traj.len(),
        schlesinger_residual: schl,
        p6_residual: p6,
        invariant_defect,
        params,
    })
}

/// Schlesinger residual at every path sample, each from its own five-point
/// stencil of width `h` in `t_2`, so the truncation error does not depend
/// on the path spacing.
pub fn schlesinger_along_path(
    cs: &CompiledSaito,
    ring: &crate::ring::Ring,
    points: &[PathPoint],
    h: f64,
    lambda: &[Complex64],
) -> Result<f64, IsoError> {
    let mut worst: f64 = 0.0;
    for p in points {
        let seg: Vec<Vec<Complex64>> = (-2..=2)
            .map(|k| {
                let mut t = p.t.clone();
                t[1] += cr(k as f64 * h);
                t
            })
            .collect();
        let seg = track_path(ring, &seg, p.z).map_err(|e| IsoError::Continuation(e.to_string()))?;
        let family = residue_family(cs, &seg, lambda)?;
        worst = worst.max(schlesinger_residual(&family, h)?);
    }
    Ok(worst)
}

//! Painlevé VI from three-dimensional Saito structures: roots of the
//! discriminant, cross-ratios, parameters and the residual of the equation.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::flatcore::{CompiledMatrix, CompiledSaito, PathPoint, SaitoMatrices};
use crate::linalg::{self, c, cr, CMat};
use crate::ring::{CompiledElem, RingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum P6Error {
    #[error("Painlevé VI extraction needs rank 3, got {0}")]
    NotRankThree(usize),
    #[error("entry ({0},{1}) of h·B^(3) vanishes identically")]
    EntryIdenticallyZero(usize, usize),
    #[error("entry ({0},{1}) of h·B^(3) is not linear in t_3")]
    EntryNotLinear(usize, usize),
    #[error("t_3-coefficient of the chosen entry vanishes at sample {0}")]
    DegenerateLinearEntry(usize),
    #[error("roots of h collide (separation {separation:.3e})")]
    RootCollision { separation: f64 },
    #[error("eigenvalues of T collide (separation {separation:.3e})")]
    EigenvalueCollision { separation: f64 },
    #[error("dt/ds vanishes at sample {0}")]
    StationaryCrossRatio(usize),
    #[error("need at least 5 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("bad entry choice ({0},{1})")]
    BadEntry(usize, usize),
    #[error(transparent)]
    Ring(#[from] RingError),
}

pub const ROOT_SEPARATION: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct P6Params {
    pub theta0: Complex64,
    pub theta1: Complex64,
    pub thetat: Complex64,
    pub thetainf: Complex64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub delta: Complex64,
    /// Residue traces `−(P⁻¹ B_∞ P)_ii` with `B_∞ = diag(w)`.
    pub r: [Complex64; 3],
}

impl P6Params {
    pub fn from_thetas(theta: [Complex64; 3], thetainf: Complex64, r: [Complex64; 3]) -> P6Params {
        let half = cr(0.5);
        let one = cr(1.0);
        P6Params {
            theta0: theta[0],
            theta1: theta[1],
            thetat: theta[2],
            thetainf,
            alpha: half * (thetainf - one).powi(2),
            beta: -half * theta[0] * theta[0],
            gamma: half * theta[1] * theta[1],
            delta: half * (one - theta[2] * theta[2]),
            r,
        }
    }

    /// Recompute `(α, β, γ, δ)` from the θ's and compare.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let p = P6Params::from_thetas(
            [self.theta0, self.theta1, self.thetat],
            self.thetainf,
            self.r,
        );
        [
            (p.alpha, self.alpha),
            (p.beta, self.beta),
            (p.gamma, self.gamma),
            (p.delta, self.delta),
        ]
        .iter()
        .all(|(a, b)| (a - b).norm() <= tol)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct P6Sample {
    pub s: f64,
    pub point: Vec<Complex64>,
    pub t: Complex64,
    pub y: Complex64,
    pub dy_dt: Complex64,
    pub d2y_dt2: Complex64,
    /// Pointwise defect; NaN where the five-point stencil does not fit.
    pub residual: f64,
    #[serde(skip)]
    interior_slot: bool,
}

impl P6Sample {
    pub fn interior(&self) -> bool {
        self.dy_dt.is_finite() && self.d2y_dt2.is_finite()
    }
}

/// Everything recorded along one extraction run.
#[derive(Clone, Debug, Serialize)]
pub struct P6Extraction {
    pub entry: (usize, usize),
    pub samples: Vec<P6Sample>,
    pub roots: Vec<[Complex64; 3]>,
    /// Residue traces per sample, in root order.
    pub traces: Vec<[Complex64; 3]>,
    pub params: P6Params,
    pub min_root_separation: f64,
    /// Permutation taking the sorted roots at the first sample to the
    /// reported order.
    pub relabeling: [usize; 3],
}

impl P6Extraction {
    pub fn max_trace_drift(&self) -> f64 {
        let Some(first) = self.traces.first() else {
            return 0.0;
        };
        self.traces
            .iter()
            .flat_map(|r| r.iter().zip(first).map(|(a, b)| (a - b).norm()))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("s,t1,t2,t_re,t_im,y_re,y_im,dy_re,dy_im,d2y_re,d2y_im,residual\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                s.s,
                s.point[0].re,
                s.point.get(1).map_or(0.0, |x| x.re),
                s.t.re,
                s.t.im,
                s.y.re,
                s.y.im,
                s.dy_dt.re,
                s.dy_dt.im,
                s.d2y_dt2.re,
                s.d2y_dt2.im,
                s.residual
            );
        }
        out
    }
}

/// Compiled data for repeated evaluation along a path.
#[derive(Clone, Debug)]
pub struct P6Sampler {
    saito: CompiledSaito,
    h: Vec<CompiledElem>,
    adj: CompiledMatrix,
}

impl P6Sampler {
    pub fn new(m: &SaitoMatrices) -> Result<P6Sampler, P6Error> {
        let n = m.n();
        if n != 3 {
            return Err(P6Error::NotRankThree(n));
        }
        let d = crate::logvf::discriminant(m)
            .map_err(|_| P6Error::RootCollision { separation: 0.0 })?;
        Ok(P6Sampler {
            saito: CompiledSaito::new(m),
            h: d.coefficients().iter().map(|c| c.compile()).collect(),
            adj: m.t.adjugate().compile(),
        })
    }

    /// Roots of `h(t', ·)` in `t_3`, ascending real part then imaginary part.
    pub fn roots(&self, p: &PathPoint) -> Result<[Complex64; 3], P6Error> {
        let coeffs: Vec<Complex64> = self.h.iter().map(|c| c.eval(&p.t, p.z)).collect();
        let mut r = linalg::poly_roots(&coeffs);
        if r.len() != 3 {
            return Err(P6Error::RootCollision { separation: 0.0 });
        }
        let sep = linalg::min_separation(&r);
        if sep < ROOT_SEPARATION {
            return Err(P6Error::RootCollision { separation: sep });
        }
        let order = linalg::sort_order(&r);
        r = order.iter().map(|&k| r[k]).collect();
        Ok([r[0], r[1], r[2]])
    }

    /// Zero in `t_3` of entry `(i, j)` (1-based) of `adj(T)`, which is
    /// linear in `t_3`; `None` if its slope vanishes.
    pub fn entry_zero(&self, p: &PathPoint, i: usize, j: usize) -> Option<Complex64> {
        let at = |t3: f64| {
            let mut t = p.t.clone();
            t[2] = cr(t3);
            self.adj.eval(&t, p.z)[(i - 1, j - 1)]
        };
        let (a0, a1) = (at(0.0), at(1.0));
        let slope = a1 - a0;
        if slope.norm() <= 1e-13 * (1.0 + a0.norm()) {
            return None;
        }
        Some(-a0 / slope)
    }

    /// Eigen-decomposition of `T` with eigenvalue `k` matched to root
    /// `roots[k]` (eigenvalues of `T` are `z_k − t_3`).
    fn eigen_matched(&self, p: &PathPoint, roots: &[Complex64; 3]) -> Result<CMat, P6Error> {
        let t = self.saito.t_at(p);
        let (mu, pm) = linalg::eig(&t);
        let sep = linalg::min_separation(&mu);
        if sep < ROOT_SEPARATION {
            return Err(P6Error::EigenvalueCollision { separation: sep });
        }
        let shifted: Vec<Complex64> = mu.iter().map(|m| m + p.t[2]).collect();
        let perm = linalg::match_to(roots, &shifted);
        Ok(CMat::from_fn(3, 3, |r, k| pm[(r, perm[k])]))
    }

    /// Residue traces `−(P⁻¹ diag(λ) P)_kk` in root order.
    pub fn traces(
        &self,
        p: &PathPoint,
        roots: &[Complex64; 3],
        lambda: &[Complex64],
    ) -> Result<[Complex64; 3], P6Error> {
        let pm = self.eigen_matched(p, roots)?;
        let pinv = linalg::inverse(&pm).ok_or(P6Error::EigenvalueCollision { separation: 0.0 })?;
        let conj = &pinv * linalg::diag(lambda) * &pm;
        Ok([-conj[(0, 0)], -conj[(1, 1)], -conj[(2, 2)]])
    }

    fn weights(&self) -> [Complex64; 3] {
        let w = &self.saito.binf;
        [cr(w[0]), cr(w[1]), cr(w[2])]
    }
}

/// Roots of `h` at `p`, in the canonical first-point order.
pub fn roots_of_h(m: &SaitoMatrices, p: &PathPoint) -> Result<[Complex64; 3], P6Error> {
    P6Sampler::new(m)?.roots(p)
}

/// θ_k are the residue traces after shifting `B_∞` by `−λ_3`, i.e.
/// `r_k + λ_3`; θ_∞ = λ_1 − λ_2.
fn params_from(r: [Complex64; 3], lambda: &[Complex64; 3]) -> P6Params {
    let theta = [r[0] + lambda[2], r[1] + lambda[2], r[2] + lambda[2]];
    P6Params::from_thetas(theta, lambda[0] - lambda[1], r)
}

/// Parameters at one point; residues follow the order of `roots` (default:
/// the canonical order of `roots_of_h`).
pub fn p6_parameters(
    m: &SaitoMatrices,
    p: &PathPoint,
    roots: Option<[Complex64; 3]>,
) -> Result<P6Params, P6Error> {
    let sampler = P6Sampler::new(m)?;
    let roots = match roots {
        Some(r) => r,
        None => sampler.roots(p)?,
    };
    let w = sampler.weights();
    let r = sampler.traces(p, &roots, &w)?;
    Ok(params_from(r, &w))
}

/// Five-point first and second derivatives on a uniform grid; NaN at the
/// two samples at each end.
pub fn stencil(f: &[Complex64], h: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let m = f.len();
    let nan = c(f64::NAN, f64::NAN);
    let mut d1 = vec![nan; m];
    let mut d2 = vec![nan; m];
    for k in 2..m.saturating_sub(2) {
        d1[k] = (-f[k + 2] + f[k + 1] * 8.0 - f[k - 1] * 8.0 + f[k - 2]) / (12.0 * h);
        d2[k] = (-f[k + 2] + f[k + 1] * 16.0 - f[k] * 30.0 + f[k - 1] * 16.0 - f[k - 2])
            / (12.0 * h * h);
    }
    (d1, d2)
}

/// `y'' − RHS(t, y, y')` of Painlevé VI.
pub fn p6_defect(
    t: Complex64,
    y: Complex64,
    dy: Complex64,
    d2y: Complex64,
    p: &P6Params,
) -> Complex64 {
    let one = cr(1.0);
    let rhs = cr(0.5) * (y.inv() + (y - one).inv() + (y - t).inv()) * dy * dy
        - (t.inv() + (t - one).inv() + (y - t).inv()) * dy
        + y * (y - one) * (y - t) / (t * t * (t - one) * (t - one))
            * (p.alpha
                + p.beta * t / (y * y)
                + p.gamma * (t - one) / ((y - one) * (y - one))
                + p.delta * t * (t - one) / ((y - t) * (y - t)));
    d2y - rhs
}

/// Samples of `y(t)` given on a uniform grid of step `ds` in an auxiliary
/// parameter; derivatives by the chain rule from five-point stencils.
pub fn samples_from_series(
    points: &[Vec<Complex64>],
    ts: &[Complex64],
    ys: &[Complex64],
    ds: f64,
) -> Vec<P6Sample> {
    let (dy1, dy2) = stencil(ys, ds);
    let (dt1, dt2) = stencil(ts, ds);
    let nan = c(f64::NAN, f64::NAN);
    (0..ts.len())
        .map(|k| {
            let interior_slot = dt1[k].is_finite();
            let (dy, d2y) = if interior_slot && dt1[k].norm() > 1e-12 {
                let dy = dy1[k] / dt1[k];
                (dy, (dy2[k] - dy * dt2[k]) / (dt1[k] * dt1[k]))
            } else {
                (nan, nan)
            };
            P6Sample {
                s: k as f64 * ds,
                point: points[k].clone(),
                t: ts[k],
                y: ys[k],
                dy_dt: dy,
                d2y_dt2: d2y,
                residual: f64::NAN,
                interior_slot,
            }
        })
        .collect()
}

pub fn fill_residuals(samples: &mut [P6Sample], params: &P6Params) {
    for s in samples.iter_mut().filter(|s| s.interior()) {
        s.residual = p6_defect(s.t, s.y, s.dy_dt, s.d2y_dt2, params).norm();
    }
}

/// Max defect over the samples with stencil derivatives.
pub fn p6_residual(samples: &[P6Sample], params: &P6Params) -> Result<f64, P6Error> {
    if samples.len() < 5 {
        return Err(P6Error::InsufficientSamples(samples.len()));
    }
    Ok(samples
        .iter()
        .filter(|s| s.interior())
        .map(|s| p6_defect(s.t, s.y, s.dy_dt, s.d2y_dt2, params).norm())
        .fold(0.0, f64::max))
}

/// Sample `y(t)` along `path` (uniform parameter step `ds`) from the zero of
/// entry `(i, j)` (1-based) of `h·B^(3)`. `relabel` permutes the tracked
/// roots before the cross-ratios are formed.
pub fn extract_p6_solution(
    m: &SaitoMatrices,
    lambda: &[Complex64; 3],
    entry: (usize, usize),
    path: &[PathPoint],
    ds: f64,
    relabel: [usize; 3],
) -> Result<P6Extraction, P6Error> {
    let (i, j) = entry;
    if i == j || !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(P6Error::BadEntry(i, j));
    }
    if path.len() < 5 {
        return Err(P6Error::InsufficientSamples(path.len()));
    }
    let adj = m.t.adjugate();
    let e = adj.get(i - 1, j - 1);
    if e.is_zero() || lambda[j - 1].norm() == 0.0 {
        return Err(P6Error::EntryIdenticallyZero(i, j));
    }
    if e.numerator().degree_in(2).unwrap_or(0) > 1 {
        return Err(P6Error::EntryNotLinear(i, j));
    }
    let sampler = P6Sampler::new(m)?;

    // track roots by assignment to the previous sample
    let mut roots: Vec<[Complex64; 3]> = Vec::with_capacity(path.len());
    let mut min_sep = f64::INFINITY;
    for p in path {
        let r = sampler.roots(p)?;
        min_sep = min_sep.min(linalg::min_separation(&r));
        let r = match roots.last() {
            None => [r[relabel[0]], r[relabel[1]], r[relabel[2]]],
            Some(prev) => {
                let perm = linalg::match_to(prev, &r);
                [r[perm[0]], r[perm[1]], r[perm[2]]]
            }
        };
        roots.push(r);
    }

    let mut ys = Vec::with_capacity(path.len());
    let mut ts = Vec::with_capacity(path.len());
    let mut traces = Vec::with_capacity(path.len());
    for (k, (p, z)) in path.iter().zip(&roots).enumerate() {
        let zij = sampler
            .entry_zero(p, i, j)
            .ok_or(P6Error::DegenerateLinearEntry(k))?;
        let span = z[1] - z[0];
        ys.push((zij - z[0]) / span);
        ts.push((z[2] - z[0]) / span);
        let r = sampler.traces(p, z, lambda)?;
        traces.push(r);
    }

    let mid = path.len() / 2;
    let params = params_from(traces[mid], lambda);
    let points: Vec<Vec<Complex64>> = path.iter().map(|p| p.t.clone()).collect();
    let mut samples = samples_from_series(&points, &ts, &ys, ds);
    if let Some(k) = samples
        .iter()
        .position(|s| s.dy_dt.is_nan() && s.interior_slot)
    {
        return Err(P6Error::StationaryCrossRatio(k));
    }
    fill_residuals(&mut samples, &params);
    Ok(P6Extraction {
        entry,
        samples,
        roots,
        traces,
        params,
        min_root_separation: min_sep,
        relabeling: relabel,
    })
}

/// Every off-diagonal `(i, j)` whose entry of `h·B^(3)` is nonzero and
/// linear in `t_3`.
pub fn valid_entries(m: &SaitoMatrices) -> Vec<(usize, usize)> {
    let adj = m.t.adjugate();
    let mut out = Vec::new();
    for i in 1..=3 {
        for j in 1..=3 {
            let e = adj.get(i - 1, j - 1);
            if i != j && !e.is_zero() && e.numerator().degree_in(2).unwrap_or(0) <= 1 {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn weights_complex(m: &SaitoMatrices) -> [Complex64; 3] {
    let w: Vec<f64> = m.binf.iter().map(crate::ring::rat_to_f64).collect();
    [cr(w[0]), cr(w[1]), cr(w[2])]
}

//! Potential vector fields, the Saito-structure matrices built from them and
//! the exact identities they must satisfy.

use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;
use num_traits::One;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{self, CMat};
use crate::ring::{rat_to_f64, CompiledElem, Rational, Ring, RingElem, RingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatError {
    #[error("no diagonal rescaling makes C self-adjoint: {0}")]
    NoRescalingFound(String),
    #[error("jacobian of the candidate flat coordinates vanishes at {point:?}")]
    DegenerateJacobian { point: Vec<Complex64> },
    #[error("matrix arity mismatch")]
    Arity,
}

/// Square matrix over a [`Ring`].
#[derive(Clone, Debug)]
pub struct RMatrix {
    ring: Ring,
    n: usize,
    data: Vec<RingElem>,
}

impl RMatrix {
    pub fn from_vec(ring: &Ring, n: usize, data: Vec<RingElem>) -> RMatrix {
        assert_eq!(data.len(), n * n);
        RMatrix {
            ring: ring.clone(),
            n,
            data,
        }
    }

    pub fn from_fn(ring: &Ring, n: usize, f: impl Fn(usize, usize) -> RingElem + Sync) -> RMatrix {
        let data = (0..n * n)
            .into_par_iter()
            .map(|k| f(k / n, k % n))
            .collect();
        RMatrix {
            ring: ring.clone(),
            n,
            data,
        }
    }

    pub fn zero(ring: &Ring, n: usize) -> RMatrix {
        RMatrix {
            ring: ring.clone(),
            n,
            data: vec![ring.zero(); n * n],
        }
    }

    pub fn identity(ring: &Ring, n: usize) -> RMatrix {
        let mut m = Self::zero(ring, n);
        for i in 0..n {
            m.data[i * n + i] = ring.one();
        }
        m
    }

    pub fn diagonal(ring: &Ring, d: &[Rational]) -> RMatrix {
        let n = d.len();
        let mut m = Self::zero(ring, n);
        for (i, x) in d.iter().enumerate() {
            m.data[i * n + i] = ring.constant(x.clone());
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn get(&self, i: usize, j: usize) -> &RingElem {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: RingElem) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<RingElem> {
        self.data[i * self.n..(i + 1) * self.n].to_vec()
    }

    fn zip(&self, other: &RMatrix, f: impl Fn(&RingElem, &RingElem) -> RingElem + Sync) -> RMatrix {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(a, b)| f(a, b))
            .collect();
        RMatrix {
            ring: self.ring.clone(),
            n: self.n,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(&RingElem) -> RingElem + Sync + Send) -> RMatrix {
        RMatrix {
            ring: self.ring.clone(),
            n: self.n,
            data: self.data.par_iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &RMatrix) -> RMatrix {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &RMatrix) -> RMatrix {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn neg(&self) -> RMatrix {
        self.map(|a| a.neg())
    }

    pub fn scale(&self, c: &Rational) -> RMatrix {
        self.map(|a| a.scale(c))
    }

    pub fn scale_elem(&self, c: &RingElem) -> RMatrix {
        self.map(|a| a.mul(c))
    }

    pub fn mul(&self, other: &RMatrix) -> RMatrix {
        let n = self.n;
        RMatrix::from_fn(&self.ring, n, |i, j| {
            (0..n).fold(self.ring.zero(), |acc, k| {
                let (a, b) = (self.get(i, k), other.get(k, j));
                if a.is_zero() || b.is_zero() {
                    acc
                } else {
                    acc.add(&a.mul(b))
                }
            })
        })
    }

    pub fn commutator(&self, other: &RMatrix) -> RMatrix {
        self.mul(other).sub(&other.mul(self)).simplify()
    }

    pub fn transpose(&self) -> RMatrix {
        RMatrix::from_fn(&self.ring, self.n, |i, j| self.get(j, i).clone())
    }

    /// `A* = J Aᵗ J` with `J` the anti-diagonal identity.
    pub fn star(&self) -> RMatrix {
        let n = self.n;
        RMatrix::from_fn(&self.ring, n, |i, j| self.get(n - 1 - j, n - 1 - i).clone())
    }

    pub fn partial(&self, var: usize) -> RMatrix {
        self.map(|a| a.partial(var).simplify())
    }

    pub fn simplify(&self) -> RMatrix {
        self.map(|a| a.simplify())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|a| a.is_zero())
    }

    pub fn equals(&self, other: &RMatrix) -> bool {
        self.n == other.n
            && self
                .data
                .par_iter()
                .zip(other.data.par_iter())
                .all(|(a, b)| a == b)
    }

    /// Positions of nonzero entries.
    pub fn support(&self) -> Vec<(usize, usize)> {
        (0..self.n * self.n)
            .filter(|k| !self.data[*k].is_zero())
            .map(|k| (k / self.n, k % self.n))
            .collect()
    }

    pub fn trace(&self) -> RingElem {
        (0..self.n).fold(self.ring.zero(), |acc, i| acc.add(self.get(i, i)))
    }

    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> RingElem {
        if rows.len() == 1 {
            return self.get(rows[0], cols[0]).clone();
        }
        let r0 = rows[0];
        let sub_rows = &rows[1..];
        let mut acc = self.ring.zero();
        for (k, &c) in cols.iter().enumerate() {
            let a = self.get(r0, c);
            if a.is_zero() {
                continue;
            }
            let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let term = a.mul(&self.minor_det(sub_rows, &sub_cols));
            acc = if k % 2 == 0 {
                acc.add(&term)
            } else {
                acc.sub(&term)
            };
        }
        acc
    }

    /// Determinant by cofactor expansion.
    pub fn det(&self) -> RingElem {
        if self.n == 0 {
            return self.ring.one();
        }
        let idx: Vec<usize> = (0..self.n).collect();
        self.minor_det(&idx, &idx).simplify()
    }

    /// Determinant by the permutation (Leibniz) sum; an independent check
    /// on [`RMatrix::det`].
    pub fn det_leibniz(&self) -> RingElem {
        let n = self.n;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut acc = self.ring.zero();
        loop {
            let inversions = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| perm[i] > perm[j])
                .count();
            let term = (0..n).fold(self.ring.one(), |p, i| p.mul(self.get(i, perm[i])));
            acc = if inversions % 2 == 0 {
                acc.add(&term)
            } else {
                acc.sub(&term)
            };
            if !next_permutation(&mut perm) {
                break;
            }
        }
        acc.simplify()
    }

    /// Transposed cofactor matrix, `A·adj(A) = det(A)·I`.
    pub fn adjugate(&self) -> RMatrix {
        let n = self.n;
        RMatrix::from_fn(&self.ring, n, |i, j| {
            if n == 1 {
                return self.ring.one();
            }
            let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != i).collect();
            let m = self.minor_det(&rows, &cols).simplify();
            if (i + j) % 2 == 0 {
                m
            } else {
                m.neg()
            }
        })
    }

    pub fn compile(&self) -> CompiledMatrix {
        CompiledMatrix {
            n: self.n,
            entries: self.data.iter().map(|e| e.compile()).collect(),
        }
    }

    pub fn eval(&self, t: &[Complex64], z: Complex64) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j).eval(t, z))
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[derive(Clone, Debug)]
pub struct CompiledMatrix {
    n: usize,
    entries: Vec<CompiledElem>,
}

impl CompiledMatrix {
    pub fn eval(&self, t: &[Complex64], z: Complex64) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| {
            self.entries[i * self.n + j].eval(t, z)
        })
    }
}

/// Weights plus the vector `g = (g_1, …, g_n)`.
#[derive(Clone, Debug)]
pub struct PotentialVF {
    pub name: String,
    ring: Ring,
    pub g: Vec<RingElem>,
    pub meta: BTreeMap<String, String>,
}

impl PotentialVF {
    pub fn new(name: &str, ring: Ring, g: Vec<RingElem>) -> PotentialVF {
        assert_eq!(g.len(), ring.nvars());
        PotentialVF {
            name: name.to_string(),
            ring,
            g,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, String>) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn weights(&self) -> &[Rational] {
        self.ring.weights()
    }

    pub fn structurally_eq(&self, other: &PotentialVF) -> bool {
        self.name == other.name
            && self.ring == other.ring
            && self.meta == other.meta
            && self.g.len() == other.g.len()
            && self
                .g
                .iter()
                .zip(&other.g)
                .all(|(a, b)| a.structurally_eq(b))
    }

    /// Pairwise weight differences are not integers.
    pub fn weights_nonresonant(&self) -> bool {
        let w = self.weights();
        (0..w.len()).all(|i| (i + 1..w.len()).all(|j| !(&w[i] - &w[j]).is_integer()))
    }

    /// `g_j → c_j g_j(c_1⁻¹t_1, …, c_{n−1}⁻¹t_{n−1}, t_n)` (polynomial rings only).
    pub fn rescaled(&self, c: &[Rational]) -> Option<PotentialVF> {
        let inv: Vec<Rational> = c.iter().map(|x| x.recip()).collect();
        let g = self
            .g
            .iter()
            .zip(c)
            .map(|(g, cj)| self.ring.rescale(g, &inv).map(|h| h.scale(cj)))
            .collect::<Option<Vec<_>>>()?;
        Some(PotentialVF {
            name: self.name.clone(),
            ring: self.ring.clone(),
            g,
            meta: self.meta.clone(),
        })
    }
}

/// `C`, `B̃^(k)`, `T` and `B_∞` of a potential vector field.
#[derive(Clone, Debug)]
pub struct SaitoMatrices {
    pub c: RMatrix,
    pub btilde: Vec<RMatrix>,
    pub t: RMatrix,
    pub binf: Vec<Rational>,
}

impl SaitoMatrices {
    pub fn n(&self) -> usize {
        self.c.n()
    }

    pub fn ring(&self) -> &Ring {
        self.c.ring()
    }

    /// Every `T_ij` is homogeneous of weight `1 + w_j − w_i`.
    pub fn t_weights_ok(&self) -> bool {
        let w = &self.binf;
        let n = self.n();
        (0..n * n).into_par_iter().all(|k| {
            let (i, j) = (k / n, k % n);
            self.t
                .get(i, j)
                .is_homogeneous(&(Rational::one() + &w[j] - &w[i]))
        })
    }

    /// `T` with `t_n = 0`.
    pub fn t0(&self) -> RMatrix {
        let n = self.n();
        let ring = self.ring();
        self.t
            .add(&RMatrix::identity(ring, n).scale_elem(&ring.var(n - 1)))
    }
}

pub fn build_saito_matrices(pvf: &PotentialVF) -> SaitoMatrices {
    let n = pvf.n();
    let ring = pvf.ring();
    let c = RMatrix::from_fn(ring, n, |i, j| pvf.g[j].partial(i).simplify());
    let btilde: Vec<RMatrix> = (0..n).map(|k| c.partial(k)).collect();
    let mut t = RMatrix::zero(ring, n);
    for (k, b) in btilde.iter().enumerate() {
        let w = &pvf.weights()[k];
        t = t.sub(&b.scale_elem(&ring.var(k).scale(w)));
    }
    SaitoMatrices {
        c,
        btilde,
        t: t.simplify(),
        binf: pvf.weights().to_vec(),
    }
}

#[derive(Clone, Debug)]
pub struct WdvvReport {
    pub unit_ok: bool,
    pub homogeneity_ok: bool,
    pub commutators: BTreeMap<(usize, usize), RMatrix>,
    pub saito_relations_ok: bool,
    pub flat_normalization_ok: bool,
}

impl WdvvReport {
    /// 1-based `(p, q)` of every commutator with a nonzero defect.
    pub fn failing_commutators(&self) -> Vec<(usize, usize)> {
        self.commutators
            .iter()
            .filter(|(_, m)| !m.is_zero())
            .map(|(&(p, q), _)| (p + 1, q + 1))
            .collect()
    }

    pub fn is_solution(&self) -> bool {
        self.unit_ok
            && self.homogeneity_ok
            && self.saito_relations_ok
            && self.flat_normalization_ok
            && self.failing_commutators().is_empty()
    }
}

pub fn check_extended_wdvv(pvf: &PotentialVF) -> WdvvReport {
    check_extended_wdvv_with(pvf, &build_saito_matrices(pvf))
}

pub fn check_extended_wdvv_with(pvf: &PotentialVF, m: &SaitoMatrices) -> WdvvReport {
    let n = pvf.n();
    let ring = pvf.ring();
    let unit_ok = m.btilde[n - 1].equals(&RMatrix::identity(ring, n));
    let homogeneity_ok = pvf
        .g
        .par_iter()
        .zip(pvf.weights().par_iter())
        .all(|(g, w)| g.is_homogeneous(&(Rational::one() + w)));
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
        .collect();
    let commutators = pairs
        .par_iter()
        .map(|&(p, q)| ((p, q), m.btilde[p].commutator(&m.btilde[q])))
        .collect();
    WdvvReport {
        unit_ok,
        homogeneity_ok,
        commutators,
        saito_relations_ok: check_saito_relations(m),
        flat_normalization_ok: check_flat_normalization(m),
    }
}

/// Failed families of the Saito relations, by name.
pub fn saito_relation_failures(m: &SaitoMatrices, binf: &[Rational]) -> Vec<String> {
    let n = m.n();
    let ring = m.ring();
    let b = RMatrix::diagonal(ring, binf);
    let mut failures = Vec::new();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    if !pairs
        .par_iter()
        .all(|&(i, j)| m.btilde[i].partial(j).equals(&m.btilde[j].partial(i)))
    {
        failures.push("mixed derivatives of B~".to_string());
    }
    if !pairs
        .par_iter()
        .all(|&(i, j)| m.btilde[i].commutator(&m.btilde[j]).is_zero())
    {
        failures.push("[B~(i), B~(j)] = 0".to_string());
    }
    if !(0..n)
        .into_par_iter()
        .all(|i| m.t.commutator(&m.btilde[i]).is_zero())
    {
        failures.push("[T, B~(i)] = 0".to_string());
    }
    if !(0..n).into_par_iter().all(|i| {
        m.t.partial(i)
            .add(&m.btilde[i])
            .add(&m.btilde[i].commutator(&b))
            .simplify()
            .is_zero()
    }) {
        failures.push("dT/dt_i + B~(i) + [B~(i), B_inf] = 0".to_string());
    }
    failures
}

pub fn check_saito_relations(m: &SaitoMatrices) -> bool {
    saito_relation_failures(m, &m.binf).is_empty()
}

/// `T_{nj} + w_j t_j = 0` for every `j`.
pub fn check_flat_normalization(m: &SaitoMatrices) -> bool {
    let n = m.n();
    let ring = m.ring();
    (0..n).all(|j| {
        m.t.get(n - 1, j)
            .add(&ring.var(j).scale(&m.binf[j]))
            .is_zero()
    })
}

#[derive(Clone, Debug)]
pub struct Prepotential {
    pub f: RingElem,
    pub weight: Rational,
    /// `c_i` of the rescaling `t_i → c_i t_i` that was applied.
    pub rescaling: Vec<Rational>,
}

/// Solve `k_i / k_j = ratio` over the given edges with `k_0 = 1`.
fn propagate_ratios(
    n: usize,
    edges: &[(usize, usize, Rational)],
) -> Result<Vec<Rational>, FlatError> {
    let mut k: Vec<Option<Rational>> = vec![None; n];
    let mut adj: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n];
    for (i, j, r) in edges {
        // k_i = r k_j
        adj[*j].push((*i, r.clone()));
        adj[*i].push((*j, r.recip()));
    }
    for start in 0..n {
        if k[start].is_some() {
            continue;
        }
        k[start] = Some(Rational::one());
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let kv = k[v].clone().unwrap();
            for (u, r) in &adj[v] {
                let want = &kv * r;
                match &k[*u] {
                    Some(existing) if *existing != want => {
                        return Err(FlatError::NoRescalingFound(format!(
                            "inconsistent ratios between t{} and t{}",
                            v + 1,
                            u + 1
                        )))
                    }
                    Some(_) => {}
                    None => {
                        k[*u] = Some(want);
                        queue.push_back(*u);
                    }
                }
            }
        }
    }
    Ok(k.into_iter().map(Option::unwrap).collect())
}

/// Look for a prepotential `F` with `∂F/∂t_i = g_{n+1−i}` after a diagonal
/// rescaling. `Ok(None)` when `w_i + w_{n+1−i}` is not constant.
pub fn frobenius_check(pvf: &PotentialVF) -> Result<Option<Prepotential>, FlatError> {
    let n = pvf.n();
    let w = pvf.weights();
    let pair_sum = &w[0] + &w[n - 1];
    if (0..n).any(|i| &w[i] + &w[n - 1 - i] != pair_sum) {
        return Ok(None);
    }
    let m = build_saito_matrices(pvf);
    let cs = m.c.star();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (m.c.get(i, j), cs.get(i, j));
            match (a.is_zero(), b.is_zero()) {
                (true, true) => {}
                (false, false) => {
                    let r = a.ratio_if_constant(b).ok_or_else(|| {
                        FlatError::NoRescalingFound(format!(
                            "C_{}{} is not a constant multiple of (C*)_{}{}",
                            i + 1,
                            j + 1,
                            i + 1,
                            j + 1
                        ))
                    })?;
                    edges.push((i, j, r));
                }
                _ => {
                    return Err(FlatError::NoRescalingFound(format!(
                        "C_{}{} and (C*)_{}{} have different supports",
                        i + 1,
                        j + 1,
                        i + 1,
                        j + 1
                    )))
                }
            }
        }
    }
    for i in 0..n {
        edges.push((i, n - 1 - i, Rational::one()));
    }
    let mut k = propagate_ratios(n, &edges)?;
    // k_i = c_i c_{n+1-i}; the overall scale of k is free, so normalize the
    // middle entry (odd n) to 1 and keep every c_i rational
    if n % 2 == 1 {
        let mid = k[n / 2].clone();
        for x in k.iter_mut() {
            *x /= &mid;
        }
    }
    let mut c = vec![Rational::one(); n];
    c[0] = k[0].clone();
    for i in 1..n / 2 {
        c[n - 1 - i] = k[i].clone();
    }
    let g = if c.iter().all(|x| x.is_one()) {
        pvf.g.clone()
    } else {
        pvf.rescaled(&c)
            .ok_or_else(|| {
                FlatError::NoRescalingFound("rescaling an extension ring is not supported".into())
            })?
            .g
    };
    let ring = pvf.ring();
    let weight = Rational::one() + &pair_sum;
    let mut f = ring.zero();
    for i in 0..n {
        f = f.add(&g[n - 1 - i].mul(&ring.var(i)).scale(&w[i]));
    }
    let f = f.scale(&weight.recip()).simplify();
    for i in 0..n {
        if f.partial(i) != g[n - 1 - i] {
            return Err(FlatError::NoRescalingFound(format!(
                "dF/dt{} differs from g{}",
                i + 1,
                n - i
            )));
        }
    }
    Ok(Some(Prepotential {
        f,
        weight,
        rescaling: c,
    }))
}

#[derive(Clone, Debug)]
pub struct FlatCoords {
    /// `t_j = −(λ_j − λ_n + 1)⁻¹ T_{nj}` in the original coordinates.
    pub coords: Vec<RingElem>,
    /// `det(∂T_{nj}/∂x_i)` at each sample point.
    pub jacobians: Vec<Complex64>,
}

/// Candidate flat coordinates from the last row of an Okubo matrix `T(x)`,
/// with the jacobian criterion evaluated at `points` (generator value `z`
/// appended as the last coordinate when the ring has an extension).
pub fn flat_coords_from_okubo(
    t: &RMatrix,
    lambda: &[Rational],
    points: &[Vec<Complex64>],
) -> Result<FlatCoords, FlatError> {
    let n = t.n();
    if lambda.len() != n {
        return Err(FlatError::Arity);
    }
    let ring = t.ring();
    let coords: Vec<RingElem> = (0..n)
        .map(|j| {
            let s = &lambda[j] - &lambda[n - 1] + Rational::one();
            t.get(n - 1, j).scale(&(-s.recip()))
        })
        .collect();
    let jac = RMatrix::from_fn(ring, n, |i, j| t.get(n - 1, j).partial(i).simplify());
    let mut jacobians = Vec::new();
    for p in points {
        let z = p.get(n).copied().unwrap_or_default();
        let d = linalg::det(&jac.eval(&p[..n], z));
        if d.norm() < 1e-12 {
            return Err(FlatError::DegenerateJacobian { point: p.clone() });
        }
        jacobians.push(d);
    }
    Ok(FlatCoords { coords, jacobians })
}

/// `(−1)ⁿ w_1⋯w_n`, the jacobian in flat coordinates.
pub fn flat_jacobian_value(weights: &[Rational]) -> Rational {
    let p = weights.iter().fold(Rational::one(), |acc, w| acc * w);
    if weights.len() % 2 == 1 {
        -p
    } else {
        p
    }
}

/// A parameter point together with the tracked value of the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct PathPoint {
    pub t: Vec<Complex64>,
    pub z: Complex64,
}

/// Attach generator values to `points` by continuation from `seed`.
pub fn track_path(
    ring: &Ring,
    points: &[Vec<Complex64>],
    seed: Complex64,
) -> Result<Vec<PathPoint>, RingError> {
    let zs = ring.tracker().track(points, seed)?;
    Ok(points
        .iter()
        .zip(zs)
        .map(|(t, z)| PathPoint { t: t.clone(), z })
        .collect())
}

/// `T` and `B̃^(k)` compiled for fast numeric evaluation.
#[derive(Clone, Debug)]
pub struct CompiledSaito {
    pub n: usize,
    pub t: CompiledMatrix,
    pub btilde: Vec<CompiledMatrix>,
    pub binf: Vec<f64>,
}

impl CompiledSaito {
    pub fn new(m: &SaitoMatrices) -> CompiledSaito {
        CompiledSaito {
            n: m.n(),
            t: m.t.compile(),
            btilde: m.btilde.iter().map(|b| b.compile()).collect(),
            binf: m.binf.iter().map(rat_to_f64).collect(),
        }
    }

    pub fn t_at(&self, p: &PathPoint) -> CMat {
        self.t.eval(&p.t, p.z)
    }

    pub fn btilde_at(&self, p: &PathPoint) -> Vec<CMat> {
        self.btilde.iter().map(|b| b.eval(&p.t, p.z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::rat;

    #[test]
    fn ratios_propagate_along_edges() {
        let k = propagate_ratios(3, &[(1, 0, rat(2, 1)), (2, 1, rat(1, 3))]).unwrap();
        assert_eq!(k, vec![rat(1, 1), rat(2, 1), rat(2, 3)]);
    }

    #[test]
    fn inconsistent_ratios() {
        let err = propagate_ratios(2, &[(1, 0, rat(2, 1)), (0, 1, rat(2, 1))]);
        assert!(matches!(err, Err(FlatError::NoRescalingFound(_))));
    }

    #[test]
    fn jacobian_sign() {
        assert_eq!(
            flat_jacobian_value(&[rat(1, 5), rat(3, 5), rat(1, 1)]),
            rat(-3, 25)
        );
        assert_eq!(flat_jacobian_value(&[rat(1, 2), rat(1, 1)]), rat(1, 2));
    }

    #[test]
    fn determinant_matches_leibniz() {
        let r = Ring::new(vec![rat(1, 3), rat(2, 3), rat(1, 1)]);
        let m = RMatrix::from_fn(&r, 3, |i, j| {
            r.var((i + j) % 3).add(&r.constant(rat((i * j) as i64, 1)))
        });
        assert_eq!(m.det(), m.det_leibniz());
        let adj = m.adjugate();
        let prod = m.mul(&adj);
        assert!(prod.equals(&RMatrix::identity(&r, 3).scale_elem(&m.det())));
    }
}

//! Discriminants and logarithmic vector fields of a Saito structure.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::flatcore::{RMatrix, SaitoMatrices};
use crate::ring::{Rational, RingElem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogvfError {
    #[error("det(-T) is not monic of degree n in t_n")]
    NotMonic,
    #[error("row {0} is not logarithmic along the divisor")]
    RowNotLogarithmic(usize),
}

/// Discriminant `h`, monic of degree `n` in `t_n`. The lower coefficients
/// live in the ring, so they may involve the generator.
#[derive(Clone, Debug)]
pub struct DivisorData {
    pub h: RingElem,
    pub n: usize,
    coeffs: Vec<RingElem>,
}

/// Coefficients in `t_var`, ascending. The generator relation must not
/// involve `t_var`.
fn coefficients_in(f: &RingElem, var: usize) -> Vec<RingElem> {
    let ring = f.ring();
    f.numerator()
        .coefficients_in(var)
        .into_iter()
        .map(|p| RingElem::from_parts(ring, p, f.z_denominator(), f.d_denominator()).simplify())
        .collect()
}

fn relation_free_of(ring: &crate::ring::Ring, var: usize) -> bool {
    ring.extension()
        .is_none_or(|e| e.relation.degree_in(var).unwrap_or(0) == 0)
}

impl DivisorData {
    pub fn new(h: RingElem, n: usize) -> Result<DivisorData, LogvfError> {
        let ring = h.ring().clone();
        if n == 0 || !relation_free_of(&ring, n - 1) {
            return Err(LogvfError::NotMonic);
        }
        let h = h.clear_denominators().unwrap_or(h);
        let mut coeffs = coefficients_in(&h, n - 1);
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.len() != n + 1 || coeffs[n] != ring.one() {
            return Err(LogvfError::NotMonic);
        }
        Ok(DivisorData { h, n, coeffs })
    }

    /// Coefficients of `h` in `t_n`, ascending.
    pub fn coefficients(&self) -> &[RingElem] {
        &self.coeffs
    }

    /// `s_1` in `h = t_n^n − s_1 t_n^{n−1} + …`.
    pub fn s1(&self) -> RingElem {
        self.coeffs[self.n - 1].neg()
    }

    /// `f / h` when `h` divides `f` exactly, by long division in `t_n`.
    pub fn divide(&self, f: &RingElem) -> Option<RingElem> {
        let ring = self.h.ring();
        if f.is_zero() {
            return Some(ring.zero());
        }
        let n = self.n;
        let mut rem = coefficients_in(f, n - 1);
        if rem.len() <= n {
            return None;
        }
        let mut quot = vec![ring.zero(); rem.len() - n];
        for k in (0..quot.len()).rev() {
            let q = rem[k + n].clone();
            if q.is_zero() {
                continue;
            }
            for (j, c) in self.coeffs.iter().enumerate() {
                rem[k + j] = rem[k + j].sub(&q.mul(c));
            }
            quot[k] = q;
        }
        if !rem[..n].iter().all(|r| r.is_zero()) {
            return None;
        }
        let tn = ring.var(n - 1);
        let mut out = ring.zero();
        for q in quot.iter().rev() {
            out = out.mul(&tn).add(q);
        }
        Some(out.simplify())
    }
}

/// `h = det(−T)`.
pub fn discriminant(m: &SaitoMatrices) -> Result<DivisorData, LogvfError> {
    DivisorData::new(m.t.neg().det(), m.n())
}

/// `V h = Σ_j V_j ∂h/∂t_j`.
pub fn apply_field(v: &[RingElem], h: &RingElem) -> RingElem {
    v.par_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(j, c)| c.mul(&h.partial(j)))
        .reduce(|| h.ring().zero(), |a, b| a.add(&b))
        .simplify()
}

pub fn is_logarithmic(v: &[RingElem], d: &DivisorData) -> bool {
    d.divide(&apply_field(v, &d.h)).is_some()
}

/// `c` with `det(M_V) = c·h`, or `None` when no nonzero constant works.
pub fn saito_criterion(mv: &RMatrix, d: &DivisorData) -> Result<Option<Rational>, LogvfError> {
    for i in 0..mv.n() {
        if !is_logarithmic(&mv.row(i), d) {
            return Err(LogvfError::RowNotLogarithmic(i + 1));
        }
    }
    let det = mv.det();
    Ok(det.ratio_if_constant(&d.h).filter(|c| !c.is_zero()))
}

/// Outcome of the logarithmic-vector-field identities; each flag names one
/// identity, `failures` lists the failed ones.
#[derive(Clone, Debug, Serialize)]
pub struct LogvfReport {
    pub euler_row: bool,
    pub v1_h_equals_nh: bool,
    pub vi_h_over_h: Vec<bool>,
    pub weight_duality: bool,
    pub trace_identity: bool,
    pub failures: Vec<String>,
}

impl LogvfReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Rows of `M = −T` encode `V_{n+1−i} = Σ_j M_ij ∂_j`; checks the Euler
/// row, `V_1 h = n h`, `V_i h / h = −∂s_1/∂t_{n−i+1}`, the weight duality
/// and `(row k of −T) h = (−1)^{n+1} tr B̃^(k) h`.
pub fn logvf_identities(m: &SaitoMatrices, d: &DivisorData) -> LogvfReport {
    let n = m.n();
    let ring = m.ring();
    let w = &m.binf;
    let mv = m.t.neg();
    let mut failures = Vec::new();

    let euler_row = (0..n).all(|j| *mv.get(n - 1, j) == ring.var(j).scale(&w[j]));
    if !euler_row {
        failures.push("row n of -T is the Euler field".to_string());
    }
    let nn = Rational::from_integer((n as i64).into());
    let v1 = apply_field(&mv.row(n - 1), &d.h) == d.h.scale(&nn);
    if !v1 {
        failures.push("V_1 h = n h".to_string());
    }
    let s1 = d.s1();
    let vi: Vec<bool> = (2..=n)
        .into_par_iter()
        .map(|i| {
            let row = mv.row(n - i);
            match d.divide(&apply_field(&row, &d.h)) {
                Some(q) => q == s1.partial(n - i).neg(),
                None => false,
            }
        })
        .collect();
    for (k, ok) in vi.iter().enumerate() {
        if !ok {
            failures.push(format!("V_{} h / h = -ds_1/dt_{}", k + 2, n - k - 1));
        }
    }
    let weight_duality = (0..n).all(|i| {
        (0..n).all(|j| {
            let e = mv.get(i, j);
            e.is_zero() || e.is_homogeneous(&(Rational::one() - &w[i] + &w[j]))
        })
    });
    if !weight_duality {
        failures.push("w(t_i) + w(V_{n-i+1}) = 1".to_string());
    }
    let sign = if n % 2 == 1 {
        Rational::one()
    } else {
        -Rational::one()
    };
    let trace_identity = (0..n).into_par_iter().all(|k| {
        let lhs = apply_field(&mv.row(k), &d.h);
        let rhs = m.btilde[k].trace().mul(&d.h).scale(&sign);
        lhs == rhs
    });
    if !trace_identity {
        failures.push("V_k h = (-1)^(n+1) tr B~(k) h".to_string());
    }
    LogvfReport {
        euler_row,
        v1_h_equals_nh: v1,
        vi_h_over_h: vi,
        weight_duality,
        trace_identity,
        failures,
    }
}

/// `h` is weighted homogeneous of weight `n`.
pub fn discriminant_weight_ok(d: &DivisorData) -> bool {
    d.h.is_homogeneous(&Rational::from_integer((d.n as i64).into()))
}

//! Clearing `D = ∂rel/∂z` denominators by a weighted-homogeneous ansatz.
//!
//! An element `num / (z^a D^b)` often has a polynomial representative
//! `q / z^a`; finding it is a finite rational linear system over the
//! monomials of the right weight.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Monomial, Poly, Rational, Ring, RingElem};

/// All exponent vectors over `weights` (positive integers) with weighted
/// degree `target`, the last slot bounded by `z_bound` (exclusive).
fn monomials_of_weight(weights: &[i64], target: i64, z_bound: u32) -> Vec<Vec<u32>> {
    fn rec(
        weights: &[i64],
        slot: usize,
        left: i64,
        z_bound: u32,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if slot == weights.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let w = weights[slot];
        let last = slot == weights.len() - 1;
        if w == 0 {
            // unused slot
            cur.push(0);
            rec(weights, slot + 1, left, z_bound, cur, out);
            cur.pop();
            return;
        }
        let mut e = 0u32;
        while (e as i64) * w <= left {
            if last && e >= z_bound {
                break;
            }
            cur.push(e);
            rec(weights, slot + 1, left - (e as i64) * w, z_bound, cur, out);
            cur.pop();
            e += 1;
        }
    }
    let mut out = Vec::new();
    rec(weights, 0, target, z_bound, &mut Vec::new(), &mut out);
    out
}

/// Solve `Σ_k x_k cols[k] = rhs` exactly; `None` if inconsistent.
/// Free variables are set to zero.
pub fn solve_sparse(cols: &[Poly], rhs: &Poly) -> Option<Vec<Rational>> {
    let mut index: HashMap<Monomial, usize> = HashMap::new();
    let mut rows: Vec<BTreeMap<usize, Rational>> = Vec::new();
    let mut b: Vec<Rational> = Vec::new();
    let mut row_of =
        |m: &Monomial, rows: &mut Vec<BTreeMap<usize, Rational>>, b: &mut Vec<Rational>| -> usize {
            *index.entry(m.clone()).or_insert_with(|| {
                rows.push(BTreeMap::new());
                b.push(Rational::zero());
                rows.len() - 1
            })
        };
    for (k, col) in cols.iter().enumerate() {
        for (m, c) in col.terms() {
            let r = row_of(m, &mut rows, &mut b);
            rows[r].insert(k, c.clone());
        }
    }
    for (m, c) in rhs.terms() {
        let r = row_of(m, &mut rows, &mut b);
        b[r] = c.clone();
    }
    let ncols = cols.len();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut used = vec![false; rows.len()];
    for col in 0..ncols {
        // sparsest unused row with an entry in this column
        let Some(pr) = (0..rows.len())
            .filter(|&r| !used[r] && rows[r].contains_key(&col))
            .min_by_key(|&r| rows[r].len())
        else {
            continue;
        };
        used[pr] = true;
        let inv = rows[pr][&col].recip();
        let prow: Vec<(usize, Rational)> = rows[pr].iter().map(|(k, v)| (*k, v * &inv)).collect();
        let pb = &b[pr] * &inv;
        rows[pr] = prow.iter().cloned().collect();
        b[pr] = pb.clone();
        for r in 0..rows.len() {
            if r == pr {
                continue;
            }
            let Some(f) = rows[r].get(&col).cloned() else {
                continue;
            };
            for (k, v) in &prow {
                let e = rows[r].entry(*k).or_insert_with(Rational::zero);
                *e -= &f * v;
                if e.is_zero() {
                    rows[r].remove(k);
                }
            }
            let delta = &f * &pb;
            b[r] -= delta;
        }
        pivots.push((pr, col));
    }
    for r in 0..rows.len() {
        if !used[r] && !b[r].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rational::zero(); ncols];
    for (r, col) in pivots {
        x[col] = b[r].clone();
    }
    Some(x)
}

fn lcm_of_denoms(ws: &[Rational]) -> BigInt {
    ws.iter().fold(BigInt::one(), |acc, w| acc.lcm(w.denom()))
}

impl RingElem {
    /// An equal element without `D` in the denominator, when one exists.
    pub fn clear_d(&self) -> Option<RingElem> {
        if self.dpow == 0 {
            return Some(self.clone());
        }
        self.solve_for_numerator(self.zpow)
    }

    /// `q / z^keep` equal to `self`, found among the weighted-homogeneous
    /// numerators of the right weight.
    fn solve_for_numerator(&self, keep: u32) -> Option<RingElem> {
        let ring = &self.ring;
        let e = ring.extension()?;
        let mut ws = ring.slot_weights();
        if ws.iter().any(|w| !w.is_positive()) {
            return None;
        }
        let target = self.weight()? + e.z_weight.clone() * Rational::from_integer(keep.into());
        ws.push(target.clone());
        let l = lcm_of_denoms(&ws);
        let scaled: Vec<i64> = ws
            .iter()
            .map(|w| {
                (w * Rational::from_integer(l.clone()))
                    .to_integer()
                    .to_i64()
                    .unwrap()
            })
            .collect();
        let (slot_w, tgt) = scaled.split_at(scaled.len() - 1);
        if tgt[0] < 0 {
            return None;
        }
        let mons = monomials_of_weight(slot_w, tgt[0], e.z_degree);
        let n = ring.nvars();
        // self = num / (z^a D^b) = q / z^keep  ⇔  q · z^(a−keep) · D^b = num
        let mut factor = ring.dpow(self.dpow);
        if self.zpow > keep {
            let mut zp = vec![0; n + 1];
            zp[n] = self.zpow - keep;
            factor = ring.reduce(factor.mul_monomial(&Monomial(zp)));
        }
        let cols: Vec<Poly> = mons
            .iter()
            .map(|m| ring.reduce(factor.mul_monomial(&Monomial(m.clone()))))
            .collect();
        let x = solve_sparse(&cols, &self.num)?;
        let mut q = Poly::zero(n);
        for (m, c) in mons.into_iter().zip(x) {
            q = q.add(&Poly::monomial(n, Monomial(m), c));
        }
        Some(RingElem::normalized(ring, q, keep, 0))
    }

    /// An equal element with no denominator at all, when one exists.
    pub fn clear_denominators(&self) -> Option<RingElem> {
        if self.is_polynomial() {
            return Some(self.clone());
        }
        self.solve_for_numerator(0)
    }

    /// `clear_d` when possible, otherwise the element itself.
    pub fn simplify(&self) -> RingElem {
        self.clear_d().unwrap_or_else(|| self.clone())
    }

    /// `c` with `self = c · other`, if `c` is a rational constant.
    pub fn ratio_if_constant(&self, other: &RingElem) -> Option<Rational> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Rational::zero());
        }
        let a = self.zpow.max(other.zpow);
        let b = self.dpow.max(other.dpow);
        let x = self.lifted(a, b);
        let y = other.lifted(a, b);
        let (m, cy) = y.terms().next_back()?;
        let c = x.coeff(m) / cy;
        x.sub(&y.scale(&c)).is_zero().then_some(c)
    }
}

impl Ring {
    /// Substitute `t_i → s_i t_i` in a polynomial-ring element.
    pub fn rescale(&self, f: &RingElem, s: &[Rational]) -> Option<RingElem> {
        if self.has_extension() {
            return None;
        }
        let n = self.nvars();
        let mut out = Poly::zero(n);
        for (m, c) in f.num.terms() {
            let mut c = c.clone();
            for (i, e) in m.0[..n].iter().enumerate() {
                c *= num_traits::pow(s[i].clone(), *e as usize);
            }
            out = out.add(&Poly::monomial(n, m.clone(), c));
        }
        Some(RingElem::from_poly(self, out))
    }
}

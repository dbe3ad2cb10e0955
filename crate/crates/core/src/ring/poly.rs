//! Sparse multivariate polynomials over the rationals.
//!
//! Every polynomial carries `n + 1` exponent slots: `t_1..t_n` followed by
//! the extension generator `z`. Plain polynomial rings simply never use the
//! last slot.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Parse a rational from `"a"` or `"a/b"`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().ok()?;
            let b: BigInt = b.trim().parse().ok()?;
            if b.is_zero() {
                None
            } else {
                Some(Rational::new(a, b))
            }
        }
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    // numer/denom may each overflow f64 while the quotient does not
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            let shift = r.denom().bits() as i64 - 60;
            let scaled = if shift > 0 {
                Rational::new(r.numer() >> (shift as usize), r.denom() >> (shift as usize))
            } else {
                r.clone()
            };
            scaled.numer().to_f64().unwrap_or(f64::NAN)
                / scaled.denom().to_f64().unwrap_or(f64::NAN)
        }
    }
}

/// Exponent vector. The last entry is the exponent of `z`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars + 1])
    }

    pub fn var(nvars: usize, idx: usize, power: u32) -> Self {
        let mut m = Self::one(nvars);
        m.0[idx] = power;
        m
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn z_exp(&self) -> u32 {
        *self.0.last().unwrap()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    // graded lexicographic, z most significant, then t_1, t_2, ...
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.z_exp().cmp(&other.z_exp()))
            .then_with(|| {
                let k = self.0.len() - 1;
                self.0[..k].cmp(&other.0[..k])
            })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polynomial in `t_1..t_n, z` with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(nvars), c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rational::one())
    }

    /// `t_idx` for `idx < nvars`, `z` for `idx == nvars`.
    pub fn var(nvars: usize, idx: usize) -> Self {
        Self::monomial(nvars, Monomial::var(nvars, idx, 1), Rational::one())
    }

    pub fn monomial(nvars: usize, m: Monomial, c: Rational) -> Self {
        assert_eq!(m.0.len(), nvars + 1);
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending canonical order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.total_degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, s: &Rational) -> Poly {
        if s.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut acc: std::collections::HashMap<Monomial, Rational> =
            std::collections::HashMap::with_capacity(self.len() * other.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let c = ca * cb;
                acc.entry(m).and_modify(|e| *e += &c).or_insert(c);
            }
        }
        Poly {
            nvars: self.nvars,
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut result = Poly::one(self.nvars);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Formal partial derivative with respect to slot `idx` (z is `nvars`).
    pub fn partial(&self, idx: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[idx];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.0[idx] -= 1;
            out.terms
                .insert(m2, c * Rational::from_integer(BigInt::from(e)));
        }
        out
    }

    pub fn degree_in(&self, idx: usize) -> Option<u32> {
        self.terms.keys().map(|m| m.0[idx]).max()
    }

    /// Coefficients of `self` as a polynomial in slot `idx`: entry `k`
    /// holds the coefficient of `x_idx^k` (with that slot zeroed).
    pub fn coefficients_in(&self, idx: usize) -> Vec<Poly> {
        let deg = match self.degree_in(idx) {
            Some(d) => d as usize,
            None => return Vec::new(),
        };
        let mut out = vec![Poly::zero(self.nvars); deg + 1];
        for (m, c) in &self.terms {
            let k = m.0[idx] as usize;
            let mut m2 = m.clone();
            m2.0[idx] = 0;
            out[k].terms.insert(m2, c.clone());
        }
        out
    }

    /// Weighted degree of each term under `weights` (one per slot).
    pub fn term_weights<'a>(
        &'a self,
        weights: &'a [Rational],
    ) -> impl Iterator<Item = Rational> + 'a {
        self.terms.keys().map(move |m| {
            m.0.iter()
                .zip(weights)
                .fold(Rational::zero(), |acc, (e, w)| {
                    acc + w * Rational::from_integer(BigInt::from(*e))
                })
        })
    }

    /// Smallest exponent of slot `idx` over all terms (0 for the zero polynomial).
    pub fn min_exponent(&self, idx: usize) -> u32 {
        self.terms.keys().map(|m| m.0[idx]).min().unwrap_or(0)
    }

    /// Divide every term by `x_idx^k`; caller guarantees `k <= min_exponent(idx)`.
    pub fn shift_down(&self, idx: usize, k: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut m2 = m.clone();
                    m2.0[idx] -= k;
                    (m2, c.clone())
                })
                .collect(),
        }
    }

    /// Substitute exact rationals for the slots in `values` (slot, value).
    pub fn substitute(&self, values: &[(usize, Rational)]) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            let mut c2 = c.clone();
            for (idx, v) in values {
                let e = m2.0[*idx];
                if e > 0 {
                    c2 *= num_traits::pow(v.clone(), e as usize);
                    m2.0[*idx] = 0;
                }
            }
            out.add_term(m2, c2);
        }
        out
    }

    /// Numeric evaluation at `t` (length nvars) and `z`.
    pub fn eval(&self, t: &[Complex64], z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = Complex64::new(rat_to_f64(c), 0.0);
            for (i, e) in m.0.iter().enumerate() {
                if *e > 0 {
                    let base = if i < self.nvars { t[i] } else { z };
                    v *= base.powu(*e);
                }
            }
            acc += v;
        }
        acc
    }

    /// Remainder of division by `divisor`, treated as a polynomial in slot
    /// `idx` whose leading coefficient (in that slot) is a nonzero rational.
    pub fn rem_monic_in(&self, divisor: &Poly, idx: usize) -> Poly {
        self.div_rem_monic_in(divisor, idx).1
    }

    /// Quotient and remainder of division by `divisor` in slot `idx`. The
    /// divisor's leading coefficient in that slot must be a rational
    /// constant; the coefficients of the other slots may be arbitrary.
    pub fn div_rem_monic_in(&self, divisor: &Poly, idx: usize) -> (Poly, Poly) {
        let d = divisor.degree_in(idx).expect("nonzero divisor");
        let coeffs = divisor.coefficients_in(idx);
        let lead = coeffs[d as usize]
            .as_constant()
            .filter(|c| !c.is_zero())
            .expect("divisor leading coefficient must be a nonzero rational");
        let inv_lead = lead.recip();
        // tail = -(divisor - lead*x^d)/lead
        let mut tail = divisor.clone();
        tail.terms.retain(|m, _| m.0[idx] != d);
        let tail = tail.scale(&(-inv_lead.clone()));

        let mut rem = self.clone();
        let mut quot = Poly::zero(self.nvars);
        loop {
            let top = match rem.degree_in(idx) {
                Some(e) if e >= d => e,
                _ => break,
            };
            let mut high = Poly::zero(self.nvars);
            let mut keep = BTreeMap::new();
            for (m, c) in std::mem::take(&mut rem.terms) {
                if m.0[idx] == top {
                    let mut m2 = m;
                    m2.0[idx] = top - d;
                    high.terms.insert(m2, c);
                } else {
                    keep.insert(m, c);
                }
            }
            rem.terms = keep;
            // high * x^(top-d) * x^d  ==  high * x^(top-d) * tail  (mod divisor)
            let q_part = high.scale(&inv_lead);
            quot = quot.add(&q_part);
            rem = rem.add(&high.mul(&tail));
        }
        (quot, rem)
    }

    pub fn max_abs_coeff_bits(&self) -> u64 {
        self.terms
            .values()
            .map(|c| c.numer().bits().max(c.denom().bits()))
            .max()
            .unwrap_or(0)
    }

    /// Render with the given variable names (length nvars + 1).
    pub fn to_string_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || m.total_degree() == 0 {
                factors.push(format_rational(&abs));
            }
            // z first, then t_1..t_n, matching the term order
            let k = m.0.len() - 1;
            let order = std::iter::once(k).chain(0..k);
            for idx in order {
                let e = m.0[idx];
                match e {
                    0 => {}
                    1 => factors.push(names[idx].clone()),
                    _ => factors.push(format!("{}^{}", names[idx], e)),
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn default_names(nvars: usize) -> Vec<String> {
    (1..=nvars)
        .map(|i| format!("t{i}"))
        .chain(std::iter::once("z".to_string()))
        .collect()
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_string_with(&default_names(self.nvars)))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_string_with(&default_names(self.nvars)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: usize) -> Poly {
        Poly::var(3, i)
    }

    #[test]
    fn zero_prints_as_zero() {
        assert_eq!(Poly::zero(3).to_string(), "0");
    }

    #[test]
    fn lowest_terms() {
        let p = t(0).scale(&rat(2, 4));
        assert_eq!(p.to_string(), "1/2*t1");
    }

    #[test]
    fn monomial_rule() {
        let p = t(0).mul(&t(2));
        assert_eq!(p.partial(2), t(0));
        assert!(p.partial(1).is_zero());
    }

    #[test]
    fn division_in_slot() {
        // (t3^3 + t1) mod (t3^2 - t2) = t2*t3 + t1
        let a = t(2).pow(3).add(&t(0));
        let b = t(2).pow(2).sub(&t(1));
        let (q, r) = a.div_rem_monic_in(&b, 2);
        assert_eq!(r, t(1).mul(&t(2)).add(&t(0)));
        assert_eq!(q.mul(&b).add(&r), a);
    }

    #[test]
    fn ordering_is_graded() {
        let p = t(0).add(&t(2).pow(2)).add(&Poly::one(3));
        let degs: Vec<u32> = p.terms().map(|(m, _)| m.total_degree()).collect();
        assert_eq!(degs, vec![0, 1, 2]);
    }

    #[test]
    fn huge_rational_to_f64() {
        let big = Rational::new(BigInt::from(10).pow(400) * 3, BigInt::from(10).pow(400));
        assert!((rat_to_f64(&big) - 3.0).abs() < 1e-12);
    }
}

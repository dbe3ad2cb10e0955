//! Weighted polynomial rings over ℚ, optionally extended by one algebraic
//! generator `z` subject to a weighted-homogeneous relation.
//!
//! Elements are stored as `num / (z^a · D^b)` with `D = ∂rel/∂z`, the only
//! denominators that implicit differentiation (and catalog data written
//! with powers of `z` in the denominator) can produce. The numerator is kept
//! reduced modulo the relation, so `deg_z(num) < z_degree`.

mod ansatz;
mod numeric;
pub mod poly;

use std::fmt;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use thiserror::Error;

pub use ansatz::solve_sparse;
pub use numeric::{CompiledElem, PathTracker};
pub use poly::{format_rational, parse_rational, rat, rat_to_f64, Monomial, Poly, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("derivative of the relation is a zero divisor modulo the relation")]
    DivisionNotExact,
    #[error("Newton iteration for the extension root did not converge")]
    RootNotConverged,
    #[error("roots of the relation collide (separation {separation:.3e})")]
    RootCollision { separation: f64 },
    #[error("invalid extension: {0}")]
    BadExtension(String),
    #[error("point has {found} coordinates, ring has {expected}")]
    Arity { expected: usize, found: usize },
}

pub struct Extension {
    pub gen: String,
    pub relation: Poly,
    pub z_weight: Rational,
    pub z_degree: u32,
    d: Poly,
    d_z: Poly,
    rel_t: Vec<Poly>,
    d_t: Vec<Poly>,
    dpows: RwLock<Vec<Poly>>,
}

pub struct RingData {
    n: usize,
    weights: Vec<Rational>,
    names: Vec<String>,
    ext: Option<Extension>,
}

/// Shared ring handle; cheap to clone.
#[derive(Clone)]
pub struct Ring(Arc<RingData>);

impl fmt::Debug for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ring(n={}, weights=[", self.0.n)?;
        let w: Vec<String> = self.0.weights.iter().map(format_rational).collect();
        write!(f, "{}]", w.join(", "))?;
        if let Some(e) = &self.0.ext {
            write!(f, ", {} = 0", e.relation.to_string_with(&self.0.names))?;
        }
        write!(f, ")")
    }
}

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.n == other.0.n
                && self.0.weights == other.0.weights
                && match (&self.0.ext, &other.0.ext) {
                    (None, None) => true,
                    (Some(a), Some(b)) => a.relation == b.relation && a.z_weight == b.z_weight,
                    _ => false,
                })
    }
}

impl Ring {
    pub fn new(weights: Vec<Rational>) -> Ring {
        let n = weights.len();
        Ring(Arc::new(RingData {
            n,
            weights,
            names: poly::default_names(n),
            ext: None,
        }))
    }

    /// Ring with generator `gen` of weight `z_weight` satisfying `relation = 0`.
    /// The relation is a polynomial in the `n + 1` slots whose leading
    /// coefficient in `z` is a nonzero rational.
    pub fn with_extension(
        weights: Vec<Rational>,
        gen: &str,
        z_weight: Rational,
        relation: Poly,
    ) -> Result<Ring, RingError> {
        let n = weights.len();
        if relation.nvars() != n {
            return Err(RingError::BadExtension("relation arity".into()));
        }
        let z_degree = relation
            .degree_in(n)
            .filter(|&d| d > 0)
            .ok_or_else(|| RingError::BadExtension("relation does not involve z".into()))?;
        let lead = relation.coefficients_in(n)[z_degree as usize].as_constant();
        if !matches!(&lead, Some(c) if !c.is_zero()) {
            return Err(RingError::BadExtension(
                "leading coefficient in z must be a nonzero rational".into(),
            ));
        }
        let mut all_w = weights.clone();
        all_w.push(z_weight.clone());
        let tw: Vec<Rational> = relation.term_weights(&all_w).collect();
        if tw.windows(2).any(|p| p[0] != p[1]) {
            return Err(RingError::BadExtension(
                "relation is not weighted homogeneous".into(),
            ));
        }
        let d = relation.partial(n);
        let d_z = d.partial(n);
        let rel_t: Vec<Poly> = (0..n).map(|i| relation.partial(i)).collect();
        let d_t: Vec<Poly> = (0..n).map(|i| d.partial(i)).collect();
        if is_degenerate(&relation, n) {
            return Err(RingError::DivisionNotExact);
        }
        let mut names = poly::default_names(n);
        names[n] = gen.to_string();
        Ok(Ring(Arc::new(RingData {
            n,
            weights,
            names,
            ext: Some(Extension {
                gen: gen.to_string(),
                relation,
                z_weight,
                z_degree,
                d_z,
                rel_t,
                d_t,
                dpows: RwLock::new(vec![Poly::one(n), d.clone()]),
                d,
            }),
        })))
    }

    pub fn nvars(&self) -> usize {
        self.0.n
    }

    pub fn weights(&self) -> &[Rational] {
        &self.0.weights
    }

    pub fn names(&self) -> &[String] {
        &self.0.names
    }

    pub fn extension(&self) -> Option<&Extension> {
        self.0.ext.as_ref()
    }

    pub fn has_extension(&self) -> bool {
        self.0.ext.is_some()
    }

    /// Weights of all slots, `z` last (0 when there is no extension).
    pub fn slot_weights(&self) -> Vec<Rational> {
        let mut w = self.0.weights.clone();
        w.push(
            self.0
                .ext
                .as_ref()
                .map(|e| e.z_weight.clone())
                .unwrap_or_else(Rational::zero),
        );
        w
    }

    /// Weight of `D = ∂rel/∂z`.
    pub fn d_weight(&self) -> Rational {
        match &self.0.ext {
            Some(e) => {
                let all = self.slot_weights();
                let w = e.relation.term_weights(&all).next().unwrap();
                w - e.z_weight.clone()
            }
            None => Rational::zero(),
        }
    }

    pub fn zero(&self) -> RingElem {
        RingElem::from_poly(self, Poly::zero(self.0.n))
    }

    pub fn one(&self) -> RingElem {
        RingElem::from_poly(self, Poly::one(self.0.n))
    }

    pub fn constant(&self, c: Rational) -> RingElem {
        RingElem::from_poly(self, Poly::constant(self.0.n, c))
    }

    /// `t_{i+1}` (0-based index).
    pub fn var(&self, i: usize) -> RingElem {
        assert!(i < self.0.n);
        RingElem::from_poly(self, Poly::var(self.0.n, i))
    }

    pub fn gen(&self) -> Option<RingElem> {
        self.0
            .ext
            .as_ref()
            .map(|_| RingElem::from_poly(self, Poly::var(self.0.n, self.0.n)))
    }

    pub fn reduce(&self, p: Poly) -> Poly {
        match &self.0.ext {
            Some(e) if p.degree_in(self.0.n).unwrap_or(0) >= e.z_degree => {
                p.rem_monic_in(&e.relation, self.0.n)
            }
            _ => p,
        }
    }

    fn dpow(&self, k: u32) -> Poly {
        let e = self.0.ext.as_ref().expect("extension");
        let k = k as usize;
        {
            let cache = e.dpows.read().unwrap();
            if k < cache.len() {
                return cache[k].clone();
            }
        }
        let mut cache = e.dpows.write().unwrap();
        while cache.len() <= k {
            let next = self.reduce(cache.last().unwrap().mul(&e.d));
            cache.push(next);
        }
        cache[k].clone()
    }

    fn zpow_mul(&self, p: &Poly, k: u32) -> Poly {
        if k == 0 {
            return p.clone();
        }
        self.reduce(p.mul_monomial(&Monomial::var(self.0.n, self.0.n, k)))
    }

    /// Coefficients of the relation in `z` (ascending) at a numeric point.
    pub fn relation_coeffs_at(&self, t: &[Complex64]) -> Option<Vec<Complex64>> {
        let e = self.0.ext.as_ref()?;
        let zero = Complex64::new(0.0, 0.0);
        Some(
            e.relation
                .coefficients_in(self.0.n)
                .iter()
                .map(|c| c.eval(t, zero))
                .collect(),
        )
    }

    /// Newton-refine `seed` to a root of the relation at `t`, and check that
    /// no other root lies within `separation`.
    pub fn solve_z(
        &self,
        t: &[Complex64],
        seed: Complex64,
        separation: f64,
    ) -> Result<Complex64, RingError> {
        if t.len() != self.0.n {
            return Err(RingError::Arity {
                expected: self.0.n,
                found: t.len(),
            });
        }
        let Some(coeffs) = self.relation_coeffs_at(t) else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        let z = numeric::newton_root(&coeffs, seed).ok_or(RingError::RootNotConverged)?;
        let roots = crate::linalg::poly_roots(&coeffs);
        let mut dists: Vec<f64> = roots.iter().map(|r| (r - z).norm()).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if let Some(&second) = dists.get(1) {
            if second < separation {
                return Err(RingError::RootCollision { separation: second });
            }
        }
        Ok(z)
    }

    pub fn tracker(&self) -> PathTracker {
        PathTracker::new(self.clone())
    }
}

/// `rel` has a repeated factor in `z` at three generic rational points.
fn is_degenerate(rel: &Poly, n: usize) -> bool {
    let samples: [i64; 3] = [3, 7, 11];
    samples.iter().all(|&s| {
        let values: Vec<(usize, Rational)> = (0..n)
            .map(|i| (i, rat(s * (i as i64 + 2) + 1, (i as i64) + 3)))
            .collect();
        let u = rel.substitute(&values);
        let coeffs: Vec<Rational> = u
            .coefficients_in(n)
            .iter()
            .map(|c| c.as_constant().unwrap())
            .collect();
        let du: Vec<Rational> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * Rational::from_integer(BigInt::from(k)))
            .collect();
        univariate_gcd_degree(coeffs, du) > 0
    })
}

fn trim(v: &mut Vec<Rational>) {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
}

fn univariate_gcd_degree(mut a: Vec<Rational>, mut b: Vec<Rational>) -> usize {
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        // a mod b
        let lb = b.last().unwrap().clone();
        while a.len() >= b.len() {
            let q = a.last().unwrap() / &lb;
            let shift = a.len() - b.len();
            for (k, c) in b.iter().enumerate() {
                a[k + shift] -= &q * c;
            }
            a.pop();
            trim(&mut a);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a.len().saturating_sub(1)
}

/// Element `num / (z^zpow · D^dpow)` of a [`Ring`].
#[derive(Clone)]
pub struct RingElem {
    ring: Ring,
    num: Poly,
    zpow: u32,
    dpow: u32,
}

impl RingElem {
    pub fn from_poly(ring: &Ring, p: Poly) -> RingElem {
        Self::normalized(ring, p, 0, 0)
    }

    /// Build `num / (z^zpow · D^dpow)`; the numerator is reduced first.
    pub fn from_parts(ring: &Ring, num: Poly, zpow: u32, dpow: u32) -> RingElem {
        Self::normalized(ring, num, zpow, dpow)
    }

    fn normalized(ring: &Ring, num: Poly, mut zpow: u32, dpow: u32) -> RingElem {
        let mut num = ring.reduce(num);
        if num.is_zero() {
            return RingElem {
                ring: ring.clone(),
                num,
                zpow: 0,
                dpow: 0,
            };
        }
        let n = ring.nvars();
        let common = num.min_exponent(n).min(zpow);
        if common > 0 {
            num = num.shift_down(n, common);
            zpow -= common;
        }
        RingElem {
            ring: ring.clone(),
            num,
            zpow,
            dpow,
        }
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn z_denominator(&self) -> u32 {
        self.zpow
    }

    pub fn d_denominator(&self) -> u32 {
        self.dpow
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.zpow == 0 && self.dpow == 0
    }

    /// Same representation, not just equal values.
    pub fn structurally_eq(&self, other: &RingElem) -> bool {
        self.num == other.num && self.zpow == other.zpow && self.dpow == other.dpow
    }

    fn lifted(&self, zpow: u32, dpow: u32) -> Poly {
        let mut p = self.ring.zpow_mul(&self.num, zpow - self.zpow);
        if dpow > self.dpow {
            p = self.ring.reduce(p.mul(&self.ring.dpow(dpow - self.dpow)));
        }
        p
    }

    fn combine(&self, other: &RingElem, negate: bool) -> RingElem {
        debug_assert!(self.ring == other.ring);
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return if negate { other.neg() } else { other.clone() };
        }
        let a = self.zpow.max(other.zpow);
        let b = self.dpow.max(other.dpow);
        let x = self.lifted(a, b);
        let y = other.lifted(a, b);
        let num = if negate { x.sub(&y) } else { x.add(&y) };
        Self::normalized(&self.ring, num, a, b)
    }

    pub fn add(&self, other: &RingElem) -> RingElem {
        self.combine(other, false)
    }

    pub fn sub(&self, other: &RingElem) -> RingElem {
        self.combine(other, true)
    }

    pub fn neg(&self) -> RingElem {
        RingElem {
            ring: self.ring.clone(),
            num: self.num.neg(),
            zpow: self.zpow,
            dpow: self.dpow,
        }
    }

    pub fn mul(&self, other: &RingElem) -> RingElem {
        if self.is_zero() || other.is_zero() {
            return self.ring.zero();
        }
        Self::normalized(
            &self.ring,
            self.num.mul(&other.num),
            self.zpow + other.zpow,
            self.dpow + other.dpow,
        )
    }

    pub fn scale(&self, c: &Rational) -> RingElem {
        Self::normalized(&self.ring, self.num.scale(c), self.zpow, self.dpow)
    }

    pub fn pow(&self, e: u32) -> RingElem {
        let mut out = self.ring.one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Divide by `z^k`.
    pub fn div_z_pow(&self, k: u32) -> RingElem {
        Self::normalized(&self.ring, self.num.clone(), self.zpow + k, self.dpow)
    }

    /// Total derivative with respect to `t_{var+1}`, applying
    /// `∂z/∂t = −(∂rel/∂t)/(∂rel/∂z)` to every occurrence of `z`.
    pub fn partial(&self, var: usize) -> RingElem {
        let ring = &self.ring;
        let n = ring.nvars();
        assert!(var < n, "partial: variable index out of range");
        let n_t = self.num.partial(var);
        let Some(e) = ring.extension() else {
            return Self::normalized(ring, n_t, 0, 0);
        };
        let r = &e.rel_t[var];
        let n_z = self.num.partial(n);
        let (a, b) = (self.zpow, self.dpow);
        if r.is_zero() {
            // z does not move in this direction
            return Self::normalized(ring, n_t, a, b);
        }
        let mut out = if n_z.is_zero() {
            Self::normalized(ring, n_t, a, b)
        } else {
            Self::normalized(ring, n_t.mul(&e.d).sub(&n_z.mul(r)), a, b + 1)
        };
        if a > 0 {
            let term = self.num.mul(r).scale(&Rational::from_integer(a.into()));
            out = out.add(&Self::normalized(ring, term, a + 1, b + 1));
        }
        if b > 0 {
            let dd = e.d_t[var].mul(&e.d).sub(&e.d_z.mul(r));
            let term = self
                .num
                .mul(&dd)
                .scale(&Rational::from_integer((-(b as i64)).into()));
            out = out.add(&Self::normalized(ring, term, a, b + 2));
        }
        out
    }

    /// `E f = Σ w_i t_i ∂f/∂t_i`.
    pub fn euler_apply(&self) -> RingElem {
        let ring = &self.ring;
        let mut acc = ring.zero();
        for (i, w) in ring.weights().iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let d = self.partial(i);
            if d.is_zero() {
                continue;
            }
            acc = acc.add(&d.mul(&ring.var(i)).scale(w));
        }
        acc
    }

    pub fn is_homogeneous(&self, w: &Rational) -> bool {
        self.euler_apply().sub(&self.scale(w)).is_zero()
    }

    /// Weighted degree read off the representation, if every numerator term
    /// has the same weight. `None` for zero or mixed weights.
    pub fn weight(&self) -> Option<Rational> {
        let all = self.ring.slot_weights();
        let mut it = self.num.term_weights(&all);
        let first = it.next()?;
        if it.any(|w| w != first) {
            return None;
        }
        let dz = self
            .ring
            .extension()
            .map(|e| e.z_weight.clone())
            .unwrap_or_else(Rational::zero);
        Some(
            first
                - dz * Rational::from_integer(self.zpow.into())
                - self.ring.d_weight() * Rational::from_integer(self.dpow.into()),
        )
    }

    /// Value at `t` with the extension generator set to `z`.
    pub fn eval(&self, t: &[Complex64], z: Complex64) -> Complex64 {
        let mut v = self.num.eval(t, z);
        if self.zpow > 0 {
            v /= z.powu(self.zpow);
        }
        if self.dpow > 0 {
            let d = self.ring.extension().unwrap().d.eval(t, z);
            v /= d.powu(self.dpow);
        }
        v
    }

    /// Value at `t`, solving the relation from `seed` by Newton iteration.
    pub fn eval_at(&self, t: &[Complex64], seed: Complex64) -> Result<Complex64, RingError> {
        let z = self.ring.solve_z(t, seed, 1e-9)?;
        Ok(self.eval(t, z))
    }

    pub fn compile(&self) -> CompiledElem {
        CompiledElem::new(self)
    }

    /// Text form accepted by the expression parser whenever the only
    /// denominator is a power of `z`.
    pub fn to_expr_string(&self) -> String {
        let names = self.ring.names();
        let body = self.num.to_string_with(names);
        if self.is_polynomial() {
            return body;
        }
        let mut den: Vec<String> = Vec::new();
        if self.zpow > 0 {
            let g = &names[self.ring.nvars()];
            den.push(if self.zpow == 1 {
                g.clone()
            } else {
                format!("{}^{}", g, self.zpow)
            });
        }
        if self.dpow > 0 {
            let d = self.ring.extension().unwrap().d.to_string_with(names);
            den.push(if self.dpow == 1 {
                format!("({d})")
            } else {
                format!("({d})^{}", self.dpow)
            });
        }
        let den = if den.len() == 1 && self.dpow == 0 {
            den.remove(0)
        } else {
            format!("({})", den.join("*"))
        };
        format!("({body})/{den}")
    }
}

impl PartialEq for RingElem {
    fn eq(&self, other: &Self) -> bool {
        self.structurally_eq(other) || self.sub(other).is_zero()
    }
}

impl fmt::Debug for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr_string())
    }
}

impl fmt::Display for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr_string())
    }
}

/// `Σ_i coeffs[i] · t_i` style helpers used across modules.
pub fn linear_combination(ring: &Ring, terms: &[(Rational, RingElem)]) -> RingElem {
    terms
        .iter()
        .fold(ring.zero(), |acc, (c, e)| acc.add(&e.scale(c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn klein() -> (Ring, RingElem) {
        let ring = Ring::new(vec![rat(2, 7), rat(3, 7), rat(1, 1)]);
        let (t1, t2, t3) = (ring.var(0), ring.var(1), ring.var(2));
        let g1 = t1
            .pow(3)
            .mul(&t2)
            .scale(&rat(-2, 1))
            .add(&t2.pow(3))
            .add(&t1.mul(&t3).scale(&rat(12, 1)))
            .scale(&rat(1, 12));
        (ring, g1)
    }

    fn h3p() -> Ring {
        // t2 + t1 z + z^4
        let n = 3;
        let rel = Poly::var(n, 1)
            .add(&Poly::var(n, 0).mul(&Poly::var(n, 3)))
            .add(&Poly::var(n, 3).pow(4));
        Ring::with_extension(vec![rat(3, 5), rat(4, 5), rat(1, 1)], "z", rat(1, 5), rel).unwrap()
    }

    #[test]
    fn klein_g1_unit_derivative() {
        let (ring, g1) = klein();
        assert_eq!(g1.partial(2), ring.var(0));
    }

    #[test]
    fn klein_g1_homogeneous() {
        let (_, g1) = klein();
        assert_eq!(g1.euler_apply(), g1.scale(&rat(9, 7)));
        assert!(g1.is_homogeneous(&rat(9, 7)));
        assert!(!g1.is_homogeneous(&rat(1, 1)));
    }

    #[test]
    fn euler_of_generator() {
        let ring = h3p();
        let z = ring.gen().unwrap();
        assert_eq!(z.euler_apply(), z.scale(&rat(1, 5)));
    }

    #[test]
    fn implicit_derivative_matches_closed_form() {
        // ∂z/∂t2 = −1/(t1 + 4z³) = −1/D
        let ring = h3p();
        let z = ring.gen().unwrap();
        let dz = z.partial(1);
        let expected = RingElem::from_parts(&ring, Poly::constant(3, rat(-1, 1)), 0, 1);
        assert_eq!(dz, expected);
    }

    #[test]
    fn reduction_is_idempotent() {
        let ring = h3p();
        let z = ring.gen().unwrap();
        let p = z.pow(7).add(&ring.var(0));
        let again = RingElem::from_parts(
            &ring,
            p.numerator().clone(),
            p.z_denominator(),
            p.d_denominator(),
        );
        assert!(p.structurally_eq(&again));
        assert!(p.numerator().degree_in(3).unwrap() < 4);
    }

    #[test]
    fn zero_is_homogeneous_of_every_weight() {
        let (ring, _) = klein();
        assert!(ring.zero().is_homogeneous(&rat(5, 3)));
    }

    #[test]
    fn mixed_weight_not_homogeneous() {
        let (ring, _) = klein();
        let f = ring.var(0).add(&ring.var(2));
        for w in [rat(2, 7), rat(1, 1), rat(9, 7)] {
            assert!(!f.is_homogeneous(&w));
        }
    }

    #[test]
    fn degenerate_relation_rejected() {
        // (z - t1)^2
        let n = 2;
        let d = Poly::var(n, 2).sub(&Poly::var(n, 0));
        let rel = d.mul(&d);
        let err = Ring::with_extension(vec![rat(1, 2), rat(1, 1)], "z", rat(1, 2), rel).err();
        assert_eq!(err, Some(RingError::DivisionNotExact));
    }

    #[test]
    fn eval_klein_and_root() {
        let (ring, g1) = klein();
        let one = Complex64::new(1.0, 0.0);
        let v = g1.eval(&[one, one, one], Complex64::new(0.0, 0.0));
        assert!((v - Complex64::new(11.0 / 12.0, 0.0)).norm() < 1e-15);
        let tt = ring.var(0).mul(&ring.var(2));
        let v = tt.eval(
            &[one, Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)],
            one,
        );
        assert!((v.re - 2.0).abs() < 1e-15);

        let ring = h3p();
        let z = ring.gen().unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let v = z
            .eval_at(&[one, zero, zero], Complex64::new(0.05, 0.0))
            .unwrap();
        assert!(v.norm() < 1e-14);
    }
}

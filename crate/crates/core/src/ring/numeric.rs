use num_complex::Complex64;

use super::{rat_to_f64, Poly, Ring, RingElem, RingError};
use crate::linalg::{horner, min_separation, poly_roots};

/// Newton iteration on a univariate polynomial (ascending coefficients).
pub(crate) fn newton_root(coeffs: &[Complex64], seed: Complex64) -> Option<Complex64> {
    let mut x = seed;
    let scale: f64 = coeffs.iter().map(|c| c.norm()).sum::<f64>().max(1e-300);
    for _ in 0..100 {
        let (p, dp) = horner(coeffs, x);
        if dp.norm() == 0.0 {
            return None;
        }
        let step = p / dp;
        x -= step;
        if !x.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    let (p, _) = horner(coeffs, x);
    (p.norm() <= 1e-9 * scale * (1.0 + x.norm()).powi(coeffs.len() as i32)).then_some(x)
}

/// f64 copy of a polynomial for repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
    nvars: usize,
}

impl CompiledPoly {
    pub fn new(p: &Poly) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let exps =
                    m.0.iter()
                        .enumerate()
                        .filter(|(_, e)| **e > 0)
                        .map(|(i, e)| (i, *e))
                        .collect();
                (rat_to_f64(c), exps)
            })
            .collect();
        CompiledPoly {
            terms,
            nvars: p.nvars(),
        }
    }

    pub fn eval(&self, t: &[Complex64], z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, exps) in &self.terms {
            let mut v = Complex64::new(*c, 0.0);
            for &(i, e) in exps {
                let base = if i < self.nvars { t[i] } else { z };
                v *= if e == 1 { base } else { base.powu(e) };
            }
            acc += v;
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct CompiledElem {
    num: CompiledPoly,
    zpow: u32,
    dpow: u32,
    d: Option<CompiledPoly>,
}

impl CompiledElem {
    pub fn new(e: &RingElem) -> Self {
        CompiledElem {
            num: CompiledPoly::new(e.numerator()),
            zpow: e.z_denominator(),
            dpow: e.d_denominator(),
            d: (e.d_denominator() > 0).then(|| CompiledPoly::new(&e.ring().extension().unwrap().d)),
        }
    }

    pub fn eval(&self, t: &[Complex64], z: Complex64) -> Complex64 {
        let mut v = self.num.eval(t, z);
        if self.zpow > 0 {
            v /= z.powu(self.zpow);
        }
        if let Some(d) = &self.d {
            v /= d.eval(t, z).powu(self.dpow);
        }
        v
    }
}

/// Continuation of one root of the relation along a sequence of points.
pub struct PathTracker {
    ring: Ring,
    pub separation: f64,
    pub max_halvings: u32,
}

impl PathTracker {
    pub fn new(ring: Ring) -> Self {
        PathTracker {
            ring,
            separation: 1e-9,
            max_halvings: 20,
        }
    }

    fn step_ok(&self, t: &[Complex64], from: Complex64) -> Result<Option<Complex64>, RingError> {
        let coeffs = self.ring.relation_coeffs_at(t).unwrap();
        let roots = poly_roots(&coeffs);
        let sep = min_separation(&roots);
        if sep < self.separation {
            return Err(RingError::RootCollision { separation: sep });
        }
        let Some(z) = newton_root(&coeffs, from) else {
            return Ok(None);
        };
        // accept only if Newton stayed in the basin of the nearest root
        let nearest = roots
            .iter()
            .min_by(|a, b| (*a - from).norm().partial_cmp(&(*b - from).norm()).unwrap())
            .copied()
            .unwrap();
        if (nearest - z).norm() > 1e-6 * (1.0 + z.norm()) || (z - from).norm() > 0.25 * sep {
            return Ok(None);
        }
        Ok(Some(z))
    }

    /// Track the root starting at `seed` (refined at `points[0]`).
    pub fn track(
        &self,
        points: &[Vec<Complex64>],
        seed: Complex64,
    ) -> Result<Vec<Complex64>, RingError> {
        if !self.ring.has_extension() {
            return Ok(vec![Complex64::new(0.0, 0.0); points.len()]);
        }
        let Some(first) = points.first() else {
            return Ok(Vec::new());
        };
        let mut z = self.ring.solve_z(first, seed, self.separation)?;
        let mut out = vec![z];
        for w in points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let mut pieces = 1u32;
            'refine: loop {
                let mut zz = z;
                for k in 1..=pieces {
                    let s = k as f64 / pieces as f64;
                    let p: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + (y - x) * s).collect();
                    match self.step_ok(&p, zz)? {
                        Some(next) => zz = next,
                        None => {
                            if pieces >= 1 << self.max_halvings {
                                return Err(RingError::RootNotConverged);
                            }
                            pieces *= 2;
                            continue 'refine;
                        }
                    }
                }
                z = zz;
                break;
            }
            out.push(z);
        }
        Ok(out)
    }
}

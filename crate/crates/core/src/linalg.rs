//! Dense complex linear algebra used by the numeric layers.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn diag(values: &[Complex64]) -> CMat {
    CMat::from_diagonal(&CVec::from_row_slice(values))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

pub fn det(m: &CMat) -> Complex64 {
    m.clone().determinant()
}

/// Eigen-decomposition `m = P diag(λ) P⁻¹` via complex Schur form and
/// back-substitution. Columns of `P` have unit norm.
pub fn eig(m: &CMat) -> (Vec<Complex64>, CMat) {
    let n = m.nrows();
    let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, 200 * n.max(1)) else {
        return eig_fallback(m);
    };
    let (q, t) = schur.unpack();
    let lambda: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = max_abs(&t).max(1e-300);
    let mut p = CMat::zeros(n, n);
    for k in 0..n {
        let mut x = CVec::zeros(n);
        x[k] = cr(1.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lambda[k];
            if d.norm() < 1e-14 * scale {
                d = cr(1e-14 * scale);
            }
            x[i] = -s / d;
        }
        let v = &q * x;
        let nv = v.norm();
        p.set_column(k, &(v / cr(nv)));
    }
    (lambda, p)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Numerical rank: singular values above `rel_tol` times the largest.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel_tol * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis (columns) of the null space, using singular values
/// below `rel_tol` times the largest.
pub fn null_space(m: &CMat, rel_tol: f64) -> CMat {
    let (r, c) = m.shape();
    // pad to square so that V is complete
    let mut sq = CMat::zeros(r.max(c), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = SVD::new(sq, false, true);
    let vt = svd.v_t.unwrap();
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cols: Vec<CVec> = (0..c)
        .filter(|&k| svd.singular_values[k] <= rel_tol * top.max(1e-300))
        .map(|k| vt.row(k).adjoint())
        .collect();
    if cols.is_empty() {
        CMat::zeros(c, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Least-cost assignment (Hungarian algorithm): returns `perm` with
/// `perm[i]` the column assigned to row `i`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}

/// Reorder `current` so that entry `i` is the one nearest to `previous[i]`.
pub fn match_to(previous: &[Complex64], current: &[Complex64]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = previous
        .iter()
        .map(|p| current.iter().map(|c| (p - c).norm()).collect())
        .collect();
    hungarian(&cost)
}

/// Ascending real part, ties by imaginary part.
pub fn sort_order(values: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        if (x.re - y.re).abs() > 1e-12 * (1.0 + x.re.abs()) {
            x.re.partial_cmp(&y.re).unwrap()
        } else {
            x.im.partial_cmp(&y.im).unwrap()
        }
    });
    idx
}

pub fn min_separation(values: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            best = best.min((values[i] - values[j]).norm());
        }
    }
    best
}

// Characteristic-polynomial route for the rare matrices on which the QR
// iteration stalls.
fn eig_fallback(m: &CMat) -> (Vec<Complex64>, CMat) {
    let n = m.nrows();
    // Faddeev–LeVerrier: det(xI − m) = Σ c_k x^k
    let mut coeffs = vec![cr(0.0); n + 1];
    coeffs[n] = cr(1.0);
    let mut mk = CMat::identity(n, n);
    for k in 1..=n {
        let am = m * &mk;
        let ck = -am.trace() / cr(k as f64);
        coeffs[n - k] = ck;
        mk = am + CMat::identity(n, n) * ck;
    }
    let lambda = poly_roots(&coeffs);
    let mut p = CMat::zeros(n, n);
    for (k, l) in lambda.iter().enumerate() {
        let shifted = m - CMat::identity(n, n) * *l;
        let svd = SVD::new(shifted, false, true);
        let vt = svd.v_t.expect("v_t requested");
        let (idx, _) =
            svd.singular_values
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, s)| {
                        if *s < acc.1 {
                            (i, *s)
                        } else {
                            acc
                        }
                    },
                );
        let v: CVec = vt.row(idx).adjoint();
        p.set_column(k, &(v.clone() / cr(v.norm())));
    }
    (lambda, p)
}

/// Roots of `Σ coeffs[k] x^k` (coefficients ascending) by Aberth–Ehrlich
/// iteration, polished by Newton steps.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut deg = coeffs.len().saturating_sub(1);
    while deg > 0 && coeffs[deg].norm() == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let a = &coeffs[..=deg];
    // initial guesses on a circle bounding the roots (Cauchy bound)
    let lead = a[deg].norm();
    let radius = 1.0 + a[..deg].iter().map(|c| c.norm() / lead).fold(0.0, f64::max);
    let r0 = a[..deg]
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| (c.norm() / lead).powf(1.0 / (deg - k) as f64))
        .fold(0.0, f64::max)
        .clamp(1e-8, radius);
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|k| {
            Complex64::from_polar(
                r0,
                2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64,
            )
        })
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = horner(a, roots[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| (roots[i] - roots[j]).inv())
                .sum();
            let w = ratio / (cr(1.0) - ratio * sum);
            if w.is_finite() {
                roots[i] -= w;
                moved = moved.max(w.norm() / roots[i].norm().max(1.0));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    for r in roots.iter_mut() {
        *r = newton_poly(&coeffs[..=deg], *r, 3);
    }
    roots
}

pub fn horner(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for a in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp)
}

fn newton_poly(coeffs: &[Complex64], mut x: Complex64, iters: usize) -> Complex64 {
    for _ in 0..iters {
        let (p, dp) = horner(coeffs, x);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !step.is_finite() {
            break;
        }
        let nx = x - step;
        if horner(coeffs, nx).0.norm() > p.norm() {
            break;
        }
        x = nx;
    }
    x
}

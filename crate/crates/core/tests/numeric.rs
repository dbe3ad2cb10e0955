use flatstruct::catalog::{catalog_get, CatalogEntry};
use flatstruct::flatcore::{
    build_saito_matrices, track_path, CompiledSaito, PathPoint, RMatrix, SaitoMatrices,
};
use flatstruct::isomono::{
    check_integrability, integrate_p6_hamiltonian, integrate_pfaffian, jm_build, okubo_normal_form,
    residue_decomposition, residue_family, residues_at, schlesinger_along_path,
    schlesinger_residual, HamiltonianState, IsoError, Rk4Options,
};
use flatstruct::linalg::{self, c, cr, CMat};
use flatstruct::midconv::{
    invariant_subspace_check, middle_convolution, truncate_okubo, truncate_with_derivatives,
    MidconvError,
};
use flatstruct::p6::{
    extract_p6_solution, p6_parameters, p6_residual, roots_of_h, samples_from_series,
    weights_complex, P6Error, P6Extraction, P6Params,
};
use flatstruct::ring::{rat, Ring};
use num_complex::Complex64;
use std::f64::consts::PI;

struct Setup {
    entry: CatalogEntry,
    m: SaitoMatrices,
    points: Vec<PathPoint>,
}

fn setup(id: &str) -> Setup {
    let entry = catalog_get(id).unwrap();
    let pvf = entry.potential().unwrap();
    let m = build_saito_matrices(&pvf);
    let points = track_path(
        pvf.ring(),
        &entry.default_path.points(),
        entry.default_path.seed(),
    )
    .unwrap();
    Setup { entry, m, points }
}

fn extract(s: &Setup, relabel: [usize; 3]) -> P6Extraction {
    let lambda = weights_complex(&s.m);
    extract_p6_solution(
        &s.m,
        &lambda,
        (1, 2),
        &s.points,
        s.entry.default_path.step(),
        relabel,
    )
    .unwrap()
}

fn at(t: [f64; 3]) -> PathPoint {
    PathPoint {
        t: t.iter().map(|&x| cr(x)).collect(),
        z: Complex64::default(),
    }
}

// ---- p6 ----

#[test]
fn roots_of_a_tprime_free_discriminant() {
    // −T = diag(t3 − 1, t3, t3 + 1), so h = t3³ − t3
    let r = Ring::new(vec![rat(1, 3), rat(2, 3), rat(1, 1)]);
    let t3 = r.var(2);
    let t = RMatrix::from_fn(&r, 3, |i, j| {
        if i == j {
            t3.add(&r.constant(rat(i as i64 - 1, 1))).neg()
        } else {
            r.zero()
        }
    });
    let m = SaitoMatrices {
        c: RMatrix::identity(&r, 3),
        btilde: vec![RMatrix::identity(&r, 3); 3],
        t,
        binf: r.weights().to_vec(),
    };
    for p in [at([0.0, 0.0, 0.0]), at([2.0, -1.5, 0.0])] {
        let roots = roots_of_h(&m, &p).unwrap();
        for (z, want) in roots.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((z - cr(want)).norm() < 1e-12, "{roots:?}");
        }
    }
}

#[test]
fn klein_roots_satisfy_vieta() {
    let s = setup("LT8");
    let d = flatstruct::logvf::discriminant(&s.m).unwrap();
    let p = at([1.0, 1.0, 0.0]);
    let roots = roots_of_h(&s.m, &p).unwrap();
    let coeff = |k: usize| d.coefficients()[k].eval(&p.t, p.z);
    let sum: Complex64 = roots.iter().sum();
    let prod: Complex64 = roots.iter().product();
    assert!((sum + coeff(2)).norm() < 1e-12);
    assert!((prod + coeff(0)).norm() < 1e-12);
}

#[test]
fn klein_parameters() {
    let s = setup("LT8");
    let p = p6_parameters(&s.m, &s.points[0], None).unwrap();
    assert!((p.thetainf - cr(-1.0 / 7.0)).norm() < 1e-14);
    let sum: Complex64 = p.r.iter().sum();
    assert!((sum - cr(-12.0 / 7.0)).norm() < 1e-12, "{sum}");
    assert!(p.is_consistent(1e-14));
    let q = p6_parameters(&s.m, s.points.last().unwrap(), None).unwrap();
    for (a, b) in p.r.iter().zip(&q.r) {
        assert!((a - b).norm() < 1e-8);
    }
}

#[test]
fn klein_path_samples_are_regular() {
    let ext = extract(&setup("LT8"), [0, 1, 2]);
    assert!(ext.samples.len() >= 20);
    for s in &ext.samples {
        assert!(s.y.is_finite());
        assert!(s.t.norm() > 1e-6 && (s.t - 1.0).norm() > 1e-6);
    }
    assert!(ext.max_trace_drift() < 1e-8);
}

#[test]
fn klein_pvi_residual() {
    let ext = extract(&setup("LT8"), [0, 1, 2]);
    let r = p6_residual(&ext.samples, &ext.params).unwrap();
    assert!(r < 1e-6, "{r:e}");
}

#[test]
fn cross_ratios_are_scaling_invariant() {
    let s = setup("LT8");
    let ext = extract(&s, [0, 1, 2]);
    // t_i → c^{7 w_i} t_i with c = 1.1
    let scale = [1.1f64.powi(2), 1.1f64.powi(3), 1.1f64.powi(7)];
    let scaled: Vec<PathPoint> = s
        .points
        .iter()
        .map(|p| PathPoint {
            t: p.t.iter().zip(scale).map(|(x, k)| x * k).collect(),
            z: p.z,
        })
        .collect();
    let lambda = weights_complex(&s.m);
    let ext2 = extract_p6_solution(
        &s.m,
        &lambda,
        (1, 2),
        &scaled,
        s.entry.default_path.step(),
        [0, 1, 2],
    )
    .unwrap();
    for (a, b) in ext.samples.iter().zip(&ext2.samples) {
        assert!((a.t - b.t).norm() < 1e-10);
        assert!((a.y - b.y).norm() < 1e-10);
    }
}

#[test]
fn relabeling_keeps_a_solution() {
    let s = setup("LT8");
    let base = extract(&s, [0, 1, 2]);
    let swapped = extract(&s, [1, 0, 2]);
    assert!((swapped.samples[5].t - base.samples[5].t).norm() > 1e-3);
    let r = p6_residual(&swapped.samples, &swapped.params).unwrap();
    assert!(r < 1e-6, "{r:e}");
}

fn sqrt_family(offset: f64) -> Vec<flatstruct::p6::P6Sample> {
    let h = 1e-3;
    let ts: Vec<Complex64> = (0..41).map(|k| cr(0.3 + k as f64 * h)).collect();
    let ys: Vec<Complex64> = ts.iter().map(|t| t.sqrt() + offset).collect();
    let points: Vec<Vec<Complex64>> = ts.iter().map(|t| vec![*t]).collect();
    samples_from_series(&points, &ts, &ys, h)
}

#[test]
fn square_root_solves_pvi_with_alpha_beta_gamma_zero() {
    // y = √t: y'' = −y/(4t²) matches the RHS exactly when α = β = γ = 0, δ = ½
    let params = P6Params::from_thetas([cr(0.0); 3], cr(1.0), [cr(0.0); 3]);
    assert_eq!(
        [params.alpha, params.beta, params.gamma, params.delta],
        [cr(0.0), cr(0.0), cr(0.0), cr(0.5)]
    );
    let r = p6_residual(&sqrt_family(0.0), &params).unwrap();
    assert!(r < 1e-6, "{r:e}");
    let perturbed = p6_residual(&sqrt_family(1e-3), &params).unwrap();
    assert!(perturbed > 1e-4, "{perturbed:e}");
}

#[test]
fn perturbed_klein_samples_fail() {
    let ext = extract(&setup("LT8"), [0, 1, 2]);
    let ts: Vec<Complex64> = ext.samples.iter().map(|s| s.t).collect();
    let ys: Vec<Complex64> = ext.samples.iter().map(|s| s.y + 1e-3).collect();
    let points: Vec<Vec<Complex64>> = ext.samples.iter().map(|s| s.point.clone()).collect();
    let samples = samples_from_series(&points, &ts, &ys, ext.samples[1].s - ext.samples[0].s);
    assert!(p6_residual(&samples, &ext.params).unwrap() > 1e-4);
}

#[test]
fn too_few_samples() {
    let params = P6Params::from_thetas([cr(0.1); 3], cr(0.5), [cr(0.0); 3]);
    assert_eq!(
        p6_residual(&sqrt_family(0.0)[..4], &params),
        Err(P6Error::InsufficientSamples(4))
    );
}

// ---- isomono ----

#[test]
fn rank_one_residue() {
    let ok = residue_decomposition(
        &CMat::from_element(1, 1, cr(-0.7)),
        Vec::new(),
        &[cr(0.4)],
        None,
    )
    .unwrap();
    assert!((ok.residues[0][(0, 0)] + 0.4).norm() < 1e-15);
    assert!((ok.traces[0] + 0.4).norm() < 1e-15);
}

#[test]
fn residues_sum_to_minus_binf_and_have_rank_one() {
    for id in ["LT8", "H3", "LT30", "H3p"] {
        let s = setup(id);
        let cs = CompiledSaito::new(&s.m);
        let lambda = weights_complex(&s.m);
        for p in s.points.iter().step_by(8) {
            let ok = residues_at(&cs, p, &lambda, None).unwrap();
            assert!(ok.sum_defect() < 1e-12, "{id}: {:e}", ok.sum_defect());
            for b in &ok.residues {
                let sv = linalg::singular_values(b);
                assert!(sv[1] / sv[0] < 1e-9, "{id}: {sv:?}");
            }
        }
    }
}

#[test]
fn integrability_and_shift_invariance() {
    let s = setup("LT8");
    let rep = check_integrability(&s.m, &rat(0, 1));
    assert!(rep.ok(), "{:?}", rep.failures);
    assert_eq!(check_integrability(&s.m, &rat(3, 4)), rep);
    let pert =
        flatstruct::exprio::parse_pvf(include_str!("fixtures/perturbed_klein.json")).unwrap();
    let bad = check_integrability(&build_saito_matrices(&pert), &rat(0, 1));
    assert!(!bad.commute);
}

#[test]
fn nilpotent_constant_system() {
    let a = CMat::from_row_slice(2, 2, &[cr(0.0), c(2.0, 1.0), cr(0.0), cr(0.0)]);
    let s: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let sol = integrate_pfaffian(
        |_| a.clone(),
        &s,
        &CMat::identity(2, 2),
        Rk4Options::default(),
    )
    .unwrap();
    for (x, y) in s.iter().zip(&sol.y) {
        let want = CMat::identity(2, 2) + &a * cr(*x);
        assert!(linalg::max_abs(&(y - want)) < 1e-10);
    }
    assert!(sol.liouville_defect < 1e-6);
}

/// Fundamental solution of the Klein Okubo system around a circle.
fn klein_loop(center: Complex64, radius: f64) -> (CMat, Vec<Complex64>, Vec<Complex64>) {
    let s = setup("LT8");
    let cs = CompiledSaito::new(&s.m);
    let ok = residues_at(&cs, &s.points[20], &weights_complex(&s.m), None).unwrap();
    let conn = |u: f64| {
        let x = center + radius * Complex64::from_polar(1.0, 2.0 * PI * u);
        let dx = radius * Complex64::i() * 2.0 * PI * Complex64::from_polar(1.0, 2.0 * PI * u);
        ok.connection_at(x) * dx
    };
    let grid: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
    let sol =
        integrate_pfaffian(conn, &grid, &CMat::identity(3, 3), Rk4Options::default()).unwrap();
    assert!(sol.liouville_defect < 1e-6);
    (
        sol.y.last().unwrap().clone(),
        ok.z.clone(),
        ok.traces.clone(),
    )
}

#[test]
fn trivial_loop_has_trivial_monodromy() {
    let (_, z, _) = klein_loop(cr(0.0), 1.0);
    let far = z.iter().map(|p| p.norm()).fold(0.0, f64::max) + 5.0;
    let (mono, _, _) = klein_loop(cr(far), 1.0);
    assert!(linalg::max_abs(&(mono - CMat::identity(3, 3))) < 1e-8);
}

#[test]
fn loop_around_one_pole() {
    let (_, z, _) = klein_loop(cr(0.0), 1.0);
    let gap = (0..3)
        .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| (z[i] - z[j]).norm())
        .fold(f64::MAX, f64::min);
    let (mono, z, r) = klein_loop(z[0], gap / 3.0);
    let mut eig = linalg::eig(&mono).0;
    // expected spectrum exp(2πi{0, 0, r_1})
    let want = [cr(1.0), cr(1.0), (2.0 * PI * Complex64::i() * r[0]).exp()];
    for w in want {
        let k = (0..eig.len())
            .min_by(|&a, &b| (eig[a] - w).norm().total_cmp(&(eig[b] - w).norm()))
            .unwrap();
        assert!((eig[k] - w).norm() < 1e-6, "{eig:?} vs {want:?} at {z:?}");
        eig.remove(k);
    }
}

#[test]
fn schlesinger_examples() {
    let s = setup("LT8");
    let cs = CompiledSaito::new(&s.m);
    let lambda = weights_complex(&s.m);
    let ds = s.entry.default_path.step();
    let still = vec![residues_at(&cs, &s.points[0], &lambda, None).unwrap(); 7];
    assert!(schlesinger_residual(&still, ds).unwrap() < 1e-14);
    let along = schlesinger_along_path(
        &cs,
        &flatstruct::catalog::catalog_get("LT8")
            .unwrap()
            .potential()
            .unwrap()
            .ring()
            .clone(),
        &s.points,
        ds / 4.0,
        &lambda,
    )
    .unwrap();
    assert!(along < 1e-6, "{along:e}");
    let mut family = residue_family(&cs, &s.points, &lambda).unwrap();
    let frozen = family[0].residues[0].clone();
    for f in &mut family {
        f.residues[0] = frozen.clone();
    }
    assert!(schlesinger_residual(&family, ds).unwrap() > 1e-3);
    assert_eq!(
        schlesinger_residual(&family[..3], ds),
        Err(IsoError::InsufficientSnapshots(3))
    );
}

#[test]
fn okubo_normal_form_of_okubo_input() {
    let s = setup("LT8");
    let cs = CompiledSaito::new(&s.m);
    let lambda = weights_complex(&s.m);
    let ok = residues_at(&cs, &s.points[10], &lambda, None).unwrap();
    let form = okubo_normal_form(&ok.residues, &lambda, &ok.z).unwrap();
    for j in 0..3 {
        // columns parallel: |<u, v>| = |u||v|
        let (u, v) = (form.p.column(j), ok.p.column(j));
        let ip = u.dotc(&v).norm();
        assert!((ip - u.norm() * v.norm()).abs() < 1e-9 * u.norm() * v.norm());
    }
    assert!(linalg::max_abs(&(&form.p * &form.pinv - CMat::identity(3, 3))) < 1e-10);
}

#[test]
fn okubo_normal_form_of_random_rank_one_data() {
    let p = CMat::from_row_slice(
        2,
        2,
        &[c(0.3, 0.1), c(1.2, -0.4), c(-0.8, 0.5), c(0.6, 0.2)],
    );
    let pinv = linalg::inverse(&p).unwrap();
    let binf = [cr(1.0), cr(-0.5)];
    let d = linalg::diag(&binf);
    let residues: Vec<CMat> = (0..2).map(|i| -(p.column(i) * pinv.row(i)) * &d).collect();
    let form = okubo_normal_form(&residues, &binf, &[cr(0.0), cr(1.0)]).unwrap();
    assert!(linalg::max_abs(&(&form.p * &form.pinv - CMat::identity(2, 2))) < 1e-12);
    assert_eq!(
        okubo_normal_form(&residues, &[cr(1.0), cr(0.0)], &[cr(0.0), cr(1.0)]).unwrap_err(),
        IsoError::ZeroLambda
    );
}

fn jm_inputs() -> ([Complex64; 3], [Complex64; 2]) {
    let th = [c(0.21, 0.05), cr(0.33), c(-0.17, 0.1)];
    let k1 = c(0.4, -0.2);
    (th, [k1, -k1 - th[0] - th[1] - th[2]])
}

#[test]
fn jm_system_invariants() {
    let (th, ka) = jm_inputs();
    let (y, t) = (c(0.4, 0.3), c(0.6, -0.2));
    let sys = jm_build(y, c(0.7, -1.1), c(1.3, 0.4), th, ka, t).unwrap();
    assert!((sys.a0.trace() - th[0]).norm() < 1e-12);
    assert!((sys.a1.trace() - th[1]).norm() < 1e-12);
    assert!((sys.at.trace() - th[2]).norm() < 1e-12);
    let ainf = sys.a_inf();
    assert!(ainf[(0, 1)].norm() < 1e-10 && ainf[(1, 0)].norm() < 1e-10);
    assert!(sys.invariant_defect() < 1e-10);
    // the (1,2) entry of A(x) is k(x − y)/(x(x − 1)(x − t))
    assert!(sys.a_at(y)[(0, 1)].norm() < 1e-10);
    assert!(sys.a_at(c(2.0, 1.0))[(0, 1)].norm() > 1e-3);
}

#[test]
fn jm_build_rejects_bad_input() {
    let (th, _) = jm_inputs();
    let s: Complex64 = th.iter().sum();
    let equal = [-s / 2.0, -s / 2.0];
    assert_eq!(
        jm_build(c(0.4, 0.3), cr(1.0), cr(1.0), th, equal, cr(0.5)).unwrap_err(),
        IsoError::DegenerateTheta
    );
    let (th, ka) = jm_inputs();
    assert!(matches!(
        jm_build(cr(0.0), cr(1.0), cr(1.0), th, ka, cr(0.5)),
        Err(IsoError::PoleAtY(_))
    ));
    assert!(matches!(
        jm_build(cr(0.5), cr(1.0), cr(1.0), th, ka, cr(0.5)),
        Err(IsoError::PoleAtY(_))
    ));
}

#[test]
fn k_is_constant_when_theta_inf_is_one() {
    let th = [cr(0.2), cr(0.3), cr(0.1)];
    let k1 = (cr(1.0) - th.iter().sum::<Complex64>()) / 2.0;
    let ka = [k1, k1 - 1.0];
    let init = HamiltonianState {
        t: c(0.5, 0.5),
        y: c(0.3, 0.1),
        ztilde: c(0.2, -0.4),
        k: c(1.5, 0.0),
    };
    let path: Vec<Complex64> = (1..=10).map(|k| c(0.5 + 0.01 * k as f64, 0.5)).collect();
    let traj = integrate_p6_hamiltonian(th, ka, init, &path, Rk4Options::default()).unwrap();
    for s in traj {
        assert!((s.k - init.k).norm() < 1e-12);
    }
}

// ---- midconv ----

#[test]
fn single_pole_cannot_be_truncated() {
    let ok = residue_decomposition(
        &CMat::from_element(1, 1, cr(0.5)),
        Vec::new(),
        &[cr(0.0)],
        None,
    )
    .unwrap();
    assert_eq!(truncate_okubo(&ok).unwrap_err(), MidconvError::TooSmall(1));
}

#[test]
fn truncated_klein_snapshot() {
    let s = setup("LT8");
    let cs = CompiledSaito::new(&s.m);
    let w = weights_complex(&s.m);
    let shifted: Vec<Complex64> = w.iter().map(|l| l - w[2]).collect();
    let ok = residues_at(&cs, &s.points[20], &shifted, None).unwrap();
    let sys = truncate_okubo(&ok).unwrap();
    assert_eq!((sys.n, sys.residues[0].nrows()), (3, 2));
    let gi = sys.gamma_inf();
    assert!(
        (gi[(0, 0)] - (w[0] - w[2])).norm() < 1e-14 && (gi[(1, 1)] - (w[1] - w[2])).norm() < 1e-14
    );
    assert!(sys.sum_defect() < 1e-10);

    let orig = residues_at(&cs, &s.points[20], &w, None).unwrap();
    let out = middle_convolution(&sys, -w[2]).unwrap();
    for (a, b) in out.traces().iter().zip(&orig.traces) {
        assert!((a - b).norm() < 1e-8);
    }
    assert!(out.max_rank_ratio() < 1e-9);
    assert!(matches!(
        middle_convolution(&sys, gi[(0, 0)]),
        Err(MidconvError::ResonantLambda(_))
    ));
}

#[test]
fn invariant_subspaces_of_truncated_klein() {
    let s = setup("LT8");
    let cs = CompiledSaito::new(&s.m);
    let w = weights_complex(&s.m);
    let shifted: Vec<Complex64> = w.iter().map(|l| l - w[2]).collect();
    let ring = catalog_get("LT8")
        .unwrap()
        .potential()
        .unwrap()
        .ring()
        .clone();
    let base = s.points[20].clone();
    let snapshot = |x: &[Complex64], order: Option<&[Complex64]>| {
        let p = track_path(&ring, &[base.t.clone(), x.to_vec()], base.z)
            .unwrap()
            .pop()
            .unwrap();
        residues_at(&cs, &p, &shifted, order)
    };
    let sys = truncate_with_derivatives(snapshot, &base.t, 1e-3).unwrap();
    let samples = [c(3.0, 1.0), c(-2.0, 0.5), c(0.1, -2.5)];
    for lambda in [c(0.37, 0.0), c(-0.61, 0.2)] {
        let rep = invariant_subspace_check(&sys, lambda, &samples);
        assert_eq!((rep.dim_k, rep.dim_l, rep.expected_dim_k), (3, 0, 3));
        assert!(rep.derivatives_available);
        assert!(rep.max_defect < 1e-6, "{:e}", rep.max_defect);
    }
}

#[test]
fn two_pole_system_has_trivial_k() {
    let t = CMat::from_row_slice(2, 2, &[cr(0.4), cr(1.0), cr(0.3), cr(-0.9)]);
    let ok = residue_decomposition(&t, Vec::new(), &[cr(0.6), cr(0.0)], None).unwrap();
    let sys = truncate_okubo(&ok).unwrap();
    let rep = invariant_subspace_check(&sys, cr(0.25), &[c(2.0, 1.0)]);
    assert_eq!((rep.dim_k, rep.expected_dim_k), (0, 0));
}

#[test]
fn frozen_residue_traces() {
    // (id, r_i, θ∞) along each default path
    for (id, r, inf) in [
        ("LT8", -4.0 / 7.0, -1.0 / 7.0),
        ("H3", -0.6, -0.4),
        ("LT30", -0.5, -0.25),
    ] {
        let rep =
            flatstruct::catalog::catalog_verify(id, flatstruct::catalog::Depth::Numeric).unwrap();
        let p = rep.numeric.unwrap().params;
        assert!(
            p.r.iter().all(|x| (x - cr(r)).norm() < 1e-10),
            "{id}: {:?}",
            p.r
        );
        assert!((p.thetainf - cr(inf)).norm() < 1e-12);
        assert!((p.theta0 - cr(r + 1.0)).norm() < 1e-10);
    }
}

//! End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero
//! exit if any fails.

use flatstruct::catalog::{catalog_get, catalog_list, catalog_verify, Depth, VerifyReport};
use flatstruct::cli::random_jm_problem;
use flatstruct::exprio::{parse_expr, parse_pvf};
use flatstruct::flatcore::{
    build_saito_matrices, check_extended_wdvv, frobenius_check, track_path, CompiledSaito,
};
use flatstruct::isomono::{jm_roundtrip, residue_family, schlesinger_residual, Rk4Options};
use flatstruct::linalg::c;
use flatstruct::logvf::{discriminant, discriminant_weight_ok, logvf_identities, saito_criterion};
use flatstruct::p6::weights_complex;
use flatstruct::ring::rat;
use num_complex::Complex64;
use proptest::test_runner::{TestCaseError, TestRunner};
use std::time::{Duration, Instant};

mod common;
use common::*;

struct Outcome {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn a1() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for id in catalog_list() {
        let rep = check_extended_wdvv(&catalog_get(id).unwrap().potential().unwrap());
        let zero = rep.commutators.values().all(|m| m.is_zero());
        if !(rep.is_solution() && zero && rep.unit_ok && rep.homogeneity_ok) {
            bad.push(id);
        }
    }
    let dt = start.elapsed();
    verdict(
        bad.is_empty() && dt < Duration::from_secs(60),
        format!(
            "{} entries, failing {bad:?}, {:.2} s (limit 60 s)",
            catalog_list().len(),
            dt.as_secs_f64()
        ),
    )
}

fn a2() -> Outcome {
    let mut bad = Vec::new();
    for id in catalog_list() {
        let pvf = catalog_get(id).unwrap().potential().unwrap();
        let m = build_saito_matrices(&pvf);
        let ok = m.t_weights_ok()
            && discriminant(&m).is_ok_and(|d| {
                discriminant_weight_ok(&d)
                    && logvf_identities(&m, &d).ok()
                    && saito_criterion(&m.t.neg(), &d).ok().flatten() == Some(rat(1, 1))
            });
        if !ok {
            bad.push(id);
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "T_nj = -w_j t_j, monic h of weight n, V_k h identity, Saito c = 1; failing {bad:?}"
        ),
    )
}

fn a3() -> Outcome {
    let h3 = catalog_get("H3").unwrap().potential().unwrap();
    let want = parse_expr(
        h3.ring(),
        "(t2^2*t3 + t1*t3^2)/2 + t1^11/3960 + t1^5*t2^2/20 + t1^2*t2^3/6",
    )
    .unwrap();
    match frobenius_check(&h3) {
        Ok(Some(p)) => verdict(p.f == want, format!("F = {}", p.f.to_expr_string())),
        other => verdict(false, format!("{other:?}")),
    }
}

fn a4_a5_a7(reports: &[(String, VerifyReport, Duration)]) -> [Outcome; 3] {
    let mut lines = [Vec::new(), Vec::new(), Vec::new()];
    let mut ok = [true; 3];
    for (id, rep, dt) in reports {
        let Some(num) = &rep.numeric else {
            ok = [false; 3];
            lines[0].push(format!("{id}: {:?}", rep.errors));
            continue;
        };
        let pass4 = num.p6_residual < 1e-6
            && num.trace_drift < 1e-8
            && num.samples >= 20
            && *dt < Duration::from_secs(30);
        ok[0] &= pass4;
        lines[0].push(format!(
            "{id} {:.1e}/{:.1e}",
            num.p6_residual, num.trace_drift
        ));
        match &rep.full {
            Some(full) => {
                ok[1] &= full.schlesinger_residual < 1e-6;
                lines[1].push(format!("{id} {:.1e}", full.schlesinger_residual));
                let mc = &full.midconv;
                ok[2] &= mc.points >= 3
                    && mc.trace_error < 1e-8
                    && mc.inf_error < 1e-8
                    && mc.rank_ratio < 1e-9
                    && mc.subspace_defect < 1e-6;
                lines[2].push(format!(
                    "{id} {:.1e}/{:.1e}",
                    mc.trace_error, mc.subspace_defect
                ));
            }
            None => {
                ok[1] = false;
                ok[2] = false;
                lines[1].push(format!("{id}: {:?}", rep.errors));
            }
        }
    }
    let slowest = reports.iter().map(|r| r.2).max().unwrap_or_default();
    [
        verdict(
            ok[0],
            format!(
                "PVI residual/trace drift: {} (slowest {:.2} s, limit 30 s)",
                lines[0].join(", "),
                slowest.as_secs_f64()
            ),
        ),
        verdict(
            ok[1],
            format!("Schlesinger residual: {}", lines[1].join(", ")),
        ),
        verdict(
            ok[2],
            format!("trace error/subspace defect: {}", lines[2].join(", ")),
        ),
    ]
}

fn a6() -> Outcome {
    let mut worst = [0.0f64; 3];
    let mut errors = Vec::new();
    for seed in 0..20 {
        let (th, ka, init, t_end) = random_jm_problem(seed);
        match jm_roundtrip(th, ka, init, t_end, 41, Rk4Options::default()) {
            Ok(r) => {
                worst[0] = worst[0].max(r.schlesinger_residual);
                worst[1] = worst[1].max(r.p6_residual);
                worst[2] = worst[2].max(r.invariant_defect);
            }
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    verdict(
        errors.is_empty() && worst[0] < 1e-6 && worst[1] < 1e-6 && worst[2] < 1e-12,
        format!(
            "20 seeds: Schlesinger {:.1e}, PVI {:.1e}, invariants {:.1e} {errors:?}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn a8() -> Outcome {
    let pert = parse_pvf(include_str!("fixtures/perturbed_klein.json")).unwrap();
    let rep = check_extended_wdvv(&pert);
    let wdvv_fails = !rep.is_solution() && !rep.failing_commutators().is_empty();

    let entry = catalog_get("LT8").unwrap();
    let pvf = entry.potential().unwrap();
    let m = build_saito_matrices(&pvf);
    let points = track_path(
        pvf.ring(),
        &entry.default_path.points(),
        entry.default_path.seed(),
    )
    .unwrap();
    let mut family =
        residue_family(&CompiledSaito::new(&m), &points, &weights_complex(&m)).unwrap();
    let frozen = family[0].residues[0].clone();
    for f in &mut family {
        f.residues[0] = frozen.clone();
    }
    let r = schlesinger_residual(&family, entry.default_path.step()).unwrap();
    verdict(
        wdvv_fails && r > 1e-3,
        format!(
            "perturbed Klein commutators {:?}; frozen residue Schlesinger {r:.2e}",
            rep.failing_commutators()
        ),
    )
}

fn a9() -> Outcome {
    let cases = 1000;
    let mut fails = Vec::new();
    let mut check = |name: &str, res: Result<(), String>| {
        if let Err(e) = res {
            fails.push(format!("{name}: {e}"));
        }
    };
    let ring_pick = 0usize..2;
    let eq = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(TestCaseError::fail(what.to_string()))
        }
    };

    let mut runner = TestRunner::new(config(cases));
    check(
        "product rule",
        runner
            .run(
                &(terms(), terms(), ring_pick.clone(), 0usize..3),
                |(f, g, w, v)| {
                    let ring = &rings()[w];
                    let (f, g) = (build(ring, &f), build(ring, &g));
                    eq(
                        f.mul(&g).partial(v) == f.partial(v).mul(&g).add(&f.mul(&g.partial(v))),
                        "product rule",
                    )
                },
            )
            .map_err(|e| e.to_string()),
    );
    let mut runner = TestRunner::new(config(cases));
    check(
        "mixed partials",
        runner
            .run(
                &(terms(), ring_pick.clone(), 0usize..3, 0usize..3),
                |(f, w, i, j)| {
                    let f = build(&rings()[w], &f);
                    eq(
                        f.partial(i).partial(j) == f.partial(j).partial(i),
                        "mixed partials",
                    )
                },
            )
            .map_err(|e| e.to_string()),
    );
    let mut runner = TestRunner::new(config(cases));
    check(
        "parse∘serialize",
        runner
            .run(&(terms(), ring_pick.clone()), |(f, w)| {
                let ring = &rings()[w];
                let f = build(ring, &f);
                eq(
                    parse_expr(ring, &f.to_expr_string()).is_ok_and(|g| g.structurally_eq(&f)),
                    "round trip",
                )
            })
            .map_err(|e| e.to_string()),
    );
    let mut runner = TestRunner::new(config(cases));
    check(
        "eval homomorphism",
        runner
            .run(&(terms(), terms(), ring_pick, point()), |(f, g, w, p)| {
                let ring = &rings()[w];
                let (f, g) = (build(ring, &f), build(ring, &g));
                let t = [c(p[0], p[1]), c(p[2], 0.3), c(p[3], -0.2)];
                let z = if ring.has_extension() {
                    match ring.solve_z(&t, c(0.4, 0.4), 1e-9) {
                        Ok(z) => z,
                        Err(_) => return Ok(()),
                    }
                } else {
                    Complex64::default()
                };
                let (a, b) = (f.eval(&t, z), g.eval(&t, z));
                eq(
                    close(f.add(&g).eval(&t, z), a + b) && close(f.mul(&g).eval(&t, z), a * b),
                    "eval",
                )
            })
            .map_err(|e| e.to_string()),
    );
    verdict(
        fails.is_empty(),
        format!("4 properties x {cases} cases, fixed seed; failures {fails:?}"),
    )
}

fn main() {
    // the libtest flags cargo passes are irrelevant here
    let reports: Vec<(String, VerifyReport, Duration)> = catalog_list()
        .into_iter()
        .map(|id| {
            let start = Instant::now();
            let rep = catalog_verify(id, Depth::Full).unwrap();
            (id.to_string(), rep, start.elapsed())
        })
        .collect();
    let [a4, a5, a7] = a4_a5_a7(&reports);
    let results = [
        ("A1", a1()),
        ("A2", a2()),
        ("A3", a3()),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6()),
        ("A7", a7),
        ("A8", a8()),
        ("A9", a9()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{name} {} {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.ok);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

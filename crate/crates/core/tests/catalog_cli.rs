use flatstruct::catalog::{catalog_get, catalog_list, catalog_verify, CatalogError, Depth};
use flatstruct::cli::{run, EXIT_CHECK, EXIT_INPUT, EXIT_OK};
use flatstruct::ring::rat;
use std::process::Command;

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/fixtures/perturbed_klein.json"
);

fn cli(args: &[&str]) -> flatstruct::cli::Outcome {
    run(std::iter::once("flatstruct").chain(args.iter().copied()))
}

// ---- catalog ----

#[test]
fn eleven_unique_ids() {
    let ids = catalog_list();
    assert_eq!(
        ids,
        ["H3", "H3p", "H3pp", "LT8", "LT26", "LT27", "LT13", "LT14", "LT18", "LT19", "LT30"]
    );
    for id in ids {
        let e = catalog_get(id).unwrap();
        assert_eq!(e.id, id);
        assert!(e.default_path.is_valid(), "{id}");
        assert!(e.default_path.samples >= 20);
        assert_eq!(e.flags.has_extension, e.pvf.extension.is_some());
    }
}

#[test]
fn transcribed_data() {
    let lt8 = catalog_get("LT8").unwrap().potential().unwrap();
    assert_eq!(lt8.weights(), [rat(2, 7), rat(3, 7), rat(1, 1)]);
    let lt30 = catalog_get("LT30").unwrap().potential().unwrap();
    assert_eq!(lt30.weights(), [rat(1, 8), rat(3, 8), rat(1, 1)]);
    let h3p = catalog_get("H3p").unwrap();
    assert_eq!(
        h3p.pvf.extension.as_ref().unwrap().relation,
        "t2 + t1*z + z^4"
    );
    assert!(catalog_get("H3").unwrap().flags.has_prepotential);
}

#[test]
fn unknown_id() {
    assert!(matches!(
        catalog_get("unknown"),
        Err(CatalogError::UnknownId(_))
    ));
    assert!(matches!(
        catalog_verify("unknown", Depth::Symbolic),
        Err(CatalogError::UnknownId(_))
    ));
}

#[test]
fn h3_symbolic_verification() {
    let rep = catalog_verify("H3", Depth::Symbolic).unwrap();
    assert!(rep.passed(), "{:?}", rep.failures);
    assert_eq!(rep.symbolic.prepotential_matches, Some(true));
    assert_eq!(
        rep.symbolic
            .prepotential
            .as_deref()
            .map(|s| s.replace(' ', "")),
        Some(catalog_get("H3").unwrap().pvf.meta["F"].clone()).map(|f| {
            flatstruct::exprio::parse_expr(
                catalog_get("H3").unwrap().potential().unwrap().ring(),
                &f,
            )
            .unwrap()
            .to_expr_string()
            .replace(' ', "")
        })
    );
    assert!(rep.numeric.is_none());
}

#[test]
fn klein_numeric_verification() {
    let rep = catalog_verify("LT8", Depth::Numeric).unwrap();
    assert!(rep.passed(), "{:?} {:?}", rep.failures, rep.errors);
    let num = rep.numeric.unwrap();
    assert!(num.p6_residual < 1e-6);
    assert!(num.trace_drift < 1e-8);
    assert!(rep.full.is_none());
}

#[test]
fn algebraic_entries_check_stored_prepotential() {
    for id in ["H3p", "H3pp"] {
        let rep = catalog_verify(id, Depth::Symbolic).unwrap();
        assert!(rep.passed(), "{id}: {:?}", rep.failures);
        assert_eq!(rep.symbolic.prepotential_matches, Some(true), "{id}");
    }
}

// ---- cli ----

#[test]
fn verify_wdvv_exit_codes() {
    assert_eq!(cli(&["verify-wdvv", "--catalog", "LT8"]).code, EXIT_OK);
    let bad = cli(&["verify-wdvv", "--input", FIXTURE]);
    assert_eq!(bad.code, EXIT_CHECK);
    assert_eq!(
        bad.report["result"]["failing_commutators"][0],
        serde_json::json!([1, 2])
    );
    assert!(bad.summary.contains("(1, 2)"));
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_flatstruct");
    let ok = Command::new(bin)
        .args(["verify-wdvv", "--catalog", "LT8"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["passed"], true);
    let bad = Command::new(bin)
        .args(["verify-wdvv", "--input", FIXTURE])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let missing = Command::new(bin)
        .args(["verify-wdvv", "--catalog", "nope"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn catalog_list_verb() {
    let out = cli(&["catalog", "list"]);
    assert_eq!(out.code, EXIT_OK);
    let ids: Vec<&str> = out.report["result"]["ids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(ids, catalog_list());
}

#[test]
fn every_verb_passes_on_klein() {
    for verb in [
        "verify-wdvv",
        "saito",
        "logvf",
        "extract-p6",
        "params",
        "schlesinger",
        "midconv",
    ] {
        let out = cli(&[verb, "--catalog", "LT8"]);
        assert_eq!(out.code, EXIT_OK, "{verb}: {}", out.summary);
        assert_eq!(out.report["verb"], verb);
        assert_eq!(out.report["passed"], true);
    }
    assert_eq!(cli(&["jm-roundtrip"]).code, EXIT_OK);
}

#[test]
fn json_is_deterministic() {
    let a = cli(&["extract-p6", "--catalog", "LT8"]).report;
    let b = cli(&["extract-p6", "--catalog", "LT8"]).report;
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let a = cli(&["jm-roundtrip", "--seed", "5"]).report;
    let b = cli(&["jm-roundtrip", "--seed", "5"]).report;
    assert_eq!(a, b);
    assert_eq!(a["seed"], 5);
}

#[test]
fn input_errors() {
    assert_eq!(cli(&["verify-wdvv"]).code, EXIT_INPUT);
    assert_eq!(
        cli(&["verify-wdvv", "--catalog", "LT8", "--tol-residual", "0"]).code,
        EXIT_INPUT
    );
    assert_eq!(
        cli(&["extract-p6", "--catalog", "LT8", "--entry", "2,2"]).code,
        EXIT_INPUT
    );
    assert_eq!(cli(&["no-such-verb"]).code, EXIT_INPUT);
}

#[test]
fn tolerances_are_reported() {
    let out = cli(&["params", "--catalog", "LT8", "--tol-residual", "1e-7"]);
    assert_eq!(out.report["tolerances"]["residual"], 1e-7);
    assert_eq!(out.report["tolerances"]["symbolic"], "exact");
}

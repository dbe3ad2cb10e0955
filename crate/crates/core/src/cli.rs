//! Command-line front end. `run` parses arguments, executes one verb and
//! returns the exit code together with a JSON report and a short summary.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::catalog::{self, CatalogEntry, Depth, PathSpec, Tolerances, VerifyOptions};
use crate::exprio::PvfDocument;
use crate::flatcore::{
    build_saito_matrices, check_extended_wdvv_with, saito_relation_failures, track_path,
    CompiledSaito, PotentialVF,
};
use crate::isomono::{jm_roundtrip, schlesinger_along_path, HamiltonianState, Rk4Options};
use crate::linalg::c;
use crate::logvf::{discriminant, discriminant_weight_ok, logvf_identities, saito_criterion};
use crate::midconv::okubo_roundtrip;
use crate::p6::{extract_p6_solution, p6_parameters, p6_residual, weights_complex};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "flatstruct",
    version,
    about = "Verify flat structures, Okubo systems and their Painlevé VI reductions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    /// Catalog id to operate on.
    #[arg(long, global = true)]
    pub catalog: Option<String>,
    /// Potential vector field file (bare document or catalog-entry JSON).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Tolerance for PVI and Schlesinger residuals.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol_residual: f64,
    /// Tolerance for eigen/residue identities.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol_identity: f64,
    /// Sampling path file overriding the default path.
    #[arg(long, global = true)]
    pub path: Option<PathBuf>,
    /// Entry `i,j` of h·B^(3) used for PVI extraction.
    #[arg(long, global = true, default_value = "1,2", value_parser = parse_entry)]
    pub entry: (usize, usize),
    #[arg(long, global = true, default_value_t = 20231029)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Verb {
    /// Extended WDVV, unit and homogeneity checks.
    VerifyWdvv,
    /// Saito-structure relations.
    Saito,
    /// Discriminant and logarithmic vector fields.
    Logvf,
    /// Sample a PVI solution along the path.
    ExtractP6,
    /// PVI parameters at the middle of the path.
    Params,
    /// Schlesinger residual of the residue family along the path.
    Schlesinger,
    /// Middle-convolution round trip.
    Midconv,
    /// Hamiltonian PVI → rank-2 Fuchsian system round trip.
    JmRoundtrip {
        #[arg(long, default_value_t = 41)]
        samples: usize,
    },
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum CatalogAction {
    List,
    Verify {
        id: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value_t = DepthArg::Full)]
        depth: DepthArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DepthArg {
    Symbolic,
    Numeric,
    Full,
}

impl From<DepthArg> for Depth {
    fn from(d: DepthArg) -> Depth {
        match d {
            DepthArg::Symbolic => Depth::Symbolic,
            DepthArg::Numeric => Depth::Numeric,
            DepthArg::Full => Depth::Full,
        }
    }
}

fn parse_entry(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected i,j")?;
    let i = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let j = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    if i == j || !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err("need distinct i, j in 1..=3".into());
    }
    Ok((i, j))
}

/// Result of one invocation.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
    pub summary: String,
    /// `--json` target, if any.
    pub json_out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Numeric(String),
}

type Res<T> = Result<T, Failure>;

fn input<E: ToString>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn numeric<E: ToString>(e: E) -> Failure {
    Failure::Numeric(e.to_string())
}

struct Loaded {
    source: String,
    pvf: PotentialVF,
    path: Option<PathSpec>,
}

fn load(cli: &Cli) -> Res<Loaded> {
    let mut loaded = match (&cli.catalog, &cli.input) {
        (Some(id), None) => {
            let e = catalog::catalog_get(id).map_err(input)?;
            Loaded {
                source: format!("catalog:{id}"),
                pvf: e.potential().map_err(input)?,
                path: Some(e.default_path),
            }
        }
        (None, Some(file)) => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| input(format!("{}: {e}", file.display())))?;
            let (doc, path) = match serde_json::from_str::<CatalogEntry>(&text) {
                Ok(e) => (e.pvf, Some(e.default_path)),
                Err(_) => (PvfDocument::from_json(&text).map_err(input)?, None),
            };
            Loaded {
                source: file.display().to_string(),
                pvf: doc.to_pvf().map_err(input)?,
                path,
            }
        }
        (Some(_), Some(_)) => return Err(input("give either --catalog or --input, not both")),
        (None, None) => return Err(input("one of --catalog or --input is required")),
    };
    if let Some(file) = &cli.path {
        let text =
            std::fs::read_to_string(file).map_err(|e| input(format!("{}: {e}", file.display())))?;
        loaded.path = Some(serde_json::from_str(&text).map_err(input)?);
    }
    Ok(loaded)
}

fn require_path(l: &Loaded) -> Res<PathSpec> {
    let p = l
        .path
        .clone()
        .ok_or_else(|| input("no sampling path: pass --path"))?;
    if !p.is_valid() {
        return Err(input("invalid sampling path"));
    }
    if l.pvf.n() != 3 {
        return Err(input("path-based verbs need n = 3"));
    }
    Ok(p)
}

fn tolerances(cli: &Cli) -> Tolerances {
    Tolerances {
        identity: cli.tol_identity,
        residual: cli.tol_residual,
        ..Tolerances::default()
    }
}

fn cj(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// Parse `args` (including the program name) and run.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            Outcome {
                code,
                report: Value::Null,
                summary: e.to_string(),
                json_out: None,
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Outcome {
    let tol = tolerances(cli);
    let verb = verb_name(&cli.verb);
    let mut header = json!({
        "verb": verb,
        "tolerances": {
            "symbolic": "exact",
            "identity": tol.identity,
            "residual": tol.residual,
            "trace": tol.trace,
            "subspace": tol.subspace,
        },
        "seed": cli.seed,
    });
    let result = if tol.identity > 0.0 && tol.residual > 0.0 {
        dispatch(cli, &tol)
    } else {
        Err(input("tolerance overrides must be positive"))
    };
    let (code, body, summary) = match result {
        Ok((passed, body, summary)) => (if passed { EXIT_OK } else { EXIT_CHECK }, body, summary),
        Err(Failure::Input(m)) => (
            EXIT_INPUT,
            json!({"error": "input", "message": m}),
            format!("input error: {m}"),
        ),
        Err(Failure::Numeric(m)) => (
            EXIT_NUMERIC,
            json!({"error": "numeric", "message": m}),
            format!("numeric failure: {m}"),
        ),
    };
    header["passed"] = json!(code == EXIT_OK);
    header["exit_code"] = json!(code);
    header["result"] = body;
    Outcome {
        code,
        report: header,
        summary: format!("{verb}: {summary}"),
        json_out: cli.json.clone(),
    }
}

fn verb_name(v: &Verb) -> &'static str {
    match v {
        Verb::VerifyWdvv => "verify-wdvv",
        Verb::Saito => "saito",
        Verb::Logvf => "logvf",
        Verb::ExtractP6 => "extract-p6",
        Verb::Params => "params",
        Verb::Schlesinger => "schlesinger",
        Verb::Midconv => "midconv",
        Verb::JmRoundtrip { .. } => "jm-roundtrip",
        Verb::Catalog { .. } => "catalog",
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn dispatch(cli: &Cli, tol: &Tolerances) -> Res<(bool, Value, String)> {
    match &cli.verb {
        Verb::Catalog { action } => return catalog_cmd(cli, action, tol),
        Verb::JmRoundtrip { samples } => return jm_cmd(cli.seed, *samples, tol),
        _ => {}
    }
    let l = load(cli)?;
    let m = build_saito_matrices(&l.pvf);
    let src = json!(l.source);
    match &cli.verb {
        Verb::VerifyWdvv => {
            let w = check_extended_wdvv_with(&l.pvf, &m);
            let failing = w.failing_commutators();
            let ok = w.is_solution();
            let body = json!({
                "input": src,
                "unit": w.unit_ok,
                "homogeneity": w.homogeneity_ok,
                "saito_relations": w.saito_relations_ok,
                "flat_normalization": w.flat_normalization_ok,
                "failing_commutators": failing,
            });
            let mut s = verdict(ok).to_string();
            if !failing.is_empty() {
                s += &format!(", nonzero commutators at (p,q) = {failing:?}");
            }
            Ok((ok, body, s))
        }
        Verb::Saito => {
            let fails = saito_relation_failures(&m, &m.binf);
            let weights = m.t_weights_ok();
            let ok = fails.is_empty() && weights;
            Ok((
                ok,
                json!({"input": src, "failures": fails, "t_weights": weights}),
                verdict(ok).into(),
            ))
        }
        Verb::Logvf => {
            let d = discriminant(&m).map_err(|e| Failure::Input(e.to_string()))?;
            let rep = logvf_identities(&m, &d);
            let crit = saito_criterion(&m.t.neg(), &d);
            let c_str = match &crit {
                Ok(Some(c)) => json!(c.to_string()),
                Ok(None) => Value::Null,
                Err(e) => json!(e.to_string()),
            };
            let c_ok = matches!(&crit, Ok(Some(c)) if num_traits::One::is_one(c));
            let weight = discriminant_weight_ok(&d);
            let ok = rep.ok() && c_ok && weight;
            let body = json!({
                "input": src,
                "discriminant": d.h.to_string(),
                "discriminant_weight": weight,
                "identities": rep,
                "saito_criterion": c_str,
            });
            Ok((ok, body, verdict(ok).into()))
        }
        Verb::ExtractP6 | Verb::Params | Verb::Schlesinger | Verb::Midconv => {
            path_cmd(cli, &l, &m, tol, src)
        }
        Verb::JmRoundtrip { .. } | Verb::Catalog { .. } => unreachable!(),
    }
}

fn path_cmd(
    cli: &Cli,
    l: &Loaded,
    m: &crate::flatcore::SaitoMatrices,
    tol: &Tolerances,
    src: Value,
) -> Res<(bool, Value, String)> {
    let path = require_path(l)?;
    let ring = l.pvf.ring();
    let points = track_path(ring, &path.points(), path.seed()).map_err(numeric)?;
    let lambda = weights_complex(m);
    let ds = path.step();
    match &cli.verb {
        Verb::ExtractP6 => {
            let ext = extract_p6_solution(m, &lambda, cli.entry, &points, ds, [0, 1, 2])
                .map_err(numeric)?;
            let res = p6_residual(&ext.samples, &ext.params).map_err(numeric)?;
            let drift = ext.max_trace_drift();
            let ok = res < tol.residual && drift < tol.trace;
            let samples: Vec<Value> = ext
                .samples
                .iter()
                .map(|s| json!({"s": s.s, "t": cj(s.t), "y": cj(s.y), "residual": if s.residual.is_finite() { json!(s.residual) } else { Value::Null }}))
                .collect();
            let body = json!({
                "input": src,
                "entry": [cli.entry.0, cli.entry.1],
                "p6_residual": res,
                "trace_drift": drift,
                "min_root_separation": ext.min_root_separation,
                "params": ext.params,
                "samples": samples,
            });
            Ok((
                ok,
                body,
                format!(
                    "{} (residual {res:.3e}, trace drift {drift:.3e})",
                    verdict(ok)
                ),
            ))
        }
        Verb::Params => {
            let p = p6_parameters(m, &points[points.len() / 2], None).map_err(numeric)?;
            let ok = p.is_consistent(tol.identity);
            Ok((ok, json!({"input": src, "params": p}), verdict(ok).into()))
        }
        Verb::Schlesinger => {
            let cs = CompiledSaito::new(m);
            let r =
                schlesinger_along_path(&cs, ring, &points, ds / 4.0, &lambda).map_err(numeric)?;
            let ok = r < tol.residual;
            Ok((
                ok,
                json!({"input": src, "schlesinger_residual": r}),
                format!("{} (residual {r:.3e})", verdict(ok)),
            ))
        }
        Verb::Midconv => {
            let cs = CompiledSaito::new(m);
            let len = points.len();
            let rep = okubo_roundtrip(
                &cs,
                ring,
                &points,
                &[len / 4, len / 2, 3 * len / 4],
                &lambda,
            )
            .map_err(numeric)?;
            let fails = rep.failures(tol.identity, tol.trace, tol.subspace);
            let ok = fails.is_empty();
            Ok((
                ok,
                json!({"input": src, "roundtrip": rep, "failures": fails}),
                verdict(ok).into(),
            ))
        }
        _ => unreachable!(),
    }
}

/// Random admissible exponents and initial data, reproducible from `seed`.
pub fn random_jm_problem(
    seed: u64,
) -> ([Complex64; 3], [Complex64; 2], HamiltonianState, Complex64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let th = [
        c(r(0.1, 0.4), 0.0),
        c(r(0.1, 0.4), 0.0),
        c(r(0.1, 0.4), 0.0),
    ];
    let k1 = c(r(0.2, 0.8), 0.0);
    let k2 = -k1 - th[0] - th[1] - th[2];
    let init = HamiltonianState {
        t: c(0.5, 0.5),
        y: c(r(0.2, 0.8), r(-0.3, 0.3)),
        ztilde: c(r(-1.0, 1.0), r(-1.0, 1.0)),
        k: c(1.0, 0.0),
    };
    (th, [k1, k2], init, c(0.6, 0.55))
}

fn jm_cmd(seed: u64, samples: usize, tol: &Tolerances) -> Res<(bool, Value, String)> {
    let (th, ka, init, t_end) = random_jm_problem(seed);
    let r = jm_roundtrip(th, ka, init, t_end, samples, Rk4Options::default()).map_err(numeric)?;
    let ok = r.schlesinger_residual < tol.residual
        && r.p6_residual < tol.residual
        && r.invariant_defect < 1e-12;
    let body = json!({
        "thetas": th.iter().map(|x| cj(*x)).collect::<Vec<_>>(),
        "kappas": ka.iter().map(|x| cj(*x)).collect::<Vec<_>>(),
        "initial": init,
        "t_end": cj(t_end),
        "roundtrip": r,
    });
    let s = format!(
        "{} (Schlesinger {:.3e}, PVI {:.3e}, invariants {:.3e})",
        verdict(ok),
        r.schlesinger_residual,
        r.p6_residual,
        r.invariant_defect
    );
    Ok((ok, body, s))
}

fn catalog_cmd(cli: &Cli, action: &CatalogAction, tol: &Tolerances) -> Res<(bool, Value, String)> {
    match action {
        CatalogAction::List => {
            let ids = catalog::catalog_list();
            let s = ids.join(" ");
            Ok((true, json!({"ids": ids}), s))
        }
        CatalogAction::Verify { id, all, depth } => {
            let ids: Vec<String> = match (id.as_ref().or(cli.catalog.as_ref()), all) {
                (None, true) => catalog::catalog_list()
                    .into_iter()
                    .map(String::from)
                    .collect(),
                (Some(id), false) => vec![id.clone()],
                _ => return Err(input("give a catalog id or --all")),
            };
            let opts = VerifyOptions {
                depth: (*depth).into(),
                tolerances: tol.clone(),
                path: None,
                entry: cli.entry,
            };
            let reports = ids
                .par_iter()
                .map(|id| catalog::catalog_verify_with(id, &opts))
                .collect::<Result<Vec<_>, _>>()
                .map_err(input)?;
            let ok = reports.iter().all(|r| r.passed());
            let numeric_trouble = reports.iter().any(|r| !r.errors.is_empty());
            let lines: Vec<String> = reports
                .iter()
                .map(|r| {
                    format!(
                        "{} {}",
                        r.id,
                        if r.passed() {
                            "pass".to_string()
                        } else {
                            [r.failures.clone(), r.errors.clone()].concat().join("; ")
                        }
                    )
                })
                .collect();
            let body = serde_json::to_value(&reports).expect("reports serialize");
            if numeric_trouble && reports.iter().all(|r| r.failures.is_empty()) {
                return Err(Failure::Numeric(lines.join("\n")));
            }
            Ok((ok, json!({"reports": body}), lines.join("\n")))
        }
    }
}

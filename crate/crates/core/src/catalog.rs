//! The built-in corpus of potential vector fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exprio::{parse_expr, ExprError, PvfDocument};
use crate::flatcore::{
    build_saito_matrices, check_extended_wdvv_with, frobenius_check, track_path, CompiledSaito,
    PathPoint, PotentialVF, SaitoMatrices,
};
use crate::isomono::{residues_at, schlesinger_along_path};
use crate::logvf::{discriminant, discriminant_weight_ok, logvf_identities, saito_criterion};
use crate::midconv::{okubo_roundtrip, RoundTripReport};
use crate::p6::{extract_p6_solution, p6_residual, weights_complex, P6Params};
use crate::ring::Ring;
use num_traits::One;

macro_rules! entries {
    ($($id:literal),* $(,)?) => {
        &[$(($id, include_str!(concat!("../data/catalog/v1/", $id, ".json")))),*]
    };
}

const ENTRIES: &[(&str, &str)] =
    entries!("H3", "H3p", "H3pp", "LT8", "LT26", "LT27", "LT13", "LT14", "LT18", "LT19", "LT30");
const MANIFEST: &str = include_str!("../data/catalog/v1/MANIFEST.sha256");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown catalog id {0:?}")]
    UnknownId(String),
    #[error("checksum mismatch for {0}")]
    Checksum(String),
    #[error("catalog entry {id}: {source}")]
    Entry {
        id: String,
        #[source]
        source: ExprError,
    },
}

/// Sampling path: `t1` fixed, `t2` on a real interval, `t3` fixed.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PathSpec {
    pub t1: f64,
    pub t2: [f64; 2],
    pub t3: f64,
    pub samples: usize,
    pub max_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_seed: Option<[f64; 2]>,
}

impl PathSpec {
    /// Arc-length parameter of each sample.
    pub fn parameters(&self) -> Vec<f64> {
        let m = self.samples.max(2);
        (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
    }

    pub fn step(&self) -> f64 {
        (self.t2[1] - self.t2[0]) / (self.samples.max(2) - 1) as f64
    }

    pub fn points(&self) -> Vec<Vec<Complex64>> {
        self.parameters()
            .into_iter()
            .map(|s| self.point_at(self.t2[0] + s * (self.t2[1] - self.t2[0])))
            .collect()
    }

    pub fn point_at(&self, t2: f64) -> Vec<Complex64> {
        vec![
            Complex64::new(self.t1, 0.0),
            Complex64::new(t2, 0.0),
            Complex64::new(self.t3, 0.0),
        ]
    }

    pub fn seed(&self) -> Complex64 {
        self.z_seed
            .map(|[re, im]| Complex64::new(re, im))
            .unwrap_or_default()
    }

    pub fn is_valid(&self) -> bool {
        self.samples >= 2 && self.step().abs() <= self.max_step + 1e-15 && self.t2[0] != self.t2[1]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Flags {
    #[serde(default)]
    pub has_prepotential: bool,
    #[serde(default)]
    pub has_extension: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub pvf: PvfDocument,
    pub default_path: PathSpec,
    pub flags: Flags,
    #[serde(default)]
    pub notes: String,
}

impl CatalogEntry {
    pub fn potential(&self) -> Result<PotentialVF, CatalogError> {
        self.pvf.to_pvf().map_err(|source| CatalogError::Entry {
            id: self.id.clone(),
            source,
        })
    }
}

fn checksum_ok(file: &str, text: &str) -> bool {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    MANIFEST
        .lines()
        .filter_map(|l| l.split_once("  "))
        .any(|(h, f)| f.trim() == file && h == hex)
}

pub fn catalog_list() -> Vec<&'static str> {
    ENTRIES.iter().map(|(id, _)| *id).collect()
}

pub fn catalog_get(id: &str) -> Result<CatalogEntry, CatalogError> {
    let (_, text) = ENTRIES
        .iter()
        .find(|(k, _)| *k == id)
        .ok_or_else(|| CatalogError::UnknownId(id.to_string()))?;
    if !checksum_ok(&format!("{id}.json"), text) {
        return Err(CatalogError::Checksum(id.to_string()));
    }
    serde_json::from_str(text).map_err(|e| CatalogError::Entry {
        id: id.to_string(),
        source: ExprError::Json(e),
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Symbolic,
    Numeric,
    Full,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Tolerances {
    /// Eigen/residue identities.
    pub identity: f64,
    /// PVI and Schlesinger residuals.
    pub residual: f64,
    /// Drift of the residue traces along a path, and the middle-convolution
    /// round trip.
    pub trace: f64,
    /// Invariant-subspace defect.
    pub subspace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-10,
            residual: 1e-6,
            trace: 1e-8,
            subspace: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolicReport {
    pub wdvv: bool,
    pub failing_commutators: Vec<(usize, usize)>,
    pub unit: bool,
    pub homogeneity: bool,
    pub saito_relations: bool,
    pub flat_normalization: bool,
    pub discriminant_monic: bool,
    pub discriminant_weight: bool,
    pub logvf_failures: Vec<String>,
    pub saito_criterion: Option<String>,
    /// `F` reconstructed from `g` (entries without an extension).
    pub prepotential: Option<String>,
    /// Stored `F` satisfies `∂F/∂t_i = g_{n+1−i}` (and equals the
    /// reconstruction, when there is one).
    pub prepotential_matches: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NumericReport {
    pub entry: (usize, usize),
    pub samples: usize,
    pub p6_residual: f64,
    pub trace_drift: f64,
    pub min_root_separation: f64,
    pub params: P6Params,
    pub residue_sum_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullReport {
    pub schlesinger_residual: f64,
    pub midconv: RoundTripReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub id: String,
    pub depth: Depth,
    pub tolerances: Tolerances,
    pub symbolic: SymbolicReport,
    pub numeric: Option<NumericReport>,
    pub full: Option<FullReport>,
    /// Checks that ran and failed.
    pub failures: Vec<String>,
    /// Numeric breakdowns (collisions, underflow) that stopped a stage.
    pub errors: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.errors.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub depth: Depth,
    pub tolerances: Tolerances,
    pub path: Option<PathSpec>,
    pub entry: (usize, usize),
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            depth: Depth::Symbolic,
            tolerances: Tolerances::default(),
            path: None,
            entry: (1, 2),
        }
    }
}

pub fn catalog_verify(id: &str, depth: Depth) -> Result<VerifyReport, CatalogError> {
    catalog_verify_with(
        id,
        &VerifyOptions {
            depth,
            ..VerifyOptions::default()
        },
    )
}

pub fn catalog_verify_with(id: &str, opts: &VerifyOptions) -> Result<VerifyReport, CatalogError> {
    let entry = catalog_get(id)?;
    let pvf = entry.potential()?;
    let path = opts
        .path
        .clone()
        .unwrap_or_else(|| entry.default_path.clone());
    Ok(verify_pvf(&pvf, &path, opts))
}

fn symbolic_report(
    pvf: &PotentialVF,
    m: &SaitoMatrices,
    failures: &mut Vec<String>,
) -> SymbolicReport {
    let w = check_extended_wdvv_with(pvf, m);
    let failing = w.failing_commutators();
    for (p, q) in &failing {
        failures.push(format!("[B~({p}), B~({q})] != 0"));
    }
    for (ok, what) in [
        (w.unit_ok, "B~(n) = I"),
        (w.homogeneity_ok, "E g_j = (1 + w_j) g_j"),
        (w.saito_relations_ok, "Saito relations"),
        (w.flat_normalization_ok, "T_nj = -w_j t_j"),
    ] {
        if !ok {
            failures.push(what.to_string());
        }
    }
    let mut rep = SymbolicReport {
        wdvv: w.is_solution(),
        failing_commutators: failing,
        unit: w.unit_ok,
        homogeneity: w.homogeneity_ok,
        saito_relations: w.saito_relations_ok,
        flat_normalization: w.flat_normalization_ok,
        discriminant_monic: false,
        discriminant_weight: false,
        logvf_failures: Vec::new(),
        saito_criterion: None,
        prepotential: None,
        prepotential_matches: None,
    };
    match discriminant(m) {
        Ok(d) => {
            rep.discriminant_monic = true;
            rep.discriminant_weight = discriminant_weight_ok(&d);
            if !rep.discriminant_weight {
                failures.push("h has weight n".into());
            }
            rep.logvf_failures = logvf_identities(m, &d).failures;
            failures.extend(rep.logvf_failures.iter().cloned());
            match saito_criterion(&m.t.neg(), &d) {
                Ok(Some(c)) => {
                    if !c.is_one() {
                        failures.push(format!("Saito criterion constant {c} != 1"));
                    }
                    rep.saito_criterion = Some(c.to_string());
                }
                Ok(None) => failures.push("det(-T) is not a constant multiple of h".into()),
                Err(e) => failures.push(e.to_string()),
            }
        }
        Err(e) => failures.push(e.to_string()),
    }

    let stored = pvf.meta.get("F").map(|text| parse_expr(pvf.ring(), text));
    let reconstructed = if pvf.ring().extension().is_none() {
        match frobenius_check(pvf) {
            Ok(Some(p)) => Some(p.f),
            Ok(None) => None,
            Err(e) => {
                if stored.is_some() {
                    failures.push(e.to_string());
                }
                None
            }
        }
    } else {
        None
    };
    rep.prepotential = reconstructed.as_ref().map(|f| f.to_string());
    if let Some(stored) = stored {
        let n = pvf.n();
        let ok = match stored {
            Ok(f) => {
                (0..n).all(|i| f.partial(i) == pvf.g[n - 1 - i])
                    && reconstructed.as_ref().is_none_or(|r| *r == f)
            }
            Err(_) => false,
        };
        if !ok {
            failures.push("stored F does not match g".into());
        }
        rep.prepotential_matches = Some(ok);
    }
    rep
}

fn full_report(
    m: &SaitoMatrices,
    ring: &Ring,
    points: &[PathPoint],
    ds: f64,
    lambda: &[Complex64],
    tol: &Tolerances,
    failures: &mut Vec<String>,
) -> Result<FullReport, String> {
    let cs = CompiledSaito::new(m);
    let schl =
        schlesinger_along_path(&cs, ring, points, ds / 4.0, lambda).map_err(|e| e.to_string())?;
    if schl >= tol.residual {
        failures.push(format!(
            "Schlesinger residual {schl:.3e} >= {:.1e}",
            tol.residual
        ));
    }
    let len = points.len();
    let picks = [len / 4, len / 2, 3 * len / 4];
    let mc = okubo_roundtrip(&cs, ring, points, &picks, lambda).map_err(|e| e.to_string())?;
    failures.extend(mc.failures(tol.identity, tol.trace, tol.subspace));
    Ok(FullReport {
        schlesinger_residual: schl,
        midconv: mc,
    })
}

/// Runs the checks of `opts.depth` on any potential vector field.
pub fn verify_pvf(pvf: &PotentialVF, path: &PathSpec, opts: &VerifyOptions) -> VerifyReport {
    let m = build_saito_matrices(pvf);
    let tol = &opts.tolerances;
    let mut failures = Vec::new();
    let mut errors = Vec::new();
    let symbolic = symbolic_report(pvf, &m, &mut failures);
    let mut report = VerifyReport {
        id: pvf.name.clone(),
        depth: opts.depth,
        tolerances: tol.clone(),
        symbolic,
        numeric: None,
        full: None,
        failures: Vec::new(),
        errors: Vec::new(),
    };
    if opts.depth >= Depth::Numeric {
        if pvf.n() != 3 {
            errors.push("numeric checks need n = 3".into());
        } else if !path.is_valid() {
            errors.push("invalid sampling path".into());
        } else {
            match numeric_stage(pvf, &m, path, opts, &mut failures, &mut errors) {
                Ok((num, full)) => {
                    report.numeric = Some(num);
                    report.full = full;
                }
                Err(e) => errors.push(e),
            }
        }
    }
    report.failures = failures;
    report.errors = errors;
    report
}

type Stages = (NumericReport, Option<FullReport>);

fn numeric_stage(
    pvf: &PotentialVF,
    m: &SaitoMatrices,
    path: &PathSpec,
    opts: &VerifyOptions,
    failures: &mut Vec<String>,
    errors: &mut Vec<String>,
) -> Result<Stages, String> {
    let tol = &opts.tolerances;
    let ring = pvf.ring();
    let points = track_path(ring, &path.points(), path.seed()).map_err(|e| e.to_string())?;
    let lambda = weights_complex(m);
    let ds = path.step();
    let ext = extract_p6_solution(m, &lambda, opts.entry, &points, ds, [0, 1, 2])
        .map_err(|e| e.to_string())?;
    let residual = p6_residual(&ext.samples, &ext.params).map_err(|e| e.to_string())?;
    if residual >= tol.residual {
        failures.push(format!(
            "PVI residual {residual:.3e} >= {:.1e}",
            tol.residual
        ));
    }
    let drift = ext.max_trace_drift();
    if drift >= tol.trace {
        failures.push(format!("residue traces drift by {drift:.3e}"));
    }
    let cs = CompiledSaito::new(m);
    let ok =
        residues_at(&cs, &points[points.len() / 2], &lambda, None).map_err(|e| e.to_string())?;
    let sum_defect = ok.sum_defect();
    if sum_defect >= tol.identity {
        failures.push(format!("sum of residues + B_inf = {sum_defect:.3e}"));
    }
    let numeric = NumericReport {
        entry: opts.entry,
        samples: points.len(),
        p6_residual: residual,
        trace_drift: drift,
        min_root_separation: ext.min_root_separation,
        params: ext.params,
        residue_sum_defect: sum_defect,
    };
    let full = if opts.depth == Depth::Full {
        match full_report(m, ring, &points, ds, &lambda, tol, failures) {
            Ok(f) => Some(f),
            Err(e) => {
                errors.push(e);
                None
            }
        }
    } else {
        None
    };
    Ok((numeric, full))
}

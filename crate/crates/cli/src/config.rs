//! Flat experiment configs: `section.key = value` lines, one schema per
//! experiment kind, unknown keys rejected.
//!
//! The schema table below is the single source of truth: the validator,
//! the typed getters and the `list` output are all generated from it, so
//! the listing necessarily shows every key the parser will accept.

use crate::CliError;
use std::collections::BTreeMap;
use std::path::PathBuf;

/// One config key with its default (`None` marks a required key).
#[derive(Debug)]
pub struct KeySpec {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

/// One experiment kind: its section keys plus whether randomness is
/// involved (which makes `run.seed` mandatory).
#[derive(Debug)]
pub struct KindSpec {
    pub name: &'static str,
    pub summary: &'static str,
    pub needs_seed: bool,
    pub keys: &'static [KeySpec],
}

/// Keys of the shared `run` section (besides `run.kind` and `run.seed`,
/// which are handled specially).
pub const RUN_KEYS: &[KeySpec] = &[
    KeySpec {
        name: "run.out",
        default: Some("out"),
        help: "output directory for report.json, data/ and plots/",
    },
    KeySpec {
        name: "run.threads",
        default: Some("1"),
        help: "worker threads; the CLOSURE_LAB_THREADS env var overrides",
    },
];

pub const KINDS: &[KindSpec] = &[
    KindSpec {
        name: "tower",
        summary: "iterated-commutator tower of a rotation pair and its pseudo-solvability verdict",
        needs_seed: false,
        keys: &[
            KeySpec { name: "tower.angle1", default: None, help: "first rotation angle, radians" },
            KeySpec { name: "tower.axis1", default: Some("0,0,1"), help: "first rotation axis, comma triple" },
            KeySpec { name: "tower.angle2", default: None, help: "second rotation angle, radians" },
            KeySpec { name: "tower.axis2", default: Some("1,0,0"), help: "second rotation axis, comma triple" },
            KeySpec { name: "tower.depth", default: Some("6"), help: "number of commutator levels past the generators" },
            KeySpec { name: "tower.tol", default: Some("1e-9"), help: "identity tolerance on mesh displacement" },
            KeySpec { name: "tower.mode", default: Some("witness"), help: "level strategy: witness | exhaustive" },
            KeySpec { name: "tower.keep", default: Some("24"), help: "witness mode: most-displaced elements kept per level" },
            KeySpec { name: "tower.cap", default: Some("100000"), help: "exhaustive mode: per-level cardinality cap" },
        ],
    },
    KindSpec {
        name: "renorm",
        summary: "renormalization of one near-identity map by the diagonal contraction",
        needs_seed: false,
        keys: &[
            KeySpec { name: "renorm.map", default: Some("translation"), help: "map family: translation (x+eps) | quadratic (x+eps*x^2)" },
            KeySpec { name: "renorm.epsilon", default: None, help: "displacement coefficient eps" },
            KeySpec { name: "renorm.lambda", default: Some("0.5"), help: "contraction multiplier in (0,1)" },
            KeySpec { name: "renorm.order", default: Some("1"), help: "differentiation order of the controlled norm" },
            KeySpec { name: "renorm.delta", default: Some("0.01"), help: "remainder bound delta" },
            KeySpec { name: "renorm.factor", default: Some("10"), help: "threshold multiplier" },
            KeySpec { name: "renorm.norm_constant", default: Some("1"), help: "norm-equivalence constant C" },
            KeySpec { name: "renorm.k_max", default: Some("60"), help: "abort bound on the conjugation power" },
        ],
    },
    KindSpec {
        name: "grade",
        summary: "multiplier ladder of a contraction and the graded bracket law on random pairs",
        needs_seed: true,
        keys: &[
            KeySpec { name: "grade.lambda", default: None, help: "contraction spectrum, increasing comma list in (0,1)" },
            KeySpec { name: "grade.degree", default: Some("4"), help: "monomial degree cap" },
            KeySpec { name: "grade.cutoff", default: Some("auto"), help: "smallest ladder multiplier; auto = tightest value certified by the degree cap" },
            KeySpec { name: "grade.pairs", default: Some("1000"), help: "random homogeneous monomial pairs checked" },
        ],
    },
    KindSpec {
        name: "flow-compare",
        summary: "iterates of h(x) = (1+C)x against the Euler flow of x d/dx, with the error slope in C",
        needs_seed: false,
        keys: &[
            KeySpec { name: "flow-compare.c_values", default: Some("1e-2,1e-3,1e-4,1e-5"), help: "displacement scales C, comma list" },
            KeySpec { name: "flow-compare.t", default: Some("1"), help: "flow time" },
            KeySpec { name: "flow-compare.steps", default: Some("1000000"), help: "Euler steps of the reference flow" },
            KeySpec { name: "flow-compare.grid_per_axis", default: Some("17"), help: "evaluation nodes per axis" },
            KeySpec { name: "flow-compare.lo", default: Some("0"), help: "evaluation interval start" },
            KeySpec { name: "flow-compare.hi", default: Some("0.5"), help: "evaluation interval end" },
            KeySpec { name: "flow-compare.ambient_lo", default: Some("-1"), help: "ambient interval start (escape bound)" },
            KeySpec { name: "flow-compare.ambient_hi", default: Some("2"), help: "ambient interval end (escape bound)" },
        ],
    },
    KindSpec {
        name: "measure",
        summary: "quasi-volume constant of a random loxodromic family against a seeded sphere measure, plus local dimension",
        needs_seed: true,
        keys: &[
            KeySpec { name: "measure.samples", default: Some("100000"), help: "atoms of the empirical measure" },
            KeySpec { name: "measure.group_size", default: Some("50"), help: "random loxodromic elements" },
            KeySpec { name: "measure.kappa_min", default: Some("1.05"), help: "smallest dilation multiplier (> 1)" },
            KeySpec { name: "measure.kappa_max", default: Some("1.5"), help: "largest dilation multiplier" },
            KeySpec { name: "measure.bands", default: Some("8"), help: "latitude bands of the cell partition" },
            KeySpec { name: "measure.sectors", default: Some("8"), help: "longitude sectors of the cell partition" },
            KeySpec { name: "measure.min_cell_mass", default: Some("1e-3"), help: "cells below this mass are excluded" },
            KeySpec { name: "measure.c_max", default: Some("1.2"), help: "constant above which the violation flag raises" },
            KeySpec { name: "measure.d", default: Some("2"), help: "quasi-volume exponent" },
            KeySpec { name: "measure.base", default: Some("conformal"), help: "Jacobian base: conformal | determinant" },
            KeySpec { name: "measure.probes", default: Some("12"), help: "local-dimension probe points (leading atoms)" },
            KeySpec { name: "measure.radii_min", default: Some("0.04"), help: "smallest chordal radius of the dimension ladder" },
            KeySpec { name: "measure.radii_max", default: Some("1.5"), help: "largest chordal radius of the dimension ladder" },
            KeySpec { name: "measure.radii_count", default: Some("8"), help: "geometric radii in the ladder" },
        ],
    },
    KindSpec {
        name: "oe-check",
        summary: "synchronized pair under a dilation conjugacy: fitted time scale and flow-conjugacy residual",
        needs_seed: false,
        keys: &[
            KeySpec { name: "oe-check.scale", default: Some("2"), help: "conjugacy H(x) = scale*x (positive)" },
            KeySpec { name: "oe-check.levels", default: Some("10"), help: "maps in the displacement sequence" },
            KeySpec { name: "oe-check.field_tol", default: Some("1e-6"), help: "Cauchy tolerance of the limit fields" },
            KeySpec { name: "oe-check.sigma_tol", default: Some("1e-9"), help: "Cauchy tolerance of the time-scale ratios" },
            KeySpec { name: "oe-check.ratio_bound", default: Some("50"), help: "bound on successive displacement-norm ratios" },
            KeySpec { name: "oe-check.steps", default: Some("20000"), help: "Euler steps per flow in the residual" },
            KeySpec { name: "oe-check.t_values", default: Some("0.1,0.5"), help: "flow times of the residual grid" },
            KeySpec { name: "oe-check.x_values", default: Some("-0.2,0,0.3"), help: "base points of the residual grid" },
            KeySpec { name: "oe-check.force_sigma", default: Some("fit"), help: "time scale: fit | explicit positive value" },
        ],
    },
];

pub fn kind_spec(name: &str) -> Option<&'static KindSpec> {
    KINDS.iter().find(|k| k.name == name)
}

fn valid_key_segment(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

/// Parse the flat `section.key = value` text; duplicate or malformed
/// keys are validation errors, semantics come later.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (num, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Validation(format!(
                "line {}: expected `section.key = value`, got `{line}`",
                num + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        let sections: Vec<&str> = key.split('.').collect();
        if sections.len() != 2 || !sections.iter().all(|s| valid_key_segment(s)) {
            return Err(CliError::Validation(format!(
                "line {}: key `{key}` is not of the form section.key",
                num + 1
            )));
        }
        if value.is_empty() {
            return Err(CliError::Validation(format!(
                "line {}: key `{key}` has an empty value",
                num + 1
            )));
        }
        if entries.iter().any(|(k, _)| k == key) {
            return Err(CliError::Validation(format!(
                "line {}: duplicate key `{key}`",
                num + 1
            )));
        }
        entries.push((key.to_string(), value.to_string()));
    }
    Ok(entries)
}

/// Schema-checked config with defaults substituted.
#[derive(Debug)]
pub struct Resolved {
    pub kind: &'static KindSpec,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub threads: usize,
    values: BTreeMap<&'static str, String>,
}

/// Validate entries against the schema of the named kind and fill in
/// the defaults.
pub fn resolve(entries: &[(String, String)]) -> Result<Resolved, CliError> {
    let kind_name = entries
        .iter()
        .find(|(k, _)| k == "run.kind")
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| CliError::Validation("missing required key run.kind".into()))?;
    let kind = kind_spec(kind_name).ok_or_else(|| {
        let known: Vec<&str> = KINDS.iter().map(|k| k.name).collect();
        CliError::Validation(format!(
            "unknown experiment kind `{kind_name}` (known: {})",
            known.join(", ")
        ))
    })?;

    let known_key = |key: &str| {
        key == "run.kind"
            || key == "run.seed"
            || RUN_KEYS.iter().any(|k| k.name == key)
            || kind.keys.iter().any(|k| k.name == key)
    };
    for (key, _) in entries {
        if !known_key(key) {
            return Err(CliError::Validation(format!(
                "unknown key `{key}` for kind `{}`",
                kind.name
            )));
        }
    }

    let raw = |name: &str| entries.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str());
    let mut values = BTreeMap::new();
    for spec in RUN_KEYS.iter().chain(kind.keys) {
        match raw(spec.name).or(spec.default) {
            Some(v) => {
                values.insert(spec.name, v.to_string());
            }
            None => {
                return Err(CliError::Validation(format!(
                    "missing required key {}",
                    spec.name
                )));
            }
        }
    }

    let seed = match raw("run.seed") {
        Some(v) => Some(v.parse::<u64>().map_err(|_| {
            CliError::Validation(format!("run.seed must be an unsigned 64-bit integer, got `{v}`"))
        })?),
        None if kind.needs_seed => {
            return Err(CliError::Validation(format!(
                "run.seed is required for the stochastic kind `{}`",
                kind.name
            )));
        }
        None => None,
    };

    let out = PathBuf::from(values["run.out"].clone());
    let threads = values["run.threads"]
        .parse::<usize>()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| {
            CliError::Validation(format!(
                "run.threads must be a positive integer, got `{}`",
                values["run.threads"]
            ))
        })?;

    Ok(Resolved {
        kind,
        seed,
        out,
        threads,
        values,
    })
}

impl Resolved {
    pub fn str_value(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key {key} missing from resolved schema"))
    }

    pub fn f64_value(&self, key: &str) -> Result<f64, CliError> {
        let raw = self.str_value(key);
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                CliError::Validation(format!("{key} must be a finite number, got `{raw}`"))
            })
    }

    pub fn usize_value(&self, key: &str) -> Result<usize, CliError> {
        let raw = self.str_value(key);
        raw.parse::<usize>().map_err(|_| {
            CliError::Validation(format!("{key} must be a non-negative integer, got `{raw}`"))
        })
    }

    pub fn u32_value(&self, key: &str) -> Result<u32, CliError> {
        let raw = self.str_value(key);
        raw.parse::<u32>().map_err(|_| {
            CliError::Validation(format!("{key} must be a non-negative integer, got `{raw}`"))
        })
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let raw = self.str_value(key);
        let parsed: Option<Vec<f64>> = raw
            .split(',')
            .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        parsed
            .filter(|v| !v.is_empty())
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "{key} must be a comma list of finite numbers, got `{raw}`"
                ))
            })
    }
}

/// Deterministic text listing of every kind and every key with its
/// default, generated from the schema table.
pub fn list_text() -> String {
    let mut out = String::from("experiment kinds (config: flat `section.key = value` lines)\n");
    for kind in KINDS {
        out.push('\n');
        out.push_str(&format!("{} — {}\n", kind.name, kind.summary));
        out.push_str(&format!("  run.kind = {}   (required)\n", kind.name));
        if kind.needs_seed {
            out.push_str("  run.seed   (required) — 64-bit sampling seed\n");
        }
        for spec in RUN_KEYS.iter().chain(kind.keys) {
            match spec.default {
                Some(d) => out.push_str(&format!("  {} = {} — {}\n", spec.name, d, spec.help)),
                None => out.push_str(&format!("  {}   (required) — {}\n", spec.name, spec.help)),
            }
        }
    }
    out
}

//! One runner per experiment kind.
//!
//! Each runner validates its parameters (any problem there aborts
//! before a single file is touched), computes with the core crate, and
//! returns the result object plus CSV/SVG artifacts. Core errors raised
//! during computation are numerical failures; they become a diagnostic
//! `report.json` and exit code 3.

use crate::config::Resolved;
use crate::report::{fmt_f64, Json};
use crate::svg::{self, Series};
use crate::CliError;
use closure_core::closure::{
    conjugate, iterate_flow_compare, renormalize, FlowSpec, RenormSchedule,
};
use closure_core::grading::{decompose, grading_check, ladder, ladder_csv, Contraction};
use closure_core::jet::{cnorm, Jet, NormSpec, VFJet};
use closure_core::measure::{
    local_dimension, quasi_volume_constant, EmpiricalMeasure, JacobianBase, QuasiVolumeConfig,
    SphereCells,
};
use closure_core::mobius::{DisplacementMesh, Mobius};
use closure_core::rigidity::{conjugacy_residual, synchronized_pair, Conjugacy, MapRep, SyncPair};
use closure_core::rng;
use closure_core::stats::least_squares_slope;
use closure_core::tower::{ghys_tower, pseudo_solvable_verdict, GhysTower, TowerMode};
use closure_core::BoxDomain;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

/// Everything a run produces, ready to be written to disk.
pub struct Artifacts {
    pub result: Json,
    /// `(file name, contents)` under `data/`.
    pub csv: Vec<(&'static str, String)>,
    /// `(file name, contents)` under `plots/`.
    pub svg: Vec<(&'static str, String)>,
}

pub fn run_kind(cfg: &Resolved) -> Result<Artifacts, CliError> {
    match cfg.kind.name {
        "tower" => run_tower(cfg),
        "renorm" => run_renorm(cfg),
        "grade" => run_grade(cfg),
        "flow-compare" => run_flow_compare(cfg),
        "measure" => run_measure(cfg),
        "oe-check" => run_oe_check(cfg),
        other => Err(CliError::Validation(format!("unknown kind `{other}`"))),
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn invalid(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{key}: {e}"))
}

fn positive(cfg: &Resolved, key: &str) -> Result<f64, CliError> {
    let v = cfg.f64_value(key)?;
    if v <= 0.0 {
        return Err(CliError::Validation(format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

fn axis_triple(cfg: &Resolved, key: &str) -> Result<[f64; 3], CliError> {
    let v = cfg.f64_list(key)?;
    if v.len() != 3 {
        return Err(CliError::Validation(format!(
            "{key} must be a comma triple, got {} entries",
            v.len()
        )));
    }
    Ok([v[0], v[1], v[2]])
}

// ---------------------------------------------------------------- tower

fn run_tower(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let angle1 = cfg.f64_value("tower.angle1")?;
    let angle2 = cfg.f64_value("tower.angle2")?;
    let axis1 = axis_triple(cfg, "tower.axis1")?;
    let axis2 = axis_triple(cfg, "tower.axis2")?;
    let depth = cfg.usize_value("tower.depth")?;
    let tol = positive(cfg, "tower.tol")?;
    let mode = match cfg.str_value("tower.mode") {
        "witness" => TowerMode::Witness { keep: cfg.usize_value("tower.keep")? },
        "exhaustive" => TowerMode::Exhaustive { cap: cfg.usize_value("tower.cap")? },
        other => {
            return Err(CliError::Validation(format!(
                "tower.mode must be witness or exhaustive, got `{other}`"
            )));
        }
    };
    let g1 = Mobius::rotation(axis1, angle1).map_err(|e| invalid("tower.axis1", e))?;
    let g2 = Mobius::rotation(axis2, angle2).map_err(|e| invalid("tower.axis2", e))?;

    let mesh = DisplacementMesh::default();
    let tower = ghys_tower(&[g1, g2], depth, &mesh, mode).map_err(numerical)?;
    let verdict = pseudo_solvable_verdict(&tower, tol);

    let levels: Vec<Json> = tower
        .levels
        .iter()
        .enumerate()
        .map(|(j, level)| {
            let max_disp = level.iter().map(|e| e.displacement).fold(0.0f64, f64::max);
            Json::Object(vec![
                ("level", Json::Int(j as i64)),
                ("count", Json::Int(level.len() as i64)),
                ("raw_count", Json::Int(tower.raw_counts[j] as i64)),
                ("max_displacement", Json::Float(max_disp)),
            ])
        })
        .collect();
    let result = Json::Object(vec![
        ("verdict", Json::Str(verdict.to_string())),
        ("depth", Json::Int(depth as i64)),
        ("tol", Json::Float(tol)),
        ("levels", Json::Array(levels)),
    ]);

    Ok(Artifacts {
        result,
        csv: vec![("levels.csv", tower_csv(&tower))],
        svg: vec![("displacement.svg", tower_svg(&tower))],
    })
}

fn tower_csv(tower: &GhysTower) -> String {
    let mut out = String::from("level,index,displacement,is_identity\n");
    for (j, level) in tower.levels.iter().enumerate() {
        for (i, e) in level.iter().enumerate() {
            out.push_str(&format!(
                "{j},{i},{},{}\n",
                fmt_f64(e.displacement),
                e.is_identity
            ));
        }
    }
    out
}

fn tower_svg(tower: &GhysTower) -> String {
    let points: Vec<(f64, f64)> = tower
        .levels
        .iter()
        .enumerate()
        .map(|(j, level)| {
            let max_disp = level.iter().map(|e| e.displacement).fold(0.0f64, f64::max);
            (j as f64, max_disp.max(1e-300).log10())
        })
        .collect();
    svg::line_plot(
        "commutator tower displacement",
        "level",
        "log10 max displacement",
        &[Series { label: "max displacement".into(), color: svg::PALETTE[0], points }],
    )
}

// --------------------------------------------------------------- renorm

fn run_renorm(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let map_name = cfg.str_value("renorm.map").to_string();
    let epsilon = cfg.f64_value("renorm.epsilon")?;
    let lambda = positive(cfg, "renorm.lambda")?;
    let order = cfg.usize_value("renorm.order")?;
    let delta = positive(cfg, "renorm.delta")?;
    let factor = cfg.f64_value("renorm.factor")?;
    let norm_constant = positive(cfg, "renorm.norm_constant")?;
    let k_max = cfg.u32_value("renorm.k_max")?;

    let g = match map_name.as_str() {
        "translation" => {
            Jet::from_terms(1, 2, &[(0, &[0], epsilon), (0, &[1], 1.0)])
                .map_err(|e| invalid("renorm.epsilon", e))?
        }
        "quadratic" => Jet::from_terms(1, 2, &[(0, &[1], 1.0), (0, &[2], epsilon)])
            .map_err(|e| invalid("renorm.epsilon", e))?,
        other => {
            return Err(CliError::Validation(format!(
                "renorm.map must be translation or quadratic, got `{other}`"
            )));
        }
    };
    let f = Contraction::new(vec![lambda]).map_err(|e| invalid("renorm.lambda", e))?;
    let sched = RenormSchedule::new(order, vec![delta], factor, norm_constant, k_max)
        .map_err(|e| invalid("renorm schedule", e))?;

    let report = renormalize(&g, &f, &sched, 0).map_err(numerical)?;

    // k-ladder of conjugate displacement norms, the raw material of the
    // threshold search.
    let spec0 = NormSpec::standard(0, 1);
    let mut csv = String::from("k,c0_norm\n");
    let mut points = Vec::new();
    for k in 0..=report.k {
        let h = conjugate(&g, &f, k).map_err(numerical)?;
        let n = cnorm(&h, true, &spec0).map_err(numerical)?;
        csv.push_str(&format!("{k},{}\n", fmt_f64(n)));
        points.push((k as f64, n.max(1e-300).log10()));
    }
    let plot = svg::line_plot(
        "conjugate displacement growth",
        "k",
        "log10 |h_k - id|_0",
        &[Series { label: "c0 norm".into(), color: svg::PALETTE[0], points }],
    );

    let result = Json::Object(vec![
        ("map", Json::Str(map_name)),
        ("epsilon", Json::Float(epsilon)),
        ("lambda", Json::Float(lambda)),
        ("renorm", Json::Raw(report.to_json())),
    ]);
    Ok(Artifacts {
        result,
        csv: vec![("conjugates.csv", csv)],
        svg: vec![("norms.svg", plot)],
    })
}

// ---------------------------------------------------------------- grade

/// Random vector monomial `x^alpha d/dx_l` with `|alpha| <= degree`,
/// drawn by bounded rejection so the sequence is reproducible.
fn random_monomial(r: &mut rng::LabRng, dim: usize, degree: u32) -> (usize, Vec<u32>) {
    let l = r.gen_range(0..dim);
    loop {
        let alpha: Vec<u32> = (0..dim).map(|_| r.gen_range(0..=degree)).collect();
        if alpha.iter().sum::<u32>() <= degree {
            return (l, alpha);
        }
    }
}

fn run_grade(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let lambda = cfg.f64_list("grade.lambda")?;
    let degree = cfg.u32_value("grade.degree")?;
    let pairs = cfg.usize_value("grade.pairs")?;
    if degree == 0 || pairs == 0 {
        return Err(CliError::Validation(
            "grade.degree and grade.pairs must be positive".into(),
        ));
    }
    let f = Contraction::new(lambda.clone()).map_err(|e| invalid("grade.lambda", e))?;
    // Completeness of the ladder above `cutoff` is certified only when
    // every beyond-cap monomial sits below it; `auto` picks the
    // tightest such value for the configured degree cap.
    let cutoff = match cfg.str_value("grade.cutoff") {
        "auto" => f.lambda_max().powi(degree as i32 + 1) / f.lambda_min() * (1.0 + 1e-9),
        _ => positive(cfg, "grade.cutoff")?,
    };
    let lad = ladder(&f, cutoff, degree).map_err(|e| invalid("grade ladder", e))?;

    let seed = cfg.seed.expect("seed checked during resolution");
    let mut r = rng::stream(seed, 0);
    let dim = f.dim();
    let mut product_failures = 0usize;
    let mut index_violations = 0usize;
    let mut zero_brackets = 0usize;
    let mut max_product_error = 0.0f64;
    for _ in 0..pairs {
        let (l1, a1) = random_monomial(&mut r, dim, degree);
        let (l2, a2) = random_monomial(&mut r, dim, degree);
        let m1 = VFJet::monomial(dim, l1, &a1, 1.0).map_err(numerical)?;
        let m2 = VFJet::monomial(dim, l2, &a2, 1.0).map_err(numerical)?;
        let c1 = decompose(&m1, &f).map_err(numerical)?.remove(0);
        let c2 = decompose(&m2, &f).map_err(numerical)?.remove(0);
        let verdict = grading_check(&c1, &c2, &f).map_err(numerical)?;
        if verdict.bracket_is_zero {
            zero_brackets += 1;
        }
        if !verdict.product_law {
            product_failures += 1;
        }
        if !verdict.index_bound {
            index_violations += 1;
        }
        max_product_error = max_product_error.max(verdict.max_product_error);
    }

    let rung_points: Vec<(f64, f64)> = lad
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| ((i + 1) as f64, e.multiplier.log10()))
        .collect();
    let plot = svg::line_plot(
        "multiplier ladder",
        "rank",
        "log10 multiplier",
        &[Series { label: "rung".into(), color: svg::PALETTE[2], points: rung_points }],
    );

    let result = Json::Object(vec![
        ("pairs", Json::Int(pairs as i64)),
        ("degree", Json::Int(degree as i64)),
        ("rungs", Json::Int(lad.entries.len() as i64)),
        ("cutoff", Json::Float(cutoff)),
        ("zero_brackets", Json::Int(zero_brackets as i64)),
        ("product_law_failures", Json::Int(product_failures as i64)),
        ("max_product_error", Json::Float(max_product_error)),
        ("index_violations", Json::Int(index_violations as i64)),
    ]);
    Ok(Artifacts {
        result,
        csv: vec![("ladder.csv", ladder_csv(&lad))],
        svg: vec![("ladder.svg", plot)],
    })
}

// --------------------------------------------------------- flow-compare

fn run_flow_compare(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let c_values = cfg.f64_list("flow-compare.c_values")?;
    if c_values.iter().any(|&c| c <= 0.0) {
        return Err(CliError::Validation(
            "flow-compare.c_values must all be positive".into(),
        ));
    }
    let t = cfg.f64_value("flow-compare.t")?;
    let steps = cfg.usize_value("flow-compare.steps")?;
    let grid = cfg.usize_value("flow-compare.grid_per_axis")?;
    let lo = cfg.f64_value("flow-compare.lo")?;
    let hi = cfg.f64_value("flow-compare.hi")?;
    let alo = cfg.f64_value("flow-compare.ambient_lo")?;
    let ahi = cfg.f64_value("flow-compare.ambient_hi")?;

    let eval = BoxDomain::new(vec![lo], vec![hi]).map_err(|e| invalid("flow-compare.lo", e))?;
    let ambient =
        BoxDomain::new(vec![alo], vec![ahi]).map_err(|e| invalid("flow-compare.ambient_lo", e))?;
    let spec =
        FlowSpec::new(t, steps, eval, ambient, grid).map_err(|e| invalid("flow-compare", e))?;
    let x_field = VFJet::monomial(1, 0, &[1], 1.0).expect("x d/dx is a valid monomial");

    let mut rows = Vec::new();
    let mut fit = Vec::new();
    for &c in &c_values {
        let h = Jet::from_terms(1, 1, &[(0, &[1], 1.0 + c)]).expect("linear map jet");
        let err = iterate_flow_compare(&x_field, &h, c, &spec).map_err(numerical)?;
        if err > 0.0 {
            fit.push((c.ln(), err.ln()));
        }
        rows.push((c, err));
    }
    if fit.len() < 2 {
        return Err(CliError::Numerical(
            "fewer than two positive errors; no slope to fit".into(),
        ));
    }
    let slope = least_squares_slope(&fit);

    let mut csv = String::from("c,sup_error\n");
    for &(c, err) in &rows {
        csv.push_str(&format!("{},{}\n", fmt_f64(c), fmt_f64(err)));
    }
    let plot = svg::line_plot(
        "iterate vs flow error",
        "ln C",
        "ln sup error",
        &[Series { label: format!("slope {slope:.4}"), color: svg::PALETTE[1], points: fit }],
    );

    let points: Vec<Json> = rows
        .iter()
        .map(|&(c, err)| {
            Json::Object(vec![("c", Json::Float(c)), ("sup_error", Json::Float(err))])
        })
        .collect();
    let result = Json::Object(vec![
        ("slope", Json::Float(slope)),
        ("t", Json::Float(t)),
        ("steps", Json::Int(steps as i64)),
        ("grid_per_axis", Json::Int(grid as i64)),
        ("points", Json::Array(points)),
    ]);
    Ok(Artifacts {
        result,
        csv: vec![("errors.csv", csv)],
        svg: vec![("slope.svg", plot)],
    })
}

// -------------------------------------------------------------- measure

/// Conjugated dilation with a random multiplier, axis and twist angle;
/// the draw order (multiplier, axis, angle) is part of the format.
fn random_loxodromic(r: &mut rng::LabRng, kappa_min: f64, kappa_max: f64) -> Mobius {
    let kappa = r.gen_range(kappa_min..kappa_max);
    let axis = rng::unit_sphere_point(r);
    let angle = r.gen_range(0.0..TAU);
    let rot = Mobius::rotation(axis, angle).expect("unit axis");
    let dil = Mobius::dilation(Complex64::new(kappa, 0.0)).expect("kappa > 0");
    rot.compose(&dil).compose(&rot.inverse())
}

fn run_measure(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let samples = cfg.usize_value("measure.samples")?;
    let group_size = cfg.usize_value("measure.group_size")?;
    let kappa_min = cfg.f64_value("measure.kappa_min")?;
    let kappa_max = cfg.f64_value("measure.kappa_max")?;
    let bands = cfg.usize_value("measure.bands")?;
    let sectors = cfg.usize_value("measure.sectors")?;
    let min_cell_mass = cfg.f64_value("measure.min_cell_mass")?;
    let c_max = positive(cfg, "measure.c_max")?;
    let d = cfg.f64_value("measure.d")?;
    let probes = cfg.usize_value("measure.probes")?;
    let radii_min = positive(cfg, "measure.radii_min")?;
    let radii_max = positive(cfg, "measure.radii_max")?;
    let radii_count = cfg.usize_value("measure.radii_count")?;
    if samples == 0 || group_size == 0 || probes == 0 {
        return Err(CliError::Validation(
            "measure.samples, measure.group_size and measure.probes must be positive".into(),
        ));
    }
    if !(kappa_min > 1.0 && kappa_max > kappa_min && kappa_max.is_finite()) {
        return Err(CliError::Validation(format!(
            "need 1 < measure.kappa_min < measure.kappa_max, got {kappa_min}..{kappa_max}"
        )));
    }
    if radii_count < 2 || radii_max <= radii_min {
        return Err(CliError::Validation(
            "need measure.radii_min < measure.radii_max and at least two radii".into(),
        ));
    }
    let base = match cfg.str_value("measure.base") {
        "conformal" => JacobianBase::Conformal,
        "determinant" => JacobianBase::Determinant,
        other => {
            return Err(CliError::Validation(format!(
                "measure.base must be conformal or determinant, got `{other}`"
            )));
        }
    };
    let cells = SphereCells::new(bands, sectors).map_err(|e| invalid("measure.bands", e))?;
    let qv_config = QuasiVolumeConfig { min_cell_mass, c_max };

    let seed = cfg.seed.expect("seed checked during resolution");
    let mu = EmpiricalMeasure::uniform_sphere(samples, seed);
    let mut r = rng::stream(seed, 1);
    let group: Vec<Mobius> = (0..group_size)
        .map(|_| random_loxodromic(&mut r, kappa_min, kappa_max))
        .collect();

    let qv = quasi_volume_constant(&mu, &group, d, base, &cells, &qv_config).map_err(numerical)?;

    let ratio = (radii_max / radii_min).powf(1.0 / (radii_count - 1) as f64);
    let radii: Vec<f64> = (0..radii_count)
        .map(|k| radii_min * ratio.powi(k as i32))
        .collect();
    let probe_points: Vec<Vec<f64>> = (0..probes.min(mu.len()))
        .map(|i| mu.point(i).to_vec())
        .collect();
    let estimates = local_dimension(&mu, &probe_points, &radii).map_err(numerical)?;
    let fitted: Vec<f64> = estimates.iter().filter(|e| !e.skipped).map(|e| e.slope).collect();
    let mean_slope = if fitted.is_empty() {
        f64::NAN
    } else {
        fitted.iter().sum::<f64>() / fitted.len() as f64
    };

    let mut dim_csv = String::from("x,y,z,slope,skipped,smallest_mass\n");
    for e in &estimates {
        dim_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(e.probe[0]),
            fmt_f64(e.probe[1]),
            fmt_f64(e.probe[2]),
            fmt_f64(e.slope),
            e.skipped,
            fmt_f64(e.smallest_mass)
        ));
    }
    let mut ratio_csv = String::from("element,ratio_min,ratio_max\n");
    for e in &qv.per_element {
        ratio_csv.push_str(&format!(
            "{},{},{}\n",
            e.element,
            fmt_f64(e.ratio_min),
            fmt_f64(e.ratio_max)
        ));
    }
    let ratio_points: Vec<(f64, f64)> = qv
        .per_element
        .iter()
        .map(|e| (e.element as f64, e.ratio_max))
        .collect();
    let plot = svg::line_plot(
        "per-element quasi-volume ratio",
        "element",
        "max ratio",
        &[Series { label: "ratio_max".into(), color: svg::PALETTE[3], points: ratio_points }],
    );

    let slopes: Vec<Json> = estimates.iter().map(|e| Json::Float(e.slope)).collect();
    let result = Json::Object(vec![
        ("samples", Json::Int(samples as i64)),
        ("group_size", Json::Int(group_size as i64)),
        ("quasi_volume", Json::Raw(qv.to_json())),
        ("mean_slope", Json::Float(mean_slope)),
        ("slopes", Json::Array(slopes)),
    ]);
    Ok(Artifacts {
        result,
        csv: vec![("dimension.csv", dim_csv), ("ratios.csv", ratio_csv)],
        svg: vec![("ratios.svg", plot)],
    })
}

// ------------------------------------------------------------- oe-check

fn run_oe_check(cfg: &Resolved) -> Result<Artifacts, CliError> {
    let scale = positive(cfg, "oe-check.scale")?;
    let levels = cfg.usize_value("oe-check.levels")?;
    let field_tol = positive(cfg, "oe-check.field_tol")?;
    let sigma_tol = positive(cfg, "oe-check.sigma_tol")?;
    let ratio_bound = positive(cfg, "oe-check.ratio_bound")?;
    let steps = cfg.usize_value("oe-check.steps")?;
    let t_values = cfg.f64_list("oe-check.t_values")?;
    let x_values = cfg.f64_list("oe-check.x_values")?;
    if levels < 4 {
        return Err(CliError::Validation("oe-check.levels must be at least 4".into()));
    }
    if steps == 0 {
        return Err(CliError::Validation("oe-check.steps must be positive".into()));
    }
    let forced = match cfg.str_value("oe-check.force_sigma") {
        "fit" => None,
        raw => Some(raw.parse::<f64>().ok().filter(|s| *s > 0.0).ok_or_else(|| {
            CliError::Validation(format!(
                "oe-check.force_sigma must be `fit` or a positive number, got `{raw}`"
            ))
        })?),
    };

    // Domains sized so every Euler orbit of the constant unit fields
    // stays inside: the source side reaches |x| + t, the image side
    // scale*|x| + sigma*t.
    let x_max = x_values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let t_max = t_values.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let reach = x_max + t_max + 1.0;
    let sigma_cap = scale.max(forced.unwrap_or(scale));
    let image_reach = scale * x_max + sigma_cap * t_max + 1.0;
    let domain = BoxDomain::new(vec![-reach], vec![reach]).map_err(|e| invalid("oe-check", e))?;
    let image_domain = BoxDomain::new(vec![-image_reach], vec![image_reach])
        .map_err(|e| invalid("oe-check", e))?;

    let forward = Jet::from_terms(1, 2, &[(0, &[1], scale)]).expect("linear jet");
    let inverse = Jet::from_terms(1, 2, &[(0, &[1], 1.0 / scale)]).expect("linear jet");
    let h = Conjugacy::new(MapRep::Poly(forward), MapRep::Poly(inverse), domain, 9)
        .map_err(numerical)?;

    // Displacement sequence h2_i(x) = x + 2^{-i}, i = 3 .. 3+levels.
    let h2_seq: Vec<Jet> = (3..3 + levels)
        .map(|i| {
            Jet::from_terms(1, 2, &[(0, &[0], 2f64.powi(-(i as i32))), (0, &[1], 1.0)])
                .expect("translation jet")
        })
        .collect();

    let spec = NormSpec::standard(1, 1);
    let pair =
        synchronized_pair(&h2_seq, &h, &spec, field_tol, sigma_tol, ratio_bound).map_err(numerical)?;
    let residual_pair = match forced {
        None => None,
        Some(s) => Some(
            SyncPair::new(pair.x1().clone(), pair.x2().clone(), s, &spec).map_err(numerical)?,
        ),
    };
    let active = residual_pair.as_ref().unwrap_or(&pair);

    let x_grid: Vec<Vec<f64>> = x_values.iter().map(|&x| vec![x]).collect();
    let residual =
        conjugacy_residual(&h, active, &t_values, &x_grid, steps, &image_domain).map_err(numerical)?;

    let mut csv = String::from("i,h2_norm,h1_norm,ratio\n");
    for (i, (n2, n1)) in pair.h2_norms().iter().zip(pair.h1_norms()).enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            fmt_f64(*n2),
            fmt_f64(*n1),
            fmt_f64(n2 / n1)
        ));
    }
    let ratio_points: Vec<(f64, f64)> = pair
        .h2_norms()
        .iter()
        .zip(pair.h1_norms())
        .enumerate()
        .map(|(i, (n2, n1))| (i as f64, n2 / n1))
        .collect();
    let plot = svg::line_plot(
        "time-scale ratio ladder",
        "i",
        "|h2-id| / |h1-id|",
        &[Series { label: "ratio".into(), color: svg::PALETTE[0], points: ratio_points }],
    );

    let mut fields = vec![
        ("scale", Json::Float(scale)),
        ("pair", Json::Raw(pair.to_json())),
    ];
    if let Some(s) = forced {
        fields.push(("forced_sigma", Json::Float(s)));
    }
    fields.push(("residual", Json::Raw(residual.to_json())));
    Ok(Artifacts {
        result: Json::Object(fields),
        csv: vec![("norms.csv", csv)],
        svg: vec![("ratios.svg", plot)],
    })
}

//! Empirical measures and quasi-invariance diagnostics.
//!
//! Measures are finite sums of weighted atoms, either on the embedded
//! round sphere or on a box in ℝⁿ. On top of them the module builds the
//! conformal Jacobian of a Möbius map, cellwise Radon–Nikodym ratio
//! scans against powers of that Jacobian, local-dimension slopes,
//! translation-discrepancy estimates, and the radial rectification of a
//! conjugated translation through a sampled homeomorphism.

use crate::domain::BoxDomain;
use crate::mobius::Mobius;
use crate::pal;
use crate::rng;
use crate::sphere::{chordal3, SpherePoint};
use rand::Rng;
use std::f64::consts::TAU;
use thiserror::Error;

/// Tolerance on the total weight of a probability measure.
const WEIGHT_TOL: f64 = 1e-12;
/// Tolerance for membership of an atom on the embedded unit sphere.
const UNIT_TOL: f64 = 1e-9;
/// Minimal admissible ratio `r_max / r_min` of a radii ladder: one and
/// a half decades.
const MIN_RADII_SPAN: f64 = 31.622776601683793;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("weights must be non-negative and sum to 1 within 1e-12 (got {0})")]
    BadWeights(f64),
    #[error("atom {index} does not lie in the ambient domain")]
    OutsideAmbient { index: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("operation requires a {expected} ambient")]
    AmbientKind { expected: &'static str },
    #[error("partition needs at least one band and one sector")]
    BadPartition,
    #[error("radii must be finite, positive, strictly increasing and span 1.5 decades")]
    BadRadii,
    #[error("shift moves the comparison core outside the ambient box")]
    ShiftEscape,
    #[error("axis {axis}: sampled map must be strictly monotone with at least 3 nodes")]
    NonMonotone { axis: usize },
    #[error("axis {axis}: value {value} leaves the sampled grid")]
    Stencil { axis: usize, value: f64 },
    #[error("rectified coordinate is not monotone on radial line {line}")]
    NonMonotoneC { line: usize },
    #[error("radial line {line}: needs a nonzero direction, positive extent and a step budget")]
    BadLineSpec { line: usize },
    #[error("radial line {line} does not reach parameter {t}")]
    RadialRange { line: usize, t: f64 },
    #[error("no radial line points in the requested direction")]
    NoMatchingLine,
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// Where a measure lives: the embedded round sphere or a box in ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub enum Ambient {
    Sphere,
    Box(BoxDomain),
}

impl Ambient {
    /// Coordinate dimension of stored atoms (3 for the embedded sphere).
    pub fn dim(&self) -> usize {
        match self {
            Ambient::Sphere => 3,
            Ambient::Box(b) => b.dim(),
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Ambient::Sphere => {
                let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                (n - 1.0).abs() <= UNIT_TOL
            }
            Ambient::Box(b) => b.contains(x),
        }
    }
}

/// Finite atomic probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    ambient: Ambient,
    /// Flattened coordinates, `dim` entries per atom.
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Atoms drawn per seeded substream; fixed so that sampling output
/// depends only on `(n, seed)`, never on the number of worker threads.
const SAMPLE_CHUNK: usize = 4096;

impl EmpiricalMeasure {
    /// Build a measure from explicit atoms. Weights must be
    /// non-negative and sum to 1 within 1e-12; every point must lie in
    /// the ambient domain.
    pub fn from_atoms(ambient: Ambient, atoms: &[(Vec<f64>, f64)]) -> Result<Self, MeasureError> {
        let dim = ambient.dim();
        let mut points = Vec::with_capacity(atoms.len() * dim);
        let mut weights = Vec::with_capacity(atoms.len());
        for (index, (p, w)) in atoms.iter().enumerate() {
            if p.len() != dim {
                return Err(MeasureError::Dimension {
                    expected: dim,
                    got: p.len(),
                });
            }
            if !ambient.contains(p) {
                return Err(MeasureError::OutsideAmbient { index });
            }
            if w.is_nan() || *w < 0.0 {
                return Err(MeasureError::BadWeights(*w));
            }
            points.extend_from_slice(p);
            weights.push(*w);
        }
        let total = pal::fold_sum(&weights);
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(MeasureError::BadWeights(total));
        }
        Ok(EmpiricalMeasure {
            ambient,
            points,
            weights,
        })
    }

    /// Point mass at a single location.
    pub fn dirac(ambient: Ambient, point: Vec<f64>) -> Result<Self, MeasureError> {
        EmpiricalMeasure::from_atoms(ambient, &[(point, 1.0)])
    }

    fn from_flat(ambient: Ambient, points: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), weights.len() * ambient.dim());
        EmpiricalMeasure {
            ambient,
            points,
            weights,
        }
    }

    /// `n` iid uniform atoms on the round sphere, weight `1/n` each.
    pub fn uniform_sphere(n: usize, seed: u64) -> Self {
        Self::sample_chunked(Ambient::Sphere, n, seed, |r, out| {
            out.extend_from_slice(&rng::unit_sphere_point(r));
        })
    }

    /// `n` iid uniform atoms on the equatorial great circle.
    pub fn great_circle(n: usize, seed: u64) -> Self {
        Self::sample_chunked(Ambient::Sphere, n, seed, |r, out| {
            let theta: f64 = r.gen_range(0.0..TAU);
            out.extend_from_slice(&[theta.cos(), theta.sin(), 0.0]);
        })
    }

    /// `n` iid uniform atoms in a box.
    pub fn uniform_box(domain: &BoxDomain, n: usize, seed: u64) -> Self {
        let d = domain.clone();
        Self::sample_chunked(Ambient::Box(domain.clone()), n, seed, move |r, out| {
            for axis in 0..d.dim() {
                out.push(r.gen_range(d.lo()[axis]..d.hi()[axis]));
            }
        })
    }

    fn sample_chunked<F>(ambient: Ambient, n: usize, seed: u64, draw: F) -> Self
    where
        F: Fn(&mut rng::LabRng, &mut Vec<f64>) + Sync + Send,
    {
        let dim = ambient.dim();
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let blocks = pal::map_collect(chunks, |c| {
            let mut r = rng::stream(seed, c as u64);
            let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let mut pts = Vec::with_capacity(count * dim);
            for _ in 0..count {
                draw(&mut r, &mut pts);
            }
            pts
        });
        let mut points = Vec::with_capacity(n * dim);
        for b in blocks {
            points.extend_from_slice(&b);
        }
        let w = 1.0 / n as f64;
        Self::from_flat(ambient, points, vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Total mass, folded in atom order.
    pub fn total_weight(&self) -> f64 {
        pal::fold_sum(&self.weights)
    }

    /// Atoms in storage order.
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points
            .chunks_exact(self.dim())
            .zip(self.weights.iter().copied())
    }

    /// Render as CSV (`x,y,z,weight` on the sphere, `x1..xn,weight` in a
    /// box) with 17-significant-digit values, so a round trip reproduces
    /// every coordinate bit for bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&csv_header(&self.ambient));
        out.push('\n');
        for (p, w) in self.atoms() {
            for c in p {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{w:.16e}\n"));
        }
        out
    }

    /// Parse the format written by [`EmpiricalMeasure::to_csv`]. Blank
    /// lines and `#` comments are ignored.
    pub fn from_csv(text: &str, ambient: Ambient) -> Result<Self, MeasureError> {
        let dim = ambient.dim();
        let expected_header = csv_header(&ambient);
        let mut atoms = Vec::new();
        let mut saw_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != expected_header {
                    return Err(MeasureError::Csv {
                        line: lineno + 1,
                        message: format!("expected header `{expected_header}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(MeasureError::Csv {
                    line: lineno + 1,
                    message: format!("expected {} comma-separated values", dim + 1),
                });
            }
            let mut values = Vec::with_capacity(dim + 1);
            for f in &fields {
                values.push(f.trim().parse::<f64>().map_err(|e| MeasureError::Csv {
                    line: lineno + 1,
                    message: e.to_string(),
                })?);
            }
            let w = values.pop().expect("arity was checked above");
            atoms.push((values, w));
        }
        if !saw_header {
            return Err(MeasureError::Csv {
                line: 1,
                message: "missing header".into(),
            });
        }
        EmpiricalMeasure::from_atoms(ambient, &atoms)
    }

    /// Write the CSV form to a file.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), MeasureError> {
        std::fs::write(path, self.to_csv()).map_err(|e| MeasureError::Io(e.to_string()))
    }

    /// Load a measure from a CSV file.
    pub fn load_csv(path: &std::path::Path, ambient: Ambient) -> Result<Self, MeasureError> {
        let text = std::fs::read_to_string(path).map_err(|e| MeasureError::Io(e.to_string()))?;
        Self::from_csv(&text, ambient)
    }
}

fn csv_header(ambient: &Ambient) -> String {
    match ambient {
        Ambient::Sphere => "x,y,z,weight".to_string(),
        Ambient::Box(b) => {
            let mut cols: Vec<String> = (1..=b.dim()).map(|i| format!("x{i}")).collect();
            cols.push("weight".to_string());
            cols.join(",")
        }
    }
}

/// Conformal stretch of a Möbius map at a point of the sphere, in the
/// round metric: `|g'(z)| (1 + |z|²) / (1 + |g(z)|²)`.
///
/// With determinant-one entries this equals
/// `(1 + |z|²) / (|az + b|² + |cz + d|²)`, a form with no pole at the
/// preimage of ∞; the value at `z = ∞` is the limit `1 / (|a|² + |c|²)`.
/// The area Jacobian is the square of the stretch.
pub fn spherical_jacobian(g: &Mobius, p: &SpherePoint) -> f64 {
    match p {
        SpherePoint::Finite(z) => {
            (1.0 + z.norm_sqr()) / ((g.a * z + g.b).norm_sqr() + (g.c * z + g.d).norm_sqr())
        }
        SpherePoint::Infinity => 1.0 / (g.a.norm_sqr() + g.c.norm_sqr()),
    }
}

/// Image measure under a Möbius map: atoms mapped, weights untouched.
///
/// The identity is special-cased to a clone, so the pushforward under it
/// is the input bit for bit (the chart round trip would otherwise smear
/// last bits of the coordinates).
pub fn pushforward(mu: &EmpiricalMeasure, g: &Mobius) -> Result<EmpiricalMeasure, MeasureError> {
    if !matches!(mu.ambient, Ambient::Sphere) {
        return Err(MeasureError::AmbientKind { expected: "sphere" });
    }
    if g.matrix_distance(&Mobius::identity()) == 0.0 {
        return Ok(mu.clone());
    }
    let mapped = pal::map_collect(mu.len(), |i| {
        let p = mu.point(i);
        g.apply_unit3([p[0], p[1], p[2]])
    });
    let mut points = Vec::with_capacity(mapped.len() * 3);
    for m in mapped {
        points.extend_from_slice(&m);
    }
    Ok(EmpiricalMeasure::from_flat(
        Ambient::Sphere,
        points,
        mu.weights.clone(),
    ))
}

/// Equal-area partition of the sphere into `bands` latitude bands of
/// equal height, each split into `sectors` azimuthal sectors.
///
/// Equal height means equal band area (the cylinder projection is
/// area-preserving), so all `bands × sectors` cells have the same area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereCells {
    bands: usize,
    sectors: usize,
}

impl SphereCells {
    pub fn new(bands: usize, sectors: usize) -> Result<Self, MeasureError> {
        if bands == 0 || sectors == 0 {
            return Err(MeasureError::BadPartition);
        }
        Ok(SphereCells { bands, sectors })
    }

    pub fn cell_count(&self) -> usize {
        self.bands * self.sectors
    }

    /// Flat index of the cell containing a unit vector.
    pub fn index_of(&self, v: &[f64]) -> usize {
        let band = ((v[2] + 1.0) / 2.0 * self.bands as f64).floor() as usize;
        let band = band.min(self.bands - 1);
        let frac = (v[1].atan2(v[0]) / TAU).rem_euclid(1.0);
        let sector = ((frac * self.sectors as f64).floor() as usize).min(self.sectors - 1);
        band * self.sectors + sector
    }
}

/// Which power of the conformal stretch plays the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianBase {
    /// The conformal stretch itself.
    Conformal,
    /// The area Jacobian: stretch to the dimension of the sphere.
    Determinant,
}

impl JacobianBase {
    pub fn as_str(&self) -> &'static str {
        match self {
            JacobianBase::Conformal => "conformal",
            JacobianBase::Determinant => "determinant",
        }
    }

    /// Exponent applied to the conformal stretch when the base Jacobian
    /// is raised to the power `d`. Both bases reduce to one `powf` of
    /// the stretch, so determinant reports at `d` equal conformal
    /// reports at `2d` bit for bit.
    fn stretch_exponent(&self, d: f64) -> f64 {
        match self {
            JacobianBase::Conformal => d,
            JacobianBase::Determinant => 2.0 * d,
        }
    }
}

/// Knobs for the cellwise Radon–Nikodym scan.
#[derive(Debug, Clone, Copy)]
pub struct QuasiVolumeConfig {
    /// Cells with less μ-mass than this are excluded and reported in the
    /// coverage figures.
    pub min_cell_mass: f64,
    /// Threshold above which the violation flag is raised.
    pub c_max: f64,
}

/// Ratio extremes contributed by one sampled group element.
#[derive(Debug, Clone, Copy)]
pub struct ElementRatios {
    pub element: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

/// Result of a cellwise quasi-volume scan.
#[derive(Debug, Clone)]
pub struct QuasiVolumeReport {
    pub d: f64,
    pub base: JacobianBase,
    /// `max(ratio, 1/ratio)` over all included cells and sampled
    /// elements; 1 when nothing contributed.
    pub constant: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub violation: bool,
    pub c_max: f64,
    pub per_element: Vec<ElementRatios>,
    pub cells_total: usize,
    pub cells_included: usize,
    /// μ-mass carried by the included cells.
    pub coverage: f64,
}

impl QuasiVolumeReport {
    /// One ordered JSON object with 17-significant-digit numbers
    /// (non-finite ratios are emitted as quoted strings).
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"d\":{}", fmt_f64(self.d)));
        out.push_str(&format!(",\"base\":\"{}\"", self.base.as_str()));
        out.push_str(&format!(",\"constant\":{}", fmt_f64(self.constant)));
        out.push_str(&format!(",\"ratio_min\":{}", fmt_f64(self.ratio_min)));
        out.push_str(&format!(",\"ratio_max\":{}", fmt_f64(self.ratio_max)));
        out.push_str(&format!(",\"violation\":{}", self.violation));
        out.push_str(&format!(",\"c_max\":{}", fmt_f64(self.c_max)));
        out.push_str(&format!(",\"cells_total\":{}", self.cells_total));
        out.push_str(&format!(",\"cells_included\":{}", self.cells_included));
        out.push_str(&format!(",\"coverage\":{}", fmt_f64(self.coverage)));
        out.push_str(",\"per_element\":[");
        for (i, e) in self.per_element.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "{{\"element\":{},\"ratio_min\":{},\"ratio_max\":{}}}",
                e.element,
                fmt_f64(e.ratio_min),
                fmt_f64(e.ratio_max)
            ));
        }
        out.push_str("]}");
        out
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("\"{x}\"")
    }
}

/// Cellwise Radon–Nikodym scan of a measure against a sampled group.
///
/// For every sampled element the Radon–Nikodym derivative is estimated
/// per cell as `μ(cell) / g_*μ(cell)` and divided by the base Jacobian
/// of `g` raised to `d`. The Jacobian is read at the `g`-preimage of the
/// cell's μ-mass barycenter: the cell ratio compares `μ(cell)` with
/// `μ(g⁻¹ cell)`, so the aligned evaluation point for the derivative of
/// `g` lies in the preimage cell, which keeps the pointwise Jacobian and
/// the cell estimate in step to second order in the cell diameter. An
/// empty pushforward cell under a populated μ-cell yields an infinite
/// ratio (and an infinite constant), which is reported, not masked.
pub fn quasi_volume_constant(
    mu: &EmpiricalMeasure,
    group_sample: &[Mobius],
    d: f64,
    base: JacobianBase,
    cells: &SphereCells,
    config: &QuasiVolumeConfig,
) -> Result<QuasiVolumeReport, MeasureError> {
    if !matches!(mu.ambient, Ambient::Sphere) {
        return Err(MeasureError::AmbientKind { expected: "sphere" });
    }
    let n_cells = cells.cell_count();
    // μ-side masses and mass barycenters, accumulated in atom order.
    let mut mass = vec![0.0f64; n_cells];
    let mut bary = vec![[0.0f64; 3]; n_cells];
    for (p, w) in mu.atoms() {
        let c = cells.index_of(p);
        mass[c] += w;
        bary[c][0] += w * p[0];
        bary[c][1] += w * p[1];
        bary[c][2] += w * p[2];
    }
    let included: Vec<usize> = (0..n_cells)
        .filter(|&c| mass[c] > 0.0 && mass[c] >= config.min_cell_mass)
        .collect();
    let coverage = included.iter().fold(0.0, |acc, &c| acc + mass[c]);
    let eval_points: Vec<SpherePoint> = included
        .iter()
        .map(|&c| {
            let m = mass[c];
            let v = [bary[c][0] / m, bary[c][1] / m, bary[c][2] / m];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            SpherePoint::from_unit3([v[0] / n, v[1] / n, v[2] / n])
        })
        .collect();
    let exponent = base.stretch_exponent(d);

    let mut constant = 1.0f64;
    let (mut ratio_min, mut ratio_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut per_element = Vec::with_capacity(group_sample.len());
    for (index, g) in group_sample.iter().enumerate() {
        let pushed = pushforward(mu, g)?;
        let mut push_mass = vec![0.0f64; n_cells];
        for (p, w) in pushed.atoms() {
            push_mass[cells.index_of(p)] += w;
        }
        let g_inv = g.inverse();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (slot, &c) in included.iter().enumerate() {
            let rn = if push_mass[c] > 0.0 {
                mass[c] / push_mass[c]
            } else {
                f64::INFINITY
            };
            let stretch = spherical_jacobian(g, &g_inv.apply(&eval_points[slot]));
            let ratio = rn / stretch.powf(exponent);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            constant = constant.max(ratio.max(1.0 / ratio));
        }
        if included.is_empty() {
            lo = 1.0;
            hi = 1.0;
        }
        ratio_min = ratio_min.min(lo);
        ratio_max = ratio_max.max(hi);
        per_element.push(ElementRatios {
            element: index,
            ratio_min: lo,
            ratio_max: hi,
        });
    }
    if per_element.is_empty() {
        ratio_min = 1.0;
        ratio_max = 1.0;
    }
    Ok(QuasiVolumeReport {
        d,
        base,
        constant,
        ratio_min,
        ratio_max,
        violation: constant > config.c_max,
        c_max: config.c_max,
        per_element,
        cells_total: n_cells,
        cells_included: included.len(),
        coverage,
    })
}

/// Slope estimate of `log μ(B(x, r))` against `log r` at one probe.
#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    pub probe: Vec<f64>,
    /// Least-squares slope over the radii with positive mass; NaN when
    /// the probe is skipped.
    pub slope: f64,
    /// Set when the smallest ball carries no mass (no slope then).
    pub skipped: bool,
    pub smallest_mass: f64,
}

/// Local-dimension slopes of a measure at the given probe points.
///
/// Balls use the chordal metric on the sphere and the Euclidean metric
/// in a box. The radii ladder must be strictly increasing and span at
/// least one and a half decades.
pub fn local_dimension(
    mu: &EmpiricalMeasure,
    probes: &[Vec<f64>],
    radii: &[f64],
) -> Result<Vec<DimensionEstimate>, MeasureError> {
    if radii.len() < 2
        || radii.iter().any(|r| !r.is_finite() || *r <= 0.0)
        || radii.windows(2).any(|w| w[0] >= w[1])
        || radii[radii.len() - 1] / radii[0] < MIN_RADII_SPAN * (1.0 - 1e-12)
    {
        return Err(MeasureError::BadRadii);
    }
    let dim = mu.dim();
    for p in probes {
        if p.len() != dim {
            return Err(MeasureError::Dimension {
                expected: dim,
                got: p.len(),
            });
        }
    }
    Ok(pal::map_collect(probes.len(), |pi| {
        let probe = &probes[pi];
        // mass landing between consecutive radii, in atom order
        let mut ring = vec![0.0f64; radii.len() + 1];
        for (q, w) in mu.atoms() {
            let dist = match &mu.ambient {
                Ambient::Sphere => chordal3([probe[0], probe[1], probe[2]], [q[0], q[1], q[2]]),
                Ambient::Box(_) => probe
                    .iter()
                    .zip(q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            };
            ring[radii.partition_point(|&r| r < dist)] += w;
        }
        let mut pts = Vec::with_capacity(radii.len());
        let mut acc = 0.0;
        let mut smallest = 0.0;
        for (k, &r) in radii.iter().enumerate() {
            acc += ring[k];
            if k == 0 {
                smallest = acc;
            }
            if acc > 0.0 {
                pts.push((r.ln(), acc.ln()));
            }
        }
        let skipped = smallest <= 0.0 || pts.len() < 2;
        DimensionEstimate {
            probe: probe.clone(),
            slope: if skipped {
                f64::NAN
            } else {
                crate::stats::least_squares_slope(&pts)
            },
            skipped,
            smallest_mass: smallest,
        }
    }))
}

/// Histogram of the shifted measure over a core box.
///
/// Bin `b` receives the mass of atoms with `x + shift` in cell `b` of
/// the uniform grid on `core` (axis 0 fastest); shifted atoms outside
/// the core are dropped. Both the core and its preimage under the shift
/// must sit inside the ambient box, so the comparison never reads a
/// region the measure cannot reach.
pub fn shifted_core_histogram(
    mu: &EmpiricalMeasure,
    core: &BoxDomain,
    bins_per_axis: usize,
    shift: &[f64],
) -> Result<Vec<f64>, MeasureError> {
    let Ambient::Box(domain) = &mu.ambient else {
        return Err(MeasureError::AmbientKind { expected: "box" });
    };
    let dim = domain.dim();
    if core.dim() != dim || shift.len() != dim {
        return Err(MeasureError::Dimension {
            expected: dim,
            got: core.dim().min(shift.len()),
        });
    }
    if bins_per_axis == 0 {
        return Err(MeasureError::BadPartition);
    }
    for (a, &sh) in shift.iter().enumerate() {
        if core.lo()[a] < domain.lo()[a]
            || core.hi()[a] > domain.hi()[a]
            || core.lo()[a] - sh < domain.lo()[a]
            || core.hi()[a] - sh > domain.hi()[a]
        {
            return Err(MeasureError::ShiftEscape);
        }
    }
    let mut hist = vec![0.0f64; bins_per_axis.pow(dim as u32)];
    for (p, w) in mu.atoms() {
        let mut flat = 0usize;
        let mut stride = 1usize;
        let mut inside = true;
        for a in 0..dim {
            let y = p[a] + shift[a];
            if y < core.lo()[a] || y > core.hi()[a] {
                inside = false;
                break;
            }
            let t = (y - core.lo()[a]) / (core.hi()[a] - core.lo()[a]);
            let bin = ((t * bins_per_axis as f64).floor() as usize).min(bins_per_axis - 1);
            flat += bin * stride;
            stride *= bins_per_axis;
        }
        if inside {
            hist[flat] += w;
        }
    }
    Ok(hist)
}

/// Translation-discrepancy report over a core box.
#[derive(Debug, Clone)]
pub struct HaarReport {
    pub bins_per_axis: usize,
    pub per_shift: Vec<f64>,
    /// Max over shifts of the half-L¹ histogram distance; 0 for an
    /// empty shift list.
    pub discrepancy: f64,
}

/// Max over shifts of the half-L¹ distance between the core histograms
/// of μ and of μ translated by the shift.
pub fn haar_discrepancy(
    mu: &EmpiricalMeasure,
    shifts: &[Vec<f64>],
    core: &BoxDomain,
    bins_per_axis: usize,
) -> Result<HaarReport, MeasureError> {
    let base = shifted_core_histogram(mu, core, bins_per_axis, &vec![0.0; mu.dim()])?;
    let distances = pal::map_collect(shifts.len(), |i| {
        shifted_core_histogram(mu, core, bins_per_axis, &shifts[i]).map(|hist| {
            let l1: f64 = base.iter().zip(&hist).map(|(a, b)| (a - b).abs()).sum();
            0.5 * l1
        })
    });
    let mut per_shift = Vec::with_capacity(distances.len());
    for d in distances {
        per_shift.push(d?);
    }
    let discrepancy = pal::fold_max(&per_shift).max(0.0);
    Ok(HaarReport {
        bins_per_axis,
        per_shift,
        discrepancy,
    })
}

/// One strictly monotone sampled coordinate map.
///
/// Values and derivatives at an arbitrary point are those of the
/// quadratic through the three sample nodes nearest to it; at a node
/// the derivative reduces to the classical central difference.
/// Inversion brackets by binary search on the node values and polishes
/// with Newton steps on the same parabola.
#[derive(Debug, Clone)]
pub struct AxisMap {
    xs: Vec<f64>,
    ys: Vec<f64>,
    increasing: bool,
}

impl AxisMap {
    /// `axis` only labels errors. Nodes must be strictly increasing in
    /// `x` and strictly monotone (either way) in `y`.
    pub fn new(axis: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, MeasureError> {
        if xs.len() < 3 || xs.len() != ys.len() || xs.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1]) {
            return Err(MeasureError::NonMonotone { axis });
        }
        let increasing = ys[1] > ys[0];
        let ok = if increasing {
            ys.windows(2).all(|w| w[0] < w[1])
        } else {
            ys.windows(2).all(|w| w[0] > w[1])
        };
        if !ok {
            return Err(MeasureError::NonMonotone { axis });
        }
        Ok(AxisMap {
            xs,
            ys,
            increasing,
        })
    }

    /// Interior node whose parabola window is used at `u`.
    fn window(&self, axis: usize, u: f64) -> Result<usize, MeasureError> {
        let (lo, hi) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let slack = 1e-9 * (hi - lo);
        if !(u >= lo - slack && u <= hi + slack) {
            return Err(MeasureError::Stencil { axis, value: u });
        }
        let j = self.xs.partition_point(|&x| x < u);
        let j = if j == 0 {
            0
        } else if j >= self.xs.len() || u - self.xs[j - 1] <= self.xs[j] - u {
            j - 1
        } else {
            j
        };
        Ok(j.clamp(1, self.xs.len() - 2))
    }

    /// Value and first derivative of the local parabola at `u`.
    fn parabola(&self, j: usize, u: f64) -> (f64, f64) {
        let (x0, x1, x2) = (self.xs[j - 1], self.xs[j], self.xs[j + 1]);
        let (y0, y1, y2) = (self.ys[j - 1], self.ys[j], self.ys[j + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let d012 = (d12 - d01) / (x2 - x0);
        let value = y0 + d01 * (u - x0) + d012 * (u - x0) * (u - x1);
        let deriv = d01 + d012 * ((u - x0) + (u - x1));
        (value, deriv)
    }

    pub fn eval(&self, axis: usize, u: f64) -> Result<f64, MeasureError> {
        Ok(self.parabola(self.window(axis, u)?, u).0)
    }

    pub fn deriv(&self, axis: usize, u: f64) -> Result<f64, MeasureError> {
        Ok(self.parabola(self.window(axis, u)?, u).1)
    }

    pub fn invert(&self, axis: usize, y: f64) -> Result<f64, MeasureError> {
        let last = self.ys.len() - 1;
        let (y_lo, y_hi) = if self.increasing {
            (self.ys[0], self.ys[last])
        } else {
            (self.ys[last], self.ys[0])
        };
        let slack = 1e-9 * (y_hi - y_lo);
        if !(y >= y_lo - slack && y <= y_hi + slack) {
            return Err(MeasureError::Stencil { axis, value: y });
        }
        let i = if self.increasing {
            self.ys.partition_point(|&v| v < y)
        } else {
            self.ys.partition_point(|&v| v > y)
        };
        let i = i.clamp(1, last) - 1;
        let (xa, xb) = (self.xs[i], self.xs[i + 1]);
        let (ya, yb) = (self.ys[i], self.ys[i + 1]);
        let mut x = xa + (y - ya) / (yb - ya) * (xb - xa);
        for _ in 0..4 {
            let (v, dv) = self.parabola(self.window(axis, x)?, x);
            if dv.abs() < 1e-300 {
                break;
            }
            x = (x - (v - y) / dv).clamp(self.xs[0], self.xs[self.xs.len() - 1]);
        }
        Ok(x)
    }
}

/// Coordinatewise sampled homeomorphism `H(x) = (H₁(x₁), …, Hₙ(xₙ))`.
#[derive(Debug, Clone)]
pub struct SampledHomeo {
    axes: Vec<AxisMap>,
}

impl SampledHomeo {
    pub fn from_axes(axes: Vec<AxisMap>) -> Result<Self, MeasureError> {
        if axes.is_empty() {
            return Err(MeasureError::NonMonotone { axis: 0 });
        }
        Ok(SampledHomeo { axes })
    }

    /// Sample `f(axis, x)` on `nodes` uniform nodes per axis of the
    /// domain.
    pub fn sample<F: Fn(usize, f64) -> f64>(
        domain: &BoxDomain,
        nodes: usize,
        f: F,
    ) -> Result<Self, MeasureError> {
        if nodes < 3 {
            return Err(MeasureError::NonMonotone { axis: 0 });
        }
        let mut axes = Vec::with_capacity(domain.dim());
        for a in 0..domain.dim() {
            let (lo, hi) = (domain.lo()[a], domain.hi()[a]);
            let xs: Vec<f64> = (0..nodes)
                .map(|i| lo + (hi - lo) * i as f64 / (nodes - 1) as f64)
                .collect();
            let ys: Vec<f64> = xs.iter().map(|&x| f(a, x)).collect();
            axes.push(AxisMap::new(a, xs, ys)?);
        }
        Ok(SampledHomeo { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &AxisMap {
        &self.axes[a]
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, MeasureError> {
        self.check_dim(x.len())?;
        x.iter()
            .enumerate()
            .map(|(a, &u)| self.axes[a].eval(a, u))
            .collect()
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>, MeasureError> {
        self.check_dim(y.len())?;
        y.iter()
            .enumerate()
            .map(|(a, &v)| self.axes[a].invert(a, v))
            .collect()
    }

    fn check_dim(&self, got: usize) -> Result<(), MeasureError> {
        if got != self.dim() {
            return Err(MeasureError::Dimension {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Local volume distortion at `z` of the conjugated translation
/// `x ↦ H⁻¹(H(x) + b)`.
///
/// Computed axiswise through the chain rule `H′(z) / H′(H⁻¹(H(z)+b))`
/// with grid-stencil derivatives; axes with `b = 0` contribute a factor
/// of exactly 1 (the conjugated zero translation is the identity and
/// needs no stencil).
pub fn rn_translation_field(
    h: &SampledHomeo,
    b: &[f64],
    z: &[f64],
) -> Result<f64, MeasureError> {
    if b.len() != h.dim() || z.len() != h.dim() {
        return Err(MeasureError::Dimension {
            expected: h.dim(),
            got: b.len().min(z.len()),
        });
    }
    let mut det = 1.0f64;
    for a in 0..h.dim() {
        if b[a] == 0.0 {
            continue;
        }
        let axis = h.axis(a);
        let hz = axis.eval(a, z[a])?;
        let rho = axis.invert(a, hz + b[a])?;
        let num = axis.deriv(a, z[a])?;
        let den = axis.deriv(a, rho)?;
        det *= (num / den).abs();
    }
    Ok(det)
}

/// One rectified radial line: cumulative coordinate `c` against the
/// line parameter.
#[derive(Debug, Clone)]
pub struct RadialLine {
    pub direction: Vec<f64>,
    pub ts: Vec<f64>,
    pub cs: Vec<f64>,
}

/// Radial rectification of a conjugated translation family at a center.
#[derive(Debug, Clone)]
pub struct RectifyingMap {
    pub center: Vec<f64>,
    pub lines: Vec<RadialLine>,
    /// How the `(t, c)` samples are read between nodes.
    pub interpolant: &'static str,
}

impl RectifyingMap {
    /// Interpolated `c` at parameter `t ∈ [0, t_max]` of one line.
    pub fn c_at(&self, line: usize, t: f64) -> Result<f64, MeasureError> {
        let l = &self.lines[line];
        let t_max = *l.ts.last().expect("lines always carry samples");
        let slack = 1e-9 * t_max;
        if !(t >= -slack && t <= t_max + slack) {
            return Err(MeasureError::RadialRange { line, t });
        }
        let t = t.clamp(0.0, t_max);
        let i = l.ts.partition_point(|&s| s < t).clamp(1, l.ts.len() - 1);
        let (t0, t1) = (l.ts[i - 1], l.ts[i]);
        let (c0, c1) = (l.cs[i - 1], l.cs[i]);
        Ok(c0 + (c1 - c0) * ((t - t0) / (t1 - t0)))
    }

    /// Signed rectified coordinate `c(|b|)·sign(b)` for scalar
    /// displacements; requires lines in the `+1` and `−1` directions.
    pub fn signed(&self, b: f64) -> Result<f64, MeasureError> {
        if b == 0.0 {
            return Ok(0.0);
        }
        let want = if b > 0.0 { 1.0 } else { -1.0 };
        let line = self
            .lines
            .iter()
            .position(|l| l.direction.len() == 1 && l.direction[0] == want)
            .ok_or(MeasureError::NoMatchingLine)?;
        Ok(want * self.c_at(line, b.abs())?)
    }
}

/// Rectifying map of `h` at `z`: for each `(direction, t_max)` pair the
/// cumulative trapezoid integral of the translation-field distortion
/// along `t ↦ t·direction`, sampled at `steps + 1` uniform parameters.
/// The cumulative coordinate starts at exactly 0 and is checked to be
/// non-decreasing on every line.
pub fn rectifying_map(
    h: &SampledHomeo,
    z: &[f64],
    lines: &[(Vec<f64>, f64)],
    steps: usize,
) -> Result<RectifyingMap, MeasureError> {
    if steps == 0 || lines.is_empty() {
        return Err(MeasureError::BadLineSpec { line: 0 });
    }
    let mut out_lines = Vec::with_capacity(lines.len());
    for (li, (direction, t_max)) in lines.iter().enumerate() {
        if direction.len() != h.dim()
            || direction.iter().all(|&c| c == 0.0)
            || !t_max.is_finite()
            || *t_max <= 0.0
        {
            return Err(MeasureError::BadLineSpec { line: li });
        }
        let ts: Vec<f64> = (0..=steps)
            .map(|k| t_max * k as f64 / steps as f64)
            .collect();
        let sampled = pal::map_collect(ts.len(), |k| {
            let b: Vec<f64> = direction.iter().map(|&c| c * ts[k]).collect();
            rn_translation_field(h, &b, z)
        });
        let mut densities = Vec::with_capacity(sampled.len());
        for v in sampled {
            densities.push(v?);
        }
        let mut cs = Vec::with_capacity(ts.len());
        cs.push(0.0);
        for k in 1..ts.len() {
            let inc = (ts[k] - ts[k - 1]) * 0.5 * (densities[k] + densities[k - 1]);
            cs.push(cs[k - 1] + inc);
        }
        if first_decrease(&cs).is_some() {
            return Err(MeasureError::NonMonotoneC { line: li });
        }
        out_lines.push(RadialLine {
            direction: direction.clone(),
            ts,
            cs,
        });
    }
    Ok(RectifyingMap {
        center: z.to_vec(),
        lines: out_lines,
        interpolant: "piecewise-linear",
    })
}

/// First index where a cumulative coordinate strictly decreases.
fn first_decrease(cs: &[f64]) -> Option<usize> {
    cs.windows(2).position(|w| w[1] < w[0]).map(|i| i + 1)
}

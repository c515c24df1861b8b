//! Orbit-equivalence rigidity tests.
//!
//! A candidate conjugacy is a pair of mutually inverse maps that are
//! only ever evaluated, never differentiated. Around it the module
//! builds synchronized vector-field pairs (difference-field limits of a
//! map sequence and of its conjugate, with an explicit time scale σ),
//! flow-conjugacy residuals `H∘φ₁ᵗ` versus `φ₂^{σt}∘H`, flow-coordinate
//! charts with an identity readout, and the recovery of a Möbius map
//! from point pairs.

use crate::closure::{closure_field, euler_flow, ClosureError};
use crate::domain::BoxDomain;
use crate::jet::{cnorm, cnorm_field, Jet, JetError, NormSpec, VFJet};
use crate::measure::{MeasureError, SampledHomeo};
use crate::mobius::{Mobius, MobiusError};
use crate::pal;
use crate::sphere::SpherePoint;
use thiserror::Error;

/// Round-trip tolerance of a conjugacy on its validation grid.
pub const CONJ_TOL: f64 = 1e-8;
/// Tolerance on the unit C⁰ norm of synchronized fields.
const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RigidityError {
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("inverse∘forward misses the identity by {error:.3e} at {point:?}")]
    RoundTrip { point: Vec<f64>, error: f64 },
    #[error("Möbius representative sends {point:?} to infinity")]
    Unbounded { point: Vec<f64> },
    #[error("conjugation of the sequence needs polynomial forward and inverse maps")]
    NeedsPolynomial,
    #[error("time-scale ratios are not Cauchy: oscillation {oscillation:.3e} > tol {tol:.3e}")]
    SigmaNotCauchy { oscillation: f64, tol: f64 },
    #[error("time scale must be a positive finite real, got {value}")]
    BadSigma { value: f64 },
    #[error("field has C⁰ norm {norm} on the reference grid, expected 1")]
    NotUnitNorm { norm: f64 },
    #[error("chart fields are dependent at the base: Gram determinant {gram:.3e} ≤ floor {floor:.3e}")]
    DependentFields { gram: f64, floor: f64 },
    #[error("chart inversion did not converge: residual {residual:.3e} > tol {tol:.3e}")]
    InversionDiverged { residual: f64, tol: f64 },
    #[error("need at least 3 point pairs, got {got}")]
    NeedThreePairs { got: usize },
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Mobius(#[from] MobiusError),
}

/// One direction of a conjugacy: a closed-form element or a sampled
/// grid map with interpolation.
#[derive(Debug, Clone)]
pub enum MapRep {
    /// Polynomial jet map of a box.
    Poly(Jet),
    /// Möbius map acting on the plane chart, `x = (Re z, Im z)`.
    Mobius(Mobius),
    /// Coordinatewise monotone sampled map.
    Sampled(SampledHomeo),
}

impl MapRep {
    pub fn dim(&self) -> usize {
        match self {
            MapRep::Poly(j) => j.dim(),
            MapRep::Mobius(_) => 2,
            MapRep::Sampled(h) => h.dim(),
        }
    }

    /// Evaluate the map; evaluation is all a conjugacy ever offers.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, RigidityError> {
        if x.len() != self.dim() {
            return Err(RigidityError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        match self {
            MapRep::Poly(j) => Ok(j.eval(x)),
            MapRep::Mobius(m) => {
                let z = SpherePoint::new(x[0], x[1]);
                match m.apply(&z) {
                    SpherePoint::Finite(w) => Ok(vec![w.re, w.im]),
                    SpherePoint::Infinity => Err(RigidityError::Unbounded { point: x.to_vec() }),
                }
            }
            MapRep::Sampled(h) => Ok(h.eval(x)?),
        }
    }
}

/// Candidate conjugacy: forward and inverse maps plus the box on which
/// the forward direction is exercised.
///
/// Construction checks `inverse∘forward = id` on a uniform grid of the
/// domain to within [`CONJ_TOL`]; the inverse direction is evaluated on
/// the forward image, so a sampled inverse only needs its grid to cover
/// that image.
#[derive(Debug, Clone)]
pub struct Conjugacy {
    forward: MapRep,
    inverse: MapRep,
    domain: BoxDomain,
}

impl Conjugacy {
    pub fn new(
        forward: MapRep,
        inverse: MapRep,
        domain: BoxDomain,
        grid_per_axis: usize,
    ) -> Result<Self, RigidityError> {
        let dim = domain.dim();
        if forward.dim() != dim || inverse.dim() != dim {
            return Err(RigidityError::Dimension {
                expected: dim,
                got: forward.dim().min(inverse.dim()),
            });
        }
        if grid_per_axis < 2 {
            return Err(RigidityError::BadGrid(
                "round-trip grid needs at least 2 nodes per axis".into(),
            ));
        }
        let conj = Conjugacy {
            forward,
            inverse,
            domain,
        };
        let checks = pal::map_collect(conj.domain.grid_len(grid_per_axis), |i| {
            let x = conj.domain.grid_node(grid_per_axis, i);
            let back = conj.inverse.eval(&conj.forward.eval(&x)?)?;
            let err = sup_diff(&back, &x);
            Ok::<(Vec<f64>, f64), RigidityError>((x, err))
        });
        for check in checks {
            let (x, err) = check?;
            if err > CONJ_TOL {
                return Err(RigidityError::RoundTrip {
                    point: x,
                    error: err,
                });
            }
        }
        Ok(conj)
    }

    /// The identity conjugacy of a box.
    pub fn identity(domain: BoxDomain) -> Self {
        let id = Jet::identity(domain.dim(), 1);
        Conjugacy {
            forward: MapRep::Poly(id.clone()),
            inverse: MapRep::Poly(id),
            domain,
        }
    }

    pub fn forward_at(&self, x: &[f64]) -> Result<Vec<f64>, RigidityError> {
        self.forward.eval(x)
    }

    pub fn inverse_at(&self, y: &[f64]) -> Result<Vec<f64>, RigidityError> {
        self.inverse.eval(y)
    }

    pub fn forward(&self) -> &MapRep {
        &self.forward
    }

    pub fn inverse(&self) -> &MapRep {
        &self.inverse
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

/// Synchronized pair of unit vector fields with an explicit time scale.
///
/// σ is deliberately explicit: the two limit fields are normalized by
/// their own sup norms, so the conjugated flows can only be expected to
/// match after the time reparametrization `t ↦ σt`, and the residual
/// test checks exactly that form.
#[derive(Debug, Clone)]
pub struct SyncPair {
    x1: VFJet,
    x2: VFJet,
    sigma: f64,
    h1_norms: Vec<f64>,
    h2_norms: Vec<f64>,
}

impl SyncPair {
    /// Validates the unit-norm invariant of both fields on the grid of
    /// `spec` (order 0) and the positivity of σ.
    pub fn new(
        x1: VFJet,
        x2: VFJet,
        sigma: f64,
        spec: &NormSpec,
    ) -> Result<Self, RigidityError> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(RigidityError::BadSigma { value: sigma });
        }
        let spec0 = spec.with_order(0);
        for field in [&x1, &x2] {
            let norm = cnorm_field(field, &spec0)?;
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(RigidityError::NotUnitNorm { norm });
            }
        }
        Ok(SyncPair {
            x1,
            x2,
            sigma,
            h1_norms: Vec::new(),
            h2_norms: Vec::new(),
        })
    }

    pub fn x1(&self) -> &VFJet {
        &self.x1
    }

    pub fn x2(&self) -> &VFJet {
        &self.x2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Displacement norms `‖h¹_i − id‖₀` of the conjugated sequence.
    pub fn h1_norms(&self) -> &[f64] {
        &self.h1_norms
    }

    /// Displacement norms `‖h²_i − id‖₀` of the input sequence.
    pub fn h2_norms(&self) -> &[f64] {
        &self.h2_norms
    }

    /// Ordered JSON object with 17-significant-digit numbers.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"sigma\":{}", fmt_f64(self.sigma)));
        out.push_str(&format!(",\"length\":{}", self.h2_norms.len()));
        for (key, norms) in [("h2_norms", &self.h2_norms), ("h1_norms", &self.h1_norms)] {
            out.push_str(&format!(",\"{key}\":["));
            for (i, n) in norms.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_f64(*n));
            }
            out.push(']');
        }
        out.push('}');
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

/// Difference-field limits of a map sequence and of its conjugate.
///
/// `X2` is the limit of the normalized displacement fields of `h2_seq`;
/// each `h¹_i = H⁻¹ ∘ h²_i ∘ H` is formed by polynomial composition (the
/// conjugacy must be polynomial for the sequence to stay in the jet
/// algebra) and `X1` is its limit. The time scale is the limit of
/// `‖h²_i − id‖₀ / ‖h¹_i − id‖₀`, whose tail must be Cauchy within
/// `sigma_tol`; `tol` and `ratio_bound` govern the field limits.
pub fn synchronized_pair(
    h2_seq: &[Jet],
    h: &Conjugacy,
    spec: &NormSpec,
    tol: f64,
    sigma_tol: f64,
    ratio_bound: f64,
) -> Result<SyncPair, RigidityError> {
    let (MapRep::Poly(fwd), MapRep::Poly(inv)) = (&h.forward, &h.inverse) else {
        return Err(RigidityError::NeedsPolynomial);
    };
    let mut h1_seq = Vec::with_capacity(h2_seq.len());
    for h2 in h2_seq {
        let d = h2.degree().max(fwd.degree()).max(inv.degree());
        h1_seq.push(inv.compose(&h2.compose(fwd, d)?, d)?);
    }
    let x2 = closure_field(h2_seq, spec, tol, ratio_bound)?;
    let x1 = closure_field(&h1_seq, spec, tol, ratio_bound)?;

    let spec0 = spec.with_order(0);
    let mut h2_norms = Vec::with_capacity(h2_seq.len());
    let mut h1_norms = Vec::with_capacity(h1_seq.len());
    let mut ratios = Vec::with_capacity(h2_seq.len());
    for (h2, h1) in h2_seq.iter().zip(&h1_seq) {
        let n2 = cnorm(h2, true, &spec0)?;
        let n1 = cnorm(h1, true, &spec0)?;
        h2_norms.push(n2);
        h1_norms.push(n1);
        ratios.push(n2 / n1);
    }
    let last = *ratios.last().expect("closure_field rejects empty input");
    let mut oscillation = 0.0f64;
    for r in &ratios[ratios.len() / 2..] {
        oscillation = oscillation.max((r - last).abs());
    }
    if oscillation > sigma_tol {
        return Err(RigidityError::SigmaNotCauchy {
            oscillation,
            tol: sigma_tol,
        });
    }
    let mut pair = SyncPair::new(x1, x2, last, spec)?;
    pair.h1_norms = h1_norms;
    pair.h2_norms = h2_norms;
    Ok(pair)
}

/// Sup flow-conjugacy residual of a pair over a time and space grid.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub sigma: f64,
    /// Sup over the grids of the Euclidean distance between
    /// `H(φ₁ᵗ(x))` and `φ₂^{σt}(H(x))`.
    pub residual: f64,
    pub worst_t: f64,
    pub worst_x: Vec<f64>,
    pub points: usize,
    pub steps: usize,
}

impl ResidualReport {
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"sigma\":{}", fmt_f64(self.sigma)));
        out.push_str(&format!(",\"residual\":{}", fmt_f64(self.residual)));
        out.push_str(&format!(",\"worst_t\":{}", fmt_f64(self.worst_t)));
        out.push_str(",\"worst_x\":[");
        for (i, c) in self.worst_x.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*c));
        }
        out.push_str(&format!("],\"points\":{}", self.points));
        out.push_str(&format!(",\"steps\":{}", self.steps));
        out.push('}');
        out
    }
}

/// Sup over `t_grid × x_grid` of the distance between `H(φ₁ᵗ(x))` and
/// `φ₂^{σt}(H(x))`, with both flows from Euler's method at `steps`
/// steps. `φ₁` must stay in the conjugacy domain and `φ₂` in
/// `image_domain`; leaving either is an error.
pub fn conjugacy_residual(
    h: &Conjugacy,
    pair: &SyncPair,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    steps: usize,
    image_domain: &BoxDomain,
) -> Result<ResidualReport, RigidityError> {
    if t_grid.is_empty() || x_grid.is_empty() {
        return Err(RigidityError::BadGrid("empty residual grid".into()));
    }
    let jobs = t_grid.len() * x_grid.len();
    let rows = pal::map_collect(jobs, |idx| {
        let t = t_grid[idx / x_grid.len()];
        let x = &x_grid[idx % x_grid.len()];
        let a = euler_flow(pair.x1(), x, t, steps, &h.domain)?;
        let ha = h.forward_at(&a)?;
        let hx = h.forward_at(x)?;
        let b = euler_flow(pair.x2(), &hx, pair.sigma * t, steps, image_domain)?;
        Ok::<f64, RigidityError>(euclid(&ha, &b))
    });
    let mut residual = f64::NEG_INFINITY;
    let mut worst = 0usize;
    for (idx, row) in rows.into_iter().enumerate() {
        let d = row?;
        if d > residual {
            residual = d;
            worst = idx;
        }
    }
    Ok(ResidualReport {
        sigma: pair.sigma,
        residual,
        worst_t: t_grid[worst / x_grid.len()],
        worst_x: x_grid[worst % x_grid.len()].clone(),
        points: jobs,
        steps,
    })
}

/// Specification of a flow-coordinate chart
/// `(s₁,…,sₙ) ↦ φ_{Xₙ}^{sₙ} ∘ ⋯ ∘ φ_{X₁}^{s₁}(q)`.
#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub base: Vec<f64>,
    /// Ordered fields; `fields[0]` flows first.
    pub fields: Vec<VFJet>,
    /// Flow-time ranges, one axis per field.
    pub s_box: BoxDomain,
    /// Euler step budget per flow.
    pub steps: usize,
    /// Box the flows must stay inside.
    pub domain: BoxDomain,
    /// Floor on the Gram determinant of the field frame at the base.
    pub gram_floor: f64,
}

/// Validated flow chart.
#[derive(Debug, Clone)]
pub struct FlowChart {
    spec: ChartSpec,
    /// Inverse of the field frame at the base, used to damp inversion
    /// updates.
    frame_inv: Vec<Vec<f64>>,
}

impl FlowChart {
    pub fn new(spec: ChartSpec) -> Result<Self, RigidityError> {
        let n = spec.base.len();
        if spec.fields.len() != n || spec.s_box.dim() != n || spec.domain.dim() != n {
            return Err(RigidityError::Dimension {
                expected: n,
                got: spec.fields.len().min(spec.s_box.dim()).min(spec.domain.dim()),
            });
        }
        for field in &spec.fields {
            if field.dim() != n {
                return Err(RigidityError::Dimension {
                    expected: n,
                    got: field.dim(),
                });
            }
        }
        if spec.steps == 0 {
            return Err(RigidityError::BadGrid("chart step budget must be ≥ 1".into()));
        }
        // frame of field values at the base, columns X_i(q)
        let frame: Vec<Vec<f64>> = spec.fields.iter().map(|f| f.eval(&spec.base)).collect();
        let gram = gram_det(&frame);
        if gram.is_nan() || gram <= spec.gram_floor {
            return Err(RigidityError::DependentFields {
                gram,
                floor: spec.gram_floor,
            });
        }
        let frame_inv = invert_matrix(&columns(&frame)).ok_or(RigidityError::DependentFields {
            gram,
            floor: spec.gram_floor,
        })?;
        Ok(FlowChart { spec, frame_inv })
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    /// `φ_{Xₙ}^{sₙ} ∘ ⋯ ∘ φ_{X₁}^{s₁}(q)`.
    pub fn eval(&self, s: &[f64]) -> Result<Vec<f64>, RigidityError> {
        if s.len() != self.spec.base.len() {
            return Err(RigidityError::Dimension {
                expected: self.spec.base.len(),
                got: s.len(),
            });
        }
        let mut q = self.spec.base.clone();
        for (field, &time) in self.spec.fields.iter().zip(s) {
            q = euler_flow(field, &q, time, self.spec.steps, &self.spec.domain)?;
        }
        Ok(q)
    }

    /// Solve `chart(s) = y` for `s`; `tol` bounds the image-side sup
    /// residual. Damped frozen-frame iteration first, coordinatewise
    /// bisection as fallback; running out of both is an error, the
    /// result is never clamped to the box.
    pub fn invert(&self, y: &[f64], tol: f64) -> Result<Vec<f64>, RigidityError> {
        match self.invert_fixed_point(y, tol) {
            Some(s) => Ok(s),
            None => self.invert_bisection(y, tol),
        }
    }

    /// Damped fixed-point iteration `s ← s + ½·A⁻¹(y − chart(s))` with
    /// the frame at the base frozen as A. `None` on stall, escape or
    /// iteration budget — the caller falls back to bisection.
    fn invert_fixed_point(&self, y: &[f64], tol: f64) -> Option<Vec<f64>> {
        let mut s = self.s_center();
        for _ in 0..200 {
            let p = self.eval(&s).ok()?;
            let r: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a - b).collect();
            if r.iter().all(|v| v.abs() <= tol) {
                return Some(s);
            }
            for (si, row) in s.iter_mut().zip(&self.frame_inv) {
                let dot: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
                *si += 0.5 * dot;
            }
        }
        None
    }

    /// Coordinatewise bisection sweeps over the s-box in frame
    /// coordinates.
    fn invert_bisection(&self, y: &[f64], tol: f64) -> Result<Vec<f64>, RigidityError> {
        let n = y.len();
        let residual = |s: &[f64]| -> Result<Vec<f64>, RigidityError> {
            let p = self.eval(s)?;
            let raw: Vec<f64> = p.iter().zip(y).map(|(a, b)| a - b).collect();
            Ok((0..n)
                .map(|i| (0..n).map(|j| self.frame_inv[i][j] * raw[j]).sum())
                .collect())
        };
        let mut s = self.s_center();
        for _ in 0..12 {
            for i in 0..n {
                let (lo, hi) = (self.spec.s_box.lo()[i], self.spec.s_box.hi()[i]);
                let at = |v: f64, s: &[f64]| -> Result<f64, RigidityError> {
                    let mut probe = s.to_vec();
                    probe[i] = v;
                    Ok(residual(&probe)?[i])
                };
                let (mut a, mut b) = (lo, hi);
                let (fa, fb) = (at(a, &s)?, at(b, &s)?);
                if fa == 0.0 {
                    s[i] = a;
                    continue;
                }
                if fb == 0.0 {
                    s[i] = b;
                    continue;
                }
                if fa.signum() == fb.signum() {
                    continue;
                }
                let mut fa = fa;
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    let fm = at(mid, &s)?;
                    if fm == 0.0 || fa.signum() == fm.signum() {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                s[i] = 0.5 * (a + b);
            }
            let p = self.eval(&s)?;
            let sup = p
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if sup <= tol {
                return Ok(s);
            }
        }
        let p = self.eval(&s)?;
        let sup = p
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        Err(RigidityError::InversionDiverged { residual: sup, tol })
    }

    fn s_center(&self) -> Vec<f64> {
        self.spec
            .s_box
            .lo()
            .iter()
            .zip(self.spec.s_box.hi())
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}

/// Sup identity-readout deviation of a conjugacy between two charts.
#[derive(Debug, Clone)]
pub struct ReadoutReport {
    /// Sup over the s-grid of `|chart2⁻¹(H(chart1(s))) − s|∞`.
    pub deviation: f64,
    pub worst_s: Vec<f64>,
    /// Grid rows `(s, deviation at s)` in node order.
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl ReadoutReport {
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"deviation\":{}", fmt_f64(self.deviation)));
        out.push_str(",\"worst_s\":[");
        for (i, c) in self.worst_s.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*c));
        }
        out.push_str(&format!("],\"points\":{}", self.rows.len()));
        out.push('}');
        out
    }

    /// CSV of the deviations over the s-grid: `s1,…,sn,deviation`.
    pub fn to_csv(&self) -> String {
        let n = self.worst_s.len();
        let mut out = (1..=n).map(|i| format!("s{i}")).collect::<Vec<_>>().join(",");
        out.push_str(",deviation\n");
        for (s, d) in &self.rows {
            for c in s {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{d:.16e}\n"));
        }
        out
    }
}

/// Sup over the s-box grid of `|chart2⁻¹(H(chart1(s))) − s|∞`.
///
/// When the readout vanishes the conjugacy acts as the identity in the
/// flow coordinates of the two charts.
pub fn identity_readout(
    h: &Conjugacy,
    chart1: &FlowChart,
    chart2: &FlowChart,
    per_axis: usize,
    inv_tol: f64,
) -> Result<ReadoutReport, RigidityError> {
    if per_axis < 2 {
        return Err(RigidityError::BadGrid(
            "readout grid needs at least 2 nodes per axis".into(),
        ));
    }
    let s_box = &chart1.spec.s_box;
    let rows = pal::map_collect(s_box.grid_len(per_axis), |i| {
        let s = s_box.grid_node(per_axis, i);
        let p = chart1.eval(&s)?;
        let y = h.forward_at(&p)?;
        let u = chart2.invert(&y, inv_tol)?;
        let dev = sup_diff(&u, &s);
        Ok::<(Vec<f64>, f64), RigidityError>((s, dev))
    });
    let mut collected = Vec::with_capacity(rows.len());
    for row in rows {
        collected.push(row?);
    }
    let mut deviation = f64::NEG_INFINITY;
    let mut worst = 0usize;
    for (i, (_, d)) in collected.iter().enumerate() {
        if *d > deviation {
            deviation = *d;
            worst = i;
        }
    }
    Ok(ReadoutReport {
        deviation,
        worst_s: collected[worst].0.clone(),
        rows: collected,
    })
}

/// Möbius map recovered from point pairs, with its fit residual.
#[derive(Debug, Clone)]
pub struct MobiusFit {
    pub map: Mobius,
    /// Max chordal error over the pairs beyond the defining three.
    pub residual: f64,
}

/// Exact Möbius map through the first three pairs (cross-ratio
/// construction), scored by the max chordal error on the remaining
/// pairs.
pub fn recover_mobius(pairs: &[(SpherePoint, SpherePoint)]) -> Result<MobiusFit, RigidityError> {
    if pairs.len() < 3 {
        return Err(RigidityError::NeedThreePairs { got: pairs.len() });
    }
    let a = Mobius::to_zero_one_inf(&pairs[0].0, &pairs[1].0, &pairs[2].0)?;
    let b = Mobius::to_zero_one_inf(&pairs[0].1, &pairs[1].1, &pairs[2].1)?;
    let map = b.inverse().compose(&a);
    let mut residual = 0.0f64;
    for (p, q) in &pairs[3..] {
        residual = residual.max(map.apply(p).chordal(q));
    }
    Ok(MobiusFit { map, residual })
}

/// Uniform grid of a box, including endpoints, node index axis-0
/// fastest.
pub fn box_grid(domain: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    (0..domain.grid_len(per_axis))
        .map(|i| domain.grid_node(per_axis, i))
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Rows of the matrix whose columns are the given vectors.
fn columns(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols.len();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// Gram determinant of a list of frame vectors.
fn gram_det(frame: &[Vec<f64>]) -> f64 {
    let n = frame.len();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| frame[i].iter().zip(&frame[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    det(&gram)
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut result = 1.0f64;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("column range is nonempty");
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            result = -result;
        }
        result *= a[col][col];
        let pivot_row = a[col].clone();
        for row in a.iter_mut().skip(col + 1) {
            let factor = row[col] / pivot_row[col];
            for (v, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                *v -= factor * p;
            }
        }
    }
    result
}

/// Matrix inverse by Gauss–Jordan elimination; `None` when singular.
fn invert_matrix(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("column range is nonempty");
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(pivot, col);
        inv.swap(pivot, col);
        let scale = a[col][col];
        for k in 0..n {
            a[col][k] /= scale;
            inv[col][k] /= scale;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            for k in 0..n {
                a[row][k] -= factor * a[col][k];
                inv[row][k] -= factor * inv[col][k];
            }
        }
    }
    Some(inv)
}

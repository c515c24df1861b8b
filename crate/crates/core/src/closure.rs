//! Renormalization at a contracting fixed point and flow extraction.
//!
//! Conjugating a near-identity polynomial map `g` by powers of the
//! diagonal contraction `F` rescales each monomial of `g` by its
//! multiplier: expanding monomials (multiplier > 1, including constant
//! terms) are blown up until a displacement threshold is crossed
//! (case 1), purely contracting parts decay geometrically (case 2,
//! contracting), and multiplier-1 blocks are conjugation-invariant
//! (case 2, concentrated). The normalized displacement fields of such a
//! sequence converge to a vector field; Euler's polygonal method and
//! iterate-versus-flow comparison make that limit checkable.

use crate::domain::BoxDomain;
use crate::grading::{multiplier, Contraction, GradingError, MERGE_TOL};
use crate::jet::{
    cnorm, cnorm_field, difference_field, Jet, JetError, NormSpec, VFJet,
};
use crate::pal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClosureError {
    #[error("map is not near the identity: ‖g−id‖₀ = {norm:.3e} exceeds {bound:.3e}")]
    NotNearIdentity { norm: f64, bound: f64 },
    #[error("input {index} of the sequence is the identity map")]
    IdentityInput { index: usize },
    #[error(
        "norm-ratio precondition failed at input {index}: ‖h−id‖_r/‖h−id‖₀ = {ratio:.3e} > {bound:.3e}"
    )]
    RatioBound { index: usize, ratio: f64, bound: f64 },
    #[error(
        "threshold not crossed within k_max = {k_max}: ‖h−id‖₀ = {last_norm:.3e} ≤ {threshold:.3e}"
    )]
    NotCrossed {
        k_max: u32,
        last_norm: f64,
        threshold: f64,
    },
    #[error("difference fields did not converge: oscillation {oscillation:.3e} > tol {tol:.3e}")]
    NotConverged { oscillation: f64, tol: f64 },
    #[error("orbit left the domain at step {step}, point {point:?}")]
    Escape { step: usize, point: Vec<f64> },
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("bad flow spec: {0}")]
    BadFlowSpec(String),
    #[error(transparent)]
    Grading(#[from] GradingError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Parameters of one renormalization run.
#[derive(Debug, Clone)]
pub struct RenormSchedule {
    /// Differentiation order r of the controlled norm.
    pub order: usize,
    /// Remainder bounds δ_i, strictly positive and non-increasing. The
    /// jets here are exact polynomials, so the true remainder is zero;
    /// δ still sets the threshold scale. Indices past the end reuse the
    /// last value; an empty sequence means the 1e-12 floor throughout.
    pub deltas: Vec<f64>,
    /// Threshold multiplier (≥ 1; the classical choice is 10).
    pub threshold_factor: f64,
    /// Norm-equivalence constant C relating ‖·‖_r to ‖·‖₀ on
    /// polynomials of the working degree.
    pub norm_constant: f64,
    /// Abort bound for the conjugation power k.
    pub k_max: u32,
}

const DELTA_FLOOR: f64 = 1e-12;

impl RenormSchedule {
    pub fn new(
        order: usize,
        deltas: Vec<f64>,
        threshold_factor: f64,
        norm_constant: f64,
        k_max: u32,
    ) -> Result<Self, ClosureError> {
        if threshold_factor < 1.0 || !threshold_factor.is_finite() {
            return Err(ClosureError::BadSchedule(format!(
                "threshold factor must be ≥ 1, got {threshold_factor}"
            )));
        }
        if norm_constant <= 0.0 || !norm_constant.is_finite() {
            return Err(ClosureError::BadSchedule(format!(
                "norm constant must be positive, got {norm_constant}"
            )));
        }
        if deltas.iter().any(|&d| !d.is_finite() || d <= 0.0) {
            return Err(ClosureError::BadSchedule("deltas must be positive".into()));
        }
        if deltas.windows(2).any(|w| w[1] > w[0]) {
            return Err(ClosureError::BadSchedule(
                "deltas must be non-increasing".into(),
            ));
        }
        if k_max == 0 {
            return Err(ClosureError::BadSchedule("k_max must be positive".into()));
        }
        Ok(RenormSchedule {
            order,
            deltas,
            threshold_factor,
            norm_constant,
            k_max,
        })
    }

    pub fn delta(&self, index: usize) -> f64 {
        self.deltas
            .get(index)
            .or(self.deltas.last())
            .copied()
            .unwrap_or(DELTA_FLOOR)
            .max(DELTA_FLOOR)
    }

    /// Displacement threshold `factor · max(δ_i, C·δ_i)`.
    pub fn threshold(&self, index: usize) -> f64 {
        let d = self.delta(index);
        self.threshold_factor * d.max(self.norm_constant * d)
    }
}

/// Which branch of the case split a run took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenormCase {
    /// An expanding part (constant term or multiplier > 1) crossed the
    /// threshold at the minimal k.
    Case1,
    /// Every multiplier < 1: the conjugates collapse to the identity.
    Case2Contracting,
    /// Maximal multiplier exactly 1: the invariant block dominates.
    Case2Concentrated,
}

impl RenormCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            RenormCase::Case1 => "Case1",
            RenormCase::Case2Contracting => "Case2_contracting",
            RenormCase::Case2Concentrated => "Case2_concentrated",
        }
    }
}

/// Outcome of renormalizing one map.
#[derive(Debug, Clone)]
pub struct RenormReport {
    pub case: RenormCase,
    /// Conjugation power k actually used.
    pub k: u32,
    /// The conjugate `h = F^{−k} ∘ g ∘ F^k`.
    pub h: Jet,
    /// Polynomial part of the conjugate. Jets are exact polynomials, so
    /// this equals `h` and the remainder bound below is zero.
    pub polynomial: Jet,
    pub remainder_bound: f64,
    pub delta: f64,
    pub threshold: f64,
    /// ‖h − id‖₀ over the standard grid.
    pub c0_norm: f64,
    /// ‖h − id‖_r at the schedule's order.
    pub cr_norm: f64,
    /// Case-1 sandwich: (9/10)·threshold ≤ ‖h−id‖₀ is required, and
    /// ‖h−id‖_r ≤ C·threshold/λ₁ + δ (the one-step overshoot of the
    /// crossing is at most the largest multiplier step, 1/λ₁).
    pub sandwich_lower: f64,
    pub sandwich_upper: f64,
    /// Case-2 contracting: per-step decay ratio (the largest multiplier
    /// of g − id).
    pub decay_ratio: Option<f64>,
    /// Case-2 concentrated: displacement mass fraction on the maximal
    /// multiplier block at the reported k.
    pub concentration: Option<f64>,
}

/// Exact conjugate `F^{−k} ∘ g ∘ F^k`: the coefficient of `x^α` in
/// component l is scaled by `m(l, α)^k`. The identity's linear part has
/// multiplier 1, so scaling the displacement alone is the whole story.
pub fn conjugate(g: &Jet, f: &Contraction, k: u32) -> Result<Jet, ClosureError> {
    let disp = g.sub_id();
    let mut scaled = VFJet::zero(g.dim(), g.degree());
    for (l, alpha, c) in disp.coefficients() {
        let m = multiplier(l, alpha, f)?;
        scaled.set_coefficient(l, alpha.clone(), c * m.powi(k as i32))?;
    }
    Ok(Jet::from_displacement(&scaled))
}

/// Displacement mass of `h − id` split at the multiplier-1 block:
/// (mass on multiplier-1 monomials, total mass), measured in C⁰ norm of
/// the block fields.
fn concentration_split(
    h: &Jet,
    f: &Contraction,
    spec: &NormSpec,
) -> Result<(f64, f64), ClosureError> {
    let disp = h.sub_id();
    let mut on_block = VFJet::zero(h.dim(), h.degree());
    let mut total = 0.0;
    let parts = crate::grading::decompose(&disp, f)?;
    for part in &parts {
        let norm = cnorm_field(&part.field, spec)?;
        total += norm;
        if (part.multiplier - 1.0).abs() <= MERGE_TOL {
            on_block = on_block.add(&part.field)?;
        }
    }
    let block_norm = cnorm_field(&on_block, spec)?;
    Ok((block_norm, total))
}

/// Renormalize one near-identity map at schedule position `index`.
pub fn renormalize(
    g: &Jet,
    f: &Contraction,
    sched: &RenormSchedule,
    index: usize,
) -> Result<RenormReport, ClosureError> {
    f.check_resonance_free(g.degree() as u32)?;
    let dim = g.dim();
    let spec0 = NormSpec::standard(0, dim);
    let spec_r = NormSpec::standard(sched.order, dim);
    let delta = sched.delta(index);
    let threshold = sched.threshold(index);

    let g_norm = cnorm(g, true, &spec0)?;
    if g_norm > threshold {
        return Err(ClosureError::NotNearIdentity {
            norm: g_norm,
            bound: threshold,
        });
    }

    let disp = g.sub_id();
    let mut has_constant = false;
    let mut max_mult = 0.0f64;
    for (l, alpha, _) in disp.coefficients() {
        if alpha.order() == 0 {
            has_constant = true;
        }
        max_mult = max_mult.max(multiplier(l, alpha, f)?);
    }

    let sandwich_lower = 0.9 * threshold;
    let sandwich_upper = sched.norm_constant * threshold / f.lambda_min() + delta;
    let finish = |case: RenormCase,
                  k: u32,
                  h: Jet,
                  decay_ratio: Option<f64>,
                  concentration: Option<f64>|
     -> Result<RenormReport, ClosureError> {
        let c0_norm = cnorm(&h, true, &spec0)?;
        let cr_norm = cnorm(&h, true, &spec_r)?;
        Ok(RenormReport {
            case,
            k,
            polynomial: h.clone(),
            h,
            remainder_bound: 0.0,
            delta,
            threshold,
            c0_norm,
            cr_norm,
            sandwich_lower,
            sandwich_upper,
            decay_ratio,
            concentration,
        })
    };

    if has_constant || max_mult > 1.0 + MERGE_TOL {
        // Case 1: smallest positive k crossing the threshold.
        for k in 1..=sched.k_max {
            let h = conjugate(g, f, k)?;
            let norm = cnorm(&h, true, &spec0)?;
            if norm > threshold {
                return finish(RenormCase::Case1, k, h, None, None);
            }
        }
        let last = conjugate(g, f, sched.k_max)?;
        let last_norm = cnorm(&last, true, &spec0)?;
        return Err(ClosureError::NotCrossed {
            k_max: sched.k_max,
            last_norm,
            threshold,
        });
    }

    if max_mult < 1.0 - MERGE_TOL {
        // Case 2, contracting: pick the smallest k at the remainder
        // scale (capped at k_max; decay makes the cap harmless).
        let mut k = sched.k_max;
        for trial in 0..=sched.k_max {
            let h = conjugate(g, f, trial)?;
            if cnorm(&h, true, &spec0)? <= delta {
                k = trial;
                break;
            }
        }
        let h = conjugate(g, f, k)?;
        return finish(RenormCase::Case2Contracting, k, h, Some(max_mult), None);
    }

    // Case 2, concentrated: smallest k with ≥ 99% of the displacement
    // mass on the multiplier-1 block.
    for k in 0..=sched.k_max {
        let h = conjugate(g, f, k)?;
        let (block, total) = concentration_split(&h, f, &spec0)?;
        if block >= 0.99 * total {
            return finish(
                RenormCase::Case2Concentrated,
                k,
                h,
                None,
                Some(block / total),
            );
        }
    }
    let last = conjugate(g, f, sched.k_max)?;
    let last_norm = cnorm(&last, true, &spec0)?;
    Err(ClosureError::NotCrossed {
        k_max: sched.k_max,
        last_norm,
        threshold,
    })
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl RenormReport {
    /// One ordered JSON object: case, k, threshold, norms, and the
    /// coefficient table of h.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"case\":\"{}\"", self.case.as_str()));
        out.push_str(&format!(",\"k\":{}", self.k));
        out.push_str(&format!(",\"delta\":{}", fmt_f64(self.delta)));
        out.push_str(&format!(",\"threshold\":{}", fmt_f64(self.threshold)));
        out.push_str(&format!(",\"c0_norm\":{}", fmt_f64(self.c0_norm)));
        out.push_str(&format!(",\"cr_norm\":{}", fmt_f64(self.cr_norm)));
        out.push_str(&format!(
            ",\"sandwich_lower\":{}",
            fmt_f64(self.sandwich_lower)
        ));
        out.push_str(&format!(
            ",\"sandwich_upper\":{}",
            fmt_f64(self.sandwich_upper)
        ));
        out.push_str(&format!(
            ",\"remainder_bound\":{}",
            fmt_f64(self.remainder_bound)
        ));
        if let Some(r) = self.decay_ratio {
            out.push_str(&format!(",\"decay_ratio\":{}", fmt_f64(r)));
        }
        if let Some(c) = self.concentration {
            out.push_str(&format!(",\"concentration\":{}", fmt_f64(c)));
        }
        out.push_str(",\"h\":[");
        let mut first = true;
        for (l, alpha, c) in self.h.coefficients() {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!(
                "{{\"l\":{},\"alpha\":[{}],\"coeff\":{}}}",
                l + 1,
                alpha
                    .exponents()
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                fmt_f64(c)
            ));
        }
        out.push_str("]}");
        out
    }
}

/// Limit of the normalized displacement fields of a map sequence.
///
/// Each `h_i` is turned into `(h_i − id)/‖h_i − id‖₀`; the coefficient
/// sequence must be Cauchy within `tol` against its final element, and
/// each input must satisfy the norm-ratio bound
/// `‖h_i−id‖_r ≤ ratio_bound·‖h_i−id‖₀`.
pub fn closure_field(
    h_seq: &[Jet],
    spec: &NormSpec,
    tol: f64,
    ratio_bound: f64,
) -> Result<VFJet, ClosureError> {
    if h_seq.is_empty() {
        return Err(ClosureError::NotConverged {
            oscillation: f64::INFINITY,
            tol,
        });
    }
    let spec0 = spec.with_order(0);
    let spec_r = spec;
    let mut fields = Vec::with_capacity(h_seq.len());
    for (index, h) in h_seq.iter().enumerate() {
        let c0 = cnorm(h, true, &spec0)?;
        if c0 == 0.0 {
            return Err(ClosureError::IdentityInput { index });
        }
        let cr = cnorm(h, true, spec_r)?;
        let ratio = cr / c0;
        if ratio > ratio_bound {
            return Err(ClosureError::RatioBound {
                index,
                ratio,
                bound: ratio_bound,
            });
        }
        let (field, _) = difference_field(h, &spec0)?;
        fields.push(field);
    }
    let last = fields.last().expect("nonempty sequence");
    let mut oscillation = 0.0f64;
    // judge convergence on the tail: the last half of the sequence must
    // already sit within tol of the final field
    let start = h_seq.len() / 2;
    for field in &fields[start..] {
        oscillation = oscillation.max(field.coefficient_distance(last)?);
    }
    if oscillation > tol {
        return Err(ClosureError::NotConverged { oscillation, tol });
    }
    Ok(last.clone())
}

/// Euler's polygonal method: `x_{m+1} = x_m + (t/steps)·X(x_m)`,
/// erroring with the exit step if the orbit leaves `domain`.
pub fn euler_flow(
    x_field: &VFJet,
    x0: &[f64],
    t: f64,
    steps: usize,
    domain: &BoxDomain,
) -> Result<Vec<f64>, ClosureError> {
    if steps == 0 {
        return Err(ClosureError::BadFlowSpec("steps must be ≥ 1".into()));
    }
    if !domain.contains(x0) {
        return Err(ClosureError::Escape {
            step: 0,
            point: x0.to_vec(),
        });
    }
    let h = t / steps as f64;
    let mut x = x0.to_vec();
    for step in 1..=steps {
        let v = x_field.eval(&x);
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += h * vi;
        }
        if !domain.contains(&x) {
            return Err(ClosureError::Escape { step, point: x });
        }
    }
    Ok(x)
}

/// Evaluation layout for iterate-versus-flow comparisons.
#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub t: f64,
    /// Euler step count for the reference flow.
    pub steps: usize,
    /// Grid domain U₀ whose nodes seed the comparison.
    pub eval_domain: BoxDomain,
    /// Ambient domain U that orbits must not leave.
    pub ambient: BoxDomain,
    pub grid_per_axis: usize,
}

impl FlowSpec {
    pub fn new(
        t: f64,
        steps: usize,
        eval_domain: BoxDomain,
        ambient: BoxDomain,
        grid_per_axis: usize,
    ) -> Result<Self, ClosureError> {
        if !t.is_finite() || t < 0.0 {
            return Err(ClosureError::BadFlowSpec(format!("bad time {t}")));
        }
        if steps == 0 || grid_per_axis == 0 {
            return Err(ClosureError::BadFlowSpec(
                "steps and grid size must be positive".into(),
            ));
        }
        if eval_domain.dim() != ambient.dim() {
            return Err(ClosureError::BadFlowSpec(
                "eval and ambient domains must share a dimension".into(),
            ));
        }
        let inside = eval_domain
            .lo()
            .iter()
            .zip(ambient.lo())
            .all(|(a, b)| a >= b)
            && eval_domain.hi().iter().zip(ambient.hi()).all(|(a, b)| a <= b);
        if !inside {
            return Err(ClosureError::BadFlowSpec(
                "eval domain must sit inside the ambient domain".into(),
            ));
        }
        Ok(FlowSpec {
            t,
            steps,
            eval_domain,
            ambient,
            grid_per_axis,
        })
    }
}

/// Sup over the evaluation grid of `|h^{⌊t/C⌋}(x) − φᵗ(x)|` (max over
/// components), with `φ` the Euler reference flow of `X`.
pub fn iterate_flow_compare(
    x_field: &VFJet,
    h: &Jet,
    c: f64,
    spec: &FlowSpec,
) -> Result<f64, ClosureError> {
    if !c.is_finite() || c <= 0.0 {
        return Err(ClosureError::BadFlowSpec(format!(
            "displacement scale C must be positive, got {c}"
        )));
    }
    // The floor is ill-conditioned when t/C sits at an integer: double
    // rounding can land the quotient one ulp below it and drop a whole
    // iterate. Snap quotients within a relative 1e-9 of an integer.
    let quotient = spec.t / c;
    let rounded = quotient.round();
    let iterations = if (quotient - rounded).abs() <= 1e-9 * quotient.abs().max(1.0) {
        rounded as usize
    } else {
        quotient.floor() as usize
    };
    let nodes = spec.eval_domain.grid_len(spec.grid_per_axis);
    let errors = pal::map_collect(nodes, |node| -> Result<f64, ClosureError> {
        let x0 = spec.eval_domain.grid_node(spec.grid_per_axis, node);
        let mut y = x0.clone();
        for step in 1..=iterations {
            y = h.eval(&y);
            if !spec.ambient.contains(&y) {
                return Err(ClosureError::Escape { step, point: y });
            }
        }
        let flowed = euler_flow(x_field, &x0, spec.t, spec.steps, &spec.ambient)?;
        Ok(y
            .iter()
            .zip(&flowed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    });
    let mut worst = 0.0f64;
    for e in errors {
        worst = worst.max(e?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::least_squares_slope;

    fn half() -> Contraction {
        Contraction::new(vec![0.5]).unwrap()
    }

    fn schedule_t01() -> RenormSchedule {
        // δ = 0.01, factor 10, C = 1 → threshold 0.1
        RenormSchedule::new(1, vec![0.01], 10.0, 1.0, 60).unwrap()
    }

    fn translation_map(eps: f64) -> Jet {
        Jet::from_terms(1, 2, &[(0, &[0], eps), (0, &[1], 1.0)]).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(RenormSchedule::new(1, vec![0.1, 0.2], 10.0, 1.0, 10).is_err());
        assert!(RenormSchedule::new(1, vec![0.1], 0.5, 1.0, 10).is_err());
        assert!(RenormSchedule::new(1, vec![-0.1], 10.0, 1.0, 10).is_err());
        assert!(RenormSchedule::new(1, vec![0.1], 10.0, 1.0, 0).is_err());
        let s = RenormSchedule::new(1, vec![], 10.0, 2.0, 10).unwrap();
        assert_eq!(s.delta(3), 1e-12);
        assert!((s.threshold(3) - 2e-11).abs() < 1e-26);
    }

    #[test]
    fn conjugation_matches_composition_oracle() {
        let f = half();
        let g = Jet::from_terms(1, 3, &[(0, &[0], 1e-3), (0, &[1], 1.002), (0, &[2], 0.05), (0, &[3], -0.01)])
            .unwrap();
        let fj = f.to_jet(3);
        let fj_inv = f.inverse_jet(3);
        for k in 0..6u32 {
            let fast = conjugate(&g, &f, k).unwrap();
            let mut slow = g.clone();
            for _ in 0..k {
                slow = fj_inv.compose(&slow.compose(&fj, 3).unwrap(), 3).unwrap();
            }
            assert!(
                fast.sub_id()
                    .coefficient_distance(&slow.sub_id())
                    .unwrap()
                    < 1e-12,
                "conjugation mismatch at k={k}"
            );
        }
    }

    #[test]
    fn case1_threshold_crossing_matches_log_formula() {
        let f = half();
        let sched = schedule_t01();
        for (i, eps) in [1e-4, 1e-6, 1e-8].into_iter().enumerate() {
            let report = renormalize(&translation_map(eps), &f, &sched, 0).unwrap();
            assert_eq!(report.case, RenormCase::Case1);
            let expected = (0.1f64 / eps).log2().ceil() as u32;
            assert_eq!(report.k, expected, "eps case {i}");
            // h(x) = x + 2^k ε exactly
            assert_eq!(report.c0_norm, 2.0f64.powi(report.k as i32) * eps);
            // minimality: one step earlier stays at or below threshold
            let earlier = conjugate(&translation_map(eps), &f, report.k - 1).unwrap();
            let spec0 = NormSpec::standard(0, 1);
            assert!(cnorm(&earlier, true, &spec0).unwrap() <= report.threshold);
            // sandwich
            assert!(report.c0_norm >= report.sandwich_lower);
            assert!(report.cr_norm <= report.sandwich_upper);
        }
    }

    #[test]
    fn case1_rejects_far_from_identity_input() {
        let f = half();
        let sched = schedule_t01();
        let err = renormalize(&translation_map(0.5), &f, &sched, 0).unwrap_err();
        assert!(matches!(err, ClosureError::NotNearIdentity { .. }));
    }

    #[test]
    fn case1_not_crossed_is_explicit() {
        let f = half();
        let sched = RenormSchedule::new(1, vec![0.01], 10.0, 1.0, 5).unwrap();
        let err = renormalize(&translation_map(1e-8), &f, &sched, 0).unwrap_err();
        match err {
            ClosureError::NotCrossed { k_max, last_norm, .. } => {
                assert_eq!(k_max, 5);
                assert!(last_norm <= 0.1);
            }
            other => panic!("expected NotCrossed, got {other}"),
        }
    }

    #[test]
    fn case2_contracting_decays_at_the_multiplier_ratio() {
        let f = half();
        let sched = schedule_t01();
        let g = Jet::from_terms(1, 2, &[(0, &[1], 1.0), (0, &[2], 0.05)]).unwrap();
        let report = renormalize(&g, &f, &sched, 0).unwrap();
        assert_eq!(report.case, RenormCase::Case2Contracting);
        assert_eq!(report.decay_ratio, Some(0.5));
        let spec0 = NormSpec::standard(0, 1);
        let mut prev = cnorm(&g, true, &spec0).unwrap();
        for k in 1..=10 {
            let norm = cnorm(&conjugate(&g, &f, k).unwrap(), true, &spec0).unwrap();
            let ratio = norm / prev;
            assert!(
                (ratio - 0.5).abs() <= 1e-9,
                "step {k} decay ratio {ratio} off"
            );
            prev = norm;
        }
        assert!(report.c0_norm <= sched.delta(0));
    }

    #[test]
    fn case2_concentrated_is_conjugation_invariant() {
        let f = half();
        let sched = schedule_t01();
        let g = Jet::from_terms(1, 1, &[(0, &[1], 1.0 + 1e-3)]).unwrap();
        let report = renormalize(&g, &f, &sched, 0).unwrap();
        assert_eq!(report.case, RenormCase::Case2Concentrated);
        assert_eq!(report.k, 0);
        assert_eq!(report.concentration, Some(1.0));
        // h = g for every k: the linear diagonal part is invariant
        for k in 0..5 {
            let h = conjugate(&g, &f, k).unwrap();
            assert_eq!(
                h.sub_id().coefficient_distance(&g.sub_id()).unwrap(),
                0.0,
                "conjugation moved the multiplier-1 block at k={k}"
            );
        }
    }

    #[test]
    fn case2_concentration_picks_the_smallest_k() {
        // multiplier-1 block x∂ plus a contracting x² part with larger
        // initial mass: concentration needs a few steps of decay
        let f = half();
        let sched = schedule_t01();
        let g = Jet::from_terms(1, 2, &[(0, &[1], 1.0 + 1e-4), (0, &[2], 5e-3)]).unwrap();
        let report = renormalize(&g, &f, &sched, 0).unwrap();
        assert_eq!(report.case, RenormCase::Case2Concentrated);
        assert!(report.concentration.unwrap() >= 0.99);
        assert!(report.k > 0, "block share starts below 99%");
        // one step earlier concentration must still be below 99%
        let earlier = conjugate(&g, &f, report.k - 1).unwrap();
        let spec0 = NormSpec::standard(0, 1);
        let (block, total) = concentration_split(&earlier, &f, &spec0).unwrap();
        assert!(block < 0.99 * total);
    }

    #[test]
    fn report_serializes_to_ordered_json() {
        let f = half();
        let report = renormalize(&translation_map(1e-4), &f, &schedule_t01(), 0).unwrap();
        let json = report.to_json();
        assert!(json.starts_with("{\"case\":\"Case1\",\"k\":10,"));
        assert!(json.contains("\"threshold\":1.0000000000000001e-1"));
        assert!(json.contains("\"h\":[{\"l\":1,\"alpha\":[0],"));
        assert_eq!(json, report.to_json(), "serialization must be stable");
    }

    #[test]
    fn closure_field_of_translation_family() {
        let spec = NormSpec::standard(1, 1);
        let seq: Vec<Jet> = (1..=8).map(|i| translation_map(2.0f64.powi(-i))).collect();
        let limit = closure_field(&seq, &spec, 1e-12, 10.0).unwrap();
        // limit is the unit constant field e₁
        assert_eq!(limit.coefficient(0, &crate::jet::MultiIndex::zero(1)), 1.0);
        assert_eq!(cnorm_field(&limit, &spec.with_order(0)).unwrap(), 1.0);
    }

    #[test]
    fn closure_field_of_quadratic_family() {
        let spec = NormSpec::standard(1, 1);
        let seq: Vec<Jet> = (1..=8)
            .map(|i| {
                Jet::from_terms(1, 2, &[(0, &[1], 1.0), (0, &[2], 2.0f64.powi(-i))]).unwrap()
            })
            .collect();
        let limit = closure_field(&seq, &spec, 1e-12, 10.0).unwrap();
        assert_eq!(limit.coefficient(0, &crate::jet::MultiIndex::new(vec![2])), 1.0);
        assert_eq!(cnorm_field(&limit, &spec.with_order(0)).unwrap(), 1.0);
    }

    #[test]
    fn closure_field_from_renormalized_family_is_constant() {
        // g_i(x) = x + ε_i + ε_i x²: after renormalization the blown-up
        // constant dominates and the limit is ∂
        let f = half();
        let sched = schedule_t01();
        let spec = NormSpec::standard(1, 1);
        let mut seq = Vec::new();
        for i in 0..6 {
            let eps = 1e-4 * 4.0f64.powi(-i);
            let g = Jet::from_terms(1, 2, &[(0, &[0], eps), (0, &[1], 1.0), (0, &[2], eps)])
                .unwrap();
            let report = renormalize(&g, &f, &sched, 0).unwrap();
            assert_eq!(report.case, RenormCase::Case1);
            seq.push(report.h);
        }
        let limit = closure_field(&seq, &spec, 1e-4, 10.0).unwrap();
        let constant = limit.coefficient(0, &crate::jet::MultiIndex::zero(1));
        assert!((constant - 1.0).abs() < 1e-4);
        let quadratic = limit.coefficient(0, &crate::jet::MultiIndex::new(vec![2]));
        assert!(quadratic.abs() < 1e-4);
    }

    #[test]
    fn closure_field_error_paths() {
        let spec = NormSpec::standard(1, 1);
        let id = Jet::identity(1, 2);
        assert!(matches!(
            closure_field(&[id], &spec, 1e-12, 10.0),
            Err(ClosureError::IdentityInput { index: 0 })
        ));
        // oscillating sequence: ±e₁ displacements
        let seq: Vec<Jet> = (0..6)
            .map(|i| translation_map(if i % 2 == 0 { 1e-3 } else { -1e-3 }))
            .collect();
        assert!(matches!(
            closure_field(&seq, &spec, 1e-3, 10.0),
            Err(ClosureError::NotConverged { .. })
        ));
        // steep derivative versus tiny displacement violates the ratio
        // precondition
        let steep = Jet::from_terms(1, 5, &[(0, &[1], 1.0), (0, &[5], 1e-3)]).unwrap();
        assert!(matches!(
            closure_field(&[steep], &spec.with_order(1), 1e-3, 2.0),
            Err(ClosureError::RatioBound { .. })
        ));
    }

    #[test]
    fn euler_flow_worked_examples() {
        let domain = BoxDomain::new(vec![-2.0], vec![4.0]).unwrap();
        // constant field: exact up to summation roundoff
        let e1 = VFJet::monomial(1, 0, &[0], 1.0).unwrap();
        let out = euler_flow(&e1, &[0.0], 0.5, 100, &domain).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-14);
        // X = x∂: flow is e^t
        let linear = VFJet::monomial(1, 0, &[1], 1.0).unwrap();
        let out = euler_flow(&linear, &[1.0], 1.0, 10_000, &domain).unwrap();
        assert!((out[0] - std::f64::consts::E).abs() < 2e-4);
        // t = 0
        let out = euler_flow(&linear, &[1.0], 0.0, 10, &domain).unwrap();
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn euler_flow_escape_is_reported_with_the_exit_step() {
        let domain = BoxDomain::symmetric_unit(1);
        let e1 = VFJet::monomial(1, 0, &[0], 1.0).unwrap();
        let err = euler_flow(&e1, &[0.95], 1.0, 100, &domain).unwrap_err();
        match err {
            ClosureError::Escape { step, point } => {
                // needs to cover 0.05 at speed 1 with h = 0.01
                assert_eq!(step, 6);
                assert!(point[0] > 1.0);
            }
            other => panic!("expected escape, got {other}"),
        }
    }

    #[test]
    fn iterate_flow_compare_constant_field() {
        let ambient = BoxDomain::new(vec![-2.0], vec![2.0]).unwrap();
        let eval = BoxDomain::new(vec![-0.5], vec![0.5]).unwrap();
        let spec = FlowSpec::new(1.0, 200_000, eval, ambient, 9).unwrap();
        let c = 1e-3;
        let h = translation_map(c).truncate(1);
        let e1 = VFJet::monomial(1, 0, &[0], 1.0).unwrap();
        let err = iterate_flow_compare(&e1, &h, c, &spec).unwrap();
        // error is exactly the floor defect t − C·⌊t/C⌋ ≤ C
        assert!(err <= c + 1e-12, "error {err} exceeds C");

        let spec0 = FlowSpec::new(
            0.0,
            10,
            BoxDomain::new(vec![-0.5], vec![0.5]).unwrap(),
            BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(),
            9,
        )
        .unwrap();
        assert_eq!(iterate_flow_compare(&e1, &h, c, &spec0).unwrap(), 0.0);
    }

    #[test]
    fn iterate_flow_compare_linear_family_slope() {
        let ambient = BoxDomain::new(vec![-0.1], vec![3.0]).unwrap();
        let eval = BoxDomain::new(vec![0.0], vec![0.5]).unwrap();
        let linear = VFJet::monomial(1, 0, &[1], 1.0).unwrap();
        let mut points = Vec::new();
        for exp in 2..=5 {
            let c = 10.0f64.powi(-exp);
            let h = Jet::from_terms(1, 1, &[(0, &[1], 1.0 + c)]).unwrap();
            let spec = FlowSpec::new(1.0, 1_000_000, eval.clone(), ambient.clone(), 17).unwrap();
            let err = iterate_flow_compare(&linear, &h, c, &spec).unwrap();
            assert!(err <= 2e-3 * (c / 1e-3).max(1.0) + 2e-3);
            points.push((c.ln(), err.ln()));
        }
        let slope = least_squares_slope(&points);
        assert!(
            (0.9..=1.1).contains(&slope),
            "log-log slope {slope} outside [0.9, 1.1]: {points:?}"
        );
    }

    #[test]
    fn flow_spec_validation() {
        let unit = BoxDomain::symmetric_unit(1);
        let big = BoxDomain::new(vec![-2.0], vec![2.0]).unwrap();
        assert!(FlowSpec::new(1.0, 10, unit.clone(), big.clone(), 5).is_ok());
        assert!(FlowSpec::new(1.0, 10, big.clone(), unit.clone(), 5).is_err());
        assert!(FlowSpec::new(-1.0, 10, unit.clone(), big.clone(), 5).is_err());
        assert!(FlowSpec::new(1.0, 0, unit, big, 5).is_err());
    }
}

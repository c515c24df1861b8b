//! Multiplier grading of polynomial vector fields at a linear contraction.
//!
//! For the diagonal contraction `F(x) = (λ₁x₁, …, λₙxₙ)` every vector
//! monomial `x^α ∂_l` rescales under pullback by the multiplier
//! `m(l, α) = λ^α / λ_l`. Sorting the occurring multiplier values in
//! descending order gives a ladder `m¹ > m² > …`; fields split into
//! homogeneous components along it, pullbacks act diagonally, and the
//! component with the largest multiplier survives renormalized pullback.

use crate::jet::{lie_bracket, JetError, MultiIndex, VFJet};
use crate::jet::multi_indices_up_to;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GradingError {
    #[error("eigenvalues must satisfy 0 < λ1 < … < λn < 1, got {0:?}")]
    BadSpectrum(Vec<f64>),
    #[error("resonance λ_{l} = λ^{alpha:?} within 1e-12 relative")]
    Resonant { l: usize, alpha: Vec<u32> },
    #[error(
        "ladder not certified complete: λn^(cap+1)/λ1 = {margin:.3e} is not below cutoff {cutoff:.3e}; raise degree_cap"
    )]
    NotCertified { margin: f64, cutoff: f64 },
    #[error("zero field has no leading component")]
    ZeroField,
    #[error("component index {index} out of range for dimension {dim}")]
    ComponentRange { index: usize, dim: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Diagonal linear contraction with strictly ordered positive spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    lambda: Vec<f64>,
}

impl Contraction {
    pub fn new(lambda: Vec<f64>) -> Result<Self, GradingError> {
        let ok = !lambda.is_empty()
            && lambda.iter().all(|&l| l.is_finite() && l > 0.0 && l < 1.0)
            && lambda.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(GradingError::BadSpectrum(lambda));
        }
        Ok(Contraction { lambda })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.lambda.last().expect("spectrum is nonempty")
    }

    /// Verify `λ_l ≠ λ^α` for every `2 ≤ |α| ≤ degree` (1e-12 relative).
    pub fn check_resonance_free(&self, degree: u32) -> Result<(), GradingError> {
        for alpha in multi_indices_up_to(self.dim(), degree) {
            if alpha.order() < 2 {
                continue;
            }
            let power: f64 = alpha
                .exponents()
                .iter()
                .zip(&self.lambda)
                .map(|(&a, &l)| l.powi(a as i32))
                .product();
            for (l, &lam) in self.lambda.iter().enumerate() {
                if (lam - power).abs() <= 1e-12 * lam {
                    return Err(GradingError::Resonant {
                        l: l + 1,
                        alpha: alpha.exponents().to_vec(),
                    });
                }
            }
        }
        Ok(())
    }

    /// The contraction as a linear jet, for composition with other jets.
    pub fn to_jet(&self, degree: usize) -> crate::jet::Jet {
        let terms: Vec<(usize, Vec<u32>, f64)> = self
            .lambda
            .iter()
            .enumerate()
            .map(|(l, &lam)| {
                (
                    l,
                    MultiIndex::unit(self.dim(), l).exponents().to_vec(),
                    lam,
                )
            })
            .collect();
        let borrowed: Vec<(usize, &[u32], f64)> = terms
            .iter()
            .map(|(l, e, c)| (*l, e.as_slice(), *c))
            .collect();
        crate::jet::Jet::from_terms(self.dim(), degree, &borrowed)
            .expect("diagonal linear jet is always well formed")
    }

    /// The inverse contraction `F^{-1}` as a linear jet.
    pub fn inverse_jet(&self, degree: usize) -> crate::jet::Jet {
        let inv: Vec<f64> = self.lambda.iter().map(|&l| 1.0 / l).collect();
        let terms: Vec<(usize, Vec<u32>, f64)> = inv
            .iter()
            .enumerate()
            .map(|(l, &v)| (l, MultiIndex::unit(self.dim(), l).exponents().to_vec(), v))
            .collect();
        let borrowed: Vec<(usize, &[u32], f64)> = terms
            .iter()
            .map(|(l, e, c)| (*l, e.as_slice(), *c))
            .collect();
        crate::jet::Jet::from_terms(self.dim(), degree, &borrowed)
            .expect("diagonal linear jet is always well formed")
    }
}

/// Multiplier `λ^α / λ_l` of the vector monomial `x^α ∂_l`, computed as
/// one product of signed integer powers so that equal-in-math values of
/// the same shape agree bitwise.
pub fn multiplier(l: usize, alpha: &MultiIndex, f: &Contraction) -> Result<f64, GradingError> {
    if l >= f.dim() {
        return Err(GradingError::ComponentRange {
            index: l,
            dim: f.dim(),
        });
    }
    let mut m = 1.0f64;
    for (i, (&a, &lam)) in alpha.exponents().iter().zip(f.lambda()).enumerate() {
        let e = a as i32 - if i == l { 1 } else { 0 };
        if e != 0 {
            m *= lam.powi(e);
        }
    }
    Ok(m)
}

/// Relative tolerance for merging multiplier values into one rung.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LadderEntry {
    pub multiplier: f64,
    /// Monomials `(l, α)` carrying this multiplier, in (l, graded-lex α)
    /// order.
    pub monomials: Vec<(usize, MultiIndex)>,
}

#[derive(Debug, Clone)]
pub struct MultiplierLadder {
    pub contraction: Contraction,
    pub cutoff: f64,
    pub degree_cap: u32,
    /// Strictly descending multiplier values ≥ cutoff.
    pub entries: Vec<LadderEntry>,
}

/// All distinct multiplier values ≥ `cutoff` from monomials of order ≤
/// `order_cap`, with their monomial sets, sorted descending.
fn enumerate_rungs(f: &Contraction, cutoff: f64, order_cap: u32) -> Vec<LadderEntry> {
    let mut pairs: Vec<(f64, usize, MultiIndex)> = Vec::new();
    for alpha in multi_indices_up_to(f.dim(), order_cap) {
        for l in 0..f.dim() {
            let m = multiplier(l, &alpha, f).expect("component index in range");
            if m >= cutoff {
                pairs.push((m, l, alpha.clone()));
            }
        }
    }
    pairs.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let mut entries: Vec<LadderEntry> = Vec::new();
    for (m, l, alpha) in pairs {
        match entries.last_mut() {
            Some(e) if (e.multiplier - m).abs() <= MERGE_TOL * e.multiplier => {
                e.monomials.push((l, alpha));
            }
            _ => entries.push(LadderEntry {
                multiplier: m,
                monomials: vec![(l, alpha)],
            }),
        }
    }
    entries
}

/// Enumerate the multiplier ladder above `cutoff`. Completeness is
/// certified when `λn^(degree_cap+1)/λ1 < cutoff`: every monomial of
/// order beyond the cap then has multiplier below cutoff.
pub fn ladder(
    f: &Contraction,
    cutoff: f64,
    degree_cap: u32,
) -> Result<MultiplierLadder, GradingError> {
    if cutoff.is_nan() || cutoff <= 0.0 {
        return Err(GradingError::NotCertified {
            margin: f64::INFINITY,
            cutoff,
        });
    }
    let margin = f.lambda_max().powi(degree_cap as i32 + 1) / f.lambda_min();
    if margin >= cutoff {
        return Err(GradingError::NotCertified { margin, cutoff });
    }
    Ok(MultiplierLadder {
        contraction: f.clone(),
        cutoff,
        degree_cap,
        entries: enumerate_rungs(f, cutoff, degree_cap),
    })
}

impl MultiplierLadder {
    /// 1-based position of a multiplier value among the ladder rungs, or
    /// None if the value is below the cutoff or between rungs.
    pub fn index_of(&self, m: f64) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| (e.multiplier - m).abs() <= MERGE_TOL * e.multiplier.abs())
            .map(|p| p + 1)
    }
}

/// 1-based rank of a multiplier value among all distinct monomial
/// multipliers ≥ it, enumerated to a self-certifying degree cap. Unlike
/// [`MultiplierLadder::index_of`] this works for arbitrarily small
/// values by extending the enumeration as needed.
pub fn value_index(f: &Contraction, value: f64) -> Result<usize, GradingError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(GradingError::ZeroField);
    }
    // multipliers ≥ value require λn^|α|/λ1 ≥ value, bounding |α|
    let floor = value * 0.5; // headroom so the target rung itself is inside
    let cap = ((floor * f.lambda_min()).ln() / f.lambda_max().ln())
        .ceil()
        .max(1.0) as u32;
    let entries = enumerate_rungs(f, floor, cap);
    let rank = entries
        .iter()
        .take_while(|e| e.multiplier > value && (e.multiplier - value).abs() > MERGE_TOL * e.multiplier)
        .count();
    Ok(rank + 1)
}

/// A multiplier-homogeneous piece of a vector field.
#[derive(Debug, Clone)]
pub struct GradedComponent {
    pub multiplier: f64,
    /// 1-based ladder rank of the multiplier (see [`value_index`]).
    pub index: usize,
    pub field: VFJet,
}

/// Split a field into multiplier-homogeneous components, descending by
/// multiplier. Coefficients are moved verbatim, so summing the
/// components reproduces the field exactly.
pub fn decompose(x: &VFJet, f: &Contraction) -> Result<Vec<GradedComponent>, GradingError> {
    let mut groups: Vec<(f64, VFJet)> = Vec::new();
    for (l, alpha, c) in x.coefficients() {
        let m = multiplier(l, alpha, f)?;
        let slot = groups.iter_mut().find(|(gm, _)| gm.to_bits() == m.to_bits());
        let field = match slot {
            Some((_, field)) => field,
            None => {
                groups.push((m, VFJet::zero(x.dim(), x.degree())));
                &mut groups.last_mut().expect("just pushed").1
            }
        };
        field.set_coefficient(l, alpha.clone(), c)?;
    }
    groups.sort_by(|a, b| b.0.total_cmp(&a.0));
    groups
        .into_iter()
        .map(|(m, field)| {
            Ok(GradedComponent {
                multiplier: m,
                index: value_index(f, m)?,
                field,
            })
        })
        .collect()
}

/// Pullback `(F^k)_* X`: each monomial scaled by its multiplier to the
/// k-th power.
pub fn pullback(k: u32, x: &VFJet, f: &Contraction) -> Result<VFJet, GradingError> {
    let mut out = VFJet::zero(x.dim(), x.degree());
    for (l, alpha, c) in x.coefficients() {
        let m = multiplier(l, alpha, f)?;
        out.set_coefficient(l, alpha.clone(), c * m.powi(k as i32))?;
    }
    Ok(out)
}

fn leading_multiplier(y: &VFJet, f: &Contraction) -> Result<f64, GradingError> {
    let mut best = f64::NEG_INFINITY;
    for (l, alpha, _) in y.coefficients() {
        best = best.max(multiplier(l, alpha, f)?);
    }
    if best == f64::NEG_INFINITY {
        return Err(GradingError::ZeroField);
    }
    Ok(best)
}

/// Renormalized pullback `(F^k)_* Y / (m¹)^k` where `m¹` is the leading
/// multiplier of `Y`. Each monomial is scaled by `(m/m¹)^k` computed as
/// a power of one ratio, so the leading component is scaled by exactly
/// 1 for every k.
pub fn renormalized_pullback(y: &VFJet, f: &Contraction, k: u32) -> Result<VFJet, GradingError> {
    let m1 = leading_multiplier(y, f)?;
    let mut out = VFJet::zero(y.dim(), y.degree());
    for (l, alpha, c) in y.coefficients() {
        let ratio = multiplier(l, alpha, f)? / m1;
        out.set_coefficient(l, alpha.clone(), c * ratio.powi(k as i32))?;
    }
    Ok(out)
}

/// Coefficient mass of the non-leading part of `renormalized_pullback`
/// at step `k`, relative to the leading part's mass.
pub fn tail_ratio(y: &VFJet, f: &Contraction, k: u32) -> Result<f64, GradingError> {
    let m1 = leading_multiplier(y, f)?;
    let rp = renormalized_pullback(y, f, k)?;
    let mut lead = 0.0;
    let mut tail = 0.0;
    for (l, alpha, c) in rp.coefficients() {
        let m = multiplier(l, alpha, f)?;
        if (m - m1).abs() <= MERGE_TOL * m1 {
            lead += c.abs();
        } else {
            tail += c.abs();
        }
    }
    Ok(tail / lead)
}

/// Leading homogeneous component of `Y`: the monomials whose multiplier
/// ties the maximum within the merge tolerance. The renormalized
/// pullback contracts everything else at ratio `m²/m¹`; the returned
/// component is certified by checking that contraction at one step.
pub fn leading_limit(
    y: &VFJet,
    f: &Contraction,
    tol: f64,
) -> Result<GradedComponent, GradingError> {
    let m1 = leading_multiplier(y, f)?;
    let mut field = VFJet::zero(y.dim(), y.degree());
    let mut m2 = 0.0f64;
    for (l, alpha, c) in y.coefficients() {
        let m = multiplier(l, alpha, f)?;
        if (m - m1).abs() <= MERGE_TOL * m1 {
            field.set_coefficient(l, alpha.clone(), c)?;
        } else {
            m2 = m2.max(m);
        }
    }
    if m2 > 0.0 {
        let measured = tail_ratio(y, f, 1)?;
        let predicted = (m2 / m1) * tail_ratio(y, f, 0)?;
        debug_assert!(
            measured <= predicted * (1.0 + tol) + tol,
            "tail certificate failed: {measured} vs {predicted}"
        );
    }
    Ok(GradedComponent {
        multiplier: m1,
        index: value_index(f, m1)?,
        field,
    })
}

/// Per-monomial detail of a graded bracket check.
#[derive(Debug, Clone)]
pub struct BracketMonomial {
    pub component: usize,
    pub alpha: Vec<u32>,
    pub multiplier: f64,
    pub expected_product: f64,
    pub index: usize,
    pub index_floor: usize,
}

/// Verdict of the graded bracket law on a pair of homogeneous
/// components: whether every bracket monomial's multiplier equals
/// `m₁·m₂` (1e-12 relative) and whether its ladder index is at least
/// `j₁+j₂`.
#[derive(Debug, Clone)]
pub struct GradingVerdict {
    pub bracket_is_zero: bool,
    pub product_law: bool,
    pub max_product_error: f64,
    pub index_bound: bool,
    pub monomials: Vec<BracketMonomial>,
}

/// Check the graded bracket law for two homogeneous components.
pub fn grading_check(
    x: &GradedComponent,
    y: &GradedComponent,
    f: &Contraction,
) -> Result<GradingVerdict, GradingError> {
    let bracket = lie_bracket(&x.field, &y.field)?;
    let expected = x.multiplier * y.multiplier;
    let floor = x.index + y.index;
    let mut verdict = GradingVerdict {
        bracket_is_zero: bracket.is_zero(),
        product_law: true,
        max_product_error: 0.0,
        index_bound: true,
        monomials: Vec::new(),
    };
    for (l, alpha, _) in bracket.coefficients() {
        let m = multiplier(l, alpha, f)?;
        let err = (m - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        let index = value_index(f, m)?;
        verdict.max_product_error = verdict.max_product_error.max(err);
        if err > 1e-12 {
            verdict.product_law = false;
        }
        if index < floor {
            verdict.index_bound = false;
        }
        verdict.monomials.push(BracketMonomial {
            component: l,
            alpha: alpha.exponents().to_vec(),
            multiplier: m,
            expected_product: expected,
            index,
            index_floor: floor,
        });
    }
    Ok(verdict)
}

/// CSV rows `multiplier,index,component_l,alpha...,coeff` for a ladder
/// (unit coefficients) — the shared schema with decompositions.
pub fn ladder_csv(ladder: &MultiplierLadder) -> String {
    let dim = ladder.contraction.dim();
    let mut out = csv_header(dim);
    for (rank, entry) in ladder.entries.iter().enumerate() {
        for (l, alpha) in &entry.monomials {
            csv_row(&mut out, entry.multiplier, rank + 1, *l, alpha.exponents(), 1.0);
        }
    }
    out
}

/// CSV rows for a decomposition, one row per monomial with its
/// coefficient.
pub fn decomposition_csv(components: &[GradedComponent]) -> String {
    let dim = components
        .first()
        .map(|c| c.field.dim())
        .unwrap_or_default();
    let mut out = csv_header(dim);
    for comp in components {
        for (l, alpha, c) in comp.field.coefficients() {
            csv_row(&mut out, comp.multiplier, comp.index, l, alpha.exponents(), c);
        }
    }
    out
}

fn csv_header(dim: usize) -> String {
    let mut out = String::from("multiplier,index,component_l");
    for i in 1..=dim.max(1) {
        out.push_str(&format!(",alpha{i}"));
    }
    out.push_str(",coeff\n");
    out
}

fn csv_row(out: &mut String, m: f64, index: usize, l: usize, alpha: &[u32], coeff: f64) {
    out.push_str(&format!("{m:.16e},{index},{}", l + 1));
    for a in alpha {
        out.push_str(&format!(",{a}"));
    }
    out.push_str(&format!(",{coeff:.16e}\n"));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn contraction(lambda: &[f64]) -> Contraction {
        Contraction::new(lambda.to_vec()).unwrap()
    }

    #[test]
    fn spectrum_validation() {
        assert!(Contraction::new(vec![0.2, 0.5]).is_ok());
        assert!(Contraction::new(vec![0.5, 0.2]).is_err());
        assert!(Contraction::new(vec![0.5, 0.5]).is_err());
        assert!(Contraction::new(vec![0.5, 1.0]).is_err());
        assert!(Contraction::new(vec![]).is_err());
        assert!(Contraction::new(vec![-0.5]).is_err());
    }

    #[test]
    fn resonance_detection() {
        // λ1 = λ2²: x2²∂1 is resonant
        let f = contraction(&[0.25, 0.5]);
        assert!(matches!(
            f.check_resonance_free(4),
            Err(GradingError::Resonant { l: 1, .. })
        ));
        assert!(contraction(&[0.2, 0.5]).check_resonance_free(8).is_ok());
        assert!(contraction(&[0.5]).check_resonance_free(8).is_ok());
    }

    #[test]
    fn multiplier_worked_examples() {
        let f = contraction(&[0.2, 0.5]);
        // x1²∂2 → 0.2²/0.5 = 0.08
        let m = multiplier(1, &MultiIndex::new(vec![2, 0]), &f).unwrap();
        assert!((m - 0.08).abs() < 1e-16);
        // ∂1 → 1/0.2 = 5
        let m = multiplier(0, &MultiIndex::new(vec![0, 0]), &f).unwrap();
        assert!((m - 5.0).abs() < 1e-15);
        // x1∂1 → exactly 1 for any λ
        let m = multiplier(0, &MultiIndex::new(vec![1, 0]), &f).unwrap();
        assert_eq!(m, 1.0);
        let m = multiplier(1, &MultiIndex::new(vec![0, 1]), &f).unwrap();
        assert_eq!(m, 1.0);

        assert!(multiplier(5, &MultiIndex::new(vec![0, 0]), &f).is_err());
    }

    #[test]
    fn ladder_examples() {
        // cutoff 5 catches only ∂1
        let f = contraction(&[0.2, 0.5]);
        let lad = ladder(&f, 5.0, 8).unwrap();
        assert_eq!(lad.entries.len(), 1);
        assert!((lad.entries[0].multiplier - 5.0).abs() < 1e-12);
        assert_eq!(lad.entries[0].monomials, vec![(0, MultiIndex::zero(2))]);

        // n=1, λ=1/2, cutoff 2: only ∂
        let f1 = contraction(&[0.5]);
        let lad = ladder(&f1, 2.0, 3).unwrap();
        assert_eq!(lad.entries.len(), 1);
        assert_eq!(lad.entries[0].multiplier, 2.0);

        // cutoff 0.4: ∂, x∂, x²∂ at multipliers 2, 1, 1/2
        let lad = ladder(&f1, 0.4, 4).unwrap();
        let values: Vec<f64> = lad.entries.iter().map(|e| e.multiplier).collect();
        assert_eq!(values, vec![2.0, 1.0, 0.5]);
        assert_eq!(lad.index_of(1.0), Some(2));
        assert_eq!(lad.index_of(0.3), None);
    }

    #[test]
    fn ladder_certification_gate() {
        let f = contraction(&[0.2, 0.5]);
        // 0.5^(cap+1)/0.2 must fall below the cutoff
        assert!(matches!(
            ladder(&f, 0.01, 3),
            Err(GradingError::NotCertified { .. })
        ));
        assert!(ladder(&f, 0.01, 12).is_ok());
    }

    #[test]
    fn ladder_complete_one_degree_higher() {
        let f = contraction(&[0.2, 0.5]);
        let lad = ladder(&f, 0.05, 12).unwrap();
        let deeper = enumerate_rungs(&f, 0.05, 13);
        assert_eq!(lad.entries.len(), deeper.len());
        for (a, b) in lad.entries.iter().zip(&deeper) {
            assert_eq!(a.multiplier.to_bits(), b.multiplier.to_bits());
            assert_eq!(a.monomials.len(), b.monomials.len());
        }
    }

    #[test]
    fn decompose_worked_example_and_round_trip() {
        let f = contraction(&[0.2, 0.5]);
        let x = VFJet::from_terms(
            2,
            2,
            &[
                (0, &[0, 0], 1.0),  // ∂1, m=5
                (0, &[1, 0], 1.0),  // x1∂1, m=1
                (1, &[2, 0], 1.0),  // x1²∂2, m=0.08
            ],
        )
        .unwrap();
        let parts = decompose(&x, &f).unwrap();
        let ms: Vec<f64> = parts.iter().map(|p| p.multiplier).collect();
        assert!((ms[0] - 5.0).abs() < 1e-12);
        assert!((ms[1] - 1.0).abs() < 1e-12);
        assert!((ms[2] - 0.08).abs() < 1e-12);

        assert!(decompose(&VFJet::zero(2, 3), &f).unwrap().is_empty());

        let mut stream = rng::stream(41, 0);
        for _ in 0..50 {
            let mut y = VFJet::zero(2, 3);
            for alpha in multi_indices_up_to(2, 3) {
                for l in 0..2 {
                    if stream.gen_range(0..3) == 0 {
                        y.set_coefficient(l, alpha.clone(), stream.gen_range(-1.0..1.0))
                            .unwrap();
                    }
                }
            }
            let parts = decompose(&y, &f).unwrap();
            let mut sum = VFJet::zero(2, 3);
            for p in &parts {
                sum = sum.add(&p.field).unwrap();
            }
            assert_eq!(sum.coefficient_distance(&y).unwrap(), 0.0);
            for p in &parts {
                for (l, alpha, _) in p.field.coefficients() {
                    let m = multiplier(l, alpha, &f).unwrap();
                    assert_eq!(m.to_bits(), p.multiplier.to_bits());
                }
            }
        }
    }

    #[test]
    fn pullback_scales_monomials_exactly() {
        let f = contraction(&[0.25, 0.5]);
        let x = VFJet::monomial(2, 1, &[2, 0], 3.0).unwrap(); // m = 0.0625/0.5 = 1/8
        let pulled = pullback(3, &x, &f).unwrap();
        let c = pulled.coefficient(1, &MultiIndex::new(vec![2, 0]));
        assert_eq!(c, 3.0 * (1.0f64 / 8.0).powi(3));

        let y = VFJet::from_terms(1, 2, &[(0, &[0], 1.0), (0, &[1], 1.0)]).unwrap();
        let f1 = contraction(&[0.2]);
        assert_eq!(
            pullback(0, &y, &f1).unwrap().coefficient_distance(&y).unwrap(),
            0.0
        );
    }

    #[test]
    fn pullback_is_a_bracket_morphism() {
        // dyadic spectrum keeps everything exact
        let f = contraction(&[0.25, 0.5]);
        let mut stream = rng::stream(42, 0);
        for _ in 0..50 {
            let mut draw = |deg: u32| {
                let mut v = VFJet::zero(2, deg as usize);
                for alpha in multi_indices_up_to(2, deg) {
                    for l in 0..2 {
                        if stream.gen_range(0..2) == 0 {
                            // dyadic coefficients keep products exact
                            let c = stream.gen_range(-8i32..=8) as f64 / 8.0;
                            v.set_coefficient(l, alpha.clone(), c).unwrap();
                        }
                    }
                }
                v
            };
            let x = draw(2);
            let y = draw(2);
            let lhs = pullback(2, &lie_bracket(&x, &y).unwrap(), &f).unwrap();
            let rhs = lie_bracket(&pullback(2, &x, &f).unwrap(), &pullback(2, &y, &f).unwrap())
                .unwrap();
            assert!(
                lhs.coefficient_distance(&rhs).unwrap() < 1e-14,
                "pullback failed to commute with the bracket"
            );
        }
    }

    #[test]
    fn renormalized_pullback_example() {
        // Y = ∂1 + x1∂1, λ=0.2: rung ratio 1/5 per step
        let f = contraction(&[0.2]);
        let y = VFJet::from_terms(1, 1, &[(0, &[0], 1.0), (0, &[1], 1.0)]).unwrap();
        for k in 0..12u32 {
            let rp = renormalized_pullback(&y, &f, k).unwrap();
            assert_eq!(rp.coefficient(0, &MultiIndex::zero(1)), 1.0);
            let tail = rp.coefficient(0, &MultiIndex::new(vec![1]));
            assert!((tail - 0.2f64.powi(k as i32)).abs() <= 1e-12 * tail.abs().max(1.0));
        }
        let ratio = tail_ratio(&y, &f, 10).unwrap();
        assert!((ratio - 5.0f64.powi(-10)).abs() < 1e-12);
    }

    #[test]
    fn leading_limit_examples() {
        let f = contraction(&[0.2]);
        let y = VFJet::from_terms(1, 1, &[(0, &[0], 1.0), (0, &[1], 1.0)]).unwrap();
        let lead = leading_limit(&y, &f, 1e-9).unwrap();
        assert!((lead.multiplier - 5.0).abs() < 1e-12);
        assert_eq!(lead.index, 1);
        assert_eq!(lead.field.coefficient(0, &MultiIndex::zero(1)), 1.0);
        assert_eq!(lead.field.coefficient(0, &MultiIndex::new(vec![1])), 0.0);

        // equal-multiplier monomials stay together
        let f2 = contraction(&[0.2, 0.5]);
        let y2 = VFJet::from_terms(2, 2, &[(0, &[1, 0], 1.0), (1, &[0, 1], 2.0), (1, &[2, 0], 1.0)])
            .unwrap();
        let lead2 = leading_limit(&y2, &f2, 1e-9).unwrap();
        assert!((lead2.multiplier - 1.0).abs() < 1e-15);
        assert_eq!(lead2.field.coefficient(0, &MultiIndex::new(vec![1, 0])), 1.0);
        assert_eq!(lead2.field.coefficient(1, &MultiIndex::new(vec![0, 1])), 2.0);
        assert_eq!(lead2.field.coefficient(1, &MultiIndex::new(vec![2, 0])), 0.0);

        assert!(matches!(
            leading_limit(&VFJet::zero(1, 2), &f, 1e-9),
            Err(GradingError::ZeroField)
        ));
    }

    #[test]
    fn leading_limit_is_pullback_invariant() {
        let f = contraction(&[0.25, 0.5]);
        let y = VFJet::from_terms(
            2,
            2,
            &[(0, &[0, 1], 1.0), (1, &[1, 1], -0.5), (0, &[2, 0], 0.25)],
        )
        .unwrap();
        let base = leading_limit(&y, &f, 1e-9).unwrap();
        for k in 0..8 {
            let rp = renormalized_pullback(&y, &f, k).unwrap();
            let lead = leading_limit(&rp, &f, 1e-9).unwrap();
            assert_eq!(lead.multiplier.to_bits(), base.multiplier.to_bits());
            assert_eq!(
                lead.field.coefficient_distance(&base.field).unwrap(),
                0.0,
                "leading component drifted at k={k}"
            );
        }
    }

    #[test]
    fn grading_check_product_law_worked_example() {
        let f = contraction(&[0.2, 0.5]);
        let x = GradedComponent {
            multiplier: 1.0,
            index: value_index(&f, 1.0).unwrap(),
            field: VFJet::monomial(2, 0, &[1, 0], 1.0).unwrap(),
        };
        let y = GradedComponent {
            multiplier: 0.08,
            index: value_index(&f, 0.08).unwrap(),
            field: VFJet::monomial(2, 1, &[2, 0], 1.0).unwrap(),
        };
        let verdict = grading_check(&x, &y, &f).unwrap();
        assert!(!verdict.bracket_is_zero);
        assert!(verdict.product_law);
        assert!((verdict.monomials[0].multiplier - 0.08).abs() < 1e-12);

        // zero bracket passes vacuously
        let z = GradedComponent {
            multiplier: 1.0,
            index: x.index,
            field: VFJet::monomial(2, 0, &[1, 0], 2.0).unwrap(),
        };
        let verdict = grading_check(&x, &z, &f).unwrap();
        assert!(verdict.bracket_is_zero);
        assert!(verdict.product_law && verdict.index_bound);
    }

    #[test]
    fn product_law_exact_on_random_homogeneous_pairs() {
        let f = contraction(&[0.2, 0.45, 0.7]);
        let mut stream = rng::stream(43, 0);
        let indices = multi_indices_up_to(3, 4);
        for _ in 0..1000 {
            let pick = |s: &mut rng::LabRng| {
                let alpha = indices[s.gen_range(0..indices.len())].clone();
                let l = s.gen_range(0..3);
                let m = multiplier(l, &alpha, &f).unwrap();
                GradedComponent {
                    multiplier: m,
                    index: value_index(&f, m).unwrap(),
                    field: VFJet::monomial(3, l, alpha.exponents(), 1.0).unwrap(),
                }
            };
            let x = pick(&mut stream);
            let y = pick(&mut stream);
            let verdict = grading_check(&x, &y, &f).unwrap();
            assert!(
                verdict.product_law,
                "product law violated: error {:.3e}",
                verdict.max_product_error
            );
        }
    }

    /// The index half of the graded law fails on honest inputs: the
    /// bracket of the constant field ∂ (index 1) with x∂ (index 2) is ∂
    /// again, at index 1 < 1+2. This documents the reporting.
    #[test]
    fn index_bound_counterexample_is_reported() {
        let f = contraction(&[0.5]);
        let x = GradedComponent {
            multiplier: 2.0,
            index: value_index(&f, 2.0).unwrap(),
            field: VFJet::monomial(1, 0, &[0], 1.0).unwrap(),
        };
        let y = GradedComponent {
            multiplier: 1.0,
            index: value_index(&f, 1.0).unwrap(),
            field: VFJet::monomial(1, 0, &[1], 1.0).unwrap(),
        };
        assert_eq!(x.index, 1);
        assert_eq!(y.index, 2);
        let verdict = grading_check(&x, &y, &f).unwrap();
        assert!(verdict.product_law);
        assert!(!verdict.index_bound);
        let m = &verdict.monomials[0];
        assert_eq!(m.index, 1);
        assert_eq!(m.index_floor, 3);
    }

    #[test]
    fn value_index_ranks_values() {
        // n=1, λ=1/2: values 2 > 1 > 1/2 > 1/4 > …
        let f = contraction(&[0.5]);
        assert_eq!(value_index(&f, 2.0).unwrap(), 1);
        assert_eq!(value_index(&f, 1.0).unwrap(), 2);
        assert_eq!(value_index(&f, 0.5).unwrap(), 3);
        // 2^-10 = 2^(1-11) sits at rank 12 in the ladder 2 > 1 > 1/2 > …
        assert_eq!(value_index(&f, 2.0f64.powi(-10)).unwrap(), 12);
    }

    #[test]
    fn csv_schemas() {
        let f = contraction(&[0.5]);
        let lad = ladder(&f, 0.4, 4).unwrap();
        let csv = ladder_csv(&lad);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("multiplier,index,component_l,alpha1,coeff"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("2.0000000000000000e0,1,1,0,"));

        let x = VFJet::from_terms(1, 1, &[(0, &[0], 1.0), (0, &[1], -2.0)]).unwrap();
        let parts = decompose(&x, &f).unwrap();
        let csv = decomposition_csv(&parts);
        assert!(csv.contains("1.0000000000000000e0,2,1,1,-2.0000000000000000e0"));
    }
}

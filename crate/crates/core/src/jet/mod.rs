//! Truncated polynomial jets of self-maps and vector fields.
//!
//! A jet here is an *exact* polynomial object: the coefficient table is
//! canonical (no duplicate keys, zeros omitted) and every operation states
//! the degree at which its output is exact. Nothing truncates silently —
//! operations that can drop terms take the output degree as an argument.

mod io;
mod norms;

pub use io::{parse_jet, render_jet, JetParseError};
pub use norms::{
    cnorm, cnorm_field, difference_field, displacement_ratio, norm_equivalence_constant,
    NormEquivalence, NormSpec, DEFAULT_GRID_PER_AXIS,
};

pub(crate) use norms::multi_indices_up_to;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum JetError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("component index {index} out of range for dimension {dim}")]
    ComponentOutOfRange { index: usize, dim: usize },
    #[error("multi-index arity {got} does not match dimension {dim}")]
    IndexArity { got: usize, dim: usize },
    #[error("linear part is singular, jet cannot be inverted")]
    SingularLinearPart,
    #[error("jet has a nonzero constant term, inversion about the origin is undefined")]
    NonZeroConstant,
    #[error("map equals the identity on the grid, difference field is undefined")]
    IdentityMap,
    #[error("norm grid must be odd and at least 3, got {0}")]
    BadGrid(usize),
    #[error("norm domain dimension {domain} does not match jet dimension {jet}")]
    DomainDim { domain: usize, jet: usize },
}

/// Exponent vector of a monomial `x^alpha`.
///
/// Ordered by total order first, then lexicographically, which makes
/// coefficient tables print in a stable, human-scannable order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `|alpha|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Decrement the exponent on `axis`, if positive.
    pub fn step_down(&self, axis: usize) -> Option<MultiIndex> {
        if self.0[axis] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[axis] -= 1;
        Some(MultiIndex(e))
    }

    /// Evaluate the bare monomial `x^alpha`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&a, &xi)| acc * xi.powi(a as i32))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Scalar polynomial with a canonical sparse coefficient table.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Poly {
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl Poly {
    pub(crate) fn zero() -> Self {
        Poly::default()
    }

    pub(crate) fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(alpha) {
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == 0.0 {
                    // keep the table canonical: exact cancellations drop out
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub(crate) fn set_term(&mut self, alpha: MultiIndex, c: f64) {
        if c == 0.0 {
            self.coeffs.remove(&alpha);
        } else {
            self.coeffs.insert(alpha, c);
        }
    }

    pub(crate) fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    pub(crate) fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(k, &v)| (k, v))
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub(crate) fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero();
        for (alpha, c) in self.terms() {
            out.add_term(alpha.clone(), c * s);
        }
        out
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (alpha, c) in other.terms() {
            out.add_term(alpha.clone(), c);
        }
        out
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (alpha, c) in other.terms() {
            out.add_term(alpha.clone(), -c);
        }
        out
    }

    /// Product truncated at total order `cap`.
    pub(crate) fn mul_capped(&self, other: &Poly, cap: u32) -> Poly {
        let mut out = Poly::zero();
        for (a, ca) in self.terms() {
            if a.order() > cap {
                continue;
            }
            for (b, cb) in other.terms() {
                if a.order() + b.order() > cap {
                    continue;
                }
                out.add_term(a.add(b), ca * cb);
            }
        }
        out
    }

    /// Partial derivative along `axis`.
    pub(crate) fn partial(&self, axis: usize) -> Poly {
        let mut out = Poly::zero();
        for (alpha, c) in self.terms() {
            if let Some(beta) = alpha.step_down(axis) {
                out.add_term(beta, c * f64::from(alpha.exponents()[axis]));
            }
        }
        out
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .fold(0.0, |acc, (alpha, &c)| acc + c * alpha.eval(x))
    }

    /// Drop all terms of total order above `cap`.
    pub(crate) fn truncate(&self, cap: u32) -> Poly {
        let mut out = Poly::zero();
        for (alpha, c) in self.terms() {
            if alpha.order() <= cap {
                out.add_term(alpha.clone(), c);
            }
        }
        out
    }

    /// Sum of `|c| * radius^|alpha|` over terms of order above `cap` — a
    /// rigorous bound for the tail on the ball of the given radius.
    pub(crate) fn tail_bound(&self, cap: u32, radius: f64) -> f64 {
        self.terms()
            .filter(|(alpha, _)| alpha.order() > cap)
            .map(|(alpha, c)| c.abs() * radius.powi(alpha.order() as i32))
            .sum()
    }
}

fn check_component(dim: usize, l: usize) -> Result<(), JetError> {
    if l >= dim {
        return Err(JetError::ComponentOutOfRange { index: l, dim });
    }
    Ok(())
}

/// Polynomial jet of a self-map of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    degree: usize,
    components: Vec<Poly>,
}

/// Polynomial jet of a vector field on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct VFJet {
    degree: usize,
    components: Vec<Poly>,
}

macro_rules! shared_jet_impl {
    ($ty:ident) => {
        impl $ty {
            pub fn dim(&self) -> usize {
                self.components.len()
            }

            /// Truncation order at which this object is exact.
            pub fn degree(&self) -> usize {
                self.degree
            }

            pub fn coefficient(&self, l: usize, alpha: &MultiIndex) -> f64 {
                self.components[l].coefficient(alpha)
            }

            pub fn set_coefficient(
                &mut self,
                l: usize,
                alpha: MultiIndex,
                c: f64,
            ) -> Result<(), JetError> {
                check_component(self.dim(), l)?;
                if alpha.dim() != self.dim() {
                    return Err(JetError::IndexArity {
                        got: alpha.dim(),
                        dim: self.dim(),
                    });
                }
                self.components[l].set_term(alpha, c);
                Ok(())
            }

            /// Iterate `(component, multi-index, coefficient)` over all
            /// nonzero coefficients in canonical order.
            pub fn coefficients(&self) -> impl Iterator<Item = (usize, &MultiIndex, f64)> {
                self.components
                    .iter()
                    .enumerate()
                    .flat_map(|(l, p)| p.terms().map(move |(alpha, c)| (l, alpha, c)))
            }

            pub fn eval(&self, x: &[f64]) -> Vec<f64> {
                self.components.iter().map(|p| p.eval(x)).collect()
            }

            pub fn is_zero(&self) -> bool {
                self.components.iter().all(|p| p.is_zero())
            }
        }
    };
}

shared_jet_impl!(Jet);
shared_jet_impl!(VFJet);

fn build_components(
    dim: usize,
    degree: usize,
    terms: &[(usize, &[u32], f64)],
) -> Result<Vec<Poly>, JetError> {
    let mut components = vec![Poly::zero(); dim];
    for &(l, exps, c) in terms {
        check_component(dim, l)?;
        if exps.len() != dim {
            return Err(JetError::IndexArity {
                got: exps.len(),
                dim,
            });
        }
        let alpha = MultiIndex::new(exps.to_vec());
        if alpha.order() > degree as u32 {
            // the caller asked for a jet of this degree; refuse to
            // silently drop what does not fit
            return Err(JetError::IndexArity {
                got: alpha.order() as usize,
                dim: degree,
            });
        }
        components[l].add_term(alpha, c);
    }
    Ok(components)
}

impl Jet {
    pub fn identity(dim: usize, degree: usize) -> Self {
        let mut components = vec![Poly::zero(); dim];
        for (l, comp) in components.iter_mut().enumerate() {
            comp.add_term(MultiIndex::unit(dim, l), 1.0);
        }
        Jet { degree, components }
    }

    pub fn from_terms(
        dim: usize,
        degree: usize,
        terms: &[(usize, &[u32], f64)],
    ) -> Result<Self, JetError> {
        Ok(Jet {
            degree,
            components: build_components(dim, degree, terms)?,
        })
    }

    /// The displacement `f - id` as a vector-field table.
    pub fn sub_id(&self) -> VFJet {
        let mut components = self.components.clone();
        for (l, comp) in components.iter_mut().enumerate() {
            let unit = MultiIndex::unit(self.dim(), l);
            let c = comp.coefficient(&unit);
            comp.set_term(unit, c - 1.0);
        }
        VFJet {
            degree: self.degree,
            components,
        }
    }

    /// Rebuild the map `id + X` from a displacement table.
    pub fn from_displacement(x: &VFJet) -> Self {
        let mut components = x.components.clone();
        for (l, comp) in components.iter_mut().enumerate() {
            let unit = MultiIndex::unit(x.dim(), l);
            let c = comp.coefficient(&unit);
            comp.set_term(unit, c + 1.0);
        }
        Jet {
            degree: x.degree,
            components,
        }
    }

    /// Jet of `self ∘ g`, truncated at total order `d`. Exact at degree
    /// `d` as a truncation of the polynomial composition.
    pub fn compose(&self, g: &Jet, d: usize) -> Result<Jet, JetError> {
        if self.dim() != g.dim() {
            return Err(JetError::DimMismatch(self.dim(), g.dim()));
        }
        let cap = d as u32;
        // Powers of the components of g, computed on demand and reused
        // across the monomials of self.
        let one = {
            let mut p = Poly::zero();
            p.add_term(MultiIndex::zero(self.dim()), 1.0);
            p
        };
        let mut powers: Vec<Vec<Poly>> = g
            .components
            .iter()
            .map(|_| vec![one.clone()])
            .collect();
        let mut components = Vec::with_capacity(self.dim());
        for l in 0..self.dim() {
            let mut acc = Poly::zero();
            for (alpha, c) in self.components[l].terms() {
                let mut term = one.clone();
                for (axis, &e) in alpha.exponents().iter().enumerate() {
                    while powers[axis].len() <= e as usize {
                        let next = {
                            let ps = &powers[axis];
                            ps.last()
                                .expect("power table is never empty")
                                .mul_capped(&g.components[axis], cap)
                        };
                        powers[axis].push(next);
                    }
                    term = term.mul_capped(&powers[axis][e as usize], cap);
                }
                acc = acc.add(&term.scale(c));
            }
            components.push(acc);
        }
        Ok(Jet {
            degree: d,
            components,
        })
    }

    /// Linear part as a row-major matrix.
    pub fn linear_part(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|l| {
                (0..self.dim())
                    .map(|j| self.components[l].coefficient(&MultiIndex::unit(self.dim(), j)))
                    .collect()
            })
            .collect()
    }

    /// Jet inverse about the origin, exact at degree `d`.
    ///
    /// Requires a fixed origin (`f(0) = 0`) and an invertible linear part.
    pub fn invert(&self, d: usize) -> Result<Jet, JetError> {
        let n = self.dim();
        let zero = MultiIndex::zero(n);
        for comp in &self.components {
            if comp.coefficient(&zero) != 0.0 {
                return Err(JetError::NonZeroConstant);
            }
        }
        let linv = invert_matrix(&self.linear_part()).ok_or(JetError::SingularLinearPart)?;
        // Linear seed g0 = L^{-1}.
        let mut g = Jet {
            degree: d,
            components: (0..n)
                .map(|l| {
                    let mut p = Poly::zero();
                    for (j, &v) in linv[l].iter().enumerate() {
                        p.add_term(MultiIndex::unit(n, j), v);
                    }
                    p
                })
                .collect(),
        };
        let id = Jet::identity(n, d);
        // Each pass g <- g + L^{-1}(id - f∘g) gains at least one exact
        // order, so d passes are enough for a degree-d truncation.
        for _ in 0..d.max(1) {
            let fg = self.compose(&g, d)?;
            let residual: Vec<Poly> = (0..n)
                .map(|l| id.components[l].sub(&fg.components[l]))
                .collect();
            let mut update: Vec<Poly> = vec![Poly::zero(); n];
            for (l, upd) in update.iter_mut().enumerate() {
                for (j, res) in residual.iter().enumerate() {
                    *upd = upd.add(&res.scale(linv[l][j]));
                }
            }
            for (comp, upd) in g.components.iter_mut().zip(&update) {
                *comp = comp.add(upd).truncate(d as u32);
            }
        }
        Ok(g)
    }

    /// Rigorous sup bound on the dropped tail of this jet relative to a
    /// degree-`cap` truncation, on the ball of the given radius.
    pub fn truncation_tail_bound(&self, cap: usize, radius: f64) -> f64 {
        self.components
            .iter()
            .map(|p| p.tail_bound(cap as u32, radius))
            .fold(0.0, f64::max)
    }

    pub fn truncate(&self, d: usize) -> Jet {
        Jet {
            degree: d,
            components: self
                .components
                .iter()
                .map(|p| p.truncate(d as u32))
                .collect(),
        }
    }
}

impl VFJet {
    pub fn zero(dim: usize, degree: usize) -> Self {
        VFJet {
            degree,
            components: vec![Poly::zero(); dim],
        }
    }

    pub fn from_terms(
        dim: usize,
        degree: usize,
        terms: &[(usize, &[u32], f64)],
    ) -> Result<Self, JetError> {
        Ok(VFJet {
            degree,
            components: build_components(dim, degree, terms)?,
        })
    }

    /// Single vector monomial `c * x^alpha ∂/∂x_l`.
    pub fn monomial(dim: usize, l: usize, exps: &[u32], c: f64) -> Result<Self, JetError> {
        let degree = exps.iter().sum::<u32>() as usize;
        VFJet::from_terms(dim, degree, &[(l, exps, c)])
    }

    pub fn scale(&self, s: f64) -> VFJet {
        VFJet {
            degree: self.degree,
            components: self.components.iter().map(|p| p.scale(s)).collect(),
        }
    }

    pub fn add(&self, other: &VFJet) -> Result<VFJet, JetError> {
        if self.dim() != other.dim() {
            return Err(JetError::DimMismatch(self.dim(), other.dim()));
        }
        Ok(VFJet {
            degree: self.degree.max(other.degree),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &VFJet) -> Result<VFJet, JetError> {
        self.add(&other.scale(-1.0))
    }

    /// Largest absolute coefficient (0 for the zero field).
    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefficients()
            .map(|(_, _, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Sup of coefficient-wise distance to `other`.
    pub fn coefficient_distance(&self, other: &VFJet) -> Result<f64, JetError> {
        Ok(self.sub(other)?.max_abs_coefficient())
    }

    pub fn truncate(&self, d: usize) -> VFJet {
        VFJet {
            degree: d,
            components: self
                .components
                .iter()
                .map(|p| p.truncate(d as u32))
                .collect(),
        }
    }
}

/// Lie bracket of polynomial vector fields,
/// `[X, Y]^l = sum_m (X^m ∂_m Y^l - Y^m ∂_m X^l)`.
///
/// The result is exact: polynomial brackets close at degree
/// `deg X + deg Y - 1`, so nothing is dropped.
pub fn lie_bracket(x: &VFJet, y: &VFJet) -> Result<VFJet, JetError> {
    if x.dim() != y.dim() {
        return Err(JetError::DimMismatch(x.dim(), y.dim()));
    }
    let n = x.dim();
    let out_degree = (x.degree + y.degree).saturating_sub(1);
    let cap = u32::MAX; // exact product; the degree bound above is intrinsic
    let mut components = Vec::with_capacity(n);
    for l in 0..n {
        let mut forward = Poly::zero();
        let mut backward = Poly::zero();
        for m in 0..n {
            forward = forward.add(&x.components[m].mul_capped(&y.components[l].partial(m), cap));
            backward = backward.add(&y.components[m].mul_capped(&x.components[l].partial(m), cap));
        }
        components.push(forward.sub(&backward));
    }
    Ok(VFJet {
        degree: out_degree,
        components,
    })
}

/// Lie bracket truncated at total order `d`; see [`lie_bracket`].
pub fn lie_bracket_capped(x: &VFJet, y: &VFJet, d: usize) -> Result<VFJet, JetError> {
    Ok(lie_bracket(x, y)?.truncate(d))
}

/// Gauss-Jordan inverse of a small row-major matrix.
pub(crate) fn invert_matrix(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("matrix entries are finite")
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let factor = a[i][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[i][j] -= factor * a[col][j];
                inv[i][j] -= factor * inv[col][j];
            }
        }
    }
    Some(inv)
}

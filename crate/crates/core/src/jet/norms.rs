//! Grid-sup `C^r` norms of jets and the empirical norm-equivalence
//! constant for polynomial displacement families.

use super::{Jet, JetError, MultiIndex, Poly, VFJet};
use crate::domain::BoxDomain;
use crate::pal;
use crate::rng;

/// How a `C^r` norm is evaluated: which derivative order, on which box,
/// and how fine the evaluation grid is.
///
/// The grid has an odd number of nodes per axis so the origin is always a
/// node on symmetric boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpec {
    order: usize,
    domain: BoxDomain,
    grid_per_axis: usize,
}

pub const DEFAULT_GRID_PER_AXIS: usize = 33;

impl NormSpec {
    pub fn new(order: usize, domain: BoxDomain, grid_per_axis: usize) -> Result<Self, JetError> {
        if grid_per_axis < 3 || grid_per_axis.is_multiple_of(2) {
            return Err(JetError::BadGrid(grid_per_axis));
        }
        Ok(NormSpec {
            order,
            domain,
            grid_per_axis,
        })
    }

    /// Order-`r` norm on `[-1,1]^dim` with the default grid.
    pub fn standard(order: usize, dim: usize) -> Self {
        NormSpec {
            order,
            domain: BoxDomain::symmetric_unit(dim),
            grid_per_axis: DEFAULT_GRID_PER_AXIS,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn grid_per_axis(&self) -> usize {
        self.grid_per_axis
    }

    /// The same spec at a different derivative order.
    pub fn with_order(&self, order: usize) -> Self {
        NormSpec {
            order,
            domain: self.domain.clone(),
            grid_per_axis: self.grid_per_axis,
        }
    }
}

/// All multi-indices of total order at most `max_order` in `dim` variables,
/// in canonical order.
pub(crate) fn multi_indices_up_to(dim: usize, max_order: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    loop {
        if current.iter().sum::<u32>() <= max_order {
            out.push(MultiIndex::new(current.clone()));
        }
        // odometer over exponent ranges 0..=max_order
        let mut axis = 0;
        loop {
            if axis == dim {
                out.sort();
                return out;
            }
            current[axis] += 1;
            if current[axis] > max_order {
                current[axis] = 0;
                axis += 1;
            } else {
                break;
            }
        }
    }
}

fn derivative_tables(components: &[Poly], order: usize, dim: usize) -> Vec<Poly> {
    let betas = multi_indices_up_to(dim, order as u32);
    let mut tables = Vec::with_capacity(betas.len() * components.len());
    for beta in &betas {
        for comp in components {
            let mut p = comp.clone();
            for (axis, &e) in beta.exponents().iter().enumerate() {
                for _ in 0..e {
                    p = p.partial(axis);
                }
            }
            tables.push(p);
        }
    }
    tables
}

fn grid_sup(tables: &[Poly], spec: &NormSpec) -> f64 {
    let total = spec.domain.grid_len(spec.grid_per_axis);
    let chunk = 2048;
    let chunks = total.div_ceil(chunk);
    let partial_maxima = pal::map_collect(chunks, |c| {
        let mut local = 0.0f64;
        for index in (c * chunk)..(((c + 1) * chunk).min(total)) {
            let x = spec.domain.grid_node(spec.grid_per_axis, index);
            for table in tables {
                local = local.max(table.eval(&x).abs());
            }
        }
        local
    });
    pal::fold_max(&partial_maxima).max(0.0)
}

/// Grid-sup `C^r` norm of a map jet; with `minus_id` the norm of `f - id`.
///
/// The value is the maximum of `|∂^beta (f^l)(x)|` over all components
/// `l`, all multi-indices `|beta| <= r` and all grid nodes `x`.
pub fn cnorm(f: &Jet, minus_id: bool, spec: &NormSpec) -> Result<f64, JetError> {
    if f.dim() != spec.domain.dim() {
        return Err(JetError::DomainDim {
            domain: spec.domain.dim(),
            jet: f.dim(),
        });
    }
    if minus_id {
        cnorm_field(&f.sub_id(), spec)
    } else {
        let tables = derivative_tables(&f.components, spec.order, f.dim());
        Ok(grid_sup(&tables, spec))
    }
}

/// Grid-sup `C^r` norm of a vector-field jet.
pub fn cnorm_field(x: &VFJet, spec: &NormSpec) -> Result<f64, JetError> {
    if x.dim() != spec.domain.dim() {
        return Err(JetError::DomainDim {
            domain: spec.domain.dim(),
            jet: x.dim(),
        });
    }
    let tables = derivative_tables(&x.components, spec.order, x.dim());
    Ok(grid_sup(&tables, spec))
}

/// Result of the empirical norm-equivalence search: the best constant `C`
/// found such that `|P|_r <= C |P|_0` over the explored family, with the
/// displacement jet that witnesses it.
#[derive(Debug, Clone)]
pub struct NormEquivalence {
    pub constant: f64,
    pub witness: Jet,
    pub witness_ratio: f64,
    pub samples: usize,
}

/// `C^r`-to-`C^0` ratio of the displacement `p - id`.
pub fn displacement_ratio(p: &Jet, spec: &NormSpec) -> Result<f64, JetError> {
    let hi = cnorm(p, true, spec)?;
    let lo = cnorm(p, true, &spec.with_order(0))?;
    if lo == 0.0 {
        return Err(JetError::IdentityMap);
    }
    Ok(hi / lo)
}

fn chebyshev_axis_poly(dim: usize, axis: usize, k: usize) -> Poly {
    // T_k on the given axis by the three-term recurrence.
    let mut t0 = Poly::zero();
    t0.add_term(MultiIndex::zero(dim), 1.0);
    if k == 0 {
        return t0;
    }
    let mut t1 = Poly::zero();
    t1.add_term(MultiIndex::unit(dim, axis), 1.0);
    let mut x = Poly::zero();
    x.add_term(MultiIndex::unit(dim, axis), 1.0);
    for _ in 1..k {
        let next = x.mul_capped(&t1, u32::MAX).scale(2.0).sub(&t0);
        t0 = t1;
        t1 = next;
    }
    t1
}

fn deterministic_candidates(degree: usize, dim: usize) -> Vec<Jet> {
    let alphas = multi_indices_up_to(dim, degree as u32);
    let mut out = Vec::new();
    for l in 0..dim {
        // pure monomials
        for alpha in &alphas {
            let mut disp = VFJet::zero(dim, degree);
            disp.components[l].add_term(alpha.clone(), 1.0);
            out.push(Jet::from_displacement(&disp));
        }
        // alternating-sign and all-plus full coefficient vectors
        for sign_alternate in [true, false] {
            let mut disp = VFJet::zero(dim, degree);
            for alpha in &alphas {
                let s = if sign_alternate && alpha.order() % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                disp.components[l].add_term(alpha.clone(), s);
            }
            out.push(Jet::from_displacement(&disp));
        }
        // Chebyshev-type extremal candidates on every axis
        for axis in 0..dim {
            for k in 1..=degree {
                let mut disp = VFJet::zero(dim, degree);
                disp.components[l] = chebyshev_axis_poly(dim, axis, k);
                out.push(Jet::from_displacement(&disp));
            }
        }
    }
    out
}

/// Empirical norm-equivalence constant for degree-`degree` displacement
/// families in `dim` variables.
///
/// Maximizes `|P - id|_r / |P - id|_0` over a deterministic extremal
/// candidate set (pure monomials, alternating-sign coefficient vectors,
/// Chebyshev polynomials per axis) plus `samples` seeded random
/// coefficient draws. The candidates are always included, so the reported
/// constant is never below the best deterministic witness.
pub fn norm_equivalence_constant(
    degree: usize,
    dim: usize,
    spec: &NormSpec,
    samples: usize,
    seed: u64,
) -> Result<NormEquivalence, JetError> {
    let candidates = deterministic_candidates(degree, dim);
    let alphas = multi_indices_up_to(dim, degree as u32);
    let sampled: Vec<Jet> = pal::map_collect(samples, |i| {
        let mut stream = rng::stream(seed, i as u64);
        let mut disp = VFJet::zero(dim, degree);
        for l in 0..dim {
            for alpha in &alphas {
                disp.components[l].add_term(alpha.clone(), rng::unit_symmetric(&mut stream));
            }
        }
        Jet::from_displacement(&disp)
    });

    let mut best: Option<(f64, &Jet)> = None;
    let all: Vec<&Jet> = candidates.iter().chain(sampled.iter()).collect();
    let ratios = pal::map_collect(all.len(), |i| {
        displacement_ratio(all[i], spec).unwrap_or(f64::NAN)
    });
    for (jet, &ratio) in all.iter().zip(&ratios) {
        if !ratio.is_finite() {
            continue;
        }
        if best.is_none_or(|(b, _)| ratio > b) {
            best = Some((ratio, jet));
        }
    }
    let (constant, witness) = best.ok_or(JetError::IdentityMap)?;
    Ok(NormEquivalence {
        constant,
        witness: witness.clone(),
        witness_ratio: constant,
        samples,
    })
}

/// Normalized displacement field `(h - id) / |h - id|_0`.
///
/// Returns the field together with the normalizer `C = |h - id|_0`
/// (measured on the grid of `spec` at order 0). The field has grid `C^0`
/// norm 1 by construction, up to coefficient rounding.
pub fn difference_field(h: &Jet, spec: &NormSpec) -> Result<(VFJet, f64), JetError> {
    let c = cnorm(h, true, &spec.with_order(0))?;
    if c == 0.0 {
        return Err(JetError::IdentityMap);
    }
    Ok((h.sub_id().scale(1.0 / c), c))
}

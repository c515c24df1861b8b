//! Iterated commutator towers over a generating set of sphere maps.
//!
//! Level `S(0)` is the generating set; level `S(j+1)` collects the
//! commutators `[F1^{±1}, F2^{±1}]` with `F1 ∈ S(j)` and
//! `F2 ∈ S(j) ∪ S(j−1)`. A set is pseudo-solvable when some level
//! consists of the identity alone; the verdict below reports the first
//! level whose elements all sit within a displacement tolerance of the
//! identity, or that no such level occurs within the computed depth.
//!
//! Exhaustive towers grow super-exponentially for free-ish generating
//! sets, so besides the capped exhaustive mode there is a witness mode
//! that keeps only the most-displaced elements per level. Witness levels
//! are genuine subsets of the exhaustive levels (commutators of retained
//! elements), so a witness tower whose every level contains an element
//! above tolerance soundly certifies `NotWithinDepth`; witness collapse,
//! by contrast, is only a heuristic and is reported as such.

use crate::mobius::{local_model, DisplacementMesh, Mobius, MobiusClass};
use crate::rng;
use crate::sphere::SpherePoint;
use crate::pal;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TowerError {
    #[error("generating set is empty")]
    EmptyGeneratingSet,
    #[error("word refers to generator {index} but only {len} generators given")]
    GeneratorIndex { index: usize, len: usize },
    #[error("level {level} exceeds the cardinality cap: {count} > {cap}")]
    LevelCap { level: usize, count: usize, cap: usize },
    #[error("no loxodromic generator: orbit accumulation needs an attracting fixed point")]
    NoLoxodromic,
}

/// Freely reduced word in the generators and their inverses.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Word {
    letters: Vec<(usize, i8)>,
}

impl Word {
    pub fn empty() -> Self {
        Word::default()
    }

    pub fn generator(index: usize) -> Self {
        Word {
            letters: vec![(index, 1)],
        }
    }

    pub fn letters(&self) -> &[(usize, i8)] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    fn push_reduced(&mut self, letter: (usize, i8)) {
        match self.letters.last() {
            Some(&(idx, exp)) if idx == letter.0 && exp == -letter.1 => {
                self.letters.pop();
            }
            _ => self.letters.push(letter),
        }
    }

    pub fn multiply(&self, other: &Word) -> Word {
        let mut out = self.clone();
        for &l in &other.letters {
            out.push_reduced(l);
        }
        out
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|&(idx, exp)| (idx, -exp))
                .collect(),
        }
    }

    /// `[w1, w2] = w1 w2 w1⁻¹ w2⁻¹`.
    pub fn commutator(w1: &Word, w2: &Word) -> Word {
        w1.multiply(w2).multiply(&w1.inverse()).multiply(&w2.inverse())
    }
}

/// Left-to-right product of the generators named by the word.
pub fn word_evaluate(w: &Word, gens: &[Mobius]) -> Result<Mobius, TowerError> {
    let mut out = Mobius::identity();
    for &(idx, exp) in w.letters() {
        let g = gens.get(idx).ok_or(TowerError::GeneratorIndex {
            index: idx,
            len: gens.len(),
        })?;
        let factor = if exp >= 0 { *g } else { g.inverse() };
        out = out.compose(&factor);
    }
    Ok(out)
}

/// One element of a tower level with its displacement readout.
#[derive(Debug, Clone)]
pub struct TowerElement {
    pub element: Mobius,
    pub displacement: f64,
    pub is_identity: bool,
}

/// Level construction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TowerMode {
    /// Keep every distinct element; abort when a level exceeds `cap`.
    Exhaustive { cap: usize },
    /// Keep only the `keep` most-displaced distinct elements per level.
    Witness { keep: usize },
}

#[derive(Debug, Clone)]
pub struct GhysTower {
    pub levels: Vec<Vec<TowerElement>>,
    pub mode: TowerMode,
    /// Candidate commutators generated per level before deduplication
    /// (index 0 counts the generating set itself).
    pub raw_counts: Vec<usize>,
}

/// Distance below which two elements are merged during deduplication.
pub const DEDUP_TOL: f64 = 1e-14;

/// Hard ceiling on candidates generated for a single level; prevents the
/// quadratic candidate product from exhausting memory before the
/// post-deduplication cap can fire.
const CANDIDATE_LIMIT: usize = 1 << 23;

/// Max mesh displacement of `g ∘ h⁻¹`, abandoning the scan as soon as a
/// node exceeds `bail`. Returns a lower bound ≥ `bail` on early exit.
fn displacement_distance_capped(
    mesh: &DisplacementMesh,
    g: &Mobius,
    h: &Mobius,
    bail: f64,
) -> f64 {
    let rel = g.compose(&h.inverse());
    let mut worst = 0.0f64;
    for &v in mesh.nodes() {
        let d = crate::sphere::chordal3(rel.apply_unit3(v), v);
        if d > worst {
            worst = d;
            if worst > bail {
                return worst;
            }
        }
    }
    worst
}

/// Deduplicate in a deterministic order. Candidates are sorted by the
/// real part of the `a` entry; only neighbors inside a small window can
/// be duplicates (merged elements have matrix distance far below the
/// window), so each candidate is compared against previously accepted
/// members in its window only. Survivors are returned in generation
/// order.
fn dedup_level(candidates: Vec<Mobius>, mesh: &DisplacementMesh) -> Vec<Mobius> {
    const WINDOW: f64 = 1e-8;
    const MATRIX_PREFILTER: f64 = 1e-10;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| {
        candidates[i]
            .a
            .re
            .total_cmp(&candidates[j].a.re)
            .then(i.cmp(&j))
    });
    let mut accepted: Vec<usize> = Vec::new();
    for &i in &order {
        let c = &candidates[i];
        let mut duplicate = false;
        for &j in accepted.iter().rev() {
            let prev = &candidates[j];
            if c.a.re - prev.a.re > WINDOW {
                break;
            }
            if c.matrix_distance(prev) < MATRIX_PREFILTER
                && displacement_distance_capped(mesh, c, prev, DEDUP_TOL) < DEDUP_TOL
            {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted.into_iter().map(|i| candidates[i]).collect()
}

fn annotate(elements: Vec<Mobius>, mesh: &DisplacementMesh) -> Vec<TowerElement> {
    let displacements = pal::map_collect(elements.len(), |i| mesh.displacement(&elements[i]));
    elements
        .into_iter()
        .zip(displacements)
        .map(|(element, displacement)| TowerElement {
            element,
            displacement,
            is_identity: displacement < DEDUP_TOL,
        })
        .collect()
}

/// Build the commutator tower down to `S(depth)`.
pub fn ghys_tower(
    gens: &[Mobius],
    depth: usize,
    mesh: &DisplacementMesh,
    mode: TowerMode,
) -> Result<GhysTower, TowerError> {
    if gens.is_empty() {
        return Err(TowerError::EmptyGeneratingSet);
    }
    // S(0) is the generating set verbatim, not deduplicated.
    let mut levels = vec![annotate(gens.to_vec(), mesh)];
    let mut raw_counts = vec![gens.len()];

    for level in 1..=depth {
        let prev: Vec<Mobius> = levels[level - 1].iter().map(|e| e.element).collect();
        let mut pool = prev.clone();
        if level >= 2 {
            pool.extend(levels[level - 2].iter().map(|e| e.element));
        }
        let pool = dedup_level(pool, mesh);

        let predicted = prev.len() * pool.len() * 4;
        if predicted > CANDIDATE_LIMIT {
            return Err(TowerError::LevelCap {
                level,
                count: predicted,
                cap: CANDIDATE_LIMIT,
            });
        }

        // Fixed nesting order keeps candidate indices deterministic:
        // (F1, e1, F2, e2) with e ranging over (+1, −1).
        let candidates = pal::map_collect(predicted, |flat| {
            let e2 = flat % 2;
            let f2 = (flat / 2) % pool.len();
            let e1 = (flat / (2 * pool.len())) % 2;
            let f1 = flat / (4 * pool.len());
            let a = if e1 == 0 { prev[f1] } else { prev[f1].inverse() };
            let b = if e2 == 0 { pool[f2] } else { pool[f2].inverse() };
            a.compose(&b).compose(&a.inverse()).compose(&b.inverse())
        });
        raw_counts.push(candidates.len());

        let unique = dedup_level(candidates, mesh);
        let mut annotated = annotate(unique, mesh);
        match mode {
            TowerMode::Exhaustive { cap } => {
                if annotated.len() > cap {
                    return Err(TowerError::LevelCap {
                        level,
                        count: annotated.len(),
                        cap,
                    });
                }
            }
            TowerMode::Witness { keep } => {
                annotated.sort_by(|x, y| y.displacement.total_cmp(&x.displacement));
                annotated.truncate(keep.max(1));
            }
        }
        levels.push(annotated);
    }
    Ok(GhysTower {
        levels,
        mode,
        raw_counts,
    })
}

/// Outcome of the pseudo-solvability check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TowerVerdict {
    /// Every element of level `j` is within tolerance of the identity.
    PseudoSolvableAtLevel(usize),
    /// Every computed level contains an element above tolerance.
    NotWithinDepth,
}

impl std::fmt::Display for TowerVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TowerVerdict::PseudoSolvableAtLevel(j) => {
                write!(f, "pseudo_solvable_at_level {j}")
            }
            TowerVerdict::NotWithinDepth => write!(f, "not_within_depth"),
        }
    }
}

/// First level whose elements all have displacement ≤ `tol`. For a
/// witness tower, `NotWithinDepth` is rigorous (witness levels are
/// subsets of the true levels) while a collapse verdict only reflects
/// the retained witnesses.
pub fn pseudo_solvable_verdict(tower: &GhysTower, tol: f64) -> TowerVerdict {
    for (j, level) in tower.levels.iter().enumerate() {
        if level.iter().all(|e| e.displacement <= tol) {
            return TowerVerdict::PseudoSolvableAtLevel(j);
        }
    }
    TowerVerdict::NotWithinDepth
}

/// Per-target outcome of an orbit accumulation run.
#[derive(Debug, Clone)]
pub struct OrbitReport {
    pub targets: Vec<SpherePoint>,
    pub min_distance: Vec<f64>,
    pub first_hit_step: Vec<Option<usize>>,
    pub steps: usize,
}

impl OrbitReport {
    pub fn all_hit(&self) -> bool {
        self.first_hit_step.iter().all(Option::is_some)
    }
}

/// Random-walk probe of orbit accumulation at attracting fixed points.
///
/// Targets are both fixed points of every loxodromic generator (each is
/// attracting for the generator or for its inverse). The walk applies
/// `budget` uniformly random letters `g^{±1}` to the running point and
/// records, for each target, the closest chordal approach over every
/// prefix and the first step reaching within `eps`.
pub fn orbit_accumulation(
    gens: &[Mobius],
    x0: &SpherePoint,
    eps: f64,
    budget: usize,
    seed: u64,
) -> Result<OrbitReport, TowerError> {
    if gens.is_empty() {
        return Err(TowerError::EmptyGeneratingSet);
    }
    let mut targets = Vec::new();
    for g in gens {
        let data = local_model(g);
        if data.class == MobiusClass::Loxodromic {
            targets.extend(data.points.iter().cloned());
        }
    }
    if targets.is_empty() {
        return Err(TowerError::NoLoxodromic);
    }

    let mut stream = rng::stream(seed, 0);
    let mut current = *x0;
    let mut min_distance: Vec<f64> = targets.iter().map(|t| current.chordal(t)).collect();
    let mut first_hit_step: Vec<Option<usize>> = min_distance
        .iter()
        .map(|&d| if d < eps { Some(0) } else { None })
        .collect();
    for step in 1..=budget {
        let pick = stream.gen_range(0..gens.len() * 2);
        let letter = if pick % 2 == 0 {
            gens[pick / 2]
        } else {
            gens[pick / 2].inverse()
        };
        current = letter.apply(&current);
        for (i, t) in targets.iter().enumerate() {
            let d = current.chordal(t);
            if d < min_distance[i] {
                min_distance[i] = d;
            }
            if d < eps && first_hit_step[i].is_none() {
                first_hit_step[i] = Some(step);
            }
        }
    }
    Ok(OrbitReport {
        targets,
        min_distance,
        first_hit_step,
        steps: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const FIFTH: f64 = std::f64::consts::TAU / 5.0;
    const SEVENTH: f64 = std::f64::consts::TAU / 7.0;

    fn rotation_pair() -> Vec<Mobius> {
        vec![
            Mobius::rotation([0.0, 0.0, 1.0], FIFTH).unwrap(),
            Mobius::rotation([1.0, 0.0, 0.0], SEVENTH).unwrap(),
        ]
    }

    #[test]
    fn words_reduce_freely() {
        let g = Word::generator(0);
        let gg = g.multiply(&g.inverse());
        assert!(gg.is_empty());

        let h = Word::generator(1);
        let w = g.multiply(&h).multiply(&h.inverse()).multiply(&g);
        assert_eq!(w.letters(), &[(0, 1), (0, 1)]);

        let c = Word::commutator(&g, &h);
        assert_eq!(c.letters(), &[(0, 1), (1, 1), (0, -1), (1, -1)]);
        assert_eq!(c.inverse(), Word::commutator(&h, &g));
    }

    #[test]
    fn word_evaluation_matches_direct_matrix_product() {
        let gens = rotation_pair();
        let mut stream = rng::stream(21, 0);
        let mut word = Word::empty();
        let mut direct = Mobius::identity();
        for _ in 0..20 {
            let idx = stream.gen_range(0..2usize);
            let exp: i8 = if stream.gen_range(0..2) == 0 { 1 } else { -1 };
            word = word.multiply(&Word {
                letters: vec![(idx, exp)],
            });
            let factor = if exp == 1 { gens[idx] } else { gens[idx].inverse() };
            direct = direct.compose(&factor);
        }
        let via_word = word_evaluate(&word, &gens).unwrap();
        assert!(via_word.matrix_distance(&direct) < 1e-12);

        assert!(word_evaluate(&Word::empty(), &gens)
            .unwrap()
            .matrix_distance(&Mobius::identity())
            < 1e-15);
        assert_eq!(
            word_evaluate(&Word::generator(7), &gens),
            Err(TowerError::GeneratorIndex { index: 7, len: 2 })
        );
    }

    #[test]
    fn level_zero_is_the_generating_set_verbatim() {
        let gens = rotation_pair();
        let mesh = DisplacementMesh::default();
        let tower = ghys_tower(&gens, 0, &mesh, TowerMode::Exhaustive { cap: 100 }).unwrap();
        assert_eq!(tower.levels.len(), 1);
        assert_eq!(tower.levels[0].len(), 2);
        for (e, g) in tower.levels[0].iter().zip(&gens) {
            assert!(e.element.matrix_distance(g) < 1e-15);
            assert!(!e.is_identity);
        }
    }

    #[test]
    fn commuting_rotations_collapse_at_level_one() {
        let gens = vec![
            Mobius::rotation([0.0, 0.0, 1.0], FIFTH).unwrap(),
            Mobius::rotation([0.0, 0.0, 1.0], 1.0).unwrap(),
        ];
        let mesh = DisplacementMesh::default();
        let tower = ghys_tower(&gens, 3, &mesh, TowerMode::Exhaustive { cap: 1000 }).unwrap();
        assert_eq!(tower.levels[1].len(), 1);
        assert!(tower.levels[1][0].is_identity);
        assert_eq!(
            pseudo_solvable_verdict(&tower, 1e-9),
            TowerVerdict::PseudoSolvableAtLevel(1)
        );
    }

    #[test]
    fn identity_generating_set_is_solvable_at_level_zero() {
        let mesh = DisplacementMesh::default();
        let tower = ghys_tower(
            &[Mobius::identity()],
            2,
            &mesh,
            TowerMode::Exhaustive { cap: 10 },
        )
        .unwrap();
        assert_eq!(
            pseudo_solvable_verdict(&tower, 1e-9),
            TowerVerdict::PseudoSolvableAtLevel(0)
        );
    }

    /// Brute-force reference: quadratic deduplication straight from the
    /// definition, with no windowing shortcuts.
    fn brute_force_levels(gens: &[Mobius], depth: usize, mesh: &DisplacementMesh) -> Vec<Vec<Mobius>> {
        let mut levels: Vec<Vec<Mobius>> = vec![gens.to_vec()];
        for level in 1..=depth {
            let prev = levels[level - 1].clone();
            let mut pool = prev.clone();
            if level >= 2 {
                pool.extend(levels[level - 2].iter().cloned());
            }
            let mut pool_unique: Vec<Mobius> = Vec::new();
            for c in pool {
                if !pool_unique
                    .iter()
                    .any(|p| mesh.distance(&c, p) < DEDUP_TOL)
                {
                    pool_unique.push(c);
                }
            }
            let mut unique: Vec<Mobius> = Vec::new();
            for f1 in &prev {
                for e1 in [1, -1] {
                    let a = if e1 == 1 { *f1 } else { f1.inverse() };
                    for f2 in &pool_unique {
                        for e2 in [1, -1] {
                            let b = if e2 == 1 { *f2 } else { f2.inverse() };
                            let c = a.compose(&b).compose(&a.inverse()).compose(&b.inverse());
                            if !unique.iter().any(|p| mesh.distance(&c, p) < DEDUP_TOL) {
                                unique.push(c);
                            }
                        }
                    }
                }
            }
            levels.push(unique);
        }
        levels
    }

    #[test]
    fn tower_matches_brute_force_enumeration_to_depth_two() {
        let gens = rotation_pair();
        let mesh = DisplacementMesh::default();
        let tower = ghys_tower(&gens, 2, &mesh, TowerMode::Exhaustive { cap: 100_000 }).unwrap();
        let reference = brute_force_levels(&gens, 2, &mesh);
        for (level, (got, want)) in tower.levels.iter().zip(&reference).enumerate() {
            assert_eq!(
                got.len(),
                want.len(),
                "level {level} size mismatch: {} vs brute force {}",
                got.len(),
                want.len()
            );
        }
        // and every computed element appears in the reference set
        for (got, want) in tower.levels.iter().zip(&reference) {
            for e in got {
                assert!(want.iter().any(|w| mesh.distance(&e.element, w) < 1e-12));
            }
        }
    }

    #[test]
    fn free_rotation_pair_stays_displaced_to_depth_three() {
        let gens = rotation_pair();
        let mesh = DisplacementMesh::default();
        let tower = ghys_tower(&gens, 3, &mesh, TowerMode::Exhaustive { cap: 500_000 }).unwrap();
        for (j, level) in tower.levels.iter().enumerate() {
            assert!(!level.is_empty(), "level {j} is empty");
            let max_disp = level
                .iter()
                .map(|e| e.displacement)
                .fold(0.0f64, f64::max);
            assert!(max_disp > 0.0, "level {j} collapsed: max displacement 0");
        }
        // every element of S(3) individually stays off the identity
        for e in &tower.levels[3] {
            assert!(e.displacement > 0.0);
        }
        assert_eq!(pseudo_solvable_verdict(&tower, 1e-9), TowerVerdict::NotWithinDepth);
    }

    #[test]
    fn witness_mode_certifies_depth_six_displacement() {
        let gens = rotation_pair();
        let mesh = DisplacementMesh::default();
        let tower = ghys_tower(&gens, 6, &mesh, TowerMode::Witness { keep: 24 }).unwrap();
        assert_eq!(tower.levels.len(), 7);
        for (j, level) in tower.levels.iter().enumerate() {
            let max_disp = level
                .iter()
                .map(|e| e.displacement)
                .fold(0.0f64, f64::max);
            assert!(
                max_disp > 1e-9,
                "witness level {j} max displacement {max_disp:.3e} not above tolerance"
            );
        }
        assert_eq!(pseudo_solvable_verdict(&tower, 1e-9), TowerVerdict::NotWithinDepth);
    }

    #[test]
    fn witness_levels_are_subsets_of_exhaustive_levels() {
        let gens = rotation_pair();
        let mesh = DisplacementMesh::default();
        let witness = ghys_tower(&gens, 2, &mesh, TowerMode::Witness { keep: 8 }).unwrap();
        let full = ghys_tower(&gens, 2, &mesh, TowerMode::Exhaustive { cap: 100_000 }).unwrap();
        for (w_level, f_level) in witness.levels.iter().zip(&full.levels) {
            for e in w_level {
                assert!(f_level
                    .iter()
                    .any(|f| mesh.distance(&e.element, &f.element) < 1e-12));
            }
        }
    }

    #[test]
    fn exhaustive_cap_aborts_cleanly() {
        let gens = rotation_pair();
        let mesh = DisplacementMesh::default();
        let err = ghys_tower(&gens, 2, &mesh, TowerMode::Exhaustive { cap: 10 }).unwrap_err();
        assert!(matches!(err, TowerError::LevelCap { level: 2, .. }));
    }

    #[test]
    fn orbit_walk_reaches_both_fixed_points_of_a_contraction() {
        let g = Mobius::dilation(Complex64::new(0.5, 0.0)).unwrap();
        let x0 = SpherePoint::new(1.0, 0.0);
        let eps = 1e-3;
        let report = orbit_accumulation(&[g], &x0, eps, 10_000, 31).unwrap();
        assert_eq!(report.targets.len(), 2);
        assert!(report.all_hit(), "min distances: {:?}", report.min_distance);
        // after m steps the distance to 0 is at least 2^{-m}, so the hit
        // cannot land before log2(1/eps) steps
        let floor = (1.0 / eps).log2().ceil() as usize;
        for (t, step) in report.targets.iter().zip(&report.first_hit_step) {
            let s = step.unwrap();
            if t.chordal(&SpherePoint::zero()) < 1e-12 {
                assert!(s >= floor, "hit at step {s}, below the 2^-m floor {floor}");
            }
        }
    }

    #[test]
    fn orbit_walk_dense_pair_hits_both_targets() {
        let gens = vec![
            Mobius::dilation(Complex64::new(2.0, 0.0)).unwrap(),
            Mobius::rotation([1.0, 0.0, 0.0], SEVENTH).unwrap(),
        ];
        let x0 = SpherePoint::new(0.3, 0.4);
        let report = orbit_accumulation(&gens, &x0, 1e-3, 10_000, 17).unwrap();
        assert_eq!(report.targets.len(), 2);
        assert!(
            report.all_hit(),
            "min distances to targets: {:?}",
            report.min_distance
        );
    }

    #[test]
    fn orbit_walk_rejects_rotation_only_sets() {
        let gens = rotation_pair();
        let err = orbit_accumulation(&gens, &SpherePoint::zero(), 1e-3, 100, 1).unwrap_err();
        assert_eq!(err, TowerError::NoLoxodromic);
    }
}

//! Möbius transformations of the Riemann sphere.
//!
//! Matrices are kept in a canonical form: determinant 1 and the first
//! entry of `(a, b, c, d)` with modulus above 1e-12 has non-negative real
//! part (ties broken toward non-negative imaginary part). Use
//! [`Mobius::matrix_distance`] to compare elements; it also absorbs the
//! residual projective sign ambiguity near the canonicalization threshold.

use crate::sphere::{chordal3, icosphere_642, SpherePoint};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MobiusError {
    #[error("matrix is singular (determinant too small: {0})")]
    Singular(f64),
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("points must be pairwise distinct to pin a Möbius map")]
    DegeneratePoints,
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

/// Normalized Möbius transformation `z ↦ (az + b) / (cz + d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

const SIGN_TOL: f64 = 1e-12;

impl Mobius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, MobiusError> {
        let det = a * d - b * c;
        if det.norm() < 1e-30 {
            return Err(MobiusError::Singular(det.norm()));
        }
        let s = det.sqrt();
        let mut m = Mobius {
            a: a / s,
            b: b / s,
            c: c / s,
            d: d / s,
        };
        m.canonicalize_sign();
        Ok(m)
    }

    fn canonicalize_sign(&mut self) {
        let entries = [self.a, self.b, self.c, self.d];
        for e in entries {
            if e.norm() > SIGN_TOL {
                let flip = e.re < -SIGN_TOL || (e.re.abs() <= SIGN_TOL && e.im < 0.0);
                if flip {
                    self.a = -self.a;
                    self.b = -self.b;
                    self.c = -self.c;
                    self.d = -self.d;
                }
                return;
            }
        }
    }

    pub fn identity() -> Self {
        Mobius {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// Dilation `z ↦ k z` for `k != 0`.
    pub fn dilation(k: Complex64) -> Result<Self, MobiusError> {
        Mobius::new(
            k,
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
    }

    /// Translation `z ↦ z + t`.
    pub fn translation(t: Complex64) -> Self {
        Mobius {
            a: Complex64::new(1.0, 0.0),
            b: t,
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// Rotation of the sphere by `angle` about the (not necessarily unit)
    /// `axis`, through the standard SU(2) correspondence.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Result<Self, MobiusError> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n < 1e-15 {
            return Err(MobiusError::ZeroAxis);
        }
        let (nx, ny, nz) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (s, c) = (angle / 2.0).sin_cos();
        Mobius::new(
            Complex64::new(c, s * nz),
            Complex64::new(s * ny, s * nx),
            Complex64::new(-s * ny, s * nx),
            Complex64::new(c, -s * nz),
        )
    }

    pub fn compose(&self, other: &Mobius) -> Mobius {
        let mut m = Mobius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        };
        m.canonicalize_sign();
        m
    }

    pub fn inverse(&self) -> Mobius {
        let mut m = Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        };
        m.canonicalize_sign();
        m
    }

    pub fn apply(&self, p: &SpherePoint) -> SpherePoint {
        match p {
            SpherePoint::Infinity => {
                if self.c.norm() < 1e-300 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite(self.a / self.c)
                }
            }
            SpherePoint::Finite(z) => {
                let denom = self.c * z + self.d;
                if denom.norm() < 1e-300 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite((self.a * z + self.b) / denom)
                }
            }
        }
    }

    pub fn apply_unit3(&self, v: [f64; 3]) -> [f64; 3] {
        self.apply(&SpherePoint::from_unit3(v)).to_unit3()
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    /// Distance to another element as max matrix-entry distance, up to
    /// the projective sign (both are canonical, so direct comparison).
    pub fn matrix_distance(&self, other: &Mobius) -> f64 {
        let direct = (self.a - other.a)
            .norm()
            .max((self.b - other.b).norm())
            .max((self.c - other.c).norm())
            .max((self.d - other.d).norm());
        let flipped = (self.a + other.a)
            .norm()
            .max((self.b + other.b).norm())
            .max((self.c + other.c).norm())
            .max((self.d + other.d).norm());
        direct.min(flipped)
    }

    /// The Möbius map sending `(p1, p2, p3)` to `(0, 1, ∞)`.
    pub fn to_zero_one_inf(
        p1: &SpherePoint,
        p2: &SpherePoint,
        p3: &SpherePoint,
    ) -> Result<Mobius, MobiusError> {
        let min_sep = p1
            .chordal(p2)
            .min(p2.chordal(p3))
            .min(p1.chordal(p3));
        if min_sep < 1e-9 {
            return Err(MobiusError::DegeneratePoints);
        }
        let one = Complex64::new(1.0, 0.0);
        let (a, b, c, d) = match (p1, p2, p3) {
            (SpherePoint::Infinity, SpherePoint::Finite(z2), SpherePoint::Finite(z3)) => {
                (Complex64::new(0.0, 0.0), z2 - z3, one, -z3)
            }
            (SpherePoint::Finite(z1), SpherePoint::Infinity, SpherePoint::Finite(z3)) => {
                (one, -z1, one, -z3)
            }
            (SpherePoint::Finite(z1), SpherePoint::Finite(z2), SpherePoint::Infinity) => {
                (one, -z1, Complex64::new(0.0, 0.0), z2 - z1)
            }
            (SpherePoint::Finite(z1), SpherePoint::Finite(z2), SpherePoint::Finite(z3)) => {
                (z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))
            }
            _ => return Err(MobiusError::DegeneratePoints),
        };
        Mobius::new(a, b, c, d)
    }
}

/// Dynamical type of a Möbius transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobiusClass {
    Identity,
    Parabolic,
    Elliptic,
    Loxodromic,
}

/// Fixed points of a Möbius map with their derivative multipliers.
#[derive(Debug, Clone)]
pub struct FixedPointData {
    pub class: MobiusClass,
    /// One entry for parabolic maps, two otherwise (empty for identity).
    pub points: Vec<SpherePoint>,
    /// Multiplier `g'` at each fixed point, in the chart that makes the
    /// point finite.
    pub multipliers: Vec<Complex64>,
    /// Contraction rates `|g'|` at each fixed point.
    pub rates: Vec<f64>,
}

const CLASS_TOL: f64 = 1e-9;

/// Fixed points, multipliers and dynamical classification.
pub fn local_model(g: &Mobius) -> FixedPointData {
    let t2 = g.trace() * g.trace();
    let disc = t2 - Complex64::new(4.0, 0.0);
    let is_identity = g.matrix_distance(&Mobius::identity()) < CLASS_TOL;
    if is_identity {
        return FixedPointData {
            class: MobiusClass::Identity,
            points: vec![],
            multipliers: vec![],
            rates: vec![],
        };
    }
    let class = if disc.norm() < CLASS_TOL {
        MobiusClass::Parabolic
    } else if t2.im.abs() < CLASS_TOL && t2.re >= 0.0 && t2.re < 4.0 {
        MobiusClass::Elliptic
    } else {
        MobiusClass::Loxodromic
    };

    let mut points = Vec::new();
    if g.c.norm() > 1e-14 {
        if class == MobiusClass::Parabolic {
            points.push(SpherePoint::Finite((g.a - g.d) / (2.0 * g.c)));
        } else {
            let root = disc.sqrt();
            points.push(SpherePoint::Finite((g.a - g.d + root) / (2.0 * g.c)));
            points.push(SpherePoint::Finite((g.a - g.d - root) / (2.0 * g.c)));
        }
    } else {
        points.push(SpherePoint::Infinity);
        if (g.a - g.d).norm() > CLASS_TOL {
            points.push(SpherePoint::Finite(g.b / (g.d - g.a)));
        }
    }

    let multipliers: Vec<Complex64> = points
        .iter()
        .map(|p| match p {
            SpherePoint::Infinity => g.d / g.a,
            SpherePoint::Finite(z) => {
                let denom = g.c * z + g.d;
                1.0 / (denom * denom)
            }
        })
        .collect();
    let rates = multipliers.iter().map(|m| m.norm()).collect();
    FixedPointData {
        class,
        points,
        multipliers,
        rates,
    }
}

/// Fixed icosphere mesh wrapper for displacement estimates.
pub struct DisplacementMesh {
    nodes: Vec<[f64; 3]>,
}

impl Default for DisplacementMesh {
    fn default() -> Self {
        DisplacementMesh {
            nodes: icosphere_642(),
        }
    }
}

impl DisplacementMesh {
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Sup over mesh nodes of the chordal distance moved by `g`.
    pub fn displacement(&self, g: &Mobius) -> f64 {
        self.nodes
            .iter()
            .map(|&v| chordal3(g.apply_unit3(v), v))
            .fold(0.0, f64::max)
    }

    /// Displacement of `g ∘ h^{-1}`: a metric surrogate for the distance
    /// between two elements.
    pub fn distance(&self, g: &Mobius, h: &Mobius) -> f64 {
        self.displacement(&g.compose(&h.inverse()))
    }
}

/// Parse a generating set from structured text: one element per line,
/// `mobius a_re a_im b_re b_im c_re c_im d_re d_im` or
/// `rotation axis_x axis_y axis_z angle`. Blank lines and `#` comments
/// are ignored.
pub fn parse_generating_set(text: &str) -> Result<Vec<Mobius>, MobiusError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let mut toks = content.split_whitespace();
        let kind = toks.next().expect("non-empty line has a first token");
        let nums: Result<Vec<f64>, _> = toks.map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| MobiusError::Config {
            line,
            message: format!("bad number: {e}"),
        })?;
        match kind {
            "mobius" => {
                if nums.len() != 8 {
                    return Err(MobiusError::Config {
                        line,
                        message: format!("mobius needs 8 numbers, got {}", nums.len()),
                    });
                }
                let m = Mobius::new(
                    Complex64::new(nums[0], nums[1]),
                    Complex64::new(nums[2], nums[3]),
                    Complex64::new(nums[4], nums[5]),
                    Complex64::new(nums[6], nums[7]),
                )
                .map_err(|e| MobiusError::Config {
                    line,
                    message: e.to_string(),
                })?;
                out.push(m);
            }
            "rotation" => {
                if nums.len() != 4 {
                    return Err(MobiusError::Config {
                        line,
                        message: format!("rotation needs 4 numbers, got {}", nums.len()),
                    });
                }
                let m = Mobius::rotation([nums[0], nums[1], nums[2]], nums[3]).map_err(|e| {
                    MobiusError::Config {
                        line,
                        message: e.to_string(),
                    }
                })?;
                out.push(m);
            }
            other => {
                return Err(MobiusError::Config {
                    line,
                    message: format!("unknown element kind `{other}`"),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(MobiusError::Config {
            line: 0,
            message: "no generators found".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    pub(crate) fn random_mobius(stream: &mut rng::LabRng) -> Mobius {
        loop {
            let draw = |s: &mut rng::LabRng| Complex64::new(s.gen_range(-1.0..1.0), s.gen_range(-1.0..1.0));
            let (a, b, c, d) = (draw(stream), draw(stream), draw(stream), draw(stream));
            if let Ok(m) = Mobius::new(a, b, c, d) {
                if (a * d - b * c).norm() > 0.05 {
                    return m;
                }
            }
        }
    }

    #[test]
    fn identity_and_inversion_examples() {
        let id = Mobius::identity();
        let z = SpherePoint::new(0.3, -0.4);
        assert!(id.apply(&z).chordal(&z) < 1e-15);

        // z ↦ 1/z swaps 0 and ∞
        let inv = Mobius::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        )
        .unwrap();
        assert!(inv.apply(&SpherePoint::zero()).is_infinity());
        assert!(inv.apply(&SpherePoint::Infinity).chordal(&SpherePoint::zero()) < 1e-15);
    }

    #[test]
    fn normalization_is_idempotent_and_unimodular() {
        let mut stream = rng::stream(5, 0);
        for _ in 0..200 {
            let m = random_mobius(&mut stream);
            let det = m.a * m.d - m.b * m.c;
            assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            let again = Mobius::new(m.a, m.b, m.c, m.d).unwrap();
            assert!(m.matrix_distance(&again) < 1e-12);
        }
    }

    #[test]
    fn sign_canonicalization_identifies_antipodal_matrices() {
        let mut stream = rng::stream(6, 0);
        for _ in 0..100 {
            let m = random_mobius(&mut stream);
            let negated = Mobius::new(-m.a, -m.b, -m.c, -m.d).unwrap();
            assert!(m.matrix_distance(&negated) < 1e-12);
        }
    }

    #[test]
    fn apply_distributes_over_composition() {
        let mut stream = rng::stream(7, 0);
        for _ in 0..100 {
            let g = random_mobius(&mut stream);
            let h = random_mobius(&mut stream);
            let p = SpherePoint::new(stream.gen_range(-2.0..2.0), stream.gen_range(-2.0..2.0));
            let via_compose = g.compose(&h).apply(&p);
            let via_apply = g.apply(&h.apply(&p));
            assert!(via_compose.chordal(&via_apply) < 1e-10);
        }
    }

    #[test]
    fn inverse_round_trips() {
        let mut stream = rng::stream(8, 0);
        for _ in 0..100 {
            let g = random_mobius(&mut stream);
            assert!(g.compose(&g.inverse()).matrix_distance(&Mobius::identity()) < 1e-12);
        }
    }

    #[test]
    fn rotations_about_z_fix_poles() {
        let r = Mobius::rotation([0.0, 0.0, 1.0], 1.234).unwrap();
        assert!(r.apply(&SpherePoint::zero()).chordal(&SpherePoint::zero()) < 1e-15);
        assert!(r.apply(&SpherePoint::Infinity).is_infinity());
        // circle of latitude is preserved
        let p = SpherePoint::new(1.0, 0.0);
        let q = r.apply(&p);
        if let SpherePoint::Finite(z) = q {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z.arg() - 1.234).abs() < 1e-12);
        } else {
            panic!("rotation moved the equator to infinity");
        }
    }

    #[test]
    fn chordal_metric_is_rotation_invariant() {
        // The metric itself is exactly rotation invariant; displacement
        // over the fixed mesh is only invariant up to mesh resolution and
        // is tested separately with a loose tolerance.
        let mut stream = rng::stream(9, 0);
        for _ in 0..50 {
            let axis = rng::unit_sphere_point(&mut stream);
            let r = Mobius::rotation(axis, stream.gen_range(0.0..std::f64::consts::TAU)).unwrap();
            let p = SpherePoint::new(stream.gen_range(-2.0..2.0), stream.gen_range(-2.0..2.0));
            let q = SpherePoint::new(stream.gen_range(-2.0..2.0), stream.gen_range(-2.0..2.0));
            let before = p.chordal(&q);
            let after = r.apply(&p).chordal(&r.apply(&q));
            assert!((before - after).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_displacement_respects_rotation_conjugation_loosely() {
        let mesh = DisplacementMesh::default();
        let g = Mobius::dilation(Complex64::new(1.7, 0.2)).unwrap();
        let base = mesh.displacement(&g);
        let mut stream = rng::stream(10, 0);
        for _ in 0..10 {
            let axis = rng::unit_sphere_point(&mut stream);
            let r = Mobius::rotation(axis, stream.gen_range(0.0..std::f64::consts::TAU)).unwrap();
            let conj = r.compose(&g).compose(&r.inverse());
            let moved = mesh.displacement(&conj);
            assert!(
                (moved - base).abs() < 0.15 * base,
                "conjugated displacement {} too far from {}",
                moved,
                base
            );
        }
    }

    #[test]
    fn local_model_dilation() {
        let g = Mobius::dilation(Complex64::new(2.0, 0.0)).unwrap();
        let data = local_model(&g);
        assert_eq!(data.class, MobiusClass::Loxodromic);
        assert_eq!(data.points.len(), 2);
        // fixed points 0 and ∞ with multipliers 2 and 1/2
        let mut rates = data.rates.clone();
        rates.sort_by(f64::total_cmp);
        assert!((rates[0] - 0.5).abs() < 1e-12);
        assert!((rates[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_model_fixed_point_residual_and_multiplier_pairing() {
        let mut stream = rng::stream(11, 0);
        let mut loxodromic_seen = 0;
        for _ in 0..200 {
            let g = random_mobius(&mut stream);
            let data = local_model(&g);
            for p in &data.points {
                assert!(
                    g.apply(p).chordal(p) < 1e-7,
                    "fixed point drifted under {:?}",
                    g
                );
            }
            if data.class == MobiusClass::Loxodromic {
                loxodromic_seen += 1;
                let k = data.multipliers[0];
                let k_inv = data.multipliers[1];
                assert!((k * k_inv - Complex64::new(1.0, 0.0)).norm() < 1e-9);
                // exactly one attracting fixed point
                assert!((data.rates[0] < 1.0) != (data.rates[1] < 1.0));
            }
        }
        assert!(loxodromic_seen > 100, "sampler should mostly see loxodromics");
    }

    #[test]
    fn local_model_parabolic_translation() {
        let g = Mobius::translation(Complex64::new(1.0, 0.0));
        let data = local_model(&g);
        assert_eq!(data.class, MobiusClass::Parabolic);
        assert_eq!(data.points.len(), 1);
        assert!(data.points[0].is_infinity());
    }

    #[test]
    fn local_model_elliptic_rotation() {
        let g = Mobius::rotation([0.0, 0.0, 1.0], 0.7).unwrap();
        let data = local_model(&g);
        assert_eq!(data.class, MobiusClass::Elliptic);
        for r in &data.rates {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn three_point_normalization() {
        let mut stream = rng::stream(12, 0);
        for _ in 0..50 {
            let draw = |s: &mut rng::LabRng| {
                SpherePoint::new(s.gen_range(-2.0..2.0), s.gen_range(-2.0..2.0))
            };
            let (p1, p2, p3) = (draw(&mut stream), draw(&mut stream), draw(&mut stream));
            if p1.chordal(&p2) < 0.1 || p2.chordal(&p3) < 0.1 || p1.chordal(&p3) < 0.1 {
                continue;
            }
            let m = Mobius::to_zero_one_inf(&p1, &p2, &p3).unwrap();
            assert!(m.apply(&p1).chordal(&SpherePoint::zero()) < 1e-9);
            assert!(m.apply(&p2).chordal(&SpherePoint::new(1.0, 0.0)) < 1e-9);
            assert!(m.apply(&p3).chordal(&SpherePoint::Infinity) < 1e-9);
        }
        assert!(Mobius::to_zero_one_inf(
            &SpherePoint::zero(),
            &SpherePoint::zero(),
            &SpherePoint::Infinity
        )
        .is_err());
    }

    #[test]
    fn generating_set_parsing() {
        let text = "# demo set\nrotation 0 0 1 1.2566370614359172\n\nmobius 2 0 0 0 0 0 1 0\n";
        let gens = parse_generating_set(text).unwrap();
        assert_eq!(gens.len(), 2);
        assert_eq!(local_model(&gens[0]).class, MobiusClass::Elliptic);
        assert_eq!(local_model(&gens[1]).class, MobiusClass::Loxodromic);

        assert!(parse_generating_set("").is_err());
        assert!(parse_generating_set("rotation 0 0 1").is_err());
        assert!(parse_generating_set("mobius 0 0 0 0 0 0 1 0").is_err()); // singular
        assert!(parse_generating_set("spin 1 2 3").is_err());
    }
}

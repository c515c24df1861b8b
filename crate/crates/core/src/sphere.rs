//! Points on the Riemann sphere and the fixed evaluation mesh.
//!
//! A point is stored as an extended complex number; conversions to and
//! from unit 3-vectors go through the stereographic projection from the
//! north pole, with `z = ∞` mapping to the pole itself. The chordal
//! distance is the Euclidean distance of the corresponding 3-vectors.

use num_complex::Complex64;

/// Point of the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn new(re: f64, im: f64) -> Self {
        SpherePoint::Finite(Complex64::new(re, im))
    }

    pub fn zero() -> Self {
        SpherePoint::Finite(Complex64::new(0.0, 0.0))
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    /// Unit 3-vector under inverse stereographic projection.
    pub fn to_unit3(&self) -> [f64; 3] {
        match self {
            SpherePoint::Infinity => [0.0, 0.0, 1.0],
            SpherePoint::Finite(z) => {
                let n = z.norm_sqr();
                let d = n + 1.0;
                [2.0 * z.re / d, 2.0 * z.im / d, (n - 1.0) / d]
            }
        }
    }

    /// Extended complex number of a unit 3-vector.
    pub fn from_unit3(v: [f64; 3]) -> Self {
        let denom = 1.0 - v[2];
        if denom <= 1e-15 {
            return SpherePoint::Infinity;
        }
        SpherePoint::Finite(Complex64::new(v[0] / denom, v[1] / denom))
    }

    /// Chordal distance (Euclidean distance on the embedded unit sphere),
    /// taking values in `[0, 2]`.
    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        match (self, other) {
            (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
                let num = 2.0 * (z - w).norm();
                num / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt()
            }
            (SpherePoint::Finite(z), SpherePoint::Infinity)
            | (SpherePoint::Infinity, SpherePoint::Finite(z)) => {
                2.0 / (1.0 + z.norm_sqr()).sqrt()
            }
            (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        }
    }

    /// Antipodal point.
    pub fn antipode(&self) -> SpherePoint {
        match self {
            SpherePoint::Infinity => SpherePoint::zero(),
            SpherePoint::Finite(z) if z.norm_sqr() == 0.0 => SpherePoint::Infinity,
            SpherePoint::Finite(z) => SpherePoint::Finite(-1.0 / z.conj()),
        }
    }
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Chordal distance of two unit 3-vectors.
pub fn chordal3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// The fixed evaluation mesh: an icosphere with 642 vertices (an
/// icosahedron subdivided three times, vertices re-projected to the
/// sphere after every split). Construction is fully deterministic.
pub fn icosphere_642() -> Vec<[f64; 3]> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize3)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..3 {
        let mut midpoint_cache: std::collections::BTreeMap<(usize, usize), usize> =
            std::collections::BTreeMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for face in &faces {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (face[e], face[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint_cache.entry(key).or_insert_with(|| {
                    let va = vertices[a];
                    let vb = vertices[b];
                    vertices.push(normalize3([
                        (va[0] + vb[0]) / 2.0,
                        (va[1] + vb[1]) / 2.0,
                        (va[2] + vb[2]) / 2.0,
                    ]));
                    vertices.len() - 1
                });
            }
            next_faces.push([face[0], mid[0], mid[2]]);
            next_faces.push([face[1], mid[1], mid[0]]);
            next_faces.push([face[2], mid[2], mid[1]]);
            next_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = next_faces;
    }
    vertices
}

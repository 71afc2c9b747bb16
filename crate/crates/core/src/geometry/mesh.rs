use std::collections::HashMap;

use crate::{Error, Result, Vec3};

/// Faces with area at or below this are rejected as degenerate (m²).
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Indexed triangle surface with per-face unit normals.
///
/// Immutable once built; construct through [`TriMesh::new`], which validates
/// indices and face areas and derives the normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_normals: Vec<Vec3>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        let mut face_normals = Vec::with_capacity(faces.len());
        for (fi, face) in faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
            let [a, b, c] = face.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if !(area > MIN_FACE_AREA) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} is degenerate (area {area:e} m²)"
                )));
            }
            face_normals.push(cross.normalize());
        }
        Ok(Self {
            vertices,
            faces,
            face_normals,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume (divergence theorem); positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// True when every directed edge is matched by exactly one opposite edge,
    /// i.e. the surface is closed and consistently oriented.
    pub fn is_closed(&self) -> bool {
        let mut edges: HashMap<(u32, u32), i32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a, b)).or_default() += 1;
            }
        }
        edges
            .iter()
            .all(|(&(a, b), &n)| n == 1 && edges.get(&(b, a)) == Some(&1))
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Same faces, new vertex positions (e.g. a posed copy of a template).
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Self::new(vertices, self.faces.clone())
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// Reflect across the x = 0 plane, reversing winding so normals stay outward.
    pub fn mirrored_x(&self) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|v| Vec3::new(-v.x, v.y, v.z))
            .collect();
        let faces = self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect();
        Self::new(vertices, faces).expect("reflection preserves validity")
    }

    /// Axis-aligned box with outward winding, 8 vertices and 12 faces.
    pub fn cuboid(min: Vec3, max: Vec3) -> Result<Self> {
        let v = |x: usize, y: usize, z: usize| {
            Vec3::new(
                if x == 0 { min.x } else { max.x },
                if y == 0 { min.y } else { max.y },
                if z == 0 { min.z } else { max.z },
            )
        };
        let vertices = vec![
            v(0, 0, 0),
            v(1, 0, 0),
            v(1, 1, 0),
            v(0, 1, 0),
            v(0, 0, 1),
            v(1, 0, 1),
            v(1, 1, 1),
            v(0, 1, 1),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Self::new(vertices, faces)
    }

    /// Box subdivided into `n × n` quads per side (2n² triangles per side).
    pub fn subdivided_cuboid(min: Vec3, max: Vec3, n: usize) -> Result<Self> {
        let n = n.max(1);
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut index: HashMap<[i64; 3], u32> = HashMap::new();
        let extent = max - min;
        let mut vid = |g: [usize; 3], vertices: &mut Vec<Vec3>| -> u32 {
            let key = g.map(|c| c as i64);
            *index.entry(key).or_insert_with(|| {
                vertices.push(Vec3::new(
                    min.x + extent.x * g[0] as f64 / n as f64,
                    min.y + extent.y * g[1] as f64 / n as f64,
                    min.z + extent.z * g[2] as f64 / n as f64,
                ));
                (vertices.len() - 1) as u32
            })
        };
        // (normal axis, side, u axis, v axis) with u × v pointing along the outward normal.
        let sides: [(usize, usize, usize, usize); 6] = [
            (0, 0, 2, 1),
            (0, 1, 1, 2),
            (1, 0, 0, 2),
            (1, 1, 2, 0),
            (2, 0, 1, 0),
            (2, 1, 0, 1),
        ];
        for &(axis, side, ua, va) in &sides {
            for i in 0..n {
                for j in 0..n {
                    let grid = |du: usize, dv: usize| {
                        let mut g = [0usize; 3];
                        g[axis] = side * n;
                        g[ua] = i + du;
                        g[va] = j + dv;
                        g
                    };
                    let a = vid(grid(0, 0), &mut vertices);
                    let b = vid(grid(1, 0), &mut vertices);
                    let c = vid(grid(1, 1), &mut vertices);
                    let d = vid(grid(0, 1), &mut vertices);
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
            }
        }
        Self::new(vertices, faces)
    }
}

/// A point on a mesh face given by barycentric weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub face: usize,
    pub barycentric: [f64; 3],
    pub position: Vec3,
}

impl SurfacePoint {
    pub fn on_face(mesh: &TriMesh, face: usize, barycentric: [f64; 3]) -> Result<Self> {
        if face >= mesh.face_count() {
            return Err(Error::InvalidSurfacePoint(format!(
                "face {face} out of range ({} faces)",
                mesh.face_count()
            )));
        }
        let sum: f64 = barycentric.iter().sum();
        if barycentric.iter().any(|b| !(*b >= -1e-12)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSurfacePoint(format!(
                "barycentric {barycentric:?} is not a convex combination"
            )));
        }
        Ok(Self {
            face,
            barycentric,
            position: interpolate(&mesh.triangle(face), &barycentric),
        })
    }
}

pub(crate) fn interpolate(tri: &[Vec3; 3], b: &[f64; 3]) -> Vec3 {
    tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2]
}

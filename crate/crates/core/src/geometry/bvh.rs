use super::mesh::interpolate;
use super::triangle;
use super::{SurfacePoint, TriMesh};
use crate::{Error, Result, Vec3};

const LEAF_SIZE: usize = 4;
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        (0..3)
            .all(|a| min[a] <= max[a])
            .then_some(Aabb { min, max })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] && other.max[a] <= self.max[a])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    fn padded(&self, pad: f64) -> Aabb {
        Aabb {
            min: self.min.add_scalar(-pad),
            max: self.max.add_scalar(pad),
        }
    }

    fn distance_sq(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let excess = (self.min[a] - p[a]).max(p[a] - self.max[a]).max(0.0);
            d += excess * excess;
        }
        d
    }

    /// Parameter at which the ray enters the box (clamped to 0), if it does.
    fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut t_near = 0.0_f64;
        let mut t_far = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let t1 = (self.min[a] - origin[a]) * inv_dir[a];
            let t2 = (self.max[a] - origin[a]) * inv_dir[a];
            t_near = t_near.max(t1.min(t2));
            t_far = t_far.min(t1.max(t2));
        }
        (t_near <= t_far).then_some(t_near)
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: start into `order`. Internal: index of the left child (right = left + 1).
    first: u32,
    /// Number of faces for leaves, 0 for internal nodes.
    count: u32,
}

/// Nearest ray hit: the surface point and the ray parameter (distance for unit rays).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: SurfacePoint,
    pub t: f64,
}

/// Generic directions for crossing-count rays, away from the coordinate axes
/// and planes that constructed meshes tend to align with.
const PROBE_DIRECTIONS: [Vec3; 3] = [
    Vec3::new(0.5773502691896258, 0.5773502691896257, 0.5773502691896259),
    Vec3::new(-0.3141592653589793, 0.8660254037844386, 0.2718281828459045),
    Vec3::new(0.1414213562373095, -0.4142135623730950, 0.8990305263906547),
];

/// Bounding volume hierarchy over the faces of one mesh.
///
/// Owns its mesh; immutable after construction so queries can run concurrently.
#[derive(Debug, Clone)]
pub struct Bvh {
    mesh: TriMesh,
    nodes: Vec<Node>,
    order: Vec<u32>,
    closed: bool,
}

impl Bvh {
    pub fn new(mesh: TriMesh) -> Self {
        let n = mesh.face_count();
        let boxes: Vec<Aabb> = (0..n)
            .map(|f| {
                let mut b = Aabb::empty();
                for v in mesh.triangle(f) {
                    b.grow(&v);
                }
                b
            })
            .collect();
        let root_bounds = boxes.iter().fold(Aabb::empty(), |acc, b| acc.union(b));
        let pad = 1e-9
            * (root_bounds.extent().max()
                + root_bounds.min.abs().max().max(root_bounds.max.abs().max()))
            + 1e-12;
        let centroids: Vec<Vec3> = boxes.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = vec![Node {
            bounds: root_bounds.padded(pad),
            first: 0,
            count: 0,
        }];
        build(&mut nodes, 0, &mut order, 0, n, &boxes, &centroids, pad);
        let closed = mesh.is_closed();
        if !closed {
            log::warn!("BVH built over an open mesh; insideness is best-effort");
        }
        Self {
            mesh,
            nodes,
            order,
            closed,
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn into_mesh(self) -> TriMesh {
        self.mesh
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Bounds of the mesh (padded by a few ulps of its scale).
    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Nearest intersection with `t >= 0`; equal-`t` hits resolve to the lowest face index.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Result<Option<RayHit>> {
        let len = dir.norm();
        if !((len - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::InvalidDirection(len));
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let Some(entry) = node.bounds.ray_entry(origin, &inv, dir) else {
                continue;
            };
            if let Some((bt, _, _)) = best {
                if entry > bt {
                    continue;
                }
            }
            if node.count > 0 {
                let start = node.first as usize;
                for &f in &self.order[start..start + node.count as usize] {
                    let f = f as usize;
                    let tri = self.mesh.triangle(f);
                    if let Some((t, b)) =
                        triangle::intersect_ray(&tri, &self.mesh.face_normals()[f], origin, dir)
                    {
                        let better = match best {
                            None => true,
                            Some((bt, bf, _)) => t < bt || (t == bt && f < bf),
                        };
                        if better {
                            best = Some((t, f, b));
                        }
                    }
                }
            } else {
                stack.push(node.first as usize + 1);
                stack.push(node.first as usize);
            }
        }
        Ok(best.map(|(t, face, barycentric)| RayHit {
            t,
            point: SurfacePoint {
                face,
                barycentric,
                position: interpolate(&self.mesh.triangle(face), &barycentric),
            },
        }))
    }

    /// Generalized winding number: total signed solid angle over 4π.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        (0..self.mesh.face_count())
            .map(|f| triangle::solid_angle(&self.mesh.triangle(f), p))
            .sum::<f64>()
            / (4.0 * std::f64::consts::PI)
    }

    /// Inside test: winding number above one half.
    ///
    /// For closed meshes a point outside the bounding box is outside without
    /// summing solid angles (its winding number is exactly zero).
    /// For closed meshes the winding number is the signed count of crossings
    /// along a ray, found through the hierarchy; rays that touch an edge or
    /// vertex are retried in other directions before falling back to the sum.
    pub fn contains(&self, p: &Vec3) -> bool {
        if self.closed {
            if !self.nodes[0].bounds.contains(p) {
                return false;
            }
            for dir in &PROBE_DIRECTIONS {
                if let Some(w) = self.crossing_winding(p, &dir.normalize()) {
                    return w > 0;
                }
            }
        }
        self.winding_number(p) > 0.5
    }

    fn crossing_winding(&self, origin: &Vec3, dir: &Vec3) -> Option<i64> {
        let inv = dir.map(|d| 1.0 / d);
        let mut winding = 0;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_entry(origin, &inv, dir).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.first as usize;
                for &f in &self.order[start..start + node.count as usize] {
                    let f = f as usize;
                    match triangle::ray_crossing(&self.mesh.triangle(f), origin, dir) {
                        triangle::Crossing::Miss => {}
                        triangle::Crossing::Degenerate => return None,
                        triangle::Crossing::Hit => {
                            let c = dir.dot(&self.mesh.face_normals()[f]);
                            if c.abs() < triangle::GRAZING_COSINE {
                                return None;
                            }
                            winding += if c > 0.0 { 1 } else { -1 };
                        }
                    }
                }
            } else {
                stack.push(node.first as usize + 1);
                stack.push(node.first as usize);
            }
        }
        Some(winding)
    }

    /// Globally nearest surface point; ties go to the lowest face index.
    pub fn closest_point(&self, p: &Vec3) -> SurfacePoint {
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<(usize, [f64; 3], Vec3)> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.distance_sq(p) > best_d2 {
                continue;
            }
            if node.count > 0 {
                let start = node.first as usize;
                for &f in &self.order[start..start + node.count as usize] {
                    let f = f as usize;
                    let tri = self.mesh.triangle(f);
                    let b = triangle::closest_point(&tri, p);
                    let q = interpolate(&tri, &b);
                    let d2 = (q - p).norm_squared();
                    let better = match best {
                        None => true,
                        Some((bf, bb, _)) => d2 < best_d2 || (d2 == best_d2 && (f, b) < (bf, bb)),
                    };
                    if better {
                        best_d2 = d2;
                        best = Some((f, b, q));
                    }
                }
            } else {
                let l = node.first as usize;
                let (dl, dr) = (
                    self.nodes[l].bounds.distance_sq(p),
                    self.nodes[l + 1].bounds.distance_sq(p),
                );
                // Push the farther child first so the nearer one is searched first.
                if dl <= dr {
                    stack.push(l + 1);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(l + 1);
                }
            }
        }
        let (face, barycentric, position) = best.expect("mesh has faces");
        SurfacePoint {
            face,
            barycentric,
            position,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build(
    nodes: &mut Vec<Node>,
    ni: usize,
    order: &mut [u32],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Vec3],
    pad: f64,
) {
    let count = end - start;
    if count <= LEAF_SIZE {
        nodes[ni].first = start as u32;
        nodes[ni].count = count as u32;
        return;
    }
    let mut cbox = Aabb::empty();
    for &f in &order[start..end] {
        cbox.grow(&centroids[f as usize]);
    }
    let axis = cbox.extent().imax();
    let mid = start + count / 2;
    order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = nodes.len();
    for range in [start..mid, mid..end] {
        let bounds = order[range]
            .iter()
            .fold(Aabb::empty(), |acc, &f| acc.union(&boxes[f as usize]));
        nodes.push(Node {
            bounds: bounds.padded(pad),
            first: 0,
            count: 0,
        });
    }
    nodes[ni].first = left as u32;
    nodes[ni].count = 0;
    build(nodes, left, order, start, mid, boxes, centroids, pad);
    build(nodes, left + 1, order, mid, end, boxes, centroids, pad);
}

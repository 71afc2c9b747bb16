//! Per-triangle primitives shared by the BVH and the brute-force scans.

use crate::Vec3;

/// Rays whose direction is this close to parallel with the face plane miss.
pub const GRAZING_COSINE: f64 = 1e-9;

/// Watertight ray/triangle intersection (Woop, Benthin & Wald).
///
/// Returns `(t, barycentric)` for hits with `t >= 0`. Edges shared by two
/// triangles are never missed by both. Grazing rays
/// (`|dir · normal| < GRAZING_COSINE`) are reported as misses.
pub fn intersect_ray(
    tri: &[Vec3; 3],
    normal: &Vec3,
    origin: &Vec3,
    dir: &Vec3,
) -> Option<(f64, [f64; 3])> {
    if dir.dot(normal).abs() < GRAZING_COSINE {
        return None;
    }
    let kz = dir.iamax();
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];

    let a = tri[0] - origin;
    let b = tri[1] - origin;
    let c = tri[2] - origin;
    let ax = a[kx] - sx * a[kz];
    let ay = a[ky] - sy * a[kz];
    let bx = b[kx] - sx * b[kz];
    let by = b[ky] - sy * b[kz];
    let cx = c[kx] - sx * c[kz];
    let cy = c[ky] - sy * c[kz];

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t_scaled = u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz];
    if (det < 0.0 && t_scaled > 0.0) || (det > 0.0 && t_scaled < 0.0) {
        return None;
    }
    let inv = 1.0 / det;
    Some((t_scaled * inv, [u * inv, v * inv, w * inv]))
}

/// Outcome of [`ray_crossing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    Miss,
    /// Proper crossing strictly inside the triangle at `t > 0`.
    Hit,
    /// The ray touches an edge, a vertex or the plane itself, or starts on
    /// the triangle; crossing counts along this ray are unreliable.
    Degenerate,
}

/// Classify how the ray from `origin` along `dir` meets the triangle, using
/// the same projection as [`intersect_ray`] but without any tolerance.
pub fn ray_crossing(tri: &[Vec3; 3], origin: &Vec3, dir: &Vec3) -> Crossing {
    let kz = dir.iamax();
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];
    let a = tri[0] - origin;
    let b = tri[1] - origin;
    let c = tri[2] - origin;
    let ax = a[kx] - sx * a[kz];
    let ay = a[ky] - sy * a[kz];
    let bx = b[kx] - sx * b[kz];
    let by = b[ky] - sy * b[kz];
    let cx = c[kx] - sx * c[kz];
    let cy = c[ky] - sy * c[kz];
    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return Crossing::Miss;
    }
    if u == 0.0 || v == 0.0 || w == 0.0 {
        return Crossing::Degenerate;
    }
    let det = u + v + w;
    let t_scaled = u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz];
    if t_scaled == 0.0 {
        return Crossing::Degenerate;
    }
    if (det < 0.0) == (t_scaled < 0.0) {
        Crossing::Hit
    } else {
        Crossing::Miss
    }
}

/// Closest point on a triangle to `p` as barycentric weights
/// (Voronoi-region walk; vertex and edge regions give exact zeros).
pub fn closest_point(tri: &[Vec3; 3], p: &Vec3) -> [f64; 3] {
    let [a, b, c] = tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Signed solid angle subtended by the triangle at `p`
/// (Van Oosterom–Strackee). Positive when `p` sees the back of the face.
pub fn solid_angle(tri: &[Vec3; 3], p: &Vec3) -> f64 {
    let a = tri[0] - p;
    let b = tri[1] - p;
    let c = tri[2] - p;
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let numer = a.dot(&b.cross(&c));
    let denom = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * numer.atan2(denom)
}

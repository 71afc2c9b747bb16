use rayon::prelude::*;

use super::{Aabb, Bvh};
use crate::{Error, Result, Vec3};

/// Dense boolean grid; voxel `(i, j, k)` has its center at
/// `origin + (i + ½, j + ½, k + ½) · edge`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Vec3,
    pub edge: f64,
    pub dims: [usize; 3],
    cells: Vec<bool>,
}

impl OccupancyGrid {
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[self.index(i, j, k)]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        voxel_center(&self.origin, self.edge, i, j, k)
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn occupied_volume(&self) -> f64 {
        self.occupied_count() as f64 * self.edge.powi(3)
    }

    /// Number of voxels occupied in both grids. Grids must share their layout.
    pub fn overlap_count(&self, other: &OccupancyGrid) -> Result<usize> {
        if self.dims != other.dims || self.origin != other.origin || self.edge != other.edge {
            return Err(Error::ShapeMismatch(
                "occupancy grids differ in layout".into(),
            ));
        }
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| **a && **b)
            .count())
    }

    pub fn bounds(&self) -> Aabb {
        Aabb {
            min: self.origin,
            max: self.origin
                + Vec3::new(
                    self.dims[0] as f64,
                    self.dims[1] as f64,
                    self.dims[2] as f64,
                ) * self.edge,
        }
    }
}

fn voxel_center(origin: &Vec3, edge: f64, i: usize, j: usize, k: usize) -> Vec3 {
    origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * edge
}

/// Solid voxelization: a voxel is occupied iff its center is inside the mesh.
///
/// The grid must cover the mesh bounding box; use [`voxelize_region`] to
/// sample an arbitrary sub-region.
pub fn voxelize_solid(
    bvh: &Bvh,
    voxel_edge: f64,
    grid_origin: Vec3,
    dims: [usize; 3],
) -> Result<OccupancyGrid> {
    check_edge(voxel_edge)?;
    let (lo, hi) = bvh.mesh().bounds();
    let grid = Aabb {
        min: grid_origin,
        max: grid_origin + Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * voxel_edge,
    };
    if !grid.contains_box(&Aabb { min: lo, max: hi }) {
        return Err(Error::GridTooSmall);
    }
    voxelize_region(bvh, voxel_edge, grid_origin, dims)
}

/// Solid voxelization of an arbitrary grid, which need not contain the mesh.
pub fn voxelize_region(
    bvh: &Bvh,
    voxel_edge: f64,
    grid_origin: Vec3,
    dims: [usize; 3],
) -> Result<OccupancyGrid> {
    check_edge(voxel_edge)?;
    let [nx, ny, nz] = dims;
    let cells = (0..nx * ny * nz)
        .into_par_iter()
        .map(|idx| {
            let i = idx % nx;
            let j = (idx / nx) % ny;
            let k = idx / (nx * ny);
            bvh.contains(&voxel_center(&grid_origin, voxel_edge, i, j, k))
        })
        .collect();
    Ok(OccupancyGrid {
        origin: grid_origin,
        edge: voxel_edge,
        dims,
        cells,
    })
}

fn check_edge(edge: f64) -> Result<()> {
    if edge > 0.0 && edge.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "voxel edge must be positive, got {edge}"
        )))
    }
}

/// Voxel count along each axis needed to cover `extent`, ignoring round-off slivers.
pub(crate) fn cover_dims(extent: &Vec3, edge: f64) -> [usize; 3] {
    [0, 1, 2].map(|a| ((extent[a] / edge) - 1e-9).ceil().max(0.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TriMesh;

    fn cube(edge: f64) -> Bvh {
        Bvh::new(TriMesh::cuboid(Vec3::zeros(), Vec3::repeat(edge)).unwrap())
    }

    #[test]
    fn unit_cube_volume() {
        let g = voxelize_solid(&cube(1.0), 0.1, Vec3::repeat(-0.1), [12, 12, 12]).unwrap();
        let vol = g.occupied_volume();
        assert!((vol - 1.0).abs() < 0.05, "{vol}");
        assert_eq!(g.occupied_count(), 1000);
    }

    #[test]
    fn grid_must_cover_mesh() {
        let err = voxelize_solid(&cube(1.0), 0.1, Vec3::repeat(5.0), [4, 4, 4]);
        assert!(matches!(err, Err(Error::GridTooSmall)));
        let err = voxelize_solid(&cube(1.0), 0.1, Vec3::zeros(), [5, 10, 10]);
        assert!(matches!(err, Err(Error::GridTooSmall)));
    }

    #[test]
    fn translated_mesh_leaves_grid_empty() {
        let bvh = cube(1.0);
        let moved = Bvh::new(
            bvh.mesh()
                .transformed(|v| v + Vec3::new(10.0, 0.0, 0.0))
                .unwrap(),
        );
        let g = voxelize_region(&moved, 0.1, Vec3::repeat(-0.1), [12, 12, 12]).unwrap();
        assert_eq!(g.occupied_count(), 0);
    }

    #[test]
    fn volume_error_shrinks_with_resolution() {
        // Cube with non-grid-aligned faces so discretization error is visible.
        let mesh = TriMesh::cuboid(Vec3::repeat(0.13), Vec3::repeat(0.87)).unwrap();
        let exact = mesh.signed_volume();
        let bvh = Bvh::new(mesh);
        let mut prev_err = f64::INFINITY;
        for edge in [0.2, 0.1, 0.05] {
            let dims = cover_dims(&Vec3::repeat(1.0), edge);
            let g = voxelize_solid(&bvh, edge, Vec3::zeros(), dims).unwrap();
            let err = (g.occupied_volume() - exact).abs();
            assert!(err < prev_err, "edge {edge}: {err} vs {prev_err}");
            prev_err = err;
        }
    }

    #[test]
    fn rejects_nonpositive_edge() {
        assert!(voxelize_region(&cube(1.0), 0.0, Vec3::zeros(), [1, 1, 1]).is_err());
    }
}

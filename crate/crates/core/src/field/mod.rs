//! Object-anchored correspondence fields.
//!
//! Every sampled object point `o` with outward normal `n` records whether a ray
//! along `±n` reaches the hand before the object occludes it (`c`), the signed
//! distance to that hit (`d`, negative when `o` is inside the hand) and the
//! canonical template coordinate of the hit (`y`).

mod io;

use std::sync::Arc;

use rayon::prelude::*;

use crate::geometry::{interpolate, sample_surface, Bvh, ObjectPointSet, TriMesh};
use crate::hand::{HandModel, HandSequence};
use crate::{Error, Result, Vec3};

pub use io::{decode_toch, encode_toch, read_toch, write_toch, TOCH_FORMAT_VERSION};

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_POINT_COUNT: usize = 2000;
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.002;

/// One field record. Entries with `c == false` carry `d = 0` and `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEntry {
    pub c: bool,
    pub d: f64,
    pub y: Vec3,
}

impl FieldEntry {
    pub const NULL: FieldEntry = FieldEntry {
        c: false,
        d: 0.0,
        y: Vec3::new(0.0, 0.0, 0.0),
    };
}

/// Field over one object point set for a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TochFrame {
    entries: Vec<FieldEntry>,
    points: Arc<ObjectPointSet>,
}

impl TochFrame {
    /// Null values of inactive entries are enforced here.
    pub fn new(entries: Vec<FieldEntry>, points: Arc<ObjectPointSet>) -> Result<Self> {
        if entries.len() != points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} field entries for {} object points",
                entries.len(),
                points.len()
            )));
        }
        let entries = entries
            .into_iter()
            .map(|e| if e.c { e } else { FieldEntry::NULL })
            .collect();
        Ok(Self { entries, points })
    }

    pub fn entries(&self) -> &[FieldEntry] {
        &self.entries
    }

    pub fn points(&self) -> &Arc<ObjectPointSet> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.entries.iter().filter(|e| e.c).count()
    }
}

/// Fields for consecutive frames over one shared point set.
#[derive(Debug, Clone, PartialEq)]
pub struct TochSequence {
    frames: Vec<TochFrame>,
}

impl TochSequence {
    pub fn new(frames: Vec<TochFrame>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidArgument(
                "a field sequence needs at least one frame".into(),
            ));
        };
        let shared = first.points.clone();
        if frames
            .iter()
            .any(|f| !Arc::ptr_eq(&f.points, &shared) && *f.points != *shared)
        {
            return Err(Error::ShapeMismatch(
                "frames use different point sets".into(),
            ));
        }
        let frames = frames
            .into_iter()
            .map(|f| TochFrame {
                entries: f.entries,
                points: shared.clone(),
            })
            .collect();
        Ok(Self { frames })
    }

    /// Build from per-frame entries over `points`.
    pub fn from_entries(
        entries: Vec<Vec<FieldEntry>>,
        points: Arc<ObjectPointSet>,
    ) -> Result<Self> {
        let frames = entries
            .into_iter()
            .map(|e| TochFrame::new(e, points.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames)
    }

    pub fn frames(&self) -> &[TochFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn points(&self) -> &Arc<ObjectPointSet> {
        &self.frames[0].points
    }

    pub fn point_count(&self) -> usize {
        self.points().len()
    }
}

/// Result of tracing one object point, including the raw hand hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedEntry {
    pub entry: FieldEntry,
    /// Hand intersection point, present whenever `entry.c` is set.
    pub hit: Option<Vec3>,
}

/// Trace all object points against one posed hand.
///
/// `canonical` holds the template vertices that share the hand's face list;
/// the barycentric coordinates of each hand hit are re-applied to them.
pub fn extract_field_traced(
    hand: &Bvh,
    canonical: &[Vec3],
    object: &Bvh,
    points: &ObjectPointSet,
    eps: f64,
) -> Result<Vec<TracedEntry>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidEpsilon(eps));
    }
    if canonical.len() != hand.mesh().vertices().len() {
        return Err(Error::ModelMismatch(format!(
            "{} canonical vertices for a hand mesh with {}",
            canonical.len(),
            hand.mesh().vertices().len()
        )));
    }
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            trace_point(
                hand,
                canonical,
                object,
                &points.points[i],
                &points.normals[i],
                eps,
            )
        })
        .collect()
}

fn trace_point(
    hand: &Bvh,
    canonical: &[Vec3],
    object: &Bvh,
    o: &Vec3,
    n: &Vec3,
    eps: f64,
) -> Result<TracedEntry> {
    let s = if hand.contains(o) { -1.0 } else { 1.0 };
    let dir = n * s;
    let miss = TracedEntry {
        entry: FieldEntry::NULL,
        hit: None,
    };
    let Some(h1) = hand.intersect_ray(o, &dir)? else {
        return Ok(miss);
    };
    let p1 = h1.point.position;
    let dist1 = (o - p1).norm();
    if let Some(h2) = object.intersect_ray(&(o + dir * eps), &dir)? {
        if dist1 >= (o - h2.point.position).norm() {
            return Ok(miss);
        }
    }
    let f = hand.mesh().faces()[h1.point.face];
    let tri = [
        canonical[f[0] as usize],
        canonical[f[1] as usize],
        canonical[f[2] as usize],
    ];
    Ok(TracedEntry {
        entry: FieldEntry {
            c: true,
            d: s * dist1,
            y: interpolate(&tri, &h1.point.barycentric),
        },
        hit: Some(p1),
    })
}

/// Field of one posed hand mesh over an object point set.
pub fn extract_field(
    hand: &Bvh,
    canonical: &[Vec3],
    object: &Bvh,
    points: Arc<ObjectPointSet>,
    eps: f64,
) -> Result<TochFrame> {
    let traced = extract_field_traced(hand, canonical, object, &points, eps)?;
    TochFrame::new(traced.into_iter().map(|t| t.entry).collect(), points)
}

/// A decoded field record: the hand point seen from the object and its
/// canonical correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedPoint {
    /// Index of the originating object point.
    pub index: usize,
    pub position: Vec3,
    pub canonical: Vec3,
}

/// Partial hand point cloud `o + d·n` for every active entry.
pub fn decode_field(frame: &TochFrame) -> Vec<DecodedPoint> {
    frame
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.c)
        .map(|(i, e)| DecodedPoint {
            index: i,
            position: frame.points.points[i] + frame.points.normals[i] * e.d,
            canonical: e.y,
        })
        .collect()
}

/// Points whose correspondence is active and within `tau` of the hand.
pub fn contact_map(frame: &TochFrame, tau: f64) -> Vec<bool> {
    frame
        .entries
        .iter()
        .map(|e| e.c && e.d.abs() <= tau)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub n_points: usize,
    pub seed: u64,
    pub eps: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_POINT_COUNT,
            seed: 0,
            eps: DEFAULT_EPSILON,
        }
    }
}

/// Fields for a list of posed hand meshes (all sharing the template's faces)
/// against one object, sampling the object once.
pub fn extract_sequence(
    hands: &[TriMesh],
    canonical: &[Vec3],
    object: &TriMesh,
    config: &ExtractConfig,
) -> Result<TochSequence> {
    let points = Arc::new(sample_surface(object, config.n_points, config.seed)?);
    extract_sequence_on(
        hands,
        canonical,
        &Bvh::new(object.clone()),
        points,
        config.eps,
    )
}

/// As [`extract_sequence`] with a caller-provided point set.
pub fn extract_sequence_on(
    hands: &[TriMesh],
    canonical: &[Vec3],
    object: &Bvh,
    points: Arc<ObjectPointSet>,
    eps: f64,
) -> Result<TochSequence> {
    if !object.is_closed() {
        log::warn!("object mesh is not closed; insideness falls back to the winding number");
    }
    let frames = hands
        .par_iter()
        .map(|h| extract_field(&Bvh::new(h.clone()), canonical, object, points.clone(), eps))
        .collect::<Result<Vec<_>>>()?;
    TochSequence::new(frames)
}

/// Skin every frame of `seq` and extract its fields.
pub fn extract_hand_sequence(
    model: &HandModel,
    seq: &HandSequence,
    object: &TriMesh,
    config: &ExtractConfig,
) -> Result<TochSequence> {
    let hands = seq.skin_all(model)?;
    extract_sequence(&hands, model.template_vertices(), object, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab(z0: f64, z1: f64) -> TriMesh {
        TriMesh::subdivided_cuboid(Vec3::new(-0.2, -0.2, z0), Vec3::new(0.2, 0.2, z1), 2).unwrap()
    }

    /// Object points on the top face of a unit-ish box, normals +z.
    fn top_points(z: f64) -> Arc<ObjectPointSet> {
        let mut points = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                points.push(Vec3::new(
                    -0.04 + 0.02 * i as f64,
                    -0.04 + 0.02 * j as f64,
                    z,
                ));
            }
        }
        let normals = vec![Vec3::z(); points.len()];
        Arc::new(ObjectPointSet {
            points,
            normals,
            seed: 0,
        })
    }

    fn object_box() -> Bvh {
        Bvh::new(TriMesh::cuboid(Vec3::new(-0.1, -0.1, -0.1), Vec3::zeros()).unwrap())
    }

    #[test]
    fn slab_above_gives_height() {
        let h = 0.013;
        let hand = Bvh::new(slab(h, h + 0.02));
        let canonical = hand.mesh().vertices().to_vec();
        let traced =
            extract_field_traced(&hand, &canonical, &object_box(), &top_points(0.0), 1e-4).unwrap();
        for t in traced {
            assert!(t.entry.c);
            assert!((t.entry.d - h).abs() < 1e-12);
            // Canonical = posed here, so y is the hit itself.
            assert!((t.entry.y - t.hit.unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn hand_behind_object_gives_nothing() {
        let hand = Bvh::new(slab(-0.5, -0.3));
        let canonical = hand.mesh().vertices().to_vec();
        let frame = extract_field(&hand, &canonical, &object_box(), top_points(0.0), 1e-4).unwrap();
        assert_eq!(frame.active_count(), 0);
        assert!(decode_field(&frame).is_empty());
    }

    #[test]
    fn penetrating_points_get_negative_distance() {
        let hand = Bvh::new(slab(-0.005, 0.02));
        let canonical = hand.mesh().vertices().to_vec();
        let frame = extract_field(&hand, &canonical, &object_box(), top_points(0.0), 1e-4).unwrap();
        for e in frame.entries() {
            assert!(e.c);
            assert!((e.d + 0.005).abs() < 1e-12);
        }
        assert!(contact_map(&frame, 0.002).iter().all(|&b| !b));
        assert!(contact_map(&frame, 0.006).iter().all(|&b| b));
    }

    #[test]
    fn invalid_epsilon() {
        let hand = Bvh::new(slab(0.01, 0.02));
        let canonical = hand.mesh().vertices().to_vec();
        for eps in [0.0, -1e-4, f64::NAN] {
            assert!(matches!(
                extract_field(&hand, &canonical, &object_box(), top_points(0.0), eps),
                Err(Error::InvalidEpsilon(_))
            ));
        }
    }

    #[test]
    fn null_entries_are_normalized() {
        let points = top_points(0.0);
        let mut entries = vec![FieldEntry::NULL; points.len()];
        entries[0] = FieldEntry {
            c: false,
            d: 3.0,
            y: Vec3::x(),
        };
        let frame = TochFrame::new(entries, points).unwrap();
        assert_eq!(frame.entries()[0], FieldEntry::NULL);
    }
}

use crate::field::{FieldEntry, TochSequence};
use crate::{Error, Result, Vec3};

/// Temporal smoothing of each point's record over a centered window of
/// `window` frames (clipped at the sequence ends): `c` by majority vote (ties
/// keep the frame's own value), `d` and `y` by the mean over window frames
/// with `c = 1`.
pub fn baseline_smooth(seq: &TochSequence, window: usize) -> Result<TochSequence> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    let half = window / 2;
    let t = seq.len();
    let n = seq.point_count();
    let frames = seq.frames();
    let entries = (0..t)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half).min(t - 1));
            (0..n)
                .map(|p| {
                    let own = frames[i].entries()[p];
                    let mut on = 0usize;
                    let (mut d, mut y) = (0.0, Vec3::zeros());
                    for f in &frames[lo..=hi] {
                        let e = f.entries()[p];
                        if e.c {
                            on += 1;
                            d += (e.d - d) / on as f64;
                            y += (e.y - y) / on as f64;
                        }
                    }
                    let off = hi - lo + 1 - on;
                    let c = match on.cmp(&off) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Less => false,
                        std::cmp::Ordering::Equal => own.c,
                    };
                    if c {
                        FieldEntry { c, d, y }
                    } else {
                        FieldEntry::NULL
                    }
                })
                .collect()
        })
        .collect();
    TochSequence::from_entries(entries, seq.points().clone())
}

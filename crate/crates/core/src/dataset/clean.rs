use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Resolves missing (non-finite) values per feature track.
///
/// Interior gaps are linearly interpolated between the nearest observed
/// frames, leading and trailing gaps take the nearest observed value, and a
/// track with no observation at all becomes zeros.
pub fn clean_sequence(raw: ArrayView2<f32>) -> Result<Array2<f32>> {
    let (t_len, d) = raw.dim();
    if t_len < 2 {
        return Err(Error::TooShort { frames: t_len });
    }
    let mut out = raw.to_owned();
    let mut observed: Vec<usize> = Vec::with_capacity(t_len);
    for col in 0..d {
        observed.clear();
        observed.extend((0..t_len).filter(|&t| raw[[t, col]].is_finite()));
        if observed.len() == t_len {
            continue;
        }
        let (Some(&first), Some(&last)) = (observed.first(), observed.last()) else {
            out.column_mut(col).fill(0.0);
            continue;
        };
        for t in 0..first {
            out[[t, col]] = raw[[first, col]];
        }
        for t in last + 1..t_len {
            out[[t, col]] = raw[[last, col]];
        }
        for pair in observed.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b - a < 2 {
                continue;
            }
            let va = raw[[a, col]] as f64;
            let vb = raw[[b, col]] as f64;
            let span = (b - a) as f64;
            for t in a + 1..b {
                let w = (t - a) as f64 / span;
                out[[t, col]] = (va + (vb - va) * w) as f32;
            }
        }
    }
    Ok(out)
}

/// Subtracts each hand's wrist position from that hand's 21 landmarks.
///
/// Only applies to the two-hand layout (126 features: left then right
/// block, 21 landmarks of x, y, z each, wrist first); other widths are
/// left untouched. Returns whether centering was applied.
pub fn center_on_wrists(frames: &mut Array2<f32>) -> bool {
    const HAND: usize = 63;
    if frames.ncols() != 2 * HAND {
        return false;
    }
    for mut row in frames.rows_mut() {
        for hand in 0..2 {
            let base = hand * HAND;
            let wrist = [row[base], row[base + 1], row[base + 2]];
            for lm in 0..21 {
                for axis in 0..3 {
                    row[base + lm * 3 + axis] -= wrist[axis];
                }
            }
        }
    }
    true
}

use serde::{Deserialize, Serialize};

use super::map::{Channel, ChannelMap};
use crate::error::{Error, Result};

/// Decimation lattice: anchors at `(row_phase + i*s, col_phase + j*s)`.
///
/// Plain degradation uses phase `(0, 0)`; the phase only moves when a
/// degraded map is rotated or flipped as a whole.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    pub scale: usize,
    pub row_phase: usize,
    pub col_phase: usize,
}

impl Lattice {
    pub fn new(scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale factor must be at least 1"));
        }
        Ok(Self {
            scale,
            row_phase: 0,
            col_phase: 0,
        })
    }

    pub fn with_phase(scale: usize, row_phase: usize, col_phase: usize) -> Result<Self> {
        let l = Self::new(scale)?;
        if row_phase >= scale || col_phase >= scale {
            return Err(Error::invalid("lattice phase must be below the scale"));
        }
        Ok(Self {
            row_phase,
            col_phase,
            ..l
        })
    }

    pub fn check_dims(&self, h: usize, w: usize) -> Result<()> {
        if h % self.scale != 0 || w % self.scale != 0 {
            return Err(Error::NotDivisible {
                scale: self.scale,
                h,
                w,
            });
        }
        Ok(())
    }

    pub fn is_anchor(&self, row: usize, col: usize) -> bool {
        row % self.scale == self.row_phase && col % self.scale == self.col_phase
    }

    pub fn anchor_count(&self, h: usize, w: usize) -> usize {
        let along = |n: usize, phase: usize| if phase < n { (n - phase).div_ceil(self.scale) } else { 0 };
        along(h, self.row_phase) * along(w, self.col_phase)
    }
}

/// Interpolation stencil along one axis: the two bracketing anchors (as
/// positions in the full grid) and the fractional weight of the second.
#[derive(Clone, Copy, Debug)]
struct Stencil {
    lo: usize,
    hi: usize,
    frac: f32,
}

fn stencils(n: usize, scale: usize, phase: usize) -> Vec<Stencil> {
    let last = phase + (n - 1 - phase) / scale * scale;
    (0..n)
        .map(|p| {
            if p <= phase {
                Stencil { lo: phase, hi: phase, frac: 0.0 }
            } else if p >= last {
                Stencil { lo: last, hi: last, frac: 0.0 }
            } else {
                let k = (p - phase) / scale;
                let lo = phase + k * scale;
                Stencil {
                    lo,
                    hi: lo + scale,
                    frac: (p - lo) as f32 / scale as f32,
                }
            }
        })
        .collect()
}

fn nearest(st: &Stencil) -> ([usize; 2], usize) {
    if st.frac < 0.5 {
        ([st.lo, st.lo], 1)
    } else if st.frac > 0.5 {
        ([st.hi, st.hi], 1)
    } else {
        ([st.lo, st.hi], 2)
    }
}

/// Low-resolution input kept at full size.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradedMap {
    pub map: ChannelMap,
    pub lattice: Lattice,
}

impl DegradedMap {
    pub fn scale(&self) -> usize {
        self.lattice.scale
    }
}

/// Keeps every `s`-th cell from `(0, 0)` and interpolates back to full size.
pub fn degrade(hr: &ChannelMap, scale: usize) -> Result<DegradedMap> {
    degrade_on(hr, Lattice::new(scale)?)
}

/// Decimates onto `lattice`, then restores the full grid: bilinear for the
/// continuous channels, nearest-anchor for the LOS code so class labels stay
/// in {-1, 0, 1}. Cells outside the outermost anchors take the edge value.
/// Nearest-anchor ties resolve to the largest code among the tied anchors.
pub fn degrade_on(hr: &ChannelMap, lattice: Lattice) -> Result<DegradedMap> {
    let (h, w) = (hr.height(), hr.width());
    lattice.check_dims(h, w)?;
    let rows = stencils(h, lattice.scale, lattice.row_phase);
    let cols = stencils(w, lattice.scale, lattice.col_phase);
    let mut out = ChannelMap::zeros(h, w, hr.meta.clone());

    for ch in Channel::ALL {
        let src = hr.channel(ch);
        let dst = out.channel_mut(ch);
        for (r, sr) in rows.iter().enumerate() {
            for (c, sc) in cols.iter().enumerate() {
                dst[r * w + c] = if ch == Channel::LosClass {
                    let (rr, nr) = nearest(sr);
                    let (cc, nc) = nearest(sc);
                    let mut best = f32::NEG_INFINITY;
                    for &ar in &rr[..nr] {
                        for &ac in &cc[..nc] {
                            best = best.max(src[ar * w + ac]);
                        }
                    }
                    best
                } else {
                    let a00 = src[sr.lo * w + sc.lo];
                    let a01 = src[sr.lo * w + sc.hi];
                    let a10 = src[sr.hi * w + sc.lo];
                    let a11 = src[sr.hi * w + sc.hi];
                    let top = (1.0 - sc.frac) * a00 + sc.frac * a01;
                    let bottom = (1.0 - sc.frac) * a10 + sc.frac * a11;
                    (1.0 - sr.frac) * top + sr.frac * bottom
                };
            }
        }
    }
    Ok(DegradedMap { map: out, lattice })
}

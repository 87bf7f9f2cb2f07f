//! Deterministic, spatially correlated noise fields.
//!
//! Values are a function of `(seed, salt, row, col)` only, so any single cell
//! can be evaluated without rendering a whole field.

/// Empirical gain that brings the two-octave sum to roughly unit variance.
const FIELD_GAIN: f64 = 1.28;

const OCTAVES: [(f64, f64, f64); 2] = [
    // (lattice spacing in cells, weight, lattice offset)
    (6.3, 0.85, 0.37),
    (2.7, 0.53, 1.71),
];

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn hash4(seed: u64, salt: u64, a: i64, b: i64) -> u64 {
    let mut h = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    h = splitmix64(h ^ salt.wrapping_mul(0xE703_7ED1_A0B4_28DB));
    h = splitmix64(h ^ (a as u64).wrapping_mul(0x8EBC_6AF0_9C88_C6E3));
    splitmix64(h ^ (b as u64).wrapping_mul(0x5893_6494_0B2F_1A7D))
}

fn unit_open(bits: u64) -> f64 {
    // 53 random bits mapped into (0, 1)
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Standard normal draw keyed by a lattice point (Box-Muller).
pub(crate) fn lattice_gaussian(seed: u64, salt: u64, a: i64, b: i64) -> f64 {
    let h = hash4(seed, salt, a, b);
    let u1 = unit_open(h);
    let u2 = unit_open(splitmix64(h));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn value_noise(seed: u64, salt: u64, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let (fy, fx) = (fade(y - y0), fade(x - x0));
    let (iy, ix) = (y0 as i64, x0 as i64);
    let v00 = lattice_gaussian(seed, salt, iy, ix);
    let v01 = lattice_gaussian(seed, salt, iy, ix + 1);
    let v10 = lattice_gaussian(seed, salt, iy + 1, ix);
    let v11 = lattice_gaussian(seed, salt, iy + 1, ix + 1);
    let top = v00 + (v01 - v00) * fx;
    let bottom = v10 + (v11 - v10) * fx;
    top + (bottom - top) * fy
}

/// Smooth, approximately zero-mean unit-variance field value at a cell.
pub fn smooth_field(seed: u64, salt: u64, row: usize, col: usize) -> f64 {
    let mut acc = 0.0;
    for (octave, &(spacing, weight, offset)) in OCTAVES.iter().enumerate() {
        let y = row as f64 / spacing + offset;
        let x = col as f64 / spacing + offset * 0.5;
        acc += weight * value_noise(seed, salt.wrapping_add(octave as u64 * 7919), y, x);
    }
    acc * FIELD_GAIN
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_is_deterministic_and_roughly_standardized() {
        let mut sum = 0.0;
        let mut sq = 0.0;
        let n = 160 * 160;
        for r in 0..160 {
            for c in 0..160 {
                let v = smooth_field(11, 3, r, c);
                assert_eq!(v, smooth_field(11, 3, r, c));
                sum += v;
                sq += v * v;
            }
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.3, "mean {mean}");
        assert!((std - 1.0).abs() < 0.25, "std {std}");
    }

    #[test]
    fn neighbouring_cells_are_correlated() {
        let mut num = 0.0;
        let mut den = 0.0;
        for r in 0..100 {
            for c in 0..99 {
                let a = smooth_field(5, 1, r, c);
                let b = smooth_field(5, 1, r, c + 1);
                num += a * b;
                den += a * a;
            }
        }
        assert!(num / den > 0.6, "lag-1 correlation {}", num / den);
    }

    #[test]
    fn salts_decorrelate_fields() {
        let differs = (0..50).any(|i| smooth_field(1, 1, i, i) != smooth_field(1, 2, i, i));
        assert!(differs);
    }
}

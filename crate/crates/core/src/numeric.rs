//! Quadrature, one-dimensional minimization and root bracketing.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Absolute tolerance used for every "exact" integral in the crate.
pub const QUAD_ABS_TOL: f64 = 1e-10;

/// Gaussian envelopes are truncated this many standard deviations from the mean.
pub const GAUSSIAN_SPAN: f64 = 12.0;

const MAX_SEGMENTS: usize = 4000;

// 15-point Kronrod nodes on [0, 1] with the embedded 7-point Gauss rule.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

fn checked(segment: Segment, abs_tol: f64) -> Result<Segment> {
    if segment.value.is_finite() && segment.error.is_finite() {
        Ok(segment)
    } else {
        Err(Error::NumericFailure {
            achieved: f64::INFINITY,
            requested: abs_tol,
        })
    }
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature over a finite range.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, abs_tol).map(|v| -v);
    }
    let first = checked(kronrod(&f, a, b), abs_tol)?;
    let mut total = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::from([first]);
    while error > abs_tol {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::NumericFailure {
                achieved: error,
                requested: abs_tol,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            return Err(Error::NumericFailure {
                achieved: error,
                requested: abs_tol,
            });
        }
        let left = checked(kronrod(&f, worst.a, mid), abs_tol)?;
        let right = checked(kronrod(&f, mid, worst.b), abs_tol)?;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if error <= abs_tol {
            // recompute from scratch to shed accumulated rounding
            error = heap.iter().map(|s| s.error).sum();
            total = heap.iter().map(|s| s.value).sum();
        }
    }
    Ok(total)
}

/// Result of a golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[a, b]`, stopping once the bracket is narrower
/// than `x_tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> Minimum {
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > x_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        Minimum { x: c, value: fc }
    } else {
        Minimum { x: d, value: fd }
    }
}

/// Bisection for an increasing function crossing zero inside `[lo, hi]`.
/// Stops when the bracket is below `x_tol` or the residual below `f_tol`.
pub fn bisect_increasing<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
) -> Result<f64> {
    let f_lo = f(lo)?;
    if f_lo >= 0.0 {
        return Ok(lo);
    }
    let f_hi = f(hi)?;
    if f_hi <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v.abs() <= f_tol || (hi - lo) <= x_tol {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

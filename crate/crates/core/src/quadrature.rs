//! Adaptive Gauss–Kronrod (7/15) quadrature for scalar and vector-valued
//! integrands on finite intervals.
//!
//! Vector integrands share one subdivision tree, so a density and all of its
//! parameter derivatives are integrated on identical nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

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

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances shared by every integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Probability mass that may be discarded in each tail when a
    /// semi-infinite range is truncated.
    pub tail_cutoff: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            tail_cutoff: 1e-12,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.tail_cutoff > 0.0
            && self.tail_cutoff < 1.0
            && self.max_subdivisions >= 10;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid quadrature configuration {self:?}")))
        }
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
}

/// Integrates a scalar function over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    let (values, errors) = integrate_vec(1, |x, out| out[0] = f(x), a, b, cfg)?;
    Ok(Estimate {
        value: values[0],
        abs_error: errors[0],
    })
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    l1: Vec<f64>,
}

/// Integrates a `dim`-valued function over `[a, b]`; `f(x, out)` fills `out`.
///
/// Returns the integral and per-component error estimates. Every component
/// must satisfy `err ≤ max(abs_tol, rel_tol·|I|)`, or be at the roundoff
/// limit set by `∫|f|` (components that cancel to nearly zero).
pub fn integrate_vec<F>(
    dim: usize,
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration limits must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok((vec![0.0; dim], vec![0.0; dim]));
    }
    if b < a {
        let (v, e) = integrate_vec(dim, f, b, a, cfg)?;
        return Ok((v.into_iter().map(|x| -x).collect(), e));
    }

    let mut scratch = Scratch::new(dim);
    let first = gk15(&mut f, a, b, &mut scratch);
    let mut total = first.value.clone();
    let mut total_err = first.error.clone();
    let mut total_l1 = first.l1.clone();
    let mut segments = vec![first];

    loop {
        let worst = worst_ratio(&total, &total_l1, &total_err, cfg);
        if worst <= 1.0 {
            break;
        }
        if segments.len() >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                context: format!("[{a}, {b}] after {} subdivisions", segments.len()),
                estimate: total[0],
                abs_error: total_err.iter().cloned().fold(0.0, f64::max),
            });
        }
        // Bisect the segment contributing most to the normalised error.
        let (idx, _) = segments
            .iter()
            .enumerate()
            .map(|(i, s)| (i, segment_weight(s, &total, &total_l1, cfg)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let seg = segments.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further in floating point.
            segments.push(seg);
            break;
        }
        let left = gk15(&mut f, seg.a, mid, &mut scratch);
        let right = gk15(&mut f, mid, seg.b, &mut scratch);
        for j in 0..dim {
            total[j] += left.value[j] + right.value[j] - seg.value[j];
            total_err[j] += left.error[j] + right.error[j] - seg.error[j];
            total_l1[j] += left.l1[j] + right.l1[j] - seg.l1[j];
        }
        segments.push(left);
        segments.push(right);
    }

    // Re-sum to shed accumulated update roundoff.
    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    for s in &segments {
        for j in 0..dim {
            value[j] += s.value[j];
            error[j] += s.error[j];
        }
    }
    Ok((value, error))
}

fn tolerance(total: f64, l1: f64, cfg: &QuadratureConfig) -> f64 {
    cfg.abs_tol
        .max(cfg.rel_tol * total.abs())
        .max(1e3 * f64::EPSILON * l1)
}

fn worst_ratio(total: &[f64], l1: &[f64], err: &[f64], cfg: &QuadratureConfig) -> f64 {
    (0..total.len())
        .map(|j| err[j] / tolerance(total[j], l1[j], cfg))
        .fold(0.0, f64::max)
}

fn segment_weight(s: &Segment, total: &[f64], l1: &[f64], cfg: &QuadratureConfig) -> f64 {
    (0..total.len())
        .map(|j| s.error[j] / tolerance(total[j], l1[j], cfg))
        .fold(0.0, f64::max)
}

struct Scratch {
    buf: Vec<f64>,
    fv: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            buf: vec![0.0; dim],
            fv: vec![0.0; 15 * dim],
        }
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64, scratch: &mut Scratch) -> Segment
where
    F: FnMut(f64, &mut [f64]),
{
    let dim = scratch.buf.len();
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    // fv layout: node index n in 0..15 → rows [n*dim, (n+1)*dim).
    // 0..7 left nodes, 7 centre, 8..15 right nodes.
    for n in 0..15 {
        let x = if n < 7 {
            center - half * XGK[n]
        } else if n == 7 {
            center
        } else {
            center + half * XGK[14 - n]
        };
        f(x, &mut scratch.buf);
        scratch.fv[n * dim..(n + 1) * dim].copy_from_slice(&scratch.buf);
    }

    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    let mut l1 = vec![0.0; dim];
    for j in 0..dim {
        let at = |n: usize| scratch.fv[n * dim + j];
        let fc = at(7);
        let mut kron = WGK[7] * fc;
        let mut gauss = WG[3] * fc;
        let mut res_abs = (WGK[7] * fc).abs();
        for i in 0..7 {
            let pair = at(i) + at(14 - i);
            kron += WGK[i] * pair;
            res_abs += WGK[i] * (at(i).abs() + at(14 - i).abs());
            if i % 2 == 1 {
                gauss += WG[i / 2] * pair;
            }
        }
        let mean = 0.5 * kron;
        let mut res_asc = WGK[7] * (fc - mean).abs();
        for i in 0..7 {
            res_asc += WGK[i] * ((at(i) - mean).abs() + (at(14 - i) - mean).abs());
        }
        let k = kron * half;
        let g = gauss * half;
        value[j] = k;
        l1[j] = res_abs * half.abs();
        error[j] = rescale_error((k - g).abs(), l1[j], res_asc * half.abs());
    }
    Segment { a, b, value, error, l1 }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err;
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

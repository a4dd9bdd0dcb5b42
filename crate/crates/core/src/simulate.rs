//! Seeded samplers for the four population scales.
//!
//! Every sampler draws from one `ChaCha8Rng` stream seeded from the `SimSpec`, so
//! a spec and its seed always give the same lengths. Tree-scale and uncut draws
//! thin core-scale draws; observed draws cut them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densities::{Component, ModelParams};
use crate::error::{Error, Result};
use crate::geometry::CoreGeometry;
use crate::scales::Scale;

/// What to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub scale: Scale,
    pub params: ModelParams,
    pub geom: CoreGeometry,
    pub n: usize,
    pub seed: u64,
}

const MIN_PROPOSALS: u64 = 10_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("sample size must be at least 1".into()));
        }
        if self.scale == Scale::V && !matches!(self.params, ModelParams::Single(_)) {
            return Err(Error::Domain(
                "uncut (v) samples take single fiber-component parameters".into(),
            ));
        }
        Ok(())
    }
}

fn draw_component<R: Rng>(c: &Component, rng: &mut R) -> f64 {
    let y = match *c {
        Component::Ggd(p) => {
            let g: f64 = Gamma::new(p.k, 1.0).expect("positive shape").sample(rng);
            p.b * g.powf(1.0 / p.d)
        }
        Component::Logn(p) => {
            let z: f64 = StandardNormal.sample(rng);
            (p.mu + p.sigma * z).exp()
        }
    };
    y.max(f64::MIN_POSITIVE)
}

fn draw_y<R: Rng>(params: &ModelParams, rng: &mut R) -> f64 {
    match params {
        ModelParams::Single(c) => draw_component(c, rng),
        ModelParams::Mixture(m) => {
            if rng.random::<f64>() < m.eps {
                draw_component(&m.fines, rng)
            } else {
                draw_component(&m.fibers, rng)
            }
        }
    }
}

/// Core-scale lengths.
pub fn sample_y(spec: &SimSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.n).map(|_| draw_y(&spec.params, &mut rng)).collect())
}

fn thinned<F>(spec: &SimSpec, accept: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n);
    let mut proposals: u64 = 0;
    while out.len() < spec.n {
        let y = draw_y(&spec.params, &mut rng);
        proposals += 1;
        if rng.random::<f64>() < accept(y) {
            out.push(y);
        }
        if proposals >= MIN_PROPOSALS {
            let rate = out.len() as f64 / proposals as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance { rate });
            }
        }
    }
    Ok(out)
}

/// Tree-scale lengths: core-scale draws kept with probability `πr/(πr + 2y)`.
pub fn sample_w(spec: &SimSpec) -> Result<Vec<f64>> {
    let pr = std::f64::consts::PI * spec.geom.radius();
    thinned(spec, |y| pr / (pr + 2.0 * y))
}

/// Uncut lengths: core-scale draws kept with probability `p_UC(y)`.
pub fn sample_v(spec: &SimSpec) -> Result<Vec<f64>> {
    let g = spec.geom;
    thinned(spec, move |y| g.prob_uncut_unchecked(y))
}

/// Observed lengths: each core-scale draw is seen whole with probability
/// `p_UC(y)`, otherwise as a cut piece drawn from the normalized cut kernel.
pub fn sample_x(spec: &SimSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let g = spec.geom;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let y = draw_y(&spec.params, &mut rng);
        let u: f64 = rng.random();
        let p_uc = g.prob_uncut_unchecked(y);
        if u < p_uc {
            out.push(y);
        } else {
            let v: f64 = rng.random();
            out.push(invert_cut(&g, y, v));
        }
    }
    Ok(out)
}

/// Solves `∫₀ˣ k(s|y) ds = v · (1 − p_UC(y))` by bisection.
fn invert_cut(g: &CoreGeometry, y: f64, v: f64) -> f64 {
    let top = y.min(g.diameter());
    let target = v * g.cut_mass(y);
    let (mut lo, mut hi) = (0.0, top);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g.cut_kernel_cdf(mid, y) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    x.clamp(f64::MIN_POSITIVE, top * (1.0 - f64::EPSILON))
}

/// Dispatches on the spec's scale.
pub fn sample(spec: &SimSpec) -> Result<Vec<f64>> {
    match spec.scale {
        Scale::Y => sample_y(spec),
        Scale::W => sample_w(spec),
        Scale::V => sample_v(spec),
        Scale::X => sample_x(spec),
    }
}

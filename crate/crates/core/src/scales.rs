//! Densities on the four population scales, W-scale moments and the tree
//! composition of a mixture.
//!
//! * `Y`: true lengths of cells touching the core (the fitted model).
//! * `W`: true lengths in the standing tree, `f_W ∝ f_Y / (πr + 2w)`.
//! * `X`: lengths observed in the core after cutting, support `(0, 2r)`.
//! * `V`: lengths of uncut cells, `f_V ∝ f_Y · p_UC`.
//!
//! All integrals over `Y` run in `u = ln y`, truncated where the neglected
//! tail mass falls below [`QuadratureConfig::tail_cutoff`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{jet_len, mix, Component, DerivOrder, MixtureParams, ModelParams, Prepared};
use crate::error::{Error, Result};
use crate::geometry::CoreGeometry;
use crate::quadrature::{integrate_vec, QuadratureConfig};

/// Population scale of a length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    W,
    Y,
    X,
    V,
}

impl Scale {
    pub const ALL: [Scale; 4] = [Scale::W, Scale::Y, Scale::X, Scale::V];

    pub fn label(self) -> &'static str {
        match self {
            Scale::W => "w",
            Scale::Y => "y",
            Scale::X => "x",
            Scale::V => "v",
        }
    }

    /// Whether the support is bounded by the core diameter.
    pub fn is_censored(self) -> bool {
        matches!(self, Scale::X | Scale::V)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "w" => Ok(Scale::W),
            "y" => Ok(Scale::Y),
            "x" => Ok(Scale::X),
            "v" => Ok(Scale::V),
            _ => Err(Error::Domain(format!("unknown scale '{s}', expected w, y, x or v"))),
        }
    }
}

/// Which part of a mixture a density refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Fines,
    Fibers,
    Mixture,
}

impl Part {
    pub fn label(self) -> &'static str {
        match self {
            Part::Fines => "fines",
            Part::Fibers => "fibers",
            Part::Mixture => "mixture",
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Part {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fines" => Ok(Part::Fines),
            "fibers" => Ok(Part::Fibers),
            "mixture" => Ok(Part::Mixture),
            _ => Err(Error::Domain(format!(
                "unknown component '{s}', expected fines, fibers or mixture"
            ))),
        }
    }
}

fn support_bounds(c: &Component, cfg: &QuadratureConfig, tilt: f64) -> (f64, f64) {
    let (lo, _) = c.log_bounds(cfg.tail_cutoff, 0.0);
    let (_, hi) = c.log_bounds(cfg.tail_cutoff, tilt);
    (lo, hi)
}

/// `J_m = ∫ (y − c)ᵐ f_Y(y) / (πr + 2y) dy` for `m = 0..=max_m`, each as a
/// jet in the component's optimizer coordinates. A shift `c` near the mean
/// keeps central moments free of cancellation.
pub(crate) fn w_integrals(
    c: &Component,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    max_m: usize,
    order: DerivOrder,
    shift: f64,
) -> Result<Vec<Vec<f64>>> {
    let prep = Prepared::new(c);
    let jl = jet_len(prep.dim(), order);
    let (lo, hi) = support_bounds(c, cfg, max_m as f64);
    let pr = std::f64::consts::PI * geom.radius();
    let dim = jl * (max_m + 1);
    let (vals, _) = integrate_vec(
        dim,
        |u, out| {
            let y = u.exp();
            let (base, rest) = out.split_at_mut(jl);
            prep.jet(u, order, -(pr + 2.0 * y).ln(), base);
            let mut pw = 1.0;
            for m in 1..=max_m {
                pw *= y - shift;
                for j in 0..jl {
                    rest[(m - 1) * jl + j] = base[j] * pw;
                }
            }
        },
        lo,
        hi,
        cfg,
    )
    .map_err(|e| context(e, "W-scale moment integral"))?;
    Ok(vals.chunks(jl).map(|c| c.to_vec()).collect())
}

/// `k_θ = ∫₀^{2r} f_Y p_UC dy` as a jet.
pub(crate) fn uncut_mass(
    c: &Component,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    order: DerivOrder,
) -> Result<Vec<f64>> {
    let prep = Prepared::new(c);
    let jl = jet_len(prep.dim(), order);
    let (lo, hi) = support_bounds(c, cfg, 0.0);
    let top = geom.diameter().ln().min(hi);
    if lo >= top {
        return Ok(vec![0.0; jl]);
    }
    let (vals, _) = integrate_vec(
        jl,
        |u, out| {
            let p = geom.prob_uncut_unchecked(u.exp());
            prep.jet(u, order, p.ln(), out);
        },
        lo,
        top,
        cfg,
    )
    .map_err(|e| context(e, "uncut mass integral"))?;
    Ok(vals)
}

/// Jets of the component's observed-length density `f_X` at each of the
/// ascending points `xs ⊂ (0, 2r)`.
///
/// `f_X(x) = p_UC(x) f_Y(x) + [(8r² − 3x²) T₀(x) + x T₁(x)] / √(4r² − x²)`
/// with `T_m(x) = ∫_x^∞ yᵐ f_Y(y) / t(y) dy`. The tail integrals are built
/// by integrating between consecutive points and accumulating downward.
pub(crate) fn x_jets(
    c: &Component,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    xs: &[f64],
    order: DerivOrder,
) -> Result<Vec<Vec<f64>>> {
    debug_assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    let prep = Prepared::new(c);
    let jl = jet_len(prep.dim(), order);
    let (lo, hi) = support_bounds(c, cfg, 1.0);
    let n = xs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let r = geom.radius();
    let pr2 = std::f64::consts::PI * r * r;
    let cuts: Vec<f64> = xs.iter().map(|x| x.ln().clamp(lo, hi)).collect();
    let span = hi - lo;

    let segment = |i: usize| -> Result<Vec<f64>> {
        let a = cuts[i];
        let b = if i + 1 < n { cuts[i + 1] } else { hi };
        if b <= a {
            return Ok(vec![0.0; 2 * jl]);
        }
        let seg_cfg = QuadratureConfig {
            abs_tol: cfg.abs_tol * ((b - a) / span).max(1e-4),
            ..*cfg
        };
        integrate_vec(
            2 * jl,
            |u, out| {
                let y = u.exp();
                let ln_t = (pr2 + 2.0 * r * y).ln();
                let (t0, t1) = out.split_at_mut(jl);
                prep.jet(u, order, -ln_t, t0);
                for j in 0..jl {
                    t1[j] = t0[j] * y;
                }
            },
            a,
            b,
            &seg_cfg,
        )
        .map(|(v, _)| v)
        .map_err(|e| context(e, &format!("cut-length tail integral above x = {}", xs[i])))
    };

    let segments: Vec<Vec<f64>> = if n >= 64 {
        (0..n).into_par_iter().map(segment).collect::<Result<_>>()?
    } else {
        (0..n).map(segment).collect::<Result<_>>()?
    };

    let mut tails = vec![vec![0.0; 2 * jl]; n];
    let mut acc = vec![0.0; 2 * jl];
    for i in (0..n).rev() {
        for (a, s) in acc.iter_mut().zip(&segments[i]) {
            *a += s;
        }
        tails[i].copy_from_slice(&acc);
    }

    let mut out = Vec::with_capacity(n);
    let mut direct = vec![0.0; jl];
    for (i, &x) in xs.iter().enumerate() {
        let u = x.ln();
        let p_uc = geom.prob_uncut_unchecked(x);
        prep.jet(u, order, p_uc.ln() - u, &mut direct);
        let a = geom.kernel_offset(x);
        let s = geom.kernel_scale(x);
        let (t0, t1) = tails[i].split_at(jl);
        let jet: Vec<f64> = (0..jl)
            .map(|j| direct[j] + (a * t0[j] + x * t1[j]) * s)
            .collect();
        out.push(jet);
    }
    Ok(out)
}

fn context(e: Error, what: &str) -> Error {
    match e {
        Error::Quadrature {
            context,
            estimate,
            abs_error,
        } => Error::Quadrature {
            context: format!("{what}: {context}"),
            estimate,
            abs_error,
        },
        other => other,
    }
}

fn check_open_support(x: f64, geom: &CoreGeometry, what: &str) -> Result<()> {
    if x > 0.0 && x < geom.diameter() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} is supported on (0, {}), got {x}",
            geom.diameter()
        )))
    }
}

fn check_nonneg(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("length must be non-negative and finite, got {x}")))
    }
}

/// `E(W)` of one component: the expected length in the standing tree.
pub fn mean_w_component(c: &Component, geom: &CoreGeometry, cfg: &QuadratureConfig) -> Result<f64> {
    moment_w(1, c, geom, cfg)
}

/// `E(Wᵐ)` of one component for `m ∈ {1, 2, 3, 4}`.
pub fn moment_w(m: usize, c: &Component, geom: &CoreGeometry, cfg: &QuadratureConfig) -> Result<f64> {
    if !(1..=4).contains(&m) {
        return Err(Error::Domain(format!("moment order must be 1 to 4, got {m}")));
    }
    let j = w_integrals(c, geom, cfg, m, DerivOrder::Value, 0.0)?;
    Ok(j[m][0] / j[0][0])
}

/// Tree-scale density `f_W(w) = (πr + 2E(W)) f_Y(w) / (πr + 2w)`.
pub fn density_w_component(
    w: f64,
    c: &Component,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_nonneg(w)?;
    let j0 = w_integrals(c, geom, cfg, 0, DerivOrder::Value, 0.0)?[0][0];
    Ok(w_from_y(c.pdf(w), w, j0, geom))
}

fn w_from_y(fy: f64, w: f64, j0: f64, geom: &CoreGeometry) -> f64 {
    if fy == 0.0 {
        0.0
    } else {
        fy / ((std::f64::consts::PI * geom.radius() + 2.0 * w) * j0)
    }
}

/// Density of uncut lengths `f_V(v) = f_Y(v) p_UC(v) / k_θ` on `(0, 2r)`.
pub fn density_v(v: f64, c: &Component, geom: &CoreGeometry, cfg: &QuadratureConfig) -> Result<f64> {
    check_open_support(v, geom, "the uncut-length density")?;
    let k = uncut_mass(c, geom, cfg, DerivOrder::Value)?[0];
    v_from_y(c.pdf(v), v, k, geom)
}

fn v_from_y(fy: f64, v: f64, k: f64, geom: &CoreGeometry) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(
            "component has no mass below the core diameter; uncut density undefined".into(),
        ));
    }
    Ok(fy * geom.prob_uncut_unchecked(v) / k)
}

/// Observed-length density of one component on `(0, 2r)`.
pub fn density_x_component(
    x: f64,
    c: &Component,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_open_support(x, geom, "the observed-length density")?;
    Ok(x_jets(c, geom, cfg, &[x], DerivOrder::Value)?[0][0])
}

/// Core-scale mixture density `ε f_fines + (1 − ε) f_fibers`.
pub fn density_y_mixture(y: f64, m: &MixtureParams) -> Result<f64> {
    check_nonneg(y)?;
    Ok(m.pdf_y(y))
}

/// Observed-length mixture density `ε f_X,fines + (1 − ε) f_X,fibers`.
pub fn density_x_mixture(
    x: f64,
    m: &MixtureParams,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_open_support(x, geom, "the observed-length density")?;
    let a = if m.eps > 0.0 { density_x_component(x, &m.fines, geom, cfg)? } else { 0.0 };
    let b = if m.eps < 1.0 { density_x_component(x, &m.fibers, geom, cfg)? } else { 0.0 };
    Ok(mix(m.eps, a, b))
}

/// Tree-scale mixture density `ε̃ f_W,fines + (1 − ε̃) f_W,fibers`.
pub fn density_w_mixture(
    w: f64,
    m: &MixtureParams,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_nonneg(w)?;
    let t = tree_composition(m, geom, cfg)?;
    let a = if t.eps_tilde > 0.0 { density_w_component(w, &m.fines, geom, cfg)? } else { 0.0 };
    let b = if t.eps_tilde < 1.0 { density_w_component(w, &m.fibers, geom, cfg)? } else { 0.0 };
    Ok(mix(t.eps_tilde, a, b))
}

/// Fines proportion and mean cell length in the standing tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeComposition {
    pub eps_tilde: f64,
    pub mean_w: f64,
    pub mean_w_fines: f64,
    pub mean_w_fibers: f64,
}

/// `E(W) = [2μ_f μ_b + επr μ_f + (1−ε)πr μ_b] / [2(ε μ_b + (1−ε) μ_f) + πr]`
/// and `ε̃ = ε (πr + 2E(W)) / (πr + 2μ_f)`.
pub fn tree_composition(
    m: &MixtureParams,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<TreeComposition> {
    let mf = mean_w_component(&m.fines, geom, cfg)?;
    let mb = mean_w_component(&m.fibers, geom, cfg)?;
    Ok(compose(m.eps, mf, mb, geom.radius()))
}

pub(crate) fn compose(eps: f64, mf: f64, mb: f64, r: f64) -> TreeComposition {
    let pr = std::f64::consts::PI * r;
    let den = 2.0 * (eps * mb + (1.0 - eps) * mf) + pr;
    let num = 2.0 * mf * mb + eps * pr * mf + (1.0 - eps) * pr * mb;
    let mean_w = num / den;
    let eps_tilde = (eps * (pr + 2.0 * mean_w) / (pr + 2.0 * mf)).clamp(0.0, 1.0);
    TreeComposition {
        eps_tilde,
        mean_w,
        mean_w_fines: mf,
        mean_w_fibers: mb,
    }
}

#[derive(Debug, Clone, Copy)]
enum Target {
    One(Component),
    Mix(MixtureParams),
}

/// A density on one scale, with its normalizing constants computed once so
/// that many evaluation points are cheap.
#[derive(Debug, Clone)]
pub struct ScaleDensity {
    scale: Scale,
    part: Part,
    target: Target,
    geom: CoreGeometry,
    cfg: QuadratureConfig,
    // Per component (fines, fibers): J₀ on W, k_θ on V.
    norm: [f64; 2],
    eps_tilde: f64,
}

impl ScaleDensity {
    /// Validates the scale/part/parameter combination and precomputes
    /// normalizers. The uncut scale `V` exists only for fibers; a
    /// single-component parameter set can be requested as either part but
    /// not as a mixture.
    pub fn new(
        scale: Scale,
        part: Part,
        params: &ModelParams,
        geom: CoreGeometry,
        cfg: QuadratureConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if scale == Scale::V && part != Part::Fibers {
            return Err(Error::Domain(format!(
                "the uncut scale v is defined for fibers only, not {part}"
            )));
        }
        let target = match (params, part) {
            (ModelParams::Single(c), Part::Fines | Part::Fibers) => Target::One(*c),
            (ModelParams::Single(_), Part::Mixture) => {
                return Err(Error::Domain(
                    "a mixture density needs mixture parameters (eps first)".into(),
                ))
            }
            (ModelParams::Mixture(m), Part::Fines) => Target::One(m.fines),
            (ModelParams::Mixture(m), Part::Fibers) => Target::One(m.fibers),
            (ModelParams::Mixture(m), Part::Mixture) => Target::Mix(*m),
        };
        let mut me = Self {
            scale,
            part,
            target,
            geom,
            cfg,
            norm: [f64::NAN; 2],
            eps_tilde: f64::NAN,
        };
        let comps = me.components();
        for (slot, c) in comps.iter().enumerate() {
            if let Some(c) = c {
                me.norm[slot] = match scale {
                    Scale::W => w_integrals(c, &geom, &cfg, 0, DerivOrder::Value, 0.0)?[0][0],
                    Scale::V => uncut_mass(c, &geom, &cfg, DerivOrder::Value)?[0],
                    _ => f64::NAN,
                };
            }
        }
        if scale == Scale::V && !(me.norm[1] > 0.0) {
            return Err(Error::Domain(
                "component has no mass below the core diameter; uncut density undefined".into(),
            ));
        }
        if let (Scale::W, Target::Mix(m)) = (scale, target) {
            // 1/(πr + 2μ) = J₀, so ε̃ = ε J₀,f / (ε J₀,f + (1−ε) J₀,b).
            let (a, b) = (m.eps * me.norm[0], (1.0 - m.eps) * me.norm[1]);
            me.eps_tilde = if m.eps == 0.0 { 0.0 } else if m.eps == 1.0 { 1.0 } else { a / (a + b) };
        }
        Ok(me)
    }

    fn components(&self) -> [Option<Component>; 2] {
        match self.target {
            Target::One(c) => {
                if self.part == Part::Fines {
                    [Some(c), None]
                } else {
                    [None, Some(c)]
                }
            }
            Target::Mix(m) => [
                (m.eps > 0.0).then_some(m.fines),
                (m.eps < 1.0).then_some(m.fibers),
            ],
        }
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn part(&self) -> Part {
        self.part
    }

    /// Support of the density: `(0, 2r)` or `[0, ∞)`.
    pub fn support(&self) -> (f64, f64) {
        if self.scale.is_censored() {
            (0.0, self.geom.diameter())
        } else {
            (0.0, f64::INFINITY)
        }
    }

    /// A length beyond which the density is negligible, for plotting ranges.
    pub fn plot_upper(&self) -> f64 {
        if self.scale.is_censored() {
            return self.geom.diameter();
        }
        self.components()
            .iter()
            .flatten()
            .map(|c| c.log_bounds(1e-4, 0.0).1.exp())
            .fold(0.0, f64::max)
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.scale.is_censored() {
            check_open_support(x, &self.geom, "this density")
        } else {
            check_nonneg(x)
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.eval_many(&[x])?[0])
    }

    /// Evaluates at many points; observed-scale densities share one pass of
    /// tail integrals across all points.
    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        for &x in xs {
            self.check(x)?;
        }
        let comps = self.components();
        let mut per = [vec![0.0; xs.len()], vec![0.0; xs.len()]];
        for slot in 0..2 {
            let Some(c) = comps[slot] else { continue };
            per[slot] = match self.scale {
                Scale::Y => xs.iter().map(|&y| c.pdf(y)).collect(),
                Scale::W => xs
                    .iter()
                    .map(|&w| w_from_y(c.pdf(w), w, self.norm[slot], &self.geom))
                    .collect(),
                Scale::V => xs
                    .iter()
                    .map(|&v| v_from_y(c.pdf(v), v, self.norm[slot], &self.geom))
                    .collect::<Result<_>>()?,
                Scale::X => {
                    let mut idx: Vec<usize> = (0..xs.len()).collect();
                    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
                    let sorted: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
                    let jets = x_jets(&c, &self.geom, &self.cfg, &sorted, DerivOrder::Value)?;
                    let mut v = vec![0.0; xs.len()];
                    for (k, &i) in idx.iter().enumerate() {
                        v[i] = jets[k][0];
                    }
                    v
                }
            };
        }
        Ok(match self.target {
            Target::One(_) => {
                let slot = if self.part == Part::Fines { 0 } else { 1 };
                std::mem::take(&mut per[slot])
            }
            Target::Mix(m) => {
                let w = if self.scale == Scale::W { self.eps_tilde } else { m.eps };
                per[0].iter().zip(&per[1]).map(|(a, b)| mix(w, *a, *b)).collect()
            }
        })
    }
}

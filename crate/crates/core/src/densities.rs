//! Generalized gamma and lognormal densities of the core population `Y`,
//! the optimizer-scale parameterization, and derivatives with respect to it.
//!
//! Optimizer-scale coordinates: a generalized gamma component `(b, d, k)` is
//! carried as `(log b, log d, log k)`, a lognormal `(μ, σ)` as `(μ, log σ)`,
//! and the fines proportion `ε` as `logit ε`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};

const LN_SQRT_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Distribution family of both mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "ggamma")]
    GeneralizedGamma,
    #[serde(rename = "lognorm")]
    Lognormal,
}

impl Family {
    /// Number of parameters of one component.
    pub fn component_dim(self) -> usize {
        match self {
            Family::GeneralizedGamma => 3,
            Family::Lognormal => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::GeneralizedGamma => "ggamma",
            Family::Lognormal => "lognorm",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::GeneralizedGamma => "Generalized gamma",
            Family::Lognormal => "Log normal",
        })
    }
}

/// Generalized gamma parameters: scale `b` and shapes `d`, `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgdParams {
    pub b: f64,
    pub d: f64,
    pub k: f64,
}

impl GgdParams {
    pub fn new(b: f64, d: f64, k: f64) -> Result<Self> {
        for (name, v) in [("b", b), ("d", d), ("k", k)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!(
                    "generalized gamma parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { b, d, k })
    }
}

/// Lognormal parameters: mean `mu` and standard deviation `sigma` of `log Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LognParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!(
                "lognormal parameters need finite mu and positive sigma, got ({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }
}

/// One component (fines or fibers) of the core length distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Ggd(GgdParams),
    Logn(LognParams),
}

/// Which derivatives to compute alongside a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DerivOrder {
    Value,
    Gradient,
    Hessian,
}

/// `ln f_Y` and its first and second derivatives in the optimizer-scale
/// component coordinates. Only the leading `dim` entries are meaningful.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogDerivs {
    pub ln_f: f64,
    pub score: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

impl Component {
    pub fn family(&self) -> Family {
        match self {
            Component::Ggd(_) => Family::GeneralizedGamma,
            Component::Logn(_) => Family::Lognormal,
        }
    }

    pub fn dim(&self) -> usize {
        self.family().component_dim()
    }

    /// Original-scale parameters in print order.
    pub fn original(&self) -> Vec<f64> {
        match *self {
            Component::Ggd(p) => vec![p.b, p.d, p.k],
            Component::Logn(p) => vec![p.mu, p.sigma],
        }
    }

    pub fn from_original(family: Family, values: &[f64]) -> Result<Self> {
        match (family, values) {
            (Family::GeneralizedGamma, &[b, d, k]) => Ok(Component::Ggd(GgdParams::new(b, d, k)?)),
            (Family::Lognormal, &[mu, sigma]) => Ok(Component::Logn(LognParams::new(mu, sigma)?)),
            _ => Err(Error::Domain(format!(
                "{} component needs {} parameters, got {}",
                family.label(),
                family.component_dim(),
                values.len()
            ))),
        }
    }

    /// Optimizer-scale coordinates of this component.
    pub fn theta(&self) -> Vec<f64> {
        match *self {
            Component::Ggd(p) => vec![p.b.ln(), p.d.ln(), p.k.ln()],
            Component::Logn(p) => vec![p.mu, p.sigma.ln()],
        }
    }

    pub fn from_theta(family: Family, theta: &[f64]) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain(format!("non-finite optimizer coordinates {theta:?}")));
        }
        match (family, theta) {
            (Family::GeneralizedGamma, &[lb, ld, lk]) => {
                Ok(Component::Ggd(GgdParams::new(lb.exp(), ld.exp(), lk.exp())?))
            }
            (Family::Lognormal, &[mu, ls]) => Ok(Component::Logn(LognParams::new(mu, ls.exp())?)),
            _ => Err(Error::Domain(format!(
                "{} component needs {} coordinates, got {}",
                family.label(),
                family.component_dim(),
                theta.len()
            ))),
        }
    }

    /// `∂θ̃/∂θ` for this component's coordinates.
    pub fn chain_factors(&self) -> Vec<f64> {
        match *self {
            Component::Ggd(p) => vec![p.b, p.d, p.k],
            Component::Logn(p) => vec![1.0, p.sigma],
        }
    }

    /// Density `f_Y(y)`. Zero for `y < 0`.
    pub fn pdf(&self, y: f64) -> f64 {
        if y > 0.0 {
            self.ln_pdf_log(y.ln()).exp() / y
        } else if y == 0.0 {
            match *self {
                Component::Ggd(p) => {
                    let dk = p.d * p.k;
                    if dk > 1.0 {
                        0.0
                    } else if dk == 1.0 {
                        p.d / (p.b * ln_gamma_unchecked(p.k).exp())
                    } else {
                        f64::INFINITY
                    }
                }
                Component::Logn(_) => 0.0,
            }
        } else {
            0.0
        }
    }

    /// `ln f_Y(y)` for `y > 0`.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        if y > 0.0 {
            let u = y.ln();
            self.ln_pdf_log(u) - u
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Log density of `log Y` at `u`, i.e. `ln(f_Y(eᵘ)·eᵘ)`. Never overflows
    /// for finite `u`, which is why integrals over `Y` run in `u`.
    pub(crate) fn ln_pdf_log(&self, u: f64) -> f64 {
        match *self {
            Component::Ggd(p) => {
                let s = p.d * (u - p.b.ln());
                p.d.ln() + p.k * s - s.exp() - ln_gamma_unchecked(p.k)
            }
            Component::Logn(p) => {
                let z = (u - p.mu) / p.sigma;
                -p.sigma.ln() - LN_SQRT_TWO_PI - 0.5 * z * z
            }
        }
    }

    /// Derivatives of `ln f_Y` at `y = eᵘ` in optimizer coordinates.
    #[cfg(test)]
    pub(crate) fn log_derivs(&self, u: f64, order: DerivOrder) -> LogDerivs {
        Prepared::new(self).log_derivs(u, order)
    }

    /// Truncation range `(u_lo, u_hi)` in `u = ln y` outside of which each
    /// tail of the `yᵐ`-tilted density carries less than `tail` relative mass.
    pub(crate) fn log_bounds(&self, tail: f64, tilt: f64) -> (f64, f64) {
        let ln_tail = tail.ln() - 2.0;
        match *self {
            Component::Ggd(p) => {
                // s = d(u - ln b); the tilted density of s is Gamma(k')-log shaped.
                let kp = p.k + tilt / p.d;
                let lg1 = ln_gamma_unchecked(kp + 1.0);
                let lg = ln_gamma_unchecked(kp);
                let s_mode = kp.ln();
                let s_lo = ((ln_tail + lg1) / kp).min(s_mode - 1.0);
                let mut s_hi = s_mode.max(0.0) + 1.0;
                loop {
                    let es = s_hi.exp();
                    let ln_mass = kp * s_hi - es - lg - (es - kp).ln();
                    if ln_mass < ln_tail || s_hi > 800.0 {
                        break;
                    }
                    s_hi += 0.5;
                }
                let lb = p.b.ln();
                (lb + s_lo / p.d, lb + s_hi / p.d)
            }
            Component::Logn(p) => {
                let z = (-2.0 * ln_tail).sqrt();
                let centre = p.mu + tilt * p.sigma * p.sigma;
                (p.mu - z * p.sigma, centre + z * p.sigma)
            }
        }
    }
}

/// A component with its gamma-function constants evaluated once, for use
/// inside quadrature loops.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Prepared {
    pub comp: Component,
    ln_norm: f64,
    ln_b: f64,
    psi: f64,
    psi1: f64,
}

impl Prepared {
    pub fn new(comp: &Component) -> Self {
        match *comp {
            Component::Ggd(p) => Self {
                comp: *comp,
                ln_norm: p.d.ln() - ln_gamma_unchecked(p.k),
                ln_b: p.b.ln(),
                psi: digamma_unchecked(p.k),
                psi1: trigamma_unchecked(p.k),
            },
            Component::Logn(p) => Self {
                comp: *comp,
                ln_norm: -p.sigma.ln() - LN_SQRT_TWO_PI,
                ln_b: 0.0,
                psi: 0.0,
                psi1: 0.0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.comp.dim()
    }

    /// `ln(f_Y(eᵘ)·eᵘ)`.
    #[inline]
    pub fn ln_h(&self, u: f64) -> f64 {
        match self.comp {
            Component::Ggd(p) => {
                let s = p.d * (u - self.ln_b);
                self.ln_norm + p.k * s - s.exp()
            }
            Component::Logn(p) => {
                let z = (u - p.mu) / p.sigma;
                self.ln_norm - 0.5 * z * z
            }
        }
    }

    pub fn log_derivs(&self, u: f64, order: DerivOrder) -> LogDerivs {
        let mut out = LogDerivs {
            ln_f: self.ln_h(u) - u,
            score: [0.0; 3],
            hess: [[0.0; 3]; 3],
        };
        if order == DerivOrder::Value {
            return out;
        }
        match self.comp {
            Component::Ggd(p) => {
                let (d, k) = (p.d, p.k);
                let ln_c1 = d * (u - self.ln_b);
                let c1 = ln_c1.exp();
                let c2 = 1.0 + (k - c1) * ln_c1;
                let c3 = ln_c1 - self.psi;
                out.score = [d * (c1 - k), c2, k * c3];
                if order == DerivOrder::Hessian {
                    let bb = -d * d * c1;
                    let bd = d * (c1 - k) + d * c1 * ln_c1;
                    let bk = -d * k;
                    let dd = (k - c1) * ln_c1 - c1 * ln_c1 * ln_c1;
                    let dk = k * ln_c1;
                    let kk = k * c3 - k * k * self.psi1;
                    out.hess = [[bb, bd, bk], [bd, dd, dk], [bk, dk, kk]];
                }
            }
            Component::Logn(p) => {
                let s = p.sigma;
                let z = (u - p.mu) / s;
                out.score = [z / s, z * z - 1.0, 0.0];
                if order == DerivOrder::Hessian {
                    let mm = -1.0 / (s * s);
                    let mt = -2.0 * z / s;
                    let tt = -2.0 * z * z;
                    out.hess = [[mm, mt, 0.0], [mt, tt, 0.0], [0.0, 0.0, 0.0]];
                }
            }
        }
        out
    }

    /// Fills `out` with `w·h(u)` followed, depending on `order`, by its
    /// θ-gradient and row-major θ-Hessian, where `h(u) = f_Y(eᵘ)eᵘ`.
    /// `ln_w` is the log of a positive weight.
    #[inline]
    pub fn jet(&self, u: f64, order: DerivOrder, ln_w: f64, out: &mut [f64]) {
        let p = self.dim();
        let ln_v = self.ln_h(u) + ln_w;
        if !(ln_v > -745.0) {
            out.fill(0.0);
            return;
        }
        let v = ln_v.exp();
        out[0] = v;
        if order == DerivOrder::Value {
            return;
        }
        let ld = self.log_derivs(u, order);
        for i in 0..p {
            out[1 + i] = v * ld.score[i];
        }
        if order == DerivOrder::Hessian {
            for i in 0..p {
                for j in 0..p {
                    out[1 + p + i * p + j] = v * (ld.score[i] * ld.score[j] + ld.hess[i][j]);
                }
            }
        }
    }
}

/// Length of a value/gradient/Hessian jet for a `p`-parameter component.
pub(crate) fn jet_len(p: usize, order: DerivOrder) -> usize {
    match order {
        DerivOrder::Value => 1,
        DerivOrder::Gradient => 1 + p,
        DerivOrder::Hessian => 1 + p + p * p,
    }
}

/// Generalized gamma density `d b^{-dk} y^{dk-1} exp(-(y/b)^d) / Γ(k)`.
pub fn ggd_pdf(y: f64, p: &GgdParams) -> Result<f64> {
    check_nonneg(y)?;
    Ok(Component::Ggd(*p).pdf(y))
}

/// Lognormal density.
pub fn logn_pdf(y: f64, p: &LognParams) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("lognormal density needs y > 0, got {y}")));
    }
    Ok(Component::Logn(*p).pdf(y))
}

/// `∂f_Y/∂(log b, log d, log k)`.
pub fn ggd_grad_theta(y: f64, p: &GgdParams) -> Result<[f64; 3]> {
    check_positive(y)?;
    let f = ggd_pdf(y, p)?;
    let ln_c1 = p.d * (y / p.b).ln();
    let c1 = ln_c1.exp();
    let c2 = 1.0 + (p.k - c1) * ln_c1;
    let c3 = ln_c1 - digamma_unchecked(p.k);
    Ok([f * p.d * (c1 - p.k), f * c2, f * p.k * c3])
}

/// Second derivatives of the generalized gamma density in `(log b, log d, log k)`.
pub fn ggd_hess_theta(y: f64, p: &GgdParams) -> Result<[[f64; 3]; 3]> {
    check_positive(y)?;
    let f = ggd_pdf(y, p)?;
    let (d, k) = (p.d, p.k);
    let ln_c1 = d * (y / p.b).ln();
    let c1 = ln_c1.exp();
    let c2 = 1.0 + (k - c1) * ln_c1;
    let psi = digamma_unchecked(k);
    let c3 = ln_c1 - psi;

    let bb = f * d * d * ((c1 - k).powi(2) - c1);
    let bd = f
        * d
        * (-c1 * (c1 - k) * ln_c1 + c1 * ln_c1 + k * (c1 - k) * ln_c1 + 2.0 * (c1 - k));
    let bk = f * k * d * ((c1 - k) * ln_c1 - psi * (c1 - k) - 1.0);
    let dd = f * (2.0 * c2 - 1.0 + ln_c1 * (k * c2 - c1 * ln_c1 - c1 * c2));
    let dk = f * k * (c2 * ln_c1 - c2 * psi + ln_c1);
    let kk = f * k * (k * c3 * ln_c1 - k * c3 * psi + c3 - k * trigamma_unchecked(k));
    Ok([[bb, bd, bk], [bd, dd, dk], [bk, dk, kk]])
}

/// `∂f_Y/∂(μ, log σ)` for the lognormal density.
pub fn logn_grad_theta(y: f64, p: &LognParams) -> Result<[f64; 2]> {
    let f = logn_pdf(y, p)?;
    let z = (y.ln() - p.mu) / p.sigma;
    Ok([f * z / p.sigma, f * (z * z - 1.0)])
}

/// Second derivatives of the lognormal density in `(μ, log σ)`.
pub fn logn_hess_theta(y: f64, p: &LognParams) -> Result<[[f64; 2]; 2]> {
    let f = logn_pdf(y, p)?;
    let s2 = p.sigma * p.sigma;
    let dev = y.ln() - p.mu;
    let [d_mu, d_th] = logn_grad_theta(y, p)?;
    let mm = dev / s2 * d_mu - f / s2;
    let tt = (dev * dev / s2 - 3.0) * d_th - 2.0 * f;
    let mt = dev / s2 * d_th - 2.0 * d_mu;
    Ok([[mm, mt], [mt, tt]])
}

fn check_nonneg(y: f64) -> Result<()> {
    if y >= 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("length must be non-negative and finite, got {y}")))
    }
}

fn check_positive(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("length must be positive and finite, got {y}")))
    }
}

/// Two-component mixture on the core scale: `ε f_fines + (1 - ε) f_fibers`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub eps: f64,
    pub fines: Component,
    pub fibers: Component,
}

impl MixtureParams {
    pub fn new(eps: f64, fines: Component, fibers: Component) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Domain(format!("mixture proportion must lie in [0, 1], got {eps}")));
        }
        if fines.family() != fibers.family() {
            return Err(Error::Domain("fines and fibers must share a family".into()));
        }
        Ok(Self { eps, fines, fibers })
    }

    pub fn family(&self) -> Family {
        self.fines.family()
    }

    /// Mixture density on the core scale.
    pub fn pdf_y(&self, y: f64) -> f64 {
        mix(self.eps, self.fines.pdf(y), self.fibers.pdf(y))
    }
}

/// `ε a + (1 - ε) b`, exact at the endpoints even when one side is infinite.
pub(crate) fn mix(eps: f64, a: f64, b: f64) -> f64 {
    if eps == 0.0 {
        b
    } else if eps == 1.0 {
        a
    } else {
        eps * a + (1.0 - eps) * b
    }
}

/// Whether a parameter vector describes a two-component mixture or a single
/// (fiber) component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "mixture")]
    Mixture,
    #[serde(rename = "single")]
    Single,
}

/// Decoded original-scale parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Mixture(MixtureParams),
    Single(Component),
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::Mixture(m) => m.family(),
            ModelParams::Single(c) => c.family(),
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            ModelParams::Mixture(_) => Layout::Mixture,
            ModelParams::Single(_) => Layout::Single,
        }
    }

    /// Original-scale values in print order: `(ε, fines…, fibers…)` or the
    /// single component's parameters.
    pub fn original(&self) -> Vec<f64> {
        match self {
            ModelParams::Mixture(m) => {
                let mut v = vec![m.eps];
                v.extend(m.fines.original());
                v.extend(m.fibers.original());
                v
            }
            ModelParams::Single(c) => c.original(),
        }
    }

    pub fn from_original(family: Family, layout: Layout, values: &[f64]) -> Result<Self> {
        let p = family.component_dim();
        match layout {
            Layout::Single => Ok(ModelParams::Single(Component::from_original(family, values)?)),
            Layout::Mixture => {
                if values.len() != 1 + 2 * p {
                    return Err(Error::Domain(format!(
                        "{} mixture needs {} parameters, got {}",
                        family.label(),
                        1 + 2 * p,
                        values.len()
                    )));
                }
                Ok(ModelParams::Mixture(MixtureParams::new(
                    values[0],
                    Component::from_original(family, &values[1..1 + p])?,
                    Component::from_original(family, &values[1 + p..])?,
                )?))
            }
        }
    }

    /// Parameter labels matching [`ModelParams::original`].
    pub fn labels(family: Family, layout: Layout) -> Vec<String> {
        let comp: &[&str] = match family {
            Family::GeneralizedGamma => &["b", "d", "k"],
            Family::Lognormal => &["mu", "sig"],
        };
        match layout {
            Layout::Single => comp.iter().map(|n| format!("{n}_fibers")).collect(),
            Layout::Mixture => {
                let mut v = vec!["eps".to_string()];
                v.extend(comp.iter().map(|n| format!("{n}_fines")));
                v.extend(comp.iter().map(|n| format!("{n}_fibers")));
                v
            }
        }
    }
}

/// Optimizer-scale parameter vector with a per-coordinate fixed mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub family: Family,
    pub layout: Layout,
    pub values: Vec<f64>,
    pub fixed: Vec<bool>,
}

impl ParamVector {
    pub fn new(family: Family, layout: Layout, values: Vec<f64>) -> Result<Self> {
        let expected = Self::expected_len(family, layout);
        if values.len() != expected {
            return Err(Error::Domain(format!(
                "expected {expected} optimizer coordinates, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite optimizer coordinates {values:?}")));
        }
        let fixed = vec![false; values.len()];
        Ok(Self {
            family,
            layout,
            values,
            fixed,
        })
    }

    pub fn expected_len(family: Family, layout: Layout) -> usize {
        match layout {
            Layout::Single => family.component_dim(),
            Layout::Mixture => 1 + 2 * family.component_dim(),
        }
    }

    pub fn with_fixed(mut self, fixed: Vec<bool>) -> Result<Self> {
        if fixed.len() != self.values.len() {
            return Err(Error::Domain(format!(
                "fixed mask has {} entries for {} parameters",
                fixed.len(),
                self.values.len()
            )));
        }
        self.fixed = fixed;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Encodes original-scale parameters. The mixture proportion must lie
    /// strictly inside (0, 1).
    pub fn encode(params: &ModelParams) -> Result<Self> {
        match params {
            ModelParams::Single(c) => Self::new(c.family(), Layout::Single, c.theta()),
            ModelParams::Mixture(m) => {
                if !(m.eps > 0.0 && m.eps < 1.0) {
                    return Err(Error::Domain(format!(
                        "mixture proportion {} is on the boundary and has no logit; \
                         fit with that coordinate fixed instead",
                        m.eps
                    )));
                }
                let mut v = vec![(m.eps / (1.0 - m.eps)).ln()];
                v.extend(m.fines.theta());
                v.extend(m.fibers.theta());
                Self::new(m.family(), Layout::Mixture, v)
            }
        }
    }

    pub fn decode(&self) -> Result<ModelParams> {
        let p = self.family.component_dim();
        match self.layout {
            Layout::Single => Ok(ModelParams::Single(Component::from_theta(self.family, &self.values)?)),
            Layout::Mixture => Ok(ModelParams::Mixture(MixtureParams {
                eps: logistic(self.values[0]),
                fines: Component::from_theta(self.family, &self.values[1..1 + p])?,
                fibers: Component::from_theta(self.family, &self.values[1 + p..])?,
            })),
        }
    }

    pub fn decode_mixture(&self) -> Result<MixtureParams> {
        match self.decode()? {
            ModelParams::Mixture(m) => Ok(m),
            ModelParams::Single(_) => Err(Error::Domain("expected mixture parameters".into())),
        }
    }

    pub fn decode_component(&self) -> Result<Component> {
        match self.decode()? {
            ModelParams::Single(c) => Ok(c),
            ModelParams::Mixture(_) => Err(Error::Domain("expected single-component parameters".into())),
        }
    }

    /// `∂θ̃/∂θ` evaluated at these coordinates, the diagonal of the delta-method map.
    pub fn chain_factors(&self) -> Result<Vec<f64>> {
        Ok(match self.decode()? {
            ModelParams::Single(c) => c.chain_factors(),
            ModelParams::Mixture(m) => {
                let mut v = vec![m.eps - m.eps * m.eps];
                v.extend(m.fines.chain_factors());
                v.extend(m.fibers.chain_factors());
                v
            }
        })
    }

    /// Default generalized gamma mixture start
    /// `(0, log .01, log .1, log 10, log 2, log 2, log 2)`.
    pub fn default_ggd_start() -> Self {
        let v = vec![
            0.0,
            0.01f64.ln(),
            0.1f64.ln(),
            10f64.ln(),
            2f64.ln(),
            2f64.ln(),
            2f64.ln(),
        ];
        Self::new(Family::GeneralizedGamma, Layout::Mixture, v).expect("static start is valid")
    }
}

pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean of `Y` for a component, used for start heuristics and plot ranges.
pub(crate) fn mean_y(c: &Component) -> f64 {
    match *c {
        Component::Ggd(p) => {
            p.b * (ln_gamma_unchecked(p.k + 1.0 / p.d) - ln_gamma_unchecked(p.k)).exp()
        }
        Component::Logn(p) => (p.mu + 0.5 * p.sigma * p.sigma).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ggd(b: f64, d: f64, k: f64) -> GgdParams {
        GgdParams::new(b, d, k).unwrap()
    }

    #[test]
    fn golden_ggd_values() {
        let p = ggd(1.8, 2.7, 2.6);
        assert!((ggd_pdf(2.5, &p).unwrap() - 0.668_918_699_6).abs() < 1e-9);
        assert!((ggd_pdf(5.0, &p).unwrap() - 0.000_069_296_9).abs() < 1e-9);
        assert_eq!(ggd_pdf(0.0, &p).unwrap(), 0.0);
        assert!(ggd_pdf(-1.0, &p).is_err());
    }

    #[test]
    fn golden_logn_values() {
        let p = LognParams::new(-2.0, 0.5).unwrap();
        assert!((logn_pdf(0.1, &p).unwrap() - 6.643_761).abs() < 1e-6);
        assert!((logn_pdf(0.45, &p).unwrap() - 0.098_820_40).abs() < 1e-6);
        let at_median = logn_pdf((-2f64).exp(), &p).unwrap();
        let expected = 1.0 / ((-2f64).exp() * 0.5 * (2.0 * PI).sqrt());
        assert_relative_eq!(at_median, expected, max_relative = 1e-14);
        assert!(logn_pdf(0.0, &p).is_err());
    }

    #[test]
    fn small_scale_does_not_overflow() {
        // b^{-dk} alone would overflow for b = 1e-3, dk ≈ 50
        let p = ggd(1e-3, 5.0, 10.0);
        let f = ggd_pdf(1.5e-3, &p).unwrap();
        assert!(f.is_finite() && f > 0.0);
    }

    #[test]
    fn encode_decode_examples() {
        let pv = ParamVector::new(Family::GeneralizedGamma, Layout::Mixture, vec![0.0; 7]).unwrap();
        assert_relative_eq!(pv.decode_mixture().unwrap().eps, 0.5);
        let c = Component::Ggd(ggd(2.0, 2.0, 2.0));
        let pv = ParamVector::encode(&ModelParams::Single(c)).unwrap();
        for v in &pv.values {
            assert_relative_eq!(*v, 2f64.ln());
        }
    }

    #[test]
    fn encode_rejects_boundary_eps() {
        let c = Component::Ggd(ggd(2.0, 2.0, 2.0));
        for eps in [0.0, 1.0] {
            let m = MixtureParams::new(eps, c, c).unwrap();
            let err = ParamVector::encode(&ModelParams::Mixture(m)).unwrap_err();
            assert!(err.to_string().contains("fixed"));
        }
    }

    #[test]
    fn default_start_decodes() {
        let m = ParamVector::default_ggd_start().decode_mixture().unwrap();
        assert_relative_eq!(m.eps, 0.5);
        assert_eq!(m.fines.original().len(), 3);
        let f = m.fines.original();
        let b = m.fibers.original();
        for (got, want) in f.iter().chain(&b).zip([0.01, 0.1, 10.0, 2.0, 2.0, 2.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn gradient_zero_points() {
        let p = LognParams::new(0.3, 0.7).unwrap();
        assert!(logn_grad_theta(0.3f64.exp(), &p).unwrap()[0].abs() < 1e-15);
        // (y/b)^d = k
        let g = ggd(1.7, 2.2, 1.9);
        let y = g.b * g.k.powf(1.0 / g.d);
        assert!(ggd_grad_theta(y, &g).unwrap()[0].abs() < 1e-14);
        let h = logn_hess_theta(0.3f64.exp(), &p).unwrap();
        let f = logn_pdf(0.3f64.exp(), &p).unwrap();
        assert_relative_eq!(h[0][0], -f / (0.7 * 0.7), max_relative = 1e-14);
    }

    fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut up = x.to_vec();
                let mut dn = x.to_vec();
                up[i] += h;
                dn[i] -= h;
                (f(&up) - f(&dn)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn ggd_derivatives_match_finite_differences() {
        let y = 1.3;
        let theta = [2f64.ln(), 2f64.ln(), 2f64.ln()];
        let pdf = |t: &[f64]| ggd_pdf(y, &ggd(t[0].exp(), t[1].exp(), t[2].exp())).unwrap();
        let p = ggd(2.0, 2.0, 2.0);
        let g = ggd_grad_theta(y, &p).unwrap();
        let fd = fd_grad(pdf, &theta, 1e-6);
        for i in 0..3 {
            assert_relative_eq!(g[i], fd[i], max_relative = 1e-6);
        }
        let h = ggd_hess_theta(y, &p).unwrap();
        for i in 0..3 {
            let gi = |t: &[f64]| ggd_grad_theta(y, &ggd(t[0].exp(), t[1].exp(), t[2].exp())).unwrap()[i];
            let fd = fd_grad(gi, &theta, 1e-5);
            for j in 0..3 {
                assert_relative_eq!(h[i][j], fd[j], max_relative = 1e-5);
                assert_eq!(h[i][j], h[j][i]);
            }
        }
    }

    #[test]
    fn log_derivs_agree_with_density_derivatives() {
        let p = ggd(1.4, 0.8, 3.1);
        let c = Component::Ggd(p);
        for &y in &[0.05, 0.9, 3.0, 7.5] {
            let ld = c.log_derivs(f64::ln(y), DerivOrder::Hessian);
            let f = ld.ln_f.exp();
            assert_relative_eq!(f, ggd_pdf(y, &p).unwrap(), max_relative = 1e-12);
            let g = ggd_grad_theta(y, &p).unwrap();
            let h = ggd_hess_theta(y, &p).unwrap();
            for i in 0..3 {
                assert_relative_eq!(f * ld.score[i], g[i], max_relative = 1e-10, epsilon = 1e-300);
                for j in 0..3 {
                    let via_log = f * (ld.score[i] * ld.score[j] + ld.hess[i][j]);
                    assert_relative_eq!(via_log, h[i][j], max_relative = 1e-9, epsilon = 1e-14);
                }
            }
        }
        let lp = LognParams::new(-0.4, 0.6).unwrap();
        let c = Component::Logn(lp);
        for &y in &[0.2, 0.7, 2.0] {
            let ld = c.log_derivs(f64::ln(y), DerivOrder::Hessian);
            let f = ld.ln_f.exp();
            let g = logn_grad_theta(y, &lp).unwrap();
            let h = logn_hess_theta(y, &lp).unwrap();
            for i in 0..2 {
                assert_relative_eq!(f * ld.score[i], g[i], max_relative = 1e-12, epsilon = 1e-15);
                for j in 0..2 {
                    let via_log = f * (ld.score[i] * ld.score[j] + ld.hess[i][j]);
                    assert_relative_eq!(via_log, h[i][j], max_relative = 1e-12, epsilon = 1e-14);
                }
            }
        }
    }
}

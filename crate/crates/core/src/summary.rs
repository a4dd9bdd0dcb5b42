//! Tree-scale (W) summary statistics of fitted components and the fines
//! proportion in the tree, with delta-method standard errors.

use serde::{Deserialize, Serialize};

use crate::densities::{mean_y, Component, DerivOrder, Layout, ModelParams, ParamVector};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::geometry::CoreGeometry;
use crate::likelihood::DataType;
use crate::optimize::Convergence;
use crate::quadrature::QuadratureConfig;
use crate::scales::{compose, w_integrals, TreeComposition};

/// A statistic and its standard error, when a covariance is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub value: f64,
    pub se: Option<f64>,
}

/// W-scale mean, standard deviation, skewness and kurtosis of a component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub mean: Stat,
    pub sd: Stat,
    pub skewness: Stat,
    pub kurtosis: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub fines: Option<ComponentSummary>,
    pub fibers: ComponentSummary,
    /// Proportion of fines in the standing tree.
    pub eps_tilde: Option<Stat>,
    /// Expected cell length in the standing tree, both components together.
    pub mean_w_overall: Option<Stat>,
    pub loglik: Option<f64>,
    pub n: Option<usize>,
    pub convergence: Option<Convergence>,
}

/// Plug-in statistics of one component and their gradients with respect to
/// the component's optimizer coordinates, in the order mean, sd, skewness,
/// kurtosis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMoments {
    pub values: [f64; 4],
    pub gradients: Option<[Vec<f64>; 4]>,
}

fn tight(cfg: &QuadratureConfig) -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: cfg.abs_tol.min(1e-15),
        rel_tol: cfg.rel_tol.min(1e-12),
        tail_cutoff: cfg.tail_cutoff.min(1e-15),
        max_subdivisions: cfg.max_subdivisions.max(1000),
    }
}

/// Shifted W-scale integrals, tightened where the integrand allows it.
fn moment_jets(c: &Component, geom: &CoreGeometry, cfg: &QuadratureConfig, order: DerivOrder, shift: f64) -> Result<Vec<Vec<f64>>> {
    w_integrals(c, geom, &tight(cfg), 4, order, shift).or_else(|_| w_integrals(c, geom, cfg, 4, order, shift))
}

/// W-scale mean, sd, skewness and kurtosis. Central moments come from
/// moments about the core-scale mean, which avoids the cancellation of
/// raw-moment expansions.
pub fn component_moments(
    c: &Component,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    with_gradient: bool,
) -> Result<ComponentMoments> {
    let order = if with_gradient { DerivOrder::Gradient } else { DerivOrder::Value };
    let shift = mean_y(c);
    let j = moment_jets(c, geom, cfg, order, shift)?;
    let p = c.dim();
    let j0 = j[0][0];
    if !(j0 > 0.0) {
        return Err(Error::Domain("component has no mass on the tree scale".into()));
    }
    // S_m = E[(W - shift)^m] and its gradient.
    let s: Vec<f64> = (0..=4).map(|m| j[m][0] / j0).collect();
    let a = s[1];
    let m2 = s[2] - a * a;
    let m3 = s[3] - 3.0 * a * s[2] + 2.0 * a.powi(3);
    let m4 = s[4] - 4.0 * a * s[3] + 6.0 * a * a * s[2] - 3.0 * a.powi(4);
    if !(m2 > 0.0) {
        return Err(Error::Domain(format!("non-positive W-scale variance {m2}")));
    }
    let sd = m2.sqrt();
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let values = [shift + a, sd, skew, kurt];
    if !with_gradient {
        return Ok(ComponentMoments { values, gradients: None });
    }
    let mut grads: [Vec<f64>; 4] = Default::default();
    for g in grads.iter_mut() {
        *g = vec![0.0; p];
    }
    for i in 0..p {
        let dj0 = j[0][1 + i];
        let ds: Vec<f64> = (0..=4).map(|m| j[m][1 + i] / j0 - j[m][0] * dj0 / (j0 * j0)).collect();
        let da = ds[1];
        let dm2 = ds[2] - 2.0 * a * da;
        let dm3 = ds[3] - 3.0 * (da * s[2] + a * ds[2]) + 6.0 * a * a * da;
        let dm4 = ds[4] - 4.0 * (da * s[3] + a * ds[3]) + 6.0 * (2.0 * a * da * s[2] + a * a * ds[2])
            - 12.0 * a.powi(3) * da;
        grads[0][i] = da;
        grads[1][i] = dm2 / (2.0 * sd);
        grads[2][i] = dm3 / m2.powf(1.5) - 1.5 * m3 * dm2 / m2.powf(2.5);
        grads[3][i] = dm4 / (m2 * m2) - 2.0 * m4 * dm2 / m2.powi(3);
    }
    Ok(ComponentMoments {
        values,
        gradients: Some(grads),
    })
}

/// Tree composition and the gradients of `ε̃` and `E(W)` with respect to all
/// mixture coordinates `(logit ε, fines…, fibers…)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionGradient {
    pub composition: TreeComposition,
    pub eps_tilde: Vec<f64>,
    pub mean_w: Vec<f64>,
}

pub fn tree_composition_gradient(
    theta: &ParamVector,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<CompositionGradient> {
    let m = theta.decode_mixture()?;
    let p = m.family().component_dim();
    let mean_and_grad = |c: &Component| -> Result<(f64, Vec<f64>)> {
        let j = w_integrals(c, geom, cfg, 1, DerivOrder::Gradient, 0.0)?;
        let (j0, j1) = (j[0][0], j[1][0]);
        let g = (0..p).map(|i| j[1][1 + i] / j0 - j1 * j[0][1 + i] / (j0 * j0)).collect();
        Ok((j1 / j0, g))
    };
    let (mf, dmf) = mean_and_grad(&m.fines)?;
    let (mb, dmb) = mean_and_grad(&m.fibers)?;
    let eps = m.eps;
    let pr = std::f64::consts::PI * geom.radius();
    let comp = compose(eps, mf, mb, geom.radius());
    let e = comp.mean_w;
    let den = 2.0 * (eps * mb + (1.0 - eps) * mf) + pr;
    let num = 2.0 * mf * mb + eps * pr * mf + (1.0 - eps) * pr * mb;

    let de_deps = (mf - mb) * (pr + 2.0 * e) / den;
    let de_dmf = (2.0 * mb + eps * pr) / den - 2.0 * (1.0 - eps) * num / (den * den);
    let de_dmb = (2.0 * mf + (1.0 - eps) * pr) / den - 2.0 * eps * num / (den * den);
    let chain_eps = eps * (1.0 - eps);

    let mut grad_e = vec![0.0; 1 + 2 * p];
    grad_e[0] = de_deps * chain_eps;
    for i in 0..p {
        grad_e[1 + i] = de_dmf * dmf[i];
        grad_e[1 + p + i] = de_dmb * dmb[i];
    }

    let q = pr + 2.0 * mf;
    let mut grad_t = vec![0.0; 1 + 2 * p];
    grad_t[0] = chain_eps * (pr + 2.0 * e) / q + eps * 2.0 * grad_e[0] / q;
    for i in 0..p {
        grad_t[1 + i] = eps * (2.0 * grad_e[1 + i] * q - (pr + 2.0 * e) * 2.0 * dmf[i]) / (q * q);
        grad_t[1 + p + i] = eps * 2.0 * grad_e[1 + p + i] / q;
    }
    Ok(CompositionGradient {
        composition: comp,
        eps_tilde: grad_t,
        mean_w: grad_e,
    })
}

fn quad_form(g: &[f64], cov: &[Vec<f64>]) -> Option<f64> {
    let n = g.len();
    let v: f64 = (0..n).map(|i| (0..n).map(|j| g[i] * cov[i][j] * g[j]).sum::<f64>()).sum();
    if v < -1e-10 {
        None
    } else {
        Some(v.max(0.0).sqrt())
    }
}

/// Embeds a component gradient into the full coordinate vector.
fn embed(g: &[f64], offset: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[offset..offset + g.len()].copy_from_slice(g);
    out
}

fn component_summary(
    c: &Component,
    offset: usize,
    n: usize,
    cov: Option<&[Vec<f64>]>,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<ComponentSummary> {
    let mom = component_moments(c, geom, cfg, cov.is_some())?;
    let stat = |k: usize| Stat {
        value: mom.values[k],
        se: match (cov, &mom.gradients) {
            (Some(cv), Some(g)) => quad_form(&embed(&g[k], offset, n), cv),
            _ => None,
        },
    };
    Ok(ComponentSummary {
        mean: stat(0),
        sd: stat(1),
        skewness: stat(2),
        kurtosis: stat(3),
    })
}

/// Plug-in statistics at the given parameters, with standard errors when an
/// optimizer-scale covariance is supplied.
pub fn plug_in_summary(
    params: &ModelParams,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    cov_theta: Option<&[Vec<f64>]>,
) -> Result<SummaryStats> {
    match params {
        ModelParams::Single(c) => Ok(SummaryStats {
            fines: None,
            fibers: component_summary(c, 0, c.dim(), cov_theta, geom, cfg)?,
            eps_tilde: None,
            mean_w_overall: None,
            loglik: None,
            n: None,
            convergence: None,
        }),
        ModelParams::Mixture(m) => {
            let p = m.family().component_dim();
            let n = 1 + 2 * p;
            let fines = component_summary(&m.fines, 1, n, cov_theta, geom, cfg)?;
            let fibers = component_summary(&m.fibers, 1 + p, n, cov_theta, geom, cfg)?;
            let (eps_tilde, mean_w) = if m.eps > 0.0 && m.eps < 1.0 {
                let theta = ParamVector::encode(params)?;
                let cg = tree_composition_gradient(&theta, geom, cfg)?;
                let se = |g: &[f64]| cov_theta.and_then(|c| quad_form(g, c));
                (
                    Stat {
                        value: cg.composition.eps_tilde,
                        se: se(&cg.eps_tilde),
                    },
                    Stat {
                        value: cg.composition.mean_w,
                        se: se(&cg.mean_w),
                    },
                )
            } else {
                let t = crate::scales::tree_composition(m, geom, cfg)?;
                (
                    Stat { value: t.eps_tilde, se: None },
                    Stat { value: t.mean_w, se: None },
                )
            };
            Ok(SummaryStats {
                fines: Some(fines),
                fibers,
                eps_tilde: Some(eps_tilde),
                mean_w_overall: Some(mean_w),
                loglik: None,
                n: None,
                convergence: None,
            })
        }
    }
}

/// Summary statistics of a fit; standard errors are filled in when the fit
/// has a covariance matrix. Microscopy fits describe fibers only.
pub fn summary_stats(fit: &FitResult, cfg: &QuadratureConfig) -> Result<SummaryStats> {
    let params = fit.params()?;
    let mut s = plug_in_summary(&params, &fit.model.geom, cfg, fit.cov_theta.as_deref())?;
    s.loglik = Some(fit.loglik);
    s.n = Some(fit.n);
    s.convergence = Some(fit.convergence);
    Ok(s)
}

/// Standard errors of every summary statistic, labelled.
pub fn summary_ses(fit: &FitResult, cfg: &QuadratureConfig) -> Result<Vec<(String, f64)>> {
    let cov = fit.cov_theta.as_deref().ok_or(Error::MissingCovariance)?;
    let s = plug_in_summary(&fit.params()?, &fit.model.geom, cfg, Some(cov))?;
    let mut out = Vec::new();
    let mut push = |name: String, st: &Stat| -> Result<()> {
        let se = st.se.ok_or_else(|| Error::Domain(format!("negative delta-method variance for {name}")))?;
        out.push((name, se));
        Ok(())
    };
    let parts: Vec<(&str, &ComponentSummary)> = match (&s.fines, fit.model.data_type) {
        (Some(f), DataType::Ofa) => vec![("fines", f), ("fibers", &s.fibers)],
        _ => vec![("fibers", &s.fibers)],
    };
    for (label, c) in parts {
        push(format!("{label}.mean"), &c.mean)?;
        push(format!("{label}.sd"), &c.sd)?;
        push(format!("{label}.skewness"), &c.skewness)?;
        push(format!("{label}.kurtosis"), &c.kurtosis)?;
    }
    if fit.theta_hat.layout == Layout::Mixture {
        if let Some(e) = &s.eps_tilde {
            push("eps_tilde".into(), e)?;
        }
        if let Some(e) = &s.mean_w_overall {
            push("mean_w".into(), e)?;
        }
    }
    Ok(out)
}

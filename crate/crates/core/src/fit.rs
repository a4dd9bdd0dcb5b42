//! Maximum likelihood fitting: starting values, box-constrained
//! quasi-Newton maximization with fixed coordinates and restarts, and
//! covariance estimates on both parameter scales.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{
    Component, DerivOrder, Family, GgdParams, Layout, LognParams, MixtureParams,
    ModelParams, ParamVector, Prepared,
};
use crate::error::{Error, Result};
use crate::likelihood::{init_loglik, loglik, DataType, Dataset, ModelSpec};
use crate::optimize::{minimize_box, Convergence, OptimConfig, OptimOutcome};
use crate::quadrature::QuadratureConfig;

/// How the optimizer obtains gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    Analytic,
    FiniteDifference,
}

/// Fitting options. Bounds, starting values and the fixed mask are given on
/// the original scale in print order (`ε` first for mixtures, fines before
/// fibers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub par_start: Option<Vec<f64>>,
    pub fixed: Option<Vec<bool>>,
    pub n_starts: usize,
    pub grad_mode: GradMode,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lower: None,
            upper: None,
            par_start: None,
            fixed: None,
            n_starts: 5,
            grad_mode: GradMode::Analytic,
            max_iter: 500,
            grad_tol: 1e-7,
            seed: 0,
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Outcome of one optimizer start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub index: usize,
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub convergence: Option<Convergence>,
    pub error: Option<String>,
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub theta_hat: ParamVector,
    pub labels: Vec<String>,
    pub theta_tilde_hat: Vec<f64>,
    pub loglik: f64,
    /// Log likelihood at the initialization point.
    pub loglik_start: f64,
    pub cov_theta: Option<Vec<Vec<f64>>>,
    pub cov_tilde: Option<Vec<Vec<f64>>>,
    pub se_tilde: Option<Vec<f64>>,
    pub convergence: Convergence,
    pub n: usize,
    pub starts_tried: usize,
    pub iterations: usize,
    /// True when initialization failed and the default start was used.
    pub init_fallback: bool,
    pub starts: Vec<StartReport>,
    /// Negative log likelihood after each accepted step of the chosen start.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn params(&self) -> Result<ModelParams> {
        self.theta_hat.decode()
    }
}

/// Default original-scale bounds in print order.
pub fn default_bounds(family: Family, layout: Layout) -> (Vec<f64>, Vec<f64>) {
    let (cl, cu): (Vec<f64>, Vec<f64>) = match family {
        Family::GeneralizedGamma => (vec![1e-4; 3], vec![50.0; 3]),
        Family::Lognormal => (vec![-10.0, 1e-3], vec![10.0, 10.0]),
    };
    match layout {
        Layout::Single => (cl, cu),
        Layout::Mixture => {
            let mut lo = vec![1e-4];
            lo.extend(&cl);
            lo.extend(&cl);
            let mut hi = vec![1.0 - 1e-4];
            hi.extend(&cu);
            hi.extend(&cu);
            (lo, hi)
        }
    }
}

/// Maps one original-scale coordinate to the optimizer scale.
fn to_theta(family: Family, layout: Layout, i: usize, v: f64) -> f64 {
    let j = match layout {
        Layout::Mixture if i == 0 => return (v / (1.0 - v)).ln(),
        Layout::Mixture => (i - 1) % family.component_dim(),
        Layout::Single => i,
    };
    match (family, j) {
        (Family::Lognormal, 0) => v,
        _ => v.ln(),
    }
}

/// Starting point and whether it is the unrefined default.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub theta: ParamVector,
    pub fallback: bool,
}

/// Starting values for the censored fit.
///
/// A user start is encoded unchanged. Otherwise the uncensored problem is
/// solved first: for OFA data the mixture likelihood that treats every cell
/// as uncut, for microscopy data the plain core-scale likelihood.
pub fn initialize(data: &Dataset, model: &ModelSpec, cfg: &FitConfig) -> Result<Initialization> {
    check_model(data, model)?;
    let layout = model.layout();
    if let Some(start) = &cfg.par_start {
        let params = ModelParams::from_original(model.family, layout, start)?;
        return Ok(Initialization {
            theta: ParamVector::encode(&params)?,
            fallback: false,
        });
    }
    let (lo, hi) = theta_bounds(model, cfg)?;
    let opt = OptimConfig {
        max_iter: cfg.max_iter,
        grad_tol: cfg.grad_tol,
        ..Default::default()
    };
    let v = data.values();
    match (model.data_type, model.family) {
        (DataType::Ofa, fam) => {
            let start = match fam {
                Family::GeneralizedGamma => ParamVector::default_ggd_start(),
                Family::Lognormal => lognormal_split_start(v)?,
            };
            let x0 = clamp(&start.values, &lo, &hi);
            let res = minimize_box(
                |x| {
                    let pv = ParamVector::new(fam, Layout::Mixture, x.to_vec()).ok()?;
                    let ev = init_loglik(&pv, data, DerivOrder::Gradient).ok()?;
                    Some((-ev.loglik, ev.gradient?.iter().map(|g| -g).collect()))
                },
                &x0,
                &lo,
                &hi,
                &opt,
            );
            Ok(match res {
                Ok(out) if out.convergence != Convergence::LineSearchFailure || out.iterations > 0 => {
                    Initialization {
                        theta: ParamVector::new(fam, Layout::Mixture, out.x)?,
                        fallback: false,
                    }
                }
                _ => Initialization {
                    theta: ParamVector::new(fam, Layout::Mixture, x0)?,
                    fallback: true,
                },
            })
        }
        (DataType::Microscopy, Family::Lognormal) => {
            let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
            let (mu, sd) = mean_sd(&logs);
            let c = Component::Logn(LognParams::new(mu, sd.max(1e-2))?);
            let theta = clamp(&c.theta(), &lo, &hi);
            Ok(Initialization {
                theta: ParamVector::new(Family::Lognormal, Layout::Single, theta)?,
                fallback: false,
            })
        }
        (DataType::Microscopy, Family::GeneralizedGamma) => {
            let start = Component::Ggd(GgdParams::new(2.0, 2.0, 2.0)?).theta();
            let x0 = clamp(&start, &lo, &hi);
            let res = minimize_box(
                |x| {
                    let c = Component::from_theta(Family::GeneralizedGamma, x).ok()?;
                    let prep = Prepared::new(&c);
                    let mut f = 0.0;
                    let mut g = vec![0.0; 3];
                    for &y in v {
                        let ld = prep.log_derivs(y.ln(), DerivOrder::Gradient);
                        f -= ld.ln_f;
                        for j in 0..3 {
                            g[j] -= ld.score[j];
                        }
                    }
                    Some((f, g))
                },
                &x0,
                &lo,
                &hi,
                &opt,
            );
            Ok(match res {
                Ok(out) => Initialization {
                    theta: ParamVector::new(Family::GeneralizedGamma, Layout::Single, out.x)?,
                    fallback: false,
                },
                Err(_) => Initialization {
                    theta: ParamVector::new(Family::GeneralizedGamma, Layout::Single, x0)?,
                    fallback: true,
                },
            })
        }
    }
}

/// Lognormal mixture start: split the log-lengths at their 20th percentile
/// and use each part's mean and standard deviation.
fn lognormal_split_start(values: &[f64]) -> Result<ParamVector> {
    let mut logs: Vec<f64> = values.iter().map(|x| x.ln()).collect();
    logs.sort_by(f64::total_cmp);
    let cut = ((logs.len() as f64 * 0.2).round() as usize).clamp(1, logs.len().saturating_sub(1).max(1));
    let (lo, hi) = logs.split_at(cut.min(logs.len()));
    let (m1, s1) = mean_sd(lo);
    let (m2, s2) = if hi.is_empty() { (m1, s1) } else { mean_sd(hi) };
    let eps = (lo.len() as f64 / logs.len() as f64).clamp(0.05, 0.95);
    let m = MixtureParams::new(
        eps,
        Component::Logn(LognParams::new(m1, s1.max(0.1))?),
        Component::Logn(LognParams::new(m2, s2.max(0.1))?),
    )?;
    ParamVector::encode(&ModelParams::Mixture(m))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn clamp(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| v.clamp(*l, *h))
        .collect()
}

fn check_model(data: &Dataset, model: &ModelSpec) -> Result<()> {
    if data.data_type() != model.data_type {
        return Err(Error::Domain(format!(
            "model expects {} data but the dataset is {}",
            model.data_type,
            data.data_type()
        )));
    }
    Ok(())
}

/// Optimizer-scale bounds from the original-scale configuration.
fn theta_bounds(model: &ModelSpec, cfg: &FitConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let layout = model.layout();
    let n = model.n_params();
    let (dl, du) = default_bounds(model.family, layout);
    let lower = cfg.lower.clone().unwrap_or(dl);
    let upper = cfg.upper.clone().unwrap_or(du);
    if lower.len() != n || upper.len() != n {
        return Err(Error::Domain(format!("bounds need {n} entries each")));
    }
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        if !(lower[i] < upper[i]) {
            return Err(Error::Domain(format!(
                "lower bound {} is not below upper bound {} for parameter {}",
                lower[i],
                upper[i],
                i + 1
            )));
        }
        let a = to_theta(model.family, layout, i, lower[i]);
        let b = to_theta(model.family, layout, i, upper[i]);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!(
                "bounds [{}, {}] for parameter {} leave the parameter space",
                lower[i],
                upper[i],
                i + 1
            )));
        }
        lo.push(a);
        hi.push(b);
    }
    Ok((lo, hi))
}

/// Maximizes the model's log likelihood.
pub fn fit(data: &Dataset, model: &ModelSpec, cfg: &FitConfig) -> Result<FitResult> {
    check_model(data, model)?;
    cfg.quadrature.validate()?;
    let n = model.n_params();
    let fixed = match &cfg.fixed {
        Some(f) => {
            if f.len() != n {
                return Err(Error::Domain(format!("fixed mask needs {n} entries")));
            }
            if f.iter().any(|b| *b) && cfg.par_start.is_none() {
                return Err(Error::Domain(
                    "fixed parameters take their values from a starting vector; supply one".into(),
                ));
            }
            f.clone()
        }
        None => vec![false; n],
    };
    if cfg.n_starts == 0 {
        return Err(Error::Domain("at least one start is required".into()));
    }
    let (lo, hi) = theta_bounds(model, cfg)?;
    let init = initialize(data, model, cfg)?;
    let base = init.theta.values.clone();

    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let lo_f: Vec<f64> = free.iter().map(|&i| lo[i]).collect();
    let hi_f: Vec<f64> = free.iter().map(|&i| hi[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, 0.5).expect("valid normal");
    let starts: Vec<Vec<f64>> = (0..cfg.n_starts)
        .map(|s| {
            free.iter()
                .map(|&i| {
                    let v = if s == 0 { base[i] } else { base[i] + jitter.sample(&mut rng) };
                    v.clamp(lo[i], hi[i])
                })
                .collect()
        })
        .collect();

    let full = |xf: &[f64]| -> Vec<f64> {
        let mut x = base.clone();
        for (k, &i) in free.iter().enumerate() {
            x[i] = xf[k];
        }
        x
    };
    let objective = |xf: &[f64]| -> Option<(f64, Vec<f64>)> {
        let pv = ParamVector::new(model.family, model.layout(), full(xf)).ok()?;
        match cfg.grad_mode {
            GradMode::Analytic => {
                let ev = loglik(model, &pv, data, &cfg.quadrature, DerivOrder::Gradient).ok()?;
                let g = ev.gradient?;
                Some((-ev.loglik, free.iter().map(|&i| -g[i]).collect()))
            }
            GradMode::FiniteDifference => {
                let f0 = loglik(model, &pv, data, &cfg.quadrature, DerivOrder::Value).ok()?.loglik;
                let mut g = Vec::with_capacity(free.len());
                for &i in &free {
                    let h = 1e-5 * pv.values[i].abs().max(1.0);
                    let mut up = pv.clone();
                    let mut dn = pv.clone();
                    up.values[i] += h;
                    dn.values[i] -= h;
                    let fu = loglik(model, &up, data, &cfg.quadrature, DerivOrder::Value).ok()?.loglik;
                    let fd = loglik(model, &dn, data, &cfg.quadrature, DerivOrder::Value).ok()?.loglik;
                    g.push(-(fu - fd) / (2.0 * h));
                }
                Some((-f0, g))
            }
        }
    };
    let opt = OptimConfig {
        max_iter: cfg.max_iter,
        grad_tol: cfg.grad_tol,
        ..Default::default()
    };

    let outcomes: Vec<Result<OptimOutcome>> = starts
        .par_iter()
        .map(|x0| minimize_box(&objective, x0, &lo_f, &hi_f, &opt))
        .collect();

    let reports: Vec<StartReport> = outcomes
        .iter()
        .enumerate()
        .map(|(index, o)| match o {
            Ok(out) => StartReport {
                index,
                loglik: Some(-out.f),
                iterations: out.iterations,
                convergence: Some(out.convergence),
                error: None,
            },
            Err(e) => StartReport {
                index,
                loglik: None,
                iterations: 0,
                convergence: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<(usize, &OptimOutcome)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Ok(out) = o {
            if best.map_or(true, |(_, b)| -out.f > -b.f) {
                best = Some((i, out));
            }
        }
    }
    let Some((best_idx, best)) = best else {
        let diag: Vec<String> = reports
            .iter()
            .map(|r| format!("start {}: {}", r.index, r.error.clone().unwrap_or_default()))
            .collect();
        return Err(Error::Optimizer(format!("all starts failed ({})", diag.join("; "))));
    };
    let loglik_start = match &outcomes[0] {
        Ok(o) => -o.trace[0],
        Err(_) => f64::NAN,
    };

    let theta_hat = ParamVector::new(model.family, model.layout(), full(&best.x))?.with_fixed(fixed.clone())?;
    let at_opt = loglik(model, &theta_hat, data, &cfg.quadrature, DerivOrder::Hessian)?;
    let hess = at_opt.hessian.clone().expect("requested Hessian");

    let mut convergence = best.convergence;
    let cov_theta = free_covariance(&hess, &free, n);
    if cov_theta.is_none() {
        convergence = Convergence::SingularHessian;
    }
    let chain = theta_hat.chain_factors()?;
    let cov_tilde = cov_theta.as_ref().map(|c| delta_transform(c, &chain));
    let se_tilde = cov_tilde.as_ref().and_then(|c| standard_errors(c));

    let params = theta_hat.decode()?;
    Ok(FitResult {
        model: *model,
        labels: ModelParams::labels(model.family, model.layout()),
        theta_tilde_hat: params.original(),
        theta_hat,
        loglik: at_opt.loglik,
        loglik_start,
        cov_theta,
        cov_tilde,
        se_tilde,
        convergence,
        n: data.len(),
        starts_tried: cfg.n_starts,
        iterations: best.iterations,
        init_fallback: init.fallback,
        starts: reports,
        trace: outcomes[best_idx].as_ref().map(|o| o.trace.clone()).unwrap_or_default(),
    })
}

/// `(−H)⁻¹` over the free coordinates, embedded with zero rows and columns
/// for fixed ones. `None` when `−H` is not positive definite there.
fn free_covariance(hess: &[Vec<f64>], free: &[usize], n: usize) -> Option<Vec<Vec<f64>>> {
    let m = free.len();
    let neg = DMatrix::from_fn(m, m, |a, b| -hess[free[a]][free[b]]);
    let inv = if m == 0 { DMatrix::zeros(0, 0) } else { neg.cholesky()?.inverse() };
    let mut cov = vec![vec![0.0; n]; n];
    for a in 0..m {
        for b in 0..m {
            cov[free[a]][free[b]] = 0.5 * (inv[(a, b)] + inv[(b, a)]);
        }
    }
    Some(cov)
}

/// `diag(g) · C · diag(g)`.
pub fn delta_transform(cov: &[Vec<f64>], chain: &[f64]) -> Vec<Vec<f64>> {
    cov.iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, c)| chain[i] * c * chain[j]).collect())
        .collect()
}

/// Square roots of the diagonal; `None` if any variance is negative beyond
/// roundoff.
fn standard_errors(cov: &[Vec<f64>]) -> Option<Vec<f64>> {
    let scale = cov.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(cov.len());
    for (i, row) in cov.iter().enumerate() {
        let v = row[i];
        if v < -1e-10 * scale.max(1.0) {
            return None;
        }
        out.push(v.max(0.0).sqrt());
    }
    Some(out)
}

/// Delta-method covariance of the original-scale estimates.
pub fn covariance_original_scale(fit: &FitResult) -> Result<Vec<Vec<f64>>> {
    if fit.convergence != Convergence::Success {
        return Err(Error::MissingCovariance);
    }
    let cov = fit.cov_theta.as_ref().ok_or(Error::MissingCovariance)?;
    let tilde = delta_transform(cov, &fit.theta_hat.chain_factors()?);
    let scale = tilde.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max);
    for (i, row) in tilde.iter().enumerate() {
        if row[i] < -1e-10 * scale.max(1.0) {
            return Err(Error::Domain(format!(
                "covariance has negative variance {} for parameter {}",
                row[i],
                i + 1
            )));
        }
    }
    Ok(tilde)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bounds_are_ordered() {
        for fam in [Family::GeneralizedGamma, Family::Lognormal] {
            for layout in [Layout::Mixture, Layout::Single] {
                let (lo, hi) = default_bounds(fam, layout);
                assert_eq!(lo.len(), ParamVector::expected_len(fam, layout));
                assert!(lo.iter().zip(&hi).all(|(a, b)| a < b));
            }
        }
    }

    #[test]
    fn delta_chain_at_half() {
        let pv = ParamVector::new(Family::Lognormal, Layout::Mixture, vec![0.0, 0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = pv.chain_factors().unwrap();
        assert_eq!(g[0], 0.25);
        assert_eq!(g[1], 1.0);
        assert!((g[2] - 0.2f64.exp()).abs() < 1e-15);
        assert_eq!(g[3], 1.0);
    }
}

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::process::Command;

use fiberfit::densities::{
    ggd_pdf, logn_pdf, Component, DerivOrder, Family, GgdParams, Layout, LognParams, MixtureParams,
    ModelParams, ParamVector,
};
use fiberfit::fit::{fit, FitConfig};
use fiberfit::geometry::CoreGeometry;
use fiberfit::likelihood::{
    init_loglik, loglik, micro_loglik, ofa_loglik, DataType, Dataset, LikelihoodEvaluation, ModelSpec,
};
use fiberfit::quadrature::QuadratureConfig;
use fiberfit::scales::{tree_composition, Part, Scale, ScaleDensity};
use fiberfit::simulate::{sample, SimSpec};
use fiberfit::summary::{component_moments, plug_in_summary, summary_stats, tree_composition_gradient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

// ---------- oracles ----------

fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol.max(1e-15 * whole.abs()) {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson over `panels` equal pieces of `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fl, fm, fh) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fl + 4.0 * fm + fh);
            simpson_rec(&f, lo, hi, fl, fm, fh, whole, tol / panels as f64, 30)
        })
        .sum()
}

/// `∫₀^{min(top, 2r)} g(x) dx` for `g` with a `1/sqrt(4r² − x²)` edge, via `x = 2r sin φ`.
pub fn integrate_core<F: Fn(f64) -> f64>(g: F, r: f64, top: f64, tol: f64) -> f64 {
    let phi_top = if top >= 2.0 * r { FRAC_PI_2 } else { (top / (2.0 * r)).asin() };
    simpson(
        |phi| {
            let a = 2.0 * r;
            let x = (a * phi.sin()).clamp(f64::MIN_POSITIVE, a * (1.0 - f64::EPSILON));
            g(x) * ((a - x) * (a + x)).sqrt()
        },
        0.0,
        phi_top,
        tol,
        64,
    )
}

/// Log-length range holding all but a negligible tail of a component.
pub fn log_range(c: &Component) -> (f64, f64) {
    match *c {
        Component::Ggd(p) => {
            let s_lo = (1e-14f64).powf(1.0 / p.k).max(1e-300);
            let s_hi = 80.0 + 3.0 * p.k;
            (p.b.ln() + s_lo.ln() / p.d, p.b.ln() + s_hi.ln() / p.d)
        }
        Component::Logn(p) => (p.mu - 12.0 * p.sigma, p.mu + 12.0 * p.sigma),
    }
}

/// `∫₀^∞ g(y) dy` in `u = ln y` over the union of the components' ranges.
pub fn integrate_positive<F: Fn(f64) -> f64>(g: F, comps: &[Component], tol: f64) -> f64 {
    let lo = comps.iter().map(|c| log_range(c).0).fold(f64::INFINITY, f64::min);
    let hi = comps.iter().map(|c| log_range(c).1).fold(f64::NEG_INFINITY, f64::max);
    simpson(|u| g(u.exp()) * u.exp(), lo, hi.min(700.0), tol, 256)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Two-sided Kolmogorov-Smirnov statistic of `sample` against `cdf`, where
/// `cdf` receives the sorted sample and returns the CDF at each point.
pub fn ks_statistic<F: FnOnce(&[f64]) -> Vec<f64>>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let f = cdf(&s);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, fi) in f.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - fi).max(fi - i as f64 / n);
    }
    d
}

/// CDF at sorted points by accumulating Simpson integrals between them.
pub fn cumulative<F: Fn(f64) -> f64>(f: F, sorted: &[f64], tol: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut prev = 0.0;
    sorted
        .iter()
        .map(|&x| {
            if x > prev {
                acc += simpson(&f, prev, x, tol, 1);
            }
            prev = x;
            acc
        })
        .collect()
}

// ---------- fixtures ----------

pub fn ggd(b: f64, d: f64, k: f64) -> Component {
    Component::Ggd(GgdParams::new(b, d, k).unwrap())
}

pub fn logn(mu: f64, sigma: f64) -> Component {
    Component::Logn(LognParams::new(mu, sigma).unwrap())
}

pub fn mixture(eps: f64, fines: Component, fibers: Component) -> ModelParams {
    ModelParams::Mixture(MixtureParams::new(eps, fines, fibers).unwrap())
}

pub fn geom(r: f64) -> CoreGeometry {
    CoreGeometry::new(r).unwrap()
}

/// Generalized gamma mixture published for an OFA sample.
pub fn published_ggd_mixture() -> ModelParams {
    mixture(0.298, ggd(0.001, 0.2921, 5.2519), ggd(2.0014, 2.8224, 2.2236))
}

pub fn published_logn_mixture() -> ModelParams {
    mixture(0.293, logn(-1.579890, 1.554697), logn(0.915158, 0.238151))
}

pub fn ofa_truth() -> ModelParams {
    mixture(0.3, ggd(0.1, 1.5, 2.0), ggd(2.0, 2.8, 2.2))
}

pub fn micro_truth() -> ModelParams {
    ModelParams::Single(ggd(2.4, 3.3, 1.5))
}

pub fn simulate(scale: Scale, params: ModelParams, r: f64, n: usize, seed: u64) -> Vec<f64> {
    sample(&SimSpec {
        scale,
        params,
        geom: geom(r),
        n,
        seed,
    })
    .unwrap()
}

/// The ten parameter sets of the normalization battery with their radii.
pub fn battery() -> Vec<(String, ModelParams, f64)> {
    vec![
        ("ggd fibers (2.4, 3.3, 1.5)".into(), ModelParams::Single(ggd(2.4, 3.3, 1.5)), 2.5),
        ("ggd microscopy estimate".into(), ModelParams::Single(ggd(1.3657, 1.9560, 3.444)), 2.5),
        ("ggd mixture, published estimate".into(), published_ggd_mixture(), 6.0),
        ("lognormal mixture, published estimate".into(), published_logn_mixture(), 6.0),
        ("ggd mixture, simulation truth".into(), ofa_truth(), 6.0),
        ("ggd (1.8, 2.7, 2.6)".into(), ModelParams::Single(ggd(1.8, 2.7, 2.6)), 3.0),
        ("ggd long fibers (6, 1.5, 2)".into(), ModelParams::Single(ggd(6.0, 1.5, 2.0)), 2.0),
        ("lognormal (0.8, 0.3)".into(), ModelParams::Single(logn(0.8, 0.3)), 2.5),
        ("lognormal (-2, 0.5)".into(), ModelParams::Single(logn(-2.0, 0.5)), 1.0),
        ("lognormal mixture (0.5; -1, 0.8; 1.2, 0.4)".into(), mixture(0.5, logn(-1.0, 0.8), logn(1.2, 0.4)), 4.0),
    ]
}

pub fn components(p: &ModelParams) -> Vec<Component> {
    match p {
        ModelParams::Single(c) => vec![*c],
        ModelParams::Mixture(m) => vec![m.fines, m.fibers],
    }
}

/// Scale/part pairs a parameter set defines.
pub fn applicable(p: &ModelParams) -> Vec<(Scale, Part)> {
    match p {
        ModelParams::Single(_) => Scale::ALL.iter().map(|&s| (s, Part::Fibers)).collect(),
        ModelParams::Mixture(_) => vec![
            (Scale::Y, Part::Mixture),
            (Scale::W, Part::Mixture),
            (Scale::X, Part::Mixture),
            (Scale::V, Part::Fibers),
        ],
    }
}

/// Total mass of a scale density by independent quadrature.
pub fn total_mass(p: &ModelParams, r: f64, scale: Scale, part: Part) -> f64 {
    let g = geom(r);
    let d = ScaleDensity::new(scale, part, p, g, QuadratureConfig::default()).unwrap();
    let f = |x: f64| d.eval(x).unwrap();
    if scale.is_censored() {
        integrate_core(f, r, 2.0 * r, 1e-10)
    } else {
        integrate_positive(f, &components(p), 1e-10)
    }
}

pub fn uniform_point(rng: &mut ChaCha8Rng, ranges: &[(f64, f64)]) -> Vec<f64> {
    ranges.iter().map(|&(a, b)| rng.random_range(a..b)).collect()
}

pub fn ggd_ranges() -> Vec<(f64, f64)> {
    vec![(1.2, 3.0), (1.5, 4.0), (0.8, 3.5)]
}

pub fn logn_ranges() -> Vec<(f64, f64)> {
    vec![(0.5, 1.1), (0.15, 0.5)]
}

pub fn mixture_ranges(family: Family) -> Vec<(f64, f64)> {
    match family {
        Family::GeneralizedGamma => vec![
            (0.15, 0.6),
            (0.05, 0.3),
            (0.8, 2.5),
            (0.8, 3.0),
            (1.2, 3.0),
            (1.5, 4.0),
            (0.8, 3.5),
        ],
        Family::Lognormal => vec![(0.15, 0.6), (-2.5, -1.0), (0.4, 1.2), (0.5, 1.1), (0.15, 0.5)],
    }
}

/// Largest gradient and Hessian mismatch against central differences, and
/// the largest asymmetry, for one likelihood at one point.
pub struct DerivReport {
    pub grad: f64,
    pub hess: f64,
    pub asym: f64,
}

pub fn check_derivatives<F>(eval: F, theta: &ParamVector, h: f64) -> DerivReport
where
    F: Fn(&ParamVector, DerivOrder) -> LikelihoodEvaluation,
{
    let ev = eval(theta, DerivOrder::Hessian);
    let g = ev.gradient.unwrap();
    let hm = ev.hessian.unwrap();
    let n = theta.len();
    let mut rep = DerivReport {
        grad: 0.0,
        hess: 0.0,
        asym: 0.0,
    };
    for j in 0..n {
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up.values[j] += h;
        dn.values[j] -= h;
        let eu = eval(&up, DerivOrder::Gradient);
        let ed = eval(&dn, DerivOrder::Gradient);
        rep.grad = rep.grad.max(rel_err(g[j], (eu.loglik - ed.loglik) / (2.0 * h)));
        let (gu, gd) = (eu.gradient.unwrap(), ed.gradient.unwrap());
        for k in 0..n {
            rep.hess = rep.hess.max(rel_err(hm[j][k], (gu[k] - gd[k]) / (2.0 * h)));
            rep.asym = rep.asym.max((hm[j][k] - hm[k][j]).abs() / hm[j][k].abs().max(1.0));
        }
    }
    rep
}

// ---------- acceptance criteria ----------

pub fn criterion_1() -> Check {
    let g = GgdParams::new(1.8, 2.7, 2.6).unwrap();
    let l = LognParams::new(-2.0, 0.5).unwrap();
    let cases = [
        (ggd_pdf(2.5, &g).unwrap(), 0.6689186996, 1e-9),
        (ggd_pdf(5.0, &g).unwrap(), 0.0000692969, 1e-9),
        (logn_pdf(0.1, &l).unwrap(), 6.643761, 1e-6),
        (logn_pdf(0.45, &l).unwrap(), 0.09882040, 1e-6),
    ];
    let worst = cases.iter().map(|(a, b, _)| (a - b).abs()).fold(0.0, f64::max);
    if cases.iter().all(|(a, b, t)| (a - b).abs() <= *t) {
        Ok(format!("four golden densities, max abs diff {worst:.1e}"))
    } else {
        Err(format!("golden densities differ: {cases:?}"))
    }
}

pub fn criterion_2() -> Check {
    let s = plug_in_summary(&micro_truth(), &geom(2.5), &QuadratureConfig::default(), None).map_err(|e| e.to_string())?;
    let got = [s.fibers.mean.value, s.fibers.sd.value, s.fibers.skewness.value, s.fibers.kurtosis.value];
    let want = [2.4536, 0.6723, 0.0375, 2.7956];
    let diff = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let msg = format!("mean/sd/skew/kurt = {:.4}/{:.4}/{:.4}/{:.4}, max diff {diff:.1e}", got[0], got[1], got[2], got[3]);
    if diff <= 1e-3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn criterion_3() -> Check {
    let r = 3.0;
    let g = geom(r);
    let kernel = |y: f64| move |x: f64| g.cut_kernel(x, y).unwrap_or(0.0);
    let mut worst = 0.0f64;
    for i in 1..=200 {
        let y = 2.0 * r * i as f64 / 200.0;
        let cut = integrate_core(kernel(y), r, y, 1e-12);
        worst = worst.max((g.prob_uncut(y).unwrap() + cut - 1.0).abs());
    }
    for y in [2.1 * r, 5.0 * r, 20.0 * r] {
        let cut = integrate_core(kernel(y), r, 2.0 * r, 1e-12);
        worst = worst.max((cut - 1.0).abs());
    }
    let msg = format!("max deviation from 1 over 203 lengths: {worst:.1e}");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn criterion_4() -> Check {
    let mut worst = (0.0f64, String::new());
    for (name, p, r) in battery() {
        for (scale, part) in applicable(&p) {
            let m = total_mass(&p, r, scale, part);
            let dev = (m - 1.0).abs();
            if !(dev <= worst.0) {
                worst = (dev, format!("{name}, scale {}", scale.label()));
            }
        }
    }
    let msg = format!("10 parameter sets, 4 scales; worst |mass - 1| = {:.1e} ({})", worst.0, worst.1);
    if worst.0 <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn likelihood_derivatives(points: usize) -> Result<(f64, f64, f64), String> {
    let cfg = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut g, mut h, mut a) = (0.0f64, 0.0f64, 0.0f64);
    let mut note = |r: DerivReport| {
        g = g.max(r.grad);
        h = h.max(r.hess);
        a = a.max(r.asym);
    };
    for family in [Family::GeneralizedGamma, Family::Lognormal] {
        let (truth_mix, truth_one) = match family {
            Family::GeneralizedGamma => (ofa_truth(), micro_truth()),
            Family::Lognormal => (published_logn_mixture(), ModelParams::Single(logn(0.8, 0.3))),
        };
        let g6 = geom(6.0);
        let g25 = geom(2.5);
        let ofa = Dataset::new(simulate(Scale::X, truth_mix, 6.0, 200, 1), DataType::Ofa, &g6).unwrap();
        let micro = Dataset::new(simulate(Scale::V, truth_one, 2.5, 100, 2), DataType::Microscopy, &g25).unwrap();
        let mranges = mixture_ranges(family);
        let cranges = if family == Family::GeneralizedGamma { ggd_ranges() } else { logn_ranges() };
        for _ in 0..points {
            let m = ModelParams::from_original(family, Layout::Mixture, &uniform_point(&mut rng, &mranges)).unwrap();
            let theta = ParamVector::encode(&m).unwrap();
            note(check_derivatives(|t, o| ofa_loglik(t, &ofa, &g6, &cfg, o).unwrap(), &theta, 1e-5));
            note(check_derivatives(|t, o| init_loglik(t, &ofa, o).unwrap(), &theta, 1e-5));
            let c = ModelParams::from_original(family, Layout::Single, &uniform_point(&mut rng, &cranges)).unwrap();
            let theta = ParamVector::encode(&c).unwrap();
            note(check_derivatives(|t, o| micro_loglik(t, &micro, &g25, &cfg, o).unwrap(), &theta, 1e-5));
        }
    }
    Ok((g, h, a))
}

fn summary_derivatives(points: usize) -> f64 {
    let cfg = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for family in [Family::GeneralizedGamma, Family::Lognormal] {
        let cranges = if family == Family::GeneralizedGamma { ggd_ranges() } else { logn_ranges() };
        for i in 0..points {
            let r = [2.5, 6.0][i % 2];
            let gm = geom(r);
            let c = Component::from_original(family, &uniform_point(&mut rng, &cranges)).unwrap();
            let an = component_moments(&c, &gm, &cfg, true).unwrap();
            let grads = an.gradients.unwrap();
            let th = c.theta();
            for j in 0..th.len() {
                let mut up = th.clone();
                let mut dn = th.clone();
                up[j] += h;
                dn[j] -= h;
                let vu = component_moments(&Component::from_theta(family, &up).unwrap(), &gm, &cfg, false).unwrap().values;
                let vd = component_moments(&Component::from_theta(family, &dn).unwrap(), &gm, &cfg, false).unwrap().values;
                for s in 0..4 {
                    worst = worst.max(rel_err(grads[s][j], (vu[s] - vd[s]) / (2.0 * h)));
                }
            }

            let m = ModelParams::from_original(family, Layout::Mixture, &uniform_point(&mut rng, &mixture_ranges(family))).unwrap();
            let theta = ParamVector::encode(&m).unwrap();
            let cg = tree_composition_gradient(&theta, &gm, &cfg).unwrap();
            for j in 0..theta.len() {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up.values[j] += h;
                dn.values[j] -= h;
                let tu = tree_composition(&up.decode_mixture().unwrap(), &gm, &cfg).unwrap();
                let td = tree_composition(&dn.decode_mixture().unwrap(), &gm, &cfg).unwrap();
                worst = worst.max(rel_err(cg.eps_tilde[j], (tu.eps_tilde - td.eps_tilde) / (2.0 * h)));
                worst = worst.max(rel_err(cg.mean_w[j], (tu.mean_w - td.mean_w) / (2.0 * h)));
            }
        }
    }
    worst
}

pub fn criterion_5() -> Check {
    let (g, h, a) = likelihood_derivatives(20)?;
    let s = summary_derivatives(20);
    let msg = format!(
        "20 points per likelihood and family: grad rel err {g:.1e}, Hessian rel err {h:.1e}, asymmetry {a:.1e}; summary gradients rel err {s:.1e}"
    );
    if g <= 1e-4 && h <= 1e-3 && a <= 1e-10 && s <= 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn micro_dataset() -> Vec<f64> {
    simulate(Scale::V, micro_truth(), 2.5, 300, 11)
}

pub fn ofa_dataset() -> Vec<f64> {
    simulate(Scale::X, ofa_truth(), 6.0, 3000, 5)
}

pub fn criterion_6a() -> Check {
    let g = geom(2.5);
    let data = Dataset::new(micro_dataset(), DataType::Microscopy, &g).unwrap();
    let model = ModelSpec {
        family: Family::GeneralizedGamma,
        data_type: DataType::Microscopy,
        geom: g,
    };
    let cfg = FitConfig::default();
    let f = fit(&data, &model, &cfg).map_err(|e| e.to_string())?;
    let se = f.se_tilde.clone().ok_or("no standard errors")?;
    let truth = [2.4, 3.3, 1.5];
    let z: Vec<f64> = (0..3).map(|i| (f.theta_tilde_hat[i] - truth[i]).abs() / se[i]).collect();
    let s = summary_stats(&f, &cfg.quadrature).map_err(|e| e.to_string())?;
    let zm = (s.fibers.mean.value - 2.4536).abs() / s.fibers.mean.se.ok_or("no mean SE")?;
    let msg = format!(
        "estimates {:.3?}, |z| {:.2?}; W mean {:.4}, |z| {zm:.2}",
        f.theta_tilde_hat, z, s.fibers.mean.value
    );
    if z.iter().all(|v| *v <= 4.0) && zm <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn criterion_6b() -> Check {
    let g = geom(6.0);
    let data = Dataset::new(ofa_dataset(), DataType::Ofa, &g).unwrap();
    let model = ModelSpec {
        family: Family::GeneralizedGamma,
        data_type: DataType::Ofa,
        geom: g,
    };
    let cfg = FitConfig {
        n_starts: 5,
        ..Default::default()
    };
    let f = fit(&data, &model, &cfg).map_err(|e| e.to_string())?;
    let se = f.se_tilde.clone().ok_or("no standard errors")?;
    let truth = ofa_truth().original();
    let idx = [0usize, 4, 5, 6];
    let z: Vec<f64> = idx.iter().map(|&i| (f.theta_tilde_hat[i] - truth[i]).abs() / se[i]).collect();
    let at_truth = loglik(&model, &ParamVector::encode(&ofa_truth()).unwrap(), &data, &cfg.quadrature, DerivOrder::Value)
        .map_err(|e| e.to_string())?
        .loglik;
    let msg = format!(
        "eps and fiber |z| {:.2?}; loglik {:.3} vs {:.3} at truth",
        z, f.loglik, at_truth
    );
    if z.iter().all(|v| *v <= 4.0) && f.loglik >= at_truth {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn criterion_7() -> Check {
    let ModelParams::Mixture(m) = published_ggd_mixture() else { unreachable!() };
    let t = tree_composition(&m, &geom(6.0), &QuadratureConfig::default()).map_err(|e| e.to_string())?;
    let msg = format!("eps_tilde = {:.4}", t.eps_tilde);
    if (t.eps_tilde - 0.34).abs() <= 0.005 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// KS statistics of 10 000 draws on each scale against numeric CDFs.
pub fn sampler_ks() -> Vec<(String, f64)> {
    let n = 10_000;
    let cfg = QuadratureConfig::default();
    let cases: Vec<(String, ModelParams, f64, Vec<Scale>)> = vec![
        ("ggd fibers".into(), micro_truth(), 2.5, vec![Scale::Y, Scale::W, Scale::V, Scale::X]),
        ("lognormal fibers".into(), ModelParams::Single(logn(0.8, 0.3)), 2.5, vec![Scale::Y, Scale::W, Scale::V, Scale::X]),
        ("ggd mixture".into(), ofa_truth(), 6.0, vec![Scale::Y, Scale::W, Scale::X]),
    ];
    let mut out = Vec::new();
    for (i, (name, p, r, scales)) in cases.into_iter().enumerate() {
        for (j, scale) in scales.into_iter().enumerate() {
            let part = match p {
                ModelParams::Single(_) => Part::Fibers,
                ModelParams::Mixture(_) => Part::Mixture,
            };
            let d = ScaleDensity::new(scale, part, &p, geom(r), cfg).unwrap();
            let s = simulate(scale, p, r, n, 1000 + 10 * i as u64 + j as u64);
            let ks = ks_statistic(&s, |sorted| cumulative(|x| if x > 0.0 { d.eval(x).unwrap() } else { 0.0 }, sorted, 1e-10));
            out.push((format!("{name} {}", scale.label()), ks));
        }
    }
    out
}

/// One-percent critical value of the two-sided KS statistic.
pub fn ks_critical(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

pub fn criterion_8() -> Check {
    let crit = ks_critical(10_000);
    let ks = sampler_ks();
    let worst = ks.iter().cloned().fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let msg = format!("{} samplers, largest D = {:.4} ({}), critical {crit:.4}", ks.len(), worst.1, worst.0);
    if worst.1 < crit {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------- command line ----------

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fiberfit")
}

pub struct RunOut {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str]) -> RunOut {
    let o = Command::new(bin()).args(args).output().expect("spawn fiberfit");
    RunOut {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

/// `(length, density)` rows of a density CSV.
pub fn parse_curve(csv: &str) -> Vec<(f64, f64)> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("length,density"));
    lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

/// A parsed `Estimate` / `Std. Error` table.
#[derive(Debug)]
pub struct Table {
    pub headers: Vec<String>,
    pub estimates: Vec<f64>,
    pub errors: Vec<Option<f64>>,
}

/// Parses the table following the line that starts with `title`.
pub fn parse_table(text: &str, title: &str) -> Option<Table> {
    let lines: Vec<&str> = text.lines().collect();
    let at = lines.iter().position(|l| l.starts_with(title))?;
    let headers: Vec<String> = lines.get(at + 1)?.split_whitespace().map(String::from).collect();
    let est_line = lines.get(at + 2)?.strip_prefix("Estimate")?;
    let se_line = lines.get(at + 3)?.strip_prefix("Std. Error")?;
    let estimates: Vec<f64> = est_line.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
    let errors: Vec<Option<f64>> = se_line
        .split_whitespace()
        .map(|t| if t == "NA" { Some(None) } else { t.parse().ok().map(Some) })
        .collect::<Option<_>>()?;
    (headers.len() == estimates.len() && headers.len() == errors.len()).then_some(Table {
        headers,
        estimates,
        errors,
    })
}

/// Checks the layout of a microscopy `summary.txt`.
pub fn check_summary_layout(text: &str) -> Result<(), String> {
    let params = parse_table(text, "Model parameters:").ok_or("parameter table does not parse")?;
    if params.headers != ["b_fibers", "d_fibers", "k_fibers"] {
        return Err(format!("unexpected parameter headers {:?}", params.headers));
    }
    let fib = parse_table(text, "Summary statistics for FIBER").ok_or("FIBER table does not parse")?;
    if fib.headers != ["Mean", "Std.dev.", "Skewness", "Kurtosis"] || fib.errors.iter().any(|e| e.is_none()) {
        return Err(format!("FIBER table incomplete: {fib:?}"));
    }
    let ll = text
        .lines()
        .find_map(|l| l.strip_prefix("-Loglik = "))
        .ok_or("no -Loglik line")?;
    ll.split_whitespace().next().and_then(|t| t.parse::<f64>().ok()).ok_or("-Loglik is not numeric")?;
    if !text.lines().any(|l| l.starts_with("Convergence: ")) {
        return Err("no convergence line".into());
    }
    Ok(())
}

pub fn criterion_9(dir: &Path) -> Check {
    let golden = [
        (vec!["density", "--scale", "y", "--par", "1.8,2.7,2.6", "--at", "2.5"], 0.6689186996, 1e-9),
        (vec!["density", "--scale", "y", "--par", "1.8,2.7,2.6", "--at", "5.0"], 0.0000692969, 1e-9),
        (vec!["density", "--scale", "y", "--model", "lognorm", "--par", "-2,0.5", "--at", "0.1"], 6.643761, 1e-6),
    ];
    for (args, want, tol) in &golden {
        let o = run_cli(args);
        if o.code != 0 {
            return Err(format!("{args:?} exited {}: {}", o.code, o.stderr));
        }
        let v = parse_curve(&o.stdout)[0].1;
        if (v - want).abs() > *tol {
            return Err(format!("{args:?} gave {v}, want {want}"));
        }
    }

    let sim = |name: &str| {
        let p = dir.join(name);
        let o = run_cli(&[
            "simulate", "--scale", "v", "--par", "2.4,3.3,1.5", "--r", "2.5", "--n", "300", "--seed", "11", "--out",
            p.to_str().unwrap(),
        ]);
        (o, p)
    };
    let (o1, p1) = sim("micro_a.txt");
    let (o2, p2) = sim("micro_b.txt");
    if o1.code != 0 || o2.code != 0 {
        return Err(format!("simulate failed: {} {}", o1.stderr, o2.stderr));
    }
    let (a, b) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    if a != b {
        return Err("simulate is not byte-identical across runs".into());
    }

    let out = dir.join("fit");
    let o = run_cli(&[
        "fit", "--data", p1.to_str().unwrap(), "--data-type", "microscopy", "--model", "ggamma", "--r", "2.5", "--out",
        out.to_str().unwrap(),
    ]);
    if o.code != 0 {
        return Err(format!("fit exited {}: {}", o.code, o.stderr));
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).map_err(|e| e.to_string())?;
    check_summary_layout(&summary)?;
    Ok("golden densities, byte-identical simulation, fit exit 0 with parseable summary".into())
}

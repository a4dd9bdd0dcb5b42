//! Log likelihoods of observed-length (OFA) and uncut-length (microscopy)
//! data, plus the uncensored mixture likelihood used for initialization,
//! with analytic gradients and Hessians in optimizer coordinates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densities::{
    jet_len, mix, Component, DerivOrder, Family, Layout, MixtureParams, ParamVector, Prepared,
};
use crate::error::{Error, Result};
use crate::geometry::CoreGeometry;
use crate::quadrature::QuadratureConfig;
use crate::scales::{uncut_mass, x_jets};

/// How the lengths were measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    /// Optical fiber analyzer: every cell in the core, cut or not (scale X).
    Ofa,
    /// Microscopy: uncut fibers only (scale V).
    Microscopy,
}

impl DataType {
    pub fn label(self) -> &'static str {
        match self {
            DataType::Ofa => "ofa",
            DataType::Microscopy => "microscopy",
        }
    }

    pub fn layout(self) -> Layout {
        match self {
            DataType::Ofa => Layout::Mixture,
            DataType::Microscopy => Layout::Single,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DataType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ofa" => Ok(DataType::Ofa),
            "microscopy" => Ok(DataType::Microscopy),
            _ => Err(Error::Domain(format!("unknown data type '{s}', expected ofa or microscopy"))),
        }
    }
}

/// Family, data type and core geometry of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub data_type: DataType,
    pub geom: CoreGeometry,
}

impl ModelSpec {
    pub fn layout(&self) -> Layout {
        self.data_type.layout()
    }

    pub fn n_params(&self) -> usize {
        ParamVector::expected_len(self.family, self.layout())
    }
}

/// Validated lengths (mm), all strictly inside `(0, 2r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<f64>,
    data_type: DataType,
}

impl Dataset {
    pub fn new(values: Vec<f64>, data_type: DataType, geom: &CoreGeometry) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidData {
                message: "dataset is empty".into(),
                indices: vec![],
            });
        }
        check_range(&values, geom)?;
        Ok(Self { values, data_type })
    }

    /// Parses one length per line. Blank lines and lines starting with `#`
    /// are skipped. Invalid entries are reported by 1-based line number.
    pub fn parse(text: &str, data_type: DataType, geom: &CoreGeometry) -> Result<Self> {
        let two_r = geom.diameter();
        let mut values = Vec::new();
        let mut bad = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            match t.parse::<f64>() {
                Ok(v) if v > 0.0 && v < two_r => values.push(v),
                _ => bad.push(i + 1),
            }
        }
        if !bad.is_empty() {
            return Err(Error::InvalidData {
                message: format!(
                    "lines must hold one length strictly inside (0, 2r) = (0, {two_r}); offending lines are listed"
                ),
                indices: bad,
            });
        }
        Self::new(values, data_type, geom)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn data_type(&self) -> DataType {
        self.data_type
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_range(values: &[f64], geom: &CoreGeometry) -> Result<()> {
    let two_r = geom.diameter();
    let bad: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !(**v > 0.0 && **v < two_r))
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidData {
            message: format!("every length must lie strictly inside (0, 2r) = (0, {two_r})"),
            indices: bad,
        })
    }
}

/// Log likelihood with optional derivatives in optimizer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodEvaluation {
    pub loglik: f64,
    pub gradient: Option<Vec<f64>>,
    /// Row-major, symmetric.
    pub hessian: Option<Vec<Vec<f64>>>,
    /// Per-observation terms in input order.
    pub per_point_loglik: Vec<f64>,
}

/// Dispatches on the model's data type.
pub fn loglik(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &Dataset,
    cfg: &QuadratureConfig,
    order: DerivOrder,
) -> Result<LikelihoodEvaluation> {
    match spec.data_type {
        DataType::Ofa => ofa_loglik(theta, data, &spec.geom, cfg, order),
        DataType::Microscopy => micro_loglik(theta, data, &spec.geom, cfg, order),
    }
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

fn check_layout(theta: &ParamVector, layout: Layout) -> Result<()> {
    if theta.layout != layout {
        return Err(Error::Domain(format!(
            "expected {layout:?} parameters, got {:?}",
            theta.layout
        )));
    }
    Ok(())
}

fn check_data(data: &Dataset, want: DataType) -> Result<()> {
    if data.data_type() != want {
        return Err(Error::Domain(format!(
            "{} likelihood needs {want} data, got {}",
            want,
            data.data_type()
        )));
    }
    Ok(())
}

/// Accumulates per-point derivatives of `ln(ε A + (1 − ε) B)`.
///
/// `ga`, `gb` hold the component gradients already divided by the mixture
/// density and weighted by `ε`, `1 − ε`; `ha`, `hb` the same for second
/// derivatives. `alpha`, `beta` are the posterior component weights.
struct MixtureAccumulator {
    p: usize,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

impl MixtureAccumulator {
    fn new(p: usize) -> Self {
        let n = 1 + 2 * p;
        Self {
            p,
            grad: vec![0.0; n],
            hess: vec![vec![0.0; n]; n],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn add(
        &mut self,
        eps: f64,
        alpha: f64,
        beta: f64,
        ga: &[f64],
        gb: &[f64],
        ha: Option<&[f64]>,
        hb: Option<&[f64]>,
    ) {
        let p = self.p;
        let mut g = vec![0.0; 1 + 2 * p];
        g[0] = (1.0 - eps) * alpha - eps * beta;
        g[1..1 + p].copy_from_slice(ga);
        g[1 + p..].copy_from_slice(gb);
        for (acc, v) in self.grad.iter_mut().zip(&g) {
            *acc += v;
        }
        let (Some(ha), Some(hb)) = (ha, hb) else { return };
        let h = &mut self.hess;
        h[0][0] += (1.0 - 2.0 * eps) * g[0] - g[0] * g[0];
        for j in 0..p {
            let fj = 1 + j;
            let bj = 1 + p + j;
            let v = (1.0 - eps) * g[fj] - g[0] * g[fj];
            h[0][fj] += v;
            h[fj][0] += v;
            let v = -eps * g[bj] - g[0] * g[bj];
            h[0][bj] += v;
            h[bj][0] += v;
        }
        for j in 0..p {
            for k in 0..p {
                h[1 + j][1 + k] += ha[j * p + k] - g[1 + j] * g[1 + k];
                h[1 + p + j][1 + p + k] += hb[j * p + k] - g[1 + p + j] * g[1 + p + k];
                let v = -g[1 + j] * g[1 + p + k];
                h[1 + j][1 + p + k] += v;
                h[1 + p + k][1 + j] += v;
            }
        }
    }
}

/// Observed log likelihood of OFA data, `Σ ln f_X(xᵢ; θ)`.
pub fn ofa_loglik(
    theta: &ParamVector,
    data: &Dataset,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    order: DerivOrder,
) -> Result<LikelihoodEvaluation> {
    check_layout(theta, Layout::Mixture)?;
    check_data(data, DataType::Ofa)?;
    let m = theta.decode_mixture()?;
    ofa_eval(&m, data, geom, cfg, order)
}

/// Observed OFA log likelihood at original-scale parameters. Accepts the
/// boundary proportions `ε ∈ {0, 1}`, where one component drops out.
pub fn ofa_loglik_at(
    m: &MixtureParams,
    data: &Dataset,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_data(data, DataType::Ofa)?;
    Ok(ofa_eval(m, data, geom, cfg, DerivOrder::Value)?.loglik)
}

fn ofa_eval(
    m: &MixtureParams,
    data: &Dataset,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    order: DerivOrder,
) -> Result<LikelihoodEvaluation> {
    cfg.validate()?;
    let values = data.values();
    check_range(values, geom)?;
    let idx = sorted_order(values);
    let xs: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    let p = m.family().component_dim();
    let jl = jet_len(p, order);
    let eps = m.eps;

    let jets = |c: &Component, active: bool| -> Result<Vec<Vec<f64>>> {
        if active {
            x_jets(c, geom, cfg, &xs, order)
        } else {
            Ok(vec![vec![0.0; jl]; xs.len()])
        }
    };
    let a = jets(&m.fines, eps > 0.0)?;
    let b = jets(&m.fibers, eps < 1.0)?;

    let mut per_point = vec![0.0; xs.len()];
    let mut total = 0.0;
    let mut acc = MixtureAccumulator::new(p);
    let mut ga = vec![0.0; p];
    let mut gb = vec![0.0; p];
    let mut ha = vec![0.0; p * p];
    let mut hb = vec![0.0; p * p];
    for (k, &i) in idx.iter().enumerate() {
        let f = mix(eps, a[k][0], b[k][0]);
        let ll = f.ln();
        if !ll.is_finite() {
            return Err(Error::Domain(format!(
                "observed density is {f} at x = {} (data index {i})",
                xs[k]
            )));
        }
        per_point[i] = ll;
        total += ll;
        if order == DerivOrder::Value {
            continue;
        }
        let wa = eps / f;
        let wb = (1.0 - eps) / f;
        for j in 0..p {
            ga[j] = wa * a[k][1 + j];
            gb[j] = wb * b[k][1 + j];
        }
        let hess = order == DerivOrder::Hessian;
        if hess {
            for j in 0..p * p {
                ha[j] = wa * a[k][1 + p + j];
                hb[j] = wb * b[k][1 + p + j];
            }
        }
        acc.add(
            eps,
            wa * a[k][0],
            wb * b[k][0],
            &ga,
            &gb,
            hess.then_some(&ha[..]),
            hess.then_some(&hb[..]),
        );
    }
    Ok(finish(total, per_point, acc, order))
}

fn finish(
    total: f64,
    per_point: Vec<f64>,
    acc: MixtureAccumulator,
    order: DerivOrder,
) -> LikelihoodEvaluation {
    LikelihoodEvaluation {
        loglik: total,
        gradient: (order >= DerivOrder::Gradient).then_some(acc.grad),
        hessian: (order == DerivOrder::Hessian).then_some(acc.hess),
        per_point_loglik: per_point,
    }
}

/// Log likelihood of OFA data under the simplifying assumption that no cell
/// is cut: `Σ ln(ε f_fines(xᵢ) + (1 − ε) f_fibers(xᵢ))` on the core scale.
pub fn init_loglik(theta: &ParamVector, data: &Dataset, order: DerivOrder) -> Result<LikelihoodEvaluation> {
    check_layout(theta, Layout::Mixture)?;
    let m = theta.decode_mixture()?;
    let values = data.values();
    if let Some(i) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidData {
            message: "lengths must be positive".into(),
            indices: vec![i],
        });
    }
    let p = m.family().component_dim();
    let fa = Prepared::new(&m.fines);
    let fb = Prepared::new(&m.fibers);
    let (ln_e, ln_1e) = (m.eps.ln(), (1.0 - m.eps).ln());
    let idx = sorted_order(values);

    let mut per_point = vec![0.0; values.len()];
    let mut total = 0.0;
    let mut acc = MixtureAccumulator::new(p);
    let mut ga = vec![0.0; p];
    let mut gb = vec![0.0; p];
    let mut ha = vec![0.0; p * p];
    let mut hb = vec![0.0; p * p];
    for &i in &idx {
        let u = values[i].ln();
        let la = fa.log_derivs(u, order);
        let lb = fb.log_derivs(u, order);
        let xa = ln_e + la.ln_f;
        let xb = ln_1e + lb.ln_f;
        let mx = xa.max(xb);
        let lf = mx + ((xa - mx).exp() + (xb - mx).exp()).ln();
        if !lf.is_finite() {
            return Err(Error::Domain(format!(
                "uncensored mixture density vanishes at y = {} (data index {i})",
                values[i]
            )));
        }
        per_point[i] = lf;
        total += lf;
        if order == DerivOrder::Value {
            continue;
        }
        let alpha = (xa - lf).exp();
        let beta = (xb - lf).exp();
        for j in 0..p {
            ga[j] = alpha * la.score[j];
            gb[j] = beta * lb.score[j];
        }
        let hess = order == DerivOrder::Hessian;
        if hess {
            for j in 0..p {
                for k in 0..p {
                    ha[j * p + k] = alpha * (la.score[j] * la.score[k] + la.hess[j][k]);
                    hb[j * p + k] = beta * (lb.score[j] * lb.score[k] + lb.hess[j][k]);
                }
            }
        }
        acc.add(
            m.eps,
            alpha,
            beta,
            &ga,
            &gb,
            hess.then_some(&ha[..]),
            hess.then_some(&hb[..]),
        );
    }
    Ok(finish(total, per_point, acc, order))
}

/// Log likelihood of uncut lengths, `Σ ln f_V(vᵢ) = Σ ln f_Y(vᵢ) + Σ ln p_UC(vᵢ) − n ln k_θ`.
/// The `p_UC` term does not depend on θ but keeps the value absolute.
pub fn micro_loglik(
    theta: &ParamVector,
    data: &Dataset,
    geom: &CoreGeometry,
    cfg: &QuadratureConfig,
    order: DerivOrder,
) -> Result<LikelihoodEvaluation> {
    check_layout(theta, Layout::Single)?;
    check_data(data, DataType::Microscopy)?;
    cfg.validate()?;
    let c = theta.decode_component()?;
    let values = data.values();
    check_range(values, geom)?;
    let p = c.dim();
    let k = uncut_mass(&c, geom, cfg, order)?;
    let k0 = k[0];
    if !(k0 > 0.0) {
        return Err(Error::Domain(
            "fiber density has no mass below the core diameter".into(),
        ));
    }
    let ln_k0 = k0.ln();
    let prep = Prepared::new(&c);
    let n = values.len() as f64;

    let mut per_point = vec![0.0; values.len()];
    let mut total = 0.0;
    let mut grad = vec![0.0; p];
    let mut hess = vec![vec![0.0; p]; p];
    for &i in &sorted_order(values) {
        let ld = prep.log_derivs(values[i].ln(), order);
        let ll = ld.ln_f + geom.prob_uncut_unchecked(values[i]).ln() - ln_k0;
        if !ll.is_finite() {
            return Err(Error::Domain(format!(
                "density vanishes at v = {} (data index {i})",
                values[i]
            )));
        }
        per_point[i] = ll;
        total += ll;
        if order >= DerivOrder::Gradient {
            for j in 0..p {
                grad[j] += ld.score[j];
            }
        }
        if order == DerivOrder::Hessian {
            for j in 0..p {
                for l in 0..p {
                    hess[j][l] += ld.hess[j][l];
                }
            }
        }
    }
    if order >= DerivOrder::Gradient {
        for j in 0..p {
            grad[j] -= n * k[1 + j] / k0;
        }
    }
    if order == DerivOrder::Hessian {
        for j in 0..p {
            for l in 0..p {
                hess[j][l] -= n * (k[1 + p + j * p + l] / k0 - k[1 + j] * k[1 + l] / (k0 * k0));
            }
        }
        for j in 0..p {
            for l in 0..j {
                let v = 0.5 * (hess[j][l] + hess[l][j]);
                hess[j][l] = v;
                hess[l][j] = v;
            }
        }
    }
    Ok(LikelihoodEvaluation {
        loglik: total,
        gradient: (order >= DerivOrder::Gradient).then_some(grad),
        hessian: (order == DerivOrder::Hessian).then_some(hess),
        per_point_loglik: per_point,
    })
}

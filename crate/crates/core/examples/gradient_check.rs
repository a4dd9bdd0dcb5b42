//! Compare the analytic gradient and Hessian of the observed-length mixture
//! log likelihood with central finite differences.

use fiberfit::densities::{Component, DerivOrder, GgdParams, MixtureParams, ModelParams, ParamVector};
use fiberfit::geometry::CoreGeometry;
use fiberfit::likelihood::{ofa_loglik, DataType, Dataset};
use fiberfit::quadrature::QuadratureConfig;
use fiberfit::scales::Scale;
use fiberfit::simulate::{sample, SimSpec};

fn main() -> fiberfit::error::Result<()> {
    let geom = CoreGeometry::new(6.0)?;
    let params = ModelParams::Mixture(MixtureParams::new(
        0.3,
        Component::Ggd(GgdParams::new(0.1, 1.5, 2.0)?),
        Component::Ggd(GgdParams::new(2.0, 2.8, 2.2)?),
    )?);
    let x = sample(&SimSpec {
        scale: Scale::X,
        params,
        geom,
        n: 500,
        seed: 2,
    })?;
    let data = Dataset::new(x, DataType::Ofa, &geom)?;
    let cfg = QuadratureConfig::default();
    let theta = ParamVector::encode(&params)?;

    let ev = ofa_loglik(&theta, &data, &geom, &cfg, DerivOrder::Hessian)?;
    let g = ev.gradient.unwrap();
    let h = ev.hessian.unwrap();
    let eval = |t: &ParamVector| ofa_loglik(t, &data, &geom, &cfg, DerivOrder::Gradient);

    println!("{:>3} {:>14} {:>14} {:>10} {:>12}", "j", "analytic", "central FD", "rel err", "Hess row err");
    for j in 0..theta.len() {
        let step = 1e-5;
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up.values[j] += step;
        dn.values[j] -= step;
        let (eu, ed) = (eval(&up)?, eval(&dn)?);
        let fd = (eu.loglik - ed.loglik) / (2.0 * step);
        let (gu, gd) = (eu.gradient.unwrap(), ed.gradient.unwrap());
        let row_err = (0..theta.len())
            .map(|k| ((gu[k] - gd[k]) / (2.0 * step) - h[j][k]).abs() / h[j][k].abs().max(1.0))
            .fold(0.0, f64::max);
        println!(
            "{j:>3} {:>14.6} {:>14.6} {:>10.2e} {:>12.2e}",
            g[j],
            fd,
            (g[j] - fd).abs() / g[j].abs().max(1.0),
            row_err
        );
    }
    Ok(())
}

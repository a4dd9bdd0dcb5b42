//! Proportion of fines and mean cell length in the standing tree, from a
//! published-style mixture estimate, with delta-method standard errors from
//! a made-up diagonal covariance.

use fiberfit::densities::{Component, GgdParams, MixtureParams, ModelParams, ParamVector};
use fiberfit::geometry::CoreGeometry;
use fiberfit::quadrature::QuadratureConfig;
use fiberfit::scales::tree_composition;
use fiberfit::summary::{plug_in_summary, tree_composition_gradient};

fn main() -> fiberfit::error::Result<()> {
    let geom = CoreGeometry::new(6.0)?;
    let cfg = QuadratureConfig::default();
    let m = MixtureParams::new(
        0.298,
        Component::Ggd(GgdParams::new(0.001, 0.2921, 5.2519)?),
        Component::Ggd(GgdParams::new(2.0014, 2.8224, 2.2236)?),
    )?;
    let t = tree_composition(&m, &geom, &cfg)?;
    println!("proportion of fines in the core:  {:.3}", m.eps);
    println!("proportion of fines in the tree:  {:.3}", t.eps_tilde);
    println!("mean fine length in the tree:     {:.4}", t.mean_w_fines);
    println!("mean fiber length in the tree:    {:.4}", t.mean_w_fibers);
    println!("mean cell length in the tree:     {:.4}", t.mean_w);

    let theta = ParamVector::encode(&ModelParams::Mixture(m))?;
    let g = tree_composition_gradient(&theta, &geom, &cfg)?;
    let var = [0.005, 0.5, 0.05, 0.2, 0.04, 0.04, 0.1];
    let cov: Vec<Vec<f64>> = (0..7)
        .map(|i| (0..7).map(|j| if i == j { var[i] } else { 0.0 }).collect())
        .collect();
    let se = (0..7).map(|i| g.eps_tilde[i] * g.eps_tilde[i] * var[i]).sum::<f64>().sqrt();
    println!("\nwith a diagonal covariance on the optimizer scale: se(eps_tilde) = {se:.4}");

    let s = plug_in_summary(&ModelParams::Mixture(m), &geom, &cfg, Some(&cov))?;
    let f = s.fibers;
    println!(
        "fibers: mean {:.4} ({:.4}), sd {:.4}, skewness {:.4}, kurtosis {:.4}",
        f.mean.value,
        f.mean.se.unwrap_or(f64::NAN),
        f.sd.value,
        f.skewness.value,
        f.kurtosis.value
    );
    Ok(())
}

//! Hold the shape parameters d of both components at 1 (gamma components)
//! and fit the rest, then compare with the unrestricted fit.

use fiberfit::densities::{Component, Family, GgdParams, MixtureParams, ModelParams};
use fiberfit::fit::{fit, FitConfig};
use fiberfit::geometry::CoreGeometry;
use fiberfit::likelihood::{DataType, Dataset, ModelSpec};
use fiberfit::scales::Scale;
use fiberfit::simulate::{sample, SimSpec};

fn main() -> fiberfit::error::Result<()> {
    let geom = CoreGeometry::new(6.0)?;
    let truth = ModelParams::Mixture(MixtureParams::new(
        0.3,
        Component::Ggd(GgdParams::new(0.1, 1.5, 2.0)?),
        Component::Ggd(GgdParams::new(2.0, 2.8, 2.2)?),
    )?);
    let x = sample(&SimSpec {
        scale: Scale::X,
        params: truth,
        geom,
        n: 2000,
        seed: 21,
    })?;
    let data = Dataset::new(x, DataType::Ofa, &geom)?;
    let model = ModelSpec {
        family: Family::GeneralizedGamma,
        data_type: DataType::Ofa,
        geom,
    };

    let restricted = FitConfig {
        par_start: Some(vec![0.5, 0.01, 1.0, 1.0, 2.0, 1.0, 1.0]),
        fixed: Some(vec![false, false, true, false, false, true, false]),
        ..Default::default()
    };
    let full = FitConfig::default();

    let a = fit(&data, &model, &restricted)?;
    let b = fit(&data, &model, &full)?;
    println!("{:>10} {:>12} {:>12}", "", "d fixed", "free");
    for (i, label) in a.labels.iter().enumerate() {
        let mark = if a.theta_hat.fixed[i] { "*" } else { " " };
        println!("{label:>10} {:>11.5}{mark} {:>12.5}", a.theta_tilde_hat[i], b.theta_tilde_hat[i]);
    }
    let lr = 2.0 * (b.loglik - a.loglik);
    println!("\nlikelihood ratio statistic (2 df): {lr:.3}");
    Ok(())
}

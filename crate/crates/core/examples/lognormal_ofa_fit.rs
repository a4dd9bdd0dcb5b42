//! Lognormal mixture on observed lengths, compared with the generalized
//! gamma mixture on the same data through their log likelihoods.

use fiberfit::densities::{Component, Family, LognParams, MixtureParams, ModelParams};
use fiberfit::fit::{fit, FitConfig};
use fiberfit::geometry::CoreGeometry;
use fiberfit::likelihood::{DataType, Dataset, ModelSpec};
use fiberfit::scales::Scale;
use fiberfit::simulate::{sample, SimSpec};

fn main() -> fiberfit::error::Result<()> {
    let geom = CoreGeometry::new(6.0)?;
    let truth = ModelParams::Mixture(MixtureParams::new(
        0.3,
        Component::Logn(LognParams::new(-1.6, 1.0)?),
        Component::Logn(LognParams::new(0.9, 0.25)?),
    )?);
    let x = sample(&SimSpec {
        scale: Scale::X,
        params: truth,
        geom,
        n: 2000,
        seed: 3,
    })?;
    let data = Dataset::new(x, DataType::Ofa, &geom)?;
    let cfg = FitConfig::default();

    for family in [Family::Lognormal, Family::GeneralizedGamma] {
        let model = ModelSpec {
            family,
            data_type: DataType::Ofa,
            geom,
        };
        let r = fit(&data, &model, &cfg)?;
        println!("{family}: -loglik {:.3} ({})", -r.loglik, r.convergence.label());
        for (i, label) in r.labels.iter().enumerate() {
            let se = r.se_tilde.as_ref().map_or(f64::NAN, |s| s[i]);
            println!("  {label:>10} {:>10.5} ({se:.5})", r.theta_tilde_hat[i]);
        }
    }
    Ok(())
}

//! Fit a generalized gamma fines/fibers mixture to simulated optical fiber
//! analyzer data: every cell in the core, cut or not.

use std::time::Instant;

use fiberfit::cli::format_summary;
use fiberfit::densities::{Component, DerivOrder, Family, GgdParams, MixtureParams, ModelParams, ParamVector};
use fiberfit::fit::{fit, FitConfig};
use fiberfit::geometry::CoreGeometry;
use fiberfit::likelihood::{loglik, DataType, Dataset, ModelSpec};
use fiberfit::scales::Scale;
use fiberfit::simulate::{sample, SimSpec};
use fiberfit::summary::summary_stats;

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
        n: 3000,
        seed: 5,
    })?;
    let data = Dataset::new(x, DataType::Ofa, &geom)?;
    let model = ModelSpec {
        family: Family::GeneralizedGamma,
        data_type: DataType::Ofa,
        geom,
    };
    let cfg = FitConfig::default();

    let at_truth = loglik(&model, &ParamVector::encode(&truth)?, &data, &cfg.quadrature, DerivOrder::Value)?;
    let t = Instant::now();
    let result = fit(&data, &model, &cfg)?;
    let elapsed = t.elapsed();
    let stats = summary_stats(&result, &cfg.quadrature)?;

    print!("{}", format_summary(&result, Some(&stats)));
    println!("\nloglik at the generating parameters: {:.3}", at_truth.loglik);
    for s in &result.starts {
        println!(
            "start {}: loglik {:?}, {} iterations",
            s.index, s.loglik, s.iterations
        );
    }
    println!("fit time: {:.2?}", elapsed);
    Ok(())
}

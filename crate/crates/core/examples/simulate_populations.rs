//! Draw the same fiber population on all four scales and compare sample
//! means with the model: cutting shortens observed lengths, the uncut
//! sample favors short fibers, and the tree sample undoes the core's
//! length bias.

use fiberfit::densities::{Component, GgdParams, ModelParams};
use fiberfit::geometry::CoreGeometry;
use fiberfit::quadrature::QuadratureConfig;
use fiberfit::scales::{mean_w_component, Scale};
use fiberfit::simulate::{sample, SimSpec};

fn main() -> fiberfit::error::Result<()> {
    let c = Component::Ggd(GgdParams::new(2.4, 3.3, 1.5)?);
    let geom = CoreGeometry::new(2.5)?;
    for scale in [Scale::Y, Scale::W, Scale::X, Scale::V] {
        let s = sample(&SimSpec {
            scale,
            params: ModelParams::Single(c),
            geom,
            n: 20_000,
            seed: 1,
        })?;
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let max = s.iter().cloned().fold(0.0, f64::max);
        println!("{:>2}: mean {mean:.4}  max {max:.4}", scale.label());
    }
    let mw = mean_w_component(&c, &geom, &QuadratureConfig::default())?;
    println!("model E(W) = {mw:.4}");
    Ok(())
}

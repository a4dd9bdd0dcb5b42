//! Fiber length densities on the core (Y), tree (W), observed (X) and
//! uncut (V) scales for one generalized gamma component.

use fiberfit::densities::{Component, GgdParams, ModelParams};
use fiberfit::geometry::CoreGeometry;
use fiberfit::quadrature::QuadratureConfig;
use fiberfit::scales::{Part, Scale, ScaleDensity};

fn main() -> fiberfit::error::Result<()> {
    let fibers = ModelParams::Single(Component::Ggd(GgdParams::new(2.4, 3.3, 1.5)?));
    let geom = CoreGeometry::new(2.5)?;
    let cfg = QuadratureConfig::default();

    let densities: Vec<ScaleDensity> = Scale::ALL
        .iter()
        .map(|&s| ScaleDensity::new(s, Part::Fibers, &fibers, geom, cfg))
        .collect::<Result<_, _>>()?;

    let xs: Vec<f64> = (1..=12).map(|i| i as f64 * 0.4).collect();
    let cols: Vec<Vec<f64>> = densities.iter().map(|d| d.eval_many(&xs)).collect::<Result<_, _>>()?;

    print!("{:>6}", "length");
    for d in &densities {
        print!("{:>12}", format!("f_{}", d.scale().label().to_uppercase()));
    }
    println!();
    for (i, x) in xs.iter().enumerate() {
        print!("{x:>6.2}");
        for c in &cols {
            print!("{:>12.6}", c[i]);
        }
        println!();
    }
    Ok(())
}

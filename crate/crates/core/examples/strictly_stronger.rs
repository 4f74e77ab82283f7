//! ẋ = x² − y², ẏ = 4xy²: the image of f covers a neighbourhood of zero
//! (Brockett passes) and the zero has index 0, yet the shear adversary
//! ε(∂x − x∂y) still separates, so the origin cannot be stabilized.

use obstructa::config::SystemConfig;
use obstructa::degree::{index_of_zero, PlanarField};
use obstructa::obstruction::{adversary_intersection_test, brockett_image_test, eps_key};
use obstructa::{ModelSpace, Point};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = SystemConfig::builtin("ex3_field").expect("builtin").load()?;
    let f = sys.control.as_ref().expect("first-order dynamics");
    let w = sys.region("W")?;
    let opts = sys.search_options(None);

    let field = PlanarField::parse("x^2 - y^2", "4*x*y^2")?;
    let origin = Point::new(&ModelSpace::plane(), vec![0.0, 0.0])?;
    println!("index at origin: {}", index_of_zero(&field, &origin, 0.5)?);

    let b = brockett_image_test(f, w, 0.1, 5, &opts)?;
    let worst = b.targets.iter().map(|t| t.best_residual).fold(0.0, f64::max);
    println!("image test: covered = {} (worst residual {worst:.1e})", b.covered);

    let eps = [0.1, 0.01, 0.001];
    let rep = adversary_intersection_test(f, sys.adversary("shear")?, w, &eps, Some(1), &opts)?;
    for e in eps {
        println!("eps = {e:<6} residual {:.4e}", rep.evidence(&eps_key(e)).unwrap_or(f64::NAN));
    }
    println!("adversary verdict: {:?}", rep.verdict);
    Ok(())
}

//! Artstein's circles: f(z) = z² has degree 2 around the origin, so the
//! planar Coron test rules out stabilization; a sink has degree 1 and the
//! test stays silent.

use obstructa::degree::coron_h1_test;
use obstructa::dynamics::VectorField;
use obstructa::obstruction::ControlSystem;
use obstructa::ModelSpace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plane = ModelSpace::plane();
    for (name, p, q) in [("artstein", "x^2 - y^2", "2*x*y"), ("sink", "-x", "-y")] {
        let sys = ControlSystem::autonomous(&VectorField::parse(&plane, &[p, q])?);
        let rep = coron_h1_test(&sys, f64::INFINITY, 1.0)?;
        println!("{name:<9} degree {:>2}  {:?}", rep.evidence("degree").unwrap_or(f64::NAN), rep.verdict);
    }
    Ok(())
}

//! Euler characteristics three ways: GF(2) cell complexes, the surface
//! classification, and planar regions with obstacles.

use obstructa::topology::{classify_surface_euler, region_euler_char, CellComplex, SurfaceDescriptor};
use obstructa::{ModelSpace, Region};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, c) in [
        ("point", CellComplex::point()),
        ("circle", CellComplex::circle()),
        ("torus", CellComplex::torus()),
        ("sphere", CellComplex::sphere2()),
        ("cone(torus)", CellComplex::torus().cone()),
        ("torus v circle", CellComplex::torus().wedge(&CellComplex::circle())),
    ] {
        println!("{name:<15} chi = {:>2}  betti = {:?}", c.euler_char_cells(), c.betti_numbers());
    }

    for (orientable, genus, boundary_components, name) in [
        (true, 0, 0, "sphere"),
        (true, 0, 2, "cylinder"),
        (false, 1, 1, "Moebius band"),
        (false, 2, 0, "Klein bottle"),
        (true, 2, 1, "genus-2, one hole"),
    ] {
        let s = SurfaceDescriptor { orientable, genus, boundary_components };
        println!("{name:<18} chi = {:>2}", classify_surface_euler(s)?);
    }

    let plane = ModelSpace::plane();
    let mut r = Region::annulus(&plane, [0.0, 0.0], 1.0, 4.0)?;
    println!("annulus              chi = {}", region_euler_char(&r)?);
    for k in 0..3 {
        let a = std::f64::consts::TAU * k as f64 / 3.0;
        r = r.with_obstacle(vec![2.5 * a.cos(), 2.5 * a.sin()], 0.5)?;
        println!("  + obstacle {}         chi = {}", k + 1, region_euler_char(&r)?);
    }
    Ok(())
}

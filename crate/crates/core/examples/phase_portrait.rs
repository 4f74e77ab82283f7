//! Writes `artstein.svg`: streamlines of z ↦ z², widths by speed.

use obstructa::degree::PlanarField;
use obstructa::portrait::{portrait, PortraitOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = PlanarField::parse("x^2 - y^2", "2*x*y")?;
    let p = portrait(
        &f,
        &PortraitOptions {
            window: [-2.0, 2.0, -2.0, 2.0],
            density: 16,
            ..Default::default()
        },
    )?;
    let out = std::env::args().nth(1).unwrap_or_else(|| "artstein.svg".into());
    std::fs::write(&out, p.to_svg())?;
    println!("{} streamlines, {} polylines -> {out}", p.streamlines.len(), p.segments().len());
    Ok(())
}

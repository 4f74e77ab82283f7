//! The Heisenberg integrator: (0, 0, c) is not in the image of f, so the
//! image test fails, and the adversary X_ε = ε∂z stays a fixed fraction
//! ε/√3 away from f on the unit box for every ε.

use obstructa::config::SystemConfig;
use obstructa::obstruction::{adversary_intersection_test, brockett_image_test, stabilizability_verdict, Finding};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = SystemConfig::builtin("heisenberg").expect("builtin").load()?;
    let f = sys.control.as_ref().expect("first-order dynamics");
    let w = sys.region("unit-box")?;
    let opts = sys.search_options(None);

    let b = brockett_image_test(f, w, 0.1, 5, &opts)?;
    println!("image covers the 0.1-disk grid: {} ({} targets)", b.covered, b.targets.len());

    let eps = [0.1, 0.01, 0.001];
    let rep = adversary_intersection_test(f, sys.adversary("z")?, w, &eps, Some(1), &opts)?;
    for e in eps {
        let r = rep.evidence(&obstructa::obstruction::eps_key(e)).unwrap_or(f64::NAN);
        println!("eps = {e:<6} min |f - X_eps| = {r:.6e}   (eps/sqrt 3 = {:.6e})", e / 3f64.sqrt());
    }
    let verdict = stabilizability_verdict(Some(1), &[Finding::from_adversary_report(&rep)]);
    println!("stabilize the origin: {:?}", verdict.verdict);
    Ok(())
}

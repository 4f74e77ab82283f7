//! A camera-carrying unicycle must look away from the centre while staying
//! in an annulus with n obstacles. χ = -n ≠ 0 and the sideways adversary
//! is never matched, so no continuous feedback renders the set safe.

use obstructa::config::SystemConfig;
use obstructa::obstruction::safety_test;
use obstructa::topology::region_euler_char;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = SystemConfig::builtin("unicycle").expect("builtin").load()?;
    let f = sys.control.as_ref().expect("first-order dynamics");
    let x = sys.adversary("camera")?;
    let opts = sys.search_options(None);
    for name in ["annulus", "camera-n1", "camera-n2", "camera-n3"] {
        let s = sys.region(name)?;
        let rep = safety_test(f, s, x, &[0.1, 0.01], &opts)?;
        println!("{name:<10} chi = {:>2}  {:?}", region_euler_char(s)?, rep.verdict);
    }
    Ok(())
}

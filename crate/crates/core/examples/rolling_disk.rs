//! Vertical rolling disk driven by a constant rolling torque, compared with
//! its closed form; then the transversality test that rules out
//! stabilizing a point.

use obstructa::dynamics::VectorField;
use obstructa::lagrange::{
    rolling_disk_oracle, simulate_constrained, transversality_test, ConstrainedState, ControlSchedule,
    LagrangianSystem,
};
use obstructa::Point;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LagrangianSystem::rolling_disk(1.0, 1.0, 1.0, 1.0)?;
    let s0 = ConstrainedState::at_rest(&sys, Point::new(sys.space(), vec![0.0; 4])?)?;
    // controls are [u_phi, u_theta]
    let run = simulate_constrained(&sys, &s0, &ControlSchedule::constant(vec![0.0, 1.0]), 2.0, 1e-3, false)?;
    let (q, v) = run.final_state();
    println!("q(2) = {q:.8?}\nv(2) = {v:.8?}");
    println!("closed form   {:.8?}", rolling_disk_oracle(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 2.0, [0.0; 4]));
    println!(
        "max |A v| = {:.1e}, max energy-balance error = {:.1e}",
        run.max_constraint_residual, run.max_energy_error
    );

    let y = VectorField::parse(sys.space(), &["sin(phi)", "-cos(phi)", "0", "0"])?;
    let samples: Vec<Point> = (0..200)
        .map(|k| {
            let t = k as f64 * 0.37;
            Point::new(sys.space(), vec![t.sin(), t.cos(), t, 2.0 * t])
        })
        .collect::<Result<_, _>>()?;
    println!("sideways field transverse to the constraints: {}", transversality_test(&sys, &y, &samples)?);
    Ok(())
}

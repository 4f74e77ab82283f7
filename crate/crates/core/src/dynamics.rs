//! Flows of vector fields on model spaces: fixed-step RK4 integration,
//! attractor estimates, Lyapunov decrease checks and strict positive
//! invariance checks.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{parse_expr, CompiledExpr, EvalError, ParseError, ScalarExpr};
use crate::linalg::dot;
use crate::space::{Containment, ModelSpace, Point, Region, SpaceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("vector field has {got} components for a {expected}-dimensional space")]
    Arity { expected: usize, got: usize },
    #[error("invalid time parameters: T = {t}, h = {h}")]
    BadStep { t: f64, h: f64 },
    #[error("state became non-finite at t = {time}; last finite state {last:?}")]
    BlowUp { time: f64, last: Vec<f64> },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A vector field given by one expression per coordinate.
#[derive(Debug, Clone)]
pub struct VectorField {
    space: ModelSpace,
    components: Vec<ScalarExpr>,
    compiled: Vec<CompiledExpr>,
}

impl VectorField {
    pub fn new(space: &ModelSpace, components: Vec<ScalarExpr>) -> Result<Self, DynamicsError> {
        if components.len() != space.dim() {
            return Err(DynamicsError::Arity {
                expected: space.dim(),
                got: components.len(),
            });
        }
        let names = space.names();
        let compiled = components
            .iter()
            .map(|c| c.compile(&names))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            space: space.clone(),
            components,
            compiled,
        })
    }

    /// Parse one component per coordinate.
    pub fn parse(space: &ModelSpace, components: &[&str]) -> Result<Self, DynamicsError> {
        let exprs = components
            .iter()
            .map(|c| parse_expr(c))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(space, exprs)
    }

    pub fn zero(space: &ModelSpace) -> Self {
        Self::new(space, vec![ScalarExpr::zero(); space.dim()]).expect("constant field")
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, c) in out.iter_mut().zip(&self.compiled) {
            *o = c.eval(x)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.compiled.iter().map(|c| c.eval(x)).collect()
    }

    /// Lie derivative `L_F V = Σ ∂V/∂x_i F_i` as an expression.
    pub fn lie_derivative(&self, v: &ScalarExpr) -> ScalarExpr {
        self.space
            .names()
            .iter()
            .zip(&self.components)
            .fold(ScalarExpr::zero(), |acc, (name, f)| {
                ScalarExpr::add(acc, ScalarExpr::mul(v.differentiate(name), f.clone()))
            })
    }
}

/// One classical RK4 step of `x' = f(x)` in place.
pub fn rk4_step<F, E>(f: &F, x: &mut [f64], h: f64) -> Result<(), E>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), E>,
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(x, &mut k1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(&tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(&tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f(&tmp, &mut k4)?;
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Number of uniform steps covering `[0, t]` with step at most `h`.
pub fn step_count(t: f64, h: f64) -> Result<usize, DynamicsError> {
    if !(t > 0.0 && h > 0.0 && h <= t && t.is_finite()) {
        return Err(DynamicsError::BadStep { t, h });
    }
    Ok(((t / h) - 1e-9).ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
}

impl Trajectory {
    pub fn last(&self) -> &Point {
        self.states.last().expect("trajectories are nonempty")
    }

    /// CSV with header `t,<coordinate names>`, one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names = self.last().space().names();
        let _ = writeln!(out, "t,{}", names.join(","));
        for (t, p) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = p.coords().iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{t},{}", row.join(","));
        }
        out
    }
}

/// Integrate `F` from `x0` over `[0, t]` with classical RK4. The step is
/// `t / ceil(t / h)` (at most `h`), so the final time equals `t`. Angle
/// coordinates are wrapped after every step.
pub fn integrate(f: &VectorField, x0: &Point, t: f64, h: f64) -> Result<Trajectory, DynamicsError> {
    if x0.space() != f.space() {
        return Err(SpaceError::SpaceMismatch.into());
    }
    let n = step_count(t, h)?;
    let dt = t / n as f64;
    let space = f.space().clone();
    let rhs = |x: &[f64], out: &mut [f64]| f.eval_into(x, out);
    let mut x = x0.coords().to_vec();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0.clone());
    for k in 1..=n {
        let prev = x.clone();
        let ok = rk4_step(&rhs, &mut x, dt).is_ok() && x.iter().all(|v| v.is_finite());
        if !ok {
            return Err(DynamicsError::BlowUp {
                time: (k - 1) as f64 * dt,
                last: prev,
            });
        }
        space.canonicalize(&mut x);
        times.push(if k == n { t } else { k as f64 * dt });
        states.push(Point::new(&space, x.clone())?);
    }
    Ok(Trajectory { times, states })
}

/// Endpoint of the flow only, without storing the trajectory.
pub fn flow(f: &VectorField, x0: &[f64], t: f64, h: f64) -> Result<Vec<f64>, DynamicsError> {
    let n = step_count(t, h)?;
    let dt = t / n as f64;
    let rhs = |x: &[f64], out: &mut [f64]| f.eval_into(x, out);
    let mut x = x0.to_vec();
    for k in 0..n {
        let prev = x.clone();
        if rk4_step(&rhs, &mut x, dt).is_err() || !x.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::BlowUp {
                time: k as f64 * dt,
                last: prev,
            });
        }
        f.space().canonicalize(&mut x);
    }
    Ok(x)
}

/// Discrete approximation of `⋂_{t>0} Φ^t(U)` at a finite horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorEstimate {
    pub points: Vec<Point>,
    pub spacing: f64,
    pub horizon: f64,
    /// Grid points whose trajectory blew up before the horizon.
    pub dropped: usize,
}

/// Keep the cell-centred grid points of `U` lying within one grid spacing
/// of the time-`t_max` image of the grid. Only the horizon `t_max` is
/// certified, not the infinite intersection.
pub fn attractor_estimate(
    f: &VectorField,
    u: &Region,
    grid_n: usize,
    t_max: f64,
    h: f64,
) -> Result<AttractorEstimate, DynamicsError> {
    step_count(t_max, h)?;
    let (grid, spacing) = u.interior_grid(grid_n);
    let images: Vec<Option<Vec<f64>>> = grid
        .par_iter()
        .map(|p| flow(f, p.coords(), t_max, h).ok())
        .collect();
    let dropped = images.iter().filter(|i| i.is_none()).count();
    let images: Vec<Vec<f64>> = images.into_iter().flatten().collect();
    let space = f.space();
    let points = grid
        .par_iter()
        .filter(|g| {
            images
                .iter()
                .any(|img| space.distance(g.coords(), img) < spacing)
        })
        .cloned()
        .collect();
    Ok(AttractorEstimate {
        points,
        spacing,
        horizon: t_max,
        dropped,
    })
}

/// Candidate Lyapunov function; its zero set is the candidate attractor.
#[derive(Debug, Clone)]
pub struct LyapunovCandidate {
    pub v: ScalarExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    /// Smallest `L_F V` over samples with `V > 0`.
    pub min_decay: f64,
    /// Largest `L_F V` over samples with `V > 0`; must be `< -1e-12`.
    pub worst_decay: f64,
    pub samples: usize,
    /// Samples where `V < 0`, which disqualifies the candidate.
    pub negative_values: usize,
    pub pass: bool,
}

/// Samples with `V` at or below this count as lying on the zero set.
pub const LYAPUNOV_ZERO: f64 = 1e-12;
pub const LYAPUNOV_DECAY_TOL: f64 = -1e-12;

pub fn lyapunov_check(
    cand: &LyapunovCandidate,
    f: &VectorField,
    r: &Region,
    n: usize,
) -> Result<LyapunovReport, DynamicsError> {
    let names = f.space().names();
    let v = cand.v.compile(&names)?;
    let lie = f.lie_derivative(&cand.v).compile(&names)?;
    let mut min_decay = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    let mut negative = 0;
    let mut checked = 0;
    for p in r.sample_interior(n, 0) {
        let x = p.coords();
        let vx = v.eval(x)?;
        if vx < -LYAPUNOV_ZERO {
            negative += 1;
        }
        if vx <= LYAPUNOV_ZERO {
            continue;
        }
        let l = lie.eval(x)?;
        min_decay = min_decay.min(l);
        worst = worst.max(l);
        checked += 1;
    }
    Ok(LyapunovReport {
        min_decay,
        worst_decay: worst,
        samples: checked,
        negative_values: negative,
        pass: negative == 0 && checked > 0 && worst < LYAPUNOV_DECAY_TOL,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// `F · n < -1e-10` at every boundary sample.
    pub inward_ok: bool,
    /// Every boundary sample flows strictly into the interior by `t_probe`.
    pub flow_ok: bool,
    /// Largest `F · n` over the boundary samples.
    pub max_normal_component: f64,
    pub samples: usize,
    pub t_probe: f64,
}

impl InvarianceReport {
    pub fn pass(&self) -> bool {
        self.inward_ok && self.flow_ok
    }
}

pub const INWARD_TOL: f64 = -1e-10;

pub fn strict_invariance_check(
    f: &VectorField,
    s: &Region,
    n_boundary: usize,
    t_probe: f64,
    h: f64,
) -> Result<InvarianceReport, DynamicsError> {
    let samples = s.sample_boundary(n_boundary)?;
    let normals: Vec<f64> = samples
        .iter()
        .map(|b| Ok(dot(&f.eval(b.point.coords())?, &b.outward_normal)))
        .collect::<Result<_, EvalError>>()?;
    let max_normal = normals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let landed: Vec<Result<Containment, DynamicsError>> = samples
        .par_iter()
        .map(|b| Ok(s.classify(&flow(f, b.point.coords(), t_probe, h)?)))
        .collect();
    let mut flow_ok = true;
    for l in landed {
        flow_ok &= l? == Containment::Interior;
    }
    Ok(InvarianceReport {
        inward_ok: max_normal < INWARD_TOL,
        flow_ok,
        max_normal_component: max_normal,
        samples: samples.len(),
        t_probe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn plane_field(c: &[&str]) -> VectorField {
        VectorField::parse(&ModelSpace::plane(), c).unwrap()
    }

    fn limit_cycle() -> VectorField {
        plane_field(&["x*(1 - x^2 - y^2) - y", "y*(1 - x^2 - y^2) + x"])
    }

    #[test]
    fn zero_field_is_constant() {
        let s = ModelSpace::plane();
        let x0 = Point::new(&s, vec![0.3, -0.2]).unwrap();
        let tr = integrate(&VectorField::zero(&s), &x0, 1.0, 0.1).unwrap();
        assert!(tr.states.iter().all(|p| p == &x0));
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn exponential_decay() {
        let s = ModelSpace::euclidean(&["x"]).unwrap();
        let f = VectorField::parse(&s, &["-x"]).unwrap();
        let tr = integrate(&f, &Point::new(&s, vec![1.0]).unwrap(), 1.0, 1e-3).unwrap();
        assert!((tr.last().coords()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn rotation_returns_home() {
        let f = plane_field(&["y", "-x"]);
        let x0 = Point::new(&ModelSpace::plane(), vec![1.0, 0.0]).unwrap();
        let tr = integrate(&f, &x0, TAU, 1e-3).unwrap();
        let end = tr.last().coords();
        assert!((end[0] - 1.0).abs() < 1e-6 && end[1].abs() < 1e-6);
        let r = (end[0].powi(2) + end[1].powi(2)).sqrt();
        assert!((r - 1.0).abs() < 1e-8);
    }

    #[test]
    fn angles_wrap_during_integration() {
        let s = ModelSpace::new(vec![crate::space::Factor::angle("th")]).unwrap();
        let f = VectorField::parse(&s, &["1"]).unwrap();
        let tr = integrate(&f, &Point::new(&s, vec![6.0]).unwrap(), 1.0, 0.01).unwrap();
        assert!((tr.last().coords()[0] - (7.0 - TAU)).abs() < 1e-12);
    }

    #[test]
    fn blow_up_is_reported() {
        let s = ModelSpace::euclidean(&["x"]).unwrap();
        let f = VectorField::parse(&s, &["x^2"]).unwrap();
        let err = integrate(&f, &Point::new(&s, vec![1.0]).unwrap(), 2.0, 1e-2).unwrap_err();
        match err {
            DynamicsError::BlowUp { time, last } => {
                assert!(time > 0.9 && time < 1.2 && last[0].is_finite(), "{time}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_steps_rejected() {
        let s = ModelSpace::euclidean(&["x"]).unwrap();
        let x0 = Point::new(&s, vec![1.0]).unwrap();
        let f = VectorField::zero(&s);
        assert!(integrate(&f, &x0, 0.0, 0.1).is_err());
        assert!(integrate(&f, &x0, 1.0, 2.0).is_err());
        assert!(VectorField::parse(&s, &["x", "x"]).is_err());
        assert!(VectorField::parse(&s, &["y"]).is_err());
    }

    #[test]
    fn csv_export() {
        let s = ModelSpace::plane();
        let tr = integrate(
            &VectorField::zero(&s),
            &Point::new(&s, vec![1.0, 2.0]).unwrap(),
            1.0,
            0.5,
        )
        .unwrap();
        assert_eq!(tr.to_csv(), "t,x,y\n0,1,2\n0.5,1,2\n1,1,2\n");
    }

    #[test]
    fn sink_attractor_is_origin() {
        let est = attractor_estimate(&plane_field(&["-x", "-y"]), &Region::unit_disk(), 20, 10.0, 0.01)
            .unwrap();
        assert!(!est.points.is_empty());
        for p in &est.points {
            assert!(crate::linalg::norm(p.coords()) <= 2.0 * est.spacing);
        }
    }

    #[test]
    fn repeller_has_empty_estimate() {
        let est = attractor_estimate(&plane_field(&["x", "y"]), &Region::unit_disk(), 20, 5.0, 0.01)
            .unwrap();
        assert!(est.points.is_empty());
    }

    #[test]
    fn lyapunov_examples() {
        let v = LyapunovCandidate {
            v: crate::expr::parse_expr("x^2 + y^2").unwrap(),
        };
        let rep = lyapunov_check(&v, &plane_field(&["-x", "-y"]), &Region::unit_disk(), 200).unwrap();
        assert!(rep.pass);
        assert!(rep.worst_decay < 0.0 && rep.min_decay >= -2.0);
        let rep = lyapunov_check(&v, &plane_field(&["-y", "x"]), &Region::unit_disk(), 200).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn lyapunov_off_the_cycle() {
        let v = LyapunovCandidate {
            v: crate::expr::parse_expr("(x^2 + y^2 - 1)^2").unwrap(),
        };
        let ann = Region::annulus(&ModelSpace::plane(), [0.0, 0.0], 0.5, 1.5).unwrap();
        let rep = lyapunov_check(&v, &limit_cycle(), &ann, 500).unwrap();
        assert!(rep.pass, "{rep:?}");
        // L_F V = -4 r^2 (r^2 - 1)^2 by hand.
        let lie = limit_cycle().lie_derivative(&v.v);
        let oracle = crate::expr::parse_expr("-4*(x^2+y^2)*(x^2+y^2-1)^2").unwrap();
        for p in ann.sample_interior(50, 3) {
            let a: crate::expr::VarAssignment =
                [("x", p.coords()[0]), ("y", p.coords()[1])].into_iter().collect();
            assert!((lie.eval(&a).unwrap() - oracle.eval(&a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn invariance_examples() {
        let d = Region::unit_disk();
        let rep = strict_invariance_check(&plane_field(&["-x", "-y"]), &d, 32, 1.0, 0.01).unwrap();
        assert!(rep.inward_ok && rep.flow_ok);
        let rep = strict_invariance_check(&plane_field(&["x", "y"]), &d, 32, 1.0, 0.01).unwrap();
        assert!(!rep.inward_ok && !rep.pass());
        let ann = Region::annulus(&ModelSpace::plane(), [0.0, 0.0], 0.5, 1.5).unwrap();
        let rep = strict_invariance_check(&limit_cycle(), &ann, 32, 1.0, 0.01).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }
}

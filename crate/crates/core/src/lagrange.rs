//! Nonholonomically constrained Lagrangian mechanics in coordinate
//! multiplier form.
//!
//! For `L = ½ q̇ᵀ M(q) q̇ − U(q)` with constraints `A(q) q̇ = 0` and control
//! covector `F = Σ u_j g^j`, the accelerations and multipliers solve
//!
//! ```text
//! [ M  −Aᵀ ] [ q̈ ]   [ b(q, v) + F ]
//! [ A   0  ] [ λ  ] = [    −Ȧ v     ]
//! ```
//!
//! with `b_i = −Σ ∂_l M_ij v_l v_j + ½ Σ ∂_i M_jl v_j v_l − ∂_i U`. All
//! derivatives are taken symbolically, so constraint drift comes from time
//! discretization alone.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::{rk4_step, step_count, DynamicsError, Trajectory, VectorField};
use crate::expr::{parse_expr, CompiledMap, EvalError, ParseError, ScalarExpr};
use crate::linalg::{condition_number, dot, min_symmetric_eigenvalue, norm, singular_values};
use crate::space::{Factor, ModelSpace, Point, SpaceError};

/// Eigenvalue / singular value floor for regularity.
pub const REGULARITY_TOL: f64 = 1e-10;
/// Velocities must satisfy `|A v| ≤` this at construction.
pub const CONSTRAINT_TOL: f64 = 1e-8;
const KKT_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LagrangeError {
    #[error("mass matrix must be {n}x{n}")]
    MassShape { n: usize },
    #[error("mass matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("constraint matrix rows must have {n} entries")]
    ConstraintShape { n: usize },
    #[error("need fewer constraints ({k}) than coordinates ({n})")]
    TooManyConstraints { k: usize, n: usize },
    #[error("control covector {index} has {got} entries, expected {n}")]
    CovectorShape { index: usize, got: usize, n: usize },
    #[error("expected {expected} controls, got {got}")]
    ControlCount { expected: usize, got: usize },
    #[error("velocity violates the constraints: |A v| = {residual:e}")]
    ConstraintViolated { residual: f64 },
    #[error("velocity has {got} entries, expected {n}")]
    VelocityShape { got: usize, n: usize },
    #[error("KKT matrix is singular (condition estimate {condition:e})")]
    SingularKkt { condition: f64 },
    #[error("constraint matrix is rank deficient at {0:?}")]
    RankDeficient(Vec<f64>),
    #[error("control schedule must start at t = 0 with increasing breakpoints")]
    BadSchedule,
    #[error("physical parameters must be positive and finite")]
    BadParameter,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    space: ModelSpace,
    mass: Vec<Vec<ScalarExpr>>,
    potential: ScalarExpr,
    constraints: Vec<Vec<ScalarExpr>>,
    covectors: Vec<Vec<f64>>,
    // Row-major flattenings.
    mass_c: CompiledMap,
    constraints_c: CompiledMap,
    potential_c: CompiledMap,
    grad_u: CompiledMap,
    /// `∂_l M`, one map per coordinate `l`.
    dmass: Vec<CompiledMap>,
    /// `∂_l A`, one map per coordinate `l`.
    dconstraints: Vec<CompiledMap>,
}

fn flatten(m: &[Vec<ScalarExpr>]) -> Vec<ScalarExpr> {
    m.iter().flatten().cloned().collect()
}

impl LagrangianSystem {
    pub fn new(
        space: &ModelSpace,
        mass: Vec<Vec<ScalarExpr>>,
        potential: ScalarExpr,
        constraints: Vec<Vec<ScalarExpr>>,
        covectors: Vec<Vec<f64>>,
    ) -> Result<Self, LagrangeError> {
        let n = space.dim();
        if mass.len() != n || mass.iter().any(|r| r.len() != n) {
            return Err(LagrangeError::MassShape { n });
        }
        for i in 0..n {
            for j in 0..i {
                if mass[i][j] != mass[j][i] {
                    return Err(LagrangeError::NotSymmetric(i, j));
                }
            }
        }
        if constraints.iter().any(|r| r.len() != n) {
            return Err(LagrangeError::ConstraintShape { n });
        }
        if constraints.len() >= n {
            return Err(LagrangeError::TooManyConstraints {
                k: constraints.len(),
                n,
            });
        }
        for (index, g) in covectors.iter().enumerate() {
            if g.len() != n {
                return Err(LagrangeError::CovectorShape { index, got: g.len(), n });
            }
        }
        let names = space.names();
        let fm = flatten(&mass);
        let fa = flatten(&constraints);
        let deriv = |exprs: &[ScalarExpr], l: &str| -> Vec<ScalarExpr> {
            exprs.iter().map(|e| e.differentiate(l)).collect()
        };
        Ok(Self {
            mass_c: CompiledMap::new(&fm, &names)?,
            constraints_c: CompiledMap::new(&fa, &names)?,
            potential_c: CompiledMap::new(std::slice::from_ref(&potential), &names)?,
            grad_u: CompiledMap::new(
                &names.iter().map(|l| potential.differentiate(l)).collect::<Vec<_>>(),
                &names,
            )?,
            dmass: names
                .iter()
                .map(|l| CompiledMap::new(&deriv(&fm, l), &names))
                .collect::<Result<_, _>>()?,
            dconstraints: names
                .iter()
                .map(|l| CompiledMap::new(&deriv(&fa, l), &names))
                .collect::<Result<_, _>>()?,
            space: space.clone(),
            mass,
            potential,
            constraints,
            covectors,
        })
    }

    /// Parse every entry from strings; `constraints` may be empty.
    pub fn parse(
        space: &ModelSpace,
        mass: &[Vec<&str>],
        potential: &str,
        constraints: &[Vec<&str>],
        covectors: Vec<Vec<f64>>,
    ) -> Result<Self, LagrangeError> {
        let p = |rows: &[Vec<&str>]| -> Result<Vec<Vec<ScalarExpr>>, ParseError> {
            rows.iter().map(|r| r.iter().map(|e| parse_expr(e)).collect()).collect()
        };
        Self::new(space, p(mass)?, parse_expr(potential)?, p(constraints)?, covectors)
    }

    /// Vertical disk rolling without slipping on `q = (x, y, φ, θ)`:
    /// `M = diag(m, m, J, I)`, `ẋ = R cos φ θ̇`, `ẏ = R sin φ θ̇`, controls
    /// `u_φ`, `u_θ` acting on the steering and rolling angles.
    pub fn rolling_disk(m: f64, i: f64, j: f64, r: f64) -> Result<Self, LagrangeError> {
        if ![m, i, j, r].iter().all(|p| *p > 0.0 && p.is_finite()) {
            return Err(LagrangeError::BadParameter);
        }
        let space = ModelSpace::new(vec![
            Factor::real("x"),
            Factor::real("y"),
            Factor::angle("phi"),
            Factor::angle("theta"),
        ])?;
        let c = ScalarExpr::constant;
        let z = ScalarExpr::zero;
        let diag = [m, m, j, i];
        let mass = (0..4)
            .map(|a| (0..4).map(|b| if a == b { c(diag[a]) } else { z() }).collect())
            .collect();
        let phi = ScalarExpr::var("phi");
        let row = |trig: ScalarExpr, first: bool| {
            vec![
                if first { c(1.0) } else { z() },
                if first { z() } else { c(1.0) },
                z(),
                ScalarExpr::neg(ScalarExpr::mul(c(r), trig)),
            ]
        };
        let constraints = vec![row(ScalarExpr::cos(phi.clone()), true), row(ScalarExpr::sin(phi), false)];
        Self::new(
            &space,
            mass,
            z(),
            constraints,
            vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
        )
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn control_count(&self) -> usize {
        self.covectors.len()
    }

    pub fn mass_exprs(&self) -> &[Vec<ScalarExpr>] {
        &self.mass
    }

    pub fn potential(&self) -> &ScalarExpr {
        &self.potential
    }

    pub fn constraint_exprs(&self) -> &[Vec<ScalarExpr>] {
        &self.constraints
    }

    pub fn covectors(&self) -> &[Vec<f64>] {
        &self.covectors
    }

    pub fn mass(&self, q: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.dim();
        Ok(DMatrix::from_row_slice(n, n, &self.mass_c.eval(q)?))
    }

    pub fn constraint_matrix(&self, q: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        Ok(DMatrix::from_row_slice(self.constraint_count(), self.dim(), &self.constraints_c.eval(q)?))
    }

    /// `F = Σ u_j g^j`.
    pub fn control_force(&self, u: &[f64]) -> Result<Vec<f64>, LagrangeError> {
        if u.len() != self.control_count() {
            return Err(LagrangeError::ControlCount {
                expected: self.control_count(),
                got: u.len(),
            });
        }
        let mut f = vec![0.0; self.dim()];
        for (g, uj) in self.covectors.iter().zip(u) {
            f.iter_mut().zip(g).for_each(|(fi, gi)| *fi += gi * uj);
        }
        Ok(f)
    }

    /// `½ vᵀ M v + U`.
    pub fn energy(&self, q: &[f64], v: &[f64]) -> Result<f64, EvalError> {
        let mv = self.mass(q)? * DVector::from_column_slice(v);
        Ok(0.5 * dot(v, mv.as_slice()) + self.potential_c.eval(q)?[0])
    }

    /// Coriolis, centrifugal and potential terms `b(q, v)`.
    pub fn bias(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        let n = self.dim();
        let dm: Vec<Vec<f64>> = self.dmass.iter().map(|d| d.eval(q)).collect::<Result<_, _>>()?;
        let grad = self.grad_u.eval(q)?;
        Ok((0..n)
            .map(|i| {
                let mut s = -grad[i];
                for j in 0..n {
                    for l in 0..n {
                        s -= dm[l][i * n + j] * v[l] * v[j];
                        s += 0.5 * dm[i][j * n + l] * v[j] * v[l];
                    }
                }
                s
            })
            .collect())
    }

    /// `Ȧ v = Σ_l ∂_l A v_l v`.
    pub fn constraint_rate(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        let (k, n) = (self.constraint_count(), self.dim());
        let mut out = vec![0.0; k];
        for (l, d) in self.dconstraints.iter().enumerate() {
            if v[l] == 0.0 {
                continue;
            }
            let da = d.eval(q)?;
            for r in 0..k {
                for j in 0..n {
                    out[r] += da[r * n + j] * v[l] * v[j];
                }
            }
        }
        Ok(out)
    }
}

/// `(q, v)` with `A(q) v = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedState {
    pub q: Point,
    pub v: Vec<f64>,
}

impl ConstrainedState {
    pub fn new(sys: &LagrangianSystem, q: Point, v: Vec<f64>) -> Result<Self, LagrangeError> {
        if q.space() != sys.space() {
            return Err(SpaceError::SpaceMismatch.into());
        }
        if v.len() != sys.dim() {
            return Err(LagrangeError::VelocityShape { got: v.len(), n: sys.dim() });
        }
        let av = sys.constraint_matrix(q.coords())? * DVector::from_column_slice(&v);
        let residual = av.norm();
        if !(residual <= CONSTRAINT_TOL) {
            return Err(LagrangeError::ConstraintViolated { residual });
        }
        Ok(Self { q, v })
    }

    pub fn at_rest(sys: &LagrangianSystem, q: Point) -> Result<Self, LagrangeError> {
        let n = sys.dim();
        Self::new(sys, q, vec![0.0; n])
    }
}

/// `M(q)` positive definite and `A(q)` of full row rank at every sample.
pub fn regularity_check(sys: &LagrangianSystem, samples: &[Point]) -> bool {
    samples.iter().all(|p| {
        let q = p.coords();
        let (Ok(m), Ok(a)) = (sys.mass(q), sys.constraint_matrix(q)) else {
            return false;
        };
        let full_rank = sys.constraint_count() == 0
            || singular_values(&a).iter().filter(|s| **s > REGULARITY_TOL).count() == sys.constraint_count();
        min_symmetric_eigenvalue(&m) > REGULARITY_TOL && full_rank
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acceleration {
    pub qdd: Vec<f64>,
    pub lambda: Vec<f64>,
}

fn accel_raw(sys: &LagrangianSystem, q: &[f64], v: &[f64], force: &[f64]) -> Result<Acceleration, LagrangeError> {
    let (n, k) = (sys.dim(), sys.constraint_count());
    let m = sys.mass(q)?;
    let a = sys.constraint_matrix(q)?;
    let b = sys.bias(q, v)?;
    let adot_v = sys.constraint_rate(q, v)?;
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&m);
    kkt.view_mut((0, n), (n, k)).copy_from(&(-a.transpose()));
    kkt.view_mut((n, 0), (k, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + k);
    for i in 0..n {
        rhs[i] = b[i] + force[i];
    }
    for r in 0..k {
        rhs[n + r] = -adot_v[r];
    }
    let singular = || LagrangeError::SingularKkt {
        condition: condition_number(&kkt),
    };
    // 1-norm condition from the same LU: far cheaper than an SVD per stage
    let lu = kkt.clone().lu();
    let sol = lu.solve(&rhs).ok_or_else(singular)?;
    let inv = lu.try_inverse().ok_or_else(singular)?;
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    if !sol.iter().all(|x| x.is_finite()) || norm1(&kkt) * norm1(&inv) > KKT_CONDITION_LIMIT {
        return Err(singular());
    }
    Ok(Acceleration {
        qdd: sol.as_slice()[..n].to_vec(),
        lambda: sol.as_slice()[n..].to_vec(),
    })
}

pub fn constrained_accel(sys: &LagrangianSystem, s: &ConstrainedState, u: &[f64]) -> Result<Acceleration, LagrangeError> {
    let force = sys.control_force(u)?;
    accel_raw(sys, s.q.coords(), &s.v, &force)
}

/// Piecewise-constant controls: `(start time, u)` pieces, the first at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pieces: Vec<(f64, Vec<f64>)>,
}

impl ControlSchedule {
    pub fn new(pieces: Vec<(f64, Vec<f64>)>) -> Result<Self, LagrangeError> {
        let ok = pieces.first().is_some_and(|p| p.0 == 0.0)
            && pieces.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1.len() == w[1].1.len());
        if !ok {
            return Err(LagrangeError::BadSchedule);
        }
        Ok(Self { pieces })
    }

    pub fn constant(u: Vec<f64>) -> Self {
        Self { pieces: vec![(0.0, u)] }
    }

    pub fn at(&self, t: f64) -> &[f64] {
        let i = self.pieces.partition_point(|p| p.0 <= t).saturating_sub(1);
        &self.pieces[i].1
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedRun {
    /// States on `Q × ℝⁿ`; velocity coordinates are named `v_<q>`.
    pub trajectory: Trajectory,
    pub max_constraint_residual: f64,
    /// `max |E(t) − E(0) − ∫ F·v dt|`.
    pub max_energy_error: f64,
    pub projected: bool,
}

impl ConstrainedRun {
    pub fn final_state(&self) -> (&[f64], &[f64]) {
        let c = self.trajectory.last().coords();
        c.split_at(c.len() / 2)
    }
}

pub fn phase_space(q: &ModelSpace) -> Result<ModelSpace, SpaceError> {
    let mut f = q.factors().to_vec();
    f.extend(q.names().iter().map(|n| Factor::real(&format!("v_{n}"))));
    ModelSpace::new(f)
}

/// Minimum-norm (in the `M` metric) correction of `v` onto `ker A(q)`.
fn project_velocity(sys: &LagrangianSystem, q: &[f64], v: &mut [f64]) -> Result<(), LagrangeError> {
    if sys.constraint_count() == 0 {
        return Ok(());
    }
    let m = sys.mass(q)?;
    let a = sys.constraint_matrix(q)?;
    let minv = m.clone().try_inverse().ok_or(LagrangeError::SingularKkt {
        condition: condition_number(&m),
    })?;
    let s = &a * &minv * a.transpose();
    let av = &a * DVector::from_column_slice(v);
    let mu = s.lu().solve(&av).ok_or(LagrangeError::RankDeficient(q.to_vec()))?;
    let dv = minv * a.transpose() * mu;
    v.iter_mut().zip(dv.iter()).for_each(|(vi, d)| *vi -= d);
    Ok(())
}

/// RK4 on `(q, v, W)` with `Ẇ = F·v`, angles wrapped after each step.
/// Controls are sampled at the start of each step. `project` enables a
/// non-physical post-step velocity projection onto `ker A(q)`.
pub fn simulate_constrained(
    sys: &LagrangianSystem,
    s0: &ConstrainedState,
    controls: &ControlSchedule,
    t: f64,
    h: f64,
    project: bool,
) -> Result<ConstrainedRun, LagrangeError> {
    let n = sys.dim();
    let steps = step_count(t, h)?;
    let dt = t / steps as f64;
    let phase = phase_space(sys.space())?;
    let mut x: Vec<f64> = s0.q.coords().iter().chain(&s0.v).copied().chain([0.0]).collect();
    let e0 = sys.energy(s0.q.coords(), &s0.v)?;
    let mut times = vec![0.0];
    let mut states = vec![Point::new(&phase, x[..2 * n].to_vec())?];
    let mut max_res: f64 = 0.0;
    let mut max_energy: f64 = 0.0;
    for k in 0..steps {
        let force = sys.control_force(controls.at(k as f64 * dt))?;
        let rhs = |z: &[f64], out: &mut [f64]| -> Result<(), LagrangeError> {
            let (q, rest) = z.split_at(n);
            let v = &rest[..n];
            let acc = accel_raw(sys, q, v, &force)?;
            out[..n].copy_from_slice(v);
            out[n..2 * n].copy_from_slice(&acc.qdd);
            out[2 * n] = dot(&force, v);
            Ok(())
        };
        let prev = x[..2 * n].to_vec();
        let stepped = rk4_step(&rhs, &mut x, dt);
        let time = k as f64 * dt;
        match stepped {
            Err(LagrangeError::Eval(_)) => {
                return Err(DynamicsError::BlowUp { time, last: prev }.into());
            }
            Err(e) => return Err(e),
            Ok(()) if !x.iter().all(|v| v.is_finite()) => {
                return Err(DynamicsError::BlowUp { time, last: prev }.into());
            }
            Ok(()) => {}
        }
        sys.space().canonicalize(&mut x[..n]);
        if project {
            let (q, rest) = x.split_at_mut(n);
            project_velocity(sys, q, &mut rest[..n])?;
        }
        let (q, rest) = x.split_at(n);
        let v = &rest[..n];
        let av = sys.constraint_matrix(q)? * DVector::from_column_slice(v);
        max_res = max_res.max(av.norm());
        max_energy = max_energy.max((sys.energy(q, v)? - e0 - rest[n]).abs());
        times.push(if k + 1 == steps { t } else { (k + 1) as f64 * dt });
        states.push(Point::new(&phase, x[..2 * n].to_vec())?);
    }
    Ok(ConstrainedRun {
        trajectory: Trajectory { times, states },
        max_constraint_residual: max_res,
        max_energy_error: max_energy,
        projected: project,
    })
}

/// Closed-form rolling disk from `q0` at rest: `θ̈ = u_θ / (I + mR²)`,
/// `φ̈ = u_φ / J`, with the `(x, y)` quadrature done by composite Simpson
/// on `2·10⁴` panels. Returns `(x, y, φ, θ)`; angles are not wrapped.
#[allow(clippy::too_many_arguments)]
pub fn rolling_disk_oracle(
    m: f64,
    i: f64,
    j: f64,
    r: f64,
    u_theta: f64,
    u_phi: f64,
    t: f64,
    q0: [f64; 4],
) -> [f64; 4] {
    let a = u_theta / (i + m * r * r);
    let b = u_phi / j;
    let phi = |s: f64| q0[2] + 0.5 * b * s * s;
    let simpson = |g: &dyn Fn(f64) -> f64| {
        let n = 20_000;
        let h = t / n as f64;
        let mut acc = g(0.0) + g(t);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
        }
        acc * h / 3.0
    };
    let x = q0[0] + simpson(&|s| r * phi(s).cos() * a * s);
    let y = q0[1] + simpson(&|s| r * phi(s).sin() * a * s);
    [x, y, phi(t), q0[3] + 0.5 * a * t * t]
}

/// `Y(q) ∉ ker A(q)` at every sample: some row of `A Y` exceeds
/// [`REGULARITY_TOL`] in magnitude.
pub fn transversality_test(sys: &LagrangianSystem, y: &VectorField, samples: &[Point]) -> Result<bool, LagrangeError> {
    if y.space() != sys.space() {
        return Err(SpaceError::SpaceMismatch.into());
    }
    let mut all = true;
    for p in samples {
        let q = p.coords();
        let a = sys.constraint_matrix(q)?;
        let rank = singular_values(&a).iter().filter(|s| **s > REGULARITY_TOL).count();
        if rank < sys.constraint_count() {
            return Err(LagrangeError::RankDeficient(q.to_vec()));
        }
        let ay = a * DVector::from_vec(y.eval(q)?);
        all &= ay.iter().any(|c| c.abs() > REGULARITY_TOL);
    }
    Ok(all && !samples.is_empty())
}

/// `|M q̈ − Aᵀλ − F − b|`, the linear-solve residual of an acceleration.
pub fn kkt_residual(sys: &LagrangianSystem, s: &ConstrainedState, u: &[f64], acc: &Acceleration) -> Result<f64, LagrangeError> {
    let q = s.q.coords();
    let lhs = sys.mass(q)? * DVector::from_column_slice(&acc.qdd)
        - sys.constraint_matrix(q)?.transpose() * DVector::from_column_slice(&acc.lambda);
    let f = sys.control_force(u)?;
    let b = sys.bias(q, &s.v)?;
    let r: Vec<f64> = (0..sys.dim()).map(|i| lhs[i] - f[i] - b[i]).collect();
    Ok(norm(&r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> LagrangianSystem {
        LagrangianSystem::rolling_disk(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn origin(sys: &LagrangianSystem) -> ConstrainedState {
        ConstrainedState::at_rest(sys, Point::new(sys.space(), vec![0.0; 4]).unwrap()).unwrap()
    }

    #[test]
    fn regularity_examples() {
        let d = disk();
        let pts: Vec<Point> = (0..20)
            .map(|k| Point::new(d.space(), vec![0.1 * k as f64, 0.0, 0.3 * k as f64, 0.7 * k as f64]).unwrap())
            .collect();
        assert!(regularity_check(&d, &pts));

        let p = ModelSpace::plane();
        let degenerate = LagrangianSystem::parse(&p, &[vec!["1", "0"], vec!["0", "0"]], "0", &[], vec![]).unwrap();
        assert!(!regularity_check(&degenerate, &[Point::new(&p, vec![0.0, 0.0]).unwrap()]));

        let s3 = ModelSpace::euclidean(&["a", "b", "c"]).unwrap();
        let eye = vec![vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1"]];
        let dup = LagrangianSystem::parse(&s3, &eye, "0", &[vec!["1", "1", "0"], vec!["1", "1", "0"]], vec![]).unwrap();
        assert!(!regularity_check(&dup, &[Point::new(&s3, vec![0.0; 3]).unwrap()]));
    }

    #[test]
    fn accel_examples() {
        let d = disk();
        let s = origin(&d);
        let acc = constrained_accel(&d, &s, &[0.0, 0.0]).unwrap();
        assert!(acc.qdd.iter().chain(&acc.lambda).all(|v| v.abs() < 1e-15));
        let acc = constrained_accel(&d, &s, &[0.0, 1.0]).unwrap();
        assert!((acc.qdd[3] - 0.5).abs() < 1e-12);
        assert!(kkt_residual(&d, &s, &[0.0, 1.0], &acc).unwrap() < 1e-10);

        let p = ModelSpace::plane();
        let newton = LagrangianSystem::parse(
            &p,
            &[vec!["1", "0"], vec!["0", "1"]],
            "x^2/2 + 3*y",
            &[],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let s = ConstrainedState::at_rest(&newton, Point::new(&p, vec![2.0, 0.0]).unwrap()).unwrap();
        let acc = constrained_accel(&newton, &s, &[0.5, 0.25]).unwrap();
        assert!((acc.qdd[0] - (0.5 - 2.0)).abs() < 1e-12);
        assert!((acc.qdd[1] - (0.25 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn bias_matches_hand_computation() {
        // Polar-coordinate particle: M = diag(1, r^2), b = (r w^2, -2 r v w).
        let s = ModelSpace::new(vec![Factor::real("r"), Factor::angle("a")]).unwrap();
        let l = LagrangianSystem::parse(&s, &[vec!["1", "0"], vec!["0", "r^2"]], "0", &[], vec![]).unwrap();
        let b = l.bias(&[2.0, 0.0], &[0.5, 3.0]).unwrap();
        assert!((b[0] - 2.0 * 9.0).abs() < 1e-12);
        assert!((b[1] + 2.0 * 2.0 * 0.5 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_states() {
        let d = disk();
        let q = Point::new(d.space(), vec![0.0; 4]).unwrap();
        assert!(matches!(
            ConstrainedState::new(&d, q, vec![1.0, 0.0, 0.0, 0.0]),
            Err(LagrangeError::ConstraintViolated { .. })
        ));
        assert!(LagrangianSystem::rolling_disk(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rolling_forward() {
        let d = disk();
        let run = simulate_constrained(&d, &origin(&d), &ControlSchedule::constant(vec![0.0, 1.0]), 2.0, 1e-3, false)
            .unwrap();
        let (q, _) = run.final_state();
        assert!((q[0] - 1.0).abs() < 1e-6 && q[1].abs() < 1e-6, "{q:?}");
        assert!(q[2].abs() < 1e-12 && (q[3] - 1.0).abs() < 1e-6);
        assert!(run.max_constraint_residual < 1e-8);
        assert!(run.max_energy_error < 1e-6);
    }

    #[test]
    fn steering_in_place() {
        let d = disk();
        let run = simulate_constrained(&d, &origin(&d), &ControlSchedule::constant(vec![1.0, 0.0]), 1.0, 1e-3, false)
            .unwrap();
        let (q, _) = run.final_state();
        assert!(q[0].abs() < 1e-6 && q[1].abs() < 1e-6);
        assert!((q[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn oracle_cross_check() {
        let d = disk();
        let run = simulate_constrained(&d, &origin(&d), &ControlSchedule::constant(vec![1.0, 1.0]), 1.0, 1e-3, false)
            .unwrap();
        let (q, _) = run.final_state();
        let o = rolling_disk_oracle(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, [0.0; 4]);
        for k in 0..4 {
            assert!((q[k] - o[k]).abs() < 1e-6, "{k}: {} vs {}", q[k], o[k]);
        }
        assert_eq!(rolling_disk_oracle(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 3.0, [1.0, 2.0, 0.5, 0.25]), [1.0, 2.0, 0.5, 0.25]);
    }

    #[test]
    fn schedule_lookup() {
        let s = ControlSchedule::new(vec![(0.0, vec![1.0]), (1.0, vec![2.0])]).unwrap();
        assert_eq!(s.at(0.5), &[1.0]);
        assert_eq!(s.at(1.0), &[2.0]);
        assert!(ControlSchedule::new(vec![(0.5, vec![1.0])]).is_err());
    }

    #[test]
    fn transversality_examples() {
        let d = disk();
        let pts: Vec<Point> = (0..30)
            .map(|k| Point::new(d.space(), vec![0.0, 0.0, 0.21 * k as f64, 0.1 * k as f64]).unwrap())
            .collect();
        let y = VectorField::parse(d.space(), &["sin(phi)", "-cos(phi)", "0", "0"]).unwrap();
        assert!(transversality_test(&d, &y, &pts).unwrap());
        let tangent = VectorField::parse(d.space(), &["cos(phi)", "sin(phi)", "0", "1"]).unwrap();
        assert!(!transversality_test(&d, &tangent, &pts).unwrap());
        let steer = VectorField::parse(d.space(), &["0", "0", "1", "0"]).unwrap();
        assert!(!transversality_test(&d, &steer, &pts).unwrap());
    }
}

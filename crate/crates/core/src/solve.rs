//! Multi-start damped Newton (Levenberg–Marquardt) for box-constrained
//! nonlinear least squares `min |G(z) - target|`.
//!
//! Used for image coverage, adversary residual floors and zero finding.
//! The search records the smallest residual seen at any feasible point it
//! evaluates, so a stalled run still reports a meaningful best value.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::expr::CompiledMap;
use crate::linalg::norm;
use crate::space::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Interval(f64, f64),
    Periodic,
    Free,
}

impl Bound {
    fn project(&self, v: f64) -> f64 {
        match *self {
            Bound::Interval(lo, hi) => v.clamp(lo, hi),
            Bound::Periodic => wrap_angle(v),
            Bound::Free => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop a run once the residual norm drops below this.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub z: Vec<f64>,
    pub residual: f64,
    /// Index of the start that produced this solution.
    pub start: usize,
}

pub struct LeastSquares<'a, F>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    pub map: &'a CompiledMap,
    pub target: &'a [f64],
    pub bounds: &'a [Bound],
    /// Points failing this predicate never count as the best solution.
    pub feasible: F,
}

impl<F> LeastSquares<'_, F>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    fn residual(&self, z: &[f64]) -> Option<Vec<f64>> {
        let v = self.map.eval(z).ok()?;
        let r: Vec<f64> = v.iter().zip(self.target).map(|(a, b)| a - b).collect();
        r.iter().all(|x| x.is_finite()).then_some(r)
    }

    /// One damped Newton run from `z0`. Returns the best feasible point
    /// visited, if any.
    pub fn run(&self, z0: &[f64], opts: &SolverOptions) -> Option<(Vec<f64>, f64)> {
        let n = z0.len();
        let mut z: Vec<f64> = z0
            .iter()
            .zip(self.bounds)
            .map(|(v, b)| b.project(*v))
            .collect();
        let mut r = self.residual(&z)?;
        let mut rn = norm(&r);
        let mut best = (self.feasible)(&z).then(|| (z.clone(), rn));
        let mut mu = 1e-3;
        for _ in 0..opts.max_iter {
            if rn <= opts.tol {
                break;
            }
            let Ok(jac) = self.map.jacobian(&z) else { break };
            let m = r.len();
            let j = DMatrix::from_fn(m, n, |i, k| jac[i][k]);
            let jt = j.transpose();
            let jtj = &jt * &j;
            let mut g = &jt * DVector::from_column_slice(&r);
            // Coordinates pinned at a face with the descent direction pointing
            // outward are frozen for this step.
            let active: Vec<bool> = (0..n)
                .map(|k| match self.bounds[k] {
                    Bound::Interval(lo, hi) => (z[k] <= lo && g[k] > 0.0) || (z[k] >= hi && g[k] < 0.0),
                    _ => false,
                })
                .collect();
            let mut improved = false;
            while mu < 1e12 {
                let mut a = jtj.clone();
                for k in 0..n {
                    if active[k] {
                        a.row_mut(k).fill(0.0);
                        a.column_mut(k).fill(0.0);
                        a[(k, k)] = 1.0;
                        g[k] = 0.0;
                    } else {
                        a[(k, k)] += mu * (1.0 + jtj[(k, k)]);
                    }
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                    mu *= 4.0;
                    continue;
                };
                let trial: Vec<f64> = z
                    .iter()
                    .zip(step.iter())
                    .zip(self.bounds)
                    .map(|((v, d), b)| b.project(v + d))
                    .collect();
                if let Some(rt) = self.residual(&trial) {
                    let tn = norm(&rt);
                    if tn < rn {
                        z = trial;
                        r = rt;
                        rn = tn;
                        mu = (mu / 3.0).max(1e-15);
                        improved = true;
                        break;
                    }
                }
                mu *= 4.0;
            }
            if (self.feasible)(&z) && best.as_ref().is_none_or(|(_, b)| rn < *b) {
                best = Some((z.clone(), rn));
            }
            if !improved {
                break;
            }
        }
        best
    }

    /// Run from every start (in parallel) and keep the smallest residual;
    /// ties resolve to the lowest start index.
    pub fn multi_start(&self, starts: &[Vec<f64>], opts: &SolverOptions) -> Option<Solution> {
        starts
            .par_iter()
            .enumerate()
            .filter_map(|(i, s)| {
                self.run(s, opts).map(|(z, residual)| Solution {
                    z,
                    residual,
                    start: i,
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.start.cmp(&b.start)))
    }
}

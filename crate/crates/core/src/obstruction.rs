//! Necessary-condition tests for stabilizability and safety.
//!
//! Every test here is one-directional. A compact set `A` with `χ(A) ≠ 0`
//! that is stabilizable by continuous, uniquely integrable feedback forces
//! `f(x, u) = X(x)` to be solvable near `A` for every small enough
//! continuous adversary `X`. So a family `X_ε → 0` whose values stay away
//! from the image of `f` rules out stabilization (and, for precompact `S`
//! with `χ(S) ≠ 0`, rules out rendering `S` safe). The converse never
//! holds: [`Verdict::NoObstruction`] only says that one particular family
//! failed to separate, and the verdict assembly never emits it.
//!
//! Residual floors are found by sampled multi-start search, so they are
//! evidence, not proof; every report says so in its assumptions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, VectorField};
use crate::expr::{CompiledMap, EvalError, ScalarExpr};
use crate::linalg::{from_columns, norm, rank};
use crate::solve::{Bound, LeastSquares, SolverOptions};
use crate::space::{Base, Containment, FactorKind, ModelSpace, Point, Region};
use crate::topology::region_euler_char;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("dynamics has {got} components for {expected} state coordinates")]
    Arity { expected: usize, got: usize },
    #[error("control name `{0}` clashes with a state coordinate or another control")]
    NameClash(String),
    #[error("affine decomposition needs one control field per control ({controls}), got {fields}")]
    FieldCount { controls: usize, fields: usize },
    #[error("affine decomposition disagrees with the dynamics at {at:?} (|difference| = {diff:e})")]
    AffineMismatch { at: Vec<f64>, diff: f64 },
    #[error("system has no affine decomposition")]
    NotAffine,
    #[error("expected {expected} control bounds, got {got}")]
    ControlBounds { expected: usize, got: usize },
    #[error("adversary template has {got} components for {expected} state coordinates")]
    AdversaryArity { expected: usize, got: usize },
    #[error("region lives in a different space than the system")]
    SpaceMismatch,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Drift plus control fields: `f(x, u) = F(x) + Σ g_i(x) u_i`.
#[derive(Debug, Clone)]
pub struct AffineParts {
    pub drift: VectorField,
    pub fields: Vec<VectorField>,
}

/// `ẋ = f(x, u)` with one expression per state coordinate in state and
/// control variables.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    space: ModelSpace,
    controls: Vec<String>,
    dynamics: Vec<ScalarExpr>,
    affine: Option<AffineParts>,
}

impl ControlSystem {
    pub fn new(
        space: &ModelSpace,
        controls: &[&str],
        dynamics: Vec<ScalarExpr>,
    ) -> Result<Self, SystemError> {
        if dynamics.len() != space.dim() {
            return Err(SystemError::Arity {
                expected: space.dim(),
                got: dynamics.len(),
            });
        }
        for (i, c) in controls.iter().enumerate() {
            if space.index_of(c).is_some() || controls[..i].contains(c) {
                return Err(SystemError::NameClash((*c).to_owned()));
            }
        }
        let sys = Self {
            space: space.clone(),
            controls: controls.iter().map(|c| (*c).to_owned()).collect(),
            dynamics,
            affine: None,
        };
        // Resolve every variable now so later evaluation cannot fail on names.
        CompiledMap::new(&sys.dynamics, &sys.variable_names())?;
        Ok(sys)
    }

    /// A vector field viewed as a system without control.
    pub fn autonomous(field: &VectorField) -> Self {
        Self::new(field.space(), &[], field.components().to_vec())
            .expect("field components only use state variables")
    }

    /// Build `F + Σ g_i u_i` directly from its parts.
    pub fn affine(drift: VectorField, fields: Vec<VectorField>, controls: &[&str]) -> Result<Self, SystemError> {
        if fields.len() != controls.len() {
            return Err(SystemError::FieldCount {
                controls: controls.len(),
                fields: fields.len(),
            });
        }
        let dynamics = (0..drift.space().dim())
            .map(|k| {
                fields.iter().zip(controls).fold(drift.components()[k].clone(), |acc, (g, u)| {
                    ScalarExpr::add(acc, ScalarExpr::mul(g.components()[k].clone(), ScalarExpr::var(u)))
                })
            })
            .collect();
        let space = drift.space().clone();
        Self::new(&space, controls, dynamics)?.with_affine(drift, fields)
    }

    /// Attach an affine decomposition, checked against the dynamics at 1000
    /// seeded random `(x, u)` with tolerance `1e-12 (1 + |f|)`.
    pub fn with_affine(mut self, drift: VectorField, fields: Vec<VectorField>) -> Result<Self, SystemError> {
        if fields.len() != self.controls.len() {
            return Err(SystemError::FieldCount {
                controls: self.controls.len(),
                fields: fields.len(),
            });
        }
        let n = self.space.dim();
        let map = CompiledMap::new(&self.dynamics, &self.variable_names())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 1000 && attempts < 10_000 {
            attempts += 1;
            let z: Vec<f64> = (0..n + self.controls.len())
                .map(|i| {
                    if i < n && self.space.kind(i) == FactorKind::Angle {
                        rng.random_range(0.0..std::f64::consts::TAU)
                    } else {
                        rng.random_range(-2.0..2.0)
                    }
                })
                .collect();
            let (x, u) = z.split_at(n);
            let (Ok(full), Ok(f0)) = (map.eval(&z), drift.eval(x)) else {
                continue;
            };
            let mut combined = f0;
            let mut ok = true;
            for (g, ui) in fields.iter().zip(u) {
                match g.eval(x) {
                    Ok(gv) => combined.iter_mut().zip(gv).for_each(|(c, v)| *c += v * ui),
                    Err(_) => ok = false,
                }
            }
            if !ok {
                continue;
            }
            for (a, b) in full.iter().zip(&combined) {
                let diff = (a - b).abs();
                if diff > 1e-12 * (1.0 + a.abs()) {
                    return Err(SystemError::AffineMismatch { at: z.clone(), diff });
                }
            }
            checked += 1;
        }
        self.affine = Some(AffineParts { drift, fields });
        Ok(self)
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    pub fn control_dim(&self) -> usize {
        self.controls.len()
    }

    pub fn dynamics(&self) -> &[ScalarExpr] {
        &self.dynamics
    }

    pub fn affine_parts(&self) -> Option<&AffineParts> {
        self.affine.as_ref()
    }

    /// State coordinate names followed by control names.
    pub fn variable_names(&self) -> Vec<String> {
        self.space
            .names()
            .into_iter()
            .map(str::to_owned)
            .chain(self.controls.iter().cloned())
            .collect()
    }

    /// The field obtained by freezing every control at zero.
    pub fn zero_control_field(&self) -> Result<VectorField, SystemError> {
        let comps = self
            .dynamics
            .iter()
            .map(|e| {
                self.controls
                    .iter()
                    .fold(e.clone(), |acc, u| acc.substitute(u, &ScalarExpr::zero()))
            })
            .collect();
        Ok(VectorField::new(&self.space, comps)?)
    }
}

/// An ε-parametrized adversary `X_ε`, one expression per state
/// coordinate in the state variables and the parameter.
#[derive(Debug, Clone)]
pub struct AdversaryFamily {
    space: ModelSpace,
    template: Vec<ScalarExpr>,
    param: String,
}

impl AdversaryFamily {
    pub fn new(space: &ModelSpace, template: Vec<ScalarExpr>, param: &str) -> Result<Self, SystemError> {
        if template.len() != space.dim() {
            return Err(SystemError::AdversaryArity {
                expected: space.dim(),
                got: template.len(),
            });
        }
        let mut names: Vec<&str> = space.names();
        names.push(param);
        for t in &template {
            t.compile(&names)?;
        }
        Ok(Self {
            space: space.clone(),
            template,
            param: param.to_owned(),
        })
    }

    /// `X_ε = ε · field`.
    pub fn scaled(field: &VectorField, param: &str) -> Result<Self, SystemError> {
        let t = field
            .components()
            .iter()
            .map(|c| ScalarExpr::mul(ScalarExpr::var(param), c.clone()))
            .collect();
        Self::new(field.space(), t, param)
    }

    pub fn param(&self) -> &str {
        &self.param
    }

    pub fn template(&self) -> &[ScalarExpr] {
        &self.template
    }

    pub fn at(&self, eps: f64) -> Vec<ScalarExpr> {
        self.template
            .iter()
            .map(|t| t.substitute(&self.param, &ScalarExpr::constant(eps)))
            .collect()
    }

    /// `max |X_ε| / ε` over `n` interior samples of `r`, per ε. Bounded
    /// ratios confirm `X_ε → 0` uniformly on `r`.
    pub fn vanishing_ratios(&self, r: &Region, eps_list: &[f64], n: usize) -> Result<Vec<f64>, SystemError> {
        let pts = r.sample_interior(n, 0);
        eps_list
            .iter()
            .map(|&eps| {
                let field = VectorField::new(&self.space, self.at(eps))?;
                let mut max: f64 = 0.0;
                for p in &pts {
                    max = max.max(norm(&field.eval(p.coords())?));
                }
                Ok(max / eps)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ObstructionFound,
    NoObstruction,
    Inconclusive,
}

/// Verdict plus named numeric evidence and the caveats that were sampled
/// rather than proven.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionReport {
    pub verdict: Verdict,
    pub evidence: BTreeMap<String, f64>,
    pub assumptions: Vec<String>,
}

pub const SAMPLED_NOT_PROVEN: &str =
    "residual floors come from sampled multi-start search over a bounded control box; they are evidence, not proof";
pub const FAMILY_ONLY: &str =
    "NoObstruction refers to this adversary family only and never certifies stabilizability or safety";

impl ObstructionReport {
    pub fn new(verdict: Verdict) -> Self {
        Self {
            verdict,
            evidence: BTreeMap::new(),
            assumptions: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: f64) -> Self {
        self.evidence.insert(key.into(), value);
        self
    }

    pub fn assume(mut self, text: impl Into<String>) -> Self {
        self.assumptions.push(text.into());
        self
    }

    pub fn evidence(&self, key: &str) -> Option<f64> {
        self.evidence.get(key).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

pub fn eps_key(eps: f64) -> String {
    format!("min_residual[eps={eps:e}]")
}

/// Shared knobs for the sampled searches.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    /// Symmetric or general bounds, one per control.
    pub control_bounds: Vec<(f64, f64)>,
    /// Multi-start count per target / per ε.
    pub starts: usize,
    pub seed: u64,
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl SearchOptions {
    pub fn new(control_bounds: Vec<(f64, f64)>) -> Self {
        Self {
            control_bounds,
            starts: 64,
            seed: 0,
            solver_tol: 1e-8,
            max_iter: 200,
        }
    }

    pub fn symmetric(controls: usize, bound: f64) -> Self {
        Self::new(vec![(-bound, bound); controls])
    }
}

/// Variables, bounds and starting points for searches over `W × controls`.
struct SearchDomain<'a> {
    region: &'a Region,
    bounds: Vec<Bound>,
    starts: Vec<Vec<f64>>,
    n_state: usize,
}

impl<'a> SearchDomain<'a> {
    fn new(sys: &ControlSystem, region: &'a Region, opts: &SearchOptions) -> Result<Self, SystemError> {
        if region.space() != sys.space() {
            return Err(SystemError::SpaceMismatch);
        }
        if opts.control_bounds.len() != sys.control_dim() {
            return Err(SystemError::ControlBounds {
                expected: sys.control_dim(),
                got: opts.control_bounds.len(),
            });
        }
        let space = sys.space();
        let bb = region.bounding_box();
        let mut bounds: Vec<Bound> = (0..space.dim())
            .map(|i| match (space.kind(i), region.base()) {
                (FactorKind::Real, _) => Bound::Interval(bb[i].0, bb[i].1),
                (FactorKind::Angle, Base::Box { intervals }) if intervals[i].is_some() => {
                    Bound::Interval(bb[i].0, bb[i].1)
                }
                (FactorKind::Angle, _) => Bound::Periodic,
            })
            .collect();
        bounds.extend(opts.control_bounds.iter().map(|&(lo, hi)| Bound::Interval(lo, hi)));

        let states = region.sample_interior(opts.starts.max(1), opts.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xc0_47_01);
        let starts = (0..opts.starts.max(1))
            .map(|k| {
                let mut z = states
                    .get(k % states.len().max(1))
                    .map(|p| p.coords().to_vec())
                    .unwrap_or_else(|| bb.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect());
                for &(lo, hi) in &opts.control_bounds {
                    // First start puts controls at the box centre.
                    z.push(if k == 0 { 0.5 * (lo + hi) } else { rng.random_range(lo..=hi) });
                }
                z
            })
            .collect();
        Ok(Self {
            region,
            bounds,
            starts,
            n_state: space.dim(),
        })
    }

    fn feasible(&self) -> impl Fn(&[f64]) -> bool + Sync + '_ {
        move |z: &[f64]| self.region.classify(&z[..self.n_state]) != Containment::Exterior
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetResult {
    pub target: Vec<f64>,
    pub hit: bool,
    pub best_residual: f64,
    /// Best `(x, u)` found, state coordinates first.
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrockettReport {
    pub covered: bool,
    pub targets: Vec<TargetResult>,
}

impl BrockettReport {
    pub fn misses(&self) -> impl Iterator<Item = &TargetResult> {
        self.targets.iter().filter(|t| !t.hit)
    }
}

/// Targets on a `grid_n`-per-axis grid over `[-c_radius, c_radius]^n`,
/// keeping those with `|c| ≤ c_radius`.
pub fn target_grid(dim: usize, c_radius: f64, grid_n: usize) -> Vec<Vec<f64>> {
    let g = grid_n.max(1);
    let coord = |k: usize| {
        if g == 1 {
            0.0
        } else {
            -c_radius + 2.0 * c_radius * k as f64 / (g - 1) as f64
        }
    };
    (0..g.pow(dim as u32))
        .map(|idx| {
            let mut rem = idx;
            (0..dim)
                .map(|_| {
                    let k = rem % g;
                    rem /= g;
                    coord(k)
                })
                .collect::<Vec<f64>>()
        })
        .filter(|c| norm(c) <= c_radius * (1.0 + 1e-12))
        .collect()
}

/// Does the image of `(x, u) ↦ f(x, u)` over `W × controls` cover a
/// neighbourhood of zero? Each target on the grid is searched for.
pub fn brockett_image_test(
    sys: &ControlSystem,
    w: &Region,
    c_radius: f64,
    grid_n: usize,
    opts: &SearchOptions,
) -> Result<BrockettReport, SystemError> {
    let targets = target_grid(sys.space().dim(), c_radius, grid_n);
    brockett_targets(sys, w, &targets, opts)
}

pub fn brockett_targets(
    sys: &ControlSystem,
    w: &Region,
    targets: &[Vec<f64>],
    opts: &SearchOptions,
) -> Result<BrockettReport, SystemError> {
    let domain = SearchDomain::new(sys, w, opts)?;
    let map = CompiledMap::new(sys.dynamics(), &sys.variable_names())?;
    let sopts = SolverOptions {
        max_iter: opts.max_iter,
        tol: opts.solver_tol * 1e-3,
    };
    let results: Vec<TargetResult> = targets
        .par_iter()
        .map(|c| {
            let problem = LeastSquares {
                map: &map,
                target: c,
                bounds: &domain.bounds,
                feasible: domain.feasible(),
            };
            let best = problem.multi_start(&domain.starts, &sopts);
            let residual = best.as_ref().map_or(f64::INFINITY, |s| s.residual);
            TargetResult {
                target: c.clone(),
                hit: residual <= opts.solver_tol,
                best_residual: residual,
                witness: best.map(|s| s.z),
            }
        })
        .collect();
    Ok(BrockettReport {
        covered: results.iter().all(|r| r.hit),
        targets: results,
    })
}

/// Smallest `|f(x, u) - X_ε(x)|` found over `W × controls`, per ε.
pub fn adversary_residuals(
    sys: &ControlSystem,
    x: &AdversaryFamily,
    w: &Region,
    eps_list: &[f64],
    opts: &SearchOptions,
) -> Result<Vec<(f64, f64)>, SystemError> {
    if x.space != *sys.space() {
        return Err(SystemError::SpaceMismatch);
    }
    let domain = SearchDomain::new(sys, w, opts)?;
    let names = sys.variable_names();
    let sopts = SolverOptions {
        max_iter: opts.max_iter,
        tol: opts.solver_tol * 1e-3,
    };
    let zero = vec![0.0; sys.space().dim()];
    eps_list
        .par_iter()
        .map(|&eps| {
            let diff: Vec<ScalarExpr> = sys
                .dynamics()
                .iter()
                .zip(x.at(eps))
                .map(|(f, a)| ScalarExpr::sub(f.clone(), a))
                .collect();
            let map = CompiledMap::new(&diff, &names)?;
            let problem = LeastSquares {
                map: &map,
                target: &zero,
                bounds: &domain.bounds,
                feasible: domain.feasible(),
            };
            let best = problem
                .multi_start(&domain.starts, &sopts)
                .map_or(f64::INFINITY, |s| s.residual);
            Ok((eps, best))
        })
        .collect()
}

/// Sweep ε and decide via the contrapositive of the adversary theorem.
///
/// `chi` is the caller's Euler characteristic for the target set `A`
/// (or safe set `S`); `None` means unknown.
pub fn adversary_intersection_test(
    sys: &ControlSystem,
    x: &AdversaryFamily,
    w: &Region,
    eps_list: &[f64],
    chi: Option<i64>,
    opts: &SearchOptions,
) -> Result<ObstructionReport, SystemError> {
    let residuals = adversary_residuals(sys, x, w, eps_list, opts)?;
    let all_positive = !residuals.is_empty() && residuals.iter().all(|(_, r)| *r > opts.solver_tol);
    let any_hit = residuals.iter().any(|(_, r)| *r <= opts.solver_tol);
    let verdict = if any_hit {
        Verdict::NoObstruction
    } else if all_positive && chi.is_some_and(|c| c != 0) {
        Verdict::ObstructionFound
    } else {
        Verdict::Inconclusive
    };
    let mut rep = ObstructionReport::new(verdict)
        .with("all_eps_positive", f64::from(u8::from(all_positive)))
        .with("solver_tol", opts.solver_tol)
        .with("starts", opts.starts as f64)
        .assume(SAMPLED_NOT_PROVEN)
        .assume(format!(
            "{} multi-start points per epsilon over the search region and control box {:?}",
            opts.starts, opts.control_bounds
        ));
    if let Some(c) = chi {
        rep = rep.with("chi", c as f64);
    } else {
        rep = rep.assume("Euler characteristic of the target set unavailable");
    }
    for (eps, r) in residuals {
        rep = rep.with(eps_key(eps), r);
    }
    if verdict == Verdict::NoObstruction {
        rep = rep.assume(FAMILY_ONLY);
    }
    Ok(rep)
}

/// Can `S` be rendered safe? `χ(S)` comes from [`region_euler_char`] (or
/// the region's supplied value); a zero or unknown χ is always
/// inconclusive.
pub fn safety_test(
    sys: &ControlSystem,
    s: &Region,
    x: &AdversaryFamily,
    eps_list: &[f64],
    opts: &SearchOptions,
) -> Result<ObstructionReport, SystemError> {
    let chi = region_euler_char(s);
    let mut rep = adversary_intersection_test(sys, x, s, eps_list, chi.as_ref().ok().copied(), opts)?;
    match chi {
        Ok(0) => {
            rep.verdict = Verdict::Inconclusive;
            rep = rep.assume("chi(S) = 0, so the safety theorem gives no information");
        }
        Err(e) => {
            rep.verdict = Verdict::Inconclusive;
            rep = rep.assume(format!("chi(S) unavailable: {e}"));
        }
        Ok(_) => {}
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanReport {
    /// The rank condition held at every sample.
    pub holds: bool,
    pub samples: usize,
    pub failures: Vec<Point>,
}

/// Rank condition for affine systems at each sample `x`:
///
/// - `|F(x)| > rank_tol`: `rank[Y g..] = rank[F Y g..] - 1` (F outside the span);
/// - otherwise: `rank[g..] = rank[Y g..] - 1` (Y outside the span of the g's).
pub fn affine_span_test(
    sys: &ControlSystem,
    y: &VectorField,
    samples: &[Point],
    rank_tol: f64,
) -> Result<SpanReport, SystemError> {
    let parts = sys.affine_parts().ok_or(SystemError::NotAffine)?;
    let mut failures = Vec::new();
    for p in samples {
        let x = p.coords();
        let f = parts.drift.eval(x)?;
        let yv = y.eval(x)?;
        let gs = parts
            .fields
            .iter()
            .map(|g| g.eval(x))
            .collect::<Result<Vec<_>, _>>()?;
        let mut with_y: Vec<&[f64]> = vec![&yv];
        with_y.extend(gs.iter().map(Vec::as_slice));
        let ok = if norm(&f) > rank_tol {
            let mut with_f: Vec<&[f64]> = vec![&f];
            with_f.extend(with_y.iter().copied());
            rank(&from_columns(&with_y), rank_tol) + 1 == rank(&from_columns(&with_f), rank_tol)
        } else {
            let only_g: Vec<&[f64]> = gs.iter().map(Vec::as_slice).collect();
            let rg = if only_g.is_empty() { 0 } else { rank(&from_columns(&only_g), rank_tol) };
            rg + 1 == rank(&from_columns(&with_y), rank_tol)
        };
        if !ok {
            failures.push(p.clone());
        }
    }
    Ok(SpanReport {
        holds: failures.is_empty() && !samples.is_empty(),
        samples: samples.len(),
        failures,
    })
}

/// Outcome of one sub-test fed into [`stabilizability_verdict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Finding {
    /// Every ε in the sweep left a positive residual.
    AdversarySeparated(bool),
    AffineSpan(bool),
    /// Second-order systems: a field nowhere tangent to the distribution.
    Transversality(bool),
    /// Planar degree `d ∉ {±1}` around an isolated equilibrium.
    CoronDegree(bool),
}

impl Finding {
    fn name(&self) -> &'static str {
        match self {
            Finding::AdversarySeparated(_) => "adversary_separated",
            Finding::AffineSpan(_) => "affine_span",
            Finding::Transversality(_) => "transversality",
            Finding::CoronDegree(_) => "coron_degree",
        }
    }

    fn positive(&self) -> bool {
        match *self {
            Finding::AdversarySeparated(b)
            | Finding::AffineSpan(b)
            | Finding::Transversality(b)
            | Finding::CoronDegree(b) => b,
        }
    }

    /// Read `all_eps_positive` off an adversary or safety report.
    pub fn from_adversary_report(r: &ObstructionReport) -> Self {
        Finding::AdversarySeparated(r.evidence("all_eps_positive") == Some(1.0))
    }
}

/// ObstructionFound iff `χ ≠ 0` and at least one finding is positive;
/// otherwise Inconclusive. Every positive finding is listed.
pub fn stabilizability_verdict(chi: Option<i64>, findings: &[Finding]) -> ObstructionReport {
    let passing: Vec<&str> = findings.iter().filter(|f| f.positive()).map(Finding::name).collect();
    let verdict = match chi {
        Some(c) if c != 0 && !passing.is_empty() => Verdict::ObstructionFound,
        _ => Verdict::Inconclusive,
    };
    let mut rep = ObstructionReport::new(verdict);
    for f in findings {
        rep = rep.with(f.name(), f64::from(u8::from(f.positive())));
    }
    match chi {
        Some(c) => rep = rep.with("chi", c as f64),
        None => rep = rep.assume("Euler characteristic of the target set unavailable"),
    }
    if chi == Some(0) {
        rep = rep.assume("chi(A) = 0: the obstruction theorems require a nonzero Euler characteristic");
    }
    if !passing.is_empty() {
        rep = rep.assume(format!("passing tests: {}", passing.join(", ")));
    }
    rep.assume("necessary conditions only: absence of an obstruction is never reported")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn heisenberg() -> ControlSystem {
        let s = ModelSpace::euclidean(&["x", "y", "z"]).unwrap();
        let drift = VectorField::zero(&s);
        let g1 = VectorField::parse(&s, &["1", "0", "y"]).unwrap();
        let g2 = VectorField::parse(&s, &["0", "1", "-x"]).unwrap();
        ControlSystem::affine(drift, vec![g1, g2], &["u", "v"]).unwrap()
    }

    #[test]
    fn affine_consistency_is_checked() {
        let s = ModelSpace::euclidean(&["x", "y", "z"]).unwrap();
        let dyns = ["u", "v", "y*u - x*v"].map(|e| parse_expr(e).unwrap()).to_vec();
        let sys = ControlSystem::new(&s, &["u", "v"], dyns).unwrap();
        let g1 = VectorField::parse(&s, &["1", "0", "y"]).unwrap();
        let g2 = VectorField::parse(&s, &["0", "1", "x"]).unwrap();
        let err = sys.with_affine(VectorField::zero(&s), vec![g1, g2]);
        assert!(matches!(err, Err(SystemError::AffineMismatch { .. })));
        let eval = heisenberg().dynamics()[2]
            .eval(&[("x", 1.0), ("y", 2.0), ("u", 3.0), ("v", 4.0)].into_iter().collect())
            .unwrap();
        assert_eq!(eval, 2.0);
    }

    #[test]
    fn control_names_must_be_fresh() {
        let s = ModelSpace::plane();
        let d = vec![parse_expr("x").unwrap(), parse_expr("y").unwrap()];
        assert!(matches!(
            ControlSystem::new(&s, &["x"], d.clone()),
            Err(SystemError::NameClash(_))
        ));
        assert!(ControlSystem::new(&s, &["u", "u"], d).is_err());
    }

    #[test]
    fn target_grid_respects_radius() {
        let t = target_grid(2, 0.1, 5);
        assert_eq!(t.len(), 13);
        assert!(t.iter().all(|c| norm(c) <= 0.1 + 1e-15));
        assert!(target_grid(3, 0.1, 5).contains(&vec![0.0, 0.0, 0.1]));
    }

    #[test]
    fn single_integrator_hits_everything() {
        let s = ModelSpace::euclidean(&["x"]).unwrap();
        let sys = ControlSystem::new(&s, &["u"], vec![parse_expr("u").unwrap()]).unwrap();
        let w = Region::real_box(&s, &[(-1.0, 1.0)]).unwrap();
        let rep = brockett_image_test(&sys, &w, 0.5, 7, &SearchOptions::symmetric(1, 1.0)).unwrap();
        assert!(rep.covered);
        for t in &rep.targets {
            let z = t.witness.as_ref().unwrap();
            assert!((z[1] - t.target[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn heisenberg_misses_vertical_target() {
        let sys = heisenberg();
        let s = sys.space().clone();
        let w = Region::real_box(&s, &[(-1.0, 1.0); 3]).unwrap();
        let rep = brockett_targets(&sys, &w, &[vec![0.0, 0.0, 0.1]], &SearchOptions::symmetric(2, 10.0))
            .unwrap();
        assert!(!rep.covered);
        // min over |(x, y)| ≤ √2 of |(u, v, yu - xv - 0.1)| is 0.1/√3.
        let miss = rep.misses().next().unwrap();
        assert!(miss.best_residual >= 0.1 / 3f64.sqrt() - 1e-9, "{miss:?}");
        assert!(miss.best_residual < 0.1 / 3f64.sqrt() + 1e-6);
    }

    #[test]
    fn zero_adversary_intersects() {
        let sys = heisenberg();
        let s = sys.space().clone();
        let w = Region::real_box(&s, &[(-1.0, 1.0); 3]).unwrap();
        let x = AdversaryFamily::new(&s, vec![ScalarExpr::zero(); 3], "eps").unwrap();
        let rep = adversary_intersection_test(&sys, &x, &w, &[0.1], Some(1), &SearchOptions::symmetric(2, 10.0))
            .unwrap();
        assert_eq!(rep.verdict, Verdict::NoObstruction);
        assert!(rep.assumptions.iter().any(|a| a == FAMILY_ONLY));
    }

    #[test]
    fn verdict_needs_nonzero_chi() {
        let all = [Finding::AffineSpan(true), Finding::AdversarySeparated(true)];
        assert_eq!(stabilizability_verdict(Some(1), &all).verdict, Verdict::ObstructionFound);
        assert_eq!(stabilizability_verdict(Some(0), &all).verdict, Verdict::Inconclusive);
        assert_eq!(stabilizability_verdict(None, &all).verdict, Verdict::Inconclusive);
        assert_eq!(
            stabilizability_verdict(Some(2), &[Finding::AffineSpan(false)]).verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn span_test_examples() {
        let sys = heisenberg();
        let s = sys.space().clone();
        let y = VectorField::parse(&s, &["0", "0", "1"]).unwrap();
        let w = Region::real_box(&s, &[(-2.0, 2.0); 3]).unwrap();
        let pts = w.sample_interior(50, 1);
        assert!(affine_span_test(&sys, &y, &pts, 1e-10).unwrap().holds);

        let p = ModelSpace::plane();
        let e1 = VectorField::parse(&p, &["1", "0"]).unwrap();
        let e2 = VectorField::parse(&p, &["0", "1"]).unwrap();
        let full = ControlSystem::affine(VectorField::zero(&p), vec![e1, e2], &["u", "v"]).unwrap();
        let y = VectorField::parse(&p, &["x", "1"]).unwrap();
        let pts = Region::unit_disk().sample_interior(20, 0);
        assert!(!affine_span_test(&full, &y, &pts, 1e-10).unwrap().holds);
    }

    #[test]
    fn report_json_roundtrip() {
        let rep = ObstructionReport::new(Verdict::Inconclusive)
            .with("chi", 0.0)
            .assume("x");
        let back: ObstructionReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }
}

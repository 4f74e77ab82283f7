//! Flat model manifolds `R^k x T^l`, points, compact regions and boundary
//! samplers.
//!
//! Coordinates are chart coordinates: Real factors are plain reals, Angle
//! factors are stored in `[0, 2π)`. Regions are built from one base shape
//! (box, ball, planar annulus), minus open ball obstacles, intersected with
//! optional implicit constraints `g(x) ≤ 0`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{CompiledExpr, EvalError, ScalarExpr};
use crate::linalg::{dot, norm};

/// Default boundary tolerance in chart units.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("model space needs at least one factor")]
    Empty,
    #[error("duplicate coordinate name `{0}`")]
    DuplicateName(String),
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point and region live in different spaces")]
    SpaceMismatch,
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("region has empty boundary")]
    EmptyBoundary,
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error(transparent)]
    Expr(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Real,
    Angle,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factor {
    pub name: String,
    pub kind: FactorKind,
}

impl Factor {
    pub fn real(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FactorKind::Real,
        }
    }

    pub fn angle(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FactorKind::Angle,
        }
    }
}

/// An ordered product of real lines and circles.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpace {
    factors: Arc<[Factor]>,
}

impl ModelSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self, SpaceError> {
        if factors.is_empty() {
            return Err(SpaceError::Empty);
        }
        for (i, f) in factors.iter().enumerate() {
            if factors[..i].iter().any(|g| g.name == f.name) {
                return Err(SpaceError::DuplicateName(f.name.clone()));
            }
        }
        Ok(Self {
            factors: factors.into(),
        })
    }

    /// `R^n` with the given coordinate names.
    pub fn euclidean(names: &[&str]) -> Result<Self, SpaceError> {
        Self::new(names.iter().map(|n| Factor::real(n)).collect())
    }

    pub fn plane() -> Self {
        Self::euclidean(&["x", "y"]).expect("distinct names")
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn kind(&self, i: usize) -> FactorKind {
        self.factors[i].kind
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn real_indices(&self) -> Vec<usize> {
        self.indices(FactorKind::Real)
    }

    pub fn angle_indices(&self) -> Vec<usize> {
        self.indices(FactorKind::Angle)
    }

    fn indices(&self, kind: FactorKind) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.kind(i) == kind).collect()
    }

    /// Wrap Angle coordinates into `[0, 2π)` in place.
    pub fn canonicalize(&self, coords: &mut [f64]) {
        for (c, f) in coords.iter_mut().zip(self.factors.iter()) {
            if f.kind == FactorKind::Angle {
                *c = wrap_angle(*c);
            }
        }
    }

    /// Euclidean on Real factors plus shortest arc length on Angle factors.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(self.factors.iter())
            .map(|((x, y), f)| {
                let d = match f.kind {
                    FactorKind::Real => x - y,
                    FactorKind::Angle => arc_distance(*x, *y),
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for ModelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|fa| match fa.kind {
                FactorKind::Real => format!("{}∈R", fa.name),
                FactorKind::Angle => format!("{}∈S1", fa.name),
            })
            .collect();
        write!(f, "{}", parts.join(" x "))
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn arc_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    space: ModelSpace,
    coords: Vec<f64>,
}

impl Point {
    pub fn new(space: &ModelSpace, mut coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.len() != space.dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: space.dim(),
                got: coords.len(),
            });
        }
        space.canonicalize(&mut coords);
        Ok(Self {
            space: space.clone(),
            coords,
        })
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.space.distance(&self.coords, &other.coords)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Containment {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    /// One entry per factor. Real factors need `Some((lo, hi))`; Angle
    /// factors take `None` for the full circle or `Some((start, end))` for
    /// the arc swept counterclockwise from `start` to `end`.
    Box { intervals: Vec<Option<(f64, f64)>> },
    /// Closed ball over all Real factors; Angle factors unconstrained.
    Ball { center: Vec<f64>, radius: f64 },
    /// Planar closed annulus `inner ≤ |p - center| ≤ outer` over the two
    /// Real factors of the space; Angle factors unconstrained.
    Annulus {
        center: [f64; 2],
        inner: f64,
        outer: f64,
    },
}

/// Open ball removed from the region, over the Real factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone)]
struct Constraint {
    expr: ScalarExpr,
    value: CompiledExpr,
    gradient: Vec<CompiledExpr>,
}

/// Compact subset of a model space.
#[derive(Debug, Clone)]
pub struct Region {
    space: ModelSpace,
    base: Base,
    obstacles: Vec<Obstacle>,
    constraints: Vec<Constraint>,
    euler_char: Option<i64>,
    tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub point: Point,
    pub outward_normal: Vec<f64>,
}

impl Region {
    pub fn new(space: &ModelSpace, base: Base) -> Result<Self, SpaceError> {
        let reals = space.real_indices();
        match &base {
            Base::Box { intervals } => {
                if intervals.len() != space.dim() {
                    return Err(SpaceError::DimensionMismatch {
                        expected: space.dim(),
                        got: intervals.len(),
                    });
                }
                for (i, iv) in intervals.iter().enumerate() {
                    match (space.kind(i), iv) {
                        (FactorKind::Real, None) => {
                            return Err(SpaceError::InvalidRegion(format!(
                                "Real factor `{}` must be bounded",
                                space.factors()[i].name
                            )))
                        }
                        (FactorKind::Real, Some((lo, hi))) if !(lo < hi) => {
                            return Err(SpaceError::InvalidRegion(format!(
                                "empty interval [{lo}, {hi}]"
                            )))
                        }
                        (FactorKind::Angle, Some((a, b))) if !(a < b && b - a < TAU) => {
                            return Err(SpaceError::InvalidRegion(format!(
                                "arc [{a}, {b}] must satisfy start < end < start + 2π"
                            )))
                        }
                        _ => {}
                    }
                }
            }
            Base::Ball { center, radius } => {
                if center.len() != reals.len() || reals.is_empty() {
                    return Err(SpaceError::InvalidRegion(
                        "ball center needs one entry per Real factor".into(),
                    ));
                }
                if !(*radius > 0.0) {
                    return Err(SpaceError::InvalidRegion("ball radius must be positive".into()));
                }
            }
            Base::Annulus { inner, outer, .. } => {
                if reals.len() != 2 {
                    return Err(SpaceError::InvalidRegion(
                        "annulus needs exactly two Real factors".into(),
                    ));
                }
                if !(0.0 < *inner && inner < outer) {
                    return Err(SpaceError::InvalidRegion(
                        "annulus needs 0 < inner < outer".into(),
                    ));
                }
            }
        }
        Ok(Self {
            space: space.clone(),
            base,
            obstacles: Vec::new(),
            constraints: Vec::new(),
            euler_char: None,
            tol: BOUNDARY_TOL,
        })
    }

    pub fn unit_disk() -> Self {
        Self::ball(&ModelSpace::plane(), vec![0.0, 0.0], 1.0).expect("valid disk")
    }

    pub fn ball(space: &ModelSpace, center: Vec<f64>, radius: f64) -> Result<Self, SpaceError> {
        Self::new(space, Base::Ball { center, radius })
    }

    pub fn annulus(
        space: &ModelSpace,
        center: [f64; 2],
        inner: f64,
        outer: f64,
    ) -> Result<Self, SpaceError> {
        Self::new(
            space,
            Base::Annulus {
                center,
                inner,
                outer,
            },
        )
    }

    /// Box over a space whose factors are all Real.
    pub fn real_box(space: &ModelSpace, bounds: &[(f64, f64)]) -> Result<Self, SpaceError> {
        Self::new(
            space,
            Base::Box {
                intervals: bounds.iter().map(|b| Some(*b)).collect(),
            },
        )
    }

    pub fn with_obstacle(mut self, center: Vec<f64>, radius: f64) -> Result<Self, SpaceError> {
        let reals = self.space.real_indices();
        if center.len() != reals.len() {
            return Err(SpaceError::InvalidRegion(
                "obstacle center needs one entry per Real factor".into(),
            ));
        }
        if !(radius > 0.0) {
            return Err(SpaceError::InvalidRegion("obstacle radius must be positive".into()));
        }
        let inside = match &self.base {
            Base::Box { intervals } => reals.iter().zip(&center).all(|(&i, c)| {
                let (lo, hi) = intervals[i].expect("validated");
                c - radius > lo && c + radius < hi
            }),
            Base::Ball { center: c0, radius: r0 } => euclid(&center, c0) + radius < *r0,
            Base::Annulus {
                center: c0,
                inner,
                outer,
            } => {
                let d = euclid(&center, c0);
                d - radius > *inner && d + radius < *outer
            }
        };
        if !inside {
            return Err(SpaceError::InvalidRegion(
                "obstacle must lie in the interior of the base shape".into(),
            ));
        }
        if self
            .obstacles
            .iter()
            .any(|o| euclid(&o.center, &center) <= o.radius + radius)
        {
            return Err(SpaceError::InvalidRegion("obstacles must be pairwise disjoint".into()));
        }
        self.obstacles.push(Obstacle { center, radius });
        Ok(self)
    }

    /// Add an implicit constraint `g ≤ 0` in the space's coordinates.
    pub fn with_constraint(mut self, g: ScalarExpr) -> Result<Self, SpaceError> {
        let names = self.space.names();
        let value = g.compile(&names)?;
        let gradient = names
            .iter()
            .map(|n| g.differentiate(n).compile(&names))
            .collect::<Result<Vec<_>, _>>()?;
        self.constraints.push(Constraint {
            expr: g,
            value,
            gradient,
        });
        Ok(self)
    }

    pub fn with_euler_char(mut self, chi: i64) -> Self {
        self.euler_char = Some(chi);
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn constraints(&self) -> impl Iterator<Item = &ScalarExpr> {
        self.constraints.iter().map(|c| &c.expr)
    }

    pub fn supplied_euler_char(&self) -> Option<i64> {
        self.euler_char
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn contains(&self, p: &Point) -> Result<Containment, SpaceError> {
        if p.space() != &self.space {
            return Err(SpaceError::SpaceMismatch);
        }
        Ok(self.classify(p.coords()))
    }

    /// Classification of raw chart coordinates (angles need not be wrapped).
    pub fn classify(&self, x: &[f64]) -> Containment {
        let m = self.margin(x);
        if m > self.tol {
            Containment::Interior
        } else if m >= -self.tol {
            Containment::Boundary
        } else {
            Containment::Exterior
        }
    }

    /// Signed distance-like margin: positive inside, negative outside.
    fn margin(&self, x: &[f64]) -> f64 {
        let reals: Vec<f64> = self.space.real_indices().iter().map(|&i| x[i]).collect();
        let mut m = match &self.base {
            Base::Box { intervals } => intervals
                .iter()
                .enumerate()
                .map(|(i, iv)| match (self.space.kind(i), iv) {
                    (_, None) => f64::INFINITY,
                    (FactorKind::Real, Some((lo, hi))) => (x[i] - lo).min(hi - x[i]),
                    (FactorKind::Angle, Some((a, b))) => arc_margin(x[i], *a, *b),
                })
                .fold(f64::INFINITY, f64::min),
            Base::Ball { center, radius } => radius - euclid(&reals, center),
            Base::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = euclid(&reals, center);
                (r - inner).min(outer - r)
            }
        };
        for o in &self.obstacles {
            m = m.min(euclid(&reals, &o.center) - o.radius);
        }
        for c in &self.constraints {
            m = m.min(match c.value.eval(x) {
                Ok(g) => -g,
                Err(_) => f64::NEG_INFINITY,
            });
        }
        m
    }

    /// True when every implicit constraint `g ≤ 0` holds at `x`.
    pub fn constraints_hold(&self, x: &[f64]) -> bool {
        self.constraints
            .iter()
            .all(|c| matches!(c.value.eval(x), Ok(g) if g <= 0.0))
    }

    /// Per-factor bounding intervals (Angle factors: arc or `[0, 2π)`).
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let reals = self.space.real_indices();
        let mut out: Vec<(f64, f64)> = vec![(0.0, TAU); self.space.dim()];
        match &self.base {
            Base::Box { intervals } => {
                for (o, iv) in out.iter_mut().zip(intervals) {
                    if let Some(b) = iv {
                        *o = *b;
                    }
                }
            }
            Base::Ball { center, radius } => {
                for (&i, c) in reals.iter().zip(center) {
                    out[i] = (c - radius, c + radius);
                }
            }
            Base::Annulus { center, outer, .. } => {
                for (&i, c) in reals.iter().zip(center) {
                    out[i] = (c - outer, c + outer);
                }
            }
        }
        out
    }

    /// Largest Euclidean norm of the Real-coordinate part over the region's
    /// bounding box.
    pub fn real_radius_bound(&self) -> f64 {
        let bb = self.bounding_box();
        self.space
            .real_indices()
            .iter()
            .map(|&i| {
                let (lo, hi) = bb[i];
                lo.abs().max(hi.abs()).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    fn components(&self) -> Vec<Component> {
        let reals = self.space.real_indices();
        let mut out = Vec::new();
        match &self.base {
            Base::Box { intervals } => {
                for (i, iv) in intervals.iter().enumerate() {
                    if iv.is_some() {
                        out.push(Component::Face { factor: i, upper: false });
                        out.push(Component::Face { factor: i, upper: true });
                    }
                }
            }
            Base::Ball { center, radius } => out.push(Component::Sphere {
                center: center.clone(),
                radius: *radius,
                sign: 1.0,
            }),
            Base::Annulus {
                center,
                inner,
                outer,
            } => {
                out.push(Component::Sphere {
                    center: center.to_vec(),
                    radius: *outer,
                    sign: 1.0,
                });
                out.push(Component::Sphere {
                    center: center.to_vec(),
                    radius: *inner,
                    sign: -1.0,
                });
            }
        }
        debug_assert!(self.obstacles.iter().all(|o| o.center.len() == reals.len()));
        for o in &self.obstacles {
            out.push(Component::Sphere {
                center: o.center.clone(),
                radius: o.radius,
                sign: -1.0,
            });
        }
        for k in 0..self.constraints.len() {
            out.push(Component::Implicit(k));
        }
        out
    }

    /// Deterministic quasi-uniform boundary samples with outward unit
    /// normals. `n` is split evenly over the boundary components (outer
    /// boundary, inner boundary, each obstacle, each implicit constraint);
    /// normals on obstacle boundaries point into the obstacle.
    ///
    /// Regions cut by implicit constraints may return fewer than `n`
    /// samples: candidate points on one component that fall outside the
    /// region are discarded.
    pub fn sample_boundary(&self, n: usize) -> Result<Vec<BoundarySample>, SpaceError> {
        const MIN: usize = 4;
        if n < MIN {
            return Err(SpaceError::TooFewSamples { min: MIN, got: n });
        }
        let comps = self.components();
        if comps.is_empty() {
            return Err(SpaceError::EmptyBoundary);
        }
        let k = comps.len();
        let mut out = Vec::with_capacity(n);
        for (ci, comp) in comps.iter().enumerate() {
            let want = n / k + usize::from(ci < n % k);
            let mut got = 0;
            let cap = 64 * want.max(1);
            let mut j = 0;
            while got < want && j < cap {
                if let Some((x, normal)) = self.candidate(comp, j, want) {
                    if self.classify(&x) == Containment::Boundary {
                        out.push(BoundarySample {
                            point: Point::new(&self.space, x)?,
                            outward_normal: normal,
                        });
                        got += 1;
                    }
                }
                j += 1;
            }
        }
        Ok(out)
    }

    fn candidate(&self, comp: &Component, j: usize, want: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        let dim = self.space.dim();
        let reals = self.space.real_indices();
        let bb = self.bounding_box();
        match comp {
            Component::Sphere {
                center,
                radius,
                sign,
            } => {
                let others: Vec<usize> = (0..dim).filter(|i| !reals.contains(i)).collect();
                // Equally spaced points on a planar circle when nothing else
                // varies; otherwise a Halton stream over (direction, rest).
                let h_dims = sphere_param_dims(reals.len()) + others.len();
                let (dir, rest) = if reals.len() == 2 && others.is_empty() && j < want {
                    let t = TAU * j as f64 / want as f64;
                    (vec![t.cos(), t.sin()], Vec::new())
                } else {
                    let h = halton(j + 1, h_dims);
                    let (hs, ho) = h.split_at(sphere_param_dims(reals.len()));
                    (sphere_direction(hs, reals.len(), j), ho.to_vec())
                };
                let mut x = vec![0.0; dim];
                let mut normal = vec![0.0; dim];
                for (k, &i) in reals.iter().enumerate() {
                    x[i] = center[k] + radius * dir[k];
                    normal[i] = sign * dir[k];
                }
                for (&i, u) in others.iter().zip(rest) {
                    x[i] = bb[i].0 + u * (bb[i].1 - bb[i].0);
                }
                Some((x, normal))
            }
            Component::Face { factor, upper } => {
                let h = halton(j + 1, dim.saturating_sub(1).max(1));
                let mut x = vec![0.0; dim];
                let mut normal = vec![0.0; dim];
                let mut hi = h.iter();
                for i in 0..dim {
                    if i == *factor {
                        x[i] = if *upper { bb[i].1 } else { bb[i].0 };
                        normal[i] = if *upper { 1.0 } else { -1.0 };
                    } else {
                        let u = hi.next().copied().unwrap_or(0.5);
                        x[i] = bb[i].0 + u * (bb[i].1 - bb[i].0);
                    }
                }
                Some((x, normal))
            }
            Component::Implicit(k) => {
                let c = &self.constraints[*k];
                let h = halton(j + 1, dim);
                let mut x: Vec<f64> = (0..dim)
                    .map(|i| bb[i].0 + h[i] * (bb[i].1 - bb[i].0))
                    .collect();
                let mut grad = vec![0.0; dim];
                for _ in 0..60 {
                    let g = c.value.eval(&x).ok()?;
                    for (gi, d) in grad.iter_mut().zip(&c.gradient) {
                        *gi = d.eval(&x).ok()?;
                    }
                    let gg = dot(&grad, &grad);
                    if gg < 1e-24 {
                        return None;
                    }
                    if g.abs() < 1e-13 {
                        break;
                    }
                    for (xi, gi) in x.iter_mut().zip(&grad) {
                        *xi -= g * gi / gg;
                    }
                }
                if c.value.eval(&x).ok()?.abs() > 1e-11 {
                    return None;
                }
                let nrm = norm(&grad);
                self.space.canonicalize(&mut x);
                Some((x, grad.iter().map(|g| g / nrm).collect()))
            }
        }
    }

    /// `n` deterministic interior points: a Halton sequence with a
    /// seed-dependent random shift, filtered to the interior.
    ///
    /// Returns fewer than `n` points only if the region is so thin that
    /// `10_000 * n` candidates did not suffice.
    pub fn sample_interior(&self, n: usize, seed: u64) -> Vec<Point> {
        let dim = self.space.dim();
        let bb = self.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mut out = Vec::with_capacity(n);
        let mut j = 1;
        while out.len() < n && j <= 10_000 * n.max(1) {
            let h = halton(j, dim);
            let x: Vec<f64> = (0..dim)
                .map(|i| {
                    let u = (h[i] + shift[i]).fract();
                    bb[i].0 + u * (bb[i].1 - bb[i].0)
                })
                .collect();
            if self.classify(&x) == Containment::Interior {
                out.push(Point::new(&self.space, x).expect("dimension matches"));
            }
            j += 1;
        }
        out
    }

    /// Cell-centred grid with `per_axis` points per factor over the bounding
    /// box, filtered to the interior. Returns the points and the grid
    /// spacing (largest cell side).
    pub fn interior_grid(&self, per_axis: usize) -> (Vec<Point>, f64) {
        let dim = self.space.dim();
        let bb = self.bounding_box();
        let per_axis = per_axis.max(1);
        let steps: Vec<f64> = bb.iter().map(|(lo, hi)| (hi - lo) / per_axis as f64).collect();
        let total = per_axis.pow(dim as u32);
        let mut out = Vec::new();
        for idx in 0..total {
            let mut rem = idx;
            let mut x = vec![0.0; dim];
            for i in 0..dim {
                let k = rem % per_axis;
                rem /= per_axis;
                x[i] = bb[i].0 + (k as f64 + 0.5) * steps[i];
            }
            if self.classify(&x) == Containment::Interior {
                out.push(Point::new(&self.space, x).expect("dimension matches"));
            }
        }
        (out, steps.iter().copied().fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone)]
enum Component {
    Sphere {
        center: Vec<f64>,
        radius: f64,
        sign: f64,
    },
    Face {
        factor: usize,
        upper: bool,
    },
    Implicit(usize),
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn arc_margin(theta: f64, start: f64, end: f64) -> f64 {
    let len = end - start;
    let d = wrap_angle(theta - start);
    if d <= len {
        d.min(len - d)
    } else {
        -(d - len).min(TAU - d)
    }
}

fn sphere_param_dims(k: usize) -> usize {
    match k {
        0 | 1 => 0,
        2 => 1,
        3 => 2,
        _ => 2 * k.div_ceil(2),
    }
}

fn sphere_direction(h: &[f64], k: usize, j: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![if j % 2 == 0 { 1.0 } else { -1.0 }],
        2 => {
            let t = TAU * h[0];
            vec![t.cos(), t.sin()]
        }
        3 => {
            let z = 2.0 * h[0] - 1.0;
            let t = TAU * h[1];
            let s = (1.0 - z * z).max(0.0).sqrt();
            vec![s * t.cos(), s * t.sin(), z]
        }
        _ => {
            // Box–Muller on pairs of Halton coordinates, then normalize.
            let mut g = Vec::with_capacity(k + 1);
            for pair in h.chunks(2) {
                let u1 = pair[0].max(1e-300);
                let u2 = pair.get(1).copied().unwrap_or(0.5);
                let r = (-2.0 * u1.ln()).sqrt();
                g.push(r * (TAU * u2).cos());
                g.push(r * (TAU * u2).sin());
            }
            g.truncate(k);
            let n = norm(&g).max(1e-300);
            g.iter().map(|v| v / n).collect()
        }
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `dim` coordinates of the `i`-th Halton point (`i ≥ 1`); `dim ≤ 16`.
pub fn halton(i: usize, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most 16 dimensions");
    PRIMES[..dim]
        .iter()
        .map(|&b| radical_inverse(i as u64, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn annulus() -> Region {
        Region::annulus(&ModelSpace::plane(), [0.0, 0.0], 1.0, 2.0).unwrap()
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(&ModelSpace::plane(), c.to_vec()).unwrap()
    }

    #[test]
    fn space_validation() {
        assert_eq!(ModelSpace::new(vec![]), Err(SpaceError::Empty));
        assert_eq!(
            ModelSpace::euclidean(&["x", "x"]),
            Err(SpaceError::DuplicateName("x".into()))
        );
    }

    #[test]
    fn angle_wrapping() {
        let s = ModelSpace::new(vec![Factor::real("x"), Factor::angle("th")]).unwrap();
        let p = Point::new(&s, vec![1.0, TAU + 0.3]).unwrap();
        assert!((p.coords()[1] - 0.3).abs() < 1e-12);
        let p = Point::new(&s, vec![1.0, -0.1]).unwrap();
        assert!((p.coords()[1] - (TAU - 0.1)).abs() < 1e-12);
        assert!((s.distance(&[0.0, 0.1], &[0.0, TAU - 0.1]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn containment_examples() {
        let d = Region::unit_disk();
        assert_eq!(d.contains(&pt(&[0.0, 0.0])), Ok(Containment::Interior));
        assert_eq!(d.contains(&pt(&[1.0, 0.0])), Ok(Containment::Boundary));
        assert_eq!(d.contains(&pt(&[1.1, 0.0])), Ok(Containment::Exterior));
        let a = annulus().with_obstacle(vec![1.5, 0.0], 0.1).unwrap();
        assert_eq!(a.contains(&pt(&[1.5, 0.0])), Ok(Containment::Exterior));
        let other = ModelSpace::euclidean(&["a", "b"]).unwrap();
        let p = Point::new(&other, vec![0.0, 0.0]).unwrap();
        assert_eq!(d.contains(&p), Err(SpaceError::SpaceMismatch));
    }

    #[test]
    fn invalid_regions() {
        let a = annulus();
        assert!(a.clone().with_obstacle(vec![1.95, 0.0], 0.1).is_err());
        let a = a.with_obstacle(vec![1.5, 0.0], 0.2).unwrap();
        assert!(a.with_obstacle(vec![1.5, 0.3], 0.2).is_err());
        assert!(Region::annulus(&ModelSpace::plane(), [0.0, 0.0], 2.0, 1.0).is_err());
        let s = ModelSpace::new(vec![Factor::real("x"), Factor::angle("th")]).unwrap();
        assert!(Region::new(&s, Base::Box { intervals: vec![None, None] }).is_err());
    }

    #[test]
    fn disk_boundary_samples() {
        let s = Region::unit_disk().sample_boundary(4).unwrap();
        assert_eq!(s.len(), 4);
        for b in &s {
            let c = b.point.coords();
            assert!((norm(c) - 1.0).abs() < 1e-12);
            assert!((b.outward_normal[0] - c[0]).abs() < 1e-12);
            assert!((b.outward_normal[1] - c[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn annulus_boundary_split() {
        let s = annulus().sample_boundary(16).unwrap();
        assert_eq!(s.len(), 16);
        let outer: Vec<_> = s.iter().filter(|b| (norm(b.point.coords()) - 2.0).abs() < 1e-9).collect();
        let inner: Vec<_> = s.iter().filter(|b| (norm(b.point.coords()) - 1.0).abs() < 1e-9).collect();
        assert_eq!((outer.len(), inner.len()), (8, 8));
        for b in outer {
            assert!(dot(&b.outward_normal, b.point.coords()) > 0.0);
        }
        for b in inner {
            assert!(dot(&b.outward_normal, b.point.coords()) < 0.0);
        }
    }

    #[test]
    fn obstacle_normals_point_into_obstacle() {
        let r = annulus().with_obstacle(vec![1.5, 0.0], 0.1).unwrap();
        let s = r.sample_boundary(30).unwrap();
        assert_eq!(s.len(), 30);
        let on_obstacle: Vec<_> = s
            .iter()
            .filter(|b| (euclid(b.point.coords(), &[1.5, 0.0]) - 0.1).abs() < 1e-9)
            .collect();
        assert_eq!(on_obstacle.len(), 10);
        for b in on_obstacle {
            let c = b.point.coords();
            let to_center = [1.5 - c[0], -c[1]];
            assert!(dot(&b.outward_normal, &to_center) > 0.0);
        }
        for b in &s {
            assert_eq!(r.contains(&b.point), Ok(Containment::Boundary));
            assert!((norm(&b.outward_normal) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn implicit_constraint_boundary() {
        let s = ModelSpace::new(vec![Factor::real("x"), Factor::real("y"), Factor::angle("th")])
            .unwrap();
        let r = Region::annulus(&s, [0.0, 0.0], 0.5, 2.0)
            .unwrap()
            .with_constraint(parse_expr("x*cos(th) + y*sin(th)").unwrap())
            .unwrap();
        let b = r.sample_boundary(64).unwrap();
        assert!(b.len() >= 48, "only {} samples", b.len());
        for s in &b {
            assert_eq!(r.contains(&s.point), Ok(Containment::Boundary));
            assert!((norm(&s.outward_normal) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn torus_has_no_boundary() {
        let s = ModelSpace::new(vec![Factor::angle("a"), Factor::angle("b")]).unwrap();
        let r = Region::new(&s, Base::Box { intervals: vec![None, None] }).unwrap();
        assert_eq!(r.sample_boundary(8), Err(SpaceError::EmptyBoundary));
    }

    #[test]
    fn interior_sampling() {
        let s = ModelSpace::euclidean(&["x"]).unwrap();
        let unit = Region::real_box(&s, &[(0.0, 1.0)]).unwrap();
        let pts = unit.sample_interior(3, 0);
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().all(|p| p.coords()[0] > 0.0 && p.coords()[0] < 1.0));

        let r = annulus().with_obstacle(vec![1.5, 0.0], 0.2).unwrap();
        let pts = r.sample_interior(100, 7);
        assert_eq!(pts.len(), 100);
        assert!(pts
            .iter()
            .all(|p| r.contains(p) == Ok(Containment::Interior)));
        assert_eq!(pts, r.sample_interior(100, 7));
        assert_ne!(pts, r.sample_interior(100, 8));
    }
}

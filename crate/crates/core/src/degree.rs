//! Winding numbers of planar fields, indices of isolated zeros, the
//! Poincaré–Hopf consistency check and the planar Coron degree test.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{parse_expr, CompiledMap, EvalError, ParseError, ScalarExpr};
use crate::linalg::norm;
use crate::obstruction::{ControlSystem, ObstructionReport, SystemError, Verdict};
use crate::solve::{Bound, LeastSquares, SolverOptions};
use crate::space::{Containment, FactorKind, Point, Region, SpaceError};
use crate::topology::{region_euler_char, TopologyError};

/// Refinement stops here; a curve still needing finer sampling is rejected.
pub const MAX_SAMPLES: usize = 1 << 20;
pub const MIN_SAMPLES: usize = 64;
const CLOSURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DegreeError {
    #[error("field vanishes on the curve at t = {t} (point {point:?})")]
    FieldVanishes { t: f64, point: [f64; 2] },
    #[error("angle increments still exceed pi/2 at {cap} samples")]
    NonConvergent { cap: usize },
    #[error("curve is not closed: endpoints differ by {gap:e}")]
    OpenCurve { gap: f64 },
    #[error("need at least {MIN_SAMPLES} curve samples, got {0}")]
    TooFewSamples(usize),
    #[error("degree tests need a planar system on two real coordinates")]
    NotPlanar,
    #[error("zero disks {0} and {1} overlap")]
    OverlappingDisks(usize, usize),
    #[error("zero disk {0} is not interior to the region")]
    DiskNotInterior(usize),
    #[error("curve radius {radius} must be smaller than epsilon {eps}")]
    RadiusExceedsEpsilon { radius: f64, eps: f64 },
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// `F(x, y) = (P, Q)`.
#[derive(Debug, Clone)]
pub struct PlanarField {
    components: [ScalarExpr; 2],
    map: CompiledMap,
}

impl PlanarField {
    pub fn new(p: ScalarExpr, q: ScalarExpr) -> Result<Self, DegreeError> {
        Self::with_vars(p, q, ["x", "y"])
    }

    /// Components in coordinates other than `x, y`.
    pub fn with_vars(p: ScalarExpr, q: ScalarExpr, vars: [&str; 2]) -> Result<Self, DegreeError> {
        let map = CompiledMap::new(&[p.clone(), q.clone()], &vars)?;
        Ok(Self {
            components: [p, q],
            map,
        })
    }

    pub fn parse(p: &str, q: &str) -> Result<Self, DegreeError> {
        Self::new(parse_expr(p)?, parse_expr(q)?)
    }

    pub fn components(&self) -> &[ScalarExpr; 2] {
        &self.components
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<[f64; 2], EvalError> {
        let v = self.map.eval(&[x, y])?;
        Ok([v[0], v[1]])
    }

    pub fn scaled(&self, c: f64) -> Self {
        let [p, q] = self.components.clone();
        let k = ScalarExpr::constant(c);
        Self {
            components: [ScalarExpr::mul(k.clone(), p.clone()), ScalarExpr::mul(k.clone(), q.clone())],
            map: CompiledMap::new(&[ScalarExpr::mul(k.clone(), p), ScalarExpr::mul(k, q)], &["x", "y"])
                .expect("scaling keeps the variables"),
        }
    }
}

/// `t ↦ (x(t), y(t))` on `[0, 2π]`, sampled `n` times.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    param: [ScalarExpr; 2],
    map: CompiledMap,
    n: usize,
}

impl ClosedCurve {
    pub fn new(x: ScalarExpr, y: ScalarExpr, n: usize) -> Result<Self, DegreeError> {
        if n < MIN_SAMPLES {
            return Err(DegreeError::TooFewSamples(n));
        }
        let map = CompiledMap::new(&[x.clone(), y.clone()], &["t"])?;
        let a = map.eval(&[0.0])?;
        let b = map.eval(&[TAU])?;
        let gap = norm(&[a[0] - b[0], a[1] - b[1]]);
        if !(gap <= CLOSURE_TOL) {
            return Err(DegreeError::OpenCurve { gap });
        }
        Ok(Self { param: [x, y], map, n })
    }

    /// Counterclockwise circle.
    pub fn circle(center: [f64; 2], radius: f64) -> Result<Self, DegreeError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(DegreeError::BadRadius(radius));
        }
        let t = ScalarExpr::var("t");
        let r = ScalarExpr::constant(radius);
        Self::new(
            ScalarExpr::add(ScalarExpr::constant(center[0]), ScalarExpr::mul(r.clone(), ScalarExpr::cos(t.clone()))),
            ScalarExpr::add(ScalarExpr::constant(center[1]), ScalarExpr::mul(r, ScalarExpr::sin(t))),
            MIN_SAMPLES,
        )
    }

    pub fn with_samples(mut self, n: usize) -> Result<Self, DegreeError> {
        if n < MIN_SAMPLES {
            return Err(DegreeError::TooFewSamples(n));
        }
        self.n = n;
        Ok(self)
    }

    /// Same trace, opposite orientation (`t ↦ 2π − t`).
    pub fn reversed(&self) -> Self {
        let back = ScalarExpr::sub(ScalarExpr::constant(TAU), ScalarExpr::var("t"));
        let [x, y] = &self.param;
        Self::new(x.substitute("t", &back), y.substitute("t", &back), self.n).expect("reversal keeps closure")
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn point(&self, t: f64) -> Result<[f64; 2], EvalError> {
        let v = self.map.eval(&[t])?;
        Ok([v[0], v[1]])
    }
}

/// Winding number plus the sampling that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub degree: i64,
    /// Unrounded `Σ Δθ / 2π`.
    pub raw: f64,
    pub samples: usize,
    pub min_norm: f64,
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Pairwise summation, so the result does not depend on scheduling.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

pub fn winding_number(f: &PlanarField, gamma: &ClosedCurve) -> Result<i64, DegreeError> {
    winding_details(f, gamma).map(|w| w.degree)
}

/// Start at the curve's sample count and double until no wrapped angle
/// increment exceeds π/2.
pub fn winding_details(f: &PlanarField, gamma: &ClosedCurve) -> Result<Winding, DegreeError> {
    let mut n = gamma.n.max(MIN_SAMPLES);
    loop {
        let angles: Vec<(f64, f64)> = (0..=n)
            .into_par_iter()
            .map(|k| {
                let t = if k == n { TAU } else { TAU * k as f64 / n as f64 };
                let p = gamma.point(t)?;
                let v = f.eval(p[0], p[1])?;
                let m = v[0].hypot(v[1]);
                if !(m > 0.0 && m.is_finite()) {
                    return Err(DegreeError::FieldVanishes { t, point: p });
                }
                Ok((v[1].atan2(v[0]), m))
            })
            .collect::<Result<_, _>>()?;
        let incs: Vec<f64> = angles.windows(2).map(|w| wrap_pi(w[1].0 - w[0].0)).collect();
        if incs.iter().all(|d| d.abs() <= PI / 2.0) {
            let raw = pairwise_sum(&incs) / TAU;
            return Ok(Winding {
                degree: raw.round() as i64,
                raw,
                samples: n,
                min_norm: angles.iter().map(|a| a.1).fold(f64::INFINITY, f64::min),
            });
        }
        if n >= MAX_SAMPLES {
            return Err(DegreeError::NonConvergent { cap: MAX_SAMPLES });
        }
        n = (n * 2).min(MAX_SAMPLES);
    }
}

fn planar_coords(p: &Point) -> Result<[f64; 2], DegreeError> {
    let s = p.space();
    if s.dim() != 2 || s.kind(0) != FactorKind::Real || s.kind(1) != FactorKind::Real {
        return Err(DegreeError::NotPlanar);
    }
    Ok([p.coords()[0], p.coords()[1]])
}

/// Winding of `f` along the circle of `radius` about `center`.
pub fn index_of_zero(f: &PlanarField, center: &Point, radius: f64) -> Result<i64, DegreeError> {
    winding_number(f, &ClosedCurve::circle(planar_coords(center)?, radius)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareHopfReport {
    pub inward: bool,
    pub index_sum: i64,
    pub chi: i64,
    pub consistent: bool,
    /// Inward field, `χ ≠ 0`, yet no zero supplied: a zero was missed.
    pub missing_zero: bool,
    pub indices: Vec<i64>,
    pub assumptions: Vec<String>,
}

/// `inward ⇒ Σ index = χ(r)`. The zero list must isolate every zero of
/// `f` in `r`; that completeness is assumed and recorded.
pub fn poincare_hopf_check(
    f: &PlanarField,
    r: &Region,
    zeros: &[(Point, f64)],
    n_boundary: usize,
) -> Result<PoincareHopfReport, DegreeError> {
    let s = r.space();
    if s.dim() != 2 || s.kind(0) != FactorKind::Real || s.kind(1) != FactorKind::Real {
        return Err(DegreeError::NotPlanar);
    }
    for (i, (c, rad)) in zeros.iter().enumerate() {
        let c = planar_coords(c)?;
        if !(*rad > 0.0 && rad.is_finite()) {
            return Err(DegreeError::BadRadius(*rad));
        }
        let interior = r.classify(&c) == Containment::Interior
            && (0..64).all(|k| {
                let a = TAU * k as f64 / 64.0;
                r.classify(&[c[0] + rad * a.cos(), c[1] + rad * a.sin()]) == Containment::Interior
            });
        if !interior {
            return Err(DegreeError::DiskNotInterior(i));
        }
        for (j, (c2, rad2)) in zeros[..i].iter().enumerate() {
            let c2 = planar_coords(c2)?;
            if norm(&[c[0] - c2[0], c[1] - c2[1]]) < rad + rad2 {
                return Err(DegreeError::OverlappingDisks(j, i));
            }
        }
    }
    let inward = r
        .sample_boundary(n_boundary)?
        .iter()
        .map(|b| {
            let x = b.point.coords();
            let v = f.eval(x[0], x[1])?;
            Ok(v[0] * b.outward_normal[0] + v[1] * b.outward_normal[1] < 0.0)
        })
        .collect::<Result<Vec<bool>, EvalError>>()?
        .into_iter()
        .all(|ok| ok);
    let indices = zeros
        .iter()
        .map(|(c, rad)| index_of_zero(f, c, *rad))
        .collect::<Result<Vec<_>, _>>()?;
    let index_sum = indices.iter().sum();
    let chi = region_euler_char(r)?;
    let missing_zero = inward && chi != 0 && zeros.is_empty();
    Ok(PoincareHopfReport {
        inward,
        index_sum,
        chi,
        consistent: !inward || index_sum == chi,
        missing_zero,
        indices,
        assumptions: vec!["the supplied disks isolate every zero of the field in the region".into()],
    })
}

/// Zeros of `f` in `r` found by multi-start damped Newton on `|F|²`;
/// solutions closer than `1e-6` are merged. A convenience, not a proof of
/// completeness.
pub fn find_zeros(f: &PlanarField, r: &Region, starts: usize, seed: u64) -> Result<Vec<Point>, DegreeError> {
    let s = r.space();
    if s.dim() != 2 || s.kind(0) != FactorKind::Real || s.kind(1) != FactorKind::Real {
        return Err(DegreeError::NotPlanar);
    }
    let bb = r.bounding_box();
    let bounds = [Bound::Interval(bb[0].0, bb[0].1), Bound::Interval(bb[1].0, bb[1].1)];
    let problem = LeastSquares {
        map: &f.map,
        target: &[0.0, 0.0],
        bounds: &bounds,
        feasible: |z: &[f64]| r.classify(z) != Containment::Exterior,
    };
    let opts = SolverOptions {
        max_iter: 200,
        tol: 1e-14,
    };
    let hits: Vec<Vec<f64>> = r
        .sample_interior(starts, seed)
        .par_iter()
        .filter_map(|p| problem.run(p.coords(), &opts))
        .filter(|(_, res)| *res <= 1e-10)
        .map(|(z, _)| z)
        .collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for z in hits {
        if out.iter().all(|o| norm(&[o[0] - z[0], o[1] - z[1]]) > 1e-6) {
            out.push(z);
        }
    }
    out.into_iter().map(|z| Ok(Point::new(s, z)?)).collect()
}

/// Planar specialization of the weakened Coron condition: freeze `u = 0`,
/// take the degree `d` of the resulting field along the circle of
/// `radius`; `d ∉ {±1}` means the induced map on `H₁` misses a generator.
/// `eps` may be infinite.
pub fn coron_h1_test(sys: &ControlSystem, eps: f64, radius: f64) -> Result<ObstructionReport, DegreeError> {
    let s = sys.space();
    if s.dim() != 2 || s.real_indices().len() != 2 {
        return Err(DegreeError::NotPlanar);
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(DegreeError::BadRadius(radius));
    }
    if !(radius < eps) {
        return Err(DegreeError::RadiusExceedsEpsilon { radius, eps });
    }
    let field = sys.zero_control_field()?;
    let names = s.names();
    let [p, q] = [field.components()[0].clone(), field.components()[1].clone()];
    let pf = PlanarField::with_vars(p, q, [names[0], names[1]])?;
    let w = winding_details(&pf, &ClosedCurve::circle([0.0, 0.0], radius)?)?;
    let verdict = if w.degree.abs() == 1 {
        Verdict::Inconclusive
    } else {
        Verdict::ObstructionFound
    };
    let mut rep = ObstructionReport::new(verdict)
        .with("degree", w.degree as f64)
        .with("radius", radius)
        .with("samples", w.samples as f64)
        .with("min_field_norm", w.min_norm)
        .assume("planar specialization with the control section u = 0; the general homology of the admissible set is not computed");
    if eps.is_finite() {
        rep = rep.with("epsilon", eps);
    }
    if sys.control_dim() > 0 {
        rep = rep.assume("for controlled systems the image in H1 is approximated by the u = 0 section only");
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VectorField;
    use crate::space::ModelSpace;

    fn origin() -> Point {
        Point::new(&ModelSpace::plane(), vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn named_windings() {
        let c = ClosedCurve::circle([0.0, 0.0], 1.0).unwrap();
        assert_eq!(winding_number(&PlanarField::parse("x", "y").unwrap(), &c).unwrap(), 1);
        assert_eq!(winding_number(&PlanarField::parse("x^2-y^2", "2*x*y").unwrap(), &c).unwrap(), 2);
        assert_eq!(winding_number(&PlanarField::parse("x^2-y^2", "4*x*y^2").unwrap(), &c).unwrap(), 0);
    }

    #[test]
    fn indices() {
        let o = origin();
        assert_eq!(index_of_zero(&PlanarField::parse("-x", "-y").unwrap(), &o, 0.5).unwrap(), 1);
        assert_eq!(index_of_zero(&PlanarField::parse("x^2-y^2", "4*x*y^2").unwrap(), &o, 0.5).unwrap(), 0);
        assert_eq!(index_of_zero(&PlanarField::parse("y", "-x").unwrap(), &o, 1.0).unwrap(), 1);
        assert_eq!(index_of_zero(&PlanarField::parse("x", "-y").unwrap(), &o, 1.0).unwrap(), -1);
    }

    #[test]
    fn vanishing_on_curve_is_an_error() {
        let f = PlanarField::parse("x - 1", "y").unwrap();
        let err = winding_number(&f, &ClosedCurve::circle([0.0, 0.0], 1.0).unwrap());
        assert!(matches!(err, Err(DegreeError::FieldVanishes { .. })));
    }

    #[test]
    fn open_curves_and_small_n_rejected() {
        let t = ScalarExpr::var("t");
        assert!(matches!(
            ClosedCurve::new(t.clone(), ScalarExpr::zero(), 64),
            Err(DegreeError::OpenCurve { .. })
        ));
        assert!(matches!(
            ClosedCurve::new(ScalarExpr::cos(t.clone()), ScalarExpr::sin(t), 10),
            Err(DegreeError::TooFewSamples(10))
        ));
    }

    #[test]
    fn refinement_kicks_in_for_high_degree() {
        // A curve wrapping 40 times needs more than 64 samples.
        let t = ScalarExpr::mul(ScalarExpr::constant(40.0), ScalarExpr::var("t"));
        let c = ClosedCurve::new(ScalarExpr::cos(t.clone()), ScalarExpr::sin(t), 64).unwrap();
        let w = winding_details(&PlanarField::parse("x", "y").unwrap(), &c).unwrap();
        assert_eq!(w.degree, 40);
        assert!(w.samples > 64);
    }

    #[test]
    fn poincare_hopf_examples() {
        let disk = Region::unit_disk();
        let sink = PlanarField::parse("-x", "-y").unwrap();
        let rep = poincare_hopf_check(&sink, &disk, &[(origin(), 0.5)], 256).unwrap();
        assert!(rep.inward && rep.consistent && !rep.missing_zero);
        assert_eq!((rep.index_sum, rep.chi), (1, 1));

        let src = PlanarField::parse("x", "y").unwrap();
        let rep = poincare_hopf_check(&src, &disk, &[(origin(), 0.5)], 256).unwrap();
        assert!(!rep.inward && rep.consistent);

        let rep = poincare_hopf_check(&sink, &disk, &[], 256).unwrap();
        assert!(rep.missing_zero && !rep.consistent);

        let ann = Region::annulus(&ModelSpace::plane(), [0.0, 0.0], 1.0, 2.0).unwrap();
        let swirl = PlanarField::parse(
            "(1.5 - sqrt(x^2+y^2))*x/sqrt(x^2+y^2) - y/sqrt(x^2+y^2)",
            "(1.5 - sqrt(x^2+y^2))*y/sqrt(x^2+y^2) + x/sqrt(x^2+y^2)",
        )
        .unwrap();
        let rep = poincare_hopf_check(&swirl, &ann, &[], 256).unwrap();
        assert!(rep.inward && rep.consistent);
        assert_eq!((rep.index_sum, rep.chi), (0, 0));
    }

    #[test]
    fn disk_preconditions() {
        let disk = Region::unit_disk();
        let f = PlanarField::parse("-x", "-y").unwrap();
        let p = |x: f64| Point::new(&ModelSpace::plane(), vec![x, 0.0]).unwrap();
        assert!(matches!(
            poincare_hopf_check(&f, &disk, &[(p(0.0), 0.3), (p(0.4), 0.3)], 64),
            Err(DegreeError::OverlappingDisks(0, 1))
        ));
        assert!(matches!(
            poincare_hopf_check(&f, &disk, &[(p(0.8), 0.3)], 64),
            Err(DegreeError::DiskNotInterior(0))
        ));
    }

    #[test]
    fn zero_finder() {
        let r = Region::real_box(&ModelSpace::plane(), &[(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        let f = PlanarField::parse("x^2 - y^2 - 1", "2*x*y").unwrap();
        let mut z: Vec<f64> = find_zeros(&f, &r, 32, 3).unwrap().iter().map(|p| p.coords()[0]).collect();
        z.sort_by(f64::total_cmp);
        assert_eq!(z.len(), 2);
        assert!((z[0] + 1.0).abs() < 1e-8 && (z[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coron_examples() {
        let s = ModelSpace::plane();
        let sys = |p: &str, q: &str| ControlSystem::autonomous(&VectorField::parse(&s, &[p, q]).unwrap());
        let rep = coron_h1_test(&sys("x^2-y^2", "2*x*y"), f64::INFINITY, 1.0).unwrap();
        assert_eq!(rep.verdict, Verdict::ObstructionFound);
        assert_eq!(rep.evidence("degree"), Some(2.0));
        let rep = coron_h1_test(&sys("x^2-y^2", "4*x*y^2"), f64::INFINITY, 1.0).unwrap();
        assert_eq!((rep.verdict, rep.evidence("degree")), (Verdict::ObstructionFound, Some(0.0)));
        let rep = coron_h1_test(&sys("-x", "-y"), f64::INFINITY, 1.0).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert!(matches!(
            coron_h1_test(&sys("-x", "-y"), 0.5, 1.0),
            Err(DegreeError::RadiusExceedsEpsilon { .. })
        ));
    }
}

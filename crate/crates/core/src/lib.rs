//! Necessary-condition checks for continuous feedback stabilization and
//! safety of control systems.
//!
//! The crate decides, for concrete systems and regions, whether a
//! topological obstruction rules out stabilizing a compact set or rendering
//! a region strictly positively invariant with a continuous, uniquely
//! integrable closed loop. The ingredients:
//!
//! - [`expr`]: symbolic scalar expressions with exact differentiation.
//! - [`space`]: flat model manifolds (products of lines and circles) and
//!   compact regions with boundary samplers.
//! - [`topology`]: finite cell complexes, Betti numbers over GF(2), Euler
//!   characteristics of surfaces and regions.
//! - [`degree`]: winding numbers, indices of zeros, the Poincaré–Hopf
//!   consistency check and the planar Coron degree test.
//! - [`dynamics`]: RK4 flows, attractor estimates, Lyapunov and
//!   strict-invariance checks.
//! - [`lagrange`]: nonholonomically constrained Lagrangian mechanics.
//! - [`obstruction`]: the image, adversary-intersection, safety and span
//!   tests assembled into [`obstruction::ObstructionReport`]s.
//! - [`config`], [`portrait`], [`cli`]: JSON configurations, the builtin
//!   system registry, SVG phase portraits and the `obstructa` command.

// `!(x > 0.0)` guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `ScalarExpr::add` etc. are folding constructors, not operator impls.
#![allow(clippy::should_implement_trait)]

pub mod cli;
pub mod config;
pub mod degree;
pub mod dynamics;
pub mod expr;
pub mod lagrange;
pub mod linalg;
pub mod obstruction;
pub mod portrait;
pub mod solve;
pub mod space;
pub mod topology;

pub use expr::{parse_expr, ScalarExpr, VarAssignment};
pub use obstruction::{ControlSystem, ObstructionReport, Verdict};
pub use space::{ModelSpace, Point, Region};

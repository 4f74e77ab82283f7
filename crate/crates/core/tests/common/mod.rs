//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use obstructa::{ScalarExpr, VarAssignment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VARS: [&str; 3] = ["x", "y", "z"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random tree of depth at most `depth`, total on all of R³: divisors
/// and square-root arguments are kept ≥ 1.
pub fn random_expr<R: Rng>(rng: &mut R, depth: usize) -> ScalarExpr {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.65) {
            ScalarExpr::var(VARS[rng.random_range(0..3)])
        } else {
            ScalarExpr::constant((rng.random_range(-30..=30) as f64) / 10.0)
        };
    }
    let sub = |rng: &mut R| random_expr(rng, depth - 1);
    let positive = |e: ScalarExpr| ScalarExpr::add(ScalarExpr::one(), ScalarExpr::pow(e, 2));
    match rng.random_range(0..9) {
        0 => ScalarExpr::add(sub(rng), sub(rng)),
        1 => ScalarExpr::sub(sub(rng), sub(rng)),
        2 | 3 => ScalarExpr::mul(sub(rng), sub(rng)),
        4 => ScalarExpr::div(sub(rng), positive(sub(rng))),
        5 => ScalarExpr::pow(sub(rng), rng.random_range(0..=3)),
        6 => ScalarExpr::neg(sub(rng)),
        7 => {
            if rng.random_bool(0.5) {
                ScalarExpr::sin(sub(rng))
            } else {
                ScalarExpr::cos(sub(rng))
            }
        }
        _ => ScalarExpr::sqrt(positive(sub(rng))),
    }
}

pub fn assignment(p: [f64; 3]) -> VarAssignment {
    VARS.iter().zip(p).map(|(n, v)| (*n, v)).collect()
}

/// Fourth-order central differences of `e` along `v` at `p`, with the step
/// halved from 1e-2 down; returns the later of the two consecutive
/// estimates that agree best (truncation vs. round-off balance).
pub fn fd_partial(e: &ScalarExpr, p: [f64; 3], k: usize) -> f64 {
    let at = |d: f64| {
        let mut q = p;
        q[k] += d;
        e.eval(&assignment(q)).unwrap()
    };
    let central = |h: f64| (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    let scale = 1.0 + p[k].abs();
    let d: Vec<f64> = (0..14).map(|i| central(1e-2 * scale / f64::from(1 << i))).collect();
    d.windows(2)
        .min_by(|a, b| (a[0] - a[1]).abs().total_cmp(&(b[0] - b[1]).abs()))
        .map(|w| w[1])
        .expect("several estimates")
}

/// Largest relative gap between the symbolic and finite-difference
/// gradients, or `None` when the point is numerically unfit (huge values).
pub fn gradient_gap(e: &ScalarExpr, p: [f64; 3]) -> Option<f64> {
    let f = e.eval(&assignment(p)).ok()?;
    if f.abs().partial_cmp(&1e4) != Some(std::cmp::Ordering::Less) {
        return None;
    }
    let mut worst: f64 = 0.0;
    for (k, v) in VARS.iter().enumerate() {
        let sym = e.differentiate(v).eval(&assignment(p)).ok()?;
        if sym.abs().partial_cmp(&1e4) != Some(std::cmp::Ordering::Less) {
            return None;
        }
        let fd = fd_partial(e, p, k);
        worst = worst.max((sym - fd).abs() / sym.abs().max(1.0));
    }
    Some(worst)
}

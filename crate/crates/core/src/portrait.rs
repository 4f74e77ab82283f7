//! SVG phase portraits of planar fields.
//!
//! Streamlines start from a jittered grid of seeds and follow the
//! normalized field with RK4 (`h = window / 400`, at most 500 steps),
//! stopping at the window edge, where `|F|` falls below 1e-3 of the
//! fastest seed, or where the direction turns sharply inside one step
//! (about to jump across a zero). Each streamline is cut into short polylines whose stroke width is proportional to the local speed
//! `|F|`, so the picture shows both direction and magnitude.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::degree::PlanarField;
use crate::expr::EvalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PortraitError {
    #[error("window must satisfy xmin < xmax and ymin < ymax, got {0:?}")]
    Window([f64; 4]),
    #[error("density must be at least 1")]
    Density,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitOptions {
    /// `[xmin, xmax, ymin, ymax]`.
    pub window: [f64; 4],
    /// Seeds per axis.
    pub density: usize,
    pub seed: u64,
    pub max_steps: usize,
    /// RK4 steps per drawn polyline.
    pub chunk: usize,
    pub size_px: f64,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self {
            window: [-1.0, 1.0, -1.0, 1.0],
            density: 10,
            seed: 0,
            max_steps: 500,
            chunk: 10,
            size_px: 800.0,
        }
    }
}

/// One integrated streamline in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    pub points: Vec<[f64; 2]>,
    /// `|F|` at each point.
    pub speeds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portrait {
    pub window: [f64; 4],
    pub streamlines: Vec<Streamline>,
    pub size_px: f64,
    chunk: usize,
}

const ZERO_SPEED: f64 = 1e-12;
/// Streamlines also stop once `|F|` drops below this fraction of the
/// fastest seed: a fixed step would otherwise hop over the zero.
const RELATIVE_ZERO_SPEED: f64 = 1e-3;
/// Direction may turn at most ~25° within one step; more means a zero is
/// being stepped over.
const MAX_TURN_COS: f64 = 0.9;

fn unit(f: &PlanarField, p: [f64; 2], floor: f64) -> Result<Option<([f64; 2], f64)>, EvalError> {
    let v = f.eval(p[0], p[1])?;
    let s = v[0].hypot(v[1]);
    Ok((s > floor && s.is_finite()).then(|| ([v[0] / s, v[1] / s], s)))
}

fn trace(f: &PlanarField, start: [f64; 2], h: f64, floor: f64, opts: &PortraitOptions) -> Result<Streamline, EvalError> {
    let unit = |p| unit(f, p, floor);
    let [x0, x1, y0, y1] = opts.window;
    let inside = |p: [f64; 2]| p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
    let mut points = Vec::new();
    let mut speeds = Vec::new();
    let Some((_, s)) = unit(start)? else {
        return Ok(Streamline { points, speeds });
    };
    points.push(start);
    speeds.push(s);
    let mut p = start;
    for _ in 0..opts.max_steps {
        let step = |q: [f64; 2], k: [f64; 2], c: f64| [q[0] + c * k[0], q[1] + c * k[1]];
        let Some((k1, _)) = unit(p)? else { break };
        let Some((k2, _)) = unit(step(p, k1, 0.5 * h))? else { break };
        let Some((k3, _)) = unit(step(p, k2, 0.5 * h))? else { break };
        let Some((k4, _)) = unit(step(p, k3, h))? else { break };
        let turn = [k2, k3, k4].iter().map(|k| k1[0] * k[0] + k1[1] * k[1]).fold(1.0, f64::min);
        if turn < MAX_TURN_COS {
            break;
        }
        let next = [
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if !inside(next) {
            break;
        }
        let Some((_, s)) = unit(next)? else { break };
        points.push(next);
        speeds.push(s);
        p = next;
    }
    Ok(Streamline { points, speeds })
}

pub fn portrait(f: &PlanarField, opts: &PortraitOptions) -> Result<Portrait, PortraitError> {
    let [x0, x1, y0, y1] = opts.window;
    if !(x0 < x1 && y0 < y1) || !opts.window.iter().all(|v| v.is_finite()) {
        return Err(PortraitError::Window(opts.window));
    }
    if opts.density == 0 {
        return Err(PortraitError::Density);
    }
    let h = (x1 - x0).max(y1 - y0) / 400.0;
    let n = opts.density;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds: Vec<[f64; 2]> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let jx: f64 = rng.random_range(0.25..0.75);
            let jy: f64 = rng.random_range(0.25..0.75);
            [x0 + (x1 - x0) * (i as f64 + jx) / n as f64, y0 + (y1 - y0) * (j as f64 + jy) / n as f64]
        })
        .collect();
    let vmax = seeds
        .iter()
        .map(|s| f.eval(s[0], s[1]).map(|v| v[0].hypot(v[1])))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let floor = (RELATIVE_ZERO_SPEED * vmax).max(ZERO_SPEED);
    let lines = seeds
        .par_iter()
        .map(|s| trace(f, *s, h, floor, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Portrait {
        window: opts.window,
        streamlines: lines.into_iter().filter(|l| l.points.len() >= 2).collect(),
        size_px: opts.size_px,
        chunk: opts.chunk.max(1),
    })
}

/// A drawn polyline: world points plus its stroke width in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub points: Vec<[f64; 2]>,
    pub width: f64,
}

impl Portrait {
    /// Chunks of every streamline, widths scaled to the global max speed.
    pub fn segments(&self) -> Vec<Segment> {
        let vmax = self
            .streamlines
            .iter()
            .flat_map(|l| l.speeds.iter().copied())
            .fold(0.0, f64::max);
        let mut out = Vec::new();
        for l in &self.streamlines {
            let mut start = 0;
            while start + 1 < l.points.len() {
                let end = (start + self.chunk).min(l.points.len() - 1);
                let mean = l.speeds[start..=end].iter().sum::<f64>() / (end - start + 1) as f64;
                out.push(Segment {
                    points: l.points[start..=end].to_vec(),
                    width: 0.3 + 2.7 * mean / vmax,
                });
                start = end;
            }
        }
        out
    }

    fn to_px(&self, p: [f64; 2]) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.window;
        let s = self.size_px;
        ((p[0] - x0) / (x1 - x0) * s, (y1 - p[1]) / (y1 - y0) * s)
    }

    pub fn to_svg(&self) -> String {
        let s = self.size_px;
        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#
        );
        let _ = writeln!(out, r#"<rect width="{s}" height="{s}" fill="white"/>"#);
        let _ = writeln!(out, r##"<g fill="none" stroke="#1f4e79" stroke-linecap="round" stroke-linejoin="round">"##);
        for seg in self.segments() {
            let pts: Vec<String> = seg
                .points
                .iter()
                .map(|p| {
                    let (x, y) = self.to_px(*p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(out, r#"<polyline points="{}" stroke-width="{:.3}"/>"#, pts.join(" "), seg.width);
        }
        out.push_str("</g>\n</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_draws_nothing() {
        let p = portrait(&PlanarField::parse("0", "0").unwrap(), &PortraitOptions::default()).unwrap();
        assert!(p.streamlines.is_empty());
        let svg = p.to_svg();
        assert!(!svg.contains("<polyline") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn rotation_streamlines_stay_on_circles() {
        let f = PlanarField::parse("-y", "x").unwrap();
        let p = portrait(&f, &PortraitOptions::default()).unwrap();
        for l in &p.streamlines {
            let r0 = l.points[0][0].hypot(l.points[0][1]);
            for q in &l.points {
                assert!((q[0].hypot(q[1]) - r0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let f = PlanarField::parse("x^2-y^2", "2*x*y").unwrap();
        let o = PortraitOptions::default();
        assert_eq!(portrait(&f, &o).unwrap().to_svg(), portrait(&f, &o).unwrap().to_svg());
        let o2 = PortraitOptions { seed: 7, ..o };
        assert_ne!(portrait(&f, &o).unwrap().to_svg(), portrait(&f, &o2).unwrap().to_svg());
    }

    #[test]
    fn bad_window() {
        let f = PlanarField::parse("x", "y").unwrap();
        let o = PortraitOptions {
            window: [1.0, -1.0, 0.0, 1.0],
            ..Default::default()
        };
        assert!(matches!(portrait(&f, &o), Err(PortraitError::Window(_))));
    }
}

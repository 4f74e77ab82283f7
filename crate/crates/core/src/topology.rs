//! Finite cell complexes over GF(2), Euler characteristics and surface
//! classification.
//!
//! The Euler characteristic is computed two independent ways: from cell
//! counts, and from Betti numbers obtained by GF(2) row reduction of the
//! boundary matrices. Both must agree for every valid complex. GF(2) Betti
//! numbers can differ from rational ones when there is torsion (the Klein
//! bottle has `b1 = 2` over GF(2), `1` over Q), but their alternating sum
//! cannot.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Base, Region};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("boundary matrix {index} has shape {got:?}, expected {expected:?}")]
    Shape {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("expected {expected} boundary matrices for {dims} cell dimensions, got {got}")]
    BoundaryCount {
        dims: usize,
        expected: usize,
        got: usize,
    },
    #[error("boundary of boundary is nonzero in degree {0}")]
    NotAChainComplex(usize),
    #[error("entry ({row}, {col}) out of range for boundary matrix {index}")]
    EntryOutOfRange { index: usize, row: usize, col: usize },
    #[error("invalid surface descriptor: {0}")]
    InvalidSurface(String),
    #[error("Euler characteristic not determined for this region: {0}")]
    Unsupported(String),
    #[error("malformed complex file: {0}")]
    Json(String),
}

/// Dense GF(2) matrix stored as packed row bitsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    words: usize,
    data: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64).max(1);
        Self {
            rows,
            cols,
            words,
            data: vec![0; rows * words],
        }
    }

    /// Entries listed an odd number of times are set.
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize)]) -> Option<Self> {
        let mut m = Self::zeros(rows, cols);
        for &(r, c) in entries {
            if r >= rows || c >= cols {
                return None;
            }
            m.toggle(r, c);
        }
        Some(m)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.words + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        if self.get(r, c) != v {
            self.toggle(r, c);
        }
    }

    pub fn toggle(&mut self, r: usize, c: usize) {
        self.data[r * self.words + c / 64] ^= 1 << (c % 64);
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words..(r + 1) * self.words]
    }

    pub fn entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|w| *w == 0)
    }

    /// `self * rhs` over GF(2).
    pub fn mul(&self, rhs: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Gf2Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) {
                    let src = rhs.row(k).to_vec();
                    let w = out.words;
                    for (d, s) in out.data[r * w..(r + 1) * w].iter_mut().zip(src) {
                        *d ^= s;
                    }
                }
            }
        }
        out
    }

    /// Rank by Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<u64>> = (0..self.rows).map(|r| self.row(r).to_vec()).collect();
        let mut rank = 0;
        for c in 0..self.cols {
            let (w, bit) = (c / 64, 1u64 << (c % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] & bit != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn block(&self, rows: usize, cols: usize, at: (usize, usize), into: &mut Gf2Matrix) {
        debug_assert!(rows >= self.rows && cols >= self.cols);
        for (r, c) in self.entries() {
            into.set(r + at.0, c + at.1, true);
        }
    }
}

/// A finite chain complex over GF(2) with one basis element per cell.
///
/// `boundary(i)` for `i ≥ 1` is the `c_{i-1} x c_i` incidence matrix of
/// the boundary map from `i`-cells to `(i-1)`-cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellComplex {
    cells: Vec<usize>,
    boundaries: Vec<Gf2Matrix>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexFile {
    pub cells: Vec<usize>,
    pub boundaries: Vec<Vec<[usize; 2]>>,
}

impl CellComplex {
    pub fn new(cells: Vec<usize>, boundaries: Vec<Gf2Matrix>) -> Result<Self, TopologyError> {
        let expected = cells.len().saturating_sub(1);
        if boundaries.len() != expected {
            return Err(TopologyError::BoundaryCount {
                dims: cells.len(),
                expected,
                got: boundaries.len(),
            });
        }
        for (k, b) in boundaries.iter().enumerate() {
            let want = (cells[k], cells[k + 1]);
            if b.shape() != want {
                return Err(TopologyError::Shape {
                    index: k + 1,
                    expected: want,
                    got: b.shape(),
                });
            }
        }
        for i in 1..boundaries.len() {
            if !boundaries[i - 1].mul(&boundaries[i]).is_zero() {
                return Err(TopologyError::NotAChainComplex(i + 1));
            }
        }
        Ok(Self { cells, boundaries })
    }

    /// Build from sparse `(row, col)` incidence lists, one per boundary map.
    pub fn from_sparse(
        cells: Vec<usize>,
        boundaries: &[Vec<(usize, usize)>],
    ) -> Result<Self, TopologyError> {
        let mats = boundaries
            .iter()
            .enumerate()
            .map(|(k, entries)| {
                let rows = cells.get(k).copied().unwrap_or(0);
                let cols = cells.get(k + 1).copied().unwrap_or(0);
                Gf2Matrix::from_entries(rows, cols, entries).ok_or_else(|| {
                    let &(row, col) = entries
                        .iter()
                        .find(|(r, c)| *r >= rows || *c >= cols)
                        .expect("some entry is out of range");
                    TopologyError::EntryOutOfRange {
                        index: k + 1,
                        row,
                        col,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(cells, mats)
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let f: ComplexFile =
            serde_json::from_str(text).map_err(|e| TopologyError::Json(e.to_string()))?;
        Self::from_file(&f)
    }

    pub fn from_file(f: &ComplexFile) -> Result<Self, TopologyError> {
        let sparse: Vec<Vec<(usize, usize)>> = f
            .boundaries
            .iter()
            .map(|b| b.iter().map(|[r, c]| (*r, *c)).collect())
            .collect();
        Self::from_sparse(f.cells.clone(), &sparse)
    }

    pub fn to_file(&self) -> ComplexFile {
        ComplexFile {
            cells: self.cells.clone(),
            boundaries: self
                .boundaries
                .iter()
                .map(|b| b.entries().into_iter().map(|(r, c)| [r, c]).collect())
                .collect(),
        }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Top cell dimension; `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        self.cells.len().checked_sub(1)
    }

    pub fn boundary(&self, i: usize) -> Option<&Gf2Matrix> {
        i.checked_sub(1).and_then(|k| self.boundaries.get(k))
    }

    pub fn point() -> Self {
        Self::new(vec![1], vec![]).expect("valid")
    }

    /// One vertex and one loop.
    pub fn circle() -> Self {
        Self::new(vec![1, 1], vec![Gf2Matrix::zeros(1, 1)]).expect("valid")
    }

    /// One vertex, one loop, one 2-cell glued along the loop.
    pub fn disk() -> Self {
        Self::from_sparse(vec![1, 1, 1], &[vec![], vec![(0, 0)]]).expect("valid")
    }

    /// One vertex, two loops `a, b`, one 2-cell attached along `aba⁻¹b⁻¹`.
    pub fn torus() -> Self {
        Self::from_sparse(vec![1, 2, 1], &[vec![], vec![]]).expect("valid")
    }

    /// Minimal CW structure of the 2-sphere: a vertex and a 2-cell.
    pub fn sphere2() -> Self {
        Self::new(vec![1, 0, 1], vec![Gf2Matrix::zeros(1, 0), Gf2Matrix::zeros(0, 1)])
            .expect("valid")
    }

    pub fn euler_char_cells(&self) -> i64 {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, &c)| if i % 2 == 0 { c as i64 } else { -(c as i64) })
            .sum()
    }

    pub fn betti_numbers(&self) -> Vec<usize> {
        let ranks: Vec<usize> = self.boundaries.iter().map(Gf2Matrix::rank).collect();
        let rank = |i: usize| -> usize {
            // rank of ∂_i; ∂_0 and ∂_{d+1} are zero.
            i.checked_sub(1).and_then(|k| ranks.get(k)).copied().unwrap_or(0)
        };
        (0..self.cells.len())
            .map(|i| self.cells[i] - rank(i) - rank(i + 1))
            .collect()
    }

    pub fn euler_char_homology(&self) -> i64 {
        self.betti_numbers()
            .iter()
            .enumerate()
            .map(|(i, &b)| if i % 2 == 0 { b as i64 } else { -(b as i64) })
            .sum()
    }

    pub fn disjoint_union(&self, other: &Self) -> Self {
        let d = self.cells.len().max(other.cells.len());
        let c = |k: &Self, i: usize| k.cells.get(i).copied().unwrap_or(0);
        let cells: Vec<usize> = (0..d).map(|i| c(self, i) + c(other, i)).collect();
        let boundaries = (1..d)
            .map(|i| {
                let mut m = Gf2Matrix::zeros(cells[i - 1], cells[i]);
                if let Some(b) = self.boundary(i) {
                    b.block(cells[i - 1], cells[i], (0, 0), &mut m);
                }
                if let Some(b) = other.boundary(i) {
                    b.block(cells[i - 1], cells[i], (c(self, i - 1), c(self, i)), &mut m);
                }
                m
            })
            .collect();
        Self::new(cells, boundaries).expect("union of chain complexes")
    }

    /// Cone with a new apex vertex (appended last among the 0-cells).
    /// Each `i`-cell `σ` gains a cone cell `cσ` of dimension `i + 1`
    /// (appended after the existing cells) with `∂(cσ) = σ + c(∂σ)`, and
    /// `∂(cv) = v + apex` for vertices.
    pub fn cone(&self) -> Self {
        let d = self.cells.len();
        if d == 0 {
            return Self::point();
        }
        let old = |i: usize| self.cells.get(i).copied().unwrap_or(0);
        let cone_count = |i: usize| if i == 0 { 0 } else { old(i - 1) };
        let cells: Vec<usize> = (0..=d)
            .map(|i| old(i) + cone_count(i) + usize::from(i == 0))
            .collect();
        let apex = old(0);
        let boundaries = (1..=d)
            .map(|i| {
                let mut m = Gf2Matrix::zeros(cells[i - 1], cells[i]);
                // Original cells keep their boundary.
                if let Some(b) = self.boundary(i) {
                    b.block(cells[i - 1], cells[i], (0, 0), &mut m);
                }
                // Cone cells cσ with σ an (i-1)-cell, stored from column old(i).
                for s in 0..old(i - 1) {
                    let col = old(i) + s;
                    m.toggle(s, col);
                    if i == 1 {
                        m.toggle(apex, col);
                    } else if let Some(b) = self.boundary(i - 1) {
                        // c(∂σ): face τ maps to cone cell cτ at row old(i-1) + τ.
                        let offset = old(i - 1);
                        for t in 0..old(i - 2) {
                            if b.get(t, s) {
                                m.toggle(offset + t, col);
                            }
                        }
                    }
                }
                m
            })
            .collect();
        Self::new(cells, boundaries).expect("cone of a chain complex")
    }

    /// Wedge sum identifying vertex 0 of both complexes.
    pub fn wedge(&self, other: &Self) -> Self {
        if self.cells.first().copied().unwrap_or(0) == 0
            || other.cells.first().copied().unwrap_or(0) == 0
        {
            return self.disjoint_union(other);
        }
        let u = self.disjoint_union(other);
        let merged = self.cells[0];
        let mut cells = u.cells.clone();
        cells[0] -= 1;
        let boundaries = u
            .boundaries
            .iter()
            .enumerate()
            .map(|(k, b)| {
                if k > 0 {
                    return b.clone();
                }
                let mut m = Gf2Matrix::zeros(cells[0], cells[1]);
                for (r, c) in b.entries() {
                    let r = if r == merged {
                        0
                    } else if r > merged {
                        r - 1
                    } else {
                        r
                    };
                    m.toggle(r, c);
                }
                m
            })
            .collect();
        Self::new(cells, boundaries).expect("wedge of chain complexes")
    }

    /// Two cones over the same base glued along it.
    pub fn suspension(&self) -> Self {
        let c = self.cone();
        let d = self.cells.len();
        let old = |i: usize| self.cells.get(i).copied().unwrap_or(0);
        let extra = |i: usize| if i == 0 { 1 } else { old(i - 1) };
        let cells: Vec<usize> = (0..=d).map(|i| c.cells[i] + extra(i)).collect();
        let boundaries = (1..=d)
            .map(|i| {
                let mut m = Gf2Matrix::zeros(cells[i - 1], cells[i]);
                let cb = c.boundary(i).expect("cone has this degree");
                cb.block(cells[i - 1], cells[i], (0, 0), &mut m);
                // Second cone cells appended after the first cone's cells;
                // second apex appended after all 0-cells.
                let apex2 = c.cells[0];
                for s in 0..old(i - 1) {
                    let col = c.cells[i] + s;
                    m.toggle(s, col);
                    if i == 1 {
                        m.toggle(apex2, col);
                    } else if let Some(b) = self.boundary(i - 1) {
                        for t in 0..old(i - 2) {
                            if b.get(t, s) {
                                m.toggle(c.cells[i - 1] + t, col);
                            }
                        }
                    }
                }
                m
            })
            .collect();
        Self::new(cells, boundaries).expect("suspension of a chain complex")
    }
}

/// A random valid complex built by composing cones, suspensions, wedges
/// and disjoint unions of small building blocks. `∂² = 0` holds by
/// construction.
pub fn random_complex<R: Rng>(rng: &mut R, steps: usize) -> CellComplex {
    let block = |rng: &mut R| match rng.random_range(0..5) {
        0 => CellComplex::point(),
        1 => CellComplex::circle(),
        2 => CellComplex::disk(),
        3 => CellComplex::torus(),
        _ => CellComplex::sphere2(),
    };
    let mut k = block(rng);
    for _ in 0..steps {
        k = match rng.random_range(0..5) {
            0 if k.cells.len() < 5 => k.cone(),
            1 if k.cells.len() < 5 => k.suspension(),
            2 => k.wedge(&block(rng)),
            _ => k.disjoint_union(&block(rng)),
        };
    }
    k
}

/// A compact surface by orientability, genus and number of boundary
/// circles. For nonorientable surfaces `genus` counts cross-caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceDescriptor {
    pub orientable: bool,
    pub genus: u32,
    pub boundary_components: u32,
}

pub fn classify_surface_euler(s: SurfaceDescriptor) -> Result<i64, TopologyError> {
    let g = s.genus as i64;
    let b = s.boundary_components as i64;
    if s.orientable {
        Ok(2 - 2 * g - b)
    } else if g == 0 {
        Err(TopologyError::InvalidSurface(
            "nonorientable surfaces need at least one cross-cap".into(),
        ))
    } else {
        Ok(2 - g - b)
    }
}

/// Euler characteristic of a region, where elementary homotopy arguments
/// pin it down:
///
/// - a supplied value is returned as is;
/// - the Real cross-section is a box or ball (χ = 1) or planar annulus
///   (χ = 0), and each removed open ball in `R^k` adds `(-1)^(k-1)`;
/// - an unconstrained Angle factor makes the region a product with a
///   circle, so χ = 0; an Angle arc is contractible and contributes 1;
/// - implicit constraints are accepted only when every constraint involves
///   exactly one Angle coordinate and, at every sampled point of the Real
///   cross-section, the admissible angles form one nonempty proper arc.
///   The region then deformation retracts onto a section over the
///   cross-section and has its Euler characteristic.
///
/// Anything else is [`TopologyError::Unsupported`].
pub fn region_euler_char(r: &Region) -> Result<i64, TopologyError> {
    if let Some(chi) = r.supplied_euler_char() {
        return Ok(chi);
    }
    let space = r.space();
    let reals = space.real_indices();
    let k = reals.len();
    if k == 0 {
        return Err(TopologyError::Unsupported("no Real factors".into()));
    }
    let base_chi: i64 = match r.base() {
        Base::Box { .. } | Base::Ball { .. } => 1,
        Base::Annulus { .. } => 0,
    };
    let sign = if k % 2 == 1 { 1 } else { -1 };
    let cross_section = base_chi + sign * r.obstacles().len() as i64;

    let full_angles: Vec<usize> = space
        .angle_indices()
        .into_iter()
        .filter(|&i| match r.base() {
            Base::Box { intervals } => intervals[i].is_none(),
            _ => true,
        })
        .collect();

    let constraints: Vec<_> = r.constraints().collect();
    if constraints.is_empty() {
        return Ok(if full_angles.is_empty() { cross_section } else { 0 });
    }

    let angle_names: Vec<&str> = full_angles
        .iter()
        .map(|&i| space.factors()[i].name.as_str())
        .collect();
    let mut fiber_angle = None;
    for c in &constraints {
        let vars = c.free_vars();
        let involved: Vec<&str> = angle_names
            .iter()
            .copied()
            .filter(|a| vars.contains(*a))
            .collect();
        let arc_vars = space
            .angle_indices()
            .into_iter()
            .filter(|i| !full_angles.contains(i))
            .any(|i| vars.contains(&space.factors()[i].name));
        if involved.len() != 1 || arc_vars {
            return Err(TopologyError::Unsupported(
                "implicit constraints must each involve exactly one full-circle Angle coordinate"
                    .into(),
            ));
        }
        match fiber_angle {
            None => fiber_angle = Some(involved[0]),
            Some(a) if a == involved[0] => {}
            Some(_) => {
                return Err(TopologyError::Unsupported(
                    "implicit constraints over several Angle coordinates".into(),
                ))
            }
        }
    }
    let theta = space.index_of(fiber_angle.expect("at least one constraint")).expect("named");
    if full_angles.len() > 1 {
        // Remaining free circles make the region a product with a torus factor.
        return Ok(0);
    }
    check_arc_fibers(r, theta)?;
    Ok(cross_section)
}

fn check_arc_fibers(r: &Region, theta: usize) -> Result<(), TopologyError> {
    const FIBER_SAMPLES: usize = 720;
    let unconstrained = {
        let mut u = Region::new(r.space(), r.base().clone()).expect("same base");
        for o in r.obstacles() {
            u = u
                .with_obstacle(o.center.clone(), o.radius)
                .expect("obstacles already validated");
        }
        u
    };
    let pts = unconstrained.sample_interior(400, 0);
    for p in pts {
        let mut x = p.into_coords();
        let admissible: Vec<bool> = (0..FIBER_SAMPLES)
            .map(|j| {
                x[theta] = std::f64::consts::TAU * j as f64 / FIBER_SAMPLES as f64;
                r.constraints_hold(&x)
            })
            .collect();
        let count = admissible.iter().filter(|a| **a).count();
        let switches = (0..FIBER_SAMPLES)
            .filter(|&j| admissible[j] != admissible[(j + 1) % FIBER_SAMPLES])
            .count();
        if count == 0 || count == FIBER_SAMPLES || switches != 2 {
            return Err(TopologyError::Unsupported(format!(
                "admissible angles over a cross-section point do not form a single proper arc \
                 ({count}/{FIBER_SAMPLES} admissible, {switches} transitions)"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::space::{Factor, ModelSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn named_complexes() {
        assert_eq!(CellComplex::point().euler_char_cells(), 1);
        assert_eq!(CellComplex::torus().euler_char_cells(), 0);
        assert_eq!(CellComplex::disk().euler_char_cells(), 1);
        assert_eq!(CellComplex::circle().betti_numbers(), vec![1, 1]);
        assert_eq!(CellComplex::torus().betti_numbers(), vec![1, 2, 1]);
        assert_eq!(CellComplex::disk().betti_numbers(), vec![1, 0, 0]);
        assert_eq!(
            CellComplex::point().disjoint_union(&CellComplex::point()).betti_numbers(),
            vec![2]
        );
        assert_eq!(CellComplex::circle().euler_char_homology(), 0);
        assert_eq!(CellComplex::torus().euler_char_homology(), 0);
    }

    #[test]
    fn boundary_of_boundary_rejected() {
        // Triangle edges with a 2-cell whose boundary is a single edge:
        // ∂1∂2 = ∂1(e0) = v0 + v1 ≠ 0.
        let err = CellComplex::from_sparse(
            vec![3, 3, 1],
            &[vec![(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (0, 2)], vec![(0, 0)]],
        );
        assert_eq!(err, Err(TopologyError::NotAChainComplex(2)));
        let err = CellComplex::new(vec![1, 1], vec![Gf2Matrix::zeros(2, 1)]);
        assert!(matches!(err, Err(TopologyError::Shape { .. })));
        let err = CellComplex::from_sparse(vec![1, 1], &[vec![(3, 0)]]);
        assert!(matches!(err, Err(TopologyError::EntryOutOfRange { .. })));
    }

    #[test]
    fn cone_and_suspension_of_circle() {
        let disk = CellComplex::circle().cone();
        assert_eq!(disk.betti_numbers(), vec![1, 0, 0]);
        let sphere = CellComplex::circle().suspension();
        assert_eq!(sphere.betti_numbers(), vec![1, 0, 1]);
        let s3 = CellComplex::sphere2().suspension();
        assert_eq!(s3.betti_numbers(), vec![1, 0, 0, 1]);
        assert_eq!(CellComplex::point().suspension().betti_numbers(), vec![1, 0]);
        let two_points = CellComplex::point().disjoint_union(&CellComplex::point());
        assert_eq!(two_points.suspension().betti_numbers(), vec![1, 1]);
    }

    #[test]
    fn wedge_of_circles() {
        let w = CellComplex::circle().wedge(&CellComplex::circle());
        assert_eq!(w.betti_numbers(), vec![1, 2]);
        assert_eq!(w.euler_char_cells(), -1);
    }

    #[test]
    fn random_complexes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let k = random_complex(&mut rng, 6);
            let b = k.betti_numbers();
            assert!(b.iter().sum::<usize>() <= k.cells().iter().sum());
            assert_eq!(k.euler_char_cells(), k.euler_char_homology());
        }
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{"cells": [1, 2, 1], "boundaries": [[], []]}"#;
        let k = CellComplex::from_json(text).unwrap();
        assert_eq!(k, CellComplex::torus());
        let again = CellComplex::from_file(&k.to_file()).unwrap();
        assert_eq!(again, k);
        assert!(CellComplex::from_json(r#"{"cells": [1], "boundaries": [], "x": 1}"#).is_err());
    }

    #[test]
    fn surfaces() {
        let s = |orientable, genus, boundary_components| SurfaceDescriptor {
            orientable,
            genus,
            boundary_components,
        };
        assert_eq!(classify_surface_euler(s(true, 1, 0)), Ok(0));
        assert_eq!(classify_surface_euler(s(true, 0, 2)), Ok(0));
        assert_eq!(classify_surface_euler(s(false, 2, 0)), Ok(0));
        assert_eq!(classify_surface_euler(s(true, 2, 1)), Ok(-3));
        assert!(classify_surface_euler(s(false, 0, 1)).is_err());
    }

    fn unicycle_space() -> ModelSpace {
        ModelSpace::new(vec![Factor::real("x"), Factor::real("y"), Factor::angle("th")]).unwrap()
    }

    #[test]
    fn region_characteristics() {
        assert_eq!(region_euler_char(&Region::unit_disk()), Ok(1));
        let mut a = Region::annulus(&ModelSpace::plane(), [0.0, 0.0], 1.0, 4.0).unwrap();
        assert_eq!(region_euler_char(&a), Ok(0));
        for (i, c) in [[2.5, 0.0], [-2.5, 0.0], [0.0, 2.5]].into_iter().enumerate() {
            a = a.with_obstacle(c.to_vec(), 0.3).unwrap();
            assert_eq!(region_euler_char(&a), Ok(-(i as i64 + 1)));
        }
        let s3 = ModelSpace::euclidean(&["x", "y", "z"]).unwrap();
        let hollow = Region::ball(&s3, vec![0.0; 3], 2.0)
            .unwrap()
            .with_obstacle(vec![0.0; 3], 1.0)
            .unwrap();
        assert_eq!(region_euler_char(&hollow), Ok(2));
        assert_eq!(region_euler_char(&Region::unit_disk().with_euler_char(5)), Ok(5));
    }

    #[test]
    fn unicycle_safe_set() {
        let base = Region::annulus(&unicycle_space(), [0.0, 0.0], 0.5, 3.0)
            .unwrap()
            .with_obstacle(vec![1.5, 0.0], 0.3)
            .unwrap();
        // Product with the heading circle.
        assert_eq!(region_euler_char(&base), Ok(0));
        let safe = base
            .with_constraint(parse_expr("x*cos(th) + y*sin(th)").unwrap())
            .unwrap();
        assert_eq!(region_euler_char(&safe), Ok(-1));
    }

    #[test]
    fn unsupported_constraints() {
        let r = Region::unit_disk()
            .with_constraint(parse_expr("x - 0.5").unwrap())
            .unwrap();
        assert!(matches!(region_euler_char(&r), Err(TopologyError::Unsupported(_))));
        // Fiber is two arcs: cos(2 th) ≤ 0.
        let r = Region::annulus(&unicycle_space(), [0.0, 0.0], 0.5, 3.0)
            .unwrap()
            .with_constraint(parse_expr("cos(2*th)").unwrap())
            .unwrap();
        assert!(matches!(region_euler_char(&r), Err(TopologyError::Unsupported(_))));
    }
}

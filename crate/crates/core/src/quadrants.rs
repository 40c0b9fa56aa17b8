//! Quadrants: non-empty finite intersections of closed half-spaces
//! `λ·x ≥ c`.
//!
//! Every geometric question (non-emptiness, interior, recession cone, ball
//! placement) reduces to a small linear program over unit-normalized rows.
//! Each quadrant keeps an anchor point, the feasible point of least
//! ∞-norm, which centers the bounding boxes of the other programs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Sense};
use crate::measures::{check_dim, dot, Vector};

/// Membership tolerance for `λ·x ≥ c`; ties count as inside.
pub const MEMBER_TOL: f64 = 1e-9;
/// Margins at or below this are treated as zero.
pub const MARGIN_TOL: f64 = 1e-9;
/// Half-width of the box around the anchor for [`Quadrant::interior_point`].
pub const INTERIOR_BOX: f64 = 1e6;
/// Half-width of the search box for [`Quadrant::inscribe_ball`].
pub const BALL_BOX: f64 = 1e9;

/// `{x : normal·x ≥ offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HalfSpaceWire", into = "HalfSpaceWire")]
pub struct HalfSpace {
    normal: Vector,
    offset: f64,
}

#[derive(Serialize, Deserialize)]
struct HalfSpaceWire {
    normal: Vector,
    offset: f64,
}

impl TryFrom<HalfSpaceWire> for HalfSpace {
    type Error = Error;
    fn try_from(w: HalfSpaceWire) -> Result<Self> {
        HalfSpace::new(w.normal, w.offset)
    }
}

impl From<HalfSpace> for HalfSpaceWire {
    fn from(h: HalfSpace) -> Self {
        Self {
            normal: h.normal,
            offset: h.offset,
        }
    }
}

impl HalfSpace {
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        if normal.iter().all(|c| c.abs() <= 1e-12) {
            return Err(Error::ZeroNormal);
        }
        if !offset.is_finite() {
            return Err(Error::InvalidVector);
        }
        Ok(Self { normal, offset })
    }

    /// `sign · x_axis ≥ offset` in dimension `dim`.
    pub fn axis(dim: usize, axis: usize, sign: f64, offset: f64) -> Self {
        let mut normal = vec![0.0; dim];
        normal[axis] = sign;
        Self::new(Vector::from_unchecked(normal), offset).expect("unit axis normal")
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn slack(&self, x: &[f64]) -> f64 {
        self.normal.dot(x) - self.offset
    }

    fn unit(&self) -> (Vec<f64>, f64) {
        let n = self.normal.norm();
        (self.normal.iter().map(|c| c / n).collect(), self.offset / n)
    }
}

/// Result of the margin program: a point and the largest `t` with
/// `λ_i·x ≥ c_i + t‖λ_i‖₂` for all `i`.
#[derive(Debug, Clone, PartialEq)]
pub enum InteriorPoint {
    Interior { point: Vector, margin: f64 },
    /// Degenerate quadrant (margin 0); `point` is still feasible.
    NoInterior { point: Vector },
}

impl InteriorPoint {
    pub fn point(&self) -> &Vector {
        match self {
            Self::Interior { point, .. } | Self::NoInterior { point } => point,
        }
    }

    pub fn margin(&self) -> f64 {
        match self {
            Self::Interior { margin, .. } => *margin,
            Self::NoInterior { .. } => 0.0,
        }
    }

    pub fn has_interior(&self) -> bool {
        matches!(self, Self::Interior { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadrantWire", into = "QuadrantWire")]
pub struct Quadrant {
    dim: usize,
    halfspaces: Vec<HalfSpace>,
    anchor: Vector,
}

#[derive(Serialize, Deserialize)]
struct QuadrantWire {
    dim: usize,
    halfspaces: Vec<HalfSpace>,
}

impl TryFrom<QuadrantWire> for Quadrant {
    type Error = Error;
    fn try_from(w: QuadrantWire) -> Result<Self> {
        let q = Quadrant::new(w.halfspaces)?;
        check_dim(w.dim, q.dim)?;
        Ok(q)
    }
}

impl From<Quadrant> for QuadrantWire {
    fn from(q: Quadrant) -> Self {
        Self {
            dim: q.dim,
            halfspaces: q.halfspaces,
        }
    }
}

impl Quadrant {
    /// Intersection of `halfspaces`; fails with [`Error::EmptyQuadrant`] if
    /// the intersection is empty.
    pub fn new(halfspaces: Vec<HalfSpace>) -> Result<Self> {
        let dim = halfspaces.first().ok_or(Error::NoHalfSpaces)?.normal.dim();
        for h in &halfspaces {
            check_dim(dim, h.normal.dim())?;
        }
        let anchor = least_norm_point(&halfspaces, dim).ok_or(Error::EmptyQuadrant)?;
        Ok(Self {
            dim,
            halfspaces,
            anchor,
        })
    }

    /// Closed box `lo ≤ x ≤ hi`, with infinite bounds omitted. Needs at
    /// least one finite bound.
    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        let dim = lo.len();
        let mut hs = Vec::new();
        let mut anchor = vec![0.0; dim];
        for j in 0..dim {
            if lo[j] > hi[j] {
                return Err(Error::EmptyQuadrant);
            }
            if lo[j].is_finite() {
                hs.push(HalfSpace::axis(dim, j, 1.0, lo[j]));
            }
            if hi[j].is_finite() {
                hs.push(HalfSpace::axis(dim, j, -1.0, -hi[j]));
            }
            anchor[j] = match (lo[j].is_finite(), hi[j].is_finite()) {
                (true, true) if lo[j] <= 0.0 && hi[j] >= 0.0 => 0.0,
                (true, _) if lo[j] > 0.0 => lo[j],
                (_, true) if hi[j] < 0.0 => hi[j],
                _ => 0.0,
            };
        }
        if hs.is_empty() {
            return Err(Error::NoHalfSpaces);
        }
        Ok(Self {
            dim,
            halfspaces: hs,
            anchor: Vector::new(anchor)?,
        })
    }

    /// `{d}` as `2n` axis half-spaces.
    pub fn singleton(d: &Vector) -> Self {
        Self::axis_box(d, d).expect("a point is a valid box")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    /// A feasible point of least ∞-norm.
    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.halfspaces
            .iter()
            .all(|h| h.normal.dot(x) >= h.offset - MEMBER_TOL)
    }

    /// Every half-space has a single non-zero normal entry.
    pub fn is_axis_aligned(&self) -> bool {
        self.halfspaces
            .iter()
            .all(|h| h.normal.iter().filter(|c| **c != 0.0).count() == 1)
    }

    /// Per-axis bounds `[lo, hi]` of an axis-aligned quadrant.
    pub fn axis_bounds(&self) -> Option<Vec<(f64, f64)>> {
        if !self.is_axis_aligned() {
            return None;
        }
        let mut b = vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim];
        for h in &self.halfspaces {
            let (j, &a) = h.normal.iter().enumerate().find(|(_, c)| **c != 0.0)?;
            let bound = h.offset / a;
            if a > 0.0 {
                b[j].0 = b[j].0.max(bound);
            } else {
                b[j].1 = b[j].1.min(bound);
            }
        }
        Some(b)
    }

    /// If every normal is parallel to one unit direction `u`, returns `u` and
    /// the interval `[lo, hi]` of `u·x`.
    pub fn collinear_interval(&self) -> Option<(Vec<f64>, f64, f64)> {
        let (u, _) = self.halfspaces[0].unit();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for h in &self.halfspaces {
            let (v, c) = h.unit();
            let s = dot(&u, &v);
            let parallel = |sign: f64| u.iter().zip(&v).all(|(a, b)| (sign * a - b).abs() <= 1e-12);
            if s > 0.0 && parallel(1.0) {
                lo = lo.max(c);
            } else if s < 0.0 && parallel(-1.0) {
                hi = hi.min(-c);
            } else {
                return None;
            }
        }
        Some((u, lo, hi))
    }

    /// Chebyshev-style margin program inside a box of half-width
    /// [`INTERIOR_BOX`] around the anchor.
    pub fn interior_point(&self) -> InteriorPoint {
        let n = self.dim;
        let rows: Vec<(Vec<f64>, f64)> = self.halfspaces.iter().map(HalfSpace::unit).collect();
        // variables: y (free, x = anchor + y), t ≥ 0
        let mut obj = vec![0.0; n + 1];
        obj[n] = 1.0;
        let mut lp = LinearProgram::maximize(obj);
        for j in 0..n {
            lp.set_free(j);
        }
        for (u, c) in &rows {
            let mut a = u.clone();
            a.push(-1.0);
            lp.add_row(a, Sense::Ge, c - dot(u, &self.anchor));
        }
        add_box(&mut lp, n, n + 1, INTERIOR_BOX);
        let res = lp.solve();
        if let (LpStatus::Optimal, Some(p)) = (res.status, res.point) {
            let point = shifted(&self.anchor, &p[..n]);
            let margin = rows
                .iter()
                .map(|(u, c)| dot(u, &point) - c)
                .fold(f64::INFINITY, f64::min);
            if margin > MARGIN_TOL && self.contains_unchecked(&point) {
                return InteriorPoint::Interior { point, margin };
            }
        }
        InteriorPoint::NoInterior {
            point: self.anchor.clone(),
        }
    }

    /// Positive Lebesgue measure, i.e. non-empty interior.
    pub fn is_nondegenerate(&self) -> bool {
        self.interior_point().has_interior()
    }

    /// Whether the quadrant lies in a slab `λ⁻¹([a, b])`. Decided by the
    /// recession cone `{x : λ_i·x ≥ 0}`: the quadrant escapes every slab iff
    /// that cone has interior.
    pub fn is_two_sided_constrained(&self) -> bool {
        self.recession_margin() <= MARGIN_TOL
    }

    /// `max t` s.t. `λ_i·x ≥ t‖λ_i‖`, `‖x‖∞ ≤ 1`.
    pub fn recession_margin(&self) -> f64 {
        let n = self.dim;
        let mut obj = vec![0.0; n + 1];
        obj[n] = 1.0;
        let mut lp = LinearProgram::maximize(obj);
        for j in 0..n {
            lp.set_free(j);
        }
        for h in &self.halfspaces {
            let (mut a, _) = h.unit();
            a.push(-1.0);
            lp.add_row(a, Sense::Ge, 0.0);
        }
        add_box(&mut lp, n, n + 1, 1.0);
        let res = lp.solve();
        match (res.status, res.objective) {
            (LpStatus::Optimal, Some(t)) => t.max(0.0),
            _ => 0.0,
        }
    }

    /// A centre `d` of a Euclidean ball of `radius` inside the quadrant,
    /// closest to the anchor in ∞-norm, within [`BALL_BOX`]. `None` if no
    /// such ball fits.
    pub fn inscribe_ball(&self, radius: f64) -> Option<Vector> {
        if !(radius >= 0.0) {
            return None;
        }
        let n = self.dim;
        let rows: Vec<(Vec<f64>, f64)> = self.halfspaces.iter().map(HalfSpace::unit).collect();
        // variables: y (free), s ≥ 0; minimize s with |y_j| ≤ s ≤ BALL_BOX
        let mut obj = vec![0.0; n + 1];
        obj[n] = 1.0;
        let mut lp = LinearProgram::minimize(obj);
        for j in 0..n {
            lp.set_free(j);
        }
        for (u, c) in &rows {
            let mut a = u.clone();
            a.push(0.0);
            lp.add_row(a, Sense::Ge, c + radius - dot(u, &self.anchor));
        }
        for j in 0..n {
            let mut a = vec![0.0; n + 1];
            a[j] = 1.0;
            a[n] = -1.0;
            lp.add_row(a.clone(), Sense::Le, 0.0);
            a[j] = -1.0;
            lp.add_row(a, Sense::Le, 0.0);
        }
        let mut cap = vec![0.0; n + 1];
        cap[n] = 1.0;
        lp.add_row(cap, Sense::Le, BALL_BOX);
        let res = lp.solve();
        let p = match (res.status, res.point) {
            (LpStatus::Optimal, Some(p)) => p,
            _ => return None,
        };
        let d = shifted(&self.anchor, &p[..n]);
        let fits = self.halfspaces.iter().all(|h| {
            let need = h.offset + radius * h.normal.norm();
            h.normal.dot(&d) >= need - MEMBER_TOL * need.abs().max(1.0)
        });
        fits.then_some(d)
    }
}

fn shifted(anchor: &Vector, y: &[f64]) -> Vector {
    Vector::from_unchecked(anchor.iter().zip(y).map(|(a, b)| a + b).collect())
}

/// `|y_j| ≤ half_width` for the first `n` of `nvars` variables.
fn add_box(lp: &mut LinearProgram, n: usize, nvars: usize, half_width: f64) {
    for j in 0..n {
        let mut a = vec![0.0; nvars];
        a[j] = 1.0;
        lp.add_row(a.clone(), Sense::Le, half_width);
        a[j] = -1.0;
        lp.add_row(a, Sense::Le, half_width);
    }
}

/// Feasible point minimizing `‖x‖∞`, or `None` if the half-spaces do not
/// intersect.
fn least_norm_point(halfspaces: &[HalfSpace], n: usize) -> Option<Vector> {
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = LinearProgram::minimize(obj);
    for j in 0..n {
        lp.set_free(j);
    }
    for h in halfspaces {
        let (mut u, c) = h.unit();
        u.push(0.0);
        lp.add_row(u, Sense::Ge, c);
    }
    for j in 0..n {
        let mut a = vec![0.0; n + 1];
        a[j] = 1.0;
        a[n] = -1.0;
        lp.add_row(a.clone(), Sense::Le, 0.0);
        a[j] = -1.0;
        lp.add_row(a, Sense::Le, 0.0);
    }
    let res = lp.solve();
    let p = match (res.status, res.point) {
        (LpStatus::Optimal, Some(p)) => p,
        _ => return None,
    };
    let x = Vector::new(p[..n].to_vec()).ok()?;
    halfspaces
        .iter()
        .all(|h| h.slack(&x) >= -MEMBER_TOL * h.offset.abs().max(1.0))
        .then_some(x)
}

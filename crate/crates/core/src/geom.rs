//! Points, ranges, convex polygons and piecewise-linear terrains.
//!
//! Every range in this crate is closed: a point on the boundary counts as
//! inside. Orientation predicates use [`ORIENT_EPS`]; area and measure
//! comparisons use [`MEASURE_EPS`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for orientation tests and unit-norm checks.
pub const ORIENT_EPS: f64 = 1e-12;
/// Tolerance for area and measure comparisons.
pub const MEASURE_EPS: f64 = 1e-9;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// A point with 1 to 3 finite coordinates. Serialized as its coordinate list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(c: Vec<f64>) -> Result<Self> {
        Point::new(&c)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords().to_vec()
    }
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Dimension(format!("point dimension {} outside 1..={MAX_DIM}", coords.len())));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("non-finite coordinate {c}")));
        }
        let mut buf = [0.0; MAX_DIM];
        buf[..coords.len()].copy_from_slice(coords);
        Ok(Self { coords: buf, dim: coords.len() as u8 })
    }

    /// 2D point. Panics on non-finite input; use [`Point::new`] for untrusted data.
    pub fn xy(x: f64, y: f64) -> Self {
        Self::new(&[x, y]).expect("finite 2D coordinates")
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn coord(&self, axis: usize) -> f64 {
        self.coords()[axis]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.coords().iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Finite multiset of points carrying strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPointSet {
    dim: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    pub fn new(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!("set dimension {dim}")));
        }
        if points.len() != weights.len() {
            return Err(Error::Invalid(format!("{} points but {} weights", points.len(), weights.len())));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::Dimension(format!("point of dimension {} in a {dim}-dimensional set", p.dim())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Invalid(format!("weight {w} is not strictly positive")));
        }
        Ok(Self { dim, points, weights })
    }

    /// Every point gets weight 1.
    pub fn unit(dim: usize, points: Vec<Point>) -> Result<Self> {
        let weights = vec![1.0; points.len()];
        Self::new(dim, points, weights)
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, points: Vec::new(), weights: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Subset by index list, keeping the original weights.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            dim: self.dim,
            points: idx.iter().map(|&i| self.points[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Multiply every weight by `factor` (must be positive).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.points.clone(), self.weights.iter().map(|w| w * factor).collect())
    }

    /// Multiset union of two sets of the same dimension.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("union of {}D and {}D sets", self.dim, other.dim)));
        }
        let mut out = self.clone();
        out.points.extend_from_slice(&other.points);
        out.weights.extend_from_slice(&other.weights);
        Ok(out)
    }
}

/// A set of pairwise non-parallel unit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    dim: usize,
    dirs: Vec<[f64; MAX_DIM]>,
}

impl DirectionSet {
    /// Directions must already have unit norm (within [`ORIENT_EPS`]).
    pub fn new(dim: usize, dirs: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(dim, dirs, false)
    }

    /// Normalizes each direction before validating.
    pub fn normalized(dim: usize, dirs: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(dim, dirs, true)
    }

    /// The coordinate axes e_1..e_dim.
    pub fn axes(dim: usize) -> Self {
        let dirs = (0..dim)
            .map(|a| {
                let mut v = [0.0; MAX_DIM];
                v[a] = 1.0;
                v
            })
            .collect();
        Self { dim, dirs }
    }

    fn build(dim: usize, dirs: Vec<Vec<f64>>, normalize: bool) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!("direction dimension {dim}")));
        }
        let mut out = Vec::with_capacity(dirs.len());
        for d in dirs {
            if d.len() != dim {
                return Err(Error::Dimension(format!("direction of length {} in {dim}D", d.len())));
            }
            let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Invalid("zero or non-finite direction".into()));
            }
            let mut v = [0.0; MAX_DIM];
            for (slot, c) in v.iter_mut().zip(&d) {
                *slot = if normalize { c / norm } else { *c };
            }
            if !normalize && (norm - 1.0).abs() > ORIENT_EPS {
                return Err(Error::Invalid(format!("direction norm {norm} is not 1")));
            }
            out.push(v);
        }
        for i in 0..out.len() {
            for j in 0..i {
                if parallel(&out[i][..dim], &out[j][..dim]) {
                    return Err(Error::Invalid(format!("directions {j} and {i} are parallel")));
                }
            }
        }
        Ok(Self { dim, dirs: out })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dir(&self, i: usize) -> &[f64] {
        &self.dirs[i][..self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.dirs.iter().map(move |d| &d[..self.dim])
    }

    /// Rank of the direction matrix (how many independent directions).
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<f64>> = self.iter().map(|d| d.to_vec()).collect();
        let mut rank = 0;
        for col in 0..self.dim {
            let Some(piv) = (rank..rows.len())
                .filter(|&r| rows[r][col].abs() > ORIENT_EPS)
                .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()))
            else {
                continue;
            };
            rows.swap(rank, piv);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank {
                    let f = row[col] / pivot[col];
                    for (v, p) in row.iter_mut().zip(&pivot) {
                        *v -= f * p;
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

fn parallel(a: &[f64], b: &[f64]) -> bool {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot.abs() - na * nb).abs() <= ORIENT_EPS * na * nb
}

/// Closed axis-parallel box `[lo_1,hi_1] × … × [lo_d,hi_d]`.
///
/// A 2D box applied to terrain samples stands for the cylinder `box × ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RectRepr", into = "RectRepr")]
pub struct AxisRect {
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    dim: u8,
}

#[derive(Serialize, Deserialize)]
struct RectRepr {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RectRepr> for AxisRect {
    type Error = Error;

    fn try_from(r: RectRepr) -> Result<Self> {
        AxisRect::new(&r.lo, &r.hi)
    }
}

impl From<AxisRect> for RectRepr {
    fn from(r: AxisRect) -> Self {
        RectRepr { lo: r.lo().to_vec(), hi: r.hi().to_vec() }
    }
}

impl AxisRect {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::Dimension(format!("box bounds of lengths {} and {}", lo.len(), hi.len())));
        }
        let mut l = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM];
        for i in 0..lo.len() {
            if !(lo[i].is_finite() && hi[i].is_finite()) || lo[i] > hi[i] {
                return Err(Error::Invalid(format!("box side [{}, {}]", lo[i], hi[i])));
            }
            l[i] = lo[i];
            h[i] = hi[i];
        }
        Ok(Self { lo: l, hi: h, dim: lo.len() as u8 })
    }

    /// 2D box `[x0,x1] × [y0,y1]`. Panics on invalid bounds.
    pub fn xy(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self::new(&[x0, y0], &[x1, y1]).expect("valid 2D box")
    }

    pub fn unit_square() -> Self {
        Self::xy(0.0, 1.0, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim as usize]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim as usize]
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.width(a)).product()
    }

    /// Euclidean length of the diagonal.
    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|a| self.width(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| 0.5 * (self.lo[a] + self.hi[a])).collect()
    }

    pub fn contains(&self, p: &Point) -> Result<bool> {
        if p.dim() != self.dim() {
            return Err(Error::Dimension(format!("{}D point in {}D box", p.dim(), self.dim())));
        }
        Ok(self.contains_unchecked(p))
    }

    pub(crate) fn contains_unchecked(&self, p: &Point) -> bool {
        (0..self.dim()).all(|a| self.lo[a] <= p.coords[a] && p.coords[a] <= self.hi[a])
    }

    /// Intersection with another box of the same dimension, if nonempty.
    pub fn intersect(&self, other: &AxisRect) -> Option<AxisRect> {
        let d = self.dim();
        let lo: Vec<f64> = (0..d).map(|a| self.lo[a].max(other.lo[a])).collect();
        let hi: Vec<f64> = (0..d).map(|a| self.hi[a].min(other.hi[a])).collect();
        AxisRect::new(&lo, &hi).ok()
    }

    /// Split into two halves at the midpoint of `axis`.
    pub fn split(&self, axis: usize) -> (AxisRect, AxisRect) {
        let mid = 0.5 * (self.lo[axis] + self.hi[axis]);
        let mut left = *self;
        let mut right = *self;
        left.hi[axis] = mid;
        right.lo[axis] = mid;
        (left, right)
    }

    /// Counterclockwise polygon of a 2D box.
    pub fn to_polygon(&self) -> Result<ConvexPolygon> {
        if self.dim() != 2 {
            return Err(Error::Dimension("only 2D boxes convert to polygons".into()));
        }
        let (x0, y0, x1, y1) = (self.lo[0], self.lo[1], self.hi[0], self.hi[1]);
        ConvexPolygon::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }
}

/// Intersection of slabs `{p : a_i ≤ ⟨β_i, p⟩ ≤ b_i}` over a direction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KOrientedRange {
    dirs: DirectionSet,
    intervals: Vec<(f64, f64)>,
}

impl KOrientedRange {
    pub fn new(dirs: DirectionSet, intervals: Vec<(f64, f64)>) -> Result<Self> {
        if dirs.len() != intervals.len() {
            return Err(Error::Invalid(format!("{} directions but {} intervals", dirs.len(), intervals.len())));
        }
        if let Some((a, b)) = intervals.iter().find(|(a, b)| !(a <= b)) {
            return Err(Error::Invalid(format!("slab interval [{a}, {b}]")));
        }
        if dirs.rank() < dirs.dim() {
            return Err(Error::Invalid("slab intersection is unbounded".into()));
        }
        Ok(Self { dirs, intervals })
    }

    pub fn dirs(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, p: &Point) -> Result<bool> {
        if p.dim() != self.dirs.dim() {
            return Err(Error::Dimension(format!("{}D point in {}D range", p.dim(), self.dirs.dim())));
        }
        Ok(self.dirs.iter().zip(&self.intervals).all(|(d, &(a, b))| {
            let s = p.dot(d);
            a <= s && s <= b
        }))
    }

    /// The range as a polygon (2D only), clipped from a bounding square.
    pub fn to_polygon(&self) -> Result<Option<ConvexPolygon>> {
        if self.dirs.dim() != 2 {
            return Err(Error::Dimension("only 2D ranges convert to polygons".into()));
        }
        // |p| ≤ max |a_i|,|b_i| / min singular value; a generous square is enough
        let reach = self.intervals.iter().flat_map(|&(a, b)| [a.abs(), b.abs()]).fold(1.0f64, f64::max);
        let big = 4.0 * reach * (1.0 + self.dirs.len() as f64) * 1e3;
        let mut poly = Some(AxisRect::xy(-big, big, -big, big).to_polygon()?);
        for (d, &(a, b)) in self.dirs.iter().zip(&self.intervals) {
            for h in [HalfPlane::new([d[0], d[1]], b), HalfPlane::new([-d[0], -d[1]], -a)] {
                poly = poly.and_then(|p| clip(&p, &h));
            }
        }
        Ok(poly)
    }
}

/// A range of either supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Range {
    Rect(AxisRect),
    KOriented(KOrientedRange),
}

impl Range {
    pub fn contains(&self, p: &Point) -> Result<bool> {
        match self {
            Range::Rect(r) => r.contains(p),
            Range::KOriented(k) => k.contains(p),
        }
    }
}

/// Membership predicate for closed ranges.
pub fn contains(range: &Range, p: &Point) -> Result<bool> {
    range.contains(p)
}

/// Closed half-plane `{p : ⟨normal, p⟩ ≤ offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: [f64; 2], offset: f64) -> Self {
        Self { normal, offset }
    }

    fn slack(&self, v: [f64; 2]) -> f64 {
        self.offset - (self.normal[0] * v[0] + self.normal[1] * v[1])
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.slack([p.x(), p.y()]) >= 0.0
    }
}

/// Convex polygon stored as a counterclockwise vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl ConvexPolygon {
    /// Validates counterclockwise orientation and convexity. Collinear
    /// vertices are allowed; a fully degenerate (zero area) vertex list is
    /// accepted so that callers can report it as their own error.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Invalid(format!("polygon with {} vertices", vertices.len())));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite polygon vertex".into()));
        }
        let poly = Self { vertices };
        let scale = poly.scale();
        let tol = ORIENT_EPS * scale * scale;
        if poly.signed_area() < -tol {
            return Err(Error::Invalid("polygon is clockwise".into()));
        }
        let n = poly.vertices.len();
        let mut turning = 0.0;
        for i in 0..n {
            let (a, b, c) = (poly.vertices[i], poly.vertices[(i + 1) % n], poly.vertices[(i + 2) % n]);
            if cross(a, b, c) < -tol {
                return Err(Error::Invalid(format!("polygon not convex at vertex {}", (i + 1) % n)));
            }
            let e1 = [b[0] - a[0], b[1] - a[1]];
            let e2 = [c[0] - b[0], c[1] - b[1]];
            if e1 != [0.0, 0.0] && e2 != [0.0, 0.0] {
                turning += (e1[0] * e2[1] - e1[1] * e2[0]).atan2(e1[0] * e2[0] + e1[1] * e2[1]);
            }
        }
        // a convex but self-overlapping vertex list winds more than once
        if poly.signed_area() > tol && turning > 2.0 * std::f64::consts::PI + 1e-6 {
            return Err(Error::Invalid("polygon is self-intersecting".into()));
        }
        Ok(poly)
    }

    pub fn triangle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Result<Self> {
        if cross(a, b, c) < 0.0 {
            Self::new(vec![a, c, b])
        } else {
            Self::new(vec![a, b, c])
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn scale(&self) -> f64 {
        self.vertices.iter().flat_map(|v| [v[0].abs(), v[1].abs()]).fold(1.0, f64::max)
    }

    fn signed_area(&self) -> f64 {
        let o = self.vertices[0];
        let n = self.vertices.len();
        (1..n - 1).map(|i| cross(o, self.vertices[i], self.vertices[i + 1])).sum::<f64>() * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().max(0.0)
    }

    pub fn bounding_box(&self) -> AxisRect {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for a in 0..2 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        AxisRect::new(&lo, &hi).expect("finite vertices")
    }

    /// Closed containment, with [`ORIENT_EPS`] slack on each edge.
    pub fn contains(&self, p: &Point) -> bool {
        let q = [p.x(), p.y()];
        let n = self.vertices.len();
        let scale = self.scale();
        (0..n).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            if a == b {
                return true;
            }
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cross(a, b, q) >= -ORIENT_EPS * scale * len
        })
    }
}

/// Clip a convex polygon by a half-plane. `None` when the result has zero area.
pub fn clip(poly: &ConvexPolygon, h: &HalfPlane) -> Option<ConvexPolygon> {
    let vs = &poly.vertices;
    let n = vs.len();
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (vs[i], vs[(i + 1) % n]);
        let (sa, sb) = (h.slack(a), h.slack(b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out.dedup();
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 {
        return None;
    }
    let poly = ConvexPolygon { vertices: out };
    let scale = poly.scale();
    if poly.signed_area() <= ORIENT_EPS * ORIENT_EPS * scale * scale {
        return None;
    }
    Some(poly)
}

/// Clip a polygon to a closed 2D box.
pub fn clip_to_rect(poly: &ConvexPolygon, r: &AxisRect) -> Option<ConvexPolygon> {
    let planes = [
        HalfPlane::new([1.0, 0.0], r.hi()[0]),
        HalfPlane::new([-1.0, 0.0], -r.lo()[0]),
        HalfPlane::new([0.0, 1.0], r.hi()[1]),
        HalfPlane::new([0.0, -1.0], -r.lo()[1]),
    ];
    // skip planes that cannot cut the polygon
    let bb = poly.bounding_box();
    let mut cur = poly.clone();
    for (k, h) in planes.iter().enumerate() {
        let inside = match k {
            0 => bb.hi()[0] <= r.hi()[0],
            1 => bb.lo()[0] >= r.lo()[0],
            2 => bb.hi()[1] <= r.hi()[1],
            _ => bb.lo()[1] >= r.lo()[1],
        };
        if !inside {
            cur = clip(&cur, h)?;
        }
    }
    Some(cur)
}

/// Coefficients `(α, β, γ)` of the linear height `h(x, y) = αx + βy + γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Linear {
    pub const ZERO: Linear = Linear { alpha: 0.0, beta: 0.0, gamma: 0.0 };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.alpha * x + self.beta * y + self.gamma
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.alpha * s, self.beta * s, self.gamma * s)
    }

    /// The unique plane through three non-collinear points `(x, y, z)`.
    pub fn through(p: [f64; 3], q: [f64; 3], r: [f64; 3]) -> Result<Self> {
        let (ux, uy, uz) = (q[0] - p[0], q[1] - p[1], q[2] - p[2]);
        let (vx, vy, vz) = (r[0] - p[0], r[1] - p[1], r[2] - p[2]);
        let det = ux * vy - uy * vx;
        if det.abs() <= ORIENT_EPS * (ux.abs() + uy.abs()).max(1.0) * (vx.abs() + vy.abs()).max(1.0) {
            return Err(Error::Invalid("degenerate triangle has no unique plane".into()));
        }
        let alpha = (uz * vy - uy * vz) / det;
        let beta = (ux * vz - uz * vx) / det;
        let gamma = p[2] - alpha * p[0] - beta * p[1];
        Ok(Self::new(alpha, beta, gamma))
    }
}

/// Exact `∬_poly (αx + βy + γ) dA` from first moments accumulated over edges.
pub fn integrate_linear(poly: &ConvexPolygon, h: &Linear) -> f64 {
    // moments about the first vertex keep cancellation small far from the origin
    let o = poly.vertices[0];
    let n = poly.vertices.len();
    let (mut area2, mut mx6, mut my6) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let a = [poly.vertices[i][0] - o[0], poly.vertices[i][1] - o[1]];
        let b = [poly.vertices[(i + 1) % n][0] - o[0], poly.vertices[(i + 1) % n][1] - o[1]];
        let c = a[0] * b[1] - b[0] * a[1];
        area2 += c;
        mx6 += (a[0] + b[0]) * c;
        my6 += (a[1] + b[1]) * c;
    }
    let area = 0.5 * area2;
    let mx = mx6 / 6.0 + area * o[0];
    let my = my6 / 6.0 + area * o[1];
    h.alpha * mx + h.beta * my + h.gamma * area
}

/// A terrain triangle with its linear height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainTriangle {
    pub poly: ConvexPolygon,
    pub height: Linear,
}

/// Triangulated base with a per-triangle linear height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLTerrain {
    triangles: Vec<TerrainTriangle>,
    base_box: AxisRect,
}

impl PLTerrain {
    /// Validates disjoint interiors, coverage of `base_box` and height
    /// continuity across shared edges.
    pub fn new(triangles: Vec<TerrainTriangle>, base_box: AxisRect) -> Result<Self> {
        if base_box.dim() != 2 {
            return Err(Error::Dimension("terrain base must be 2D".into()));
        }
        if triangles.is_empty() {
            return Err(Error::Invalid("terrain without triangles".into()));
        }
        let scale = base_box.lo().iter().chain(base_box.hi()).fold(1.0f64, |m, c| m.max(c.abs()));
        let slack = MEASURE_EPS * scale;
        let mut area = 0.0;
        for (i, t) in triangles.iter().enumerate() {
            if t.poly.vertices().len() != 3 {
                return Err(Error::Invalid(format!("piece {i} is not a triangle")));
            }
            if t.poly.area() <= MEASURE_EPS * scale * scale {
                return Err(Error::Invalid(format!("triangle {i} has zero area")));
            }
            let bb = t.poly.bounding_box();
            if (0..2).any(|a| bb.lo()[a] < base_box.lo()[a] - slack || bb.hi()[a] > base_box.hi()[a] + slack) {
                return Err(Error::Invalid(format!("triangle {i} leaves the base box")));
            }
            area += t.poly.area();
        }
        if (area - base_box.volume()).abs() > MEASURE_EPS * base_box.volume().max(1.0) {
            return Err(Error::Invalid(format!("triangles cover area {area}, base box has {}", base_box.volume())));
        }
        check_disjoint_and_continuous(&triangles, scale)?;
        Ok(Self { triangles, base_box })
    }

    pub fn triangles(&self) -> &[TerrainTriangle] {
        &self.triangles
    }

    pub fn base_box(&self) -> &AxisRect {
        &self.base_box
    }

    /// Height at a base point (0 outside every triangle).
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let p = Point::xy(x, y);
        self.triangles.iter().find(|t| t.poly.contains(&p)).map_or(0.0, |t| t.height.eval(x, y))
    }

    pub fn total_measure(&self) -> f64 {
        self.triangles.iter().map(|t| integrate_linear(&t.poly, &t.height)).sum()
    }

    /// Multiply all heights by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            triangles: self
                .triangles
                .iter()
                .map(|t| TerrainTriangle { poly: t.poly.clone(), height: t.height.scaled(s) })
                .collect(),
            base_box: self.base_box,
        }
    }

    /// True when some triangle dips below zero height at a vertex.
    pub fn has_negative_heights(&self) -> bool {
        self.triangles.iter().any(|t| t.poly.vertices().iter().any(|v| t.height.eval(v[0], v[1]) < -MEASURE_EPS))
    }

    /// Split into `(max(h, 0), max(-h, 0))`, both covering the same base.
    pub fn split_sign(&self) -> (PLTerrain, PLTerrain) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for t in &self.triangles {
            let h = t.height;
            let up = HalfPlane::new([-h.alpha, -h.beta], h.gamma); // h ≥ 0
            let down = HalfPlane::new([h.alpha, h.beta], -h.gamma); // h ≤ 0
            for (part, keep_pos) in [(clip(&t.poly, &up), true), (clip(&t.poly, &down), false)] {
                let Some(part) = part else { continue };
                let (hp, hn) = if keep_pos { (h, Linear::ZERO) } else { (Linear::ZERO, h.scaled(-1.0)) };
                for tri in fan(&part) {
                    pos.push(TerrainTriangle { poly: tri.clone(), height: hp });
                    neg.push(TerrainTriangle { poly: tri, height: hn });
                }
            }
        }
        (PLTerrain { triangles: pos, base_box: self.base_box }, PLTerrain { triangles: neg, base_box: self.base_box })
    }
}

/// Fan triangulation of a convex polygon.
pub(crate) fn fan(poly: &ConvexPolygon) -> Vec<ConvexPolygon> {
    let v = poly.vertices();
    (1..v.len() - 1)
        .filter_map(|i| {
            let t = ConvexPolygon { vertices: vec![v[0], v[i], v[i + 1]] };
            (t.signed_area() > 0.0).then_some(t)
        })
        .collect()
}

fn check_disjoint_and_continuous(tris: &[TerrainTriangle], scale: f64) -> Result<()> {
    let boxes: Vec<AxisRect> = tris.iter().map(|t| t.poly.bounding_box()).collect();
    let mut order: Vec<usize> = (0..tris.len()).collect();
    order.sort_by(|&a, &b| boxes[a].lo()[0].total_cmp(&boxes[b].lo()[0]));
    let cont_tol = MEASURE_EPS * scale.max(1.0);
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if boxes[j].lo()[0] > boxes[i].hi()[0] {
                break;
            }
            if boxes[j].lo()[1] > boxes[i].hi()[1] || boxes[j].hi()[1] < boxes[i].lo()[1] {
                continue;
            }
            let mut overlap = Some(tris[i].poly.clone());
            let v = tris[j].poly.vertices();
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let h = HalfPlane::new([b[1] - a[1], a[0] - b[0]], (b[1] - a[1]) * a[0] + (a[0] - b[0]) * a[1]);
                overlap = overlap.and_then(|p| clip(&p, &h));
            }
            if let Some(o) = overlap {
                if o.area() > MEASURE_EPS * scale * scale {
                    return Err(Error::Invalid(format!("triangles {i} and {j} overlap")));
                }
            }
            // shared vertices must agree in height
            for a in tris[i].poly.vertices() {
                for b in v {
                    if (a[0] - b[0]).abs() <= cont_tol && (a[1] - b[1]).abs() <= cont_tol {
                        let (hi, hj) = (tris[i].height.eval(a[0], a[1]), tris[j].height.eval(b[0], b[1]));
                        if (hi - hj).abs() > cont_tol * hi.abs().max(hj.abs()).max(1.0) {
                            return Err(Error::Invalid(format!(
                                "height jumps from {hi} to {hj} between triangles {i} and {j}"
                            )));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// `μ(R ∩ D)`: integral of the terrain height over the part of the base inside `r`.
pub fn terrain_measure(t: &PLTerrain, r: &AxisRect) -> f64 {
    let Some(r) = r.intersect(t.base_box()) else { return 0.0 };
    t.triangles().iter().filter_map(|tri| clip_to_rect(&tri.poly, &r).map(|p| integrate_linear(&p, &tri.height))).sum()
}

/// A box with a linear density that is strictly positive on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPatch {
    rect: AxisRect,
    height: Linear,
}

impl LinearPatch {
    pub fn new(rect: AxisRect, height: Linear) -> Result<Self> {
        if rect.dim() != 2 {
            return Err(Error::Dimension("patch base must be 2D".into()));
        }
        if !(rect.width(0) > 0.0 && rect.width(1) > 0.0) {
            return Err(Error::Invalid("patch base has zero area".into()));
        }
        let min = corners(&rect).iter().map(|c| height.eval(c[0], c[1])).fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::Invalid(format!("patch height drops to {min}")));
        }
        Ok(Self { rect, height })
    }

    pub fn rect(&self) -> &AxisRect {
        &self.rect
    }

    pub fn height(&self) -> &Linear {
        &self.height
    }

    pub fn measure(&self) -> f64 {
        integrate_linear(&self.rect.to_polygon().expect("2D"), &self.height)
    }
}

fn corners(r: &AxisRect) -> [[f64; 2]; 4] {
    let (x0, y0, x1, y1) = (r.lo()[0], r.lo()[1], r.hi()[0], r.hi()[1]);
    [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_json() {
        let r = AxisRect::xy(0.0, 1.5, -2.0, 3.0);
        let js = serde_json::to_string(&r).unwrap();
        assert_eq!(js, r#"{"lo":[0.0,-2.0],"hi":[1.5,3.0]}"#);
        assert_eq!(serde_json::from_str::<AxisRect>(&js).unwrap(), r);
        assert!(serde_json::from_str::<AxisRect>(r#"{"lo":[1.0],"hi":[0.0]}"#).is_err());
        let p = Point::xy(0.25, 1.0);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[0.25,1.0]");
        assert!(serde_json::from_str::<Point>("[1.0, NaN]").is_err());
    }

    fn unit() -> ConvexPolygon {
        AxisRect::unit_square().to_polygon().unwrap()
    }

    #[test]
    fn closed_box_membership() {
        let r = Range::Rect(AxisRect::unit_square());
        assert!(contains(&r, &Point::xy(0.5, 0.5)).unwrap());
        assert!(contains(&r, &Point::xy(1.0, 1.0)).unwrap());
        assert!(!contains(&r, &Point::xy(1.0 + 1e-15, 0.5)).unwrap());
        assert!(contains(&r, &Point::new(&[0.5]).unwrap()).is_err());
    }

    #[test]
    fn slab_pair_membership() {
        let dirs = DirectionSet::normalized(2, vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = Range::KOriented(KOrientedRange::new(dirs, vec![(0.0, 1.0), (0.0, s)]).unwrap());
        // x + y = 1.8 exceeds 1
        assert!(!contains(&r, &Point::xy(0.9, 0.9)).unwrap());
        assert!(contains(&r, &Point::xy(0.2, 0.3)).unwrap());
    }

    #[test]
    fn unbounded_slabs_rejected() {
        let dirs = DirectionSet::axes(2);
        let one = DirectionSet::new(2, vec![dirs.dir(0).to_vec()]).unwrap();
        assert!(KOrientedRange::new(one, vec![(0.0, 1.0)]).is_err());
        assert!(DirectionSet::normalized(2, vec![vec![1.0, 1.0], vec![-2.0, -2.0]]).is_err());
        assert!(DirectionSet::new(2, vec![vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn clip_examples() {
        let sq = unit();
        let same = clip(&sq, &HalfPlane::new([1.0, 0.0], 1.0)).unwrap();
        assert!((same.area() - 1.0).abs() < 1e-15);
        let half = clip(&sq, &HalfPlane::new([1.0, 0.0], 0.5)).unwrap();
        assert_eq!(half.bounding_box(), AxisRect::xy(0.0, 0.5, 0.0, 1.0));
        let tri = clip(&sq, &HalfPlane::new([1.0, 1.0], 1.0)).unwrap();
        assert_eq!(tri.vertices(), &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(clip(&sq, &HalfPlane::new([1.0, 0.0], 0.0)).is_none());
        assert!(clip(&sq, &HalfPlane::new([1.0, 0.0], -1.0)).is_none());
    }

    #[test]
    fn integrate_examples() {
        let sq = unit();
        assert!((integrate_linear(&sq, &Linear::new(0.0, 0.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!((integrate_linear(&sq, &Linear::new(1.0, 0.0, 0.0)) - 0.5).abs() < 1e-15);
        let tri = ConvexPolygon::triangle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!((integrate_linear(&tri, &Linear::new(0.0, 0.0, 2.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polygon_validation() {
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0]]).is_err());
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // pentagram order winds twice
        let star: Vec<[f64; 2]> = (0..5)
            .map(|k| {
                let a = std::f64::consts::TAU * (2 * k) as f64 / 5.0;
                [a.cos(), a.sin()]
            })
            .collect();
        assert!(ConvexPolygon::new(star).is_err());
    }

    fn flat_square(h: Linear) -> PLTerrain {
        let a = ConvexPolygon::triangle([0.0, 0.0], [1.0, 0.0], [1.0, 1.0]).unwrap();
        let b = ConvexPolygon::triangle([0.0, 0.0], [1.0, 1.0], [0.0, 1.0]).unwrap();
        PLTerrain::new(
            vec![TerrainTriangle { poly: a, height: h }, TerrainTriangle { poly: b, height: h }],
            AxisRect::unit_square(),
        )
        .unwrap()
    }

    #[test]
    fn terrain_measure_examples() {
        let flat = flat_square(Linear::new(0.0, 0.0, 1.0));
        assert!((terrain_measure(&flat, &AxisRect::xy(0.0, 0.5, 0.0, 0.5)) - 0.25).abs() < 1e-12);
        let ramp = flat_square(Linear::new(1.0, 0.0, 0.0));
        assert!((terrain_measure(&ramp, &AxisRect::unit_square()) - 0.5).abs() < 1e-12);
        // a box sticking out of the base is clamped
        assert!((terrain_measure(&flat, &AxisRect::xy(-1.0, 2.0, 0.5, 3.0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn terrain_validation() {
        let h = Linear::new(0.0, 0.0, 1.0);
        let a = ConvexPolygon::triangle([0.0, 0.0], [1.0, 0.0], [1.0, 1.0]).unwrap();
        let b = ConvexPolygon::triangle([0.0, 0.0], [1.0, 1.0], [0.0, 1.0]).unwrap();
        // coverage
        assert!(PLTerrain::new(vec![TerrainTriangle { poly: a.clone(), height: h }], AxisRect::unit_square()).is_err());
        // overlap: same triangle twice plus area bookkeeping mismatch
        let c = ConvexPolygon::triangle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!(PLTerrain::new(
            vec![TerrainTriangle { poly: a.clone(), height: h }, TerrainTriangle { poly: c, height: h }],
            AxisRect::unit_square()
        )
        .is_err());
        // discontinuous heights across the diagonal
        assert!(PLTerrain::new(
            vec![
                TerrainTriangle { poly: a, height: h },
                TerrainTriangle { poly: b, height: Linear::new(0.0, 0.0, 2.0) }
            ],
            AxisRect::unit_square()
        )
        .is_err());
    }

    #[test]
    fn sign_split_preserves_signed_measure() {
        // h = x - 0.5 crosses zero in the middle of the square
        let t = flat_square(Linear::new(1.0, 0.0, -0.5));
        assert!(t.has_negative_heights());
        let (pos, neg) = t.split_sign();
        assert!((pos.total_measure() - 0.125).abs() < 1e-12);
        assert!((neg.total_measure() - 0.125).abs() < 1e-12);
        let r = AxisRect::xy(0.2, 0.9, 0.1, 0.7);
        let signed = terrain_measure(&pos, &r) - terrain_measure(&neg, &r);
        // ∫_{0.2}^{0.9} (x - 0.5) dx * 0.6
        let exact = ((0.9f64.powi(2) - 0.2f64.powi(2)) / 2.0 - 0.5 * 0.7) * 0.6;
        assert!((signed - exact).abs() < 1e-12);
        assert!(PLTerrain::new(pos.triangles().to_vec(), *pos.base_box()).is_ok());
    }

    #[test]
    fn plane_through_points() {
        let h = Linear::through([0.0, 0.0, 1.0], [1.0, 0.0, 3.0], [0.0, 1.0, -1.0]).unwrap();
        assert!((h.alpha - 2.0).abs() < 1e-15 && (h.beta + 2.0).abs() < 1e-15 && (h.gamma - 1.0).abs() < 1e-15);
        assert!(Linear::through([0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn patch_requires_positive_height() {
        assert!(LinearPatch::new(AxisRect::unit_square(), Linear::new(1.0, 0.0, -0.5)).is_err());
        let p = LinearPatch::new(AxisRect::xy(1.0, 2.0, 0.0, 1.0), Linear::new(1.0, 0.0, 0.0)).unwrap();
        assert!((p.measure() - 1.5).abs() < 1e-15);
    }
}

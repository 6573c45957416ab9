//! Scan statistics: the rectangle maximizing a discrepancy between a measured
//! and a baseline point set, and linear-time maximizers over signed 1D
//! piecewise-linear densities.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::RangeFamily;
use crate::geom::{AxisRect, WeightedPointSet};
use crate::merge_reduce::{epsilon_approx, ReduceConfig};

/// `d_P(m, b) = m ln(m/b) + (1−m) ln((1−m)/(1−b))` with both arguments
/// clamped into `[κ, 1−κ]`.
pub fn poisson_disc(m: f64, b: f64, kappa: f64) -> f64 {
    let k = kappa.clamp(0.0, 0.5);
    let (m, b) = (m.clamp(k, 1.0 - k), b.clamp(k, 1.0 - k));
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    term(m, b) + term(1.0 - m, 1.0 - b)
}

/// `a·m + c·b + g`.
pub fn linear_disc(a: f64, c: f64, g: f64, m: f64, b: f64) -> f64 {
    a * m + c * b + g
}

/// Coefficients of a linear discrepancy `a·m + c·b + g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearStat {
    pub a: f64,
    pub c: f64,
    pub g: f64,
}

impl LinearStat {
    pub fn new(a: f64, c: f64, g: f64) -> Self {
        LinearStat { a, c, g }
    }

    pub fn eval(&self, m: f64, b: f64) -> f64 {
        linear_disc(self.a, self.c, self.g, m, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    Poisson { kappa: f64 },
    Linear(LinearStat),
}

impl Statistic {
    /// Poisson statistic with `κ = 1/(2(|M|+|B|))`.
    pub fn poisson_for(m: &WeightedPointSet, b: &WeightedPointSet) -> Self {
        Statistic::Poisson { kappa: kappa(m.len() + b.len()) }
    }

    pub fn eval(&self, m: f64, b: f64) -> f64 {
        match self {
            Statistic::Poisson { kappa } => poisson_disc(m, b, *kappa),
            Statistic::Linear(l) => l.eval(m, b),
        }
    }
}

fn kappa(n: usize) -> f64 {
    1.0 / (2.0 * n.max(1) as f64)
}

/// A maximizing rectangle with the measured and baseline weight shares it
/// holds. The rectangle is the bounding box of the points inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub range: AxisRect,
    pub m_frac: f64,
    pub b_frac: f64,
    pub value: f64,
}

impl ScanResult {
    /// Shares and value of `range` recomputed from the inputs.
    pub fn evaluate(range: AxisRect, m: &WeightedPointSet, b: &WeightedPointSet, stat: &Statistic) -> Self {
        let share = |s: &WeightedPointSet| {
            let inside: f64 = s.iter().filter(|(q, _)| in_rect(&range, q.x(), q.y())).map(|(_, w)| w).sum();
            (inside / s.total_weight()).clamp(0.0, 1.0)
        };
        let (m_frac, b_frac) = (share(m), share(b));
        ScanResult { range, m_frac, b_frac, value: stat.eval(m_frac, b_frac) }
    }
}

fn in_rect(r: &AxisRect, x: f64, y: f64) -> bool {
    r.lo()[0] <= x && x <= r.hi()[0] && r.lo()[1] <= y && y <= r.hi()[1]
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    x: f64,
    y: f64,
    dm: f64,
    db: f64,
}

fn entries(m: &WeightedPointSet, b: &WeightedPointSet) -> Result<Vec<Entry>> {
    for s in [m, b] {
        if s.dim() != 2 {
            return Err(Error::Dimension("scan statistics need planar points".into()));
        }
        if s.is_empty() || s.total_weight() <= 0.0 {
            return Err(Error::Invalid("measured and baseline sets must be nonempty".into()));
        }
    }
    let (wm, wb) = (m.total_weight(), b.total_weight());
    let mut out: Vec<Entry> = m
        .iter()
        .map(|(q, w)| Entry { x: q.x(), y: q.y(), dm: w / wm, db: 0.0 })
        .chain(b.iter().map(|(q, w)| Entry { x: q.x(), y: q.y(), dm: 0.0, db: w / wb }))
        .collect();
    out.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    Ok(out)
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn rank(sorted: &[f64], v: f64) -> usize {
    sorted.partition_point(|&s| s < v)
}

/// Candidate: value and rectangle `(x1, x2, y1, y2)`.
#[derive(Debug, Clone, Copy)]
struct Cand {
    value: f64,
    key: [f64; 4],
}

impl Cand {
    const NONE: Cand = Cand { value: f64::NEG_INFINITY, key: [f64::INFINITY; 4] };

    /// Larger value first, then the lexicographically smaller rectangle.
    fn better(self, other: Cand) -> Cand {
        match other.value.total_cmp(&self.value) {
            Ordering::Greater => other,
            Ordering::Equal if lex(&other.key, &self.key) == Ordering::Less => other,
            _ => self,
        }
    }
}

fn lex(a: &[f64; 4], b: &[f64; 4]) -> Ordering {
    a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Tightens the candidate to the bounding box of its points and recomputes
/// shares and value from the inputs.
fn finish(c: Cand, pts: &[Entry], m: &WeightedPointSet, b: &WeightedPointSet, stat: &Statistic) -> Result<ScanResult> {
    let [x1, x2, y1, y2] = c.key;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for e in pts.iter().filter(|e| x1 <= e.x && e.x <= x2 && y1 <= e.y && e.y <= y2) {
        lo = [lo[0].min(e.x), lo[1].min(e.y)];
        hi = [hi[0].max(e.x), hi[1].max(e.y)];
    }
    Ok(ScanResult::evaluate(AxisRect::new(&lo, &hi)?, m, b, stat))
}

/// Exact maximizer of `stat` over all combinatorially distinct rectangles,
/// by enumerating x-pairs and, inside each strip, y-pairs. `O(n⁴)`.
pub fn max_rect_general(m: &WeightedPointSet, b: &WeightedPointSet, stat: &Statistic) -> Result<ScanResult> {
    let pts = entries(m, b)?;
    let xs = distinct(pts.iter().map(|e| e.x).collect());
    let mut cols: Vec<Vec<Entry>> = vec![Vec::new(); xs.len()];
    for e in &pts {
        cols[rank(&xs, e.x)].push(*e);
    }
    let best = (0..xs.len())
        .into_par_iter()
        .map(|i| {
            let mut best = Cand::NONE;
            let mut strip: Vec<Entry> = Vec::new();
            let mut groups: Vec<(f64, f64, f64)> = Vec::new();
            for j in i..xs.len() {
                strip = merge_by_y(&strip, &cols[j]);
                groups.clear();
                for e in &strip {
                    match groups.last_mut() {
                        Some(g) if g.0 == e.y => {
                            g.1 += e.dm;
                            g.2 += e.db;
                        }
                        _ => groups.push((e.y, e.dm, e.db)),
                    }
                }
                for k in 0..groups.len() {
                    let (mut sm, mut sb) = (0.0, 0.0);
                    for g in &groups[k..] {
                        sm += g.1;
                        sb += g.2;
                        let v = stat.eval(sm, sb);
                        if v > best.value {
                            best = Cand { value: v, key: [xs[i], xs[j], groups[k].0, g.0] };
                        }
                    }
                }
            }
            best
        })
        .reduce(|| Cand::NONE, Cand::better);
    finish(best, &pts, m, b, stat)
}

fn merge_by_y(a: &[Entry], b: &[Entry]) -> Vec<Entry> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].y <= b[j].y {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Exact maximizer of a linear statistic: for every y-pair a maximum-sum run
/// over the x-columns holding points in that band. `O(n³)`.
pub fn max_rect_linear(m: &WeightedPointSet, b: &WeightedPointSet, coeffs: &LinearStat) -> Result<ScanResult> {
    let pts = entries(m, b)?;
    let best = linear_sweep(&pts, std::slice::from_ref(coeffs))[0];
    finish(best, &pts, m, b, &Statistic::Linear(*coeffs))
}

/// Best rectangle for each plane, sharing one sweep over y-pairs.
fn linear_sweep(pts: &[Entry], planes: &[LinearStat]) -> Vec<Cand> {
    let xs = distinct(pts.iter().map(|e| e.x).collect());
    let ys = distinct(pts.iter().map(|e| e.y).collect());
    let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); ys.len()];
    for e in pts {
        rows[rank(&ys, e.y)].push(*e);
    }
    let none = vec![Cand::NONE; planes.len()];
    (0..ys.len())
        .into_par_iter()
        .map(|k| {
            let mut best = none.clone();
            let (mut cm, mut cb) = (vec![0.0; xs.len()], vec![0.0; xs.len()]);
            let mut present: Vec<usize> = Vec::new();
            for l in k..ys.len() {
                for e in &rows[l] {
                    let r = rank(&xs, e.x);
                    if let Err(pos) = present.binary_search(&r) {
                        present.insert(pos, r);
                    }
                    cm[r] += e.dm;
                    cb[r] += e.db;
                }
                for (plane, best) in planes.iter().zip(best.iter_mut()) {
                    let (mut cur, mut start) = (0.0, 0);
                    for (t, &r) in present.iter().enumerate() {
                        if t == 0 || cur <= 0.0 {
                            cur = 0.0;
                            start = r;
                        }
                        cur += plane.a * cm[r] + plane.c * cb[r];
                        let v = cur + plane.g;
                        if v > best.value {
                            *best = Cand { value: v, key: [xs[start], xs[r], ys[k], ys[l]] };
                        }
                    }
                }
            }
            best
        })
        .reduce(|| none.clone(), |a, b| a.into_iter().zip(b).map(|(p, q)| p.better(q)).collect())
}

/// Tangent planes of `d_P` whose upper envelope is within `eps` of `d_P` on
/// `[κ, 1−κ]²` with `κ = 1/(2n)`.
///
/// Tangent points form a product grid, uniform in logit coordinates (so
/// geometric towards 0 and 1). The step shrinks until every grid cell passes
/// a dense check against its four corner tangents; about 10⁶ points are
/// checked overall.
pub fn linearize_poisson(eps: f64, n: usize) -> Result<Vec<LinearStat>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("eps must lie in (0,1), got {eps}")));
    }
    let k = kappa(n);
    let mut step = 2.0;
    loop {
        let axis = logit_axis(k, step);
        let tangents: Vec<Vec<LinearStat>> =
            axis.iter().map(|&m| axis.iter().map(|&b| poisson_tangent(m, b)).collect()).collect();
        if envelope_gap(&axis, &tangents, k) <= eps {
            return Ok(tangents.into_iter().flatten().collect());
        }
        step /= 1.25;
    }
}

fn logit_axis(k: f64, step: f64) -> Vec<f64> {
    let lo = (k / (1.0 - k)).ln();
    let cells = ((-2.0 * lo) / step).ceil().max(1.0) as usize;
    (0..=cells)
        .map(|i| match i {
            0 => k,
            i if i == cells => 1.0 - k,
            i => {
                let s = lo - 2.0 * lo * i as f64 / cells as f64;
                1.0 / (1.0 + (-s).exp())
            }
        })
        .collect()
}

fn poisson_tangent(m0: f64, b0: f64) -> LinearStat {
    let gm = (m0 / b0).ln() - ((1.0 - m0) / (1.0 - b0)).ln();
    let gb = -m0 / b0 + (1.0 - m0) / (1.0 - b0);
    let f = poisson_disc(m0, b0, 0.0);
    LinearStat { a: gm, c: gb, g: f - gm * m0 - gb * b0 }
}

/// Largest `d_P − max(corner tangents)` over a sub-grid of every cell; an
/// upper bound on the envelope error at those points.
fn envelope_gap(axis: &[f64], tangents: &[Vec<LinearStat>], k: f64) -> f64 {
    let cells = axis.len() - 1;
    let sub = (1000 / cells).max(4);
    (0..cells)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in 0..cells {
                let corners = [tangents[i][j], tangents[i + 1][j], tangents[i][j + 1], tangents[i + 1][j + 1]];
                for s in 0..=sub {
                    let m = axis[i] + (axis[i + 1] - axis[i]) * s as f64 / sub as f64;
                    for t in 0..=sub {
                        let b = axis[j] + (axis[j + 1] - axis[j]) * t as f64 / sub as f64;
                        let env = corners.iter().map(|p| p.eval(m, b)).fold(f64::NEG_INFINITY, f64::max);
                        worst = worst.max(poisson_disc(m, b, k) - env);
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Approximate Poisson scan: compress both sets to `eps/2`-approximations,
/// maximize every tangent plane of an `eps/2` linearization exactly, and
/// return the candidate rectangle whose Poisson value on the full inputs is
/// largest.
pub fn max_rect_poisson_approx(m: &WeightedPointSet, b: &WeightedPointSet, eps: f64) -> Result<ScanResult> {
    let pts = entries(m, b)?;
    let cfg = ReduceConfig::new(eps / 2.0, RangeFamily::rect(2))?;
    let (mc, _) = epsilon_approx(m, &cfg)?;
    let (bc, _) = epsilon_approx(b, &cfg)?;
    let n = m.len() + b.len();
    let planes = linearize_poisson(eps / 2.0, n)?;
    let stat = Statistic::Poisson { kappa: kappa(n) };
    let compressed = entries(&mc, &bc)?;
    let mut best: Option<ScanResult> = None;
    for cand in linear_sweep(&compressed, &planes) {
        let r = finish(cand, &pts, m, b, &stat)?;
        let take = match &best {
            None => true,
            Some(cur) => {
                r.value > cur.value
                    || (r.value == cur.value && lex(&rect_key(&r.range), &rect_key(&cur.range)) == Ordering::Less)
            }
        };
        if take {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Invalid("no candidate rectangle".into()))
}

fn rect_key(r: &AxisRect) -> [f64; 4] {
    [r.lo()[0], r.hi()[0], r.lo()[1], r.hi()[1]]
}

/// Signed piecewise-linear function of one variable through `(x_i, h_i)`.
/// Repeated abscissae encode jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedPl1d {
    xs: Vec<f64>,
    hs: Vec<f64>,
}

impl SignedPl1d {
    pub fn new(xs: Vec<f64>, hs: Vec<f64>) -> Result<Self> {
        if xs.len() != hs.len() || xs.len() < 2 {
            return Err(Error::Invalid("need at least two vertices with one height each".into()));
        }
        if xs.iter().chain(&hs).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite vertex".into()));
        }
        if xs.windows(2).any(|w| w[1] < w[0]) || xs[0] == xs[xs.len() - 1] {
            return Err(Error::Invalid("abscissae must be non-decreasing over a nonempty domain".into()));
        }
        Ok(SignedPl1d { xs, hs })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn hs(&self) -> &[f64] {
        &self.hs
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Constant-sign pieces `(start, end, integral)`, split at every vertex
    /// and every zero crossing, in order.
    pub fn atoms(&self) -> Vec<(f64, f64, f64)> {
        self.atom_iter().collect()
    }

    fn atom_iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (1..self.xs.len()).flat_map(move |i| {
            let (xa, xb, ha, hb) = (self.xs[i - 1], self.xs[i], self.hs[i - 1], self.hs[i]);
            let pieces = if xb == xa {
                [None, None]
            } else if (ha > 0.0 && hb < 0.0) || (ha < 0.0 && hb > 0.0) {
                let xc = xa + (xb - xa) * ha / (ha - hb);
                [Some((xa, xc, ha * (xc - xa) / 2.0)), Some((xc, xb, hb * (xb - xc) / 2.0))]
            } else {
                [Some((xa, xb, (ha + hb) * (xb - xa) / 2.0)), None]
            };
            pieces.into_iter().flatten()
        })
    }
}

/// Threshold `t` maximizing `∫_{x₀}^{t} h` in one left-to-right sweep. The
/// left endpoint with value 0 stands for the empty side.
pub fn terrain_max_halfspace(h: &SignedPl1d) -> (f64, f64) {
    let mut best = (h.domain().0, 0.0);
    let mut acc = 0.0;
    for (_, end, area) in h.atom_iter() {
        acc += area;
        if acc > best.1 {
            best = (end, acc);
        }
    }
    best
}

/// Interval maximizing `∫ h` over it: a maximum-sum run of the constant-sign
/// pieces. A degenerate interval at the left endpoint means `h ≤ 0`.
pub fn terrain_max_slab(h: &SignedPl1d) -> ((f64, f64), f64) {
    let x0 = h.domain().0;
    let mut best = ((x0, x0), 0.0);
    let (mut cur, mut start) = (0.0, x0);
    for (a, end, area) in h.atom_iter() {
        if cur <= 0.0 {
            cur = 0.0;
            start = a;
        }
        cur += area;
        if cur > best.1 {
            best = ((start, end), cur);
        }
    }
    best
}

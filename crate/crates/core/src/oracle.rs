//! Brute-force ground truth for approximation errors and discrepancies.
//!
//! Nothing here calls into the constructions it is meant to judge; the only
//! shared code is the geometry in [`crate::geom`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::Coloring;
use crate::error::{Error, Result};
use crate::family::RangeFamily;
use crate::geom::{terrain_measure, AxisRect, PLTerrain, Point, WeightedPointSet};

/// A maximizing range in the family's projection coordinates (plain
/// coordinates for boxes). `closed == false` means the open box, which is how
/// a continuous sup approached from inside is reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub closed: bool,
}

impl Witness {
    fn contains(&self, c: &[f64]) -> bool {
        c.iter().zip(self.lo.iter().zip(&self.hi)).all(
            |(&v, (&a, &b))| {
                if self.closed {
                    a <= v && v <= b
                } else {
                    a < v && v < b
                }
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub max_error: f64,
    /// `None` when every range has error 0.
    pub witness: Option<Witness>,
    pub ranges_checked: u64,
}

/// Largest `|μ_P(R)/μ_P − μ_D(R)/μ_D|` over closed ranges of the family.
pub fn eps_error_discrete(p: &WeightedPointSet, d: &WeightedPointSet, family: &RangeFamily) -> Result<OracleReport> {
    if p.dim() != family.dim() || d.dim() != family.dim() {
        return Err(Error::Dimension("point sets and family disagree on dimension".into()));
    }
    let (wp, wd) = (p.total_weight(), d.total_weight());
    let mut coords = Vec::with_capacity(p.len() + d.len());
    let mut values = Vec::with_capacity(p.len() + d.len());
    for (q, w) in p.iter() {
        coords.push(family.project(q));
        values.push(if wp > 0.0 { w / wp } else { 0.0 });
    }
    for (q, w) in d.iter() {
        coords.push(family.project(q));
        values.push(if wd > 0.0 { -w / wd } else { 0.0 });
    }
    discrete_sup(&coords, &values)
}

/// Re-evaluate `|μ_P(R)/μ_P − μ_D(R)/μ_D|` on one witness.
pub fn evaluate_discrete(w: &Witness, p: &WeightedPointSet, d: &WeightedPointSet, family: &RangeFamily) -> f64 {
    let frac = |s: &WeightedPointSet| {
        let t = s.total_weight();
        if t == 0.0 {
            return 0.0;
        }
        s.iter().filter(|(q, _)| w.contains(&family.project(q))).map(|(_, x)| x).sum::<f64>() / t
    };
    (frac(p) - frac(d)).abs()
}

/// `max_R |Σ_{x ∈ X ∩ R} χ(x)|`.
pub fn comb_disc(chi: &Coloring, x: &WeightedPointSet, family: &RangeFamily) -> Result<OracleReport> {
    if chi.len() != x.len() {
        return Err(Error::Invalid(format!("{} signs for {} points", chi.len(), x.len())));
    }
    if x.dim() != family.dim() {
        return Err(Error::Dimension("points and family disagree on dimension".into()));
    }
    let coords: Vec<Vec<f64>> = x.points().iter().map(|q| family.project(q)).collect();
    let values: Vec<f64> = chi.signs.iter().map(|&s| s as f64).collect();
    discrete_sup(&coords, &values)
}

fn discrete_sup(coords: &[Vec<f64>], values: &[f64]) -> Result<OracleReport> {
    if values.is_empty() {
        return Ok(OracleReport { max_error: 0.0, witness: None, ranges_checked: 0 });
    }
    let k = coords[0].len();
    let (witness, checked) = match k {
        1 => {
            let (w, c) = sup_1d(coords, values);
            (w, c)
        }
        2 => sup_2d(coords, values),
        3 => {
            if values.len() > MAX_POINTS_3D {
                return Err(Error::Unsupported(format!(
                    "exhaustive search over {} points with 3 directions (limit {MAX_POINTS_3D})",
                    values.len()
                )));
            }
            sup_3d(coords, values)
        }
        _ => return Err(Error::Unsupported(format!("{k} directions"))),
    };
    let max_error = witness
        .as_ref()
        .map_or(0.0, |w| coords.iter().zip(values).filter(|(c, _)| w.contains(c)).map(|(_, v)| v).sum::<f64>().abs());
    Ok(OracleReport { max_error, witness: if max_error > 0.0 { witness } else { None }, ranges_checked: checked })
}

fn distinct(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = vals.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn rank_of(sorted: &[f64], v: f64) -> usize {
    sorted.partition_point(|&s| s < v)
}

/// Kadane over grouped coordinates for both signs; returns the best interval.
fn kadane(sums: &[f64]) -> (f64, usize, usize) {
    let mut best = (0.0, 0, 0);
    for sign in [1.0, -1.0] {
        let (mut run, mut start) = (0.0, 0);
        for (i, &s) in sums.iter().enumerate() {
            if run <= 0.0 {
                run = 0.0;
                start = i;
            }
            run += sign * s;
            if run > best.0 {
                best = (run, start, i);
            }
        }
    }
    best
}

fn sup_1d(coords: &[Vec<f64>], values: &[f64]) -> (Option<Witness>, u64) {
    let xs = distinct(coords.iter().map(|c| c[0]));
    let mut sums = vec![0.0; xs.len()];
    for (c, v) in coords.iter().zip(values) {
        sums[rank_of(&xs, c[0])] += v;
    }
    let (best, a, b) = kadane(&sums);
    let g = xs.len() as u64;
    let w = (best > 0.0).then(|| Witness { lo: vec![xs[a]], hi: vec![xs[b]], closed: true });
    (w, g * (g + 1) / 2)
}

/// Best sub-array data of a segment-tree node, with the positions realizing it.
#[derive(Clone, Copy)]
struct Seg {
    sum: f64,
    pre: (f64, usize),
    suf: (f64, usize),
    best: (f64, usize, usize),
}

impl Seg {
    const EMPTY: Seg =
        Seg { sum: 0.0, pre: (0.0, usize::MAX), suf: (0.0, usize::MAX), best: (0.0, usize::MAX, usize::MAX) };

    fn leaf(v: f64, i: usize) -> Seg {
        if v > 0.0 {
            Seg { sum: v, pre: (v, i), suf: (v, i), best: (v, i, i) }
        } else {
            Seg { sum: v, ..Seg::EMPTY }
        }
    }

    fn join(l: &Seg, r: &Seg) -> Seg {
        let pre = if l.sum + r.pre.0 > l.pre.0 && r.pre.1 != usize::MAX { (l.sum + r.pre.0, r.pre.1) } else { l.pre };
        let suf = if r.sum + l.suf.0 > r.suf.0 && l.suf.1 != usize::MAX { (r.sum + l.suf.0, l.suf.1) } else { r.suf };
        let mut best = if l.best.0 >= r.best.0 { l.best } else { r.best };
        if l.suf.1 != usize::MAX && r.pre.1 != usize::MAX && l.suf.0 + r.pre.0 > best.0 {
            best = (l.suf.0 + r.pre.0, l.suf.1, r.pre.1);
        }
        Seg { sum: l.sum + r.sum, pre, suf, best }
    }
}

struct SegTree {
    size: usize,
    nodes: Vec<Seg>,
    leaves: Vec<f64>,
}

impl SegTree {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two();
        Self { size, nodes: vec![Seg::EMPTY; 2 * size], leaves: vec![0.0; size] }
    }

    fn add(&mut self, i: usize, v: f64) {
        self.leaves[i] += v;
        let mut pos = i + self.size;
        self.nodes[pos] = Seg::leaf(self.leaves[i], i);
        while pos > 1 {
            pos /= 2;
            self.nodes[pos] = Seg::join(&self.nodes[2 * pos], &self.nodes[2 * pos + 1]);
        }
    }

    fn best(&self) -> (f64, usize, usize) {
        self.nodes[1].best
    }
}

fn sup_2d(coords: &[Vec<f64>], values: &[f64]) -> (Option<Witness>, u64) {
    let xs = distinct(coords.iter().map(|c| c[0]));
    let ys = distinct(coords.iter().map(|c| c[1]));
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); xs.len()];
    for (c, &v) in coords.iter().zip(values) {
        cols[rank_of(&xs, c[0])].push((rank_of(&ys, c[1]), v));
    }
    let gx = xs.len();
    // (value, a, b, c, d); ties keep the lexicographically smallest box
    let best = (0..gx)
        .into_par_iter()
        .map(|a| {
            let mut best = (0.0f64, 0, 0, 0, 0);
            for sign in [1.0, -1.0] {
                let mut tree = SegTree::new(ys.len());
                for (b, col) in cols.iter().enumerate().skip(a) {
                    for &(y, v) in col {
                        tree.add(y, sign * v);
                    }
                    let (s, c, d) = tree.best();
                    if s > best.0 || (s == best.0 && s > 0.0 && (a, b, c, d) < (best.1, best.2, best.3, best.4)) {
                        best = (s, a, b, c, d);
                    }
                }
            }
            best
        })
        .reduce(
            || (0.0, 0, 0, 0, 0),
            |p, q| if q.0 > p.0 || (q.0 == p.0 && (q.1, q.2, q.3, q.4) < (p.1, p.2, p.3, p.4)) { q } else { p },
        );
    let (gx, gy) = (gx as u64, ys.len() as u64);
    let checked = gx * (gx + 1) / 2 * (gy * (gy + 1) / 2);
    let w = (best.0 > 0.0).then(|| Witness {
        lo: vec![xs[best.1], ys[best.3]],
        hi: vec![xs[best.2], ys[best.4]],
        closed: true,
    });
    (w, checked)
}

/// Largest input the three-direction search accepts; its cost is `O(n⁴ log n)`.
pub const MAX_POINTS_3D: usize = 128;

/// Every interval of the first coordinate, with the planar sweep over the
/// other two.
fn sup_3d(coords: &[Vec<f64>], values: &[f64]) -> (Option<Witness>, u64) {
    let xs = distinct(coords.iter().map(|c| c[0]));
    let mut layers: Vec<Vec<usize>> = vec![Vec::new(); xs.len()];
    for (i, c) in coords.iter().enumerate() {
        layers[rank_of(&xs, c[0])].push(i);
    }
    type Best = (f64, Option<Witness>, u64);
    let (_, witness, checked) = (0..xs.len())
        .into_par_iter()
        .map(|a| {
            let mut best: Best = (0.0, None, 0);
            let (mut sub, mut vals) = (Vec::new(), Vec::new());
            for b in a..xs.len() {
                for &i in &layers[b] {
                    sub.push(coords[i][1..].to_vec());
                    vals.push(values[i]);
                }
                let (w, c) = sup_2d(&sub, &vals);
                best.2 += c;
                let Some(w) = w else { continue };
                let s = sub.iter().zip(&vals).filter(|(q, _)| w.contains(q)).map(|(_, v)| v).sum::<f64>().abs();
                if s > best.0 {
                    let lo = [vec![xs[a]], w.lo].concat();
                    let hi = [vec![xs[b]], w.hi].concat();
                    best = (s, Some(Witness { lo, hi, closed: true }), best.2);
                }
            }
            best
        })
        .reduce(
            || (0.0, None, 0),
            |p, q| {
                let checked = p.2 + q.2;
                if q.0 > p.0 {
                    (q.0, q.1, checked)
                } else {
                    (p.0, p.1, checked)
                }
            },
        );
    (witness, checked)
}

/// Every interval in all but the last coordinate, Kadane over the last.
#[cfg(test)]
fn sup_brute(coords: &[Vec<f64>], values: &[f64]) -> (Option<Witness>, u64) {
    let k = coords[0].len();
    let axes: Vec<Vec<f64>> = (0..k).map(|j| distinct(coords.iter().map(|c| c[j]))).collect();
    let last = &axes[k - 1];
    let mut best: (f64, Option<Witness>) = (0.0, None);
    let mut checked = 0u64;
    let mut lo = vec![0usize; k - 1];
    let mut hi = vec![0usize; k - 1];
    loop {
        let mut sums = vec![0.0; last.len()];
        for (c, v) in coords.iter().zip(values) {
            if (0..k - 1).all(|j| axes[j][lo[j]] <= c[j] && c[j] <= axes[j][hi[j]]) {
                sums[rank_of(last, c[k - 1])] += v;
            }
        }
        let (s, a, b) = kadane(&sums);
        checked += (last.len() * (last.len() + 1) / 2) as u64;
        if s > best.0 {
            let mut wl: Vec<f64> = (0..k - 1).map(|j| axes[j][lo[j]]).collect();
            let mut wh: Vec<f64> = (0..k - 1).map(|j| axes[j][hi[j]]).collect();
            wl.push(last[a]);
            wh.push(last[b]);
            best = (s, Some(Witness { lo: wl, hi: wh, closed: true }));
        }
        // next (lo, hi) pair with lo <= hi on every axis
        let mut j = 0;
        loop {
            if j == k - 1 {
                return (best.1, checked);
            }
            if hi[j] + 1 < axes[j].len() {
                hi[j] += 1;
                break;
            }
            if lo[j] + 1 < axes[j].len() {
                lo[j] += 1;
                hi[j] = lo[j];
                break;
            }
            lo[j] = 0;
            hi[j] = 0;
            j += 1;
        }
    }
}

/// Range shapes for [`lebesgue_disc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LebesgueFamily {
    /// Anchored boxes `[0, x] × [0, y]`.
    Corner,
    /// All boxes inside the unit square.
    Rect,
}

/// `sup_R |n·area(R) − |R ∩ P||` over the unit square, with `n = |P|`.
pub fn lebesgue_disc(p: &WeightedPointSet, family: LebesgueFamily) -> Result<OracleReport> {
    if p.dim() != 2 {
        return Err(Error::Dimension("Lebesgue discrepancy is planar here".into()));
    }
    if p.points().iter().any(|q| !(0.0..=1.0).contains(&q.x()) || !(0.0..=1.0).contains(&q.y())) {
        return Err(Error::Invalid("points must lie in the unit square".into()));
    }
    let n = p.len() as f64;
    let unit = WeightedPointSet::unit(2, p.points().to_vec())?;
    let base = AxisRect::unit_square();
    let area = |x: f64, y: f64| x * y;
    let mut r = match family {
        LebesgueFamily::Corner => corner_error(&unit, &base, area)?,
        LebesgueFamily::Rect => eps_error_measure(&unit, &base, area, 0)?,
    };
    r.max_error *= n;
    Ok(r)
}

/// Largest `|μ_P(C)/μ_P − μ(C)/μ(base)|` over anchored corners
/// `C = [x₀, x] × [y₀, y]` of `base`, for the measure with corner function
/// `corner(x, y) = μ([x₀, x] × [y₀, y])`.
pub fn corner_error(p: &WeightedPointSet, base: &AxisRect, corner: impl Fn(f64, f64) -> f64) -> Result<OracleReport> {
    let (x0, y0, x1, y1) = check_base(p, base)?;
    let wp = p.total_weight();
    let total = corner(x1, y1);
    let xs = distinct(p.points().iter().map(|q| q.x()).chain([x1]));
    let ys = distinct(p.points().iter().map(|q| q.y()).chain([y1]));
    let mut best = (0.0f64, 0.0, 0.0, true);
    // weight of points per (x-rank) column, swept left to right
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); xs.len()];
    for (q, w) in p.iter() {
        cols[rank_of(&xs, q.x())].push((rank_of(&ys, q.y()), w / wp));
    }
    let mut closed = vec![0.0; ys.len()];
    let mut open = vec![0.0; ys.len()];
    for (i, &x) in xs.iter().enumerate() {
        if i > 0 {
            for &(j, w) in &cols[i - 1] {
                open[j] += w;
            }
        }
        for &(j, w) in &cols[i] {
            closed[j] += w;
        }
        let (mut sc, mut so) = (0.0, 0.0);
        for (j, &y) in ys.iter().enumerate() {
            let mu = if total > 0.0 { corner(x, y) / total } else { 0.0 };
            // [x0, x] × [y0, y] closed, and [x0, x) × [y0, y) open on the far sides
            let below_open = so;
            sc += closed[j];
            so += open[j];
            let excess = sc - mu;
            let deficit = mu - below_open;
            if excess > best.0 {
                best = (excess, x, y, true);
            }
            if deficit > best.0 {
                best = (deficit, x, y, false);
            }
        }
    }
    let witness = (best.0 > 0.0).then(|| Witness { lo: vec![x0, y0], hi: vec![best.1, best.2], closed: best.3 });
    // re-evaluate the witness directly
    let max_error = witness.as_ref().map_or(0.0, |w| {
        let inside: f64 =
            p.iter()
                .filter(|(q, _)| {
                    if w.closed {
                        q.x() <= w.hi[0] && q.y() <= w.hi[1]
                    } else {
                        q.x() < w.hi[0] && q.y() < w.hi[1]
                    }
                })
                .map(|(_, x)| x / wp)
                .sum();
        let mu = if total > 0.0 { corner(w.hi[0], w.hi[1]) / total } else { 0.0 };
        (inside - mu).abs()
    });
    let _ = y0;
    Ok(OracleReport { max_error, witness, ranges_checked: (xs.len() * ys.len() * 2) as u64 })
}

fn check_base(p: &WeightedPointSet, base: &AxisRect) -> Result<(f64, f64, f64, f64)> {
    if p.dim() != 2 || base.dim() != 2 {
        return Err(Error::Dimension("planar points and base expected".into()));
    }
    let (x0, y0, x1, y1) = (base.lo()[0], base.lo()[1], base.hi()[0], base.hi()[1]);
    if p.points().iter().any(|q| q.x() < x0 || q.x() > x1 || q.y() < y0 || q.y() > y1) {
        return Err(Error::Invalid("points outside the base".into()));
    }
    Ok((x0, y0, x1, y1))
}

/// Largest `|μ_P(R)/μ_P − μ(R)/μ(base)|` over boxes `R ⊆ base` whose sides lie
/// on point coordinates or on a uniform `resolution` grid, both closed and
/// open. `corner(x, y) = μ([x₀, x] × [y₀, y])`.
///
/// For a continuous measure this is a lower bound on the sup that converges
/// as the resolution grows.
pub fn eps_error_measure(
    p: &WeightedPointSet,
    base: &AxisRect,
    corner: impl Fn(f64, f64) -> f64 + Sync,
    resolution: usize,
) -> Result<OracleReport> {
    eps_error_measure_with(p, base, corner, resolution, &[], &[])
}

/// Like [`eps_error_measure`] but only over boxes whose sides lie on the
/// uniform `resolution` grid, closed and open. The cost is `O(r⁴ + |P|)`, so
/// it stays usable for large samples.
pub fn eps_error_measure_grid(
    p: &WeightedPointSet,
    base: &AxisRect,
    corner: impl Fn(f64, f64) -> f64 + Sync,
    resolution: usize,
) -> Result<OracleReport> {
    let (x0, y0, x1, y1) = check_base(p, base)?;
    let r = resolution.max(1);
    let line = |lo: f64, hi: f64, k: usize| if k == r { hi } else { lo + (hi - lo) * k as f64 / r as f64 };
    let xs: Vec<f64> = (0..=r).map(|k| line(x0, x1, k)).collect();
    let ys: Vec<f64> = (0..=r).map(|k| line(y0, y1, k)).collect();
    // even class 2k: on line k; odd class 2k+1: strictly between lines k and k+1
    let class = |lines: &[f64], v: f64| {
        let k = lines.partition_point(|&l| l <= v);
        if k > 0 && lines[k - 1] == v {
            2 * (k - 1)
        } else {
            2 * k - 1
        }
    };
    let g = 2 * r + 1;
    let wp = p.total_weight();
    // prefix[i][j] = weight share in classes < i by < j
    let mut prefix = vec![vec![0.0; g + 1]; g + 1];
    for (q, w) in p.iter() {
        prefix[class(&xs, q.x()) + 1][class(&ys, q.y()) + 1] += w / wp;
    }
    for i in 1..=g {
        for j in 1..=g {
            prefix[i][j] += prefix[i - 1][j] + prefix[i][j - 1] - prefix[i - 1][j - 1];
        }
    }
    let total = corner(x1, y1);
    let norm = if total > 0.0 { 1.0 / total } else { 0.0 };
    let table: Vec<Vec<f64>> = xs.par_iter().map(|&x| ys.iter().map(|&y| corner(x, y) * norm).collect()).collect();
    let mass = |i0: usize, i1: usize, j0: usize, j1: usize| {
        prefix[i1 + 1][j1 + 1] - prefix[i0][j1 + 1] - prefix[i1 + 1][j0] + prefix[i0][j0]
    };
    type Best = (f64, usize, usize, usize, usize, bool);
    let better = |p: Best, q: Best| if q.0 > p.0 { q } else { p };
    let best = (0..=r)
        .into_par_iter()
        .map(|a| {
            let mut best: Best = (0.0, 0, 0, 0, 0, true);
            for b in a..=r {
                for c in 0..=r {
                    for d in c..=r {
                        let mu = (table[b][d] - table[a][d] - table[b][c] + table[a][c]).max(0.0);
                        let e = (mass(2 * a, 2 * b, 2 * c, 2 * d) - mu).abs();
                        if e > best.0 {
                            best = (e, a, b, c, d, true);
                        }
                        if b > a && d > c {
                            let e = (mass(2 * a + 1, 2 * b - 1, 2 * c + 1, 2 * d - 1) - mu).abs();
                            if e > best.0 {
                                best = (e, a, b, c, d, false);
                            }
                        }
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, 0, 0, 0, 0, true), better);
    let witness = (best.0 > 0.0).then(|| Witness {
        lo: vec![xs[best.1], ys[best.3]],
        hi: vec![xs[best.2], ys[best.4]],
        closed: best.5,
    });
    let n = (r + 1) as u64;
    Ok(OracleReport { max_error: best.0, witness, ranges_checked: n * (n + 1) * n * (n + 1) / 2 })
}

fn eps_error_measure_with(
    p: &WeightedPointSet,
    base: &AxisRect,
    corner: impl Fn(f64, f64) -> f64 + Sync,
    resolution: usize,
    extra_x: &[f64],
    extra_y: &[f64],
) -> Result<OracleReport> {
    let (x0, y0, x1, y1) = check_base(p, base)?;
    let grid = |lo: f64, hi: f64, extra: &[f64], coord: &dyn Fn(&Point) -> f64| {
        let uniform = (0..=resolution.max(1)).map(move |k| lo + (hi - lo) * k as f64 / resolution.max(1) as f64);
        distinct(
            p.points().iter().map(coord).chain(uniform).chain(extra.iter().map(|&v| v.clamp(lo, hi))).chain([lo, hi]),
        )
    };
    let xs = grid(x0, x1, extra_x, &|q: &Point| q.x());
    let ys = grid(y0, y1, extra_y, &|q: &Point| q.y());
    let total = corner(x1, y1);
    let norm = if total > 0.0 { 1.0 / total } else { 0.0 };
    let table: Vec<Vec<f64>> = xs.par_iter().map(|&x| ys.iter().map(|&y| corner(x, y) * norm).collect()).collect();
    let wp = p.total_weight();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); xs.len()];
    for (q, w) in p.iter() {
        cols[rank_of(&xs, q.x())].push((rank_of(&ys, q.y()), w / wp));
    }
    let gy = ys.len();
    // (value, a, b, c, d, closed)
    type Best = (f64, usize, usize, usize, usize, bool);
    let better = |p: Best, q: Best| -> Best {
        if q.0 > p.0 || (q.0 == p.0 && (q.1, q.2, q.3, q.4) < (p.1, p.2, p.3, p.4)) {
            q
        } else {
            p
        }
    };
    let best = (0..xs.len())
        .into_par_iter()
        .map(|a| {
            let mut best: Best = (0.0, 0, 0, 0, 0, true);
            let mut closed = vec![0.0; gy];
            let mut open = vec![0.0; gy];
            for b in a..xs.len() {
                for &(j, w) in &cols[b] {
                    closed[j] += w;
                }
                if b > a + 1 {
                    for &(j, w) in &cols[b - 1] {
                        open[j] += w;
                    }
                }
                let strip = |j: usize| table[b][j] - table[a][j];
                // closed: max over c <= d of (S(d) − M(d)) − (S(c−1) − M(c))
                let (mut s, mut min_v, mut arg_v) = (0.0, f64::INFINITY, 0);
                // open: max over c < d of (M(d) − So(d−1)) − (M(c) − So(c))
                let (mut so, mut min_w, mut arg_w) = (0.0, f64::INFINITY, 0);
                for d in 0..gy {
                    let m = strip(d);
                    let v = s - m;
                    if v < min_v {
                        min_v = v;
                        arg_v = d;
                    }
                    s += closed[d];
                    let u = s - m;
                    if u - min_v > best.0 {
                        best = better(best, (u - min_v, a, b, arg_v, d, true));
                    }
                    if b > a && d > 0 && min_w.is_finite() {
                        let g = m - so - min_w;
                        if g > best.0 {
                            best = better(best, (g, a, b, arg_w, d, false));
                        }
                    }
                    so += open[d];
                    let wv = m - so;
                    if wv < min_w {
                        min_w = wv;
                        arg_w = d;
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, 0, 0, 0, 0, true), better);
    let witness = (best.0 > 0.0).then(|| Witness {
        lo: vec![xs[best.1], ys[best.3]],
        hi: vec![xs[best.2], ys[best.4]],
        closed: best.5,
    });
    let max_error = witness.as_ref().map_or(0.0, |w| {
        let inside: f64 = p.iter().filter(|(q, _)| w.contains(q.coords())).map(|(_, x)| x / wp).sum();
        let mu =
            (table[best.2][best.4] - table[best.1][best.4] - table[best.2][best.3] + table[best.1][best.3]).max(0.0);
        (inside - mu).abs()
    });
    let (gx, gy) = (xs.len() as u64, gy as u64);
    Ok(OracleReport { max_error, witness, ranges_checked: gx * (gx + 1) * gy * (gy + 1) / 2 })
}

/// Error of `p` against a terrain over boxes of the base, on the grid of
/// point coordinates, triangle vertices and a uniform refinement.
pub fn eps_error_terrain(p: &WeightedPointSet, t: &PLTerrain, resolution: usize) -> Result<OracleReport> {
    let base = *t.base_box();
    if p.is_empty() {
        let total = t.total_measure();
        let max_error = if total > 0.0 { 1.0 } else { 0.0 };
        let witness =
            (max_error > 0.0).then(|| Witness { lo: base.lo().to_vec(), hi: base.hi().to_vec(), closed: true });
        return Ok(OracleReport { max_error, witness, ranges_checked: 1 });
    }
    let vx: Vec<f64> = t.triangles().iter().flat_map(|tr| tr.poly.vertices().iter().map(|v| v[0])).collect();
    let vy: Vec<f64> = t.triangles().iter().flat_map(|tr| tr.poly.vertices().iter().map(|v| v[1])).collect();
    let (x0, y0) = (base.lo()[0], base.lo()[1]);
    let corner = |x: f64, y: f64| {
        if x <= x0 || y <= y0 {
            0.0
        } else {
            terrain_measure(t, &AxisRect::xy(x0, x, y0, y))
        }
    };
    eps_error_measure_with(p, &base, corner, resolution, &vx, &vy)
}

/// Monte Carlo estimate of `μ(R ∩ D)` with its standard error.
pub fn mc_check(t: &PLTerrain, r: &AxisRect, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 10_000 {
        return Err(Error::Invalid(format!("{samples} samples; need at least 10000")));
    }
    let Some(box_) = t.base_box().intersect(r) else {
        return Ok((0.0, 0.0));
    };
    let area = box_.volume();
    if area == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let x = rng.gen_range(box_.lo()[0]..=box_.hi()[0]);
        let y = rng.gen_range(box_.lo()[1]..=box_.hi()[1]);
        let h = t.height_at(x, y);
        s += h;
        s2 += h * h;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    Ok((area * mean, area * (var / n).sqrt()))
}

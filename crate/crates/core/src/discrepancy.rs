//! Canonical subsets, the Beck-Fiala coloring, and the halving step.
//!
//! A canonical subset is the intersection, over all k directions, of one
//! dyadic block of the rank order along that direction. Each point lies in
//! at most `(log₂ n)^k + 1` of them (the `+1` is the full set), and every
//! range of the family splits into at most `(2 log₂ n)^k` canonical subsets.
//!
//! The coloring is iterated rounding: every point starts at 0, rows with more
//! than `t` floating points stay tight, and the fractional vector moves along
//! a null-space direction until some coordinate reaches ±1. Inside that null
//! space we also keep a pairing of nearby points balanced whenever there is
//! room, which leaves the row guarantee intact and makes small ranges far
//! better balanced in practice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::RangeFamily;
use crate::geom::{DirectionSet, WeightedPointSet};

/// Values within this distance of ±1 are frozen.
const FREEZE_EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-12;
/// Rows below the Beck-Fiala retirement size kept balanced alongside the active ones.
const SOFT_ROWS: usize = 128;

/// Canonical subsets of a point set as index rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalIncidence {
    n: usize,
    rows: Vec<Vec<u32>>,
    /// Sum of the dyadic levels that produced each row (0 for the full row).
    levels: Vec<u32>,
    /// Spread `max q − min q` of those levels: 0 for the most cube-like boxes.
    skews: Vec<u32>,
    t: usize,
}

impl CanonicalIncidence {
    /// Build from explicit rows. Rows must be nonempty and reference indices
    /// below `n`; the full set is appended if no row covers it.
    pub fn from_rows(n: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::Size(format!("{n} points is not a power of two")));
        }
        let mut rows = rows;
        for r in &mut rows {
            if r.is_empty() {
                return Err(Error::Invalid("empty canonical row".into()));
            }
            r.sort_unstable();
            r.dedup();
            if r.last().is_some_and(|&i| i as usize >= n) {
                return Err(Error::Invalid("row index out of range".into()));
            }
        }
        if !rows.iter().any(|r| r.len() == n) {
            rows.push((0..n as u32).collect());
        }
        let levels = rows.iter().map(|r| if r.len() == n { 0 } else { 1 }).collect();
        let skews = vec![0; rows.len()];
        Ok(Self::finish(n, rows, levels, skews))
    }

    fn finish(n: usize, rows: Vec<Vec<u32>>, levels: Vec<u32>, skews: Vec<u32>) -> Self {
        let mut inc = vec![0usize; n];
        for r in &rows {
            for &i in r {
                inc[i as usize] += 1;
            }
        }
        let t = inc.into_iter().max().unwrap_or(0);
        Self { n, rows, levels, skews, t }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    /// Largest number of rows containing any single point.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Largest |Σχ| over the rows.
    pub fn max_row_imbalance(&self, chi: &Coloring) -> i64 {
        self.rows.iter().map(|r| r.iter().map(|&i| chi.signs[i as usize] as i64).sum::<i64>().abs()).max().unwrap_or(0)
    }

    /// The Beck-Fiala guarantee `2t − 1`.
    pub fn row_bound(&self) -> i64 {
        2 * self.t as i64 - 1
    }

    fn point_rows(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.n];
        for (r, row) in self.rows.iter().enumerate() {
            for &i in row {
                out[i as usize].push(r as u32);
            }
        }
        out
    }
}

/// A ±1 assignment to point indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub signs: Vec<i8>,
}

impl Coloring {
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn sum(&self) -> i64 {
        self.signs.iter().map(|&s| s as i64).sum()
    }

    pub fn positives(&self) -> usize {
        self.signs.iter().filter(|&&s| s > 0).count()
    }

    pub fn negated(&self) -> Coloring {
        Coloring { signs: self.signs.iter().map(|s| -s).collect() }
    }
}

/// Dyadic canonical subsets of `x` along every direction of `dirs`.
pub fn canonical_structure(x: &WeightedPointSet, dirs: &DirectionSet) -> Result<CanonicalIncidence> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Size(format!("{n} points is not a power of two")));
    }
    if dirs.is_empty() {
        return Err(Error::Invalid("no directions".into()));
    }
    if dirs.dim() != x.dim() {
        return Err(Error::Dimension(format!("{}D directions for {}D points", dirs.dim(), x.dim())));
    }
    let k = dirs.len();
    let levels = n.trailing_zeros();
    if levels as usize * k > 63 {
        return Err(Error::Unsupported(format!("{k} directions at {n} points")));
    }
    let ranks: Vec<Vec<u32>> = dirs
        .iter()
        .map(|d| {
            let proj: Vec<f64> = x.points().iter().map(|p| p.dot(d)).collect();
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| proj[a as usize].total_cmp(&proj[b as usize]).then(a.cmp(&b)));
            let mut rank = vec![0u32; n];
            for (r, &i) in order.iter().enumerate() {
                rank[i as usize] = r as u32;
            }
            rank
        })
        .collect();

    let mut rows = Vec::new();
    let mut row_levels = Vec::new();
    let mut row_skews = Vec::new();
    if levels > 0 {
        let mut q = vec![1u32; k];
        let mut keys = vec![0u64; n];
        let mut order: Vec<u32> = Vec::with_capacity(n);
        loop {
            for (i, key) in keys.iter_mut().enumerate() {
                *key = 0;
                for j in 0..k {
                    *key = (*key << q[j]) | (ranks[j][i] >> (levels - q[j])) as u64;
                }
            }
            order.clear();
            order.extend(0..n as u32);
            order.sort_by_key(|&i| (keys[i as usize], i));
            let mut start = 0;
            while start < n {
                let key = keys[order[start] as usize];
                let mut end = start + 1;
                while end < n && keys[order[end] as usize] == key {
                    end += 1;
                }
                rows.push(order[start..end].to_vec());
                row_levels.push(q.iter().sum());
                row_skews.push(q.iter().max().unwrap_or(&0) - q.iter().min().unwrap_or(&0));
                start = end;
            }
            // odometer over [1, levels]^k
            let mut j = 0;
            while j < k && q[j] == levels {
                q[j] = 1;
                j += 1;
            }
            if j == k {
                break;
            }
            q[j] += 1;
        }
    }
    rows.push((0..n as u32).collect());
    row_levels.push(0);
    row_skews.push(0);
    Ok(CanonicalIncidence::finish(n, rows, row_levels, row_skews))
}

/// A group of points moving together: a balanced pair or a lone point.
#[derive(Debug, Clone, Copy)]
enum Unit {
    Pair(u32, u32),
    Single(u32),
}

/// Pairs points that share the smallest canonical subsets, most cube-like first.
fn canonical_pairing(inc: &CanonicalIncidence) -> Vec<Unit> {
    let mut order: Vec<usize> = (0..inc.rows.len()).collect();
    order.sort_by_key(|&r| (inc.rows[r].len(), std::cmp::Reverse(inc.levels[r]), inc.skews[r], r));
    let mut paired = vec![false; inc.n];
    let mut units = Vec::with_capacity(inc.n / 2 + 1);
    for r in order {
        let row = &inc.rows[r];
        if row.len() < 2 {
            continue;
        }
        let mut pending: Option<u32> = None;
        for &i in row {
            if paired[i as usize] {
                continue;
            }
            match pending.take() {
                Some(j) => {
                    paired[i as usize] = true;
                    paired[j as usize] = true;
                    units.push(Unit::Pair(j, i));
                }
                None => pending = Some(i),
            }
        }
    }
    units.extend((0..inc.n as u32).filter(|&i| !paired[i as usize]).map(Unit::Single));
    units
}

/// Null vector of a `rows × cols` matrix (cols > rows) by Gaussian elimination
/// with partial pivoting, ties to the lowest row index.
fn null_vector(mut a: Vec<Vec<f64>>, cols: usize) -> Vec<f64> {
    let rows = a.len();
    let mut pivot_cols = Vec::with_capacity(rows);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let mut best = r;
        for i in r + 1..rows {
            if a[i][c].abs() > a[best][c].abs() {
                best = i;
            }
        }
        if a[best][c].abs() <= PIVOT_EPS {
            continue;
        }
        a.swap(r, best);
        let inv = 1.0 / a[r][c];
        for v in a[r][c..].iter_mut() {
            *v *= inv;
        }
        let prow = a[r].clone();
        for row in a.iter_mut().enumerate().filter(|(i, _)| *i != r).map(|(_, row)| row) {
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row[c..].iter_mut().zip(&prow[c..]) {
                    *v -= f * p;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    let free = (0..cols).find(|c| !pivot_cols.contains(c)).expect("more columns than rows");
    let mut y = vec![0.0; cols];
    y[free] = 1.0;
    for (i, &pc) in pivot_cols.iter().enumerate() {
        y[pc] = -a[i][free];
    }
    y
}

/// Round the remaining units one at a time, each to the side that leaves the
/// smallest total `Σ|row sum|` over the rows it touches.
fn orient(inc: &CanonicalIncidence, point_rows: &[Vec<u32>], units: &[Unit], value: &mut [f64]) {
    let mut sums: Vec<f64> = inc.rows.iter().map(|r| r.iter().map(|&i| value[i as usize]).sum()).collect();
    for u in units {
        let (i, j) = match *u {
            Unit::Pair(i, j) => (i as usize, Some(j as usize)),
            Unit::Single(i) => (i as usize, None),
        };
        let v = value[i];
        // row deltas per unit of (s − v): +1 for rows with i only, −1 for rows with j only
        let mut touched: Vec<(u32, f64)> = point_rows[i].iter().map(|&r| (r, 1.0)).collect();
        if let Some(j) = j {
            touched.extend(point_rows[j].iter().map(|&r| (r, -1.0)));
            touched.sort_unstable_by_key(|&(r, _)| r);
            touched.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        let cost = |s: f64| -> f64 { touched.iter().map(|&(r, c)| (sums[r as usize] + c * (s - v)).abs()).sum() };
        let s = if cost(1.0) <= cost(-1.0) { 1.0 } else { -1.0 };
        for &(r, c) in &touched {
            sums[r as usize] += c * (s - v);
        }
        value[i] = s;
        if let Some(j) = j {
            value[j] = -s;
        }
    }
}

/// Beck-Fiala coloring: every row ends with `|Σχ| ≤ 2t − 1`, then the
/// coloring is rebalanced to exactly `n/2` positive signs.
pub fn beck_fiala(inc: &CanonicalIncidence) -> Coloring {
    let chi = iterated_rounding(inc);
    assert!(inc.max_row_imbalance(&chi) <= inc.row_bound(), "Beck-Fiala row bound violated");
    rebalance(inc, chi)
}

fn iterated_rounding(inc: &CanonicalIncidence) -> Coloring {
    let n = inc.n;
    let t = inc.t;
    let point_rows = inc.point_rows();
    let mut value = vec![0.0f64; n];
    let mut floating = vec![true; n];
    let mut float_count: Vec<usize> = inc.rows.iter().map(|r| r.len()).collect();
    let mut active: Vec<u32> = (0..inc.rows.len() as u32).filter(|&r| float_count[r as usize] > t).collect();
    let mut units = canonical_pairing(inc);
    let mut in_row = vec![false; n];

    loop {
        active.retain(|&r| float_count[r as usize] > t);
        if units.is_empty() {
            break;
        }
        if active.is_empty() {
            // every remaining row is retired, so any rounding keeps the bound
            orient(inc, &point_rows, &units, &mut value);
            break;
        }
        // keep a nontrivial null space: break pairs from the back if needed
        while units.len() <= active.len() {
            let pos = units.iter().rposition(|u| matches!(u, Unit::Pair(..))).expect("fewer rows than floating points");
            let Unit::Pair(i, j) = units[pos] else { unreachable!() };
            units[pos] = Unit::Single(i);
            units.push(Unit::Single(j));
        }
        // rows below the retirement size are held too while there is room
        let room = (units.len() - 1 - active.len()).min(SOFT_ROWS);
        let mut held = active.clone();
        if room > 0 {
            let mut soft: Vec<u32> =
                (0..inc.rows.len() as u32).filter(|&r| (2..=t).contains(&float_count[r as usize])).collect();
            if soft.len() > room {
                soft.select_nth_unstable_by_key(room, |&r| (std::cmp::Reverse(float_count[r as usize]), r));
                soft.truncate(room);
            }
            held.extend(soft);
        }
        let cols = held.len() + 1;
        let mut a = vec![vec![0.0; cols]; held.len()];
        for (ri, &r) in held.iter().enumerate() {
            for &i in &inc.rows[r as usize] {
                in_row[i as usize] = true;
            }
            for (c, u) in units[..cols].iter().enumerate() {
                a[ri][c] = match *u {
                    Unit::Pair(i, j) => in_row[i as usize] as i32 as f64 - in_row[j as usize] as i32 as f64,
                    Unit::Single(i) => in_row[i as usize] as i32 as f64,
                };
            }
            for &i in &inc.rows[r as usize] {
                in_row[i as usize] = false;
            }
        }
        let y = null_vector(a, cols);
        // largest step keeping every moving unit inside [-1, 1]
        let mut step = f64::INFINITY;
        for (u, &dy) in units[..cols].iter().zip(&y) {
            if dy.abs() <= PIVOT_EPS {
                continue;
            }
            let v = match *u {
                Unit::Pair(i, _) | Unit::Single(i) => value[i as usize],
            };
            let room = if dy > 0.0 { (1.0 - v) / dy } else { (-1.0 - v) / dy };
            step = step.min(room);
        }
        debug_assert!(step.is_finite());
        let mut frozen = Vec::new();
        for (c, (u, &dy)) in units[..cols].iter().zip(&y).enumerate() {
            if dy.abs() <= PIVOT_EPS {
                continue;
            }
            let (i, j) = match *u {
                Unit::Pair(i, j) => (i as usize, Some(j as usize)),
                Unit::Single(i) => (i as usize, None),
            };
            let mut v = (value[i] + step * dy).clamp(-1.0, 1.0);
            if 1.0 - v.abs() <= FREEZE_EPS {
                v = v.signum();
                frozen.push(c);
            }
            value[i] = v;
            if let Some(j) = j {
                value[j] = -v;
            }
        }
        if frozen.is_empty() {
            // numerical stall: freeze the unit closest to the boundary
            let c = (0..cols)
                .max_by(|&a, &b| {
                    let va = match units[a] {
                        Unit::Pair(i, _) | Unit::Single(i) => value[i as usize].abs(),
                    };
                    let vb = match units[b] {
                        Unit::Pair(i, _) | Unit::Single(i) => value[i as usize].abs(),
                    };
                    va.total_cmp(&vb).then(b.cmp(&a))
                })
                .expect("nonempty");
            let (i, j) = match units[c] {
                Unit::Pair(i, j) => (i as usize, Some(j as usize)),
                Unit::Single(i) => (i as usize, None),
            };
            let v = if value[i] >= 0.0 { 1.0 } else { -1.0 };
            value[i] = v;
            if let Some(j) = j {
                value[j] = -v;
            }
            frozen.push(c);
        }
        for &c in frozen.iter().rev() {
            let u = units.remove(c);
            let pts: &[u32] = match &u {
                Unit::Pair(i, j) => &[*i, *j],
                Unit::Single(i) => std::slice::from_ref(i),
            };
            for &p in pts {
                floating[p as usize] = false;
                for &r in &point_rows[p as usize] {
                    float_count[r as usize] -= 1;
                }
            }
        }
    }
    debug_assert!(floating.iter().zip(&value).all(|(_, v)| v.abs() == 1.0));
    Coloring { signs: value.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect() }
}

/// Flip majority-sign points until exactly half are positive, each time
/// choosing the flip whose worst affected row ends smallest.
fn rebalance(inc: &CanonicalIncidence, mut chi: Coloring) -> Coloring {
    let n = inc.n;
    if n < 2 {
        return chi;
    }
    let point_rows = inc.point_rows();
    let mut sums: Vec<i64> = inc.rows.iter().map(|r| r.iter().map(|&i| chi.signs[i as usize] as i64).sum()).collect();
    let mut excess = chi.sum();
    while excess != 0 {
        let from: i8 = if excess > 0 { 1 } else { -1 };
        let best = (0..n)
            .filter(|&i| chi.signs[i] == from)
            .min_by_key(|&i| {
                let worst =
                    point_rows[i].iter().map(|&r| (sums[r as usize] - 2 * from as i64).abs()).max().unwrap_or(0);
                (worst, i)
            })
            .expect("majority sign present");
        chi.signs[best] = -from;
        for &r in &point_rows[best] {
            sums[r as usize] -= 2 * from as i64;
        }
        excess -= 2 * from as i64;
    }
    chi
}

/// Result of one halving step.
#[derive(Debug, Clone)]
pub struct HalveOutcome {
    /// Points colored +1, reweighted to the input total.
    pub kept: WeightedPointSet,
    /// Points colored −1, reweighted to the input total.
    pub discarded: WeightedPointSet,
    /// Indices (into the input) of `kept` and `discarded`.
    pub kept_idx: Vec<usize>,
    pub discarded_idx: Vec<usize>,
    pub chi: Coloring,
    pub t: usize,
    /// `(2t − 1)(2⌈log₂ n⌉)^k / n`, the worst-case relative error for unit weights.
    pub bound_error: f64,
    /// Exact largest relative error of `kept` over the family, when computable.
    pub measured_error: Option<f64>,
    uniform: bool,
}

impl HalveOutcome {
    /// The certified error of the step: the measured value when available,
    /// the unit-weight bound for uniformly weighted input, otherwise ∞.
    pub fn certified_error(&self) -> f64 {
        match self.measured_error {
            Some(m) => m.min(self.bound_error),
            None if self.uniform => self.bound_error,
            None => f64::INFINITY,
        }
    }
}

/// Unit-weight error bound of one halving of `n` points whose canonical
/// subsets have degree `t` over `k` directions.
pub fn halving_bound(n: usize, t: usize, k: usize) -> f64 {
    let log_n = (n as f64).log2().ceil();
    (2.0 * t as f64 - 1.0) * (2.0 * log_n).powi(k as i32) / n as f64
}

/// Halve `x` with the Beck-Fiala coloring of its canonical subsets.
pub fn halve(x: &WeightedPointSet, family: &RangeFamily, min_block: usize) -> Result<HalveOutcome> {
    halve_with(x, family, min_block, true)
}

/// As [`halve`]; with `measure == false` the exact error sweep is skipped and
/// `measured_error` is `None`.
pub fn halve_with(x: &WeightedPointSet, family: &RangeFamily, min_block: usize, measure: bool) -> Result<HalveOutcome> {
    let n = x.len();
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::Size(format!("cannot halve {n} points")));
    }
    if n < min_block {
        return Err(Error::Size(format!("{n} points is below the minimum block {min_block}")));
    }
    if family.dim() != x.dim() {
        return Err(Error::Dimension(format!("{}D family for {}D points", family.dim(), x.dim())));
    }
    let dirs = family.directions();
    let inc = canonical_structure(x, &dirs)?;
    let chi = beck_fiala(&inc);
    let kept_idx: Vec<usize> = (0..n).filter(|&i| chi.signs[i] > 0).collect();
    let discarded_idx: Vec<usize> = (0..n).filter(|&i| chi.signs[i] < 0).collect();
    let total = x.total_weight();
    let reweight = |idx: &[usize]| -> Result<WeightedPointSet> {
        let part = x.select(idx);
        let w = part.total_weight();
        part.scaled(total / w)
    };
    let kept = reweight(&kept_idx)?;
    let discarded = reweight(&discarded_idx)?;
    let bound_error = halving_bound(n, inc.t(), dirs.len());
    let mut delta = vec![0.0; n];
    for (slot, &i) in kept_idx.iter().enumerate() {
        delta[i] = kept.weights()[slot];
    }
    for (d, w) in delta.iter_mut().zip(x.weights()) {
        *d -= w;
    }
    let measured_error = if measure {
        let coords: Vec<Vec<f64>> = x.points().iter().map(|p| family.project(p)).collect();
        max_abs_range_sum(&coords, &delta).map(|m| m / total)
    } else {
        None
    };
    let w0 = x.weights()[0];
    let uniform = x.weights().iter().all(|w| (w - w0).abs() <= 1e-12 * w0);
    Ok(HalveOutcome { kept, discarded, kept_idx, discarded_idx, chi, t: inc.t(), bound_error, measured_error, uniform })
}

/// Largest `|Σ_{i ∈ B} v_i|` over closed boxes `B` in the given coordinates.
///
/// Supports 1 and 2 coordinates (`None` otherwise). Runs in O(n² log n) for
/// two coordinates by sweeping the left edge and maintaining best sub-sums
/// over the y order in a segment tree.
pub fn max_abs_range_sum(coords: &[Vec<f64>], values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return Some(0.0);
    }
    match coords[0].len() {
        1 => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| coords[a][0].total_cmp(&coords[b][0]));
            let mut grouped = Vec::new();
            let mut i = 0;
            while i < n {
                let mut s = 0.0;
                let c = coords[order[i]][0];
                while i < n && coords[order[i]][0] == c {
                    s += values[order[i]];
                    i += 1;
                }
                grouped.push(s);
            }
            let (mut hi, mut lo, mut best) = (0.0f64, 0.0f64, 0.0f64);
            for s in grouped {
                hi = (hi + s).max(0.0);
                lo = (lo + s).min(0.0);
                best = best.max(hi).max(-lo);
            }
            Some(best)
        }
        2 => Some(max_abs_box_sum_2d(coords, values)),
        _ => None,
    }
}

#[derive(Clone, Copy, Default)]
struct Node {
    sum: f64,
    pre_max: f64,
    suf_max: f64,
    best_max: f64,
    pre_min: f64,
    suf_min: f64,
    best_min: f64,
}

impl Node {
    fn leaf(v: f64) -> Self {
        let (p, m) = (v.max(0.0), v.min(0.0));
        Self { sum: v, pre_max: p, suf_max: p, best_max: p, pre_min: m, suf_min: m, best_min: m }
    }

    #[inline(always)]
    fn join(l: &Node, r: &Node) -> Self {
        // plain comparisons: no NaN can reach the tree
        #[inline(always)]
        fn mx(a: f64, b: f64) -> f64 {
            if a > b {
                a
            } else {
                b
            }
        }
        #[inline(always)]
        fn mn(a: f64, b: f64) -> f64 {
            if a < b {
                a
            } else {
                b
            }
        }
        Self {
            sum: l.sum + r.sum,
            pre_max: mx(l.pre_max, l.sum + r.pre_max),
            suf_max: mx(r.suf_max, r.sum + l.suf_max),
            best_max: mx(mx(l.best_max, r.best_max), l.suf_max + r.pre_max),
            pre_min: mn(l.pre_min, l.sum + r.pre_min),
            suf_min: mn(r.suf_min, r.sum + l.suf_min),
            best_min: mn(mn(l.best_min, r.best_min), l.suf_min + r.pre_min),
        }
    }
}

fn dense_ranks(vals: impl Iterator<Item = f64>) -> (Vec<usize>, usize) {
    let vals: Vec<f64> = vals.collect();
    let mut sorted = vals.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let ranks = vals.iter().map(|v| sorted.binary_search_by(|s| s.total_cmp(v)).expect("present")).collect();
    (ranks, sorted.len())
}

fn max_abs_box_sum_2d(coords: &[Vec<f64>], values: &[f64]) -> f64 {
    let (xr, gx) = dense_ranks(coords.iter().map(|c| c[0]));
    let (yr, gy) = dense_ranks(coords.iter().map(|c| c[1]));
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); gx];
    for i in 0..values.len() {
        columns[xr[i]].push(i);
    }
    let size = gy.next_power_of_two();
    let mut tree = vec![Node::default(); 2 * size];
    let mut leaf_val = vec![0.0; size];
    let mut best = 0.0f64;
    for left in 0..gx {
        tree.iter_mut().for_each(|n| *n = Node::default());
        leaf_val.iter_mut().for_each(|v| *v = 0.0);
        for col in &columns[left..] {
            for &i in col {
                let y = yr[i];
                leaf_val[y] += values[i];
                let mut pos = y + size;
                tree[pos] = Node::leaf(leaf_val[y]);
                pos /= 2;
                while pos >= 1 {
                    tree[pos] = Node::join(&tree[2 * pos], &tree[2 * pos + 1]);
                    pos /= 2;
                }
            }
            best = best.max(tree[1].best_max).max(-tree[1].best_min);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, seed: u64) -> WeightedPointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n).map(|_| Point::xy(rng.gen(), rng.gen())).collect();
        WeightedPointSet::unit(2, pts).unwrap()
    }

    fn sorted_rows(inc: &CanonicalIncidence) -> Vec<Vec<u32>> {
        let mut rows = inc.rows().to_vec();
        rows.sort();
        rows
    }

    #[test]
    fn structure_two_points_one_direction() {
        let x = WeightedPointSet::unit(2, vec![Point::xy(0.3, 0.0), Point::xy(0.1, 0.0)]).unwrap();
        let inc = canonical_structure(&x, &x_axis()).unwrap();
        assert_eq!(sorted_rows(&inc), vec![vec![0], vec![0, 1], vec![1]]);
        assert_eq!(inc.t(), 2);
    }

    fn x_axis() -> DirectionSet {
        DirectionSet::new(2, vec![vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn structure_four_points_one_direction() {
        let pts = [0.4, 0.1, 0.3, 0.2].iter().map(|&x| Point::xy(x, 0.0)).collect();
        let x = WeightedPointSet::unit(2, pts).unwrap();
        let inc = canonical_structure(&x, &x_axis()).unwrap();
        // ranks: 1→0, 3→1, 2→2, 0→3
        assert_eq!(
            sorted_rows(&inc),
            vec![vec![0], vec![0, 1, 2, 3], vec![0, 2], vec![1], vec![1, 3], vec![2], vec![3]]
        );
        assert_eq!(inc.t(), 3);
    }

    #[test]
    fn structure_four_points_two_directions() {
        let x = random_set(4, 3);
        let inc = canonical_structure(&x, &DirectionSet::axes(2)).unwrap();
        assert!(inc.rows().iter().all(|r| r.len() <= 4));
        assert!(inc.t() <= 5);
        assert!(canonical_structure(&random_set(4, 3), &DirectionSet::axes(2)).is_ok());
    }

    #[test]
    fn structure_rejects_bad_sizes() {
        assert!(canonical_structure(&random_set(6, 1), &DirectionSet::axes(2)).is_err());
        let three_d = DirectionSet::axes(3);
        assert!(canonical_structure(&random_set(8, 1), &three_d).is_err());
    }

    #[test]
    fn bf_single_pair_row() {
        let inc = CanonicalIncidence::from_rows(2, vec![vec![0, 1]]).unwrap();
        assert_eq!(inc.t(), 1);
        let chi = beck_fiala(&inc);
        assert_eq!(chi.sum(), 0);
    }

    #[test]
    fn bf_singletons() {
        let inc = CanonicalIncidence::from_rows(4, (0..4).map(|i| vec![i]).collect()).unwrap();
        let chi = beck_fiala(&inc);
        assert!(inc.max_row_imbalance(&chi) <= inc.row_bound());
        assert_eq!(chi.positives(), 2);
    }

    #[test]
    fn bf_row_bound_random_64() {
        for seed in 0..5 {
            let x = random_set(64, seed);
            let inc = canonical_structure(&x, &DirectionSet::axes(2)).unwrap();
            let chi = beck_fiala(&inc);
            assert!(inc.max_row_imbalance(&chi) <= inc.row_bound());
            assert_eq!(chi.positives(), 32);
        }
    }

    #[test]
    fn bf_is_deterministic() {
        let x = random_set(128, 9);
        let inc = canonical_structure(&x, &DirectionSet::axes(2)).unwrap();
        assert_eq!(beck_fiala(&inc), beck_fiala(&inc));
    }

    #[test]
    fn halve_duplicates() {
        let x = WeightedPointSet::unit(2, vec![Point::xy(0.5, 0.5); 16]).unwrap();
        let h = halve(&x, &RangeFamily::rect(2), 1).unwrap();
        assert_eq!(h.kept.len(), 8);
        assert_eq!(h.measured_error, Some(0.0));
        assert!(h.bound_error > 0.0);
        assert!((h.kept.total_weight() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn halve_collinear() {
        let pts = [0.1, 0.7, 0.3, 0.9].iter().map(|&x| Point::new(&[x]).unwrap()).collect();
        let x = WeightedPointSet::unit(1, pts).unwrap();
        let h = halve(&x, &RangeFamily::rect(1), 1).unwrap();
        assert_eq!(h.kept.len(), 2);
        let m = h.measured_error.unwrap();
        assert!(m <= h.bound_error);
        // intervals over 4 sorted points: the kept half must alternate to score 1/4
        assert!(m <= 0.25 + 1e-12);
    }

    #[test]
    fn halve_errors() {
        let x = random_set(8, 0);
        assert!(halve(&x, &RangeFamily::rect(2), 16).is_err());
        assert!(halve(&random_set(6, 0), &RangeFamily::rect(2), 1).is_err());
        assert!(halve(&x, &RangeFamily::rect(3), 1).is_err());
    }

    fn brute_box(coords: &[Vec<f64>], v: &[f64]) -> f64 {
        let xs: Vec<f64> = coords.iter().map(|c| c[0]).collect();
        let ys: Vec<f64> = coords.iter().map(|c| c[1]).collect();
        let mut best = 0.0f64;
        for &x0 in &xs {
            for &x1 in &xs {
                for &y0 in &ys {
                    for &y1 in &ys {
                        let s: f64 = (0..v.len())
                            .filter(|&i| x0 <= xs[i] && xs[i] <= x1 && y0 <= ys[i] && ys[i] <= y1)
                            .map(|i| v[i])
                            .sum();
                        best = best.max(s.abs());
                    }
                }
            }
        }
        best
    }

    #[test]
    fn box_sum_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(1..14);
            // coarse grid to force ties
            let coords: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64]).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..4) as f64).collect();
            assert_eq!(max_abs_range_sum(&coords, &v).unwrap(), brute_box(&coords, &v));
        }
    }
}

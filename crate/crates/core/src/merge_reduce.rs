//! The merge/halve pipeline with an exact error ledger.
//!
//! Points are sorted along a kd order and cut into equal power-of-two blocks.
//! Stage 1 repeatedly merges sibling blocks and halves every merged block,
//! skipping one halving after every `w + 2`; stage 2 keeps halving the single
//! surviving set. Every halving step is charged its exact relative error over
//! the range family (or the unit-weight worst case where exact measurement is
//! not available) and is only taken if the running total stays within ε.

use std::sync::Mutex;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{canonical_structure, halve, halve_with, halving_bound, max_abs_range_sum, HalveOutcome};
use crate::error::{Error, Result};
use crate::family::RangeFamily;
use crate::geom::{Point, WeightedPointSet};

/// Relative weight of padding duplicates.
pub const PAD_WEIGHT: f64 = 1e-12;

/// Largest point count whose halving error is measured exactly. Larger steps
/// are charged from per-set errors, and larger single sets are halved as
/// kd chunks of this size.
const MEASURE_CAP: usize = 4096;

const PAD: usize = usize::MAX;

/// Pipeline parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub eps: f64,
    pub family: RangeFamily,
    /// Initial block size, a power of two.
    pub block_size: usize,
    /// Stage 1 skips one halving after every `w_exponent + 2`.
    pub w_exponent: usize,
    /// Required geometric decrease of the step error from `min_block` to `2·min_block`.
    pub delta: f64,
    /// Smallest set the pipeline will halve.
    pub min_block: usize,
}

impl ReduceConfig {
    /// Defaults: block size 256, w = 4, δ = 0.1, and the smallest power-of-two
    /// `min_block ≥ 64` at which the step error decreases geometrically.
    pub fn new(eps: f64, family: RangeFamily) -> Result<Self> {
        let mut cfg = Self { eps, family, block_size: 256, w_exponent: 4, delta: 0.1, min_block: 64 };
        check_eps(eps)?;
        while !cfg.decreases_at(cfg.min_block) {
            cfg.min_block *= 2;
            if cfg.min_block > 1 << 16 {
                return Err(Error::Unsupported("step error never decreases geometrically".into()));
            }
        }
        cfg.block_size = cfg.block_size.max(cfg.min_block);
        Ok(cfg)
    }

    pub fn with_block_size(mut self, block_size: usize) -> Result<Self> {
        self.block_size = block_size;
        self.validate()?;
        Ok(self)
    }

    pub fn with_min_block(mut self, min_block: usize) -> Result<Self> {
        self.min_block = min_block;
        self.validate()?;
        Ok(self)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        self.eps = eps;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        if !self.block_size.is_power_of_two() || !self.min_block.is_power_of_two() {
            return Err(Error::Invalid("block sizes must be powers of two".into()));
        }
        if self.block_size < self.min_block {
            return Err(Error::Invalid(format!(
                "block size {} is below the minimum block {}",
                self.block_size, self.min_block
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Invalid(format!("delta {} outside (0, 1]", self.delta)));
        }
        if !self.decreases_at(self.min_block) {
            return Err(Error::Invalid(format!(
                "step error does not shrink by 1 - {} from {} to {} points",
                self.delta,
                self.min_block,
                2 * self.min_block
            )));
        }
        Ok(())
    }

    fn decreases_at(&self, n: usize) -> bool {
        step_error_curve(&self.family, 2 * n) <= (1.0 - self.delta) * step_error_curve(&self.family, n)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("eps {eps} outside (0, 1)")))
    }
}

/// Average charged error of one halving of `n` synthetic uniform points.
///
/// Values are cached per family and size. When the error cannot be measured
/// the charge is the bound, which needs only the canonical structure.
pub fn step_error_curve(family: &RangeFamily, n: usize) -> f64 {
    static CACHE: Mutex<Vec<(RangeFamily, usize, f64)>> = Mutex::new(Vec::new());
    let cached = CACHE.lock().expect("cache lock").iter().find(|(f, m, _)| f == family && *m == n).map(|e| e.2);
    if let Some(v) = cached {
        return v;
    }
    const SAMPLES: u64 = 4;
    let dim = family.dim();
    let dirs = family.directions();
    let total: f64 = (0..SAMPLES)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + seed);
            let pts: Vec<Point> = (0..n)
                .map(|_| {
                    let c: Vec<f64> = (0..dim).map(|_| rand::Rng::gen(&mut rng)).collect();
                    Point::new(&c).expect("finite")
                })
                .collect();
            let measurable = pts.first().is_some_and(|p| family.project(p).len() <= 2);
            let x = WeightedPointSet::unit(dim, pts).expect("valid");
            if measurable {
                halve(&x, family, 1).map(|h| h.certified_error()).unwrap_or(f64::INFINITY)
            } else {
                canonical_structure(&x, &dirs).map(|inc| halving_bound(n, inc.t(), dirs.len())).unwrap_or(f64::INFINITY)
            }
        })
        .sum();
    let v = total / SAMPLES as f64;
    CACHE.lock().expect("cache lock").push((family.clone(), n, v));
    v
}

/// Why an entry was charged to the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Halve,
    /// Removal of padding weight at the end.
    Padding,
    /// Error carried in from an earlier construction stage.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub kind: StepKind,
    /// Size of each set halved in this step.
    pub size: usize,
    pub error: f64,
}

/// Running record of the error spent by a construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCertificate {
    pub eps: f64,
    pub accumulated_error: f64,
    pub halve_log: Vec<LedgerEntry>,
    pub output_size: usize,
    /// Set when the budget did not allow a single halving.
    pub warning: Option<String>,
}

impl ApproxCertificate {
    fn new(eps: f64) -> Self {
        Self { eps, accumulated_error: 0.0, halve_log: Vec::new(), output_size: 0, warning: None }
    }

    /// Certificate of an output that reproduces its input exactly.
    pub fn exact(eps: f64) -> Self {
        Self::new(eps)
    }

    fn charge(&mut self, kind: StepKind, size: usize, error: f64) {
        self.accumulated_error += error;
        self.halve_log.push(LedgerEntry { kind, size, error });
    }

    fn halvings(&self) -> usize {
        self.halve_log.iter().filter(|e| e.kind == StepKind::Halve).count()
    }

    /// Certificate for the union of disjoint parts, each charged in
    /// proportion to its share of the total weight.
    pub fn combine(eps: f64, parts: &[(f64, &ApproxCertificate)]) -> Self {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        let mut out = Self::new(eps);
        for (w, cert) in parts {
            let share = if total > 0.0 { w / total } else { 0.0 };
            for e in &cert.halve_log {
                out.charge(e.kind, e.size, e.error * share);
            }
            out.output_size += cert.output_size;
        }
        if parts.iter().all(|(_, c)| c.warning.is_some()) {
            out.warning = parts.first().and_then(|(_, c)| c.warning.clone());
        }
        out
    }

    /// Prepend the error of an earlier stage whose output this certificate approximates.
    pub fn after(mut self, prior: f64, eps: f64) -> Self {
        self.eps = eps;
        self.accumulated_error += prior;
        self.halve_log.insert(0, LedgerEntry { kind: StepKind::Prior, size: 0, error: prior });
        self
    }
}

/// A working set with the original index of every point (`PAD` for padding).
#[derive(Debug, Clone)]
struct Block {
    set: WeightedPointSet,
    idx: Vec<usize>,
}

impl Block {
    fn len(&self) -> usize {
        self.set.len()
    }

    fn merge(a: Block, b: Block) -> Result<Block> {
        let set = a.set.union(&b.set)?;
        let mut idx = a.idx;
        idx.extend(b.idx);
        Ok(Block { set, idx })
    }

    fn pad_to_pow2(mut self, pad_weight: f64) -> Result<Block> {
        let target = self.len().next_power_of_two();
        if target == self.len() {
            return Ok(self);
        }
        let extra = target - self.len();
        let p = self.set.points()[0];
        let mut points = self.set.points().to_vec();
        let mut weights = self.set.weights().to_vec();
        points.extend(std::iter::repeat_n(p, extra));
        weights.extend(std::iter::repeat_n(pad_weight, extra));
        self.idx.extend(std::iter::repeat_n(PAD, extra));
        self.set = WeightedPointSet::new(self.set.dim(), points, weights)?;
        Ok(self)
    }
}

/// Point order of a kd tree that splits the widest extent at the median.
pub fn kd_order(points: &[Point]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    kd_split(points, &mut order);
    order
}

fn kd_split(points: &[Point], order: &mut [usize]) {
    if order.len() <= 1 {
        return;
    }
    let dim = points[order[0]].dim();
    let axis = (0..dim)
        .max_by(|&a, &b| {
            let ext = |ax: usize| {
                let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let c = points[i].coord(ax);
                    (lo.min(c), hi.max(c))
                });
                hi - lo
            };
            ext(a).total_cmp(&ext(b)).then(b.cmp(&a))
        })
        .expect("dim >= 1");
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a].coord(axis).total_cmp(&points[b].coord(axis)).then(a.cmp(&b)));
    let (lo, hi) = order.split_at_mut(mid);
    kd_split(points, lo);
    kd_split(points, hi);
}

#[derive(Clone)]
struct Pipeline<'a> {
    cfg: &'a ReduceConfig,
    total: f64,
    cert: ApproxCertificate,
    /// Smallest `charge × set size` seen so far; error decays at best like
    /// `1/size`, so steps predicted above the remaining budget are skipped.
    best_scaled: f64,
    /// Index list of the last single set whose halving was refused.
    refused: Option<Vec<usize>>,
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &'a ReduceConfig, total: f64) -> Self {
        Self { cfg, total, cert: ApproxCertificate::new(cfg.eps), best_scaled: f64::INFINITY, refused: None }
    }
}

impl Pipeline<'_> {
    /// Halve every set and charge the step, or return `None` if the budget
    /// does not allow it.
    fn try_halve(&mut self, sets: &[Block]) -> Result<Option<Vec<(Block, Block)>>> {
        if sets.iter().any(|b| b.len() < self.cfg.min_block.max(2)) {
            return Ok(None);
        }
        let size = sets.iter().map(Block::len).max().unwrap_or(0);
        if self.best_scaled.is_finite() && self.best_scaled / size as f64 > self.cfg.eps - self.cert.accumulated_error {
            return Ok(None);
        }
        if sets.len() == 1 && self.refused.as_ref() == Some(&sets[0].idx) {
            return Ok(None);
        }
        let n: usize = sets.iter().map(Block::len).sum();
        let joint = n <= MEASURE_CAP && sets.len() > 1;
        let outcomes: Vec<HalveOutcome> = sets
            .par_iter()
            .map(|b| halve_with(&b.set, &self.cfg.family, self.cfg.min_block, !joint && b.len() <= MEASURE_CAP))
            .collect::<Result<_>>()?;
        let charge = self.step_charge(sets, &outcomes, joint);
        self.best_scaled = self.best_scaled.min(charge * size as f64);
        if self.cert.accumulated_error + charge > self.cfg.eps {
            if sets.len() == 1 {
                self.refused = Some(sets[0].idx.clone());
            }
            return Ok(None);
        }
        self.cert.charge(StepKind::Halve, size, charge);
        Ok(Some(
            sets.iter()
                .zip(outcomes)
                .map(|(b, h)| {
                    let kept = Block { idx: h.kept_idx.iter().map(|&i| b.idx[i]).collect(), set: h.kept };
                    let disc = Block { idx: h.discarded_idx.iter().map(|&i| b.idx[i]).collect(), set: h.discarded };
                    (kept, disc)
                })
                .collect(),
        ))
    }

    /// Halve one set, in kd chunks when it is too large to measure whole.
    fn try_halve_one(&mut self, block: &Block) -> Result<Option<(Block, Block)>> {
        let pieces = if block.len() > MEASURE_CAP { chunks(block, MEASURE_CAP)? } else { vec![block.clone()] };
        let Some(halves) = self.try_halve(&pieces)? else { return Ok(None) };
        let mut it = halves.into_iter();
        let (mut kept, mut disc) = it.next().expect("at least one chunk");
        for (k, d) in it {
            kept = Block::merge(kept, k)?;
            disc = Block::merge(disc, d)?;
        }
        Ok(Some((kept, disc)))
    }

    fn step_charge(&self, sets: &[Block], outcomes: &[HalveOutcome], joint: bool) -> f64 {
        let n: usize = sets.iter().map(Block::len).sum();
        if joint {
            let mut coords = Vec::with_capacity(n);
            let mut delta = Vec::with_capacity(n);
            for (b, h) in sets.iter().zip(outcomes) {
                let mut d: Vec<f64> = b.set.weights().iter().map(|w| -w).collect();
                for (slot, &i) in h.kept_idx.iter().enumerate() {
                    d[i] += h.kept.weights()[slot];
                }
                coords.extend(b.set.points().iter().map(|p| self.cfg.family.project(p)));
                delta.extend(d);
            }
            if let Some(m) = max_abs_range_sum(&coords, &delta) {
                return m / self.total;
            }
        }
        let charges: Vec<f64> =
            sets.iter().zip(outcomes).map(|(b, h)| h.certified_error() * b.set.total_weight() / self.total).collect();
        let sum: f64 = charges.iter().sum();
        sum.min(stab_bound(sets, &charges, &self.cfg.family))
    }
}

/// Upper bound on the error of a step over disjoint sets: a range only errs
/// on sets its boundary cuts, and every boundary hyperplane of a range is a
/// level of one projection. Each projection contributes two levels, each
/// stabbing at most the heaviest stack of overlapping projected extents.
fn stab_bound(sets: &[Block], charges: &[f64], family: &RangeFamily) -> f64 {
    let proj: Vec<Vec<Vec<f64>>> =
        sets.iter().map(|b| b.set.points().iter().map(|p| family.project(p)).collect()).collect();
    let k = proj.iter().flatten().next().map_or(0, Vec::len);
    let mut bound = 0.0;
    for j in 0..k {
        let mut events: Vec<(f64, bool, f64)> = Vec::with_capacity(2 * sets.len());
        for (pts, &c) in proj.iter().zip(charges) {
            let lo = pts.iter().map(|q| q[j]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|q| q[j]).fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                events.push((lo, false, c));
                events.push((hi, true, c));
            }
        }
        // openings sort before closings at equal coordinates: extents are closed
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (mut cur, mut best) = (0.0f64, 0.0f64);
        for (_, close, c) in events {
            if close {
                cur -= c;
            } else {
                cur += c;
                best = best.max(cur);
            }
        }
        bound += 2.0 * best;
    }
    bound
}

/// Algorithm output with the original index of every kept point.
struct Reduced {
    block: Block,
    cert: ApproxCertificate,
}

fn initial_blocks(x: &WeightedPointSet, cfg: &ReduceConfig) -> Result<(Vec<Block>, f64)> {
    let n = x.len();
    let min_w = x.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let pad_weight = PAD_WEIGHT * min_w;
    let count = n.div_ceil(cfg.block_size).next_power_of_two();
    let order = kd_order(x.points());
    let mut blocks = Vec::with_capacity(count);
    let mut start = 0;
    for b in 0..count {
        let end = start + (n - start) / (count - b);
        let idx: Vec<usize> = order[start..end].to_vec();
        start = end;
        blocks.push(Block { set: x.select(&idx), idx });
    }
    let size = blocks.iter().map(Block::len).max().unwrap_or(1).next_power_of_two();
    let blocks = blocks
        .into_iter()
        .map(|mut b| {
            let extra = size - b.len();
            if extra > 0 {
                let p = b.set.points()[0];
                let mut pts = b.set.points().to_vec();
                let mut ws = b.set.weights().to_vec();
                pts.extend(std::iter::repeat_n(p, extra));
                ws.extend(std::iter::repeat_n(pad_weight, extra));
                b.idx.extend(std::iter::repeat_n(PAD, extra));
                b.set = WeightedPointSet::new(x.dim(), pts, ws)?;
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((blocks, pad_weight))
}

/// Cut a block into kd-ordered pieces of `size` points.
fn chunks(block: &Block, size: usize) -> Result<Vec<Block>> {
    let order = kd_order(block.set.points());
    Ok(order
        .chunks(size)
        .map(|part| Block { set: block.set.select(part), idx: part.iter().map(|&i| block.idx[i]).collect() })
        .collect())
}

fn merge_pairs(sets: Vec<Block>, pad_weight: f64) -> Result<Vec<Block>> {
    let mut out = Vec::with_capacity(sets.len().div_ceil(2));
    let mut it = sets.into_iter();
    while let Some(a) = it.next() {
        match it.next() {
            Some(b) => out.push(Block::merge(a, b)?.pad_to_pow2(pad_weight)?),
            None => out.push(a),
        }
    }
    Ok(out)
}

fn check_input(x: &WeightedPointSet, cfg: &ReduceConfig) -> Result<()> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::Size("empty input".into()));
    }
    if x.dim() != cfg.family.dim() {
        return Err(Error::Dimension(format!("{}D points for a {}D family", x.dim(), cfg.family.dim())));
    }
    Ok(())
}

/// Stage-1 state of one pipeline: its sets, the number of halving steps
/// taken in the current round, and its ledger.
struct Branch<'a> {
    sets: Vec<Block>,
    step: usize,
    pipe: Pipeline<'a>,
}

impl<'a> Branch<'a> {
    fn root(x: &WeightedPointSet, cfg: &'a ReduceConfig) -> Result<(Self, f64)> {
        let (sets, pad_weight) = initial_blocks(x, cfg)?;
        let total: f64 = sets.iter().map(|b| b.set.total_weight()).sum();
        Ok((Branch { sets, step: 0, pipe: Pipeline::new(cfg, total) }, pad_weight))
    }

    /// Stage 1: merge and halve until one set remains, with one bare merge
    /// after every `w+2` merge and halve steps. With `siblings`, the
    /// discarded halves of every halving continue as a new branch.
    fn stage_one(
        mut self,
        pad_weight: f64,
        mut siblings: Option<&mut Vec<Branch<'a>>>,
    ) -> Result<(Block, Pipeline<'a>)> {
        let round = self.pipe.cfg.w_exponent + 2;
        while self.sets.len() > 1 {
            self.sets = merge_pairs(std::mem::take(&mut self.sets), pad_weight)?;
            if self.step == round {
                self.step = 0;
                continue;
            }
            self.step += 1;
            if let Some(halves) = self.pipe.try_halve(&self.sets)? {
                let (kept, disc): (Vec<Block>, Vec<Block>) = halves.into_iter().unzip();
                if let Some(s) = siblings.as_deref_mut() {
                    s.push(Branch { sets: disc, step: self.step, pipe: self.pipe.clone() });
                }
                self.sets = kept;
            }
        }
        Ok((self.sets.pop().expect("at least one block"), self.pipe))
    }
}

fn run(x: &WeightedPointSet, cfg: &ReduceConfig) -> Result<Reduced> {
    check_input(x, cfg)?;
    let (root, pad_weight) = Branch::root(x, cfg)?;
    let (mut cur, mut pipe) = root.stage_one(pad_weight, None)?;
    while let Some((kept, _)) = pipe.try_halve_one(&cur)? {
        cur = kept;
    }
    Ok(Reduced { block: cur, cert: pipe.cert })
}

/// Drop padding and rescale to the input total weight.
fn finish(x: &WeightedPointSet, block: &Block, cert: &mut ApproxCertificate) -> Result<(WeightedPointSet, Vec<usize>)> {
    let keep: Vec<usize> = (0..block.len()).filter(|&i| block.idx[i] != PAD).collect();
    let pad_mass: f64 = (0..block.len()).filter(|&i| block.idx[i] == PAD).map(|i| block.set.weights()[i]).sum();
    let part = block.set.select(&keep);
    let total = x.total_weight();
    if pad_mass > 0.0 {
        cert.charge(StepKind::Padding, block.len(), pad_mass / (total + pad_mass));
    }
    let out = part.scaled(total / part.total_weight())?;
    cert.output_size = out.len();
    Ok((out, keep.iter().map(|&i| block.idx[i]).collect()))
}

fn unchanged(x: &WeightedPointSet, eps: f64) -> (WeightedPointSet, ApproxCertificate) {
    let mut cert = ApproxCertificate::new(eps);
    cert.output_size = x.len();
    cert.warning = Some(format!("budget {eps} does not allow a single halving; returning the input"));
    (x.clone(), cert)
}

/// Weighted ε-approximation of `x` for `cfg.family` by merge and reduce.
pub fn epsilon_approx(x: &WeightedPointSet, cfg: &ReduceConfig) -> Result<(WeightedPointSet, ApproxCertificate)> {
    epsilon_approx_indexed(x, cfg).map(|(p, _, c)| (p, c))
}

/// As [`epsilon_approx`], also returning the input index of every output point.
pub fn epsilon_approx_indexed(
    x: &WeightedPointSet,
    cfg: &ReduceConfig,
) -> Result<(WeightedPointSet, Vec<usize>, ApproxCertificate)> {
    let mut r = run(x, cfg)?;
    if r.cert.halvings() == 0 {
        let (p, c) = unchanged(x, cfg.eps);
        return Ok((p, (0..x.len()).collect(), c));
    }
    let (p, idx) = finish(x, &r.block, &mut r.cert)?;
    Ok((p, idx, r.cert))
}

/// Disjoint ε-approximations: every halving, in either stage, also
/// continues with the discarded half as a sibling pipeline, depth first. Each
/// part comes with the input indices it uses.
pub fn branching_approx(
    x: &WeightedPointSet,
    cfg: &ReduceConfig,
) -> Result<Vec<(WeightedPointSet, Vec<usize>, ApproxCertificate)>> {
    check_input(x, cfg)?;
    let (root, pad_weight) = Branch::root(x, cfg)?;
    let mut stack = vec![root];
    let mut out = Vec::new();
    while let Some(br) = stack.pop() {
        let mut siblings = Vec::new();
        let (mut cur, mut pipe) = br.stage_one(pad_weight, Some(&mut siblings))?;
        while let Some((kept, disc)) = pipe.try_halve_one(&cur)? {
            siblings.push(Branch { sets: vec![disc], step: 0, pipe: pipe.clone() });
            cur = kept;
        }
        if out.is_empty() && pipe.cert.halvings() == 0 {
            let (p, c) = unchanged(x, cfg.eps);
            return Ok(vec![(p, (0..x.len()).collect(), c)]);
        }
        stack.extend(siblings.into_iter().rev());
        if cur.idx.iter().all(|&i| i == PAD) {
            continue;
        }
        let mut cert = pipe.cert;
        let (p, idx) = finish(x, &cur, &mut cert)?;
        out.push((p, idx, cert));
    }
    Ok(out)
}

/// Splits `x` into dyadic weight classes (ratio 2), approximates each with
/// budget ε and returns their union.
pub fn weighted_epsilon_approx(
    x: &WeightedPointSet,
    cfg: &ReduceConfig,
) -> Result<(WeightedPointSet, ApproxCertificate)> {
    check_input(x, cfg)?;
    let buckets = weight_buckets(x);
    if buckets.len() == 1 {
        return epsilon_approx(x, cfg);
    }
    let parts: Vec<(WeightedPointSet, ApproxCertificate)> =
        buckets.par_iter().map(|idx| epsilon_approx(&x.select(idx), cfg)).collect::<Result<_>>()?;
    let mut out = WeightedPointSet::empty(x.dim());
    for (p, _) in &parts {
        out = out.union(p)?;
    }
    let shares: Vec<(f64, &ApproxCertificate)> = parts.iter().map(|(p, c)| (p.total_weight(), c)).collect();
    let mut cert = ApproxCertificate::combine(cfg.eps, &shares);
    cert.output_size = out.len();
    let out = out.scaled(x.total_weight() / out.total_weight())?;
    Ok((out, cert))
}

/// Indices grouped by `⌊log₂(w_max / w)⌋`, heaviest class first.
pub fn weight_buckets(x: &WeightedPointSet) -> Vec<Vec<usize>> {
    let w_max = x.weights().iter().copied().fold(0.0, f64::max);
    let mut classes: Vec<(i64, usize)> =
        x.weights().iter().enumerate().map(|(i, &w)| ((w_max / w).log2().floor() as i64, i)).collect();
    classes.sort();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut last = None;
    for (c, i) in classes {
        if last != Some(c) {
            out.push(Vec::new());
            last = Some(c);
        }
        out.last_mut().expect("pushed").push(i);
    }
    out
}

/// Uniform random sample of size `⌈8/ε² · ln(1/(ε·δ))⌉` without replacement,
/// reweighted to the input total.
pub fn random_sample_baseline(x: &WeightedPointSet, eps: f64, delta_fail: f64, seed: u64) -> Result<WeightedPointSet> {
    check_eps(eps)?;
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(Error::Invalid(format!("failure probability {delta_fail} outside (0, 1)")));
    }
    let size = (8.0 / (eps * eps) * (1.0 / (eps * delta_fail)).ln()).ceil();
    if size >= x.len() as f64 {
        return Ok(x.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, x.len(), size as usize).into_vec();
    idx.sort_unstable();
    let part = x.select(&idx);
    part.scaled(x.total_weight() / part.total_weight())
}

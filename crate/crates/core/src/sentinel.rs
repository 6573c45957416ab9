//! ε-sentinels: subsets that notice every range holding an ε share of the
//! ground set, and raise no alarm for ranges holding much less.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::RangeFamily;
use crate::geom::{AxisRect, WeightedPointSet};
use crate::merge_reduce::{branching_approx, epsilon_approx_indexed, ReduceConfig};

/// Pairwise disjoint sentinels of one ground set, with their input indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentinelFamily {
    pub sets: Vec<WeightedPointSet>,
    pub indices: Vec<Vec<usize>>,
    pub eps: f64,
    pub family: RangeFamily,
}

/// Which definitional condition a range breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    /// `|R∩D| ≥ ε|D|` but `|R∩P| < ¾ε|P|`.
    Missed,
    /// `|R∩P| ≥ ¾ε|P|` but `|R∩D| < ε|D|/2`.
    FalseAlarm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentinelCheck {
    pub passed: bool,
    pub violation: Option<(AxisRect, Violation)>,
    pub ranges_checked: u64,
}

/// An `eps/4`-approximation of `d`, returned as the unit-weight subset of
/// `d` it selects.
pub fn build_sentinels(d: &WeightedPointSet, cfg: &ReduceConfig) -> Result<WeightedPointSet> {
    Ok(build_indexed(d, cfg)?.0)
}

fn build_indexed(d: &WeightedPointSet, cfg: &ReduceConfig) -> Result<(WeightedPointSet, Vec<usize>)> {
    if d.is_empty() {
        return Err(Error::Invalid("empty ground set".into()));
    }
    let quarter = cfg.clone().with_eps(cfg.eps / 4.0)?;
    let (_, idx, _) = epsilon_approx_indexed(d, &quarter)?;
    Ok((unit_subset(d, &idx)?, idx))
}

fn unit_subset(d: &WeightedPointSet, idx: &[usize]) -> Result<WeightedPointSet> {
    WeightedPointSet::unit(d.dim(), idx.iter().map(|&i| d.points()[i]).collect())
}

/// Exhaustive check of both sentinel conditions over every axis rectangle
/// with sides at coordinates of `d`. Points are counted, weights ignored.
///
/// Inside each x-strip and for each lower y bound, counts grow with the upper
/// bound, so only the first upper bound reaching `ε|D|` and the last one
/// staying below `ε|D|/2` can break a condition. That makes the check
/// `O(|D|³)`.
pub fn verify_sentinel(
    p: &WeightedPointSet,
    d: &WeightedPointSet,
    eps: f64,
    family: &RangeFamily,
) -> Result<SentinelCheck> {
    if !matches!(family, RangeFamily::Rect { dim: 2 }) || p.dim() != 2 || d.dim() != 2 {
        return Err(Error::Unsupported("sentinel verification is implemented for planar rectangles".into()));
    }
    check_subset(p, d)?;
    let (nd, np) = (d.len() as f64, p.len() as f64);
    let (hit, alarm, quiet) = (eps * nd, 0.75 * eps * np, eps * nd / 2.0);

    let mut xs: Vec<f64> = d.points().iter().map(|q| q.x()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    // (y, in_d, in_p) per column
    let mut cols: Vec<Vec<(f64, u32, u32)>> = vec![Vec::new(); xs.len()];
    let col = |x: f64| xs.partition_point(|&v| v < x);
    for q in d.points() {
        cols[col(q.x())].push((q.y(), 1, 0));
    }
    for q in p.points() {
        cols[col(q.x())].push((q.y(), 0, 1));
    }
    for c in &mut cols {
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let mut checked = 0u64;
    for i in 0..xs.len() {
        let mut strip: Vec<(f64, u32, u32)> = Vec::new();
        for j in i..xs.len() {
            strip = merge(&strip, &cols[j]);
            // prefix counts over distinct y
            let mut ys = Vec::new();
            let (mut pd, mut pp) = (vec![0u32], vec![0u32]);
            for &(y, a, b) in &strip {
                if ys.last() != Some(&y) {
                    ys.push(y);
                    pd.push(*pd.last().unwrap());
                    pp.push(*pp.last().unwrap());
                }
                *pd.last_mut().unwrap() += a;
                *pp.last_mut().unwrap() += b;
            }
            let g = ys.len();
            checked += (g * (g + 1) / 2) as u64;
            let (mut first_hit, mut last_quiet) = (0, 0);
            for k in 0..g {
                let count_d = |l: usize| (pd[l + 1] - pd[k]) as f64;
                let count_p = |l: usize| (pp[l + 1] - pp[k]) as f64;
                first_hit = first_hit.max(k);
                while first_hit < g && count_d(first_hit) < hit {
                    first_hit += 1;
                }
                if first_hit < g && count_p(first_hit) < alarm {
                    let r = AxisRect::xy(xs[i], xs[j], ys[k], ys[first_hit]);
                    return Ok(SentinelCheck {
                        passed: false,
                        violation: Some((r, Violation::Missed)),
                        ranges_checked: checked,
                    });
                }
                last_quiet = last_quiet.max(k);
                while last_quiet < g && count_d(last_quiet) < quiet {
                    last_quiet += 1;
                }
                if last_quiet > k && count_p(last_quiet - 1) >= alarm {
                    let r = AxisRect::xy(xs[i], xs[j], ys[k], ys[last_quiet - 1]);
                    return Ok(SentinelCheck {
                        passed: false,
                        violation: Some((r, Violation::FalseAlarm)),
                        ranges_checked: checked,
                    });
                }
            }
        }
    }
    Ok(SentinelCheck { passed: true, violation: None, ranges_checked: checked })
}

fn merge(a: &[(f64, u32, u32)], b: &[(f64, u32, u32)]) -> Vec<(f64, u32, u32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].0 <= b[j].0 {
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

fn location(p: &crate::geom::Point) -> Vec<u64> {
    p.coords().iter().map(|c| c.to_bits()).collect()
}

fn check_subset(p: &WeightedPointSet, d: &WeightedPointSet) -> Result<()> {
    let mut avail: HashMap<Vec<u64>, usize> = HashMap::new();
    for q in d.points() {
        *avail.entry(location(q)).or_default() += 1;
    }
    for q in p.points() {
        match avail.get_mut(&location(q)) {
            Some(n) if *n > 0 => *n -= 1,
            _ => return Err(Error::Invalid(format!("sentinel point {:?} is not in the ground set", q.coords()))),
        }
    }
    Ok(())
}

/// Disjoint sentinels: the `eps/4` pipeline continues with the discarded half
/// of every stage-two halving, depth first. Sets failing verification are
/// dropped. When no branch can be formed the family holds one set.
pub fn disjoint_sentinels(d: &WeightedPointSet, eps: f64) -> Result<SentinelFamily> {
    let family = RangeFamily::rect(2);
    let cfg = ReduceConfig::new(eps / 4.0, family.clone())?;
    let mut out = SentinelFamily { sets: Vec::new(), indices: Vec::new(), eps, family: family.clone() };
    for (_, mut idx, _) in branching_approx(d, &cfg)? {
        idx.sort_unstable();
        let set = unit_subset(d, &idx)?;
        if verify_sentinel(&set, d, eps, &family)?.passed {
            out.sets.push(set);
            out.indices.push(idx);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, seed: u64) -> WeightedPointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WeightedPointSet::unit(2, (0..n).map(|_| Point::xy(rng.gen(), rng.gen())).collect()).unwrap()
    }

    /// Every rectangle spanned by ground-set coordinates, counted directly.
    fn brute(p: &WeightedPointSet, d: &WeightedPointSet, eps: f64) -> bool {
        let xs: Vec<f64> = d.points().iter().map(|q| q.x()).collect();
        let ys: Vec<f64> = d.points().iter().map(|q| q.y()).collect();
        let count =
            |s: &WeightedPointSet, r: &AxisRect| s.points().iter().filter(|q| r.contains(q).unwrap()).count() as f64;
        for &x1 in &xs {
            for &x2 in xs.iter().filter(|&&x| x >= x1) {
                for &y1 in &ys {
                    for &y2 in ys.iter().filter(|&&y| y >= y1) {
                        let r = AxisRect::xy(x1, x2, y1, y2);
                        let (cd, cp) = (count(d, &r), count(p, &r));
                        let (nd, np) = (d.len() as f64, p.len() as f64);
                        if (cd >= eps * nd && cp < 0.75 * eps * np) || (cp >= 0.75 * eps * np && cd < eps * nd / 2.0) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    #[test]
    fn ground_set_is_its_own_sentinel() {
        let d = uniform(40, 1);
        assert!(verify_sentinel(&d, &d, 0.1, &RangeFamily::rect(2)).unwrap().passed);
    }

    #[test]
    fn single_point_fails_with_witness() {
        let d = uniform(100, 2);
        let p = WeightedPointSet::unit(2, vec![d.points()[0]]).unwrap();
        let check = verify_sentinel(&p, &d, 0.1, &RangeFamily::rect(2)).unwrap();
        assert!(!check.passed);
        let (r, kind) = check.violation.unwrap();
        let cd = d.points().iter().filter(|q| r.contains(q).unwrap()).count() as f64;
        let cp = p.points().iter().filter(|q| r.contains(q).unwrap()).count() as f64;
        match kind {
            Violation::Missed => assert!(cd >= 10.0 && cp < 0.075),
            Violation::FalseAlarm => assert!(cp >= 0.075 && cd < 5.0),
        }
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..6 {
            let d = uniform(24, seed);
            let k = rng.gen_range(3..12);
            let p = WeightedPointSet::unit(2, d.points()[..k].to_vec()).unwrap();
            for eps in [0.2, 0.4] {
                assert_eq!(verify_sentinel(&p, &d, eps, &RangeFamily::rect(2)).unwrap().passed, brute(&p, &d, eps));
            }
        }
    }

    #[test]
    fn foreign_points_rejected() {
        let d = uniform(10, 3);
        let p = WeightedPointSet::unit(2, vec![Point::xy(2.0, 2.0)]).unwrap();
        assert!(verify_sentinel(&p, &d, 0.1, &RangeFamily::rect(2)).is_err());
    }

    #[test]
    fn built_sentinel_passes() {
        let d = uniform(256, 4);
        let cfg = ReduceConfig::new(0.2, RangeFamily::rect(2)).unwrap();
        let p = build_sentinels(&d, &cfg).unwrap();
        assert!(p.len() <= d.len());
        assert!(verify_sentinel(&p, &d, 0.2, &RangeFamily::rect(2)).unwrap().passed);
        for eps in [0.3, 0.4] {
            assert!(verify_sentinel(&p, &d, eps, &RangeFamily::rect(2)).unwrap().passed);
        }
    }

    #[test]
    fn two_clusters_both_covered() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts = (0..300)
            .map(|i| {
                let c = if i % 2 == 0 { 0.0 } else { 10.0 };
                Point::xy(c + rng.gen::<f64>(), c + rng.gen::<f64>())
            })
            .collect();
        let d = WeightedPointSet::unit(2, pts).unwrap();
        let p = build_sentinels(&d, &ReduceConfig::new(0.2, RangeFamily::rect(2)).unwrap()).unwrap();
        assert!(p.points().iter().any(|q| q.x() < 5.0));
        assert!(p.points().iter().any(|q| q.x() > 5.0));
    }

    #[test]
    fn disjoint_family() {
        let d = uniform(1024, 5);
        let fam = disjoint_sentinels(&d, 0.25).unwrap();
        assert!(fam.sets.len() >= 2, "{} sets", fam.sets.len());
        let mut seen = vec![false; d.len()];
        for idx in &fam.indices {
            for &i in idx {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
    }
}

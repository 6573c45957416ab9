//! Van der Corput sets, their stretched version for linear densities, and
//! irrational lattices clipped to polygons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    clip, integrate_linear, AxisRect, ConvexPolygon, DirectionSet, HalfPlane, Linear, LinearPatch, Point,
    WeightedPointSet,
};

/// Largest lattice size the doubling search will try.
pub const LATTICE_M_MAX: usize = 1 << 20;

/// Bins per direction in the lattice probe.
const PROBE_BINS: usize = 16;

/// `b(i)`: the bits of `i` mirrored behind the binary point, as a multiple of `1/n`.
pub fn bit_reversal(i: usize, n: usize) -> Result<f64> {
    if !n.is_power_of_two() {
        return Err(Error::Size(format!("{n} is not a power of two")));
    }
    if i >= n {
        return Err(Error::Invalid(format!("index {i} outside 0..{n}")));
    }
    let bits = n.trailing_zeros();
    let r = if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
    Ok(r as f64 / n as f64)
}

/// The `n` points `(i/n, b(i))`.
pub fn van_der_corput(n: usize) -> Result<WeightedPointSet> {
    if !n.is_power_of_two() {
        return Err(Error::Size(format!("{n} is not a power of two")));
    }
    let pts = (0..n).map(|i| Ok(Point::xy(i as f64 / n as f64, bit_reversal(i, n)?))).collect::<Result<_>>()?;
    WeightedPointSet::unit(2, pts)
}

/// The `Δ ∈ [0, w]` with `∫₀^Δ (αx + γ) dx = (i/n) ∫₀^w (αx + γ) dx`.
pub fn delta_stretch(w: f64, alpha: f64, gamma: f64, i: f64, n: usize) -> Result<f64> {
    if !(w > 0.0) || n == 0 || !(0.0..=n as f64).contains(&i) {
        return Err(Error::Invalid(format!("bad stretch arguments w={w} i={i} n={n}")));
    }
    if !(gamma > 0.0 && alpha * w + gamma > 0.0) {
        return Err(Error::Invalid(format!("density {alpha}x + {gamma} is not positive on [0, {w}]")));
    }
    if i == n as f64 {
        return Ok(w);
    }
    let c = i / n as f64 * (0.5 * alpha * w * w + gamma * w);
    // the root of (α/2)Δ² + γΔ − c = 0 without cancellation
    let delta = 2.0 * c / (gamma + (gamma * gamma + 2.0 * alpha * c).max(0.0).sqrt());
    Ok(delta.clamp(0.0, w))
}

/// Van der Corput set pushed through the inverse cumulative measure of a
/// linear density: `x` follows the marginal of `h`, `y` the conditional at
/// that `x`. Each point carries weight `∬ h / n`.
pub fn stretched_vdc(n: usize, patch: &LinearPatch) -> Result<WeightedPointSet> {
    if !n.is_power_of_two() {
        return Err(Error::Size(format!("{n} is not a power of two")));
    }
    let r = patch.rect();
    let h = patch.height();
    let (x0, y0) = (r.lo()[0], r.lo()[1]);
    let (w, l) = (r.width(0), r.width(1));
    let g0 = h.eval(x0, y0);
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let u = delta_stretch(w, h.alpha, g0 + 0.5 * h.beta * l, i as f64, n)?;
        let b = bit_reversal(i, n)?;
        let v = delta_stretch(l, h.beta, g0 + h.alpha * u, b * n as f64, n)?;
        pts.push(Point::xy(x0 + u, y0 + v));
    }
    let weight = patch.measure() / n as f64;
    WeightedPointSet::new(2, pts, vec![weight; n])
}

/// A lattice `p_i = (i/m, {α₁ i}, …)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub m: usize,
    pub alpha: Vec<f64>,
}

impl LatticeSpec {
    /// Multipliers `{√2}, {√3}, {√5}, …` for a `dim`-dimensional lattice.
    pub fn standard(m: usize, dim: usize) -> Result<Self> {
        const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
        if dim == 0 || dim > PRIMES.len() + 1 {
            return Err(Error::Dimension(format!("lattice dimension {dim}")));
        }
        let alpha = PRIMES[..dim - 1].iter().map(|&p| (p as f64).sqrt().fract()).collect();
        Self::new(m, alpha)
    }

    pub fn new(m: usize, alpha: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("lattice needs m >= 1".into()));
        }
        if m > LATTICE_M_MAX {
            return Err(Error::Size(format!("lattice size {m} above {LATTICE_M_MAX}")));
        }
        let alpha: Vec<f64> = alpha.into_iter().map(|a| a.rem_euclid(1.0)).collect();
        if alpha.iter().any(|&a| a == 0.0 || !a.is_finite()) {
            return Err(Error::Invalid("lattice multipliers must be non-integral".into()));
        }
        Ok(Self { m, alpha })
    }

    fn coords(&self, i: usize, out: &mut [f64]) {
        out[0] = i as f64 / self.m as f64;
        for (o, a) in out[1..].iter_mut().zip(&self.alpha) {
            *o = (a * i as f64).fract();
        }
    }
}

/// The `m` unit-weight lattice points in `[0, 1)^dim`.
pub fn irrational_lattice(spec: &LatticeSpec, dim: usize) -> Result<WeightedPointSet> {
    if dim != spec.alpha.len() + 1 {
        return Err(Error::Dimension(format!("{} multipliers for a {dim}-dimensional lattice", spec.alpha.len())));
    }
    let mut buf = vec![0.0; dim];
    let pts = (0..spec.m)
        .map(|i| {
            spec.coords(i, &mut buf);
            Point::new(&buf)
        })
        .collect::<Result<_>>()?;
    WeightedPointSet::unit(dim, pts)
}

/// Lattice points inside `q`, weighted `area(q) / count`. The lattice size
/// doubles until the probe error over a grid of `dirs`-oriented ranges is at
/// most `eps/2`.
pub fn lattice_sample_polytope(q: &ConvexPolygon, eps: f64, dirs: &DirectionSet) -> Result<WeightedPointSet> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("eps {eps} outside (0, 1)")));
    }
    if dirs.dim() != 2 || dirs.is_empty() || dirs.len() > 3 {
        return Err(Error::Unsupported("probe needs 1 to 3 planar directions".into()));
    }
    let area = q.area();
    if area <= crate::geom::MEASURE_EPS {
        return Err(Error::Degenerate("polygon has zero area".into()));
    }
    let bb = q.bounding_box();
    if bb.lo().iter().any(|&c| c < 0.0) || bb.hi().iter().any(|&c| c > 1.0) {
        return Err(Error::Invalid("polygon must lie in the unit square".into()));
    }
    let probe = Probe::new(q, dirs)?;
    let mut m = 64;
    loop {
        let spec = LatticeSpec::standard(m, 2)?;
        let mut buf = [0.0; 2];
        let pts: Vec<Point> = (0..m)
            .filter_map(|i| {
                spec.coords(i, &mut buf);
                let p = Point::xy(buf[0], buf[1]);
                q.contains(&p).then_some(p)
            })
            .collect();
        if !pts.is_empty() && (probe.error(&pts) <= eps / 2.0 || m == LATTICE_M_MAX) {
            let w = area / pts.len() as f64;
            let n = pts.len();
            return WeightedPointSet::new(2, pts, vec![w; n]);
        }
        if m == LATTICE_M_MAX {
            return Err(Error::Degenerate("no lattice point fell inside the polygon".into()));
        }
        m *= 2;
    }
}

/// Area of `q` in every cell of a per-direction binning, for comparing
/// counts against area over all ranges aligned with the bins.
struct Probe {
    dirs: Vec<[f64; 2]>,
    lo: Vec<f64>,
    step: Vec<f64>,
    cell_area: Vec<f64>,
    area: f64,
}

impl Probe {
    fn new(q: &ConvexPolygon, dirs: &DirectionSet) -> Result<Self> {
        let dirs: Vec<[f64; 2]> = dirs.iter().map(|d| [d[0], d[1]]).collect();
        let mut lo = Vec::new();
        let mut step = Vec::new();
        for d in &dirs {
            let proj = q.vertices().iter().map(|v| v[0] * d[0] + v[1] * d[1]);
            let (a, b) = proj.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p), b.max(p)));
            lo.push(a);
            step.push((b - a) / PROBE_BINS as f64);
        }
        let k = dirs.len();
        let cells = PROBE_BINS.pow(k as u32);
        let mut cell_area = vec![0.0; cells];
        for (c, slot) in cell_area.iter_mut().enumerate() {
            let mut poly = Some(q.clone());
            let mut rest = c;
            for j in 0..k {
                let b = rest % PROBE_BINS;
                rest /= PROBE_BINS;
                let d = dirs[j];
                let (a0, a1) = (lo[j] + b as f64 * step[j], lo[j] + (b + 1) as f64 * step[j]);
                poly = poly
                    .and_then(|p| clip(&p, &HalfPlane::new(d, a1)))
                    .and_then(|p| clip(&p, &HalfPlane::new([-d[0], -d[1]], -a0)));
            }
            *slot = poly.map_or(0.0, |p| integrate_linear(&p, &Linear::new(0.0, 0.0, 1.0)));
        }
        let area = q.area();
        Ok(Self { dirs, lo, step, cell_area, area })
    }

    /// Largest `|count/total − area/area(q)|` over bin-aligned ranges.
    fn error(&self, pts: &[Point]) -> f64 {
        let k = self.dirs.len();
        let mut counts = vec![0.0; self.cell_area.len()];
        for p in pts {
            let mut c = 0;
            let mut mul = 1;
            for j in 0..k {
                let t = ((p.dot(&self.dirs[j]) - self.lo[j]) / self.step[j]).floor();
                let b = (t.max(0.0) as usize).min(PROBE_BINS - 1);
                c += b * mul;
                mul *= PROBE_BINS;
            }
            counts[c] += 1.0;
        }
        let n = pts.len() as f64;
        let diff: Vec<f64> = counts.iter().zip(&self.cell_area).map(|(c, a)| c / n - a / self.area).collect();
        max_aligned_sum(&diff, k, PROBE_BINS)
    }
}

/// Largest `|sum|` over axis-aligned sub-boxes of a `bins^k` array.
fn max_aligned_sum(values: &[f64], k: usize, bins: usize) -> f64 {
    // prefix sums with a zero border
    let side = bins + 1;
    let total = side.pow(k as u32);
    let mut pre = vec![0.0; total];
    for (c, slot) in pre.iter_mut().enumerate() {
        let mut rest = c;
        let mut src = 0;
        let mut mul = 1;
        let mut border = false;
        for _ in 0..k {
            let b = rest % side;
            rest /= side;
            if b == 0 {
                border = true;
            } else {
                src += (b - 1) * mul;
            }
            mul *= bins;
        }
        if !border {
            *slot = values[src];
        }
    }
    let mut stride = 1;
    for _ in 0..k {
        for c in 0..total {
            if (c / stride) % side != 0 {
                pre[c] += pre[c - stride];
            }
        }
        stride *= side;
    }
    let intervals: Vec<(usize, usize)> = (0..side).flat_map(|a| (a + 1..side).map(move |b| (a, b))).collect();
    let mut best = 0.0f64;
    let mut choice = vec![0usize; k];
    loop {
        let mut s = 0.0;
        for mask in 0..(1usize << k) {
            let mut idx = 0;
            let mut mul = 1;
            let mut sign = 1.0;
            for (j, &ci) in choice.iter().enumerate() {
                let (a, b) = intervals[ci];
                if mask >> j & 1 == 1 {
                    idx += a * mul;
                    sign = -sign;
                } else {
                    idx += b * mul;
                }
                mul *= side;
            }
            s += sign * pre[idx];
        }
        best = best.max(s.abs());
        let mut j = 0;
        while j < k && choice[j] + 1 == intervals.len() {
            choice[j] = 0;
            j += 1;
        }
        if j == k {
            break;
        }
        choice[j] += 1;
    }
    best
}

/// Lattice sample of the solid under a positive linear height over a
/// triangle, projected to the base. Each point is weighted `∬ h / count`; the
/// lattice doubles until the probe error over bin-aligned boxes is at most `eps`.
pub fn lattice_sample_solid(tri: &ConvexPolygon, h: &Linear, eps: f64) -> Result<WeightedPointSet> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("eps {eps} outside (0, 1)")));
    }
    let volume = integrate_linear(tri, h);
    if !(volume > crate::geom::MEASURE_EPS * tri.area().max(1.0)) {
        return Err(Error::Degenerate("solid has zero volume".into()));
    }
    let bb = tri.bounding_box();
    let (x0, y0, w, l) = (bb.lo()[0], bb.lo()[1], bb.width(0), bb.width(1));
    let h_max = tri.vertices().iter().map(|v| h.eval(v[0], v[1])).fold(0.0, f64::max);
    let probe = SolidProbe::new(tri, h, &bb);
    let mut m = 256;
    loop {
        let spec = LatticeSpec::standard(m, 3)?;
        let mut buf = [0.0; 3];
        let pts: Vec<Point> = (0..m)
            .filter_map(|i| {
                spec.coords(i, &mut buf);
                let p = Point::xy(x0 + buf[0] * w, y0 + buf[1] * l);
                (tri.contains(&p) && buf[2] * h_max <= h.eval(p.x(), p.y())).then_some(p)
            })
            .collect();
        if !pts.is_empty() && (probe.error(&pts) <= eps || m == LATTICE_M_MAX) {
            let n = pts.len();
            return WeightedPointSet::new(2, pts, vec![volume / n as f64; n]);
        }
        if m == LATTICE_M_MAX {
            return Err(Error::Degenerate("no lattice point fell inside the solid".into()));
        }
        m *= 2;
    }
}

struct SolidProbe {
    bb: AxisRect,
    cell_mass: Vec<f64>,
    total: f64,
}

impl SolidProbe {
    fn new(tri: &ConvexPolygon, h: &Linear, bb: &AxisRect) -> Self {
        let mut cell_mass = vec![0.0; PROBE_BINS * PROBE_BINS];
        let (wx, wy) = (bb.width(0) / PROBE_BINS as f64, bb.width(1) / PROBE_BINS as f64);
        for j in 0..PROBE_BINS {
            for i in 0..PROBE_BINS {
                let x = bb.lo()[0] + i as f64 * wx;
                let y = bb.lo()[1] + j as f64 * wy;
                let cell = AxisRect::xy(x, x + wx, y, y + wy);
                cell_mass[i + PROBE_BINS * j] =
                    crate::geom::clip_to_rect(tri, &cell).map_or(0.0, |p| integrate_linear(&p, h));
            }
        }
        let total = cell_mass.iter().sum();
        Self { bb: *bb, cell_mass, total }
    }

    fn error(&self, pts: &[Point]) -> f64 {
        let mut counts = vec![0.0; self.cell_mass.len()];
        for p in pts {
            let bin = |c: f64, lo: f64, w: f64| {
                (((c - lo) / w * PROBE_BINS as f64).floor().max(0.0) as usize).min(PROBE_BINS - 1)
            };
            let i = bin(p.x(), self.bb.lo()[0], self.bb.width(0));
            let j = bin(p.y(), self.bb.lo()[1], self.bb.width(1));
            counts[i + PROBE_BINS * j] += 1.0;
        }
        let n = pts.len() as f64;
        let diff: Vec<f64> = counts.iter().zip(&self.cell_mass).map(|(c, m)| c / n - m / self.total).collect();
        max_aligned_sum(&diff, 2, PROBE_BINS)
    }
}

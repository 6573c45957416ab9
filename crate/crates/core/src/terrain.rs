//! ε-approximations of terrains: piecewise-linear, smooth and Gaussian.
//!
//! A terrain is the region under a nonnegative height over a planar base; its
//! measure of a base box `R` is `∬_R h`. Ranges ignore the height axis.

use std::fmt;
use std::sync::Arc;

use libm::erfc;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::family::RangeFamily;
use crate::geom::{AxisRect, Linear, LinearPatch, PLTerrain, Point, TerrainTriangle, WeightedPointSet, MEASURE_EPS};
use crate::lowdisc::{bit_reversal, lattice_sample_solid, stretched_vdc};
use crate::merge_reduce::{epsilon_approx, weighted_epsilon_approx, ApproxCertificate, ReduceConfig};
use crate::oracle::corner_error;

/// Side of the grid on which every smooth patch is checked against `h`.
const VERIFY_GRID: usize = 16;
/// Side of the grid on which `h ≥ z_min` is spot-checked.
const PROBE_GRID: usize = 32;
/// Largest per-patch sample the stretched stage will build.
const MAX_PATCH_POINTS: usize = 1 << 16;

/// The triangles of a terrain with their planes. Heights must be nonnegative.
pub fn pl_decompose(t: &PLTerrain) -> Result<Vec<TerrainTriangle>> {
    if t.has_negative_heights() {
        return Err(Error::Invalid("terrain has negative heights; split it by sign first".into()));
    }
    Ok(t.triangles().to_vec())
}

/// Weighted ε-approximation of a piecewise-linear terrain: every triangle's
/// solid is sampled by a 3D lattice at `eps/2`, the union is reduced by
/// merge and reduce at `eps/2`. The output keeps the terrain's total measure.
pub fn pl_terrain_approx(t: &PLTerrain, cfg: &ReduceConfig) -> Result<(WeightedPointSet, ApproxCertificate)> {
    cfg.validate()?;
    if cfg.family.dim() != 2 {
        return Err(Error::Dimension("terrain ranges live in the 2D base".into()));
    }
    let pieces = pl_decompose(t)?;
    let scale = t.base_box().volume().max(1.0);
    let solids: Vec<&TerrainTriangle> = pieces
        .iter()
        .filter(|p| crate::geom::integrate_linear(&p.poly, &p.height) > MEASURE_EPS * p.poly.area().max(scale))
        .collect();
    if solids.is_empty() {
        return Ok((WeightedPointSet::empty(2), ApproxCertificate::exact(cfg.eps)));
    }
    let half = cfg.eps / 2.0;
    let samples: Vec<WeightedPointSet> =
        solids.par_iter().map(|p| lattice_sample_solid(&p.poly, &p.height, half)).collect::<Result<_>>()?;
    let mut union = WeightedPointSet::empty(2);
    for s in &samples {
        union = union.union(s)?;
    }
    let (out, cert) = weighted_epsilon_approx(&union, &cfg.clone().with_eps(half)?)?;
    Ok((out, cert.after(half, cfg.eps)))
}

/// Height evaluator of a smooth terrain.
pub type HeightFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A smooth positive height over a box, with a bound on its curvature.
#[derive(Clone)]
pub struct SmoothTerrainSpec {
    pub base: AxisRect,
    pub height: HeightFn,
    /// Bound on the spectral radius of the Hessian of `height` over `base`.
    pub lambda_bound: f64,
    /// Lower bound on `height` over `base`.
    pub z_min: f64,
}

impl fmt::Debug for SmoothTerrainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothTerrainSpec")
            .field("base", &self.base)
            .field("lambda_bound", &self.lambda_bound)
            .field("z_min", &self.z_min)
            .finish_non_exhaustive()
    }
}

impl SmoothTerrainSpec {
    pub fn new(
        base: AxisRect,
        height: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        lambda_bound: f64,
        z_min: f64,
    ) -> Result<Self> {
        let spec = Self { base, height: Arc::new(height), lambda_bound, z_min };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base.dim() != 2 || !(self.base.volume() > 0.0) {
            return Err(Error::Invalid("smooth terrain needs a 2D base of positive area".into()));
        }
        if !(self.z_min > 0.0) || !self.z_min.is_finite() {
            return Err(Error::Invalid(format!("z_min {} must be positive", self.z_min)));
        }
        if !(self.lambda_bound >= 0.0) || !self.lambda_bound.is_finite() {
            return Err(Error::Invalid(format!("lambda bound {} must be nonnegative", self.lambda_bound)));
        }
        for (x, y) in grid(&self.base, PROBE_GRID) {
            let h = (self.height)(x, y);
            if !(h >= self.z_min * (1.0 - 1e-12)) {
                return Err(Error::Invalid(format!("height {h} at ({x}, {y}) is below z_min {}", self.z_min)));
            }
        }
        Ok(())
    }

    /// The same terrain with all heights multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Invalid(format!("scale {s} must be positive")));
        }
        let h = Arc::clone(&self.height);
        Ok(Self {
            base: self.base,
            height: Arc::new(move |x, y| s * h(x, y)),
            lambda_bound: s * self.lambda_bound,
            z_min: s * self.z_min,
        })
    }
}

/// `steps × steps` points spread over `r`, corners included.
fn grid(r: &AxisRect, steps: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    let last = (steps - 1) as f64;
    (0..steps).flat_map(move |j| {
        (0..steps).map(move |i| (r.lo()[0] + r.width(0) * i as f64 / last, r.lo()[1] + r.width(1) * j as f64 / last))
    })
}

/// Upper bound on the number of patches [`smooth_split`] emits.
pub fn smooth_patch_budget(spec: &SmoothTerrainSpec, eps: f64) -> usize {
    let d2 = spec.base.width(0).powi(2) + spec.base.width(1).powi(2);
    ((4.0 * spec.lambda_bound * d2 / (spec.z_min * eps)).ceil() as usize).max(1)
}

/// Linear lower approximations `h_ε` of a smooth terrain with
/// `0 ≤ h − h_ε ≤ eps·z_min` on every cell. Cells are halved along their
/// longer side until `λ·d²/2 ≤ z_min·eps`; each carries the tangent plane at
/// its centre lowered by `λ·d²/4`.
pub fn smooth_split(spec: &SmoothTerrainSpec, eps: f64) -> Result<Vec<LinearPatch>> {
    spec.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("eps {eps} outside (0, 1)")));
    }
    let limit = spec.z_min * eps;
    let mut cells = Vec::new();
    let mut stack = vec![spec.base];
    while let Some(c) = stack.pop() {
        let d = c.diameter();
        if spec.lambda_bound * d * d / 2.0 <= limit {
            cells.push(c);
            continue;
        }
        let (a, b) = c.split(if c.width(0) >= c.width(1) { 0 } else { 1 });
        stack.push(b);
        stack.push(a);
    }
    cells.par_iter().map(|c| lowered_tangent(spec, c, limit)).collect()
}

fn lowered_tangent(spec: &SmoothTerrainSpec, cell: &AxisRect, limit: f64) -> Result<LinearPatch> {
    let h = &spec.height;
    let [cx, cy] = [cell.center()[0], cell.center()[1]];
    let d = cell.diameter();
    // central differences: the gradient error is at most λ·step/2 per axis
    let step = 1e-6 * d;
    let gx = (h(cx + step, cy) - h(cx - step, cy)) / (2.0 * step);
    let gy = (h(cx, cy + step) - h(cx, cy - step)) / (2.0 * step);
    let drop = spec.lambda_bound * d * d / 4.0;
    let plane = Linear::new(gx, gy, h(cx, cy) - drop - gx * cx - gy * cy);
    let slack = 1e-9 * spec.z_min.max(limit);
    for (x, y) in grid(cell, VERIFY_GRID) {
        let gap = h(x, y) - plane.eval(x, y);
        if gap < -slack || gap > limit + slack {
            return Err(Error::Invalid(format!(
                "patch at ({x}, {y}) misses h by {gap}; lambda bound {} is too small",
                spec.lambda_bound
            )));
        }
    }
    LinearPatch::new(*cell, plane)
}

/// Smallest power of two `n` with `4(log₂ n + 2)/n ≤ eps`.
pub fn stretched_size(eps: f64) -> usize {
    let mut n = 1usize;
    while 4.0 * ((n.trailing_zeros() + 2) as f64) / n as f64 > eps {
        n *= 2;
    }
    n
}

/// `∬_{[x₀,x]×[y₀,y]} h` for a linear patch anchored at its lower corner.
fn patch_corner(p: &LinearPatch) -> impl Fn(f64, f64) -> f64 + '_ {
    let (x0, y0) = (p.rect().lo()[0], p.rect().lo()[1]);
    let h = *p.height();
    move |x, y| {
        let (dx, dy) = (x - x0, y - y0);
        h.alpha * (x * x - x0 * x0) / 2.0 * dy + h.beta * (y * y - y0 * y0) / 2.0 * dx + h.gamma * dx * dy
    }
}

/// Stretched sample of one patch with its measured box error (four times
/// the exact anchored-corner error), doubling until that is at most `eps`.
fn sample_patch(p: &LinearPatch, eps: f64) -> Result<(WeightedPointSet, f64)> {
    let mut n = stretched_size(eps);
    loop {
        let s = stretched_vdc(n, p)?;
        let err = 4.0 * corner_error(&s, p.rect(), patch_corner(p))?.max_error;
        if err <= eps || n >= MAX_PATCH_POINTS {
            return Ok((s, err));
        }
        n *= 2;
    }
}

/// Weighted ε-approximation of a smooth terrain for boxes in its base.
///
/// The budget goes half to the split (charged `e/(1−e)` for relative split
/// error `e`, since `h_ε ≥ (1−e)h` pointwise), a quarter to the stretched
/// samples of the patches, and whatever remains to merge and reduce.
pub fn smooth_terrain_approx(
    spec: &SmoothTerrainSpec,
    cfg: &ReduceConfig,
) -> Result<(WeightedPointSet, ApproxCertificate)> {
    cfg.validate()?;
    if cfg.family != RangeFamily::rect(2) {
        return Err(Error::Unsupported("smooth terrains are approximated for 2D boxes only".into()));
    }
    let eps = cfg.eps;
    let split_eps = (eps / 2.0) / (1.0 + eps / 2.0);
    let split_charge = split_eps / (1.0 - split_eps);
    let patches = smooth_split(spec, split_eps)?;
    let samples: Vec<(WeightedPointSet, f64)> =
        patches.par_iter().map(|p| sample_patch(p, eps / 4.0)).collect::<Result<_>>()?;
    let total: f64 = patches.iter().map(LinearPatch::measure).sum();
    let mut union = WeightedPointSet::empty(2);
    let mut sample_charge = 0.0;
    for ((s, err), p) in samples.iter().zip(&patches) {
        union = union.union(s)?;
        sample_charge += err * p.measure() / total;
    }
    let prior = split_charge + sample_charge;
    let rest = eps - prior;
    if !(rest > 0.0) {
        return Err(Error::Size(format!("stretched samples used {sample_charge} of the budget {eps}")));
    }
    let (out, cert) = weighted_epsilon_approx(&union, &cfg.clone().with_eps(rest)?)?;
    Ok((out, cert.after(prior, eps)))
}

/// Axis-aligned normal distribution in the plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianSpec {
    pub mean: [f64; 2],
    pub sigmas: [f64; 2],
}

impl GaussianSpec {
    pub fn new(mean: [f64; 2], sigmas: [f64; 2]) -> Result<Self> {
        let g = Self { mean, sigmas };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Invalid("non-finite mean".into()));
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Invalid(format!("sigmas {:?} must be positive", self.sigmas)));
        }
        Ok(())
    }

    /// Density at `(x, y)`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        phi((x - self.mean[0]) / self.sigmas[0]) / self.sigmas[0] * phi((y - self.mean[1]) / self.sigmas[1])
            / self.sigmas[1]
    }

    /// Probability of a closed box, from the error function.
    pub fn mass(&self, r: &AxisRect) -> f64 {
        (0..2)
            .map(|a| {
                let s = self.sigmas[a] * std::f64::consts::SQRT_2;
                let (u, v) = ((r.lo()[a] - self.mean[a]) / s, (r.hi()[a] - self.mean[a]) / s);
                interval_mass(u, v)
            })
            .product()
    }
}

fn phi(t: f64) -> f64 {
    (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `(erf(v) − erf(u))/2`, via `erfc` on the side that avoids cancellation.
fn interval_mass(u: f64, v: f64) -> f64 {
    if u >= 0.0 {
        (erfc(u) - erfc(v)) / 2.0
    } else if v <= 0.0 {
        (erfc(-v) - erfc(-u)) / 2.0
    } else {
        1.0 - (erfc(-u) + erfc(v)) / 2.0
    }
}

/// `σ·√(2 ln(1/(ε√(π/2))))`, the distance beyond which one tail of
/// `N(0, σ²)` is below `ε/4`.
pub fn truncation_half_width(sigma: f64, eps: f64) -> f64 {
    sigma * (2.0 * (1.0 / (eps * (std::f64::consts::PI / 2.0).sqrt())).ln()).max(0.0).sqrt()
}

/// `1 − Φ(t)` for the standard normal.
pub fn upper_tail(t: f64) -> f64 {
    erfc(t / std::f64::consts::SQRT_2) / 2.0
}

/// Box around the mean holding mass at least `1 − eps/2`: per axis the half
/// width is [`truncation_half_width`] at `eps/2`, widened to the exact
/// `eps/8` tail quantile where that closed form falls short.
pub fn gaussian_truncate(g: &GaussianSpec, eps: f64) -> Result<AxisRect> {
    g.validate()?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Invalid(format!("eps {eps} outside (0, 0.5)")));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for a in 0..2 {
        let mut t = truncation_half_width(1.0, eps / 2.0);
        if upper_tail(t) > eps / 8.0 {
            t = std_normal.inverse_cdf(1.0 - eps / 8.0);
        }
        let w = g.sigmas[a] * t;
        lo[a] = g.mean[a] - w;
        hi[a] = g.mean[a] + w;
    }
    let r = AxisRect::new(&lo, &hi)?;
    let mass = g.mass(&r);
    if mass < 1.0 - eps / 2.0 {
        return Err(Error::Invalid(format!("truncated mass {mass} below {}", 1.0 - eps / 2.0)));
    }
    Ok(r)
}

/// Density at the corners of `gaussian_truncate(g, eps)` and a bound on the
/// spectral radius of its Hessian, as a smooth terrain over that box.
pub fn gaussian_smooth_spec(g: &GaussianSpec, eps: f64) -> Result<SmoothTerrainSpec> {
    let base = gaussian_truncate(g, eps)?;
    let z_min = g.density(base.lo()[0], base.lo()[1]);
    let [sx, sy] = g.sigmas;
    // |φ''| peaks at 0 with φ(0), |φ'| at ±1 with φ(1); Gershgorin on the 2×2 Hessian
    let (p0, p1) = (phi(0.0), phi(1.0));
    let fxx = p0 / sx.powi(3) * p0 / sy;
    let fyy = p0 / sy.powi(3) * p0 / sx;
    let fxy = p1 / (sx * sx) * p1 / (sy * sy);
    let lambda = fxx.max(fyy) + fxy;
    let g = *g;
    SmoothTerrainSpec::new(base, move |x, y| g.density(x, y), lambda, z_min)
}

/// Weighted ε-approximation of a Gaussian for boxes.
///
/// The distribution is truncated with `eps/2` (charged `f/(1−f)` for lost
/// mass `f`); the truncated product density is sampled by a Van der Corput
/// set pushed through its per-axis inverse distribution functions, which maps
/// boxes to boxes and keeps the `4(log₂ n + 2)/n` box bound; merge and reduce
/// spends what remains. The output carries the truncated mass.
pub fn gaussian_approx(g: &GaussianSpec, eps: f64) -> Result<(WeightedPointSet, ApproxCertificate)> {
    g.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("eps {eps} outside (0, 1)")));
    }
    let base = gaussian_truncate(g, eps / 2.0)?;
    let mass = g.mass(&base);
    let lost = 1.0 - mass;
    let trunc_charge = lost / (1.0 - lost);
    let n = stretched_size(eps / 4.0);
    let vdc_charge = 4.0 * ((n.trailing_zeros() + 2) as f64) / n as f64;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let inv = |a: usize, u: f64| {
        let t = (base.hi()[a] - g.mean[a]) / g.sigmas[a];
        let (c0, c1) = (std_normal.cdf(-t), std_normal.cdf(t));
        let z = std_normal.inverse_cdf(c0 + u * (c1 - c0)).clamp(-t, t);
        g.mean[a] + g.sigmas[a] * z
    };
    let pts: Vec<Point> = (0..n)
        .map(|i| Ok(Point::xy(inv(0, i as f64 / n as f64), inv(1, bit_reversal(i, n)?))))
        .collect::<Result<_>>()?;
    let sample = WeightedPointSet::new(2, pts, vec![mass / n as f64; n])?;
    let prior = trunc_charge + vdc_charge;
    let cfg = ReduceConfig::new(eps - prior, RangeFamily::rect(2))?;
    let (out, cert) = epsilon_approx(&sample, &cfg)?;
    Ok((out, cert.after(prior, eps)))
}

//! Quantile-region geometry.
//!
//! On the standardised scale the basic set `S` is the region outside the
//! curve of radius `1/q*(w)` at pseudo-polar angle `w`. Its exponent measure
//! `ν(S)` fixes how far `S` must be pushed out to carry probability `p`; the
//! marginal GEV maps then carry the inflated set to data units.

use serde::{Deserialize, Serialize};

use crate::margins::{extreme_quantile_unchecked, GevParams};
use crate::quadrature::Quadrature;
use crate::samplers::PosteriorChain;
use crate::stats;
use crate::{Error, Result};

pub const GRID_POINTS: usize = 199;
pub const GRID_LO: f64 = 0.005;
pub const GRID_HI: f64 = 0.995;
/// Minimum number of (thinned) draws for a posterior summary.
pub const MIN_DRAWS: usize = 100;

/// The 199 equally spaced interior angles on `[0.005, 0.995]`.
pub fn default_w_grid() -> Vec<f64> {
    let step = (GRID_HI - GRID_LO) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| GRID_LO + i as f64 * step).collect()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("angle grid"));
    }
    if let Some(w) = grid.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
        return Err(Error::invalid(format!("grid angle {w} outside (0, 1)")));
    }
    Ok(())
}

/// Exceedance probability with the tail fractions used for inflation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileTarget {
    pub p: f64,
    /// Exceedance counts of the two margins.
    pub k: [usize; 2],
    pub n: usize,
}

impl QuantileTarget {
    pub fn new(p: f64, k: usize, n: usize) -> Result<Self> {
        Self::per_margin(p, [k, k], n)
    }

    pub fn per_margin(p: f64, k: [usize; 2], n: usize) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
        }
        if n == 0 || k.iter().any(|&ki| ki == 0 || ki >= n) {
            return Err(Error::invalid(format!("need 0 < k < n, got k = {k:?}, n = {n}")));
        }
        Ok(Self { p, k, n })
    }

    pub fn k_over_n(&self, margin: usize) -> f64 {
        self.k[margin] as f64 / self.n as f64
    }
}

/// `q*(w) = q(w, 1-w)^{-1/(1+γ₁+γ₂)}` with
/// `q(w, 1-w) = 2 w^{1-γ₁} (1-w)^{1-γ₂} h(w) / (γ₁γ₂)`.
///
/// `h = 0` gives `+∞` (a boundary of radius zero).
pub fn angular_basic_density(w: f64, h: f64, gamma1: f64, gamma2: f64) -> f64 {
    angular_basic_density_split(w, 1.0 - w, h, gamma1, gamma2)
}

/// [`angular_basic_density`] with `1 - w` supplied separately.
pub fn angular_basic_density_split(w: f64, omw: f64, h: f64, gamma1: f64, gamma2: f64) -> f64 {
    let q = 2.0 * w.powf(1.0 - gamma1) * omw.powf(1.0 - gamma2) * h / (gamma1 * gamma2);
    q.powf(-1.0 / (1.0 + gamma1 + gamma2))
}

/// `q*(w) h(w)`, written so that it tends to 0 rather than NaN where `h` vanishes.
fn q_star_times_h(w: f64, omw: f64, h: f64, gamma1: f64, gamma2: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    let e = 1.0 + gamma1 + gamma2;
    let base = 2.0 * w.powf(1.0 - gamma1) * omw.powf(1.0 - gamma2) / (gamma1 * gamma2);
    h.powf((gamma1 + gamma2) / e) * base.powf(-1.0 / e)
}

/// Exponent measure of the basic set, `ν(S) = 2 ∫ q*(w) h(w) dw`.
///
/// `h` receives `(w, 1 - w)`; only the continuous part of the angular measure
/// enters, point masses at the endpoints are ignored.
pub fn nu_s<H: Fn(f64, f64) -> f64>(h: H, gamma1: f64, gamma2: f64, quad: &Quadrature) -> Result<f64> {
    let est = quad.integrate_unit(|w, omw| 2.0 * q_star_times_h(w, omw, h(w, omw), gamma1, gamma2))?;
    if !(est.value > 0.0) {
        return Err(Error::Quadrature(format!(
            "degenerate basic set: ν(S) = {} (angular density vanishes on (0, 1))",
            est.value
        )));
    }
    Ok(est.value)
}

/// `2 ∫ h(w) / q*(w) dw`, the radius-weighted mass of `h`. Kept as a
/// quadrature cross-check; it is not the exponent measure of `S`.
pub fn radius_weighted_mass<H: Fn(f64, f64) -> f64>(
    h: H,
    gamma1: f64,
    gamma2: f64,
    quad: &Quadrature,
) -> Result<f64> {
    Ok(quad
        .integrate_unit(|w, omw| {
            let hv = h(w, omw);
            if hv <= 0.0 {
                0.0
            } else {
                2.0 * hv / angular_basic_density_split(w, omw, hv, gamma1, gamma2)
            }
        })?
        .value)
}

/// Pointwise credible band of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
    pub level: f64,
}

/// Boundary of `S` (standardised scale) or of a quantile region (data scale)
/// at each grid angle, with an optional pointwise band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCurve {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub band: Option<Band>,
    /// Exceedance probability for data-scale regions; `None` for `S`.
    pub p: Option<f64>,
}

/// One CSV row of a [`RegionCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub w: f64,
    pub x_mean: f64,
    pub y_mean: f64,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub y_lo: Option<f64>,
    pub y_hi: Option<f64>,
    pub p: Option<f64>,
    pub level: Option<f64>,
}

impl RegionCurve {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn rows(&self) -> Vec<RegionRow> {
        (0..self.len())
            .map(|i| RegionRow {
                w: self.w[i],
                x_mean: self.x[i],
                y_mean: self.y[i],
                x_lo: self.band.as_ref().map(|b| b.x_lo[i]),
                x_hi: self.band.as_ref().map(|b| b.x_hi[i]),
                y_lo: self.band.as_ref().map(|b| b.y_lo[i]),
                y_hi: self.band.as_ref().map(|b| b.y_hi[i]),
                p: self.p,
                level: self.band.as_ref().map(|b| b.level),
            })
            .collect()
    }

    /// Fraction of grid angles at which `other`'s point lies inside this
    /// curve's band in both coordinates.
    pub fn band_coverage(&self, other: &RegionCurve) -> Result<f64> {
        let band = self
            .band
            .as_ref()
            .ok_or_else(|| Error::invalid("curve has no credible band"))?;
        if other.len() != self.len() {
            return Err(Error::invalid("curves are on different grids"));
        }
        let inside = (0..self.len())
            .filter(|&i| {
                (band.x_lo[i]..=band.x_hi[i]).contains(&other.x[i])
                    && (band.y_lo[i]..=band.y_hi[i]).contains(&other.y[i])
            })
            .count();
        Ok(inside as f64 / self.len() as f64)
    }
}

/// Boundary of `S`: `(w, 1-w) / q*(w)` at each grid angle. `h` receives
/// `(w, 1 - w)`.
pub fn basic_set_boundary<H: Fn(f64, f64) -> f64>(
    w_grid: &[f64],
    h: H,
    gamma1: f64,
    gamma2: f64,
) -> Result<RegionCurve> {
    validate_grid(w_grid)?;
    let mut x = Vec::with_capacity(w_grid.len());
    let mut y = Vec::with_capacity(w_grid.len());
    for &w in w_grid {
        let omw = 1.0 - w;
        let radius = 1.0 / angular_basic_density_split(w, omw, h(w, omw), gamma1, gamma2);
        x.push(w * radius);
        y.push(omw * radius);
    }
    Ok(RegionCurve {
        w: w_grid.to_vec(),
        x,
        y,
        band: None,
        p: None,
    })
}

/// Map a point of `S` to data units:
/// `yᵢ = μᵢ + σᵢ ((kᵢ ν(S) xᵢ / (n p))^{γᵢ} - 1) / γᵢ`.
pub fn inflate_point(target: &QuantileTarget, theta: &[GevParams; 2], nu_s: f64, x: [f64; 2]) -> [f64; 2] {
    let map = |i: usize| extreme_quantile_unchecked(target.p / (nu_s * x[i]), &theta[i], target.k_over_n(i));
    [map(0), map(1)]
}

/// Data-scale boundary of the extreme quantile region with probability
/// `target.p`.
pub fn quantile_region(
    target: &QuantileTarget,
    theta: &[GevParams; 2],
    nu_s: f64,
    boundary: &RegionCurve,
) -> Result<RegionCurve> {
    if !(nu_s > 0.0 && nu_s.is_finite()) {
        return Err(Error::invalid(format!("ν(S) must be positive, got {nu_s}")));
    }
    let (x, y) = boundary
        .x
        .iter()
        .zip(&boundary.y)
        .map(|(&a, &b)| {
            let [ya, yb] = inflate_point(target, theta, nu_s, [a, b]);
            (ya, yb)
        })
        .unzip();
    Ok(RegionCurve {
        w: boundary.w.clone(),
        x,
        y,
        band: None,
        p: Some(target.p),
    })
}

/// Everything on the grid for one dependence structure and pair of margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    /// `1/q*(w)`, the radius of the boundary of `S`.
    pub inverse_q_star: Vec<f64>,
    pub basic_set: RegionCurve,
    pub nu_s: f64,
    pub regions: Vec<RegionCurve>,
}

/// Compute `1/q*`, `S`, `ν(S)` and one region per target.
pub fn region_set<H: Fn(f64, f64) -> f64>(
    w_grid: &[f64],
    h: H,
    theta: &[GevParams; 2],
    targets: &[QuantileTarget],
    quad: &Quadrature,
) -> Result<RegionSet> {
    let (g1, g2) = (theta[0].gamma, theta[1].gamma);
    let basic_set = basic_set_boundary(w_grid, &h, g1, g2)?;
    let inverse_q_star = basic_set.x.iter().zip(&basic_set.y).map(|(a, b)| a + b).collect();
    let nu = nu_s(&h, g1, g2, quad)?;
    let regions = targets
        .iter()
        .map(|t| quantile_region(t, theta, nu, &basic_set))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionSet {
        inverse_q_star,
        basic_set,
        nu_s: nu,
        regions,
    })
}

/// Scalar curve over the grid with a pointwise band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBand {
    pub w: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub level: f64,
}

impl ScalarBand {
    /// Fraction of grid angles at which `truth` lies inside the band.
    pub fn coverage(&self, truth: &[f64]) -> f64 {
        let inside = truth
            .iter()
            .enumerate()
            .filter(|(i, v)| (self.lo[*i]..=self.hi[*i]).contains(*v))
            .count();
        inside as f64 / self.w.len().max(1) as f64
    }
}

/// Posterior mean and central interval of a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl Interval {
    pub fn from_draws(xs: &[f64], level: f64) -> Self {
        let (lower, upper) = stats::central_interval(xs, level);
        Self {
            mean: stats::mean(xs),
            lower,
            upper,
            level,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lower..=self.upper).contains(&v)
    }
}

/// Settings for posterior summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryOptions {
    /// Credibility of the pointwise bands.
    pub level: f64,
    /// Keep every `thin`-th retained draw.
    pub thin: usize,
    pub w_grid: Vec<f64>,
    /// Covariate value at which regression margins are evaluated.
    pub covariate: Option<f64>,
    pub rel_tol: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            level: 0.9,
            thin: 5,
            w_grid: default_w_grid(),
            covariate: None,
            rel_tol: 1e-8,
        }
    }
}

impl SummaryOptions {
    fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!("credibility level must lie in (0, 1), got {}", self.level)));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning interval must be at least 1"));
        }
        validate_grid(&self.w_grid)
    }
}

/// Pointwise posterior summary of the region objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub inverse_q_star: ScalarBand,
    pub basic_set: RegionCurve,
    pub regions: Vec<RegionCurve>,
    pub nu_s: Interval,
    /// Posterior means of the endpoint masses `(p₀, p₁)`; reported only.
    pub endpoint_masses: [f64; 2],
    pub draws_used: usize,
}

fn thinned<T>(xs: &[T], thin: usize) -> impl Iterator<Item = &T> {
    xs.iter().step_by(thin)
}

fn margin_at(chain: &PosteriorChain, draw: &crate::samplers::Draw, i: usize, covariate: Option<f64>) -> Result<GevParams> {
    let m = &draw.margins[i];
    match (chain.regression, covariate) {
        (true, None) => Err(Error::invalid(
            "regression chain: a covariate value is required to evaluate the margins",
        )),
        (_, Some(z)) => Ok(m.at(z)),
        (false, None) => Ok(m.intercept_only()),
    }
}

fn band_of(columns: &[Vec<f64>], level: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let tail = 0.5 * (1.0 - level);
    let mut mean = Vec::with_capacity(columns.len());
    let mut lo = Vec::with_capacity(columns.len());
    let mut hi = Vec::with_capacity(columns.len());
    for col in columns {
        let sorted = stats::sorted_copy(col);
        mean.push(stats::mean(col));
        lo.push(stats::quantile_sorted(&sorted, tail));
        hi.push(stats::quantile_sorted(&sorted, 1.0 - tail));
    }
    (mean, lo, hi)
}

/// Per-draw `h → q* → ν(S) → S → Q̃ₙ`, then pointwise means and central
/// bands over the retained, thinned draws.
pub fn summarize_posterior_regions(
    chain: &PosteriorChain,
    targets: &[QuantileTarget],
    options: &SummaryOptions,
) -> Result<RegionSummary> {
    options.validate()?;
    let draws: Vec<_> = thinned(chain.retained(), options.thin).collect();
    if draws.len() < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: draws.len(),
        });
    }
    let grid = &options.w_grid;
    let g = grid.len();
    let quad = Quadrature::with_rel_tol(options.rel_tol);
    // Column-major per grid point: columns[i][d].
    let mut radius = vec![Vec::with_capacity(draws.len()); g];
    let mut sx = vec![Vec::with_capacity(draws.len()); g];
    let mut sy = vec![Vec::with_capacity(draws.len()); g];
    let mut rx = vec![vec![Vec::with_capacity(draws.len()); g]; targets.len()];
    let mut ry = vec![vec![Vec::with_capacity(draws.len()); g]; targets.len()];
    let mut nus = Vec::with_capacity(draws.len());
    let mut masses = [0.0; 2];
    for draw in &draws {
        let dep = draw
            .dependence()
            .ok_or_else(|| Error::invalid("region summaries need a bivariate chain"))??;
        let theta = [
            margin_at(chain, draw, 0, options.covariate)?,
            margin_at(chain, draw, 1, options.covariate)?,
        ];
        let set = region_set(grid, |w, _| dep.angular_density(w), &theta, targets, &quad)?;
        for i in 0..g {
            radius[i].push(set.inverse_q_star[i]);
            sx[i].push(set.basic_set.x[i]);
            sy[i].push(set.basic_set.y[i]);
            for (t, region) in set.regions.iter().enumerate() {
                rx[t][i].push(region.x[i]);
                ry[t][i].push(region.y[i]);
            }
        }
        nus.push(set.nu_s);
        masses[0] += dep.eta().p0();
        masses[1] += dep.eta().p1();
    }
    let level = options.level;
    let curve = |xs: &[Vec<f64>], ys: &[Vec<f64>], p: Option<f64>| {
        let (x, x_lo, x_hi) = band_of(xs, level);
        let (y, y_lo, y_hi) = band_of(ys, level);
        RegionCurve {
            w: grid.clone(),
            x,
            y,
            band: Some(Band {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
                level,
            }),
            p,
        }
    };
    let (mean, lo, hi) = band_of(&radius, level);
    let count = draws.len() as f64;
    Ok(RegionSummary {
        inverse_q_star: ScalarBand {
            w: grid.clone(),
            mean,
            lo,
            hi,
            level,
        },
        basic_set: curve(&sx, &sy, None),
        regions: targets
            .iter()
            .enumerate()
            .map(|(t, target)| curve(&rx[t], &ry[t], Some(target.p)))
            .collect(),
        nu_s: Interval::from_draws(&nus, level),
        endpoint_masses: [masses[0] / count, masses[1] / count],
        draws_used: draws.len(),
    })
}

/// Posterior summary of one extreme quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub p: f64,
    /// Data-scale summary.
    pub value: Interval,
    /// Summary of `log Q`; `None` when some draw is not positive.
    pub log_value: Option<Interval>,
    /// Histogram of `log Q` (or of `Q` when `log_value` is `None`).
    pub histogram_edges: Vec<f64>,
    pub histogram_density: Vec<f64>,
    /// `p < k/n`: the quantile lies beyond the threshold.
    pub extrapolation: bool,
}

/// Apply the extreme quantile formula to every retained draw of `margin`.
pub fn quantile_draws(
    chain: &PosteriorChain,
    margin: usize,
    p: f64,
    covariate: Option<f64>,
) -> Result<Vec<f64>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    if margin >= chain.k.len() {
        return Err(Error::invalid(format!("margin index {margin} out of range")));
    }
    let kn = chain.k_over_n(margin);
    chain
        .retained()
        .iter()
        .map(|d| Ok(extreme_quantile_unchecked(p, &margin_at(chain, d, margin, covariate)?, kn)))
        .collect()
}

/// Posterior mean, central interval and histogram of `Q(p)` for each `p`.
pub fn summarize_posterior_quantiles(
    chain: &PosteriorChain,
    margin: usize,
    ps: &[f64],
    covariate: Option<f64>,
    level: f64,
    bins: usize,
) -> Result<Vec<QuantileSummary>> {
    let got = chain.retained().len();
    if got < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got,
        });
    }
    if !(level > 0.0 && level < 1.0) || bins == 0 {
        return Err(Error::invalid("need a level in (0, 1) and at least one bin"));
    }
    let kn = chain.k_over_n(margin);
    ps.iter()
        .map(|&p| {
            let q = quantile_draws(chain, margin, p, covariate)?;
            if p >= kn {
                log::warn!("p = {p} is not below k/n = {kn}: this is interpolation, not extrapolation");
            }
            let log_value = if q.iter().all(|&v| v > 0.0) {
                let logs: Vec<f64> = q.iter().map(|v| v.ln()).collect();
                Some((Interval::from_draws(&logs, level), logs))
            } else {
                None
            };
            let hist_src = log_value.as_ref().map_or(&q, |(_, l)| l);
            let sorted = stats::sorted_copy(hist_src);
            let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
            let (edges, dens) = if hi > lo {
                stats::histogram(hist_src, lo, hi, bins)
            } else {
                (vec![lo, hi], vec![f64::INFINITY])
            };
            Ok(QuantileSummary {
                p,
                value: Interval::from_draws(&q, level),
                log_value: log_value.map(|(i, _)| i),
                histogram_edges: edges,
                histogram_density: dens,
                extrapolation: p < kn,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{Dependence, EtaCoefficients};
    use crate::margins::{marginal_transform, MarginalModel};
    use crate::rng_from_seed;
    use crate::samplers::Draw;
    use crate::testbeds::Bivariate;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn cauchy_h(w: f64, omw: f64) -> f64 {
        Bivariate::Cauchy.angular_density_split(w, omw)
    }

    #[test]
    fn grid_shape() {
        let g = default_w_grid();
        assert_eq!(g.len(), 199);
        assert!((g[0] - 0.005).abs() < 1e-15 && (g[198] - 0.995).abs() < 1e-12);
        assert!((g[99] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn q_star_values() {
        assert!((angular_basic_density(0.5, SQRT_2, 1.0, 1.0) - 0.5f64.sqrt()).abs() < 1e-14);
        for w in [0.1, 0.5, 0.9] {
            assert!((angular_basic_density(w, 0.5, 1.0, 1.0) - 1.0).abs() < 1e-14);
        }
        assert!(angular_basic_density(0.3, 0.0, 1.0, 1.0).is_infinite());
    }

    #[test]
    fn cauchy_exponent_measure() {
        let quad = Quadrature::with_rel_tol(1e-10);
        let nu = nu_s(cauchy_h, 1.0, 1.0, &quad).unwrap();
        assert!((nu - FRAC_PI_2).abs() < 1e-8, "{nu}");
        // Analytic: ∫ (w² + (1-w)²)⁻² dw = 1 + π/2.
        let alt = radius_weighted_mass(cauchy_h, 1.0, 1.0, &quad).unwrap();
        assert!((alt - (1.0 + FRAC_PI_2)).abs() < 1e-8, "{alt}");
    }

    #[test]
    fn degenerate_angular_density_is_flagged() {
        let err = nu_s(|_, _| 0.0, 1.0, 1.0, &Quadrature::default()).unwrap_err();
        assert!(matches!(err, Error::Quadrature(_)));
    }

    #[test]
    fn exponent_measure_stable_under_refinement() {
        for b in [
            Bivariate::Cauchy,
            Bivariate::truncated_t(),
            Bivariate::Asymmetric,
            Bivariate::Clover,
        ] {
            let [g1, g2] = b.tail_indices();
            let h = |w, omw| b.angular_density_split(w, omw);
            let coarse = nu_s(h, g1, g2, &Quadrature::with_rel_tol(1e-8)).unwrap();
            let fine = nu_s(
                h,
                g1,
                g2,
                &Quadrature {
                    max_intervals: 20_000,
                    ..Quadrature::with_rel_tol(1e-12)
                },
            )
            .unwrap();
            assert!((coarse - fine).abs() < 1e-6, "{}: {coarse} vs {fine}", b.name());
        }
    }

    #[test]
    fn cauchy_boundary_is_unit_circle() {
        let s = basic_set_boundary(&default_w_grid(), cauchy_h, 1.0, 1.0).unwrap();
        assert!((s.x[99] - SQRT_2 / 2.0).abs() < 1e-12 && (s.y[99] - SQRT_2 / 2.0).abs() < 1e-12);
        for i in 0..s.len() {
            assert!((s.x[i].hypot(s.y[i]) - 1.0).abs() < 1e-12);
            // Symmetric h ⇒ boundary symmetric under swapping coordinates.
            assert!((s.x[i] - s.y[198 - i]).abs() < 1e-12);
        }
        assert!(basic_set_boundary(&[0.0, 0.5], cauchy_h, 1.0, 1.0).is_err());
    }

    #[test]
    fn boundary_points_solve_q_equals_one() {
        // Homogeneity: q(r w, r(1-w)) = q(w, 1-w) / r^{1+γ₁+γ₂}.
        for b in [Bivariate::truncated_t(), Bivariate::Asymmetric, Bivariate::Clover] {
            let [g1, g2] = b.tail_indices();
            let s = basic_set_boundary(&default_w_grid(), |w, o| b.angular_density_split(w, o), g1, g2).unwrap();
            for i in 0..s.len() {
                let r = s.x[i] + s.y[i];
                let w = s.x[i] / r;
                let q_unit = 2.0 * w.powf(1.0 - g1) * (1.0 - w).powf(1.0 - g2) * b.angular_density(w) / (g1 * g2);
                let q = q_unit / r.powf(1.0 + g1 + g2);
                assert!((q - 1.0).abs() < 1e-8, "{} at w = {w}: {q}", b.name());
            }
        }
    }

    fn random_theta(rng: &mut impl Rng) -> [GevParams; 2] {
        let mut gen = || {
            GevParams::new(
                10.0 * rng.random::<f64>() - 5.0,
                0.1 + 5.0 * rng.random::<f64>(),
                0.05 + 1.5 * rng.random::<f64>(),
            )
            .unwrap()
        };
        [gen(), gen()]
    }

    proptest! {
        #[test]
        fn pullback_identity(seed in 0u64..1000, x1 in 1e-3f64..1e3, x2 in 1e-3f64..1e3,
                             nu in 0.5f64..2.0, lp in -9.0f64..-3.0) {
            let theta = random_theta(&mut rng_from_seed(seed));
            let target = QuantileTarget::per_margin(lp.exp(), [150, 120], 1500).unwrap();
            let y = inflate_point(&target, &theta, nu, [x1, x2]);
            for (i, xi) in [x1, x2].into_iter().enumerate() {
                let z = marginal_transform(y[i], &theta[i], target.k_over_n(i)).unwrap();
                prop_assert!((z * nu * xi / target.p - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn smaller_probability_gives_larger_region(seed in 0u64..1000, p in 1e-5f64..1e-2, shrink in 0.01f64..0.99) {
            let theta = random_theta(&mut rng_from_seed(seed));
            let s = basic_set_boundary(&default_w_grid(), cauchy_h, theta[0].gamma, theta[1].gamma).unwrap();
            let big = quantile_region(&QuantileTarget::new(p * shrink, 150, 1500).unwrap(), &theta, 1.3, &s).unwrap();
            let small = quantile_region(&QuantileTarget::new(p, 150, 1500).unwrap(), &theta, 1.3, &s).unwrap();
            for i in 0..s.len() {
                prop_assert!(big.x[i] > small.x[i] && big.y[i] > small.y[i]);
            }
        }
    }

    #[test]
    fn unit_ratio_maps_to_location() {
        let theta = [GevParams::new(3.0, 2.0, 0.5).unwrap(), GevParams::new(-1.0, 1.0, 1.0).unwrap()];
        let target = QuantileTarget::new(0.001, 100, 1000).unwrap();
        // k ν x = n p ⇔ x = n p / (k ν).
        let nu = 1.7;
        let x = 1000.0 * 0.001 / (100.0 * nu);
        let y = inflate_point(&target, &theta, nu, [x, x]);
        assert!((y[0] - 3.0).abs() < 1e-12 && (y[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cauchy_regions_nest() {
        let b = Bivariate::Cauchy;
        let theta = b.true_margins(0.1).unwrap();
        let targets: Vec<_> = [1.0 / 750.0, 1.0 / 1500.0, 1.0 / 3000.0]
            .iter()
            .map(|&p| QuantileTarget::new(p, 150, 1500).unwrap())
            .collect();
        let set = region_set(&default_w_grid(), cauchy_h, &theta, &targets, &Quadrature::default()).unwrap();
        for pair in set.regions.windows(2) {
            for i in 0..pair[0].len() {
                assert!(pair[1].x[i] > pair[0].x[i] && pair[1].y[i] > pair[0].y[i]);
            }
        }
    }

    #[test]
    fn cauchy_region_has_target_probability() {
        // With the true margins the inflated Cauchy region is the disc
        // complement {y₁² + y₂² ≥ c²}; its exact probability is (1 + c²)^{-1/2},
        // and it must be close to p.
        let b = Bivariate::Cauchy;
        let theta = b.true_margins(0.1).unwrap();
        let p = 1.0 / 750.0;
        let target = QuantileTarget::new(p, 150, 1500).unwrap();
        let set = region_set(&[0.5], cauchy_h, &theta, &[target], &Quadrature::default()).unwrap();
        let c = set.regions[0].x[0].hypot(set.regions[0].y[0]);
        let exact = 1.0 / (1.0 + c * c).sqrt();
        assert!((exact / p - 1.0).abs() < 0.02, "{exact} vs {p}");

        let n = 2_000_000;
        let (y1, y2) = b.sample(n, &mut rng_from_seed(9)).unwrap();
        let quad = Quadrature::default();
        let nu = nu_s(cauchy_h, 1.0, 1.0, &quad).unwrap();
        let hits = y1
            .iter()
            .zip(&y2)
            .filter(|(a, b)| {
                // Standardise, pull back to S and test membership via q*.
                let x: Vec<f64> = [**a, **b]
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| p / (nu * marginal_transform(y, &theta[i], 0.1).unwrap_or(f64::INFINITY)))
                    .collect();
                let r = x[0] + x[1];
                r * Bivariate::Cauchy.q_star(x[0] / r) >= 1.0
            })
            .count() as f64
            / n as f64;
        let se = (exact / n as f64).sqrt();
        assert!((hits - exact).abs() < 4.0 * se, "{hits} vs {exact}");
    }

    fn constant_chain(draws: usize, gamma: f64) -> PosteriorChain {
        let margin = MarginalModel::constant(GevParams::new(5.0, 2.0, gamma).unwrap());
        let draw = Draw {
            margins: vec![margin, margin],
            eta: Some(vec![0.0, 0.25, 0.75, 1.0]),
            accepted: vec![true; 3],
            acceptance_prob: vec![0.3; 2],
            tau: vec![1.0; 2],
            log_likelihood: -1.0,
        };
        PosteriorChain {
            draws: vec![draw; draws],
            burn_in: 0,
            regression: false,
            thresholds: vec![5.0, 5.0],
            k: vec![150, 150],
            n: 1500,
        }
    }

    #[test]
    fn degenerate_chain_collapses_bands() {
        let chain = constant_chain(600, 0.7);
        let targets = [QuantileTarget::new(1.0 / 750.0, 150, 1500).unwrap()];
        let s = summarize_posterior_regions(&chain, &targets, &SummaryOptions::default()).unwrap();
        assert_eq!(s.draws_used, 120);
        let band = s.regions[0].band.as_ref().unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        for i in 0..s.regions[0].len() {
            assert!(close(band.x_lo[i], s.regions[0].x[i]));
            assert_eq!(band.x_hi[i], band.x_lo[i]);
            assert!(close(band.y_hi[i], s.regions[0].y[i]));
        }
        assert_eq!(s.nu_s.lower, s.nu_s.upper);
        let q = summarize_posterior_quantiles(&chain, 0, &[0.001], None, 0.95, 20).unwrap();
        assert_eq!(q[0].value.lower, q[0].value.upper);
        assert!(q[0].extrapolation);
    }

    #[test]
    fn too_few_draws_is_an_error() {
        let chain = constant_chain(400, 0.7);
        let targets = [QuantileTarget::new(0.001, 150, 1500).unwrap()];
        let err = summarize_posterior_regions(&chain, &targets, &SummaryOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewDraws { needed: 100, got: 80 }));
        assert!(summarize_posterior_quantiles(&constant_chain(50, 0.5), 0, &[0.001], None, 0.95, 10).is_err());
    }

    fn varied_chain(rng: &mut impl Rng) -> PosteriorChain {
        let mut chain = constant_chain(300, 0.7);
        for d in chain.draws.iter_mut() {
            for m in d.margins.iter_mut() {
                m.gamma = 0.5 + 0.4 * rng.random::<f64>();
                m.sigma = 1.0 + rng.random::<f64>();
                m.beta[0] = 4.0 + rng.random::<f64>();
            }
            let a: f64 = 0.05 + 0.4 * rng.random::<f64>();
            d.eta = Some(vec![0.0, a, 1.0 - a, 1.0]);
        }
        chain
    }

    #[test]
    fn band_ordering_and_permutation_invariance() {
        let mut rng = rng_from_seed(2);
        let chain = varied_chain(&mut rng);
        let targets = [QuantileTarget::new(0.001, 150, 1500).unwrap()];
        let opts = SummaryOptions {
            thin: 1,
            ..SummaryOptions::default()
        };
        let s = summarize_posterior_regions(&chain, &targets, &opts).unwrap();
        let band = s.regions[0].band.as_ref().unwrap();
        for i in 0..s.regions[0].len() {
            assert!(band.x_lo[i] <= band.x_hi[i] && band.y_lo[i] <= band.y_hi[i]);
        }
        for i in 0..s.inverse_q_star.w.len() {
            assert!(s.inverse_q_star.lo[i] <= s.inverse_q_star.hi[i]);
            assert!(s.inverse_q_star.mean[i] > 0.0);
        }
        let mut reversed = chain.clone();
        reversed.draws.reverse();
        let r = summarize_posterior_regions(&reversed, &targets, &opts).unwrap();
        for i in 0..s.regions[0].len() {
            assert!((r.regions[0].x[i] / s.regions[0].x[i] - 1.0).abs() < 1e-12);
            assert_eq!(r.regions[0].band.as_ref().unwrap().x_hi[i], band.x_hi[i]);
        }
    }

    #[test]
    fn regression_chain_needs_covariate() {
        let mut chain = constant_chain(200, 0.5);
        chain.regression = true;
        let err = quantile_draws(&chain, 0, 0.001, None).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        let q = quantile_draws(&chain, 0, 0.001, Some(2.0)).unwrap();
        assert_eq!(q.len(), 200);
    }

    #[test]
    fn rows_carry_band_columns() {
        let chain = constant_chain(500, 0.7);
        let targets = [QuantileTarget::new(0.002, 150, 1500).unwrap()];
        let s = summarize_posterior_regions(&chain, &targets, &SummaryOptions::default()).unwrap();
        let rows = s.regions[0].rows();
        assert_eq!(rows.len(), 199);
        assert_eq!(rows[0].p, Some(0.002));
        assert_eq!(rows[0].level, Some(0.9));
        let plain = basic_set_boundary(&[0.5], cauchy_h, 1.0, 1.0).unwrap().rows();
        assert!(plain[0].x_lo.is_none() && plain[0].p.is_none());
        let band = s.regions[0].band.clone().unwrap();
        let lower = RegionCurve {
            x: band.x_lo.clone(),
            y: band.y_lo.clone(),
            band: None,
            ..s.regions[0].clone()
        };
        assert_eq!(s.regions[0].band_coverage(&lower).unwrap(), 1.0);
        let mut outside = lower.clone();
        outside.x[0] = band.x_hi[0] + 1.0;
        assert!((s.regions[0].band_coverage(&outside).unwrap() - 198.0 / 199.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_bernstein_dependence() {
        // η = (0, 1/2, 1) is the uniform angular density; with unit tail
        // indices q* ≡ 2^{-1/3} and ν(S) = 2^{2/3}.
        let dep = Dependence::new(EtaCoefficients::new(vec![0.0, 0.5, 1.0]).unwrap());
        let v = nu_s(|w, _| dep.angular_density(w), 1.0, 1.0, &Quadrature::default()).unwrap();
        assert!((v - 2f64.powf(2.0 / 3.0)).abs() < 1e-12, "{v}");
    }
}

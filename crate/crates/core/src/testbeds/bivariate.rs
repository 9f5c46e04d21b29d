//! Bivariate heavy-tailed testbeds on the positive quadrant.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::solve_decreasing;
use crate::margins::GevParams;
use crate::quadrature::Quadrature;
use crate::regions::{region_set, QuantileTarget, RegionSet};
use crate::{Error, Result};

/// Attempts allowed per requested draw in the rejection samplers.
const REJECTION_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum Bivariate {
    /// `|·|` of a spherical bivariate Cauchy vector.
    #[serde(rename = "cauchy2")]
    Cauchy,
    /// Bivariate Student-t with correlation `rho`, truncated to the positive
    /// quadrant.
    #[serde(rename = "trunc_t2")]
    TruncatedT { nu: f64, rho: f64 },
    /// Density `c / (x³ + y⁴ + 1)`.
    #[serde(rename = "asymmetric")]
    Asymmetric,
    /// Clover-shaped dependence with unequal tail indices (1, 5/4).
    #[serde(rename = "clover")]
    Clover,
}

/// Normalising constant of the asymmetric density:
/// `∫∫ (1 + x³ + y⁴)⁻¹ = Γ(1/3) Γ(1/4) Γ(5/12) / 12`.
pub fn asymmetric_c() -> f64 {
    12.0 * (-(ln_gamma(1.0 / 3.0) + ln_gamma(0.25) + ln_gamma(5.0 / 12.0))).exp()
}

/// Marginal tail constants `(c₁, c₂)` of the asymmetric density:
/// `P(Xᵢ > x) ~ (cᵢ / x)^{1/γᵢ}` as `x → ∞`.
pub fn asymmetric_c12() -> (f64, f64) {
    let c = asymmetric_c();
    let a1 = c * PI / (2.0 * SQRT_2); // ∫ (A + y⁴)⁻¹ dy = a1/c · A^{-3/4}
    let a2 = c * 2.0 * PI / (3.0 * 3f64.sqrt()); // ∫ (A + x³)⁻¹ dx = a2/c · A^{-2/3}
    ((0.8 * a1).powf(0.8), (0.6 * a2).powf(0.6))
}

/// Constant of the clover angular density.
pub const CLOVER_C: f64 = 5.0 / 24.0;

fn students_t(dof: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom")
}

impl Bivariate {
    /// The experiment's truncated-t: `ν = 2`, `ρ = 1/2`.
    pub fn truncated_t() -> Self {
        Self::TruncatedT { nu: 2.0, rho: 0.5 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cauchy => "cauchy2",
            Self::TruncatedT { .. } => "trunc_t2",
            Self::Asymmetric => "asymmetric",
            Self::Clover => "clover",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::TruncatedT { nu, rho } = *self {
            if !(nu > 0.0 && rho.abs() < 1.0) {
                return Err(Error::invalid(format!(
                    "truncated t needs ν > 0 and |ρ| < 1, got ν = {nu}, ρ = {rho}"
                )));
            }
        }
        Ok(())
    }

    pub fn tail_indices(&self) -> [f64; 2] {
        match *self {
            Self::Cauchy => [1.0, 1.0],
            Self::TruncatedT { nu, .. } => [1.0 / nu, 1.0 / nu],
            Self::Asymmetric => [0.8, 0.6],
            Self::Clover => [1.0, 1.25],
        }
    }

    /// Joint density on the positive quadrant.
    pub fn density(&self, x1: f64, x2: f64) -> f64 {
        if x1 < 0.0 || x2 < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Cauchy => 2.0 / (PI * (1.0 + x1 * x1 + x2 * x2).powf(1.5)),
            Self::TruncatedT { nu, rho } => {
                let s = 1.0 - rho * rho;
                let quad = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / s;
                let p0 = 0.25 + rho.asin() / (2.0 * PI);
                (1.0 + quad / nu).powf(-(nu + 2.0) / 2.0) / (2.0 * PI * s.sqrt() * p0)
            }
            Self::Asymmetric => asymmetric_c() / (x1.powi(3) + x2.powi(4) + 1.0),
            Self::Clover => {
                let v = (x2 + 1.0).powf(0.8) - 1.0;
                let r2 = x1 * x1 + v * v;
                let shape = 1.0 - 3.0 * x1 * x1 * v * v / (r2 * r2);
                64.0 / (25.0 * PI) * shape / ((x2 + 1.0).powf(0.2) * (1.0 + r2).powf(1.5))
            }
        }
    }

    /// Angular density `h(w)`.
    pub fn angular_density(&self, w: f64) -> f64 {
        self.angular_density_split(w, 1.0 - w)
    }

    /// `h` evaluated with `1 - w` supplied separately, so factors that are
    /// singular at `w = 1` keep full precision near that end.
    pub fn angular_density_split(&self, w: f64, omw: f64) -> f64 {
        match *self {
            Self::Cauchy => 0.5 * (w * w + omw * omw).powf(-1.5),
            Self::TruncatedT { nu, rho } => {
                let t = students_t(nu + 1.0);
                let k = ((nu + 1.0) / (1.0 - rho * rho)).sqrt();
                let d = 1.0 - t.cdf(-rho * k);
                let ratio = omw / w;
                let arg = k * (ratio.powf(1.0 / nu) - rho);
                k * ratio.powf((1.0 - nu) / nu) * t.pdf(arg) / (2.0 * nu * w.powi(3) * d)
            }
            Self::Asymmetric => {
                let c = asymmetric_c();
                let (c1, c2) = asymmetric_c12();
                let denom = (c1 * w.powf(0.8)).powi(3) + (c2 * omw.powf(0.6)).powi(4);
                6.0 * c / 25.0 * c1 * c2 / (denom * w.powf(0.2) * omw.powf(0.4))
            }
            Self::Clover => {
                let num = clover_numerator(w, omw);
                4.0 * CLOVER_C * num / (w * w + omw * omw).powf(3.5)
            }
        }
    }

    /// Angular basic density `q*(w)` from the closed forms.
    pub fn q_star(&self, w: f64) -> f64 {
        self.q_star_split(w, 1.0 - w)
    }

    pub fn q_star_split(&self, w: f64, omw: f64) -> f64 {
        match *self {
            Self::Cauchy => (w * w + omw * omw).sqrt(),
            Self::TruncatedT { nu, rho } => {
                let t = students_t(nu + 1.0);
                let k = ((nu + 1.0) / (1.0 - rho * rho)).sqrt();
                let d = 1.0 - t.cdf(-rho * k);
                let arg = k * ((omw / w).powf(1.0 / nu) - rho);
                (nu * w.powf(-(1.0 + 2.0 / nu)) * k * t.pdf(arg) / d).powf(-nu / (nu + 2.0))
            }
            Self::Asymmetric => {
                let c = asymmetric_c();
                let (c1, c2) = asymmetric_c12();
                let denom = (c1 * w.powf(0.8)).powi(3) + (c2 * omw.powf(0.6)).powi(4);
                (c * c1 * c2 / denom).powf(-5.0 / 12.0)
            }
            Self::Clover => {
                let num = clover_numerator(w, omw);
                let q = 32.0 * CLOVER_C / 5.0 * num
                    / ((w * w + omw * omw).powf(3.5) * omw.powf(0.25));
                q.powf(-4.0 / 13.0)
            }
        }
    }

    /// Marginal survival `P(Xᵢ > x)` for `margin ∈ {0, 1}`.
    pub fn marginal_survival(&self, margin: usize, x: f64) -> Result<f64> {
        if margin > 1 {
            return Err(Error::invalid(format!("margin index {margin} out of range")));
        }
        if x <= 0.0 {
            return Ok(1.0);
        }
        // Relative accuracy only: deep-tail survivals are far below any fixed
        // absolute tolerance.
        let quad = Quadrature {
            abs_tol: 1e-300,
            ..Quadrature::with_rel_tol(1e-10)
        };
        match *self {
            Self::Cauchy => Ok(1.0 - 2.0 / PI * x.atan()),
            Self::TruncatedT { nu, rho } => {
                let t_nu = students_t(nu);
                let t_up = students_t(nu + 1.0);
                let p0 = 0.25 + rho.asin() / (2.0 * PI);
                let scale = (1.0 - rho * rho) / (nu + 1.0);
                let density = |s: f64| {
                    if !s.is_finite() {
                        return 0.0;
                    }
                    // s / √(ν + s²) written to stay finite for huge s > 0.
                    let arg = rho / ((nu / (s * s) + 1.0) * scale).sqrt();
                    t_nu.pdf(s) * t_up.cdf(arg) / p0
                };
                Ok(quad.integrate_to_infinity(density, x)?.value)
            }
            Self::Asymmetric => {
                let c = asymmetric_c();
                let est = if margin == 0 {
                    quad.integrate_to_infinity(
                        |s| c * (1.0 + s.powi(3)).powf(-0.75) * PI / (2.0 * SQRT_2),
                        x,
                    )?
                } else {
                    quad.integrate_to_infinity(
                        |s| c * (1.0 + s.powi(4)).powf(-2.0 / 3.0) * 2.0 * PI / (3.0 * 3f64.sqrt()),
                        x,
                    )?
                };
                Ok(est.value)
            }
            Self::Clover => {
                // Pseudo-polar representation: radius with P(ρ > r) = (1+r²)^{-1/2}
                // independent of an angle with density g on (0, π/2).
                let est = if margin == 0 {
                    quad.integrate(
                        |phi| clover_angle_density(phi) / (1.0 + (x / phi.cos()).powi(2)).sqrt(),
                        0.0,
                        0.5 * PI,
                    )?
                } else {
                    let v0 = (1.0 + x).powf(0.8) - 1.0;
                    quad.integrate(
                        |phi| clover_angle_density(phi) / (1.0 + (v0 / phi.sin()).powi(2)).sqrt(),
                        0.0,
                        0.5 * PI,
                    )?
                };
                Ok(est.value)
            }
        }
    }

    /// Upper-tail marginal quantile: the `x` with `P(Xᵢ > x) = p`.
    pub fn marginal_quantile(&self, margin: usize, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
        }
        if let Self::Cauchy = self {
            return Ok((0.5 * PI * (1.0 - p)).tan());
        }
        let mut failure = None;
        let log_x = solve_decreasing(
            |t| match self.marginal_survival(margin, t.exp()) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            p,
            -40.0,
            60.0,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(log_x?.exp())
    }

    /// Marginal GEV parameters matching the true tail at level `k/n`:
    /// `μᵢ = F̄ᵢ⁻¹(k/n)` and `σᵢ = γᵢ μᵢ` (exact for Pareto-type tails).
    pub fn true_margins(&self, k_over_n: f64) -> Result<[GevParams; 2]> {
        let gamma = self.tail_indices();
        let mut out = [GevParams::new(0.0, 1.0, 1.0)?; 2];
        for (i, slot) in out.iter_mut().enumerate() {
            let mu = self.marginal_quantile(i, k_over_n)?;
            *slot = GevParams::new(mu, gamma[i] * mu, gamma[i])?;
        }
        Ok(out)
    }

    /// True `1/q*`, `S`, `ν(S)` and quantile regions, with the margins of
    /// [`Self::true_margins`] at each target's tail fraction.
    pub fn true_region_set(&self, w_grid: &[f64], targets: &[QuantileTarget]) -> Result<RegionSet> {
        let first = targets.first().ok_or(Error::Empty("quantile targets"))?;
        if targets.iter().any(|t| t.k != first.k || t.n != first.n) {
            return Err(Error::invalid("targets must share k and n"));
        }
        let gamma = self.tail_indices();
        let mut theta = [GevParams::new(0.0, 1.0, 1.0)?; 2];
        for (i, slot) in theta.iter_mut().enumerate() {
            let mu = self.marginal_quantile(i, first.k_over_n(i))?;
            *slot = GevParams::new(mu, gamma[i] * mu, gamma[i])?;
        }
        region_set(
            w_grid,
            |w, omw| self.angular_density_split(w, omw),
            &theta,
            targets,
            &Quadrature::with_rel_tol(1e-10),
        )
    }

    /// `n` independent draws, returned as the two coordinate vectors.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let mut x1 = Vec::with_capacity(n);
        let mut x2 = Vec::with_capacity(n);
        match *self {
            Self::Cauchy => {
                for _ in 0..n {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    let w: f64 = rng.sample::<f64, _>(StandardNormal).abs();
                    x1.push(z1.abs() / w);
                    x2.push(z2.abs() / w);
                }
            }
            Self::TruncatedT { nu, rho } => {
                let chi = ChiSquared::new(nu).map_err(|e| Error::invalid(e.to_string()))?;
                let s = (1.0 - rho * rho).sqrt();
                let mut attempts = 0usize;
                while x1.len() < n {
                    attempts += 1;
                    if attempts > REJECTION_BUDGET * n.max(1) {
                        return Err(Error::Sampling(format!(
                            "positive-quadrant rejection exhausted {attempts} attempts"
                        )));
                    }
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    let y2 = rho * z1 + s * z2;
                    if z1 > 0.0 && y2 > 0.0 {
                        let scale = (chi.sample(rng) / nu).sqrt();
                        x1.push(z1 / scale);
                        x2.push(y2 / scale);
                    }
                }
            }
            Self::Asymmetric => {
                // With a = x³, b = y⁴: the sum s = a + b is beta-prime(7/12, 5/12)
                // and the share a/s is Beta(1/3, 1/4), independently.
                let radial = Beta::new(7.0 / 12.0, 5.0 / 12.0).expect("valid beta");
                let share = Beta::new(1.0 / 3.0, 0.25).expect("valid beta");
                for _ in 0..n {
                    let b: f64 = radial.sample(rng);
                    let s = b / (1.0 - b);
                    let omega: f64 = share.sample(rng);
                    x1.push((omega * s).cbrt());
                    x2.push(((1.0 - omega) * s).powf(0.25));
                }
            }
            Self::Clover => {
                // In (u, v) = (x₁, (1 + x₂)^{4/5} - 1) the density factorises in
                // polar coordinates; the angle is drawn by rejection against the
                // uniform on (0, π/2) with acceptance 5/8.
                let mut attempts = 0usize;
                while x1.len() < n {
                    let phi = loop {
                        attempts += 1;
                        if attempts > REJECTION_BUDGET * n.max(1) {
                            return Err(Error::Sampling(format!(
                                "clover angle rejection exhausted {attempts} attempts"
                            )));
                        }
                        let phi = 0.5 * PI * rng.random::<f64>();
                        let s = (2.0 * phi).sin();
                        if rng.random::<f64>() < 1.0 - 0.75 * s * s {
                            break phi;
                        }
                    };
                    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
                    let radius = ((1.0 - u) * (1.0 + u)).sqrt() / u;
                    x1.push(radius * phi.cos());
                    x2.push((1.0 + radius * phi.sin()).powf(1.25) - 1.0);
                }
            }
        }
        Ok((x1, x2))
    }
}

fn clover_numerator(w: f64, omw: f64) -> f64 {
    let (a, b) = (w * w, omw * omw);
    a * a - a * b + b * b
}

/// Density of the clover pseudo-polar angle on `(0, π/2)`.
fn clover_angle_density(phi: f64) -> f64 {
    let s = (2.0 * phi).sin();
    16.0 / (5.0 * PI) * (1.0 - 0.75 * s * s)
}

/// Exponent function `V(x, y)` of the extremal-t limit of the positive
/// truncated bivariate t with `ν` degrees of freedom and correlation `ρ`.
pub fn extremal_t_exponent(x: f64, y: f64, rho: f64, nu: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && rho.abs() < 1.0 && nu > 0.0) {
        return Err(Error::invalid(format!(
            "exponent function needs x, y > 0, |ρ| < 1, ν > 0; got ({x}, {y}, {rho}, {nu})"
        )));
    }
    let t = students_t(nu + 1.0);
    let k = ((nu + 1.0) / (1.0 - rho * rho)).sqrt();
    let base = t.cdf(-rho * k);
    let d = 1.0 - base;
    let term = |a: f64, b: f64| (t.cdf(k * ((b / a).powf(1.0 / nu) - rho)) - base) / a;
    Ok((term(x, y) + term(y, x)) / d)
}

//! Bernstein-polynomial extremal dependence.
//!
//! The Pickands function of degree `κ` is `A(v) = Σ_{j=0}^{κ} β_j b_{j,κ}(v)`
//! with `b_{j,κ}(v) = C(κ,j) v^j (1-v)^{κ-j}`. The angular distribution is
//! described by the non-decreasing coefficients `η_0..η_{κ-1}` with
//! `η_0 = p₀ = H({0})`, `η_{κ-1} = 1 - p₁ = 1 - H({1})` and `Σ η_j = κ/2`.
//! The two parameterisations are linked by `β_{j+1} = β_j + (2η_j - 1)/κ`,
//! `β_0 = 1`, which makes `A″ = 2h` for the angular density
//! `h(w) = Σ_{j=0}^{κ-2} (η_{j+1} - η_j) Be(w; j+1, κ-j-1)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Smallest admissible polynomial degree.
pub const MIN_KAPPA: usize = 3;
/// Largest degree the samplers will propose.
pub const MAX_KAPPA: usize = 40;

const SUM_TOL: f64 = 1e-10;

/// First violated constraint of an η vector.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EtaViolation {
    #[error("degree {0} is below the minimum of 3")]
    Degree(usize),
    #[error("eta[{index}] = {value} lies outside [0, 1]")]
    Range { index: usize, value: f64 },
    #[error("eta[{index}] = {value} is smaller than its predecessor {previous}")]
    Monotonicity { index: usize, value: f64, previous: f64 },
    #[error("coefficients sum to {sum}, expected {expected}")]
    Sum { sum: f64, expected: f64 },
}

/// Check the validity conditions on `η`: length ≥ 3, range, monotonicity and
/// `Σ η_j = κ/2`.
pub fn validate_eta(eta: &[f64]) -> std::result::Result<(), EtaViolation> {
    let kappa = eta.len();
    if kappa < MIN_KAPPA {
        return Err(EtaViolation::Degree(kappa));
    }
    for (index, &value) in eta.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(EtaViolation::Range { index, value });
        }
        if index > 0 && value < eta[index - 1] {
            return Err(EtaViolation::Monotonicity {
                index,
                value,
                previous: eta[index - 1],
            });
        }
    }
    let sum: f64 = eta.iter().sum();
    let expected = kappa as f64 / 2.0;
    if (sum - expected).abs() > SUM_TOL {
        return Err(EtaViolation::Sum { sum, expected });
    }
    Ok(())
}

/// Angular-distribution coefficients `(η_0, …, η_{κ-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EtaCoefficients {
    eta: Vec<f64>,
}

impl EtaCoefficients {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        validate_eta(&eta).map_err(|v| Error::InvalidDependence(v.to_string()))?;
        Ok(Self { eta })
    }

    /// The independence configuration `η_j ≡ 1/2` (`h ≡ 0`, `p₀ = p₁ = 1/2`).
    pub fn independence(kappa: usize) -> Result<Self> {
        Self::new(vec![0.5; kappa])
    }

    pub fn kappa(&self) -> usize {
        self.eta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eta
    }

    /// Point mass `H({0})`.
    pub fn p0(&self) -> f64 {
        self.eta[0]
    }

    /// Point mass `H({1})`.
    pub fn p1(&self) -> f64 {
        1.0 - self.eta[self.eta.len() - 1]
    }
}

impl TryFrom<Vec<f64>> for EtaCoefficients {
    type Error = Error;
    fn try_from(eta: Vec<f64>) -> Result<Self> {
        Self::new(eta)
    }
}

impl From<EtaCoefficients> for Vec<f64> {
    fn from(e: EtaCoefficients) -> Self {
        e.eta
    }
}

/// Pickands Bernstein coefficients `(β_0, …, β_κ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCoefficients {
    beta: Vec<f64>,
}

impl BetaCoefficients {
    /// Validated constructor: endpoint values 1 and increments bounded by `1/κ`.
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        let b = Self { beta };
        beta_to_eta(&b)?;
        Ok(b)
    }

    pub fn kappa(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }
}

/// `β_0 = 1`, `β_{j+1} = β_j + (2η_j - 1)/κ`.
pub fn eta_to_beta(eta: &EtaCoefficients) -> BetaCoefficients {
    let kappa = eta.kappa() as f64;
    let mut beta = Vec::with_capacity(eta.kappa() + 1);
    let mut current = 1.0;
    beta.push(current);
    for &e in eta.as_slice() {
        current += (2.0 * e - 1.0) / kappa;
        beta.push(current);
    }
    // The sum constraint makes the last value 1 up to rounding; pin it.
    *beta.last_mut().expect("non-empty") = 1.0;
    BetaCoefficients { beta }
}

/// Inverse map `η_j = (1 + κ(β_{j+1} - β_j))/2`.
pub fn beta_to_eta(beta: &BetaCoefficients) -> Result<EtaCoefficients> {
    let b = beta.as_slice();
    if b.len() < MIN_KAPPA + 1 {
        return Err(Error::InvalidDependence(format!(
            "need at least {} Pickands coefficients, got {}",
            MIN_KAPPA + 1,
            b.len()
        )));
    }
    if (b[0] - 1.0).abs() > SUM_TOL || (b[b.len() - 1] - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidDependence(
            "Pickands coefficients must start and end at 1".into(),
        ));
    }
    let kappa = (b.len() - 1) as f64;
    let eta = b
        .windows(2)
        .map(|w| 0.5 * (1.0 + kappa * (w[1] - w[0])))
        .collect();
    EtaCoefficients::new(eta)
}

const MAX_BINOMIAL_DEGREE: usize = MAX_KAPPA + 2;

fn binomial_row(n: usize) -> &'static [f64] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
        for m in 1..=MAX_BINOMIAL_DEGREE {
            let prev = &rows[m - 1];
            let mut row = vec![1.0; m + 1];
            for j in 1..m {
                row[j] = prev[j - 1] + prev[j];
            }
            rows.push(row);
        }
        rows
    });
    &table[n]
}

/// `Σ_j c_j b_{j,n}(v)` with `n = c.len() - 1`, evaluated in O(n) by a
/// Horner scheme in `v/(1-v)` (or its reciprocal above 1/2).
pub fn bernstein_eval(coefs: &[f64], v: f64) -> f64 {
    let n = coefs.len() - 1;
    let binom: Vec<f64>;
    let row: &[f64] = if n <= MAX_BINOMIAL_DEGREE {
        binomial_row(n)
    } else {
        binom = (0..=n).map(|j| binomial(n, j)).collect();
        &binom
    };
    if n == 0 {
        return coefs[0];
    }
    if v <= 0.5 {
        let t = v / (1.0 - v);
        let mut acc = 0.0;
        for j in (0..=n).rev() {
            acc = acc * t + coefs[j] * row[j];
        }
        acc * (1.0 - v).powi(n as i32)
    } else {
        let t = (1.0 - v) / v;
        let mut acc = 0.0;
        for j in 0..=n {
            acc = acc * t + coefs[j] * row[j];
        }
        acc * v.powi(n as i32)
    }
}

fn binomial(n: usize, j: usize) -> f64 {
    (ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0))
        .exp()
        .round()
}

/// Bernstein basis polynomial `b_{j,n}(v)`.
pub fn bernstein_basis(j: usize, n: usize, v: f64) -> f64 {
    assert!(j <= n, "basis index {j} exceeds degree {n}");
    let row = if n <= MAX_BINOMIAL_DEGREE {
        binomial_row(n)[j]
    } else {
        binomial(n, j)
    };
    row * v.powi(j as i32) * (1.0 - v).powi((n - j) as i32)
}

/// Beta density with positive integer shape parameters,
/// `Be(w; a, b) = (a+b-1) b_{a-1, a+b-2}(w)`. Integer powers keep the
/// endpoint values finite (`0^0 = 1`).
pub fn beta_density_int(w: f64, a: usize, b: usize) -> f64 {
    assert!(a >= 1 && b >= 1, "shape parameters must be positive");
    (a + b - 1) as f64 * bernstein_basis(a - 1, a + b - 2, w)
}

fn check_unit(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("simplex coordinate {v} outside [0, 1]")))
    }
}

/// `A_κ(v)`.
pub fn pickands_eval(v: f64, beta: &BetaCoefficients) -> Result<f64> {
    check_unit(v)?;
    Ok(bernstein_eval(beta.as_slice(), v))
}

/// `A′_κ(v)`, a Bernstein polynomial of degree `κ-1` with coefficients
/// `κ(β_{j+1} - β_j)`.
pub fn pickands_d1(v: f64, beta: &BetaCoefficients) -> Result<f64> {
    check_unit(v)?;
    Ok(bernstein_eval(&first_differences(beta.as_slice()), v))
}

/// `A″_κ(v)`, degree `κ-2` with coefficients `κ(κ-1)Δ²β_j`.
pub fn pickands_d2(v: f64, beta: &BetaCoefficients) -> Result<f64> {
    check_unit(v)?;
    Ok(bernstein_eval(&second_differences(beta.as_slice()), v))
}

fn first_differences(b: &[f64]) -> Vec<f64> {
    let k = (b.len() - 1) as f64;
    b.windows(2).map(|w| k * (w[1] - w[0])).collect()
}

fn second_differences(b: &[f64]) -> Vec<f64> {
    let k = (b.len() - 1) as f64;
    b.windows(3)
        .map(|w| k * (k - 1.0) * (w[2] - 2.0 * w[1] + w[0]))
        .collect()
}

/// Angular density `h_{κ-1}(w; η)` on the open simplex.
pub fn angular_density_eval(w: f64, eta: &EtaCoefficients) -> Result<f64> {
    check_unit(w)?;
    Ok(bernstein_eval(&density_coefficients(eta.as_slice()), w))
}

// h = (κ-1) Σ (η_{j+1} - η_j) b_{j,κ-2}
fn density_coefficients(eta: &[f64]) -> Vec<f64> {
    let km1 = (eta.len() - 1) as f64;
    eta.windows(2).map(|w| km1 * (w[1] - w[0])).collect()
}

/// A validated dependence structure with its cached Bernstein coefficient
/// vectors for `A`, `A′`, `A″` and `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dependence {
    eta: EtaCoefficients,
    beta: BetaCoefficients,
    d1: Vec<f64>,
    d2: Vec<f64>,
    density: Vec<f64>,
}

impl Dependence {
    pub fn new(eta: EtaCoefficients) -> Self {
        let beta = eta_to_beta(&eta);
        let d1 = first_differences(beta.as_slice());
        let d2 = second_differences(beta.as_slice());
        let density = density_coefficients(eta.as_slice());
        Self {
            eta,
            beta,
            d1,
            d2,
            density,
        }
    }

    pub fn eta(&self) -> &EtaCoefficients {
        &self.eta
    }

    pub fn beta(&self) -> &BetaCoefficients {
        &self.beta
    }

    pub fn kappa(&self) -> usize {
        self.eta.kappa()
    }

    /// `(A, A′, A″)` at `v ∈ [0, 1]`.
    #[inline]
    pub fn pickands(&self, v: f64) -> (f64, f64, f64) {
        (
            bernstein_eval(self.beta.as_slice(), v),
            bernstein_eval(&self.d1, v),
            bernstein_eval(&self.d2, v),
        )
    }

    /// `h(w)`.
    #[inline]
    pub fn angular_density(&self, w: f64) -> f64 {
        bernstein_eval(&self.density, w)
    }
}

/// Negative-binomial law on `κ - 3` in mean/variance form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBin {
    pub size: f64,
    pub prob: f64,
}

impl NegBin {
    /// Requires `variance > mean > 0`.
    pub fn from_mean_variance(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0 && variance > mean && variance.is_finite()) {
            return Err(Error::invalid(format!(
                "negative binomial needs variance > mean > 0, got mean {mean}, variance {variance}"
            )));
        }
        Ok(Self {
            size: mean * mean / (variance - mean),
            prob: mean / variance,
        })
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        let x = x as f64;
        ln_gamma(x + self.size) - ln_gamma(self.size) - ln_gamma(x + 1.0)
            + self.size * self.prob.ln()
            + x * (1.0 - self.prob).ln()
    }
}

/// `log Π(κ) = log NegBin(κ - 3 | m_NB, σ_NB)` with `σ_NB` the variance.
pub fn prior_logdensity_kappa(kappa: usize, m_nb: f64, sigma_nb: f64) -> Result<f64> {
    if kappa < MIN_KAPPA {
        return Err(Error::invalid(format!("degree {kappa} is below 3")));
    }
    Ok(NegBin::from_mean_variance(m_nb, sigma_nb)?.ln_pmf((kappa - MIN_KAPPA) as u64))
}

/// Hyperparameters of the prior on `(κ, p₀, p₁, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencePrior {
    /// Mean of `κ - 3`.
    pub m_nb: f64,
    /// Variance of `κ - 3`.
    pub sigma_nb: f64,
    /// `p₀ ~ Unif(0, p0_max)`.
    pub p0_max: f64,
    /// Optional cap intersected with the feasible range of `p₁`.
    pub p1_max: Option<f64>,
}

impl Default for DependencePrior {
    /// Generic prior: `Unif(0, 1/2)` for `p₀`, the feasible range for `p₁`.
    fn default() -> Self {
        Self {
            m_nb: 3.2,
            sigma_nb: 4.48,
            p0_max: 0.5,
            p1_max: None,
        }
    }
}

impl DependencePrior {
    /// Prior used in the bivariate simulation experiments.
    pub fn simulation() -> Self {
        Self {
            m_nb: 3.2,
            sigma_nb: 4.48,
            p0_max: 0.1,
            p1_max: Some(0.1),
        }
    }

    /// Prior used for the air-pollution application.
    pub fn data_analysis() -> Self {
        Self {
            m_nb: 6.0,
            sigma_nb: 8.0,
            p0_max: 0.5,
            p1_max: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        NegBin::from_mean_variance(self.m_nb, self.sigma_nb)?;
        if !(self.p0_max > 0.0 && self.p0_max <= 0.5) {
            return Err(Error::invalid(format!(
                "p0 upper bound must lie in (0, 1/2], got {}",
                self.p0_max
            )));
        }
        if let Some(m) = self.p1_max {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::invalid(format!("p1 upper bound must lie in (0, 1], got {m}")));
            }
        }
        Ok(())
    }

    pub fn log_kappa(&self, kappa: usize) -> Result<f64> {
        prior_logdensity_kappa(kappa, self.m_nb, self.sigma_nb)
    }

    /// Initial degree `3 + round(m_NB)`.
    pub fn initial_kappa(&self) -> usize {
        (MIN_KAPPA + self.m_nb.round() as usize).min(MAX_KAPPA)
    }
}

/// Feasible interval `[a, b]` for `p₁` given `κ` and `p₀`:
/// `a = max{0, (κ-1)p₀ - κ/2 + 1}`, `b = (p₀ + κ/2 - 1)/(κ-1)`.
pub fn p1_bounds(kappa: usize, p0: f64) -> (f64, f64) {
    let k = kappa as f64;
    let a = ((k - 1.0) * p0 - k / 2.0 + 1.0).max(0.0);
    let b = (p0 + k / 2.0 - 1.0) / (k - 1.0);
    (a, b)
}

/// Draw `(p₀, p₁)` from their prior at degree `κ`.
pub fn sample_p0_p1_prior<R: rand::Rng + ?Sized>(
    kappa: usize,
    prior: &DependencePrior,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if kappa < MIN_KAPPA {
        return Err(Error::invalid(format!("degree {kappa} is below 3")));
    }
    let p0 = prior.p0_max * rng.random::<f64>();
    let (a, b) = p1_bounds(kappa, p0);
    let hi = prior.p1_max.map_or(b, |m| b.min(m));
    if hi < a {
        return Err(Error::Infeasible(format!(
            "no admissible p1 for kappa {kappa}, p0 {p0}: [{a}, {hi}]"
        )));
    }
    let p1 = a + (hi - a) * rng.random::<f64>();
    Ok((p0, p1))
}

/// Uniform draw of the interior coefficients `η_1..η_{κ-2}` from the polytope
/// `{p₀ ≤ η_1 ≤ … ≤ η_{κ-2} ≤ 1-p₁, Σ = κ/2 - p₀ - (1-p₁)}`.
///
/// The first `κ-3` coordinates are sorted uniforms, the last is fixed by the
/// sum constraint and the draw is accepted iff it keeps the ordering; the
/// accepted draws are exactly uniform on the polytope.
pub fn sample_eta_prior<R: rand::Rng + ?Sized>(
    kappa: usize,
    p0: f64,
    p1: f64,
    rng: &mut R,
) -> Result<EtaCoefficients> {
    sample_eta_prior_with_budget(kappa, p0, p1, 200_000, rng)
}

pub fn sample_eta_prior_with_budget<R: rand::Rng + ?Sized>(
    kappa: usize,
    p0: f64,
    p1: f64,
    max_attempts: usize,
    rng: &mut R,
) -> Result<EtaCoefficients> {
    if kappa < MIN_KAPPA {
        return Err(Error::invalid(format!("degree {kappa} is below 3")));
    }
    let lo = p0;
    let hi = 1.0 - p1;
    let (a, b) = p1_bounds(kappa, p0);
    if !(0.0..=0.5).contains(&p0) || p1 < a || p1 > b || lo > hi {
        return Err(Error::Infeasible(format!(
            "(p0, p1) = ({p0}, {p1}) infeasible at kappa {kappa}"
        )));
    }
    let interior_sum = kappa as f64 / 2.0 - lo - hi;
    let free = kappa - 3;
    let mut eta = vec![0.0; kappa];
    eta[0] = lo;
    eta[kappa - 1] = hi;
    for _ in 0..max_attempts {
        let mut partial = 0.0;
        for slot in eta[1..=free].iter_mut() {
            *slot = lo + (hi - lo) * rng.random::<f64>();
        }
        eta[1..=free].sort_by(|x, y| x.total_cmp(y));
        for &x in &eta[1..=free] {
            partial += x;
        }
        let last = interior_sum - partial;
        let prev = eta[free];
        if last >= prev && last <= hi {
            eta[kappa - 2] = last;
            // Rounding in the sum can push the last value one ulp outside
            // the polytope; the conditions above already guarantee order.
            return EtaCoefficients::new(eta.clone());
        }
    }
    Err(Error::Sampling(format!(
        "no admissible eta after {max_attempts} attempts (kappa {kappa}, p0 {p0}, p1 {p1})"
    )))
}

/// Draw `(p₀, p₁, η)` from the conditional prior given `κ`, redrawing the
/// point masses when the polytope sampler exhausts its budget.
pub fn sample_eta_given_kappa<R: rand::Rng + ?Sized>(
    kappa: usize,
    prior: &DependencePrior,
    rng: &mut R,
) -> Result<EtaCoefficients> {
    const REDRAWS: usize = 20;
    let mut last_err = None;
    for _ in 0..REDRAWS {
        let (p0, p1) = sample_p0_p1_prior(kappa, prior, rng)?;
        match sample_eta_prior_with_budget(kappa, p0, p1, 20_000, rng) {
            Ok(eta) => return Ok(eta),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Quadrature;
    use crate::rng_from_seed;
    use rand::Rng;
    use proptest::prelude::*;

    fn eta(v: &[f64]) -> EtaCoefficients {
        EtaCoefficients::new(v.to_vec()).unwrap()
    }

    // Oracle: Bernstein form written directly from the definition.
    fn bernstein_naive(c: &[f64], v: f64) -> f64 {
        let n = c.len() - 1;
        (0..=n)
            .map(|j| {
                let mut binom = 1.0;
                for i in 0..j {
                    binom = binom * (n - i) as f64 / (i + 1) as f64;
                }
                c[j] * binom * v.powi(j as i32) * (1.0 - v).powi((n - j) as i32)
            })
            .sum()
    }

    fn random_eta(kappa: usize, seed: u64) -> EtaCoefficients {
        let mut rng = rng_from_seed(seed);
        sample_eta_given_kappa(kappa, &DependencePrior::default(), &mut rng).unwrap()
    }

    #[test]
    fn validation_reports() {
        assert!(validate_eta(&[0.1, 0.5, 0.6, 0.8]).is_ok());
        assert!(matches!(
            validate_eta(&[0.5, 0.4, 0.6, 0.5]),
            Err(EtaViolation::Monotonicity { index: 1, .. })
        ));
        assert!(matches!(
            validate_eta(&[0.1, 0.5, 0.6, 0.801]),
            Err(EtaViolation::Sum { .. })
        ));
        assert!(matches!(validate_eta(&[0.5, 0.5]), Err(EtaViolation::Degree(2))));
        assert!(matches!(
            validate_eta(&[-0.1, 0.5, 0.6, 1.0]),
            Err(EtaViolation::Range { index: 0, .. })
        ));
    }

    #[test]
    fn pickands_examples() {
        let ones = BetaCoefficients::new(vec![1.0; 6]).unwrap();
        for v in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert!((pickands_eval(v, &ones).unwrap() - 1.0).abs() < 1e-15);
            assert!(pickands_d1(v, &ones).unwrap().abs() < 1e-15);
            assert!(pickands_d2(v, &ones).unwrap().abs() < 1e-15);
        }
        let b = BetaCoefficients::new(vec![1.0, 5.0 / 6.0, 5.0 / 6.0, 1.0]).unwrap();
        assert!((pickands_eval(0.5, &b).unwrap() - 0.875).abs() < 1e-15);
        assert_eq!(pickands_eval(0.0, &b).unwrap(), 1.0);
        assert_eq!(pickands_eval(1.0, &b).unwrap(), 1.0);
        assert!(pickands_eval(1.2, &b).is_err());
    }

    #[test]
    fn horner_matches_naive_bernstein() {
        let c: Vec<f64> = (0..=17).map(|j| ((j * 7) % 5) as f64 - 1.3).collect();
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            let got = bernstein_eval(&c, v);
            let want = bernstein_naive(&c, v);
            assert!((got - want).abs() < 1e-12, "v={v}: {got} vs {want}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = random_eta(7, 3);
        let b = eta_to_beta(&e);
        let h = 1e-5;
        for i in 1..100 {
            let v = i as f64 / 100.0;
            let fd1 = (pickands_eval(v + h, &b).unwrap() - pickands_eval(v - h, &b).unwrap())
                / (2.0 * h);
            let fd2 = (pickands_d1(v + h, &b).unwrap() - pickands_d1(v - h, &b).unwrap())
                / (2.0 * h);
            assert!((pickands_d1(v, &b).unwrap() - fd1).abs() < 1e-6);
            assert!((pickands_d2(v, &b).unwrap() - fd2).abs() < 1e-6);
        }
        assert!((pickands_d1(0.0, &b).unwrap() - (2.0 * e.p0() - 1.0)).abs() < 1e-12);
        assert!((pickands_d1(1.0, &b).unwrap() - (1.0 - 2.0 * e.p1())).abs() < 1e-12);
    }

    #[test]
    fn angular_density_examples() {
        let indep = EtaCoefficients::independence(5).unwrap();
        assert_eq!((indep.p0(), indep.p1()), (0.5, 0.5));
        assert_eq!(angular_density_eval(0.3, &indep).unwrap(), 0.0);

        let e = eta(&[0.1, 0.5, 0.6, 0.8]);
        assert!((angular_density_eval(0.5, &e).unwrap() - 0.6).abs() < 1e-14);
        assert!((beta_density_int(0.5, 1, 3) - 0.75).abs() < 1e-15);
        assert!((beta_density_int(0.5, 2, 2) - 1.5).abs() < 1e-15);
        // Endpoint evaluation stays finite.
        assert_eq!(beta_density_int(0.0, 1, 3), 3.0);
        assert_eq!(beta_density_int(1.0, 1, 3), 0.0);
    }

    #[test]
    fn density_is_sum_of_beta_densities() {
        let e = random_eta(9, 11);
        let x = e.as_slice();
        let k = e.kappa();
        for i in 1..50 {
            let w = i as f64 / 50.0;
            let direct: f64 = (0..=k - 2)
                .map(|j| (x[j + 1] - x[j]) * beta_density_int(w, j + 1, k - j - 1))
                .sum();
            assert!((angular_density_eval(w, &e).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_and_mean_constraints() {
        let q = Quadrature::default();
        for (kappa, seed) in [(3, 1), (4, 2), (6, 3), (12, 4), (25, 5)] {
            let e = random_eta(kappa, seed);
            let d = Dependence::new(e.clone());
            let mass = q.integrate(|w| d.angular_density(w), 0.0, 1.0).unwrap().value;
            let mean = q.integrate(|w| w * d.angular_density(w), 0.0, 1.0).unwrap().value;
            assert!((e.p0() + e.p1() + mass - 1.0).abs() < 1e-8, "kappa {kappa}");
            assert!((e.p1() + mean - 0.5).abs() < 1e-8, "kappa {kappa}");
        }
    }

    #[test]
    fn half_second_derivative_is_density() {
        for (kappa, seed) in [(3, 7), (5, 8), (15, 9), (40, 10)] {
            let d = Dependence::new(random_eta(kappa, seed));
            for i in 1..200 {
                let w = i as f64 / 200.0;
                let (_, _, a2) = d.pickands(w);
                assert!((0.5 * a2 - d.angular_density(w)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for kappa in 1..=20 {
            for i in 1..100 {
                let v = i as f64 / 100.0;
                let s: f64 = (0..=kappa)
                    .map(|j| beta_density_int(v, j + 1, kappa - j + 1))
                    .sum::<f64>()
                    / (kappa + 1) as f64;
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negbin_prior() {
        let nb = NegBin::from_mean_variance(3.2, 4.48).unwrap();
        assert!((nb.size - 8.0).abs() < 1e-12);
        let total: f64 = (3..400)
            .map(|k| prior_logdensity_kappa(k, 3.2, 4.48).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
        let mean: f64 = (3..400)
            .map(|k| (k - 3) as f64 * prior_logdensity_kappa(k, 3.2, 4.48).unwrap().exp())
            .sum();
        assert!((mean - 3.2).abs() < 1e-8);
        let total: f64 = (3..400)
            .map(|k| prior_logdensity_kappa(k, 6.0, 8.0).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
        assert!(prior_logdensity_kappa(2, 3.2, 4.48).is_err());
        assert!(NegBin::from_mean_variance(3.0, 2.0).is_err());
    }

    #[test]
    fn p1_bounds_examples() {
        assert_eq!(p1_bounds(4, 0.0), (0.0, 1.0 / 3.0));
        let (a, b) = p1_bounds(3, 0.4);
        assert!((a - 0.3).abs() < 1e-15 && (b - 0.45).abs() < 1e-15);
    }

    #[test]
    fn kappa_three_is_determined() {
        let mut rng = rng_from_seed(4);
        for _ in 0..100 {
            let (p0, p1) = sample_p0_p1_prior(3, &DependencePrior::default(), &mut rng).unwrap();
            let e = sample_eta_prior(3, p0, p1, &mut rng).unwrap();
            assert!((e.as_slice()[1] - (0.5 + p1 - p0)).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_point_masses_are_reported() {
        let mut rng = rng_from_seed(1);
        assert!(matches!(
            sample_eta_prior(4, 0.0, 0.5, &mut rng),
            Err(Error::Infeasible(_))
        ));
    }

    // Rejection oracle: iid (unsorted) uniforms on the full cube with the last
    // coordinate fixed by the sum; accept iff the whole vector is ordered.
    #[test]
    fn polytope_sampler_matches_rejection_oracle() {
        let (kappa, p0, p1) = (6usize, 0.05, 0.05);
        let n = 100_000;
        let mut rng = rng_from_seed(2024);
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_eta_prior(kappa, p0, p1, &mut rng).unwrap().as_slice()[1])
            .collect();

        let mut rng = rng_from_seed(77);
        let (lo, hi) = (p0, 1.0 - p1);
        let target = kappa as f64 / 2.0 - lo - hi;
        let mut oracle = Vec::with_capacity(n);
        while oracle.len() < n {
            let x: Vec<f64> = (0..kappa - 3)
                .map(|_| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            let last = target - x.iter().sum::<f64>();
            let mut full = vec![lo];
            full.extend(&x);
            full.push(last);
            full.push(hi);
            if full.windows(2).all(|w| w[0] <= w[1]) {
                oracle.push(x[0]);
            }
        }
        let (m1, m2) = (crate::stats::mean(&draws), crate::stats::mean(&oracle));
        let se = ((crate::stats::variance(&draws) + crate::stats::variance(&oracle)) / n as f64)
            .sqrt();
        assert!((m1 - m2).abs() < 3.0 * se, "{m1} vs {m2} (se {se})");
    }

    #[test]
    fn simulation_prior_point_masses() {
        let mut rng = rng_from_seed(5);
        let prior = DependencePrior::simulation();
        for kappa in 3..=12 {
            for _ in 0..200 {
                let e = sample_eta_given_kappa(kappa, &prior, &mut rng).unwrap();
                assert!(e.p0() <= 0.1 && e.p1() <= 0.1 + 1e-15);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn eta_beta_round_trip(kappa in 3usize..=30, seed in 0u64..10_000) {
            let e = random_eta(kappa, seed);
            let back = beta_to_eta(&eta_to_beta(&e)).unwrap();
            for (x, y) in e.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn pickands_validity(kappa in 3usize..=25, seed in 0u64..10_000) {
            let d = Dependence::new(random_eta(kappa, seed));
            for i in 0..=998 {
                let v = i as f64 / 998.0;
                let (a, _, a2) = d.pickands(v);
                prop_assert!(a <= 1.0 + 1e-12);
                prop_assert!(a >= v.max(1.0 - v) - 1e-12);
                prop_assert!(a2 >= -1e-10);
            }
        }

        #[test]
        fn sampled_point_masses_are_feasible(kappa in 3usize..=30, seed in 0u64..10_000) {
            let mut rng = rng_from_seed(seed);
            let (p0, p1) = sample_p0_p1_prior(kappa, &DependencePrior::default(), &mut rng).unwrap();
            // Extreme configuration: interior coefficients at a common value.
            let interior = (kappa as f64 / 2.0 - p0 - (1.0 - p1)) / (kappa - 2) as f64;
            let mut v = vec![p0];
            v.extend(std::iter::repeat_n(interior, kappa - 2));
            v.push(1.0 - p1);
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{v:?}");
        }
    }
}

//! Closed-form constants for regular trees.
//!
//! Everything here is a pure function of its arguments. Degrees are `u32`
//! and radii are `u32`, so negative radii are unrepresentable.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on correlation arguments before they are rejected.
/// Values within the slack are clamped into `[-1, 1]`.
pub const CORR_GUARD: f64 = 1e-12;

/// Direction of a cut optimisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMode {
    Min,
    Max,
}

impl CutMode {
    /// `true` when `new` is strictly better than `old` in this direction.
    pub fn improves(self, old: i64, new: i64) -> bool {
        match self {
            CutMode::Min => new < old,
            CutMode::Max => new > old,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CutMode::Min => "min",
            CutMode::Max => "max",
        }
    }
}

impl std::str::FromStr for CutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(CutMode::Min),
            "max" => Ok(CutMode::Max),
            other => Err(Error::domain(format!("unknown cut mode `{other}`"))),
        }
    }
}

/// A degree together with its spectral radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeParams {
    d: u32,
    rho_d: f64,
}

impl DegreeParams {
    pub fn new(d: u32) -> Result<Self> {
        Ok(Self { d, rho_d: spectral_radius(d)? })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn rho(&self) -> f64 {
        self.rho_d
    }
}

/// Parameters of the symmetric two-state tree-indexed Markov chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovParams {
    theta: f64,
    d: u32,
}

impl MarkovParams {
    pub fn new(d: u32, theta: f64) -> Result<Self> {
        check_degree(d, 3)?;
        check_theta(theta)?;
        Ok(Self { theta, d })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Probability that a child copies its parent's spin: `(1 + theta) / 2`.
    pub fn keep_probability(&self) -> f64 {
        (1.0 + self.theta) / 2.0
    }
}

fn check_degree(d: u32, min: u32) -> Result<()> {
    if d < min {
        return Err(Error::domain(format!("degree must be at least {min}, got {d}")));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta.abs() > 1.0 {
        return Err(Error::domain(format!("theta must lie in [-1, 1], got {theta}")));
    }
    Ok(())
}

fn clamp_corr(rho: f64) -> Result<f64> {
    if !rho.is_finite() || rho.abs() > 1.0 + CORR_GUARD {
        return Err(Error::domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(rho.clamp(-1.0, 1.0))
}

/// `2 sqrt(d - 1) / d`, the norm of the simple random walk operator on the d-regular tree.
pub fn spectral_radius(d: u32) -> Result<f64> {
    check_degree(d, 2)?;
    let d = f64::from(d);
    Ok(2.0 * (d - 1.0).sqrt() / d)
}

/// Probability that two standard jointly normal variables with correlation
/// `rho` have opposite signs: `arccos(rho) / pi`.
pub fn sign_flip_probability(rho: f64) -> Result<f64> {
    Ok(clamp_corr(rho)?.acos() / PI)
}

/// `E[sgn Z1 sgn Z2] = (2 / pi) arcsin(rho)` for jointly normal `Z1, Z2`.
pub fn sign_correlation(rho: f64) -> Result<f64> {
    Ok(2.0 / PI * clamp_corr(rho)?.asin())
}

/// Per-vertex bisection size reached by sign-rounding the Gaussian wave
/// function: `(d / 2pi) arccos(rho_d)` for min, `(d / 2pi) arccos(-rho_d)` for max.
pub fn bisection_bound(d: u32, mode: CutMode) -> Result<f64> {
    check_degree(d, 3)?;
    let rho = spectral_radius(d)?;
    let arg = match mode {
        CutMode::Min => rho,
        CutMode::Max => -rho,
    };
    Ok(f64::from(d) / (2.0 * PI) * arg.acos())
}

/// Number of vertices at distance `n` from the root of the d-regular tree.
pub fn sphere_size(d: u32, n: u32) -> Result<u64> {
    check_degree(d, 2)?;
    if n == 0 {
        return Ok(1);
    }
    u64::from(d - 1)
        .checked_pow(n - 1)
        .and_then(|p| p.checked_mul(u64::from(d)))
        .ok_or_else(|| Error::Resource(format!("sphere size overflows u64 for d={d}, n={n}")))
}

/// [`sphere_size`] as a float; never overflows.
pub fn sphere_size_f64(d: u32, n: u32) -> f64 {
    if n == 0 {
        1.0
    } else {
        f64::from(d) * f64::from(d - 1).powi(n as i32 - 1)
    }
}

/// Correlation at adjacent vertices of the radius-`n` Gaussian block factor
/// with alternating weights: `-rho_d / (1 + (d - 1) / (d (n - 1)))`.
///
/// The non-alternating factor has the negated correlation.
pub fn block_factor_correlation(d: u32, n: u32) -> Result<f64> {
    check_degree(d, 3)?;
    if n < 2 {
        return Err(Error::domain(format!("block factor radius must be at least 2, got {n}")));
    }
    let rho = spectral_radius(d)?;
    let df = f64::from(d);
    Ok(-rho / (1.0 + (df - 1.0) / (df * f64::from(n - 1))))
}

/// Lower bound on the per-edge cut probability for graphs of girth at least `2n + 1`.
pub fn edge_cut_bound(d: u32, n: u32) -> Result<f64> {
    sign_flip_probability(block_factor_correlation(d, n)?)
}

/// `Var(Sigma_n) / |S_n|` for the tree-indexed Markov chain, where `Sigma_n` is
/// the sum of spins on the sphere of radius `n`.
pub fn mc_variance_ratio(d: u32, theta: f64, n: u32) -> Result<f64> {
    check_degree(d, 3)?;
    check_theta(theta)?;
    if n == 0 {
        return Err(Error::domain("sphere radius must be at least 1"));
    }
    let df = f64::from(d);
    let t2 = theta * theta;
    let middle: f64 = (1..n).map(|k| (df - 2.0) * (df - 1.0).powi(k as i32 - 1) * t2.powi(k as i32)).sum();
    Ok(1.0 + middle + (df - 1.0).powi(n as i32) * t2.powi(n as i32))
}

/// `E[sigma(o) Sigma_n] = |S_n| theta^n` for the tree-indexed Markov chain.
pub fn mc_root_sphere_covariance(d: u32, theta: f64, n: u32) -> Result<f64> {
    check_degree(d, 3)?;
    check_theta(theta)?;
    if n == 0 {
        return Err(Error::domain("sphere radius must be at least 1"));
    }
    Ok(sphere_size_f64(d, n) * theta.powi(n as i32))
}

/// Distance-`n` correlation of the Gaussian wave function at eigenvalue `rho_d`:
/// `(n (d - 2) / d + 1) (d - 1)^(-n/2)`.
pub fn cghv_correlation(d: u32, n: u32) -> Result<f64> {
    check_degree(d, 3)?;
    let df = f64::from(d);
    let n = f64::from(n);
    Ok((n * (df - 2.0) / df + 1.0) * (df - 1.0).powf(-n / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn spectral_radius_values() {
        assert_abs_diff_eq!(spectral_radius(3).unwrap(), 0.942_809_0, epsilon = 1e-7);
        assert_abs_diff_eq!(spectral_radius(4).unwrap(), 0.866_025_4, epsilon = 1e-7);
        assert_eq!(spectral_radius(2).unwrap(), 1.0);
        assert!(matches!(spectral_radius(1), Err(Error::Domain(_))));
    }

    #[test]
    fn sign_flip_values() {
        assert_abs_diff_eq!(sign_flip_probability(0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(sign_flip_probability(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(sign_flip_probability(-0.942_809_0).unwrap(), 0.891_826_5, epsilon = 1e-6);
        // the d=3 max-bisection bound divided by d/2
        assert_abs_diff_eq!(
            sign_flip_probability(-spectral_radius(3).unwrap()).unwrap(),
            bisection_bound(3, CutMode::Max).unwrap() / 1.5,
            epsilon = 1e-15
        );
        assert!(sign_flip_probability(1.0 + 1e-13).is_ok());
        assert!(sign_flip_probability(1.01).is_err());
        assert!(sign_flip_probability(f64::NAN).is_err());
    }

    #[test]
    fn bisection_bounds() {
        assert_abs_diff_eq!(bisection_bound(3, CutMode::Min).unwrap(), 0.162_260_2, epsilon = 1e-7);
        assert_abs_diff_eq!(bisection_bound(3, CutMode::Max).unwrap(), 1.337_739_8, epsilon = 1e-7);
        assert_abs_diff_eq!(bisection_bound(4, CutMode::Min).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bisection_bound(4, CutMode::Max).unwrap(), 5.0 / 3.0, epsilon = 1e-12);
        assert!(bisection_bound(2, CutMode::Min).is_err());
    }

    #[test]
    fn sphere_sizes() {
        assert_eq!(sphere_size(3, 0).unwrap(), 1);
        assert_eq!(sphere_size(3, 1).unwrap(), 3);
        assert_eq!(sphere_size(3, 2).unwrap(), 6);
        assert_eq!(sphere_size(4, 3).unwrap(), 36);
        assert!(matches!(sphere_size(3, 200), Err(Error::Resource(_))));
    }

    #[test]
    fn block_factor_values() {
        let c = block_factor_correlation(3, 327).unwrap();
        assert_abs_diff_eq!(c, -0.940_884_9, epsilon = 1e-7);
        let p = sign_flip_probability(c).unwrap();
        assert!(p >= 0.89);
        assert_abs_diff_eq!(p, 0.8900, epsilon = 1e-4);
        assert_abs_diff_eq!(block_factor_correlation(3, 2).unwrap(), -2.0 * 2f64.sqrt() / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(block_factor_correlation(3, 3).unwrap(), -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(
            block_factor_correlation(3, 1_000_000).unwrap(),
            -spectral_radius(3).unwrap(),
            epsilon = 1e-6
        );
        assert!(block_factor_correlation(3, 1).is_err());
    }

    #[test]
    fn markov_formulas() {
        for n in 1..6 {
            assert_eq!(mc_variance_ratio(3, 0.0, n).unwrap(), 1.0);
            assert_eq!(mc_root_sphere_covariance(3, 0.0, n).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(mc_variance_ratio(3, 1.0, 1).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mc_variance_ratio(3, 0.5, 2).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mc_root_sphere_covariance(3, 0.5, 2).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mc_root_sphere_covariance(3, 1.0, 1).unwrap(), 3.0, epsilon = 1e-12);
        assert!(mc_variance_ratio(3, 1.5, 2).is_err());
        // theta = 1 makes Sigma_n = |S_n| sigma(o)
        for n in 1..8 {
            assert_abs_diff_eq!(mc_variance_ratio(3, 1.0, n).unwrap(), sphere_size_f64(3, n), epsilon = 1e-9);
        }
    }

    #[test]
    fn cghv_values() {
        assert_eq!(cghv_correlation(3, 0).unwrap(), 1.0);
        assert_abs_diff_eq!(cghv_correlation(3, 1).unwrap(), 0.942_809_0, epsilon = 1e-7);
        assert_abs_diff_eq!(cghv_correlation(3, 2).unwrap(), 0.833_333_3, epsilon = 1e-7);
    }

    /// Brute force over the 2^|B_n| spin patterns of B_n, weighting each
    /// pattern by the product of transition probabilities.
    fn brute_force_mc(d: u32, theta: f64, n: u32) -> (f64, f64) {
        let mut parent = vec![usize::MAX];
        let mut depth = vec![0u32];
        let mut frontier = vec![0usize];
        for k in 1..=n {
            let mut next = Vec::new();
            for &v in &frontier {
                let kids = if k == 1 { d } else { d - 1 };
                for _ in 0..kids {
                    parent.push(v);
                    depth.push(k);
                    next.push(parent.len() - 1);
                }
            }
            frontier = next;
        }
        let m = parent.len();
        let keep = (1.0 + theta) / 2.0;
        let (mut e_s, mut e_s2, mut e_os) = (0.0, 0.0, 0.0);
        for mask in 0u64..(1 << m) {
            let spin = |v: usize| if mask >> v & 1 == 1 { 1.0 } else { -1.0 };
            let mut p = 0.5;
            for (v, &u) in parent.iter().enumerate().skip(1) {
                p *= if spin(v) == spin(u) { keep } else { 1.0 - keep };
            }
            let sigma: f64 = (0..m).filter(|&v| depth[v] == n).map(spin).sum();
            e_s += p * sigma;
            e_s2 += p * sigma * sigma;
            e_os += p * spin(0) * sigma;
        }
        let size = sphere_size_f64(d, n);
        ((e_s2 - e_s * e_s) / size, e_os)
    }

    #[test]
    fn markov_formulas_match_enumeration() {
        for &(d, n) in &[(3, 1), (3, 2), (3, 3), (4, 2)] {
            for &theta in &[-0.7, 0.0, 0.3, 0.5, 0.9] {
                let (var_ratio, cov) = brute_force_mc(d, theta, n);
                assert_abs_diff_eq!(mc_variance_ratio(d, theta, n).unwrap(), var_ratio, epsilon = 1e-10);
                assert_abs_diff_eq!(mc_root_sphere_covariance(d, theta, n).unwrap(), cov, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn variance_ratio_growth_regimes() {
        // (d-1) theta^2 = 1.28 > 1: unbounded
        let big: Vec<f64> = (1..40).map(|n| mc_variance_ratio(3, 0.8, n).unwrap()).collect();
        assert!(big.windows(2).all(|w| w[1] > w[0]));
        assert!(big[38] > 1e3);
        // (d-1) theta^2 = 0.5 < 1: bounded
        let small: Vec<f64> = (1..40).map(|n| mc_variance_ratio(3, 0.5, n).unwrap()).collect();
        assert!(small.iter().all(|&v| v < 3.0));
    }

    #[test]
    fn block_factor_monotone_toward_rho() {
        for d in 3..7 {
            let rho = spectral_radius(d).unwrap();
            let mut prev = 0.0;
            for n in 2..200 {
                let c = block_factor_correlation(d, n).unwrap().abs();
                assert!(c > prev && c < rho);
                prev = c;
            }
        }
    }

    proptest! {
        #[test]
        fn bounds_sum_to_half_degree(d in 3u32..200) {
            let s = bisection_bound(d, CutMode::Min).unwrap() + bisection_bound(d, CutMode::Max).unwrap();
            prop_assert!((s - f64::from(d) / 2.0).abs() < 1e-12);
        }

        #[test]
        fn flip_probability_is_antisymmetric(rho in -1.0f64..=1.0) {
            let s = sign_flip_probability(rho).unwrap() + sign_flip_probability(-rho).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-14);
        }
    }
}

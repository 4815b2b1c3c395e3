//! Sphere-sum statistics for detecting processes that cannot be factors of IID.
//!
//! For a process `sigma` on the tree, `Sigma_n` is the sum of `sigma` over the
//! sphere of radius `n`. A process whose `Var(Sigma_n) / |S_n|` grows without
//! bound while `Corr(sigma(o), Sigma_n)` stays away from zero is not a factor
//! of IID. The estimators here measure both quantities on tree balls and
//! [`classify`] turns a finite trajectory into a verdict.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{BlockFactorSpec, TreeBlockFactor};
use crate::math::{mc_root_sphere_covariance, mc_variance_ratio, sphere_size_f64, MarkovParams};
use crate::processes::{sample_iid_spins, sample_mc_cluster, sample_mc_direct, UniformLabelField};
use crate::rng::{substream_rng, SimRng};
use crate::stats::jackknife_pair;
use crate::tree::TreeBall;

/// Smallest replica count accepted by [`sphere_sum_stats`].
pub const MIN_REPLICAS: usize = 100;

/// A real-valued process that can be sampled on a tree ball.
pub trait BallSampler: Sync {
    fn name(&self) -> String;

    /// One configuration, indexed like the ball's vertices.
    fn sample(&self, ball: &TreeBall, rng: &mut SimRng) -> Vec<f64>;

    /// The Markov parameter, for processes that have one.
    fn theta(&self) -> Option<f64> {
        None
    }
}

pub struct IidSpins;

impl BallSampler for IidSpins {
    fn name(&self) -> String {
        "iid".into()
    }

    fn sample(&self, ball: &TreeBall, rng: &mut SimRng) -> Vec<f64> {
        sample_iid_spins(ball, rng).to_f64()
    }
}

pub struct MarkovDirect(pub MarkovParams);

impl BallSampler for MarkovDirect {
    fn name(&self) -> String {
        "mc-direct".into()
    }

    fn sample(&self, ball: &TreeBall, rng: &mut SimRng) -> Vec<f64> {
        sample_mc_direct(ball, &self.0, rng).to_f64()
    }

    fn theta(&self) -> Option<f64> {
        Some(self.0.theta())
    }
}

pub struct MarkovCluster(pub MarkovParams);

impl BallSampler for MarkovCluster {
    fn name(&self) -> String {
        "mc-cluster".into()
    }

    fn sample(&self, ball: &TreeBall, rng: &mut SimRng) -> Vec<f64> {
        let labels = UniformLabelField::sample(ball, rng);
        sample_mc_cluster(ball, &self.0, &labels).to_f64()
    }

    fn theta(&self) -> Option<f64> {
        Some(self.0.theta())
    }
}

/// Gaussian block factor on a ball, optionally rounded to signs. Only
/// vertices whose neighbourhood fits in the ball carry values, so the ball
/// must be larger than the largest sphere examined by `n - 1`.
pub struct GaussianBlock {
    factor: TreeBlockFactor,
    spec: BlockFactorSpec,
    rounded: bool,
}

impl GaussianBlock {
    pub fn new(ball: &TreeBall, spec: BlockFactorSpec, rounded: bool) -> Result<Self> {
        Ok(Self { factor: TreeBlockFactor::new(ball, &spec)?, spec, rounded })
    }

    /// Largest sphere radius with all values defined.
    pub fn max_sphere(&self, ball: &TreeBall) -> u32 {
        ball.radius() - self.spec.support_radius()
    }
}

impl BallSampler for GaussianBlock {
    fn name(&self) -> String {
        if self.rounded { "gauss-sign" } else { "gauss" }.into()
    }

    fn sample(&self, _ball: &TreeBall, rng: &mut SimRng) -> Vec<f64> {
        let field = self.factor.sample(rng);
        if self.rounded {
            // values are nonzero almost surely; an exact zero rounds up
            field.values.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect()
        } else {
            field.values
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Obstructed,
    NotObstructed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub d: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub process: String,
    pub n_values: Vec<u32>,
    pub var_ratio: Vec<f64>,
    pub var_ratio_se: Vec<f64>,
    pub root_corr: Vec<f64>,
    pub root_corr_se: Vec<f64>,
    pub classification: Classification,
}

/// Decision thresholds for [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Minimum slope of `ln(var_ratio)` against `n` that counts as growth.
    pub growth_threshold: f64,
    /// Correlations below this count as vanished.
    pub corr_floor: f64,
    /// Two-sided 95% normal quantile used for the slope interval.
    pub slope_z: f64,
    /// Multiple of the standard error used for correlation bounds.
    pub corr_z: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { growth_threshold: 1.05f64.ln(), corr_floor: 0.05, slope_z: 1.96, corr_z: 3.0 }
    }
}

/// Draws `replicas` independent configurations (replica `i` uses substream
/// `i` of `seed`) and estimates, for each radius, `Var(Sigma_n) / |S_n|` and
/// `Corr(sigma(o), Sigma_n)` with delete-one jackknife standard errors.
pub fn sphere_sum_stats<S: BallSampler + ?Sized>(
    sampler: &S,
    ball: &TreeBall,
    n_values: &[u32],
    replicas: usize,
    seed: u64,
) -> Result<ObstructionReport> {
    if n_values.is_empty() {
        return Err(Error::domain("no radii requested"));
    }
    if let Some(&n) = n_values.iter().find(|&&n| n > ball.radius()) {
        return Err(Error::domain(format!("radius {n} exceeds the ball radius {}", ball.radius())));
    }
    if replicas < MIN_REPLICAS {
        return Err(Error::domain(format!("at least {MIN_REPLICAS} replicas are required, got {replicas}")));
    }
    let spheres: Vec<_> = n_values.iter().map(|&n| ball.sphere(n).unwrap()).collect();
    let draws: Vec<(f64, Vec<f64>)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream_rng(seed, i as u64);
            let values = sampler.sample(ball, &mut rng);
            let sums = spheres.iter().map(|s| values[s.clone()].iter().sum()).collect();
            (values[0], sums)
        })
        .collect();

    let root: Vec<f64> = draws.iter().map(|(r, _)| *r).collect();
    let mut report = ObstructionReport {
        d: ball.d(),
        theta: sampler.theta(),
        process: sampler.name(),
        n_values: n_values.to_vec(),
        var_ratio: Vec::new(),
        var_ratio_se: Vec::new(),
        root_corr: Vec::new(),
        root_corr_se: Vec::new(),
        classification: Classification::Inconclusive,
    };
    for (j, &n) in n_values.iter().enumerate() {
        let sums: Vec<f64> = draws.iter().map(|(_, s)| s[j]).collect();
        let stats = jackknife_pair(&root, &sums);
        if stats.var_x <= 0.0 {
            return Err(Error::domain("the sampler has zero variance at the root"));
        }
        let size = sphere_size_f64(ball.d(), n);
        report.var_ratio.push(stats.var_y / size);
        report.var_ratio_se.push(stats.var_y_se / size);
        report.root_corr.push(stats.corr);
        report.root_corr_se.push(stats.corr_se);
    }
    report.classification = classify(&report, &ClassifierConfig::default());
    Ok(report)
}

/// Closed-form `(Var(Sigma_n) / |S_n|, Corr(sigma(o), Sigma_n))` for the
/// tree-indexed Markov chain.
pub fn mc_exact_stats(d: u32, theta: f64, n: u32) -> Result<(f64, f64)> {
    let var_ratio = mc_variance_ratio(d, theta, n)?;
    let cov = mc_root_sphere_covariance(d, theta, n)?;
    Ok((var_ratio, cov / (sphere_size_f64(d, n) * var_ratio).sqrt()))
}

/// A report built from the closed forms, with zero standard errors.
pub fn mc_exact_report(d: u32, theta: f64, n_values: &[u32]) -> Result<ObstructionReport> {
    let _ = MarkovParams::new(d, theta)?;
    let stats = n_values.iter().map(|&n| mc_exact_stats(d, theta, n)).collect::<Result<Vec<_>>>()?;
    let mut report = ObstructionReport {
        d,
        theta: Some(theta),
        process: "mc-exact".into(),
        n_values: n_values.to_vec(),
        var_ratio: stats.iter().map(|s| s.0).collect(),
        var_ratio_se: vec![0.0; n_values.len()],
        root_corr: stats.iter().map(|s| s.1).collect(),
        root_corr_se: vec![0.0; n_values.len()],
        classification: Classification::Inconclusive,
    };
    report.classification = classify(&report, &ClassifierConfig::default());
    Ok(report)
}

/// Least-squares slope of `ln(var_ratio)` on `n`, with a standard error.
///
/// The error bound `sum_i |c_i| se_i` holds whatever the correlation between
/// the per-radius estimates, since they come from the same replicas.
pub fn log_growth_slope(report: &ObstructionReport) -> (f64, f64) {
    let xs: Vec<f64> = report.n_values.iter().map(|&n| f64::from(n)).collect();
    let k = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let mut slope = 0.0;
    let mut se = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let c = (x - mean_x) / sxx;
        let v = report.var_ratio[i];
        slope += c * v.ln();
        se += c.abs() * report.var_ratio_se[i] / v;
    }
    (slope, se)
}

/// Finite-sample verdict on the two limiting conditions.
///
/// Obstructed: the log-variance slope exceeds the growth threshold with 95%
/// confidence, and at both of the two largest radii `|corr| - 3 se` exceeds the
/// correlation floor. Not obstructed: the slope is below the threshold with
/// 95% confidence, or `|corr| + 3 se` at the largest radius is below the
/// floor. Anything else, including fewer than three radii, is inconclusive.
pub fn classify(report: &ObstructionReport, config: &ClassifierConfig) -> Classification {
    let k = report.n_values.len();
    if k < 3 || report.var_ratio.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Classification::Inconclusive;
    }
    let (slope, slope_se) = log_growth_slope(report);
    let growing = slope - config.slope_z * slope_se > config.growth_threshold;
    let flat = slope + config.slope_z * slope_se < config.growth_threshold;

    let lower = |i: usize| report.root_corr[i].abs() - config.corr_z * report.root_corr_se[i];
    let corr_persists = lower(k - 1).min(lower(k - 2)) > config.corr_floor;
    let corr_vanishes = report.root_corr[k - 1].abs() + config.corr_z * report.root_corr_se[k - 1] < config.corr_floor;

    if growing && corr_persists {
        Classification::Obstructed
    } else if flat || corr_vanishes {
        Classification::NotObstructed
    } else {
        Classification::Inconclusive
    }
}

//! Duration distributions: fitting by moments / maximum likelihood with
//! Kolmogorov–Smirnov family selection, and seeded sampling.

use rand::Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("cannot fit a distribution to an empty sample")]
    Empty,
    #[error("durations must be finite and non-negative, got {0}")]
    InvalidValue(f64),
    #[error("invalid {family} parameters: {reason}")]
    InvalidParams {
        family: &'static str,
        reason: String,
    },
}

/// A non-negative duration distribution, in seconds.
///
/// Serialised as `{"family": "exponential", "params": {"mean": 600.0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DurationDistribution {
    Fixed {
        value: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
    Exponential {
        mean: f64,
    },
    /// Parameters of the underlying normal distribution.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
}

/// KS statistics within this margin of the best fit prefer the family
/// listed first in the candidate order (fewer parameters first).
const PARSIMONY_MARGIN: f64 = 0.01;

impl DurationDistribution {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Fixed { .. } => "fixed",
            Self::Uniform { .. } => "uniform",
            Self::Normal { .. } => "normal",
            Self::Exponential { .. } => "exponential",
            Self::LogNormal { .. } => "log_normal",
            Self::Gamma { .. } => "gamma",
        }
    }

    /// Mean of the family before truncation at zero.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Fixed { value } => value,
            Self::Uniform { min, max } => (min + max) / 2.0,
            Self::Normal { mean, .. } | Self::Exponential { mean } => mean,
            Self::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
            Self::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn validate(&self) -> Result<(), DistributionError> {
        let bad = |family: &'static str, reason: &str| {
            Err(DistributionError::InvalidParams {
                family,
                reason: reason.to_string(),
            })
        };
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            Self::Fixed { value } if !value.is_finite() || value < 0.0 => {
                bad("fixed", "value must be finite and >= 0")
            }
            Self::Uniform { min, max } if !finite(&[min, max]) || min < 0.0 || max < min => {
                bad("uniform", "need 0 <= min <= max")
            }
            Self::Normal { mean, std } if !finite(&[mean, std]) || std <= 0.0 => {
                bad("normal", "std must be > 0")
            }
            Self::Exponential { mean } if !mean.is_finite() || mean <= 0.0 => {
                bad("exponential", "mean must be > 0")
            }
            Self::LogNormal { mu, sigma } if !finite(&[mu, sigma]) || sigma <= 0.0 => {
                bad("log_normal", "sigma must be > 0")
            }
            Self::Gamma { shape, scale }
                if !finite(&[shape, scale]) || shape <= 0.0 || scale <= 0.0 =>
            {
                bad("gamma", "shape and scale must be > 0")
            }
            _ => Ok(()),
        }
    }

    /// CDF of the distribution as sampled (negative mass collapsed at 0).
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Fixed { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform { min, max } => {
                if x >= max {
                    1.0
                } else if x < min {
                    0.0
                } else {
                    (x - min) / (max - min)
                }
            }
            Self::Normal { mean, std } => {
                statrs::distribution::Normal::new(mean, std).map_or(0.0, |d| d.cdf(x))
            }
            Self::Exponential { mean } => 1.0 - (-x / mean).exp(),
            Self::LogNormal { mu, sigma } => {
                statrs::distribution::LogNormal::new(mu, sigma).map_or(0.0, |d| d.cdf(x))
            }
            Self::Gamma { shape, scale } => {
                statrs::distribution::Gamma::new(shape, 1.0 / scale).map_or(0.0, |d| d.cdf(x))
            }
        }
    }

    /// Draws one duration in seconds; never negative.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let raw = match *self {
            Self::Fixed { value } => value,
            Self::Uniform { min, max } => {
                if max > min {
                    rng.random_range(min..max)
                } else {
                    min
                }
            }
            Self::Normal { mean, std } => {
                rand_distr::Normal::new(mean, std).map_or(mean, |d| d.sample(rng))
            }
            Self::Exponential { mean } => {
                rand_distr::Exp::new(1.0 / mean).map_or(mean, |d| d.sample(rng))
            }
            Self::LogNormal { mu, sigma } => {
                rand_distr::LogNormal::new(mu, sigma).map_or(mu.exp(), |d| d.sample(rng))
            }
            Self::Gamma { shape, scale } => {
                rand_distr::Gamma::new(shape, scale).map_or(shape * scale, |d| d.sample(rng))
            }
        };
        raw.max(0.0)
    }
}

/// One-sample Kolmogorov–Smirnov statistic of `sorted` against `dist`.
pub fn ks_statistic(sorted: &[f64], dist: &DurationDistribution) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // Treat ties as one step of the empirical CDF.
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = dist.cdf(x);
        // The model CDF just below x, ignoring its own atom at x.
        let f_below = match dist {
            DurationDistribution::Fixed { value } if x == *value => 0.0,
            _ if x == 0.0 => 0.0,
            _ => f,
        };
        d = d
            .max((i as f64 / n - f_below).abs())
            .max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Candidate fits in order of preference.
fn candidates(xs: &[f64]) -> Vec<DurationDistribution> {
    let (mean, var) = mean_and_variance(xs);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    if mean > 0.0 {
        out.push(DurationDistribution::Exponential { mean });
    }
    out.push(DurationDistribution::Uniform { min, max });
    out.push(DurationDistribution::Normal {
        mean,
        std: var.sqrt(),
    });
    if min > 0.0 {
        let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let (mu, log_var) = mean_and_variance(&logs);
        if log_var > 0.0 {
            out.push(DurationDistribution::LogNormal {
                mu,
                sigma: log_var.sqrt(),
            });
        }
    }
    if mean > 0.0 {
        out.push(DurationDistribution::Gamma {
            shape: mean * mean / var,
            scale: var / mean,
        });
    }
    out.retain(|d| d.validate().is_ok());
    out
}

/// Fits a duration distribution to `delays`.
///
/// Zero-variance samples give `fixed`. Otherwise every family that admits
/// the sample is fitted (maximum likelihood, moments for gamma) and the one
/// with the lowest KS statistic wins, preferring simpler families on
/// near-ties.
pub fn fit_distribution(delays: &[f64]) -> Result<DurationDistribution, DistributionError> {
    if delays.is_empty() {
        return Err(DistributionError::Empty);
    }
    if let Some(&bad) = delays.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(DistributionError::InvalidValue(bad));
    }
    let mut sorted = delays.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Ok(DurationDistribution::Fixed { value: sorted[0] });
    }
    let scored: Vec<(DurationDistribution, f64)> = candidates(&sorted)
        .into_iter()
        .map(|d| {
            let ks = ks_statistic(&sorted, &d);
            (d, ks)
        })
        .collect();
    let best = scored
        .iter()
        .map(|(_, ks)| *ks)
        .fold(f64::INFINITY, f64::min);
    let chosen = scored
        .into_iter()
        .find(|(_, ks)| *ks <= best + PARSIMONY_MARGIN)
        .map(|(d, _)| d)
        .expect("uniform and normal are always candidates");
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn draws(dist: &DurationDistribution, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_sample_is_fixed() {
        assert_eq!(
            fit_distribution(&[3600.0, 3600.0, 3600.0]).unwrap(),
            DurationDistribution::Fixed { value: 3600.0 }
        );
    }

    #[test]
    fn empty_and_invalid_samples() {
        assert_eq!(fit_distribution(&[]), Err(DistributionError::Empty));
        assert_eq!(
            fit_distribution(&[1.0, -2.0]),
            Err(DistributionError::InvalidValue(-2.0))
        );
    }

    #[test]
    fn exponential_sample_is_recognised() {
        let data = draws(
            &DurationDistribution::Exponential { mean: 600.0 },
            10_000,
            7,
        );
        let fit = fit_distribution(&data).unwrap();
        assert_eq!(fit.family(), "exponential", "{fit:?}");
        assert!((fit.mean() - 600.0).abs() / 600.0 < 0.05, "{fit:?}");
    }

    #[test]
    fn moment_check_on_zero_heavy_sample() {
        let fit = fit_distribution(&[0.0, 0.0, 7200.0]).unwrap();
        assert!((fit.mean() - 2400.0).abs() / 2400.0 < 0.10, "{fit:?}");
    }

    #[test]
    fn fixed_sample_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DurationDistribution::Fixed { value: 900.0 };
        assert!((0..100).all(|_| d.sample(&mut rng) == 900.0));
    }

    #[test]
    fn exponential_sample_mean_converges() {
        let data = draws(
            &DurationDistribution::Exponential { mean: 600.0 },
            100_000,
            3,
        );
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        assert!((mean - 600.0).abs() / 600.0 < 0.02, "{mean}");
    }

    #[test]
    fn normal_samples_truncated_at_zero() {
        let data = draws(
            &DurationDistribution::Normal {
                mean: 100.0,
                std: 50.0,
            },
            20_000,
            5,
        );
        assert!(data.iter().all(|&x| x >= 0.0));
        assert!(data.contains(&0.0));
    }

    #[test]
    fn seed_determinism() {
        let d = DurationDistribution::Gamma {
            shape: 2.0,
            scale: 300.0,
        };
        assert_eq!(draws(&d, 50, 11), draws(&d, 50, 11));
        assert_ne!(draws(&d, 50, 11), draws(&d, 50, 12));
    }

    #[test]
    fn refit_recovers_family() {
        for original in [
            DurationDistribution::Exponential { mean: 1800.0 },
            DurationDistribution::Uniform {
                min: 600.0,
                max: 3600.0,
            },
            DurationDistribution::Normal {
                mean: 7200.0,
                std: 600.0,
            },
            DurationDistribution::Fixed { value: 7200.0 },
        ] {
            let first = fit_distribution(&draws(&original, 100_000, 21)).unwrap();
            assert_eq!(first.family(), original.family());
            let second = fit_distribution(&draws(&first, 100_000, 22)).unwrap();
            assert_eq!(second.family(), original.family());
        }
    }

    #[test]
    fn json_shape() {
        let d = DurationDistribution::Exponential { mean: 600.0 };
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"family":"exponential","params":{"mean":600.0}}"#);
        assert_eq!(
            serde_json::from_str::<DurationDistribution>(&json).unwrap(),
            d
        );
    }

    #[test]
    fn validation_rejects_nonsense() {
        assert!(DurationDistribution::Normal {
            mean: 1.0,
            std: 0.0
        }
        .validate()
        .is_err());
        assert!(DurationDistribution::Uniform { min: 5.0, max: 1.0 }
            .validate()
            .is_err());
        assert!(DurationDistribution::Fixed { value: -1.0 }
            .validate()
            .is_err());
        assert!(DurationDistribution::Gamma {
            shape: 1.0,
            scale: 2.0
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn ks_of_perfect_uniform_grid_is_small() {
        let data: Vec<f64> = (0..1000).map(|i| i as f64 + 0.5).collect();
        let d = DurationDistribution::Uniform {
            min: 0.0,
            max: 1000.0,
        };
        assert!(ks_statistic(&data, &d) <= 0.0005 + 1e-12);
    }
}

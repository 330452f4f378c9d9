//! Local probabilistic models.
//!
//! A [`LocalModel`] is a density fitted to the samples of one class inside a
//! [`Region`] and renormalized so that it integrates to one over that region.
//! Three assumptions are available, from simplest to most flexible:
//!
//! * LUA, uniform: `f_R(x) = 1 / V(R)`.
//! * LGA, Gaussian with per-feature mean and variance, truncated to `R`.
//! * LCA, Gaussian-kernel density estimate with per-feature bandwidths,
//!   truncated to `R`.
//!
//! Features are modelled as independent inside the region, so both the
//! density and its integral over the hypercube factor into one-dimensional
//! terms. Everything is evaluated in log space.

mod independence;
pub mod normal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use independence::{verify_local_independence, IndexBox};
pub use normal::{log_interval_mass, log_sum_exp, std_normal_cdf};

use crate::error::{Error, Result};
use crate::neighborhood::Region;
use normal::log_std_normal_pdf;

/// Lower bound on every fitted per-feature variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Lower bound on Silverman bandwidths.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// h = 1 for every feature.
    Unit,
    /// h_j = 1.06 σ_j k^(-1/5).
    #[default]
    Silverman,
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(Bandwidth::Unit),
            "silverman" => Ok(Bandwidth::Silverman),
            other => Err(Error::invalid(format!("unknown bandwidth rule '{other}'"))),
        }
    }
}

/// How the Gaussian of LGA gets its covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Covariance {
    /// Per-feature variances of the members (diagonal covariance).
    #[default]
    Diagonal,
    /// Unit variances and no region normalization. This is the local-mean
    /// rule: the score reduces to minus half the squared Euclidean distance
    /// to the local center.
    Identity,
}

/// Local model assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Assumption {
    Lua,
    Lga {
        #[serde(default)]
        covariance: Covariance,
    },
    Lca {
        #[serde(default)]
        bandwidth: Bandwidth,
    },
}

impl Assumption {
    pub const LGA: Assumption = Assumption::Lga {
        covariance: Covariance::Diagonal,
    };

    pub fn lca(bandwidth: Bandwidth) -> Assumption {
        Assumption::Lca { bandwidth }
    }

    /// Complexity rank: LUA < LGA < LCA.
    pub fn rank(&self) -> u8 {
        match self {
            Assumption::Lua => 0,
            Assumption::Lga { .. } => 1,
            Assumption::Lca { .. } => 2,
        }
    }

    /// The three assumptions searched during model selection.
    pub fn standard_set(bandwidth: Bandwidth) -> Vec<Assumption> {
        vec![Assumption::Lua, Assumption::LGA, Assumption::lca(bandwidth)]
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::Lua => "lua",
            Assumption::Lga {
                covariance: Covariance::Diagonal,
            } => "lga",
            Assumption::Lga {
                covariance: Covariance::Identity,
            } => "lga-identity",
            Assumption::Lca {
                bandwidth: Bandwidth::Unit,
            } => "lca-unit",
            Assumption::Lca {
                bandwidth: Bandwidth::Silverman,
            } => "lca-silverman",
        })
    }
}

impl FromStr for Assumption {
    type Err = Error;

    /// Accepts `lua`, `lga`, `lga-identity`, `lca` (default bandwidth),
    /// `lca-unit` and `lca-silverman`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "lua" => Ok(Assumption::Lua),
            "lga" => Ok(Assumption::LGA),
            "lga-identity" => Ok(Assumption::Lga {
                covariance: Covariance::Identity,
            }),
            "lca" => Ok(Assumption::lca(Bandwidth::default())),
            _ => match s.strip_prefix("lca-") {
                Some(rule) => Ok(Assumption::lca(rule.parse()?)),
                None => Err(Error::invalid(format!("unknown assumption '{s}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Uniform,
    Gaussian {
        mean: Vec<f64>,
        var: Vec<f64>,
        normalized: bool,
    },
    Kernel {
        /// Member points, row-major.
        centers: Vec<f64>,
        bandwidth: Vec<f64>,
    },
}

/// A fitted local density for one class in one region.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    assumption: Assumption,
    region: Region,
    k: usize,
    params: Params,
    /// ln ∫_R f. Zero for unbounded regions and for LUA.
    log_normalizer: f64,
}

impl LocalModel {
    /// Fits `assumption` to `members`, which must all lie inside `region`.
    pub fn fit(assumption: Assumption, region: Region, members: &[&[f64]]) -> Result<LocalModel> {
        let d = region.dim();
        if members.is_empty() {
            return Err(Error::invalid("cannot fit a local model without members"));
        }
        if let Some(bad) = members.iter().position(|m| m.len() != d) {
            return Err(Error::invalid(format!(
                "member {bad} has {} features, region has {d}",
                members[bad].len()
            )));
        }
        if let Some(bad) = members.iter().position(|m| !region.contains(m)) {
            return Err(Error::invalid(format!("member {bad} lies outside the region")));
        }
        let k = members.len();
        let params = match assumption {
            Assumption::Lua => {
                if !region.is_bounded() {
                    return Err(Error::invalid(
                        "the uniform assumption needs a bounded region",
                    ));
                }
                Params::Uniform
            }
            Assumption::Lga { covariance } => {
                let (mean, var) = moments(members, d);
                match covariance {
                    Covariance::Diagonal => Params::Gaussian {
                        mean,
                        var: var.into_iter().map(|v| v.max(VARIANCE_FLOOR)).collect(),
                        normalized: true,
                    },
                    Covariance::Identity => Params::Gaussian {
                        mean,
                        var: vec![1.0; d],
                        normalized: false,
                    },
                }
            }
            Assumption::Lca { bandwidth } => {
                let h = match bandwidth {
                    Bandwidth::Unit => vec![1.0; d],
                    Bandwidth::Silverman => silverman_bandwidth(members, d),
                };
                Params::Kernel {
                    centers: members.iter().flat_map(|m| m.iter().copied()).collect(),
                    bandwidth: h,
                }
            }
        };
        let log_normalizer = log_normalizer(&region, &params, d);
        Ok(LocalModel {
            assumption,
            region,
            k,
            params,
            log_normalizer,
        })
    }

    pub fn assumption(&self) -> Assumption {
        self.assumption
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn k_members(&self) -> usize {
        self.k
    }

    /// Fitted per-feature mean (LGA only).
    pub fn mean(&self) -> Option<&[f64]> {
        match &self.params {
            Params::Gaussian { mean, .. } => Some(mean),
            _ => None,
        }
    }

    /// Fitted per-feature variance (LGA only).
    pub fn variance(&self) -> Option<&[f64]> {
        match &self.params {
            Params::Gaussian { var, .. } => Some(var),
            _ => None,
        }
    }

    /// Kernel bandwidths (LCA only).
    pub fn bandwidth(&self) -> Option<&[f64]> {
        match &self.params {
            Params::Kernel { bandwidth, .. } => Some(bandwidth),
            _ => None,
        }
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// ln f_R(x). `-inf` outside the region, and also when the region
    /// integral is not representable even in log space.
    pub fn log_lpd(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.region.dim() {
            return Err(Error::invalid(format!(
                "point has {} features, model has {}",
                x.len(),
                self.region.dim()
            )));
        }
        if !self.region.contains(x) || !self.log_normalizer.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let unnormalized = match &self.params {
            Params::Uniform => return Ok(-self.region.log_volume()),
            Params::Gaussian { mean, var, .. } => x
                .iter()
                .zip(mean.iter().zip(var))
                .map(|(xj, (m, v))| {
                    let sd = v.sqrt();
                    log_std_normal_pdf((xj - m) / sd) - sd.ln()
                })
                .sum::<f64>(),
            Params::Kernel { centers, bandwidth } => {
                let d = bandwidth.len();
                let log_h: f64 = bandwidth.iter().map(|h| h.ln()).sum();
                let terms: Vec<f64> = centers
                    .chunks_exact(d)
                    .map(|c| {
                        c.iter()
                            .zip(x.iter().zip(bandwidth))
                            .map(|(ci, (xj, h))| log_std_normal_pdf((xj - ci) / h))
                            .sum::<f64>()
                    })
                    .collect();
                log_sum_exp(&terms) - (self.k as f64).ln() - log_h
            }
        };
        Ok(unnormalized - self.log_normalizer)
    }
}

fn moments(members: &[&[f64]], d: usize) -> (Vec<f64>, Vec<f64>) {
    let k = members.len() as f64;
    let mut mean = vec![0.0; d];
    for m in members {
        for (acc, v) in mean.iter_mut().zip(m.iter()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= k);
    let mut var = vec![0.0; d];
    for m in members {
        for ((acc, v), mu) in var.iter_mut().zip(m.iter()).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= k);
    (mean, var)
}

/// h_j = 1.06 σ_j k^(-1/5) with σ_j floored at sqrt(VARIANCE_FLOOR) and h_j
/// floored at BANDWIDTH_FLOOR.
pub fn silverman_bandwidth(members: &[&[f64]], d: usize) -> Vec<f64> {
    let (_, var) = moments(members, d);
    let factor = 1.06 * (members.len() as f64).powf(-0.2);
    var.into_iter()
        .map(|v| (factor * v.max(VARIANCE_FLOOR).sqrt()).max(BANDWIDTH_FLOOR))
        .collect()
}

fn log_normalizer(region: &Region, params: &Params, d: usize) -> f64 {
    if !region.is_bounded() {
        return 0.0;
    }
    match params {
        Params::Uniform => 0.0,
        Params::Gaussian {
            normalized: false, ..
        } => 0.0,
        Params::Gaussian { mean, var, .. } => (0..d)
            .map(|j| {
                let (a, b) = region.bounds(j);
                let sd = var[j].sqrt();
                log_interval_mass((a - mean[j]) / sd, (b - mean[j]) / sd)
            })
            .sum(),
        Params::Kernel { centers, bandwidth } => {
            let per_member: Vec<f64> = centers
                .chunks_exact(d)
                .map(|c| {
                    (0..d)
                        .map(|j| {
                            let (a, b) = region.bounds(j);
                            log_interval_mass((a - c[j]) / bandwidth[j], (b - c[j]) / bandwidth[j])
                        })
                        .sum::<f64>()
                })
                .collect();
            log_sum_exp(&per_member) - (per_member.len() as f64).ln()
        }
    }
}

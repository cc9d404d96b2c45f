//! Dyadic logit estimation.
//!
//! [`fit_streaming`] is the production path: variance-reduced mini-batch
//! descent over the lazily generated dyad stream, with memory bounded by the
//! batch and the design width. [`fit_newton`] solves the same likelihood
//! exactly and serves as its oracle at small scale.

mod likelihood;
mod linalg;
mod margins;
mod newton;
mod report;
mod streaming;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use likelihood::{loglik_and_gradient, sigmoid};
pub use margins::{marginal_effects_at_mean, MarginalEffect};
pub use newton::{fit_newton, NewtonConfig, MATERIALIZE_LIMIT};
pub use report::{write_coefficient_table, write_fit_summary, write_margins_csv};
pub use streaming::{fit_by_country, fit_streaming, standard_errors, Method, OptimizerConfig};

pub(crate) use likelihood::{dot, full_pass, PassPlan, Pool};
pub(crate) use linalg::Cholesky;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub label: String,
    pub names: Vec<String>,
    /// Leading columns that form the `D` block.
    pub d_width: usize,
    pub beta: Vec<f64>,
    /// NaN (serialised as null) where the information matrix could not be inverted.
    #[serde(with = "nan_as_null")]
    pub se: Vec<f64>,
    /// Final average negative log-likelihood.
    pub loglik: f64,
    pub n_obs: u64,
    pub converged: bool,
    pub iterations: usize,
    pub config_hash: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn width(&self) -> usize {
        self.beta.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|c| self.beta[c])
    }

    pub fn z_values(&self) -> Vec<f64> {
        self.beta.iter().zip(&self.se).map(|(b, s)| b / s).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit results always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })
    }
}

/// Hex SHA-256 over the given configuration fragments.
pub fn config_digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Standard errors from a summed information matrix.
pub(crate) fn se_from_information(info: &[f64], names: &[String]) -> Result<Vec<f64>> {
    let k = names.len();
    let chol = Cholesky::factor(info, k).map_err(|dep| rank_error(&dep, names))?;
    Ok(chol.inverse_diagonal().into_iter().map(f64::sqrt).collect())
}

pub(crate) fn rank_error(dep: &linalg::Dependency, names: &[String]) -> Error {
    let mut columns: Vec<String> = dep.partners.iter().map(|&c| names[c].clone()).collect();
    columns.push(names[dep.column].clone());
    Error::RankDeficient { columns }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_nan_se() {
        let fit = FitResult {
            label: "world".into(),
            names: vec!["a".into(), "b".into()],
            d_width: 1,
            beta: vec![0.5, -1.25],
            se: vec![0.1, f64::NAN],
            loglik: 0.3,
            n_obs: 10,
            converged: true,
            iterations: 3,
            config_hash: config_digest(&["x"]),
            warnings: vec![],
        };
        let back = FitResult::from_json(&fit.to_json()).unwrap();
        assert_eq!(back.beta, fit.beta);
        assert!(back.se[1].is_nan());
        assert_eq!(back.config_hash.len(), 64);
    }
}

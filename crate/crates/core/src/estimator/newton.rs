use serde::{Deserialize, Serialize};

use super::{config_digest, full_pass, rank_error, se_from_information, Cholesky, FitResult, PassPlan, Pool};
use crate::design::RowSource;
use crate::error::{Error, Result};

/// Largest row count the exact solver accepts.
pub const MATERIALIZE_LIMIT: u64 = 5_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    /// Stop after a Newton step whose sup-norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub partitions: usize,
    pub workers: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iter: 100,
            partitions: 16,
            workers: 1,
        }
    }
}

/// Newton-Raphson on the full likelihood, with step halving.
pub fn fit_newton(src: &dyn RowSource, cfg: &NewtonConfig) -> Result<FitResult> {
    if src.len() > MATERIALIZE_LIMIT {
        return Err(Error::Config(format!(
            "exact solver is limited to {MATERIALIZE_LIMIT} rows, got {}",
            src.len()
        )));
    }
    if src.is_empty() {
        return Err(Error::Domain("no rows to fit".into()));
    }
    let names = src.names();
    let k = names.len();
    let pool = Pool::new(cfg.workers);
    let plan = PassPlan {
        partitions: cfg.partitions,
        pool: &pool,
        subsample: None,
    };
    let mut beta = vec![0.0; k];
    let mut acc = full_pass(src, &beta, true, &plan);
    let mut converged = false;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    loop {
        let grad = acc.mean_grad();
        if iterations == cfg.max_iter {
            break;
        }
        iterations += 1;
        let info = acc.info.as_ref().expect("pass requested the information matrix");
        let chol = Cholesky::factor(info, k).map_err(|dep| rank_error(&dep, &names))?;
        // info is the summed Hessian; scale the step to the averaged gradient.
        let n = acc.rows as f64;
        let step: Vec<f64> = chol.solve(&grad).into_iter().map(|s| s * n).collect();
        let current = acc.mean_nll();
        let small_step = step.iter().all(|s| s.abs() < cfg.tol);
        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b - scale * s).collect();
            let next = full_pass(src, &trial, true, &plan);
            // near the optimum the objective change drowns in rounding, so a
            // smaller gradient also counts as progress
            let sup = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if next.mean_nll() <= current + 1e-15 * current.abs() || sup(&next.mean_grad()) < sup(&grad) || scale < 1e-8
            {
                beta = trial;
                acc = next;
                break;
            }
            scale *= 0.5;
        }
        // quadratic convergence leaves an error far below the last step
        if small_step {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "Newton did not reach step tolerance {} within {} iterations",
            cfg.tol, cfg.max_iter
        ));
    }
    let info = acc.info.as_ref().expect("pass requested the information matrix");
    let se = match se_from_information(info, &names) {
        Ok(se) => se,
        Err(e) => {
            warnings.push(format!("standard errors unavailable: {e}"));
            vec![f64::NAN; k]
        }
    };
    Ok(FitResult {
        label: String::new(),
        d_width: src.d_width(),
        beta,
        se,
        loglik: acc.mean_nll(),
        n_obs: acc.rows,
        converged,
        iterations,
        config_hash: config_digest(&[
            "newton",
            &serde_json::to_string(&NewtonConfig {
                workers: 0,
                ..cfg.clone()
            })
            .expect("config serialises"),
            &names.join(","),
        ]),
        warnings,
        names,
    })
}

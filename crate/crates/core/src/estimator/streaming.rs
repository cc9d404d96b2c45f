//! Out-of-core fitting over the dyad stream.

use serde::{Deserialize, Serialize};

use super::likelihood::{sigmoid, Accum, Subsample};
use super::{config_digest, dot, full_pass, rank_error, se_from_information, Cholesky, FitResult, PassPlan, Pool};
use crate::design::{Permutation, RowSource};
use crate::error::{Error, Result};
use crate::features::{DyadOrder, DyadStream, FeatureContext};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Variance-reduced mini-batch steps, preconditioned by the information
    /// matrix of a per-epoch full-pass snapshot.
    #[default]
    Svrg,
    /// Plain mini-batch gradient descent with inverse-time decay.
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Step `t` uses `learning_rate / (1 + lr_decay * t)`.
    pub lr_decay: f64,
    /// Adagrad scaling of SGD steps.
    pub adaptive: bool,
    pub max_epochs: usize,
    /// Relative change of the epoch objective that counts as converged.
    pub tolerance: f64,
    /// Variance-reduced method only: the full Newton step at the snapshot
    /// must also be below this in every coordinate, or have stopped shrinking.
    pub step_tolerance: f64,
    pub seed: u64,
    /// Ridge strength on the average log-likelihood; the intercept is not penalised.
    pub l2_penalty: f64,
    pub partitions: usize,
    pub workers: usize,
    /// Keep each non-edge with this probability (1 = full stream). The
    /// intercept is shifted by `ln(rate)` afterwards.
    pub negative_sampling_rate: f64,
    pub compute_se: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Svrg,
            batch_size: 4096,
            learning_rate: 1.0,
            lr_decay: 0.0,
            adaptive: false,
            max_epochs: 100,
            tolerance: 1e-10,
            step_tolerance: 1e-7,
            seed: 0,
            l2_penalty: 0.0,
            partitions: 16,
            workers: 1,
            negative_sampling_rate: 1.0,
            compute_se: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.step_tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lr_decay >= 0.0) {
            return bad("lr_decay must be non-negative");
        }
        if !(self.l2_penalty >= 0.0) {
            return bad("l2_penalty must be non-negative");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.partitions == 0 {
            return bad("partitions must be at least 1");
        }
        if !(self.negative_sampling_rate > 0.0 && self.negative_sampling_rate <= 1.0) {
            return bad("negative_sampling_rate must lie in (0, 1]");
        }
        Ok(())
    }

    fn subsample(&self) -> Option<Subsample> {
        (self.negative_sampling_rate < 1.0).then_some(Subsample {
            rate: self.negative_sampling_rate,
            seed: self.seed,
        })
    }
}

const SEPARATION_BOUND: f64 = 15.0;
const SEPARATION_EPOCHS: usize = 3;

struct Snapshot {
    beta: Vec<f64>,
    acc: Accum,
    objective: f64,
}

/// Snapshot plus what the variance-reduced steps need from it.
struct Anchor {
    snap: Snapshot,
    chol: Cholesky,
    /// Full penalised gradient at the snapshot.
    mu: Vec<f64>,
    /// Sup-norm of the full Newton step.
    newton_step: f64,
}

/// Per-epoch state for the separation heuristic.
#[derive(Default)]
struct SeparationWatch {
    last_step: Option<f64>,
    stalled: usize,
}

impl SeparationWatch {
    /// True once coefficients have left the saturation bound and kept
    /// moving at an undiminished pace for several epochs.
    fn update(&mut self, prev: &[f64], next: &[f64]) -> bool {
        let step = prev.iter().zip(next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let big = next.iter().any(|b| b.abs() > SEPARATION_BOUND);
        match self.last_step {
            Some(last) if big && step > 0.5 * last => self.stalled += 1,
            _ => self.stalled = 0,
        }
        self.last_step = Some(step);
        self.stalled >= SEPARATION_EPOCHS
    }
}

struct Problem<'a> {
    src: &'a dyn RowSource,
    cfg: &'a OptimizerConfig,
    plan: PassPlan<'a>,
    /// 1 for penalised columns, 0 for the intercept.
    penalised: Vec<f64>,
}

impl Problem<'_> {
    fn objective(&self, acc: &Accum, beta: &[f64]) -> f64 {
        let ridge: f64 = beta.iter().zip(&self.penalised).map(|(b, m)| m * b * b).sum();
        acc.mean_nll() + 0.5 * self.cfg.l2_penalty * ridge
    }

    /// Sums `f(x, w)` contributions over the kept rows of one mini-batch,
    /// split into fixed chunks and merged in order.
    fn batch_sum<F>(&self, perm: &Permutation, lo: u64, hi: u64, f: F) -> (u64, Vec<f64>)
    where
        F: Fn(&[f64], f64) -> f64 + Sync + Send,
    {
        let k = self.penalised.len();
        let chunks = (self.cfg.partitions as u64).min(hi - lo).max(1) as usize;
        let bound = |c: usize| lo + (hi - lo) * c as u64 / chunks as u64;
        let sub = self.plan.subsample;
        let parts = self.plan.pool.map(chunks, |c| {
            let mut buf = vec![0.0; k];
            let mut g = vec![0.0; k];
            let mut rows = 0u64;
            for pos in bound(c)..bound(c + 1) {
                let t = perm.apply(pos);
                let w = self.src.row_at(t, &mut buf);
                if sub.is_some_and(|s| !s.keep(t, w)) {
                    continue;
                }
                rows += 1;
                let r = f(&buf, w);
                if r != 0.0 {
                    for (gc, x) in g.iter_mut().zip(&buf) {
                        *gc += r * x;
                    }
                }
            }
            (rows, g)
        });
        let mut total = vec![0.0; k];
        let mut rows = 0;
        for (r, g) in &parts {
            rows += r;
            for (a, b) in total.iter_mut().zip(g) {
                *a += b;
            }
        }
        (rows, total)
    }

    fn permutation(&self, epoch: usize) -> Permutation {
        Permutation::new(self.src.len(), self.cfg.seed.wrapping_add(epoch as u64))
    }

    fn anchor(&self, snap: Snapshot) -> Result<Anchor> {
        let k = self.penalised.len();
        let lambda = self.cfg.l2_penalty;
        let rows = snap.acc.rows as f64;
        let mut h: Vec<f64> = snap
            .acc
            .info
            .as_ref()
            .expect("snapshot carries information")
            .iter()
            .map(|v| v / rows)
            .collect();
        for c in 0..k {
            h[c * k + c] += lambda * self.penalised[c];
        }
        let chol = Cholesky::factor(&h, k).map_err(|dep| rank_error(&dep, &self.src.names()))?;
        let mu: Vec<f64> = snap
            .acc
            .mean_grad()
            .iter()
            .zip(&snap.beta)
            .zip(&self.penalised)
            .map(|((g, b), m)| g + lambda * m * b)
            .collect();
        let newton_step = chol.solve(&mu).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Anchor {
            snap,
            chol,
            mu,
            newton_step,
        })
    }

    /// One sweep of variance-reduced steps anchored at a snapshot.
    fn svrg_sweep(&self, anchor: &Anchor, lr: f64, epoch: usize) -> Result<Vec<f64>> {
        let k = self.penalised.len();
        let lambda = self.cfg.l2_penalty;
        let (snap, chol, mu) = (&anchor.snap, &anchor.chol, &anchor.mu);
        let perm = self.permutation(epoch);
        let n = self.src.len();
        let batch = self.cfg.batch_size as u64;
        let mut beta = snap.beta.clone();
        let mut lo = 0;
        while lo < n {
            let hi = (lo + batch).min(n);
            let current = beta.clone();
            let (count, sum) = self.batch_sum(&perm, lo, hi, |x, _| {
                sigmoid(dot(x, &current)) - sigmoid(dot(x, &snap.beta))
            });
            lo = hi;
            if count == 0 {
                continue;
            }
            let g: Vec<f64> = (0..k)
                .map(|c| sum[c] / count as f64 + mu[c] + lambda * self.penalised[c] * (beta[c] - snap.beta[c]))
                .collect();
            let step = chol.solve(&g);
            for (b, s) in beta.iter_mut().zip(&step) {
                *b -= lr * s;
            }
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                message: "coefficients became non-finite".into(),
            });
        }
        Ok(beta)
    }

    fn sgd_sweep(&self, beta: &mut [f64], state: &mut SgdState, epoch: usize) -> Result<()> {
        let k = beta.len();
        let lambda = self.cfg.l2_penalty;
        let perm = self.permutation(epoch);
        let n = self.src.len();
        let batch = self.cfg.batch_size as u64;
        let mut lo = 0;
        while lo < n {
            let hi = (lo + batch).min(n);
            let current = beta.to_vec();
            let (count, sum) = self.batch_sum(&perm, lo, hi, |x, w| sigmoid(dot(x, &current)) - w);
            lo = hi;
            if count == 0 {
                continue;
            }
            let lr = self.cfg.learning_rate / (1.0 + self.cfg.lr_decay * state.steps as f64);
            state.steps += 1;
            for c in 0..k {
                let g = sum[c] / count as f64 + lambda * self.penalised[c] * beta[c];
                let scale = if self.cfg.adaptive {
                    state.g2[c] += g * g;
                    1.0 / (state.g2[c].sqrt() + 1e-8)
                } else {
                    1.0
                };
                beta[c] -= lr * scale * g;
            }
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                message: "coefficients became non-finite; lower learning_rate".into(),
            });
        }
        Ok(())
    }
}

struct SgdState {
    steps: u64,
    g2: Vec<f64>,
}

fn divergence(epoch: usize) -> Error {
    Error::Divergence {
        epoch,
        message: "objective is not finite".into(),
    }
}

/// Fits the dyadic logit over every row of `src` without materialising it.
pub fn fit_streaming(src: &dyn RowSource, cfg: &OptimizerConfig) -> Result<FitResult> {
    cfg.validate()?;
    if src.is_empty() {
        return Err(Error::Domain("the dyad stream is empty".into()));
    }
    let names = src.names();
    let k = names.len();
    let pool = Pool::new(cfg.workers);
    let problem = Problem {
        src,
        cfg,
        plan: PassPlan {
            partitions: cfg.partitions,
            pool: &pool,
            subsample: cfg.subsample(),
        },
        penalised: names.iter().map(|n| if n == "intercept" { 0.0 } else { 1.0 }).collect(),
    };
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut separated = false;
    let mut watch = SeparationWatch::default();
    let mut epochs = 0;
    let mut beta = vec![0.0; k];
    // Final coefficients plus, when already available, a pass evaluated at them.
    let mut done: Option<Snapshot> = None;

    match cfg.method {
        Method::Svrg => {
            let mut lr = cfg.learning_rate;
            let mut best: Option<Anchor> = None;
            while epochs < cfg.max_epochs {
                epochs += 1;
                let acc = full_pass(src, &beta, true, &problem.plan);
                let objective = problem.objective(&acc, &beta);
                if !objective.is_finite() {
                    return Err(divergence(epochs));
                }
                if let Some(prev) = best.as_ref() {
                    let prev_objective = prev.snap.objective;
                    // rises inside the tolerance are rounding noise at the optimum
                    if objective > prev_objective + cfg.tolerance * prev_objective.abs() {
                        lr *= 0.5;
                        log::debug!("epoch {epochs}: objective rose, learning rate now {lr}");
                        if lr < 1e-6 {
                            warnings.push("step size collapsed before the objective settled".into());
                            break;
                        }
                        beta = problem.svrg_sweep(prev, lr, epochs)?;
                        continue;
                    }
                }
                let candidate = problem.anchor(Snapshot {
                    beta: beta.clone(),
                    acc,
                    objective,
                })?;
                if let Some(prev) = best.as_ref() {
                    let change = (prev.snap.objective - objective).abs() / objective.abs().max(f64::MIN_POSITIVE);
                    log::debug!(
                        "epoch {epochs}: objective {objective:.12e}, relative change {change:.3e}, newton step {:.3e}",
                        candidate.newton_step
                    );
                    // A Newton step that no longer shrinks has hit the floating-point floor.
                    let floor = candidate.newton_step > 0.9 * prev.newton_step;
                    if change < cfg.tolerance && (candidate.newton_step < cfg.step_tolerance || floor) {
                        converged = true;
                        best = Some(candidate);
                        break;
                    }
                    if watch.update(&prev.snap.beta, &candidate.snap.beta) {
                        separated = true;
                        best = Some(candidate);
                        break;
                    }
                }
                beta = problem.svrg_sweep(&candidate, lr, epochs)?;
                best = Some(candidate);
            }
            let best = best.expect("at least one epoch ran").snap;
            if converged || separated || best.beta == beta {
                done = Some(best);
            } else {
                // The last sweep has not been evaluated; keep it only if it helped.
                let acc = full_pass(src, &beta, cfg.compute_se, &problem.plan);
                let objective = problem.objective(&acc, &beta);
                done = Some(if objective.is_finite() && objective <= best.objective {
                    Snapshot { beta, acc, objective }
                } else {
                    best
                });
            }
        }
        Method::Sgd => {
            let mut state = SgdState {
                steps: 0,
                g2: vec![0.0; k],
            };
            let mut prev_objective = std::f64::consts::LN_2;
            let mut prev_beta = beta.clone();
            while epochs < cfg.max_epochs {
                epochs += 1;
                problem.sgd_sweep(&mut beta, &mut state, epochs)?;
                let acc = full_pass(src, &beta, false, &problem.plan);
                let objective = problem.objective(&acc, &beta);
                if !objective.is_finite() {
                    return Err(divergence(epochs));
                }
                let change = (prev_objective - objective).abs() / objective.abs().max(f64::MIN_POSITIVE);
                log::debug!("epoch {epochs}: objective {objective:.12e}, relative change {change:.3e}");
                if change < cfg.tolerance {
                    converged = true;
                }
                if !converged && watch.update(&prev_beta, &beta) {
                    separated = true;
                }
                done = Some(Snapshot {
                    beta: beta.clone(),
                    acc,
                    objective,
                });
                if converged || separated {
                    break;
                }
                prev_objective = objective;
                prev_beta.clone_from(&beta);
            }
        }
    }

    let mut result = done.expect("at least one epoch ran");
    if separated {
        warnings.push(format!(
            "possible perfect separation: coefficients exceed {SEPARATION_BOUND} in magnitude and keep growing; consider l2_penalty > 0"
        ));
    } else if !converged {
        warnings.push(format!(
            "not converged after {epochs} epochs (relative tolerance {})",
            cfg.tolerance
        ));
    }
    let mut se = vec![f64::NAN; k];
    if cfg.compute_se {
        if result.acc.info.is_none() {
            result.acc = full_pass(src, &result.beta, true, &problem.plan);
        }
        match se_from_information(result.acc.info.as_ref().expect("information requested"), &names) {
            Ok(s) => se = s,
            Err(e) => warnings.push(format!("standard errors unavailable: {e}")),
        }
    }
    let mut beta = result.beta;
    if let Some(sub) = problem.plan.subsample {
        match names.iter().position(|n| n == "intercept") {
            Some(c) => beta[c] += sub.rate.ln(),
            None => warnings.push("negative sampling without an intercept column biases every coefficient".into()),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FitResult {
        label: String::new(),
        d_width: src.d_width(),
        beta,
        se,
        loglik: result.acc.mean_nll(),
        n_obs: result.acc.rows,
        converged,
        iterations: epochs,
        config_hash: config_digest(&["streaming", &provenance(cfg), &names.join(","), &src.len().to_string()]),
        warnings,
        names,
    })
}

/// Configuration text for the digest; the worker count never changes results.
fn provenance(cfg: &OptimizerConfig) -> String {
    let cfg = OptimizerConfig {
        workers: 0,
        ..cfg.clone()
    };
    serde_json::to_string(&cfg).expect("config serialises")
}

/// Square roots of the diagonal of the inverse information matrix
/// `sum p(1-p) x x'`, accumulated in one pass at `beta`.
pub fn standard_errors(src: &dyn RowSource, beta: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != src.width() {
        return Err(Error::Config(format!(
            "coefficient vector has width {}, design has {}",
            beta.len(),
            src.width()
        )));
    }
    let pool = Pool::serial();
    let plan = PassPlan {
        partitions: 16,
        pool: &pool,
        subsample: None,
    };
    let acc = full_pass(src, beta, true, &plan);
    se_from_information(acc.info.as_ref().expect("information requested"), &src.names())
}

/// The unrestricted "world" fit followed by one fit per listed sender country.
pub fn fit_by_country(ctx: &FeatureContext, countries: &[String], cfg: &OptimizerConfig) -> Result<Vec<FitResult>> {
    let mut streams = vec![(
        "world".to_string(),
        DyadStream::new(ctx, None, DyadOrder::Deterministic),
    )];
    for c in countries {
        streams.push((c.clone(), DyadStream::for_country(ctx, c, DyadOrder::Deterministic)?));
    }
    streams
        .into_iter()
        .map(|(label, stream)| {
            let mut fit = fit_streaming(&stream, cfg)?;
            fit.label = label;
            Ok(fit)
        })
        .collect()
}

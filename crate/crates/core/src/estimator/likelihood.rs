//! Bernoulli log-likelihood with logistic link, and partitioned full passes.

use rayon::prelude::*;

use crate::design::{keyed_uniform, RowSource};
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Negative log-likelihood of one observation at linear predictor `z`.
#[inline]
pub(crate) fn row_nll(z: f64, w: f64) -> f64 {
    softplus(z) - w * z
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Case-control subsampling: keep every positive and each negative with
/// probability `rate`, decided by a hash of `(seed, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Subsample {
    pub rate: f64,
    pub seed: u64,
}

impl Subsample {
    #[inline]
    pub fn keep(&self, t: u64, w: f64) -> bool {
        w != 0.0 || keyed_uniform(self.seed, t, 0x5EED) < self.rate
    }
}

/// Worker threads shared by every pass of one fit.
pub(crate) struct Pool(Option<rayon::ThreadPool>);

impl Pool {
    pub fn new(workers: usize) -> Self {
        if workers <= 1 {
            return Pool(None);
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => Pool(Some(pool)),
            Err(e) => {
                log::warn!("could not start {workers} workers ({e}); running serially");
                Pool(None)
            }
        }
    }

    pub fn serial() -> Self {
        Pool(None)
    }

    /// Runs `f` over `0..parts` and returns the results in index order.
    pub fn map<T, F>(&self, parts: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.0 {
            Some(pool) if parts > 1 => pool.install(|| (0..parts).into_par_iter().map(&f).collect()),
            _ => (0..parts).map(f).collect(),
        }
    }
}

/// How a full pass is split and scheduled.
#[derive(Clone, Copy)]
pub(crate) struct PassPlan<'p> {
    pub partitions: usize,
    pub pool: &'p Pool,
    pub subsample: Option<Subsample>,
}

static SERIAL: Pool = Pool(None);

impl Default for PassPlan<'static> {
    fn default() -> Self {
        PassPlan {
            partitions: 1,
            pool: &SERIAL,
            subsample: None,
        }
    }
}

/// Sums over one pass: kept rows, NLL, gradient and (optionally) the
/// information matrix `sum p(1-p) x x'` (row-major, full).
#[derive(Clone, Debug)]
pub(crate) struct Accum {
    pub rows: u64,
    pub nll: f64,
    pub grad: Vec<f64>,
    pub info: Option<Vec<f64>>,
}

impl Accum {
    fn new(k: usize, info: bool) -> Self {
        Accum {
            rows: 0,
            nll: 0.0,
            grad: vec![0.0; k],
            info: info.then(|| vec![0.0; k * k]),
        }
    }

    fn merge(&mut self, other: &Accum) {
        self.rows += other.rows;
        self.nll += other.nll;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.info.as_mut(), other.info.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn mean_nll(&self) -> f64 {
        self.nll / self.rows as f64
    }

    pub fn mean_grad(&self) -> Vec<f64> {
        let n = self.rows as f64;
        self.grad.iter().map(|g| g / n).collect()
    }
}

/// Adds `scale * x x'` into `m`, skipping zero entries of `x` (design rows
/// are mostly 0/1 indicators). Only the upper triangle is written.
#[inline]
fn add_outer_upper(m: &mut [f64], x: &[f64], scale: f64, nz: &mut Vec<usize>) {
    let k = x.len();
    nz.clear();
    nz.extend((0..k).filter(|&c| x[c] != 0.0));
    for (pos, &a) in nz.iter().enumerate() {
        let sa = scale * x[a];
        let row = &mut m[a * k..(a + 1) * k];
        for &b in &nz[pos..] {
            row[b] += sa * x[b];
        }
    }
}

fn mirror_upper(m: &mut [f64], k: usize) {
    for a in 0..k {
        for b in 0..a {
            m[a * k + b] = m[b * k + a];
        }
    }
}

fn pass_range(src: &dyn RowSource, beta: &[f64], lo: u64, hi: u64, info: bool, sub: Option<Subsample>) -> Accum {
    let k = beta.len();
    let mut acc = Accum::new(k, info);
    let mut buf = vec![0.0; k];
    let mut nz = Vec::with_capacity(k);
    for t in lo..hi {
        let w = src.row_at(t, &mut buf);
        if let Some(s) = sub {
            if !s.keep(t, w) {
                continue;
            }
        }
        let z = dot(&buf, beta);
        let p = sigmoid(z);
        acc.rows += 1;
        acc.nll += row_nll(z, w);
        let r = p - w;
        if r != 0.0 {
            for (g, x) in acc.grad.iter_mut().zip(&buf) {
                *g += r * x;
            }
        }
        if let Some(m) = acc.info.as_mut() {
            add_outer_upper(m, &buf, p * (1.0 - p), &mut nz);
        }
    }
    acc
}

/// One pass over every row. Partition boundaries depend only on
/// `plan.partitions`, and partial sums are merged in partition order, so the
/// result is bit-identical for any worker count.
pub(crate) fn full_pass(src: &dyn RowSource, beta: &[f64], info: bool, plan: &PassPlan<'_>) -> Accum {
    let n = src.len();
    let parts = (plan.partitions.max(1) as u64).min(n.max(1)) as usize;
    let bound = |p: usize| (n as u128 * p as u128 / parts as u128) as u64;
    let partials = plan.pool.map(parts, |p| {
        pass_range(src, beta, bound(p), bound(p + 1), info, plan.subsample)
    });
    let mut total = Accum::new(beta.len(), info);
    for part in &partials {
        total.merge(part);
    }
    if let Some(m) = total.info.as_mut() {
        mirror_upper(m, beta.len());
    }
    total
}

/// Average negative log-likelihood and its gradient over every row of `src`.
pub fn loglik_and_gradient(src: &dyn RowSource, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    if beta.len() != src.width() {
        return Err(Error::Config(format!(
            "coefficient vector has width {}, design has {}",
            beta.len(),
            src.width()
        )));
    }
    if src.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let acc = full_pass(src, beta, false, &PassPlan::default());
    Ok((acc.mean_nll(), acc.mean_grad()))
}

//! Fixed-effects logit via tetrad conditioning.
//!
//! With sender and receiver effects in the link index, the probability that
//! `l -> j` given `l` links to exactly one of `{j, k}`, `i` links to exactly
//! one of `{j, k}`, and exactly one of `l, i` links to `j`, depends only on
//! the double difference `z = (r_lj - r_lk) - (r_ij - r_ik)` of design rows.
//! Such a tetrad has exactly one of two link patterns, `{l->j, i->k}` or
//! `{l->k, i->j}`, with the two cross links absent, so every qualifying tetrad
//! is an unordered pair of edges with four distinct endpoints and both cross
//! links missing. The four orderings of a tetrad that keep the events intact
//! contribute identical likelihood terms; each is stored once.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::RowSource;
use crate::error::{Error, Result};
use crate::estimator::{fit_newton, sigmoid, FitResult, NewtonConfig};
use crate::features::FeatureContext;
use crate::graph::DirectedGraph;

/// Per-vertex sender and receiver effects. Only the simulator knows them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedEffects {
    pub alpha_out: Vec<f64>,
    pub alpha_in: Vec<f64>,
}

impl FixedEffects {
    pub fn zeros(n: usize) -> Self {
        FixedEffects {
            alpha_out: vec![0.0; n],
            alpha_in: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_out.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.alpha_out.len() != n || self.alpha_in.len() != n {
            return Err(Error::Config(format!(
                "fixed effects cover {}/{} vertices, graph has {n}",
                self.alpha_out.len(),
                self.alpha_in.len()
            )));
        }
        if self.alpha_out.iter().chain(&self.alpha_in).any(|a| !a.is_finite()) {
            return Err(Error::Domain("fixed effects must be finite".into()));
        }
        Ok(())
    }

    /// Adds `c` to every effect.
    pub fn shifted(&self, c: f64) -> Self {
        FixedEffects {
            alpha_out: self.alpha_out.iter().map(|a| a + c).collect(),
            alpha_in: self.alpha_in.iter().map(|a| a + c).collect(),
        }
    }
}

/// `P(W_lj = 1 | conditioning events) = L(z'beta)`.
pub fn conditional_prob(z: &[f64], beta: &[f64]) -> f64 {
    assert_eq!(
        z.len(),
        beta.len(),
        "double difference and coefficients differ in width"
    );
    sigmoid(z.iter().zip(beta).map(|(a, b)| a * b).sum())
}

/// Vertex indices of one qualifying tetrad; `y = W_lj`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Tetrad {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub l: u32,
    pub y: bool,
}

/// A tetrad with its double-difference regressor over the identified columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TetradSample {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub z: Vec<f64>,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TetradConfig {
    /// Maximum number of sampled tetrads.
    pub budget: usize,
    /// Graphs with at most this many vertices are enumerated exhaustively.
    pub exhaustive_guard: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TetradConfig {
    fn default() -> Self {
        TetradConfig {
            budget: 2_000_000,
            exhaustive_guard: 60,
            seed: 0,
            workers: 1,
        }
    }
}

/// A graph whose vertices are positions mapped onto vertices of a base graph;
/// positions sharing an origin are never linked.
struct Mapped<'g> {
    g: &'g DirectedGraph,
    origin: Option<Vec<u32>>,
    edges: Vec<(u32, u32)>,
}

impl<'g> Mapped<'g> {
    fn identity(g: &'g DirectedGraph) -> Self {
        let edges = g.edges().map(|(a, b)| (a as u32, b as u32)).collect();
        Mapped { g, origin: None, edges }
    }

    fn resampled(g: &'g DirectedGraph, origin: Vec<u32>) -> Self {
        let mut positions: Vec<Vec<u32>> = vec![Vec::new(); g.n()];
        for (p, &o) in origin.iter().enumerate() {
            positions[o as usize].push(p as u32);
        }
        let mut edges = Vec::new();
        for (u, &o) in origin.iter().enumerate() {
            for &s in g.successors(o as usize) {
                for &v in &positions[s as usize] {
                    edges.push((u as u32, v));
                }
            }
        }
        Mapped {
            g,
            origin: Some(origin),
            edges,
        }
    }

    fn size(&self) -> usize {
        self.origin.as_ref().map_or(self.g.n(), Vec::len)
    }

    #[inline]
    fn orig(&self, p: u32) -> u32 {
        self.origin.as_ref().map_or(p, |o| o[p as usize])
    }

    #[inline]
    fn has_edge(&self, u: u32, v: u32) -> bool {
        let (a, b) = (self.orig(u), self.orig(v));
        a != b && self.g.has_edge(a as usize, b as usize)
    }

    /// The tetrad formed by edges `e1` and `e2`, if it qualifies.
    fn qualify(&self, e1: usize, e2: usize) -> Option<Tetrad> {
        let (a, b) = self.edges[e1];
        let (c, d) = self.edges[e2];
        let o = [self.orig(a), self.orig(b), self.orig(c), self.orig(d)];
        for x in 0..4 {
            for y in x + 1..4 {
                if o[x] == o[y] {
                    return None;
                }
            }
        }
        if self.has_edge(a, d) || self.has_edge(c, b) {
            return None;
        }
        // i is the sender with the smaller position, l the other one.
        let ((i, ri), (l, rl)) = if a < c { ((a, b), (c, d)) } else { ((c, d), (a, b)) };
        let (j, k) = if ri < rl { (ri, rl) } else { (rl, ri) };
        Some(Tetrad {
            i: self.orig(i),
            j: self.orig(j),
            k: self.orig(k),
            l: self.orig(l),
            y: rl == j,
        })
    }

    fn pair_count(&self) -> u128 {
        let m = self.edges.len() as u128;
        m * m.saturating_sub(1) / 2
    }

    fn enumerate(&self, cfg: &TetradConfig) -> (Vec<Tetrad>, bool) {
        let m = self.edges.len();
        if self.size() <= cfg.exhaustive_guard || self.pair_count() <= cfg.budget as u128 {
            let parts = 64.min(m.max(1));
            // Balance the triangular work: part p covers first edges with
            // roughly equal numbers of later partners.
            let bound = |p: usize| {
                let frac = p as f64 / parts as f64;
                ((1.0 - (1.0 - frac).sqrt()) * m as f64).round() as usize
            };
            let pool = crate::estimator::Pool::new(cfg.workers);
            let chunks = pool.map(parts, |p| {
                let mut out = Vec::new();
                let hi = if p + 1 == parts { m } else { bound(p + 1) };
                for e1 in bound(p)..hi {
                    for e2 in e1 + 1..m {
                        if let Some(t) = self.qualify(e1, e2) {
                            out.push(t);
                        }
                    }
                }
                out
            });
            return (chunks.into_iter().flatten().collect(), true);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut seen = HashSet::with_capacity(cfg.budget.min(1 << 24));
        let mut out = Vec::with_capacity(cfg.budget.min(1 << 24));
        let max_draws = cfg.budget.saturating_mul(50).max(1_000_000);
        let mut draws = 0;
        while out.len() < cfg.budget && draws < max_draws {
            draws += 1;
            let e1 = rng.random_range(0..m);
            let e2 = rng.random_range(0..m);
            if e1 == e2 {
                continue;
            }
            let key = (e1.min(e2), e1.max(e2));
            if seen.contains(&key) {
                continue;
            }
            if let Some(t) = self.qualify(key.0, key.1) {
                seen.insert(key);
                out.push(t);
            }
        }
        if out.len() < cfg.budget {
            log::warn!(
                "tetrad sampling stopped after {draws} draws with {} of {} tetrads",
                out.len(),
                cfg.budget
            );
        }
        (out, false)
    }
}

/// Largest cached double-difference matrix, in entries.
const Z_CACHE_LIMIT: usize = 32 << 20;

/// Qualifying tetrads of one graph, addressable as design rows `(z, y)`.
#[derive(Clone, Debug)]
pub struct TetradSet<'a> {
    ctx: &'a FeatureContext,
    tetrads: Vec<Tetrad>,
    columns: Vec<usize>,
    names: Vec<String>,
    d_width: usize,
    unidentified: Vec<String>,
    exhaustive: bool,
    z: Option<Vec<f64>>,
}

impl<'a> TetradSet<'a> {
    /// Builds the set, keeping only design columns whose double difference
    /// varies; the intercept and one-sided columns always drop out.
    pub fn new(ctx: &'a FeatureContext, tetrads: Vec<Tetrad>, exhaustive: bool) -> Self {
        let width = ctx.width();
        let mut varies = vec![false; width];
        let mut z = vec![0.0; width];
        let mut scratch = vec![0.0; 4 * width];
        for t in &tetrads {
            double_difference(ctx, t, &mut scratch, &mut z);
            for (v, x) in varies.iter_mut().zip(&z) {
                *v |= *x != 0.0;
            }
        }
        let columns: Vec<usize> = (0..width).filter(|&c| varies[c]).collect();
        Self::with_columns(ctx, tetrads, exhaustive, columns)
    }

    /// Builds the set over the named design columns.
    pub fn with_names(
        ctx: &'a FeatureContext,
        tetrads: Vec<Tetrad>,
        exhaustive: bool,
        names: &[String],
    ) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| {
                ctx.layout()
                    .index_of(n)
                    .ok_or_else(|| Error::Config(format!("design has no column {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::with_columns(ctx, tetrads, exhaustive, columns))
    }

    fn with_columns(ctx: &'a FeatureContext, tetrads: Vec<Tetrad>, exhaustive: bool, columns: Vec<usize>) -> Self {
        let layout = ctx.layout();
        let names = columns.iter().map(|&c| layout.features[c].name.clone()).collect();
        let unidentified = (0..layout.width())
            .filter(|c| !columns.contains(c))
            .map(|c| layout.features[c].name.clone())
            .collect();
        let d_width = columns.iter().filter(|&&c| c < layout.d_width).count();
        let mut set = TetradSet {
            ctx,
            tetrads,
            columns,
            names,
            d_width,
            unidentified,
            exhaustive,
            z: None,
        };
        if set.tetrads.len().saturating_mul(set.columns.len()) <= Z_CACHE_LIMIT {
            let k = set.columns.len();
            let mut z = vec![0.0; set.tetrads.len() * k];
            for t in 0..set.tetrads.len() {
                set.compute_row(t, &mut z[t * k..(t + 1) * k]);
            }
            set.z = Some(z);
        }
        set
    }

    fn compute_row(&self, t: usize, out: &mut [f64]) {
        let width = self.ctx.width();
        let mut scratch = vec![0.0; 5 * width];
        let (scratch, full) = scratch.split_at_mut(4 * width);
        double_difference(self.ctx, &self.tetrads[t], scratch, full);
        for (o, &c) in out.iter_mut().zip(&self.columns) {
            *o = full[c];
        }
    }

    pub fn tetrads(&self) -> &[Tetrad] {
        &self.tetrads
    }

    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    /// Design columns that difference out and cannot be estimated.
    pub fn unidentified(&self) -> &[String] {
        &self.unidentified
    }

    pub fn sample(&self, t: usize) -> TetradSample {
        let mut z = vec![0.0; self.columns.len()];
        let y = self.row_at(t as u64, &mut z);
        let q = self.tetrads[t];
        TetradSample {
            i: q.i as usize,
            j: q.j as usize,
            k: q.k as usize,
            l: q.l as usize,
            z,
            y,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = TetradSample> + '_ {
        (0..self.tetrads.len()).map(|t| self.sample(t))
    }

    /// Delimited export: vertex ids, outcome and the double difference.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let vt = self.ctx.vertices();
        let mut s = String::from("i,j,k,l,y");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for sample in self.iter() {
            s.push_str(&format!(
                "{},{},{},{},{}",
                vt.get(sample.i).id,
                vt.get(sample.j).id,
                vt.get(sample.k).id,
                vt.get(sample.l).id,
                sample.y
            ));
            for v in &sample.z {
                s.push_str(&format!(",{v:.9e}"));
            }
            s.push('\n');
            if s.len() > 1 << 20 {
                out.write_all(s.as_bytes()).map_err(|e| Error::io("<tetrads>", e))?;
                s.clear();
            }
        }
        out.write_all(s.as_bytes()).map_err(|e| Error::io("<tetrads>", e))
    }
}

fn double_difference(ctx: &FeatureContext, t: &Tetrad, scratch: &mut [f64], out: &mut [f64]) {
    let w = ctx.width();
    let (lj, rest) = scratch.split_at_mut(w);
    let (lk, rest) = rest.split_at_mut(w);
    let (ij, ik) = rest.split_at_mut(w);
    let (i, j, k, l) = (t.i as usize, t.j as usize, t.k as usize, t.l as usize);
    ctx.fill_row(l, j, lj);
    ctx.fill_row(l, k, lk);
    ctx.fill_row(i, j, ij);
    ctx.fill_row(i, k, &mut ik[..w]);
    for c in 0..w {
        out[c] = (lj[c] - lk[c]) - (ij[c] - ik[c]);
    }
}

impl RowSource for TetradSet<'_> {
    fn len(&self) -> u64 {
        self.tetrads.len() as u64
    }

    fn width(&self) -> usize {
        self.columns.len()
    }

    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn d_width(&self) -> usize {
        self.d_width
    }

    fn row_at(&self, t: u64, buf: &mut [f64]) -> f64 {
        let t = t as usize;
        match &self.z {
            Some(z) => {
                let k = self.columns.len();
                buf.copy_from_slice(&z[t * k..(t + 1) * k]);
            }
            None => self.compute_row(t, buf),
        }
        if self.tetrads[t].y {
            1.0
        } else {
            0.0
        }
    }
}

fn outcome_graph(ctx: &FeatureContext) -> Result<&DirectedGraph> {
    ctx.outcome_graph()
        .ok_or_else(|| Error::Config("tetrad enumeration needs a context built from an observed graph".into()))
}

/// Qualifying tetrads of the context's outcome graph: every one when the
/// graph is small or has few edge pairs, otherwise up to `budget` distinct
/// tetrads drawn uniformly.
pub fn enumerate_tetrads<'a>(ctx: &'a FeatureContext, cfg: &TetradConfig) -> Result<TetradSet<'a>> {
    let g = outcome_graph(ctx)?;
    if g.n() < 4 {
        return Err(Error::Domain(format!(
            "tetrads need at least 4 vertices, graph has {}",
            g.n()
        )));
    }
    let (tetrads, exhaustive) = Mapped::identity(g).enumerate(cfg);
    if tetrads.is_empty() {
        return Err(Error::EmptySample(format!(
            "{} vertices and {} edges admit no tetrad",
            g.n(),
            g.edge_count()
        )));
    }
    Ok(TetradSet::new(ctx, tetrads, exhaustive))
}

/// Conditional-logit fit over the identified columns of `set`.
pub fn fit_tetrad(set: &TetradSet<'_>, cfg: &NewtonConfig) -> Result<FitResult> {
    if set.is_empty() {
        return Err(Error::EmptySample("the tetrad set is empty".into()));
    }
    if set.width() == 0 {
        return Err(Error::Identification(
            "every double difference is zero; no coefficient is identified".into(),
        ));
    }
    let mut fit = fit_newton(set, cfg)?;
    fit.label = "fixed_effects".into();
    if !set.unidentified.is_empty() {
        fit.warnings.push(format!(
            "not identified under fixed effects: {}",
            set.unidentified.join(", ")
        ));
    }
    Ok(fit)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Draw vertices with replacement.
    #[default]
    Vertices,
    /// Keep every vertex once; replicates reproduce the original fit.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub resampling: Resampling,
    pub workers: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 100,
            seed: 0,
            resampling: Resampling::Vertices,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub names: Vec<String>,
    pub se: Vec<f64>,
    /// Coefficients of every retained replicate.
    pub replicates: Vec<Vec<f64>>,
    pub dropped: usize,
}

impl BootstrapResult {
    /// Percentile interval of column `c` at level `1 - alpha`.
    pub fn percentile_interval(&self, c: usize, alpha: f64) -> (f64, f64) {
        let mut v: Vec<f64> = self.replicates.iter().map(|r| r[c]).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        (q(alpha / 2.0), q(1.0 - alpha / 2.0))
    }
}

/// Vertex bootstrap: resample vertices, rebuild the induced graph,
/// re-enumerate tetrads over `columns` and refit. Replicates without usable
/// tetrads are dropped; more than half dropped is a failure.
pub fn bootstrap_se(
    ctx: &FeatureContext,
    tetrad_cfg: &TetradConfig,
    columns: &[String],
    newton: &NewtonConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if boot.replicates < 2 {
        return Err(Error::Config("the bootstrap needs at least 2 replicates".into()));
    }
    let g = outcome_graph(ctx)?;
    let n = g.n();
    let inner_tetrad = TetradConfig {
        workers: 1,
        ..tetrad_cfg.clone()
    };
    let inner_newton = NewtonConfig {
        workers: 1,
        ..newton.clone()
    };
    let pool = crate::estimator::Pool::new(boot.workers);
    let outcomes = pool.map(boot.replicates, |b| -> Result<Option<Vec<f64>>> {
        let mapped = match boot.resampling {
            Resampling::Identity => Mapped::identity(g),
            Resampling::Vertices => {
                let mut rng = ChaCha8Rng::seed_from_u64(boot.seed);
                rng.set_stream(b as u64);
                Mapped::resampled(g, (0..n).map(|_| rng.random_range(0..n as u32)).collect())
            }
        };
        let (tetrads, exhaustive) = mapped.enumerate(&inner_tetrad);
        if tetrads.is_empty() {
            return Ok(None);
        }
        let set = TetradSet::with_names(ctx, tetrads, exhaustive, columns)?;
        match fit_newton(&set, &inner_newton) {
            Ok(fit) if fit.converged => Ok(Some(fit.beta)),
            Ok(_) | Err(Error::RankDeficient { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut replicates = Vec::new();
    let mut dropped = 0;
    for o in outcomes {
        match o? {
            Some(beta) => replicates.push(beta),
            None => dropped += 1,
        }
    }
    if dropped * 2 > boot.replicates || replicates.len() < 2 {
        return Err(Error::Numerical(format!(
            "{dropped} of {} bootstrap replicates had no usable tetrads",
            boot.replicates
        )));
    }
    if dropped > 0 {
        log::warn!("{dropped} bootstrap replicates dropped");
    }
    let k = columns.len();
    let r = replicates.len() as f64;
    let se = (0..k)
        .map(|c| {
            let mean = replicates.iter().map(|b| b[c]).sum::<f64>() / r;
            (replicates.iter().map(|b| (b[c] - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
        })
        .collect();
    Ok(BootstrapResult {
        names: columns.to_vec(),
        se,
        replicates,
        dropped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDelta {
    pub name: String,
    pub plain: f64,
    pub fixed_effects: f64,
    pub plain_se: f64,
    pub fixed_effects_se: f64,
    pub exp_plain: f64,
    pub exp_fixed_effects: f64,
    /// `fixed_effects - plain` on the coefficient scale.
    pub delta: f64,
}

/// Aligns the coefficients the two fits share.
pub fn compare_fits(plain: &FitResult, fe: &FitResult) -> Result<Vec<CoefficientDelta>> {
    let rows: Vec<CoefficientDelta> = fe
        .names
        .iter()
        .enumerate()
        .filter_map(|(c, name)| {
            plain.index_of(name).map(|p| CoefficientDelta {
                name: name.clone(),
                plain: plain.beta[p],
                fixed_effects: fe.beta[c],
                plain_se: plain.se[p],
                fixed_effects_se: fe.se[c],
                exp_plain: plain.beta[p].exp(),
                exp_fixed_effects: fe.beta[c].exp(),
                delta: fe.beta[c] - plain.beta[p],
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Config("the two fits share no coefficient".into()));
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: Write>(rows: &[CoefficientDelta], mut out: W) -> Result<()> {
    let mut s =
        String::from("feature,plain,plain_se,fixed_effects,fixed_effects_se,exp_plain,exp_fixed_effects,delta\n");
    let f = |v: f64| if v.is_finite() { format!("{v:.6}") } else { "NA".into() };
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.name,
            f(r.plain),
            f(r.plain_se),
            f(r.fixed_effects),
            f(r.fixed_effects_se),
            f(r.exp_plain),
            f(r.exp_fixed_effects),
            f(r.delta)
        ));
    }
    out.write_all(s.as_bytes()).map_err(|e| Error::io("<comparison>", e))
}

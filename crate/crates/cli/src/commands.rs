use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use dyadnet::estimator::{
    fit_newton, fit_streaming, marginal_effects_at_mean, write_coefficient_table, write_fit_summary, write_margins_csv,
    FitResult,
};
use dyadnet::features::{popularity_index, write_popularity_csv, DyadOrder, DyadStream, FeatureContext};
use dyadnet::graph::{load_edges, load_vertices, DirectedGraph};
use dyadnet::netstats::{self, Population};
use dyadnet::tetrad::{
    bootstrap_se, compare_fits, enumerate_tetrads, fit_tetrad, write_comparison_csv, BootstrapResult,
};
use dyadnet::Error;

use crate::config::{config_error, Estimator, RunConfig};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    let f = File::create(&p).with_context(|| format!("cannot create {}", p.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))
}

fn load_graph(cfg: &RunConfig) -> Result<DirectedGraph> {
    let (vpath, epath) = cfg.inputs()?;
    let opts = cfg.input.load_options();
    let vertices =
        load_vertices(&vpath, &opts).with_context(|| format!("loading vertices from {}", vpath.display()))?;
    let g = load_edges(&epath, Arc::new(vertices), &opts)
        .with_context(|| format!("loading edges from {}", epath.display()))?;
    log::info!("loaded {} vertices and {} edges", g.n(), g.edge_count());
    Ok(g)
}

pub fn stats(cfg: &RunConfig) -> Result<()> {
    let g = load_graph(cfg)?;
    let out = cfg.out_dir()?;
    let workers = cfg.workers.unwrap_or(1);

    let rows = netstats::summary_table(g.vertices())?;
    netstats::write_summary_table(&rows, create(&out, "summary.csv")?)?;

    let followers: Vec<u64> = g.in_degrees().iter().map(|&d| d as u64).collect();
    let fit = match netstats::fit_power_law(&followers, &cfg.stats.degree) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("no power-law fit: {e}");
            None
        }
    };
    netstats::write_degree_distribution(
        &followers,
        "follower",
        fit.as_ref(),
        create(&out, "degree_distribution.csv")?,
    )?;

    let nd = netstats::neighbor_avg_in_degree(&g);
    netstats::write_neighbor_degrees(&g, &nd, create(&out, "neighbor_degree.csv")?)?;

    let edges = netstats::default_histogram_edges(cfg.stats.histogram_bins);
    let all = netstats::distance_histogram(&g, Population::AllDyads, &edges, workers)?;
    let mutual = netstats::distance_histogram(&g, Population::MutualDyads, &edges, workers)?;
    netstats::write_distance_histograms(&all, &mutual, create(&out, "distance_histogram.csv")?)?;

    let m = netstats::country_follow_matrix(&g, cfg.stats.top_countries)?;
    netstats::write_country_matrix(&m, create(&out, "country_matrix.csv")?)?;

    write_popularity_csv(
        &popularity_index(&g, &cfg.features.popularity_rule),
        create(&out, "popularity.csv")?,
    )?;
    Ok(())
}

pub fn popularity(cfg: &RunConfig) -> Result<()> {
    let g = load_graph(cfg)?;
    let out = cfg.out_dir()?;
    write_popularity_csv(
        &popularity_index(&g, &cfg.features.popularity_rule),
        create(&out, "popularity.csv")?,
    )?;
    Ok(())
}

fn restrictions(cfg: &RunConfig) -> Vec<(String, Option<String>)> {
    let mut r = vec![("world".to_string(), None)];
    r.extend(cfg.fit.countries.iter().map(|c| (c.clone(), Some(c.clone()))));
    r
}

fn stream_for<'a>(ctx: &'a FeatureContext, country: Option<&str>) -> Result<DyadStream<'a>> {
    Ok(match country {
        None => DyadStream::new(ctx, None, DyadOrder::Deterministic),
        Some(c) => DyadStream::for_country(ctx, c, DyadOrder::Deterministic)?,
    })
}

fn fit_one(cfg: &RunConfig, stream: &DyadStream<'_>, label: &str) -> Result<FitResult> {
    let mut fit = match cfg.fit.estimator {
        Estimator::Streaming => fit_streaming(stream, &cfg.optimizer)?,
        Estimator::Newton => fit_newton(stream, &cfg.fit.newton)?,
    };
    fit.label = label.to_string();
    for w in &fit.warnings {
        log::warn!("{label}: {w}");
    }
    Ok(fit)
}

fn write_margins(ctx: &FeatureContext, stream: &DyadStream<'_>, fit: &FitResult, out: &Path) -> Result<()> {
    let xbar = ctx.mean_row(stream);
    let effects = marginal_effects_at_mean(&fit.beta, &xbar, ctx.layout())?;
    write_margins_csv(&effects, create(out, &format!("margins_{}.csv", fit.label))?)?;
    Ok(())
}

/// Fits every restriction; a failed restriction is reported and the rest
/// still run. The first failure is returned after all outputs are written.
pub fn fit(cfg: &RunConfig, margins: bool) -> Result<()> {
    cfg.require_seed("fit")?;
    let g = load_graph(cfg)?;
    let out = cfg.out_dir()?;
    let ctx = FeatureContext::new(&g, cfg.features.clone())?;
    ctx.layout().write_manifest(create(&out, "design.csv")?)?;
    let mut fits = Vec::new();
    let mut failure = None;
    for (label, country) in restrictions(cfg) {
        let result = stream_for(&ctx, country.as_deref()).and_then(|s| {
            let fit = fit_one(cfg, &s, &label)?;
            write_fit_summary(&fit, create(&out, &format!("fit_{label}.txt"))?)?;
            write_text(&out, &format!("fit_{label}.json"), &(fit.to_json() + "\n"))?;
            if margins || cfg.fit.margins {
                write_margins(&ctx, &s, &fit, &out)?;
            }
            Ok(fit)
        });
        match result {
            Ok(f) => fits.push(f),
            Err(e) => {
                eprintln!("error: fit {label} failed: {e:#}");
                failure.get_or_insert(e.context(format!("fit {label} failed")));
            }
        }
    }
    if !fits.is_empty() {
        write_coefficient_table(&fits, create(&out, "coefficients.csv")?)?;
    }
    failure.map_or(Ok(()), Err)
}

/// Marginal effects of a saved fit, or of fresh fits when none is given.
pub fn margins(cfg: &RunConfig, from: Option<&Path>) -> Result<()> {
    let Some(path) = from else {
        return fit(cfg, true);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read fit {}", path.display()))?;
    let fit = FitResult::from_json(&text)?;
    let g = load_graph(cfg)?;
    let out = cfg.out_dir()?;
    let ctx = FeatureContext::new(&g, cfg.features.clone())?;
    if fit.names != ctx.layout().names() {
        return Err(config_error(format!(
            "{} was fitted on a different design than the configured features",
            path.display()
        )));
    }
    let country = (fit.label != "world" && !fit.label.is_empty()).then_some(fit.label.as_str());
    let stream = stream_for(&ctx, country)?;
    write_margins(&ctx, &stream, &fit, &out)
}

fn write_bootstrap(fit: &FitResult, boot: &BootstrapResult, out: &Path) -> Result<()> {
    let mut s = String::from("feature,estimate,information_se,bootstrap_se,ci_lower,ci_upper\n");
    for (c, name) in fit.names.iter().enumerate() {
        let (lo, hi) = boot.percentile_interval(c, 0.05);
        s.push_str(&format!(
            "{name},{:.6},{:.6},{:.6},{lo:.6},{hi:.6}\n",
            fit.beta[c], fit.se[c], boot.se[c]
        ));
    }
    s.push_str(&format!(
        "# replicates kept {} dropped {}\n",
        boot.replicates.len(),
        boot.dropped
    ));
    write_text(out, "fe_bootstrap.csv", &s)
}

pub fn fit_fe(cfg: &RunConfig) -> Result<()> {
    cfg.require_seed("fit-fe")?;
    let g = load_graph(cfg)?;
    let out = cfg.out_dir()?;
    let ctx = FeatureContext::new(&g, cfg.features.clone())?;
    let set = enumerate_tetrads(&ctx, &cfg.fe.tetrad).map_err(|e| match e {
        Error::EmptySample(m) => anyhow::Error::new(Error::EmptySample(m)).context(
            "the graph is too dense or too sparse for fixed-effect elimination: \
             it needs edge pairs i->j, l->k with neither i->k nor l->j",
        ),
        e => e.into(),
    })?;
    log::info!(
        "{} tetrads ({})",
        set.tetrads().len(),
        if set.is_exhaustive() { "exhaustive" } else { "sampled" }
    );
    let mut fe = fit_tetrad(&set, &cfg.fit.newton)?;
    if cfg.fe.bootstrap.replicates > 0 {
        let boot = bootstrap_se(&ctx, &cfg.fe.tetrad, &fe.names, &cfg.fit.newton, &cfg.fe.bootstrap)?;
        write_bootstrap(&fe, &boot, &out)?;
        fe.se = boot.se;
        fe.warnings.push("standard errors from the vertex bootstrap".into());
    }
    write_fit_summary(&fe, create(&out, "fe_fit.txt")?)?;
    write_text(&out, "fe_fit.json", &(fe.to_json() + "\n"))?;

    let plain = fit_one(cfg, &stream_for(&ctx, None)?, "world")?;
    write_fit_summary(&plain, create(&out, "fit_world.txt")?)?;
    let rows = compare_fits(&plain, &fe)?;
    write_comparison_csv(&rows, create(&out, "fe_comparison.csv")?)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    cfg.require_seed("simulate")?;
    let synth = cfg
        .synth
        .as_ref()
        .ok_or_else(|| config_error("`simulate` needs a [synth] section"))?;
    let out = cfg.out_dir()?;
    let truth = dyadnet::synth::generate(synth).context("synth")?;
    log::info!(
        "simulated {} vertices and {} edges",
        truth.graph.n(),
        truth.graph.edge_count()
    );
    truth.write(&out)?;
    Ok(())
}

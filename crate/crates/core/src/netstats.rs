//! Descriptive statistics of a follow graph, each with a delimited plot-data writer.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Pool;
use crate::features::mean_sd;
use crate::geo::{GeoPoint, LatLon, EARTH_RADIUS_KM};
use crate::graph::{Categorical, DirectedGraph, VertexTable, ACTIVITY_COLUMNS};

fn emit<W: Write>(mut out: W, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<plot data>", e))
}

/// Which degrees a power-law fit uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitRange {
    /// Degrees from `xmin` up to the first unobserved degree. Past that point
    /// the empirical mass is made of isolated single observations.
    #[default]
    Contiguous,
    /// Every observed degree from `xmin` on.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLawOptions {
    pub xmin: u64,
    pub range: FitRange,
}

impl Default for PowerLawOptions {
    fn default() -> Self {
        PowerLawOptions {
            xmin: 1,
            range: FitRange::Contiguous,
        }
    }
}

/// `P(d) = c * d^-lambda` fitted on the log-log scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub lambda: f64,
    pub c: f64,
    pub xmin: u64,
    /// Largest degree used.
    pub xmax: u64,
    pub r2: f64,
}

/// Empirical mass function of positive degrees: `(degree, count, share)`.
pub fn degree_distribution(degrees: &[u64]) -> Vec<(u64, u64, f64)> {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &d in degrees.iter().filter(|&&d| d > 0) {
        *counts.entry(d).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    counts
        .into_iter()
        .map(|(d, c)| (d, c, c as f64 / total as f64))
        .collect()
}

/// Least-squares line through `(ln d, ln p)`; `lambda` is minus the slope.
pub fn fit_power_law_mass(mass: &[(u64, f64)]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = mass
        .iter()
        .filter(|(d, p)| *d > 0 && *p > 0.0)
        .map(|&(d, p)| ((d as f64).ln(), p.ln()))
        .collect();
    let distinct = {
        let mut ds: Vec<u64> = mass.iter().filter(|(d, p)| *d > 0 && *p > 0.0).map(|m| m.0).collect();
        ds.sort_unstable();
        ds.dedup();
        ds.len()
    };
    if distinct < 2 {
        return Err(Error::Numerical(format!(
            "a power-law fit needs at least 2 distinct degrees, got {distinct}"
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(PowerLawFit {
        lambda: -slope,
        c: intercept.exp(),
        xmin: mass.iter().map(|m| m.0).filter(|&d| d > 0).min().unwrap_or(1),
        xmax: mass.iter().map(|m| m.0).max().unwrap_or(1),
        r2,
    })
}

/// Power-law fit to the empirical mass function of `degrees`.
pub fn fit_power_law(degrees: &[u64], opts: &PowerLawOptions) -> Result<PowerLawFit> {
    if opts.xmin == 0 {
        return Err(Error::Config("xmin must be at least 1".into()));
    }
    let dist = degree_distribution(degrees);
    let mut mass: Vec<(u64, f64)> = dist.iter().filter(|m| m.0 >= opts.xmin).map(|m| (m.0, m.2)).collect();
    if opts.range == FitRange::Contiguous {
        let keep = mass
            .windows(2)
            .position(|w| w[1].0 != w[0].0 + 1)
            .map_or(mass.len(), |p| p + 1);
        mass.truncate(keep);
    }
    let mut fit = fit_power_law_mass(&mass)?;
    fit.xmin = opts.xmin;
    Ok(fit)
}

/// Lower median: the `floor((n - 1) / 2)`-th order statistic.
pub fn lower_median(values: &[u64]) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    Some(v[(v.len() - 1) / 2])
}

pub fn write_degree_distribution<W: Write>(
    degrees: &[u64],
    label: &str,
    fit: Option<&PowerLawFit>,
    out: W,
) -> Result<()> {
    let mut s = format!("# {label} degree distribution on log-log axes (zero degrees omitted)\n");
    if let Some(f) = fit {
        s.push_str(&format!(
            "# power law fit: lambda={:.6} c={:.6} xmin={} xmax={} r2={:.6}\n",
            f.lambda, f.c, f.xmin, f.xmax, f.r2
        ));
    }
    s.push_str("degree,count,share,log_degree,log_share\n");
    for (d, c, p) in degree_distribution(degrees) {
        s.push_str(&format!("{d},{c},{p:.9e},{:.9},{:.9}\n", (d as f64).ln(), p.ln()));
    }
    emit(out, &s)
}

/// One vertex's in-degree and the mean in-degree of the vertices it follows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborDegree {
    pub vertex: usize,
    pub in_degree: usize,
    pub followees: usize,
    /// `None` for vertices that follow nobody.
    pub mean_followee_in_degree: Option<f64>,
}

pub fn neighbor_avg_in_degree(g: &DirectedGraph) -> Vec<NeighborDegree> {
    let ind = g.in_degrees();
    (0..g.n())
        .map(|v| {
            let succ = g.successors(v);
            let mean = (!succ.is_empty())
                .then(|| succ.iter().map(|&s| ind[s as usize] as f64).sum::<f64>() / succ.len() as f64);
            NeighborDegree {
                vertex: v,
                in_degree: ind[v],
                followees: succ.len(),
                mean_followee_in_degree: mean,
            }
        })
        .collect()
}

/// Vertices with followees grouped by own in-degree: `(in_degree, vertices, mean of followee means)`.
pub fn neighbor_degree_curve(rows: &[NeighborDegree]) -> Vec<(usize, usize, f64)> {
    let mut groups: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for r in rows {
        if let Some(m) = r.mean_followee_in_degree {
            let e = groups.entry(r.in_degree).or_default();
            e.0 += 1;
            e.1 += m;
        }
    }
    groups.into_iter().map(|(d, (c, s))| (d, c, s / c as f64)).collect()
}

pub fn write_neighbor_degrees<W: Write>(g: &DirectedGraph, rows: &[NeighborDegree], out: W) -> Result<()> {
    let vt = g.vertices();
    let mut s = String::from("# vertex in-degree against the mean in-degree of its followees (NA: follows nobody)\n");
    s.push_str("id,in_degree,followees,mean_followee_in_degree\n");
    for r in rows {
        let m = r
            .mean_followee_in_degree
            .map_or("NA".to_string(), |m| format!("{m:.6}"));
        s.push_str(&format!(
            "{},{},{},{m}\n",
            vt.get(r.vertex).id,
            r.in_degree,
            r.followees
        ));
    }
    emit(out, &s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    /// Every unordered pair of vertices.
    #[default]
    AllDyads,
    /// Unordered pairs linked in both directions.
    MutualDyads,
}

/// Half-open kilometre bins; distances past the last edge fall in the last bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub bin_edges_km: Vec<f64>,
    pub counts: Vec<u64>,
    pub population: Population,
}

impl DistanceHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// `bins` equal-width bins over `[0, half the Earth's circumference]`.
pub fn default_histogram_edges(bins: usize) -> Vec<f64> {
    let top = (std::f64::consts::PI * EARTH_RADIUS_KM).floor();
    (0..=bins).map(|b| top * b as f64 / bins as f64).collect()
}

pub fn distance_histogram(
    g: &DirectedGraph,
    population: Population,
    bin_edges_km: &[f64],
    workers: usize,
) -> Result<DistanceHistogram> {
    if bin_edges_km.len() < 2 || bin_edges_km.windows(2).any(|w| !(w[0] < w[1])) || bin_edges_km[0] != 0.0 {
        return Err(Error::Config(
            "histogram edges must start at 0 and increase strictly".into(),
        ));
    }
    let nb = bin_edges_km.len() - 1;
    let points: Vec<GeoPoint> = g
        .vertices()
        .iter()
        .map(|v| LatLon::new(v.lat, v.lon).map(GeoPoint::new))
        .collect::<Result<_>>()?;
    let n = points.len();
    let parts = 64.min(n.max(1));
    let bound = |p: usize| ((1.0 - (1.0 - p as f64 / parts as f64).sqrt()) * n as f64).round() as usize;
    let pool = Pool::new(workers);
    let partial = pool.map(parts, |p| {
        let mut counts = vec![0u64; nb];
        let hi = if p + 1 == parts { n } else { bound(p + 1) };
        for i in bound(p)..hi {
            for j in i + 1..n {
                if population == Population::MutualDyads && !(g.has_edge(i, j) && g.has_edge(j, i)) {
                    continue;
                }
                let d = points[i].distance_km(&points[j]);
                let b = bin_edges_km.partition_point(|&e| e <= d).saturating_sub(1).min(nb - 1);
                counts[b] += 1;
            }
        }
        counts
    });
    let mut counts = vec![0u64; nb];
    for part in partial {
        for (a, b) in counts.iter_mut().zip(part) {
            *a += b;
        }
    }
    Ok(DistanceHistogram {
        bin_edges_km: bin_edges_km.to_vec(),
        counts,
        population,
    })
}

pub fn write_distance_histograms<W: Write>(all: &DistanceHistogram, mutual: &DistanceHistogram, out: W) -> Result<()> {
    let mut s = String::from("# geodesic distance between every pair of users and between mutually linked users\n");
    s.push_str("lower_km,upper_km,all_pairs,mutual_pairs\n");
    for b in 0..all.counts.len() {
        s.push_str(&format!(
            "{:.3},{:.3},{},{}\n",
            all.bin_edges_km[b],
            all.bin_edges_km[b + 1],
            all.counts[b],
            mutual.counts.get(b).copied().unwrap_or(0)
        ));
    }
    emit(out, &s)
}

/// Follow counts between the most populous countries; everything else is `OTHER`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountryMatrix {
    pub labels: Vec<String>,
    /// `counts[a][b]`: edges from a user of country `a` to one of country `b`.
    pub counts: Vec<Vec<u64>>,
}

pub const OTHER: &str = "OTHER";

pub fn country_follow_matrix(g: &DirectedGraph, top_k: usize) -> Result<CountryMatrix> {
    if top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let vt = g.vertices();
    let levels = &vt.levels.country;
    let mut sizes: BTreeMap<Categorical, u64> = BTreeMap::new();
    for v in vt.iter().filter(|v| !v.country.is_unknown()) {
        *sizes.entry(v.country).or_default() += 1;
    }
    let mut ranked: Vec<(Categorical, u64)> = sizes.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| levels.name(a.0).cmp(levels.name(b.0))));
    ranked.truncate(top_k);
    let mut labels: Vec<String> = ranked.iter().map(|(c, _)| levels.name(*c).to_string()).collect();
    let group = |c: Categorical| ranked.iter().position(|r| r.0 == c).unwrap_or(ranked.len());
    let has_other = vt.iter().any(|v| group(v.country) == ranked.len());
    let size = ranked.len() + has_other as usize;
    if has_other {
        labels.push(OTHER.into());
    }
    let mut counts = vec![vec![0u64; size]; size];
    let groups: Vec<usize> = vt.iter().map(|v| group(v.country)).collect();
    for (a, b) in g.edges() {
        counts[groups[a]][groups[b]] += 1;
    }
    Ok(CountryMatrix { labels, counts })
}

pub fn write_country_matrix<W: Write>(m: &CountryMatrix, out: W) -> Result<()> {
    let mut s = String::from("# follow counts; rows are follower countries, columns followee countries\n");
    s.push_str("follower");
    for l in &m.labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for (l, row) in m.labels.iter().zip(&m.counts) {
        s.push_str(l);
        for c in row {
            s.push_str(&format!(",{c}"));
        }
        s.push('\n');
    }
    emit(out, &s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, sample standard deviation, minimum and maximum of every numeric
/// vertex column, plus the iOS share.
pub fn summary_table(vertices: &VertexTable) -> Result<Vec<SummaryRow>> {
    if vertices.is_empty() {
        return Err(Error::Domain("no vertices to summarise".into()));
    }
    let row = |name: &str, values: Vec<f64>| {
        let (mean, sd) = mean_sd(&values);
        SummaryRow {
            name: name.to_string(),
            mean,
            sd,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    };
    let col = |f: &dyn Fn(&crate::graph::Vertex) -> f64| vertices.iter().map(f).collect::<Vec<f64>>();
    let ios = vertices
        .levels
        .platform
        .lookup("ios")
        .or_else(|| vertices.levels.platform.lookup("iOS"));
    let mut out = Vec::new();
    for (a, name) in ACTIVITY_COLUMNS.iter().enumerate().take(2) {
        out.push(row(name, col(&|v| v.activity[a])));
    }
    out.push(row("platform_ios", col(&|v| (Some(v.platform) == ios) as u8 as f64)));
    out.push(row("age", col(&|v| v.age)));
    out.push(row("height_cm", col(&|v| v.height_cm)));
    out.push(row("weight_kg", col(&|v| v.weight_kg)));
    for (a, name) in ACTIVITY_COLUMNS.iter().enumerate().skip(2) {
        out.push(row(name, col(&|v| v.activity[a])));
    }
    Ok(out)
}

pub fn write_summary_table<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut s = String::from("# vertex attribute summary: mean, sample standard deviation, min, max\n");
    s.push_str("attribute,mean,sd,min,max\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.name, r.mean, r.sd, r.min, r.max
        ));
    }
    emit(out, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{plain_vertex, table};
    use crate::graph::CategoryLevels;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Zeta};
    use std::sync::Arc;

    #[test]
    fn two_point_mass_gives_three() {
        let fit = fit_power_law_mass(&[(1, 8.0 / 9.0), (2, 1.0 / 9.0)]).unwrap();
        assert!((fit.lambda - 3.0).abs() < 1e-12);
        let degrees = [1, 1, 1, 1, 1, 1, 1, 1, 2];
        let fit = fit_power_law(&degrees, &PowerLawOptions::default()).unwrap();
        assert!((fit.lambda - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_degrees_do_not_fit() {
        assert!(fit_power_law(&[4, 4, 4, 0], &PowerLawOptions::default()).is_err());
    }

    #[test]
    fn zeta_samples_recover_exponent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let zeta = Zeta::new(2.0).unwrap();
        let degrees: Vec<u64> = (0..100_000).map(|_| zeta.sample(&mut rng) as u64).collect();
        let fit = fit_power_law(&degrees, &PowerLawOptions::default()).unwrap();
        assert!((1.9..=2.1).contains(&fit.lambda), "{}", fit.lambda);
    }

    proptest! {
        #[test]
        fn scaling_mass_keeps_lambda(
            probs in prop::collection::vec(0.001f64..1.0, 3..10),
            scale in 0.01f64..100.0,
        ) {
            let mass: Vec<(u64, f64)> = probs.iter().enumerate().map(|(d, &p)| (d as u64 + 1, p)).collect();
            let scaled: Vec<(u64, f64)> = mass.iter().map(|&(d, p)| (d, p * scale)).collect();
            let a = fit_power_law_mass(&mass).unwrap();
            let b = fit_power_law_mass(&scaled).unwrap();
            prop_assert!((a.lambda - b.lambda).abs() < 1e-9);
        }
    }

    #[test]
    fn lower_median_convention() {
        assert_eq!(lower_median(&[4, 1, 3, 2]), Some(2));
        assert_eq!(lower_median(&[5]), Some(5));
        assert_eq!(lower_median(&[]), None);
    }

    #[test]
    fn star_leaves_see_hub_degree() {
        let g = DirectedGraph::from_index_edges(table(6), (1..6).map(|l| (l, 0))).unwrap();
        let rows = neighbor_avg_in_degree(&g);
        assert_eq!(rows[0].mean_followee_in_degree, None);
        for r in &rows[1..] {
            assert_eq!(r.mean_followee_in_degree, Some(5.0));
        }
        assert_eq!(neighbor_degree_curve(&rows), vec![(0, 5, 5.0)]);
    }

    #[test]
    fn neighbor_degrees_match_dense_matrix() {
        let n = 300;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut dense = vec![vec![0u8; n]; n];
        let mut edges = Vec::new();
        for (a, row) in dense.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                if a != b && rng.random_bool(0.02) {
                    *cell = 1;
                    edges.push((a, b));
                }
            }
        }
        let g = DirectedGraph::from_index_edges(table(n), edges).unwrap();
        let ind: Vec<f64> = (0..n).map(|b| (0..n).map(|a| dense[a][b] as f64).sum()).collect();
        for r in neighbor_avg_in_degree(&g) {
            let out: f64 = dense[r.vertex].iter().map(|&x| x as f64).sum();
            let expected = (out > 0.0).then(|| (0..n).map(|b| dense[r.vertex][b] as f64 * ind[b]).sum::<f64>() / out);
            assert_eq!(r.mean_followee_in_degree, expected);
            assert_eq!(r.in_degree as f64, ind[r.vertex]);
        }
    }

    fn located(points: &[(f64, f64)], edges: &[(usize, usize)]) -> DirectedGraph {
        let mut t = VertexTable::default();
        for (id, &(lat, lon)) in points.iter().enumerate() {
            let mut v = plain_vertex(id as i64);
            v.lat = lat;
            v.lon = lon;
            t.push(v).unwrap();
        }
        DirectedGraph::from_index_edges(Arc::new(t), edges.iter().copied()).unwrap()
    }

    #[test]
    fn seven_km_pair() {
        // 7 km due north: 7 / (R * pi / 180) degrees of latitude
        let dlat = 7.0 / (EARTH_RADIUS_KM * std::f64::consts::PI / 180.0);
        let g = located(&[(10.0, 20.0), (10.0 + dlat, 20.0)], &[(0, 1), (1, 0)]);
        let edges = [0.0, 5.0, 10.0, 50.0];
        let all = distance_histogram(&g, Population::AllDyads, &edges, 1).unwrap();
        let mutual = distance_histogram(&g, Population::MutualDyads, &edges, 1).unwrap();
        assert_eq!(all.counts, vec![0, 1, 0]);
        assert_eq!(mutual.counts, vec![0, 1, 0]);
    }

    #[test]
    fn coincident_points_fill_first_bin() {
        let g = located(&[(1.0, 1.0); 7], &[]);
        let h = distance_histogram(&g, Population::AllDyads, &default_histogram_edges(200), 1).unwrap();
        assert_eq!(h.counts[0], 21);
        assert_eq!(h.total(), 21);
    }

    #[test]
    fn antipodes_land_in_last_bin() {
        let g = located(&[(0.0, 0.0), (0.0, 180.0)], &[]);
        let h = distance_histogram(&g, Population::AllDyads, &default_histogram_edges(200), 1).unwrap();
        assert_eq!(h.counts[199], 1);
    }

    #[test]
    fn three_cluster_geography_is_trimodal() {
        // Clusters of pairs at ~1 km, ~300 km and ~5000 km.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let centres = [(0.0, 0.0), (2.7, 0.0), (0.0, 45.0)];
        let mut pts = Vec::new();
        for &(la, lo) in &centres {
            for _ in 0..20 {
                pts.push((
                    la + rng.random_range(-0.005..0.005),
                    lo + rng.random_range(-0.005..0.005),
                ));
            }
        }
        let g = located(&pts, &[]);
        let edges = [0.0, 10.0, 100.0, 250.0, 400.0, 1000.0, 4000.0, 6000.0, 20015.0];
        let h = distance_histogram(&g, Population::AllDyads, &edges, 2).unwrap();
        assert_eq!(h.counts, vec![3 * 190, 0, 0, 400, 0, 0, 800, 0]);
    }

    proptest! {
        #[test]
        fn mutual_counts_never_exceed_all(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(f64, f64)> = (0..15).map(|_| (rng.random_range(-60.0..60.0), rng.random_range(-170.0..170.0))).collect();
            let edges: Vec<(usize, usize)> = (0..15).flat_map(|a| (0..15).map(move |b| (a, b))).filter(|&(a, b)| a != b && (a * 7 + b * 3 + seed as usize) % 4 == 0).collect();
            let g = located(&pts, &edges);
            let e = default_histogram_edges(20);
            let all = distance_histogram(&g, Population::AllDyads, &e, 1).unwrap();
            let mutual = distance_histogram(&g, Population::MutualDyads, &e, 3).unwrap();
            prop_assert_eq!(all.total(), 105);
            prop_assert!(all.counts.iter().zip(&mutual.counts).all(|(a, m)| m <= a));
        }
    }

    fn two_countries() -> DirectedGraph {
        let mut levels = CategoryLevels::default();
        let (a, b) = (levels.country.intern("AA"), levels.country.intern("BB"));
        let mut t = VertexTable::new(levels);
        for id in 0..8 {
            let mut v = plain_vertex(id);
            v.country = if id < 4 { a } else { b };
            t.push(v).unwrap();
        }
        let mut edges = Vec::new();
        let within = |base: usize| {
            (0..4)
                .flat_map(move |x| (0..4).map(move |y| (base + x, base + y)))
                .filter(|(x, y)| x != y)
        };
        edges.extend(within(0).take(10));
        edges.extend(within(4).take(10));
        edges.extend([(0, 4), (1, 5), (2, 6), (4, 0), (5, 1), (6, 2)]);
        DirectedGraph::from_index_edges(Arc::new(t), edges).unwrap()
    }

    #[test]
    fn two_country_matrix() {
        let m = country_follow_matrix(&two_countries(), 5).unwrap();
        assert_eq!(m.labels, vec!["AA", "BB"]);
        assert_eq!(m.counts, vec![vec![10, 3], vec![3, 10]]);
        let one = country_follow_matrix(&two_countries(), 1).unwrap();
        assert_eq!(one.labels, vec!["AA", OTHER]);
        let total: u64 = one.counts.iter().flatten().sum();
        assert_eq!(total, 26);
        let out = two_countries().out_degrees();
        assert_eq!(one.counts[0].iter().sum::<u64>(), out[..4].iter().sum::<usize>() as u64);
    }

    #[test]
    fn single_country_matrix() {
        let g = DirectedGraph::from_index_edges(table(3), [(0, 1), (1, 2)]).unwrap();
        // No known country: everything is OTHER.
        let m = country_follow_matrix(&g, 3).unwrap();
        assert_eq!(m.labels, vec![OTHER]);
        assert_eq!(m.counts, vec![vec![2]]);
    }

    #[test]
    fn summary_examples() {
        let mut t = VertexTable::default();
        for (id, age) in [(1, 19.0), (2, 20.0), (3, 21.0)] {
            let mut v = plain_vertex(id);
            v.age = age;
            t.push(v).unwrap();
        }
        let rows = summary_table(&t).unwrap();
        let age = rows.iter().find(|r| r.name == "age").unwrap();
        assert_eq!((age.mean, age.sd, age.min, age.max), (20.0, 1.0, 19.0, 21.0));
        let single = summary_table(&VertexTable::default());
        assert!(single.is_err());
        let mut one = VertexTable::default();
        one.push(plain_vertex(1)).unwrap();
        assert_eq!(summary_table(&one).unwrap()[3].sd, 0.0);
        assert_eq!(rows.len(), ACTIVITY_COLUMNS.len() + 4);
    }
}

//! Dyad design rows: distance bins and geographic homophily (`D`), plus
//! demographic homophily, directional, popularity, activity and intercept
//! controls (`X`).
//!
//! The column layout is fixed by a [`FeatureSpec`] and recorded in a
//! [`DesignLayout`]; every row of a run shares it.

mod continent;
mod popularity;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use continent::continent_of;
pub use popularity::{popularity_index, write_popularity_csv, CountryPopularity, PopularityRule};

use crate::design::{Permutation, RowSource};
use crate::error::{Error, Result};
use crate::geo::{DistanceBinScheme, GeoPoint, LatLon};
use crate::graph::{Categorical, DirectedGraph, Levels, NetworkView, VertexTable, ACTIVITY_COLUMNS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityEncoding {
    None,
    Score,
    Flag,
    #[default]
    Both,
}

/// Closed similarity thresholds (`|difference| <= threshold`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub age_years: f64,
    pub height_cm: f64,
    pub weight_kg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            age_years: 5.0,
            height_cm: 5.0,
            weight_kg: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub distance_bins: bool,
    pub distance_bins_km: DistanceBinScheme,
    /// same_continent, same_country, same_region, same_city
    pub geo_homophily: bool,
    /// same_platform, age/height/weight within threshold, same_ethnicity, same_language
    pub demographic_homophily: bool,
    /// src_older, dst_taller
    pub directional: bool,
    pub popularity: PopularityEncoding,
    pub popularity_rule: PopularityRule,
    /// Activity counters entered, standardised, for both sender and receiver.
    pub activity: Vec<String>,
    pub intercept: bool,
    pub thresholds: Thresholds,
    pub view: NetworkView,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            distance_bins: true,
            distance_bins_km: DistanceBinScheme::default(),
            geo_homophily: true,
            demographic_homophily: true,
            directional: true,
            popularity: PopularityEncoding::Both,
            popularity_rule: PopularityRule::default(),
            activity: ACTIVITY_COLUMNS.iter().map(|s| s.to_string()).collect(),
            intercept: true,
            thresholds: Thresholds::default(),
            view: NetworkView::Directed,
        }
    }
}

impl FeatureSpec {
    /// Everything except popularity and activity: the dyad-level features.
    pub fn dyadic_only() -> Self {
        FeatureSpec {
            popularity: PopularityEncoding::None,
            activity: Vec::new(),
            ..FeatureSpec::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Dummy for a non-reference distance bin.
    DistanceBin,
    Indicator,
    Continuous,
    Intercept,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
}

/// Column layout of the design row: the `D` block first, then `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub features: Vec<FeatureInfo>,
    pub d_width: usize,
}

impl DesignLayout {
    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn kind(&self, idx: usize) -> FeatureKind {
        self.features[idx].kind
    }

    /// Sidecar manifest: `feature,column,kind,block`.
    pub fn write_manifest<W: Write>(&self, mut out: W) -> Result<()> {
        let mut text = String::from("feature,column,kind,block\n");
        for (c, f) in self.features.iter().enumerate() {
            let kind = match f.kind {
                FeatureKind::DistanceBin => "distance_bin",
                FeatureKind::Indicator => "indicator",
                FeatureKind::Continuous => "continuous",
                FeatureKind::Intercept => "intercept",
            };
            let block = if c < self.d_width { "D" } else { "X" };
            text.push_str(&format!("{},{c},{kind},{block}\n", f.name));
        }
        out.write_all(text.as_bytes()).map_err(|e| Error::io("<manifest>", e))
    }
}

/// Mean and sample standard deviation of one vertex column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Constant columns carry no information and are left out of the design.
    pub excluded: bool,
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n as f64 - 1.0)).sqrt())
}

pub fn standardize_stats(vertices: &VertexTable) -> Vec<ColumnStats> {
    ACTIVITY_COLUMNS
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let col: Vec<f64> = vertices.iter().map(|v| v.activity[a]).collect();
            let (mean, sd) = mean_sd(&col);
            ColumnStats {
                name: name.to_string(),
                mean,
                sd,
                excluded: !(sd > 0.0),
            }
        })
        .collect()
}

/// One dyad: outcome plus the `D` and `X` blocks of its design row.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadRow {
    pub src: usize,
    pub dst: usize,
    pub w: f64,
    values: Vec<f64>,
    d_width: usize,
}

impl DyadRow {
    pub fn d(&self) -> &[f64] {
        &self.values[..self.d_width]
    }

    pub fn x(&self) -> &[f64] {
        &self.values[self.d_width..]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Column offsets of each feature group, `None` when the group is disabled.
#[derive(Clone, Debug, Default)]
struct Offsets {
    bins: Option<usize>,
    geo: Option<usize>,
    demo: Option<usize>,
    directional: Option<usize>,
    pop_score: Option<usize>,
    pop_flag: Option<usize>,
    activity: Option<usize>,
    intercept: Option<usize>,
}

/// Frozen per-run state needed to build any dyad row.
#[derive(Clone, Debug)]
pub struct FeatureContext {
    spec: FeatureSpec,
    layout: DesignLayout,
    offsets: Offsets,
    vertices: Arc<VertexTable>,
    points: Vec<GeoPoint>,
    continents: Vec<Categorical>,
    pop_score: Vec<f64>,
    pop_flag: Vec<f64>,
    activity: Vec<f64>,
    activity_width: usize,
    standardization: Vec<ColumnStats>,
    popularity: Vec<CountryPopularity>,
    outcome: Option<DirectedGraph>,
}

impl FeatureContext {
    /// Context over an observed graph. Popularity is always scored on the
    /// directed follows; outcomes come from `spec.view`.
    pub fn new(graph: &DirectedGraph, spec: FeatureSpec) -> Result<Self> {
        let popularity = popularity_index(graph, &spec.popularity_rule);
        let mut ctx = Self::build(Arc::clone(graph.vertices()), spec, popularity)?;
        ctx.outcome = Some(graph.view(ctx.spec.view));
        Ok(ctx)
    }

    /// Design-only context (no observed edges), used by the simulator.
    pub fn for_vertices(vertices: Arc<VertexTable>, spec: FeatureSpec) -> Result<Self> {
        if spec.popularity != PopularityEncoding::None {
            return Err(Error::Config(
                "popularity features need an observed graph; set popularity = \"none\"".into(),
            ));
        }
        Self::build(vertices, spec, Vec::new())
    }

    fn build(vertices: Arc<VertexTable>, spec: FeatureSpec, popularity: Vec<CountryPopularity>) -> Result<Self> {
        let n = vertices.len();
        let points = vertices
            .iter()
            .map(|v| LatLon::new(v.lat, v.lon).map(GeoPoint::new))
            .collect::<Result<Vec<_>>>()?;

        let mut continent_levels = Levels::default();
        let continents = vertices
            .iter()
            .map(|v| {
                if v.country.is_unknown() {
                    return Categorical::UNKNOWN;
                }
                match continent_of(vertices.levels.country.name(v.country)) {
                    Some(k) => continent_levels.intern(k),
                    None => Categorical::UNKNOWN,
                }
            })
            .collect();

        let standardization = standardize_stats(&vertices);
        let mut act_cols = Vec::new();
        for name in &spec.activity {
            let a = ACTIVITY_COLUMNS
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Config(format!("unknown activity column {name:?}")))?;
            if act_cols.contains(&a) {
                return Err(Error::Config(format!("activity column {name:?} listed twice")));
            }
            if standardization[a].excluded {
                log::warn!("activity column {name} is constant and is left out of the design");
                continue;
            }
            act_cols.push(a);
        }

        let mut features = Vec::new();
        let mut offsets = Offsets::default();
        fn add(features: &mut Vec<FeatureInfo>, name: String, kind: FeatureKind) -> usize {
            features.push(FeatureInfo { name, kind });
            features.len() - 1
        }
        if spec.distance_bins {
            let scheme = &spec.distance_bins_km;
            offsets.bins = Some(features.len());
            for b in 1..scheme.bin_count() {
                add(&mut features, scheme.label(b), FeatureKind::DistanceBin);
            }
        }
        if spec.geo_homophily {
            offsets.geo = Some(add(&mut features, "same_continent".into(), FeatureKind::Indicator));
            for name in ["same_country", "same_region", "same_city"] {
                add(&mut features, name.into(), FeatureKind::Indicator);
            }
        }
        let d_width = features.len();
        if spec.demographic_homophily {
            offsets.demo = Some(add(&mut features, "same_platform".into(), FeatureKind::Indicator));
            for name in [
                "age_within_5y",
                "same_ethnicity",
                "height_within_5cm",
                "weight_within_5kg",
                "same_language",
            ] {
                add(&mut features, name.into(), FeatureKind::Indicator);
            }
        }
        if spec.directional {
            offsets.directional = Some(add(&mut features, "src_older".into(), FeatureKind::Indicator));
            add(&mut features, "dst_taller".into(), FeatureKind::Indicator);
        }
        if matches!(spec.popularity, PopularityEncoding::Score | PopularityEncoding::Both) {
            offsets.pop_score = Some(add(&mut features, "dst_popularity".into(), FeatureKind::Continuous));
        }
        if matches!(spec.popularity, PopularityEncoding::Flag | PopularityEncoding::Both) {
            offsets.pop_flag = Some(add(&mut features, "dst_popular_country".into(), FeatureKind::Indicator));
        }
        if !act_cols.is_empty() {
            offsets.activity = Some(features.len());
            for side in ["src", "dst"] {
                for &a in &act_cols {
                    add(
                        &mut features,
                        format!("{side}_{}", ACTIVITY_COLUMNS[a]),
                        FeatureKind::Continuous,
                    );
                }
            }
        }
        if spec.intercept {
            offsets.intercept = Some(add(&mut features, "intercept".into(), FeatureKind::Intercept));
        }

        let mut activity = Vec::with_capacity(n * act_cols.len());
        for v in vertices.iter() {
            for &a in &act_cols {
                let s = &standardization[a];
                activity.push((v.activity[a] - s.mean) / s.sd);
            }
        }

        let (mut pop_score, mut pop_flag) = (Vec::new(), Vec::new());
        if spec.popularity != PopularityEncoding::None {
            let lookup = |c: Categorical| popularity.iter().find(|p| p.code == c);
            pop_score = vertices
                .iter()
                .map(|v| lookup(v.country).map_or(0.0, |p| p.score))
                .collect();
            pop_flag = vertices
                .iter()
                .map(|v| lookup(v.country).map_or(0.0, |p| if p.popular { 1.0 } else { 0.0 }))
                .collect();
        }

        Ok(FeatureContext {
            layout: DesignLayout { features, d_width },
            offsets,
            points,
            continents,
            pop_score,
            pop_flag,
            activity_width: act_cols.len(),
            activity,
            standardization,
            popularity,
            outcome: None,
            vertices,
            spec,
        })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn layout(&self) -> &DesignLayout {
        &self.layout
    }

    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &Arc<VertexTable> {
        &self.vertices
    }

    pub fn view(&self) -> NetworkView {
        self.spec.view
    }

    pub fn popularity(&self) -> &[CountryPopularity] {
        &self.popularity
    }

    pub fn standardization(&self) -> &[ColumnStats] {
        &self.standardization
    }

    /// Outcome graph in the configured view, if the context was built from one.
    pub fn outcome_graph(&self) -> Option<&DirectedGraph> {
        self.outcome.as_ref()
    }

    #[inline]
    pub fn outcome(&self, i: usize, j: usize) -> f64 {
        match &self.outcome {
            Some(g) if g.has_edge(i, j) => 1.0,
            _ => 0.0,
        }
    }

    pub fn distance_km(&self, i: usize, j: usize) -> f64 {
        self.points[i].distance_km(&self.points[j])
    }

    /// Writes the covariates of dyad `(i, j)` into `out`. Hot path; no checks
    /// beyond debug assertions.
    #[inline]
    pub fn fill_row(&self, i: usize, j: usize, out: &mut [f64]) {
        debug_assert!(i != j && out.len() == self.width());
        let vt = &self.vertices;
        let (a, b) = (vt.get(i), vt.get(j));
        let ind = |x: bool| if x { 1.0 } else { 0.0 };
        let o = &self.offsets;

        if let Some(off) = o.bins {
            let scheme = &self.spec.distance_bins_km;
            let slots = &mut out[off..off + scheme.bin_count() - 1];
            slots.fill(0.0);
            let bin = scheme.bin_of(self.points[i].distance_km(&self.points[j]));
            if bin > DistanceBinScheme::REFERENCE_BIN {
                slots[bin - 1] = 1.0;
            }
        }
        if let Some(off) = o.geo {
            out[off] = ind(self.continents[i].same_known(self.continents[j]));
            out[off + 1] = ind(a.country.same_known(b.country));
            out[off + 2] = ind(a.region.same_known(b.region));
            out[off + 3] = ind(a.city.same_known(b.city));
        }
        if let Some(off) = o.demo {
            let t = &self.spec.thresholds;
            out[off] = ind(a.platform.same_known(b.platform));
            out[off + 1] = ind((a.age - b.age).abs() <= t.age_years);
            out[off + 2] = ind(a.ethnicity.same_known(b.ethnicity));
            out[off + 3] = ind((a.height_cm - b.height_cm).abs() <= t.height_cm);
            out[off + 4] = ind((a.weight_kg - b.weight_kg).abs() <= t.weight_kg);
            out[off + 5] = ind(a.language.same_known(b.language));
        }
        if let Some(off) = o.directional {
            out[off] = ind(a.age > b.age);
            out[off + 1] = ind(b.height_cm > a.height_cm);
        }
        if let Some(off) = o.pop_score {
            out[off] = self.pop_score[j];
        }
        if let Some(off) = o.pop_flag {
            out[off] = self.pop_flag[j];
        }
        if let Some(off) = o.activity {
            let k = self.activity_width;
            out[off..off + k].copy_from_slice(&self.activity[i * k..(i + 1) * k]);
            out[off + k..off + 2 * k].copy_from_slice(&self.activity[j * k..(j + 1) * k]);
        }
        if let Some(off) = o.intercept {
            out[off] = 1.0;
        }
    }

    pub fn build_dyad_row(&self, i: usize, j: usize) -> Result<DyadRow> {
        let n = self.n();
        if i == j {
            return Err(Error::Domain(format!("dyad ({i}, {j}) is a self-pair")));
        }
        if i >= n || j >= n {
            return Err(Error::Domain(format!("dyad ({i}, {j}) outside 0..{n}")));
        }
        let mut values = vec![0.0; self.width()];
        self.fill_row(i, j, &mut values);
        Ok(DyadRow {
            src: i,
            dst: j,
            w: self.outcome(i, j),
            values,
            d_width: self.layout.d_width,
        })
    }

    /// Mean design row over every dyad of the stream.
    pub fn mean_row(&self, stream: &DyadStream<'_>) -> Vec<f64> {
        let width = self.width();
        let mut sum = vec![0.0; width];
        let mut buf = vec![0.0; width];
        for t in 0..stream.len() {
            stream.row_at(t, &mut buf);
            for (s, v) in sum.iter_mut().zip(&buf) {
                *s += v;
            }
        }
        let n = stream.len().max(1) as f64;
        sum.iter().map(|s| s / n).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DyadOrder {
    #[default]
    Deterministic,
    Shuffled(u64),
}

/// Every dyad of a run, addressable by a dense index and never materialised.
///
/// In the directed view the stream holds each ordered pair `(i, j)` with the
/// sender passing the country restriction. In the mutual view outcomes are
/// symmetric, so each unordered pair appears once, oriented from the
/// restricted side (and `i < j` when both ends qualify).
#[derive(Clone, Debug)]
pub struct DyadStream<'a> {
    ctx: &'a FeatureContext,
    srcs: Vec<u32>,
    /// Mutual view: first index of each sender's block.
    offsets: Vec<u64>,
    len: u64,
    order: DyadOrder,
}

impl<'a> DyadStream<'a> {
    pub fn new(ctx: &'a FeatureContext, restrict_src_country: Option<Categorical>, order: DyadOrder) -> Self {
        let n = ctx.n();
        let srcs: Vec<u32> = (0..n)
            .filter(|&i| restrict_src_country.is_none_or(|c| ctx.vertices.get(i).country == c))
            .map(|i| i as u32)
            .collect();
        let per_src = n.saturating_sub(1) as u64;
        let (offsets, len) = match ctx.view() {
            NetworkView::Directed => (Vec::new(), srcs.len() as u64 * per_src),
            NetworkView::Mutual => {
                let mut offsets = Vec::with_capacity(srcs.len());
                let mut acc = 0u64;
                for p in 0..srcs.len() {
                    offsets.push(acc);
                    acc += per_src - p as u64;
                }
                (offsets, acc)
            }
        };
        DyadStream {
            ctx,
            srcs,
            offsets,
            len,
            order,
        }
    }

    /// Restricts senders to the named country.
    pub fn for_country(ctx: &'a FeatureContext, country: &str, order: DyadOrder) -> Result<Self> {
        let code = ctx
            .vertices
            .levels
            .country
            .lookup(country)
            .ok_or_else(|| Error::Config(format!("country {country:?} does not occur in the data")))?;
        Ok(Self::new(ctx, Some(code), order))
    }

    pub fn context(&self) -> &FeatureContext {
        self.ctx
    }

    pub fn sender_count(&self) -> usize {
        self.srcs.len()
    }

    /// `(src, dst)` of dyad `t` in deterministic order.
    #[inline]
    pub fn locate(&self, t: u64) -> (usize, usize) {
        debug_assert!(t < self.len);
        match self.ctx.view() {
            NetworkView::Directed => {
                let per = self.ctx.n() as u64 - 1;
                let (p, k) = ((t / per) as usize, (t % per) as usize);
                let i = self.srcs[p] as usize;
                (i, if k >= i { k + 1 } else { k })
            }
            NetworkView::Mutual => {
                let p = self.offsets.partition_point(|&o| o <= t) - 1;
                let k = (t - self.offsets[p]) as usize;
                // The k-th vertex not in srcs[..=p]; srcs[m] - m is non-decreasing.
                let excluded = &self.srcs[..=p];
                let (mut lo, mut hi) = (0usize, excluded.len());
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if excluded[mid] as usize - mid <= k {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                (self.srcs[p] as usize, k + lo)
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = DyadRow> + '_ {
        let perm = match self.order {
            DyadOrder::Deterministic => None,
            DyadOrder::Shuffled(seed) => Some(Permutation::new(self.len, seed)),
        };
        (0..self.len).map(move |t| {
            let t = perm.as_ref().map_or(t, |p| p.apply(t));
            let (i, j) = self.locate(t);
            self.ctx.build_dyad_row(i, j).expect("stream dyads are valid")
        })
    }
}

impl RowSource for DyadStream<'_> {
    fn len(&self) -> u64 {
        self.len
    }

    fn width(&self) -> usize {
        self.ctx.width()
    }

    fn names(&self) -> Vec<String> {
        self.ctx.layout.names()
    }

    fn d_width(&self) -> usize {
        self.ctx.layout.d_width
    }

    #[inline]
    fn row_at(&self, t: u64, buf: &mut [f64]) -> f64 {
        let (i, j) = self.locate(t);
        self.ctx.fill_row(i, j, buf);
        self.ctx.outcome(i, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::plain_vertex;
    use crate::graph::{CategoryLevels, Vertex};
    use proptest::prelude::*;

    struct Fixture {
        levels: CategoryLevels,
        vertices: Vec<Vertex>,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                levels: CategoryLevels::default(),
                vertices: Vec::new(),
            }
        }

        fn add(&mut self, country: &str, city: &str, lat: f64, lon: f64, age: f64) -> &mut Vertex {
            let id = self.vertices.len() as i64;
            let mut v = plain_vertex(id);
            v.country = self.levels.country.intern(country);
            v.region = self.levels.region.intern(&format!("{country}-{city}"));
            v.city = self.levels.city.intern(city);
            v.platform = self.levels.platform.intern("ios");
            v.language = self.levels.language.intern(country);
            v.ethnicity = self.levels.ethnicity.intern("x");
            v.lat = lat;
            v.lon = lon;
            v.age = age;
            v.activity[0] = id as f64;
            self.vertices.push(v);
            self.vertices.last_mut().unwrap()
        }

        fn table(&self) -> Arc<VertexTable> {
            let mut t = VertexTable::new(self.levels.clone());
            for v in &self.vertices {
                t.push(v.clone()).unwrap();
            }
            Arc::new(t)
        }

        fn ctx(&self, edges: &[(usize, usize)], spec: FeatureSpec) -> FeatureContext {
            let g = DirectedGraph::from_index_edges(self.table(), edges.iter().copied()).unwrap();
            FeatureContext::new(&g, spec).unwrap()
        }
    }

    fn value(ctx: &FeatureContext, row: &DyadRow, name: &str) -> f64 {
        row.values()[ctx.layout().index_of(name).unwrap()]
    }

    #[test]
    fn colocated_pair_has_all_geo_homophily_and_reference_bin() {
        let mut f = Fixture::new();
        f.add("TH", "BKK", 13.75, 100.50, 30.0);
        f.add("TH", "BKK", 13.76, 100.51, 35.0);
        let ctx = f.ctx(&[(0, 1)], FeatureSpec::default());
        let row = ctx.build_dyad_row(0, 1).unwrap();
        assert!(ctx.distance_km(0, 1) < 5.0);
        assert!(row.d()[..7].iter().all(|&x| x == 0.0));
        for name in ["same_continent", "same_country", "same_region", "same_city"] {
            assert_eq!(value(&ctx, &row, name), 1.0, "{name}");
        }
        assert_eq!(row.w, 1.0);
        assert_eq!(value(&ctx, &row, "intercept"), 1.0);
    }

    #[test]
    fn age_threshold_is_closed() {
        let mut f = Fixture::new();
        f.add("TH", "A", 0.0, 0.0, 30.0);
        f.add("TH", "A", 0.0, 0.0, 35.0);
        f.add("TH", "A", 0.0, 0.0, 36.0);
        let ctx = f.ctx(&[], FeatureSpec::default());
        let near = ctx.build_dyad_row(0, 1).unwrap();
        let far = ctx.build_dyad_row(0, 2).unwrap();
        assert_eq!(value(&ctx, &near, "age_within_5y"), 1.0);
        assert_eq!(value(&ctx, &far, "age_within_5y"), 0.0);
    }

    #[test]
    fn unknown_ethnicity_never_matches() {
        let mut f = Fixture::new();
        f.add("TH", "A", 0.0, 0.0, 30.0).ethnicity = Categorical::UNKNOWN;
        f.add("TH", "A", 0.0, 0.0, 30.0).ethnicity = Categorical::UNKNOWN;
        let ctx = f.ctx(&[], FeatureSpec::default());
        let row = ctx.build_dyad_row(0, 1).unwrap();
        assert_eq!(value(&ctx, &row, "same_ethnicity"), 0.0);
    }

    #[test]
    fn self_pair_is_domain_error() {
        let mut f = Fixture::new();
        f.add("TH", "A", 0.0, 0.0, 30.0);
        f.add("TH", "A", 0.0, 0.0, 30.0);
        let ctx = f.ctx(&[], FeatureSpec::default());
        assert!(matches!(ctx.build_dyad_row(1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn mutual_view_outcome() {
        let mut f = Fixture::new();
        for _ in 0..3 {
            f.add("TH", "A", 0.0, 0.0, 30.0);
        }
        let spec = FeatureSpec {
            view: NetworkView::Mutual,
            ..FeatureSpec::default()
        };
        let ctx = f.ctx(&[(0, 1), (1, 0), (0, 2)], spec);
        assert_eq!(ctx.build_dyad_row(0, 1).unwrap().w, 1.0);
        assert_eq!(ctx.build_dyad_row(0, 2).unwrap().w, 0.0);
    }

    fn four_vertex_ctx(view: NetworkView) -> FeatureContext {
        let mut f = Fixture::new();
        f.add("A", "x", 0.0, 0.0, 20.0);
        f.add("B", "y", 10.0, 10.0, 30.0);
        f.add("A", "x", 0.1, 0.0, 40.0);
        f.add("B", "y", 10.0, 10.1, 50.0);
        f.ctx(
            &[(0, 1), (2, 3)],
            FeatureSpec {
                view,
                ..FeatureSpec::default()
            },
        )
    }

    #[test]
    fn stream_counts() {
        let ctx = four_vertex_ctx(NetworkView::Directed);
        assert_eq!(DyadStream::new(&ctx, None, DyadOrder::Deterministic).iter().count(), 12);
        let a = DyadStream::for_country(&ctx, "A", DyadOrder::Deterministic).unwrap();
        let rows: Vec<_> = a.iter().collect();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.src == 0 || r.src == 2));
        assert!(DyadStream::for_country(&ctx, "ZZ", DyadOrder::Deterministic).is_err());
    }

    #[test]
    fn mutual_stream_counts_unordered_pairs_once() {
        let ctx = four_vertex_ctx(NetworkView::Mutual);
        let all: Vec<_> = DyadStream::new(&ctx, None, DyadOrder::Deterministic)
            .iter()
            .map(|r| (r.src, r.dst))
            .collect();
        assert_eq!(all, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let a: Vec<_> = DyadStream::for_country(&ctx, "A", DyadOrder::Deterministic)
            .unwrap()
            .iter()
            .map(|r| (r.src, r.dst))
            .collect();
        assert_eq!(a, vec![(0, 1), (0, 2), (0, 3), (2, 1), (2, 3)]);
    }

    #[test]
    fn full_scale_dyad_count() {
        let n = 11_992u64;
        let dyads = n * (n - 1);
        assert_eq!(dyads, 143_796_072);
        assert!(dyads > 143_000_000);
    }

    #[test]
    fn standardize_examples() {
        let mut f = Fixture::new();
        for _ in 0..3 {
            f.add("A", "x", 0.0, 0.0, 20.0);
        }
        let stats = standardize_stats(&f.table());
        // activity[0] holds the id: 0, 1, 2
        assert_eq!((stats[0].mean, stats[0].sd, stats[0].excluded), (1.0, 1.0, false));
        assert!(stats[1].excluded);
        assert_eq!(mean_sd(&[1.0, 2.0, 3.0]), (2.0, 1.0));
    }

    #[test]
    fn layout_puts_d_block_first() {
        let ctx = four_vertex_ctx(NetworkView::Directed);
        let layout = ctx.layout();
        assert_eq!(layout.d_width, 11);
        assert_eq!(layout.features[0].name, "dist_5_10km");
        assert_eq!(layout.features.last().unwrap().name, "intercept");
        // Only activity[0] varies in the fixture.
        assert!(layout.index_of("src_app_usage_days").is_some());
        assert!(layout.index_of("src_app_version").is_none());
        let mut buf = Vec::new();
        layout.write_manifest(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("feature,column,kind,block\ndist_5_10km,0,distance_bin,D\n"));
    }

    #[test]
    fn unknown_activity_column_is_config_error() {
        let mut f = Fixture::new();
        f.add("A", "x", 0.0, 0.0, 20.0);
        f.add("A", "x", 0.0, 0.0, 20.0);
        let g = DirectedGraph::from_index_edges(f.table(), []).unwrap();
        let spec = FeatureSpec {
            activity: vec!["bogus".into()],
            ..FeatureSpec::default()
        };
        assert!(matches!(FeatureContext::new(&g, spec), Err(Error::Config(_))));
    }

    fn random_ctx(seed: u64, n: usize) -> FeatureContext {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = Fixture::new();
        for _ in 0..n {
            let country = ["A", "B", "C"][rng.random_range(0..3)];
            let v = f.add(
                country,
                ["x", "y"][rng.random_range(0..2)],
                rng.random_range(-60.0..60.0),
                rng.random_range(-170.0..170.0),
                rng.random_range(18.0..60.0),
            );
            v.height_cm = rng.random_range(150.0..200.0);
            v.weight_kg = rng.random_range(50.0..100.0);
            v.activity[3] = rng.random_range(0.0..100.0);
        }
        let edges: Vec<_> = (0..n * 2)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        f.ctx(&edges, FeatureSpec::default())
    }

    proptest! {
        #[test]
        fn symmetric_features_agree_under_swap(seed in any::<u64>()) {
            let ctx = random_ctx(seed, 8);
            let directional = ["src_older", "dst_taller", "dst_popularity", "dst_popular_country"];
            for i in 0..8 {
                for j in 0..8 {
                    if i == j { continue; }
                    let a = ctx.build_dyad_row(i, j).unwrap();
                    let b = ctx.build_dyad_row(j, i).unwrap();
                    for (c, f) in ctx.layout().features.iter().enumerate() {
                        if directional.contains(&f.name.as_str()) || f.name.starts_with("src_") || f.name.starts_with("dst_") {
                            continue;
                        }
                        prop_assert_eq!(a.values()[c], b.values()[c], "{}", f.name);
                    }
                }
            }
        }

        #[test]
        fn indicators_are_binary(seed in any::<u64>()) {
            let ctx = random_ctx(seed, 6);
            for row in DyadStream::new(&ctx, None, DyadOrder::Deterministic).iter() {
                for (c, f) in ctx.layout().features.iter().enumerate() {
                    let v = row.values()[c];
                    match f.kind {
                        FeatureKind::Indicator | FeatureKind::DistanceBin => prop_assert!(v == 0.0 || v == 1.0),
                        FeatureKind::Intercept => prop_assert_eq!(v, 1.0),
                        FeatureKind::Continuous => prop_assert!(v.is_finite()),
                    }
                }
                let bins: f64 = row.d()[..7].iter().sum();
                prop_assert!(bins == 0.0 || bins == 1.0);
            }
        }

        #[test]
        fn shuffled_stream_is_a_permutation(seed in any::<u64>()) {
            let ctx = random_ctx(seed, 7);
            let key = |r: &DyadRow| (r.src, r.dst, r.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            let mut a: Vec<_> = DyadStream::new(&ctx, None, DyadOrder::Deterministic).iter().map(|r| key(&r)).collect();
            let mut b: Vec<_> = DyadStream::new(&ctx, None, DyadOrder::Shuffled(seed)).iter().map(|r| key(&r)).collect();
            prop_assert_eq!(a.len(), 42);
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn standardized_activity_has_unit_moments() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut f = Fixture::new();
        for _ in 0..500 {
            let v = f.add("A", "x", 0.0, 0.0, 30.0);
            // Table-1 scale counters: up to ~2e5.
            v.activity[10] = rng.random_range(0.0..205_533.0f64).floor();
            v.activity[16] = rng.random_range(0.0..175_948.0f64).floor();
        }
        let spec = FeatureSpec {
            activity: vec![ACTIVITY_COLUMNS[10].into(), ACTIVITY_COLUMNS[16].into()],
            ..FeatureSpec::default()
        };
        let g = DirectedGraph::from_index_edges(f.table(), []).unwrap();
        let ctx = FeatureContext::new(&g, spec).unwrap();
        for name in ["src_feed_liked_commented_v5", "src_chat_messages_v5"] {
            let c = ctx.layout().index_of(name).unwrap();
            let col: Vec<f64> = (0..500)
                .map(|i| ctx.build_dyad_row(i, (i + 1) % 500).unwrap().values()[c])
                .collect();
            let (m, s) = mean_sd(&col);
            assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12, "{name}: {m} {s}");
        }
    }
}

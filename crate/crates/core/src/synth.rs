//! Synthetic follow graphs drawn from the dyadic logit with known coefficients.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Zeta, Zipf};
use serde::{Deserialize, Serialize};

use crate::design::mix64;
use crate::error::{Error, Result};
use crate::estimator::{dot, sigmoid, Pool};
use crate::features::{DesignLayout, FeatureContext, FeatureKind, FeatureSpec, PopularityEncoding};
use crate::geo::EARTH_RADIUS_KM;
use crate::graph::{CategoryLevels, DirectedGraph, NetworkView, Vertex, VertexTable, ACTIVITY_COLUMNS, ACTIVITY_COUNT};
use crate::tetrad::FixedEffects;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountrySpec {
    /// ISO 3166 alpha-2 code, so that continents resolve.
    pub name: String,
    pub share: f64,
    pub lat: f64,
    pub lon: f64,
    /// Spread of city centres around the centroid.
    pub dispersion_km: f64,
    #[serde(default = "default_cities")]
    pub cities: usize,
    /// Spread of users around their city centre.
    #[serde(default = "default_local_km")]
    pub local_dispersion_km: f64,
    /// First language of most users; defaults to the country code.
    #[serde(default)]
    pub language: Option<String>,
}

fn default_cities() -> usize {
    6
}

fn default_local_km() -> f64 {
    25.0
}

impl CountrySpec {
    pub fn new(name: &str, share: f64, lat: f64, lon: f64, dispersion_km: f64) -> Self {
        CountrySpec {
            name: name.into(),
            share,
            lat,
            lon,
            dispersion_km,
            cities: default_cities(),
            local_dispersion_km: default_local_km(),
            language: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSpec {
    #[default]
    None,
    Gaussian {
        sd_out: f64,
        sd_in: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub countries: Vec<CountrySpec>,
    /// Design the coefficients refer to. Popularity terms depend on the
    /// realised graph and cannot be planted.
    pub features: FeatureSpec,
    /// Coefficients by feature name; unnamed features get 0.
    pub beta: BTreeMap<String, f64>,
    pub alpha: AlphaSpec,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub workers: usize,
}

/// Logit of the observed link share, `ln(0.0059 / 0.9941)`.
pub const SPARSE_INTERCEPT: f64 = -5.127;

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 1000,
            countries: vec![
                CountrySpec::new("TR", 0.30, 39.0, 35.0, 300.0),
                CountrySpec::new("TH", 0.25, 15.0, 101.0, 300.0),
                CountrySpec::new("ID", 0.15, -2.5, 118.0, 600.0),
                CountrySpec::new("TW", 0.10, 23.7, 121.0, 100.0),
                CountrySpec::new("BR", 0.12, -10.0, -52.0, 600.0),
                CountrySpec::new("US", 0.08, 38.0, -97.0, 800.0),
            ],
            features: FeatureSpec::dyadic_only(),
            beta: BTreeMap::from([("intercept".to_string(), SPARSE_INTERCEPT)]),
            alpha: AlphaSpec::None,
            seed: 0,
            workers: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.countries.is_empty() {
            return bad("at least one country is required".into());
        }
        let total: f64 = self.countries.iter().map(|c| c.share).sum();
        if self.countries.iter().any(|c| !(c.share >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return bad(format!("country shares must be non-negative and sum to 1, got {total}"));
        }
        for c in &self.countries {
            if !(c.dispersion_km > 0.0) || !(c.local_dispersion_km > 0.0) {
                return bad(format!("{}: dispersions must be positive", c.name));
            }
            if c.cities == 0 {
                return bad(format!("{}: at least one city is required", c.name));
            }
            if !(-90.0..=90.0).contains(&c.lat) || !(-180.0..=180.0).contains(&c.lon) {
                return bad(format!("{}: centroid out of range", c.name));
            }
        }
        if self.features.popularity != PopularityEncoding::None {
            return bad("popularity features cannot be planted; set features.popularity = \"none\"".into());
        }
        if let AlphaSpec::Gaussian { sd_out, sd_in } = self.alpha {
            if !(sd_out >= 0.0 && sd_in >= 0.0) {
                return bad("fixed-effect standard deviations must be non-negative".into());
            }
        }
        if self.beta.values().any(|b| !b.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        Ok(())
    }
}

/// Draws that produced a synthetic graph, for recovery checks.
#[derive(Clone, Debug)]
pub struct SynthTruth {
    pub graph: DirectedGraph,
    pub layout: DesignLayout,
    /// Planted coefficients aligned with `layout`.
    pub beta: Vec<f64>,
    pub alpha: FixedEffects,
    pub config: SynthConfig,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    n: usize,
    edges: usize,
    view: NetworkView,
    features: Vec<&'a str>,
    kinds: Vec<FeatureKind>,
    beta: &'a [f64],
    alpha_out: &'a [f64],
    alpha_in: &'a [f64],
    config: &'a SynthConfig,
}

impl SynthTruth {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.layout.index_of(name).map(|c| self.beta[c])
    }

    pub fn manifest_json(&self) -> String {
        let m = Manifest {
            seed: self.config.seed,
            n: self.graph.n(),
            edges: self.graph.edge_count(),
            view: self.config.features.view,
            features: self.layout.features.iter().map(|f| f.name.as_str()).collect(),
            kinds: self.layout.features.iter().map(|f| f.kind).collect(),
            beta: &self.beta,
            alpha_out: &self.alpha.alpha_out,
            alpha_in: &self.alpha.alpha_in,
            config: &self.config,
        };
        serde_json::to_string_pretty(&m).expect("manifest serialises")
    }

    /// Writes `vertices.csv`, `edges.csv` and `truth.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            fs::File::create(&p)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        self.graph.vertices().write_csv(create("vertices.csv")?, b',')?;
        self.graph.write_edges_csv(create("edges.csv")?, b',')?;
        let p = dir.join("truth.json");
        fs::write(&p, self.manifest_json() + "\n").map_err(|e| Error::io(p, e))
    }
}

const KM_PER_DEGREE: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// Moves `(lat, lon)` by `(east, north)` kilometres on a local tangent plane.
fn offset(lat: f64, lon: f64, east: f64, north: f64) -> (f64, f64) {
    let lat2 = (lat + north / KM_PER_DEGREE).clamp(-89.9, 89.9);
    let mut lon2 = lon + east / (KM_PER_DEGREE * lat.to_radians().cos().max(0.01));
    lon2 = (lon2 + 180.0).rem_euclid(360.0) - 180.0;
    (lat2, lon2)
}

fn truncated(rng: &mut ChaCha8Rng, d: &Normal<f64>, lo: f64, hi: f64) -> f64 {
    for _ in 0..1000 {
        let x = d.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    d.mean().clamp(lo, hi)
}

/// Activity counter draw matched to a mean, sd and range.
#[derive(Clone, Copy)]
enum Counter {
    Bernoulli(f64),
    Normal(f64, f64, f64, f64),
    LogNormal(f64, f64, f64),
}

/// Column order follows `ACTIVITY_COLUMNS`.
const ACTIVITY_DRAWS: [Counter; ACTIVITY_COUNT] = [
    Counter::Normal(662.70, 285.99, 4.0, 910.0),
    Counter::Normal(4.72, 0.87, 3.0, 7.0),
    Counter::Bernoulli(0.82),
    Counter::Bernoulli(0.97),
    Counter::Bernoulli(0.70),
    Counter::LogNormal(6.00, 26.47, 1477.0),
    Counter::LogNormal(0.63, 53.77, 5872.0),
    Counter::LogNormal(7.55, 49.70, 1996.0),
    Counter::LogNormal(14.11, 70.64, 2744.0),
    Counter::LogNormal(44.94, 1101.46, 84481.0),
    Counter::LogNormal(789.14, 4130.66, 116539.0),
    Counter::LogNormal(1079.40, 4214.73, 205533.0),
    Counter::LogNormal(0.05, 0.83, 56.0),
    Counter::LogNormal(47.40, 228.67, 10625.0),
    Counter::LogNormal(64.41, 240.61, 14292.0),
    Counter::LogNormal(365.88, 2498.43, 87302.0),
    Counter::LogNormal(5047.41, 11383.11, 175948.0),
    Counter::LogNormal(6181.82, 8414.75, 116155.0),
    Counter::LogNormal(50.51, 525.83, 22546.0),
    Counter::LogNormal(842.16, 3080.15, 167086.0),
    Counter::LogNormal(1166.10, 1656.27, 49161.0),
    Counter::LogNormal(70.21, 97.15, 1618.0),
    Counter::LogNormal(70.21, 115.53, 4243.0),
];

impl Counter {
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Counter::Bernoulli(p) => rng.random_bool(p) as u8 as f64,
            Counter::Normal(m, s, lo, hi) => truncated(rng, &Normal::new(m, s).expect("valid sd"), lo, hi).round(),
            Counter::LogNormal(m, s, hi) => {
                let sigma2 = (1.0 + (s / m).powi(2)).ln();
                let d = LogNormal::new(m.ln() - sigma2 / 2.0, sigma2.sqrt()).expect("valid sd");
                d.sample(rng).floor().min(hi)
            }
        }
    }
}

const ETHNICITIES: [(&str, f64); 4] = [
    ("Asian", 0.4786),
    ("White", 0.2440),
    ("Mixed", 0.0747),
    ("Other", 0.2027),
];

fn generate_vertices(cfg: &SynthConfig) -> Result<VertexTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut levels = CategoryLevels::default();
    let country_codes: Vec<_> = cfg.countries.iter().map(|c| levels.country.intern(&c.name)).collect();
    let languages: Vec<_> = cfg
        .countries
        .iter()
        .map(|c| levels.language.intern(c.language.as_deref().unwrap_or(&c.name)))
        .collect();
    let ios = levels.platform.intern("ios");
    let android = levels.platform.intern("android");
    let ethnicity: Vec<_> = ETHNICITIES.iter().map(|(e, _)| levels.ethnicity.intern(e)).collect();
    let eth_pick = WeightedIndex::new(ETHNICITIES.iter().map(|e| e.1)).expect("positive weights");

    // City centres per country, then region/city labels.
    let mut centres = Vec::new();
    let mut city_codes = Vec::new();
    let mut region_codes = Vec::new();
    for c in &cfg.countries {
        let spread = Normal::new(0.0, c.dispersion_km).expect("validated");
        let mut cc = Vec::new();
        let mut cities = Vec::new();
        let mut regions = Vec::new();
        for k in 0..c.cities {
            cc.push(offset(c.lat, c.lon, spread.sample(&mut rng), spread.sample(&mut rng)));
            cities.push(levels.city.intern(&format!("{}-C{k}", c.name)));
            regions.push(levels.region.intern(&format!("{}-R{}", c.name, k / 2)));
        }
        centres.push(cc);
        city_codes.push(cities);
        region_codes.push(regions);
    }

    let pick = WeightedIndex::new(cfg.countries.iter().map(|c| c.share))
        .map_err(|e| Error::Config(format!("country shares: {e}")))?;
    let age = Normal::new(30.0, 10.0).expect("constant");
    let height = Normal::new(175.0, 10.0).expect("constant");
    let weight = Normal::new(70.79, 14.23).expect("constant");
    let mut table = VertexTable::new(levels);
    for id in 0..cfg.n {
        let ci = pick.sample(&mut rng);
        let spec = &cfg.countries[ci];
        let city = rng.random_range(0..spec.cities);
        let local = Normal::new(0.0, spec.local_dispersion_km).expect("validated");
        let (clat, clon) = centres[ci][city];
        let (lat, lon) = offset(clat, clon, local.sample(&mut rng), local.sample(&mut rng));
        let language = if cfg.countries.len() > 1 && rng.random_bool(0.1) {
            languages[rng.random_range(0..languages.len())]
        } else {
            languages[ci]
        };
        let mut activity = [0.0; ACTIVITY_COUNT];
        for (a, d) in activity.iter_mut().zip(ACTIVITY_DRAWS) {
            *a = d.draw(&mut rng);
        }
        table.push(Vertex {
            id: id as i64 + 1,
            lat,
            lon,
            country: country_codes[ci],
            region: region_codes[ci][city],
            city: city_codes[ci][city],
            platform: if rng.random_bool(0.25) { ios } else { android },
            age: truncated(&mut rng, &age, 18.0, 99.0).round(),
            height_cm: truncated(&mut rng, &height, 91.0, 200.0).round(),
            weight_kg: truncated(&mut rng, &weight, 27.0, 293.0).round(),
            ethnicity: if rng.random_bool(0.2) {
                crate::graph::Categorical::UNKNOWN
            } else {
                ethnicity[eth_pick.sample(&mut rng)]
            },
            language,
            activity,
        })?;
    }
    debug_assert_eq!(ACTIVITY_COLUMNS.len(), ACTIVITY_DRAWS.len());
    Ok(table)
}

fn draw_alpha(cfg: &SynthConfig, n: usize) -> FixedEffects {
    match cfg.alpha {
        AlphaSpec::None => FixedEffects::zeros(n),
        AlphaSpec::Gaussian { sd_out, sd_in } => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed ^ 0xA1FA));
            let std = Normal::new(0.0, 1.0).expect("constant");
            let alpha_out: Vec<f64> = (0..n).map(|_| sd_out * std.sample(&mut rng)).collect();
            let alpha_in = if cfg.features.view == NetworkView::Mutual {
                // one effect per vertex in the undirected model
                alpha_out.clone()
            } else {
                (0..n).map(|_| sd_in * std.sample(&mut rng)).collect()
            };
            FixedEffects { alpha_out, alpha_in }
        }
    }
}

/// Aligns named coefficients with the design layout.
pub fn beta_vector(layout: &DesignLayout, named: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let mut beta = vec![0.0; layout.width()];
    for (name, &b) in named {
        let c = layout
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("coefficient {name:?} is not a feature of the planted design")))?;
        beta[c] = b;
    }
    Ok(beta)
}

/// Draws a graph: every ordered pair links independently with probability
/// `L(r_ij'beta + alpha_out_i + alpha_in_j)`. In the mutual view each
/// unordered pair `i < j` is drawn once and, if linked, linked both ways.
///
/// Each sender owns an RNG stream keyed on `(seed, sender)`, so the result
/// does not depend on the worker count.
pub fn generate(cfg: &SynthConfig) -> Result<SynthTruth> {
    cfg.validate()?;
    let vertices = Arc::new(generate_vertices(cfg)?);
    let ctx = FeatureContext::for_vertices(Arc::clone(&vertices), cfg.features.clone())?;
    let layout = ctx.layout().clone();
    let beta = beta_vector(&layout, &cfg.beta)?;
    let n = cfg.n;
    let alpha = draw_alpha(cfg, n);
    let mutual = cfg.features.view == NetworkView::Mutual;
    let edge_seed = mix64(cfg.seed ^ 0xED6E);

    // intercept-only designs need no feature rows
    let constant = (0..beta.len())
        .all(|c| beta[c] == 0.0 || layout.kind(c) == FeatureKind::Intercept)
        .then(|| beta.iter().sum::<f64>());

    let parts = 64.min(n);
    let pool = Pool::new(cfg.workers);
    let chunks = pool.map(parts, |p| {
        let mut row = vec![0.0; layout.width()];
        let mut out = Vec::new();
        for i in n * p / parts..n * (p + 1) / parts {
            let mut rng = ChaCha8Rng::seed_from_u64(edge_seed);
            rng.set_stream(i as u64);
            let start = if mutual { i + 1 } else { 0 };
            for j in start..n {
                if j == i {
                    continue;
                }
                let eta = match constant {
                    Some(c) => c,
                    None => {
                        ctx.fill_row(i, j, &mut row);
                        dot(&row, &beta)
                    }
                };
                let p = sigmoid(eta + alpha.alpha_out[i] + alpha.alpha_in[j]);
                if rng.random::<f64>() < p {
                    out.push((i, j));
                    if mutual {
                        out.push((j, i));
                    }
                }
            }
        }
        out
    });
    let graph = DirectedGraph::from_index_edges(vertices, chunks.into_iter().flatten())?;
    Ok(SynthTruth {
        graph,
        layout,
        beta,
        alpha,
        config: cfg.clone(),
    })
}

/// Plants per-bin distance coefficients (every non-reference bin, nearest first).
pub fn plant_distance_decay(cfg: &SynthConfig, bin_betas: &[f64]) -> Result<SynthConfig> {
    if !cfg.features.distance_bins {
        return Err(Error::Config("distance bins are disabled in the planted design".into()));
    }
    let scheme = &cfg.features.distance_bins_km;
    if bin_betas.len() != scheme.bin_count() - 1 {
        return Err(Error::Config(format!(
            "{} bin coefficients given, the scheme has {} non-reference bins",
            bin_betas.len(),
            scheme.bin_count() - 1
        )));
    }
    let mut out = cfg.clone();
    for (b, &v) in bin_betas.iter().enumerate() {
        out.beta.insert(scheme.label(b + 1), v);
    }
    Ok(out)
}

/// I.i.d. draws from `P(d) ~ d^-lambda` on `1..=d_max` (unbounded when `None`).
pub fn zipf_degrees(n: usize, lambda: f64, d_max: Option<u64>, seed: u64) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::Config("at least one draw is required".into()));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Config(format!("exponent must be positive, got {lambda}")));
    }
    if lambda == f64::INFINITY {
        return Ok(vec![1; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match d_max {
        Some(m) if m >= 1 => {
            let z = Zipf::new(m as f64, lambda).map_err(|e| Error::Config(format!("zipf: {e}")))?;
            Ok((0..n).map(|_| z.sample(&mut rng) as u64).collect())
        }
        Some(_) => Err(Error::Config("d_max must be at least 1".into())),
        None => {
            if lambda <= 1.0 {
                return Err(Error::Config(format!(
                    "an unbounded power law needs an exponent above 1, got {lambda}"
                )));
            }
            let z = Zeta::new(lambda).map_err(|e| Error::Config(format!("zeta: {e}")))?;
            Ok((0..n)
                .map(|_| {
                    let d = z.sample(&mut rng);
                    if d >= u64::MAX as f64 {
                        u64::MAX
                    } else {
                        d as u64
                    }
                })
                .collect())
        }
    }
}

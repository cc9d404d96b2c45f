//! Vertex attribute table and the sparse directed follow graph.
//!
//! External ids are remapped to a dense `0..n` index on load. Adjacency is
//! held twice: sorted successor lists for traversal and an `n x n` bit matrix
//! for O(1) membership probes during dyad enumeration.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interned code of a categorical attribute. `UNKNOWN` marks missing data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Categorical(u32);

impl Categorical {
    pub const UNKNOWN: Categorical = Categorical(u32::MAX);

    pub fn from_code(code: u32) -> Self {
        assert!(code != u32::MAX, "reserved categorical code");
        Categorical(code)
    }

    pub fn is_unknown(self) -> bool {
        self == Self::UNKNOWN
    }

    pub fn code(self) -> Option<u32> {
        (!self.is_unknown()).then_some(self.0)
    }

    /// Equality that treats UNKNOWN as never matching anything.
    pub fn same_known(self, other: Categorical) -> bool {
        !self.is_unknown() && self == other
    }
}

pub const UNKNOWN_LABEL: &str = "UNKNOWN";

/// Level names of one categorical column.
#[derive(Clone, Debug, Default)]
pub struct Levels {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Levels {
    pub fn intern(&mut self, raw: &str) -> Categorical {
        let raw = raw.trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case(UNKNOWN_LABEL) || raw.eq_ignore_ascii_case("NA") {
            return Categorical::UNKNOWN;
        }
        if let Some(&code) = self.index.get(raw) {
            return Categorical(code);
        }
        let code = self.names.len() as u32;
        self.names.push(raw.to_string());
        self.index.insert(raw.to_string(), code);
        Categorical(code)
    }

    pub fn lookup(&self, raw: &str) -> Option<Categorical> {
        self.index.get(raw.trim()).map(|&c| Categorical(c))
    }

    pub fn name(&self, c: Categorical) -> &str {
        match c.code() {
            Some(code) => &self.names[code as usize],
            None => UNKNOWN_LABEL,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Categorical, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, s)| (Categorical(i as u32), s.as_str()))
    }
}

/// Per-user behavioural counters, in file column order.
pub const ACTIVITY_COLUMNS: [&str; 23] = [
    "app_usage_days",
    "app_version",
    "uploaded_photo",
    "account_visible",
    "has_email",
    "photos_rejected",
    "feed_posts_v4",
    "feed_posts_v5",
    "feed_posts_v6",
    "feed_liked_commented_v4",
    "feed_liked_commented_v5",
    "feed_liked_commented_v6",
    "stories_read_v4",
    "stories_read_v5",
    "stories_read_v6",
    "chat_messages_v4",
    "chat_messages_v5",
    "chat_messages_v6",
    "followees_v4",
    "followees_v5",
    "followees_v6",
    "total_followers",
    "total_followees",
];

pub const ACTIVITY_COUNT: usize = ACTIVITY_COLUMNS.len();

/// Leading vertex-file columns, before the activity block.
pub const BASE_COLUMNS: [&str; 12] = [
    "id",
    "lat",
    "lon",
    "country",
    "region",
    "city",
    "platform",
    "age",
    "height_cm",
    "weight_kg",
    "ethnicity",
    "language",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
    pub country: Categorical,
    pub region: Categorical,
    pub city: Categorical,
    pub platform: Categorical,
    pub age: f64,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub ethnicity: Categorical,
    pub language: Categorical,
    pub activity: [f64; ACTIVITY_COUNT],
}

/// Level tables for every categorical column of the vertex file.
#[derive(Clone, Debug, Default)]
pub struct CategoryLevels {
    pub country: Levels,
    pub region: Levels,
    pub city: Levels,
    pub platform: Levels,
    pub ethnicity: Levels,
    pub language: Levels,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingNumeric {
    #[default]
    Reject,
    ImputeMean,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    pub delimiter: char,
    pub missing_numeric: MissingNumeric,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: ',',
            missing_numeric: MissingNumeric::Reject,
        }
    }
}

impl LoadOptions {
    fn delimiter_byte(&self) -> Result<u8> {
        if self.delimiter.is_ascii() {
            Ok(self.delimiter as u8)
        } else {
            Err(Error::Config(format!(
                "delimiter {:?} is not a single ASCII character",
                self.delimiter
            )))
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VertexTable {
    vertices: Vec<Vertex>,
    index: HashMap<i64, usize>,
    pub levels: CategoryLevels,
}

impl VertexTable {
    pub fn new(levels: CategoryLevels) -> Self {
        VertexTable {
            vertices: Vec::new(),
            index: HashMap::new(),
            levels,
        }
    }

    /// Appends a vertex, enforcing id uniqueness and the coordinate and counter ranges.
    pub fn push(&mut self, v: Vertex) -> Result<usize> {
        validate_vertex(&v).map_err(|message| Error::Integrity {
            line: None,
            message: format!("vertex {}: {message}", v.id),
        })?;
        if self.index.contains_key(&v.id) {
            return Err(Error::Integrity {
                line: None,
                message: format!("duplicate vertex id {}", v.id),
            });
        }
        let idx = self.vertices.len();
        self.index.insert(v.id, idx);
        self.vertices.push(v);
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Vertex {
        &self.vertices[idx]
    }

    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vertex> {
        self.vertices.iter()
    }

    pub fn as_slice(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Writes the table in the vertex-file format accepted by [`load_vertices`].
    pub fn write_csv<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        let header: Vec<&str> = BASE_COLUMNS.iter().chain(ACTIVITY_COLUMNS.iter()).copied().collect();
        w.write_record(&header).map_err(csv_write_err)?;
        let lv = &self.levels;
        for v in &self.vertices {
            let mut rec: Vec<String> = vec![
                v.id.to_string(),
                v.lat.to_string(),
                v.lon.to_string(),
                cat_field(&lv.country, v.country),
                cat_field(&lv.region, v.region),
                cat_field(&lv.city, v.city),
                cat_field(&lv.platform, v.platform),
                v.age.to_string(),
                v.height_cm.to_string(),
                v.weight_kg.to_string(),
                cat_field(&lv.ethnicity, v.ethnicity),
                cat_field(&lv.language, v.language),
            ];
            rec.extend(v.activity.iter().map(|a| a.to_string()));
            w.write_record(&rec).map_err(csv_write_err)?;
        }
        w.flush().map_err(|e| Error::io("<vertex writer>", e))?;
        Ok(())
    }
}

fn cat_field(levels: &Levels, c: Categorical) -> String {
    if c.is_unknown() {
        String::new()
    } else {
        levels.name(c).to_string()
    }
}

fn csv_write_err(e: csv::Error) -> Error {
    Error::io("<csv writer>", std::io::Error::other(e))
}

fn validate_vertex(v: &Vertex) -> std::result::Result<(), String> {
    if !(-90.0..=90.0).contains(&v.lat) {
        return Err(format!("latitude {} outside [-90, 90]", v.lat));
    }
    if !(v.lon > -180.0 && v.lon <= 180.0) {
        return Err(format!("longitude {} outside (-180, 180]", v.lon));
    }
    for (name, value) in [("age", v.age), ("height_cm", v.height_cm), ("weight_kg", v.weight_kg)] {
        if !value.is_finite() {
            return Err(format!("{name} is not finite"));
        }
    }
    for (name, &value) in ACTIVITY_COLUMNS.iter().zip(v.activity.iter()) {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(format!("activity counter {name} = {value} is negative or not finite"));
        }
    }
    Ok(())
}

pub fn load_vertices(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<VertexTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_vertices(file, opts)
}

/// Numeric columns in a parsed row, before missing-value resolution.
struct RawRow {
    line: u64,
    id: i64,
    numeric: [Option<f64>; 5 + ACTIVITY_COUNT],
    cats: [Categorical; 6],
}

const NUMERIC_BASE: [&str; 5] = ["lat", "lon", "age", "height_cm", "weight_kg"];

pub fn read_vertices<R: Read>(input: R, opts: &LoadOptions) -> Result<VertexTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter_byte()?)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();

    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let expected: Vec<&str> = BASE_COLUMNS.iter().chain(ACTIVITY_COLUMNS.iter()).copied().collect();
    let missing: Vec<&str> = expected
        .iter()
        .filter(|c| !position.contains_key(*c))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "vertex file lacks columns: {}",
            missing.join(", ")
        )));
    }
    let unexpected: Vec<&str> = headers.iter().filter(|h| !expected.contains(h)).collect();
    if !unexpected.is_empty() {
        return Err(Error::Schema(format!(
            "vertex file has unexpected columns: {}",
            unexpected.join(", ")
        )));
    }
    let col = |name: &str| position[name];
    let numeric_cols: Vec<usize> = NUMERIC_BASE
        .iter()
        .chain(ACTIVITY_COLUMNS.iter())
        .map(|c| col(c))
        .collect();
    let numeric_names: Vec<&str> = NUMERIC_BASE.iter().chain(ACTIVITY_COLUMNS.iter()).copied().collect();

    let mut levels = CategoryLevels::default();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id_raw = &record[col("id")];
        let id: i64 = id_raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid vertex id {id_raw:?}"),
        })?;
        let mut numeric = [None; 5 + ACTIVITY_COUNT];
        for (slot, (&c, name)) in numeric.iter_mut().zip(numeric_cols.iter().zip(&numeric_names)) {
            let raw = &record[c];
            if raw.is_empty() || raw.eq_ignore_ascii_case("NA") {
                continue;
            }
            let value: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {name}: invalid number {raw:?}"),
            })?;
            *slot = Some(value);
        }
        let cats = [
            levels.country.intern(&record[col("country")]),
            levels.region.intern(&record[col("region")]),
            levels.city.intern(&record[col("city")]),
            levels.platform.intern(&record[col("platform")]),
            levels.ethnicity.intern(&record[col("ethnicity")]),
            levels.language.intern(&record[col("language")]),
        ];
        rows.push(RawRow {
            line,
            id,
            numeric,
            cats,
        });
    }

    let fill: Vec<f64> = match opts.missing_numeric {
        MissingNumeric::Reject => {
            if let Some((row, k)) = rows
                .iter()
                .find_map(|r| r.numeric.iter().position(Option::is_none).map(|k| (r, k)))
            {
                return Err(Error::Parse {
                    line: row.line,
                    message: format!("missing value in numeric column {}", numeric_names[k]),
                });
            }
            vec![0.0; numeric_names.len()]
        }
        MissingNumeric::ImputeMean => (0..numeric_names.len())
            .map(|k| {
                let (sum, count) = rows
                    .iter()
                    .filter_map(|r| r.numeric[k])
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64
                }
            })
            .collect(),
    };

    let mut table = VertexTable::new(levels);
    for row in rows {
        let num = |k: usize| row.numeric[k].unwrap_or(fill[k]);
        let mut activity = [0.0; ACTIVITY_COUNT];
        for (a, slot) in activity.iter_mut().enumerate() {
            *slot = num(5 + a);
        }
        let v = Vertex {
            id: row.id,
            lat: num(0),
            lon: num(1),
            country: row.cats[0],
            region: row.cats[1],
            city: row.cats[2],
            platform: row.cats[3],
            age: num(2),
            height_cm: num(3),
            weight_kg: num(4),
            ethnicity: row.cats[4],
            language: row.cats[5],
            activity,
        };
        table.push(v).map_err(|e| match e {
            Error::Integrity { message, .. } => Error::Integrity {
                line: Some(row.line),
                message,
            },
            other => other,
        })?;
    }
    Ok(table)
}

/// Square bit matrix used as the adjacency membership probe.
#[derive(Clone, Debug)]
struct BitMatrix {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn new(n: usize) -> Self {
        let words_per_row = n.div_ceil(64);
        BitMatrix {
            n,
            words_per_row,
            bits: vec![0; words_per_row * n],
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n && j < self.n);
        let w = self.bits[i * self.words_per_row + j / 64];
        (w >> (j % 64)) & 1 == 1
    }

    /// Returns whether the bit was newly set.
    #[inline]
    fn set(&mut self, i: usize, j: usize) -> bool {
        let slot = &mut self.bits[i * self.words_per_row + j / 64];
        let mask = 1u64 << (j % 64);
        let fresh = *slot & mask == 0;
        *slot |= mask;
        fresh
    }
}

/// Which edges define the outcome of a dyad.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkView {
    /// `i -> j` iff `i` follows `j`.
    #[default]
    Directed,
    /// `i -> j` iff `i` and `j` follow each other.
    Mutual,
}

impl std::str::FromStr for NetworkView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "directed" => Ok(NetworkView::Directed),
            "mutual" => Ok(NetworkView::Mutual),
            other => Err(Error::Config(format!("unknown network view {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirectedGraph {
    vertices: Arc<VertexTable>,
    successors: Vec<Vec<u32>>,
    adjacency: BitMatrix,
    edge_count: usize,
    self_loops_dropped: usize,
}

impl DirectedGraph {
    /// Builds a graph over dense vertex indices. Duplicate edges collapse and
    /// self-loops are counted and dropped.
    pub fn from_index_edges<I>(vertices: Arc<VertexTable>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = vertices.len();
        let mut adjacency = BitMatrix::new(n);
        let mut successors = vec![Vec::new(); n];
        let mut edge_count = 0;
        let mut self_loops_dropped = 0;
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Integrity {
                    line: None,
                    message: format!("edge ({i}, {j}) references a vertex index outside 0..{n}"),
                });
            }
            if i == j {
                self_loops_dropped += 1;
                continue;
            }
            if adjacency.set(i, j) {
                successors[i].push(j as u32);
                edge_count += 1;
            }
        }
        for s in &mut successors {
            s.sort_unstable();
        }
        Ok(DirectedGraph {
            vertices,
            successors,
            adjacency,
            edge_count,
            self_loops_dropped,
        })
    }

    pub fn vertices(&self) -> &Arc<VertexTable> {
        &self.vertices
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn self_loops_dropped(&self) -> usize {
        self.self_loops_dropped
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i, j)
    }

    pub fn successors(&self, i: usize) -> &[u32] {
        &self.successors[i]
    }

    /// Edges in `(src, dst)` order, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.successors
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j as usize)))
    }

    /// Keeps `(i, j)` only when `(j, i)` is also present.
    pub fn mutual_view(&self) -> DirectedGraph {
        let edges: Vec<(usize, usize)> = self.edges().filter(|&(i, j)| self.has_edge(j, i)).collect();
        DirectedGraph::from_index_edges(Arc::clone(&self.vertices), edges).expect("indices come from a valid graph")
    }

    pub fn view(&self, view: NetworkView) -> DirectedGraph {
        match view {
            NetworkView::Directed => self.clone(),
            NetworkView::Mutual => self.mutual_view(),
        }
    }

    pub fn density(&self) -> Result<f64> {
        let n = self.n();
        if n < 2 {
            return Err(Error::Domain(format!("density needs at least 2 vertices, got {n}")));
        }
        Ok(self.edge_count as f64 / (n as f64 * (n as f64 - 1.0)))
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n()];
        for s in &self.successors {
            for &j in s {
                deg[j as usize] += 1;
            }
        }
        deg
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.successors.iter().map(Vec::len).collect()
    }

    /// Writes the edge file (`src,dst` with external ids).
    pub fn write_edges_csv<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        w.write_record(["src", "dst"]).map_err(csv_write_err)?;
        for (i, j) in self.edges() {
            let (a, b) = (self.vertices.get(i).id, self.vertices.get(j).id);
            w.write_record([a.to_string(), b.to_string()]).map_err(csv_write_err)?;
        }
        w.flush().map_err(|e| Error::io("<edge writer>", e))?;
        Ok(())
    }
}

pub fn load_edges(path: impl AsRef<Path>, vertices: Arc<VertexTable>, opts: &LoadOptions) -> Result<DirectedGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_edges(file, vertices, opts)
}

pub fn read_edges<R: Read>(input: R, vertices: Arc<VertexTable>, opts: &LoadOptions) -> Result<DirectedGraph> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter_byte()?)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(Error::Schema(format!(
            "edge file header must be `src,dst`, found {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut ends = [0usize; 2];
        for (slot, raw) in ends.iter_mut().zip(record.iter()) {
            let id: i64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid vertex id {raw:?}"),
            })?;
            *slot = vertices.index_of(id).ok_or_else(|| Error::Integrity {
                line: Some(line),
                message: format!("edge endpoint {id} is not in the vertex table"),
            })?;
        }
        edges.push((ends[0], ends[1]));
    }
    let g = DirectedGraph::from_index_edges(vertices, edges)?;
    if g.self_loops_dropped() > 0 {
        log::warn!("dropped {} self-loop(s) from edge file", g.self_loops_dropped());
    }
    Ok(g)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn plain_vertex(id: i64) -> Vertex {
        Vertex {
            id,
            lat: 0.0,
            lon: 0.0,
            country: Categorical::UNKNOWN,
            region: Categorical::UNKNOWN,
            city: Categorical::UNKNOWN,
            platform: Categorical::UNKNOWN,
            age: 30.0,
            height_cm: 170.0,
            weight_kg: 70.0,
            ethnicity: Categorical::UNKNOWN,
            language: Categorical::UNKNOWN,
            activity: [0.0; ACTIVITY_COUNT],
        }
    }

    pub fn table(n: usize) -> Arc<VertexTable> {
        let mut t = VertexTable::default();
        for id in 1..=n as i64 {
            t.push(plain_vertex(id)).unwrap();
        }
        Arc::new(t)
    }

    fn header() -> String {
        BASE_COLUMNS
            .iter()
            .chain(ACTIVITY_COLUMNS.iter())
            .copied()
            .collect::<Vec<_>>()
            .join(",")
    }

    fn row(id: &str, ethnicity: &str, age: &str) -> String {
        let mut fields = vec![
            id.to_string(),
            "52.52".into(),
            "13.40".into(),
            "DE".into(),
            "BE".into(),
            "Berlin".into(),
            "ios".into(),
            age.to_string(),
            "180".into(),
            "75".into(),
            ethnicity.to_string(),
            "de".into(),
        ];
        fields.extend(std::iter::repeat_n("3".to_string(), ACTIVITY_COUNT));
        fields.join(",")
    }

    fn csv_of(rows: &[String]) -> String {
        let mut s = header();
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    #[test]
    fn loads_three_rows() {
        let text = csv_of(&[
            row("1", "white", "30"),
            row("2", "asian", "31"),
            row("3", "mixed", "32"),
        ]);
        let t = read_vertices(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.index_of(2), Some(1));
        assert_eq!(t.levels.country.name(t.get(0).country), "DE");
    }

    #[test]
    fn empty_categorical_is_unknown() {
        let text = csv_of(&[row("1", "", "30")]);
        let t = read_vertices(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert!(t.get(0).ethnicity.is_unknown());
    }

    #[test]
    fn duplicate_id_is_integrity_error() {
        let text = csv_of(&[row("7", "a", "30"), row("7", "b", "31")]);
        let err = read_vertices(text.as_bytes(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Integrity { line: Some(3), .. }), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = csv_of(&[row("1", "a", "30"), row("2", "a", "thirty")]);
        match read_vertices(text.as_bytes(), &LoadOptions::default()).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("age"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_numeric_reject_or_impute() {
        let text = csv_of(&[row("1", "a", "30"), row("2", "a", ""), row("3", "a", "40")]);
        assert!(matches!(
            read_vertices(text.as_bytes(), &LoadOptions::default()),
            Err(Error::Parse { line: 3, .. })
        ));
        let opts = LoadOptions {
            missing_numeric: MissingNumeric::ImputeMean,
            ..LoadOptions::default()
        };
        let t = read_vertices(text.as_bytes(), &opts).unwrap();
        assert_eq!(t.get(1).age, 35.0);
    }

    #[test]
    fn header_must_match_schema() {
        let text = "id,lat,lon\n1,0,0\n";
        assert!(matches!(
            read_vertices(text.as_bytes(), &LoadOptions::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn out_of_range_latitude_rejected() {
        let text = csv_of(&[row("1", "a", "30").replacen("52.52", "95", 1)]);
        assert!(matches!(
            read_vertices(text.as_bytes(), &LoadOptions::default()),
            Err(Error::Integrity { .. })
        ));
    }

    #[test]
    fn vertex_csv_round_trip() {
        let text = csv_of(&[row("1", "", "30"), row("2", "asian", "31.5")]);
        let t = read_vertices(text.as_bytes(), &LoadOptions::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, b',').unwrap();
        let back = read_vertices(buf.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(back.as_slice(), t.as_slice());
    }

    fn edges_from(text: &str, n: usize) -> Result<DirectedGraph> {
        read_edges(text.as_bytes(), table(n), &LoadOptions::default())
    }

    #[test]
    fn edge_loading_rules() {
        assert_eq!(edges_from("src,dst\n1,2\n2,1\n", 3).unwrap().edge_count(), 2);
        assert_eq!(edges_from("src,dst\n1,2\n1,2\n", 3).unwrap().edge_count(), 1);
        let g = edges_from("src,dst\n1,1\n", 3).unwrap();
        assert_eq!((g.edge_count(), g.self_loops_dropped()), (0, 1));
        assert!(matches!(
            edges_from("src,dst\n1,9\n", 3),
            Err(Error::Integrity { line: Some(2), .. })
        ));
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> DirectedGraph {
        DirectedGraph::from_index_edges(table(n), edges.iter().copied()).unwrap()
    }

    fn complete(n: usize) -> DirectedGraph {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        graph(n, &edges)
    }

    #[test]
    fn mutual_view_examples() {
        let g = graph(3, &[(0, 1), (1, 0), (0, 2)]);
        let m = g.mutual_view();
        assert_eq!(m.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert_eq!(graph(3, &[]).mutual_view().edge_count(), 0);
        assert_eq!(complete(3).mutual_view().edge_count(), 6);
    }

    #[test]
    fn density_examples() {
        assert_eq!(complete(3).density().unwrap(), 1.0);
        assert_eq!(graph(10, &[]).density().unwrap(), 0.0);
        assert!(matches!(graph(1, &[]).density(), Err(Error::Domain(_))));
    }

    #[test]
    fn in_degree_examples() {
        let g = graph(3, &[(0, 2), (1, 2)]);
        assert_eq!(g.in_degrees(), vec![0, 0, 2]);
        assert_eq!(graph(4, &[]).in_degrees(), vec![0; 4]);
    }

    #[test]
    fn network_view_parses() {
        assert_eq!("mutual".parse::<NetworkView>().unwrap(), NetworkView::Mutual);
        assert!("both".parse::<NetworkView>().is_err());
    }
}

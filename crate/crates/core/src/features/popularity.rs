use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Categorical, DirectedGraph};

/// Eligibility rule for the popular-country flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopularityRule {
    pub top_k: usize,
    /// Countries need strictly more users than this to be flagged.
    pub min_user_base: usize,
}

impl Default for PopularityRule {
    fn default() -> Self {
        PopularityRule {
            top_k: 7,
            min_user_base: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountryPopularity {
    pub country: String,
    #[serde(skip)]
    pub code: Categorical,
    pub user_base: usize,
    pub foreign_followers: usize,
    pub score: f64,
    pub popular: bool,
}

/// Cross-country in-follows per user of the followee's country.
///
/// An edge counts as cross-country when the two country codes differ;
/// UNKNOWN is a group of its own and is never flagged. Rows come back ranked
/// by score (descending), ties broken by country name.
pub fn popularity_index(g: &DirectedGraph, rule: &PopularityRule) -> Vec<CountryPopularity> {
    let vt = g.vertices();
    let mut base: BTreeMap<Categorical, usize> = BTreeMap::new();
    for v in vt.iter() {
        *base.entry(v.country).or_default() += 1;
    }
    let mut foreign: BTreeMap<Categorical, usize> = BTreeMap::new();
    for (i, j) in g.edges() {
        let (ci, cj) = (vt.get(i).country, vt.get(j).country);
        if ci != cj {
            *foreign.entry(cj).or_default() += 1;
        }
    }
    let mut rows: Vec<CountryPopularity> = base
        .into_iter()
        .map(|(code, user_base)| {
            let foreign_followers = foreign.get(&code).copied().unwrap_or(0);
            CountryPopularity {
                country: vt.levels.country.name(code).to_string(),
                code,
                user_base,
                foreign_followers,
                score: foreign_followers as f64 / user_base as f64,
                popular: false,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.country.cmp(&b.country)));
    let mut flagged = 0;
    for r in &mut rows {
        if flagged == rule.top_k {
            break;
        }
        if !r.code.is_unknown() && r.user_base > rule.min_user_base && r.score > 0.0 {
            r.popular = true;
            flagged += 1;
        }
    }
    rows
}

/// Ranking as CSV with a `#` comment line.
pub fn write_popularity_csv<W: Write>(rows: &[CountryPopularity], mut out: W) -> Result<()> {
    let mut s = String::from("# cross-country in-follows per user of the followee's country\n");
    s.push_str("rank,country,user_base,foreign_followers,score,popular\n");
    for (r, p) in rows.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{:.9},{}\n",
            r + 1,
            p.country,
            p.user_base,
            p.foreign_followers,
            p.score,
            p.popular as u8
        ));
    }
    out.write_all(s.as_bytes()).map_err(|e| Error::io("<output>", e))
}

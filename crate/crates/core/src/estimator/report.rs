//! Plain-text renderings of fits.

use std::io::Write;

use super::{FitResult, MarginalEffect};
use crate::error::{Error, Result};

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "NA".to_string()
    }
}

fn emit<W: Write>(mut out: W, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<output>", e))
}

/// Human-readable summary: one line per coefficient with estimate, SE and z.
pub fn write_fit_summary<W: Write>(fit: &FitResult, out: W) -> Result<()> {
    let label = if fit.label.is_empty() { "fit" } else { &fit.label };
    let mut s = format!(
        "# {label}\n# observations: {}\n# average negative log-likelihood: {:.12}\n# converged: {} after {} iterations\n# config: {}\n",
        fit.n_obs, fit.loglik, fit.converged, fit.iterations, fit.config_hash
    );
    for w in &fit.warnings {
        s.push_str(&format!("# warning: {w}\n"));
    }
    let width = fit.names.iter().map(String::len).max().unwrap_or(0).max(7);
    s.push_str(&format!(
        "{:<width$} {:>14} {:>12} {:>10}\n",
        "feature", "estimate", "se", "z"
    ));
    for (c, name) in fit.names.iter().enumerate() {
        let z = fit.beta[c] / fit.se[c];
        s.push_str(&format!(
            "{name:<width$} {:>14} {:>12} {:>10}\n",
            num(fit.beta[c]),
            num(fit.se[c]),
            if z.is_finite() { format!("{z:.3}") } else { "NA".into() }
        ));
    }
    emit(out, &s)
}

/// Coefficient table with one estimate/SE column pair per fit and one row
/// per feature, followed by the observation count and fitted objective.
pub fn write_coefficient_table<W: Write>(fits: &[FitResult], out: W) -> Result<()> {
    let mut features: Vec<&str> = Vec::new();
    for f in fits {
        for n in &f.names {
            if !features.contains(&n.as_str()) {
                features.push(n);
            }
        }
    }
    let mut s = String::from("feature");
    for f in fits {
        s.push_str(&format!(",{0},{0}_se", f.label));
    }
    s.push('\n');
    for name in features {
        s.push_str(name);
        for f in fits {
            match f.index_of(name) {
                Some(c) => s.push_str(&format!(",{},{}", num(f.beta[c]), num(f.se[c]))),
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    s.push_str("n_obs");
    for f in fits {
        s.push_str(&format!(",{},", f.n_obs));
    }
    s.push_str("\navg_neg_loglik");
    for f in fits {
        s.push_str(&format!(",{:.9},", f.loglik));
    }
    s.push('\n');
    emit(out, &s)
}

pub fn write_margins_csv<W: Write>(effects: &[MarginalEffect], out: W) -> Result<()> {
    let mut s = String::from("feature,kind,effect\n");
    for m in effects {
        let kind = serde_json::to_value(m.kind).expect("kind serialises");
        s.push_str(&format!(
            "{},{},{:.9e}\n",
            m.name,
            kind.as_str().unwrap_or_default(),
            m.effect
        ));
    }
    emit(out, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn fit(label: &str, names: &[&str], beta: &[f64]) -> FitResult {
        FitResult {
            label: label.into(),
            names: names.iter().map(|s| s.to_string()).collect(),
            d_width: 0,
            beta: beta.to_vec(),
            se: vec![0.01; beta.len()],
            loglik: 0.25,
            n_obs: 12,
            converged: true,
            iterations: 4,
            config_hash: "abc".into(),
            warnings: vec![],
        }
    }

    #[test]
    fn table_aligns_columns_by_name() {
        let fits = [fit("world", &["a", "b"], &[1.0, -2.0]), fit("US", &["b"], &[0.5])];
        let mut buf = Vec::new();
        write_coefficient_table(&fits, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "feature,world,world_se,US,US_se");
        assert_eq!(lines[1], "a,1.000000,0.010000,,");
        assert_eq!(lines[2], "b,-2.000000,0.010000,0.500000,0.010000");
        assert_eq!(lines[3], "n_obs,12,,12,");
    }

    #[test]
    fn margins_csv_names_kinds() {
        let m = [MarginalEffect {
            name: "same_city".into(),
            kind: FeatureKind::Indicator,
            effect: 0.125,
        }];
        let mut buf = Vec::new();
        write_margins_csv(&m, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "feature,kind,effect\nsame_city,indicator,1.250000000e-1\n"
        );
    }

    #[test]
    fn summary_prints_na_for_missing_se() {
        let mut f = fit("", &["a"], &[1.0]);
        f.se = vec![f64::NAN];
        let mut buf = Vec::new();
        write_fit_summary(&f, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("NA"));
    }
}

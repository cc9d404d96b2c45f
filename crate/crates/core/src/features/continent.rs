use std::collections::HashMap;
use std::sync::OnceLock;

const TABLE: &str = include_str!("../../data/continents.csv");

fn table() -> &'static HashMap<&'static str, &'static str> {
    static MAP: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    MAP.get_or_init(|| {
        TABLE
            .lines()
            .skip(1)
            .filter_map(|l| l.split_once(','))
            .map(|(c, k)| (c.trim(), k.trim()))
            .collect()
    })
}

/// Two-letter continent code for an ISO 3166 alpha-2 country code.
pub fn continent_of(country: &str) -> Option<&'static str> {
    let key = country.trim().to_ascii_uppercase();
    table().get(key.as_str()).copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_codes() {
        assert_eq!(continent_of("TH"), Some("AS"));
        assert_eq!(continent_of("br"), Some("SA"));
        assert_eq!(continent_of("DE"), Some("EU"));
        assert_eq!(continent_of("XX"), None);
    }
}

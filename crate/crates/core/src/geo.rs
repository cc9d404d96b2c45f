//! Great-circle distance and its discretisation into proximity bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG), kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Domain(format!("latitude {lat} outside [-90, 90]")));
        }
        if !(lon > -180.0 && lon <= 180.0) {
            return Err(Error::Domain(format!("longitude {lon} outside (-180, 180]")));
        }
        Ok(LatLon { lat, lon })
    }
}

/// Radian coordinates with the cosine of latitude cached, for repeated
/// distance evaluation inside dyad loops.
#[derive(Clone, Copy, Debug)]
pub struct GeoPoint {
    lat_rad: f64,
    lon_rad: f64,
    cos_lat: f64,
}

impl GeoPoint {
    pub fn new(p: LatLon) -> Self {
        let lat_rad = p.lat.to_radians();
        GeoPoint {
            lat_rad,
            lon_rad: p.lon.to_radians(),
            cos_lat: lat_rad.cos(),
        }
    }

    /// Haversine distance. Each term is even in its difference, so swapping
    /// the arguments gives a bit-identical result.
    #[inline]
    pub fn distance_km(&self, other: &GeoPoint) -> f64 {
        let s_lat = ((other.lat_rad - self.lat_rad) * 0.5).sin();
        let s_lon = ((other.lon_rad - self.lon_rad) * 0.5).sin();
        let h = s_lat * s_lat + (self.cos_lat * other.cos_lat) * (s_lon * s_lon);
        2.0 * EARTH_RADIUS_KM * h.min(1.0).sqrt().asin()
    }
}

pub fn haversine_km(a: LatLon, b: LatLon) -> Result<f64> {
    let a = LatLon::new(a.lat, a.lon)?;
    let b = LatLon::new(b.lat, b.lon)?;
    Ok(GeoPoint::new(a).distance_km(&GeoPoint::new(b)))
}

/// Half-open kilometre bins. Bin 0 is `[0, edges[0])` and is the reference
/// level; the last bin is `[edges[last], inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DistanceBinScheme {
    edges_km: Vec<f64>,
}

impl Default for DistanceBinScheme {
    fn default() -> Self {
        DistanceBinScheme {
            edges_km: vec![5.0, 10.0, 50.0, 100.0, 500.0, 1000.0, 3000.0],
        }
    }
}

impl TryFrom<Vec<f64>> for DistanceBinScheme {
    type Error = Error;

    fn try_from(edges_km: Vec<f64>) -> Result<Self> {
        DistanceBinScheme::new(edges_km)
    }
}

impl From<DistanceBinScheme> for Vec<f64> {
    fn from(s: DistanceBinScheme) -> Self {
        s.edges_km
    }
}

impl DistanceBinScheme {
    pub fn new(edges_km: Vec<f64>) -> Result<Self> {
        if edges_km.is_empty() {
            return Err(Error::Config("distance_bins_km must not be empty".into()));
        }
        if edges_km.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config("distance_bins_km entries must be positive".into()));
        }
        if edges_km.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("distance_bins_km must be strictly ascending".into()));
        }
        Ok(DistanceBinScheme { edges_km })
    }

    pub fn edges_km(&self) -> &[f64] {
        &self.edges_km
    }

    pub fn bin_count(&self) -> usize {
        self.edges_km.len() + 1
    }

    pub const REFERENCE_BIN: usize = 0;

    #[inline]
    pub(crate) fn bin_of(&self, d: f64) -> usize {
        self.edges_km.partition_point(|&e| e <= d)
    }

    pub fn bin_distance(&self, d: f64) -> Result<usize> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::Domain(format!("distance {d} km is negative")));
        }
        Ok(self.bin_of(d))
    }

    /// Dummy coding against the reference bin: one slot per non-reference bin.
    pub fn bin_indicators(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.bin_count() - 1];
        if idx > Self::REFERENCE_BIN {
            out[idx - 1] = 1.0;
        }
        out
    }

    /// Column label for a non-reference bin.
    pub fn label(&self, idx: usize) -> String {
        let fmt = |x: f64| {
            if x.fract() == 0.0 {
                format!("{}", x as i64)
            } else {
                format!("{x}")
            }
        };
        match idx {
            0 => format!("dist_lt_{}km", fmt(self.edges_km[0])),
            i if i == self.edges_km.len() => format!("dist_ge_{}km", fmt(self.edges_km[i - 1])),
            i => format!("dist_{}_{}km", fmt(self.edges_km[i - 1]), fmt(self.edges_km[i])),
        }
    }
}

//! Great-circle geometry between POIs and the geographical influence factor
//! that discounts pairwise ranking violations between nearby venues.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Mean earth radius used for all distance computations.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A location on the sphere, stored in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat_rad: f64,
    lon_rad: f64,
}

impl GeoPoint {
    pub fn from_radians(lat_rad: f64, lon_rad: f64) -> Result<Self> {
        if !(lat_rad.is_finite() && (-FRAC_PI_2..=FRAC_PI_2).contains(&lat_rad)) {
            return Err(Error::InvalidArgument(format!(
                "latitude {lat_rad} rad outside [-pi/2, pi/2]"
            )));
        }
        if !(lon_rad.is_finite() && (-PI..=PI).contains(&lon_rad)) {
            return Err(Error::InvalidArgument(format!(
                "longitude {lon_rad} rad outside [-pi, pi]"
            )));
        }
        Ok(GeoPoint { lat_rad, lon_rad })
    }

    pub fn from_degrees(lat: f64, lon: f64) -> Result<Self> {
        if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
            return Err(Error::InvalidArgument(format!(
                "latitude {lat} outside [-90, 90]"
            )));
        }
        if !(lon.is_finite() && (-180.0..=180.0).contains(&lon)) {
            return Err(Error::InvalidArgument(format!(
                "longitude {lon} outside [-180, 180]"
            )));
        }
        // Clamp guards against to_radians rounding a boundary value past pi.
        Ok(GeoPoint {
            lat_rad: lat.to_radians().clamp(-FRAC_PI_2, FRAC_PI_2),
            lon_rad: lon.to_radians().clamp(-PI, PI),
        })
    }

    pub fn lat_rad(&self) -> f64 {
        self.lat_rad
    }

    pub fn lon_rad(&self) -> f64 {
        self.lon_rad
    }
}

/// Central angle between two points via the haversine formula, in `[0, pi]`.
pub fn haversine_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    haversine_angle_with_cos(a, a.lat_rad.cos(), b, b.lat_rad.cos())
}

#[inline]
fn haversine_angle_with_cos(a: GeoPoint, cos_a: f64, b: GeoPoint, cos_b: f64) -> f64 {
    let half_dlat = ((b.lat_rad - a.lat_rad) * 0.5).sin();
    let half_dlon = ((b.lon_rad - a.lon_rad) * 0.5).sin();
    let h = half_dlat * half_dlat + cos_a * cos_b * half_dlon * half_dlon;
    2.0 * h.clamp(0.0, 1.0).sqrt().asin()
}

pub fn distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    haversine_angle(a, b) * EARTH_RADIUS_KM
}

/// `1 / (1 + angle * radius_km)`: 1 for identical points, decaying with distance.
pub fn geo_similarity(a: GeoPoint, b: GeoPoint, radius_km: f64) -> f64 {
    1.0 / (1.0 + haversine_angle(a, b) * radius_km)
}

/// `1 + alpha * exp(g)`. Never below 1, so dividing a score gap by it keeps the sign.
pub fn influence_factor(similarity: f64, alpha: f64) -> f64 {
    1.0 + alpha * similarity.exp()
}

/// Dense POI index to location, with precomputed latitude cosines.
#[derive(Debug, Clone)]
pub struct GeoIndex {
    points: Vec<GeoPoint>,
    cos_lat: Vec<f64>,
}

impl GeoIndex {
    pub fn new(points: Vec<GeoPoint>) -> Self {
        let cos_lat = points.iter().map(|p| p.lat_rad.cos()).collect();
        GeoIndex { points, cos_lat }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn earth_radius_km(&self) -> f64 {
        EARTH_RADIUS_KM
    }

    pub fn point(&self, j: usize) -> GeoPoint {
        self.points[j]
    }

    pub fn angle(&self, a: usize, b: usize) -> f64 {
        haversine_angle_with_cos(self.points[a], self.cos_lat[a], self.points[b], self.cos_lat[b])
    }

    pub fn distance_km(&self, a: usize, b: usize) -> f64 {
        self.angle(a, b) * EARTH_RADIUS_KM
    }

    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        1.0 / (1.0 + self.angle(a, b) * EARTH_RADIUS_KM)
    }

    pub fn influence(&self, a: usize, b: usize, alpha: f64) -> f64 {
        influence_factor(self.similarity(a, b), alpha)
    }

    /// POIs within `radius_km` of `center`, in index order (linear scan).
    pub fn within(&self, center: usize, radius_km: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.points.len()).filter(move |&j| self.distance_km(center, j) <= radius_km)
    }
}

/// Memoized `G_alpha(k, j)` values for one training run.
///
/// Built once, then read concurrently. When `alpha == 0` every factor is
/// exactly 1 and nothing is stored. When the dense `m x m` table would exceed
/// `max_entries`, factors are recomputed on demand instead.
#[derive(Debug, Clone)]
pub struct InfluenceCache {
    alpha: f64,
    m: usize,
    table: Option<Vec<f64>>,
    geo: GeoIndex,
}

/// Default cap on cached factors (256 MiB of f64).
pub const DEFAULT_CACHE_ENTRIES: usize = 1 << 25;

impl InfluenceCache {
    pub fn build(geo: &GeoIndex, alpha: f64, max_entries: usize) -> Self {
        let m = geo.len();
        let table = if alpha != 0.0 && m.checked_mul(m).is_some_and(|e| e <= max_entries) {
            let mut t = vec![1.0; m * m];
            for a in 0..m {
                t[a * m + a] = influence_factor(1.0, alpha);
                for b in (a + 1)..m {
                    let g = geo.influence(a, b, alpha);
                    t[a * m + b] = g;
                    t[b * m + a] = g;
                }
            }
            Some(t)
        } else {
            None
        };
        InfluenceCache {
            alpha,
            m,
            table,
            geo: geo.clone(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        if self.alpha == 0.0 {
            return 1.0;
        }
        match &self.table {
            Some(t) => t[k * self.m + j],
            None => self.geo.influence(k, j, self.alpha),
        }
    }
}

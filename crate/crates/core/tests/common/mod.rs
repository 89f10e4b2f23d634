//! Instance generators and straightforward reference implementations shared by
//! the integration tests. Nothing here calls the library's math.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use jtcr_core::data::{CheckinRecord, Dataset};
use jtcr_core::model::{Factors, LatentModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const R_EARTH: f64 = 6371.0;

/// Great-circle distance from the angle between unit position vectors.
pub fn oracle_distance_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let unit = |lat: f64, lon: f64| {
        let (la, lo) = (lat.to_radians(), lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (a, b) = (unit(lat1, lon1), unit(lat2, lon2));
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos) * R_EARTH
}

pub fn oracle_influence(lat1: f64, lon1: f64, lat2: f64, lon2: f64, alpha: f64) -> f64 {
    let g = 1.0 / (1.0 + oracle_distance_km(lat1, lon1, lat2, lon2));
    1.0 + alpha * g.exp()
}

pub fn record(user: &str, poi: &str, t: i64, lat: f64, lon: f64, category: Option<&str>) -> CheckinRecord {
    CheckinRecord {
        user_id: user.to_string(),
        poi_id: poi.to_string(),
        timestamp: t,
        lat,
        lon,
        category: category.map(str::to_string),
    }
}

/// Random small dataset: every user visits a random non-empty subset of POIs
/// between one and three times each.
pub fn random_records(rng: &mut ChaCha8Rng, max_users: usize, max_pois: usize, spread_deg: f64) -> Vec<CheckinRecord> {
    let n = rng.gen_range(1..=max_users);
    let m = rng.gen_range(2..=max_pois);
    let coords: Vec<(f64, f64)> = (0..m)
        .map(|_| {
            (
                1.3 + rng.gen_range(-spread_deg..spread_deg).clamp(-60.0, 60.0),
                103.8 + rng.gen_range(-spread_deg..spread_deg),
            )
        })
        .collect();
    let mut out = Vec::new();
    let mut t = 1_280_000_000i64;
    for i in 0..n {
        let mut visited = false;
        for (j, &(lat, lon)) in coords.iter().enumerate() {
            if rng.gen_bool(0.45) || (!visited && j == m - 1) {
                visited = true;
                for _ in 0..rng.gen_range(1..=3) {
                    t += rng.gen_range(3600..40 * 86400);
                    let cat = format!("c{}", j % 3);
                    out.push(record(&format!("u{i}"), &format!("p{j}"), t, lat, lon, Some(&cat)));
                }
            }
        }
    }
    out
}

pub fn random_model(rng: &mut ChaCha8Rng, d: usize, n: usize, m: usize, scale: f64, alpha: f64, lambda: f64) -> LatentModel {
    let mut draw = |cols: usize| {
        let data = (0..d * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        Factors::from_column_major(d, cols, data)
    };
    let u = draw(n);
    let v = draw(m);
    LatentModel::new(u, v, alpha, lambda).unwrap()
}

/// Per user, POI index to visit count.
pub fn visit_map(ds: &Dataset) -> Vec<BTreeMap<usize, u32>> {
    let mut out = vec![BTreeMap::new(); ds.n_users()];
    for c in ds.checkins() {
        *out[c.user].entry(c.poi).or_insert(0) += 1;
    }
    out
}

fn score(model: &LatentModel, i: usize, j: usize) -> f64 {
    let (u, v) = (model.u().col(i), model.v().col(j));
    let mut s = 0.0;
    for r in 0..u.len() {
        s += u[r] * v[r];
    }
    s
}

fn log1p_exp(x: f64) -> f64 {
    (1.0 + x.exp()).ln()
}

/// Relevant-above-irrelevant objective over all POIs, summed over users.
pub fn oracle_phase1(model: &LatentModel, ds: &Dataset) -> f64 {
    let visits = visit_map(ds);
    let mut total = 0.0;
    for i in 0..ds.n_users() {
        let plus: Vec<usize> = visits[i].keys().copied().collect();
        let minus: Vec<usize> = (0..ds.n_pois()).filter(|j| !visits[i].contains_key(j)).collect();
        if plus.is_empty() || minus.is_empty() {
            continue;
        }
        let mut user = 0.0;
        for &j in &minus {
            let mut h = 0.0;
            for &k in &plus {
                let (pk, pj) = (ds.poi(k), ds.poi(j));
                let g = oracle_influence(pk.lat, pk.lon, pj.lat, pj.lon, model.alpha());
                h += log1p_exp(-(score(model, i, k) - score(model, i, j)) / g);
            }
            user += h * h;
        }
        total += user / (plus.len() * minus.len()) as f64;
    }
    total
}

/// Repeat-visit-above-single-visit objective, summed over users.
pub fn oracle_phase2(model: &LatentModel, ds: &Dataset) -> f64 {
    let visits = visit_map(ds);
    let mut total = 0.0;
    for row in visits.iter().enumerate() {
        let (i, row) = row;
        let star: Vec<usize> = row.iter().filter(|(_, &c)| c >= 2).map(|(&j, _)| j).collect();
        let single: Vec<usize> = row.iter().filter(|(_, &c)| c == 1).map(|(&j, _)| j).collect();
        if star.is_empty() || single.is_empty() {
            continue;
        }
        let mut user = 0.0;
        for &j in &star {
            let mut count = 0.0;
            for &k in &single {
                count += log1p_exp(-(score(model, i, j) - score(model, i, k)));
            }
            user += (1.0 + count).ln();
        }
        total += user / (star.len() * single.len()) as f64;
    }
    total
}

/// Synthetic city-scale check-in log with several repeat visitors, written as CSV.
pub fn write_synthetic_csv(path: &Path, seed: u64, users: usize, pois: usize) {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<(f64, f64)> = (0..pois)
        .map(|_| (1.25 + rng.gen_range(0.0..0.2), 103.7 + rng.gen_range(0.0..0.25)))
        .collect();
    let mut text = String::new();
    for u in 0..users {
        let favourite: Vec<usize> = (0..rng.gen_range(4..9)).map(|_| rng.gen_range(0..pois)).collect();
        let mut t = 1_281_000_000i64 + rng.gen_range(0..86400 * 30);
        for _ in 0..rng.gen_range(12..30) {
            let j = if rng.gen_bool(0.7) {
                favourite[rng.gen_range(0..favourite.len())]
            } else {
                rng.gen_range(0..pois)
            };
            t += rng.gen_range(3600..86400 * 12);
            let (lat, lon) = coords[j];
            text.push_str(&format!("user{u},poi{j},{t},{lat},{lon},cat{}\n", j % 7));
        }
    }
    std::fs::write(path, text).unwrap();
}

//! Check-in ingestion: parsing, activity filtering, interaction sets and the
//! per-user chronological split.

mod interactions;
mod split;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoIndex, GeoPoint};

pub use interactions::{build_interactions, CandidateUniverse, InteractionStore};
pub use split::{chronological_split, SplitDataset, SplitRatios};

/// One observed visit event.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckinRecord {
    pub user_id: String,
    pub poi_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub category: Option<String>,
}

/// A check-in against dense user/POI indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Checkin {
    pub user: usize,
    pub poi: usize,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub category: Option<String>,
}

/// Category grouping for a POI. POIs without a category form their own group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CategoryKey {
    Named(String),
    Singleton(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Tsv,
    #[default]
    Csv,
}

impl InputFormat {
    fn delimiter(self) -> u8 {
        match self {
            InputFormat::Tsv => b'\t',
            InputFormat::Csv => b',',
        }
    }
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(InputFormat::Tsv),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

/// Check-ins plus the dense user and POI indices they refer to.
///
/// Train/validation/test views produced by [`chronological_split`] share the
/// index tables of their parent, so a model trained on one view scores the
/// others directly.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    checkins: Vec<Checkin>,
    user_ids: Vec<String>,
    user_index: HashMap<String, usize>,
    pois: Vec<Poi>,
    poi_index: HashMap<String, usize>,
}

impl Dataset {
    /// Build from records in order; indices are assigned by first appearance.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = CheckinRecord>,
    {
        let mut builder = Builder::default();
        for (n, rec) in records.into_iter().enumerate() {
            builder.push(rec, n as u64 + 1)?;
        }
        Ok(builder.finish())
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_pois(&self) -> usize {
        self.pois.len()
    }

    pub fn len(&self) -> usize {
        self.checkins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkins.is_empty()
    }

    pub fn checkins(&self) -> &[Checkin] {
        &self.checkins
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn user_id(&self, i: usize) -> &str {
        &self.user_ids[i]
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn poi(&self, j: usize) -> &Poi {
        &self.pois[j]
    }

    pub fn poi_ids(&self) -> impl Iterator<Item = &str> {
        self.pois.iter().map(|p| p.id.as_str())
    }

    pub fn poi_index(&self, id: &str) -> Option<usize> {
        self.poi_index.get(id).copied()
    }

    pub fn category_key(&self, j: usize) -> CategoryKey {
        match &self.pois[j].category {
            Some(c) => CategoryKey::Named(c.clone()),
            None => CategoryKey::Singleton(j),
        }
    }

    /// Display name of a category key; singleton categories are named after their POI.
    pub fn category_name(&self, key: &CategoryKey) -> String {
        match key {
            CategoryKey::Named(c) => c.clone(),
            CategoryKey::Singleton(j) => self.pois[*j].id.clone(),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = CheckinRecord> + '_ {
        self.checkins.iter().map(|c| {
            let poi = &self.pois[c.poi];
            CheckinRecord {
                user_id: self.user_ids[c.user].clone(),
                poi_id: poi.id.clone(),
                timestamp: c.timestamp,
                lat: poi.lat,
                lon: poi.lon,
                category: poi.category.clone(),
            }
        })
    }

    pub fn geo_index(&self) -> GeoIndex {
        GeoIndex::new(
            self.pois
                .iter()
                .map(|p| GeoPoint::from_degrees(p.lat, p.lon).expect("validated at parse time"))
                .collect(),
        )
    }

    pub fn checkins_per_user(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_users()];
        for c in &self.checkins {
            counts[c.user] += 1;
        }
        counts
    }

    pub fn checkins_per_poi(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_pois()];
        for c in &self.checkins {
            counts[c.poi] += 1;
        }
        counts
    }

    /// Visit multiplicity per user: sorted `(poi, count)` pairs.
    pub fn visit_counts(&self) -> Vec<Vec<(usize, u32)>> {
        let mut per_user: Vec<HashMap<usize, u32>> = vec![HashMap::new(); self.n_users()];
        for c in &self.checkins {
            *per_user[c.user].entry(c.poi).or_insert(0) += 1;
        }
        per_user
            .into_iter()
            .map(|m| {
                let mut v: Vec<_> = m.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect()
    }

    /// Same index tables, different check-ins.
    pub(crate) fn with_checkins(&self, checkins: Vec<Checkin>) -> Dataset {
        Dataset {
            checkins,
            user_ids: self.user_ids.clone(),
            user_index: self.user_index.clone(),
            pois: self.pois.clone(),
            poi_index: self.poi_index.clone(),
        }
    }

    /// Rebuild with only the given check-ins, re-densifying indices by first appearance.
    fn reindexed(&self, checkins: &[Checkin]) -> Dataset {
        let mut user_map = vec![usize::MAX; self.n_users()];
        let mut poi_map = vec![usize::MAX; self.n_pois()];
        let mut out = Dataset::default();
        for c in checkins {
            if user_map[c.user] == usize::MAX {
                user_map[c.user] = out.user_ids.len();
                let id = self.user_ids[c.user].clone();
                out.user_index.insert(id.clone(), out.user_ids.len());
                out.user_ids.push(id);
            }
            if poi_map[c.poi] == usize::MAX {
                poi_map[c.poi] = out.pois.len();
                let poi = self.pois[c.poi].clone();
                out.poi_index.insert(poi.id.clone(), out.pois.len());
                out.pois.push(poi);
            }
            out.checkins.push(Checkin {
                user: user_map[c.user],
                poi: poi_map[c.poi],
                timestamp: c.timestamp,
            });
        }
        out
    }
}

#[derive(Default)]
struct Builder {
    ds: Dataset,
    poi_first_line: Vec<u64>,
}

impl Builder {
    fn push(&mut self, rec: CheckinRecord, line: u64) -> Result<()> {
        if GeoPoint::from_degrees(rec.lat, rec.lon).is_err() {
            return Err(Error::Parse {
                line,
                message: format!("coordinates ({}, {}) out of range", rec.lat, rec.lon),
            });
        }
        if chrono::DateTime::from_timestamp(rec.timestamp, 0).is_none() {
            return Err(Error::Parse {
                line,
                message: format!("timestamp {} out of range", rec.timestamp),
            });
        }
        let ds = &mut self.ds;
        let user = match ds.user_index.get(&rec.user_id) {
            Some(&i) => i,
            None => {
                let i = ds.user_ids.len();
                ds.user_index.insert(rec.user_id.clone(), i);
                ds.user_ids.push(rec.user_id);
                i
            }
        };
        let poi = match ds.poi_index.get(&rec.poi_id) {
            Some(&j) => {
                let existing = &mut ds.pois[j];
                if existing.lat != rec.lat || existing.lon != rec.lon {
                    return Err(Error::ConflictingPoi {
                        poi_id: rec.poi_id,
                        field: "coordinates",
                        first_line: self.poi_first_line[j],
                        line,
                    });
                }
                match (&existing.category, rec.category) {
                    (Some(a), Some(b)) if *a != b => {
                        return Err(Error::ConflictingPoi {
                            poi_id: rec.poi_id,
                            field: "category",
                            first_line: self.poi_first_line[j],
                            line,
                        });
                    }
                    (None, Some(b)) => existing.category = Some(b),
                    _ => {}
                }
                j
            }
            None => {
                let j = ds.pois.len();
                ds.poi_index.insert(rec.poi_id.clone(), j);
                ds.pois.push(Poi {
                    id: rec.poi_id,
                    lat: rec.lat,
                    lon: rec.lon,
                    category: rec.category,
                });
                self.poi_first_line.push(line);
                j
            }
        };
        ds.checkins.push(Checkin {
            user,
            poi,
            timestamp: rec.timestamp,
        });
        Ok(())
    }

    fn finish(self) -> Dataset {
        self.ds
    }
}

/// Accepts RFC 3339, `YYYY-MM-DD HH:MM:SS` / `YYYY-MM-DDTHH:MM:SS` (read as
/// UTC), or integer Unix seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    s.parse::<i64>().ok()
}

/// Parse a delimiter-separated check-in file.
///
/// Columns: `user_id, poi_id, timestamp, lat, lon[, category]`, no header.
/// Blank lines are skipped; an empty category field means "no category".
pub fn parse_checkins(path: &Path, format: InputFormat) -> Result<Dataset> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    parse_checkins_from(buf.as_slice(), format)
}

pub fn parse_checkins_from<R: Read>(reader: R, format: InputFormat) -> Result<Dataset> {
    let delimiter = format.delimiter() as char;
    let mut builder = Builder::default();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = n as u64 + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        let rec = parse_fields(&fields, line_no)?;
        builder.push(rec, line_no)?;
    }
    Ok(builder.finish())
}

fn parse_fields(fields: &[&str], line: u64) -> Result<CheckinRecord> {
    let err = |message: String| Error::Parse { line, message };
    if fields.len() != 5 && fields.len() != 6 {
        return Err(err(format!("expected 5 or 6 fields, found {}", fields.len())));
    }
    let user_id = fields[0].to_string();
    let poi_id = fields[1].to_string();
    if user_id.is_empty() || poi_id.is_empty() {
        return Err(err("empty user or POI id".into()));
    }
    let timestamp =
        parse_timestamp(fields[2]).ok_or_else(|| err(format!("unparseable timestamp {:?}", fields[2])))?;
    let lat: f64 = fields[3]
        .parse()
        .map_err(|_| err(format!("unparseable latitude {:?}", fields[3])))?;
    let lon: f64 = fields[4]
        .parse()
        .map_err(|_| err(format!("unparseable longitude {:?}", fields[4])))?;
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(err(format!("coordinates ({lat}, {lon}) out of range")));
    }
    let category = fields
        .get(5)
        .filter(|c| !c.is_empty())
        .map(|c| c.to_string());
    Ok(CheckinRecord {
        user_id,
        poi_id,
        timestamp,
        lat,
        lon,
        category,
    })
}

/// Repeatedly drop users and POIs with fewer than `min_count` check-ins until
/// nothing changes, then re-densify the indices.
pub fn filter_min_activity(ds: &Dataset, min_count: usize) -> Dataset {
    let mut kept: Vec<Checkin> = ds.checkins.clone();
    loop {
        let mut user_counts = vec![0usize; ds.n_users()];
        let mut poi_counts = vec![0usize; ds.n_pois()];
        for c in &kept {
            user_counts[c.user] += 1;
            poi_counts[c.poi] += 1;
        }
        let before = kept.len();
        kept.retain(|c| user_counts[c.user] >= min_count && poi_counts[c.poi] >= min_count);
        if kept.len() == before {
            break;
        }
    }
    ds.reindexed(&kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(u: &str, p: &str, t: i64) -> CheckinRecord {
        CheckinRecord {
            user_id: u.into(),
            poi_id: p.into(),
            timestamp: t,
            lat: 1.3,
            lon: 103.8,
            category: None,
        }
    }

    #[test]
    fn empty_input_gives_empty_dataset() {
        let ds = parse_checkins_from(&b""[..], InputFormat::Csv).unwrap();
        assert_eq!((ds.n_users(), ds.n_pois(), ds.len()), (0, 0, 0));
    }

    #[test]
    fn single_record() {
        let ds = parse_checkins_from(
            &b"u1,p1,2010-08-01T12:00:00Z,1.30,103.85,Bar\n"[..],
            InputFormat::Csv,
        )
        .unwrap();
        assert_eq!((ds.n_users(), ds.n_pois(), ds.len()), (1, 1, 1));
        assert_eq!(ds.poi(0).category.as_deref(), Some("Bar"));
        assert_eq!(ds.checkins()[0].timestamp, 1_280_664_000);
    }

    #[test]
    fn tsv_and_timestamp_variants() {
        let text = "u1\tp1\t2010-08-01 12:00:00\t1.3\t103.8\n\nu2\tp1\t1280664000\t1.3\t103.8\t\n";
        let ds = parse_checkins_from(text.as_bytes(), InputFormat::Tsv).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.checkins()[0].timestamp, ds.checkins()[1].timestamp);
        assert_eq!(ds.poi(0).category, None);
    }

    #[test]
    fn malformed_lines_name_their_line() {
        let text = "u1,p1,2010-08-01T12:00:00Z,1.3,103.8\nu1,p2,yesterday,1.3,103.8\n";
        match parse_checkins_from(text.as_bytes(), InputFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let text = "u1,p1,2010-08-01T12:00:00Z,1.3,103.8\n\nu1,p2,2010-08-01T12:00:00Z,95,103.8\n";
        match parse_checkins_from(text.as_bytes(), InputFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "u1,p1,2010-08-01T12:00:00Z\n";
        assert!(matches!(
            parse_checkins_from(text.as_bytes(), InputFormat::Csv),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn conflicting_coordinates_rejected() {
        let text = "u1,p1,2010-08-01T12:00:00Z,1.3,103.8\nu2,p1,2010-08-02T12:00:00Z,1.4,103.8\n";
        match parse_checkins_from(text.as_bytes(), InputFormat::Csv) {
            Err(Error::ConflictingPoi {
                field, first_line, line, ..
            }) => {
                assert_eq!(field, "coordinates");
                assert_eq!((first_line, line), (1, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_category_filled_from_later_record() {
        let text = "u1,p1,2010-08-01T12:00:00Z,1.3,103.8\nu2,p1,2010-08-02T12:00:00Z,1.3,103.8,Cafe\n";
        let ds = parse_checkins_from(text.as_bytes(), InputFormat::Csv).unwrap();
        assert_eq!(ds.poi(0).category.as_deref(), Some("Cafe"));
        assert_eq!(ds.category_key(0), CategoryKey::Named("Cafe".into()));
    }

    #[test]
    fn singleton_category_fallback() {
        let ds = Dataset::from_records(vec![rec("u", "p", 0)]).unwrap();
        assert_eq!(ds.category_key(0), CategoryKey::Singleton(0));
        assert_eq!(ds.category_name(&ds.category_key(0)), "p");
    }

    #[test]
    fn filter_keeps_fixed_point() {
        let mut recs = Vec::new();
        for u in 0..5 {
            for p in 0..5 {
                recs.push(rec(&format!("u{u}"), &format!("p{p}"), (u * 5 + p) as i64));
            }
        }
        let ds = Dataset::from_records(recs).unwrap();
        let f = filter_min_activity(&ds, 5);
        assert_eq!(f.checkins(), ds.checkins());
        assert_eq!(f.n_users(), 5);
    }

    #[test]
    fn filter_drops_inactive_user() {
        let ds = Dataset::from_records((0..4).map(|t| rec("u", "p", t))).unwrap();
        let f = filter_min_activity(&ds, 5);
        assert!(f.is_empty());
        assert_eq!((f.n_users(), f.n_pois()), (0, 0));
    }

    #[test]
    fn filter_cascades() {
        // Round 1 drops u2 and p2, which leaves u1 with one check-in; dropping
        // u1 then leaves p1 with one check-in.
        let recs = vec![
            rec("u0", "p0", 0),
            rec("u0", "p0", 1),
            rec("u0", "p1", 2),
            rec("u1", "p1", 3),
            rec("u1", "p2", 4),
            rec("u2", "p0", 5),
        ];
        let ds = Dataset::from_records(recs).unwrap();
        let f = filter_min_activity(&ds, 2);
        assert_eq!((f.n_users(), f.n_pois(), f.len()), (1, 1, 2));
        assert_eq!(f.user_id(0), "u0");
        assert_eq!(f.poi(0).id, "p0");
    }
}

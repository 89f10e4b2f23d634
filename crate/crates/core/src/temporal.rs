//! Monthly activity distributions, their variances, rank correlations, and
//! the variance-driven regularization coefficients.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use chrono::{DateTime, Datelike};
use serde::Serialize;

use crate::data::{CategoryKey, Dataset};
use crate::error::{Error, Result};

/// A UTC calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn from_timestamp(ts: i64) -> YearMonth {
        let dt = DateTime::from_timestamp(ts, 0).expect("timestamps are validated at ingestion");
        YearMonth {
            year: dt.year(),
            month: dt.month(),
        }
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(o: i64) -> YearMonth {
        YearMonth {
            year: o.div_euclid(12) as i32,
            month: (o.rem_euclid(12) + 1) as u32,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Inclusive month range spanned by a dataset's check-ins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonthRange {
    first: i64,
    last: i64,
}

impl MonthRange {
    pub fn of(ds: &Dataset) -> Option<MonthRange> {
        let mut it = ds.checkins().iter().map(|c| YearMonth::from_timestamp(c.timestamp).ordinal());
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), o| (lo.min(o), hi.max(o)));
        Some(MonthRange { first: lo, last: hi })
    }

    pub fn len(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        (self.first..=self.last).map(YearMonth::from_ordinal)
    }

    fn slot(&self, ts: i64) -> usize {
        (YearMonth::from_timestamp(ts).ordinal() - self.first) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesOwner {
    User(usize),
    Category(CategoryKey),
}

/// Normalized monthly check-in shares for one user or category. Every month
/// in the dataset's range has a bin, empty months included.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub owner: SeriesOwner,
    pub bins: BTreeMap<YearMonth, f64>,
    pub total_count: usize,
}

impl MonthlySeries {
    fn from_counts(owner: SeriesOwner, range: Option<MonthRange>, counts: &[usize]) -> Self {
        let total_count: usize = counts.iter().sum();
        let bins = match range {
            Some(r) => r
                .months()
                .zip(counts)
                .map(|(ym, &c)| {
                    let share = if total_count > 0 {
                        c as f64 / total_count as f64
                    } else {
                        0.0
                    };
                    (ym, share)
                })
                .collect(),
            None => BTreeMap::new(),
        };
        MonthlySeries {
            owner,
            bins,
            total_count,
        }
    }

    pub fn shares(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.values().copied()
    }
}

pub fn monthly_series(ds: &Dataset, owner: SeriesOwner) -> Result<MonthlySeries> {
    let range = MonthRange::of(ds);
    let len = range.map_or(0, |r| r.len());
    let mut counts = vec![0usize; len];
    match &owner {
        SeriesOwner::User(i) => {
            if *i >= ds.n_users() {
                return Err(Error::Unknown {
                    what: "user",
                    key: i.to_string(),
                });
            }
            for c in ds.checkins().iter().filter(|c| c.user == *i) {
                counts[range.expect("non-empty").slot(c.timestamp)] += 1;
            }
        }
        SeriesOwner::Category(key) => {
            let members: Vec<bool> = (0..ds.n_pois()).map(|j| ds.category_key(j) == *key).collect();
            if !members.iter().any(|&b| b) {
                return Err(Error::Unknown {
                    what: "category",
                    key: format!("{key:?}"),
                });
            }
            for c in ds.checkins().iter().filter(|c| members[c.poi]) {
                counts[range.expect("non-empty").slot(c.timestamp)] += 1;
            }
        }
    }
    Ok(MonthlySeries::from_counts(owner, range, &counts))
}

/// Population variance of a slice, computed with Welford's update.
fn population_variance(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in xs {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    (n > 0).then(|| (m2 / n as f64).max(0.0))
}

/// Population variance of the monthly shares.
pub fn activity_variance(series: &MonthlySeries) -> Result<f64> {
    if series.total_count == 0 {
        return Err(Error::InvalidArgument("variance of an empty series".into()));
    }
    population_variance(series.shares())
        .ok_or_else(|| Error::InvalidArgument("series has no bins".into()))
}

/// `lambda * ln(1 + exp(-variance))`.
pub fn regularizer_coefficient(variance: f64, lambda: f64) -> f64 {
    lambda * (-variance).exp().ln_1p()
}

/// Per-user and per-POI shrinkage coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerVectors {
    lambda: f64,
    lambda_u: Vec<f64>,
    lambda_v: Vec<f64>,
    sigma2_u: Vec<f64>,
    sigma2_v: Vec<f64>,
}

impl RegularizerVectors {
    /// Coefficients from explicit variances.
    pub fn from_variances(lambda: f64, sigma2_u: Vec<f64>, sigma2_v: Vec<f64>) -> Self {
        let lambda_u = sigma2_u.iter().map(|&s| regularizer_coefficient(s, lambda)).collect();
        let lambda_v = sigma2_v.iter().map(|&s| regularizer_coefficient(s, lambda)).collect();
        RegularizerVectors {
            lambda,
            lambda_u,
            lambda_v,
            sigma2_u,
            sigma2_v,
        }
    }

    /// The same coefficient `lambda` for every entity (plain L2 shrinkage).
    /// No variances are attached.
    pub fn uniform(lambda: f64, n_users: usize, n_pois: usize) -> Self {
        RegularizerVectors {
            lambda,
            lambda_u: vec![lambda; n_users],
            lambda_v: vec![lambda; n_pois],
            sigma2_u: Vec::new(),
            sigma2_v: Vec::new(),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_u(&self) -> &[f64] {
        &self.lambda_u
    }

    pub fn lambda_v(&self) -> &[f64] {
        &self.lambda_v
    }

    pub fn sigma2_u(&self) -> &[f64] {
        &self.sigma2_u
    }

    pub fn sigma2_v(&self) -> &[f64] {
        &self.sigma2_v
    }
}

/// Per-user monthly counts over `range`, one vector per user.
fn user_month_counts(ds: &Dataset, range: Option<MonthRange>) -> Vec<Vec<usize>> {
    let len = range.map_or(0, |r| r.len());
    let mut counts = vec![vec![0usize; len]; ds.n_users()];
    if let Some(r) = range {
        for c in ds.checkins() {
            counts[c.user][r.slot(c.timestamp)] += 1;
        }
    }
    counts
}

/// Category keys in first-seen POI order, and each POI's slot among them.
fn category_slots(ds: &Dataset) -> (Vec<CategoryKey>, Vec<usize>) {
    let mut keys = Vec::new();
    let mut slot_of: HashMap<CategoryKey, usize> = HashMap::new();
    let mut poi_slot = Vec::with_capacity(ds.n_pois());
    for j in 0..ds.n_pois() {
        let key = ds.category_key(j);
        let slot = *slot_of.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            keys.len() - 1
        });
        poi_slot.push(slot);
    }
    (keys, poi_slot)
}

fn category_month_counts(ds: &Dataset, range: Option<MonthRange>, poi_slot: &[usize], n_cats: usize) -> Vec<Vec<usize>> {
    let len = range.map_or(0, |r| r.len());
    let mut counts = vec![vec![0usize; len]; n_cats];
    if let Some(r) = range {
        for c in ds.checkins() {
            counts[poi_slot[c.poi]][r.slot(c.timestamp)] += 1;
        }
    }
    counts
}

fn shares_variance(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    population_variance(counts.iter().map(|&c| c as f64 / total as f64)).unwrap_or(0.0)
}

/// Coefficients from the monthly variance of each user and of each POI's
/// category. Entities with no check-ins in `ds` get variance 0.
pub fn regularizer_vectors(ds: &Dataset, lambda: f64) -> RegularizerVectors {
    let range = MonthRange::of(ds);
    let sigma2_u: Vec<f64> = user_month_counts(ds, range).iter().map(|c| shares_variance(c)).collect();
    let (keys, poi_slot) = category_slots(ds);
    let cat_var: Vec<f64> = category_month_counts(ds, range, &poi_slot, keys.len())
        .iter()
        .map(|c| shares_variance(c))
        .collect();
    let sigma2_v = poi_slot.iter().map(|&s| cat_var[s]).collect();
    RegularizerVectors::from_variances(lambda, sigma2_u, sigma2_v)
}

/// Average ranks (1-based), ties share the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in correlation input".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    /// Categories shown in the popularity-over-time table.
    pub top_categories: usize,
    /// Entries listed at each end of the variance spectrum.
    pub extremes: usize,
    /// Users below this many check-ins are left out of the most-variant list.
    pub min_checkins_most_variant: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            top_categories: 8,
            extremes: 5,
            min_checkins_most_variant: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub pois: usize,
    pub checkins: usize,
    pub avg_pois_per_user: f64,
    pub avg_users_per_poi: f64,
    /// Fraction of check-ins on (user, POI) pairs visited more than once.
    pub multiple_checkin_share: f64,
    /// Distinct (user, POI) pairs over `users * pois`.
    pub density: f64,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> DatasetSummary {
        let visits = ds.visit_counts();
        let pairs: usize = visits.iter().map(Vec::len).sum();
        let multiple: u64 = visits
            .iter()
            .flatten()
            .filter(|(_, c)| *c >= 2)
            .map(|&(_, c)| c as u64)
            .sum();
        let (n, m) = (ds.n_users(), ds.n_pois());
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
        DatasetSummary {
            users: n,
            pois: m,
            checkins: ds.len(),
            avg_pois_per_user: ratio(pairs as f64, n as f64),
            avg_users_per_poi: ratio(pairs as f64, m as f64),
            multiple_checkin_share: ratio(multiple as f64, ds.len() as f64),
            density: ratio(pairs as f64, n as f64 * m as f64),
        }
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "users {}", self.users)?;
        writeln!(f, "POIs {}", self.pois)?;
        writeln!(f, "check-ins {}", self.checkins)?;
        writeln!(f, "Avg. POIs per user {:.3}", self.avg_pois_per_user)?;
        writeln!(f, "Avg. users per POI {:.2}", self.avg_users_per_poi)?;
        writeln!(f, "multiple check-ins {:.2}%", self.multiple_checkin_share * 100.0)?;
        write!(f, "density {:.4}", self.density)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceEntry {
    pub owner: String,
    pub variance: f64,
    pub total_count: usize,
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserCheckinMix {
    pub user_id: String,
    pub single: usize,
    pub multiple: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlations {
    /// Per-user monthly variance vs check-in count.
    pub user_variance_vs_quantity: Option<f64>,
    /// Per-category monthly variance vs category check-in count.
    pub category_variance_vs_popularity: Option<f64>,
    /// Per-user check-in count vs share of multiple check-ins.
    pub checkins_vs_multiple_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub summary: DatasetSummary,
    pub months: Vec<YearMonth>,
    pub monthly_totals: Vec<usize>,
    /// `(category, share of that month's check-ins)` per top category.
    pub category_popularity: Vec<(String, Vec<f64>)>,
    pub least_variant_users: Vec<VarianceEntry>,
    pub most_variant_users: Vec<VarianceEntry>,
    pub least_variant_categories: Vec<VarianceEntry>,
    pub most_variant_categories: Vec<VarianceEntry>,
    pub user_mix: Vec<UserCheckinMix>,
    pub correlations: Correlations,
}

fn extremes(
    entries: &[(String, f64, usize, Vec<f64>)],
    keep: impl Fn(usize) -> bool,
    count: usize,
    most: bool,
) -> Vec<VarianceEntry> {
    let mut idx: Vec<usize> = (0..entries.len()).filter(|&k| keep(entries[k].2)).collect();
    // Stable sort keeps index order among equal variances.
    idx.sort_by(|&a, &b| {
        let ord = entries[a].1.total_cmp(&entries[b].1);
        if most {
            ord.reverse()
        } else {
            ord
        }
    });
    idx.into_iter()
        .take(count)
        .map(|k| VarianceEntry {
            owner: entries[k].0.clone(),
            variance: entries[k].1,
            total_count: entries[k].2,
            shares: entries[k].3.clone(),
        })
        .collect()
}

pub fn analysis_report(ds: &Dataset, opts: &AnalysisOptions) -> AnalysisReport {
    let summary = DatasetSummary::of(ds);
    let range = MonthRange::of(ds);
    let months: Vec<YearMonth> = range.map(|r| r.months().collect()).unwrap_or_default();

    let mut monthly_totals = vec![0usize; months.len()];
    if let Some(r) = range {
        for c in ds.checkins() {
            monthly_totals[r.slot(c.timestamp)] += 1;
        }
    }

    let shares_of = |counts: &[usize]| -> Vec<f64> {
        let total: usize = counts.iter().sum();
        counts
            .iter()
            .map(|&c| if total > 0 { c as f64 / total as f64 } else { 0.0 })
            .collect()
    };

    let user_counts = user_month_counts(ds, range);
    let user_entries: Vec<(String, f64, usize, Vec<f64>)> = user_counts
        .iter()
        .enumerate()
        .map(|(i, c)| (ds.user_id(i).to_string(), shares_variance(c), c.iter().sum(), shares_of(c)))
        .collect();

    let (keys, poi_slot) = category_slots(ds);
    let cat_counts = category_month_counts(ds, range, &poi_slot, keys.len());
    let cat_entries: Vec<(String, f64, usize, Vec<f64>)> = keys
        .iter()
        .zip(&cat_counts)
        .map(|(k, c)| (ds.category_name(k), shares_variance(c), c.iter().sum(), shares_of(c)))
        .collect();

    let mut by_popularity: Vec<usize> = (0..keys.len()).collect();
    by_popularity.sort_by(|&a, &b| cat_entries[b].2.cmp(&cat_entries[a].2));
    let category_popularity = by_popularity
        .iter()
        .take(opts.top_categories)
        .map(|&k| {
            let per_month = cat_counts[k]
                .iter()
                .zip(&monthly_totals)
                .map(|(&c, &t)| if t > 0 { c as f64 / t as f64 } else { 0.0 })
                .collect();
            (cat_entries[k].0.clone(), per_month)
        })
        .collect();

    let active = |c: usize| c > 0;
    let least_variant_users = extremes(&user_entries, active, opts.extremes, false);
    let most_variant_users = extremes(
        &user_entries,
        |c| c > 0 && c >= opts.min_checkins_most_variant,
        opts.extremes,
        true,
    );
    let least_variant_categories = extremes(&cat_entries, active, opts.extremes, false);
    let most_variant_categories = extremes(&cat_entries, active, opts.extremes, true);

    let visits = ds.visit_counts();
    let user_mix: Vec<UserCheckinMix> = visits
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let single = v.iter().filter(|(_, c)| *c == 1).count();
            let multiple = v.iter().filter(|(_, c)| *c >= 2).map(|&(_, c)| c as usize).sum();
            UserCheckinMix {
                user_id: ds.user_id(i).to_string(),
                single,
                multiple,
            }
        })
        .collect();

    let (uv, uq): (Vec<f64>, Vec<f64>) = user_entries
        .iter()
        .filter(|e| e.2 > 0)
        .map(|e| (e.1, e.2 as f64))
        .unzip();
    let (cv, cp): (Vec<f64>, Vec<f64>) = cat_entries
        .iter()
        .filter(|e| e.2 > 0)
        .map(|e| (e.1, e.2 as f64))
        .unzip();
    let (tq, ms): (Vec<f64>, Vec<f64>) = user_mix
        .iter()
        .filter(|u| u.single + u.multiple > 0)
        .map(|u| {
            let total = (u.single + u.multiple) as f64;
            (total, u.multiple as f64 / total)
        })
        .unzip();

    AnalysisReport {
        summary,
        months,
        monthly_totals,
        category_popularity,
        least_variant_users,
        most_variant_users,
        least_variant_categories,
        most_variant_categories,
        user_mix,
        correlations: Correlations {
            user_variance_vs_quantity: spearman(&uv, &uq).ok(),
            category_variance_vs_popularity: spearman(&cv, &cp).ok(),
            checkins_vs_multiple_share: spearman(&tq, &ms).ok(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CheckinRecord;

    const MONTH: i64 = 31 * 86_400;
    // 2010-01-15T00:00:00Z
    const JAN_2010: i64 = 1_263_513_600;

    fn rec(u: &str, p: &str, cat: Option<&str>, t: i64) -> CheckinRecord {
        CheckinRecord {
            user_id: u.into(),
            poi_id: p.into(),
            timestamp: t,
            lat: 0.0,
            lon: 0.0,
            category: cat.map(str::to_string),
        }
    }

    #[test]
    fn year_month_roundtrip() {
        let ym = YearMonth::from_timestamp(JAN_2010);
        assert_eq!((ym.year, ym.month), (2010, 1));
        assert_eq!(YearMonth::from_ordinal(ym.ordinal()), ym);
        assert_eq!(YearMonth::from_ordinal(ym.ordinal() + 11).to_string(), "2010-12");
        assert_eq!(YearMonth::from_ordinal(ym.ordinal() + 12).to_string(), "2011-01");
    }

    #[test]
    fn single_month_series() {
        let ds = Dataset::from_records(vec![
            rec("a", "p", None, JAN_2010),
            rec("a", "p", None, JAN_2010 + 100),
            rec("b", "p", None, JAN_2010 + 3 * MONTH),
        ])
        .unwrap();
        let s = monthly_series(&ds, SeriesOwner::User(0)).unwrap();
        let shares: Vec<f64> = s.shares().collect();
        assert_eq!(shares, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.total_count, 2);
    }

    #[test]
    fn uniform_series_has_zero_variance() {
        let recs = (0..4).map(|k| rec("a", "p", Some("Cafe"), JAN_2010 + k * MONTH)).collect::<Vec<_>>();
        let ds = Dataset::from_records(recs).unwrap();
        let s = monthly_series(&ds, SeriesOwner::Category(CategoryKey::Named("Cafe".into()))).unwrap();
        assert!(s.shares().all(|x| x == 0.25));
        assert_eq!(activity_variance(&s).unwrap(), 0.0);
    }

    #[test]
    fn two_bin_variance() {
        let ds = Dataset::from_records(vec![
            rec("a", "p", None, JAN_2010),
            rec("b", "p", None, JAN_2010 + MONTH),
        ])
        .unwrap();
        let s = monthly_series(&ds, SeriesOwner::User(0)).unwrap();
        assert_eq!(activity_variance(&s).unwrap(), 0.25);
    }

    #[test]
    fn unknown_owner_and_empty_series() {
        let ds = Dataset::from_records(vec![rec("a", "p", None, JAN_2010)]).unwrap();
        assert!(monthly_series(&ds, SeriesOwner::User(3)).is_err());
        assert!(monthly_series(&ds, SeriesOwner::Category(CategoryKey::Named("x".into()))).is_err());
        let empty = MonthlySeries {
            owner: SeriesOwner::User(0),
            bins: BTreeMap::new(),
            total_count: 0,
        };
        assert!(activity_variance(&empty).is_err());
    }

    #[test]
    fn coefficient_values() {
        assert_eq!(regularizer_coefficient(0.0, 1.0), std::f64::consts::LN_2);
        // 1e-4 * ln(1 + e^-0.25), evaluated independently.
        assert!((regularizer_coefficient(0.25, 1e-4) - 5.759_394_198_788_437e-5).abs() < 1e-18);
        assert!(regularizer_coefficient(50.0, 1.0) < 1e-20);
        assert!(regularizer_coefficient(50.0, 1.0) > 0.0);
    }

    #[test]
    fn regularizer_uses_categories() {
        let ds = Dataset::from_records(vec![
            rec("a", "p1", Some("Bar"), JAN_2010),
            rec("a", "p2", Some("Bar"), JAN_2010 + MONTH),
            rec("b", "p3", None, JAN_2010),
        ])
        .unwrap();
        let reg = regularizer_vectors(&ds, 1.0);
        // Bar spans both months evenly; p3 is its own category, all in month one.
        assert_eq!(reg.sigma2_v()[0], 0.0);
        assert_eq!(reg.sigma2_v()[1], 0.0);
        assert_eq!(reg.sigma2_v()[2], 0.25);
        assert_eq!(reg.sigma2_u(), &[0.0, 0.25]);
        assert_eq!(reg.lambda_u()[0], std::f64::consts::LN_2);
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman(&x, &y[..3]).is_err());
        assert!(matches!(
            spearman(&x, &[1.0; 4]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn summary_counts() {
        let ds = Dataset::from_records(vec![
            rec("a", "p1", None, 0),
            rec("a", "p1", None, 1),
            rec("a", "p2", None, 2),
            rec("b", "p2", None, 3),
        ])
        .unwrap();
        let s = DatasetSummary::of(&ds);
        assert_eq!((s.users, s.pois, s.checkins), (2, 2, 4));
        assert_eq!(s.avg_pois_per_user, 1.5);
        assert_eq!(s.avg_users_per_poi, 1.5);
        assert_eq!(s.multiple_checkin_share, 0.5);
        assert_eq!(s.density, 0.75);
    }
}

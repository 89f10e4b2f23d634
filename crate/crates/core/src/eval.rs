//! Top-k recommendation and ranking metrics.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, SplitDataset};
use crate::error::{Error, Result};
use crate::model::{dot, Checkpoint, LatentModel};

/// Graded relevance of test POIs: 2 for repeat visits, 1 for a single visit.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceLabels {
    per_user: Vec<Vec<(usize, u8)>>,
}

impl RelevanceLabels {
    pub fn from_dataset(test: &Dataset) -> Self {
        let per_user = test
            .visit_counts()
            .into_iter()
            .map(|row| row.into_iter().map(|(j, c)| (j, if c >= 2 { 2 } else { 1 })).collect())
            .collect();
        RelevanceLabels { per_user }
    }

    /// Labels from explicit per-user `(poi, relevance)` lists.
    pub fn from_lists(mut per_user: Vec<Vec<(usize, u8)>>) -> Self {
        for row in &mut per_user {
            row.sort_unstable();
            row.retain(|&(_, r)| r > 0);
        }
        RelevanceLabels { per_user }
    }

    pub fn n_users(&self) -> usize {
        self.per_user.len()
    }

    /// Sorted `(poi, relevance)` pairs with nonzero relevance.
    pub fn user(&self, i: usize) -> &[(usize, u8)] {
        &self.per_user[i]
    }

    pub fn rel(&self, i: usize, j: usize) -> u8 {
        relevance(&self.per_user[i], j)
    }
}

fn relevance(labels: &[(usize, u8)], j: usize) -> u8 {
    labels
        .binary_search_by_key(&j, |&(p, _)| p)
        .map(|at| labels[at].1)
        .unwrap_or(0)
}

/// Highest-scoring POIs for user `i`, skipping `excluded` (sorted ascending).
/// Ties go to the smaller POI index.
pub fn recommend(model: &LatentModel, i: usize, excluded: &[usize], k: usize) -> Result<Vec<(usize, f64)>> {
    if i >= model.n_users() {
        return Err(Error::OutOfRange {
            what: "user",
            index: i,
            size: model.n_users(),
        });
    }
    let u = model.u().col(i);
    let mut scored: Vec<(usize, f64)> = (0..model.n_pois())
        .filter(|j| excluded.binary_search(j).is_err())
        .map(|j| (j, dot(u, model.v().col(j))))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| rank_order(*a, *b);
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    Ok(scored)
}

/// Fraction of the first `k` recommendations with positive relevance.
pub fn precision_at_k(recs: &[usize], labels: &[(usize, u8)], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let hits = recs.iter().take(k).filter(|&&j| relevance(labels, j) > 0).count();
    Ok(hits as f64 / k as f64)
}

fn gain(rel: u8) -> f64 {
    f64::from((1u32 << rel) - 1)
}

fn discount(position: usize) -> f64 {
    (position as f64 + 2.0).log2()
}

/// Normalized DCG with gain `2^rel - 1`. `Ok(None)` when the ideal DCG is
/// zero, meaning the user has nothing relevant and should be skipped.
pub fn ndcg_at_k(recs: &[usize], labels: &[(usize, u8)], k: usize) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let dcg: f64 = recs
        .iter()
        .take(k)
        .enumerate()
        .map(|(p, &j)| gain(relevance(labels, j)) / discount(p))
        .sum();
    let mut ideal: Vec<u8> = labels.iter().map(|&(_, r)| r).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(p, &r)| gain(r) / discount(p))
        .sum();
    if idcg == 0.0 {
        return Ok(None);
    }
    Ok(Some(dcg / idcg))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    /// Rank POIs the user visited in training too.
    pub include_train_pois: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: vec![5, 10, 20],
            include_train_pois: false,
        }
    }
}

impl EvalOptions {
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.ks.iter().map(|k| format!("Prec@{k}")).collect();
        names.extend(self.ks.iter().map(|k| format!("nDCG@{k}")));
        names
    }

    fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidArgument("k values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserMetrics {
    pub user: usize,
    /// Same order as [`EvalOptions::metric_names`].
    pub values: Vec<f64>,
}

/// Metrics of one model over the evaluated users.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub evaluated_users: usize,
    pub skipped_users: usize,
    #[serde(skip)]
    pub per_user: Vec<UserMetrics>,
}

impl RunMetrics {
    pub fn mean(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|at| self.means[at])
    }
}

/// Evaluate one model. Users without test check-ins are skipped.
pub fn evaluate_model(model: &LatentModel, train: &Dataset, test: &Dataset, opts: &EvalOptions) -> Result<RunMetrics> {
    opts.validate()?;
    if model.n_users() != test.n_users() || model.n_pois() != test.n_pois() {
        return Err(Error::Incompatible(format!(
            "model is {}x{}, dataset is {}x{}",
            model.n_users(),
            model.n_pois(),
            test.n_users(),
            test.n_pois()
        )));
    }
    let labels = RelevanceLabels::from_dataset(test);
    let train_visits = train.visit_counts();
    let kmax = *opts.ks.iter().max().expect("non-empty");
    let per_user: Vec<Option<UserMetrics>> = (0..model.n_users())
        .into_par_iter()
        .map(|i| -> Result<Option<UserMetrics>> {
            let lab = labels.user(i);
            if lab.is_empty() {
                return Ok(None);
            }
            let excluded: Vec<usize> = if opts.include_train_pois {
                Vec::new()
            } else {
                train_visits.get(i).map(|r| r.iter().map(|&(j, _)| j).collect()).unwrap_or_default()
            };
            let recs: Vec<usize> = recommend(model, i, &excluded, kmax)?.into_iter().map(|(j, _)| j).collect();
            let mut values = Vec::with_capacity(2 * opts.ks.len());
            for &k in &opts.ks {
                values.push(precision_at_k(&recs, lab, k)?);
            }
            for &k in &opts.ks {
                values.push(ndcg_at_k(&recs, lab, k)?.unwrap_or(0.0));
            }
            Ok(Some(UserMetrics { user: i, values }))
        })
        .collect::<Result<_>>()?;
    let skipped_users = per_user.iter().filter(|r| r.is_none()).count();
    let per_user: Vec<UserMetrics> = per_user.into_iter().flatten().collect();
    let names = opts.metric_names();
    let mut means = vec![0.0; names.len()];
    for row in &per_user {
        for (m, v) in means.iter_mut().zip(&row.values) {
            *m += v;
        }
    }
    if !per_user.is_empty() {
        for m in &mut means {
            *m /= per_user.len() as f64;
        }
    }
    Ok(RunMetrics {
        names,
        means,
        evaluated_users: per_user.len(),
        skipped_users,
        per_user,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: String,
    pub runs: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across runs.
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RunMetadata {
    pub config_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub checkpoint_digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub metrics: Vec<MetricSummary>,
    pub evaluated_users: usize,
    pub skipped_users: usize,
    pub include_train_pois: bool,
    pub metadata: RunMetadata,
    #[serde(skip)]
    pub runs: Vec<RunMetrics>,
}

/// Evaluate each checkpoint on the split's test view and aggregate over runs.
pub fn evaluate(checkpoints: &[Checkpoint], split: &SplitDataset, opts: &EvalOptions) -> Result<EvalReport> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("no checkpoints to evaluate".into()));
    }
    let mut runs = Vec::with_capacity(checkpoints.len());
    for c in checkpoints {
        c.check_compatible(&split.test)?;
        runs.push(evaluate_model(&c.model, &split.train, &split.test, opts)?);
    }
    let names = opts.metric_names();
    let metrics = names
        .iter()
        .enumerate()
        .map(|(at, name)| {
            let values: Vec<f64> = runs.iter().map(|r| r.means[at]).collect();
            let (mean, stddev) = mean_and_stddev(&values);
            MetricSummary {
                name: name.clone(),
                runs: values,
                mean,
                stddev,
            }
        })
        .collect();
    Ok(EvalReport {
        ks: opts.ks.clone(),
        metrics,
        evaluated_users: runs[0].evaluated_users,
        skipped_users: runs[0].skipped_users,
        include_train_pois: opts.include_train_pois,
        metadata: RunMetadata {
            config_hash: None,
            seeds: Vec::new(),
            checkpoint_digests: checkpoints.iter().map(Checkpoint::digest).collect(),
        },
        runs,
    })
}

pub fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    /// Aligned plain-text table, one metric per row.
    pub fn to_table(&self) -> String {
        let width = self.metrics.iter().map(|m| m.name.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}  {:>8}  {:>8}", "metric", "mean", "stddev");
        for r in 0..self.runs.len() {
            let _ = write!(out, "  {:>8}", format!("run{}", r + 1));
        }
        out.push('\n');
        for m in &self.metrics {
            let _ = write!(out, "{:<width$}  {:>8.4}  {:>8.4}", m.name, m.mean, m.stddev);
            for v in &m.runs {
                let _ = write!(out, "  {v:>8.4}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "users evaluated: {}, skipped (no test check-ins): {}",
            self.evaluated_users, self.skipped_users
        );
        out
    }

    /// `run,user_id,<metric>...` rows for every evaluated user.
    pub fn per_user_csv(&self, user_ids: &[String]) -> Result<Vec<u8>> {
        let err = |e: csv::Error| Error::InvalidArgument(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["run".to_string(), "user_id".to_string()];
        header.extend(self.metrics.iter().map(|m| m.name.clone()));
        w.write_record(&header).map_err(err)?;
        for (r, run) in self.runs.iter().enumerate() {
            for row in &run.per_user {
                let mut rec = vec![(r + 1).to_string(), user_ids[row.user].clone()];
                rec.extend(row.values.iter().map(f64::to_string));
                w.write_record(&rec).map_err(err)?;
            }
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Total order used when ranking: higher score first, then lower index.
pub fn rank_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Factors;

    fn model_1d(user: f64, pois: &[f64]) -> LatentModel {
        LatentModel::new(
            Factors::from_column_major(1, 1, vec![user]),
            Factors::from_column_major(1, pois.len(), pois.to_vec()),
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn recommend_orders_and_breaks_ties() {
        let m = model_1d(1.0, &[0.5, 2.0, 0.5, -1.0, 2.0]);
        let recs: Vec<usize> = recommend(&m, 0, &[], 5).unwrap().into_iter().map(|r| r.0).collect();
        assert_eq!(recs, vec![1, 4, 0, 2, 3]);
        let top2: Vec<usize> = recommend(&m, 0, &[1], 2).unwrap().into_iter().map(|r| r.0).collect();
        assert_eq!(top2, vec![4, 0]);
        assert_eq!(recommend(&m, 0, &[], 50).unwrap().len(), 5);
        assert!(recommend(&m, 1, &[], 1).is_err());
    }

    #[test]
    fn precision_counts_hits_over_k() {
        let labels = [(1, 1), (3, 2)];
        assert_eq!(precision_at_k(&[1, 2, 3, 4, 5], &labels, 5).unwrap(), 0.4);
        assert_eq!(precision_at_k(&[1], &labels, 2).unwrap(), 0.5);
        assert!(precision_at_k(&[1], &labels, 0).is_err());
    }

    #[test]
    fn ndcg_single_hit_at_second_position() {
        let v = ndcg_at_k(&[7, 3], &[(3, 1)], 2).unwrap().unwrap();
        assert_eq!(v, 0.6309297535714575);
        assert_eq!(ndcg_at_k(&[3, 7], &[(3, 2)], 2).unwrap(), Some(1.0));
    }

    #[test]
    fn ndcg_without_relevant_items_is_skipped() {
        assert_eq!(ndcg_at_k(&[1, 2], &[], 2).unwrap(), None);
    }

    #[test]
    fn labels_from_counts() {
        let ds = Dataset::from_records(vec![
            rec("u", "a", 1),
            rec("u", "a", 2),
            rec("u", "b", 3),
            rec("v", "b", 4),
        ])
        .unwrap();
        let l = RelevanceLabels::from_dataset(&ds);
        assert_eq!(l.rel(0, 0), 2);
        assert_eq!(l.rel(0, 1), 1);
        assert_eq!(l.rel(1, 0), 0);
    }

    fn rec(u: &str, p: &str, t: i64) -> crate::data::CheckinRecord {
        crate::data::CheckinRecord {
            user_id: u.into(),
            poi_id: p.into(),
            timestamp: t,
            lat: 0.0,
            lon: if p == "a" { 0.0 } else { 1.0 },
            category: None,
        }
    }

    #[test]
    fn population_stddev() {
        let (m, s) = mean_and_stddev(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_and_stddev(&[5.0]).1, 0.0);
    }
}

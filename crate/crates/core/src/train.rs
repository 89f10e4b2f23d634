//! The joint two-phase alternating gradient-descent loop.

use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_interactions, CandidateUniverse, InteractionStore, SplitDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, EvalOptions};
use crate::geo::{GeoIndex, InfluenceCache, DEFAULT_CACHE_ENTRIES};
use crate::model::{Factors, LatentModel, LossBreakdown, Normalizer, Phase1, Phase2};
use crate::temporal::{regularizer_vectors, RegularizerVectors};

/// Standard deviation of the initial factor entries.
pub const INIT_STD: f64 = 0.01;

/// Which parts of the objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Joint,
    /// Skip the repeat-visit phase updates.
    #[serde(alias = "phase1")]
    Phase1Only,
    /// Uniform `lambda` shrinkage instead of variance-derived coefficients.
    #[serde(alias = "novar")]
    NoVar,
    /// Geographical influence off (`alpha = 0`).
    #[serde(alias = "nogeo")]
    NoGeo,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Mode::Joint),
            "phase1" | "phase1_only" => Ok(Mode::Phase1Only),
            "novar" | "no_var" => Ok(Mode::NoVar),
            "nogeo" | "no_geo" => Ok(Mode::NoGeo),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub d: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub max_iter: usize,
    /// Absolute tolerance on the change of the joint objective.
    pub epsilon: f64,
    pub seed: u64,
    pub mode: Mode,
    pub normalizer: Normalizer,
    /// Irrelevant POIs sampled per user and iteration; `None` uses all of them.
    pub negative_samples: Option<usize>,
    pub universe: CandidateUniverse,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 80,
            gamma: 1e-4,
            lambda: 1e-4,
            alpha: 0.5,
            max_iter: 500,
            epsilon: 1e-3,
            seed: 0,
            mode: Mode::Joint,
            normalizer: Normalizer::PairCount,
            negative_samples: None,
            universe: CandidateUniverse::AllPois,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.d < 1 {
            return bad("d must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be non-negative");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.negative_samples == Some(0) {
            return bad("negative_samples must be positive when set");
        }
        Ok(())
    }

    /// `alpha` after applying the mode.
    pub fn effective_alpha(&self) -> f64 {
        match self.mode {
            Mode::NoGeo => 0.0,
            _ => self.alpha,
        }
    }
}

/// Gaussian(0, 0.01) factors from `cfg.seed`; U is filled before V.
pub fn init_model(cfg: &TrainConfig, n_users: usize, n_pois: usize) -> Result<LatentModel> {
    if cfg.d < 1 {
        return Err(Error::Config("d must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut draw = |cols: usize| {
        let data = (0..cfg.d * cols).map(|_| normal.sample(&mut rng)).collect();
        Factors::from_column_major(cfg.d, cols, data)
    };
    let u = draw(n_users);
    let v = draw(n_pois);
    LatentModel::new(u, v, cfg.effective_alpha(), cfg.lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: usize,
    pub theta: f64,
    pub phase1: f64,
    pub phase2: f64,
    pub millis: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTrace {
    pub initial: LossBreakdown,
    pub records: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl TrainTrace {
    /// `t,theta,phase1,phase2` rows. Deterministic for a given run.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,theta,phase1,phase2\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{},{}\n", r.t, r.theta, r.phase1, r.phase2));
        }
        s
    }

    /// `t,millis` rows: wall time since training started.
    pub fn timings_csv(&self) -> String {
        let mut s = String::from("t,millis\n");
        for r in &self.records {
            s.push_str(&format!("{},{}\n", r.t, r.millis));
        }
        s
    }
}

struct NegativeSampler {
    size: usize,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    fn new(size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Separate stream from the one used for initialization.
        rng.set_stream(1);
        NegativeSampler { size, rng }
    }

    fn draw(&mut self, store: &InteractionStore) -> Vec<Vec<usize>> {
        (0..store.n_users())
            .map(|i| {
                let minus = store.l_minus(i);
                if minus.len() <= self.size {
                    return minus;
                }
                let mut picked: Vec<usize> = sample(&mut self.rng, minus.len(), self.size)
                    .into_iter()
                    .map(|idx| minus[idx])
                    .collect();
                picked.sort_unstable();
                picked
            })
            .collect()
    }
}

fn breakdown(
    model: &LatentModel,
    store: &InteractionStore,
    cache: &InfluenceCache,
    normalizer: Normalizer,
    negatives: Option<&[Vec<usize>]>,
) -> LossBreakdown {
    let p1 = match negatives {
        Some(n) => Phase1::new(store, cache, normalizer).with_negatives(n).loss(model),
        None => Phase1::new(store, cache, normalizer).loss(model),
    };
    let p2 = Phase2::new(store, normalizer).loss(model);
    LossBreakdown::new(p1, p2)
}

fn check_finite(model: &LatentModel, b: &LossBreakdown, iteration: usize) -> Result<()> {
    if !b.theta.is_finite() {
        return Err(Error::Divergence {
            iteration,
            value: b.theta,
        });
    }
    if !model.u().is_finite() || !model.v().is_finite() {
        return Err(Error::Divergence {
            iteration,
            value: f64::NAN,
        });
    }
    Ok(())
}

/// Run the joint optimization until the objective changes by at most
/// `epsilon` or `max_iter` iterations have run.
///
/// Each iteration updates all user vectors, then all POI vectors against the
/// updated users, for the phase-1 objective; then the same two steps for the
/// phase-2 objective (skipped in [`Mode::Phase1Only`]). The recorded
/// objective excludes the regularizer.
pub fn train(
    cfg: &TrainConfig,
    store: &InteractionStore,
    geo: &GeoIndex,
    reg: &RegularizerVectors,
) -> Result<(LatentModel, TrainTrace)> {
    cfg.validate()?;
    let (n, m) = (store.n_users(), store.n_pois());
    if geo.len() != m || reg.lambda_u().len() != n || reg.lambda_v().len() != m {
        return Err(Error::InvalidArgument(format!(
            "size mismatch: store {n}x{m}, geo {}, regularizer {}x{}",
            geo.len(),
            reg.lambda_u().len(),
            reg.lambda_v().len()
        )));
    }
    let uniform;
    let reg = match cfg.mode {
        Mode::NoVar => {
            uniform = RegularizerVectors::uniform(cfg.lambda, n, m);
            &uniform
        }
        _ => reg,
    };
    let alpha = cfg.effective_alpha();
    let cache = InfluenceCache::build(geo, alpha, DEFAULT_CACHE_ENTRIES);
    let mut model = init_model(cfg, n, m)?;

    let mut sampler = cfg.negative_samples.map(|s| NegativeSampler::new(s, cfg.seed));
    // With sampling, the objective is tracked on one fixed sample.
    let eval_negatives = sampler.as_mut().map(|s| s.draw(store));

    let start = Instant::now();
    let initial = breakdown(&model, store, &cache, cfg.normalizer, eval_negatives.as_deref());
    check_finite(&model, &initial, 0)?;
    let mut theta_new = initial.theta;
    let mut theta_old = theta_new / 2.0;
    let mut records = Vec::new();
    let mut t = 0;

    while (theta_new - theta_old).abs() > cfg.epsilon && t < cfg.max_iter {
        t += 1;
        let step_negatives = sampler.as_mut().map(|s| s.draw(store));

        let phase1 = match &step_negatives {
            Some(negs) => Phase1::new(store, &cache, cfg.normalizer).with_negatives(negs),
            None => Phase1::new(store, &cache, cfg.normalizer),
        };
        let gu = phase1.grad_u(&model, reg);
        model.u_mut().descend(&gu, cfg.gamma);
        let gv = phase1.grad_v(&model, reg);
        model.v_mut().descend(&gv, cfg.gamma);

        if cfg.mode != Mode::Phase1Only {
            let phase2 = Phase2::new(store, cfg.normalizer);
            let gu = phase2.grad_u(&model, reg);
            model.u_mut().descend(&gu, cfg.gamma);
            let gv = phase2.grad_v(&model, reg);
            model.v_mut().descend(&gv, cfg.gamma);
        }

        let b = breakdown(&model, store, &cache, cfg.normalizer, eval_negatives.as_deref());
        check_finite(&model, &b, t)?;
        theta_old = theta_new;
        theta_new = b.theta;
        records.push(TraceRecord {
            t,
            theta: b.theta,
            phase1: b.phase1,
            phase2: b.phase2,
            millis: start.elapsed().as_millis(),
        });
    }

    let converged = (theta_new - theta_old).abs() <= cfg.epsilon;
    Ok((
        model,
        TrainTrace {
            initial,
            records,
            converged,
            iterations: t,
        },
    ))
}

/// Train on the training split with everything derived from it.
pub fn train_on_split(cfg: &TrainConfig, split: &SplitDataset) -> Result<(LatentModel, TrainTrace)> {
    let store = build_interactions(&split.train, cfg.universe)?;
    let reg = regularizer_vectors(&split.train, cfg.lambda);
    train(cfg, &store, &split.train.geo_index(), &reg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: usize,
    pub config: TrainConfig,
    /// Validation nDCG@5 per grid entry.
    pub scores: Vec<f64>,
}

/// Train every grid entry on the training split and keep the one with the
/// highest validation nDCG@5; ties go to the earliest entry.
pub fn select_hyperparameters(grid: &[TrainConfig], split: &SplitDataset) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let opts = EvalOptions {
        ks: vec![5],
        include_train_pois: false,
    };
    let scores = grid
        .par_iter()
        .map(|cfg| {
            let (model, _) = train_on_split(cfg, split)?;
            let metrics = evaluate_model(&model, &split.train, &split.validation, &opts)?;
            Ok(metrics.mean("nDCG@5").unwrap_or(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(Selection {
        best,
        config: grid[best].clone(),
        scores,
    })
}

//! The latent-factor model, both ranking objectives, and checkpoints.

mod checkpoint;
mod factors;
mod objective;

use serde::Serialize;

use crate::data::InteractionStore;
use crate::error::{Error, Result};
use crate::geo::{GeoIndex, InfluenceCache};
use crate::temporal::RegularizerVectors;

pub use checkpoint::Checkpoint;
pub use factors::{dot, Factors};
pub use objective::{Normalizer, Phase1, Phase2};

/// User factors `U` (d x n) and POI factors `V` (d x m). The score of POI `j`
/// for user `i` is `u_i . v_j`; there are no bias terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    u: Factors,
    v: Factors,
    /// Geographical influence weight the model was trained with.
    alpha: f64,
    /// Regularization scale the model was trained with.
    lambda: f64,
}

impl LatentModel {
    pub fn new(u: Factors, v: Factors, alpha: f64, lambda: f64) -> Result<Self> {
        if u.dim() != v.dim() || u.dim() == 0 {
            return Err(Error::InvalidArgument(format!(
                "factor dimensions differ or are zero: {} vs {}",
                u.dim(),
                v.dim()
            )));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::InvalidArgument("non-finite factor entries".into()));
        }
        Ok(LatentModel { u, v, alpha, lambda })
    }

    pub fn d(&self) -> usize {
        self.u.dim()
    }

    pub fn n_users(&self) -> usize {
        self.u.cols()
    }

    pub fn n_pois(&self) -> usize {
        self.v.cols()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn u(&self) -> &Factors {
        &self.u
    }

    pub fn v(&self) -> &Factors {
        &self.v
    }

    pub fn u_mut(&mut self) -> &mut Factors {
        &mut self.u
    }

    pub fn v_mut(&mut self) -> &mut Factors {
        &mut self.v
    }

    pub fn score(&self, i: usize, j: usize) -> Result<f64> {
        self.check_user(i)?;
        self.check_poi(j)?;
        Ok(dot(self.u.col(i), self.v.col(j)))
    }

    /// Scores of every POI for user `i`.
    pub fn scores(&self, i: usize) -> Result<Vec<f64>> {
        self.check_user(i)?;
        let u = self.u.col(i);
        Ok((0..self.n_pois()).map(|j| dot(u, self.v.col(j))).collect())
    }

    fn check_user(&self, i: usize) -> Result<()> {
        if i >= self.n_users() {
            return Err(Error::OutOfRange {
                what: "user",
                index: i,
                size: self.n_users(),
            });
        }
        Ok(())
    }

    fn check_poi(&self, j: usize) -> Result<()> {
        if j >= self.n_pois() {
            return Err(Error::OutOfRange {
                what: "POI",
                index: j,
                size: self.n_pois(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub phase1: f64,
    pub phase2: f64,
    pub theta: f64,
}

impl LossBreakdown {
    pub fn new(phase1: f64, phase2: f64) -> Self {
        LossBreakdown {
            phase1,
            phase2,
            theta: phase1 + phase2,
        }
    }
}

fn uncached(geo: &GeoIndex, alpha: f64) -> InfluenceCache {
    InfluenceCache::build(geo, alpha, 0)
}

/// Score gap of a relevant over an irrelevant POI, divided by the influence
/// factor between them.
pub fn pairwise_delta(model: &LatentModel, i: usize, k: usize, j: usize, geo: &GeoIndex) -> Result<f64> {
    let gap = model.score(i, k)? - model.score(i, j)?;
    Ok(gap / geo.influence(k, j, model.alpha()))
}

/// Phase-1 objective with pair-count normalization over the full irrelevant sets.
pub fn phase1_loss(model: &LatentModel, store: &InteractionStore, geo: &GeoIndex) -> f64 {
    let cache = uncached(geo, model.alpha());
    Phase1::new(store, &cache, Normalizer::PairCount).loss(model)
}

/// Phase-1 gradients plus the `Lambda * x` regularizer terms.
pub fn phase1_gradients(
    model: &LatentModel,
    store: &InteractionStore,
    geo: &GeoIndex,
    reg: &RegularizerVectors,
) -> (Factors, Factors) {
    let cache = uncached(geo, model.alpha());
    let p = Phase1::new(store, &cache, Normalizer::PairCount);
    (p.grad_u(model, reg), p.grad_v(model, reg))
}

pub fn phase2_loss(model: &LatentModel, store: &InteractionStore) -> f64 {
    Phase2::new(store, Normalizer::PairCount).loss(model)
}

pub fn phase2_gradients(
    model: &LatentModel,
    store: &InteractionStore,
    reg: &RegularizerVectors,
) -> (Factors, Factors) {
    let p = Phase2::new(store, Normalizer::PairCount);
    (p.grad_u(model, reg), p.grad_v(model, reg))
}

pub fn loss_breakdown(model: &LatentModel, store: &InteractionStore, geo: &GeoIndex) -> LossBreakdown {
    LossBreakdown::new(phase1_loss(model, store, geo), phase2_loss(model, store))
}

/// `sum_i Lambda_i / 2 |u_i|^2 + sum_j Lambda_j / 2 |v_j|^2`, the energy whose
/// gradient is the regularizer term added to both phases.
pub fn regularizer_energy(model: &LatentModel, reg: &RegularizerVectors) -> f64 {
    let side = |f: &Factors, lam: &[f64]| -> f64 {
        (0..f.cols())
            .map(|c| 0.5 * lam[c] * dot(f.col(c), f.col(c)))
            .sum()
    };
    side(model.u(), reg.lambda_u()) + side(model.v(), reg.lambda_v())
}

/// Indicator (non-surrogate) violation counts for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactHeights {
    /// `(irrelevant POI, sum over relevant k with s_k <= s_j of 1 / G(k, j))`.
    pub heights: Vec<(usize, f64)>,
    /// `(repeat-visit POI, number of single-visit POIs scored at or above it)`.
    pub reverse_heights: Vec<(usize, usize)>,
}

pub fn exact_heights(model: &LatentModel, store: &InteractionStore, geo: &GeoIndex, i: usize) -> Result<ExactHeights> {
    let scores = model.scores(i)?;
    let alpha = model.alpha();
    let plus = store.l_plus(i);
    let heights = store
        .l_minus(i)
        .into_iter()
        .map(|j| {
            let h = plus
                .iter()
                .filter(|&&k| scores[k] <= scores[j])
                .map(|&k| 1.0 / geo.influence(k, j, alpha))
                .sum();
            (j, h)
        })
        .collect();
    let reverse_heights = store
        .l_star(i)
        .iter()
        .map(|&j| {
            let count = store
                .l_single(i)
                .iter()
                .filter(|&&k| scores[j] <= scores[k])
                .count();
            (j, count)
        })
        .collect();
    Ok(ExactHeights {
        heights,
        reverse_heights,
    })
}

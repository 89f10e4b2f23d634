//! Both pairwise objectives and their exact gradients.
//!
//! Each objective is a sum of per-user terms that depend on the user's scores
//! `s_j = u_i . v_j` only. A user's term therefore reduces to a loss value and
//! a sparse vector `c_i` of derivatives with respect to those scores, from
//! which `grad u_i = sum_j c_ij v_j` and `grad v_j = sum_i c_ij u_i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::factors::{axpy, dot, Factors};
use super::LatentModel;
use crate::data::InteractionStore;
use crate::geo::InfluenceCache;
use crate::temporal::RegularizerVectors;

/// How each user's pair sum is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// Number of pairs the sum ranges over.
    #[default]
    PairCount,
    /// Size of the preferred side (relevant POIs, or repeat-visit POIs).
    Positives,
    /// Size of the other side (irrelevant POIs, or single-visit POIs).
    Negatives,
    One,
}

impl Normalizer {
    fn value(self, positives: usize, negatives: usize) -> f64 {
        match self {
            Normalizer::PairCount => (positives * negatives) as f64,
            Normalizer::Positives => positives as f64,
            Normalizer::Negatives => negatives as f64,
            Normalizer::One => 1.0,
        }
    }
}

impl std::str::FromStr for Normalizer {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "pair_count" | "pair-count" => Ok(Normalizer::PairCount),
            "positives" => Ok(Normalizer::Positives),
            "negatives" => Ok(Normalizer::Negatives),
            "one" => Ok(Normalizer::One),
            other => Err(crate::Error::InvalidArgument(format!("unknown normalizer {other:?}"))),
        }
    }
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + exp(x))` without overflow.
#[inline]
pub(crate) fn logistic_neg(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// One user's contribution: loss and `d loss / d s_j` for each touched POI.
#[derive(Debug, Clone, Default)]
pub(crate) struct UserTerm {
    pub loss: f64,
    pub pois: Vec<usize>,
    pub coef: Vec<f64>,
}

pub(crate) trait PairObjective: Sync {
    fn user_term(&self, model: &LatentModel, i: usize) -> UserTerm;
    fn n_users(&self) -> usize;
}

/// Relevant POIs above irrelevant ones, each pair's score gap divided by the
/// geographical influence factor, squared-sum-of-logistic per negative.
pub struct Phase1<'a> {
    store: &'a InteractionStore,
    influence: &'a InfluenceCache,
    normalizer: Normalizer,
    negatives: Option<&'a [Vec<usize>]>,
}

impl<'a> Phase1<'a> {
    pub fn new(store: &'a InteractionStore, influence: &'a InfluenceCache, normalizer: Normalizer) -> Self {
        Phase1 {
            store,
            influence,
            normalizer,
            negatives: None,
        }
    }

    /// Restrict each user's irrelevant set to the given per-user subsets.
    pub fn with_negatives(mut self, negatives: &'a [Vec<usize>]) -> Self {
        assert_eq!(negatives.len(), self.store.n_users());
        self.negatives = Some(negatives);
        self
    }

    pub fn loss(&self, model: &LatentModel) -> f64 {
        total_loss(self, model)
    }

    pub fn grad_u(&self, model: &LatentModel, reg: &RegularizerVectors) -> Factors {
        grad_u(self, model, reg)
    }

    pub fn grad_v(&self, model: &LatentModel, reg: &RegularizerVectors) -> Factors {
        grad_v(self, model, reg)
    }
}

impl PairObjective for Phase1<'_> {
    fn n_users(&self) -> usize {
        self.store.n_users()
    }

    fn user_term(&self, model: &LatentModel, i: usize) -> UserTerm {
        let plus = self.store.l_plus(i);
        let owned;
        let minus: &[usize] = match self.negatives {
            Some(n) => &n[i],
            None => {
                owned = self.store.l_minus(i);
                &owned
            }
        };
        if plus.is_empty() || minus.is_empty() {
            return UserTerm::default();
        }
        let norm = self.normalizer.value(plus.len(), minus.len());
        let u = model.u().col(i);
        let v = model.v();
        let s_plus: Vec<f64> = plus.iter().map(|&k| dot(u, v.col(k))).collect();
        let mut c_plus = vec![0.0; plus.len()];
        let mut c_minus = vec![0.0; minus.len()];
        // Per-positive (1 / G, delta) for the current negative.
        let mut inv_g = vec![0.0; plus.len()];
        let mut delta = vec![0.0; plus.len()];
        let mut loss = 0.0;
        for (jn, &j) in minus.iter().enumerate() {
            let s_j = dot(u, v.col(j));
            let mut height = 0.0;
            for (kp, &k) in plus.iter().enumerate() {
                let ig = 1.0 / self.influence.get(k, j);
                let d = (s_plus[kp] - s_j) * ig;
                inv_g[kp] = ig;
                delta[kp] = d;
                height += softplus(-d);
            }
            loss += height * height;
            let scale = 2.0 * height / norm;
            let mut acc = 0.0;
            for kp in 0..plus.len() {
                let w = scale * logistic_neg(delta[kp]) * inv_g[kp];
                c_plus[kp] -= w;
                acc += w;
            }
            c_minus[jn] = acc;
        }
        let mut pois = Vec::with_capacity(plus.len() + minus.len());
        pois.extend_from_slice(plus);
        pois.extend_from_slice(minus);
        c_plus.extend(c_minus);
        UserTerm {
            loss: loss / norm,
            pois,
            coef: c_plus,
        }
    }
}

/// Repeat-visit POIs above single-visit ones; `ln(1 + surrogate count)` per
/// repeat-visit POI. No geographical factor.
pub struct Phase2<'a> {
    store: &'a InteractionStore,
    normalizer: Normalizer,
}

impl<'a> Phase2<'a> {
    pub fn new(store: &'a InteractionStore, normalizer: Normalizer) -> Self {
        Phase2 { store, normalizer }
    }

    pub fn loss(&self, model: &LatentModel) -> f64 {
        total_loss(self, model)
    }

    pub fn grad_u(&self, model: &LatentModel, reg: &RegularizerVectors) -> Factors {
        grad_u(self, model, reg)
    }

    pub fn grad_v(&self, model: &LatentModel, reg: &RegularizerVectors) -> Factors {
        grad_v(self, model, reg)
    }
}

impl PairObjective for Phase2<'_> {
    fn n_users(&self) -> usize {
        self.store.n_users()
    }

    fn user_term(&self, model: &LatentModel, i: usize) -> UserTerm {
        let star = self.store.l_star(i);
        let single = self.store.l_single(i);
        if star.is_empty() || single.is_empty() {
            return UserTerm::default();
        }
        let norm = self.normalizer.value(star.len(), single.len());
        let u = model.u().col(i);
        let v = model.v();
        let s_single: Vec<f64> = single.iter().map(|&k| dot(u, v.col(k))).collect();
        let mut c_star = vec![0.0; star.len()];
        let mut c_single = vec![0.0; single.len()];
        let mut gap = vec![0.0; single.len()];
        let mut loss = 0.0;
        for (js, &j) in star.iter().enumerate() {
            let s_j = dot(u, v.col(j));
            let mut count = 0.0;
            for (kp, &s_k) in s_single.iter().enumerate() {
                gap[kp] = s_j - s_k;
                count += softplus(-gap[kp]);
            }
            loss += count.ln_1p();
            let scale = 1.0 / (norm * (1.0 + count));
            let mut acc = 0.0;
            for kp in 0..single.len() {
                let w = scale * logistic_neg(gap[kp]);
                c_single[kp] += w;
                acc += w;
            }
            c_star[js] = -acc;
        }
        let mut pois = Vec::with_capacity(star.len() + single.len());
        pois.extend_from_slice(star);
        pois.extend_from_slice(single);
        c_star.extend(c_single);
        UserTerm {
            loss: loss / norm,
            pois,
            coef: c_star,
        }
    }
}

pub(crate) fn total_loss<O: PairObjective>(obj: &O, model: &LatentModel) -> f64 {
    let per_user: Vec<f64> = (0..obj.n_users())
        .into_par_iter()
        .map(|i| obj.user_term(model, i).loss)
        .collect();
    per_user.iter().sum()
}

pub(crate) fn grad_u<O: PairObjective>(obj: &O, model: &LatentModel, reg: &RegularizerVectors) -> Factors {
    let d = model.d();
    let mut grad = Factors::zeros(d, model.n_users());
    grad.as_mut_slice()
        .par_chunks_mut(d.max(1))
        .enumerate()
        .for_each(|(i, g)| {
            let term = obj.user_term(model, i);
            for (&j, &c) in term.pois.iter().zip(&term.coef) {
                axpy(c, model.v().col(j), g);
            }
            axpy(reg.lambda_u()[i], model.u().col(i), g);
        });
    grad
}

const USER_CHUNK: usize = 256;

pub(crate) fn grad_v<O: PairObjective>(obj: &O, model: &LatentModel, reg: &RegularizerVectors) -> Factors {
    let d = model.d();
    let m = model.n_pois();
    let mut grad = Factors::zeros(d, m);
    let threads = rayon::current_num_threads().max(1);
    let block = m.div_ceil(threads).max(1);
    let n = obj.n_users();
    let mut start = 0;
    while start < n {
        let end = (start + USER_CHUNK).min(n);
        let terms: Vec<UserTerm> = (start..end)
            .into_par_iter()
            .map(|i| obj.user_term(model, i))
            .collect();
        // Each POI block sums contributions in user order.
        grad.as_mut_slice()
            .par_chunks_mut(d.max(1) * block)
            .enumerate()
            .for_each(|(b, chunk)| {
                let lo = b * block;
                let hi = lo + chunk.len() / d.max(1);
                for (offset, term) in terms.iter().enumerate() {
                    let u = model.u().col(start + offset);
                    for (&j, &c) in term.pois.iter().zip(&term.coef) {
                        if j >= lo && j < hi {
                            let at = (j - lo) * d;
                            axpy(c, u, &mut chunk[at..at + d]);
                        }
                    }
                }
            });
        start = end;
    }
    for j in 0..m {
        let lam = reg.lambda_v()[j];
        let vj = model.v().col(j).to_vec();
        axpy(lam, &vj, grad.col_mut(j));
    }
    grad
}

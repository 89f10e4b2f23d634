use serde::{Deserialize, Serialize};

use super::{Checkin, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            validation: 0.10,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidArgument(format!("split ratios must be non-negative: {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// `(train, validation, test)` sizes for a user with `count` check-ins.
    pub fn sizes(&self, count: usize) -> (usize, usize, usize) {
        // The epsilon keeps products like 0.7 * 10 from flooring to 6.
        let floor = |r: f64| ((r * count as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(count);
        let validation = floor(self.validation).min(count - train);
        (train, validation, count - train - validation)
    }
}

/// Three views over the same index tables.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub ratios: SplitRatios,
}

/// Per-user chronological split: each user's check-ins are ordered by time
/// (stable on ties) and cut into leading train, middle validation, trailing
/// test segments. Each view keeps the parent's check-in order.
pub fn chronological_split(ds: &Dataset, ratios: SplitRatios) -> Result<SplitDataset> {
    ratios.validate()?;
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); ds.n_users()];
    for (idx, c) in ds.checkins().iter().enumerate() {
        per_user[c.user].push(idx);
    }
    // 0 = train, 1 = validation, 2 = test
    let mut part = vec![2u8; ds.len()];
    for idxs in per_user.iter_mut() {
        idxs.sort_by_key(|&idx| ds.checkins()[idx].timestamp);
        let (train, validation, _) = ratios.sizes(idxs.len());
        for (pos, &idx) in idxs.iter().enumerate() {
            part[idx] = if pos < train {
                0
            } else if pos < train + validation {
                1
            } else {
                2
            };
        }
    }
    let mut views: [Vec<Checkin>; 3] = Default::default();
    for (c, &p) in ds.checkins().iter().zip(&part) {
        views[p as usize].push(*c);
    }
    let [train, validation, test] = views;
    Ok(SplitDataset {
        train: ds.with_checkins(train),
        validation: ds.with_checkins(validation),
        test: ds.with_checkins(test),
        ratios,
    })
}

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Which unvisited POIs count as irrelevant for a user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CandidateUniverse {
    #[default]
    AllPois,
    /// Only POIs within `radius_km` of some POI the user visited.
    PerUserNeighborhood { radius_km: f64 },
}

#[derive(Debug, Clone, Default)]
struct UserSets {
    star: Vec<usize>,
    single: Vec<usize>,
    plus: Vec<usize>,
    /// Explicit irrelevant set; `None` means "every POI not in `plus`".
    minus: Option<Vec<usize>>,
    n_minus: usize,
    visits: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, Default)]
struct PoiSets {
    star: Vec<usize>,
    single: Vec<usize>,
    plus: Vec<usize>,
    minus: Option<Vec<usize>>,
}

/// Per-user relevance partition of POIs, and its per-POI transpose.
///
/// For user `i`: `L*` = POIs visited at least twice, `L1+` = POIs visited
/// exactly once, `L+ = L* ∪ L1+`, `L-` = candidates not in `L+`. All sets
/// are sorted ascending. Under [`CandidateUniverse::AllPois`] the irrelevant
/// sets are complements and are materialized on request only.
#[derive(Debug, Clone)]
pub struct InteractionStore {
    n_users: usize,
    n_pois: usize,
    universe: CandidateUniverse,
    users: Vec<UserSets>,
    pois: Vec<PoiSets>,
}

pub fn build_interactions(ds: &Dataset, universe: CandidateUniverse) -> Result<InteractionStore> {
    if let CandidateUniverse::PerUserNeighborhood { radius_km } = universe {
        if !(radius_km > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "neighborhood radius must be positive, got {radius_km}"
            )));
        }
    }
    if ds.n_users() == 0 || ds.n_pois() == 0 {
        return Err(Error::EmptyDataset("no users or POIs to build interactions from".into()));
    }
    let n = ds.n_users();
    let m = ds.n_pois();
    let visit_counts = ds.visit_counts();
    let mut users = Vec::with_capacity(n);
    let mut pois = vec![PoiSets::default(); m];

    let geo = match universe {
        CandidateUniverse::PerUserNeighborhood { .. } => Some(ds.geo_index()),
        CandidateUniverse::AllPois => None,
    };

    for (i, visits) in visit_counts.into_iter().enumerate() {
        let mut sets = UserSets::default();
        for &(j, count) in &visits {
            sets.plus.push(j);
            pois[j].plus.push(i);
            if count >= 2 {
                sets.star.push(j);
                pois[j].star.push(i);
            } else {
                sets.single.push(j);
                pois[j].single.push(i);
            }
        }
        match (universe, &geo) {
            (CandidateUniverse::PerUserNeighborhood { radius_km }, Some(geo)) => {
                let mut is_candidate = vec![false; m];
                for &k in &sets.plus {
                    for j in geo.within(k, radius_km) {
                        is_candidate[j] = true;
                    }
                }
                for &k in &sets.plus {
                    is_candidate[k] = false;
                }
                let minus: Vec<usize> = (0..m).filter(|&j| is_candidate[j]).collect();
                sets.n_minus = minus.len();
                sets.minus = Some(minus);
            }
            _ => sets.n_minus = m - sets.plus.len(),
        }
        sets.visits = visits;
        users.push(sets);
    }

    if matches!(universe, CandidateUniverse::PerUserNeighborhood { .. }) {
        for p in pois.iter_mut() {
            p.minus = Some(Vec::new());
        }
        for (i, u) in users.iter().enumerate() {
            for &j in u.minus.as_deref().unwrap_or(&[]) {
                pois[j].minus.as_mut().expect("initialized above").push(i);
            }
        }
    }

    Ok(InteractionStore {
        n_users: n,
        n_pois: m,
        universe,
        users,
        pois,
    })
}

fn complement(sorted: &[usize], size: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(size - sorted.len());
    let mut it = sorted.iter().peekable();
    for x in 0..size {
        if it.peek() == Some(&&x) {
            it.next();
        } else {
            out.push(x);
        }
    }
    out
}

impl InteractionStore {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_pois(&self) -> usize {
        self.n_pois
    }

    pub fn universe(&self) -> CandidateUniverse {
        self.universe
    }

    pub fn l_star(&self, i: usize) -> &[usize] {
        &self.users[i].star
    }

    pub fn l_single(&self, i: usize) -> &[usize] {
        &self.users[i].single
    }

    pub fn l_plus(&self, i: usize) -> &[usize] {
        &self.users[i].plus
    }

    pub fn l_minus(&self, i: usize) -> Vec<usize> {
        let u = &self.users[i];
        match &u.minus {
            Some(m) => m.clone(),
            None => complement(&u.plus, self.n_pois),
        }
    }

    pub fn n_star(&self, i: usize) -> usize {
        self.users[i].star.len()
    }

    pub fn n_single(&self, i: usize) -> usize {
        self.users[i].single.len()
    }

    pub fn n_plus(&self, i: usize) -> usize {
        self.users[i].plus.len()
    }

    pub fn n_minus(&self, i: usize) -> usize {
        self.users[i].n_minus
    }

    /// Training visit multiplicities for user `i`, sorted by POI.
    pub fn visits(&self, i: usize) -> &[(usize, u32)] {
        &self.users[i].visits
    }

    pub fn visit_count(&self, i: usize, j: usize) -> u32 {
        let v = &self.users[i].visits;
        v.binary_search_by_key(&j, |&(p, _)| p)
            .map(|idx| v[idx].1)
            .unwrap_or(0)
    }

    pub fn is_plus(&self, i: usize, j: usize) -> bool {
        self.users[i].plus.binary_search(&j).is_ok()
    }

    pub fn p_plus(&self, j: usize) -> &[usize] {
        &self.pois[j].plus
    }

    pub fn p_star(&self, j: usize) -> &[usize] {
        &self.pois[j].star
    }

    pub fn p_single(&self, j: usize) -> &[usize] {
        &self.pois[j].single
    }

    pub fn p_minus(&self, j: usize) -> Vec<usize> {
        let p = &self.pois[j];
        match &p.minus {
            Some(m) => m.clone(),
            None => complement(&p.plus, self.n_users),
        }
    }
}

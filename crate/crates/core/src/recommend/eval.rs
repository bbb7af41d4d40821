use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regions::BoundarySet;
use super::tokenize::{TermVector, Tokenizer};
use crate::error::{Error, Result};
use crate::geo::CityGrid;
use crate::ingest::CityDataset;

/// Cut-offs reported by default.
pub const DEFAULT_NS: [usize; 6] = [1, 5, 10, 15, 20, 25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eligibility {
    pub min_checkins: usize,
    pub min_terms: u32,
}

impl Default for Eligibility {
    fn default() -> Self {
        Eligibility {
            min_checkins: 5,
            min_terms: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalUser {
    pub user_id: String,
    pub profile: TermVector,
    pub home: u32,
    /// Check-ins per region.
    pub counts: BTreeMap<u32, u32>,
}

/// Check-ins per user per region, by the cell of each check-in's venue.
/// Check-ins outside every region are ignored; users with none are absent.
pub fn assign_users(set: &BoundarySet, dataset: &CityDataset, grid: &CityGrid) -> Result<BTreeMap<String, BTreeMap<u32, u32>>> {
    let lookup = set.cell_lookup(grid);
    let venue_region: Vec<Option<u32>> = dataset
        .venues
        .iter()
        .map(|v| grid.cell_of(&v.location).map(|c| lookup[grid.linear(c)]))
        .collect::<Result<_>>()?;
    let mut out: BTreeMap<String, BTreeMap<u32, u32>> = BTreeMap::new();
    for c in &dataset.checkins {
        let vi = dataset.venue_index(&c.venue_id).expect("validated check-in");
        if let Some(r) = venue_region[vi] {
            *out.entry(c.user_id.clone()).or_default().entry(r).or_insert(0) += 1;
        }
    }
    Ok(out)
}

/// Region with the most check-ins, ties to the lowest id.
pub fn home_of(counts: &BTreeMap<u32, u32>) -> Option<u32> {
    // ascending id order, so a strict comparison keeps the lowest id on ties
    let mut best: Option<(u32, u32)> = None;
    for (&id, &n) in counts {
        if n > 0 && best.is_none_or(|(_, b)| n > b) {
            best = Some((id, n));
        }
    }
    best.map(|(id, _)| id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPool {
    pub users: Vec<EvalUser>,
    /// Users passing the activity and profile filters whose check-ins fall
    /// in no region.
    pub residual_users: usize,
}

/// Users with enough city check-ins and profile terms and at least one
/// check-in inside a region, ordered by user id.
pub fn eval_users(
    dataset: &CityDataset,
    grid: &CityGrid,
    set: &BoundarySet,
    tokenizer: &Tokenizer,
    rules: &Eligibility,
) -> Result<UserPool> {
    let mut city_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &dataset.checkins {
        *city_counts.entry(&c.user_id).or_insert(0) += 1;
    }
    let profiles: BTreeMap<&str, &str> = dataset
        .users
        .iter()
        .map(|u| (u.user_id.as_str(), u.profile_text.as_str()))
        .collect();
    let assigned = assign_users(set, dataset, grid)?;
    let mut users = Vec::new();
    let mut residual_users = 0;
    for (&uid, &n) in &city_counts {
        if n < rules.min_checkins {
            continue;
        }
        let profile = tokenizer.tokenize(profiles.get(uid).copied().unwrap_or(""));
        if profile.total() < rules.min_terms {
            continue;
        }
        match assigned.get(uid).and_then(|c| home_of(c).map(|h| (c, h))) {
            Some((counts, home)) => users.push(EvalUser {
                user_id: uid.to_string(),
                profile,
                home,
                counts: counts.clone(),
            }),
            None => residual_users += 1,
        }
    }
    Ok(UserPool { users, residual_users })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodDoc {
    pub id: u32,
    pub terms: TermVector,
    /// Users whose profiles were aggregated.
    pub contributors: BTreeSet<String>,
}

/// One document per region; each training user adds their profile once to
/// every region they checked in at.
pub fn build_docs(set: &BoundarySet, training: &[&EvalUser]) -> Vec<NeighborhoodDoc> {
    let mut docs: Vec<NeighborhoodDoc> = set
        .regions
        .iter()
        .map(|r| NeighborhoodDoc {
            id: r.id,
            terms: TermVector::default(),
            contributors: BTreeSet::new(),
        })
        .collect();
    let slot: BTreeMap<u32, usize> = docs.iter().enumerate().map(|(i, d)| (d.id, i)).collect();
    for u in training {
        for (&r, &n) in &u.counts {
            if n == 0 {
                continue;
            }
            if let Some(&i) = slot.get(&r) {
                docs[i].terms.add(&u.profile);
                docs[i].contributors.insert(u.user_id.clone());
            }
        }
    }
    docs
}

/// Fails when a test user contributed to any document.
pub fn check_no_leakage(docs: &[NeighborhoodDoc], test_users: &[&EvalUser]) -> Result<()> {
    for u in test_users {
        if let Some(d) = docs.iter().find(|d| d.contributors.contains(&u.user_id)) {
            return Err(Error::Integrity(format!(
                "test user {} contributed to neighborhood document {}",
                u.user_id, d.id
            )));
        }
    }
    Ok(())
}

/// Inverse document frequencies `ln((1 + D) / (1 + df)) + 1`.
pub fn idf_weights(docs: &[NeighborhoodDoc]) -> BTreeMap<String, f64> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for t in d.terms.terms.keys() {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let n = docs.len() as f64;
    df.into_iter()
        .map(|(t, f)| (t.to_string(), ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0))
        .collect()
}

/// Precomputed cosine scorer over a fixed document set.
pub struct Ranker<'a> {
    ids: Vec<u32>,
    norms: Vec<f64>,
    index: BTreeMap<&'a str, Vec<(usize, f64)>>,
    idf: Option<BTreeMap<String, f64>>,
}

impl<'a> Ranker<'a> {
    pub fn new(docs: &'a [NeighborhoodDoc], use_idf: bool) -> Self {
        let idf = use_idf.then(|| idf_weights(docs));
        let weight = |t: &str, c: u32| c as f64 * idf.as_ref().map_or(1.0, |w| w.get(t).copied().unwrap_or(1.0));
        let mut index: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
        let mut norms = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            let mut sq = 0.0;
            for (t, &c) in &d.terms.terms {
                let w = weight(t, c);
                sq += w * w;
                index.entry(t.as_str()).or_default().push((i, w));
            }
            norms.push(sq.sqrt());
        }
        Ranker {
            ids: docs.iter().map(|d| d.id).collect(),
            norms,
            index,
            idf,
        }
    }

    /// All regions by descending cosine similarity, ties to the lower id.
    pub fn rank(&self, profile: &TermVector) -> Vec<(u32, f64)> {
        let mut dots = vec![0.0; self.ids.len()];
        let mut sq = 0.0;
        for (t, &c) in &profile.terms {
            let w = c as f64 * self.idf.as_ref().map_or(1.0, |m| m.get(t).copied().unwrap_or(1.0));
            sq += w * w;
            if let Some(postings) = self.index.get(t.as_str()) {
                for &(i, dw) in postings {
                    dots[i] += w * dw;
                }
            }
        }
        let pnorm = sq.sqrt();
        let mut out: Vec<(u32, f64)> = self
            .ids
            .iter()
            .zip(dots.iter().zip(&self.norms))
            .map(|(&id, (&dot, &dn))| {
                let s = if pnorm == 0.0 || dn == 0.0 { 0.0 } else { (dot / (pnorm * dn)).min(1.0) };
                (id, s)
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}

pub fn rank_neighborhoods(profile: &TermVector, docs: &[NeighborhoodDoc]) -> Vec<(u32, f64)> {
    Ranker::new(docs, false).rank(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub user_id: String,
    pub home: u32,
    /// Region ids, best first.
    pub ranking: Vec<u32>,
}

impl UserResult {
    /// 1-based rank of the home region.
    pub fn home_rank(&self) -> Option<usize> {
        self.ranking.iter().position(|&r| r == self.home).map(|p| p + 1)
    }
}

/// Share of users whose home region is among their top `n`.
pub fn accuracy_at(results: &[UserResult], n: usize) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let hits = results.iter().filter(|r| r.home_rank().is_some_and(|k| k <= n)).count();
    hits as f64 / results.len() as f64
}

/// Mean total area of each user's top `n` regions over the city area.
pub fn area_cost_at(results: &[UserResult], n: usize, areas: &BTreeMap<u32, f64>, city_area_km2: f64) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let total: f64 = results
        .iter()
        .map(|r| r.ranking.iter().take(n).map(|id| areas.get(id).copied().unwrap_or(0.0)).sum::<f64>())
        .sum();
    total / results.len() as f64 / city_area_km2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default)]
    pub idf: bool,
    /// City area for the area cost; the bbox area when absent. Manhattan is
    /// about 78 km².
    #[serde(default)]
    pub city_area_km2: Option<f64>,
    #[serde(default)]
    pub eligibility: Eligibility,
}

fn default_k() -> usize {
    10
}

fn default_ns() -> Vec<usize> {
    DEFAULT_NS.to_vec()
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            k: default_k(),
            seed: 0,
            ns: default_ns(),
            idf: false,
            city_area_km2: None,
            eligibility: Eligibility::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffMetrics {
    #[serde(rename = "N")]
    pub n: usize,
    pub accuracy: f64,
    pub area_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub test_users: Vec<String>,
    pub train_size: usize,
    #[serde(rename = "per_N")]
    pub per_n: Vec<CutoffMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub boundary_set: String,
    pub k: usize,
    pub seed: u64,
    pub city_area_km2: f64,
    pub eligible_users: usize,
    pub residual_users: usize,
    /// Fold means.
    #[serde(rename = "per_N")]
    pub per_n: Vec<CutoffMetrics>,
    pub folds: Vec<FoldReport>,
}

impl EvalReport {
    pub fn at(&self, n: usize) -> Option<&CutoffMetrics> {
        self.per_n.iter().find(|m| m.n == n)
    }
}

/// Sizes of `k` near-equal folds over `n` items, larger folds first.
pub fn fold_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

/// Seeded k-fold evaluation: documents come from the training folds only,
/// metrics are averaged over folds.
pub fn cross_validate(pool: &UserPool, set: &BoundarySet, params: &EvalParams, city_area_km2: f64) -> Result<EvalReport> {
    let users = &pool.users;
    let k = params.k;
    if k < 2 {
        return Err(Error::Config(format!("cross validation needs k >= 2, got {k}")));
    }
    if users.len() < k {
        return Err(Error::Config(format!(
            "{} eligible users are fewer than the {k} folds",
            users.len()
        )));
    }
    if !(city_area_km2 > 0.0) {
        return Err(Error::Config(format!("city area must be positive, got {city_area_km2}")));
    }
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for size in fold_sizes(users.len(), k) {
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    let areas: BTreeMap<u32, f64> = set.regions.iter().map(|r| (r.id, r.area_km2)).collect();
    let max_n = params.ns.iter().copied().max().unwrap_or(0);

    let fold_reports: Vec<FoldReport> = folds
        .par_iter()
        .enumerate()
        .map(|(fi, test_idx)| {
            let test_set: BTreeSet<usize> = test_idx.iter().copied().collect();
            let training: Vec<&EvalUser> = (0..users.len())
                .filter(|i| !test_set.contains(i))
                .map(|i| &users[i])
                .collect();
            let test: Vec<&EvalUser> = test_idx.iter().map(|&i| &users[i]).collect();
            let docs = build_docs(set, &training);
            check_no_leakage(&docs, &test)?;
            let ranker = Ranker::new(&docs, params.idf);
            let results: Vec<UserResult> = test
                .iter()
                .map(|u| {
                    let ranked = ranker.rank(&u.profile);
                    let home_pos = ranked.iter().position(|r| r.0 == u.home);
                    // keep enough of the ranking to answer every cut-off
                    let keep = max_n.max(home_pos.map_or(0, |p| p + 1));
                    UserResult {
                        user_id: u.user_id.clone(),
                        home: u.home,
                        ranking: ranked.into_iter().take(keep).map(|r| r.0).collect(),
                    }
                })
                .collect();
            let per_n = params
                .ns
                .iter()
                .map(|&n| CutoffMetrics {
                    n,
                    accuracy: accuracy_at(&results, n),
                    area_cost: area_cost_at(&results, n, &areas, city_area_km2),
                })
                .collect();
            log::debug!("fold {fi}: {} test users", test.len());
            let mut test_users: Vec<String> = test.iter().map(|u| u.user_id.clone()).collect();
            test_users.sort();
            Ok(FoldReport {
                test_users,
                train_size: training.len(),
                per_n,
            })
        })
        .collect::<Result<_>>()?;

    let per_n = params
        .ns
        .iter()
        .enumerate()
        .map(|(j, &n)| CutoffMetrics {
            n,
            accuracy: fold_reports.iter().map(|f| f.per_n[j].accuracy).sum::<f64>() / k as f64,
            area_cost: fold_reports.iter().map(|f| f.per_n[j].area_cost).sum::<f64>() / k as f64,
        })
        .collect();
    Ok(EvalReport {
        boundary_set: set.label.clone(),
        k,
        seed: params.seed,
        city_area_km2,
        eligible_users: users.len(),
        residual_users: pool.residual_users,
        per_n,
        folds: fold_reports,
    })
}

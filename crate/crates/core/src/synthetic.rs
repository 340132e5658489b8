//! Seeded synthetic data with planted social structure.
//!
//! Users belong to taste clusters. Each cluster has a prototype rating per
//! item and a pool of items its members mostly rate; trust links mostly stay
//! inside a cluster. This gives data where friends really do share tastes,
//! which is what the social regularizer assumes.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Rating, SparseRatings, TrustGraph, MAX_RATING, MIN_RATING};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub num_users: usize,
    pub num_clusters: usize,
    pub num_items: usize,
    pub ratings_per_user: usize,
    pub out_degree: usize,
    /// Probability that a trust link stays inside the truster's cluster.
    pub intra_cluster_edges: f64,
    /// Probability that a rated item comes from the user's cluster pool
    /// rather than from all items.
    pub pool_preference: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            num_users: 200,
            num_clusters: 10,
            num_items: 100,
            ratings_per_user: 5,
            out_degree: 12,
            intra_cluster_edges: 0.9,
            pool_preference: 0.8,
            noise_sd: 0.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedData {
    pub ratings: SparseRatings,
    pub graph: TrustGraph,
    /// Cluster of each user.
    pub clusters: Vec<usize>,
    /// `prototypes[c][i]`: noiseless rating of item `i` in cluster `c`.
    pub prototypes: Vec<Vec<f64>>,
}

/// Users are assigned round-robin to clusters, items round-robin to pools.
pub fn planted(cfg: &PlantedConfig) -> Result<PlantedData> {
    let c = cfg.num_clusters;
    if c == 0 || cfg.num_users < 2 * c {
        return Err(Error::InvalidParameter(
            "need at least two users per cluster".into(),
        ));
    }
    if cfg.num_items < c || cfg.ratings_per_user > cfg.num_items {
        return Err(Error::InvalidParameter(
            "too few items for the requested ratings".into(),
        ));
    }
    let cluster_size = cfg.num_users / c;
    if cfg.out_degree >= cluster_size || cfg.out_degree >= cfg.num_users - cluster_size - 1 {
        return Err(Error::InvalidParameter(
            "out_degree too large for the cluster sizes".into(),
        ));
    }
    let noise = Normal::new(0.0, cfg.noise_sd)
        .map_err(|_| Error::InvalidParameter(format!("noise_sd must be >= 0, got {}", cfg.noise_sd)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let clusters: Vec<usize> = (0..cfg.num_users).map(|u| u % c).collect();
    let prototypes: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            (0..cfg.num_items)
                .map(|_| rng.random_range(MIN_RATING..=MAX_RATING))
                .collect()
        })
        .collect();
    let pools: Vec<Vec<usize>> = (0..c)
        .map(|k| (0..cfg.num_items).filter(|i| i % c == k).collect())
        .collect();
    let members: Vec<Vec<usize>> = (0..c)
        .map(|k| (0..cfg.num_users).filter(|u| u % c == k).collect())
        .collect();

    let mut entries = Vec::with_capacity(cfg.num_users * cfg.ratings_per_user);
    for (u, &k) in clusters.iter().enumerate() {
        let mut rated: Vec<usize> = Vec::with_capacity(cfg.ratings_per_user);
        while rated.len() < cfg.ratings_per_user {
            let item = if rng.random_bool(cfg.pool_preference) {
                *pools[k].choose(&mut rng).expect("pool is nonempty")
            } else {
                rng.random_range(0..cfg.num_items)
            };
            if !rated.contains(&item) {
                rated.push(item);
            }
        }
        for item in rated {
            let value = (prototypes[k][item] + noise.sample(&mut rng)).clamp(MIN_RATING, MAX_RATING);
            entries.push(Rating::new(u, item, value));
        }
    }

    let mut edges = Vec::with_capacity(cfg.num_users * cfg.out_degree);
    for u in 0..cfg.num_users {
        let k = clusters[u];
        let mut targets: Vec<usize> = Vec::with_capacity(cfg.out_degree);
        while targets.len() < cfg.out_degree {
            let v = if rng.random_bool(cfg.intra_cluster_edges) {
                *members[k].choose(&mut rng).expect("cluster is nonempty")
            } else {
                let v = rng.random_range(0..cfg.num_users);
                if clusters[v] == k {
                    continue;
                }
                v
            };
            if v != u && !targets.contains(&v) {
                targets.push(v);
            }
        }
        edges.extend(targets.into_iter().map(|v| (u, v)));
    }

    Ok(PlantedData {
        ratings: SparseRatings::new(cfg.num_users, cfg.num_items, entries)?,
        graph: TrustGraph::from_edges(cfg.num_users, edges)?,
        clusters,
        prototypes,
    })
}

/// A control graph with the same out-degrees whose targets are drawn
/// uniformly from all other users.
pub fn shuffle_edges(graph: &TrustGraph, seed: u64) -> TrustGraph {
    let m = graph.num_users();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(graph.num_edges());
    for u in 0..m {
        let degree = graph.out_neighbors(u).len().min(m.saturating_sub(1));
        let mut targets: Vec<usize> = Vec::with_capacity(degree);
        while targets.len() < degree {
            let v = rng.random_range(0..m);
            if v != u && !targets.contains(&v) {
                targets.push(v);
            }
        }
        edges.extend(targets.into_iter().map(|v| (u, v)));
    }
    TrustGraph::from_edges(m, edges).expect("targets are in range")
}

/// Drops all but the first `keep` ratings (in entry order) of each listed user.
pub fn trim_users(ratings: &SparseRatings, users: &[usize], keep: usize) -> SparseRatings {
    let mut trimmed = vec![false; ratings.num_users()];
    for &u in users {
        trimmed[u] = true;
    }
    let mut kept = vec![0usize; ratings.num_users()];
    let entries = ratings
        .entries()
        .iter()
        .filter(|r| {
            if !trimmed[r.user] {
                return true;
            }
            kept[r.user] += 1;
            kept[r.user] <= keep
        })
        .copied()
        .collect();
    ratings.with_entries(entries).expect("subset of valid entries")
}

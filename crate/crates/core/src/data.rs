//! Rating matrix and trust graph storage, file ingestion, and train/test
//! splitting.
//!
//! Users and items are addressed by dense indices `0..M` and `0..N`. The
//! [`IdMap`] keeps the mapping back to the identifiers used in the input files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MIN_RATING: f64 = 1.0;
pub const MAX_RATING: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

impl Rating {
    pub fn new(user: usize, item: usize, value: f64) -> Self {
        Rating { user, item, value }
    }
}

/// Sparse user-item rating matrix indexed both by row and by column.
///
/// Row lists are sorted by item index and column lists by user index, so two
/// users' co-rated items can be found with a single merge.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRatings {
    num_users: usize,
    num_items: usize,
    entries: Vec<Rating>,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
}

impl SparseRatings {
    /// Builds the matrix from a flat entry list. Duplicate `(user, item)`
    /// pairs, out-of-range indices and ratings outside `[1, 5]` are rejected.
    pub fn new(num_users: usize, num_items: usize, entries: Vec<Rating>) -> Result<Self> {
        let mut by_user = vec![Vec::new(); num_users];
        let mut by_item = vec![Vec::new(); num_items];
        for r in &entries {
            if r.user >= num_users || r.item >= num_items {
                return Err(Error::Domain(format!(
                    "rating ({}, {}) outside a {}x{} matrix",
                    r.user, r.item, num_users, num_items
                )));
            }
            check_rating(r.value)?;
            by_user[r.user].push((r.item, r.value));
            by_item[r.item].push((r.user, r.value));
        }
        for (u, row) in by_user.iter_mut().enumerate() {
            row.sort_by_key(|&(i, _)| i);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Domain(format!(
                    "duplicate rating for user {u} item {}",
                    w[0].0
                )));
            }
        }
        for col in by_item.iter_mut() {
            col.sort_by_key(|&(u, _)| u);
        }
        Ok(SparseRatings {
            num_users,
            num_items,
            entries,
            by_user,
            by_item,
        })
    }

    pub fn empty(num_users: usize, num_items: usize) -> Self {
        SparseRatings {
            num_users,
            num_items,
            entries: Vec::new(),
            by_user: vec![Vec::new(); num_users],
            by_item: vec![Vec::new(); num_items],
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(item, rating)` pairs of user `u`, sorted by item.
    pub fn user_ratings(&self, u: usize) -> &[(usize, f64)] {
        &self.by_user[u]
    }

    /// `(user, rating)` pairs of item `i`, sorted by user.
    pub fn item_ratings(&self, i: usize) -> &[(usize, f64)] {
        &self.by_item[i]
    }

    pub fn user_mean(&self, u: usize) -> Option<f64> {
        mean(self.by_user[u].iter().map(|&(_, r)| r))
    }

    pub fn item_mean(&self, i: usize) -> Option<f64> {
        mean(self.by_item[i].iter().map(|&(_, r)| r))
    }

    pub fn global_mean(&self) -> Option<f64> {
        mean(self.entries.iter().map(|r| r.value))
    }

    /// Extends the user index space; new users have no ratings.
    pub fn with_num_users(mut self, num_users: usize) -> Self {
        if num_users > self.num_users {
            self.num_users = num_users;
            self.by_user.resize(num_users, Vec::new());
        }
        self
    }

    /// Keeps the same matrix shape but only the given entries.
    pub fn with_entries(&self, entries: Vec<Rating>) -> Result<Self> {
        SparseRatings::new(self.num_users, self.num_items, entries)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn check_rating(value: f64) -> Result<()> {
    if !(MIN_RATING..=MAX_RATING).contains(&value) {
        return Err(Error::Domain(format!(
            "rating {value} outside [{MIN_RATING}, {MAX_RATING}]"
        )));
    }
    Ok(())
}

/// Bijection between external identifiers and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_user(&mut self, id: &str) -> usize {
        intern(&mut self.users, &mut self.user_index, id)
    }

    pub fn intern_item(&mut self, id: &str) -> usize {
        intern(&mut self.items, &mut self.item_index, id)
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    pub fn user_id(&self, index: usize) -> Option<&str> {
        self.users.get(index).map(String::as_str)
    }

    pub fn item_id(&self, index: usize) -> Option<&str> {
        self.items.get(index).map(String::as_str)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Writes the map as `user <id>` / `item <id>` lines in index order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(File::create(path)?);
            for id in &self.users {
                writeln!(w, "user {id}")?;
            }
            for id in &self.items {
                writeln!(w, "item {id}")?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut map = IdMap::new();
        for (line_no, line) in read_lines(path)? {
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["user", id] => {
                    if map.user_index.contains_key(*id) {
                        return Err(Error::parse(path, line_no, format!("duplicate user id {id}")));
                    }
                    map.intern_user(id);
                }
                ["item", id] => {
                    if map.item_index.contains_key(*id) {
                        return Err(Error::parse(path, line_no, format!("duplicate item id {id}")));
                    }
                    map.intern_item(id);
                }
                _ => return Err(Error::parse(path, line_no, "expected `user <id>` or `item <id>`")),
            }
        }
        Ok(map)
    }
}

fn intern(ids: &mut Vec<String>, index: &mut HashMap<String, usize>, id: &str) -> usize {
    if let Some(&i) = index.get(id) {
        return i;
    }
    let i = ids.len();
    ids.push(id.to_owned());
    index.insert(id.to_owned(), i);
    i
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    collect_lines(BufReader::new(file), path)
}

fn collect_lines(reader: impl BufRead, path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((n + 1, trimmed.to_owned()));
    }
    Ok(out)
}

/// Loads a `<user_id> <item_id> <rating>` file. When a `(user, item)` pair
/// repeats, the last line wins.
pub fn load_ratings(path: &Path) -> Result<(SparseRatings, IdMap)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(BufReader::new(file), path)
}

/// Same as [`load_ratings`] over any reader; `path` only labels errors.
pub fn parse_ratings(reader: impl BufRead, path: &Path) -> Result<(SparseRatings, IdMap)> {
    let mut ids = IdMap::new();
    let mut entries: Vec<Rating> = Vec::new();
    let mut position: HashMap<(usize, usize), usize> = HashMap::new();
    for (line_no, line) in collect_lines(reader, path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 fields (user item rating), found {}", fields.len()),
            ));
        }
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("non-numeric rating `{}`", fields[2])))?;
        check_rating(value).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        let user = ids.intern_user(fields[0]);
        let item = ids.intern_item(fields[1]);
        match position.get(&(user, item)) {
            Some(&at) => entries[at].value = value,
            None => {
                position.insert((user, item), entries.len());
                entries.push(Rating::new(user, item, value));
            }
        }
    }
    let ratings = SparseRatings::new(ids.num_users(), ids.num_items(), entries)?;
    Ok((ratings, ids))
}

/// Writes ratings in the same text format [`load_ratings`] reads.
pub fn save_ratings(path: &Path, ratings: &SparseRatings, ids: &IdMap) -> Result<()> {
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in ratings.entries() {
            let user = ids.user_id(r.user).unwrap_or_default();
            let item = ids.item_id(r.item).unwrap_or_default();
            writeln!(w, "{user}\t{item}\t{}", r.value)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Directed trust graph in compressed adjacency form. `out_neighbors(u)` is
/// F⁺(u) and `in_neighbors(u)` is F⁻(u), both sorted.
///
/// Edges are numbered by their position in the out-adjacency; per-edge data
/// such as similarities is stored in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustGraph {
    num_users: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
    // out-edge id of each in-adjacency slot
    in_edge_ids: Vec<usize>,
}

impl TrustGraph {
    /// Self-loops are dropped and repeated edges collapsed.
    pub fn from_edges(num_users: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= num_users || v >= num_users {
                return Err(Error::Domain(format!(
                    "edge ({u}, {v}) outside {num_users} users"
                )));
            }
            if u != v {
                list.push((u, v));
            }
        }
        list.sort_unstable();
        list.dedup();

        let mut out_offsets = vec![0; num_users + 1];
        for &(u, _) in &list {
            out_offsets[u + 1] += 1;
        }
        for u in 0..num_users {
            out_offsets[u + 1] += out_offsets[u];
        }
        let out_targets: Vec<usize> = list.iter().map(|&(_, v)| v).collect();

        let mut by_target: Vec<(usize, usize, usize)> =
            list.iter().enumerate().map(|(id, &(u, v))| (v, u, id)).collect();
        by_target.sort_unstable();
        let mut in_offsets = vec![0; num_users + 1];
        for &(v, _, _) in &by_target {
            in_offsets[v + 1] += 1;
        }
        for u in 0..num_users {
            in_offsets[u + 1] += in_offsets[u];
        }
        let in_sources = by_target.iter().map(|&(_, u, _)| u).collect();
        let in_edge_ids = by_target.iter().map(|&(_, _, id)| id).collect();

        Ok(TrustGraph {
            num_users,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            in_edge_ids,
        })
    }

    pub fn empty(num_users: usize) -> Self {
        TrustGraph::from_edges(num_users, std::iter::empty()).expect("empty graph is valid")
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_edges(&self) -> usize {
        self.out_targets.len()
    }

    pub fn out_neighbors(&self, u: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    pub fn in_neighbors(&self, u: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    /// Ids of the edges `(u, f)` for `f` in `out_neighbors(u)`.
    pub fn out_edge_ids(&self, u: usize) -> std::ops::Range<usize> {
        self.out_offsets[u]..self.out_offsets[u + 1]
    }

    /// Ids of the edges `(g, u)` for `g` in `in_neighbors(u)`, in the same order.
    pub fn in_edge_ids(&self, u: usize) -> &[usize] {
        &self.in_edge_ids[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    pub fn edge_id(&self, u: usize, f: usize) -> Option<usize> {
        self.out_neighbors(u)
            .binary_search(&f)
            .ok()
            .map(|pos| self.out_offsets[u] + pos)
    }

    pub fn has_edge(&self, u: usize, f: usize) -> bool {
        self.edge_id(u, f).is_some()
    }

    /// All edges `(u, f)` in edge-id order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_users).flat_map(move |u| self.out_neighbors(u).iter().map(move |&f| (u, f)))
    }

    pub fn with_num_users(&self, num_users: usize) -> Self {
        let n = num_users.max(self.num_users);
        TrustGraph::from_edges(n, self.edges()).expect("existing edges stay in range")
    }
}

/// Loads a `<truster_id> <trustee_id>` file. Users not yet in `ids` are
/// appended to the user index space.
pub fn load_trust(path: &Path, ids: &mut IdMap) -> Result<TrustGraph> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trust(BufReader::new(file), path, ids)
}

pub fn parse_trust(reader: impl BufRead, path: &Path, ids: &mut IdMap) -> Result<TrustGraph> {
    let mut edges = Vec::new();
    for (line_no, line) in collect_lines(reader, path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 2 fields (truster trustee), found {}", fields.len()),
            ));
        }
        let u = ids.intern_user(fields[0]);
        let v = ids.intern_user(fields[1]);
        edges.push((u, v));
    }
    TrustGraph::from_edges(ids.num_users(), edges)
}

/// Ratings, trust graph and id map over one shared user index space.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ratings: SparseRatings,
    pub graph: TrustGraph,
    pub ids: IdMap,
}

impl Dataset {
    pub fn load(ratings_path: &Path, trust_path: Option<&Path>) -> Result<Self> {
        let (ratings, mut ids) = load_ratings(ratings_path)?;
        let graph = match trust_path {
            Some(p) => load_trust(p, &mut ids)?,
            None => TrustGraph::empty(ids.num_users()),
        };
        let ratings = ratings.with_num_users(ids.num_users());
        Ok(Dataset { ratings, graph, ids })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: SparseRatings,
    pub test: Vec<Rating>,
    pub seed: u64,
    /// Share of source entries placed in `train`.
    pub train_fraction: f64,
}

/// Uniformly random entry-level split. `round(train_fraction * n)` entries go
/// to train; both halves keep the source order.
pub fn split_ratings(ratings: &SparseRatings, train_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ratings.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut in_train = vec![false; n];
    for &idx in &order[..n_train] {
        in_train[idx] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (r, &t) in ratings.entries().iter().zip(&in_train) {
        if t {
            train.push(*r)
        } else {
            test.push(*r)
        }
    }
    Ok(DatasetSplit {
        train: ratings.with_entries(train)?,
        test,
        seed,
        train_fraction,
    })
}

/// Users with at least one and fewer than `threshold` ratings.
pub fn cold_start_users(ratings: &SparseRatings, threshold: usize) -> Vec<usize> {
    (0..ratings.num_users())
        .filter(|&u| {
            let n = ratings.user_ratings(u).len();
            n >= 1 && n < threshold
        })
        .collect()
}

/// Share of users with at least one rating that are cold-start users.
pub fn cold_start_fraction(ratings: &SparseRatings, threshold: usize) -> f64 {
    let active = (0..ratings.num_users())
        .filter(|&u| !ratings.user_ratings(u).is_empty())
        .count();
    if active == 0 {
        return 0.0;
    }
    cold_start_users(ratings, threshold).len() as f64 / active as f64
}

/// Holds out one seeded-random rating of every cold-start user. Everything
/// else, including all ratings of the remaining users, is training data.
pub fn cold_start_split(ratings: &SparseRatings, threshold: usize, seed: u64) -> Result<DatasetSplit> {
    if threshold < 2 {
        return Err(Error::Domain(format!(
            "cold-start threshold must be at least 2, got {threshold}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held_out = std::collections::HashSet::new();
    for u in cold_start_users(ratings, threshold) {
        let row = ratings.user_ratings(u);
        let (item, _) = row[rng.random_range(0..row.len())];
        held_out.insert((u, item));
    }
    let (test, train): (Vec<Rating>, Vec<Rating>) = ratings
        .entries()
        .iter()
        .partition(|r| held_out.contains(&(r.user, r.item)));
    let total = ratings.len();
    let train_fraction = if total == 0 {
        0.0
    } else {
        train.len() as f64 / total as f64
    };
    Ok(DatasetSplit {
        train: ratings.with_entries(train)?,
        test,
        seed,
        train_fraction,
    })
}

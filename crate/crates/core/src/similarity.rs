//! User-user similarity over co-rated items, materialized once per trust edge.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{SparseRatings, TrustGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    /// Pearson correlation mapped onto `[0, 1]`.
    Pcc,
    /// Cosine of the co-rated rating vectors.
    Vss,
    /// Every edge weighs 1.
    Constant,
    /// Uniform draw from `[0, 1)` per edge.
    Random { seed: u64 },
}

impl SimilarityKind {
    pub fn label(&self) -> String {
        match self {
            SimilarityKind::Pcc => "pcc".into(),
            SimilarityKind::Vss => "vss".into(),
            SimilarityKind::Constant => "constant".into(),
            SimilarityKind::Random { seed } => format!("random:{seed}"),
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    /// Accepts `pcc`, `vss`, `constant` (or `one`), `random` and `random:<seed>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "pcc" => Ok(SimilarityKind::Pcc),
            "vss" => Ok(SimilarityKind::Vss),
            "constant" | "one" | "1" => Ok(SimilarityKind::Constant),
            "random" => Ok(SimilarityKind::Random { seed: 0 }),
            other => match other.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(|seed| SimilarityKind::Random { seed })
                    .map_err(|_| Error::InvalidParameter(format!("similarity: bad random seed `{seed}`"))),
                None => Err(Error::InvalidParameter(format!("similarity: unknown kind `{s}`"))),
            },
        }
    }
}

/// Co-rated `(a, b)` rating pairs of two item-sorted rows.
fn co_rated<'a>(a: &'a [(usize, f64)], b: &'a [(usize, f64)]) -> impl Iterator<Item = (f64, f64)> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let pair = (a[i].1, b[j].1);
                    i += 1;
                    j += 1;
                    return Some(pair);
                }
            }
        }
        None
    })
}

/// Pearson correlation over co-rated items, centred on each user's mean over
/// all of their ratings. Returns 0 for fewer than two co-rated items or a
/// zero denominator.
pub fn pcc(ratings: &SparseRatings, u: usize, f: usize) -> f64 {
    match (ratings.user_mean(u), ratings.user_mean(f)) {
        (Some(mu), Some(mf)) => pearson(ratings.user_ratings(u), mu, ratings.user_ratings(f), mf),
        _ => 0.0,
    }
}

fn pearson(a: &[(usize, f64)], mean_a: f64, b: &[(usize, f64)], mean_b: f64) -> f64 {
    let (mut n, mut num, mut var_a, mut var_b) = (0usize, 0.0, 0.0, 0.0);
    for (x, y) in co_rated(a, b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        num += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
        n += 1;
    }
    if n < 2 || var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    (num / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0)
}

/// Cosine similarity of the two users' ratings restricted to co-rated items.
pub fn vss(ratings: &SparseRatings, u: usize, f: usize) -> f64 {
    cosine(ratings.user_ratings(u), ratings.user_ratings(f))
}

fn cosine(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut dot, mut norm_a, mut norm_b) = (0.0, 0.0, 0.0);
    for (x, y) in co_rated(a, b) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a.sqrt() * norm_b.sqrt())).clamp(0.0, 1.0)
}

/// `(x + 1) / 2`, taking a correlation in `[-1, 1]` onto `[0, 1]`.
pub fn map_to_unit(x: f64) -> f64 {
    (x + 1.0) / 2.0
}

/// One similarity per trust edge, stored in the graph's edge-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    values: Vec<f64>,
}

impl SimilarityTable {
    pub fn new(graph: &TrustGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.num_edges() {
            return Err(Error::Domain(format!(
                "similarity table has {} values for {} edges",
                values.len(),
                graph.num_edges()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("similarity {v} outside [0, 1]")));
        }
        Ok(SimilarityTable { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Similarity by edge id.
    pub fn by_edge(&self, edge: usize) -> f64 {
        self.values[edge]
    }

    pub fn get(&self, graph: &TrustGraph, u: usize, f: usize) -> Option<f64> {
        graph.edge_id(u, f).map(|e| self.values[e])
    }

    /// Writes `<u> <f> <sim>` lines with 17 significant digits.
    pub fn save(&self, path: &Path, graph: &TrustGraph) -> Result<()> {
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(File::create(path)?);
            for ((u, f), v) in graph.edges().zip(&self.values) {
                writeln!(w, "{u} {f} {v:.16e}")?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Reads a cache file written by [`SimilarityTable::save`]. Every edge of
    /// `graph` must appear exactly once and nothing else may.
    pub fn load(path: &Path, graph: &TrustGraph) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut values = vec![f64::NAN; graph.num_edges()];
        let mut seen = vec![false; graph.num_edges()];
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [u, f, v] = fields.as_slice() else {
                return Err(Error::parse(path, line_no, "expected `<u> <f> <sim>`"));
            };
            let bad = |what: &str| Error::parse(path, line_no, format!("bad {what}"));
            let u: usize = u.parse().map_err(|_| bad("user index"))?;
            let f: usize = f.parse().map_err(|_| bad("user index"))?;
            let v: f64 = v.parse().map_err(|_| bad("similarity"))?;
            let edge = (u < graph.num_users())
                .then(|| graph.edge_id(u, f))
                .flatten()
                .ok_or_else(|| Error::parse(path, line_no, format!("({u}, {f}) is not a trust edge")))?;
            if std::mem::replace(&mut seen[edge], true) {
                return Err(Error::parse(path, line_no, format!("edge ({u}, {f}) repeated")));
            }
            values[edge] = v;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            let (u, f) = graph.edges().nth(missing).expect("edge id in range");
            return Err(Error::parse(
                path,
                0,
                format!("edge ({u}, {f}) missing from cache"),
            ));
        }
        SimilarityTable::new(graph, values)
    }
}

/// Computes the similarity of every trust edge. Pass training ratings only,
/// otherwise test ratings leak into the weights.
pub fn build_similarity_table(
    ratings: &SparseRatings,
    graph: &TrustGraph,
    kind: SimilarityKind,
) -> SimilarityTable {
    let edges: Vec<(usize, usize)> = graph.edges().collect();
    let values = match kind {
        SimilarityKind::Constant => vec![1.0; edges.len()],
        SimilarityKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            edges.iter().map(|_| rng.random::<f64>()).collect()
        }
        SimilarityKind::Vss => edges
            .par_iter()
            .map(|&(u, f)| cosine(ratings.user_ratings(u), ratings.user_ratings(f)))
            .collect(),
        SimilarityKind::Pcc => {
            let means: Vec<Option<f64>> = (0..ratings.num_users()).map(|u| ratings.user_mean(u)).collect();
            edges
                .par_iter()
                .map(|&(u, f)| {
                    let r = match (means[u], means[f]) {
                        (Some(mu), Some(mf)) => {
                            pearson(ratings.user_ratings(u), mu, ratings.user_ratings(f), mf)
                        }
                        _ => 0.0,
                    };
                    map_to_unit(r)
                })
                .collect()
        }
    };
    SimilarityTable { values }
}

//! Matrix factorization with an optional social regularizer.
//!
//! The rating matrix is approximated as `PᵀQ`, with one `K`-dimensional factor
//! column per user and per item. The basic objective is
//!
//! ```text
//! ½ Σ_(u,i) (R_ui − p_u·q_i)² + λ/2 (‖P‖²_F + ‖Q‖²_F)
//! ```
//!
//! and the social variant adds `α/2 Σ_u Σ_{f ∈ F⁺(u)} Sim(u,f) ‖p_u − p_f‖²`,
//! pulling every user towards the users they trust. Both are minimized with
//! full-batch gradient descent at a constant learning rate.
//!
//! Gradient columns are accumulated independently per user and per item, so
//! the parallel computation sums in the same order as a sequential one and
//! results do not depend on the thread count.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{SparseRatings, TrustGraph};
use crate::error::{Error, Result};
use crate::similarity::SimilarityTable;

const MODEL_MAGIC: &str = "SOCREC-MODEL";
const MODEL_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Latent dimension.
    pub k: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Relative objective change below which training stops.
    pub tolerance: f64,
    /// Factors start uniform in `[0, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            k: 10,
            lambda: 3.0,
            alpha: 0.01,
            learning_rate: 0.001,
            max_epochs: 300,
            tolerance: 1e-5,
            init_scale: 0.1,
            seed: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be finite and > 0, got {}",
                self.learning_rate
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return fail(format!("tolerance must be > 0, got {}", self.tolerance));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return fail(format!(
                "init_scale must be finite and >= 0, got {}",
                self.init_scale
            ));
        }
        Ok(())
    }
}

/// User and item factors, stored column-major: the factor of user `u` is
/// `user_factors[u*k..(u+1)*k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    k: usize,
    num_users: usize,
    num_items: usize,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    /// Mean of the training ratings, used as the fallback prediction.
    pub global_mean: f64,
}

impl FactorModel {
    pub fn from_parts(
        k: usize,
        user_factors: Vec<f64>,
        item_factors: Vec<f64>,
        global_mean: f64,
    ) -> Result<Self> {
        if k == 0 || !user_factors.len().is_multiple_of(k) || !item_factors.len().is_multiple_of(k) {
            return Err(Error::Domain(format!(
                "factor buffers of length {} and {} do not split into columns of {k}",
                user_factors.len(),
                item_factors.len()
            )));
        }
        Ok(FactorModel {
            k,
            num_users: user_factors.len() / k,
            num_items: item_factors.len() / k,
            user_factors,
            item_factors,
            global_mean,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn user(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.k..(u + 1) * self.k]
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.k..(i + 1) * self.k]
    }

    pub fn user_factors(&self) -> &[f64] {
        &self.user_factors
    }

    pub fn item_factors(&self) -> &[f64] {
        &self.item_factors
    }

    pub fn user_factors_mut(&mut self) -> &mut [f64] {
        &mut self.user_factors
    }

    pub fn item_factors_mut(&mut self) -> &mut [f64] {
        &mut self.item_factors
    }

    /// Raw inner product `p_u · q_i`, unclamped.
    pub fn predict(&self, u: usize, i: usize) -> f64 {
        dot(self.user(u), self.item(i))
    }

    pub fn is_finite(&self) -> bool {
        self.user_factors
            .iter()
            .chain(&self.item_factors)
            .all(|v| v.is_finite())
    }

    /// Writes the `SOCREC-MODEL v1 K M N` text format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "{MODEL_MAGIC} {MODEL_VERSION} {} {} {}",
            self.k, self.num_users, self.num_items
        )?;
        for column in self
            .user_factors
            .chunks(self.k)
            .chain(self.item_factors.chunks(self.k))
        {
            let line: Vec<String> = column.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        writeln!(w, "{:.16e}", self.global_mean)?;
        w.flush()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(line))) => Ok((n + 1, line)),
                Some((_, Err(e))) => Err(Error::io(path, e)),
                None => Err(Error::parse(
                    path,
                    0,
                    format!("unexpected end of file, expected {what}"),
                )),
            }
        };

        let (line_no, header) = next("header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let dims = match fields.as_slice() {
            [MODEL_MAGIC, MODEL_VERSION, k, m, n] => [k, m, n].map(|s| s.parse::<usize>().ok()),
            _ => [None; 3],
        };
        let [Some(k), Some(m), Some(n)] = dims else {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected `{MODEL_MAGIC} {MODEL_VERSION} K M N`"),
            ));
        };
        if k == 0 {
            return Err(Error::parse(path, line_no, "K must be at least 1"));
        }

        let mut read_columns = |count: usize, what: &str| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count * k);
            for _ in 0..count {
                let (line_no, line) = next(what)?;
                let before = out.len();
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| Error::parse(path, line_no, format!("bad number `{tok}`")))?;
                    out.push(v);
                }
                if out.len() - before != k {
                    return Err(Error::parse(path, line_no, format!("expected {k} values")));
                }
            }
            Ok(out)
        };
        let users = read_columns(m, "user factor line")?;
        let items = read_columns(n, "item factor line")?;
        let (line_no, mean_line) = next("global mean")?;
        let global_mean: f64 = mean_line
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, "bad global mean"))?;
        FactorModel::from_parts(k, users, items, global_mean)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn squared_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded factors drawn uniformly from `[0, init_scale]`, users first.
pub fn init_model(num_users: usize, num_items: usize, hp: &Hyperparams) -> FactorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut draw =
        |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random::<f64>() * hp.init_scale).collect() };
    let user_factors = draw(num_users * hp.k);
    let item_factors = draw(num_items * hp.k);
    FactorModel {
        k: hp.k,
        num_users,
        num_items,
        user_factors,
        item_factors,
        global_mean: 0.0,
    }
}

/// Trust graph and per-edge similarities driving the social regularizer.
#[derive(Debug, Clone, Copy)]
pub struct Social<'a> {
    pub graph: &'a TrustGraph,
    pub sim: &'a SimilarityTable,
}

impl<'a> Social<'a> {
    pub fn new(graph: &'a TrustGraph, sim: &'a SimilarityTable) -> Result<Self> {
        if sim.len() != graph.num_edges() {
            return Err(Error::Domain(format!(
                "similarity table has {} values for {} trust edges",
                sim.len(),
                graph.num_edges()
            )));
        }
        Ok(Social { graph, sim })
    }
}

fn check_shapes(model: &FactorModel, train: &SparseRatings, social: Option<&Social>) {
    assert_eq!(
        model.num_users,
        train.num_users(),
        "model and ratings disagree on M"
    );
    assert_eq!(
        model.num_items,
        train.num_items(),
        "model and ratings disagree on N"
    );
    if let Some(s) = social {
        assert_eq!(
            s.graph.num_users(),
            train.num_users(),
            "graph and ratings disagree on M"
        );
        assert_eq!(
            s.sim.len(),
            s.graph.num_edges(),
            "similarity table does not match graph"
        );
    }
}

/// Per-user share of the objective: the user's squared residuals, their
/// regularizer, and (with `social`) their out-link penalty terms, before the
/// ½ factors.
fn user_terms(
    model: &FactorModel,
    train: &SparseRatings,
    social: Option<&Social>,
    alpha: f64,
    u: usize,
) -> (f64, f64, f64) {
    let p = model.user(u);
    let residual: f64 = train
        .user_ratings(u)
        .iter()
        .map(|&(i, r)| {
            let e = r - dot(p, model.item(i));
            e * e
        })
        .sum();
    let social_term = match social {
        Some(s) if alpha != 0.0 => s
            .graph
            .out_edge_ids(u)
            .zip(s.graph.out_neighbors(u))
            .map(|(e, &f)| s.sim.by_edge(e) * squared_distance(p, model.user(f)))
            .sum(),
        _ => 0.0,
    };
    (residual, squared_norm(p), social_term)
}

fn objective(model: &FactorModel, train: &SparseRatings, social: Option<&Social>, hp: &Hyperparams) -> f64 {
    check_shapes(model, train, social);
    let per_user: Vec<(f64, f64, f64)> = (0..model.num_users)
        .into_par_iter()
        .map(|u| user_terms(model, train, social, hp.alpha, u))
        .collect();
    let item_norms: Vec<f64> = model.item_factors.par_chunks(model.k).map(squared_norm).collect();

    let (mut residual, mut user_norm, mut social_sum) = (0.0, 0.0, 0.0);
    for (r, n, s) in per_user {
        residual += r;
        user_norm += n;
        social_sum += s;
    }
    let item_norm: f64 = item_norms.iter().sum();
    let mut value = 0.5 * residual + 0.5 * hp.lambda * (user_norm + item_norm);
    if social.is_some() && hp.alpha != 0.0 {
        value += 0.5 * hp.alpha * social_sum;
    }
    value
}

/// `½ Σ (R_ui − p_u·q_i)² + λ/2 (‖P‖²_F + ‖Q‖²_F)` over the training entries.
pub fn objective_basic(model: &FactorModel, train: &SparseRatings, hp: &Hyperparams) -> f64 {
    objective(model, train, None, hp)
}

/// The basic objective plus `α/2 Σ_u Σ_{f ∈ F⁺(u)} Sim(u,f) ‖p_u − p_f‖²`.
pub fn objective_social(
    model: &FactorModel,
    train: &SparseRatings,
    social: &Social,
    hp: &Hyperparams,
) -> f64 {
    objective(model, train, Some(social), hp)
}

/// Gradient buffers laid out like the model's factor buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub users: Vec<f64>,
    pub items: Vec<f64>,
}

fn gradients(
    model: &FactorModel,
    train: &SparseRatings,
    social: Option<&Social>,
    hp: &Hyperparams,
) -> Gradients {
    check_shapes(model, train, social);
    let k = model.k;
    let mut users = vec![0.0; model.user_factors.len()];
    let mut items = vec![0.0; model.item_factors.len()];

    users.par_chunks_mut(k).enumerate().for_each(|(u, grad)| {
        let p = model.user(u);
        for &(i, r) in train.user_ratings(u) {
            let q = model.item(i);
            let e = dot(p, q) - r;
            for (g, &qk) in grad.iter_mut().zip(q) {
                *g += e * qk;
            }
        }
        for (g, &pk) in grad.iter_mut().zip(p) {
            *g += hp.lambda * pk;
        }
        let Some(s) = social else { return };
        if hp.alpha == 0.0 {
            return;
        }
        // Each edge (u,f) appears in the gradient of both endpoints; for the
        // in-links (g,u) the weight is the one stored on that edge.
        let out = s.graph.out_edge_ids(u).zip(s.graph.out_neighbors(u));
        let inn = s
            .graph
            .in_edge_ids(u)
            .iter()
            .copied()
            .zip(s.graph.in_neighbors(u));
        for (e, &v) in out.chain(inn) {
            let w = hp.alpha * s.sim.by_edge(e);
            for (g, (&pk, &vk)) in grad.iter_mut().zip(p.iter().zip(model.user(v))) {
                *g += w * (pk - vk);
            }
        }
    });

    items.par_chunks_mut(k).enumerate().for_each(|(i, grad)| {
        let q = model.item(i);
        for &(u, r) in train.item_ratings(i) {
            let p = model.user(u);
            let e = dot(p, q) - r;
            for (g, &pk) in grad.iter_mut().zip(p) {
                *g += e * pk;
            }
        }
        for (g, &qk) in grad.iter_mut().zip(q) {
            *g += hp.lambda * qk;
        }
    });

    Gradients { users, items }
}

pub fn gradients_basic(model: &FactorModel, train: &SparseRatings, hp: &Hyperparams) -> Gradients {
    gradients(model, train, None, hp)
}

/// Analytic gradient of [`objective_social`] with respect to every user and
/// item factor.
pub fn gradients_social(
    model: &FactorModel,
    train: &SparseRatings,
    social: &Social,
    hp: &Hyperparams,
) -> Gradients {
    gradients(model, train, Some(social), hp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Objective after each epoch's update.
    pub objective_per_epoch: Vec<f64>,
    pub epochs_run: usize,
    pub converged: bool,
}

/// Full-batch gradient descent. `social = None` trains the basic model.
///
/// Stops when `|F_t − F_{t−1}| / max(1, |F_{t−1}|)` drops below
/// `hp.tolerance` or after `hp.max_epochs` epochs.
pub fn train(
    train: &SparseRatings,
    social: Option<Social>,
    hp: &Hyperparams,
) -> Result<(FactorModel, TrainReport)> {
    hp.validate()?;
    if let Some(s) = &social {
        if s.graph.num_users() != train.num_users() {
            return Err(Error::Domain(format!(
                "trust graph has {} users, ratings have {}",
                s.graph.num_users(),
                train.num_users()
            )));
        }
        Social::new(s.graph, s.sim)?;
    }
    let social = social.as_ref();
    let mut model = init_model(train.num_users(), train.num_items(), hp);
    model.global_mean = train.global_mean().unwrap_or(0.0);

    let mut previous = objective(&model, train, social, hp);
    let mut history = Vec::new();
    let mut converged = false;
    for epoch in 1..=hp.max_epochs {
        let grad = gradients(&model, train, social, hp);
        for (p, g) in model.user_factors.iter_mut().zip(&grad.users) {
            *p -= hp.learning_rate * g;
        }
        for (q, g) in model.item_factors.iter_mut().zip(&grad.items) {
            *q -= hp.learning_rate * g;
        }
        let current = objective(&model, train, social, hp);
        if !model.is_finite() || !current.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(current);
        if (current - previous).abs() / previous.abs().max(1.0) < hp.tolerance {
            converged = true;
            break;
        }
        previous = current;
    }
    let report = TrainReport {
        epochs_run: history.len(),
        objective_per_epoch: history,
        converged,
    };
    Ok((model, report))
}

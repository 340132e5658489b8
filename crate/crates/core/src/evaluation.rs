//! Error metrics and the experiment runners: method comparison, α sweep,
//! similarity ablation, cold-start evaluation and the friends-versus-random
//! peers similarity study.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::{build_means, MeanTable};
use crate::data::{
    cold_start_split, split_ratings, DatasetSplit, Rating, SparseRatings, TrustGraph, MAX_RATING, MIN_RATING,
};
use crate::error::{Error, Result};
use crate::factorization::{train, FactorModel, Hyperparams, Social};
use crate::similarity::{build_similarity_table, map_to_unit, pcc, vss, SimilarityKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPair {
    pub mae: f64,
    pub rmse: f64,
}

impl MetricPair {
    /// Component-wise arithmetic mean.
    pub fn mean(pairs: &[MetricPair]) -> Option<MetricPair> {
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        Some(MetricPair {
            mae: pairs.iter().map(|p| p.mae).sum::<f64>() / n,
            rmse: pairs.iter().map(|p| p.rmse).sum::<f64>() / n,
        })
    }
}

/// MAE and RMSE over `(truth, prediction)` pairs.
pub fn mae_rmse(pairs: &[(f64, f64)]) -> Result<MetricPair> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no predictions to score".into()));
    }
    let n = pairs.len() as f64;
    let (abs, sq) = pairs.iter().fold((0.0, 0.0), |(a, s), &(truth, pred)| {
        let e = truth - pred;
        (a + e.abs(), s + e * e)
    });
    Ok(MetricPair {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    })
}

/// Anything that predicts ratings for `(user, item)` index pairs.
pub trait RatingPredictor: Sync {
    fn predict_raw(&self, user: usize, item: usize) -> f64;

    fn global_mean(&self) -> f64;

    /// Whether the predictor learned anything about this pair. When it has
    /// not, evaluation substitutes the global mean.
    fn knows(&self, user: usize, item: usize) -> bool;
}

pub struct UserMeanPredictor<'a>(pub &'a MeanTable);

impl RatingPredictor for UserMeanPredictor<'_> {
    fn predict_raw(&self, user: usize, item: usize) -> f64 {
        self.0.predict_user_mean(user, item)
    }

    fn global_mean(&self) -> f64 {
        self.0.global_mean()
    }

    fn knows(&self, user: usize, _item: usize) -> bool {
        self.0.user_mean(user).is_some()
    }
}

pub struct ItemMeanPredictor<'a>(pub &'a MeanTable);

impl RatingPredictor for ItemMeanPredictor<'_> {
    fn predict_raw(&self, user: usize, item: usize) -> f64 {
        self.0.predict_item_mean(user, item)
    }

    fn global_mean(&self) -> f64 {
        self.0.global_mean()
    }

    fn knows(&self, _user: usize, item: usize) -> bool {
        self.0.item_mean(item).is_some()
    }
}

/// A trained factor model plus which users and items it saw in training.
///
/// A user counts as seen if they have training ratings, or, for a socially
/// regularized model, at least one trust link.
#[derive(Debug, Clone)]
pub struct FactorPredictor {
    pub model: FactorModel,
    known_users: Vec<bool>,
    known_items: Vec<bool>,
}

impl FactorPredictor {
    pub fn new(model: FactorModel, train: &SparseRatings, graph: Option<&TrustGraph>) -> Self {
        let known_users = (0..model.num_users())
            .map(|u| {
                (u < train.num_users() && !train.user_ratings(u).is_empty())
                    || graph.is_some_and(|g| {
                        u < g.num_users() && !(g.out_neighbors(u).is_empty() && g.in_neighbors(u).is_empty())
                    })
            })
            .collect();
        let known_items = (0..model.num_items())
            .map(|i| i < train.num_items() && !train.item_ratings(i).is_empty())
            .collect();
        FactorPredictor {
            model,
            known_users,
            known_items,
        }
    }
}

impl RatingPredictor for FactorPredictor {
    fn predict_raw(&self, user: usize, item: usize) -> f64 {
        self.model.predict(user, item)
    }

    fn global_mean(&self) -> f64 {
        self.model.global_mean
    }

    fn knows(&self, user: usize, item: usize) -> bool {
        self.known_users.get(user).copied().unwrap_or(false)
            && self.known_items.get(item).copied().unwrap_or(false)
    }
}

/// The prediction actually scored: global mean for unknown pairs, then
/// clamped to the rating range.
pub fn scored_prediction(predictor: &dyn RatingPredictor, user: usize, item: usize) -> f64 {
    let raw = if predictor.knows(user, item) {
        predictor.predict_raw(user, item)
    } else {
        predictor.global_mean()
    };
    raw.clamp(MIN_RATING, MAX_RATING)
}

pub fn evaluate(predictor: &dyn RatingPredictor, test: &[Rating]) -> Result<MetricPair> {
    let pairs: Vec<(f64, f64)> = test
        .iter()
        .map(|r| (r.value, scored_prediction(predictor, r.user, r.item)))
        .collect();
    mae_rmse(&pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    UserMean,
    ItemMean,
    BasicMf,
    SocialMf,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::UserMean,
        Method::ItemMean,
        Method::BasicMf,
        Method::SocialMf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::UserMean => "UserMean",
            Method::ItemMean => "ItemMean",
            Method::BasicMf => "BasicMF",
            Method::SocialMf => "SocialMF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedMetrics {
    pub seed: u64,
    pub metrics: MetricPair,
}

/// One variant of an experiment evaluated over several seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: String,
    pub variant: String,
    pub train_fraction: f64,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: MetricPair,
    pub hyperparams: Hyperparams,
}

impl ExperimentResult {
    fn new(
        experiment: &str,
        variant: String,
        train_fraction: f64,
        per_seed: Vec<SeedMetrics>,
        hp: &Hyperparams,
    ) -> Self {
        let metrics: Vec<MetricPair> = per_seed.iter().map(|s| s.metrics).collect();
        let mean = MetricPair::mean(&metrics).unwrap_or(MetricPair {
            mae: f64::NAN,
            rmse: f64::NAN,
        });
        ExperimentResult {
            experiment: experiment.to_owned(),
            variant,
            train_fraction,
            per_seed,
            mean,
            hyperparams: *hp,
        }
    }

    pub fn maes(&self) -> Vec<f64> {
        self.per_seed.iter().map(|s| s.metrics.mae).collect()
    }

    pub fn rmses(&self) -> Vec<f64> {
        self.per_seed.iter().map(|s| s.metrics.rmse).collect()
    }
}

fn check_inputs(ratings: &SparseRatings, graph: &TrustGraph, hp: &Hyperparams) -> Result<()> {
    hp.validate()?;
    if graph.num_users() != ratings.num_users() {
        return Err(Error::Domain(format!(
            "trust graph has {} users, ratings have {}",
            graph.num_users(),
            ratings.num_users()
        )));
    }
    Ok(())
}

// With α = 0 the graph carries no information into the model.
fn social_graph<'a>(graph: &'a TrustGraph, hp: &Hyperparams) -> Option<&'a TrustGraph> {
    (hp.alpha > 0.0).then_some(graph)
}

/// Trains the basic model on `train`.
pub fn fit_basic(train_set: &SparseRatings, hp: &Hyperparams) -> Result<FactorPredictor> {
    let (model, _) = train(train_set, None, hp)?;
    Ok(FactorPredictor::new(model, train_set, None))
}

/// Builds the similarity table on `train` and trains the social model.
pub fn fit_social(
    train_set: &SparseRatings,
    graph: &TrustGraph,
    kind: SimilarityKind,
    hp: &Hyperparams,
) -> Result<FactorPredictor> {
    let sim = build_similarity_table(train_set, graph, kind);
    let (model, _) = train(train_set, Some(Social::new(graph, &sim)?), hp)?;
    Ok(FactorPredictor::new(model, train_set, social_graph(graph, hp)))
}

/// Trains and evaluates all four methods on one split, in [`Method::ALL`] order.
fn evaluate_all_methods(
    split: &DatasetSplit,
    graph: &TrustGraph,
    hp: &Hyperparams,
    context: &str,
) -> Result<[MetricPair; 4]> {
    let with_ctx = |method: Method| {
        let context = format!("{context}, {}", method.name());
        move |e: Error| e.with_context(context)
    };
    let means = build_means(&split.train).map_err(|e| e.with_context(context.to_owned()))?;
    let user_mean = evaluate(&UserMeanPredictor(&means), &split.test).map_err(with_ctx(Method::UserMean))?;
    let item_mean = evaluate(&ItemMeanPredictor(&means), &split.test).map_err(with_ctx(Method::ItemMean))?;
    let basic = fit_basic(&split.train, hp)
        .and_then(|p| evaluate(&p, &split.test))
        .map_err(with_ctx(Method::BasicMf))?;
    let social = fit_social(&split.train, graph, SimilarityKind::Pcc, hp)
        .and_then(|p| evaluate(&p, &split.test))
        .map_err(with_ctx(Method::SocialMf))?;
    Ok([user_mean, item_mean, basic, social])
}

fn collect_methods(
    experiment: &str,
    train_fraction: f64,
    seeds: &[u64],
    cells: Vec<[MetricPair; 4]>,
    hp: &Hyperparams,
) -> Vec<ExperimentResult> {
    Method::ALL
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let per_seed = seeds
                .iter()
                .zip(&cells)
                .map(|(&seed, cell)| SeedMetrics {
                    seed,
                    metrics: cell[m],
                })
                .collect();
            ExperimentResult::new(experiment, method.name().to_owned(), train_fraction, per_seed, hp)
        })
        .collect()
}

/// For every fraction and seed: split, build PCC similarities on the training
/// part, train UserMean, ItemMean, BasicMF and SocialMF and score them on the
/// held-out part. Results are grouped per fraction, in method order.
pub fn run_comparison(
    ratings: &SparseRatings,
    graph: &TrustGraph,
    fractions: &[f64],
    seeds: &[u64],
    hp: &Hyperparams,
) -> Result<Vec<ExperimentResult>> {
    check_inputs(ratings, graph, hp)?;
    if fractions.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "comparison needs at least one fraction and one seed".into(),
        ));
    }
    let mut results = Vec::new();
    for &fraction in fractions {
        let cells = seeds
            .par_iter()
            .map(|&seed| {
                let context = format!("compare: fraction {fraction}, seed {seed}");
                let split =
                    split_ratings(ratings, fraction, seed).map_err(|e| e.with_context(context.clone()))?;
                evaluate_all_methods(&split, graph, hp, &context)
            })
            .collect::<Result<Vec<_>>>()?;
        results.extend(collect_methods("compare", fraction, seeds, cells, hp));
    }
    Ok(results)
}

/// Trains SocialMF (PCC similarity) once per α on a single fixed split.
pub fn run_alpha_sweep(
    ratings: &SparseRatings,
    graph: &TrustGraph,
    alphas: &[f64],
    hp: &Hyperparams,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<(f64, MetricPair)>> {
    check_inputs(ratings, graph, hp)?;
    if alphas.is_empty() {
        return Err(Error::InvalidParameter(
            "alpha sweep needs at least one alpha".into(),
        ));
    }
    let split = split_ratings(ratings, train_fraction, seed)?;
    let sim = build_similarity_table(&split.train, graph, SimilarityKind::Pcc);
    alphas
        .par_iter()
        .map(|&alpha| {
            let hp = Hyperparams { alpha, ..*hp };
            let (model, _) = train(&split.train, Some(Social::new(graph, &sim)?), &hp)
                .map_err(|e| e.with_context(format!("alpha-sweep: alpha {alpha}")))?;
            let predictor = FactorPredictor::new(model, &split.train, social_graph(graph, &hp));
            Ok((alpha, evaluate(&predictor, &split.test)?))
        })
        .collect()
}

/// SocialMF with each similarity kind on identical splits, one result per kind.
pub fn run_similarity_ablation(
    ratings: &SparseRatings,
    graph: &TrustGraph,
    kinds: &[SimilarityKind],
    hp: &Hyperparams,
    train_fraction: f64,
    seeds: &[u64],
) -> Result<Vec<ExperimentResult>> {
    check_inputs(ratings, graph, hp)?;
    if kinds.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "ablation needs at least one similarity kind and one seed".into(),
        ));
    }
    let splits = seeds
        .iter()
        .map(|&seed| split_ratings(ratings, train_fraction, seed))
        .collect::<Result<Vec<_>>>()?;
    kinds
        .iter()
        .map(|&kind| {
            let per_seed = splits
                .par_iter()
                .map(|split| {
                    let metrics = fit_social(&split.train, graph, kind, hp)
                        .and_then(|p| evaluate(&p, &split.test))
                        .map_err(|e| e.with_context(format!("ablation: {kind}, seed {}", split.seed)))?;
                    Ok(SeedMetrics {
                        seed: split.seed,
                        metrics,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ExperimentResult::new(
                "ablation",
                format!("Sim={kind}"),
                train_fraction,
                per_seed,
                hp,
            ))
        })
        .collect()
}

/// All four methods scored only on the held-out ratings of cold-start users
/// (fewer than `threshold` ratings). Returns an empty list, with a warning,
/// when the data has no cold-start users.
pub fn run_cold_start(
    ratings: &SparseRatings,
    graph: &TrustGraph,
    threshold: usize,
    seeds: &[u64],
    hp: &Hyperparams,
) -> Result<Vec<ExperimentResult>> {
    check_inputs(ratings, graph, hp)?;
    if seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "cold-start needs at least one seed".into(),
        ));
    }
    let splits = seeds
        .iter()
        .map(|&seed| cold_start_split(ratings, threshold, seed))
        .collect::<Result<Vec<_>>>()?;
    if splits[0].test.is_empty() {
        log::warn!("no users with fewer than {threshold} ratings; cold-start experiment skipped");
        return Ok(Vec::new());
    }
    let cells = splits
        .par_iter()
        .map(|split| evaluate_all_methods(split, graph, hp, &format!("cold-start: seed {}", split.seed)))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_methods(
        "cold-start",
        splits[0].train_fraction,
        seeds,
        cells,
        hp,
    ))
}

/// Similarity measure used by [`run_similarity_study`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyMeasure {
    Vss,
    /// Pearson correlation mapped to `[0, 1]`.
    Pcc,
}

impl StudyMeasure {
    fn between(&self, ratings: &SparseRatings, u: usize, f: usize) -> f64 {
        match self {
            StudyMeasure::Vss => vss(ratings, u, f),
            StudyMeasure::Pcc => map_to_unit(pcc(ratings, u, f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserStudy {
    pub user: usize,
    pub out_degree: usize,
    /// Mean similarity to the users this user trusts.
    pub friend_mean: f64,
    /// Mean similarity to an equally sized random set of non-friends.
    pub random_mean: f64,
    pub random_peers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityStudyResult {
    pub users: Vec<UserStudy>,
    /// Qualifying users without enough non-friends to draw a peer set from.
    pub skipped: Vec<usize>,
    /// Share of studied users with `friend_mean − random_mean > 0`.
    pub fraction_positive: f64,
    pub min_out_degree: usize,
}

/// Compares, for every user with more than `min_out_degree` out-links, the
/// mean similarity to trusted users with the mean similarity to a seeded
/// random set of the same size drawn from everyone else.
pub fn run_similarity_study(
    ratings: &SparseRatings,
    graph: &TrustGraph,
    min_out_degree: usize,
    seed: u64,
    measure: StudyMeasure,
) -> Result<SimilarityStudyResult> {
    if min_out_degree < 1 {
        return Err(Error::InvalidParameter(
            "min_out_degree must be at least 1".into(),
        ));
    }
    if graph.num_users() != ratings.num_users() {
        return Err(Error::Domain(
            "trust graph and ratings disagree on the number of users".into(),
        ));
    }
    let m = graph.num_users();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users = Vec::new();
    let mut skipped = Vec::new();
    for u in 0..m {
        let friends = graph.out_neighbors(u);
        let degree = friends.len();
        if degree <= min_out_degree {
            continue;
        }
        // friends never contain u (no self-loops)
        let candidates = m - 1 - degree;
        if candidates < degree {
            log::warn!("user {u}: only {candidates} non-friends for {degree} random peers; skipped");
            skipped.push(u);
            continue;
        }
        let mut excluded: Vec<usize> = friends.to_vec();
        excluded.push(u);
        excluded.sort_unstable();
        let mut random_peers: Vec<usize> = sample(&mut rng, candidates, degree)
            .into_iter()
            .map(|j| nth_not_excluded(j, &excluded))
            .collect();
        random_peers.sort_unstable();

        let mean_to = |others: &[usize]| -> f64 {
            others
                .iter()
                .map(|&f| measure.between(ratings, u, f))
                .sum::<f64>()
                / others.len() as f64
        };
        users.push(UserStudy {
            user: u,
            out_degree: degree,
            friend_mean: mean_to(friends),
            random_mean: mean_to(&random_peers),
            random_peers,
        });
    }
    let positive = users
        .iter()
        .filter(|s| s.friend_mean - s.random_mean > 0.0)
        .count();
    let fraction_positive = if users.is_empty() {
        0.0
    } else {
        positive as f64 / users.len() as f64
    };
    Ok(SimilarityStudyResult {
        users,
        skipped,
        fraction_positive,
        min_out_degree,
    })
}

/// The `j`-th index (0-based) not present in the sorted `excluded` list.
fn nth_not_excluded(j: usize, excluded: &[usize]) -> usize {
    let mut x = j;
    for &e in excluded {
        if e <= x {
            x += 1;
        } else {
            break;
        }
    }
    x
}

/// Two-sided paired t-test p-value for `a` versus `b`. `None` with fewer
/// than two pairs.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Some(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

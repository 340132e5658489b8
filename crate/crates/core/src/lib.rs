//! Social-regularized matrix factorization for rating prediction.
//!
//! The crate covers the whole pipeline: loading ratings and a directed trust
//! network, user-user similarities on trust edges, basic and socially
//! regularized factorization trained by full-batch gradient descent, mean
//! baselines, and the experiment runners that compare them.
//!
//! ```no_run
//! use socrec_core::{build_similarity_table, split_ratings, train, Dataset, Hyperparams, SimilarityKind, Social};
//! use std::path::Path;
//!
//! let data = Dataset::load(Path::new("ratings.tsv"), Some(Path::new("trust.tsv")))?;
//! let split = split_ratings(&data.ratings, 0.9, 1)?;
//! let sim = build_similarity_table(&split.train, &data.graph, SimilarityKind::Pcc);
//! let (model, report) = train(&split.train, Some(Social::new(&data.graph, &sim)?), &Hyperparams::default())?;
//! println!("{} epochs, p_0·q_0 = {}", report.epochs_run, model.predict(0, 0));
//! # Ok::<(), socrec_core::Error>(())
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod factorization;
pub mod report;
pub mod similarity;
pub mod synthetic;

pub use baselines::{build_means, MeanTable};
pub use data::{
    cold_start_fraction, cold_start_split, cold_start_users, load_ratings, load_trust, save_ratings,
    split_ratings, Dataset, DatasetSplit, IdMap, Rating, SparseRatings, TrustGraph,
};
pub use error::{Error, Result};
pub use evaluation::{
    evaluate, mae_rmse, run_alpha_sweep, run_cold_start, run_comparison, run_similarity_ablation,
    run_similarity_study, ExperimentResult, FactorPredictor, Method, MetricPair, RatingPredictor,
    SimilarityStudyResult, StudyMeasure,
};
pub use factorization::{
    gradients_basic, gradients_social, init_model, objective_basic, objective_social, train, FactorModel,
    Gradients, Hyperparams, Social, TrainReport,
};
pub use similarity::{build_similarity_table, map_to_unit, pcc, vss, SimilarityKind, SimilarityTable};

//! Shared fixtures for the benchmarks.

use socrec_core::synthetic::{planted, PlantedConfig};
use socrec_core::{
    build_similarity_table, init_model, FactorModel, Hyperparams, SimilarityKind, SimilarityTable,
};

pub use socrec_core::synthetic::PlantedData;

/// Planted data with `num_users` users and the default shape otherwise.
pub fn planted_data(num_users: usize) -> PlantedData {
    let cfg = PlantedConfig {
        num_users,
        num_items: num_users / 2,
        ..PlantedConfig::default()
    };
    planted(&cfg).expect("valid planted config")
}

pub fn pcc_table(data: &PlantedData) -> SimilarityTable {
    build_similarity_table(&data.ratings, &data.graph, SimilarityKind::Pcc)
}

pub fn hyperparams() -> Hyperparams {
    Hyperparams {
        alpha: 0.3,
        learning_rate: 0.005,
        ..Hyperparams::default()
    }
}

pub fn initial_model(data: &PlantedData, hp: &Hyperparams) -> FactorModel {
    init_model(data.ratings.num_users(), data.ratings.num_items(), hp)
}

//! Mean-based comparison predictors.

use crate::data::SparseRatings;
use crate::error::{Error, Result};

/// Per-user, per-item and global means of a training set. Users and items
/// without training ratings have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTable {
    user_means: Vec<Option<f64>>,
    item_means: Vec<Option<f64>>,
    global_mean: f64,
}

impl MeanTable {
    pub fn user_mean(&self, u: usize) -> Option<f64> {
        self.user_means.get(u).copied().flatten()
    }

    pub fn item_mean(&self, i: usize) -> Option<f64> {
        self.item_means.get(i).copied().flatten()
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// The user's mean, or the global mean for users without training ratings.
    pub fn predict_user_mean(&self, u: usize, _i: usize) -> f64 {
        self.user_mean(u).unwrap_or(self.global_mean)
    }

    /// The item's mean, or the global mean for items without training ratings.
    pub fn predict_item_mean(&self, _u: usize, i: usize) -> f64 {
        self.item_mean(i).unwrap_or(self.global_mean)
    }
}

pub fn build_means(train: &SparseRatings) -> Result<MeanTable> {
    let global_mean = train
        .global_mean()
        .ok_or_else(|| Error::EmptyInput("cannot build means from an empty training set".into()))?;
    Ok(MeanTable {
        user_means: (0..train.num_users()).map(|u| train.user_mean(u)).collect(),
        item_means: (0..train.num_items()).map(|i| train.item_mean(i)).collect(),
        global_mean,
    })
}

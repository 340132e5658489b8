//! CSV rendering of experiment results.
//!
//! Output is a pure function of the results, so reruns with the same inputs
//! produce byte-identical files.

use std::fmt::Write;

use crate::evaluation::{paired_t_test, ExperimentResult, MetricPair, SimilarityStudyResult};

pub const RESULTS_HEADER: &str = "experiment,variant,seed,train_fraction,mae,rmse";
pub const SUMMARY_HEADER: &str =
    "experiment,variant,train_fraction,seeds,mean_mae,mean_rmse,p_value_mae,p_value_rmse";

fn metric(v: f64) -> String {
    format!("{v:.6}")
}

fn p_value(p: Option<f64>) -> String {
    p.map_or_else(|| "NA".to_owned(), |p| format!("{p:.6}"))
}

/// One row per (variant, seed).
pub fn results_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    writeln!(out, "{RESULTS_HEADER}").unwrap();
    for r in results {
        for s in &r.per_seed {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.experiment,
                r.variant,
                s.seed,
                r.train_fraction,
                metric(s.metrics.mae),
                metric(s.metrics.rmse)
            )
            .unwrap();
        }
    }
    out
}

/// Per-variant means plus two-sided paired t-test p-values against the
/// `reference` variant with the same experiment and train fraction. The
/// reference row itself gets `NA`.
pub fn summary_csv(results: &[ExperimentResult], reference: &str) -> String {
    let mut out = String::new();
    writeln!(out, "{SUMMARY_HEADER}").unwrap();
    for r in results {
        let reference_row = results.iter().find(|o| {
            o.variant == reference && o.experiment == r.experiment && o.train_fraction == r.train_fraction
        });
        let (p_mae, p_rmse) = match reference_row {
            Some(o) if o.variant != r.variant => (
                paired_t_test(&r.maes(), &o.maes()),
                paired_t_test(&r.rmses(), &o.rmses()),
            ),
            _ => (None, None),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.variant,
            r.train_fraction,
            r.per_seed.len(),
            metric(r.mean.mae),
            metric(r.mean.rmse),
            p_value(p_mae),
            p_value(p_rmse)
        )
        .unwrap();
    }
    out
}

/// Rows for the α sweep in the common results layout, variant `alpha=<α>`.
pub fn sweep_results_csv(points: &[(f64, MetricPair)], train_fraction: f64, seed: u64) -> String {
    let mut out = String::new();
    writeln!(out, "{RESULTS_HEADER}").unwrap();
    for (alpha, m) in points {
        writeln!(
            out,
            "alpha-sweep,alpha={alpha},{seed},{train_fraction},{},{}",
            metric(m.mae),
            metric(m.rmse)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    Mae,
    Rmse,
}

/// Two-column `alpha,<metric>` table for plotting.
pub fn sweep_metric_csv(points: &[(f64, MetricPair)], which: SweepMetric) -> String {
    let name = match which {
        SweepMetric::Mae => "mae",
        SweepMetric::Rmse => "rmse",
    };
    let mut out = format!("alpha,{name}\n");
    for (alpha, m) in points {
        let v = match which {
            SweepMetric::Mae => m.mae,
            SweepMetric::Rmse => m.rmse,
        };
        writeln!(out, "{alpha},{}", metric(v)).unwrap();
    }
    out
}

pub fn study_csv(study: &SimilarityStudyResult) -> String {
    let mut out = String::from("user,out_degree,friend_similarity,random_similarity\n");
    for u in &study.users {
        writeln!(
            out,
            "{},{},{},{}",
            u.user,
            u.out_degree,
            metric(u.friend_mean),
            metric(u.random_mean)
        )
        .unwrap();
    }
    out
}

pub fn study_summary_csv(study: &SimilarityStudyResult) -> String {
    format!(
        "min_out_degree,qualifying_users,skipped_users,fraction_positive\n{},{},{},{}\n",
        study.min_out_degree,
        study.users.len(),
        study.skipped.len(),
        metric(study.fraction_positive)
    )
}

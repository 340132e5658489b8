use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use socrec_core::data::{MAX_RATING, MIN_RATING};
use socrec_core::report::{self, SweepMetric};
use socrec_core::{
    build_similarity_table, run_alpha_sweep, run_cold_start, run_comparison, run_similarity_ablation,
    run_similarity_study, train as fit, Dataset, ExperimentResult, FactorModel, IdMap, SimilarityKind,
    Social,
};

use crate::config::{ConfigArgs, RunConfig};
use crate::{CliError, Experiment, TrainMethod};

fn sidecar(model: &Path, suffix: &str) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

fn load_dataset(config: &RunConfig, need_trust: bool) -> Result<Dataset, CliError> {
    let ratings = config.ratings_path()?;
    let trust = config.trust_path()?;
    if need_trust && trust.is_none() {
        return Err(CliError::usage("trust: a trust file is required (--trust)"));
    }
    Ok(Dataset::load(ratings, trust)?)
}

pub fn train(method: TrainMethod, model_path: &Path, args: &ConfigArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let social = method == TrainMethod::Social;
    let data = load_dataset(&config, social)?;
    if let Some(dir) = model_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let hp = config.hyperparams;

    let (model, report) = if social {
        let sim = build_similarity_table(&data.ratings, &data.graph, config.similarity);
        fit(&data.ratings, Some(Social::new(&data.graph, &sim)?), &hp)?
    } else {
        fit(&data.ratings, None, &hp)?
    };

    model.save(model_path)?;
    data.ids.save(&sidecar(model_path, ".ids"))?;
    let report_json = json!({
        "method": if social { "SocialMF" } else { "BasicMF" },
        "similarity": social.then(|| config.similarity.label()),
        "num_users": data.ratings.num_users(),
        "num_items": data.ratings.num_items(),
        "num_ratings": data.ratings.len(),
        "num_trust_edges": data.graph.num_edges(),
        "hyperparams": {
            "k": hp.k,
            "lambda": hp.lambda,
            "alpha": hp.alpha,
            "learning_rate": hp.learning_rate,
            "max_epochs": hp.max_epochs,
            "tolerance": hp.tolerance,
            "init_scale": hp.init_scale,
            "seed": hp.seed,
        },
        "epochs_run": report.epochs_run,
        "converged": report.converged,
        "objective_per_epoch": report.objective_per_epoch,
    });
    let text = serde_json::to_string_pretty(&report_json).expect("report is valid json");
    write_file(&sidecar(model_path, ".report.json"), &(text + "\n"))?;
    println!(
        "wrote {} ({} epochs, converged: {}, final objective {:.6})",
        model_path.display(),
        report.epochs_run,
        report.converged,
        report.objective_per_epoch.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn predict(model_path: &Path, user: &str, item: &str) -> Result<(), CliError> {
    let model = FactorModel::load(model_path)?;
    let ids = IdMap::load(&sidecar(model_path, ".ids"))?;
    let u = ids.user_index(user).filter(|&u| u < model.num_users());
    let i = ids.item_index(item).filter(|&i| i < model.num_items());
    let value = match (u, i) {
        (Some(u), Some(i)) => model.predict(u, i),
        _ => {
            let missing = match (u, i) {
                (None, None) => format!("user `{user}` and item `{item}`"),
                (None, _) => format!("user `{user}`"),
                _ => format!("item `{item}`"),
            };
            eprintln!("warning: unknown {missing}; using the global mean");
            model.global_mean
        }
    };
    println!("{:.4}", value.clamp(MIN_RATING, MAX_RATING));
    Ok(())
}

pub fn experiment(which: Experiment, args: &ConfigArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(args)?;
    let data = load_dataset(&config, true)?;
    create_dir(&config.output_dir)?;
    let name = which.name();
    let context = |e: socrec_core::Error| CliError::from(e.with_context(name));
    let hp = config.hyperparams;
    let fraction = config.fractions[0];
    let out = |suffix: &str| config.output_dir.join(format!("{name}{suffix}.csv"));

    match which {
        Experiment::Compare => {
            let results = run_comparison(&data.ratings, &data.graph, &config.fractions, &config.seeds, &hp)
                .map_err(context)?;
            write_results(&results, "SocialMF", &out(""), &out("-summary"))?;
        }
        Experiment::ColdStart => {
            let results = run_cold_start(
                &data.ratings,
                &data.graph,
                config.cold_start_threshold,
                &config.seeds,
                &hp,
            )
            .map_err(context)?;
            write_results(&results, "SocialMF", &out(""), &out("-summary"))?;
        }
        Experiment::Ablation => {
            let results = run_similarity_ablation(
                &data.ratings,
                &data.graph,
                &config.similarities,
                &hp,
                fraction,
                &config.seeds,
            )
            .map_err(context)?;
            let reference = ablation_reference(&config.similarities);
            write_results(&results, &reference, &out(""), &out("-summary"))?;
        }
        Experiment::AlphaSweep => {
            let seed = config.seeds[0];
            let points = run_alpha_sweep(&data.ratings, &data.graph, &config.alphas, &hp, fraction, seed)
                .map_err(context)?;
            write_file(&out(""), &report::sweep_results_csv(&points, fraction, seed))?;
            let mae = report::sweep_metric_csv(&points, SweepMetric::Mae);
            write_file(&out("-mae"), &mae)?;
            write_file(
                &out("-rmse"),
                &report::sweep_metric_csv(&points, SweepMetric::Rmse),
            )?;
            print!("{mae}");
        }
        Experiment::SimStudy => {
            let study = run_similarity_study(
                &data.ratings,
                &data.graph,
                config.min_out_degree,
                config.seeds[0],
                config.study_measure,
            )
            .map_err(context)?;
            write_file(&out(""), &report::study_csv(&study))?;
            let summary = report::study_summary_csv(&study);
            write_file(&out("-summary"), &summary)?;
            print!("{summary}");
        }
    }
    Ok(())
}

/// P-values in the ablation summary are taken against PCC when it was run,
/// otherwise against the first kind.
fn ablation_reference(kinds: &[SimilarityKind]) -> String {
    let kind = kinds
        .iter()
        .find(|k| **k == SimilarityKind::Pcc)
        .unwrap_or(&kinds[0]);
    format!("Sim={kind}")
}

fn write_results(
    results: &[ExperimentResult],
    reference: &str,
    results_path: &Path,
    summary_path: &Path,
) -> Result<(), CliError> {
    write_file(results_path, &report::results_csv(results))?;
    let summary = report::summary_csv(results, reference);
    write_file(summary_path, &summary)?;
    print!("{summary}");
    Ok(())
}

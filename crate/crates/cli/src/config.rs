//! Run configuration: defaults, then a `key = value` config file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use socrec_core::{Hyperparams, SimilarityKind};

use crate::CliError;

/// Flags shared by every subcommand. Each mirrors a config-file key, with
/// `-` in place of `_`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long)]
    pub trust: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Latent dimension.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub learning_rate: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub max_epochs: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub tolerance: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub init_scale: Option<String>,
    /// Seed for factor initialization.
    #[arg(long, allow_negative_numbers = true)]
    pub seed: Option<String>,
    /// Comma-separated train fractions.
    #[arg(long, allow_negative_numbers = true)]
    pub fractions: Option<String>,
    /// Comma-separated split seeds.
    #[arg(long, allow_negative_numbers = true)]
    pub seeds: Option<String>,
    /// Comma-separated α grid for the sweep.
    #[arg(long, allow_negative_numbers = true)]
    pub alphas: Option<String>,
    /// Comma-separated similarity kinds: pcc, vss, constant, random[:seed].
    #[arg(long)]
    pub similarities: Option<String>,
    /// Similarity used by `train --method social`.
    #[arg(long)]
    pub similarity: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub cold_start_threshold: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub min_out_degree: Option<String>,
    /// `vss` or `pcc` for the similarity study.
    #[arg(long)]
    pub study_measure: Option<String>,
}

impl ConfigArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let entries = [
            ("ratings", path(&self.ratings)),
            ("trust", path(&self.trust)),
            ("output_dir", path(&self.output_dir)),
            ("k", self.k.clone()),
            ("lambda", self.lambda.clone()),
            ("alpha", self.alpha.clone()),
            ("learning_rate", self.learning_rate.clone()),
            ("max_epochs", self.max_epochs.clone()),
            ("tolerance", self.tolerance.clone()),
            ("init_scale", self.init_scale.clone()),
            ("seed", self.seed.clone()),
            ("fractions", self.fractions.clone()),
            ("seeds", self.seeds.clone()),
            ("alphas", self.alphas.clone()),
            ("similarities", self.similarities.clone()),
            ("similarity", self.similarity.clone()),
            ("cold_start_threshold", self.cold_start_threshold.clone()),
            ("min_out_degree", self.min_out_degree.clone()),
            ("study_measure", self.study_measure.clone()),
        ];
        entries
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ratings: Option<PathBuf>,
    pub trust: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub hyperparams: Hyperparams,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    pub similarities: Vec<SimilarityKind>,
    pub similarity: SimilarityKind,
    pub cold_start_threshold: usize,
    pub min_out_degree: usize,
    pub study_measure: socrec_core::StudyMeasure,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ratings: None,
            trust: None,
            output_dir: PathBuf::from("results"),
            hyperparams: Hyperparams::default(),
            fractions: vec![0.9, 0.8],
            seeds: vec![1, 2, 3, 4, 5],
            alphas: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            similarities: vec![
                SimilarityKind::Constant,
                SimilarityKind::Random { seed: 0 },
                SimilarityKind::Vss,
                SimilarityKind::Pcc,
            ],
            similarity: SimilarityKind::Pcc,
            cold_start_threshold: 5,
            min_out_degree: 5,
            study_measure: socrec_core::StudyMeasure::Vss,
        }
    }
}

fn invalid(key: &str, value: &str, expected: &str) -> CliError {
    CliError::usage(format!("{key}: expected {expected}, got `{value}`"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| invalid(key, value, expected))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| invalid(key, value, expected)))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(invalid(key, value, expected));
    }
    Ok(items)
}

impl RunConfig {
    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(args: &ConfigArgs) -> Result<Self, CliError> {
        let mut config = RunConfig::default();
        if let Some(path) = &args.config {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            for (key, value) in parse_config_file(&text, path)? {
                config.set(&key, &value)?;
            }
        }
        for (key, value) in args.flag_pairs() {
            config.set(key, &value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let hp = &mut self.hyperparams;
        match key {
            "ratings" => self.ratings = Some(PathBuf::from(value)),
            "trust" => self.trust = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "k" => hp.k = parse_num(key, value, "a positive integer")?,
            "lambda" => hp.lambda = parse_num(key, value, "a number")?,
            "alpha" => hp.alpha = parse_num(key, value, "a number")?,
            "learning_rate" => hp.learning_rate = parse_num(key, value, "a number")?,
            "max_epochs" => hp.max_epochs = parse_num(key, value, "a non-negative integer")?,
            "tolerance" => hp.tolerance = parse_num(key, value, "a number")?,
            "init_scale" => hp.init_scale = parse_num(key, value, "a number")?,
            "seed" => hp.seed = parse_num(key, value, "a non-negative integer")?,
            "fractions" => self.fractions = parse_list(key, value, "comma-separated numbers")?,
            "seeds" => self.seeds = parse_list(key, value, "comma-separated integers")?,
            "alphas" => self.alphas = parse_list(key, value, "comma-separated numbers")?,
            "similarities" => self.similarities = parse_list(key, value, "comma-separated similarity kinds")?,
            "similarity" => self.similarity = parse_num(key, value, "pcc, vss, constant or random[:seed]")?,
            "cold_start_threshold" => self.cold_start_threshold = parse_num(key, value, "an integer >= 2")?,
            "min_out_degree" => self.min_out_degree = parse_num(key, value, "an integer >= 1")?,
            "study_measure" => {
                self.study_measure = match value.trim().to_ascii_lowercase().as_str() {
                    "vss" => socrec_core::StudyMeasure::Vss,
                    "pcc" => socrec_core::StudyMeasure::Pcc,
                    _ => return Err(invalid(key, value, "vss or pcc")),
                }
            }
            other => return Err(CliError::usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.hyperparams
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(CliError::usage(format!("fractions: {f} is not in (0, 1)")));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(CliError::usage(format!("alphas: {a} is not a finite value >= 0")));
        }
        if self.cold_start_threshold < 2 {
            return Err(CliError::usage("cold_start_threshold: must be at least 2"));
        }
        if self.min_out_degree < 1 {
            return Err(CliError::usage("min_out_degree: must be at least 1"));
        }
        Ok(())
    }

    pub fn ratings_path(&self) -> Result<&Path, CliError> {
        let path = self
            .ratings
            .as_deref()
            .ok_or_else(|| CliError::usage("ratings: a ratings file is required (--ratings)"))?;
        check_file(path, "ratings")?;
        Ok(path)
    }

    pub fn trust_path(&self) -> Result<Option<&Path>, CliError> {
        match self.trust.as_deref() {
            Some(p) => check_file(p, "trust").map(|_| Some(p)),
            None => Ok(None),
        }
    }
}

fn check_file(path: &Path, key: &str) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::data(format!("{key}: no such file {}", path.display())));
    }
    Ok(())
}

fn parse_config_file(text: &str, path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(at) => &line[..at],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::usage(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                n + 1
            )));
        };
        out.push((key.trim().replace('-', "_"), value.trim().to_owned()));
    }
    Ok(out)
}

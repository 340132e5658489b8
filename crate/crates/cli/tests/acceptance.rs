//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test -p socrec-cli --test acceptance`.

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socrec_core::evaluation::{fit_basic, fit_social};
use socrec_core::synthetic::{planted, shuffle_edges, trim_users, PlantedConfig};
use socrec_core::{
    cold_start_split, evaluate, gradients_social, mae_rmse, objective_basic, objective_social,
    run_similarity_ablation, run_similarity_study, split_ratings, train, FactorModel, Hyperparams,
    MetricPair, Rating, SimilarityKind, SimilarityTable, Social, SparseRatings, StudyMeasure, TrustGraph,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (
        elapsed <= limit,
        format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

/// A small random problem: ratings, trust graph, similarity weights and a model.
struct Instance {
    ratings: SparseRatings,
    graph: TrustGraph,
    edges: Vec<(usize, usize)>,
    sim: HashMap<(usize, usize), f64>,
    table: SimilarityTable,
    model: FactorModel,
    hp: Hyperparams,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let grid = [0.0, 0.5, 3.0];
    let m = rng.random_range(2..=8);
    let n = rng.random_range(2..=8);
    let k = rng.random_range(1..=4);
    let mut entries = Vec::new();
    for u in 0..m {
        for i in 0..n {
            if rng.random_bool(0.5) {
                entries.push(Rating::new(u, i, rng.random_range(1.0..=5.0)));
            }
        }
    }
    let mut edges = Vec::new();
    for u in 0..m {
        for f in 0..m {
            if u != f && rng.random_bool(0.35) {
                edges.push((u, f));
            }
        }
    }
    let sim: HashMap<(usize, usize), f64> = edges.iter().map(|&e| (e, rng.random::<f64>())).collect();
    let graph = TrustGraph::from_edges(m, edges.iter().copied()).unwrap();
    let values = graph.edges().map(|e| sim[&e]).collect();
    let table = SimilarityTable::new(&graph, values).unwrap();
    let users = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let items = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let hp = Hyperparams {
        k,
        lambda: grid[rng.random_range(0..3)],
        alpha: grid[rng.random_range(0..3)],
        ..Hyperparams::default()
    };
    Instance {
        ratings: SparseRatings::new(m, n, entries).unwrap(),
        graph,
        edges,
        sim,
        table,
        model: FactorModel::from_parts(k, users, items, 0.0).unwrap(),
        hp,
    }
}

fn criterion_gradient() -> Outcome {
    const STEP: f64 = 1e-6;
    const TOL: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let social = Social::new(&inst.graph, &inst.table).unwrap();
        let f = |model: &FactorModel| objective_social(model, &inst.ratings, &social, &inst.hp);
        let grad = gradients_social(&inst.model, &inst.ratings, &social, &inst.hp);
        let analytic = grad.users.iter().chain(&grad.items).copied();
        let n_user = inst.model.user_factors().len();
        for (c, a) in analytic.enumerate() {
            let bump = |delta: f64| {
                let mut m = inst.model.clone();
                if c < n_user {
                    m.user_factors_mut()[c] += delta;
                } else {
                    m.item_factors_mut()[c - n_user] += delta;
                }
                f(&m)
            };
            let numeric = (bump(STEP) - bump(-STEP)) / (2.0 * STEP);
            // both are exactly zero for coordinates with no ratings, links or λ
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            coords += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(10), start.elapsed());
    Outcome::new(
        worst <= TOL && fast,
        format!("{coords} coordinates, worst relative error {worst:.2e} (tol {TOL:.0e}), {time}"),
    )
}

/// Dense brute-force objective from the raw instance data.
fn brute_objective(inst: &Instance, social: bool) -> f64 {
    let model = &inst.model;
    let k = inst.hp.k;
    let (m, n) = (inst.ratings.num_users(), inst.ratings.num_items());
    let mut dense = vec![vec![None; n]; m];
    for r in inst.ratings.entries() {
        dense[r.user][r.item] = Some(r.value);
    }
    let mut total = 0.0;
    for (u, row) in dense.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            if let Some(r) = cell {
                let mut pred = 0.0;
                for d in 0..k {
                    pred += model.user(u)[d] * model.item(i)[d];
                }
                total += 0.5 * (r - pred).powi(2);
            }
        }
    }
    let squares = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    total += 0.5 * inst.hp.lambda * (squares(model.user_factors()) + squares(model.item_factors()));
    if social {
        for &(u, f) in &inst.edges {
            let mut dist = 0.0;
            for d in 0..k {
                dist += (model.user(u)[d] - model.user(f)[d]).powi(2);
            }
            total += 0.5 * inst.hp.alpha * inst.sim[&(u, f)] * dist;
        }
    }
    total
}

fn criterion_objective() -> Outcome {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let inst = random_instance(&mut rng);
        let social = Social::new(&inst.graph, &inst.table).unwrap();
        let basic = objective_basic(&inst.model, &inst.ratings, &inst.hp);
        let full = objective_social(&inst.model, &inst.ratings, &social, &inst.hp);
        worst = worst
            .max((basic - brute_objective(&inst, false)).abs())
            .max((full - brute_objective(&inst, true)).abs());
    }
    let (fast, time) = within(Duration::from_secs(1), start.elapsed());
    Outcome::new(
        worst <= TOL && fast,
        format!("worst absolute difference {worst:.2e} (tol {TOL:.0e}), {time}"),
    )
}

fn criterion_recovery() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, n, k) = (30, 30, 2);
    let u: Vec<f64> = (0..m * k).map(|_| rng.random_range(0.75..1.5)).collect();
    let v: Vec<f64> = (0..n * k).map(|_| rng.random_range(0.75..1.5)).collect();
    let mut entries = Vec::new();
    for a in 0..m {
        for b in 0..n {
            let r: f64 = (0..k).map(|d| u[a * k + d] * v[b * k + d]).sum();
            entries.push(Rating::new(a, b, r));
        }
    }
    let ratings = SparseRatings::new(m, n, entries).unwrap();
    let hp = Hyperparams {
        k,
        lambda: 1e-4,
        alpha: 0.0,
        learning_rate: 0.005,
        max_epochs: 5000,
        tolerance: 1e-15,
        ..Hyperparams::default()
    };
    let (model, report) = train(&ratings, None, &hp).unwrap();
    let pairs: Vec<(f64, f64)> = ratings
        .entries()
        .iter()
        .map(|r| (r.value, model.predict(r.user, r.item)))
        .collect();
    let rmse = mae_rmse(&pairs).unwrap().rmse;
    let (fast, time) = within(Duration::from_secs(30), start.elapsed());
    Outcome::new(
        rmse < 0.05 && fast,
        format!(
            "train RMSE {rmse:.5} after {} epochs (need < 0.05), {time}",
            report.epochs_run
        ),
    )
}

fn criterion_alpha_zero() -> Outcome {
    let data = planted(&PlantedConfig::default()).unwrap();
    let split = split_ratings(&data.ratings, 0.9, 1).unwrap();
    let sim = socrec_core::build_similarity_table(&split.train, &data.graph, SimilarityKind::Pcc);
    let mut identical = true;
    let mut trajectory = 0;
    for epochs in 1..=50 {
        let hp = Hyperparams {
            alpha: 0.0,
            max_epochs: epochs,
            tolerance: 1e-300,
            ..Hyperparams::default()
        };
        let (a, ra) = train(&split.train, None, &hp).unwrap();
        let social = Social::new(&data.graph, &sim).unwrap();
        let (b, rb) = train(&split.train, Some(social), &hp).unwrap();
        let same_bits = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
        identical &= ra.epochs_run == rb.epochs_run
            && same_bits(&ra.objective_per_epoch, &rb.objective_per_epoch)
            && same_bits(a.user_factors(), b.user_factors())
            && same_bits(a.item_factors(), b.item_factors());
        trajectory = rb.objective_per_epoch.len();
    }
    Outcome::new(
        identical,
        format!(
            "factors and objectives compared bitwise after each of 1..=50 epochs ({trajectory} recorded)"
        ),
    )
}

/// Shared settings for the planted-data criteria.
fn planted_hyperparams() -> Hyperparams {
    Hyperparams {
        k: 10,
        lambda: 0.5,
        learning_rate: 0.01,
        max_epochs: 2000,
        tolerance: 1e-7,
        ..Hyperparams::default()
    }
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const ALPHA_GRID: [f64; 5] = [0.01, 0.03, 0.1, 0.3, 1.0];

fn mean_mae(metrics: &[MetricPair]) -> f64 {
    MetricPair::mean(metrics).unwrap().mae
}

fn criterion_social_benefit() -> Outcome {
    let start = Instant::now();
    let data = planted(&PlantedConfig::default()).unwrap();
    let hp = planted_hyperparams();

    let splits: Vec<_> = SEEDS
        .iter()
        .map(|&s| split_ratings(&data.ratings, 0.9, s).unwrap())
        .collect();
    let basic: Vec<MetricPair> = splits
        .iter()
        .map(|s| evaluate(&fit_basic(&s.train, &hp).unwrap(), &s.test).unwrap())
        .collect();
    let basic_mae = mean_mae(&basic);
    let mut best = (f64::NAN, f64::INFINITY);
    for alpha in ALPHA_GRID {
        let hp = Hyperparams { alpha, ..hp };
        let social: Vec<MetricPair> = splits
            .iter()
            .map(|s| {
                let p = fit_social(&s.train, &data.graph, SimilarityKind::Pcc, &hp).unwrap();
                evaluate(&p, &s.test).unwrap()
            })
            .collect();
        let mae = mean_mae(&social);
        if mae < best.1 {
            best = (alpha, mae);
        }
    }

    // Every third user keeps 3 ratings; one is held out, leaving 2 for training.
    let cold: Vec<usize> = (0..data.ratings.num_users()).filter(|u| u % 3 == 0).collect();
    let trimmed = trim_users(&data.ratings, &cold, 3);
    let hp_best = Hyperparams { alpha: best.0, ..hp };
    let (mut cold_basic, mut cold_social) = (Vec::new(), Vec::new());
    for &seed in &SEEDS {
        let split = cold_start_split(&trimmed, 4, seed).unwrap();
        cold_basic.push(evaluate(&fit_basic(&split.train, &hp).unwrap(), &split.test).unwrap());
        let p = fit_social(&split.train, &data.graph, SimilarityKind::Pcc, &hp_best).unwrap();
        cold_social.push(evaluate(&p, &split.test).unwrap());
    }
    let (cb, cs) = (mean_mae(&cold_basic), mean_mae(&cold_social));
    let improvement = (cb - cs) / cb;
    let (fast, time) = within(Duration::from_secs(300), start.elapsed());
    Outcome::new(
        best.1 < basic_mae && improvement >= 0.05 && fast,
        format!(
            "BasicMF {basic_mae:.4} vs SocialMF {:.4} (best alpha {}); cold-start {cb:.4} vs {cs:.4}, \
             improvement {:.1}% (need >= 5%), {time}",
            best.1,
            best.0,
            100.0 * improvement
        ),
    )
}

fn criterion_ablation() -> Outcome {
    let data = planted(&PlantedConfig::default()).unwrap();
    let hp = Hyperparams {
        alpha: 0.3,
        learning_rate: 0.005,
        ..planted_hyperparams()
    };
    let kinds = [
        SimilarityKind::Pcc,
        SimilarityKind::Vss,
        SimilarityKind::Random { seed: 7 },
    ];
    let results = run_similarity_ablation(&data.ratings, &data.graph, &kinds, &hp, 0.9, &SEEDS).unwrap();
    let (pcc, vss, random) = (results[0].mean.mae, results[1].mean.mae, results[2].mean.mae);
    Outcome::new(
        pcc < random && vss < random,
        format!("mean MAE: PCC {pcc:.4}, VSS {vss:.4}, Random {random:.4}"),
    )
}

fn criterion_study() -> Outcome {
    let data = planted(&PlantedConfig::default()).unwrap();
    let study = |g: &TrustGraph| {
        run_similarity_study(&data.ratings, g, 5, 1, StudyMeasure::Vss)
            .unwrap()
            .fraction_positive
    };
    let homophilous = study(&data.graph);
    let control = study(&shuffle_edges(&data.graph, 1));
    Outcome::new(
        homophilous >= 0.9 && (0.4..=0.6).contains(&control),
        format!("planted {homophilous:.3} (need >= 0.9), shuffled {control:.3} (need in [0.4, 0.6])"),
    )
}

fn criterion_metrics() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ordered = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=50);
        let pairs: Vec<(f64, f64)> = (0..len)
            .map(|_| (rng.random_range(1.0..=5.0), rng.random_range(-2.0..8.0)))
            .collect();
        let m = mae_rmse(&pairs).unwrap();
        if m.rmse >= m.mae {
            ordered += 1;
        }
    }
    // residuals (1, -2, 3): mae 2, rmse sqrt(14/3); (0.5, 0.5, 0.5): both 0.5;
    // (0, 0, -4): mae 4/3, rmse sqrt(16/3)
    type Case = ([(f64, f64); 3], f64, f64);
    let cases: [Case; 3] = [
        ([(4.0, 3.0), (2.0, 4.0), (5.0, 2.0)], 2.0, (14.0f64 / 3.0).sqrt()),
        ([(3.5, 3.0), (1.5, 1.0), (5.0, 4.5)], 0.5, 0.5),
        (
            [(3.0, 3.0), (2.0, 2.0), (1.0, 5.0)],
            4.0 / 3.0,
            (16.0f64 / 3.0).sqrt(),
        ),
    ];
    let hand = cases.iter().all(|(pairs, mae, rmse)| {
        let m = mae_rmse(pairs).unwrap();
        (m.mae - mae).abs() <= TOL && (m.rmse - rmse).abs() <= TOL
    });
    Outcome::new(
        ordered == 1000 && hand,
        format!("rmse >= mae on {ordered}/1000 vectors; 3-element hand cases within {TOL:.0e}: {hand}"),
    )
}

fn run_experiments(dir: &Path, config: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let experiments = ["compare", "alpha-sweep", "ablation", "cold-start", "sim-study"];
    for exp in experiments {
        let output = Command::new(env!("CARGO_BIN_EXE_socrec"))
            .args(["experiment", exp, "--config"])
            .arg(config)
            .arg("--output-dir")
            .arg(dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!("{exp}: {}", String::from_utf8_lossy(&output.stderr)));
        }
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn criterion_determinism() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy");
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("toy.conf");
    std::fs::write(
        &config,
        format!(
            "ratings = {}\ntrust = {}\nk = 3\nlambda = 0.5\nalpha = 0.1\nlearning_rate = 0.01\n\
             max_epochs = 300\nseeds = 1,2,3\nfractions = 0.8\nalphas = 0,0.1,1\n\
             min_out_degree = 1\ncold_start_threshold = 3\n",
            root.join("ratings.tsv").display(),
            root.join("trust.tsv").display()
        ),
    )
    .unwrap();
    let runs = [tmp.path().join("first"), tmp.path().join("second")];
    let outputs: Result<Vec<_>, String> = runs.iter().map(|d| run_experiments(d, &config)).collect();
    match outputs {
        Ok(out) => {
            let same = out[0] == out[1];
            let names: Vec<&str> = out[0].iter().map(|(n, _)| n.as_str()).collect();
            Outcome::new(
                same && names.len() == 11,
                format!("{} CSV files, byte-identical across runs: {same}", names.len()),
            )
        }
        Err(e) => Outcome::new(false, format!("CLI run failed: {e}")),
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("gradient matches central finite differences", criterion_gradient),
        ("objective matches brute-force summation", criterion_objective),
        ("rank-2 recovery", criterion_recovery),
        (
            "alpha = 0 reproduces basic training bitwise",
            criterion_alpha_zero,
        ),
        ("social benefit on planted data", criterion_social_benefit),
        ("similarity ablation ordering", criterion_ablation),
        ("similarity study sanity", criterion_study),
        ("metric identities", criterion_metrics),
        ("CLI determinism", criterion_determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {name}: {}", n + 1, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

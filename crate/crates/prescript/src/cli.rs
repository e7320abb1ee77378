//! Command-line surface: dataset generation, training, tree extraction,
//! region enumeration, policy evaluation, and network/tree equivalence
//! checking.
//!
//! Every command is deterministic given its flags; rerunning one writes
//! byte-identical files. Wall-clock time goes to stdout so stderr stays
//! reserved for warnings and errors.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prescript_core::{
    apply_transforms, enumerate_regions, evaluate_policy, extract_tree, filter_violating,
    fit_rc_ols, inject_rule, treatment_cells, tree_predict, verify_equivalence, DatasetSpec,
    ExtractMode, FeatureTransform, Network, SyntheticDataset, TrainConfig,
};

use crate::error::CliError;
use crate::report::{eval_table, regions_report, EvalEntry, EvalRunReport, TrainRunReport};
use crate::{config_file, csv_io, jsonfmt, model_file, rules_file, tree_file, Result};

#[derive(Parser, Debug)]
#[command(
    name = "prescript",
    version,
    about = "Train, constrain, partition, and distill prescriptive ReLU networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic benchmark with counterfactual oracle files.
    Gen {
        /// Benchmark recipe, 1 through 6.
        #[arg(long)]
        dataset: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for train.csv, test.csv, train_oracle.csv, test_oracle.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n_train: usize,
        #[arg(long, default_value_t = 5_000)]
        n_test: usize,
    },
    /// Train a prescriptive network on a training CSV.
    Train {
        /// Training data (header x1,...,xd,p,y).
        #[arg(long)]
        data: PathBuf,
        /// Where the model JSON lands.
        #[arg(long)]
        out: PathBuf,
        /// Optional key=value config file; flags below override nothing in it
        /// except --seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Hidden layer widths, comma separated; "none" for a purely affine net.
        #[arg(long, default_value = "100,100,100,100,100")]
        hidden: String,
        /// Number of treatment arms; default is the largest arm in the data plus one.
        #[arg(long)]
        arms: Option<usize>,
        /// Overrides the config file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Rules file; its transforms extend the features, violating samples are
        /// dropped, and the rules are injected before training.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Oracle CSV aligned with the training rows; enables the final
        /// prescription-accuracy figure.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Optional JSON run report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convert a trained model into an equivalent oblique tree.
    ExtractTree {
        #[arg(long)]
        model: PathBuf,
        /// Where the tree JSON lands.
        #[arg(long)]
        out: PathBuf,
        /// "exact" enumerates every branch; "data-driven" prunes against
        /// calibration points from --data.
        #[arg(long, default_value = "exact")]
        mode: String,
        /// Calibration points (feature or training CSV); required for data-driven.
        #[arg(long)]
        data: Option<PathBuf>,
        /// With --hi, restricts exact extraction to the box [lo,hi]^d.
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        /// Optional Graphviz rendering of the tree.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Enumerate the linear regions a point set touches, with their
    /// treatment cells.
    Partitions {
        #[arg(long)]
        model: PathBuf,
        /// Probe points (feature or training CSV).
        #[arg(long)]
        data: PathBuf,
        /// Where the region JSON lands.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a policy against a counterfactual oracle.
    Eval {
        /// Model JSON; exactly one of --model and --tree.
        #[arg(long, conflicts_with = "tree", required_unless_present = "tree")]
        model: Option<PathBuf>,
        /// Tree JSON.
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Evaluation points (feature or training CSV).
        #[arg(long)]
        data: PathBuf,
        /// Oracle CSV aligned with the points.
        #[arg(long)]
        oracle: PathBuf,
        /// Training CSV for a regress-and-compare least-squares baseline,
        /// fitted on raw features and scored on the same points.
        #[arg(long)]
        rc_train: Option<PathBuf>,
        /// Optional JSON report next to the text table.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check that a tree prescribes exactly like its source network on
    /// random points.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampling box [lo,hi] per raw feature.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        hi: f64,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let t0 = Instant::now();
    match cli.command {
        Command::Gen { dataset, seed, out, n_train, n_test } => {
            cmd_gen(dataset, seed, &out, n_train, n_test)?;
        }
        Command::Train { data, out, config, hidden, arms, seed, rules, oracle, report } => {
            cmd_train(
                &data,
                &out,
                config.as_deref(),
                &hidden,
                arms,
                seed,
                rules.as_deref(),
                oracle.as_deref(),
                report.as_deref(),
            )?;
        }
        Command::ExtractTree { model, out, mode, data, lo, hi, dot } => {
            cmd_extract_tree(&model, &out, &mode, data.as_deref(), lo, hi, dot.as_deref())?;
        }
        Command::Partitions { model, data, out } => {
            cmd_partitions(&model, &data, &out)?;
        }
        Command::Eval { model, tree, data, oracle, rc_train, report } => {
            cmd_eval(
                model.as_deref(),
                tree.as_deref(),
                &data,
                &oracle,
                rc_train.as_deref(),
                report.as_deref(),
            )?;
        }
        Command::Verify { model, tree, n, seed, lo, hi } => {
            cmd_verify(&model, &tree, n, seed, lo, hi)?;
        }
    }
    println!("elapsed {:.3} s", t0.elapsed().as_secs_f64());
    Ok(())
}

/// Widens a point set to a model's input width: already-wide points pass
/// through, raw points gain the model's derived columns, anything else is
/// a width mismatch.
fn prepare_points(
    points: Vec<Vec<f64>>,
    d: usize,
    transforms: &[FeatureTransform],
) -> Result<Vec<Vec<f64>>> {
    let got = points.first().map_or(0, Vec::len);
    if got == d {
        return Ok(points);
    }
    if !transforms.is_empty() && got + transforms.len() == d {
        return points
            .into_iter()
            .map(|x| apply_transforms(&x, transforms).map_err(CliError::from))
            .collect();
    }
    Err(CliError::Invalid(format!(
        "points have {got} features but the model expects {d}{}",
        if transforms.is_empty() {
            String::new()
        } else {
            format!(" ({} raw plus {} derived)", d - transforms.len(), transforms.len())
        }
    )))
}

fn cmd_gen(dataset: usize, seed: u64, out: &Path, n_train: usize, n_test: usize) -> Result<()> {
    let spec = DatasetSpec::benchmark(dataset)?;
    let data = SyntheticDataset::generate(&spec, n_train, n_test, seed)?;
    std::fs::create_dir_all(out)?;
    csv_io::write_train_csv(&out.join("train.csv"), &data.train)?;
    csv_io::write_oracle_csv(
        &out.join("train_oracle.csv"),
        &data.train_oracle,
        Some(&data.standardization),
    )?;
    if n_test > 0 {
        csv_io::write_features_csv(&out.join("test.csv"), &data.test_x)?;
        csv_io::write_oracle_csv(
            &out.join("test_oracle.csv"),
            &data.test_oracle,
            Some(&data.standardization),
        )?;
    }
    println!(
        "dataset {dataset}: {n_train} train and {n_test} test rows, {} arms, written to {}",
        spec.k,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data_path: &Path,
    out: &Path,
    config: Option<&Path>,
    hidden: &str,
    arms: Option<usize>,
    seed: Option<u64>,
    rules_path: Option<&Path>,
    oracle_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let mut cfg = match config {
        Some(path) => config_file::read_config(path)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let hidden = parse_hidden(hidden)?;

    let mut samples = csv_io::read_train_csv(data_path)?;
    let mut optimal = match oracle_path {
        Some(path) => {
            let oracle = csv_io::read_oracle_csv(path)?;
            if oracle.optimal.len() != samples.len() {
                return Err(CliError::Invalid(format!(
                    "oracle has {} rows but the training data has {}",
                    oracle.optimal.len(),
                    samples.len()
                )));
            }
            Some(oracle.optimal)
        }
        None => None,
    };

    let (rules, transforms) = match rules_path {
        Some(path) => rules_file::read(path)?,
        None => (Vec::new(), Vec::new()),
    };
    if !transforms.is_empty() {
        for s in &mut samples {
            s.x = apply_transforms(&s.x, &transforms)?;
        }
    }
    let mut filtered_samples = 0;
    if !rules.is_empty() {
        // Drop oracle labels for the same rows filter_violating drops:
        // a sample goes iff some rule fires on it and forbids its arm.
        if let Some(labels) = optimal.as_mut() {
            let kept: Vec<usize> = samples
                .iter()
                .zip(labels.iter())
                .filter(|(s, _)| !rules.iter().any(|r| r.indicator(&s.x) && !r.allows(s.treatment)))
                .map(|(_, &l)| l)
                .collect();
            *labels = kept;
        }
        let remaining = filter_violating(&samples, &rules);
        filtered_samples = samples.len() - remaining.len();
        if filtered_samples > 0 {
            println!(
                "filtered {filtered_samples} of {} samples whose observed arm a rule forbids",
                samples.len()
            );
        }
        samples = remaining;
        if samples.is_empty() {
            return Err(CliError::Invalid(
                "every training sample violates a rule; nothing left to fit".into(),
            ));
        }
    }

    let d = samples[0].x.len();
    let k = match arms {
        Some(k) => k,
        None => samples.iter().map(|s| s.treatment).max().unwrap_or(0) + 1,
    };
    let mut net = Network::new(d, &hidden, k, cfg.seed)?;
    for rule in rules {
        inject_rule(&mut net, rule)?;
    }

    let train_report = prescript_core::train(&mut net, &samples, &cfg, optimal.as_deref())?;
    model_file::write(out, &net, &transforms, Some(cfg.seed))?;

    let last_loss = train_report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    match train_report.final_accuracy {
        Some(acc) => println!(
            "trained {} epochs, final loss {last_loss:.6}, oracle accuracy {acc:.2}%",
            cfg.epochs
        ),
        None => println!("trained {} epochs, final loss {last_loss:.6}", cfg.epochs),
    }
    println!("model written to {}", out.display());
    if let Some(path) = report_path {
        let run = TrainRunReport::new(samples.len(), d, k, &cfg, filtered_samples, &train_report);
        jsonfmt::write_file(path, &run)?;
    }
    Ok(())
}

fn parse_hidden(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "none" {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Invalid(format!("bad hidden layer width {w:?}")))
        })
        .collect()
}

fn cmd_extract_tree(
    model: &Path,
    out: &Path,
    mode: &str,
    data: Option<&Path>,
    lo: Option<f64>,
    hi: Option<f64>,
    dot: Option<&Path>,
) -> Result<()> {
    let (net, transforms) = model_file::read(model)?;
    let tree = match mode {
        "exact" => {
            let bounds = match (lo, hi) {
                (Some(lo), Some(hi)) => Some(vec![(lo, hi); net.d()]),
                (None, None) => None,
                _ => {
                    return Err(CliError::Invalid(
                        "--lo and --hi must be given together".into(),
                    ))
                }
            };
            extract_tree(&net, ExtractMode::Exact { bounds: bounds.as_deref() })?
        }
        "data-driven" | "data_driven" => {
            let path = data.ok_or_else(|| {
                CliError::Invalid("data-driven extraction needs --data calibration points".into())
            })?;
            let points = prepare_points(csv_io::read_points_csv(path)?, net.d(), &transforms)?;
            extract_tree(&net, ExtractMode::DataDriven { calibration: &points })?
        }
        other => {
            return Err(CliError::Invalid(format!(
                "unknown mode {other:?}; expected \"exact\" or \"data-driven\""
            )))
        }
    };
    tree_file::write(out, &tree, &transforms)?;
    println!(
        "tree with {} splits, {} leaves, depth {} written to {}",
        tree.n_splits(),
        tree.n_leaves(),
        tree.max_depth(),
        out.display()
    );
    if let Some(path) = dot {
        std::fs::write(path, tree_file::to_dot(&tree))?;
        println!("graphviz rendering written to {}", path.display());
    }
    Ok(())
}

fn cmd_partitions(model: &Path, data: &Path, out: &Path) -> Result<()> {
    let (net, transforms) = model_file::read(model)?;
    if !net.rules().is_empty() {
        eprintln!(
            "warning: model carries {} prescription rule(s); the region map reflects \
             the unconstrained outputs, not the rule penalties",
            net.rules().len()
        );
    }
    let points = prepare_points(csv_io::read_points_csv(data)?, net.d(), &transforms)?;
    let regions = enumerate_regions(&net, &points)?;
    let paired: Vec<_> = regions.into_iter().map(|r| {
        let cells = treatment_cells(&r);
        (r, cells)
    }).collect();
    let report = regions_report(points.len(), &paired);
    jsonfmt::write_file(out, &report)?;
    println!(
        "{} points fall into {} linear regions; written to {}",
        report.n_points,
        report.n_regions,
        out.display()
    );
    Ok(())
}

fn cmd_eval(
    model: Option<&Path>,
    tree: Option<&Path>,
    data: &Path,
    oracle_path: &Path,
    rc_train: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let raw_points = csv_io::read_points_csv(data)?;
    let oracle = csv_io::read_oracle_csv(oracle_path)?;
    let mut entries = Vec::new();

    let k = match (model, tree) {
        (Some(path), None) => {
            let (net, transforms) = model_file::read(path)?;
            let points = prepare_points(raw_points.clone(), net.d(), &transforms)?;
            entries.push(EvalEntry::new("network", &evaluate_policy(&net, &points, &oracle)?));
            net.k()
        }
        (None, Some(path)) => {
            let (tree, transforms) = tree_file::read(path)?;
            let points = prepare_points(raw_points.clone(), tree.d(), &transforms)?;
            entries.push(EvalEntry::new("tree", &evaluate_policy(&tree, &points, &oracle)?));
            tree.k()
        }
        // clap enforces exactly one; unreachable through the parser.
        _ => return Err(CliError::Invalid("pass exactly one of --model and --tree".into())),
    };

    if let Some(path) = rc_train {
        let train_data = csv_io::read_train_csv(path)?;
        let rc = fit_rc_ols(&train_data, k)?;
        if !rc.ridge_arms.is_empty() {
            eprintln!(
                "warning: least-squares baseline fell back to ridge on arm(s) {:?}",
                rc.ridge_arms
            );
        }
        entries.push(EvalEntry::new("rc-ols", &evaluate_policy(&rc, &raw_points, &oracle)?));
    }

    print!("{}", eval_table(&entries));
    if let Some(path) = report_path {
        jsonfmt::write_file(path, &EvalRunReport { entries })?;
    }
    Ok(())
}

fn cmd_verify(model: &Path, tree_path: &Path, n: usize, seed: u64, lo: f64, hi: f64) -> Result<()> {
    let (net, transforms) = model_file::read(model)?;
    let (tree, tree_transforms) = tree_file::read(tree_path)?;
    if transforms != tree_transforms {
        return Err(CliError::Invalid(
            "model and tree disagree on feature transforms".into(),
        ));
    }
    if n == 0 || !(lo < hi) {
        return Err(CliError::Invalid("need n > 0 and lo < hi".into()));
    }
    let raw_d = net.d() - transforms.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..raw_d).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect();
            apply_transforms(&raw, &transforms).map_err(CliError::from)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = verify_equivalence(&net, &tree, &points)?;
    println!(
        "checked {} of {} points ({} within boundary tolerance): {} mismatches",
        report.checked, report.total, report.excluded, report.mismatches
    );
    if report.mismatches > 0 {
        for &i in &report.first_mismatches {
            let net_arm = prescript_core::prescribe(&net.predict(&points[i])?);
            let tree_arm = tree_predict(&tree, &points[i])?;
            println!("  point {i}: network prescribes {net_arm}, tree prescribes {tree_arm}");
        }
        return Err(CliError::Invalid(format!(
            "tree does not match its network on {} of {} checked points",
            report.mismatches, report.checked
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_spec_parses_widths_and_none() {
        assert_eq!(parse_hidden("100,100").unwrap(), vec![100, 100]);
        assert_eq!(parse_hidden(" 5 , 3 ").unwrap(), vec![5, 3]);
        assert_eq!(parse_hidden("none").unwrap(), Vec::<usize>::new());
        assert_eq!(parse_hidden("").unwrap(), Vec::<usize>::new());
        assert!(parse_hidden("5,x").is_err());
    }

    #[test]
    fn point_preparation_widens_or_rejects() {
        use prescript_core::TransformOp;
        let transforms =
            vec![FeatureTransform::new("sq".into(), TransformOp::Square, vec![0]).unwrap()];
        let wide = prepare_points(vec![vec![1.0, 2.0, 1.0]], 3, &transforms).unwrap();
        assert_eq!(wide[0], vec![1.0, 2.0, 1.0]);
        let raw = prepare_points(vec![vec![3.0, 2.0]], 3, &transforms).unwrap();
        assert_eq!(raw[0], vec![3.0, 2.0, 9.0]);
        assert!(prepare_points(vec![vec![1.0]], 3, &transforms).is_err());
        assert!(prepare_points(vec![vec![1.0, 2.0]], 3, &[]).is_err());
    }
}

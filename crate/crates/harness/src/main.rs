use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crtwalk::diffusion::grid_bm;
use crtwalk::discrete_tree::{sample_gw_conditioned, OrderedTree};
use crtwalk::embedding::sequential_embed;
use crtwalk::excursion::{sample_brownian_excursion, ExcursionSampler};
use crtwalk::io::{write_csv_table, write_walk_log, WalkLogMeta};
use crtwalk::metric_tree::{reduced_tree_from_indices, MetricTree};
use crtwalk::rng::{derive_seed, rng_from_seed};
use crtwalk::walk::simulate_srw;
use crtwalk_harness::config::ExperimentConfig;
use crtwalk_harness::formulas::{run_formula_suite, FormulaConfig};
use crtwalk_harness::report::{all_pass, git_hash, write_checks_csv, write_json, Check, RunMetadata, TrendReport};
use crtwalk_harness::trends::{run_a_hat_trend, run_quenched_convergence, run_tightness_suite};
use crtwalk_harness::{HarnessError, Result};
use rand::Rng as _;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "crtwalk", version, about = "Random walks on random trees and their diffusion limits")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a conditioned Galton-Watson tree; writes tree.json and contour.csv.
    SampleTree {
        #[arg(long, default_value = "geometric:0.5")]
        offspring: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Simple random walk from the root; writes walk.bin (varints) and walk.json.
    SimulateWalk {
        /// Tree as a parent array (JSON); sampled when absent
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, default_value = "geometric:0.5")]
        offspring: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
    },
    /// Embed a metric tree in l1; writes cloud.jsonl.
    Embed {
        /// Metric tree JSON; when absent, the tree spanned by `k` uniform
        /// points of a Brownian excursion is used
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 20_000)]
        grid: usize,
        #[arg(long, default_value_t = 0.02)]
        spacing: f64,
    },
    /// Grid Brownian motion on a metric tree; writes path.bin, path.json and
    /// clock.csv.
    GridBm {
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 20_000)]
        grid: usize,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
    /// Exact-formula and Monte Carlo checks.
    VerifyFormulas,
    /// Quenched (or annealed, by config) convergence trends along n.
    Convergence,
    /// Clock and projection sup-statistics along k.
    Tightness,
    /// Additive-functional clock error along k.
    AHatTrend,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn out_dir(common: &Common, default: &Path) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| default.to_path_buf());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<BufWriter<File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn metadata(command: &str, seed: u64, config: Option<ExperimentConfig>) -> RunMetadata {
    RunMetadata {
        command: command.into(),
        seed,
        config,
        git_hash: git_hash(),
        clock: None,
        files: Vec::new(),
        pass: None,
        notes: Vec::new(),
    }
}

fn experiment_config(common: &Common, preset: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => preset,
    };
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn to_json_file<T: Serialize>(dir: &Path, name: &str, value: &T, files: &mut Vec<String>) -> Result<()> {
    files.push(name.to_string());
    write_json(&dir.join(name), value)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Tree spanned by `k` uniform points of a Brownian excursion.
fn excursion_tree(grid: usize, k: usize, seed: u64) -> Result<MetricTree> {
    let w = sample_brownian_excursion(grid, derive_seed(seed, 0), ExcursionSampler::ConditionedWalk)?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..=grid)).collect();
    Ok(reduced_tree_from_indices(&w, &idx)?)
}

fn metric_tree_arg(tree: &Option<PathBuf>, grid: usize, k: usize, seed: u64) -> Result<MetricTree> {
    match tree {
        Some(p) => read_json(p),
        None => excursion_tree(grid, k, seed),
    }
}

fn emit_trend(command: &str, cfg: ExperimentConfig, report: TrendReport) -> Result<bool> {
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut meta = metadata(command, cfg.master_seed, Some(cfg));
    report.write_raw_csv(create(&dir, "raw.csv", &mut meta.files)?)?;
    report.write_summary_csv(create(&dir, "summary.csv", &mut meta.files)?)?;
    let verdicts = report.verdicts();
    write_checks_csv(create(&dir, "verdicts.csv", &mut meta.files)?, &verdicts)?;
    for v in &verdicts {
        println!("{v}");
    }
    let pass = all_pass(&verdicts);
    meta.clock = Some(report.clock.clone());
    meta.pass = Some(pass);
    meta.files.push("metadata.json".into());
    write_json(&dir.join("metadata.json"), &meta)?;
    Ok(pass)
}

fn run(cli: &Cli) -> Result<bool> {
    let c = &cli.common;
    let seed = c.seed.unwrap_or(ExperimentConfig::default().master_seed);
    match &cli.command {
        Command::SampleTree { offspring, n } => {
            let law = offspring.parse().map_err(HarnessError::Core)?;
            let tree = sample_gw_conditioned(&law, *n, seed)?;
            let dir = out_dir(c, Path::new("."))?;
            let mut meta = metadata("sample-tree", seed, None);
            to_json_file(&dir, "tree.json", &tree, &mut meta.files)?;
            let contour = tree.contour();
            let rows: Vec<Vec<f64>> =
                contour.depth.iter().enumerate().map(|(i, &d)| vec![i as f64, d as f64]).collect();
            write_csv_table(create(&dir, "contour.csv", &mut meta.files)?, &["index", "depth"], &rows)?;
            meta.notes.push(format!("offspring {offspring}, n = {n}, height {}", tree.height()));
            write_json(&dir.join("metadata.json"), &meta)?;
            Ok(true)
        }
        Command::SimulateWalk { tree, offspring, n, steps } => {
            let t: OrderedTree = match tree {
                Some(p) => read_json(p)?,
                None => sample_gw_conditioned(&offspring.parse().map_err(HarnessError::Core)?, *n, seed)?,
            };
            let walk = simulate_srw(&t, *steps, derive_seed(seed, 1));
            let dir = out_dir(c, Path::new("."))?;
            let mut files = Vec::new();
            let tree_json = serde_json::to_string(&t)?;
            std::fs::write(dir.join("tree.json"), &tree_json)?;
            files.push("tree.json".to_string());
            let mut log = create(&dir, "walk.bin", &mut files)?;
            write_walk_log(&mut log, &walk.steps)?;
            log.flush()?;
            let hash: String = Sha256::digest(tree_json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
            let side = WalkLogMeta { seed: walk.seed, steps: *steps, tree_vertices: t.n(), tree_hash: hash };
            to_json_file(&dir, "walk.json", &side, &mut files)?;
            Ok(true)
        }
        Command::Embed { tree, k, grid, spacing } => {
            let t = metric_tree_arg(tree, *grid, *k, seed)?;
            let dir = out_dir(c, Path::new("."))?;
            let mut files = Vec::new();
            to_json_file(&dir, "tree.json", &t, &mut files)?;
            let pts = t.sample_points(*spacing);
            let img = sequential_embed(&t).embed_all(&t, &pts)?;
            let mut out = create(&dir, "cloud.jsonl", &mut files)?;
            for (i, v) in img.iter().enumerate() {
                writeln!(out, "{}", serde_json::json!({ "index": i, "value": v.entries() }))?;
            }
            out.flush()?;
            Ok(true)
        }
        Command::GridBm { tree, k, grid, h, horizon } => {
            let t = metric_tree_arg(tree, *grid, *k, seed)?;
            let (g, path) = grid_bm(&t, *h, *horizon, derive_seed(seed, 2))?;
            let dir = out_dir(c, Path::new("."))?;
            let mut meta = metadata("grid-bm", seed, None);
            to_json_file(&dir, "tree.json", &t, &mut meta.files)?;
            let mut log = create(&dir, "path.bin", &mut meta.files)?;
            write_walk_log(&mut log, &path.vertices)?;
            log.flush()?;
            let mass = g.length_mass();
            let total: f64 = mass.iter().sum();
            let speed: Vec<f64> = mass.iter().map(|m| m / total).collect();
            let clock = path.additive_functional(&speed);
            let mut out = create(&dir, "clock.csv", &mut meta.files)?;
            writeln!(out, "t,value,clock")?;
            for (s, v) in clock {
                writeln!(out, "{s:.16e},{v:.16e},normalized length")?;
            }
            out.flush()?;
            meta.clock = Some("normalized length".into());
            meta.notes.push(format!("{} grid vertices at h = {h}, {} visits", g.len(), path.len()));
            write_json(&dir.join("metadata.json"), &meta)?;
            Ok(true)
        }
        Command::VerifyFormulas => {
            let mut cfg: FormulaConfig = match &c.config {
                Some(p) => read_json(p)?,
                None => FormulaConfig::default(),
            };
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let checks: Vec<Check> = run_formula_suite(&cfg)?;
            for ch in &checks {
                println!("{ch}");
            }
            let dir = out_dir(c, Path::new("out"))?;
            let mut meta = metadata("verify-formulas", cfg.seed, None);
            write_checks_csv(create(&dir, "checks.csv", &mut meta.files)?, &checks)?;
            to_json_file(&dir, "formula_config.json", &cfg, &mut meta.files)?;
            let pass = all_pass(&checks);
            meta.pass = Some(pass);
            write_json(&dir.join("metadata.json"), &meta)?;
            Ok(pass)
        }
        Command::Convergence => {
            let cfg = experiment_config(c, ExperimentConfig::convergence())?;
            let report = run_quenched_convergence(&cfg)?;
            emit_trend("convergence", cfg, report)
        }
        Command::Tightness => {
            let cfg = experiment_config(c, ExperimentConfig::tightness())?;
            let report = run_tightness_suite(&cfg)?;
            emit_trend("tightness", cfg, report)
        }
        Command::AHatTrend => {
            let cfg = experiment_config(c, ExperimentConfig::a_hat_trend())?;
            let report = run_a_hat_trend(&cfg)?;
            emit_trend("a-hat-trend", cfg, report)
        }
    }
}

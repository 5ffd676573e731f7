use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use graph_selftrain::config::parse_seeds;
use graph_selftrain::gcn::{accuracy, init_model, save_checkpoint, train, write_history_csv};
use graph_selftrain::graph::{convert, load_dataset, ConvertInputs, SplitSpec};
use graph_selftrain::report::{emit_report, write_json};
use graph_selftrain::selftrain::{run_seeds, Workspace};
use graph_selftrain::sweep::{parse_values, sweep, write_sweep_csv, SweepAxis};
use graph_selftrain::{Error, Result, RunConfig};

#[derive(Parser)]
#[command(version, about = "Self-training for graph node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an edge list, CSV features and labels into a GraphPack directory.
    Convert {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// JSON split over original ids; omit to draw a per-class split.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        train_per_class: usize,
        #[arg(long, default_value_t = 500)]
        n_val: usize,
        #[arg(long, default_value_t = 1000)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the base GCN on the labeled nodes only.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Directory for the checkpoint and training history.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run self-training for every seed and write per-round reports.
    Selftrain {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat self-training across values of one hyperparameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// One of k, K, sigma, beta.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<String>,
    /// `1,2,3` or `0..10`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    select_k: Option<usize>,
    #[arg(long)]
    pool_k: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// none, ts or ets.
    #[arg(long)]
    calibration: Option<String>,
    /// Disable parallel sampling and parallel seeds.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
        }
        if let Some(s) = &self.strategy {
            cfg.strategy = s.parse()?;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if let Some(k) = self.select_k {
            cfg.select_k = k;
        }
        if let Some(k) = self.pool_k {
            cfg.pool_size = k;
        }
        if let Some(b) = self.samples {
            cfg.banzhaf_samples = b;
        }
        if let Some(c) = &self.calibration {
            cfg.calibration = serde_json::from_value(serde_json::Value::String(c.clone()))
                .map_err(|_| Error::Config(format!("unknown calibration `{c}`")))?;
        }
        if self.sequential {
            cfg.parallel = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn workspace(&self, cfg: &RunConfig) -> Result<Workspace> {
        let dir = cfg.data.as_ref().ok_or_else(|| Error::Config("no dataset given (--data or `data` in the config)".into()))?;
        let (graph, split) = load_dataset(dir)?;
        info!(
            "loaded {}: {} nodes, {} edges, {} features, {} classes",
            dir.display(),
            graph.n_nodes(),
            graph.n_edges(),
            graph.n_features(),
            graph.n_classes()
        );
        Workspace::new(&graph, &split, cfg.feature_norm)
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Convert {
            edges,
            features,
            labels,
            split,
            train_per_class,
            n_val,
            n_test,
            split_seed,
            out,
        } => {
            let split = match split {
                Some(p) => SplitSpec::File(p),
                None => SplitSpec::PerClass {
                    train_per_class,
                    n_val,
                    n_test,
                    seed: split_seed,
                },
            };
            let (g, s) = convert(&ConvertInputs { edges, features, labels, split }, &out)?;
            println!(
                "wrote {}: {} nodes, {} edges, {} features, {} classes, split {}/{}/{}",
                out.display(),
                g.n_nodes(),
                g.n_edges(),
                g.n_features(),
                g.n_classes(),
                s.train.len(),
                s.val.len(),
                s.test.len()
            );
        }
        Command::Train { run, out } => {
            let cfg = run.config()?;
            let ws = run.workspace(&cfg)?;
            let labels = ws.graph.labels();
            let train_labels: Vec<(usize, usize)> = ws.split.train.iter().map(|&u| (u, labels[u])).collect();
            let val: Vec<(usize, usize)> = ws.split.val.iter().map(|&u| (u, labels[u])).collect();
            for &seed in &cfg.seeds {
                let model = init_model(ws.graph.n_features(), cfg.train.hidden_dim, ws.graph.n_classes(), seed);
                let outcome = train(model, &ws.adj_sym, &ws.features, &train_labels, &val, &cfg.train)?;
                let pred = outcome.model.predict(&ws.adj_sym, &ws.features)?;
                println!(
                    "seed {seed}: best epoch {}, val {:.4}, test {:.4}",
                    outcome.best_epoch,
                    outcome.best_val_acc,
                    accuracy(&pred, labels, &ws.split.test)?
                );
                if let Some(dir) = &out {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
                    save_checkpoint(&outcome.model, dir.join(format!("model_seed{seed}.bin")))?;
                    write_history_csv(&outcome.history, dir.join(format!("history_seed{seed}.csv")))?;
                }
            }
        }
        Command::Selftrain { run, out } => {
            let cfg = run.config()?;
            let ws = run.workspace(&cfg)?;
            let results = run_seeds(&ws, &cfg);
            std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            std::fs::write(out.join("config.json"), cfg.to_json()).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            let summary = emit_report(cfg.strategy, &results, &out)?;
            for (seed, err) in &summary.failed_seeds {
                error!("seed {seed} failed: {err}");
            }
            if let (Some(raw), Some(best), Some(stop)) = (summary.raw, summary.best_round, summary.early_stopped) {
                println!(
                    "{}: raw {:.4}±{:.4}  best-round {:.4}±{:.4}  early-stopped {:.4}±{:.4}  ({} seeds)",
                    cfg.strategy, raw.mean, raw.std, best.mean, best.std, stop.mean, stop.std, best.n
                );
            }
            if summary.runs.iter().any(|r| r.pool_exhausted) {
                println!("note: the pseudo-label pool ran out before the final round in some runs");
            }
            if !summary.failed_seeds.is_empty() {
                return Err(Error::Runtime(format!("{} seeds failed", summary.failed_seeds.len())));
            }
        }
        Command::Sweep { run, axis, values, out } => {
            let cfg = run.config()?;
            let axis: SweepAxis = axis.parse()?;
            let values = parse_values(&values)?;
            let ws = run.workspace(&cfg)?;
            let result = sweep(&ws, &cfg, axis, &values);
            std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            write_sweep_csv(&result, out.join("sweep.csv"))?;
            write_json(&result, out.join("sweep.json"))?;
            for cell in &result.cells {
                if let Some(best) = cell.summary.best_round {
                    println!("{axis} = {}: best-round {:.4}±{:.4}", cell.value, best.mean, best.std);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

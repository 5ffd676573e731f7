//! Teacher → student self-training.
//!
//! Round 0 trains the teacher on the labeled nodes. Each later round asks
//! the current teacher for logits, selects `k` unlabeled nodes according to
//! the strategy, freezes their pseudo-labels, and trains a freshly
//! initialized student on labeled plus all pseudo-labeled nodes. The student
//! is the next round's teacher.

use std::time::Instant;

use log::{debug, info, warn};
use ndarray::Array2;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::banzhaf::{exhaustive_banzhaf, msr_banzhaf, select_candidates, top_k_select, BanzhafMode, MsrConfig};
use crate::calibration::{CalibrationKind, Calibrator};
use crate::config::{RunConfig, Strategy};
use crate::error::{Error, Result};
use crate::gcn::{accuracy, init_model, train, GcnModel, Mode};
use crate::graph::{flip_labels, normalize, subsample_train, Graph, LabelState, NormalizationMode, NormalizedAdjacency, SparseFeatures, Split};
use crate::numeric::argmax_rows;
use crate::objective::{utility, utility_at_positions};
use crate::propagation::build_state;
use crate::rng::{derive_seed, rng_for};

const STREAM_MSR: u64 = 10_000;
const STREAM_RANDOM: u64 = 20_000;
const STREAM_NOISE: u64 = 30_000;
const STREAM_BETA: u64 = 30_001;

/// Graph-derived inputs shared by every run on one dataset.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub graph: Graph,
    pub split: Split,
    pub features: SparseFeatures,
    pub adj_sym: NormalizedAdjacency,
    pub adj_row: NormalizedAdjacency,
}

impl Workspace {
    pub fn new(graph: &Graph, split: &Split, feature_norm: bool) -> Result<Self> {
        split.validate(graph.n_nodes())?;
        let graph = if feature_norm {
            graph.with_row_normalized_features()
        } else {
            graph.clone()
        };
        Ok(Workspace {
            features: SparseFeatures::from_dense(graph.features()),
            adj_sym: normalize(&graph, NormalizationMode::Symmetric, true)?,
            adj_row: normalize(&graph, NormalizationMode::Row, true)?,
            split: split.clone(),
            graph,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub n_selected: usize,
    /// Fraction of this round's pseudo-labels that match the ground truth.
    /// Diagnostic only; never used for selection.
    pub pseudo_acc: Option<f64>,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Utility of the selected set under the teacher's propagated logits.
    pub objective: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub strategy: Strategy,
    pub seed: u64,
    pub raw_test: f64,
    /// Highest test accuracy over self-training rounds (round 0 when there
    /// were none).
    pub best_round_test: f64,
    pub best_round: usize,
    /// Test accuracy at the round with the highest validation accuracy.
    pub early_stopped_test: f64,
    pub early_stopped_round: usize,
    pub rounds_completed: usize,
    /// The pseudo-label-eligible pool ran out before the last round.
    pub pool_exhausted: bool,
    /// Round-level patience ended the run.
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub records: Vec<RoundRecord>,
    pub pseudo_labels: Vec<crate::graph::PseudoLabel>,
    pub summary: RunSummary,
}

/// Output of one selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selected: Vec<(usize, usize)>,
    pub objective: Option<f64>,
    pub calibrator: Calibrator,
}

/// Per-round inputs to [`select_for_strategy`] besides the teacher logits.
pub struct SelectionContext<'a> {
    pub ws: &'a Workspace,
    /// Validation `(node, label)` pairs visible to the method.
    pub val: &'a [(usize, usize)],
    pub seed: u64,
    pub round: usize,
}

/// Labels the method may see for one seed: noise flips and training-set
/// subsampling applied.
fn visible_setup(ws: &Workspace, cfg: &RunConfig, seed: u64) -> Result<(Split, Vec<usize>)> {
    let split = subsample_train(&ws.split, cfg.train_fraction_beta, derive_seed(seed, STREAM_BETA))?;
    let mut pool = split.train.clone();
    if cfg.noise_on_validation {
        pool.extend_from_slice(&split.val);
    }
    let labels = flip_labels(
        ws.graph.labels(),
        ws.graph.n_classes(),
        &pool,
        cfg.noise_sigma,
        derive_seed(seed, STREAM_NOISE),
    )?;
    Ok((split, labels))
}

fn fit_model(ws: &Workspace, cfg: &RunConfig, seed: u64, round: usize, labels: &[(usize, usize)], val: &[(usize, usize)]) -> Result<GcnModel> {
    let model_seed = derive_seed(seed, round as u64);
    let model = init_model(ws.graph.n_features(), cfg.train.hidden_dim, ws.graph.n_classes(), model_seed);
    let out = train(model, &ws.adj_sym, &ws.features, labels, val, &cfg.train)?;
    debug!(
        "round {round}: {} training labels, best epoch {} (val {:.4})",
        labels.len(),
        out.best_epoch,
        out.best_val_acc
    );
    Ok(out.model)
}

fn non_anchored(n: usize, anchored: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; n];
    for &a in anchored {
        mark[a] = true;
    }
    (0..n).filter(|&u| !mark[u]).collect()
}

/// Selects this round's `(node, pseudo_label)` pairs.
pub fn select_for_strategy(
    strategy: Strategy,
    logits: &Array2<f64>,
    state: &LabelState,
    cfg: &RunConfig,
    ctx: &SelectionContext<'_>,
) -> Result<Selection> {
    if state.unlabeled().is_empty() {
        return Err(Error::PoolExhausted);
    }
    let kind = if strategy.calibrates() {
        cfg.calibration
    } else {
        CalibrationKind::None
    };
    let val_nodes: Vec<usize> = ctx.val.iter().map(|p| p.0).collect();
    let val_labels: Vec<usize> = ctx.val.iter().map(|p| p.1).collect();
    let calibrator = Calibrator::fit(kind, logits.select(ndarray::Axis(0), &val_nodes).view(), &val_labels)?;
    let probs = calibrator.apply(logits);
    let z = calibrator.calibrated_logits(logits);
    let k = cfg.select_k;
    let cap = cfg.delta_memory_cap_mb.saturating_mul(1 << 20);
    let anchored = state.anchored();
    let eval = non_anchored(ctx.ws.n_nodes(), &anchored);
    let excl = cfg.exclude_selected_from_objective;

    let selected = match strategy {
        Strategy::Raw => Vec::new(),
        Strategy::Random => {
            let pool: Vec<usize> = state.unlabeled().iter().copied().collect();
            let mut rng = rng_for(ctx.seed, STREAM_RANDOM + ctx.round as u64);
            let pred = argmax_rows(logits);
            let mut picked: Vec<usize> = sample(&mut rng, pool.len(), k.min(pool.len())).into_iter().map(|i| pool[i]).collect();
            picked.sort_unstable();
            picked.into_iter().map(|u| (u, pred[u])).collect()
        }
        Strategy::ConfCal | Strategy::ConfUncal => {
            let pool = select_candidates(&probs, &z, state, k)?;
            pool.nodes.iter().copied().zip(pool.pseudo_labels.iter().copied()).collect()
        }
        Strategy::Bangs | Strategy::BangsUncal | Strategy::BangsNoBanzhaf => {
            let pool = select_candidates(&probs, &z, state, cfg.pool_size)?;
            if pool.len() <= k {
                pool.nodes.iter().copied().zip(pool.pseudo_labels.iter().copied()).collect()
            } else {
                let pst = build_state(&ctx.ws.adj_row, &z, &anchored, &pool.nodes, &cfg.ppr(), cap)?;
                let u = |pos: &[usize]| utility_at_positions(&pst, pos, &eval, excl);
                let values = if strategy == Strategy::BangsNoBanzhaf {
                    let empty = u(&[])?;
                    (0..pool.len()).map(|i| Ok(u(&[i])? - empty)).collect::<Result<Vec<f64>>>()?
                } else {
                    match cfg.banzhaf_mode {
                        BanzhafMode::Exhaustive => exhaustive_banzhaf(pool.len(), k, u)?,
                        BanzhafMode::Msr => {
                            let msr = MsrConfig {
                                samples: cfg.banzhaf_samples,
                                k,
                                seed: derive_seed(ctx.seed, STREAM_MSR + ctx.round as u64),
                                sampling: cfg.sampling,
                                cache: cfg.cache_utilities,
                                parallel: cfg.parallel,
                            };
                            msr_banzhaf(pool.len(), &msr, u)?.values
                        }
                    }
                };
                top_k_select(&values, &pool, k)?
            }
        }
    };

    let objective = if selected.is_empty() {
        None
    } else {
        let nodes: Vec<usize> = selected.iter().map(|p| p.0).collect();
        let pst = build_state(&ctx.ws.adj_row, &z, &anchored, &nodes, &cfg.ppr(), cap)?;
        Some(utility(&pst, &nodes, &eval, excl)?)
    };
    Ok(Selection {
        selected,
        objective,
        calibrator,
    })
}

fn evaluate(model: &GcnModel, ws: &Workspace, split: &Split, visible: &[usize]) -> Result<(Array2<f64>, f64, f64)> {
    let logits = model.forward(&ws.adj_sym, &ws.features, Mode::Eval)?;
    let pred = argmax_rows(&logits);
    let val = accuracy(&pred, visible, &split.val)?;
    let test = accuracy(&pred, ws.graph.labels(), &split.test)?;
    Ok((logits, val, test))
}

/// One self-training run for one seed.
pub fn run(ws: &Workspace, cfg: &RunConfig, seed: u64) -> Result<RunReport> {
    cfg.validate()?;
    let (split, visible) = visible_setup(ws, cfg, seed)?;
    let val: Vec<(usize, usize)> = split.val.iter().map(|&u| (u, visible[u])).collect();
    let mut state = LabelState::new(&split, &visible);
    let timed = |start: Instant| if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };

    let start = Instant::now();
    let mut teacher = fit_model(ws, cfg, seed, 0, &state.training_labels(), &val)?;
    let (mut logits, val_acc, test_acc) = evaluate(&teacher, ws, &split, &visible)?;
    let mut records = vec![RoundRecord {
        round: 0,
        n_selected: 0,
        pseudo_acc: None,
        val_acc,
        test_acc,
        objective: None,
        wall_time_s: timed(start),
    }];
    info!("seed {seed} [{}] round 0: val {val_acc:.4} test {test_acc:.4}", cfg.strategy);

    let rounds = if cfg.strategy == Strategy::Raw { 0 } else { cfg.rounds };
    let mut pool_exhausted = false;
    let mut stopped_early = false;
    let (mut best_val, mut best_val_round) = (val_acc, 0);
    for round in 1..=rounds {
        if state.unlabeled().is_empty() {
            pool_exhausted = true;
            warn!("seed {seed}: pseudo-label pool exhausted after round {}", round - 1);
            break;
        }
        let start = Instant::now();
        let ctx = SelectionContext {
            ws,
            val: &val,
            seed,
            round,
        };
        let sel = select_for_strategy(cfg.strategy, &logits, &state, cfg, &ctx)?;
        if sel.selected.is_empty() {
            pool_exhausted = true;
            break;
        }
        state.commit_round(round, &sel.selected)?;
        let truth = ws.graph.labels();
        let hits = sel.selected.iter().filter(|&&(u, y)| truth[u] == y).count();
        teacher = fit_model(ws, cfg, seed, round, &state.training_labels(), &val)?;
        let (next_logits, val_acc, test_acc) = evaluate(&teacher, ws, &split, &visible)?;
        logits = next_logits;
        records.push(RoundRecord {
            round,
            n_selected: sel.selected.len(),
            pseudo_acc: Some(hits as f64 / sel.selected.len() as f64),
            val_acc,
            test_acc,
            objective: sel.objective,
            wall_time_s: timed(start),
        });
        info!(
            "seed {seed} [{}] round {round}: +{} (pseudo acc {:.3}) val {val_acc:.4} test {test_acc:.4}",
            cfg.strategy,
            sel.selected.len(),
            hits as f64 / sel.selected.len() as f64
        );
        if val_acc > best_val {
            best_val = val_acc;
            best_val_round = round;
        } else if cfg.early_stop && round - best_val_round >= cfg.round_patience {
            stopped_early = true;
            break;
        }
    }

    let summary = summarize(&records, cfg.strategy, seed, pool_exhausted, stopped_early);
    Ok(RunReport {
        records,
        pseudo_labels: state.pseudo().to_vec(),
        summary,
    })
}

fn summarize(records: &[RoundRecord], strategy: Strategy, seed: u64, pool_exhausted: bool, stopped_early: bool) -> RunSummary {
    let first_max = |key: &dyn Fn(&RoundRecord) -> f64, from: usize| {
        records[from..]
            .iter()
            .fold(None::<&RoundRecord>, |best, r| match best {
                Some(b) if key(b) >= key(r) => Some(b),
                _ => Some(r),
            })
            .expect("at least one record")
    };
    let best = first_max(&|r| r.test_acc, usize::from(records.len() > 1));
    let stopped = first_max(&|r| r.val_acc, 0);
    RunSummary {
        strategy,
        seed,
        raw_test: records[0].test_acc,
        best_round_test: best.test_acc,
        best_round: best.round,
        early_stopped_test: stopped.test_acc,
        early_stopped_round: stopped.round,
        rounds_completed: records.len() - 1,
        pool_exhausted,
        stopped_early,
    }
}

/// Runs every configured seed; seeds run in parallel when `cfg.parallel`.
/// Each entry is that seed's report or error.
pub fn run_seeds(ws: &Workspace, cfg: &RunConfig) -> Vec<(u64, Result<RunReport>)> {
    let one = |&seed: &u64| (seed, run(ws, cfg, seed));
    if cfg.parallel {
        cfg.seeds.par_iter().map(one).collect()
    } else {
        cfg.seeds.iter().map(one).collect()
    }
}

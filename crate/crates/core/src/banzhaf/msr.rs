//! Maximum-sample-reuse estimation: every sampled coalition is evaluated
//! once and reused for every candidate, split by membership.

use std::collections::HashMap;

use log::warn;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Size uniform on `1..=k`, then a uniform subset of that size.
    #[default]
    SizeUniform,
    /// Independent fair coins per candidate; draws larger than `k` are cut
    /// down to a uniform `k`-subset of the drawn members.
    BinomialTruncated,
    /// Each coalition of size `s < k` twice as likely as one of size `k`.
    /// The membership difference of means then ranks candidates exactly as
    /// the k-bounded value does, in expectation.
    CoalitionWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsrConfig {
    pub samples: usize,
    pub k: usize,
    pub seed: u64,
    pub sampling: SamplingMode,
    /// Evaluate each distinct coalition once per run.
    pub cache: bool,
    pub parallel: bool,
}

impl MsrConfig {
    pub fn new(samples: usize, k: usize, seed: u64) -> Self {
        MsrConfig {
            samples,
            k,
            seed,
            sampling: SamplingMode::SizeUniform,
            cache: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanzhafEstimate {
    /// `mean U over samples containing i − mean U over samples without i`,
    /// or `−∞` when either side is empty.
    pub values: Vec<f64>,
    pub n_in: Vec<usize>,
    pub n_out: Vec<usize>,
    pub sum_in: Vec<f64>,
    pub sum_out: Vec<f64>,
    /// `var_in / n_in + var_out / n_out`, the squared standard error of the
    /// difference of means.
    pub variance: Vec<f64>,
    /// Number of utility evaluations performed.
    pub evaluations: usize,
}

fn draw(pool_size: usize, cfg: &MsrConfig, idx: usize) -> Vec<usize> {
    let mut rng = rng_for(cfg.seed, idx as u64);
    let k = cfg.k.min(pool_size);
    let mut s = match cfg.sampling {
        SamplingMode::SizeUniform => {
            let m = rng.random_range(1..=k);
            sample(&mut rng, pool_size, m).into_vec()
        }
        SamplingMode::CoalitionWeighted => {
            let weights = coalition_size_weights(pool_size, k);
            let total: f64 = weights.iter().sum();
            let mut r = rng.random::<f64>() * total;
            let mut m = k;
            for (i, w) in weights.iter().enumerate() {
                if r < *w {
                    m = i + 1;
                    break;
                }
                r -= w;
            }
            sample(&mut rng, pool_size, m).into_vec()
        }
        SamplingMode::BinomialTruncated => {
            let drawn: Vec<usize> = (0..pool_size).filter(|_| rng.random::<bool>()).collect();
            if drawn.len() > k {
                let keep = sample(&mut rng, drawn.len(), k);
                keep.iter().map(|j| drawn[j]).collect()
            } else {
                drawn
            }
        }
    };
    s.sort_unstable();
    s
}

/// Unnormalized probability of drawing a coalition of size `1..=k`:
/// per-coalition weight (2 below `k`, 1 at `k`) times the number of
/// coalitions of that size.
fn coalition_size_weights(pool_size: usize, k: usize) -> Vec<f64> {
    (1..=k)
        .map(|s| if s < k { 2.0 } else { 1.0 } * super::binomial(pool_size, s))
        .collect()
}

/// Running mean and squared deviation (Welford), so a constant stream has
/// a mean equal to that constant exactly.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
    sum: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance_of_mean(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        self.m2 / (self.n - 1) as f64 / self.n as f64
    }
}

/// MSR estimate of the k-bounded Banzhaf ranking over a pool of
/// `pool_size` candidates. Sample `i` uses its own RNG stream derived from
/// `(seed, i)`, and accumulation runs in sample order after all evaluations,
/// so results do not depend on the thread count.
pub fn msr_banzhaf<U>(pool_size: usize, cfg: &MsrConfig, utility: U) -> Result<BanzhafEstimate>
where
    U: Fn(&[usize]) -> Result<f64> + Sync,
{
    if cfg.samples == 0 {
        return Err(Error::invalid("banzhaf_samples must be at least 1"));
    }
    if cfg.k == 0 {
        return Err(Error::invalid("the Banzhaf bound k must be at least 1"));
    }
    if pool_size == 0 {
        return Err(Error::Empty("candidate pool"));
    }
    let expected = cfg.samples as f64 * cfg.k.min(pool_size) as f64 / (2.0 * pool_size as f64);
    if expected < 5.0 {
        warn!(
            "B·k/(2K) = {expected:.2}: many candidates will appear in few samples; consider more samples"
        );
    }

    let draw_all = |i: usize| draw(pool_size, cfg, i);
    let subsets: Vec<Vec<usize>> = if cfg.parallel {
        (0..cfg.samples).into_par_iter().map(draw_all).collect()
    } else {
        (0..cfg.samples).map(draw_all).collect()
    };

    let (utilities, evaluations) = if cfg.cache {
        let mut slot: HashMap<&[usize], usize> = HashMap::new();
        let mut distinct: Vec<&[usize]> = Vec::new();
        let which: Vec<usize> = subsets
            .iter()
            .map(|s| {
                *slot.entry(s.as_slice()).or_insert_with(|| {
                    distinct.push(s.as_slice());
                    distinct.len() - 1
                })
            })
            .collect();
        let vals = evaluate(&distinct, cfg.parallel, &utility)?;
        (which.iter().map(|&w| vals[w]).collect::<Vec<f64>>(), distinct.len())
    } else {
        let refs: Vec<&[usize]> = subsets.iter().map(Vec::as_slice).collect();
        (evaluate(&refs, cfg.parallel, &utility)?, subsets.len())
    };

    let mut inside = vec![Moments::default(); pool_size];
    let mut outside = vec![Moments::default(); pool_size];
    let mut member = vec![false; pool_size];
    for (s, &u) in subsets.iter().zip(&utilities) {
        for &p in s {
            member[p] = true;
        }
        for p in 0..pool_size {
            if member[p] {
                inside[p].push(u);
            } else {
                outside[p].push(u);
            }
        }
        for &p in s {
            member[p] = false;
        }
    }

    let mut sentinel = 0;
    let values = inside
        .iter()
        .zip(&outside)
        .map(|(a, b)| {
            if a.n == 0 || b.n == 0 {
                sentinel += 1;
                f64::NEG_INFINITY
            } else {
                a.mean - b.mean
            }
        })
        .collect();
    if sentinel > 0 {
        warn!("{sentinel} candidates lack samples on one side and will not be selected");
    }
    Ok(BanzhafEstimate {
        values,
        n_in: inside.iter().map(|m| m.n).collect(),
        n_out: outside.iter().map(|m| m.n).collect(),
        sum_in: inside.iter().map(|m| m.sum).collect(),
        sum_out: outside.iter().map(|m| m.sum).collect(),
        variance: inside
            .iter()
            .zip(&outside)
            .map(|(a, b)| a.variance_of_mean() + b.variance_of_mean())
            .collect(),
        evaluations,
    })
}

fn evaluate<U>(subsets: &[&[usize]], parallel: bool, utility: &U) -> Result<Vec<f64>>
where
    U: Fn(&[usize]) -> Result<f64> + Sync,
{
    if parallel {
        subsets.par_iter().map(|s| utility(s)).collect()
    } else {
        subsets.iter().map(|s| utility(s)).collect()
    }
}

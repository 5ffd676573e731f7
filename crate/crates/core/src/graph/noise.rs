use rand::seq::index;
use rand::Rng;

use super::Split;
use crate::error::{Error, Result};
use crate::rng;

/// Flips exactly `⌊sigma · |pool|⌋` labels of nodes drawn uniformly from
/// `pool`; each flipped label is uniform over the other `n_classes - 1` classes.
pub fn flip_labels(labels: &[usize], n_classes: usize, pool: &[usize], sigma: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::invalid(format!("noise fraction {sigma} outside [0, 1]")));
    }
    let mut out = labels.to_vec();
    let n_flip = (sigma * pool.len() as f64).floor() as usize;
    if n_flip == 0 {
        return Ok(out);
    }
    if n_classes < 2 {
        return Err(Error::invalid("label flipping needs at least two classes"));
    }
    let mut rng = rng::rng(seed);
    for pos in index::sample(&mut rng, pool.len(), n_flip) {
        let node = pool[pos];
        let old = labels[node];
        // Draw from C-1 slots and skip over the original class.
        let mut new = rng.random_range(0..n_classes - 1);
        if new >= old {
            new += 1;
        }
        out[node] = new;
    }
    Ok(out)
}

/// Keeps a uniform `⌈beta · |train|⌉`-subset of the training nodes.
pub fn subsample_train(split: &Split, beta: f64, seed: u64) -> Result<Split> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("training fraction {beta} outside (0, 1]")));
    }
    let keep = (beta * split.train.len() as f64).ceil() as usize;
    if keep == 0 {
        return Err(Error::Empty("training set after subsampling"));
    }
    if keep == split.train.len() {
        return Ok(split.clone());
    }
    let mut train: Vec<usize> = index::sample(&mut rng::rng(seed), split.train.len(), keep)
        .into_iter()
        .map(|i| split.train[i])
        .collect();
    train.sort_unstable();
    Ok(Split::new(train, split.val.clone(), split.test.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let labels = vec![0, 1, 2, 1];
        assert_eq!(flip_labels(&labels, 3, &[0, 1, 2, 3], 0.0, 1).unwrap(), labels);
    }

    #[test]
    fn full_flip_binary_inverts() {
        let labels = vec![0, 1, 1, 0, 1];
        let out = flip_labels(&labels, 2, &[0, 1, 2, 3, 4], 1.0, 9).unwrap();
        assert_eq!(out, vec![1, 0, 0, 1, 0]);
    }

    #[test]
    fn thirty_percent_of_ten_flips_three() {
        let labels: Vec<usize> = (0..10).map(|i| i % 4).collect();
        let pool: Vec<usize> = (0..10).collect();
        for seed in 0..100 {
            let out = flip_labels(&labels, 4, &pool, 0.3, seed).unwrap();
            let changed = labels.iter().zip(&out).filter(|(a, b)| a != b).count();
            assert_eq!(changed, 3, "seed {seed}");
        }
    }

    #[test]
    fn only_pool_nodes_change() {
        let labels = vec![0; 20];
        let pool: Vec<usize> = (10..20).collect();
        let out = flip_labels(&labels, 3, &pool, 0.5, 3).unwrap();
        assert!(out[..10].iter().all(|&l| l == 0));
    }

    #[test]
    fn sigma_out_of_range() {
        assert!(flip_labels(&[0], 2, &[0], 1.5, 0).is_err());
        assert!(flip_labels(&[0], 2, &[0], -0.1, 0).is_err());
    }

    #[test]
    fn subsample_counts() {
        let split = Split::new((0..140).collect(), vec![200], vec![300]);
        assert_eq!(subsample_train(&split, 1.0, 0).unwrap(), split);
        let half = subsample_train(&split, 0.5, 0).unwrap();
        assert_eq!(half.train.len(), 70);
        assert_eq!(half.val, split.val);
        assert_eq!(half.test, split.test);
        assert_eq!(half, subsample_train(&split, 0.5, 0).unwrap());
        assert_eq!(subsample_train(&split, 0.001, 0).unwrap().train.len(), 1);
        assert!(subsample_train(&split, 0.0, 0).is_err());
    }
}

use std::collections::BTreeSet;

use serde::Serialize;

use super::Split;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PseudoLabel {
    pub node: usize,
    pub label: usize,
    pub round: usize,
}

/// Partition of the pseudo-label-eligible nodes into ground-truth labeled,
/// pseudo-labeled, and unlabeled sets. Validation and test nodes are outside
/// the partition and can never receive a pseudo-label.
#[derive(Debug, Clone)]
pub struct LabelState {
    labeled: Vec<(usize, usize)>,
    pseudo: Vec<PseudoLabel>,
    unlabeled: BTreeSet<usize>,
    round: usize,
}

impl LabelState {
    /// `labels` are the labels training may see (possibly noisy).
    pub fn new(split: &Split, labels: &[usize]) -> Self {
        let n = labels.len();
        let labeled = split.train.iter().map(|&u| (u, labels[u])).collect();
        let mut blocked = vec![false; n];
        for &u in split.train.iter().chain(&split.val).chain(&split.test) {
            blocked[u] = true;
        }
        LabelState {
            labeled,
            pseudo: Vec::new(),
            unlabeled: (0..n).filter(|&u| !blocked[u]).collect(),
            round: 0,
        }
    }

    pub fn labeled(&self) -> &[(usize, usize)] {
        &self.labeled
    }

    pub fn pseudo(&self) -> &[PseudoLabel] {
        &self.pseudo
    }

    pub fn unlabeled(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Labeled followed by pseudo-labeled `(node, label)` pairs.
    pub fn training_labels(&self) -> Vec<(usize, usize)> {
        self.labeled
            .iter()
            .copied()
            .chain(self.pseudo.iter().map(|p| (p.node, p.label)))
            .collect()
    }

    /// Labeled and pseudo-labeled nodes, i.e. the propagation anchors.
    pub fn anchored(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .labeled
            .iter()
            .map(|&(u, _)| u)
            .chain(self.pseudo.iter().map(|p| p.node))
            .collect();
        v.sort_unstable();
        v
    }

    /// Starts round `round` by moving `selected` from unlabeled to
    /// pseudo-labeled. Earlier pseudo-labels are untouched.
    pub fn commit_round(&mut self, round: usize, selected: &[(usize, usize)]) -> Result<()> {
        if round <= self.round {
            return Err(Error::invalid(format!(
                "round {round} does not follow round {}",
                self.round
            )));
        }
        let mut seen = BTreeSet::new();
        for &(u, _) in selected {
            if !self.unlabeled.contains(&u) || !seen.insert(u) {
                return Err(Error::invalid(format!("node {u} is not available for pseudo-labeling")));
            }
        }
        for &(node, label) in selected {
            self.unlabeled.remove(&node);
            self.pseudo.push(PseudoLabel { node, label, round });
        }
        self.round = round;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_commit() {
        let split = Split::new(vec![0], vec![1], vec![2]);
        let labels = vec![0, 1, 0, 1, 0, 1];
        let mut st = LabelState::new(&split, &labels);
        assert_eq!(st.unlabeled().iter().copied().collect::<Vec<_>>(), vec![3, 4, 5]);
        st.commit_round(1, &[(4, 1)]).unwrap();
        assert_eq!(st.training_labels(), vec![(0, 0), (4, 1)]);
        assert_eq!(st.anchored(), vec![0, 4]);
        assert!(st.commit_round(2, &[(4, 0)]).is_err());
        assert!(st.commit_round(2, &[(1, 0)]).is_err(), "validation node");
        assert!(st.commit_round(1, &[(5, 0)]).is_err(), "round must advance");
        st.commit_round(2, &[(5, 0), (3, 1)]).unwrap();
        assert!(st.unlabeled().is_empty());
        assert_eq!(st.pseudo()[0], PseudoLabel { node: 4, label: 1, round: 1 });
    }
}

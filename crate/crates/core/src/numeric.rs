//! Row-wise softmax helpers shared by the model, calibration, and objective.

use ndarray::{Array2, ArrayView1, ArrayViewMut1};

/// In-place numerically stable softmax of one row.
pub fn softmax_in_place(mut row: ArrayViewMut1<'_, f64>) {
    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut sum = 0.0;
    row.mapv_inplace(|x| {
        let e = (x - max).exp();
        sum += e;
        e
    });
    row.mapv_inplace(|x| x / sum);
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.to_owned();
    for row in p.rows_mut() {
        softmax_in_place(row);
    }
    p
}

/// `log Σ exp(x)`.
pub fn log_sum_exp(row: ArrayView1<'_, f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows().into_iter().map(argmax).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_of_log_weights() {
        let p = softmax_rows(&array![[1f64.ln(), 2f64.ln(), 3f64.ln()]]);
        for (got, want) in p.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax_rows(&array![[0.3, -1.2, 2.0]]);
        let b = softmax_rows(&array![[100.3, 98.8, 102.0]]);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_logits_uniform() {
        let p = softmax_rows(&array![[4.0, 4.0, 4.0, 4.0]]);
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn argmax_ties_pick_first() {
        assert_eq!(argmax(array![0.2, 0.5, 0.5].view()), 1);
    }
}

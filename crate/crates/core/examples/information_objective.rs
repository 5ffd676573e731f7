//! The selection objective: entropy of the mean prediction minus the mean
//! per-node entropy. It is large when nodes are individually confident but
//! disagree with each other.

use ndarray::array;

use graph_selftrain::objective::{mutual_information_decomposition_check, objective};

fn main() -> graph_selftrain::Result<()> {
    let cases = [
        ("confident, diverse", array![[0.98, 0.01, 0.01], [0.01, 0.98, 0.01], [0.01, 0.01, 0.98]]),
        ("confident, same class", array![[0.98, 0.01, 0.01], [0.97, 0.02, 0.01], [0.99, 0.005, 0.005]]),
        ("uncertain", array![[0.34, 0.33, 0.33], [0.3, 0.4, 0.3], [0.33, 0.33, 0.34]]),
    ];
    for (name, p) in cases {
        let o = objective(&p)?;
        println!(
            "{name:<22} H(mean) {:.4}  mean H {:.4}  objective {:.4}",
            o.aggregate_entropy, o.mean_individual_entropy, o.value
        );
    }

    let joint = array![[0.2, 0.05, 0.05], [0.02, 0.3, 0.08], [0.1, 0.1, 0.1]];
    let (direct, decomposed) = mutual_information_decomposition_check(&joint);
    println!("mutual information {direct:.6} = {decomposed:.6} via the entropy decomposition");
    Ok(())
}

//! Generators shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::MixedGraph;

/// Random DAG over `n0..n{n-1}`: each pair `i < j` of a shuffled order gets
/// an edge with probability `p`.
pub fn random_dag(n: usize, p: f64, seed: u64) -> MixedGraph {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut g = MixedGraph::with_nodes((0..n).map(|i| format!("n{i}"))).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                g.add_directed(order[i], order[j]).unwrap();
            }
        }
    }
    g
}

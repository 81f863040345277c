//! Seeded problem instances shared by the benches.

use multikernel::error_analysis::{layout_nodes, NodeLayout};
use multikernel::{Domain, FeatureGram, FeatureModel, NodeSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Instance {
    pub model: FeatureModel,
    pub nodes: NodeSet,
    pub gram: FeatureGram,
}

/// `n` Halton nodes in `[-1, 1]^d`, `k` trigonometric features with decay
/// 0.8 and standard normal data.
pub fn instance(d: usize, n: usize, k: usize, seed: u64) -> Instance {
    let domain = Domain::cube(d, -1.0, 1.0).expect("valid box");
    let model = FeatureModel::trigonometric(domain, k, 0.8).expect("valid model");
    let points = layout_nodes(model.domain(), NodeLayout::Halton, n).expect("n > 0");
    let values = normal_vec(n, seed);
    let gram = FeatureGram::from_model(&model, &points).expect("points in domain");
    let nodes = NodeSet::new(points, values).expect("Halton points are distinct");
    Instance { model, nodes, gram }
}

pub fn normal_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

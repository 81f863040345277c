#![allow(dead_code)]

use multikernel::{Domain, FeatureModel, NodeSet};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// `n` points in `[-1, 1]^d` at pairwise distance at least `min_sep`
/// (rejection sampling).
pub fn separated_points(rng: &mut ChaCha8Rng, d: usize, n: usize, min_sep: f64) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    while points.len() < n {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let far = points
            .iter()
            .all(|q| q.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= min_sep);
        if far {
            points.push(p);
        }
    }
    points
}

/// A random design: trigonometric features on `[-1, 1]^d` with mild decay,
/// `K` between `2n` and `3n` and separated nodes.
pub fn trig_instance(rng: &mut ChaCha8Rng, d: usize, n: usize, k: usize) -> (FeatureModel, Vec<Vec<f64>>) {
    let domain = Domain::cube(d, -1.0, 1.0).unwrap();
    let model = FeatureModel::trigonometric(domain, k, 0.9).unwrap();
    let sep = 0.5 / (n as f64).powf(1.0 / d as f64);
    (model, separated_points(rng, d, n, sep))
}

/// Gaussian feature table over random points: a generic full-rank design.
pub fn table_instance(rng: &mut ChaCha8Rng, d: usize, n: usize, k: usize) -> (FeatureModel, Vec<Vec<f64>>) {
    let points = separated_points(rng, d, n, 1e-3);
    let features: Vec<Vec<f64>> = (0..n).map(|_| normal_vec(rng, k)).collect();
    let json = serde_json::json!({
        "points": points,
        "features": features,
        "domain": { "lower": vec![-1.0; d], "upper": vec![1.0; d] },
    })
    .to_string();
    (FeatureModel::custom_table_from_json(&json).unwrap(), points)
}

pub fn nodes_with_values(points: Vec<Vec<f64>>, values: Vec<f64>) -> NodeSet {
    NodeSet::new(points, values).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    diff / scale
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Orthonormal basis of `{gamma : V gamma = 0}`, as columns.
pub fn right_null_space(v: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = v.shape();
    let mut padded = DMatrix::zeros(k, k);
    padded.view_mut((0, 0), (n, k)).copy_from(v);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.unwrap();
    let tol = svd.singular_values.max() * k as f64 * f64::EPSILON;
    let keep: Vec<usize> = (0..k).filter(|&i| svd.singular_values[i] <= tol).collect();
    DMatrix::from_fn(k, keep.len(), |r, c| vt[(keep[c], r)])
}

/// Double-double number `hi + lo`, enough to make brute-force sums exact
/// to well below `f64` rounding.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = Self::two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = Self::two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = Self::two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

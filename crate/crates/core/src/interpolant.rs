//! Multi-kernel interpolants and their norms in `B^p`.
//!
//! The interpolant of order `m` is
//!
//! ```text
//! s_m(x) = sum_{i_1..i_{m-1}} c_{i_1} ... c_{i_{m-1}} Phi_m(x, x_{i_1}, ..., x_{i_{m-1}})
//!        = sum_k (v_k . c)^{m-1} phi_k(x)
//! ```
//!
//! with `A_m c^{m-1} = y`. The second form is what [`Interpolant::evaluate`]
//! uses; it also exhibits the feature coefficients `alpha_k = (v_k . c)^{m-1}`
//! of `s_m`, whose `l_{m/(m-1)}` norm is the norm of `s_m` in `B^{m/(m-1)}`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_model::{check_order, Domain, FeatureFamily, FeatureModel};
use crate::mls_solver::{self, SolveReport, SolverOptions};
use crate::multi_tensor::FeatureGram;

/// Nodes closer than this are treated as duplicates.
pub const MIN_NODE_SEPARATION: f64 = 1e-12;

/// Pairwise-distinct data sites with their values.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl NodeSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("node set is empty".into()));
        }
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: values.len(),
            });
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidInput(
                "nodes must have at least one coordinate".into(),
            ));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite node {p:?}")));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {v}")));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let distance = euclidean(&points[i], &points[j]);
                if distance <= MIN_NODE_SEPARATION {
                    return Err(Error::DuplicateNodes {
                        first: i,
                        second: j,
                        distance,
                    });
                }
            }
        }
        Ok(Self { points, values })
    }

    /// Nodes without data, e.g. for power-function evaluation.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same sites, new data.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: values.len(),
            });
        }
        Ok(Self {
            points: self.points.clone(),
            values,
        })
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A fitted multi-kernel interpolant `s_m`. Immutable once built.
#[derive(Debug, Clone)]
pub struct Interpolant {
    model: FeatureModel,
    nodes: NodeSet,
    order: usize,
    coefficients: Vec<f64>,
    gram: FeatureGram,
    report: Option<SolveReport>,
}

/// Builds the feature Gram of the nodes and solves `A_m c^{m-1} = y`.
pub fn fit(model: &FeatureModel, nodes: &NodeSet, m: usize, opts: &SolverOptions) -> Result<Interpolant> {
    check_order(m)?;
    let gram = FeatureGram::from_model(model, nodes.points())?;
    let report = mls_solver::solve_multilinear(&gram, m, nodes.values(), opts)?;
    Ok(Interpolant {
        model: model.clone(),
        nodes: nodes.clone(),
        order: m,
        coefficients: report.coefficients.clone(),
        gram,
        report: Some(report),
    })
}

impl Interpolant {
    /// Reassembles an interpolant from known coefficients without solving.
    pub fn from_parts(
        model: FeatureModel,
        nodes: NodeSet,
        order: usize,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        check_order(order)?;
        if coefficients.len() != nodes.n() {
            return Err(Error::DimensionMismatch {
                expected: nodes.n(),
                found: coefficients.len(),
            });
        }
        let gram = FeatureGram::from_model(&model, nodes.points())?;
        Ok(Self {
            model,
            nodes,
            order,
            coefficients,
            gram,
            report: None,
        })
    }

    pub fn model(&self) -> &FeatureModel {
        &self.model
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn gram(&self) -> &FeatureGram {
        &self.gram
    }

    /// Solver diagnostics, present when built by [`fit`].
    pub fn report(&self) -> Option<&SolveReport> {
        self.report.as_ref()
    }

    /// `|A_m c^{m-1} - y|_2` for the stored coefficients.
    pub fn residual_norm(&self) -> f64 {
        mls_solver::residual_norm(&self.gram, self.order, &self.coefficients, self.nodes.values())
            .expect("dimensions fixed at construction")
    }

    /// `alpha_k = (v_k . c)^{m-1}`, so that `s_m = sum_k alpha_k phi_k`.
    pub fn feature_coefficients(&self) -> Vec<f64> {
        self.gram
            .project_unchecked(&self.coefficients)
            .into_iter()
            .map(|a| a.powi(self.order as i32 - 1))
            .collect()
    }

    /// `s_m(x)` in `O(K)` after the feature coefficients are formed.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let phi = self.model.eval_features(x)?;
        Ok(dot(&self.feature_coefficients(), &phi))
    }

    /// Evaluates at many points in parallel; results keep the input order.
    pub fn evaluate_many<P: AsRef<[f64]> + Sync>(&self, points: &[P]) -> Vec<Result<f64>> {
        let alpha = self.feature_coefficients();
        points
            .par_iter()
            .map(|x| Ok(dot(&alpha, &self.model.eval_features(x.as_ref())?)))
            .collect()
    }

    /// Exponent `p = m/(m-1)` of the space `B^p` holding `s_m`.
    pub fn norm_exponent(&self) -> f64 {
        self.order as f64 / (self.order as f64 - 1.0)
    }

    /// `|s_m| = (A_m c^m)^{1 - 1/m}`.
    pub fn banach_norm_via_tensor(&self) -> f64 {
        let energy = self
            .gram
            .contract_m(self.order, &self.coefficients)
            .expect("dimensions fixed at construction");
        energy.powf(1.0 - 1.0 / self.order as f64)
    }

    /// `|alpha|_{m/(m-1)}` of the feature coefficients.
    pub fn banach_norm(&self) -> f64 {
        banach_norm_direct(&self.feature_coefficients(), self.norm_exponent())
            .expect("m/(m-1) lies in (1, 2]")
    }

    pub fn to_document(&self) -> InterpolantDocument {
        InterpolantDocument {
            family: self.model.family().clone(),
            domain: self.model.domain().clone(),
            truncation: self.model.truncation(),
            order: self.order,
            nodes: self.nodes.points().to_vec(),
            values: self.nodes.values().to_vec(),
            coefficients: self.coefficients.clone(),
        }
    }

    pub fn from_document(doc: InterpolantDocument) -> Result<Self> {
        let model = FeatureModel::new(doc.domain, doc.family)?;
        if model.truncation() != doc.truncation {
            return Err(Error::InvalidModel(format!(
                "document declares truncation {} but the family has {} features",
                doc.truncation,
                model.truncation()
            )));
        }
        let nodes = NodeSet::new(doc.nodes, doc.values)?;
        Self::from_parts(model, nodes, doc.order, doc.coefficients)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut json = self.to_json()?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk form of an [`Interpolant`]. Floats are written in shortest
/// round-trip notation, so loading reproduces them bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolantDocument {
    pub family: FeatureFamily,
    pub domain: Domain,
    pub truncation: usize,
    pub order: usize,
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `l_p` norm, `1 < p < inf`, scaled by the largest entry to avoid overflow.
pub fn banach_norm_direct(alpha: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    let scale = alpha.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = alpha.iter().map(|a| (a.abs() / scale).powf(p)).sum();
    Ok(scale * sum.powf(1.0 / p))
}

/// Coefficients `alpha_k |alpha_k|^{p-2} / |alpha|_p^{p-1}` of the Gateaux
/// derivative of the `B^p` norm at `f = sum_k alpha_k phi_k`. The result has
/// unit `l_q` norm, `q = p/(p-1)`.
pub fn gateaux_coefficients(alpha: &[f64], p: f64) -> Result<Vec<f64>> {
    let norm = banach_norm_direct(alpha, p)?;
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    // sign(a) (|a| / |alpha|)^{p-1} avoids |a|^{p-2} blowing up at a = 0 for p < 2
    Ok(alpha
        .iter()
        .map(|&a| a.signum() * (a.abs() / norm).powf(p - 1.0))
        .collect())
}

/// Dual pairing `<f, g> = alpha . beta` of `f = alpha^T phi` and `g = beta^T phi`.
pub fn dual_pairing(alpha: &[f64], beta: &[f64]) -> f64 {
    dot(alpha, beta)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

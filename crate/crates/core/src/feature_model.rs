//! Truncated feature expansions on a compact box and the kernels they induce.
//!
//! A [`FeatureModel`] holds features `phi_1, ..., phi_K` with
//! `phi_k(x) = sqrt(w_k) * b_k(x)`. From them
//!
//! ```text
//! Phi_2(z1, z2)        = sum_k phi_k(z1) phi_k(z2)
//! Phi_m(z1, ..., z_m)  = sum_k prod_i phi_k(z_i)
//! ```
//!
//! Built-in base functions are evaluated in reference coordinates
//! `u = (2x - lower - upper) / (upper - lower)`, which map the box onto
//! `[-1, 1]^d`:
//!
//! | family | `b_k(u)` | weight |
//! |--------|----------|--------|
//! | [`FeatureFamily::PowerSeries`] | `prod_j u_j^{e_j}` | `rho^{sum_j e_j}` |
//! | [`FeatureFamily::Trigonometric`] | `prod_j t(u_j)`, `t in {1, cos(pi f u), sin(pi f u)}` | `rho^{sum_j f_j}` |
//! | [`FeatureFamily::CustomTable`] | tabulated values | 1 |
//!
//! Index tuples are enumerated graded by level (total degree, or total
//! frequency), and in ascending lexicographic order within a level. For the
//! trigonometric family each axis carries a one-dimensional basis index
//! `t`: `0 -> 1`, `2f - 1 -> cos(pi f u)`, `2f -> sin(pi f u)`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points within this distance of a face are accepted and clamped onto it.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

/// Tabulated points are matched within this max-norm distance.
const TABLE_MATCH_TOLERANCE: f64 = 1e-12;

/// Axis-aligned compact box `[lower_0, upper_0] x ... x [lower_{d-1}, upper_{d-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain")]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawDomain> for Domain {
    type Error = Error;

    fn try_from(raw: RawDomain) -> Result<Self> {
        Domain::new(raw.lower, raw.upper)
    }
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "lower has {} coordinates, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "axis {j}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.clamp(x).is_ok()
    }

    /// Checks membership and snaps coordinates within [`DOMAIN_TOLERANCE`]
    /// of a face onto the face.
    pub fn clamp(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        x.iter()
            .enumerate()
            .map(|(axis, &value)| {
                let (lower, upper) = (self.lower[axis], self.upper[axis]);
                if value.is_nan() || value < lower - DOMAIN_TOLERANCE || value > upper + DOMAIN_TOLERANCE {
                    Err(Error::PointOutsideDomain {
                        axis,
                        value,
                        lower,
                        upper,
                    })
                } else {
                    Ok(value.clamp(lower, upper))
                }
            })
            .collect()
    }

    /// Affine image of a (clamped) point in `[-1, 1]^d`.
    fn to_reference(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| ((2.0 * v - lo - hi) / (hi - lo)).clamp(-1.0, 1.0))
            .collect()
    }

    /// Uniform tensor grid with `per_dim` points per axis (endpoints included),
    /// in row-major order (last axis fastest).
    pub fn grid(&self, per_dim: usize) -> Result<Vec<Vec<f64>>> {
        if per_dim < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points per axis, got {per_dim}"
            )));
        }
        let d = self.dim();
        let total = per_dim
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
        let axis: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let (lo, hi) = (self.lower[j], self.upper[j]);
                let step = (hi - lo) / (per_dim - 1) as f64;
                (0..per_dim)
                    .map(|i| {
                        if i + 1 == per_dim {
                            hi
                        } else {
                            lo + i as f64 * step
                        }
                    })
                    .collect()
            })
            .collect();
        let mut counter = vec![0usize; d];
        let mut out = Vec::with_capacity(total);
        for _ in 0..total {
            out.push((0..d).map(|j| axis[j][counter[j]]).collect());
            for j in (0..d).rev() {
                counter[j] += 1;
                if counter[j] < per_dim {
                    break;
                }
                counter[j] = 0;
            }
        }
        Ok(out)
    }

    /// Largest grid spacing of [`Domain::grid`] across axes.
    pub fn grid_spacing(&self, per_dim: usize) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) / (per_dim.max(2) - 1) as f64)
            .fold(0.0, f64::max)
    }
}

/// Feature values tabulated at a fixed set of points.
///
/// On disk this is the JSON document
///
/// ```json
/// {
///   "points":   [[x_1...], [x_2...], ...],
///   "features": [[phi_1(x_1), ..., phi_K(x_1)], [phi_1(x_2), ...], ...],
///   "domain":   {"lower": [...], "upper": [...]}
/// }
/// ```
///
/// `features[i]` is the row of all `K` feature values at `points[i]`.
/// `domain` is optional and defaults to the bounding box of the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub points: Vec<Vec<f64>>,
    pub features: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct FeatureTableFile {
    points: Vec<Vec<f64>>,
    features: Vec<Vec<f64>>,
    #[serde(default)]
    domain: Option<Domain>,
}

/// Index data of a feature family. Weights live alongside the indices so a
/// serialized family fully determines the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureFamily {
    PowerSeries {
        /// One multi-index of exponents per feature.
        exponents: Vec<Vec<u32>>,
        weights: Vec<f64>,
    },
    Trigonometric {
        /// One tuple of one-dimensional basis indices per feature.
        modes: Vec<Vec<u32>>,
        weights: Vec<f64>,
    },
    CustomTable(FeatureTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    PowerSeries,
    Trigonometric,
    CustomTable,
}

/// Diagnostic for the summability of the truncated expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummabilityReport {
    /// `max_x sum_k |phi_k(x)|` over the grid.
    pub max_abs_sum: f64,
    /// `max_x (sum_{k > ceil(K/2)} |phi_k(x)|) / sum_k |phi_k(x)|`; zero for `K = 1`.
    pub tail_ratio: f64,
}

/// An immutable truncated feature expansion on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    domain: Domain,
    family: FeatureFamily,
}

impl FeatureModel {
    pub fn new(domain: Domain, family: FeatureFamily) -> Result<Self> {
        let model = Self { domain, family };
        model.validate()?;
        Ok(model)
    }

    /// Power-series features with graded exponents and weights `decay^{|e|}`.
    pub fn power_series(domain: Domain, truncation: usize, decay: f64) -> Result<Self> {
        check_truncation_and_decay(truncation, decay)?;
        let exponents = graded_indices(domain.dim(), truncation, |level| level, |t| t);
        let weights = exponents
            .iter()
            .map(|e| decay.powi(e.iter().sum::<u32>() as i32))
            .collect();
        Self::new(domain, FeatureFamily::PowerSeries { exponents, weights })
    }

    pub fn power_series_with(domain: Domain, exponents: Vec<Vec<u32>>, weights: Vec<f64>) -> Result<Self> {
        Self::new(domain, FeatureFamily::PowerSeries { exponents, weights })
    }

    /// Tensorized `1, cos(pi f u), sin(pi f u)` features with weights
    /// `decay^{total frequency}`.
    pub fn trigonometric(domain: Domain, truncation: usize, decay: f64) -> Result<Self> {
        check_truncation_and_decay(truncation, decay)?;
        let modes = graded_indices(domain.dim(), truncation, |level| 2 * level, trig_frequency);
        let weights = modes
            .iter()
            .map(|t| decay.powi(t.iter().map(|&t| trig_frequency(t)).sum::<u32>() as i32))
            .collect();
        Self::new(domain, FeatureFamily::Trigonometric { modes, weights })
    }

    pub fn trigonometric_with(domain: Domain, modes: Vec<Vec<u32>>, weights: Vec<f64>) -> Result<Self> {
        Self::new(domain, FeatureFamily::Trigonometric { modes, weights })
    }

    /// Features known only at tabulated points. Without an explicit domain the
    /// bounding box of the points is used.
    pub fn custom_table(table: FeatureTable, domain: Option<Domain>) -> Result<Self> {
        let domain = match domain {
            Some(domain) => domain,
            None => {
                let first = table
                    .points
                    .first()
                    .ok_or_else(|| Error::InvalidModel("feature table has no points".into()))?;
                let mut lower = first.clone();
                let mut upper = first.clone();
                for p in &table.points {
                    if p.len() != lower.len() {
                        return Err(Error::InvalidModel("ragged point list".into()));
                    }
                    for (j, &v) in p.iter().enumerate() {
                        lower[j] = lower[j].min(v);
                        upper[j] = upper[j].max(v);
                    }
                }
                Domain::new(lower, upper)?
            }
        };
        Self::new(domain, FeatureFamily::CustomTable(table))
    }

    pub fn custom_table_from_json(json: &str) -> Result<Self> {
        let file: FeatureTableFile = serde_json::from_str(json)?;
        Self::custom_table(
            FeatureTable {
                points: file.points,
                features: file.features,
            },
            file.domain,
        )
    }

    pub fn load_custom_table(path: impl AsRef<Path>) -> Result<Self> {
        Self::custom_table_from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let d = self.domain.dim();
        let (index_len, weights) = match &self.family {
            FeatureFamily::PowerSeries { exponents, weights } => {
                (check_index_tuples(exponents, d, "exponent")?, Some(weights))
            }
            FeatureFamily::Trigonometric { modes, weights } => {
                (check_index_tuples(modes, d, "mode")?, Some(weights))
            }
            FeatureFamily::CustomTable(table) => {
                if table.points.is_empty() || table.points.len() != table.features.len() {
                    return Err(Error::InvalidModel(format!(
                        "table has {} points but {} feature rows",
                        table.points.len(),
                        table.features.len()
                    )));
                }
                let k = table.features[0].len();
                for (i, (p, row)) in table.points.iter().zip(&table.features).enumerate() {
                    if p.len() != d {
                        return Err(Error::InvalidModel(format!(
                            "table point {i} has dimension {}, domain has {d}",
                            p.len()
                        )));
                    }
                    if row.len() != k {
                        return Err(Error::InvalidModel(format!(
                            "feature row {i} has {} entries, expected {k}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidModel(format!("feature row {i} is not finite")));
                    }
                    self.domain.clamp(p)?;
                }
                (k, None)
            }
        };
        if index_len == 0 {
            return Err(Error::InvalidModel("truncation K must be at least 1".into()));
        }
        if let Some(weights) = weights {
            if weights.len() != index_len {
                return Err(Error::InvalidModel(format!(
                    "{} weights for {index_len} features",
                    weights.len()
                )));
            }
            if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                return Err(Error::InvalidModel(format!(
                    "weights must be positive, found {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn family(&self) -> &FeatureFamily {
        &self.family
    }

    pub fn kind(&self) -> FamilyKind {
        match self.family {
            FeatureFamily::PowerSeries { .. } => FamilyKind::PowerSeries,
            FeatureFamily::Trigonometric { .. } => FamilyKind::Trigonometric,
            FeatureFamily::CustomTable(_) => FamilyKind::CustomTable,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// The truncation `K`.
    pub fn truncation(&self) -> usize {
        match &self.family {
            FeatureFamily::PowerSeries { weights, .. } | FeatureFamily::Trigonometric { weights, .. } => {
                weights.len()
            }
            FeatureFamily::CustomTable(table) => table.features[0].len(),
        }
    }

    /// Weights `w_k` with `phi_k = sqrt(w_k) b_k`; all ones for tabulated features.
    pub fn weights(&self) -> Vec<f64> {
        match &self.family {
            FeatureFamily::PowerSeries { weights, .. } | FeatureFamily::Trigonometric { weights, .. } => {
                weights.clone()
            }
            FeatureFamily::CustomTable(_) => vec![1.0; self.truncation()],
        }
    }

    /// `(phi_1(x), ..., phi_K(x))`.
    pub fn eval_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.truncation()];
        self.eval_features_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_features_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.truncation() {
            return Err(Error::DimensionMismatch {
                expected: self.truncation(),
                found: out.len(),
            });
        }
        let x = self.domain.clamp(x)?;
        match &self.family {
            FeatureFamily::PowerSeries { exponents, weights } => {
                let u = self.domain.to_reference(&x);
                for ((slot, e), w) in out.iter_mut().zip(exponents).zip(weights) {
                    let base: f64 = e.iter().zip(&u).map(|(&p, &uj)| uj.powi(p as i32)).product();
                    *slot = w.sqrt() * base;
                }
            }
            FeatureFamily::Trigonometric { modes, weights } => {
                let u = self.domain.to_reference(&x);
                for ((slot, t), w) in out.iter_mut().zip(modes).zip(weights) {
                    let base: f64 = t.iter().zip(&u).map(|(&t, &uj)| trig_basis(t, uj)).product();
                    *slot = w.sqrt() * base;
                }
            }
            FeatureFamily::CustomTable(table) => {
                let row = table
                    .points
                    .iter()
                    .position(|p| {
                        p.iter()
                            .zip(&x)
                            .all(|(a, b)| (a - b).abs() <= TABLE_MATCH_TOLERANCE)
                    })
                    .ok_or_else(|| Error::PointNotTabulated(x.clone()))?;
                out.copy_from_slice(&table.features[row]);
            }
        }
        Ok(())
    }

    /// `Phi_2(z1, z2) = sum_k phi_k(z1) phi_k(z2)`.
    pub fn eval_kernel2(&self, z1: &[f64], z2: &[f64]) -> Result<f64> {
        let a = self.eval_features(z1)?;
        let b = self.eval_features(z2)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
    }

    /// `Phi_m(z_1, ..., z_m) = sum_k prod_i phi_k(z_i)` for even `m >= 2`.
    pub fn eval_multikernel<P: AsRef<[f64]>>(&self, m: usize, points: &[P]) -> Result<f64> {
        check_order(m)?;
        if points.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: points.len(),
            });
        }
        let mut products = vec![1.0; self.truncation()];
        let mut phi = vec![0.0; self.truncation()];
        for p in points {
            self.eval_features_into(p.as_ref(), &mut phi)?;
            products.iter_mut().zip(&phi).for_each(|(acc, v)| *acc *= v);
        }
        Ok(products.iter().sum())
    }

    pub fn check_summability<P: AsRef<[f64]>>(&self, grid: &[P]) -> Result<SummabilityReport> {
        if grid.is_empty() {
            return Err(Error::InvalidInput("summability grid is empty".into()));
        }
        let k = self.truncation();
        let head = k.div_ceil(2);
        let mut phi = vec![0.0; k];
        let mut report = SummabilityReport {
            max_abs_sum: 0.0,
            tail_ratio: 0.0,
        };
        for x in grid {
            self.eval_features_into(x.as_ref(), &mut phi)?;
            let total: f64 = phi.iter().map(|v| v.abs()).sum();
            let tail: f64 = phi[head..].iter().map(|v| v.abs()).sum();
            report.max_abs_sum = report.max_abs_sum.max(total);
            if total > 0.0 {
                report.tail_ratio = report.tail_ratio.max(tail / total);
            }
        }
        Ok(report)
    }
}

/// Even orders `m >= 2` are the only ones with a strictly positive definite `Phi_m`.
pub(crate) fn check_order(m: usize) -> Result<()> {
    if m < 2 || m % 2 == 1 {
        Err(Error::OddOrderUnsupported(m))
    } else {
        Ok(())
    }
}

fn check_truncation_and_decay(truncation: usize, decay: f64) -> Result<()> {
    if truncation == 0 {
        return Err(Error::InvalidModel("truncation K must be at least 1".into()));
    }
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "decay must be positive, got {decay}"
        )));
    }
    Ok(())
}

fn check_index_tuples(tuples: &[Vec<u32>], d: usize, what: &str) -> Result<usize> {
    for (k, t) in tuples.iter().enumerate() {
        if t.len() != d {
            return Err(Error::InvalidModel(format!(
                "{what} tuple {k} has length {}, domain dimension is {d}",
                t.len()
            )));
        }
    }
    Ok(tuples.len())
}

fn trig_frequency(t: u32) -> u32 {
    t.div_ceil(2)
}

fn trig_basis(t: u32, u: f64) -> f64 {
    if t == 0 {
        1.0
    } else if t % 2 == 1 {
        (PI * trig_frequency(t) as f64 * u).cos()
    } else {
        (PI * trig_frequency(t) as f64 * u).sin()
    }
}

/// First `count` index tuples in graded, then ascending lexicographic order.
///
/// `max_index(level)` bounds each coordinate at a level; `level_of` maps a
/// coordinate to its contribution to the level.
fn graded_indices(
    d: usize,
    count: usize,
    max_index: impl Fn(u32) -> u32,
    level_of: impl Fn(u32) -> u32,
) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(count);
    let mut level = 0u32;
    while out.len() < count {
        let bound = max_index(level);
        let mut t = vec![0u32; d];
        loop {
            if t.iter().map(|&v| level_of(v)).sum::<u32>() == level {
                out.push(t.clone());
                if out.len() == count {
                    return out;
                }
            }
            // odometer, last coordinate fastest
            let mut j = d;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                if t[j] < bound {
                    t[j] += 1;
                    break;
                }
                t[j] = 0;
            }
            if t.iter().all(|&v| v == 0) {
                break;
            }
        }
        level += 1;
    }
    out
}

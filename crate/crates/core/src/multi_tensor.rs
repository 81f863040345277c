//! The symmetric tensor `A_m` held implicitly as a sum of rank-one terms.
//!
//! With `v_k = (phi_k(x_1), ..., phi_k(x_n))` the tensor built from the
//! multi-kernel is `A_m = sum_k v_k^{(x) m}`, so
//!
//! ```text
//! A_m c^{m-1} = sum_k (v_k . c)^{m-1} v_k
//! A_m c^m     = sum_k (v_k . c)^m
//! ```
//!
//! cost `O(nK)` and never touch the `n^m` entries. [`DenseTensor`] keeps the
//! explicit entries for brute-force cross-checks on small problems.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::feature_model::{check_order, FeatureModel};

/// Default entry budget for [`FeatureGram::dense_tensor`].
pub const DENSE_BUDGET: u128 = 10_000_000;

/// A gap at or below this fraction of `A_m c^m + A_m d^m` counts as a
/// non-positive monotonicity witness.
const WITNESS_RELATIVE_TOLERANCE: f64 = 1e-12;

/// The `n x K` array of feature values at the nodes; column `k` is `v_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGram {
    v: DMatrix<f64>,
    rank: usize,
}

impl FeatureGram {
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        if v.nrows() == 0 || v.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "feature Gram must be at least 1x1, got {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("feature Gram has non-finite entries".into()));
        }
        let rank = numerical_rank(&v);
        Ok(Self { v, rank })
    }

    /// Builds `V` from one row of feature values per node.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
    }

    /// Builds `V` from columns `v_1, ..., v_K`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, k, |i, j| columns[j][i]))
    }

    pub fn from_model<P: AsRef<[f64]>>(model: &FeatureModel, points: &[P]) -> Result<Self> {
        let k = model.truncation();
        let mut v = DMatrix::zeros(points.len(), k);
        let mut phi = vec![0.0; k];
        for (i, p) in points.iter().enumerate() {
            model.eval_features_into(p.as_ref(), &mut phi)?;
            for (j, value) in phi.iter().enumerate() {
                v[(i, j)] = *value;
            }
        }
        Self::new(v)
    }

    /// Number of nodes `n`.
    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// Truncation `K`.
    pub fn truncation(&self) -> usize {
        self.v.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Whether `V` has full row rank `n`, i.e. `A_2 = V V^T` is nonsingular.
    pub fn full_row_rank(&self) -> bool {
        self.rank == self.n()
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() == self.n() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n(),
                found: c.len(),
            })
        }
    }

    /// `(v_k . c)_k = V^T c`.
    pub fn project(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(c)?;
        Ok(self.project_unchecked(c))
    }

    pub(crate) fn project_unchecked(&self, c: &[f64]) -> Vec<f64> {
        (0..self.truncation())
            .map(|k| self.v.column(k).iter().zip(c).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `V a`, combining the columns with weights `a`.
    pub(crate) fn combine(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (k, &ak) in a.iter().enumerate() {
            if ak != 0.0 {
                for (o, vik) in out.iter_mut().zip(self.v.column(k).iter()) {
                    *o += ak * vik;
                }
            }
        }
        out
    }

    /// `A_m c^{m-1} = sum_k (v_k . c)^{m-1} v_k`.
    pub fn contract_m_minus_1(&self, m: usize, c: &[f64]) -> Result<Vec<f64>> {
        check_order(m)?;
        self.check_len(c)?;
        let powered: Vec<f64> = self
            .project_unchecked(c)
            .into_iter()
            .map(|a| a.powi(m as i32 - 1))
            .collect();
        Ok(self.combine(&powered))
    }

    /// `A_m c^m = sum_k (v_k . c)^m`; nonnegative for even `m`.
    pub fn contract_m(&self, m: usize, c: &[f64]) -> Result<f64> {
        check_order(m)?;
        self.check_len(c)?;
        Ok(self.project_unchecked(c).iter().map(|a| a.powi(m as i32)).sum())
    }

    /// `A_2 = V V^T`.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        &self.v * self.v.transpose()
    }

    /// `(c - d)^T (A_m c^{m-1} - A_m d^{m-1})`, summed term by term as
    /// `sum_k (a_k - b_k)(a_k^{m-1} - b_k^{m-1})` with `a = V^T c`, `b = V^T d`.
    pub fn monotonicity_gap(&self, m: usize, c: &[f64], d: &[f64]) -> Result<f64> {
        check_order(m)?;
        self.check_len(c)?;
        self.check_len(d)?;
        Ok(self.gap_unchecked(m, c, d).0)
    }

    /// Gap and its witness threshold.
    fn gap_unchecked(&self, m: usize, c: &[f64], d: &[f64]) -> (f64, f64) {
        let p = m as i32 - 1;
        let a = self.project_unchecked(c);
        let b = self.project_unchecked(d);
        let mut gap = 0.0;
        let mut scale = 0.0;
        for (ak, bk) in a.iter().zip(&b) {
            gap += (ak - bk) * (ak.powi(p) - bk.powi(p));
            scale += ak.powi(p + 1) + bk.powi(p + 1);
        }
        (gap, WITNESS_RELATIVE_TOLERANCE * scale)
    }

    /// Explicit `A_m` with entries `sum_k prod_j V[i_j, k]`.
    pub fn dense_tensor(&self, m: usize, budget: u128) -> Result<DenseTensor> {
        check_order(m)?;
        let n = self.n();
        let entries = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
        if entries > budget {
            return Err(Error::BudgetExceeded { entries, budget });
        }
        let mut out = vec![0.0; entries as usize];
        let mut index = vec![0usize; m];
        for slot in out.iter_mut() {
            *slot = (0..self.truncation())
                .map(|k| index.iter().map(|&i| self.v[(i, k)]).product::<f64>())
                .sum();
            advance(&mut index, n);
        }
        Ok(DenseTensor { m, n, entries: out })
    }

    /// Samples pairs `c != d` and records the smallest monotonicity gap.
    ///
    /// Algorithm: a `ChaCha8Rng` seeded with `rng_seed` draws `c` and `d`
    /// with i.i.d. standard normal entries (`c`, then `d`); equal pairs are
    /// redrawn. When `V` lacks full row rank, every odd trial instead sets
    /// `d = c + z` with `z` a standard normal combination of an orthonormal
    /// basis of `{z : V^T z = 0}`, which is where the map fails to be strict.
    pub fn check_strict_monotone(&self, m: usize, trials: usize, rng_seed: u64) -> Result<MonotoneReport> {
        check_order(m)?;
        if trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        let n = self.n();
        let null_basis = if self.full_row_rank() {
            Vec::new()
        } else {
            self.left_null_space()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut report = MonotoneReport {
            min_gap: f64::INFINITY,
            witnesses: Vec::new(),
            trials,
        };
        for trial in 0..trials {
            let (c, d) = loop {
                let c = normal_vector(&mut rng, n);
                let d = if trial % 2 == 1 && !null_basis.is_empty() {
                    let mut d = c.clone();
                    for z in &null_basis {
                        let w: f64 = rng.sample(StandardNormal);
                        d.iter_mut().zip(z).for_each(|(di, zi)| *di += w * zi);
                    }
                    d
                } else {
                    normal_vector(&mut rng, n)
                };
                if c != d {
                    break (c, d);
                }
            };
            let (gap, threshold) = self.gap_unchecked(m, &c, &d);
            report.min_gap = report.min_gap.min(gap);
            if gap <= threshold {
                report.witnesses.push(MonotoneWitness { c, d, gap });
            }
        }
        Ok(report)
    }

    /// Samples `A_m c^m` at the origin and at `trials` standard normal `c`.
    pub fn check_semi_pd(&self, m: usize, trials: usize, rng_seed: u64) -> Result<SemiPdReport> {
        check_order(m)?;
        if trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        // the origin is always part of the sample and contributes exactly 0
        let mut min_value = self.contract_m(m, &vec![0.0; self.n()])?;
        let mut min_normalized = f64::INFINITY;
        for _ in 0..trials {
            let c = normal_vector(&mut rng, self.n());
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let value = self.contract_m(m, &c)?;
            min_value = min_value.min(value);
            min_normalized = min_normalized.min(value / norm.powi(m as i32));
        }
        Ok(SemiPdReport {
            min_value,
            min_normalized,
        })
    }

    /// Orthonormal basis of `{z : V^T z = 0}`.
    pub fn left_null_space(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut padded = DMatrix::zeros(n, n.max(self.truncation()));
        padded.columns_mut(0, self.truncation()).copy_from(&self.v);
        let svd = padded.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let tol = rank_tolerance(&self.v, &svd.singular_values);
        svd.singular_values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s <= tol)
            .map(|(j, _)| u.column(j).iter().copied().collect())
            .collect()
    }
}

fn rank_tolerance(v: &DMatrix<f64>, singular_values: &DVector<f64>) -> f64 {
    let smax = singular_values.iter().copied().fold(0.0, f64::max);
    smax * v.nrows().max(v.ncols()) as f64 * f64::EPSILON
}

fn numerical_rank(v: &DMatrix<f64>) -> usize {
    let s = v.singular_values();
    let tol = rank_tolerance(v, &s);
    s.iter().filter(|x| **x > tol).count()
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Row-major increment of a multi-index in `[0, n)^m`.
fn advance(index: &mut [usize], n: usize) {
    for slot in index.iter_mut().rev() {
        *slot += 1;
        if *slot < n {
            return;
        }
        *slot = 0;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneWitness {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub min_gap: f64,
    /// Pairs whose gap is not positive (up to round-off).
    pub witnesses: Vec<MonotoneWitness>,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiPdReport {
    /// Minimum of `A_m c^m` over the sample, which includes `c = 0`.
    pub min_value: f64,
    /// Minimum of `A_m c^m / |c|_2^m` over the nonzero samples.
    pub min_normalized: f64,
}

/// Explicit order-`m`, dimension-`n` tensor in row-major index order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    m: usize,
    n: usize,
    entries: Vec<f64>,
}

impl DenseTensor {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.m, "index length must equal the tensor order");
        index.iter().fold(0, |acc, &i| {
            assert!(i < self.n, "index {i} out of range for dimension {}", self.n);
            acc * self.n + i
        })
    }

    /// Entry at a zero-based multi-index.
    pub fn entry(&self, index: &[usize]) -> f64 {
        self.entries[self.offset(index)]
    }

    /// Brute-force `A c^{m-1}` over all index tuples.
    pub fn contract_m_minus_1(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.n);
        let block = self.n.pow(self.m as u32 - 1);
        let mut tail = vec![0usize; self.m - 1];
        let mut out = vec![0.0; self.n];
        for (i, o) in out.iter_mut().enumerate() {
            tail.iter_mut().for_each(|t| *t = 0);
            let mut sum = 0.0;
            for entry in &self.entries[i * block..(i + 1) * block] {
                sum += entry * tail.iter().map(|&j| c[j]).product::<f64>();
                advance(&mut tail, self.n);
            }
            *o = sum;
        }
        out
    }

    /// Brute-force `A c^m`.
    pub fn contract_m(&self, c: &[f64]) -> f64 {
        let mut index = vec![0usize; self.m];
        let mut sum = 0.0;
        for entry in &self.entries {
            sum += entry * index.iter().map(|&j| c[j]).product::<f64>();
            advance(&mut index, self.n);
        }
        sum
    }

    /// Largest deviation between an entry and the entry at a permuted index,
    /// over every index and every adjacent transposition.
    pub fn max_asymmetry(&self) -> f64 {
        let mut index = vec![0usize; self.m];
        let mut worst = 0.0f64;
        for &entry in &self.entries {
            for j in 0..self.m - 1 {
                let mut swapped = index.clone();
                swapped.swap(j, j + 1);
                worst = worst.max((entry - self.entry(&swapped)).abs());
            }
            advance(&mut index, self.n);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Features `(1, x)` at nodes `{0, 1}`.
    fn example() -> FeatureGram {
        FeatureGram::from_columns(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn contraction_examples() {
        let v = example();
        assert_eq!(v.contract_m_minus_1(4, &[1.0, 1.0]).unwrap(), vec![8.0, 9.0]);
        assert_eq!(v.contract_m_minus_1(4, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(v.contract_m(4, &[1.0, 1.0]).unwrap(), 17.0);
        assert_eq!(v.contract_m(4, &[0.0, 0.0]).unwrap(), 0.0);
        // A_2 = [[1, 1], [1, 2]]
        assert_eq!(v.contract_m_minus_1(2, &[0.0, 1.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(
            v.gram_matrix(),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])
        );
    }

    #[test]
    fn contraction_errors() {
        let v = example();
        assert!(matches!(
            v.contract_m_minus_1(4, &[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
        assert!(matches!(
            v.contract_m(3, &[1.0, 1.0]),
            Err(Error::OddOrderUnsupported(3))
        ));
    }

    #[test]
    fn dense_tensor_examples() {
        let v = example();
        let a = v.dense_tensor(4, DENSE_BUDGET).unwrap();
        assert_eq!(a.entry(&[0, 0, 0, 0]), 1.0);
        assert_eq!(a.entry(&[1, 1, 1, 1]), 2.0);
        assert_eq!(a.entry(&[0, 0, 0, 1]), 1.0);
        assert_eq!(a.max_asymmetry(), 0.0);
        assert_eq!(a.contract_m_minus_1(&[1.0, 1.0]), vec![8.0, 9.0]);
        assert_eq!(a.contract_m(&[1.0, 1.0]), 17.0);

        let a2 = v.dense_tensor(2, DENSE_BUDGET).unwrap();
        assert_eq!(a2.entries(), v.gram_matrix().transpose().as_slice());
    }

    #[test]
    fn dense_tensor_budget() {
        let v = example();
        assert!(matches!(
            v.dense_tensor(6, 10),
            Err(Error::BudgetExceeded {
                entries: 64,
                budget: 10
            })
        ));
    }

    #[test]
    fn monotonicity_examples() {
        let v = example();
        assert_eq!(v.monotonicity_gap(4, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);

        let deficient = FeatureGram::from_columns(&[vec![1.0, 1.0]]).unwrap();
        assert!(!deficient.full_row_rank());
        assert_eq!(
            deficient.monotonicity_gap(4, &[1.0, -1.0], &[0.0, 0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn strict_monotone_sampling() {
        let report = example().check_strict_monotone(4, 500, 7).unwrap();
        assert!(report.min_gap > 0.0);
        assert!(report.witnesses.is_empty());
        assert_eq!(report.trials, 500);

        let deficient = FeatureGram::from_columns(&[vec![1.0, 1.0]]).unwrap();
        let report = deficient.check_strict_monotone(4, 50, 7).unwrap();
        assert!(report.min_gap.abs() < 1e-12, "{}", report.min_gap);
        assert!(!report.witnesses.is_empty());

        // same seed, same report
        assert_eq!(report, deficient.check_strict_monotone(4, 50, 7).unwrap());
        assert!(example().check_strict_monotone(4, 0, 7).is_err());
    }

    #[test]
    fn semi_pd_sampling() {
        let report = example().check_semi_pd(4, 200, 3).unwrap();
        assert_eq!(report.min_value, 0.0);
        assert!(report.min_normalized > 0.0);

        let deficient = FeatureGram::from_columns(&[vec![1.0, 1.0]]).unwrap();
        let report = deficient.check_semi_pd(6, 200, 3).unwrap();
        assert!(report.min_value >= 0.0);
    }

    #[test]
    fn rank_flag_and_null_space() {
        assert!(example().full_row_rank());
        let deficient = FeatureGram::from_columns(&[vec![1.0, 1.0]]).unwrap();
        let null = deficient.left_null_space();
        assert_eq!(null.len(), 1);
        let z = &null[0];
        assert!((z[0] + z[1]).abs() < 1e-15);
        assert!(FeatureGram::from_rows(&[]).is_err());
        assert!(FeatureGram::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}

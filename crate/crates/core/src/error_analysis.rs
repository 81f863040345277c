//! Power functions, fill distance, pointwise error bounds and convergence
//! studies.
//!
//! The power function of order `m` at `x` is the `B^m` distance from
//! `Phi_2(x, .)` to the span of `Phi_2(x_i, .)`. In feature coordinates
//!
//! ```text
//! P_m(x)^m = min_theta sum_k (phi_k(x) - sum_i theta_i phi_k(x_i))^m
//! ```
//!
//! a smooth convex problem for even `m`, minimized here with the same damped
//! Newton iteration as the interpolation solver. For `f` in `B^{m/(m-1)}`
//! matching the data, `|f(x) - s_m(x)| <= 2 |f| P_m(x)`.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature_model::{check_order, Domain, FeatureModel};
use crate::interpolant::{self, euclidean, NodeSet};
use crate::mls_solver::{
    damped_newton, dot, newton_direction, Evaluation, NewtonStatus, SolveReport, SolverOptions,
};
use crate::multi_tensor::FeatureGram;

/// Relative Newton-decrement target for power-function solves.
const POWER_DECREMENT_TOLERANCE: f64 = 1e-13;

/// Residuals below this multiple of `max_k |phi_k(x)|` are treated as zero.
const POWER_ROUNDING_FLOOR: f64 = 1e-14;

/// Power functions for a fixed node set.
#[derive(Debug, Clone)]
pub struct PowerFunction {
    model: FeatureModel,
    gram: FeatureGram,
}

/// `P_m(x)` together with the minimizing combination `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerValue {
    pub value: f64,
    pub theta: Vec<f64>,
}

impl PowerFunction {
    pub fn new(model: &FeatureModel, nodes: &NodeSet) -> Result<Self> {
        Ok(Self {
            model: model.clone(),
            gram: FeatureGram::from_model(model, nodes.points())?,
        })
    }

    pub fn gram(&self) -> &FeatureGram {
        &self.gram
    }

    /// `P_m(x)` started from the least-squares (`m = 2`) combination.
    pub fn value(&self, m: usize, x: &[f64], opts: &SolverOptions) -> Result<f64> {
        Ok(self.solve(m, x, None, opts)?.value)
    }

    /// `P_m(x)` for each order in `orders`, each solve warm-started from the
    /// previous minimizer. For increasing orders the returned values are
    /// then nonincreasing, since `|r|_m <= |r|_{m'}` for `m >= m'` and no solve
    /// ends above its starting value.
    pub fn values_for_orders(&self, orders: &[usize], x: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
        let mut theta: Option<Vec<f64>> = None;
        let mut out = Vec::with_capacity(orders.len());
        for &m in orders {
            let pv = self.solve(m, x, theta.take(), opts)?;
            out.push(pv.value);
            theta = Some(pv.theta);
        }
        Ok(out)
    }

    pub fn solve(
        &self,
        m: usize,
        x: &[f64],
        start: Option<Vec<f64>>,
        opts: &SolverOptions,
    ) -> Result<PowerValue> {
        check_order(m)?;
        opts.validate()?;
        let phi = self.model.eval_features(x)?;
        let gram = &self.gram;
        let mf = m as f64;
        let start = match start {
            Some(theta) if theta.len() == gram.n() => theta,
            _ => {
                // least squares: (V V^T) theta = V phi(x)
                let neg_rhs: Vec<f64> = gram.combine(&phi).iter().map(|v| -v).collect();
                newton_direction(gram, &vec![1.0; gram.truncation()], &neg_rhs, opts.ridge_floor)
                    .unwrap_or_else(|| vec![0.0; gram.n()])
            }
        };
        let evaluate = |theta: &[f64]| {
            let fitted = gram.project_unchecked(theta);
            let r: Vec<f64> = phi.iter().zip(&fitted).map(|(p, f)| p - f).collect();
            let value = r.iter().map(|v| v.powi(m as i32)).sum();
            let grad_coeffs: Vec<f64> = r.iter().map(|v| -mf * v.powi(m as i32 - 1)).collect();
            Evaluation {
                value,
                gradient: gram.combine(&grad_coeffs),
                curvature: r.iter().map(|v| mf * (mf - 1.0) * v.powi(m as i32 - 2)).collect(),
            }
        };
        let start_value = evaluate(&start).value;
        // below this the residual is rounding noise relative to phi(x)
        let floor = (POWER_ROUNDING_FLOOR * phi.iter().fold(0.0f64, |a, v| a.max(v.abs()))).powi(m as i32);
        let outcome = damped_newton(
            gram,
            evaluate,
            start.clone(),
            opts,
            opts.max_iterations,
            |eval, decrement| eval.value <= floor || decrement <= POWER_DECREMENT_TOLERANCE * eval.value,
        );
        if outcome.status == NewtonStatus::MaxIterations {
            return Err(Error::NotConverged(Box::new(SolveReport {
                coefficients: outcome.x,
                residual_norm: outcome.gradient_norm,
                iterations: outcome.iterations,
                converged: false,
                objective_trace: outcome.trace,
                singular_design: !gram.full_row_rank(),
            })));
        }
        // a stall means no representable step lowers the value: numerically minimal
        let (q, theta) = if outcome.value <= start_value {
            (outcome.value, outcome.x)
        } else {
            (start_value, start)
        };
        Ok(PowerValue {
            value: q.max(0.0).powf(1.0 / mf),
            theta,
        })
    }

    /// `(Phi_2(x, x) - B_2(x)^T A_2^{-1} B_2(x))^{1/2}` with `A_2` and `B_2`
    /// assembled from kernel evaluations.
    pub fn p2_closed(&self, nodes: &NodeSet, x: &[f64]) -> Result<f64> {
        power_function_p2_closed(&self.model, nodes, x)
    }
}

/// `P_m(x)` for the given nodes.
pub fn power_function(
    model: &FeatureModel,
    nodes: &NodeSet,
    m: usize,
    x: &[f64],
    opts: &SolverOptions,
) -> Result<f64> {
    PowerFunction::new(model, nodes)?.value(m, x, opts)
}

/// Classical power function from kernel evaluations alone.
///
/// With `theta = A_2^{-1} B_2(x)` the square is evaluated as the quadratic
/// form `Phi_2(x, x) - 2 theta . B_2(x) + theta^T A_2 theta` in compensated
/// arithmetic. The form's error is quadratic in the error of `theta`, so the
/// value stays accurate where the textbook `Phi_2(x, x) - B^T A^{-1} B`
/// cancels to rounding noise (at and near the nodes).
pub fn power_function_p2_closed(model: &FeatureModel, nodes: &NodeSet, x: &[f64]) -> Result<f64> {
    let pts = nodes.points();
    let n = pts.len();
    let mut a = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = model.eval_kernel2(&pts[i], &pts[j])?;
            a[(i, j)] = k;
            a[(j, i)] = k;
        }
    }
    let b = DVector::from_iterator(
        n,
        pts.iter()
            .map(|p| model.eval_kernel2(x, p))
            .collect::<Result<Vec<_>>>()?,
    );
    let chol = a.clone().cholesky().ok_or(Error::SingularGram)?;
    let mut theta = chol.solve(&b);
    // refinement with a compensated residual
    for _ in 0..2 {
        let r = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let mut acc = CompensatedSum::new(b[i]);
                for j in 0..n {
                    acc.add_product(-a[(i, j)], theta[j]);
                }
                acc.value()
            }),
        );
        theta += chol.solve(&r);
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularGram);
    }
    let mut acc = CompensatedSum::new(model.eval_kernel2(x, x)?);
    for i in 0..n {
        acc.add_product(-2.0 * theta[i], b[i]);
        for j in 0..n {
            acc.add_triple(theta[i], theta[j], a[(i, j)]);
        }
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// Neumaier summation with error-free products.
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn new(init: f64) -> Self {
        Self {
            sum: init,
            carry: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.carry += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.add(a.mul_add(b, -p));
    }

    fn add_triple(&mut self, a: f64, b: f64, c: f64) {
        let ab = a * b;
        let ab_err = a.mul_add(b, -ab);
        self.add_product(ab, c);
        self.add(ab_err * c);
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Grid estimate of the fill distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillDistance {
    /// `max_{grid} min_i |x - x_i|_2`.
    pub h: f64,
    /// Largest grid spacing; the true supremum lies within half a grid
    /// diagonal of `h`.
    pub grid_spacing: f64,
}

pub fn fill_distance<P: AsRef<[f64]> + Sync>(
    nodes: &[P],
    domain: &Domain,
    grid_per_dim: usize,
) -> Result<FillDistance> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput(
            "fill distance needs at least one node".into(),
        ));
    }
    let grid = domain.grid(grid_per_dim)?;
    let h = grid
        .par_iter()
        .map(|x| {
            nodes
                .iter()
                .map(|p| euclidean(x, p.as_ref()))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(FillDistance {
        h,
        grid_spacing: domain.grid_spacing(grid_per_dim),
    })
}

/// `2 |f| P_m(x)`.
pub fn error_bound(f_norm: f64, p_m: f64) -> f64 {
    2.0 * f_norm * p_m
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub order: usize,
    pub eval_points: Vec<Vec<f64>>,
    pub p_m: Vec<f64>,
    pub p_2: Vec<f64>,
    /// `2 f_norm p_m` per point.
    pub bound: Vec<f64>,
    pub fill_distance: FillDistance,
}

/// Evaluates `P_2` and `P_m` (and the resulting bound for a function of norm
/// `f_norm`) at every evaluation point, in parallel.
pub fn power_report(
    model: &FeatureModel,
    nodes: &NodeSet,
    m: usize,
    eval_points: &[Vec<f64>],
    f_norm: f64,
    fill_grid_per_dim: usize,
    opts: &SolverOptions,
) -> Result<PowerReport> {
    check_order(m)?;
    let pf = PowerFunction::new(model, nodes)?;
    let orders: Vec<usize> = (1..=m / 2).map(|j| 2 * j).collect();
    let values: Vec<Vec<f64>> = eval_points
        .par_iter()
        .map(|x| pf.values_for_orders(&orders, x, opts))
        .collect::<Result<_>>()?;
    let p_2: Vec<f64> = values.iter().map(|v| v[0]).collect();
    let p_m: Vec<f64> = values.iter().map(|v| *v.last().expect("m >= 2")).collect();
    Ok(PowerReport {
        order: m,
        eval_points: eval_points.to_vec(),
        bound: p_m.iter().map(|p| error_bound(f_norm, *p)).collect(),
        p_m,
        p_2,
        fill_distance: fill_distance(nodes.points(), model.domain(), fill_grid_per_dim)?,
    })
}

/// How a study places `n` nodes in the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeLayout {
    /// First `n` Halton points (bases 2, 3, 5, ...), nested across `n`.
    #[default]
    Halton,
    /// Tensor grid with endpoints; `n` must be a perfect `d`-th power.
    Uniform,
}

pub fn layout_nodes(domain: &Domain, layout: NodeLayout, n: usize) -> Result<Vec<Vec<f64>>> {
    let d = domain.dim();
    if n == 0 {
        return Err(Error::InvalidInput("node count must be positive".into()));
    }
    let (lo, hi) = (domain.lower(), domain.upper());
    match layout {
        NodeLayout::Halton => {
            let bases = first_primes(d);
            Ok((0..n)
                .map(|i| {
                    bases
                        .iter()
                        .enumerate()
                        .map(|(j, &b)| lo[j] + (hi[j] - lo[j]) * radical_inverse(i as u64, b))
                        .collect()
                })
                .collect())
        }
        NodeLayout::Uniform => {
            if n == 1 {
                return Ok(vec![lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()]);
            }
            let per_dim = (n as f64).powf(1.0 / d as f64).round() as usize;
            if per_dim.checked_pow(d as u32) != Some(n) {
                return Err(Error::InvalidInput(format!(
                    "uniform layout needs a perfect {d}-th power node count, got {n}"
                )));
            }
            domain.grid(per_dim)
        }
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().all(|p| !candidate.is_multiple_of(*p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// A target function `f = sum_k alpha_k phi_k` from the truncated span.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanTarget {
    pub alpha: Vec<f64>,
}

impl SpanTarget {
    pub fn evaluate(&self, model: &FeatureModel, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.alpha, &model.eval_features(x)?))
    }

    /// `|f|` in `B^p`.
    pub fn norm(&self, p: f64) -> Result<f64> {
        interpolant::banach_norm_direct(&self.alpha, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub max_error: f64,
    pub max_bound: f64,
    /// `d log(max_error) / d log(h)` against the previous row.
    pub slope: Option<f64>,
    /// `|f - s_m| <= 2 |f| P_m + slack` held at every evaluation point.
    pub bound_holds: bool,
}

/// Study configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub order: usize,
    pub node_counts: Vec<usize>,
    pub layout: NodeLayout,
    pub fill_grid_per_dim: usize,
    /// Absolute slack allowed per point in the bound check, scaled by `1 + |f|`.
    pub bound_slack: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            order: 4,
            node_counts: vec![4, 8, 16, 32],
            layout: NodeLayout::Halton,
            fill_grid_per_dim: 1001,
            bound_slack: 1e-6,
        }
    }
}

/// Fits `s_m` to `f` on growing node sets and tabulates the fill distance,
/// the largest error over `eval_grid`, and the largest error bound.
pub fn convergence_study(
    model: &FeatureModel,
    target: &SpanTarget,
    eval_grid: &[Vec<f64>],
    config: &StudyConfig,
    opts: &SolverOptions,
) -> Result<Vec<StudyRow>> {
    check_order(config.order)?;
    if target.alpha.len() != model.truncation() {
        return Err(Error::DimensionMismatch {
            expected: model.truncation(),
            found: target.alpha.len(),
        });
    }
    if config.node_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "node counts must be strictly increasing".into(),
        ));
    }
    let m = config.order;
    let f_norm = target.norm(m as f64 / (m as f64 - 1.0))?;
    let f_values: Vec<f64> = eval_grid
        .iter()
        .map(|x| target.evaluate(model, x))
        .collect::<Result<_>>()?;
    let slack = config.bound_slack * (1.0 + f_norm);

    let mut rows: Vec<StudyRow> = Vec::with_capacity(config.node_counts.len());
    for &n in &config.node_counts {
        let points = layout_nodes(model.domain(), config.layout, n)?;
        let values = points
            .iter()
            .map(|x| target.evaluate(model, x))
            .collect::<Result<Vec<_>>>()?;
        let nodes = NodeSet::new(points, values)?;
        let s = interpolant::fit(model, &nodes, m, opts)?;
        let report = power_report(
            model,
            &nodes,
            m,
            eval_grid,
            f_norm,
            config.fill_grid_per_dim,
            opts,
        )?;
        let approx = s
            .evaluate_many(eval_grid)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let errors: Vec<f64> = approx.iter().zip(&f_values).map(|(a, f)| (a - f).abs()).collect();
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        let max_bound = report.bound.iter().copied().fold(0.0, f64::max);
        let bound_holds = errors.iter().zip(&report.bound).all(|(e, b)| *e <= b + slack);
        let h = report.fill_distance.h;
        let slope = rows.last().and_then(|prev| {
            let slope = (max_error.ln() - prev.max_error.ln()) / (h.ln() - prev.h.ln());
            slope.is_finite().then_some(slope)
        });
        rows.push(StudyRow {
            n,
            h,
            max_error,
            max_bound,
            slope,
            bound_holds,
        });
    }
    Ok(rows)
}

/// Writes `n,h,max_error,max_bound,slope` rows; the first row has no slope.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,h,max_error,max_bound,slope")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.n,
            format_float(row.h),
            format_float(row.max_error),
            format_float(row.max_bound),
            row.slope.map(format_float).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Shortest decimal that parses back to the same `f64` (at most 17
/// significant digits).
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Domain {
        Domain::cube(1, -1.0, 1.0).unwrap()
    }

    fn quadratic() -> FeatureModel {
        FeatureModel::power_series_with(line(), vec![vec![0], vec![1], vec![2]], vec![1.0; 3]).unwrap()
    }

    fn two_nodes() -> NodeSet {
        NodeSet::from_points(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn p2_example_both_routes() {
        let opts = SolverOptions::default();
        let p = power_function(&quadratic(), &two_nodes(), 2, &[-1.0], &opts).unwrap();
        assert!((p - 2f64.sqrt()).abs() < 1e-12, "{p}");
        let closed = power_function_p2_closed(&quadratic(), &two_nodes(), &[-1.0]).unwrap();
        assert!((closed - 2f64.sqrt()).abs() < 1e-12, "{closed}");
    }

    #[test]
    fn vanishes_at_nodes() {
        let opts = SolverOptions::default();
        for m in [2, 4, 6] {
            for x in [0.0, 1.0] {
                let p = power_function(&quadratic(), &two_nodes(), m, &[x], &opts).unwrap();
                assert!(p <= 1e-6, "m={m} x={x} p={p}");
            }
        }
        assert_eq!(
            power_function_p2_closed(&quadratic(), &two_nodes(), &[0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn exact_span_gives_zero_everywhere() {
        let model = FeatureModel::power_series_with(line(), vec![vec![0], vec![1]], vec![1.0; 2]).unwrap();
        let opts = SolverOptions::default();
        for x in [-1.0, -0.4, 0.3, 0.9] {
            for m in [2, 4] {
                let p = power_function(&model, &two_nodes(), m, &[x], &opts).unwrap();
                assert!(p < 1e-12, "m={m} x={x} p={p}");
            }
        }
    }

    #[test]
    fn closed_form_singular_gram() {
        let model = FeatureModel::power_series_with(line(), vec![vec![0]], vec![1.0]).unwrap();
        assert!(matches!(
            power_function_p2_closed(&model, &two_nodes(), &[0.5]),
            Err(Error::SingularGram)
        ));
    }

    #[test]
    fn fill_distance_examples() {
        let fd = fill_distance(two_nodes().points(), &line(), 201).unwrap();
        assert_eq!(fd.h, 1.0);
        assert_eq!(fd.grid_spacing, 0.01);

        let grid = line().grid(11).unwrap();
        let fd = fill_distance(&grid, &line(), 11).unwrap();
        assert!(fd.h <= fd.grid_spacing);

        let more = vec![vec![0.0], vec![1.0], vec![-0.7]];
        assert!(fill_distance(&more, &line(), 201).unwrap().h <= 1.0);
    }

    #[test]
    fn error_bound_examples() {
        assert_eq!(error_bound(0.0, 3.0), 0.0);
        assert_eq!(error_bound(3.0, 0.0), 0.0);
        let f = 17f64.powf(0.75);
        assert_eq!(error_bound(f, 2f64.sqrt()), 2.0 * f * 2f64.sqrt());
    }

    #[test]
    fn halton_layout_is_nested() {
        let four = layout_nodes(&line(), NodeLayout::Halton, 4).unwrap();
        assert_eq!(four, vec![vec![-1.0], vec![0.0], vec![-0.5], vec![0.5]]);
        let eight = layout_nodes(&line(), NodeLayout::Halton, 8).unwrap();
        assert_eq!(&eight[..4], &four[..]);
        assert!(layout_nodes(&Domain::cube(2, 0.0, 1.0).unwrap(), NodeLayout::Uniform, 8).is_err());
        assert_eq!(
            layout_nodes(&Domain::cube(2, 0.0, 1.0).unwrap(), NodeLayout::Uniform, 9)
                .unwrap()
                .len(),
            9
        );
    }

    #[test]
    fn reproduction_when_target_is_fully_resolved() {
        // K = 3 features, 3+ nodes: P_m vanishes and s_m reproduces f
        let model = quadratic();
        let target = SpanTarget {
            alpha: vec![0.5, -1.0, 2.0],
        };
        let config = StudyConfig {
            order: 4,
            node_counts: vec![3, 5],
            layout: NodeLayout::Uniform,
            fill_grid_per_dim: 101,
            ..Default::default()
        };
        let grid = line().grid(41).unwrap();
        let rows = convergence_study(&model, &target, &grid, &config, &SolverOptions::default()).unwrap();
        for row in &rows {
            assert!(row.max_error < 1e-8, "{row:?}");
            assert!(row.bound_holds);
        }
    }

    #[test]
    fn study_csv_format() {
        let rows = vec![
            StudyRow {
                n: 4,
                h: 0.5,
                max_error: 0.1,
                max_bound: 0.3,
                slope: None,
                bound_holds: true,
            },
            StudyRow {
                n: 8,
                h: 0.25,
                max_error: 0.025,
                max_bound: 0.1,
                slope: Some(2.0),
                bound_holds: true,
            },
        ];
        let mut out = Vec::new();
        write_study_csv(&rows, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "n,h,max_error,max_bound,slope\n4,0.5,0.1,0.3,\n8,0.25,0.025,0.1,2.0\n"
        );
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456789.12345679, -2.5e17] {
            assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}

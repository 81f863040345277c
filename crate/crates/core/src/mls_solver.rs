//! Solvers for the multi-linear system `A_m c^{m-1} = y` and its regularized
//! least-squares variant.
//!
//! For even `m` the system is the stationarity condition of the convex
//! potential
//!
//! ```text
//! F(c) = (1/m) A_m c^m - y . c,   grad F = A_m c^{m-1} - y,
//! hess F = (m - 1) sum_k (v_k . c)^{m-2} v_k v_k^T
//! ```
//!
//! which [`solve_multilinear`] minimizes by damped Newton with backtracking.
//! Convergence is declared on the residual `|A_m c^{m-1} - y|_2`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature_model::check_order;
use crate::multi_tensor::FeatureGram;

/// Backtracking gives up after this many step reductions.
const MAX_BACKTRACKS: usize = 60;

/// Consecutive accepted steps without progress before the iteration is
/// declared stalled.
const MAX_STAGNANT_STEPS: usize = 8;

/// Starting point of the Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Start at `c = 0`; the first step is an exact line search along `y`.
    Zero,
    /// Solve `A_2 c_0 = y`, then rescale `c_0` onto the minimizer of `F`
    /// along its ray.
    #[default]
    LinearSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on the residual 2-norm.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Relative ridge added to Newton systems.
    pub ridge_floor: f64,
    pub line_search_shrink: f64,
    pub armijo_constant: f64,
    pub init: Init,
    /// Number of starts; `None` means 1 for interpolation and 8 for the
    /// regularized problem.
    pub multistart: Option<usize>,
    /// Seed for multistart initial points.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iterations: 200,
            ridge_floor: 1e-12,
            line_search_shrink: 0.5,
            armijo_constant: 1e-4,
            init: Init::LinearSolve,
            multistart: None,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.residual_tol.is_nan() || self.residual_tol <= 0.0 {
            return Err(Error::InvalidOptions(format!(
                "residual_tol must be positive, got {}",
                self.residual_tol
            )));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(Error::InvalidOptions(format!(
                "line_search_shrink must lie in (0, 1), got {}",
                self.line_search_shrink
            )));
        }
        if !(self.armijo_constant > 0.0 && self.armijo_constant < 1.0) {
            return Err(Error::InvalidOptions(format!(
                "armijo_constant must lie in (0, 1), got {}",
                self.armijo_constant
            )));
        }
        if self.ridge_floor.is_nan() || self.ridge_floor < 0.0 {
            return Err(Error::InvalidOptions("ridge_floor must be nonnegative".into()));
        }
        if self.multistart == Some(0) {
            return Err(Error::InvalidOptions("multistart must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at every iterate, starting point included.
    pub objective_trace: Vec<f64>,
    /// `V` lacks full row rank, so the system may be inconsistent.
    pub singular_design: bool,
}

/// `|A_m c^{m-1} - y|_2`.
pub fn residual_norm(gram: &FeatureGram, m: usize, c: &[f64], y: &[f64]) -> Result<f64> {
    check_len(gram, y)?;
    let r = gram.contract_m_minus_1(m, c)?;
    Ok(norm(&sub(&r, y)))
}

/// `F(c) = (1/m) A_m c^m - y . c`.
pub fn potential(gram: &FeatureGram, m: usize, c: &[f64], y: &[f64]) -> Result<f64> {
    check_len(gram, y)?;
    Ok(gram.contract_m(m, c)? / m as f64 - dot(y, c))
}

/// Solves `A_m c^{m-1} = y` for even `m`.
///
/// The result does not depend on the starting point when `V` has full row
/// rank; `opts.init` only affects the iteration count.
pub fn solve_multilinear(
    gram: &FeatureGram,
    m: usize,
    y: &[f64],
    opts: &SolverOptions,
) -> Result<SolveReport> {
    check_order(m)?;
    check_len(gram, y)?;
    opts.validate()?;
    let n = gram.n();
    let mut trace = Vec::new();
    let mut iterations = 0;

    let start = match opts.init {
        Init::LinearSolve => linear_warm_start(gram, m, y, opts.ridge_floor),
        Init::Zero => {
            let zero = vec![0.0; n];
            if m > 2 && norm(y) > opts.residual_tol {
                // the Hessian vanishes at the origin; step to the minimizer of F along y
                trace.push(0.0);
                iterations += 1;
                ray_minimizer(gram, m, y, y).unwrap_or(zero)
            } else {
                zero
            }
        }
    };

    let tol = opts.residual_tol;
    let outcome = damped_newton(
        gram,
        |c| {
            let alpha = gram.project_unchecked(c);
            let powered: Vec<f64> = alpha.iter().map(|a| a.powi(m as i32 - 1)).collect();
            let value = alpha.iter().zip(&powered).map(|(a, p)| a * p).sum::<f64>() / m as f64 - dot(y, c);
            let gradient = sub(&gram.combine(&powered), y);
            let curvature = alpha
                .iter()
                .map(|a| (m as f64 - 1.0) * a.powi(m as i32 - 2))
                .collect();
            Evaluation {
                value,
                gradient,
                curvature,
            }
        },
        start,
        opts,
        opts.max_iterations.saturating_sub(iterations),
        |eval, _| norm(&eval.gradient) <= tol,
    );
    trace.extend(outcome.trace);
    let residual = outcome.gradient_norm;
    let report = SolveReport {
        coefficients: outcome.x,
        residual_norm: residual,
        iterations: iterations + outcome.iterations,
        converged: residual <= tol,
        objective_trace: trace,
        singular_design: !gram.full_row_rank(),
    };
    if report.converged {
        Ok(report)
    } else if report.singular_design {
        Err(Error::SingularDesign(Box::new(report)))
    } else {
        Err(Error::NotConverged(Box::new(report)))
    }
}

/// A local minimizer of the regularized objective from one start.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimizer {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedReport {
    /// Best local minimizer found.
    pub coefficients: Vec<f64>,
    /// `G(c) = |A_m c^{m-1} - y|^2 + sigma A_m c^m` at the best minimizer.
    pub objective: f64,
    /// Data misfit `|A_m c^{m-1} - y|_2` at the best minimizer.
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    /// Distinct converged minimizers across all starts, best first.
    pub minimizers: Vec<LocalMinimizer>,
}

/// Minimizes `G(c) = |A_m c^{m-1} - y|_2^2 + sigma A_m c^m` from several
/// starting points.
///
/// `G` need not be convex, so every start runs a modified Newton iteration
/// (Hessian shifted until positive definite, gradient step as fallback) with
/// backtracking, and all distinct minimizers are reported. Start 0 is the
/// interpolation warm start; the others are seeded normal vectors of the
/// same scale. A start converges when `|grad G|_2 <= residual_tol (1 + |y|^2)`.
pub fn solve_regularized(
    gram: &FeatureGram,
    m: usize,
    y: &[f64],
    sigma: f64,
    opts: &SolverOptions,
) -> Result<RegularizedReport> {
    check_order(m)?;
    check_len(gram, y)?;
    opts.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let n = gram.n();
    let starts_count = opts.multistart.unwrap_or(8);
    let warm = linear_warm_start(gram, m, y, opts.ridge_floor);
    let scale = {
        let s = norm(&warm) / (n as f64).sqrt();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![warm];
    for _ in 1..starts_count {
        starts.push(
            (0..n)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }
    let tol = opts.residual_tol * (1.0 + dot(y, y));

    let runs: Vec<(LocalMinimizer, usize, Vec<f64>)> = starts
        .into_par_iter()
        .map(|start| regularized_newton(gram, m, y, sigma, start, opts, tol))
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (!a.1 .0.converged, a.1 .0.objective)
                .partial_cmp(&(!b.1 .0.converged, b.1 .0.objective))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .expect("at least one start");
    let mut minimizers: Vec<LocalMinimizer> = Vec::new();
    let mut sorted: Vec<&LocalMinimizer> = runs.iter().map(|r| &r.0).filter(|r| r.converged).collect();
    sorted.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    for candidate in sorted {
        let distinct = minimizers.iter().all(|known| {
            let gap = norm(&sub(&known.coefficients, &candidate.coefficients));
            gap > 1e-6 * norm(&known.coefficients).max(1.0)
        });
        if distinct {
            minimizers.push(candidate.clone());
        }
    }

    let (best_min, iterations, trace) = runs.into_iter().nth(best).expect("index in range");
    let residual = residual_norm(gram, m, &best_min.coefficients, y)?;
    if !best_min.converged {
        return Err(Error::NotConverged(Box::new(SolveReport {
            coefficients: best_min.coefficients,
            residual_norm: residual,
            iterations,
            converged: false,
            objective_trace: trace,
            singular_design: !gram.full_row_rank(),
        })));
    }
    Ok(RegularizedReport {
        coefficients: best_min.coefficients,
        objective: best_min.objective,
        residual_norm: residual,
        gradient_norm: best_min.gradient_norm,
        iterations,
        converged: true,
        objective_trace: trace,
        minimizers,
    })
}

fn regularized_newton(
    gram: &FeatureGram,
    m: usize,
    y: &[f64],
    sigma: f64,
    start: Vec<f64>,
    opts: &SolverOptions,
    tol: f64,
) -> (LocalMinimizer, usize, Vec<f64>) {
    let n = gram.n();
    let mf = m as f64;
    let evaluate = |c: &[f64]| {
        let alpha = gram.project_unchecked(c);
        let r = sub(
            &gram.combine(&alpha.iter().map(|a| a.powi(m as i32 - 1)).collect::<Vec<_>>()),
            y,
        );
        let am: f64 = alpha.iter().map(|a| a.powi(m as i32)).sum();
        let value = dot(&r, &r) + sigma * am;
        // J = (m-1) V diag(alpha^{m-2}) V^T is the Jacobian of c -> A_m c^{m-1}
        let vr = gram.project_unchecked(&r);
        let jr: Vec<f64> = alpha
            .iter()
            .zip(&vr)
            .map(|(a, w)| (mf - 1.0) * a.powi(m as i32 - 2) * w)
            .collect();
        let pen: Vec<f64> = alpha.iter().map(|a| sigma * mf * a.powi(m as i32 - 1)).collect();
        let grad_coeffs: Vec<f64> = jr.iter().zip(&pen).map(|(j, p)| 2.0 * j + p).collect();
        let gradient = gram.combine(&grad_coeffs);
        (value, gradient, alpha, vr)
    };
    let hessian = |alpha: &[f64], vr: &[f64]| {
        let v = gram.matrix();
        let jw: Vec<f64> = alpha.iter().map(|a| (mf - 1.0) * a.powi(m as i32 - 2)).collect();
        let j = weighted_gram(v, &jw);
        let second: Vec<f64> = if m > 2 {
            alpha
                .iter()
                .zip(vr)
                .zip(&jw)
                .map(|((a, w), jwk)| {
                    2.0 * (mf - 2.0) * a.powi(m as i32 - 3) * w * (mf - 1.0) + sigma * mf * jwk
                })
                .collect()
        } else {
            jw.iter().map(|jwk| sigma * mf * jwk).collect()
        };
        2.0 * &j * &j + weighted_gram(v, &second)
    };

    let mut c = start;
    let (mut value, mut gradient, mut alpha, mut vr) = evaluate(&c);
    let mut trace = vec![value];
    let mut iterations = 0;
    while norm(&gradient) > tol && iterations < opts.max_iterations {
        let h = hessian(&alpha, &vr);
        let g = DVector::from_column_slice(&gradient);
        let direction = shifted_cholesky_solve(&h, &g, opts.ridge_floor)
            .map(|p| -p)
            .filter(|p| p.dot(&g) < 0.0)
            .unwrap_or_else(|| -g.clone() / h.diagonal().amax().max(1.0));
        let slope = direction.dot(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = c
                .iter()
                .zip(direction.iter())
                .map(|(ci, pi)| ci + t * pi)
                .collect();
            let eval = evaluate(&trial);
            if eval.0 <= value + opts.armijo_constant * t * slope {
                accepted = Some((trial, eval));
                break;
            }
            t *= opts.line_search_shrink;
        }
        let Some((trial, eval)) = accepted else { break };
        c = trial;
        (value, gradient, alpha, vr) = eval;
        trace.push(value);
        iterations += 1;
    }
    let gradient_norm = norm(&gradient);
    debug_assert_eq!(c.len(), n);
    (
        LocalMinimizer {
            coefficients: c,
            objective: value,
            gradient_norm,
            converged: gradient_norm <= tol,
        },
        iterations,
        trace,
    )
}

/// Solves `A_2 c_0 = y` and rescales onto the minimizer of `F` along `c_0`.
fn linear_warm_start(gram: &FeatureGram, m: usize, y: &[f64], ridge_floor: f64) -> Vec<f64> {
    let ones = vec![1.0; gram.truncation()];
    let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
    let Some(c0) = newton_direction(gram, &ones, &neg_y, ridge_floor) else {
        return vec![0.0; gram.n()];
    };
    if m == 2 {
        return c0;
    }
    ray_minimizer(gram, m, y, &c0).unwrap_or(c0)
}

/// `t d` with `t = (y . d / A_m d^m)^{1/(m-1)}`, the minimizer of `F(t d)`.
fn ray_minimizer(gram: &FeatureGram, m: usize, y: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let yd = dot(y, d);
    let adm: f64 = gram.project_unchecked(d).iter().map(|a| a.powi(m as i32)).sum();
    if yd > 0.0 && adm > 0.0 && adm.is_finite() {
        let t = (yd / adm).powf(1.0 / (m as f64 - 1.0));
        Some(d.iter().map(|v| t * v).collect())
    } else {
        None
    }
}

/// Value, gradient and Hessian of a potential whose Hessian is
/// `V diag(curvature) V^T` with nonnegative curvature.
pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub curvature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NewtonStatus {
    Converged,
    /// No step along the Newton direction decreases the merit in floating point.
    Stalled,
    MaxIterations,
}

pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub status: NewtonStatus,
}

/// Damped Newton with backtracking. A step is accepted when it satisfies the
/// Armijo condition on the value or shrinks the gradient norm by the same
/// factor; the latter keeps progress going once value differences drown in
/// round-off. `done(eval, decrement)` sees the Newton decrement `-g . p`.
pub(crate) fn damped_newton(
    gram: &FeatureGram,
    evaluate: impl Fn(&[f64]) -> Evaluation,
    start: Vec<f64>,
    opts: &SolverOptions,
    max_iterations: usize,
    done: impl Fn(&Evaluation, f64) -> bool,
) -> NewtonOutcome {
    let mut x = start;
    let mut eval = evaluate(&x);
    let mut trace = vec![eval.value];
    let mut iterations = 0;
    let mut best = (norm(&eval.gradient), x.clone(), eval.value);
    let mut lowest = eval.value;
    let mut stagnant = 0;
    let status = loop {
        let direction = newton_direction(gram, &eval.curvature, &eval.gradient, opts.ridge_floor)
            .filter(|p| dot(p, &eval.gradient) < 0.0)
            .unwrap_or_else(|| eval.gradient.iter().map(|g| -g).collect());
        let slope = dot(&direction, &eval.gradient);
        if done(&eval, -slope) {
            break NewtonStatus::Converged;
        }
        if iterations >= max_iterations {
            break NewtonStatus::MaxIterations;
        }
        let grad_norm = norm(&eval.gradient);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, pi)| xi + t * pi).collect();
            let next = evaluate(&trial);
            let armijo =
                next.value < eval.value && next.value <= eval.value + opts.armijo_constant * t * slope;
            let residual = norm(&next.gradient) <= (1.0 - opts.armijo_constant * t) * grad_norm;
            if next.value.is_finite() && (armijo || residual) {
                accepted = Some((trial, next));
                break;
            }
            t *= opts.line_search_shrink;
        }
        let Some((trial, next)) = accepted else {
            break NewtonStatus::Stalled;
        };
        x = trial;
        eval = next;
        trace.push(eval.value);
        iterations += 1;
        let gn = norm(&eval.gradient);
        let progress = eval.value < lowest - 1e-12 * lowest.abs() || gn < (1.0 - 1e-6) * best.0;
        lowest = lowest.min(eval.value);
        if gn < best.0 {
            best = (gn, x.clone(), eval.value);
        }
        stagnant = if progress { 0 } else { stagnant + 1 };
        if stagnant >= MAX_STAGNANT_STEPS {
            break NewtonStatus::Stalled;
        }
    };
    let gradient_norm = norm(&eval.gradient);
    let (x, value, gradient_norm) = if status == NewtonStatus::Converged || gradient_norm <= best.0 {
        (x, eval.value, gradient_norm)
    } else {
        (best.1, best.2, best.0)
    };
    NewtonOutcome {
        x,
        value,
        gradient_norm,
        iterations,
        trace,
        status,
    }
}

/// Solves `(V diag(w) V^T + ridge I) p = -g` through a QR factorization of
/// the stacked factor `[diag(sqrt w) V^T; sqrt(ridge) I]`, so the Hessian is
/// never squared. The ridge is `ridge_floor` times the mean Hessian diagonal.
pub(crate) fn newton_direction(
    gram: &FeatureGram,
    w: &[f64],
    g: &[f64],
    ridge_floor: f64,
) -> Option<Vec<f64>> {
    let v = gram.matrix();
    let (n, k) = (gram.n(), gram.truncation());
    let mean_diag = w
        .iter()
        .enumerate()
        .map(|(j, wj)| wj * v.column(j).norm_squared())
        .sum::<f64>()
        / n as f64;
    if !(mean_diag > 0.0 && mean_diag.is_finite()) {
        return None;
    }
    let ridge = (ridge_floor * mean_diag).sqrt();
    let mut stacked = DMatrix::zeros(k + n, n);
    for j in 0..k {
        let s = w[j].max(0.0).sqrt();
        for i in 0..n {
            stacked[(j, i)] = s * v[(i, j)];
        }
    }
    for i in 0..n {
        stacked[(k + i, i)] = ridge;
    }
    let r = stacked.qr().r();
    let solve = |rhs: &DVector<f64>| {
        r.tr_solve_upper_triangular(rhs)
            .and_then(|z| r.solve_upper_triangular(&z))
    };
    let rhs = DVector::from_iterator(n, g.iter().map(|x| -x));
    let mut p = solve(&rhs)?;
    // one refinement step against the unshifted Hessian removes most of the ridge bias
    let weighted = DVector::from_iterator(k, (0..k).map(|j| w[j].max(0.0) * v.column(j).dot(&p)));
    let correction = solve(&(&rhs - v * weighted))?;
    p += correction;
    p.iter()
        .all(|x| x.is_finite())
        .then(|| p.iter().copied().collect())
}

/// `V diag(w) V^T`.
fn weighted_gram(v: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = v.clone();
    for (j, wj) in w.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*wj);
    }
    scaled * v.transpose()
}

/// Cholesky solve of `(H + lambda I) p = g`, raising `lambda` from zero
/// until the shifted matrix is positive definite.
fn shifted_cholesky_solve(h: &DMatrix<f64>, g: &DVector<f64>, ridge_floor: f64) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = h.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let mut lambda = ridge_floor * scale;
    for _ in 0..30 {
        let shifted = h + DMatrix::identity(n, n) * lambda;
        if let Some(chol) = shifted.cholesky() {
            let p = chol.solve(g);
            if p.iter().all(|x| x.is_finite()) {
                return Some(p);
            }
        }
        lambda = if lambda > 0.0 {
            lambda * 10.0
        } else {
            f64::EPSILON * scale
        };
    }
    None
}

fn check_len(gram: &FeatureGram, y: &[f64]) -> Result<()> {
    if y.len() == gram.n() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: gram.n(),
            found: y.len(),
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> FeatureGram {
        FeatureGram::from_columns(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        let err = norm(&sub(a, b));
        assert!(err <= tol, "{a:?} vs {b:?}: {err:e}");
    }

    #[test]
    fn quartic_example_from_both_starts() {
        for init in [Init::Zero, Init::LinearSolve] {
            let opts = SolverOptions {
                init,
                ..Default::default()
            };
            let report = solve_multilinear(&example(), 4, &[8.0, 9.0], &opts).unwrap();
            assert!(report.converged);
            assert!(report.residual_norm <= 1e-10);
            assert_close(&report.coefficients, &[1.0, 1.0], 1e-8);
            assert_eq!(report.objective_trace.len(), report.iterations + 1);
        }
    }

    #[test]
    fn zero_data_gives_zero_coefficients() {
        for init in [Init::Zero, Init::LinearSolve] {
            let opts = SolverOptions {
                init,
                ..Default::default()
            };
            let report = solve_multilinear(&example(), 6, &[0.0, 0.0], &opts).unwrap();
            assert_eq!(report.coefficients, vec![0.0, 0.0]);
            assert_eq!(report.iterations, 0);
        }
    }

    #[test]
    fn linear_case() {
        let report = solve_multilinear(&example(), 2, &[1.0, 2.0], &SolverOptions::default()).unwrap();
        assert_close(&report.coefficients, &[0.0, 1.0], 1e-12);
    }

    #[test]
    fn residual_norm_examples() {
        let v = example();
        assert_eq!(residual_norm(&v, 4, &[1.0, 1.0], &[8.0, 9.0]).unwrap(), 0.0);
        assert_eq!(residual_norm(&v, 4, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(matches!(
            residual_norm(&v, 4, &[0.0, 0.0], &[3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_odd_orders_and_bad_options() {
        let v = example();
        assert!(matches!(
            solve_multilinear(&v, 3, &[1.0, 1.0], &SolverOptions::default()),
            Err(Error::OddOrderUnsupported(3))
        ));
        let bad = SolverOptions {
            line_search_shrink: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            solve_multilinear(&v, 4, &[1.0, 1.0], &bad),
            Err(Error::InvalidOptions(_))
        ));
        let bad = SolverOptions {
            residual_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn inconsistent_rank_deficient_system_is_singular_design() {
        // single feature (1, 1): A_4 c^3 = (s^3, s^3), so y = (1, 2) is unreachable
        let v = FeatureGram::from_columns(&[vec![1.0, 1.0]]).unwrap();
        match solve_multilinear(&v, 4, &[1.0, 2.0], &SolverOptions::default()) {
            Err(Error::SingularDesign(report)) => {
                assert!(!report.converged);
                assert!(report.singular_design);
                // no c gets closer than s^3 = 1.5
                assert!(report.residual_norm >= 0.5f64.sqrt() - 1e-12);
                assert!(report.residual_norm.is_finite());
            }
            other => panic!("expected SingularDesign, got {other:?}"),
        }
        // consistent data still solves, flagged
        let report = solve_multilinear(&v, 4, &[8.0, 8.0], &SolverOptions::default()).unwrap();
        assert!(report.singular_design);
        assert!(report.residual_norm <= 1e-10);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let opts = SolverOptions {
            max_iterations: 0,
            init: Init::Zero,
            ..Default::default()
        };
        let v = FeatureGram::from_columns(&[vec![1.0, 0.5, 0.2], vec![0.3, 1.0, -0.4], vec![0.1, 0.2, 1.0]])
            .unwrap();
        match solve_multilinear(&v, 4, &[1.0, -2.0, 0.5], &opts) {
            Err(Error::NotConverged(report)) => assert!(!report.converged),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn regularized_large_sigma_shrinks_to_zero() {
        let y = [8.0, 9.0];
        let ynorm = norm(&y);
        let report = solve_regularized(&example(), 4, &y, 1e6 * ynorm, &SolverOptions::default()).unwrap();
        assert!(norm(&report.coefficients) < 1e-2, "{:?}", report.coefficients);
        assert!(
            (report.objective - 145.0).abs() / 145.0 < 1e-6,
            "{}",
            report.objective
        );
    }

    #[test]
    fn regularized_small_sigma_approaches_interpolation() {
        let v = example();
        let y = [8.0, 9.0];
        let report = solve_regularized(&v, 4, &y, 1e-6, &SolverOptions::default()).unwrap();
        assert!(report.residual_norm <= 1e-2, "{}", report.residual_norm);
        let energy = v.contract_m(4, &report.coefficients).unwrap();
        assert!((energy - 17.0).abs() / 17.0 < 0.01, "{energy}");
        assert!(!report.minimizers.is_empty());
    }

    #[test]
    fn regularized_linear_case_matches_normal_equations() {
        // m = 2: minimize |A c - y|^2 + sigma c^T A c  =>  (A + sigma I) c = y
        let v = example();
        let y = [1.0, 2.0];
        let sigma = 0.5;
        let report = solve_regularized(&v, 2, &y, sigma, &SolverOptions::default()).unwrap();
        let a = v.gram_matrix() + DMatrix::identity(2, 2) * sigma;
        let expected = a.lu().solve(&DVector::from_column_slice(&y)).unwrap();
        assert_close(&report.coefficients, expected.as_slice(), 1e-9);
        assert_eq!(report.minimizers.len(), 1);
    }

    #[test]
    fn regularized_rejects_nonpositive_sigma() {
        assert!(solve_regularized(&example(), 4, &[1.0, 1.0], 0.0, &SolverOptions::default()).is_err());
    }
}

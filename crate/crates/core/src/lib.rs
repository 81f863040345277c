//! Scattered-data interpolation with strictly positive definite multi-kernels.
//!
//! A truncated feature expansion `phi_1, ..., phi_K` on a compact box defines
//! the kernel `Phi_2(z1, z2) = sum_k phi_k(z1) phi_k(z2)` and, for every even
//! order `m`, the multi-kernel `Phi_m(z_1..z_m) = sum_k prod_i phi_k(z_i)`.
//! Interpolating data `(x_i, y_i)` with `Phi_m` leads to the multi-linear
//! system `A_m c^{m-1} = y`, uniquely solvable when the nodes' feature Gram
//! has full row rank; the interpolant is the minimum-norm interpolant in the
//! Banach space `B^{m/(m-1)}`.
//!
//! | module | contents |
//! |--------|----------|
//! | [`feature_model`] | domains, feature families, `Phi_2` and `Phi_m` |
//! | [`multi_tensor`] | the feature Gram, tensor contractions, dense oracle, definiteness probes |
//! | [`mls_solver`] | Newton solver for `A_m c^{m-1} = y` and the regularized problem |
//! | [`interpolant`] | fitting, evaluation, `B^p` norms, Gateaux derivative, JSON form |
//! | [`error_analysis`] | power functions, fill distance, error bounds, convergence studies |
//!
//! ```
//! use multikernel::{fit, Domain, FeatureModel, NodeSet, SolverOptions};
//!
//! let domain = Domain::cube(1, -1.0, 1.0).unwrap();
//! let model = FeatureModel::power_series_with(domain, vec![vec![0], vec![1]], vec![1.0, 1.0]).unwrap();
//! let nodes = NodeSet::new(vec![vec![0.0], vec![1.0]], vec![8.0, 9.0]).unwrap();
//! let s = fit(&model, &nodes, 4, &SolverOptions::default()).unwrap();
//! assert!((s.evaluate(&[0.5]).unwrap() - 8.5).abs() < 1e-9);
//! assert!((s.banach_norm_via_tensor() - 17f64.powf(0.75)).abs() < 1e-8);
//! ```

pub mod error;
pub mod error_analysis;
pub mod feature_model;
pub mod interpolant;
pub mod mls_solver;
pub mod multi_tensor;

pub use error::{Error, Result};
pub use error_analysis::{
    convergence_study, error_bound, fill_distance, power_function, power_function_p2_closed, power_report,
    FillDistance, NodeLayout, PowerFunction, PowerReport, SpanTarget, StudyConfig, StudyRow,
};
pub use feature_model::{Domain, FamilyKind, FeatureFamily, FeatureModel, FeatureTable, SummabilityReport};
pub use interpolant::{
    banach_norm_direct, fit, gateaux_coefficients, Interpolant, InterpolantDocument, NodeSet,
};
pub use mls_solver::{
    residual_norm, solve_multilinear, solve_regularized, Init, RegularizedReport, SolveReport, SolverOptions,
};
pub use multi_tensor::{DenseTensor, FeatureGram, MonotoneReport, SemiPdReport};

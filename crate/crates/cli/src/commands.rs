use std::path::{Path, PathBuf};

use multikernel::error_analysis::{write_study_csv, NodeLayout};
use multikernel::{
    convergence_study, fit as fit_interpolant, power_report, Domain, Error, FeatureModel, Init, Interpolant,
    NodeSet, SolveReport, SolverOptions, SpanTarget, StudyConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::config::ConfigFile;
use crate::failure::{CliError, CliResult, EXIT_BOUND_VIOLATED, EXIT_DOMAIN, EXIT_OK};
use crate::table::{coordinate_columns, read_points, CsvOut, PointTable};
use crate::{Common, EvalArgs, FitArgs, PowerArgs, StudyArgs};

const DEFAULT_ORDER: usize = 4;
const DEFAULT_FIT_OUT: &str = "interpolant.json";

/// Command-line flags merged over the optional config file.
struct Settings<'a> {
    flags: &'a Common,
    file: ConfigFile,
}

struct ModelDefaults {
    kernel: &'static str,
    truncation: usize,
    decay: f64,
}

const FIT_DEFAULTS: ModelDefaults = ModelDefaults {
    kernel: "power",
    truncation: 8,
    decay: 0.5,
};

const STUDY_DEFAULTS: ModelDefaults = ModelDefaults {
    kernel: "trig",
    truncation: 49,
    decay: 0.5,
};

impl<'a> Settings<'a> {
    fn new(flags: &'a Common) -> CliResult<Self> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Ok(Self { flags, file })
    }

    fn path(&self, flag: &Option<PathBuf>, key: &str) -> CliResult<Option<PathBuf>> {
        self.file.pick(flag.clone(), key)
    }

    fn required_path(&self, flag: &Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
        self.path(flag, key)?
            .ok_or_else(|| CliError::input(format!("missing --{key} (or `{key}` in the config file)")))
    }

    fn order(&self) -> CliResult<usize> {
        let m = self.file.pick_or(self.flags.order, "order", DEFAULT_ORDER)?;
        if m < 2 || m % 2 != 0 {
            return Err(CliError::input(format!(
                "--order must be an even integer >= 2, got {m}"
            )));
        }
        Ok(m)
    }

    fn out(&self) -> CliResult<Option<PathBuf>> {
        self.path(&self.flags.out, "out")
    }

    fn grid(&self, default: usize) -> CliResult<usize> {
        self.file.pick_or(self.flags.grid, "grid", default)
    }

    fn seed(&self) -> CliResult<u64> {
        self.file.pick_or(self.flags.seed, "seed", 0)
    }

    fn solver(&self) -> CliResult<SolverOptions> {
        let defaults = SolverOptions::default();
        let init = match self.file.pick(self.flags.init.clone(), "init")?.as_deref() {
            None | Some("linear") => Init::LinearSolve,
            Some("zero") => Init::Zero,
            Some(other) => {
                return Err(CliError::input(format!(
                    "--init must be `linear` or `zero`, got `{other}`"
                )))
            }
        };
        let opts = SolverOptions {
            residual_tol: self.file.pick_or(self.flags.tol, "tol", defaults.residual_tol)?,
            max_iterations: self
                .file
                .pick_or(self.flags.max_iter, "max-iter", defaults.max_iterations)?,
            init,
            seed: self.seed()?,
            ..defaults
        };
        opts.validate()?;
        Ok(opts)
    }

    fn domain(&self, dim: usize) -> CliResult<Domain> {
        match self.file.pick(self.flags.domain.clone(), "domain")? {
            Some(spec) => {
                let domain = parse_domain(&spec)?;
                if domain.dim() != dim {
                    return Err(CliError::input(format!(
                        "--domain has {} axes but the data has {dim} coordinates",
                        domain.dim()
                    )));
                }
                Ok(domain)
            }
            None => Ok(Domain::cube(dim, -1.0, 1.0)?),
        }
    }

    /// Feature model for `dim`-dimensional points.
    fn model(&self, dim: usize, defaults: &ModelDefaults) -> CliResult<FeatureModel> {
        let kernel = self.file.pick(self.flags.kernel.clone(), "kernel")?;
        let kernel = kernel.as_deref().unwrap_or(defaults.kernel);
        let truncation = self
            .file
            .pick_or(self.flags.truncation, "truncation", defaults.truncation)?;
        let decay = self.file.pick_or(self.flags.decay, "decay", defaults.decay)?;
        let model = match kernel {
            "power" => FeatureModel::power_series(self.domain(dim)?, truncation, decay)?,
            "trig" => FeatureModel::trigonometric(self.domain(dim)?, truncation, decay)?,
            "table" => {
                let path = self.required_path(&self.flags.table, "table")?;
                let model = FeatureModel::load_custom_table(&path)
                    .map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
                if model.dim() != dim {
                    return Err(CliError::input(format!(
                        "feature table has {} coordinates but the data has {dim}",
                        model.dim()
                    )));
                }
                model
            }
            other => {
                return Err(CliError::input(format!(
                    "--kernel must be `power`, `trig` or `table`, got `{other}`"
                )))
            }
        };
        Ok(model)
    }
}

/// `lo:hi[,lo:hi...]`.
pub fn parse_domain(spec: &str) -> CliResult<Domain> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for axis in spec.split(',') {
        let bad = || CliError::input(format!("--domain: expected `lo:hi` per axis, got `{axis}`"));
        let (lo, hi) = axis.trim().split_once(':').ok_or_else(bad)?;
        lower.push(lo.trim().parse::<f64>().map_err(|_| bad())?);
        upper.push(hi.trim().parse::<f64>().map_err(|_| bad())?);
    }
    Ok(Domain::new(lower, upper)?)
}

/// Builds the node set, reporting duplicate points by file line.
fn node_set(table: &PointTable, values: Vec<f64>) -> CliResult<NodeSet> {
    if table.points.is_empty() {
        return Err(CliError::input("no data rows"));
    }
    NodeSet::new(table.points.clone(), values).map_err(|e| match e {
        Error::DuplicateNodes {
            first,
            second,
            distance,
        } => CliError::input(format!(
            "duplicate points on lines {} and {} (distance {distance:e})",
            table.lines[first], table.lines[second]
        )),
        other => other.into(),
    })
}

fn fit_report(
    model: &FeatureModel,
    m: usize,
    report: &SolveReport,
    s: Option<&Interpolant>,
) -> serde_json::Value {
    json!({
        "converged": report.converged,
        "singular_design": report.singular_design,
        "order": m,
        "truncation": model.truncation(),
        "nodes": report.coefficients.len(),
        "residual_norm": report.residual_norm,
        "iterations": report.iterations,
        "norm_exponent": m as f64 / (m as f64 - 1.0),
        "norm": s.map(|s| s.banach_norm_via_tensor()),
        "coefficients": report.coefficients,
    })
}

fn write_json(value: &serde_json::Value, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn fit(args: &FitArgs) -> CliResult<i32> {
    let settings = Settings::new(&args.common)?;
    let data_path = settings.required_path(&args.data, "data")?;
    let table = read_points(&data_path)?;
    let values = table.require_values(&data_path)?.to_vec();
    let nodes = node_set(&table, values)?;
    let model = settings.model(nodes.dim(), &FIT_DEFAULTS)?;
    let m = settings.order()?;
    let opts = settings.solver()?;
    let out = settings.out()?.unwrap_or_else(|| PathBuf::from(DEFAULT_FIT_OUT));
    let report_path = settings.path(&args.report, "report")?;

    match fit_interpolant(&model, &nodes, m, &opts) {
        Ok(s) => {
            s.save(&out)?;
            let report = s.report().expect("fitted interpolants carry a report");
            write_json(&fit_report(&model, m, report, Some(&s)), report_path.as_deref())?;
            Ok(EXIT_OK)
        }
        Err(Error::NotConverged(report)) => {
            write_json(&fit_report(&model, m, &report, None), report_path.as_deref())?;
            Err(CliError::from(Error::NotConverged(report)))
        }
        Err(Error::SingularDesign(report)) => {
            write_json(&fit_report(&model, m, &report, None), report_path.as_deref())?;
            let (k, n) = (model.truncation(), nodes.n());
            let hint = if k < n {
                format!("truncation K = {k} is smaller than the {n} nodes; raise --truncation")
            } else {
                "the feature Gram of the nodes is rank deficient".to_string()
            };
            Err(CliError::from(Error::SingularDesign(report)).context(&hint))
        }
        Err(other) => Err(other.into()),
    }
}

fn eval_points(
    settings: &Settings,
    points_flag: &Option<PathBuf>,
    domain: &Domain,
    default_grid: Option<usize>,
) -> CliResult<PointTable> {
    let points = settings.path(points_flag, "points")?;
    let grid = settings.file.pick(settings.flags.grid, "grid")?;
    match (points, grid.or(default_grid)) {
        (Some(path), _) => {
            let table = read_points(&path)?;
            if let Some(d) = table.dim() {
                if d != domain.dim() {
                    return Err(CliError::input(format!(
                        "{}: points have {d} coordinates, the model has {}",
                        path.display(),
                        domain.dim()
                    )));
                }
            }
            Ok(table)
        }
        (None, Some(per_dim)) => {
            let points = domain.grid(per_dim)?;
            let lines = vec![0; points.len()];
            Ok(PointTable {
                points,
                values: None,
                lines,
            })
        }
        (None, None) => Err(CliError::input("give --points or --grid")),
    }
}

pub fn eval(args: &EvalArgs) -> CliResult<i32> {
    let settings = Settings::new(&args.common)?;
    let model_path = settings.required_path(&args.model, "model")?;
    let s = Interpolant::load(&model_path)
        .map_err(|e| CliError::input(format!("{}: {e}", model_path.display())))?;
    let table = eval_points(&settings, &args.points, s.model().domain(), None)?;
    let d = s.model().dim();

    let mut out = CsvOut::create(settings.out()?.as_deref())?;
    let mut columns = coordinate_columns(d);
    columns.extend(["value".to_string(), "flag".to_string()]);
    out.header(&columns)?;
    let mut flagged = 0;
    for (x, value) in table.points.iter().zip(s.evaluate_many(&table.points)) {
        match value {
            Ok(v) => {
                let mut row = x.clone();
                row.push(v);
                out.row(&row, &[""])?;
            }
            Err(Error::PointOutsideDomain { .. }) => {
                flagged += 1;
                out.row(x, &["", "outside_domain"])?;
            }
            Err(Error::PointNotTabulated(_)) => {
                flagged += 1;
                out.row(x, &["", "not_tabulated"])?;
            }
            Err(other) => return Err(other.into()),
        }
    }
    out.finish()?;
    if flagged > 0 {
        eprintln!("error: {flagged} point(s) could not be evaluated");
        return Ok(EXIT_DOMAIN);
    }
    Ok(EXIT_OK)
}

pub fn power(args: &PowerArgs) -> CliResult<i32> {
    let settings = Settings::new(&args.common)?;
    let nodes_path = settings.required_path(&args.nodes, "nodes")?;
    let node_table = read_points(&nodes_path)?;
    let nodes = node_set(&node_table, vec![0.0; node_table.points.len()])?;
    let model = settings.model(nodes.dim(), &FIT_DEFAULTS)?;
    let m = settings.order()?;
    let opts = settings.solver()?;
    let f_norm = settings.file.pick_or(args.f_norm, "f-norm", 1.0)?;
    if !(f_norm >= 0.0 && f_norm.is_finite()) {
        return Err(CliError::input(format!(
            "--f-norm must be finite and >= 0, got {f_norm}"
        )));
    }
    let fill_grid = settings.file.pick_or(args.fill_grid, "fill-grid", 201)?;
    let table = eval_points(&settings, &args.points, model.domain(), Some(101))?;
    for (x, line) in table.points.iter().zip(&table.lines) {
        model
            .domain()
            .clamp(x)
            .map_err(|e| CliError::from(e).context(&format!("evaluation point on line {line}")))?;
    }

    let report = power_report(&model, &nodes, m, &table.points, f_norm, fill_grid, &opts)?;
    let mut out = CsvOut::create(settings.out()?.as_deref())?;
    let mut columns = coordinate_columns(model.dim());
    columns.extend(["p_m", "p_2", "bound"].map(String::from));
    out.header(&columns)?;
    for (i, x) in report.eval_points.iter().enumerate() {
        let mut row = x.clone();
        row.extend([report.p_m[i], report.p_2[i], report.bound[i]]);
        out.row(&row, &[])?;
    }
    out.finish()?;
    eprintln!(
        "fill distance h = {} (grid spacing {})",
        report.fill_distance.h, report.fill_distance.grid_spacing
    );
    Ok(EXIT_OK)
}

fn parse_counts(spec: &str) -> CliResult<Vec<usize>> {
    let counts = spec
        .split(',')
        .map(|c| c.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::input(format!("--counts: {e}")))?;
    if counts.is_empty() || counts.windows(2).any(|w| w[1] <= w[0]) || counts[0] == 0 {
        return Err(CliError::input(
            "--counts must be positive and strictly increasing",
        ));
    }
    Ok(counts)
}

pub fn study(args: &StudyArgs) -> CliResult<i32> {
    let settings = Settings::new(&args.common)?;
    let dim = match settings.file.pick(settings.flags.domain.clone(), "domain")? {
        Some(spec) => parse_domain(&spec)?.dim(),
        None => 1,
    };
    let model = settings.model(dim, &STUDY_DEFAULTS)?;
    let counts = parse_counts(&settings.file.pick_or(
        args.counts.clone(),
        "counts",
        "4,8,16,32".to_string(),
    )?)?;
    let layout = match settings.file.pick(args.layout.clone(), "layout")?.as_deref() {
        None | Some("halton") => NodeLayout::Halton,
        Some("uniform") => NodeLayout::Uniform,
        Some(other) => {
            return Err(CliError::input(format!(
                "--layout must be `halton` or `uniform`, got `{other}`"
            )))
        }
    };
    let eval_grid = model
        .domain()
        .grid(settings.grid(if dim == 1 { 201 } else { 41 })?)?;
    let config = StudyConfig {
        order: settings.order()?,
        node_counts: counts,
        layout,
        fill_grid_per_dim: settings.file.pick_or(
            args.fill_grid,
            "fill-grid",
            if dim == 1 { 1001 } else { 101 },
        )?,
        ..Default::default()
    };
    let opts = settings.solver()?;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed()?);
    let target = SpanTarget {
        alpha: (0..model.truncation())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
    };
    let rows = convergence_study(&model, &target, &eval_grid, &config, &opts)?;
    let mut out = CsvOut::create(settings.out()?.as_deref())?;
    write_study_csv(&rows, out.raw())?;
    out.finish()?;
    let failing: Vec<String> = rows
        .iter()
        .filter(|r| !r.bound_holds)
        .map(|r| r.n.to_string())
        .collect();
    if failing.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: error bound violated for n = {}", failing.join(", "));
        Ok(EXIT_BOUND_VIOLATED)
    }
}

//! Experiment configuration and runners: convergence-rate sweeps, out-of-sample
//! evaluation near a manifold, quadrature of kernel-generated test functions, single
//! syntheses and partition checks. Reports are written as CSV, JSON and
//! gnuplot-ready data.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::geometry::{dimension_estimate, farthest_point_subset, PointSet, SpaceDescriptor, SpaceKind};
use crate::kernels::{predicted_exponent, KernelSpec, TargetFunction};
use crate::measures::DiscreteMeasure;
use crate::partition::{build_partition, PartitionDiagnostics};
use crate::regression::LineFit;
use crate::sampling;
use crate::synthesis::{
    derived_seed, eval_grid, evaluate_network, monte_carlo_baseline, reference_measure, synthesize_on_grid, GNetwork,
    SynthesisConfig, SynthesisMode, SynthesisReport,
};

pub use crate::regression::fit_slope;

/// Exact header of rate-study CSV files.
pub const RATE_HEADER: [&str; 6] = ["n", "N", "sup_error", "l2_error", "mc_error", "wall_ms"];
/// Errors at or below this are treated as exact and left out of log-log fits.
pub const EXACT_ERROR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RateStudy,
    OosStudy,
    QuadStudy,
    Synth,
    CheckPartition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    /// Equatorial great circle of S², as a point cloud in ℝ³.
    CircleInSphere,
    UniformSphere,
    UniformCube,
    /// Standard torus with radii 0.6 and 0.25, as a point cloud in [−1, 1]³.
    TorusInCube,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSource {
    Builtin {
        builtin: Builtin,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// JSON measure file `{"space": …, "points": […], "weights": […]}`.
    File { file: PathBuf },
}

fn default_samples() -> usize {
    4096
}

fn default_degree() -> usize {
    3
}

fn default_draws() -> usize {
    32
}

fn default_grid() -> usize {
    2000
}

fn default_mc_draws() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Dimension of the uniform builtins (`sphere` or `cube` kind); ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceDescriptor>,
    pub kernel: KernelSpec,
    pub tau: TauSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_sweep: Vec<f64>,
    /// Resolution for `synth` and `check-partition`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(rename = "R", default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_grid")]
    pub eval_grid_size: usize,
    /// Independent Monte Carlo baselines averaged per rate-study row.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_functions: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Intrinsic dimension of τ; inferred when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Exceptional-set dimension override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if let TauSource::File { file } = &mut cfg.tau {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sweep.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return input("every n in n_sweep must be positive");
        }
        if self.n_sweep.windows(2).any(|w| w[1] <= w[0]) {
            return input("n_sweep must be strictly increasing");
        }
        if self.mc_draws == 0 {
            return input("mc_draws must be at least 1");
        }
        if let Some(d) = self.tube_delta {
            if !(d > 0.0) {
                return input("tube_delta must be positive");
            }
        }
        if let TauSource::Builtin { samples, .. } = self.tau {
            if samples == 0 {
                return input("builtin sample count must be positive");
            }
        }
        self.synthesis(1.0).validate()
    }

    pub fn synthesis(&self, n: f64) -> SynthesisConfig {
        SynthesisConfig {
            n,
            degree: self.degree,
            draws: self.draws,
            eval_grid_size: self.eval_grid_size,
            master_seed: self.master_seed,
            mode: SynthesisMode::Randomized,
        }
    }

    fn sweep(&self) -> Result<&[f64]> {
        if self.n_sweep.is_empty() {
            return input("this experiment needs a nonempty n_sweep");
        }
        Ok(&self.n_sweep)
    }

    fn single_n(&self) -> Result<f64> {
        match (self.n, self.n_sweep.first()) {
            (Some(n), _) | (None, Some(&n)) => Ok(n),
            (None, None) => input("set n (or n_sweep) for this experiment"),
        }
    }
}

/// A resolved experiment: space, target and the intrinsic dimension of τ.
#[derive(Clone, Debug)]
pub struct Problem {
    pub space: SpaceDescriptor,
    pub target: TargetFunction,
    pub q: f64,
    pub builtin: Option<Builtin>,
}

impl Problem {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(cfg.master_seed, 0x7461_7500));
        let (space, measure, builtin) = match &cfg.tau {
            TauSource::Builtin { builtin, samples } => {
                let n = *samples;
                let (space, pts) = match builtin {
                    Builtin::UniformSphere => {
                        let q = match cfg.space.as_ref().map(|s| &s.kind) {
                            Some(SpaceKind::Sphere { q }) => *q,
                            None => 2,
                            Some(_) => return input("uniform-sphere needs a sphere space"),
                        };
                        (SpaceDescriptor::sphere(q)?, sampling::uniform_sphere(q, n, &mut rng))
                    }
                    Builtin::UniformCube => {
                        let q = match cfg.space.as_ref().map(|s| &s.kind) {
                            Some(SpaceKind::Cube { q }) => *q,
                            None => 2,
                            Some(_) => return input("uniform-cube needs a cube space"),
                        };
                        (SpaceDescriptor::cube(q)?, sampling::uniform_cube(q, n, &mut rng))
                    }
                    Builtin::CircleInSphere => {
                        let pts = sampling::great_circle(n, &mut rng);
                        (SpaceDescriptor::point_cloud(pts.clone()), pts)
                    }
                    Builtin::TorusInCube => {
                        let pts = sampling::torus(n, &mut rng);
                        (SpaceDescriptor::point_cloud(pts.clone()), pts)
                    }
                };
                (space, DiscreteMeasure::uniform(pts), Some(*builtin))
            }
            TauSource::File { file } => {
                let (space, m) = DiscreteMeasure::load(file)?;
                (space, m, None)
            }
        };
        let q = match (cfg.q, builtin, &space.kind) {
            (Some(q), _, _) => q,
            (None, Some(Builtin::CircleInSphere), _) => 1.0,
            (None, Some(Builtin::TorusInCube), _) => 2.0,
            (None, _, SpaceKind::Sphere { q } | SpaceKind::Cube { q }) => *q as f64,
            (None, _, SpaceKind::PointCloud { .. }) => {
                let support = measure.points().subset(&measure.support())?;
                dimension_estimate(&space, &support, &[0.05, 0.1, 0.2, 0.4])?.dimension
            }
        };
        let target = TargetFunction::new(cfg.kernel.clone(), measure);
        target.validate(&space)?;
        Ok(Self { space, target, q, builtin })
    }

    pub fn predicted_exponent(&self, s: Option<f64>) -> f64 {
        let mut profile = self.target.kernel.profile(self.q);
        if let Some(s) = s {
            profile.s = s;
        }
        predicted_exponent(&profile, self.q)
    }

    /// Ambient points within `delta` of the τ sample, thinned to `size` points by
    /// farthest-point selection.
    pub fn tube_grid(&self, delta: f64, size: usize, seed: u64) -> Result<PointSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, 0x7475_6265));
        let base = self.target.measure.points();
        let d = base.dim();
        let mut coords = Vec::with_capacity(8 * size * d);
        for _ in 0..8 * size {
            let p = base.point(rng.random_range(0..base.len()));
            let off = sampling::ball_offset(d, delta, &mut rng);
            coords.extend(p.iter().zip(&off).map(|(a, b)| a + b));
        }
        let pool = PointSet::from_flat(d, coords)?;
        let ambient = SpaceDescriptor::point_cloud(pool.clone());
        pool.subset(&farthest_point_subset(&ambient, &pool, size, 0))
    }
}

/// Status of a log-log fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Ok,
    /// Every error is at rounding level; no rate to fit.
    Degenerate,
    /// Fewer than four usable rows.
    Insufficient,
}

/// Least-squares fit of log y against log x over rows with y > [`EXACT_ERROR`].
pub fn loglog_fit(points: &[(f64, f64)]) -> (FitStatus, Option<LineFit>) {
    let usable: Vec<(f64, f64)> =
        points.iter().filter(|p| p.1 > EXACT_ERROR && p.1.is_finite() && p.0 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if !points.is_empty() && usable.is_empty() {
        return (FitStatus::Degenerate, None);
    }
    if usable.len() < 4 {
        return (FitStatus::Insufficient, None);
    }
    match fit_slope(&usable) {
        Ok(f) => (FitStatus::Ok, Some(f)),
        Err(_) => (FitStatus::Degenerate, None),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: f64,
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub sup_error: f64,
    pub l2_error: f64,
    pub mc_error: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub n: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fit_status: FitStatus,
    /// log sup_error against log N.
    pub fit: Option<LineFit>,
    pub mc_fit_status: FitStatus,
    pub mc_fit: Option<LineFit>,
    pub predicted_exponent: f64,
    pub q: f64,
    pub seed: u64,
    pub grid_size: usize,
    pub failures: Vec<RowFailure>,
    pub warnings: Vec<String>,
}

/// Seed of the `k`-th baseline draw with `n_terms` atoms.
pub fn mc_seed(master: u64, n_terms: usize, k: usize) -> u64 {
    derived_seed(derived_seed(master, n_terms as u64), 0x6d63_0000 + k as u64)
}

/// One synthesis per n, compared with the mean sup error of `mc_draws` equal-size
/// Monte Carlo baselines, then slope fits.
pub fn run_rate_study(cfg: &ExperimentConfig) -> Result<RateReport> {
    let problem = Problem::from_config(cfg)?;
    let grid = eval_grid(&problem.space, cfg.eval_grid_size, cfg.master_seed)?;
    let f = problem.target.eval_grid(&grid)?;
    let outcomes: Vec<Result<RateRow>> = cfg
        .sweep()?
        .par_iter()
        .map(|&n| {
            let (net, report) = synthesize_on_grid(&problem.space, &problem.target, &cfg.synthesis(n), &grid)?;
            let mut mc_error = 0.0;
            for k in 0..cfg.mc_draws {
                let seed = mc_seed(cfg.master_seed, net.len(), k);
                let mc = monte_carlo_baseline(&problem.space, &problem.target, net.len(), seed)?;
                let mc_vals = evaluate_network(&mc, &grid)?;
                mc_error += f.iter().zip(&mc_vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            }
            mc_error /= cfg.mc_draws as f64;
            Ok(RateRow {
                n,
                n_terms: report.n_terms,
                sup_error: report.sup_error,
                l2_error: report.l2_error,
                mc_error,
                wall_ms: report.wall_ms,
            })
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&n, o) in cfg.n_sweep.iter().zip(outcomes) {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => failures.push(RowFailure { n, error: e.to_string() }),
        }
    }
    rows.sort_by(|a, b| a.n_terms.cmp(&b.n_terms).then(a.n.total_cmp(&b.n)));
    let (fit_status, fit) = loglog_fit(&rows.iter().map(|r| (r.n_terms as f64, r.sup_error)).collect::<Vec<_>>());
    let (mc_fit_status, mc_fit) = loglog_fit(&rows.iter().map(|r| (r.n_terms as f64, r.mc_error)).collect::<Vec<_>>());
    let mut warnings = Vec::new();
    let support = problem.target.measure.support().len();
    if let Some(r) = rows.iter().find(|r| support < 10 * r.n_terms) {
        warnings.push(format!("tau has {support} support points, fewer than 10 N = {}", 10 * r.n_terms));
    }
    Ok(RateReport {
        rows,
        fit_status,
        fit,
        mc_fit_status,
        mc_fit,
        predicted_exponent: problem.predicted_exponent(cfg.s),
        q: problem.q,
        seed: cfg.master_seed,
        grid_size: grid.len(),
        failures,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OosRow {
    pub n: f64,
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub manifold_error: f64,
    pub tube_error: f64,
    pub ratio: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OosReport {
    pub rows: Vec<OosRow>,
    pub tube_delta: f64,
    pub manifold_fit: Option<LineFit>,
    pub tube_fit: Option<LineFit>,
    pub seed: u64,
    pub failures: Vec<RowFailure>,
}

/// Networks built from the manifold sample only, evaluated on the manifold and on a
/// tube of radius `tube_delta` around it without any refit.
pub fn run_oos_study(cfg: &ExperimentConfig) -> Result<OosReport> {
    let problem = Problem::from_config(cfg)?;
    if !matches!(problem.builtin, Some(Builtin::CircleInSphere | Builtin::TorusInCube)) {
        return input("oos-study needs the circle-in-sphere or torus-in-cube builtin");
    }
    if problem.target.kernel.is_dot_product() {
        return input("oos-study evaluates off the manifold and needs a radial kernel");
    }
    let delta = cfg.tube_delta.ok_or_else(|| Error::Input("oos-study needs tube_delta".into()))?;
    let manifold = eval_grid(&problem.space, cfg.eval_grid_size, cfg.master_seed)?;
    let tube = problem.tube_grid(delta, cfg.eval_grid_size, cfg.master_seed)?;
    let f_tube = problem.target.eval_grid(&tube)?;
    let outcomes: Vec<Result<OosRow>> = cfg
        .sweep()?
        .par_iter()
        .map(|&n| {
            let (net, report) = synthesize_on_grid(&problem.space, &problem.target, &cfg.synthesis(n), &manifold)?;
            let g = evaluate_network(&net, &tube)?;
            let tube_error = f_tube.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(OosRow {
                n,
                n_terms: net.len(),
                manifold_error: report.sup_error,
                tube_error,
                ratio: tube_error / report.sup_error,
                wall_ms: report.wall_ms,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&n, o) in cfg.n_sweep.iter().zip(outcomes) {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => failures.push(RowFailure { n, error: e.to_string() }),
        }
    }
    let manifold_fit = loglog_fit(&rows.iter().map(|r| (r.n_terms as f64, r.manifold_error)).collect::<Vec<_>>()).1;
    let tube_fit = loglog_fit(&rows.iter().map(|r| (r.n_terms as f64, r.tube_error)).collect::<Vec<_>>()).1;
    Ok(OosReport { rows, tube_delta: delta, manifold_fit, tube_fit, seed: cfg.master_seed, failures })
}

/// g(y) = Σᵢ vᵢ G(xᵢ, y) with ‖ν‖_TV = Σ|vᵢ| = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub nu: DiscreteMeasure,
}

impl TestFunction {
    pub fn eval(&self, kernel: &KernelSpec, y: &[f64]) -> f64 {
        self.nu.points().iter().zip(self.nu.weights()).map(|(x, &v)| v * kernel.eval(x, y)).sum()
    }
}

/// `count` functions, each with five signed atoms on grid points and unit total variation.
pub fn random_test_functions(grid: &PointSet, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, 0x7175_6164));
    (0..count)
        .map(|_| {
            let idx: Vec<usize> = (0..5).map(|_| rng.random_range(0..grid.len())).collect();
            let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tv: f64 = raw.iter().map(|v: &f64| v.abs()).sum();
            let v = raw.iter().map(|x| x / tv).collect();
            Ok(TestFunction { nu: DiscreteMeasure::new(grid.subset(&idx)?, v)? })
        })
        .collect()
}

/// |∫ g dτ − Σₖ aₖ g(yₖ)|.
pub fn integration_error(g: &TestFunction, kernel: &KernelSpec, tau: &DiscreteMeasure, net: &GNetwork) -> f64 {
    let exact: f64 = tau.points().iter().zip(tau.weights()).map(|(y, &w)| w * g.eval(kernel, y)).sum();
    let approx: f64 = net.terms.iter().map(|t| t.a * g.eval(kernel, &t.y)).sum();
    (exact - approx).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadRow {
    pub n: f64,
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub sup_error: f64,
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadReport {
    pub rows: Vec<QuadRow>,
    pub test_functions: Vec<TestFunction>,
    /// Mean integration error against N.
    pub fit: Option<LineFit>,
    /// Network sup error against N on the same runs.
    pub sup_fit: Option<LineFit>,
    pub seed: u64,
    pub failures: Vec<RowFailure>,
}

/// Integrates kernel-generated test functions with the neurons of the synthesized
/// networks; the quadrature depends only on τ, never on the test functions.
pub fn run_quad_study(cfg: &ExperimentConfig) -> Result<QuadReport> {
    let problem = Problem::from_config(cfg)?;
    let grid = eval_grid(&problem.space, cfg.eval_grid_size, cfg.master_seed)?;
    let funcs = random_test_functions(&grid, cfg.test_functions.unwrap_or(10), cfg.master_seed)?;
    let kernel = &problem.target.kernel;
    let outcomes: Vec<Result<QuadRow>> = cfg
        .sweep()?
        .par_iter()
        .map(|&n| {
            let (net, report) = synthesize_on_grid(&problem.space, &problem.target, &cfg.synthesis(n), &grid)?;
            let errors: Vec<f64> = funcs.iter().map(|g| integration_error(g, kernel, &problem.target.measure, &net)).collect();
            let mean_error = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
            let max_error = errors.iter().copied().fold(0.0, f64::max);
            Ok(QuadRow { n, n_terms: net.len(), sup_error: report.sup_error, errors, mean_error, max_error })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&n, o) in cfg.n_sweep.iter().zip(outcomes) {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => failures.push(RowFailure { n, error: e.to_string() }),
        }
    }
    let fit = loglog_fit(&rows.iter().map(|r| (r.n_terms as f64, r.mean_error)).collect::<Vec<_>>()).1;
    let sup_fit = loglog_fit(&rows.iter().map(|r| (r.n_terms as f64, r.sup_error)).collect::<Vec<_>>()).1;
    Ok(QuadReport { rows, test_functions: funcs, fit, sup_fit, seed: cfg.master_seed, failures })
}

/// One synthesis at `cfg.n` (or the first sweep entry).
pub fn run_synth(cfg: &ExperimentConfig) -> Result<(GNetwork, SynthesisReport)> {
    let problem = Problem::from_config(cfg)?;
    let grid = eval_grid(&problem.space, cfg.eval_grid_size, cfg.master_seed)?;
    synthesize_on_grid(&problem.space, &problem.target, &cfg.synthesis(cfg.single_n()?), &grid)
}

/// Diagnostics of the partition of the positive part of τ at ε = 1/(2n).
pub fn check_partition(cfg: &ExperimentConfig) -> Result<PartitionDiagnostics> {
    let problem = Problem::from_config(cfg)?;
    let n = cfg.single_n()?;
    let pos = crate::measures::jordan_decompose(&problem.target.measure).0;
    let reference = reference_measure(&problem.space, pos.support().len(), cfg.master_seed);
    let build = build_partition(&problem.space, &pos, &reference, 1.0 / (2.0 * n), cfg.master_seed)?;
    Ok(build.diagnostics(&problem.space))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// CSV bytes of the rate rows with the exact [`RATE_HEADER`].
pub fn rate_csv(rows: &[RateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATE_HEADER)?;
    for r in rows {
        w.serialize((r.n, r.n_terms, r.sup_error, r.l2_error, r.mc_error, r.wall_ms))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_rate_csv(text: &str) -> Result<Vec<RateRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(RATE_HEADER) {
        return input("unexpected rate CSV header");
    }
    r.deserialize::<(f64, usize, f64, f64, f64, u64)>()
        .map(|rec| {
            let (n, n_terms, sup_error, l2_error, mc_error, wall_ms) = rec?;
            Ok(RateRow { n, n_terms, sup_error, l2_error, mc_error, wall_ms })
        })
        .collect()
}

/// Whitespace-separated data with a commented header, readable by gnuplot.
fn write_dat(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = format!("# {}\n", header.join(" "));
    for r in rows {
        out += &r.join(" ");
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_plt(path: &Path, title: &str, dat: &str, series: &[(usize, &str)]) -> Result<()> {
    let mut out = format!(
        "set terminal pngcairo size 800,600\nset output '{}.png'\nset logscale xy\nset xlabel 'N'\nset ylabel 'error'\nset key top right\nset title '{title}'\nplot ",
        dat.trim_end_matches(".dat")
    );
    let plots: Vec<String> =
        series.iter().map(|(col, name)| format!("'{dat}' using 2:{col} with linespoints title '{name}'")).collect();
    out += &plots.join(", \\\n     ");
    out.push('\n');
    fs::write(path, out)?;
    Ok(())
}

/// `rate.csv`, `rate.json`, `rate.dat` and `rate.plt` in `dir`.
pub fn write_rate_report(report: &RateReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("rate.csv"), rate_csv(&report.rows)?)?;
    write_json(&dir.join("rate.json"), report)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.n_terms.to_string(),
                r.sup_error.to_string(),
                r.l2_error.to_string(),
                r.mc_error.to_string(),
                r.wall_ms.to_string(),
            ]
        })
        .collect();
    write_dat(&dir.join("rate.dat"), &RATE_HEADER, &rows)?;
    write_plt(&dir.join("rate.plt"), "rate study", "rate.dat", &[(3, "sup error"), (4, "l2 error"), (5, "Monte Carlo")])
}

/// `oos.csv`, `oos.json`, `oos.dat` and `oos.plt` in `dir`.
pub fn write_oos_report(report: &OosReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let header = ["n", "N", "manifold_error", "tube_error", "ratio", "wall_ms"];
    let mut w = csv::Writer::from_path(dir.join("oos.csv"))?;
    w.write_record(header)?;
    for r in &report.rows {
        w.serialize((r.n, r.n_terms, r.manifold_error, r.tube_error, r.ratio, r.wall_ms))?;
    }
    w.flush()?;
    write_json(&dir.join("oos.json"), report)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.n_terms.to_string(),
                r.manifold_error.to_string(),
                r.tube_error.to_string(),
                r.ratio.to_string(),
                r.wall_ms.to_string(),
            ]
        })
        .collect();
    write_dat(&dir.join("oos.dat"), &header, &rows)?;
    write_plt(&dir.join("oos.plt"), "out-of-sample study", "oos.dat", &[(3, "manifold"), (4, "tube")])
}

/// `quad.csv`, `quad.json`, `quad.dat` and `quad.plt` in `dir`.
pub fn write_quad_report(report: &QuadReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let k = report.test_functions.len();
    let mut header: Vec<String> = ["n", "N", "sup_error", "mean_error", "max_error"].map(String::from).to_vec();
    header.extend((0..k).map(|i| format!("g{i}")));
    let mut w = csv::Writer::from_path(dir.join("quad.csv"))?;
    w.write_record(&header)?;
    let mut rows = Vec::new();
    for r in &report.rows {
        let mut rec = vec![
            r.n.to_string(),
            r.n_terms.to_string(),
            r.sup_error.to_string(),
            r.mean_error.to_string(),
            r.max_error.to_string(),
        ];
        rec.extend(r.errors.iter().map(f64::to_string));
        w.write_record(&rec)?;
        rows.push(rec);
    }
    w.flush()?;
    write_json(&dir.join("quad.json"), report)?;
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_dat(&dir.join("quad.dat"), &header, &rows)?;
    write_plt(&dir.join("quad.plt"), "quadrature study", "quad.dat", &[(3, "network sup error"), (4, "mean integration error")])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = config(r#"{"experiment":"rate-study","kernel":{"kind":"absdot_power","gamma":0},
            "tau":{"builtin":"uniform-sphere","samples":500},"n_sweep":[0.5,1.0]}"#);
        assert_eq!((cfg.degree, cfg.draws, cfg.eval_grid_size, cfg.master_seed), (3, 32, 2000, 0));
        cfg.validate().unwrap();
        let bad = ExperimentConfig { n_sweep: vec![1.0, 1.0], ..cfg.clone() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { degree: 0, ..cfg.clone() };
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":"rate-study","kernel":{"kind":"absdot_power","gamma":0},
            "tau":{"builtin":"uniform-sphere"},"bogus":1}"#)
        .is_err());
    }

    #[test]
    fn builtins_resolve() {
        for (b, q, dim) in [("uniform-sphere", 2.0, 3), ("uniform-cube", 2.0, 2), ("circle-in-sphere", 1.0, 3), ("torus-in-cube", 2.0, 3)] {
            let cfg = config(&format!(
                r#"{{"experiment":"synth","kernel":{{"kind":"radial","phi":"exp_neg"}},"tau":{{"builtin":"{b}","samples":300}},"n":1}}"#
            ));
            let p = Problem::from_config(&cfg).unwrap();
            assert_eq!(p.q, q);
            assert_eq!(p.space.ambient_dim(), dim);
            assert_eq!(p.target.measure.len(), 300);
        }
        let relu_on_cube = config(
            r#"{"experiment":"synth","kernel":{"kind":"absdot_power","gamma":0},"tau":{"builtin":"uniform-cube","samples":30},"n":1}"#,
        );
        assert!(Problem::from_config(&relu_on_cube).is_err());
    }

    #[test]
    fn relu_sphere_predicted_exponent() {
        let cfg = config(
            r#"{"experiment":"rate-study","kernel":{"kind":"absdot_power","gamma":0},"tau":{"builtin":"uniform-sphere","samples":100},"n_sweep":[1]}"#,
        );
        assert_eq!(Problem::from_config(&cfg).unwrap().predicted_exponent(None), 1.25);
    }

    #[test]
    fn single_atom_study_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("atom.json");
        fs::write(&file, r#"{"space":{"kind":"sphere","q":2},"points":[[0,0,1]],"weights":[1]}"#).unwrap();
        let cfg = ExperimentConfig {
            tau: TauSource::File { file },
            n_sweep: vec![0.5, 1.0, 2.0, 4.0],
            draws: 2,
            eval_grid_size: 100,
            ..config(r#"{"experiment":"rate-study","kernel":{"kind":"absdot_power","gamma":0},"tau":{"builtin":"uniform-sphere"}}"#)
        };
        let report = run_rate_study(&cfg).unwrap();
        assert!(report.rows.iter().all(|r| r.sup_error < 1e-14 && r.n_terms == 1));
        assert_eq!(report.fit_status, FitStatus::Degenerate);
        assert!(report.fit.is_none());
    }

    #[test]
    fn loglog_fit_statuses() {
        assert_eq!(loglog_fit(&[(10.0, 0.0), (20.0, 0.0)]).0, FitStatus::Degenerate);
        assert_eq!(loglog_fit(&[(10.0, 0.1), (20.0, 0.05)]).0, FitStatus::Insufficient);
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&n: &f64| (n, n.powf(-1.5))).collect();
        let (s, f) = loglog_fit(&pts);
        assert_eq!(s, FitStatus::Ok);
        assert!((f.unwrap().slope + 1.5).abs() < 1e-12);
    }

    #[test]
    fn rate_csv_round_trip() {
        let rows = vec![
            RateRow { n: 0.5, n_terms: 12, sup_error: 0.1 + 0.2, l2_error: 1e-300, mc_error: 2.0 / 3.0, wall_ms: 5 },
            RateRow { n: 1.0, n_terms: 40, sup_error: std::f64::consts::PI, l2_error: 0.0, mc_error: 1.0, wall_ms: 0 },
        ];
        let text = rate_csv(&rows).unwrap();
        assert!(text.starts_with("n,N,sup_error,l2_error,mc_error,wall_ms\n"));
        assert_eq!(parse_rate_csv(&text).unwrap(), rows);
    }

    #[test]
    fn test_functions_have_unit_variation() {
        let grid = eval_grid(&SpaceDescriptor::sphere(2).unwrap(), 50, 0).unwrap();
        let fs = random_test_functions(&grid, 10, 3).unwrap();
        assert_eq!(fs.len(), 10);
        for g in &fs {
            assert!((crate::measures::total_variation(&g.nu) - 1.0).abs() < 1e-15);
        }
        assert_eq!(random_test_functions(&grid, 10, 3).unwrap(), fs);
    }

    #[test]
    fn integration_error_of_atom_matches_pointwise_error() {
        let space = SpaceDescriptor::sphere(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau = DiscreteMeasure::uniform(sampling::uniform_sphere(2, 300, &mut rng));
        let kernel = KernelSpec::absdot_power(0.0).unwrap();
        let target = TargetFunction::new(kernel.clone(), tau.clone());
        let grid = eval_grid(&space, 100, 0).unwrap();
        let cfg = SynthesisConfig { n: 1.0, degree: 2, draws: 2, eval_grid_size: 100, ..Default::default() };
        let (net, _) = synthesize_on_grid(&space, &target, &cfg, &grid).unwrap();
        let x1 = grid.point(7).to_vec();
        let g = TestFunction { nu: DiscreteMeasure::new(PointSet::new(vec![x1.clone()]).unwrap(), vec![1.0]).unwrap() };
        let pointwise = (target.eval(&x1) - net.eval(&x1)).abs();
        assert!((integration_error(&g, &kernel, &tau, &net) - pointwise).abs() < 1e-12);
    }

    #[test]
    fn reports_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            r#"{"experiment":"rate-study","kernel":{"kind":"absdot_power","gamma":0},"tau":{"builtin":"uniform-sphere","samples":400},
                "n_sweep":[0.5,0.7,1.0,1.4],"draws":2,"eval_grid_size":150,"master_seed":3}"#,
        );
        let report = run_rate_study(&cfg).unwrap();
        write_rate_report(&report, dir.path()).unwrap();
        let csv_text = fs::read_to_string(dir.path().join("rate.csv")).unwrap();
        assert_eq!(parse_rate_csv(&csv_text).unwrap(), report.rows);
        let back: RateReport = serde_json::from_str(&fs::read_to_string(dir.path().join("rate.json")).unwrap()).unwrap();
        assert_eq!(back, report);
        assert!(fs::read_to_string(dir.path().join("rate.plt")).unwrap().contains("rate.dat"));
        assert_eq!(fs::read_to_string(dir.path().join("rate.dat")).unwrap().lines().count(), 5);
        assert!(report.rows.windows(2).all(|w| w[0].n_terms <= w[1].n_terms));
    }

    #[test]
    fn oos_tube_shrinks_to_manifold() {
        let cfg = config(
            r#"{"experiment":"oos-study","kernel":{"kind":"radial","phi":"gaussian","sigma":0.5},"tau":{"builtin":"circle-in-sphere","samples":512},
                "n_sweep":[1,2],"draws":2,"eval_grid_size":200,"tube_delta":1e-9}"#,
        );
        let report = run_oos_study(&cfg).unwrap();
        for r in &report.rows {
            assert!((r.ratio - 1.0).abs() < 0.2, "ratio {}", r.ratio);
        }
        let p = Problem::from_config(&cfg).unwrap();
        assert!(run_oos_study(&ExperimentConfig { tube_delta: None, ..cfg.clone() }).is_err());
        assert!(p.tube_grid(0.1, 50, 0).unwrap().len() == 50);
    }
}

//! Assembly of sparse kernel networks from a target measure.
//!
//! The support of τ is partitioned at scale ε = 1/(2n). Every cell A is replaced by a
//! randomized moment-matching quadrature of τ|_A / τ(A), scaled back by τ(A). Draws
//! are repeated T times and the draw with the smallest sup error on the evaluation
//! grid wins. Signed measures are split into their Jordan parts, each part is
//! synthesized on its own, and the terms of the negative part enter with a minus sign.

use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{input, Error, Result};
use crate::geometry::{farthest_point_subset, separation, PointSet, SpaceDescriptor, SpaceKind};
use crate::kernels::{KernelSpec, TargetFunction};
use crate::measures::{jordan_decompose, total_variation, DiscreteMeasure};
use crate::partition::{build_partition, PartitionBuild, PartitionDiagnostics};
use crate::recombination::{caratheodory_reduce, randomized_reduce, PolynomialBasis};
use crate::sampling;

/// How every cell is replaced by a few weighted points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisMode {
    /// Unbiased randomized reduction, best of `draws`.
    #[default]
    Randomized,
    /// One deterministic reduction per cell; `draws` is ignored.
    Deterministic,
    /// i.i.d. sampling from |τ|/‖τ‖ with as many terms as the deterministic pipeline
    /// produces, best of `draws`.
    MonteCarloBaseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Resolution; the partition scale is ε = 1/(2n). Any positive real is accepted.
    pub n: f64,
    /// Moments of total degree below `degree` are matched on every cell.
    #[serde(rename = "R")]
    pub degree: usize,
    pub draws: usize,
    pub eval_grid_size: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: SynthesisMode,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { n: 2.0, degree: 3, draws: 32, eval_grid_size: 2000, master_seed: 0, mode: SynthesisMode::Randomized }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return input(format!("resolution n must be positive, got {}", self.n));
        }
        if self.degree == 0 || self.draws == 0 || self.eval_grid_size == 0 {
            return input("R, draws and eval_grid_size must all be at least 1");
        }
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        1.0 / (2.0 * self.n)
    }
}

/// One neuron a·G(·, y).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub a: f64,
    pub y: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    #[serde(serialize_with = "integral_as_int", deserialize_with = "real")]
    pub n: f64,
    #[serde(rename = "R")]
    pub degree: usize,
    pub seed: u64,
    pub draws: usize,
}

fn integral_as_int<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        s.serialize_i64(*v as i64)
    } else {
        s.serialize_f64(*v)
    }
}

fn real<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    f64::deserialize(d)
}

/// Σₖ aₖ G(·, yₖ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GNetwork {
    pub kernel: KernelSpec,
    pub space: SpaceDescriptor,
    pub terms: Vec<Term>,
    pub meta: NetworkMeta,
}

impl GNetwork {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value at one point, summed in term order.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.a * self.kernel.eval(x, &t.y)).sum()
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.a.abs()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Network values at every point.
pub fn evaluate_network(net: &GNetwork, points: &PointSet) -> Result<Vec<f64>> {
    if !net.terms.is_empty() && net.terms[0].y.len() != points.dim() {
        return input(format!("points have dimension {}, network {}", points.dim(), net.terms[0].y.len()));
    }
    if net.space.ambient_dim() != points.dim() {
        return input(format!("points have dimension {}, network space {}", points.dim(), net.space.ambient_dim()));
    }
    Ok((0..points.len()).into_par_iter().map(|i| net.eval(points.point(i))).collect())
}

/// max over the grid of |f − net|.
pub fn sup_error(net: &GNetwork, target: &TargetFunction, grid: &PointSet) -> Result<f64> {
    if grid.is_empty() {
        return input("empty grid");
    }
    let f = target.eval_grid(grid)?;
    let g = evaluate_network(net, grid)?;
    Ok(errors(&f, &g).0)
}

/// (sup, root-mean-square) of f − g.
fn errors(f: &[f64], g: &[f64]) -> (f64, f64) {
    let sup = f.iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sq: f64 = f.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
    (sup, (sq / f.len() as f64).sqrt())
}

/// N i.i.d. atoms from |τ|/‖τ‖_TV, each with coefficient sign(wᵢ)·‖τ‖_TV/N.
pub fn monte_carlo_baseline(space: &SpaceDescriptor, target: &TargetFunction, n_terms: usize, seed: u64) -> Result<GNetwork> {
    if n_terms == 0 {
        return input("baseline needs at least one term");
    }
    let m = &target.measure;
    let tv = total_variation(m);
    let abs: Vec<f64> = m.weights().iter().map(|w| w.abs()).collect();
    let dist = WeightedIndex::new(&abs).map_err(|e| Error::Input(format!("baseline weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = tv / n_terms as f64;
    let terms = (0..n_terms)
        .map(|_| {
            let i = dist.sample(&mut rng);
            Term { a: a.copysign(m.weights()[i]), y: m.points().point(i).to_vec() }
        })
        .collect();
    Ok(GNetwork {
        kernel: target.kernel.clone(),
        space: space.clone(),
        terms,
        meta: NetworkMeta { n: 0.0, degree: 0, seed, draws: 1 },
    })
}

/// 2·exp(−2t² / Σ(b−a)²) for independent zero-mean variables with ranges [a, b].
pub fn hoeffding_bound(ranges: &[(f64, f64)], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return input(format!("deviation t must be positive, got {t}"));
    }
    if ranges.iter().any(|&(a, b)| !(b >= a)) {
        return input("every range needs b >= a");
    }
    let s: f64 = ranges.iter().map(|&(a, b)| (b - a) * (b - a)).sum();
    Ok(if s == 0.0 { 0.0 } else { 2.0 * (-2.0 * t * t / s).exp() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub sup_error: f64,
    pub l2_error: f64,
    pub best_draw: usize,
    pub per_draw_sup: Vec<f64>,
    pub per_draw_l2: Vec<f64>,
    pub per_draw_terms: Vec<usize>,
    pub eps: f64,
    pub cells: usize,
    /// One entry per nonzero Jordan part (positive first).
    pub partitions: Vec<PartitionDiagnostics>,
    pub max_moment_residual: f64,
    pub grid_size: usize,
    /// Smallest distance between two grid points.
    pub grid_separation: f64,
    pub wall_ms: u64,
}

/// Deterministic 64-bit mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one cell in one draw; independent of the thread schedule.
pub fn cell_seed(master: u64, part: usize, draw: usize, cell: usize) -> u64 {
    [part as u64, draw as u64, cell as u64].iter().fold(splitmix64(master), |h, &k| splitmix64(h ^ splitmix64(k)))
}

pub(crate) fn derived_seed(master: u64, salt: u64) -> u64 {
    splitmix64(splitmix64(master) ^ salt)
}

/// Quasi-uniform grid of `size` points: farthest-point subset of a uniform sample
/// eight times larger (sphere, cube) or of the cloud itself.
pub fn eval_grid(space: &SpaceDescriptor, size: usize, seed: u64) -> Result<PointSet> {
    if size == 0 {
        return input("grid size must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, 0x6772_6964));
    let pool = match &space.kind {
        SpaceKind::Sphere { q } => sampling::uniform_sphere(*q, 8 * size, &mut rng),
        SpaceKind::Cube { q } => sampling::uniform_cube(*q, 8 * size, &mut rng),
        SpaceKind::PointCloud { points, .. } => points.clone(),
    };
    pool.subset(&farthest_point_subset(space, &pool, size, 0))
}

/// Discrete stand-in for μ*: a uniform sample of the sphere or cube (between 1024 and
/// 8192 points, about twice the support size), or the cloud itself.
pub fn reference_measure(space: &SpaceDescriptor, support_size: usize, seed: u64) -> DiscreteMeasure {
    let size = (2 * support_size).clamp(1024, 8192);
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, 0x7265_6600));
    let pts = match &space.kind {
        SpaceKind::Sphere { q } => sampling::uniform_sphere(*q, size, &mut rng),
        SpaceKind::Cube { q } => sampling::uniform_cube(*q, size, &mut rng),
        SpaceKind::PointCloud { points, .. } => points.clone(),
    };
    DiscreteMeasure::uniform(pts)
}

struct Part {
    sign: f64,
    measure: DiscreteMeasure,
    build: PartitionBuild,
    cells: Vec<Vec<usize>>,
    masses: Vec<f64>,
}

/// Synthesizes on [`eval_grid`] of the configured size.
pub fn synthesize(space: &SpaceDescriptor, target: &TargetFunction, cfg: &SynthesisConfig) -> Result<(GNetwork, SynthesisReport)> {
    cfg.validate()?;
    let grid = eval_grid(space, cfg.eval_grid_size, cfg.master_seed)?;
    synthesize_on_grid(space, target, cfg, &grid)
}

/// Full pipeline with a caller-supplied evaluation grid. The result depends only on
/// the inputs and the master seed, never on the number of worker threads.
pub fn synthesize_on_grid(
    space: &SpaceDescriptor,
    target: &TargetFunction,
    cfg: &SynthesisConfig,
    grid: &PointSet,
) -> Result<(GNetwork, SynthesisReport)> {
    let start = Instant::now();
    cfg.validate()?;
    target.validate(space)?;
    if grid.is_empty() || grid.dim() != space.ambient_dim() {
        return input("evaluation grid must be nonempty and match the space");
    }
    let tv = total_variation(&target.measure);
    if tv == 0.0 {
        return input("target measure is zero");
    }
    let eps = cfg.eps();
    let reference = reference_measure(space, target.measure.support().len(), cfg.master_seed);
    let (pos, neg) = jordan_decompose(&target.measure);
    let mut parts = Vec::new();
    for (sign, measure) in [(1.0, pos), (-1.0, neg)] {
        if measure.mass() == 0.0 {
            continue;
        }
        let build = build_partition(space, &measure, &reference, eps, cfg.master_seed)?;
        let cells = build.cell_support();
        let masses = build.cell_tau_masses();
        parts.push(Part { sign, measure, build, cells, masses });
    }

    let draws = match cfg.mode {
        SynthesisMode::Deterministic => 1,
        _ => cfg.draws,
    };
    let f = target.eval_grid(grid)?;

    let (draw_terms, max_residual): (Vec<Vec<Term>>, f64) = match cfg.mode {
        SynthesisMode::MonteCarloBaseline => {
            let (det, _) = reduce_all(space, &parts, cfg, 1, false)?;
            let n_terms = det[0].len();
            let nets: Result<Vec<Vec<Term>>> = (0..draws)
                .into_par_iter()
                .map(|t| Ok(monte_carlo_baseline(space, target, n_terms, cell_seed(cfg.master_seed, 2, t, 0))?.terms))
                .collect();
            (nets?, 0.0)
        }
        SynthesisMode::Deterministic => reduce_all(space, &parts, cfg, 1, false)?,
        SynthesisMode::Randomized => reduce_all(space, &parts, cfg, draws, true)?,
    };

    let mut per_draw_sup = Vec::with_capacity(draws);
    let mut per_draw_l2 = Vec::with_capacity(draws);
    let mut best = 0;
    let meta = NetworkMeta { n: cfg.n, degree: cfg.degree, seed: cfg.master_seed, draws };
    for (t, terms) in draw_terms.iter().enumerate() {
        let net = GNetwork { kernel: target.kernel.clone(), space: space.clone(), terms: terms.clone(), meta };
        let g = evaluate_network(&net, grid)?;
        let (sup, l2) = errors(&f, &g);
        if sup < per_draw_sup.get(best).copied().unwrap_or(f64::INFINITY) {
            best = t;
        }
        per_draw_sup.push(sup);
        per_draw_l2.push(l2);
    }
    let per_draw_terms = draw_terms.iter().map(Vec::len).collect();
    let terms = draw_terms.into_iter().nth(best).expect("at least one draw");
    let net = GNetwork { kernel: target.kernel.clone(), space: space.clone(), terms, meta };

    let partitions = parts.iter().map(|p| p.build.diagnostics(space)).collect();
    let report = SynthesisReport {
        n_terms: net.len(),
        sup_error: per_draw_sup[best],
        l2_error: per_draw_l2[best],
        best_draw: best,
        per_draw_sup,
        per_draw_l2,
        per_draw_terms,
        eps,
        cells: parts.iter().map(|p| p.cells.len()).sum(),
        partitions,
        max_moment_residual: max_residual,
        grid_size: grid.len(),
        grid_separation: separation(space, grid),
        wall_ms: start.elapsed().as_millis() as u64,
    };
    Ok((net, report))
}

/// Terms of every draw, and the largest moment residual over all reductions.
fn reduce_all(
    space: &SpaceDescriptor,
    parts: &[Part],
    cfg: &SynthesisConfig,
    draws: usize,
    randomized: bool,
) -> Result<(Vec<Vec<Term>>, f64)> {
    let base = PolynomialBasis::for_space(space, cfg.degree)?;
    let jobs: Vec<(usize, usize, usize)> = (0..draws)
        .flat_map(|t| parts.iter().enumerate().flat_map(move |(k, p)| (0..p.cells.len()).map(move |c| (t, k, c))))
        .collect();
    let results: Vec<Result<(Vec<Term>, f64)>> = jobs
        .par_iter()
        .map(|&(t, k, c)| {
            let part = &parts[k];
            let cell = part.measure.restrict(&part.cells[c])?;
            let mass = part.masses[c];
            let normalized = cell.scaled(1.0 / mass);
            let basis = base.clone().fitted_to(cell.points());
            let q = if randomized {
                randomized_reduce(&normalized, &basis, cell_seed(cfg.master_seed, k, t, c))
            } else {
                caratheodory_reduce(&normalized, &basis)
            }
            .map_err(|e| Error::Cell { cell: c, source: Box::new(e) })?;
            let terms = q
                .points()
                .iter()
                .zip(q.weights())
                .map(|(y, &b)| Term { a: part.sign * mass * b, y: y.to_vec() })
                .collect();
            Ok((terms, q.residual))
        })
        .collect();

    let mut out = vec![Vec::new(); draws];
    let mut max_residual: f64 = 0.0;
    for (&(t, _, _), r) in jobs.iter().zip(results) {
        let (terms, residual) = r?;
        out[t].extend(terms);
        max_residual = max_residual.max(residual);
    }
    Ok((out, max_residual))
}

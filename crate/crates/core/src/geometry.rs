//! Metric-space primitives: point sets, space descriptors, ε-nets, mesh norm,
//! separation, packing numbers and empirical dimension estimates.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::regression::fit_slope;

/// Tolerance on the unit norm of sphere points.
pub const SPHERE_NORM_TOL: f64 = 1e-12;

/// Relative slack when comparing a candidate's distance to ε during net construction,
/// so that points exactly ε apart on a grid are not lost to rounding.
pub const NET_REL_TOL: f64 = 1e-12;

/// A nonempty set of points of equal dimension, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return input("point set must be nonempty");
        };
        let dim = first.len();
        if dim == 0 {
            return input("points must have at least one coordinate");
        }
        let mut coords = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return input(format!("point {i} has dimension {}, expected {dim}", p.len()));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return input(format!("point {i} has a non-finite coordinate"));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { dim, coords })
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return input(format!(
                "flat buffer of length {} does not hold points of dimension {dim}",
                coords.len()
            ));
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return input("subset must be nonempty");
        }
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return input(format!("index {i} out of range for {} points", self.len()));
            }
            coords.extend_from_slice(self.point(i));
        }
        Ok(Self { dim: self.dim, coords })
    }

    /// Concatenation of two point sets of the same dimension.
    pub fn concat(&self, other: &PointSet) -> Result<Self> {
        if self.dim != other.dim {
            return input(format!("cannot join dimensions {} and {}", self.dim, other.dim));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self { dim: self.dim, coords })
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for PointSet {
    type Error = Error;

    fn try_from(points: Vec<Vec<f64>>) -> Result<Self> {
        PointSet::new(points)
    }
}

impl From<PointSet> for Vec<Vec<f64>> {
    fn from(p: PointSet) -> Self {
        p.to_vecs()
    }
}

/// Metric used on point-cloud spaces. Manifold distances are taken as the ambient
/// chord length; the graph-geodesic option is accepted and currently maps to the chord.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudMetric {
    #[default]
    Euclidean,
    GeodesicGraph,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpaceKind {
    /// Unit sphere S^Q ⊂ ℝ^{Q+1} with the geodesic metric.
    Sphere { q: usize },
    /// Cube [−1, 1]^Q with the Euclidean metric.
    Cube { q: usize },
    /// A sample of an embedded manifold; points of the ambient space are valid queries.
    PointCloud { points: PointSet, metric: CloudMetric },
}

/// A compact metric measure space together with its ball-measure constants
/// κ₁ δ^Q ≤ μ*(B(x, δ)) ≤ κ₂ δ^Q (0 < δ ≤ 1), when known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
}

impl SpaceDescriptor {
    /// S^Q with analytic constants for the normalized surface measure.
    pub fn sphere(q: usize) -> Result<Self> {
        if q == 0 {
            return input("sphere dimension Q must be at least 1");
        }
        let (k1, k2) = sphere_kappas(q);
        Ok(Self { kind: SpaceKind::Sphere { q }, kappa1: Some(k1), kappa2: Some(k2) })
    }

    /// [−1,1]^Q with analytic constants for the normalized Lebesgue measure.
    pub fn cube(q: usize) -> Result<Self> {
        if q == 0 {
            return input("cube dimension Q must be at least 1");
        }
        let v = unit_ball_volume(q);
        let k2 = v / 2f64.powi(q as i32);
        let k1 = v / 4f64.powi(q as i32);
        Ok(Self { kind: SpaceKind::Cube { q }, kappa1: Some(k1), kappa2: Some(k2) })
    }

    pub fn point_cloud(points: PointSet) -> Self {
        Self {
            kind: SpaceKind::PointCloud { points, metric: CloudMetric::Euclidean },
            kappa1: None,
            kappa2: None,
        }
    }

    /// Number of coordinates of a point of this space.
    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Sphere { q } => q + 1,
            SpaceKind::Cube { q } => *q,
            SpaceKind::PointCloud { points, .. } => points.dim(),
        }
    }

    /// The dimension parameter Q of the ambient space.
    pub fn dimension(&self) -> usize {
        match &self.kind {
            SpaceKind::Sphere { q } | SpaceKind::Cube { q } => *q,
            SpaceKind::PointCloud { points, .. } => points.dim(),
        }
    }

    pub fn kappas(&self) -> Option<(f64, f64)> {
        Some((self.kappa1?, self.kappa2?))
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, SpaceKind::Sphere { .. })
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        let d = self.ambient_dim();
        if x.len() != d {
            return input(format!("point has dimension {}, space expects {d}", x.len()));
        }
        if let SpaceKind::Sphere { .. } = self.kind {
            let norm = dot(x, x).sqrt();
            if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                return input(format!("sphere point has norm {norm}"));
            }
        }
        Ok(())
    }

    pub fn check_points(&self, points: &PointSet) -> Result<()> {
        points.iter().try_for_each(|p| self.check_point(p))
    }

    /// Distance without validation; both slices must have the ambient dimension.
    #[inline]
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            SpaceKind::Sphere { .. } => {
                let (mut diff, mut sum) = (0.0, 0.0);
                for (a, b) in x.iter().zip(y) {
                    diff += (a - b) * (a - b);
                    sum += (a + b) * (a + b);
                }
                2.0 * diff.sqrt().atan2(sum.sqrt())
            }
            _ => euclidean(x, y),
        }
    }

    pub fn diameter_bound(&self) -> f64 {
        match &self.kind {
            SpaceKind::Sphere { .. } => std::f64::consts::PI,
            SpaceKind::Cube { q } => 2.0 * (*q as f64).sqrt(),
            SpaceKind::PointCloud { .. } => f64::INFINITY,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SpaceShape {
    Sphere { q: usize },
    Cube { q: usize },
    PointCloud {
        points: PointSet,
        #[serde(default)]
        metric: CloudMetric,
    },
}

#[derive(Serialize, Deserialize)]
struct SpaceJson {
    #[serde(flatten)]
    shape: SpaceShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa2: Option<f64>,
}

impl TryFrom<SpaceJson> for SpaceDescriptor {
    type Error = Error;

    fn try_from(j: SpaceJson) -> Result<Self> {
        let mut space = match j.shape {
            SpaceShape::Sphere { q } => SpaceDescriptor::sphere(q)?,
            SpaceShape::Cube { q } => SpaceDescriptor::cube(q)?,
            SpaceShape::PointCloud { points, metric } => SpaceDescriptor {
                kind: SpaceKind::PointCloud { points, metric },
                kappa1: None,
                kappa2: None,
            },
        };
        if j.kappa1.is_some() {
            space.kappa1 = j.kappa1;
        }
        if j.kappa2.is_some() {
            space.kappa2 = j.kappa2;
        }
        for k in [space.kappa1, space.kappa2].into_iter().flatten() {
            if !(k > 0.0 && k.is_finite()) {
                return input(format!("ball-measure constant {k} must be positive"));
            }
        }
        if let Some((k1, k2)) = space.kappas() {
            if k1 > k2 {
                return input(format!("kappa1 = {k1} exceeds kappa2 = {k2}"));
            }
        }
        if let SpaceKind::PointCloud { points, .. } = &space.kind {
            if points.dim() == 0 {
                return input("point cloud must have positive dimension");
            }
        }
        Ok(space)
    }
}

impl From<SpaceDescriptor> for SpaceJson {
    fn from(s: SpaceDescriptor) -> Self {
        let shape = match s.kind {
            SpaceKind::Sphere { q } => SpaceShape::Sphere { q },
            SpaceKind::Cube { q } => SpaceShape::Cube { q },
            SpaceKind::PointCloud { points, metric } => SpaceShape::PointCloud { points, metric },
        };
        SpaceJson { shape, kappa1: s.kappa1, kappa2: s.kappa2 }
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Volume of the Euclidean unit ball in ℝ^q.
fn unit_ball_volume(q: usize) -> f64 {
    match q {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / q as f64 * unit_ball_volume(q - 2),
    }
}

/// Cap measure ratios on S^Q: μ*(B(x,δ))/δ^Q decreases in δ, so κ₂ is its limit at 0
/// and κ₁ its value at δ = 1.
fn sphere_kappas(q: usize) -> (f64, f64) {
    let power = (q - 1) as i32;
    let integrand = |t: f64| t.sin().powi(power);
    let total = simpson(integrand, 0.0, std::f64::consts::PI, 4096);
    let k2 = 1.0 / (q as f64 * total);
    let k1 = simpson(integrand, 0.0, 1.0, 4096) / total;
    (k1, k2)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Distance between two validated points.
pub fn distance(space: &SpaceDescriptor, x: &[f64], y: &[f64]) -> Result<f64> {
    space.check_point(x)?;
    space.check_point(y)?;
    Ok(space.dist(x, y))
}

/// Indices of an ε-distinguishable subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub centers: Vec<usize>,
    pub eps: f64,
}

impl Net {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Farthest-point insertion from `first`, stopping when `done(count, max_gap)` holds.
/// Ties on the farthest distance go to the lowest index.
fn farthest_point_insertion(
    space: &SpaceDescriptor,
    points: &PointSet,
    first: usize,
    mut done: impl FnMut(usize, f64) -> bool,
) -> Vec<usize> {
    let n = points.len();
    let mut centers = vec![first];
    let mut gap: Vec<f64> = (0..n).map(|i| space.dist(points.point(i), points.point(first))).collect();
    loop {
        let (far, far_gap) = gap
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        if done(centers.len(), far_gap) || far_gap <= 0.0 {
            return centers;
        }
        centers.push(far);
        let c = points.point(far);
        for (i, g) in gap.iter_mut().enumerate() {
            let d = space.dist(points.point(i), c);
            if d < *g {
                *g = d;
            }
        }
    }
}

/// Maximal ε-distinguishable subset of `points` built by farthest-point insertion.
/// The seed selects the first center (`seed mod |points|`); every returned pair of
/// centers is at least `eps·(1 − NET_REL_TOL)` apart and every point lies strictly
/// within `eps` of a center.
pub fn greedy_eps_net(space: &SpaceDescriptor, points: &PointSet, eps: f64, seed: u64) -> Result<Net> {
    if !(eps > 0.0) {
        return input(format!("eps must be positive, got {eps}"));
    }
    let first = (seed % points.len() as u64) as usize;
    let centers = farthest_point_insertion(space, points, first, |_, gap| gap < eps * (1.0 - NET_REL_TOL));
    Ok(Net { centers, eps })
}

/// `count` points (or all of them, if fewer) chosen by farthest-point insertion.
pub fn farthest_point_subset(space: &SpaceDescriptor, points: &PointSet, count: usize, first: usize) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    farthest_point_insertion(space, points, first % points.len(), |k, _| k >= count)
}

/// δ(C; K): the largest distance from a point of K to its nearest point of C.
pub fn mesh_norm(space: &SpaceDescriptor, centers: &PointSet, set: &PointSet) -> Result<f64> {
    if centers.dim() != set.dim() {
        return input("center and target sets differ in dimension");
    }
    Ok(set
        .iter()
        .map(|x| centers.iter().map(|c| space.dist(x, c)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

/// η(C): the minimal pairwise distance; +∞ for a single point.
pub fn separation(space: &SpaceDescriptor, centers: &PointSet) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            best = best.min(space.dist(centers.point(i), centers.point(j)));
        }
    }
    best
}

/// H_ε(A), realized as the size of a greedy maximal ε-distinguishable subset.
pub fn packing_number(space: &SpaceDescriptor, set: &PointSet, eps: f64) -> Result<usize> {
    Ok(greedy_eps_net(space, set, eps, 0)?.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub dimension: f64,
    pub intercept: f64,
}

/// Least-squares slope of log H_ε against log(1/ε).
pub fn dimension_estimate(space: &SpaceDescriptor, set: &PointSet, eps_grid: &[f64]) -> Result<DimensionFit> {
    if eps_grid.len() < 3 {
        return input("dimension estimate needs at least three scales");
    }
    let lo = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || hi < 10.0 * lo * (1.0 - 1e-12) {
        return input("scale grid must be positive and span at least one decade");
    }
    let pts = eps_grid
        .iter()
        .map(|&e| Ok(((1.0 / e).ln(), (packing_number(space, set, e)? as f64).ln())))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_slope(&pts)?;
    Ok(DimensionFit { dimension: fit.slope, intercept: fit.intercept })
}

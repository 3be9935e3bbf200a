//! Kernel families, their smoothness metadata, and predicted convergence rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::geometry::{dot, euclidean, PointSet, SpaceDescriptor, SpaceKind};
use crate::measures::DiscreteMeasure;
use crate::regression::fit_slope;
use crate::sampling;

/// Default rate parameter β for kernels whose large-set smoothness degrades.
pub const DEFAULT_BETA: f64 = 0.9;

/// Profile Φ of a radial kernel G(x, y) = Φ(|x − y|₂).
#[derive(Clone, Debug, PartialEq)]
pub enum RadialProfile {
    /// Φ(t) = e^{−t}.
    ExpNeg,
    /// Φ(t) = exp(−t² / (2σ²)).
    Gaussian { sigma: f64 },
    /// Linear interpolation through `(t, Φ(t))` knots, constant beyond the ends.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl RadialProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RadialProfile::ExpNeg => (-t).exp(),
            RadialProfile::Gaussian { sigma } => (-t * t / (2.0 * sigma * sigma)).exp(),
            RadialProfile::PiecewiseLinear { knots } => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|&(x, _)| x <= t);
                let ((x0, y0), (x1, y1)) = (knots[k - 1], knots[k]);
                y0 + (y1 - y0) * (t - x0) / (x1 - x0)
            }
        }
    }
}

/// A kernel G on the sphere (dot-product families) or on any Euclidean domain (radial).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelJson", into = "KernelJson")]
pub enum KernelSpec {
    /// G(x, y) = |x·y|^{2γ+1}.
    AbsdotPower { gamma: f64 },
    /// G(x, y) = (1 − x·y)^γ.
    OneminusdotPower { gamma: f64 },
    /// G(x, y) = Φ(|x − y|₂).
    Radial { phi: RadialProfile },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knots: Option<Vec<(f64, f64)>>,
}

impl TryFrom<KernelJson> for KernelSpec {
    type Error = crate::Error;

    fn try_from(j: KernelJson) -> Result<Self> {
        let need_gamma = || j.gamma.ok_or_else(|| crate::Error::Input(format!("kernel {} needs gamma", j.kind)));
        match j.kind.as_str() {
            "absdot_power" => Self::absdot_power(need_gamma()?),
            "oneminusdot_power" => Self::oneminusdot_power(need_gamma()?),
            "radial" => {
                let phi = match j.phi.as_deref() {
                    Some("exp_neg") => RadialProfile::ExpNeg,
                    Some("gaussian") => RadialProfile::Gaussian { sigma: j.sigma.unwrap_or(1.0) },
                    Some("piecewise_linear") => RadialProfile::PiecewiseLinear {
                        knots: j.knots.clone().ok_or_else(|| crate::Error::Input("piecewise_linear needs knots".into()))?,
                    },
                    other => return input(format!("unknown radial profile {other:?}")),
                };
                Self::radial(phi)
            }
            other => input(format!("unknown kernel kind {other:?}")),
        }
    }
}

impl From<KernelSpec> for KernelJson {
    fn from(k: KernelSpec) -> Self {
        let mut j = KernelJson { kind: String::new(), gamma: None, phi: None, sigma: None, knots: None };
        match k {
            KernelSpec::AbsdotPower { gamma } => {
                j.kind = "absdot_power".into();
                j.gamma = Some(gamma);
            }
            KernelSpec::OneminusdotPower { gamma } => {
                j.kind = "oneminusdot_power".into();
                j.gamma = Some(gamma);
            }
            KernelSpec::Radial { phi } => {
                j.kind = "radial".into();
                match phi {
                    RadialProfile::ExpNeg => j.phi = Some("exp_neg".into()),
                    RadialProfile::Gaussian { sigma } => {
                        j.phi = Some("gaussian".into());
                        j.sigma = Some(sigma);
                    }
                    RadialProfile::PiecewiseLinear { knots } => {
                        j.phi = Some("piecewise_linear".into());
                        j.knots = Some(knots);
                    }
                }
            }
        }
        j
    }
}

impl KernelSpec {
    /// Requires γ ≥ 0 and 2γ+1 not an even integer (otherwise the kernel is a polynomial).
    pub fn absdot_power(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return input(format!("absdot_power needs gamma >= 0, got {gamma}"));
        }
        let e = 2.0 * gamma + 1.0;
        if e.fract() == 0.0 && (e as u64).is_multiple_of(2) {
            return input(format!("absdot_power exponent 2*gamma+1 = {e} is an even integer"));
        }
        Ok(Self::AbsdotPower { gamma })
    }

    pub fn oneminusdot_power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return input(format!("oneminusdot_power needs gamma > 0, got {gamma}"));
        }
        Ok(Self::OneminusdotPower { gamma })
    }

    pub fn radial(phi: RadialProfile) -> Result<Self> {
        match &phi {
            RadialProfile::ExpNeg => {}
            RadialProfile::Gaussian { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return input(format!("gaussian sigma must be positive, got {sigma}"));
                }
            }
            RadialProfile::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return input("piecewise_linear needs at least one knot");
                }
                if knots.iter().any(|&(t, v)| !(t >= 0.0) || !t.is_finite() || !v.is_finite()) {
                    return input("piecewise_linear knots must be finite with t >= 0");
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return input("piecewise_linear knots must be strictly increasing in t");
                }
            }
        }
        Ok(Self::Radial { phi })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::radial(RadialProfile::Gaussian { sigma })
    }

    pub fn is_dot_product(&self) -> bool {
        !matches!(self, KernelSpec::Radial { .. })
    }

    /// Dot-product kernels need unit vectors; radial kernels accept any Euclidean domain.
    pub fn check_space(&self, space: &SpaceDescriptor) -> Result<()> {
        if !self.is_dot_product() {
            return Ok(());
        }
        match &space.kind {
            SpaceKind::Sphere { .. } => Ok(()),
            SpaceKind::PointCloud { points, .. } if points.iter().all(|p| (dot(p, p).sqrt() - 1.0).abs() <= 1e-9) => Ok(()),
            _ => input("dot-product kernels are defined on the unit sphere only"),
        }
    }

    /// G(x, y) without validation.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::AbsdotPower { gamma } => {
                let t = dot(x, y).abs().min(1.0);
                if *gamma == 0.0 {
                    t
                } else {
                    t.powf(2.0 * gamma + 1.0)
                }
            }
            KernelSpec::OneminusdotPower { gamma } => (1.0 - dot(x, y).clamp(-1.0, 1.0)).powf(*gamma),
            KernelSpec::Radial { phi } => phi.eval(euclidean(x, y)),
        }
    }

    /// Default smoothness metadata for intrinsic dimension `q` of the target measure.
    pub fn profile(&self, q: f64) -> SmoothnessProfile {
        match self {
            KernelSpec::AbsdotPower { gamma } => {
                let r = 2.0 * gamma + 1.0;
                let s = (q - 1.0).max(0.0);
                if gamma.fract() == 0.0 {
                    SmoothnessProfile { r, big_r: r + q, s, alpha: 1.0, family: FFamily::Constant, beta: 1.0 }
                } else {
                    SmoothnessProfile::power(r, s, 1.0, r, q)
                }
            }
            KernelSpec::OneminusdotPower { gamma } => {
                let r = 2.0 * gamma;
                SmoothnessProfile::power(r, 0.0, gamma.min(1.0), r, q)
            }
            KernelSpec::Radial { phi: RadialProfile::ExpNeg } => SmoothnessProfile::power(1.0, 0.0, 1.0, 1.0, q),
            KernelSpec::Radial { phi: RadialProfile::Gaussian { .. } } => SmoothnessProfile {
                r: 2.0 * q,
                big_r: 2.0 * q,
                s: q,
                alpha: 1.0,
                family: FFamily::Constant,
                beta: 1.0,
            },
            KernelSpec::Radial { phi: RadialProfile::PiecewiseLinear { .. } } => SmoothnessProfile {
                r: 1.0,
                big_r: 1.0 + q,
                s: (q - 1.0).max(0.0),
                alpha: 1.0,
                family: FFamily::Constant,
                beta: 1.0,
            },
        }
    }
}

/// G(x, y) after checking both points against the kernel's domain.
pub fn kernel_eval(k: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return input(format!("points of dimension {} and {}", x.len(), y.len()));
    }
    if k.is_dot_product() {
        for p in [x, y] {
            let norm = dot(p, p).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return input(format!("dot-product kernel needs unit vectors, got norm {norm}"));
            }
        }
    }
    Ok(k.eval(x, y))
}

/// Growth of the large-set derivative bound: F(δ) = c or F(δ) = c·δ^{Γ−R}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FFamily {
    Constant,
    Power { gamma: f64 },
}

/// Smoothness orders of a kernel class together with the chosen rate parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Dimension of the exceptional set.
    pub s: f64,
    pub alpha: f64,
    pub family: FFamily,
    pub beta: f64,
}

impl SmoothnessProfile {
    /// Power-family profile with β = [`DEFAULT_BETA`] and the smallest integer R above
    /// `Γ + β(q−s)/(2−2β)`, which makes ε*ₙ decay at least like n^{−β}.
    pub fn power(r: f64, s: f64, alpha: f64, big_gamma: f64, q: f64) -> Self {
        let beta = DEFAULT_BETA;
        let big_r = (big_gamma + beta * (q - s) / (2.0 - 2.0 * beta)).floor() + 1.0;
        Self { r, big_r: big_r.max(r), s, alpha, family: FFamily::Power { gamma: big_gamma }, beta }
    }

    pub fn validate(&self, q: f64) -> Result<()> {
        if !(self.r > 0.0 && self.big_r >= self.r) {
            return input(format!("need R >= r > 0, got r = {}, R = {}", self.r, self.big_r));
        }
        if !(0.0..=q).contains(&self.s) {
            return input(format!("exceptional dimension s = {} outside [0, {q}]", self.s));
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0 && self.beta <= 1.0) {
            return input("need alpha > 0 and beta in (0, 1]");
        }
        Ok(())
    }

    /// Decay exponent of the power branch of ε*ₙ, `2(R−r)/(q−s+2R−2Γ)`.
    fn power_decay(&self, q: f64) -> Option<f64> {
        match self.family {
            FFamily::Constant => None,
            FFamily::Power { gamma } => {
                let den = q - self.s + 2.0 * self.big_r - 2.0 * gamma;
                Some(if den > 0.0 { (2.0 * (self.big_r - self.r) / den).max(0.0) } else { 0.0 })
            }
        }
    }

    /// β as it enters the rate: 1 whenever ε*ₙ = 1/n.
    pub fn effective_beta(&self, q: f64) -> f64 {
        match self.power_decay(q) {
            None => 1.0,
            Some(d) if d >= 1.0 => 1.0,
            Some(_) => self.beta,
        }
    }
}

/// E = 1/2 + r/q + β(q−s)/(2q): the error decays like (log N)^{1/2} N^{−E}.
pub fn predicted_exponent(profile: &SmoothnessProfile, q: f64) -> f64 {
    0.5 + profile.r / q + profile.effective_beta(q) * (q - profile.s) / (2.0 * q)
}

/// ε*ₙ = max(1/n, n^{−2(R−r)/(q−s+2R−2Γ)}), reducing to 1/n for constant F.
pub fn epsilon_star(n: f64, profile: &SmoothnessProfile, q: f64) -> f64 {
    match profile.power_decay(q) {
        None => 1.0 / n,
        Some(d) => (1.0 / n).max(n.powf(-d)),
    }
}

/// f(x) = ∫ G(x, y) dτ(y) for a discrete τ.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetFunction {
    pub kernel: KernelSpec,
    pub measure: DiscreteMeasure,
}

impl TargetFunction {
    pub fn new(kernel: KernelSpec, measure: DiscreteMeasure) -> Self {
        Self { kernel, measure }
    }

    pub fn validate(&self, space: &SpaceDescriptor) -> Result<()> {
        self.kernel.check_space(space)?;
        space.check_points(self.measure.points())
    }

    /// Σᵢ wᵢ G(x, yᵢ) in support order.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.measure
            .points()
            .iter()
            .zip(self.measure.weights())
            .map(|(y, &w)| w * self.kernel.eval(x, y))
            .sum()
    }

    /// Values on every grid point; each value is summed sequentially, so results do
    /// not depend on the thread count.
    pub fn eval_grid(&self, grid: &PointSet) -> Result<Vec<f64>> {
        if grid.dim() != self.measure.points().dim() {
            return input(format!("grid dimension {} differs from measure dimension {}", grid.dim(), self.measure.points().dim()));
        }
        Ok((0..grid.len()).into_par_iter().map(|i| self.eval(grid.point(i))).collect())
    }
}

pub fn target_eval(t: &TargetFunction, x: &[f64]) -> Result<f64> {
    if x.len() != t.measure.points().dim() {
        return input(format!("point dimension {} differs from measure dimension {}", x.len(), t.measure.points().dim()));
    }
    Ok(t.eval(x))
}

/// Fitted modulus |G(x,·) − G(x′,·)|∞ ≈ C ρ(x, x′)^α.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// `None` when the kernel is constant in x at the probed scales.
    pub alpha: Option<f64>,
    pub constant: Option<f64>,
    pub pairs: usize,
}

/// Probes pairs at distances log-uniform in [1e−3, 0.3] (sphere, cube) or random
/// cloud pairs, taking the sup over a 256-point sample of the second argument.
pub fn holder_estimate(k: &KernelSpec, space: &SpaceDescriptor, probe_count: usize, seed: u64) -> Result<HolderFit> {
    if probe_count < 100 {
        return input(format!("holder_estimate needs at least 100 probes, got {probe_count}"));
    }
    k.check_space(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = match &space.kind {
        SpaceKind::Sphere { q } => sampling::uniform_sphere(*q, 256, &mut rng),
        SpaceKind::Cube { q } => sampling::uniform_cube(*q, 256, &mut rng),
        SpaceKind::PointCloud { points, .. } => points.clone(),
    };
    let d = space.ambient_dim();
    let mut pairs = Vec::with_capacity(probe_count);
    for _ in 0..probe_count {
        let t = 10f64.powf(rng.random_range(-3.0..(0.3f64).log10()));
        let (x, y) = match &space.kind {
            SpaceKind::Sphere { q } => {
                let x = sampling::uniform_sphere(*q, 1, &mut rng).point(0).to_vec();
                let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let c = dot(&u, &x);
                u.iter_mut().zip(&x).for_each(|(a, b)| *a -= c * b);
                let norm = dot(&u, &u).sqrt();
                let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| t.cos() * a + t.sin() * b / norm).collect();
                (x, y)
            }
            SpaceKind::Cube { q } => loop {
                let x = sampling::uniform_cube(*q, 1, &mut rng).point(0).to_vec();
                let u = sampling::ball_offset(d, 1.0, &mut rng);
                let norm = dot(&u, &u).sqrt();
                let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + t * b / norm).collect();
                if y.iter().all(|c| c.abs() <= 1.0) {
                    break (x, y);
                }
            },
            SpaceKind::PointCloud { points, .. } => {
                let i = rng.random_range(0..points.len());
                let j = rng.random_range(0..points.len());
                (points.point(i).to_vec(), points.point(j).to_vec())
            }
        };
        let rho = space.dist(&x, &y);
        if rho <= 0.0 {
            continue;
        }
        let diff = grid.iter().map(|g| (k.eval(&x, g) - k.eval(&y, g)).abs()).fold(0.0, f64::max);
        pairs.push((rho, diff));
    }
    let samples: Vec<(f64, f64)> = pairs.iter().filter(|p| p.1 > 1e-14).map(|&(r, v)| (r.ln(), v.ln())).collect();
    if samples.len() < pairs.len() / 2 || samples.len() < 2 {
        return Ok(HolderFit { alpha: None, constant: None, pairs: pairs.len() });
    }
    let fit = fit_slope(&samples)?;
    Ok(HolderFit { alpha: Some(fit.slope), constant: Some(fit.intercept.exp()), pairs: pairs.len() })
}

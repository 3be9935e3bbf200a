//! Signed discrete measures: total variation, Jordan decomposition, ball masses and
//! q-admissibility diagnostics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::geometry::{PointSet, SpaceDescriptor};
use crate::regression::fit_slope;

/// Weighted point set. Weights may be negative; the support is the set of points
/// with a nonzero weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: PointSet,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: PointSet, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return input(format!("{} points but {} weights", points.len(), weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return input("weights must be finite");
        }
        Ok(Self { points, weights })
    }

    /// Probability measure with equal weights 1/n.
    pub fn uniform(points: PointSet) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Self { points, weights }
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices of points carrying nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] != 0.0).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// Signed total mass Σ wᵢ.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Restriction to the given indices (in that order).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let points = self.points.subset(indices)?;
        let weights = indices.iter().map(|&i| self.weights[i]).collect();
        Ok(Self { points, weights })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { points: self.points.clone(), weights: self.weights.iter().map(|w| w * factor).collect() }
    }

    /// Division by the total variation.
    pub fn normalized(&self) -> Result<Self> {
        let tv = total_variation(self);
        if tv <= 0.0 {
            return input("cannot normalize a measure with zero total variation");
        }
        Ok(Self { points: self.points.clone(), weights: self.weights.iter().map(|w| w / tv).collect() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(SpaceDescriptor, Self)> {
        let text = std::fs::read_to_string(path)?;
        let file: MeasureFile = serde_json::from_str(&text)?;
        file.into_parts()
    }
}

/// `{"space": {...}, "points": [[...], ...], "weights": [...]}`; weights default to 1/n.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureFile {
    pub space: SpaceDescriptor,
    pub points: PointSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MeasureFile {
    pub fn into_parts(self) -> Result<(SpaceDescriptor, DiscreteMeasure)> {
        self.space.check_points(&self.points)?;
        let measure = match self.weights {
            Some(w) => DiscreteMeasure::new(self.points, w)?,
            None => DiscreteMeasure::uniform(self.points),
        };
        Ok((self.space, measure))
    }
}

/// ‖m‖_TV = Σ|wᵢ|, summed as (positive parts) + (negative parts), each in index
/// order, so that the Jordan parts add up to it bit for bit.
pub fn total_variation(m: &DiscreteMeasure) -> f64 {
    let pos: f64 = m.weights.iter().map(|&w| w.max(0.0)).sum();
    let neg: f64 = m.weights.iter().map(|&w| (-w).max(0.0)).sum();
    pos + neg
}

/// (m⁺, m⁻) on the same points with m = m⁺ − m⁻.
pub fn jordan_decompose(m: &DiscreteMeasure) -> (DiscreteMeasure, DiscreteMeasure) {
    let pos = m.weights.iter().map(|&w| w.max(0.0)).collect();
    let neg = m.weights.iter().map(|&w| (-w).max(0.0)).collect();
    (
        DiscreteMeasure { points: m.points.clone(), weights: pos },
        DiscreteMeasure { points: m.points.clone(), weights: neg },
    )
}

/// |m|(B(x, δ)).
pub fn ball_mass(space: &SpaceDescriptor, m: &DiscreteMeasure, x: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return input(format!("ball radius must be positive, got {delta}"));
    }
    space.check_point(x)?;
    Ok(ball_mass_unchecked(space, m, x, delta))
}

pub(crate) fn ball_mass_unchecked(space: &SpaceDescriptor, m: &DiscreteMeasure, x: &[f64], delta: f64) -> f64 {
    m.points
        .iter()
        .zip(&m.weights)
        .filter(|(p, _)| space.dist(x, p) <= delta)
        .map(|(_, w)| w.abs())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Fitted exponent q̂ of |m|(B(x, δ)) ≈ ĉ δ^q̂ ‖m‖_TV.
    pub exponent: f64,
    pub constant: f64,
    /// max over probes and radii of |m|(B(x, δ)) / (δ^q̂ ‖m‖_TV).
    pub max_ratio: f64,
}

/// Regresses log ball mass on log δ over `probes` support points spread evenly in
/// index order. Diagnostic only: nothing downstream is gated on the result.
pub fn admissibility_check(
    space: &SpaceDescriptor,
    m: &DiscreteMeasure,
    probes: usize,
    delta_grid: &[f64],
) -> Result<AdmissibilityReport> {
    let support = m.support();
    if support.is_empty() {
        return input("measure has empty support");
    }
    if probes == 0 {
        return input("need at least one probe");
    }
    let lo = delta_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = delta_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if delta_grid.len() < 2 || !(lo > 0.0) || hi < 10.0 * lo * (1.0 - 1e-12) {
        return input("radius grid must be positive and span at least one decade");
    }
    let tv = total_variation(m);
    let count = probes.min(support.len());
    let centers: Vec<usize> = (0..count).map(|k| support[k * support.len() / count]).collect();

    let mut samples = Vec::with_capacity(count * delta_grid.len());
    for &c in &centers {
        let x = m.points.point(c);
        for &d in delta_grid {
            let mass = ball_mass_unchecked(space, m, x, d);
            // Centers are support points, so every ball has positive mass.
            samples.push((d, mass));
        }
    }
    let logs: Vec<(f64, f64)> = samples.iter().map(|&(d, mass)| (d.ln(), (mass / tv).ln())).collect();
    let fit = fit_slope(&logs)?;
    let max_ratio = samples
        .iter()
        .map(|&(d, mass)| mass / (d.powf(fit.slope) * tv))
        .fold(0.0, f64::max);
    Ok(AdmissibilityReport { exponent: fit.slope, constant: fit.intercept.exp(), max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn line(weights: Vec<f64>) -> DiscreteMeasure {
        let pts = (0..weights.len()).map(|i| vec![i as f64 / 10.0]).collect();
        DiscreteMeasure::new(PointSet::new(pts).unwrap(), weights).unwrap()
    }

    fn circle_measure(n: usize) -> (SpaceDescriptor, DiscreteMeasure) {
        let pts = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        (SpaceDescriptor::sphere(1).unwrap(), DiscreteMeasure::uniform(PointSet::new(pts).unwrap()))
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&line(vec![1.0, -0.5])), 1.5);
        assert_eq!(total_variation(&line(vec![0.0, 0.0])), 0.0);
        assert!((total_variation(&line(vec![0.25; 4])) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jordan_examples() {
        let m = line(vec![0.3, 0.7]);
        let (p, n) = jordan_decompose(&m);
        assert_eq!(p, m);
        assert_eq!(total_variation(&n), 0.0);
        let (p, n) = jordan_decompose(&line(vec![1.0, -1.0]));
        assert_eq!(p.weights(), &[1.0, 0.0]);
        assert_eq!(n.weights(), &[0.0, 1.0]);
    }

    #[test]
    fn ball_mass_limits() {
        let (s, m) = circle_measure(400);
        let x = m.points().point(0).to_vec();
        assert!((ball_mass(&s, &m, &x, 4.0).unwrap() - total_variation(&m)).abs() < 1e-12);
        let spacing = 2.0 * PI / 400.0;
        assert!((ball_mass(&s, &m, &x, 0.4 * spacing).unwrap() - 1.0 / 400.0).abs() < 1e-15);
        let lonely = line(vec![1.0, 1.0]);
        let c = SpaceDescriptor::cube(1).unwrap();
        assert_eq!(ball_mass(&c, &lonely, &[0.05], 0.01).unwrap(), 0.0);
        assert!(ball_mass(&c, &lonely, &[0.05], 0.0).is_err());
    }

    #[test]
    fn quarter_arc_mass() {
        // Arc-length oracle: B(x, π/4) on the circle is a quarter arc.
        let (s, m) = circle_measure(4096);
        let x = m.points().point(123).to_vec();
        let mass = ball_mass(&s, &m, &x, PI / 4.0).unwrap();
        let count = (0..4096)
            .filter(|&k| {
                let d = ((k as i64 - 123).rem_euclid(4096)) as f64 * 2.0 * PI / 4096.0;
                d.min(2.0 * PI - d) <= PI / 4.0 + 1e-12
            })
            .count();
        assert!((mass - count as f64 / 4096.0).abs() < 1e-12);
        assert!((mass - 0.25).abs() < 2.0 / 4096.0);
    }

    #[test]
    fn admissibility_of_uniform_samples() {
        let (s, m) = circle_measure(4096);
        let grid = [0.02, 0.05, 0.1, 0.2, 0.4];
        let r = admissibility_check(&s, &m, 64, &grid).unwrap();
        assert!((0.8..=1.2).contains(&r.exponent), "{r:?}");
        assert!(r.constant > 0.0);

        let sphere = SpaceDescriptor::sphere(2).unwrap();
        let pts = sampling::uniform_sphere(2, 8000, &mut ChaCha8Rng::seed_from_u64(1));
        let m2 = DiscreteMeasure::uniform(pts);
        let r2 = admissibility_check(&sphere, &m2, 64, &[0.05, 0.1, 0.2, 0.5]).unwrap();
        assert!((1.7..=2.3).contains(&r2.exponent), "{r2:?}");

        let atom = DiscreteMeasure::uniform(PointSet::new(vec![vec![0.0, 0.0, 1.0]]).unwrap());
        let r3 = admissibility_check(&sphere, &atom, 4, &grid).unwrap();
        assert!(r3.exponent.abs() < 1e-12);

        let zero = DiscreteMeasure::new(PointSet::new(vec![vec![0.0, 0.0, 1.0]]).unwrap(), vec![0.0]).unwrap();
        assert!(admissibility_check(&sphere, &zero, 4, &grid).is_err());
    }

    #[test]
    fn measure_file_defaults_to_uniform() {
        let js = r#"{"space": {"kind": "cube", "q": 2}, "points": [[0.0, 0.5], [1.0, -1.0]]}"#;
        let f: MeasureFile = serde_json::from_str(js).unwrap();
        let (space, m) = f.into_parts().unwrap();
        assert_eq!(space.ambient_dim(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        let bad = r#"{"space": {"kind": "sphere", "q": 2}, "points": [[0.0, 0.5, 0.1]]}"#;
        let f: MeasureFile = serde_json::from_str(bad).unwrap();
        assert!(f.into_parts().is_err());
    }

    proptest! {
        #[test]
        fn jordan_parts_add_up(ws in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let m = line(ws.clone());
            let (p, n) = jordan_decompose(&m);
            prop_assert_eq!(total_variation(&p) + total_variation(&n), total_variation(&m));
            for ((&a, &b), &w) in p.weights().iter().zip(n.weights()).zip(&ws) {
                prop_assert_eq!(a - b, w);
                prop_assert!(a >= 0.0 && b >= 0.0);
            }
        }

        #[test]
        fn ball_mass_monotone(ws in prop::collection::vec(-1.0f64..1.0, 2..30), d1 in 0.01f64..2.0, d2 in 0.01f64..2.0) {
            let m = line(ws);
            let c = SpaceDescriptor::cube(1).unwrap();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(ball_mass(&c, &m, &[0.7], lo).unwrap() <= ball_mass(&c, &m, &[0.7], hi).unwrap());
        }

        #[test]
        fn normalization_has_unit_mass(ws in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            let m = line(ws);
            prop_assume!(total_variation(&m) > 0.0);
            prop_assert!((total_variation(&m.normalized().unwrap()) - 1.0).abs() <= 1e-14);
        }
    }
}

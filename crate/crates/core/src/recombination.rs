//! Moment-matching quadrature by Carathéodory-style recombination.
//!
//! Given a nonnegative discrete measure and a polynomial space of total degree
//! below `R`, the reduction walks along null vectors of the moment matrix until
//! the support is no larger than `rank + 1`. Every step keeps all moments fixed
//! and all weights nonnegative.
//!
//! The randomized variant picks between the two admissible stopping steps with
//! probabilities that make each step a martingale increment, so the expected
//! output weights equal the input weights. It stands in for a draw from a
//! barycentric measure over few-point quadratures.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};
use crate::geometry::{PointSet, SpaceDescriptor};
use crate::measures::DiscreteMeasure;

/// Relative singular-value cutoff for the numerical rank of a moment matrix.
pub const RANK_TOL: f64 = 1e-10;
/// Maximum relative moment mismatch accepted from a reduction.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Negative weights above `-CLAMP_TOL * mass` after a step are rounding and get clamped.
const CLAMP_TOL: f64 = 1e-12;

/// Monomials of total degree `< degree` in `dim` variables, in graded lexicographic
/// order, evaluated at `(x - center) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialBasis {
    degree: usize,
    dim: usize,
    exponents: Vec<Vec<u32>>,
    center: Vec<f64>,
    scale: f64,
}

impl PolynomialBasis {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if degree == 0 {
            return input("polynomial degree bound R must be at least 1");
        }
        if dim == 0 {
            return input("polynomial basis needs at least one variable");
        }
        let mut exponents = Vec::new();
        for total in 0..degree as u32 {
            let mut current = vec![0; dim];
            push_graded(&mut exponents, &mut current, 0, total);
        }
        Ok(Self { degree, dim, exponents, center: vec![0.0; dim], scale: 1.0 })
    }

    /// Basis in the ambient coordinates of `space`.
    pub fn for_space(space: &SpaceDescriptor, degree: usize) -> Result<Self> {
        Self::new(space.ambient_dim(), degree)
    }

    /// Same polynomial space, evaluated after shifting to the centroid of `points` and
    /// dividing by their largest distance from it.
    pub fn fitted_to(mut self, points: &PointSet) -> Self {
        let n = points.len() as f64;
        let mut center = vec![0.0; self.dim];
        for p in points.iter() {
            center.iter_mut().zip(p).for_each(|(c, x)| *c += x / n);
        }
        let radius = points
            .iter()
            .map(|p| p.iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        self.center = center;
        self.scale = if radius > 0.0 { radius } else { 1.0 };
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// D_R, the number of monomials.
    pub fn size(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn affine(&self) -> (&[f64], f64) {
        (&self.center, self.scale)
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(x, c)| (x - c) / self.scale).collect();
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e.iter().zip(&u).map(|(&k, &v)| v.powi(k as i32)).product();
        }
    }

    pub fn eval_point(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.eval_into(x, &mut out);
        out
    }

    /// Σᵢ wᵢ ψⱼ(xᵢ) for every basis function, summed in point order.
    pub fn moments(&self, m: &DiscreteMeasure) -> Vec<f64> {
        let mut acc = vec![0.0; self.size()];
        let mut row = vec![0.0; self.size()];
        for (p, &w) in m.points().iter().zip(m.weights()) {
            self.eval_into(p, &mut row);
            acc.iter_mut().zip(&row).for_each(|(a, r)| *a += w * r);
        }
        acc
    }
}

fn push_graded(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        push_graded(out, current, pos + 1, remaining - k);
    }
    current[pos] = 0;
}

/// D_R × n matrix with entry (j, i) = ψⱼ(xᵢ). Row 0 is the constant 1.
pub fn basis_eval(basis: &PolynomialBasis, points: &PointSet) -> Result<DMatrix<f64>> {
    if points.dim() != basis.dim {
        return input(format!("points have dimension {}, basis expects {}", points.dim(), basis.dim));
    }
    let mut m = DMatrix::zeros(basis.size(), points.len());
    let mut row = vec![0.0; basis.size()];
    for (i, p) in points.iter().enumerate() {
        basis.eval_into(p, &mut row);
        m.column_mut(i).copy_from_slice(&row);
    }
    Ok(m)
}

/// Number of singular values above `RANK_TOL` times the largest.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// A nonnegative few-point measure with the moments of its source measure.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureMeasure {
    pub measure: DiscreteMeasure,
    /// Index of every output point in the input measure.
    pub source: Vec<usize>,
    pub basis: PolynomialBasis,
    /// Numerical rank of the moment matrix on the input support.
    pub rank: usize,
    /// Max relative moment mismatch against the input.
    pub residual: f64,
    /// Steps whose null vector allowed movement in one direction only.
    pub one_sided_steps: usize,
}

impl QuadratureMeasure {
    pub fn points(&self) -> &PointSet {
        self.measure.points()
    }

    pub fn weights(&self) -> &[f64] {
        self.measure.weights()
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

/// max_j |Σ_q ψⱼ − Σ_m ψⱼ| / (1 + |Σ_m ψⱼ|).
pub fn moment_residual(q: &DiscreteMeasure, m: &DiscreteMeasure, basis: &PolynomialBasis) -> f64 {
    let a = basis.moments(q);
    let b = basis.moments(m);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
}

/// Deterministic reduction to at most `rank + 1` points (Tchakaloff's theorem).
pub fn caratheodory_reduce(m: &DiscreteMeasure, basis: &PolynomialBasis) -> Result<QuadratureMeasure> {
    reduce(m, basis, None)
}

/// Randomized reduction whose expected output weights equal the input weights.
/// Identical `(m, basis, seed)` give identical output.
pub fn randomized_reduce(m: &DiscreteMeasure, basis: &PolynomialBasis, seed: u64) -> Result<QuadratureMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reduce(m, basis, Some(&mut rng))
}

/// Unit vector spanning the smallest right singular direction of `sub`.
fn null_vector(sub: &DMatrix<f64>) -> DVector<f64> {
    let (rows, cols) = sub.shape();
    let square = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(sub);
        padded
    } else {
        sub.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    v_t.row(idx).transpose()
}

fn reduce(m: &DiscreteMeasure, basis: &PolynomialBasis, mut rng: Option<&mut ChaCha8Rng>) -> Result<QuadratureMeasure> {
    if !m.is_nonnegative() {
        return input("reduction needs a nonnegative measure");
    }
    let support = m.support();
    if support.is_empty() {
        return input("reduction needs a nonzero measure");
    }
    let source_measure = m.restrict(&support)?;
    let psi = basis_eval(basis, source_measure.points())?;
    let rank = numerical_rank(&psi);
    let mut w: Vec<f64> = source_measure.weights().to_vec();
    let mass: f64 = w.iter().sum();
    let mut active: Vec<usize> = (0..w.len()).collect();
    let mut one_sided_steps = 0;

    while active.len() > rank + 1 {
        let window: Vec<usize> = active[..rank + 2].to_vec();
        let v = null_vector(&psi.select_columns(window.iter()));

        // Largest steps t > 0 along +v and -v that keep every weight nonnegative.
        let (mut up, mut up_hit) = (f64::INFINITY, usize::MAX);
        let (mut down, mut down_hit) = (f64::INFINITY, usize::MAX);
        for (j, &i) in window.iter().enumerate() {
            let vj = v[j];
            if vj < 0.0 {
                let t = w[i] / -vj;
                if t < up {
                    (up, up_hit) = (t, j);
                }
            } else if vj > 0.0 {
                let t = w[i] / vj;
                if t < down {
                    (down, down_hit) = (t, j);
                }
            }
        }
        let (step, hit) = match (up.is_finite(), down.is_finite()) {
            (true, true) => match rng.as_deref_mut() {
                Some(rng) => {
                    if rng.random::<f64>() < down / (up + down) {
                        (up, up_hit)
                    } else {
                        (-down, down_hit)
                    }
                }
                None => (up, up_hit),
            },
            (true, false) => {
                one_sided_steps += 1;
                (up, up_hit)
            }
            (false, true) => {
                one_sided_steps += 1;
                (-down, down_hit)
            }
            (false, false) => {
                return Err(Error::Reduction(format!(
                    "null vector has no finite stopping step ({} active points, rank {rank})",
                    active.len()
                )))
            }
        };

        for (j, &i) in window.iter().enumerate() {
            w[i] += step * v[j];
        }
        w[window[hit]] = 0.0;
        for &i in &window {
            if w[i] < 0.0 {
                if w[i] < -CLAMP_TOL * mass {
                    return Err(Error::Reduction(format!("weight {} went negative by {}", i, w[i])));
                }
                w[i] = 0.0;
            }
        }
        active.retain(|&i| w[i] > 0.0);
    }

    let source: Vec<usize> = active.iter().map(|&i| support[i]).collect();
    let weights: Vec<f64> = active.iter().map(|&i| w[i]).collect();
    let measure = DiscreteMeasure::new(m.points().subset(&source)?, weights)?;
    let residual = moment_residual(&measure, m, basis);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::Reduction(format!(
            "moment residual {residual:e} exceeds {RESIDUAL_TOL:e} (rank {rank}, {} points)",
            source.len()
        )));
    }
    Ok(QuadratureMeasure { measure, source, basis: basis.clone(), rank, residual, one_sided_steps })
}

//! Measure-respecting partitions of the support of τ.
//!
//! Cells start as differences of balls B(z, 2ε) around an ε-net. Two merge passes
//! follow: first cells that are too small for a reference measure μ* are folded into
//! nearby large cells, then the same is done for τ. The result has cells of radius
//! at most 18ε around centers that stay ε-separated, every cell carries positive
//! τ-mass, and every support point lies in exactly one cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::geometry::{greedy_eps_net, mesh_norm, separation, Net, PointSet, SpaceDescriptor, NET_REL_TOL};
use crate::measures::{ball_mass_unchecked, DiscreteMeasure};

/// Relative slack on the radius checks.
pub const RADIUS_SLACK: f64 = 1e-9;

/// Assignment of the points of a ground set to cells indexed by their centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Ground-set index of the center of every cell.
    pub centers: Vec<usize>,
    /// Cell of every ground point, `None` outside the union of cells.
    pub assignment: Vec<Option<usize>>,
    pub eps: f64,
}

impl Partition {
    pub fn num_cells(&self) -> usize {
        self.centers.len()
    }

    /// Ground indices of every cell, each list in increasing order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (i, a) in self.assignment.iter().enumerate() {
            if let Some(c) = a {
                out[*c].push(i);
            }
        }
        out
    }

    /// Σ of `weights` over every cell, summed in ground order.
    pub fn cell_masses(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.centers.len()];
        for (a, w) in self.assignment.iter().zip(weights) {
            if let Some(c) = a {
                out[*c] += w;
            }
        }
        out
    }

    /// Largest distance from an assigned point to its center.
    pub fn max_radius(&self, space: &SpaceDescriptor, ground: &PointSet) -> f64 {
        self.assignment
            .par_iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|c| space.dist(ground.point(i), ground.point(self.centers[c]))))
            .reduce(|| 0.0, f64::max)
    }
}

/// Point `p` joins the first center `z_k` with ρ(p, z_k) ≤ `radius`, realizing the
/// cells B(z_k, radius) \ ∪_{j<k} B(z_j, radius).
pub fn initial_ball_partition(space: &SpaceDescriptor, net: &Net, radius: f64, points: &PointSet) -> Result<Partition> {
    if net.is_empty() {
        return input("initial partition needs a nonempty net");
    }
    if !(radius >= net.eps) {
        return input(format!("ball radius {radius} is smaller than the net scale {}", net.eps));
    }
    if let Some(&bad) = net.centers.iter().find(|&&c| c >= points.len()) {
        return input(format!("net center {bad} is not a point index"));
    }
    let assignment = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let p = points.point(i);
            net.centers.iter().position(|&c| space.dist(p, points.point(c)) <= radius)
        })
        .collect();
    Ok(Partition { centers: net.centers.clone(), assignment, eps: net.eps })
}

/// Bookkeeping of one merge pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeStats {
    /// min over centers of ν(B(z, η)).
    pub min_ball_mass: f64,
    pub threshold: f64,
    pub merged: usize,
    /// Small cells with no large neighbor, kept as cells of their own.
    pub promoted: usize,
    /// Small cells without any point, removed.
    pub discarded: usize,
}

/// `(κ₁/κ₂)(3γ+1)^{−Q}` when the space has ball-measure constants.
pub fn merge_constant(space: &SpaceDescriptor, gamma: f64) -> Option<f64> {
    let (k1, k2) = space.kappas()?;
    Some(k1 / k2 * (3.0 * gamma + 1.0).powi(-(space.dimension() as i32)))
}

/// Folds every cell with ν-mass below `C·m` into the large cell that holds the most
/// ν-mass of B(z, `eta`), ties to the lowest index. `nu` lives on the ground set of
/// `p`. A small cell with no large cell inside B(z, `eta`) is kept (promoted); a
/// small cell with no points is dropped. Cells Z_z ⊆ B(z, r) merged this way land
/// within `eta + 2r` of the absorbing center.
pub fn merge_small_cells(
    space: &SpaceDescriptor,
    p: &Partition,
    nu: &DiscreteMeasure,
    gamma: f64,
    eta: f64,
) -> Result<(Partition, MergeStats)> {
    if !nu.is_nonnegative() {
        return input("merge measure must be nonnegative");
    }
    if nu.len() != p.assignment.len() {
        return input(format!("merge measure has {} points, partition {}", nu.len(), p.assignment.len()));
    }
    if !(eta > 0.0) || !(gamma > 0.0) {
        return input("merge radius and gamma must be positive");
    }
    let ground = nu.points();
    let weights = nu.weights();
    let ball: Vec<f64> = p.centers.par_iter().map(|&c| ball_mass_unchecked(space, nu, ground.point(c), eta)).collect();
    let min_ball_mass = ball.iter().copied().fold(f64::INFINITY, f64::min);
    let mut stats = MergeStats { min_ball_mass, threshold: 0.0, merged: 0, promoted: 0, discarded: 0 };
    if !(min_ball_mass > 0.0) {
        return Ok((p.clone(), stats));
    }

    let masses = p.cell_masses(weights);
    let threshold = match merge_constant(space, gamma) {
        Some(c) => c * min_ball_mass,
        None => {
            let atom = weights.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
            let mut sorted = masses.clone();
            sorted.sort_by(f64::total_cmp);
            atom.max(sorted[(0.01 * (sorted.len() - 1) as f64).floor() as usize])
        }
    };
    stats.threshold = threshold;
    let keep: Vec<bool> = masses.iter().map(|&m| m >= threshold).collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::Partition(format!(
            "no cell reaches the mass threshold {threshold:e} ({} cells, largest mass {:e}, min ball mass {min_ball_mass:e})",
            masses.len(),
            masses.iter().copied().fold(0.0, f64::max)
        )));
    }

    let members = p.members();
    let mut owner: Vec<Option<usize>> = (0..p.num_cells()).map(|c| keep[c].then_some(c)).collect();
    let mut gathered = vec![0.0; p.num_cells()];
    let mut seen = vec![false; p.num_cells()];
    for z in (0..p.num_cells()).filter(|&c| !keep[c]) {
        if members[z].is_empty() {
            stats.discarded += 1;
            continue;
        }
        gathered.iter_mut().for_each(|g| *g = 0.0);
        seen.iter_mut().for_each(|s| *s = false);
        let zc = ground.point(p.centers[z]);
        for (i, a) in p.assignment.iter().enumerate() {
            if let Some(y) = *a {
                if keep[y] && space.dist(zc, ground.point(i)) <= eta {
                    gathered[y] += weights[i];
                    seen[y] = true;
                }
            }
        }
        let best = (0..p.num_cells()).filter(|&y| seen[y]).fold(None, |acc: Option<usize>, y| match acc {
            Some(b) if gathered[b] >= gathered[y] => Some(b),
            _ => Some(y),
        });
        match best {
            Some(y) => {
                owner[z] = Some(y);
                stats.merged += 1;
            }
            None => {
                owner[z] = Some(z);
                stats.promoted += 1;
            }
        }
    }
    Ok((relabel(p, &owner), stats))
}

/// Applies an owner map (old cell → surviving old cell) and renumbers survivors in order.
fn relabel(p: &Partition, owner: &[Option<usize>]) -> Partition {
    let mut index = vec![None; owner.len()];
    let mut centers = Vec::new();
    for (c, o) in owner.iter().enumerate() {
        if *o == Some(c) {
            index[c] = Some(centers.len());
            centers.push(p.centers[c]);
        }
    }
    let assignment = p.assignment.iter().map(|a| a.and_then(|c| owner[c]).and_then(|o| index[o])).collect();
    Partition { centers, assignment, eps: p.eps }
}

/// Everything produced while partitioning the support of τ.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionBuild {
    /// Support points of τ followed by the reference sample.
    pub ground: PointSet,
    /// Index in τ of the first `support.len()` ground points.
    pub support: Vec<usize>,
    /// τ transported to the ground set (zero on reference points).
    pub tau: DiscreteMeasure,
    /// μ* transported to the ground set (zero on support points).
    pub reference: DiscreteMeasure,
    pub net: Net,
    pub initial: Partition,
    pub intermediate: Partition,
    pub partition: Partition,
    pub reference_merge: MergeStats,
    pub tau_merge: MergeStats,
}

impl PartitionBuild {
    pub fn cell_tau_masses(&self) -> Vec<f64> {
        self.partition.cell_masses(self.tau.weights())
    }

    /// Indices into τ of the support points of every final cell.
    pub fn cell_support(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.partition.num_cells()];
        for (g, &s) in self.support.iter().enumerate() {
            if let Some(c) = self.partition.assignment[g] {
                out[c].push(s);
            }
        }
        out
    }

    pub fn diagnostics(&self, space: &SpaceDescriptor) -> PartitionDiagnostics {
        verify_partition(space, &self.partition, &self.tau, &self.reference)
    }
}

/// Two-stage partition of supp τ at scale `eps`: ε-net of the support (first center
/// chosen by `seed`), balls of radius 2ε, merge against μ* with γ = 2 and radius 2ε
/// (cells within 6ε), then against τ with γ = 6 and radius 6ε (cells within 18ε).
/// Cells left without τ-mass are removed at the end; they hold reference points only.
pub fn build_partition(
    space: &SpaceDescriptor,
    tau: &DiscreteMeasure,
    reference: &DiscreteMeasure,
    eps: f64,
    seed: u64,
) -> Result<PartitionBuild> {
    if !(eps > 0.0 && eps.is_finite()) {
        return input(format!("eps must be positive, got {eps}"));
    }
    if !tau.is_nonnegative() || !reference.is_nonnegative() {
        return input("partition measures must be nonnegative");
    }
    let support = tau.support();
    if support.is_empty() {
        return input("tau has empty support");
    }
    space.check_points(tau.points())?;
    space.check_points(reference.points())?;
    let support_points = tau.points().subset(&support)?;
    let ground = support_points.concat(reference.points())?;
    let (ns, nr) = (support.len(), reference.len());
    let mut tau_w: Vec<f64> = support.iter().map(|&i| tau.weights()[i]).collect();
    tau_w.resize(ns + nr, 0.0);
    let mut ref_w = vec![0.0; ns];
    ref_w.extend_from_slice(reference.weights());
    let tau_g = DiscreteMeasure::new(ground.clone(), tau_w)?;
    let ref_g = DiscreteMeasure::new(ground.clone(), ref_w)?;

    let net = greedy_eps_net(space, &support_points, eps, seed)?;
    let initial = initial_ball_partition(space, &net, 2.0 * eps, &ground)?;
    let (intermediate, reference_merge) = merge_small_cells(space, &initial, &ref_g, 2.0, 2.0 * eps)?;
    let (merged, tau_merge) = merge_small_cells(space, &intermediate, &tau_g, 6.0, 6.0 * eps)?;
    let masses = merged.cell_masses(tau_g.weights());
    let owner: Vec<Option<usize>> = (0..merged.num_cells()).map(|c| (masses[c] > 0.0).then_some(c)).collect();
    let partition = relabel(&merged, &owner);

    Ok(PartitionBuild {
        ground,
        support,
        tau: tau_g,
        reference: ref_g,
        net,
        initial,
        intermediate,
        partition,
        reference_merge,
        tau_merge,
    })
}

/// Properties of a partition, recomputed from scratch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDiagnostics {
    pub cells: usize,
    pub eps: f64,
    pub min_cell_reference_mass: f64,
    pub min_cell_tau_mass: f64,
    /// η of the centers.
    pub separation: f64,
    /// δ(centers; K) with K the support of τ together with every assigned point.
    pub mesh_norm: f64,
    pub max_cell_radius: f64,
    /// Largest number of cells met by a ball B(z, ε) around a center.
    pub max_intersection_count: usize,
    pub unassigned_support: usize,
    /// Every assigned point within 18ε of its center.
    pub radius_ok: bool,
    /// Centers at least ε apart.
    pub separation_ok: bool,
    /// Every support point assigned and δ(centers; K) ≤ 18ε.
    pub coverage_ok: bool,
    /// Every cell has positive τ-mass.
    pub positive_mass_ok: bool,
    /// Every cell has positive reference mass.
    pub volume_ok: bool,
}

impl PartitionDiagnostics {
    pub fn all_ok(&self) -> bool {
        self.radius_ok && self.separation_ok && self.coverage_ok && self.positive_mass_ok
    }
}

/// `tau` and `reference` must live on the ground set the partition indexes.
pub fn verify_partition(
    space: &SpaceDescriptor,
    p: &Partition,
    tau: &DiscreteMeasure,
    reference: &DiscreteMeasure,
) -> PartitionDiagnostics {
    let ground = tau.points();
    let eps = p.eps;
    let bound = 18.0 * eps * (1.0 + RADIUS_SLACK);
    let tau_m = p.cell_masses(tau.weights());
    let ref_m = if reference.len() == p.assignment.len() { p.cell_masses(reference.weights()) } else { vec![0.0; p.num_cells()] };
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);

    let centers = if p.centers.is_empty() { None } else { ground.subset(&p.centers).ok() };
    let sep = centers.as_ref().map_or(f64::INFINITY, |c| separation(space, c));
    let max_radius = p.max_radius(space, ground);

    let k_idx: Vec<usize> =
        (0..ground.len()).filter(|&i| p.assignment[i].is_some() || tau.weights()[i] != 0.0).collect();
    let unassigned_support =
        (0..ground.len()).filter(|&i| p.assignment[i].is_none() && tau.weights()[i] != 0.0).count();
    let mesh = match (&centers, ground.subset(&k_idx)) {
        (Some(c), Ok(k)) => mesh_norm(space, c, &k).unwrap_or(f64::INFINITY),
        (None, _) => f64::INFINITY,
        (_, Err(_)) => 0.0,
    };

    let max_intersection_count = p
        .centers
        .par_iter()
        .map(|&z| {
            let zc = ground.point(z);
            let mut met = vec![false; p.num_cells()];
            for (i, a) in p.assignment.iter().enumerate() {
                if let Some(c) = a {
                    if space.dist(zc, ground.point(i)) <= eps {
                        met[*c] = true;
                    }
                }
            }
            met.iter().filter(|&&m| m).count()
        })
        .max()
        .unwrap_or(0);

    PartitionDiagnostics {
        cells: p.num_cells(),
        eps,
        min_cell_reference_mass: min(&ref_m),
        min_cell_tau_mass: min(&tau_m),
        separation: sep,
        mesh_norm: mesh,
        max_cell_radius: max_radius,
        max_intersection_count,
        unassigned_support,
        radius_ok: max_radius <= bound,
        separation_ok: sep >= eps * (1.0 - NET_REL_TOL),
        coverage_ok: unassigned_support == 0 && mesh <= bound,
        positive_mass_ok: p.num_cells() > 0 && tau_m.iter().all(|&m| m > 0.0),
        volume_ok: p.num_cells() > 0 && ref_m.iter().all(|&m| m > 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn circle_grid() -> PointSet {
        let pts = (0..360)
            .map(|j| {
                let t = (j as f64).to_radians();
                vec![t.cos(), t.sin(), 0.0]
            })
            .collect();
        PointSet::new(pts).unwrap()
    }

    fn sphere_setup(n_tau: usize, n_ref: usize, seed: u64) -> (SpaceDescriptor, DiscreteMeasure, DiscreteMeasure) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = SpaceDescriptor::sphere(2).unwrap();
        let tau = DiscreteMeasure::uniform(sampling::uniform_sphere(2, n_tau, &mut rng));
        let reference = DiscreteMeasure::uniform(sampling::uniform_sphere(2, n_ref, &mut rng));
        (space, tau, reference)
    }

    #[test]
    fn one_center_takes_everything() {
        let space = SpaceDescriptor::sphere(2).unwrap();
        let pts = circle_grid();
        let p = initial_ball_partition(&space, &Net { centers: vec![7], eps: PI }, PI, &pts).unwrap();
        assert_eq!(p.num_cells(), 1);
        assert!(p.assignment.iter().all(|a| *a == Some(0)));
        assert!(initial_ball_partition(&space, &Net { centers: vec![], eps: 1.0 }, 1.0, &pts).is_err());
        assert!(initial_ball_partition(&space, &Net { centers: vec![0], eps: 1.0 }, 0.5, &pts).is_err());
    }

    #[test]
    fn equidistant_point_goes_to_lower_index() {
        let space = SpaceDescriptor::cube(1).unwrap();
        let pts = PointSet::new(vec![vec![0.5], vec![-0.5], vec![0.0]]).unwrap();
        let p = initial_ball_partition(&space, &Net { centers: vec![1, 0], eps: 0.5 }, 0.5, &pts).unwrap();
        assert_eq!(p.assignment, vec![Some(1), Some(0), Some(0)]);
    }

    #[test]
    fn compass_cells_match_membership_oracle() {
        let space = SpaceDescriptor::sphere(2).unwrap();
        let pts = circle_grid();
        let net = Net { centers: vec![0, 90, 180, 270], eps: PI / 4.0 };
        // Integer-degree oracle: first compass center within the radius.
        let circ = |a: i64, b: i64| {
            let d = (a - b).rem_euclid(360);
            d.min(360 - d)
        };
        for (radius_deg, expect) in [(45, [91, 90, 90, 89]), (90, [181, 90, 89, 0])] {
            let radius = (radius_deg as f64).to_radians() + 1e-9;
            let p = initial_ball_partition(&space, &net, radius, &pts).unwrap();
            for j in 0..360 {
                let oracle = (0..4).find(|&k| circ(j, 90 * k) <= radius_deg).map(|k| k as usize);
                assert_eq!(p.assignment[j as usize], oracle, "point {j}");
            }
            let counts: Vec<usize> = p.members().iter().map(Vec::len).collect();
            assert_eq!(counts, expect);
        }
    }

    #[test]
    fn merge_is_identity_when_all_cells_are_large() {
        let space = SpaceDescriptor::cube(1).unwrap();
        let pts = PointSet::new(vec![vec![-0.5], vec![-0.4], vec![0.5], vec![0.4]]).unwrap();
        let nu = DiscreteMeasure::uniform(pts.clone());
        let p = initial_ball_partition(&space, &Net { centers: vec![0, 2], eps: 0.2 }, 0.2, &pts).unwrap();
        let (q, stats) = merge_small_cells(&space, &p, &nu, 2.0, 0.2).unwrap();
        assert_eq!(q, p);
        assert_eq!(stats.merged + stats.promoted + stats.discarded, 0);
    }

    #[test]
    fn empty_cell_absorbed_by_neighbor() {
        let space = SpaceDescriptor::cube(1).unwrap();
        let pts = PointSet::new(vec![vec![0.0], vec![0.1], vec![0.2], vec![0.3]]).unwrap();
        let nu = DiscreteMeasure::new(pts.clone(), vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let p = Partition { centers: vec![0, 2], assignment: vec![Some(0), Some(1), Some(1), Some(1)], eps: 0.1 };
        let (q, stats) = merge_small_cells(&space, &p, &nu, 2.0, 0.2).unwrap();
        assert_eq!(q.centers, vec![2]);
        assert!(q.assignment.iter().all(|a| *a == Some(0)));
        assert_eq!(stats.merged, 1);
        // (κ₁/κ₂)·7⁻¹ times the smaller ball mass 2.
        assert!((stats.threshold - 2.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn merge_without_large_cells_fails() {
        let space = SpaceDescriptor::cube(1).unwrap();
        let pts = PointSet::new(vec![vec![0.0], vec![0.9]]).unwrap();
        let nu = DiscreteMeasure::new(pts.clone(), vec![1.0, 1.0]).unwrap();
        let p = Partition { centers: vec![0, 1], assignment: vec![None, None], eps: 0.1 };
        assert!(matches!(merge_small_cells(&space, &p, &nu, 2.0, 0.2), Err(Error::Partition(_))));
    }

    #[test]
    fn sphere_merge_post_check() {
        let (space, tau, _) = sphere_setup(2000, 1, 11);
        let eps = 0.15;
        let net = greedy_eps_net(&space, tau.points(), eps, 0).unwrap();
        let p = initial_ball_partition(&space, &net, 2.0 * eps, tau.points()).unwrap();
        for (gamma, eta) in [(2.0, 2.0 * eps), (6.0, 6.0 * eps)] {
            let (q, stats) = merge_small_cells(&space, &p, &tau, gamma, eta).unwrap();
            assert_eq!(stats.promoted, 0);
            // Exhaustive oracle over every surviving cell.
            let masses = q.cell_masses(tau.weights());
            assert!(masses.iter().all(|&m| m >= stats.threshold));
            assert!(q.max_radius(&space, tau.points()) <= 3.0 * eta);
            for (members, &c) in q.members().iter().zip(&q.centers) {
                for &i in members {
                    for &j in members {
                        assert!(space.dist(tau.points().point(i), tau.points().point(j)) <= 6.0 * eta);
                    }
                }
                assert!(members.contains(&c));
            }
        }
    }

    #[test]
    fn single_atom_gives_single_cell() {
        let (space, _, reference) = sphere_setup(1, 500, 3);
        let tau = DiscreteMeasure::new(PointSet::new(vec![vec![0.0, 0.6, 0.8]]).unwrap(), vec![2.5]).unwrap();
        let b = build_partition(&space, &tau, &reference, 0.2, 0).unwrap();
        assert_eq!(b.partition.num_cells(), 1);
        assert_eq!(b.cell_tau_masses(), vec![2.5]);
        let d = b.diagnostics(&space);
        assert!(d.all_ok());
        assert_eq!(d.max_intersection_count, 1);
    }

    #[test]
    fn center_count_within_volume_bounds() {
        let (space, tau, reference) = sphere_setup(4096, 4096, 5);
        let eps: f64 = 0.15;
        let b = build_partition(&space, &tau, &reference, eps, 0).unwrap();
        let (k1, k2) = space.kappas().unwrap();
        let (lo, hi) = (1.0 / (k2 * eps * eps), 9.0 / (k1 * eps * eps));
        let count = b.net.len() as f64;
        assert!((lo..=hi).contains(&count), "{count} outside [{lo}, {hi}]");
        assert!(b.partition.num_cells() <= b.net.len());
    }

    #[test]
    fn two_thousand_points_pass_all_checks() {
        let (space, tau, reference) = sphere_setup(2000, 4096, 9);
        let b = build_partition(&space, &tau, &reference, 0.15, 0).unwrap();
        let d = b.diagnostics(&space);
        assert!(d.all_ok() && d.volume_ok, "{d:?}");
        assert_eq!(d.unassigned_support, 0);
    }

    #[test]
    fn oversized_cell_fails_radius_check() {
        let space = SpaceDescriptor::cube(1).unwrap();
        let pts = PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap();
        let tau = DiscreteMeasure::uniform(pts);
        let p = Partition { centers: vec![0], assignment: vec![Some(0), Some(0)], eps: 0.01 };
        let d = verify_partition(&space, &p, &tau, &tau);
        assert!(!d.radius_ok);
        assert!(!d.all_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn partition_invariants(seed in 0u64..10_000, n in 1usize..400, eps in 0.1f64..0.6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let space = SpaceDescriptor::sphere(2).unwrap();
            let pts = sampling::uniform_sphere(2, n, &mut rng);
            let w: Vec<f64> = (0..n).map(|i| if i % 7 == 3 { 0.0 } else { 1.0 + (i % 5) as f64 }).collect();
            prop_assume!(w.iter().any(|&x| x > 0.0));
            let tau = DiscreteMeasure::new(pts, w).unwrap();
            let reference = DiscreteMeasure::uniform(sampling::uniform_sphere(2, 800, &mut rng));
            let b = build_partition(&space, &tau, &reference, eps, seed).unwrap();

            // Exactness of cell masses.
            let total: f64 = b.cell_tau_masses().iter().sum();
            prop_assert!((total - tau.mass()).abs() <= 1e-12 * tau.mass());
            // Every support point in exactly one cell.
            let mut seen: Vec<usize> = b.cell_support().concat();
            seen.sort();
            prop_assert_eq!(seen, tau.support());
            // Nesting: each stage coarsens the previous one.
            for (fine, coarse) in [(&b.initial, &b.intermediate), (&b.intermediate, &b.partition)] {
                let mut image = vec![None; fine.num_cells()];
                for (a, c) in fine.assignment.iter().zip(&coarse.assignment) {
                    if let (Some(a), Some(c)) = (a, c) {
                        prop_assert!(image[*a].is_none() || image[*a] == Some(*c));
                        image[*a] = Some(*c);
                    }
                }
            }
            // Center retention.
            prop_assert!(b.partition.centers.iter().all(|c| b.intermediate.centers.contains(c)));
            prop_assert!(b.intermediate.centers.iter().all(|c| b.initial.centers.contains(c)));
            prop_assert!(b.initial.centers.iter().all(|&c| c < b.support.len()));
            // Radius chain.
            let slack = 1.0 + RADIUS_SLACK;
            prop_assert!(b.initial.max_radius(&space, &b.ground) <= 2.0 * eps * slack);
            prop_assert!(b.intermediate.max_radius(&space, &b.ground) <= 6.0 * eps * slack);
            prop_assert!(b.partition.max_radius(&space, &b.ground) <= 18.0 * eps * slack);
            prop_assert!(b.diagnostics(&space).all_ok());
        }
    }
}

//! Deterministic K-means over small planar point sets.
//!
//! The assignment stage clusters the convex-hull evaders, so the instances
//! are tiny (typically under ~20 points). Lloyd iterations are run from a
//! greedy farthest-point seeding plus a handful of seeded random restarts,
//! which in practice lands on the global optimum for these sizes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Restart budget: one greedy seeding plus `RESTARTS - 1` random ones.
pub const RESTARTS: usize = 10;
/// Lloyd iteration cap per restart.
pub const MAX_ITERATIONS: usize = 100;

/// One cluster: member indices into the input point set and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster<T> {
    pub members: Vec<usize>,
    pub center: Point2<T>,
}

/// Partition of a point set into `k` clusters, with the summed squared
/// member-to-center distance as `cost`.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering<T> {
    pub(crate) clusters: Vec<Cluster<T>>,
    pub(crate) cost: T,
}

impl<T: Real> Clustering<T> {
    pub fn clusters(&self) -> &[Cluster<T>] {
        &self.clusters
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn cost(&self) -> T {
        self.cost
    }

    /// Check the partition invariants against the clustered point set:
    /// disjoint and complete membership, centers equal to member means, and
    /// stored cost consistent with a recomputation.
    pub fn validate(&self, points: &[Point2<T>]) -> Result<()> {
        let mut seen = vec![false; points.len()];
        for cluster in &self.clusters {
            if cluster.members.is_empty() {
                return Err(Error::InvalidConfig("empty cluster".into()));
            }
            for &i in &cluster.members {
                if i >= points.len() {
                    return Err(Error::IndexOutOfRange(i));
                }
                if seen[i] {
                    return Err(Error::InvalidConfig(format!("point {i} in two clusters")));
                }
                seen[i] = true;
            }
            let mean = mean_of(&cluster.members, points);
            if cluster.center.dist(mean) > T::of(1e-9) * (T::one() + mean.norm()) {
                return Err(Error::InvalidConfig("center is not the member mean".into()));
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::InvalidConfig("partition incomplete".into()));
        }
        let recomputed = clustering_cost(self, points)?;
        let scale = T::one().max(self.cost.abs());
        if (recomputed - self.cost).abs() > T::of(1e-9) * scale {
            return Err(Error::InvalidConfig("stored cost inconsistent".into()));
        }
        Ok(())
    }
}

/// K-means via Lloyd iterations.
///
/// Restart 0 seeds greedily (farthest-point traversal starting at the
/// lexicographically smallest point); the remaining restarts draw `k`
/// distinct points with a generator derived from `seed`. The lowest-cost
/// restart wins, ties resolving to the earliest restart. Identical
/// `(points, k, seed)` triples return identical clusterings.
pub fn kmeans<T: Real>(points: &[Point2<T>], k: usize, seed: u64) -> Result<Clustering<T>> {
    if points.iter().any(|p| !p.finite()) {
        return Err(Error::InvalidCoordinate);
    }
    if k < 1 || k > points.len() {
        return Err(Error::InvalidClusterCount {
            k,
            len: points.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<LloydOutcome<T>> = None;
    for restart in 0..RESTARTS {
        let centers = if restart == 0 {
            greedy_seeds(points, k)
        } else {
            rand::seq::index::sample(&mut rng, points.len(), k)
                .iter()
                .map(|i| points[i])
                .collect()
        };
        let outcome = lloyd(points, centers);
        let better = match &best {
            None => true,
            Some(b) => outcome.cost < b.cost,
        };
        if better {
            best = Some(outcome);
        }
    }

    let outcome = best.expect("at least one restart");
    let mut clusters: Vec<Cluster<T>> = (0..k)
        .map(|_| Cluster {
            members: Vec::new(),
            center: Point2::zero(),
        })
        .collect();
    for (i, &c) in outcome.assignment.iter().enumerate() {
        clusters[c].members.push(i);
    }
    let mut cost = T::zero();
    for cluster in &mut clusters {
        cluster.center = mean_of(&cluster.members, points);
        for &i in &cluster.members {
            cost += points[i].dist(cluster.center).powi(2);
        }
    }
    Ok(Clustering { clusters, cost })
}

/// Recompute the clustering cost from scratch (centers as member means).
pub fn clustering_cost<T: Real>(c: &Clustering<T>, points: &[Point2<T>]) -> Result<T> {
    let mut cost = T::zero();
    for cluster in &c.clusters {
        if let Some(&bad) = cluster.members.iter().find(|&&i| i >= points.len()) {
            return Err(Error::IndexOutOfRange(bad));
        }
        let mean = mean_of(&cluster.members, points);
        for &i in &cluster.members {
            cost += points[i].dist(mean).powi(2);
        }
    }
    Ok(cost)
}

fn mean_of<T: Real>(members: &[usize], points: &[Point2<T>]) -> Point2<T> {
    let mut sum = Point2::zero();
    for &i in members {
        sum = sum + points[i];
    }
    sum.scaled(T::one() / T::of(members.len().max(1) as f64))
}

/// Farthest-point seeding: start at the lexicographically smallest point,
/// then repeatedly take the unchosen point with the largest distance to the
/// chosen set (ties to the lowest index).
fn greedy_seeds<T: Real>(points: &[Point2<T>], k: usize) -> Vec<Point2<T>> {
    let first = (0..points.len())
        .min_by(|&i, &j| {
            (points[i].x, points[i].y)
                .partial_cmp(&(points[j].x, points[j].y))
                .unwrap()
                .then(i.cmp(&j))
        })
        .expect("non-empty");
    let mut chosen = vec![first];
    let mut min_dist: Vec<T> = points.iter().map(|p| p.dist(points[first])).collect();
    while chosen.len() < k {
        let next = (0..points.len())
            .filter(|i| !chosen.contains(i))
            .max_by(|&i, &j| {
                min_dist[i]
                    .partial_cmp(&min_dist[j])
                    .unwrap()
                    .then(j.cmp(&i))
            })
            .expect("k <= points.len()");
        chosen.push(next);
        for (i, d) in min_dist.iter_mut().enumerate() {
            *d = d.min(points[i].dist(points[next]));
        }
    }
    chosen.iter().map(|&i| points[i]).collect()
}

struct LloydOutcome<T> {
    assignment: Vec<usize>,
    cost: T,
    /// Cost after each iteration; non-increasing. Read by the tests.
    #[cfg_attr(not(test), allow(dead_code))]
    cost_trace: Vec<T>,
}

/// Lloyd iterations from the given initial centers until the assignment is
/// stable or `MAX_ITERATIONS` is hit. A cluster left empty by an assignment
/// pass is re-seeded at the point currently farthest from its own center,
/// which keeps the per-iteration cost non-increasing.
fn lloyd<T: Real>(points: &[Point2<T>], mut centers: Vec<Point2<T>>) -> LloydOutcome<T> {
    let k = centers.len();
    let mut assignment = vec![usize::MAX; points.len()];
    let mut cost_trace = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        // Assignment pass: nearest center, ties to the lower cluster index.
        let mut next = Vec::with_capacity(points.len());
        for p in points {
            let mut best = 0;
            let mut best_d = p.dist(centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = p.dist(*center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            next.push(best);
        }

        // Re-seed empty clusters at the globally farthest point.
        let mut sizes = vec![0usize; k];
        for &c in &next {
            sizes[c] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let farthest = (0..points.len())
                .filter(|&i| sizes[next[i]] > 1)
                .max_by(|&i, &j| {
                    let di = points[i].dist(centers[next[i]]);
                    let dj = points[j].dist(centers[next[j]]);
                    di.partial_cmp(&dj).unwrap().then(j.cmp(&i))
                });
            if let Some(i) = farthest {
                sizes[next[i]] -= 1;
                next[i] = empty;
                sizes[empty] = 1;
                centers[empty] = points[i];
            }
        }

        let converged = next == assignment;
        assignment = next;

        // Recenter.
        let mut sums = vec![Point2::<T>::zero(); k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums[c] = sums[c] + points[i];
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].scaled(T::one() / T::of(counts[c] as f64));
            }
        }

        let mut cost = T::zero();
        for (i, &c) in assignment.iter().enumerate() {
            cost += points[i].dist(centers[c]).powi(2);
        }
        cost_trace.push(cost);

        if converged {
            break;
        }
    }
    let cost = *cost_trace.last().expect("at least one iteration");
    LloydOutcome {
        assignment,
        cost,
        cost_trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point2<f64>> {
        coords.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    fn random_points(rng: &mut impl Rng, n: usize, span: f64) -> Vec<Point2<f64>> {
        (0..n)
            .map(|_| {
                Point2::new(
                    rng.gen_range(-span..span),
                    rng.gen_range(-span..span),
                )
            })
            .collect()
    }

    /// Exhaustive minimum of the K-means objective over all k-partitions.
    fn exhaustive_optimum(points: &[Point2<f64>], k: usize) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        let total = k.pow(n as u32);
        'outer: for code in 0..total {
            let mut assignment = vec![0usize; n];
            let mut c = code;
            for a in &mut assignment {
                *a = c % k;
                c /= k;
            }
            let mut counts = vec![0usize; k];
            for &a in &assignment {
                counts[a] += 1;
            }
            for &count in &counts {
                if count == 0 {
                    continue 'outer;
                }
            }
            let mut cost = 0.0;
            for cluster in 0..k {
                let members: Vec<usize> =
                    (0..n).filter(|&i| assignment[i] == cluster).collect();
                let mean = mean_of(&members, points);
                for &i in &members {
                    cost += points[i].dist(mean).powi(2);
                }
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn singleton_partition_has_zero_cost() {
        let p = pts(&[(0.0, 0.0), (1.0, 2.0), (-3.0, 1.0), (4.0, 4.0)]);
        let c = kmeans(&p, p.len(), 7).unwrap();
        assert_eq!(c.k(), 4);
        assert_eq!(c.cost(), 0.0);
        c.validate(&p).unwrap();
        for cluster in c.clusters() {
            assert_eq!(cluster.members.len(), 1);
        }
    }

    #[test]
    fn well_separated_groups_recovered() {
        let p = pts(&[
            (0.0, 0.0),
            (0.1, 0.0),
            (0.0, 0.1),
            (100.0, 100.0),
            (100.1, 100.0),
            (100.0, 100.1),
        ]);
        let c = kmeans(&p, 2, 1).unwrap();
        c.validate(&p).unwrap();
        let mut groups: Vec<Vec<usize>> =
            c.clusters().iter().map(|cl| cl.members.clone()).collect();
        groups.sort();
        assert_eq!(groups, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let near = Point2::new(0.1 / 3.0, 0.1 / 3.0);
        let far = Point2::new(100.0 + 0.1 / 3.0, 100.0 + 0.1 / 3.0);
        for cl in c.clusters() {
            let expected = if cl.members.contains(&0) { near } else { far };
            assert!(cl.center.dist(expected) < 1e-12);
        }
    }

    #[test]
    fn six_random_points_match_exhaustive_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = random_points(&mut rng, 6, 10.0);
        let c = kmeans(&p, 2, 3).unwrap();
        let optimum = exhaustive_optimum(&p, 2);
        assert!((c.cost() - optimum).abs() <= 1e-9 * optimum.max(1.0));
    }

    #[test]
    fn small_instances_usually_reach_optimum() {
        let mut hits = 0;
        let mut total = 0;
        for seed in 0..40u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(3..=8);
            let k = rng.gen_range(1..=3.min(n));
            let p = random_points(&mut rng, n, 5.0);
            let c = kmeans(&p, k, seed).unwrap();
            c.validate(&p).unwrap();
            let optimum = exhaustive_optimum(&p, k);
            total += 1;
            if c.cost() <= optimum * (1.0 + 1e-9) + 1e-12 {
                hits += 1;
            } else {
                assert!(c.cost() <= optimum * 1.05, "cost {} vs optimum {}", c.cost(), optimum);
            }
        }
        assert!(hits * 100 >= total * 95, "only {hits}/{total} optimal");
    }

    #[test]
    fn cost_examples() {
        let p = pts(&[(0.0, 0.0), (2.0, 0.0)]);
        let c = kmeans(&p, 1, 0).unwrap();
        assert_eq!(c.clusters()[0].center, Point2::new(1.0, 0.0));
        assert!((c.cost() - 2.0).abs() < 1e-12);
        assert!((clustering_cost(&c, &p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cost_recomputation_matches_stored() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_points(&mut rng, 17, 30.0);
        let c = kmeans(&p, 4, 11).unwrap();
        let recomputed = clustering_cost(&c, &p).unwrap();
        assert!((recomputed - c.cost()).abs() <= 1e-9 * c.cost().max(1.0));
    }

    #[test]
    fn cost_rejects_out_of_range_indices() {
        let p = pts(&[(0.0, 0.0), (2.0, 0.0)]);
        let c = kmeans(&p, 1, 0).unwrap();
        let fewer = pts(&[(0.0, 0.0)]);
        assert_eq!(
            clustering_cost(&c, &fewer).unwrap_err(),
            Error::IndexOutOfRange(1)
        );
    }

    #[test]
    fn invalid_cluster_counts_rejected() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(
            kmeans(&p, 0, 0).unwrap_err(),
            Error::InvalidClusterCount { .. }
        ));
        assert!(matches!(
            kmeans(&p, 3, 0).unwrap_err(),
            Error::InvalidClusterCount { .. }
        ));
        let bad = pts(&[(f64::NAN, 0.0)]);
        assert_eq!(kmeans(&bad, 1, 0).unwrap_err(), Error::InvalidCoordinate);
    }

    #[test]
    fn deterministic_for_same_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_points(&mut rng, 12, 50.0);
        let a = kmeans(&p, 3, 17).unwrap();
        let b = kmeans(&p, 3, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lloyd_cost_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let p = random_points(&mut rng, 15, 20.0);
            let centers = greedy_seeds(&p, 4);
            let outcome = lloyd(&p, centers);
            for w in outcome.cost_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
        }
    }

    #[test]
    fn duplicate_points_with_full_k_are_handled() {
        let p = pts(&[(1.0, 1.0), (1.0, 1.0), (2.0, 2.0)]);
        let c = kmeans(&p, 3, 0).unwrap();
        c.validate(&p).unwrap();
        assert_eq!(c.cost(), 0.0);
    }
}

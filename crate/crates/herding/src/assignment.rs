//! Per-step dynamic assignment: which evaders the herders directly control.
//!
//! The pipeline runs once per simulation step: convex hull of the herd,
//! K-means over the hull vertices into `p = min(|hull|, n)` clusters, then
//! the member farthest from each cluster center. Clusters are ordered by the
//! angle of their center around the hull centroid so that the stacking order
//! of the controlled state is stable across steps.

use crate::clustering::{self, Clustering};
use crate::dynamics::WorldState;
use crate::error::{Error, Result};
use crate::geometry::{self, Point2};
use crate::scalar::Real;

/// Result of the assignment stage.
///
/// `hull_indices` and `selected` hold evader indices into the world state;
/// the clustering's member indices refer to positions within `hull_indices`.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<T> {
    pub hull_indices: Vec<usize>,
    pub clusters: Clustering<T>,
    pub selected: Vec<usize>,
}

impl<T: Real> Assignment<T> {
    pub fn p(&self) -> usize {
        self.selected.len()
    }
}

/// Run the assignment pipeline on the current evader positions.
///
/// Argmax ties inside a cluster resolve to the lowest evader index, and the
/// whole pipeline is deterministic in `(w, n, seed)`.
pub fn assign<T: Real>(w: &WorldState<T>, n: usize, seed: u64) -> Result<Assignment<T>> {
    w.validate()?;
    if n < 1 {
        return Err(Error::InvalidConfig("need at least one herder".into()));
    }
    let hull = geometry::convex_hull(&w.evaders)?;
    let hull_indices = hull.vertex_indices().to_vec();
    let hull_points: Vec<Point2<T>> = hull_indices.iter().map(|&i| w.evaders[i]).collect();
    let p = hull_points.len().min(n);
    let clustering = clustering::kmeans(&hull_points, p, seed)?;
    let clustering = order_by_angle(clustering, &hull_points)?;

    let mut selected = Vec::with_capacity(p);
    for cluster in clustering.clusters() {
        let best = cluster
            .members
            .iter()
            .map(|&local| (local, hull_indices[local]))
            .max_by(|&(la, ga), &(lb, gb)| {
                let da = hull_points[la].dist(cluster.center);
                let db = hull_points[lb].dist(cluster.center);
                da.partial_cmp(&db).unwrap().then(gb.cmp(&ga))
            })
            .expect("clusters are non-empty");
        selected.push(best.1);
    }

    Ok(Assignment {
        hull_indices,
        clusters: clustering,
        selected,
    })
}

/// Sort clusters by the angle of their center around the hull centroid,
/// starting at the angle of the lexicographically smallest hull vertex
/// (which is the first one, by the hull's ordering contract).
fn order_by_angle<T: Real>(
    clustering: Clustering<T>,
    hull_points: &[Point2<T>],
) -> Result<Clustering<T>> {
    let center = geometry::centroid(hull_points)?;
    let start = hull_points[0] - center;
    let start_angle = start.y.atan2(start.x);
    let two_pi = T::two_pi();
    let key = |p: Point2<T>| -> T {
        let d = p - center;
        let mut a = d.y.atan2(d.x) - start_angle;
        while a < T::zero() {
            a += two_pi;
        }
        while a >= two_pi {
            a -= two_pi;
        }
        a
    };
    let mut order: Vec<usize> = (0..clustering.k()).collect();
    order.sort_by(|&a, &b| {
        key(clustering.clusters()[a].center)
            .partial_cmp(&key(clustering.clusters()[b].center))
            .unwrap()
            .then(a.cmp(&b))
    });
    let clusters = order
        .into_iter()
        .map(|i| clustering.clusters()[i].clone())
        .collect();
    Ok(Clustering {
        clusters,
        cost: clustering.cost(),
    })
}

/// Positions of the selected evaders in cluster order.
pub fn selected_state<T: Real>(a: &Assignment<T>, w: &WorldState<T>) -> Result<Vec<Point2<T>>> {
    a.selected
        .iter()
        .map(|&j| {
            w.evaders
                .get(j)
                .copied()
                .ok_or(Error::IndexOutOfRange(j))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::EvaderModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn world(evaders: &[(f64, f64)], n_herders: usize) -> WorldState<f64> {
        let model = EvaderModel::inverse(1.2, 2e-4).unwrap();
        let ev: Vec<Point2<f64>> = evaders.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let m = ev.len();
        let herders = (0..n_herders)
            .map(|i| Point2::new(100.0 + i as f64, 100.0))
            .collect();
        WorldState::new(ev, herders, vec![model; m], 0.0).unwrap()
    }

    #[test]
    fn few_evaders_all_selected() {
        let w = world(&[(0.0, 0.0), (4.0, 0.0), (2.0, 3.0)], 5);
        let a = assign(&w, 5, 1).unwrap();
        assert_eq!(a.hull_indices.len(), 3);
        assert_eq!(a.p(), 3);
        let mut sel = a.selected.clone();
        sel.sort();
        assert_eq!(sel, vec![0, 1, 2]);
    }

    #[test]
    fn singleton_clusters_select_their_members() {
        let w = world(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)], 4);
        let a = assign(&w, 4, 1).unwrap();
        assert_eq!(a.p(), 4);
        let mut sel = a.selected.clone();
        sel.sort();
        assert_eq!(sel, vec![0, 1, 2, 3]);
        for cluster in a.clusters.clusters() {
            assert_eq!(cluster.members.len(), 1);
        }
    }

    #[test]
    fn pipeline_matches_stagewise_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut evaders: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let ang = 2.0 * std::f64::consts::PI * (i as f64) / 12.0;
                (10.0 * ang.cos(), 10.0 * ang.sin())
            })
            .collect();
        for _ in 0..20 {
            evaders.push((rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)));
        }
        let w = world(&evaders, 4);
        let a = assign(&w, 4, 9).unwrap();

        // Independent restaging through the public operations.
        let hull = geometry::convex_hull(&w.evaders).unwrap();
        assert_eq!(a.hull_indices, hull.vertex_indices());
        let hull_pts: Vec<Point2<f64>> = hull
            .vertex_indices()
            .iter()
            .map(|&i| w.evaders[i])
            .collect();
        let p = hull_pts.len().min(4);
        assert_eq!(a.p(), p);
        let clustering = clustering::kmeans(&hull_pts, p, 9).unwrap();
        let mut expected: Vec<usize> = clustering
            .clusters()
            .iter()
            .map(|cl| {
                // Argmax with ties to the lowest global evader index.
                let &far = cl
                    .members
                    .iter()
                    .max_by(|&&x, &&y| {
                        hull_pts[x]
                            .dist(cl.center)
                            .partial_cmp(&hull_pts[y].dist(cl.center))
                            .unwrap()
                            .then(hull.vertex_indices()[y].cmp(&hull.vertex_indices()[x]))
                    })
                    .unwrap();
                hull.vertex_indices()[far]
            })
            .collect();
        expected.sort();
        let mut sel = a.selected.clone();
        sel.sort();
        assert_eq!(sel, expected);
    }

    #[test]
    fn invariants_on_random_worlds() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..30 {
            let m = rng.gen_range(1..40);
            let n = rng.gen_range(1..7);
            let evaders: Vec<(f64, f64)> = (0..m)
                .map(|_| (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)))
                .collect();
            let w = world(&evaders, n);
            let a = assign(&w, n, 3).unwrap();
            assert!(a.p() <= n);
            assert_eq!(a.p(), a.hull_indices.len().min(n));
            let mut distinct = a.selected.clone();
            distinct.sort();
            distinct.dedup();
            assert_eq!(distinct.len(), a.selected.len());
            for s in &a.selected {
                assert!(a.hull_indices.contains(s));
            }
            // Determinism.
            assert_eq!(a, assign(&w, n, 3).unwrap());
        }
    }

    #[test]
    fn selected_state_extracts_in_cluster_order() {
        let w = world(&[(0.0, 0.0), (4.0, 0.0), (2.0, 3.0)], 3);
        let a = assign(&w, 3, 1).unwrap();
        let state = selected_state(&a, &w).unwrap();
        assert_eq!(state.len(), a.p());
        for (k, &j) in a.selected.iter().enumerate() {
            assert_eq!(state[k], w.evaders[j]);
        }
    }

    #[test]
    fn selected_state_rejects_stale_indices() {
        let w = world(&[(0.0, 0.0), (4.0, 0.0), (2.0, 3.0)], 3);
        let a = assign(&w, 3, 1).unwrap();
        let smaller = world(&[(0.0, 0.0)], 3);
        assert!(matches!(
            selected_state(&a, &smaller),
            Err(Error::IndexOutOfRange(_))
        ));
    }
}

//! Self-check suites: independent oracles and property probes runnable at
//! runtime (the CLI `validate` subcommand) and reused by the test suites.
//!
//! Each oracle here deliberately avoids the implementation path it checks:
//! the hull oracle tests extremality by exhaustive convex-combination
//! search, the clustering oracle enumerates every partition, and the
//! Jacobian oracle differentiates the velocity field numerically.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{self, ControllerConfig, Reference};
use crate::dynamics::{self, EvaderModel, WorldState};
use crate::geometry::{self, Point2, EPS_GEO};
use crate::scalar::Real;
use crate::simulator::{self, SimConfig};
use crate::{assignment, clustering};

/// Outcome of one named property check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

// ---------------------------------------------------------------------------
// Convex hull oracle

fn dist_point_segment<T: Real>(q: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let e = b - a;
    let len_sq = e.norm_sq();
    if len_sq == T::zero() {
        return q.dist(a);
    }
    let t = ((q - a).dot(e) / len_sq).clamp(T::zero(), T::one());
    q.dist(a + e.scaled(t))
}

fn line_offset<T: Real>(a: Point2<T>, b: Point2<T>, q: Point2<T>) -> T {
    let e = b - a;
    let len = e.norm();
    if len == T::zero() {
        return q.dist(a);
    }
    e.cross(q - a) / len
}

/// Extreme points by brute force: a point stays iff it is not a convex
/// combination of the others. Containment in the others' hull is tested by
/// scanning segments and non-degenerate triangles, which by Caratheodory's
/// theorem covers every convex combination in the plane. Exact duplicates
/// are collapsed to their first occurrence to mirror the hull contract.
pub fn extreme_points_bruteforce<T: Real>(points: &[Point2<T>]) -> Vec<usize> {
    let eps = T::of(EPS_GEO);
    let mut unique: Vec<usize> = Vec::new();
    for i in 0..points.len() {
        if !unique.iter().any(|&u| points[u] == points[i]) {
            unique.push(i);
        }
    }

    let mut extremes = Vec::new();
    'candidates: for (pos, &qi) in unique.iter().enumerate() {
        let q = points[qi];
        let others: Vec<Point2<T>> = unique
            .iter()
            .enumerate()
            .filter(|&(o, _)| o != pos)
            .map(|(_, &i)| points[i])
            .collect();
        for a in 0..others.len() {
            for b in a + 1..others.len() {
                if dist_point_segment(q, others[a], others[b]) <= eps {
                    continue 'candidates;
                }
                for c in b + 1..others.len() {
                    // Skip degenerate triangles; segments cover them.
                    if line_offset(others[a], others[b], others[c]).abs() <= eps {
                        continue;
                    }
                    let s1 = line_offset(others[a], others[b], q);
                    let s2 = line_offset(others[b], others[c], q);
                    let s3 = line_offset(others[c], others[a], q);
                    let inside_ccw = s1 >= -eps && s2 >= -eps && s3 >= -eps;
                    let inside_cw = s1 <= eps && s2 <= eps && s3 <= eps;
                    if inside_ccw || inside_cw {
                        continue 'candidates;
                    }
                }
            }
        }
        extremes.push(qi);
    }
    extremes.sort_unstable();
    extremes
}

/// Random point cloud in a disc of the given radius.
pub fn disc_points<T: Real>(rng: &mut impl Rng, count: usize, radius: f64) -> Vec<Point2<T>> {
    (0..count)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            let a = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            Point2::new(T::of(r * a.cos()), T::of(r * a.sin()))
        })
        .collect()
}

/// Compare Quickhull against the brute-force oracle on random discs.
/// Returns the number of mismatching instances.
pub fn hull_oracle_failures(instances: usize, max_points: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..instances {
        let count = rng.gen_range(3..=max_points);
        let points = disc_points::<f64>(&mut rng, count, 10.0);
        let mut hull = geometry::convex_hull(&points)
            .expect("finite non-empty input")
            .vertex_indices()
            .to_vec();
        hull.sort_unstable();
        if hull != extreme_points_bruteforce(&points) {
            failures += 1;
        }
    }
    failures
}

// ---------------------------------------------------------------------------
// K-means oracle

/// Exhaustive minimum of the K-means objective over every partition of
/// `points` into `k` non-empty clusters.
pub fn kmeans_exhaustive_optimum<T: Real>(points: &[Point2<T>], k: usize) -> T {
    let n = points.len();
    let mut best: Option<T> = None;
    'outer: for code in 0..k.pow(n as u32) {
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
        if counts.iter().any(|&c| c == 0) {
            continue 'outer;
        }
        let mut cost = T::zero();
        for cluster in 0..k {
            let mut mean = Point2::zero();
            for i in 0..n {
                if assignment[i] == cluster {
                    mean = mean + points[i];
                }
            }
            mean = mean.scaled(T::one() / T::of(counts[cluster] as f64));
            for i in 0..n {
                if assignment[i] == cluster {
                    cost += points[i].dist(mean).powi(2);
                }
            }
        }
        if best.is_none() || Some(cost) < best {
            best = Some(cost);
        }
    }
    best.unwrap_or_else(T::zero)
}

/// Statistics of K-means against the exhaustive optimum on small instances.
pub struct KmeansOracleStats {
    pub total: usize,
    pub optimal_hits: usize,
    /// Largest cost excess over the optimum, as a ratio.
    pub worst_excess: f64,
}

pub fn kmeans_oracle_stats(instances: usize, seed: u64) -> KmeansOracleStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    let mut worst = 0.0f64;
    for i in 0..instances {
        let n = rng.gen_range(3..=8);
        let k = rng.gen_range(1..=3.min(n));
        let points: Vec<Point2<f64>> = (0..n)
            .map(|_| Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
            .collect();
        let result = clustering::kmeans(&points, k, seed.wrapping_add(i as u64))
            .expect("valid instance");
        let optimum = kmeans_exhaustive_optimum(&points, k);
        if result.cost() <= optimum * (1.0 + 1e-9) + 1e-12 {
            hits += 1;
        } else if optimum > 0.0 {
            worst = worst.max(result.cost() / optimum - 1.0);
        }
    }
    KmeansOracleStats {
        total: instances,
        optimal_hits: hits,
        worst_excess: worst,
    }
}

// ---------------------------------------------------------------------------
// Jacobian finite-difference oracle

fn stacked_selected_velocities<T: Real>(selected: &[usize], w: &WorldState<T>) -> DVector<T> {
    let mut out = DVector::zeros(2 * selected.len());
    for (row, &j) in selected.iter().enumerate() {
        let v = dynamics::evader_velocity(j, w).expect("valid state");
        out[2 * row] = v.x;
        out[2 * row + 1] = v.y;
    }
    out
}

/// Central finite differences of the selected evaders' velocities with
/// respect to the herder coordinates.
pub fn jacobian_u_fd<T: Real>(selected: &[usize], w: &WorldState<T>, step: f64) -> DMatrix<T> {
    let h = T::of(step);
    let p = selected.len();
    let n = w.herders.len();
    let mut jac = DMatrix::zeros(2 * p, 2 * n);
    for i in 0..n {
        for axis in 0..2 {
            let mut plus = w.clone();
            let mut minus = w.clone();
            if axis == 0 {
                plus.herders[i].x += h;
                minus.herders[i].x -= h;
            } else {
                plus.herders[i].y += h;
                minus.herders[i].y -= h;
            }
            let df = (stacked_selected_velocities(selected, &plus)
                - stacked_selected_velocities(selected, &minus))
                / (T::of(2.0) * h);
            jac.set_column(2 * i + axis, &df);
        }
    }
    jac
}

/// Central finite differences of `h` (velocity plus `f_gain` times position;
/// the reference terms are constants and cancel in the difference) with
/// respect to the selected evaders' own coordinates.
pub fn jacobian_x_fd<T: Real>(
    selected: &[usize],
    w: &WorldState<T>,
    f_gain: T,
    step: f64,
) -> DMatrix<T> {
    let h = T::of(step);
    let p = selected.len();
    let mut jac = DMatrix::zeros(2 * p, 2 * p);
    let eval = |w: &WorldState<T>| -> DVector<T> {
        let mut out = stacked_selected_velocities(selected, w);
        for (row, &j) in selected.iter().enumerate() {
            out[2 * row] += f_gain * w.evaders[j].x;
            out[2 * row + 1] += f_gain * w.evaders[j].y;
        }
        out
    };
    for (col, &j) in selected.iter().enumerate() {
        for axis in 0..2 {
            let mut plus = w.clone();
            let mut minus = w.clone();
            if axis == 0 {
                plus.evaders[j].x += h;
                minus.evaders[j].x -= h;
            } else {
                plus.evaders[j].y += h;
                minus.evaders[j].y -= h;
            }
            let df = (eval(&plus) - eval(&minus)) / (T::of(2.0) * h);
            jac.set_column(2 * col + axis, &df);
        }
    }
    jac
}

/// Worst entry mismatch between two matrices, relative to `max(1, |b|)`.
pub fn max_relative_mismatch<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let denom = T::one().max(y.abs());
        worst = worst.max((*x - *y).abs() / denom);
    }
    worst
}

/// Random world with a minimum pairwise separation, so the finite-difference
/// stencil stays far from the repulsion singularities.
pub fn random_separated_world<T: Real>(
    rng: &mut impl Rng,
    m: usize,
    n: usize,
    exponential: bool,
) -> WorldState<T> {
    let model = if exponential {
        EvaderModel::exponential(T::of(0.5), T::of(2.0), T::of(10.0), T::of(2e-4)).unwrap()
    } else {
        EvaderModel::inverse(T::of(1.2), T::of(2e-4)).unwrap()
    };
    loop {
        let all: Vec<Point2<T>> = (0..m + n)
            .map(|_| {
                Point2::new(
                    T::of(rng.gen_range(-10.0..10.0)),
                    T::of(rng.gen_range(-10.0..10.0)),
                )
            })
            .collect();
        let mut ok = true;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if all[i].dist(all[j]) < T::of(0.5) {
                    ok = false;
                }
            }
        }
        if ok {
            let evaders = all[..m].to_vec();
            let herders = all[m..].to_vec();
            return WorldState::new(evaders, herders, vec![model; m], T::zero()).unwrap();
        }
    }
}

/// Worst analytic-vs-finite-difference mismatch over random states.
pub fn jacobian_suite(states: usize, exponential: bool, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..states {
        let m = rng.gen_range(3..=7);
        let n = rng.gen_range(2..=4);
        let w: WorldState<f64> = random_separated_world(&mut rng, m, n, exponential);
        let p = n.min(m);
        let selected: Vec<usize> = (0..p).collect();
        let ju = dynamics::jacobian_u(&selected, &w).unwrap();
        let ju_fd = jacobian_u_fd(&selected, &w, 1e-6);
        worst = worst.max(max_relative_mismatch(&ju, &ju_fd));
        let jx = dynamics::jacobian_x(&selected, &w, 0.25).unwrap();
        let jx_fd = jacobian_x_fd(&selected, &w, 0.25, 1e-6);
        worst = worst.max(max_relative_mismatch(&jx, &jx_fd));
    }
    worst
}

// ---------------------------------------------------------------------------
// h-decay probe

/// Fitted decay rate of `|h|` in a one-evader/one-herder closed loop.
///
/// Runs an inverse-model scenario at a small time step, finds the longest
/// window where no agent saturates, and fits an exponential to `|h|` over
/// its first two decades. Returns `(fitted_rate, h_gain)`.
pub fn h_decay_fit() -> (f64, f64) {
    let mut cfg: SimConfig<f64> = SimConfig::default();
    cfg.m = 1;
    cfg.n = 1;
    cfg.dt = 1e-3;
    cfg.t_end = 30.0;
    cfg.controller.f_gain = 0.05;
    cfg.controller.h_gain = 10.0;
    cfg.reference.x_star = Point2::new(0.0, 0.0);
    cfg.reference.t_switch = 1e6;

    let ctrl = cfg.controller_config().unwrap();
    let model = cfg.inverse_model().unwrap();
    let mut w = WorldState::new(
        vec![Point2::new(0.5, 0.0)],
        vec![Point2::new(2.0, 0.0)],
        vec![model],
        0.0,
    )
    .unwrap();

    let mut samples: Vec<(f64, f64, bool)> = Vec::new();
    for k in 0..30_000usize {
        let a = assignment::assign(&w, 1, cfg.seed).unwrap();
        let reference = simulator::reference_at(w.time, &cfg).unwrap();
        let h = controller::h_value(&a.selected, &w, &reference, &ctrl).unwrap();
        let saturated = saturation_of(&a.selected, &w, &reference, &ctrl, cfg.v_max);
        samples.push((w.time, h.norm(), saturated));
        w = simulator::step(&w, &cfg).unwrap();
        w.time = cfg.dt * (k + 1) as f64;
    }

    // Longest unsaturated stretch with a usable |h|.
    let mut best: (usize, usize) = (0, 0);
    let mut start = None;
    for (k, &(_, hn, sat)) in samples.iter().enumerate() {
        if !sat && hn > 1e-12 {
            if start.is_none() {
                start = Some(k);
            }
        } else if let Some(s) = start.take() {
            if k - s > best.1 - best.0 {
                best = (s, k);
            }
        }
    }
    if let Some(s) = start {
        if samples.len() - s > best.1 - best.0 {
            best = (s, samples.len());
        }
    }

    let h_start = samples[best.0].1;
    let fit: Vec<(f64, f64)> = samples[best.0..best.1]
        .iter()
        .take_while(|&&(_, hn, _)| hn >= h_start * 5e-3)
        .map(|&(t, hn, _)| (t, hn.ln()))
        .collect();
    let rate = -linear_slope(&fit);
    (rate, cfg.controller.h_gain)
}

fn saturation_of(
    selected: &[usize],
    w: &WorldState<f64>,
    reference: &Reference<f64>,
    ctrl: &ControllerConfig<f64>,
    v_max: f64,
) -> bool {
    let udot = match controller::herder_velocity_update(selected, w, reference, ctrl) {
        Ok(u) => u,
        Err(_) => return true,
    };
    if udot.iter().any(|v| v.norm() > v_max) {
        return true;
    }
    dynamics::herd_velocity(w)
        .map(|vs| vs.iter().any(|v| v.norm() > v_max))
        .unwrap_or(true)
}

fn linear_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return 0.0;
    }
    let mean_t = samples.iter().map(|&(t, _)| t).sum::<f64>() / n;
    let mean_y = samples.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, y) in samples {
        num += (t - mean_t) * (y - mean_y);
        den += (t - mean_t) * (t - mean_t);
    }
    num / den
}

// ---------------------------------------------------------------------------
// Suite

/// Run every self-check and collect one line per property.
pub fn run_all_checks() -> Vec<Check> {
    let mut checks = Vec::new();

    let stable = controller::check_stability(0.25f64, 50.0, 1);
    let unstable = !controller::check_stability(0.1f64, 0.1, 1);
    checks.push(Check::new(
        "stability gate (0.25/50 stable, 0.1/0.1 not)",
        stable && unstable,
        format!("stable={stable} unstable_rejected={unstable}"),
    ));

    let hull_failures = hull_oracle_failures(200, 60, 424242);
    checks.push(Check::new(
        "convex hull vs brute-force extreme points (200 instances)",
        hull_failures == 0,
        format!("{hull_failures} mismatching instances"),
    ));

    let km = kmeans_oracle_stats(100, 90210);
    checks.push(Check::new(
        "k-means vs exhaustive optimum (100 instances)",
        km.optimal_hits * 100 >= km.total * 95 && km.worst_excess <= 0.05,
        format!(
            "{}/{} optimal, worst excess {:.2}%",
            km.optimal_hits,
            km.total,
            km.worst_excess * 100.0
        ),
    ));

    for (name, exponential) in [("inverse", false), ("exponential", true)] {
        let worst = jacobian_suite(100, exponential, 7 + exponential as u64);
        checks.push(Check::new(
            &format!("jacobians vs central differences ({name}, 100 states)"),
            worst < 1e-5,
            format!("max relative mismatch {worst:.3e}"),
        ));
    }

    let (rate, h_gain) = h_decay_fit();
    let rel = (rate - h_gain).abs() / h_gain;
    checks.push(Check::new(
        "h decays at the configured rate (1 evader / 1 herder)",
        rel <= 0.2,
        format!("fitted rate {rate:.3} vs h_gain {h_gain} ({:.1}% off)", rel * 100.0),
    ));

    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bruteforce_oracle_on_known_shapes() {
        let square_plus_center = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        assert_eq!(extreme_points_bruteforce(&square_plus_center), vec![0, 1, 2, 3]);

        let collinear = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 2.0),
        ];
        assert_eq!(extreme_points_bruteforce(&collinear), vec![0, 2]);

        let with_duplicate = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 2.0),
        ];
        assert_eq!(extreme_points_bruteforce(&with_duplicate), vec![0, 1, 3]);
    }

    #[test]
    fn hull_matches_oracle_on_disc_sample() {
        assert_eq!(hull_oracle_failures(30, 60, 1234), 0);
    }

    #[test]
    fn mutated_jacobian_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let w: WorldState<f64> = random_separated_world(&mut rng, 4, 2, false);
        let selected = [0, 1];
        let good = dynamics::jacobian_u(&selected, &w).unwrap();
        let fd = jacobian_u_fd(&selected, &w, 1e-6);
        assert!(max_relative_mismatch(&good, &fd) < 1e-5);
        let flipped = -good;
        assert!(max_relative_mismatch(&flipped, &fd) > 1e-3);
    }

    #[test]
    fn kmeans_oracle_smoke() {
        let stats = kmeans_oracle_stats(20, 5);
        assert!(stats.optimal_hits * 100 >= stats.total * 95);
        assert!(stats.worst_excess <= 0.05);
    }

    #[test]
    fn h_decay_matches_gain() {
        let (rate, h_gain) = h_decay_fit();
        assert!(
            (rate - h_gain).abs() <= 0.2 * h_gain,
            "fitted rate {rate} vs h_gain {h_gain}"
        );
    }
}

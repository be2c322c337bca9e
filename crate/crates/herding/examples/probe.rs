//! Temporary diagnostic: dump controller internals along a run.
//! Usage: probe <m> <n> <x*_x> <x*_y> <t_max> [print_dt]

use herding::{assignment, controller, dynamics, geometry, simulator, SimConfig};
use nalgebra::SVD;

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let mut cfg = SimConfig::default();
    cfg.m = args[0] as usize;
    cfg.n = args[1] as usize;
    cfg.reference.x_star = herding::Point2::new(args[2], args[3]);
    let t_max = args[4];
    let print_every = (args.get(5).copied().unwrap_or(5.0) / cfg.dt) as usize;

    let ctrl = cfg.controller_config().unwrap();
    let mut w = simulator::initialize(&cfg).unwrap();
    for k in 0..(t_max / cfg.dt) as usize {
        let a = assignment::assign(&w, cfg.n, cfg.seed).unwrap();
        let reference = simulator::reference_at(w.time, &cfg).unwrap();
        let h = controller::h_value(&a.selected, &w, &reference, &ctrl).unwrap();
        let udot = controller::herder_velocity_update(&a.selected, &w, &reference, &ctrl).unwrap();
        let ju = dynamics::jacobian_u(&a.selected, &w).unwrap();
        let svd = SVD::new(ju, false, false);

        if k % print_every == 0 {
            let c = geometry::centroid(&w.evaders).unwrap();
            let spread = w.evaders.iter().map(|e| e.dist(c)).fold(0.0f64, f64::max);
            let standoffs: Vec<f64> = w
                .herders
                .iter()
                .map(|&u| {
                    w.evaders
                        .iter()
                        .map(|e| e.dist(u))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let udirs: Vec<(f64, f64)> = udot
                .iter()
                .map(|v| {
                    let n = v.norm().max(1e-30);
                    ((v.x / n * 100.0).round() / 100.0, (v.y / n * 100.0).round() / 100.0)
                })
                .collect();
            println!(
                "t={:6.1} c=({:7.2},{:6.2}) dev={:6.2} |h|={:9.3} cond={:8.1e} so={:?} udir={:?} sel={:?} H={:?}",
                w.time,
                c.x,
                c.y,
                spread,
                h.norm(),
                svd.singular_values.max() / svd.singular_values.min(),
                standoffs.iter().map(|d| (d * 10.0).round() / 10.0).collect::<Vec<_>>(),
                udirs,
                a.selected,
                w.herders
                    .iter()
                    .map(|p| ((p.x * 10.0).round() / 10.0, (p.y * 10.0).round() / 10.0))
                    .collect::<Vec<_>>(),
            );
        }
        w = simulator::step(&w, &cfg).unwrap();
    }
}

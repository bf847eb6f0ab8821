use std::time::Instant;

use qqlab_core::smp::{algorithm_targets, config_for_target, optimize, OptimizerConfig};
use qqlab_core::spin::SpinSystem;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_blocks: usize = args.get(1).map_or(8, |s| s.parse().unwrap());
    let max_evals: usize = args.get(2).map_or(12_000, |s| s.parse().unwrap());
    let n_restarts: usize = args.get(3).map_or(4, |s| s.parse().unwrap());
    let stop: f64 = args.get(4).map_or(0.9995, |s| s.parse().unwrap());
    let only: Option<usize> = args.get(5).map(|s| s.parse().unwrap());
    let sys = SpinSystem::sodium();
    let cfg = OptimizerConfig { n_blocks, max_evals, n_restarts, stop_fidelity: stop, ..Default::default() };
    let all = Instant::now();
    for (i, t) in algorithm_targets().unwrap().iter().enumerate() {
        if only.is_some_and(|o| o != i) {
            continue;
        }
        let start = Instant::now();
        let r = optimize(t, &sys, &config_for_target(&cfg, i)).unwrap();
        println!(
            "{:>16} F={:.6} evals={:>6} {:?} {:.1}s",
            t.label,
            r.achieved_fidelity,
            r.evals_used,
            r.restart_fidelities.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
            start.elapsed().as_secs_f64()
        );
    }
    println!("total {:.1}s", all.elapsed().as_secs_f64());
}

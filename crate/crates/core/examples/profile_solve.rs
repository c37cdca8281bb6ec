use plateau::rover::{default_spec, generate, RewardVariant};
use plateau::solver::{bellman_backup, SolveOptions, ValueFunction};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let resolution: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(25);
    let cap: Option<usize> = args.get(2).map(|s| s.parse().unwrap());
    let mut spec = default_spec(2, resolution, RewardVariant::Pwc);
    spec.max_outcomes = cap;
    let m = generate(&spec).unwrap();
    let mut v = ValueFunction::zero(&m);
    let opts = SolveOptions::default();
    for stage in 0..6 {
        let t = Instant::now();
        v = bellman_backup(&v, &m, &opts).unwrap();
        println!(
            "2D res {resolution} cap {cap:?} stage {}: {:.2}s leaves {} vectors {}",
            stage + 1,
            t.elapsed().as_secs_f64(),
            (0..m.num_states()).map(|s| v.partition(s).leaf_count()).sum::<usize>(),
            v.vectors()
        );
    }
}

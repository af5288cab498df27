//! Construct-then-refine inference against the greedy and brute-force
//! baselines on small TSPTW instances.

use routecraft::bench::{bench, Method, SolveOptions};
use routecraft::instances::{generate_dataset, GenParams, Variant};
use routecraft::trainer::{Profile, TrainConfig, Trainer};

fn main() -> routecraft::Result<()> {
    let mut cfg = TrainConfig::new(Variant::TsptwHard, Profile::Desk);
    cfg.n = 9;
    cfg.max_steps = 40;
    cfg.warmup_epochs = 0;
    let mut t = Trainer::new(cfg.clone())?;
    t.run::<Vec<u8>>(None, None)?;

    let data = generate_dataset(&GenParams::new(Variant::TsptwHard), 9, 30, 77)?;
    let opts = SolveOptions::from_config(&cfg);
    let brute = bench(&data, Method::Brute, None, &opts, None)?;
    let reference = brute.objectives();
    println!("{}", brute.summary());
    for m in [Method::GreedyL, Method::GreedyC, Method::ConstructOnly, Method::Car] {
        let policy = m.needs_policy().then_some(&t.policy);
        println!("{}", bench(&data, m, policy, &opts, Some(&reference))?.summary());
    }
    Ok(())
}

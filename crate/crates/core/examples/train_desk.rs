//! A short desk-profile training run on TSPTW-Hard with a CSV trace.
//!
//! ```bash
//! cargo run --release --example train_desk -- 300
//! ```

use routecraft::instances::Variant;
use routecraft::trainer::{Profile, TraceWriter, TrainConfig, Trainer};

fn main() -> routecraft::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let mut cfg = TrainConfig::new(Variant::TsptwHard, Profile::Desk);
    cfg.max_steps = steps;
    cfg.warmup_epochs = 0;
    cfg.instances_per_epoch = 64;
    let mut trainer = Trainer::new(cfg.clone())?;
    println!("{} parameters, {} steps", trainer.policy.param_count(), cfg.total_steps());
    let mut trace = TraceWriter::new(Vec::new(), &cfg)?;
    let hist = trainer.run(Some(&mut trace), None)?;
    for b in hist.iter().step_by((steps / 6).max(1)) {
        println!(
            "step {:>4}: loss {:>9.3}  reward {:>8.3}  infeasible {:.2}  improved {:.2}",
            b.step, b.total, b.mean_reward, b.infeasible, b.improved
        );
    }
    let text = String::from_utf8(trace.into_inner()?).expect("utf8");
    println!("trace: {} lines", text.lines().count());
    Ok(())
}

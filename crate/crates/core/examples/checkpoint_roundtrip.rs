//! Save a policy, read its manifest back and reject a mismatched variant.

use routecraft::instances::Variant;
use routecraft::policy::{Policy, PolicyConfig};
use routecraft::tourops::Operator;

fn main() -> routecraft::Result<()> {
    let policy = Policy::new(PolicyConfig::desk(Variant::Cvrpbltw, Operator::Rr), 3)?;
    let path = std::env::temp_dir().join("routecraft-example.ckpt");
    policy.save(&path)?;
    let back = Policy::load(&path)?;
    assert_eq!(back.store.values(), policy.store.values());
    println!("{}", routecraft::cli::inspect(&path)?);
    match back.check_variant(Variant::TsptwHard) {
        Err(e) => println!("guard: {e}"),
        Ok(()) => unreachable!(),
    }
    let full = Policy::new(PolicyConfig::full(Variant::TsptwHard, Operator::Kopt), 0)?;
    println!("full-profile k-opt policy: {} parameters", full.param_count());
    Ok(())
}

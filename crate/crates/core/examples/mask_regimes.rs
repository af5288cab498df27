//! Compare the three masking regimes along random CVRPBLTW rollouts and
//! stream the per-step masked counts as CSV.

use rand::seq::IndexedRandom;

use routecraft::feaseval::{fallback_node, step_mask, ConstructState, MaskMode, MaskTrace, PenaltyConfig};
use routecraft::instances::{generate, GenParams, Variant};
use routecraft::rng;

fn main() -> routecraft::Result<()> {
    let inst = generate(&GenParams::new(Variant::Cvrpbltw), 50, 11)?;
    let pen = PenaltyConfig::default();
    let mut rng = rng::stream(1, 0);
    let mut trace = MaskTrace::new(Vec::new())?;
    let mut st = ConstructState::new(&inst);
    let mut totals = [0usize; 3];
    while !st.is_done(&inst) {
        let masks: Vec<_> = [MaskMode::None, MaskMode::Relaxed, MaskMode::Strict].iter().map(|&m| step_mask(&inst, &st, m)).collect();
        for (t, m) in totals.iter_mut().zip(&masks) {
            *t += m.masked_count;
        }
        trace.record(st.steps(), &masks[2], MaskMode::Strict)?;
        let open: Vec<usize> = masks[2].selectable().collect();
        let next = match open.choose(&mut rng) {
            Some(&j) => j,
            None => fallback_node(&inst, &st, &pen).expect("customers remain"),
        };
        st.apply(&inst, next)?;
    }
    let steps = st.steps() as f64;
    let nodes = inst.num_nodes() as f64;
    for (m, t) in ["none", "relaxed", "strict"].iter().zip(totals) {
        println!("{m:>8}: mean masked fraction {:.3}", t as f64 / steps / nodes);
    }
    let csv = String::from_utf8(trace.finish()?).expect("utf8");
    println!("\n{}", csv.lines().take(6).collect::<Vec<_>>().join("\n"));
    Ok(())
}

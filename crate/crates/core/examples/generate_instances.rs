//! Generate a small dataset for every variant and write it as JSON lines.
//!
//! ```bash
//! cargo run --example generate_instances -- /tmp/routecraft-data
//! ```

use std::path::PathBuf;

use routecraft::instances::{generate_dataset, load_instances, save_instances, GenParams, Variant};

fn main() -> routecraft::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir).expect("output directory");
    for v in Variant::ALL {
        let data = generate_dataset(&GenParams::new(v), 20, 5, 2023)?;
        let path = dir.join(format!("{v}_n20.jsonl"));
        save_instances(&data, &path)?;
        let back = load_instances(&path)?;
        assert_eq!(back, data);
        let first = &data[0];
        println!(
            "{v:>12}: {} instances, {} nodes, horizon {:.3}, total demand {:.0} -> {}",
            data.len(),
            first.num_nodes(),
            first.time_horizon(),
            first.total_demand(),
            path.display()
        );
    }
    Ok(())
}

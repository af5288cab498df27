//! Command-line surface: `generate`, `train`, `solve`, `bench`, `inspect`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{bench, read_reference, solve, write_reference, BenchRow, Method, SolveOptions};
use crate::error::{Error, Result};
use crate::instances::{generate_dataset, load_cvrplib, load_instances, save_instances, GenParams, Instance, Variant};
use crate::policy::{parse_manifest, Policy};
use crate::trainer::{checkpoint_path, Profile, TraceWriter, TrainConfig, Trainer};

#[derive(Debug, Parser)]
#[command(name = "routecraft", version, about = "Construct-and-refine solver for constrained routing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat TOML run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write generated instances as JSON lines.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Train a policy; `--out` is the run directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<Variant>,
        /// Stop after this many steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Solve every instance of a file with a checkpoint.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        refine_steps: Option<usize>,
    },
    /// Run a method over a dataset and report Obj/Gap/Infsb%/Time.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Per-instance rows CSV.
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Write this run's objectives as a reference file.
        #[arg(long)]
        write_ref: Option<PathBuf>,
    },
    /// Print a checkpoint manifest or an instance-file summary.
    Inspect {
        #[command(flatten)]
        common: Common,
        path: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn config_for(common: &Common, variant: Option<Variant>) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::new(variant.unwrap_or(Variant::TsptwHard), Profile::Desk),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_data(path: &Path) -> Result<Vec<Instance>> {
    let is_vrp = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("vrp"));
    if is_vrp {
        Ok(vec![load_cvrplib(path)?])
    } else {
        load_instances(path)
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn flush(mut w: Box<dyn Write>) -> Result<()> {
    w.flush().map_err(|e| Error::Config(format!("write failed: {e}")))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, variant, n, count } => {
            let cfg = common.config.as_ref().map(|p| TrainConfig::load(p)).transpose()?;
            let variant = variant
                .or(cfg.as_ref().map(|c| c.variant))
                .ok_or_else(|| Error::Argument("generate needs --variant or a config".into()))?;
            let n = n.or(cfg.as_ref().map(|c| c.n)).unwrap_or(20);
            let seed = common.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(2023);
            let data = generate_dataset(&GenParams::new(variant), n, count, seed)?;
            let out = common.out.ok_or_else(|| Error::Argument("generate needs --out".into()))?;
            save_instances(&data, &out)?;
            eprintln!("wrote {count} {variant} instances (n = {n}) to {}", out.display());
        }
        Command::Train { common, variant, steps } => {
            let mut cfg = config_for(&common, variant)?;
            if let Some(s) = steps {
                cfg.max_steps = s;
            }
            cfg.validate()?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from("run"));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut trace = TraceWriter::new(create(&dir.join("trace.csv"))?, &cfg)?;
            let mut t = Trainer::new(cfg)?;
            let hist = t.run(Some(&mut trace), Some(&dir))?;
            trace.into_inner()?.flush().map_err(|e| Error::io(dir.join("trace.csv"), e))?;
            let last = checkpoint_path(&dir, t.step);
            t.policy.save(&dir.join("policy.ckpt"))?;
            if let Some(b) = hist.last() {
                eprintln!("trained {} steps, last loss {:.4}, mean reward {:.4}; checkpoint {}", t.step, b.total, b.mean_reward, last.display());
            }
        }
        Command::Solve { common, checkpoint, data, refine_steps } => {
            let policy = Policy::load(&checkpoint)?;
            let instances = load_data(&data)?;
            let mut cfg = config_for(&common, Some(policy.config.variant))?;
            cfg.variant = policy.config.variant;
            let mut opts = SolveOptions::from_config(&cfg);
            if let Some(r) = refine_steps {
                opts.refine_steps = r;
            }
            let mut w = csv::Writer::from_writer(sink(common.out.as_deref())?);
            for (k, inst) in instances.iter().enumerate() {
                let t = std::time::Instant::now();
                let r = solve(&policy, inst, &opts, k)?;
                let row = BenchRow {
                    index: k,
                    objective: r.report.feasible.then_some(r.report.length),
                    relaxed_cost: r.report.relaxed_cost,
                    feasible: r.report.feasible,
                    time_s: t.elapsed().as_secs_f64(),
                    solution: r.solution.to_visit_string(inst),
                };
                w.serialize(row).map_err(|e| Error::Config(e.to_string()))?;
            }
            flush(w.into_inner().map_err(|e| Error::Config(e.to_string()))?)?;
        }
        Command::Bench { common, method, data, reference, checkpoint, rows, write_ref } => {
            let instances = load_data(&data)?;
            let policy = checkpoint.as_deref().map(Policy::load).transpose()?;
            if method.needs_policy() && policy.is_none() {
                return Err(Error::Argument(format!("method {method} needs --checkpoint")));
            }
            let variant = instances.first().map(|i| i.variant);
            let cfg = config_for(&common, variant)?;
            let opts = SolveOptions::from_config(&cfg);
            let reference = match reference {
                Some(p) => Some(read_reference(File::open(&p).map_err(|e| Error::io(&p, e))?)?),
                None => None,
            };
            let report = bench(&instances, method, policy.as_ref(), &opts, reference.as_deref())?;
            let out = sink(common.out.as_deref())?;
            report.write_summary_csv(out)?;
            if let Some(p) = rows {
                report.write_rows_csv(create(&p)?)?;
            }
            if let Some(p) = write_ref {
                write_reference(create(&p)?, &report.objectives())?;
            }
            eprintln!("{}", report.summary());
        }
        Command::Inspect { common, path } => {
            let mut out = sink(common.out.as_deref())?;
            let text = inspect(&path)?;
            writeln!(out, "{text}").map_err(|e| Error::Config(e.to_string()))?;
            flush(out)?;
        }
    }
    Ok(())
}

/// Checkpoint manifest, or a per-variant summary of an instance file.
pub fn inspect(path: &Path) -> Result<String> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first).map_err(|e| Error::io(path, e))?;
    if first.contains("\"format\"") {
        let m = parse_manifest(first.trim_end())?;
        return serde_json::to_string_pretty(&m).map_err(|e| Error::Manifest(e.to_string()));
    }
    let data = load_data(path)?;
    let mut lines = vec![format!("{}: {} instances", path.display(), data.len())];
    let mut by: std::collections::BTreeMap<(Variant, usize), usize> = Default::default();
    for i in &data {
        *by.entry((i.variant, i.n)).or_default() += 1;
    }
    for ((v, n), c) in by {
        lines.push(format!("  {v} n={n}: {c}"));
    }
    Ok(lines.join("\n"))
}

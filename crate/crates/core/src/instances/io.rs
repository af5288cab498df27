//! Line-delimited instance files: one JSON object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Instance;
use crate::error::{Error, Result};

pub fn write_instances<W: Write>(mut out: W, instances: &[Instance]) -> std::io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_instances(instances: &[Instance], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_instances(BufWriter::new(file), instances).map_err(|e| Error::io(path, e))
}

/// Parses records from a reader; blank lines are skipped. Line numbers in
/// errors are 1-based.
pub fn parse_instances<R: BufRead>(reader: R) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(&line).map_err(|e| {
            let msg = e.to_string();
            // serde reports absent required keys as data errors; surface them
            // as schema problems rather than syntax problems.
            if msg.starts_with("missing field") || msg.starts_with("unknown field") {
                Error::Schema { line: lineno, msg }
            } else {
                Error::Parse { line: lineno, msg }
            }
        })?;
        inst.validate(lineno)?;
        out.push(inst);
    }
    Ok(out)
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<Instance>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_instances(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenParams, Variant};

    #[test]
    fn round_trip_is_exact() {
        let insts: Vec<Instance> = (0..100)
            .map(|s| generate(&GenParams::new(Variant::Cvrp), 50, s * 7919 + 1).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_instances(&mut buf, &insts).unwrap();
        let back = parse_instances(buf.as_slice()).unwrap();
        assert_eq!(insts, back);
    }

    #[test]
    fn round_trip_all_variants() {
        let insts: Vec<Instance> = Variant::ALL
            .iter()
            .map(|&v| generate(&GenParams::new(v), 30, u64::MAX - 3).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_instances(&mut buf, &insts).unwrap();
        assert_eq!(parse_instances(buf.as_slice()).unwrap(), insts);
    }

    #[test]
    fn missing_capacity_is_schema_error() {
        let inst = generate(&GenParams::new(Variant::Cvrp), 5, 1).unwrap();
        let mut v = serde_json::to_value(&inst).unwrap();
        v.as_object_mut().unwrap().remove("capacity");
        let text = format!("{}\n", v);
        match parse_instances(text.as_bytes()) {
            Err(Error::Schema { line: 1, msg }) => assert!(msg.contains("capacity"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn inverted_window_is_invariant_error() {
        let mut inst = generate(&GenParams::new(Variant::TsptwHard), 5, 1).unwrap();
        let tw = inst.tw.as_mut().unwrap();
        tw[2] = [0.8, 0.3];
        let mut buf = Vec::new();
        write_instances(&mut buf, &[inst]).unwrap();
        assert!(matches!(parse_instances(buf.as_slice()), Err(Error::Invariant(_))));
    }

    #[test]
    fn malformed_record_reports_line() {
        let good = generate(&GenParams::new(Variant::Cvrp), 5, 1).unwrap();
        let mut text = serde_json::to_string(&good).unwrap();
        text.push_str("\n{\"variant\": \"cvrp\", \"n\": \n");
        assert!(matches!(parse_instances(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn foreign_field_is_schema_error() {
        let mut inst = generate(&GenParams::new(Variant::TsptwHard), 5, 1).unwrap();
        inst.capacity = Some(10);
        let mut buf = Vec::new();
        write_instances(&mut buf, &[inst]).unwrap();
        assert!(matches!(parse_instances(buf.as_slice()), Err(Error::Schema { .. })));
    }
}

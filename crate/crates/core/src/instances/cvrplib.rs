//! Reader for CVRPLIB `.vrp` files in the X-instance layout.

use std::path::Path;

use super::{Instance, Variant};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Coords,
    Demand,
    Depot,
}

pub fn load_cvrplib(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cvrplib(&text)
}

/// Parses X-format text. Coordinates are min-max scaled into the unit square
/// with a common factor so the aspect ratio is kept; the depot becomes node 0.
pub fn parse_cvrplib(text: &str) -> Result<Instance> {
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<u32> = None;
    let mut coords: Vec<Option<[f64; 2]>> = Vec::new();
    let mut demand: Vec<Option<u32>> = Vec::new();
    let mut depots: Vec<usize> = Vec::new();
    let mut seen_demand = false;
    let mut seen_coords = false;
    let mut seen_depot = false;
    let mut section = Section::Header;
    let mut last_line = 0;

    let perr = |line: usize, msg: String| Error::Parse { line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let first = t.split_whitespace().next().unwrap_or("");
        let numeric = first.parse::<f64>().is_ok();
        if !numeric {
            let key = first.trim_end_matches(':').to_ascii_uppercase();
            let value = t.split_once(':').map(|(_, v)| v.trim());
            match key.as_str() {
                "NAME" | "COMMENT" | "TYPE" | "EDGE_WEIGHT_TYPE" => {}
                "DIMENSION" => {
                    let v = value.ok_or_else(|| perr(line, "DIMENSION without value".into()))?;
                    let d: usize = v.parse().map_err(|_| perr(line, format!("bad DIMENSION `{v}`")))?;
                    if d < 2 {
                        return Err(perr(line, "DIMENSION must be at least 2".into()));
                    }
                    dimension = Some(d);
                    coords = vec![None; d];
                    demand = vec![None; d];
                }
                "CAPACITY" => {
                    let v = value.ok_or_else(|| perr(line, "CAPACITY without value".into()))?;
                    capacity = Some(v.parse().map_err(|_| perr(line, format!("bad CAPACITY `{v}`")))?);
                }
                "NODE_COORD_SECTION" => {
                    section = Section::Coords;
                    seen_coords = true;
                }
                "DEMAND_SECTION" => {
                    section = Section::Demand;
                    seen_demand = true;
                }
                "DEPOT_SECTION" => {
                    section = Section::Depot;
                    seen_depot = true;
                }
                "EOF" => break,
                other => return Err(perr(line, format!("unknown keyword `{other}`"))),
            }
            if matches!(key.as_str(), "NODE_COORD_SECTION" | "DEMAND_SECTION") && dimension.is_none() {
                return Err(perr(line, "section before DIMENSION".into()));
            }
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let dim = dimension.unwrap_or(0);
        let node_id = |s: &str| -> Result<usize> {
            let id: usize = s.parse().map_err(|_| perr(line, format!("bad node id `{s}`")))?;
            if id == 0 || id > dim {
                return Err(perr(line, format!("node id {id} outside 1..={dim}")));
            }
            Ok(id - 1)
        };
        match section {
            Section::Header => return Err(perr(line, "data outside any section".into())),
            Section::Coords => {
                if fields.len() != 3 {
                    return Err(perr(line, "coordinate line needs `id x y`".into()));
                }
                let id = node_id(fields[0])?;
                let x: f64 = fields[1].parse().map_err(|_| perr(line, "bad x".into()))?;
                let y: f64 = fields[2].parse().map_err(|_| perr(line, "bad y".into()))?;
                coords[id] = Some([x, y]);
            }
            Section::Demand => {
                if fields.len() != 2 {
                    return Err(perr(line, "demand line needs `id q`".into()));
                }
                let id = node_id(fields[0])?;
                let q: u32 = fields[1].parse().map_err(|_| perr(line, "bad demand".into()))?;
                demand[id] = Some(q);
            }
            Section::Depot => {
                let v: i64 = fields[0].parse().map_err(|_| perr(line, "bad depot id".into()))?;
                if v == -1 {
                    section = Section::Header;
                } else {
                    depots.push(node_id(fields[0])?);
                }
            }
        }
    }

    let eof = last_line + 1;
    let dim = dimension.ok_or_else(|| perr(eof, "missing DIMENSION".into()))?;
    if !seen_coords {
        return Err(perr(eof, "missing NODE_COORD_SECTION".into()));
    }
    if !seen_demand {
        return Err(perr(eof, "missing DEMAND_SECTION".into()));
    }
    let capacity = capacity.ok_or_else(|| Error::Schema { line: eof, msg: "missing CAPACITY".into() })?;
    if !seen_depot || depots.is_empty() {
        return Err(Error::Schema { line: eof, msg: "missing depot".into() });
    }
    if depots.len() > 1 {
        return Err(Error::Schema { line: eof, msg: "multiple depots are not supported".into() });
    }
    let depot = depots[0];
    let coords: Vec<[f64; 2]> = coords
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| perr(eof, format!("node {} has no coordinates", i + 1))))
        .collect::<Result<_>>()?;
    let demand: Vec<u32> = demand
        .into_iter()
        .enumerate()
        .map(|(i, q)| q.ok_or_else(|| perr(eof, format!("node {} has no demand", i + 1))))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = vec![depot];
    order.extend((0..dim).filter(|&i| i != depot));
    let (mut minx, mut miny, mut maxx, mut maxy) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in &coords {
        minx = minx.min(c[0]);
        miny = miny.min(c[1]);
        maxx = maxx.max(c[0]);
        maxy = maxy.max(c[1]);
    }
    let span = (maxx - minx).max(maxy - miny);
    let span = if span > 0.0 { span } else { 1.0 };
    let scaled: Vec<[f64; 2]> = order
        .iter()
        .map(|&i| [((coords[i][0] - minx) / span).clamp(0.0, 1.0), ((coords[i][1] - miny) / span).clamp(0.0, 1.0)])
        .collect();
    let mut q: Vec<u32> = order.iter().map(|&i| demand[i]).collect();
    q[0] = 0;

    let inst = Instance {
        variant: Variant::Cvrp,
        n: dim - 1,
        coords: scaled,
        tw: None,
        demand: Some(q),
        capacity: Some(capacity),
        backhaul: None,
        service_time: None,
        duration_limit: None,
        draft_limit: None,
        precedence: None,
        seed: 0,
    };
    inst.validate(eof)?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "NAME : tiny\nTYPE : CVRP\nDIMENSION : 3\nEDGE_WEIGHT_TYPE : EUC_2D\nCAPACITY : 10\n\
NODE_COORD_SECTION\n1 0 0\n2 10 5\n3 5 0\nDEMAND_SECTION\n1 0\n2 4\n3 7\nDEPOT_SECTION\n1\n-1\nEOF\n";

    #[test]
    fn tiny_fixture_exact() {
        let inst = parse_cvrplib(TINY).unwrap();
        assert_eq!(inst.n, 2);
        assert_eq!(inst.capacity, Some(10));
        assert_eq!(inst.coords, vec![[0.0, 0.0], [1.0, 0.5], [0.5, 0.0]]);
        assert_eq!(inst.demand, Some(vec![0, 4, 7]));
    }

    #[test]
    fn depot_moves_to_front() {
        let text = TINY.replace("DEPOT_SECTION\n1\n", "DEPOT_SECTION\n3\n").replace("3 7\n", "3 0\n").replace("1 0\n2 4", "1 2\n2 4");
        let inst = parse_cvrplib(&text).unwrap();
        assert_eq!(inst.coords[0], [0.5, 0.0]);
        assert_eq!(inst.demand, Some(vec![0, 2, 4]));
    }

    #[test]
    fn truncated_before_demand() {
        let cut = TINY.split("DEMAND_SECTION").next().unwrap().to_string() + "EOF\n";
        assert!(matches!(parse_cvrplib(&cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_keyword() {
        let text = TINY.replace("EDGE_WEIGHT_TYPE : EUC_2D", "SERVICE_TIME_SECTION");
        assert!(matches!(parse_cvrplib(&text), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn missing_depot() {
        let text = TINY.replace("DEPOT_SECTION\n1\n-1\n", "");
        assert!(matches!(parse_cvrplib(&text), Err(Error::Schema { .. })));
    }
}

//! Named-tensor archive: one JSON manifest line, then for every tensor in
//! name order `name_len:u32 name rows:u32 cols:u32 values:f64*`, all
//! little endian.

use std::io::{BufRead, Read, Write};

use super::{Matrix, ParamStore};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RCTENSOR";

pub fn write_checkpoint<W: Write>(mut out: W, manifest: &str, store: &ParamStore) -> std::io::Result<()> {
    if manifest.contains('\n') {
        return Err(std::io::Error::other("manifest must be a single line"));
    }
    out.write_all(manifest.as_bytes())?;
    out.write_all(b"\n")?;
    out.write_all(MAGIC)?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, id) in store.sorted() {
        let m = store.get(id);
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(m.rows as u32).to_le_bytes())?;
        out.write_all(&(m.cols as u32).to_le_bytes())?;
        for v in &m.data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

fn corrupt(msg: &str) -> Error {
    Error::Manifest(format!("corrupt checkpoint: {msg}"))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated"))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads the manifest line and all tensors in file order.
pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<(String, Vec<(String, Matrix)>)> {
    let mut manifest = String::new();
    input.read_line(&mut manifest).map_err(|_| corrupt("unreadable manifest"))?;
    if !manifest.ends_with('\n') {
        return Err(corrupt("missing manifest line"));
    }
    manifest.pop();
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| corrupt("truncated"))?;
    if &magic != MAGIC {
        return Err(corrupt("bad tensor header"));
    }
    let count = read_u32(&mut input)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name).map_err(|_| corrupt("truncated"))?;
        let name = String::from_utf8(name).map_err(|_| corrupt("tensor name is not utf-8"))?;
        let rows = read_u32(&mut input)? as usize;
        let cols = read_u32(&mut input)? as usize;
        let mut data = vec![0.0; rows * cols];
        let mut b = [0u8; 8];
        for v in &mut data {
            input.read_exact(&mut b).map_err(|_| corrupt("truncated"))?;
            *v = f64::from_le_bytes(b);
        }
        tensors.push((name, Matrix { rows, cols, data }));
    }
    Ok((manifest, tensors))
}

/// Copies tensors into `store`; names and shapes must match exactly.
pub fn load_into(store: &mut ParamStore, tensors: Vec<(String, Matrix)>) -> Result<()> {
    if tensors.len() != store.len() {
        return Err(Error::Manifest(format!("checkpoint has {} tensors, model has {}", tensors.len(), store.len())));
    }
    for (name, m) in tensors {
        let id = store.id(&name).ok_or_else(|| Error::Manifest(format!("unknown tensor `{name}`")))?;
        let dst = store.get_mut(id);
        if dst.shape() != m.shape() {
            return Err(Error::Manifest(format!("tensor `{name}` has shape {:?}, expected {:?}", m.shape(), dst.shape())));
        }
        *dst = m;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut s = ParamStore::new();
        s.add("z.w", Matrix::from_vec(2, 2, vec![1.0, -2.5, 3.0, 1e-300]).unwrap()).unwrap();
        s.add("a.b", Matrix::from_vec(1, 3, vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, "{\"k\":1}", &s).unwrap();
        let (m, t) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(m, "{\"k\":1}");
        assert_eq!(t[0].0, "a.b");
        let mut s2 = s.clone();
        s2.values_mut()[0].data[0] = 9.0;
        load_into(&mut s2, t).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn truncated_is_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Matrix::zeros(3, 3)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, "{}", &s).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(read_checkpoint(&buf[..]), Err(Error::Manifest(_))));
    }
}

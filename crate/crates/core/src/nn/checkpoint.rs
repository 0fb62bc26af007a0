//! Self-describing binary container for networks and raw arrays.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "TLSDCKPT" | version u32 | entry count u32
//! entry: kind u8 | name (u32 length + UTF-8 bytes) | payload
//!   network (kind 0): layer count + 1 as u32, widths as u64,
//!                     activation count u32, names (u32 length + bytes),
//!                     parameter count u64, parameters f64
//!   array   (kind 1): rows u64, cols u64, values f64 (row-major)
//!   text    (kind 2): u32 length + UTF-8 bytes
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::{Activation, Matrix};
use crate::error::{Error, Result};

use super::mlp::{Architecture, Mlp};

const MAGIC: &[u8; 8] = b"TLSDCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Network(Mlp),
    Array(Matrix),
    Text(String),
}

/// Ordered named entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Entry)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(String, Entry)] {
        &self.entries
    }

    fn insert(&mut self, name: &str, e: Entry) {
        if let Some(slot) = self.entries.iter_mut().find(|(n, _)| n == name) {
            slot.1 = e;
        } else {
            self.entries.push((name.to_string(), e));
        }
    }

    pub fn put_network(&mut self, name: &str, net: &Mlp) {
        self.insert(name, Entry::Network(net.clone()));
    }

    pub fn put_array(&mut self, name: &str, m: &Matrix) {
        self.insert(name, Entry::Array(m.clone()));
    }

    pub fn put_text(&mut self, name: &str, s: impl Into<String>) {
        self.insert(name, Entry::Text(s.into()));
    }

    fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::Format(format!("checkpoint has no entry '{name}'")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn network(&self, name: &str) -> Result<&Mlp> {
        match self.get(name)? {
            Entry::Network(n) => Ok(n),
            _ => Err(Error::Format(format!("entry '{name}' is not a network"))),
        }
    }

    pub fn array(&self, name: &str) -> Result<&Matrix> {
        match self.get(name)? {
            Entry::Array(m) => Ok(m),
            _ => Err(Error::Format(format!("entry '{name}' is not an array"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.get(name)? {
            Entry::Text(s) => Ok(s),
            _ => Err(Error::Format(format!("entry '{name}' is not text"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, e) in &self.entries {
            let kind: u8 = match e {
                Entry::Network(_) => 0,
                Entry::Array(_) => 1,
                Entry::Text(_) => 2,
            };
            out.push(kind);
            put_str(&mut out, name);
            match e {
                Entry::Network(net) => {
                    let arch = net.architecture();
                    out.extend_from_slice(&(arch.widths().len() as u32).to_le_bytes());
                    for &w in arch.widths() {
                        out.extend_from_slice(&(w as u64).to_le_bytes());
                    }
                    out.extend_from_slice(&(arch.activations().len() as u32).to_le_bytes());
                    for a in arch.activations() {
                        put_str(&mut out, a.name());
                    }
                    put_f64s(&mut out, net.params());
                }
                Entry::Array(m) => {
                    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
                    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
                    for v in m.as_slice() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Entry::Text(s) => put_str(&mut out, s),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()? as usize;
        let mut ck = Checkpoint::new();
        for _ in 0..count {
            let kind = r.take(1)?[0];
            let name = r.string()?;
            let entry = match kind {
                0 => {
                    let nw = r.u32()? as usize;
                    let widths = (0..nw).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
                    let na = r.u32()? as usize;
                    let acts = (0..na)
                        .map(|_| r.string()?.parse::<Activation>())
                        .collect::<Result<Vec<_>>>()?;
                    let params = r.f64s()?;
                    let arch = Architecture::new(widths, acts)
                        .map_err(|e| Error::Format(format!("network '{name}': {e}")))?;
                    Entry::Network(
                        Mlp::new(arch, params).map_err(|e| Error::Format(format!("network '{name}': {e}")))?,
                    )
                }
                1 => {
                    let rows = r.u64()? as usize;
                    let cols = r.u64()? as usize;
                    let n = rows.checked_mul(cols).ok_or_else(|| Error::Format("array too large".into()))?;
                    let data = r.raw_f64s(n)?;
                    Entry::Array(Matrix::from_vec(rows, cols, data)?)
                }
                2 => Entry::Text(r.string()?),
                k => return Err(Error::Format(format!("unknown entry kind {k}"))),
            };
            ck.entries.push((name, entry));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after last entry".into()));
        }
        Ok(ck)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 name".into()))
    }

    fn raw_f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format("array too large".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        self.raw_f64s(n)
    }
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

use super::snapshot::{GridMeta, SnapshotSet};

const MAGIC: &[u8; 8] = b"TLSDDATA";
const VERSION: u32 = 1;
const HAS_DERIVATIVES: u32 = 1;
const HAS_GRID: u32 = 2;

/// Serializes a snapshot set: magic, version, `N`, snapshot count, `|μ|`, flags, then
/// optional grid metadata, μ, times, states and optional derivatives, all little-endian.
pub fn dataset_to_bytes(set: &SnapshotSet) -> Result<Vec<u8>> {
    set.validate()?;
    let mut out = Vec::with_capacity(64 + 8 * (set.states.len() * 2 + set.times.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [set.dim(), set.len(), set.mu.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let mut flags = 0;
    if set.derivatives.is_some() {
        flags |= HAS_DERIVATIVES;
    }
    if set.grid.is_some() {
        flags |= HAS_GRID;
    }
    out.extend_from_slice(&flags.to_le_bytes());
    let mut put = |vals: &[f64]| vals.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    if let Some(g) = set.grid {
        put(&[g.dx, g.dt, g.x_min, g.x_max]);
    }
    put(&set.mu);
    put(&set.times);
    put(set.states.as_slice());
    if let Some(d) = &set.derivatives {
        put(d.as_slice());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("dataset truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
            .map_err(|_| Error::Format("dataset dimension overflows".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("dataset block too large".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<SnapshotSet> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Format("bad dataset magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let (n, nt, p) = (c.u64()?, c.u64()?, c.u64()?);
    let flags = c.u32()?;
    if flags & !(HAS_DERIVATIVES | HAS_GRID) != 0 {
        return Err(Error::Format(format!("unknown dataset flags {flags:#x}")));
    }
    let grid = if flags & HAS_GRID != 0 {
        let g = c.f64s(4)?;
        Some(GridMeta { dx: g[0], dt: g[1], x_min: g[2], x_max: g[3] })
    } else {
        None
    };
    let mu = c.f64s(p)?;
    let times = c.f64s(nt)?;
    let len = n.checked_mul(nt).ok_or_else(|| Error::Format("dataset shape overflows".into()))?;
    let states = Matrix::from_vec(nt, n, c.f64s(len)?)?;
    let derivatives = if flags & HAS_DERIVATIVES != 0 {
        Some(Matrix::from_vec(nt, n, c.f64s(len)?)?)
    } else {
        None
    };
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after dataset", bytes.len() - c.pos)));
    }
    let set = SnapshotSet { mu, times, states, derivatives, grid };
    set.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(set)
}

pub fn dataset_write(set: &SnapshotSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&dataset_to_bytes(set)?)?;
    w.flush()?;
    Ok(())
}

pub fn dataset_read(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    dataset_from_bytes(&bytes)
}

/// CSV mirror of the binary layout: one record per line, tagged `mu`, `grid`, `state` or
/// `derivative`; state and derivative records carry the time in the second field.
pub fn dataset_write_csv(set: &SnapshotSet, path: impl AsRef<Path>) -> Result<()> {
    set.validate()?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    let fmt = |v: &f64| format!("{v:e}");
    if !set.mu.is_empty() {
        w.write_record(std::iter::once("mu".to_string()).chain(std::iter::once(String::new())).chain(set.mu.iter().map(fmt)))?;
    }
    if let Some(g) = set.grid {
        let vals = [g.dx, g.dt, g.x_min, g.x_max];
        w.write_record(["grid".to_string(), String::new()].into_iter().chain(vals.iter().map(fmt)))?;
    }
    for (tag, m) in [("state", Some(&set.states)), ("derivative", set.derivatives.as_ref())] {
        let Some(m) = m else { continue };
        for k in 0..set.len() {
            w.write_record([tag.to_string(), fmt(&set.times[k])].into_iter().chain(m.row(k).iter().map(fmt)))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the tagged CSV layout. Untagged numeric rows `t, x_0, …, x_{N−1}` are also accepted
/// as states, which covers plain trajectory exports.
pub fn dataset_read_csv(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).comment(Some(b'#')).from_path(path)?;
    let mut mu = vec![];
    let mut grid = None;
    let (mut times, mut states, mut dtimes, mut derivs) = (vec![], vec![], vec![], vec![]);
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Format(format!("not a number: '{s}'")));
    for rec in r.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        let Some(&tag) = fields.first() else { continue };
        let values = |from: usize| fields[from..].iter().map(|s| num(s)).collect::<Result<Vec<f64>>>();
        match tag.trim() {
            "mu" => mu = values(2)?,
            "grid" => {
                let g = values(2)?;
                if g.len() != 4 {
                    return Err(Error::Format("grid record needs 4 values".into()));
                }
                grid = Some(GridMeta { dx: g[0], dt: g[1], x_min: g[2], x_max: g[3] });
            }
            "state" => {
                times.push(num(fields.get(1).copied().unwrap_or(""))?);
                states.push(values(2)?);
            }
            "derivative" => {
                dtimes.push(num(fields.get(1).copied().unwrap_or(""))?);
                derivs.push(values(2)?);
            }
            t if t.parse::<f64>().is_ok() => {
                let v = values(0)?;
                times.push(v[0]);
                states.push(v[1..].to_vec());
            }
            _ => continue,
        }
    }
    if states.is_empty() {
        return Err(Error::Format("CSV dataset has no states".into()));
    }
    let states = Matrix::from_rows(&states).map_err(|e| Error::Format(e.to_string()))?;
    let mut set = SnapshotSet::new(mu, times, states).map_err(|e| Error::Format(e.to_string()))?;
    if !derivs.is_empty() {
        if dtimes != set.times {
            return Err(Error::Format("derivative times do not match state times".into()));
        }
        let d = Matrix::from_rows(&derivs).map_err(|e| Error::Format(e.to_string()))?;
        set = set.with_derivatives(d).map_err(|e| Error::Format(e.to_string()))?;
    }
    set.grid = grid;
    Ok(set)
}

//! Binary field snapshots.
//!
//! Layout, all little-endian: the magic `HJSNAP01`, `d` as `u32`, `N` per axis
//! as `d` times `u32`, the period as `f64`, then the `N^d` values as `f64` in
//! row-major order (last axis fastest).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::spectral::{GridFunction, SpectralGrid};

pub const MAGIC: &[u8; 8] = b"HJSNAP01";

pub fn write_snapshot<W: Write>(field: &GridFunction, mut out: W) -> Result<()> {
    let grid = field.grid();
    let d = grid.dimension();
    let n = grid.points_per_axis() as u32;
    let mut buf = Vec::with_capacity(8 + 4 + 4 * d + 8 + 8 * grid.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    for _ in 0..d {
        buf.extend_from_slice(&n.to_le_bytes());
    }
    buf.extend_from_slice(&grid.period().to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn malformed(msg: &str) -> Error {
    Error::Io(format!("malformed snapshot: {msg}"))
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<GridFunction> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut take = |k: usize| -> Result<&[u8]> {
        let chunk = bytes
            .get(pos..pos + k)
            .ok_or_else(|| malformed("truncated"))?;
        pos += k;
        Ok(chunk)
    };
    if take(8)? != MAGIC {
        return Err(malformed("bad magic"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let d = u32_at(take(4)?);
    if !(1..=3).contains(&d) {
        return Err(malformed("dimension outside 1..=3"));
    }
    let mut ns = Vec::with_capacity(d);
    for _ in 0..d {
        ns.push(u32_at(take(4)?));
    }
    if ns.iter().any(|n| *n != ns[0]) {
        return Err(malformed("axes have different point counts"));
    }
    let period = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
    let grid = SpectralGrid::new(d, period, ns[0])?;
    let len = grid.len();
    let raw = take(8 * len)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if take(1).is_ok() {
        return Err(malformed("trailing bytes"));
    }
    GridFunction::new(&grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = make_grid(2, 3.5, 8).unwrap();
        let f = GridFunction::from_fn(&g, |x| (x[0] * 1.7).sin() + x[1].powi(3) / 7.0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 8 + 8 + 8 * 64);
        assert_eq!(&buf[..8], b"HJSNAP01");
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..16], &8u32.to_le_bytes());
        assert_eq!(&buf[20..28], &3.5f64.to_le_bytes());
        // row-major: the second value is at index (0, 1)
        assert_eq!(&buf[36..44], &f.values()[1].to_le_bytes());
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_damaged_input() {
        let g = make_grid(1, 1.0, 8).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&GridFunction::zeros(&g), &mut buf).unwrap();
        assert!(read_snapshot(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot(bad.as_slice()).is_err());
        buf.push(0);
        assert!(read_snapshot(buf.as_slice()).is_err());
    }
}

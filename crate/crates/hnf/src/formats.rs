//! Binary matrix files.
//!
//! Weight file (`.hnfw`), all little-endian:
//!
//! | bytes | field                                              |
//! |-------|----------------------------------------------------|
//! | 4     | magic `HNFW`                                       |
//! | 4     | `u32` rows                                         |
//! | 4     | `u32` cols                                         |
//! | 1     | `u8` kind: 0 random orthonormal, 1 DCT, 2 Gaussian |
//! | 8     | `u64` seed (0 for DCT)                             |
//! | 8·r·c | `f64` entries, row-major                           |
//!
//! Map block (`.hnfm`): magic `HNFM`, `u32` rows, `u32` cols, then the
//! row-major `f64` entries.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use hnf_core::linalg::Matrix;
use hnf_core::matrixgen::{WeightKind, WeightMatrix};

use crate::error::{Error, Result};

const WEIGHT_MAGIC: &[u8; 4] = b"HNFW";
const MAP_MAGIC: &[u8; 4] = b"HNFM";

fn write_entries<W: Write>(w: &mut W, m: &Matrix) -> std::io::Result<()> {
    for &v in m.as_slice() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn dims_u32(m: &Matrix) -> std::io::Result<(u32, u32)> {
    let conv = |v: usize| {
        u32::try_from(v).map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32"))
    };
    Ok((conv(m.rows())?, conv(m.cols())?))
}

pub fn write_weight_to<W: Write>(w: &mut W, weight: &WeightMatrix) -> std::io::Result<()> {
    let (r, c) = dims_u32(weight.matrix())?;
    w.write_all(WEIGHT_MAGIC)?;
    w.write_u32::<LittleEndian>(r)?;
    w.write_u32::<LittleEndian>(c)?;
    w.write_u8(weight.kind().code())?;
    w.write_u64::<LittleEndian>(weight.seed().unwrap_or(0))?;
    write_entries(w, weight.matrix())
}

pub fn write_weight(path: &Path, weight: &WeightMatrix) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_weight_to(&mut w, weight)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_entries<R: Read>(r: &mut R, rows: usize, cols: usize, path: &Path) -> Result<Matrix> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(path, "matrix dimensions overflow"))?;
    let mut data = vec![0.0; len];
    r.read_f64_into::<LittleEndian>(&mut data)
        .map_err(|e| Error::format(path, format!("truncated matrix data: {e}")))?;
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(Error::format(path, "trailing bytes after matrix data")),
        Err(e) => return Err(Error::io(path, e)),
    }
    Ok(Matrix::from_vec(rows, cols, data)?)
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4], path: &Path) -> Result<(usize, usize)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)
        .map_err(|_| Error::format(path, "file too short for a header"))?;
    if &m != magic {
        return Err(Error::format(
            path,
            format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&m), String::from_utf8_lossy(magic)),
        ));
    }
    let trunc = |_| Error::format(path, "truncated header");
    let rows = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let cols = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    Ok((rows, cols))
}

pub fn read_weight_from<R: Read>(r: &mut R, path: &Path) -> Result<WeightMatrix> {
    let (rows, cols) = read_header(r, WEIGHT_MAGIC, path)?;
    let trunc = |_| Error::format(path, "truncated header");
    let code = r.read_u8().map_err(trunc)?;
    let seed = r.read_u64::<LittleEndian>().map_err(trunc)?;
    let kind = WeightKind::from_code(code).ok_or_else(|| Error::format(path, format!("unknown weight kind {code}")))?;
    let entries = read_entries(r, rows, cols, path)?;
    let seed = kind.is_randomized().then_some(seed);
    WeightMatrix::from_parts(entries, kind, seed).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_weight(path: &Path) -> Result<WeightMatrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_weight_from(&mut BufReader::new(f), path)
}

pub fn write_map(path: &Path, m: &Matrix) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res = (|| {
        let (r, c) = dims_u32(m)?;
        w.write_all(MAP_MAGIC)?;
        w.write_u32::<LittleEndian>(r)?;
        w.write_u32::<LittleEndian>(c)?;
        write_entries(&mut w, m)?;
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_map(path: &Path) -> Result<Matrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let (rows, cols) = read_header(&mut r, MAP_MAGIC, path)?;
    read_entries(&mut r, rows, cols, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hnf_core::matrixgen::{make_dct_orthonormal, make_random_orthonormal};

    #[test]
    fn weight_header_layout() {
        let w = make_random_orthonormal(3, 2, 9).unwrap();
        let mut buf = Vec::new();
        write_weight_to(&mut buf, &w).unwrap();
        assert_eq!(&buf[..4], b"HNFW");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(buf[12], 0);
        assert_eq!(u64::from_le_bytes(buf[13..21].try_into().unwrap()), 9);
        assert_eq!(buf.len(), 21 + 6 * 8);
        let first = f64::from_le_bytes(buf[21..29].try_into().unwrap());
        assert_eq!(first, w.matrix()[(0, 0)]);
    }

    #[test]
    fn weight_round_trip_and_errors() {
        let p = Path::new("mem");
        for w in [make_random_orthonormal(5, 3, 1).unwrap(), make_dct_orthonormal(4, 4).unwrap()] {
            let mut buf = Vec::new();
            write_weight_to(&mut buf, &w).unwrap();
            assert_eq!(read_weight_from(&mut buf.as_slice(), p).unwrap(), w);
            let short = &buf[..buf.len() - 3];
            assert!(matches!(read_weight_from(&mut &short[..], p), Err(Error::Format { .. })));
            let mut bad = buf.clone();
            bad[0] = b'X';
            assert!(matches!(read_weight_from(&mut bad.as_slice(), p), Err(Error::Format { .. })));
            let mut long = buf.clone();
            long.push(0);
            assert!(matches!(read_weight_from(&mut long.as_slice(), p), Err(Error::Format { .. })));
        }
    }
}

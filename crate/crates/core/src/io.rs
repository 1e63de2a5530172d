//! Output formats: CSV time series and a raw binary dump of density matrices.

use std::io::{self, Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

const MAGIC: &[u8; 4] = b"WQDM";

/// A float with 17 significant digits, so that reruns compare byte-for-byte.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a header line and one line per row.
pub fn write_csv<W: Write>(mut w: W, header: &[String], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Binary layout (little endian): `"WQDM"`, `u32` factor count, one `u32` per
/// factor dimension, `u64` record count, then per record a `u64` step index and
/// the matrix as interleaved re/im `f64`, row-major.
pub fn write_density_matrices<W: Write>(mut w: W, dims: &[usize], records: &[(u64, &DMatrix<C64>)]) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for (step, m) in records {
        w.write_all(&step.to_le_bytes())?;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                w.write_all(&m[(r, c)].re.to_le_bytes())?;
                w.write_all(&m[(r, c)].im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Factor dimensions and `(step, matrix)` records.
pub type DensityDump = (Vec<usize>, Vec<(u64, DMatrix<C64>)>);

/// Inverse of [`write_density_matrices`].
pub fn read_density_matrices<R: Read>(mut r: R) -> io::Result<DensityDump> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a density-matrix file"));
    }
    let nd = read_u32(&mut r)? as usize;
    let dims = (0..nd).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<io::Result<Vec<_>>>()?;
    let total: usize = dims.iter().product();
    let n = read_u64(&mut r)?;
    let mut out = Vec::new();
    for _ in 0..n {
        let step = read_u64(&mut r)?;
        let mut m = DMatrix::<C64>::zeros(total, total);
        for row in 0..total {
            for col in 0..total {
                let re = read_f64(&mut r)?;
                let im = read_f64(&mut r)?;
                m[(row, col)] = C64::new(re, im);
            }
        }
        out.push((step, m));
    }
    Ok((dims, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["t".into(), "x".into()], &[vec![0.1, 1.0 / 3.0]]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,x\n1.0000000000000001e-1,3.3333333333333331e-1\n");
        let back: f64 = s.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn binary_round_trip() {
        let m = DMatrix::from_fn(4, 4, |r, c| C64::new(r as f64 * 0.1, c as f64 - 1.5));
        let mut buf = Vec::new();
        write_density_matrices(&mut buf, &[2, 2], &[(0, &m), (7, &m)]).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 2 * (8 + 16 * 16));
        let (dims, recs) = read_density_matrices(&buf[..]).unwrap();
        assert_eq!(dims, vec![2, 2]);
        assert_eq!(recs[1].0, 7);
        assert_eq!(recs[1].1, m);
        assert!(read_density_matrices(&b"XXXX"[..]).is_err());
    }
}

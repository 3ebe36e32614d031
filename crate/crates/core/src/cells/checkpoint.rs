//! Flat binary parameter container.
//!
//! Layout (all integers little-endian `u32`, all values little-endian `f64`):
//!
//! ```text
//! magic    8 bytes  b"EVNTCKPT"
//! version  u32      1
//! count    u32      number of tensors
//! count times:
//!   name_len u32, name (UTF-8, name_len bytes)
//!   rows u32, cols u32
//!   rows * cols f64 values, row-major
//! ```
//!
//! Tensors appear in the owning model's visit order, so equal parameters
//! always serialize to identical bytes.

use std::io::{Read, Write};

use super::Parameters;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 8] = b"EVNTCKPT";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(tensors: &[(String, Matrix)], mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, m) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u32).to_le_bytes())?;
        w.write_all(&(m.cols() as u32).to_le_bytes())?;
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Matrix)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        let m = Matrix::from_vec(rows, cols, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        out.push((name, m));
    }
    Ok(out)
}

pub fn save_params<P: Parameters + ?Sized, W: Write>(params: &P, w: W) -> Result<()> {
    let mut tensors = Vec::new();
    params.visit(&mut |name, m| tensors.push((name.to_string(), m.clone())));
    write_checkpoint(&tensors, w)
}

/// Loads a checkpoint into `params`. Names, order and shapes must match.
pub fn load_params<P: Parameters + ?Sized, R: Read>(params: &mut P, r: R) -> Result<()> {
    let tensors = read_checkpoint(r)?;
    let mut idx = 0;
    let mut err = None;
    params.visit_mut(&mut |name, m| {
        if err.is_some() {
            return;
        }
        match tensors.get(idx) {
            Some((n, t)) if n == name && t.rows() == m.rows() && t.cols() == m.cols() => {
                m.as_mut_slice().copy_from_slice(t.as_slice());
            }
            Some((n, t)) => {
                err = Some(Error::Checkpoint(format!(
                    "tensor {idx}: expected {name} {}x{}, found {n} {}x{}",
                    m.rows(),
                    m.cols(),
                    t.rows(),
                    t.cols()
                )));
            }
            None => err = Some(Error::Checkpoint(format!("missing tensor {name}"))),
        }
        idx += 1;
    });
    if let Some(e) = err {
        return Err(e);
    }
    if idx != tensors.len() {
        return Err(Error::Checkpoint(format!("{} extra tensors", tensors.len() - idx)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::LstmParams;
    use crate::numerics::Rng;

    #[test]
    fn byte_layout_of_single_tensor() {
        let m = Matrix::from_vec(1, 1, vec![1.5]).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&[("a".into(), m)], &mut buf).unwrap();
        let mut expect = b"EVNTCKPT".to_vec();
        expect.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, b'a', 1, 0, 0, 0, 1, 0, 0, 0]);
        expect.extend_from_slice(&1.5f64.to_le_bytes());
        assert_eq!(buf, expect);
    }

    #[test]
    fn save_load_restores_lstm() {
        let mut rng = Rng::new(4);
        let p = LstmParams::new(3, 5, &mut rng);
        let mut buf = Vec::new();
        save_params(&p, &mut buf).unwrap();
        let mut q = LstmParams::zeros(3, 5);
        load_params(&mut q, buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let p = LstmParams::zeros(3, 5);
        let mut buf = Vec::new();
        save_params(&p, &mut buf).unwrap();
        let mut q = LstmParams::zeros(2, 5);
        assert!(matches!(load_params(&mut q, buf.as_slice()), Err(Error::Checkpoint(_))));
        assert!(read_checkpoint(&b"NOTACKPT\x01\0\0\0\0\0\0\0"[..]).is_err());
    }
}

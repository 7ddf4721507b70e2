//! Binary field dumps, the convolution-tensor cache, and text exports.
//!
//! Field dump layout (little-endian): magic "CHSM", version u32, dim u32,
//! nx u32, nk u32, then f64 extents x_min, x_max, k_min, k_max, time,
//! followed by the tensor values as f64 in storage order (spatial index
//! major, wave-vector index fastest). Tensor caches use the same header
//! convention with kind tag "TKMT".

use crate::error::{ChasmError, Result};
use crate::field::WignerField;
use crate::grid::build_grid;
use crate::num::Real;
use crate::tkm::ConvolutionTensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const FIELD_MAGIC: &[u8; 4] = b"CHSM";
const TENSOR_MAGIC: &[u8; 4] = b"TKMT";
const VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Write a field dump; 32-bit fields are widened losslessly to f64.
pub fn dump_field<R: Real>(field: &WignerField<R>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FIELD_MAGIC)?;
    write_u32(&mut w, VERSION)?;
    let g = &field.grid;
    write_u32(&mut w, g.dim as u32)?;
    write_u32(&mut w, g.nx as u32)?;
    write_u32(&mut w, g.nk as u32)?;
    write_f64(&mut w, g.x_min)?;
    write_f64(&mut w, g.x_max)?;
    write_f64(&mut w, -g.l_k)?;
    write_f64(&mut w, g.l_k)?;
    write_f64(&mut w, field.time)?;
    for v in &field.values {
        write_f64(&mut w, v.to_f64())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<WignerField<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(ChasmError::BadFormat(format!(
            "{} is not a field dump (magic {:?})",
            path.display(),
            magic
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(ChasmError::BadFormat(format!("unsupported version {version}")));
    }
    let dim = read_u32(&mut r)? as usize;
    let nx = read_u32(&mut r)? as usize;
    let nk = read_u32(&mut r)? as usize;
    let x_min = read_f64(&mut r)?;
    let x_max = read_f64(&mut r)?;
    let k_min = read_f64(&mut r)?;
    let k_max = read_f64(&mut r)?;
    let time = read_f64(&mut r)?;
    if (k_min + k_max).abs() > 1e-12 * k_max.abs() {
        return Err(ChasmError::BadFormat("asymmetric wave-vector extent".into()));
    }
    let grid = build_grid(dim, (x_min, x_max), nx, k_max, nk)?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    let expect = grid.len() * 8;
    if raw.len() != expect {
        return Err(ChasmError::BadFormat(format!(
            "value section is {} bytes, expected {expect}",
            raw.len()
        )));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(WignerField { grid, values, time })
}

/// Cache a convolution tensor keyed by (nk, l_k); the forward transform is
/// rebuilt on load.
pub fn save_tensor(tensor: &ConvolutionTensor, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TENSOR_MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, tensor.nk as u32)?;
    write_f64(&mut w, tensor.l_k)?;
    write_f64(&mut w, tensor.d)?;
    for v in &tensor.t_wrapped {
        write_f64(&mut w, *v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: &Path, nk: usize, l_k: f64) -> Result<ConvolutionTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(ChasmError::BadFormat("not a tensor cache".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(ChasmError::BadFormat(format!("unsupported version {version}")));
    }
    let file_nk = read_u32(&mut r)? as usize;
    let file_lk = read_f64(&mut r)?;
    let file_d = read_f64(&mut r)?;
    if file_nk != nk || (file_lk - l_k).abs() > 1e-14 * l_k.abs() {
        return Err(ChasmError::BadFormat(format!(
            "tensor cache is for nk={file_nk}, l_k={file_lk}"
        )));
    }
    let n2 = 2 * nk;
    let mut raw = vec![0u8; n2 * n2 * n2 * 8];
    r.read_exact(&mut raw)?;
    let t_wrapped: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ConvolutionTensor::from_parts(nk, l_k, file_d, t_wrapped))
}

/// Delimiter-separated matrix export (tab-separated, one row per line).
pub fn write_tsv_matrix(path: &Path, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    debug_assert_eq!(data.len(), rows * cols);
    let mut w = BufWriter::new(File::create(path)?);
    for r in 0..rows {
        let mut line = String::with_capacity(cols * 24);
        for c in 0..cols {
            if c > 0 {
                line.push('\t');
            }
            line.push_str(&format!("{:.17e}", data[r * cols + c]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::init_gaussian;

    #[test]
    fn field_dump_round_trips_bit_exactly() {
        let dir = std::env::temp_dir().join("chasm_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.chsm");
        let g = build_grid(1, (-2.0, 2.0), 8, 1.5, 6).unwrap();
        let mut f: WignerField<f64> = init_gaussian(&g, &[0.3], &[-0.2], 0.5, 2.0).unwrap();
        f.time = 1.25;
        dump_field(&f, &path).unwrap();
        let back = load_field(&path).unwrap();
        assert_eq!(back.grid, f.grid);
        assert_eq!(back.time, f.time);
        for (a, b) in back.values.iter().zip(&f.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = std::env::temp_dir().join("chasm_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bogus.chsm");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(load_field(&path), Err(ChasmError::BadFormat(_))));
    }

    #[test]
    fn tensor_cache_round_trips() {
        let dir = std::env::temp_dir().join("chasm_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tensor.tkmt");
        let t = ConvolutionTensor::build(4, 1.5).unwrap();
        save_tensor(&t, &path).unwrap();
        let back = load_tensor(&path, 4, 1.5).unwrap();
        assert_eq!(back.t_wrapped, t.t_wrapped);
        assert!(load_tensor(&path, 8, 1.5).is_err());
    }
}

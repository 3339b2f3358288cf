//! Model checkpoint file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic       b"VGCK"
//! version     u32 = 1
//! config_len  u32, then config_len bytes of JSON (ModelConfig)
//! count       u32
//! count × { name_len u16, name utf-8, rows u32, cols u32, rows·cols × f64 row-major }
//! ```
//!
//! Tensors are written in ascending name order, so equal models give equal bytes.

use std::path::Path;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, ParamStore};

const MAGIC: &[u8; 4] = b"VGCK";
const VERSION: u32 = 1;

pub fn save_checkpoint(model: &Model) -> Result<Vec<u8>> {
    let config = serde_json::to_vec(&model.config)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (name, m) in model.params.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
        for v in m.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= buf.len())
        .ok_or_else(|| Error::format("checkpoint", "truncated file"))?;
    let out = &buf[*pos..end];
    *pos = end;
    Ok(out)
}

fn u32_at(buf: &[u8], pos: &mut usize) -> Result<u32> {
    Ok(u32::from_le_bytes(
        take(buf, pos, 4)?.try_into().expect("4 bytes"),
    ))
}

pub fn load_checkpoint(buf: &[u8]) -> Result<Model> {
    let mut pos = 0;
    if take(buf, &mut pos, 4)? != MAGIC {
        return Err(Error::format("checkpoint", "bad magic"));
    }
    let version = u32_at(buf, &mut pos)?;
    if version != VERSION {
        return Err(Error::format(
            "checkpoint",
            format!("unsupported version {version}"),
        ));
    }
    let len = u32_at(buf, &mut pos)? as usize;
    let config: ModelConfig = serde_json::from_slice(take(buf, &mut pos, len)?)?;
    let count = u32_at(buf, &mut pos)?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name_len =
            u16::from_le_bytes(take(buf, &mut pos, 2)?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(take(buf, &mut pos, name_len)?)
            .map_err(|_| Error::format("checkpoint", "tensor name is not UTF-8"))?
            .to_string();
        let rows = u32_at(buf, &mut pos)? as usize;
        let cols = u32_at(buf, &mut pos)? as usize;
        let bytes = take(buf, &mut pos, rows * cols * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let m = Matrix::from_shape_vec((rows, cols), data).expect("shape matches data length");
        params.insert(name, m);
    }
    if pos != buf.len() {
        return Err(Error::format("checkpoint", "trailing bytes"));
    }
    Ok(Model { config, params })
}

pub fn write_checkpoint(path: &Path, model: &Model) -> Result<()> {
    std::fs::write(path, save_checkpoint(model)?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::EncoderConfig;
    use crate::fusion::FusionConfig;

    fn model() -> Model {
        let cfg = ModelConfig {
            encoder: EncoderConfig {
                d_in: 12,
                hidden: 4,
                d_g: 4,
                ..Default::default()
            },
            fusion: FusionConfig {
                d_proj: 4,
                ..Default::default()
            },
            d_l: 3,
        };
        Model::init(cfg, 12, 1).unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let m = model();
        let bytes = save_checkpoint(&m).unwrap();
        assert_eq!(load_checkpoint(&bytes).unwrap(), m);
        assert_eq!(
            save_checkpoint(&load_checkpoint(&bytes).unwrap()).unwrap(),
            bytes
        );
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = save_checkpoint(&model()).unwrap();
        assert!(load_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}

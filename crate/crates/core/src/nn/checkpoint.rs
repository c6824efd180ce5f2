//! Parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"FSCKPT\0\x01"          8 bytes (last byte = format version)
//! count    u32                      number of tensors
//! manifest count x {
//!     name_len u16, name (utf-8),
//!     ndim u8, dims u32 x ndim,
//!     offset u64                    byte offset into the payload
//! }
//! payload  f32 values, little-endian, tensors back to back
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use crate::error::{Error, Result};

use super::params::ParameterSet;
use super::tensor::Tensor;

const MAGIC: &[u8; 8] = b"FSCKPT\0\x01";

pub fn encode(params: &ParameterSet<f32>) -> Vec<u8> {
    let mut manifest = Vec::new();
    let mut payload: Vec<u8> = Vec::with_capacity(params.count() * 4);
    for (name, t) in params.iter() {
        manifest.extend_from_slice(&(name.len() as u16).to_le_bytes());
        manifest.extend_from_slice(name.as_bytes());
        manifest.push(t.shape().len() as u8);
        for &d in t.shape() {
            manifest.extend_from_slice(&(d as u32).to_le_bytes());
        }
        manifest.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(12 + manifest.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&payload);
    out
}

fn read_n<const N: usize>(c: &mut Cursor<&[u8]>) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    c.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated checkpoint manifest".into()))?;
    Ok(buf)
}

pub fn decode(bytes: &[u8]) -> Result<ParameterSet<f32>> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a flowsense checkpoint".into()));
    }
    let mut c = Cursor::new(bytes);
    c.set_position(8);
    let count = u32::from_le_bytes(read_n(&mut c)?) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(read_n(&mut c)?) as usize;
        let mut name = vec![0u8; name_len];
        c.read_exact(&mut name)
            .map_err(|_| Error::Format("truncated parameter name".into()))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("parameter name is not utf-8".into()))?;
        let ndim = read_n::<1>(&mut c)?[0] as usize;
        let shape = (0..ndim)
            .map(|_| read_n::<4>(&mut c).map(|b| u32::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        let offset = u64::from_le_bytes(read_n(&mut c)?) as usize;
        entries.push((name, shape, offset));
    }
    let payload = &bytes[c.position() as usize..];
    let mut params = ParameterSet::new();
    for (name, shape, offset) in entries {
        let numel: usize = shape.iter().product();
        let raw = payload
            .get(offset..offset + numel * 4)
            .ok_or_else(|| Error::Format(format!("payload of `{name}` out of range")))?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        params.insert(&name, Tensor::new(&shape, data)?)?;
    }
    Ok(params)
}

pub fn save(params: &ParameterSet<f32>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ParameterSet<f32>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            vals in proptest::collection::vec(any::<u32>(), 1..64),
            split in 0usize..64,
        ) {
            let data: Vec<f32> = vals.iter().map(|&b| f32::from_bits(b)).collect();
            let split = split.min(data.len());
            let mut p = ParameterSet::new();
            p.insert("a.w", Tensor::new(&[split], data[..split].to_vec()).unwrap()).unwrap();
            p.insert("b", Tensor::new(&[1, data.len() - split], data[split..].to_vec()).unwrap()).unwrap();
            let back = decode(&encode(&p)).unwrap();
            let names: Vec<_> = back.names().collect();
            prop_assert_eq!(names, vec!["a.w", "b"]);
            for ((_, x), (_, y)) in p.iter().zip(back.iter()) {
                prop_assert_eq!(x.shape(), y.shape());
                let xb: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
                let yb: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(xb, yb);
            }
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"hello world, not a checkpoint").is_err());
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::from_vec(vec![1.0f32, 2.0])).unwrap();
        let bytes = encode(&p);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    }
}

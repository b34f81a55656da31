//! Binary parameter container.
//!
//! ```text
//! "FPEC"  u32 version
//! u64 header length, header bytes (config text, UTF-8)
//! u64 tensor count
//! per tensor: u64 name length, name, u64 ndim, u64 dims..., f64 payload
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::config::{parse_spec, serialize_spec};
use super::embed::EmbedTable;
use super::fourier::FourierPEParams;
use super::mlp::MlpParams;
use super::spec::{Encoder, EncoderParams, EncoderSpec};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"FPEC";
const VERSION: u32 = 1;
const MAX_LEN: u64 = 1 << 40;

pub fn save_checkpoint(encoder: &Encoder, mut w: impl Write) -> Result<()> {
    let header = serialize_spec(&encoder.spec);
    let tensors = encoder.tensors();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.ndim() as u64).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len(r: &mut impl Read, what: &str) -> Result<usize> {
    let n = read_u64(r)?;
    if n > MAX_LEN {
        return Err(Error::Checkpoint(format!("implausible {what} {n}")));
    }
    Ok(n as usize)
}

fn read_string(r: &mut impl Read, what: &str) -> Result<String> {
    let n = read_len(r, what)?;
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Checkpoint(format!("{what} is not UTF-8")))
}

pub fn load_checkpoint(mut r: impl Read) -> Result<Encoder> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let spec = parse_spec(&read_string(&mut r, "header")?)?;
    let count = read_len(&mut r, "tensor count")?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name = read_string(&mut r, "tensor name")?;
        let ndim = read_len(&mut r, "rank")?;
        let shape = (0..ndim)
            .map(|_| read_len(&mut r, "dimension"))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor `{name}`")));
        }
    }
    let mut take = |name: &str| {
        tensors
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    };
    let params = match &spec {
        EncoderSpec::Fourier(c) => EncoderParams::Fourier(FourierPEParams {
            w_r: take("w_r")?,
            mlp: MlpParams::from_named("", &mut take, c.use_layer_norm)?,
            trainable_fourier: c.trainable_fourier,
        }),
        EncoderSpec::Embed(c) => EncoderParams::Embed(EmbedTable {
            tables: (0..c.dims())
                .map(|i| take(&format!("table{i}")))
                .collect::<Result<_>>()?,
        }),
        EncoderSpec::MlpOnly(c) => EncoderParams::Mlp(MlpParams::from_named("", &mut take, c.use_layer_norm)?),
        _ => EncoderParams::None,
    };
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor `{extra}`")));
    }
    Encoder::from_parts(spec, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   b"HOMMNET\0"
//! version    u32       currently 1
//! n_sizes    u32       number of entries in layer_sizes
//! sizes      n_sizes x u64
//! per layer, in order:
//!   weights  fan_in * fan_out x f64, row-major (fan_in rows)
//!   bias     fan_out x f64
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a load reproduces the saved
//! network exactly.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::mlp::{Dense, MlpNetwork};
use crate::error::{HommError, Result};

const MAGIC: &[u8; 8] = b"HOMMNET\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(net: &MlpNetwork, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layer_sizes().len() as u32).to_le_bytes())?;
    for &s in net.layer_sizes() {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for v in net.params() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> HommError {
    HommError::contract(format!("malformed checkpoint: {}", msg.into()))
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|_| bad("truncated"))?;
    Ok(buf)
}

pub fn read_checkpoint(mut r: impl Read) -> Result<MlpNetwork> {
    if &read_array::<8>(&mut r)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n_sizes = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if n_sizes > 1024 {
        return Err(bad("implausible layer count"));
    }
    let sizes = (0..n_sizes)
        .map(|_| Ok(u64::from_le_bytes(read_array(&mut r)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_le_bytes(read_array(&mut r)?))).collect()
    };
    let mut layers = Vec::with_capacity(sizes.len().saturating_sub(1));
    for w in sizes.windows(2) {
        let weights = Array2::from_shape_vec((w[0], w[1]), read_f64s(w[0] * w[1])?)
            .map_err(|e| bad(e.to_string()))?;
        let bias = Array1::from_vec(read_f64s(w[1])?);
        layers.push(Dense { weights, bias });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes"));
    }
    MlpNetwork::from_parts(sizes, layers)
}

pub fn to_bytes(net: &MlpNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    write_checkpoint(net, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<MlpNetwork> {
    read_checkpoint(bytes)
}

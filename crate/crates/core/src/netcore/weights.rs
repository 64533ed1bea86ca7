//! Binary weight file.
//!
//! Layout: the 8 ASCII bytes `NNAS0001`, a little-endian `u32` layer count,
//! then per layer `u32 out`, `u32 in`, `u8` activation code (0 identity,
//! 1 softplus), `out·in` little-endian `f64` weights in row-major order and
//! `out` little-endian `f64` biases.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, DenseNetwork, Layer, NetError};
use crate::numkit::Mat;

pub const WEIGHTS_MAGIC: &[u8; 8] = b"NNAS0001";

pub fn write_weights<W: Write>(net: &DenseNetwork, out: &mut W) -> std::io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(WEIGHTS_MAGIC);
    buf.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        buf.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
        buf.push(layer.activation().code());
        for v in layer.weights().as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in layer.biases() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)
}

pub fn read_weights<R: Read>(input: &mut R) -> Result<DenseNetwork, NetError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|source| NetError::Io {
        path: "<stream>".into(),
        source,
    })?;
    parse(&bytes)
}

pub fn save_weights(net: &DenseNetwork, path: &Path) -> Result<(), NetError> {
    let mut buf = Vec::new();
    write_weights(net, &mut buf).expect("writing to memory");
    fs::write(path, buf).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_weights(path: &Path) -> Result<DenseNetwork, NetError> {
    let bytes = fs::read(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, section: &dyn Fn() -> String) -> Result<&'a [u8], NetError> {
        if self.bytes.len() - self.pos < n {
            return Err(NetError::Truncated { section: section() });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, section: &dyn Fn() -> String) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, section: &dyn Fn() -> String) -> Result<Vec<f64>, NetError> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| NetError::Truncated { section: section() })?,
            section,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn parse(bytes: &[u8]) -> Result<DenseNetwork, NetError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(8, &|| "header".into())?;
    if magic != WEIGHTS_MAGIC {
        return Err(NetError::BadMagic {
            expected: String::from_utf8_lossy(WEIGHTS_MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let count = cur.u32(&|| "header".into())? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for l in 0..count {
        let header = || format!("layer {l} header");
        let out = cur.u32(&header)? as usize;
        let inp = cur.u32(&header)? as usize;
        let code = cur.take(1, &header)?[0];
        let activation = Activation::from_code(code).ok_or(NetError::UnknownActivation { layer: l, code })?;
        let weights = cur.f64s(out * inp, &|| format!("layer {l} weights"))?;
        let biases = cur.f64s(out, &|| format!("layer {l} biases"))?;
        let weights =
            Mat::from_row_major(out, inp, weights).map_err(|_| NetError::NonFinite(format!("layer {l} weights")))?;
        layers.push(Layer::new(weights, biases, activation)?);
    }
    if cur.pos != bytes.len() {
        return Err(NetError::Inconsistent(format!(
            "{} trailing bytes after {count} layers",
            bytes.len() - cur.pos
        )));
    }
    DenseNetwork::new(layers).map_err(|e| match e {
        NetError::LayerChain { .. } | NetError::FinalActivation | NetError::NoLayers => {
            NetError::Inconsistent(e.to_string())
        }
        other => other,
    })
}

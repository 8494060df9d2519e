//! Binary checkpoint: magic, format version, output mode, layer table, then
//! little-endian `f64` arrays (parameters, input mean, input std, output
//! scale). Hyperparameters go to a `key = value` text sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use super::net::{NetConfig, Network, Normalization, OutputMode};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DNNMGNET";
const VERSION: u32 = 1;

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut b = Vec::with_capacity(64 + 8 * (net.params.len() + 2 * net.config.input + 1));
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.push(net.mode.tag());
    for d in net.config.dims() {
        b.extend_from_slice(&(d as u64).to_le_bytes());
    }
    b.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
    for v in net.params.iter().chain(&net.norm.mean).chain(&net.norm.std) {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&net.norm.output_scale.to_le_bytes());
    b
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self.b.get(self.pos..self.pos + n).ok_or_else(|| Error::Data("checkpoint truncated".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn from_bytes(b: &[u8]) -> Result<Network> {
    let mut r = Reader { b, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Data("not a network checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Data(format!("unsupported checkpoint version {version}")));
    }
    let mode = OutputMode::from_tag(r.take(1)?[0])?;
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u64()? as usize;
    }
    let config = NetConfig::from_dims(dims)?;
    let n = r.u64()? as usize;
    if n != config.num_params() {
        return Err(Error::Data(format!("checkpoint has {n} parameters, layer table implies {}", config.num_params())));
    }
    let params = r.f64s(n)?;
    let mean = r.f64s(config.input)?;
    let std = r.f64s(config.input)?;
    let output_scale = r.f64s(1)?[0];
    if r.pos != b.len() {
        return Err(Error::Data("trailing bytes in checkpoint".into()));
    }
    Ok(Network { config, mode, params, norm: Normalization { mean, std, output_scale } })
}

/// Path of the text sidecar next to a checkpoint.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Writes the checkpoint and its sidecar with the given `key = value` pairs.
pub fn save(net: &Network, path: &Path, meta: &[(&str, String)]) -> Result<()> {
    fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))?;
    let mut text = format!("mode = {:?}\nparams = {}\n", net.mode, net.num_params());
    for (k, v) in meta {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let side = sidecar_path(path);
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

pub fn load(path: &Path) -> Result<Network> {
    let b = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&b)
}

/// Reads the sidecar as key/value pairs.
pub fn load_sidecar(path: &Path) -> Result<Vec<(String, String)>> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

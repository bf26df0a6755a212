//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "MINIFMR\0"
//! version  u32
//! config   u32 length + UTF-8 `key=value` lines
//! seed     u64
//! epoch    u64
//! count    u32
//! count × { name: u32 length + UTF-8, rank: u32, dims: rank × u64, data: numel × f64 }
//! adam     u8 flag; when 1: lr, beta1, beta2, eps as f64, t as u64,
//!          then m and v for every parameter in the order above
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::AdamState;
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig, Seq2Seq};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MINIFMR\0";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub adam: Option<AdamState>,
    pub seed: u64,
    /// Number of completed epochs.
    pub epoch: u64,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_checkpoint(model: &Model, adam: Option<&AdamState>, seed: u64, epoch: u64) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_str(&mut out, &model.config().to_kv());
    put_u64(&mut out, seed);
    put_u64(&mut out, epoch);
    let store = model.store();
    put_u32(&mut out, store.len() as u32);
    for (_, p) in store.iter() {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.value.rank() as u32);
        for &d in p.value.shape() {
            put_u64(&mut out, d as u64);
        }
        put_f64s(&mut out, p.value.data());
    }
    match adam {
        None => out.push(0),
        Some(a) => {
            out.push(1);
            put_f64s(&mut out, &[a.lr, a.beta1, a.beta2, a.eps]);
            put_u64(&mut out, a.t);
            for m in &a.m {
                put_f64s(&mut out, m);
            }
            for v in &a.v {
                put_f64s(&mut out, v);
            }
        }
    }
    out
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn save_checkpoint(path: &Path, model: &Model, adam: Option<&AdamState>, seed: u64, epoch: u64) -> Result<()> {
    let bytes = encode_checkpoint(model, adam, seed, epoch);
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(Error::Truncated(what))?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let config =
        ModelConfig::from_kv(&r.string("model config")?).map_err(|e| Error::Format(format!("model config: {e}")))?;
    let seed = r.u64("seed")?;
    let epoch = r.u64("epoch")?;
    let mut model = Model::new(&config, seed)?;
    let count = r.u32("parameter count")? as usize;
    let mut order = Vec::with_capacity(count);
    let mut seen = vec![false; model.store().len()];
    for _ in 0..count {
        let name = r.string("parameter name")?;
        let rank = r.u32("parameter rank")? as usize;
        let shape = (0..rank)
            .map(|_| r.u64("parameter shape").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel = shape.iter().product();
        let data = r.f64s(numel, "parameter data")?;
        let id = model
            .store()
            .id(&name)
            .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
        let param = model.store_mut().get_mut(id);
        if param.value.shape() != shape.as_slice() {
            return Err(Error::Format(format!(
                "parameter `{name}` has shape {shape:?}, model expects {:?}",
                param.value.shape()
            )));
        }
        param.value = Tensor::new(&shape, data)?;
        seen[id.index()] = true;
        order.push((id.index(), numel));
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let name = model
            .store()
            .iter()
            .nth(missing)
            .map(|(_, p)| p.name.clone())
            .unwrap_or_default();
        return Err(Error::Format(format!("parameter `{name}` missing from checkpoint")));
    }
    let adam = match r.u8("optimizer flag")? {
        0 => None,
        1 => {
            let h = r.f64s(4, "optimizer hyperparameters")?;
            let t = r.u64("optimizer step")?;
            let mut state = AdamState::new(model.store(), h[0]);
            state.beta1 = h[1];
            state.beta2 = h[2];
            state.eps = h[3];
            state.t = t;
            for &(idx, numel) in &order {
                state.m[idx] = r.f64s(numel, "optimizer moments")?;
            }
            for &(idx, numel) in &order {
                state.v[idx] = r.f64s(numel, "optimizer moments")?;
            }
            Some(state)
        }
        other => return Err(Error::Format(format!("bad optimizer flag {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint {
        model,
        adam,
        seed,
        epoch,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

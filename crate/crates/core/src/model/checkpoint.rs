//! Binary checkpoint: `SMN1` magic, u32 version, a length-prefixed
//! `key=value` configuration block, then named f32 tensors until EOF.
//! All integers are little-endian.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::net::SeismoNet;
use crate::error::{Error, Result};
use crate::nn::Real;

pub const MAGIC: &[u8; 4] = b"SMN1";
pub const VERSION: u32 = 1;

fn tensors<T: Real>(model: &SeismoNet<T>) -> Vec<(String, Vec<usize>, Vec<f32>)> {
    let f32s = |v: &[T]| v.iter().map(|x| x.as_f64() as f32).collect::<Vec<_>>();
    let mut out: Vec<_> = model
        .params
        .iter()
        .map(|(name, p)| (name.to_string(), p.dims.clone(), f32s(&p.value)))
        .collect();
    for (name, stats) in model.batchnorm_stats() {
        let c = stats.running_mean.len();
        out.push((
            format!("{name}.running_mean"),
            vec![c],
            f32s(&stats.running_mean),
        ));
        out.push((
            format!("{name}.running_var"),
            vec![c],
            f32s(&stats.running_var),
        ));
    }
    out
}

pub fn write_checkpoint<T: Real, W: Write>(model: &SeismoNet<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let mut text = String::new();
    for (k, v) in model.config().to_pairs() {
        text.push_str(&format!("{k}={v}\n"));
    }
    text.push_str(&format!("epoch={}\n", model.epoch));
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    for (name, dims, values) in tensors(model) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint<T: Real>(model: &SeismoNet<T>, path: &Path) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn utf8(bytes: &[u8], what: &str) -> Result<String> {
    String::from_utf8(bytes.to_vec()).map_err(|_| Error::Checkpoint(format!("{what} is not UTF-8")))
}

pub fn read_checkpoint<T: Real, R: Read>(mut r: R) -> Result<SeismoNet<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint(
            "bad magic, not a model checkpoint".into(),
        ));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = c.u32("config length")? as usize;
    let text = utf8(c.take(len, "config")?, "config")?;
    let mut config = ModelConfig::default();
    let mut epoch = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("malformed config line `{line}`")))?;
        if k == "epoch" {
            epoch = v
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad epoch `{v}`")))?;
        } else {
            config
                .set(k, v)
                .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
        }
    }
    let mut model =
        SeismoNet::<T>::new(&config, 0).map_err(|e| Error::Checkpoint(e.to_string()))?;
    model.epoch = epoch;

    let mut found: HashMap<String, (Vec<usize>, Vec<f32>)> = HashMap::new();
    while !c.at_end() {
        let n = c.u32("tensor name length")? as usize;
        let name = utf8(c.take(n, "tensor name")?, "tensor name")?;
        let rank = c.u32("tensor rank")? as usize;
        let dims = (0..rank)
            .map(|_| c.u64("tensor dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = dims.iter().product();
        let raw = c.take(count.saturating_mul(4), "tensor values")?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if found.insert(name.clone(), (dims, values)).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor `{name}`")));
        }
    }

    let mut take = |name: &str, dims: &[usize]| -> Result<Vec<T>> {
        let (d, v) = found
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
        if d != dims {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has dims {d:?}, model expects {dims:?}"
            )));
        }
        Ok(v.into_iter().map(|x| T::lit(x as f64)).collect())
    };
    for (name, p) in model.params.iter_mut() {
        p.value = take(name, &p.dims)?;
    }
    for (name, stats) in model.batchnorm_stats_mut() {
        let c = [stats.running_mean.len()];
        stats.running_mean = take(&format!("{name}.running_mean"), &c)?;
        stats.running_var = take(&format!("{name}.running_var"), &c)?;
    }
    if let Some(extra) = found.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor `{extra}`")));
    }
    Ok(model)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<SeismoNet<T>> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

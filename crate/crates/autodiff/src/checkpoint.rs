//! Parameter checkpoints.
//!
//! A text index followed by raw little-endian `f64` blocks:
//!
//! ```text
//! SRRCKPT/1
//! meta {"blocks":4,...}
//! param block0.conv1.weight 32x2x3x3 0 576
//! ...
//! end
//! <binary payload>
//! ```
//!
//! Offsets count bytes from the start of the payload; counts are values.

use std::fs;
use std::path::Path;

use crate::error::{AdError, AdResult};
use crate::nn::ParamSet;
use crate::tensor::Tensor;

pub const CKPT_MAGIC: &str = "SRRCKPT/1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub params: ParamSet,
}

fn bad(path: &Path, reason: impl Into<String>) -> AdError {
    AdError::Checkpoint { path: path.to_path_buf(), reason: reason.into() }
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value, params: ParamSet) -> Checkpoint {
        Checkpoint { meta, params }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{CKPT_MAGIC}\nmeta {}\n", serde_json::to_string(&self.meta).expect("json"));
        let mut offset = 0usize;
        for (name, t) in self.params.iter() {
            let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
            header.push_str(&format!("param {name} {} {offset} {}\n", dims.join("x"), t.len()));
            offset += 8 * t.len();
        }
        header.push_str("end\n");
        let mut bytes = header.into_bytes();
        for (_, t) in self.params.iter() {
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> AdResult<Checkpoint> {
        let end_marker = b"\nend\n";
        let split = bytes
            .windows(end_marker.len())
            .position(|w| w == end_marker)
            .ok_or_else(|| bad(path, "missing end of index"))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad(path, "index is not UTF-8"))?;
        let payload = &bytes[split + end_marker.len()..];
        let mut lines = header.lines();
        if lines.next() != Some(CKPT_MAGIC) {
            return Err(bad(path, "missing SRRCKPT/1 magic"));
        }
        let meta_line =
            lines.next().and_then(|l| l.strip_prefix("meta ")).ok_or_else(|| bad(path, "missing meta line"))?;
        let meta: serde_json::Value =
            serde_json::from_str(meta_line).map_err(|e| bad(path, format!("meta is not JSON: {e}")))?;
        let mut params = ParamSet::new();
        let mut expected_offset = 0usize;
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [kw, name, dims, offset, count] = toks[..] else {
                return Err(bad(path, format!("malformed index line {line:?}")));
            };
            if kw != "param" {
                return Err(bad(path, format!("unexpected index entry {kw:?}")));
            }
            let dims: Vec<usize> = dims
                .split('x')
                .map(|d| d.parse().map_err(|_| bad(path, format!("bad dims for {name}"))))
                .collect::<AdResult<_>>()?;
            let offset: usize = offset.parse().map_err(|_| bad(path, format!("bad offset for {name}")))?;
            let count: usize = count.parse().map_err(|_| bad(path, format!("bad count for {name}")))?;
            if count != dims.iter().product::<usize>() {
                return Err(bad(path, format!("{name}: count {count} does not match dims {dims:?}")));
            }
            if offset != expected_offset || offset + 8 * count > payload.len() {
                return Err(bad(path, format!("{name}: block at {offset} (+{count} values) is out of place")));
            }
            if params.get(name).is_some() {
                return Err(bad(path, format!("duplicate parameter {name}")));
            }
            let data = payload[offset..offset + 8 * count]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            params.insert(name, Tensor::new(&dims, data)?);
            expected_offset = offset + 8 * count;
        }
        if expected_offset != payload.len() {
            return Err(bad(path, format!("payload has {} bytes, index covers {expected_offset}", payload.len())));
        }
        Ok(Checkpoint { meta, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> AdResult<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| AdError::Io { path: parent.to_path_buf(), source: e })?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| AdError::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load(path: impl AsRef<Path>) -> AdResult<Checkpoint> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| AdError::Io { path: path.to_path_buf(), source: e })?;
        Checkpoint::from_bytes(&bytes, path)
    }
}

//! Binary checkpoint container for a set of view models.
//!
//! Layout (little endian):
//!
//! ```text
//! b"DWCLCKPT" | u32 version | u64 header_len | header JSON | payload
//! ```
//!
//! The JSON header lists every view's layer specs, Adam step and parameter
//! count, plus a free-form `meta` object (the training config that produced
//! the models). The payload holds, per view, the flat parameters followed by
//! the Adam first and second moments, each `parameter_count` f64 values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, Dense, LayerSpec, Mlp, ViewModel};
use crate::linalg::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"DWCLCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub models: Vec<ViewModel>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    views: Vec<ViewHeader>,
}

#[derive(Serialize, Deserialize)]
struct ViewHeader {
    encoder: Vec<LayerSpec>,
    projection: Vec<LayerSpec>,
    decoder: Vec<LayerSpec>,
    adam_step: u64,
    parameter_count: usize,
}

pub fn write_checkpoint(path: &Path, models: &[ViewModel], meta: serde_json::Value) -> Result<()> {
    let header = Header {
        meta,
        views: models
            .iter()
            .map(|m| ViewHeader {
                encoder: m.encoder.specs(),
                projection: m.projection.specs(),
                decoder: m.decoder.specs(),
                adam_step: m.adam.step,
                parameter_count: m.parameter_count(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for m in models {
        let moments = m.adam.first.iter().chain(&m.adam.second).flatten();
        for v in m.parameter_slices().flatten().chain(moments) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes")) as usize;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)?;

    let mut models = Vec::with_capacity(header.views.len());
    for vh in &header.views {
        let mut model = ViewModel {
            encoder: empty_mlp(&vh.encoder)?,
            projection: empty_mlp(&vh.projection)?,
            decoder: empty_mlp(&vh.decoder)?,
            adam: AdamState::default(),
        };
        if model.parameter_count() != vh.parameter_count {
            return Err(Error::Checkpoint("parameter count disagrees with layer specs".into()));
        }
        let params = cur.f64s(vh.parameter_count)?;
        model.set_flat_parameters(&params)?;
        let sizes = model.parameter_sizes();
        let mut adam = AdamState::for_sizes(sizes.clone());
        adam.step = vh.adam_step;
        for buf in adam.first.iter_mut().chain(adam.second.iter_mut()) {
            let vals = cur.f64s(buf.len())?;
            buf.copy_from_slice(&vals);
        }
        model.adam = adam;
        models.push(model);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        meta: header.meta,
        models,
    })
}

fn empty_mlp(specs: &[LayerSpec]) -> Result<Mlp> {
    if specs.is_empty() {
        return Err(Error::Checkpoint("empty layer stack".into()));
    }
    for w in specs.windows(2) {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::Checkpoint("layer dims do not chain".into()));
        }
    }
    Ok(Mlp {
        layers: specs
            .iter()
            .map(|&spec| Dense {
                spec,
                weight: Matrix::zeros(spec.in_dim, spec.out_dim),
                bias: vec![0.0; spec.out_dim],
            })
            .collect(),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

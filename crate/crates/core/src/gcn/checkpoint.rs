//! Checkpoint layout: `u64` little-endian header length, a JSON shape header,
//! then `W1, b1, W2, b2` as row-major little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{EpochRecord, GcnModel};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    n_features: usize,
    hidden: usize,
    n_classes: usize,
    dropout_rate: f64,
    seed: u64,
}

pub fn save_checkpoint(model: &GcnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = serde_json::to_vec(&Header {
        n_features: model.n_features(),
        hidden: model.hidden(),
        n_classes: model.n_classes(),
        dropout_rate: model.dropout_rate,
        seed: model.seed,
    })
    .expect("header serializes");
    let mut buf = Vec::with_capacity(8 + header.len() + 8 * (model.w1.len() + model.w2.len() + 64));
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in model.w1.iter().chain(&model.b1).chain(&model.w2).chain(&model.b2) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<GcnModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: &str| Error::parse(path.display().to_string(), detail);
    if bytes.len() < 8 {
        return Err(bad("truncated header length"));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body_start = 8usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
    let h: Header = serde_json::from_slice(&bytes[8..body_start]).map_err(|e| Error::parse(path.display().to_string(), e))?;
    let (d, hid, c) = (h.n_features, h.hidden, h.n_classes);
    let expected = d * hid + hid + hid * c + c;
    let body = &bytes[body_start..];
    if body.len() != expected * 8 {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint holds {} parameters, header implies {expected}",
            body.len() / 8
        )));
    }
    let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |n: usize| vals.by_ref().take(n).collect::<Vec<f64>>();
    let w1 = Array2::from_shape_vec((d, hid), take(d * hid)).expect("sized");
    let b1 = Array1::from(take(hid));
    let w2 = Array2::from_shape_vec((hid, c), take(hid * c)).expect("sized");
    let b2 = Array1::from(take(c));
    Ok(GcnModel {
        w1,
        b1,
        w2,
        b2,
        dropout_rate: h.dropout_rate,
        seed: h.seed,
    })
}

/// `epoch,train_loss,val_acc` rows.
pub fn write_history_csv(history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "epoch,train_loss,val_acc").expect("in-memory write");
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.train_loss, r.val_acc).expect("in-memory write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

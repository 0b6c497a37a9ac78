//! `AV1CKPT_` model checkpoints.
//!
//! Layout (little-endian): 8-byte magic, u32 version, u32-prefixed JSON model
//! config, u32 class count and u16-prefixed class ids, u32 block count, then
//! per block a u16-prefixed name, u8 rank, u64 dims and f32 payload. A u8
//! flag follows; when set, the Adam state is appended as four f64
//! hyper-parameters, a u64 step and the first and second moments in block
//! order.

use std::path::Path;

use super::{A2vError, AuthorVecModel, ModelConfig};
use crate::binio::{ByteReader, PutLe, Short};
use crate::nnkernel::{AdamConfig, AdamState, Params};

pub const CKPT_MAGIC: &[u8; 8] = b"AV1CKPT_";
pub const CKPT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: AuthorVecModel,
    pub optimizer: Option<AdamState<f32>>,
}

impl From<Short> for A2vError {
    fn from(s: Short) -> Self {
        A2vError::Checkpoint(format!(
            "truncated at byte {} (needed {} more)",
            s.at, s.needed
        ))
    }
}

fn corrupt(msg: impl Into<String>) -> A2vError {
    A2vError::Checkpoint(msg.into())
}

fn get_str16(r: &mut ByteReader<'_>) -> Result<String, A2vError> {
    let len = r.u16()? as usize;
    std::str::from_utf8(r.take(len)?)
        .map(str::to_string)
        .map_err(|_| corrupt("string is not UTF-8"))
}

/// Length check before allocation so a corrupt count cannot exhaust memory.
fn checked_count(r: &ByteReader<'_>, count: u64, min_bytes_each: u64) -> Result<usize, A2vError> {
    if count.saturating_mul(min_bytes_each) > r.remaining() as u64 {
        return Err(corrupt(format!(
            "count {count} exceeds remaining file size"
        )));
    }
    Ok(count as usize)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CKPT_MAGIC);
        out.put_u32(CKPT_VERSION);
        let config = serde_json::to_vec(&self.model.config).expect("model config serializes");
        out.put_u32(config.len() as u32);
        out.extend_from_slice(&config);
        out.put_u32(self.model.classes.len() as u32);
        for c in &self.model.classes {
            out.put_str16(c);
        }
        let blocks = self.model.net.params();
        out.put_u32(blocks.len() as u32);
        for b in &blocks {
            out.put_str16(&b.name);
            out.put_u8(b.shape.len() as u8);
            for &d in &b.shape {
                out.put_u64(d as u64);
            }
            b.data.iter().for_each(|&v| out.put_f32(v));
        }
        match &self.optimizer {
            None => out.put_u8(0),
            Some(adam) => {
                out.put_u8(1);
                let c = adam.config;
                for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
                    out.put_f64(v);
                }
                out.put_u64(adam.step);
                for m in adam.first.iter().chain(&adam.second) {
                    m.iter().for_each(|&v| out.put_f32(v));
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, A2vError> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(8).map_err(|_| corrupt("file shorter than magic"))?;
        if magic != CKPT_MAGIC {
            return Err(corrupt(format!("bad magic {magic:?}")));
        }
        let version = r.u32()?;
        if version != CKPT_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let config_len = r.u32()? as usize;
        let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
            .map_err(|e| corrupt(format!("model config: {e}")))?;
        // Guard against configs that would allocate absurd parameter counts.
        let approx_params =
            6 * (config.input_dim as u128 + config.hidden as u128) * config.hidden as u128
                + 2 * config.hidden as u128 * config.code_dim as u128;
        if approx_params > bytes.len() as u128 / 4 + 1 {
            return Err(corrupt("model config larger than file"));
        }
        let n_classes = r.u32()? as u64;
        let n_classes = checked_count(&r, n_classes, 2)?;
        let classes = (0..n_classes)
            .map(|_| get_str16(&mut r))
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = if classes.is_empty() {
            AuthorVecModel::new_headless(config, 0)
        } else {
            AuthorVecModel::new(config, classes, 0)
        }
        .map_err(|e| corrupt(format!("invalid model: {e}")))?;
        if model.class_index().len() != model.classes.len() {
            return Err(corrupt("duplicate class id"));
        }

        let n_blocks = r.u32()? as usize;
        let mut views = model.net.params_mut();
        if n_blocks != views.len() {
            return Err(corrupt(format!(
                "expected {} parameter blocks, found {n_blocks}",
                views.len()
            )));
        }
        for view in views.iter_mut() {
            let name = get_str16(&mut r)?;
            let rank = r.u8()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            if name != view.name || shape != view.shape {
                return Err(corrupt(format!(
                    "block {name:?} {shape:?} does not match expected {:?} {:?}",
                    view.name, view.shape
                )));
            }
            let data = r.f32_vec(view.data.len())?;
            view.data.copy_from_slice(&data);
        }
        drop(views);

        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let config = AdamConfig {
                    learning_rate: r.f64()?,
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    epsilon: r.f64()?,
                };
                let step = r.u64()?;
                let lens: Vec<usize> = model.net.params().iter().map(|p| p.data.len()).collect();
                let first = lens
                    .iter()
                    .map(|&n| r.f32_vec(n))
                    .collect::<Result<Vec<_>, _>>()?;
                let second = lens
                    .iter()
                    .map(|&n| r.f32_vec(n))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(AdamState {
                    config,
                    step,
                    first,
                    second,
                })
            }
            f => return Err(corrupt(format!("bad optimizer flag {f}"))),
        };
        if r.remaining() != 0 {
            return Err(corrupt(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { model, optimizer })
    }

    pub fn save(&self, path: &Path) -> Result<(), A2vError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, A2vError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

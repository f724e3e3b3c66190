use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{Dense, Head, ModelDims, ModelParams};
use super::DuoencError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 5;

/// Write `TCKP`, then little-endian u32 version, text_dim, audio_dim,
/// embed_dim and hidden_dim, then every parameter block as little-endian f64
/// in [`ModelParams::blocks`] order.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), DuoencError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_checkpoint(params))?;
    w.flush()?;
    Ok(())
}

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let d = params.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [CHECKPOINT_VERSION, d.text_dim as u32, d.audio_dim as u32, d.embed_dim as u32, d.hidden_dim as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (_, block) in params.blocks() {
        for x in block {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, DuoencError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

/// Load and require specific dimensions.
pub fn load_checkpoint_expecting(path: &Path, dims: ModelDims) -> Result<ModelParams, DuoencError> {
    let params = load_checkpoint(path)?;
    if params.dims() != dims {
        return Err(DuoencError::CheckpointDims {
            expected: dims,
            found: params.dims(),
        });
    }
    Ok(params)
}

fn zero_head(in_dim: usize, hidden: usize, embed: usize) -> Head {
    let dense = |o: usize, i: usize| Dense {
        weight: Array2::zeros((o, i)),
        bias: Array1::zeros(o),
    };
    if hidden == 0 {
        Head { hidden: None, out: dense(embed, in_dim) }
    } else {
        Head {
            hidden: Some(dense(hidden, in_dim)),
            out: dense(embed, hidden),
        }
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams, DuoencError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(DuoencError::CorruptCheckpoint("bad magic or short header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != CHECKPOINT_VERSION {
        return Err(DuoencError::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let (text_dim, audio_dim, embed_dim, hidden_dim) =
        (word(1) as usize, word(2) as usize, word(3) as usize, word(4) as usize);
    if text_dim == 0 || audio_dim == 0 || embed_dim == 0 {
        return Err(DuoencError::CorruptCheckpoint("zero dimension in header".into()));
    }
    let mut params = ModelParams {
        text: zero_head(text_dim, hidden_dim, embed_dim),
        audio: zero_head(audio_dim, hidden_dim, embed_dim),
        log_temperature: 0.0,
    };
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * params.num_params() {
        return Err(DuoencError::CorruptCheckpoint(format!(
            "expected {} parameter bytes, found {}",
            8 * params.num_params(),
            body.len()
        )));
    }
    let flat: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    params.set_flat(&flat);
    if !params.is_finite() {
        return Err(DuoencError::CorruptCheckpoint("non-finite parameter".into()));
    }
    Ok(params)
}

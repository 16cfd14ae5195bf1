//! Head checkpoints.
//!
//! ```text
//! "SRCK" | version u8 (0x01) | header_len u32 LE | header JSON (UTF-8)
//!        | image-head blocks | text-head blocks
//! ```
//!
//! Blocks follow declaration order (`latents, w_q, w_k, w_v, w_o` or
//! `score, proj`), each row-major as 32-bit little-endian floats. The header
//! carries both head configs, the log logit scale, the seed and the step
//! count.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{init_head, DualEncoder, Head, HeadConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SRCK";
const CHECKPOINT_VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub image: HeadConfig,
    pub text: HeadConfig,
    pub log_scale: f64,
    pub learnable_scale: bool,
    pub seed: u64,
    pub step: u64,
}

pub fn write_checkpoint(path: impl AsRef<Path>, model: &DualEncoder, seed: u64, step: u64) -> Result<()> {
    let path = path.as_ref();
    let header = CheckpointHeader {
        image: model.image.config,
        text: model.text.config,
        log_scale: model.log_scale,
        learnable_scale: model.learnable_scale,
        seed,
        step,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(CHECKPOINT_MAGIC)?;
    write(&[CHECKPOINT_VERSION])?;
    write(&(json.len() as u32).to_le_bytes())?;
    write(&json)?;
    for head in [&model.image, &model.text] {
        for (name, block) in head.params.blocks() {
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    tensor: name.to_string(),
                });
            }
            for &v in block.iter() {
                write(&(v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(DualEncoder, CheckpointHeader)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let fail = |msg: String| Error::Format(format!("{}: {msg}", path.display()));

    if bytes.len() < 9 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(fail("not a checkpoint (bad magic)".into()));
    }
    if bytes[4] != CHECKPOINT_VERSION {
        return Err(fail(format!("unsupported version {:#04x}", bytes[4])));
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let header_end = 9 + header_len;
    let header_bytes = bytes
        .get(9..header_end)
        .ok_or_else(|| fail("truncated header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(header_bytes).map_err(|e| fail(format!("header: {e}")))?;

    let mut floats = bytes[header_end..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())));
    let payload_floats = (bytes.len() - header_end) / 4;
    let mut load = |config: HeadConfig| -> Result<Head> {
        let mut params = init_head(&config, 0)?;
        for (_, block) in params.blocks_mut() {
            for v in block.iter_mut() {
                *v = floats
                    .next()
                    .ok_or_else(|| fail("truncated parameter payload".into()))?;
            }
        }
        Head::from_params(config, params)
    };
    let image = load(header.image)?;
    let text = load(header.text)?;
    let used = image.params.parameter_count() + text.params.parameter_count();
    if used != payload_floats || !(bytes.len() - header_end).is_multiple_of(4) {
        return Err(fail(format!(
            "payload holds {payload_floats} floats, configs need {used}"
        )));
    }
    let model = DualEncoder {
        image,
        text,
        log_scale: header.log_scale,
        learnable_scale: header.learnable_scale,
    };
    Ok((model, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resampler_head::HeadMode;

    #[test]
    fn round_trip_at_f32_precision() {
        let model = DualEncoder::new(
            HeadConfig::new(6, HeadMode::Perceiver),
            HeadConfig::new(6, HeadMode::LearnablePool),
            3,
            0.07,
            true,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        write_checkpoint(&path, &model, 3, 120).unwrap();
        let (back, header) = read_checkpoint(&path).unwrap();
        assert_eq!(header.step, 120);
        assert_eq!(back.log_scale, model.log_scale);
        for (a, b) in [(&model.image, &back.image), (&model.text, &back.text)] {
            assert_eq!(a.config, b.config);
            for ((_, x), (_, y)) in a.params.blocks().into_iter().zip(b.params.blocks()) {
                for (u, v) in x.iter().zip(y.iter()) {
                    assert_eq!(*u as f32 as f64, *v);
                }
            }
        }
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let model = DualEncoder::new(
            HeadConfig::new(4, HeadMode::Perceiver),
            HeadConfig::new(4, HeadMode::Perceiver),
            1,
            0.07,
            false,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        write_checkpoint(&path, &model, 1, 0).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}

//! `SEMB` embedding tables.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SEMB" | version u8 (0x01) | n u32 | d u32 | n*d f32 row-major
//! ```
//!
//! Row descriptors live in a JSON Lines sidecar at `<path>.idx.jsonl`, line
//! `i` describing row `i`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::jsonl::{read_jsonl, write_jsonl};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"SEMB";
pub const EMBEDDING_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 4 + 4;

/// Which frame of a segment a row was computed from, or the annotation text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i64", try_from = "i64")]
pub enum FrameSlot {
    Frame(u32),
    Text,
}

impl From<FrameSlot> for i64 {
    fn from(slot: FrameSlot) -> i64 {
        match slot {
            FrameSlot::Frame(i) => i as i64,
            FrameSlot::Text => -1,
        }
    }
}

impl TryFrom<i64> for FrameSlot {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, Self::Error> {
        match v {
            -1 => Ok(FrameSlot::Text),
            0..=0xFFFF_FFFF => Ok(FrameSlot::Frame(v as u32)),
            _ => Err(format!("frame_index {v} out of range")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowDescriptor {
    pub video_id: String,
    pub segment_id: String,
    pub frame_index: FrameSlot,
}

impl RowDescriptor {
    pub fn frame(video_id: impl Into<String>, segment_id: impl Into<String>, index: u32) -> Self {
        Self {
            video_id: video_id.into(),
            segment_id: segment_id.into(),
            frame_index: FrameSlot::Frame(index),
        }
    }

    pub fn text(video_id: impl Into<String>, segment_id: impl Into<String>) -> Self {
        Self {
            video_id: video_id.into(),
            segment_id: segment_id.into(),
            frame_index: FrameSlot::Text,
        }
    }
}

/// Row-aligned feature vectors plus one descriptor per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: Array2<f32>,
    index: Vec<RowDescriptor>,
}

impl EmbeddingTable {
    pub fn new(rows: Array2<f32>, index: Vec<RowDescriptor>) -> Result<Self> {
        let table = Self { rows, index };
        table.validate()?;
        Ok(table)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            rows: Array2::zeros((0, dim)),
            index: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        if self.index.len() != self.rows.nrows() {
            return Err(Error::Validation(format!(
                "index has {} descriptors for {} rows",
                self.index.len(),
                self.rows.nrows()
            )));
        }
        if let Some(row) = self.first_non_finite_row() {
            return Err(Error::Validation(format!("row {row} contains NaN or Inf")));
        }
        Ok(())
    }

    fn first_non_finite_row(&self) -> Option<usize> {
        self.rows
            .outer_iter()
            .position(|row| row.iter().any(|v| !v.is_finite()))
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rows(&self) -> &Array2<f32> {
        &self.rows
    }

    pub fn index(&self) -> &[RowDescriptor] {
        &self.index
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f32> {
        self.rows.row(i)
    }

    /// Mutable access for callers that must keep the row count fixed.
    pub fn rows_mut(&mut self) -> &mut Array2<f32> {
        &mut self.rows
    }

    pub fn into_parts(self) -> (Array2<f32>, Vec<RowDescriptor>) {
        (self.rows, self.index)
    }
}

/// Sidecar index path: the table path with `.idx.jsonl` appended.
pub fn index_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".idx.jsonl");
    PathBuf::from(s)
}

pub fn write_embedding_table(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(row) = table.first_non_finite_row() {
        return Err(Error::Validation(format!(
            "refusing to write {}: row {row} contains NaN or Inf",
            path.display()
        )));
    }
    table.validate()?;
    let n = u32::try_from(table.len())
        .map_err(|_| Error::Validation("row count exceeds u32".into()))?;
    let d = u32::try_from(table.dim())
        .map_err(|_| Error::Validation("dimension exceeds u32".into()))?;

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(EMBEDDING_MAGIC);
    header.push(EMBEDDING_VERSION);
    header.extend_from_slice(&n.to_le_bytes());
    header.extend_from_slice(&d.to_le_bytes());
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for v in table.rows.iter() {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    write_jsonl(&index_path(path), &table.index)
}

pub fn read_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let rows = decode_rows(&bytes).map_err(|msg| Error::Format(format!("{}: {msg}", path.display())))?;
    let index: Vec<RowDescriptor> = read_jsonl(&index_path(path))?;
    if index.len() != rows.nrows() {
        return Err(Error::Format(format!(
            "{}: index sidecar has {} lines but the table has {} rows",
            path.display(),
            index.len(),
            rows.nrows()
        )));
    }
    let table = EmbeddingTable { rows, index };
    table.validate()?;
    Ok(table)
}

fn decode_rows(bytes: &[u8]) -> std::result::Result<Array2<f32>, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != EMBEDDING_MAGIC {
        return Err(format!("bad magic bytes {:?}", &bytes[..4]));
    }
    if bytes[4] != EMBEDDING_VERSION {
        return Err(format!("unsupported version {:#04x}", bytes[4]));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| format!("declared shape {n}x{d} overflows"))?;
    if payload.len() < expected {
        return Err(format!(
            "truncated payload: {n}x{d} floats need {expected} bytes, found {}",
            payload.len()
        ));
    }
    if payload.len() > expected {
        return Err(format!(
            "{} trailing bytes after {n}x{d} payload",
            payload.len() - expected
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((n, d), values).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn descriptors(n: usize) -> Vec<RowDescriptor> {
        (0..n)
            .map(|i| RowDescriptor::frame("v", format!("s{i}"), i as u32))
            .collect()
    }

    #[test]
    fn empty_table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.semb");
        let table = EmbeddingTable::empty(8);
        write_embedding_table(&table, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes, b"SEMB\x01\x00\x00\x00\x00\x08\x00\x00\x00");
        assert_eq!(read_embedding_table(&path).unwrap(), table);
    }

    #[test]
    fn nan_row_is_refused_with_its_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.semb");
        // Bypass the constructor so the invalid table can reach the writer.
        let table = EmbeddingTable {
            rows: array![[1.0, 2.0], [3.0, f32::NAN], [0.0, 0.0]],
            index: descriptors(3),
        };
        let err = write_embedding_table(&table, &path).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(!path.exists());
    }

    #[test]
    fn hand_built_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hand.semb");
        let mut bytes = b"SEMB\x01".to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        for v in [1.0f32, -2.5, 0.125, 3.0, 4.0, -0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        std::fs::write(
            index_path(&path),
            "{\"video_id\":\"v\",\"segment_id\":\"a\",\"frame_index\":4}\n\
             {\"video_id\":\"v\",\"segment_id\":\"a\",\"frame_index\":-1}\n",
        )
        .unwrap();

        let table = read_embedding_table(&path).unwrap();
        assert_eq!(table.rows(), &array![[1.0f32, -2.5, 0.125], [3.0, 4.0, -0.0]]);
        assert_eq!(table.index()[0].frame_index, FrameSlot::Frame(4));
        assert_eq!(table.index()[1].frame_index, FrameSlot::Text);
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.semb");
        std::fs::write(&path, b"SEMX\x01\x00\x00\x00\x00\x01\x00\x00\x00").unwrap();
        std::fs::write(index_path(&path), "").unwrap();
        let err = read_embedding_table(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.semb");
        let table = EmbeddingTable::new(array![[1.0, 2.0], [3.0, 4.0]], descriptors(2)).unwrap();
        write_embedding_table(&table, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_embedding_table(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn index_row_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.semb");
        let table = EmbeddingTable::new(array![[1.0], [2.0]], descriptors(2)).unwrap();
        write_embedding_table(&table, &path).unwrap();
        std::fs::write(
            index_path(&path),
            "{\"video_id\":\"v\",\"segment_id\":\"a\",\"frame_index\":0}\n",
        )
        .unwrap();
        assert!(matches!(
            read_embedding_table(&path).unwrap_err(),
            Error::Format(_)
        ));
    }

    #[test]
    fn constructor_rejects_misaligned_index() {
        assert!(EmbeddingTable::new(array![[1.0], [2.0]], descriptors(1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_is_bit_exact(
            (n, d, bits) in (0usize..6, 1usize..5).prop_flat_map(|(n, d)| {
                (Just(n), Just(d), proptest::collection::vec(any::<u32>(), n * d))
            }),
            text_rows in proptest::collection::vec(any::<bool>(), 6),
        ) {
            // Any finite bit pattern, including subnormals and negative zero.
            let values: Vec<f32> = bits
                .into_iter()
                .map(|b| {
                    let v = f32::from_bits(b);
                    if v.is_finite() { v } else { f32::from_bits(b & 0x807F_FFFF) }
                })
                .collect();
            let rows = Array2::from_shape_vec((n, d), values).unwrap();
            let index = (0..n)
                .map(|i| if text_rows[i] {
                    RowDescriptor::text(format!("v{i}"), "s")
                } else {
                    RowDescriptor::frame(format!("v{i}"), "s", i as u32 * 7)
                })
                .collect();
            let table = EmbeddingTable::new(rows, index).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.semb");
            write_embedding_table(&table, &path).unwrap();
            let back = read_embedding_table(&path).unwrap();
            prop_assert_eq!(back.index(), table.index());
            let a: Vec<u32> = back.rows().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = table.rows().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}

//! Writes a small embedding table with its row index and reads it back.

use ndarray::array;
use semaug::dataset::{index_path, read_embedding_table, write_embedding_table, EmbeddingTable, RowDescriptor};

fn main() -> semaug::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("frames.semb");

    let rows = array![[0.5f32, -1.0, 2.0], [0.0, 0.25, 1.5], [3.0, 3.0, 3.0]];
    let index = vec![
        RowDescriptor::frame("vid", "s0", 0),
        RowDescriptor::frame("vid", "s0", 1),
        RowDescriptor::text("vid", "s0"),
    ];
    write_embedding_table(&EmbeddingTable::new(rows.clone(), index)?, &path)?;

    let bytes = std::fs::read(&path).expect("table bytes");
    println!("{} bytes, header {:?}", bytes.len(), &bytes[..13]);
    println!("index:\n{}", std::fs::read_to_string(index_path(&path)).expect("index"));

    let back = read_embedding_table(&path)?;
    assert_eq!(back.rows(), &rows);
    println!("round trip exact: {} rows x {} dims", back.len(), back.dim());

    let mut bad = EmbeddingTable::new(array![[1.0f32], [2.0]], vec![RowDescriptor::text("v", "a"), RowDescriptor::text("v", "b")])?;
    bad.rows_mut()[[1, 0]] = f32::NAN;
    if let Err(e) = write_embedding_table(&bad, dir.path().join("bad.semb")) {
        println!("NaN row refused: {e}");
    }
    Ok(())
}

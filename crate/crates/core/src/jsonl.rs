//! One JSON document per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses every non-blank line; errors carry the 1-based line number.
pub fn read<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn read_path<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read(BufReader::new(File::open(path)?))
}

pub fn write<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_path<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write(BufWriter::new(File::create(path)?), items)
}

/// Appending writer that keeps the file open across calls.
pub struct Appender {
    out: BufWriter<File>,
}

impl Appender {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::options().create(true).append(true).open(path)?;
        Ok(Appender { out: BufWriter::new(file) })
    }

    pub fn push<T: Serialize>(&mut self, item: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, item)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

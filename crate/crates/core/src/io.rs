//! Shared file helpers: atomic writes, FASTA, and JSON-lines.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Sequences in FASTA files wrap at this many residues per line.
pub const FASTA_WRAP: usize = 60;

/// Write `bytes` to `path` by writing a sibling temp file and renaming it
/// over the target, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, "path has no file name")
    })?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp_path = dir.join(tmp_name);
    {
        let mut file = fs::File::create(&tmp_path)?;
        file.write_all(bytes)?;
        file.flush()?;
    }
    fs::rename(&tmp_path, path)?;
    Ok(())
}

/// One FASTA record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    /// Header line content after `>`.
    pub id: String,
    pub sequence: String,
}

/// Render records with sequences wrapped at [`FASTA_WRAP`] columns.
pub fn fasta_string(records: &[FastaRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push('>');
        out.push_str(&record.id);
        out.push('\n');
        let chars: Vec<char> = record.sequence.chars().collect();
        for chunk in chars.chunks(FASTA_WRAP) {
            out.extend(chunk);
            out.push('\n');
        }
    }
    out
}

pub fn write_fasta(path: &Path, records: &[FastaRecord]) -> io::Result<()> {
    atomic_write(path, fasta_string(records).as_bytes())
}

/// Parse a FASTA file; line wrapping is undone, blank lines are skipped.
pub fn read_fasta(path: &Path) -> io::Result<Vec<FastaRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut records: Vec<FastaRecord> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            records.push(FastaRecord {
                id: header.trim().to_string(),
                sequence: String::new(),
            });
        } else {
            let Some(current) = records.last_mut() else {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("line {}: sequence data before any '>' header", lineno + 1),
                ));
            };
            current.sequence.push_str(line.trim());
        }
    }
    Ok(records)
}

/// Serialize items one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// Parse a JSON-lines file, reporting the first bad line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut items = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: {}", lineno + 1, e),
            )
        })?;
        items.push(item);
    }
    Ok(items)
}

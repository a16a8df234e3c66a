//! Batch persistence: a binary columnar format and CSV for interchange.
//!
//! Binary layout: `CHAO1`, a little-endian `u32` header length, the UTF-8
//! header of `key=value` lines, then each column as little-endian `f64`.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::SampleBatch;

const MAGIC: &[u8; 5] = b"CHAO1";

#[derive(Debug, Error)]
pub enum BatchIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed batch file: {0}")]
    Format(String),
}

fn header_lines(batch: &SampleBatch) -> Vec<String> {
    let columns = if batch.gamma.is_some() { "f,gamma" } else { "f" };
    let mut lines = vec![
        format!("seed={}", batch.seed),
        format!("chaos_order={}", batch.chaos_order),
        format!("generator={}", batch.generator),
        format!("rows={}", batch.len()),
        format!("columns={columns}"),
    ];
    lines.extend(batch.descriptor.iter().map(|(k, v)| format!("{k}={v}")));
    lines
}

pub fn encode_binary(batch: &SampleBatch) -> Vec<u8> {
    let header = header_lines(batch).join("\n");
    let mut out = Vec::with_capacity(9 + header.len() + 16 * batch.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for x in &batch.f {
        out.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(g) = &batch.gamma {
        for x in g {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn encode_csv(batch: &SampleBatch) -> String {
    let mut out: String = header_lines(batch)
        .into_iter()
        .map(|l| format!("# {l}\n"))
        .collect();
    match &batch.gamma {
        Some(g) => {
            out.push_str("f,gamma\n");
            for (f, g) in batch.f.iter().zip(g) {
                out.push_str(&format!("{f},{g}\n"));
            }
        }
        None => {
            out.push_str("f\n");
            for f in &batch.f {
                out.push_str(&format!("{f}\n"));
            }
        }
    }
    out
}

fn parse_header<'a>(
    lines: impl Iterator<Item = &'a str>,
) -> Result<(SampleBatch, usize, bool), BatchIoError> {
    let mut batch = SampleBatch {
        descriptor: Vec::new(),
        seed: 0,
        chaos_order: 0,
        f: Vec::new(),
        gamma: None,
        generator: String::new(),
    };
    let mut rows = None;
    let mut has_gamma = None;
    let bad = |what: &str| BatchIoError::Format(what.to_string());
    for line in lines.filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
        match k {
            "seed" => batch.seed = v.parse().map_err(|_| bad("seed"))?,
            "chaos_order" => batch.chaos_order = v.parse().map_err(|_| bad("chaos_order"))?,
            "generator" => batch.generator = v.to_string(),
            "rows" => rows = Some(v.parse::<usize>().map_err(|_| bad("rows"))?),
            "columns" => {
                has_gamma = Some(match v {
                    "f,gamma" => true,
                    "f" => false,
                    _ => return Err(bad("columns")),
                })
            }
            _ => batch.descriptor.push((k.to_string(), v.to_string())),
        }
    }
    Ok((
        batch,
        rows.ok_or_else(|| bad("missing rows"))?,
        has_gamma.ok_or_else(|| bad("missing columns"))?,
    ))
}

pub fn decode_binary(bytes: &[u8]) -> Result<SampleBatch, BatchIoError> {
    let bad = |what: &str| BatchIoError::Format(what.to_string());
    if bytes.len() < 9 || &bytes[..5] != MAGIC {
        return Err(bad("missing CHAO1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let header = bytes
        .get(9..9 + hlen)
        .ok_or_else(|| bad("truncated header"))?;
    let header = std::str::from_utf8(header).map_err(|_| bad("header is not UTF-8"))?;
    let (mut batch, rows, has_gamma) = parse_header(header.lines())?;
    let body = &bytes[9 + hlen..];
    let cols = if has_gamma { 2 } else { 1 };
    if body.len() != rows * cols * 8 {
        return Err(bad("column data length does not match header"));
    }
    let read = |chunk: &[u8]| -> Vec<f64> {
        chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect()
    };
    batch.f = read(&body[..rows * 8]);
    if has_gamma {
        batch.gamma = Some(read(&body[rows * 8..]));
    }
    Ok(batch)
}

pub fn decode_csv(text: &str) -> Result<SampleBatch, BatchIoError> {
    let bad = |what: String| BatchIoError::Format(what);
    let header = text.lines().filter_map(|l| l.strip_prefix("# "));
    let (mut batch, rows, has_gamma) = parse_header(header)?;
    let mut data = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let expected = if has_gamma { "f,gamma" } else { "f" };
    if data.next() != Some(expected) {
        return Err(bad(format!("expected column header '{expected}'")));
    }
    let mut gamma = Vec::new();
    for line in data {
        let mut parts = line.split(',');
        let f: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(line.to_string()))?;
        batch.f.push(f);
        if has_gamma {
            let g: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(line.to_string()))?;
            gamma.push(g);
        }
    }
    if batch.f.len() != rows {
        return Err(bad("row count does not match header".into()));
    }
    if has_gamma {
        batch.gamma = Some(gamma);
    }
    Ok(batch)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes CSV for `.csv` paths and the binary format otherwise.
pub fn write_batch(batch: &SampleBatch, path: &Path) -> Result<(), BatchIoError> {
    if is_csv(path) {
        fs::write(path, encode_csv(batch))?;
    } else {
        fs::write(path, encode_binary(batch))?;
    }
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<SampleBatch, BatchIoError> {
    if is_csv(path) {
        decode_csv(&fs::read_to_string(path)?)
    } else {
        decode_binary(&fs::read(path)?)
    }
}

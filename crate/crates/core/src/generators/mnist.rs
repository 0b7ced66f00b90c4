//! IDX file ingestion (the MNIST distribution format). Files ending in `.gz`
//! are decompressed on the fly.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use super::points::PointCloud;
use crate::error::{Error, Result};

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    let mut reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(BufReader::new(f)))
    } else {
        Box::new(BufReader::new(f))
    };
    reader.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

/// Parses an unsigned-byte IDX payload, returning its dimensions and data.
fn parse_idx(path: &Path, bytes: &[u8], rank: u8) -> Result<(Vec<usize>, Vec<u8>)> {
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(bad("not an IDX file"));
    }
    if bytes[2] != 0x08 {
        return Err(bad("only unsigned-byte IDX data is supported"));
    }
    if bytes[3] != rank {
        return Err(bad(&format!("expected rank {rank}, found {}", bytes[3])));
    }
    let header = 4 + 4 * rank as usize;
    if bytes.len() < header {
        return Err(bad("truncated header"));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let total: usize = dims.iter().product();
    if bytes.len() - header != total {
        return Err(bad(&format!(
            "payload has {} bytes, dimensions call for {total}",
            bytes.len() - header
        )));
    }
    Ok((dims, bytes[header..].to_vec()))
}

/// Images from an IDX3 file as rows of `rows*cols` pixels scaled to `[0, 1]`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = read_all(path)?;
    let (dims, data) = parse_idx(path, &bytes, 3)?;
    let pixels = dims[1] * dims[2];
    Ok((dims[0], pixels, data.into_iter().map(|b| f64::from(b) / 255.0).collect()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u32>> {
    let bytes = read_all(path)?;
    let (_, data) = parse_idx(path, &bytes, 1)?;
    Ok(data.into_iter().map(u32::from).collect())
}

/// Loads the first `limit` images (all when `None`) with their labels.
pub fn load_mnist(images: &Path, labels: &Path, limit: Option<usize>) -> Result<PointCloud> {
    let (n, pixels, mut data) = read_idx_images(images)?;
    let mut lab = read_idx_labels(labels)?;
    if lab.len() != n {
        return Err(Error::Format(format!("{n} images but {} labels", lab.len())));
    }
    let keep = limit.map_or(n, |l| l.min(n));
    data.truncate(keep * pixels);
    lab.truncate(keep);
    PointCloud::new(data, pixels, Some(lab))
}

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Latent coordinates, one row per point, with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    dim: usize,
    labels: Option<Vec<u32>>,
}

impl PointCloud {
    /// Row-major coordinates, `n * dim` values.
    pub fn new(coords: Vec<f64>, dim: usize, labels: Option<Vec<u32>>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates do not form rows of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(k) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point {} coordinate {}", k / dim, k % dim)));
        }
        let n = coords.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Shape(format!("{} labels for {n} points", l.len())));
            }
        }
        Ok(Self { coords, dim, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged point rows".into()));
        }
        Self::new(rows.concat(), dim, None)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            coords.extend(m.row(i).iter());
        }
        Self::new(coords, m.ncols(), None)
    }

    /// `n` points drawn uniformly from the unit cube `[0, 1]^dim`.
    pub fn uniform_cube(n: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut r = rng::seeded(seed);
        let coords = (0..n * dim).map(|_| r.random::<f64>()).collect();
        Self::new(coords, dim, None)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.coords)
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }

    /// Dense matrix of squared Euclidean distances.
    pub fn sq_dist_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let d = self.sq_dist(i, j);
                m[(i, j)] = d;
                m[(j, i)] = d;
            }
        }
        m
    }

    /// Reads `n d` followed by `n` rows of `d` floats, each optionally
    /// followed by an integer label.
    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, 1, "header must be \"n d\""))?;
        let [n, d] = h[..] else {
            return Err(Error::parse(path, 1, "header must be \"n d\""));
        };
        let mut coords = Vec::with_capacity(n * d);
        let mut labels = Vec::new();
        let mut rows = 0;
        for (k, line) in lines.enumerate() {
            let lineno = k + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != d && f.len() != d + 1 {
                return Err(Error::parse(path, lineno, format!("expected {d} or {} fields", d + 1)));
            }
            for v in &f[..d] {
                coords.push(
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(path, lineno, format!("bad float {v:?}")))?,
                );
            }
            if f.len() == d + 1 {
                labels.push(
                    f[d].parse::<u32>()
                        .map_err(|_| Error::parse(path, lineno, "bad label"))?,
                );
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Format(format!("{}: header says {n} rows, found {rows}", path.display())));
        }
        let labels = match labels.len() {
            0 => None,
            l if l == n => Some(labels),
            _ => return Err(Error::Format(format!("{}: labels present on some rows only", path.display()))),
        };
        Self::new(coords, d, labels)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for i in 0..self.len() {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            write!(w, "{}", row.join(" ")).map_err(io)?;
            if let Some(l) = &self.labels {
                write!(w, " {}", l[i]).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Squared Euclidean distance with independent partial sums so the loop vectorizes.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    acc.iter().sum::<f64>() + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            PointCloud::new(vec![0.0, f64::NAN], 1, None),
            Err(Error::NonFinite(_))
        ));
        assert!(PointCloud::new(vec![0.0, 1.0, 2.0], 2, None).is_err());
    }

    #[test]
    fn file_roundtrip_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pts.txt");
        let pc = PointCloud::new(vec![0.5, -1.25, 3.0, 1e-7], 2, Some(vec![4, 2])).unwrap();
        pc.write(&p).unwrap();
        assert_eq!(PointCloud::read(&p).unwrap(), pc);
        std::fs::write(&p, "2 1\n0.5\n1.5\n").unwrap();
        let pc = PointCloud::read(&p).unwrap();
        assert_eq!(pc.len(), 2);
        assert!(pc.labels().is_none());
    }

    #[test]
    fn sq_dist_matches_naive() {
        let a: Vec<f64> = (0..19).map(|k| k as f64 * 0.3).collect();
        let b: Vec<f64> = (0..19).map(|k| (k as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((sq_dist(&a, &b) - naive).abs() < 1e-12 * naive);
    }
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generators::sq_dist;

pub const DEFAULT_PURITY_K: usize = 5;

/// Mean fraction of each point's `k` nearest neighbors (self excluded,
/// ties to the smaller index) that share its label.
pub fn knn_purity(vectors: &DMatrix<f64>, labels: &[u32], k: usize) -> Result<f64> {
    let n = vectors.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} points", labels.len())));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("purity needs 1 <= k < n, got k = {k}, n = {n}")));
    }
    let d = vectors.ncols();
    let rows: Vec<f64> = (0..n).flat_map(|i| vectors.row(i).iter().copied().collect::<Vec<_>>()).collect();
    let row = |i: usize| &rows[i * d..(i + 1) * d];
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        dist.clear();
        dist.extend((0..n).filter(|&j| j != i).map(|j| (sq_dist(row(i), row(j)), j)));
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        dist.select_nth_unstable_by(k - 1, order);
        let same = dist[..k].iter().filter(|&&(_, j)| labels[j] == labels[i]).count();
        total += same as f64 / k as f64;
    }
    Ok(total / n as f64)
}

//! Regression of scaled log-conditionals on squared distances with free
//! per-row and per-column intercepts:
//! `-t̂ log P_ij = β ρ²_ij + u_i + v_j + ε`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaradhanFit {
    pub slope: f64,
    pub r_squared: f64,
    /// Row intercepts `u`, gauge-fixed so they sum to zero over rows with data.
    pub row_intercepts: Vec<f64>,
    pub col_intercepts: Vec<f64>,
    pub included: usize,
    /// Cells with a non-positive conditional or a non-finite distance.
    pub excluded: usize,
}

struct Panel {
    rows: Vec<u32>,
    cols: Vec<u32>,
    row_n: Vec<f64>,
    col_n: Vec<f64>,
}

const MAX_SWEEPS: usize = 20_000;

impl Panel {
    /// Removes the two-way fixed effects from `z` by alternating row and
    /// column demeaning.
    fn residualize(&self, z: &mut [f64]) {
        let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut rs = vec![0.0; self.row_n.len()];
        let mut cs = vec![0.0; self.col_n.len()];
        for sweep in 0..MAX_SWEEPS {
            rs.iter_mut().for_each(|v| *v = 0.0);
            for (k, &i) in self.rows.iter().enumerate() {
                rs[i as usize] += z[k];
            }
            let mut worst = 0.0f64;
            for (i, s) in rs.iter_mut().enumerate() {
                if self.row_n[i] > 0.0 {
                    *s /= self.row_n[i];
                    worst = worst.max(s.abs());
                }
            }
            for (k, &i) in self.rows.iter().enumerate() {
                z[k] -= rs[i as usize];
            }
            cs.iter_mut().for_each(|v| *v = 0.0);
            for (k, &j) in self.cols.iter().enumerate() {
                cs[j as usize] += z[k];
            }
            for (j, s) in cs.iter_mut().enumerate() {
                if self.col_n[j] > 0.0 {
                    *s /= self.col_n[j];
                    worst = worst.max(s.abs());
                }
            }
            for (k, &j) in self.cols.iter().enumerate() {
                z[k] -= cs[j as usize];
            }
            if worst <= 1e-14 * scale {
                return;
            }
            if sweep + 1 == MAX_SWEEPS {
                log::warn!("fixed-effect demeaning stopped after {MAX_SWEEPS} sweeps (last shift {worst:.3e})");
            }
        }
    }

    /// `u`, `v` minimizing `Σ (r_k - u_i - v_j)²` by block coordinate descent.
    fn intercepts(&self, r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; self.row_n.len()];
        let mut v = vec![0.0; self.col_n.len()];
        let scale = r.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        for _ in 0..MAX_SWEEPS {
            let mut nu = vec![0.0; u.len()];
            for k in 0..r.len() {
                nu[self.rows[k] as usize] += r[k] - v[self.cols[k] as usize];
            }
            let mut nv = vec![0.0; v.len()];
            for (i, x) in nu.iter_mut().enumerate() {
                if self.row_n[i] > 0.0 {
                    *x /= self.row_n[i];
                }
            }
            for k in 0..r.len() {
                nv[self.cols[k] as usize] += r[k] - nu[self.rows[k] as usize];
            }
            for (j, x) in nv.iter_mut().enumerate() {
                if self.col_n[j] > 0.0 {
                    *x /= self.col_n[j];
                }
            }
            let change = u
                .iter()
                .zip(&nu)
                .chain(v.iter().zip(&nv))
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            u = nu;
            v = nv;
            if change <= 1e-14 * scale {
                break;
            }
        }
        (u, v)
    }
}

/// Fits the diagnostic regression on cells with positive `conditionals`
/// (conditional probabilities or raw counts; row scale is absorbed by `u`).
pub fn varadhan_diagnostic(
    conditionals: &DMatrix<f64>,
    sq_dist: &DMatrix<f64>,
    t_hat: f64,
) -> Result<VaradhanFit> {
    let (n, m) = conditionals.shape();
    if sq_dist.shape() != (n, m) {
        return Err(Error::Shape(format!(
            "conditionals {:?} vs distances {:?}",
            (n, m),
            sq_dist.shape()
        )));
    }
    if !(t_hat > 0.0 && t_hat.is_finite()) {
        return Err(Error::InvalidConfig(format!("time scale must be positive, got {t_hat}")));
    }
    let mut panel = Panel {
        rows: Vec::new(),
        cols: Vec::new(),
        row_n: vec![0.0; n],
        col_n: vec![0.0; m],
    };
    let (mut y, mut x) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..m {
            let p = conditionals[(i, j)];
            let d = sq_dist[(i, j)];
            if p > 0.0 && p.is_finite() && d.is_finite() {
                panel.rows.push(i as u32);
                panel.cols.push(j as u32);
                panel.row_n[i] += 1.0;
                panel.col_n[j] += 1.0;
                y.push(-t_hat * p.ln());
                x.push(d);
            }
        }
    }
    let included = y.len();
    let active_rows = panel.row_n.iter().filter(|&&c| c > 0.0).count();
    let active_cols = panel.col_n.iter().filter(|&&c| c > 0.0).count();
    let needed = active_rows + active_cols + 1;
    if included < needed.max(2) {
        return Err(Error::TooFewPairs { needed: needed.max(2), found: included });
    }

    let mut yt = y.clone();
    let mut xt = x.clone();
    panel.residualize(&mut yt);
    panel.residualize(&mut xt);
    let sxx: f64 = xt.iter().map(|v| v * v).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidConfig("distances carry no variation beyond the intercepts".into()));
    }
    let slope = xt.iter().zip(&yt).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let ssr: f64 = xt.iter().zip(&yt).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / included as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };

    let r: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - slope * b).collect();
    let (mut u, mut v) = panel.intercepts(&r);
    let shift = u
        .iter()
        .zip(&panel.row_n)
        .filter(|(_, &c)| c > 0.0)
        .map(|(a, _)| a)
        .sum::<f64>()
        / active_rows as f64;
    for (a, &c) in u.iter_mut().zip(&panel.row_n) {
        if c > 0.0 {
            *a -= shift;
        }
    }
    for (b, &c) in v.iter_mut().zip(&panel.col_n) {
        if c > 0.0 {
            *b += shift;
        }
    }
    Ok(VaradhanFit {
        slope,
        r_squared,
        row_intercepts: u,
        col_intercepts: v,
        included,
        excluded: n * m - included,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{exact_transition_matrix, PointCloud};

    #[test]
    fn exact_linear_model() {
        let pc = PointCloud::uniform_cube(25, 2, 4).unwrap();
        let d2 = pc.sq_dist_matrix();
        let t = 0.3;
        let u: Vec<f64> = (0..25).map(|i| (i as f64 * 0.7).sin()).collect();
        let v: Vec<f64> = (0..25).map(|j| (j as f64 * 1.3).cos()).collect();
        let p = DMatrix::from_fn(25, 25, |i, j| ((-d2[(i, j)] + u[i] + v[j]) / t).exp());
        let fit = varadhan_diagnostic(&p, &d2, t).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-8);
        assert!((fit.r_squared - 1.0).abs() < 1e-8);
        assert!(fit.row_intercepts.iter().sum::<f64>().abs() < 1e-9);
        // y = -t log p = d2 - u - v, so intercepts recover -u, -v up to the gauge
        let shift = u.iter().sum::<f64>() / 25.0;
        assert!((fit.row_intercepts[3] + u[3] - shift).abs() < 1e-8);
    }

    #[test]
    fn gaussian_chain_one_step() {
        let pc = PointCloud::uniform_cube(30, 2, 8).unwrap();
        let sigma = 0.4;
        let p = exact_transition_matrix(&pc, sigma).unwrap();
        let fit = varadhan_diagnostic(&p, &pc.sq_dist_matrix(), sigma * sigma).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-8 && (fit.r_squared - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_cells_are_excluded_and_scaling_is_absorbed() {
        let pc = PointCloud::uniform_cube(12, 2, 1).unwrap();
        let d2 = pc.sq_dist_matrix();
        let mut p = DMatrix::from_fn(12, 12, |i, j| (-d2[(i, j)] * (1.0 + 0.1 * ((i * j) % 3) as f64)).exp());
        p[(0, 5)] = 0.0;
        let a = varadhan_diagnostic(&p, &d2, 1.0).unwrap();
        let b = varadhan_diagnostic(&(p * 7.5), &d2, 1.0).unwrap();
        assert_eq!(a.excluded, 1);
        assert!((a.r_squared - b.r_squared).abs() < 1e-10);
    }

    #[test]
    fn too_few_pairs() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let d = DMatrix::zeros(2, 2);
        assert!(matches!(varadhan_diagnostic(&p, &d, 1.0), Err(Error::TooFewPairs { .. })));
    }
}

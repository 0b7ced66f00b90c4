use nalgebra::{DMatrix, RowDVector, SVD};

use crate::error::{Error, Result};

/// Best map `A ↦ s·(A - ā)·Q + b̄` onto `B` over orthogonal `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Procrustes {
    pub rotation: DMatrix<f64>,
    pub scale: f64,
    /// Column means removed from `A` and `B` (zero without centering).
    pub source_mean: RowDVector<f64>,
    pub target_mean: RowDVector<f64>,
    /// Frobenius norm of the aligned difference.
    pub residual: f64,
}

impl Procrustes {
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = a.clone();
        for mut row in out.row_iter_mut() {
            row -= &self.source_mean;
        }
        let mut out = out * &self.rotation * self.scale;
        for mut row in out.row_iter_mut() {
            row += &self.target_mean;
        }
        out
    }
}

fn column_means(m: &DMatrix<f64>) -> RowDVector<f64> {
    m.row_mean()
}

pub fn procrustes_align(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    center: bool,
    scale: bool,
) -> Result<Procrustes> {
    if a.shape() != b.shape() || a.is_empty() {
        return Err(Error::Shape(format!(
            "cannot align {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let d = a.ncols();
    let (ma, mb) = if center {
        (column_means(a), column_means(b))
    } else {
        (RowDVector::zeros(d), RowDVector::zeros(d))
    };
    let mut ac = a.clone();
    let mut bc = b.clone();
    for mut row in ac.row_iter_mut() {
        row -= &ma;
    }
    for mut row in bc.row_iter_mut() {
        row -= &mb;
    }
    let svd = SVD::new(ac.tr_mul(&bc), true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(Error::NotConverged("SVD in Procrustes alignment".into()));
    };
    let rotation = u * vt;
    let s = if scale {
        let norm = ac.norm_squared();
        if norm > 0.0 {
            svd.singular_values.sum() / norm
        } else {
            1.0
        }
    } else {
        1.0
    };
    let residual = (&ac * &rotation * s - &bc).norm();
    Ok(Procrustes {
        rotation,
        scale: s,
        source_mean: ma,
        target_mean: mb,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |i, k| ((i * i * 13 + k * k * 7 + i * k) as f64 * 0.37).sin())
    }

    #[test]
    fn exact_rotation() {
        let a = sample(20, 3);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let fit = procrustes_align(&a, &(&a * &r), false, false).unwrap();
        assert!(fit.residual < 1e-10);
        assert!((&fit.rotation - r).norm() < 1e-10);
    }

    #[test]
    fn identity_and_reflection() {
        let a = sample(10, 2);
        let fit = procrustes_align(&a, &a, false, false).unwrap();
        assert!(fit.residual < 1e-12);
        assert!((fit.rotation - DMatrix::identity(2, 2)).norm() < 1e-12);
        let fit = procrustes_align(&a, &(-&a), false, false).unwrap();
        assert!(fit.residual < 1e-10);
        assert!((fit.rotation.determinant() - 1.0).abs() < 1e-10);
        let q = &fit.rotation;
        assert!((q.transpose() * q - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn centering_and_scale() {
        let a = sample(15, 2);
        let mut b = &a * 2.5;
        b.column_mut(0).add_scalar_mut(4.0);
        let fit = procrustes_align(&a, &b, true, true).unwrap();
        assert!(fit.residual < 1e-10);
        assert!((fit.scale - 2.5).abs() < 1e-12);
        assert!((fit.apply(&a) - b).norm() < 1e-10);
        assert!(procrustes_align(&a, &sample(15, 3), false, false).is_err());
    }
}

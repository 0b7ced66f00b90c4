//! Closed-form recovery: PMI matrices, shifted/truncated spectral
//! factorization, classical MDS, randomized SVD and Procrustes alignment.

mod embed;
mod pmi;
mod procrustes;
mod svd;

pub use embed::{double_center, mds_embed, mds_embed_with, svd_embed, svd_embed_with, SpectralOptions};
pub use pmi::{pmi_from_dense, pmi_matrix, pmi_matrix_smoothed, PmiMatrix};
pub use procrustes::{procrustes_align, Procrustes};
pub use svd::{randomized_svd, randomized_top_eigen, top_eigen, Svd};

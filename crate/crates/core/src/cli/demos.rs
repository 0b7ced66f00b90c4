//! End-to-end demo pipelines, usable from the binary and from tests.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::cooccur::{count_ids_sharded, Weighting};
use crate::error::Result;
use crate::evaluate::{knn_purity, varadhan_diagnostic};
use crate::generators::{
    build_knn_graph, load_mnist, simple_random_walks, transition_powers, PointCloud,
};
use crate::optimizer::{fit_with_report, Loss, TrainConfig};
use crate::rng;
use crate::spectral::{pmi_matrix, svd_embed_with, SpectralOptions};

/// `sq_dist` with its rows permuted by a seeded shuffle.
pub fn row_shuffled(sq_dist: &DMatrix<f64>, seed: u64) -> DMatrix<f64> {
    let n = sq_dist.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    DMatrix::from_fn(n, sq_dist.ncols(), |i, j| sq_dist[(perm[i], j)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaradhanDemoConfig {
    pub n: usize,
    pub k: usize,
    pub steps: Vec<usize>,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for VaradhanDemoConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            k: 10,
            steps: vec![2, 4, 8, 16],
            walks_per_node: 10,
            walk_length: 200,
            window: 5,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostic {
    pub t: usize,
    pub slope: f64,
    pub r_squared: f64,
    pub null_r_squared: f64,
    pub included: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaradhanDemoReport {
    pub config: VaradhanDemoConfig,
    /// Exact `t`-step conditionals regressed on squared Euclidean distances.
    pub exact: Vec<StepDiagnostic>,
    pub best_t: usize,
    pub best_r_squared: f64,
    /// Windowed walk co-occurrence counts regressed on the same distances.
    pub walk_counts: StepDiagnostic,
}

/// Points on the unit square, kNN graph, exact step sweep with a permutation
/// null, then sampled walks counted and regressed in the same way.
pub fn run_varadhan_demo(config: &VaradhanDemoConfig) -> Result<VaradhanDemoReport> {
    let seed = config.seed;
    let points = PointCloud::uniform_cube(config.n, 2, rng::derive_seed(seed, "points"))?;
    let graph = build_knn_graph(&points, config.k)?;
    let d2 = points.sq_dist_matrix();
    let null_d2 = row_shuffled(&d2, rng::derive_seed(seed, "null"));

    let powers = transition_powers(&graph, &config.steps)?;
    let mut exact = Vec::with_capacity(powers.len());
    for (&t, p) in config.steps.iter().zip(&powers) {
        let fit = varadhan_diagnostic(p, &d2, t as f64)?;
        let null = varadhan_diagnostic(p, &null_d2, t as f64)?;
        log::info!("t = {t}: R² = {:.4}, null R² = {:.4}", fit.r_squared, null.r_squared);
        exact.push(StepDiagnostic {
            t,
            slope: fit.slope,
            r_squared: fit.r_squared,
            null_r_squared: null.r_squared,
            included: fit.included,
            excluded: fit.excluded,
        });
    }
    let best = exact
        .iter()
        .max_by(|a, b| a.r_squared.total_cmp(&b.r_squared).then(b.t.cmp(&a.t)))
        .cloned();

    let walks = simple_random_walks(
        &graph,
        config.walks_per_node,
        config.walk_length,
        rng::derive_seed(seed, "walks"),
    )?;
    let counts = count_ids_sharded(&walks, config.n, config.window, Weighting::Harmonic, config.workers)?;
    let dense = counts.to_dense();
    let fit = varadhan_diagnostic(&dense, &d2, 1.0)?;
    let null = varadhan_diagnostic(&dense, &null_d2, 1.0)?;
    let walk_counts = StepDiagnostic {
        t: config.window,
        slope: fit.slope,
        r_squared: fit.r_squared,
        null_r_squared: null.r_squared,
        included: fit.included,
        excluded: fit.excluded,
    };
    Ok(VaradhanDemoReport {
        config: config.clone(),
        best_t: best.as_ref().map_or(0, |b| b.t),
        best_r_squared: best.as_ref().map_or(0.0, |b| b.r_squared),
        exact,
        walk_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MnistDemoConfig {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub limit: Option<usize>,
    pub k: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub dim: usize,
    pub epochs: usize,
    pub theta: f64,
    pub tau: f64,
    pub purity_k: usize,
    pub seed: u64,
    pub workers: usize,
}

impl MnistDemoConfig {
    pub fn new(images: PathBuf, labels: PathBuf) -> Self {
        Self {
            images,
            labels,
            limit: None,
            k: 20,
            walks_per_node: 10,
            walk_length: 200,
            window: 5,
            dim: 10,
            epochs: 20,
            theta: 50.0,
            tau: 0.0,
            purity_k: 5,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MnistDemoReport {
    pub config: MnistDemoConfig,
    pub points: usize,
    pub stored_pairs: usize,
    pub regression_purity: f64,
    pub svd_purity: f64,
    pub pixel_purity: f64,
    pub initial_step: f64,
    pub objective: Vec<f64>,
    #[serde(skip)]
    pub regression_vectors: DMatrix<f64>,
    #[serde(skip)]
    pub svd_vectors: DMatrix<f64>,
}

/// IDX images, kNN graph, simple random walks, windowed counts, then the
/// regression and PMI-SVD embeddings scored by kNN label purity.
pub fn run_mnist_demo(config: &MnistDemoConfig) -> Result<MnistDemoReport> {
    let seed = config.seed;
    let points = load_mnist(&config.images, &config.labels, config.limit)?;
    let labels = points.labels().expect("IDX loader attaches labels").to_vec();
    let graph = build_knn_graph(&points, config.k)?;
    let walks = simple_random_walks(
        &graph,
        config.walks_per_node,
        config.walk_length,
        rng::derive_seed(seed, "walks"),
    )?;
    let counts = count_ids_sharded(&walks, points.len(), config.window, Weighting::Harmonic, config.workers)?;

    let train = TrainConfig {
        epochs: config.epochs,
        seed: rng::derive_seed(seed, "fit"),
        loss: Loss::NegBinomial { theta: config.theta },
        ..Default::default()
    };
    let (model, fit) = fit_with_report(&counts, config.dim, &train)?;
    let regression_vectors = model.output_vectors();
    let regression_purity = knn_purity(&regression_vectors, &labels, config.purity_k)?;

    let opts = SpectralOptions {
        seed: rng::derive_seed(seed, "svd"),
        ..Default::default()
    };
    let svd = svd_embed_with(&pmi_matrix(&counts)?, config.dim, config.tau, &opts)?;
    let svd_vectors = svd.output_vectors();
    let svd_purity = knn_purity(&svd_vectors, &labels, config.purity_k)?;
    let pixel_purity = knn_purity(&points.to_matrix(), &labels, config.purity_k)?;
    log::info!("purity: regression {regression_purity:.4}, svd {svd_purity:.4}, pixels {pixel_purity:.4}");

    Ok(MnistDemoReport {
        config: config.clone(),
        points: points.len(),
        stored_pairs: counts.nnz(),
        regression_purity,
        svd_purity,
        pixel_purity,
        initial_step: fit.initial_step,
        objective: fit.objective,
        regression_vectors,
        svd_vectors,
    })
}

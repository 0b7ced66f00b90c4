//! Synthetic Markov processes and their exact oracles: the Gaussian latent
//! walk, the latent topic walk, and simple random walks on spatial graphs.

mod graph;
mod markov;
mod mnist;
mod points;
mod topic;

pub use graph::{
    build_eps_graph, build_knn_graph, graph_geodesics, simple_random_walks,
    survey_graph_to_counts, transition_powers, GraphParams, SpatialGraph, SurveyDistances,
};
pub use markov::{
    exact_transition_matrix, gaussian_walk, log_normalizers, stationary_distribution,
    GaussianWalkConfig,
};
pub use mnist::{load_mnist, read_idx_images, read_idx_labels};
pub use points::{sq_dist, PointCloud};
pub use topic::{topic_walk, GaussianMixture, MixtureComponent, TopicModelConfig, TopicWalk};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes sentences of node ids in the corpus format (decimal tokens, one
/// sentence per line).
pub fn write_sentences(path: &Path, sentences: &[Vec<u32>]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let mut line = String::new();
    for s in sentences {
        line.clear();
        for (k, t) in s.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&t.to_string());
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

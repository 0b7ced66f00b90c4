//! SGD fitting of embeddings under the negative-binomial metric regression,
//! the distance-form GloVe objective and the distance softmax.

mod fit;
mod loss;
mod model;

pub use fit::{fit, fit_with_report, FitReport, Loss, TrainConfig, DEFAULT_THETA};
pub use loss::{
    glove_loss_grad, glove_residual, glove_weight, log_rate, nb_error, nb_gradients, nb_loglik,
    nb_pair_loglik, pairs_from_counts, sample_zero_pairs, softmax_loss_grad, CountRows, NbLoglik,
    Pair, LOG_RATE_CAP, SOFTMAX_CAP,
};
pub use model::{write_biases, write_word2vec, EmbeddingModel, Gradients};

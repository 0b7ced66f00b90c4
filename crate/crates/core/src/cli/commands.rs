use nalgebra::DMatrix;
use serde::Serialize;

use super::config::render_config;
use super::demos::{run_mnist_demo, run_varadhan_demo, row_shuffled, MnistDemoConfig, VaradhanDemoConfig};
use super::{
    Artifacts, Cli, Command, CountArgs, DiagnoseArgs, EmbedArgs, EvalArgs, GlobalArgs, LossArg,
    MnistArgs, TokenizerArgs, VaradhanArgs, VocabArgs, WalkArgs, WalkKind, WeightingArg,
};
use crate::cooccur::{
    build_vocabulary, count_ids_sharded, read_corpus, read_counts, read_vocabulary, write_counts,
    write_vocabulary, CooccurrenceCounts, Tokenizer, Weighting,
};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_task, read_items, varadhan_diagnostic, EvalOptions, VaradhanFit, WordVectors};
use crate::generators::{
    build_eps_graph, build_knn_graph, gaussian_walk, simple_random_walks, topic_walk,
    write_sentences, GaussianMixture, GaussianWalkConfig, MixtureComponent, PointCloud,
    TopicModelConfig,
};
use crate::optimizer::{fit_with_report, write_biases, write_word2vec, FitReport, Loss, TrainConfig};
use crate::rng;
use crate::spectral::{mds_embed_with, pmi_matrix, pmi_matrix_smoothed, svd_embed_with, SpectralOptions};

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if g.workers == 0 {
        return Err(Error::InvalidConfig("--workers must be at least 1".into()));
    }
    let mut out = Artifacts::open(&g.out)?;
    let options = match &cli.command {
        Command::Vocab(a) => serde_json::to_value(a)?,
        Command::Count(a) => serde_json::to_value(a)?,
        Command::Walk(a) => serde_json::to_value(a)?,
        Command::Embed(a) => serde_json::to_value(a)?,
        Command::Eval(a) => serde_json::to_value(a)?,
        Command::Diagnose(a) => serde_json::to_value(a)?,
        Command::DemoMnist(a) => serde_json::to_value(a)?,
        Command::DemoVaradhan(a) => serde_json::to_value(a)?,
    };
    let config_path = out.path("config.txt");
    let text = render_config(&format!("markov-embed {}", cli.command.name()), &[serde_json::to_value(g)?, options]);
    std::fs::write(&config_path, text).map_err(|e| Error::io(&config_path, e))?;

    match &cli.command {
        Command::Vocab(a) => vocab(a, &mut out)?,
        Command::Count(a) => count(a, g, &mut out)?,
        Command::Walk(a) => walk(a, g, &mut out)?,
        Command::Embed(a) => embed(a, g, &mut out)?,
        Command::Eval(a) => eval(a, &mut out)?,
        Command::Diagnose(a) => diagnose(a, g, &mut out)?,
        Command::DemoMnist(a) => demo_mnist(a, g, &mut out)?,
        Command::DemoVaradhan(a) => demo_varadhan(a, g, &mut out)?,
    }
    out.commit();
    Ok(())
}

impl From<&TokenizerArgs> for Tokenizer {
    fn from(t: &TokenizerArgs) -> Self {
        Tokenizer {
            lowercase: t.lowercase,
            strip_punctuation: t.strip_punctuation,
            strip_numbers: t.strip_numbers,
        }
    }
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Harmonic => Weighting::Harmonic,
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::Raw => Weighting::RawTransition,
        }
    }
}

fn vocab(a: &VocabArgs, out: &mut Artifacts) -> Result<()> {
    let corpus = read_corpus(&a.corpus, &Tokenizer::from(&a.tokenizer))?;
    let vocab = build_vocabulary(corpus.iter().flatten(), a.max, a.min_count)?;
    write_vocabulary(&out.path("vocab.txt"), &vocab)?;
    log::info!("{} words", vocab.len());
    Ok(())
}

fn count(a: &CountArgs, g: &GlobalArgs, out: &mut Artifacts) -> Result<()> {
    let vocab = read_vocabulary(&a.vocab)?;
    let corpus = read_corpus(&a.corpus, &Tokenizer::from(&a.tokenizer))?;
    let ids: Vec<Vec<u32>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();
    let counts = count_ids_sharded(&ids, vocab.len(), a.window, a.weighting.into(), g.workers)?;
    write_counts(&out.path("counts.txt"), &counts)?;
    log::info!("{} stored pairs over {} words", counts.nnz(), vocab.len());
    Ok(())
}

fn walk_points(a: &WalkArgs, seed: u64) -> Result<PointCloud> {
    match &a.points {
        Some(p) => PointCloud::read(p),
        None => PointCloud::uniform_cube(a.n, a.dim, rng::derive_seed(seed, "points")),
    }
}

fn walk(a: &WalkArgs, g: &GlobalArgs, out: &mut Artifacts) -> Result<()> {
    let points = walk_points(a, g.seed)?;
    let seed = rng::derive_seed(g.seed, "walk");
    let sentences = match a.kind {
        WalkKind::Gaussian => {
            let config = GaussianWalkConfig {
                sigma: a.sigma,
                steps: a.steps,
                sentence_length: a.sentence_length,
                restart_per_sentence: a.restart,
            };
            gaussian_walk(&points, &config, seed)?
        }
        WalkKind::Topic => {
            if a.sentence_length == 0 {
                return Err(Error::InvalidConfig("sentence length must be at least 1".into()));
            }
            let density = match &a.density {
                Some(spec) => spec.parse::<GaussianMixture>()?,
                None => GaussianMixture::new(vec![MixtureComponent {
                    weight: 1.0,
                    mean: vec![0.0; points.dim()],
                    std: 1.0,
                }])?,
            };
            let config = TopicModelConfig {
                sigma: a.sigma,
                sigma_bar: a.sigma_bar,
                alpha: vec![1.0; points.len()],
                density,
                start: None,
            };
            let walk = topic_walk(&points, &config, a.steps, seed, false)?;
            walk.tokens.chunks(a.sentence_length).map(<[u32]>::to_vec).collect()
        }
        WalkKind::Graph => {
            let graph = match a.eps {
                Some(eps) => build_eps_graph(&points, eps)?,
                None => build_knn_graph(&points, a.knn)?,
            };
            simple_random_walks(&graph, a.walks, a.length, seed)?
        }
    };
    write_sentences(&out.path("corpus.txt"), &sentences)?;
    points.write(&out.path("points.txt"))?;
    Ok(())
}

fn row_words(a: &EmbedArgs, counts: &CooccurrenceCounts) -> Result<Vec<String>> {
    let n = counts.vocab_size();
    let Some(path) = &a.vocab else {
        return Ok((0..n).map(|i| i.to_string()).collect());
    };
    let vocab = read_vocabulary(path)?;
    if vocab.len() != n {
        return Err(Error::MetadataMismatch(format!(
            "vocabulary has {} words but the counts cover {n}",
            vocab.len()
        )));
    }
    Ok(vocab.words().to_vec())
}

/// `ln C`, with unobserved cells set to the smallest observed log count.
fn log_count_matrix(counts: &CooccurrenceCounts) -> Result<DMatrix<f64>> {
    let dense = counts.to_dense();
    let floor = dense
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|c| c.ln())
        .fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::InvalidConfig("count file has no positive entries".into()));
    }
    Ok(dense.map(|c| if c > 0.0 { c.ln() } else { floor }))
}

#[derive(Serialize)]
struct EmbedReport<'a> {
    loss: LossArg,
    words: usize,
    dim: usize,
    fit: Option<&'a FitReport>,
}

fn embed(a: &EmbedArgs, g: &GlobalArgs, out: &mut Artifacts) -> Result<()> {
    let counts = read_counts(&a.counts)?;
    let words = row_words(a, &counts)?;
    let spectral = SpectralOptions {
        seed: rng::derive_seed(g.seed, "spectral"),
        ..Default::default()
    };
    let loss = match a.loss {
        LossArg::Nb => Some(Loss::NegBinomial { theta: a.theta }),
        LossArg::Glove => Some(Loss::Glove { x_max: a.x_max, exponent: a.exponent }),
        LossArg::Softmax => Some(Loss::Softmax),
        LossArg::Svd | LossArg::Mds => None,
    };
    let (model, report) = match (a.loss, loss) {
        (_, Some(loss)) => {
            let config = TrainConfig {
                epochs: a.epochs,
                initial_step: a.step,
                line_search_start: a.line_search_start,
                skip_threshold: a.skip_threshold,
                zero_ratio: a.zero_ratio,
                seed: rng::derive_seed(g.seed, "fit"),
                loss,
                ..Default::default()
            };
            let (model, report) = fit_with_report(&counts, a.dim, &config)?;
            (model, Some(report))
        }
        (LossArg::Svd, None) => {
            let pmi = match a.smoothing {
                Some(eps) => pmi_matrix_smoothed(&counts, eps)?,
                None => pmi_matrix(&counts)?,
            };
            (svd_embed_with(&pmi, a.dim, a.tau, &spectral)?, None)
        }
        (_, None) => (mds_embed_with(&log_count_matrix(&counts)?, a.dim, &spectral)?, None),
    };
    write_word2vec(&out.path("vectors.txt"), &words, &model.output_vectors())?;
    write_word2vec(&out.path("contexts.txt"), &words, &model.ctx_matrix())?;
    write_biases(&out.path("biases.txt"), &words, &model)?;
    out.write_json(
        "embed_report.json",
        &EmbedReport { loss: a.loss, words: words.len(), dim: a.dim, fit: report.as_ref() },
    )?;
    Ok(())
}

fn eval(a: &EvalArgs, out: &mut Artifacts) -> Result<()> {
    let wv = WordVectors::read_word2vec(&a.vectors)?;
    let mut items = Vec::new();
    for q in &a.questions {
        items.extend(read_items(q, a.lowercase)?);
    }
    let opts = EvalOptions {
        metric: a.metric.into(),
        answer_vocab_limit: a.answer_limit,
        top_k: a.top_k,
        exclude_query_words: !a.no_exclude,
    };
    let report = evaluate_task(&items, &wv, &opts);
    println!(
        "accuracy {:.4} ({} of {} covered, {} items)",
        report.accuracy, report.correct, report.covered, report.total
    );
    out.write_json("eval_report.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseReport {
    fit: VaradhanFit,
    null_r_squared: f64,
}

fn diagnose(a: &DiagnoseArgs, g: &GlobalArgs, out: &mut Artifacts) -> Result<()> {
    let counts = read_counts(&a.counts)?;
    let points = PointCloud::read(&a.points)?;
    let n = points.len();
    let ids: Vec<usize> = match &a.vocab {
        Some(p) => {
            let vocab = read_vocabulary(p)?;
            if vocab.len() != counts.vocab_size() {
                return Err(Error::MetadataMismatch(format!(
                    "vocabulary has {} words but the counts cover {}",
                    vocab.len(),
                    counts.vocab_size()
                )));
            }
            vocab
                .words()
                .iter()
                .map(|w| w.parse::<usize>().map_err(|_| Error::Format(format!("vocabulary word {w:?} is not a point index"))))
                .collect::<Result<_>>()?
        }
        None => (0..counts.vocab_size()).collect(),
    };
    if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
        return Err(Error::Shape(format!("point index {bad} but only {n} points")));
    }
    let dense = counts.to_dense();
    let mut c = DMatrix::zeros(n, n);
    for (r, &i) in ids.iter().enumerate() {
        for (s, &j) in ids.iter().enumerate() {
            c[(i, j)] = dense[(r, s)];
        }
    }
    let d2 = points.sq_dist_matrix();
    let fit = varadhan_diagnostic(&c, &d2, a.t_hat)?;
    let null = varadhan_diagnostic(&c, &row_shuffled(&d2, rng::derive_seed(g.seed, "null")), a.t_hat)?;
    println!("slope {:.4}, R² {:.4}, null R² {:.4}", fit.slope, fit.r_squared, null.r_squared);
    out.write_json("diagnose_report.json", &DiagnoseReport { fit, null_r_squared: null.r_squared })?;
    Ok(())
}

fn demo_mnist(a: &MnistArgs, g: &GlobalArgs, out: &mut Artifacts) -> Result<()> {
    let config = MnistDemoConfig {
        limit: a.limit,
        k: a.knn,
        walks_per_node: a.walks,
        walk_length: a.length,
        window: a.window,
        dim: a.dim,
        epochs: a.epochs,
        theta: a.theta,
        tau: a.tau,
        purity_k: a.purity_k,
        seed: g.seed,
        workers: g.workers,
        ..MnistDemoConfig::new(a.images.clone(), a.labels.clone())
    };
    let report = run_mnist_demo(&config)?;
    println!(
        "{}-NN purity: regression {:.4}, svd {:.4}, pixels {:.4}",
        a.purity_k, report.regression_purity, report.svd_purity, report.pixel_purity
    );
    let ids: Vec<String> = (0..report.points).map(|i| i.to_string()).collect();
    write_word2vec(&out.path("regression_vectors.txt"), &ids, &report.regression_vectors)?;
    write_word2vec(&out.path("svd_vectors.txt"), &ids, &report.svd_vectors)?;
    out.write_json("mnist_report.json", &report)?;
    Ok(())
}

fn demo_varadhan(a: &VaradhanArgs, g: &GlobalArgs, out: &mut Artifacts) -> Result<()> {
    let config = VaradhanDemoConfig {
        n: a.n,
        k: a.knn,
        steps: a.steps.clone(),
        walks_per_node: a.walks,
        walk_length: a.length,
        window: a.window,
        seed: g.seed,
        workers: g.workers,
    };
    let report = run_varadhan_demo(&config)?;
    println!(
        "best t = {} (R² {:.4}); walk counts R² {:.4}, null {:.4}",
        report.best_t, report.best_r_squared, report.walk_counts.r_squared, report.walk_counts.null_r_squared
    );
    out.write_json("varadhan_report.json", &report)?;
    Ok(())
}

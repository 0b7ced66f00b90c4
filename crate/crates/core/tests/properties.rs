use markov_embed::cooccur::{count_ids, CooccurrenceCounts, Weighting};
use markov_embed::evaluate::{
    evaluate_task, rank_candidates, varadhan_diagnostic, EvalItem, EvalOptions, ItemKind, Metric,
    WordVectors,
};
use markov_embed::generators::{
    build_eps_graph, build_knn_graph, exact_transition_matrix, gaussian_walk, log_normalizers,
    GaussianWalkConfig, PointCloud,
};
use markov_embed::optimizer::{fit_with_report, nb_loglik, EmbeddingModel, Loss, Pair, TrainConfig};
use markov_embed::spectral::{double_center, mds_embed, pmi_from_dense, svd_embed};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(range, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn orthogonal(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(d, d, -1.0..1.0)
        .prop_filter("well conditioned", |m| m.determinant().abs() > 0.05)
        .prop_map(|m| m.qr().q())
}

fn cloud(n: usize, d: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(-2.0..2.0f64, n * d).prop_map(move |v| PointCloud::new(v, d, None).unwrap())
}

fn sentences(vocab: u32) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0..vocab, 0..15), 1..12)
}

fn sq(m: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (m.row(i) - m.row(j)).norm_squared()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counts_ignore_sentence_order(s in sentences(8), w in 1usize..5, seed in any::<u64>()) {
        let mut shuffled = s.clone();
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut markov_embed::rng::seeded(seed));
        for weighting in [Weighting::Harmonic, Weighting::Uniform, Weighting::RawTransition] {
            let a = count_ids(&s, 8, w, weighting).unwrap();
            let b = count_ids(&shuffled, 8, w, weighting).unwrap();
            prop_assert_eq!(a.to_dense(), b.to_dense());
        }
    }

    #[test]
    fn windowed_counts_are_symmetric_with_bounded_mass(s in sentences(6), w in 1usize..6) {
        let in_window: usize = s.iter().map(|t| (1..=w).map(|d| t.len().saturating_sub(d)).sum::<usize>()).sum();
        let c = count_ids(&s, 6, w, Weighting::Harmonic).unwrap().to_dense();
        prop_assert_eq!(&c, &c.transpose());
        let u = count_ids(&s, 6, w, Weighting::Uniform).unwrap().to_dense();
        prop_assert_eq!(&u, &u.transpose());
        // every id is in vocabulary, so the harmonic bound holds with equality
        let mass = c.sum();
        prop_assert!(mass <= 2.0 * in_window as f64 + 1e-9);
        prop_assert!((mass - 2.0 * harmonic_pair_mass(&s, w)).abs() <= 1e-9 * mass.max(1.0));
    }

    #[test]
    fn gaussian_chain_is_reversible_and_exact(pc in cloud(7, 2), sigma in 0.3..3.0f64) {
        let p = exact_transition_matrix(&pc, sigma).unwrap();
        let log_z = log_normalizers(&pc, sigma);
        let zmax = log_z.max();
        let pi: Vec<f64> = log_z.iter().map(|l| (l - zmax).exp()).collect();
        let total: f64 = pi.iter().sum();
        for i in 0..7 {
            for j in 0..7 {
                let (a, b) = (pi[i] / total * p[(i, j)], pi[j] / total * p[(j, i)]);
                prop_assert!((a - b).abs() <= 1e-10, "balance {} vs {}", a, b);
                let law = -p[(i, j)].ln() - log_z[i];
                prop_assert!((law - pc.sq_dist(i, j) / (sigma * sigma)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn graphs_have_exact_degree_and_symmetric_balls(pc in cloud(12, 2), k in 1usize..11, eps in 0.2..3.0f64) {
        let g = build_knn_graph(&pc, k).unwrap();
        for i in 0..12 {
            prop_assert_eq!(g.out_edges(i).len(), k);
            prop_assert!(!g.has_edge(i, i));
        }
        let e = build_eps_graph(&pc, eps).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                prop_assert_eq!(e.has_edge(i, j), e.has_edge(j, i));
            }
        }
    }

    #[test]
    fn walk_sampling_is_seeded(pc in cloud(5, 2), seed in any::<u64>()) {
        let config = GaussianWalkConfig { sigma: 1.0, steps: 300, sentence_length: 40, restart_per_sentence: true };
        prop_assert_eq!(gaussian_walk(&pc, &config, seed).unwrap(), gaussian_walk(&pc, &config, seed).unwrap());
    }

    #[test]
    fn nb_second_order_term(c in prop::sample::select(vec![1.0, 10.0, 100.0]),
                           theta in prop::sample::select(vec![1.0, 50.0]),
                           eps in prop::num::f64::NORMAL.prop_map(|v| (v.abs().fract() * 2.0 - 1.0) * 1e-3)) {
        prop_assume!(eps.abs() > 1e-5);
        let ll = |s: f64| {
            let z = DMatrix::zeros(1, 1);
            let m = EmbeddingModel::from_parts(&z, &z, vec![s], vec![0.0], theta).unwrap();
            nb_loglik(&[Pair { row: 0, col: 0, count: c }], &m).value
        };
        let expected = -c * theta / (2.0 * (c + theta)) * eps * eps;
        let got = ll(c.ln() + eps) - ll(c.ln());
        prop_assert!((got - expected).abs() <= 1e-2 * expected.abs(), "{} vs {}", got, expected);
    }

    #[test]
    fn nb_loglik_is_rigid_motion_invariant(word in matrix(6, 3, -1.0..1.0), ctx in matrix(6, 3, -1.0..1.0),
                                           q in orthogonal(3), shift in matrix(1, 3, -5.0..5.0),
                                           counts in prop::collection::vec(0u32..50, 36)) {
        let pairs: Vec<Pair> = counts.iter().enumerate()
            .map(|(k, &c)| Pair { row: (k / 6) as u32, col: (k % 6) as u32, count: c as f64 })
            .collect();
        let biases = (0..6).map(|i| (i as f64 * 0.3).sin()).collect::<Vec<_>>();
        let moved = |m: &DMatrix<f64>| {
            let mut out = m * &q;
            for mut row in out.row_iter_mut() {
                row += &shift;
            }
            out
        };
        let a = EmbeddingModel::from_parts(&word, &ctx, biases.clone(), biases.clone(), 20.0).unwrap();
        let b = EmbeddingModel::from_parts(&moved(&word), &moved(&ctx), biases.clone(), biases, 20.0).unwrap();
        let (la, lb) = (nb_loglik(&pairs, &a).value, nb_loglik(&pairs, &b).value);
        prop_assert!((la - lb).abs() <= 1e-9 * la.abs().max(1.0), "{} vs {}", la, lb);
    }

    #[test]
    fn double_centering_annihilates_offsets(pc in cloud(10, 3), u in prop::collection::vec(-5.0..5.0f64, 10),
                                            v in prop::collection::vec(-5.0..5.0f64, 10)) {
        let l = -pc.sq_dist_matrix();
        let shifted = DMatrix::from_fn(10, 10, |i, j| l[(i, j)] + u[i] + v[j]);
        prop_assert!((double_center(&l) - double_center(&shifted)).amax() <= 1e-10);
        let a = mds_embed(&l, 3).unwrap().output_vectors();
        let b = mds_embed(&shifted, 3).unwrap().output_vectors();
        let gram = |x: &DMatrix<f64>| x * x.transpose();
        prop_assert!((gram(&a) - gram(&b)).amax() <= 1e-10);
    }

    #[test]
    fn pmi_ignores_count_scale(c in matrix(5, 5, 0.0..30.0), scale in 1e-3..1e3f64) {
        let c = c.map(|v| if v < 5.0 { 0.0 } else { v.floor() });
        prop_assume!((0..5).all(|i| c.row(i).sum() > 0.0 && c.column(i).sum() > 0.0));
        let a = pmi_from_dense(&c, 0.0).unwrap();
        let b = pmi_from_dense(&(c * scale), 0.0).unwrap();
        prop_assert_eq!(&a.observed, &b.observed);
        prop_assert!((a.values - b.values).amax() <= 1e-12);
    }

    #[test]
    fn svd_recovers_inner_products_on_a_cap(n in 6usize..24, c in 0.8..1.5f64, ratio in 0.2..1.0f64) {
        // equal-norm points on a circle of latitude: equal row sums and non-negative inner products
        let r = c * ratio;
        let x = DMatrix::from_fn(n, 3, |i, k| {
            let th = std::f64::consts::TAU * i as f64 / n as f64;
            [c, r * th.cos(), r * th.sin()][k]
        });
        let gram = &x * x.transpose();
        let raw = gram.map(|g| (2.0 * g).exp());
        let norm2 = c * c + r * r;
        let kappa = n as f64 * norm2 * norm2 / raw.row(0).sum();
        let counts = raw * kappa;
        let total = counts.sum();
        let identity_holds = (0..n).all(|i| (counts.row(i).sum() / total.sqrt() - norm2).abs() <= 1e-9 * norm2);
        prop_assume!(identity_holds);
        let pmi = pmi_from_dense(&counts, 0.0).unwrap();
        let model = svd_embed(&pmi, 3, 2.0 * norm2.ln() - kappa.ln()).unwrap();
        let w = model.word_matrix();
        let err = (&w * w.transpose() - &gram).norm() / gram.norm();
        prop_assert!(err <= 0.01, "relative Frobenius error {}", err);
    }

    #[test]
    fn cosine_argmax_survives_rotation_and_rescaling(cands in matrix(12, 3, -1.0..1.0), ideal in matrix(1, 3, -1.0..1.0),
                                                    q in orthogonal(3), scales in prop::collection::vec(0.1..10.0f64, 12)) {
        prop_assume!((0..12).all(|i| cands.row(i).norm() > 1e-3));
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>();
        let base = rows(&cands);
        let moved = rows(&DMatrix::from_fn(12, 3, |i, k| (cands.row(i) * &q)[k] * scales[i]));
        let ideal_v: Vec<f64> = ideal.iter().copied().collect();
        let ideal_q: Vec<f64> = (&ideal * &q).iter().copied().collect();
        let top = |ideal: &[f64], c: &[Vec<f64>]| rank_candidates(ideal, c.iter().enumerate().map(|(i, v)| (i, v.as_slice())), Metric::Cosine, &[])[0];
        prop_assert_eq!(top(&ideal_v, &base), top(&ideal_q, &moved));
    }

    #[test]
    fn l2_argmin_survives_rigid_motion(cands in matrix(12, 3, -1.0..1.0), ideal in matrix(1, 3, -1.0..1.0),
                                       q in orthogonal(3), shift in matrix(1, 3, -5.0..5.0)) {
        let moved = |m: &DMatrix<f64>| {
            let mut out = m * &q;
            for mut row in out.row_iter_mut() {
                row += &shift;
            }
            out
        };
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>();
        let top = |ideal: &DMatrix<f64>, c: &DMatrix<f64>| {
            let c = rows(c);
            let ideal: Vec<f64> = ideal.iter().copied().collect();
            rank_candidates(&ideal, c.iter().enumerate().map(|(i, v)| (i, v.as_slice())), Metric::L2, &[])[0]
        };
        prop_assert_eq!(top(&ideal, &cands), top(&moved(&ideal), &moved(&cands)));
    }

    #[test]
    fn accuracy_ignores_item_order(vecs in matrix(20, 4, -1.0..1.0), picks in prop::collection::vec((0usize..20, 0usize..20, 0usize..20, 0usize..20), 1..15),
                                   seed in any::<u64>()) {
        let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let wv = WordVectors::new(words.clone(), &vecs).unwrap();
        let mut items: Vec<EvalItem> = picks.iter().enumerate().map(|(k, &(a, b, c, d))| EvalItem {
            section: format!("s{}", k % 3),
            kind: ItemKind::Analogy { a: words[a].clone(), b: words[b].clone(), c: words[c].clone(), answer: words[d].clone() },
        }).collect();
        for metric in [Metric::Cosine, Metric::L2] {
            let opts = EvalOptions { metric, ..Default::default() };
            let before = evaluate_task(&items, &wv, &opts);
            rand::seq::SliceRandom::shuffle(&mut items[..], &mut markov_embed::rng::seeded(seed));
            let after = evaluate_task(&items, &wv, &opts);
            prop_assert_eq!(before, after);
        }
    }

    #[test]
    fn diagnostic_ignores_conditional_scale(pc in cloud(9, 2), t in 0.2..4.0f64, scale in 1e-4..1e4f64) {
        let p = exact_transition_matrix(&pc, 0.8).unwrap().map(|v| v.powf(1.0 / t) + 1e-3);
        let d2 = pc.sq_dist_matrix();
        let a = varadhan_diagnostic(&p, &d2, t).unwrap();
        let b = varadhan_diagnostic(&(p * scale), &d2, t).unwrap();
        prop_assert!((a.r_squared - b.r_squared).abs() <= 1e-9);
        prop_assert!((a.slope - b.slope).abs() <= 1e-9 * a.slope.abs().max(1.0));
    }
}

/// Total harmonic weight over in-window ordered pairs, counted once per pair.
fn harmonic_pair_mass(s: &[Vec<u32>], w: usize) -> f64 {
    let h: f64 = (1..=w).map(|t| 1.0 / t as f64).sum();
    s.iter()
        .map(|t| (1..=w).map(|d| t.len().saturating_sub(d) as f64 / (d as f64 * h)).sum::<f64>())
        .sum()
}

fn planted_counts(seed: u64) -> CooccurrenceCounts {
    let n = 15;
    let x = PointCloud::uniform_cube(n, 2, seed).unwrap().to_matrix() * 1.5;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = (500.0 * (-sq(&x, i, j)).exp()).round();
            if c > 0.0 {
                entries.push((i as u32, j as u32, c));
            }
        }
    }
    CooccurrenceCounts::from_entries(n, 1, Weighting::RawTransition, 0, entries).unwrap()
}

#[test]
fn first_epoch_does_not_raise_any_objective() {
    for seed in 0..4 {
        let counts = planted_counts(seed);
        for loss in [Loss::default(), Loss::glove(), Loss::Softmax] {
            let config = TrainConfig { epochs: 1, seed, loss, ..Default::default() };
            let (_, report) = fit_with_report(&counts, 2, &config).unwrap();
            assert!(report.objective[1] <= report.objective[0], "{} seed {seed}: {:?}", loss.name(), report.objective);
        }
    }
}

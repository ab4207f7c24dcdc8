use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use videostory::corpus::{build_vocabulary, Corpus, Description, FeatureMatrix};
use videostory::embedding::{
    descriptiveness_loss, embed, predict_terms, sample_gradients, sample_objective, top_terms, total_objective,
    EmbeddingModel, Hyperparams, Projection,
};
use videostory::eval::{average_precision, mean_average_precision, train_event_classifier, APResult};
use videostory::fusion::embed_fused;
use videostory::oracle::finite_difference_grad;
use videostory::textfmt::sig9;
use videostory::zeroshot::{cosine, cosine_rank, term_sensitive_loss, EventQuery};

const WORDS: [&str; 8] = ["run", "dog", "cake", "bike", "race", "snow", "park", "ball"];

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0f64..2.0, n).prop_map(DVector::from_vec)
}

fn binary(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(any::<bool>(), rows * cols)
        .prop_map(move |v| DMatrix::from_iterator(rows, cols, v.into_iter().map(|b| if b { 1.0 } else { 0.0 })))
}

fn lambdas() -> impl Strategy<Value = Hyperparams> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, s, w)| Hyperparams {
        k: 3,
        lambda_a: a,
        lambda_s: s,
        lambda_w: w,
        ..Hyperparams::default()
    })
}

/// Descriptions drawn from a small word list, features exactly
/// representable in f32 so the binary format round-trips.
fn small_corpus() -> impl Strategy<Value = Corpus> {
    (2usize..8, 1usize..5).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(0usize..WORDS.len(), 1..5), n),
            prop::collection::vec(-1000i32..1000, n * d),
        )
            .prop_map(move |(texts, raw)| {
                let ids: Vec<String> = (0..n).map(|i| format!("clip{i}")).collect();
                let descriptions: Vec<Description> = texts
                    .iter()
                    .zip(&ids)
                    .map(|(t, id)| Description::new(id.clone(), t.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ")))
                    .collect();
                let values = DMatrix::from_iterator(n, d, raw.iter().map(|&v| v as f64 / 8.0));
                let vocab = build_vocabulary(&descriptions, 1).unwrap();
                Corpus::assemble(&descriptions, vocab, vec![FeatureMatrix::new("m0", values, ids).unwrap()]).unwrap()
            })
    })
}

fn model(a: DMatrix<f64>, ws: Vec<DMatrix<f64>>) -> EmbeddingModel {
    let k = a.ncols();
    let gammas = vec![1.0; ws.len()];
    EmbeddingModel {
        textual: a,
        projections: ws
            .into_iter()
            .enumerate()
            .map(|(j, weights)| Projection { modality: format!("m{j}"), weights })
            .collect(),
        gammas,
        hyperparams: Hyperparams { k, ..Hyperparams::default() },
        vocab_fingerprint: [0; 32],
    }
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i:02}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_round_trips_through_files(corpus in small_corpus()) {
        let dir = tempfile::tempdir().unwrap();
        corpus.save(dir.path()).unwrap();
        prop_assert_eq!(Corpus::load(dir.path()).unwrap(), corpus);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences(
        a in matrix(8, 3), w in matrix(5, 3), s in vector(3), x in vector(5), y in binary(8, 1), hp in lambdas(),
    ) {
        let y = y.column(0).clone_owned();
        let g = sample_gradients(&a, &w, &s, &x, &y, &hp).unwrap();
        let mut point: Vec<f64> = a.as_slice().to_vec();
        point.extend_from_slice(w.as_slice());
        point.extend_from_slice(s.as_slice());
        let f = |v: &[f64]| {
            sample_objective(
                &DMatrix::from_column_slice(8, 3, &v[..24]),
                &DMatrix::from_column_slice(5, 3, &v[24..39]),
                &DVector::from_column_slice(&v[39..]),
                &x,
                &y,
                &hp,
            )
        };
        let fd = DVector::from_vec(finite_difference_grad(f, &point, 1e-6).unwrap());
        let mut analytic: Vec<f64> = g.a.as_slice().to_vec();
        analytic.extend_from_slice(g.w[0].as_slice());
        analytic.extend_from_slice(g.s.as_slice());
        let analytic = DVector::from_vec(analytic);
        let err = (&analytic - &fd).norm() / analytic.norm().max(fd.norm()).max(1e-12);
        prop_assert!(err <= 1e-6, "relative error {}", err);
    }

    #[test]
    fn total_objective_is_non_negative(
        a in matrix(4, 3), w in matrix(2, 3), s in matrix(3, 5), y in binary(4, 5), x in matrix(5, 2), hp in lambdas(),
    ) {
        prop_assert!(total_objective(&a, &w, &s, &y, &x, &hp).unwrap() >= 0.0);
    }

    #[test]
    fn embed_and_predict_are_linear(
        a in matrix(6, 3), w in matrix(4, 3), x1 in vector(4), x2 in vector(4), c1 in -3.0f64..3.0, c2 in -3.0f64..3.0,
    ) {
        let m = model(a, vec![w]);
        let mixed = embed(&m, &(&x1 * c1 + &x2 * c2)).unwrap();
        let parts = embed(&m, &x1).unwrap() * c1 + embed(&m, &x2).unwrap() * c2;
        prop_assert!((&mixed - &parts).amax() <= 1e-12);
        let s1 = embed(&m, &x1).unwrap();
        let s2 = embed(&m, &x2).unwrap();
        let y = predict_terms(&m, &(&s1 * c1 + &s2 * c2)).unwrap();
        let y_parts = predict_terms(&m, &s1).unwrap() * c1 + predict_terms(&m, &s2).unwrap() * c2;
        prop_assert!((&y - &y_parts).amax() <= 1e-12);
    }

    #[test]
    fn top_terms_survive_positive_scaling(a in matrix(10, 3), s in vector(3), c in 0.01f64..100.0, n in 1usize..10) {
        let m = model(a, vec![DMatrix::zeros(2, 3)]);
        let top: Vec<usize> = top_terms(&predict_terms(&m, &s).unwrap(), n).into_iter().map(|t| t.0).collect();
        let scaled: Vec<usize> = top_terms(&predict_terms(&m, &(&s * c)).unwrap(), n).into_iter().map(|t| t.0).collect();
        let (mut t1, mut t2) = (top.clone(), scaled.clone());
        t1.sort_unstable();
        t2.sort_unstable();
        prop_assert_eq!(t1, t2);
    }

    #[test]
    fn fused_embedding_keeps_modality_blocks(a in matrix(5, 3), w1 in matrix(4, 3), w2 in matrix(2, 3), x1 in vector(4), x2 in vector(2)) {
        let m = model(a, vec![w1.clone(), w2.clone()]);
        let s = embed_fused(&m, &[x1.clone(), x2.clone()]).unwrap();
        prop_assert_eq!(s.len(), 6);
        prop_assert_eq!(s.rows(0, 3).clone_owned(), w1.transpose() * x1);
        prop_assert_eq!(s.rows(3, 3).clone_owned(), w2.transpose() * x2);
    }

    #[test]
    fn uniform_importance_scales_reconstruction(
        a in matrix(5, 2), s in matrix(2, 6), y in binary(5, 6), h in 0.0f64..2.0,
    ) {
        let weighted = term_sensitive_loss(&a, &s, &y, &DVector::from_element(5, h), 0.0, 0.0).unwrap();
        let plain = descriptiveness_loss(&a, &s, &y, 0.0, 0.0).unwrap();
        prop_assert!((weighted - h * plain).abs() <= 1e-12 * plain.max(1.0));
    }

    #[test]
    fn ranking_is_scale_invariant_and_bounded(corpus in small_corpus(), c in 0.1f64..50.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m_terms = corpus.vocabulary().len();
        let d = corpus.modality(0).dim();
        let a = DMatrix::from_fn(m_terms, 2, |_, _| rng.random_range(-1.0..1.0));
        let w = DMatrix::from_fn(d, 2, |_, _| rng.random_range(-1.0..1.0));
        let mut mdl = model(a.clone(), vec![w.clone()]);
        mdl.vocab_fingerprint = corpus.vocabulary().fingerprint();
        let query = EventQuery { event_id: "e".into(), terms: DVector::from_fn(m_terms, |j, _| (j % 2) as f64 + if j == 0 { 1.0 } else { 0.0 }) };
        let ranking = cosine_rank(&mdl, &query, &corpus).unwrap();

        // Brute force: score every video directly, then check order and ties.
        let x = corpus.modality(0).values();
        let mut expected: Vec<(String, f64)> = (0..corpus.len())
            .map(|i| {
                let y_hat = &a * (w.transpose() * x.row(i).transpose());
                (corpus.video_ids()[i].clone(), cosine(&query.terms, &y_hat))
            })
            .collect();
        expected.sort_by(|p, q| q.1.total_cmp(&p.1).then_with(|| p.0.cmp(&q.0)));
        for (entry, (id, score)) in ranking.entries.iter().zip(&expected) {
            prop_assert_eq!(&entry.video_id, id);
            prop_assert!((entry.score - score).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&entry.score));
        }

        let scaled_features = FeatureMatrix::new("m0", x * c, corpus.video_ids().to_vec()).unwrap();
        let scaled = corpus.with_features(vec![scaled_features]).unwrap();
        let again = cosine_rank(&mdl, &query, &scaled).unwrap();
        for (p, q) in ranking.entries.iter().zip(&again.entries) {
            prop_assert!((p.score - q.score).abs() <= 1e-12);
        }
    }

    #[test]
    fn ap_is_one_iff_positives_lead(scores in prop::collection::vec(0u8..4, 1..12), labels in prop::collection::vec(any::<bool>(), 12)) {
        let n = scores.len();
        let labels = &labels[..n];
        prop_assume!(labels.iter().any(|l| *l));
        let scores: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        let ids = ids(n);
        let ap = average_precision("e", &ids, &scores, labels).unwrap().ap;
        let ahead = |i: usize, j: usize| scores[i] > scores[j] || (scores[i] == scores[j] && ids[i] < ids[j]);
        let separated = (0..n).all(|i| !labels[i] || (0..n).all(|j| labels[j] || ahead(i, j)));
        prop_assert_eq!(ap == 1.0, separated);
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn ap_ignores_monotone_transforms(scores in prop::collection::vec(-5.0f64..5.0, 1..15), labels in prop::collection::vec(any::<bool>(), 15)) {
        let n = scores.len();
        let labels = &labels[..n];
        prop_assume!(labels.iter().any(|l| *l));
        let ids = ids(n);
        let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
        let ap = average_precision("e", &ids, &scores, labels).unwrap().ap;
        let ap2 = average_precision("e", &ids, &transformed, labels).unwrap().ap;
        prop_assert_eq!(ap, ap2);
    }

    #[test]
    fn map_is_permutation_invariant(aps in prop::collection::vec(0.0f64..1.0, 1..10), rot in 0usize..10) {
        let results: Vec<APResult> = aps
            .iter()
            .enumerate()
            .map(|(i, &ap)| APResult { event_id: format!("E{i}"), ap, n_pos: 1, n_total: 2 })
            .collect();
        let mut rotated = results.clone();
        rotated.rotate_left(rot % results.len());
        let m1 = mean_average_precision(&results).unwrap();
        let m2 = mean_average_precision(&rotated).unwrap();
        prop_assert!((m1 - m2).abs() <= 1e-15);
        let direct = aps.iter().sum::<f64>() / aps.len() as f64;
        prop_assert!((m1 - direct).abs() <= 1e-15);
    }

    #[test]
    fn kernel_scores_ignore_training_order(reps in matrix(6, 3), labels in prop::collection::vec(any::<bool>(), 6), probe in matrix(4, 3), rot in 1usize..6) {
        prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
        let order: Vec<usize> = (0..6).map(|i| (i + rot) % 6).collect();
        let permuted = reps.select_rows(&order);
        let permuted_labels: Vec<bool> = order.iter().map(|&i| labels[i]).collect();
        let s1 = train_event_classifier(&reps, &labels, 1.0, 1.0).unwrap().score(&probe).unwrap();
        let s2 = train_event_classifier(&permuted, &permuted_labels, 1.0, 1.0).unwrap().score(&probe).unwrap();
        prop_assert!((s1 - s2).amax() <= 1e-12);
    }

    #[test]
    fn nine_digit_text_round_trips(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let back: f64 = sig9(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs());
        prop_assert_eq!(sig9(back), sig9(x));
    }
}

use genfair::audit::total_variation;
use genfair::bias::{expected_bias, BiasMeasure, Normalization};
use genfair::embedding::{cosine, CasePolicy, EmbeddingMatrix};
use genfair::linalg;
use genfair::similarity::{jaccard_distance, Prompt, SimilarityMetric};
use genfair::subspace::{project, reject, GenderSubspace};
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero", |v| linalg::norm(v) > 1e-3)
}

/// Orthonormal basis of `k` vectors in `dim` dimensions.
fn basis(dim: usize, k: usize) -> impl Strategy<Value = GenderSubspace> {
    prop::collection::vec(vector(dim), k).prop_filter_map("independent", move |vs| {
        let b = linalg::orthonormalize(&vs);
        (b.len() == k).then(|| GenderSubspace::from_basis(b).unwrap())
    })
}

fn prompt() -> impl Strategy<Value = Prompt> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 0..6)
        .prop_map(|t| Prompt::new(t.join(" ")))
}

proptest! {
    #[test]
    fn save_load_round_trip(rows in prop::collection::vec(vector(4), 1..20)) {
        let m = EmbeddingMatrix::from_rows(
            rows.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.clone())),
            CasePolicy::Lowercase,
        ).unwrap();
        let back = EmbeddingMatrix::parse(&m.to_word2vec_text(), &Default::default()).unwrap();
        for (word, v) in m.iter() {
            let w = back.lookup(word).unwrap().vec;
            prop_assert!(v.iter().zip(w).all(|(a, b)| (a - b).abs() <= 1e-6));
            prop_assert!((linalg::norm(w) - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn cosine_symmetric(a in vector(5), b in vector(5)) {
        let (mut a, mut b) = (a, b);
        linalg::normalize(&mut a);
        linalg::normalize(&mut b);
        prop_assert_eq!(cosine(&a, &b).unwrap(), cosine(&b, &a).unwrap());
    }

    #[test]
    fn decomposition_and_idempotence(v in vector(6), g in basis(6, 2)) {
        let p = project(&v, &g).unwrap();
        let r = reject(&v, &g).unwrap();
        for i in 0..6 {
            prop_assert!((p[i] + r[i] - v[i]).abs() <= 1e-10);
        }
        let pp = project(&p, &g).unwrap();
        prop_assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() <= 1e-10));
        for b in &g.basis {
            prop_assert!(linalg::dot(&r, b).abs() <= 1e-8);
        }
    }

    #[test]
    fn normalizations_order_identically(vs in prop::collection::vec(vector(3), 2..12)) {
        let m = EmbeddingMatrix::from_rows(
            vs.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.clone())),
            CasePolicy::Lowercase,
        ).unwrap();
        let g = GenderSubspace::from_basis(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let raw = BiasMeasure::new("g", &g, &m, Normalization::RawSigned).unwrap();
        let unit = BiasMeasure::new("g", &g, &m, Normalization::UnitInterval).unwrap();
        let argsort = |bm: &BiasMeasure| {
            let mut idx: Vec<usize> = (0..m.len()).collect();
            idx.sort_by(|&a, &b| {
                bm.word_bias(&m.words()[a]).unwrap()
                    .total_cmp(&bm.word_bias(&m.words()[b]).unwrap())
                    .then(a.cmp(&b))
            });
            idx
        };
        prop_assert_eq!(argsort(&raw), argsort(&unit));
        for w in m.words() {
            let u = unit.word_bias(w).unwrap();
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert!((-1.0..=1.0).contains(&raw.word_bias(w).unwrap()));
        }
    }

    #[test]
    fn constant_expectation_exact(c in -1.0f64..1.0, n in 1usize..50) {
        let e = expected_bias(&vec![c; n]).unwrap();
        prop_assert_eq!(e.mean, c);
        prop_assert_eq!(e.se, 0.0);
    }

    #[test]
    fn jaccard_axioms(u in prompt(), v in prompt(), w in prompt()) {
        let d = |a: &Prompt, b: &Prompt| jaccard_distance(a, b);
        prop_assert_eq!(d(&u, &v), d(&v, &u));
        prop_assert_eq!(d(&u, &u), 0.0);
        prop_assert!((0.0..=1.0).contains(&d(&u, &v)));
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-12);
    }

    #[test]
    fn semantic_metrics_symmetric_and_bounded(u in prompt(), v in prompt()) {
        let m = EmbeddingMatrix::from_rows(
            vec![
                ("a", vec![1.0, 0.0, 0.0]), ("b", vec![0.0, 1.0, 0.0]), ("c", vec![0.0, 0.0, 1.0]),
                ("d", vec![1.0, 1.0, 0.0]), ("e", vec![-1.0, 0.5, 0.2]), ("f", vec![0.3, -0.9, 0.1]),
            ],
            CasePolicy::Lowercase,
        ).unwrap();
        prop_assume!(!u.tokens.is_empty() && !v.tokens.is_empty());
        for metric in [SimilarityMetric::semantic(), SimilarityMetric::composite(0.3, 0.7).unwrap()] {
            let a = metric.distance(&u, &v, Some(&m)).unwrap();
            prop_assert_eq!(a, metric.distance(&v, &u, Some(&m)).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(metric.distance(&u, &u, Some(&m)).unwrap(), 0.0);
        }
    }

    #[test]
    fn total_variation_bounds(
        u in prop::collection::vec(0.0f64..=1.0, 1..40),
        v in prop::collection::vec(0.0f64..=1.0, 1..40),
        bins in 2usize..30,
    ) {
        let tv = total_variation(&u, &v, bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&tv));
        prop_assert_eq!(tv, total_variation(&v, &u, bins).unwrap());
        prop_assert_eq!(total_variation(&u, &u, bins).unwrap(), 0.0);
    }
}

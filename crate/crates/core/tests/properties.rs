mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use semaug::extractor::{DatasetSplit, ExtractorConfig, MultiLevelFeature, Record, SplitRole, ToyExtractor};
use semaug::fewshot::{ci95, knn_classify, EvalReport};
use semaug::rng::rng_for;
use semaug::semantic::{cosine, euclidean, jacobi_svd, nearest_vocab, sigma_for, Vocabulary};
use semaug::trinet::{Mode, TriNetConfig, TriNetModel};

fn vec_of(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, dim)
}

fn nonzero(v: &[f64]) -> bool {
    v.iter().map(|x| x * x).sum::<f64>() > 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn nearest_vocab_matches_scan(
        words in prop::collection::vec(vec_of(4), 20..60),
        query in vec_of(4),
        k in 1usize..8,
        skip in 0usize..5,
    ) {
        prop_assume!(nonzero(&query) && words.iter().all(|w| nonzero(w)));
        let vocab = Vocabulary::new(
            words.iter().enumerate().map(|(i, w)| (format!("t{i:03}"), w.clone())).collect(),
        ).unwrap();
        let exclude: HashSet<String> = (0..skip).map(|i| format!("t{i:03}")).collect();
        let got: Vec<&str> = nearest_vocab(&query, &vocab, k, &exclude).unwrap().iter().map(|n| n.token).collect();
        let mut all: Vec<(f64, &str)> = (0..vocab.len())
            .filter(|&i| !exclude.contains(&vocab.tokens()[i]))
            .map(|i| (cosine(&query, vocab.vector(i)).unwrap(), vocab.tokens()[i].as_str()))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let want: Vec<&str> = all.iter().take(k).map(|x| x.1).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn svd_reconstructs_with_orthonormal_factors(n in 1usize..10, seed in any::<u64>()) {
        let mut rng = rng_for(seed, &[]);
        let a = common::randn(&[n * n], &mut rng).into_data();
        let svd = jacobi_svd(&a, n).unwrap();
        for (x, y) in svd.reconstruct().iter().zip(&a) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for i in 0..n {
            for j in 0..n {
                let eye = if i == j { 1.0 } else { 0.0 };
                let uu: f64 = (0..n).map(|k| svd.u[k * n + i] * svd.u[k * n + j]).sum();
                let vv: f64 = (0..n).map(|k| svd.v[k * n + i] * svd.v[k * n + j]).sum();
                prop_assert!((uu - eye).abs() < 1e-9 && (vv - eye).abs() < 1e-9);
            }
        }
        prop_assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(svd.sigma.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn sigma_scales_with_the_space(
        center in vec_of(3),
        others in prop::collection::vec((0u32..3, vec_of(3)), 2..8),
        scale in 0.1f64..10.0,
    ) {
        prop_assume!(others.iter().any(|(c, v)| *c != 0 && euclidean(v, &center) > 1e-3));
        let refs: Vec<(u32, &[f64])> = others.iter().map(|(c, v)| (*c, v.as_slice())).collect();
        let base = sigma_for(&center, &0, &refs).unwrap();
        let scaled_center: Vec<f64> = center.iter().map(|x| x * scale).collect();
        let scaled: Vec<(u32, Vec<f64>)> = others.iter().map(|(c, v)| (*c, v.iter().map(|x| x * scale).collect())).collect();
        let srefs: Vec<(u32, &[f64])> = scaled.iter().map(|(c, v)| (*c, v.as_slice())).collect();
        let s = sigma_for(&scaled_center, &0, &srefs).unwrap();
        prop_assert!((s - scale * base).abs() <= 1e-9 * s.max(1.0));
    }

    #[test]
    fn shapes_follow_the_configuration(
        input_dim in 1usize..8,
        dims in prop::collection::vec(1usize..8, 1..5),
        semantic_dim in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_for(seed, &[]);
        let ex = ToyExtractor::new(
            ExtractorConfig { input_dim, level_dims: dims.clone(), n_classes: 2 },
            &mut rng,
        ).unwrap();
        let x = common::randn(&[input_dim], &mut rng).into_data();
        let f = ex.extract(&x).unwrap();
        prop_assert_eq!(f.dims(), dims.clone());
        let tn = TriNetModel::new(TriNetConfig::new(dims.clone(), semantic_dim), &mut rng).unwrap();
        let v = tn.encode(&f, Mode::Infer, &mut rng).unwrap();
        prop_assert_eq!(v.len(), semantic_dim);
        let d = tn.decode(&v, Mode::Infer, &mut rng).unwrap();
        prop_assert_eq!(d.dims(), dims.clone());
        for l in 1..dims.len() {
            prop_assert_eq!(ex.feed_through(l, d.level(l)).unwrap().len(), *dims.last().unwrap());
        }
    }

    #[test]
    fn feature_files_round_trip(
        dims in prop::collection::vec(1usize..5, 1..4),
        n in 0usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_for(seed, &[]);
        let records = (0..n).map(|i| Record {
            id: i as u64 * 3 + 1,
            class: (i % 3) as u32,
            feature: MultiLevelFeature::new(
                // The container stores f32.
                dims.iter()
                    .map(|&d| common::randn(&[d], &mut rng).into_data().iter().map(|&x| x as f32 as f64).collect())
                    .collect(),
            ).unwrap(),
        }).collect();
        let split = DatasetSplit::new(SplitRole::Novel, dims, records).unwrap();
        let back = DatasetSplit::decode(&split.encode(), SplitRole::Novel).unwrap();
        prop_assert_eq!(back, split);
    }

    #[test]
    fn knn_ignores_duplicated_support_points(
        points in prop::collection::vec(vec_of(3), 2..12),
        query in vec_of(3),
        dup in 0usize..12,
    ) {
        let labels: Vec<u32> = (0..points.len() as u32).map(|i| i % 3).collect();
        let before = knn_classify(&points, &labels, &query, 1).unwrap();
        let i = dup % points.len();
        let mut p2 = points.clone();
        p2.push(points[i].clone());
        let mut l2 = labels.clone();
        l2.push(labels[i]);
        prop_assert_eq!(knn_classify(&p2, &l2, &query, 1).unwrap(), before);
    }

    #[test]
    fn report_text_round_trips(accs in prop::collection::vec(0u32..=15, 1..40)) {
        let accs: Vec<f64> = accs.into_iter().map(|a| a as f64 / 15.0).collect();
        let header = vec![("way".to_string(), "5".to_string()), ("shot".to_string(), "1".to_string())];
        let r = EvalReport::new(header, accs.clone()).unwrap();
        prop_assert_eq!(r.ci95, ci95(&accs));
        let back = EvalReport::parse(&r.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), r.to_text());
    }
}

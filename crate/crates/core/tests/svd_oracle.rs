//! Singular values from the Jacobi SVD against nalgebra's decomposition.

mod common;

use nalgebra::DMatrix;
use semaug::rng::rng_for;
use semaug::semantic::{build_similarity, jacobi_svd, svd_space, SemanticSpace, SpaceKind};

#[test]
fn singular_values_match_nalgebra() {
    let mut rng = rng_for(21, &[]);
    for n in 1..=24 {
        let a = common::randn(&[n * n], &mut rng).into_data();
        let ours = jacobi_svd(&a, n).unwrap();
        let mut theirs: Vec<f64> = DMatrix::from_row_slice(n, n, &a)
            .singular_values()
            .iter()
            .copied()
            .collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        for (s, t) in ours.sigma.iter().zip(&theirs) {
            assert!((s - t).abs() < 1e-9 * t.max(1.0), "n={n}: {s} vs {t}");
        }
    }
}

#[test]
fn similarity_subspace_matches_nalgebra_spectrum() {
    let mut rng = rng_for(22, &[]);
    let n = 12;
    let entries = (0..n)
        .map(|i| (format!("c{i}"), common::randn(&[5], &mut rng).into_data()))
        .collect();
    let space = SemanticSpace::new(SpaceKind::Word, entries).unwrap();
    let labels: Vec<&str> = space.labels().iter().map(String::as_str).collect();
    let m = build_similarity(&space, &labels).unwrap();
    let (svd_space, svd) = svd_space(&m).unwrap();
    assert_eq!(svd_space.len(), n);
    // A similarity matrix is PSD, so its singular values are its eigenvalues.
    let mut eig: Vec<f64> = DMatrix::from_row_slice(n, n, &m.values)
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.abs())
        .collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    for (s, e) in svd.sigma.iter().zip(&eig) {
        assert!((s - e).abs() < 1e-9, "{s} vs {e}");
    }
    // Rank is at most the source dimension.
    assert!(svd.sigma[5..].iter().all(|&s| s < 1e-9));
}

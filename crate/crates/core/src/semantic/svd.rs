//! One-sided (Hestenes) Jacobi SVD and the class-similarity subspace built
//! from it.

use super::space::{ClassSimilarityMatrix, SemanticSpace, SpaceKind};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// `A = U·diag(sigma)·Vᵀ` for a square `n×n` input, singular values sorted
/// in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub n: usize,
    /// Row-major `n×n`, orthonormal columns.
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Row-major `n×n`, orthonormal columns.
    pub v: Vec<f64>,
    pub sweeps: usize,
}

impl Svd {
    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.u[i * self.n..(i + 1) * self.n]
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n)
                    .map(|k| self.u[i * n + k] * self.sigma[k] * self.v[j * n + k])
                    .sum();
            }
        }
        out
    }
}

fn col_dot(a: &[f64], n: usize, p: usize, q: usize) -> f64 {
    (0..n).map(|i| a[i * n + p] * a[i * n + q]).sum()
}

fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..n {
        let (x, y) = (a[i * n + p], a[i * n + q]);
        a[i * n + p] = c * x - s * y;
        a[i * n + q] = s * x + c * y;
    }
}

/// Decomposes a row-major `n×n` matrix.
pub fn jacobi_svd(a: &[f64], n: usize) -> Result<Svd> {
    if n == 0 || a.len() != n * n {
        return Err(Error::dim("jacobi_svd", n * n, a.len()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite SVD input".into()));
    }
    let mut w = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    // Columns below this squared norm are rounding residue of a zero column.
    let negligible = (f64::EPSILON * a.iter().map(|x| x * x).sum::<f64>().sqrt()).powi(2);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = col_dot(&w, n, p, p);
                let beta = col_dot(&w, n, q, q);
                let gamma = col_dot(&w, n, p, q);
                if alpha <= negligible
                    || beta <= negligible
                    || gamma == 0.0
                    || gamma.abs() <= OFF_DIAGONAL_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, n, p, q, c, s);
                rotate(&mut v, n, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = (0..n).map(|j| col_dot(&w, n, j, j).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let smax = norms[order[0]];
    let cutoff = smax * f64::EPSILON * n as f64;

    let mut u = vec![0.0; n * n];
    let mut vs = vec![0.0; n * n];
    let mut sigma = vec![0.0; n];
    let mut missing = vec![];
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            vs[i * n + k] = v[i * n + j];
        }
        if norms[j] > cutoff && norms[j] > 0.0 {
            sigma[k] = norms[j];
            for i in 0..n {
                u[i * n + k] = w[i * n + j] / norms[j];
            }
        } else {
            missing.push(k);
        }
    }
    complete_basis(&mut u, n, &missing);

    for k in 0..n {
        let lead = (0..n)
            .max_by(|&a, &b| u[a * n + k].abs().total_cmp(&u[b * n + k].abs()).then(b.cmp(&a)))
            .expect("n > 0");
        if u[lead * n + k] < 0.0 {
            for i in 0..n {
                u[i * n + k] = -u[i * n + k];
                vs[i * n + k] = -vs[i * n + k];
            }
        }
    }
    Ok(Svd {
        n,
        u,
        sigma,
        v: vs,
        sweeps,
    })
}

/// Fills the listed columns with unit vectors orthogonal to every other
/// column: each takes the standard basis vector with the largest residual
/// after projecting out the filled columns.
fn complete_basis(u: &mut [f64], n: usize, missing: &[usize]) {
    let mut filled: Vec<usize> = (0..n).filter(|k| !missing.contains(k)).collect();
    for &k in missing {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..n {
            let mut cand = vec![0.0; n];
            cand[e] = 1.0;
            for _ in 0..2 {
                for &f in &filled {
                    let d: f64 = (0..n).map(|i| cand[i] * u[i * n + f]).sum();
                    for i in 0..n {
                        cand[i] -= d * u[i * n + f];
                    }
                }
            }
            let len = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(l, _)| len > *l) {
                best = Some((len, cand));
            }
        }
        // At least one residual has squared length >= (n - filled) / n.
        let (len, cand) = best.expect("n > 0");
        for i in 0..n {
            u[i * n + k] = cand[i] / len;
        }
        filled.push(k);
    }
}

/// New semantic space whose class vectors are the rows of `U`.
pub fn svd_space(m: &ClassSimilarityMatrix) -> Result<(SemanticSpace, Svd)> {
    m.validate()?;
    let svd = jacobi_svd(&m.values, m.order())?;
    let entries = m
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), svd.u_row(i).to_vec()))
        .collect();
    Ok((SemanticSpace::new(SpaceKind::Svd, entries)?, svd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_orth_err(u: &[f64], n: usize) -> f64 {
        let mut e: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let d = col_dot(u, n, a, b) - if a == b { 1.0 } else { 0.0 };
                e = e.max(d.abs());
            }
        }
        e
    }

    #[test]
    fn rank_one_large_matrix_gets_full_basis() {
        let n = 32;
        let a = vec![1.0; n * n];
        let svd = jacobi_svd(&a, n).unwrap();
        assert!((svd.sigma[0] - n as f64).abs() < 1e-9);
        assert!(max_orth_err(&svd.u, n) < 1e-9);
    }

    #[test]
    fn identity_gives_basis_rows() {
        let m = ClassSimilarityMatrix {
            labels: (0..4).map(|i| format!("c{i}")).collect(),
            values: (0..16).map(|k| if k % 5 == 0 { 1.0 } else { 0.0 }).collect(),
        };
        let (space, svd) = svd_space(&m).unwrap();
        assert_eq!(space.dim(), 4);
        for (_, row) in space.entries() {
            assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&x| x == 0.0).count(), 3);
        }
        assert_eq!(svd.sigma, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_singular_values() {
        let svd = jacobi_svd(&[4.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert!((svd.sigma[0] - 4.0).abs() < 1e-9);
        assert!((svd.sigma[1] - 1.0).abs() < 1e-9);
        let svd = jacobi_svd(&[1.0, 0.0, 0.0, 4.0], 2).unwrap();
        assert_eq!(svd.sigma, vec![4.0, 1.0]);
    }

    #[test]
    fn rank_one_is_completed() {
        // all-ones 3×3: one singular value 3, two zeros
        let svd = jacobi_svd(&[1.0; 9], 3).unwrap();
        assert!((svd.sigma[0] - 3.0).abs() < 1e-12);
        assert!(svd.sigma[1].abs() < 1e-12 && svd.sigma[2].abs() < 1e-12);
        assert!(max_orth_err(&svd.u, 3) < 1e-12);
        let rec = svd.reconstruct();
        assert!(rec.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sign_convention_makes_lead_positive() {
        let a = [2.0, -1.0, 0.5, -1.0, 3.0, 0.2, 0.5, 0.2, 1.0];
        let svd = jacobi_svd(&a, 3).unwrap();
        for k in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| svd.u[i * 3 + k]).collect();
            let lead = col
                .iter()
                .cloned()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn invalid_matrix_rejected() {
        let m = ClassSimilarityMatrix {
            labels: vec!["a".into(), "b".into()],
            values: vec![1.0, 0.5, 0.4, 1.0],
        };
        assert!(svd_space(&m).is_err());
        assert!(jacobi_svd(&[f64::NAN], 1).is_err());
    }
}

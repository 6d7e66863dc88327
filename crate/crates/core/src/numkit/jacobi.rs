//! Cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Sweeps annihilate off-diagonal entries with plane rotations, accumulating
//! the rotations into the eigenvector matrix. Convergence is quadratic once
//! the off-diagonal mass is small; for the dimensions used in this crate
//! (d <= ~16) a handful of sweeps suffices.

use super::{Matrix, SymMatrix};

const MAX_SWEEPS: usize = 50;

/// Returns (eigenvalues, eigenvectors-as-columns), unsorted.
pub(super) fn jacobi_eigen(s: &SymMatrix) -> (Vec<f64>, Matrix) {
    let n = s.dim();
    let mut a = s.to_matrix();
    let mut v = Matrix::identity(n);
    if n == 1 {
        return (vec![a.get(0, 0)], v);
    }

    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut acc = 0.0;
            for p in 0..n - 1 {
                for q in p + 1..n {
                    acc += a.get(p, q) * a.get(p, q);
                }
            }
            acc
        };
        let scale: f64 = a.frobenius_norm();
        if off.sqrt() <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // rotation angle from tan(2*theta) = 2*apq / (app - aqq)
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                // rows/cols p and q of A
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
                // keep the pivot pair exactly symmetric
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);

                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - sn * vkq);
                    v.set(k, q, sn * vkp + c * vkq);
                }
            }
        }
    }

    let vals = (0..n).map(|i| a.get(i, i)).collect();
    (vals, v)
}

//! Thin wrappers over faer decompositions plus a restarted Arnoldi solver
//! for the largest-magnitude eigenpairs of matrix-free real operators.

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Column-major real matrix from a row-major slice.
pub fn mat_from_row_major(rows: usize, cols: usize, data: &[f64]) -> Mat<f64> {
    Mat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
pub fn eigh(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("symmetric eigensolver: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues of a general real matrix.
pub fn eigvals(a: &Mat<f64>) -> Result<Vec<C64>> {
    a.eigenvalues()
        .map_err(|e| Error::Linalg(format!("eigensolver: {e:?}")))
}

/// Eigenpairs of a general real matrix (vectors as columns).
pub fn eig(a: &Mat<f64>) -> Result<(Vec<C64>, Mat<C64>)> {
    let e = a
        .eigen()
        .map_err(|e| Error::Linalg(format!("eigensolver: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Thin SVD `A = U diag(S) Vᵀ`, singular values descending.
pub fn svd(a: &Mat<f64>) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let d = a
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    let s = d.S();
    let k = a.nrows().min(a.ncols());
    Ok((d.U().to_owned(), (0..k).map(|i| s[i]).collect(), d.V().to_owned()))
}

/// Settings for [`arnoldi`].
#[derive(Debug, Clone, Copy)]
pub struct ArnoldiOpts {
    /// Number of wanted eigenpairs.
    pub k: usize,
    /// Krylov subspace size per restart cycle.
    pub krylov: usize,
    /// Relative residual below which a Ritz pair counts as converged.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for ArnoldiOpts {
    fn default() -> Self {
        Self {
            k: 2,
            krylov: 40,
            tol: 1e-12,
            max_restarts: 300,
            seed: 0x5eed,
        }
    }
}

/// Ritz pairs sorted by descending magnitude.
#[derive(Debug, Clone)]
pub struct RitzPairs {
    pub values: Vec<C64>,
    /// Unit-norm Ritz vectors.
    pub vectors: Vec<Vec<C64>>,
    /// Relative residual estimates `‖A x − θ x‖ / |θ|`.
    pub residuals: Vec<f64>,
    pub restarts: usize,
}

impl RitzPairs {
    /// Real part of a Ritz vector, with the sign fixed so the largest
    /// component is positive.
    pub fn real_vector(&self, i: usize) -> Vec<f64> {
        let v = &self.vectors[i];
        // Rotate away any global phase before taking the real part.
        let (idx, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bn), (j, z)| if z.norm() > bn { (j, z.norm()) } else { (bi, bn) });
        let phase = if v[idx].norm() > 0.0 { v[idx].conj() / v[idx].norm() } else { C64::new(1.0, 0.0) };
        let mut out: Vec<f64> = v.iter().map(|z| (z * phase).re).collect();
        let n = norm(&out);
        if n > 0.0 {
            out.iter_mut().for_each(|x| *x /= n);
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic pseudo-random unit vector.
pub fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Largest-magnitude eigenpairs of a real linear operator by thick-restarted
/// Arnoldi with full reorthogonalization.
///
/// At each restart the real span of the leading Ritz vectors (real and
/// imaginary parts) is kept together with the residual direction, which
/// preserves the Arnoldi relation `A V = V H + β v e_mᵀ` with a dense `H`.
/// `op(x, y)` must write `A x` into `y`. When `start` is absent a seeded
/// random vector is used.
pub fn arnoldi<F>(n: usize, mut op: F, opts: ArnoldiOpts, start: Option<&[f64]>) -> Result<RitzPairs>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(Error::Invalid("empty operator".into()));
    }
    let k = opts.k.min(n).max(1);
    let m = opts.krylov.max(k + 2).min(n);
    let v0 = match start {
        Some(s) if norm(s) > 0.0 => {
            let ns = norm(s);
            // Blend in a little noise so no wanted direction is missing.
            let noise = random_unit(n, opts.seed);
            let mut v: Vec<f64> = s.iter().zip(&noise).map(|(a, b)| a / ns + 1e-3 * b).collect();
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            v
        }
        _ => random_unit(n, opts.seed),
    };
    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut h = Mat::<f64>::zeros(m + 1, m);
    let mut w = vec![0.0; n];
    let mut last_res = f64::INFINITY;
    for restart in 0..=opts.max_restarts {
        // Extend the decomposition from column `basis.len() - 1` to `m`.
        let mut size = m;
        let mut beta = 0.0;
        let mut next: Option<Vec<f64>> = None;
        let first = basis.len() - 1;
        for j in first..m {
            op(&basis[j], &mut w);
            for i in 0..=j {
                h[(i, j)] = 0.0;
            }
            for _pass in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &w);
                    h[(i, j)] += c;
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            beta = norm(&w);
            h[(j + 1, j)] = beta;
            let scale = (0..=j).map(|i| h[(i, j)].abs()).fold(beta, f64::max);
            if beta <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                size = j + 1;
                beta = 0.0;
                break;
            }
            let v: Vec<f64> = w.iter().map(|x| x / beta).collect();
            if j + 1 < m {
                basis.push(v);
            } else {
                next = Some(v);
            }
        }
        let hs = Mat::from_fn(size, size, |i, j| h[(i, j)]);
        let (vals, vecs) = eig(&hs)?;
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| {
            vals[b]
                .norm()
                .partial_cmp(&vals[a].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let kk = k.min(size);
        let wanted = &order[..kk];
        let ynorm = |i: usize| (0..size).map(|r| vecs[(r, i)].norm_sqr()).sum::<f64>().sqrt();
        let residuals: Vec<f64> = wanted
            .iter()
            .map(|&i| beta * vecs[(size - 1, i)].norm() / ynorm(i) / vals[i].norm().max(f64::MIN_POSITIVE))
            .collect();
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol || beta == 0.0 || restart == opts.max_restarts {
            if worst > opts.tol && beta != 0.0 {
                return Err(Error::NoConvergence {
                    what: format!("Arnoldi after {restart} restarts"),
                    residual: worst,
                });
            }
            let ritz = |i: usize| -> Vec<C64> {
                let mut x = vec![C64::new(0.0, 0.0); n];
                for (r, b) in basis.iter().enumerate().take(size) {
                    let c = vecs[(r, i)];
                    x.iter_mut().zip(b).for_each(|(xv, bv)| *xv += c * bv);
                }
                let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                x.iter_mut().for_each(|z| *z /= nx);
                x
            };
            return Ok(RitzPairs {
                values: wanted.iter().map(|&i| vals[i]).collect(),
                vectors: wanted.iter().map(|&i| ritz(i)).collect(),
                residuals,
                restarts: restart,
            });
        }
        last_res = worst;
        // Real orthonormal basis Q of the kept Ritz subspace in the small space.
        let keep = (kk + (size - kk) / 2).max(kk).min(size - 1).max(1);
        let mut q: Vec<Vec<f64>> = Vec::new();
        for &i in &order[..keep] {
            for part in 0..2 {
                let mut y: Vec<f64> = (0..size)
                    .map(|r| if part == 0 { vecs[(r, i)].re } else { vecs[(r, i)].im })
                    .collect();
                let n0 = norm(&y);
                if n0 == 0.0 {
                    continue;
                }
                for _pass in 0..2 {
                    for b in &q {
                        let c = dot(b, &y);
                        y.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
                    }
                }
                let ny = norm(&y);
                if ny > 1e-10 * n0 && q.len() < size - 1 {
                    y.iter_mut().for_each(|a| *a /= ny);
                    q.push(y);
                }
            }
        }
        let p = q.len();
        let new_basis: Vec<Vec<f64>> = q
            .iter()
            .map(|y| {
                let mut v = vec![0.0; n];
                for (r, b) in basis.iter().enumerate().take(size) {
                    let c = y[r];
                    if c != 0.0 {
                        v.iter_mut().zip(b).for_each(|(a, bb)| *a += c * bb);
                    }
                }
                v
            })
            .collect();
        // Projected matrix Qᵀ H Q and the coupling row β e_mᵀ Q.
        let hq: Vec<Vec<f64>> = q
            .iter()
            .map(|y| (0..size).map(|r| (0..size).map(|c| hs[(r, c)] * y[c]).sum()).collect())
            .collect();
        let mut hn = Mat::<f64>::zeros(m + 1, m);
        for a in 0..p {
            for b in 0..p {
                hn[(a, b)] = dot(&q[a], &hq[b]);
            }
            hn[(p, a)] = beta * q[a][size - 1];
        }
        h = hn;
        basis = new_basis;
        basis.push(next.expect("residual direction present when β > 0"));
    }
    Err(Error::NoConvergence {
        what: "Arnoldi".into(),
        residual: last_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arnoldi_matches_dense_symmetric() {
        let n = 60;
        let a = Mat::from_fn(n, n, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { i as f64 * 0.01 } else { 0.0 });
        let (vals, _) = eigh(&a).unwrap();
        let r = arnoldi(
            n,
            |x, y| {
                for i in 0..n {
                    y[i] = (0..n).map(|j| a[(i, j)] * x[j]).sum();
                }
            },
            ArnoldiOpts { k: 3, krylov: 20, ..Default::default() },
            None,
        )
        .unwrap();
        for t in 0..3 {
            assert!((r.values[t].re - vals[n - 1 - t]).abs() < 1e-10);
        }
    }

    #[test]
    fn arnoldi_complex_pair() {
        // Rotation block plus a small diagonal: dominant pair is 2·e^{±iπ/3}.
        let n = 10;
        let mut a = Mat::<f64>::zeros(n, n);
        let (s, c) = (std::f64::consts::FRAC_PI_3).sin_cos();
        a[(0, 0)] = 2.0 * c;
        a[(0, 1)] = -2.0 * s;
        a[(1, 0)] = 2.0 * s;
        a[(1, 1)] = 2.0 * c;
        for i in 2..n {
            a[(i, i)] = 1.0 / i as f64;
        }
        let r = arnoldi(
            n,
            |x, y| {
                for i in 0..n {
                    y[i] = (0..n).map(|j| a[(i, j)] * x[j]).sum();
                }
            },
            ArnoldiOpts { k: 2, krylov: 8, ..Default::default() },
            None,
        )
        .unwrap();
        assert!((r.values[0].norm() - 2.0).abs() < 1e-10);
        assert!((r.values[0].im.abs() - 2.0 * s).abs() < 1e-10);
    }

    #[test]
    fn svd_reconstructs() {
        let a = Mat::from_fn(5, 3, |i, j| (i * 3 + j) as f64 + 0.5 * (i == j) as u8 as f64);
        let (u, s, v) = svd(&a).unwrap();
        let mut err = 0.0f64;
        for i in 0..5 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| u[(i, k)] * s[k] * v[(j, k)]).sum();
                err = err.max((r - a[(i, j)]).abs());
            }
        }
        assert!(err < 1e-12);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }
}

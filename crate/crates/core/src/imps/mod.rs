//! Uniform matrix-product-state fixed points of the row transfer operator,
//! their entanglement and correlation length, and finite-entanglement
//! scaling fits of the central charge.
//!
//! The row operator is applied in gate form: the vertical table acts on each
//! site, and the horizontal table acts as a diagonal two-site gate. Updates
//! use the Vidal form on a two-site cell, alternating the two bonds, so the
//! converged state is translation invariant up to truncation.

pub mod fes;
pub mod mpo;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, arnoldi, ArnoldiOpts};

pub use fes::{
    fit_central_charge, kappa, run_fes, window_sensitivity, FESFit, FesOptions, FesSample, FitWindow,
    DEFAULT_LADDER, DEFAULT_MIN_CHI,
};
pub use mpo::{build_row_mpo, RowMPO};

/// Schmidt values below this fraction of the largest are dropped.
pub const SCHMIDT_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpsOptions {
    /// Largest change of the Schmidt spectrum between checks.
    pub tol: f64,
    pub max_iters: usize,
    /// Iterations between convergence checks.
    pub check_every: usize,
    pub seed: u64,
}

impl Default for MpsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 5000,
            check_every: 10,
            seed: 1,
        }
    }
}

/// Two-site Vidal tensors: `Γ_0 Λ_0 Γ_1 Λ_1`, with `Γ_i` row-major
/// `(χ_left, d, χ_right)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VidalCell {
    pub d: usize,
    pub gamma: [Vec<f64>; 2],
    pub lambda: [Vec<f64>; 2],
}

impl VidalCell {
    fn dims(&self, i: usize) -> (usize, usize) {
        let r = self.lambda[i].len();
        (self.gamma[i].len() / (self.d * r), r)
    }

    fn random(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut site = || (0..d).map(|_| 1.0 + rng.random::<f64>() - 0.5).collect::<Vec<_>>();
        Self {
            d,
            gamma: [site(), site()],
            lambda: [vec![1.0], vec![1.0]],
        }
    }

    /// `Γ_i ← Σ_s W(s, t) Γ_i[·, s, ·]` on both sites.
    fn apply_site(&mut self, w: &[f64]) {
        let d = self.d;
        for i in 0..2 {
            let (cl, cr) = self.dims(i);
            let g = &self.gamma[i];
            let mut out = vec![0.0; g.len()];
            for a in 0..cl {
                for s in 0..d {
                    let src = &g[(a * d + s) * cr..(a * d + s + 1) * cr];
                    for t in 0..d {
                        let wt = w[s * d + t];
                        if wt == 0.0 {
                            continue;
                        }
                        let dst = &mut out[(a * d + t) * cr..(a * d + t + 1) * cr];
                        dst.iter_mut().zip(src).for_each(|(o, x)| *o += wt * x);
                    }
                }
            }
            self.gamma[i] = out;
        }
    }

    /// Applies the diagonal gate `g(s, t)` on the bond following site
    /// `bond`, truncates to `chi` and restores the Vidal form. Returns the
    /// norm of the two-site block before normalization.
    fn apply_gate(&mut self, bond: usize, g: &[f64], chi: usize) -> Result<f64> {
        let d = self.d;
        let other = 1 - bond;
        let (ca, cb) = self.dims(bond);
        let (_, cc) = self.dims(other);
        let la = &self.lambda[bond];
        let lb = &self.lambda[other];
        let ga = &self.gamma[bond];
        let gb = &self.gamma[other];
        let x = Mat::from_fn(ca * d, cb, |row, b| {
            let a = row / d;
            lb[a] * ga[row * cb + b] * la[b]
        });
        let y = Mat::from_fn(cb, d * cc, |b, col| gb[b * d * cc + col] * lb[col % cc]);
        let mut theta = &x * &y;
        for row in 0..ca * d {
            let s = row % d;
            for col in 0..d * cc {
                theta[(row, col)] *= g[s * d + col / cc];
            }
        }
        let (u, sv, v) = linalg::svd(&theta)?;
        let s0 = sv.first().copied().unwrap_or(0.0);
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::Degenerate("two-site block vanished".into()));
        }
        let k = sv.iter().take(chi).take_while(|&&x| x > SCHMIDT_CUTOFF * s0).count();
        let total: f64 = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let kept: f64 = sv[..k].iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut new_a = vec![0.0; ca * d * k];
        for row in 0..ca * d {
            let inv = 1.0 / lb[row / d];
            for j in 0..k {
                new_a[row * k + j] = u[(row, j)] * inv;
            }
        }
        let mut new_b = vec![0.0; k * d * cc];
        for j in 0..k {
            for col in 0..d * cc {
                new_b[j * d * cc + col] = v[(col, j)] / lb[col % cc];
            }
        }
        self.gamma[bond] = new_a;
        self.gamma[other] = new_b;
        self.lambda[bond] = sv[..k].iter().map(|x| x / kept).collect();
        Ok(total)
    }

    /// Cell tensor `C[a, (s, t), c] = Γ_0 Λ_0 Γ_1 Λ_1`, row-major.
    pub fn cell(&self) -> (usize, Vec<f64>) {
        let d = self.d;
        let (c0, c1) = self.dims(0);
        let (_, c2) = self.dims(1);
        let a = Mat::from_fn(c0 * d, c1, |row, b| self.gamma[0][row * c1 + b] * self.lambda[0][b]);
        let b = Mat::from_fn(c1, d * c2, |b, col| self.gamma[1][b * d * c2 + col] * self.lambda[1][col % c2]);
        let prod = &a * &b;
        let mut out = vec![0.0; c0 * d * d * c2];
        for row in 0..c0 * d {
            for col in 0..d * c2 {
                out[row * d * c2 + col] = prod[(row, col)];
            }
        }
        (c0, out)
    }
}

/// Converged boundary state with its gauge data.
#[derive(Debug, Clone)]
pub struct UniformMPS {
    pub chi: usize,
    pub d: usize,
    pub tensors: VidalCell,
    /// Bond dimension actually reached at the cell boundary.
    pub bond: usize,
    /// Cell tensor, row-major `(bond, d², bond)`.
    pub cell: Vec<f64>,
    /// Right and left fixed points of the cell transfer map (row-major).
    pub right_env: Vec<f64>,
    pub left_env: Vec<f64>,
    /// Transfer-map eigenvalue magnitudes, descending.
    pub transfer_spectrum: Vec<f64>,
    /// Schmidt values at the cell boundary, descending, unit 2-norm.
    pub schmidt: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final Schmidt-spectrum change.
    pub residual: f64,
}

/// Iterates apply-and-truncate to the fixed point of the row operator and
/// returns the state in symmetric gauge: the final half step applies the
/// vertical weights and square roots of the horizontal ones.
pub fn fixed_point_mps(mpo: &RowMPO, chi: usize, opts: MpsOptions) -> Result<UniformMPS> {
    fixed_point_from(mpo, chi, opts, None)
}

/// As [`fixed_point_mps`], optionally starting from a previous cell.
pub fn fixed_point_from(
    mpo: &RowMPO,
    chi: usize,
    opts: MpsOptions,
    start: Option<&VidalCell>,
) -> Result<UniformMPS> {
    if chi < 1 {
        return Err(Error::Invalid("bond dimension must be positive".into()));
    }
    let w = mpo.weights();
    let d = mpo.d;
    let mut cell = match start {
        Some(c) if c.d == d => c.clone(),
        _ => VidalCell::random(d, opts.seed),
    };
    let mut prev: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    for it in 0..opts.max_iters {
        iters = it + 1;
        cell.apply_site(w);
        cell.apply_gate(0, w, chi)?;
        cell.apply_gate(1, w, chi)?;
        if it % opts.check_every.max(1) == 0 {
            let cur = &cell.lambda[0];
            if let Some(p) = &prev {
                if p.len() == cur.len() {
                    residual = p.iter().zip(cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if residual < opts.tol {
                        converged = true;
                        break;
                    }
                }
            }
            prev = Some(cur.clone());
        }
    }
    let half: Vec<f64> = w.iter().map(|x| x.signum() * x.abs().sqrt()).collect();
    cell.apply_site(w);
    cell.apply_gate(0, &half, chi)?;
    cell.apply_gate(1, &half, chi)?;
    canonical(cell, chi, iters, converged, residual)
}

fn canonical(
    tensors: VidalCell,
    chi: usize,
    iterations: usize,
    converged: bool,
    residual: f64,
) -> Result<UniformMPS> {
    let d = tensors.d;
    let (bond, cell) = tensors.cell();
    let n = bond * bond;
    let d2 = d * d;
    // C as (bond·d², bond) and (bond, d²·bond); both views share the data.
    let cm1 = Mat::from_fn(bond * d2, bond, |r, c| cell[r * bond + c]);
    let cm2 = Mat::from_fn(bond, d2 * bond, |r, c| cell[r * d2 * bond + c]);
    let right = |x: &[f64], y: &mut [f64]| {
        let r = linalg::mat_from_row_major(bond, bond, x);
        let t1 = &cm1 * &r;
        let t1r = Mat::from_fn(bond, d2 * bond, |a, col| t1[(a * d2 + col / bond, col % bond)]);
        let e = &t1r * cm2.transpose();
        for a in 0..bond {
            for b in 0..bond {
                y[a * bond + b] = e[(a, b)];
            }
        }
    };
    let left = |x: &[f64], y: &mut [f64]| {
        let l = linalg::mat_from_row_major(bond, bond, x);
        let t2 = l.transpose() * &cm2;
        let t2r = Mat::from_fn(bond * d2, bond, |row, c| t2[(row / d2, (row % d2) * bond + c)]);
        let e = t2r.transpose() * &cm1;
        for a in 0..bond {
            for b in 0..bond {
                y[a * bond + b] = e[(a, b)];
            }
        }
    };
    let ident: Vec<f64> = (0..n).map(|i| if i / bond == i % bond { 1.0 } else { 0.0 }).collect();
    let (rvals, rvec, lvec) = if n == 1 {
        let mut y = vec![0.0];
        right(&[1.0], &mut y);
        (vec![y[0].abs()], vec![1.0], vec![1.0])
    } else {
        let opts = ArnoldiOpts {
            k: 3.min(n),
            krylov: 40.min(n),
            tol: 1e-12,
            max_restarts: 500,
            seed: 7,
        };
        let rr = arnoldi(n, right, opts, Some(&ident))?;
        let ll = arnoldi(n, left, ArnoldiOpts { k: 1, ..opts }, Some(&ident))?;
        let vals = rr.values.iter().map(|v| v.norm()).collect();
        (vals, rr.real_vector(0), ll.real_vector(0))
    };
    let sym = |v: &[f64]| -> Mat<f64> {
        let m = Mat::from_fn(bond, bond, |a, b| 0.5 * (v[a * bond + b] + v[b * bond + a]));
        let tr: f64 = (0..bond).map(|i| m[(i, i)]).sum();
        if tr < 0.0 {
            -m
        } else {
            m
        }
    };
    let (rm, lm) = (sym(&rvec), sym(&lvec));
    let psd_sqrt = |m: &Mat<f64>| -> Result<Mat<f64>> {
        let (w, v) = linalg::eigh(m)?;
        Ok(Mat::from_fn(bond, bond, |i, j| v[(i, j)] * w[j].max(0.0).sqrt()))
    };
    let x = psd_sqrt(&rm)?;
    let y = psd_sqrt(&lm)?;
    let (_, s, _) = linalg::svd(&(y.transpose() * &x))?;
    let ns = s.iter().map(|a| a * a).sum::<f64>().sqrt();
    let schmidt: Vec<f64> = s.iter().map(|a| a / ns).filter(|&a| a > 1e-15).collect();
    let flat = |m: &Mat<f64>| -> Vec<f64> { (0..n).map(|i| m[(i / bond, i % bond)]).collect() };
    Ok(UniformMPS {
        chi,
        d,
        bond,
        right_env: flat(&rm),
        left_env: flat(&lm),
        cell,
        tensors,
        transfer_spectrum: rvals,
        schmidt,
        iterations,
        converged,
        residual,
    })
}

/// `S = −Σ_a λ_a² ln λ_a²` over the Schmidt spectrum.
pub fn entanglement_entropy(psi: &UniformMPS) -> f64 {
    schmidt_entropy(&psi.schmidt)
}

/// von Neumann entropy of a normalized Schmidt spectrum.
pub fn schmidt_entropy(schmidt: &[f64]) -> f64 {
    -schmidt
        .iter()
        .map(|s| s * s)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Correlation length per site from the cell transfer map,
/// `ξ = −2 / ln(|μ_2| / |μ_1|)`; zero for a product state and infinite when
/// the leading pair is degenerate.
pub fn mps_correlation_length(psi: &UniformMPS) -> f64 {
    match psi.transfer_spectrum.as_slice() {
        [m0, m1, ..] if *m1 > 1e-14 * m0 => {
            let r = m1 / m0;
            if (1.0 - r).abs() <= 1e-8 {
                f64::INFINITY
            } else {
                -2.0 / r.ln()
            }
        }
        _ => 0.0,
    }
}

/// `⟨O_0 O_r⟩` along the boundary state for even `r`, where `O` is the sign
/// of the masked flavors.
pub fn row_correlator(psi: &UniformMPS, mask: u8, r: usize) -> Result<f64> {
    if r % 2 == 1 {
        return Err(Error::Invalid("row correlator needs an even separation".into()));
    }
    let (bond, d) = (psi.bond, psi.d);
    let d2 = d * d;
    let sign = |s: usize| if (s as u8 & mask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    let cell_plain = Mat::from_fn(bond * d2, bond, |row, c| psi.cell[row * bond + c]);
    let cell_odd = Mat::from_fn(bond * d2, bond, |row, c| {
        psi.cell[row * bond + c] * sign((row % d2) / d)
    });
    let step = |env: &Mat<f64>, c: &Mat<f64>| -> Mat<f64> {
        // E_L(L)[c, c′] = Σ L[a, a′] C[a, σ, c] C[a′, σ, c′]
        let cm2 = Mat::from_fn(bond, d2 * bond, |a, col| c[(a * d2 + col / bond, col % bond)]);
        let t2 = env.transpose() * &cm2;
        let t2r = Mat::from_fn(bond * d2, bond, |row, cc| t2[(row / d2, (row % d2) * bond + cc)]);
        t2r.transpose() * c
    };
    let l0 = linalg::mat_from_row_major(bond, bond, &psi.left_env);
    let r0 = linalg::mat_from_row_major(bond, bond, &psi.right_env);
    let mu = psi.transfer_spectrum[0];
    let pair = |e: &Mat<f64>| -> f64 {
        (0..bond).flat_map(|a| (0..bond).map(move |b| (a, b))).map(|(a, b)| e[(a, b)] * r0[(a, b)]).sum()
    };
    let norm = pair(&l0);
    let mut env = l0;
    let cells = r / 2 + 1;
    for k in 0..cells {
        let insert = k == 0 || k == cells - 1;
        env = if insert && cells > 1 {
            step(&env, &cell_odd)
        } else {
            step(&env, &cell_plain)
        };
        env = env * faer::Scale(1.0 / mu);
    }
    Ok(pair(&env) / norm)
}

/// Per-site `ln λ` from the Rayleigh quotient of the symmetric row operator
/// `D_l V D_r` in the boundary state. The negative is the reduced free
/// energy density.
pub fn log_eigenvalue_per_site(psi: &UniformMPS, weights: &[f64]) -> Result<f64> {
    let d = psi.d;
    let dl: Vec<f64> = weights.iter().map(|w| w.signum() * w.abs().sqrt()).collect();
    let dr: Vec<f64> = weights.iter().map(|w| w.abs().sqrt()).collect();
    // Site tensors in the symmetric gauge.
    let cell = &psi.tensors;
    let (c0, c1) = cell.dims(0);
    let (_, c2) = cell.dims(1);
    let site0: Vec<f64> = (0..c0 * d * c1).map(|i| cell.gamma[0][i] * cell.lambda[0][i % c1]).collect();
    let site1: Vec<f64> = (0..c1 * d * c2).map(|i| cell.gamma[1][i] * cell.lambda[1][i % c2]).collect();
    // State X[a, s, s′, b]: a on the lower copy, b on the upper copy.
    let step = |x: &[f64], ca: usize, a_t: &[f64], cn: usize| -> Vec<f64> {
        let mut y = vec![0.0; ca * d * d * ca];
        for a in 0..ca {
            for s0 in 0..d {
                for s0p in 0..d {
                    let src = &x[((a * d + s0) * d + s0p) * ca..((a * d + s0) * d + s0p + 1) * ca];
                    for s in 0..d {
                        for sp in 0..d {
                            let f = dr[s0 * d + s] * dl[s0p * d + sp] * weights[s * d + sp];
                            if f == 0.0 {
                                continue;
                            }
                            let dst = &mut y[((a * d + s) * d + sp) * ca..((a * d + s) * d + sp + 1) * ca];
                            dst.iter_mut().zip(src).for_each(|(o, v)| *o += f * v);
                        }
                    }
                }
            }
        }
        // Z[a′, s, s′, b] = Σ_a A[a, s, a′] Y[a, s, s′, b]
        let mut z = vec![0.0; cn * d * d * ca];
        for s in 0..d {
            let am = Mat::from_fn(cn, ca, |ap, a| a_t[(a * d + s) * cn + ap]);
            let ym = Mat::from_fn(ca, d * ca, |a, col| y[((a * d + s) * d) * ca + col]);
            let zm = &am * &ym;
            for ap in 0..cn {
                for col in 0..d * ca {
                    z[((ap * d + s) * d) * ca + col] = zm[(ap, col)];
                }
            }
        }
        // X′[a′, s, s′, b′] = Σ_b Z[a′, s, s′, b] A[b, s′, b′]
        let mut out = vec![0.0; cn * d * d * cn];
        for sp in 0..d {
            let zm = Mat::from_fn(cn * d, ca, |row, b| z[((row / d * d + row % d) * d + sp) * ca + b]);
            let am = Mat::from_fn(ca, cn, |b, bp| a_t[(b * d + sp) * cn + bp]);
            let om = &zm * &am;
            for row in 0..cn * d {
                for bp in 0..cn {
                    out[((row / d * d + row % d) * d + sp) * cn + bp] = om[(row, bp)];
                }
            }
        }
        out
    };
    let n = c0 * d * d * c0;
    let op = |x: &[f64], y: &mut [f64]| {
        let mid = step(x, c0, &site0, c1);
        let end = step(&mid, c1, &site1, c2);
        y.copy_from_slice(&end);
    };
    let eta = if n == 1 {
        let mut y = vec![0.0];
        op(&[1.0], &mut y);
        y[0]
    } else {
        let start: Vec<f64> = (0..n)
            .map(|i| {
                let a = i / (d * d * c0);
                let b = i % c0;
                if a == b {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let r = arnoldi(
            n,
            op,
            ArnoldiOpts {
                k: 1,
                krylov: 20.min(n),
                tol: 1e-11,
                max_restarts: 200,
                seed: 11,
            },
            Some(&start),
        )?;
        r.values[0].norm()
    };
    Ok(0.5 * (eta / psi.transfer_spectrum[0]).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{selfdual_couplings, ATCouplings};
    use crate::statmech::{at_model, ising_model};

    /// `ln Z / N` of the square-lattice Ising model from the double
    /// integral, by the midpoint rule.
    fn onsager_log_z(k: f64) -> f64 {
        let n = 400;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let (c2, s2) = ((2.0 * k).cosh(), (2.0 * k).sinh());
        let mut acc = 0.0;
        for i in 0..n {
            let t1 = (i as f64 + 0.5) * h;
            for j in 0..n {
                let t2 = (j as f64 + 0.5) * h;
                acc += (c2 * c2 - s2 * (t1.cos() + t2.cos())).ln();
            }
        }
        2f64.ln() + 0.5 * acc / (n * n) as f64
    }

    #[test]
    fn product_model_is_trivial() {
        let mpo = build_row_mpo(&at_model(ATCouplings::finite(0.0, 0.0)).unwrap()).unwrap();
        let psi = fixed_point_mps(&mpo, 8, MpsOptions::default()).unwrap();
        assert_eq!(psi.bond, 1);
        assert!(entanglement_entropy(&psi).abs() < 1e-14);
        assert_eq!(mps_correlation_length(&psi), 0.0);
        let f = log_eigenvalue_per_site(&psi, mpo.weights()).unwrap();
        assert!((f - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ising_free_energy_off_criticality() {
        let kc = 0.5 * (1.0 + 2f64.sqrt()).ln();
        let k = 0.9 * kc;
        let mpo = build_row_mpo(&ising_model(k).unwrap()).unwrap();
        let psi = fixed_point_mps(&mpo, 16, MpsOptions::default()).unwrap();
        assert!(psi.converged);
        let f = log_eigenvalue_per_site(&psi, mpo.weights()).unwrap();
        assert!((f - onsager_log_z(k)).abs() < 1e-6, "{f} vs {}", onsager_log_z(k));
    }

    #[test]
    fn gauge_and_entropy_bounds() {
        let mpo = build_row_mpo(&at_model(selfdual_couplings(0.3).unwrap()).unwrap()).unwrap();
        for chi in [4, 8] {
            let psi = fixed_point_mps(&mpo, chi, MpsOptions::default()).unwrap();
            let s = &psi.schmidt;
            assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|&x| x > 0.0));
            assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(entanglement_entropy(&psi) <= (chi as f64).ln() + 1e-12);
            let g0 = row_correlator(&psi, 3, 0).unwrap();
            assert!((g0 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gapped_free_energy_converges_in_chi() {
        let mpo = build_row_mpo(&at_model(selfdual_couplings(0.3).unwrap()).unwrap()).unwrap();
        let f = |chi| {
            let psi = fixed_point_mps(&mpo, chi, MpsOptions::default()).unwrap();
            log_eigenvalue_per_site(&psi, mpo.weights()).unwrap()
        };
        let (a, b) = (f(16), f(32));
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        assert!(b >= a - 1e-10);
    }

    #[test]
    fn entropy_of_equal_pair() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((schmidt_entropy(&[h, h]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(schmidt_entropy(&[1.0]), 0.0);
    }
}

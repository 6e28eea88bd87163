//! Row-to-row transfer operators on periodic cylinders.
//!
//! A row configuration is the integer `c = Σ_x σ_x d^x` with `d = 2^n`.
//! Horizontal bonds `(x, x+1)` live inside a row; vertical bonds join row
//! `y` to row `y + 1` and use `W(lower, upper)`. The operator is
//! `T = D_l V D_r` with `D_l = sgn(H)|H|^{1/2}` and `D_r = |H|^{1/2}`, where
//! `H(c)` is the product of horizontal weights of the row. For nonnegative
//! symmetric tables `T` is a real symmetric matrix.

pub mod brute;
pub mod observables;

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, arnoldi, ArnoldiOpts};
use crate::statmech::StatMechModel;

pub use brute::{brute_partition, torus_log_partition, torus_row_correlators, BruteResult};
pub use observables::{
    disorder_parameter, evaluate, fit_decay, fixed_point, two_point_order, DecayFit, Direction, FixedPoint,
    PLATEAU_RATE,
};

/// Largest row state space handled.
pub const STATE_CAP: usize = 1 << 24;
/// Largest dimension that may be materialized densely.
pub const DENSE_CAP: usize = 4096;
/// Relative gap below which the leading pair counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rep {
    Dense,
    MatrixFree,
}

/// Per-bond flavor masks for one row: `h[x]` on bond `(x, x+1)` inside the
/// row, `v[x]` on the vertical bond above site `x`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RowMasks {
    pub h: Vec<u8>,
    pub v: Vec<u8>,
}

impl RowMasks {
    pub fn clean(lx: usize) -> Self {
        Self {
            h: vec![0; lx],
            v: vec![0; lx],
        }
    }

    pub fn is_clean(&self) -> bool {
        self.h.iter().chain(&self.v).all(|&m| m == 0)
    }
}

/// Transfer operator of a translation-invariant model on a width-`lx`
/// cylinder. Disorder masks stored in the model are ignored here; seams are
/// passed explicitly to the row-step functions.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    pub model: StatMechModel,
    pub lx: usize,
    pub dim: usize,
    pub rep: Rep,
    /// `T` is a symmetric matrix (symmetric nonnegative table).
    pub symmetric: bool,
    /// `H(c)` for every row configuration.
    hrow: Vec<f64>,
    dense: Option<Mat<f64>>,
}

fn pow_checked(d: usize, lx: usize) -> Option<usize> {
    let mut out = 1usize;
    for _ in 0..lx {
        out = out.checked_mul(d)?;
        if out > STATE_CAP {
            return None;
        }
    }
    Some(out)
}

/// Builds the transfer operator. `rep = None` picks dense below
/// [`DENSE_CAP`] and matrix-free above.
pub fn build_transfer(m: &StatMechModel, lx: usize, rep: Option<Rep>) -> Result<TransferOperator> {
    if lx == 0 {
        return Err(Error::Geometry("cylinder width must be positive".into()));
    }
    let dim = pow_checked(m.d(), lx).ok_or_else(|| {
        Error::Size(format!(
            "row space {}^{lx} exceeds the cap of 2^24 states",
            m.d()
        ))
    })?;
    let rep = rep.unwrap_or(if dim <= DENSE_CAP { Rep::Dense } else { Rep::MatrixFree });
    if rep == Rep::Dense && dim > DENSE_CAP {
        return Err(Error::Size(format!("dense transfer of dimension {dim} above {DENSE_CAP}")));
    }
    let mut model = m.clone();
    model.eta.clear();
    let symmetric = model.is_symmetric() && !model.sign_indefinite;
    let mut t = TransferOperator {
        hrow: Vec::new(),
        model,
        lx,
        dim,
        rep,
        symmetric,
        dense: None,
    };
    t.hrow = t.row_weights(&RowMasks::clean(lx).h);
    if rep == Rep::Dense {
        let mut mat = Mat::<f64>::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            t.apply_free(&e, &mut col);
            e[j] = 0.0;
            for i in 0..dim {
                mat[(i, j)] = col[i];
            }
        }
        t.dense = Some(mat);
    }
    Ok(t)
}

impl TransferOperator {
    pub fn d(&self) -> usize {
        self.model.d()
    }

    /// Local state of site `x` in row configuration `c`.
    #[inline]
    pub fn site(&self, c: usize, x: usize) -> usize {
        c / self.d().pow(x as u32) % self.d()
    }

    /// Horizontal row weight `H(c)` with optional bond masks.
    pub fn row_weights(&self, hmask: &[u8]) -> Vec<f64> {
        let (d, lx) = (self.d(), self.lx);
        let mut digits = vec![0usize; lx];
        (0..self.dim)
            .map(|c| {
                let mut r = c;
                for dg in digits.iter_mut() {
                    *dg = r % d;
                    r /= d;
                }
                (0..lx)
                    .map(|x| {
                        let b = digits[(x + 1) % lx] ^ hmask[x] as usize;
                        self.model.w(digits[x], b)
                    })
                    .product()
            })
            .collect()
    }

    pub fn clean_row_weights(&self) -> &[f64] {
        &self.hrow
    }

    /// Vertical bonds: `out(c′) = Σ_c Π_x W(c_x, c′_x ⊕ v_x) v(c)`, applied
    /// one site at a time. With `transpose` the table is transposed.
    pub fn apply_vertical(&self, input: &[f64], out: &mut [f64], vmask: &[u8], transpose: bool) {
        let d = self.d();
        let mut src = input.to_vec();
        let mut stride = 1usize;
        for x in 0..self.lx {
            let m = vmask[x] as usize;
            let table: Vec<f64> = (0..d * d)
                .map(|ab| {
                    let (a, b) = (ab / d, ab % d);
                    if transpose {
                        self.model.w(b, a ^ m)
                    } else {
                        self.model.w(a, b ^ m)
                    }
                })
                .collect();
            let block = stride * d;
            for (blk, chunk) in out.chunks_mut(block).enumerate() {
                let base = blk * block;
                for b in 0..d {
                    for i in 0..stride {
                        let mut acc = 0.0;
                        for a in 0..d {
                            acc += table[a * d + b] * src[base + a * stride + i];
                        }
                        chunk[b * stride + i] = acc;
                    }
                }
            }
            src.copy_from_slice(out);
            stride = block;
        }
    }

    fn apply_free(&self, v: &[f64], out: &mut [f64]) {
        let tmp: Vec<f64> = v.iter().zip(&self.hrow).map(|(a, h)| a * h.abs().sqrt()).collect();
        self.apply_vertical(&tmp, out, &vec![0; self.lx], false);
        for (o, h) in out.iter_mut().zip(&self.hrow) {
            *o *= h.signum() * h.abs().sqrt();
        }
    }

    /// `out = T v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        match &self.dense {
            Some(m) => dense_matvec(m, v, out, false),
            None => self.apply_free(v, out),
        }
    }

    /// `out = Tᵀ v`.
    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        if let Some(m) = &self.dense {
            return dense_matvec(m, v, out, true);
        }
        let tmp: Vec<f64> = v
            .iter()
            .zip(&self.hrow)
            .map(|(a, h)| a * h.signum() * h.abs().sqrt())
            .collect();
        self.apply_vertical(&tmp, out, &vec![0; self.lx], true);
        for (o, h) in out.iter_mut().zip(&self.hrow) {
            *o *= h.abs().sqrt();
        }
    }

    /// Unsplit row step `out = H̃ ∘ (Ṽ v)` with explicit masks.
    pub fn row_step(&self, v: &[f64], out: &mut [f64], masks: &RowMasks) {
        self.apply_vertical(v, out, &masks.v, false);
        if masks.h.iter().all(|&m| m == 0) {
            out.iter_mut().zip(&self.hrow).for_each(|(o, h)| *o *= h);
        } else {
            let h = self.row_weights(&masks.h);
            out.iter_mut().zip(&h).for_each(|(o, h)| *o *= h);
        }
    }

    pub fn dense_matrix(&self) -> Option<&Mat<f64>> {
        self.dense.as_ref()
    }
}

fn dense_matvec(m: &Mat<f64>, v: &[f64], out: &mut [f64], transpose: bool) {
    let n = m.nrows();
    if transpose {
        for j in 0..n {
            out[j] = (0..n).map(|i| m[(i, j)] * v[i]).sum();
        }
    } else {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..n {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            let col = m.col(j);
            for i in 0..n {
                out[i] += col[i] * vj;
            }
        }
    }
}

/// Leading eigenvalues by magnitude.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub values: Vec<Complex64>,
    /// `degenerate[i]`: `|λ_i|` and `|λ_{i+1}|` agree to [`DEGENERACY_TOL`].
    pub degenerate: Vec<bool>,
    pub residual: f64,
}

/// Top-`k` eigenvalues (`k ≤ 8`) by magnitude.
pub fn dominant_spectrum(t: &TransferOperator, k: usize) -> Result<SpectrumResult> {
    if k == 0 || k > 8 {
        return Err(Error::Invalid(format!("requested {k} eigenvalues; allowed 1..=8")));
    }
    let k = k.min(t.dim);
    let (mut values, residual) = match (&t.dense, t.symmetric) {
        (Some(m), true) if t.dim <= 2048 => {
            let (vals, _) = linalg::eigh(m)?;
            (vals.into_iter().map(|v| Complex64::new(v, 0.0)).collect::<Vec<_>>(), 0.0)
        }
        (Some(m), false) if t.dim <= 1024 => (linalg::eigvals(m)?, 0.0),
        _ => {
            let r = arnoldi(
                t.dim,
                |x, y| t.apply(x, y),
                ArnoldiOpts {
                    k: (k + 2).min(t.dim),
                    krylov: 40.max(2 * k + 8),
                    ..Default::default()
                },
                None,
            )?;
            let res = r.residuals.iter().take(k).cloned().fold(0.0, f64::max);
            (r.values, res)
        }
    };
    values.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
    values.truncate(k);
    let degenerate = values
        .windows(2)
        .map(|w| (w[0].norm() - w[1].norm()).abs() <= DEGENERACY_TOL * w[0].norm())
        .collect();
    Ok(SpectrumResult {
        values,
        degenerate,
        residual,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationLength {
    pub xi: f64,
    /// Leading pair degenerate within tolerance; `xi` is then infinite.
    pub degenerate: bool,
}

/// `ξ = 1 / ln(λ0/|λ1|)`, zero when `λ1 = 0`.
pub fn correlation_length(t: &TransferOperator) -> Result<CorrelationLength> {
    if t.dim == 1 {
        return Ok(CorrelationLength { xi: 0.0, degenerate: false });
    }
    let s = dominant_spectrum(t, 2)?;
    Ok(xi_from(s.values[0].norm(), s.values[1].norm()))
}

pub(crate) fn xi_from(l0: f64, l1: f64) -> CorrelationLength {
    if l1 <= 1e-14 * l0 {
        return CorrelationLength { xi: 0.0, degenerate: false };
    }
    if (l0 - l1).abs() <= DEGENERACY_TOL * l0 {
        return CorrelationLength {
            xi: f64::INFINITY,
            degenerate: true,
        };
    }
    CorrelationLength {
        xi: 1.0 / (l0 / l1).ln(),
        degenerate: false,
    }
}

/// Global flavor-flip masks `m` with `W(a ⊕ m, b ⊕ m) = W(a, b)`.
pub fn flip_symmetries(m: &StatMechModel) -> Vec<usize> {
    let d = m.d();
    (0..d)
        .filter(|&g| {
            (0..d).all(|a| (0..d).all(|b| (m.w(a ^ g, b ^ g) - m.w(a, b)).abs() <= 1e-14 * m.w(a, b).abs().max(1.0)))
        })
        .collect()
}

/// Correlation length from the gap inside the sector that is even under
/// every global flip symmetry, the sector holding the dominant eigenvector.
///
/// In a symmetry-broken phase the full-spectrum `ξ` is set by the
/// exponentially small splitting of the leading pair; the sector gap gives
/// the decay of connected correlations instead.
pub fn sector_correlation_length(t: &TransferOperator) -> Result<CorrelationLength> {
    if !t.model.eta.is_empty() {
        return Err(Error::Invalid("sector decomposition needs a seam-free model".into()));
    }
    let d = t.d();
    let group: Vec<usize> = flip_symmetries(&t.model)
        .into_iter()
        .map(|g| (0..t.lx).map(|x| g * d.pow(x as u32)).sum())
        .collect();
    // Orbit representatives in increasing order and each configuration's orbit.
    let mut orbit = vec![usize::MAX; t.dim];
    let mut sizes = Vec::new();
    for c in 0..t.dim {
        if orbit[c] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut members: Vec<usize> = group.iter().map(|&g| c ^ g).collect();
        members.sort_unstable();
        members.dedup();
        for &e in &members {
            orbit[e] = id;
        }
        sizes.push(members.len() as f64);
    }
    let n = sizes.len();
    if n == 1 {
        return Ok(CorrelationLength { xi: 0.0, degenerate: false });
    }
    let mut full = vec![0.0; t.dim];
    let mut image = vec![0.0; t.dim];
    let mut reduced = |x: &[f64], y: &mut [f64]| {
        for c in 0..t.dim {
            full[c] = x[orbit[c]] / sizes[orbit[c]].sqrt();
        }
        t.apply(&full, &mut image);
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..t.dim {
            y[orbit[c]] += image[c];
        }
        for (v, s) in y.iter_mut().zip(&sizes) {
            *v /= s.sqrt();
        }
    };
    let mut values = if n <= 1024 {
        let mut dense = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            reduced(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                dense[i * n + j] = col[i];
            }
        }
        linalg::eigvals(&linalg::mat_from_row_major(n, n, &dense))?
    } else {
        arnoldi(
            n,
            reduced,
            ArnoldiOpts {
                k: 4,
                ..Default::default()
            },
            None,
        )?
        .values
    };
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(xi_from(values[0].norm(), values[1].norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{selfdual_couplings, ATCouplings};
    use crate::statmech::{at_model, coupled_model, ising_model};

    /// Largest eigenvalue of the width-`n` periodic Ising transfer matrix
    /// `exp(K Σ σσ′ + K Σ σσ_{+1})`, from the free-fermion solution.
    fn onsager_lambda0(k: f64, n: usize) -> f64 {
        let kstar = (-(2.0 * k)).exp().atanh();
        let mut s = 0.0;
        for j in 0..n {
            let q = std::f64::consts::PI * (2 * j + 1) as f64 / n as f64;
            let ch = (2.0 * kstar).cosh() * (2.0 * k).cosh() - (2.0 * kstar).sinh() * (2.0 * k).sinh() * q.cos();
            s += ch.acosh();
        }
        (2.0 * (2.0 * k).sinh()).powf(n as f64 / 2.0) * (0.5 * s).exp()
    }

    #[test]
    fn uniform_weights() {
        let m = at_model(ATCouplings::finite(0.0, 0.0)).unwrap();
        let t = build_transfer(&m, 2, None).unwrap();
        let mat = t.dense_matrix().unwrap();
        assert!((0..16).all(|i| (0..16).all(|j| mat[(i, j)] == 1.0)));
        let s = dominant_spectrum(&t, 2).unwrap();
        assert!((s.values[0].re - 16.0).abs() < 1e-12);
        assert!(s.values[1].norm() < 1e-12);
        assert_eq!(correlation_length(&t).unwrap().xi, 0.0);
    }

    #[test]
    fn ising_width_four_matches_free_fermions() {
        let kc = 0.5 * (1.0 + 2f64.sqrt()).ln();
        for &k in &[kc, 0.2, 0.6] {
            let t = build_transfer(&ising_model(k).unwrap(), 4, None).unwrap();
            let s = dominant_spectrum(&t, 1).unwrap();
            let expect = onsager_lambda0(k, 4);
            assert!((s.values[0].re / expect - 1.0).abs() < 1e-12, "K={k}");
        }
    }

    #[test]
    fn dense_and_matrix_free_agree() {
        let m = coupled_model(0.3, 0.2).unwrap();
        let a = build_transfer(&m, 2, Some(Rep::Dense)).unwrap();
        let b = build_transfer(&m, 2, Some(Rep::MatrixFree)).unwrap();
        let v = linalg::random_unit(256, 3);
        let (mut x, mut y) = (vec![0.0; 256], vec![0.0; 256]);
        a.apply(&v, &mut x);
        b.apply(&v, &mut y);
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-12 * scale));
        a.apply_transpose(&v, &mut x);
        b.apply_transpose(&v, &mut y);
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-12 * scale));
        let sa = dominant_spectrum(&a, 3).unwrap();
        let sb = dominant_spectrum(&b, 3).unwrap();
        for i in 0..3 {
            assert!((sa.values[i].norm() - sb.values[i].norm()).abs() < 1e-9 * sa.values[0].norm());
        }
    }

    #[test]
    fn one_row_sum() {
        // Σ_{c,c′} T(c′,c) over the split form equals the sum with one full
        // row weight when H is uniform; check the generic identity
        // 1ᵀ (H V 1) = Σ_c H(c) Σ_c′ V(c′, c).
        let m = at_model(selfdual_couplings(0.3).unwrap()).unwrap();
        let t = build_transfer(&m, 3, None).unwrap();
        let ones = vec![1.0; t.dim];
        let mut out = vec![0.0; t.dim];
        t.row_step(&ones, &mut out, &RowMasks::clean(3));
        let total: f64 = out.iter().sum();
        let vsum: f64 = (0..4).map(|b| m.w(0, b)).sum::<f64>().powi(3);
        let hsum: f64 = t.clean_row_weights().iter().sum();
        assert!((total - hsum * vsum).abs() < 1e-10 * total);
    }

    #[test]
    fn perron_frobenius() {
        let m = at_model(selfdual_couplings(0.3).unwrap()).unwrap();
        let t = build_transfer(&m, 4, None).unwrap();
        let s = dominant_spectrum(&t, 4).unwrap();
        assert!(s.values[0].re > 0.0 && s.values[0].im == 0.0);
        assert!(s.values[1].norm() < s.values[0].norm());
        let (_, vecs) = linalg::eigh(t.dense_matrix().unwrap()).unwrap();
        let top: Vec<f64> = (0..t.dim).map(|i| vecs[(i, t.dim - 1)]).collect();
        assert!(top.iter().all(|&x| x > 0.0) || top.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn xi_grows_toward_half() {
        let xi = |p: f64, lx: usize| {
            let m = at_model(selfdual_couplings(p).unwrap()).unwrap();
            correlation_length(&build_transfer(&m, lx, None).unwrap()).unwrap().xi
        };
        let (a, b, c) = (xi(0.49, 4), xi(0.49, 5), xi(0.49, 6));
        assert!(a < b && b < c);
    }

    #[test]
    fn weak_coupling_is_short_ranged() {
        let t = build_transfer(&ising_model(0.1).unwrap(), 4, None).unwrap();
        assert!(correlation_length(&t).unwrap().xi < 1.0);
    }

    #[test]
    fn sector_gap_removes_the_ordering_doublet() {
        // Ordered Ising: the full gap closes with width, the sector gap
        // stays finite and matches brute-force diagonalization.
        let m = ising_model(0.6).unwrap();
        assert_eq!(flip_symmetries(&m), vec![0, 1]);
        let t = build_transfer(&m, 6, None).unwrap();
        let full = correlation_length(&t).unwrap().xi;
        let sector = sector_correlation_length(&t).unwrap().xi;
        assert!(full > 20.0 && sector < 2.0, "{full} {sector}");
        let n = t.dim;
        let flip = n - 1;
        let mut cols = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for (j, c) in cols.iter_mut().enumerate() {
            e[j] = 1.0;
            t.apply(&e, c);
            e[j] = 0.0;
        }
        let sym: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                0.5 * (cols[j][i] + cols[j ^ flip][i])
            })
            .collect();
        let mut ev = linalg::eigvals(&linalg::mat_from_row_major(n, n, &sym)).unwrap();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        let expect = xi_from(ev[0].norm(), ev[1].norm()).xi;
        assert!((expect - sector).abs() < 1e-9 * expect);
        // In the disordered phase the sector gap is the shorter length.
        let t = build_transfer(&ising_model(0.2).unwrap(), 6, None).unwrap();
        assert!(sector_correlation_length(&t).unwrap().xi < correlation_length(&t).unwrap().xi);
    }

    #[test]
    fn state_cap() {
        let m = coupled_model(0.3, 0.2).unwrap();
        assert!(build_transfer(&m, 7, None).is_err());
        assert!(build_transfer(&m, 3, Some(Rep::Dense)).is_ok());
        assert!(build_transfer(&m, 4, Some(Rep::Dense)).is_err());
    }
}

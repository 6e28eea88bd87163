//! Row transfer operator as a translation-invariant matrix product operator.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg;
use crate::statmech::StatMechModel;

/// Cut-off on singular values of the weight table, relative to the largest.
pub const RANK_CUTOFF: f64 = 1e-13;

/// Local tensor `M[l, r, ket, bra]` of the row step `A = H ∘ V`.
///
/// The horizontal table is factorized as `W(σ, σ′) = Σ_k A_k(σ) B_k(σ′)`;
/// site `x` carries `B_l(ket)` on its left leg, `A_r(ket)` on its right leg
/// and the vertical weight `W(bra, ket)` between rows.
#[derive(Debug, Clone)]
pub struct RowMPO {
    pub model: StatMechModel,
    /// MPO bond dimension (numerical rank of the table).
    pub bond: usize,
    pub d: usize,
    /// Row-major `(bond, bond, d, d)`.
    pub tensor: Vec<f64>,
}

impl RowMPO {
    #[inline]
    pub fn at(&self, l: usize, r: usize, ket: usize, bra: usize) -> f64 {
        let (b, d) = (self.bond, self.d);
        self.tensor[((l * b + r) * d + ket) * d + bra]
    }

    /// Weight table in row-major order.
    pub fn weights(&self) -> &[f64] {
        &self.model.weights
    }

    /// Dense ring of `lx` tensors, `R(c′, c) = tr Π_x M[·, ·, c′_x, c_x]`,
    /// row-major in `(c′, c)` with the same site encoding as the transfer
    /// engine.
    pub fn ring(&self, lx: usize) -> Result<Vec<f64>> {
        let d = self.d;
        let dim = d
            .checked_pow(lx as u32)
            .filter(|&n| n <= 4096)
            .ok_or_else(|| Error::Size(format!("ring of width {lx} too large to materialize")))?;
        let b = self.bond;
        let mut out = vec![0.0; dim * dim];
        let digit = |c: usize, x: usize| c / d.pow(x as u32) % d;
        for cp in 0..dim {
            for c in 0..dim {
                let mut acc = Mat::<f64>::identity(b, b);
                for x in 0..lx {
                    let m = Mat::from_fn(b, b, |l, r| self.at(l, r, digit(cp, x), digit(c, x)));
                    acc = &acc * &m;
                }
                out[cp * dim + c] = (0..b).map(|i| acc[(i, i)]).sum();
            }
        }
        Ok(out)
    }
}

/// Rank factorization of the weight table and the resulting vertex tensor.
pub fn build_row_mpo(m: &StatMechModel) -> Result<RowMPO> {
    if !m.eta.is_empty() {
        return Err(Error::Invalid("row MPO needs a translation-invariant model".into()));
    }
    let d = m.d();
    let w = linalg::mat_from_row_major(d, d, &m.weights);
    let (u, s, v) = linalg::svd(&w)?;
    let s0 = s.first().copied().unwrap_or(0.0);
    if s0 == 0.0 {
        return Err(Error::Degenerate("weight table is identically zero".into()));
    }
    let rank = s.iter().take_while(|&&x| x > RANK_CUTOFF * s0).count();
    let a = |k: usize, sigma: usize| u[(sigma, k)] * s[k].sqrt();
    let bf = |k: usize, sigma: usize| v[(sigma, k)] * s[k].sqrt();
    let mut tensor = vec![0.0; rank * rank * d * d];
    for l in 0..rank {
        for r in 0..rank {
            for ket in 0..d {
                let lr = bf(l, ket) * a(r, ket);
                for bra in 0..d {
                    tensor[((l * rank + r) * d + ket) * d + bra] = lr * m.w(bra, ket);
                }
            }
        }
    }
    Ok(RowMPO {
        model: m.clone(),
        bond: rank,
        d,
        tensor,
    })
}

//! Dense toric-code states on tiny tori and the channel moments built on
//! them.
//!
//! Basis index bit `e` is the `Z` eigenvalue of edge `e` (bit set means −1).
//! The ground state is the uniform superposition over the closed X-loop
//! group generated by plaquettes: `|Ψ0⟩ ∝ Σ_g g|0⟩`.

use serde::Serialize;
use std::collections::BTreeSet;
use std::f64::consts::SQRT_2;

use super::lattice::TorusLattice;
use crate::couplings::check_p;
use crate::error::{Error, Result};
use crate::statmech::model::omega;

/// Largest number of edges for dense state vectors.
pub const STATE_EDGE_CAP: usize = 8;

fn check_size(lat: &TorusLattice) -> Result<()> {
    if lat.n_edges() > STATE_EDGE_CAP {
        return Err(Error::Size(format!(
            "{} edges exceed the dense state cap of {STATE_EDGE_CAP}",
            lat.n_edges()
        )));
    }
    Ok(())
}

fn plaquette_mask(lat: &TorusLattice, x: usize, y: usize) -> usize {
    lat.plaquette(x as isize, y as isize)
        .iter()
        .fold(0usize, |m, &e| m ^ (1 << e))
}

/// Flip masks of every element of the plaquette X-loop group.
pub fn loop_group(lat: &TorusLattice) -> Result<Vec<usize>> {
    check_size(lat)?;
    let masks: Vec<usize> = (0..lat.ly)
        .flat_map(|y| (0..lat.lx).map(move |x| (x, y)))
        .map(|(x, y)| plaquette_mask(lat, x, y))
        .collect();
    let mut group = BTreeSet::new();
    for subset in 0..(1usize << masks.len()) {
        let g = masks
            .iter()
            .enumerate()
            .filter(|(i, _)| subset >> i & 1 == 1)
            .fold(0, |acc, (_, m)| acc ^ m);
        group.insert(g);
    }
    Ok(group.into_iter().collect())
}

/// Normalized `|Ψ0⟩` as a real dense vector of length `2^{n_edges}`.
pub fn ground_state(lat: &TorusLattice) -> Result<Vec<f64>> {
    let group = loop_group(lat)?;
    let mut v = vec![0.0; 1 << lat.n_edges()];
    let amp = 1.0 / (group.len() as f64).sqrt();
    for g in group {
        v[g] = amp;
    }
    Ok(v)
}

/// Applies a real 2×2 matrix to edge `e` of a state vector.
fn apply_edge(v: &mut [f64], e: usize, m: [[f64; 2]; 2]) {
    let bit = 1usize << e;
    for i in 0..v.len() {
        if i & bit == 0 {
            let (a, b) = (v[i], v[i | bit]);
            v[i] = m[0][0] * a + m[0][1] * b;
            v[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

/// `σ = (Z + X)/√2` as a real matrix.
const SIGMA: [[f64; 2]; 2] = [
    [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
    [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
];

fn kraus(p: f64, sign: f64) -> [[f64; 2]; 2] {
    let (a, b) = ((1.0 - p).sqrt() / SQRT_2, sign * p.sqrt() / SQRT_2);
    [
        [a + b * SIGMA[0][0], b * SIGMA[0][1]],
        [b * SIGMA[1][0], a + b * SIGMA[1][1]],
    ]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Results of the sign-pattern decomposition of the decohered state.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexDecomposition {
    /// `P_m` indexed by the pattern bitmask (bit `e` set means `m_e = −1`).
    pub probabilities: Vec<f64>,
    /// `−ln Σ_m P_m²`.
    pub classical_renyi2: f64,
    /// `tr ρ²` computed by applying the channel to `ρ` directly.
    pub purity: f64,
    /// `P_m` from the spin-sum product formula.
    pub formula_probabilities: Vec<f64>,
    /// Largest off-diagonal `|⟨ψ_m′|ψ_m⟩|` and largest diagonal mismatch
    /// `|⟨ψ_m|ψ_m⟩ − P_m|`.
    pub max_offdiagonal_overlap: f64,
}

impl ConvexDecomposition {
    pub fn sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.probabilities.iter().map(|p| p * p).sum()
    }

    pub fn max_formula_error(&self) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.formula_probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Unnormalized branches `|ψ_m⟩ = Π_e K_{e,m_e}|Ψ0⟩` for every pattern.
pub fn branches(p: f64, lat: &TorusLattice) -> Result<Vec<Vec<f64>>> {
    check_p(p)?;
    let psi0 = ground_state(lat)?;
    let ne = lat.n_edges();
    let (kp, km) = (kraus(p, 1.0), kraus(p, -1.0));
    Ok((0..1usize << ne)
        .map(|m| {
            let mut v = psi0.clone();
            for e in 0..ne {
                apply_edge(&mut v, e, if m >> e & 1 == 1 { km } else { kp });
            }
            v
        })
        .collect())
}

/// Pairs of plaquettes sharing each edge.
fn edge_plaquettes(lat: &TorusLattice) -> Vec<(usize, usize)> {
    let mut owners = vec![Vec::with_capacity(2); lat.n_edges()];
    for y in 0..lat.ly {
        for x in 0..lat.lx {
            for e in lat.plaquette(x as isize, y as isize) {
                owners[e].push(y * lat.lx + x);
            }
        }
    }
    owners.into_iter().map(|o| (o[0], o[1])).collect()
}

/// `P_m = 2^{−N_e} Σ_{z,t} Π_e ω(a_e, b_e; m_e μ) / Σ_{z,t} Π_e ω(a_e, b_e; 0)`
/// with `μ = 2√(p(1−p))`, plaquette spins `z, t` and `a_e`, `b_e` their bond
/// products across edge `e`.
pub fn formula_probability(p: f64, lat: &TorusLattice, pattern: usize) -> Result<f64> {
    check_p(p)?;
    check_size(lat)?;
    let np = lat.n_plaquettes();
    let pairs = edge_plaquettes(lat);
    let mu = 2.0 * (p * (1.0 - p)).sqrt();
    let (mut num, mut den) = (0.0, 0.0);
    for z in 0..1usize << np {
        for t in 0..1usize << np {
            let (mut wn, mut wd) = (1.0, 1.0);
            for (e, &(i, j)) in pairs.iter().enumerate() {
                let a = if (z >> i ^ z >> j) & 1 == 1 { -1.0 } else { 1.0 };
                let b = if (t >> i ^ t >> j) & 1 == 1 { -1.0 } else { 1.0 };
                let m = if pattern >> e & 1 == 1 { -1.0 } else { 1.0 };
                wn *= omega(a, b, m * mu);
                wd *= omega(a, b, 0.0);
            }
            num += wn;
            den += wd;
        }
    }
    Ok(num / den / (1u64 << lat.n_edges()) as f64)
}

/// Dense density matrix of a real pure state.
fn projector(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut rho = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            rho[i * n + j] = v[i] * v[j];
        }
    }
    rho
}

/// `ρ → (1−p) ρ + p M ρ Mᵀ` on one edge, for a real symmetric single-qubit `M`.
fn edge_channel(rho: &mut [f64], n: usize, e: usize, p: f64, m: [[f64; 2]; 2]) {
    let mut conj = rho.to_vec();
    // Rows.
    for col in 0..n {
        let mut column: Vec<f64> = (0..n).map(|r| conj[r * n + col]).collect();
        apply_edge(&mut column, e, m);
        for r in 0..n {
            conj[r * n + col] = column[r];
        }
    }
    // Columns.
    for r in 0..n {
        apply_edge(&mut conj[r * n..(r + 1) * n], e, m);
    }
    for (x, y) in rho.iter_mut().zip(&conj) {
        *x = (1.0 - p) * *x + p * y;
    }
}

fn purity(rho: &[f64]) -> f64 {
    rho.iter().map(|x| x * x).sum()
}

/// Sign-pattern decomposition of the decohered ground state.
pub fn convex_decomposition(p: f64, lat: &TorusLattice) -> Result<ConvexDecomposition> {
    let br = branches(p, lat)?;
    let probabilities: Vec<f64> = br.iter().map(|v| dot(v, v)).collect();
    let mut max_off = 0.0f64;
    for (i, a) in br.iter().enumerate() {
        for b in &br[i + 1..] {
            max_off = max_off.max(dot(a, b).abs());
        }
    }
    let formula_probabilities = (0..br.len())
        .map(|m| formula_probability(p, lat, m))
        .collect::<Result<Vec<_>>>()?;

    let psi0 = ground_state(lat)?;
    let n = psi0.len();
    let mut rho = projector(&psi0);
    for e in 0..lat.n_edges() {
        edge_channel(&mut rho, n, e, p, SIGMA);
    }
    let s2: f64 = probabilities.iter().map(|p| p * p).sum();
    Ok(ConvexDecomposition {
        classical_renyi2: -s2.ln(),
        purity: purity(&rho),
        probabilities,
        formula_probabilities,
        max_offdiagonal_overlap: max_off,
    })
}

/// `tr ρ² / (tr ρ)²` for `ρ` the phase-flipped state `Π_e (1 + h Z_e)|Ψ0⟩`.
///
/// The channel is applied edge by edge as `ρ → (1−p)ρ + p Z_e ρ Z_e`.
pub fn phase_flip_purity(h: f64, p: f64, lat: &TorusLattice) -> Result<f64> {
    crate::couplings::check_h(h)?;
    check_p(p)?;
    let mut v = ground_state(lat)?;
    for e in 0..lat.n_edges() {
        apply_edge(&mut v, e, [[1.0 + h, 0.0], [0.0, 1.0 - h]]);
    }
    let n = v.len();
    let mut rho = projector(&v);
    for e in 0..lat.n_edges() {
        edge_channel(&mut rho, n, e, p, [[1.0, 0.0], [0.0, -1.0]]);
    }
    let tr: f64 = (0..n).map(|i| rho[i * n + i]).sum();
    Ok(purity(&rho) / (tr * tr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TorusLattice {
        TorusLattice::new(2, 2).unwrap()
    }

    #[test]
    fn ground_state_is_stabilized() {
        let lat = small();
        assert_eq!(loop_group(&lat).unwrap().len(), 8);
        let v = ground_state(&lat).unwrap();
        assert!((dot(&v, &v) - 1.0).abs() < 1e-15);
        // Plaquette X's permute the support; star Z's are +1 on it.
        for y in 0..2 {
            for x in 0..2 {
                let m = plaquette_mask(&lat, x, y);
                for i in 0..v.len() {
                    assert_eq!(v[i], v[i ^ m]);
                }
                let star: usize = lat.star(x as isize, y as isize).iter().fold(0, |a, &e| a ^ (1 << e));
                for (i, &a) in v.iter().enumerate() {
                    if a != 0.0 {
                        assert_eq!((i & star).count_ones() % 2, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn p0_branches_are_uniform() {
        let lat = small();
        let d = convex_decomposition(0.0, &lat).unwrap();
        let u = 1.0 / 256.0;
        assert!(d.probabilities.iter().all(|&q| (q - u).abs() < 1e-15));
    }

    #[test]
    fn probabilities_match_formula_and_sum_to_one() {
        let lat = small();
        for &p in &[0.1, 0.3, 0.5] {
            let d = convex_decomposition(p, &lat).unwrap();
            assert!((d.sum() - 1.0).abs() < 1e-12);
            assert!(d.max_formula_error() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn half_gives_orthogonal_branches() {
        let d = convex_decomposition(0.5, &small()).unwrap();
        assert!(d.max_offdiagonal_overlap < 1e-10);
        assert!((d.purity - d.sum_of_squares()).abs() < 1e-10);
        // Away from p = 1/2 the branches overlap and the identity fails.
        let d = convex_decomposition(0.3, &small()).unwrap();
        assert!(d.max_offdiagonal_overlap > 1e-3);
    }

    #[test]
    fn phase_flip_limits() {
        let lat = small();
        // h = 0, p = 0: pure state.
        assert!((phase_flip_purity(0.0, 0.0, &lat).unwrap() - 1.0).abs() < 1e-12);
        // p = 1/2 dephases the 8 loop configurations completely.
        assert!((phase_flip_purity(0.0, 0.5, &lat).unwrap() - 0.125).abs() < 1e-12);
    }
}

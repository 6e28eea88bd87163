//! Channels as operators on the doubled space `H ⊗ H̄` of a few edges.
//!
//! A channel with Kraus set `{K_n}` is represented by `Σ_n K_n ⊗ K̄_n`. The
//! first `n` qubits of the dense operator belong to `H`, the last `n` to `H̄`.

use serde::Serialize;

use super::dense::{c, embed, pauli_x, pauli_y, pauli_z, CMat, DENSE_CAP};
use super::lattice::TorusLattice;
use super::pauli::{e_string, emd_conjugate, f_string, m_string, translate};
use crate::couplings::{check_p, check_theta};
use crate::error::{Error, Result};

/// Dense operator on the doubled space of `n_edges` qubits.
#[derive(Debug, Clone)]
pub struct DoubledOperator {
    pub n_edges: usize,
    pub op: CMat,
}

impl DoubledOperator {
    pub fn new(n_edges: usize, op: CMat, hermitian: bool) -> Result<Self> {
        let dim = 1usize << (2 * n_edges);
        if op.rows != dim || op.cols != dim {
            return Err(Error::Invalid(format!(
                "doubled operator on {n_edges} edges must be {dim}x{dim}"
            )));
        }
        if hermitian && !op.is_hermitian(1e-12) {
            return Err(Error::Invalid("operator claimed Hermitian is not".into()));
        }
        Ok(Self { n_edges, op })
    }

    pub fn identity(n_edges: usize) -> Self {
        Self {
            n_edges,
            op: CMat::identity(1 << (2 * n_edges)),
        }
    }

    /// `ℰ†ℰ` as a doubled operator.
    pub fn dagger_times_self(&self) -> Self {
        Self {
            n_edges: self.n_edges,
            op: &self.op.adjoint() * &self.op,
        }
    }

    pub fn dim(&self) -> usize {
        self.op.rows
    }
}

/// `σ(θ) = cos θ Z + sin θ X`.
pub fn sigma(theta: f64) -> CMat {
    &pauli_z().scale(c(theta.cos(), 0.0)) + &pauli_x().scale(c(theta.sin(), 0.0))
}

/// `Σ_n K_n ⊗ K̄_n` for single-qubit Kraus operators, acting on one edge.
pub fn kraus_channel(kraus: &[CMat]) -> Result<DoubledOperator> {
    let mut acc = CMat::zeros(4, 4);
    for k in kraus {
        if (k.rows, k.cols) != (2, 2) {
            return Err(Error::Invalid("single-edge Kraus operators must be 2x2".into()));
        }
        acc = &acc + &k.kron(&k.conj());
    }
    DoubledOperator::new(1, acc, false)
}

/// Places a product of single-edge doubled factors on `n` edges, keeping the
/// `H` qubits first and the `H̄` qubits last.
fn tensor_edges(factor: &CMat, n: usize) -> CMat {
    let dim = 1usize << (2 * n);
    let mut out = CMat::identity(dim);
    for e in 0..n {
        // factor = Σ A_ij ⊗ B_kl written in the (H_e, H̄_e) basis.
        let mut placed = CMat::zeros(dim, dim);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = factor.get(i * 2 + k, j * 2 + l);
                        if v == c(0.0, 0.0) {
                            continue;
                        }
                        let mut a = CMat::zeros(2, 2);
                        a.set(i, j, c(1.0, 0.0));
                        let mut b = CMat::zeros(2, 2);
                        b.set(k, l, c(1.0, 0.0));
                        let term = &embed(&a, e, 2 * n) * &embed(&b, n + e, 2 * n);
                        placed = &placed + &term.scale(v);
                    }
                }
            }
        }
        out = &out * &placed;
    }
    out
}

/// `Π_e [(1−p) I + p σ_e(θ) ⊗ σ̄_e(θ)]` on `n_edges ≤ 4` edges.
pub fn build_edge_channel(p: f64, theta: f64, n_edges: usize) -> Result<DoubledOperator> {
    check_p(p)?;
    check_theta(theta)?;
    if n_edges == 0 || (1usize << (2 * n_edges)) > DENSE_CAP {
        return Err(Error::Size(format!(
            "{n_edges} doubled edges exceed the dense cap of {DENSE_CAP}"
        )));
    }
    let s = sigma(theta);
    let single = &CMat::identity(4).scale(c(1.0 - p, 0.0)) + &s.kron(&s.conj()).scale(c(p, 0.0));
    DoubledOperator::new(n_edges, tensor_edges(&single, n_edges), true)
}

/// `‖ℰ(p)†ℰ(p) − ℰ(2p(1−p))‖` on a single edge.
pub fn compose_check(p: f64, theta: f64) -> Result<f64> {
    let e = build_edge_channel(p, theta, 1)?;
    let composed = e.dagger_times_self();
    let target = build_edge_channel(2.0 * p * (1.0 - p), theta, 1)?;
    Ok((&composed.op - &target.op).frobenius())
}

/// `max(‖op^{T_H} − op‖, ‖op^{T_H̄} − op‖)` in the computational basis.
pub fn partial_transpose_check(op: &DoubledOperator) -> Result<f64> {
    let half = 1usize << op.n_edges;
    let th = op.op.partial_transpose(half, half, true)?;
    let thb = op.op.partial_transpose(half, half, false)?;
    Ok((&th - &op.op).frobenius().max((&thb - &op.op).frobenius()))
}

/// Channel applying `Y` on the `H` copy with probability `p`:
/// `(1−p) I ⊗ I + p Y ⊗ Ȳ`. Since `Yᵀ = −Y` it breaks partial-transpose
/// symmetry.
pub fn y_kraus_channel(p: f64) -> Result<DoubledOperator> {
    check_p(p)?;
    kraus_channel(&[
        CMat::identity(2).scale(c((1.0 - p).sqrt(), 0.0)),
        pauli_y().scale(c(p.sqrt(), 0.0)),
    ])
}

/// Residual of the Kraus-level weak-symmetry check on two edges.
///
/// Conjugates every two-edge Kraus operator `K_a ⊗ K_b` by
/// `Π_e (X_e+Z_e)/√2` and looks for a member of the same set equal to the
/// image up to a phase. Returns the worst mismatch in Frobenius norm.
pub fn emd_kraus_check(p: f64, theta: f64) -> Result<f64> {
    check_p(p)?;
    let s = sigma(theta);
    let one = [
        CMat::identity(2).scale(c((1.0 - p).sqrt(), 0.0)),
        s.scale(c(p.sqrt(), 0.0)),
    ];
    let set: Vec<CMat> = one
        .iter()
        .flat_map(|a| one.iter().map(move |b| a.kron(b)))
        .collect();
    let r = 0.5f64.sqrt();
    let had = &pauli_x().scale(c(r, 0.0)) + &pauli_z().scale(c(r, 0.0));
    let u = had.kron(&had);
    let mut worst = 0.0f64;
    for k in &set {
        let img = &(&u * k) * &u.adjoint();
        let best = set
            .iter()
            .map(|cand| {
                // Optimal phase aligns the overlap ⟨cand, img⟩ to be real.
                let ov: num_complex::Complex64 = cand
                    .data
                    .iter()
                    .zip(&img.data)
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { c(1.0, 0.0) };
                (&img - &cand.scale(ph)).frobenius()
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    Ok(worst)
}

/// Outcome of one named algebraic check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub residual: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn below(name: &str, residual: f64, tol: f64) -> Self {
        Self {
            check_name: name.into(),
            residual,
            pass: residual < tol,
        }
    }

    pub fn above(name: &str, residual: f64, floor: f64) -> Self {
        Self {
            check_name: name.into(),
            residual,
            pass: residual > floor,
        }
    }

    pub fn exact(name: &str, ok: bool) -> Self {
        Self {
            check_name: name.into(),
            residual: if ok { 0.0 } else { 1.0 },
            pass: ok,
        }
    }
}

/// Exact string identities for duality conjugation on a torus, using the
/// direct path through the given vertices.
///
/// * `e`-string maps to the `m`-string on the dual path through the same
///   coordinates.
/// * conjugating twice maps `w_e(l)` to `w_e(l + 2δ)`.
/// * the fermion string maps to `w_m(l̃) · w_e(l + 2δ)`.
/// * that image differs from `w_f(l + 2δ)`.
pub fn emd_string_checks(lat: &TorusLattice, verts: &[(isize, isize)]) -> Result<Vec<CheckReport>> {
    let path = lat.direct_path(verts)?;
    let dual = lat.dual_path(verts)?;
    let we = e_string(lat, &path);
    let wm = m_string(lat, &dual);
    let img_e = emd_conjugate(&we, lat)?;
    let twice = emd_conjugate(&img_e, lat)?;
    let we_shift = translate(&we, lat, 1, 1);

    let wf = f_string(lat, &path);
    let img_f = emd_conjugate(&wf, lat)?;
    let expected_f = &wm * &we_shift;
    let wf_shift = translate(&wf, lat, 1, 1);

    let id = super::pauli::PauliString::identity(lat.n_edges());
    Ok(vec![
        CheckReport::exact("emd_e_to_m", img_e == wm),
        CheckReport::exact("emd_twice_is_2delta_shift", twice == we_shift),
        CheckReport::exact("emd_identity_fixed", emd_conjugate(&id, lat)? == id),
        CheckReport::exact("emd_f_image", img_f == expected_f),
        CheckReport::exact("emd_f_not_shifted_f", img_f != wf_shift),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn p0_is_identity() {
        let e = build_edge_channel(0.0, 0.7, 2).unwrap();
        assert!((&e.op - &CMat::identity(16)).frobenius() < 1e-15);
    }

    #[test]
    fn half_is_scaled_projector() {
        let e = build_edge_channel(0.5, FRAC_PI_4, 1).unwrap();
        // ℰ = (1 + σ⊗σ̄)/2 is the projector onto the even sector.
        let p = e.op.clone();
        assert!((&(&p * &p) - &p).frobenius() < 1e-14);
        assert!((p.trace().re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn spectrum_is_product_of_edge_spectra() {
        // Single-edge eigenvalues are 1, 1, 1−2p, 1−2p; the trace of the
        // two-edge operator and of its square follow from the products.
        let p = 0.3;
        let e = build_edge_channel(p, 0.4, 2).unwrap();
        let single = [1.0, 1.0, 1.0 - 2.0 * p, 1.0 - 2.0 * p];
        let tr: f64 = single.iter().flat_map(|a| single.iter().map(move |b| a * b)).sum();
        let tr2: f64 = single.iter().flat_map(|a| single.iter().map(move |b| (a * b) * (a * b))).sum();
        assert!((e.op.trace().re - tr).abs() < 1e-12);
        assert!(((&e.op * &e.op).trace().re - tr2).abs() < 1e-12);
    }

    #[test]
    fn composition_and_partial_transpose() {
        for i in 0..20 {
            let p = 0.5 * i as f64 / 19.0;
            assert!(compose_check(p, FRAC_PI_4).unwrap() < 1e-12);
            let ee = build_edge_channel(p, FRAC_PI_4, 2).unwrap().dagger_times_self();
            assert!(partial_transpose_check(&ee).unwrap() < 1e-12);
        }
        assert!(partial_transpose_check(&DoubledOperator::identity(2)).unwrap() == 0.0);
        let y = y_kraus_channel(0.2).unwrap().dagger_times_self();
        assert!(partial_transpose_check(&y).unwrap() > 1e-3);
        assert!(build_edge_channel(0.1, 0.1, 5).is_err());
    }

    #[test]
    fn kraus_weak_symmetry_at_selfdual_angle() {
        for &p in &[0.0, 0.1, 0.3, 0.5] {
            assert!(emd_kraus_check(p, FRAC_PI_4).unwrap() < 1e-12);
        }
        assert!(emd_kraus_check(0.3, 0.2).unwrap() > 1e-3);
    }

    #[test]
    fn string_identities_on_4x4() {
        let lat = TorusLattice::new(4, 4).unwrap();
        for path in [
            vec![(0, 0), (1, 0), (2, 0)],
            vec![(1, 1), (1, 2), (2, 2), (3, 2)],
            vec![(0, 3), (0, 4), (-1, 4)],
        ] {
            for r in emd_string_checks(&lat, &path).unwrap() {
                assert!(r.pass, "{} failed for {path:?}", r.check_name);
            }
        }
    }
}

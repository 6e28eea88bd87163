//! Symbolic Pauli strings on the edges of a torus.
//!
//! A string is stored as `i^k · Π_e X_e^{x_e} Z_e^{z_e}` with the X factor
//! to the left of the Z factor on every edge, so a `Y` letter contributes one
//! power of `i` (Y = iXZ).

use std::fmt;

use super::lattice::TorusLattice;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    phase: u8,
    x: Vec<u64>,
    z: Vec<u64>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            phase: 0,
            x: vec![0; words(n)],
            z: vec![0; words(n)],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Power `k` of the global `i^k` prefactor.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    fn get_bit(v: &[u64], i: usize) -> bool {
        v[i / 64] >> (i % 64) & 1 == 1
    }

    fn set_bit(v: &mut [u64], i: usize, b: bool) {
        if b {
            v[i / 64] |= 1 << (i % 64);
        } else {
            v[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn letter(&self, i: usize) -> Letter {
        match (Self::get_bit(&self.x, i), Self::get_bit(&self.z, i)) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (false, true) => Letter::Z,
            (true, true) => Letter::Y,
        }
    }

    /// Letter of the Hermitian single-site factor, with `Y` reported as such.
    pub fn set_letter(&mut self, i: usize, l: Letter) {
        let old_y = self.letter(i) == Letter::Y;
        let (bx, bz) = match l {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Z => (false, true),
            Letter::Y => (true, true),
        };
        Self::set_bit(&mut self.x, i, bx);
        Self::set_bit(&mut self.z, i, bz);
        let new_y = l == Letter::Y;
        self.phase = (self.phase + u8::from(new_y) + 3 * u8::from(old_y)) % 4;
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Self::identity(letters.len());
        for (i, &l) in letters.iter().enumerate() {
            p.set_letter(i, l);
        }
        p
    }

    /// Product of one letter over a set of edges.
    pub fn on_edges(n: usize, edges: &[usize], l: Letter) -> Self {
        let mut p = Self::identity(n);
        for &e in edges {
            let single = {
                let mut s = Self::identity(n);
                s.set_letter(e, l);
                s
            };
            p = &p * &single;
        }
        p
    }

    pub fn with_phase(mut self, k: u8) -> Self {
        self.phase = (self.phase + k) % 4;
        self
    }

    /// `P·P`, which is `+1` or `−1` times the identity.
    pub fn square_sign(&self) -> i8 {
        let sq = self * self;
        debug_assert!(sq.x.iter().chain(&sq.z).all(|&w| w == 0));
        match sq.phase {
            0 => 1,
            2 => -1,
            _ => unreachable!("Pauli squares are real"),
        }
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        let mut s = 0u32;
        for w in 0..self.x.len() {
            s += (self.x[w] & other.z[w]).count_ones() + (self.z[w] & other.x[w]).count_ones();
        }
        s % 2 == 0
    }

    /// Conjugation by `Π_e (X_e + Z_e)/√2`: swaps X and Z on every edge.
    pub fn hadamard_conjugate(&self) -> Self {
        let mut extra = 0u32;
        for w in 0..self.x.len() {
            extra += (self.x[w] & self.z[w]).count_ones();
        }
        Self {
            n: self.n,
            phase: ((self.phase as u32 + 2 * extra) % 4) as u8,
            x: self.z.clone(),
            z: self.x.clone(),
        }
    }

    /// Relabels edges by a permutation `perm[e] = image of e`.
    pub fn permute(&self, perm: impl Fn(usize) -> usize) -> Self {
        let mut out = Self::identity(self.n);
        out.phase = self.phase;
        for i in 0..self.n {
            let j = perm(i);
            Self::set_bit(&mut out.x, j, Self::get_bit(&self.x, i));
            Self::set_bit(&mut out.z, j, Self::get_bit(&self.z, i));
        }
        out
    }

    /// Dense matrix on `n` qubits (qubit 0 most significant). Only for tiny `n`.
    pub fn to_dense(&self) -> Result<super::dense::CMat> {
        use super::dense::{c, embed, pauli_x, pauli_z, CMat};
        if self.n > 8 {
            return Err(Error::Size(format!("dense Pauli string on {} qubits", self.n)));
        }
        let dim = 1usize << self.n;
        let mut m = CMat::identity(dim);
        for i in 0..self.n {
            if Self::get_bit(&self.x, i) {
                m = &m * &embed(&pauli_x(), i, self.n);
            }
            if Self::get_bit(&self.z, i) {
                m = &m * &embed(&pauli_z(), i, self.n);
            }
        }
        let ph = [c(1., 0.), c(0., 1.), c(-1., 0.), c(0., -1.)][self.phase as usize];
        Ok(m.scale(ph))
    }
}

impl<'a> std::ops::Mul<&'a PauliString> for &'a PauliString {
    type Output = PauliString;

    fn mul(self, rhs: &'a PauliString) -> PauliString {
        assert_eq!(self.n, rhs.n, "Pauli strings on different supports");
        let mut swaps = 0u32;
        let mut x = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.z.len());
        for w in 0..self.x.len() {
            swaps += (self.z[w] & rhs.x[w]).count_ones();
            x.push(self.x[w] ^ rhs.x[w]);
            z.push(self.z[w] ^ rhs.z[w]);
        }
        PauliString {
            n: self.n,
            phase: ((self.phase as u32 + rhs.phase as u32 + 2 * swaps) % 4) as u8,
            x,
            z,
        }
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Report the phase relative to Hermitian letters (Y counted as Y).
        let ys = (0..self.n).filter(|&i| self.letter(i) == Letter::Y).count() as u8;
        let k = (self.phase + 4 - ys % 4) % 4;
        f.write_str(["+", "+i", "-", "-i"][k as usize])?;
        for i in 0..self.n {
            f.write_str(match self.letter(i) {
                Letter::I => "I",
                Letter::X => "X",
                Letter::Y => "Y",
                Letter::Z => "Z",
            })?;
        }
        Ok(())
    }
}

/// Electromagnetic-duality action on a string: Hadamard conjugation on every
/// edge followed by the diagonal half-translation.
pub fn emd_conjugate(w: &PauliString, lat: &TorusLattice) -> Result<PauliString> {
    if w.len() != lat.n_edges() {
        return Err(Error::Geometry(format!(
            "string on {} edges, lattice has {}",
            w.len(),
            lat.n_edges()
        )));
    }
    Ok(w.hadamard_conjugate().permute(|e| lat.translate_delta(e)))
}

/// Charge string: X on the edges of a direct path.
pub fn e_string(lat: &TorusLattice, path: &[usize]) -> PauliString {
    PauliString::on_edges(lat.n_edges(), path, Letter::X)
}

/// Flux string: Z on the edges crossed by a dual path.
pub fn m_string(lat: &TorusLattice, dual: &[usize]) -> PauliString {
    PauliString::on_edges(lat.n_edges(), dual, Letter::Z)
}

/// Fermion string `w_e(l) · w_m(l̃)` where `l̃` is the δ-translate of `l`.
pub fn f_string(lat: &TorusLattice, path: &[usize]) -> PauliString {
    let dual: Vec<usize> = path.iter().map(|&e| lat.translate_delta(e)).collect();
    &e_string(lat, path) * &m_string(lat, &dual)
}

/// Translates every edge of a string by `(dx, dy)`.
pub fn translate(w: &PauliString, lat: &TorusLattice, dx: isize, dy: isize) -> PauliString {
    w.permute(|e| lat.translate(e, dx, dy))
}

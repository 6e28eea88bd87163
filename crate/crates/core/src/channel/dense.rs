//! Small dense complex operators on the doubled space of a few edges.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest dimension handled densely (four doubled edges).
pub const DENSE_CAP: usize = 256;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.conj()).collect(),
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        let mut out = Self::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols && (self - &self.adjoint()).frobenius() <= tol
    }

    /// Partial transpose of an operator on `A ⊗ B` with factor dimensions
    /// `(da, db)`; `first = true` transposes the `A` factor.
    pub fn partial_transpose(&self, da: usize, db: usize, first: bool) -> Result<Self> {
        if self.rows != da * db || self.cols != da * db {
            return Err(Error::Invalid(format!(
                "partial transpose: {}x{} is not {da}*{db} square",
                self.rows, self.cols
            )));
        }
        let mut out = Self::zeros(self.rows, self.cols);
        for a in 0..da {
            for b in 0..db {
                for a2 in 0..da {
                    for b2 in 0..db {
                        let v = self.get(a * db + b, a2 * db + b2);
                        let (ra, ca) = if first { (a2, a) } else { (a, a2) };
                        let (rb, cb) = if first { (b, b2) } else { (b2, b) };
                        out.set(ra * db + rb, ca * db + cb, v);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<'a> Mul<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn mul(self, rhs: &'a CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows);
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl<'a> Add<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn add(self, rhs: &'a CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn sub(self, rhs: &'a CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_i() -> CMat {
    CMat::identity(2)
}

pub fn pauli_x() -> CMat {
    CMat::from_rows(&[&[c(0., 0.), c(1., 0.)], &[c(1., 0.), c(0., 0.)]])
}

pub fn pauli_y() -> CMat {
    CMat::from_rows(&[&[c(0., 0.), c(0., -1.)], &[c(0., 1.), c(0., 0.)]])
}

pub fn pauli_z() -> CMat {
    CMat::from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(-1., 0.)]])
}

/// Embeds a single-qubit operator on qubit `site` of `n` qubits
/// (qubit 0 is the most significant bit of the basis index).
pub fn embed(op: &CMat, site: usize, n: usize) -> CMat {
    let mut out = CMat::identity(1);
    for q in 0..n {
        let f = if q == site { op.clone() } else { pauli_i() };
        out = out.kron(&f);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        let xy = &x * &y;
        assert!((&xy - &z.scale(c(0., 1.))).frobenius() < 1e-15);
        assert!((&(&x * &x) - &CMat::identity(2)).frobenius() < 1e-15);
        assert!(y.is_hermitian(0.0));
    }

    #[test]
    fn partial_transpose_of_product() {
        let a = pauli_y();
        let b = pauli_x();
        let ab = a.kron(&b);
        let pt = ab.partial_transpose(2, 2, true).unwrap();
        let expect = a.partial_transpose(2, 1, true).unwrap().kron(&b);
        assert!((&pt - &expect).frobenius() < 1e-15);
        let full_t = pt.partial_transpose(2, 2, false).unwrap();
        let mut tr = CMat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                tr.set(i, j, ab.get(j, i));
            }
        }
        assert!((&full_t - &tr).frobenius() < 1e-15);
    }
}

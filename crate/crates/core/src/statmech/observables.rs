//! Disorder lines and the anyon-label dictionary.

use serde::{Deserialize, Serialize};

use super::model::{Bond, BondDir, StatMechModel};
use crate::error::{Error, Result};

/// A spin-lattice observable: a product of flavor insertions at two sites,
/// a disorder seam between two dual sites, or both sharing endpoints.
///
/// Sites are `(x, y)` with `y` the transfer direction. Dual site `(x, y)` is
/// the face whose lower-left corner is site `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub label: String,
    /// Flavors multiplied at both endpoints.
    pub order_mask: u8,
    /// Flavors whose bond products flip along the seam.
    pub disorder_mask: u8,
    pub i: (isize, isize),
    pub j: (isize, isize),
    /// Dual sites visited by the seam, from `i` to `j`; empty without one.
    pub path: Vec<(isize, isize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    Order,
    Disorder,
    Composite,
    Trivial,
}

impl ObservableSpec {
    pub fn order(label: &str, mask: u8, i: (isize, isize), j: (isize, isize)) -> Result<Self> {
        if mask == 0 {
            return Err(Error::Invalid("order observable needs a nonempty mask".into()));
        }
        Ok(Self {
            label: label.into(),
            order_mask: mask,
            disorder_mask: 0,
            i,
            j,
            path: Vec::new(),
        })
    }

    pub fn disorder(label: &str, mask: u8, path: Vec<(isize, isize)>) -> Result<Self> {
        check_connected(&path)?;
        let (i, j) = (path[0], *path.last().unwrap());
        Ok(Self {
            label: label.into(),
            order_mask: 0,
            disorder_mask: mask,
            i,
            j,
            path,
        })
    }

    pub fn kind(&self) -> ObservableKind {
        match (self.order_mask != 0, self.disorder_mask != 0) {
            (true, false) => ObservableKind::Order,
            (false, true) => ObservableKind::Disorder,
            (true, true) => ObservableKind::Composite,
            (false, false) => ObservableKind::Trivial,
        }
    }

    /// Same insertion with endpoints moved to `(x, 0)` and `(x, r)` and a
    /// straight seam up the column.
    pub fn along_column(&self, x: isize, r: usize) -> Self {
        let mut out = self.clone();
        out.i = (x, 0);
        out.j = (x, r as isize);
        out.path = if self.disorder_mask != 0 {
            column_path(x, 0, r)
        } else {
            Vec::new()
        };
        out
    }
}

/// Straight dual path from `(x, y0)` to `(x, y0 + r)`.
pub fn column_path(x: isize, y0: isize, r: usize) -> Vec<(isize, isize)> {
    (0..=r as isize).map(|k| (x, y0 + k)).collect()
}

/// Straight dual path from `(x0, y)` to `(x0 + r, y)`.
pub fn row_path(x0: isize, y: isize, r: usize) -> Vec<(isize, isize)> {
    (0..=r as isize).map(|k| (x0 + k, y)).collect()
}

fn check_connected(path: &[(isize, isize)]) -> Result<()> {
    if path.is_empty() {
        return Err(Error::Invalid("disorder path needs at least one dual site".into()));
    }
    for w in path.windows(2) {
        let d = (w[1].0 - w[0].0).abs() + (w[1].1 - w[0].1).abs();
        if d != 1 {
            return Err(Error::Geometry(format!(
                "dual path step {:?} -> {:?} is not between neighbours",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Spin-lattice bonds crossed by a dual path, before wrapping.
pub fn crossed_bonds(path: &[(isize, isize)]) -> Result<Vec<(BondDir, isize, isize)>> {
    check_connected(path)?;
    Ok(path
        .windows(2)
        .map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            match (x1 - x0, y1 - y0) {
                (1, 0) => (BondDir::V, x1, y0),
                (-1, 0) => (BondDir::V, x0, y0),
                (0, 1) => (BondDir::H, x0, y1),
                _ => (BondDir::H, x0, y0),
            }
        })
        .collect())
}

/// Wraps bond coordinates on an `lx`-periodic lattice, and also in `y` when
/// `ly` is given. Without `ly`, negative rows are rejected.
pub fn wrap_bond(dir: BondDir, x: isize, y: isize, lx: usize, ly: Option<usize>) -> Result<Bond> {
    let xw = x.rem_euclid(lx as isize) as usize;
    let yw = match ly {
        Some(ly) => y.rem_euclid(ly as isize) as usize,
        None if y >= 0 => y as usize,
        None => return Err(Error::Geometry(format!("row {y} below the cylinder origin"))),
    };
    Ok(Bond { dir, x: xw, y: yw })
}

/// Flips the bond products of the masked flavors on every bond crossed by
/// `path`. Applying the same line twice restores the model.
pub fn insert_disorder_line(
    m: &StatMechModel,
    path: &[(isize, isize)],
    mask: u8,
    lx: usize,
    ly: Option<usize>,
) -> Result<StatMechModel> {
    if mask as usize >= m.d() {
        return Err(Error::Invalid(format!(
            "mask {mask:#b} references flavors beyond the {} present",
            m.flavors
        )));
    }
    let mut out = m.clone();
    if path.len() <= 1 || mask == 0 {
        return Ok(out);
    }
    for (dir, x, y) in crossed_bonds(path)? {
        let b = wrap_bond(dir, x, y, lx, ly)?;
        let e = out.eta.entry(b).or_insert(0);
        *e ^= mask;
        if *e == 0 {
            out.eta.remove(&b);
        }
    }
    Ok(out)
}

/// An anyon label on one side of the overlap: `(plain, barred)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anyon {
    I,
    E,
    M,
    F,
}

fn parse_anyon(s: &str) -> Result<Anyon> {
    match s.trim() {
        "I" | "1" => Ok(Anyon::I),
        "e" => Ok(Anyon::E),
        "m" => Ok(Anyon::M),
        "f" => Ok(Anyon::F),
        other => Err(Error::Invalid(format!("unknown anyon label `{other}`"))),
    }
}

fn parse_pair(s: &str) -> Result<(Anyon, Anyon)> {
    let (a, b) = s
        .split_once('.')
        .ok_or_else(|| Error::Invalid(format!("anyon pair `{s}` must look like `e.I`")))?;
    Ok((parse_anyon(a)?, parse_anyon(b)?))
}

/// Four-flavor masks for a (bra, ket) label pair.
///
/// Flavor bits follow `(z, t, z̄, t̄)`: an anyon in the ket touches `z`
/// (plain) or `z̄` (barred), an anyon in the bra touches `t` or `t̄`.
/// Returns `(e-mask, m-mask)`.
fn four_flavor_masks(bra: (Anyon, Anyon), ket: (Anyon, Anyon)) -> Result<(u8, u8)> {
    let mut e = 0u8;
    let mut m = 0u8;
    for (anyon, bit) in [(ket.0, 0), (bra.0, 1), (ket.1, 2), (bra.1, 3)] {
        match anyon {
            Anyon::I => {}
            Anyon::E => e |= 1 << bit,
            Anyon::M => m |= 1 << bit,
            Anyon::F => {
                return Err(Error::Invalid(
                    "standalone fermion labels are not supported; compose e and m insertions \
                     sharing endpoints instead"
                        .into(),
                ))
            }
        }
    }
    Ok((e, m))
}

/// Rewrites a `(z, t, z̄, t̄)` mask in the reduced variables `s = z z̄`,
/// `τ = t z̄` using the site relation `t̄ = s t`. Fails when the product
/// carries an odd power of `z̄`, which averages to zero by gauge symmetry.
pub fn reduce_mask(mask4: u8) -> Result<u8> {
    let bit = |k: u8| (mask4 >> k) & 1;
    let zbar_power = bit(0) + bit(1) + bit(2) + bit(3);
    if zbar_power % 2 == 1 {
        return Err(Error::Invalid(format!(
            "mask {mask4:#06b} is odd under the z̄ gauge flip and vanishes identically"
        )));
    }
    let s = (bit(0) + bit(3)) % 2;
    let tau = (bit(1) + bit(3)) % 2;
    Ok(s | tau << 1)
}

/// Translates an overlap label `"bra|ket"` (e.g. `"I.I|e.e"`) into an
/// observable on `m` between sites `i` and `j`.
///
/// Two-flavor models use the reduced variables `(s, τ)`; four-flavor models
/// use `(z, t, z̄, t̄)` directly. Disorder seams follow `path` when given, and
/// a straight column path otherwise (requires `i` and `j` on one column).
pub fn anyon_observable(
    label: &str,
    m: &StatMechModel,
    i: (isize, isize),
    j: (isize, isize),
    path: Option<Vec<(isize, isize)>>,
) -> Result<ObservableSpec> {
    let (bra, ket) = label
        .split_once('|')
        .ok_or_else(|| Error::Invalid(format!("overlap label `{label}` must look like `I.I|e.e`")))?;
    let (e4, m4) = four_flavor_masks(parse_pair(bra)?, parse_pair(ket)?)?;
    let (order_mask, disorder_mask) = match m.flavors {
        4 => (e4, m4),
        2 => (reduce_mask(e4)?, reduce_mask(m4)?),
        n => {
            return Err(Error::Invalid(format!(
                "anyon labels need a two- or four-flavor model, got {n} flavors"
            )))
        }
    };
    let path = if disorder_mask != 0 {
        match path {
            Some(p) => p,
            None if i.0 == j.0 && j.1 >= i.1 => column_path(i.0, i.1, (j.1 - i.1) as usize),
            None => {
                return Err(Error::Geometry(
                    "give an explicit dual path for endpoints off a common column".into(),
                ))
            }
        }
    } else {
        Vec::new()
    };
    if disorder_mask != 0 {
        check_connected(&path)?;
    }
    Ok(ObservableSpec {
        label: label.into(),
        order_mask,
        disorder_mask,
        i,
        j,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{selfdual_couplings, ATCouplings};
    use crate::statmech::model::{at_model, coupled_model, spin};

    fn at() -> StatMechModel {
        at_model(selfdual_couplings(0.3).unwrap()).unwrap()
    }

    #[test]
    fn dictionary_in_reduced_variables() {
        let m = at();
        let o = anyon_observable("I.I|e.e", &m, (0, 0), (0, 3), None).unwrap();
        assert_eq!((o.order_mask, o.disorder_mask), (0b01, 0));
        let o = anyon_observable("e.I|e.I", &m, (0, 0), (0, 3), None).unwrap();
        assert_eq!((o.order_mask, o.disorder_mask), (0b11, 0));
        let o = anyon_observable("I.I|m.m", &m, (0, 0), (0, 3), None).unwrap();
        assert_eq!((o.order_mask, o.disorder_mask), (0, 0b01));
        assert_eq!(o.path.len(), 4);
        let o = anyon_observable("m.I|m.I", &m, (0, 0), (0, 3), None).unwrap();
        assert_eq!((o.order_mask, o.disorder_mask), (0, 0b11));
        assert!(anyon_observable("I.I|f.f", &m, (0, 0), (0, 3), None).is_err());
        assert!(anyon_observable("I.I|e.I", &m, (0, 0), (0, 3), None).is_err());
    }

    #[test]
    fn dictionary_in_four_flavors() {
        let m = coupled_model(0.3, 0.2).unwrap();
        let o = anyon_observable("e.I|e.I", &m, (0, 0), (0, 2), None).unwrap();
        assert_eq!(o.order_mask, 0b0011);
        let o = anyon_observable("I.I|e.e", &m, (0, 0), (0, 2), None).unwrap();
        assert_eq!(o.order_mask, 0b0101);
        let o = anyon_observable("I.I|e.m", &m, (0, 0), (0, 2), None).unwrap();
        assert_eq!(o.kind(), ObservableKind::Composite);
    }

    #[test]
    fn single_edge_flip_matches_substitution() {
        let c = ATCouplings::finite(0.3, 0.2);
        let m = at_model(c).unwrap();
        let d = insert_disorder_line(&m, &[(0, 0), (1, 0)], 0b01, 4, Some(4)).unwrap();
        let b = Bond { dir: BondDir::V, x: 1, y: 0 };
        let norm = (2.0 * 0.3 + 0.2f64).exp();
        for a in 0..4 {
            for bb in 0..4 {
                let x = a ^ bb;
                let (s, t) = (spin(x, 0), spin(x, 1));
                let expect = (0.3 * (-s + t) - 0.2 * s * t).exp() / norm;
                assert!((d.bond_weight(&b, a, bb) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn double_insertion_restores() {
        let m = at();
        let path = vec![(0, 0), (0, 1), (1, 1), (1, 2)];
        let once = insert_disorder_line(&m, &path, 0b11, 4, None).unwrap();
        assert_eq!(once.eta.len(), 3);
        let twice = insert_disorder_line(&once, &path, 0b11, 4, None).unwrap();
        assert_eq!(twice, m);
        assert_eq!(insert_disorder_line(&m, &[(0, 0)], 1, 4, None).unwrap(), m);
        assert!(insert_disorder_line(&m, &path, 0b100, 4, None).is_err());
        assert!(insert_disorder_line(&m, &[(0, 0), (2, 0)], 1, 4, None).is_err());
    }

    #[test]
    fn reduced_masks() {
        assert_eq!(reduce_mask(0b0101).unwrap(), 0b01);
        assert_eq!(reduce_mask(0b0011).unwrap(), 0b11);
        assert_eq!(reduce_mask(0b1001).unwrap(), 0b10);
        assert!(reduce_mask(0b0001).is_err());
    }
}

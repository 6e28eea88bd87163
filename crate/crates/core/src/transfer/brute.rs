//! Torus partition functions: full enumeration for tiny lattices, traces of
//! row-step products, and symmetry-reduced traces with diagonal insertions.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{build_transfer, Rep, RowMasks};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::statmech::{insert_disorder_line, Bond, BondDir, ObservableSpec, StatMechModel};

/// Most spins (sites × flavors) handled by enumeration.
pub const BRUTE_SPIN_CAP: usize = 24;

#[derive(Debug, Clone, Serialize)]
pub struct BruteResult {
    /// `ln|Z|`.
    pub log_z: f64,
    /// Sign of `Z` (sign-indefinite tables can produce a negative sum).
    pub sign: f64,
    /// One value per requested observable: `⟨O_i O_j⟩` for order
    /// observables, `Z_seam / Z` for disorder observables and the product
    /// `⟨O_i O_j⟩_seam Z_seam / Z` for composites.
    pub observables: Vec<f64>,
}

struct Lattice {
    lx: usize,
    ly: usize,
}

impl Lattice {
    fn site(&self, x: isize, y: isize) -> usize {
        let xw = x.rem_euclid(self.lx as isize) as usize;
        let yw = y.rem_euclid(self.ly as isize) as usize;
        yw * self.lx + xw
    }
}

/// Sum of configuration weights with optional order insertions, in units of
/// `max|W|^{bonds}`.
fn scaled_sum(m: &StatMechModel, lat: &Lattice, inserts: &[(usize, u8)]) -> f64 {
    let d = m.d();
    let n = lat.lx * lat.ly;
    let scale = m.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    // (site a, site b, bond) triples with masks resolved up front.
    let mut bonds = Vec::with_capacity(2 * n);
    for y in 0..lat.ly {
        for x in 0..lat.lx {
            let a = y * lat.lx + x;
            let bh = Bond { dir: BondDir::H, x, y };
            let bv = Bond { dir: BondDir::V, x, y };
            bonds.push((a, lat.site(x as isize + 1, y as isize), m.mask(&bh) as usize));
            bonds.push((a, lat.site(x as isize, y as isize + 1), m.mask(&bv) as usize));
        }
    }
    let table: Vec<f64> = m.weights.iter().map(|w| w / scale).collect();
    let mut digits = vec![0usize; n];
    let total = d.pow(n as u32);
    // Compensated (Neumaier) summation; millions of terms otherwise drift by
    // more than the 1e-10 tolerance the oracle is held to.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for _ in 0..total {
        let mut w = 1.0;
        for &(a, b, mk) in &bonds {
            w *= table[digits[a] * d + (digits[b] ^ mk)];
            if w == 0.0 {
                break;
            }
        }
        if w != 0.0 {
            for &(s, mask) in inserts {
                if (digits[s] as u8 & mask).count_ones() % 2 == 1 {
                    w = -w;
                }
            }
            let t = sum + w;
            comp += if sum.abs() >= w.abs() { (sum - t) + w } else { (w - t) + sum };
            sum = t;
        }
        for dg in digits.iter_mut() {
            *dg += 1;
            if *dg < d {
                break;
            }
            *dg = 0;
        }
    }
    sum + comp
}

/// Exact enumeration on an `lx × ly` torus. Bond masks stored in the model
/// are honoured; a bond joining a site to itself uses `W(a, a)`.
pub fn brute_partition(
    m: &StatMechModel,
    lx: usize,
    ly: usize,
    observables: &[ObservableSpec],
) -> Result<BruteResult> {
    if lx == 0 || ly == 0 {
        return Err(Error::Geometry("torus sides must be positive".into()));
    }
    let spins = lx * ly * m.flavors;
    if spins > BRUTE_SPIN_CAP {
        return Err(Error::Size(format!(
            "{spins} spins exceed the enumeration cap of {BRUTE_SPIN_CAP}"
        )));
    }
    let lat = Lattice { lx, ly };
    let scale = m.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let z = scaled_sum(m, &lat, &[]);
    if z == 0.0 {
        return Err(Error::Degenerate("partition function vanishes".into()));
    }
    let mut values = Vec::with_capacity(observables.len());
    for o in observables {
        let seamed = if o.disorder_mask != 0 {
            insert_disorder_line(m, &o.path, o.disorder_mask, lx, Some(ly))?
        } else {
            m.clone()
        };
        let inserts: Vec<(usize, u8)> = if o.order_mask != 0 {
            vec![
                (lat.site(o.i.0, o.i.1), o.order_mask),
                (lat.site(o.j.0, o.j.1), o.order_mask),
            ]
        } else {
            Vec::new()
        };
        values.push(scaled_sum(&seamed, &lat, &inserts) / z);
    }
    Ok(BruteResult {
        log_z: z.abs().ln() + (2 * lx * ly) as f64 * scale.ln(),
        sign: z.signum(),
        observables: values,
    })
}

fn transposed(m: &StatMechModel) -> StatMechModel {
    let mut out = m.clone();
    out.eta = m
        .eta
        .iter()
        .map(|(b, &mk)| {
            let dir = match b.dir {
                BondDir::H => BondDir::V,
                BondDir::V => BondDir::H,
            };
            (Bond { dir, x: b.y, y: b.x }, mk)
        })
        .collect();
    out
}

/// `(ln|Z|, sign)` on an `lx × ly` torus as the trace of `ly` row steps,
/// honouring bond masks stored in the model. The shorter side is used as
/// the row when that shrinks the state space.
pub fn torus_log_partition(m: &StatMechModel, lx: usize, ly: usize) -> Result<(f64, f64)> {
    if lx == 0 || ly == 0 {
        return Err(Error::Geometry("torus sides must be positive".into()));
    }
    let (m, lx, ly) = if ly < lx {
        (transposed(m), ly, lx)
    } else {
        (m.clone(), lx, ly)
    };
    let scale = m.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let scaled = m.scaled(1.0 / scale);
    let t = build_transfer(&scaled, lx, Some(Rep::MatrixFree))?;
    let mut rows: BTreeMap<usize, RowMasks> = BTreeMap::new();
    for (b, &mk) in &m.eta {
        if b.x >= lx || b.y >= ly {
            return Err(Error::Geometry(format!("masked bond {b:?} outside the {lx}×{ly} torus")));
        }
        match b.dir {
            BondDir::H => rows.entry(b.y).or_insert_with(|| RowMasks::clean(lx)).h[b.x] ^= mk,
            BondDir::V => {
                rows.entry((b.y + 1) % ly).or_insert_with(|| RowMasks::clean(lx)).v[b.x] ^= mk
            }
        }
    }
    let clean = RowMasks::clean(lx);
    let mut total = 0.0;
    let mut v = vec![0.0; t.dim];
    let mut next = vec![0.0; t.dim];
    for c0 in 0..t.dim {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[c0] = 1.0;
        for k in 1..=ly {
            t.row_step(&v, &mut next, rows.get(&(k % ly)).unwrap_or(&clean));
            std::mem::swap(&mut v, &mut next);
        }
        total += v[c0];
    }
    if total == 0.0 {
        return Err(Error::Degenerate("partition function vanishes".into()));
    }
    Ok((total.abs().ln() + (2 * lx * ly) as f64 * scale.ln(), total.signum()))
}

/// Exact same-row two-point functions on an `l × l` torus, averaged over
/// positions: `G(r) = ⟨O_x O_{x+r}⟩` for each requested `r`.
///
/// Needs a symmetric, flip-invariant table and even `l`. Uses
/// `tr(M T^l) = Σ_c M(c) ‖T^{l/2} e_c‖²` with one representative per orbit
/// of row translations and global flavor flips.
pub fn torus_row_correlators(m: &StatMechModel, l: usize, mask: u8, rs: &[usize]) -> Result<Vec<f64>> {
    if l == 0 || l % 2 == 1 {
        return Err(Error::Geometry(format!("torus side {l} must be even and positive")));
    }
    if !m.eta.is_empty() {
        return Err(Error::Invalid("seamed models are not supported here".into()));
    }
    let t = build_transfer(m, l, Some(Rep::MatrixFree))?;
    if !t.symmetric || !m.is_flip_invariant(1e-14) {
        return Err(Error::Invalid("needs a symmetric flip-invariant table".into()));
    }
    let d = t.d();
    let pow: Vec<usize> = (0..l).map(|x| d.pow(x as u32)).collect();
    let digits = |c: usize| -> Vec<usize> { (0..l).map(|x| c / pow[x] % d).collect() };
    let encode = |dg: &[usize]| -> usize { dg.iter().zip(&pow).map(|(a, p)| a * p).sum() };
    let canonical = |c: usize| -> usize {
        let dg = digits(c);
        let mut best = usize::MAX;
        for g in 0..d {
            for s in 0..l {
                let img: Vec<usize> = (0..l).map(|x| dg[(x + s) % l] ^ g).collect();
                best = best.min(encode(&img));
            }
        }
        best
    };
    // Orbit sizes and orbit sums of the position-averaged insertions.
    let mut orbits: BTreeMap<usize, (f64, Vec<f64>)> = BTreeMap::new();
    for c in 0..t.dim {
        let dg = digits(c);
        let entry = orbits
            .entry(canonical(c))
            .or_insert_with(|| (0.0, vec![0.0; rs.len()]));
        entry.0 += 1.0;
        for (k, &r) in rs.iter().enumerate() {
            let mut acc = 0.0;
            for x in 0..l {
                let bits = (dg[x] ^ dg[(x + r) % l]) as u8 & mask;
                acc += if bits.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            }
            entry.1[k] += acc / l as f64;
        }
    }
    let mut z = 0.0;
    let mut num = vec![0.0; rs.len()];
    let mut v = vec![0.0; t.dim];
    let mut next = vec![0.0; t.dim];
    for (&rep, (count, sums)) in &orbits {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[rep] = 1.0;
        let mut log_n = 0.0;
        for _ in 0..l / 2 {
            t.apply(&v, &mut next);
            let nn = norm(&next);
            next.iter_mut().for_each(|x| *x /= nn);
            log_n += nn.ln();
            std::mem::swap(&mut v, &mut next);
        }
        let weight = (2.0 * log_n).exp();
        z += count * weight;
        for (a, s) in num.iter_mut().zip(sums) {
            *a += s * weight;
        }
    }
    Ok(num.into_iter().map(|a| a / z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{selfdual_couplings, ATCouplings};
    use crate::statmech::{at_model, column_path, coupled_model, fixed_point_model, ising_model, nflavor_model};

    #[test]
    fn single_site_torus() {
        let m = at_model(ATCouplings::finite(0.0, 0.0)).unwrap();
        let r = brute_partition(&m, 1, 1, &[]).unwrap();
        assert!((r.log_z - 4f64.ln()).abs() < 1e-14);
        let (lz, s) = torus_log_partition(&m, 1, 1).unwrap();
        assert!((lz - 4f64.ln()).abs() < 1e-14 && s == 1.0);
    }

    fn agree(m: &StatMechModel, lx: usize, ly: usize) {
        let a = brute_partition(m, lx, ly, &[]).unwrap();
        let (b, sb) = torus_log_partition(m, lx, ly).unwrap();
        assert!((a.log_z - b).abs() < 1e-10, "{} vs {}", a.log_z, b);
        assert_eq!(a.sign, sb);
    }

    #[test]
    fn enumeration_matches_trace() {
        agree(&at_model(selfdual_couplings(0.3).unwrap()).unwrap(), 3, 3);
        agree(&ising_model(0.44).unwrap(), 4, 5);
        agree(&coupled_model(0.5, 0.2).unwrap(), 2, 3);
        agree(&coupled_model(0.2, 0.45).unwrap(), 3, 2);
        agree(&nflavor_model(0.3, 0.2, 2).unwrap(), 3, 4);
        agree(&fixed_point_model(0.2, 0.6).unwrap(), 2, 3);
    }

    #[test]
    fn seamed_enumeration_matches_trace() {
        let m = at_model(selfdual_couplings(0.2).unwrap()).unwrap();
        let seamed = insert_disorder_line(&m, &[(0, 0), (0, 1), (1, 1), (1, 2)], 1, 3, Some(3)).unwrap();
        agree(&seamed, 3, 3);
        let spec = ObservableSpec::disorder("mu", 1, vec![(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        let r = brute_partition(&m, 3, 3, &[spec]).unwrap();
        let (lz, _) = torus_log_partition(&seamed, 3, 3).unwrap();
        assert!((r.observables[0] - (lz - r.log_z).exp()).abs() < 1e-12);
    }

    #[test]
    fn twice_inserted_seam_is_trivial() {
        let m = at_model(selfdual_couplings(0.2).unwrap()).unwrap();
        let path = column_path(1, 0, 2);
        let twice = insert_disorder_line(
            &insert_disorder_line(&m, &path, 3, 3, Some(3)).unwrap(),
            &path,
            3,
            3,
            Some(3),
        )
        .unwrap();
        assert_eq!(twice, m);
    }

    #[test]
    fn symmetry_reduced_trace_matches_enumeration() {
        let m = at_model(selfdual_couplings(0.3).unwrap()).unwrap();
        let g = torus_row_correlators(&m, 2, 3, &[0, 1]).unwrap();
        let spec = ObservableSpec::order("st", 3, (0, 0), (1, 0)).unwrap();
        let b = brute_partition(&m, 2, 2, &[spec]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[1] - b.observables[0]).abs() < 1e-12);
        let m = ising_model(0.4).unwrap();
        let g = torus_row_correlators(&m, 4, 1, &[2]).unwrap();
        let spec = ObservableSpec::order("s", 1, (1, 2), (1, 0)).unwrap();
        let b = brute_partition(&m, 4, 4, &[spec]).unwrap();
        assert!((g[0] - b.observables[0]).abs() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        let m = coupled_model(0.5, 0.2).unwrap();
        assert!(brute_partition(&m, 3, 3, &[]).is_err());
    }
}

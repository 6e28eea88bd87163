//! Expectation values on the infinite cylinder from the dominant left and
//! right eigenvectors of the unsplit row step `A = H ∘ V`.
//!
//! `r` is the half-infinite lower cylinder ending with the horizontal bonds
//! of its top row; `l` is the upper half-infinite cylinder attached through
//! one more vertical layer. A window of rows `y0..=y1` carrying insertions is
//! evaluated as `l · Ã_{y1} ⋯ Ã_{y0} r / (λ^{y1−y0+1} l · r)`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{RowMasks, TransferOperator, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, arnoldi, dot, ArnoldiOpts};
use crate::statmech::observables::crossed_bonds;
use crate::statmech::{BondDir, ObservableSpec};

/// Dominant eigenvalue and the fixed-point vectors of `A = H ∘ V`.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub lambda0: f64,
    /// `|λ1| / λ0` for the next eigenvalue, when computed.
    pub gap_ratio: f64,
    pub degenerate: bool,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub overlap: f64,
}

/// Dominant fixed point of the row step.
pub fn fixed_point(t: &TransferOperator) -> Result<FixedPoint> {
    let h = t.clean_row_weights();
    let (lambda0, ratio, left, right) = if t.symmetric {
        let (lam, ratio, phi) = symmetric_top(t)?;
        let right: Vec<f64> = phi.iter().zip(h).map(|(p, w)| p * w.sqrt()).collect();
        let left: Vec<f64> = phi
            .iter()
            .zip(h)
            .map(|(p, w)| if *w > 0.0 { p / w.sqrt() } else { 0.0 })
            .collect();
        (lam, ratio, left, right)
    } else {
        let opts = ArnoldiOpts {
            k: 2.min(t.dim),
            ..Default::default()
        };
        let scratch = std::cell::RefCell::new(vec![0.0; t.dim]);
        let rr = arnoldi(
            t.dim,
            |x, y| t.row_step(x, y, &RowMasks::clean(t.lx)),
            opts,
            None,
        )?;
        let ll = arnoldi(
            t.dim,
            |x, y| {
                let mut s = scratch.borrow_mut();
                s.iter_mut().zip(x.iter().zip(h)).for_each(|(o, (a, w))| *o = a * w);
                t.apply_vertical(&s, y, &vec![0; t.lx], true);
            },
            opts,
            None,
        )?;
        let lam = rr.values[0];
        if lam.im.abs() > 1e-10 * lam.norm() || lam.re <= 0.0 {
            return Err(Error::Degenerate(format!(
                "dominant row eigenvalue {lam} is not real positive"
            )));
        }
        let ratio = rr.values.get(1).map_or(0.0, |v| v.norm() / lam.norm());
        (lam.re, ratio, ll.real_vector(0), rr.real_vector(0))
    };
    let overlap = dot(&left, &right);
    if overlap.abs() < 1e-300 {
        return Err(Error::Degenerate("left and right fixed points are orthogonal".into()));
    }
    Ok(FixedPoint {
        lambda0,
        gap_ratio: ratio,
        degenerate: (1.0 - ratio).abs() <= DEGENERACY_TOL,
        left,
        right,
        overlap,
    })
}

fn symmetric_top(t: &TransferOperator) -> Result<(f64, f64, Vec<f64>)> {
    if let (Some(m), true) = (t.dense_matrix(), t.dim <= 2048) {
        let (vals, vecs) = linalg::eigh(m)?;
        let n = t.dim;
        let top = vals[n - 1];
        let second = if n > 1 {
            vals[n - 2].abs().max(vals[0].abs())
        } else {
            0.0
        };
        let phi = (0..n).map(|i| vecs[(i, n - 1)]).collect::<Vec<_>>();
        return Ok((top, second / top, fix_sign(phi)));
    }
    let r = arnoldi(
        t.dim,
        |x, y| t.apply(x, y),
        ArnoldiOpts {
            k: 2.min(t.dim),
            ..Default::default()
        },
        None,
    )?;
    let lam = r.values[0].re;
    let ratio = r.values.get(1).map_or(0.0, |v| v.norm() / lam);
    Ok((lam, ratio, fix_sign(r.real_vector(0))))
}

fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Per-row insertions inside an evaluation window.
#[derive(Debug, Clone, Default)]
struct Window {
    masks: BTreeMap<isize, RowMasks>,
    order: BTreeMap<isize, Vec<(usize, u8)>>,
}

impl Window {
    fn row(&mut self, y: isize, lx: usize) -> &mut RowMasks {
        self.masks.entry(y).or_insert_with(|| RowMasks::clean(lx))
    }
}

fn build_window(spec: &ObservableSpec, lx: usize) -> Result<Window> {
    let mut w = Window::default();
    let wrap = |x: isize| x.rem_euclid(lx as isize) as usize;
    if spec.order_mask != 0 {
        for &(x, y) in &[spec.i, spec.j] {
            w.order.entry(y).or_default().push((wrap(x), spec.order_mask));
        }
    }
    if spec.disorder_mask != 0 && spec.path.len() > 1 {
        for (dir, x, y) in crossed_bonds(&spec.path)? {
            match dir {
                BondDir::H => {
                    let row = w.row(y, lx);
                    row.h[wrap(x)] ^= spec.disorder_mask;
                }
                // A vertical bond between rows y and y+1 belongs to the step
                // that lands on row y+1.
                BondDir::V => {
                    let row = w.row(y + 1, lx);
                    row.v[wrap(x)] ^= spec.disorder_mask;
                }
            }
        }
    }
    Ok(w)
}

/// Expectation of an order, disorder or composite observable on the
/// infinite cylinder.
pub fn evaluate(t: &TransferOperator, fp: &FixedPoint, spec: &ObservableSpec) -> Result<f64> {
    let d = t.d();
    if spec.order_mask as usize >= d || spec.disorder_mask as usize >= d {
        return Err(Error::Invalid(format!(
            "observable `{}` uses flavors beyond the {} of the model",
            spec.label, t.model.flavors
        )));
    }
    let w = build_window(spec, t.lx)?;
    let rows: Vec<isize> = w.masks.keys().chain(w.order.keys()).copied().collect();
    let (Some(&y0), Some(&y1)) = (rows.iter().min(), rows.iter().max()) else {
        return Ok(1.0);
    };
    if y1 - y0 > 4096 {
        return Err(Error::Invalid("observable window taller than 4096 rows".into()));
    }
    let clean = RowMasks::clean(t.lx);
    let mut v = fp.right.clone();
    let mut next = vec![0.0; t.dim];
    for y in y0..=y1 {
        t.row_step(&v, &mut next, w.masks.get(&y).unwrap_or(&clean));
        if let Some(ins) = w.order.get(&y) {
            for (c, val) in next.iter_mut().enumerate() {
                let mut sign = 1.0;
                for &(x, mask) in ins {
                    if (t.site(c, x) as u8 & mask).count_ones() % 2 == 1 {
                        sign = -sign;
                    }
                }
                *val *= sign;
            }
        }
        // Rescale by λ0 each row to stay in floating-point range.
        let inv = 1.0 / fp.lambda0;
        next.iter_mut().for_each(|x| *x *= inv);
        std::mem::swap(&mut v, &mut next);
    }
    Ok(dot(&fp.left, &v) / fp.overlap)
}

/// Relative orientation of the two endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// Along the transfer direction (arbitrary separation).
    Column,
    /// Within one row (separation taken modulo the width).
    Row,
}

/// `⟨O_i O_{i+r}⟩` for an order mask.
pub fn two_point_order(
    t: &TransferOperator,
    fp: &FixedPoint,
    mask: u8,
    r: usize,
    dir: Direction,
) -> Result<f64> {
    if r > 64 {
        return Err(Error::Invalid(format!("separation {r} above 64")));
    }
    let j = match dir {
        Direction::Column => (0, r as isize),
        Direction::Row => (r as isize, 0),
    };
    let spec = ObservableSpec::order("order", mask, (0, 0), j)?;
    evaluate(t, fp, &spec)
}

/// Defect ratio `Z_seam / Z` for a seam along `path` with the given mask.
pub fn disorder_parameter(
    t: &TransferOperator,
    fp: &FixedPoint,
    path: &[(isize, isize)],
    mask: u8,
) -> Result<f64> {
    if path.len() <= 1 || mask == 0 {
        return Ok(1.0);
    }
    let spec = ObservableSpec::disorder("disorder", mask, path.to_vec())?;
    evaluate(t, fp, &spec)
}

/// Decay-rate classification over `r ∈ [r_max/2, r_max]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    /// Fitted `−d ln|G| / dr`.
    pub rate: f64,
    pub plateau: bool,
}

/// Plateau threshold on the fitted decay rate.
pub const PLATEAU_RATE: f64 = 1e-3;

/// Log-linear least-squares fit of `|G(r)|` over the upper half of the
/// sampled separations.
pub fn fit_decay(values: &[(usize, f64)]) -> Result<DecayFit> {
    let rmax = values.iter().map(|v| v.0).max().unwrap_or(0);
    let pts: Vec<(f64, f64)> = values
        .iter()
        .filter(|(r, _)| 2 * r >= rmax)
        .map(|&(r, g)| (r as f64, g.abs().max(1e-300).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Invalid("decay fit needs at least two separations".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate = -sxy / sxx;
    Ok(DecayFit {
        rate,
        plateau: rate.abs() < PLATEAU_RATE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{selfdual_couplings, ATCouplings};
    use crate::statmech::{at_model, column_path, coupled_model, ising_model};
    use crate::transfer::{brute_partition, build_transfer};

    fn at(p: f64, lx: usize) -> (TransferOperator, FixedPoint) {
        let t = build_transfer(&at_model(selfdual_couplings(p).unwrap()).unwrap(), lx, None).unwrap();
        let fp = fixed_point(&t).unwrap();
        (t, fp)
    }

    #[test]
    fn trivial_insertions() {
        let (t, fp) = at(0.3, 4);
        for mask in 1..4u8 {
            let g = two_point_order(&t, &fp, mask, 0, Direction::Column).unwrap();
            assert!((g - 1.0).abs() < 1e-12);
        }
        assert_eq!(disorder_parameter(&t, &fp, &[(0, 0)], 1).unwrap(), 1.0);
        let none = ObservableSpec::disorder("x", 1, vec![(2, 3)]).unwrap();
        assert!((evaluate(&t, &fp, &none).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_general_paths_agree() {
        let m = at_model(selfdual_couplings(0.3).unwrap()).unwrap();
        let t = build_transfer(&m, 3, None).unwrap();
        let a = fixed_point(&t).unwrap();
        let mut u = t.clone();
        u.symmetric = false;
        let b = fixed_point(&u).unwrap();
        assert!((a.lambda0 - b.lambda0).abs() < 1e-10 * a.lambda0);
        for r in [1, 3, 6] {
            let ga = two_point_order(&t, &a, 3, r, Direction::Column).unwrap();
            let gb = two_point_order(&u, &b, 3, r, Direction::Column).unwrap();
            assert!((ga - gb).abs() < 1e-9);
        }
    }

    #[test]
    fn ising_row_and_column_spectral_decay() {
        let t = build_transfer(&ising_model(0.3).unwrap(), 5, None).unwrap();
        let fp = fixed_point(&t).unwrap();
        let g: Vec<(usize, f64)> = (20..=40)
            .map(|r| (r, two_point_order(&t, &fp, 1, r, Direction::Column).unwrap()))
            .collect();
        let fit = fit_decay(&g).unwrap();
        let xi = crate::transfer::correlation_length(&t).unwrap().xi;
        assert!((fit.rate - 1.0 / xi).abs() < 1e-6);
    }

    #[test]
    fn homotopic_seams_agree() {
        let (t, fp) = at(0.3, 4);
        let straight = column_path(1, 0, 3);
        let detour = vec![(1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (1, 3)];
        for mask in 1..4u8 {
            let a = disorder_parameter(&t, &fp, &straight, mask).unwrap();
            let b = disorder_parameter(&t, &fp, &detour, mask).unwrap();
            assert!((a - b).abs() < 1e-10, "mask {mask}: {a} vs {b}");
        }
    }

    #[test]
    fn paramagnet_seam_is_nearly_free() {
        let m = at_model(ATCouplings::finite(0.01, 0.01)).unwrap();
        let t = build_transfer(&m, 4, None).unwrap();
        let fp = fixed_point(&t).unwrap();
        let g = disorder_parameter(&t, &fp, &column_path(0, 0, 16), 1).unwrap();
        assert!((g - 1.0).abs() < 1e-3, "{g}");
    }

    #[test]
    fn topological_phase_pattern() {
        let (t, fp) = at(0.3, 5);
        let s: Vec<(usize, f64)> = (10..=20)
            .map(|r| (r, two_point_order(&t, &fp, 1, r, Direction::Column).unwrap()))
            .collect();
        let st: Vec<(usize, f64)> = (10..=20)
            .map(|r| (r, two_point_order(&t, &fp, 3, r, Direction::Column).unwrap()))
            .collect();
        let mu: Vec<(usize, f64)> = (10..=20)
            .map(|r| (r, disorder_parameter(&t, &fp, &column_path(0, 0, r), 1).unwrap()))
            .collect();
        let (fs, fst, fmu) = (fit_decay(&s).unwrap(), fit_decay(&st).unwrap(), fit_decay(&mu).unwrap());
        assert!(fs.rate > 0.05 && fmu.rate > 0.05);
        assert!(fst.rate < fs.rate / 5.0);
        assert!(st[10].1 > 0.3);
    }

    #[test]
    fn matches_enumeration_on_small_torus_limit() {
        // A long torus converges to the cylinder value.
        let m = coupled_model(0.5, 0.2).unwrap();
        let t = build_transfer(&m, 2, None).unwrap();
        let fp = fixed_point(&t).unwrap();
        let spec = ObservableSpec::order("e", 1, (0, 0), (1, 0)).unwrap();
        let cyl = evaluate(&t, &fp, &spec).unwrap();
        let brute = brute_partition(&m, 2, 3, &[spec]).unwrap();
        assert!((brute.observables[0] - cyl).abs() < 0.05);
    }

    #[test]
    fn decay_fit_exact() {
        let g: Vec<(usize, f64)> = (0..=10).map(|r| (r, 2.0 * (-0.25 * r as f64).exp())).collect();
        let f = fit_decay(&g).unwrap();
        assert!((f.rate - 0.25).abs() < 1e-12 && !f.plateau);
    }
}

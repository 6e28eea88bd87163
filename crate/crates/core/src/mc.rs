//! Single-flip Markov-chain sampling of nonnegative models on a torus.
//!
//! Each proposal flips one flavor at one site and is accepted with the
//! heat-bath probability `w_new / (w_old + w_new)`. With sequential sweeps
//! the `min(1, w_new / w_old)` rule is periodic when all weights agree, so
//! it would never sample the uniform model.
//!
//! Randomness comes from ChaCha8, a counter-based stream cipher generator,
//! seeded from the 64-bit `seed` of the configuration, so identical inputs
//! give bit-identical estimates on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statmech::{Bond, BondDir, ObservableKind, ObservableSpec, StatMechModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCConfig {
    pub lx: usize,
    pub ly: usize,
    /// Total sweeps including thermalization.
    pub sweeps: usize,
    pub thermalization: usize,
    /// Sweeps between measurements.
    pub stride: usize,
    pub seed: u64,
    pub bins: usize,
    /// Also average each two-point function over the 90°-rotated
    /// displacement (square tori only).
    pub rotate: bool,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self {
            lx: 8,
            ly: 8,
            sweeps: 110_000,
            thermalization: 10_000,
            stride: 1,
            seed: 1,
            bins: 32,
            rotate: false,
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Error::Validation {
            field: field.into(),
            msg: msg.into(),
        };
        if self.lx == 0 || self.ly == 0 {
            return Err(bad("lx/ly", "lattice sides must be positive"));
        }
        if self.sweeps <= self.thermalization {
            return Err(bad("sweeps", "must exceed thermalization"));
        }
        if self.bins < 8 {
            return Err(bad("bins", "at least 8 bins are required"));
        }
        if self.stride == 0 {
            return Err(bad("stride", "must be positive"));
        }
        if (self.sweeps - self.thermalization) / self.stride < self.bins {
            return Err(bad("sweeps", "fewer measurements than bins"));
        }
        if self.rotate && self.lx != self.ly {
            return Err(bad("rotate", "rotation averaging needs a square torus"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    /// Standard error from binning.
    pub error: f64,
    /// Integrated autocorrelation time in measurement units (1 for
    /// independent samples).
    pub tau_int: f64,
    pub samples: usize,
}

/// Result of checking every table entry for negativity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityAudit {
    pub pass: bool,
    /// First negative entry `(a, b, W(a, b))`.
    pub witness: Option<(usize, usize, f64)>,
}

pub fn positivity_audit(m: &StatMechModel) -> PositivityAudit {
    let d = m.d();
    let witness = (0..d * d)
        .find(|&i| m.weights[i] < 0.0)
        .map(|i| (i / d, i % d, m.weights[i]));
    PositivityAudit {
        pass: witness.is_none(),
        witness,
    }
}

/// Binned mean and error plus the integrated autocorrelation time with
/// automatic windowing (`W ≥ 5 τ(W)`).
pub fn estimate_two_point(samples: &[f64], bins: usize) -> Result<MCEstimate> {
    if bins < 8 {
        return Err(Error::Invalid("at least 8 bins are required".into()));
    }
    let n = samples.len();
    if n < bins {
        return Err(Error::Invalid(format!("{n} samples cannot fill {bins} bins")));
    }
    let per = n / bins;
    let used = per * bins;
    // Deviations from the first sample keep a constant stream exactly zero.
    let x0 = samples[0];
    let bin_means: Vec<f64> = samples[..used]
        .chunks(per)
        .map(|c| c.iter().map(|x| x - x0).sum::<f64>() / per as f64)
        .collect();
    let shifted = bin_means.iter().sum::<f64>() / bins as f64;
    let mean = x0 + shifted;
    let var = bin_means.iter().map(|b| (b - shifted).powi(2)).sum::<f64>() / (bins - 1) as f64;
    let error = (var / bins as f64).sqrt();
    let full_mean = samples.iter().sum::<f64>() / n as f64;
    let c0 = samples.iter().map(|x| (x - full_mean).powi(2)).sum::<f64>() / n as f64;
    let mut tau = 1.0;
    if c0 > 0.0 {
        for t in 1..n / 2 {
            let ct = samples[..n - t]
                .iter()
                .zip(&samples[t..])
                .map(|(a, b)| (a - full_mean) * (b - full_mean))
                .sum::<f64>()
                / (n - t) as f64;
            tau += 2.0 * ct / c0;
            if t as f64 >= 5.0 * tau {
                break;
            }
        }
    }
    Ok(MCEstimate {
        mean,
        error,
        tau_int: tau.max(0.0),
        samples: n,
    })
}

/// Bonds `(site_a, site_b, mask)` of the torus with `W(a, b ⊕ mask)`.
fn torus_bonds(m: &StatMechModel, lx: usize, ly: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(2 * lx * ly);
    for y in 0..ly {
        for x in 0..lx {
            let a = y * lx + x;
            let h = Bond { dir: BondDir::H, x, y };
            let v = Bond { dir: BondDir::V, x, y };
            out.push((a, y * lx + (x + 1) % lx, m.mask(&h) as usize));
            out.push((a, ((y + 1) % ly) * lx + x, m.mask(&v) as usize));
        }
    }
    out
}

pub(crate) struct Chain<'a> {
    m: &'a StatMechModel,
    bonds: Vec<(usize, usize, usize)>,
    incident: Vec<Vec<usize>>,
    pub(crate) state: Vec<usize>,
    rng: ChaCha8Rng,
}

impl<'a> Chain<'a> {
    pub(crate) fn new(m: &'a StatMechModel, lx: usize, ly: usize, seed: u64) -> Self {
        let bonds = torus_bonds(m, lx, ly);
        let mut incident = vec![Vec::new(); lx * ly];
        for (k, &(a, b, _)) in bonds.iter().enumerate() {
            incident[a].push(k);
            if b != a {
                incident[b].push(k);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = m.d();
        let state = (0..lx * ly).map(|_| rng.random_range(0..d)).collect();
        Self {
            m,
            bonds,
            incident,
            state,
            rng,
        }
    }

    fn local(&self, site: usize) -> f64 {
        self.incident[site]
            .iter()
            .map(|&k| {
                let (a, b, mk) = self.bonds[k];
                self.m.w(self.state[a], self.state[b] ^ mk)
            })
            .product()
    }

    /// One sweep: for every flavor, a flip proposal at every site in order.
    pub(crate) fn sweep(&mut self) {
        for f in 0..self.m.flavors {
            for site in 0..self.state.len() {
                let old = self.local(site);
                self.state[site] ^= 1 << f;
                let new = self.local(site);
                let accept = self.rng.random::<f64>() * (old + new) < new;
                if !accept {
                    self.state[site] ^= 1 << f;
                }
            }
        }
    }
}

fn sign(state: usize, mask: u8) -> f64 {
    if (state as u8 & mask).count_ones() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Monte Carlo estimates of order two-point functions. Each measurement is
/// averaged over all translations of the pair when the model has no seams,
/// and additionally over the rotated pair when `cfg.rotate` is set.
pub fn mc_run(m: &StatMechModel, cfg: &MCConfig, observables: &[ObservableSpec]) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    let audit = positivity_audit(m);
    if let Some((a, b, w)) = audit.witness {
        return Err(Error::SignIndefinite(format!(
            "W({a}, {b}) = {w} < 0; the sampler needs nonnegative weights"
        )));
    }
    if m.constrained {
        return Err(Error::Constraint(
            "zero weights lock bond products; single flips are not ergodic".into(),
        ));
    }
    for o in observables {
        if o.kind() != ObservableKind::Order {
            return Err(Error::Invalid(format!(
                "observable `{}` is not an order two-point function",
                o.label
            )));
        }
        if o.order_mask as usize >= m.d() {
            return Err(Error::Invalid(format!("observable `{}` mask out of range", o.label)));
        }
    }
    let (lx, ly) = (cfg.lx, cfg.ly);
    let wrap = |x: isize, y: isize| -> usize {
        (y.rem_euclid(ly as isize) as usize) * lx + x.rem_euclid(lx as isize) as usize
    };
    // Site pairs entering each observable's per-measurement average.
    let pairs: Vec<Vec<(usize, usize)>> = observables
        .iter()
        .map(|o| {
            let (dx, dy) = (o.j.0 - o.i.0, o.j.1 - o.i.1);
            let mut shifts = vec![(dx, dy)];
            if cfg.rotate {
                shifts.push((-dy, dx));
            }
            if m.eta.is_empty() {
                let mut p = Vec::new();
                for &(sx, sy) in &shifts {
                    for y in 0..ly as isize {
                        for x in 0..lx as isize {
                            p.push((wrap(x, y), wrap(x + sx, y + sy)));
                        }
                    }
                }
                p
            } else {
                shifts
                    .iter()
                    .map(|&(sx, sy)| (wrap(o.i.0, o.i.1), wrap(o.i.0 + sx, o.i.1 + sy)))
                    .collect()
            }
        })
        .collect();
    let mut chain = Chain::new(m, lx, ly, cfg.seed);
    for _ in 0..cfg.thermalization {
        chain.sweep();
    }
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); observables.len()];
    for k in 0..cfg.sweeps - cfg.thermalization {
        chain.sweep();
        if (k + 1) % cfg.stride != 0 {
            continue;
        }
        for ((o, p), s) in observables.iter().zip(&pairs).zip(series.iter_mut()) {
            let v: f64 = p
                .iter()
                .map(|&(a, b)| sign(chain.state[a], o.order_mask) * sign(chain.state[b], o.order_mask))
                .sum::<f64>()
                / p.len() as f64;
            s.push(v);
        }
    }
    series.iter().map(|s| estimate_two_point(s, cfg.bins)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{selfdual_couplings, ATCouplings};
    use crate::statmech::{at_model, coupled_model};
    use crate::transfer::brute_partition;

    #[test]
    fn audits() {
        assert!(positivity_audit(&at_model(ATCouplings::finite(0.3, -0.2)).unwrap()).pass);
        assert!(positivity_audit(&coupled_model(0.2, 0.3).unwrap()).pass);
        let mut t = vec![1.0; 16];
        t[6] = -0.1;
        let m = StatMechModel::from_table(crate::statmech::ModelKind::Custom, &["s", "tau"], t).unwrap();
        let a = positivity_audit(&m);
        assert!(!a.pass && a.witness == Some((1, 2, -0.1)));
        let cfg = MCConfig {
            lx: 2,
            ly: 2,
            sweeps: 200,
            thermalization: 10,
            ..Default::default()
        };
        assert!(matches!(mc_run(&m, &cfg, &[]), Err(Error::SignIndefinite(_))));
        let locked = at_model(selfdual_couplings(0.0).unwrap()).unwrap();
        assert!(matches!(mc_run(&locked, &cfg, &[]), Err(Error::Constraint(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = MCConfig::default();
        assert!(c.validate().is_ok());
        c.bins = 4;
        assert!(c.validate().is_err());
        c = MCConfig {
            thermalization: c.sweeps,
            ..MCConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn constant_and_iid_streams() {
        let e = estimate_two_point(&vec![0.7; 1000], 10).unwrap();
        assert_eq!(e.error, 0.0);
        assert_eq!(e.mean, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let s: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let e = estimate_two_point(&s, 50).unwrap();
        let expect = 1.0 / (n as f64).sqrt();
        assert!((e.error / expect - 1.0).abs() < 0.3, "{} vs {expect}", e.error);
        assert!((e.tau_int - 1.0).abs() < 0.1);
        assert!(estimate_two_point(&s, 4).is_err());
    }

    #[test]
    fn correlated_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x = 0.0;
        let s: Vec<f64> = (0..50_000)
            .map(|_| {
                x = 0.9 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let e = estimate_two_point(&s, 20).unwrap();
        assert!(e.tau_int > 1.0);
        // Exact value for AR(1): (1 + φ)/(1 − φ) = 19.
        assert!((e.tau_int - 19.0).abs() < 5.0, "{}", e.tau_int);
    }

    #[test]
    fn independent_spins() {
        let m = at_model(ATCouplings::finite(0.0, 0.0)).unwrap();
        let o = ObservableSpec::order("s", 1, (0, 0), (2, 1)).unwrap();
        let cfg = MCConfig {
            lx: 4,
            ly: 4,
            sweeps: 4000,
            thermalization: 100,
            ..Default::default()
        };
        let e = mc_run(&m, &cfg, &[o]).unwrap()[0];
        assert!(e.mean.abs() < 3.0 * e.error + 1e-12, "{e:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let m = at_model(selfdual_couplings(0.3).unwrap()).unwrap();
        let o = ObservableSpec::order("st", 3, (0, 0), (0, 2)).unwrap();
        let cfg = MCConfig {
            lx: 4,
            ly: 4,
            sweeps: 2000,
            thermalization: 100,
            ..Default::default()
        };
        let a = mc_run(&m, &cfg, &[o.clone()]).unwrap();
        let b = mc_run(&m, &cfg, &[o]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn detailed_balance_two_by_two() {
        let m = at_model(ATCouplings::finite(0.3, 0.15)).unwrap();
        let mut chain = Chain::new(&m, 2, 2, 17);
        let d = m.d();
        let nstates = d.pow(4);
        let mut hist = vec![0u64; nstates];
        let sweeps = 1_000_000;
        // Histogram every tenth sweep so the recorded states are
        // effectively independent draws.
        let thin = 10;
        let draws = sweeps / thin;
        for _ in 0..1000 {
            chain.sweep();
        }
        for k in 0..sweeps {
            chain.sweep();
            if k % thin != 0 {
                continue;
            }
            let idx = chain.state.iter().rev().fold(0, |acc, &s| acc * d + s);
            hist[idx] += 1;
        }
        // Exact Boltzmann probabilities from the same bond list.
        let bonds = torus_bonds(&m, 2, 2);
        let weight = |idx: usize| -> f64 {
            let st: Vec<usize> = (0..4).map(|k| idx / d.pow(k) % d).collect();
            bonds.iter().map(|&(a, b, mk)| m.w(st[a], st[b] ^ mk)).product()
        };
        let z: f64 = (0..nstates).map(weight).sum();
        assert!((brute_partition(&m, 2, 2, &[]).unwrap().log_z - z.ln()).abs() < 1e-12);
        for idx in 0..nstates {
            let p = weight(idx) / z;
            let mean = p * draws as f64;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (hist[idx] as f64 - mean).abs() < 4.0 * sigma + 1.0,
                "state {idx}: {} vs {mean}",
                hist[idx]
            );
        }
    }
}

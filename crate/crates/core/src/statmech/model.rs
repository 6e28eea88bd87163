//! Edge-weight tables for the classical spin models.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use crate::couplings::{chamon_couplings, perturbed_params, ATCouplings, Coupling};
use crate::error::{Error, Result};

/// Largest number of Ising flavors per site.
pub const MAX_FLAVORS: usize = 4;

/// Provenance of a model, used for serialization and reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelKind {
    Ising { k: f64 },
    At { couplings: ATCouplings },
    Coupled { h: f64, p: f64 },
    FixedPoint { p: f64, theta: f64 },
    Nflavor { h: f64, p: f64, n: usize },
    Custom,
}

/// Orientation of a nearest-neighbour bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondDir {
    /// `(x, y)` to `(x+1, y)`, inside one transfer row.
    H,
    /// `(x, y)` to `(x, y+1)`, between consecutive rows.
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub dir: BondDir,
    pub x: usize,
    pub y: usize,
}

/// Isotropic nearest-neighbour model with `n` Ising flavors per site.
///
/// Local states are bitmasks `σ ∈ [0, 2^n)`, bit `f` set meaning flavor `f`
/// is −1. The same table is used on horizontal and vertical bonds. Bond
/// signs for disorder lines are stored as per-bond flavor masks: a bond
/// carrying mask `M` uses `W(a, b ⊕ M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatMechModel {
    pub kind: ModelKind,
    pub flavors: usize,
    pub flavor_names: Vec<String>,
    /// Row-major `d × d` table, `d = 2^flavors`.
    pub weights: Vec<f64>,
    pub eta: BTreeMap<Bond, u8>,
    pub sign_indefinite: bool,
    /// Some entries are exactly zero because of an infinite coupling.
    pub constrained: bool,
}

impl StatMechModel {
    pub fn from_table(kind: ModelKind, names: &[&str], weights: Vec<f64>) -> Result<Self> {
        let n = names.len();
        if n == 0 || n > MAX_FLAVORS {
            return Err(Error::Invalid(format!("{n} flavors")));
        }
        let d = 1usize << n;
        if weights.len() != d * d {
            return Err(Error::Invalid(format!(
                "weight table has {} entries, expected {}",
                weights.len(),
                d * d
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("non-finite weight".into()));
        }
        let sign_indefinite = weights.iter().any(|&w| w < 0.0);
        let constrained = weights.iter().any(|&w| w == 0.0);
        Ok(Self {
            kind,
            flavors: n,
            flavor_names: names.iter().map(|s| s.to_string()).collect(),
            weights,
            eta: BTreeMap::new(),
            sign_indefinite,
            constrained,
        })
    }

    /// Local state-space size `2^n`.
    pub fn d(&self) -> usize {
        1 << self.flavors
    }

    #[inline]
    pub fn w(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.d() + b]
    }

    /// Weight on a specific bond, honouring disorder masks.
    #[inline]
    pub fn bond_weight(&self, bond: &Bond, a: usize, b: usize) -> f64 {
        match self.eta.get(bond) {
            Some(&m) => self.w(a, b ^ m as usize),
            None => self.w(a, b),
        }
    }

    pub fn mask(&self, bond: &Bond) -> u8 {
        self.eta.get(bond).copied().unwrap_or(0)
    }

    pub fn flavor_index(&self, name: &str) -> Result<usize> {
        self.flavor_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::Invalid(format!("no flavor `{name}` in this model")))
    }

    /// Bitmask of a set of flavor names.
    pub fn mask_of(&self, names: &[&str]) -> Result<u8> {
        let mut m = 0u8;
        for n in names {
            m |= 1 << self.flavor_index(n)?;
        }
        Ok(m)
    }

    /// `W(a, b) = W(a ⊕ g, b ⊕ g)` for every single-flavor flip `g`.
    pub fn is_flip_invariant(&self, tol: f64) -> bool {
        let d = self.d();
        (0..self.flavors).all(|f| {
            let g = 1 << f;
            (0..d).all(|a| (0..d).all(|b| (self.w(a, b) - self.w(a ^ g, b ^ g)).abs() <= tol * self.w(a, b).abs().max(1.0)))
        })
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.d();
        (0..d).all(|a| (0..a).all(|b| self.w(a, b) == self.w(b, a)))
    }

    /// Whether the table depends only on the bond product `a ⊕ b`.
    pub fn is_product_form(&self) -> bool {
        let d = self.d();
        (0..d).all(|a| (0..d).all(|b| self.w(a, b) == self.w(0, a ^ b)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.weights.iter_mut().for_each(|w| *w *= s);
        m
    }

    /// JSON description for scan reproducibility.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "flavors": self.flavor_names,
            "couplings": self.kind,
            "eta_edges": self.eta.iter().map(|(b, m)| serde_json::json!({
                "dir": b.dir, "x": b.x, "y": b.y, "mask": m
            })).collect::<Vec<_>>(),
            "sign_indefinite": self.sign_indefinite,
        })
    }
}

#[inline]
pub(crate) fn spin(state: usize, flavor: usize) -> f64 {
    if state >> flavor & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Builds a table `W(a, b) = g(products)` where `products[f] = σ_f σ'_f`.
fn product_table(n: usize, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let d = 1usize << n;
    let mut out = vec![0.0; d * d];
    let mut prods = vec![0.0; n];
    for a in 0..d {
        for b in 0..d {
            let x = a ^ b;
            for (f, p) in prods.iter_mut().enumerate() {
                *p = spin(x, f);
            }
            out[a * d + b] = g(&prods);
        }
    }
    out
}

/// Single Ising flavor, `W = exp(K σσ')`.
pub fn ising_model(k: f64) -> Result<StatMechModel> {
    let t = product_table(1, |p| (k * p[0]).exp());
    StatMechModel::from_table(ModelKind::Ising { k }, &["s"], t)
}

/// Isotropic Ashkin–Teller model, `W = exp[K(ss′+ττ′) + K4 ss′ττ′]`.
///
/// The table is divided by `exp(2K + K4)` so the aligned entry is 1; an
/// infinite `K4` zeroes every entry with `ss′ττ′ = −1`, and an infinite `K`
/// keeps only the fully aligned configuration.
pub fn at_model(c: ATCouplings) -> Result<StatMechModel> {
    let t = product_table(2, |p| {
        let (ss, tt) = (p[0], p[1]);
        let four = ss * tt;
        let k4_part = match c.k4 {
            Coupling::Infinite => {
                if four < 0.0 {
                    return 0.0;
                }
                1.0
            }
            Coupling::Finite(k4) => (k4 * (four - 1.0)).exp(),
        };
        let k_part = match c.k {
            Coupling::Infinite => {
                if ss < 0.0 || tt < 0.0 {
                    return 0.0;
                }
                1.0
            }
            Coupling::Finite(k) => (k * (ss + tt - 2.0)).exp(),
        };
        k_part * k4_part
    });
    StatMechModel::from_table(ModelKind::At { couplings: c }, &["s", "tau"], t)
}

/// Single-copy self-dual weight `ω(a, b; g) = √2+g + g(a+b) + (√2−g)ab`.
pub fn omega(a: f64, b: f64, g: f64) -> f64 {
    SQRT_2 + g + g * (a + b) + (SQRT_2 - g) * a * b
}

/// `g · ω(a, b; 1/g)`, finite as `g → 0`.
fn omega_inv_scaled(a: f64, b: f64, g: f64) -> f64 {
    g * SQRT_2 + 1.0 + (a + b) + (g * SQRT_2 - 1.0) * a * b
}

/// Four-flavor model of the perturbed toric code under the self-dual
/// channel: `ω(h′)ω̄(h′) + f ω(1/h′)ω̄(1/h′)` with flavors `(z, t, z̄, t̄)`.
pub fn coupled_model(h: f64, p: f64) -> Result<StatMechModel> {
    if h <= 0.0 {
        return Err(Error::Domain(
            "coupled model needs h > 0; use the Ashkin–Teller model at h = 0".into(),
        ));
    }
    let pp = perturbed_params(h, p)?;
    let g = pp.h_prime;
    // f ω(1/h′)ω̄(1/h′) = λ · [h′ω(1/h′)] · [h′ω̄(1/h′)]
    let t = product_table(4, |x| {
        let (z, t, zb, tb) = (x[0], x[1], x[2], x[3]);
        omega(z, t, g) * omega(zb, tb, g)
            + pp.lambda * omega_inv_scaled(z, t, g) * omega_inv_scaled(zb, tb, g)
    });
    StatMechModel::from_table(ModelKind::Coupled { h, p }, &["z", "t", "zb", "tb"], t)
}

/// Four-flavor model of the fixed-point toric code under the general-angle
/// channel, before eliminating `t̄`.
pub fn fixed_point_model(p: f64, theta: f64) -> Result<StatMechModel> {
    let (c1, c2) = fixed_point_coefficients(p, theta)?;
    let t = product_table(4, |x| {
        let (z, t, zb, tb) = (x[0], x[1], x[2], x[3]);
        1.0 + z * t * zb * tb + c1 * (t * z + tb * zb) + c2 * (t * tb + z * zb + t * zb + tb * z)
    });
    StatMechModel::from_table(ModelKind::FixedPoint { p, theta }, &["z", "t", "zb", "tb"], t)
}

/// `(c1, c2) = ((1−λc)/(1+λc), λs/(1+λc))` with `c = cos²θ`, `s = sin²θ`.
pub fn fixed_point_coefficients(p: f64, theta: f64) -> Result<(f64, f64)> {
    let (r1, r2) = crate::couplings::general_rhs(p, theta)?;
    Ok((r2, r1))
}

/// Replica model of the phase-flipped plaquette-loop state.
///
/// `W = exp Σ_s [K σ_sσ′_s + (K4/2) σ_sσ′_s σ_{s+1}σ′_{s+1} ]` (flavor index
/// mod n), with `K = ln((1+h)/(1−h))` and `K4 = −ln(1−2p)`. For `n = 2` the
/// two four-spin terms coincide and the table is the Ashkin–Teller model
/// with couplings `(K, K4)`.
pub fn nflavor_model(h: f64, p: f64, n: usize) -> Result<StatMechModel> {
    if !(2..=MAX_FLAVORS).contains(&n) {
        return Err(Error::Invalid(format!("replica count {n} outside [2, {MAX_FLAVORS}]")));
    }
    let (k, k4) = chamon_couplings(h, p)?;
    let (k, k4) = match (k, k4) {
        (Coupling::Finite(a), Coupling::Finite(b)) => (a, b),
        _ => {
            return Err(Error::Domain(
                "replica model needs h < 1 and p < 1/2 (finite couplings)".into(),
            ))
        }
    };
    let t = product_table(n, |x| {
        let mut e = 0.0;
        for s in 0..n {
            let nx = (s + 1) % n;
            e += k * (x[s] - 1.0) + 0.5 * k4 * (x[s] * x[nx] - 1.0);
        }
        e.exp()
    });
    let names: Vec<String> = (1..=n).map(|s| format!("sigma{s}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    StatMechModel::from_table(ModelKind::Nflavor { h, p, n }, &refs, t)
}

/// Result of eliminating `t̄` from the four-flavor fixed-point model.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// Two-flavor model over `s = z z̄`, `τ = t z̄`.
    pub model: StatMechModel,
    /// Per-bond factor: the four-flavor weight equals `bond_factor` times the
    /// reduced weight whenever the eight-spin constraint holds.
    pub bond_factor: f64,
}

impl Reduction {
    /// `ln Z4 − ln Z2` on a torus with `nv` sites and `ne` bonds: the `z̄`
    /// gauge freedom gives `2^nv`, the global sign of `t̄` gives 2.
    pub fn log_ratio(&self, nv: usize, ne: usize) -> f64 {
        (nv as f64 + 1.0) * std::f64::consts::LN_2 + ne as f64 * self.bond_factor.ln()
    }
}

/// Eliminates `t̄` using the per-bond constraint `zz′ z̄z̄′ tt′ t̄t̄′ = 1`.
pub fn reduce_fixed_point(m: &StatMechModel) -> Result<Reduction> {
    if m.flavors != 4 || !m.is_product_form() {
        return Err(Error::Invalid("reduction needs a four-flavor product-form table".into()));
    }
    // Check the constraint: every entry with odd total parity vanishes.
    for x in 0..16usize {
        if x.count_ones() % 2 == 1 && m.w(0, x).abs() > 1e-14 * m.w(0, 0).abs() {
            return Err(Error::Invalid(
                "table violates the eight-spin constraint; cannot eliminate t̄".into(),
            ));
        }
    }
    // Reduced bond products: with z̄z̄′ = +1 the remaining products are
    // zz′ = s-product, tt′ = τ-product and t̄t̄′ = their product.
    let w0 = m.w(0, 0);
    if w0 <= 0.0 {
        return Err(Error::Invalid("aligned four-flavor weight must be positive".into()));
    }
    let t = product_table(2, |x| {
        let (s, tau) = (x[0] < 0.0, x[1] < 0.0);
        let bits = usize::from(s) | usize::from(tau) << 1 | usize::from(s ^ tau) << 3;
        m.w(0, bits) / w0
    });
    let model = StatMechModel::from_table(m.kind.clone(), &["s", "tau"], t)?;
    Ok(Reduction {
        model,
        bond_factor: w0,
    })
}

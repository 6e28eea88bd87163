//! Channel parameters (p, θ, h) and the classical couplings they induce.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Tolerance used by identity checks in this module.
pub const IDENTITY_TOL: f64 = 1e-12;

/// A coupling constant that may be infinite.
///
/// An infinite coupling is a hard constraint: the corresponding spin product
/// is locked to +1. Weight builders treat it as a zero-weight mask instead of
/// exponentiating a huge float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Coupling {
    Finite(f64),
    Infinite,
}

impl Coupling {
    /// Builds a coupling from `tanh K`, flagging `t = 1` as infinite.
    pub fn from_tanh(t: f64) -> Self {
        if t >= 1.0 {
            Coupling::Infinite
        } else {
            Coupling::Finite(t.atanh())
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Coupling::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Coupling::Finite(k) => Some(k),
            Coupling::Infinite => None,
        }
    }

    /// `tanh K`, equal to 1 for an infinite coupling.
    pub fn tanh(&self) -> f64 {
        match *self {
            Coupling::Finite(k) => k.tanh(),
            Coupling::Infinite => 1.0,
        }
    }

    /// Float view with `f64::INFINITY` for the flagged case.
    pub fn value(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Error rate, channel angle and pure-state perturbation strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub p: f64,
    pub theta: f64,
    pub h: f64,
}

impl ChannelSpec {
    pub fn new(p: f64, theta: f64, h: f64) -> Result<Self> {
        check_p(p)?;
        check_theta(theta)?;
        check_h(h)?;
        Ok(Self { p, theta, h })
    }
}

/// Two-spin and four-spin couplings of an isotropic Ashkin–Teller model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ATCouplings {
    pub k: Coupling,
    pub k4: Coupling,
}

impl ATCouplings {
    pub fn finite(k: f64, k4: f64) -> Self {
        Self {
            k: Coupling::Finite(k),
            k4: Coupling::Finite(k4),
        }
    }
}

/// Renormalized parameters of the perturbed toric-code model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedParams {
    pub h_prime: f64,
    pub f: f64,
    pub lambda: f64,
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if (0.0..=0.5).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("p out of [0, 0.5]: {p}")))
    }
}

pub(crate) fn check_h(h: f64) -> Result<()> {
    if (0.0..=1.0).contains(&h) {
        Ok(())
    } else {
        Err(Error::Domain(format!("h out of [0, 1]: {h}")))
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=FRAC_PI_2 + 1e-15).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta out of [0, pi/2]: {theta}")))
    }
}

/// Effective error strength λ = 2p(1−p)/(1−2p+2p²).
pub fn lambda_of_p(p: f64) -> Result<f64> {
    check_p(p)?;
    let q = 2.0 * p * (1.0 - p);
    Ok(q / (1.0 - q))
}

/// Couplings on the self-dual line for the θ = π/4 channel.
///
/// Returns the flagged limit (0, ∞) at p = 0.
pub fn selfdual_couplings(p: f64) -> Result<ATCouplings> {
    let lam = lambda_of_p(p)?;
    if lam == 0.0 {
        return Ok(ATCouplings {
            k: Coupling::Finite(0.0),
            k4: Coupling::Infinite,
        });
    }
    let r = (4.0 - lam * lam).sqrt();
    // (2 - r)/λ rewritten as λ/(2 + r) to avoid cancellation at small λ.
    let a = lam / (2.0 + r);
    let b = (2.0 - lam * r) / (2.0 - lam * lam);
    Ok(ATCouplings {
        k: Coupling::from_tanh(a),
        k4: Coupling::from_tanh(b),
    })
}

/// Couplings for a general channel angle θ.
///
/// Writing a = tanh K, b = tanh K4, c = cos²θ and s = sin²θ, the defining
/// system is
///
/// ```text
/// a(1+b)/(1+a²b) = λs/(1+λc)
/// (a²+b)/(1+a²b) = (1−λc)/(1+λc)
/// ```
///
/// Solving the second equation for b and substituting collapses the first to
/// 2a/(1+a²) = λs, a quadratic with a unique root in [0, 1].
pub fn general_couplings(p: f64, theta: f64) -> Result<ATCouplings> {
    let lam = lambda_of_p(p)?;
    check_theta(theta)?;
    let (sn, cs) = theta.sin_cos();
    let s = sn * sn;
    // cos(π/2) is 6e−17 in floating point; treat it as an exact zero.
    let c = if cs.abs() < 1e-15 { 0.0 } else { cs * cs };
    let x = lam * s;
    let a = if x >= 1.0 {
        1.0
    } else {
        x / (1.0 + (1.0 - x * x).sqrt())
    };
    let r2 = (1.0 - lam * c) / (1.0 + lam * c);
    // 1 − b = (1 − R2)(1 + a²)/(1 − R2 a²), with 1 − R2 = 2λc/(1+λc).
    let one_minus_r2 = 2.0 * lam * c / (1.0 + lam * c);
    let denom = 1.0 - r2 * a * a;
    let k4 = if one_minus_r2 == 0.0 {
        Coupling::Infinite
    } else if denom <= 0.0 {
        // a = 1 and R2 = 1 together only happen at λc = 0, handled above;
        // any remaining degeneracy is resolved by bracketing.
        Coupling::from_tanh(bracket_b(a, r2))
    } else {
        let omb = one_minus_r2 * (1.0 + a * a) / denom;
        if omb <= 0.0 {
            Coupling::Infinite
        } else {
            // atanh(b) = ½ ln((2 − (1 − b))/(1 − b))
            Coupling::Finite(0.5 * ((2.0 - omb) / omb).ln())
        }
    };
    Ok(ATCouplings {
        k: Coupling::from_tanh(a),
        k4,
    })
}

/// Bisection for b on [0, 1] in (a² + b)/(1 + a²b) = r2.
fn bracket_b(a: f64, r2: f64) -> f64 {
    let g = |b: f64| (a * a + b) / (1.0 + a * a * b) - r2;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if g(lo) >= 0.0 {
        return 0.0;
    }
    if g(hi) <= 0.0 {
        return 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Right-hand sides of the general-angle system, for residual checks.
pub fn general_rhs(p: f64, theta: f64) -> Result<(f64, f64)> {
    let lam = lambda_of_p(p)?;
    let (sn, cs) = theta.sin_cos();
    let (s, c) = (sn * sn, cs * cs);
    Ok((lam * s / (1.0 + lam * c), (1.0 - lam * c) / (1.0 + lam * c)))
}

/// Left-hand sides of the general-angle system evaluated at given couplings.
pub fn general_lhs(c: &ATCouplings) -> (f64, f64) {
    let a = c.k.tanh();
    let b = c.k4.tanh();
    let d = 1.0 + a * a * b;
    (a * (1.0 + b) / d, (a * a + b) / d)
}

/// exp(−2K4) − sinh(2K); zero on the self-dual line.
pub fn selfduality_residual(c: &ATCouplings) -> f64 {
    let e = match c.k4 {
        Coupling::Finite(k4) => (-2.0 * k4).exp(),
        Coupling::Infinite => 0.0,
    };
    let s = match c.k {
        Coupling::Finite(k) => (2.0 * k).sinh(),
        Coupling::Infinite => f64::INFINITY,
    };
    e - s
}

/// h′ = 2h/(1+h²), λ(p) and f = λh′².
pub fn perturbed_params(h: f64, p: f64) -> Result<PerturbedParams> {
    check_h(h)?;
    let lambda = lambda_of_p(p)?;
    let h_prime = 2.0 * h / (1.0 + h * h);
    Ok(PerturbedParams {
        h_prime,
        f: lambda * h_prime * h_prime,
        lambda,
    })
}

/// Couplings of the phase-flipped plaquette-loop state: K = ln((1+h)/(1−h))
/// and K4 = −ln(1−2p).
pub fn chamon_couplings(h: f64, p: f64) -> Result<(Coupling, Coupling)> {
    check_h(h)?;
    check_p(p)?;
    let k = if h >= 1.0 {
        Coupling::Infinite
    } else {
        Coupling::Finite(h.ln_1p() - (-h).ln_1p())
    };
    let k4 = if p >= 0.5 {
        Coupling::Infinite
    } else {
        Coupling::Finite(-(-2.0 * p).ln_1p())
    };
    Ok((k, k4))
}

/// Numerical location of the n = 2 transition along h at p = 0, used as an
/// anchor for the replica scan.
pub const CHAMON_HC_ANCHOR: f64 = 0.217;

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_of_p(0.0).unwrap(), 0.0);
        assert!((lambda_of_p(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambda_of_p(0.3).unwrap() - 21.0 / 29.0).abs() < 1e-15);
        assert!(lambda_of_p(0.7).is_err());
        assert!(lambda_of_p(-0.1).is_err());
    }

    #[test]
    fn selfdual_limits() {
        let c = selfdual_couplings(0.0).unwrap();
        assert_eq!(c.k, Coupling::Finite(0.0));
        assert!(c.k4.is_infinite());
        let half = selfdual_couplings(0.5).unwrap();
        let target = (2.0 - 3f64.sqrt()).atanh();
        assert!((half.k.value() - target).abs() < 1e-14);
        assert!((half.k4.value() - target).abs() < 1e-14);
    }

    #[test]
    fn selfdual_p03_frozen() {
        // Independent evaluation: tanh K = (2 − √(4−λ²))/λ directly, then
        // b from exp(−2K4) = sinh 2K.
        let lam: f64 = 21.0 / 29.0;
        let a = (2.0 - (4.0 - lam * lam).sqrt()) / lam;
        let k = a.atanh();
        let k4 = -0.5 * (2.0 * k).sinh().ln();
        let c = selfdual_couplings(0.3).unwrap();
        assert!((c.k.value() - k).abs() < 1e-13);
        assert!((c.k4.value() - k4).abs() < 1e-13);
        assert!((c.k.value() - 0.1896).abs() < 5e-5);
        // The quoted 0.4727 is rounded; the oracle above gives 0.47283.
        assert!((c.k4.value() - 0.4727).abs() < 2e-4);
    }

    #[test]
    fn general_pure_x() {
        let c = general_couplings(0.3, FRAC_PI_2).unwrap();
        assert!((c.k.tanh() - 3.0 / 7.0).abs() < 1e-14);
        assert!((c.k.value() - 0.5 * 2.5f64.ln()).abs() < 1e-14);
        assert!(c.k4.is_infinite());
        let z = general_couplings(0.0, 0.7).unwrap();
        assert_eq!(z.k, Coupling::Finite(0.0));
        assert!(z.k4.is_infinite());
    }

    #[test]
    fn general_matches_selfdual() {
        for i in 1..=50 {
            let p = 0.5 * i as f64 / 50.0;
            let a = general_couplings(p, FRAC_PI_4).unwrap();
            let b = selfdual_couplings(p).unwrap();
            assert!((a.k.value() - b.k.value()).abs() < IDENTITY_TOL, "p={p}");
            assert!((a.k4.value() - b.k4.value()).abs() < IDENTITY_TOL, "p={p}");
        }
    }

    #[test]
    fn residual_examples() {
        let r = selfduality_residual(&ATCouplings::finite(0.5, 0.5));
        assert!((r - ((-1f64).exp() - 1f64.sinh())).abs() < 1e-15);
        assert!((r + 0.8073).abs() < 1e-4);
        let lim = selfduality_residual(&ATCouplings {
            k: Coupling::Finite(0.0),
            k4: Coupling::Infinite,
        });
        assert_eq!(lim, 0.0);
    }

    #[test]
    fn perturbed_examples() {
        let pp = perturbed_params(0.2, 0.3).unwrap();
        assert!((pp.h_prime - 0.4 / 1.04).abs() < 1e-15);
        assert!((pp.f - 21.0 / 29.0 * (0.4f64 / 1.04).powi(2)).abs() < 1e-15);
        assert!((pp.h_prime - 0.384615).abs() < 1e-6);
        assert!((pp.f - 0.107122).abs() < 2e-6);
        assert_eq!(perturbed_params(1.0, 0.37).unwrap().h_prime, 1.0);
        assert_eq!(perturbed_params(0.4, 0.0).unwrap().f, 0.0);
    }

    #[test]
    fn chamon_examples() {
        let (k, k4) = chamon_couplings(0.2, 0.1).unwrap();
        assert!((k.value() - 1.5f64.ln()).abs() < 1e-15);
        assert!((k4.value() + 0.8f64.ln()).abs() < 1e-15);
        let (k, k4) = chamon_couplings(0.0, 0.0).unwrap();
        assert_eq!((k.value(), k4.value()), (0.0, 0.0));
        let (k, k4) = chamon_couplings(1.0, 0.5).unwrap();
        assert!(k.is_infinite() && k4.is_infinite());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn selfdual_line(p in 1e-6f64..=0.5) {
                let c = selfdual_couplings(p).unwrap();
                prop_assert!(selfduality_residual(&c).abs() < IDENTITY_TOL);
            }

            #[test]
            fn lambda_monotone(p in 0.0f64..0.5, dp in 1e-9f64..0.1) {
                let q = (p + dp).min(0.5);
                prop_assume!(q > p);
                let (a, b) = (lambda_of_p(p).unwrap(), lambda_of_p(q).unwrap());
                prop_assert!(b > a);
                prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            }

            #[test]
            fn selfdual_monotone(p in 1e-4f64..0.49, dp in 1e-6f64..0.01) {
                let q = (p + dp).min(0.5);
                let (a, b) = (selfdual_couplings(p).unwrap(), selfdual_couplings(q).unwrap());
                prop_assert!(b.k.value() > a.k.value());
                prop_assert!(b.k4.value() < a.k4.value());
            }

            #[test]
            fn general_solves_system(p in 1e-3f64..=0.5, theta in 0.0f64..=FRAC_PI_2) {
                let c = general_couplings(p, theta).unwrap();
                let (l1, l2) = general_lhs(&c);
                let (r1, r2) = general_rhs(p, theta).unwrap();
                prop_assert!((l1 - r1).abs() < 1e-10);
                prop_assert!((l2 - r2).abs() < 1e-10);
            }
        }
    }
}

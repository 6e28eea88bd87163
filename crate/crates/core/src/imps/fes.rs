//! Finite-entanglement scaling: a ladder of bond dimensions and the central
//! charge from `S ≈ (c/6) ln ξ`, with `S ≈ (c κ/6) ln χ` as a cross-check.

use serde::{Deserialize, Serialize};

use super::{
    entanglement_entropy, fixed_point_from, log_eigenvalue_per_site, mps_correlation_length,
    MpsOptions, RowMPO, VidalCell,
};
use crate::error::{Error, Result};

/// One rung of the bond-dimension ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FesSample {
    pub chi: usize,
    pub xi: f64,
    pub s: f64,
    /// Reduced free energy density `−ln λ` per site.
    pub free_energy: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Bond dimensions admitted into the regression (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitWindow {
    pub min_chi: Option<usize>,
    pub max_chi: Option<usize>,
}

impl FitWindow {
    pub fn from_min(min_chi: usize) -> Self {
        Self {
            min_chi: Some(min_chi),
            max_chi: None,
        }
    }

    pub fn admits(&self, chi: usize) -> bool {
        self.min_chi.is_none_or(|m| chi >= m) && self.max_chi.is_none_or(|m| chi <= m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FESFit {
    /// Samples entering the fit.
    pub samples: Vec<FesSample>,
    pub window: FitWindow,
    /// Six times the slope of `S` against `ln ξ`.
    pub c: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the `S` vs `ln ξ` line.
    pub residual: f64,
    /// Slope of `S` against `ln χ`.
    pub chi_slope: f64,
    /// `κ(c)` at the fitted `c`.
    pub kappa: f64,
    /// `chi_slope − c κ(c) / 6`.
    pub kappa_mismatch: f64,
}

/// `κ(c) = 6 / (√(12c) + c)`.
pub fn kappa(c: f64) -> f64 {
    6.0 / ((12.0 * c).sqrt() + c)
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Least-squares central charge over the samples admitted by `window`.
pub fn fit_central_charge(samples: &[FesSample], window: FitWindow) -> Result<FESFit> {
    if samples.windows(2).any(|w| w[1].chi <= w[0].chi) {
        return Err(Error::Invalid("bond dimensions must be strictly increasing".into()));
    }
    let used: Vec<FesSample> = samples.iter().copied().filter(|s| window.admits(s.chi)).collect();
    if used.len() < 4 {
        return Err(Error::Invalid(format!(
            "central-charge fit needs at least 4 samples, window admits {}",
            used.len()
        )));
    }
    if used.iter().any(|s| !(s.xi.is_finite() && s.xi > 0.0)) {
        return Err(Error::Invalid("correlation lengths must be finite and positive".into()));
    }
    let (slope, intercept, residual) =
        line_fit(&used.iter().map(|s| (s.xi.ln(), s.s)).collect::<Vec<_>>());
    let (chi_slope, _, _) = line_fit(&used.iter().map(|s| ((s.chi as f64).ln(), s.s)).collect::<Vec<_>>());
    let c = 6.0 * slope;
    let k = if c > 0.0 { kappa(c) } else { f64::NAN };
    Ok(FESFit {
        samples: used,
        window,
        c,
        intercept,
        residual,
        chi_slope,
        kappa: k,
        kappa_mismatch: chi_slope - c * k / 6.0,
    })
}

/// Central charge for every window that drops the `k` smallest bond
/// dimensions, as long as four samples remain.
pub fn window_sensitivity(samples: &[FesSample]) -> Vec<(usize, f64)> {
    (0..samples.len().saturating_sub(3))
        .filter_map(|k| {
            let w = FitWindow::from_min(samples[k].chi);
            fit_central_charge(samples, w).ok().map(|f| (samples[k].chi, f.c))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FesOptions {
    pub mps: MpsOptions,
    /// Start each rung from the previous converged cell.
    pub warm_start: bool,
}

impl Default for FesOptions {
    fn default() -> Self {
        Self {
            mps: MpsOptions::default(),
            warm_start: false,
        }
    }
}

/// Default bond-dimension ladder.
pub const DEFAULT_LADDER: [usize; 6] = [8, 12, 16, 24, 32, 48];
/// Smallest bond dimension entering the default fit.
pub const DEFAULT_MIN_CHI: usize = 16;

/// Runs the fixed-point solver along a ladder of bond dimensions.
pub fn run_fes(mpo: &RowMPO, chis: &[usize], opts: FesOptions) -> Result<Vec<FesSample>> {
    let mut out = Vec::with_capacity(chis.len());
    let mut warm: Option<VidalCell> = None;
    for &chi in chis {
        let psi = fixed_point_from(mpo, chi, opts.mps, if opts.warm_start { warm.as_ref() } else { None })?;
        let lnl = log_eigenvalue_per_site(&psi, mpo.weights())?;
        out.push(FesSample {
            chi,
            xi: mps_correlation_length(&psi),
            s: entanglement_entropy(&psi),
            free_energy: -lnl,
            iters: psi.iterations,
            converged: psi.converged,
        });
        warm = Some(psi.tensors);
    }
    Ok(out)
}

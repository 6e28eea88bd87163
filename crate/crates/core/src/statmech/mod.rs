//! Classical spin models produced by the mappings, with disorder lines,
//! the anyon dictionary and a Kramers–Wannier duality check.

pub mod model;
pub mod observables;

pub use model::{
    at_model, coupled_model, fixed_point_model, ising_model, nflavor_model, omega,
    reduce_fixed_point, Bond, BondDir, ModelKind, Reduction, StatMechModel,
};
pub use observables::{
    anyon_observable, column_path, insert_disorder_line, row_path, ObservableKind, ObservableSpec,
};

use crate::error::{Error, Result};

/// Kramers–Wannier dual of a product-form table: the Fourier transform over
/// bond products, `w̃(k) = Σ_x (−1)^{k·x} w(x)`.
pub fn dual_table(m: &StatMechModel) -> Result<Vec<f64>> {
    if !m.is_product_form() {
        return Err(Error::Invalid("duality needs a table depending only on bond products".into()));
    }
    let d = m.d();
    Ok((0..d)
        .map(|k| {
            (0..d)
                .map(|x| {
                    let sign = if (k & x).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                    sign * m.w(0, x)
                })
                .sum()
        })
        .collect())
}

/// Largest deviation between the normalized table and its normalized dual.
/// Zero exactly on the self-dual manifold.
pub fn kramers_wannier_residual(m: &StatMechModel) -> Result<f64> {
    let dual = dual_table(m)?;
    let w0 = m.w(0, 0);
    Ok((0..m.d())
        .map(|x| (dual[x] / dual[0] - m.w(0, x) / w0).abs())
        .fold(0.0, f64::max))
}

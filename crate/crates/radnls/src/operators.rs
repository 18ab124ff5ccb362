//! Radial operators acting on reduced fields.
//!
//! With `u = rφ` the operators take simple forms:
//! `γ₀ ↦ −i∂_r`, `γ ↦ −i(β′∂_r + ½β″)`, `A ↦ −i(r∂_r + ½)`, `Δ ↦ ∂_r²`.

use std::sync::Arc;

use crate::cutoffs_weights::{Cutoff, SmoothWeight};
use crate::radial_grid::{inner, norm, NormKind, RadialField};
use crate::{Complex64, Error, Result};

const NEG_I: Complex64 = Complex64::new(0.0, -1.0);

#[derive(Clone, Debug)]
pub enum OperatorTag {
    Gamma0,
    Gamma(Arc<SmoothWeight>),
    Dilation,
    Laplacian,
    AbsMomentum,
    MomentumCutoff { cutoff: Cutoff, scale: f64 },
}

/// `β′(r_j)` and `β″(r_j)` on the grid.
pub fn weight_profile(w: &SmoothWeight, f: &RadialField) -> (Vec<f64>, Vec<f64>) {
    f.grid
        .r
        .iter()
        .map(|&r| (w.d1(r), w.d2(r)))
        .unzip()
}

/// `γf` in reduced form.
pub fn apply_gamma(w: &SmoothWeight, f: &RadialField) -> RadialField {
    let du = f.grid.derivative(&f.u);
    let (d1, d2) = weight_profile(w, f);
    f.with_u(
        f.u.iter()
            .zip(&du)
            .zip(d1.iter().zip(&d2))
            .map(|((u, du), (a, b))| NEG_I * (du * *a + u * (0.5 * b)))
            .collect(),
    )
}

/// `Af = −i(r∂_r + 3/2)φ` in reduced form.
pub fn apply_dilation(f: &RadialField) -> RadialField {
    let du = f.grid.derivative(&f.u);
    f.with_u(
        f.u.iter()
            .zip(&du)
            .zip(&f.grid.r)
            .map(|((u, du), r)| NEG_I * (du * *r + u * 0.5))
            .collect(),
    )
}

pub fn apply_laplacian(f: &RadialField) -> RadialField {
    f.with_u(f.grid.second_derivative(&f.u))
}

pub fn apply(tag: &OperatorTag, f: &RadialField) -> Result<RadialField> {
    Ok(match tag {
        OperatorTag::Gamma0 => {
            let du = f.grid.derivative(&f.u);
            f.with_u(du.into_iter().map(|d| NEG_I * d).collect())
        }
        OperatorTag::Gamma(w) => apply_gamma(w, f),
        OperatorTag::Dilation => apply_dilation(f),
        OperatorTag::Laplacian => apply_laplacian(f),
        OperatorTag::AbsMomentum => f.apply_real_multiplier(|k| k),
        OperatorTag::MomentumCutoff { cutoff, scale } => {
            if !(scale.is_finite() && *scale > 0.0) {
                return Err(Error::invalid(format!("momentum cutoff scale {scale} must be positive")));
            }
            f.apply_real_multiplier(|k| cutoff.value(k * scale))
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExteriorResidual {
    /// `‖(γ² + Δ)f‖ / ‖f‖_{H¹}`.
    pub residual: f64,
    /// Fraction of the mass located in `r < 2`.
    pub interior_mass: f64,
    /// Set when more than `1e-8` of the mass sits inside `r < 2`.
    pub support_violation: bool,
    pub boundary_flag: bool,
}

pub fn exterior_identity_residual(f: &RadialField, w: &SmoothWeight) -> Result<ExteriorResidual> {
    let h1 = norm(f, NormKind::H1)?;
    if h1 == 0.0 {
        return Err(Error::invalid("exterior identity needs a nonzero field"));
    }
    let g = apply_gamma(w, f);
    let gg = apply_gamma(w, &g);
    let lap = apply_laplacian(f);
    let res = gg.add(&lap);
    let mass = f.mass();
    let interior = f.mass_in(0.0, 2.0) / mass;
    Ok(ExteriorResidual {
        residual: norm(&res, NormKind::L2)? / h1,
        interior_mass: interior,
        support_violation: interior > 1e-8,
        boundary_flag: f.boundary_flag(),
    })
}

/// `|(f, [−iΔ, γ] f)|`.
pub fn commutator_support_check(f: &RadialField, w: &SmoothWeight) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let c = delta_gamma_commutator(f, w);
    Ok(inner(&c, f)?.norm())
}

/// `[−iΔ, γ] f = −iΔγf + iγΔf`.
pub fn delta_gamma_commutator(f: &RadialField, w: &SmoothWeight) -> RadialField {
    let a = apply_laplacian(&apply_gamma(w, f));
    let b = apply_gamma(w, &apply_laplacian(f));
    f.with_u(
        a.u.iter()
            .zip(&b.u)
            .map(|(x, y)| NEG_I * (x - y))
            .collect(),
    )
}

/// `[−iΔ, g] f` for a real radial multiplier given at the nodes.
pub fn delta_multiplier_commutator(f: &RadialField, g: &[f64]) -> RadialField {
    let a = apply_laplacian(&f.mul_values(g));
    let b = apply_laplacian(f).mul_values(g);
    f.with_u(
        a.u.iter()
            .zip(&b.u)
            .map(|(x, y)| NEG_I * (x - y))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_grid::{make_grid, GridSpec};

    #[test]
    fn laplacian_eigenfunction() {
        let g = make_grid(GridSpec::new(20.0, 256, 0.01)).unwrap();
        let k = std::f64::consts::PI / 20.0;
        let f = RadialField::from_real_phi(g, |r| (k * r).sin() / r);
        let l = apply_laplacian(&f);
        for (a, b) in l.u.iter().zip(&f.u) {
            assert!((a + b * (k * k)).norm() < 1e-10 * k * k);
        }
    }

    #[test]
    fn gamma0_matches_gamma_outside() {
        let w = Arc::new(SmoothWeight::standard());
        let g = make_grid(GridSpec::new(40.0, 1024, 0.01)).unwrap();
        let f = RadialField::from_real_phi(g, |r| (-(r - 15.0) * (r - 15.0)).exp());
        let a = apply(&OperatorTag::Gamma0, &f).unwrap();
        let b = apply(&OperatorTag::Gamma(w), &f).unwrap();
        let d: f64 = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }
}

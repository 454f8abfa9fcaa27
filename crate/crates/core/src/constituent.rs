//! Constituent-level stored energies, stresses and elasticity tensors, plus the
//! active smooth-muscle stress.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Tensor4};

/// Constitutive law of a single constituent. Moduli in kPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MaterialModel {
    /// `Ŵ = (c/2)(Cⁿ:I − 3)`.
    NeoHookean {
        #[serde(rename = "c_kPa")]
        c: f64,
    },
    /// `Ŵ = (c₁/4c₂)(exp[c₂(Cⁿ:H − 1)²] − 1)` along a single fiber family.
    Fung {
        #[serde(rename = "c1_kPa")]
        c1: f64,
        c2: f64,
        /// Fiber direction in the reference configuration, (r, θ, z) basis.
        fiber: [f64; 3],
    },
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MaterialModel::NeoHookean { c } => {
                if !(c >= 0.0) {
                    return Err(Error::InvalidArgument(format!("neo-Hookean c must be >= 0, got {c}")));
                }
            }
            MaterialModel::Fung { c1, c2, fiber } => {
                if !(c1 >= 0.0) || !(c2 > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "Fung parameters need c1 >= 0 and c2 > 0, got c1={c1}, c2={c2}"
                    )));
                }
                let n = norm(fiber);
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "fiber direction must be a unit vector (norm = {n})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn fiber(&self) -> Option<[f64; 3]> {
        match *self {
            MaterialModel::Fung { fiber, .. } => Some(fiber),
            MaterialModel::NeoHookean { .. } => None,
        }
    }

    /// Structural tensor `H = (R·h₀) ⊗ (R·h₀)` for fiber models, zero otherwise.
    pub fn structural(&self, rotation: &Tensor2) -> Tensor2 {
        match self.fiber() {
            Some(h0) => structural_tensor(h0, rotation),
            None => Tensor2::zeros(),
        }
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Unit fiber in the θ–z plane at `angle_deg` from the axial direction.
pub fn fiber_in_plane(angle_deg: f64) -> [f64; 3] {
    let a = angle_deg.to_radians();
    [0.0, a.sin(), a.cos()]
}

pub fn structural_tensor(h0: [f64; 3], rotation: &Tensor2) -> Tensor2 {
    let h = rotation.matvec(h0);
    Tensor2::outer(h, h)
}

/// Volume-preserving deposition stretch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DepositionStretch {
    /// Principal stretches along (r, θ, z). A missing radial value is taken as
    /// `1/(G_θ·G_z)`.
    Principal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radial: Option<f64>,
        circumferential: f64,
        axial: f64,
    },
    /// Transversely isotropic stretch `G_f` along the constituent's fiber.
    Fiber { stretch: f64 },
}

impl DepositionStretch {
    /// Expands to the tensor `G`. `fiber` is required for [`DepositionStretch::Fiber`].
    pub fn tensor(&self, fiber: Option<[f64; 3]>) -> Result<Tensor2> {
        match *self {
            DepositionStretch::Principal {
                radial,
                circumferential,
                axial,
            } => {
                if !(circumferential > 0.0 && axial > 0.0) {
                    return Err(Error::InvalidArgument("deposition stretches must be positive".into()));
                }
                let radial = radial.unwrap_or(1.0 / (circumferential * axial));
                let g = Tensor2::diag(radial, circumferential, axial);
                if (g.det() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "deposition stretch must be volume preserving (det = {})",
                        g.det()
                    )));
                }
                Ok(g)
            }
            DepositionStretch::Fiber { stretch } => {
                let h0 = fiber.ok_or_else(|| {
                    Error::InvalidArgument("fiber deposition stretch needs a fiber material".into())
                })?;
                if !(stretch > 0.0) {
                    return Err(Error::InvalidArgument("fiber prestretch must be positive".into()));
                }
                Ok(fiber_deposition(stretch, h0))
            }
        }
    }
}

/// `G = G_f (h₀⊗h₀) + G_f^{-1/2} (I − h₀⊗h₀)`.
pub fn fiber_deposition(stretch: f64, h0: [f64; 3]) -> Tensor2 {
    let hh = Tensor2::outer(h0, h0);
    hh * stretch + (Tensor2::identity() - hh) * stretch.powf(-0.5)
}

fn fiber_invariant(cn: &Tensor2, h: &Tensor2) -> f64 {
    cn.ddot(h)
}

fn check_cn(cn: &Tensor2) -> Result<()> {
    if !cn.is_finite() {
        return Err(Error::kinematics("non-finite Cauchy–Green tensor"));
    }
    // Sylvester's criterion on the symmetric part.
    let c = cn.sym();
    let m1 = c.0[0][0];
    let m2 = c.0[0][0] * c.0[1][1] - c.0[0][1] * c.0[1][0];
    let m3 = c.det();
    if m1 > 0.0 && m2 > 0.0 && m3 > 0.0 {
        Ok(())
    } else {
        Err(Error::kinematics("Cauchy–Green tensor is not positive definite"))
    }
}

pub fn strain_energy(model: &MaterialModel, cn: &Tensor2, h: &Tensor2) -> Result<f64> {
    check_cn(cn)?;
    Ok(match *model {
        MaterialModel::NeoHookean { c } => 0.5 * c * (cn.trace() - 3.0),
        MaterialModel::Fung { c1, c2, .. } => {
            let e = fiber_invariant(cn, h) - 1.0;
            c1 / (4.0 * c2) * ((c2 * e * e).exp() - 1.0)
        }
    })
}

/// `Ŝ = 2 ∂Ŵ/∂Cⁿ`.
pub fn pk2_hat(model: &MaterialModel, cn: &Tensor2, h: &Tensor2) -> Result<Tensor2> {
    check_cn(cn)?;
    Ok(pk2_hat_unchecked(model, cn, h))
}

pub(crate) fn pk2_hat_unchecked(model: &MaterialModel, cn: &Tensor2, h: &Tensor2) -> Tensor2 {
    match *model {
        MaterialModel::NeoHookean { c } => Tensor2::identity() * c,
        MaterialModel::Fung { c1, c2, .. } => *h * fung_stress_coefficient(c1, c2, cn.ddot(h)),
    }
}

/// Scalar multiplying `H` in the Fung `Ŝ`.
pub(crate) fn fung_stress_coefficient(c1: f64, c2: f64, i4: f64) -> f64 {
    let e = i4 - 1.0;
    c1 * e * (c2 * e * e).exp()
}

/// Scalar multiplying `H⊗H` in the Fung `Ĉ`.
pub(crate) fn fung_tangent_coefficient(c1: f64, c2: f64, i4: f64) -> f64 {
    let e = i4 - 1.0;
    2.0 * c1 * (1.0 + 2.0 * c2 * e * e) * (c2 * e * e).exp()
}

/// `Ĉ = 4 ∂²Ŵ/∂Cⁿ∂Cⁿ`.
pub fn elasticity_hat(model: &MaterialModel, cn: &Tensor2, h: &Tensor2) -> Result<Tensor4> {
    check_cn(cn)?;
    Ok(match *model {
        MaterialModel::NeoHookean { .. } => Tensor4::zeros(),
        MaterialModel::Fung { c1, c2, .. } => {
            let mut t = Tensor4::zeros();
            t.add_scaled_dyad(fung_tangent_coefficient(c1, c2, cn.ddot(h)), h);
            t
        }
    })
}

/// Active smooth-muscle stress parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveStressParams {
    #[serde(rename = "T_max_kPa")]
    pub t_max: f64,
    pub lambda_max: f64,
    pub lambda_0: f64,
    pub c_basal: f64,
    pub c_scaling: f64,
    #[serde(rename = "k_act_per_day")]
    pub k_act: f64,
    /// Direction of the active fibers, (r, θ, z).
    #[serde(default = "circumferential")]
    pub fiber: [f64; 3],
}

fn circumferential() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

impl ActiveStressParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max > self.lambda_0 && self.lambda_0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "active stress needs lambda_max > lambda_0 > 0 (got {}, {})",
                self.lambda_max, self.lambda_0
            )));
        }
        if !(self.t_max >= 0.0) {
            return Err(Error::InvalidArgument("T_max must be >= 0".into()));
        }
        if !(self.k_act > 0.0) {
            return Err(Error::InvalidArgument("k_act must be positive".into()));
        }
        Ok(())
    }

    /// `1 − exp(−C²)` with `C = C_B − C_S·Δτ_f`.
    pub fn activation(&self, delta_tau: f64) -> f64 {
        let c = self.c_basal - self.c_scaling * delta_tau;
        1.0 - (-c * c).exp()
    }

    /// Force–length parabola, clamped to zero outside `[λ₀, λ_M]`.
    pub fn force_length(&self, lambda_act: f64) -> f64 {
        if lambda_act <= self.lambda_0 || lambda_act >= self.lambda_max {
            return 0.0;
        }
        let x = (self.lambda_max - lambda_act) / (self.lambda_max - self.lambda_0);
        (1.0 - x * x).max(0.0)
    }

    /// `Ŝ_act` (without the volume-fraction factor).
    pub fn pk2(&self, lambda_act: f64, delta_tau: f64) -> Tensor2 {
        let h = self.fiber;
        let mag = self.t_max * self.activation(delta_tau) * lambda_act * self.force_length(lambda_act);
        Tensor2::outer(h, h) * mag
    }
}

/// `σ_act = (φ_m / det F) F Ŝ_act Fᵀ`.
pub fn active_cauchy(
    params: &ActiveStressParams,
    phi_m: f64,
    lambda_act: f64,
    delta_tau: f64,
    f: &Tensor2,
) -> Result<Tensor2> {
    let j = f.det();
    if !(j > 0.0) {
        return Err(Error::kinematics(format!("det F must be positive (det = {j:e})")));
    }
    if phi_m == 0.0 || params.t_max == 0.0 {
        return Ok(Tensor2::zeros());
    }
    let s = params.pk2(lambda_act, delta_tau);
    Ok(f.congruence(&s) * (phi_m / j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn collagen_circ() -> MaterialModel {
        MaterialModel::Fung {
            c1: 2.696,
            c2: 14.92,
            fiber: [0.0, 1.0, 0.0],
        }
    }

    fn circ_h() -> Tensor2 {
        structural_tensor([0.0, 1.0, 0.0], &Tensor2::identity())
    }

    #[test]
    fn energy_vanishes_at_reference() {
        let id = Tensor2::identity();
        assert_eq!(strain_energy(&collagen_circ(), &id, &circ_h()).unwrap(), 0.0);
        let nh = MaterialModel::NeoHookean { c: 9.913 };
        assert_eq!(strain_energy(&nh, &id, &Tensor2::zeros()).unwrap(), 0.0);
    }

    #[test]
    fn fung_energy_closed_form() {
        let cn = Tensor2::diag(1.0, 1.05 * 1.05, 1.0);
        let w = strain_energy(&collagen_circ(), &cn, &circ_h()).unwrap();
        let expected = 2.696 / 59.68 * ((14.92f64 * 0.1025 * 0.1025).exp() - 1.0);
        assert_relative_eq!(w, expected, max_relative = 1e-14);
        assert_relative_eq!(w, 0.007667, max_relative = 1e-3);
    }

    #[test]
    fn neo_hookean_energy_hand_value() {
        let nh = MaterialModel::NeoHookean { c: 9.913 };
        let cn = Tensor2::diag(1.21, 1.21, 1.0 / 1.4641);
        let w = strain_energy(&nh, &cn, &Tensor2::zeros()).unwrap();
        assert_relative_eq!(w, 4.9565 * (1.21 + 1.21 + 1.0 / 1.4641 - 3.0), max_relative = 1e-12);
        assert_relative_eq!(w, 0.5120, max_relative = 5e-3);
    }

    #[test]
    fn rejects_indefinite_cn() {
        let cn = Tensor2::diag(1.0, -1.0, 1.0);
        assert!(matches!(
            strain_energy(&collagen_circ(), &cn, &circ_h()),
            Err(Error::InvalidKinematics(_))
        ));
        assert!(pk2_hat(&collagen_circ(), &cn, &circ_h()).is_err());
    }

    #[test]
    fn pk2_examples() {
        let h = circ_h();
        let s = pk2_hat(&collagen_circ(), &Tensor2::identity(), &h).unwrap();
        assert_eq!(s, Tensor2::zeros());
        let nh = MaterialModel::NeoHookean { c: 3.0 };
        let cn = Tensor2::diag(1.3, 0.8, 1.1);
        assert_eq!(pk2_hat(&nh, &cn, &h).unwrap(), Tensor2::identity() * 3.0);
        let cn = Tensor2::diag(1.0, 1.1025, 1.0);
        let s = pk2_hat(&collagen_circ(), &cn, &h).unwrap();
        assert_relative_eq!(s[(1, 1)], 0.3232, max_relative = 1e-3);
    }

    #[test]
    fn elasticity_examples() {
        let nh = MaterialModel::NeoHookean { c: 3.0 };
        let h = circ_h();
        assert_eq!(elasticity_hat(&nh, &Tensor2::identity(), &h).unwrap(), Tensor4::zeros());
        let c = elasticity_hat(&collagen_circ(), &Tensor2::identity(), &h).unwrap();
        let mut expected = Tensor4::zeros();
        expected.add_scaled_dyad(2.0 * 2.696, &h);
        assert_eq!(c, expected);
    }

    #[test]
    fn fiber_deposition_is_isochoric() {
        for k in 0..=50 {
            let gf = 1.0 + 0.01 * k as f64;
            let g = fiber_deposition(gf, fiber_in_plane(41.94));
            assert!((g.det() - 1.0).abs() < 1e-12);
            assert!((g - g.transpose()).norm_inf() < 1e-15);
        }
    }

    #[test]
    fn elastin_triple_radial_default() {
        let g = DepositionStretch::Principal {
            radial: None,
            circumferential: 1.219,
            axial: 1.428,
        }
        .tensor(None)
        .unwrap();
        assert_relative_eq!(g[(0, 0)], 0.57447, max_relative = 1e-4);
        assert_relative_eq!(g.det(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn structural_tensor_is_projector() {
        let r = Tensor2::rotation_z(0.3);
        let h = structural_tensor(fiber_in_plane(41.94), &r);
        assert_relative_eq!(h.trace(), 1.0, max_relative = 1e-14);
        assert!((h * h - h).norm_inf() < 1e-15);
        let h = structural_tensor(fiber_in_plane(41.94), &Tensor2::identity());
        let a = 41.94f64.to_radians();
        assert_relative_eq!(h[(1, 1)], a.sin().powi(2), max_relative = 1e-14);
        assert_relative_eq!(h[(2, 2)], a.cos().powi(2), max_relative = 1e-14);
        assert_relative_eq!(h[(1, 2)], a.sin() * a.cos(), max_relative = 1e-14);
    }

    fn aorta_active() -> ActiveStressParams {
        ActiveStressParams {
            t_max: 39.86,
            lambda_max: 1.4,
            lambda_0: 0.8,
            c_basal: 0.7,
            c_scaling: 1.2,
            k_act: 1.0 / 70.0,
            fiber: [0.0, 1.0, 0.0],
        }
    }

    #[test]
    fn active_stress_cases() {
        let p = aorta_active();
        assert_relative_eq!(p.activation(0.0), 1.0 - (-0.49f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(p.activation(0.0), 0.38743, max_relative = 5e-4);
        let f = Tensor2::identity();
        assert_eq!(active_cauchy(&p, 0.06, 0.8, 0.0, &f).unwrap(), Tensor2::zeros());
        assert_eq!(active_cauchy(&p, 0.06, 1.5, 0.0, &f).unwrap(), Tensor2::zeros());
        assert_eq!(active_cauchy(&p, 0.0, 1.0, 0.0, &f).unwrap(), Tensor2::zeros());
        let off = ActiveStressParams { t_max: 0.0, ..p };
        assert_eq!(active_cauchy(&off, 0.06, 1.0, 0.0, &f).unwrap(), Tensor2::zeros());
        let s = active_cauchy(&p, 0.06, 1.0, 0.0, &f).unwrap();
        let fl = 1.0 - (0.4f64 / 0.6).powi(2);
        assert_relative_eq!(s[(1, 1)], 0.06 * 39.86 * p.activation(0.0) * fl, max_relative = 1e-14);
        assert!(active_cauchy(&p, 0.06, 1.0, 0.0, &Tensor2::diag(-1.0, 1.0, 1.0)).is_err());
    }
}

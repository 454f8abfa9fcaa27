//! Linearized stress update about the current iterate and Aitken relaxation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Tensor4};

pub const DEFAULT_PENALTY_KPA: f64 = 1.0e4;

/// Stress, tangent and pressure frozen at iterate `ⁿF`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedMaterial {
    pub sigma_bar: Tensor2,
    pub c_bar: Tensor4,
    pub pressure: f64,
    /// `J* = ⁿ⁺¹J / ⁿJ`.
    pub j_star: f64,
    pub k_p: f64,
}

impl LinearizedMaterial {
    pub fn validate(&self) -> Result<()> {
        if !(self.j_star > 0.0) || !(self.k_p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "linearized material needs J* > 0 and k_p > 0 (got {}, {})",
                self.j_star, self.k_p
            )));
        }
        Ok(())
    }
}

/// Green–Lagrange strain of the isochoric part relative to `J*`.
pub fn isochoric_strain(f_star: &Tensor2, j_star: f64) -> Tensor2 {
    let ratio = (f_star.det() / j_star).powf(-2.0 / 3.0);
    (f_star.transpose() * *f_star * ratio - Tensor2::identity()) * 0.5
}

/// `p* = −k_p (det F* − J*)`.
pub fn penalty_pressure(f_star: &Tensor2, mat: &LinearizedMaterial) -> f64 {
    -mat.k_p * (f_star.det() - mat.j_star)
}

/// `σⁿ⁺¹ = −(pⁿ + p*)I + (1/J*)F*σ̄ⁿF*ᵀ + (1/J*)F*(𝐜̄ⁿ:E*)F*ᵀ`.
pub fn linearized_cauchy(mat: &LinearizedMaterial, f_star: &Tensor2) -> Result<Tensor2> {
    let det = f_star.det();
    if !(det > 0.0 && det.is_finite()) {
        return Err(Error::kinematics(format!("det F* must be positive (det = {det:e})")));
    }
    let e_star = isochoric_strain(f_star, mat.j_star);
    let p_star = penalty_pressure(f_star, mat);
    let elastic = mat.sigma_bar + mat.c_bar.ddot2(&e_star);
    Ok(f_star.congruence(&elastic) * (1.0 / mat.j_star) - Tensor2::identity() * (mat.pressure + p_star))
}

/// Relaxation state carried across iterations of one time step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AitkenState {
    pub omega: f64,
    pub residual: Option<Vec<f64>>,
    pub iteration: usize,
}

impl AitkenState {
    pub fn new() -> Self {
        AitkenState {
            omega: 0.5,
            residual: None,
            iteration: 0,
        }
    }
}

pub const INITIAL_OMEGA: f64 = 0.5;

/// One relaxed update `d = ω·d̃ + (1−ω)·d_prev`. The first two iterations
/// use `ω = 0.5`; afterwards the Aitken factor is used.
pub fn aitken_step(state: &AitkenState, d_prev: &[f64], d_tilde: &[f64]) -> Result<(Vec<f64>, AitkenState)> {
    if d_prev.len() != d_tilde.len() {
        return Err(Error::InvalidArgument(format!(
            "displacement lengths differ ({} vs {})",
            d_prev.len(),
            d_tilde.len()
        )));
    }
    let r: Vec<f64> = d_tilde.iter().zip(d_prev).map(|(a, b)| a - b).collect();
    let omega = match (&state.residual, state.iteration) {
        (Some(r_prev), n) if n >= 2 => aitken_factor(state.omega, r_prev, &r),
        _ => INITIAL_OMEGA,
    };
    let d_next = d_tilde
        .iter()
        .zip(d_prev)
        .map(|(t, p)| omega * t + (1.0 - omega) * p)
        .collect();
    Ok((
        d_next,
        AitkenState {
            omega,
            residual: Some(r),
            iteration: state.iteration + 1,
        },
    ))
}

/// `ωⁿ = −ωⁿ⁻¹ (rⁿ⁻¹)ᵀ(rⁿ − rⁿ⁻¹) / ‖rⁿ − rⁿ⁻¹‖²`; keeps `ωⁿ⁻¹` when the
/// residual did not change.
pub fn aitken_factor(omega_prev: f64, r_prev: &[f64], r: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in r_prev.iter().zip(r) {
        let d = b - a;
        num += a * d;
        den += d * d;
    }
    if den == 0.0 || !den.is_finite() {
        return omega_prev;
    }
    let omega = -omega_prev * num / den;
    if omega.is_finite() && omega != 0.0 {
        omega
    } else {
        omega_prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn material(sigma_bar: Tensor2, c_bar: Tensor4, pressure: f64, j_star: f64) -> LinearizedMaterial {
        LinearizedMaterial {
            sigma_bar,
            c_bar,
            pressure,
            j_star,
            k_p: DEFAULT_PENALTY_KPA,
        }
    }

    #[test]
    fn identity_update_reproduces_stress() {
        let sb = Tensor2::diag(0.1, 0.8, 0.4);
        let mut c = Tensor4::zeros();
        c.add_scaled_dyad(3.0, &Tensor2::diag(0.0, 1.0, 0.0));
        let mat = material(sb, c, 0.3, 1.0);
        let s = linearized_cauchy(&mat, &Tensor2::identity()).unwrap();
        assert_eq!(s, sb - Tensor2::identity() * 0.3);
    }

    #[test]
    fn pure_target_dilation() {
        let sb = Tensor2::diag(0.1, 0.8, 0.4);
        let mut c = Tensor4::zeros();
        c.add_scaled_dyad(3.0, &Tensor2::diag(0.0, 1.0, 0.0));
        let j_star = 1.3;
        let mat = material(sb, c.clone(), 0.2, j_star);
        let f = Tensor2::identity() * j_star.powf(1.0 / 3.0);
        // The isochoric factor is 1 here, so E* keeps the dilation.
        let e = isochoric_strain(&f, j_star);
        assert!((e - Tensor2::identity() * (0.5 * (j_star.powf(2.0 / 3.0) - 1.0))).norm_inf() < 1e-14);
        assert!(penalty_pressure(&f, &mat).abs() < 1e-9);
        let s = linearized_cauchy(&mat, &f).unwrap();
        let expected = (sb + c.ddot2(&e)) * j_star.powf(-1.0 / 3.0) - Tensor2::identity() * 0.2;
        assert!((s - expected).norm_inf() < 1e-9);
        // Without a tangent the update is the pure push-forward of σ̄.
        let bare = LinearizedMaterial { c_bar: Tensor4::zeros(), ..mat };
        let s = linearized_cauchy(&bare, &f).unwrap();
        assert!((s - (sb * j_star.powf(-1.0 / 3.0) - Tensor2::identity() * 0.2)).norm_inf() < 1e-9);
    }

    #[test]
    fn penalty_only_response() {
        let mat = material(Tensor2::zeros(), Tensor4::zeros(), 0.1, 1.0);
        let e = 1e-3;
        let s = linearized_cauchy(&mat, &(Tensor2::identity() * (1.0 + e))).unwrap();
        let expected = -0.1 + DEFAULT_PENALTY_KPA * ((1.0 + e).powi(3) - 1.0);
        for i in 0..3 {
            assert_relative_eq!(s[(i, i)], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_inverted_update() {
        let mat = material(Tensor2::zeros(), Tensor4::zeros(), 0.0, 1.0);
        assert!(matches!(
            linearized_cauchy(&mat, &Tensor2::diag(-1.0, 1.0, 1.0)),
            Err(Error::InvalidKinematics(_))
        ));
    }

    #[test]
    fn aitken_scalar_formula() {
        assert_relative_eq!(aitken_factor(0.5, &[1.0], &[0.5]), 1.0, max_relative = 1e-15);
        assert_eq!(aitken_factor(0.7, &[1.0], &[1.0]), 0.7);
    }

    #[test]
    fn aitken_fixed_point_is_kept() {
        let st = AitkenState::new();
        let (d, st) = aitken_step(&st, &[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(d, vec![1.0, 2.0]);
        assert_eq!(st.residual, Some(vec![0.0, 0.0]));
        assert!(aitken_step(&st, &[1.0], &[1.0, 2.0]).is_err());
    }
}

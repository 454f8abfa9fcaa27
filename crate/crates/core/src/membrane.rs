//! Thin-walled, axially clamped vessel segment: kinematics, Laplace balance
//! and the two equilibrium solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{linearized_cauchy, LinearizedMaterial};
use crate::mixture::{lagrange_pressure_membrane, mixture_cauchy, MixtureEval, MixtureState, Trial};
use crate::tensor::Tensor2;

/// Scalar reduced from the wall stress for the mechano stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StressMetric {
    /// First invariant `tr σ`.
    #[default]
    Trace,
    /// Circumferential component `σ_θθ`.
    Hoop,
}

impl StressMetric {
    pub fn apply(self, sigma: &Tensor2) -> f64 {
        match self {
            StressMetric::Trace => sigma.trace(),
            StressMetric::Hoop => sigma[(1, 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselSegment {
    pub a0: f64,
    pub h0: f64,
    pub length: f64,
    pub z: f64,
    pub lambda_theta: f64,
    /// Kinematic volume ratio `det F`.
    pub j: f64,
    pub mixture: MixtureState,
    pub sigma_h: f64,
    pub tau_h: f64,
    /// Segment whose measured targets this one adopts ("measured" mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_source: Option<usize>,
}

impl VesselSegment {
    pub fn new(a0: f64, h0: f64, length: f64, z: f64, mixture: MixtureState) -> Result<Self> {
        if !(a0 > 0.0 && h0 > 0.0 && length > 0.0) {
            return Err(Error::Geometry(format!(
                "segment needs a0, h0, L > 0 (got {a0}, {h0}, {length})"
            )));
        }
        Ok(Self {
            a0,
            h0,
            length,
            z,
            lambda_theta: 1.0,
            j: 1.0,
            mixture,
            sigma_h: 0.0,
            tau_h: 0.0,
            target_source: None,
        })
    }

    pub fn deformation(&self) -> Result<Tensor2> {
        segment_deformation(self.lambda_theta, self.j)
    }

    pub fn geometry(&self) -> (f64, f64) {
        current_geometry(self.a0, self.h0, self.lambda_theta, self.j)
    }
}

/// `F = diag(J/λ_θ, λ_θ, 1)` in `(r, θ, z)`.
pub fn segment_deformation(lambda_theta: f64, j: f64) -> Result<Tensor2> {
    if !(lambda_theta > 0.0 && j > 0.0) {
        return Err(Error::kinematics(format!(
            "membrane kinematics need λ_θ > 0 and J > 0 (got {lambda_theta}, {j})"
        )));
    }
    Ok(Tensor2::diag(j / lambda_theta, lambda_theta, 1.0))
}

/// Inner radius and thickness: `a = λ_θ a₀`, `h = h₀ J/λ_θ`.
pub fn current_geometry(a0: f64, h0: f64, lambda_theta: f64, j: f64) -> (f64, f64) {
    (lambda_theta * a0, h0 * j / lambda_theta)
}

/// Wall stress at one configuration under lumen pressure `P` (kPa).
#[derive(Debug, Clone, PartialEq)]
pub struct WallState {
    pub lagrange_pressure: f64,
    pub sigma: Tensor2,
    pub a: f64,
    pub h: f64,
    /// `σ_θθ − P·a/h`.
    pub residual: f64,
}

pub fn wall_state(a0: f64, h0: f64, lambda_theta: f64, j: f64, eval: &MixtureEval, lumen_kpa: f64) -> WallState {
    let p = lagrange_pressure_membrane(&eval.sigma_bar, lumen_kpa);
    let sigma = mixture_cauchy(&eval.sigma_bar, p);
    let (a, h) = current_geometry(a0, h0, lambda_theta, j);
    WallState {
        lagrange_pressure: p,
        sigma,
        a,
        h,
        residual: sigma[(1, 1)] - lumen_kpa * a / h,
    }
}

/// Laplace residual of the segment in its stored configuration.
pub fn equilibrium_residual(seg: &VesselSegment, lumen_kpa: f64, trial: &Trial) -> Result<f64> {
    let f = seg.deformation()?;
    let eval = seg.mixture.evaluate(&Trial { f, ..*trial }, false)?;
    Ok(wall_state(seg.a0, seg.h0, seg.lambda_theta, seg.j, &eval, lumen_kpa).residual)
}

pub const NEWTON_BRACKET: (f64, f64) = (0.5, 2.0);
const MAX_HALVINGS: usize = 10;
const MAX_NEWTON: usize = 60;

/// Root of a scalar function by damped Newton (finite-difference slope) with
/// a bisection fallback on `[lo, hi]`. Converged when `|f| ≤ ftol` or the
/// bracket has collapsed to rounding.
pub fn solve_scalar<F>(mut f: F, x0: f64, lo: f64, hi: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x = x0.clamp(lo, hi);
    let mut fx = f(x)?;
    // Bracket bookkeeping from every evaluation.
    let mut neg: Option<f64> = None;
    let mut pos: Option<f64> = None;
    let note = |x: f64, fx: f64, neg: &mut Option<f64>, pos: &mut Option<f64>| {
        if fx < 0.0 {
            *neg = Some(x);
        } else {
            *pos = Some(x);
        }
    };
    note(x, fx, &mut neg, &mut pos);
    for _ in 0..MAX_NEWTON {
        if fx.abs() <= ftol {
            return Ok(x);
        }
        let dx_fd = 1e-7 * x.abs().max(1e-3);
        let slope = (f(x + dx_fd)? - f(x - dx_fd)?) / (2.0 * dx_fd);
        if !(slope.is_finite()) || slope == 0.0 {
            break;
        }
        let mut step = -fx / slope;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let xn = x + step;
            if xn > lo && xn < hi {
                if let Ok(fxn) = f(xn) {
                    note(xn, fxn, &mut neg, &mut pos);
                    if fxn.abs() < fx.abs() {
                        x = xn;
                        fx = fxn;
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if fx.abs() <= ftol {
        return Ok(x);
    }
    bisect(&mut f, lo, hi, ftol, neg, pos)
}

fn bisect<F>(f: &mut F, lo: f64, hi: f64, ftol: f64, neg: Option<f64>, pos: Option<f64>) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = match (neg, pos) {
        (Some(n), Some(p)) => (n, p),
        _ => {
            let fl = f(lo)?;
            let fh = f(hi)?;
            if fl.signum() == fh.signum() {
                return Err(Error::EquilibriumNotFound(format!(
                    "no sign change on [{lo}, {hi}] (f = {fl:e}, {fh:e})"
                )));
            }
            if fl < 0.0 {
                (lo, hi)
            } else {
                (hi, lo)
            }
        }
    };
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm.abs() <= ftol || (a - b).abs() <= 4.0 * f64::EPSILON * m.abs() {
            return Ok(m);
        }
        if fm < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Direct nonlinear solve for `λ_θ` at fixed `J = J_target`, re-evaluating
/// the full mixture stress every iterate.
pub fn solve_equilibrium_newton(
    seg: &VesselSegment,
    lumen_kpa: f64,
    trial: &Trial,
    j_target: f64,
    stress_scale: f64,
) -> Result<f64> {
    let (lo, hi) = NEWTON_BRACKET;
    let residual = |lt: f64| -> Result<f64> {
        let f = segment_deformation(lt, j_target)?;
        let eval = seg.mixture.evaluate(&Trial { f, ..*trial }, false)?;
        Ok(wall_state(seg.a0, seg.h0, lt, j_target, &eval, lumen_kpa).residual)
    };
    let (a, h) = current_geometry(seg.a0, seg.h0, seg.lambda_theta, j_target);
    let ftol = 1e-9 * stress_scale.max(lumen_kpa * a / h).max(f64::MIN_POSITIVE);
    solve_scalar(residual, seg.lambda_theta, lo, hi, ftol).map_err(|e| match e {
        Error::EquilibriumNotFound(msg) => Error::EquilibriumNotFound(format!(
            "segment z = {} cm, P = {lumen_kpa} kPa, J = {j_target}: {msg}",
            seg.z
        )),
        other => other,
    })
}

/// Result of one linearized solid update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedUpdate {
    pub f_star: Tensor2,
    pub lambda_theta: f64,
    pub j: f64,
}

/// Radial closure and Laplace balance with the linearized stress as a
/// function of `F* = diag(x_r, x_θ, 1)`, about the configuration
/// `(λ_θⁿ, Jⁿ)` of the segment.
pub fn solve_equilibrium_linearized(
    seg: &VesselSegment,
    lumen_kpa: f64,
    mat: &LinearizedMaterial,
) -> Result<LinearizedUpdate> {
    mat.validate()?;
    let (a_n, h_n) = seg.geometry();
    let radial_tol = 1e-13 * mat.k_p;
    let solve_radial = |x_t: f64| -> Result<(f64, Tensor2)> {
        let guess = mat.j_star / x_t;
        let g = |x_r: f64| -> Result<f64> {
            let s = linearized_cauchy(mat, &Tensor2::diag(x_r, x_t, 1.0))?;
            Ok(s[(0, 0)] + 0.5 * lumen_kpa)
        };
        let x_r = solve_scalar(g, guess, 0.25 * guess, 4.0 * guess, radial_tol)?;
        let s = linearized_cauchy(mat, &Tensor2::diag(x_r, x_t, 1.0))?;
        Ok((x_r, s))
    };
    let scale = (lumen_kpa * a_n / h_n).abs().max(mat.sigma_bar.norm_inf()).max(1e-12);
    let hoop = |x_t: f64| -> Result<f64> {
        let (x_r, s) = solve_radial(x_t)?;
        Ok(s[(1, 1)] - lumen_kpa * (a_n * x_t) / (h_n * x_r))
    };
    let x_t = solve_scalar(hoop, 1.0, 0.5, 2.0, 1e-12 * scale)?;
    let (x_r, _) = solve_radial(x_t)?;
    let f_star = Tensor2::diag(x_r, x_t, 1.0);
    Ok(LinearizedUpdate {
        f_star,
        lambda_theta: seg.lambda_theta * x_t,
        j: seg.j * x_r * x_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constituent::MaterialModel;
    use crate::mixture::ConstituentHistory;
    use crate::tensor::Tensor4;
    use crate::turnover::TurnoverParams;
    use approx::assert_relative_eq;

    fn elastin_segment(c: f64) -> VesselSegment {
        let h = ConstituentHistory::new(
            "elastin",
            MaterialModel::NeoHookean { c },
            Tensor2::identity(),
            TurnoverParams::Elastin,
            1050.0,
            1050.0,
        )
        .unwrap();
        VesselSegment::new(0.8573, 0.743, 0.8573, 0.0, MixtureState::new(vec![h])).unwrap()
    }

    #[test]
    fn kinematics_cases() {
        assert_eq!(segment_deformation(1.0, 1.0).unwrap(), Tensor2::identity());
        let f = segment_deformation(1.1, 1.0).unwrap();
        assert_relative_eq!(f[(0, 0)], 0.9090909090909091, max_relative = 1e-15);
        assert_relative_eq!(f.det(), 1.0, max_relative = 1e-15);
        assert_eq!(segment_deformation(1.0, 1.2).unwrap()[(0, 0)], 1.2);
        assert!(segment_deformation(0.0, 1.0).is_err());
    }

    #[test]
    fn geometry_cases() {
        assert_eq!(current_geometry(0.8573, 0.743, 1.0, 1.0), (0.8573, 0.743));
        let (_, h) = current_geometry(0.8573, 0.743, 1.1, 1.0);
        assert_relative_eq!(h, 0.743 / 1.1, max_relative = 1e-15);
        let (a, h) = current_geometry(0.8573, 0.743, 1.0, 1.4);
        assert_eq!(a, 0.8573);
        assert_relative_eq!(h, 1.4 * 0.743, max_relative = 1e-15);
        for &(lt, j) in &[(0.9, 1.3), (1.2, 0.8)] {
            let (a, h) = current_geometry(2.0, 0.3, lt, j);
            assert_relative_eq!(a * h / (2.0 * 0.3), j, max_relative = 1e-12);
        }
    }

    #[test]
    fn laplace_target_for_ivc_state() {
        let target: f64 = 0.615 * 0.8573 / 0.743;
        assert_relative_eq!(target, 0.70959, max_relative = 1e-4);
    }

    #[test]
    fn stress_free_mixture_at_zero_pressure() {
        // Neo-Hookean with G = I stresses as c·I; the closure removes it.
        let seg = elastin_segment(5.0);
        let r = equilibrium_residual(&seg, 0.0, &Trial::at_rest(0.0)).unwrap();
        assert!(r.abs() < 1e-14);
        let lt = solve_equilibrium_newton(&seg, 0.0, &Trial::at_rest(0.0), 1.0, 1.0).unwrap();
        assert!((lt - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pressure_step_distends() {
        let seg = elastin_segment(5.0);
        let t = Trial::at_rest(0.0);
        let l1 = solve_equilibrium_newton(&seg, 0.3, &t, 1.0, 1.0).unwrap();
        let l2 = solve_equilibrium_newton(&seg, 0.42, &t, 1.0, 1.0).unwrap();
        assert!(l1 > 1.0 && l2 > l1);
        let mut s2 = seg.clone();
        s2.lambda_theta = l2;
        assert!(equilibrium_residual(&s2, 0.42, &t).unwrap().abs() < 1e-8);
    }

    #[test]
    fn missing_bracket_is_reported() {
        let r = solve_scalar(|x| Ok(x * x + 1.0), 1.0, 0.5, 2.0, 1e-12);
        assert!(matches!(r, Err(Error::EquilibriumNotFound(_))));
    }

    #[test]
    fn linearized_identity_at_balance() {
        let seg = elastin_segment(5.0);
        // σ̄ = diag(s_r, P·a/h + s_r + P/2, 0) is balanced at F* = I.
        let lumen = 0.6;
        let s_r = 0.2;
        let hoop = lumen * seg.a0 / seg.h0 + s_r + 0.5 * lumen;
        let mat = LinearizedMaterial {
            sigma_bar: Tensor2::diag(s_r, hoop, 0.0),
            c_bar: Tensor4::zeros(),
            pressure: s_r + 0.5 * lumen,
            j_star: 1.0,
            k_p: 1e4,
        };
        let up = solve_equilibrium_linearized(&seg, lumen, &mat).unwrap();
        assert!((up.f_star - Tensor2::identity()).norm_inf() < 1e-9);
    }

    #[test]
    fn penalty_enforces_target_volume() {
        let seg = elastin_segment(5.0);
        let mat = LinearizedMaterial {
            sigma_bar: Tensor2::zeros(),
            c_bar: Tensor4::zeros(),
            pressure: 0.0,
            j_star: 1.1,
            k_p: 1e4,
        };
        let up = solve_equilibrium_linearized(&seg, 0.0, &mat).unwrap();
        assert!((up.f_star.det() / 1.1 - 1.0).abs() < 1e-4);
    }
}

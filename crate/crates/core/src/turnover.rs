//! Mass production stimuli and survival functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of the mechano-mediated stimulus.
pub const STIMULUS_FLOOR: f64 = 0.1;

/// Turnover law of one constituent. Rates are per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TurnoverParams {
    /// Stress- and WSS-mediated production with first-order removal.
    Mechano {
        #[serde(rename = "k_h_per_day")]
        k_h: f64,
        #[serde(rename = "K_sigma")]
        gain_stress: f64,
        #[serde(rename = "K_tau")]
        gain_wss: f64,
        #[serde(rename = "K_D_sigma", default)]
        degradation_gain_stress: f64,
        #[serde(rename = "K_D_tau", default)]
        degradation_gain_wss: f64,
    },
    /// Immuno-mediated production following a gamma-shaped inflammatory burden.
    Inflammatory {
        #[serde(rename = "k_h_per_day")]
        k_h: f64,
        #[serde(rename = "K_i")]
        gain: f64,
        #[serde(rename = "delta_per_day")]
        rate: f64,
        #[serde(rename = "beta")]
        shape: f64,
        /// Mechano-mediated constituent whose homeostatic production rate
        /// sets the nominal rate.
        paired_with: String,
    },
    /// Never produced, never removed.
    Elastin,
    /// Degradable scaffold polymer with sigmoidal survival.
    Polymer {
        #[serde(rename = "k_per_day")]
        k: f64,
        zeta: f64,
        gamma: f64,
    },
    /// Polymer acting as ground matrix: intact until onset, then first-order
    /// decay toward a residual fraction.
    PolymerGround {
        #[serde(rename = "k_h_per_day")]
        k_h: f64,
        eps_min: f64,
        #[serde(rename = "onset_day")]
        onset: f64,
    },
}

impl TurnoverParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            TurnoverParams::Mechano { k_h, .. } => {
                if !(*k_h > 0.0) {
                    return Err(Error::InvalidArgument("mechano k_h must be positive".into()));
                }
            }
            TurnoverParams::Inflammatory { k_h, rate, shape, .. } => {
                if !(*k_h > 0.0 && *rate > 0.0 && *shape > 1.0) {
                    return Err(Error::InvalidArgument(
                        "inflammatory turnover needs k_h > 0, delta > 0 and beta > 1".into(),
                    ));
                }
            }
            TurnoverParams::Elastin => {}
            TurnoverParams::Polymer { k, zeta, gamma } => {
                if !(*k > 0.0 && *gamma > 0.0 && zeta.is_finite()) {
                    return Err(Error::InvalidArgument("polymer needs k > 0 and gamma > 0".into()));
                }
            }
            TurnoverParams::PolymerGround { k_h, eps_min, onset } => {
                if !(*k_h > 0.0 && (0.0..=1.0).contains(eps_min) && *onset >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "ground matrix needs k_h > 0, eps_min in [0,1], onset >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Whether new cohorts are ever deposited.
    pub fn produces(&self) -> bool {
        matches!(self, TurnoverParams::Mechano { .. } | TurnoverParams::Inflammatory { .. })
    }

    /// Basal removal rate `k_h`, when the kind has one.
    pub fn basal_rate(&self) -> Option<f64> {
        match *self {
            TurnoverParams::Mechano { k_h, .. }
            | TurnoverParams::Inflammatory { k_h, .. }
            | TurnoverParams::PolymerGround { k_h, .. } => Some(k_h),
            _ => None,
        }
    }
}

/// Normalized stress and WSS deviations plus time since implant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StimulusInput {
    pub delta_sigma: f64,
    pub delta_tau: f64,
    pub time: f64,
}

/// `Υ = max(0.1, 1 + K_σΔσ − K_τΔτ)`. Non-mechano kinds return 0.
pub fn stimulus_mechano(p: &TurnoverParams, input: &StimulusInput) -> f64 {
    match *p {
        TurnoverParams::Mechano {
            gain_stress,
            gain_wss,
            ..
        } => (1.0 + gain_stress * input.delta_sigma - gain_wss * input.delta_tau).max(STIMULUS_FLOOR),
        _ => 0.0,
    }
}

/// `Γ(s)/Γ_max` for `Γ(s) = δ^β s^{β−1} e^{−δs}`; the peak sits at `(β−1)/δ`.
pub fn inflammatory_burden(rate: f64, shape: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let peak = (shape - 1.0) / rate;
    let log_ratio = (shape - 1.0) * (s / peak).ln() - rate * (s - peak);
    log_ratio.exp()
}

/// `Υ = K^i Γ(s)/Γ_max` for inflammatory kinds, 0 otherwise.
pub fn stimulus_inflammatory(p: &TurnoverParams, s: f64) -> f64 {
    match *p {
        TurnoverParams::Inflammatory {
            gain, rate, shape, ..
        } => gain * inflammatory_burden(rate, shape, s),
        _ => 0.0,
    }
}

/// Stimulus for any kind.
pub fn stimulus(p: &TurnoverParams, input: &StimulusInput) -> f64 {
    match p {
        TurnoverParams::Mechano { .. } => stimulus_mechano(p, input),
        TurnoverParams::Inflammatory { .. } => stimulus_inflammatory(p, input.time),
        _ => 0.0,
    }
}

/// Referential production rate `m_R` in kg/(m³·day).
///
/// Mechano kinds use `max(ρ_R(τ), ρ_ref)·k_h·Υ`; inflammatory kinds use the
/// paired homeostatic rate `paired_rate·Υ`; everything else produces nothing.
pub fn production_rate(
    p: &TurnoverParams,
    rho_now: f64,
    rho_ref: f64,
    upsilon: f64,
    paired_rate: f64,
) -> f64 {
    match *p {
        TurnoverParams::Mechano { k_h, .. } => rho_now.max(rho_ref) * k_h * upsilon,
        TurnoverParams::Inflammatory { .. } => paired_rate * upsilon,
        _ => 0.0,
    }
}

/// Instantaneous removal rate `k(t)`, floored at zero.
pub fn removal_rate(p: &TurnoverParams, delta_sigma: f64, delta_tau: f64, t: f64) -> f64 {
    let k = match *p {
        TurnoverParams::Mechano {
            k_h,
            degradation_gain_stress,
            degradation_gain_wss,
            ..
        } => k_h * (1.0 + degradation_gain_stress * delta_sigma + degradation_gain_wss * delta_tau),
        TurnoverParams::Inflammatory {
            k_h, rate, shape, ..
        } => k_h * (1.0 + inflammatory_burden(rate, shape, t)),
        _ => 0.0,
    };
    k.max(0.0)
}

/// Sampled deviation history on the G&R grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviationHistory {
    pub times: Vec<f64>,
    pub delta_sigma: Vec<f64>,
    pub delta_tau: Vec<f64>,
}

impl DeviationHistory {
    pub fn push(&mut self, t: f64, delta_sigma: f64, delta_tau: f64) {
        self.times.push(t);
        self.delta_sigma.push(delta_sigma);
        self.delta_tau.push(delta_tau);
    }

    pub fn constant(times: Vec<f64>, delta_sigma: f64, delta_tau: f64) -> Self {
        let n = times.len();
        Self {
            times,
            delta_sigma: vec![delta_sigma; n],
            delta_tau: vec![delta_tau; n],
        }
    }

    /// Piecewise-linear interpolation, held constant outside the samples.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let n = self.times.len();
        if n == 0 {
            return (0.0, 0.0);
        }
        if t <= self.times[0] {
            return (self.delta_sigma[0], self.delta_tau[0]);
        }
        if t >= self.times[n - 1] {
            return (self.delta_sigma[n - 1], self.delta_tau[n - 1]);
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        (
            self.delta_sigma[i] + w * (self.delta_sigma[i + 1] - self.delta_sigma[i]),
            self.delta_tau[i] + w * (self.delta_tau[i + 1] - self.delta_tau[i]),
        )
    }
}

/// `q(s, τ) = exp(−∫_τ^s k(t) dt)`, trapezoid over the grid nodes inside
/// `[τ, s]` plus the interpolated endpoints.
pub fn survival_fraction(p: &TurnoverParams, tau: f64, s: f64, history: &DeviationHistory) -> Result<f64> {
    if s < tau {
        return Err(Error::InvalidArgument(format!("survival needs s >= tau (s = {s}, tau = {tau})")));
    }
    match p {
        TurnoverParams::Elastin => return Ok(1.0),
        TurnoverParams::Mechano { .. } | TurnoverParams::Inflammatory { .. } => {}
        // Scaffolds are never deposited after implant.
        _ => return Ok(1.0),
    }
    if s == tau {
        return Ok(1.0);
    }
    let mut nodes = vec![tau];
    nodes.extend(history.times.iter().copied().filter(|&t| t > tau && t < s));
    nodes.push(s);
    let rate = |t: f64| {
        let (ds, dt) = history.at(t);
        removal_rate(p, ds, dt, t)
    };
    let integral: f64 = nodes
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (rate(w[0]) + rate(w[1])))
        .sum();
    Ok((-integral).exp())
}

/// Survival `Q(s)` of the mass present at `s = 0`.
pub fn initial_cohort_survival(p: &TurnoverParams, s: f64, history: &DeviationHistory) -> Result<f64> {
    match *p {
        TurnoverParams::Elastin => Ok(1.0),
        TurnoverParams::Polymer { k, zeta, gamma } => Ok(polymer_survival(k, zeta, gamma, s)),
        TurnoverParams::PolymerGround { k_h, eps_min, onset } => {
            Ok(ground_survival(k_h, eps_min, onset, s))
        }
        _ => survival_fraction(p, 0.0, s, history),
    }
}

/// `(1 + e^{−kζ}) / (1 + e^{kγ(s − ζ/γ)})`.
pub fn polymer_survival(k: f64, zeta: f64, gamma: f64, s: f64) -> f64 {
    (1.0 + (-k * zeta).exp()) / (1.0 + (k * gamma * (s - zeta / gamma)).exp())
}

pub fn ground_survival(k_h: f64, eps_min: f64, onset: f64, s: f64) -> f64 {
    if s < onset {
        1.0
    } else {
        (1.0 - eps_min) * (-k_h * (s - onset)).exp() + eps_min
    }
}

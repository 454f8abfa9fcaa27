//! Cohort ledger and heredity-integral evaluation for one material point.
//!
//! Every integral over deposition time uses the trapezoid rule on the cohort
//! times, with half weights at `τ = 0` and at the evaluation time `s`. The mass
//! present at `s = 0` enters through its own survival term `ρ_R(0)·Q(s)`.
//! Within a G&R step the integrand at `s` comes from a [`Trial`]; the cohort
//! itself is only appended by [`MixtureState::commit`] once the step converges.

use serde::{Deserialize, Serialize};

use crate::constituent::{
    active_cauchy, fung_stress_coefficient, fung_tangent_coefficient, pk2_hat_unchecked,
    structural_tensor, ActiveStressParams, MaterialModel,
};
use crate::error::{Error, Result};
use crate::tensor::{polar_rotation, pushforward_elasticity, pushforward_stress, Tensor2, Tensor4};
use crate::turnover::{
    initial_cohort_survival, production_rate, removal_rate, stimulus, DeviationHistory,
    StimulusInput, TurnoverParams,
};

/// Mass deposited at one G&R time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub tau: f64,
    /// Referential production rate `m_R(τ)`, kg/(m³·day).
    pub production: f64,
    /// Mixture deformation gradient at deposition.
    pub f: Tensor2,
    /// `A(τ) = F⁻¹(τ)·F_G(τ)`.
    pub a: Tensor2,
    /// Structural tensor `H(τ)` (zero for isotropic constituents).
    pub h: Tensor2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstituentHistory {
    pub name: String,
    pub material: MaterialModel,
    /// Deposition stretch tensor `G`.
    pub deposition: Tensor2,
    pub turnover: TurnoverParams,
    /// Initial referential density `ρ_R(0)`, kg/m³.
    pub rho0: f64,
    /// Intrinsic density `ρ̂`, kg/m³.
    pub rho_hat: f64,
    /// Density used by the basal production floor `max(ρ_R(τ), ρ_ref)·k_h`.
    pub rho_ref: f64,
    /// Homeostatic rate of the paired mechano constituent (inflammatory only).
    pub paired_rate: f64,
    pub cohorts: Vec<Cohort>,
    pub deviations: DeviationHistory,
    /// `∫₀^t k` at every committed time in `deviations.times`.
    pub rate_integral: Vec<f64>,
    pub rate_last: f64,
}

impl ConstituentHistory {
    pub fn new(
        name: impl Into<String>,
        material: MaterialModel,
        deposition: Tensor2,
        turnover: TurnoverParams,
        rho0: f64,
        rho_hat: f64,
    ) -> Result<Self> {
        material.validate()?;
        turnover.validate()?;
        if !(rho_hat > 0.0) || !(rho0 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "densities need rho_hat > 0 and rho0 >= 0 (got {rho_hat}, {rho0})"
            )));
        }
        if (deposition.det() - 1.0).abs() > 1e-9 || (deposition - deposition.transpose()).norm_inf() > 1e-12 {
            return Err(Error::InvalidArgument("deposition stretch must be symmetric with det 1".into()));
        }
        Ok(Self {
            name: name.into(),
            material,
            deposition,
            turnover,
            rho0,
            rho_hat,
            rho_ref: rho0,
            paired_rate: 0.0,
            cohorts: Vec::new(),
            deviations: DeviationHistory::default(),
            rate_integral: Vec::new(),
            rate_last: 0.0,
        })
    }

    pub fn last_time(&self) -> Option<f64> {
        self.deviations.times.last().copied()
    }

    /// `∫₀^s k` with a trial endpoint rate `k_s` beyond the last committed time.
    fn rate_integral_to(&self, s: f64, k_s: f64) -> f64 {
        match (self.last_time(), self.rate_integral.last()) {
            (Some(t), Some(&k_int)) if s > t => k_int + 0.5 * (s - t) * (self.rate_last + k_s),
            (Some(_), Some(_)) => self.interp_rate_integral(s),
            _ => 0.5 * s * 2.0 * k_s,
        }
    }

    fn interp_rate_integral(&self, t: f64) -> f64 {
        let times = &self.deviations.times;
        let n = times.len();
        if n == 0 || t <= times[0] {
            return 0.0;
        }
        if t >= times[n - 1] {
            return self.rate_integral[n - 1] + (t - times[n - 1]) * self.rate_last;
        }
        let i = times.partition_point(|&x| x <= t) - 1;
        let w = (t - times[i]) / (times[i + 1] - times[i]);
        self.rate_integral[i] + w * (self.rate_integral[i + 1] - self.rate_integral[i])
    }

    /// `Q(s)` given the integrated removal rate.
    fn initial_survival(&self, s: f64, k_int: f64) -> f64 {
        match self.turnover {
            TurnoverParams::Mechano { .. } | TurnoverParams::Inflammatory { .. } => (-k_int).exp(),
            _ => initial_cohort_survival(&self.turnover, s, &self.deviations).unwrap_or(1.0),
        }
    }

    fn cohort_survival(&self, k_int_s: f64, index: usize) -> f64 {
        match self.turnover {
            TurnoverParams::Mechano { .. } | TurnoverParams::Inflammatory { .. } => {
                let k_tau = self.interp_rate_integral(self.cohorts[index].tau);
                (-(k_int_s - k_tau)).exp()
            }
            _ => 1.0,
        }
    }
}

/// Trapezoid weights for nodes `t_0 < … < t_n`.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (times[i + 1] - times[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Referential density `ρ_R(s)` from the committed cohorts (all with `τ ≤ s`).
pub fn referential_density(h: &ConstituentHistory, s: f64) -> f64 {
    let k_int = h.interp_rate_integral(s);
    let mut rho = h.rho0 * h.initial_survival(s, k_int);
    let nodes: Vec<f64> = h.cohorts.iter().map(|c| c.tau).filter(|&t| t <= s).collect();
    let weights = trapezoid_weights(&nodes);
    for (i, w) in weights.iter().enumerate() {
        rho += w * h.cohorts[i].production * h.cohort_survival(k_int, i);
    }
    rho
}

/// Right Cauchy–Green tensor of a cohort: `Cⁿ = Aᵀ·C·A`.
pub fn cohort_cauchy_green(a: &Tensor2, c: &Tensor2) -> Tensor2 {
    a.transpose() * *c * *a
}

/// Same as [`cohort_cauchy_green`] through the operator form `[(Aᵀ)⊙(Aᵀ)] : C`.
pub fn cohort_cauchy_green_operator(a: &Tensor2, c: &Tensor2) -> Tensor2 {
    let at = a.transpose();
    Tensor4::mixed_dyadic(&at, &at).ddot2(c)
}

/// `F_G = G·R(τ)`.
pub fn deposition_tensor(g: &Tensor2, f_tau: &Tensor2) -> Result<Tensor2> {
    Ok(*g * polar_rotation(f_tau)?)
}

/// Material tangent contribution of one cohort via the full operator form
/// `(A⊙A) : Ĉ : (Aᵀ⊙Aᵀ)`.
pub fn cohort_material_tangent_operator(a: &Tensor2, c_hat: &Tensor4) -> Tensor4 {
    let at = a.transpose();
    Tensor4::mixed_dyadic(a, a)
        .ddot4(c_hat)
        .ddot4(&Tensor4::mixed_dyadic(&at, &at))
}

/// Active smooth-muscle contribution and its stretch history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveMuscle {
    pub params: ActiveStressParams,
    /// Index of the constituent whose volume fraction scales the active stress.
    pub constituent: usize,
    pub times: Vec<f64>,
    /// `C(τ):H₀` at each committed time.
    pub values: Vec<f64>,
}

/// Trial state at the provisional end of a G&R step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub time: f64,
    pub f: Tensor2,
    pub delta_sigma: f64,
    pub delta_tau: f64,
}

impl Trial {
    pub fn at_rest(time: f64) -> Self {
        Trial {
            time,
            f: Tensor2::identity(),
            delta_sigma: 0.0,
            delta_tau: 0.0,
        }
    }
}

/// Per-constituent results of an evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstituentEval {
    pub density: f64,
    pub upsilon: f64,
    pub production: f64,
    pub removal_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEval {
    pub constituents: Vec<ConstituentEval>,
    /// Mass-based volume ratio `Σ ρ_R/ρ̂`.
    pub j_target: f64,
    /// Kinematic volume ratio `det F`.
    pub j: f64,
    pub pk2: Tensor2,
    /// Deformation-dependent Cauchy stress, passive plus active.
    pub sigma_bar: Tensor2,
    pub sigma_active: Tensor2,
    pub lambda_act: f64,
    pub c_bar: Option<Tensor4>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub constituents: Vec<ConstituentHistory>,
    pub active: Option<ActiveMuscle>,
    /// Drop cohorts whose survival fell below this threshold (0 keeps all).
    #[serde(default)]
    pub truncation: f64,
}

impl MixtureState {
    pub fn new(constituents: Vec<ConstituentHistory>) -> Self {
        Self {
            constituents,
            active: None,
            truncation: 0.0,
        }
    }

    pub fn with_active(mut self, params: ActiveStressParams, constituent: usize) -> Result<Self> {
        params.validate()?;
        if constituent >= self.constituents.len() {
            return Err(Error::InvalidArgument("active constituent index out of range".into()));
        }
        self.active = Some(ActiveMuscle {
            params,
            constituent,
            times: Vec::new(),
            values: Vec::new(),
        });
        Ok(self)
    }

    /// Evaluates densities, stimuli, stresses and (optionally) the tangent.
    pub fn evaluate(&self, trial: &Trial, with_tangent: bool) -> Result<MixtureEval> {
        let f = trial.f;
        let j = f.det();
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::kinematics(format!("det F must be positive (det = {j:e})")));
        }
        let c = f.transpose() * f;
        let s = trial.time;
        let input = StimulusInput {
            delta_sigma: trial.delta_sigma,
            delta_tau: trial.delta_tau,
            time: s,
        };
        let rotation = polar_rotation(&f)?;
        let finv = f.inverse()?;

        let mut pk2 = Tensor2::zeros();
        let mut c_mat = with_tangent.then(Tensor4::zeros);
        let mut evals = Vec::with_capacity(self.constituents.len());
        let mut j_target = 0.0;

        for hist in &self.constituents {
            let k_s = removal_rate(&hist.turnover, trial.delta_sigma, trial.delta_tau, s);
            let k_int = hist.rate_integral_to(s, k_s);
            let big_q = hist.initial_survival(s, k_int);
            let upsilon = stimulus(&hist.turnover, &input);

            // Trapezoid nodes: committed cohorts plus the trial endpoint.
            let mut nodes: Vec<f64> = hist.cohorts.iter().map(|c| c.tau).collect();
            let has_endpoint = hist.turnover.produces() && nodes.last().map_or(s > 0.0, |&t| s > t);
            if has_endpoint {
                nodes.push(s);
            }
            let weights = trapezoid_weights(&nodes);
            let survivals: Vec<f64> = (0..hist.cohorts.len())
                .map(|i| hist.cohort_survival(k_int, i))
                .collect();

            let mut rho_hist = hist.rho0 * big_q;
            for (i, cohort) in hist.cohorts.iter().enumerate() {
                rho_hist += weights[i] * cohort.production * survivals[i];
            }

            let w_end = if has_endpoint { weights[weights.len() - 1] } else { 0.0 };
            let (density, production) = endpoint_production(hist, rho_hist, w_end, upsilon, s);

            let scale = 1.0 / hist.rho_hat;
            // Initial cohort: A = G.
            if hist.rho0 > 0.0 && big_q > 0.0 {
                let w0 = hist.rho0 * big_q * scale;
                let h0 = hist.material.structural(&Tensor2::identity());
                accumulate(&hist.material, &hist.deposition, &h0, &c, w0, &mut pk2, c_mat.as_mut());
            }
            for (i, cohort) in hist.cohorts.iter().enumerate() {
                let w = weights[i] * cohort.production * survivals[i] * scale;
                if w != 0.0 {
                    accumulate(&hist.material, &cohort.a, &cohort.h, &c, w, &mut pk2, c_mat.as_mut());
                }
            }
            if has_endpoint && production != 0.0 {
                let a_s = finv * hist.deposition * rotation;
                let h_s = hist.material.structural(&rotation);
                let w = w_end * production * scale;
                accumulate(&hist.material, &a_s, &h_s, &c, w, &mut pk2, c_mat.as_mut());
            }

            j_target += density / hist.rho_hat;
            evals.push(ConstituentEval {
                density,
                upsilon,
                production,
                removal_rate: k_s,
            });
        }

        let passive = pushforward_stress(&f, &pk2, j)?;
        let (sigma_active, lambda_act) = match &self.active {
            Some(act) => {
                let lambda_act = active_stretch_with_endpoint(act, &c, s);
                let phi = evals[act.constituent].density / self.constituents[act.constituent].rho_hat;
                let sig = active_cauchy(&act.params, phi, lambda_act, trial.delta_tau, &f)?;
                (sig, lambda_act)
            }
            None => (Tensor2::zeros(), 0.0),
        };
        let c_bar = match c_mat {
            Some(cm) => Some(pushforward_elasticity(&f, &cm, j)?),
            None => None,
        };
        Ok(MixtureEval {
            constituents: evals,
            j_target,
            j,
            pk2,
            sigma_bar: passive + sigma_active,
            sigma_active,
            lambda_act,
            c_bar,
        })
    }

    /// Passive Cauchy stress summed cohort by cohort from `σ̂(s, τ)`,
    /// independent of the pullback route used by [`MixtureState::evaluate`].
    pub fn cauchy_direct(&self, trial: &Trial, eval: &MixtureEval) -> Result<Tensor2> {
        let f = trial.f;
        let j_s = f.det();
        let rotation = polar_rotation(&f)?;
        let mut sigma = Tensor2::zeros();
        for (hist, ev) in self.constituents.iter().zip(&eval.constituents) {
            let s = trial.time;
            let k_int = hist.rate_integral_to(s, ev.removal_rate);
            let big_q = hist.initial_survival(s, k_int);
            let sigma_hat = |fn_: &Tensor2, h: &Tensor2, j_tau: f64| -> Tensor2 {
                let cn = fn_.transpose() * *fn_;
                let s_hat = pk2_hat_unchecked(&hist.material, &cn, h);
                // det Fⁿ = J(s)/J(τ).
                fn_.congruence(&s_hat) * (j_tau / j_s)
            };
            // Spatial density at τ = 0 equals ρ_R(0) since F(0) = I.
            let h0 = hist.material.structural(&Tensor2::identity());
            let mut part = sigma_hat(&(f * hist.deposition), &h0, 1.0) * (hist.rho0 * big_q);

            let mut nodes: Vec<f64> = hist.cohorts.iter().map(|c| c.tau).collect();
            let has_endpoint = hist.turnover.produces() && nodes.last().map_or(s > 0.0, |&t| s > t);
            if has_endpoint {
                nodes.push(s);
            }
            let weights = trapezoid_weights(&nodes);
            for (i, cohort) in hist.cohorts.iter().enumerate() {
                let j_tau = cohort.f.det();
                let m_spatial = cohort.production / j_tau;
                let fn_ = f * cohort.a;
                part += sigma_hat(&fn_, &cohort.h, j_tau)
                    * (weights[i] * m_spatial * hist.cohort_survival(k_int, i));
            }
            if has_endpoint && ev.production != 0.0 {
                let fn_ = hist.deposition * rotation;
                let h = hist.material.structural(&rotation);
                let m_spatial = ev.production / j_s;
                part += sigma_hat(&fn_, &h, j_s) * (weights[weights.len() - 1] * m_spatial);
            }
            sigma += part * (1.0 / hist.rho_hat);
        }
        Ok(sigma)
    }

    /// Appends the converged cohort at the trial time.
    pub fn commit(&mut self, trial: &Trial, eval: &MixtureEval) -> Result<()> {
        let f = trial.f;
        let rotation = polar_rotation(&f)?;
        let finv = f.inverse()?;
        let s = trial.time;
        for (hist, ev) in self.constituents.iter_mut().zip(&eval.constituents) {
            let k_int = hist.rate_integral_to(s, ev.removal_rate);
            let is_new_time = hist.last_time().is_none_or(|t| s > t);
            if !is_new_time {
                return Err(Error::InvalidArgument(format!(
                    "cohorts must be committed in increasing time order (t = {s})"
                )));
            }
            hist.deviations.push(s, trial.delta_sigma, trial.delta_tau);
            hist.rate_integral.push(k_int);
            hist.rate_last = ev.removal_rate;
            if hist.turnover.produces() {
                hist.cohorts.push(Cohort {
                    tau: s,
                    production: ev.production,
                    f,
                    a: finv * hist.deposition * rotation,
                    h: hist.material.structural(&rotation),
                });
            }
        }
        if let Some(act) = &mut self.active {
            let c = f.transpose() * f;
            let h0 = Tensor2::outer(act.params.fiber, act.params.fiber);
            act.times.push(s);
            act.values.push(c.ddot(&h0));
        }
        if self.truncation > 0.0 {
            self.truncate(s);
        }
        Ok(())
    }

    fn truncate(&mut self, s: f64) {
        let threshold = self.truncation;
        for hist in &mut self.constituents {
            let k_int = hist.interp_rate_integral(s);
            let keep_from = (0..hist.cohorts.len())
                .find(|&i| hist.cohort_survival(k_int, i) >= threshold)
                .unwrap_or(hist.cohorts.len());
            if keep_from > 0 {
                hist.cohorts.drain(..keep_from);
            }
        }
    }

    /// Mass-based volume ratio from per-constituent densities.
    pub fn mixture_volume_ratio(&self, densities: &[f64]) -> f64 {
        self.constituents
            .iter()
            .zip(densities)
            .map(|(h, rho)| rho / h.rho_hat)
            .sum()
    }
}

/// Density and production at the trial endpoint.
///
/// For mechano kinds `m(s)` depends on `ρ_R(s)`, which itself includes the
/// endpoint weight `w·m(s)`; the linear relation is solved in closed form.
fn endpoint_production(hist: &ConstituentHistory, rho_hist: f64, w_end: f64, upsilon: f64, s: f64) -> (f64, f64) {
    match hist.turnover {
        TurnoverParams::Mechano { k_h, .. } => {
            let c = w_end * k_h * upsilon;
            let floor_rate = production_rate(&hist.turnover, 0.0, hist.rho_ref, upsilon, 0.0);
            if c < 0.5 {
                let rho = rho_hist / (1.0 - c);
                if rho >= hist.rho_ref {
                    return (rho, rho * k_h * upsilon);
                }
                (rho_hist + w_end * floor_rate, floor_rate)
            } else {
                // Very large stimulus over a long step; fall back to the
                // explicit rate from the last committed density.
                let rho_prev = referential_density(hist, hist.last_time().unwrap_or(0.0));
                let m = production_rate(&hist.turnover, rho_prev, hist.rho_ref, upsilon, 0.0);
                (rho_hist + w_end * m, m)
            }
        }
        TurnoverParams::Inflammatory { .. } => {
            let m = production_rate(&hist.turnover, 0.0, 0.0, upsilon, hist.paired_rate);
            let _ = s;
            (rho_hist + w_end * m, m)
        }
        _ => (rho_hist, 0.0),
    }
}

fn accumulate(
    material: &MaterialModel,
    a: &Tensor2,
    h: &Tensor2,
    c: &Tensor2,
    weight: f64,
    pk2: &mut Tensor2,
    c_mat: Option<&mut Tensor4>,
) {
    match *material {
        MaterialModel::NeoHookean { c: modulus } => {
            // A·(cI)·Aᵀ; Ĉ vanishes.
            *pk2 += (*a * a.transpose()) * (weight * modulus);
        }
        MaterialModel::Fung { c1, c2, .. } => {
            let cn = cohort_cauchy_green(a, c);
            let i4 = cn.ddot(h);
            let m = a.congruence(h);
            *pk2 += m * (weight * fung_stress_coefficient(c1, c2, i4));
            if let Some(cm) = c_mat {
                // (A⊙A):(H⊗H):(Aᵀ⊙Aᵀ) = (AHAᵀ)⊗(AHAᵀ).
                cm.add_scaled_dyad(weight * fung_tangent_coefficient(c1, c2, i4), &m);
            }
        }
    }
}

/// `∫_{-∞}^s k e^{−k(s−τ)} v(τ) dτ` for samples `v` at `times`, with `v`
/// piecewise linear between samples and held at `v(t₀)` before the first one.
/// The kernel is integrated exactly on each interval.
pub fn active_stretch(times: &[f64], values: &[f64], k_act: f64, s: f64) -> f64 {
    assert_eq!(times.len(), values.len());
    assert!(!times.is_empty(), "active stretch needs a non-empty history");
    let kernel = |t: f64| (-k_act * (s - t)).exp();
    let mut total = values[0] * kernel(times[0]);
    for i in 0..times.len() - 1 {
        let (a, b) = (times[i], times[i + 1]);
        let (va, vb) = (values[i], values[i + 1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        let eb = kernel(b);
        let diff = -eb * (-k_act * h).exp_m1();
        let ramp = if k_act * h < 1e-8 {
            0.5 * diff
        } else {
            eb - diff / (k_act * h)
        };
        total += va * diff + (vb - va) * ramp;
    }
    total
}

fn active_stretch_with_endpoint(act: &ActiveMuscle, c: &Tensor2, s: f64) -> f64 {
    let h0 = Tensor2::outer(act.params.fiber, act.params.fiber);
    let v_s = c.ddot(&h0);
    let mut times = act.times.clone();
    let mut values = act.values.clone();
    match times.last() {
        Some(&t) if s > t => {
            times.push(s);
            values.push(v_s);
        }
        Some(_) => {
            *values.last_mut().unwrap() = v_s;
        }
        None => {
            times.push(s);
            values.push(v_s);
        }
    }
    active_stretch(&times, &values, act.params.k_act, s)
}

/// Lagrange pressure from the thin-wall radial closure `σ_rr = −P/2`.
pub fn lagrange_pressure_membrane(sigma_bar: &Tensor2, lumen_pressure_kpa: f64) -> f64 {
    sigma_bar[(0, 0)] + 0.5 * lumen_pressure_kpa
}

/// `σ = −p I + σ̄`.
pub fn mixture_cauchy(sigma_bar: &Tensor2, pressure: f64) -> Tensor2 {
    *sigma_bar - Tensor2::identity() * pressure
}

pub fn structural_at_rest(h0: [f64; 3]) -> Tensor2 {
    structural_tensor(h0, &Tensor2::identity())
}

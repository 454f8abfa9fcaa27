//! Partitioned fluid–solid–growth iteration and the G&R time loop.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{aitken_step, AitkenState, LinearizedMaterial, DEFAULT_PENALTY_KPA};
use crate::hemodynamics::{self, HemodynamicField, DYN_PER_KPA};
use crate::membrane::{
    segment_deformation, solve_equilibrium_linearized, solve_equilibrium_newton, wall_state, StressMetric,
    VesselSegment, WallState,
};
use crate::mixture::{lagrange_pressure_membrane, MixtureEval, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Alg2,
    Alg3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HomeostasisMode {
    Table,
    #[default]
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolidSolver {
    #[default]
    Linearized,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    pub dt_day: f64,
    pub t_max_day: f64,
    pub n_max: usize,
    pub k_max: usize,
    pub j_max: usize,
    pub eps_r: f64,
    pub eps_tau: f64,
    pub eps_sigma: f64,
    pub eps_j: f64,
    pub omega0: f64,
    pub algorithm: Algorithm,
    pub homeostasis: HomeostasisMode,
    pub solid_solver: SolidSolver,
    #[serde(rename = "k_p_kPa")]
    pub k_p: f64,
    pub stress_metric: StressMetric,
    /// Per-iteration displacement ramp; 1 leaves the solid update untouched.
    pub ramp: f64,
    /// Axial smoothing half-width applied to the stimulus inputs (cm).
    #[serde(rename = "smoothing_cm")]
    pub smoothing: f64,
    /// Drop cohorts whose survival fell below this value (0 keeps all).
    pub history_truncation: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            dt_day: 4.0,
            t_max_day: 720.0,
            n_max: 100,
            k_max: 50,
            j_max: 50,
            eps_r: 1e-5,
            eps_tau: 1e-4,
            eps_sigma: 1e-4,
            eps_j: 1e-4,
            omega0: 0.5,
            algorithm: Algorithm::Alg2,
            homeostasis: HomeostasisMode::Measured,
            solid_solver: SolidSolver::Linearized,
            k_p: DEFAULT_PENALTY_KPA,
            stress_metric: StressMetric::Trace,
            ramp: 1.0,
            smoothing: 0.0,
            history_truncation: 0.0,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("coupling.dt_day", self.dt_day),
            ("coupling.eps_r", self.eps_r),
            ("coupling.eps_tau", self.eps_tau),
            ("coupling.eps_sigma", self.eps_sigma),
            ("coupling.eps_j", self.eps_j),
            ("coupling.k_p_kPa", self.k_p),
            ("coupling.ramp", self.ramp),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive (got {v})")));
            }
        }
        if self.t_max_day < 0.0 {
            return Err(Error::config("coupling.t_max_day", "must be non-negative"));
        }
        let steps = self.t_max_day / self.dt_day;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::config(
                "coupling.t_max_day",
                format!("must be a multiple of dt_day = {}", self.dt_day),
            ));
        }
        if self.n_max == 0 || self.k_max == 0 || self.j_max == 0 {
            return Err(Error::config("coupling.n_max", "iteration caps must be ≥ 1"));
        }
        if !(0.0..1.0).contains(&self.history_truncation) {
            return Err(Error::config("coupling.history_truncation", "must lie in [0, 1)"));
        }
        if self.smoothing < 0.0 {
            return Err(Error::config("coupling.smoothing_cm", "must be ≥ 0"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_max_day / self.dt_day).round() as usize
    }
}

/// Steady flow boundary conditions (CGS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConditions {
    pub flow: f64,
    pub resistance: f64,
    pub viscosity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub r_tol: f64,
    pub tau_tol: f64,
    pub sigma_tol: f64,
    pub j_tol: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub fluid_evaluations: usize,
    pub converged: bool,
    /// Largest `|σ_θθ − P·a/h| / (P·a/h)` over segments at the accepted state.
    pub equilibrium_residual: f64,
    /// Largest `|det F − J_target| / J_target` over segments.
    pub j_consistency: f64,
}

/// Quantities compared between successive iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSnapshot {
    /// `[a − a₀, h − h₀]` per segment (cm).
    pub displacement: Vec<f64>,
    pub wss: Vec<f64>,
    pub sigma_inv: Vec<f64>,
    pub j: Vec<f64>,
}

/// Normalizations per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricScales {
    pub a0: Vec<f64>,
    pub tau_h: Vec<f64>,
    pub sigma_h: Vec<f64>,
}

pub fn convergence_metrics(prev: &IterationSnapshot, next: &IterationSnapshot, scales: &MetricScales) -> ConvergenceReport {
    let mut rep = ConvergenceReport::default();
    for (i, (p, n)) in prev.displacement.iter().zip(&next.displacement).enumerate() {
        rep.r_tol = rep.r_tol.max((n - p).abs() / scales.a0[i / 2]);
    }
    for i in 0..prev.wss.len() {
        rep.tau_tol = rep.tau_tol.max(((next.wss[i] - prev.wss[i]) / scales.tau_h[i]).abs());
        rep.sigma_tol = rep
            .sigma_tol
            .max(((next.sigma_inv[i] - prev.sigma_inv[i]) / scales.sigma_h[i]).abs());
        rep.j_tol = rep.j_tol.max((next.j[i] / prev.j[i] - 1.0).abs());
    }
    rep
}

fn passes(rep: &ConvergenceReport, cfg: &CouplingConfig, with_fluid: bool) -> bool {
    rep.r_tol < cfg.eps_r
        && rep.sigma_tol < cfg.eps_sigma
        && rep.j_tol < cfg.eps_j
        && (!with_fluid || rep.tau_tol < cfg.eps_tau)
}

/// Growth-domain state of one segment at the current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentIterate {
    pub lambda_theta: f64,
    pub j: f64,
    pub trial: Trial,
    pub eval: MixtureEval,
    pub wall: WallState,
    pub sigma_inv: f64,
    pub lumen_kpa: f64,
    pub wss: f64,
}

/// One converged output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub t_day: f64,
    pub segment: usize,
    pub a_cm: f64,
    pub h_cm: f64,
    pub lambda_theta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub p_dyn_cm2: f64,
    pub wss_dyn_cm2: f64,
    #[serde(rename = "sigma_inv_kPa")]
    pub sigma_inv_kpa: f64,
    pub rho_r: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub iters: usize,
    #[serde(default)]
    pub delta_sigma: f64,
    #[serde(default)]
    pub delta_tau: f64,
}

/// Whole-vessel state driven by the coupling loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsgState {
    pub segments: Vec<VesselSegment>,
    pub flow: FlowConditions,
    pub time: f64,
    /// Stimulus deviations `(Δσ_f, Δτ_f)` at the last accepted state.
    pub deviations: Vec<(f64, f64)>,
    pub fluid: Option<HemodynamicField>,
    #[serde(default)]
    pub fluid_evaluations: usize,
}

impl FsgState {
    pub fn new(segments: Vec<VesselSegment>, flow: FlowConditions) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("vessel needs at least one segment".into()));
        }
        if !(flow.flow > 0.0 && flow.viscosity > 0.0 && flow.resistance >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid flow conditions {flow:?}")));
        }
        let n = segments.len();
        Ok(Self {
            segments,
            flow,
            time: 0.0,
            deviations: vec![(0.0, 0.0); n],
            fluid: None,
            fluid_evaluations: 0,
        })
    }

    fn displacement_of(&self, geo: &[(f64, f64)]) -> Vec<f64> {
        let mut d = Vec::with_capacity(2 * geo.len());
        for (seg, &(a, h)) in self.segments.iter().zip(geo) {
            d.push(a - seg.a0);
            d.push(h - seg.h0);
        }
        d
    }

    /// Per-segment `(λ_θ, J)` for a displacement vector.
    fn kinematics_of(&self, d: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                let a = seg.a0 + d[2 * i];
                let h = seg.h0 + d[2 * i + 1];
                if !(a > 0.0 && h > 0.0) {
                    return Err(Error::Geometry(format!("segment {i} collapsed (a = {a}, h = {h})")));
                }
                let lt = a / seg.a0;
                Ok((lt, h * lt / seg.h0))
            })
            .collect()
    }

    pub fn evaluate_fluid(&mut self, kin: &[(f64, f64)]) -> Result<HemodynamicField> {
        let geo: Vec<(f64, f64)> = self
            .segments
            .iter()
            .zip(kin)
            .map(|(s, &(lt, _))| (lt * s.a0, s.length))
            .collect();
        self.fluid_evaluations += 1;
        hemodynamics::evaluate(&geo, self.flow.flow, self.flow.viscosity, self.flow.resistance)
    }

    fn smoothed_inputs(&self, field: &HemodynamicField, cfg: &CouplingConfig) -> Result<(Vec<f64>, Vec<f64>)> {
        let z: Vec<f64> = self.segments.iter().map(|s| s.z).collect();
        let p = hemodynamics::smooth_axial(&field.pressure, &z, cfg.smoothing)?;
        let w = hemodynamics::smooth_axial(&field.wss, &z, cfg.smoothing)?;
        Ok((p, w))
    }

    /// Growth step `G(d)`: evaluates every segment's mixture at the given
    /// kinematics, with stimuli lagged from the previous iterate.
    #[allow(clippy::too_many_arguments)]
    fn growth(
        &self,
        time: f64,
        kin: &[(f64, f64)],
        lumen_dyn: &[f64],
        wss: &[f64],
        deviations: &[(f64, f64)],
        cfg: &CouplingConfig,
        with_tangent: bool,
    ) -> Result<Vec<SegmentIterate>> {
        self.segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                let (lt, j) = kin[i];
                let f = segment_deformation(lt, j)?;
                let trial = Trial {
                    time,
                    f,
                    delta_sigma: deviations[i].0,
                    delta_tau: deviations[i].1,
                };
                let eval = seg.mixture.evaluate(&trial, with_tangent)?;
                let lumen_kpa = lumen_dyn[i] / DYN_PER_KPA;
                let wall = wall_state(seg.a0, seg.h0, lt, j, &eval, lumen_kpa);
                // The hoop component enters as its Laplace value so an
                // out-of-balance iterate does not feed spurious stress into
                // the stimulus; both agree once the wall is in equilibrium.
                let sigma_inv = cfg.stress_metric.apply(&wall.sigma) - wall.residual;
                Ok(SegmentIterate {
                    lambda_theta: lt,
                    j,
                    trial,
                    eval,
                    wall,
                    sigma_inv,
                    lumen_kpa,
                    wss: wss[i],
                })
            })
            .collect()
    }

    fn next_deviations(&self, its: &[SegmentIterate]) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .zip(its)
            .map(|(seg, it)| (it.sigma_inv / seg.sigma_h - 1.0, it.wss / seg.tau_h - 1.0))
            .collect()
    }

    /// Solid step `S(p, σ)`: unrelaxed displacement from the current iterate.
    fn solid(&self, its: &[SegmentIterate], lumen_kpa: &[f64], cfg: &CouplingConfig) -> Result<Vec<f64>> {
        let mut geo = Vec::with_capacity(its.len());
        for (i, (seg, it)) in self.segments.iter().zip(its).enumerate() {
            let mut at = seg.clone();
            at.lambda_theta = it.lambda_theta;
            at.j = it.j;
            let (lt, j) = match cfg.solid_solver {
                SolidSolver::Linearized => {
                    let c_bar = it
                        .eval
                        .c_bar
                        .clone()
                        .ok_or_else(|| Error::InvalidArgument("linearized solve needs the tangent".into()))?;
                    let mat = LinearizedMaterial {
                        sigma_bar: it.eval.sigma_bar,
                        c_bar,
                        pressure: lagrange_pressure_membrane(&it.eval.sigma_bar, lumen_kpa[i]),
                        j_star: it.eval.j_target / it.j,
                        k_p: cfg.k_p,
                    };
                    let up = solve_equilibrium_linearized(&at, lumen_kpa[i], &mat)?;
                    (up.lambda_theta, up.j)
                }
                SolidSolver::Newton => {
                    let j = it.eval.j_target;
                    let lt = solve_equilibrium_newton(&at, lumen_kpa[i], &it.trial, j, seg.sigma_h.abs())?;
                    (lt, j)
                }
            };
            geo.push((lt * seg.a0, seg.h0 * j / lt));
        }
        Ok(self.displacement_of(&geo))
    }

    fn snapshot(&self, d: &[f64], its: &[SegmentIterate]) -> IterationSnapshot {
        IterationSnapshot {
            displacement: d.to_vec(),
            wss: its.iter().map(|it| it.wss).collect(),
            sigma_inv: its.iter().map(|it| it.sigma_inv).collect(),
            j: its.iter().map(|it| it.eval.j_target).collect(),
        }
    }

    fn scales(&self) -> MetricScales {
        MetricScales {
            a0: self.segments.iter().map(|s| s.a0).collect(),
            tau_h: self.segments.iter().map(|s| s.tau_h.abs()).collect(),
            sigma_h: self.segments.iter().map(|s| s.sigma_h.abs()).collect(),
        }
    }

    fn current_kinematics(&self) -> Vec<(f64, f64)> {
        self.segments.iter().map(|s| (s.lambda_theta, s.j)).collect()
    }
}

/// Accepted iterate handed back by a timestep routine.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub report: ConvergenceReport,
    pub iterates: Vec<SegmentIterate>,
    pub fluid: HemodynamicField,
}

struct Iteration<'a> {
    state: &'a mut FsgState,
    cfg: &'a CouplingConfig,
    time: f64,
    d: Vec<f64>,
    its: Vec<SegmentIterate>,
    deviations: Vec<(f64, f64)>,
    aitken: AitkenState,
    lumen_dyn: Vec<f64>,
    wss: Vec<f64>,
    fluid: HemodynamicField,
    iterations: usize,
}

impl<'a> Iteration<'a> {
    fn start(state: &'a mut FsgState, cfg: &'a CouplingConfig, time: f64) -> Result<Self> {
        let kin = state.current_kinematics();
        let fluid = match state.fluid.clone() {
            Some(f) => f,
            None => state.evaluate_fluid(&kin)?,
        };
        let (lumen_dyn, wss) = state.smoothed_inputs(&fluid, cfg)?;
        let deviations = state.deviations.clone();
        let with_tangent = cfg.solid_solver == SolidSolver::Linearized;
        let its = state.growth(time, &kin, &lumen_dyn, &wss, &deviations, cfg, with_tangent)?;
        let geo: Vec<(f64, f64)> = its.iter().map(|it| (it.wall.a, it.wall.h)).collect();
        let d = state.displacement_of(&geo);
        let aitken = AitkenState {
            omega: cfg.omega0,
            residual: None,
            iteration: 0,
        };
        Ok(Self {
            state,
            cfg,
            time,
            d,
            its,
            deviations,
            aitken,
            lumen_dyn,
            wss,
            fluid,
            iterations: 0,
        })
    }

    fn lumen_kpa(&self) -> Vec<f64> {
        self.lumen_dyn.iter().map(|p| p / DYN_PER_KPA).collect()
    }

    /// Solid solve, relaxation and (optionally) a fluid evaluation, then the
    /// growth update. Returns the metrics against the previous iterate.
    fn sweep(&mut self, refresh_fluid: bool) -> Result<ConvergenceReport> {
        let prev = self.state.snapshot(&self.d, &self.its);
        let mut d_tilde = self.state.solid(&self.its, &self.lumen_kpa(), self.cfg)?;
        if self.cfg.ramp != 1.0 {
            for (t, p) in d_tilde.iter_mut().zip(&self.d) {
                *t = p + self.cfg.ramp * (*t - p);
            }
        }
        let (d_next, aitken) = aitken_step(&self.aitken, &self.d, &d_tilde)?;
        self.aitken = aitken;
        let kin = self.state.kinematics_of(&d_next)?;
        if refresh_fluid {
            self.fluid = self.state.evaluate_fluid(&kin)?;
            let (p, w) = self.state.smoothed_inputs(&self.fluid, self.cfg)?;
            self.lumen_dyn = p;
            self.wss = w;
        }
        // Stress stimulus lags one iterate; WSS comes from the latest fluid solve.
        self.deviations = self
            .state
            .segments
            .iter()
            .zip(&self.its)
            .zip(&self.wss)
            .map(|((seg, it), w)| (it.sigma_inv / seg.sigma_h - 1.0, w / seg.tau_h - 1.0))
            .collect();
        let with_tangent = self.cfg.solid_solver == SolidSolver::Linearized;
        self.its = self.state.growth(
            self.time,
            &kin,
            &self.lumen_dyn,
            &self.wss,
            &self.deviations,
            self.cfg,
            with_tangent,
        )?;
        self.d = d_next;
        self.iterations += 1;
        // r is measured on the unrelaxed update.
        let next = self.state.snapshot(&d_tilde, &self.its);
        Ok(convergence_metrics(&prev, &next, &self.state.scales()))
    }

    fn finish(self, mut report: ConvergenceReport, outer: usize) -> StepOutcome {
        report.iterations = self.iterations;
        report.outer_iterations = outer;
        report.converged = true;
        for it in &self.its {
            let target = it.lumen_kpa * it.wall.a / it.wall.h;
            let scale = target.abs().max(f64::MIN_POSITIVE);
            report.equilibrium_residual = report.equilibrium_residual.max(it.wall.residual.abs() / scale);
            report.j_consistency = report
                .j_consistency
                .max((it.j - it.eval.j_target).abs() / it.eval.j_target);
        }
        StepOutcome {
            report,
            iterates: self.its,
            fluid: self.fluid,
        }
    }

    fn fail(&self, mut report: ConvergenceReport, outer: usize) -> Error {
        report.iterations = self.iterations;
        report.outer_iterations = outer;
        report.fluid_evaluations = self.state.fluid_evaluations;
        Error::NonConvergence {
            time: self.time,
            iterations: self.iterations,
            report: Box::new(report),
        }
    }
}

/// Partitioned loop with one fluid evaluation per iteration.
pub fn run_timestep_alg2(state: &mut FsgState, cfg: &CouplingConfig, time: f64) -> Result<StepOutcome> {
    let fluid_before = state.fluid_evaluations;
    let mut it = Iteration::start(state, cfg, time)?;
    let mut report = ConvergenceReport::default();
    for n in 0..cfg.n_max {
        report = it.sweep(true)?;
        debug!("t = {time} alg2 n = {n}: {report:?}");
        if passes(&report, cfg, true) {
            let fluid_evals = it.state.fluid_evaluations - fluid_before;
            let mut out = it.finish(report, n + 1);
            out.report.fluid_evaluations = fluid_evals;
            return Ok(out);
        }
    }
    Err(it.fail(report, cfg.n_max))
}

/// Solid–growth iterations converge with the fluid held fixed before each
/// fluid evaluation.
pub fn run_timestep_alg3(state: &mut FsgState, cfg: &CouplingConfig, time: f64) -> Result<StepOutcome> {
    let fluid_before = state.fluid_evaluations;
    let mut it = Iteration::start(state, cfg, time)?;
    let mut report = ConvergenceReport::default();
    for k in 0..cfg.k_max {
        let mut inner_ok = false;
        for _ in 0..cfg.j_max {
            let inner = it.sweep(false)?;
            if passes(&inner, cfg, false) {
                inner_ok = true;
                break;
            }
        }
        if !inner_ok {
            debug!("t = {time} alg3 k = {k}: inner loop hit j_max");
        }
        let wss_before = it.wss.clone();
        report = it.sweep(true)?;
        // τ_tol compares the two latest fluid solutions.
        report.tau_tol = it
            .wss
            .iter()
            .zip(&wss_before)
            .zip(&it.state.segments)
            .map(|((n, p), s)| ((n - p) / s.tau_h).abs())
            .fold(0.0, f64::max);
        debug!("t = {time} alg3 k = {k}: {report:?}");
        if passes(&report, cfg, true) {
            let fluid_evals = it.state.fluid_evaluations - fluid_before;
            let mut out = it.finish(report, k + 1);
            out.report.fluid_evaluations = fluid_evals;
            return Ok(out);
        }
    }
    Err(it.fail(report, cfg.k_max))
}

pub fn run_timestep(state: &mut FsgState, cfg: &CouplingConfig, time: f64) -> Result<StepOutcome> {
    match cfg.algorithm {
        Algorithm::Alg2 => run_timestep_alg2(state, cfg, time),
        Algorithm::Alg3 => run_timestep_alg3(state, cfg, time),
    }
}

/// Stores the accepted iterate, commits cohorts and returns one record per
/// segment.
pub fn accept(state: &mut FsgState, outcome: &StepOutcome, time: f64) -> Result<Vec<TimeSeriesRecord>> {
    let deviations = state.next_deviations(&outcome.iterates);
    let mut rows = Vec::with_capacity(state.segments.len());
    for (i, (seg, it)) in state.segments.iter_mut().zip(&outcome.iterates).enumerate() {
        seg.mixture.commit(&it.trial, &it.eval)?;
        seg.lambda_theta = it.lambda_theta;
        seg.j = it.j;
        rows.push(TimeSeriesRecord {
            t_day: time,
            segment: i,
            a_cm: it.wall.a,
            h_cm: it.wall.h,
            lambda_theta: it.lambda_theta,
            j: it.j,
            p_dyn_cm2: it.lumen_kpa * DYN_PER_KPA,
            wss_dyn_cm2: it.wss,
            sigma_inv_kpa: it.sigma_inv,
            rho_r: it.eval.constituents.iter().map(|c| c.density).collect(),
            upsilon: it.eval.constituents.iter().map(|c| c.upsilon).collect(),
            iters: outcome.report.iterations,
            delta_sigma: it.trial.delta_sigma,
            delta_tau: it.trial.delta_tau,
        });
    }
    state.deviations = deviations;
    state.fluid = Some(outcome.fluid.clone());
    state.time = time;
    Ok(rows)
}

/// Initialization report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub max_residual: f64,
    pub sigma_h: Vec<f64>,
    pub tau_h: Vec<f64>,
}

pub const INIT_RESIDUAL_WARN: f64 = 1e-6;

/// Sets `F(0) = I`, evaluates the initial mixture and hemodynamics, fixes the
/// homeostatic targets (measured mode) and commits the `s = 0` cohort.
pub fn homeostatic_initialize(
    state: &mut FsgState,
    cfg: &CouplingConfig,
    baseline: Option<&FlowConditions>,
) -> Result<(InitReport, Vec<TimeSeriesRecord>)> {
    cfg.validate()?;
    for seg in &mut state.segments {
        seg.lambda_theta = 1.0;
        seg.j = 1.0;
    }
    let kin = state.current_kinematics();
    let running = state.flow.clone();
    if let Some(b) = baseline {
        state.flow = b.clone();
    }
    let fluid = state.evaluate_fluid(&kin);
    state.flow = running;
    let fluid = fluid?;
    let (lumen_dyn, wss) = state.smoothed_inputs(&fluid, cfg)?;
    let zero = vec![(0.0, 0.0); state.segments.len()];
    let first = state.growth(0.0, &kin, &lumen_dyn, &wss, &zero, cfg, false)?;
    if cfg.homeostasis == HomeostasisMode::Measured {
        for (seg, it) in state.segments.iter_mut().zip(&first) {
            seg.sigma_h = it.sigma_inv;
            seg.tau_h = it.wss;
        }
        for i in 0..state.segments.len() {
            if let Some(src) = state.segments[i].target_source {
                let src = state
                    .segments
                    .get(src)
                    .ok_or_else(|| Error::config("target_source", format!("segment {src} does not exist")))?;
                let (sh, th) = (src.sigma_h, src.tau_h);
                state.segments[i].sigma_h = sh;
                state.segments[i].tau_h = th;
            }
        }
    }
    for (i, seg) in state.segments.iter().enumerate() {
        if !(seg.sigma_h.abs() > 0.0 && seg.tau_h > 0.0) {
            return Err(Error::config(
                "homeostasis",
                format!("segment {i} has zero homeostatic targets (σ_h = {}, τ_h = {})", seg.sigma_h, seg.tau_h),
            ));
        }
    }
    let deviations = state.next_deviations(&first);
    let its = state.growth(0.0, &kin, &lumen_dyn, &wss, &deviations, cfg, false)?;
    let mut max_residual: f64 = 0.0;
    for (i, it) in its.iter().enumerate() {
        let target = (it.lumen_kpa * it.wall.a / it.wall.h).abs().max(f64::MIN_POSITIVE);
        let rel = it.wall.residual.abs() / target;
        if rel > INIT_RESIDUAL_WARN {
            warn!("segment {i}: initial equilibrium residual {rel:.3e} (relative)");
        }
        max_residual = max_residual.max(rel);
    }
    let outcome = StepOutcome {
        report: ConvergenceReport {
            converged: true,
            equilibrium_residual: max_residual,
            ..Default::default()
        },
        iterates: its,
        fluid,
    };
    // The baseline fluid state is not reused once the running load applies.
    let rows = accept(state, &outcome, 0.0)?;
    if baseline.is_some() {
        state.fluid = None;
    }
    let report = InitReport {
        max_residual,
        sigma_h: state.segments.iter().map(|s| s.sigma_h).collect(),
        tau_h: state.segments.iter().map(|s| s.tau_h).collect(),
    };
    Ok((report, rows))
}

/// Output of a full run. `failure` is set when the loop stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub records: Vec<TimeSeriesRecord>,
    pub reports: Vec<ConvergenceReport>,
    pub init: InitReport,
    pub failure: Option<String>,
    pub fluid_evaluations: usize,
}

impl SimulationOutput {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    /// Records of one segment in time order.
    pub fn segment(&self, index: usize) -> impl Iterator<Item = &TimeSeriesRecord> {
        self.records.iter().filter(move |r| r.segment == index)
    }
}

/// Initializes (unless the state already carries history) and advances to
/// `t_max`. Non-convergence stops the loop and is reported in `failure`.
pub fn run_simulation(
    state: &mut FsgState,
    cfg: &CouplingConfig,
    baseline: Option<&FlowConditions>,
) -> Result<SimulationOutput> {
    cfg.validate()?;
    let (init, mut records) = if state.segments[0].mixture.constituents[0].deviations.times.is_empty() {
        homeostatic_initialize(state, cfg, baseline)?
    } else {
        let init = InitReport {
            max_residual: 0.0,
            sigma_h: state.segments.iter().map(|s| s.sigma_h).collect(),
            tau_h: state.segments.iter().map(|s| s.tau_h).collect(),
        };
        (init, Vec::new())
    };
    let start = state.time;
    let mut reports = Vec::with_capacity(cfg.steps());
    let mut failure = None;
    for step in 1..=cfg.steps() {
        let time = start + step as f64 * cfg.dt_day;
        match run_timestep(state, cfg, time) {
            Ok(outcome) => {
                records.extend(accept(state, &outcome, time)?);
                reports.push(outcome.report);
            }
            Err(e @ Error::NonConvergence { .. }) => {
                failure = Some(e.to_string());
                if let Error::NonConvergence { report, .. } = e {
                    reports.push(*report);
                }
                break;
            }
            // A step that cannot find a valid state ends the run like a
            // non-converged one; the converged prefix is still returned.
            Err(e @ (Error::EquilibriumNotFound(_) | Error::Geometry(_) | Error::InvalidKinematics(_))) => {
                failure = Some(format!("t = {time} d: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SimulationOutput {
        records,
        reports,
        init,
        failure,
        fluid_evaluations: state.fluid_evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{load_preset, Scenario};

    fn ivc(t_max: f64) -> Scenario {
        let mut cfg = load_preset("ovine-ivc").unwrap();
        cfg.coupling.t_max_day = t_max;
        Scenario::from_config(&cfg).unwrap()
    }

    #[test]
    fn metrics_are_normalized() {
        let prev = IterationSnapshot {
            displacement: vec![0.0, 0.0],
            wss: vec![10.0],
            sigma_inv: vec![100.0],
            j: vec![1.0],
        };
        let next = IterationSnapshot {
            displacement: vec![0.02, 0.001],
            wss: vec![11.0],
            sigma_inv: vec![95.0],
            j: vec![1.01],
        };
        let scales = MetricScales {
            a0: vec![2.0],
            tau_h: vec![20.0],
            sigma_h: vec![50.0],
        };
        let r = convergence_metrics(&prev, &next, &scales);
        assert!((r.r_tol - 0.01).abs() < 1e-15);
        assert!((r.tau_tol - 0.05).abs() < 1e-15);
        assert!((r.sigma_tol - 0.1).abs() < 1e-15);
        assert!((r.j_tol - 0.01).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_bad_grid() {
        let cfg = CouplingConfig {
            t_max_day: 10.0,
            dt_day: 4.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        assert_eq!(CouplingConfig::default().steps(), 180);
    }

    #[test]
    fn measured_initialization_zeroes_deviations() {
        let mut s = ivc(0.0);
        let out = s.run().unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.t_day, 0.0);
        assert!(out.init.max_residual < 1e-9);
        assert!((r.sigma_inv_kpa / out.init.sigma_h[0] - 1.0).abs() < 1e-12);
        assert!((r.wss_dyn_cm2 / out.init.tau_h[0] - 1.0).abs() < 1e-12);
        for u in &r.upsilon[1..] {
            assert!((u - 1.0).abs() < 1e-9);
        }
        // One cohort per producing constituent at s = 0.
        let mix = &s.state.segments[0].mixture;
        assert_eq!(mix.constituents[1].cohorts.len(), 1);
        assert!(mix.constituents[0].cohorts.is_empty());
    }

    #[test]
    fn unloaded_steps_stay_put() {
        let mut s = ivc(16.0);
        let out = s.run().unwrap();
        assert!(out.completed());
        assert_eq!(out.reports.len(), 4);
        for r in out.segment(0) {
            assert!((r.a_cm / 0.8573 - 1.0).abs() < 1e-4);
        }
        assert!(out.reports.iter().all(|r| r.converged && r.fluid_evaluations >= 1));
    }

    #[test]
    fn alg2_and_alg3_agree_on_one_step() {
        let mut cfg = load_preset("ivc-hypertension").unwrap();
        cfg.coupling.t_max_day = 8.0;
        let mut a = Scenario::from_config(&cfg).unwrap();
        cfg.coupling.algorithm = Algorithm::Alg3;
        let mut b = Scenario::from_config(&cfg).unwrap();
        let (ra, rb) = (a.run().unwrap(), b.run().unwrap());
        let (la, lb) = (ra.records.last().unwrap(), rb.records.last().unwrap());
        assert!((la.a_cm / lb.a_cm - 1.0).abs() < 1e-4);
        assert!((la.h_cm / lb.h_cm - 1.0).abs() < 1e-4);
    }
}

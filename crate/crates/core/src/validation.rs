//! Shipped benchmark checks used by the `validate` subcommand.
//!
//! References are closed-form values (survival sigmoids, the WSS-restoration
//! radius, the inflammatory peak) rather than stored trajectories, so the
//! checks do not depend on any previous run of this code.

use std::path::Path;

use crate::constituent::ActiveStressParams;
use crate::coupling::{SimulationOutput, TimeSeriesRecord};
use crate::error::{Error, Result};
use crate::output::{thin_records, write_timeseries, RunFiles};
use crate::scenario::{load_preset, Scenario};
use crate::turnover::{inflammatory_burden, polymer_survival, TurnoverParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `|value − reference| ≤ tolerance`.
    pub fn near(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            passed: (value - reference).abs() <= tolerance,
        }
    }

    /// `value < bound`.
    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference: bound,
            tolerance: 0.0,
            passed: value < bound,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference: 0.5 * (lo + hi),
            tolerance: 0.5 * (hi - lo),
            passed: (lo..=hi).contains(&value),
        }
    }
}

/// A finished benchmark run.
pub struct Benchmark {
    pub scenario: Scenario,
    pub output: SimulationOutput,
}

impl Benchmark {
    pub fn run(preset: &str) -> Result<Self> {
        let cfg = load_preset(preset)?;
        let mut scenario = Scenario::from_config(&cfg)?;
        let output = scenario.run()?;
        Ok(Self { scenario, output })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.scenario
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no constituent `{name}`")))
    }

    pub fn segment(&self, i: usize) -> Vec<&TimeSeriesRecord> {
        self.output.segment(i).collect()
    }

    pub fn last(&self, i: usize) -> Result<&TimeSeriesRecord> {
        self.output
            .segment(i)
            .last()
            .ok_or_else(|| Error::InvalidArgument(format!("no records for segment {i}")))
    }

    /// `(Δσ_f, Δτ_f)` of a record against the segment's targets.
    pub fn deviations(&self, r: &TimeSeriesRecord) -> (f64, f64) {
        let sh = self.output.init.sigma_h[r.segment];
        let th = self.output.init.tau_h[r.segment];
        (r.sigma_inv_kpa / sh - 1.0, r.wss_dyn_cm2 / th - 1.0)
    }

    pub fn at(&self, i: usize, t: f64) -> Option<&TimeSeriesRecord> {
        self.output.segment(i).find(|r| (r.t_day - t).abs() < 1e-9)
    }

    /// Segments whose initial density of `name` is positive.
    pub fn segments_with(&self, name: &str) -> Result<Vec<usize>> {
        let c = self.column(name)?;
        Ok(self
            .output
            .records
            .iter()
            .filter(|r| r.t_day == 0.0 && r.rho_r[c] > 0.0)
            .map(|r| r.segment)
            .collect())
    }

    fn write(&self, out: &Path) -> Result<()> {
        let files = RunFiles::in_dir(out, &self.scenario.config.name);
        let rows = thin_records(&self.output.records, self.scenario.config.output.cadence);
        write_timeseries(&rows, &self.scenario.names, &files.timeseries)
    }
}

fn homeostatic(out: &Path) -> Result<Vec<Check>> {
    let b = Benchmark::run("ovine-ivc")?;
    b.write(out)?;
    let seg = b.segment(0);
    let a0 = seg[0].a_cm;
    let radius = seg.iter().map(|r| (r.a_cm / a0 - 1.0).abs()).fold(0.0, f64::max);
    let mut density: f64 = 0.0;
    for (c, rho0) in seg[0].rho_r.iter().enumerate() {
        if *rho0 > 0.0 {
            density = seg.iter().map(|r| (r.rho_r[c] / rho0 - 1.0).abs()).fold(density, f64::max);
        }
    }
    Ok(vec![
        Check::below("ovine-ivc: max |a/a0 - 1|", radius, 0.01),
        Check::below("ovine-ivc: max density drift", density, 0.02),
        Check::near("ovine-ivc: completed", b.output.completed() as u8 as f64, 1.0, 0.0),
    ])
}

fn hypertension(out: &Path) -> Result<Vec<Check>> {
    let b = Benchmark::run("ivc-hypertension")?;
    b.write(out)?;
    let (ds, dt) = b.deviations(b.last(0)?);
    Ok(vec![
        Check::below("ivc-hypertension: |dsigma| at end", ds.abs(), 0.10),
        Check::below("ivc-hypertension: |dtau| at end", dt.abs(), 0.10),
    ])
}

fn flow(out: &Path) -> Result<Vec<Check>> {
    let b = Benchmark::run("ivc-flow")?;
    b.write(out)?;
    let first = &b.segment(0)[0];
    let hemo = &b.scenario.config.hemodynamics;
    let ratio = hemo.flow / hemo.baseline_flow.unwrap_or(hemo.flow);
    let target = first.a_cm * ratio.cbrt();
    let a = b.last(0)?.a_cm;
    Ok(vec![Check::near("ivc-flow: final radius (cm)", a, target, 0.02 * target)])
}

fn tevg(out: &Path) -> Result<Vec<Check>> {
    let b = Benchmark::run("tevg-interposition")?;
    b.write(out)?;
    let graft = b.segments_with("p1")?;
    let g = *graft.first().ok_or_else(|| Error::InvalidArgument("no graft segment".into()))?;
    let t_end = b.scenario.config.coupling.t_max_day;
    let mut checks = Vec::new();
    for name in ["p1", "p2"] {
        let cfg = b.scenario.config.constituents.iter().find(|c| c.name == name);
        let Some(TurnoverParams::Polymer { k, zeta, gamma }) = cfg.map(|c| &c.turnover) else {
            continue;
        };
        let c = b.column(name)?;
        let rho0 = b.segment(g)[0].rho_r[c];
        let end = b.at(g, t_end).map_or(f64::NAN, |r| r.rho_r[c] / rho0);
        checks.push(Check::near(
            format!("tevg: {name} survival at {t_end} d"),
            end,
            polymer_survival(*k, *zeta, *gamma, t_end),
            1e-3,
        ));
    }
    let infl = b
        .scenario
        .names
        .iter()
        .position(|n| n.starts_with("inflammatory"))
        .ok_or_else(|| Error::InvalidArgument("no inflammatory constituent".into()))?;
    let base = b.scenario.config.constituents.iter().find(|c| c.name == "inflammatory");
    if let Some(TurnoverParams::Inflammatory { gain, rate, shape, .. }) = base.map(|c| &c.turnover) {
        let (t_peak, peak) = b
            .segment(g)
            .iter()
            .map(|r| (r.t_day, r.upsilon[infl]))
            .fold((0.0, f64::MIN), |m, x| if x.1 > m.1 { x } else { m });
        let dt = b.scenario.config.coupling.dt_day;
        checks.push(Check::near("tevg: inflammatory peak time (d)", t_peak, (shape - 1.0) / rate, dt));
        let at_peak = gain * inflammatory_burden(*rate, *shape, (shape - 1.0) / rate);
        checks.push(Check::near("tevg: inflammatory peak value", peak, at_peak, 1e-3));
    }
    let j_max = b.segment(g).iter().map(|r| r.j).fold(f64::MIN, f64::max);
    checks.push(Check {
        name: "tevg: graft J exceeds 1".into(),
        value: j_max,
        reference: 1.0,
        tolerance: 0.0,
        passed: j_max > 1.0,
    });
    Ok(checks)
}

/// Activation factor `1 − exp(−C_B²)` at zero WSS deviation.
pub fn homeostatic_activation(p: &ActiveStressParams) -> f64 {
    1.0 - (-p.c_basal * p.c_basal).exp()
}

fn aorta(out: &Path) -> Result<Vec<Check>> {
    let b = Benchmark::run("aorta-tube")?;
    b.write(out)?;
    let mut checks = vec![Check::near(
        "aorta-tube: completed",
        b.output.completed() as u8 as f64,
        1.0,
        0.0,
    )];
    let h0 = b.segment(0)[0].h_cm;
    checks.push(Check::within("aorta-tube: final h/h0", b.last(0)?.h_cm / h0, 1.2, 1.6));
    if let Some(act) = &b.scenario.config.active {
        let p = act.params;
        checks.push(Check::near(
            "aorta-tube: activation at homeostasis",
            p.activation(0.0),
            homeostatic_activation(&p),
            1e-6,
        ));
    }
    Ok(checks)
}

/// Runs every shipped benchmark, writing its time series under `out`.
pub fn run_all(out: &Path) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for bench in [homeostatic, hypertension, flow, tevg, aorta] {
        checks.extend(bench(out)?);
    }
    Ok(checks)
}

pub fn table(checks: &[Check]) -> String {
    let mut s = format!("{:<48} {:>14} {:>14} {:>10}  result\n", "check", "value", "reference", "tol");
    for c in checks {
        s.push_str(&format!(
            "{:<48} {:>14.6e} {:>14.6e} {:>10.1e}  {}\n",
            c.name,
            c.value,
            c.reference,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_constructors() {
        assert!(Check::near("x", 1.0005, 1.0, 1e-3).passed);
        assert!(!Check::near("x", 1.002, 1.0, 1e-3).passed);
        assert!(Check::below("x", 0.05, 0.1).passed);
        assert!(!Check::below("x", 0.1, 0.1).passed);
        assert!(Check::within("x", 1.4, 1.2, 1.6).passed);
        assert!(!Check::within("x", 1.7, 1.2, 1.6).passed);
    }

    #[test]
    fn activation_closed_form() {
        let p = ActiveStressParams {
            t_max: 39.86,
            lambda_max: 1.4,
            lambda_0: 0.8,
            c_basal: 0.7,
            c_scaling: 1.2,
            k_act: 1.0 / 70.0,
            fiber: [0.0, 1.0, 0.0],
        };
        assert!((homeostatic_activation(&p) - 0.387_373_6).abs() < 1e-7);
    }

    #[test]
    fn table_marks_failures() {
        let t = table(&[Check::below("a", 1.0, 2.0), Check::below("b", 3.0, 2.0)]);
        assert!(t.lines().nth(1).unwrap().ends_with("PASS"));
        assert!(t.lines().nth(2).unwrap().ends_with("FAIL"));
    }
}

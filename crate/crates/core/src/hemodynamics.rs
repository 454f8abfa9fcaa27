//! Steady Poiseuille flow through a chain of segments with a resistance outlet.
//! All quantities in CGS (dyn, cm, s).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VISCOSITY: f64 = 0.04;
/// dyn/cm² per kPa.
pub const DYN_PER_KPA: f64 = 1.0e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemodynamicField {
    pub flow: f64,
    pub viscosity: f64,
    pub resistance: f64,
    /// Midpoint pressure per segment, dyn/cm².
    pub pressure: Vec<f64>,
    /// Wall shear stress per segment, dyn/cm².
    pub wss: Vec<f64>,
}

/// `τ = 4μQ/(πa³)`.
pub fn wall_shear(flow: f64, radius: f64, viscosity: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Geometry(format!("lumen radius must be positive (got {radius})")));
    }
    Ok(4.0 * viscosity * flow / (std::f64::consts::PI * radius.powi(3)))
}

/// Poiseuille resistance `8μL/(πa⁴)`.
pub fn segment_resistance(radius: f64, length: f64, viscosity: f64) -> f64 {
    8.0 * viscosity * length / (std::f64::consts::PI * radius.powi(4))
}

/// Midpoint pressures marching upstream from `p_out = R·Q`.
pub fn pressure_field(geometry: &[(f64, f64)], flow: f64, viscosity: f64, resistance: f64) -> Result<Vec<f64>> {
    let mut p = vec![0.0; geometry.len()];
    let mut downstream = resistance * flow;
    for (i, &(a, len)) in geometry.iter().enumerate().rev() {
        if !(a > 0.0) {
            return Err(Error::Geometry(format!("segment {i} has non-positive radius {a}")));
        }
        let drop = segment_resistance(a, len, viscosity) * flow;
        p[i] = downstream + 0.5 * drop;
        downstream += drop;
    }
    Ok(p)
}

/// Inlet pressure, i.e. the outlet value plus every segment drop.
pub fn inlet_pressure(geometry: &[(f64, f64)], flow: f64, viscosity: f64, resistance: f64) -> f64 {
    resistance * flow
        + geometry
            .iter()
            .map(|&(a, len)| segment_resistance(a, len, viscosity) * flow)
            .sum::<f64>()
}

pub fn evaluate(geometry: &[(f64, f64)], flow: f64, viscosity: f64, resistance: f64) -> Result<HemodynamicField> {
    let pressure = pressure_field(geometry, flow, viscosity, resistance)?;
    let wss = geometry
        .iter()
        .map(|&(a, _)| wall_shear(flow, a, viscosity))
        .collect::<Result<Vec<_>>>()?;
    Ok(HemodynamicField {
        flow,
        viscosity,
        resistance,
        pressure,
        wss,
    })
}

/// Triangular-kernel moving average over segment centers `z` with half-width
/// `window`. The kernel is applied symmetrically (each pair weighted by the
/// same normalized weight) so the field mean is preserved.
pub fn smooth_axial(values: &[f64], z: &[f64], window: f64) -> Result<Vec<f64>> {
    if window < 0.0 {
        return Err(Error::InvalidArgument(format!("smoothing window must be ≥ 0 (got {window})")));
    }
    if values.len() != z.len() {
        return Err(Error::InvalidArgument("values and positions differ in length".into()));
    }
    if window == 0.0 || values.len() < 2 {
        return Ok(values.to_vec());
    }
    let n = values.len();
    let kernel = |d: f64| (1.0 - d.abs() / window).max(0.0);
    // Normalizing by the largest row sum keeps the weight matrix symmetric
    // and doubly stochastic once the remainder is put on the diagonal.
    let row_sums: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| kernel(z[i] - z[j])).sum())
        .collect();
    let norm = row_sums.iter().cloned().fold(0.0, f64::max);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        let mut used = 0.0;
        for j in 0..n {
            if i != j {
                let w = kernel(z[i] - z[j]) / norm;
                acc += w * values[j];
                used += w;
            }
        }
        out[i] = acc + (1.0 - used) * values[i];
    }
    Ok(out)
}

//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use cm_vessel::constituent::{elasticity_hat, fiber_deposition, fiber_in_plane, pk2_hat, strain_energy, MaterialModel};
use cm_vessel::mixture::{Cohort, ConstituentHistory, MixtureState, Trial};
use cm_vessel::tensor::{polar_rotation, Tensor2};
use cm_vessel::turnover::TurnoverParams;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const RHO_HAT: f64 = 1050.0;

/// Symmetric unit directions spanning the six strain components.
pub fn strain_directions() -> Vec<Tensor2> {
    let mut out = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            let mut d = Tensor2::zeros();
            d[(i, j)] = 1.0;
            d[(j, i)] = 1.0;
            out.push(d);
        }
    }
    out
}

/// Deformation with principal stretches from `[lo, hi]` and a small shear.
pub fn random_f(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor2 {
    let mut f = Tensor2::diag(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi));
    f[(1, 2)] = rng.gen_range(-0.05..0.05);
    f[(0, 1)] = rng.gen_range(-0.05..0.05);
    f
}

fn mechano(k_h: f64) -> TurnoverParams {
    TurnoverParams::Mechano {
        k_h,
        gain_stress: 1.0,
        gain_wss: 0.5,
        degradation_gain_stress: 0.0,
        degradation_gain_wss: 0.0,
    }
}

/// Elastin plus two to four fiber families with a few committed steps at
/// random deformations. The returned trial sits at the last committed time.
pub fn random_mixture(rng: &mut ChaCha8Rng) -> (MixtureState, Trial) {
    let g_e = Tensor2::diag(1.0 / (1.219 * 1.428), 1.219, 1.428);
    let elastin = ConstituentHistory::new(
        "elastin",
        MaterialModel::NeoHookean { c: rng.gen_range(5.0..50.0) },
        g_e,
        TurnoverParams::Elastin,
        rng.gen_range(50.0..200.0),
        RHO_HAT,
    )
    .unwrap();
    let mut constituents = vec![elastin];
    for i in 0..rng.gen_range(2..=4) {
        let fiber = fiber_in_plane(rng.gen_range(-90.0..90.0));
        let model = MaterialModel::Fung {
            c1: rng.gen_range(1.0..60.0),
            c2: rng.gen_range(0.5..15.0),
            fiber,
        };
        let g = fiber_deposition(rng.gen_range(1.0..1.1), fiber);
        let h = ConstituentHistory::new(format!("f{i}"), model, g, mechano(rng.gen_range(0.005..0.05)), rng.gen_range(50.0..300.0), RHO_HAT)
            .unwrap();
        constituents.push(h);
    }
    let mut ms = MixtureState::new(constituents);
    let mut t = 0.0;
    for _ in 0..rng.gen_range(2..6) {
        t += 4.0;
        let trial = Trial {
            time: t,
            f: random_f(rng, 0.9, 1.3),
            delta_sigma: rng.gen_range(-0.2..0.2),
            delta_tau: rng.gen_range(-0.2..0.2),
        };
        let ev = ms.evaluate(&trial, false).unwrap();
        ms.commit(&trial, &ev).unwrap();
    }
    let trial = Trial {
        time: t,
        f: random_f(rng, 0.9, 1.3),
        delta_sigma: 0.0,
        delta_tau: 0.0,
    };
    (ms, trial)
}

/// Largest relative mismatch between `𝐜̄ : E` plus the Truesdell terms and a
/// central difference of `σ̄` under `F → (I ± εE)F`, over six directions.
pub fn tangent_defect(ms: &MixtureState, trial: &Trial, eps: f64) -> f64 {
    let ev = ms.evaluate(trial, true).unwrap();
    let c = ev.c_bar.clone().unwrap();
    let s = ev.sigma_bar;
    let mut worst_diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for e in strain_directions() {
        let e = e * 0.5;
        let at = |sign: f64| {
            let t = Trial {
                f: (Tensor2::identity() + e * (sign * eps)) * trial.f,
                ..*trial
            };
            ms.evaluate(&t, false).unwrap().sigma_bar
        };
        let fd = (at(1.0) - at(-1.0)) * (0.5 / eps);
        let predicted = c.ddot2(&e) + e * s + s * e - s * e.trace();
        worst_diff = worst_diff.max((fd - predicted).norm_inf());
        scale = scale.max(fd.norm_inf());
    }
    worst_diff / scale
}

/// Relative defects `(Ŝ, Ĉ)` against central differences of `Ŵ` and `Ŝ`.
pub fn constituent_defects(model: &MaterialModel, cn: &Tensor2, h: &Tensor2) -> (f64, f64) {
    let eps = 1e-6;
    let s = pk2_hat(model, cn, h).unwrap();
    let c4 = elasticity_hat(model, cn, h).unwrap();
    let (mut ds, mut ss, mut dc, mut sc): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for d in strain_directions() {
        let w = |sign: f64| strain_energy(model, &(*cn + d * (sign * eps)), h).unwrap();
        // dŴ = ½ Ŝ : dC.
        let fd_w = (w(1.0) - w(-1.0)) / (2.0 * eps);
        ds = ds.max((fd_w - 0.5 * s.ddot(&d)).abs());
        ss = ss.max((0.5 * s.ddot(&d)).abs());
        let sp = |sign: f64| pk2_hat(model, &(*cn + d * (sign * eps)), h).unwrap();
        // dŜ = ½ Ĉ : dC.
        let fd_s = (sp(1.0) - sp(-1.0)) * (1.0 / (2.0 * eps));
        dc = dc.max((fd_s - c4.ddot2(&d) * 0.5).norm_inf());
        sc = sc.max(fd_s.norm_inf());
    }
    let rel = |d: f64, s: f64| if s > 0.0 { d / s } else { d };
    (rel(ds, ss), rel(dc, sc))
}

/// Smooth prescribed history on a grid of step `dt` up to `s_end`:
/// production `m(τ) = 1 + ½ sin(τ/20)`, removal `k`, circumferential stretch
/// `λ(τ) = 1 + 0.1 sin(τ/30)` at constant volume.
pub fn smooth_history(dt: f64, s_end: f64, k: f64) -> MixtureState {
    let fiber = [0.0, 1.0, 0.0];
    let model = MaterialModel::Fung {
        c1: 2.696,
        c2: 14.92,
        fiber,
    };
    let g = fiber_deposition(1.08, fiber);
    let turnover = TurnoverParams::Mechano {
        k_h: k,
        gain_stress: 0.0,
        gain_wss: 0.0,
        degradation_gain_stress: 0.0,
        degradation_gain_wss: 0.0,
    };
    let mut h = ConstituentHistory::new("collagen", model, g, turnover, 0.0, RHO_HAT).unwrap();
    let n = (s_end / dt).round() as usize;
    for i in 0..=n {
        let tau = i as f64 * dt;
        let f = smooth_f(tau);
        let r = polar_rotation(&f).unwrap();
        h.deviations.push(tau, 0.0, 0.0);
        h.rate_integral.push(k * tau);
        h.cohorts.push(Cohort {
            tau,
            production: 1.0 + 0.5 * (tau / 20.0).sin(),
            f,
            a: f.inverse().unwrap() * g * r,
            h: model.structural(&r),
        });
    }
    h.rate_last = k;
    MixtureState::new(vec![h])
}

pub fn smooth_f(tau: f64) -> Tensor2 {
    let l = 1.0 + 0.1 * (tau / 30.0).sin();
    Tensor2::diag(1.0 / l, l, 1.0)
}

/// Observed orders `log2(e(h)/e(h/2))` for a sequence of errors at halving steps.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

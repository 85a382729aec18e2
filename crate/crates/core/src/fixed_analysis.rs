//! Closed-form exploitation envelopes for a fixed optimizer strategy.
//!
//! Against a fixed `x_hat` the learner's scores are `-t v`, so every suboptimal
//! coordinate is squeezed between `phi(theta'(1/m) - eta t delta)` and
//! `phi(theta'(1/k) - eta t delta)`. Integrating those profiles gives the
//! dual-potential envelopes below.

use serde::{Deserialize, Serialize};

use crate::choicemap::solve_choice_map;
use crate::error::{Error, Result};
use crate::game::GapProfile;
use crate::kernels::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Steep,
    NonSteep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitationEnvelope {
    pub lower_dv: f64,
    pub upper_dv: f64,
    pub lag_lower: f64,
    pub lag_upper: f64,
    /// `+inf` for steep kernels.
    pub saturation_time: f64,
    pub regime: Regime,
}

struct Suboptimal {
    m: usize,
    k: usize,
    delta_min: f64,
    delta_max: f64,
}

fn suboptimal(profile: &GapProfile) -> Result<Suboptimal> {
    match (profile.delta_min, profile.delta_max) {
        (Some(dmin), Some(dmax)) if profile.k < profile.m() => {
            Ok(Suboptimal { m: profile.m(), k: profile.k, delta_min: dmin, delta_max: dmax })
        }
        _ => Err(Error::Degenerate(
            "every learner action is a best response; exploitation envelope is identically zero".into(),
        )),
    }
}

/// `V(u) - theta*(max{theta'(u) - s, theta'(0+)})`: the dual-potential drop
/// after the score of a coordinate starting at mass `u` falls by `s`.
fn potential_drop(kernel: &Kernel, u: f64, s: f64) -> f64 {
    let start = kernel.theta_prime_unchecked(u);
    let end = (start - s).max(kernel.boundary_slope());
    kernel.dual_potential_unchecked(u) - kernel.theta_conj(end)
}

pub fn exploitation_bounds(
    kernel: &Kernel,
    profile: &GapProfile,
    eta: f64,
    horizon: f64,
) -> Result<ExploitationEnvelope> {
    let s = suboptimal(profile)?;
    check_eta_t(eta, horizon)?;
    let (m, k) = (s.m as f64, s.k as f64);
    let lower_dv = (s.delta_min / s.delta_max) * potential_drop(kernel, 1.0 / m, eta * s.delta_max * horizon);
    let upper_dv = (s.delta_max / s.delta_min) * potential_drop(kernel, 1.0 / k, eta * s.delta_min * horizon);
    let scale = (m - k) / eta;
    let geo = kernel.geometry();
    let saturation_time = if geo.is_steep {
        f64::INFINITY
    } else {
        (kernel.theta_prime_unchecked(1.0 / k) - geo.boundary_slope) / (eta * s.delta_min)
    };
    Ok(ExploitationEnvelope {
        lower_dv,
        upper_dv,
        lag_lower: scale * lower_dv,
        lag_upper: scale * upper_dv,
        saturation_time,
        regime: if geo.is_steep { Regime::Steep } else { Regime::NonSteep },
    })
}

/// Limits of the envelope as `T -> inf`.
pub fn asymptotic_bounds(kernel: &Kernel, profile: &GapProfile, eta: f64) -> Result<(f64, f64)> {
    let s = suboptimal(profile)?;
    check_eta_t(eta, 0.0)?;
    let (m, k) = (s.m as f64, s.k as f64);
    let v_bdry = kernel.geometry().boundary_energy;
    let scale = (m - k) / eta;
    let lower = scale * (s.delta_min / s.delta_max) * (kernel.dual_potential_unchecked(1.0 / m) - v_bdry);
    let upper = scale * (s.delta_max / s.delta_min) * (kernel.dual_potential_unchecked(1.0 / k) - v_bdry);
    Ok((lower, upper))
}

/// Envelope for the discrete-time learner-approximation gap: the continuous
/// envelope widened by `((m - k)/k) delta_max` on top.
pub fn discrete_bounds(kernel: &Kernel, profile: &GapProfile, eta: f64, horizon: usize) -> Result<(f64, f64)> {
    if horizon == 0 {
        return Err(Error::Domain("discrete horizon must be at least 1".into()));
    }
    let env = exploitation_bounds(kernel, profile, eta, horizon as f64)?;
    let s = suboptimal(profile)?;
    let extra = (s.m - s.k) as f64 / s.k as f64 * s.delta_max;
    Ok((env.lag_lower, env.lag_upper + extra))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Distance {
    /// `||y(t) - unif(br)||_1` on the fixed-strategy trajectory.
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `l1` distance of the learner to the uniform best-response mix at time `t`.
pub fn l1_distance_bounds(kernel: &Kernel, profile: &GapProfile, eta: f64, t: f64) -> Result<L1Distance> {
    let s = suboptimal(profile)?;
    check_eta_t(eta, t)?;
    let (m, k) = (s.m as f64, s.k as f64);
    let z: Vec<f64> = profile.gaps.iter().map(|d| -eta * t * d).collect();
    let y = solve_choice_map(kernel, &z)?.y;
    let exact = 2.0 * profile.suboptimal().iter().map(|&j| y[j]).sum::<f64>();
    let lower = 2.0 * (m - k) * kernel.phi(kernel.theta_prime_unchecked(1.0 / m) - eta * t * s.delta_max);
    let upper = 2.0 * (m - k) * kernel.phi(kernel.theta_prime_unchecked(1.0 / k) - eta * t * s.delta_min);
    Ok(L1Distance { exact, lower, upper })
}

/// Per-coordinate interval `[lo, hi]` the learner's strategy occupies at time
/// `t` against the fixed strategy behind `profile`. Best responses lie in
/// `[1/m, 1/k]`; a suboptimal `j` in
/// `[phi(theta'(1/m) - eta t delta_j), phi(theta'(1/k) - eta t delta_j)]`.
pub fn pointwise_bounds(kernel: &Kernel, profile: &GapProfile, eta: f64, t: f64) -> Vec<(f64, f64)> {
    let m = profile.m() as f64;
    let k = profile.k as f64;
    let a_lo = kernel.theta_prime_unchecked(1.0 / m);
    let a_hi = kernel.theta_prime_unchecked(1.0 / k);
    (0..profile.m())
        .map(|j| {
            if profile.is_best_response(j) {
                (1.0 / m, 1.0 / k)
            } else {
                let d = profile.gaps[j];
                (kernel.phi(a_lo - eta * t * d), kernel.phi(a_hi - eta * t * d))
            }
        })
        .collect()
}

fn check_eta_t(eta: f64, horizon: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) || !(horizon >= 0.0) {
        return Err(Error::Domain(format!("need eta > 0 and T >= 0, got eta={eta}, T={horizon}")));
    }
    Ok(())
}

//! Functionals and bounds evaluated along trajectories.
//!
//! The central pair is the energy
//!
//! ```text
//! F(u, w) = int u (ln u - 1) + 1/2 int w^{-beta} |grad w|^2
//! ```
//!
//! and its dissipation
//!
//! ```text
//! D(u, w) = 4 int |grad sqrt(u)|^2 + beta/2 int u w^{-1} |grad w|^2
//!         + delta int u (u - 1) ln u
//! ```
//!
//! which satisfy `dF/dt = -D <= 0` along exact solutions. The discrete
//! trajectory is audited against that identity: `F` must not increase beyond
//! scheme tolerance and the residual `dF/dt + D` must shrink under time-step
//! refinement. Everything here is read-only over snapshots.
//!
//! Conventions: `0 ln 0 = 0`, and `w` is clamped below at [`EPS_W`] inside the
//! singular weights `w^{-beta}` and `w^{-1}`. Once a cell's `w` falls under
//! the clamp the record is flagged `saturated` and excluded from the
//! monotonicity audit: the vanishing-matrix state is the expected asymptotic
//! regime, but the clamp breaks exactness there.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, gradient, Field};
use crate::model::{Parameters, State};

/// Floor for `w` inside singular weights.
pub const EPS_W: f64 = 1e-12;

/// `x ln x` with the continuous limit `0 ln 0 = 0`.
fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Value of a functional together with clamp bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct EnergyValue {
    pub value: f64,
    /// Cells where `w` hit the [`EPS_W`] floor.
    pub clamped_cells: usize,
}

/// Energy functional `F`.
pub fn lyapunov_f(state: &State, params: &Parameters) -> EnergyValue {
    let cell = state.grid().cell_volume();
    let beta = params.beta();
    let entropy_part: f64 = state.u.values().iter().map(|&u| xlnx(u) - u).sum::<f64>() * cell;

    let grad_w = gradient(&state.w);
    let mut clamped = 0usize;
    let mut grad_part = 0.0;
    for (i, &w) in state.w.values().iter().enumerate() {
        let mut g2 = 0.0;
        for g in &grad_w {
            let v = g.values()[i];
            g2 += v * v;
        }
        let wc = if w < EPS_W {
            clamped += 1;
            EPS_W
        } else {
            w
        };
        grad_part += wc.powf(-beta) * g2;
    }
    EnergyValue { value: entropy_part + 0.5 * grad_part * cell, clamped_cells: clamped }
}

/// Dissipation functional `D`; nonnegative whenever `u >= 0` (each term is).
pub fn dissipation_d(state: &State, params: &Parameters) -> EnergyValue {
    let cell = state.grid().cell_volume();
    let beta = params.beta();
    let delta = params.delta();

    let sqrt_u = state.u.map(|u| u.max(0.0).sqrt());
    let grad_su = gradient(&sqrt_u);
    let mut fisher = 0.0;
    for i in 0..state.u.len() {
        let mut g2 = 0.0;
        for g in &grad_su {
            let v = g.values()[i];
            g2 += v * v;
        }
        fisher += g2;
    }

    let grad_w = gradient(&state.w);
    let mut clamped = 0usize;
    let mut chem = 0.0;
    for (i, (&u, &w)) in state.u.values().iter().zip(state.w.values()).enumerate() {
        let mut g2 = 0.0;
        for g in &grad_w {
            let v = g.values()[i];
            g2 += v * v;
        }
        let wc = if w < EPS_W {
            clamped += 1;
            EPS_W
        } else {
            w
        };
        chem += u * g2 / wc;
    }

    // u (u - 1) ln u >= 0 for u >= 0: both factors change sign at u = 1.
    let logistic: f64 = state.u.values().iter().map(|&u| u * (u - 1.0) * if u > 0.0 { u.ln() } else { 0.0 }).sum();

    EnergyValue {
        value: (4.0 * fisher + 0.5 * beta * chem + delta * logistic) * cell,
        clamped_cells: clamped,
    }
}

/// `int u ln u` with the `0 ln 0 = 0` convention.
pub fn entropy(state: &State) -> f64 {
    state.u.values().iter().map(|&u| xlnx(u)).sum::<f64>() * state.grid().cell_volume()
}

/// Total mass `int u`.
pub fn mass(state: &State) -> f64 {
    grid::integrate(&state.u)
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub f_value: f64,
    pub d_value: f64,
    pub entropy: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub w_max: f64,
    /// L2 norm of grad w.
    pub grad_w_l2: f64,
    /// L2 distance of u from the predicted steady level.
    pub u_dist_l2: f64,
    /// Cumulative mass removed by clipping.
    pub clip_mass: f64,
    /// Some cell's w sat on the EPS_W floor when F/D were evaluated.
    pub saturated: bool,
}

/// Evaluate every tracked quantity for one snapshot.
pub fn record(state: &State, params: &Parameters, u_star: &Field, clip_mass: f64) -> DiagnosticsRecord {
    let f = lyapunov_f(state, params);
    let d = dissipation_d(state, params);
    let grad_w = gradient(&state.w);
    let cell = state.grid().cell_volume();
    let mut g2_total = 0.0;
    for i in 0..state.w.len() {
        for g in &grad_w {
            let v = g.values()[i];
            g2_total += v * v;
        }
    }
    DiagnosticsRecord {
        t: state.t,
        mass: mass(state),
        f_value: f.value,
        d_value: d.value,
        entropy: entropy(state),
        u_min: state.u.min(),
        u_max: state.u.max(),
        w_max: state.w.max(),
        grad_w_l2: (g2_total * cell).sqrt(),
        u_dist_l2: grid::l2_norm(&state.u.zip_with(u_star, |a, b| a - b)),
        clip_mass,
        saturated: f.clamped_cells > 0 || d.clamped_cells > 0,
    }
}

/// Fixed CSV schema of the diagnostics series.
pub const CSV_HEADER: &str = "t,mass,F,D,entropy,u_min,u_max,w_max,grad_w_l2,u_dist_l2,clip_mass";

/// One CSV row in the fixed column order.
pub fn csv_row(r: &DiagnosticsRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.t, r.mass, r.f_value, r.d_value, r.entropy, r.u_min, r.u_max, r.w_max, r.grad_w_l2, r.u_dist_l2, r.clip_mass
    )
}

/// Outcome of the energy monotonicity audit.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    /// Largest increase of F between consecutive (unsaturated) records.
    pub max_positive_increment: f64,
    /// Largest |dF/dt + D| with D taken as the endpoint average.
    pub max_abs_residual: f64,
    /// Time of the worst increment, if any increase occurred.
    pub worst_increment_at: Option<f64>,
    /// Record pairs skipped because a w-clamp made F inexact.
    pub saturated_pairs_skipped: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Audit `dF/dt = -D` over a recorded trajectory.
///
/// For each pair of consecutive records the residual is
/// `(F2 - F1)/(t2 - t1) + (D1 + D2)/2`; the endpoint average is a midpoint
/// proxy consistent to second order in the record spacing, so the scheme's
/// first-order error dominates and the residual must shrink when `dt` does.
pub fn lyapunov_decay_check(records: &[DiagnosticsRecord], tolerance: Option<f64>) -> Result<LyapunovReport> {
    if records.len() < 2 {
        return Err(Error::Fit("energy audit needs at least 2 records".into()));
    }
    let tol = tolerance.unwrap_or_else(|| 1e-6 * (1.0 + records[0].f_value.abs()));
    let mut max_inc = 0.0_f64;
    let mut worst_at = None;
    let mut max_res = 0.0_f64;
    let mut skipped = 0usize;
    for pair in records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.saturated || b.saturated {
            skipped += 1;
            continue;
        }
        let df = b.f_value - a.f_value;
        if df > max_inc {
            max_inc = df;
            worst_at = Some(b.t);
        }
        let res = df / (b.t - a.t) + 0.5 * (a.d_value + b.d_value);
        max_res = max_res.max(res.abs());
    }
    Ok(LyapunovReport {
        max_positive_increment: max_inc,
        max_abs_residual: max_res,
        worst_increment_at: worst_at,
        saturated_pairs_skipped: skipped,
        tolerance: tol,
        pass: max_inc <= tol,
    })
}

/// Decay law fitted by [`fit_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DecayModel {
    /// `y = y0 e^{-rate t}`; fitted on `ln y`.
    Exponential,
    /// `y = (c + rate (beta-1) t)^{-1/(beta-1)}`; fitted on `y^{1-beta}`.
    Polynomial { beta: f64 },
}

/// Least-squares decay-rate estimate on the tail of a series.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: DecayModel,
    /// Decay rate estimate; positive means the series decays.
    pub rate: f64,
    /// Fitted value of the linearized coordinate at t = 0.
    pub intercept: f64,
    /// RMS residual in the linearized coordinate.
    pub residual: f64,
    pub samples: usize,
    /// First time used by the fit window.
    pub window_start: f64,
    /// Worst ratio of data over the fitted curve inside the window.
    pub max_ratio_to_fit: f64,
}

impl FitResult {
    /// Evaluate the fitted curve at `t`.
    pub fn curve(&self, t: f64) -> f64 {
        match self.model {
            DecayModel::Exponential => (self.intercept - self.rate * t).exp(),
            DecayModel::Polynomial { beta } => {
                (self.intercept + self.rate * (beta - 1.0) * t).powf(1.0 / (1.0 - beta))
            }
        }
    }
}

/// Fit a decay rate on the last `window_frac` of the time span (default 1/2),
/// widening to the last 8 samples when the window is shorter than that.
pub fn fit_decay(series: &[(f64, f64)], model: DecayModel) -> Result<FitResult> {
    fit_decay_window(series, model, 0.5)
}

pub fn fit_decay_window(series: &[(f64, f64)], model: DecayModel, window_frac: f64) -> Result<FitResult> {
    if series.len() < 8 {
        return Err(Error::Fit(format!("need at least 8 samples, got {}", series.len())));
    }
    if let DecayModel::Polynomial { beta } = model {
        if !(beta > 1.0) {
            return Err(Error::Fit(format!("polynomial model needs beta > 1, got {beta}")));
        }
    }
    let t0 = series[0].0;
    let t1 = series[series.len() - 1].0;
    let cut = t1 - window_frac.clamp(0.0, 1.0) * (t1 - t0);
    let mut start = series.partition_point(|&(t, _)| t < cut);
    if series.len() - start < 8 {
        start = series.len() - 8;
    }
    let tail = &series[start..];
    if let Some(&(t_bad, y_bad)) = tail.iter().find(|&&(_, y)| !(y > 0.0)) {
        return Err(Error::Fit(format!("nonpositive sample y = {y_bad} at t = {t_bad}")));
    }

    let transform = |y: f64| match model {
        DecayModel::Exponential => y.ln(),
        DecayModel::Polynomial { beta } => y.powf(1.0 - beta),
    };
    let n = tail.len() as f64;
    let mean_t = tail.iter().map(|&(t, _)| t).sum::<f64>() / n;
    let mean_z = tail.iter().map(|&(_, y)| transform(y)).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, y) in tail {
        num += (t - mean_t) * (transform(y) - mean_z);
        den += (t - mean_t) * (t - mean_t);
    }
    if den == 0.0 {
        return Err(Error::Fit("degenerate time axis in fit window".into()));
    }
    let slope = num / den;
    let (rate, intercept) = match model {
        DecayModel::Exponential => (-slope, mean_z - slope * mean_t),
        DecayModel::Polynomial { beta } => (slope / (beta - 1.0), mean_z - slope * mean_t),
    };
    let mut ss = 0.0;
    for &(t, y) in tail {
        let fit_z = mean_z + slope * (t - mean_t);
        let r = transform(y) - fit_z;
        ss += r * r;
    }
    let result = FitResult {
        model,
        rate,
        intercept,
        residual: (ss / n).sqrt(),
        samples: tail.len(),
        window_start: tail[0].0,
        max_ratio_to_fit: 0.0,
    };
    let max_ratio = tail
        .iter()
        .map(|&(t, y)| y / result.curve(t))
        .fold(0.0_f64, f64::max);
    Ok(FitResult { max_ratio_to_fit: max_ratio, ..result })
}

/// Pointwise envelope audit: does `y(t) <= bound(t) (1 + tol)` hold at every
/// sample?
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// Worst y / bound ratio observed.
    pub max_ratio: f64,
    /// First time the envelope was exceeded.
    pub first_violation: Option<f64>,
    pub samples: usize,
}

pub fn check_envelope(series: &[(f64, f64)], bound: impl Fn(f64) -> f64, tol: f64) -> EnvelopeReport {
    let mut max_ratio = 0.0_f64;
    let mut first = None;
    for &(t, y) in series {
        let b = bound(t);
        let ratio = if b > 0.0 { y / b } else { f64::INFINITY };
        max_ratio = max_ratio.max(ratio);
        if ratio > 1.0 + tol && first.is_none() {
            first = Some(t);
        }
    }
    EnvelopeReport { holds: first.is_none(), max_ratio, first_violation: first, samples: series.len() }
}

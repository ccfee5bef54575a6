//! Steady states, predicted asymptotics, and the envelope audits.
//!
//! The stationary system
//!
//! ```text
//! 0 = lap u - div(u grad w) + delta u (1 - u),   0 = w^beta u
//! ```
//!
//! with no-flux walls admits exactly two families: `(0, w~)` with an
//! arbitrary matrix profile, and `(k, 0)` with constant density (`k` free
//! when `delta = 0`, pinned at 1 otherwise). With a certified floor
//! `u0 >= gamma > 0` the approach to `(u*, 0)` is quantitative: `u` never
//! drops below `lambda = min{1, gamma} e^{-max w0}`, and `max w` decays under
//! the envelope `max(w0) e^{-lambda t}` for `beta = 1` or
//! `(max(w0)^{1-beta} + lambda (beta-1) t)^{-1/(beta-1)}` for `beta > 1`.

use serde::Serialize;

use crate::diagnostics::{check_envelope, fit_decay_window, DecayModel, DiagnosticsRecord, EnvelopeReport, FitResult};
use crate::error::{Error, Result};
use crate::grid::{advective_div, integrate, l2_norm, laplacian_neumann, Field, Grid};
use crate::integrator::relative_change_rate;
use crate::model::{InitialData, Parameters, State};

/// Target density level of the approached steady pair `(u*, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UStar {
    /// `delta > 0` pins the density at the logistic carrying level.
    One,
    /// `delta = 0` conserves mass, selecting the initial mean.
    MeanOfU0,
    /// Degenerate case of a vanishing initial mean.
    Zero,
}

/// Predicted long-time behavior for a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyPrediction {
    pub u_star: UStar,
    /// Numeric value of the target level.
    pub u_star_value: f64,
    /// Decay-rate lower bound `min{1, gamma} e^{-max w0}`; `None` without a
    /// certified positive floor on `u0`.
    pub lambda: Option<f64>,
    pub rate_model: RateModel,
    pub gamma: f64,
    pub w0_max: f64,
    pub beta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    Exponential,
    Polynomial,
}

impl SteadyPrediction {
    /// The target density as a constant field.
    pub fn u_star_field(&self, grid: Grid) -> Field {
        Field::constant(grid, self.u_star_value)
    }

    /// Envelope bound on `max w` at time `t` (requires `lambda`).
    pub fn w_envelope(&self, t: f64) -> Option<f64> {
        let lambda = self.lambda?;
        Some(match self.rate_model {
            RateModel::Exponential => self.w0_max * (-lambda * t).exp(),
            RateModel::Polynomial => {
                let b = self.beta;
                (self.w0_max.powf(1.0 - b) + lambda * (b - 1.0) * t).powf(1.0 / (1.0 - b))
            }
        })
    }
}

/// Classify the approached steady state and, when `gamma > 0`, predict the
/// decay-rate lower bound.
pub fn predict(init: &InitialData, params: &Parameters) -> SteadyPrediction {
    let mean = integrate(init.u0()) / init.grid().volume();
    let (u_star, u_star_value) = if params.delta() > 0.0 {
        (UStar::One, 1.0)
    } else if mean == 0.0 {
        (UStar::Zero, 0.0)
    } else {
        (UStar::MeanOfU0, mean)
    };
    let gamma = init.gamma();
    let w0_max = init.w0().max();
    let lambda = if gamma > 0.0 { Some(gamma.min(1.0) * (-w0_max).exp()) } else { None };
    let rate_model = if params.beta() == 1.0 { RateModel::Exponential } else { RateModel::Polynomial };
    SteadyPrediction {
        u_star,
        u_star_value,
        lambda,
        rate_model,
        gamma,
        w0_max,
        beta: params.beta(),
        delta: params.delta(),
    }
}

/// L2 residuals of the stationary system at a state:
/// `(|lap u - div(u grad w) + delta u(1-u)|_2, |w^beta u|_2)`.
pub fn stationary_residual(state: &State, params: &Parameters) -> (f64, f64) {
    let lap = laplacian_neumann(&state.u);
    let adv = advective_div(&state.u, &state.w);
    let delta = params.delta();
    let pde = lap
        .zip_with(&adv, |l, a| l - a)
        .zip_with(&state.u, |x, u| x + delta * u * (1.0 - u));
    let beta = params.beta();
    let coupling = state.w.zip_with(&state.u, |w, u| w.powf(beta) * u);
    (l2_norm(&pde), l2_norm(&coupling))
}

/// Has the trajectory stopped moving? True when the relative L2 change of
/// `u` per unit time is below `threshold` and `w` is either already small
/// (below `w_threshold`) or equally stationary.
pub fn detect_steady(prev: &State, cur: &State, threshold: f64, w_threshold: f64) -> bool {
    let u_rate = relative_change_rate(prev, cur);
    if u_rate >= threshold {
        return false;
    }
    if cur.w.max() < w_threshold {
        return true;
    }
    let dt = cur.t - prev.t;
    if dt <= 0.0 {
        return false;
    }
    let w_diff = l2_norm(&cur.w.zip_with(&prev.w, |a, b| a - b));
    w_diff / (dt * l2_norm(&prev.w).max(f64::MIN_POSITIVE)) < threshold
}

/// Verdicts of [`rate_envelope_check`].
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeVerdicts {
    /// Pointwise `max w` against the predicted envelope.
    pub w_envelope: EnvelopeReport,
    /// Tail fit of `max w` in the predicted model.
    pub w_fit: FitResult,
    /// Fitted w decay rate >= predicted lower bound (within `fit_tol`)?
    pub w_rate_pass: bool,
    /// Tail fit of the squared steady-state distance of `u`.
    pub u_fit: Option<FitResult>,
    /// Predicted lower bound on the squared-distance decay rate
    /// (exponential model only; the polynomial bound carries an unknown
    /// constant, so there only positivity of the rate is required).
    pub u_rate_bound: Option<f64>,
    pub u_rate_pass: bool,
    pub tol_env: f64,
    pub fit_tol: f64,
    pub pass: bool,
}

/// Audit a recorded trajectory against the predicted decay envelopes.
///
/// `max w` must sit under the envelope pointwise (with `tol_env` slack) and
/// its fitted tail rate must reach the predicted lower bound up to `fit_tol`.
/// The density distance is fitted on its square — the rate bound
/// `2 lambda min{1, delta}` applies to the squared L2 distance — and the
/// check is one-sided: observed decay at least as fast as predicted.
pub fn rate_envelope_check(
    records: &[DiagnosticsRecord],
    prediction: &SteadyPrediction,
    tol_env: f64,
    fit_tol: f64,
    fit_window: f64,
) -> Result<EnvelopeVerdicts> {
    let lambda = prediction
        .lambda
        .ok_or_else(|| Error::Fit("rate check needs a certified gamma > 0".into()))?;

    let w_series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.w_max)).collect();
    let w_envelope = check_envelope(
        &w_series,
        |t| prediction.w_envelope(t).unwrap_or(f64::INFINITY),
        tol_env,
    );

    let model = match prediction.rate_model {
        RateModel::Exponential => DecayModel::Exponential,
        RateModel::Polynomial => DecayModel::Polynomial { beta: prediction.beta },
    };
    let w_fit = fit_decay_window(&w_series, model, fit_window)?;
    let w_rate_pass = w_fit.rate >= lambda * (1.0 - fit_tol);

    // Squared distance of u from the target level. Distances at roundoff
    // scale carry no rate information and are dropped.
    let dist_floor = 1e-13 * (1.0 + prediction.u_star_value.abs());
    let u_series: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.u_dist_l2 > dist_floor)
        .map(|r| (r.t, r.u_dist_l2 * r.u_dist_l2))
        .collect();
    let (u_fit, u_rate_bound, u_rate_pass) = if u_series.len() >= 8 {
        match prediction.rate_model {
            RateModel::Exponential => {
                let fit = fit_decay_window(&u_series, DecayModel::Exponential, fit_window)?;
                let bound = if prediction.delta > 0.0 {
                    2.0 * lambda * prediction.delta.min(1.0)
                } else {
                    2.0 * lambda
                };
                let pass = fit.rate >= bound * (1.0 - fit_tol);
                (Some(fit), Some(bound), pass)
            }
            RateModel::Polynomial => {
                let fit = fit_decay_window(&u_series, DecayModel::Polynomial { beta: prediction.beta }, fit_window)?;
                let pass = fit.rate > 0.0;
                (Some(fit), None, pass)
            }
        }
    } else {
        // Already at the target to roundoff; nothing to fit.
        (None, None, true)
    };

    let pass = w_envelope.holds && w_rate_pass && u_rate_pass;
    Ok(EnvelopeVerdicts {
        w_envelope,
        w_fit,
        w_rate_pass,
        u_fit,
        u_rate_bound,
        u_rate_pass,
        tol_env,
        fit_tol,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{max_norm, Field, Grid};
    use crate::integrator::{run, StepConfig};

    fn params(delta: f64, beta: f64) -> Parameters {
        Parameters::new(delta, beta).unwrap()
    }

    fn init_const(grid: Grid, u: f64, w: f64, gamma: f64) -> InitialData {
        InitialData::new(Field::constant(grid, u), Field::constant(grid, w), gamma).unwrap()
    }

    #[test]
    fn prediction_examples() {
        let grid = Grid::line(1.0, 16);
        // delta = 1, gamma = 0.5, max w0 = 1, beta = 1.
        let p = predict(&init_const(grid, 1.0, 1.0, 0.5), &params(1.0, 1.0));
        assert_eq!(p.u_star, UStar::One);
        assert_eq!(p.rate_model, RateModel::Exponential);
        let lambda = p.lambda.unwrap();
        assert!((lambda - 0.5 * (-1.0_f64).exp()).abs() < 1e-15);
        assert!((lambda - 0.18393972058572117).abs() < 1e-12);

        // delta = 0 conserves mass: target is the initial mean.
        let p = predict(&init_const(grid, 2.0, 1.0, 0.0), &params(0.0, 1.0));
        assert_eq!(p.u_star, UStar::MeanOfU0);
        assert!((p.u_star_value - 2.0).abs() < 1e-14);
        assert!(p.lambda.is_none());

        // beta = 3 decays polynomially with exponent 1/(beta-1) = 0.5.
        let p = predict(&init_const(grid, 1.0, 1.0, 1.0), &params(0.0, 3.0));
        assert_eq!(p.rate_model, RateModel::Polynomial);
        let w_at = p.w_envelope(1.0).unwrap();
        let lambda = p.lambda.unwrap();
        assert!((w_at - (1.0 + 2.0 * lambda).powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn prediction_is_scale_consistent() {
        let grid = Grid::line(1.0, 16);
        let p1 = predict(&init_const(grid, 1.5, 1.0, 0.5), &params(1.0, 1.0));
        let p2 = predict(&init_const(grid, 1.5, 2.0, 0.5), &params(1.0, 1.0));
        // lambda is monotone decreasing in max w0 and u* is untouched.
        assert!(p2.lambda.unwrap() < p1.lambda.unwrap());
        assert!((p2.lambda.unwrap() - p1.lambda.unwrap() * (-1.0_f64).exp()).abs() < 1e-15);
        assert_eq!(p1.u_star, p2.u_star);
    }

    #[test]
    fn stationary_pairs_have_zero_residual() {
        let grid = Grid::line(1.0, 32);
        for delta in [0.0, 1.0] {
            let p = params(delta, 1.0);
            // (k, 0): constant density against a fully degraded matrix.
            let k = if delta > 0.0 { 1.0 } else { 2.5 };
            let s = State {
                u: Field::constant(grid, k),
                w: Field::zeros(grid),
                t: 0.0,
                uacc: Field::zeros(grid),
            };
            let (r1, r2) = stationary_residual(&s, &p);
            assert!(r1 <= 1e-12 && r2 <= 1e-12, "(k,0) residuals {r1} {r2}");
            // (0, w~): no cells, arbitrary matrix.
            let s = State {
                u: Field::zeros(grid),
                w: Field::from_fn(grid, |x, _| 1.0 + 0.3 * (std::f64::consts::PI * x).cos()),
                t: 0.0,
                uacc: Field::zeros(grid),
            };
            let (r1, r2) = stationary_residual(&s, &p);
            assert!(r1 <= 1e-12 && r2 <= 1e-12, "(0,w) residuals {r1} {r2}");
        }
        // Constant 2 with delta = 1 is not stationary: residual 2 |Omega|^{1/2}.
        let s = State {
            u: Field::constant(grid, 2.0),
            w: Field::zeros(grid),
            t: 0.0,
            uacc: Field::zeros(grid),
        };
        let (r1, r2) = stationary_residual(&s, &params(1.0, 1.0));
        assert!((r1 - 2.0 * grid.volume().sqrt()).abs() < 1e-12);
        assert!(r2 <= 1e-15);
    }

    #[test]
    fn steady_detection_basics() {
        let grid = Grid::line(1.0, 16);
        let make = |u: f64, t: f64| State {
            u: Field::constant(grid, u),
            w: Field::constant(grid, 1e-6),
            t,
            uacc: Field::zeros(grid),
        };
        // Identical snapshots.
        assert!(detect_steady(&make(1.0, 0.0), &make(1.0, 1.0), 1e-9, 1e-3));
        // Drift faster than the threshold.
        assert!(!detect_steady(&make(1.0, 0.0), &make(1.01, 1.0), 1e-9, 1e-3));
    }

    #[test]
    fn homogeneous_exponential_envelope_holds_with_slack() {
        // u0 = 1 = gamma, w0 = 1, beta = 1, delta = 1: w(t) = e^{-t} while the
        // bound is e^{-lambda t}, lambda = 1/e.
        let grid = Grid::line(1.0, 8);
        let init = init_const(grid, 1.0, 1.0, 1.0);
        let p = params(1.0, 1.0);
        let config = StepConfig {
            dt_max: 1e-3,
            t_end: 6.0,
            record_every: 50,
            steady_exit: false,
            ..StepConfig::default()
        };
        let traj = run(&init, &p, &config).unwrap();
        let prediction = predict(&init, &p);
        let verdicts = rate_envelope_check(&traj.records, &prediction, 0.05, 0.10, 0.5).unwrap();
        assert!(verdicts.w_envelope.holds, "max ratio {}", verdicts.w_envelope.max_ratio);
        assert!(verdicts.w_rate_pass, "fitted {} vs lambda {}", verdicts.w_fit.rate, prediction.lambda.unwrap());
        // True rate is 1, far above the lower bound.
        assert!(verdicts.w_fit.rate > 0.9);
        assert!(verdicts.pass);
    }

    #[test]
    fn homogeneous_polynomial_envelope_holds_with_slack() {
        // beta = 2, u = gamma = 1: w(t) = (1+t)^{-1} <= (1 + lambda t)^{-1}.
        let grid = Grid::line(1.0, 8);
        let init = init_const(grid, 1.0, 1.0, 1.0);
        let p = params(1.0, 2.0);
        let config = StepConfig {
            dt_max: 1e-3,
            t_end: 8.0,
            record_every: 50,
            steady_exit: false,
            ..StepConfig::default()
        };
        let traj = run(&init, &p, &config).unwrap();
        let prediction = predict(&init, &p);
        let verdicts = rate_envelope_check(&traj.records, &prediction, 0.05, 0.10, 0.5).unwrap();
        assert!(verdicts.w_envelope.holds);
        assert!(verdicts.w_rate_pass);
        // Sanity: the simulated w really is (1+t)^{-1}.
        let end = traj.final_state.w.max();
        assert!((end - 1.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn envelope_violations_are_named() {
        let grid = Grid::line(1.0, 8);
        let init = init_const(grid, 1.0, 1.0, 1.0);
        let p = params(1.0, 1.0);
        let prediction = predict(&init, &p);
        // Fabricate records whose w_max stalls instead of decaying.
        let state = State::initial(&init);
        let u_star = prediction.u_star_field(grid);
        let mut records = Vec::new();
        for k in 0..20 {
            let mut s = state.clone();
            s.t = k as f64;
            let mut r = crate::diagnostics::record(&s, &p, &u_star, 0.0);
            r.w_max = 1.0;
            records.push(r);
        }
        let verdicts = rate_envelope_check(&records, &prediction, 0.05, 0.10, 0.5).unwrap();
        assert!(!verdicts.w_envelope.holds);
        // e^{-lambda t} (1.05) drops below 1 just after t = ln(1.05)/lambda.
        let first = verdicts.w_envelope.first_violation.unwrap();
        assert!(first >= 1.0 && first <= 2.0, "first violation at {first}");
        assert!(!verdicts.pass);
    }

    #[test]
    fn gamma_zero_has_no_rate_prediction() {
        let grid = Grid::line(1.0, 8);
        let init = init_const(grid, 1.0, 1.0, 0.0);
        let p = params(1.0, 1.0);
        let prediction = predict(&init, &p);
        assert!(prediction.lambda.is_none());
        let state = State::initial(&init);
        let u_star = prediction.u_star_field(grid);
        let records = vec![crate::diagnostics::record(&state, &p, &u_star, 0.0)];
        assert!(rate_envelope_check(&records, &prediction, 0.05, 0.1, 0.5).is_err());
    }

    #[test]
    fn residual_scale_check() {
        // max_norm of (u - u*) for a settled logistic run is small; smoke-test
        // that a short run drives the stationary residual down.
        let grid = Grid::line(1.0, 32);
        let u0 = Field::from_fn(grid, |x, _| 1.0 + 0.5 * (std::f64::consts::PI * x).cos());
        let init = InitialData::new(u0, Field::constant(grid, 1.0), 0.5).unwrap();
        let p = params(1.0, 1.0);
        let config = StepConfig { dt_max: 1e-3, t_end: 8.0, record_every: 100, ..StepConfig::default() };
        let traj = run(&init, &p, &config).unwrap();
        let (r1_end, _) = stationary_residual(&traj.final_state, &p);
        let (r1_start, _) = stationary_residual(&traj.initial_state, &p);
        assert!(r1_end < 1e-2 * r1_start, "residual {r1_end} vs initial {r1_start}");
        assert!(max_norm(&traj.final_state.u.map(|u| u - 1.0)) < 1e-2);
    }
}

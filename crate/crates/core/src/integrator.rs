//! Time integration of the coupled system.
//!
//! `w` never needs a PDE solve: at each point it satisfies an ODE in time
//! whose solution is available in closed form from the accumulated exposure
//! `int_0^t u ds`. The cell density is advanced by a conservative flux-form
//! update (default) or by the nonconservative form in the variable
//! `v = u e^{-w}` kept for cross-validation:
//!
//! * `FluxU`: `u_t = div(grad u - u grad w) + delta u (1 - u)` with the
//!   diffusive flux implicit and the chemotactic flux and reaction explicit.
//!   Interior face fluxes telescope and boundary faces carry no flux at all,
//!   so for `delta = 0` the discrete mass is conserved to roundoff.
//! * `GradientV`: `v_t = lap v + grad v . grad w + e^w v^2 w^beta
//!   + delta v (1 - v e^w)` with homogeneous Neumann walls; diffusion
//!   implicit, the rest explicit.
//!
//! Both schemes are first order in time; the explicit variant exists mainly
//! as the refinement oracle for convergence measurements.

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{advective_div_with, gradient, l2_norm, laplacian_neumann, max_norm, Field, FaceAverage};
use crate::linsolve::solve_diffusion;
use crate::model::{check_admissibility, from_v, to_v, InitialData, Parameters, State};
use crate::steady;

/// Guard against division by zero in the stability bounds.
const EPS_VEL: f64 = 1e-12;

/// Budget for mass removed by clipping negative undershoots, relative to the
/// domain volume. The exact solution is nonnegative; exceeding this budget
/// means the step size is too large for the data and the run aborts.
pub const CLIP_MASS_BUDGET: f64 = 1e-8;

/// Time discretization of the density update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit diffusion, explicit transport and reaction.
    #[default]
    ImexEuler,
    /// Fully explicit; stable only under the parabolic step bound.
    ExplicitEuler,
}

/// Which variable the update is written in. Flux form is the default because
/// it conserves mass exactly when `delta = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateForm {
    #[default]
    FluxU,
    GradientV,
}

/// Step-size and recording controls for [`run`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct StepConfig {
    pub dt_max: f64,
    /// Courant safety factor in (0, 1].
    pub cfl: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub form: UpdateForm,
    pub face_average: FaceAverage,
    /// Diagnostics cadence in steps.
    pub record_every: usize,
    /// Keep full state snapshots at every record (memory-heavy; off by default).
    pub store_states: bool,
    /// Stop early once the state stops moving.
    pub steady_exit: bool,
    /// Relative L2 change of `u` per unit time below which the state counts
    /// as stationary.
    pub steady_threshold: f64,
    /// `w` must be below this (or equally stationary) for a steady exit.
    pub steady_w_threshold: f64,
    /// Skip the admissibility gate (explicitly unchecked run).
    pub unchecked: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt_max: 1e-3,
            cfl: 0.9,
            t_end: 1.0,
            scheme: Scheme::ImexEuler,
            form: UpdateForm::FluxU,
            face_average: FaceAverage::Arithmetic,
            record_every: 10,
            store_states: false,
            steady_exit: true,
            steady_threshold: 1e-9,
            steady_w_threshold: 1e-3,
            unchecked: false,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0) {
            return Err(Error::InvalidParameter { name: "dt_max", message: "must be > 0".into() });
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter { name: "cfl", message: "must lie in (0, 1]".into() });
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter { name: "t_end", message: "must be >= 0".into() });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter { name: "record_every", message: "must be >= 1".into() });
        }
        Ok(())
    }
}

/// Recorded history of a run: diagnostics at every record, plus the first and
/// last state (full snapshots at each record only when requested).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub states: Vec<State>,
    pub initial_state: State,
    pub final_state: State,
    pub steps: usize,
    /// Time at which the steady-state detector stopped the run, if it did.
    pub steady_exit_at: Option<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

/// Closed-form matrix level after exposure `uacc = int_0^t u ds`:
/// `w0 e^{-uacc}` for `beta = 1`, else
/// `(w0^{1-beta} + (beta-1) uacc)^{1/(1-beta)}`.
///
/// Satisfies `0 < w <= w0` and is pointwise nonincreasing in `uacc`.
pub fn w_closed_form(w0: &Field, uacc: &Field, beta: f64) -> Result<Field> {
    if !(beta >= 1.0) {
        return Err(Error::InvalidParameter { name: "beta", message: format!("must be >= 1, got {beta}") });
    }
    debug_assert!(uacc.min() >= 0.0, "exposure must be nonnegative");
    if beta == 1.0 {
        Ok(w0.zip_with(uacc, |w0, a| w0 * (-a).exp()))
    } else {
        let p = 1.0 / (1.0 - beta);
        Ok(w0.zip_with(uacc, |w0, a| (w0.powf(1.0 - beta) + (beta - 1.0) * a).powf(p)))
    }
}

/// Largest stable step from the current state:
/// transport `h / max |grad w|` per axis, explicit reaction
/// `1 / (delta (1 + 2 max u) + max u w^beta)`, and for the explicit scheme
/// the parabolic bound `h^2 / (2 dim)`, all scaled by the safety factor and
/// capped at `dt_max`.
pub fn cfl_dt(state: &State, params: &Parameters, config: &StepConfig) -> f64 {
    let grid = state.grid();
    let grad_w = gradient(&state.w);
    let mut dt = config.dt_max;
    for (a, g) in grad_w.iter().enumerate() {
        dt = dt.min(config.cfl * grid.h(a) / (max_norm(g) + EPS_VEL));
    }
    let u_max = max_norm(&state.u);
    let uwb_max = state
        .u
        .zip_with(&state.w, |u, w| u * w.powf(params.beta()))
        .values()
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()));
    dt = dt.min(config.cfl / (params.delta() * (1.0 + 2.0 * u_max) + uwb_max + EPS_VEL));
    if config.scheme == Scheme::ExplicitEuler {
        let h_min = grid.min_h();
        dt = dt.min(config.cfl * h_min * h_min / (2.0 * grid.dim() as f64));
    }
    dt
}

/// Outcome of a single [`step`]: the new state plus the mass removed by
/// clipping negative undershoots of `u`.
pub struct StepResult {
    pub state: State,
    pub clipped_mass: f64,
}

/// Advance one step of size `dt`.
///
/// Order of operations: advance the density with the matrix field frozen at
/// the step start, accumulate the exposure integral by the trapezoid rule
/// using that provisional density, evaluate `w` in closed form from the new
/// exposure, and (in the `GradientV` form) reconstitute `u` against the new
/// `w`.
pub fn step(
    state: &State,
    w0: &Field,
    params: &Parameters,
    dt: f64,
    config: &StepConfig,
) -> Result<StepResult> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter { name: "dt", message: format!("must be positive, got {dt}") });
    }
    // Re-derive the raw stability limit (safety factor 1) and refuse clearly
    // unstable requests.
    let raw = {
        let mut c = config.clone();
        c.cfl = 1.0;
        c.dt_max = f64::INFINITY;
        cfl_dt(state, params, &c)
    };
    if dt > raw * (1.0 + 1e-9) {
        return Err(Error::CflViolation { dt, limit: raw });
    }

    let delta = params.delta();
    let beta = params.beta();

    // Provisional new density with w frozen at the step start.
    let mut u_star = match config.form {
        UpdateForm::FluxU => {
            let adv = advective_div_with(&state.u, &state.w, config.face_average);
            let reac = state.u.map(|u| delta * u * (1.0 - u));
            match config.scheme {
                Scheme::ImexEuler => {
                    let rhs = state
                        .u
                        .zip_with(&adv, |u, a| u - dt * a)
                        .zip_with(&reac, |x, r| x + dt * r);
                    solve_diffusion(dt, &rhs)?
                }
                Scheme::ExplicitEuler => {
                    let lap = laplacian_neumann(&state.u);
                    Field::from_values(
                        state.grid(),
                        state
                            .u
                            .values()
                            .iter()
                            .zip(lap.values())
                            .zip(adv.values())
                            .zip(reac.values())
                            .map(|(((&u, &l), &a), &r)| u + dt * (l - a + r))
                            .collect(),
                    )
                }
            }
        }
        UpdateForm::GradientV => {
            let v = to_v(&state.u, &state.w);
            let grad_v = gradient(&v);
            let grad_w = gradient(&state.w);
            let mut transport = vec![0.0; v.len()];
            for a in 0..state.grid().dim() {
                for (t, (gv, gw)) in transport
                    .iter_mut()
                    .zip(grad_v[a].values().iter().zip(grad_w[a].values()))
                {
                    *t += gv * gw;
                }
            }
            let explicit = Field::from_values(
                state.grid(),
                v.values()
                    .iter()
                    .zip(state.w.values())
                    .zip(&transport)
                    .map(|((&vi, &wi), &tr)| {
                        let ew = wi.exp();
                        tr + ew * vi * vi * wi.powf(beta) + delta * vi * (1.0 - vi * ew)
                    })
                    .collect(),
            );
            let v_new = match config.scheme {
                Scheme::ImexEuler => {
                    let rhs = v.zip_with(&explicit, |vi, e| vi + dt * e);
                    solve_diffusion(dt, &rhs)?
                }
                Scheme::ExplicitEuler => {
                    let lap = laplacian_neumann(&v);
                    v.zip_with(&lap, |vi, l| vi + dt * l).zip_with(&explicit, |x, e| x + dt * e)
                }
            };
            from_v(&v_new, &state.w)
        }
    };

    // The exact solution is nonnegative; clip undershoots and account for them.
    let cell = state.grid().cell_volume();
    let mut clipped = 0.0;
    for v in u_star.values_mut() {
        if *v < 0.0 {
            clipped += -*v * cell;
            *v = 0.0;
        }
    }

    // Trapezoidal exposure update with the provisional density, then the
    // closed-form matrix level.
    let uacc = state.uacc.zip_with(&state.u.zip_with(&u_star, |a, b| a + b), |acc, s| acc + 0.5 * dt * s);
    let w_new = w_closed_form(w0, &uacc, beta)?;

    let u_new = match config.form {
        UpdateForm::FluxU => u_star,
        UpdateForm::GradientV => {
            // v was advanced against the old w; express u against the new one.
            let v_new = to_v(&u_star, &state.w);
            from_v(&v_new, &w_new)
        }
    };

    if !u_new.is_finite() || !w_new.is_finite() {
        return Err(Error::InvariantViolation("state became non-finite; reduce dt".into()));
    }

    Ok(StepResult {
        state: State { u: u_new, w: w_new, t: state.t + dt, uacc },
        clipped_mass: clipped,
    })
}

/// Drive a trajectory from `init` to `t_end` (or a detected steady state).
pub fn run(init: &InitialData, params: &Parameters, config: &StepConfig) -> Result<Trajectory> {
    run_with_observer(init, params, config, |_, _| {})
}

/// [`run`] with a callback invoked at every recorded step.
pub fn run_with_observer(
    init: &InitialData,
    params: &Parameters,
    config: &StepConfig,
    mut observe: impl FnMut(&State, &DiagnosticsRecord),
) -> Result<Trajectory> {
    config.validate()?;
    if !config.unchecked {
        let report = check_admissibility(init, params, None);
        if !report.pass {
            return Err(Error::Admissibility(format!(
                "initial data failed the admissibility gate (compatibility residual {:.3e} vs {:.3e})",
                report.compatibility_residual, report.compatibility_tolerance
            )));
        }
    }

    let prediction = steady::predict(init, params);
    let u_star = prediction.u_star_field(init.grid());
    let w0 = init.w0().clone();
    let volume = init.grid().volume();

    let mut state = State::initial(init);
    let mut clip_total = 0.0;
    let mut records = Vec::new();
    let mut states = Vec::new();

    let record = |state: &State,
                      clip_total: f64,
                      records: &mut Vec<DiagnosticsRecord>,
                      states: &mut Vec<State>,
                      observe: &mut dyn FnMut(&State, &DiagnosticsRecord)| {
        let rec = diagnostics::record(state, params, &u_star, clip_total);
        observe(state, &rec);
        records.push(rec);
        if config.store_states {
            states.push(state.clone());
        }
    };

    record(&state, clip_total, &mut records, &mut states, &mut observe);
    let initial_state = state.clone();
    let mut prev_record_state = state.clone();
    let mut steady_exit_at = None;

    let mut steps = 0usize;
    const MAX_STEPS: usize = 200_000_000;
    while state.t < config.t_end * (1.0 - 1e-12) {
        let dt = cfl_dt(&state, params, config).min(config.t_end - state.t);
        if !(dt > 0.0) {
            return Err(Error::CflViolation { dt, limit: 0.0 });
        }
        let result = step(&state, &w0, params, dt, config)?;
        state = result.state;
        clip_total += result.clipped_mass;
        if clip_total > CLIP_MASS_BUDGET * volume {
            return Err(Error::InvariantViolation(format!(
                "clipped mass {clip_total:.3e} exceeds budget {:.3e}; dt too large",
                CLIP_MASS_BUDGET * volume
            )));
        }
        steps += 1;
        if steps >= MAX_STEPS {
            return Err(Error::InvariantViolation("step budget exhausted before t_end".into()));
        }

        let at_end = state.t >= config.t_end * (1.0 - 1e-12);
        if steps % config.record_every == 0 || at_end {
            record(&state, clip_total, &mut records, &mut states, &mut observe);
            if config.steady_exit
                && steady::detect_steady(
                    &prev_record_state,
                    &state,
                    config.steady_threshold,
                    config.steady_w_threshold,
                )
            {
                steady_exit_at = Some(state.t);
                break;
            }
            prev_record_state = state.clone();
        }
    }

    Ok(Trajectory {
        records,
        states,
        initial_state,
        final_state: state,
        steps,
        steady_exit_at,
    })
}

/// Reference trajectory for convergence measurements: fully explicit Euler at
/// a fixed micro step, no recording. Used as the refinement oracle in tests.
pub fn explicit_reference(
    init: &InitialData,
    params: &Parameters,
    t_end: f64,
    dt: f64,
    form: UpdateForm,
) -> Result<State> {
    let config = StepConfig {
        dt_max: dt,
        cfl: 1.0,
        t_end,
        scheme: Scheme::ExplicitEuler,
        form,
        unchecked: true,
        steady_exit: false,
        ..StepConfig::default()
    };
    let w0 = init.w0().clone();
    let mut state = State::initial(init);
    while state.t < t_end * (1.0 - 1e-12) {
        let step_dt = dt.min(t_end - state.t);
        state = step(&state, &w0, params, step_dt, &config)?.state;
    }
    Ok(state)
}

/// Relative max-norm distance between the density fields of two states.
pub fn u_distance(a: &State, b: &State) -> f64 {
    max_norm(&a.u.zip_with(&b.u, |x, y| x - y))
}

/// Relative L2 change of `u` per unit time between two states.
pub fn relative_change_rate(prev: &State, cur: &State) -> f64 {
    let dt = cur.t - prev.t;
    if dt <= 0.0 {
        return f64::INFINITY;
    }
    let diff = l2_norm(&cur.u.zip_with(&prev.u, |a, b| a - b));
    diff / (dt * l2_norm(&prev.u).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, Field, Grid};

    fn params(delta: f64, beta: f64) -> Parameters {
        Parameters::new(delta, beta).unwrap()
    }

    fn cosine_init(grid: Grid, amplitude: f64, gamma: f64) -> InitialData {
        let u0 = Field::from_fn(grid, |x, _| 1.0 + amplitude * (std::f64::consts::PI * x).cos());
        InitialData::new(u0, Field::constant(grid, 1.0), gamma).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let grid = Grid::line(1.0, 8);
        let w0 = Field::constant(grid, 1.0);
        // No exposure yet.
        let w = w_closed_form(&w0, &Field::zeros(grid), 1.0).unwrap();
        assert_eq!(w.values(), w0.values());
        // Exponential branch.
        let w = w_closed_form(&w0, &Field::constant(grid, 2.0_f64.ln()), 1.0).unwrap();
        assert!(w.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        // Power branch: (1 + 1)^{-1} = 1/2.
        let w = w_closed_form(&w0, &Field::constant(grid, 1.0), 2.0).unwrap();
        assert!(w.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(w_closed_form(&w0, &Field::zeros(grid), 0.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn closed_form_bounds(seed in 0u64..200, beta in 1.0f64..4.0) {
            let grid = Grid::line(1.0, 16);
            let w0 = crate::grid::tests::lcg_field(grid, seed).map(|v| v.abs() + 0.2);
            let a1 = crate::grid::tests::lcg_field(grid, seed.wrapping_add(3)).map(|v| v.abs());
            let a2 = a1.map(|v| v + 0.3);
            let w1 = w_closed_form(&w0, &a1, beta).unwrap();
            let w2 = w_closed_form(&w0, &a2, beta).unwrap();
            for ((lo, hi), cap) in w2.values().iter().zip(w1.values()).zip(w0.values()) {
                proptest::prop_assert!(*lo > 0.0);
                proptest::prop_assert!(lo <= hi);
                proptest::prop_assert!(hi <= cap);
            }
        }
    }

    #[test]
    fn cfl_unconstrained_returns_dt_max() {
        let grid = Grid::line(1.0, 16);
        let init = InitialData::new(Field::zeros(grid), Field::constant(grid, 2.0), 0.0).unwrap();
        let state = State::initial(&init);
        let config = StepConfig { dt_max: 0.125, ..StepConfig::default() };
        let dt = cfl_dt(&state, &params(0.0, 1.0), &config);
        assert!((dt - 0.125).abs() < 1e-12);
    }

    #[test]
    fn cfl_explicit_parabolic_bound() {
        // h = 0.01, dim 1, cfl = 0.5 and every other constraint slack:
        // dt = 0.5 * h^2 / 2 = 2.5e-5.
        let grid = Grid::line(1.0, 100);
        let init = InitialData::new(Field::zeros(grid), Field::constant(grid, 1.0), 0.0).unwrap();
        let state = State::initial(&init);
        let config = StepConfig {
            dt_max: 1.0,
            cfl: 0.5,
            scheme: Scheme::ExplicitEuler,
            ..StepConfig::default()
        };
        let dt = cfl_dt(&state, &params(0.0, 1.0), &config);
        assert!((dt - 2.5e-5).abs() < 1e-12, "dt = {dt}");
    }

    #[test]
    fn cfl_never_grows_when_h_shrinks() {
        let p = params(1.0, 1.0);
        let config = StepConfig { dt_max: 1.0, scheme: Scheme::ExplicitEuler, ..StepConfig::default() };
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64, 128] {
            let grid = Grid::line(1.0, n);
            let init = cosine_init(grid, 0.5, 0.5);
            let state = State::initial(&init);
            let dt = cfl_dt(&state, &p, &config);
            assert!(dt <= prev + 1e-15);
            prev = dt;
        }
    }

    #[test]
    fn zero_density_is_invariant() {
        let grid = Grid::line(1.0, 16);
        let w0 = Field::from_fn(grid, |x, _| 1.0 + 0.25 * (std::f64::consts::PI * x).cos());
        let init = InitialData::new(Field::zeros(grid), w0.clone(), 0.0).unwrap();
        let state = State::initial(&init);
        let config = StepConfig::default();
        let next = step(&state, &w0, &params(1.0, 1.0), 1e-3, &config).unwrap().state;
        assert_eq!(next.u.values(), state.u.values());
        assert_eq!(next.w.values(), w0.values());
        assert!((next.t - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn spatially_constant_density_is_exact() {
        // All spatial terms vanish, so u stays at c and w follows the closed
        // form with uacc = c * n * dt exactly.
        let grid = Grid::line(1.0, 16);
        let c = 0.75;
        let w_level = 2.0;
        let w0 = Field::constant(grid, w_level);
        let init = InitialData::new(Field::constant(grid, c), w0.clone(), c).unwrap();
        let config = StepConfig { dt_max: 1e-2, ..StepConfig::default() };
        let p = params(0.0, 1.0);
        let mut state = State::initial(&init);
        let dt = 1e-2;
        for _ in 0..50 {
            state = step(&state, &w0, &p, dt, &config).unwrap().state;
        }
        let expected_w = w_closed_form(&w0, &Field::constant(grid, c * 50.0 * dt), 1.0).unwrap();
        for (&u, (&w, &we)) in state.u.values().iter().zip(state.w.values().iter().zip(expected_w.values())) {
            assert!((u - c).abs() < 1e-13);
            assert!((w - we).abs() < 1e-12);
        }
    }

    #[test]
    fn imex_matches_micro_stepped_reference_at_first_order() {
        let grid = Grid::line(1.0, 8);
        let init = cosine_init(grid, 0.5, 0.5);
        let p = params(1.0, 1.0);
        let w0 = init.w0().clone();
        let config = StepConfig::default();

        // A single step only carries the O(dt^2) local error.
        let one_step = step(&State::initial(&init), &w0, &p, 1e-3, &config).unwrap().state;
        let reference = explicit_reference(&init, &p, 1e-3, 1e-6, UpdateForm::FluxU).unwrap();
        assert!(u_distance(&one_step, &reference) < 1e-4);

        // Over a fixed horizon the accumulated error is first order.
        let horizon = 0.02;
        let err_for = |dt: f64| {
            let mut state = State::initial(&init);
            while state.t < horizon * (1.0 - 1e-12) {
                state = step(&state, &w0, &p, dt.min(horizon - state.t), &config).unwrap().state;
            }
            let reference = explicit_reference(&init, &p, horizon, dt / 1000.0, UpdateForm::FluxU).unwrap();
            u_distance(&state, &reference)
        };
        let e1 = err_for(2e-3);
        let e2 = err_for(1e-3);
        let ratio = e1 / e2;
        assert!(e1 < 5e-3, "horizon error {e1}");
        assert!((1.5..2.8).contains(&ratio), "first-order ratio {ratio}");
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let grid = Grid::line(1.0, 32);
        let init = cosine_init(grid, 0.5, 0.5);
        let state = State::initial(&init);
        let config = StepConfig { scheme: Scheme::ExplicitEuler, ..StepConfig::default() };
        let result = step(&state, init.w0(), &params(1.0, 1.0), 0.5, &config);
        assert!(matches!(result, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn zero_horizon_records_only_initial_snapshot() {
        let grid = Grid::line(1.0, 16);
        let init = cosine_init(grid, 0.5, 0.5);
        let config = StepConfig { t_end: 0.0, ..StepConfig::default() };
        let traj = run(&init, &params(1.0, 1.0), &config).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.steps, 0);
    }

    #[test]
    fn homogeneous_run_reduces_to_the_scalar_ode() {
        // u0 = w0 = 1, delta = 1: u stays 1 and w' = -w, so w(10) = e^{-10}.
        let grid = Grid::line(1.0, 8);
        let init = InitialData::new(Field::constant(grid, 1.0), Field::constant(grid, 1.0), 1.0).unwrap();
        let config = StepConfig {
            dt_max: 1e-3,
            t_end: 10.0,
            record_every: 100,
            steady_exit: false,
            ..StepConfig::default()
        };
        let traj = run(&init, &params(1.0, 1.0), &config).unwrap();
        let u_err = max_norm(&traj.final_state.u.zip_with(&Field::constant(grid, 1.0), |a, b| a - b));
        assert!(u_err < 1e-8, "u drifted by {u_err}");
        let w_expect = (-10.0_f64).exp();
        for &w in traj.final_state.w.values() {
            assert!((w - w_expect).abs() < 1e-12 * w_expect.max(1e-30) + 1e-15);
        }
        // Recorded times strictly increase and w stays positive.
        for pair in traj.records.windows(2) {
            assert!(pair[1].t > pair[0].t);
        }
        assert!(traj.records.iter().all(|r| r.w_max > 0.0));
    }

    #[test]
    fn delta_zero_conserves_mass_to_roundoff() {
        let grid = Grid::line(1.0, 64);
        let init = cosine_init(grid, 0.5, 0.5);
        let config = StepConfig {
            dt_max: 1e-3,
            t_end: 2.0,
            record_every: 50,
            steady_exit: false,
            ..StepConfig::default()
        };
        let traj = run(&init, &params(0.0, 1.0), &config).unwrap();
        let m0 = traj.records[0].mass;
        for r in &traj.records {
            assert!((r.mass - m0).abs() <= 1e-10 * m0, "mass drift {} at t = {}", (r.mass - m0).abs(), r.t);
        }
        assert!((traj.final_state.t - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_v_form_agrees_with_flux_form_at_first_order() {
        let grid = Grid::line(1.0, 16);
        let init = cosine_init(grid, 0.5, 0.5);
        let p = params(1.0, 1.0);
        let base = StepConfig {
            dt_max: 5e-4,
            t_end: 0.25,
            steady_exit: false,
            store_states: false,
            ..StepConfig::default()
        };
        let flux = run(&init, &p, &base).unwrap();
        let vform = run(&init, &p, &StepConfig { form: UpdateForm::GradientV, ..base.clone() }).unwrap();
        let d = u_distance(&flux.final_state, &vform.final_state);
        assert!(d < 20.0 * 5e-4, "forms disagree by {d}");
    }

    #[test]
    fn upwind_faces_also_conserve() {
        let grid = Grid::line(1.0, 32);
        let init = cosine_init(grid, 0.5, 0.5);
        let config = StepConfig {
            dt_max: 1e-3,
            t_end: 0.5,
            face_average: FaceAverage::Upwind,
            steady_exit: false,
            ..StepConfig::default()
        };
        let traj = run(&init, &params(0.0, 1.0), &config).unwrap();
        let m0 = traj.records[0].mass;
        for r in &traj.records {
            assert!((r.mass - m0).abs() <= 1e-10 * m0);
        }
    }

    #[test]
    fn mass_stays_under_the_logistic_bound() {
        let grid = Grid::line(1.0, 64);
        let init = cosine_init(grid, 0.5, 0.5);
        let config = StepConfig { dt_max: 1e-3, t_end: 5.0, record_every: 20, ..StepConfig::default() };
        let traj = run(&init, &params(1.0, 1.0), &config).unwrap();
        let m0 = integrate(init.u0()) / grid.volume();
        let bound = grid.volume() * m0.max(1.0) * (1.0 + 1e-6);
        for r in &traj.records {
            assert!(r.mass <= bound, "mass {} exceeds bound {bound}", r.mass);
        }
    }
}

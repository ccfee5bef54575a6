//! Scenario execution: drive a run, audit it, emit artifacts.
//!
//! Every enabled check lands in the [`RunSummary`] exactly once with its
//! measured value and threshold; a scenario passes iff all enabled checks
//! pass (and, under `--strict`, no warnings were raised). Artifacts per
//! scenario: the diagnostics CSV (fixed 11-column schema), a JSON summary,
//! and optional binary checkpoints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::fixedpoint::{self, PicardOptions, PicardReport};
use crate::grid::Field;
use crate::integrator::{self, Trajectory};
use crate::model::{check_admissibility, AdmissibilityReport, InitialData, Parameters, State};
use crate::steady::{self, EnvelopeVerdicts, RateModel, SteadyPrediction};

use super::checkpoint::checkpoint_save;
use super::config::{Mode, PicardSection, ScenarioConfig};

/// One verification check with its outcome and margin.
#[derive(Debug, Clone, Serialize)]
pub struct CheckVerdict {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckVerdict {
    fn new(name: &str, pass: bool, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, measured, threshold, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalStats {
    pub t: f64,
    pub mass: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub w_max: f64,
    pub u_dist_l2: f64,
    pub f_value: f64,
    pub d_value: f64,
}

impl From<&DiagnosticsRecord> for FinalStats {
    fn from(r: &DiagnosticsRecord) -> Self {
        Self {
            t: r.t,
            mass: r.mass,
            u_min: r.u_min,
            u_max: r.u_max,
            w_max: r.w_max,
            u_dist_l2: r.u_dist_l2,
            f_value: r.f_value,
            d_value: r.d_value,
        }
    }
}

/// Fixed-point construction results embedded in a summary.
#[derive(Debug, Clone, Serialize)]
pub struct PicardSummary {
    pub report: PicardReport,
    pub sweep: Vec<SweepEntry>,
    pub integrator_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub horizon: f64,
    pub iterations: usize,
    pub converged: bool,
    pub first_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub aborted: Option<String>,
}

/// Complete record of one scenario execution.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub mode: Mode,
    pub config: ScenarioConfig,
    pub admissibility: Option<AdmissibilityReport>,
    pub prediction: Option<SteadyPrediction>,
    pub envelopes: Option<EnvelopeVerdicts>,
    pub checks: Vec<CheckVerdict>,
    pub final_stats: Option<FinalStats>,
    pub steps: usize,
    pub records: usize,
    pub steady_exit_at: Option<f64>,
    pub picard: Option<PicardSummary>,
    pub warnings: Vec<String>,
    pub wall_clock_s: f64,
    pub pass: bool,
}

impl RunSummary {
    pub fn one_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let failed: Vec<&str> =
            self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            format!("[{verdict}] {} ({} checks, {:.2}s)", self.name, self.checks.len(), self.wall_clock_s)
        } else {
            format!("[{verdict}] {} — failing: {}", self.name, failed.join(", "))
        }
    }
}

/// Execute a scenario and write its artifacts under `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path, strict: bool) -> Result<RunSummary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut summary = match config.mode {
        Mode::Simulate => simulate_scenario(config, out_dir)?,
        Mode::Picard => picard_scenario(config, out_dir)?,
        Mode::VerifyAll => {
            return Err(Error::Config("verify-all is driven by `verify_all`, not `run_scenario`".into()))
        }
    };
    summary.wall_clock_s = started.elapsed().as_secs_f64();
    if strict && !summary.warnings.is_empty() {
        summary.pass = false;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(out_dir.join(&config.output.summary), json + "\n")?;
    Ok(summary)
}

fn simulate_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary> {
    let params = config.build_parameters()?;
    let init = config.build_initial_data(out_dir)?;
    let admissibility = check_admissibility(&init, &params, config.initial.as_ref().and_then(|i| i.compat_tol));
    let mut warnings = Vec::new();

    if !admissibility.pass && !config.step.unchecked {
        return Ok(RunSummary {
            name: config.display_name(),
            mode: Mode::Simulate,
            config: config.clone(),
            admissibility: Some(admissibility),
            prediction: None,
            envelopes: None,
            checks: vec![CheckVerdict::new("admissibility", false, 0.0, 0.0, "initial data rejected; run skipped")],
            final_stats: None,
            steps: 0,
            records: 0,
            steady_exit_at: None,
            picard: None,
            warnings,
            wall_clock_s: 0.0,
            pass: false,
        });
    }
    if !admissibility.pass {
        warnings.push("admissibility gate failed; run forced by step.unchecked".into());
    }

    let prediction = steady::predict(&init, &params);
    let step_config = config.build_step_config();

    // Checkpoint cadence is counted in records.
    let ckpt_every = config.output.checkpoint_every;
    let mut record_index = 0usize;
    let mut ckpt_error: Option<Error> = None;
    let trajectory = integrator::run_with_observer(&init, &params, &step_config, |state, _| {
        record_index += 1;
        if ckpt_every > 0 && record_index % ckpt_every == 0 && ckpt_error.is_none() {
            let path = out_dir.join(format!("checkpoint_{record_index:06}.ckpt"));
            if let Err(e) = checkpoint_save(state, &path) {
                ckpt_error = Some(e);
            }
        }
    })?;
    if let Some(e) = ckpt_error {
        return Err(e);
    }

    let mut csv = String::with_capacity(trajectory.records.len() * 120 + 128);
    csv.push_str(diagnostics::CSV_HEADER);
    csv.push('\n');
    for r in &trajectory.records {
        csv.push_str(&diagnostics::csv_row(r));
        csv.push('\n');
    }
    std::fs::write(out_dir.join(&config.output.csv), csv)?;

    if config.output.final_checkpoint {
        checkpoint_save(&trajectory.final_state, &out_dir.join("final.ckpt"))?;
    }

    let (checks, envelopes, mut check_warnings) =
        evaluate_checks(config, &params, &init, &prediction, &trajectory)?;
    warnings.append(&mut check_warnings);

    let pass = admissibility.pass && checks.iter().all(|c| c.pass);
    Ok(RunSummary {
        name: config.display_name(),
        mode: Mode::Simulate,
        config: config.clone(),
        admissibility: Some(admissibility),
        prediction: Some(prediction),
        envelopes,
        checks,
        final_stats: trajectory.records.last().map(FinalStats::from),
        steps: trajectory.steps,
        records: trajectory.records.len(),
        steady_exit_at: trajectory.steady_exit_at,
        picard: None,
        warnings,
        wall_clock_s: 0.0,
        pass,
    })
}

fn evaluate_checks(
    config: &ScenarioConfig,
    params: &Parameters,
    init: &InitialData,
    prediction: &SteadyPrediction,
    trajectory: &Trajectory,
) -> Result<(Vec<CheckVerdict>, Option<EnvelopeVerdicts>, Vec<String>)> {
    let cc = &config.checks;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let mut envelopes_out = None;
    if !cc.enabled {
        return Ok((checks, envelopes_out, warnings));
    }

    let records = &trajectory.records;
    let volume = init.grid().volume();
    let m0 = records[0].mass / volume;
    let f0 = records[0].f_value;
    let tol_f = 1e-6 * (1.0 + f0.abs());
    let on = |flag: Option<bool>, applicable: bool| flag.unwrap_or(applicable) && applicable;

    if cc.mass_bound.unwrap_or(true) {
        let bound = volume * m0.max(1.0) * (1.0 + cc.mass_rel_tol);
        let worst = records.iter().map(|r| r.mass).fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckVerdict::new(
            "mass-bound",
            worst <= bound,
            worst,
            bound,
            format!("max mass over {} records vs |Omega| max(1, M0), M0 = {m0:.6}", records.len()),
        ));
    }

    if on(cc.mass_conservation, params.delta() == 0.0) {
        let drift = records
            .iter()
            .map(|r| (r.mass - records[0].mass).abs())
            .fold(0.0_f64, f64::max)
            / records[0].mass.abs().max(f64::MIN_POSITIVE);
        checks.push(CheckVerdict::new(
            "mass-conservation",
            drift <= cc.conservation_rel_tol,
            drift,
            cc.conservation_rel_tol,
            "max relative drift of the conserved mass (delta = 0)",
        ));
    }

    if cc.lyapunov.unwrap_or(true) && records.len() >= 2 {
        let report = diagnostics::lyapunov_decay_check(records, Some(tol_f))?;
        if report.saturated_pairs_skipped > 0 {
            warnings.push(format!(
                "energy audit skipped {} record pairs where w sat on the {:.0e} floor",
                report.saturated_pairs_skipped,
                diagnostics::EPS_W
            ));
        }
        checks.push(CheckVerdict::new(
            "energy-monotone",
            report.pass,
            report.max_positive_increment,
            report.tolerance,
            format!(
                "max F increase between records{}; worst residual |dF/dt + D| = {:.3e}",
                report
                    .worst_increment_at
                    .map(|t| format!(" (worst at t = {t:.4})"))
                    .unwrap_or_default(),
                report.max_abs_residual
            ),
        ));

        let f_bound = volume.max(f0.abs()) + tol_f;
        let f_worst = records.iter().map(|r| r.f_value.abs()).fold(0.0_f64, f64::max);
        checks.push(CheckVerdict::new(
            "energy-bound",
            f_worst <= f_bound,
            f_worst,
            f_bound,
            "max |F| vs max(|Omega|, |F(0)|)",
        ));

        let s_bound = f0 + volume * m0.max(1.0) + tol_f;
        let s_worst = records.iter().map(|r| r.entropy).fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckVerdict::new(
            "entropy-bound",
            s_worst <= s_bound,
            s_worst,
            s_bound,
            "max int u ln u vs F(0) + |Omega| max(1, M0)",
        ));
    }

    let rate_applicable = init.gamma() > 0.0;
    if on(cc.positivity_floor, rate_applicable) {
        let lambda = prediction.lambda.expect("gamma > 0 implies a floor");
        let floor = lambda - cc.floor_tol;
        let worst = records.iter().map(|r| r.u_min).fold(f64::INFINITY, f64::min);
        checks.push(CheckVerdict::new(
            "positivity-floor",
            worst >= floor,
            worst,
            floor,
            format!("min u over the run vs min(1, gamma) e^(-max w0) = {lambda:.6} minus slack"),
        ));
    }

    if on(cc.envelopes, rate_applicable) && records.len() >= 8 {
        let verdicts = steady::rate_envelope_check(records, prediction, cc.tol_env, cc.fit_tol, cc.fit_window)?;
        let lambda = prediction.lambda.expect("gamma > 0");
        checks.push(CheckVerdict::new(
            "w-envelope",
            verdicts.w_envelope.holds,
            verdicts.w_envelope.max_ratio,
            1.0 + cc.tol_env,
            match verdicts.w_envelope.first_violation {
                Some(t) => format!("max w exceeded the decay envelope first at t = {t:.4}"),
                None => "pointwise max w / envelope ratio".into(),
            },
        ));
        checks.push(CheckVerdict::new(
            "w-rate",
            verdicts.w_rate_pass,
            verdicts.w_fit.rate,
            lambda * (1.0 - cc.fit_tol),
            "fitted tail decay rate of max w vs predicted lower bound",
        ));
        let (u_measured, u_threshold, u_detail) = match (&verdicts.u_fit, verdicts.u_rate_bound) {
            (Some(fit), Some(bound)) => (
                fit.rate,
                bound * (1.0 - cc.fit_tol),
                "fitted decay rate of the squared steady distance vs 2 lambda min(1, delta)".to_string(),
            ),
            (Some(fit), None) => (
                fit.rate,
                0.0,
                "polynomial regime: fitted rate of the squared steady distance must be positive".to_string(),
            ),
            (None, _) => (0.0, 0.0, "distance already at roundoff; nothing to fit".to_string()),
        };
        checks.push(CheckVerdict::new("u-rate", verdicts.u_rate_pass, u_measured, u_threshold, u_detail));

        if prediction.rate_model == RateModel::Exponential {
            // Shape audit of int |grad w|^2 <= (C + C' t) e^{-2 lambda t}:
            // e^{2 lambda t} G(t) / (1 + t) must not grow late in the run.
            let q = |r: &DiagnosticsRecord| (2.0 * lambda * r.t).exp() * r.grad_w_l2 * r.grad_w_l2 / (1.0 + r.t);
            let t_mid = 0.5 * (records[0].t + records[records.len() - 1].t);
            let early = records.iter().filter(|r| r.t <= t_mid).map(q).fold(0.0_f64, f64::max);
            let late = records.iter().filter(|r| r.t > t_mid).map(q).fold(0.0_f64, f64::max);
            let (pass, measured, threshold) = if early == 0.0 {
                (late <= 1e-12, late, 1e-12)
            } else {
                (late <= early * (1.0 + cc.tol_env), late / early, 1.0 + cc.tol_env)
            };
            checks.push(CheckVerdict::new(
                "grad-w-envelope",
                pass,
                measured,
                threshold,
                "late/early max of e^(2 lambda t) |grad w|_2^2 / (1 + t) stays bounded",
            ));
        }
        envelopes_out = Some(verdicts);
    }

    if cc.steady_distance.unwrap_or(true) {
        let last = records.last().expect("at least one record");
        checks.push(CheckVerdict::new(
            "steady-u-distance",
            last.u_dist_l2 <= cc.u_dist_tol,
            last.u_dist_l2,
            cc.u_dist_tol,
            format!("final |u - u*|_2 with u* = {:.6}", prediction.u_star_value),
        ));
        checks.push(CheckVerdict::new(
            "steady-w-level",
            last.w_max <= cc.w_max_tol,
            last.w_max,
            cc.w_max_tol,
            "final max w",
        ));
    }

    if cc.stationary_residual.unwrap_or(true) {
        let star = State {
            u: prediction.u_star_field(init.grid()),
            w: Field::zeros(init.grid()),
            t: 0.0,
            uacc: Field::zeros(init.grid()),
        };
        let (r1, r2) = steady::stationary_residual(&star, params);
        let measured = r1.max(r2);
        checks.push(CheckVerdict::new(
            "stationary-residual",
            measured <= 1e-12,
            measured,
            1e-12,
            "both residuals of the stationary system at the predicted steady pair (u*, 0)",
        ));
    }

    if params.delta() == 0.0 {
        // Conservation selects the target mean; divergence between the
        // initial and current mean flags a conservation bug.
        let drift = ((records.last().unwrap().mass - records[0].mass) / volume).abs();
        checks.push(CheckVerdict::new(
            "mean-consistency",
            drift <= 1e-8,
            drift,
            1e-8,
            "current vs initial mean density (delta = 0 cross-check)",
        ));
    }

    let clip = records.last().unwrap().clip_mass;
    checks.push(CheckVerdict::new(
        "clip-budget",
        clip <= integrator::CLIP_MASS_BUDGET * volume,
        clip,
        integrator::CLIP_MASS_BUDGET * volume,
        "total mass removed by clipping negative undershoots",
    ));
    if clip > 0.0 {
        warnings.push(format!("clipping removed {clip:.3e} mass during the run"));
    }

    Ok((checks, envelopes_out, warnings))
}

fn picard_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary> {
    let params = config.build_parameters()?;
    let init = config.build_initial_data(out_dir)?;
    let admissibility = check_admissibility(&init, &params, config.initial.as_ref().and_then(|i| i.compat_tol));
    let mut warnings = Vec::new();
    if !admissibility.pass {
        warnings.push("admissibility gate failed".into());
    }

    let pc: &PicardSection = &config.picard;
    let options = PicardOptions { max_iter: pc.max_iter, tol: pc.tol, sigma: pc.sigma };
    let report = fixedpoint::picard_iterate(&init, &params, pc.horizon, pc.steps, &options)?;

    let mut csv = String::from("iterate,residual,ratio\n");
    for (i, res) in report.residuals.iter().enumerate() {
        let ratio =
            if i == 0 { String::new() } else { format!("{}", report.contraction_ratios[i - 1]) };
        csv.push_str(&format!("{},{},{}\n", i + 1, res, ratio));
    }
    std::fs::write(out_dir.join(&config.output.csv), csv)?;

    let mut checks = Vec::new();
    checks.push(CheckVerdict::new(
        "picard-converged",
        report.converged,
        report.iterations as f64,
        pc.max_iter as f64,
        format!("iterations to reach tol = {:.1e} ({})", pc.tol, report.norm_note),
    ));
    let strictly_decreasing = report.residuals.windows(2).all(|p| p[1] < p[0]);
    checks.push(CheckVerdict::new(
        "picard-residuals-decreasing",
        strictly_decreasing,
        report.contraction_ratios.iter().copied().fold(0.0_f64, f64::max),
        1.0,
        format!("residuals: {:?}", report.residuals),
    ));
    checks.push(CheckVerdict::new(
        "picard-candidate-set",
        report.x_violations.is_empty(),
        report.x_violations.len() as f64,
        0.0,
        if report.x_violations.is_empty() {
            "all iterates stayed in the candidate set".to_string()
        } else {
            report.x_violations.join("; ")
        },
    ));

    // Fixed-point consistency: one extra application of the map moves the
    // exposure by at most 2 tol (1 + sup U).
    if let Some(exposure) = &report.final_exposure {
        let g = fixedpoint::g_of_phi(exposure, init.w0(), params.beta())?;
        let u = fixedpoint::solve_linear_parabolic(&g, init.u0(), &params)?;
        let reapplied = fixedpoint::operator_r(&u, params.beta());
        let drift = reapplied.sup_distance(exposure);
        let bound = 2.0 * pc.tol * (1.0 + exposure.sup_norm());
        checks.push(CheckVerdict::new(
            "picard-consistency",
            drift <= bound,
            drift,
            bound,
            "|R(S(U)) - U|_sup at the reported fixed point",
        ));
    }

    // Cross-validation against the direct integrator on the same time grid.
    let mut integrator_distance = None;
    if pc.match_integrator && report.converged {
        let dt = pc.horizon / pc.steps as f64;
        let step_config = integrator::StepConfig {
            dt_max: dt,
            cfl: 1.0,
            t_end: pc.horizon,
            record_every: 1,
            store_states: true,
            steady_exit: false,
            unchecked: true,
            ..integrator::StepConfig::default()
        };
        let traj = integrator::run(&init, &params, &step_config)?;
        let density = report.final_density.as_ref().expect("converged run has a density");
        let mut worst = 0.0_f64;
        for (m, state) in traj.states.iter().enumerate() {
            let d = density
                .slice(m)
                .zip_with(&state.u, |a, b| a - b)
                .map(f64::abs)
                .max();
            worst = worst.max(d);
        }
        integrator_distance = Some(worst);
        checks.push(CheckVerdict::new(
            "picard-integrator-match",
            worst <= pc.match_tol_dts * dt,
            worst,
            pc.match_tol_dts * dt,
            "sup distance between the fixed-point density and the direct integrator",
        ));
    }

    // Horizon sweep: contraction ratios must grow with the horizon.
    let mut sweep_entries = Vec::new();
    if pc.sweep.len() >= 2 {
        for &horizon in &pc.sweep {
            let r = fixedpoint::picard_iterate(&init, &params, horizon, pc.steps, &options)?;
            sweep_entries.push(SweepEntry {
                horizon,
                iterations: r.iterations,
                converged: r.converged,
                first_ratio: r.first_ratio(),
                mean_ratio: r.mean_ratio(),
                aborted: r.aborted.clone(),
            });
        }
        let ratios: Vec<f64> = sweep_entries.iter().map(|e| e.first_ratio.unwrap_or(f64::INFINITY)).collect();
        let monotone = ratios.windows(2).all(|p| p[1] > p[0]);
        checks.push(CheckVerdict::new(
            "picard-sweep-monotone",
            monotone,
            *ratios.last().unwrap(),
            *ratios.first().unwrap(),
            format!(
                "first contraction ratio per horizon: {}",
                sweep_entries
                    .iter()
                    .map(|e| format!("T = {} -> {:.4}", e.horizon, e.first_ratio.unwrap_or(f64::NAN)))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ));
    }

    let pass = admissibility.pass && checks.iter().all(|c| c.pass);
    Ok(RunSummary {
        name: config.display_name(),
        mode: Mode::Picard,
        config: config.clone(),
        admissibility: Some(admissibility),
        prediction: None,
        envelopes: None,
        checks,
        final_stats: None,
        steps: pc.steps,
        records: report.iterations,
        steady_exit_at: None,
        picard: Some(PicardSummary { report, sweep: sweep_entries, integrator_distance }),
        warnings,
        wall_clock_s: 0.0,
        pass,
    })
}

/// Run a list of scenarios (the built-in verification suite by default) with
/// up to `threads` of them in flight, each writing into its own subdirectory
/// of `out_root`. Scenario-to-worker assignment is by index, so outputs are
/// byte-identical for any thread count.
pub fn verify_all(
    configs: &[ScenarioConfig],
    out_root: &Path,
    threads: usize,
    strict: bool,
) -> Result<Vec<RunSummary>> {
    std::fs::create_dir_all(out_root)?;
    let threads = threads.max(1);
    let mut results: Vec<Option<Result<RunSummary>>> = Vec::new();
    results.resize_with(configs.len(), || None);

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker in 0..threads.min(configs.len().max(1)) {
            let configs = &configs;
            let out_root = &out_root;
            handles.push(scope.spawn(move || {
                let mut own = Vec::new();
                for (i, config) in configs.iter().enumerate() {
                    if i % threads == worker {
                        let dir = out_root.join(config.display_name());
                        own.push((i, run_scenario(config, &dir, strict)));
                    }
                }
                own
            }));
        }
        for handle in handles {
            for (i, result) in handle.join().expect("scenario worker panicked") {
                results[i] = Some(result);
            }
        }
    });

    results.into_iter().map(|r| r.expect("every scenario ran")).collect()
}

/// The built-in verification suite.
///
/// Four trajectory scenarios exercise conservation, the logistic/exponential
/// regime, the polynomial regime and the homogeneous ODE reductions; the
/// fixed-point scenario exercises the short-horizon construction and its
/// degradation on longer horizons.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    use super::config::*;
    use super::profiles::Profile;

    let cosine_grid = |n: usize| GridSection { extents: vec![1.0], n: vec![n] };
    let cosine_initial = || InitialSection {
        u0: Some(Profile::CosineBump { base: 1.0, amplitude: 0.5 }),
        w0: Some(Profile::Constant { value: 1.0 }),
        checkpoint: None,
        gamma: 0.5,
        compat_tol: None,
    };
    let homogeneous_initial = || InitialSection {
        u0: Some(Profile::Constant { value: 1.0 }),
        w0: Some(Profile::Constant { value: 1.0 }),
        checkpoint: None,
        gamma: 1.0,
        compat_tol: None,
    };
    let base = |name: &str| ScenarioConfig {
        mode: Mode::Simulate,
        name: Some(name.into()),
        grid: Some(cosine_grid(64)),
        params: None,
        initial: Some(cosine_initial()),
        step: StepSection::default(),
        output: OutputSection::default(),
        checks: ChecksSection::default(),
        picard: PicardSection::default(),
        configs: Vec::new(),
    };

    let mut conserved = base("conserved-mass");
    conserved.params = Some(ParamsSection { delta: 0.0, beta: 1.0 });
    conserved.step = StepSection { dt_max: 1e-4, t_end: 40.0, record_every: 100, ..StepSection::default() };

    let mut logistic = base("logistic-exponential");
    logistic.params = Some(ParamsSection { delta: 1.0, beta: 1.0 });
    logistic.step = StepSection { dt_max: 1e-4, t_end: 40.0, record_every: 100, ..StepSection::default() };

    let mut polynomial = base("polynomial-decay");
    polynomial.params = Some(ParamsSection { delta: 1.0, beta: 2.0 });
    polynomial.step = StepSection { dt_max: 5e-3, t_end: 200.0, record_every: 100, ..StepSection::default() };
    // Polynomial decay is slow by design; the run ends at t_end with w still
    // around 5e-3.
    polynomial.checks.w_max_tol = 1e-2;
    polynomial.checks.u_dist_tol = 1e-3;

    let mut homog_exp = base("homogeneous-exponential");
    homog_exp.initial = Some(homogeneous_initial());
    homog_exp.params = Some(ParamsSection { delta: 1.0, beta: 1.0 });
    homog_exp.step = StepSection { dt_max: 1e-3, t_end: 8.0, record_every: 20, ..StepSection::default() };
    homog_exp.checks.w_max_tol = 1e-3;

    let mut homog_poly = base("homogeneous-polynomial");
    homog_poly.initial = Some(homogeneous_initial());
    homog_poly.params = Some(ParamsSection { delta: 1.0, beta: 2.0 });
    homog_poly.step = StepSection { dt_max: 1e-3, t_end: 8.0, record_every: 20, ..StepSection::default() };
    // w(t) = (1 + t)^{-1} only reaches 1/9 by t = 8.
    homog_poly.checks.w_max_tol = 0.2;

    let mut picard = base("picard-short-horizon");
    picard.mode = Mode::Picard;
    picard.grid = Some(cosine_grid(16));
    picard.params = Some(ParamsSection { delta: 0.0, beta: 2.0 });
    picard.picard = PicardSection {
        horizon: 0.05,
        steps: 64,
        sweep: vec![0.05, 0.2, 0.8, 3.2],
        ..PicardSection::default()
    };

    vec![conserved, logistic, polynomial, homog_exp, homog_poly, picard]
}

/// Resolve the scenario list for `verify-all`: explicit file list or the
/// built-in suite.
pub fn resolve_verify_configs(config: Option<&ScenarioConfig>, base_dir: &Path) -> Result<Vec<ScenarioConfig>> {
    match config {
        None => Ok(builtin_scenarios()),
        Some(c) if c.configs.is_empty() => Ok(builtin_scenarios()),
        Some(c) => c
            .configs
            .iter()
            .map(|rel| super::config::load_config(&base_dir.join(rel)))
            .collect(),
    }
}

/// Path helper used by the binary: the diagnostics CSV of a scenario.
pub fn csv_path(config: &ScenarioConfig, out_dir: &Path) -> PathBuf {
    out_dir.join(&config.output.csv)
}

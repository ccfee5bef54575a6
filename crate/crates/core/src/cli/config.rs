//! Scenario configuration: a small TOML dialect, fully validated up front.
//!
//! Unknown keys are rejected, every semantic violation is reported (all of
//! them, not just the first), and defaults are filled so a minimal config is
//! just a grid, parameters and an initial profile. The exact grammar is
//! documented in the repository README.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FaceAverage, Grid};
use crate::integrator::{Scheme, StepConfig, UpdateForm};
use crate::model::{InitialData, Parameters};

use super::checkpoint::checkpoint_load;
use super::profiles::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Picard,
    VerifyAll,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub extents: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub u0: Option<Profile>,
    #[serde(default)]
    pub w0: Option<Profile>,
    /// Resume from a checkpoint instead of analytic profiles.
    #[serde(default)]
    pub checkpoint: Option<String>,
    /// Certified lower bound on u0 (0 disables rate predictions).
    #[serde(default)]
    pub gamma: f64,
    /// Override for the boundary-compatibility tolerance.
    #[serde(default)]
    pub compat_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepSection {
    pub dt_max: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub form: UpdateForm,
    pub face_average: FaceAverage,
    pub record_every: usize,
    pub store_states: bool,
    pub steady_exit: bool,
    pub steady_threshold: f64,
    pub steady_w_threshold: f64,
    pub unchecked: bool,
}

impl Default for StepSection {
    fn default() -> Self {
        let d = StepConfig::default();
        Self {
            dt_max: d.dt_max,
            cfl: d.cfl,
            t_end: d.t_end,
            scheme: d.scheme,
            form: d.form,
            face_average: d.face_average,
            record_every: d.record_every,
            store_states: d.store_states,
            steady_exit: d.steady_exit,
            steady_threshold: d.steady_threshold,
            steady_w_threshold: d.steady_w_threshold,
            unchecked: d.unchecked,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv: String,
    pub summary: String,
    /// Checkpoint cadence in records (0 = none).
    pub checkpoint_every: usize,
    pub final_checkpoint: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            csv: "diagnostics.csv".into(),
            summary: "summary.json".into(),
            checkpoint_every: 0,
            final_checkpoint: false,
        }
    }
}

/// Verification-check switches and tolerances. `None` switches mean
/// "enabled whenever applicable" (e.g. conservation only for delta = 0,
/// envelopes only with gamma > 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    pub enabled: bool,
    pub mass_bound: Option<bool>,
    pub mass_conservation: Option<bool>,
    pub lyapunov: Option<bool>,
    pub positivity_floor: Option<bool>,
    pub envelopes: Option<bool>,
    pub steady_distance: Option<bool>,
    pub stationary_residual: Option<bool>,
    /// Relative slack on the mass bound.
    pub mass_rel_tol: f64,
    /// Relative drift allowed for delta = 0 conservation.
    pub conservation_rel_tol: f64,
    /// Absolute slack under the positivity floor.
    pub floor_tol: f64,
    /// Relative slack above decay envelopes.
    pub tol_env: f64,
    /// Relative shortfall allowed on fitted decay rates.
    pub fit_tol: f64,
    /// Fraction of the time span used by tail fits.
    pub fit_window: f64,
    pub u_dist_tol: f64,
    pub w_max_tol: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            enabled: true,
            mass_bound: None,
            mass_conservation: None,
            lyapunov: None,
            positivity_floor: None,
            envelopes: None,
            steady_distance: None,
            stationary_residual: None,
            mass_rel_tol: 1e-6,
            conservation_rel_tol: 1e-10,
            floor_tol: 1e-3,
            tol_env: 0.05,
            fit_tol: 0.10,
            fit_window: 0.5,
            u_dist_tol: 1e-3,
            w_max_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSection {
    /// Horizon T of the construction.
    pub horizon: f64,
    /// Uniform time steps across the horizon.
    pub steps: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Candidate-set radius override.
    pub sigma: Option<f64>,
    /// Extra horizons to sweep for the contraction-vs-horizon record.
    pub sweep: Vec<f64>,
    /// Cross-validate the fixed point against the direct integrator.
    pub match_integrator: bool,
    /// Allowed sup distance, in units of dt.
    pub match_tol_dts: f64,
}

impl Default for PicardSection {
    fn default() -> Self {
        Self {
            horizon: 0.05,
            steps: 64,
            max_iter: 25,
            tol: 1e-9,
            sigma: None,
            sweep: Vec::new(),
            match_integrator: true,
            match_tol_dts: 5.0,
        }
    }
}

/// A fully parsed scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub params: Option<ParamsSection>,
    #[serde(default)]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub step: StepSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub picard: PicardSection,
    /// For `mode = "verify-all"`: scenario files to run instead of the
    /// built-in suite.
    #[serde(default)]
    pub configs: Vec<String>,
}

/// Parse and validate a scenario config, reporting every violation at once.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl ScenarioConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| match self.mode {
            Mode::Simulate => "simulate".into(),
            Mode::Picard => "picard".into(),
            Mode::VerifyAll => "verify-all".into(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut violations: Vec<String> = Vec::new();

        if self.mode == Mode::VerifyAll {
            if self.grid.is_some() || self.params.is_some() || self.initial.is_some() {
                violations.push("verify-all configs list scenario files; grid/params/initial do not apply".into());
            }
            return finish(violations);
        }

        match &self.grid {
            None => violations.push("grid: section is required".into()),
            Some(g) => {
                if g.n.len() != g.extents.len() || g.n.is_empty() || g.n.len() > 2 {
                    violations.push(format!(
                        "grid: n and extents must both have 1 or 2 entries (got {} and {})",
                        g.n.len(),
                        g.extents.len()
                    ));
                } else {
                    if g.n.iter().any(|&k| k < 3) {
                        violations.push("grid: need at least 3 cells per axis".into());
                    }
                    if g.extents.iter().any(|&e| !(e > 0.0)) {
                        violations.push("grid: extents must be positive".into());
                    }
                }
            }
        }

        let params = self.params.clone().unwrap_or(ParamsSection { delta: 0.0, beta: 1.0 });
        if !(params.delta >= 0.0) || !params.delta.is_finite() {
            violations.push(format!("params.delta must be >= 0, got {}", params.delta));
        }
        if !(params.beta >= 1.0) || !params.beta.is_finite() {
            violations.push(format!("params.beta must be >= 1, got {}", params.beta));
        }

        match &self.initial {
            None => violations.push("initial: section is required".into()),
            Some(init) => {
                let profiles = init.u0.is_some() || init.w0.is_some();
                if init.checkpoint.is_some() && profiles {
                    violations.push("initial: give either profiles or a checkpoint, not both".into());
                }
                if init.checkpoint.is_none() && (init.u0.is_none() || init.w0.is_none()) {
                    violations.push("initial: u0 and w0 profiles (or a checkpoint) are required".into());
                }
                if !(init.gamma >= 0.0) {
                    violations.push(format!("initial.gamma must be >= 0, got {}", init.gamma));
                }
            }
        }

        if !(self.step.dt_max > 0.0) {
            violations.push(format!("step.dt_max must be > 0, got {}", self.step.dt_max));
        }
        if !(self.step.cfl > 0.0 && self.step.cfl <= 1.0) {
            violations.push(format!("step.cfl must lie in (0, 1], got {}", self.step.cfl));
        }
        if !(self.step.t_end >= 0.0) {
            violations.push(format!("step.t_end must be >= 0, got {}", self.step.t_end));
        }
        if self.step.record_every == 0 {
            violations.push("step.record_every must be >= 1".into());
        }

        for (name, v) in [
            ("checks.mass_rel_tol", self.checks.mass_rel_tol),
            ("checks.conservation_rel_tol", self.checks.conservation_rel_tol),
            ("checks.floor_tol", self.checks.floor_tol),
            ("checks.tol_env", self.checks.tol_env),
            ("checks.fit_tol", self.checks.fit_tol),
            ("checks.u_dist_tol", self.checks.u_dist_tol),
            ("checks.w_max_tol", self.checks.w_max_tol),
        ] {
            if !(v >= 0.0) {
                violations.push(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(self.checks.fit_window > 0.0 && self.checks.fit_window <= 1.0) {
            violations.push(format!("checks.fit_window must lie in (0, 1], got {}", self.checks.fit_window));
        }

        if self.mode == Mode::Picard {
            if !(params.beta > 1.0) {
                violations.push("picard requires beta > 1".into());
            }
            if !(self.picard.horizon > 0.0) {
                violations.push(format!("picard.horizon must be > 0, got {}", self.picard.horizon));
            }
            if self.picard.steps < 2 {
                violations.push("picard.steps must be >= 2".into());
            }
            if self.picard.max_iter == 0 {
                violations.push("picard.max_iter must be >= 1".into());
            }
            if !(self.picard.tol > 0.0) {
                violations.push(format!("picard.tol must be > 0, got {}", self.picard.tol));
            }
            if self.picard.sweep.iter().any(|&t| !(t > 0.0)) {
                violations.push("picard.sweep horizons must be > 0".into());
            }
        }

        finish(violations)
    }

    pub fn build_grid(&self) -> Grid {
        let g = self.grid.as_ref().expect("validated config has a grid");
        if g.n.len() == 1 {
            Grid::line(g.extents[0], g.n[0])
        } else {
            Grid::rectangle([g.extents[0], g.extents[1]], [g.n[0], g.n[1]])
        }
    }

    pub fn build_parameters(&self) -> Result<Parameters> {
        let p = self.params.clone().unwrap_or(ParamsSection { delta: 0.0, beta: 1.0 });
        Parameters::new(p.delta, p.beta)
    }

    /// Sample profiles (or load a checkpoint) into initial data. Checkpoints
    /// must match the configured grid exactly.
    pub fn build_initial_data(&self, base_dir: &Path) -> Result<InitialData> {
        let grid = self.build_grid();
        let init = self.initial.as_ref().expect("validated config has initial data");
        if let Some(ckpt) = &init.checkpoint {
            let path = base_dir.join(ckpt);
            let state = checkpoint_load(&path)?;
            if state.grid() != grid {
                return Err(Error::Checkpoint(format!(
                    "checkpoint grid {:?} does not match the configured grid {:?}",
                    state.grid(),
                    grid
                )));
            }
            // A resumed run restarts the clock: the state is re-interpreted
            // as fresh initial data, which the autonomous system permits.
            return InitialData::new(state.u, state.w, init.gamma);
        }
        let u0 = init.u0.as_ref().expect("validated").sample(grid)?;
        let w0 = init.w0.as_ref().expect("validated").sample(grid)?;
        InitialData::new(u0, w0, init.gamma)
    }

    pub fn build_step_config(&self) -> StepConfig {
        StepConfig {
            dt_max: self.step.dt_max,
            cfl: self.step.cfl,
            t_end: self.step.t_end,
            scheme: self.step.scheme,
            form: self.step.form,
            face_average: self.step.face_average,
            record_every: self.step.record_every,
            store_states: self.step.store_states,
            steady_exit: self.step.steady_exit,
            steady_threshold: self.step.steady_threshold,
            steady_w_threshold: self.step.steady_w_threshold,
            // The scenario runner performs (and reports) the admissibility
            // gate itself.
            unchecked: true,
        }
    }
}

fn finish(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(violations.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "simulate"

[grid]
extents = [1.0]
n = [64]

[params]
delta = 0.0
beta = 1.0

[initial]
u0 = { profile = "cosine-bump", base = 1.0, amplitude = 0.5 }
w0 = { profile = "constant", value = 1.0 }
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = parse_config(MINIMAL).unwrap();
        assert_eq!(config.mode, Mode::Simulate);
        assert_eq!(config.step.record_every, 10);
        assert_eq!(config.step.scheme, Scheme::ImexEuler);
        assert!(config.checks.enabled);
        let grid = config.build_grid();
        assert_eq!(grid.dim(), 1);
        assert_eq!(grid.n(0), 64);
        config.build_parameters().unwrap();
        config.build_initial_data(Path::new(".")).unwrap();
    }

    #[test]
    fn beta_below_one_is_rejected_by_name() {
        let text = MINIMAL.replace("beta = 1.0", "beta = 0.5");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("beta must be >= 1"), "{err}");
    }

    #[test]
    fn picard_with_beta_one_is_rejected() {
        let text = MINIMAL.replace("mode = \"simulate\"", "mode = \"picard\"");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("picard requires beta > 1"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[step]\nwarp_factor = 9\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("warp_factor") || err.contains("unknown field"), "{err}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = r#"
mode = "simulate"

[grid]
extents = [1.0]
n = [2]

[params]
delta = -1.0
beta = 0.2

[initial]
gamma = -0.5
"#;
        let err = parse_config(text).unwrap_err().to_string();
        for needle in ["3 cells", "delta", "beta", "gamma", "u0 and w0"] {
            assert!(err.contains(needle), "missing '{needle}' in: {err}");
        }
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        let err = parse_config("mode = \"simulate\"\n[grid\n").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }
}
